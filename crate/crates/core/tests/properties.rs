use std::collections::BTreeMap;

use geomr::makespan::makespan_of;
use geomr::plan::{parse_plan, plan_to_string};
use geomr::platform::{
    parse_scenario, scenario_to_string, COMPUTE_RATE_RANGE, CONTINENT_BANDWIDTH_KBPS,
};
use geomr::units::KB;
use geomr::{
    conservation_violations, evaluate, make_environment, simulate, uniform_plan, validate_platform,
    Barrier, BarrierConfig, EnvironmentKind, ExecutionPlan, PlatformGraph, Scenario, SimConfig,
    Workload,
};
use proptest::prelude::*;

const REL: f64 = 1e-9;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

fn ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn platform(
    push: Vec<Vec<f64>>,
    shuffle: Vec<Vec<f64>>,
    map: Vec<f64>,
    reduce: Vec<f64>,
) -> PlatformGraph {
    let (s, m, r) = (push.len(), map.len(), reduce.len());
    let mut cluster_of = BTreeMap::new();
    for id in ids("s", s).into_iter().chain(ids("m", m)).chain(ids("r", r)) {
        cluster_of.insert(id, "c0".to_string());
    }
    PlatformGraph {
        sources: ids("s", s),
        mappers: ids("m", m),
        reducers: ids("r", r),
        push_bandwidth: push,
        shuffle_bandwidth: shuffle,
        map_capacity: map,
        reduce_capacity: reduce,
        cluster_of,
    }
}

fn rate() -> impl Strategy<Value = f64> {
    (1.0f64..1000.0).prop_map(|x| x * 1e5)
}

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    // Cubing spreads mass unevenly and makes exact zeros after rounding rare
    // but near-zero entries common.
    prop::collection::vec(0.0f64..1.0, n).prop_map(|v| {
        let w: Vec<f64> = v.iter().map(|x| x * x * x + 1e-6).collect();
        let t: f64 = w.iter().sum();
        w.iter().map(|x| x / t).collect()
    })
}

fn instance() -> impl Strategy<Value = (Scenario, ExecutionPlan)> {
    (1usize..=3, 1usize..=3, 1usize..=3).prop_flat_map(|(s, m, r)| {
        (
            prop::collection::vec(prop::collection::vec(rate(), m), s),
            prop::collection::vec(prop::collection::vec(rate(), r), m),
            prop::collection::vec(rate(), m),
            prop::collection::vec(rate(), r),
            prop::collection::vec(1e8f64..1e10, s),
            0.05f64..20.0,
            prop::collection::vec(simplex(m), s),
            simplex(r),
        )
            .prop_map(|(pb, sb, mc, rc, d, alpha, x, y)| {
                let p = platform(pb, sb, mc, rc);
                let w = Workload {
                    data_at_source: d,
                    alpha,
                };
                let plan = ExecutionPlan {
                    push_fraction: x,
                    reducer_fraction: y,
                };
                (Scenario::new("random", p, w).unwrap(), plan)
            })
    })
}

fn barriers() -> impl Strategy<Value = BarrierConfig> {
    (0usize..27).prop_map(|i| BarrierConfig::all()[i])
}

fn rank(b: Barrier) -> usize {
    match b {
        Barrier::Global => 0,
        Barrier::Local => 1,
        Barrier::Pipelined => 2,
    }
}

/// Configurations where every pipelined boundary is preceded only by
/// pipelined ones, so every phase can start streaming at time zero.
fn streams_from_start(b: BarrierConfig) -> bool {
    let bs = b.boundaries();
    (0..3).all(|i| bs[i] != Barrier::Pipelined || bs[..i].iter().all(|&p| p == Barrier::Pipelined))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn relaxing_one_boundary_never_increases_makespan((s, plan) in instance(), b in barriers(), i in 0usize..3) {
        let current = b.boundaries()[i];
        for relaxed in Barrier::ALL.into_iter().filter(|&x| rank(x) > rank(current)) {
            let tighter = makespan_of(&s.platform, &s.workload, &plan, b);
            let looser = makespan_of(&s.platform, &s.workload, &plan, b.with_boundary(i, relaxed));
            prop_assert!(looser <= tighter * (1.0 + REL), "{b} -> {relaxed:?} at {i}: {looser} > {tighter}");
        }
    }

    #[test]
    fn times_scale_with_data_and_inversely_with_rates((s, plan) in instance(), b in barriers(), c in 0.1f64..10.0) {
        let base = evaluate(&s.platform, &s.workload, &plan, b).unwrap();
        let mut more = s.workload.clone();
        more.data_at_source.iter_mut().for_each(|d| *d *= c);
        let scaled_data = evaluate(&s.platform, &more, &plan, b).unwrap();
        let faster = evaluate(&s.platform.scaled(c), &s.workload, &plan, b).unwrap();
        prop_assert!(close(scaled_data.makespan, base.makespan * c, REL));
        prop_assert!(close(faster.makespan, base.makespan / c, REL));
        for (a, z) in scaled_data.reduce_end.iter().zip(&base.reduce_end) {
            prop_assert!(close(*a, z * c, REL));
        }
        for (a, z) in faster.map_end.iter().zip(&base.map_end) {
            prop_assert!(close(*a, z / c, REL));
        }
    }

    #[test]
    fn breakdown_sums_to_makespan((s, plan) in instance(), b in barriers()) {
        let t = evaluate(&s.platform, &s.workload, &plan, b).unwrap();
        let d = t.phase_breakdown;
        prop_assert!(d.push >= 0.0 && d.map >= 0.0 && d.shuffle >= 0.0 && d.reduce >= 0.0, "{d:?}");
        prop_assert!(close(d.total(), t.makespan, 1e-12));
    }

    #[test]
    fn relabeling_mappers_leaves_makespan_unchanged((s, plan) in instance(), b in barriers(), seed in any::<u64>()) {
        let m = s.platform.num_mappers();
        let mut perm: Vec<usize> = (0..m).collect();
        // Deterministic shuffle from the seed.
        for i in (1..m).rev() {
            perm.swap(i, (seed as usize).wrapping_mul(2654435761).wrapping_add(i) % (i + 1));
        }
        let mut p = s.platform.clone();
        p.mappers = perm.iter().map(|&j| s.platform.mappers[j].clone()).collect();
        p.map_capacity = perm.iter().map(|&j| s.platform.map_capacity[j]).collect();
        p.shuffle_bandwidth = perm.iter().map(|&j| s.platform.shuffle_bandwidth[j].clone()).collect();
        p.push_bandwidth = s.platform.push_bandwidth.iter().map(|row| perm.iter().map(|&j| row[j]).collect()).collect();
        let relabeled = ExecutionPlan {
            push_fraction: plan.push_fraction.iter().map(|row| perm.iter().map(|&j| row[j]).collect()).collect(),
            reducer_fraction: plan.reducer_fraction.clone(),
        };
        let a = makespan_of(&s.platform, &s.workload, &plan, b);
        let z = makespan_of(&p, &s.workload, &relabeled, b);
        prop_assert!(close(a, z, 1e-12), "{a} vs {z}");
    }

    #[test]
    fn uniform_is_optimal_on_homogeneous_platforms(
        n in 1usize..=4,
        bw in rate(),
        cap in rate(),
        d in 1e8f64..1e10,
        alpha in 0.05f64..20.0,
        b in barriers(),
        x in prop::collection::vec(simplex(4), 4),
        y in simplex(4),
    ) {
        let p = platform(vec![vec![bw; n]; n], vec![vec![bw; n]; n], vec![cap; n], vec![cap; n]);
        let w = Workload { data_at_source: vec![d; n], alpha };
        let renorm = |v: &[f64]| { let t: f64 = v[..n].iter().sum(); v[..n].iter().map(|e| e / t).collect::<Vec<f64>>() };
        let plan = ExecutionPlan {
            push_fraction: x[..n].iter().map(|r| renorm(r)).collect(),
            reducer_fraction: renorm(&y),
        };
        let uniform = makespan_of(&p, &w, &uniform_plan(&p), b);
        prop_assert!(makespan_of(&p, &w, &plan, b) >= uniform * (1.0 - REL));
    }

    #[test]
    fn scenario_text_round_trips((s, _) in instance()) {
        let text = scenario_to_string(&s);
        let back = parse_scenario(&text, "round-trip").unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn plan_text_round_trips((s, plan) in instance()) {
        let text = plan_to_string(&plan, &s.platform, &s.name, 1024);
        let back = parse_plan(&text, "round-trip", &s.platform).unwrap();
        for (a, z) in back.push_fraction.iter().flatten().zip(plan.push_fraction.iter().flatten()) {
            prop_assert!((a - z).abs() <= 1e-12);
        }
        for (a, z) in back.reducer_fraction.iter().zip(&plan.reducer_fraction) {
            prop_assert!((a - z).abs() <= 1e-12);
        }
    }

    #[test]
    fn fluid_simulation_conserves_bytes_and_bounds_the_model((s, plan) in instance(), b in barriers()) {
        let trace = simulate(&s.platform, &s.workload, &plan, SimConfig::fluid(b)).unwrap();
        let model = makespan_of(&s.platform, &s.workload, &plan, b);
        let v = conservation_violations(&s.platform, &s.workload, &plan, &trace);
        prop_assert!(v.is_empty(), "{v:?}");
        prop_assert!(trace.makespan() >= model * (1.0 - REL), "{b}: {} < {model}", trace.makespan());
        if streams_from_start(b) {
            prop_assert!(close(trace.makespan(), model, REL), "{b}: {} vs {model}", trace.makespan());
        }
        let d = trace.breakdown();
        prop_assert!(close(d.total(), trace.makespan(), 1e-12));
    }

    #[test]
    fn simulated_makespan_is_monotone_in_barriers((s, plan) in instance(), b in barriers(), i in 0usize..3) {
        let current = b.boundaries()[i];
        let tighter = simulate(&s.platform, &s.workload, &plan, SimConfig::fluid(b)).unwrap().makespan();
        for relaxed in Barrier::ALL.into_iter().filter(|&x| rank(x) > rank(current)) {
            let cfg = SimConfig::fluid(b.with_boundary(i, relaxed));
            let looser = simulate(&s.platform, &s.workload, &plan, cfg).unwrap().makespan();
            prop_assert!(looser <= tighter * (1.0 + REL), "{b} -> {relaxed:?} at {i}: {looser} > {tighter}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn environments_respect_bandwidth_table(kind_index in 0usize..4, seed in any::<u64>()) {
        let kind = EnvironmentKind::ALL[kind_index];
        let s = make_environment(kind, seed);
        prop_assert!(validate_platform(&s.platform).is_ok());
        prop_assert_eq!(&s, &make_environment(kind, seed));
        let continent: BTreeMap<&str, usize> = kind.clusters().iter().map(|&(l, c)| (l, c as usize)).collect();
        let p = &s.platform;
        let of = |id: &String| continent[p.cluster(id).unwrap()];
        for (layer, from, to) in [
            (&p.push_bandwidth, &p.sources, &p.mappers),
            (&p.shuffle_bandwidth, &p.mappers, &p.reducers),
        ] {
            for (a, row) in from.iter().zip(layer) {
                for (z, &bw) in to.iter().zip(row) {
                    let (lo, hi) = CONTINENT_BANDWIDTH_KBPS[of(a)][of(z)];
                    prop_assert!(bw >= lo * KB && bw <= hi * KB, "{a}->{z}: {bw}");
                }
            }
        }
        for &c in p.map_capacity.iter().chain(&p.reduce_capacity) {
            prop_assert!(c >= COMPUTE_RATE_RANGE.0 && c <= COMPUTE_RATE_RANGE.1);
        }
    }
}

#[test]
fn global_8_us_eu_links_within_published_range() {
    let s = make_environment(EnvironmentKind::Global8, 1);
    let p = &s.platform;
    let mut checked = 0;
    for (a, row) in p.sources.iter().zip(&p.push_bandwidth) {
        for (z, &bw) in p.mappers.iter().zip(row) {
            let (ca, cz) = (p.cluster(a).unwrap(), p.cluster(z).unwrap());
            if ca.starts_with("us-") && cz.starts_with("eu-") {
                assert!((110.0 * KB..=2267.0 * KB).contains(&bw), "{a}->{z}: {bw}");
                checked += 1;
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn local_dc_shares_one_cluster() {
    let s = make_environment(EnvironmentKind::LocalDc, 7);
    assert_eq!(s.platform.clusters().len(), 1);
}
