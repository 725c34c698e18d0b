//! Analytic phase timeline and makespan of a plan under a barrier configuration.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::plan::{validate_plan, Barrier, BarrierConfig, ExecutionPlan};
use crate::platform::{PlatformGraph, Workload};

/// Work durations of every transfer and compute task, independent of barriers.
#[derive(Debug, Clone, PartialEq)]
pub struct Durations {
    /// Transfer time of each source's share to each mapper (S×M).
    pub push: Vec<Vec<f64>>,
    /// Map compute time per mapper.
    pub map: Vec<f64>,
    /// Transfer time of each mapper's output share to each reducer (M×R).
    pub shuffle: Vec<Vec<f64>>,
    /// Reduce compute time per reducer.
    pub reduce: Vec<f64>,
}

fn ratio(amount: f64, rate: f64) -> f64 {
    if amount == 0.0 {
        0.0
    } else {
        amount / rate
    }
}

impl Durations {
    pub fn from_plan(p: &PlatformGraph, w: &Workload, plan: &ExecutionPlan) -> Self {
        let load = plan.mapper_load(&w.data_at_source);
        let total = w.total_data();
        let push = plan
            .push_fraction
            .iter()
            .zip(&w.data_at_source)
            .zip(&p.push_bandwidth)
            .map(|((row, &d), bw)| row.iter().zip(bw).map(|(&x, &b)| ratio(d * x, b)).collect())
            .collect();
        let map = load.iter().zip(&p.map_capacity).map(|(&l, &c)| ratio(l, c)).collect();
        let shuffle = load
            .iter()
            .zip(&p.shuffle_bandwidth)
            .map(|(&l, bw)| {
                plan.reducer_fraction
                    .iter()
                    .zip(bw)
                    .map(|(&y, &b)| ratio(w.alpha * l * y, b))
                    .collect()
            })
            .collect();
        let reduce = plan
            .reducer_fraction
            .iter()
            .zip(&p.reduce_capacity)
            .map(|(&y, &c)| ratio(w.alpha * total * y, c))
            .collect();
        Self {
            push,
            map,
            shuffle,
            reduce,
        }
    }

    pub fn num_mappers(&self) -> usize {
        self.map.len()
    }

    pub fn num_reducers(&self) -> usize {
        self.reduce.len()
    }
}

/// Critical-path attribution of the makespan to the four phases.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct PhaseBreakdown {
    pub push: f64,
    pub map: f64,
    pub shuffle: f64,
    pub reduce: f64,
}

impl PhaseBreakdown {
    pub fn total(&self) -> f64 {
        self.push + self.map + self.shuffle + self.reduce
    }
}

/// Start and end times of every phase at every node, in seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTimeline {
    pub barriers: BarrierConfig,
    pub push_end: Vec<f64>,
    pub map_start: Vec<f64>,
    pub map_end: Vec<f64>,
    pub shuffle_start: Vec<f64>,
    /// Arrival of the last byte on each mapper/reducer link (M×R).
    pub shuffle_link_end: Vec<Vec<f64>>,
    pub shuffle_end: Vec<f64>,
    pub reduce_start: Vec<f64>,
    pub reduce_end: Vec<f64>,
    pub makespan: f64,
    pub phase_breakdown: PhaseBreakdown,
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

/// Index of the largest entry; the smallest index wins ties.
fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Start times for a phase: one scalar for a global barrier, otherwise the
/// per-node end times of the previous phase.
fn starts(barrier: Barrier, previous_end: &[f64]) -> Vec<f64> {
    match barrier {
        Barrier::Global => vec![max_of(previous_end); previous_end.len()],
        Barrier::Local | Barrier::Pipelined => previous_end.to_vec(),
    }
}

/// Propagates durations through the barrier configuration.
pub fn timeline_from_durations(d: &Durations, b: BarrierConfig) -> PhaseTimeline {
    let m = d.num_mappers();
    let push_end: Vec<f64> = (0..m)
        .map(|j| d.push.iter().map(|row| row[j]).fold(0.0, f64::max))
        .collect();
    let map_start = starts(b.push_map, &push_end);
    let map_end: Vec<f64> = map_start
        .iter()
        .zip(&d.map)
        .map(|(&s, &t)| b.push_map.combine(s, t))
        .collect();
    let shuffle_start = starts(b.map_shuffle, &map_end);
    let shuffle_link_end: Vec<Vec<f64>> = shuffle_start
        .iter()
        .zip(&d.shuffle)
        .map(|(&s, row)| row.iter().map(|&t| b.map_shuffle.combine(s, t)).collect())
        .collect();
    let shuffle_end: Vec<f64> = (0..d.num_reducers())
        .map(|k| shuffle_link_end.iter().map(|row| row[k]).fold(0.0, f64::max))
        .collect();
    let reduce_start = starts(b.shuffle_reduce, &shuffle_end);
    let reduce_end: Vec<f64> = reduce_start
        .iter()
        .zip(&d.reduce)
        .map(|(&s, &t)| b.shuffle_reduce.combine(s, t))
        .collect();
    let makespan = max_of(&reduce_end);
    let mut t = PhaseTimeline {
        barriers: b,
        push_end,
        map_start,
        map_end,
        shuffle_start,
        shuffle_link_end,
        shuffle_end,
        reduce_start,
        reduce_end,
        makespan,
        phase_breakdown: PhaseBreakdown::default(),
    };
    t.phase_breakdown = phase_breakdown(&t);
    t
}

/// Computes the phase timeline of a valid plan.
pub fn evaluate(
    p: &PlatformGraph,
    w: &Workload,
    plan: &ExecutionPlan,
    b: BarrierConfig,
) -> Result<PhaseTimeline> {
    if w.data_at_source.len() != p.num_sources() {
        return Err(Error::Dimension(format!(
            "workload has {} source volumes for {} sources",
            w.data_at_source.len(),
            p.num_sources()
        )));
    }
    validate_plan(plan, p).map_err(|v| match v.first() {
        Some(crate::plan::PlanViolation::Dimension { .. }) => Error::Dimension(
            v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
        ),
        _ => Error::InvalidPlan(v),
    })?;
    Ok(evaluate_unchecked(p, w, plan, b))
}

/// [`evaluate`] without input checks, for inner loops over known-valid plans.
pub fn evaluate_unchecked(
    p: &PlatformGraph,
    w: &Workload,
    plan: &ExecutionPlan,
    b: BarrierConfig,
) -> PhaseTimeline {
    timeline_from_durations(&Durations::from_plan(p, w, plan), b)
}

/// Makespan only; see [`evaluate_unchecked`].
pub fn makespan_of(p: &PlatformGraph, w: &Workload, plan: &ExecutionPlan, b: BarrierConfig) -> f64 {
    evaluate_unchecked(p, w, plan, b).makespan
}

/// Splits the makespan along one critical path.
///
/// Walking back from the last reducer to finish, each phase is charged from
/// the start of the node that gated it: under a global barrier that is the
/// latest node of the previous phase, otherwise the node on the path itself.
/// Under all-global barriers this gives exactly
/// `(map_start, shuffle_start − map_start, reduce_start − shuffle_start,
/// makespan − reduce_start)`. The components are never negative and always
/// add up to the makespan.
pub fn phase_breakdown(t: &PhaseTimeline) -> PhaseBreakdown {
    if t.reduce_end.is_empty() || t.map_end.is_empty() {
        return PhaseBreakdown::default();
    }
    let k_star = argmax(&t.reduce_end);
    let t3 = t.reduce_start[k_star];
    let k_gate = if t.barriers.shuffle_reduce == Barrier::Global {
        argmax(&t.shuffle_end)
    } else {
        k_star
    };
    let column: Vec<f64> = t.shuffle_link_end.iter().map(|row| row[k_gate]).collect();
    let j_star = argmax(&column);
    let t2 = t.shuffle_start[j_star];
    let j_gate = if t.barriers.map_shuffle == Barrier::Global {
        argmax(&t.map_end)
    } else {
        j_star
    };
    let t1 = t.map_start[j_gate];
    PhaseBreakdown {
        push: t1,
        map: t2 - t1,
        shuffle: t3 - t2,
        reduce: t.makespan - t3,
    }
}

#[derive(Serialize)]
struct TimelineRow<'a> {
    entity: &'a str,
    role: &'a str,
    phase: &'a str,
    start: f64,
    end: f64,
}

/// CSV with columns `entity,role,phase,start,end`: one row per node and phase
/// followed by a `job,job,makespan,0,<makespan>` summary row.
pub fn timeline_csv(t: &PhaseTimeline, p: &PlatformGraph) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut row = |entity: &str, role: &str, phase: &str, start: f64, end: f64| {
        w.serialize(TimelineRow {
            entity,
            role,
            phase,
            start,
            end,
        })
        .expect("in-memory csv write");
    };
    for (j, id) in p.mappers.iter().enumerate() {
        row(id, "mapper", "push", 0.0, t.push_end[j]);
        row(id, "mapper", "map", t.map_start[j], t.map_end[j]);
        row(id, "mapper", "shuffle", t.shuffle_start[j], max_of(&t.shuffle_link_end[j]));
    }
    let first_shuffle = t.shuffle_start.iter().copied().fold(f64::INFINITY, f64::min);
    for (k, id) in p.reducers.iter().enumerate() {
        row(id, "reducer", "shuffle", first_shuffle, t.shuffle_end[k]);
        row(id, "reducer", "reduce", t.reduce_start[k], t.reduce_end[k]);
    }
    row("job", "job", "makespan", 0.0, t.makespan);
    String::from_utf8(w.into_inner().expect("flush")).expect("csv is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::{affinity_plan, uniform_plan};
    use crate::platform::{make_two_cluster_example, make_unit_scenario, Scenario};

    fn unit_scenario() -> Scenario {
        make_unit_scenario()
    }

    #[test]
    fn unit_chain_all_global() {
        let s = unit_scenario();
        let plan = uniform_plan(&s.platform);
        let t = evaluate(&s.platform, &s.workload, &plan, BarrierConfig::ALL_GLOBAL).unwrap();
        assert_eq!(t.push_end, vec![1.0]);
        assert_eq!(t.map_end, vec![2.0]);
        assert_eq!(t.shuffle_end, vec![3.0]);
        assert_eq!(t.reduce_end, vec![4.0]);
        assert_eq!(t.makespan, 4.0);
        let b = t.phase_breakdown;
        assert_eq!((b.push, b.map, b.shuffle, b.reduce), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn unit_chain_all_pipelined_collapses() {
        let s = unit_scenario();
        let plan = uniform_plan(&s.platform);
        let t = evaluate(&s.platform, &s.workload, &plan, BarrierConfig::ALL_PIPELINED).unwrap();
        assert_eq!(t.push_end, vec![1.0]);
        assert_eq!(t.map_end, vec![1.0]);
        assert_eq!(t.shuffle_end, vec![1.0]);
        assert_eq!(t.reduce_end, vec![1.0]);
        assert_eq!(t.phase_breakdown.total(), 1.0);
    }

    #[test]
    fn two_cluster_push_times() {
        let s = make_two_cluster_example();
        let (p, w) = (&s.platform, &s.workload);
        let aff = evaluate(p, w, &affinity_plan(p).unwrap(), BarrierConfig::ALL_GLOBAL).unwrap();
        let uni = evaluate(p, w, &uniform_plan(p), BarrierConfig::ALL_GLOBAL).unwrap();
        assert!((max_of(&aff.push_end) - 1500.0).abs() <= 1e-9 * 1500.0);
        assert!((max_of(&uni.push_end) - 7500.0).abs() <= 1e-9 * 7500.0);
        assert!((aff.phase_breakdown.push - 1500.0).abs() <= 1e-9 * 1500.0);
        let map_phase = |t: &PhaseTimeline| max_of(&t.map_end) - t.map_start[0];
        let diff = map_phase(&aff) - map_phase(&uni);
        assert!((diff - 500.0).abs() <= 1e-9 * 500.0, "{diff}");
    }

    #[test]
    fn zero_share_contributes_nothing() {
        let s = make_two_cluster_example();
        let plan = affinity_plan(&s.platform).unwrap();
        let d = Durations::from_plan(&s.platform, &s.workload, &plan);
        assert_eq!(d.push[0][1], 0.0);
        assert_eq!(d.push[1][0], 0.0);
    }

    #[test]
    fn breakdown_sums_under_mixed_barriers() {
        let s = make_two_cluster_example();
        let plan = ExecutionPlan {
            push_fraction: vec![vec![0.8, 0.2], vec![0.3, 0.7]],
            reducer_fraction: vec![0.6, 0.4],
        };
        for b in BarrierConfig::all() {
            let t = evaluate(&s.platform, &s.workload, &plan, b).unwrap();
            let br = t.phase_breakdown;
            for c in [br.push, br.map, br.shuffle, br.reduce] {
                assert!(c >= 0.0, "{b}: {br:?}");
            }
            assert!((br.total() - t.makespan).abs() <= 1e-9 * t.makespan, "{b}");
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let s = make_two_cluster_example();
        let plan = ExecutionPlan {
            push_fraction: vec![vec![1.0]],
            reducer_fraction: vec![1.0],
        };
        assert!(matches!(
            evaluate(&s.platform, &s.workload, &plan, BarrierConfig::ALL_GLOBAL),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn csv_has_summary_row() {
        let s = unit_scenario();
        let t = evaluate_unchecked(&s.platform, &s.workload, &uniform_plan(&s.platform), BarrierConfig::ALL_GLOBAL);
        let csv = timeline_csv(&t, &s.platform);
        assert!(csv.starts_with("entity,role,phase,start,end\n"));
        assert!(csv.trim_end().ends_with("job,job,makespan,0.0,4.0"), "{csv}");
    }
}
