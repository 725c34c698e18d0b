//! Exhaustive search over simplex lattices, used as ground truth.

use crate::error::{Error, Result};
use crate::makespan::{makespan_of, Durations};
use crate::plan::{BarrierConfig, ExecutionPlan};
use crate::platform::{PlatformGraph, Workload};

/// Largest number of lattice plans the oracle agrees to evaluate.
pub const MAX_LATTICE_POINTS: f64 = 1e8;

/// All vectors of `parts` multiples of `1/n` summing to one, in
/// lexicographically decreasing order of the first entries.
pub fn simplex_lattice(parts: usize, n: usize) -> Vec<Vec<f64>> {
    fn rec(parts: usize, left: usize, n: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if parts == 1 {
            prefix.push(left);
            out.push(prefix.iter().map(|&c| c as f64 / n as f64).collect());
            prefix.pop();
            return;
        }
        for c in (0..=left).rev() {
            prefix.push(c);
            rec(parts - 1, left - c, n, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(parts, n, n, &mut Vec::new(), &mut out);
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn lattice_size(parts: usize, n: usize) -> f64 {
    binomial(n + parts - 1, parts - 1)
}

fn divisions(grid_step: f64) -> Result<usize> {
    let n = (1.0 / grid_step).round();
    if !(grid_step > 0.0 && n >= 1.0 && (n * grid_step - 1.0).abs() <= 1e-9) {
        return Err(Error::InvalidArgument(format!(
            "grid step {grid_step} must divide 1 evenly"
        )));
    }
    Ok(n as usize)
}

/// Dimension limits: at most 2 nodes per role down to step 0.01, at most 3
/// down to step 0.05, and never more than [`MAX_LATTICE_POINTS`] plans.
fn check_size(dims: usize, grid_step: f64, points: f64) -> Result<()> {
    let allowed = (dims <= 2 && grid_step >= 0.01 - 1e-12) || (dims <= 3 && grid_step >= 0.05 - 1e-12);
    if !allowed {
        return Err(Error::TooLarge(format!(
            "{dims} nodes per role at grid step {grid_step}; limits are 2 at 0.01 and 3 at 0.05"
        )));
    }
    if points > MAX_LATTICE_POINTS {
        return Err(Error::TooLarge(format!(
            "{points:.3e} lattice plans exceed the limit of {MAX_LATTICE_POINTS:.0e}"
        )));
    }
    Ok(())
}

/// Best plan on the lattice of step `grid_step` and its makespan. The first
/// plan in enumeration order wins ties, so results are reproducible.
pub fn brute_force_oracle(
    p: &PlatformGraph,
    w: &Workload,
    b: BarrierConfig,
    grid_step: f64,
) -> Result<(ExecutionPlan, f64)> {
    let n = divisions(grid_step)?;
    let (ns, nm, nr) = (p.num_sources(), p.num_mappers(), p.num_reducers());
    let points = lattice_size(nm, n).powi(ns as i32) * lattice_size(nr, n);
    check_size(ns.max(nm).max(nr), grid_step, points)?;
    let rows = simplex_lattice(nm, n);
    let ys = simplex_lattice(nr, n);
    let mut index = vec![0usize; ns];
    let mut plan = ExecutionPlan {
        push_fraction: vec![rows[0].clone(); ns],
        reducer_fraction: ys[0].clone(),
    };
    let mut best: Option<(ExecutionPlan, f64)> = None;
    loop {
        for (i, &r) in index.iter().enumerate() {
            plan.push_fraction[i].clone_from(&rows[r]);
        }
        for y in &ys {
            plan.reducer_fraction.clone_from(y);
            let v = makespan_of(p, w, &plan, b);
            if best.as_ref().is_none_or(|(_, bv)| v < *bv) {
                best = Some((plan.clone(), v));
            }
        }
        // Advance the mixed-radix counter over source rows.
        let mut i = ns;
        loop {
            if i == 0 {
                return Ok(best.expect("lattice is never empty"));
            }
            i -= 1;
            index[i] += 1;
            if index[i] < rows.len() {
                break;
            }
            index[i] = 0;
        }
    }
}

/// Smallest push completion time over the push lattice, with its push matrix.
pub fn push_time_oracle(p: &PlatformGraph, w: &Workload, grid_step: f64) -> Result<(Vec<Vec<f64>>, f64)> {
    let n = divisions(grid_step)?;
    let (ns, nm) = (p.num_sources(), p.num_mappers());
    let points = lattice_size(nm, n).powi(ns as i32);
    check_size(ns.max(nm), grid_step, points)?;
    let rows = simplex_lattice(nm, n);
    let y = vec![1.0 / p.num_reducers() as f64; p.num_reducers()];
    let mut index = vec![0usize; ns];
    let mut best: Option<(Vec<Vec<f64>>, f64)> = None;
    loop {
        let plan = ExecutionPlan {
            push_fraction: index.iter().map(|&r| rows[r].clone()).collect(),
            reducer_fraction: y.clone(),
        };
        let d = Durations::from_plan(p, w, &plan);
        let t = (0..nm)
            .map(|j| d.push.iter().map(|r| r[j]).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if best.as_ref().is_none_or(|(_, bv)| t < *bv) {
            best = Some((plan.push_fraction, t));
        }
        let mut i = ns;
        loop {
            if i == 0 {
                return Ok(best.expect("lattice is never empty"));
            }
            i -= 1;
            index[i] += 1;
            if index[i] < rows.len() {
                break;
            }
            index[i] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::{affinity_plan, uniform_plan};
    use crate::platform::{make_environment, make_two_cluster_example, make_unit_scenario, EnvironmentKind};

    #[test]
    fn lattice_counts() {
        assert_eq!(simplex_lattice(1, 5), vec![vec![1.0]]);
        assert_eq!(simplex_lattice(2, 2), vec![vec![1.0, 0.0], vec![0.5, 0.5], vec![0.0, 1.0]]);
        assert_eq!(simplex_lattice(3, 20).len(), 231);
        assert_eq!(lattice_size(3, 20), 231.0);
    }

    #[test]
    fn unit_oracle() {
        let s = make_unit_scenario();
        let (plan, v) = brute_force_oracle(&s.platform, &s.workload, BarrierConfig::ALL_GLOBAL, 0.05).unwrap();
        assert_eq!(plan, uniform_plan(&s.platform));
        assert_eq!(v, 4.0);
    }

    #[test]
    fn two_cluster_oracle_beats_baselines() {
        let s = make_two_cluster_example();
        let (p, w, b) = (&s.platform, &s.workload, BarrierConfig::ALL_GLOBAL);
        let (_, v) = brute_force_oracle(p, w, b, 0.01).unwrap();
        let uni = makespan_of(p, w, &uniform_plan(p), b);
        let aff = makespan_of(p, w, &affinity_plan(p).unwrap(), b);
        assert!(v <= uni.min(aff));
    }

    #[test]
    fn size_limits() {
        let s = make_environment(EnvironmentKind::Global4, 1);
        assert!(matches!(
            brute_force_oracle(&s.platform, &s.workload, BarrierConfig::ALL_GLOBAL, 0.05),
            Err(Error::TooLarge(_))
        ));
        assert!(matches!(
            brute_force_oracle(&s.platform, &s.workload, BarrierConfig::ALL_GLOBAL, 0.3),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn push_oracle_on_two_clusters() {
        let s = make_two_cluster_example();
        let (x, t) = push_time_oracle(&s.platform, &s.workload, 0.01).unwrap();
        // Best lattice split of D1 is 0.91 local: max(1365, 1350) seconds.
        assert!((t - 1365.0).abs() < 1e-6, "{t}");
        assert!((x[0][0] - 0.91).abs() < 1e-12);
    }
}
