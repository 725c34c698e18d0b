//! Strategy comparisons and barrier sweeps normalized to the uniform plan.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::makespan::{evaluate, makespan_of};
use crate::optimizer::{optimize_end_to_end, run_strategy, OptimizerOptions, Strategy};
use crate::plan::{uniform_plan, Barrier, BarrierConfig, ExecutionPlan};
use crate::platform::Scenario;

/// One strategy at one expansion factor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub scenario: String,
    pub strategy: String,
    pub barriers: String,
    pub alpha: f64,
    /// Model makespan in seconds.
    pub makespan: f64,
    /// Makespan over the uniform plan's makespan under the same barriers.
    pub normalized: f64,
    pub push: f64,
    pub map: f64,
    pub shuffle: f64,
    pub reduce: f64,
    /// Set when a solver limit stopped the strategy's search early.
    pub limit_reached: bool,
}

fn scenario_at(s: &Scenario, alpha: f64) -> Result<Scenario> {
    let s = s.clone().with_alpha(alpha);
    s.workload.validate(s.platform.num_sources())?;
    Ok(s)
}

/// Runs every strategy at every `alpha`, ordered by `alpha` then by the order
/// of `strategies`.
pub fn compare(
    scenario: &Scenario,
    strategies: &[Strategy],
    alphas: &[f64],
    b: BarrierConfig,
    opts: &OptimizerOptions,
) -> Result<Vec<ComparisonRow>> {
    let mut rows = Vec::with_capacity(strategies.len() * alphas.len());
    for &alpha in alphas {
        let s = scenario_at(scenario, alpha)?;
        let (p, w) = (&s.platform, &s.workload);
        let baseline = makespan_of(p, w, &uniform_plan(p), b);
        for &strategy in strategies {
            let report = run_strategy(p, w, b, strategy, opts)?;
            let t = evaluate(p, w, &report.plan, b)?;
            let bd = t.phase_breakdown;
            rows.push(ComparisonRow {
                scenario: s.name.clone(),
                strategy: strategy.name().to_string(),
                barriers: b.to_string(),
                alpha,
                makespan: t.makespan,
                normalized: t.makespan / baseline,
                push: bd.push,
                map: bd.map,
                shuffle: bd.shuffle,
                reduce: bd.reduce,
                limit_reached: report.limit_reached,
            });
        }
    }
    Ok(rows)
}

/// Which boundaries a sweep row relaxes to pipelining.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relaxation {
    None,
    Boundary(usize),
    All,
}

impl Relaxation {
    pub const ORDER: [Relaxation; 5] = [
        Relaxation::None,
        Relaxation::Boundary(0),
        Relaxation::Boundary(1),
        Relaxation::Boundary(2),
        Relaxation::All,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Boundary(0) => "push/map",
            Self::Boundary(1) => "map/shuffle",
            Self::Boundary(_) => "shuffle/reduce",
            Self::All => "all",
        }
    }

    pub fn barriers(self) -> BarrierConfig {
        match self {
            Self::None => BarrierConfig::ALL_GLOBAL,
            Self::Boundary(i) => BarrierConfig::ALL_GLOBAL.with_boundary(i, Barrier::Pipelined),
            Self::All => BarrierConfig::ALL_PIPELINED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub scenario: String,
    pub alpha: f64,
    pub relaxed: String,
    pub barriers: String,
    /// Best makespan found under `barriers`, in seconds.
    pub makespan: f64,
    /// `makespan` over the all-global optimum at the same `alpha`.
    pub normalized: f64,
    pub limit_reached: bool,
}

/// Optimizes end to end under all-global barriers, under each single
/// boundary relaxed to pipelining, and under all-pipelined barriers.
///
/// Every relaxed configuration admits the plans found for the stricter ones
/// at no greater makespan, so those plans are candidates too: the best plan
/// among the optimizer's result and the candidates is reported.
pub fn barrier_sweep(scenario: &Scenario, alphas: &[f64], opts: &OptimizerOptions) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(alphas.len() * Relaxation::ORDER.len());
    for &alpha in alphas {
        let s = scenario_at(scenario, alpha)?;
        let (p, w) = (&s.platform, &s.workload);
        let mut found: Vec<ExecutionPlan> = Vec::new();
        let mut reference = None;
        for relaxation in Relaxation::ORDER {
            let b = relaxation.barriers();
            let report = optimize_end_to_end(p, w, b, opts)?;
            let mut best = report.predicted_makespan;
            for plan in &found {
                best = best.min(makespan_of(p, w, plan, b));
            }
            found.push(report.plan);
            let base = *reference.get_or_insert(best);
            if base <= 0.0 {
                return Err(Error::InvalidWorkload("all-global makespan is zero".into()));
            }
            rows.push(SweepRow {
                scenario: s.name.clone(),
                alpha,
                relaxed: relaxation.name().to_string(),
                barriers: b.to_string(),
                makespan: best,
                normalized: best / base,
                limit_reached: report.limit_reached,
            });
        }
    }
    Ok(rows)
}
