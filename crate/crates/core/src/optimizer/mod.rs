//! Plan optimization: the linearized program, strategy drivers, a direct
//! search refiner and exhaustive oracles.

pub mod mip;
pub mod oracle;
pub mod refine;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use geomr_milp::lp_format::write_lp;
use geomr_milp::MipStatus;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::makespan::{evaluate, makespan_of};
use crate::plan::{affinity_plan, uniform_plan, BarrierConfig, ExecutionPlan};
use crate::platform::{PlatformGraph, Workload};

pub use mip::{
    build_mip, solve_program, FixedAssignment, MipSolve, ObjectiveKind, PiecewiseSpec, PlanMip,
    SolveOptions,
};
pub use oracle::{brute_force_oracle, push_time_oracle, simplex_lattice};
pub use refine::{project_simplex, refine_plan, RefineOptions, StepSchedule};

/// Relative slack kept on a primary objective while a secondary one breaks ties.
const TIE_BREAK_SLACK: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    Uniform,
    Affinity,
    Myopic,
    SinglePush,
    SingleShuffle,
    EndToEnd,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::Uniform,
        Strategy::Affinity,
        Strategy::Myopic,
        Strategy::SinglePush,
        Strategy::SingleShuffle,
        Strategy::EndToEnd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::Affinity => "affinity",
            Self::Myopic => "myopic",
            Self::SinglePush => "single-push",
            Self::SingleShuffle => "single-shuffle",
            Self::EndToEnd => "e2e",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown strategy `{s}` (expected uniform, affinity, myopic, single-push, single-shuffle or e2e)"
                ))
            })
    }
}

/// Which communication phase a single-phase optimization controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Push,
    Shuffle,
}

#[derive(Debug, Clone)]
pub struct OptimizerOptions {
    pub spec: PiecewiseSpec,
    pub solve: SolveOptions,
    pub refine: RefineOptions,
    /// Maximum rounds of alternating exact LPs over push and reducer fractions.
    pub polish_rounds: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            spec: PiecewiseSpec::default(),
            solve: SolveOptions::default(),
            refine: RefineOptions::default(),
            polish_rounds: 20,
        }
    }
}

/// Objective value of one stage of a multi-stage strategy, in seconds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stage {
    pub name: String,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub strategy: Strategy,
    pub barriers: BarrierConfig,
    pub plan: ExecutionPlan,
    /// Model makespan of `plan`.
    pub predicted_makespan: f64,
    /// Objective of the linearized program at its incumbent, in seconds;
    /// absent for strategies that solve no makespan program.
    pub mip_objective: Option<f64>,
    /// Plan read from the program's incumbent and its model makespan.
    pub mip_plan: Option<ExecutionPlan>,
    pub mip_plan_makespan: Option<f64>,
    /// Certified bound on `mip_plan_makespan − mip_objective`, in seconds.
    pub error_bound: f64,
    /// `error_bound` relative to `mip_plan_makespan`.
    pub eps_lin: f64,
    pub gap: f64,
    pub node_count: usize,
    pub wall_time: Duration,
    /// Set when a time or node limit stopped the search before the gap target.
    pub limit_reached: bool,
    pub stages: Vec<Stage>,
}

fn base_report(strategy: Strategy, b: BarrierConfig, plan: ExecutionPlan, predicted: f64) -> SolveReport {
    SolveReport {
        strategy,
        barriers: b,
        plan,
        predicted_makespan: predicted,
        mip_objective: None,
        mip_plan: None,
        mip_plan_makespan: None,
        error_bound: 0.0,
        eps_lin: 0.0,
        gap: 0.0,
        node_count: 0,
        wall_time: Duration::ZERO,
        limit_reached: false,
        stages: Vec::new(),
    }
}

fn limit_hit(s: &MipSolve) -> bool {
    s.status != MipStatus::Optimal
}

/// Builds and solves the program for `objective`.
fn solve_objective(
    p: &PlatformGraph,
    w: &Workload,
    b: BarrierConfig,
    objective: ObjectiveKind,
    fixed: &FixedAssignment,
    opts: &OptimizerOptions,
    starts: &[ExecutionPlan],
) -> Result<(PlanMip, MipSolve)> {
    let pm = build_mip(p, w, b, objective, &opts.spec, fixed)?;
    let sol = solve_program(&pm, &opts.solve, starts)?;
    Ok((pm, sol))
}

/// Exact makespan LP with the push (`Phase::Shuffle`) or reducer
/// (`Phase::Push`) fractions pinned to `pinned`'s values.
fn exact_step(
    p: &PlatformGraph,
    w: &Workload,
    b: BarrierConfig,
    free: Phase,
    pinned: &ExecutionPlan,
    opts: &OptimizerOptions,
) -> Result<MipSolve> {
    let fixed = match free {
        Phase::Push => FixedAssignment {
            push: None,
            reducer: Some(pinned.reducer_fraction.clone()),
        },
        Phase::Shuffle => FixedAssignment {
            push: Some(pinned.push_fraction.clone()),
            reducer: None,
        },
    };
    let (_, sol) = solve_objective(p, w, b, ObjectiveKind::Makespan, &fixed, opts, std::slice::from_ref(pinned))?;
    Ok(sol)
}

/// Optimizes one communication phase for end-to-end makespan while the
/// other keeps its uniform distribution. With one side pinned every shuffle
/// volume is linear, so the program is an exact LP.
pub fn optimize_single_phase(
    p: &PlatformGraph,
    w: &Workload,
    b: BarrierConfig,
    phase: Phase,
    opts: &OptimizerOptions,
) -> Result<SolveReport> {
    let started = Instant::now();
    let sol = exact_step(p, w, b, phase, &uniform_plan(p), opts)?;
    let predicted = evaluate(p, w, &sol.plan, b)?.makespan;
    let strategy = match phase {
        Phase::Push => Strategy::SinglePush,
        Phase::Shuffle => Strategy::SingleShuffle,
    };
    Ok(SolveReport {
        mip_objective: Some(sol.objective),
        mip_plan: Some(sol.plan.clone()),
        mip_plan_makespan: Some(predicted),
        gap: sol.gap,
        node_count: sol.nodes,
        wall_time: started.elapsed(),
        limit_reached: limit_hit(&sol),
        ..base_report(strategy, b, sol.plan, predicted)
    })
}

/// Minimizes push time first, then shuffle completion with the push fixed.
/// Ties in each stage are broken by total push link time and by the sum of
/// reducer shuffle ends, respectively.
pub fn optimize_myopic(
    p: &PlatformGraph,
    w: &Workload,
    b: BarrierConfig,
    opts: &OptimizerOptions,
) -> Result<SolveReport> {
    let started = Instant::now();
    let uniform = uniform_plan(p);

    let mut push = build_mip(p, w, b, ObjectiveKind::PushTime, &opts.spec, &FixedAssignment::default())?;
    let first = solve_program(&push, &opts.solve, std::slice::from_ref(&uniform))?;
    let push_time = first.objective;
    let secondary = push.push_transfer_objective();
    push.restrict_objective(push_time / push.time_scale, TIE_BREAK_SLACK, secondary);
    let x = solve_program(&push, &opts.solve, std::slice::from_ref(&first.plan))?.plan.push_fraction;

    let fixed = FixedAssignment {
        push: Some(x.clone()),
        reducer: None,
    };
    let mut shuffle = build_mip(p, w, b, ObjectiveKind::ShuffleTimeGivenPush, &opts.spec, &fixed)?;
    let start = ExecutionPlan {
        push_fraction: x.clone(),
        reducer_fraction: uniform.reducer_fraction.clone(),
    };
    let second = solve_program(&shuffle, &opts.solve, std::slice::from_ref(&start))?;
    let shuffle_time = second.objective;
    let secondary = shuffle.shuffle_sum_objective();
    shuffle.restrict_objective(shuffle_time / shuffle.time_scale, TIE_BREAK_SLACK, secondary);
    let third = solve_program(&shuffle, &opts.solve, std::slice::from_ref(&second.plan))?;

    let limit_reached = limit_hit(&first) || limit_hit(&second) || limit_hit(&third);
    let plan = ExecutionPlan {
        push_fraction: x,
        reducer_fraction: third.plan.reducer_fraction,
    };
    let predicted = evaluate(p, w, &plan, b)?.makespan;
    Ok(SolveReport {
        node_count: first.nodes + second.nodes + third.nodes,
        wall_time: started.elapsed(),
        limit_reached,
        stages: vec![
            Stage {
                name: "push_time".into(),
                objective: push_time,
            },
            Stage {
                name: "shuffle_time".into(),
                objective: shuffle_time,
            },
        ],
        ..base_report(Strategy::Myopic, b, plan, predicted)
    })
}

/// Alternates exact LPs over push fractions (reducer fractions pinned) and
/// reducer fractions (push pinned) until neither improves the makespan.
pub fn alternate_exact(
    p: &PlatformGraph,
    w: &Workload,
    b: BarrierConfig,
    start: &ExecutionPlan,
    opts: &OptimizerOptions,
) -> Result<ExecutionPlan> {
    let mut best = start.clone();
    let mut best_value = makespan_of(p, w, &best, b);
    for _ in 0..opts.polish_rounds {
        let before = best_value;
        for phase in [Phase::Push, Phase::Shuffle] {
            let cand = exact_step(p, w, b, phase, &best, opts)?.plan;
            let v = makespan_of(p, w, &cand, b);
            if v < best_value {
                best = cand;
                best_value = v;
            }
        }
        if best_value >= before * (1.0 - 1e-12) {
            break;
        }
    }
    Ok(best)
}

/// End-to-end optimization of both communication phases.
///
/// The linearized program is seeded with the uniform, affinity, single-phase
/// and myopic plans. Its incumbent is then polished on the exact model by
/// alternating LPs and by [`refine_plan`], and the best plan found by model
/// makespan is returned. The report keeps the program's own incumbent and
/// objective so the linearization error can be audited.
pub fn optimize_end_to_end(
    p: &PlatformGraph,
    w: &Workload,
    b: BarrierConfig,
    opts: &OptimizerOptions,
) -> Result<SolveReport> {
    let started = Instant::now();
    let mut seeds = vec![uniform_plan(p)];
    if let Ok(a) = affinity_plan(p) {
        seeds.push(a);
    }
    let mut limit_reached = false;
    let mut nodes = 0;
    for r in [
        optimize_single_phase(p, w, b, Phase::Push, opts)?,
        optimize_single_phase(p, w, b, Phase::Shuffle, opts)?,
        optimize_myopic(p, w, b, opts)?,
    ] {
        limit_reached |= r.limit_reached;
        nodes += r.node_count;
        seeds.push(r.plan);
    }
    let (pm, sol) = solve_objective(p, w, b, ObjectiveKind::Makespan, &FixedAssignment::default(), opts, &seeds)?;
    limit_reached |= limit_hit(&sol);
    let mip_plan_makespan = evaluate(p, w, &sol.plan, b)?.makespan;
    log::debug!(
        "makespan program: objective {:.6e} s, incumbent evaluates to {:.6e} s, gap {:.3e}, {} nodes",
        sol.objective,
        mip_plan_makespan,
        sol.gap,
        sol.nodes
    );

    let mut best = sol.plan.clone();
    let mut best_value = mip_plan_makespan;
    for s in &seeds {
        let v = makespan_of(p, w, s, b);
        if v < best_value {
            best = s.clone();
            best_value = v;
        }
    }
    let polished = alternate_exact(p, w, b, &best, opts)?;
    let refined = refine_plan(p, w, b, &polished, &opts.refine);
    for cand in [polished, refined] {
        let v = makespan_of(p, w, &cand, b);
        if v < best_value {
            best = cand;
            best_value = v;
        }
    }
    let predicted = evaluate(p, w, &best, b)?.makespan;
    Ok(SolveReport {
        mip_objective: Some(sol.objective),
        mip_plan: Some(sol.plan),
        mip_plan_makespan: Some(mip_plan_makespan),
        error_bound: pm.error_bound,
        eps_lin: pm.error_bound / mip_plan_makespan,
        gap: sol.gap,
        node_count: nodes + sol.nodes,
        wall_time: started.elapsed(),
        limit_reached,
        ..base_report(Strategy::EndToEnd, b, best, predicted)
    })
}

/// Runs one named strategy.
pub fn run_strategy(
    p: &PlatformGraph,
    w: &Workload,
    b: BarrierConfig,
    strategy: Strategy,
    opts: &OptimizerOptions,
) -> Result<SolveReport> {
    match strategy {
        Strategy::Uniform | Strategy::Affinity => {
            let plan = if strategy == Strategy::Uniform {
                uniform_plan(p)
            } else {
                affinity_plan(p)?
            };
            let predicted = evaluate(p, w, &plan, b)?.makespan;
            Ok(base_report(strategy, b, plan, predicted))
        }
        Strategy::Myopic => optimize_myopic(p, w, b, opts),
        Strategy::SinglePush => optimize_single_phase(p, w, b, Phase::Push, opts),
        Strategy::SingleShuffle => optimize_single_phase(p, w, b, Phase::Shuffle, opts),
        Strategy::EndToEnd => optimize_end_to_end(p, w, b, opts),
    }
}

/// The makespan program in LP text format.
pub fn export_lp(
    p: &PlatformGraph,
    w: &Workload,
    b: BarrierConfig,
    objective: ObjectiveKind,
    spec: &PiecewiseSpec,
) -> Result<String> {
    Ok(write_lp(&build_mip(p, w, b, objective, spec, &FixedAssignment::default())?.mip))
}
