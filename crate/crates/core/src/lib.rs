//! Execution plans for MapReduce jobs whose inputs are spread over
//! geo-distributed sources: platform model, analytic makespan, plan
//! optimization and a discrete-event simulator.

pub mod error;
pub mod makespan;
pub mod optimizer;
pub mod plan;
pub mod platform;
pub mod report;
pub mod simulator;
pub mod units;

pub use error::{Error, Result};
pub use makespan::{evaluate, phase_breakdown, Durations, PhaseBreakdown, PhaseTimeline};
pub use plan::{
    affinity_plan, uniform_plan, validate_plan, Barrier, BarrierConfig, ExecutionPlan,
    PlanViolation,
};
pub use optimizer::{
    brute_force_oracle, build_mip, optimize_end_to_end, optimize_myopic, optimize_single_phase,
    refine_plan, run_strategy, OptimizerOptions, Phase, PiecewiseSpec, SolveReport, Strategy,
};
pub use report::{barrier_sweep, compare, ComparisonRow, Relaxation, SweepRow};
pub use simulator::{
    conservation_violations, correlate, simulate, ConservationViolation, Fit, SimConfig, SimTrace,
};
pub use platform::{
    load_scenario, make_environment, make_two_cluster_example, make_unit_scenario, validate_platform,
    EnvironmentKind, PlatformGraph, PlatformViolation, Scenario, Workload,
};
