//! Linearized mixed-integer program for plan optimization.
//!
//! Every `max` in the timeline becomes a set of `≥` rows on a minimized end
//! time. The only nonlinearity is the shuffle volume `m_j · y_k`, where
//! `m_j ∈ [0, 1]` is mapper `j`'s share of the input. It is written as
//! `w² − w′²` with `w = (m + y)/2 ∈ [0, 1]` and `w′ = (m − y)/2 ∈ [−½, ½]`.
//! The convex `w²` is bounded below by tangents at evenly spaced points; the
//! concave `−w′²` uses chords between evenly spaced points, one selector
//! binary per chord. Both approximations under-estimate the product, so the
//! program never over-estimates the makespan of the plan it encodes.
//!
//! All times are expressed in units of the uniform plan's makespan so that
//! row coefficients stay near one.

use geomr_milp::{
    BranchAndBound, Comparator, Heuristic, LinearProgram, MipOptions, MipStatus,
    MixedIntegerProgram, VarId,
};
use std::time::Duration;

use crate::error::{Error, Result};
use crate::makespan::{makespan_of, timeline_from_durations, Durations};
use crate::plan::{uniform_plan, validate_plan, Barrier, BarrierConfig, ExecutionPlan};
use crate::platform::{PlatformGraph, Workload};

/// Evenly spaced breakpoints shared by the tangent and chord approximations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PiecewiseSpec {
    pub breakpoint_count: usize,
}

impl Default for PiecewiseSpec {
    fn default() -> Self {
        Self {
            breakpoint_count: 10,
        }
    }
}

impl PiecewiseSpec {
    pub fn new(breakpoint_count: usize) -> Result<Self> {
        if breakpoint_count < 3 {
            return Err(Error::InvalidArgument(format!(
                "breakpoint count {breakpoint_count} must be at least 3"
            )));
        }
        Ok(Self { breakpoint_count })
    }

    /// Normalized domain of `w`; `w′` uses the same width shifted to [−½, ½].
    pub fn domain(&self) -> (f64, f64) {
        (0.0, 1.0)
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.breakpoint_count - 1) as f64
    }

    /// Tangent points for `w²`.
    pub fn tangent_points(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.breakpoint_count).map(|k| k as f64 * h).collect()
    }

    /// Chord segments `[lo, hi]` for `w′²`.
    pub fn segments(&self) -> Vec<(f64, f64)> {
        let h = self.spacing();
        (0..self.breakpoint_count - 1)
            .map(|l| {
                let lo = -0.5 + l as f64 * h;
                (lo, lo + h)
            })
            .collect()
    }

    /// Largest under-estimate of one product `m·y`: the tangent gap of `w²`
    /// plus the chord gap of `w′²`, each `h²/4`.
    pub fn product_error(&self) -> f64 {
        let h = self.spacing();
        h * h / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    /// Completion time of the last reducer.
    Makespan,
    /// Latest push completion over all mappers.
    PushTime,
    /// Latest shuffle completion over all reducers; requires a fixed push.
    ShuffleTimeGivenPush,
}

impl ObjectiveKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Makespan => "makespan",
            Self::PushTime => "push_time",
            Self::ShuffleTimeGivenPush => "shuffle_time_given_push",
        }
    }
}

/// Variables pinned before solving.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FixedAssignment {
    pub push: Option<Vec<Vec<f64>>>,
    pub reducer: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
struct ProductVars {
    s: VarId,
    q: VarId,
    z: Vec<VarId>,
    u: Vec<VarId>,
}

/// How a phase start is represented.
#[derive(Debug, Clone, Copy)]
enum Start {
    /// One variable shared by every node (global barrier).
    Scalar(VarId),
    /// Each node starts at its own previous end variable.
    PerNode,
}

#[derive(Debug, Clone)]
struct Layout {
    x: Vec<Vec<VarId>>,
    y: Vec<VarId>,
    m: Vec<VarId>,
    push_end: Vec<VarId>,
    push_max: Option<VarId>,
    map_start: Option<Start>,
    map_end: Vec<VarId>,
    shuffle_start: Option<Start>,
    shuffle_end: Vec<VarId>,
    shuffle_max: Option<VarId>,
    reduce_start: Option<Start>,
    reduce_end: Vec<VarId>,
    makespan: Option<VarId>,
    products: Vec<Vec<Option<ProductVars>>>,
}

/// A built program together with what is needed to interpret its values.
#[derive(Debug, Clone)]
pub struct PlanMip {
    pub mip: MixedIntegerProgram,
    pub objective: ObjectiveKind,
    pub barriers: BarrierConfig,
    pub spec: PiecewiseSpec,
    /// Seconds per time unit in the program.
    pub time_scale: f64,
    /// Largest amount by which the program can under-estimate the encoded
    /// plan's objective, in seconds.
    pub error_bound: f64,
    fixed_push: Option<Vec<Vec<f64>>>,
    fixed_reducer: Option<Vec<f64>>,
    platform: PlatformGraph,
    workload: Workload,
    layout: Layout,
}

fn fixed_error(v: Vec<crate::plan::PlanViolation>) -> Error {
    match v.first() {
        Some(crate::plan::PlanViolation::Dimension { .. }) => Error::Dimension(
            v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
        ),
        _ => Error::InvalidPlan(v),
    }
}

fn check_fixed(p: &PlatformGraph, fixed: &FixedAssignment) -> Result<()> {
    let uniform = uniform_plan(p);
    if let Some(push) = &fixed.push {
        let probe = ExecutionPlan {
            push_fraction: push.clone(),
            reducer_fraction: uniform.reducer_fraction.clone(),
        };
        validate_plan(&probe, p).map_err(fixed_error)?;
    }
    if let Some(y) = &fixed.reducer {
        let probe = ExecutionPlan {
            push_fraction: uniform.push_fraction.clone(),
            reducer_fraction: y.clone(),
        };
        validate_plan(&probe, p).map_err(fixed_error)?;
    }
    Ok(())
}

fn nonzero_ratio(amount: f64, rate: f64) -> f64 {
    if amount == 0.0 {
        0.0
    } else {
        amount / rate
    }
}

/// Shuffle duration of one link as a linear expression.
struct Expr {
    terms: Vec<(VarId, f64)>,
    constant: f64,
}

fn add_starts(lp: &mut LinearProgram, barrier: Barrier, previous: &[VarId], name: &str) -> (Start, Vec<VarId>) {
    match barrier {
        Barrier::Global => {
            let v = lp.add_variable(name, 0.0, f64::INFINITY);
            for (j, &e) in previous.iter().enumerate() {
                lp.add_constraint(format!("{name}_{j}"), [(v, 1.0), (e, -1.0)], Comparator::Ge, 0.0);
            }
            (Start::Scalar(v), vec![v; previous.len()])
        }
        Barrier::Local | Barrier::Pipelined => (Start::PerNode, previous.to_vec()),
    }
}

/// Rows for `end ≥ start ⊕ duration`.
fn add_end(lp: &mut LinearProgram, barrier: Barrier, name: &str, end: VarId, start: VarId, d: &Expr) {
    match barrier {
        Barrier::Global | Barrier::Local => {
            let mut row = vec![(end, 1.0), (start, -1.0)];
            row.extend(d.terms.iter().map(|&(v, a)| (v, -a)));
            lp.add_constraint(name, row, Comparator::Ge, d.constant);
        }
        Barrier::Pipelined => {
            lp.add_constraint(format!("{name}_s"), [(end, 1.0), (start, -1.0)], Comparator::Ge, 0.0);
            let mut row = vec![(end, 1.0)];
            row.extend(d.terms.iter().map(|&(v, a)| (v, -a)));
            lp.add_constraint(format!("{name}_d"), row, Comparator::Ge, d.constant);
        }
    }
}

/// Builds the linearized program for `objective` under barriers `b`.
///
/// Variables are declared `x` (row-major) first, then `y`, so the solver's
/// lexicographic tie-break among equal objectives applies to the plan.
/// A single mapper or reducer pins the corresponding fractions to one, and a
/// pinned factor makes every product linear, in which case no binaries are
/// created.
pub fn build_mip(
    p: &PlatformGraph,
    w: &Workload,
    b: BarrierConfig,
    objective: ObjectiveKind,
    spec: &PiecewiseSpec,
    fixed: &FixedAssignment,
) -> Result<PlanMip> {
    PiecewiseSpec::new(spec.breakpoint_count)?;
    w.validate(p.num_sources())?;
    check_fixed(p, fixed)?;
    if objective == ObjectiveKind::ShuffleTimeGivenPush && fixed.push.is_none() {
        return Err(Error::InvalidArgument(
            "shuffle_time_given_push needs every push fraction fixed".into(),
        ));
    }
    let (ns, nm, nr) = (p.num_sources(), p.num_mappers(), p.num_reducers());
    let total = w.total_data();
    let t0 = makespan_of(p, w, &uniform_plan(p), b);

    let normalize = |row: &[f64]| -> Vec<f64> {
        let s: f64 = row.iter().sum();
        row.iter().map(|v| v / s).collect()
    };
    let fixed_push: Option<Vec<Vec<f64>>> = if nm == 1 {
        Some(vec![vec![1.0]; ns])
    } else {
        fixed.push.as_ref().map(|x| x.iter().map(|r| normalize(r)).collect())
    };
    let fixed_reducer: Option<Vec<f64>> = if nr == 1 {
        Some(vec![1.0])
    } else {
        fixed.reducer.as_ref().map(|y| normalize(y))
    };

    let mut lp = LinearProgram::new();
    let x: Vec<Vec<VarId>> = (0..ns)
        .map(|i| {
            (0..nm)
                .map(|j| {
                    let (lo, hi) = fixed_push.as_ref().map_or((0.0, 1.0), |f| (f[i][j], f[i][j]));
                    lp.add_variable(format!("x_{i}_{j}"), lo, hi)
                })
                .collect()
        })
        .collect();
    let y: Vec<VarId> = (0..nr)
        .map(|k| {
            let (lo, hi) = fixed_reducer.as_ref().map_or((0.0, 1.0), |f| (f[k], f[k]));
            lp.add_variable(format!("y_{k}"), lo, hi)
        })
        .collect();
    let share: Vec<f64> = w.data_at_source.iter().map(|d| d / total).collect();
    let fixed_m: Option<Vec<f64>> = fixed_push.as_ref().map(|f| {
        (0..nm)
            .map(|j| (0..ns).map(|i| share[i] * f[i][j]).sum::<f64>())
            .collect()
    });
    let m: Vec<VarId> = (0..nm)
        .map(|j| {
            let (lo, hi) = fixed_m.as_ref().map_or((0.0, 1.0), |f| (f[j], f[j]));
            lp.add_variable(format!("m_{j}"), lo, hi)
        })
        .collect();
    if fixed_push.is_none() {
        for (i, row) in x.iter().enumerate() {
            lp.add_constraint(format!("push_sum_{i}"), row.iter().map(|&v| (v, 1.0)), Comparator::Eq, 1.0);
        }
        for j in 0..nm {
            let mut row = vec![(m[j], 1.0)];
            row.extend((0..ns).map(|i| (x[i][j], -share[i])));
            lp.add_constraint(format!("load_{j}"), row, Comparator::Eq, 0.0);
        }
    }
    if fixed_reducer.is_none() {
        lp.add_constraint("reducer_sum", y.iter().map(|&v| (v, 1.0)), Comparator::Eq, 1.0);
    }

    let mut layout = Layout {
        x,
        y,
        m,
        push_end: Vec::new(),
        push_max: None,
        map_start: None,
        map_end: Vec::new(),
        shuffle_start: None,
        shuffle_end: Vec::new(),
        shuffle_max: None,
        reduce_start: None,
        reduce_end: Vec::new(),
        makespan: None,
        products: vec![vec![None; nr]; nm],
    };
    let mut groups: Vec<(String, Vec<VarId>)> = Vec::new();

    // Push.
    for j in 0..nm {
        let pe = lp.add_variable(format!("push_end_{j}"), 0.0, f64::INFINITY);
        for i in 0..ns {
            let coef = nonzero_ratio(w.data_at_source[i], p.push_bandwidth[i][j] * t0);
            if coef > 0.0 {
                lp.add_constraint(
                    format!("push_{i}_{j}"),
                    [(pe, 1.0), (layout.x[i][j], -coef)],
                    Comparator::Ge,
                    0.0,
                );
            }
        }
        layout.push_end.push(pe);
    }
    if objective == ObjectiveKind::PushTime {
        let pmax = lp.add_variable("push_time", 0.0, f64::INFINITY);
        for (j, &pe) in layout.push_end.iter().enumerate() {
            lp.add_constraint(format!("push_time_{j}"), [(pmax, 1.0), (pe, -1.0)], Comparator::Ge, 0.0);
        }
        lp.set_objective([(pmax, 1.0)]);
        layout.push_max = Some(pmax);
        return Ok(finish(lp, groups, objective, b, spec, t0, 0.0, fixed_push, fixed_reducer, p, w, layout));
    }

    // Map.
    let (start, map_start) = add_starts(&mut lp, b.push_map, &layout.push_end, "map_start");
    layout.map_start = Some(start);
    for j in 0..nm {
        let me = lp.add_variable(format!("map_end_{j}"), 0.0, f64::INFINITY);
        let d = Expr {
            terms: vec![(layout.m[j], total / (p.map_capacity[j] * t0))],
            constant: 0.0,
        };
        add_end(&mut lp, b.push_map, &format!("map_{j}"), me, map_start[j], &d);
        layout.map_end.push(me);
    }

    // Shuffle.
    let (start, shuffle_start) = add_starts(&mut lp, b.map_shuffle, &layout.map_end, "shuffle_start");
    layout.shuffle_start = Some(start);
    let mut approximated = false;
    let tangents = spec.tangent_points();
    let segments = spec.segments();
    for k in 0..nr {
        layout
            .shuffle_end
            .push(lp.add_variable(format!("shuffle_end_{k}"), 0.0, f64::INFINITY));
    }
    for j in 0..nm {
        for k in 0..nr {
            let c = w.alpha * total / (p.shuffle_bandwidth[j][k] * t0);
            let se = layout.shuffle_end[k];
            let d = match (&fixed_m, &fixed_reducer) {
                (Some(mv), Some(yv)) => Expr {
                    terms: Vec::new(),
                    constant: c * mv[j] * yv[k],
                },
                (Some(mv), None) => Expr {
                    terms: vec![(layout.y[k], c * mv[j])],
                    constant: 0.0,
                },
                (None, Some(yv)) => Expr {
                    terms: vec![(layout.m[j], c * yv[k])],
                    constant: 0.0,
                },
                (None, None) => {
                    approximated = true;
                    let pv = add_product(&mut lp, &mut groups, j, k, layout.m[j], layout.y[k], &tangents, &segments);
                    let d = Expr {
                        terms: vec![(pv.s, c), (pv.q, -c)],
                        constant: 0.0,
                    };
                    layout.products[j][k] = Some(pv);
                    if b.map_shuffle != Barrier::Pipelined {
                        // The true link end never precedes its start.
                        lp.add_constraint(
                            format!("shuffle_{j}_{k}_s"),
                            [(se, 1.0), (shuffle_start[j], -1.0)],
                            Comparator::Ge,
                            0.0,
                        );
                    }
                    d
                }
            };
            add_end(&mut lp, b.map_shuffle, &format!("shuffle_{j}_{k}"), se, shuffle_start[j], &d);
        }
    }
    let error_bound = if approximated {
        let slowest = p
            .shuffle_bandwidth
            .iter()
            .flatten()
            .map(|b| 1.0 / b)
            .fold(0.0, f64::max);
        w.alpha * total * slowest * spec.product_error()
    } else {
        0.0
    };
    if objective == ObjectiveKind::ShuffleTimeGivenPush {
        let qmax = lp.add_variable("shuffle_time", 0.0, f64::INFINITY);
        for (k, &se) in layout.shuffle_end.iter().enumerate() {
            lp.add_constraint(format!("shuffle_time_{k}"), [(qmax, 1.0), (se, -1.0)], Comparator::Ge, 0.0);
        }
        lp.set_objective([(qmax, 1.0)]);
        layout.shuffle_max = Some(qmax);
        return Ok(finish(lp, groups, objective, b, spec, t0, error_bound, fixed_push, fixed_reducer, p, w, layout));
    }

    // Reduce.
    let (start, reduce_start) = add_starts(&mut lp, b.shuffle_reduce, &layout.shuffle_end, "reduce_start");
    layout.reduce_start = Some(start);
    let z = lp.add_variable("makespan", 0.0, f64::INFINITY);
    for k in 0..nr {
        let re = lp.add_variable(format!("reduce_end_{k}"), 0.0, f64::INFINITY);
        let d = Expr {
            terms: vec![(layout.y[k], w.alpha * total / (p.reduce_capacity[k] * t0))],
            constant: 0.0,
        };
        add_end(&mut lp, b.shuffle_reduce, &format!("reduce_{k}"), re, reduce_start[k], &d);
        lp.add_constraint(format!("makespan_{k}"), [(z, 1.0), (re, -1.0)], Comparator::Ge, 0.0);
        layout.reduce_end.push(re);
    }
    lp.set_objective([(z, 1.0)]);
    layout.makespan = Some(z);
    Ok(finish(lp, groups, objective, b, spec, t0, error_bound, fixed_push, fixed_reducer, p, w, layout))
}

#[allow(clippy::too_many_arguments)]
fn add_product(
    lp: &mut LinearProgram,
    groups: &mut Vec<(String, Vec<VarId>)>,
    j: usize,
    k: usize,
    m: VarId,
    y: VarId,
    tangents: &[f64],
    segments: &[(f64, f64)],
) -> ProductVars {
    // s ≥ 2·b·w − b² with w = (m + y)/2.
    let s = lp.add_variable(format!("s_{j}_{k}"), 0.0, 1.0);
    for (t, &bp) in tangents.iter().enumerate() {
        lp.add_constraint(
            format!("tangent_{j}_{k}_{t}"),
            [(s, 1.0), (m, -bp), (y, -bp)],
            Comparator::Ge,
            -bp * bp,
        );
    }
    // q equals the chord of w′² on the selected segment.
    let mut z = Vec::with_capacity(segments.len());
    let mut u = Vec::with_capacity(segments.len());
    for (l, &(lo, hi)) in segments.iter().enumerate() {
        let zl = lp.add_variable(format!("z_{j}_{k}_{l}"), 0.0, 1.0);
        let ul = lp.add_variable(format!("u_{j}_{k}_{l}"), -0.5, 0.5);
        lp.add_constraint(format!("seg_hi_{j}_{k}_{l}"), [(ul, 1.0), (zl, -hi)], Comparator::Le, 0.0);
        lp.add_constraint(format!("seg_lo_{j}_{k}_{l}"), [(ul, 1.0), (zl, -lo)], Comparator::Ge, 0.0);
        z.push(zl);
        u.push(ul);
    }
    let mut row: Vec<(VarId, f64)> = u.iter().map(|&v| (v, 1.0)).collect();
    row.push((m, -0.5));
    row.push((y, 0.5));
    lp.add_constraint(format!("wprime_{j}_{k}"), row, Comparator::Eq, 0.0);
    let q = lp.add_variable(format!("q_{j}_{k}"), 0.0, 0.25);
    let mut row = vec![(q, 1.0)];
    for (l, &(lo, hi)) in segments.iter().enumerate() {
        row.push((u[l], -(lo + hi)));
        row.push((z[l], lo * hi));
    }
    lp.add_constraint(format!("chord_{j}_{k}"), row, Comparator::Eq, 0.0);
    groups.push((format!("seg_{j}_{k}"), z.clone()));
    ProductVars { s, q, z, u }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    lp: LinearProgram,
    groups: Vec<(String, Vec<VarId>)>,
    objective: ObjectiveKind,
    barriers: BarrierConfig,
    spec: &PiecewiseSpec,
    time_scale: f64,
    error_bound: f64,
    fixed_push: Option<Vec<Vec<f64>>>,
    fixed_reducer: Option<Vec<f64>>,
    p: &PlatformGraph,
    w: &Workload,
    layout: Layout,
) -> PlanMip {
    let mut mip = MixedIntegerProgram::new(lp);
    for (name, members) in groups {
        mip.add_selector_group(name, members);
    }
    PlanMip {
        mip,
        objective,
        barriers,
        spec: *spec,
        time_scale,
        error_bound,
        fixed_push,
        fixed_reducer,
        platform: p.clone(),
        workload: w.clone(),
        layout,
    }
}

impl PlanMip {
    pub fn num_binaries(&self) -> usize {
        self.mip.binaries.len()
    }

    pub fn num_groups(&self) -> usize {
        self.mip.sos_groups.len()
    }

    /// Reads the plan out of a solution vector, with rows renormalized.
    pub fn extract_plan(&self, values: &[f64]) -> ExecutionPlan {
        let l = &self.layout;
        let push_fraction = match &self.fixed_push {
            Some(f) => f.clone(),
            None => l
                .x
                .iter()
                .map(|row| row.iter().map(|v| values[v.0]).collect())
                .collect(),
        };
        let reducer_fraction = match &self.fixed_reducer {
            Some(f) => f.clone(),
            None => l.y.iter().map(|v| values[v.0]).collect(),
        };
        ExecutionPlan {
            push_fraction,
            reducer_fraction,
        }
        .normalized()
    }

    /// A feasible assignment of every variable that encodes `plan`, with
    /// each end time at its smallest feasible value. Pinned fractions
    /// override the plan's.
    pub fn complete(&self, plan: &ExecutionPlan) -> Vec<f64> {
        let (p, w, l) = (&self.platform, &self.workload, &self.layout);
        let plan = plan.normalized();
        let xv = self.fixed_push.clone().unwrap_or(plan.push_fraction);
        let yv = self.fixed_reducer.clone().unwrap_or(plan.reducer_fraction);
        let t0 = self.time_scale;
        let total = w.total_data();
        let mut v = vec![0.0; self.mip.lp.num_vars()];
        for (i, row) in l.x.iter().enumerate() {
            for (j, var) in row.iter().enumerate() {
                v[var.0] = xv[i][j];
            }
        }
        for (k, var) in l.y.iter().enumerate() {
            v[var.0] = yv[k];
        }
        let mv: Vec<f64> = (0..l.m.len())
            .map(|j| {
                (0..l.x.len())
                    .map(|i| w.data_at_source[i] / total * xv[i][j])
                    .sum()
            })
            .collect();
        for (j, var) in l.m.iter().enumerate() {
            v[var.0] = mv[j];
        }
        let tangents = self.spec.tangent_points();
        let segments = self.spec.segments();
        let h = self.spec.spacing();
        let mut product = vec![vec![0.0; l.y.len()]; l.m.len()];
        for (j, row) in l.products.iter().enumerate() {
            for (k, pv) in row.iter().enumerate() {
                product[j][k] = match pv {
                    None => mv[j] * yv[k],
                    Some(pv) => {
                        let s = tangents
                            .iter()
                            .map(|&b| b * mv[j] + b * yv[k] - b * b)
                            .fold(0.0, f64::max);
                        let wp = 0.5 * (mv[j] - yv[k]);
                        let seg = (((wp + 0.5) / h).floor().max(0.0) as usize).min(segments.len() - 1);
                        let (lo, hi) = segments[seg];
                        let q = (lo + hi) * wp - lo * hi;
                        v[pv.s.0] = s;
                        v[pv.q.0] = q;
                        v[pv.z[seg].0] = 1.0;
                        v[pv.u[seg].0] = wp;
                        (s - q).max(0.0)
                    }
                };
            }
        }
        let d = Durations {
            push: (0..l.x.len())
                .map(|i| {
                    (0..l.m.len())
                        .map(|j| nonzero_ratio(w.data_at_source[i], p.push_bandwidth[i][j] * t0) * xv[i][j])
                        .collect()
                })
                .collect(),
            map: (0..l.m.len())
                .map(|j| total / (p.map_capacity[j] * t0) * mv[j])
                .collect(),
            shuffle: (0..l.m.len())
                .map(|j| {
                    (0..l.y.len())
                        .map(|k| w.alpha * total / (p.shuffle_bandwidth[j][k] * t0) * product[j][k])
                        .collect()
                })
                .collect(),
            reduce: (0..l.y.len())
                .map(|k| w.alpha * total / (p.reduce_capacity[k] * t0) * yv[k])
                .collect(),
        };
        let t = timeline_from_durations(&d, self.barriers);
        for (j, var) in l.push_end.iter().enumerate() {
            v[var.0] = t.push_end[j];
        }
        if let Some(pm) = l.push_max {
            v[pm.0] = t.push_end.iter().copied().fold(0.0, f64::max);
            return v;
        }
        if let Some(Start::Scalar(s)) = l.map_start {
            v[s.0] = t.map_start[0];
        }
        for (j, var) in l.map_end.iter().enumerate() {
            v[var.0] = t.map_end[j];
        }
        if let Some(Start::Scalar(s)) = l.shuffle_start {
            v[s.0] = t.shuffle_start[0];
        }
        for (k, var) in l.shuffle_end.iter().enumerate() {
            v[var.0] = t.shuffle_end[k];
        }
        if let Some(qm) = l.shuffle_max {
            v[qm.0] = t.shuffle_end.iter().copied().fold(0.0, f64::max);
            return v;
        }
        if let Some(Start::Scalar(s)) = l.reduce_start {
            v[s.0] = t.reduce_start[0];
        }
        for (k, var) in l.reduce_end.iter().enumerate() {
            v[var.0] = t.reduce_end[k];
        }
        if let Some(z) = l.makespan {
            v[z.0] = t.makespan;
        }
        v
    }

    /// Objective value of the program at `plan`'s completion, in seconds.
    pub fn approximate_objective(&self, plan: &ExecutionPlan) -> f64 {
        self.mip.lp.objective_value(&self.complete(plan)) * self.time_scale
    }

    /// Makes the objective a secondary criterion: keeps the current
    /// objective within `slack` (relative) of `optimum` (program units) and
    /// minimizes `secondary` instead.
    pub(crate) fn restrict_objective(&mut self, optimum: f64, slack: f64, secondary: Vec<(VarId, f64)>) {
        let primary = self.mip.lp.objective.clone();
        self.mip
            .lp
            .add_constraint("primary_cap", primary, Comparator::Le, optimum * (1.0 + slack));
        self.mip.lp.set_objective(secondary);
    }

    /// Secondary criterion for a push-time program: total transfer time of
    /// all push links.
    pub(crate) fn push_transfer_objective(&self) -> Vec<(VarId, f64)> {
        let (p, w) = (&self.platform, &self.workload);
        let t0 = self.time_scale;
        let mut out = Vec::new();
        for (i, row) in self.layout.x.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                out.push((v, nonzero_ratio(w.data_at_source[i], p.push_bandwidth[i][j] * t0)));
            }
        }
        out
    }

    /// Secondary criterion for a shuffle-time program: sum of shuffle ends.
    pub(crate) fn shuffle_sum_objective(&self) -> Vec<(VarId, f64)> {
        self.layout.shuffle_end.iter().map(|&v| (v, 1.0)).collect()
    }
}

/// Limits and tolerance for one branch-and-bound run.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub tol: f64,
    pub time_limit: Duration,
    pub node_limit: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            time_limit: Duration::from_secs(300),
            node_limit: None,
        }
    }
}

/// Raw result of one program solve.
#[derive(Debug, Clone)]
pub struct MipSolve {
    pub plan: ExecutionPlan,
    /// Program objective in seconds.
    pub objective: f64,
    pub gap: f64,
    pub nodes: usize,
    pub wall_time: Duration,
    pub status: MipStatus,
}

struct Completion<'a> {
    pm: &'a PlanMip,
}

impl Heuristic for Completion<'_> {
    fn propose(&mut self, lp_values: &[f64]) -> Option<Vec<f64>> {
        Some(self.pm.complete(&self.pm.extract_plan(lp_values)))
    }
}

/// Runs branch and bound on `pm`, seeded with the completions of `starts`.
pub fn solve_program(pm: &PlanMip, opts: &SolveOptions, starts: &[ExecutionPlan]) -> Result<MipSolve> {
    let mut bb = BranchAndBound::new(
        &pm.mip,
        MipOptions {
            rel_gap: opts.tol,
            time_limit: opts.time_limit,
            node_limit: opts.node_limit,
            ..MipOptions::default()
        },
    );
    for s in starts {
        bb.add_start(pm.complete(s));
    }
    if pm.num_binaries() > 0 {
        bb.set_heuristic(Completion { pm });
    }
    let out = bb.solve()?;
    Ok(MipSolve {
        plan: pm.extract_plan(&out.values),
        objective: out.objective * pm.time_scale,
        gap: out.gap,
        nodes: out.nodes,
        wall_time: out.wall_time,
        status: out.status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::makespan::evaluate;
    use crate::plan::affinity_plan;
    use crate::platform::{make_environment, make_two_cluster_example, EnvironmentKind};
    use geomr_milp::solve_lp;

    fn unit() -> (PlatformGraph, Workload) {
        let s = crate::platform::make_unit_scenario();
        (s.platform, s.workload)
    }

    #[test]
    fn spec_geometry() {
        let s = PiecewiseSpec::default();
        assert_eq!(s.tangent_points().len(), 10);
        assert_eq!(s.segments().len(), 9);
        assert_eq!(s.segments()[0].0, -0.5);
        assert!((s.segments()[8].1 - 0.5).abs() < 1e-15);
        assert!(PiecewiseSpec::new(2).is_err());
    }

    #[test]
    fn unit_instance_has_single_point() {
        let (p, w) = unit();
        let pm = build_mip(&p, &w, BarrierConfig::ALL_GLOBAL, ObjectiveKind::Makespan, &PiecewiseSpec::default(), &FixedAssignment::default()).unwrap();
        assert_eq!(pm.num_binaries(), 0);
        let out = solve_program(&pm, &SolveOptions::default(), &[]).unwrap();
        assert_eq!(out.plan.push_fraction, vec![vec![1.0]]);
        assert_eq!(out.plan.reducer_fraction, vec![1.0]);
        assert!((out.objective - 4.0).abs() < 1e-9);
        assert_eq!(out.gap, 0.0);
    }

    #[test]
    fn each_product_gets_one_group() {
        let s = make_two_cluster_example();
        let pm = build_mip(&s.platform, &s.workload, BarrierConfig::ALL_GLOBAL, ObjectiveKind::Makespan, &PiecewiseSpec::default(), &FixedAssignment::default()).unwrap();
        assert_eq!(pm.num_groups(), 4);
        assert_eq!(pm.num_binaries(), 4 * 9);
        assert!(pm.mip.sos_groups.iter().all(|g| g.members.len() == 9));
    }

    #[test]
    fn fixed_push_removes_binaries() {
        let s = make_environment(EnvironmentKind::Global4, 2);
        let fixed = FixedAssignment {
            push: Some(uniform_plan(&s.platform).push_fraction),
            reducer: None,
        };
        for obj in [ObjectiveKind::ShuffleTimeGivenPush, ObjectiveKind::Makespan] {
            let pm = build_mip(&s.platform, &s.workload, BarrierConfig::ALL_GLOBAL, obj, &PiecewiseSpec::default(), &fixed).unwrap();
            assert_eq!(pm.num_binaries(), 0);
            assert!(pm.mip.sos_groups.is_empty());
        }
    }

    #[test]
    fn shuffle_objective_requires_fixed_push() {
        let s = make_two_cluster_example();
        let err = build_mip(&s.platform, &s.workload, BarrierConfig::ALL_GLOBAL, ObjectiveKind::ShuffleTimeGivenPush, &PiecewiseSpec::default(), &FixedAssignment::default());
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn invalid_fixed_rows_rejected() {
        let s = make_two_cluster_example();
        let fixed = FixedAssignment {
            push: Some(vec![vec![0.5, 0.4], vec![0.5, 0.5]]),
            reducer: None,
        };
        let err = build_mip(&s.platform, &s.workload, BarrierConfig::ALL_GLOBAL, ObjectiveKind::Makespan, &PiecewiseSpec::default(), &fixed);
        assert!(matches!(err, Err(Error::InvalidPlan(_))));
    }

    #[test]
    fn completion_is_feasible_and_brackets_the_makespan() {
        let s = make_two_cluster_example().with_alpha(3.0);
        let plans = [
            uniform_plan(&s.platform),
            affinity_plan(&s.platform).unwrap(),
            ExecutionPlan {
                push_fraction: vec![vec![0.73, 0.27], vec![0.41, 0.59]],
                reducer_fraction: vec![0.62, 0.38],
            },
        ];
        for b in BarrierConfig::all() {
            let pm = build_mip(&s.platform, &s.workload, b, ObjectiveKind::Makespan, &PiecewiseSpec::default(), &FixedAssignment::default()).unwrap();
            for plan in &plans {
                let v = pm.complete(plan);
                assert!(pm.mip.lp.max_violation(&v) <= 1e-9, "{b}");
                assert_eq!(pm.mip.integrality_violation(&v), 0.0);
                let approx = pm.approximate_objective(plan);
                let exact = evaluate(&s.platform, &s.workload, plan, b).unwrap().makespan;
                assert!(approx <= exact * (1.0 + 1e-12), "{b}: {approx} > {exact}");
                assert!(exact - approx <= pm.error_bound * (1.0 + 1e-9), "{b}: gap {} > {}", exact - approx, pm.error_bound);
            }
        }
    }

    #[test]
    fn completion_is_lp_optimal_for_fixed_plan() {
        // With the plan pinned, the LP optimum equals the completion value.
        let s = make_two_cluster_example().with_alpha(2.0);
        let plan = ExecutionPlan {
            push_fraction: vec![vec![0.9, 0.1], vec![0.3, 0.7]],
            reducer_fraction: vec![0.55, 0.45],
        };
        let b: BarrierConfig = "G-P-L".parse().unwrap();
        let pm = build_mip(&s.platform, &s.workload, b, ObjectiveKind::Makespan, &PiecewiseSpec::default(), &FixedAssignment {
            push: Some(plan.push_fraction.clone()),
            reducer: Some(plan.reducer_fraction.clone()),
        })
        .unwrap();
        let sol = solve_lp(&pm.mip.lp).unwrap();
        let exact = evaluate(&s.platform, &s.workload, &plan, b).unwrap().makespan;
        assert!((sol.objective * pm.time_scale - exact).abs() <= 1e-9 * exact);
    }
}
