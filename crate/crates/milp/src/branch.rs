//! Best-bound branch-and-bound over exactly-one selector groups.
//!
//! A group is branched by splitting its ordered members at the point where
//! the cumulative LP weight crosses one half: one child forbids the suffix,
//! the other the prefix. Binaries outside any group are branched one at a
//! time. Children warm-start the dual simplex from their parent's basis.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::{Duration, Instant};

use crate::model::{LinearProgram, MixedIntegerProgram};
use crate::simplex::{Basis, DualSimplex, LpStatus};
use crate::SolveError;

/// Optimal point of a continuous LP.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub values: Vec<f64>,
    pub objective: f64,
}

/// Solves a continuous LP to optimality.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, SolveError> {
    lp.validate()?;
    let mut s = DualSimplex::new(lp);
    match s.solve()? {
        LpStatus::Optimal => Ok(LpSolution {
            values: s.values().to_vec(),
            objective: lp.objective_value(s.values()),
        }),
        LpStatus::Infeasible => Err(SolveError::Infeasible),
    }
}

#[derive(Debug, Clone)]
pub struct MipOptions {
    /// Stop once `(incumbent − bound) / |incumbent|` drops to this value.
    pub rel_gap: f64,
    pub time_limit: Duration,
    /// Upper bound on processed nodes; keeps runs reproducible when set.
    pub node_limit: Option<usize>,
    /// Distance from 0/1 under which a binary counts as integral.
    pub int_tol: f64,
    /// Row and bound violation accepted for externally proposed solutions.
    pub feas_tol: f64,
}

impl Default for MipOptions {
    fn default() -> Self {
        Self {
            rel_gap: 1e-4,
            time_limit: Duration::from_secs(300),
            node_limit: None,
            int_tol: 1e-6,
            feas_tol: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MipStatus {
    /// The gap target was met or the tree was exhausted.
    Optimal,
    TimeLimit,
    NodeLimit,
}

#[derive(Debug, Clone)]
pub struct MipOutcome {
    pub status: MipStatus,
    pub values: Vec<f64>,
    pub objective: f64,
    pub best_bound: f64,
    pub gap: f64,
    pub nodes: usize,
    pub wall_time: Duration,
}

/// Builds a complete candidate assignment from a node's LP solution.
///
/// Candidates are checked for feasibility and integrality before they are
/// accepted, so a heuristic may return anything.
pub trait Heuristic {
    fn propose(&mut self, lp_values: &[f64]) -> Option<Vec<f64>>;
}

struct Node {
    id: usize,
    bound: f64,
    /// Variables whose upper bound is forced to zero, or lower bound to one.
    zero: Vec<usize>,
    one: Vec<usize>,
    basis: Option<Rc<Basis>>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Max-heap: smaller bound first, then smaller id.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(other.id.cmp(&self.id))
    }
}

pub struct BranchAndBound<'a> {
    mip: &'a MixedIntegerProgram,
    options: MipOptions,
    starts: Vec<Vec<f64>>,
    heuristic: Option<Box<dyn Heuristic + 'a>>,
}

struct Incumbent {
    values: Vec<f64>,
    objective: f64,
}

fn better(obj: f64, values: &[f64], inc: &Option<Incumbent>) -> bool {
    match inc {
        None => true,
        Some(cur) => {
            let tie = 1e-12 * cur.objective.abs().max(1.0);
            if obj < cur.objective - tie {
                true
            } else if obj > cur.objective + tie {
                false
            } else {
                values
                    .iter()
                    .zip(&cur.values)
                    .map(|(a, b)| a.total_cmp(b))
                    .find(|o| *o != Ordering::Equal)
                    == Some(Ordering::Less)
            }
        }
    }
}

impl<'a> BranchAndBound<'a> {
    pub fn new(mip: &'a MixedIntegerProgram, options: MipOptions) -> Self {
        Self {
            mip,
            options,
            starts: Vec::new(),
            heuristic: None,
        }
    }

    /// Adds a known solution; infeasible starts are ignored.
    pub fn add_start(&mut self, values: Vec<f64>) {
        self.starts.push(values);
    }

    pub fn set_heuristic(&mut self, h: impl Heuristic + 'a) {
        self.heuristic = Some(Box::new(h));
    }

    fn accept(&self, values: &[f64]) -> bool {
        values.len() == self.mip.lp.num_vars()
            && values.iter().all(|v| v.is_finite())
            && self.mip.lp.max_violation(values) <= self.options.feas_tol
            && self.mip.integrality_violation(values) <= self.options.int_tol
    }

    fn offer(&self, values: Vec<f64>, inc: &mut Option<Incumbent>) -> bool {
        if !self.accept(&values) {
            return false;
        }
        let obj = self.mip.lp.objective_value(&values);
        if better(obj, &values, inc) {
            *inc = Some(Incumbent {
                values,
                objective: obj,
            });
            true
        } else {
            false
        }
    }

    fn gap(inc: &Option<Incumbent>, bound: f64) -> f64 {
        match inc {
            None => f64::INFINITY,
            Some(i) => ((i.objective - bound) / i.objective.abs().max(1e-9)).max(0.0),
        }
    }

    /// Picks the branching decision for a fractional LP point, or `None`
    /// if every binary is integral.
    fn branch_split(&self, x: &[f64], zero: &[usize]) -> Option<(Vec<usize>, Vec<usize>, Vec<usize>)> {
        let tol = self.options.int_tol;
        let mut best: Option<(f64, usize)> = None;
        for (g, group) in self.mip.sos_groups.iter().enumerate() {
            let maxz = group.members.iter().map(|m| x[m.0]).fold(0.0, f64::max);
            let frac = 1.0 - maxz;
            if frac > tol && best.is_none_or(|(b, _)| frac > b + 1e-12) {
                best = Some((frac, g));
            }
        }
        if let Some((_, g)) = best {
            let members: Vec<usize> = self.mip.sos_groups[g]
                .members
                .iter()
                .map(|m| m.0)
                .filter(|m| !zero.contains(m))
                .collect();
            let nz: Vec<usize> = (0..members.len())
                .filter(|&i| x[members[i]] > 1e-12)
                .collect();
            let (first, last) = (nz[0], *nz.last().unwrap());
            let total: f64 = members.iter().map(|&m| x[m].max(0.0)).sum();
            let mut cum = 0.0;
            let mut cut = last;
            for (i, &m) in members.iter().enumerate() {
                cum += x[m].max(0.0);
                if cum >= 0.5 * total {
                    cut = (i + 1).min(last);
                    break;
                }
            }
            let cut = cut.max(first + 1);
            let left_zero = members[cut..].to_vec();
            let right_zero = members[..cut].to_vec();
            return Some((left_zero, right_zero, Vec::new()));
        }
        // Binaries outside groups.
        let mut loose: Option<(f64, usize)> = None;
        for &b in &self.mip.binaries {
            let v = x[b.0];
            let frac = v.min(1.0 - v);
            if frac > tol && loose.is_none_or(|(f, _)| frac > f + 1e-12) {
                loose = Some((frac, b.0));
            }
        }
        loose.map(|(_, b)| (vec![b], Vec::new(), vec![b]))
    }

    pub fn solve(mut self) -> Result<MipOutcome, SolveError> {
        let started = Instant::now();
        self.mip.validate()?;
        let lp = &self.mip.lp;
        let mut incumbent: Option<Incumbent> = None;
        for start in std::mem::take(&mut self.starts) {
            self.offer(start, &mut incumbent);
        }

        let mut simplex = DualSimplex::new(lp);
        let root_basis = simplex.basis();
        let root_bounds: Vec<(f64, f64)> = (0..lp.num_vars()).map(|j| simplex.bounds(j)).collect();
        let mut touched: Vec<usize> = Vec::new();

        let mut heap = BinaryHeap::new();
        heap.push(Node {
            id: 0,
            bound: f64::NEG_INFINITY,
            zero: Vec::new(),
            one: Vec::new(),
            basis: None,
        });
        let mut next_id = 1;
        let mut nodes = 0usize;
        let mut status = MipStatus::Optimal;
        let mut root_infeasible = false;
        let mut closed_at: Option<f64> = None;
        let mut unexplored_bound = f64::INFINITY;

        while let Some(node) = heap.pop() {
            let frontier = node.bound;
            if let Some(inc) = &incumbent {
                if Self::gap(&incumbent, frontier) <= self.options.rel_gap
                    || frontier >= inc.objective
                {
                    closed_at = Some(frontier.min(inc.objective));
                    heap.clear();
                    break;
                }
            }
            if started.elapsed() > self.options.time_limit {
                status = MipStatus::TimeLimit;
                heap.push(node);
                break;
            }
            if self.options.node_limit.is_some_and(|l| nodes >= l) {
                status = MipStatus::NodeLimit;
                heap.push(node);
                break;
            }
            nodes += 1;

            for &j in &touched {
                simplex.set_bounds(j, root_bounds[j].0, root_bounds[j].1);
            }
            touched.clear();
            for &j in &node.zero {
                simplex.set_bounds(j, root_bounds[j].0, 0.0);
                touched.push(j);
            }
            for &j in &node.one {
                simplex.set_bounds(j, 1.0, root_bounds[j].1);
                touched.push(j);
            }
            simplex.set_basis(node.basis.as_deref().unwrap_or(&root_basis));
            let result = match simplex.solve() {
                Err(SolveError::Numerical(msg)) => {
                    log::debug!("node {}: {msg}; retrying from the slack basis", node.id);
                    simplex.set_basis(&root_basis);
                    simplex.solve()
                }
                other => other,
            };
            let lp_status = match result {
                Ok(s) => s,
                Err(SolveError::Numerical(msg)) => {
                    log::warn!("node {} dropped after numerical failure: {msg}", node.id);
                    unexplored_bound = unexplored_bound.min(node.bound);
                    continue;
                }
                Err(e) => return Err(e),
            };
            if lp_status == LpStatus::Infeasible {
                if node.id == 0 {
                    root_infeasible = true;
                }
                continue;
            }
            let x = simplex.values().to_vec();
            let obj = lp.objective_value(&x);
            if let Some(h) = self.heuristic.as_mut() {
                if let Some(candidate) = h.propose(&x) {
                    let h = self.heuristic.take();
                    self.offer(candidate, &mut incumbent);
                    self.heuristic = h;
                }
            }
            if let Some(inc) = &incumbent {
                if obj >= inc.objective || Self::gap(&incumbent, obj) <= self.options.rel_gap {
                    continue;
                }
            }
            match self.branch_split(&x, &node.zero) {
                None => {
                    let mut snapped = x.clone();
                    for &b in &self.mip.binaries {
                        snapped[b.0] = snapped[b.0].round();
                    }
                    if !self.offer(snapped, &mut incumbent) {
                        self.offer(x, &mut incumbent);
                    }
                }
                Some((left_zero, right_zero, right_one)) => {
                    let basis = Rc::new(simplex.basis());
                    for (extra_zero, extra_one) in [(left_zero, Vec::new()), (right_zero, right_one)] {
                        let mut zero = node.zero.clone();
                        zero.extend(extra_zero);
                        let mut one = node.one.clone();
                        one.extend(extra_one);
                        heap.push(Node {
                            id: next_id,
                            bound: obj,
                            zero,
                            one,
                            basis: Some(Rc::clone(&basis)),
                        });
                        next_id += 1;
                    }
                }
            }
        }

        let Some(inc) = incumbent else {
            if root_infeasible {
                return Err(SolveError::Infeasible);
            }
            return Err(SolveError::NoIncumbent);
        };
        let open = heap
            .iter()
            .map(|n| n.bound)
            .fold(unexplored_bound, f64::min);
        let best_bound = closed_at.unwrap_or(inc.objective).min(open);
        let gap = ((inc.objective - best_bound) / inc.objective.abs().max(1e-9)).max(0.0);
        Ok(MipOutcome {
            status,
            objective: inc.objective,
            values: inc.values,
            best_bound,
            gap,
            nodes,
            wall_time: started.elapsed(),
        })
    }
}
