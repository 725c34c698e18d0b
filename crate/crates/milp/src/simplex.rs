//! Bounded revised dual simplex.
//!
//! Every row `r` gets a logical column `s_r` with `a_r·x − s_r = 0`, so the
//! comparator and right-hand side become bounds on `s_r` and the all-logical
//! basis is always available as a starting point. Nonbasic structurals are
//! parked on the bound matching the sign of their cost, which makes that
//! basis dual feasible; the dual simplex then drives out primal
//! infeasibilities. The same machinery warm-starts branch-and-bound children,
//! where only bounds change.
//!
//! Pricing takes the most infeasible basic variable and a two-pass (Harris)
//! ratio test. After a run of degenerate steps the solver switches to Bland's
//! smallest-index rule until progress resumes, which rules out cycling.

use crate::lu::LuFactors;
use crate::model::{Comparator, LinearProgram};
use crate::SolveError;

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 80;
const DEGENERATE_RUN: usize = 60;
/// Stand-in bound for variables that must sit on an infinite bound.
const BOX: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
    /// Free nonbasic held at zero.
    Zero,
}

/// A saved basis, reusable after bound changes.
#[derive(Debug, Clone)]
pub struct Basis {
    head: Vec<usize>,
    state: Vec<State>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

struct Eta {
    pos: usize,
    pivot: f64,
    col: Vec<(usize, f64)>,
}

pub struct DualSimplex {
    n: usize,
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    boxed: Vec<bool>,
    state: Vec<State>,
    head: Vec<usize>,
    x: Vec<f64>,
    d: Vec<f64>,
    lu: Option<LuFactors>,
    etas: Vec<Eta>,
    iterations: usize,
    pub max_iterations: usize,
}

impl DualSimplex {
    pub fn new(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let m = lp.num_rows();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (r, c) in lp.constraints.iter().enumerate() {
            for &(v, a) in &c.coeffs {
                cols[v.0].push((r, a));
            }
        }
        let mut cost = vec![0.0; n + m];
        for &(v, c) in &lp.objective {
            cost[v.0] += c;
        }
        let mut lower = Vec::with_capacity(n + m);
        let mut upper = Vec::with_capacity(n + m);
        for v in &lp.variables {
            lower.push(v.lower);
            upper.push(v.upper);
        }
        for c in &lp.constraints {
            let (lo, hi) = match c.cmp {
                Comparator::Le => (f64::NEG_INFINITY, c.rhs),
                Comparator::Ge => (c.rhs, f64::INFINITY),
                Comparator::Eq => (c.rhs, c.rhs),
            };
            lower.push(lo);
            upper.push(hi);
        }
        let mut s = DualSimplex {
            n,
            m,
            cols,
            cost,
            lower,
            upper,
            boxed: vec![false; n + m],
            state: vec![State::Lower; n + m],
            head: (n..n + m).collect(),
            x: vec![0.0; n + m],
            d: vec![0.0; n + m],
            lu: None,
            etas: Vec::new(),
            iterations: 0,
            max_iterations: 50 * (n + m) + 10_000,
        };
        for j in n..n + m {
            s.state[j] = State::Basic;
        }
        for j in 0..n {
            s.state[j] = s.dual_feasible_side(j, s.cost[j]);
        }
        s
    }

    pub fn num_structural(&self) -> usize {
        self.n
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    fn dual_feasible_side(&mut self, j: usize, dj: f64) -> State {
        let lo_ok = self.lower[j].is_finite();
        let hi_ok = self.upper[j].is_finite();
        if dj > DUAL_TOL {
            if !lo_ok {
                self.lower[j] = -BOX;
                self.boxed[j] = true;
            }
            State::Lower
        } else if dj < -DUAL_TOL {
            if !hi_ok {
                self.upper[j] = BOX;
                self.boxed[j] = true;
            }
            State::Upper
        } else if lo_ok {
            State::Lower
        } else if hi_ok {
            State::Upper
        } else {
            State::Zero
        }
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    /// Changes the bounds of structural variable `j`. A nonbasic variable
    /// follows its bound; basic values are refreshed on the next solve.
    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        debug_assert!(j < self.n);
        self.lower[j] = lower;
        self.upper[j] = upper;
        self.boxed[j] = false;
        if self.state[j] == State::Upper && !upper.is_finite() {
            self.state[j] = State::Lower;
        }
        if self.state[j] == State::Lower && !lower.is_finite() {
            self.state[j] = if upper.is_finite() {
                State::Upper
            } else {
                State::Zero
            };
        }
    }

    pub fn basis(&self) -> Basis {
        Basis {
            head: self.head.clone(),
            state: self.state.clone(),
        }
    }

    pub fn set_basis(&mut self, basis: &Basis) {
        self.head.clone_from(&basis.head);
        self.state.clone_from(&basis.state);
        self.lu = None;
    }

    /// Values of the structural variables.
    pub fn values(&self) -> &[f64] {
        &self.x[..self.n]
    }

    pub fn objective(&self) -> f64 {
        (0..self.n).map(|j| self.cost[j] * self.x[j]).sum()
    }

    fn column(&self, j: usize) -> ColumnRef<'_> {
        if j < self.n {
            ColumnRef::Sparse(&self.cols[j])
        } else {
            ColumnRef::Logical(j - self.n)
        }
    }

    fn dot_column(&self, j: usize, v: &[f64]) -> f64 {
        match self.column(j) {
            ColumnRef::Sparse(c) => c.iter().map(|&(r, a)| a * v[r]).sum(),
            ColumnRef::Logical(r) => -v[r],
        }
    }

    fn scatter_column(&self, j: usize) -> Vec<f64> {
        let mut b = vec![0.0; self.m];
        match self.column(j) {
            ColumnRef::Sparse(c) => {
                for &(r, a) in c {
                    b[r] = a;
                }
            }
            ColumnRef::Logical(r) => b[r] = -1.0,
        }
        b
    }

    fn refactor(&mut self) -> Result<(), SolveError> {
        loop {
            let columns: Vec<Vec<(usize, f64)>> = self
                .head
                .iter()
                .map(|&j| match self.column(j) {
                    ColumnRef::Sparse(c) => c.to_vec(),
                    ColumnRef::Logical(r) => vec![(r, -1.0)],
                })
                .collect();
            match LuFactors::factorize(self.m, &columns) {
                Ok(lu) => {
                    self.lu = Some(lu);
                    self.etas.clear();
                    return Ok(());
                }
                Err(sing) => {
                    // Swap dependent columns for the logicals of uncovered rows.
                    log::debug!("singular basis, repairing {} columns", sing.cols.len());
                    if sing.cols.len() != sing.rows.len() {
                        return Err(SolveError::Numerical("unrepairable basis".into()));
                    }
                    for (&p, &r) in sing.cols.iter().zip(&sing.rows) {
                        let out = self.head[p];
                        let logical = self.n + r;
                        if self.state[logical] == State::Basic {
                            return Err(SolveError::Numerical("logical already basic".into()));
                        }
                        self.head[p] = logical;
                        self.state[logical] = State::Basic;
                        self.state[out] = self.nearest_side(out);
                    }
                }
            }
        }
    }

    fn nearest_side(&self, j: usize) -> State {
        let (lo, hi) = (self.lower[j], self.upper[j]);
        match (lo.is_finite(), hi.is_finite()) {
            (true, true) => {
                if (self.x[j] - lo).abs() <= (self.x[j] - hi).abs() {
                    State::Lower
                } else {
                    State::Upper
                }
            }
            (true, false) => State::Lower,
            (false, true) => State::Upper,
            (false, false) => State::Zero,
        }
    }

    fn ftran(&self, b: &mut [f64]) -> Vec<f64> {
        let mut x = self.lu.as_ref().expect("factorized").ftran(b);
        for eta in &self.etas {
            let v = x[eta.pos] / eta.pivot;
            if v != 0.0 {
                for &(i, a) in &eta.col {
                    x[i] -= a * v;
                }
            }
            x[eta.pos] = v;
        }
        x
    }

    fn btran(&self, e: &mut [f64]) -> Vec<f64> {
        for eta in self.etas.iter().rev() {
            let mut s = e[eta.pos];
            for &(i, a) in &eta.col {
                s -= a * e[i];
            }
            e[eta.pos] = s / eta.pivot;
        }
        self.lu.as_ref().expect("factorized").btran(e)
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            State::Lower => self.lower[j],
            State::Upper => self.upper[j],
            State::Zero => 0.0,
            State::Basic => unreachable!(),
        }
    }

    fn recompute_primal(&mut self) {
        let mut rhs = vec![0.0; self.m];
        for j in 0..self.n + self.m {
            if self.state[j] == State::Basic {
                continue;
            }
            let v = self.nonbasic_value(j);
            self.x[j] = v;
            if v != 0.0 {
                match self.column(j) {
                    ColumnRef::Sparse(c) => {
                        for &(r, a) in c {
                            rhs[r] -= a * v;
                        }
                    }
                    ColumnRef::Logical(r) => rhs[r] += v,
                }
            }
        }
        let xb = self.ftran(&mut rhs);
        for (p, &j) in self.head.iter().enumerate() {
            self.x[j] = xb[p];
        }
    }

    fn recompute_dual(&mut self) {
        let mut cb: Vec<f64> = self.head.iter().map(|&j| self.cost[j]).collect();
        let pi = self.btran(&mut cb);
        for j in 0..self.n + self.m {
            self.d[j] = if self.state[j] == State::Basic {
                0.0
            } else {
                self.cost[j] - self.dot_column(j, &pi)
            };
        }
    }

    /// Re-establishes dual feasibility of nonbasic variables by moving them
    /// to the bound matching their reduced cost.
    fn fix_dual_signs(&mut self) -> bool {
        let mut changed = false;
        for j in 0..self.n + self.m {
            let st = self.state[j];
            if st == State::Basic || self.lower[j] == self.upper[j] {
                continue;
            }
            let dj = self.d[j];
            let wrong = match st {
                State::Lower => dj < -DUAL_TOL,
                State::Upper => dj > DUAL_TOL,
                State::Zero => dj.abs() > DUAL_TOL,
                State::Basic => false,
            };
            if wrong {
                let side = self.dual_feasible_side(j, dj);
                if side != st {
                    self.state[j] = side;
                    changed = true;
                }
            }
        }
        changed
    }

    fn infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lower[j] - PRIMAL_TOL {
            self.lower[j] - v
        } else if v > self.upper[j] + PRIMAL_TOL {
            v - self.upper[j]
        } else {
            0.0
        }
    }

    /// Runs the dual simplex from the current basis.
    pub fn solve(&mut self) -> Result<LpStatus, SolveError> {
        self.refactor()?;
        self.recompute_primal();
        self.recompute_dual();
        if self.fix_dual_signs() {
            self.recompute_primal();
        }
        let mut degenerate = 0usize;
        // True while x and d come straight from a fresh factorization.
        let mut fresh = true;
        let start_iter = self.iterations;
        loop {
            if self.iterations - start_iter > self.max_iterations {
                return Err(SolveError::IterationLimit);
            }
            if self.etas.len() >= REFACTOR_EVERY {
                self.refactor()?;
                self.recompute_primal();
                self.recompute_dual();
            }
            let bland = degenerate > DEGENERATE_RUN;

            // Leaving variable.
            let mut leave: Option<(usize, f64)> = None;
            for (p, &j) in self.head.iter().enumerate() {
                let inf = self.infeasibility(j);
                if inf <= 0.0 {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some((q, best)) => {
                        if bland {
                            j < self.head[q]
                        } else {
                            inf > best
                        }
                    }
                };
                if better {
                    leave = Some((p, inf));
                }
            }
            let Some((r, _)) = leave else {
                if !fresh {
                    // Confirm on a fresh factorization before declaring optimality.
                    fresh = true;
                    self.refactor()?;
                    self.recompute_primal();
                    self.recompute_dual();
                    if self.fix_dual_signs() {
                        self.recompute_primal();
                    }
                    continue;
                }
                return self.finish();
            };
            let jr = self.head[r];
            let below = self.x[jr] < self.lower[jr];
            let target = if below { self.lower[jr] } else { self.upper[jr] };

            // Pivot row.
            let mut e = vec![0.0; self.m];
            e[r] = 1.0;
            let rho = self.btran(&mut e);
            let mut alpha_row = vec![0.0; self.n + self.m];
            let mut candidates: Vec<(usize, f64)> = Vec::new();
            for j in 0..self.n + self.m {
                let st = self.state[j];
                if st == State::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let a = self.dot_column(j, &rho);
                alpha_row[j] = a;
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                // x_r moves by −a·Δx_j.
                let eligible = match st {
                    State::Lower => (below && a < 0.0) || (!below && a > 0.0),
                    State::Upper => (below && a > 0.0) || (!below && a < 0.0),
                    State::Zero => true,
                    State::Basic => false,
                };
                if eligible {
                    candidates.push((j, a));
                }
            }
            if candidates.is_empty() {
                if !fresh {
                    fresh = true;
                    self.refactor()?;
                    self.recompute_primal();
                    self.recompute_dual();
                    continue;
                }
                return Ok(LpStatus::Infeasible);
            }
            let slack = |s: &Self, j: usize| -> f64 {
                match s.state[j] {
                    State::Lower => s.d[j].max(0.0),
                    State::Upper => (-s.d[j]).max(0.0),
                    _ => s.d[j].abs(),
                }
            };
            let q = if bland {
                let mut best: Option<(usize, f64)> = None;
                for &(j, a) in &candidates {
                    let ratio = slack(self, j) / a.abs();
                    match best {
                        None => best = Some((j, ratio)),
                        Some((bj, br)) => {
                            if ratio < br - 1e-12 || (ratio <= br + 1e-12 && j < bj) {
                                best = Some((j, ratio));
                            }
                        }
                    }
                }
                best.unwrap().0
            } else {
                let theta_max = candidates
                    .iter()
                    .map(|&(j, a)| (slack(self, j) + DUAL_TOL) / a.abs())
                    .fold(f64::INFINITY, f64::min);
                candidates
                    .iter()
                    .filter(|&&(j, a)| slack(self, j) / a.abs() <= theta_max)
                    .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()).then(y.0.cmp(&x.0)))
                    .unwrap()
                    .0
            };

            let mut colq = self.scatter_column(q);
            let alpha_col = self.ftran(&mut colq);
            let arq = alpha_row[q];
            let acq = alpha_col[r];
            if (arq - acq).abs() > 1e-7 * (1.0 + acq.abs()) || acq.abs() <= PIVOT_TOL {
                if self.etas.is_empty() {
                    return Err(SolveError::Numerical(format!(
                        "pivot mismatch {arq} vs {acq}"
                    )));
                }
                self.refactor()?;
                self.recompute_primal();
                self.recompute_dual();
                continue;
            }

            // Dual update.
            let theta_d = self.d[q] / acq;
            if theta_d.abs() <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            for j in 0..self.n + self.m {
                if self.state[j] != State::Basic && alpha_row[j] != 0.0 {
                    self.d[j] -= theta_d * alpha_row[j];
                }
            }
            self.d[q] = 0.0;
            self.d[jr] = -theta_d;

            // Primal update.
            let delta = (self.x[jr] - target) / acq;
            for (p, &j) in self.head.iter().enumerate() {
                if alpha_col[p] != 0.0 {
                    self.x[j] -= alpha_col[p] * delta;
                }
            }
            self.x[q] += delta;
            self.x[jr] = target;
            self.state[jr] = if below { State::Lower } else { State::Upper };
            self.state[q] = State::Basic;
            self.head[r] = q;
            self.etas.push(Eta {
                pos: r,
                pivot: acq,
                col: alpha_col
                    .iter()
                    .enumerate()
                    .filter(|&(i, &a)| i != r && a != 0.0)
                    .map(|(i, &a)| (i, a))
                    .collect(),
            });
            self.iterations += 1;
            fresh = false;
        }
    }

    fn finish(&mut self) -> Result<LpStatus, SolveError> {
        for j in 0..self.n + self.m {
            if self.boxed[j] && self.state[j] != State::Basic {
                let v = self.x[j];
                if v.abs() >= BOX * (1.0 - 1e-12) {
                    return Err(SolveError::Unbounded);
                }
            }
        }
        Ok(LpStatus::Optimal)
    }
}

enum ColumnRef<'a> {
    Sparse(&'a [(usize, f64)]),
    Logical(usize),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Comparator::*, LinearProgram};

    fn solve(lp: &LinearProgram) -> (LpStatus, Vec<f64>, f64) {
        let mut s = DualSimplex::new(lp);
        let st = s.solve().unwrap();
        (st, s.values().to_vec(), s.objective())
    }

    #[test]
    fn textbook_maximization() {
        // max 3a + 5b s.t. a ≤ 4, 2b ≤ 12, 3a + 2b ≤ 18  →  (2, 6), 36
        let mut lp = LinearProgram::new();
        let a = lp.add_variable("a", 0.0, f64::INFINITY);
        let b = lp.add_variable("b", 0.0, f64::INFINITY);
        lp.add_constraint("c1", [(a, 1.0)], Le, 4.0);
        lp.add_constraint("c2", [(b, 2.0)], Le, 12.0);
        lp.add_constraint("c3", [(a, 3.0), (b, 2.0)], Le, 18.0);
        lp.set_objective([(a, -3.0), (b, -5.0)]);
        let (st, x, obj) = solve(&lp);
        assert_eq!(st, LpStatus::Optimal);
        assert!((x[0] - 2.0).abs() < 1e-9 && (x[1] - 6.0).abs() < 1e-9);
        assert!((obj + 36.0).abs() < 1e-9);
    }

    #[test]
    fn minimax_with_equality() {
        // min t s.t. t ≥ 2p, t ≥ 1 − p, 0 ≤ p ≤ 1  →  p = 1/3, t = 2/3
        let mut lp = LinearProgram::new();
        let p = lp.add_variable("p", 0.0, 1.0);
        let q = lp.add_variable("q", 0.0, 1.0);
        let t = lp.add_variable("t", 0.0, f64::INFINITY);
        lp.add_constraint("sum", [(p, 1.0), (q, 1.0)], Eq, 1.0);
        lp.add_constraint("a", [(t, 1.0), (p, -2.0)], Ge, 0.0);
        lp.add_constraint("b", [(t, 1.0), (q, -1.0)], Ge, 0.0);
        lp.set_objective([(t, 1.0)]);
        let (st, x, obj) = solve(&lp);
        assert_eq!(st, LpStatus::Optimal);
        assert!((x[0] - 1.0 / 3.0).abs() < 1e-9);
        assert!((obj - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasibility() {
        let mut lp = LinearProgram::new();
        let a = lp.add_variable("a", 0.0, 1.0);
        let b = lp.add_variable("b", 0.0, 1.0);
        lp.add_constraint("s", [(a, 1.0), (b, 1.0)], Ge, 3.0);
        lp.set_objective([(a, 1.0)]);
        let (st, _, _) = solve(&lp);
        assert_eq!(st, LpStatus::Infeasible);
    }

    #[test]
    fn detects_unboundedness() {
        let mut lp = LinearProgram::new();
        let a = lp.add_variable("a", 0.0, f64::INFINITY);
        let b = lp.add_variable("b", 0.0, f64::INFINITY);
        lp.add_constraint("r", [(a, 1.0), (b, -1.0)], Le, 1.0);
        lp.set_objective([(a, -1.0), (b, -1.0)]);
        let mut s = DualSimplex::new(&lp);
        assert_eq!(s.solve(), Err(SolveError::Unbounded));
    }

    #[test]
    fn warm_start_after_bound_change() {
        let mut lp = LinearProgram::new();
        let a = lp.add_variable("a", 0.0, 10.0);
        let b = lp.add_variable("b", 0.0, 10.0);
        lp.add_constraint("r", [(a, 1.0), (b, 1.0)], Ge, 4.0);
        lp.set_objective([(a, 1.0), (b, 2.0)]);
        let mut s = DualSimplex::new(&lp);
        assert_eq!(s.solve().unwrap(), LpStatus::Optimal);
        assert!((s.objective() - 4.0).abs() < 1e-9);
        let basis = s.basis();
        s.set_bounds(0, 0.0, 1.0);
        s.set_basis(&basis);
        assert_eq!(s.solve().unwrap(), LpStatus::Optimal);
        assert!((s.objective() - 7.0).abs() < 1e-9);
    }

    #[test]
    fn free_variable_and_negative_costs() {
        // min −x − y with x free, x + y ≤ 2, x − y ≤ 0, y ≤ 5 → x = y = 1
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", f64::NEG_INFINITY, f64::INFINITY);
        let y = lp.add_variable("y", 0.0, 5.0);
        lp.add_constraint("a", [(x, 1.0), (y, 1.0)], Le, 2.0);
        lp.add_constraint("b", [(x, 1.0), (y, -1.0)], Le, 0.0);
        lp.set_objective([(x, -1.0), (y, -1.0)]);
        let (st, _, obj) = solve(&lp);
        assert_eq!(st, LpStatus::Optimal);
        assert!((obj + 2.0).abs() < 1e-9);
    }
}
