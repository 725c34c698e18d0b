//! Problem containers: continuous linear programs and their mixed-integer
//! extension with exactly-one selector groups.

use std::fmt;

use crate::ModelError;

/// Index of a variable inside a [`LinearProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparator {
    Le,
    Ge,
    Eq,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Le => "<=",
            Comparator::Ge => ">=",
            Comparator::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(VarId, f64)>,
    pub cmp: Comparator,
    pub rhs: f64,
}

impl Constraint {
    /// Left-hand side evaluated at `values`.
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(v, a)| a * values[v.0]).sum()
    }

    /// Amount by which `values` violates this row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.cmp {
            Comparator::Le => (lhs - self.rhs).max(0.0),
            Comparator::Ge => (self.rhs - lhs).max(0.0),
            Comparator::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// `minimize objective · x` subject to linear rows and variable bounds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Vec<(VarId, f64)>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
        });
        VarId(self.variables.len() - 1)
    }

    /// Adds a row; zero coefficients are dropped and repeated variables merged.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: impl IntoIterator<Item = (VarId, f64)>,
        cmp: Comparator,
        rhs: f64,
    ) -> usize {
        let mut merged: Vec<(VarId, f64)> = Vec::new();
        for (v, a) in coeffs {
            if a == 0.0 {
                continue;
            }
            match merged.iter_mut().find(|(w, _)| *w == v) {
                Some(entry) => entry.1 += a,
                None => merged.push((v, a)),
            }
        }
        merged.retain(|&(_, a)| a != 0.0);
        self.constraints.push(Constraint {
            name: name.into(),
            coeffs: merged,
            cmp,
            rhs,
        });
        self.constraints.len() - 1
    }

    pub fn set_objective(&mut self, coeffs: impl IntoIterator<Item = (VarId, f64)>) {
        self.objective = coeffs.into_iter().filter(|&(_, a)| a != 0.0).collect();
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_rows(&self) -> usize {
        self.constraints.len()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(v, c)| c * values[v.0]).sum()
    }

    /// Largest bound or row violation of `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let bounds = self
            .variables
            .iter()
            .zip(values)
            .map(|(v, &x)| (v.lower - x).max(x - v.upper).max(0.0))
            .fold(0.0, f64::max);
        self.constraints
            .iter()
            .map(|c| c.violation(values))
            .fold(bounds, f64::max)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (i, v) in self.variables.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(ModelError::BadBounds {
                    var: i,
                    lower: v.lower,
                    upper: v.upper,
                });
            }
        }
        let n = self.variables.len();
        for (r, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(ModelError::NonFinite { row: r });
            }
            for &(v, a) in &c.coeffs {
                if v.0 >= n {
                    return Err(ModelError::UnknownVariable { row: r, var: v.0 });
                }
                if !a.is_finite() {
                    return Err(ModelError::NonFinite { row: r });
                }
            }
        }
        for &(v, _) in &self.objective {
            if v.0 >= n {
                return Err(ModelError::UnknownVariable {
                    row: usize::MAX,
                    var: v.0,
                });
            }
        }
        Ok(())
    }
}

/// An exactly-one group of binaries together with the row enforcing it.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectorGroup {
    pub name: String,
    /// Ordered members; branching splits the order into a prefix and a suffix.
    pub members: Vec<VarId>,
    /// Index of the `Σ members = 1` row in the LP.
    pub row: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MixedIntegerProgram {
    pub lp: LinearProgram,
    pub binaries: Vec<VarId>,
    pub sos_groups: Vec<SelectorGroup>,
}

impl MixedIntegerProgram {
    pub fn new(lp: LinearProgram) -> Self {
        Self {
            lp,
            binaries: Vec::new(),
            sos_groups: Vec::new(),
        }
    }

    /// Declares a new exactly-one group over fresh binaries and adds its row.
    pub fn add_selector_group(&mut self, name: impl Into<String>, members: Vec<VarId>) -> usize {
        let name = name.into();
        let row = self.lp.add_constraint(
            format!("{name}_one"),
            members.iter().map(|&v| (v, 1.0)),
            Comparator::Eq,
            1.0,
        );
        for &v in &members {
            if !self.binaries.contains(&v) {
                self.binaries.push(v);
            }
        }
        self.sos_groups.push(SelectorGroup { name, members, row });
        self.sos_groups.len() - 1
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.lp.validate()?;
        let n = self.lp.num_vars();
        for &b in &self.binaries {
            if b.0 >= n {
                return Err(ModelError::UnknownVariable {
                    row: usize::MAX,
                    var: b.0,
                });
            }
            let v = &self.lp.variables[b.0];
            if v.lower < 0.0 || v.upper > 1.0 {
                return Err(ModelError::BinaryBounds { var: b.0 });
            }
        }
        for (g, group) in self.sos_groups.iter().enumerate() {
            let row = self
                .lp
                .constraints
                .get(group.row)
                .ok_or(ModelError::MissingGroupRow { group: g })?;
            let exact = row.cmp == Comparator::Eq
                && row.rhs == 1.0
                && row.coeffs.len() == group.members.len()
                && group
                    .members
                    .iter()
                    .all(|m| row.coeffs.iter().any(|&(v, a)| v == *m && a == 1.0));
            if !exact {
                return Err(ModelError::MissingGroupRow { group: g });
            }
            if let Some(m) = group.members.iter().find(|m| !self.binaries.contains(m)) {
                return Err(ModelError::NonBinaryMember { group: g, var: m.0 });
            }
        }
        Ok(())
    }

    /// Largest distance of a binary from {0, 1}.
    pub fn integrality_violation(&self, values: &[f64]) -> f64 {
        self.binaries
            .iter()
            .map(|b| {
                let x = values[b.0];
                x.min(1.0 - x).max(0.0)
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_constraint_merges_duplicates() {
        let mut lp = LinearProgram::new();
        let a = lp.add_variable("a", 0.0, 1.0);
        let b = lp.add_variable("b", 0.0, 1.0);
        lp.add_constraint("r", [(a, 1.0), (b, 2.0), (a, -1.0)], Comparator::Le, 1.0);
        assert_eq!(lp.constraints[0].coeffs, vec![(b, 2.0)]);
    }

    #[test]
    fn group_row_is_checked() {
        let mut lp = LinearProgram::new();
        let z: Vec<_> = (0..3).map(|i| lp.add_variable(format!("z{i}"), 0.0, 1.0)).collect();
        let mut mip = MixedIntegerProgram::new(lp);
        mip.add_selector_group("g", z);
        assert!(mip.validate().is_ok());
        mip.lp.constraints[0].rhs = 2.0;
        assert_eq!(mip.validate(), Err(ModelError::MissingGroupRow { group: 0 }));
    }

    #[test]
    fn inverted_bounds_rejected() {
        let mut lp = LinearProgram::new();
        lp.add_variable("x", 1.0, 0.0);
        assert!(matches!(lp.validate(), Err(ModelError::BadBounds { .. })));
    }
}
