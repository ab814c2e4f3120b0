use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::problem::{Cmp, Sense, VarKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpVar {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

impl MilpVar {
    pub fn continuous(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self { name: name.into(), kind: VarKind::Continuous, lower, upper }
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: VarKind::Binary, lower: 0.0, upper: 1.0 }
    }

    pub fn integer(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self { name: name.into(), kind: VarKind::Integer, lower, upper }
    }

    pub fn is_integral(&self) -> bool {
        self.kind.is_discrete()
    }
}

/// Affine expression over MILP variable indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MilpExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl MilpExpr {
    pub fn new(terms: Vec<(usize, f64)>, constant: f64) -> Self {
        Self { terms, constant }
    }

    pub fn var(index: usize) -> Self {
        Self { terms: vec![(index, 1.0)], constant: 0.0 }
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(j, c)| c * values[j]).sum::<f64>()
    }

    /// Sums duplicate indices and drops zero coefficients; term order follows
    /// first appearance.
    pub fn compacted(&self) -> Self {
        let mut order: Vec<usize> = Vec::new();
        let mut sums: BTreeMap<usize, f64> = BTreeMap::new();
        for &(j, c) in &self.terms {
            let entry = sums.entry(j).or_insert_with(|| {
                order.push(j);
                0.0
            });
            *entry += c;
        }
        let terms = order.into_iter().map(|j| (j, sums[&j])).filter(|&(_, c)| c != 0.0).collect();
        Self { terms, constant: self.constant }
    }
}

/// `Σ coefficient·var cmp rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub name: String,
    pub terms: Vec<(usize, f64)>,
    pub cmp: Cmp,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn new(name: impl Into<String>, terms: Vec<(usize, f64)>, cmp: Cmp, rhs: f64) -> Self {
        Self { name: name.into(), terms, cmp, rhs }
    }

    /// Builds `expr cmp rhs`, folding the expression's constant into the
    /// right-hand side.
    pub fn from_expr(name: impl Into<String>, expr: &MilpExpr, cmp: Cmp, rhs: f64) -> Self {
        let compact = expr.compacted();
        Self { name: name.into(), terms: compact.terms, cmp, rhs: rhs - compact.constant }
    }

    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, c)| c * values[j]).sum()
    }

    /// Amount by which `values` violate the constraint (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let a = self.activity(values);
        match self.cmp {
            Cmp::Le => (a - self.rhs).max(0.0),
            Cmp::Ge => (self.rhs - a).max(0.0),
            Cmp::Eq => (a - self.rhs).abs(),
        }
    }

    pub fn is_satisfied(&self, values: &[f64], tolerance: f64) -> bool {
        self.violation(values) <= tolerance * (1.0 + self.rhs.abs())
    }
}

/// A mixed-integer linear program plus the mapping from problem-level
/// variable names to MILP variable indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Milp {
    pub vars: Vec<MilpVar>,
    pub constraints: Vec<LinearConstraint>,
    pub objective: MilpExpr,
    pub sense: Sense,
    pub handles: BTreeMap<String, usize>,
}

impl Milp {
    pub fn new(sense: Sense) -> Self {
        Self {
            vars: Vec::new(),
            constraints: Vec::new(),
            objective: MilpExpr::default(),
            sense,
            handles: BTreeMap::new(),
        }
    }

    pub fn add_var(&mut self, var: MilpVar) -> usize {
        self.vars.push(var);
        self.vars.len() - 1
    }

    pub fn add_constraint(&mut self, constraint: LinearConstraint) {
        self.constraints.push(constraint);
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn binary_count(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn integer_indices(&self) -> Vec<usize> {
        self.vars.iter().enumerate().filter(|(_, v)| v.is_integral()).map(|(j, _)| j).collect()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.eval(values)
    }

    /// Largest constraint or bound violation of `values`.
    pub fn max_violation(&self, values: &[f64]) -> f64 {
        let rows = self
            .constraints
            .iter()
            .map(|c| c.violation(values) / (1.0 + c.rhs.abs()))
            .fold(0.0, f64::max);
        let bounds = self
            .vars
            .iter()
            .zip(values)
            .map(|(v, &x)| (v.lower - x).max(x - v.upper).max(0.0))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    pub fn is_feasible(&self, values: &[f64], primal_tol: f64, integrality_tol: f64) -> bool {
        values.len() == self.vars.len()
            && self.max_violation(values) <= primal_tol
            && self
                .vars
                .iter()
                .zip(values)
                .all(|(v, &x)| !v.is_integral() || (x - x.round()).abs() <= integrality_tol)
    }

    /// Copy with every integer variable relaxed to continuous.
    pub fn relaxed(&self) -> Milp {
        let mut out = self.clone();
        for v in &mut out.vars {
            v.kind = VarKind::Continuous;
        }
        out
    }

    /// Variable values keyed by name.
    pub fn named_values(&self, values: &[f64]) -> BTreeMap<String, f64> {
        self.vars.iter().zip(values).map(|(v, &x)| (v.name.clone(), x)).collect()
    }
}
