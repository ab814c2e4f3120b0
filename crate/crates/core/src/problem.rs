//! Problem definition: design variables, blackbox outputs, linear objective
//! and the linear constraint conjunction that a solution must satisfy.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default absolute tolerance used when checking constraints.
pub const DEFAULT_FEASIBILITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("missing variable `{0}` in assignment")]
    MissingVariable(String),
    #[error("invalid problem: {}", join_defects(.0))]
    Invalid(Vec<Defect>),
}

fn join_defects(defects: &[Defect]) -> String {
    defects.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarKind {
    Continuous,
    Integer,
    Binary,
}

impl VarKind {
    pub fn is_discrete(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSpec {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

impl VariableSpec {
    pub fn continuous(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self { name: name.into(), kind: VarKind::Continuous, lower, upper }
    }

    pub fn integer(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self { name: name.into(), kind: VarKind::Integer, lower, upper }
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: VarKind::Binary, lower: 0.0, upper: 1.0 }
    }

    /// Blackbox output with no a-priori range.
    pub fn output(name: impl Into<String>) -> Self {
        Self::continuous(name, f64::NEG_INFINITY, f64::INFINITY)
    }

    /// True when `value` lies in the declared range and is integral for
    /// discrete kinds.
    pub fn contains(&self, value: f64) -> bool {
        value >= self.lower
            && value <= self.upper
            && (!self.kind.is_discrete() || value.fract() == 0.0)
    }
}

/// Affine expression `constant + Σ coefficient·variable`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearExpr {
    pub terms: Vec<(f64, String)>,
    pub constant: f64,
}

impl LinearExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(value: f64) -> Self {
        Self { terms: Vec::new(), constant: value }
    }

    pub fn var(name: impl Into<String>) -> Self {
        Self { terms: vec![(1.0, name.into())], constant: 0.0 }
    }

    pub fn term(mut self, coefficient: f64, name: impl Into<String>) -> Self {
        self.terms.push((coefficient, name.into()));
        self
    }

    pub fn plus_constant(mut self, value: f64) -> Self {
        self.constant += value;
        self
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|(c, v)| (c * factor, v.clone())).collect(),
            constant: self.constant * factor,
        }
    }

    /// `self − other`, terms are concatenated and not merged.
    pub fn minus(&self, other: &LinearExpr) -> Self {
        let mut out = self.clone();
        out.terms.extend(other.terms.iter().map(|(c, v)| (-c, v.clone())));
        out.constant -= other.constant;
        out
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(|(_, v)| v.as_str())
    }

    /// Evaluates the expression with a caller-supplied lookup.
    pub fn eval_with<F>(&self, lookup: F) -> Result<f64, ProblemError>
    where
        F: Fn(&str) -> Option<f64>,
    {
        let mut total = self.constant;
        for (coefficient, name) in &self.terms {
            let value = lookup(name).ok_or_else(|| ProblemError::MissingVariable(name.clone()))?;
            total += coefficient * value;
        }
        Ok(total)
    }
}

impl fmt::Display for LinearExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (c, v) in &self.terms {
            if first {
                if *c == 1.0 {
                    write!(f, "{v}")?;
                } else if *c == -1.0 {
                    write!(f, "-{v}")?;
                } else {
                    write!(f, "{c} {v}")?;
                }
            } else if *c < 0.0 {
                if *c == -1.0 {
                    write!(f, " - {v}")?;
                } else {
                    write!(f, " - {} {v}", -c)?;
                }
            } else if *c == 1.0 {
                write!(f, " + {v}")?;
            } else {
                write!(f, " + {c} {v}")?;
            }
            first = false;
        }
        if first {
            write!(f, "{}", self.constant)
        } else if self.constant > 0.0 {
            write!(f, " + {}", self.constant)
        } else if self.constant < 0.0 {
            write!(f, " - {}", -self.constant)
        } else {
            Ok(())
        }
    }
}

/// Variable → value map used by [`eval_linear`] and [`check_constraints`].
pub type Assignment = HashMap<String, f64>;

/// `constant + Σ coefficient·value`.
pub fn eval_linear(expr: &LinearExpr, assignment: &Assignment) -> Result<f64, ProblemError> {
    expr.eval_with(|name| assignment.get(name).copied())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Cmp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Cmp::Le => "<=",
            Cmp::Ge => ">=",
            Cmp::Eq => "=",
        })
    }
}

/// A single linear relation `expr cmp bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRelation {
    pub expr: LinearExpr,
    pub cmp: Cmp,
    pub bound: f64,
}

impl LinearRelation {
    /// Signed slack: non-negative when satisfied (for `Eq`, minus the
    /// absolute residual).
    pub fn slack_with<F>(&self, lookup: F) -> Result<f64, ProblemError>
    where
        F: Fn(&str) -> Option<f64>,
    {
        let value = self.expr.eval_with(lookup)?;
        Ok(match self.cmp {
            Cmp::Le => self.bound - value,
            Cmp::Ge => value - self.bound,
            Cmp::Eq => -(value - self.bound).abs(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Constraint {
    Le { expr: LinearExpr, bound: f64 },
    Ge { expr: LinearExpr, bound: f64 },
    Eq { expr: LinearExpr, bound: f64 },
    /// `|expr| ≤ bound_expr`
    AbsLe { expr: LinearExpr, bound: LinearExpr },
}

impl Constraint {
    pub fn le(expr: LinearExpr, bound: f64) -> Self {
        Constraint::Le { expr, bound }
    }

    pub fn ge(expr: LinearExpr, bound: f64) -> Self {
        Constraint::Ge { expr, bound }
    }

    pub fn eq(expr: LinearExpr, bound: f64) -> Self {
        Constraint::Eq { expr, bound }
    }

    pub fn abs_le(expr: LinearExpr, bound: LinearExpr) -> Self {
        Constraint::AbsLe { expr, bound }
    }

    /// Rewrites the constraint as a conjunction of plain linear relations.
    /// `|e| ≤ b` becomes `e − b ≤ 0 ∧ −e − b ≤ 0`.
    pub fn to_linear(&self) -> Vec<LinearRelation> {
        match self {
            Constraint::Le { expr, bound } => {
                vec![LinearRelation { expr: expr.clone(), cmp: Cmp::Le, bound: *bound }]
            }
            Constraint::Ge { expr, bound } => {
                vec![LinearRelation { expr: expr.clone(), cmp: Cmp::Ge, bound: *bound }]
            }
            Constraint::Eq { expr, bound } => {
                vec![LinearRelation { expr: expr.clone(), cmp: Cmp::Eq, bound: *bound }]
            }
            Constraint::AbsLe { expr, bound } => vec![
                LinearRelation { expr: expr.minus(bound), cmp: Cmp::Le, bound: 0.0 },
                LinearRelation { expr: expr.scaled(-1.0).minus(bound), cmp: Cmp::Le, bound: 0.0 },
            ],
        }
    }

    pub fn variables(&self) -> Vec<&str> {
        match self {
            Constraint::Le { expr, .. } | Constraint::Ge { expr, .. } | Constraint::Eq { expr, .. } => {
                expr.variables().collect()
            }
            Constraint::AbsLe { expr, bound } => expr.variables().chain(bound.variables()).collect(),
        }
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Le { expr, bound } => write!(f, "{expr} <= {bound}"),
            Constraint::Ge { expr, bound } => write!(f, "{expr} >= {bound}"),
            Constraint::Eq { expr, bound } => write!(f, "{expr} = {bound}"),
            Constraint::AbsLe { expr, bound } => write!(f, "|{expr}| <= {bound}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Maximize,
    Minimize,
}

impl Sense {
    /// True when `candidate` is strictly better than `incumbent`.
    pub fn improves(self, candidate: f64, incumbent: f64) -> bool {
        match self {
            Sense::Maximize => candidate > incumbent,
            Sense::Minimize => candidate < incumbent,
        }
    }

    /// True when `value` is at least as good as `target`.
    pub fn meets(self, value: f64, target: f64) -> bool {
        match self {
            Sense::Maximize => value >= target,
            Sense::Minimize => value <= target,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BlackboxError {
    #[error("blackbox is undefined at this input: {0}")]
    Undefined(String),
    #[error("{0}")]
    Other(String),
}

/// An expensive function available only through input → output queries.
///
/// Implementations must tolerate concurrent calls; parallel workers evaluate
/// candidates simultaneously.
pub trait Blackbox: Send + Sync {
    fn input_arity(&self) -> usize;
    fn output_arity(&self) -> usize;
    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>, BlackboxError>;
}

/// Adapts a closure into a [`Blackbox`].
pub struct FnBlackbox<F> {
    inputs: usize,
    outputs: usize,
    f: F,
}

impl<F> FnBlackbox<F>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, BlackboxError> + Send + Sync,
{
    pub fn new(inputs: usize, outputs: usize, f: F) -> Self {
        Self { inputs, outputs, f }
    }
}

impl<F> Blackbox for FnBlackbox<F>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, BlackboxError> + Send + Sync,
{
    fn input_arity(&self) -> usize {
        self.inputs
    }

    fn output_arity(&self) -> usize {
        self.outputs
    }

    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>, BlackboxError> {
        (self.f)(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum EvalStatus {
    Ok { y: Vec<f64> },
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    #[serde(flatten)]
    pub status: EvalStatus,
    /// Wall time spent in the blackbox, in seconds.
    pub duration: f64,
}

impl EvalResult {
    pub fn ok(y: Vec<f64>, duration: f64) -> Self {
        Self { status: EvalStatus::Ok { y }, duration }
    }

    pub fn failed(reason: impl Into<String>, duration: f64) -> Self {
        Self { status: EvalStatus::Failed { reason: reason.into() }, duration }
    }

    pub fn y(&self) -> Option<&[f64]> {
        match &self.status {
            EvalStatus::Ok { y } => Some(y),
            EvalStatus::Failed { .. } => None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.y().is_some()
    }
}

/// An evaluated design point, or a recorded evaluation failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub result: EvalResult,
}

impl Sample {
    pub fn y(&self) -> Option<&[f64]> {
        self.result.y()
    }
}

/// A constraint that failed the feasibility check, with its signed slack.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub constraint: usize,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Defect {
    InvertedBounds(String),
    NonIntegralBounds(String),
    BadBinaryBounds(String),
    UnknownVariable(String),
    DuplicateVariable(String),
    InputArity { declared: usize, blackbox: usize },
    OutputArity { declared: usize, blackbox: usize },
    NonFiniteInputBounds(String),
    BadTolerance,
}

impl fmt::Display for Defect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Defect::InvertedBounds(v) => write!(f, "inverted bounds on {v}"),
            Defect::NonIntegralBounds(v) => write!(f, "non-integral bounds on integer variable {v}"),
            Defect::BadBinaryBounds(v) => write!(f, "binary variable {v} must have bounds [0, 1]"),
            Defect::UnknownVariable(v) => write!(f, "unknown variable {v}"),
            Defect::DuplicateVariable(v) => write!(f, "duplicate variable {v}"),
            Defect::InputArity { declared, blackbox } => {
                write!(f, "input arity mismatch: {declared} x-variables, blackbox takes {blackbox}")
            }
            Defect::OutputArity { declared, blackbox } => {
                write!(f, "output arity mismatch: {declared} y-variables, blackbox returns {blackbox}")
            }
            Defect::NonFiniteInputBounds(v) => write!(f, "x-variable {v} must have finite bounds"),
            Defect::BadTolerance => write!(f, "feasibility tolerance must be finite and non-negative"),
        }
    }
}

/// `optimize φ(x, y) such that F(x) = y ∧ P(x, y)`.
#[derive(Clone)]
pub struct Problem {
    pub x_vars: Vec<VariableSpec>,
    pub y_vars: Vec<VariableSpec>,
    pub objective: LinearExpr,
    pub sense: Sense,
    pub constraints: Vec<Constraint>,
    pub blackbox: Arc<dyn Blackbox>,
    pub feasibility_tolerance: f64,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("x_vars", &self.x_vars)
            .field("y_vars", &self.y_vars)
            .field("objective", &self.objective)
            .field("sense", &self.sense)
            .field("constraints", &self.constraints)
            .field("feasibility_tolerance", &self.feasibility_tolerance)
            .finish_non_exhaustive()
    }
}

impl Problem {
    pub fn new(
        x_vars: Vec<VariableSpec>,
        y_vars: Vec<VariableSpec>,
        objective: LinearExpr,
        sense: Sense,
        blackbox: Arc<dyn Blackbox>,
    ) -> Self {
        Self {
            x_vars,
            y_vars,
            objective,
            sense,
            constraints: Vec::new(),
            blackbox,
            feasibility_tolerance: DEFAULT_FEASIBILITY_TOLERANCE,
        }
    }

    pub fn with_constraint(mut self, constraint: Constraint) -> Self {
        self.constraints.push(constraint);
        self
    }

    pub fn assignment(&self, x: &[f64], y: &[f64]) -> Assignment {
        self.x_vars
            .iter()
            .zip(x)
            .chain(self.y_vars.iter().zip(y))
            .map(|(spec, &value)| (spec.name.clone(), value))
            .collect()
    }

    pub fn objective_value(&self, x: &[f64], y: &[f64]) -> Result<f64, ProblemError> {
        eval_linear(&self.objective, &self.assignment(x, y))
    }

    /// True when `x` respects the declared bounds and integrality.
    pub fn x_in_domain(&self, x: &[f64]) -> bool {
        x.len() == self.x_vars.len() && self.x_vars.iter().zip(x).all(|(s, &v)| s.contains(v))
    }

    /// Checks `P(x, y)` together with the declared y-variable ranges.
    pub fn is_feasible(&self, x: &[f64], y: &[f64]) -> Result<bool, ProblemError> {
        let tol = self.feasibility_tolerance;
        let y_ok = self
            .y_vars
            .iter()
            .zip(y)
            .all(|(s, &v)| v >= s.lower - tol && v <= s.upper + tol);
        Ok(y_ok && check_constraints(self, &self.assignment(x, y))?.0)
    }

    /// Checks the constraints of `P` that mention no output variable.
    pub fn satisfies_x_constraints(&self, x: &[f64]) -> bool {
        let assignment: Assignment = self.x_vars.iter().zip(x).map(|(s, &v)| (s.name.clone(), v)).collect();
        self.constraints
            .iter()
            .flat_map(|c| c.to_linear())
            .filter_map(|r| r.slack_with(|n| assignment.get(n).copied()).ok())
            .all(|slack| slack >= -self.feasibility_tolerance)
    }

    /// Clamps into the box and rounds discrete components to the nearest
    /// integer.
    pub fn snap_x(&self, x: &mut [f64]) {
        for (spec, v) in self.x_vars.iter().zip(x.iter_mut()) {
            if spec.kind.is_discrete() {
                *v = v.round();
            }
            *v = v.clamp(spec.lower, spec.upper);
        }
    }
}

/// Checks every constraint of `P` at `problem.feasibility_tolerance`.
pub fn check_constraints(
    problem: &Problem,
    assignment: &Assignment,
) -> Result<(bool, Vec<Violation>), ProblemError> {
    check_constraints_with_tolerance(problem, assignment, problem.feasibility_tolerance)
}

pub fn check_constraints_with_tolerance(
    problem: &Problem,
    assignment: &Assignment,
    tolerance: f64,
) -> Result<(bool, Vec<Violation>), ProblemError> {
    let mut violations = Vec::new();
    for (index, constraint) in problem.constraints.iter().enumerate() {
        for relation in constraint.to_linear() {
            let slack = relation.slack_with(|n| assignment.get(n).copied())?;
            if slack < -tolerance {
                violations.push(Violation { constraint: index, slack });
            }
        }
    }
    Ok((violations.is_empty(), violations))
}

/// Collects every structural defect instead of stopping at the first.
pub fn validate_problem(problem: &Problem) -> Result<(), Vec<Defect>> {
    let mut defects = Vec::new();
    let mut names = BTreeSet::new();
    for spec in problem.x_vars.iter().chain(&problem.y_vars) {
        if !names.insert(spec.name.as_str()) {
            defects.push(Defect::DuplicateVariable(spec.name.clone()));
        }
        if spec.lower > spec.upper || spec.lower.is_nan() || spec.upper.is_nan() {
            defects.push(Defect::InvertedBounds(spec.name.clone()));
        }
        match spec.kind {
            VarKind::Integer => {
                let integral = |v: f64| !v.is_finite() || v.fract() == 0.0;
                if !integral(spec.lower) || !integral(spec.upper) {
                    defects.push(Defect::NonIntegralBounds(spec.name.clone()));
                }
            }
            VarKind::Binary => {
                if spec.lower != 0.0 || spec.upper != 1.0 {
                    defects.push(Defect::BadBinaryBounds(spec.name.clone()));
                }
            }
            VarKind::Continuous => {}
        }
    }
    for spec in &problem.x_vars {
        if !spec.lower.is_finite() || !spec.upper.is_finite() {
            defects.push(Defect::NonFiniteInputBounds(spec.name.clone()));
        }
    }
    let mut unknown = BTreeSet::new();
    let referenced = problem
        .objective
        .variables()
        .chain(problem.constraints.iter().flat_map(|c| c.variables()));
    for name in referenced {
        if !names.contains(name) {
            unknown.insert(name.to_string());
        }
    }
    defects.extend(unknown.into_iter().map(Defect::UnknownVariable));
    if problem.blackbox.input_arity() != problem.x_vars.len() {
        defects.push(Defect::InputArity {
            declared: problem.x_vars.len(),
            blackbox: problem.blackbox.input_arity(),
        });
    }
    if problem.blackbox.output_arity() != problem.y_vars.len() {
        defects.push(Defect::OutputArity {
            declared: problem.y_vars.len(),
            blackbox: problem.blackbox.output_arity(),
        });
    }
    if !(problem.feasibility_tolerance >= 0.0 && problem.feasibility_tolerance.is_finite()) {
        defects.push(Defect::BadTolerance);
    }
    if defects.is_empty() {
        Ok(())
    } else {
        Err(defects)
    }
}
