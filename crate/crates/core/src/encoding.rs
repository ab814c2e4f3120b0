//! Big-M encoding of a trained ReLU network, composed with the problem's
//! objective and constraints.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::milp::{solve_lp, LinearConstraint, LpStatus, Milp, MilpExpr, MilpVar};
use crate::problem::{Cmp, LinearExpr, Problem, Sense};
use crate::surrogate::ReluNetwork;

pub const FALLBACK_BIG_M: f64 = 1e5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EncodingError {
    #[error("network expects {expected} {what}, problem declares {got}")]
    ArityMismatch { what: &'static str, expected: usize, got: usize },
    #[error("input variable {0} needs finite bounds")]
    UnboundedInput(String),
    #[error("big-M {m} is below the pre-activation bound {required} of {neuron}")]
    BigMTooSmall { neuron: String, m: f64, required: f64 },
    #[error("constraint or objective references unknown variable {0}")]
    UnknownVariable(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BigMMode {
    /// Per-neuron M from interval bounds.
    #[default]
    Interval,
    /// The same [`FALLBACK_BIG_M`] for every neuron.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    pub fn relu(self) -> Self {
        Self { lo: self.lo.max(0.0), hi: self.hi.max(0.0) }
    }

    pub fn contains(self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    /// Smallest M for which the big-M constraints stay valid.
    pub fn magnitude(self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }
}

/// Pre-activation enclosures for one layer, normalized units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronBounds {
    pub pre_activation: Vec<Interval>,
}

/// Interval propagation through the network; `input_box` is in raw units.
/// One entry per layer, the output layer last.
pub fn compute_bounds(network: &ReluNetwork, input_box: &[(f64, f64)]) -> Vec<NeuronBounds> {
    let scaler = &network.input_scaler;
    let mut current: Vec<Interval> = input_box
        .iter()
        .enumerate()
        .map(|(i, &(lo, hi))| {
            Interval::new((lo - scaler.shift[i]) / scaler.scale[i], (hi - scaler.shift[i]) / scaler.scale[i])
        })
        .collect();
    let last = network.layers.len() - 1;
    let mut out = Vec::with_capacity(network.layers.len());
    for (index, layer) in network.layers.iter().enumerate() {
        let pre: Vec<Interval> =
            (0..layer.outputs).map(|k| propagate(layer.row(k), layer.biases[k], &current)).collect();
        current = if index < last { pre.iter().map(|iv| iv.relu()).collect() } else { pre.clone() };
        out.push(NeuronBounds { pre_activation: pre });
    }
    out
}

fn propagate(weights: &[f64], bias: f64, inputs: &[Interval]) -> Interval {
    let mut lo = bias;
    let mut hi = bias;
    for (w, iv) in weights.iter().zip(inputs) {
        if *w >= 0.0 {
            lo += w * iv.lo;
            hi += w * iv.hi;
        } else {
            lo += w * iv.hi;
            hi += w * iv.lo;
        }
    }
    Interval::new(lo, hi)
}

/// True when the variable bounds alone already guarantee `row`.
fn implied_by_bounds(milp: &Milp, row: &LinearConstraint) -> bool {
    let (mut lo, mut hi) = (0.0, 0.0);
    for &(j, c) in &row.terms {
        let v = &milp.vars[j];
        let (a, b) = (c * v.lower, c * v.upper);
        lo += a.min(b);
        hi += a.max(b);
    }
    match row.cmp {
        Cmp::Le => hi <= row.rhs,
        Cmp::Ge => lo >= row.rhs,
        Cmp::Eq => lo == row.rhs && hi == row.rhs,
    }
}

/// Range of `expr` over the LP relaxation of `milp`, padded against solver
/// tolerance.
fn lp_range(milp: &Milp, expr: &MilpExpr) -> Option<Interval> {
    let mut relaxed = milp.relaxed();
    relaxed.objective = expr.clone();
    relaxed.sense = Sense::Maximize;
    let hi = solve_lp(&relaxed);
    relaxed.sense = Sense::Minimize;
    let lo = solve_lp(&relaxed);
    if hi.status != LpStatus::Optimal || lo.status != LpStatus::Optimal || hi.numerically_unstable || lo.numerically_unstable {
        return None;
    }
    let pad = |v: f64| 1e-6 * (1.0 + v.abs());
    Some(Interval::new(lo.objective - pad(lo.objective), hi.objective + pad(hi.objective)))
}

/// The four big-M rows for `out = max(pre, 0)`:
/// `out ≥ 0`, `out ≥ pre`, `out ≤ pre + M·d`, `out ≤ M·(1 − d)`.
pub fn relu_to_milp(
    name: &str,
    pre: &MilpExpr,
    out: usize,
    indicator: usize,
    big_m: f64,
    bounds: Interval,
) -> Result<[LinearConstraint; 4], EncodingError> {
    let required = bounds.magnitude();
    if !(big_m >= required) {
        return Err(EncodingError::BigMTooSmall { neuron: name.to_string(), m: big_m, required });
    }
    let out_minus_pre = {
        let mut terms = vec![(out, 1.0)];
        terms.extend(pre.terms.iter().map(|&(j, c)| (j, -c)));
        MilpExpr::new(terms, -pre.constant)
    };
    let mut upper_active = out_minus_pre.clone();
    upper_active.terms.push((indicator, -big_m));
    Ok([
        LinearConstraint::new(format!("{name}.nonneg"), vec![(out, 1.0)], Cmp::Ge, 0.0),
        LinearConstraint::from_expr(format!("{name}.above_pre"), &out_minus_pre, Cmp::Ge, 0.0),
        LinearConstraint::from_expr(format!("{name}.active"), &upper_active, Cmp::Le, 0.0),
        LinearConstraint::new(format!("{name}.inactive"), vec![(out, 1.0), (indicator, big_m)], Cmp::Le, big_m),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncodingOptions {
    pub big_m: BigMMode,
    /// Tightens the interval bounds of deeper layers with LP relaxations.
    pub lp_tightening: bool,
    /// Adds `objective ≥ bound` (maximize) or `objective ≤ bound` (minimize).
    pub objective_bound: Option<f64>,
}

impl Default for EncodingOptions {
    fn default() -> Self {
        Self { big_m: BigMMode::Interval, lp_tightening: true, objective_bound: None }
    }
}

fn map_expr(expr: &LinearExpr, handles: &BTreeMap<String, usize>) -> Result<MilpExpr, EncodingError> {
    let mut terms = Vec::with_capacity(expr.terms.len());
    for (c, name) in &expr.terms {
        let j = *handles.get(name).ok_or_else(|| EncodingError::UnknownVariable(name.clone()))?;
        terms.push((j, *c));
    }
    Ok(MilpExpr::new(terms, expr.constant))
}

/// Builds `opt φ(x, y) s.t. y = network(x), P(x, y)` as a MILP in raw
/// problem units.
pub fn nn_to_milp(network: &ReluNetwork, problem: &Problem, options: &EncodingOptions) -> Result<Milp, EncodingError> {
    if network.input_arity() != problem.x_vars.len() {
        return Err(EncodingError::ArityMismatch {
            what: "inputs",
            expected: network.input_arity(),
            got: problem.x_vars.len(),
        });
    }
    if network.output_arity() != problem.y_vars.len() {
        return Err(EncodingError::ArityMismatch {
            what: "outputs",
            expected: network.output_arity(),
            got: problem.y_vars.len(),
        });
    }
    let mut input_box = Vec::with_capacity(problem.x_vars.len());
    for v in &problem.x_vars {
        if !v.lower.is_finite() || !v.upper.is_finite() {
            return Err(EncodingError::UnboundedInput(v.name.clone()));
        }
        input_box.push((v.lower, v.upper));
    }

    let mut milp = Milp::new(problem.sense);
    for v in &problem.x_vars {
        let j = milp.add_var(MilpVar { name: v.name.clone(), kind: v.kind, lower: v.lower, upper: v.upper });
        milp.handles.insert(v.name.clone(), j);
    }

    // normalized inputs: x − scale·xn = shift
    let scaler = &network.input_scaler;
    let mut previous: Vec<usize> = Vec::with_capacity(problem.x_vars.len());
    for (i, v) in problem.x_vars.iter().enumerate() {
        let (lo, hi) = input_box[i];
        let xn = milp.add_var(MilpVar::continuous(
            format!("nn.xn[{i}]"),
            (lo - scaler.shift[i]) / scaler.scale[i],
            (hi - scaler.shift[i]) / scaler.scale[i],
        ));
        milp.add_constraint(LinearConstraint::new(
            format!("nn.scale_in[{i}]"),
            vec![(milp.handles[&v.name], 1.0), (xn, -scaler.scale[i])],
            Cmp::Eq,
            scaler.shift[i],
        ));
        previous.push(xn);
    }

    let mut post: Vec<Interval> = Vec::new();
    let mut first_layer_inputs: Vec<Interval> = (0..previous.len())
        .map(|i| {
            let v = &milp.vars[previous[i]];
            Interval::new(v.lower, v.upper)
        })
        .collect();
    for (l, layer) in network.hidden_layers().iter().enumerate() {
        let inputs = if l == 0 { std::mem::take(&mut first_layer_inputs) } else { std::mem::take(&mut post) };
        let mut outputs = Vec::with_capacity(layer.outputs);
        let mut layer_post = Vec::with_capacity(layer.outputs);
        for k in 0..layer.outputs {
            let pre = MilpExpr::new(
                layer.row(k).iter().copied().enumerate().map(|(i, w)| (previous[i], w)).collect(),
                layer.biases[k],
            );
            let mut iv = propagate(layer.row(k), layer.biases[k], &inputs);
            if options.big_m == BigMMode::Interval && options.lp_tightening && l > 0 {
                if let Some(range) = lp_range(&milp, &pre) {
                    iv = Interval::new(iv.lo.max(range.lo), iv.hi.min(range.hi).max(iv.lo.max(range.lo)));
                }
            }
            let big_m = match options.big_m {
                BigMMode::Interval if iv.magnitude().is_finite() => iv.magnitude(),
                _ => FALLBACK_BIG_M,
            };
            let name = format!("nn.h[{l}][{k}]");
            let (h_hi, d_range) = match options.big_m {
                BigMMode::Interval => (iv.relu().hi, (iv.hi <= 0.0, iv.lo >= 0.0)),
                BigMMode::Fixed => (big_m, (false, false)),
            };
            let h = milp.add_var(MilpVar::continuous(name.clone(), 0.0, h_hi));
            let mut d = MilpVar::binary(format!("nn.d[{l}][{k}]"));
            // stable neurons keep their indicator, fixed to the only consistent value
            match d_range {
                (true, _) => d.lower = 1.0,
                (_, true) => d.upper = 0.0,
                _ => {}
            }
            let d = milp.add_var(d);
            for row in relu_to_milp(&name, &pre, h, d, big_m, iv)? {
                if !implied_by_bounds(&milp, &row) {
                    milp.add_constraint(row);
                }
            }
            outputs.push(h);
            layer_post.push(iv.relu());
        }
        previous = outputs;
        post = layer_post;
    }
    let out_bounds: Vec<Interval> = {
        let layer = network.output_layer();
        (0..layer.outputs).map(|k| propagate(layer.row(k), layer.biases[k], &post)).collect()
    };

    // y = out_scale·(W·h + b) + out_shift
    let out_layer = network.output_layer();
    let oscaler = &network.output_scaler;
    for (k, v) in problem.y_vars.iter().enumerate() {
        let s = oscaler.scale[k];
        let raw = Interval::new(out_bounds[k].lo * s + oscaler.shift[k], out_bounds[k].hi * s + oscaler.shift[k]);
        let y = milp.add_var(MilpVar::continuous(v.name.clone(), raw.lo.max(v.lower), raw.hi.min(v.upper)));
        milp.handles.insert(v.name.clone(), y);
        let mut terms = vec![(y, 1.0)];
        terms.extend(out_layer.row(k).iter().enumerate().map(|(i, &w)| (previous[i], -s * w)));
        milp.add_constraint(LinearConstraint::new(
            format!("nn.scale_out[{k}]"),
            terms,
            Cmp::Eq,
            s * out_layer.biases[k] + oscaler.shift[k],
        ));
    }

    for (i, c) in problem.constraints.iter().enumerate() {
        for (r, rel) in c.to_linear().iter().enumerate() {
            let expr = map_expr(&rel.expr, &milp.handles)?;
            milp.add_constraint(LinearConstraint::from_expr(format!("p[{i}][{r}]"), &expr, rel.cmp, rel.bound));
        }
    }

    milp.objective = map_expr(&problem.objective, &milp.handles)?.compacted();
    if let Some(bound) = options.objective_bound {
        let cmp = match problem.sense {
            Sense::Maximize => Cmp::Ge,
            Sense::Minimize => Cmp::Le,
        };
        milp.add_constraint(LinearConstraint::from_expr("objective_bound", &milp.objective.clone(), cmp, bound));
    }
    Ok(milp)
}

/// Reads the problem's `x` and `y` values out of a MILP solution.
pub fn extract_xy(milp: &Milp, problem: &Problem, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let pick = |name: &str| values[milp.handles[name]];
    (
        problem.x_vars.iter().map(|v| pick(&v.name)).collect(),
        problem.y_vars.iter().map(|v| pick(&v.name)).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{solve_lp, solve_milp, LpStatus, MilpStatus, DEFAULT_TIME_LIMIT};
    use crate::problem::{FnBlackbox, VariableSpec};
    use crate::surrogate::{AffineScaler, Layer};
    use std::sync::Arc;

    fn single(w: f64, b: f64) -> ReluNetwork {
        ReluNetwork::new(
            vec![Layer::new(1, 1, vec![w], vec![b]), Layer::new(1, 1, vec![1.0], vec![0.0])],
            AffineScaler::identity(1),
            AffineScaler::identity(1),
        )
        .unwrap()
    }

    fn unit_network() -> ReluNetwork {
        ReluNetwork::new(
            vec![Layer::new(2, 2, vec![1.0; 4], vec![0.0; 2]), Layer::new(2, 1, vec![1.0; 2], vec![0.0])],
            AffineScaler::identity(2),
            AffineScaler::identity(1),
        )
        .unwrap()
    }

    fn unit_problem() -> Problem {
        Problem::new(
            vec![VariableSpec::continuous("x1", 0.0, 1.0), VariableSpec::continuous("x2", 0.0, 1.0)],
            vec![VariableSpec::output("y1")],
            LinearExpr::var("y1"),
            Sense::Maximize,
            Arc::new(FnBlackbox::new(2, 1, |x: &[f64]| Ok(vec![x[0] + x[1]]))),
        )
    }

    #[test]
    fn identity_neuron_bounds() {
        let b = compute_bounds(&single(1.0, 0.0), &[(-2.0, 3.0)]);
        assert_eq!(b[0].pre_activation[0], Interval::new(-2.0, 3.0));
        assert_eq!(b[0].pre_activation[0].relu(), Interval::new(0.0, 3.0));
    }

    #[test]
    fn negative_weight_bounds() {
        let b = compute_bounds(&single(-1.0, 1.0), &[(0.0, 4.0)]);
        assert_eq!(b[0].pre_activation[0], Interval::new(-3.0, 1.0));
    }

    #[test]
    fn unit_network_hidden_bounds() {
        let b = compute_bounds(&unit_network(), &[(0.0, 1.0), (0.0, 1.0)]);
        assert_eq!(b[0].pre_activation[0], Interval::new(0.0, 2.0));
        assert_eq!(b[1].pre_activation[0], Interval::new(0.0, 4.0));
    }

    /// One-neuron MILP with `pre` pinned to `value` and `d` optionally fixed.
    fn relu_lp(value: f64, d_fixed: Option<f64>) -> Milp {
        let mut m = Milp::new(Sense::Maximize);
        let p = m.add_var(MilpVar::continuous("p", value, value));
        let out = m.add_var(MilpVar::continuous("out", -10.0, 10.0));
        let mut dv = MilpVar::binary("d");
        if let Some(d) = d_fixed {
            dv.lower = d;
            dv.upper = d;
        }
        let d = m.add_var(dv);
        for row in relu_to_milp("n", &MilpExpr::var(p), out, d, 5.0, Interval::new(-4.0, 4.0)).unwrap() {
            m.add_constraint(row);
        }
        m
    }

    fn out_range(value: f64, d: f64) -> Option<(f64, f64)> {
        let mut m = relu_lp(value, Some(d));
        let hi = solve_lp(&m);
        m.sense = Sense::Minimize;
        let lo = solve_lp(&m);
        (hi.status == LpStatus::Optimal).then(|| (lo.values[1], hi.values[1]))
    }

    #[test]
    fn positive_pre_activation_forces_active_branch() {
        assert_eq!(out_range(1.0, 0.0), Some((1.0, 1.0)));
        assert_eq!(out_range(1.0, 1.0), None);
    }

    #[test]
    fn negative_pre_activation_forces_inactive_branch() {
        assert_eq!(out_range(-2.0, 1.0), Some((0.0, 0.0)));
        assert_eq!(out_range(-2.0, 0.0), None);
    }

    #[test]
    fn zero_pre_activation_admits_both_indicators() {
        assert_eq!(out_range(0.0, 0.0), Some((0.0, 0.0)));
        assert_eq!(out_range(0.0, 1.0), Some((0.0, 0.0)));
    }

    #[test]
    fn big_m_too_small_is_rejected() {
        let err = relu_to_milp("n", &MilpExpr::var(0), 1, 2, 3.0, Interval::new(-4.0, 1.0)).unwrap_err();
        assert!(matches!(err, EncodingError::BigMTooSmall { required, .. } if required == 4.0));
    }

    #[test]
    fn unit_network_optimum_matches_grid() {
        let net = unit_network();
        let problem = unit_problem();
        let milp = nn_to_milp(&net, &problem, &EncodingOptions::default()).unwrap();
        assert_eq!(milp.binary_count(), 2);
        let sol = solve_milp(&milp, DEFAULT_TIME_LIMIT, 1e-9);
        assert_eq!(sol.status, MilpStatus::Optimal);
        let grid_best = (0..=20)
            .flat_map(|i| (0..=20).map(move |k| [i as f64 / 20.0, k as f64 / 20.0]))
            .map(|x| net.forward(&x).unwrap()[0])
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(grid_best, 4.0);
        assert!((sol.objective - grid_best).abs() < 1e-9);
        let (x, y) = extract_xy(&milp, &problem, &sol.values);
        assert!((x[0] - 1.0).abs() < 1e-9 && (x[1] - 1.0).abs() < 1e-9);
        assert!((y[0] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn unit_network_reaches_six_on_wider_box() {
        let net = unit_network();
        let mut problem = unit_problem();
        problem.x_vars[1].upper = 2.0;
        let milp = nn_to_milp(&net, &problem, &EncodingOptions::default()).unwrap();
        let sol = solve_milp(&milp, DEFAULT_TIME_LIMIT, 1e-9);
        assert!((sol.objective - 6.0).abs() < 1e-9);
        let (x, _) = extract_xy(&milp, &problem, &sol.values);
        assert!((x[0] - 1.0).abs() < 1e-9 && (x[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_unbounded_inputs_and_arity() {
        let net = unit_network();
        let mut problem = unit_problem();
        problem.x_vars[1].upper = f64::INFINITY;
        assert_eq!(
            nn_to_milp(&net, &problem, &EncodingOptions::default()).unwrap_err(),
            EncodingError::UnboundedInput("x2".into())
        );
        problem.x_vars.pop();
        assert!(matches!(
            nn_to_milp(&net, &problem, &EncodingOptions::default()).unwrap_err(),
            EncodingError::ArityMismatch { what: "inputs", .. }
        ));
    }
}
