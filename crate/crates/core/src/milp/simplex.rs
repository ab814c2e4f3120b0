//! Bounded-variable primal simplex on a dense tableau.
//!
//! Rows are `Σ a_ij x_j + s_i = b_i` with one logical (slack) column per row;
//! the row type lives in the slack bounds (`≤`: s ≥ 0, `≥`: s ≤ 0, `=`: s = 0).
//! Rows whose slack cannot absorb the initial residual get an artificial
//! column, driven to zero by a phase-1 objective. Pricing is Dantzig's rule,
//! falling back to Bland's smallest-index rule after a run of degenerate
//! pivots; Bland's rule is kept until the objective moves again, which rules
//! out cycling.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::model::Milp;
use crate::problem::{Cmp, Sense};

pub const PRIMAL_TOLERANCE: f64 = 1e-7;
const DUAL_TOLERANCE: f64 = 1e-9;
const PIVOT_TOLERANCE: f64 = 1e-9;
const DEGENERATE_STREAK: usize = 30;
const REFACTOR_EVERY: usize = 400;
const DUAL_PHASE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// One value per MILP variable; empty unless optimal.
    pub values: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Set when the solve needed the perturbed retry, or gave up.
    pub numerically_unstable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pricing {
    /// Dantzig's largest reduced cost with a Bland fallback on degeneracy.
    #[default]
    DantzigBland,
    /// Bland's smallest-index rule throughout.
    Bland,
}

/// Solves the continuous relaxation of `milp`.
pub fn solve_lp(milp: &Milp) -> LpSolution {
    let lower: Vec<f64> = milp.vars.iter().map(|v| v.lower).collect();
    let upper: Vec<f64> = milp.vars.iter().map(|v| v.upper).collect();
    solve_relaxation(milp, &lower, &upper, Pricing::default())
}

/// Solves the relaxation of `milp` with the variable bounds replaced by
/// `lower`/`upper`.
pub fn solve_relaxation(milp: &Milp, lower: &[f64], upper: &[f64], pricing: Pricing) -> LpSolution {
    solve_cold(milp, lower, upper, pricing).0
}

/// Optimal simplex state kept for re-solving after bound changes.
#[derive(Clone)]
pub(crate) struct WarmStart<'a>(Simplex<'a>);

impl<'a> WarmStart<'a> {
    /// Approximate heap footprint in bytes.
    pub(crate) fn footprint(&self) -> usize {
        8 * (self.0.tab.len() + 4 * self.0.cols + 2 * self.0.m)
    }

    /// Re-solves after changing the bounds of the listed variables, starting
    /// from the stored optimal basis.
    pub(crate) fn resolve(mut self, changes: &[(usize, f64, f64)]) -> (LpSolution, Option<WarmStart<'a>>) {
        let simplex = &mut self.0;
        simplex.iterations = 0;
        if changes.iter().any(|&(_, lo, hi)| lo > hi) {
            return (infeasible(0, false), None);
        }
        for &(j, lo, hi) in changes {
            simplex.set_bounds(j, lo, hi);
        }
        match simplex.dual_phase() {
            DualPhase::Infeasible => return (infeasible(simplex.iterations, false), None),
            DualPhase::Stalled => return self.cold(),
            DualPhase::Feasible => {}
        }
        match simplex.finish() {
            Outcome::Solved(sol) if sol.status == LpStatus::Optimal => (sol, Some(self)),
            Outcome::Solved(sol) => (sol, None),
            Outcome::Unstable(_) => self.cold(),
        }
    }

    fn cold(self) -> (LpSolution, Option<WarmStart<'a>>) {
        let s = self.0;
        let n = s.n;
        solve_cold(s.milp, &s.lb[..n], &s.ub[..n], s.pricing)
    }
}

/// Cold solve that also hands back the optimal state, when there is one.
pub(crate) fn solve_cold<'a>(
    milp: &'a Milp,
    lower: &[f64],
    upper: &[f64],
    pricing: Pricing,
) -> (LpSolution, Option<WarmStart<'a>>) {
    if lower.iter().zip(upper).any(|(l, u)| l > u) {
        return (infeasible(0, false), None);
    }
    let (first, state) = Simplex::build(milp, lower, upper, pricing).run();
    match first {
        Outcome::Solved(sol) => (sol, state.map(WarmStart)),
        Outcome::Unstable(iterations) => {
            log::debug!("simplex unstable after {iterations} iterations, retrying with perturbed bounds");
            let (pl, pu) = perturb(lower, upper);
            let sol = match Simplex::build(milp, &pl, &pu, Pricing::Bland).run().0 {
                Outcome::Solved(mut sol) => {
                    sol.numerically_unstable = true;
                    if sol.status == LpStatus::Optimal {
                        // snap back into the caller's bounds
                        for (j, v) in sol.values.iter_mut().enumerate() {
                            *v = v.clamp(lower[j], upper[j]);
                        }
                        sol.objective = milp.objective_value(&sol.values);
                    }
                    sol
                }
                Outcome::Unstable(more) => infeasible(iterations + more, true),
            };
            (sol, None)
        }
    }
}

fn infeasible(iterations: usize, unstable: bool) -> LpSolution {
    LpSolution {
        status: LpStatus::Infeasible,
        values: Vec::new(),
        objective: f64::NAN,
        iterations,
        numerically_unstable: unstable,
    }
}

fn perturb(lower: &[f64], upper: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut pl = lower.to_vec();
    let mut pu = upper.to_vec();
    for j in 0..pl.len() {
        let eps = 1e-9 * (1.0 + (j % 7) as f64);
        if pl[j].is_finite() {
            pl[j] -= eps * (1.0 + pl[j].abs());
        }
        if pu[j].is_finite() {
            pu[j] += eps * (1.0 + pu[j].abs());
        }
    }
    (pl, pu)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    AtLower,
    AtUpper,
    /// Free nonbasic column held at zero.
    Zero,
}

enum Outcome {
    Solved(LpSolution),
    Unstable(usize),
}

enum Phase {
    Optimal,
    Unbounded,
    Stalled,
}

enum DualPhase {
    Feasible,
    Infeasible,
    Stalled,
}

#[derive(Clone)]
struct Simplex<'a> {
    milp: &'a Milp,
    n: usize,
    m: usize,
    cols: usize,
    /// Original `[A | I | art]`, row-major, used for refactoring.
    orig: Arc<Vec<f64>>,
    b: Arc<Vec<f64>>,
    /// Current `B⁻¹ [A | I | art]`.
    tab: Vec<f64>,
    xb: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<State>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    cost: Vec<f64>,
    dj: Vec<f64>,
    artificials: Vec<usize>,
    pricing: Pricing,
    iterations: usize,
    since_refactor: usize,
    bland: bool,
    degenerate_run: usize,
    scratch: Vec<usize>,
}

impl<'a> Simplex<'a> {
    fn build(milp: &'a Milp, lower: &[f64], upper: &[f64], pricing: Pricing) -> Self {
        let n = milp.vars.len();
        let m = milp.constraints.len();

        let mut lb: Vec<f64> = lower.to_vec();
        let mut ub: Vec<f64> = upper.to_vec();
        let mut state = Vec::with_capacity(n + 2 * m);
        let mut xn = vec![0.0; n];
        for j in 0..n {
            let (s, v) = if lb[j].is_finite() {
                (State::AtLower, lb[j])
            } else if ub[j].is_finite() {
                (State::AtUpper, ub[j])
            } else {
                (State::Zero, 0.0)
            };
            state.push(s);
            xn[j] = v;
        }

        let b: Vec<f64> = milp.constraints.iter().map(|c| c.rhs).collect();
        let mut residual = b.clone();
        let mut dense = vec![0.0; m * n];
        for (i, c) in milp.constraints.iter().enumerate() {
            for &(j, a) in &c.terms {
                dense[i * n + j] += a;
                residual[i] -= a * xn[j];
            }
        }

        // slack columns
        for c in &milp.constraints {
            let (l, u) = match c.cmp {
                Cmp::Le => (0.0, f64::INFINITY),
                Cmp::Ge => (f64::NEG_INFINITY, 0.0),
                Cmp::Eq => (0.0, 0.0),
            };
            lb.push(l);
            ub.push(u);
        }

        let mut basis = vec![0; m];
        let mut xb = vec![0.0; m];
        let mut art_rows: Vec<(usize, f64)> = Vec::new();
        for i in 0..m {
            let s = n + i;
            let r = residual[i];
            if r >= lb[s] && r <= ub[s] {
                basis[i] = s;
                xb[i] = r;
                state.push(State::Basic);
            } else {
                // slack sits at the bound nearest the residual
                let (st, val) = if r < lb[s] { (State::AtLower, lb[s]) } else { (State::AtUpper, ub[s]) };
                state.push(st);
                let rem = r - val;
                art_rows.push((i, rem.signum()));
                xb[i] = rem.abs();
            }
        }

        let cols = n + m + art_rows.len();
        let mut artificials = Vec::with_capacity(art_rows.len());
        let mut orig = vec![0.0; m * cols];
        for i in 0..m {
            orig[i * cols..i * cols + n].copy_from_slice(&dense[i * n..(i + 1) * n]);
            orig[i * cols + n + i] = 1.0;
        }
        for (k, &(i, sign)) in art_rows.iter().enumerate() {
            let col = n + m + k;
            orig[i * cols + col] = sign;
            basis[i] = col;
            artificials.push(col);
            lb.push(0.0);
            ub.push(f64::INFINITY);
            state.push(State::Basic);
        }

        // B is diagonal ±1, so B⁻¹ row i is row i times the diagonal sign
        let mut tab = orig.clone();
        for &(i, sign) in &art_rows {
            if sign < 0.0 {
                tab[i * cols..(i + 1) * cols].iter_mut().for_each(|v| *v = -*v);
            }
        }

        let mut cost = vec![0.0; cols];
        for &a in &artificials {
            cost[a] = 1.0;
        }

        let mut simplex = Simplex {
            milp,
            n,
            m,
            cols,
            orig: Arc::new(orig),
            b: Arc::new(b),
            tab,
            xb,
            basis,
            state,
            lb,
            ub,
            cost,
            dj: vec![0.0; cols],
            artificials,
            pricing,
            iterations: 0,
            since_refactor: 0,
            bland: pricing == Pricing::Bland,
            degenerate_run: 0,
            scratch: Vec::with_capacity(cols),
        };
        simplex.compute_reduced_costs();
        simplex
    }

    fn value_of_nonbasic(&self, j: usize) -> f64 {
        match self.state[j] {
            State::AtLower => self.lb[j],
            State::AtUpper => self.ub[j],
            State::Zero | State::Basic => 0.0,
        }
    }

    fn compute_reduced_costs(&mut self) {
        self.dj.copy_from_slice(&self.cost);
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.tab[i * self.cols..(i + 1) * self.cols];
            for (d, t) in self.dj.iter_mut().zip(row) {
                *d -= cb * t;
            }
        }
        for i in 0..self.m {
            self.dj[self.basis[i]] = 0.0;
        }
    }

    fn iteration_limit(&self) -> usize {
        20_000 + 50 * (self.m + self.cols)
    }

    fn scale(&self) -> f64 {
        1.0 + self.b.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// Cold solve. The final state comes back when the LP is optimal, for
    /// warm-starting related solves.
    fn run(mut self) -> (Outcome, Option<Self>) {
        if !self.artificials.is_empty() {
            match self.phase() {
                Phase::Stalled | Phase::Unbounded => return (Outcome::Unstable(self.iterations), None),
                Phase::Optimal => {}
            }
            let infeasibility: f64 = self
                .basis
                .iter()
                .zip(&self.xb)
                .filter(|(j, _)| **j >= self.n + self.m)
                .map(|(_, v)| v.abs())
                .sum();
            if infeasibility > PRIMAL_TOLERANCE * self.scale() {
                return (Outcome::Solved(infeasible(self.iterations, false)), None);
            }
            for &a in &self.artificials {
                self.ub[a] = 0.0;
                if self.state[a] != State::Basic {
                    self.state[a] = State::AtLower;
                }
            }
        }

        let sign = match self.milp.sense {
            Sense::Maximize => -1.0,
            Sense::Minimize => 1.0,
        };
        self.cost.iter_mut().for_each(|c| *c = 0.0);
        for &(j, c) in &self.milp.objective.terms {
            self.cost[j] += sign * c;
        }
        self.compute_reduced_costs();
        self.bland = self.pricing == Pricing::Bland;
        self.degenerate_run = 0;
        let outcome = self.finish();
        let keep = matches!(&outcome, Outcome::Solved(sol) if sol.status == LpStatus::Optimal);
        (outcome, keep.then_some(self))
    }

    /// Phase 2 from a basis that is primal feasible, with an accuracy check
    /// (and one refactor-and-retry) at the end.
    fn finish(&mut self) -> Outcome {
        let scale = self.scale();
        for attempt in 0..2 {
            match self.phase() {
                Phase::Stalled => return Outcome::Unstable(self.iterations),
                Phase::Unbounded => {
                    return Outcome::Solved(LpSolution {
                        status: LpStatus::Unbounded,
                        values: Vec::new(),
                        objective: f64::NAN,
                        iterations: self.iterations,
                        numerically_unstable: false,
                    })
                }
                Phase::Optimal => {}
            }
            // accept the running tableau when it is accurate, refactor otherwise
            let accurate = attempt == 0 && {
                let values = self.structural_values();
                self.milp_violation(&values) <= PRIMAL_TOLERANCE
                    && self.basic_bound_violation() <= PRIMAL_TOLERANCE * scale
            };
            if !accurate && !self.refactor() {
                return Outcome::Unstable(self.iterations);
            }
            let values = self.structural_values();
            if self.milp_violation(&values) <= 1e-6 && self.basic_bound_violation() <= 1e-6 * scale {
                if attempt == 0 && !accurate && !self.reduced_costs_optimal() {
                    // refactoring changed the prices; keep pivoting
                    continue;
                }
                let objective = self.milp.objective_value(&values);
                return Outcome::Solved(LpSolution {
                    status: LpStatus::Optimal,
                    values,
                    objective,
                    iterations: self.iterations,
                    numerically_unstable: false,
                });
            }
            if attempt == 1 {
                break;
            }
        }
        Outcome::Unstable(self.iterations)
    }

    /// Moves nonbasic `j` to new bounds, keeping the basic values consistent.
    fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        let old = self.value_of_nonbasic(j);
        self.lb[j] = lo;
        self.ub[j] = hi;
        if self.state[j] == State::Basic {
            return;
        }
        self.state[j] = if lo.is_finite() && (self.dj[j] >= 0.0 || !hi.is_finite()) {
            State::AtLower
        } else if hi.is_finite() {
            State::AtUpper
        } else {
            State::Zero
        };
        let delta = self.value_of_nonbasic(j) - old;
        if delta != 0.0 {
            for i in 0..self.m {
                let a = self.tab[i * self.cols + j];
                if a != 0.0 {
                    self.xb[i] -= a * delta;
                }
            }
        }
    }

    /// Bounded dual simplex: restores primal feasibility while keeping the
    /// reduced costs dual feasible.
    fn dual_phase(&mut self) -> DualPhase {
        let limit = self.iteration_limit();
        let cols = self.cols;
        loop {
            if self.iterations >= limit {
                return DualPhase::Stalled;
            }
            let mut leave: Option<usize> = None;
            let mut worst = 0.0;
            for i in 0..self.m {
                let p = self.basis[i];
                let v = self.xb[i];
                let viol = if v < self.lb[p] {
                    (self.lb[p] - v) / (1.0 + self.lb[p].abs())
                } else if v > self.ub[p] {
                    (v - self.ub[p]) / (1.0 + self.ub[p].abs())
                } else {
                    0.0
                };
                if viol > DUAL_PHASE_TOLERANCE && viol > worst {
                    worst = viol;
                    leave = Some(i);
                }
            }
            let Some(r) = leave else { return DualPhase::Feasible };
            self.iterations += 1;

            let p = self.basis[r];
            let increase = self.xb[r] < self.lb[p];
            let target = if increase { self.lb[p] } else { self.ub[p] };
            let row = &self.tab[r * cols..(r + 1) * cols];
            let mut best: Option<(usize, f64, f64)> = None;
            for j in 0..cols {
                let st = self.state[j];
                if st == State::Basic || self.lb[j] == self.ub[j] {
                    continue;
                }
                let a = row[j];
                if a.abs() < PIVOT_TOLERANCE {
                    continue;
                }
                // x_p moves by −a·Δx_j
                let dir = if increase { -a.signum() } else { a.signum() };
                let eligible = match st {
                    State::AtLower => dir > 0.0,
                    State::AtUpper => dir < 0.0,
                    State::Zero => true,
                    State::Basic => false,
                };
                if !eligible {
                    continue;
                }
                let ratio = self.dj[j].abs() / a.abs();
                let better = match best {
                    None => true,
                    Some((_, br, ba)) => ratio < br - 1e-12 || (ratio <= br + 1e-12 && a.abs() > ba),
                };
                if better {
                    best = Some((j, ratio, a.abs()));
                }
            }
            let Some((q, _, _)) = best else { return DualPhase::Infeasible };

            let alpha = self.tab[r * cols + q];
            let delta = (target - self.xb[r]) / -alpha;
            for i in 0..self.m {
                let a = self.tab[i * cols + q];
                if a != 0.0 {
                    self.xb[i] -= a * delta;
                }
            }
            let entering_value = self.value_of_nonbasic(q) + delta;
            self.state[p] = if increase || self.lb[p] == self.ub[p] { State::AtLower } else { State::AtUpper };
            self.pivot(r, q);
            self.basis[r] = q;
            self.state[q] = State::Basic;
            self.xb[r] = entering_value;

            self.since_refactor += 1;
            if self.since_refactor >= REFACTOR_EVERY && !self.refactor() {
                return DualPhase::Stalled;
            }
        }
    }

    fn reduced_costs_optimal(&self) -> bool {
        (0..self.cols).all(|j| self.entering_direction(j, DUAL_TOLERANCE * 10.0).is_none())
    }

    fn milp_violation(&self, values: &[f64]) -> f64 {
        self.milp
            .constraints
            .iter()
            .map(|c| c.violation(values) / (1.0 + c.rhs.abs()))
            .fold(0.0, f64::max)
    }

    fn basic_bound_violation(&self) -> f64 {
        self.basis
            .iter()
            .zip(&self.xb)
            .map(|(&j, &v)| (self.lb[j] - v).max(v - self.ub[j]).max(0.0))
            .fold(0.0, f64::max)
    }

    fn structural_values(&self) -> Vec<f64> {
        let mut values: Vec<f64> = (0..self.n).map(|j| self.value_of_nonbasic(j)).collect();
        for (i, &j) in self.basis.iter().enumerate() {
            if j < self.n {
                values[j] = self.xb[i];
            }
        }
        for (j, v) in values.iter_mut().enumerate() {
            *v = v.clamp(self.lb[j], self.ub[j]);
        }
        values
    }

    fn entering_direction(&self, j: usize, tol: f64) -> Option<f64> {
        let d = self.dj[j];
        match self.state[j] {
            State::Basic => None,
            _ if self.lb[j] == self.ub[j] => None,
            State::AtLower if d < -tol => Some(1.0),
            State::AtUpper if d > tol => Some(-1.0),
            State::Zero if d.abs() > tol => Some(-d.signum()),
            _ => None,
        }
    }

    fn choose_entering(&self) -> Option<(usize, f64)> {
        if self.bland {
            return (0..self.cols).find_map(|j| self.entering_direction(j, DUAL_TOLERANCE).map(|dir| (j, dir)));
        }
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.cols {
            if let Some(dir) = self.entering_direction(j, DUAL_TOLERANCE) {
                let score = self.dj[j].abs();
                if score > best_score {
                    best_score = score;
                    best = Some((j, dir));
                }
            }
        }
        best
    }

    fn phase(&mut self) -> Phase {
        let limit = self.iteration_limit();
        loop {
            if self.iterations >= limit {
                return Phase::Stalled;
            }
            let Some((q, dir)) = self.choose_entering() else {
                return Phase::Optimal;
            };
            self.iterations += 1;

            let (leave, step) = self.ratio_test(q, dir);
            let range = self.ub[q] - self.lb[q];
            if leave.is_none() && !range.is_finite() {
                return Phase::Unbounded;
            }

            let flip = match leave {
                None => true,
                Some(_) => range.is_finite() && range <= step,
            };
            let t = if flip { range } else { step };

            if t <= 1e-12 {
                self.degenerate_run += 1;
                if self.degenerate_run > DEGENERATE_STREAK {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
                self.bland = self.pricing == Pricing::Bland;
            }

            if t != 0.0 {
                for i in 0..self.m {
                    let a = self.tab[i * self.cols + q];
                    if a != 0.0 {
                        self.xb[i] -= dir * t * a;
                    }
                }
            }

            if flip {
                self.state[q] = if dir > 0.0 { State::AtUpper } else { State::AtLower };
                continue;
            }

            let r = leave.expect("pivot row");
            let entering_value = self.value_of_nonbasic(q) + dir * t;
            let alpha = dir * self.tab[r * self.cols + q];
            let leaving = self.basis[r];
            self.state[leaving] = if alpha > 0.0 { State::AtLower } else { State::AtUpper };
            if self.lb[leaving] == self.ub[leaving] {
                self.state[leaving] = State::AtLower;
            }
            if !self.lb[leaving].is_finite() && !self.ub[leaving].is_finite() {
                self.state[leaving] = State::Zero;
            }
            self.pivot(r, q);
            self.basis[r] = q;
            self.state[q] = State::Basic;
            self.xb[r] = entering_value;

            self.since_refactor += 1;
            if self.since_refactor >= REFACTOR_EVERY && !self.refactor() {
                return Phase::Stalled;
            }
        }
    }

    /// Returns the leaving row (if any bound of a basic variable blocks) and
    /// the step length.
    fn ratio_test(&self, q: usize, dir: f64) -> (Option<usize>, f64) {
        let cols = self.cols;
        if self.bland {
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let alpha = dir * self.tab[i * cols + q];
                let Some(ratio) = self.row_ratio(i, alpha, 0.0) else { continue };
                best = match best {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br - 1e-12 || (ratio <= br + 1e-12 && self.basis[i] < self.basis[bi]) {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            return match best {
                Some((i, r)) => (Some(i), r.max(0.0)),
                None => (None, f64::INFINITY),
            };
        }

        // Harris two-pass: relaxed bound pass, then largest pivot among rows
        // within the relaxed step.
        let mut relaxed = f64::INFINITY;
        for i in 0..self.m {
            let alpha = dir * self.tab[i * cols + q];
            if let Some(ratio) = self.row_ratio(i, alpha, PRIMAL_TOLERANCE) {
                relaxed = relaxed.min(ratio);
            }
        }
        if !relaxed.is_finite() {
            return (None, f64::INFINITY);
        }
        let mut chosen: Option<(usize, f64, f64)> = None;
        for i in 0..self.m {
            let alpha = dir * self.tab[i * cols + q];
            let Some(ratio) = self.row_ratio(i, alpha, 0.0) else { continue };
            if ratio <= relaxed {
                let size = alpha.abs();
                if chosen.is_none_or(|(_, _, s)| size > s) {
                    chosen = Some((i, ratio, size));
                }
            }
        }
        match chosen {
            Some((i, ratio, _)) => (Some(i), ratio.max(0.0)),
            None => (None, f64::INFINITY),
        }
    }

    #[inline]
    fn row_ratio(&self, i: usize, alpha: f64, slack: f64) -> Option<f64> {
        let j = self.basis[i];
        if alpha > PIVOT_TOLERANCE {
            let lb = self.lb[j];
            lb.is_finite().then(|| (self.xb[i] - lb + slack) / alpha)
        } else if alpha < -PIVOT_TOLERANCE {
            let ub = self.ub[j];
            ub.is_finite().then(|| (ub - self.xb[i] + slack) / -alpha)
        } else {
            None
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let cols = self.cols;
        let piv = self.tab[r * cols + q];
        {
            let row = &mut self.tab[r * cols..(r + 1) * cols];
            for v in row.iter_mut() {
                *v /= piv;
            }
            row[q] = 1.0;
        }
        self.scratch.clear();
        for k in 0..cols {
            if self.tab[r * cols + k] != 0.0 {
                self.scratch.push(k);
            }
        }
        let (head, tail) = self.tab.split_at_mut(r * cols);
        let (pivot_row, rest) = tail.split_at_mut(cols);
        for (i, row) in head.chunks_exact_mut(cols).chain(rest.chunks_exact_mut(cols)).enumerate() {
            let _ = i;
            let f = row[q];
            if f == 0.0 {
                continue;
            }
            for &k in &self.scratch {
                row[k] -= f * pivot_row[k];
            }
            row[q] = 0.0;
        }
        let f = self.dj[q];
        if f != 0.0 {
            for &k in &self.scratch {
                self.dj[k] -= f * pivot_row[k];
            }
            self.dj[q] = 0.0;
        }
    }

    /// Rebuilds `B⁻¹[A | I | art]` and the basic values from the original
    /// data. Returns false if the basis matrix is numerically singular.
    fn refactor(&mut self) -> bool {
        self.since_refactor = 0;
        let m = self.m;
        let cols = self.cols;
        if m == 0 {
            return true;
        }
        let mut work = (*self.orig).clone();
        let mut rhs: Vec<f64> = (*self.b).clone();
        // rhs = b − N·x_N
        for j in 0..cols {
            if self.state[j] == State::Basic {
                continue;
            }
            let v = self.value_of_nonbasic(j);
            if v != 0.0 {
                for i in 0..m {
                    rhs[i] -= self.orig[i * cols + j] * v;
                }
            }
        }
        // Gauss-Jordan with partial pivoting on the basis columns
        let mut row_of = vec![usize::MAX; m];
        let mut used = vec![false; m];
        for (pos, &col) in self.basis.iter().enumerate() {
            let mut best = usize::MAX;
            let mut best_abs = 0.0;
            for i in 0..m {
                if used[i] {
                    continue;
                }
                let a = work[i * cols + col].abs();
                if a > best_abs {
                    best_abs = a;
                    best = i;
                }
            }
            if best == usize::MAX || best_abs < 1e-11 {
                return false;
            }
            used[best] = true;
            row_of[pos] = best;
            let piv = work[best * cols + col];
            for k in 0..cols {
                work[best * cols + k] /= piv;
            }
            rhs[best] /= piv;
            let pivot_row: Vec<f64> = work[best * cols..(best + 1) * cols].to_vec();
            let nz: Vec<usize> = (0..cols).filter(|&k| pivot_row[k] != 0.0).collect();
            for i in 0..m {
                if i == best {
                    continue;
                }
                let f = work[i * cols + col];
                if f == 0.0 {
                    continue;
                }
                for &k in &nz {
                    work[i * cols + k] -= f * pivot_row[k];
                }
                rhs[i] -= f * rhs[best];
            }
        }
        // reorder so basis position p owns tableau row p
        let mut tab = vec![0.0; m * cols];
        for (pos, &src) in row_of.iter().enumerate() {
            tab[pos * cols..(pos + 1) * cols].copy_from_slice(&work[src * cols..(src + 1) * cols]);
            self.xb[pos] = rhs[src];
        }
        self.tab = tab;
        self.compute_reduced_costs();
        true
    }
}
