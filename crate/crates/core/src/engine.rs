//! The sequential learning-from-failure loop: sample, train, solve, evaluate,
//! feed the result back.

use std::panic::{self, AssertUnwindSafe};
use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoding::{extract_xy, nn_to_milp, EncodingOptions};
use crate::milp::{solve_milp_with, MilpOptions, DEFAULT_GAP_TOLERANCE};
use crate::problem::{validate_problem, Blackbox, Defect, EvalResult, Problem, Sample, Sense};
use crate::sampling::{derive_seed, SampleGenerator};
use crate::surrogate::{train_in_box, Architecture, TrainConfig};

/// Stream index reserved for the shared initial/sequential random draws.
pub(crate) const SAMPLER_STREAM: u64 = 1 << 32;

/// Draw attempts allowed per requested successful sample.
pub const REDRAW_CAP: usize = 10;

/// Uniform draws tried per random point before giving up on the x-only
/// constraints.
pub const REJECTION_CAP: usize = 10_000;

/// A uniform point that satisfies the constraints on `x` alone when one
/// turns up within [`REJECTION_CAP`] draws.
pub fn random_point(problem: &Problem, sampler: &mut SampleGenerator) -> Vec<f64> {
    sampler.sample_where(|x| problem.satisfies_x_constraints(x), REJECTION_CAP)
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid problem: {}", join_defects(.0))]
    InvalidProblem(Vec<Defect>),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

fn join_defects(defects: &[Defect]) -> String {
    defects.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub n_initial_samples: usize,
    pub max_iterations: usize,
    /// Wall-clock budget in seconds, checked between iterations.
    pub time_budget: Option<f64>,
    pub objective_threshold: Option<f64>,
    pub architecture: Architecture,
    pub train_config: TrainConfig,
    /// Per-solve MILP limit in seconds.
    pub milp_time_limit: f64,
    pub milp_node_limit: Option<usize>,
    pub seed: u64,
    /// Per-evaluation limit in seconds; `None` waits indefinitely.
    pub eval_timeout: Option<f64>,
    /// Evaluated before any random draw; they count toward
    /// `n_initial_samples`.
    pub initial_points: Vec<Vec<f64>>,
    pub encoding: EncodingOptions,
    /// A MILP candidate within this distance of an evaluated point, measured
    /// per coordinate as a fraction of the variable's range, is replaced by a
    /// random draw. `0` only catches exact repeats.
    pub duplicate_tolerance: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            n_initial_samples: 10,
            max_iterations: 100,
            time_budget: None,
            objective_threshold: None,
            architecture: Architecture::default_sequential(),
            train_config: TrainConfig::default(),
            milp_time_limit: 30.0,
            milp_node_limit: None,
            seed: 0,
            eval_timeout: None,
            initial_points: Vec::new(),
            encoding: EncodingOptions::default(),
            duplicate_tolerance: 1e-3,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::InvalidConfig(m.to_string()));
        if self.n_initial_samples < 2 {
            return bad("n_initial_samples must be at least 2");
        }
        if self.max_iterations < 1 {
            return bad("max_iterations must be at least 1");
        }
        if self.time_budget.is_some_and(|t| !(t >= 0.0)) {
            return bad("time_budget must be non-negative");
        }
        if !(self.milp_time_limit > 0.0) || !self.milp_time_limit.is_finite() {
            return bad("milp_time_limit must be positive and finite");
        }
        if self.eval_timeout.is_some_and(|t| !(t > 0.0) || !t.is_finite()) {
            return bad("eval_timeout must be positive and finite");
        }
        if !(self.duplicate_tolerance >= 0.0) || !self.duplicate_tolerance.is_finite() {
            return bad("duplicate_tolerance must be non-negative and finite");
        }
        if self.objective_threshold.is_some_and(|t| !t.is_finite()) {
            return bad("objective_threshold must be finite");
        }
        self.architecture.validate().map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
        self.train_config.validate().map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
        Ok(())
    }

    pub(crate) fn milp_options(&self) -> MilpOptions {
        MilpOptions {
            time_limit: Duration::from_secs_f64(self.milp_time_limit),
            gap_tolerance: DEFAULT_GAP_TOLERANCE,
            node_limit: self.milp_node_limit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceEvent {
    InitialSample,
    MilpSolved,
    MilpInfeasibleRandomFallback,
    DuplicateRandomFallback,
    EvalFailed,
    RandomReplacement,
    RandomSample,
    /// Marks the incumbent meeting the objective threshold; not an
    /// evaluation.
    Accepted,
}

impl TraceEvent {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceEvent::InitialSample => "initial_sample",
            TraceEvent::MilpSolved => "milp_solved",
            TraceEvent::MilpInfeasibleRandomFallback => "milp_infeasible_random_fallback",
            TraceEvent::DuplicateRandomFallback => "duplicate_random_fallback",
            TraceEvent::EvalFailed => "eval_failed",
            TraceEvent::RandomReplacement => "random_replacement",
            TraceEvent::RandomSample => "random_sample",
            TraceEvent::Accepted => "accepted",
        }
    }

    pub fn records_evaluation(self) -> bool {
        self != TraceEvent::Accepted
    }
}

impl std::fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TraceEvent {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "initial_sample" => TraceEvent::InitialSample,
            "milp_solved" => TraceEvent::MilpSolved,
            "milp_infeasible_random_fallback" => TraceEvent::MilpInfeasibleRandomFallback,
            "duplicate_random_fallback" => TraceEvent::DuplicateRandomFallback,
            "eval_failed" => TraceEvent::EvalFailed,
            "random_replacement" => TraceEvent::RandomReplacement,
            "random_sample" => TraceEvent::RandomSample,
            "accepted" => TraceEvent::Accepted,
            other => return Err(format!("unknown trace event {other:?}")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub wall_seconds: f64,
    pub cumulative_evaluations: usize,
    pub best_objective: Option<f64>,
    pub event: TraceEvent,
    pub worker_id: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
}

impl RunTrace {
    pub fn final_best(&self) -> Option<f64> {
        self.rows.iter().rev().find_map(|r| r.best_objective)
    }

    pub fn evaluations(&self) -> usize {
        self.rows.last().map_or(0, |r| r.cumulative_evaluations)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    BudgetExhausted,
    ThresholdMet,
    IterationsExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub best: Option<Solution>,
    pub trace: RunTrace,
    pub termination: Termination,
    /// Successful evaluations in the order they entered the training pool.
    pub samples: Vec<Sample>,
    pub failures: Vec<Sample>,
    /// Every sample that satisfied `P`, in evaluation order.
    pub solutions: Vec<Solution>,
    pub iterations: usize,
    pub evaluations: usize,
}

/// Evaluates `x`, folding timeouts, panics, arity errors and non-finite
/// outputs into a failed result.
pub fn evaluate_candidate(blackbox: &Arc<dyn Blackbox>, x: &[f64], eval_timeout: Option<Duration>) -> EvalResult {
    let start = Instant::now();
    let outcome = match eval_timeout {
        None => panic::catch_unwind(AssertUnwindSafe(|| blackbox.evaluate(x)))
            .map_err(|_| "blackbox panicked".to_string()),
        Some(limit) => {
            let (tx, rx) = mpsc::channel();
            let bb = Arc::clone(blackbox);
            let input = x.to_vec();
            let spawned = thread::Builder::new().name("cnma-eval".into()).spawn(move || {
                let _ = tx.send(bb.evaluate(&input));
            });
            match spawned {
                Err(e) => Err(format!("could not spawn evaluation thread: {e}")),
                Ok(_) => match rx.recv_timeout(limit) {
                    Ok(r) => Ok(r),
                    Err(mpsc::RecvTimeoutError::Timeout) => Err(format!("timed out after {:.3}s", limit.as_secs_f64())),
                    Err(mpsc::RecvTimeoutError::Disconnected) => Err("blackbox panicked".to_string()),
                },
            }
        }
    };
    let duration = start.elapsed().as_secs_f64();
    match outcome {
        Err(reason) => EvalResult::failed(reason, duration),
        Ok(Err(e)) => EvalResult::failed(e.to_string(), duration),
        Ok(Ok(y)) if y.len() != blackbox.output_arity() => EvalResult::failed(
            format!("expected {} outputs, got {}", blackbox.output_arity(), y.len()),
            duration,
        ),
        Ok(Ok(y)) if y.iter().any(|v| !v.is_finite()) => EvalResult::failed("non-finite output", duration),
        Ok(Ok(y)) => EvalResult::ok(y, duration),
    }
}

/// True iff a feasible incumbent exists and either the threshold is met or
/// the budgets are spent.
pub fn is_acceptable(best: Option<f64>, sense: Sense, config: &EngineConfig, budget_exhausted: bool) -> bool {
    match best {
        None => false,
        Some(value) => budget_exhausted || config.objective_threshold.is_some_and(|t| sense.meets(value, t)),
    }
}

/// Bookkeeping shared by the sequential and parallel engines.
pub(crate) struct RunState<'a> {
    pub problem: &'a Problem,
    pub config: &'a EngineConfig,
    pub start: Instant,
    pub samples: Vec<Sample>,
    pub failures: Vec<Sample>,
    pub solutions: Vec<Solution>,
    pub best: Option<Solution>,
    pub trace: RunTrace,
    pub evaluations: usize,
}

impl<'a> RunState<'a> {
    pub fn new(problem: &'a Problem, config: &'a EngineConfig) -> Self {
        Self {
            problem,
            config,
            start: Instant::now(),
            samples: Vec::new(),
            failures: Vec::new(),
            solutions: Vec::new(),
            best: None,
            trace: RunTrace::default(),
            evaluations: 0,
        }
    }

    pub fn eval_timeout(&self) -> Option<Duration> {
        self.config.eval_timeout.map(Duration::from_secs_f64)
    }

    pub fn best_objective(&self) -> Option<f64> {
        self.best.as_ref().map(|s| s.objective)
    }

    /// Folds one evaluated sample into the pool, solutions and trace.
    /// Returns whether it was a successful evaluation.
    pub fn record(&mut self, sample: Sample, event: TraceEvent, iteration: usize, worker: Option<usize>) -> bool {
        self.evaluations += 1;
        let ok = match sample.y() {
            None => {
                log::debug!("evaluation failed at {:?}: {:?}", sample.x, sample.result.status);
                self.failures.push(sample);
                false
            }
            Some(y) => {
                let y = y.to_vec();
                let feasible = self.problem.is_feasible(&sample.x, &y).unwrap_or(false);
                if feasible {
                    if let Ok(objective) = self.problem.objective_value(&sample.x, &y) {
                        let solution = Solution { x: sample.x.clone(), y, objective };
                        let improves = self
                            .best
                            .as_ref()
                            .is_none_or(|b| self.problem.sense.improves(objective, b.objective));
                        if improves {
                            log::info!("iteration {iteration}: new incumbent {objective}");
                            self.best = Some(solution.clone());
                        }
                        self.solutions.push(solution);
                    }
                }
                self.samples.push(sample);
                true
            }
        };
        let event = if ok { event } else { TraceEvent::EvalFailed };
        self.push_row(event, iteration, worker);
        ok
    }

    pub fn push_row(&mut self, event: TraceEvent, iteration: usize, worker: Option<usize>) {
        self.trace.rows.push(TraceRow {
            iteration,
            wall_seconds: self.start.elapsed().as_secs_f64(),
            cumulative_evaluations: self.evaluations,
            best_objective: self.best_objective(),
            event,
            worker_id: worker,
        });
    }

    pub fn threshold_met(&self) -> bool {
        is_acceptable(self.best_objective(), self.problem.sense, self.config, false)
    }

    pub fn out_of_time(&self) -> bool {
        self.config.time_budget.is_some_and(|t| self.start.elapsed().as_secs_f64() >= t)
    }

    /// Evaluates the configured initial points, then random draws until
    /// `n_initial_samples` succeed or the redraw cap is hit.
    pub fn initial_design(&mut self, sampler: &mut SampleGenerator) {
        let timeout = self.eval_timeout();
        let target = self.config.n_initial_samples;
        let cap = REDRAW_CAP * target;
        let mut attempts = 0;
        for point in &self.config.initial_points {
            let mut x = point.clone();
            self.problem.snap_x(&mut x);
            let result = evaluate_candidate(&self.problem.blackbox, &x, timeout);
            self.record(Sample { x, result }, TraceEvent::InitialSample, 0, None);
            attempts += 1;
        }
        while self.samples.len() < target && attempts < cap {
            let x = random_point(self.problem, sampler);
            let result = evaluate_candidate(&self.problem.blackbox, &x, timeout);
            self.record(Sample { x, result }, TraceEvent::InitialSample, 0, None);
            attempts += 1;
        }
        if self.samples.len() < target {
            log::warn!("only {} of {} initial samples succeeded after {attempts} draws", self.samples.len(), target);
        }
    }

    pub fn finish(self, termination: Termination, iterations: usize) -> RunResult {
        RunResult {
            best: self.best,
            trace: self.trace,
            termination,
            samples: self.samples,
            failures: self.failures,
            solutions: self.solutions,
            iterations,
            evaluations: self.evaluations,
        }
    }
}

/// Trains a surrogate on `samples`, encodes and solves the MILP, and returns
/// the snapped maximizer, or `None` when there is no usable candidate.
pub(crate) fn propose_candidate(
    problem: &Problem,
    config: &EngineConfig,
    architecture: &Architecture,
    samples: &[Sample],
    train_seed: u64,
) -> Option<Vec<f64>> {
    let train_config = TrainConfig { weight_init_seed: train_seed, ..config.train_config.clone() };
    let bounds: Vec<(f64, f64)> = problem.x_vars.iter().map(|v| (v.lower, v.upper)).collect();
    let net = match train_in_box(samples, &bounds, architecture, &train_config) {
        Ok((net, _)) => net,
        Err(e) => {
            log::debug!("training skipped: {e}");
            return None;
        }
    };
    let mut options = config.encoding.clone();
    if let Some(t) = config.objective_threshold {
        options.objective_bound = Some(t);
    }
    let milp = match nn_to_milp(&net, problem, &options) {
        Ok(m) => m,
        Err(e) => {
            log::warn!("encoding failed: {e}");
            return None;
        }
    };
    let solution = solve_milp_with(&milp, &config.milp_options());
    log::debug!(
        "milp {:?} objective {} after {} nodes",
        solution.status,
        solution.objective,
        solution.nodes_explored
    );
    if !solution.status.has_solution() {
        return None;
    }
    let (mut x, _) = extract_xy(&milp, problem, &solution.values);
    problem.snap_x(&mut x);
    Some(x)
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Candidate {
    Point(Vec<f64>),
    NoSolution,
    Duplicate,
}

/// True when `x` lies within `tolerance` of any point in `seen`, per
/// coordinate and relative to the variable ranges.
pub(crate) fn is_duplicate<'s>(problem: &Problem, x: &[f64], seen: impl IntoIterator<Item = &'s [f64]>, tolerance: f64) -> bool {
    seen.into_iter().any(|p| {
        problem.x_vars.iter().zip(x.iter().zip(p)).all(|(spec, (a, b))| {
            let width = spec.upper - spec.lower;
            (a - b).abs() <= tolerance * width
        })
    })
}

impl RunState<'_> {
    pub fn evaluated_points(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.iter().chain(&self.failures).map(|s| s.x.as_slice())
    }
}

/// Evaluates the candidate (or a random draw in its place), replacing every
/// failed evaluation with one fresh random draw, up to [`REDRAW_CAP`]
/// attempts.
pub(crate) fn contribute(
    problem: &Problem,
    candidate: Candidate,
    sampler: &mut SampleGenerator,
    timeout: Option<Duration>,
) -> Vec<(Sample, TraceEvent)> {
    let mut out = Vec::new();
    let (mut x, mut event) = match candidate {
        Candidate::Point(x) => (x, TraceEvent::MilpSolved),
        Candidate::NoSolution => (random_point(problem, sampler), TraceEvent::MilpInfeasibleRandomFallback),
        Candidate::Duplicate => (random_point(problem, sampler), TraceEvent::DuplicateRandomFallback),
    };
    for _ in 0..REDRAW_CAP {
        let result = evaluate_candidate(&problem.blackbox, &x, timeout);
        let ok = result.is_ok();
        out.push((Sample { x, result }, event));
        if ok {
            break;
        }
        x = random_point(problem, sampler);
        event = TraceEvent::RandomReplacement;
    }
    out
}

pub(crate) fn check_inputs(problem: &Problem, config: &EngineConfig) -> Result<(), EngineError> {
    validate_problem(problem).map_err(EngineError::InvalidProblem)?;
    config.validate()?;
    for p in &config.initial_points {
        if p.len() != problem.x_vars.len() {
            return Err(EngineError::InvalidConfig(format!(
                "initial point {p:?} has {} components, expected {}",
                p.len(),
                problem.x_vars.len()
            )));
        }
    }
    Ok(())
}

/// Runs the sequential loop until the iteration limit, the time budget, or
/// the objective threshold stops it.
pub fn cnma_optimize(problem: &Problem, config: &EngineConfig) -> Result<RunResult, EngineError> {
    check_inputs(problem, config)?;
    let mut state = RunState::new(problem, config);
    let mut sampler = SampleGenerator::new(problem.x_vars.clone(), derive_seed(config.seed, SAMPLER_STREAM, 0));
    state.initial_design(&mut sampler);
    let timeout = state.eval_timeout();
    let mut iterations = 0;
    let termination = loop {
        if state.threshold_met() {
            state.push_row(TraceEvent::Accepted, iterations, None);
            break Termination::ThresholdMet;
        }
        if state.out_of_time() {
            break Termination::BudgetExhausted;
        }
        if iterations == config.max_iterations {
            break Termination::IterationsExhausted;
        }
        iterations += 1;
        let seed = derive_seed(config.seed, 0, iterations as u64);
        let candidate = match propose_candidate(problem, config, &config.architecture, &state.samples, seed) {
            None => Candidate::NoSolution,
            Some(x) if is_duplicate(problem, &x, state.evaluated_points(), config.duplicate_tolerance) => Candidate::Duplicate,
            Some(x) => Candidate::Point(x),
        };
        for (sample, event) in contribute(problem, candidate, &mut sampler, timeout) {
            state.record(sample, event, iterations, None);
        }
    };
    Ok(state.finish(termination, iterations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{BlackboxError, Constraint, FnBlackbox, LinearExpr, VariableSpec};

    fn rastrigin_box() -> Arc<dyn Blackbox> {
        Arc::new(FnBlackbox::new(1, 1, |x: &[f64]| {
            Ok(vec![10.0 + x[0] * x[0] - 10.0 * (2.0 * std::f64::consts::PI * x[0]).cos()])
        }))
    }

    fn rastrigin_problem() -> Problem {
        Problem::new(
            vec![VariableSpec::continuous("x", -5.12, 5.12)],
            vec![VariableSpec::output("y")],
            LinearExpr::var("y"),
            Sense::Maximize,
            rastrigin_box(),
        )
    }

    fn quick_config() -> EngineConfig {
        EngineConfig {
            n_initial_samples: 2,
            max_iterations: 3,
            train_config: TrainConfig { epochs: 200, ..TrainConfig::default() },
            architecture: Architecture::new(vec![10]).unwrap(),
            milp_time_limit: 5.0,
            ..EngineConfig::default()
        }
    }

    #[test]
    fn rastrigin_at_zero_is_zero() {
        let r = evaluate_candidate(&rastrigin_box(), &[0.0], None);
        assert_eq!(r.y(), Some(&[0.0][..]));
    }

    #[test]
    fn nan_panic_error_and_timeout_fold_into_failed() {
        let nan: Arc<dyn Blackbox> = Arc::new(FnBlackbox::new(1, 1, |_: &[f64]| Ok(vec![f64::NAN])));
        assert!(!evaluate_candidate(&nan, &[0.0], None).is_ok());
        let err: Arc<dyn Blackbox> =
            Arc::new(FnBlackbox::new(1, 1, |_: &[f64]| Err(BlackboxError::Undefined("nope".into()))));
        assert!(!evaluate_candidate(&err, &[0.0], None).is_ok());
        let short: Arc<dyn Blackbox> = Arc::new(FnBlackbox::new(1, 2, |_: &[f64]| Ok(vec![1.0])));
        assert!(!evaluate_candidate(&short, &[0.0], None).is_ok());
        let slow: Arc<dyn Blackbox> = Arc::new(FnBlackbox::new(1, 1, |_: &[f64]| {
            thread::sleep(Duration::from_millis(300));
            Ok(vec![1.0])
        }));
        assert!(!evaluate_candidate(&slow, &[0.0], Some(Duration::from_millis(20))).is_ok());
        assert!(evaluate_candidate(&slow, &[0.0], Some(Duration::from_secs(5))).is_ok());
    }

    #[test]
    fn acceptability() {
        let mut config = EngineConfig { objective_threshold: Some(40.0), ..EngineConfig::default() };
        assert!(is_acceptable(Some(40.353), Sense::Maximize, &config, false));
        assert!(!is_acceptable(None, Sense::Maximize, &config, true));
        config.objective_threshold = Some(0.65);
        assert!(is_acceptable(Some(0.6003), Sense::Minimize, &config, false));
        config.objective_threshold = None;
        assert!(!is_acceptable(Some(1.0), Sense::Maximize, &config, false));
        assert!(is_acceptable(Some(1.0), Sense::Maximize, &config, true));
    }

    #[test]
    fn rejects_bad_config() {
        let p = rastrigin_problem();
        let c = EngineConfig { n_initial_samples: 1, ..quick_config() };
        assert!(matches!(cnma_optimize(&p, &c), Err(EngineError::InvalidConfig(_))));
        let c = EngineConfig { max_iterations: 0, ..quick_config() };
        assert!(matches!(cnma_optimize(&p, &c), Err(EngineError::InvalidConfig(_))));
    }

    #[test]
    fn unsatisfiable_constraint_gives_no_best() {
        let p = rastrigin_problem().with_constraint(Constraint::ge(LinearExpr::var("y"), 1000.0));
        let c = EngineConfig { max_iterations: 20, ..quick_config() };
        let r = cnma_optimize(&p, &c).unwrap();
        assert!(r.best.is_none());
        assert_eq!(r.termination, Termination::IterationsExhausted);
        assert_eq!(r.iterations, 20);
        assert_eq!(r.evaluations, 22);
    }

    #[test]
    fn initial_points_come_first() {
        let p = rastrigin_problem();
        let c = EngineConfig { initial_points: vec![vec![-3.495], vec![-2.436]], max_iterations: 1, ..quick_config() };
        let r = cnma_optimize(&p, &c).unwrap();
        assert_eq!(r.samples[0].x, vec![-3.495]);
        assert_eq!(r.samples[1].x, vec![-2.436]);
        assert_eq!(r.samples.len(), 3);
    }

    #[test]
    fn threshold_stops_early() {
        let p = rastrigin_problem();
        let c = EngineConfig { objective_threshold: Some(-1.0), ..quick_config() };
        let r = cnma_optimize(&p, &c).unwrap();
        assert_eq!(r.termination, Termination::ThresholdMet);
        assert_eq!(r.iterations, 0);
        assert_eq!(r.trace.rows.last().unwrap().event, TraceEvent::Accepted);
    }
}
