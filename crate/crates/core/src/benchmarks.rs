//! Benchmark blackboxes, ready-made problems and a random-search baseline.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::engine::{evaluate_candidate, random_point, EngineConfig, EngineError, RunResult, RunState, Termination, TraceEvent};
use crate::problem::{validate_problem, Blackbox, BlackboxError, Constraint, FnBlackbox, LinearExpr, Problem, Sample, Sense, VariableSpec};
use crate::sampling::SampleGenerator;
use crate::surrogate::{Architecture, TrainConfig};

pub const RASTRIGIN_BOUND: f64 = 5.12;
pub const RASTRIGIN_MAX_1D: f64 = 40.353;
pub const POLAK3_DIM: usize = 11;
pub const POLAK3_FUNCTIONS: usize = 10;
pub const POLAK3_BEST_KNOWN: f64 = 5.93;
pub const PLACEMENT_SENSORS: usize = 40;
pub const PLACEMENT_MODES: usize = 40;
pub const PLACEMENT_BUDGET: f64 = 12.0;
const PLACEMENT_SEED: u64 = 0x5EED_0040;
const PLACEMENT_DENSITY: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchmarkError {
    #[error("unknown benchmark {0:?}")]
    Unknown(String),
    #[error("benchmark {0:?}: external simulator required")]
    ExternalSimulatorRequired(String),
    #[error("input {index} = {value} outside [{lower}, {upper}]")]
    OutOfDomain { index: usize, value: f64, lower: f64, upper: f64 },
    #[error("expected {expected} inputs, got {got}")]
    Arity { expected: usize, got: usize },
}

impl From<BenchmarkError> for BlackboxError {
    fn from(e: BenchmarkError) -> Self {
        BlackboxError::Other(e.to_string())
    }
}

fn check_box(x: &[f64], lower: f64, upper: f64) -> Result<(), BenchmarkError> {
    for (index, &value) in x.iter().enumerate() {
        if !(value >= lower && value <= upper) {
            return Err(BenchmarkError::OutOfDomain { index, value, lower, upper });
        }
    }
    Ok(())
}

fn check_arity(x: &[f64], expected: usize) -> Result<(), BenchmarkError> {
    if x.len() != expected {
        return Err(BenchmarkError::Arity { expected, got: x.len() });
    }
    Ok(())
}

/// `Σ 10 + xᵢ² − 10 cos(2π xᵢ)` on `[−5.12, 5.12]ⁿ`.
pub fn rastrigin(x: &[f64]) -> Result<f64, BenchmarkError> {
    check_box(x, -RASTRIGIN_BOUND, RASTRIGIN_BOUND)?;
    Ok(x.iter().map(|&v| 10.0 + v * v - 10.0 * (2.0 * PI * v).cos()).sum())
}

/// `maxᵢ Σⱼ (1/j) exp((xⱼ − sin(i + 2j))²)` for `i = 0..9`, `j = 1..11`.
pub fn polak3(x: &[f64]) -> Result<f64, BenchmarkError> {
    check_arity(x, POLAK3_DIM)?;
    check_box(x, -1.0, 1.0)?;
    Ok((0..POLAK3_FUNCTIONS)
        .map(|i| {
            (1..=POLAK3_DIM)
                .map(|j| {
                    let d = x[j - 1] - ((i + 2 * j) as f64).sin();
                    (d * d).exp() / j as f64
                })
                .sum::<f64>()
        })
        .fold(f64::NEG_INFINITY, f64::max))
}

/// The two constraint outputs exactly as published, with `+1.5` in `v1`.
pub fn toy_constrained(x1: f64, x2: f64) -> (f64, f64) {
    let v1 = 0.5 * (2.0 * PI * (x1 * x1 - 2.0 * x2)).sin() + x1 + 2.0 * x2 + 1.5;
    let v2 = -(x1 * x1) - x2 * x2 + 1.5;
    (v1, v2)
}

/// The original form of the toy problem: `−1.5` in `v1`, domain `[0, 1]²`,
/// minimum ≈ 0.5998 at ≈ (0.1954, 0.4044).
pub fn toy_constrained_source(x1: f64, x2: f64) -> (f64, f64) {
    let (v1, v2) = toy_constrained(x1, x2);
    (v1 - 3.0, v2)
}

pub const FAIL_BAND: (f64, f64) = (0.4, 0.6);

/// `Σ sin(3π xᵢ) xᵢ`, undefined whenever `x₁ ∈ [0.4, 0.6]`.
pub fn failing_blackbox(x: &[f64]) -> Result<f64, BlackboxError> {
    check_box(x, 0.0, 1.0)?;
    if x.first().is_some_and(|&v| (FAIL_BAND.0..=FAIL_BAND.1).contains(&v)) {
        return Err(BlackboxError::Undefined(format!("x1 = {} is inside the dead band", x[0])));
    }
    Ok(x.iter().map(|&v| (3.0 * PI * v).sin() * v).sum())
}

/// Row `m` holds the sensors that observe failure mode `m`, as a bitmask.
pub fn placement_coverage() -> &'static [u64; PLACEMENT_MODES] {
    static COVERAGE: OnceLock<[u64; PLACEMENT_MODES]> = OnceLock::new();
    COVERAGE.get_or_init(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(PLACEMENT_SEED);
        let mut rows = [0u64; PLACEMENT_MODES];
        for row in rows.iter_mut() {
            for s in 0..PLACEMENT_SENSORS {
                if rng.random_bool(PLACEMENT_DENSITY) {
                    *row |= 1 << s;
                }
            }
        }
        rows
    })
}

/// Fraction of failure-mode pairs that no selected sensor tells apart.
pub fn synthetic_placement(x: &[f64]) -> Result<f64, BenchmarkError> {
    check_arity(x, PLACEMENT_SENSORS)?;
    let mut selected = 0u64;
    for (index, &value) in x.iter().enumerate() {
        if value != 0.0 && value != 1.0 {
            return Err(BenchmarkError::OutOfDomain { index, value, lower: 0.0, upper: 1.0 });
        }
        if value == 1.0 {
            selected |= 1 << index;
        }
    }
    let rows = placement_coverage();
    let mut ambiguous = 0usize;
    for a in 0..PLACEMENT_MODES {
        for b in a + 1..PLACEMENT_MODES {
            if (rows[a] ^ rows[b]) & selected == 0 {
                ambiguous += 1;
            }
        }
    }
    Ok(ambiguous as f64 / (PLACEMENT_MODES * (PLACEMENT_MODES - 1) / 2) as f64)
}

#[derive(Debug, Clone, Serialize)]
pub struct KnownBest {
    pub value: f64,
    pub note: &'static str,
}

/// A named problem together with sensible engine defaults.
#[derive(Debug, Clone)]
pub struct BenchmarkSpec {
    pub name: &'static str,
    pub problem: Problem,
    pub known_best: Option<KnownBest>,
    pub defaults: EngineConfig,
}

pub const BENCHMARK_NAMES: &[&str] = &[
    "rastrigin",
    "rastrigin_2d",
    "rastrigin_threshold",
    "polak3",
    "toy_constrained",
    "toy_constrained_source",
    "failing_blackbox",
    "synthetic_placement",
];

pub const EXTERNAL_BENCHMARKS: &[&str] = &["boat", "lander", "hexapod", "acrobot", "rover", "bus118", "sensor_placement"];

fn scalar_box<F>(dim: usize, f: F) -> Arc<dyn Blackbox>
where
    F: Fn(&[f64]) -> Result<f64, BlackboxError> + Send + Sync + 'static,
{
    Arc::new(FnBlackbox::new(dim, 1, move |x: &[f64]| f(x).map(|v| vec![v])))
}

pub fn rastrigin_problem(dim: usize) -> Problem {
    let x_vars = if dim == 1 {
        vec![VariableSpec::continuous("x", -RASTRIGIN_BOUND, RASTRIGIN_BOUND)]
    } else {
        (1..=dim).map(|i| VariableSpec::continuous(format!("x{i}"), -RASTRIGIN_BOUND, RASTRIGIN_BOUND)).collect()
    };
    Problem::new(
        x_vars,
        vec![VariableSpec::output("y")],
        LinearExpr::var("y"),
        Sense::Maximize,
        scalar_box(dim, |x| Ok(rastrigin(x)?)),
    )
}

pub fn polak3_problem() -> Problem {
    Problem::new(
        (1..=POLAK3_DIM).map(|i| VariableSpec::continuous(format!("x{i}"), -1.0, 1.0)).collect(),
        vec![VariableSpec::output("y")],
        LinearExpr::var("y"),
        Sense::Minimize,
        scalar_box(POLAK3_DIM, |x| Ok(polak3(x)?)),
    )
}

fn toy_problem(lower: f64, upper: f64, f: fn(f64, f64) -> (f64, f64)) -> Problem {
    let blackbox = FnBlackbox::new(2, 2, move |x: &[f64]| {
        check_arity(x, 2)?;
        let (v1, v2) = f(x[0], x[1]);
        Ok(vec![v1, v2])
    });
    Problem::new(
        vec![VariableSpec::continuous("x1", lower, upper), VariableSpec::continuous("x2", lower, upper)],
        vec![VariableSpec::output("v1"), VariableSpec::output("v2")],
        LinearExpr::var("x1").term(1.0, "x2"),
        Sense::Minimize,
        Arc::new(blackbox),
    )
    .with_constraint(Constraint::ge(LinearExpr::var("v1"), 0.0))
    .with_constraint(Constraint::ge(LinearExpr::var("v2"), 0.0))
}

pub fn toy_constrained_problem() -> Problem {
    toy_problem(-1.0, 1.0, toy_constrained)
}

pub fn toy_constrained_source_problem() -> Problem {
    toy_problem(0.0, 1.0, toy_constrained_source)
}

pub fn failing_problem(dim: usize) -> Problem {
    Problem::new(
        (1..=dim).map(|i| VariableSpec::continuous(format!("x{i}"), 0.0, 1.0)).collect(),
        vec![VariableSpec::output("y")],
        LinearExpr::var("y"),
        Sense::Maximize,
        scalar_box(dim, failing_blackbox),
    )
}

pub fn placement_problem() -> Problem {
    let budget = (1..=PLACEMENT_SENSORS).fold(LinearExpr::zero(), |e, i| e.term(1.0, format!("s{i}")));
    Problem::new(
        (1..=PLACEMENT_SENSORS).map(|i| VariableSpec::binary(format!("s{i}"))).collect(),
        vec![VariableSpec::output("ambiguity")],
        LinearExpr::var("ambiguity"),
        Sense::Minimize,
        scalar_box(PLACEMENT_SENSORS, |x| Ok(synthetic_placement(x)?)),
    )
    .with_constraint(Constraint::le(budget, PLACEMENT_BUDGET))
}

/// Looks a benchmark up by name.
pub fn benchmark(name: &str) -> Result<BenchmarkSpec, BenchmarkError> {
    let base = EngineConfig::default();
    let spec = match name {
        "rastrigin" => BenchmarkSpec {
            name: "rastrigin",
            problem: rastrigin_problem(1),
            known_best: Some(KnownBest { value: RASTRIGIN_MAX_1D, note: "true maximum, attained near x = ±4.52" }),
            defaults: EngineConfig {
                n_initial_samples: 2,
                initial_points: vec![vec![-3.495], vec![-2.436]],
                max_iterations: 50,
                ..base
            },
        },
        "rastrigin_2d" => BenchmarkSpec {
            name: "rastrigin_2d",
            problem: rastrigin_problem(2),
            known_best: Some(KnownBest { value: 2.0 * RASTRIGIN_MAX_1D, note: "sum of two 1-D maxima" }),
            defaults: EngineConfig { n_initial_samples: 10, max_iterations: 100, ..base },
        },
        "rastrigin_threshold" => BenchmarkSpec {
            name: "rastrigin_threshold",
            problem: rastrigin_problem(1).with_constraint(Constraint::ge(LinearExpr::var("y"), 35.0)),
            known_best: Some(KnownBest { value: RASTRIGIN_MAX_1D, note: "true maximum; y ≥ 35 only prunes" }),
            defaults: EngineConfig {
                n_initial_samples: 2,
                initial_points: vec![vec![-3.495], vec![-2.436]],
                max_iterations: 120,
                ..base
            },
        },
        "polak3" => BenchmarkSpec {
            name: "polak3",
            problem: polak3_problem(),
            known_best: Some(KnownBest { value: POLAK3_BEST_KNOWN, note: "best known minimum from the literature" }),
            defaults: EngineConfig {
                n_initial_samples: 20,
                max_iterations: 680,
                architecture: Architecture { hidden_layers: vec![20] },
                train_config: TrainConfig { epochs: 300, ..TrainConfig::default() },
                ..base
            },
        },
        "toy_constrained" => BenchmarkSpec {
            name: "toy_constrained",
            problem: toy_constrained_problem(),
            known_best: None,
            defaults: EngineConfig { n_initial_samples: 10, max_iterations: 140, ..base },
        },
        "toy_constrained_source" => BenchmarkSpec {
            name: "toy_constrained_source",
            problem: toy_constrained_source_problem(),
            known_best: Some(KnownBest { value: 0.5998, note: "dense-grid minimum on [0, 1]²" }),
            defaults: EngineConfig {
                n_initial_samples: 10,
                max_iterations: 140,
                architecture: Architecture::default_sequential(),
                ..base
            },
        },
        "failing_blackbox" => BenchmarkSpec {
            name: "failing_blackbox",
            problem: failing_problem(2),
            known_best: None,
            defaults: EngineConfig { n_initial_samples: 15, max_iterations: 50, ..base },
        },
        "synthetic_placement" => BenchmarkSpec {
            name: "synthetic_placement",
            problem: placement_problem(),
            known_best: None,
            defaults: EngineConfig { n_initial_samples: 10, max_iterations: 40, ..base },
        },
        other if EXTERNAL_BENCHMARKS.contains(&other) => {
            return Err(BenchmarkError::ExternalSimulatorRequired(other.to_string()))
        }
        other => return Err(BenchmarkError::Unknown(other.to_string())),
    };
    Ok(spec)
}

/// Evaluates `eval_budget` uniform draws and keeps the best feasible one.
pub fn random_search(problem: &Problem, eval_budget: usize, seed: u64) -> Result<RunResult, EngineError> {
    validate_problem(problem).map_err(EngineError::InvalidProblem)?;
    if eval_budget == 0 {
        return Err(EngineError::InvalidConfig("eval_budget must be at least 1".into()));
    }
    let config = EngineConfig { seed, ..EngineConfig::default() };
    let mut state = RunState::new(problem, &config);
    let mut sampler = SampleGenerator::new(problem.x_vars.clone(), seed);
    for i in 1..=eval_budget {
        let x = random_point(problem, &mut sampler);
        let result = evaluate_candidate(&problem.blackbox, &x, None);
        state.record(Sample { x, result }, TraceEvent::RandomSample, i, None);
    }
    Ok(state.finish(Termination::BudgetExhausted, eval_budget))
}
