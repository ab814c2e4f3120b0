//! The run configuration file: a TOML document with `problem`, `engine`,
//! `parallel`, `training`, `solver` and `random_search` sections.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cnma_core::benchmarks::{benchmark, BenchmarkSpec};
use cnma_core::encoding::BigMMode;
use cnma_core::parallel::{default_architectures, ParallelConfig};
use cnma_core::{Architecture, Constraint, EngineConfig, LinearExpr, Problem, Sense};
use serde::{Deserialize, Serialize};

pub const SCHEMA_ID: &str = "cnma-run/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[clap(rename_all = "snake_case")]
pub enum EngineKind {
    Cnma,
    ParallelCnma,
    RandomSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_id: String,
    pub engine: EngineKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub problem: ProblemSection,
    #[serde(default, rename = "cnma")]
    pub loop_: LoopSection,
    #[serde(default)]
    pub parallel: ParallelSection,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub random_search: RandomSearchSection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub benchmark: String,
    /// Replaces the benchmark's objective.
    pub objective: Option<BTreeMap<String, f64>>,
    pub sense: Option<Sense>,
    /// Added to the benchmark's own constraints.
    #[serde(default)]
    pub constraints: Vec<ConstraintSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    pub terms: BTreeMap<String, f64>,
    pub cmp: String,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSection {
    pub n_initial_samples: Option<usize>,
    pub max_iterations: Option<usize>,
    pub time_budget: Option<f64>,
    pub objective_threshold: Option<f64>,
    pub architecture: Option<Vec<usize>>,
    pub eval_timeout: Option<f64>,
    pub initial_points: Option<Vec<Vec<f64>>>,
    pub duplicate_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParallelSection {
    pub workers: Option<usize>,
    pub architectures: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub l2_penalty: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub milp_time_limit: Option<f64>,
    pub milp_node_limit: Option<usize>,
    pub big_m: Option<BigMMode>,
    pub lp_tightening: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSearchSection {
    pub eval_budget: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text)?;
        if config.schema_id != SCHEMA_ID {
            bail!("unsupported schema_id {:?}, expected {SCHEMA_ID:?}", config.schema_id);
        }
        Ok(config)
    }
}

fn architecture(widths: &[usize]) -> Result<Architecture> {
    Ok(Architecture::new(widths.to_vec())?)
}

fn expr(terms: &BTreeMap<String, f64>) -> LinearExpr {
    terms.iter().fold(LinearExpr::zero(), |e, (name, &c)| e.term(c, name.clone()))
}

/// Everything a run needs, resolved against the benchmark defaults.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub spec: BenchmarkSpec,
    pub problem: Problem,
    pub engine: EngineConfig,
    pub parallel: ParallelConfig,
    pub eval_budget: usize,
}

pub fn resolve(config: &RunConfig) -> Result<ResolvedRun> {
    let spec = benchmark(&config.problem.benchmark)?;
    let mut problem = spec.problem.clone();
    if let Some(terms) = &config.problem.objective {
        problem.objective = expr(terms);
    }
    if let Some(sense) = config.problem.sense {
        problem.sense = sense;
    }
    for c in &config.problem.constraints {
        let e = expr(&c.terms);
        problem.constraints.push(match c.cmp.as_str() {
            "<=" => Constraint::le(e, c.rhs),
            ">=" => Constraint::ge(e, c.rhs),
            "=" | "==" => Constraint::eq(e, c.rhs),
            other => bail!("constraint comparison must be <=, >= or =, got {other:?}"),
        });
    }
    if let Err(defects) = cnma_core::validate_problem(&problem) {
        let text: Vec<String> = defects.iter().map(ToString::to_string).collect();
        bail!("invalid problem: {}", text.join("; "));
    }

    let mut engine = spec.defaults.clone();
    engine.seed = config.seed;
    let l = &config.loop_;
    macro_rules! set {
        ($target:expr, $value:expr) => {
            if let Some(v) = $value.clone() {
                $target = v;
            }
        };
    }
    set!(engine.n_initial_samples, l.n_initial_samples);
    set!(engine.max_iterations, l.max_iterations);
    set!(engine.eval_timeout, l.eval_timeout.map(Some));
    set!(engine.time_budget, l.time_budget.map(Some));
    set!(engine.objective_threshold, l.objective_threshold.map(Some));
    set!(engine.initial_points, l.initial_points);
    set!(engine.duplicate_tolerance, l.duplicate_tolerance);
    if let Some(widths) = &l.architecture {
        engine.architecture = architecture(widths)?;
    }
    let t = &config.training;
    set!(engine.train_config.epochs, t.epochs);
    set!(engine.train_config.learning_rate, t.learning_rate);
    set!(engine.train_config.batch_size, t.batch_size);
    set!(engine.train_config.l2_penalty, t.l2_penalty);
    let s = &config.solver;
    set!(engine.milp_time_limit, s.milp_time_limit);
    set!(engine.milp_node_limit, s.milp_node_limit.map(Some));
    set!(engine.encoding.big_m, s.big_m);
    set!(engine.encoding.lp_tightening, s.lp_tightening);
    engine.validate()?;

    let architectures = match &config.parallel.architectures {
        Some(list) => list.iter().map(|w| architecture(w)).collect::<Result<Vec<_>>>()?,
        None => default_architectures(),
    };
    let parallel = ParallelConfig {
        workers: config.parallel.workers.unwrap_or(ParallelConfig::default().workers),
        architectures,
        engine: engine.clone(),
    };
    parallel.validate()?;

    let eval_budget = config
        .random_search
        .eval_budget
        .unwrap_or(engine.n_initial_samples + engine.max_iterations);
    if eval_budget == 0 {
        bail!("random_search.eval_budget must be at least 1");
    }
    Ok(ResolvedRun { spec, problem, engine, parallel, eval_budget })
}
