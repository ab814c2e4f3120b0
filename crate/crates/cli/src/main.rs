mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use cnma_core::benchmarks::random_search;
use cnma_core::parallel::parallel_cnma;
use cnma_core::report::{self, best_series, compare, render_table, write_comparison, write_series, write_trace_file};
use cnma_core::{cnma_optimize, RunResult, Sense};
use serde::Serialize;

use config::{resolve, EngineKind, RunConfig};

#[derive(Parser)]
#[command(name = "cnma", version, about = "Constrained blackbox optimization with neural-network surrogates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one optimization described by a TOML config.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long, value_enum)]
        engine: Option<EngineKind>,
    },
    /// Validate a config without running it.
    Check { config: PathBuf },
    /// Rank traces by final incumbent and write plot-ready series.
    Compare {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "maximize")]
        sense: SenseArg,
        /// Where comparison.csv and the per-trace series go.
        #[arg(long, default_value = ".")]
        output_dir: PathBuf,
        #[arg(long, default_value_t = 200)]
        max_points: usize,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SenseArg {
    Maximize,
    Minimize,
}

impl From<SenseArg> for Sense {
    fn from(s: SenseArg) -> Sense {
        match s {
            SenseArg::Maximize => Sense::Maximize,
            SenseArg::Minimize => Sense::Minimize,
        }
    }
}

#[derive(Serialize)]
struct ResultDocument<'a> {
    schema_id: &'static str,
    benchmark: &'a str,
    engine: EngineKind,
    seed: u64,
    termination: cnma_core::Termination,
    best: Option<&'a cnma_core::Solution>,
    /// `P` re-checked on a fresh evaluation of the best point.
    feasible: bool,
    evaluations: usize,
    iterations: usize,
    failures: usize,
    wall_seconds: f64,
    config: &'a RunConfig,
}

fn run(path: &Path, seed: Option<u64>, output_dir: Option<PathBuf>, engine: Option<EngineKind>) -> Result<()> {
    let mut config = RunConfig::load(path)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    if let Some(dir) = output_dir {
        config.output_dir = dir;
    }
    if let Some(engine) = engine {
        config.engine = engine;
    }
    let resolved = resolve(&config)?;
    fs::create_dir_all(&config.output_dir).with_context(|| format!("creating {}", config.output_dir.display()))?;

    log::info!("running {:?} on {} with seed {}", config.engine, resolved.spec.name, config.seed);
    let start = Instant::now();
    let result: RunResult = match config.engine {
        EngineKind::Cnma => cnma_optimize(&resolved.problem, &resolved.engine)?,
        EngineKind::ParallelCnma => parallel_cnma(&resolved.problem, &resolved.parallel)?,
        EngineKind::RandomSearch => random_search(&resolved.problem, resolved.eval_budget, config.seed)?,
    };
    let wall_seconds = start.elapsed().as_secs_f64();

    let feasible = match &result.best {
        None => false,
        Some(best) => match resolved.problem.blackbox.evaluate(&best.x) {
            Ok(y) => resolved.problem.is_feasible(&best.x, &y).unwrap_or(false),
            Err(_) => false,
        },
    };

    let dir = &config.output_dir;
    write_trace_file(&result.trace, &dir.join("trace.csv"))?;
    let doc = ResultDocument {
        schema_id: config::SCHEMA_ID,
        benchmark: resolved.spec.name,
        engine: config.engine,
        seed: config.seed,
        termination: result.termination,
        best: result.best.as_ref(),
        feasible,
        evaluations: result.evaluations,
        iterations: result.iterations,
        failures: result.failures.len(),
        wall_seconds,
        config: &config,
    };
    let json = serde_json::to_string_pretty(&doc)?;
    fs::write(dir.join("result.json"), json + "\n").context("writing result.json")?;
    write_log(&dir.join("run.log"), &config, &result, wall_seconds)?;

    match &result.best {
        Some(best) => println!("best {} at x = {:?} ({} evaluations)", best.objective, best.x, result.evaluations),
        None => println!("no feasible solution found ({} evaluations)", result.evaluations),
    }
    Ok(())
}

fn check(path: &Path) -> Result<()> {
    let config = RunConfig::load(path)?;
    let resolved = resolve(&config)?;
    println!("{}: {:?} on {} ok", path.display(), config.engine, resolved.spec.name);
    Ok(())
}

fn write_log(path: &Path, config: &RunConfig, result: &RunResult, wall_seconds: f64) -> Result<()> {
    let mut out = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    writeln!(out, "benchmark: {}", config.problem.benchmark)?;
    writeln!(out, "engine: {:?}", config.engine)?;
    writeln!(out, "seed: {}", config.seed)?;
    writeln!(out, "termination: {:?}", result.termination)?;
    writeln!(out, "iterations: {}", result.iterations)?;
    writeln!(out, "evaluations: {} ({} failed)", result.evaluations, result.failures.len())?;
    writeln!(out, "wall time: {wall_seconds:.3}s")?;
    match &result.best {
        Some(b) => writeln!(out, "best: {} at x = {:?}, y = {:?}", b.objective, b.x, b.y)?,
        None => writeln!(out, "best: none")?,
    }
    writeln!(out, "improvements:")?;
    let mut last = None;
    for row in &result.trace.rows {
        if row.best_objective != last {
            if let Some(v) = row.best_objective {
                writeln!(
                    out,
                    "  iteration {:>4}  evaluations {:>6}  {:>9.3}s  {v}",
                    row.iteration, row.cumulative_evaluations, row.wall_seconds
                )?;
            }
            last = row.best_objective;
        }
    }
    Ok(())
}

fn compare_traces(traces: &[PathBuf], sense: Sense, output_dir: &Path, max_points: usize) -> Result<()> {
    let mut loaded = Vec::with_capacity(traces.len());
    for path in traces {
        loaded.push((path.display().to_string(), report::read_trace_file(path)?));
    }
    let summary = compare(&loaded, sense)?;
    print!("{}", render_table(&summary));
    fs::create_dir_all(output_dir).with_context(|| format!("creating {}", output_dir.display()))?;
    let file = fs::File::create(output_dir.join("comparison.csv")).context("creating comparison.csv")?;
    write_comparison(&summary, file)?;
    for (i, (label, trace)) in loaded.iter().enumerate() {
        let name = format!("series_{i}.csv");
        let file = fs::File::create(output_dir.join(&name)).with_context(|| format!("creating {name}"))?;
        write_series(label, &best_series(trace, max_points), file)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, seed, output_dir, engine } => run(&config, seed, output_dir, engine),
        Command::Check { config } => check(&config),
        Command::Compare { traces, sense, output_dir, max_points } => {
            compare_traces(&traces, sense.into(), &output_dir, max_points)
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
