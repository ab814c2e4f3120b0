//! Several CNMA workers with distinct architectures and seeds sharing one
//! sample pool, synchronized at the end of every iteration.

use std::sync::{Arc, Mutex, PoisonError};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{
    check_inputs, contribute, is_duplicate, propose_candidate, Candidate, EngineConfig, EngineError, RunResult, RunState, Termination,
    TraceEvent, SAMPLER_STREAM,
};
use crate::problem::{Problem, Sample};
use crate::sampling::{derive_seed, SampleGenerator};
use crate::surrogate::Architecture;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParallelConfig {
    pub workers: usize,
    /// Worker `j` uses `architectures[j % len]`.
    pub architectures: Vec<Architecture>,
    /// `engine.seed` is the base seed; worker `j` trains from `seed + j`.
    #[serde(flatten)]
    pub engine: EngineConfig,
}

impl Default for ParallelConfig {
    fn default() -> Self {
        Self { workers: 5, architectures: default_architectures(), engine: EngineConfig::default() }
    }
}

pub fn default_architectures() -> Vec<Architecture> {
    [vec![35, 10], vec![10], vec![30], vec![35], vec![50]]
        .into_iter()
        .map(|h| Architecture { hidden_layers: h })
        .collect()
}

impl ParallelConfig {
    pub fn base_seed(&self) -> u64 {
        self.engine.seed
    }

    pub fn architecture_of(&self, worker: usize) -> &Architecture {
        &self.architectures[worker % self.architectures.len()]
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.workers == 0 {
            return Err(EngineError::InvalidConfig("workers must be at least 1".into()));
        }
        if self.architectures.is_empty() {
            return Err(EngineError::InvalidConfig("architectures must not be empty".into()));
        }
        for a in &self.architectures {
            a.validate().map_err(|e| EngineError::InvalidConfig(e.to_string()))?;
        }
        Ok(())
    }
}

/// Append-only sample list; snapshots are independent copies.
#[derive(Debug, Default)]
pub struct SharedPool {
    samples: Mutex<Vec<Sample>>,
}

impl SharedPool {
    pub fn new(initial: Vec<Sample>) -> Self {
        Self { samples: Mutex::new(initial) }
    }

    pub fn append(&self, sample: Sample) {
        self.samples.lock().unwrap_or_else(PoisonError::into_inner).push(sample);
    }

    pub fn snapshot(&self) -> Arc<[Sample]> {
        self.samples.lock().unwrap_or_else(PoisonError::into_inner).as_slice().into()
    }

    pub fn len(&self) -> usize {
        self.samples.lock().unwrap_or_else(PoisonError::into_inner).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// What every worker saw during one iteration.
#[derive(Debug, Clone)]
pub struct Barrier<'a> {
    pub iteration: usize,
    /// The pool each worker trained on, indexed by worker.
    pub worker_views: Vec<Arc<[Sample]>>,
    /// The pool after this iteration's appends.
    pub pool: &'a [Sample],
}

pub fn parallel_cnma(problem: &Problem, config: &ParallelConfig) -> Result<RunResult, EngineError> {
    parallel_cnma_observed(problem, config, |_| {})
}

/// [`parallel_cnma`] with a callback invoked after every barrier.
pub fn parallel_cnma_observed<F>(problem: &Problem, config: &ParallelConfig, mut observe: F) -> Result<RunResult, EngineError>
where
    F: FnMut(&Barrier<'_>),
{
    check_inputs(problem, &config.engine)?;
    config.validate()?;
    let engine = &config.engine;
    let base = config.base_seed();
    let mut state = RunState::new(problem, engine);
    let mut sampler = SampleGenerator::new(problem.x_vars.clone(), derive_seed(base, SAMPLER_STREAM, 0));
    state.initial_design(&mut sampler);
    let pool = SharedPool::new(state.samples.clone());
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
        if iterations == engine.max_iterations {
            break Termination::IterationsExhausted;
        }
        iterations += 1;
        let it = iterations as u64;
        let (views, proposals): (Vec<Arc<[Sample]>>, Vec<Option<Vec<f64>>>) = (0..config.workers)
            .into_par_iter()
            .map(|j| {
                let view = pool.snapshot();
                let seed = derive_seed(base.wrapping_add(j as u64), 0, it);
                let proposal = propose_candidate(problem, engine, config.architecture_of(j), &view, seed);
                (view, proposal)
            })
            .unzip();
        let mut candidates: Vec<Candidate> = Vec::with_capacity(proposals.len());
        for proposal in proposals {
            let candidate = match proposal {
                None => Candidate::NoSolution,
                Some(x) => {
                    let earlier = candidates.iter().filter_map(|c| match c {
                        Candidate::Point(p) => Some(p.as_slice()),
                        _ => None,
                    });
                    if is_duplicate(problem, &x, state.evaluated_points().chain(earlier), engine.duplicate_tolerance) {
                        Candidate::Duplicate
                    } else {
                        Candidate::Point(x)
                    }
                }
            };
            candidates.push(candidate);
        }
        let work: Vec<Vec<(Sample, TraceEvent)>> = candidates
            .into_par_iter()
            .enumerate()
            .map(|(j, candidate)| {
                let mut draws = SampleGenerator::new(problem.x_vars.clone(), derive_seed(base, j as u64, it));
                contribute(problem, candidate, &mut draws, timeout)
            })
            .collect();
        for (j, contributed) in work.into_iter().enumerate() {
            for (sample, event) in contributed {
                if state.record(sample.clone(), event, iterations, Some(j)) {
                    pool.append(sample);
                }
            }
        }
        let after = pool.snapshot();
        observe(&Barrier { iteration: iterations, worker_views: views, pool: &after });
    };
    Ok(state.finish(termination, iterations))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::EvalResult;

    fn sample(v: f64) -> Sample {
        Sample { x: vec![v], result: EvalResult::ok(vec![v], 0.0) }
    }

    #[test]
    fn empty_pool_snapshot_is_empty() {
        assert!(SharedPool::default().snapshot().is_empty());
    }

    #[test]
    fn snapshot_is_stable() {
        let pool = SharedPool::default();
        for i in 0..3 {
            pool.append(sample(i as f64));
        }
        let snap = pool.snapshot();
        pool.append(sample(3.0));
        pool.append(sample(4.0));
        assert_eq!(snap.len(), 3);
        assert_eq!(pool.len(), 5);
    }

    #[test]
    fn concurrent_appends_are_not_lost() {
        let pool = SharedPool::new(vec![sample(-1.0)]);
        std::thread::scope(|s| {
            for w in 0..10 {
                let pool = &pool;
                s.spawn(move || {
                    for i in 0..100 {
                        pool.append(sample((w * 100 + i) as f64));
                    }
                });
            }
        });
        assert_eq!(pool.len(), 1001);
    }

    #[test]
    fn architectures_cycle() {
        let c = ParallelConfig { workers: 10, ..ParallelConfig::default() };
        assert_eq!(c.architecture_of(0), c.architecture_of(5));
        assert_eq!(c.architecture_of(1).hidden_layers, vec![10]);
        assert_eq!(c.architecture_of(9).hidden_layers, vec![50]);
    }
}
