//! Constrained blackbox optimization with ReLU-network surrogates.
//!
//! A surrogate network is trained on evaluated samples, encoded exactly as a
//! mixed-integer linear program together with the problem's linear
//! constraints, and solved; the optimizer is evaluated on the real blackbox
//! and fed back into the training set, whether or not it was feasible.

pub mod benchmarks;
pub mod encoding;
pub mod engine;
pub mod milp;
pub mod parallel;
pub mod problem;
pub mod report;
pub mod sampling;
pub mod surrogate;

pub use encoding::{nn_to_milp, BigMMode, EncodingOptions};
pub use engine::{
    cnma_optimize, evaluate_candidate, is_acceptable, random_point, EngineConfig, EngineError, RunResult, RunTrace, Solution,
    Termination, TraceEvent, TraceRow,
};
pub use milp::{solve_milp, solve_milp_with, Milp, MilpOptions, MilpSolution, MilpStatus};
pub use parallel::{parallel_cnma, ParallelConfig, SharedPool};
pub use problem::{
    check_constraints, validate_problem, Blackbox, BlackboxError, Constraint, EvalResult, FnBlackbox, LinearExpr,
    Problem, Sample, Sense, VarKind, VariableSpec,
};
pub use sampling::SampleGenerator;
pub use surrogate::{train, Architecture, ReluNetwork, TrainConfig};
