//! Deterministic fixtures shared by the benchmarks.

use cnma_core::benchmarks::rastrigin_problem;
use cnma_core::encoding::{nn_to_milp, EncodingOptions};
use cnma_core::milp::{LinearConstraint, Milp, MilpVar};
use cnma_core::problem::{Cmp, EvalResult, Problem, Sample, Sense};
use cnma_core::surrogate::{train_in_box, Architecture, ReluNetwork, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A dense random LP, feasible at the origin: `max c·x`, `A x ≤ b`, `0 ≤ x ≤ 10`.
pub fn random_lp(vars: usize, rows: usize, seed: u64) -> Milp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut milp = Milp::new(Sense::Maximize);
    let idx: Vec<usize> = (0..vars)
        .map(|j| milp.add_var(MilpVar::continuous(format!("x{j}"), 0.0, 10.0)))
        .collect();
    for r in 0..rows {
        let terms = idx.iter().map(|&j| (j, rng.random_range(-1.0..2.0))).collect();
        milp.add_constraint(LinearConstraint::new(format!("c{r}"), terms, Cmp::Le, rng.random_range(1.0..20.0)));
    }
    milp.objective.terms = idx.iter().map(|&j| (j, rng.random_range(0.1..1.0))).collect();
    milp
}

/// A 0/1 knapsack with `items` binaries.
pub fn knapsack(items: usize, seed: u64) -> Milp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut milp = Milp::new(Sense::Maximize);
    let idx: Vec<usize> = (0..items)
        .map(|j| milp.add_var(MilpVar::binary(format!("b{j}"))))
        .collect();
    let weights: Vec<f64> = (0..items).map(|_| rng.random_range(1.0..10.0)).collect();
    let capacity = 0.4 * weights.iter().sum::<f64>();
    milp.add_constraint(LinearConstraint::new(
        "capacity",
        idx.iter().zip(&weights).map(|(&j, &w)| (j, w)).collect(),
        Cmp::Le,
        capacity,
    ));
    milp.objective.terms = idx.iter().zip(&weights).map(|(&j, &w)| (j, w + rng.random_range(0.0..3.0))).collect();
    milp
}

/// `n` evenly spread Rastrigin samples on `[−5.12, 5.12]`.
pub fn rastrigin_samples(n: usize) -> Vec<Sample> {
    (0..n)
        .map(|i| {
            let x = -5.12 + 10.24 * (i as f64 + 0.5) / n as f64;
            let y = 10.0 + x * x - 10.0 * (2.0 * std::f64::consts::PI * x).cos();
            Sample { x: vec![x], result: EvalResult::ok(vec![y], 0.0) }
        })
        .collect()
}

pub fn trained_surrogate(samples: &[Sample], hidden: Vec<usize>, epochs: usize) -> ReluNetwork {
    let config = TrainConfig { epochs, ..TrainConfig::default() };
    train_in_box(samples, &[(-5.12, 5.12)], &Architecture::new(hidden).unwrap(), &config).unwrap().0
}

pub fn surrogate_milp(net: &ReluNetwork) -> (Problem, Milp) {
    let problem = rastrigin_problem(1);
    let milp = nn_to_milp(net, &problem, &EncodingOptions::default()).unwrap();
    (problem, milp)
}
