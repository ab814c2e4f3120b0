//! Seeded uniform sampling of the design domain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::problem::VariableSpec;

/// Uniform random points over a box of mixed continuous/discrete domains.
///
/// Equal seeds produce equal streams.
#[derive(Debug, Clone)]
pub struct SampleGenerator {
    domains: Vec<VariableSpec>,
    rng: ChaCha8Rng,
}

impl SampleGenerator {
    pub fn new(domains: Vec<VariableSpec>, seed: u64) -> Self {
        assert!(!domains.is_empty(), "sample generator needs at least one domain");
        Self { domains, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn domains(&self) -> &[VariableSpec] {
        &self.domains
    }

    /// Continuous components are uniform on `[lower, upper]`; discrete
    /// components are uniform over the integers in that range.
    pub fn sample_uniform(&mut self) -> Vec<f64> {
        let rng = &mut self.rng;
        self.domains
            .iter()
            .map(|d| {
                if d.kind.is_discrete() {
                    let lo = d.lower.ceil() as i64;
                    let hi = d.upper.floor() as i64;
                    rng.random_range(lo..=hi) as f64
                } else if d.lower == d.upper {
                    d.lower
                } else {
                    rng.random_range(d.lower..=d.upper)
                }
            })
            .collect()
    }

    /// Rejection sampling: the first of up to `max_tries` uniform draws
    /// accepted by `accept`, or the last draw if none is.
    pub fn sample_where<F>(&mut self, accept: F, max_tries: usize) -> Vec<f64>
    where
        F: Fn(&[f64]) -> bool,
    {
        let mut x = self.sample_uniform();
        for _ in 1..max_tries {
            if accept(&x) {
                break;
            }
            x = self.sample_uniform();
        }
        x
    }
}

impl Iterator for SampleGenerator {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        Some(self.sample_uniform())
    }
}

/// Mixes a base seed with a worker index and iteration into an independent
/// stream seed (splitmix64 finaliser).
pub fn derive_seed(base: u64, worker: u64, iteration: u64) -> u64 {
    let mut z = base
        .wrapping_add(worker.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(iteration.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn continuous_draws_stay_in_domain() {
        let mut g = SampleGenerator::new(vec![VariableSpec::continuous("x", -5.12, 5.12)], 3);
        for _ in 0..1000 {
            let x = g.sample_uniform();
            assert_eq!(x.len(), 1);
            assert!((-5.12..=5.12).contains(&x[0]));
        }
    }

    #[test]
    fn point_domain_is_exact() {
        let mut g = SampleGenerator::new(vec![VariableSpec::continuous("x", 3.0, 3.0)], 0);
        assert_eq!(g.sample_uniform(), vec![3.0]);
        let mut g = SampleGenerator::new(vec![VariableSpec::integer("k", 3.0, 3.0)], 0);
        assert_eq!(g.sample_uniform(), vec![3.0]);
    }

    #[test]
    fn binary_coordinates_are_balanced() {
        let domains: Vec<_> = (0..186).map(|i| VariableSpec::binary(format!("b{i}"))).collect();
        let mut g = SampleGenerator::new(domains, 11);
        let mut sums = vec![0.0; 186];
        for _ in 0..10_000 {
            let x = g.sample_uniform();
            assert_eq!(x.len(), 186);
            for (s, v) in sums.iter_mut().zip(&x) {
                assert!(*v == 0.0 || *v == 1.0);
                *s += v;
            }
        }
        for s in sums {
            let mean = s / 10_000.0;
            assert!((0.45..=0.55).contains(&mean), "mean {mean}");
        }
    }

    #[test]
    fn integer_draws_cover_range() {
        let mut g = SampleGenerator::new(vec![VariableSpec::integer("k", -2.0, 2.0)], 5);
        let mut seen = [0usize; 5];
        for _ in 0..5000 {
            let v = g.sample_uniform()[0];
            assert_eq!(v.fract(), 0.0);
            seen[(v + 2.0) as usize] += 1;
        }
        assert!(seen.iter().all(|&c| c > 800), "{seen:?}");
    }

    #[test]
    fn equal_seeds_give_equal_streams() {
        let domains = vec![VariableSpec::continuous("x", 0.0, 1.0), VariableSpec::integer("k", 0.0, 9.0)];
        let a: Vec<_> = SampleGenerator::new(domains.clone(), 42).take(100).collect();
        let b: Vec<_> = SampleGenerator::new(domains.clone(), 42).take(100).collect();
        let c: Vec<_> = SampleGenerator::new(domains, 43).take(100).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn kolmogorov_smirnov_below_one_percent_critical_value() {
        let n = 10_000;
        let mut g = SampleGenerator::new(
            vec![VariableSpec::continuous("a", -5.12, 5.12), VariableSpec::continuous("b", 0.0, 1.0)],
            2024,
        );
        let draws: Vec<Vec<f64>> = (0..n).map(|_| g.sample_uniform()).collect();
        // asymptotic 1% critical value 1.628 / sqrt(n)
        let critical = 1.628 / (n as f64).sqrt();
        for (coord, (lo, hi)) in [(-5.12, 5.12), (0.0, 1.0)].into_iter().enumerate() {
            let mut u: Vec<f64> = draws.iter().map(|x| (x[coord] - lo) / (hi - lo)).collect();
            u.sort_by(f64::total_cmp);
            let d = u
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let above = (i + 1) as f64 / n as f64 - v;
                    let below = v - i as f64 / n as f64;
                    above.max(below)
                })
                .fold(0.0, f64::max);
            assert!(d < critical, "coordinate {coord}: D = {d}");
        }
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0, 0), derive_seed(1, 1, 0));
        assert_ne!(derive_seed(1, 0, 0), derive_seed(1, 0, 1));
        assert_eq!(derive_seed(9, 2, 3), derive_seed(9, 2, 3));
    }
}
