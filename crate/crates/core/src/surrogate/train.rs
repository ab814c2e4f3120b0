use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{Architecture, Layer, ReluNetwork};
use super::scaler::{fit_scalers, AffineScaler};
use super::SurrogateError;
use crate::problem::Sample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Effective batch size is `min(batch_size, samples)`.
    pub batch_size: usize,
    pub weight_init_seed: u64,
    pub l2_penalty: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 2000, learning_rate: 1e-2, batch_size: 32, weight_init_seed: 0, l2_penalty: 1e-5 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), SurrogateError> {
        if self.epochs == 0 || !(self.learning_rate > 0.0) || self.batch_size == 0 || !(self.l2_penalty >= 0.0) {
            return Err(SurrogateError::InvalidTrainConfig);
        }
        Ok(())
    }
}

/// Loss bookkeeping from a training run, in normalized units.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub initial_mse: f64,
    pub best_mse: f64,
    /// 0 means the initial weights were never beaten.
    pub best_epoch: usize,
}

/// Trains a network on the `ok` samples; failed evaluations are dropped.
pub fn train(
    samples: &[Sample],
    architecture: &Architecture,
    config: &TrainConfig,
) -> Result<ReluNetwork, SurrogateError> {
    train_with_report(samples, architecture, config).map(|(net, _)| net)
}

pub fn train_with_report(
    samples: &[Sample],
    architecture: &Architecture,
    config: &TrainConfig,
) -> Result<(ReluNetwork, TrainReport), SurrogateError> {
    let (inputs, outputs): (Vec<Vec<f64>>, Vec<Vec<f64>>) = samples
        .iter()
        .filter_map(|s| s.y().map(|y| (s.x.clone(), y.to_vec())))
        .unzip();
    train_rows(&inputs, &outputs, architecture, config)
}

/// Like [`train_with_report`], with inputs normalized by the design box
/// `bounds` instead of the sample statistics. Part of the initial kinks are
/// spread over the whole box, so extrapolation differs between seeds.
pub fn train_in_box(
    samples: &[Sample],
    bounds: &[(f64, f64)],
    architecture: &Architecture,
    config: &TrainConfig,
) -> Result<(ReluNetwork, TrainReport), SurrogateError> {
    let (inputs, outputs): (Vec<Vec<f64>>, Vec<Vec<f64>>) = samples
        .iter()
        .filter_map(|s| s.y().map(|y| (s.x.clone(), y.to_vec())))
        .unzip();
    if let Some(x) = inputs.first() {
        if x.len() != bounds.len() {
            return Err(SurrogateError::ArityMismatch { expected: bounds.len(), got: x.len() });
        }
    }
    let (lower, upper): (Vec<f64>, Vec<f64>) = bounds.iter().copied().unzip();
    fit(&inputs, &outputs, Some(AffineScaler::from_box(&lower, &upper)), architecture, config)
}

/// Same as [`train_with_report`] on raw `(x, y)` rows.
pub fn train_rows(
    inputs: &[Vec<f64>],
    outputs: &[Vec<f64>],
    architecture: &Architecture,
    config: &TrainConfig,
) -> Result<(ReluNetwork, TrainReport), SurrogateError> {
    fit(inputs, outputs, None, architecture, config)
}

fn fit(
    inputs: &[Vec<f64>],
    outputs: &[Vec<f64>],
    input_box: Option<AffineScaler>,
    architecture: &Architecture,
    config: &TrainConfig,
) -> Result<(ReluNetwork, TrainReport), SurrogateError> {
    architecture.validate()?;
    config.validate()?;
    let (fitted, output_scaler) = fit_scalers(inputs, outputs)?;
    let spread = input_box.is_some();
    let input_scaler = input_box.unwrap_or(fitted);
    let n = inputs.len();
    let in_dim = input_scaler.dim();
    let out_dim = output_scaler.dim();

    let z: Vec<f64> = inputs.iter().flat_map(|x| input_scaler.normalize(x)).collect();
    let t: Vec<f64> = outputs.iter().flat_map(|y| output_scaler.normalize(y)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.weight_init_seed);
    let mut widths = vec![in_dim];
    widths.extend_from_slice(&architecture.hidden_layers);
    widths.push(out_dim);
    let mut layers: Vec<Layer> = widths
        .windows(2)
        .map(|w| {
            let bound = (6.0 / (w[0] + w[1]) as f64).sqrt();
            Layer::new(
                w[0],
                w[1],
                (0..w[0] * w[1]).map(|_| rng.random_range(-bound..bound)).collect(),
                vec![0.0; w[1]],
            )
        })
        .collect();
    // first-layer kinks pass through training inputs, or anywhere in the
    // box when one is known
    let first = &mut layers[0];
    for k in 0..first.outputs {
        let row = &first.weights[k * in_dim..(k + 1) * in_dim];
        let at: Vec<f64> = if spread && rng.random_bool(0.5) {
            (0..in_dim).map(|_| rng.random_range(-1.0..=1.0)).collect()
        } else {
            let anchor = rng.random_range(0..n);
            z[anchor * in_dim..(anchor + 1) * in_dim].to_vec()
        };
        let jitter = rng.random_range(-0.1..0.1);
        first.biases[k] = jitter - row.iter().zip(&at).map(|(w, v)| w * v).sum::<f64>();
    }

    let mut trainer = Trainer::new(&layers);
    let initial_mse = trainer.mse(&layers, &z, &t, in_dim, out_dim);
    let mut best_mse = initial_mse;
    let mut best_epoch = 0;
    let mut best_layers = layers.clone();
    let mut order: Vec<usize> = (0..n).collect();
    let batch = n.min(config.batch_size);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            trainer.step(&mut layers, chunk, &z, &t, in_dim, out_dim, config);
        }
        let mse = trainer.mse(&layers, &z, &t, in_dim, out_dim);
        if mse < best_mse {
            best_mse = mse;
            best_epoch = epoch;
            best_layers.clone_from(&layers);
        }
    }

    let network = ReluNetwork::new(best_layers, input_scaler, output_scaler)?;
    Ok((network, TrainReport { initial_mse, best_mse, best_epoch }))
}

/// Adam moments plus scratch buffers for backpropagation.
struct Trainer {
    grad_w: Vec<Vec<f64>>,
    grad_b: Vec<Vec<f64>>,
    m_w: Vec<Vec<f64>>,
    v_w: Vec<Vec<f64>>,
    m_b: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
    /// Post-activation of every layer (index 0 is the input).
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
    steps: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

impl Trainer {
    fn new(layers: &[Layer]) -> Self {
        let zeros_w = || layers.iter().map(|l| vec![0.0; l.weights.len()]).collect::<Vec<_>>();
        let zeros_b = || layers.iter().map(|l| vec![0.0; l.biases.len()]).collect::<Vec<_>>();
        let mut acts = vec![vec![0.0; layers[0].inputs]];
        acts.extend(layers.iter().map(|l| vec![0.0; l.outputs]));
        Self {
            grad_w: zeros_w(),
            grad_b: zeros_b(),
            m_w: zeros_w(),
            v_w: zeros_w(),
            m_b: zeros_b(),
            v_b: zeros_b(),
            deltas: layers.iter().map(|l| vec![0.0; l.outputs]).collect(),
            acts,
            steps: 0,
        }
    }

    fn forward(&mut self, layers: &[Layer], input: &[f64]) {
        self.acts[0].copy_from_slice(input);
        let last = layers.len() - 1;
        for (index, layer) in layers.iter().enumerate() {
            let (before, after) = self.acts.split_at_mut(index + 1);
            let src = &before[index];
            let dst = &mut after[0];
            for k in 0..layer.outputs {
                let row = layer.row(k);
                let mut acc = layer.biases[k];
                for (w, v) in row.iter().zip(src.iter()) {
                    acc += w * v;
                }
                dst[k] = if index < last { acc.max(0.0) } else { acc };
            }
        }
    }

    fn mse(&mut self, layers: &[Layer], z: &[f64], t: &[f64], in_dim: usize, out_dim: usize) -> f64 {
        let n = z.len() / in_dim;
        let mut total = 0.0;
        for i in 0..n {
            self.forward(layers, &z[i * in_dim..(i + 1) * in_dim]);
            let pred = &self.acts[layers.len()];
            for (p, y) in pred.iter().zip(&t[i * out_dim..(i + 1) * out_dim]) {
                total += (p - y) * (p - y);
            }
        }
        total / (n * out_dim) as f64
    }

    #[allow(clippy::too_many_arguments)]
    fn step(
        &mut self,
        layers: &mut [Layer],
        batch: &[usize],
        z: &[f64],
        t: &[f64],
        in_dim: usize,
        out_dim: usize,
        config: &TrainConfig,
    ) {
        for g in self.grad_w.iter_mut().chain(self.grad_b.iter_mut()) {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        let scale = 1.0 / batch.len() as f64;
        let last = layers.len() - 1;
        for &i in batch {
            self.forward(layers, &z[i * in_dim..(i + 1) * in_dim]);
            // d(½·mean squared error)/d(prediction)
            for (k, d) in self.deltas[last].iter_mut().enumerate() {
                *d = (self.acts[last + 1][k] - t[i * out_dim + k]) * scale;
            }
            for l in (0..=last).rev() {
                let layer = &layers[l];
                let input = &self.acts[l];
                let delta = &self.deltas[l];
                let gw = &mut self.grad_w[l];
                let gb = &mut self.grad_b[l];
                for k in 0..layer.outputs {
                    let d = delta[k];
                    if d == 0.0 {
                        continue;
                    }
                    gb[k] += d;
                    let row = &mut gw[k * layer.inputs..(k + 1) * layer.inputs];
                    for (g, v) in row.iter_mut().zip(input.iter()) {
                        *g += d * v;
                    }
                }
                if l > 0 {
                    let (lower, upper) = self.deltas.split_at_mut(l);
                    let prev = &mut lower[l - 1];
                    let delta = &upper[0];
                    prev.iter_mut().for_each(|v| *v = 0.0);
                    for k in 0..layer.outputs {
                        let d = delta[k];
                        if d == 0.0 {
                            continue;
                        }
                        for (p, w) in prev.iter_mut().zip(layer.row(k)) {
                            *p += d * w;
                        }
                    }
                    for (p, a) in prev.iter_mut().zip(self.acts[l].iter()) {
                        if *a <= 0.0 {
                            *p = 0.0;
                        }
                    }
                }
            }
        }

        self.steps += 1;
        let lr = config.learning_rate;
        let c1 = 1.0 - BETA1.powi(self.steps);
        let c2 = 1.0 - BETA2.powi(self.steps);
        for (l, layer) in layers.iter_mut().enumerate() {
            adam(&mut layer.weights, &self.grad_w[l], &mut self.m_w[l], &mut self.v_w[l], lr, c1, c2, config.l2_penalty);
            adam(&mut layer.biases, &self.grad_b[l], &mut self.m_b[l], &mut self.v_b[l], lr, c1, c2, 0.0);
        }
    }
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn adam(params: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], lr: f64, c1: f64, c2: f64, l2: f64) {
    for i in 0..params.len() {
        let g = grad[i] + l2 * params[i];
        m[i] = BETA1 * m[i] + (1.0 - BETA1) * g;
        v[i] = BETA2 * v[i] + (1.0 - BETA2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + EPS);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::EvalResult;

    fn samples_of(f: impl Fn(f64) -> f64, n: usize, lo: f64, hi: f64) -> Vec<Sample> {
        (0..n)
            .map(|i| {
                let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                Sample { x: vec![x], result: EvalResult::ok(vec![f(x)], 0.0) }
            })
            .collect()
    }

    #[test]
    fn fits_linear_target() {
        let samples = samples_of(|x| 2.0 * x, 50, -1.0, 1.0);
        let net = train(&samples, &Architecture::new(vec![10]).unwrap(), &TrainConfig::default()).unwrap();
        let worst = (0..=100)
            .map(|i| {
                let x = -1.0 + 2.0 * i as f64 / 100.0;
                (net.forward(&[x]).unwrap()[0] - 2.0 * x).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst <= 0.05, "max error {worst}");
    }

    #[test]
    fn fits_constant_target() {
        let samples = samples_of(|_| 7.0, 50, -1.0, 1.0);
        let net = train(&samples, &Architecture::new(vec![10]).unwrap(), &TrainConfig::default()).unwrap();
        for i in 0..=100 {
            let x = -1.0 + 2.0 * i as f64 / 100.0;
            let y = net.forward(&[x]).unwrap()[0];
            assert!((y - 7.0).abs() <= 0.01, "{x} -> {y}");
        }
    }

    #[test]
    fn best_checkpoint_never_worse_than_initial() {
        let samples = vec![
            Sample { x: vec![-3.495], result: EvalResult::ok(vec![32.210], 0.0) },
            Sample { x: vec![-2.436], result: EvalResult::ok(vec![25.161], 0.0) },
        ];
        for seed in 0..5 {
            let config = TrainConfig { weight_init_seed: seed, ..TrainConfig::default() };
            let (_, report) = train_with_report(&samples, &Architecture::default_sequential(), &config).unwrap();
            assert!(report.best_mse <= report.initial_mse);
        }
    }

    #[test]
    fn failed_samples_are_dropped() {
        let mut samples = samples_of(|x| x, 2, 0.0, 1.0);
        samples.push(Sample { x: vec![0.5], result: EvalResult::failed("boom", 0.0) });
        let config = TrainConfig { epochs: 5, ..TrainConfig::default() };
        assert!(train(&samples, &Architecture::new(vec![3]).unwrap(), &config).is_ok());
        samples.remove(0);
        assert_eq!(
            train(&samples, &Architecture::new(vec![3]).unwrap(), &config).unwrap_err(),
            SurrogateError::TooFewSamples(1)
        );
    }

    #[test]
    fn same_seed_same_network() {
        let samples = samples_of(|x| x * x, 10, -1.0, 1.0);
        let config = TrainConfig { epochs: 50, weight_init_seed: 4, ..TrainConfig::default() };
        let arch = Architecture::new(vec![5, 3]).unwrap();
        assert_eq!(train(&samples, &arch, &config).unwrap(), train(&samples, &arch, &config).unwrap());
    }

    #[test]
    fn rejects_bad_config() {
        let samples = samples_of(|x| x, 4, 0.0, 1.0);
        let arch = Architecture::new(vec![3]).unwrap();
        for bad in [
            TrainConfig { epochs: 0, ..TrainConfig::default() },
            TrainConfig { learning_rate: 0.0, ..TrainConfig::default() },
            TrainConfig { batch_size: 0, ..TrainConfig::default() },
        ] {
            assert_eq!(train(&samples, &arch, &bad).unwrap_err(), SurrogateError::InvalidTrainConfig);
        }
    }
}
