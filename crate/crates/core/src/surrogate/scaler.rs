use serde::{Deserialize, Serialize};

use super::SurrogateError;

/// Per-coordinate affine map `z = (v − shift) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineScaler {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl AffineScaler {
    pub fn identity(dim: usize) -> Self {
        Self { shift: vec![0.0; dim], scale: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    /// Zero-mean, unit-variance map fitted on `rows`. Constant columns keep
    /// scale 1.
    pub fn fit<'a, I>(rows: I, dim: usize) -> Self
    where
        I: IntoIterator<Item = &'a [f64]> + Clone,
    {
        let mut count = 0usize;
        let mut mean = vec![0.0; dim];
        for row in rows.clone() {
            count += 1;
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        let n = count.max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for row in rows {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 * (1.0 + sd) && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { shift: mean, scale }
    }

    /// Maps the box `[lower, upper]` onto `[−1, 1]`; degenerate sides keep
    /// scale 1.
    pub fn from_box(lower: &[f64], upper: &[f64]) -> Self {
        let shift = lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)).collect();
        let scale = lower
            .iter()
            .zip(upper)
            .map(|(l, u)| {
                let half = 0.5 * (u - l);
                if half > 0.0 && half.is_finite() {
                    half
                } else {
                    1.0
                }
            })
            .collect();
        Self { shift, scale }
    }

    pub fn normalize(&self, v: &[f64]) -> Vec<f64> {
        v.iter().zip(&self.shift).zip(&self.scale).map(|((v, s), k)| (v - s) / k).collect()
    }

    pub fn denormalize(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.shift).zip(&self.scale).map(|((z, s), k)| z * k + s).collect()
    }
}

/// Fits input and output scalers on the `(x, y)` training rows.
pub fn fit_scalers(
    inputs: &[Vec<f64>],
    outputs: &[Vec<f64>],
) -> Result<(AffineScaler, AffineScaler), SurrogateError> {
    if inputs.len() < 2 || outputs.len() != inputs.len() {
        return Err(SurrogateError::TooFewSamples(inputs.len().min(outputs.len())));
    }
    let in_dim = inputs[0].len();
    let out_dim = outputs[0].len();
    Ok((
        AffineScaler::fit(inputs.iter().map(Vec::as_slice), in_dim),
        AffineScaler::fit(outputs.iter().map(Vec::as_slice), out_dim),
    ))
}
