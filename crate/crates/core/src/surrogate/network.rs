use serde::{Deserialize, Serialize};

use super::scaler::AffineScaler;
use super::SurrogateError;

/// Hidden-layer widths of a fully-connected ReLU regressor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Architecture {
    pub hidden_layers: Vec<usize>,
}

impl Architecture {
    pub const MAX_HIDDEN_LAYERS: usize = 4;

    pub fn new(hidden_layers: Vec<usize>) -> Result<Self, SurrogateError> {
        let arch = Self { hidden_layers };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<(), SurrogateError> {
        let n = self.hidden_layers.len();
        if n == 0 || n > Self::MAX_HIDDEN_LAYERS || self.hidden_layers.contains(&0) {
            return Err(SurrogateError::InvalidArchitecture(self.hidden_layers.clone()));
        }
        Ok(())
    }

    /// Two hidden layers of 35 and 10 neurons.
    pub fn default_sequential() -> Self {
        Self { hidden_layers: vec![35, 10] }
    }

    pub fn hidden_neurons(&self) -> usize {
        self.hidden_layers.iter().sum()
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.hidden_layers.iter().map(|w| w.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

/// Dense layer, `weights` stored row-major as `outputs × inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    pub fn new(inputs: usize, outputs: usize, weights: Vec<f64>, biases: Vec<f64>) -> Self {
        assert_eq!(weights.len(), inputs * outputs, "weight matrix shape");
        assert_eq!(biases.len(), outputs, "bias vector length");
        Self { inputs, outputs, weights, biases }
    }

    #[inline]
    pub fn row(&self, neuron: usize) -> &[f64] {
        &self.weights[neuron * self.inputs..(neuron + 1) * self.inputs]
    }

    /// Pre-activations `W·input + b` into `out`.
    #[inline]
    pub fn affine_into(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for k in 0..self.outputs {
            let row = self.row(k);
            let mut acc = self.biases[k];
            for (w, v) in row.iter().zip(input) {
                acc += w * v;
            }
            out.push(acc);
        }
    }
}

/// ReLU on every hidden layer, identity on the last; inputs and outputs pass
/// through the attached scalers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReluNetwork {
    pub architecture: Architecture,
    pub layers: Vec<Layer>,
    pub input_scaler: AffineScaler,
    pub output_scaler: AffineScaler,
}

impl ReluNetwork {
    pub fn new(
        layers: Vec<Layer>,
        input_scaler: AffineScaler,
        output_scaler: AffineScaler,
    ) -> Result<Self, SurrogateError> {
        if layers.len() < 2 {
            return Err(SurrogateError::InvalidArchitecture(vec![]));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(SurrogateError::LayerChain);
            }
        }
        if input_scaler.dim() != layers[0].inputs || output_scaler.dim() != layers[layers.len() - 1].outputs {
            return Err(SurrogateError::LayerChain);
        }
        if input_scaler.scale.iter().chain(&output_scaler.scale).any(|s| !(*s > 0.0)) {
            return Err(SurrogateError::NonPositiveScale);
        }
        let architecture = Architecture::new(layers[..layers.len() - 1].iter().map(|l| l.outputs).collect())?;
        Ok(Self { architecture, layers, input_scaler, output_scaler })
    }

    pub fn input_arity(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_arity(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn hidden_layers(&self) -> &[Layer] {
        &self.layers[..self.layers.len() - 1]
    }

    pub fn output_layer(&self) -> &Layer {
        &self.layers[self.layers.len() - 1]
    }

    /// Forward pass in normalized units (no scalers).
    pub fn forward_normalized(&self, z: &[f64]) -> Vec<f64> {
        let mut current = z.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (index, layer) in self.layers.iter().enumerate() {
            layer.affine_into(&current, &mut next);
            if index < last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut current, &mut next);
        }
        current
    }

    /// Prediction in raw problem units.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, SurrogateError> {
        if x.len() != self.input_arity() {
            return Err(SurrogateError::ArityMismatch { expected: self.input_arity(), got: x.len() });
        }
        let z = self.input_scaler.normalize(x);
        Ok(self.output_scaler.denormalize(&self.forward_normalized(&z)))
    }

    /// Hidden-layer post-activations for `x`, one vector per hidden layer.
    pub fn hidden_activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut current = self.input_scaler.normalize(x);
        let mut out = Vec::new();
        for layer in self.hidden_layers() {
            let mut next = Vec::new();
            layer.affine_into(&current, &mut next);
            next.iter_mut().for_each(|v| *v = v.max(0.0));
            out.push(next.clone());
            current = next;
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SurrogateError> {
        let parsed: ReluNetwork =
            serde_json::from_str(text).map_err(|e| SurrogateError::Serialization(e.to_string()))?;
        Self::new(parsed.layers, parsed.input_scaler, parsed.output_scaler)
    }
}
