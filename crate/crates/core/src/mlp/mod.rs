//! Fully connected ReLU regressor with a linear scalar output.
//!
//! Weights are stored row-major with shape `(out_dim, in_dim)`. The network
//! consumes pre-scaled feature vectors; `input_scale` records the factor that
//! maps raw host quantities (commitment flags and MW) onto those features so
//! the MILP encoding can fold it into the first layer.

mod loss;
mod train;

pub use loss::{loss_gradient, loss_value, LossFamily, LossSpec};
pub use train::{evaluate, train, History, Metrics, Optimizer, TrainConfig};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::FeatureVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub input_dim: usize,
    pub hidden_sizes: Vec<usize>,
}

impl Topology {
    pub fn new(input_dim: usize, hidden_sizes: Vec<usize>) -> Result<Self> {
        let topo = Self {
            input_dim,
            hidden_sizes,
        };
        topo.validate()?;
        Ok(topo)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidArgument("input_dim must be >= 1".into()));
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "need at least one hidden layer with all sizes >= 1, got {:?}",
                self.hidden_sizes
            )));
        }
        Ok(())
    }

    pub fn output_dim(&self) -> usize {
        1
    }

    pub fn hidden_neurons(&self) -> usize {
        self.hidden_sizes.iter().sum()
    }

    /// `(in_dim, out_dim)` of each affine layer, output layer last.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.input_dim];
        dims.extend(&self.hidden_sizes);
        dims.push(1);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Parse `"32"`, `"16,16"` or `"[16,8,8]"`.
    pub fn parse_hidden(text: &str) -> Result<Vec<usize>> {
        let inner = text.trim().trim_start_matches('[').trim_end_matches(']');
        inner
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::InvalidArgument(format!("bad hidden size {s:?}: {e}")))
            })
            .collect()
    }

    pub fn label(&self) -> String {
        let parts: Vec<String> = self.hidden_sizes.iter().map(|s| s.to_string()).collect();
        format!("[{}]", parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            biases: vec![0.0; out_dim],
        }
    }

    #[inline]
    pub fn weight(&self, out: usize, inp: usize) -> f64 {
        self.weights[out * self.in_dim + inp]
    }

    pub fn row(&self, out: usize) -> &[f64] {
        &self.weights[out * self.in_dim..(out + 1) * self.in_dim]
    }

    fn apply(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.out_dim {
            let dot: f64 = self.row(o).iter().zip(input).map(|(w, x)| w * x).sum();
            out.push(dot + self.biases[o]);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub topology: Topology,
    pub layers: Vec<DenseLayer>,
    pub input_scale: Vec<f64>,
}

/// Gradient buffers with the same shapes as [`MlpParams::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<DenseLayer>,
}

impl Gradients {
    pub fn zeros_like(params: &MlpParams) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| DenseLayer::zeros(l.in_dim, l.out_dim))
                .collect(),
        }
    }

    pub fn clear(&mut self) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = 0.0);
            l.biases.iter_mut().for_each(|b| *b = 0.0);
        }
    }

    pub fn scale(&mut self, k: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w *= k);
            l.biases.iter_mut().for_each(|b| *b *= k);
        }
    }
}

impl MlpParams {
    /// Glorot-uniform weights and zero biases.
    pub fn init(topology: Topology, input_scale: Vec<f64>, seed: u64) -> Result<Self> {
        topology.validate()?;
        if input_scale.len() != topology.input_dim {
            return Err(Error::DimensionMismatch {
                expected: topology.input_dim,
                got: input_scale.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = topology
            .layer_shapes()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let mut layer = DenseLayer::zeros(fan_in, fan_out);
                for w in &mut layer.weights {
                    *w = rng.gen_range(-limit..=limit);
                }
                layer
            })
            .collect();
        Ok(Self {
            topology,
            layers,
            input_scale,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.topology.input_dim
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn output_layer(&self) -> &DenseLayer {
        self.layers.last().expect("at least the output layer")
    }

    pub fn check_finite(&self) -> Result<()> {
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.iter().chain(&l.biases).any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteWeights { layer: i });
            }
        }
        Ok(())
    }

    /// Prediction for a raw slice; panics on a length mismatch.
    pub fn predict(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.input_dim(), "input length");
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.apply(&cur, &mut next);
            if i < last {
                next.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur[0]
    }

    /// Hidden-layer pre-activations for input `x`, one vector per layer.
    pub fn pre_activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.layers.len() - 1);
        let mut cur = x.to_vec();
        for layer in &self.layers[..self.layers.len() - 1] {
            let mut z = Vec::new();
            layer.apply(&cur, &mut z);
            cur = z.iter().map(|v| v.max(0.0)).collect();
            out.push(z);
        }
        out
    }

    pub fn activation_pattern(&self, x: &[f64]) -> Vec<Vec<bool>> {
        self.pre_activations(x)
            .into_iter()
            .map(|z| z.into_iter().map(|v| v >= 0.0).collect())
            .collect()
    }

    /// Back-propagate `loss(y, predict(x))` and add its parameter gradient
    /// into `grads`. Returns the loss value.
    pub fn accumulate_gradient(&self, x: &[f64], y: f64, loss: &LossSpec, grads: &mut Gradients) -> f64 {
        let last = self.layers.len() - 1;
        // activations[0] = x, activations[l+1] = output of layer l
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::new();
            layer.apply(activations.last().unwrap(), &mut z);
            if i < last {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            activations.push(z);
        }
        let yhat = activations[last + 1][0];
        let value = loss_value(loss, y, yhat);

        let mut delta = vec![loss_gradient(loss, y, yhat)];
        for l in (0..=last).rev() {
            let layer = &self.layers[l];
            let input = &activations[l];
            let g = &mut grads.layers[l];
            for o in 0..layer.out_dim {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                g.biases[o] += d;
                let row = &mut g.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (gw, &a) in row.iter_mut().zip(input) {
                    *gw += d * a;
                }
            }
            if l == 0 {
                break;
            }
            let mut prev = vec![0.0; layer.in_dim];
            for o in 0..layer.out_dim {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                for (p, &w) in prev.iter_mut().zip(layer.row(o)) {
                    *p += d * w;
                }
            }
            // ReLU derivative: active where the post-activation is positive.
            for (p, &a) in prev.iter_mut().zip(&activations[l]) {
                if a <= 0.0 {
                    *p = 0.0;
                }
            }
            delta = prev;
        }
        value
    }
}

/// Predicted nadir in Hz.
pub fn forward(params: &MlpParams, x: &FeatureVector) -> Result<f64> {
    if x.len() != params.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: params.input_dim(),
            got: x.len(),
        });
    }
    Ok(params.predict(&x.x))
}

/// On-disk model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub topology: Topology,
    /// Row-major `(out_dim, in_dim)` matrix per layer, output layer last.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub input_scale: Vec<f64>,
    pub loss_spec: LossSpec,
    pub train_seed: u64,
}

impl ModelFile {
    pub fn new(params: &MlpParams, loss_spec: LossSpec, train_seed: u64) -> Self {
        Self {
            topology: params.topology.clone(),
            weights: params.layers.iter().map(|l| l.weights.clone()).collect(),
            biases: params.layers.iter().map(|l| l.biases.clone()).collect(),
            input_scale: params.input_scale.clone(),
            loss_spec,
            train_seed,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(Error::from_json_parse)
    }

    pub fn params(&self) -> Result<MlpParams> {
        self.topology.validate()?;
        let shapes = self.topology.layer_shapes();
        if self.weights.len() != shapes.len() || self.biases.len() != shapes.len() {
            return Err(Error::DimensionMismatch {
                expected: shapes.len(),
                got: self.weights.len().min(self.biases.len()),
            });
        }
        let mut layers = Vec::with_capacity(shapes.len());
        for ((&(i, o), w), b) in shapes.iter().zip(&self.weights).zip(&self.biases) {
            if w.len() != i * o || b.len() != o {
                return Err(Error::DimensionMismatch {
                    expected: i * o + o,
                    got: w.len() + b.len(),
                });
            }
            layers.push(DenseLayer {
                in_dim: i,
                out_dim: o,
                weights: w.clone(),
                biases: b.clone(),
            });
        }
        if self.input_scale.len() != self.topology.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.topology.input_dim,
                got: self.input_scale.len(),
            });
        }
        let params = MlpParams {
            topology: self.topology.clone(),
            layers,
            input_scale: self.input_scale.clone(),
        };
        params.check_finite()?;
        Ok(params)
    }
}

/// Per-input scale for a feature vector over `n_generators` units.
pub fn feature_input_scale(n_generators: usize, gamma: f64) -> Vec<f64> {
    let mut s = vec![1.0; 2 * n_generators];
    for v in &mut s[n_generators..] {
        *v = 1.0 / gamma;
    }
    s
}
