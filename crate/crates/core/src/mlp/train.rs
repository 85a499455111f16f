use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{feature_input_scale, loss_value, Gradients, LossSpec, MlpParams, Topology};
use crate::dataset::{Dataset, Split};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 600,
            batch_size: 32,
            learning_rate: 3e-3,
            seed: 0,
            optimizer: Optimizer::Adam,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(
                "epochs, batch_size and learning_rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Mean loss per epoch. `test` is empty when the dataset has no test split.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct History {
    pub train: Vec<f64>,
    pub test: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub r2: f64,
    pub conservative_proportion: f64,
}

struct AdamState {
    m: Gradients,
    v: Gradients,
    step: i32,
}

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

fn mean_loss(params: &MlpParams, data: &Dataset, idx: &[usize], loss: &LossSpec) -> f64 {
    let total: f64 = idx
        .iter()
        .map(|&i| {
            let s = &data.samples[i];
            loss_value(loss, s.label_nadir, params.predict(&s.features.x))
        })
        .sum();
    total / idx.len() as f64
}

/// Mini-batch gradient descent on the mean loss. The output layer starts at
/// zero weights and the mean training label as bias, so the initial
/// prediction is the label mean rather than Hz-scale noise.
pub fn train(
    data: &Dataset,
    hidden_sizes: &[usize],
    loss: &LossSpec,
    cfg: &TrainConfig,
) -> Result<(MlpParams, History)> {
    cfg.validate()?;
    loss.validate()?;
    if data.train_indices.is_empty() {
        return Err(Error::InvalidArgument("training split is empty".into()));
    }
    let input_dim = data.input_dim();
    let topology = Topology::new(input_dim, hidden_sizes.to_vec())?;
    let scale = feature_input_scale(input_dim / 2, data.gamma);
    let mut params = MlpParams::init(topology, scale, cfg.seed)?;
    let label_mean = data
        .train_indices
        .iter()
        .map(|&i| data.samples[i].label_nadir)
        .sum::<f64>()
        / data.train_indices.len() as f64;
    let out = params.layers.last_mut().unwrap();
    out.weights.iter_mut().for_each(|w| *w = 0.0);
    out.biases[0] = label_mean;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut order = data.train_indices.clone();
    let mut grads = Gradients::zeros_like(&params);
    let mut adam = AdamState {
        m: Gradients::zeros_like(&params),
        v: Gradients::zeros_like(&params),
        step: 0,
    };
    let mut history = History::default();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            grads.clear();
            for &i in batch {
                let s = &data.samples[i];
                params.accumulate_gradient(&s.features.x, s.label_nadir, loss, &mut grads);
            }
            grads.scale(1.0 / batch.len() as f64);
            match cfg.optimizer {
                Optimizer::Sgd => sgd_step(&mut params, &grads, cfg.learning_rate),
                Optimizer::Adam => adam_step(&mut params, &grads, &mut adam, cfg.learning_rate),
            }
        }
        let train_loss = mean_loss(&params, data, &data.train_indices, loss);
        if !train_loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        history.train.push(train_loss);
        if !data.test_indices.is_empty() {
            history.test.push(mean_loss(&params, data, &data.test_indices, loss));
        }
    }
    params.check_finite()?;
    Ok((params, history))
}

fn sgd_step(params: &mut MlpParams, grads: &Gradients, lr: f64) {
    for (l, g) in params.layers.iter_mut().zip(&grads.layers) {
        for (w, gw) in l.weights.iter_mut().zip(&g.weights) {
            *w -= lr * gw;
        }
        for (b, gb) in l.biases.iter_mut().zip(&g.biases) {
            *b -= lr * gb;
        }
    }
}

fn adam_step(params: &mut MlpParams, grads: &Gradients, state: &mut AdamState, lr: f64) {
    state.step += 1;
    let bc1 = 1.0 - BETA1.powi(state.step);
    let bc2 = 1.0 - BETA2.powi(state.step);
    let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        for k in 0..p.len() {
            m[k] = BETA1 * m[k] + (1.0 - BETA1) * g[k];
            v[k] = BETA2 * v[k] + (1.0 - BETA2) * g[k] * g[k];
            let mh = m[k] / bc1;
            let vh = v[k] / bc2;
            p[k] -= lr * mh / (vh.sqrt() + ADAM_EPS);
        }
    };
    for (((l, g), m), v) in params
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(&mut state.m.layers)
        .zip(&mut state.v.layers)
    {
        update(&mut l.weights, &g.weights, &mut m.weights, &mut v.weights);
        update(&mut l.biases, &g.biases, &mut m.biases, &mut v.biases);
    }
}

pub fn evaluate(params: &MlpParams, data: &Dataset, split: Split) -> Result<Metrics> {
    let idx = data.indices(split);
    if idx.is_empty() {
        return Err(Error::InvalidArgument(format!("{split:?} split is empty")));
    }
    let n = idx.len() as f64;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut conservative = 0usize;
    let mean = idx.iter().map(|&i| data.samples[i].label_nadir).sum::<f64>() / n;
    let mut var_sum = 0.0;
    for &i in &idx {
        let s = &data.samples[i];
        if s.features.len() != params.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: params.input_dim(),
                got: s.features.len(),
            });
        }
        let yhat = params.predict(&s.features.x);
        let err = yhat - s.label_nadir;
        abs_sum += err.abs();
        sq_sum += err * err;
        var_sum += (s.label_nadir - mean).powi(2);
        if yhat <= s.label_nadir {
            conservative += 1;
        }
    }
    if var_sum == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(Metrics {
        mae: abs_sum / n,
        r2: 1.0 - sq_sum / var_sum,
        conservative_proportion: conservative as f64 / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{FeatureVector, Sample};
    use crate::mlp::LossFamily;
    use rand::Rng;

    fn synthetic(n: usize, label: impl Fn(&[f64]) -> f64, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..n)
            .map(|_| {
                let mut x = vec![0.0; 6];
                for v in &mut x[..3] {
                    *v = if rng.gen_bool(0.6) { 1.0 } else { 0.0 };
                }
                let g = rng.gen_range(0..3);
                x[3 + g] = rng.gen_range(0.2..1.0);
                let y = label(&x);
                Sample {
                    features: FeatureVector { x },
                    label_nadir: y,
                    source_op: None,
                }
            })
            .collect();
        Dataset::from_samples(samples, seed, 303.0)
    }

    #[test]
    fn fits_constant_labels() {
        let data = synthetic(100, |_| 49.37, 1);
        for loss in [LossSpec::symmetric(LossFamily::L2), LossSpec::with_ratio(LossFamily::L1, 5.0)] {
            let cfg = TrainConfig {
                epochs: 30,
                ..TrainConfig::default()
            };
            let (p, _) = train(&data, &[8], &loss, &cfg).unwrap();
            for &i in &data.train_indices {
                let yhat = p.predict(&data.samples[i].features.x);
                assert!((yhat - 49.37).abs() < 0.01, "{yhat}");
            }
        }
    }

    #[test]
    fn training_is_deterministic() {
        let data = synthetic(80, |x| 49.0 + 0.3 * x[0] - 0.5 * x[3], 2);
        let cfg = TrainConfig {
            epochs: 5,
            ..TrainConfig::default()
        };
        let loss = LossSpec::symmetric(LossFamily::L2);
        let (a, ha) = train(&data, &[6, 4], &loss, &cfg).unwrap();
        let (b, hb) = train(&data, &[6, 4], &loss, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha, hb);
        assert_eq!(ha.train.len(), 5);
        assert_eq!(ha.test.len(), 5);
    }

    #[test]
    fn learns_linear_target() {
        // Nonnegative inputs and a positive-slope target: representable exactly
        // by ReLU units that never switch off.
        let f = |x: &[f64]| 49.0 + 0.2 * x[0] + 0.1 * x[1] + 0.3 * x[2] + 0.4 * x[3] + 0.25 * x[4] + 0.15 * x[5];
        let data = synthetic(400, f, 3);
        let cfg = TrainConfig {
            epochs: 400,
            learning_rate: 3e-3,
            ..TrainConfig::default()
        };
        let (p, _) = train(&data, &[4], &LossSpec::symmetric(LossFamily::L2), &cfg).unwrap();
        let m = evaluate(&p, &data, Split::Test).unwrap();
        assert!(m.mae < 0.01, "{m:?}");
    }

    #[test]
    fn metrics_examples() {
        let data = synthetic(50, |x| 49.0 + x[0] * 0.5 + x[4], 4);
        // Output = exactly the label function via a hand-built network.
        let topo = Topology::new(6, vec![1]).unwrap();
        let mut p = MlpParams::init(topo, vec![1.0; 6], 0).unwrap();
        p.layers[0].weights = vec![0.5, 0.0, 0.0, 0.0, 1.0, 0.0];
        p.layers[0].biases = vec![0.0];
        p.layers[1].weights = vec![1.0];
        p.layers[1].biases = vec![49.0];
        let m = evaluate(&p, &data, Split::All).unwrap();
        assert!(m.mae < 1e-12);
        assert!((m.r2 - 1.0).abs() < 1e-12);
        assert_eq!(m.conservative_proportion, 1.0);

        p.layers[1].biases = vec![48.9];
        let m = evaluate(&p, &data, Split::All).unwrap();
        assert!((m.mae - 0.1).abs() < 1e-9);
        assert_eq!(m.conservative_proportion, 1.0);

        let idx = data.indices(Split::All);
        let mean = idx.iter().map(|&i| data.samples[i].label_nadir).sum::<f64>() / idx.len() as f64;
        p.layers[1].weights = vec![0.0];
        p.layers[1].biases = vec![mean];
        let m = evaluate(&p, &data, Split::All).unwrap();
        assert!(m.r2.abs() < 1e-9, "{}", m.r2);
    }

    #[test]
    fn zero_variance_is_an_error() {
        let data = synthetic(20, |_| 49.5, 5);
        let p = crate::mlp::tests::random_params(6, &[2], 0);
        assert!(matches!(evaluate(&p, &data, Split::All), Err(Error::ZeroVariance)));
    }

    #[test]
    fn divergence_detected() {
        let data = synthetic(60, |x| 49.0 + x[3], 6);
        let cfg = TrainConfig {
            epochs: 50,
            learning_rate: 1e6,
            optimizer: Optimizer::Sgd,
            ..TrainConfig::default()
        };
        let r = train(&data, &[8, 8], &LossSpec::symmetric(LossFamily::L2), &cfg);
        assert!(matches!(r, Err(Error::Divergence { .. })), "{r:?}");
    }
}
