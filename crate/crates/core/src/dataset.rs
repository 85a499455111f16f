//! Operating-point sampling, nadir labelling and train/test packaging.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::freq_sim::{nadir, simulate_contingency, SimConfig};
use crate::system::{big_m_gamma, OperatingPoint, SystemSpec};

pub const MAX_REJECTIONS: usize = 1000;
pub const MIN_CONVERGED_SAMPLES: usize = 10;
pub const TRAIN_FRACTION_NUM: usize = 4;
pub const TRAIN_FRACTION_DEN: usize = 5;

/// Network input: commitment flags followed by the Γ-scaled output of the
/// largest unit placed in that unit's slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub x: Vec<f64>,
}

impl FeatureVector {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn num_generators(&self) -> usize {
        self.x.len() / 2
    }
}

pub fn build_feature_vector(op: &OperatingPoint, gamma: f64) -> FeatureVector {
    let n = op.u.len();
    let mut x = vec![0.0; 2 * n];
    for (g, &on) in op.u.iter().enumerate() {
        x[g] = if on { 1.0 } else { 0.0 };
    }
    let gmax = op.largest_unit();
    x[n + gmax] = op.p[gmax] / gamma;
    FeatureVector { x }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: FeatureVector,
    pub label_nadir: f64,
    /// Absent when the sample was read back from CSV.
    pub source_op: Option<OperatingPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub split_seed: u64,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub gamma: f64,
}

/// Sidecar metadata written next to the dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub spec_hash: String,
    pub seed: u64,
    pub gamma: f64,
    pub n_requested: usize,
    pub n_samples: usize,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.features.len())
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        match split {
            Split::Train => self.train_indices.clone(),
            Split::Test => self.test_indices.clone(),
            Split::All => (0..self.samples.len()).collect(),
        }
    }

    /// Assemble from already-labelled samples with a seeded 80/20 split.
    pub fn from_samples(samples: Vec<Sample>, split_seed: u64, gamma: f64) -> Self {
        let (train_indices, test_indices) = split_indices(samples.len(), split_seed);
        Self {
            samples,
            split_seed,
            train_indices,
            test_indices,
            gamma,
        }
    }

    pub fn to_csv(&self) -> String {
        let n = self.input_dim() / 2;
        let mut header: Vec<String> = (1..=n).map(|g| format!("u_{g}")).collect();
        header.extend((1..=n).map(|g| format!("xp_{g}")));
        header.push("nadir_hz".to_string());
        let mut out = header.join(",");
        out.push('\n');
        for s in &self.samples {
            for (i, v) in s.features.x.iter().enumerate() {
                if i < n {
                    out.push_str(if *v > 0.5 { "1" } else { "0" });
                } else {
                    out.push_str(&v.to_string());
                }
                out.push(',');
            }
            out.push_str(&s.label_nadir.to_string());
            out.push('\n');
        }
        out
    }

    pub fn meta(&self, spec: &SystemSpec, n_requested: usize) -> DatasetMeta {
        DatasetMeta {
            spec_hash: spec_hash(spec),
            seed: self.split_seed,
            gamma: self.gamma,
            n_requested,
            n_samples: self.samples.len(),
            train_indices: self.train_indices.clone(),
            test_indices: self.test_indices.clone(),
        }
    }

    /// Read a dataset back from its CSV and sidecar metadata.
    pub fn from_csv(csv: &str, meta: &DatasetMeta) -> Result<Self> {
        let mut lines = csv.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| Error::Parse {
            line: 1,
            column: 1,
            message: "empty dataset file".into(),
        })?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 3 || cols.len() % 2 == 0 || cols.last() != Some(&"nadir_hz") {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: format!("unexpected header {header:?}"),
            });
        }
        let mut samples = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let vals = line
                .split(',')
                .enumerate()
                .map(|(c, v)| {
                    v.trim().parse::<f64>().map_err(|e| Error::Parse {
                        line: i + 1,
                        column: c + 1,
                        message: format!("{v:?}: {e}"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if vals.len() != cols.len() {
                return Err(Error::Parse {
                    line: i + 1,
                    column: 1,
                    message: format!("expected {} fields, got {}", cols.len(), vals.len()),
                });
            }
            let (x, label) = vals.split_at(vals.len() - 1);
            samples.push(Sample {
                features: FeatureVector { x: x.to_vec() },
                label_nadir: label[0],
                source_op: None,
            });
        }
        let covered = meta.train_indices.len() + meta.test_indices.len();
        if covered != samples.len()
            || meta
                .train_indices
                .iter()
                .chain(&meta.test_indices)
                .any(|&i| i >= samples.len())
        {
            return Err(Error::InvalidArgument(
                "sidecar split indices do not match the dataset rows".into(),
            ));
        }
        Ok(Self {
            samples,
            split_seed: meta.seed,
            train_indices: meta.train_indices.clone(),
            test_indices: meta.test_indices.clone(),
            gamma: meta.gamma,
        })
    }
}

pub fn spec_hash(spec: &SystemSpec) -> String {
    let canonical = serde_json::to_string(spec).expect("spec serializes");
    Sha256::digest(canonical.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn split_indices(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SPLIT_SALT);
    idx.shuffle(&mut rng);
    let n_train = n * TRAIN_FRACTION_NUM / TRAIN_FRACTION_DEN;
    let test = idx.split_off(n_train);
    (idx, test)
}

/// Keeps the split stream distinct from the sampling stream of the same seed.
const SPLIT_SALT: u64 = 0x5eed_5917;

/// Draw `n` random operating points (deterministic in `seed`).
pub fn sample_operating_points(spec: &SystemSpec, n: usize, seed: u64) -> Result<Vec<OperatingPoint>> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| draw_point(spec, &mut rng)).collect()
}

fn draw_point(spec: &SystemSpec, rng: &mut ChaCha8Rng) -> Result<OperatingPoint> {
    let gens = &spec.generators;
    let cap = spec.total_capacity();
    for _ in 0..MAX_REJECTIONS {
        let load = rng.gen_range(0.4..=1.0) * cap;
        let u: Vec<bool> = gens.iter().map(|_| rng.gen_bool(0.5)).collect();
        let count = u.iter().filter(|&&b| b).count();
        let (lo, hi) = gens
            .iter()
            .zip(&u)
            .filter(|(_, &on)| on)
            .fold((0.0, 0.0), |(lo, hi), (g, _)| (lo + g.p_min, hi + g.p_max));
        if count < 2 || hi < load || lo > load {
            continue;
        }
        let jitter: Vec<f64> = gens.iter().map(|_| rng.gen_range(-0.5..=0.5)).collect();
        let p = split_load(spec, &u, load, &jitter);
        return Ok(OperatingPoint { u, p });
    }
    Err(Error::SamplingFailure {
        attempts: MAX_REJECTIONS,
    })
}

/// Share `load` over committed units: start at p_min, then distribute the
/// remainder proportionally to jittered headroom, capping at p_max and
/// redistributing what the capped units cannot take.
fn split_load(spec: &SystemSpec, u: &[bool], load: f64, jitter: &[f64]) -> Vec<f64> {
    let gens = &spec.generators;
    let mut p: Vec<f64> = gens
        .iter()
        .zip(u)
        .map(|(g, &on)| if on { g.p_min } else { 0.0 })
        .collect();
    let mut remaining = load - p.iter().sum::<f64>();
    let mut open: Vec<usize> = (0..gens.len())
        .filter(|&g| u[g] && gens[g].p_max > gens[g].p_min)
        .collect();
    while remaining > 0.0 && !open.is_empty() {
        let weights: Vec<f64> = open
            .iter()
            .map(|&g| (gens[g].p_max - gens[g].p_min) * (1.0 + jitter[g]))
            .collect();
        let total: f64 = weights.iter().sum();
        let saturated: Vec<usize> = open
            .iter()
            .zip(&weights)
            .filter(|(&g, &w)| p[g] + remaining * w / total >= gens[g].p_max)
            .map(|(&g, _)| g)
            .collect();
        if saturated.is_empty() {
            for (&g, &w) in open.iter().zip(&weights) {
                p[g] += remaining * w / total;
            }
            break;
        }
        for &g in &saturated {
            remaining -= gens[g].p_max - p[g];
            p[g] = gens[g].p_max;
        }
        open.retain(|g| !saturated.contains(g));
    }
    for (g, gen) in gens.iter().enumerate() {
        if u[g] {
            p[g] = p[g].clamp(gen.p_min, gen.p_max);
        }
    }
    p
}

/// Sample, simulate and label; unconverged trajectories are dropped.
pub fn generate_dataset(spec: &SystemSpec, n: usize, seed: u64, cfg: &SimConfig) -> Result<Dataset> {
    cfg.validate(spec)?;
    let points = sample_operating_points(spec, n, seed)?;
    let gamma = big_m_gamma(spec);
    let labelled: Vec<Option<Sample>> = points
        .into_par_iter()
        .map(|op| {
            let trace = simulate_contingency(spec, &op, cfg)?;
            if !trace.converged {
                return Ok(None);
            }
            Ok(Some(Sample {
                features: build_feature_vector(&op, gamma),
                label_nadir: nadir(&trace)?,
                source_op: Some(op),
            }))
        })
        .collect::<Result<_>>()?;
    let samples: Vec<Sample> = labelled.into_iter().flatten().collect();
    if samples.len() < MIN_CONVERGED_SAMPLES {
        return Err(Error::TooFewSamples {
            got: samples.len(),
            need: MIN_CONVERGED_SAMPLES,
        });
    }
    Ok(Dataset::from_samples(samples, seed, gamma))
}
