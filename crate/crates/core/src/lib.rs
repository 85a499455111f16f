//! Frequency-secure unit commitment with neural-network nadir constraints.
//!
//! The pipeline: simulate post-contingency frequency on sampled operating
//! points ([`dataset`]), fit a ReLU network to the nadir ([`mlp`]), encode the
//! network as mixed-integer constraints ([`encode`]) inside a unit-commitment
//! model ([`uc`]), and solve it with the built-in branch and bound
//! ([`solver`]).

pub mod dataset;
pub mod encode;
pub mod error;
pub mod experiments;
pub mod freq_sim;
pub mod milp;
pub mod mlp;
pub mod solver;
pub mod system;
pub mod uc;

pub use dataset::{build_feature_vector, generate_dataset, Dataset, FeatureVector, Sample, Split};
pub use error::{Error, Result};
pub use freq_sim::{nadir, simulate_contingency, FrequencyTrace, SimConfig};
pub use milp::{export_lp_format, parse_lp_format, MilpModel, Sense, VarId, VarKind};
pub use mlp::{evaluate, train, LossFamily, LossSpec, Metrics, TrainConfig};
pub use mlp::{forward, MlpParams, ModelFile, Topology};
pub use solver::{solve_lp, solve_milp, LpResult, MilpResult, MilpStatus, SolveConfig};
pub use system::{big_m_gamma, load_system_spec, GeneratorSpec, OperatingPoint, SystemSpec};
