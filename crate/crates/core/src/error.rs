use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid system spec:\n  - {}", .0.join("\n  - "))]
    Validation(Vec<String>),

    #[error("degenerate contingency: {0}")]
    DegenerateContingency(String),

    #[error("trace did not converge")]
    Unconverged,

    #[error("steady-state frequency undefined: damping plus governor gain is zero")]
    ZeroStiffness,

    #[error("sampling failed after {attempts} rejected draws")]
    SamplingFailure { attempts: usize },

    #[error("only {got} converged samples, need at least {need}")]
    TooFewSamples { got: usize, need: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },

    #[error("R^2 undefined: labels have zero variance")]
    ZeroVariance,

    #[error("non-finite network parameter in layer {layer}")]
    NonFiniteWeights { layer: usize },

    #[error("LP numerical failure: {0}")]
    Numerical(String),

    #[error("variable {name} = {value} is not integral")]
    Integrality { name: String, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("lp format: line {line}: {message}")]
    LpFormat { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Parse error with the location moved out of serde's message.
    pub(crate) fn from_json_parse(e: serde_json::Error) -> Self {
        let text = e.to_string();
        let suffix = format!(" at line {} column {}", e.line(), e.column());
        Error::Parse {
            line: e.line(),
            column: e.column(),
            message: text.strip_suffix(&suffix).unwrap_or(&text).to_string(),
        }
    }
}
