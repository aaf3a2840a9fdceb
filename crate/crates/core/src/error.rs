use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration field failed validation.
    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: &'static str, reason: String },

    #[error("constellation order {0} is not supported (expected 2 or a square QAM order 4^k)")]
    UnsupportedOrder(usize),

    #[error("noise variance must be positive, got {0}")]
    NonPositiveNoise(f64),

    #[error("channel prior variance must be positive, got {0}")]
    NonPositivePrior(f64),

    #[error("pilot energy is zero")]
    ZeroPilotEnergy,

    #[error("node {node} coincides with the emitter")]
    ZeroDistance { node: usize },

    #[error("cell (q={q}, d={d}) uses a non-QAM constellation; use the generic MML objective instead")]
    NonQamCell { q: usize, d: usize },

    #[error("exhaustive enumeration needs {required} hypotheses, above the cap of {cap}")]
    EnumerationCap { required: f64, cap: usize },

    #[error("objective is non-finite at every grid point")]
    NoFiniteScore,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("unknown estimator `{0}`")]
    UnknownEstimator(String),
}

impl Error {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Config {
            field,
            reason: reason.into(),
        }
    }
}
