use thiserror::Error;

/// Errors raised across the calibration pipeline.
#[derive(Debug, Error)]
pub enum CalibError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("kernel matrix not positive definite after nugget escalation to {nugget:e}")]
    IllConditioned { nugget: f64 },

    #[error("log-density is -inf at the initial point {0:?}")]
    InfeasibleStart(Vec<f64>),

    #[error("chain stuck: {rejections} consecutive rejections in dimension {dim} (last accepted state {state:?})")]
    ChainStuck {
        rejections: usize,
        dim: usize,
        state: Vec<f64>,
    },

    #[error("importance weights vanish for hyperparameter sample {row}: support mismatch")]
    DegenerateWeights { row: usize },

    #[error("zero truth value at index {0}: relative error undefined")]
    ZeroTruth(usize),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl CalibError {
    /// True for failures that stem from numerics rather than user input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            CalibError::IllConditioned { .. }
                | CalibError::InfeasibleStart(_)
                | CalibError::ChainStuck { .. }
                | CalibError::DegenerateWeights { .. }
                | CalibError::ZeroTruth(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, CalibError>;
