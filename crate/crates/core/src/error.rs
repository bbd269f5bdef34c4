use genboot_tensor::TensorError;
use thiserror::Error;

use crate::gan::TrainingTrace;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite gradient in parameter block `{block}`")]
    NonFiniteGradient { block: String },

    #[error("non-finite loss at training step {step}")]
    NonFiniteLoss { step: i64, trace: Box<TrainingTrace> },

    #[error("path of length {len} is too short: {reason}")]
    TooShort { len: usize, reason: String },

    #[error("constant path has zero variance")]
    ZeroVariance,

    #[error("least-squares denominator is zero")]
    ZeroDenominator,

    #[error("AR(1) coefficient {0} is not stationary (need |phi| < 1)")]
    NonStationary(f64),

    #[error("statistic failed on resample {index}: {source}")]
    Statistic {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("malformed CSV: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
