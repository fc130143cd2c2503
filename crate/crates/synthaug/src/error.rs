use thiserror::Error;

/// Errors surfaced by the engine. Parse errors carry the byte offset of the
/// first malformed field so corrupt files can be diagnosed directly.
#[derive(Debug, Error)]
pub enum Error {
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite gradient in parameter block `{block}`")]
    NonFiniteGradient { block: String },

    #[error("langevin chain diverged at step {step} (|z| = {norm:.3e})")]
    ChainDiverged { step: usize, norm: f64 },

    #[error("training diverged at iteration {iteration}: {detail}")]
    TrainingDiverged { iteration: usize, detail: String },

    #[error("parse error at byte {offset}: {detail}")]
    Parse { offset: u64, detail: String },

    #[error("instance too large for exhaustive search: {n} candidates (limit {limit})")]
    InstanceTooLarge { n: usize, limit: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
