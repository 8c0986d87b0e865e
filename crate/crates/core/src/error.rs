use thiserror::Error;

use crate::ransac::BestAttempt;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid mesh: {0}")]
    Validation(String),

    #[error("degenerate triangle")]
    DegenerateTriangle,

    #[error("face id {id} out of range (mesh has {count} faces)")]
    InvalidFaceId { id: usize, count: usize },

    #[error("angle index was built for a different mesh")]
    IndexMismatch,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Every particle scored `-inf`/NaN: the measurements are inconsistent
    /// with the mesh under the given noise model.
    #[error("particle collapse: no particle has a finite weight")]
    ParticleCollapse,

    #[error("no hypothesis reached the minimum consensus size of {}", .0.required)]
    NoConsensus(Box<BestAttempt>),

    #[error("only {hits} of {wanted} rays hit the scene within the retry budget")]
    RetryBudget { hits: usize, wanted: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
