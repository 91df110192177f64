//! Word alignment between an input utterance and a canonical utterance,
//! and the reranker that combines generation, reconstruction and
//! association scores.

mod ibm2;
mod rerank;

pub use ibm2::{load_pairs, train_ibm2, AlignmentModel, Direction, Pair, TrainLog, FLOOR, MAX_BUCKET, MODEL_VERSION};
pub use rerank::{aggregate, association_score, reconstruction_score, rerank, RerankWeights, RerankedCandidate};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("empty training corpus")]
    EmptyCorpus,
    #[error("training needs at least one epoch")]
    NoEpochs,
    #[error("pair {index} has an empty side")]
    EmptySide { index: usize },
    #[error("line {line}: {message}")]
    PairSyntax { line: usize, message: String },
    #[error("model version {found:?} is not {expected:?}")]
    Version { found: String, expected: &'static str },
    #[error("malformed model: {0}")]
    Model(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
