//! Paraphrase-model scoring contract used by the decoders and the reranker.
//!
//! Scores are word-level log-probabilities `log P(w | source, prefix)`.
//! Built-in scorers are deterministic and normalized; the remote client
//! speaks newline-delimited JSON to an external model server.

mod bigram;
mod remote;
mod uniform;

pub use bigram::{BigramConfig, BigramScorer};
pub use remote::RemoteScorer;
pub use uniform::UniformScorer;

use std::collections::HashSet;

use serde::Serialize;
use thiserror::Error;

/// End-of-sentence token on the wire and in candidate lists.
pub const EOS: &str = "</s>";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScorerError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("remote error: {0}")]
    Remote(String),
    #[error("protocol: {0}")]
    Protocol(String),
    #[error("non-finite score from remote scorer")]
    NonFinite,
    #[error("capability not supported: {0}")]
    Unsupported(&'static str),
    #[error("bad request: {0}")]
    BadRequest(String),
}

/// Candidates for the next word given the source and a canonical prefix.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScoreRequest<'a> {
    pub source: &'a [String],
    pub prefix: &'a [String],
    pub candidates: &'a [String],
}

impl<'a> ScoreRequest<'a> {
    pub fn new(source: &'a [String], prefix: &'a [String], candidates: &'a [String]) -> Result<Self, ScorerError> {
        if candidates.is_empty() {
            return Err(ScorerError::BadRequest("no candidates".into()));
        }
        let mut seen = HashSet::with_capacity(candidates.len());
        if let Some(dup) = candidates.iter().find(|c| !seen.insert(c.as_str())) {
            return Err(ScorerError::BadRequest(format!("duplicate candidate {dup:?}")));
        }
        Ok(ScoreRequest { source, prefix, candidates })
    }
}

/// `logprobs[i]` scores `candidates[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreResponse {
    pub logprobs: Vec<f64>,
}

pub trait Scorer: Send + Sync {
    fn score_next(&self, req: &ScoreRequest<'_>) -> Result<ScoreResponse, ScorerError>;

    /// Whether [`EOS`] is part of the scored event space. When it is,
    /// sequence scores include a final end-of-sentence factor.
    fn models_termination(&self) -> bool {
        false
    }

    /// `log P(target | source)` by the chain rule over [`score_next`](Self::score_next).
    fn score_sequence(&self, source: &[String], target: &[String]) -> Result<f64, ScorerError> {
        if target.is_empty() {
            return Err(ScorerError::BadRequest("empty target".into()));
        }
        let mut total = 0.0;
        for i in 0..target.len() {
            let cand = std::slice::from_ref(&target[i]);
            total += self.score_next(&ScoreRequest::new(source, &target[..i], cand)?)?.logprobs[0];
        }
        if self.models_termination() {
            let eos = [EOS.to_owned()];
            total += self.score_next(&ScoreRequest::new(source, target, &eos)?)?.logprobs[0];
        }
        Ok(total)
    }

    fn generate_paraphrases(&self, _source: &[String], _n: usize) -> Result<Vec<Vec<String>>, ScorerError> {
        Err(ScorerError::Unsupported("generate"))
    }

    fn capabilities(&self) -> Vec<String> {
        vec!["score".to_owned()]
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn score_next(&self, req: &ScoreRequest<'_>) -> Result<ScoreResponse, ScorerError> {
        (**self).score_next(req)
    }
    fn models_termination(&self) -> bool {
        (**self).models_termination()
    }
    fn score_sequence(&self, source: &[String], target: &[String]) -> Result<f64, ScorerError> {
        (**self).score_sequence(source, target)
    }
    fn generate_paraphrases(&self, source: &[String], n: usize) -> Result<Vec<Vec<String>>, ScorerError> {
        (**self).generate_paraphrases(source, n)
    }
    fn capabilities(&self) -> Vec<String> {
        (**self).capabilities()
    }
}
