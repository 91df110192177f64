use serde::{Deserialize, Serialize};

use super::AlignmentModel;
use crate::decoder::{rank, Candidate};
use crate::scorer::{Scorer, ScorerError};

/// Per-term weights for the combined score. All 1.0 gives the plain sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RerankWeights {
    pub gen: f64,
    pub rec: f64,
    pub asso: f64,
}

impl Default for RerankWeights {
    fn default() -> Self {
        RerankWeights { gen: 1.0, rec: 1.0, asso: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RerankedCandidate {
    pub candidate: Candidate,
    /// `log p(c | x)` from the decoder.
    pub gen: f64,
    /// `log p(x | c)`.
    pub rec: f64,
    pub asso: f64,
    pub total: f64,
}

/// `gen + rec + asso`, each term scaled by its weight.
pub fn aggregate(gen: f64, rec: f64, asso: f64, w: &RerankWeights) -> f64 {
    w.gen * gen + w.rec * rec + w.asso * asso
}

pub fn association_score(m: &AlignmentModel, x: &[String], c: &[String]) -> f64 {
    m.association(x, c)
}

/// Probability of regenerating the input from the canonical utterance.
pub fn reconstruction_score(scorer: &dyn Scorer, x: &[String], c: &[String]) -> Result<f64, ScorerError> {
    scorer.score_sequence(c, x)
}

/// Scores each candidate and sorts by total, best first. Ties fall back to
/// the decoder's ordering: shorter utterance, then token order.
pub fn rerank(
    x: &[String],
    candidates: Vec<Candidate>,
    scorer: &dyn Scorer,
    m: &AlignmentModel,
    w: &RerankWeights,
) -> Result<Vec<RerankedCandidate>, ScorerError> {
    let mut out = candidates
        .into_iter()
        .map(|candidate| {
            let gen = candidate.logp;
            let rec = reconstruction_score(scorer, x, &candidate.utterance)?;
            let asso = association_score(m, x, &candidate.utterance);
            let total = aggregate(gen, rec, asso, w);
            Ok(RerankedCandidate { candidate, gen, rec, asso, total })
        })
        .collect::<Result<Vec<_>, ScorerError>>()?;
    out.sort_by(|a, b| rank(a.total, &a.candidate.utterance, b.total, &b.candidate.utterance));
    Ok(out)
}
