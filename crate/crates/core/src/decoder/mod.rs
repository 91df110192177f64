//! Synchronous decoding: beam search over canonical utterances that only
//! ever emits grammar-legal prefixes, so every finished hypothesis carries
//! its derivation and therefore its logical form.
//!
//! Two search units are offered. [`decode_rule_level`] expands whole
//! grammar rules; [`decode_word_level`] emits single words masked by an
//! LR(1) automaton.

mod rule;
mod word;

pub use rule::{decode_rule_level, decode_rule_level_traced, expand, Hypothesis};
pub use word::{decode_word_level, decode_word_level_traced};

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::grammar::{Derivation, GrammarError};
use crate::scorer::{ScoreRequest, Scorer, ScorerError};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecodeParams {
    pub beam_size: usize,
    /// Budget of canonical tokens per utterance.
    pub max_len: usize,
    /// Depth of the inner search for rules with a non-terminal before a word.
    pub max_depth: usize,
    pub n_best: usize,
    /// Renormalize next-word scores over the grammar-allowed continuations.
    pub renormalize: bool,
}

impl Default for DecodeParams {
    fn default() -> Self {
        DecodeParams { beam_size: 20, max_len: 64, max_depth: 5, n_best: 20, renormalize: false }
    }
}

impl DecodeParams {
    pub fn validate(&self) -> Result<(), DecodeError> {
        let bad = |m: &str| Err(DecodeError::BadParams(m.to_owned()));
        if self.beam_size == 0 {
            return bad("beam size must be at least 1");
        }
        if self.max_len == 0 {
            return bad("max length must be at least 1");
        }
        if self.max_depth == 0 {
            return bad("max depth must be at least 1");
        }
        if self.n_best == 0 || self.n_best > self.beam_size {
            return bad("n-best must be between 1 and the beam size");
        }
        Ok(())
    }

    /// Parameters wide enough to enumerate every sentence within `max_len`.
    pub fn exhaustive(max_len: usize) -> Self {
        DecodeParams { beam_size: 1_000_000, max_len, max_depth: 64, n_best: 1_000_000, renormalize: false }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecodeError {
    #[error("bad decode parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error("rule {rule} does not expand the leftmost pending non-terminal")]
    WrongRule { rule: String },
    #[error("hypothesis has no pending non-terminal")]
    NothingToExpand,
    #[error("expansion exceeds the length budget of {0} tokens")]
    TooLong(usize),
    #[error("internal trace error: {0}")]
    Trace(String),
}

/// A finished canonical utterance with its logical form.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub utterance: Vec<String>,
    pub logical_form: Vec<String>,
    pub derivation: Derivation,
    pub logp: f64,
}

/// Beam snapshot for `--trace` diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRound {
    pub mode: &'static str,
    pub round: usize,
    pub beam: Vec<TraceEntry>,
    pub outputs: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceEntry {
    pub prefix: Vec<String>,
    pub logp: f64,
}

/// Higher score first, then shorter utterance, then token order.
pub(crate) fn rank(logp_a: f64, a: &[String], logp_b: f64, b: &[String]) -> Ordering {
    logp_b
        .total_cmp(&logp_a)
        .then_with(|| a.len().cmp(&b.len()))
        .then_with(|| a.cmp(b))
}

pub(crate) fn sort_candidates(cands: &mut [Candidate]) {
    cands.sort_by(|a, b| rank(a.logp, &a.utterance, b.logp, &b.utterance));
}

/// True iff some candidate's logical form equals `gold_lf` token for token.
pub fn oracle_recall(candidates: &[Candidate], gold_lf: &[String]) -> bool {
    candidates.iter().any(|c| c.logical_form == gold_lf)
}

/// Scores several continuations of one prefix at once. Each run is a word
/// sequence appended to `prefix`; runs sharing a prefix share one scorer
/// call per distinct branching point. Returns per-word scores per run.
pub(crate) fn score_runs(
    scorer: &dyn Scorer,
    source: &[String],
    prefix: &[String],
    runs: &[Vec<String>],
    renormalize: bool,
) -> Result<Vec<Vec<f64>>, ScorerError> {
    let mut nodes: BTreeMap<&[String], Vec<&String>> = BTreeMap::new();
    for run in runs {
        for i in 0..run.len() {
            let cands = nodes.entry(&run[..i]).or_default();
            if !cands.contains(&&run[i]) {
                cands.push(&run[i]);
            }
        }
    }
    let mut scores: BTreeMap<(&[String], &String), f64> = BTreeMap::new();
    let mut context = prefix.to_vec();
    for (ext, cands) in nodes {
        context.truncate(prefix.len());
        context.extend_from_slice(ext);
        let owned: Vec<String> = cands.iter().map(|c| (*c).clone()).collect();
        let mut lps = scorer.score_next(&ScoreRequest::new(source, &context, &owned)?)?.logprobs;
        if renormalize {
            renormalize_logprobs(&mut lps);
        }
        for (c, lp) in cands.into_iter().zip(lps) {
            scores.insert((ext, c), lp);
        }
    }
    Ok(runs
        .iter()
        .map(|run| (0..run.len()).map(|i| scores[&(&run[..i], &run[i])]).collect())
        .collect())
}

pub(crate) fn renormalize_logprobs(lps: &mut [f64]) {
    let max = lps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + lps.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    for l in lps.iter_mut() {
        *l -= lse;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::tests::g1;
    use crate::tokens;

    #[test]
    fn params_validation() {
        assert!(DecodeParams::default().validate().is_ok());
        let p = DecodeParams { n_best: 21, ..Default::default() };
        assert!(p.validate().is_err());
        let p = DecodeParams { beam_size: 0, ..Default::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn oracle_recall_cases() {
        let g = g1();
        let d = crate::parse_canonical(&g, &tokens("what is state0")).unwrap();
        let c = Candidate {
            utterance: d.utterance(),
            logical_form: d.logical_form(),
            derivation: d,
            logp: -1.0,
        };
        assert!(oracle_recall(std::slice::from_ref(&c), &tokens("answer ( state0 )")));
        assert!(!oracle_recall(&[c], &tokens("answer ( city0 )")));
        assert!(!oracle_recall(&[], &tokens("answer ( state0 )")));
    }

    #[test]
    fn ranking_breaks_ties_by_length_then_tokens() {
        let (a, b, c) = (tokens("x y"), tokens("x"), tokens("w"));
        assert_eq!(rank(-1.0, &a, -1.0, &b), Ordering::Greater);
        assert_eq!(rank(-1.0, &b, -1.0, &c), Ordering::Greater);
        assert_eq!(rank(-0.5, &a, -1.0, &b), Ordering::Less);
    }

    #[test]
    fn renormalized_scores_sum_to_one() {
        let mut lps = vec![-3.0, -1.0, -2.0];
        renormalize_logprobs(&mut lps);
        let s: f64 = lps.iter().map(|l| l.exp()).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}
