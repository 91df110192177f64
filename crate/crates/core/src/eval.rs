//! Exact-match accuracy and oracle recall over decode output.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{file} line {line}: {message}")]
    Syntax { file: &'static str, line: usize, message: String },
    #[error("duplicate id {0} in {1}")]
    DuplicateId(String, &'static str),
    #[error("id {0} has a prediction but no gold entry")]
    MissingGold(String),
    #[error("id {0} has a gold entry but no prediction")]
    MissingPrediction(String),
    #[error("gold entry {0} has no gold_lf")]
    NoGoldLf(String),
}

#[derive(Debug, Clone, Deserialize)]
pub struct Prediction {
    pub id: Value,
    #[serde(default, deserialize_with = "utterance")]
    pub utterance: Vec<String>,
    pub candidates: Vec<PredictedCandidate>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PredictedCandidate {
    pub lf: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct GoldItem {
    pub id: Value,
    #[serde(deserialize_with = "utterance")]
    pub utterance: Vec<String>,
    pub gold_lf: Option<Vec<String>>,
}

/// Accepts a token array or a whitespace-separated string.
pub fn utterance<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Utt {
        Tokens(Vec<String>),
        Text(String),
    }
    Ok(match Utt::deserialize(d)? {
        Utt::Tokens(t) => t,
        Utt::Text(s) => crate::tokens(&s),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalItem {
    pub id: Value,
    pub input: Vec<String>,
    pub predicted: Option<Vec<String>>,
    pub gold: Vec<String>,
    pub correct: bool,
    pub oracle_hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub n: usize,
    pub exact_match: f64,
    pub oracle_at_n: f64,
    pub per_item: Vec<EvalItem>,
}

fn parse_lines<T: for<'de> Deserialize<'de>>(text: &str, file: &'static str) -> Result<Vec<T>, EvalError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            serde_json::from_str(l).map_err(|e| EvalError::Syntax { file, line: k + 1, message: e.to_string() })
        })
        .collect()
}

pub fn parse_predictions(text: &str) -> Result<Vec<Prediction>, EvalError> {
    parse_lines(text, "predictions")
}

pub fn parse_gold(text: &str) -> Result<Vec<GoldItem>, EvalError> {
    parse_lines(text, "gold")
}

/// Scores predictions against gold entries with the same id. The top
/// candidate decides exact match; any candidate counts for the oracle.
pub fn evaluate(predictions: &[Prediction], gold: &[GoldItem]) -> Result<EvalReport, EvalError> {
    let mut by_id: HashMap<String, &GoldItem> = HashMap::new();
    for g in gold {
        let key = g.id.to_string();
        if by_id.insert(key.clone(), g).is_some() {
            return Err(EvalError::DuplicateId(key, "gold"));
        }
    }
    let mut per_item = Vec::with_capacity(predictions.len());
    let mut used = HashMap::new();
    for p in predictions {
        let key = p.id.to_string();
        if used.insert(key.clone(), ()).is_some() {
            return Err(EvalError::DuplicateId(key, "predictions"));
        }
        let g = by_id.get(&key).ok_or_else(|| EvalError::MissingGold(key.clone()))?;
        let gold_lf = g.gold_lf.clone().ok_or(EvalError::NoGoldLf(key))?;
        let predicted = p.candidates.first().map(|c| c.lf.clone());
        let correct = predicted.as_ref() == Some(&gold_lf);
        let oracle_hit = p.candidates.iter().any(|c| c.lf == gold_lf);
        per_item.push(EvalItem { id: p.id.clone(), input: g.utterance.clone(), predicted, gold: gold_lf, correct, oracle_hit });
    }
    if let Some(g) = gold.iter().find(|g| !used.contains_key(&g.id.to_string())) {
        return Err(EvalError::MissingPrediction(g.id.to_string()));
    }
    let n = per_item.len();
    let frac = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    Ok(EvalReport {
        n,
        exact_match: frac(per_item.iter().filter(|i| i.correct).count()),
        oracle_at_n: frac(per_item.iter().filter(|i| i.oracle_hit).count()),
        per_item,
    })
}
