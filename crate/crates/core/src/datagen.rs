//! Synthetic training data: canonical utterances sampled from the grammar
//! and model-generated paraphrases of them.

use std::collections::HashSet;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{parse_canonical, sample_derivation_with, Grammar, SampleError};
use crate::scorer::{Scorer, ScorerError};

pub const DEFAULT_CUS: usize = 423;
pub const DEFAULT_SELF_PARAS: usize = 847;

/// Sampling draws allowed per requested record before giving up.
const DRAWS_PER_RECORD: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    #[serde(rename = "CU")]
    Cu,
    SelfPara,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthRecord {
    pub cu: Vec<String>,
    pub lf: Vec<String>,
    pub paraphrase: Option<Vec<String>>,
    pub origin: Origin,
}

impl SynthRecord {
    /// `(paraphrase, cu)` for self-paraphrase records.
    pub fn as_pair(&self) -> Option<(Vec<String>, Vec<String>)> {
        match (&self.origin, &self.paraphrase) {
            (Origin::SelfPara, Some(p)) => Some((p.clone(), self.cu.clone())),
            _ => None,
        }
    }
}

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("record count must be at least 1")]
    NoRecords,
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error("line {line}: {message}")]
    Record { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Draws up to `n` distinct canonical utterances from one seeded stream.
/// Each kept record round-trips through the canonical parser. If the draw
/// budget runs out first the records found so far are returned.
pub fn sample_cus(g: &Grammar, n: usize, max_depth: usize, seed: u64) -> Result<Vec<SynthRecord>, DatagenError> {
    if n == 0 {
        return Err(DatagenError::NoRecords);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    let budget = n.saturating_mul(DRAWS_PER_RECORD);
    for _ in 0..budget {
        if out.len() == n {
            break;
        }
        let d = match sample_derivation_with(g, max_depth, &mut rng) {
            Ok(d) => d,
            Err(SampleError::BadDepth) => return Err(SampleError::BadDepth.into()),
            Err(e) => {
                log::debug!("sampling draw failed: {e}");
                continue;
            }
        };
        let (cu, lf) = (d.utterance(), d.logical_form());
        if seen.contains(&cu) {
            continue;
        }
        match parse_canonical(g, &cu) {
            Ok(back) if back.logical_form() == lf => {}
            Ok(_) => {
                log::debug!("dropping {:?}: parse gives a different logical form", cu.join(" "));
                continue;
            }
            Err(e) => {
                log::debug!("dropping {:?}: {e}", cu.join(" "));
                continue;
            }
        }
        seen.insert(cu.clone());
        out.push(SynthRecord { cu, lf, paraphrase: None, origin: Origin::Cu });
    }
    if out.len() < n {
        log::warn!("sampled {} distinct canonical utterances out of {n} requested", out.len());
    }
    Ok(out)
}

/// Asks the scorer for up to `k` paraphrases of each record's canonical
/// utterance. Empty outputs and copies of the canonical utterance are
/// dropped. Records whose request fails are skipped with a warning.
pub fn synth_self_paras(records: &[SynthRecord], scorer: &dyn Scorer, k: usize) -> Result<Vec<SynthRecord>, DatagenError> {
    if !scorer.capabilities().iter().any(|c| c == "generate") {
        return Err(ScorerError::Unsupported("generate").into());
    }
    let mut out = Vec::new();
    if k == 0 {
        return Ok(out);
    }
    for r in records {
        let paras = match scorer.generate_paraphrases(&r.cu, k) {
            Ok(p) => p,
            Err(e @ ScorerError::Unsupported(_)) => return Err(e.into()),
            Err(e) => {
                log::warn!("skipping {:?}: {e}", r.cu.join(" "));
                continue;
            }
        };
        let mut kept: Vec<Vec<String>> = Vec::new();
        for p in paras {
            if p.is_empty() || p == r.cu || kept.contains(&p) {
                continue;
            }
            kept.push(p);
        }
        kept.truncate(k);
        out.extend(kept.into_iter().map(|p| SynthRecord {
            cu: r.cu.clone(),
            lf: r.lf.clone(),
            paraphrase: Some(p),
            origin: Origin::SelfPara,
        }));
    }
    Ok(out)
}

pub fn write_jsonl<W: Write>(records: &[SynthRecord], w: W) -> std::io::Result<usize> {
    let mut w = BufWriter::new(w);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(records.len())
}

/// Writes one JSON record per line and returns the count.
pub fn export_dataset(records: &[SynthRecord], path: impl AsRef<Path>) -> std::io::Result<usize> {
    write_jsonl(records, std::fs::File::create(path)?)
}

pub fn parse_dataset(text: &str) -> Result<Vec<SynthRecord>, DatagenError> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| DatagenError::Record { line: k + 1, message };
        let r: SynthRecord = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        if r.origin == Origin::SelfPara && r.paraphrase.is_none() {
            return Err(bad("self-paraphrase record without a paraphrase".into()));
        }
        out.push(r);
    }
    Ok(out)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<SynthRecord>, DatagenError> {
    parse_dataset(&std::fs::read_to_string(path)?)
}
