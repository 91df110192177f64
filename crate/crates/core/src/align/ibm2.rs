use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::AlignError;

/// Lower bound applied to every probability looked up from a model.
pub const FLOOR: f64 = 1e-9;
/// Positions and lengths beyond this share the last positional bucket.
pub const MAX_BUCKET: usize = 32;
pub const MODEL_VERSION: &str = "ibm2-v1";

const NULL_ROW: usize = 0;
const UNK_ROW: usize = 1;

type PosKey = (usize, usize, usize);

/// An (input, canonical) sentence pair.
pub type Pair = (Vec<String>, Vec<String>);

/// One translation direction: `p(t | s)` and `a(j | i, |s|, |t|)`.
///
/// Lexical rows are indexed NULL, UNK, then the source vocabulary; columns
/// are the target vocabulary. The UNK row stays uniform. Positional buckets
/// are keyed by (target position, source length, target length) and hold a
/// distribution over source positions `0..=|s|` where 0 is NULL. Buckets
/// never seen in training are uniform.
///
/// Stored tables are exact EM estimates; [`FLOOR`] is applied at lookup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "DirectionRepr", into = "DirectionRepr")]
pub struct Direction {
    source: Vec<String>,
    target: Vec<String>,
    lex: Vec<Vec<f64>>,
    pos: BTreeMap<PosKey, Vec<f64>>,
    src_ids: HashMap<String, usize>,
    tgt_ids: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct DirectionRepr {
    source: Vec<String>,
    target: Vec<String>,
    lex: Vec<Vec<f64>>,
    pos: Vec<PosEntry>,
}

#[derive(Serialize, Deserialize)]
struct PosEntry {
    i: usize,
    src_len: usize,
    tgt_len: usize,
    probs: Vec<f64>,
}

impl From<DirectionRepr> for Direction {
    fn from(r: DirectionRepr) -> Self {
        let pos = r.pos.into_iter().map(|e| ((e.i, e.src_len, e.tgt_len), e.probs)).collect();
        Direction::assemble(r.source, r.target, r.lex, pos)
    }
}

impl From<Direction> for DirectionRepr {
    fn from(d: Direction) -> Self {
        let pos = d
            .pos
            .into_iter()
            .map(|((i, src_len, tgt_len), probs)| PosEntry { i, src_len, tgt_len, probs })
            .collect();
        DirectionRepr { source: d.source, target: d.target, lex: d.lex, pos }
    }
}

fn bucket(n: usize) -> usize {
    n.min(MAX_BUCKET)
}

impl Direction {
    fn assemble(source: Vec<String>, target: Vec<String>, lex: Vec<Vec<f64>>, pos: BTreeMap<PosKey, Vec<f64>>) -> Self {
        let src_ids = source.iter().enumerate().map(|(k, w)| (w.clone(), k + 2)).collect();
        let tgt_ids = target.iter().enumerate().map(|(k, w)| (w.clone(), k)).collect();
        Direction { source, target, lex, pos, src_ids, tgt_ids }
    }

    /// Uniform lexical and positional tables.
    pub fn uniform(source: Vec<String>, target: Vec<String>) -> Self {
        let v = target.len().max(1) as f64;
        let lex = vec![vec![1.0 / v; target.len()]; source.len() + 2];
        Self::assemble(source, target, lex, BTreeMap::new())
    }

    pub fn source_vocab(&self) -> &[String] {
        &self.source
    }

    pub fn target_vocab(&self) -> &[String] {
        &self.target
    }

    fn row(&self, s: Option<&str>) -> usize {
        match s {
            None => NULL_ROW,
            Some(w) => self.src_ids.get(w).copied().unwrap_or(UNK_ROW),
        }
    }

    fn raw_lex(&self, row: usize, t: &str) -> f64 {
        self.tgt_ids.get(t).map_or(0.0, |&col| self.lex[row][col])
    }

    fn raw_pos(&self, j: usize, i: usize, src_len: usize, tgt_len: usize) -> f64 {
        let key = (bucket(i), bucket(src_len), bucket(tgt_len));
        match self.pos.get(&key) {
            Some(probs) => probs[bucket(j)],
            None => 1.0 / (bucket(src_len) + 1) as f64,
        }
    }

    /// `p(t | s)` with `None` for the NULL source word; floored.
    pub fn lex_prob(&self, s: Option<&str>, t: &str) -> f64 {
        self.raw_lex(self.row(s), t).max(FLOOR)
    }

    /// `a(j | i, src_len, tgt_len)` with `j = 0` for NULL and `i` 1-based; floored.
    pub fn pos_prob(&self, j: usize, i: usize, src_len: usize, tgt_len: usize) -> f64 {
        self.raw_pos(j, i, src_len, tgt_len).max(FLOOR)
    }

    /// `Σ_i log Σ_{j=0}^{|s|} p(t_i | s_j) a(j | i, |s|, |t|)` with floored lookups.
    pub fn score(&self, src: &[String], tgt: &[String]) -> f64 {
        let (ls, lt) = (src.len(), tgt.len());
        tgt.iter()
            .enumerate()
            .map(|(i0, t)| {
                let i = i0 + 1;
                let mut sum = self.lex_prob(None, t) * self.pos_prob(0, i, ls, lt);
                for (j0, s) in src.iter().enumerate() {
                    sum += self.lex_prob(Some(s), t) * self.pos_prob(j0 + 1, i, ls, lt);
                }
                sum.ln()
            })
            .sum()
    }

    /// Largest deviation from 1 over all stored conditional distributions.
    pub fn normalization_error(&self) -> f64 {
        self.lex
            .iter()
            .chain(self.pos.values())
            .filter(|row| !row.is_empty())
            .map(|row| (row.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// One EM iteration. Returns the corpus log-likelihood under the
    /// parameters in force before the update.
    fn em_epoch(&mut self, pairs: &[(&[String], &[String])]) -> f64 {
        let mut lex_counts = vec![vec![0.0; self.target.len()]; self.lex.len()];
        let mut pos_counts: BTreeMap<PosKey, Vec<f64>> = BTreeMap::new();
        let mut ll = 0.0;
        let mut weights = Vec::new();
        for (src, tgt) in pairs {
            let (ls, lt) = (src.len(), tgt.len());
            let rows: Vec<usize> =
                std::iter::once(NULL_ROW).chain(src.iter().map(|s| self.row(Some(s)))).collect();
            for (i0, t) in tgt.iter().enumerate() {
                let i = i0 + 1;
                let col = self.tgt_ids[t.as_str()];
                weights.clear();
                weights.extend(rows.iter().enumerate().map(|(j, &r)| self.lex[r][col] * self.raw_pos(j, i, ls, lt)));
                let denom: f64 = weights.iter().sum();
                ll += denom.ln();
                let key = (bucket(i), bucket(ls), bucket(lt));
                let pc = pos_counts.entry(key).or_insert_with(|| vec![0.0; bucket(ls) + 1]);
                for (j, (&r, w)) in rows.iter().zip(&weights).enumerate() {
                    let delta = w / denom;
                    lex_counts[r][col] += delta;
                    pc[bucket(j)] += delta;
                }
            }
        }
        for (row, counts) in self.lex.iter_mut().zip(lex_counts) {
            let total: f64 = counts.iter().sum();
            if total > 0.0 {
                *row = counts.into_iter().map(|c| c / total).collect();
            }
        }
        for (key, counts) in pos_counts {
            let total: f64 = counts.iter().sum();
            self.pos.insert(key, counts.into_iter().map(|c| c / total).collect());
        }
        ll
    }
}

/// IBM Model 2 tables for both directions between input utterances `x`
/// and canonical utterances `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentModel {
    version: String,
    /// `p(c_i | x_j)`, `a(j | i, |x|, |c|)`.
    pub fwd: Direction,
    /// `p(x_j | c_i)`, `a(i | j, |c|, |x|)`.
    pub rev: Direction,
}

/// Corpus log-likelihood per epoch, measured before that epoch's update.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TrainLog {
    pub fwd: Vec<f64>,
    pub rev: Vec<f64>,
}

impl AlignmentModel {
    pub fn uniform(x_vocab: Vec<String>, c_vocab: Vec<String>) -> Self {
        AlignmentModel {
            version: MODEL_VERSION.to_owned(),
            fwd: Direction::uniform(x_vocab.clone(), c_vocab.clone()),
            rev: Direction::uniform(c_vocab, x_vocab),
        }
    }

    /// The association score between input `x` and canonical `c`.
    pub fn association(&self, x: &[String], c: &[String]) -> f64 {
        self.fwd.score(x, c) + self.rev.score(c, x)
    }

    pub fn normalization_error(&self) -> f64 {
        self.fwd.normalization_error().max(self.rev.normalization_error())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, AlignError> {
        let m: AlignmentModel = serde_json::from_str(text)?;
        if m.version != MODEL_VERSION {
            return Err(AlignError::Version { found: m.version, expected: MODEL_VERSION });
        }
        for d in [&m.fwd, &m.rev] {
            if d.lex.len() != d.source.len() + 2 || d.lex.iter().any(|r| r.len() != d.target.len()) {
                return Err(AlignError::Model("lexical table shape does not match vocabularies".into()));
            }
            if d.pos.iter().any(|(&(_, ls, _), p)| p.len() != ls + 1) {
                return Err(AlignError::Model("positional bucket has the wrong support".into()));
            }
        }
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), AlignError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, AlignError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Runs `epochs` EM iterations independently in each direction, starting
/// from uniform tables.
pub fn train_ibm2(pairs: &[(Vec<String>, Vec<String>)], epochs: usize) -> Result<(AlignmentModel, TrainLog), AlignError> {
    if pairs.is_empty() {
        return Err(AlignError::EmptyCorpus);
    }
    if epochs == 0 {
        return Err(AlignError::NoEpochs);
    }
    if let Some(index) = pairs.iter().position(|(x, c)| x.is_empty() || c.is_empty()) {
        return Err(AlignError::EmptySide { index });
    }
    let vocab = |side: fn(&Pair) -> &Vec<String>| -> Vec<String> {
        pairs.iter().flat_map(|p| side(p).iter().cloned()).collect::<BTreeSet<_>>().into_iter().collect()
    };
    let mut model = AlignmentModel::uniform(vocab(|p| &p.0), vocab(|p| &p.1));
    let fwd_pairs: Vec<(&[String], &[String])> = pairs.iter().map(|(x, c)| (&x[..], &c[..])).collect();
    let rev_pairs: Vec<(&[String], &[String])> = pairs.iter().map(|(x, c)| (&c[..], &x[..])).collect();
    let mut log = TrainLog::default();
    for epoch in 0..epochs {
        log.fwd.push(model.fwd.em_epoch(&fwd_pairs));
        log.rev.push(model.rev.em_epoch(&rev_pairs));
        log::debug!("ibm2 epoch {}: ll fwd {:.6} rev {:.6}", epoch + 1, log.fwd[epoch], log.rev[epoch]);
    }
    Ok((model, log))
}

#[derive(Deserialize)]
struct PairLine {
    x: Vec<String>,
    c: Vec<String>,
}

/// Reads a JSONL pair file of `{"x": [...], "c": [...]}` lines.
pub fn load_pairs(path: impl AsRef<Path>) -> Result<Vec<Pair>, AlignError> {
    parse_pairs(&std::fs::read_to_string(path)?)
}

pub(crate) fn parse_pairs(text: &str) -> Result<Vec<Pair>, AlignError> {
    let mut pairs = Vec::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let p: PairLine =
            serde_json::from_str(line).map_err(|e| AlignError::PairSyntax { line: k + 1, message: e.to_string() })?;
        if p.x.is_empty() || p.c.is_empty() {
            return Err(AlignError::EmptySide { index: pairs.len() });
        }
        pairs.push((p.x, p.c));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokens;

    fn pair(x: &str, c: &str) -> (Vec<String>, Vec<String>) {
        (tokens(x), tokens(c))
    }

    #[test]
    fn first_em_step_by_hand() {
        // Expected counts for row "a": p gets 1/3 + 1/2, q gets 1/3.
        let pairs = [pair("a b", "p q"), pair("a", "p")];
        let (m, log) = train_ibm2(&pairs, 1).unwrap();
        assert!((m.fwd.lex_prob(Some("a"), "p") - 5.0 / 7.0).abs() < 1e-12);
        assert!((m.fwd.lex_prob(None, "p") - 5.0 / 7.0).abs() < 1e-12);
        assert!((m.fwd.lex_prob(Some("b"), "p") - 0.5).abs() < 1e-12);
        assert!((log.fwd[0] - 3.0 * 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn co_occurring_word_gains_mass() {
        let pairs = [pair("a b", "p q"), pair("a", "p")];
        let (m1, _) = train_ibm2(&pairs, 1).unwrap();
        let (m30, _) = train_ibm2(&pairs, 30).unwrap();
        let (p1, p30) = (m1.fwd.lex_prob(Some("a"), "p"), m30.fwd.lex_prob(Some("a"), "p"));
        assert!(p30 > p1 && p30 > 0.9, "{p1} -> {p30}");
    }

    #[test]
    fn single_pair() {
        let (m, _) = train_ibm2(&[pair("dog", "chien")], 5).unwrap();
        assert!(m.fwd.lex_prob(Some("dog"), "chien") >= m.fwd.lex_prob(None, "chien"));
    }

    #[test]
    fn uniform_association() {
        let v = 5usize;
        let words = |p: &str| (0..v).map(|k| format!("{p}{k}")).collect::<Vec<_>>();
        let m = AlignmentModel::uniform(words("x"), words("c"));
        let s = m.association(&tokens("x0"), &tokens("c3"));
        assert!((s - 2.0 * (1.0 / v as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn oov_is_floored_not_infinite() {
        let (m, _) = train_ibm2(&[pair("a", "p")], 3).unwrap();
        let s = m.association(&tokens("zzz"), &tokens("yyy"));
        assert!(s.is_finite());
        assert_eq!(m.fwd.lex_prob(Some("a"), "yyy"), FLOOR);
    }

    #[test]
    fn long_sentences_share_the_last_bucket() {
        let long: Vec<String> = (0..40).map(|k| format!("w{k}")).collect();
        let pairs = [(long.clone(), long.clone())];
        let (m, log) = train_ibm2(&pairs, 2).unwrap();
        assert!(log.fwd.iter().all(|l| l.is_finite()));
        assert!(m.fwd.pos.keys().all(|&(i, s, t)| i <= MAX_BUCKET && s <= MAX_BUCKET && t <= MAX_BUCKET));
        assert!(m.association(&long, &long).is_finite());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let (m, _) = train_ibm2(&[pair("a b c", "p q"), pair("b", "q r")], 4).unwrap();
        let back = AlignmentModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn version_is_checked() {
        let m = AlignmentModel::uniform(tokens("a"), tokens("b"));
        let text = m.to_json().replace(MODEL_VERSION, "ibm2-v0");
        assert!(matches!(AlignmentModel::from_json(&text), Err(AlignError::Version { .. })));
    }

    #[test]
    fn input_validation() {
        assert!(matches!(train_ibm2(&[], 1), Err(AlignError::EmptyCorpus)));
        assert!(matches!(train_ibm2(&[pair("a", "b")], 0), Err(AlignError::NoEpochs)));
        assert!(matches!(train_ibm2(&[pair("a", "")], 1), Err(AlignError::EmptySide { index: 0 })));
        let err = parse_pairs("{\"x\":[\"a\"],\"c\":[\"b\"]}\n{\"x\":[],\"c\":[\"b\"]}\n").unwrap_err();
        assert!(matches!(err, AlignError::EmptySide { index: 1 }));
        assert!(matches!(parse_pairs("{\"x\": 3}"), Err(AlignError::PairSyntax { line: 1, .. })));
    }
}
