use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use super::{ScoreRequest, ScoreResponse, Scorer, ScorerError, EOS};

const FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct BigramConfig {
    /// Add-k smoothing constant; 0 disables smoothing.
    pub smoothing: f64,
    /// Include end-of-sentence in the event space.
    pub model_eos: bool,
    /// Log-linear bonus for words that also occur in the source utterance.
    /// 0 gives a plain language model that ignores the source.
    pub source_bonus: f64,
}

impl Default for BigramConfig {
    fn default() -> Self {
        BigramConfig { smoothing: 1.0, model_eos: true, source_bonus: 0.0 }
    }
}

/// Word bigram model over a closed vocabulary.
///
/// `p(w | h, x) ∝ p_bigram(w | h) · exp(bonus · [w ∈ x])`, normalized over
/// the vocabulary (plus end-of-sentence when modeled). Words outside the
/// vocabulary get a floor probability.
#[derive(Debug, Clone)]
pub struct BigramScorer {
    config: BigramConfig,
    ids: HashMap<String, usize>,
    // outcome ids: words 0..V, EOS = V; history ids add BOS = V + 1
    counts: HashMap<(usize, usize), f64>,
    // per-history count of continuations that fall inside the event space
    totals: HashMap<usize, f64>,
}

impl BigramScorer {
    /// Trains on tokenized sentences. `extra_vocab` widens the vocabulary
    /// beyond the training words (e.g. with a grammar's terminals).
    pub fn train<'a>(
        sentences: &[Vec<String>],
        extra_vocab: impl IntoIterator<Item = &'a str>,
        config: BigramConfig,
    ) -> Self {
        let vocab: BTreeSet<&str> = extra_vocab.into_iter().collect();
        let vocab: BTreeSet<&str> =
            sentences.iter().flatten().map(String::as_str).chain(vocab).filter(|w| *w != EOS).collect();
        let ids: HashMap<String, usize> = vocab.iter().enumerate().map(|(i, w)| ((*w).to_owned(), i)).collect();
        let v = ids.len();
        let (eos, bos) = (v, v + 1);
        let mut counts: HashMap<(usize, usize), f64> = HashMap::new();
        let mut totals: HashMap<usize, f64> = HashMap::new();
        for s in sentences {
            let mut prev = bos;
            for w in s.iter().map(|w| ids[w.as_str()]).chain(std::iter::once(eos)) {
                if w != eos || config.model_eos {
                    *counts.entry((prev, w)).or_default() += 1.0;
                    *totals.entry(prev).or_default() += 1.0;
                }
                prev = w;
            }
        }
        BigramScorer { config, ids, counts, totals }
    }

    /// One whitespace-tokenized sentence per line; blank lines are skipped.
    pub fn from_text_file<'a>(
        path: impl AsRef<Path>,
        extra_vocab: impl IntoIterator<Item = &'a str>,
        config: BigramConfig,
    ) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let sentences: Vec<Vec<String>> = text
            .lines()
            .map(crate::tokens)
            .filter(|s| !s.is_empty())
            .collect();
        Ok(Self::train(&sentences, extra_vocab, config))
    }

    pub fn vocab_size(&self) -> usize {
        self.ids.len()
    }

    pub fn vocab(&self) -> impl Iterator<Item = &str> {
        self.ids.keys().map(String::as_str)
    }

    fn outcomes(&self) -> f64 {
        (self.ids.len() + usize::from(self.config.model_eos)) as f64
    }

    fn eos_id(&self) -> usize {
        self.ids.len()
    }

    fn history(&self, prefix: &[String]) -> Option<usize> {
        match prefix.last() {
            None => Some(self.ids.len() + 1),
            Some(w) => self.ids.get(w).copied(),
        }
    }

    fn base(&self, h: Option<usize>, w: usize) -> f64 {
        let k = self.config.smoothing;
        let (c, total) = match h {
            Some(h) => (
                self.counts.get(&(h, w)).copied().unwrap_or(0.0),
                self.totals.get(&h).copied().unwrap_or(0.0),
            ),
            None => (0.0, 0.0),
        };
        let denom = total + k * self.outcomes();
        if denom == 0.0 {
            1.0 / self.outcomes()
        } else {
            (c + k) / denom
        }
    }

    fn outcome_id(&self, word: &str) -> Option<usize> {
        if word == EOS {
            self.config.model_eos.then(|| self.eos_id())
        } else {
            self.ids.get(word).copied()
        }
    }
}

impl Scorer for BigramScorer {
    fn score_next(&self, req: &ScoreRequest<'_>) -> Result<ScoreResponse, ScorerError> {
        let h = self.history(req.prefix);
        let bonus = self.config.source_bonus;
        // ordered so the normalizer sums in the same order in every process
        let boosted: BTreeSet<usize> = if bonus != 0.0 {
            req.source.iter().filter_map(|w| self.ids.get(w).copied()).collect()
        } else {
            BTreeSet::new()
        };
        let z = 1.0 + bonus.exp_m1() * boosted.iter().map(|&w| self.base(h, w)).sum::<f64>();
        let logprobs = req
            .candidates
            .iter()
            .map(|c| match self.outcome_id(c) {
                Some(w) => {
                    let mut p = self.base(h, w);
                    if boosted.contains(&w) {
                        p *= bonus.exp();
                    }
                    (p / z).max(FLOOR).ln()
                }
                None => FLOOR.ln(),
            })
            .collect();
        Ok(ScoreResponse { logprobs })
    }

    fn models_termination(&self) -> bool {
        self.config.model_eos
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokens;

    fn one_sentence(k: f64, model_eos: bool) -> BigramScorer {
        BigramScorer::train(
            &[tokens("what is state0")],
            [],
            BigramConfig { smoothing: k, model_eos, source_bonus: 0.0 },
        )
    }

    fn next(s: &BigramScorer, source: &str, prefix: &str, cands: &str) -> Vec<f64> {
        let (src, pre, c) = (tokens(source), tokens(prefix), tokens(cands));
        s.score_next(&ScoreRequest::new(&src, &pre, &c).unwrap()).unwrap().logprobs
    }

    #[test]
    fn single_continuation_unsmoothed() {
        let s = one_sentence(0.0, true);
        let lp = next(&s, "", "what", "is state0");
        assert_eq!(lp[0], 0.0);
        assert_eq!(lp[1], FLOOR.ln());
    }

    #[test]
    fn add_one_over_three_words() {
        // (0 + 1) / (1 + 3) with vocabulary {what, is, state0} and no EOS event
        let s = one_sentence(1.0, false);
        let lp = next(&s, "", "what", "state0");
        assert!((lp[0] - (0.25f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn add_one_with_eos_event() {
        let s = one_sentence(1.0, true);
        let lp = next(&s, "", "what", "state0");
        assert!((lp[0] - (0.2f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn source_bonus_shifts_mass_and_stays_normalized() {
        let sentences = [tokens("a b"), tokens("a c")];
        let s = BigramScorer::train(&sentences, [], BigramConfig { smoothing: 0.0, model_eos: true, source_bonus: 2.0 });
        let lp = next(&s, "c", "a", "b c");
        let (pb, pc) = (lp[0].exp(), lp[1].exp());
        assert!((pb + pc - 1.0).abs() < 1e-12);
        assert!((pc / pb - 2f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn unseen_history_is_uniform() {
        let s = BigramScorer::train(&[tokens("a b")], ["z"], BigramConfig { smoothing: 0.0, ..Default::default() });
        let lp = next(&s, "", "z", "a b z </s>");
        for l in lp {
            assert!((l - (0.25f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn repeated_scoring_is_bitwise_stable() {
        // uneven counts after "w0" so the normalizer adds distinct terms
        let words: Vec<String> = (0..40).map(|i| format!("w{i}")).collect();
        let corpus: Vec<Vec<String>> =
            (0..40).flat_map(|i| std::iter::repeat_n(vec![words[0].clone(), words[i].clone()], 1 + i * i % 7)).collect();
        let s = BigramScorer::train(&corpus, [], BigramConfig { source_bonus: 0.9, ..Default::default() });
        let req = ScoreRequest::new(&words, &words[..1], &words[5..9]).unwrap();
        let first = s.score_next(&req).unwrap();
        for _ in 0..50 {
            assert_eq!(s.score_next(&req).unwrap(), first);
        }
    }
}
