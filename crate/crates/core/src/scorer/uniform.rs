use super::{ScoreRequest, ScoreResponse, Scorer, ScorerError};

/// Assigns `log(1 / V)` to every candidate. Does not model termination.
#[derive(Debug, Clone, Copy)]
pub struct UniformScorer {
    vocab_size: usize,
}

impl UniformScorer {
    pub fn new(vocab_size: usize) -> Self {
        assert!(vocab_size > 0, "vocabulary size must be positive");
        UniformScorer { vocab_size }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn logp(&self) -> f64 {
        (1.0 / self.vocab_size as f64).ln()
    }
}

impl Scorer for UniformScorer {
    fn score_next(&self, req: &ScoreRequest<'_>) -> Result<ScoreResponse, ScorerError> {
        Ok(ScoreResponse { logprobs: vec![self.logp(); req.candidates.len()] })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokens;

    #[test]
    fn constant_scores() {
        let s = UniformScorer::new(7);
        let src = tokens("anything at all");
        let cands = tokens("a b c");
        let r = s.score_next(&ScoreRequest::new(&src, &[], &cands).unwrap()).unwrap();
        assert_eq!(r.logprobs, vec![(1.0f64 / 7.0).ln(); 3]);
        let seq = s.score_sequence(&src, &tokens("x y z")).unwrap();
        assert!((seq - 3.0 * (1.0f64 / 7.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn cannot_generate() {
        let s = UniformScorer::new(3);
        assert_eq!(s.generate_paraphrases(&tokens("a"), 2), Err(ScorerError::Unsupported("generate")));
    }
}
