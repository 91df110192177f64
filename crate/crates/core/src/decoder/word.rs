//! Word-level inference: one word per step, restricted to the words the
//! LR(1) automaton can shift from the current configuration.

use crate::grammar::Grammar;
use crate::lr1::{AutomatonConfig, Lookahead, Lr1Table};
use crate::scorer::{ScoreRequest, Scorer, EOS};

use super::{
    rank, renormalize_logprobs, sort_candidates, Candidate, DecodeError, DecodeParams, TraceEntry, TraceRound,
};

#[derive(Debug, Clone)]
struct WordHyp {
    prefix: Vec<String>,
    logp: f64,
    config: AutomatonConfig,
    done: bool,
}

impl WordHyp {
    fn cmp_rank(&self, other: &Self) -> std::cmp::Ordering {
        rank(self.logp, &self.prefix, other.logp, &other.prefix)
            .then_with(|| self.config.reductions().cmp(other.config.reductions()))
    }
}

pub fn decode_word_level(
    source: &[String],
    g: &Grammar,
    table: &Lr1Table,
    scorer: &dyn Scorer,
    params: &DecodeParams,
) -> Result<Vec<Candidate>, DecodeError> {
    run(source, g, table, scorer, params, None)
}

pub fn decode_word_level_traced(
    source: &[String],
    g: &Grammar,
    table: &Lr1Table,
    scorer: &dyn Scorer,
    params: &DecodeParams,
    trace: &mut Vec<TraceRound>,
) -> Result<Vec<Candidate>, DecodeError> {
    run(source, g, table, scorer, params, Some(trace))
}

/// Schema check applied whenever the automaton reduces a rule.
fn schema_allows(g: &Grammar, rule: usize, children: &[usize]) -> bool {
    if g.schema().is_none() {
        return true;
    }
    let ctx = g.child_ctx(rule);
    children.iter().all(|&c| g.compatible(c, &ctx))
}

fn run(
    source: &[String],
    g: &Grammar,
    table: &Lr1Table,
    scorer: &dyn Scorer,
    params: &DecodeParams,
    mut trace: Option<&mut Vec<TraceRound>>,
) -> Result<Vec<Candidate>, DecodeError> {
    params.validate()?;
    let scores_eos = scorer.models_termination();
    let mut beam = vec![WordHyp { prefix: Vec::new(), logp: 0.0, config: table.initial(), done: false }];
    let mut outputs: Vec<WordHyp> = Vec::new();

    for round in 0..=params.max_len {
        let mut next: Vec<WordHyp> = Vec::new();
        for h in &beam {
            let mut allowed = table.acceptable_tokens(&h.config);
            if h.prefix.len() >= params.max_len {
                allowed.retain(|la| *la == Lookahead::Eos);
            }
            if allowed.is_empty() {
                continue;
            }
            let mut words: Vec<String> = Vec::new();
            let mut eos = false;
            for la in &allowed {
                match la {
                    Lookahead::Word(w) => words.push(w.clone()),
                    Lookahead::Eos => eos = true,
                }
            }
            let mut cands = words.clone();
            if eos && scores_eos {
                cands.push(EOS.to_owned());
            }
            let mut lps = if cands.is_empty() {
                Vec::new()
            } else {
                scorer.score_next(&ScoreRequest::new(source, &h.prefix, &cands)?)?.logprobs
            };
            if params.renormalize && !lps.is_empty() {
                renormalize_logprobs(&mut lps);
            }

            let mut check = |rule: usize, children: &[usize]| schema_allows(g, rule, children);
            for (w, lp) in words.iter().zip(&lps) {
                let Ok(config) = table.advance(&h.config, &Lookahead::Word(w.clone()), &mut check) else {
                    continue;
                };
                let mut prefix = h.prefix.clone();
                prefix.push(w.clone());
                next.push(WordHyp { prefix, logp: h.logp + lp, config, done: false });
            }
            if eos {
                if let Ok(config) = table.advance(&h.config, &Lookahead::Eos, &mut check) {
                    let logp = if scores_eos { h.logp + lps[words.len()] } else { h.logp };
                    next.push(WordHyp { prefix: h.prefix.clone(), logp, config, done: true });
                }
            }
        }
        next.sort_by(WordHyp::cmp_rank);
        next.truncate(params.beam_size.saturating_sub(outputs.len()));
        let (done, open): (Vec<_>, Vec<_>) = next.into_iter().partition(|h| h.done);
        outputs.extend(done);
        beam = open;
        if let Some(t) = trace.as_deref_mut() {
            t.push(TraceRound {
                mode: "word",
                round,
                beam: beam.iter().map(|h| TraceEntry { prefix: h.prefix.clone(), logp: h.logp }).collect(),
                outputs: outputs.len(),
            });
        }
        if beam.is_empty() {
            break;
        }
    }

    if outputs.is_empty() {
        log::warn!("word-level decoding found no complete utterance within the length budget");
    }
    let mut cands = outputs
        .into_iter()
        .map(|h| {
            let derivation = table
                .config_to_derivation(g, &h.config, &h.prefix)
                .map_err(|e| DecodeError::Trace(e.to_string()))?;
            Ok(Candidate { logical_form: derivation.logical_form(), utterance: h.prefix, derivation, logp: h.logp })
        })
        .collect::<Result<Vec<_>, DecodeError>>()?;
    sort_candidates(&mut cands);
    cands.truncate(params.n_best);
    Ok(cands)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::decode_rule_level;
    use crate::grammar::tests::g1;
    use crate::grammar::SemanticSchema;
    use crate::scorer::{ScoreResponse, ScorerError, UniformScorer};
    use crate::tokens;
    use std::sync::Mutex;

    /// Records every request it sees.
    struct Spy(Mutex<Vec<Vec<String>>>);

    impl Scorer for Spy {
        fn score_next(&self, req: &ScoreRequest<'_>) -> Result<ScoreResponse, ScorerError> {
            self.0.lock().unwrap().push(req.candidates.to_vec());
            Ok(ScoreResponse { logprobs: vec![-1.0; req.candidates.len()] })
        }
    }

    #[test]
    fn first_step_is_grammar_forced() {
        let g = g1();
        let t = Lr1Table::build(&g).unwrap();
        let spy = Spy(Mutex::new(Vec::new()));
        decode_word_level(&tokens("how big"), &g, &t, &spy, &DecodeParams::default()).unwrap();
        assert_eq!(spy.0.lock().unwrap()[0], tokens("what"));
    }

    #[test]
    fn matches_rule_level_under_uniform() {
        let g = g1();
        let t = Lr1Table::build(&g).unwrap();
        let s = UniformScorer::new(9);
        let p = DecodeParams::default();
        let a = decode_word_level(&[], &g, &t, &s, &p).unwrap();
        let b = decode_rule_level(&[], &g, &s, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn length_budget_drops_unfinished() {
        let g = g1();
        let t = Lr1Table::build(&g).unwrap();
        let p = DecodeParams { max_len: 5, ..Default::default() };
        let out = decode_word_level(&[], &g, &t, &UniformScorer::new(9), &p).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].utterance, tokens("what is state0"));
    }

    #[test]
    fn schema_prunes_on_reduce() {
        let schema = SemanticSchema::from_json(
            r#"{"allowed": [["answer", "state"]], "rules": {
                "r_root": {"predicate": "answer", "result": "q"},
                "r_state_loc": {"predicate": "state", "result": "state"},
                "r_state0": {"predicate": "state0", "result": "state0"}
            }}"#,
        )
        .unwrap();
        let g = g1().with_schema(schema);
        let t = Lr1Table::build(&g).unwrap();
        let out = decode_word_level(&[], &g, &t, &UniformScorer::new(9), &DecodeParams::default()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].logical_form, tokens("answer ( state ( loc_1 ( city0 ) ) )"));
    }
}
