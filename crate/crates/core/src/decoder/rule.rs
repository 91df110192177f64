//! Rule-level inference: the search unit is a grammar rule.
//!
//! A rule whose utterance side is `words… nonterminals…` is applied in one
//! step. A rule with a word after a non-terminal opens an inner search that
//! keeps expanding the leftmost non-terminal (up to `max_depth` steps) until
//! every remaining non-terminal sits to the right of the emitted words.

use crate::grammar::{Derivation, Grammar, SemanticCtx, Symbol};
use crate::scorer::{Scorer, EOS};

use super::{rank, score_runs, sort_candidates, Candidate, DecodeError, DecodeParams, TraceEntry, TraceRound};

#[derive(Debug, Clone, PartialEq)]
enum Pending {
    Word(String),
    Nt { label: String, ctx: SemanticCtx },
}

/// A partial canonical utterance: emitted words plus the unexpanded rest of
/// the sentential form.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub prefix: Vec<String>,
    pub logp: f64,
    pending: Vec<Pending>,
    // rule indices in pre-order
    trace: Vec<usize>,
}

impl Hypothesis {
    pub fn initial(g: &Grammar) -> Self {
        Hypothesis {
            prefix: Vec::new(),
            logp: 0.0,
            pending: vec![Pending::Nt { label: g.start().to_owned(), ctx: SemanticCtx::default() }],
            trace: Vec::new(),
        }
    }

    /// Labels of the pending non-terminals, leftmost first.
    pub fn pending_labels(&self) -> Vec<&str> {
        self.pending
            .iter()
            .filter_map(|p| match p {
                Pending::Nt { label, .. } => Some(label.as_str()),
                Pending::Word(_) => None,
            })
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.pending.is_empty()
    }

    /// No word remains after a pending non-terminal.
    fn nonterminals_on_right(&self) -> bool {
        self.pending.iter().all(|p| matches!(p, Pending::Nt { .. }))
    }

    fn front(&self) -> Option<(&str, &SemanticCtx)> {
        match self.pending.first() {
            Some(Pending::Nt { label, ctx }) => Some((label, ctx)),
            _ => None,
        }
    }

    pub fn derivation(&self, g: &Grammar) -> Result<Derivation, DecodeError> {
        Derivation::from_preorder(g, &self.trace).map_err(|e| DecodeError::Trace(e.to_string()))
    }

    fn cmp_rank(&self, other: &Self) -> std::cmp::Ordering {
        rank(self.logp, &self.prefix, other.logp, &other.prefix).then_with(|| self.trace.cmp(&other.trace))
    }
}

/// Sentential form after substituting `rule` for the leftmost non-terminal,
/// split into the words now at the front and the rest.
struct Substitution {
    run: Vec<String>,
    rest: Vec<Pending>,
}

fn substitute(g: &Grammar, h: &Hypothesis, rule: usize) -> Result<Substitution, DecodeError> {
    let r = g.rule(rule);
    let (label, ctx) = h.front().ok_or(DecodeError::NothingToExpand)?;
    if r.lhs != label || !g.compatible(rule, ctx) {
        return Err(DecodeError::WrongRule { rule: r.id.clone() });
    }
    let child_ctx = g.child_ctx(rule);
    let mut form: Vec<Pending> = r
        .utt_rhs
        .iter()
        .map(|s| match s {
            Symbol::Terminal(t) => Pending::Word(t.clone()),
            Symbol::NonTerminal { label, .. } => Pending::Nt { label: label.clone(), ctx: child_ctx.clone() },
        })
        .collect();
    form.extend(h.pending[1..].iter().cloned());
    let split = form.iter().position(|p| matches!(p, Pending::Nt { .. })).unwrap_or(form.len());
    let rest = form.split_off(split);
    let run = form
        .into_iter()
        .map(|p| match p {
            Pending::Word(w) => w,
            Pending::Nt { .. } => unreachable!(),
        })
        .collect();
    Ok(Substitution { run, rest })
}

/// Fewest words the rest of a sentential form can still produce.
fn min_remaining(g: &Grammar, rest: &[Pending]) -> usize {
    rest.iter()
        .map(|p| match p {
            Pending::Word(_) => 1,
            Pending::Nt { label, .. } => g.min_yield(label),
        })
        .fold(0usize, usize::saturating_add)
}

fn scored_run(sub: &Substitution, scorer: &dyn Scorer) -> Vec<String> {
    let mut run = sub.run.clone();
    if sub.rest.is_empty() && scorer.models_termination() {
        run.push(EOS.to_owned());
    }
    run
}

fn apply(h: &Hypothesis, rule: usize, sub: Substitution, scores: &[f64]) -> Hypothesis {
    let mut logp = h.logp;
    for lp in scores {
        logp += lp;
    }
    let mut prefix = h.prefix.clone();
    prefix.extend(sub.run);
    let mut trace = h.trace.clone();
    trace.push(rule);
    Hypothesis { prefix, logp, pending: sub.rest, trace }
}

/// Applies `rule` to the leftmost pending non-terminal of `h`, emitting and
/// scoring the words that end up at the front of the sentential form.
pub fn expand(
    g: &Grammar,
    source: &[String],
    h: &Hypothesis,
    rule: usize,
    scorer: &dyn Scorer,
    params: &DecodeParams,
) -> Result<Hypothesis, DecodeError> {
    let sub = substitute(g, h, rule)?;
    if h.prefix.len() + sub.run.len() > params.max_len {
        return Err(DecodeError::TooLong(params.max_len));
    }
    let run = scored_run(&sub, scorer);
    let scores = score_runs(scorer, source, &h.prefix, std::slice::from_ref(&run), params.renormalize)?;
    Ok(apply(h, rule, sub, &scores[0]))
}

/// Expands `h` with every eligible rule for its leftmost non-terminal,
/// scoring all continuations in shared batches. Expansions that can no
/// longer finish within the length budget are dropped.
fn expand_all(
    g: &Grammar,
    source: &[String],
    h: &Hypothesis,
    scorer: &dyn Scorer,
    params: &DecodeParams,
) -> Result<Vec<(usize, Hypothesis)>, DecodeError> {
    let Some((label, ctx)) = h.front() else { return Ok(Vec::new()) };
    let rules = g.expand_rule_indices(label, ctx)?;
    let mut subs = Vec::with_capacity(rules.len());
    for r in rules {
        let sub = substitute(g, h, r)?;
        let needed = (h.prefix.len() + sub.run.len()).saturating_add(min_remaining(g, &sub.rest));
        if needed <= params.max_len {
            subs.push((r, sub));
        }
    }
    if subs.is_empty() {
        return Ok(Vec::new());
    }
    let runs: Vec<Vec<String>> = subs.iter().map(|(_, s)| scored_run(s, scorer)).collect();
    let scores = score_runs(scorer, source, &h.prefix, &runs, params.renormalize)?;
    Ok(subs
        .into_iter()
        .zip(scores)
        .map(|((r, sub), sc)| (r, apply(h, r, sub, &sc)))
        .collect())
}

fn nbest(mut beam: Vec<Hypothesis>, width: usize) -> Vec<Hypothesis> {
    beam.sort_by(Hypothesis::cmp_rank);
    beam.truncate(width);
    beam
}

pub fn decode_rule_level(
    source: &[String],
    g: &Grammar,
    scorer: &dyn Scorer,
    params: &DecodeParams,
) -> Result<Vec<Candidate>, DecodeError> {
    run(source, g, scorer, params, None)
}

pub fn decode_rule_level_traced(
    source: &[String],
    g: &Grammar,
    scorer: &dyn Scorer,
    params: &DecodeParams,
    trace: &mut Vec<TraceRound>,
) -> Result<Vec<Candidate>, DecodeError> {
    run(source, g, scorer, params, Some(trace))
}

fn run(
    source: &[String],
    g: &Grammar,
    scorer: &dyn Scorer,
    params: &DecodeParams,
    mut trace: Option<&mut Vec<TraceRound>>,
) -> Result<Vec<Candidate>, DecodeError> {
    params.validate()?;
    let mut beam = vec![Hypothesis::initial(g)];
    let mut outputs: Vec<Hypothesis> = Vec::new();
    // Rounds that emit no word (rules made only of non-terminals) still
    // consume a round, so the cap scales with the number of labels.
    let labels = g.labels().count();
    let max_rounds = 2 * params.max_len * (labels + 1) + 1;

    for round in 0..max_rounds {
        let mut next: Vec<Hypothesis> = Vec::new();
        for c in &beam {
            for (r, expanded) in expand_all(g, source, c, scorer, params)? {
                if g.rule(r).nonterminals_on_right() {
                    next.push(expanded);
                } else {
                    inner_search(g, source, expanded, scorer, params, &mut next)?;
                }
            }
        }
        let width = params.beam_size.saturating_sub(outputs.len());
        let next = nbest(next, width);
        let (done, open): (Vec<_>, Vec<_>) = next.into_iter().partition(Hypothesis::is_complete);
        outputs.extend(done);
        beam = open;
        if let Some(t) = trace.as_deref_mut() {
            t.push(TraceRound {
                mode: "rule",
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
        log::warn!("rule-level decoding found no complete utterance within the length/depth budget");
    }
    let mut cands = outputs
        .into_iter()
        .map(|h| {
            let derivation = h.derivation(g)?;
            Ok(Candidate { logical_form: derivation.logical_form(), utterance: h.prefix, derivation, logp: h.logp })
        })
        .collect::<Result<Vec<_>, DecodeError>>()?;
    sort_candidates(&mut cands);
    cands.truncate(params.n_best);
    Ok(cands)
}

/// Expands leading non-terminals of `start` for up to `max_depth` steps,
/// moving hypotheses to `out` as soon as no word follows a non-terminal.
fn inner_search(
    g: &Grammar,
    source: &[String],
    start: Hypothesis,
    scorer: &dyn Scorer,
    params: &DecodeParams,
    out: &mut Vec<Hypothesis>,
) -> Result<(), DecodeError> {
    if start.nonterminals_on_right() {
        out.push(start);
        return Ok(());
    }
    let mut inner = vec![start];
    for _ in 0..params.max_depth {
        let mut next = Vec::new();
        for h in &inner {
            next.extend(expand_all(g, source, h, scorer, params)?.into_iter().map(|(_, e)| e));
        }
        let next = nbest(next, params.beam_size);
        let (ready, waiting): (Vec<_>, Vec<_>) = next.into_iter().partition(Hypothesis::nonterminals_on_right);
        out.extend(ready);
        inner = waiting;
        if inner.is_empty() {
            break;
        }
    }
    Ok(())
}
