//! Brute-force enumeration of every derivation up to a length bound.

use std::cmp::Ordering;
use std::collections::HashMap;

use paradecode::grammar::SemanticCtx;
use paradecode::scorer::Scorer;
use paradecode::{Derivation, Grammar};

/// All schema-respecting derivations from the start symbol whose utterance
/// has at most `max_len` tokens.
pub fn enumerate(g: &Grammar, max_len: usize) -> Vec<Derivation> {
    derive(g, g.start(), &SemanticCtx::default(), max_len)
}

/// Number of derivations [`enumerate`] would return, saturating, without
/// building them.
pub fn count(g: &Grammar, max_len: usize) -> u64 {
    let mut memo = HashMap::new();
    (0..=max_len).fold(0u64, |acc, n| acc.saturating_add(exact(g, g.start(), &SemanticCtx::default(), n, &mut memo)))
}

type Memo = HashMap<(String, SemanticCtx, usize), u64>;

fn exact(g: &Grammar, label: &str, ctx: &SemanticCtx, n: usize, memo: &mut Memo) -> u64 {
    let key = (label.to_owned(), ctx.clone(), n);
    if let Some(&c) = memo.get(&key) {
        return c;
    }
    // a cycle always adds a terminal, so a re-entrant query has a smaller n
    let mut total = 0u64;
    for r in g.expand_rule_indices(label, ctx).unwrap_or_default() {
        let rule = g.rule(r).clone();
        let terms = rule.utt_rhs.iter().filter(|s| s.is_terminal()).count();
        if terms > n {
            continue;
        }
        let kids: Vec<String> = rule.nonterminals().map(str::to_owned).collect();
        let ctx = g.child_ctx(r);
        total = total.saturating_add(seq(g, &kids, &ctx, n - terms, memo));
    }
    memo.insert(key, total);
    total
}

fn seq(g: &Grammar, labels: &[String], ctx: &SemanticCtx, n: usize, memo: &mut Memo) -> u64 {
    let Some((first, rest)) = labels.split_first() else {
        return u64::from(n == 0);
    };
    let mut total = 0u64;
    for k in 1..=n {
        let a = exact(g, first, ctx, k, memo);
        if a > 0 {
            total = total.saturating_add(a.saturating_mul(seq(g, rest, ctx, n - k, memo)));
        }
    }
    total
}

fn derive(g: &Grammar, label: &str, ctx: &SemanticCtx, budget: usize) -> Vec<Derivation> {
    let mut out = Vec::new();
    let Ok(rules) = g.expand_rule_indices(label, ctx) else {
        return out;
    };
    for r in rules {
        let rule = g.rule(r).clone();
        let terms = rule.utt_rhs.iter().filter(|s| s.is_terminal()).count();
        if terms > budget {
            continue;
        }
        let kids: Vec<String> = rule.nonterminals().map(str::to_owned).collect();
        let child_ctx = g.child_ctx(r);
        for children in combine(g, &kids, &child_ctx, budget - terms) {
            out.push(Derivation::new(rule.clone(), children));
        }
    }
    out
}

fn combine(g: &Grammar, labels: &[String], ctx: &SemanticCtx, budget: usize) -> Vec<Vec<Derivation>> {
    let Some((first, rest)) = labels.split_first() else {
        return vec![Vec::new()];
    };
    let rest_min: usize = rest.iter().map(|l| g.min_yield(l)).sum();
    if rest_min > budget {
        return Vec::new();
    }
    let mut out = Vec::new();
    for d in derive(g, first, ctx, budget - rest_min) {
        let used = d.utterance().len();
        for mut tail in combine(g, rest, ctx, budget - used) {
            tail.insert(0, d.clone());
            out.push(tail);
        }
    }
    out
}

/// A sentence with its sequence score.
#[derive(Debug, Clone)]
pub struct Scored {
    pub utterance: Vec<String>,
    pub logical_form: Vec<String>,
    pub logp: f64,
}

/// Scores every enumerated sentence with `score_sequence` and sorts by
/// descending score, then length, then tokens.
pub fn ranked(g: &Grammar, scorer: &dyn Scorer, source: &[String], max_len: usize) -> Vec<Scored> {
    let mut out: Vec<Scored> = enumerate(g, max_len)
        .into_iter()
        .map(|d| {
            let utterance = d.utterance();
            let logp = scorer.score_sequence(source, &utterance).expect("scorer");
            Scored { logical_form: d.logical_form(), utterance, logp }
        })
        .collect();
    out.sort_by(|a, b| {
        b.logp
            .partial_cmp(&a.logp)
            .unwrap_or(Ordering::Equal)
            .then(a.utterance.len().cmp(&b.utterance.len()))
            .then(a.utterance.cmp(&b.utterance))
    });
    out
}
