//! Earley recognizer over the utterance side, used as a prefix oracle.

use std::collections::{BTreeSet, HashSet, VecDeque};

use paradecode::lr1::{AutomatonConfig, Lookahead, Lr1Table};
use paradecode::{Grammar, Symbol};

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Item {
    rule: usize,
    dot: usize,
    origin: usize,
}

const START: usize = usize::MAX;

fn rhs<'g>(g: &'g Grammar, start_sym: &'g [Symbol], rule: usize) -> &'g [Symbol] {
    if rule == START {
        start_sym
    } else {
        &g.rule(rule).utt_rhs
    }
}

fn lhs(g: &Grammar, rule: usize) -> Option<&str> {
    (rule != START).then(|| g.rule(rule).lhs.as_str())
}

/// Tokens that may follow `prefix` in some sentence, plus end of input if
/// `prefix` is itself a sentence. Empty when `prefix` is not viable.
/// Assumes no rule has an empty utterance side.
pub fn next_tokens(g: &Grammar, prefix: &[String]) -> BTreeSet<Lookahead> {
    let start_sym = [Symbol::NonTerminal { label: g.start().to_owned(), occurrence: 1 }];
    let mut sets: Vec<Vec<Item>> = vec![vec![Item { rule: START, dot: 0, origin: 0 }]];
    for k in 0..=prefix.len() {
        // predict and complete to a fixpoint
        let mut seen: HashSet<Item> = sets[k].iter().copied().collect();
        let mut predicted: HashSet<&str> = HashSet::new();
        let mut i = 0;
        while i < sets[k].len() {
            let it = sets[k][i];
            let body = rhs(g, &start_sym, it.rule);
            match body.get(it.dot) {
                Some(Symbol::NonTerminal { label, .. }) => {
                    if predicted.insert(label) {
                        for &r in g.rules_for(label) {
                            let new = Item { rule: r, dot: 0, origin: k };
                            if seen.insert(new) {
                                sets[k].push(new);
                            }
                        }
                    }
                }
                Some(Symbol::Terminal(_)) => {}
                None => {
                    if let Some(done) = lhs(g, it.rule) {
                        let parents: Vec<Item> = sets[it.origin]
                            .iter()
                            .filter(|p| {
                                matches!(rhs(g, &start_sym, p.rule).get(p.dot),
                                    Some(Symbol::NonTerminal { label, .. }) if label == done)
                            })
                            .copied()
                            .collect();
                        for p in parents {
                            let new = Item { dot: p.dot + 1, ..p };
                            if seen.insert(new) {
                                sets[k].push(new);
                            }
                        }
                    }
                }
            }
            i += 1;
        }
        if k == prefix.len() {
            break;
        }
        let scanned: Vec<Item> = sets[k]
            .iter()
            .filter(|it| matches!(rhs(g, &start_sym, it.rule).get(it.dot), Some(Symbol::Terminal(t)) if *t == prefix[k]))
            .map(|it| Item { dot: it.dot + 1, ..*it })
            .collect();
        if scanned.is_empty() {
            return BTreeSet::new();
        }
        sets.push(scanned);
    }
    let last = &sets[prefix.len()];
    let mut out = BTreeSet::new();
    for it in last {
        match rhs(g, &start_sym, it.rule).get(it.dot) {
            Some(Symbol::Terminal(t)) => {
                out.insert(Lookahead::word(t.clone()));
            }
            None if it.rule == START => {
                out.insert(Lookahead::Eos);
            }
            _ => {}
        }
    }
    out
}

/// Whether `sentence` is in the utterance-side language.
pub fn recognizes(g: &Grammar, sentence: &[String]) -> bool {
    next_tokens(g, sentence).contains(&Lookahead::Eos)
}

/// Walks every prefix the automaton can reach, up to `max_len` words, and
/// compares its acceptable set with [`next_tokens`]. Returns the number of
/// prefixes visited or the first disagreement.
pub fn compare_all_prefixes(g: &Grammar, t: &Lr1Table, max_len: usize) -> Result<usize, String> {
    let mut queue: VecDeque<(Vec<String>, AutomatonConfig)> = VecDeque::from([(Vec::new(), t.initial())]);
    let mut visited = 0;
    while let Some((prefix, cfg)) = queue.pop_front() {
        visited += 1;
        let got = t.acceptable_tokens(&cfg);
        let want = next_tokens(g, &prefix);
        if got != want {
            return Err(format!("prefix {prefix:?}: automaton {got:?}, chart {want:?}"));
        }
        if prefix.len() == max_len {
            continue;
        }
        for la in got {
            match la {
                Lookahead::Word(w) => {
                    let next = t.step(&cfg, &w).map_err(|e| format!("prefix {prefix:?} + {w}: {e}"))?;
                    let mut p = prefix.clone();
                    p.push(w);
                    queue.push_back((p, next));
                }
                Lookahead::Eos => {
                    if !t.accept_eos(&cfg).is_ok_and(|c| c.is_accepted()) {
                        return Err(format!("prefix {prefix:?}: end of input offered but not accepted"));
                    }
                }
            }
        }
    }
    Ok(visited)
}
