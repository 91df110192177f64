//! Inverse of the derivation yield: recover the unique derivation of a
//! canonical utterance with a span chart that counts parses.
//!
//! Counts saturate at 2, which is all ambiguity detection needs. Unit rules
//! make a span depend on itself, so each span is iterated to a fixpoint;
//! a productive unit cycle saturates to 2 (infinitely many parses).

use std::collections::HashMap;

use thiserror::Error;

use super::{Derivation, Grammar, Symbol};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no parse")]
    NoParse,
    #[error("ambiguous parse: more than one derivation yields the utterance")]
    Ambiguous,
}

type Count = u8;
const MANY: Count = 2;

fn add(a: Count, b: Count) -> Count {
    (a + b).min(MANY)
}

fn mul(a: Count, b: Count) -> Count {
    (a * b).min(MANY)
}

struct Chart<'a> {
    g: &'a Grammar,
    tokens: &'a [String],
    labels: HashMap<&'a str, usize>,
    // cells[label][i][j]: parses of tokens[i..j] from label
    cells: Vec<Vec<Vec<Count>>>,
}

impl<'a> Chart<'a> {
    fn new(g: &'a Grammar, tokens: &'a [String]) -> Self {
        let labels: HashMap<&str, usize> = g.labels().enumerate().map(|(i, l)| (l, i)).collect();
        let n = tokens.len();
        let cells = vec![vec![vec![0; n + 1]; n + 1]; labels.len()];
        Chart { g, tokens, labels, cells }
    }

    fn cell(&self, label: &str, i: usize, j: usize) -> Count {
        match self.labels.get(label) {
            Some(&l) => self.cells[l][i][j],
            None => 0,
        }
    }

    /// ways[k][p]: matches of rhs[k..] against tokens[p..end].
    fn rhs_ways(&self, rhs: &[Symbol], start: usize, end: usize) -> Vec<Vec<Count>> {
        let m = rhs.len();
        let mut ways = vec![vec![0; end + 1]; m + 1];
        ways[m][end] = 1;
        for k in (0..m).rev() {
            // each remaining symbol covers at least one token
            let remaining = m - k;
            if end < start + remaining {
                continue;
            }
            for p in start..=end - remaining {
                let w = match &rhs[k] {
                    Symbol::Terminal(t) => {
                        if self.tokens[p] == *t {
                            ways[k + 1][p + 1]
                        } else {
                            0
                        }
                    }
                    Symbol::NonTerminal { label, .. } => {
                        let mut acc = 0;
                        for q in p + 1..=end - (remaining - 1) {
                            let c = self.cell(label, p, q);
                            if c > 0 && ways[k + 1][q] > 0 {
                                acc = add(acc, mul(c, ways[k + 1][q]));
                            }
                        }
                        acc
                    }
                };
                ways[k][p] = w;
            }
        }
        ways
    }

    fn fill(&mut self) {
        let n = self.tokens.len();
        for len in 1..=n {
            for i in 0..=n - len {
                let j = i + len;
                let labels: Vec<(&'a str, usize)> = self.labels.iter().map(|(k, v)| (*k, *v)).collect();
                loop {
                    let mut changed = false;
                    for &(label, l) in &labels {
                        let mut total = 0;
                        for &r in self.g.rules_for(label) {
                            let rhs = &self.g.rule(r).utt_rhs;
                            if rhs.len() > len {
                                continue;
                            }
                            total = add(total, self.rhs_ways(rhs, i, j)[0][i]);
                        }
                        if total != self.cells[l][i][j] {
                            self.cells[l][i][j] = total;
                            changed = true;
                        }
                    }
                    if !changed {
                        break;
                    }
                }
            }
        }
    }

    /// Extracts the single derivation of a span whose count is exactly 1.
    fn extract(&self, label: &str, i: usize, j: usize) -> Derivation {
        for &r in self.g.rules_for(label) {
            let rule = self.g.rule(r);
            if rule.utt_rhs.len() > j - i {
                continue;
            }
            let ways = self.rhs_ways(&rule.utt_rhs, i, j);
            if ways[0][i] == 0 {
                continue;
            }
            let mut children = Vec::new();
            let mut p = i;
            let m = rule.utt_rhs.len();
            for (k, s) in rule.utt_rhs.iter().enumerate() {
                match s {
                    Symbol::Terminal(_) => p += 1,
                    Symbol::NonTerminal { label, .. } => {
                        let remaining = m - k;
                        let q = (p + 1..=j - (remaining - 1))
                            .find(|&q| self.cell(label, p, q) > 0 && ways[k + 1][q] > 0)
                            .expect("positive count implies a split");
                        children.push(self.extract(label, p, q));
                        p = q;
                    }
                }
            }
            return Derivation::new(rule.clone(), children);
        }
        unreachable!("extract called on an empty cell")
    }
}

/// Finds the unique derivation whose utterance yield is `tokens`.
///
/// Works for any grammar, including ones the LR(1) builder rejects.
/// Ambiguity is reported rather than resolved.
pub fn parse_canonical(g: &Grammar, tokens: &[String]) -> Result<Derivation, ParseError> {
    if tokens.is_empty() || !g.has_label(g.start()) {
        return Err(ParseError::NoParse);
    }
    let mut chart = Chart::new(g, tokens);
    chart.fill();
    match chart.cell(g.start(), 0, tokens.len()) {
        0 => Err(ParseError::NoParse),
        1 => Ok(chart.extract(g.start(), 0, tokens.len())),
        _ => Err(ParseError::Ambiguous),
    }
}
