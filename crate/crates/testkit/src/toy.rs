//! Random toy grammars in the text format.
//!
//! Label `$n<i>` may refer forward to any `$n<j>` with `j > i`; a reference
//! back to `j <= i` is only made by rules carrying a terminal, so every cycle
//! grows the utterance and length-bounded enumeration terminates. The first
//! rule of each label refers forward only, which keeps every label productive.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use paradecode::grammar::{validate_grammar, RuleAnnotation, SemanticSchema};
use paradecode::{parse_grammar, Grammar};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::enumerate::{count, enumerate};

#[derive(Debug, Clone)]
pub struct ToyConfig {
    pub max_labels: usize,
    pub vocab: usize,
    pub max_rules_per_label: usize,
    pub max_terminals: usize,
    pub max_children: usize,
    pub recursive: bool,
    pub schema: bool,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            max_labels: 5,
            vocab: 8,
            max_rules_per_label: 4,
            max_terminals: 2,
            max_children: 2,
            recursive: false,
            schema: false,
        }
    }
}

fn label(i: usize) -> String {
    format!("$n{i}")
}

pub fn random_grammar_text<R: Rng>(rng: &mut R, cfg: &ToyConfig) -> String {
    let n_labels = rng.gen_range(1..=cfg.max_labels);
    let mut out = String::from("start: $n0\n");
    let mut rid = 0;
    for i in 0..n_labels {
        let n_rules = rng.gen_range(1..=cfg.max_rules_per_label.max(1));
        for k in 0..n_rules {
            let forward: Vec<usize> = (i + 1..n_labels).collect();
            let mut n_terms = rng.gen_range(0..=cfg.max_terminals);
            let n_kids = if forward.is_empty() && !(cfg.recursive && k > 0) {
                0
            } else {
                rng.gen_range(0..=cfg.max_children)
            };
            let back_allowed = cfg.recursive && k > 0;
            let mut kids: Vec<usize> = Vec::new();
            for _ in 0..n_kids {
                let pool: Vec<usize> = if back_allowed && rng.gen_bool(0.4) { (0..=i).collect() } else { forward.clone() };
                if let Some(&l) = pool.choose(rng) {
                    kids.push(l);
                }
            }
            if kids.iter().any(|&l| l <= i) || kids.is_empty() {
                n_terms = n_terms.max(1);
            }
            let mut utt: Vec<String> = Vec::new();
            let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
            let mut nts: Vec<String> = Vec::new();
            for &l in &kids {
                let occ = seen.entry(l).or_insert(0);
                *occ += 1;
                nts.push(format!("{}#{}", label(l), occ));
            }
            utt.extend(nts.iter().cloned());
            for _ in 0..n_terms {
                let pos = rng.gen_range(0..=utt.len());
                utt.insert(pos, format!("w{}", rng.gen_range(0..cfg.vocab)));
            }
            let mut lf_nts = nts.clone();
            lf_nts.shuffle(rng);
            let lf = if lf_nts.is_empty() {
                format!("f{rid}")
            } else {
                format!("f{rid} ( {} )", lf_nts.join(" "))
            };
            out.push_str(&format!("[r{rid}] {} -> {} ||| {}\n", label(i), utt.join(" "), lf));
            rid += 1;
        }
    }
    out
}

/// Annotates every rule with predicate `f<k>` and one of two result types,
/// and allows a random subset of (predicate, type) pairs.
pub fn random_schema<R: Rng>(rng: &mut R, g: &Grammar) -> SemanticSchema {
    let mut s = SemanticSchema::new();
    for r in g.rules() {
        let pred = format!("f{}", &r.id[1..]);
        let result = format!("t{}", rng.gen_range(0..2));
        s = s.annotate(r.id.clone(), RuleAnnotation { predicate: pred.clone(), result_type: result, argument_types: vec![] });
        for t in ["t0", "t1"] {
            if rng.gen_bool(0.7) {
                s = s.allow(pred.clone(), t);
            }
        }
    }
    s
}

/// A random grammar whose sentences up to `max_len` tokens are unambiguous
/// and whose number lies in `sentences`, with no validation issues.
pub fn toy_grammar<R: Rng>(rng: &mut R, cfg: &ToyConfig, max_len: usize, sentences: RangeInclusive<usize>) -> Grammar {
    loop {
        let text = random_grammar_text(rng, cfg);
        let mut g = parse_grammar(&text).unwrap_or_else(|e| panic!("generated grammar does not parse: {e}\n{text}"));
        if !validate_grammar(&g).is_empty() {
            continue;
        }
        if cfg.schema {
            let s = random_schema(rng, &g);
            g = g.with_schema(s);
        }
        let plain_g = parse_grammar(&text).unwrap();
        let n_plain = count(&plain_g, max_len);
        if !sentences.contains(&(count(&g, max_len) as usize)) || n_plain > 4 * *sentences.end() as u64 {
            continue;
        }
        // unambiguous with respect to the plain grammar, schema aside
        let plain = enumerate(&plain_g, max_len);
        let mut utts: Vec<Vec<String>> = plain.iter().map(|d| d.utterance()).collect();
        utts.sort();
        utts.dedup();
        if utts.len() == plain.len() {
            return g;
        }
    }
}

/// Grammar file text that parses back to `g` (schema aside).
pub fn grammar_text(g: &Grammar) -> String {
    let mut s = format!("start: {}\n", g.start());
    for r in g.rules() {
        s.push_str(&format!("{r}\n"));
    }
    s
}
