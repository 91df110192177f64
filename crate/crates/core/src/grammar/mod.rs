//! Synchronous context-free grammars.
//!
//! A rule rewrites one non-terminal into a pair of right-hand sides: the
//! utterance side (canonical words) and the logical side (meaning
//! representation tokens). Non-terminal occurrences are linked one-to-one
//! between the two sides, so a single derivation tree yields both strings.

mod chart;
mod derivation;
mod sample;
mod schema;
mod validate;

pub use chart::{parse_canonical, ParseError};
pub use derivation::{Derivation, DerivationError};
pub use sample::{sample_derivation, sample_derivation_with, SampleError};
pub use schema::{RuleAnnotation, SchemaError, SemanticCtx, SemanticSchema};
pub use validate::{validate_grammar, Issue, ValidationReport};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// One element of a rule right-hand side.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Symbol {
    Terminal(String),
    NonTerminal { label: String, occurrence: u32 },
}

impl Symbol {
    pub fn is_terminal(&self) -> bool {
        matches!(self, Symbol::Terminal(_))
    }

    pub fn label(&self) -> Option<&str> {
        match self {
            Symbol::NonTerminal { label, .. } => Some(label),
            Symbol::Terminal(_) => None,
        }
    }

    pub fn text(&self) -> Option<&str> {
        match self {
            Symbol::Terminal(t) => Some(t),
            Symbol::NonTerminal { .. } => None,
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Terminal(t) => f.write_str(t),
            Symbol::NonTerminal { label, occurrence } => {
                if *occurrence == 1 {
                    f.write_str(label)
                } else {
                    write!(f, "{label}#{occurrence}")
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProductionRule {
    pub id: String,
    pub lhs: String,
    pub utt_rhs: Vec<Symbol>,
    pub lf_rhs: Vec<Symbol>,
    /// For the k-th non-terminal of `lf_rhs`, the index of its partner among
    /// the non-terminals of `utt_rhs` (children are stored in utterance order).
    lf_links: Vec<usize>,
}

impl ProductionRule {
    /// Builds a rule, linking non-terminals by `(label, occurrence)`.
    pub fn new(
        id: impl Into<String>,
        lhs: impl Into<String>,
        utt_rhs: Vec<Symbol>,
        lf_rhs: Vec<Symbol>,
    ) -> Result<Self, LinkError> {
        if utt_rhs.is_empty() || lf_rhs.is_empty() {
            return Err(LinkError::EmptySide);
        }
        let utt_keys = nt_keys(&utt_rhs)?;
        let lf_keys = nt_keys(&lf_rhs)?;
        let mut lf_links = Vec::with_capacity(lf_keys.len());
        for key in &lf_keys {
            match utt_keys.iter().position(|k| k == key) {
                Some(pos) => lf_links.push(pos),
                None => return Err(LinkError::Unlinked(key.0.clone())),
            }
        }
        if let Some(key) = utt_keys.iter().find(|k| !lf_keys.contains(k)) {
            return Err(LinkError::Unlinked(key.0.clone()));
        }
        Ok(ProductionRule { id: id.into(), lhs: lhs.into(), utt_rhs, lf_rhs, lf_links })
    }

    /// Labels of the utterance-side non-terminals, in order.
    pub fn nonterminals(&self) -> impl Iterator<Item = &str> {
        self.utt_rhs.iter().filter_map(Symbol::label)
    }

    pub fn arity(&self) -> usize {
        self.utt_rhs.iter().filter(|s| !s.is_terminal()).count()
    }

    /// Pairs `(utterance nt index, logical nt index)`.
    pub fn nt_links(&self) -> Vec<(usize, usize)> {
        let mut links: Vec<_> = self.lf_links.iter().enumerate().map(|(lf, &utt)| (utt, lf)).collect();
        links.sort_unstable();
        links
    }

    pub(crate) fn lf_child_index(&self, lf_nt: usize) -> usize {
        self.lf_links[lf_nt]
    }

    /// True when no terminal follows a non-terminal on the utterance side.
    pub fn nonterminals_on_right(&self) -> bool {
        match self.utt_rhs.iter().position(|s| !s.is_terminal()) {
            Some(first) => self.utt_rhs[first..].iter().all(|s| !s.is_terminal()),
            None => true,
        }
    }
}

impl fmt::Display for ProductionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {} ->", self.id, self.lhs)?;
        for s in &self.utt_rhs {
            write!(f, " {s}")?;
        }
        f.write_str(" |||")?;
        for s in &self.lf_rhs {
            write!(f, " {s}")?;
        }
        Ok(())
    }
}

fn nt_keys(side: &[Symbol]) -> Result<Vec<(String, u32)>, LinkError> {
    let mut keys: Vec<(String, u32)> = Vec::new();
    for s in side {
        if let Symbol::NonTerminal { label, occurrence } = s {
            let key = (label.clone(), *occurrence);
            if keys.contains(&key) {
                return Err(LinkError::OverLinked(label.clone()));
            }
            keys.push(key);
        }
    }
    Ok(keys)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinkError {
    #[error("over-linked non-terminal {0}")]
    OverLinked(String),
    #[error("unlinked non-terminal {0}")]
    Unlinked(String),
    #[error("both sides of a rule need at least one symbol")]
    EmptySide,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrammarError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: duplicate rule id {id}")]
    DuplicateRuleId { line: usize, id: String },
    #[error("line {line}: {source}")]
    Link { line: usize, source: LinkError },
    #[error("unknown non-terminal {0}")]
    UnknownLabel(String),
    #[error("grammar has no rules")]
    Empty,
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

/// An immutable synchronous grammar.
#[derive(Debug, Clone)]
pub struct Grammar {
    start: String,
    rules: Vec<Arc<ProductionRule>>,
    by_lhs: BTreeMap<String, Vec<usize>>,
    min_len: BTreeMap<String, usize>,
    schema: Option<SemanticSchema>,
    schema_path: Option<String>,
}

impl Grammar {
    pub fn new(start: impl Into<String>, rules: Vec<ProductionRule>) -> Result<Self, GrammarError> {
        if rules.is_empty() {
            return Err(GrammarError::Empty);
        }
        let mut seen = BTreeSet::new();
        for (i, r) in rules.iter().enumerate() {
            if !seen.insert(r.id.clone()) {
                return Err(GrammarError::DuplicateRuleId { line: i + 1, id: r.id.clone() });
            }
        }
        let rules: Vec<Arc<ProductionRule>> = rules.into_iter().map(Arc::new).collect();
        let mut by_lhs: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, r) in rules.iter().enumerate() {
            by_lhs.entry(r.lhs.clone()).or_default().push(i);
        }
        let min_len = min_yield_lengths(&rules);
        Ok(Grammar { start: start.into(), rules, by_lhs, min_len, schema: None, schema_path: None })
    }

    pub fn with_schema(mut self, schema: SemanticSchema) -> Self {
        self.schema = Some(schema);
        self
    }

    pub fn start(&self) -> &str {
        &self.start
    }

    pub fn rules(&self) -> &[Arc<ProductionRule>] {
        &self.rules
    }

    pub fn rule(&self, index: usize) -> &Arc<ProductionRule> {
        &self.rules[index]
    }

    pub fn rule_index(&self, id: &str) -> Option<usize> {
        self.rules.iter().position(|r| r.id == id)
    }

    pub fn schema(&self) -> Option<&SemanticSchema> {
        self.schema.as_ref()
    }

    /// Path named by the `schema:` header, as written in the file.
    pub fn schema_path(&self) -> Option<&str> {
        self.schema_path.as_deref()
    }

    /// Every label that has at least one rule.
    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.by_lhs.keys().map(String::as_str)
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.by_lhs.contains_key(label)
    }

    /// Indices of all rules with the given left-hand side (no schema filter).
    pub fn rules_for(&self, label: &str) -> &[usize] {
        self.by_lhs.get(label).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Utterance-side terminal vocabulary.
    pub fn terminals(&self) -> BTreeSet<String> {
        self.rules
            .iter()
            .flat_map(|r| r.utt_rhs.iter().filter_map(Symbol::text))
            .map(str::to_owned)
            .collect()
    }

    /// Length of the shortest utterance derivable from `label`
    /// (`usize::MAX` when the label derives nothing).
    pub fn min_yield(&self, label: &str) -> usize {
        self.min_len.get(label).copied().unwrap_or(usize::MAX)
    }

    /// Rule indices for `label` that the installed schema allows under `ctx`.
    pub fn expand_rule_indices(&self, label: &str, ctx: &SemanticCtx) -> Result<Vec<usize>, GrammarError> {
        let rules = self
            .by_lhs
            .get(label)
            .ok_or_else(|| GrammarError::UnknownLabel(label.to_owned()))?;
        Ok(rules
            .iter()
            .copied()
            .filter(|&i| self.compatible(i, ctx))
            .collect())
    }

    pub fn expand_rules_for(&self, label: &str, ctx: &SemanticCtx) -> Result<Vec<&ProductionRule>, GrammarError> {
        Ok(self
            .expand_rule_indices(label, ctx)?
            .into_iter()
            .map(|i| self.rules[i].as_ref())
            .collect())
    }

    pub fn compatible(&self, rule: usize, ctx: &SemanticCtx) -> bool {
        match &self.schema {
            Some(schema) => schema.compatible(&self.rules[rule].id, ctx),
            None => true,
        }
    }

    /// Context handed to the non-terminals introduced by `rule`.
    pub fn child_ctx(&self, rule: usize) -> SemanticCtx {
        match &self.schema {
            Some(schema) => schema.ctx_below(&self.rules[rule].id),
            None => SemanticCtx::default(),
        }
    }

    /// Reads a grammar file, loading the schema named in its header
    /// relative to the grammar's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, GrammarError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| GrammarError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let g = parse_grammar(&text)?;
        match g.schema_path.clone() {
            Some(rel) => {
                let base = path.parent().unwrap_or_else(|| Path::new("."));
                let schema = SemanticSchema::load(base.join(rel))?;
                Ok(g.with_schema(schema))
            }
            None => Ok(g),
        }
    }
}

fn min_yield_lengths(rules: &[Arc<ProductionRule>]) -> BTreeMap<String, usize> {
    let mut min: BTreeMap<String, usize> = BTreeMap::new();
    loop {
        let mut changed = false;
        for r in rules {
            let mut total = 0usize;
            for s in &r.utt_rhs {
                let len = match s {
                    Symbol::Terminal(_) => 1,
                    Symbol::NonTerminal { label, .. } => min.get(label).copied().unwrap_or(usize::MAX),
                };
                total = total.saturating_add(len);
            }
            let cur = min.get(&r.lhs).copied().unwrap_or(usize::MAX);
            if total < cur {
                min.insert(r.lhs.clone(), total);
                changed = true;
            }
        }
        if !changed {
            return min;
        }
    }
}

/// Parses the line-based grammar format:
///
/// ```text
/// start: $root
/// schema: geo.schema.json
/// [r_root] $root -> what is $state ||| answer ( $state )
/// $e -> $e#1 plus $e#2 ||| add ( $e#1 , $e#2 )
/// ```
///
/// Rule ids default to `r<k>` with `k` the zero-based rule index.
pub fn parse_grammar(text: &str) -> Result<Grammar, GrammarError> {
    let mut start: Option<String> = None;
    let mut schema_path = None;
    let mut rules: Vec<ProductionRule> = Vec::new();
    let mut ids: BTreeSet<String> = BTreeSet::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let syntax = |message: String| GrammarError::Syntax { line: line_no, message };

        if let Some(rest) = line.strip_prefix("start:") {
            let label = rest.trim();
            if !is_nonterminal_token(label) || label.contains('#') {
                return Err(syntax(format!("start symbol must be a non-terminal, got {label:?}")));
            }
            start = Some(label.to_owned());
            continue;
        }
        if let Some(rest) = line.strip_prefix("schema:") {
            let p = rest.trim();
            if p.is_empty() {
                return Err(syntax("empty schema path".into()));
            }
            schema_path = Some(p.to_owned());
            continue;
        }

        let (id, body) = match line.strip_prefix('[') {
            Some(rest) => {
                let close = rest.find(']').ok_or_else(|| syntax("unterminated rule id".into()))?;
                let id = rest[..close].trim();
                if id.is_empty() || id.contains(char::is_whitespace) {
                    return Err(syntax(format!("bad rule id {id:?}")));
                }
                (id.to_owned(), &rest[close + 1..])
            }
            None => (format!("r{}", rules.len()), line),
        };

        let (lhs, rhs) = body
            .split_once("->")
            .ok_or_else(|| syntax("expected `LHS -> utterance ||| logical form`".into()))?;
        let lhs = lhs.trim();
        if !is_nonterminal_token(lhs) || lhs.contains('#') || lhs.contains(char::is_whitespace) {
            return Err(syntax(format!("left-hand side must be a single non-terminal, got {lhs:?}")));
        }
        let mut sides = rhs.split("|||");
        let (utt, lf) = match (sides.next(), sides.next(), sides.next()) {
            (Some(u), Some(l), None) => (u, l),
            _ => return Err(syntax("expected exactly one `|||` separator".into())),
        };
        let utt = parse_side(utt).map_err(&syntax)?;
        let lf = parse_side(lf).map_err(&syntax)?;
        if utt.is_empty() {
            return Err(syntax("empty utterance side".into()));
        }
        if lf.is_empty() {
            return Err(syntax("empty logical side".into()));
        }
        if !ids.insert(id.clone()) {
            return Err(GrammarError::DuplicateRuleId { line: line_no, id });
        }
        let rule = ProductionRule::new(id, lhs, utt, lf)
            .map_err(|source| GrammarError::Link { line: line_no, source })?;
        rules.push(rule);
    }

    if rules.is_empty() {
        return Err(GrammarError::Empty);
    }
    let start = start.unwrap_or_else(|| rules[0].lhs.clone());
    let mut g = Grammar::new(start, rules)?;
    g.schema_path = schema_path;
    Ok(g)
}

fn is_nonterminal_token(tok: &str) -> bool {
    tok.len() > 1 && tok.starts_with('$')
}

fn parse_side(side: &str) -> Result<Vec<Symbol>, String> {
    side.split_whitespace()
        .map(|tok| {
            if !is_nonterminal_token(tok) {
                return Ok(Symbol::Terminal(tok.to_owned()));
            }
            match tok.split_once('#') {
                None => Ok(Symbol::NonTerminal { label: tok.to_owned(), occurrence: 1 }),
                Some((label, occ)) => {
                    let occurrence: u32 = occ
                        .parse()
                        .ok()
                        .filter(|&k| k >= 1)
                        .ok_or_else(|| format!("bad occurrence tag in {tok:?}"))?;
                    if label.len() < 2 {
                        return Err(format!("bad non-terminal {tok:?}"));
                    }
                    Ok(Symbol::NonTerminal { label: label.to_owned(), occurrence })
                }
            }
        })
        .collect()
}
