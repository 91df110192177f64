//! Semantic parsing as grammar-constrained paraphrasing.
//!
//! An input utterance is "paraphrased" into a canonical utterance of a
//! synchronous grammar; because every canonical utterance comes with its
//! derivation, the logical form falls out of the same search. The crate
//! provides the grammar machinery, an LR(1) automaton for word-level
//! constraints, rule-level and word-level beam decoders, an IBM Model 2
//! reranker and a training-data synthesizer.

pub mod align;
pub mod datagen;
pub mod decoder;
pub mod eval;
pub mod grammar;
pub mod lr1;
pub mod scorer;

pub use grammar::{parse_canonical, parse_grammar, validate_grammar, Derivation, Grammar, ProductionRule, Symbol};

/// Splits on whitespace into owned tokens.
pub fn tokens(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_owned).collect()
}
