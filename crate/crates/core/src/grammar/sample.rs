use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{Derivation, Grammar, SemanticCtx};

const MAX_RETRIES: usize = 64;
const MAX_NODES: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SampleError {
    #[error("max_depth must be at least 1")]
    BadDepth,
    #[error("no eligible rule for {label} at depth {depth} after {retries} retries")]
    DeadEnd { label: String, depth: usize, retries: usize },
}

/// Samples a complete derivation from a fixed seed.
pub fn sample_derivation(g: &Grammar, max_depth: usize, seed: u64) -> Result<Derivation, SampleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_derivation_with(g, max_depth, &mut rng)
}

/// Top-down sampling that expands the leftmost non-terminal first, picking
/// uniformly among schema-compatible rules. Once a node sits at depth
/// `max_depth` or deeper only non-recursive rules are eligible.
pub fn sample_derivation_with<R: Rng + ?Sized>(
    g: &Grammar,
    max_depth: usize,
    rng: &mut R,
) -> Result<Derivation, SampleError> {
    if max_depth == 0 {
        return Err(SampleError::BadDepth);
    }
    let recursive = recursive_rules(g);
    let mut last = None;
    for _ in 0..MAX_RETRIES {
        let mut nodes = 0;
        match expand(g, &recursive, g.start(), &SemanticCtx::default(), 0, max_depth, rng, &mut nodes) {
            Ok(d) => return Ok(d),
            Err((label, depth)) => last = Some((label, depth)),
        }
    }
    let (label, depth) = last.expect("at least one attempt");
    Err(SampleError::DeadEnd { label, depth, retries: MAX_RETRIES })
}

#[allow(clippy::too_many_arguments)]
fn expand<R: Rng + ?Sized>(
    g: &Grammar,
    recursive: &BTreeSet<usize>,
    label: &str,
    ctx: &SemanticCtx,
    depth: usize,
    max_depth: usize,
    rng: &mut R,
    nodes: &mut usize,
) -> Result<Derivation, (String, usize)> {
    *nodes += 1;
    let dead = || (label.to_owned(), depth);
    if *nodes > MAX_NODES {
        return Err(dead());
    }
    let mut eligible = g.expand_rule_indices(label, ctx).map_err(|_| dead())?;
    if depth >= max_depth {
        eligible.retain(|r| !recursive.contains(r));
    }
    let &r = eligible.choose(rng).ok_or_else(dead)?;
    let rule = g.rule(r).clone();
    let child_ctx = g.child_ctx(r);
    let children = rule
        .nonterminals()
        .map(|l| expand(g, recursive, l, &child_ctx, depth + 1, max_depth, rng, nodes))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Derivation::new(rule, children))
}

/// Rules whose right-hand side mentions a non-terminal that can reach the
/// rule's own left-hand side.
pub(crate) fn recursive_rules(g: &Grammar) -> BTreeSet<usize> {
    let mut edges: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for r in g.rules() {
        edges.entry(r.lhs.as_str()).or_default().extend(r.nonterminals());
    }
    fn reach<'a>(edges: &BTreeMap<&'a str, BTreeSet<&'a str>>, from: &'a str) -> BTreeSet<&'a str> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![from];
        while let Some(l) = stack.pop() {
            if seen.insert(l) {
                if let Some(next) = edges.get(l) {
                    stack.extend(next.iter().copied());
                }
            }
        }
        seen
    }
    g.rules()
        .iter()
        .enumerate()
        .filter(|(_, r)| r.nonterminals().any(|nt| reach(&edges, nt).contains(r.lhs.as_str())))
        .map(|(i, _)| i)
        .collect()
}
