use std::sync::Arc;

use serde::ser::{Serialize, SerializeStruct, Serializer};
use serde_json::Value;
use thiserror::Error;

use super::{Grammar, ProductionRule, Symbol};

/// A tree of rule applications. Children follow the order of the
/// non-terminals on the rule's utterance side.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Derivation {
    pub rule: Arc<ProductionRule>,
    pub children: Vec<Derivation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DerivationError {
    #[error("incomplete derivation: rule {rule} has {got} children, expected {expected}")]
    Incomplete { rule: String, got: usize, expected: usize },
    #[error("child {index} of rule {rule} expands {got}, expected {expected}")]
    LabelMismatch { rule: String, index: usize, got: String, expected: String },
    #[error("unknown rule id {0}")]
    UnknownRule(String),
    #[error("malformed derivation JSON: {0}")]
    Json(String),
}

impl Derivation {
    pub fn leaf(rule: Arc<ProductionRule>) -> Self {
        Derivation { rule, children: Vec::new() }
    }

    pub fn new(rule: Arc<ProductionRule>, children: Vec<Derivation>) -> Self {
        Derivation { rule, children }
    }

    /// Checks arity and child labels over the whole tree.
    pub fn check(&self) -> Result<(), DerivationError> {
        let labels: Vec<&str> = self.rule.nonterminals().collect();
        if labels.len() != self.children.len() {
            return Err(DerivationError::Incomplete {
                rule: self.rule.id.clone(),
                got: self.children.len(),
                expected: labels.len(),
            });
        }
        for (i, (child, label)) in self.children.iter().zip(labels).enumerate() {
            if child.rule.lhs != label {
                return Err(DerivationError::LabelMismatch {
                    rule: self.rule.id.clone(),
                    index: i,
                    got: child.rule.lhs.clone(),
                    expected: label.to_owned(),
                });
            }
            child.check()?;
        }
        Ok(())
    }

    pub fn utterance(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.push_utterance(&mut out);
        out
    }

    pub fn logical_form(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.push_logical(&mut out);
        out
    }

    fn push_utterance(&self, out: &mut Vec<String>) {
        let mut k = 0;
        for s in &self.rule.utt_rhs {
            match s {
                Symbol::Terminal(t) => out.push(t.clone()),
                Symbol::NonTerminal { .. } => {
                    self.children[k].push_utterance(out);
                    k += 1;
                }
            }
        }
    }

    fn push_logical(&self, out: &mut Vec<String>) {
        let mut k = 0;
        for s in &self.rule.lf_rhs {
            match s {
                Symbol::Terminal(t) => out.push(t.clone()),
                Symbol::NonTerminal { .. } => {
                    self.children[self.rule.lf_child_index(k)].push_logical(out);
                    k += 1;
                }
            }
        }
    }

    /// `(canonical utterance, logical form)` of a complete derivation.
    pub fn to_pair(&self) -> Result<(Vec<String>, Vec<String>), DerivationError> {
        self.check()?;
        Ok((self.utterance(), self.logical_form()))
    }

    /// Rule ids in pre-order (the leftmost-derivation order).
    pub fn rule_ids(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |d| out.push(d.rule.id.as_str()));
        out
    }

    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Derivation)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(Derivation::depth).max().unwrap_or(0)
    }

    /// Rebuilds a tree from `{rule_id, children}` JSON.
    pub fn from_json(g: &Grammar, value: &Value) -> Result<Self, DerivationError> {
        let obj = value
            .as_object()
            .ok_or_else(|| DerivationError::Json("expected an object".into()))?;
        let id = obj
            .get("rule_id")
            .and_then(Value::as_str)
            .ok_or_else(|| DerivationError::Json("missing rule_id".into()))?;
        let rule = g
            .rule_index(id)
            .map(|i| g.rule(i).clone())
            .ok_or_else(|| DerivationError::UnknownRule(id.to_owned()))?;
        let children = match obj.get("children") {
            None => Vec::new(),
            Some(Value::Array(items)) => items
                .iter()
                .map(|c| Derivation::from_json(g, c))
                .collect::<Result<_, _>>()?,
            Some(_) => return Err(DerivationError::Json("children must be an array".into())),
        };
        let d = Derivation { rule, children };
        d.check()?;
        Ok(d)
    }

    /// Builds a tree from rule indices listed in pre-order.
    pub(crate) fn from_preorder(g: &Grammar, rules: &[usize]) -> Result<Self, DerivationError> {
        let mut it = rules.iter();
        let d = build_preorder(g, &mut it)?;
        if it.next().is_some() {
            return Err(DerivationError::Json("trailing rules in trace".into()));
        }
        Ok(d)
    }

    /// Builds a tree from rule indices listed in post-order (LR reduction order).
    pub(crate) fn from_postorder(g: &Grammar, rules: &[usize]) -> Result<Self, DerivationError> {
        let mut stack: Vec<Derivation> = Vec::new();
        for &r in rules {
            let rule = g.rule(r).clone();
            let n = rule.arity();
            if stack.len() < n {
                return Err(DerivationError::Incomplete { rule: rule.id.clone(), got: stack.len(), expected: n });
            }
            let children = stack.split_off(stack.len() - n);
            stack.push(Derivation { rule, children });
        }
        match (stack.pop(), stack.is_empty()) {
            (Some(d), true) => {
                d.check()?;
                Ok(d)
            }
            _ => Err(DerivationError::Json("reduction trace does not form one tree".into())),
        }
    }
}

fn build_preorder<'a>(g: &Grammar, it: &mut impl Iterator<Item = &'a usize>) -> Result<Derivation, DerivationError> {
    let &r = it
        .next()
        .ok_or_else(|| DerivationError::Json("trace ended early".into()))?;
    let rule = g.rule(r).clone();
    let children = (0..rule.arity())
        .map(|_| build_preorder(g, it))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Derivation { rule, children })
}

impl Serialize for Derivation {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("Derivation", 2)?;
        st.serialize_field("rule_id", &self.rule.id)?;
        st.serialize_field("children", &self.children)?;
        st.end()
    }
}
