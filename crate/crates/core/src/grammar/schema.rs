use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Allow-list of `(predicate, argument type)` pairs plus per-rule typing.
///
/// A rule annotated with result type `T` may fill an argument slot of a
/// parent rule annotated with predicate `P` only when `(P, T)` is allowed.
/// Unannotated rules, and slots whose parent is unannotated, are unconstrained.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticSchema {
    #[serde(default)]
    allowed: BTreeSet<(String, String)>,
    #[serde(default, rename = "rules")]
    rule_annotations: BTreeMap<String, RuleAnnotation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleAnnotation {
    pub predicate: String,
    #[serde(rename = "result")]
    pub result_type: String,
    #[serde(default, rename = "args")]
    pub argument_types: Vec<String>,
}

/// What the enclosing rule imposes on a non-terminal being expanded.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SemanticCtx {
    pub parent_predicate: Option<String>,
}

impl SemanticCtx {
    pub fn under(predicate: impl Into<String>) -> Self {
        SemanticCtx { parent_predicate: Some(predicate.into()) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("cannot read schema {path}: {message}")]
    Io { path: String, message: String },
    #[error("bad schema JSON: {0}")]
    Json(String),
}

impl SemanticSchema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn allow(mut self, predicate: impl Into<String>, arg_type: impl Into<String>) -> Self {
        self.allowed.insert((predicate.into(), arg_type.into()));
        self
    }

    pub fn annotate(mut self, rule_id: impl Into<String>, annotation: RuleAnnotation) -> Self {
        self.rule_annotations.insert(rule_id.into(), annotation);
        self
    }

    pub fn remove(&mut self, predicate: &str, arg_type: &str) -> bool {
        self.allowed.remove(&(predicate.to_owned(), arg_type.to_owned()))
    }

    pub fn allowed(&self) -> impl Iterator<Item = (&str, &str)> {
        self.allowed.iter().map(|(p, t)| (p.as_str(), t.as_str()))
    }

    pub fn is_allowed(&self, predicate: &str, arg_type: &str) -> bool {
        self.allowed.contains(&(predicate.to_owned(), arg_type.to_owned()))
    }

    pub fn annotation(&self, rule_id: &str) -> Option<&RuleAnnotation> {
        self.rule_annotations.get(rule_id)
    }

    pub fn annotated_rules(&self) -> impl Iterator<Item = &str> {
        self.rule_annotations.keys().map(String::as_str)
    }

    pub fn compatible(&self, rule_id: &str, ctx: &SemanticCtx) -> bool {
        match (&ctx.parent_predicate, self.annotation(rule_id)) {
            (Some(parent), Some(ann)) => self.is_allowed(parent, &ann.result_type),
            _ => true,
        }
    }

    pub fn ctx_below(&self, rule_id: &str) -> SemanticCtx {
        SemanticCtx { parent_predicate: self.annotation(rule_id).map(|a| a.predicate.clone()) }
    }

    pub fn from_json(text: &str) -> Result<Self, SchemaError> {
        serde_json::from_str(text).map_err(|e| SchemaError::Json(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SchemaError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SchemaError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::tests::g1;

    fn loc_schema() -> SemanticSchema {
        SemanticSchema::from_json(
            r#"{
                "allowed": [["loc_1", "state"]],
                "rules": {
                    "r_state_loc": {"predicate": "state", "result": "state", "args": ["city"]},
                    "r_state0": {"predicate": "state0", "result": "state0"}
                }
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn forbidden_pair_filters_one_rule() {
        let g = g1().with_schema(loc_schema());
        let ctx = SemanticCtx::under("loc_1");
        let rules = g.expand_rules_for("$state", &ctx).unwrap();
        assert_eq!(rules.len(), 1);
        assert_eq!(rules[0].id, "r_state_loc");
        assert_eq!(g.expand_rules_for("$state", &SemanticCtx::default()).unwrap().len(), 2);
    }

    #[test]
    fn allowing_more_never_shrinks() {
        let g = g1().with_schema(loc_schema().allow("loc_1", "state0"));
        assert_eq!(g.expand_rules_for("$state", &SemanticCtx::under("loc_1")).unwrap().len(), 2);
    }

    #[test]
    fn bad_json_is_reported() {
        assert!(matches!(SemanticSchema::from_json("{\"allowed\": 3}"), Err(SchemaError::Json(_))));
    }
}
