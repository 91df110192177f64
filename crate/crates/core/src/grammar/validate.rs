use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::Grammar;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(tag = "kind", content = "name", rename_all = "snake_case")]
pub enum Issue {
    /// A label that derives no finite string (including labels without rules).
    Unproductive(String),
    /// A left-hand side that cannot be reached from the start symbol.
    Unreachable(String),
    /// A schema annotation naming a rule id the grammar does not have.
    UnknownAnnotatedRule(String),
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::Unproductive(l) => write!(f, "unproductive: {l}"),
            Issue::Unreachable(l) => write!(f, "unreachable: {l}"),
            Issue::UnknownAnnotatedRule(id) => write!(f, "schema annotates unknown rule: {id}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.issues {
            writeln!(f, "{issue}")?;
        }
        Ok(())
    }
}

pub fn validate_grammar(g: &Grammar) -> ValidationReport {
    let mut issues = BTreeSet::new();

    let mut mentioned: BTreeSet<&str> = BTreeSet::new();
    mentioned.insert(g.start());
    for r in g.rules() {
        mentioned.insert(&r.lhs);
        mentioned.extend(r.nonterminals());
    }
    for label in &mentioned {
        if g.min_yield(label) == usize::MAX {
            issues.insert(Issue::Unproductive((*label).to_owned()));
        }
    }

    let mut reached: BTreeSet<&str> = BTreeSet::new();
    let mut stack = vec![g.start()];
    while let Some(label) = stack.pop() {
        if !reached.insert(label) {
            continue;
        }
        for &r in g.rules_for(label) {
            stack.extend(g.rule(r).nonterminals());
        }
    }
    for label in g.labels() {
        if !reached.contains(label) {
            issues.insert(Issue::Unreachable(label.to_owned()));
        }
    }

    if let Some(schema) = g.schema() {
        for id in schema.annotated_rules() {
            if g.rule_index(id).is_none() {
                issues.insert(Issue::UnknownAnnotatedRule(id.to_owned()));
            }
        }
    }

    ValidationReport { issues: issues.into_iter().collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::tests::{g1, G1};
    use crate::grammar::{parse_grammar, RuleAnnotation, SemanticSchema};

    #[test]
    fn g1_is_valid() {
        assert!(validate_grammar(&g1()).is_empty());
    }

    #[test]
    fn missing_city_rule() {
        let text: String = G1.lines().filter(|l| !l.contains("r_city")).map(|l| format!("{l}\n")).collect();
        let report = validate_grammar(&parse_grammar(&text).unwrap());
        assert!(report.to_string().contains("unproductive: $city"), "{report}");
    }

    #[test]
    fn orphan_rule() {
        let report = validate_grammar(&parse_grammar(&format!("{G1}$orphan -> x ||| x\n")).unwrap());
        assert_eq!(report.issues, vec![Issue::Unreachable("$orphan".into())]);
    }

    #[test]
    fn schema_with_unknown_rule() {
        let schema = SemanticSchema::new().annotate(
            "r_missing",
            RuleAnnotation { predicate: "p".into(), result_type: "t".into(), argument_types: vec![] },
        );
        let report = validate_grammar(&g1().with_schema(schema));
        assert_eq!(report.issues, vec![Issue::UnknownAnnotatedRule("r_missing".into())]);
    }
}
