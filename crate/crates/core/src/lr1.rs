//! Canonical LR(1) automaton over the utterance side of a grammar.
//!
//! The automaton answers, for a viable prefix, which next words keep the
//! prefix extendable to a complete sentence, and records the reductions it
//! performs so the derivation can be replayed once the sentence ends.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::grammar::{Derivation, DerivationError, Grammar, Symbol};

/// A next-token choice: a word, or the end of the sentence.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Lookahead {
    Eos,
    Word(String),
}

impl Lookahead {
    pub fn word(w: impl Into<String>) -> Self {
        Lookahead::Word(w.into())
    }
}

impl fmt::Display for Lookahead {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lookahead::Eos => f.write_str("<EOS>"),
            Lookahead::Word(w) => f.write_str(w),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Shift(usize),
    Reduce(usize),
    Accept,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AutomatonError {
    #[error("LR(1) conflict in state {state} on {token}: {}", actions.join(" / "))]
    Lr1Conflict { state: usize, token: String, actions: Vec<String> },
    #[error("start symbol {0} has no rules")]
    NoStart(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("token rejected")]
    Rejected,
    #[error("reduction pruned by a semantic constraint")]
    Pruned,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("configuration has not accepted end of sentence")]
    NotAccepted,
    #[error("inconsistent reduction trace: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Derivation(#[from] DerivationError),
}

// lookahead ids: 0 is EOS, terminal k is k + 1
const EOS: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Sym {
    T(usize),
    N(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Item {
    prod: usize,
    dot: usize,
    la: usize,
}

/// Parser state during word-level decoding.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AutomatonConfig {
    state_stack: Vec<usize>,
    // parallel to state_stack[1..]: rule rooting each non-terminal entry
    roots: Vec<Option<usize>>,
    reductions: Vec<usize>,
    accepted: bool,
}

impl AutomatonConfig {
    pub fn state_stack(&self) -> &[usize] {
        &self.state_stack
    }

    /// Indices of the rules reduced so far, in reduction order.
    pub fn reductions(&self) -> &[usize] {
        &self.reductions
    }

    pub fn is_accepted(&self) -> bool {
        self.accepted
    }
}

#[derive(Debug, Clone)]
pub struct Lr1Table {
    terminals: Vec<String>,
    terminal_ids: HashMap<String, usize>,
    labels: Vec<String>,
    // rule index -> (lhs id, rhs length); the augmented production is last
    prods: Vec<(usize, Vec<Sym>)>,
    states: Vec<Vec<Item>>,
    action: Vec<BTreeMap<usize, Action>>,
    goto: Vec<BTreeMap<usize, usize>>,
}

impl Lr1Table {
    /// Canonical LR(1) construction; any conflict is fatal.
    pub fn build(g: &Grammar) -> Result<Self, AutomatonError> {
        if g.rules_for(g.start()).is_empty() {
            return Err(AutomatonError::NoStart(g.start().to_owned()));
        }
        let terminals: Vec<String> = g.terminals().into_iter().collect();
        let terminal_ids: HashMap<String, usize> =
            terminals.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        let mut labels: Vec<String> = g.labels().map(str::to_owned).collect();
        for r in g.rules() {
            for l in r.nonterminals() {
                if !labels.iter().any(|x| x == l) {
                    labels.push(l.to_owned());
                }
            }
        }
        let label_id = |l: &str| labels.iter().position(|x| x == l).expect("label collected");

        let mut prods: Vec<(usize, Vec<Sym>)> = g
            .rules()
            .iter()
            .map(|r| {
                let rhs = r
                    .utt_rhs
                    .iter()
                    .map(|s| match s {
                        Symbol::Terminal(t) => Sym::T(terminal_ids[t]),
                        Symbol::NonTerminal { label, .. } => Sym::N(label_id(label)),
                    })
                    .collect();
                (label_id(&r.lhs), rhs)
            })
            .collect();
        let aug_lhs = labels.len();
        let augmented = prods.len();
        prods.push((aug_lhs, vec![Sym::N(label_id(g.start()))]));

        let mut by_lhs: Vec<Vec<usize>> = vec![Vec::new(); labels.len() + 1];
        for (i, (lhs, _)) in prods.iter().enumerate() {
            by_lhs[*lhs].push(i);
        }
        let first = first_sets(&prods, labels.len() + 1);

        let closure = |kernel: BTreeSet<Item>| -> Vec<Item> {
            let mut set = kernel;
            let mut work: Vec<Item> = set.iter().copied().collect();
            while let Some(it) = work.pop() {
                let rhs = &prods[it.prod].1;
                let Some(&Sym::N(b)) = rhs.get(it.dot) else { continue };
                let las: Vec<usize> = match rhs.get(it.dot + 1) {
                    None => vec![it.la],
                    Some(Sym::T(t)) => vec![t + 1],
                    Some(Sym::N(c)) => first[*c].iter().map(|t| t + 1).collect(),
                };
                for &q in &by_lhs[b] {
                    for &la in &las {
                        let new = Item { prod: q, dot: 0, la };
                        if set.insert(new) {
                            work.push(new);
                        }
                    }
                }
            }
            set.into_iter().collect()
        };

        let start_state = closure(BTreeSet::from([Item { prod: augmented, dot: 0, la: EOS }]));
        let mut states: Vec<Vec<Item>> = vec![start_state.clone()];
        let mut index: HashMap<Vec<Item>, usize> = HashMap::from([(start_state, 0)]);
        let mut transitions: Vec<BTreeMap<Sym, usize>> = vec![BTreeMap::new()];
        let mut queue = VecDeque::from([0usize]);
        while let Some(s) = queue.pop_front() {
            let mut kernels: BTreeMap<Sym, BTreeSet<Item>> = BTreeMap::new();
            for it in &states[s] {
                if let Some(&x) = prods[it.prod].1.get(it.dot) {
                    kernels.entry(x).or_default().insert(Item { dot: it.dot + 1, ..*it });
                }
            }
            for (x, kernel) in kernels {
                let target = closure(kernel);
                let t = match index.get(&target) {
                    Some(&t) => t,
                    None => {
                        let t = states.len();
                        index.insert(target.clone(), t);
                        states.push(target);
                        transitions.push(BTreeMap::new());
                        queue.push_back(t);
                        t
                    }
                };
                transitions[s].insert(x, t);
            }
        }

        let mut table = Lr1Table {
            terminals,
            terminal_ids,
            labels,
            prods,
            states,
            action: Vec::new(),
            goto: Vec::new(),
        };
        for (s, items) in table.states.iter().enumerate() {
            let mut row: BTreeMap<usize, Action> = BTreeMap::new();
            let mut gotos = BTreeMap::new();
            for (&x, &t) in &transitions[s] {
                match x {
                    Sym::T(term) => {
                        row.insert(term + 1, Action::Shift(t));
                    }
                    Sym::N(n) => {
                        gotos.insert(n, t);
                    }
                }
            }
            for it in items {
                if it.dot < table.prods[it.prod].1.len() {
                    continue;
                }
                let act = if it.prod == augmented { Action::Accept } else { Action::Reduce(it.prod) };
                match row.get(&it.la) {
                    None => {
                        row.insert(it.la, act);
                    }
                    Some(&prev) if prev == act => {}
                    Some(&prev) => {
                        return Err(AutomatonError::Lr1Conflict {
                            state: s,
                            token: table.lookahead_name(it.la),
                            actions: vec![table.describe(g, prev), table.describe(g, act)],
                        });
                    }
                }
            }
            table.action.push(row);
            table.goto.push(gotos);
        }
        Ok(table)
    }

    fn lookahead_name(&self, la: usize) -> String {
        if la == EOS {
            "<EOS>".to_owned()
        } else {
            self.terminals[la - 1].clone()
        }
    }

    fn describe(&self, g: &Grammar, a: Action) -> String {
        match a {
            Action::Shift(t) => format!("shift {t}"),
            Action::Reduce(r) => format!("reduce {}", g.rule(r).id),
            Action::Accept => "accept".to_owned(),
        }
    }

    fn lookahead_id(&self, la: &Lookahead) -> Option<usize> {
        match la {
            Lookahead::Eos => Some(EOS),
            Lookahead::Word(w) => self.terminal_ids.get(w).map(|t| t + 1),
        }
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn action(&self, state: usize, la: &Lookahead) -> Option<Action> {
        self.lookahead_id(la).and_then(|id| self.action[state].get(&id).copied())
    }

    pub fn initial(&self) -> AutomatonConfig {
        AutomatonConfig { state_stack: vec![0], roots: Vec::new(), reductions: Vec::new(), accepted: false }
    }

    /// Shifts one word, performing the reductions its lookahead triggers.
    pub fn step(&self, cfg: &AutomatonConfig, token: &str) -> Result<AutomatonConfig, StepError> {
        self.advance(cfg, &Lookahead::word(token), &mut |_, _| true)
    }

    /// Feeds end-of-sentence; succeeds only if the automaton accepts.
    pub fn accept_eos(&self, cfg: &AutomatonConfig) -> Result<AutomatonConfig, StepError> {
        self.advance(cfg, &Lookahead::Eos, &mut |_, _| true)
    }

    /// Like [`step`](Self::step), but consults `allow(rule, child_rules)` at
    /// every reduction; `child_rules` are the rules rooting the reduced
    /// non-terminal children, in utterance order.
    pub fn advance(
        &self,
        cfg: &AutomatonConfig,
        la: &Lookahead,
        allow: &mut dyn FnMut(usize, &[usize]) -> bool,
    ) -> Result<AutomatonConfig, StepError> {
        if cfg.accepted {
            return Err(StepError::Rejected);
        }
        let id = self.lookahead_id(la).ok_or(StepError::Rejected)?;
        let mut next = cfg.clone();
        loop {
            let top = *next.state_stack.last().expect("non-empty stack");
            match self.action[top].get(&id) {
                None => return Err(StepError::Rejected),
                Some(Action::Shift(t)) => {
                    next.state_stack.push(*t);
                    next.roots.push(None);
                    return Ok(next);
                }
                Some(Action::Accept) => {
                    next.accepted = true;
                    return Ok(next);
                }
                Some(&Action::Reduce(r)) => {
                    let (lhs, rhs) = &self.prods[r];
                    let keep = next.state_stack.len() - rhs.len();
                    let children: Vec<usize> = next.roots[keep - 1..].iter().flatten().copied().collect();
                    if !allow(r, &children) {
                        return Err(StepError::Pruned);
                    }
                    next.state_stack.truncate(keep);
                    next.roots.truncate(keep - 1);
                    let top = *next.state_stack.last().expect("non-empty stack");
                    let target = self.goto[top][lhs];
                    next.state_stack.push(target);
                    next.roots.push(Some(r));
                    next.reductions.push(r);
                }
            }
        }
    }

    /// Every lookahead on which the configuration can advance.
    pub fn acceptable_tokens(&self, cfg: &AutomatonConfig) -> BTreeSet<Lookahead> {
        if cfg.accepted {
            return BTreeSet::new();
        }
        let top = *cfg.state_stack.last().expect("non-empty stack");
        self.action[top]
            .keys()
            .map(|&id| if id == EOS { Lookahead::Eos } else { Lookahead::Word(self.terminals[id - 1].clone()) })
            .filter(|la| self.advance(cfg, la, &mut |_, _| true).is_ok())
            .collect()
    }

    /// Replays the reductions of an accepted configuration into a derivation.
    pub fn config_to_derivation(
        &self,
        g: &Grammar,
        cfg: &AutomatonConfig,
        tokens: &[String],
    ) -> Result<Derivation, TraceError> {
        if !cfg.accepted {
            return Err(TraceError::NotAccepted);
        }
        let d = Derivation::from_postorder(g, &cfg.reductions)?;
        if d.utterance() != tokens {
            return Err(TraceError::Inconsistent(format!(
                "trace yields {:?}, tokens were {:?}",
                d.utterance().join(" "),
                tokens.join(" ")
            )));
        }
        Ok(d)
    }

    /// JSON-friendly view of the table for debugging.
    pub fn dump(&self, g: &Grammar) -> TableDump {
        let item_text = |it: &Item| {
            let (lhs, rhs) = &self.prods[it.prod];
            let name = |s: &Sym| match s {
                Sym::T(t) => self.terminals[*t].clone(),
                Sym::N(n) => self.labels[*n].clone(),
            };
            let lhs = if *lhs == self.labels.len() { "$START'".to_owned() } else { self.labels[*lhs].clone() };
            let mut parts: Vec<String> = rhs.iter().map(name).collect();
            parts.insert(it.dot, "•".to_owned());
            format!("{lhs} -> {}, {}", parts.join(" "), self.lookahead_name(it.la))
        };
        TableDump {
            states: self
                .states
                .iter()
                .enumerate()
                .map(|(id, items)| StateDump { id, items: items.iter().map(item_text).collect() })
                .collect(),
            action: self
                .action
                .iter()
                .enumerate()
                .flat_map(|(s, row)| {
                    row.iter().map(move |(&la, &a)| ActionDump {
                        state: s,
                        lookahead: self.lookahead_name(la),
                        action: match a {
                            Action::Shift(t) => format!("shift {t}"),
                            Action::Reduce(r) => format!("reduce {}", g.rule(r).id),
                            Action::Accept => "accept".to_owned(),
                        },
                    })
                })
                .collect(),
            goto: self
                .goto
                .iter()
                .enumerate()
                .flat_map(|(s, row)| {
                    row.iter().map(move |(&n, &t)| GotoDump { state: s, label: self.labels[n].clone(), target: t })
                })
                .collect(),
        }
    }
}

fn first_sets(prods: &[(usize, Vec<Sym>)], n_labels: usize) -> Vec<BTreeSet<usize>> {
    let mut first = vec![BTreeSet::new(); n_labels];
    loop {
        let mut changed = false;
        for (lhs, rhs) in prods {
            let add: BTreeSet<usize> = match rhs[0] {
                Sym::T(t) => BTreeSet::from([t]),
                Sym::N(n) => first[n].clone(),
            };
            for t in add {
                changed |= first[*lhs].insert(t);
            }
        }
        if !changed {
            return first;
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TableDump {
    pub states: Vec<StateDump>,
    pub action: Vec<ActionDump>,
    pub goto: Vec<GotoDump>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StateDump {
    pub id: usize,
    pub items: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ActionDump {
    pub state: usize,
    pub lookahead: String,
    pub action: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct GotoDump {
    pub state: usize,
    pub label: String,
    pub target: usize,
}
