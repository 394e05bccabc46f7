//! Static temporal verification: breadth-first search over the product of
//! a workflow graph and a compiled policy monitor.
//!
//! A product state `(v, q)` means "about to execute node `v` with the
//! monitor in state `q`". Dequeuing it feeds the node's events through the
//! monitor; successors inherit the resulting state. Every product state is
//! visited at most once, so the search explores at most `|V| * |Q|` states
//! and terminates on cyclic graphs.

use std::collections::VecDeque;
use std::fmt::{self, Write as _};

use serde::Serialize;

use crate::dfa::{Dfa, Valuation};
use crate::error::GraphError;
use crate::event::{valuation_of, Event};
use crate::graph::{validate_graph, AgentGraph, GraphIndex, Node, NodeKind};
use crate::policy::{CompiledRule, HandlingLevel};

/// The synthetic events a node contributes to every path through it.
///
/// TOOL nodes emit one event per declared tool, in name order. Every other
/// node emits a single event tagged with its lowercase kind.
pub fn event_symbols(node: &Node) -> Vec<Event> {
    match node.kind {
        NodeKind::Tool => node.tools.iter().map(|t| Event::tool(t)).collect(),
        kind => vec![Event::tagged([kind.label().to_ascii_lowercase()])],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ProductState {
    pub node: usize,
    pub dfa_state: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FindingKind {
    Violation,
    UnresolvedObligation,
}

impl fmt::Display for FindingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FindingKind::Violation => "VIOLATION",
            FindingKind::UnresolvedObligation => "UNRESOLVED_OBLIGATION",
        })
    }
}

/// Where an unresolved obligation was left open.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    Exit,
    DeadEnd,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StaticViolation {
    pub rule: String,
    pub kind: FindingKind,
    /// Only set for unresolved obligations.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terminal: Option<Terminal>,
    /// Entry-rooted node path ending at the offending node.
    pub witness: Vec<String>,
    pub product_states_explored: usize,
}

/// One rule's result against one graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StaticRuleOutcome {
    pub rule: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub handling: Option<HandlingLevel>,
    pub passed: bool,
    pub finding: Option<StaticViolation>,
    pub product_states_explored: usize,
}

impl StaticRuleOutcome {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let level = self
            .handling
            .map(|h| format!(" [{h}]"))
            .unwrap_or_default();
        match &self.finding {
            None => {
                let _ = writeln!(
                    out,
                    "PASS rule {}{level} ({} product states)",
                    self.rule, self.product_states_explored
                );
            }
            Some(f) => {
                let at = match f.terminal {
                    Some(Terminal::Exit) => " at exit",
                    Some(Terminal::DeadEnd) => " at dead end",
                    None => "",
                };
                let _ = writeln!(
                    out,
                    "FAIL rule {}{level} {}{at} ({} product states)",
                    self.rule, f.kind, self.product_states_explored
                );
                let _ = writeln!(out, "    witness: {}", f.witness.join(" -> "));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StaticOptions {
    /// Report obligations still open at an exit or dead end.
    pub strict_finish: bool,
}

impl Default for StaticOptions {
    fn default() -> Self {
        StaticOptions {
            strict_finish: true,
        }
    }
}

/// Checks one monitor against every path of `graph` from its entry.
///
/// Returns the first violation in breadth-first order; failing that, the
/// first open obligation at a terminal node (when `strict_finish` is set).
pub fn verify_static(
    graph: &AgentGraph,
    rule: &str,
    dfa: &Dfa,
    options: StaticOptions,
) -> Result<StaticRuleOutcome, GraphError> {
    let violations = validate_graph(graph);
    if !violations.is_empty() {
        return Err(GraphError::Invalid(violations));
    }
    let index = GraphIndex::new(graph);
    let entry = index.require(&graph.entry)?;
    Ok(search(&index, entry, rule, dfa, options))
}

fn search(
    index: &GraphIndex<'_>,
    entry: usize,
    rule: &str,
    dfa: &Dfa,
    options: StaticOptions,
) -> StaticRuleOutcome {
    let symbols: Vec<Vec<Valuation>> = index
        .nodes
        .iter()
        .map(|n| {
            event_symbols(n)
                .iter()
                .map(|e| valuation_of(e, dfa.atoms()))
                .collect()
        })
        .collect();
    let q_count = dfa.state_count();
    let mut seen = vec![false; index.len() * q_count];
    // Discovered states in BFS order, with their parent's position.
    let mut states: Vec<(ProductState, Option<usize>)> = Vec::new();
    let mut queue = VecDeque::new();
    let mut open_terminal: Option<(usize, Terminal)> = None;

    seen[entry * q_count + dfa.initial()] = true;
    states.push((
        ProductState {
            node: entry,
            dfa_state: dfa.initial(),
        },
        None,
    ));
    queue.push_back(0);

    let witness = |states: &[(ProductState, Option<usize>)], mut at: usize| {
        let mut path = vec![states[at].0.node];
        while let Some(p) = states[at].1 {
            path.push(states[p].0.node);
            at = p;
        }
        path.reverse();
        index.names(&path)
    };

    let mut explored = 0;
    while let Some(pos) = queue.pop_front() {
        explored += 1;
        let ProductState { node, dfa_state } = states[pos].0;
        let q = symbols[node]
            .iter()
            .fold(dfa_state, |q, &v| dfa.step_unchecked(q, v));
        if dfa.is_violating(q) {
            return StaticRuleOutcome {
                rule: rule.to_string(),
                handling: None,
                passed: false,
                finding: Some(StaticViolation {
                    rule: rule.to_string(),
                    kind: FindingKind::Violation,
                    terminal: None,
                    witness: witness(&states, pos),
                    product_states_explored: explored,
                }),
                product_states_explored: explored,
            };
        }
        let succ = &index.succ[node];
        if open_terminal.is_none() && dfa.is_pending(q) {
            if index.kinds[node] == NodeKind::Exit {
                open_terminal = Some((pos, Terminal::Exit));
            } else if succ.is_empty() {
                open_terminal = Some((pos, Terminal::DeadEnd));
            }
        }
        for &u in succ {
            let slot = u * q_count + q;
            if !seen[slot] {
                seen[slot] = true;
                states.push((
                    ProductState {
                        node: u,
                        dfa_state: q,
                    },
                    Some(pos),
                ));
                queue.push_back(states.len() - 1);
            }
        }
    }

    let finding = open_terminal
        .filter(|_| options.strict_finish)
        .map(|(pos, terminal)| StaticViolation {
            rule: rule.to_string(),
            kind: FindingKind::UnresolvedObligation,
            terminal: Some(terminal),
            witness: witness(&states, pos),
            product_states_explored: explored,
        });
    StaticRuleOutcome {
        rule: rule.to_string(),
        handling: None,
        passed: finding.is_none(),
        finding,
        product_states_explored: explored,
    }
}

/// Runs [`verify_static`] for every rule, in file order.
pub fn verify_policy_file(
    graph: &AgentGraph,
    rules: &[CompiledRule],
    options: StaticOptions,
) -> Result<Vec<StaticRuleOutcome>, GraphError> {
    let violations = validate_graph(graph);
    if !violations.is_empty() {
        return Err(GraphError::Invalid(violations));
    }
    let index = GraphIndex::new(graph);
    let entry = index.require(&graph.entry)?;
    Ok(rules
        .iter()
        .map(|r| StaticRuleOutcome {
            handling: Some(r.handling),
            ..search(&index, entry, &r.name, &r.dfa, options)
        })
        .collect())
}
