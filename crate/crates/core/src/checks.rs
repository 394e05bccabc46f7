//! Structural predicates over a workflow graph, each with a severity and,
//! where a path demonstrates the defect, a witness trace from the entry.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::GraphError;
use crate::graph::{validate_graph, AgentGraph, Bfs, Edge, EdgeKind, GraphIndex, NodeKind};
use crate::static_verify::StaticRuleOutcome;

/// Prefix of the final witness element when the defect has no connecting path.
pub const UNREACHABLE_MARKER: &str = "⊣ unreachable: ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CheckId {
    ExitReach,
    ExitReachAll,
    NoDeadEnds,
    RouterShape,
    HumanGate,
    HumanGateCoverage,
    ToolDeclarations,
}

impl CheckId {
    pub const ALL: [CheckId; 7] = [
        CheckId::ExitReach,
        CheckId::ExitReachAll,
        CheckId::NoDeadEnds,
        CheckId::RouterShape,
        CheckId::HumanGate,
        CheckId::HumanGateCoverage,
        CheckId::ToolDeclarations,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CheckId::ExitReach => "EXIT_REACH",
            CheckId::ExitReachAll => "EXIT_REACH_ALL",
            CheckId::NoDeadEnds => "NO_DEAD_ENDS",
            CheckId::RouterShape => "ROUTER_SHAPE",
            CheckId::HumanGate => "HUMAN_GATE",
            CheckId::HumanGateCoverage => "HUMAN_GATE_COVERAGE",
            CheckId::ToolDeclarations => "TOOL_DECLARATIONS",
        }
    }

    pub fn severity(self) -> Severity {
        match self {
            CheckId::ExitReach | CheckId::ExitReachAll => Severity::Critical,
            CheckId::NoDeadEnds | CheckId::HumanGate | CheckId::HumanGateCoverage => Severity::High,
            CheckId::RouterShape => Severity::Medium,
            CheckId::ToolDeclarations => Severity::Low,
        }
    }
}

impl fmt::Display for CheckId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CheckId {
    type Err = String;

    /// Accepts the canonical names case-insensitively, with `-` in place of `_`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        CheckId::ALL
            .into_iter()
            .find(|c| c.name() == norm)
            .ok_or_else(|| format!("unknown check {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Severity {
    Critical,
    High,
    Medium,
    Low,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Critical => "CRITICAL",
            Severity::High => "HIGH",
            Severity::Medium => "MEDIUM",
            Severity::Low => "LOW",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CheckConfig {
    pub require_human: bool,
    /// Non-empty enables the human-gate coverage check.
    pub sensitive_tools: BTreeSet<String>,
    pub suppressions: BTreeMap<CheckId, BTreeSet<String>>,
}

impl CheckConfig {
    pub fn suppress(&mut self, check: CheckId, node: impl Into<String>) {
        self.suppressions.entry(check).or_default().insert(node.into());
    }
}

/// A node id, or an edge for router-shape findings.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(untagged)]
pub enum Offender {
    Node(String),
    Edge(Edge),
}

impl Offender {
    /// The node a suppression entry has to name to silence this offender.
    pub fn anchor(&self) -> &str {
        match self {
            Offender::Node(id) => id,
            Offender::Edge(e) => &e.src,
        }
    }
}

impl fmt::Display for Offender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Offender::Node(id) => f.write_str(id),
            Offender::Edge(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckResult {
    pub check: CheckId,
    pub passed: bool,
    pub severity: Severity,
    pub offenders: Vec<Offender>,
    pub witness: Option<Vec<String>>,
    pub message: String,
    /// Set when suppression changed the outcome.
    pub note: Option<String>,
    pub suppressed: Vec<Offender>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub graph: String,
    pub results: Vec<CheckResult>,
    pub temporal_static: Vec<StaticRuleOutcome>,
    pub overall_passed: bool,
}

impl VerificationReport {
    pub fn with_graph_name(mut self, name: impl Into<String>) -> Self {
        self.graph = name.into();
        self
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.results.iter().filter(|r| !r.passed)
    }

    pub fn result(&self, check: CheckId) -> Option<&CheckResult> {
        self.results.iter().find(|r| r.check == check)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }

    /// One line per check, witness paths indented below failures.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        if !self.graph.is_empty() {
            let _ = writeln!(out, "graph: {}", self.graph);
        }
        for r in &self.results {
            let verdict = if r.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{verdict} {} [{}] {}", r.check, r.severity, r.message);
            if let Some(note) = &r.note {
                let _ = writeln!(out, "    note: {note}");
            }
            if let (false, Some(w)) = (r.passed, &r.witness) {
                let _ = writeln!(out, "    witness: {}", w.join(" -> "));
            }
        }
        for rule in &self.temporal_static {
            out.push_str(&rule.render_text());
        }
        let _ = writeln!(
            out,
            "overall: {}",
            if self.overall_passed { "PASS" } else { "FAIL" }
        );
        out
    }
}

/// Shared per-graph state for one batch of checks.
struct Ctx<'g> {
    graph: &'g AgentGraph,
    index: GraphIndex<'g>,
    entry: usize,
    forward: Bfs,
}

impl<'g> Ctx<'g> {
    fn new(graph: &'g AgentGraph) -> Result<Self, GraphError> {
        let index = GraphIndex::new(graph);
        let entry = index.require(&graph.entry)?;
        let forward = index.bfs_layers(&[entry], &index.succ, |_| false);
        Ok(Ctx {
            graph,
            index,
            entry,
            forward,
        })
    }

    fn node_indices(&self, kind: NodeKind) -> impl Iterator<Item = usize> + '_ {
        (0..self.index.len()).filter(move |&i| self.index.kinds[i] == kind)
    }

    fn human_free_bfs(&self) -> Bfs {
        self.index.bfs_layers(&[self.entry], &self.index.succ, |i| {
            self.index.kinds[i] == NodeKind::Human
        })
    }

    fn dead_ends(&self) -> Vec<usize> {
        (0..self.index.len())
            .filter(|&i| self.index.kinds[i] != NodeKind::Exit && self.index.succ[i].is_empty())
            .collect()
    }

    /// Path from the entry to the deepest reached node (smallest id on ties),
    /// closed by a marker naming `target`.
    fn frontier_witness(&self, target: &str) -> Vec<String> {
        let deepest = (0..self.index.len())
            .filter(|&i| self.forward.reached(i))
            .max_by(|&a, &b| {
                self.forward.depth[a]
                    .cmp(&self.forward.depth[b])
                    .then(b.cmp(&a))
            })
            .unwrap_or(self.entry);
        let path = self
            .index
            .path_to(&self.forward.parent, deepest)
            .unwrap_or_else(|| vec![self.entry]);
        let mut names = self.index.names(&path);
        names.push(format!("{UNREACHABLE_MARKER}{target}"));
        names
    }

    /// Entry-rooted path to the first offender reachable in `bfs`, or a
    /// frontier witness when none of them is reachable.
    fn witness_to(&self, bfs: &Bfs, offenders: &[Offender]) -> Option<Vec<String>> {
        let ids: Vec<usize> = offenders
            .iter()
            .filter_map(|o| match o {
                Offender::Node(id) => self.index.index_of(id),
                Offender::Edge(_) => None,
            })
            .collect();
        if let Some(&first) = ids.iter().find(|&&i| bfs.reached(i)) {
            return self
                .index
                .path_to(&bfs.parent, first)
                .map(|p| self.index.names(&p));
        }
        ids.first()
            .map(|&i| self.frontier_witness(self.index.ids[i]))
    }
}

/// How a failing check demonstrates its offenders.
#[derive(Clone, Copy)]
enum WitnessKind {
    None,
    /// Deepest reachable node, then a marker for the first offender.
    Frontier,
    /// Shortest entry path to the first reachable offender.
    Path,
    /// Same, but through the graph with every HUMAN node removed.
    HumanFreePath,
}

struct Outcome {
    offenders: Vec<Offender>,
    witness: WitnessKind,
    fail_message: fn(&[Offender]) -> String,
    pass_message: &'static str,
}

fn finish(
    ctx: &Ctx<'_>,
    check: CheckId,
    outcome: Outcome,
    suppressed: Option<&BTreeSet<String>>,
) -> CheckResult {
    let (kept, dropped): (Vec<Offender>, Vec<Offender>) = outcome
        .offenders
        .into_iter()
        .partition(|o| suppressed.is_none_or(|s| !s.contains(o.anchor())));
    let passed = kept.is_empty();
    let note = (!dropped.is_empty() && passed)
        .then(|| format!("passes after suppressing {}", list(&dropped)));
    let (witness, message) = if passed {
        (None, outcome.pass_message.to_string())
    } else {
        let witness = match outcome.witness {
            WitnessKind::None => None,
            WitnessKind::Frontier => kept.first().map(|o| ctx.frontier_witness(o.anchor())),
            WitnessKind::Path => ctx.witness_to(&ctx.forward, &kept),
            WitnessKind::HumanFreePath => {
                let bfs = ctx.human_free_bfs();
                ctx.witness_to(&bfs, &kept)
            }
        };
        (witness, (outcome.fail_message)(&kept))
    };
    CheckResult {
        check,
        passed,
        severity: check.severity(),
        offenders: kept,
        witness,
        message,
        note,
        suppressed: dropped,
    }
}

fn failed_without_offenders(check: CheckId, message: impl Into<String>) -> CheckResult {
    CheckResult {
        check,
        passed: false,
        severity: check.severity(),
        offenders: Vec::new(),
        witness: None,
        message: message.into(),
        note: None,
        suppressed: Vec::new(),
    }
}

fn skipped(check: CheckId, message: &str) -> CheckResult {
    CheckResult {
        check,
        passed: true,
        severity: check.severity(),
        offenders: Vec::new(),
        witness: None,
        message: message.to_string(),
        note: None,
        suppressed: Vec::new(),
    }
}

fn list(offenders: &[Offender]) -> String {
    offenders
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

fn node_offenders(ctx: &Ctx<'_>, ids: impl IntoIterator<Item = usize>) -> Vec<Offender> {
    ids.into_iter()
        .map(|i| Offender::Node(ctx.index.ids[i].to_string()))
        .collect()
}

fn exit_reach(ctx: &Ctx<'_>) -> Outcome {
    let offenders: Vec<Offender> = ctx
        .graph
        .exits
        .iter()
        .filter(|x| ctx.index.index_of(x).is_none_or(|i| !ctx.forward.reached(i)))
        .map(|x| Offender::Node(x.clone()))
        .collect();
    Outcome {
        offenders,
        witness: WitnessKind::Frontier,
        fail_message: |kept| format!("exit not reachable from entry: {}", list(kept)),
        pass_message: "every exit is reachable from the entry",
    }
}

fn exit_reach_all(ctx: &Ctx<'_>) -> Outcome {
    // Paths that stop at a dead end terminate; NO_DEAD_ENDS owns those nodes.
    let mut targets: Vec<usize> = ctx.node_indices(NodeKind::Exit).collect();
    targets.extend(ctx.dead_ends());
    let backward = ctx.index.bfs(&targets, &ctx.index.pred, |_| false);
    let livelock = (0..ctx.index.len()).filter(|&i| ctx.forward.reached(i) && backward[i].is_none());
    Outcome {
        offenders: node_offenders(ctx, livelock),
        witness: WitnessKind::Path,
        fail_message: |kept| {
            format!(
                "{} reachable node(s) can never terminate (livelock): {}",
                kept.len(),
                list(kept)
            )
        },
        pass_message: "every reachable node can reach termination",
    }
}

fn dead_ends(ctx: &Ctx<'_>) -> Outcome {
    Outcome {
        offenders: node_offenders(ctx, ctx.dead_ends()),
        witness: WitnessKind::Path,
        fail_message: |kept| {
            format!("{} non-exit node(s) without outgoing edges: {}", kept.len(), list(kept))
        },
        pass_message: "every non-exit node has a successor",
    }
}

fn router_shape(ctx: &Ctx<'_>) -> Outcome {
    let mut bad: Vec<&Edge> = ctx
        .graph
        .edges
        .iter()
        .filter(|e| {
            e.kind != EdgeKind::Conditional
                && ctx
                    .index
                    .index_of(&e.src)
                    .is_some_and(|i| ctx.index.kinds[i] == NodeKind::Router)
        })
        .collect();
    bad.sort();
    Outcome {
        offenders: bad.into_iter().cloned().map(Offender::Edge).collect(),
        witness: WitnessKind::None,
        fail_message: |kept| format!("router edge(s) not labeled CONDITIONAL: {}", list(kept)),
        pass_message: "all router out-edges are CONDITIONAL",
    }
}

fn tool_declarations(ctx: &Ctx<'_>) -> Outcome {
    let undeclared: Vec<usize> = ctx
        .node_indices(NodeKind::Tool)
        .filter(|&i| {
ctx.index.nodes[i].tools.is_empty()
        })
        .collect();
    Outcome {
        offenders: node_offenders(ctx, undeclared),
        witness: WitnessKind::None,
        fail_message: |kept| format!("TOOL node(s) with an empty tool set: {}", list(kept)),
        pass_message: "every TOOL node declares its tools",
    }
}

fn human_gate(ctx: &Ctx<'_>, config: &CheckConfig) -> CheckResult {
    let check = CheckId::HumanGate;
    if !config.require_human {
        return skipped(check, "not required");
    }
    match ctx.node_indices(NodeKind::Human).next() {
        Some(i) => skipped(check, &format!("human gate present: {}", ctx.index.ids[i])),
        None => failed_without_offenders(check, "no HUMAN node in the graph"),
    }
}

fn human_gate_coverage(ctx: &Ctx<'_>, config: &CheckConfig) -> Option<Outcome> {
    if config.sensitive_tools.is_empty() {
        return None;
    }
    let bfs = ctx.human_free_bfs();
    let exposed: Vec<usize> = (0..ctx.index.len())
        .filter(|&i| bfs.reached(i) && ctx.index.kinds[i] != NodeKind::Human)
        .filter(|&i| {
!ctx.index.nodes[i].tools.is_disjoint(&config.sensitive_tools)
        })
        .collect();
    Some(Outcome {
        offenders: node_offenders(ctx, exposed),
        witness: WitnessKind::HumanFreePath,
        fail_message: |kept| {
            format!("sensitive tool reachable without a human gate: {}", list(kept))
        },
        pass_message: "every path to a sensitive tool passes a human gate",
    })
}

fn single(graph: &AgentGraph, check: CheckId, config: &CheckConfig) -> CheckResult {
    let ctx = match Ctx::new(graph) {
        Ok(ctx) => ctx,
        Err(e) => return failed_without_offenders(check, e.to_string()),
    };
    run_one(&ctx, check, config, None)
}

fn run_one(
    ctx: &Ctx<'_>,
    check: CheckId,
    config: &CheckConfig,
    suppressed: Option<&BTreeSet<String>>,
) -> CheckResult {
    let outcome = match check {
        CheckId::ExitReach => exit_reach(ctx),
        CheckId::ExitReachAll => exit_reach_all(ctx),
        CheckId::NoDeadEnds => dead_ends(ctx),
        CheckId::RouterShape => router_shape(ctx),
        CheckId::ToolDeclarations => tool_declarations(ctx),
        CheckId::HumanGate => return human_gate(ctx, config),
        CheckId::HumanGateCoverage => match human_gate_coverage(ctx, config) {
            Some(o) => o,
            None => return skipped(check, "not configured (no sensitive tools)"),
        },
    };
    finish(ctx, check, outcome, suppressed)
}

pub fn check_exit_reachability(graph: &AgentGraph) -> CheckResult {
    single(graph, CheckId::ExitReach, &CheckConfig::default())
}

pub fn check_exit_reach_all(graph: &AgentGraph) -> CheckResult {
    single(graph, CheckId::ExitReachAll, &CheckConfig::default())
}

pub fn check_dead_ends(graph: &AgentGraph) -> CheckResult {
    single(graph, CheckId::NoDeadEnds, &CheckConfig::default())
}

pub fn check_router_shape(graph: &AgentGraph) -> CheckResult {
    single(graph, CheckId::RouterShape, &CheckConfig::default())
}

pub fn check_human_gate(graph: &AgentGraph, config: &CheckConfig) -> CheckResult {
    single(graph, CheckId::HumanGate, config)
}

pub fn check_human_gate_coverage(graph: &AgentGraph, config: &CheckConfig) -> CheckResult {
    single(graph, CheckId::HumanGateCoverage, config)
}

pub fn check_tool_declarations(graph: &AgentGraph) -> CheckResult {
    single(graph, CheckId::ToolDeclarations, &CheckConfig::default())
}

/// Validates the graph, then runs all seven checks in [`CheckId`] order,
/// applying the configured suppressions.
pub fn run_all_checks(
    graph: &AgentGraph,
    config: &CheckConfig,
) -> Result<VerificationReport, GraphError> {
    let violations = validate_graph(graph);
    if !violations.is_empty() {
        return Err(GraphError::Invalid(violations));
    }
    let ctx = Ctx::new(graph)?;
    let results: Vec<CheckResult> = CheckId::ALL
        .into_iter()
        .map(|check| run_one(&ctx, check, config, config.suppressions.get(&check)))
        .collect();
    let overall_passed = results.iter().all(|r| r.passed);
    Ok(VerificationReport {
        graph: String::new(),
        results,
        temporal_static: Vec::new(),
        overall_passed,
    })
}
