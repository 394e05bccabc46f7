//! Test helpers: fixture loading, random small graphs, and brute-force
//! path enumeration that shares no traversal code with the library.

#![allow(dead_code)]

pub mod suites;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use flowgate::dsl::Atom;
use flowgate::graph::{load_graph, AgentGraph, Edge, EdgeKind, Node, NodeKind};
use flowgate::oracle::Step;
use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .parent()
        .unwrap()
        .join("core/fixtures")
        .join(name)
}

pub fn fixture_text(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn load_fixture(name: &str) -> AgentGraph {
    load_graph(fixture_text(name).as_bytes()).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub const POLICY_TOOLS: [&str; 10] = [
    "drop_table",
    "draft_email",
    "human_review",
    "fetch_pii",
    "anonymize",
    "deploy",
    "approve",
    "draft",
    "review",
    "send",
];

pub struct GraphShape {
    pub max_nodes: usize,
    /// Only forward edges (by node number), so the graph is acyclic.
    pub dag: bool,
    /// Upper bound on edges as a multiple of the node count.
    pub edge_factor: f64,
    pub tools: &'static [&'static str],
    /// Chance that a TOOL node declares no tools.
    pub empty_tool_chance: f64,
}

impl Default for GraphShape {
    fn default() -> Self {
        GraphShape {
            max_nodes: 8,
            dag: false,
            edge_factor: 2.0,
            tools: &POLICY_TOOLS,
            empty_tool_chance: 0.1,
        }
    }
}

/// A random well-formed graph: node `n0` is the entry, at least one EXIT.
pub fn random_graph<R: Rng>(rng: &mut R, shape: &GraphShape) -> AgentGraph {
    let n = rng.gen_range(2..=shape.max_nodes);
    let others = [
        NodeKind::Exit,
        NodeKind::Tool,
        NodeKind::Llm,
        NodeKind::Router,
        NodeKind::Human,
        NodeKind::Subgraph,
        NodeKind::Passthrough,
    ];
    let mut kinds = vec![NodeKind::Entry];
    for _ in 1..n {
        kinds.push(*others.choose(rng).unwrap());
    }
    if !kinds.contains(&NodeKind::Exit) {
        let i = rng.gen_range(1..n);
        kinds[i] = NodeKind::Exit;
    }
    let nodes: Vec<Node> = kinds
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let mut node = Node::new(format!("n{i}"), k);
            if k == NodeKind::Tool && !rng.gen_bool(shape.empty_tool_chance) {
                let count = rng.gen_range(1..=2);
                node = node.with_tools(shape.tools.choose_multiple(rng, count).copied());
            }
            node
        })
        .collect();

    let max_edges = ((n as f64) * shape.edge_factor) as usize;
    let edge_count = rng.gen_range(0..=max_edges);
    let mut seen = BTreeSet::new();
    let mut edges = Vec::new();
    for _ in 0..edge_count * 3 {
        if edges.len() == edge_count {
            break;
        }
        let s = rng.gen_range(0..n);
        let d = rng.gen_range(0..n);
        if shape.dag && s >= d {
            continue;
        }
        if !seen.insert((s, d)) {
            continue;
        }
        let kind = *EdgeKind::ALL.choose(rng).unwrap();
        edges.push(Edge::new(format!("n{s}"), format!("n{d}"), kind));
    }
    let exits = nodes
        .iter()
        .filter(|n| n.kind == NodeKind::Exit)
        .map(|n| n.id.clone())
        .collect();
    AgentGraph {
        nodes,
        edges,
        entry: "n0".into(),
        exits,
    }
}

/// Successor lists keyed by id, built straight from the edge list.
pub fn successors(g: &AgentGraph) -> BTreeMap<&str, BTreeSet<&str>> {
    let mut out: BTreeMap<&str, BTreeSet<&str>> =
        g.nodes.iter().map(|n| (n.id.as_str(), BTreeSet::new())).collect();
    for e in &g.edges {
        out.get_mut(e.src.as_str()).unwrap().insert(e.dst.as_str());
    }
    out
}

pub fn kind_of(g: &AgentGraph, id: &str) -> NodeKind {
    g.nodes.iter().find(|n| n.id == id).unwrap().kind
}

/// Every simple path starting at `from`, including the one-node path.
pub fn simple_paths(g: &AgentGraph, from: &str) -> Vec<Vec<String>> {
    fn go<'a>(
        succ: &BTreeMap<&'a str, BTreeSet<&'a str>>,
        path: &mut Vec<&'a str>,
        out: &mut Vec<Vec<String>>,
    ) {
        out.push(path.iter().map(|s| s.to_string()).collect());
        let last = *path.last().unwrap();
        for &next in &succ[last] {
            if !path.contains(&next) {
                path.push(next);
                go(succ, path, out);
                path.pop();
            }
        }
    }
    let succ = successors(g);
    let start = succ.keys().find(|k| **k == from).copied().unwrap();
    let mut out = Vec::new();
    go(&succ, &mut vec![start], &mut out);
    out
}

/// Nodes lying on some simple path from `from`.
pub fn enumerated_reach(g: &AgentGraph, from: &str) -> BTreeSet<String> {
    simple_paths(g, from).into_iter().flatten().collect()
}

/// Walks from the entry that stop at a node with no successors, at an
/// EXIT node, or after `max_len` nodes. Walks ending at an EXIT that has
/// successors are reported and also extended.
pub fn walks(g: &AgentGraph, max_len: usize) -> Vec<Vec<String>> {
    fn go<'a>(
        g: &AgentGraph,
        succ: &BTreeMap<&'a str, BTreeSet<&'a str>>,
        path: &mut Vec<&'a str>,
        max_len: usize,
        out: &mut Vec<Vec<String>>,
    ) {
        let last = *path.last().unwrap();
        let next = &succ[last];
        if next.is_empty() || path.len() == max_len || kind_of(g, last) == NodeKind::Exit {
            out.push(path.iter().map(|s| s.to_string()).collect());
        }
        if path.len() == max_len {
            return;
        }
        for &u in next {
            path.push(u);
            go(g, succ, path, max_len, out);
            path.pop();
        }
    }
    let succ = successors(g);
    let entry = succ.keys().find(|k| **k == g.entry).copied().unwrap();
    let mut out = Vec::new();
    go(g, &succ, &mut vec![entry], max_len, &mut out);
    out
}

/// True when consecutive ids are joined by an edge and the path starts at the entry.
pub fn is_entry_path(g: &AgentGraph, path: &[String]) -> bool {
    let edges: BTreeSet<(&str, &str)> = g
        .edges
        .iter()
        .map(|e| (e.src.as_str(), e.dst.as_str()))
        .collect();
    path.first().map(String::as_str) == Some(g.entry.as_str())
        && path
            .windows(2)
            .all(|w| edges.contains(&(w[0].as_str(), w[1].as_str())))
}

/// The steps a node contributes when a path passes through it.
pub fn node_steps(node: &Node) -> Vec<Step> {
    if node.kind == NodeKind::Tool {
        node.tools
            .iter()
            .map(|t| BTreeSet::from([Atom::tool(t)]))
            .collect()
    } else {
        let tag = match node.kind {
            NodeKind::Entry => "entry",
            NodeKind::Exit => "exit",
            NodeKind::Tool => unreachable!(),
            NodeKind::Llm => "llm",
            NodeKind::Router => "router",
            NodeKind::Human => "human",
            NodeKind::Subgraph => "subgraph",
            NodeKind::Passthrough => "passthrough",
        };
        vec![BTreeSet::from([Atom::tag(tag)])]
    }
}

pub fn path_trace(g: &AgentGraph, path: &[String]) -> Vec<Step> {
    path.iter()
        .flat_map(|id| node_steps(g.nodes.iter().find(|n| &n.id == id).unwrap()))
        .collect()
}
