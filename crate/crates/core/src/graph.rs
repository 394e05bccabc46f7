//! Agent workflow graph model, interchange format, and reachability primitives.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::GraphError;

/// Interchange format version understood by [`load_graph`] and emitted by [`save_graph`].
pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NodeKind {
    Entry,
    Exit,
    Tool,
    Llm,
    Router,
    Human,
    Subgraph,
    Passthrough,
}

impl NodeKind {
    pub const ALL: [NodeKind; 8] = [
        NodeKind::Entry,
        NodeKind::Exit,
        NodeKind::Tool,
        NodeKind::Llm,
        NodeKind::Router,
        NodeKind::Human,
        NodeKind::Subgraph,
        NodeKind::Passthrough,
    ];

    pub fn label(self) -> &'static str {
        match self {
            NodeKind::Entry => "ENTRY",
            NodeKind::Exit => "EXIT",
            NodeKind::Tool => "TOOL",
            NodeKind::Llm => "LLM",
            NodeKind::Router => "ROUTER",
            NodeKind::Human => "HUMAN",
            NodeKind::Subgraph => "SUBGRAPH",
            NodeKind::Passthrough => "PASSTHROUGH",
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EdgeKind {
    Direct,
    Conditional,
    Parallel,
    Loop,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 4] = [
        EdgeKind::Direct,
        EdgeKind::Conditional,
        EdgeKind::Parallel,
        EdgeKind::Loop,
    ];

    pub fn label(self) -> &'static str {
        match self {
            EdgeKind::Direct => "DIRECT",
            EdgeKind::Conditional => "CONDITIONAL",
            EdgeKind::Parallel => "PARALLEL",
            EdgeKind::Loop => "LOOP",
        }
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    #[serde(default)]
    pub tools: BTreeSet<String>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl Node {
    pub fn new(id: impl Into<String>, kind: NodeKind) -> Self {
        Node {
            id: id.into(),
            kind,
            tools: BTreeSet::new(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_tools<I, S>(mut self, tools: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.tools.extend(tools.into_iter().map(Into::into));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub src: String,
    pub dst: String,
    pub kind: EdgeKind,
}

impl Edge {
    pub fn new(src: impl Into<String>, dst: impl Into<String>, kind: EdgeKind) -> Self {
        Edge {
            src: src.into(),
            dst: dst.into(),
            kind,
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {} [{}]", self.src, self.dst, self.kind)
    }
}

/// A typed workflow graph with a single entry node and a set of exit nodes.
///
/// Values are plain data. Well-formedness is not enforced on construction;
/// run [`validate_graph`] before handing a graph to the checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub entry: String,
    pub exits: BTreeSet<String>,
}

impl AgentGraph {
    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Returns the graph with every edge reversed. Edge kinds are kept.
    pub fn reversed(&self) -> AgentGraph {
        AgentGraph {
            nodes: self.nodes.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| Edge::new(e.dst.clone(), e.src.clone(), e.kind))
                .collect(),
            entry: self.entry.clone(),
            exits: self.exits.clone(),
        }
    }

    /// Returns a copy with nodes and edges in canonical (lexicographic) order.
    pub fn normalized(&self) -> AgentGraph {
        let mut g = self.clone();
        g.nodes.sort_by(|a, b| a.id.cmp(&b.id));
        g.edges.sort();
        g
    }
}

/// One broken well-formedness rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// The node ids or edge rendering the violation is about.
    pub subjects: Vec<String>,
    pub message: String,
}

impl Violation {
    fn new(subjects: Vec<String>, message: impl Into<String>) -> Self {
        Violation {
            subjects,
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.subjects.join(", "), self.message)
    }
}

/// Checks every well-formedness rule and reports all violations found.
/// An empty result means the graph is valid.
pub fn validate_graph(graph: &AgentGraph) -> Vec<Violation> {
    let mut out = Vec::new();

    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for node in &graph.nodes {
        *seen.entry(node.id.as_str()).or_default() += 1;
    }
    for (id, count) in &seen {
        if *count > 1 {
            out.push(Violation::new(
                vec![id.to_string()],
                format!("node id declared {count} times"),
            ));
        }
    }

    for node in &graph.nodes {
        if node.id.is_empty() {
            out.push(Violation::new(vec![String::new()], "node id is empty"));
        }
        if node.id.contains(['\n', '\r']) {
            out.push(Violation::new(
                vec![node.id.clone()],
                "node id contains a newline",
            ));
        }
        if !node.tools.is_empty() && node.kind != NodeKind::Tool {
            out.push(Violation::new(
                vec![node.id.clone()],
                format!("{} node declares tools; only TOOL nodes may", node.kind),
            ));
        }
    }

    let entries: Vec<String> = graph
        .nodes
        .iter()
        .filter(|n| n.kind == NodeKind::Entry)
        .map(|n| n.id.clone())
        .collect();
    match entries.len() {
        0 => out.push(Violation::new(vec![], "graph has no ENTRY node")),
        1 => {}
        _ => out.push(Violation::new(
            entries.clone(),
            "more than one ENTRY node; the entry must be unique",
        )),
    }
    match graph.node(&graph.entry) {
        None => out.push(Violation::new(
            vec![graph.entry.clone()],
            "entry refers to an unknown node",
        )),
        Some(n) if n.kind != NodeKind::Entry => out.push(Violation::new(
            vec![graph.entry.clone()],
            format!("entry node has kind {}, expected ENTRY", n.kind),
        )),
        Some(_) => {}
    }

    for exit in &graph.exits {
        match graph.node(exit) {
            None => out.push(Violation::new(
                vec![exit.clone()],
                "exit refers to an unknown node",
            )),
            Some(n) if n.kind != NodeKind::Exit => out.push(Violation::new(
                vec![exit.clone()],
                format!("listed as exit but has kind {}", n.kind),
            )),
            Some(_) => {}
        }
    }
    for node in &graph.nodes {
        if node.kind == NodeKind::Exit && !graph.exits.contains(&node.id) {
            out.push(Violation::new(
                vec![node.id.clone()],
                "EXIT node is not listed in exits",
            ));
        }
    }

    let mut triples = BTreeSet::new();
    for edge in &graph.edges {
        for end in [&edge.src, &edge.dst] {
            if !seen.contains_key(end.as_str()) {
                out.push(Violation::new(
                    vec![edge.to_string()],
                    format!("edge endpoint {end:?} is not a node"),
                ));
            }
        }
        if !triples.insert(edge) {
            out.push(Violation::new(vec![edge.to_string()], "duplicate edge"));
        }
    }

    out
}

#[derive(Serialize, Deserialize)]
struct Document {
    version: u64,
    entry: String,
    exits: Vec<String>,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

/// Parses an interchange document. Does not validate the graph.
pub fn load_graph<R: Read>(source: R) -> Result<AgentGraph, GraphError> {
    let doc: Document = serde_json::from_reader(source).map_err(|e| GraphError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if doc.version != FORMAT_VERSION {
        return Err(GraphError::UnsupportedVersion(doc.version));
    }
    Ok(AgentGraph {
        nodes: doc.nodes,
        edges: doc.edges,
        entry: doc.entry,
        exits: doc.exits.into_iter().collect(),
    })
}

pub fn load_graph_str(source: &str) -> Result<AgentGraph, GraphError> {
    load_graph(source.as_bytes())
}

/// Serializes a valid graph into canonical interchange bytes.
pub fn save_graph(graph: &AgentGraph) -> Result<Vec<u8>, GraphError> {
    let violations = validate_graph(graph);
    if !violations.is_empty() {
        return Err(GraphError::Invalid(violations));
    }
    let g = graph.normalized();
    let doc = Document {
        version: FORMAT_VERSION,
        entry: g.entry,
        exits: g.exits.into_iter().collect(),
        nodes: g.nodes,
        edges: g.edges,
    };
    let mut bytes = serde_json::to_vec_pretty(&doc).expect("document serialization is infallible");
    bytes.push(b'\n');
    Ok(bytes)
}

/// Dense index over a graph: node ids sorted lexicographically, so index
/// order coincides with id order and sorted adjacency lists give the
/// deterministic expansion order every traversal relies on.
#[derive(Debug, Clone)]
pub struct GraphIndex<'g> {
    pub ids: Vec<&'g str>,
    pub kinds: Vec<NodeKind>,
    pub nodes: Vec<&'g Node>,
    lookup: HashMap<&'g str, usize>,
    pub succ: Vec<Vec<usize>>,
    pub pred: Vec<Vec<usize>>,
}

impl<'g> GraphIndex<'g> {
    pub fn new(graph: &'g AgentGraph) -> Self {
        let mut order: Vec<&Node> = graph.nodes.iter().collect();
        order.sort_by(|a, b| a.id.cmp(&b.id));
        order.dedup_by(|a, b| a.id == b.id);
        let ids: Vec<&str> = order.iter().map(|n| n.id.as_str()).collect();
        let kinds = order.iter().map(|n| n.kind).collect();
        let lookup: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let mut succ = vec![Vec::new(); ids.len()];
        let mut pred = vec![Vec::new(); ids.len()];
        for e in &graph.edges {
            if let (Some(&s), Some(&d)) = (lookup.get(e.src.as_str()), lookup.get(e.dst.as_str())) {
                succ[s].push(d);
                pred[d].push(s);
            }
        }
        for list in succ.iter_mut().chain(pred.iter_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        GraphIndex {
            ids,
            kinds,
            nodes: order,
            lookup,
            succ,
            pred,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.lookup.get(id).copied()
    }

    pub fn require(&self, id: &str) -> Result<usize, GraphError> {
        self.index_of(id)
            .ok_or_else(|| GraphError::UnknownNode(id.to_string()))
    }

    /// BFS over `adjacency` from `starts`, skipping nodes where `blocked` is true.
    /// Returns the parent table: `Some(p)` for discovered nodes (roots are their own parent).
    pub fn bfs(
        &self,
        starts: &[usize],
        adjacency: &[Vec<usize>],
        blocked: impl Fn(usize) -> bool,
    ) -> Vec<Option<usize>> {
        self.bfs_layers(starts, adjacency, blocked).parent
    }

    /// Like [`GraphIndex::bfs`] but also records each node's distance from the roots.
    pub fn bfs_layers(
        &self,
        starts: &[usize],
        adjacency: &[Vec<usize>],
        blocked: impl Fn(usize) -> bool,
    ) -> Bfs {
        let mut parent = vec![None; self.len()];
        let mut depth = vec![usize::MAX; self.len()];
        let mut queue = VecDeque::new();
        let mut roots: Vec<usize> = starts.to_vec();
        roots.sort_unstable();
        for s in roots {
            if parent[s].is_none() && !blocked(s) {
                parent[s] = Some(s);
                depth[s] = 0;
                queue.push_back(s);
            }
        }
        while let Some(v) = queue.pop_front() {
            for &u in &adjacency[v] {
                if parent[u].is_none() && !blocked(u) {
                    parent[u] = Some(v);
                    depth[u] = depth[v] + 1;
                    queue.push_back(u);
                }
            }
        }
        Bfs { parent, depth }
    }

    /// Walks a BFS parent table back from `target` to its root.
    pub fn path_to(&self, parent: &[Option<usize>], target: usize) -> Option<Vec<usize>> {
        parent[target]?;
        let mut path = vec![target];
        let mut cur = target;
        while let Some(p) = parent[cur] {
            if p == cur {
                break;
            }
            path.push(p);
            cur = p;
        }
        path.reverse();
        Some(path)
    }

    pub fn names(&self, path: &[usize]) -> Vec<String> {
        path.iter().map(|&i| self.ids[i].to_string()).collect()
    }
}

/// Result of a breadth-first traversal over a [`GraphIndex`].
#[derive(Debug, Clone)]
pub struct Bfs {
    pub parent: Vec<Option<usize>>,
    /// `usize::MAX` for undiscovered nodes.
    pub depth: Vec<usize>,
}

impl Bfs {
    pub fn reached(&self, v: usize) -> bool {
        self.parent[v].is_some()
    }
}

/// Nodes reachable from `start` by directed paths, `start` included.
pub fn reachable_from(graph: &AgentGraph, start: &str) -> Result<BTreeSet<String>, GraphError> {
    let index = GraphIndex::new(graph);
    let s = index.require(start)?;
    let parent = index.bfs(&[s], &index.succ, |_| false);
    Ok(discovered(&index, &parent))
}

/// Nodes from which at least one of `targets` is reachable, targets included.
pub fn reverse_reachable(
    graph: &AgentGraph,
    targets: &BTreeSet<String>,
) -> Result<BTreeSet<String>, GraphError> {
    let index = GraphIndex::new(graph);
    let starts = targets
        .iter()
        .map(|t| index.require(t))
        .collect::<Result<Vec<_>, _>>()?;
    let parent = index.bfs(&starts, &index.pred, |_| false);
    Ok(discovered(&index, &parent))
}

/// A shortest directed path `from -> to` (both inclusive), or `None` if `to`
/// is unreachable. Ties resolve toward lexicographically smaller neighbours.
pub fn shortest_path(
    graph: &AgentGraph,
    from: &str,
    to: &str,
) -> Result<Option<Vec<String>>, GraphError> {
    let index = GraphIndex::new(graph);
    let f = index.require(from)?;
    let t = index.require(to)?;
    let parent = index.bfs(&[f], &index.succ, |_| false);
    Ok(index.path_to(&parent, t).map(|p| index.names(&p)))
}

fn discovered(index: &GraphIndex<'_>, parent: &[Option<usize>]) -> BTreeSet<String> {
    parent
        .iter()
        .enumerate()
        .filter(|(_, p)| p.is_some())
        .map(|(i, _)| index.ids[i].to_string())
        .collect()
}
