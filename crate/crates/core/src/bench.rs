//! Synthetic workflow generation and the scalability timing harness.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::checks::{run_all_checks, CheckConfig};
use crate::error::BenchError;
use crate::event::Event;
use crate::graph::{AgentGraph, Edge, EdgeKind, Node, NodeKind};
use crate::monitor::MonitorSession;
use crate::policy::{load_policies, REFERENCE_POLICIES};

pub const CSV_HEADER: &str = "nodes,edges,structural_ms,monitor_compile_ms,monitor_eval_ms";

/// Events fed through the monitor per size.
pub const MONITOR_EVENTS: usize = 1000;

/// Kind mix for the interior nodes, in percent.
pub const KIND_WEIGHTS: [(NodeKind, u32); 5] = [
    (NodeKind::Llm, 60),
    (NodeKind::Tool, 25),
    (NodeKind::Router, 10),
    (NodeKind::Human, 3),
    (NodeKind::Passthrough, 2),
];

const TOOL_NAMES: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub density: f64,
    pub trials: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: vec![50, 100, 200, 500, 1000, 2000, 5000],
            density: 2.0,
            trials: 10,
            seed: 42,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if let Some(&n) = self.sizes.iter().find(|&&n| n < 2) {
            return Err(BenchError::TooFewNodes(n));
        }
        if !(self.density >= 1.0 && self.density.is_finite()) {
            return Err(BenchError::Config(format!(
                "density must be at least 1.0, got {}",
                self.density
            )));
        }
        if self.trials == 0 {
            return Err(BenchError::Config("trials must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub nodes: usize,
    pub edges: usize,
    pub structural_ms: f64,
    pub monitor_compile_ms: f64,
    pub monitor_eval_ms: f64,
}

impl BenchRow {
    pub fn events_per_sec(&self) -> f64 {
        MONITOR_EVENTS as f64 / (self.monitor_eval_ms / 1000.0)
    }
}

fn node_id(i: usize, n: usize) -> String {
    let width = (n.max(2) - 1).to_string().len();
    format!("n{i:0width$}")
}

/// Deterministic synthetic workflow with `n` nodes and about `density * n`
/// edges.
///
/// Node 0 is the entry and node `n - 1` the exit. Interior nodes hang off a
/// random spanning tree rooted at the entry, so every node is reachable; one
/// interior node (or the entry, when there are none) links to the exit.
/// Remaining edges are drawn uniformly without duplicates or self loops.
pub fn gen_synthetic(n: usize, density: f64, seed: u64) -> Result<AgentGraph, BenchError> {
    if n < 2 {
        return Err(BenchError::TooFewNodes(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entry = 0;
    let exit = n - 1;

    let total: u32 = KIND_WEIGHTS.iter().map(|(_, w)| w).sum();
    let mut kinds = vec![NodeKind::Entry; n];
    kinds[exit] = NodeKind::Exit;
    let mut nodes = Vec::with_capacity(n);
    for (i, slot) in kinds.iter_mut().enumerate() {
        let id = node_id(i, n);
        if i != entry && i != exit {
            let mut roll = rng.gen_range(0..total);
            *slot = KIND_WEIGHTS
                .iter()
                .find(|(_, w)| {
                    let hit = roll < *w;
                    roll = roll.saturating_sub(*w);
                    hit
                })
                .map(|(k, _)| *k)
                .expect("weights cover the roll");
        }
        let mut node = Node::new(id, *slot);
        if *slot == NodeKind::Tool {
            node = node.with_tools([format!("tool_{:02}", rng.gen_range(0..TOOL_NAMES))]);
        }
        nodes.push(node);
    }

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut seen = HashSet::new();
    let mut interior: Vec<usize> = (1..exit).collect();
    interior.shuffle(&mut rng);
    let mut attached = vec![entry];
    for &v in &interior {
        let parent = *attached.choose(&mut rng).expect("entry is attached");
        pairs.push((parent, v));
        seen.insert((parent, v));
        attached.push(v);
    }
    let last = *attached.choose(&mut rng).expect("entry is attached");
    pairs.push((last, exit));
    seen.insert((last, exit));

    let target = ((density * n as f64).round() as usize).max(pairs.len());
    // Sources exclude the exit, destinations exclude the entry.
    let capacity = (n - 1) * (n - 1) - (n - 2);
    let target = target.min(capacity);
    while pairs.len() < target {
        let src = rng.gen_range(0..exit);
        let dst = rng.gen_range(1..n);
        if src != dst && seen.insert((src, dst)) {
            pairs.push((src, dst));
        }
    }

    let edges = pairs
        .into_iter()
        .map(|(s, d)| {
            let kind = if kinds[s] == NodeKind::Router {
                EdgeKind::Conditional
            } else {
                EdgeKind::Direct
            };
            Edge::new(nodes[s].id.clone(), nodes[d].id.clone(), kind)
        })
        .collect();
    Ok(AgentGraph {
        entry: nodes[entry].id.clone(),
        exits: [nodes[exit].id.clone()].into(),
        nodes,
        edges,
    })
}

/// Benign events: none of them triggers a reference policy.
pub fn synthetic_events(count: usize, seed: u64) -> Vec<Event> {
    const TOOLS: [&str; 6] = ["search", "read_file", "summarize", "classify", "lookup", "log"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut e = Event::tool(TOOLS[rng.gen_range(0..TOOLS.len())]);
            if rng.gen_bool(0.2) {
                e.tags.insert("audit".into());
            }
            e
        })
        .collect()
}

fn median_ms(mut samples: Vec<Duration>) -> f64 {
    samples.sort_unstable();
    let mid = samples.len() / 2;
    let d = if samples.len() % 2 == 1 {
        samples[mid]
    } else {
        (samples[mid - 1] + samples[mid]) / 2
    };
    d.as_secs_f64() * 1000.0
}

fn time<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

/// Times the structural checks and the reference policy monitor for every
/// configured size. Each measurement is the median over `trials` runs,
/// after one untimed warm-up run.
pub fn run_bench(config: &BenchConfig) -> Result<Vec<BenchRow>, BenchError> {
    config.validate()?;
    let check_config = CheckConfig::default();
    let events = synthetic_events(MONITOR_EVENTS, config.seed);
    let mut rows = Vec::with_capacity(config.sizes.len());
    for &n in &config.sizes {
        let graph = gen_synthetic(n, config.density, config.seed)?;
        let _ = run_all_checks(&graph, &check_config);
        let structural = (0..config.trials)
            .map(|_| time(|| run_all_checks(&graph, &check_config)).1)
            .collect();

        let rules = load_policies(REFERENCE_POLICIES).expect("reference policies compile");
        let compile = (0..config.trials)
            .map(|_| time(|| load_policies(REFERENCE_POLICIES)).1)
            .collect();
        let eval = (0..=config.trials)
            .map(|_| {
                time(|| {
                    let mut session = MonitorSession::new(&rules, false);
                    for e in &events {
                        let _ = session.process_event(e);
                    }
                    session.finish()
                })
                .1
            })
            .skip(1)
            .collect();

        rows.push(BenchRow {
            nodes: graph.nodes.len(),
            edges: graph.edges.len(),
            structural_ms: median_ms(structural),
            monitor_compile_ms: median_ms(compile),
            monitor_eval_ms: median_ms(eval),
        });
    }
    Ok(rows)
}

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.3},{:.3},{:.3}",
            r.nodes, r.edges, r.structural_ms, r.monitor_compile_ms, r.monitor_eval_ms
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checks::CheckId;
    use crate::graph::validate_graph;

    #[test]
    fn generated_graphs_are_valid_and_reach_the_exit() {
        for (n, seed) in [(2, 0), (3, 1), (50, 42), (500, 7)] {
            let g = gen_synthetic(n, 2.0, seed).unwrap();
            assert!(validate_graph(&g).is_empty(), "n={n}");
            assert_eq!(g.nodes.len(), n);
            let report = run_all_checks(&g, &CheckConfig::default()).unwrap();
            assert!(report.result(CheckId::ExitReach).unwrap().passed, "n={n}");
            assert!(report.result(CheckId::RouterShape).unwrap().passed, "n={n}");
            assert!(report.result(CheckId::ToolDeclarations).unwrap().passed, "n={n}");
        }
    }

    #[test]
    fn edge_count_tracks_density() {
        let g = gen_synthetic(50, 2.0, 42).unwrap();
        assert!((95..=115).contains(&g.edges.len()), "{}", g.edges.len());
        let g = gen_synthetic(5000, 2.0, 42).unwrap();
        let e = g.edges.len() as f64;
        assert!((e - 10_000.0).abs() <= 500.0, "{e}");
    }

    #[test]
    fn deterministic() {
        assert_eq!(
            gen_synthetic(200, 2.0, 9).unwrap(),
            gen_synthetic(200, 2.0, 9).unwrap()
        );
        assert_ne!(
            gen_synthetic(200, 2.0, 9).unwrap(),
            gen_synthetic(200, 2.0, 10).unwrap()
        );
    }

    #[test]
    fn small_dense_graph_saturates() {
        let g = gen_synthetic(3, 10.0, 0).unwrap();
        assert_eq!(g.edges.len(), 3);
    }

    #[test]
    fn rejects_bad_config() {
        assert_eq!(gen_synthetic(1, 2.0, 0), Err(BenchError::TooFewNodes(1)));
        let bad = BenchConfig {
            density: 0.5,
            ..BenchConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = BenchConfig {
            trials: 0,
            ..BenchConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn benign_events_never_fire() {
        let rules = load_policies(REFERENCE_POLICIES).unwrap();
        let mut s = MonitorSession::new(&rules, true);
        for e in synthetic_events(MONITOR_EVENTS, 1) {
            assert!(s.process_event(&e).unwrap().is_none());
        }
        assert_eq!(s.finish().decision, crate::monitor::Decision::Pass);
    }

    #[test]
    fn csv_shape() {
        let cfg = BenchConfig {
            sizes: vec![20, 40],
            trials: 1,
            ..BenchConfig::default()
        };
        let csv = to_csv(&run_bench(&cfg).unwrap());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("20,40,"));
    }
}
