//! Oracle comparisons shared by the property tests and the acceptance run.
//! Each returns a list of human-readable mismatches; empty means agreement.

use std::collections::BTreeSet;

use flowgate::checks::{run_all_checks, CheckConfig, CheckId, CheckResult, Offender, UNREACHABLE_MARKER};
use flowgate::dfa::{compile, Dfa, TraceVerdict, Valuation};
use flowgate::dsl::{Atom, PolicyExpr};
use flowgate::event::Event;
use flowgate::graph::{AgentGraph, NodeKind};
use flowgate::monitor::{evaluate_events, RuleOutcome};
use flowgate::oracle::{trace_oracle, Step};
use flowgate::policy::CompiledRule;
use flowgate::static_verify::{event_symbols, verify_static, FindingKind, StaticOptions};
use rand::seq::SliceRandom;
use rand::Rng;

use super::{enumerated_reach, is_entry_path, kind_of, path_trace, simple_paths, successors, walks};

pub const SENSITIVE: [&str; 2] = ["deploy", "send"];

fn offender_ids(r: &CheckResult) -> BTreeSet<String> {
    r.offenders.iter().map(|o| o.anchor().to_string()).collect()
}

/// Compares every check against brute-force path enumeration, and checks
/// that each witness is a real path ending where it should.
pub fn structural_mismatches(g: &AgentGraph) -> Vec<String> {
    let config = CheckConfig {
        require_human: true,
        sensitive_tools: SENSITIVE.iter().map(|s| s.to_string()).collect(),
        ..CheckConfig::default()
    };
    let report = run_all_checks(g, &config).expect("generated graphs are valid");
    let succ = successors(g);
    let reach = enumerated_reach(g, &g.entry);
    let is_exit = |id: &str| kind_of(g, id) == NodeKind::Exit;
    let mut out = Vec::new();
    let mut expect = |check: CheckId, want: bool| {
        let got = report.result(check).unwrap().passed;
        if got != want {
            out.push(format!("{check}: checker says {got}, enumeration says {want}"));
        }
    };

    expect(CheckId::ExitReach, g.exits.iter().all(|x| reach.contains(x)));

    let terminates = |v: &str| {
        simple_paths(g, v)
            .iter()
            .any(|p| {
                let last = p.last().unwrap();
                is_exit(last) || succ[last.as_str()].is_empty()
            })
    };
    expect(CheckId::ExitReachAll, reach.iter().all(|v| terminates(v)));

    expect(
        CheckId::NoDeadEnds,
        g.nodes
            .iter()
            .all(|n| n.kind == NodeKind::Exit || !succ[n.id.as_str()].is_empty()),
    );
    expect(
        CheckId::RouterShape,
        g.edges.iter().all(|e| {
            kind_of(g, &e.src) != NodeKind::Router || e.kind == flowgate::EdgeKind::Conditional
        }),
    );
    expect(
        CheckId::HumanGate,
        g.nodes.iter().any(|n| n.kind == NodeKind::Human),
    );
    expect(
        CheckId::ToolDeclarations,
        g.nodes
            .iter()
            .all(|n| n.kind != NodeKind::Tool || !n.tools.is_empty()),
    );
    let sensitive = |id: &str| {
        g.nodes
            .iter()
            .find(|n| n.id == id)
            .unwrap()
            .tools
            .iter()
            .any(|t| SENSITIVE.contains(&t.as_str()))
    };
    let bypass = simple_paths(g, &g.entry).into_iter().any(|p| {
        p.iter().all(|v| kind_of(g, v) != NodeKind::Human) && sensitive(p.last().unwrap())
    });
    expect(CheckId::HumanGateCoverage, !bypass);

    // Trace-level consequences of passing checks.
    let pass = |c: CheckId| report.result(c).unwrap().passed;
    let n = g.nodes.len();
    let all_walks = walks(g, n + 1);
    if pass(CheckId::NoDeadEnds) {
        for w in &all_walks {
            let last = w.last().unwrap();
            if succ[last.as_str()].is_empty() && !is_exit(last) {
                out.push(format!("NO_DEAD_ENDS passed but {w:?} stops at a non-exit"));
            }
        }
    }
    if pass(CheckId::ExitReachAll) && pass(CheckId::NoDeadEnds) {
        for v in &reach {
            if !simple_paths(g, v).iter().any(|p| is_exit(p.last().unwrap())) {
                out.push(format!("EXIT_REACH_ALL passed but {v} cannot reach an exit"));
            }
        }
    }

    for r in report.failures() {
        let Some(w) = &r.witness else { continue };
        let ids = offender_ids(r);
        let last = w.last().unwrap();
        if let Some(target) = last.strip_prefix(UNREACHABLE_MARKER) {
            if !is_entry_path(g, &w[..w.len() - 1]) || reach.contains(target) {
                out.push(format!("{}: bad frontier witness {w:?}", r.check));
            }
            continue;
        }
        if !is_entry_path(g, w) || !ids.contains(last) {
            out.push(format!("{}: witness {w:?} does not reach an offender", r.check));
        }
        if r.check == CheckId::HumanGateCoverage
            && w.iter().any(|v| kind_of(g, v) == NodeKind::Human)
        {
            out.push(format!("coverage witness {w:?} passes a human node"));
        }
    }
    for r in &report.results {
        if r.passed && (!r.offenders.is_empty() || r.witness.is_some()) {
            out.push(format!("{} passed with offenders or witness", r.check));
        }
        if !r.passed
            && r.offenders.iter().any(|o| matches!(o, Offender::Node(id) if g.node(id).is_none()))
        {
            out.push(format!("{} names an unknown node", r.check));
        }
    }
    out
}

/// Valuation of one oracle step over a DFA's atom order.
pub fn valuation(dfa: &Dfa, step: &Step) -> Valuation {
    let bits: Vec<bool> = dfa.atoms().iter().map(|a| step.contains(a)).collect();
    Valuation::from_bits(&bits)
}

pub fn dfa_verdict(dfa: &Dfa, trace: &[Step]) -> TraceVerdict {
    let vals: Vec<Valuation> = trace.iter().map(|s| valuation(dfa, s)).collect();
    dfa.run(&vals)
}

fn replay(dfa: &Dfa, g: &AgentGraph, path: &[String]) -> usize {
    let mut q = dfa.initial();
    for id in path {
        for e in event_symbols(g.node(id).unwrap()) {
            q = dfa.step(q, flowgate::valuation_of(&e, dfa.atoms())).unwrap();
        }
    }
    q
}

/// Static verdict against all maximal entry paths of a DAG, with strict finish.
pub fn static_dag_mismatches(g: &AgentGraph, rules: &[CompiledRule]) -> Vec<String> {
    let paths = walks(g, g.nodes.len());
    let mut out = Vec::new();
    for rule in rules {
        let verdicts: Vec<TraceVerdict> = paths
            .iter()
            .map(|p| trace_oracle(&rule.expr, &path_trace(g, p)))
            .collect();
        let violated = verdicts.iter().any(|v| matches!(v, TraceVerdict::Violated(_)));
        let pending = verdicts.contains(&TraceVerdict::Pending);
        let got = verify_static(g, &rule.name, &rule.dfa, StaticOptions::default()).unwrap();
        let bound = g.nodes.len() * rule.dfa.state_count();
        if got.product_states_explored > bound {
            out.push(format!("{}: explored {} > {bound}", rule.name, got.product_states_explored));
        }
        let kind = got.finding.as_ref().map(|f| f.kind);
        let want = if violated {
            Some(FindingKind::Violation)
        } else if pending {
            Some(FindingKind::UnresolvedObligation)
        } else {
            None
        };
        if kind != want {
            out.push(format!("{}: static {kind:?}, enumeration {want:?}", rule.name));
        }
        if let Some(f) = &got.finding {
            if !is_entry_path(g, &f.witness) {
                out.push(format!("{}: witness {:?} is not a path", rule.name, f.witness));
                continue;
            }
            let q = replay(&rule.dfa, g, &f.witness);
            let ok = match f.kind {
                FindingKind::Violation => rule.dfa.is_violating(q),
                FindingKind::UnresolvedObligation => rule.dfa.is_pending(q),
            };
            if !ok {
                out.push(format!("{}: witness replay ends in state {q}", rule.name));
            }
        }
    }
    out
}

/// Walks of at most `max_len` nodes, shortened until there are at most
/// `budget` of them. Returns the length actually used.
pub fn bounded_walks(g: &AgentGraph, max_len: usize, budget: usize) -> (usize, Vec<Vec<String>>) {
    let mut len = max_len;
    loop {
        let w = walks(g, len);
        if w.len() <= budget || len <= g.nodes.len() {
            return (len, w);
        }
        len -= 1;
    }
}

/// On possibly cyclic graphs: no static violation means no enumerated walk
/// violates; a reported violation replays to a violating state.
pub fn static_soundness_mismatches(g: &AgentGraph, rules: &[CompiledRule]) -> Vec<String> {
    let (_, paths) = bounded_walks(g, 12, 20_000);
    let mut out = Vec::new();
    for rule in rules {
        let got = verify_static(g, &rule.name, &rule.dfa, StaticOptions::default()).unwrap();
        let bound = g.nodes.len() * rule.dfa.state_count();
        if got.product_states_explored > bound {
            out.push(format!("{}: explored {} > {bound}", rule.name, got.product_states_explored));
        }
        let static_violation = got
            .finding
            .as_ref()
            .is_some_and(|f| f.kind == FindingKind::Violation);
        if !static_violation {
            if let Some(p) = paths.iter().find(|p| {
                matches!(trace_oracle(&rule.expr, &path_trace(g, p)), TraceVerdict::Violated(_))
            }) {
                out.push(format!("{}: missed violation on {p:?}", rule.name));
            }
        } else {
            let w = &got.finding.as_ref().unwrap().witness;
            if !is_entry_path(g, w) || !rule.dfa.is_violating(replay(&rule.dfa, g, w)) {
                out.push(format!("{}: spurious witness {w:?}", rule.name));
            }
        }
    }
    out
}

pub fn tag(name: &str) -> Atom {
    Atom::tag(name)
}

/// Base forms over at most two atoms, including degenerate repeats.
pub fn base_forms() -> Vec<PolicyExpr> {
    let (a, b) = (tag("a"), tag("b"));
    let mut out = vec![
        PolicyExpr::Forbidden(a.clone()),
        PolicyExpr::ImplFuture {
            trigger: a.clone(),
            obligation: b.clone(),
        },
        PolicyExpr::ImplFuture {
            trigger: a.clone(),
            obligation: a.clone(),
        },
        PolicyExpr::Until {
            holder: a.clone(),
            release: b.clone(),
        },
        PolicyExpr::Until {
            holder: a.clone(),
            release: a.clone(),
        },
    ];
    for k in 1..=4 {
        out.push(PolicyExpr::Bounded {
            trigger: a.clone(),
            obligation: b.clone(),
            k,
        });
    }
    out.push(PolicyExpr::Bounded {
        trigger: a.clone(),
        obligation: a.clone(),
        k: 2,
    });
    for obligations in [
        vec![b.clone(), b.clone()],
        vec![b.clone(), a.clone()],
        vec![a.clone(), b.clone()],
        vec![b.clone(), b.clone(), b.clone()],
    ] {
        out.push(PolicyExpr::Chain {
            trigger: a.clone(),
            obligations,
        });
    }
    out
}

/// Every trace of length `0..=max_len` over subsets of `atoms`.
pub fn all_traces(atoms: &[Atom], max_len: usize) -> Vec<Vec<Step>> {
    let subsets: Vec<Step> = (0..1u32 << atoms.len())
        .map(|m| {
            atoms
                .iter()
                .enumerate()
                .filter(|(i, _)| m >> i & 1 == 1)
                .map(|(_, a)| a.clone())
                .collect()
        })
        .collect();
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for t in &frontier {
            for s in &subsets {
                let mut t2: Vec<Step> = t.clone();
                t2.push(s.clone());
                next.push(t2);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Exhaustive check of the base forms; returns (traces checked, mismatches).
pub fn exhaustive_dfa_mismatches(max_len: usize) -> (usize, Vec<String>) {
    let traces = all_traces(&[tag("a"), tag("b")], max_len);
    let mut checked = 0;
    let mut out = Vec::new();
    for expr in base_forms() {
        let dfa = compile(&expr).unwrap();
        for t in &traces {
            checked += 1;
            let (got, want) = (dfa_verdict(&dfa, t), trace_oracle(&expr, t));
            if got != want {
                out.push(format!("{expr} on {t:?}: dfa {got:?}, oracle {want:?}"));
            }
        }
    }
    (checked, out)
}

const POOL: [&str; 4] = ["a", "b", "c", "d"];

pub fn random_atom<R: Rng>(rng: &mut R) -> Atom {
    tag(POOL.choose(rng).unwrap())
}

pub fn random_base<R: Rng>(rng: &mut R) -> PolicyExpr {
    let a = random_atom(rng);
    let b = random_atom(rng);
    match rng.gen_range(0..5) {
        0 => PolicyExpr::Forbidden(a),
        1 => PolicyExpr::ImplFuture {
            trigger: a,
            obligation: b,
        },
        2 => PolicyExpr::Until {
            holder: a,
            release: b,
        },
        3 => PolicyExpr::Bounded {
            trigger: a,
            obligation: b,
            k: rng.gen_range(1..=3),
        },
        _ => {
            let n = rng.gen_range(2..=3);
            PolicyExpr::Chain {
                trigger: a,
                obligations: std::iter::once(b)
                    .chain((1..n).map(|_| random_atom(rng)))
                    .collect(),
            }
        }
    }
}

/// Random expression of nesting depth at most `depth`, over four atoms.
pub fn random_expr<R: Rng>(rng: &mut R, depth: usize) -> PolicyExpr {
    if depth <= 1 || rng.gen_bool(0.3) {
        return random_base(rng);
    }
    let l = random_expr(rng, depth - 1);
    let r = random_expr(rng, depth - 1);
    if rng.gen_bool(0.5) {
        PolicyExpr::and(l, r)
    } else {
        PolicyExpr::or(l, r)
    }
}

pub fn random_trace<R: Rng>(rng: &mut R, max_len: usize) -> Vec<Step> {
    let len = rng.gen_range(0..=max_len);
    (0..len)
        .map(|_| POOL.iter().filter(|_| rng.gen_bool(0.35)).map(|n| tag(n)).collect())
        .collect()
}

/// Random composed expressions (always at least one AND/OR).
pub fn random_dfa_mismatches<R: Rng>(rng: &mut R, samples: usize) -> Vec<String> {
    let mut out = Vec::new();
    for _ in 0..samples {
        let expr = loop {
            let e = random_expr(rng, 3);
            if matches!(e, PolicyExpr::And(..) | PolicyExpr::Or(..)) {
                break e;
            }
        };
        let trace = random_trace(rng, 6);
        let dfa = compile(&expr).unwrap();
        let (got, want) = (dfa_verdict(&dfa, &trace), trace_oracle(&expr, &trace));
        if got != want {
            out.push(format!("{expr} on {trace:?}: dfa {got:?}, oracle {want:?}"));
        }
    }
    out
}

pub fn step_event(step: &Step) -> Event {
    Event::tagged(step.iter().map(|a| a.name.clone()))
}

/// Monitor outcomes rule-wise against the oracle.
pub fn monitor_mismatches(rules: &[CompiledRule], trace: &[Step]) -> Vec<String> {
    let events: Vec<Event> = trace.iter().map(step_event).collect();
    let verdict = evaluate_events(rules, &events, false).verdict;
    let mut out = Vec::new();
    for (rule, got) in rules.iter().zip(&verdict.rules) {
        let want = match trace_oracle(&rule.expr, trace) {
            TraceVerdict::Violated(i) => RuleOutcome::Violated(i),
            TraceVerdict::Pending => RuleOutcome::Unresolved,
            TraceVerdict::Satisfied => RuleOutcome::Ok,
        };
        if got.outcome != want {
            out.push(format!("{}: monitor {:?}, oracle {want:?} on {trace:?}", rule.name, got.outcome));
        }
    }
    out
}
