//! Reference semantics for policy expressions over finite traces.
//!
//! Evaluates an expression directly against a sequence of steps, each the
//! set of atoms that hold at that step. Shares no code with the DFA
//! compiler; it exists to check compiled monitors against.

use std::collections::BTreeSet;

use crate::dfa::TraceVerdict;
use crate::dsl::{Atom, PolicyExpr};

/// The atoms that hold at one step.
pub type Step = BTreeSet<Atom>;

pub fn trace_oracle(expr: &PolicyExpr, trace: &[Step]) -> TraceVerdict {
    match expr {
        PolicyExpr::Forbidden(a) => match trace.iter().position(|s| s.contains(a)) {
            Some(i) => TraceVerdict::Violated(i),
            None => TraceVerdict::Satisfied,
        },
        PolicyExpr::Until { holder, release } => until(holder, release, trace),
        PolicyExpr::ImplFuture {
            trigger,
            obligation,
        } => chain(trigger, std::slice::from_ref(obligation), trace, 0),
        PolicyExpr::Chain {
            trigger,
            obligations,
        } => chain(trigger, obligations, trace, 0),
        PolicyExpr::Bounded {
            trigger,
            obligation,
            k,
        } => bounded(trigger, obligation, *k as usize, trace),
        PolicyExpr::And(l, r) => {
            match (trace_oracle(l, trace), trace_oracle(r, trace)) {
                (TraceVerdict::Violated(i), TraceVerdict::Violated(j)) => TraceVerdict::Violated(i.min(j)),
                (TraceVerdict::Violated(i), _) | (_, TraceVerdict::Violated(i)) => TraceVerdict::Violated(i),
                (TraceVerdict::Pending, _) | (_, TraceVerdict::Pending) => TraceVerdict::Pending,
                _ => TraceVerdict::Satisfied,
            }
        }
        PolicyExpr::Or(l, r) => {
            match (trace_oracle(l, trace), trace_oracle(r, trace)) {
                (TraceVerdict::Violated(i), TraceVerdict::Violated(j)) => TraceVerdict::Violated(i.max(j)),
                (TraceVerdict::Satisfied, _) | (_, TraceVerdict::Satisfied) => TraceVerdict::Satisfied,
                _ => TraceVerdict::Pending,
            }
        }
    }
}

/// The holder must hold at every step before the release; a trace that ends
/// before any release leaves the property open.
fn until(holder: &Atom, release: &Atom, trace: &[Step]) -> TraceVerdict {
    for (i, step) in trace.iter().enumerate() {
        if step.contains(release) {
            return TraceVerdict::Satisfied;
        }
        if !step.contains(holder) {
            return TraceVerdict::Violated(i);
        }
    }
    TraceVerdict::Pending
}

/// Finds the first trigger at or after `from`, then requires the obligations
/// in order, one per step, before the trigger recurs.
fn chain(trigger: &Atom, obligations: &[Atom], trace: &[Step], from: usize) -> TraceVerdict {
    let Some(start) = (from..trace.len()).find(|&i| trace[i].contains(trigger)) else {
        return TraceVerdict::Satisfied;
    };
    // The triggering step may already discharge the first obligation.
    let mut next = usize::from(trace[start].contains(&obligations[0]));
    if next == obligations.len() {
        return chain(trigger, obligations, trace, start + 1);
    }
    for j in start + 1..trace.len() {
        if trace[j].contains(&obligations[next]) {
            next += 1;
            if next == obligations.len() {
                // Completed; this step may also open a new chain.
                return chain(trigger, obligations, trace, j);
            }
        } else if trace[j].contains(trigger) {
            return TraceVerdict::Violated(j);
        }
    }
    TraceVerdict::Pending
}

/// Every trigger step lacking the obligation needs the obligation within the
/// next `k` steps.
fn bounded(trigger: &Atom, obligation: &Atom, k: usize, trace: &[Step]) -> TraceVerdict {
    let mut earliest: Option<usize> = None;
    let mut open = false;
    for i in 0..trace.len() {
        if !trace[i].contains(trigger) || trace[i].contains(obligation) {
            continue;
        }
        let deadline = i + k;
        let met = (i + 1..=deadline.min(trace.len() - 1)).any(|j| trace[j].contains(obligation));
        if met {
            continue;
        }
        if deadline < trace.len() {
            earliest = Some(earliest.map_or(deadline, |e| e.min(deadline)));
        } else {
            open = true;
        }
    }
    match earliest {
        Some(i) => TraceVerdict::Violated(i),
        None if open => TraceVerdict::Pending,
        None => TraceVerdict::Satisfied,
    }
}
