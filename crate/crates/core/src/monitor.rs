//! Runtime evaluation of compiled rules over event streams.

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};
use std::io::BufRead;

use serde::{Serialize, Serializer};

use crate::dsl::Atom;
use crate::error::{MonitorError, TraceError};
use crate::event::{valuation_of, Event};
use crate::policy::{CompiledRule, HandlingLevel};

/// A rule that became violated, and the event that did it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub rule: String,
    pub handling: HandlingLevel,
    /// 0-based index of the violating event.
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", content = "index", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RuleOutcome {
    Ok,
    Violated(usize),
    /// The stream ended with an obligation open.
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RuleVerdict {
    pub rule: String,
    pub handling: HandlingLevel,
    #[serde(flatten)]
    pub outcome: RuleOutcome,
}

/// Aggregate handling decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Decision {
    Pass,
    Handle(HandlingLevel),
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decision::Pass => f.write_str("PASS"),
            Decision::Handle(level) => level.fmt(f),
        }
    }
}

impl Serialize for Decision {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub decision: Decision,
    pub rules: Vec<RuleVerdict>,
    pub events: usize,
    pub strict_finish: bool,
    /// Unresolved rules that did not affect the decision.
    pub warnings: Vec<String>,
    /// Atoms that no event matched while their rule was being evaluated.
    pub never_matched: Vec<String>,
}

impl Verdict {
    pub fn violated(&self) -> impl Iterator<Item = &RuleVerdict> {
        self.rules
            .iter()
            .filter(|r| matches!(r.outcome, RuleOutcome::Violated(_)))
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for r in &self.rules {
            let (status, detail) = match r.outcome {
                RuleOutcome::Ok => ("PASS", String::new()),
                RuleOutcome::Violated(i) => ("FAIL", format!(" violated at event {i}")),
                RuleOutcome::Unresolved if self.strict_finish => {
                    ("FAIL", " unresolved at end of trace".to_string())
                }
                RuleOutcome::Unresolved => ("OPEN", " unresolved at end of trace".to_string()),
            };
            let _ = writeln!(out, "{status} rule {} [{}]{detail}", r.rule, r.handling);
        }
        for w in &self.warnings {
            let _ = writeln!(out, "    warning: {w}");
        }
        if !self.never_matched.is_empty() {
            let _ = writeln!(
                out,
                "    note: atoms never matched: {}",
                self.never_matched.join(", ")
            );
        }
        let _ = writeln!(out, "decision: {} ({} events)", self.decision, self.events);
        out
    }
}

/// Steps every rule's monitor once per event.
///
/// A session is single-writer: feed events from one stream, in order.
#[derive(Debug)]
pub struct MonitorSession<'r> {
    rules: &'r [CompiledRule],
    states: Vec<usize>,
    violated_at: Vec<Option<usize>>,
    matched: Vec<u32>,
    findings: Vec<Finding>,
    event_count: usize,
    strict_finish: bool,
    verdict: Option<Verdict>,
}

impl<'r> MonitorSession<'r> {
    pub fn new(rules: &'r [CompiledRule], strict_finish: bool) -> Self {
        MonitorSession {
            rules,
            states: rules.iter().map(|r| r.dfa.initial()).collect(),
            violated_at: vec![None; rules.len()],
            matched: vec![0; rules.len()],
            findings: Vec::new(),
            event_count: 0,
            strict_finish,
            verdict: None,
        }
    }

    pub fn current_states(&self) -> &[usize] {
        &self.states
    }

    pub fn event_count(&self) -> usize {
        self.event_count
    }

    pub fn findings(&self) -> &[Finding] {
        &self.findings
    }

    pub fn is_closed(&self) -> bool {
        self.verdict.is_some()
    }

    /// Advances every rule not yet violated. Returns the highest-level
    /// finding this event produced, if any.
    pub fn process_event(&mut self, event: &Event) -> Result<Option<&Finding>, MonitorError> {
        let new = self.step(event)?;
        Ok(self.findings[new..].iter().max_by_key(|f| f.handling))
    }

    /// Returns the position in `findings` where this event's findings start.
    fn step(&mut self, event: &Event) -> Result<usize, MonitorError> {
        if self.verdict.is_some() {
            return Err(MonitorError::SessionClosed);
        }
        let first_new = self.findings.len();
        let index = self.event_count;
        for (r, rule) in self.rules.iter().enumerate() {
            if self.violated_at[r].is_some() {
                continue;
            }
            let v = valuation_of(event, rule.dfa.atoms());
            self.matched[r] |= v.0;
            let q = rule.dfa.step(self.states[r], v)?;
            self.states[r] = q;
            if rule.dfa.is_violating(q) {
                self.violated_at[r] = Some(index);
                self.findings.push(Finding {
                    rule: rule.name.clone(),
                    handling: rule.handling,
                    index,
                });
            }
        }
        self.event_count += 1;
        Ok(first_new)
    }

    /// Closes the session. Later calls return the same verdict.
    pub fn finish(&mut self) -> Verdict {
        if let Some(v) = &self.verdict {
            return v.clone();
        }
        let mut decision = Decision::Pass;
        let mut warnings = Vec::new();
        let mut rules = Vec::with_capacity(self.rules.len());
        let mut never_matched = BTreeSet::new();
        for (r, rule) in self.rules.iter().enumerate() {
            let outcome = match self.violated_at[r] {
                Some(i) => RuleOutcome::Violated(i),
                None if rule.dfa.is_pending(self.states[r]) => RuleOutcome::Unresolved,
                None => RuleOutcome::Ok,
            };
            let counts = match outcome {
                RuleOutcome::Violated(_) => true,
                RuleOutcome::Unresolved if self.strict_finish => true,
                RuleOutcome::Unresolved => {
                    warnings.push(format!("rule {} has an unresolved obligation", rule.name));
                    false
                }
                RuleOutcome::Ok => false,
            };
            if counts {
                decision = decision.max(Decision::Handle(rule.handling));
            }
            for (i, atom) in rule.dfa.atoms().iter().enumerate() {
                if self.matched[r] >> i & 1 == 0 {
                    never_matched.insert(atom.to_string());
                }
            }
            rules.push(RuleVerdict {
                rule: rule.name.clone(),
                handling: rule.handling,
                outcome,
            });
        }
        let verdict = Verdict {
            decision,
            rules,
            events: self.event_count,
            strict_finish: self.strict_finish,
            warnings,
            never_matched: never_matched.into_iter().collect(),
        };
        self.verdict = Some(verdict.clone());
        verdict
    }
}

/// One entry of the per-event log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EventLogEntry {
    pub index: usize,
    /// Atoms of any rule that this event matched.
    pub matched: Vec<String>,
    pub findings: Vec<Finding>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceEvaluation {
    pub verdict: Verdict,
    pub log: Vec<EventLogEntry>,
}

impl TraceEvaluation {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdict serialization is infallible")
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for e in &self.log {
            let matched = if e.matched.is_empty() {
                "-".to_string()
            } else {
                e.matched.join(", ")
            };
            let _ = write!(out, "event {}: {matched}", e.index);
            for f in &e.findings {
                let _ = write!(out, "  => {} [{}]", f.rule, f.handling);
            }
            out.push('\n');
        }
        out.push_str(&self.verdict.render_text());
        out
    }
}

/// Reads a JSON Lines trace. Blank lines are skipped; line numbers in
/// errors are 1-based.
pub fn read_trace<R: BufRead>(reader: R) -> Result<Vec<Event>, TraceError> {
    let mut events = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line).map_err(|e| TraceError::Event {
            line: i + 1,
            message: e.to_string(),
        })?;
        events.push(event);
    }
    Ok(events)
}

/// Streams `events` through a fresh session and closes it.
pub fn evaluate_events(rules: &[CompiledRule], events: &[Event], strict_finish: bool) -> TraceEvaluation {
    let all_atoms: BTreeSet<&Atom> = rules.iter().flat_map(|r| r.dfa.atoms()).collect();
    let mut session = MonitorSession::new(rules, strict_finish);
    let mut log = Vec::with_capacity(events.len());
    for (index, event) in events.iter().enumerate() {
        let first_new = session
            .step(event)
            .expect("a fresh session accepts events until finished");
        log.push(EventLogEntry {
            index,
            matched: all_atoms
                .iter()
                .filter(|a| event.matches(a))
                .map(|a| a.to_string())
                .collect(),
            findings: session.findings[first_new..].to_vec(),
        });
    }
    TraceEvaluation {
        verdict: session.finish(),
        log,
    }
}

pub fn evaluate_trace<R: BufRead>(
    rules: &[CompiledRule],
    trace: R,
    strict_finish: bool,
) -> Result<TraceEvaluation, TraceError> {
    let events = read_trace(trace)?;
    Ok(evaluate_events(rules, &events, strict_finish))
}
