//! Runtime observations and their mapping onto atom valuations.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dfa::Valuation;
use crate::dsl::{Atom, AtomKind};

/// One observed step. Every field is optional; unknown JSON keys are ignored.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub tags: BTreeSet<String>,
}

impl Event {
    pub fn tool(name: &str) -> Event {
        Event {
            tool_name: Some(name.to_string()),
            ..Event::default()
        }
    }

    pub fn tagged<I, S>(tags: I) -> Event
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Event {
            tags: tags.into_iter().map(Into::into).collect(),
            ..Event::default()
        }
    }

    pub fn matches(&self, atom: &Atom) -> bool {
        let field = match atom.kind {
            AtomKind::Tool => &self.tool_name,
            AtomKind::Action => &self.action_type,
            AtomKind::Decision => &self.decision,
            AtomKind::Tag => return self.tags.contains(&atom.name),
        };
        field.as_deref() == Some(atom.name.as_str())
    }
}

/// Bit `i` is set iff `atoms[i]` matches the event.
pub fn valuation_of(event: &Event, atoms: &[Atom]) -> Valuation {
    let mut v = Valuation::default();
    for (i, atom) in atoms.iter().enumerate() {
        if event.matches(atom) {
            v.set(i);
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tool_name_matches() {
        let atoms = [Atom::tool("deploy"), Atom::tool("approve")];
        assert_eq!(valuation_of(&Event::tool("deploy"), &atoms), Valuation(0b01));
    }

    #[test]
    fn tag_membership() {
        let e = Event::tagged(["audit", "log"]);
        assert_eq!(valuation_of(&e, &[Atom::tag("audit")]), Valuation(1));
        assert_eq!(valuation_of(&e, &[Atom::tag("deploy"), Atom::tag("log")]), Valuation(0b10));
    }

    #[test]
    fn empty_event_matches_nothing() {
        let atoms = [
            Atom::tool("a"),
            Atom::new(AtomKind::Action, "b").unwrap(),
            Atom::new(AtomKind::Decision, "c").unwrap(),
            Atom::tag("d"),
        ];
        assert_eq!(valuation_of(&Event::default(), &atoms), Valuation(0));
    }

    #[test]
    fn action_and_decision_fields() {
        let e: Event = serde_json::from_str(
            r#"{"action_type":"write","decision":"approve","extra":{"x":1}}"#,
        )
        .unwrap();
        let atoms = [
            Atom::new(AtomKind::Action, "write").unwrap(),
            Atom::new(AtomKind::Decision, "approve").unwrap(),
            Atom::tool("write"),
        ];
        assert_eq!(valuation_of(&e, &atoms), Valuation(0b011));
    }
}
