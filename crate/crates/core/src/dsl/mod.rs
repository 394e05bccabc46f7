//! Temporal policy language: seven expression forms over event atoms.
//!
//! ```text
//! G !tool:drop_table                          forbidden
//! tool:draft_email -> F tool:human_review     implication-future
//! a U b                                       until
//! tool:fetch_pii -> F[<=3] tool:anonymize     bounded response
//! tool:draft -> F tool:review -> F tool:send  response chain
//! (G !x) AND (a -> F b)                       conjunction
//! (G !x) OR (G !y)                            disjunction
//! ```

mod lexer;
mod parser;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub use lexer::{tokenize, Token, TokenKind};
pub use parser::parse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AtomKind {
    Tool,
    Action,
    Decision,
    Tag,
}

impl AtomKind {
    fn prefix(self) -> &'static str {
        match self {
            AtomKind::Tool => "tool:",
            AtomKind::Action => "action:",
            AtomKind::Decision => "decision:",
            AtomKind::Tag => "",
        }
    }

    pub(crate) fn from_prefix(word: &str) -> Option<AtomKind> {
        match word {
            "tool" => Some(AtomKind::Tool),
            "action" => Some(AtomKind::Action),
            "decision" => Some(AtomKind::Decision),
            _ => None,
        }
    }
}

/// Words that can never be bare tag atoms.
pub const RESERVED: [&str; 5] = ["G", "F", "U", "AND", "OR"];

/// An atomic event predicate such as `tool:deploy` or the tag `audit`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Atom {
    pub kind: AtomKind,
    pub name: String,
}

impl Atom {
    /// Fails unless `name` matches `[a-zA-Z_][a-zA-Z0-9_]*` (and, for tags,
    /// is not a reserved word).
    pub fn new(kind: AtomKind, name: impl Into<String>) -> Result<Atom, String> {
        let name = name.into();
        if !is_identifier(&name) {
            return Err(format!("{name:?} is not a valid atom name"));
        }
        if kind == AtomKind::Tag && RESERVED.contains(&name.as_str()) {
            return Err(format!("{name:?} is reserved and cannot be a tag atom"));
        }
        Ok(Atom { kind, name })
    }

    pub fn tool(name: &str) -> Atom {
        Atom::new(AtomKind::Tool, name).expect("valid tool atom")
    }

    pub fn tag(name: &str) -> Atom {
        Atom::new(AtomKind::Tag, name).expect("valid tag atom")
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.kind.prefix(), self.name)
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PolicyExpr {
    Forbidden(Atom),
    ImplFuture {
        trigger: Atom,
        obligation: Atom,
    },
    Until {
        holder: Atom,
        release: Atom,
    },
    Bounded {
        trigger: Atom,
        obligation: Atom,
        k: u32,
    },
    /// At least two obligations; one obligation is an `ImplFuture`.
    Chain {
        trigger: Atom,
        obligations: Vec<Atom>,
    },
    And(Box<PolicyExpr>, Box<PolicyExpr>),
    Or(Box<PolicyExpr>, Box<PolicyExpr>),
}

impl PolicyExpr {
    pub fn and(left: PolicyExpr, right: PolicyExpr) -> PolicyExpr {
        PolicyExpr::And(Box::new(left), Box::new(right))
    }

    pub fn or(left: PolicyExpr, right: PolicyExpr) -> PolicyExpr {
        PolicyExpr::Or(Box::new(left), Box::new(right))
    }

    /// Distinct atoms in first-occurrence order (left to right).
    pub fn atoms(&self) -> Vec<Atom> {
        let mut out: Vec<Atom> = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut Vec<Atom>) {
        let mut push = |a: &Atom| {
            if !out.contains(a) {
                out.push(a.clone());
            }
        };
        match self {
            PolicyExpr::Forbidden(a) => push(a),
            PolicyExpr::ImplFuture { trigger, obligation }
            | PolicyExpr::Bounded {
                trigger,
                obligation,
                ..
            } => {
                push(trigger);
                push(obligation);
            }
            PolicyExpr::Until { holder, release } => {
                push(holder);
                push(release);
            }
            PolicyExpr::Chain {
                trigger,
                obligations,
            } => {
                push(trigger);
                obligations.iter().for_each(push);
            }
            PolicyExpr::And(l, r) | PolicyExpr::Or(l, r) => {
                l.collect_atoms(out);
                r.collect_atoms(out);
            }
        }
    }
}

impl fmt::Display for PolicyExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyExpr::Forbidden(a) => write!(f, "G !{a}"),
            PolicyExpr::ImplFuture {
                trigger,
                obligation,
            } => write!(f, "{trigger} -> F {obligation}"),
            PolicyExpr::Until { holder, release } => write!(f, "{holder} U {release}"),
            PolicyExpr::Bounded {
                trigger,
                obligation,
                k,
            } => write!(f, "{trigger} -> F[<={k}] {obligation}"),
            PolicyExpr::Chain {
                trigger,
                obligations,
            } => {
                write!(f, "{trigger}")?;
                for o in obligations {
                    write!(f, " -> F {o}")?;
                }
                Ok(())
            }
            PolicyExpr::And(l, r) => write!(f, "({l}) AND ({r})"),
            PolicyExpr::Or(l, r) => write!(f, "({l}) OR ({r})"),
        }
    }
}

/// Canonical single-space rendering; `parse(&format(e)) == Ok(e)`.
pub fn format(expr: &PolicyExpr) -> String {
    expr.to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("column {column}: expected {expected}, found {found}")]
pub struct ParseError {
    /// Byte offset into the input.
    pub offset: usize,
    /// 1-based character column.
    pub column: usize,
    pub expected: String,
    pub found: String,
}

impl ParseError {
    pub(crate) fn at(input: &str, offset: usize, expected: impl Into<String>, found: impl Into<String>) -> Self {
        let offset = offset.min(input.len());
        ParseError {
            offset,
            column: input[..offset].chars().count() + 1,
            expected: expected.into(),
            found: found.into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atom_validation() {
        assert!(Atom::new(AtomKind::Tool, "drop_table").is_ok());
        assert!(Atom::new(AtomKind::Tool, "9lives").is_err());
        assert!(Atom::new(AtomKind::Tag, "AND").is_err());
        assert!(Atom::new(AtomKind::Tool, "AND").is_ok());
        assert!(Atom::new(AtomKind::Tag, "and").is_ok());
        assert!(Atom::new(AtomKind::Action, "").is_err());
    }

    #[test]
    fn format_examples() {
        assert_eq!(format(&PolicyExpr::Forbidden(Atom::tool("x"))), "G !tool:x");
        let b = PolicyExpr::Bounded {
            trigger: Atom::tag("a"),
            obligation: Atom::tag("b"),
            k: 3,
        };
        assert_eq!(format(&b), "a -> F[<=3] b");
        let both = PolicyExpr::and(PolicyExpr::Forbidden(Atom::tag("x")), b);
        assert_eq!(format(&both), "(G !x) AND (a -> F[<=3] b)");
    }

    #[test]
    fn atoms_in_first_occurrence_order() {
        let e = parse("(a U tool:b) OR (tool:b -> F c)").unwrap();
        let names: Vec<String> = e.atoms().iter().map(ToString::to_string).collect();
        assert_eq!(names, ["a", "tool:b", "c"]);
    }
}
