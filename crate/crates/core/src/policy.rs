//! Policy files: one named rule per line with a handling level.
//!
//! ```text
//! # name | handling | expression
//! no_destructive_ops | halt | G !tool:drop_table
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::dfa::{compile, Dfa};
use crate::dsl::{parse, PolicyExpr};
use crate::error::PolicyError;

/// The five representative policies used by the benchmark and the examples.
pub const REFERENCE_POLICIES: &str = "\
no_destructive_ops | halt | G !tool:drop_table
email_review | block | tool:draft_email -> F tool:human_review
pii_anonymize | escalate | tool:fetch_pii -> F[<=3] tool:anonymize
deploy_approval | block | tool:deploy -> F tool:approve
draft_review_send | warn | tool:draft -> F tool:review -> F tool:send
";

/// Operational response to a violated rule, ordered by severity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum HandlingLevel {
    Warn,
    Block,
    Halt,
    Escalate,
}

impl HandlingLevel {
    pub fn name(self) -> &'static str {
        match self {
            HandlingLevel::Warn => "warn",
            HandlingLevel::Block => "block",
            HandlingLevel::Halt => "halt",
            HandlingLevel::Escalate => "escalate",
        }
    }
}

impl fmt::Display for HandlingLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name().to_ascii_uppercase())
    }
}

impl FromStr for HandlingLevel {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "warn" => Ok(HandlingLevel::Warn),
            "block" => Ok(HandlingLevel::Block),
            "halt" => Ok(HandlingLevel::Halt),
            "escalate" => Ok(HandlingLevel::Escalate),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyRule {
    pub name: String,
    pub handling: HandlingLevel,
    pub expr: PolicyExpr,
    /// 1-based line in the source file.
    pub line: usize,
}

#[derive(Debug, Clone)]
pub struct CompiledRule {
    pub name: String,
    pub handling: HandlingLevel,
    pub expr: PolicyExpr,
    pub dfa: Dfa,
    pub line: usize,
}

/// Parses a policy file. Blank lines and lines starting with `#` are skipped.
pub fn parse_policy_file(text: &str) -> Result<Vec<PolicyRule>, PolicyError> {
    let mut rules = Vec::new();
    let mut names = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = raw.splitn(3, '|');
        let (Some(name), Some(handling), Some(expr_src)) = (parts.next(), parts.next(), parts.next())
        else {
            return Err(PolicyError::Layout { line });
        };
        let name = name.trim();
        if name.is_empty() || !names.insert(name.to_string()) {
            return Err(PolicyError::Name {
                line,
                name: name.to_string(),
            });
        }
        let handling = handling
            .trim()
            .parse::<HandlingLevel>()
            .map_err(|()| PolicyError::Handling {
                line,
                found: handling.trim().to_string(),
            })?;
        let expr = parse(expr_src).map_err(|source| PolicyError::Syntax {
            line,
            column_offset: raw[..raw.len() - expr_src.len()].chars().count(),
            source,
        })?;
        rules.push(PolicyRule {
            name: name.to_string(),
            handling,
            expr,
            line,
        });
    }
    Ok(rules)
}

pub fn compile_rules(rules: &[PolicyRule]) -> Result<Vec<CompiledRule>, PolicyError> {
    rules
        .iter()
        .map(|r| {
            let dfa = compile(&r.expr).map_err(|source| PolicyError::Compile {
                line: r.line,
                source,
            })?;
            Ok(CompiledRule {
                name: r.name.clone(),
                handling: r.handling,
                expr: r.expr.clone(),
                dfa,
                line: r.line,
            })
        })
        .collect()
}

/// Parses and compiles in one pass.
pub fn load_policies(text: &str) -> Result<Vec<CompiledRule>, PolicyError> {
    compile_rules(&parse_policy_file(text)?)
}
