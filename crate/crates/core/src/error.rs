use thiserror::Error;

use crate::dsl::ParseError;
use crate::graph::Violation;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("malformed graph document at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported graph document version {0} (expected 1)")]
    UnsupportedVersion(u64),
    #[error("unknown node id {0:?}")]
    UnknownNode(String),
    #[error("graph is not well-formed: {}", render_violations(.0))]
    Invalid(Vec<Violation>),
}

fn render_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompileError {
    #[error("expression uses {0} distinct atoms; at most {max} are supported", max = crate::dfa::MAX_ATOMS)]
    TooManyAtoms(usize),
    #[error("monitor with {states} states over {atoms} atoms exceeds the transition table limit")]
    TableTooLarge { states: usize, atoms: usize },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MonitorError {
    #[error("state {state} out of range for a DFA with {count} states")]
    StateOutOfRange { state: usize, count: usize },
    #[error("monitor session is already closed")]
    SessionClosed,
}

/// Errors reading a policy file.
#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("line {line}: expected `<name> | <handling> | <expression>`")]
    Layout { line: usize },
    #[error("line {line}: unknown handling level {found:?} (expected warn, block, halt or escalate)")]
    Handling { line: usize, found: String },
    #[error("line {line}: rule name {name:?} is empty or already used")]
    Name { line: usize, name: String },
    #[error("line {line}: {source}")]
    Syntax {
        line: usize,
        /// Characters preceding the expression on its line; add the parse
        /// error's column to get the column within the line.
        column_offset: usize,
        #[source]
        source: ParseError,
    },
    #[error("line {line}: {source}")]
    Compile {
        line: usize,
        #[source]
        source: CompileError,
    },
}

impl PolicyError {
    pub fn line(&self) -> usize {
        match self {
            PolicyError::Layout { line }
            | PolicyError::Handling { line, .. }
            | PolicyError::Name { line, .. }
            | PolicyError::Syntax { line, .. }
            | PolicyError::Compile { line, .. } => *line,
        }
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace line {line}: {message}")]
    Event { line: usize, message: String },
    #[error("reading trace: {0}")]
    Io(#[from] std::io::Error),
}

/// Failure of a full verification run.
#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BenchError {
    #[error("synthetic graphs need at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("invalid benchmark configuration: {0}")]
    Config(String),
}
