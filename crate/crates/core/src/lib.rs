//! Pre-deployment verification for agent workflow graphs.
//!
//! A workflow is loaded from its JSON interchange form ([`graph`]), checked
//! against structural predicates ([`checks`]), and verified against temporal
//! policies both statically ([`static_verify`]) and over recorded event
//! traces ([`monitor`]). Policies are written in a small DSL ([`dsl`]) and
//! compiled to table-driven automata ([`dfa`]).

pub mod bench;
pub mod checks;
pub mod dfa;
pub mod dsl;
pub mod error;
pub mod event;
pub mod graph;
pub mod monitor;
pub mod oracle;
pub mod policy;
pub mod static_verify;

pub use checks::{run_all_checks, CheckConfig, CheckId, CheckResult, Severity, VerificationReport};
pub use dfa::{compile, Dfa, TraceVerdict, Valuation};
pub use dsl::{parse, Atom, AtomKind, PolicyExpr};
pub use error::{CompileError, GraphError, MonitorError, PolicyError, TraceError, VerifyError};
pub use event::{valuation_of, Event};
pub use graph::{load_graph, load_graph_str, save_graph, validate_graph, AgentGraph, Edge, EdgeKind, Node, NodeKind};
pub use monitor::{evaluate_trace, Decision, MonitorSession, Verdict};
pub use policy::{load_policies, CompiledRule, HandlingLevel};
pub use static_verify::{verify_policy_file, verify_static, StaticOptions, StaticRuleOutcome};
