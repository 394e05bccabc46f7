use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use flowgate::bench::{run_bench, to_csv, BenchConfig};
use flowgate::checks::{run_all_checks, CheckConfig, CheckId, VerificationReport};
use flowgate::error::{GraphError, PolicyError};
use flowgate::graph::{load_graph, validate_graph, AgentGraph};
use flowgate::monitor::{evaluate_trace, Decision};
use flowgate::policy::{load_policies, CompiledRule};
use flowgate::static_verify::{verify_policy_file, StaticOptions};

const EXIT_STRUCTURAL: u8 = 1;
const EXIT_STATIC: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_USAGE: u8 = 64;
const EXIT_INPUT: u8 = 65;

/// Verify agent workflow graphs before they ship.
#[derive(Debug, Parser)]
#[command(name = "flowgate", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the structural checks on a graph document.
    Check {
        graph: PathBuf,
        #[command(flatten)]
        checks: CheckArgs,
        /// Also verify the rules in this policy file against the graph.
        #[arg(long)]
        policy: Option<PathBuf>,
        #[command(flatten)]
        finish: StaticFinish,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Verify a policy file against every path of a graph.
    Policy {
        graph: PathBuf,
        policy: PathBuf,
        #[command(flatten)]
        finish: StaticFinish,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Evaluate a policy file over a recorded JSON Lines event trace.
    Monitor {
        policy: PathBuf,
        trace: PathBuf,
        /// Treat obligations still open at the end of the trace as violations.
        #[arg(long)]
        strict_finish: bool,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Time the checks and the monitor on synthetic graphs; prints CSV.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "50,100,200,500,1000,2000,5000")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 2.0)]
        density: f64,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct CheckArgs {
    /// Fail graphs that contain no HUMAN node.
    #[arg(long)]
    require_human: bool,
    /// Tools that must only be reachable through a HUMAN node.
    #[arg(long, value_delimiter = ',')]
    sensitive_tools: Vec<String>,
    /// Ignore one offender, as CHECK:NODE. Repeatable.
    #[arg(long, value_parser = parse_suppression)]
    suppress: Vec<(CheckId, String)>,
}

#[derive(Debug, Args)]
struct StaticFinish {
    /// Report obligations left open at an exit or dead end (the default).
    #[arg(long, overrides_with = "no_strict_finish")]
    strict_finish: bool,
    /// Report only outright violations.
    #[arg(long)]
    no_strict_finish: bool,
}

impl StaticFinish {
    fn options(&self) -> StaticOptions {
        StaticOptions {
            strict_finish: !self.no_strict_finish,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

fn parse_suppression(s: &str) -> Result<(CheckId, String), String> {
    let (check, node) = s
        .split_once(':')
        .ok_or_else(|| format!("expected CHECK:NODE, got {s:?}"))?;
    let check = check.parse::<CheckId>()?;
    if node.is_empty() {
        return Err("node id is empty".into());
    }
    Ok((check, node.to_string()))
}

/// A failure that ends the run before any verdict.
struct Abort {
    code: u8,
    message: String,
}

impl Abort {
    fn input(message: impl Into<String>) -> Self {
        Abort {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

fn read(path: &Path) -> Result<String, Abort> {
    fs::read_to_string(path).map_err(|e| Abort::input(format!("{}: {e}", path.display())))
}

fn graph_error(path: &Path, e: GraphError) -> Abort {
    Abort::input(format!("{}: {e}", path.display()))
}

fn load_valid_graph(path: &Path) -> Result<AgentGraph, Abort> {
    let file = fs::File::open(path).map_err(|e| Abort::input(format!("{}: {e}", path.display())))?;
    let graph = load_graph(BufReader::new(file)).map_err(|e| graph_error(path, e))?;
    let violations = validate_graph(&graph);
    if !violations.is_empty() {
        return Err(graph_error(path, GraphError::Invalid(violations)));
    }
    Ok(graph)
}

fn load_rules(path: &Path) -> Result<Vec<CompiledRule>, Abort> {
    load_policies(&read(path)?).map_err(|e| {
        let detail = match &e {
            PolicyError::Syntax {
                line,
                column_offset,
                source,
            } => format!(
                "line {line}, column {}: expected {}, found {}",
                column_offset + source.column,
                source.expected,
                source.found
            ),
            other => other.to_string(),
        };
        Abort::input(format!("{}: {detail}", path.display()))
    })
}

fn emit(format: Format, json: String, text: String) {
    match format {
        Format::Json => println!("{json}"),
        Format::Text => print!("{text}"),
    }
}

fn graph_name(path: &Path) -> String {
    path.display().to_string()
}

fn run(cli: Cli) -> Result<u8, Abort> {
    match cli.command {
        Command::Check {
            graph,
            checks,
            policy,
            finish,
            format,
        } => {
            let g = load_valid_graph(&graph)?;
            let mut config = CheckConfig {
                require_human: checks.require_human,
                sensitive_tools: checks.sensitive_tools.into_iter().collect(),
                ..CheckConfig::default()
            };
            for (check, node) in checks.suppress {
                config.suppress(check, node);
            }
            let mut report = run_all_checks(&g, &config)
                .map_err(|e| graph_error(&graph, e))?
                .with_graph_name(graph_name(&graph));
            let structural_ok = report.overall_passed;
            let mut static_ok = true;
            if let Some(policy) = policy {
                let rules = load_rules(&policy)?;
                report.temporal_static = verify_policy_file(&g, &rules, finish.options())
                    .map_err(|e| graph_error(&graph, e))?;
                static_ok = report.temporal_static.iter().all(|o| o.passed);
                report.overall_passed &= static_ok;
            }
            emit(format, report.to_json(), report.render_text());
            Ok(if !structural_ok {
                EXIT_STRUCTURAL
            } else if !static_ok {
                EXIT_STATIC
            } else {
                0
            })
        }
        Command::Policy {
            graph,
            policy,
            finish,
            format,
        } => {
            let g = load_valid_graph(&graph)?;
            let rules = load_rules(&policy)?;
            let temporal_static =
                verify_policy_file(&g, &rules, finish.options()).map_err(|e| graph_error(&graph, e))?;
            let passed = temporal_static.iter().all(|o| o.passed);
            let report = VerificationReport {
                graph: graph_name(&graph),
                results: Vec::new(),
                temporal_static,
                overall_passed: passed,
            };
            emit(format, report.to_json(), report.render_text());
            Ok(if passed { 0 } else { EXIT_STATIC })
        }
        Command::Monitor {
            policy,
            trace,
            strict_finish,
            format,
        } => {
            let rules = load_rules(&policy)?;
            let file = fs::File::open(&trace)
                .map_err(|e| Abort::input(format!("{}: {e}", trace.display())))?;
            let eval = evaluate_trace(&rules, BufReader::new(file), strict_finish)
                .map_err(|e| Abort::input(format!("{}: {e}", trace.display())))?;
            emit(format, eval.to_json(), eval.render_text());
            Ok(if eval.verdict.decision == Decision::Pass {
                0
            } else {
                EXIT_RUNTIME
            })
        }
        Command::Bench {
            sizes,
            density,
            trials,
            seed,
        } => {
            let config = BenchConfig {
                sizes,
                density,
                trials,
                seed,
            };
            config.validate().map_err(|e| Abort {
                code: EXIT_USAGE,
                message: e.to_string(),
            })?;
            let rows = run_bench(&config).map_err(|e| Abort {
                code: EXIT_USAGE,
                message: e.to_string(),
            })?;
            print!("{}", to_csv(&rows));
            for r in &rows {
                eprintln!(
                    "{:>6} nodes  {:>6} edges  structural {:>9.3} ms  monitor {:>10.0} events/s",
                    r.nodes,
                    r.edges,
                    r.structural_ms,
                    r.events_per_sec()
                );
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(abort) => {
            eprintln!("flowgate: {}", abort.message);
            ExitCode::from(abort.code)
        }
    }
}
