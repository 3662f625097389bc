//! Command-line surface: family validation, window materialization and
//! queries, verification suites, and scheduler simulation.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or validation
//! error. Stdout carries reports and exports; only `--out` and `--trace`
//! paths are ever written.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use treefactor_core::engine::export::{ball_to_dot, ball_to_json};
use treefactor_core::oracle::{
    all_passed, verify_engine_window, verify_pipeline_window, verify_trace,
};
use treefactor_core::sim::{check_c, run, trace_from_jsonl, trace_to_jsonl, SimConfig};
use treefactor_core::{
    builtin_family, normalize, validate, Engine, EngineConfig, Family, FamilySpec, Pipeline,
    TreeAddress, Verdict, VerificationReport,
};

#[derive(Parser)]
#[command(
    name = "treefactor",
    version,
    about = "Lazy tree factorizations: windows, queries, verification, simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Dot,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a family description and print its normalized form.
    Validate {
        /// Built-in family name or path to a JSON description.
        spec: String,
    },
    /// Materialize a window of the factorization and export it.
    Ball {
        #[arg(long)]
        spec: String,
        #[arg(long)]
        radius: u64,
        #[arg(long)]
        sons: u64,
        #[arg(long)]
        factors: u64,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the default window depth cap of 6.
        #[arg(long)]
        max_depth: Option<u64>,
        /// Override the default work budget.
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Print the factor assignment of one tree edge.
    Edge {
        #[arg(long)]
        spec: String,
        /// Parent address, e.g. "/" or "/3/1".
        #[arg(long)]
        address: String,
        #[arg(long)]
        slot: u64,
    },
    /// Print the forest label of a vertex in one factor.
    Label {
        #[arg(long)]
        spec: String,
        #[arg(long)]
        address: String,
        #[arg(long)]
        factor: u64,
    },
    /// Print the tree address carrying a forest label.
    Vertex {
        #[arg(long)]
        spec: String,
        #[arg(long)]
        factor: u64,
        #[arg(long)]
        index: u64,
    },
    /// Run the window verification suite and report as JSON.
    Verify {
        #[arg(long)]
        spec: String,
        #[arg(long)]
        radius: u64,
        #[arg(long)]
        sons: u64,
        #[arg(long)]
        factors: u64,
        /// Verify the two-stage composition instead of the single stage.
        #[arg(long)]
        pipeline: bool,
        #[arg(long)]
        max_depth: Option<u64>,
        #[arg(long)]
        budget: Option<u64>,
    },
    /// Run the scheduler on a config file and emit the step trace.
    Simulate {
        /// Simulator config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Write the JSONL trace here; omitted = stdout.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Re-verify a written trace file.
    CheckTrace {
        #[arg(long)]
        trace: PathBuf,
    },
}

struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Display) -> Failure {
    Failure {
        code: 2,
        message: message.to_string(),
    }
}

fn check_failed(message: impl Display) -> Failure {
    Failure {
        code: 1,
        message: message.to_string(),
    }
}

fn load_spec(spec: &str) -> Result<FamilySpec, Failure> {
    if let Some(builtin) = builtin_family(spec) {
        return Ok(builtin);
    }
    let text =
        fs::read_to_string(spec).map_err(|e| usage(format!("cannot read spec {spec}: {e}")))?;
    serde_json::from_str(&text)
        .map_err(|e| usage(format!("{spec} is not a family description: {e}")))
}

fn load_family(spec: &str) -> Result<Family, Failure> {
    Family::new(load_spec(spec)?).map_err(usage)
}

fn engine_config(max_depth: Option<u64>, budget: Option<u64>) -> EngineConfig {
    let mut config = EngineConfig::default();
    if let Some(d) = max_depth {
        config.max_depth = d;
    }
    if let Some(b) = budget {
        config.budget = b;
    }
    config
}

fn parse_address(text: &str) -> Result<TreeAddress, Failure> {
    text.parse().map_err(usage)
}

/// Best-effort stdout write; a closed pipe ends the process the way a
/// shell pipeline expects instead of panicking.
fn out_raw(content: &str) {
    use std::io::Write;
    let mut stdout = std::io::stdout().lock();
    if stdout.write_all(content.as_bytes()).is_err() || stdout.flush().is_err() {
        std::process::exit(141);
    }
}

fn out_line(content: &str) {
    out_raw(content);
    out_raw("\n");
}

fn emit(out: Option<&Path>, content: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            out_raw(content);
            Ok(())
        }
    }
}

fn report_and_judge(reports: &[VerificationReport]) -> Result<(), Failure> {
    out_line(&serde_json::to_string_pretty(reports).expect("report serialization"));
    if all_passed(reports) {
        Ok(())
    } else {
        Err(check_failed("verification failed"))
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Validate { spec } => {
            let doc = load_spec(&spec)?;
            let report = validate(&doc);
            if report.is_valid() {
                out_line(&normalize(&doc).map_err(usage)?);
                Ok(())
            } else {
                out_line(&serde_json::to_string_pretty(&report).expect("report serialization"));
                Err(usage("family description rejected"))
            }
        }
        Command::Ball {
            spec,
            radius,
            sons,
            factors,
            format,
            out,
            max_depth,
            budget,
        } => {
            let engine = Engine::with_config(load_family(&spec)?, engine_config(max_depth, budget));
            let ball = engine
                .materialize_ball(radius, sons, factors)
                .map_err(usage)?;
            let content = match format {
                Format::Json => ball_to_json(&ball),
                Format::Dot => ball_to_dot(&ball),
            };
            emit(out.as_deref(), &content)
        }
        Command::Edge {
            spec,
            address,
            slot,
        } => {
            let engine = Engine::new(load_family(&spec)?);
            let assignment = engine
                .factor_of_edge(&parse_address(&address)?, slot)
                .map_err(usage)?;
            out_line(&serde_json::to_string(&assignment).expect("assignment serialization"));
            Ok(())
        }
        Command::Label {
            spec,
            address,
            factor,
        } => {
            let engine = Engine::new(load_family(&spec)?);
            let label = engine
                .label_of(&parse_address(&address)?, factor)
                .map_err(usage)?;
            out_line(&label.to_string());
            Ok(())
        }
        Command::Vertex {
            spec,
            factor,
            index,
        } => {
            let engine = Engine::new(load_family(&spec)?);
            let address = engine.vertex_of(factor, index).map_err(usage)?;
            out_line(&address.to_string());
            Ok(())
        }
        Command::Verify {
            spec,
            radius,
            sons,
            factors,
            pipeline,
            max_depth,
            budget,
        } => {
            let config = engine_config(max_depth, budget);
            let reports = if pipeline {
                let pipeline = Pipeline::with_config(load_spec(&spec)?, config).map_err(usage)?;
                verify_pipeline_window(&pipeline, radius, sons, factors).map_err(usage)?
            } else {
                let engine = Engine::with_config(load_family(&spec)?, config);
                verify_engine_window(&engine, radius, sons, factors).map_err(usage)?
            };
            report_and_judge(&reports)
        }
        Command::Simulate { config, trace } => {
            let text = fs::read_to_string(&config)
                .map_err(|e| usage(format!("cannot read config {}: {e}", config.display())))?;
            let parsed: SimConfig = serde_json::from_str(&text).map_err(|e| {
                usage(format!(
                    "{} is not a simulator config: {e}",
                    config.display()
                ))
            })?;
            let result = run(&parsed).map_err(usage)?;
            let jsonl = trace_to_jsonl(&result);
            match trace {
                Some(path) => {
                    emit(Some(&path), &jsonl)?;
                    out_line(
                        &serde_json::to_string_pretty(&check_c(&result))
                            .expect("report serialization"),
                    );
                }
                None => out_raw(&jsonl),
            }
            Ok(())
        }
        Command::CheckTrace { trace } => {
            let text = fs::read_to_string(&trace)
                .map_err(|e| usage(format!("cannot read trace {}: {e}", trace.display())))?;
            match trace_from_jsonl(&text) {
                Ok(parsed) => report_and_judge(&verify_trace(&parsed)),
                Err(e) => {
                    let report = VerificationReport {
                        check: "trace-syntax".into(),
                        scope: trace.display().to_string(),
                        verdict: Verdict::Fail,
                        counterexample: Some(e.to_string()),
                        details: "trace could not be parsed".into(),
                    };
                    out_line(
                        &serde_json::to_string_pretty(&vec![report]).expect("report serialization"),
                    );
                    Err(check_failed("trace rejected"))
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            if !failure.message.is_empty() {
                eprintln!("error: {}", failure.message);
            }
            ExitCode::from(failure.code)
        }
    }
}
