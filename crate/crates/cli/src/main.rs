//! Command-line driver: verify `.mdfy` files or run a corpus manifest.

use clap::{Parser, Subcommand, ValueEnum};
use minidafny_core::pipeline::{self, Backend, RunConfig};
use minidafny_core::report;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "minidafny", version, about = "A miniature auto-active program verifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendArg {
    Builtin,
    Smtlib,
}

#[derive(Subcommand)]
enum Command {
    /// Verify source files and report per-obligation verdicts.
    Verify {
        /// Input `.mdfy` files.
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Decision procedure: built-in or external SMT-LIB2 solver.
        #[arg(long, value_enum, default_value = "builtin")]
        backend: BackendArg,
        /// External solver command (also read from MINIDAFNY_SOLVER).
        #[arg(long = "solver-cmd")]
        solver_cmd: Option<String>,
        /// Per-obligation timeout in milliseconds.
        #[arg(long, default_value_t = 10_000)]
        timeout: u64,
        /// Function inlining depth.
        #[arg(long, default_value_t = 2)]
        fuel: u32,
        /// Quantifier instantiation rounds.
        #[arg(long, default_value_t = 3)]
        rounds: u32,
        /// Write one SMT-LIB2 file per obligation into this directory.
        #[arg(long = "emit-smt")]
        emit_smt: Option<PathBuf>,
        /// Print the guarded-command block graph of every method.
        #[arg(long = "emit-gc")]
        emit_gc: bool,
        /// Print every verification condition.
        #[arg(long = "emit-vc")]
        emit_vc: bool,
        /// Replay every counterexample against the concrete semantics.
        #[arg(long)]
        replay: bool,
        /// Emit the machine-readable JSON report instead of diagnostics.
        #[arg(long)]
        json: bool,
    },
    /// Run a corpus manifest of files with expected outcomes.
    Corpus {
        manifest: PathBuf,
    },
}

fn main() {
    let code = match std::panic::catch_unwind(run) {
        Ok(code) => code,
        Err(_) => {
            eprintln!("minidafny: internal error");
            report::EXIT_INTERNAL_ERROR
        }
    };
    std::process::exit(code);
}

fn run() -> i32 {
    let cli = Cli::parse();
    match cli.command {
        Command::Verify {
            files,
            backend,
            solver_cmd,
            timeout,
            fuel,
            rounds,
            emit_smt,
            emit_gc,
            emit_vc,
            replay,
            json,
        } => {
            let solver_command =
                solver_cmd.or_else(|| std::env::var("MINIDAFNY_SOLVER").ok());
            let backend = match backend {
                BackendArg::Builtin => Backend::Builtin,
                BackendArg::Smtlib => Backend::Smtlib,
            };
            if backend == Backend::Smtlib && solver_command.is_none() {
                eprintln!(
                    "minidafny: --backend smtlib requires --solver-cmd or MINIDAFNY_SOLVER"
                );
                return report::EXIT_SOLVER_FAILURE;
            }
            let cfg = RunConfig {
                backend,
                solver_command,
                timeout_ms: timeout,
                fuel,
                instantiation_rounds: rounds,
                emit_smt_dir: emit_smt,
                emit_gc,
                emit_vc,
                replay,
                json,
                ..RunConfig::default()
            };
            let rep = pipeline::verify_files(&files, &cfg);
            for f in &rep.files {
                for (name, dump) in &f.gc_dumps {
                    println!("== guarded commands: {name}");
                    print!("{dump}");
                }
                for dump in &f.vc_dumps {
                    print!("{dump}");
                }
                if let Some(failure) = &f.external_failure {
                    eprintln!("minidafny: {failure}");
                }
            }
            if cfg.json {
                print!("{}", report::render_json(&rep));
            } else {
                print!("{}", report::render_human(&rep));
            }
            report::exit_code(&rep)
        }
        Command::Corpus { manifest } => {
            let cfg = RunConfig {
                replay: true,
                ..RunConfig::default()
            };
            match pipeline::run_corpus(&manifest, &cfg) {
                Ok(diffs) if diffs.is_empty() => {
                    println!("corpus: all entries match");
                    report::EXIT_OK
                }
                Ok(diffs) => {
                    for d in &diffs {
                        println!("corpus mismatch: {d}");
                    }
                    report::EXIT_VERIFICATION_FAILED
                }
                Err(e) => {
                    eprintln!("minidafny: {e}");
                    report::EXIT_STATIC_ERRORS
                }
            }
        }
    }
}
