//! The verification pipeline: parse → typecheck → ghost/frame checks →
//! lowering → weakest preconditions → proving (→ replay), assembled into a
//! [`Report`](crate::report::Report).
//!
//! Ghost and frame violations are reported but do not stop verification, so
//! a single run can surface both the static frame diagnostics and the
//! semantic failures of the same file; the exit code still reflects the
//! static errors.

use crate::diag::{sort_diagnostics, Diagnostic, Severity};
use crate::parser;
use crate::prover::{self, smtlib, ProverConfig, Verdict};
use crate::replay;
use crate::report::{FileResult, MethodResult, Report, VcResult};
use crate::typecheck;
use crate::vcgen;
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Builtin,
    Smtlib,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub backend: Backend,
    pub solver_command: Option<String>,
    pub timeout_ms: u64,
    pub fuel: u32,
    pub instantiation_rounds: u32,
    pub max_instantiations: u32,
    pub emit_smt_dir: Option<PathBuf>,
    pub emit_gc: bool,
    pub emit_vc: bool,
    pub replay: bool,
    pub json: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            backend: Backend::Builtin,
            solver_command: None,
            timeout_ms: 10_000,
            fuel: 2,
            instantiation_rounds: 3,
            max_instantiations: 10_000,
            emit_smt_dir: None,
            emit_gc: false,
            emit_vc: false,
            replay: false,
            json: false,
        }
    }
}

impl RunConfig {
    fn prover_config(&self) -> ProverConfig {
        ProverConfig {
            timeout_ms: if self.backend == Backend::Smtlib {
                // external solvers get a longer default leash
                self.timeout_ms.max(30_000)
            } else {
                self.timeout_ms
            },
            instantiation_rounds: self.instantiation_rounds,
            max_instantiations: self.max_instantiations,
            fuel: self.fuel,
        }
    }
}

/// Verify one source text. This is the whole pipeline for a single file.
pub fn verify_source(path: &str, source: &str, cfg: &RunConfig) -> FileResult {
    let mut result = FileResult {
        path: path.to_string(),
        ..FileResult::default()
    };

    // frontend
    let program = match parser::parse(path, source) {
        Ok(p) => p,
        Err(mut diags) => {
            sort_diagnostics(&mut diags);
            result.diagnostics = diags;
            result.had_static_errors = true;
            return result;
        }
    };

    // types and names
    let tp = match typecheck::resolve_and_check(&program) {
        Ok(tp) => tp,
        Err(mut diags) => {
            sort_diagnostics(&mut diags);
            result.diagnostics = diags;
            result.had_static_errors = true;
            return result;
        }
    };
    result.diagnostics.extend(tp.warnings.iter().cloned());

    // ghost and frame rules: report, then keep verifying
    let ghost = typecheck::check_ghost_usage(&tp);
    let frames = typecheck::check_frames(&tp);
    let static_errors = ghost
        .iter()
        .chain(frames.iter())
        .any(|d| d.severity == Severity::Error);
    result.diagnostics.extend(ghost);
    result.diagnostics.extend(frames);
    result.had_static_errors = static_errors;

    // verification conditions
    let out = vcgen::generate(&tp);
    result.diagnostics.extend(out.diagnostics.iter().cloned());

    let pcfg = cfg.prover_config();
    'units: for unit in &out.units {
        if cfg.emit_gc {
            if let Some(g) = &unit.graph {
                result.gc_dumps.push((unit.name.clone(), g.dump()));
            }
        }
        let mut mres = MethodResult {
            name: unit.name.clone(),
            vcs: Vec::new(),
        };
        for vc in &unit.vcs {
            if cfg.emit_vc {
                result.vc_dumps.push(vc.dump());
            }
            if let Some(dir) = &cfg.emit_smt_dir {
                let script = smtlib::emit_smtlib(&tp, vc, cfg.fuel);
                let file = dir.join(format!("{}.{}.smt2", vc.method, vc.index));
                if let Some(parent) = file.parent() {
                    let _ = std::fs::create_dir_all(parent);
                }
                let _ = std::fs::write(file, script);
            }
            let verdict = match cfg.backend {
                Backend::Builtin => prover::prove(&tp, vc, &pcfg),
                Backend::Smtlib => {
                    let Some(solver) = &cfg.solver_command else {
                        result.external_failure =
                            Some("backend smtlib requires a solver command".into());
                        break 'units;
                    };
                    let script = smtlib::emit_smtlib(&tp, vc, cfg.fuel);
                    let hint = format!("{}.{}.smt2", vc.method, vc.index);
                    match smtlib::run_external(
                        &script,
                        solver,
                        &hint,
                        &pcfg,
                        cfg.emit_smt_dir.as_deref(),
                    ) {
                        Ok(outcome) => {
                            if let Some(w) = outcome.warning {
                                result.diagnostics.push(Diagnostic::warning(
                                    vc.span.clone(),
                                    crate::diag::Code::VcUnknown,
                                    w,
                                ));
                            }
                            outcome.verdict
                        }
                        Err(e) => {
                            result.external_failure = Some(e.to_string());
                            break 'units;
                        }
                    }
                }
            };
            let replay_outcome = match (&verdict, cfg.replay) {
                (Verdict::Counterexample(model), true) => Some(replay::replay(
                    &tp,
                    &unit.name,
                    unit.graph.as_ref(),
                    model,
                    vc,
                )),
                _ => None,
            };
            mres.vcs.push(VcResult {
                id: vc.id.clone(),
                kind: vc.kind,
                span: vc.span.clone(),
                description: vc.description.clone(),
                verdict,
                replay: replay_outcome,
            });
        }
        result.methods.push(mres);
    }

    sort_diagnostics(&mut result.diagnostics);
    result
}

/// Verify a set of files; unreadable files become static errors.
pub fn verify_files(paths: &[PathBuf], cfg: &RunConfig) -> Report {
    let mut report = Report::default();
    for path in paths {
        let display = path.display().to_string();
        match std::fs::read_to_string(path) {
            Ok(source) => report.files.push(verify_source(&display, &source, cfg)),
            Err(e) => {
                let mut fr = FileResult {
                    path: display.clone(),
                    had_static_errors: true,
                    ..FileResult::default()
                };
                fr.diagnostics.push(Diagnostic::error(
                    crate::span::Span::new(std::sync::Arc::new(display), (1, 1), (1, 1)),
                    crate::diag::Code::Internal,
                    format!("cannot read file: {e}"),
                ));
                report.files.push(fr);
            }
        }
    }
    report
}

// ---------------------------------------------------------------------------
// Corpus manifest runner
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub exit: i32,
    #[serde(default)]
    pub diagnostics: Vec<ManifestDiag>,
}

#[derive(Debug, Deserialize)]
pub struct ManifestDiag {
    pub code: String,
    #[serde(default)]
    pub line: Option<u32>,
    #[serde(default)]
    pub col: Option<u32>,
}

/// Run every manifest entry and compare exit codes and expected
/// diagnostics; mismatches are returned as printable diff lines.
pub fn run_corpus(manifest_path: &Path, cfg: &RunConfig) -> Result<Vec<String>, String> {
    let text = std::fs::read_to_string(manifest_path)
        .map_err(|e| format!("cannot read manifest {}: {e}", manifest_path.display()))?;
    let entries: Vec<ManifestEntry> =
        serde_json::from_str(&text).map_err(|e| format!("invalid manifest: {e}"))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut diffs = Vec::new();
    for entry in &entries {
        let path = base.join(&entry.file);
        if !path.exists() {
            diffs.push(format!("{}: file missing", entry.file));
            continue;
        }
        let report = verify_files(&[path], cfg);
        let got_exit = crate::report::exit_code(&report);
        if got_exit != entry.exit {
            diffs.push(format!(
                "{}: expected exit {}, got {}",
                entry.file, entry.exit, got_exit
            ));
        }
        let file = &report.files[0];
        // verification failures count as diagnostics for matching purposes
        let mut have: Vec<(String, u32, u32)> = file
            .diagnostics
            .iter()
            .map(|d| (d.code.as_str().to_string(), d.span.start_line, d.span.start_col))
            .collect();
        for m in &file.methods {
            for vc in &m.vcs {
                let code = match vc.verdict {
                    Verdict::Proved => continue,
                    Verdict::Counterexample(_) => "VC_FAILED",
                    Verdict::Unknown(_) => "VC_UNKNOWN",
                };
                have.push((code.to_string(), vc.span.start_line, vc.span.start_col));
            }
        }
        for want in &entry.diagnostics {
            let hit = have.iter().any(|(code, line, col)| {
                code == &want.code
                    && want.line.map(|l| l == *line).unwrap_or(true)
                    && want.col.map(|c| c == *col).unwrap_or(true)
            });
            if !hit {
                diffs.push(format!(
                    "{}: missing expected diagnostic {}{}",
                    entry.file,
                    want.code,
                    match (want.line, want.col) {
                        (Some(l), Some(c)) => format!(" at {l}:{c}"),
                        (Some(l), None) => format!(" at line {l}"),
                        _ => String::new(),
                    }
                ));
            }
        }
    }
    Ok(diffs)
}
