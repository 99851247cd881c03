//! Report values: per-file, per-method, per-VC results with a stable,
//! versioned JSON rendering and the fixed human diagnostic format.

use crate::diag::{Code, Diagnostic, Severity};
use crate::ir::ObligationKind;
use crate::prover::{Model, Verdict};
use crate::replay::ReplayOutcome;
use crate::span::Span;
use serde::Serialize;
use std::fmt::Write as _;

#[derive(Debug, Clone)]
pub struct VcResult {
    pub id: String,
    pub kind: ObligationKind,
    pub span: Span,
    pub description: String,
    pub verdict: Verdict,
    pub replay: Option<ReplayOutcome>,
}

#[derive(Debug, Clone)]
pub struct MethodResult {
    pub name: String,
    pub vcs: Vec<VcResult>,
}

#[derive(Debug, Clone, Default)]
pub struct FileResult {
    pub path: String,
    pub diagnostics: Vec<Diagnostic>,
    pub methods: Vec<MethodResult>,
    pub had_static_errors: bool,
    pub external_failure: Option<String>,
    /// Guarded-command dumps requested with `--emit-gc`, in source order.
    pub gc_dumps: Vec<(String, String)>,
    /// VC dumps requested with `--emit-vc`.
    pub vc_dumps: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub files: Vec<FileResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Summary {
    pub proved: usize,
    pub failed: usize,
    pub unknown: usize,
    pub errors: usize,
}

impl Report {
    pub fn summary(&self) -> Summary {
        let mut s = Summary::default();
        for f in &self.files {
            s.errors += f
                .diagnostics
                .iter()
                .filter(|d| d.severity == Severity::Error)
                .count();
            for m in &f.methods {
                for vc in &m.vcs {
                    match vc.verdict {
                        Verdict::Proved => s.proved += 1,
                        Verdict::Counterexample(_) => s.failed += 1,
                        Verdict::Unknown(_) => s.unknown += 1,
                    }
                }
            }
        }
        s
    }

    pub fn all_proved(&self) -> bool {
        let s = self.summary();
        s.failed == 0 && s.unknown == 0 && s.errors == 0
    }
}

// -- exit codes ----------------------------------------------------------

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION_FAILED: i32 = 1;
pub const EXIT_STATIC_ERRORS: i32 = 2;
pub const EXIT_INTERNAL_ERROR: i32 = 3;
pub const EXIT_SOLVER_FAILURE: i32 = 4;

pub fn exit_code(report: &Report) -> i32 {
    if report.files.iter().any(|f| f.external_failure.is_some()) {
        return EXIT_SOLVER_FAILURE;
    }
    if report.files.iter().any(|f| f.had_static_errors) {
        return EXIT_STATIC_ERRORS;
    }
    let s = report.summary();
    if s.failed > 0 || s.unknown > 0 || s.errors > 0 {
        return EXIT_VERIFICATION_FAILED;
    }
    EXIT_OK
}

// -- human rendering -------------------------------------------------------

fn verdict_diagnostic(vc: &VcResult) -> Option<Diagnostic> {
    match &vc.verdict {
        Verdict::Proved => None,
        Verdict::Counterexample(model) => {
            let mut msg = vc.description.clone();
            let rendered = model.render();
            if !rendered.is_empty() {
                let _ = write!(msg, "; counterexample: {rendered}");
            }
            match &vc.replay {
                Some(ReplayOutcome::Confirmed { .. }) => msg.push_str(" [replay: confirmed]"),
                Some(ReplayOutcome::NotReproduced { detail }) => {
                    let _ = write!(msg, " [replay: not reproduced: {detail}]");
                }
                Some(ReplayOutcome::StepLimit) => msg.push_str(" [replay: step limit]"),
                None => {}
            }
            Some(Diagnostic::error(vc.span.clone(), Code::VcFailed, msg))
        }
        Verdict::Unknown(reason) => Some(Diagnostic::error(
            vc.span.clone(),
            Code::VcUnknown,
            format!("{} (verdict unknown: {reason})", vc.description),
        )),
    }
}

/// Render the report as human-readable diagnostics, one per line, followed
/// by a summary line.
pub fn render_human(report: &Report) -> String {
    let mut out = String::new();
    for f in &report.files {
        let mut lines: Vec<Diagnostic> = f.diagnostics.clone();
        for m in &f.methods {
            for vc in &m.vcs {
                if let Some(d) = verdict_diagnostic(vc) {
                    lines.push(d);
                }
            }
        }
        crate::diag::sort_diagnostics(&mut lines);
        for d in lines {
            let _ = writeln!(out, "{d}");
        }
    }
    let s = report.summary();
    let _ = writeln!(
        out,
        "minidafny: {} proved, {} failed, {} unknown, {} errors",
        s.proved, s.failed, s.unknown, s.errors
    );
    out
}

// -- JSON rendering ---------------------------------------------------------

#[derive(Serialize)]
struct JsonDiag {
    line: u32,
    col: u32,
    severity: Severity,
    code: &'static str,
    message: String,
}

#[derive(Serialize)]
struct JsonReplay {
    outcome: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    detail: Option<String>,
}

#[derive(Serialize)]
struct JsonVc {
    id: String,
    kind: String,
    line: u32,
    col: u32,
    verdict: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    counterexample: Option<Model>,
    #[serde(skip_serializing_if = "Option::is_none")]
    replay: Option<JsonReplay>,
}

#[derive(Serialize)]
struct JsonMethod {
    name: String,
    vcs: Vec<JsonVc>,
}

#[derive(Serialize)]
struct JsonFile {
    path: String,
    diagnostics: Vec<JsonDiag>,
    methods: Vec<JsonMethod>,
}

#[derive(Serialize)]
struct JsonReport {
    version: u32,
    files: Vec<JsonFile>,
    summary: Summary,
}

/// Stable JSON rendering: two runs with identical inputs and configuration
/// produce byte-identical output.
pub fn render_json(report: &Report) -> String {
    let files = report
        .files
        .iter()
        .map(|f| JsonFile {
            path: f.path.clone(),
            diagnostics: f
                .diagnostics
                .iter()
                .map(|d| JsonDiag {
                    line: d.span.start_line,
                    col: d.span.start_col,
                    severity: d.severity,
                    code: d.code.as_str(),
                    message: d.message.clone(),
                })
                .collect(),
            methods: f
                .methods
                .iter()
                .map(|m| JsonMethod {
                    name: m.name.clone(),
                    vcs: m
                        .vcs
                        .iter()
                        .map(|vc| {
                            let (verdict, counterexample) = match &vc.verdict {
                                Verdict::Proved => ("proved", None),
                                Verdict::Counterexample(model) => {
                                    ("counterexample", Some(model.clone()))
                                }
                                Verdict::Unknown(_) => ("unknown", None),
                            };
                            let message = match &vc.verdict {
                                Verdict::Unknown(reason) => {
                                    format!("{} (verdict unknown: {reason})", vc.description)
                                }
                                _ => vc.description.clone(),
                            };
                            JsonVc {
                                id: vc.id.clone(),
                                kind: vc.kind.to_string(),
                                line: vc.span.start_line,
                                col: vc.span.start_col,
                                verdict,
                                message,
                                counterexample,
                                replay: vc.replay.as_ref().map(|r| match r {
                                    ReplayOutcome::Confirmed { .. } => JsonReplay {
                                        outcome: "confirmed",
                                        detail: None,
                                    },
                                    ReplayOutcome::NotReproduced { detail } => JsonReplay {
                                        outcome: "not_reproduced",
                                        detail: Some(detail.clone()),
                                    },
                                    ReplayOutcome::StepLimit => JsonReplay {
                                        outcome: "step_limit",
                                        detail: None,
                                    },
                                }),
                            }
                        })
                        .collect(),
                })
                .collect(),
        })
        .collect();
    let json = JsonReport {
        version: 1,
        files,
        summary: report.summary(),
    };
    serde_json::to_string_pretty(&json).expect("report serialization cannot fail") + "\n"
}
