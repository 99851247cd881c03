//! SMT-LIB2 emission and the external solver driver.
//!
//! A condition is serialized as a script that declares every prelude
//! constant (references are `Int`s with `null = 0`, heaps are
//! `(Array Int (Array Int Int))` / `(Array Int (Array Int Bool))` plus an
//! `(Array Int Int)` length map), asserts the prelude axioms and the
//! negation of the condition, then asks `check-sat` / `get-model`. `unsat`
//! maps to `Proved`, `sat` to a counterexample whose scalar assignments are
//! parsed from the model output (an unparseable model degrades to an empty
//! one with a warning, never an error).

use super::{ArrayValue, Model, ProverConfig, ScalarValue, UnknownReason, Verdict};
use crate::logic::*;
use crate::typecheck::{Type, TypedProgram};
use crate::vcgen::{inline_functions, VerificationCondition};
use num_bigint::BigInt;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

const LEN_MAP: &str = "$len";

fn smt_term(t: &TermRef, out: &mut String) {
    match &**t {
        Term::IntLit(n) => {
            if n < &BigInt::from(0) {
                let _ = write!(out, "(- {})", -n);
            } else {
                let _ = write!(out, "{n}");
            }
        }
        Term::Var(x) => out.push_str(x),
        Term::Null => out.push_str("null"),
        Term::Neg(a) => {
            out.push_str("(- ");
            smt_term(a, out);
            out.push(')');
        }
        Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) | Term::Div(a, b) | Term::Mod(a, b) => {
            let op = match &**t {
                Term::Add(..) => "+",
                Term::Sub(..) => "-",
                Term::Mul(..) => "*",
                Term::Div(..) => "div",
                _ => "mod",
            };
            let _ = write!(out, "({op} ");
            smt_term(a, out);
            out.push(' ');
            smt_term(b, out);
            out.push(')');
        }
        Term::Select(h, a, i) => {
            out.push_str("(select (select ");
            smt_heap(h, out);
            out.push(' ');
            smt_term(a, out);
            out.push_str(") ");
            smt_term(i, out);
            out.push(')');
        }
        Term::Length(a) => {
            let _ = write!(out, "(select {LEN_MAP} ");
            smt_term(a, out);
            out.push(')');
        }
        Term::Ite(c, a, b) => {
            out.push_str("(ite ");
            smt_formula(c, out);
            out.push(' ');
            smt_term(a, out);
            out.push(' ');
            smt_term(b, out);
            out.push(')');
        }
        Term::Apply(f, args) => {
            if args.is_empty() {
                out.push_str(f);
            } else {
                let _ = write!(out, "({f}");
                for a in args {
                    out.push(' ');
                    smt_arg(a, out);
                }
                out.push(')');
            }
        }
    }
}

fn smt_heap(h: &HeapRef, out: &mut String) {
    match &**h {
        HeapExpr::Var(x) => out.push_str(x),
        HeapExpr::Store {
            heap,
            array,
            index,
            value,
        } => {
            // store one cell: (store H a (store (select H a) i v))
            out.push_str("(store ");
            smt_heap(heap, out);
            out.push(' ');
            smt_term(array, out);
            out.push_str(" (store (select ");
            smt_heap(heap, out);
            out.push(' ');
            smt_term(array, out);
            out.push_str(") ");
            smt_term(index, out);
            out.push(' ');
            smt_arg(value, out);
            out.push_str("))");
        }
    }
}

fn smt_arg(a: &Arg, out: &mut String) {
    match a {
        Arg::T(t) => smt_term(t, out),
        Arg::F(f) => smt_formula(f, out),
        Arg::H(_, h) => smt_heap(h, out),
    }
}

fn smt_formula(f: &FormulaRef, out: &mut String) {
    match &**f {
        Formula::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Formula::BoolVar(x) => out.push_str(x),
        Formula::Cmp(op, a, b) => {
            let sym = match op {
                CmpOp::Lt => "<",
                CmpOp::Le => "<=",
                CmpOp::Gt => ">",
                CmpOp::Ge => ">=",
                CmpOp::Eq => "=",
                CmpOp::Ne => "distinct",
            };
            let _ = write!(out, "({sym} ");
            smt_term(a, out);
            out.push(' ');
            smt_term(b, out);
            out.push(')');
        }
        Formula::RefEq(a, b) => {
            out.push_str("(= ");
            smt_term(a, out);
            out.push(' ');
            smt_term(b, out);
            out.push(')');
        }
        Formula::SelectBool(h, a, i) => {
            out.push_str("(select (select ");
            smt_heap(h, out);
            out.push(' ');
            smt_term(a, out);
            out.push_str(") ");
            smt_term(i, out);
            out.push(')');
        }
        Formula::ApplyBool(name, args) => {
            if args.is_empty() {
                out.push_str(name);
            } else {
                let _ = write!(out, "({name}");
                for a in args {
                    out.push(' ');
                    smt_arg(a, out);
                }
                out.push(')');
            }
        }
        Formula::Not(g) => {
            out.push_str("(not ");
            smt_formula(g, out);
            out.push(')');
        }
        Formula::And(fs) => {
            out.push_str("(and");
            for g in fs {
                out.push(' ');
                smt_formula(g, out);
            }
            out.push(')');
        }
        Formula::Or(fs) => {
            out.push_str("(or");
            for g in fs {
                out.push(' ');
                smt_formula(g, out);
            }
            out.push(')');
        }
        Formula::Implies(p, q) => {
            out.push_str("(=> ");
            smt_formula(p, out);
            out.push(' ');
            smt_formula(q, out);
            out.push(')');
        }
        Formula::Iff(p, q) => {
            out.push_str("(= ");
            smt_formula(p, out);
            out.push(' ');
            smt_formula(q, out);
            out.push(')');
        }
        Formula::Forall(x, body) => {
            let _ = write!(out, "(forall (({x} Int)) ");
            smt_formula(body, out);
            out.push(')');
        }
        Formula::Exists(x, body) => {
            let _ = write!(out, "(exists (({x} Int)) ");
            smt_formula(body, out);
            out.push(')');
        }
    }
}

fn sort_smt(sort: Sort) -> &'static str {
    match sort {
        Sort::Int | Sort::Ref => "Int",
        Sort::Bool => "Bool",
        Sort::HeapInt => "(Array Int (Array Int Int))",
        Sort::HeapBool => "(Array Int (Array Int Bool))",
    }
}

/// Uninterpreted function signatures for applications that survive inlining.
fn function_signatures(tp: &TypedProgram) -> BTreeMap<String, (Vec<&'static str>, &'static str)> {
    let mut out = BTreeMap::new();
    for f in tp.program.functions() {
        let mut params = Vec::new();
        for p in &f.ins {
            let mut sink = Vec::new();
            let ty = crate::typecheck::type_of_type_expr(&p.ty, &mut sink);
            params.push(match ty {
                Type::Bool => "Bool",
                _ => "Int",
            });
        }
        let mut sink = Vec::new();
        let ret = match crate::typecheck::type_of_type_expr(&f.return_type, &mut sink) {
            Type::Bool => "Bool",
            _ => "Int",
        };
        out.insert(f.name.clone(), (params, ret));
    }
    out
}

fn applied_functions(f: &FormulaRef, out: &mut std::collections::BTreeSet<String>) {
    fn walk_t(t: &TermRef, out: &mut std::collections::BTreeSet<String>) {
        match &**t {
            Term::Apply(name, args) => {
                out.insert(name.clone());
                for a in args {
                    walk_a(a, out);
                }
            }
            Term::Neg(a) | Term::Length(a) => walk_t(a, out),
            Term::Add(a, b)
            | Term::Sub(a, b)
            | Term::Mul(a, b)
            | Term::Div(a, b)
            | Term::Mod(a, b) => {
                walk_t(a, out);
                walk_t(b, out);
            }
            Term::Select(h, a, i) => {
                walk_h(h, out);
                walk_t(a, out);
                walk_t(i, out);
            }
            Term::Ite(c, a, b) => {
                applied_functions(c, out);
                walk_t(a, out);
                walk_t(b, out);
            }
            _ => {}
        }
    }
    fn walk_h(h: &HeapRef, out: &mut std::collections::BTreeSet<String>) {
        if let HeapExpr::Store {
            heap,
            array,
            index,
            value,
        } = &**h
        {
            walk_h(heap, out);
            walk_t(array, out);
            walk_t(index, out);
            walk_a(value, out);
        }
    }
    fn walk_a(a: &Arg, out: &mut std::collections::BTreeSet<String>) {
        match a {
            Arg::T(t) => walk_t(t, out),
            Arg::F(f) => applied_functions(f, out),
            Arg::H(_, h) => walk_h(h, out),
        }
    }
    match &**f {
        Formula::ApplyBool(name, args) => {
            out.insert(name.clone());
            for a in args {
                walk_a(a, out);
            }
        }
        Formula::Cmp(_, a, b) | Formula::RefEq(a, b) => {
            walk_t(a, out);
            walk_t(b, out);
        }
        Formula::SelectBool(h, a, i) => {
            walk_h(h, out);
            walk_t(a, out);
            walk_t(i, out);
        }
        Formula::Not(g) => applied_functions(g, out),
        Formula::And(fs) | Formula::Or(fs) => {
            for g in fs {
                applied_functions(g, out);
            }
        }
        Formula::Implies(p, q) | Formula::Iff(p, q) => {
            applied_functions(p, out);
            applied_functions(q, out);
        }
        Formula::Forall(_, b) | Formula::Exists(_, b) => applied_functions(b, out),
        _ => {}
    }
}

/// Serialize the negated condition as a complete SMT-LIB2 script. `tp` is
/// used to inline function bodies (same fuel as the built-in backend) and to
/// declare the signatures of applications left uninterpreted.
pub fn emit_smtlib(tp: &TypedProgram, vc: &VerificationCondition, fuel: u32) -> String {
    let formula = inline_functions(tp, &vc.formula(), fuel);
    let mut fv = FreeVars::default();
    free_vars_formula(&formula, &mut fv, &mut Vec::new());

    let mut out = String::new();
    let _ = writeln!(out, "; vc {} [{}] {}", vc.id, vc.kind, vc.description);
    let _ = writeln!(out, "(set-logic ALL)");
    let _ = writeln!(out, "(define-fun null () Int 0)");
    let _ = writeln!(out, "(declare-fun {LEN_MAP} () (Array Int Int))");

    // scalar and heap constants, sorted by name
    let mut names: Vec<&String> = fv
        .terms
        .iter()
        .chain(fv.bools.iter())
        .chain(fv.heaps.iter())
        .collect();
    names.sort();
    names.dedup();
    for name in &names {
        let sort = vc
            .symbols
            .get(*name)
            .copied()
            .unwrap_or(if fv.bools.contains(*name) {
                Sort::Bool
            } else if fv.heaps.contains(*name) {
                Sort::HeapInt
            } else {
                Sort::Int
            });
        let _ = writeln!(out, "(declare-fun {name} () {})", sort_smt(sort));
    }
    // uninterpreted applications that survived inlining
    let mut applied = std::collections::BTreeSet::new();
    applied_functions(&formula, &mut applied);
    let sigs = function_signatures(tp);
    for name in &applied {
        if let Some((params, ret)) = sigs.get(name) {
            let _ = writeln!(out, "(declare-fun {name} ({}) {ret})", params.join(" "));
        }
    }
    // prelude axioms: non-null arrays have non-negative lengths
    let mut refs: Vec<&String> = vc
        .symbols
        .iter()
        .filter(|(_, s)| **s == Sort::Ref)
        .map(|(n, _)| n)
        .collect();
    refs.sort();
    for r in refs {
        let _ = writeln!(
            out,
            "(assert (or (= {r} null) (>= (select {LEN_MAP} {r}) 0)))"
        );
    }
    // the negated condition
    let mut neg = String::new();
    smt_formula(&formula, &mut neg);
    let _ = writeln!(out, "(assert (not {neg}))");
    let _ = writeln!(out, "(check-sat)");
    let _ = writeln!(out, "(get-model)");
    out
}

// ---------------------------------------------------------------------------
// External solver driver
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub enum ExternalError {
    Launch(String),
    NonZeroExit(String),
}

impl std::fmt::Display for ExternalError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExternalError::Launch(m) => write!(f, "failed to launch external solver: {m}"),
            ExternalError::NonZeroExit(m) => write!(f, "external solver failed: {m}"),
        }
    }
}

/// Outcome of one external run; `warning` flags an unparseable model.
#[derive(Debug)]
pub struct ExternalOutcome {
    pub verdict: Verdict,
    pub warning: Option<String>,
}

/// Parse `(define-fun name () Sort value)` scalar assignments out of a
/// `get-model` answer; everything else is skipped.
pub fn parse_model(output: &str) -> Option<Model> {
    let tokens = tokenize_sexpr(output);
    let mut model = Model::default();
    let mut found = false;
    let mut i = 0;
    while i < tokens.len() {
        if tokens[i] == "(" && i + 1 < tokens.len() && tokens[i + 1] == "define-fun" {
            // ( define-fun name ( ) sort value... )
            let name_idx = i + 2;
            if name_idx + 3 < tokens.len()
                && tokens[name_idx + 1] == "("
                && tokens[name_idx + 2] == ")"
            {
                let raw = tokens[name_idx].trim_matches('|').to_string();
                let sort = &tokens[name_idx + 3];
                let vstart = name_idx + 4;
                match sort.as_str() {
                    "Int" if vstart < tokens.len() => {
                        let value = if tokens[vstart] == "(" {
                            // (- n)
                            if vstart + 2 < tokens.len() && tokens[vstart + 1] == "-" {
                                tokens[vstart + 2].parse::<BigInt>().ok().map(|n| -n)
                            } else {
                                None
                            }
                        } else {
                            tokens[vstart].parse::<BigInt>().ok()
                        };
                        if let Some(v) = value {
                            model.scalars.insert(raw, ScalarValue::Int(v));
                            found = true;
                        }
                    }
                    "Bool" if vstart < tokens.len() => {
                        let value = match tokens[vstart].as_str() {
                            "true" => Some(true),
                            "false" => Some(false),
                            _ => None,
                        };
                        if let Some(v) = value {
                            model.scalars.insert(raw, ScalarValue::Bool(v));
                            found = true;
                        }
                    }
                    _ => {}
                }
            }
        }
        i += 1;
    }
    if found {
        Some(model)
    } else {
        None
    }
}

fn tokenize_sexpr(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    for c in s.chars() {
        if quoted {
            if c == '|' {
                quoted = false;
                out.push(std::mem::take(&mut cur));
            } else {
                cur.push(c);
            }
            continue;
        }
        match c {
            '|' => {
                quoted = true;
            }
            '(' | ')' => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(c.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Map a solver's textual answer to a verdict. Exposed for protocol tests.
pub fn interpret_solver_output(output: &str) -> Result<ExternalOutcome, ExternalError> {
    let first = output.split_whitespace().next().unwrap_or("");
    match first {
        "unsat" => Ok(ExternalOutcome {
            verdict: Verdict::Proved,
            warning: None,
        }),
        "sat" => match parse_model(output) {
            Some(model) => Ok(ExternalOutcome {
                verdict: Verdict::Counterexample(model),
                warning: None,
            }),
            None => Ok(ExternalOutcome {
                verdict: Verdict::Counterexample(Model::default()),
                warning: Some("could not parse the solver model; counterexample is empty".into()),
            }),
        },
        "unknown" => Ok(ExternalOutcome {
            verdict: Verdict::Unknown(UnknownReason::ExternalSolverUnknown),
            warning: None,
        }),
        other => Err(ExternalError::NonZeroExit(format!(
            "unexpected solver answer {other:?}"
        ))),
    }
}

/// Write the script to a file and run `<solver_command> <file>`, with a
/// timeout. The command may carry its own arguments.
pub fn run_external(
    script: &str,
    solver_command: &str,
    file_hint: &str,
    cfg: &ProverConfig,
    keep_dir: Option<&Path>,
) -> Result<ExternalOutcome, ExternalError> {
    let path: PathBuf = match keep_dir {
        Some(dir) => dir.join(file_hint),
        None => std::env::temp_dir().join(format!(
            "minidafny-{}-{file_hint}",
            std::process::id()
        )),
    };
    if let Some(parent) = path.parent() {
        let _ = std::fs::create_dir_all(parent);
    }
    std::fs::write(&path, script)
        .map_err(|e| ExternalError::Launch(format!("cannot write {}: {e}", path.display())))?;

    let mut parts = solver_command.split_whitespace();
    let program = parts
        .next()
        .ok_or_else(|| ExternalError::Launch("empty solver command".into()))?;
    let mut cmd = std::process::Command::new(program);
    for a in parts {
        cmd.arg(a);
    }
    cmd.arg(&path);
    cmd.stdout(std::process::Stdio::piped());
    cmd.stderr(std::process::Stdio::null());
    let mut child = cmd
        .spawn()
        .map_err(|e| ExternalError::Launch(format!("{program}: {e}")))?;

    let deadline = Instant::now() + Duration::from_millis(cfg.timeout_ms.max(1));
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break status,
            Ok(None) => {
                if Instant::now() >= deadline {
                    let _ = child.kill();
                    let _ = child.wait();
                    if keep_dir.is_none() {
                        let _ = std::fs::remove_file(&path);
                    }
                    return Ok(ExternalOutcome {
                        verdict: Verdict::Unknown(UnknownReason::Timeout),
                        warning: None,
                    });
                }
                std::thread::sleep(Duration::from_millis(5));
            }
            Err(e) => return Err(ExternalError::Launch(e.to_string())),
        }
    };
    let mut output = String::new();
    if let Some(mut stdout) = child.stdout.take() {
        let _ = stdout.read_to_string(&mut output);
    }
    if keep_dir.is_none() {
        let _ = std::fs::remove_file(&path);
    }
    if !status.success() {
        return Err(ExternalError::NonZeroExit(format!(
            "exit status {status}: {}",
            output.lines().next().unwrap_or("")
        )));
    }
    interpret_solver_output(&output)
}

/// ArrayValue is part of this module's public surface through Model; keep
/// the import alive for doc purposes.
#[allow(unused)]
fn _array_value_is_public(_: &ArrayValue) {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpret_protocol_answers() {
        assert!(matches!(
            interpret_solver_output("unsat\n").unwrap().verdict,
            Verdict::Proved
        ));
        assert!(matches!(
            interpret_solver_output("unknown\n").unwrap().verdict,
            Verdict::Unknown(UnknownReason::ExternalSolverUnknown)
        ));
        let sat = interpret_solver_output(
            "sat\n(model\n  (define-fun numChildren () Int (- 2))\n  (define-fun ok () Bool true)\n)\n",
        )
        .unwrap();
        let Verdict::Counterexample(m) = sat.verdict else {
            panic!()
        };
        assert_eq!(m.int("numChildren").unwrap(), &BigInt::from(-2));
        assert_eq!(
            m.scalars.get("ok"),
            Some(&ScalarValue::Bool(true))
        );
    }

    #[test]
    fn sat_without_model_is_counterexample_with_warning() {
        let out = interpret_solver_output("sat\n").unwrap();
        assert!(out.warning.is_some());
        assert!(matches!(out.verdict, Verdict::Counterexample(m) if m.scalars.is_empty()));
    }

    #[test]
    fn quoted_symbols_round_trip() {
        let out =
            interpret_solver_output("sat\n((define-fun |x@loop0| () Int 7))\n").unwrap();
        let Verdict::Counterexample(m) = out.verdict else {
            panic!()
        };
        assert_eq!(m.int("x@loop0").unwrap(), &BigInt::from(7));
    }
}
