//! Concrete execution of a method under a counterexample model, confirming
//! that the reported obligation really fails.
//!
//! Inputs come from the model; uninitialized locals and out-parameters take
//! model values when present and type defaults otherwise. Execution is
//! concrete except at the points the verifier reasons modularly about: when
//! the model carries values for a loop cut's havoc symbols they are injected
//! on reaching the loop (the loop then continues concretely from that
//! state), and a call whose out-symbols are in the model takes those values
//! instead of running the callee. Quantifiers are evaluated by finite
//! enumeration over the mentioned arrays' index ranges extended by
//! model-derived values.

use crate::ast::{self, BinOp, Block, Expr, ExprKind, Lhs, QuantKind, Stmt, StmtKind, UnOp};
use crate::ir::{GuardedCommandGraph, ObligationKind};
use crate::prover::{ArrayValue, Model, ScalarValue};
use crate::span::Span;
use crate::typecheck::{ElemType, Type, TypedProgram};
use crate::vcgen::VerificationCondition;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;
use std::collections::{BTreeSet, HashMap};

const STEP_CAP: u64 = 1_000_000;
const ARRAY_CAP: usize = 100_000;
const RANGE_CAP: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(BigInt),
    Bool(bool),
    Null,
    Ref(usize),
}

#[derive(Debug, Clone)]
struct ArrayObj {
    cells: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ReplayOutcome {
    Confirmed {
        kind: ObligationKind,
        #[serde(skip)]
        span: Span,
    },
    NotReproduced {
        detail: String,
    },
    StepLimit,
}

impl ReplayOutcome {
    pub fn confirmed(&self) -> bool {
        matches!(self, ReplayOutcome::Confirmed { .. })
    }
}

enum Stop {
    Outcome(ReplayOutcome),
}

type EResult<T> = Result<T, Stop>;

fn stop<T>(o: ReplayOutcome) -> EResult<T> {
    Err(Stop::Outcome(o))
}

struct Interp<'a> {
    tp: &'a TypedProgram,
    decl: String,
    model: &'a Model,
    target_kind: ObligationKind,
    target_span: Span,
    steps: u64,
    store: Vec<ArrayObj>,
    vars: HashMap<String, Value>,
    loop_havocs: HashMap<Span, Vec<(String, String)>>,
    call_havocs: HashMap<Span, Vec<(String, String)>>,
}

fn span_within(inner: &Span, outer: &Span) -> bool {
    inner.file == outer.file
        && (outer.start_line, outer.start_col) <= (inner.start_line, inner.start_col)
        && (inner.end_line, inner.end_col) <= (outer.end_line, outer.end_col)
}

impl<'a> Interp<'a> {
    fn is_target(&self, kind: ObligationKind, span: &Span) -> bool {
        kind == self.target_kind && *span == self.target_span
    }

    /// Does the target obligation live inside this specification
    /// expression? Specs are only evaluated when they can decide the
    /// target; executable code always runs.
    fn targets_spec(&self, spec_span: &Span) -> bool {
        span_within(&self.target_span, spec_span)
    }

    fn confirmed<T>(&self, kind: ObligationKind, span: &Span) -> EResult<T> {
        stop(ReplayOutcome::Confirmed {
            kind,
            span: span.clone(),
        })
    }

    fn tick(&mut self) -> EResult<()> {
        self.steps += 1;
        if self.steps > STEP_CAP {
            return stop(ReplayOutcome::StepLimit);
        }
        Ok(())
    }

    fn default_value(&mut self, ty: Type) -> Value {
        match ty {
            Type::Int | Type::Nat => Value::Int(BigInt::zero()),
            Type::Bool => Value::Bool(false),
            Type::Array(_) | Type::Null => Value::Null,
        }
    }

    fn materialize_array(&mut self, ty: Type, av: &ArrayValue) -> Option<Value> {
        match av {
            ArrayValue::Null => Some(Value::Null),
            ArrayValue::Array {
                length,
                entries,
                default,
            } => {
                let len = length.to_usize()?;
                if len > ARRAY_CAP {
                    return None;
                }
                let elem_bool = matches!(ty, Type::Array(ElemType::Bool));
                let default_v = match (elem_bool, default) {
                    (true, ScalarValue::Bool(b)) => Value::Bool(*b),
                    (true, _) => Value::Bool(false),
                    (false, ScalarValue::Int(n)) => Value::Int(n.clone()),
                    (false, _) => Value::Int(BigInt::zero()),
                };
                let mut cells = vec![default_v; len];
                for (idx, v) in entries {
                    let Some(i) = idx.to_usize() else { continue };
                    if i >= len {
                        continue;
                    }
                    cells[i] = match (elem_bool, v) {
                        (true, ScalarValue::Bool(b)) => Value::Bool(*b),
                        (false, ScalarValue::Int(n)) => Value::Int(n.clone()),
                        _ => continue,
                    };
                }
                let id = self.store.len();
                self.store.push(ArrayObj { cells });
                Some(Value::Ref(id))
            }
        }
    }

    fn model_value(&mut self, symbol: &str, ty: Type) -> Option<Value> {
        match ty {
            Type::Int | Type::Nat => self
                .model
                .scalars
                .get(symbol)
                .and_then(|s| match s {
                    ScalarValue::Int(n) => Some(Value::Int(n.clone())),
                    _ => None,
                }),
            Type::Bool => self.model.scalars.get(symbol).and_then(|s| match s {
                ScalarValue::Bool(b) => Some(Value::Bool(*b)),
                _ => None,
            }),
            Type::Array(_) | Type::Null => {
                let av = self.model.arrays.get(symbol)?.clone();
                self.materialize_array(ty, &av)
            }
        }
    }

    fn var_type(&self, name: &str) -> Type {
        self.tp.scope(&self.decl).vars[name].ty
    }

    // -- expression evaluation ------------------------------------------

    fn as_int(v: &Value) -> BigInt {
        match v {
            Value::Int(n) => n.clone(),
            _ => BigInt::zero(),
        }
    }

    fn as_bool(v: &Value) -> bool {
        matches!(v, Value::Bool(true))
    }

    fn eval(&mut self, e: &Expr, env: Option<&HashMap<String, Value>>) -> EResult<Value> {
        self.tick()?;
        match &e.kind {
            ExprKind::IntLit(n) => Ok(Value::Int(n.clone())),
            ExprKind::BoolLit(b) => Ok(Value::Bool(*b)),
            ExprKind::NullLit => Ok(Value::Null),
            ExprKind::Var(x) => {
                if let Some(env) = env {
                    if let Some(v) = env.get(x) {
                        return Ok(v.clone());
                    }
                }
                match self.vars.get(x) {
                    Some(v) => Ok(v.clone()),
                    None => stop(ReplayOutcome::NotReproduced {
                        detail: format!("variable '{x}' has no value during replay"),
                    }),
                }
            }
            ExprKind::Unary(op, a) => {
                let v = self.eval(a, env)?;
                Ok(match op {
                    UnOp::Not => Value::Bool(!Self::as_bool(&v)),
                    UnOp::Neg => Value::Int(-Self::as_int(&v)),
                })
            }
            ExprKind::Binary(op, a, b) => self.eval_binary(e, *op, a, b, env),
            ExprKind::Chain(..) => {
                let d = ast::desugar_chains(e);
                self.eval(&d, env)
            }
            ExprKind::Select(a, i) => {
                let av = self.eval(a, env)?;
                let iv = Self::as_int(&self.eval(i, env)?);
                let id = self.check_array_access(&e.span, &av, Some(&iv))?;
                Ok(self.store[id].cells[iv.to_usize().unwrap()].clone())
            }
            ExprKind::Length(a) => {
                let av = self.eval(a, env)?;
                let id = self.check_array_access(&e.span, &av, None)?;
                Ok(Value::Int(BigInt::from(self.store[id].cells.len())))
            }
            ExprKind::Ite(c, t, e2) => {
                if Self::as_bool(&self.eval(c, env)?) {
                    self.eval(t, env)
                } else {
                    self.eval(e2, env)
                }
            }
            ExprKind::Call(fname, args) => self.eval_call(e, fname, args, env),
            ExprKind::Quantifier(q, x, body) => self.eval_quantifier(*q, x, body, env),
        }
    }

    fn eval_binary(
        &mut self,
        e: &Expr,
        op: BinOp,
        a: &Expr,
        b: &Expr,
        env: Option<&HashMap<String, Value>>,
    ) -> EResult<Value> {
        // short-circuit forms first
        match op {
            BinOp::And => {
                let va = Self::as_bool(&self.eval(a, env)?);
                if !va {
                    return Ok(Value::Bool(false));
                }
                return self.eval(b, env);
            }
            BinOp::Or => {
                let va = Self::as_bool(&self.eval(a, env)?);
                if va {
                    return Ok(Value::Bool(true));
                }
                return self.eval(b, env);
            }
            BinOp::Implies => {
                let va = Self::as_bool(&self.eval(a, env)?);
                if !va {
                    return Ok(Value::Bool(true));
                }
                return self.eval(b, env);
            }
            _ => {}
        }
        let va = self.eval(a, env)?;
        let vb = self.eval(b, env)?;
        Ok(match op {
            BinOp::Add => Value::Int(Self::as_int(&va) + Self::as_int(&vb)),
            BinOp::Sub => Value::Int(Self::as_int(&va) - Self::as_int(&vb)),
            BinOp::Mul => Value::Int(Self::as_int(&va) * Self::as_int(&vb)),
            BinOp::Div | BinOp::Mod => {
                let x = Self::as_int(&va);
                let d = Self::as_int(&vb);
                if d.is_zero() {
                    if self.is_target(ObligationKind::DivByZero, &e.span) {
                        return self.confirmed(ObligationKind::DivByZero, &e.span);
                    }
                    return stop(ReplayOutcome::NotReproduced {
                        detail: "division by zero outside the target obligation".into(),
                    });
                }
                // Euclidean: remainder is non-negative
                let r = x.mod_floor(&d.abs());
                let q = (&x - &r) / &d;
                if op == BinOp::Div {
                    Value::Int(q)
                } else {
                    Value::Int(r)
                }
            }
            BinOp::Lt => Value::Bool(Self::as_int(&va) < Self::as_int(&vb)),
            BinOp::Le => Value::Bool(Self::as_int(&va) <= Self::as_int(&vb)),
            BinOp::Gt => Value::Bool(Self::as_int(&va) > Self::as_int(&vb)),
            BinOp::Ge => Value::Bool(Self::as_int(&va) >= Self::as_int(&vb)),
            BinOp::Eq => Value::Bool(va == vb),
            BinOp::Ne => Value::Bool(va != vb),
            BinOp::Iff => Value::Bool(Self::as_bool(&va) == Self::as_bool(&vb)),
            BinOp::And | BinOp::Or | BinOp::Implies => unreachable!("short-circuited above"),
        })
    }

    /// Null/bounds checks at one access site; `index: None` for `.Length`.
    fn check_array_access(
        &mut self,
        span: &Span,
        array: &Value,
        index: Option<&BigInt>,
    ) -> EResult<usize> {
        let id = match array {
            Value::Ref(id) => *id,
            _ => {
                if self.is_target(ObligationKind::NullDeref, span) {
                    return self.confirmed(ObligationKind::NullDeref, span);
                }
                return stop(ReplayOutcome::NotReproduced {
                    detail: "null dereference outside the target obligation".into(),
                });
            }
        };
        if let Some(i) = index {
            let len = BigInt::from(self.store[id].cells.len());
            if i < &BigInt::zero() || i >= &len {
                if self.is_target(ObligationKind::IndexInBounds, span) {
                    return self.confirmed(ObligationKind::IndexInBounds, span);
                }
                return stop(ReplayOutcome::NotReproduced {
                    detail: "index out of bounds outside the target obligation".into(),
                });
            }
        }
        Ok(id)
    }

    fn eval_call(
        &mut self,
        e: &Expr,
        fname: &str,
        args: &[Expr],
        env: Option<&HashMap<String, Value>>,
    ) -> EResult<Value> {
        let fd = self
            .tp
            .program
            .function(fname)
            .expect("checked program: expression call is a function")
            .clone();
        let mut vals = Vec::new();
        for (p, a) in fd.ins.iter().zip(args.iter()) {
            let v = self.eval(a, env)?;
            // nat-position check
            let mut sink = Vec::new();
            let pt = crate::typecheck::type_of_type_expr(&p.ty, &mut sink);
            if pt == Type::Nat {
                if let Value::Int(n) = &v {
                    if n.is_negative() && self.is_target(ObligationKind::NatNonNegative, &a.span) {
                        return self.confirmed(ObligationKind::NatNonNegative, &a.span);
                    }
                }
            }
            vals.push(v);
        }
        let mut fenv: HashMap<String, Value> = HashMap::new();
        for (p, v) in fd.ins.iter().zip(vals) {
            fenv.insert(p.name.clone(), v);
        }
        // preconditions of the callee, evaluated in its own frame, but only
        // when this call site is the target obligation
        let check_pre = self.is_target(ObligationKind::PreconditionAtCall, &e.span);
        let prev = std::mem::replace(&mut self.decl, fd.name.clone());
        let result = (|| {
            if check_pre {
                for r in &fd.requires {
                    let r = ast::desugar_chains(r);
                    let holds = Self::as_bool(&self.eval(&r, Some(&fenv))?);
                    if !holds {
                        return self.confirmed(ObligationKind::PreconditionAtCall, &e.span);
                    }
                }
            }
            let body = ast::desugar_chains(&fd.body);
            self.eval(&body, Some(&fenv))
        })();
        self.decl = prev;
        result
    }

    fn eval_quantifier(
        &mut self,
        q: QuantKind,
        x: &str,
        body: &Expr,
        env: Option<&HashMap<String, Value>>,
    ) -> EResult<Value> {
        // candidate range: array index spaces plus model-derived values
        let mut candidates: BTreeSet<BigInt> = BTreeSet::new();
        for k in -2..=2 {
            candidates.insert(BigInt::from(k));
        }
        for obj in &self.store {
            let len = obj.cells.len();
            if len <= RANGE_CAP {
                for i in 0..len {
                    candidates.insert(BigInt::from(i));
                }
            }
            candidates.insert(BigInt::from(len));
            candidates.insert(BigInt::from(len) + 1);
        }
        for s in self.model.scalars.values() {
            if let ScalarValue::Int(n) = s {
                if n.abs() <= BigInt::from(RANGE_CAP) {
                    candidates.insert(n.clone());
                    candidates.insert(n + 1);
                    candidates.insert(n - 1);
                }
            }
        }
        for v in self.vars.values() {
            if let Value::Int(n) = v {
                if n.abs() <= BigInt::from(RANGE_CAP) {
                    candidates.insert(n.clone());
                    candidates.insert(n + 1);
                    candidates.insert(n - 1);
                }
            }
        }
        let mut base = env.cloned().unwrap_or_default();
        let mut all = true;
        let mut any = false;
        for c in candidates.into_iter().take(RANGE_CAP) {
            base.insert(x.to_string(), Value::Int(c));
            let v = Self::as_bool(&self.eval(body, Some(&base))?);
            all &= v;
            any |= v;
        }
        base.remove(x);
        Ok(Value::Bool(match q {
            QuantKind::Forall => all,
            QuantKind::Exists => any,
        }))
    }

    // -- statements -------------------------------------------------------

    fn nat_store_check(&mut self, slot: Type, value: &Value, span: &Span) -> EResult<()> {
        if slot == Type::Nat {
            if let Value::Int(n) = value {
                if n.is_negative() && self.is_target(ObligationKind::NatNonNegative, span) {
                    return self.confirmed(ObligationKind::NatNonNegative, span);
                }
            }
        }
        Ok(())
    }

    /// Evaluate invariants at a loop point, checking the embedded safety
    /// obligations and, when `check` names the target kind, the truth of the
    /// invariant itself. An invariant that cannot decide the target is
    /// skipped: specification expressions are not part of concrete
    /// execution, so an unrelated failing spec must not mask the target.
    fn eval_invariants(
        &mut self,
        invariants: &[Expr],
        check: Option<ObligationKind>,
    ) -> EResult<()> {
        for inv in invariants {
            if !self.targets_spec(&inv.span) {
                continue;
            }
            let holds = Self::as_bool(&self.eval(inv, None)?);
            if let Some(kind) = check {
                if !holds && self.is_target(kind, &inv.span) {
                    return self.confirmed(kind, &inv.span);
                }
            }
        }
        Ok(())
    }

    fn exec_block(&mut self, block: &Block) -> EResult<bool> {
        for s in &block.stmts {
            if self.exec_stmt(s)? {
                return Ok(true); // break propagates
            }
        }
        Ok(false)
    }

    /// Returns `true` when a `break` unwinds to the enclosing loop.
    fn exec_stmt(&mut self, stmt: &Stmt) -> EResult<bool> {
        self.tick()?;
        match &stmt.kind {
            StmtKind::VarDecl { name, init, .. } => {
                let ty = self.var_type(name);
                let v = match init {
                    Some(e) => {
                        let v = self.eval(e, None)?;
                        self.nat_store_check(ty, &v, &stmt.span)?;
                        v
                    }
                    None => match self.model_value(name, ty) {
                        Some(v) => v,
                        None => self.default_value(ty),
                    },
                };
                self.vars.insert(name.clone(), v);
                Ok(false)
            }
            StmtKind::Assign { lhs, rhs } => {
                let v = self.eval(rhs, None)?;
                match lhs {
                    Lhs::Var { name, .. } => {
                        self.nat_store_check(self.var_type(name), &v, &stmt.span)?;
                        self.vars.insert(name.clone(), v);
                    }
                    Lhs::Index {
                        array,
                        array_span,
                        index,
                    } => {
                        let span = array_span.merge(&index.span);
                        let av = match self.vars.get(array) {
                            Some(v) => v.clone(),
                            None => Value::Null,
                        };
                        let iv = Self::as_int(&self.eval(index, None)?);
                        let id = self.check_array_access(&span, &av, Some(&iv))?;
                        let i = iv.to_usize().unwrap();
                        self.store[id].cells[i] = v;
                    }
                }
                Ok(false)
            }
            StmtKind::Call { lhss, method, args } => {
                self.exec_call(stmt, lhss, method, args)?;
                Ok(false)
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                if Self::as_bool(&self.eval(cond, None)?) {
                    self.exec_block(then_block)
                } else if let Some(b) = else_block {
                    self.exec_block(b)
                } else {
                    Ok(false)
                }
            }
            StmtKind::While {
                guard,
                invariants,
                decreases,
                body,
            } => {
                self.exec_while(stmt, guard, invariants, decreases.as_ref(), body)?;
                Ok(false)
            }
            StmtKind::Assert(e) => {
                if self.targets_spec(&stmt.span) {
                    let holds = Self::as_bool(&self.eval(e, None)?);
                    if !holds && self.is_target(ObligationKind::AssertStmt, &stmt.span) {
                        return self.confirmed(ObligationKind::AssertStmt, &stmt.span);
                    }
                }
                Ok(false)
            }
            StmtKind::Break => Ok(true),
        }
    }

    fn exec_while(
        &mut self,
        stmt: &Stmt,
        guard: &Expr,
        invariants: &[Expr],
        decreases: Option<&Expr>,
        body: &Block,
    ) -> EResult<()> {
        // entry check in the concrete pre-state
        self.eval_invariants(invariants, Some(ObligationKind::LoopInvEntry))?;

        // inject the model's havoc values for this cut, when present
        if let Some(vars) = self.loop_havocs.get(&stmt.span).cloned() {
            let mut injected = false;
            for (var, fresh) in &vars {
                let ty = self.var_type(var);
                if let Some(v) = self.model_value(fresh, ty) {
                    self.vars.insert(var.clone(), v);
                    injected = true;
                }
            }
            if injected {
                // the arbitrary-iteration state: invariants are evaluated for
                // their embedded safety obligations only
                self.eval_invariants(invariants, None)?;
            }
        }

        let measure: Option<Expr> = decreases
            .cloned()
            .or_else(|| crate::ir::guess_decreases(guard))
            .filter(|d| self.targets_spec(&d.span));

        loop {
            self.tick()?;
            if !Self::as_bool(&self.eval(guard, None)?) {
                break;
            }
            let d0 = match &measure {
                Some(d) => {
                    let v = Self::as_int(&self.eval(d, None)?);
                    if v.is_negative() && self.is_target(ObligationKind::TerminationBounded, &d.span)
                    {
                        return self.confirmed(ObligationKind::TerminationBounded, &d.span);
                    }
                    Some(v)
                }
                None => None,
            };
            let broke = self.exec_block(body)?;
            if broke {
                return Ok(());
            }
            self.eval_invariants(invariants, Some(ObligationKind::LoopInvMaintained))?;
            if let (Some(d), Some(d0)) = (&measure, d0) {
                let d1 = Self::as_int(&self.eval(d, None)?);
                if d1 >= d0 && self.is_target(ObligationKind::TerminationDecreases, &d.span) {
                    return self.confirmed(ObligationKind::TerminationDecreases, &d.span);
                }
            }
        }
        Ok(())
    }

    fn exec_call(
        &mut self,
        stmt: &Stmt,
        lhss: &[(String, Span)],
        method: &str,
        args: &[Expr],
    ) -> EResult<()> {
        let callee = self
            .tp
            .program
            .method(method)
            .expect("checked program")
            .clone();
        let mut vals = Vec::new();
        for (p, a) in callee.ins.iter().zip(args.iter()) {
            let v = self.eval(a, None)?;
            let mut sink = Vec::new();
            let pt = crate::typecheck::type_of_type_expr(&p.ty, &mut sink);
            if pt == Type::Nat {
                if let Value::Int(n) = &v {
                    if n.is_negative() && self.is_target(ObligationKind::NatNonNegative, &a.span) {
                        return self.confirmed(ObligationKind::NatNonNegative, &a.span);
                    }
                }
            }
            vals.push(v);
        }
        // callee preconditions under the argument binding
        let mut cenv: HashMap<String, Value> = HashMap::new();
        for (p, v) in callee.ins.iter().zip(vals.iter()) {
            cenv.insert(p.name.clone(), v.clone());
        }
        if self.is_target(ObligationKind::PreconditionAtCall, &stmt.span) {
            let prev = std::mem::replace(&mut self.decl, callee.name.clone());
            let r = (|| {
                for r in &callee.requires {
                    let r = ast::desugar_chains(r);
                    let holds = Self::as_bool(&self.eval(&r, Some(&cenv))?);
                    if !holds {
                        return self.confirmed(ObligationKind::PreconditionAtCall, &stmt.span);
                    }
                }
                Ok(())
            })();
            self.decl = prev;
            r?;
        }

        // modular step: inject out values from the model when present
        let injected = self
            .call_havocs
            .get(&stmt.span)
            .cloned()
            .map(|outs| {
                let mut all = true;
                let mut values = Vec::new();
                for (lhs, fresh) in &outs {
                    let ty = self.var_type(lhs);
                    match self.model_value(fresh, ty) {
                        Some(v) => values.push((lhs.clone(), v)),
                        None => {
                            all = false;
                            break;
                        }
                    }
                }
                (all, values)
            })
            .filter(|(all, _)| *all && !lhss.is_empty());
        if let Some((_, values)) = injected {
            for (lhs, v) in values {
                self.nat_store_check(self.var_type(&lhs), &v, &stmt.span)?;
                self.vars.insert(lhs, v);
            }
            return Ok(());
        }

        // otherwise run the callee concretely in its own frame
        let saved_vars = std::mem::take(&mut self.vars);
        let saved_decl = std::mem::replace(&mut self.decl, callee.name.clone());
        for (p, v) in callee.ins.iter().zip(vals) {
            self.vars.insert(p.name.clone(), v);
        }
        for p in &callee.outs {
            let mut sink = Vec::new();
            let ty = crate::typecheck::type_of_type_expr(&p.ty, &mut sink);
            let v = self.default_value(ty);
            self.vars.insert(p.name.clone(), v);
        }
        let body = crate::ir::desugar_method(&callee).body;
        let result = self.exec_block(&body);
        let out_vals: Vec<Value> = callee
            .outs
            .iter()
            .map(|p| self.vars.get(&p.name).cloned().unwrap_or(Value::Null))
            .collect();
        self.vars = saved_vars;
        self.decl = saved_decl;
        result?;
        for ((lhs, _), v) in lhss.iter().zip(out_vals) {
            self.vars.insert(lhs.clone(), v);
        }
        Ok(())
    }
}

/// Replay `vc` (belonging to method or function `unit`) under `model`.
/// `graph` supplies the havoc symbol names of the method's loop cuts and
/// call sites.
pub fn replay(
    tp: &TypedProgram,
    unit: &str,
    graph: Option<&GuardedCommandGraph>,
    model: &Model,
    vc: &VerificationCondition,
) -> ReplayOutcome {
    let mut interp = Interp {
        tp,
        decl: unit.to_string(),
        model,
        target_kind: vc.kind,
        target_span: vc.span.clone(),
        steps: 0,
        store: Vec::new(),
        vars: HashMap::new(),
        loop_havocs: HashMap::new(),
        call_havocs: HashMap::new(),
    };
    if let Some(g) = graph {
        for lh in &g.loop_havocs {
            interp
                .loop_havocs
                .insert(lh.span.clone(), lh.vars.clone());
        }
        for ch in &g.call_havocs {
            interp
                .call_havocs
                .insert(ch.span.clone(), ch.outs.clone());
        }
    }

    let mut run = || -> EResult<()> {
        if let Some(m) = tp.program.method(unit) {
            let m = crate::ir::desugar_method(m);
            // in-parameters must come from the model
            for p in &m.ins {
                let mut sink = Vec::new();
                let ty = crate::typecheck::type_of_type_expr(&p.ty, &mut sink);
                match interp.model_value(&p.name, ty) {
                    Some(v) => {
                        interp.vars.insert(p.name.clone(), v);
                    }
                    None => {
                        return stop(ReplayOutcome::NotReproduced {
                            detail: "incomplete model".into(),
                        })
                    }
                }
            }
            for p in &m.outs {
                let mut sink = Vec::new();
                let ty = crate::typecheck::type_of_type_expr(&p.ty, &mut sink);
                let v = interp
                    .model_value(&p.name, ty)
                    .unwrap_or_else(|| interp.default_value(ty));
                interp.vars.insert(p.name.clone(), v);
            }
            // requires are assumed; evaluate one only when it contains the
            // target obligation
            for r in &m.requires {
                if interp.targets_spec(&r.span) {
                    let _ = interp.eval(r, None)?;
                }
            }
            interp.exec_block(&m.body)?;
            for e in &m.ensures {
                if !interp.targets_spec(&e.span) {
                    continue;
                }
                let holds = Interp::as_bool(&interp.eval(e, None)?);
                if !holds && interp.is_target(ObligationKind::Postcondition, &e.span) {
                    return interp.confirmed(ObligationKind::Postcondition, &e.span);
                }
            }
            Ok(())
        } else if let Some(f) = tp.program.function(unit) {
            let f = f.clone();
            for p in &f.ins {
                let mut sink = Vec::new();
                let ty = crate::typecheck::type_of_type_expr(&p.ty, &mut sink);
                match interp.model_value(&p.name, ty) {
                    Some(v) => {
                        interp.vars.insert(p.name.clone(), v);
                    }
                    None => {
                        return stop(ReplayOutcome::NotReproduced {
                            detail: "incomplete model".into(),
                        })
                    }
                }
            }
            for r in &f.requires {
                if !interp.targets_spec(&r.span) {
                    continue;
                }
                let r = ast::desugar_chains(r);
                let _ = interp.eval(&r, None)?;
            }
            let body = ast::desugar_chains(&f.body);
            let result = interp.eval(&body, None)?;
            let mut sink = Vec::new();
            if crate::typecheck::type_of_type_expr(&f.return_type, &mut sink) == Type::Nat {
                if let Value::Int(n) = &result {
                    if n.is_negative()
                        && interp.is_target(ObligationKind::NatNonNegative, &f.body.span)
                    {
                        return interp.confirmed(ObligationKind::NatNonNegative, &f.body.span);
                    }
                }
            }
            for e in &f.ensures {
                if !interp.targets_spec(&e.span) {
                    continue;
                }
                let e = ast::desugar_chains(e);
                let holds = Interp::as_bool(&interp.eval(&e, None)?);
                if !holds && interp.is_target(ObligationKind::Postcondition, &e.span) {
                    return interp.confirmed(ObligationKind::Postcondition, &e.span);
                }
            }
            Ok(())
        } else {
            stop(ReplayOutcome::NotReproduced {
                detail: format!("no declaration named '{unit}'"),
            })
        }
    };

    match run() {
        Ok(()) => ReplayOutcome::NotReproduced {
            detail: "obligation held during replay".into(),
        },
        Err(Stop::Outcome(o)) => o,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;
    use crate::prover::{ProverConfig, Verdict};
    use crate::typecheck::resolve_and_check;
    use crate::vcgen;

    fn pipeline(src: &str) -> (TypedProgram, vcgen::VcGenOutput) {
        let tp = resolve_and_check(&parse("t.mdfy", src).unwrap()).unwrap();
        let out = vcgen::generate(&tp);
        (tp, out)
    }

    #[test]
    fn fee_counterexample_confirms_postcondition() {
        let src = "method CalculateEdiCastleVisitFee(numAdults: nat, numChildren: int) returns (totalFee: int)\n\
             requires numAdults >= 1;\n\
             ensures totalFee > 0;\n\
           {\n\
             var adultFee: int := 10;\n\
             var childFee: int := 6;\n\
             totalFee := numAdults * adultFee + numChildren * childFee;\n\
           }";
        let (tp, out) = pipeline(src);
        let unit = &out.units[0];
        let vc = unit
            .vcs
            .iter()
            .find(|v| v.kind == ObligationKind::Postcondition)
            .unwrap();
        let verdict = crate::prover::prove(&tp, vc, &ProverConfig::default());
        let Verdict::Counterexample(model) = verdict else {
            panic!("expected counterexample, got {verdict:?}");
        };
        let outcome = replay(&tp, &unit.name, unit.graph.as_ref(), &model, vc);
        assert!(outcome.confirmed(), "{outcome:?}");
    }

    #[test]
    fn proved_vc_never_confirms() {
        let src = "method AssignAudioGuides(numPeople: nat, numAvailableGuides: nat) returns (remainingGuides: nat)\n\
             requires numAvailableGuides >= numPeople;\n\
           {\n\
             var numAssignedGuides := 0;\n\
             while (numAssignedGuides < numPeople)\n\
               invariant numAssignedGuides <= numPeople;\n\
             {\n\
               numAssignedGuides := numAssignedGuides + 1;\n\
             }\n\
             assert numAssignedGuides == numPeople;\n\
             remainingGuides := numAvailableGuides - numAssignedGuides;\n\
           }";
        let (tp, out) = pipeline(src);
        let unit = &out.units[0];
        // negative control: a model meeting the precondition on a proved VC
        let mut model = Model::default();
        model
            .scalars
            .insert("numPeople".into(), ScalarValue::Int(BigInt::from(3)));
        model
            .scalars
            .insert("numAvailableGuides".into(), ScalarValue::Int(BigInt::from(5)));
        for vc in &unit.vcs {
            let outcome = replay(&tp, &unit.name, unit.graph.as_ref(), &model, vc);
            assert!(
                !outcome.confirmed(),
                "proved VC {} confirmed under benign model: {outcome:?}",
                vc.id
            );
        }
    }

    #[test]
    fn empty_body_false_postcondition_confirms() {
        let src = "method M() ensures false; { }";
        let (tp, out) = pipeline(src);
        let unit = &out.units[0];
        let vc = &unit.vcs[0];
        let outcome = replay(&tp, &unit.name, unit.graph.as_ref(), &Model::default(), vc);
        assert!(matches!(
            outcome,
            ReplayOutcome::Confirmed {
                kind: ObligationKind::Postcondition,
                ..
            }
        ));
    }

    #[test]
    fn loop_havoc_injection_confirms_weak_invariant() {
        // no invariant: the post-loop assert's counterexample relies on the
        // havocked loop state, which replay injects from the model
        let src = "method M(numPeople: nat) {\n\
             var numAssignedGuides := 0;\n\
             while (numAssignedGuides < numPeople)\n\
             {\n\
               numAssignedGuides := numAssignedGuides + 1;\n\
             }\n\
             assert numAssignedGuides == numPeople;\n\
           }";
        let (tp, out) = pipeline(src);
        let unit = &out.units[0];
        let vc = unit
            .vcs
            .iter()
            .find(|v| v.kind == ObligationKind::AssertStmt)
            .unwrap();
        let verdict = crate::prover::prove(&tp, vc, &ProverConfig::default());
        let Verdict::Counterexample(model) = verdict else {
            panic!("expected counterexample, got {verdict:?}");
        };
        let outcome = replay(&tp, &unit.name, unit.graph.as_ref(), &model, vc);
        assert!(outcome.confirmed(), "{outcome:?}");
    }
}
