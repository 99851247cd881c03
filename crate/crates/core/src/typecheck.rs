//! Name resolution and type checking.
//!
//! `nat` is a refinement of `int`: assigning an `int`-typed value into a
//! `nat` slot is type-legal here and generates a `NatNonNegative` proof
//! obligation downstream in vcgen. Array types are reference types admitting
//! `null`. Ghost usage and `reads`/`modifies` frames are checked by separate
//! passes over the resolved program; frame checking is purely syntactic set
//! membership over parameter names.

use crate::ast::*;
use crate::diag::{Code, Diagnostic};
use crate::span::Span;
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElemType {
    Int,
    Bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Type {
    Int,
    Nat,
    Bool,
    Array(ElemType),
    /// The type of the `null` literal before unification with an array type.
    Null,
}

impl Type {
    pub fn is_int_family(&self) -> bool {
        matches!(self, Type::Int | Type::Nat)
    }

    pub fn is_arrayish(&self) -> bool {
        matches!(self, Type::Array(_) | Type::Null)
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Int => write!(f, "int"),
            Type::Nat => write!(f, "nat"),
            Type::Bool => write!(f, "bool"),
            Type::Array(ElemType::Int) => write!(f, "array<int>"),
            Type::Array(ElemType::Bool) => write!(f, "array<bool>"),
            Type::Null => write!(f, "null"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binding {
    InParam,
    OutParam,
    Local,
}

#[derive(Debug, Clone, Copy)]
pub struct VarInfo {
    pub ty: Type,
    pub binding: Binding,
    pub ghost: bool,
}

/// Flat variable scope of one method or function (no shadowing).
#[derive(Debug, Clone, Default)]
pub struct Scope {
    pub vars: BTreeMap<String, VarInfo>,
}

/// The resolved program: every method-call statement is in normalized
/// `StmtKind::Call` form, and per-declaration scopes record each variable's
/// type and binding.
#[derive(Debug, Clone)]
pub struct TypedProgram {
    pub program: Program,
    pub scopes: BTreeMap<String, Scope>,
    pub warnings: Vec<Diagnostic>,
}

pub fn type_of_type_expr(t: &TypeExpr, diags: &mut Vec<Diagnostic>) -> Type {
    match &t.kind {
        TypeExprKind::Int => Type::Int,
        TypeExprKind::Nat => Type::Nat,
        TypeExprKind::Bool => Type::Bool,
        TypeExprKind::Array(elem) => match elem.kind {
            TypeExprKind::Int => Type::Array(ElemType::Int),
            TypeExprKind::Bool => Type::Array(ElemType::Bool),
            _ => {
                diags.push(Diagnostic::error(
                    elem.span.clone(),
                    Code::TypeMismatch,
                    "array element type must be int or bool",
                ));
                Type::Array(ElemType::Int)
            }
        },
    }
}

/// Can a value of type `source` be stored into a slot of type `target`?
/// `Nat ← Int` answers yes; the proof obligation is vcgen's job.
fn assignable(target: Type, source: Type) -> bool {
    match (target, source) {
        (a, b) if a == b => true,
        (Type::Int, Type::Nat) | (Type::Nat, Type::Int) => true,
        (Type::Array(_), Type::Null) => true,
        _ => false,
    }
}

struct Checker<'p> {
    program: &'p Program,
    diags: Vec<Diagnostic>,
    warnings: Vec<Diagnostic>,
}

impl<'p> Checker<'p> {
    fn error(&mut self, span: &Span, code: Code, msg: impl Into<String>) {
        self.diags.push(Diagnostic::error(span.clone(), code, msg));
    }

    fn decl_named(&self, name: &str) -> Option<&'p Decl> {
        self.program.decls().find(|d| d.name() == name)
    }

    /// Type an expression, reporting mismatches. Returns a best-effort type
    /// so checking can continue after an error.
    fn expr_type(&mut self, e: &Expr, scope: &Scope, bound: &mut Vec<String>) -> Type {
        match &e.kind {
            ExprKind::IntLit(_) => Type::Nat,
            ExprKind::BoolLit(_) => Type::Bool,
            ExprKind::NullLit => Type::Null,
            ExprKind::Var(x) => {
                if bound.iter().any(|b| b == x) {
                    return Type::Int;
                }
                match scope.vars.get(x) {
                    Some(v) => v.ty,
                    None => {
                        self.error(
                            &e.span,
                            Code::UnknownIdentifier,
                            format!("unknown identifier '{x}'"),
                        );
                        Type::Int
                    }
                }
            }
            ExprKind::Binary(op, a, b) => {
                let ta = self.expr_type(a, scope, bound);
                let tb = self.expr_type(b, scope, bound);
                match op {
                    BinOp::Add | BinOp::Mul | BinOp::Div | BinOp::Mod => {
                        self.require_int(&a.span, ta);
                        self.require_int(&b.span, tb);
                        if ta == Type::Nat && tb == Type::Nat {
                            Type::Nat
                        } else {
                            Type::Int
                        }
                    }
                    BinOp::Sub => {
                        self.require_int(&a.span, ta);
                        self.require_int(&b.span, tb);
                        Type::Int
                    }
                    BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                        self.require_int(&a.span, ta);
                        self.require_int(&b.span, tb);
                        Type::Bool
                    }
                    BinOp::Eq | BinOp::Ne => {
                        let ok = (ta.is_int_family() && tb.is_int_family())
                            || (ta == Type::Bool && tb == Type::Bool)
                            || (ta.is_arrayish() && tb.is_arrayish());
                        if !ok {
                            self.error(
                                &e.span,
                                Code::TypeMismatch,
                                format!("cannot compare {ta} with {tb}"),
                            );
                        }
                        Type::Bool
                    }
                    BinOp::And | BinOp::Or | BinOp::Implies | BinOp::Iff => {
                        self.require_bool(&a.span, ta);
                        self.require_bool(&b.span, tb);
                        Type::Bool
                    }
                }
            }
            ExprKind::Unary(op, a) => {
                let ta = self.expr_type(a, scope, bound);
                match op {
                    UnOp::Not => {
                        self.require_bool(&a.span, ta);
                        Type::Bool
                    }
                    UnOp::Neg => {
                        self.require_int(&a.span, ta);
                        Type::Int
                    }
                }
            }
            ExprKind::Chain(operands, _) => {
                for o in operands {
                    let t = self.expr_type(o, scope, bound);
                    self.require_int(&o.span, t);
                }
                Type::Bool
            }
            ExprKind::Select(a, i) => {
                let ta = self.expr_type(a, scope, bound);
                let ti = self.expr_type(i, scope, bound);
                self.require_int(&i.span, ti);
                match ta {
                    Type::Array(ElemType::Int) => Type::Int,
                    Type::Array(ElemType::Bool) => Type::Bool,
                    _ => {
                        self.error(
                            &a.span,
                            Code::TypeMismatch,
                            format!("cannot index a value of type {ta}"),
                        );
                        Type::Int
                    }
                }
            }
            ExprKind::Length(a) => {
                let ta = self.expr_type(a, scope, bound);
                if !matches!(ta, Type::Array(_)) {
                    self.error(
                        &a.span,
                        Code::TypeMismatch,
                        format!(".Length requires an array, found {ta}"),
                    );
                }
                Type::Nat
            }
            ExprKind::Ite(c, t, e2) => {
                let tc = self.expr_type(c, scope, bound);
                self.require_bool(&c.span, tc);
                let tt = self.expr_type(t, scope, bound);
                let te = self.expr_type(e2, scope, bound);
                self.join(&e.span, tt, te)
            }
            ExprKind::Call(f, args) => {
                let decl = self.decl_named(f);
                match decl {
                    Some(Decl::Function(fd)) => {
                        let fd = fd.clone();
                        self.check_args(&e.span, f, &fd.ins, args, scope, bound);
                        let mut sink = Vec::new();
                        type_of_type_expr(&fd.return_type, &mut sink)
                    }
                    Some(Decl::Method(_)) => {
                        self.error(
                            &e.span,
                            Code::MethodInExpr,
                            format!("cannot call method '{f}' inside an expression"),
                        );
                        Type::Int
                    }
                    None => {
                        self.error(
                            &e.span,
                            Code::UnknownIdentifier,
                            format!("unknown function '{f}'"),
                        );
                        Type::Int
                    }
                }
            }
            ExprKind::Quantifier(_, x, body) => {
                if scope.vars.contains_key(x) || bound.iter().any(|b| b == x) {
                    self.error(
                        &e.span,
                        Code::DuplicateName,
                        format!("bound variable '{x}' shadows an existing name"),
                    );
                }
                bound.push(x.clone());
                let tb = self.expr_type(body, scope, bound);
                bound.pop();
                self.require_bool(&body.span, tb);
                Type::Bool
            }
        }
    }

    fn join(&mut self, span: &Span, a: Type, b: Type) -> Type {
        match (a, b) {
            (x, y) if x == y => x,
            (Type::Int, Type::Nat) | (Type::Nat, Type::Int) => Type::Int,
            (Type::Array(e), Type::Null) | (Type::Null, Type::Array(e)) => Type::Array(e),
            _ => {
                self.error(
                    span,
                    Code::TypeMismatch,
                    format!("branches have incompatible types {a} and {b}"),
                );
                a
            }
        }
    }

    fn require_int(&mut self, span: &Span, t: Type) {
        if !t.is_int_family() {
            self.error(span, Code::TypeMismatch, format!("expected int, found {t}"));
        }
    }

    fn require_bool(&mut self, span: &Span, t: Type) {
        if t != Type::Bool {
            self.error(span, Code::TypeMismatch, format!("expected bool, found {t}"));
        }
    }

    fn check_args(
        &mut self,
        span: &Span,
        callee: &str,
        params: &[Param],
        args: &[Expr],
        scope: &Scope,
        bound: &mut Vec<String>,
    ) {
        if params.len() != args.len() {
            self.error(
                span,
                Code::TypeMismatch,
                format!(
                    "'{callee}' expects {} argument(s), found {}",
                    params.len(),
                    args.len()
                ),
            );
        }
        for (p, a) in params.iter().zip(args.iter()) {
            let ta = self.expr_type(a, scope, bound);
            let mut sink = Vec::new();
            let tp = type_of_type_expr(&p.ty, &mut sink);
            if !assignable(tp, ta) {
                self.error(
                    &a.span,
                    Code::TypeMismatch,
                    format!("argument for '{}' expects {tp}, found {ta}", p.name),
                );
            }
        }
    }

    fn bool_clause(&mut self, e: &Expr, scope: &Scope) {
        let t = self.expr_type(e, scope, &mut Vec::new());
        self.require_bool(&e.span, t);
    }

    fn add_var(&mut self, scope: &mut Scope, name: &str, span: &Span, info: VarInfo) {
        if scope.vars.contains_key(name) || self.decl_named(name).is_some() {
            self.error(
                span,
                Code::DuplicateName,
                format!("duplicate declaration of '{name}'"),
            );
        }
        scope.vars.insert(name.to_string(), info);
    }

    fn resolve_frame_list(
        &mut self,
        list: &[(String, Span)],
        scope: &Scope,
        what: &str,
    ) {
        for (name, span) in list {
            match scope.vars.get(name) {
                Some(v) if matches!(v.ty, Type::Array(_)) => {}
                Some(v) => self.error(
                    span,
                    Code::TypeMismatch,
                    format!("{what} clause entry '{name}' must be an array, found {}", v.ty),
                ),
                None => self.error(
                    span,
                    Code::UnknownIdentifier,
                    format!("unknown identifier '{name}' in {what} clause"),
                ),
            }
        }
    }

    /// Check one statement, extending the scope with declared locals.
    /// Returns the normalized statement(s).
    fn check_stmt(
        &mut self,
        stmt: &Stmt,
        scope: &mut Scope,
        in_loop: bool,
        out: &mut Vec<Stmt>,
    ) {
        match &stmt.kind {
            StmtKind::VarDecl {
                name,
                ty,
                init,
                ghost,
            } => {
                // `var x := M(...)` with a method callee becomes a
                // declaration followed by a normalized call statement.
                if let Some(init_expr) = init {
                    if let ExprKind::Call(callee, args) = &init_expr.kind {
                        if let Some(Decl::Method(md)) = self.decl_named(callee) {
                            let md_name = md.name.clone();
                            let outs: Vec<Param> = md.outs.clone();
                            if outs.len() != 1 {
                                self.error(
                                    &init_expr.span,
                                    Code::TypeMismatch,
                                    format!(
                                        "method '{md_name}' has {} out-parameter(s); exactly one is needed here",
                                        outs.len()
                                    ),
                                );
                                return;
                            }
                            let mut sink = Vec::new();
                            let out_ty = type_of_type_expr(&outs[0].ty, &mut sink);
                            let declared = ty
                                .as_ref()
                                .map(|t| type_of_type_expr(t, &mut self.diags));
                            let var_ty = declared.unwrap_or(out_ty);
                            self.add_var(
                                scope,
                                name,
                                &stmt.span,
                                VarInfo {
                                    ty: var_ty,
                                    binding: Binding::Local,
                                    ghost: *ghost,
                                },
                            );
                            out.push(Stmt {
                                kind: StmtKind::VarDecl {
                                    name: name.clone(),
                                    ty: ty.clone(),
                                    init: None,
                                    ghost: *ghost,
                                },
                                span: stmt.span.clone(),
                            });
                            let call = Stmt {
                                kind: StmtKind::Call {
                                    lhss: vec![(name.clone(), stmt.span.clone())],
                                    method: callee.clone(),
                                    args: args.clone(),
                                },
                                span: stmt.span.clone(),
                            };
                            self.check_call_stmt(&call, scope);
                            out.push(call);
                            return;
                        }
                    }
                }
                let init_ty = init
                    .as_ref()
                    .map(|e| (self.expr_type(e, scope, &mut Vec::new()), e.span.clone()));
                let declared = ty.as_ref().map(|t| type_of_type_expr(t, &mut self.diags));
                let var_ty = match (declared, &init_ty) {
                    (Some(d), Some((i, ispan))) => {
                        if !assignable(d, *i) {
                            self.error(
                                ispan,
                                Code::TypeMismatch,
                                format!("cannot initialize {d} variable with {i} value"),
                            );
                        }
                        d
                    }
                    (Some(d), None) => d,
                    (None, Some((Type::Null, ispan))) => {
                        self.error(
                            ispan,
                            Code::TypeMismatch,
                            "cannot infer a type for 'null'; annotate the variable",
                        );
                        Type::Int
                    }
                    (None, Some((i, _))) => *i,
                    (None, None) => {
                        self.error(
                            &stmt.span,
                            Code::TypeMismatch,
                            format!("variable '{name}' needs a type or an initializer"),
                        );
                        Type::Int
                    }
                };
                self.add_var(
                    scope,
                    name,
                    &stmt.span,
                    VarInfo {
                        ty: var_ty,
                        binding: Binding::Local,
                        ghost: *ghost,
                    },
                );
                out.push(stmt.clone());
            }
            StmtKind::Assign { lhs, rhs } => {
                // `x := M(...)` with a method callee is a call statement
                if let (Lhs::Var { name, span }, ExprKind::Call(callee, args)) =
                    (lhs, &rhs.kind)
                {
                    if matches!(self.decl_named(callee), Some(Decl::Method(_))) {
                        let call = Stmt {
                            kind: StmtKind::Call {
                                lhss: vec![(name.clone(), span.clone())],
                                method: callee.clone(),
                                args: args.clone(),
                            },
                            span: stmt.span.clone(),
                        };
                        self.check_call_stmt(&call, scope);
                        out.push(call);
                        return;
                    }
                }
                let rhs_ty = self.expr_type(rhs, scope, &mut Vec::new());
                match lhs {
                    Lhs::Var { name, span } => match scope.vars.get(name).copied() {
                        Some(v) => {
                            if v.binding == Binding::InParam {
                                self.error(
                                    span,
                                    Code::AssignToInParam,
                                    "cannot assign to input parameter",
                                );
                            }
                            if !assignable(v.ty, rhs_ty) {
                                self.error(
                                    &rhs.span,
                                    Code::TypeMismatch,
                                    format!("cannot assign {rhs_ty} value to {} variable", v.ty),
                                );
                            }
                        }
                        None => self.error(
                            span,
                            Code::UnknownIdentifier,
                            format!("unknown identifier '{name}'"),
                        ),
                    },
                    Lhs::Index {
                        array,
                        array_span,
                        index,
                    } => {
                        let it = self.expr_type(index, scope, &mut Vec::new());
                        self.require_int(&index.span, it);
                        match scope.vars.get(array).copied() {
                            Some(v) => match v.ty {
                                Type::Array(ElemType::Int) => {
                                    if !rhs_ty.is_int_family() {
                                        self.error(
                                            &rhs.span,
                                            Code::TypeMismatch,
                                            format!("expected int element, found {rhs_ty}"),
                                        );
                                    }
                                }
                                Type::Array(ElemType::Bool) => {
                                    if rhs_ty != Type::Bool {
                                        self.error(
                                            &rhs.span,
                                            Code::TypeMismatch,
                                            format!("expected bool element, found {rhs_ty}"),
                                        );
                                    }
                                }
                                other => self.error(
                                    array_span,
                                    Code::TypeMismatch,
                                    format!("cannot index a value of type {other}"),
                                ),
                            },
                            None => self.error(
                                array_span,
                                Code::UnknownIdentifier,
                                format!("unknown identifier '{array}'"),
                            ),
                        }
                    }
                }
                out.push(stmt.clone());
            }
            StmtKind::Call { .. } => {
                self.check_call_stmt(stmt, scope);
                out.push(stmt.clone());
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                let tc = self.expr_type(cond, scope, &mut Vec::new());
                self.require_bool(&cond.span, tc);
                let then_block = self.check_block(then_block, scope, in_loop);
                let else_block = else_block.as_ref().map(|b| self.check_block(b, scope, in_loop));
                out.push(Stmt {
                    kind: StmtKind::If {
                        cond: cond.clone(),
                        then_block,
                        else_block,
                    },
                    span: stmt.span.clone(),
                });
            }
            StmtKind::While {
                guard,
                invariants,
                decreases,
                body,
            } => {
                let tg = self.expr_type(guard, scope, &mut Vec::new());
                self.require_bool(&guard.span, tg);
                for inv in invariants {
                    self.bool_clause(inv, scope);
                }
                if let Some(d) = decreases {
                    let td = self.expr_type(d, scope, &mut Vec::new());
                    self.require_int(&d.span, td);
                }
                let body = self.check_block(body, scope, true);
                out.push(Stmt {
                    kind: StmtKind::While {
                        guard: guard.clone(),
                        invariants: invariants.clone(),
                        decreases: decreases.clone(),
                        body,
                    },
                    span: stmt.span.clone(),
                });
            }
            StmtKind::Assert(e) => {
                self.bool_clause(e, scope);
                out.push(stmt.clone());
            }
            StmtKind::Break => {
                if !in_loop {
                    self.error(&stmt.span, Code::Syntax, "break outside of a loop");
                }
                out.push(stmt.clone());
            }
        }
    }

    fn check_call_stmt(&mut self, stmt: &Stmt, scope: &Scope) {
        let StmtKind::Call { lhss, method, args } = &stmt.kind else {
            unreachable!();
        };
        let md = match self.decl_named(method) {
            Some(Decl::Method(md)) => md.clone(),
            Some(Decl::Function(_)) => {
                self.error(
                    &stmt.span,
                    Code::TypeMismatch,
                    format!("'{method}' is a function; only methods can be called as statements"),
                );
                return;
            }
            None => {
                self.error(
                    &stmt.span,
                    Code::UnknownIdentifier,
                    format!("unknown method '{method}'"),
                );
                return;
            }
        };
        self.check_args(&stmt.span, method, &md.ins, args, scope, &mut Vec::new());
        if lhss.len() != md.outs.len() {
            self.error(
                &stmt.span,
                Code::TypeMismatch,
                format!(
                    "method '{method}' returns {} value(s), found {} target(s)",
                    md.outs.len(),
                    lhss.len()
                ),
            );
            return;
        }
        for ((lhs, lspan), out_param) in lhss.iter().zip(md.outs.iter()) {
            match scope.vars.get(lhs).copied() {
                Some(v) => {
                    if v.binding == Binding::InParam {
                        self.error(lspan, Code::AssignToInParam, "cannot assign to input parameter");
                    }
                    if v.ghost {
                        self.error(
                            lspan,
                            Code::GhostInCompiled,
                            format!("a method call cannot target ghost variable '{lhs}'"),
                        );
                    }
                    let mut sink = Vec::new();
                    let ot = type_of_type_expr(&out_param.ty, &mut sink);
                    if !assignable(v.ty, ot) {
                        self.error(
                            lspan,
                            Code::TypeMismatch,
                            format!("cannot assign {ot} result to {} variable", v.ty),
                        );
                    }
                }
                None => self.error(
                    lspan,
                    Code::UnknownIdentifier,
                    format!("unknown identifier '{lhs}'"),
                ),
            }
        }
    }

    fn check_block(&mut self, block: &Block, scope: &mut Scope, in_loop: bool) -> Block {
        let mut stmts = Vec::new();
        for s in &block.stmts {
            self.check_stmt(s, scope, in_loop, &mut stmts);
        }
        Block {
            stmts,
            span: block.span.clone(),
        }
    }

    fn check_method(&mut self, m: &MethodDecl) -> (MethodDecl, Scope) {
        let mut scope = Scope::default();
        for p in &m.ins {
            let ty = type_of_type_expr(&p.ty, &mut self.diags);
            self.add_var(
                &mut scope,
                &p.name,
                &p.span,
                VarInfo {
                    ty,
                    binding: Binding::InParam,
                    ghost: false,
                },
            );
        }
        for p in &m.outs {
            let ty = type_of_type_expr(&p.ty, &mut self.diags);
            self.add_var(
                &mut scope,
                &p.name,
                &p.span,
                VarInfo {
                    ty,
                    binding: Binding::OutParam,
                    ghost: false,
                },
            );
        }
        // requires may mention in-params only; ensures also out-params
        let in_scope = Scope {
            vars: scope
                .vars
                .iter()
                .filter(|(_, v)| v.binding == Binding::InParam)
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        };
        for r in &m.requires {
            self.bool_clause(r, &in_scope);
        }
        for e in &m.ensures {
            self.bool_clause(e, &scope);
        }
        if let Some(d) = &m.decreases {
            let td = self.expr_type(d, &in_scope, &mut Vec::new());
            self.require_int(&d.span, td);
        }
        self.resolve_frame_list(&m.modifies, &in_scope, "modifies");
        if let Some((_, span)) = m.reads.first() {
            self.warnings.push(Diagnostic::warning(
                span.clone(),
                Code::ReadsOnMethod,
                "reads clauses on methods are ignored; methods may read any memory location",
            ));
            self.resolve_frame_list(&m.reads, &in_scope, "reads");
        }
        let body = self.check_block(&m.body, &mut scope, false);
        let mut normalized = m.clone();
        normalized.body = body;
        (normalized, scope)
    }

    fn check_function(&mut self, f: &FunctionDecl) -> (FunctionDecl, Scope) {
        let mut scope = Scope::default();
        for p in &f.ins {
            let ty = type_of_type_expr(&p.ty, &mut self.diags);
            self.add_var(
                &mut scope,
                &p.name,
                &p.span,
                VarInfo {
                    ty,
                    binding: Binding::InParam,
                    ghost: false,
                },
            );
        }
        for r in &f.requires {
            self.bool_clause(r, &scope);
        }
        for e in &f.ensures {
            self.bool_clause(e, &scope);
        }
        if let Some(d) = &f.decreases {
            let td = self.expr_type(d, &scope, &mut Vec::new());
            self.require_int(&d.span, td);
        }
        self.resolve_frame_list(&f.reads, &scope, "reads");
        let ret = type_of_type_expr(&f.return_type, &mut self.diags);
        let bt = self.expr_type(&f.body, &scope, &mut Vec::new());
        if !assignable(ret, bt) {
            self.error(
                &f.body.span,
                Code::TypeMismatch,
                format!("function body has type {bt}, declared {ret}"),
            );
        }
        (f.clone(), scope)
    }
}

/// Resolve names and check types across the whole program. Returns the
/// normalized program with per-declaration scopes, or all diagnostics.
pub fn resolve_and_check(program: &Program) -> Result<TypedProgram, Vec<Diagnostic>> {
    let mut checker = Checker {
        program,
        diags: Vec::new(),
        warnings: Vec::new(),
    };

    // duplicate declaration names: one program-wide namespace
    let mut seen: BTreeMap<&str, &Span> = BTreeMap::new();
    for d in program.decls() {
        if seen.contains_key(d.name()) {
            checker.diags.push(Diagnostic::error(
                d.name_span().clone(),
                Code::DuplicateName,
                format!("duplicate declaration of '{}'", d.name()),
            ));
        } else {
            seen.insert(d.name(), d.name_span());
        }
    }

    let mut scopes = BTreeMap::new();
    let mut items = Vec::new();
    for item in &program.items {
        let check_decl = |checker: &mut Checker, d: &Decl| match d {
            Decl::Method(m) => {
                let (normalized, scope) = checker.check_method(m);
                (Decl::Method(normalized), m.name.clone(), scope)
            }
            Decl::Function(f) => {
                let (normalized, scope) = checker.check_function(f);
                (Decl::Function(normalized), f.name.clone(), scope)
            }
        };
        match item {
            Item::Class(c) => {
                let mut members = Vec::new();
                for d in &c.members {
                    let (nd, name, scope) = check_decl(&mut checker, d);
                    scopes.insert(name, scope);
                    members.push(nd);
                }
                items.push(Item::Class(ClassDecl {
                    name: c.name.clone(),
                    name_span: c.name_span.clone(),
                    members,
                    span: c.span.clone(),
                }));
            }
            Item::Decl(d) => {
                let (nd, name, scope) = check_decl(&mut checker, d);
                scopes.insert(name, scope);
                items.push(Item::Decl(nd));
            }
        }
    }

    if checker.diags.is_empty() {
        Ok(TypedProgram {
            program: Program { items },
            scopes,
            warnings: checker.warnings,
        })
    } else {
        Err(checker.diags)
    }
}

impl TypedProgram {
    pub fn scope(&self, decl: &str) -> &Scope {
        &self.scopes[decl]
    }

    /// Type of a checked expression. Bound quantifier variables are `int`.
    pub fn expr_type(&self, decl: &str, e: &Expr) -> Type {
        self.expr_type_in(&self.scopes[decl], e, &mut Vec::new())
    }

    /// Like [`expr_type`](Self::expr_type) for an expression under already
    /// bound quantifier variables.
    pub fn expr_type_bound(&self, decl: &str, e: &Expr, bound: &[String]) -> Type {
        let mut bound = bound.to_vec();
        self.expr_type_in(&self.scopes[decl], e, &mut bound)
    }

    fn expr_type_in(&self, scope: &Scope, e: &Expr, bound: &mut Vec<String>) -> Type {
        match &e.kind {
            ExprKind::IntLit(_) => Type::Nat,
            ExprKind::BoolLit(_) => Type::Bool,
            ExprKind::NullLit => Type::Null,
            ExprKind::Var(x) => {
                if bound.iter().any(|b| b == x) {
                    Type::Int
                } else {
                    scope.vars[x].ty
                }
            }
            ExprKind::Binary(op, a, b) => match op {
                BinOp::Add | BinOp::Mul | BinOp::Div | BinOp::Mod => {
                    let ta = self.expr_type_in(scope, a, bound);
                    let tb = self.expr_type_in(scope, b, bound);
                    if ta == Type::Nat && tb == Type::Nat {
                        Type::Nat
                    } else {
                        Type::Int
                    }
                }
                BinOp::Sub => Type::Int,
                _ => Type::Bool,
            },
            ExprKind::Unary(UnOp::Not, _) => Type::Bool,
            ExprKind::Unary(UnOp::Neg, _) => Type::Int,
            ExprKind::Chain(..) => Type::Bool,
            ExprKind::Select(a, _) => match self.expr_type_in(scope, a, bound) {
                Type::Array(ElemType::Bool) => Type::Bool,
                _ => Type::Int,
            },
            ExprKind::Length(_) => Type::Nat,
            ExprKind::Ite(_, t, e2) => {
                let tt = self.expr_type_in(scope, t, bound);
                let te = self.expr_type_in(scope, e2, bound);
                match (tt, te) {
                    (x, y) if x == y => x,
                    (Type::Int, Type::Nat) | (Type::Nat, Type::Int) => Type::Int,
                    (Type::Array(el), Type::Null) | (Type::Null, Type::Array(el)) => {
                        Type::Array(el)
                    }
                    (x, _) => x,
                }
            }
            ExprKind::Call(f, _) => {
                let fd = self
                    .program
                    .function(f)
                    .expect("checked program: call resolves to a function");
                let mut sink = Vec::new();
                type_of_type_expr(&fd.return_type, &mut sink)
            }
            ExprKind::Quantifier(_, x, body) => {
                bound.push(x.clone());
                let _ = self.expr_type_in(scope, body, bound);
                bound.pop();
                Type::Bool
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Ghost usage
// ---------------------------------------------------------------------------

/// Positions an expression can occur in, for ghost checking.
#[derive(Clone, Copy, PartialEq)]
enum Position {
    /// requires/ensures/invariant/decreases/assert/quantifier and function bodies
    Spec,
    /// executable statements of a method
    Compiled,
}

fn ghost_walk_expr(
    tp: &TypedProgram,
    scope: &Scope,
    e: &Expr,
    pos: Position,
    diags: &mut Vec<Diagnostic>,
) {
    match &e.kind {
        ExprKind::Var(x) => {
            if pos == Position::Compiled {
                if let Some(v) = scope.vars.get(x) {
                    if v.ghost {
                        diags.push(Diagnostic::error(
                            e.span.clone(),
                            Code::GhostInCompiled,
                            format!("ghost variable '{x}' cannot be used in compiled code"),
                        ));
                    }
                }
            }
        }
        ExprKind::Call(f, args) => {
            if pos == Position::Compiled {
                if let Some(fd) = tp.program.function(f) {
                    if !fd.is_function_method {
                        diags.push(Diagnostic::error(
                            e.span.clone(),
                            Code::GhostInCompiled,
                            format!(
                                "function '{f}' can only be used in specifications; \
                                 declare it 'function method' to call it from compiled code"
                            ),
                        ));
                    }
                }
            }
            for a in args {
                ghost_walk_expr(tp, scope, a, pos, diags);
            }
        }
        ExprKind::Quantifier(_, _, body) => {
            // quantifier bodies are specification positions
            ghost_walk_expr(tp, scope, body, Position::Spec, diags);
        }
        ExprKind::Binary(_, a, b) => {
            ghost_walk_expr(tp, scope, a, pos, diags);
            ghost_walk_expr(tp, scope, b, pos, diags);
        }
        ExprKind::Unary(_, a) => ghost_walk_expr(tp, scope, a, pos, diags),
        ExprKind::Chain(os, _) => {
            for o in os {
                ghost_walk_expr(tp, scope, o, pos, diags);
            }
        }
        ExprKind::Select(a, i) => {
            ghost_walk_expr(tp, scope, a, pos, diags);
            ghost_walk_expr(tp, scope, i, pos, diags);
        }
        ExprKind::Length(a) => ghost_walk_expr(tp, scope, a, pos, diags),
        ExprKind::Ite(c, t, e2) => {
            ghost_walk_expr(tp, scope, c, pos, diags);
            ghost_walk_expr(tp, scope, t, pos, diags);
            ghost_walk_expr(tp, scope, e2, pos, diags);
        }
        _ => {}
    }
}

fn ghost_walk_block(
    tp: &TypedProgram,
    scope: &Scope,
    block: &Block,
    diags: &mut Vec<Diagnostic>,
) {
    for stmt in &block.stmts {
        match &stmt.kind {
            StmtKind::VarDecl { init, ghost, .. } => {
                if let Some(e) = init {
                    let pos = if *ghost {
                        Position::Spec
                    } else {
                        Position::Compiled
                    };
                    ghost_walk_expr(tp, scope, e, pos, diags);
                }
            }
            StmtKind::Assign { lhs, rhs } => {
                let lhs_ghost = match lhs {
                    Lhs::Var { name, .. } => scope.vars.get(name).map(|v| v.ghost).unwrap_or(false),
                    Lhs::Index { array, index, .. } => {
                        ghost_walk_expr(tp, scope, index, Position::Compiled, diags);
                        scope.vars.get(array).map(|v| v.ghost).unwrap_or(false)
                    }
                };
                let pos = if lhs_ghost {
                    Position::Spec
                } else {
                    Position::Compiled
                };
                ghost_walk_expr(tp, scope, rhs, pos, diags);
            }
            StmtKind::Call { args, .. } => {
                for a in args {
                    ghost_walk_expr(tp, scope, a, Position::Compiled, diags);
                }
            }
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                ghost_walk_expr(tp, scope, cond, Position::Compiled, diags);
                ghost_walk_block(tp, scope, then_block, diags);
                if let Some(b) = else_block {
                    ghost_walk_block(tp, scope, b, diags);
                }
            }
            StmtKind::While {
                guard,
                invariants,
                decreases,
                body,
            } => {
                ghost_walk_expr(tp, scope, guard, Position::Compiled, diags);
                for inv in invariants {
                    ghost_walk_expr(tp, scope, inv, Position::Spec, diags);
                }
                if let Some(d) = decreases {
                    ghost_walk_expr(tp, scope, d, Position::Spec, diags);
                }
                ghost_walk_block(tp, scope, body, diags);
            }
            StmtKind::Assert(e) => ghost_walk_expr(tp, scope, e, Position::Spec, diags),
            StmtKind::Break => {}
        }
    }
}

/// Ghost rules: a plain `function` may be called only from specification
/// positions or from other function bodies, and ghost locals may not flow
/// into compiled code. Returns one GHOST_IN_COMPILED diagnostic per
/// violation; empty means the rules hold.
pub fn check_ghost_usage(tp: &TypedProgram) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    for m in tp.program.methods() {
        let scope = tp.scope(&m.name);
        ghost_walk_block(tp, scope, &m.body, &mut diags);
    }
    for f in tp.program.functions() {
        // function bodies are spec positions, except that a compilable
        // `function method` may only call other function methods
        if f.is_function_method {
            let scope = tp.scope(&f.name);
            ghost_walk_expr(tp, scope, &f.body, Position::Compiled, &mut diags);
        }
    }
    crate::diag::sort_diagnostics(&mut diags);
    diags
}

// ---------------------------------------------------------------------------
// Frame checks
// ---------------------------------------------------------------------------

fn reads_walk(
    f: &FunctionDecl,
    scope: &Scope,
    e: &Expr,
    diags: &mut Vec<Diagnostic>,
) {
    let listed = |name: &str| f.reads.iter().any(|(n, _)| n == name);
    match &e.kind {
        ExprKind::Select(a, i) => {
            if let ExprKind::Var(name) = &a.kind {
                if matches!(scope.vars.get(name).map(|v| v.ty), Some(Type::Array(_)))
                    && !listed(name)
                {
                    diags.push(Diagnostic::error(
                        e.span.clone(),
                        Code::ReadsViolation,
                        "insufficient reads clause to read array element",
                    ));
                }
            }
            reads_walk(f, scope, a, diags);
            reads_walk(f, scope, i, diags);
        }
        ExprKind::Length(a) => {
            // .Length reads the array reference's metadata
            if let ExprKind::Var(name) = &a.kind {
                if matches!(scope.vars.get(name).map(|v| v.ty), Some(Type::Array(_)))
                    && !listed(name)
                {
                    diags.push(Diagnostic::error(
                        e.span.clone(),
                        Code::ReadsViolation,
                        "insufficient reads clause to read array element",
                    ));
                }
            }
            reads_walk(f, scope, a, diags);
        }
        ExprKind::Binary(_, a, b) => {
            reads_walk(f, scope, a, diags);
            reads_walk(f, scope, b, diags);
        }
        ExprKind::Unary(_, a) => reads_walk(f, scope, a, diags),
        ExprKind::Chain(os, _) => {
            for o in os {
                reads_walk(f, scope, o, diags);
            }
        }
        ExprKind::Ite(c, t, e2) => {
            reads_walk(f, scope, c, diags);
            reads_walk(f, scope, t, diags);
            reads_walk(f, scope, e2, diags);
        }
        ExprKind::Call(_, args) => {
            for a in args {
                reads_walk(f, scope, a, diags);
            }
        }
        ExprKind::Quantifier(_, _, body) => reads_walk(f, scope, body, diags),
        _ => {}
    }
}

fn modifies_walk_block(
    tp: &TypedProgram,
    m: &MethodDecl,
    block: &Block,
    diags: &mut Vec<Diagnostic>,
) {
    let listed = |name: &str| m.modifies.iter().any(|(n, _)| n == name);
    for stmt in &block.stmts {
        match &stmt.kind {
            StmtKind::Assign {
                lhs: Lhs::Index { array, array_span, .. },
                ..
            } => {
                if !listed(array) {
                    diags.push(Diagnostic::error(
                        array_span.clone(),
                        Code::ModifiesViolation,
                        "insufficient modifies clause to write array element",
                    ));
                }
            }
            StmtKind::Call { method, args, .. } => {
                // the callee's modifies, substituted through arguments, must
                // be a subset of the caller's modifies (syntactic membership)
                if let Some(callee) = tp.program.method(method) {
                    for (cname, _) in &callee.modifies {
                        let Some(idx) = callee.ins.iter().position(|p| &p.name == cname) else {
                            continue;
                        };
                        let Some(arg) = args.get(idx) else { continue };
                        match &arg.kind {
                            ExprKind::Var(aname) if listed(aname) => {}
                            _ => diags.push(Diagnostic::error(
                                arg.span.clone(),
                                Code::CallFrameViolation,
                                format!(
                                    "call may modify '{}', which is not in this method's modifies clause",
                                    crate::ast::expr_to_string(arg)
                                ),
                            )),
                        }
                    }
                }
            }
            StmtKind::If {
                then_block,
                else_block,
                ..
            } => {
                modifies_walk_block(tp, m, then_block, diags);
                if let Some(b) = else_block {
                    modifies_walk_block(tp, m, b, diags);
                }
            }
            StmtKind::While { body, .. } => modifies_walk_block(tp, m, body, diags),
            _ => {}
        }
    }
}

/// Static frame checks: reads membership for every array access in function
/// bodies, modifies membership for array stores, and call-frame subset checks.
pub fn check_frames(tp: &TypedProgram) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    for f in tp.program.functions() {
        let scope = tp.scope(&f.name);
        reads_walk(f, scope, &f.body, &mut diags);
    }
    for m in tp.program.methods() {
        modifies_walk_block(tp, m, &m.body, &mut diags);
    }
    crate::diag::sort_diagnostics(&mut diags);
    diags
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;

    fn check(src: &str) -> Result<TypedProgram, Vec<Diagnostic>> {
        resolve_and_check(&parse("t.mdfy", src).expect("parse"))
    }

    #[test]
    fn literal_infers_nat() {
        let tp = check("method M() { var numAdults := 2; }").unwrap();
        let scope = tp.scope("M");
        assert_eq!(scope.vars["numAdults"].ty, Type::Nat);
    }

    #[test]
    fn negative_literal_infers_int() {
        let tp = check("method M() { var x := -2; }").unwrap();
        assert_eq!(tp.scope("M").vars["x"].ty, Type::Int);
    }

    #[test]
    fn assign_to_in_param_rejected() {
        let err = check("method M(numPeople: nat) { numPeople := 3; }").unwrap_err();
        assert!(err.iter().any(|d| d.code == Code::AssignToInParam
            && d.message == "cannot assign to input parameter"));
    }

    #[test]
    fn comparison_type_mismatch() {
        let err = check("method M(x: int) { assert x < true; }").unwrap_err();
        assert!(err.iter().any(|d| d.code == Code::TypeMismatch));
    }

    #[test]
    fn method_call_in_expression_rejected() {
        let err = check(
            "method N() returns (r: int) { r := 1; }\n\
             method M() { var x := 1 + N(); }",
        )
        .unwrap_err();
        assert!(err.iter().any(|d| d.code == Code::MethodInExpr));
    }

    #[test]
    fn method_call_as_initializer_normalizes() {
        let tp = check(
            "method N() returns (r: int) ensures r > 0; { r := 1; }\n\
             method M() { var x := N(); }",
        )
        .unwrap();
        let m = tp.program.method("M").unwrap();
        assert_eq!(m.body.stmts.len(), 2);
        assert!(matches!(m.body.stmts[1].kind, StmtKind::Call { .. }));
        assert_eq!(tp.scope("M").vars["x"].ty, Type::Int);
    }

    #[test]
    fn ghost_function_in_compiled_code() {
        let tp = check(
            "function F(): int { 1 }\n\
             method M() { var x := F(); }",
        )
        .unwrap();
        let diags = check_ghost_usage(&tp);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].code, Code::GhostInCompiled);
    }

    #[test]
    fn function_method_in_compiled_code_ok() {
        let tp = check(
            "function method GetDiscountedFamilyTicket(isWeekday: bool): nat { if isWeekday then 22 else 27 }\n\
             method M() { var t := GetDiscountedFamilyTicket(true); }",
        )
        .unwrap();
        assert!(check_ghost_usage(&tp).is_empty());
    }

    #[test]
    fn plain_function_in_assert_ok() {
        let tp = check(
            "function ChildPresent(a: array<int>): bool requires a != null; reads a; { exists i :: 0 <= i < a.Length ==> a[i] < 18 }\n\
             method M(a: array<int>) requires a != null; { assert ChildPresent(a) || true; }",
        )
        .unwrap();
        assert!(check_ghost_usage(&tp).is_empty());
    }

    #[test]
    fn ghost_var_flow() {
        let tp = check(
            "method M() { ghost var g := 1; var x := 0; x := g + 1; ghost var h := g; assert g >= 1; }",
        )
        .unwrap();
        let diags = check_ghost_usage(&tp);
        assert_eq!(diags.len(), 1, "{diags:?}");
        assert!(diags[0].message.contains("ghost variable 'g'"));
    }

    #[test]
    fn reads_violation_exact_message() {
        let tp = check(
            "function ChildPresent(visitorsAges: array<int>): bool requires visitorsAges != null; { exists i :: 0 <= i < visitorsAges.Length ==> visitorsAges[i] < 18 }",
        )
        .unwrap();
        let diags = check_frames(&tp);
        assert!(!diags.is_empty());
        for d in &diags {
            assert_eq!(d.code, Code::ReadsViolation);
            assert_eq!(d.message, "insufficient reads clause to read array element");
        }
    }

    #[test]
    fn reads_clause_satisfies_frame_check() {
        let tp = check(
            "function ChildPresent(visitorsAges: array<int>): bool requires visitorsAges != null; reads visitorsAges; { exists i :: 0 <= i < visitorsAges.Length ==> visitorsAges[i] < 18 }",
        )
        .unwrap();
        assert!(check_frames(&tp).is_empty());
    }

    #[test]
    fn modifies_violation() {
        let tp = check("method M(a: array<int>) requires a != null; { a[0] := 1; }").unwrap();
        let diags = check_frames(&tp);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].code, Code::ModifiesViolation);
    }

    #[test]
    fn call_frame_subset() {
        let tp = check(
            "method W(a: array<int>) requires a != null; modifies a; { a[0] := 1; }\n\
             method M(b: array<int>) requires b != null; { W(b); }",
        )
        .unwrap();
        let diags = check_frames(&tp);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].code, Code::CallFrameViolation);

        let tp = check(
            "method W(a: array<int>) requires a != null; modifies a; { a[0] := 1; }\n\
             method M(b: array<int>) requires b != null; modifies b; { W(b); }",
        )
        .unwrap();
        assert!(check_frames(&tp).is_empty());
    }

    #[test]
    fn reads_on_method_warns() {
        let tp = check("method M(a: array<int>) reads a; { }").unwrap();
        assert_eq!(tp.warnings.len(), 1);
        assert_eq!(tp.warnings[0].code, Code::ReadsOnMethod);
    }

    #[test]
    fn break_outside_loop_rejected() {
        assert!(check("method M() { break; }").is_err());
    }

    #[test]
    fn duplicate_declarations_rejected() {
        assert!(check("method M() { } method M() { }").is_err());
    }
}
