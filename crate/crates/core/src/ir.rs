//! Lowering from the typed AST to an acyclic guarded-command block graph.
//!
//! Loops are cut at their invariants: assert the invariant on entry, havoc
//! the loop targets, assume the invariant, then branch into a single
//! arbitrary iteration (which re-asserts the invariant and the termination
//! measure and ends) or into the exit path under the negated guard. `break`
//! edges go straight to the exit join, bypassing the negated-guard
//! assumption. Method calls assert the callee's preconditions, havoc the
//! outs (and the heap when the callee writes), and assume its
//! postconditions — the caller forgets the body.
//!
//! Every array access, division and nat-assignment is preceded by explicit
//! safety asserts, so the weakest-precondition pass can emit one
//! verification condition per assert.

use crate::ast::{self, BinOp, Block as AstBlock, Expr, ExprKind, Lhs, MethodDecl, QuantKind, Stmt, StmtKind, UnOp};
use crate::diag::{Code, Diagnostic};
use crate::logic::*;
use crate::span::Span;
use crate::typecheck::{ElemType, Type, TypedProgram};
use serde::Serialize;
use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fmt::Write as _;
use std::rc::Rc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum ObligationKind {
    Postcondition,
    PreconditionAtCall,
    AssertStmt,
    LoopInvEntry,
    LoopInvMaintained,
    TerminationDecreases,
    TerminationBounded,
    IndexInBounds,
    NullDeref,
    DivByZero,
    NatNonNegative,
}

impl fmt::Display for ObligationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ObligationKind::Postcondition => "Postcondition",
            ObligationKind::PreconditionAtCall => "PreconditionAtCall",
            ObligationKind::AssertStmt => "AssertStmt",
            ObligationKind::LoopInvEntry => "LoopInvEntry",
            ObligationKind::LoopInvMaintained => "LoopInvMaintained",
            ObligationKind::TerminationDecreases => "TerminationDecreases",
            ObligationKind::TerminationBounded => "TerminationBounded",
            ObligationKind::IndexInBounds => "IndexInBounds",
            ObligationKind::NullDeref => "NullDeref",
            ObligationKind::DivByZero => "DivByZero",
            ObligationKind::NatNonNegative => "NatNonNegative",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone)]
pub struct AssertCmd {
    pub id: u32,
    pub formula: FormulaRef,
    pub kind: ObligationKind,
    pub span: Span,
    pub description: String,
}

#[derive(Debug, Clone)]
pub enum HavocTarget {
    Var { name: String, fresh: String },
    Heap { sort: ElemSort, fresh: String },
}

#[derive(Debug, Clone)]
pub enum Command {
    Assume(FormulaRef),
    Assert(AssertCmd),
    AssignVar { name: String, value: Arg },
    HeapStore {
        sort: ElemSort,
        array: TermRef,
        index: TermRef,
        value: Arg,
    },
    Havoc(Vec<HavocTarget>),
}

#[derive(Debug, Clone)]
pub struct GcBlock {
    pub label: String,
    pub commands: Vec<Command>,
    pub successors: Vec<usize>,
}

/// Where the fresh havoc symbols of one loop cut live, keyed by the loop's
/// source span; the replay interpreter injects model values here.
#[derive(Debug, Clone)]
pub struct LoopHavocInfo {
    pub span: Span,
    pub vars: Vec<(String, String)>,
}

/// Fresh symbols for the outs of one call site.
#[derive(Debug, Clone)]
pub struct CallHavocInfo {
    pub span: Span,
    pub outs: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct GuardedCommandGraph {
    pub method: String,
    pub blocks: Vec<GcBlock>,
    pub symbol_sorts: BTreeMap<String, Sort>,
    pub loop_havocs: Vec<LoopHavocInfo>,
    pub call_havocs: Vec<CallHavocInfo>,
    /// Missing/unguessable termination measures and similar lowering
    /// diagnostics; these count as verification failures.
    pub diagnostics: Vec<Diagnostic>,
    /// Guessed loop measures, in source order, for loops without an explicit
    /// decreases clause.
    pub guessed_decreases: Vec<Expr>,
    pub num_asserts: u32,
}

impl GuardedCommandGraph {
    /// Topological order of the block graph; `None` if it has a cycle
    /// (which would be a lowering bug).
    pub fn topo_order(&self) -> Option<Vec<usize>> {
        let n = self.blocks.len();
        let mut indegree = vec![0usize; n];
        for b in &self.blocks {
            for &s in &b.successors {
                indegree[s] += 1;
            }
        }
        let mut queue: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = queue.pop() {
            order.push(i);
            for &s in &self.blocks[i].successors {
                indegree[s] -= 1;
                if indegree[s] == 0 {
                    queue.push(s);
                }
            }
        }
        if order.len() == n {
            Some(order)
        } else {
            None
        }
    }

    pub fn asserts(&self) -> impl Iterator<Item = &AssertCmd> {
        self.blocks.iter().flat_map(|b| {
            b.commands.iter().filter_map(|c| match c {
                Command::Assert(a) => Some(a),
                _ => None,
            })
        })
    }

    /// Stable text dump, one block per `label: cmds… -> succs` line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for b in &self.blocks {
            let _ = write!(out, "{}:", b.label);
            for (i, c) in b.commands.iter().enumerate() {
                if i > 0 {
                    out.push(';');
                }
                out.push(' ');
                match c {
                    Command::Assume(f) => {
                        let _ = write!(out, "assume {f}");
                    }
                    Command::Assert(a) => {
                        let _ = write!(out, "assert[{}] {}", a.kind, a.formula);
                    }
                    Command::AssignVar { name, value } => {
                        let _ = write!(out, "{name} := {value}");
                    }
                    Command::HeapStore {
                        sort,
                        array,
                        index,
                        value,
                    } => {
                        let _ = write!(out, "{}[{array}, {index}] := {value}", sort.heap_var());
                    }
                    Command::Havoc(targets) => {
                        out.push_str("havoc");
                        for (i, t) in targets.iter().enumerate() {
                            if i > 0 {
                                out.push(',');
                            }
                            match t {
                                HavocTarget::Var { name, fresh } => {
                                    let _ = write!(out, " {name} as {fresh}");
                                }
                                HavocTarget::Heap { sort, fresh } => {
                                    let _ = write!(out, " {} as {fresh}", sort.heap_var());
                                }
                            }
                        }
                    }
                }
            }
            out.push_str(" ->");
            for &s in &b.successors {
                let _ = write!(out, " {}", self.blocks[s].label);
            }
            out.push('\n');
        }
        out
    }
}

pub fn sort_of_type(t: Type) -> Sort {
    match t {
        Type::Int | Type::Nat => Sort::Int,
        Type::Bool => Sort::Bool,
        Type::Array(_) | Type::Null => Sort::Ref,
    }
}

// ---------------------------------------------------------------------------
// Expression translation
// ---------------------------------------------------------------------------

/// Context for translating expressions of one declaration into logic.
/// `var_map` substitutes parameter names (used to instantiate callee
/// contract clauses with actual arguments).
pub struct TrCtx<'a> {
    pub tp: &'a TypedProgram,
    pub decl: &'a str,
    pub var_map: BTreeMap<String, Arg>,
    pub fresh_bound: &'a Cell<u32>,
}

impl<'a> TrCtx<'a> {
    pub fn new(tp: &'a TypedProgram, decl: &'a str, fresh_bound: &'a Cell<u32>) -> Self {
        TrCtx {
            tp,
            decl,
            var_map: BTreeMap::new(),
            fresh_bound,
        }
    }

    fn ty(&self, e: &Expr, bound: &[(String, String)]) -> Type {
        let names: Vec<String> = bound.iter().map(|(s, _)| s.clone()).collect();
        self.tp.expr_type_bound(self.decl, e, &names)
    }
}

pub fn tr_arg(cx: &TrCtx, bound: &mut Vec<(String, String)>, e: &Expr) -> Arg {
    match cx.ty(e, bound) {
        Type::Bool => Arg::F(tr_formula(cx, bound, e)),
        _ => Arg::T(tr_term(cx, bound, e)),
    }
}

pub fn tr_term(cx: &TrCtx, bound: &mut Vec<(String, String)>, e: &Expr) -> TermRef {
    match &e.kind {
        ExprKind::IntLit(n) => t_bigint(n.clone()),
        ExprKind::NullLit => t_null(),
        ExprKind::Var(x) => {
            if let Some((_, logic)) = bound.iter().rev().find(|(s, _)| s == x) {
                return t_var(logic.clone());
            }
            match cx.var_map.get(x) {
                Some(Arg::T(t)) => t.clone(),
                Some(_) => unreachable!("bool substitution in term position"),
                None => t_var(x.clone()),
            }
        }
        ExprKind::Unary(UnOp::Neg, a) => Rc::new(Term::Neg(tr_term(cx, bound, a))),
        ExprKind::Binary(op, a, b) => {
            let ta = tr_term(cx, bound, a);
            let tb = tr_term(cx, bound, b);
            Rc::new(match op {
                BinOp::Add => Term::Add(ta, tb),
                BinOp::Sub => Term::Sub(ta, tb),
                BinOp::Mul => Term::Mul(ta, tb),
                BinOp::Div => Term::Div(ta, tb),
                BinOp::Mod => Term::Mod(ta, tb),
                _ => unreachable!("boolean operator in term position"),
            })
        }
        ExprKind::Select(a, i) => Rc::new(Term::Select(
            Rc::new(HeapExpr::Var(ElemSort::Int.heap_var().into())),
            tr_term(cx, bound, a),
            tr_term(cx, bound, i),
        )),
        ExprKind::Length(a) => t_length(tr_term(cx, bound, a)),
        ExprKind::Ite(c, t, e2) => Rc::new(Term::Ite(
            tr_formula(cx, bound, c),
            tr_term(cx, bound, t),
            tr_term(cx, bound, e2),
        )),
        ExprKind::Call(f, args) => {
            let args = args.iter().map(|a| tr_arg(cx, bound, a)).collect();
            Rc::new(Term::Apply(f.clone(), args))
        }
        _ => unreachable!("bool expression in term position: {e:?}"),
    }
}

pub fn tr_formula(cx: &TrCtx, bound: &mut Vec<(String, String)>, e: &Expr) -> FormulaRef {
    match &e.kind {
        ExprKind::BoolLit(b) => f_bool(*b),
        ExprKind::Var(x) => match cx.var_map.get(x) {
            Some(Arg::F(f)) => f.clone(),
            Some(_) => unreachable!("term substitution in bool position"),
            None => f_boolvar(x.clone()),
        },
        ExprKind::Unary(UnOp::Not, a) => f_not(tr_formula(cx, bound, a)),
        ExprKind::Binary(op, a, b) => match op {
            BinOp::And => f_and(vec![tr_formula(cx, bound, a), tr_formula(cx, bound, b)]),
            BinOp::Or => f_or(vec![tr_formula(cx, bound, a), tr_formula(cx, bound, b)]),
            BinOp::Implies => f_implies(tr_formula(cx, bound, a), tr_formula(cx, bound, b)),
            BinOp::Iff => f_iff(tr_formula(cx, bound, a), tr_formula(cx, bound, b)),
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                let cmp = match op {
                    BinOp::Lt => CmpOp::Lt,
                    BinOp::Le => CmpOp::Le,
                    BinOp::Gt => CmpOp::Gt,
                    _ => CmpOp::Ge,
                };
                f_cmp(cmp, tr_term(cx, bound, a), tr_term(cx, bound, b))
            }
            BinOp::Eq | BinOp::Ne => {
                let ta = cx.ty(a, bound);
                let tb = cx.ty(b, bound);
                let eq = if ta.is_arrayish() || tb.is_arrayish() {
                    f_ref_eq(tr_term(cx, bound, a), tr_term(cx, bound, b))
                } else if ta == Type::Bool && tb == Type::Bool {
                    f_iff(tr_formula(cx, bound, a), tr_formula(cx, bound, b))
                } else {
                    f_cmp(CmpOp::Eq, tr_term(cx, bound, a), tr_term(cx, bound, b))
                };
                if *op == BinOp::Eq {
                    eq
                } else {
                    f_not(eq)
                }
            }
            _ => unreachable!("arith operator in bool position"),
        },
        ExprKind::Chain(..) => unreachable!("chains are desugared before lowering"),
        ExprKind::Select(a, i) => Rc::new(Formula::SelectBool(
            Rc::new(HeapExpr::Var(ElemSort::Bool.heap_var().into())),
            tr_term(cx, bound, a),
            tr_term(cx, bound, i),
        )),
        ExprKind::Ite(c, t, e2) => f_ite(
            tr_formula(cx, bound, c),
            tr_formula(cx, bound, t),
            tr_formula(cx, bound, e2),
        ),
        ExprKind::Call(f, args) => {
            let args = args.iter().map(|a| tr_arg(cx, bound, a)).collect();
            Rc::new(Formula::ApplyBool(f.clone(), args))
        }
        ExprKind::Quantifier(q, x, body) => {
            let n = cx.fresh_bound.get();
            cx.fresh_bound.set(n + 1);
            let logic = format!("{x}#{n}");
            bound.push((x.clone(), logic.clone()));
            let inner = tr_formula(cx, bound, body);
            bound.pop();
            match q {
                QuantKind::Forall => f_forall(logic, inner),
                QuantKind::Exists => f_exists(logic, inner),
            }
        }
        _ => unreachable!("int expression in bool position: {e:?}"),
    }
}

// ---------------------------------------------------------------------------
// Well-formedness obligations
// ---------------------------------------------------------------------------

/// One safety obligation arising inside an expression; the expression-level
/// context (short-circuit guards, quantifier binders) is already folded into
/// `formula`.
#[derive(Debug, Clone)]
pub struct Oblig {
    pub formula: FormulaRef,
    pub kind: ObligationKind,
    pub span: Span,
    pub description: String,
}

/// Collect the safety obligations for evaluating `e`: null-dereference and
/// index bounds for every array access, non-zero divisors, nat-positions of
/// function arguments, and function preconditions. Short-circuit operators
/// guard their right operand's obligations.
pub fn wf_expr(
    cx: &TrCtx,
    bound: &mut Vec<(String, String)>,
    e: &Expr,
    ctx: FormulaRef,
    sink: &mut Vec<Oblig>,
) {
    match &e.kind {
        ExprKind::IntLit(_) | ExprKind::BoolLit(_) | ExprKind::NullLit | ExprKind::Var(_) => {}
        ExprKind::Unary(_, a) => wf_expr(cx, bound, a, ctx, sink),
        ExprKind::Binary(op, a, b) => {
            wf_expr(cx, bound, a, ctx.clone(), sink);
            let rhs_ctx = match op {
                BinOp::And | BinOp::Implies => {
                    f_and(vec![ctx.clone(), tr_formula(cx, bound, a)])
                }
                BinOp::Or => f_and(vec![ctx.clone(), f_not(tr_formula(cx, bound, a))]),
                _ => ctx.clone(),
            };
            wf_expr(cx, bound, b, rhs_ctx, sink);
            if matches!(op, BinOp::Div | BinOp::Mod) {
                sink.push(Oblig {
                    formula: f_implies(
                        ctx,
                        f_cmp(CmpOp::Ne, tr_term(cx, bound, b), t_int(0)),
                    ),
                    kind: ObligationKind::DivByZero,
                    span: e.span.clone(),
                    description: "possible division by zero".into(),
                });
            }
        }
        ExprKind::Chain(..) => unreachable!("chains are desugared before lowering"),
        ExprKind::Select(a, i) => {
            wf_expr(cx, bound, a, ctx.clone(), sink);
            wf_expr(cx, bound, i, ctx.clone(), sink);
            let at = tr_term(cx, bound, a);
            let it = tr_term(cx, bound, i);
            sink.push(Oblig {
                formula: f_implies(ctx.clone(), f_not(f_ref_eq(at.clone(), t_null()))),
                kind: ObligationKind::NullDeref,
                span: e.span.clone(),
                description: "target object may be null".into(),
            });
            sink.push(Oblig {
                formula: f_implies(
                    ctx,
                    f_and(vec![
                        f_cmp(CmpOp::Le, t_int(0), it.clone()),
                        f_cmp(CmpOp::Lt, it, t_length(at)),
                    ]),
                ),
                kind: ObligationKind::IndexInBounds,
                span: e.span.clone(),
                description: "index may be out of bounds".into(),
            });
        }
        ExprKind::Length(a) => {
            wf_expr(cx, bound, a, ctx.clone(), sink);
            sink.push(Oblig {
                formula: f_implies(
                    ctx,
                    f_not(f_ref_eq(tr_term(cx, bound, a), t_null())),
                ),
                kind: ObligationKind::NullDeref,
                span: e.span.clone(),
                description: "target object may be null".into(),
            });
        }
        ExprKind::Ite(c, t, e2) => {
            wf_expr(cx, bound, c, ctx.clone(), sink);
            let cf = tr_formula(cx, bound, c);
            wf_expr(cx, bound, t, f_and(vec![ctx.clone(), cf.clone()]), sink);
            wf_expr(cx, bound, e2, f_and(vec![ctx, f_not(cf)]), sink);
        }
        ExprKind::Call(fname, args) => {
            for a in args {
                wf_expr(cx, bound, a, ctx.clone(), sink);
            }
            let Some(fd) = cx.tp.program.function(fname) else {
                return;
            };
            // nat parameter positions
            for (p, a) in fd.ins.iter().zip(args.iter()) {
                let mut sink2 = Vec::new();
                let pt = crate::typecheck::type_of_type_expr(&p.ty, &mut sink2);
                if pt == Type::Nat && cx.ty(a, bound) == Type::Int {
                    sink.push(Oblig {
                        formula: f_implies(
                            ctx.clone(),
                            f_cmp(CmpOp::Ge, tr_term(cx, bound, a), t_int(0)),
                        ),
                        kind: ObligationKind::NatNonNegative,
                        span: a.span.clone(),
                        description: "value passed for nat parameter may be negative".into(),
                    });
                }
            }
            // callee preconditions, arguments substituted
            let var_map: BTreeMap<String, Arg> = fd
                .ins
                .iter()
                .zip(args.iter())
                .map(|(p, a)| (p.name.clone(), tr_arg(cx, bound, a)))
                .collect();
            let callee_cx = TrCtx {
                tp: cx.tp,
                decl: &fd.name,
                var_map,
                fresh_bound: cx.fresh_bound,
            };
            for r in &fd.requires {
                let r = ast::desugar_chains(r);
                let pre = tr_formula(&callee_cx, &mut Vec::new(), &r);
                sink.push(Oblig {
                    formula: f_implies(ctx.clone(), pre),
                    kind: ObligationKind::PreconditionAtCall,
                    span: e.span.clone(),
                    description: format!(
                        "precondition of '{fname}' might not hold: {}",
                        ast::expr_to_string(&r)
                    ),
                });
            }
        }
        ExprKind::Quantifier(_, x, body) => {
            let n = cx.fresh_bound.get();
            cx.fresh_bound.set(n + 1);
            let logic = format!("{x}#{n}");
            bound.push((x.clone(), logic.clone()));
            let mut inner = Vec::new();
            wf_expr(cx, bound, body, f_true(), &mut inner);
            bound.pop();
            for ob in inner {
                sink.push(Oblig {
                    formula: f_implies(ctx.clone(), f_forall(logic.clone(), ob.formula)),
                    ..ob
                });
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Termination measure guessing
// ---------------------------------------------------------------------------

/// Guess a termination measure from a loop guard of a common shape:
/// `A < B` / `A <= B` give `B - A`, `A > B` / `A >= B` give `A - B`.
pub fn guess_decreases(guard: &Expr) -> Option<Expr> {
    match &guard.kind {
        ExprKind::Binary(op, a, b) => {
            let (hi, lo) = match op {
                BinOp::Lt | BinOp::Le => (b.clone(), a.clone()),
                BinOp::Gt | BinOp::Ge => (a.clone(), b.clone()),
                _ => return None,
            };
            Some(Expr::new(
                ExprKind::Binary(BinOp::Sub, hi, lo),
                guard.span.clone(),
            ))
        }
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Assigned-variable scan (havoc targets)
// ---------------------------------------------------------------------------

/// Variables syntactically assigned (or declared) in a block, plus whether
/// the heap is touched by stores or by calls with a non-empty modifies.
pub fn assigned_in_block(tp: &TypedProgram, block: &AstBlock) -> (BTreeSet<String>, bool) {
    let mut vars = BTreeSet::new();
    let mut heap = false;
    fn walk(tp: &TypedProgram, block: &AstBlock, vars: &mut BTreeSet<String>, heap: &mut bool) {
        for s in &block.stmts {
            match &s.kind {
                StmtKind::VarDecl { name, .. } => {
                    vars.insert(name.clone());
                }
                StmtKind::Assign { lhs, .. } => match lhs {
                    Lhs::Var { name, .. } => {
                        vars.insert(name.clone());
                    }
                    Lhs::Index { .. } => {
                        *heap = true;
                    }
                },
                StmtKind::Call { lhss, method, .. } => {
                    for (n, _) in lhss {
                        vars.insert(n.clone());
                    }
                    if let Some(md) = tp.program.method(method) {
                        if !md.modifies.is_empty() {
                            *heap = true;
                        }
                    }
                }
                StmtKind::If {
                    then_block,
                    else_block,
                    ..
                } => {
                    walk(tp, then_block, vars, heap);
                    if let Some(b) = else_block {
                        walk(tp, b, vars, heap);
                    }
                }
                StmtKind::While { body, .. } => walk(tp, body, vars, heap),
                StmtKind::Assert(_) | StmtKind::Break => {}
            }
        }
    }
    walk(tp, block, &mut vars, &mut heap);
    (vars, heap)
}

// ---------------------------------------------------------------------------
// Method lowering
// ---------------------------------------------------------------------------

struct Lowering<'a> {
    tp: &'a TypedProgram,
    method: &'a MethodDecl,
    blocks: Vec<GcBlock>,
    current: usize,
    symbol_sorts: BTreeMap<String, Sort>,
    loop_havocs: Vec<LoopHavocInfo>,
    call_havocs: Vec<CallHavocInfo>,
    diagnostics: Vec<Diagnostic>,
    guessed_decreases: Vec<Expr>,
    next_assert: u32,
    next_site: u32,
    fresh_bound: Cell<u32>,
    loop_stack: Vec<usize>,
    /// Methods grouped by recursion cycle; calls within one cycle carry a
    /// termination assert against the caller's entry snapshot.
    method_scc: &'a BTreeMap<String, usize>,
    terminated: bool,
}

const METHOD_DECREASES_SNAPSHOT: &str = "$mdecr";

impl<'a> Lowering<'a> {
    fn cx(&self) -> TrCtx<'_> {
        TrCtx::new(self.tp, &self.method.name, &self.fresh_bound)
    }

    fn new_block(&mut self) -> usize {
        let idx = self.blocks.len();
        self.blocks.push(GcBlock {
            label: format!("b{idx}"),
            commands: Vec::new(),
            successors: Vec::new(),
        });
        idx
    }

    fn emit(&mut self, cmd: Command) {
        self.blocks[self.current].commands.push(cmd);
    }

    fn seal(&mut self, successors: Vec<usize>) {
        self.blocks[self.current].successors = successors;
    }

    fn formula(&self, e: &Expr) -> FormulaRef {
        tr_formula(&self.cx(), &mut Vec::new(), e)
    }

    fn term(&self, e: &Expr) -> TermRef {
        tr_term(&self.cx(), &mut Vec::new(), e)
    }

    fn arg(&self, e: &Expr) -> Arg {
        tr_arg(&self.cx(), &mut Vec::new(), e)
    }

    fn emit_assert(&mut self, formula: FormulaRef, kind: ObligationKind, span: Span, desc: String) {
        let id = self.next_assert;
        self.next_assert += 1;
        self.emit(Command::Assert(AssertCmd {
            id,
            formula,
            kind,
            span,
            description: desc,
        }));
    }

    fn emit_wf(&mut self, e: &Expr) {
        let mut sink = Vec::new();
        wf_expr(&self.cx(), &mut Vec::new(), e, f_true(), &mut sink);
        for ob in sink {
            self.emit_assert(ob.formula, ob.kind, ob.span, ob.description);
        }
    }

    fn var_type(&self, name: &str) -> Type {
        self.tp.scope(&self.method.name).vars[name].ty
    }

    fn register_var(&mut self, name: &str) {
        let sort = sort_of_type(self.var_type(name));
        self.symbol_sorts.insert(name.to_string(), sort);
    }

    fn register(&mut self, name: String, sort: Sort) {
        self.symbol_sorts.insert(name, sort);
    }

    /// nat-typed symbols are non-negative; emitted after havocs and at
    /// introduction points.
    fn emit_nat_assume(&mut self, name: &str) {
        if self.var_type(name) == Type::Nat {
            self.emit(Command::Assume(f_cmp(
                CmpOp::Ge,
                t_var(name.to_string()),
                t_int(0),
            )));
        }
    }

    fn expr_ty(&self, e: &Expr) -> Type {
        self.tp.expr_type(&self.method.name, e)
    }

    /// Assert `value >= 0` when an int-typed value flows into a nat slot.
    fn emit_nat_store_check(&mut self, slot: Type, value: &Expr, span: &Span) {
        if slot == Type::Nat && self.expr_ty(value) == Type::Int {
            let v = self.term(value);
            self.emit_assert(
                f_cmp(CmpOp::Ge, v, t_int(0)),
                ObligationKind::NatNonNegative,
                span.clone(),
                "value assigned to nat may be negative".into(),
            );
        }
    }

    fn lower_block(&mut self, block: &AstBlock) {
        for s in &block.stmts {
            if self.terminated {
                break; // statements after break are unreachable
            }
            self.lower_stmt(s);
        }
    }

    fn lower_stmt(&mut self, stmt: &Stmt) {
        match &stmt.kind {
            StmtKind::VarDecl {
                name, init, ghost: _, ..
            } => {
                self.register_var(name);
                match init {
                    Some(e) => {
                        self.emit_wf(e);
                        self.emit_nat_store_check(self.var_type(name), e, &stmt.span);
                        let value = self.arg(e);
                        self.emit(Command::AssignVar {
                            name: name.clone(),
                            value,
                        });
                    }
                    None => self.emit_nat_assume(name),
                }
            }
            StmtKind::Assign { lhs, rhs } => match lhs {
                Lhs::Var { name, .. } => {
                    self.emit_wf(rhs);
                    self.emit_nat_store_check(self.var_type(name), rhs, &stmt.span);
                    let value = self.arg(rhs);
                    self.emit(Command::AssignVar {
                        name: name.clone(),
                        value,
                    });
                }
                Lhs::Index {
                    array,
                    array_span,
                    index,
                } => {
                    self.emit_wf(index);
                    self.emit_wf(rhs);
                    let at = t_var(array.clone());
                    let it = self.term(index);
                    let store_span = array_span.merge(&index.span);
                    self.emit_assert(
                        f_not(f_ref_eq(at.clone(), t_null())),
                        ObligationKind::NullDeref,
                        store_span.clone(),
                        "target object may be null".into(),
                    );
                    self.emit_assert(
                        f_and(vec![
                            f_cmp(CmpOp::Le, t_int(0), it.clone()),
                            f_cmp(CmpOp::Lt, it.clone(), t_length(at.clone())),
                        ]),
                        ObligationKind::IndexInBounds,
                        store_span,
                        "index may be out of bounds".into(),
                    );
                    let sort = match self.var_type(array) {
                        Type::Array(ElemType::Bool) => ElemSort::Bool,
                        _ => ElemSort::Int,
                    };
                    let value = self.arg(rhs);
                    self.emit(Command::HeapStore {
                        sort,
                        array: at,
                        index: it,
                        value,
                    });
                }
            },
            StmtKind::Call { lhss, method, args } => self.lower_call(stmt, lhss, method, args),
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => {
                self.emit_wf(cond);
                let cf = self.formula(cond);
                let then_b = self.new_block();
                let else_b = self.new_block();
                let join = self.new_block();
                self.seal(vec![then_b, else_b]);

                self.current = then_b;
                self.emit(Command::Assume(cf.clone()));
                self.lower_block(then_block);
                let then_term = self.terminated;
                if !self.terminated {
                    self.seal(vec![join]);
                }
                self.terminated = false;

                self.current = else_b;
                self.emit(Command::Assume(f_not(cf)));
                if let Some(b) = else_block {
                    self.lower_block(b);
                }
                let else_term = self.terminated;
                if !self.terminated {
                    self.seal(vec![join]);
                }
                self.terminated = then_term && else_term;
                self.current = join;
            }
            StmtKind::While {
                guard,
                invariants,
                decreases,
                body,
            } => self.lower_while(stmt, guard, invariants, decreases.as_ref(), body),
            StmtKind::Assert(e) => {
                self.emit_wf(e);
                let f = self.formula(e);
                self.emit_assert(
                    f.clone(),
                    ObligationKind::AssertStmt,
                    stmt.span.clone(),
                    "assertion might not hold".into(),
                );
                self.emit(Command::Assume(f));
            }
            StmtKind::Break => {
                let target = *self.loop_stack.last().expect("break inside loop");
                self.seal(vec![target]);
                self.terminated = true;
            }
        }
    }

    fn lower_while(
        &mut self,
        stmt: &Stmt,
        guard: &Expr,
        invariants: &[Expr],
        decreases: Option<&Expr>,
        body: &AstBlock,
    ) {
        // invariant must hold on entry
        for inv in invariants {
            self.emit_wf(inv);
            let f = self.formula(inv);
            self.emit_assert(
                f,
                ObligationKind::LoopInvEntry,
                inv.span.clone(),
                "loop invariant might not hold on entry".into(),
            );
        }

        let measure: Option<(Expr, Span)> = match decreases {
            Some(d) => Some((d.clone(), d.span.clone())),
            None => match guess_decreases(guard) {
                Some(g) => {
                    self.guessed_decreases.push(g.clone());
                    let span = guard.span.clone();
                    Some((g, span))
                }
                None => {
                    self.diagnostics.push(Diagnostic::error(
                        stmt.span.clone(),
                        Code::MissingDecreases,
                        "cannot prove termination; add a decreases clause",
                    ));
                    None
                }
            },
        };

        let site = self.next_site;
        self.next_site += 1;
        let (vars, heap_touched) = assigned_in_block(self.tp, body);
        let mut targets = Vec::new();
        let mut havoc_vars = Vec::new();
        for v in &vars {
            self.register_var(v);
            let fresh = format!("{v}@loop{site}");
            self.register(fresh.clone(), sort_of_type(self.var_type(v)));
            havoc_vars.push((v.clone(), fresh.clone()));
            targets.push(HavocTarget::Var {
                name: v.clone(),
                fresh,
            });
        }
        if heap_touched {
            for sort in [ElemSort::Int, ElemSort::Bool] {
                let fresh = format!("{}@loop{site}", sort.heap_var());
                self.register(fresh.clone(), sort.heap_sort());
                targets.push(HavocTarget::Heap { sort, fresh });
            }
        }
        self.loop_havocs.push(LoopHavocInfo {
            span: stmt.span.clone(),
            vars: havoc_vars,
        });

        let havoc_b = self.new_block();
        self.seal(vec![havoc_b]);
        self.current = havoc_b;
        self.emit(Command::Havoc(targets));
        for v in &vars {
            self.emit_nat_assume(v);
        }
        // invariants are assumed for the arbitrary iteration; each one is
        // well-formedness-checked under its predecessors
        for inv in invariants {
            self.emit_wf(inv);
            let f = self.formula(inv);
            self.emit(Command::Assume(f));
        }
        self.emit_wf(guard);

        let body_b = self.new_block();
        let exit_b = self.new_block();
        let after_b = self.new_block();
        self.seal(vec![body_b, exit_b]);

        // exit path: the guard failed
        self.current = exit_b;
        self.emit(Command::Assume(f_not(self.formula(guard))));
        self.seal(vec![after_b]);

        // one arbitrary iteration, cut at the back edge
        self.current = body_b;
        self.emit(Command::Assume(self.formula(guard)));
        let decr_name = format!("$decr{site}");
        if let Some((d, _)) = &measure {
            self.emit_wf(d);
            self.register(decr_name.clone(), Sort::Int);
            let dt = self.term(d);
            self.emit(Command::AssignVar {
                name: decr_name.clone(),
                value: Arg::T(dt),
            });
        }

        self.loop_stack.push(after_b);
        self.lower_block(body);
        self.loop_stack.pop();

        if !self.terminated {
            for inv in invariants {
                self.emit_wf(inv);
                let f = self.formula(inv);
                self.emit_assert(
                    f,
                    ObligationKind::LoopInvMaintained,
                    inv.span.clone(),
                    "loop invariant might not be maintained".into(),
                );
            }
            if let Some((d, dspan)) = &measure {
                self.emit_wf(d);
                let dt = self.term(d);
                self.emit_assert(
                    f_cmp(CmpOp::Lt, dt, t_var(decr_name.clone())),
                    ObligationKind::TerminationDecreases,
                    dspan.clone(),
                    "decreases expression might not decrease".into(),
                );
                self.emit_assert(
                    f_cmp(CmpOp::Ge, t_var(decr_name), t_int(0)),
                    ObligationKind::TerminationBounded,
                    dspan.clone(),
                    "decreases expression might not be bounded below".into(),
                );
            }
            // back edge is cut: no successors
            self.seal(vec![]);
        }
        self.terminated = false;
        self.current = after_b;
    }

    fn lower_call(&mut self, stmt: &Stmt, lhss: &[(String, Span)], method: &str, args: &[Expr]) {
        let callee = self
            .tp
            .program
            .method(method)
            .expect("checked program: call resolves to a method")
            .clone();
        let site = self.next_site;
        self.next_site += 1;

        for a in args {
            self.emit_wf(a);
        }
        // evaluate arguments into temporaries so ensures can refer to the
        // pre-call values even when an out target is also passed as an arg
        let mut arg_terms: Vec<Arg> = Vec::new();
        for (k, (p, a)) in callee.ins.iter().zip(args.iter()).enumerate() {
            let mut sink = Vec::new();
            let pt = crate::typecheck::type_of_type_expr(&p.ty, &mut sink);
            let tmp = format!("$call{site}_arg{k}");
            self.register(tmp.clone(), sort_of_type(pt));
            let value = self.arg(a);
            self.emit(Command::AssignVar {
                name: tmp.clone(),
                value,
            });
            if pt == Type::Nat && self.expr_ty(a) == Type::Int {
                self.emit_assert(
                    f_cmp(CmpOp::Ge, t_var(tmp.clone()), t_int(0)),
                    ObligationKind::NatNonNegative,
                    a.span.clone(),
                    "value passed for nat parameter may be negative".into(),
                );
            }
            let arg = match pt {
                Type::Bool => {
                    // bool temporaries live in the bool namespace
                    Arg::F(f_boolvar(tmp))
                }
                _ => Arg::T(t_var(tmp)),
            };
            arg_terms.push(arg);
        }
        let ins_map: BTreeMap<String, Arg> = callee
            .ins
            .iter()
            .zip(arg_terms.iter())
            .map(|(p, t)| (p.name.clone(), t.clone()))
            .collect();

        // callee preconditions
        for r in &callee.requires {
            let r = ast::desugar_chains(r);
            let callee_cx = TrCtx {
                tp: self.tp,
                decl: &callee.name,
                var_map: ins_map.clone(),
                fresh_bound: &self.fresh_bound,
            };
            let pre = tr_formula(&callee_cx, &mut Vec::new(), &r);
            self.emit_assert(
                pre,
                ObligationKind::PreconditionAtCall,
                stmt.span.clone(),
                format!(
                    "precondition of '{method}' might not hold: {}",
                    ast::expr_to_string(&r)
                ),
            );
        }

        // termination for calls within a recursion cycle
        if let (Some(cid), Some(kid)) = (
            self.method_scc.get(&self.method.name),
            self.method_scc.get(method),
        ) {
            if cid == kid {
                if let Some(cd) = &callee.decreases {
                    if self.method.decreases.is_some() {
                        let cd = ast::desugar_chains(cd);
                        let callee_cx = TrCtx {
                            tp: self.tp,
                            decl: &callee.name,
                            var_map: ins_map.clone(),
                            fresh_bound: &self.fresh_bound,
                        };
                        let callee_d = tr_term(&callee_cx, &mut Vec::new(), &cd);
                        let snap = t_var(METHOD_DECREASES_SNAPSHOT);
                        self.emit_assert(
                            f_and(vec![
                                f_cmp(CmpOp::Gt, snap.clone(), callee_d),
                                f_cmp(CmpOp::Ge, snap, t_int(0)),
                            ]),
                            ObligationKind::TerminationDecreases,
                            stmt.span.clone(),
                            format!("recursive call to '{method}' might not decrease"),
                        );
                    }
                }
            }
        }

        // heap effects: havoc, then frame what the callee cannot touch
        if !callee.modifies.is_empty() {
            let modified_args: Vec<TermRef> = callee
                .modifies
                .iter()
                .filter_map(|(name, _)| callee.ins.iter().position(|p| &p.name == name))
                .filter_map(|idx| match &arg_terms[idx] {
                    Arg::T(t) => Some(t.clone()),
                    _ => None,
                })
                .collect();
            let mut snaps = Vec::new();
            for sort in [ElemSort::Int, ElemSort::Bool] {
                let snap = format!("$snap{site}{}", if sort == ElemSort::Bool { "b" } else { "" });
                self.register(snap.clone(), sort.heap_sort());
                self.emit(Command::AssignVar {
                    name: snap.clone(),
                    value: Arg::H(sort, Rc::new(HeapExpr::Var(sort.heap_var().into()))),
                });
                snaps.push((sort, snap));
            }
            let mut targets = Vec::new();
            for sort in [ElemSort::Int, ElemSort::Bool] {
                let fresh = format!("{}@call{site}", sort.heap_var());
                self.register(fresh.clone(), sort.heap_sort());
                targets.push(HavocTarget::Heap { sort, fresh });
            }
            self.emit(Command::Havoc(targets));
            // arrays in scope that are distinct from every modified argument
            // keep their contents
            let scope_arrays: Vec<String> = self
                .tp
                .scope(&self.method.name)
                .vars
                .iter()
                .filter(|(name, v)| {
                    matches!(v.ty, Type::Array(_)) && self.symbol_sorts.contains_key(*name)
                })
                .map(|(name, _)| name.clone())
                .collect();
            for z in scope_arrays {
                let zt = t_var(z.clone());
                let distinct = f_and(
                    modified_args
                        .iter()
                        .map(|m| f_not(f_ref_eq(zt.clone(), m.clone())))
                        .collect(),
                );
                for (sort, snap) in &snaps {
                    let n = self.fresh_bound.get();
                    self.fresh_bound.set(n + 1);
                    let iv = format!("i#{n}");
                    let cur = Rc::new(HeapExpr::Var(sort.heap_var().into()));
                    let old = Rc::new(HeapExpr::Var(snap.clone()));
                    let same: FormulaRef = match sort {
                        ElemSort::Int => f_cmp(
                            CmpOp::Eq,
                            Rc::new(Term::Select(cur, zt.clone(), t_var(iv.clone()))),
                            Rc::new(Term::Select(old, zt.clone(), t_var(iv.clone()))),
                        ),
                        ElemSort::Bool => f_iff(
                            Rc::new(Formula::SelectBool(cur, zt.clone(), t_var(iv.clone()))),
                            Rc::new(Formula::SelectBool(old, zt.clone(), t_var(iv.clone()))),
                        ),
                    };
                    self.emit(Command::Assume(f_implies(
                        distinct.clone(),
                        f_forall(iv, same),
                    )));
                }
            }
        }

        // havoc the outs; the ensures clauses are all we learn
        let mut targets = Vec::new();
        let mut outs_info = Vec::new();
        for (lhs, _) in lhss {
            self.register_var(lhs);
            let fresh = format!("{lhs}@call{site}");
            self.register(fresh.clone(), sort_of_type(self.var_type(lhs)));
            outs_info.push((lhs.clone(), fresh.clone()));
            targets.push(HavocTarget::Var {
                name: lhs.clone(),
                fresh,
            });
        }
        self.emit(Command::Havoc(targets));
        self.call_havocs.push(CallHavocInfo {
            span: stmt.span.clone(),
            outs: outs_info,
        });

        let mut outs_map = ins_map.clone();
        for ((lhs, _), out_param) in lhss.iter().zip(callee.outs.iter()) {
            let mut sink = Vec::new();
            let ot = crate::typecheck::type_of_type_expr(&out_param.ty, &mut sink);
            if ot == Type::Nat {
                self.emit(Command::Assume(f_cmp(
                    CmpOp::Ge,
                    t_var(lhs.clone()),
                    t_int(0),
                )));
            }
            let arg = match ot {
                Type::Bool => Arg::F(f_boolvar(lhs.clone())),
                _ => Arg::T(t_var(lhs.clone())),
            };
            outs_map.insert(out_param.name.clone(), arg);
        }
        for e in &callee.ensures {
            let e = ast::desugar_chains(e);
            let callee_cx = TrCtx {
                tp: self.tp,
                decl: &callee.name,
                var_map: outs_map.clone(),
                fresh_bound: &self.fresh_bound,
            };
            let post = tr_formula(&callee_cx, &mut Vec::new(), &e);
            self.emit(Command::Assume(post));
        }
        // an int-typed out stored into a nat slot needs a proof
        for ((lhs, lspan), out_param) in lhss.iter().zip(callee.outs.iter()) {
            let mut sink = Vec::new();
            let ot = crate::typecheck::type_of_type_expr(&out_param.ty, &mut sink);
            if self.var_type(lhs) == Type::Nat && ot == Type::Int {
                self.emit_assert(
                    f_cmp(CmpOp::Ge, t_var(lhs.clone()), t_int(0)),
                    ObligationKind::NatNonNegative,
                    lspan.clone(),
                    "value assigned to nat may be negative".into(),
                );
            }
        }
    }
}

/// Lower one method (chains already desugared by the caller) to its guarded
/// command graph. `method_scc` assigns a cycle id to every method that takes
/// part in recursion.
pub fn lower_method(
    tp: &TypedProgram,
    m: &MethodDecl,
    method_scc: &BTreeMap<String, usize>,
) -> GuardedCommandGraph {
    let m = desugar_method(m);
    let mut lw = Lowering {
        tp,
        method: &m,
        blocks: Vec::new(),
        current: 0,
        symbol_sorts: BTreeMap::new(),
        loop_havocs: Vec::new(),
        call_havocs: Vec::new(),
        diagnostics: Vec::new(),
        guessed_decreases: Vec::new(),
        next_assert: 0,
        next_site: 0,
        fresh_bound: Cell::new(0),
        loop_stack: Vec::new(),
        method_scc,
        terminated: false,
    };
    lw.symbol_sorts
        .insert(ElemSort::Int.heap_var().into(), Sort::HeapInt);
    lw.symbol_sorts
        .insert(ElemSort::Bool.heap_var().into(), Sort::HeapBool);

    let entry = lw.new_block();
    lw.current = entry;

    // typing facts for parameters and out-parameters
    for p in m.ins.iter().chain(m.outs.iter()) {
        lw.register_var(&p.name);
        lw.emit_nat_assume(&p.name);
    }
    // preconditions, well-formedness-checked left to right
    for r in &m.requires {
        lw.emit_wf(r);
        let f = lw.formula(r);
        lw.emit(Command::Assume(f));
    }
    // snapshot the method's termination measure for recursive calls
    if method_scc.contains_key(&m.name) {
        if let Some(d) = &m.decreases {
            lw.emit_wf(d);
            lw.register(METHOD_DECREASES_SNAPSHOT.into(), Sort::Int);
            let dt = lw.term(d);
            lw.emit(Command::AssignVar {
                name: METHOD_DECREASES_SNAPSHOT.into(),
                value: Arg::T(dt),
            });
        }
    }

    lw.lower_block(&m.body);

    // postconditions at the single exit
    for e in &m.ensures {
        lw.emit_wf(e);
        let f = lw.formula(e);
        lw.emit_assert(
            f,
            ObligationKind::Postcondition,
            e.span.clone(),
            "postcondition might not hold".into(),
        );
    }

    GuardedCommandGraph {
        method: m.name.clone(),
        blocks: lw.blocks,
        symbol_sorts: lw.symbol_sorts,
        loop_havocs: lw.loop_havocs,
        call_havocs: lw.call_havocs,
        diagnostics: lw.diagnostics,
        guessed_decreases: lw.guessed_decreases,
        num_asserts: lw.next_assert,
    }
}

/// Clone a method with every expression's comparison chains desugared.
pub fn desugar_method(m: &MethodDecl) -> MethodDecl {
    fn block(b: &AstBlock) -> AstBlock {
        AstBlock {
            stmts: b.stmts.iter().map(stmt).collect(),
            span: b.span.clone(),
        }
    }
    fn stmt(s: &Stmt) -> Stmt {
        let kind = match &s.kind {
            StmtKind::VarDecl {
                name,
                ty,
                init,
                ghost,
            } => StmtKind::VarDecl {
                name: name.clone(),
                ty: ty.clone(),
                init: init.as_ref().map(ast::desugar_chains),
                ghost: *ghost,
            },
            StmtKind::Assign { lhs, rhs } => StmtKind::Assign {
                lhs: match lhs {
                    Lhs::Index {
                        array,
                        array_span,
                        index,
                    } => Lhs::Index {
                        array: array.clone(),
                        array_span: array_span.clone(),
                        index: ast::desugar_chains(index),
                    },
                    v => v.clone(),
                },
                rhs: ast::desugar_chains(rhs),
            },
            StmtKind::Call { lhss, method, args } => StmtKind::Call {
                lhss: lhss.clone(),
                method: method.clone(),
                args: args.iter().map(ast::desugar_chains).collect(),
            },
            StmtKind::If {
                cond,
                then_block,
                else_block,
            } => StmtKind::If {
                cond: ast::desugar_chains(cond),
                then_block: block(then_block),
                else_block: else_block.as_ref().map(block),
            },
            StmtKind::While {
                guard,
                invariants,
                decreases,
                body,
            } => StmtKind::While {
                guard: ast::desugar_chains(guard),
                invariants: invariants.iter().map(ast::desugar_chains).collect(),
                decreases: decreases.as_ref().map(ast::desugar_chains),
                body: block(body),
            },
            StmtKind::Assert(e) => StmtKind::Assert(ast::desugar_chains(e)),
            StmtKind::Break => StmtKind::Break,
        };
        Stmt {
            kind,
            span: s.span.clone(),
        }
    }
    MethodDecl {
        requires: m.requires.iter().map(ast::desugar_chains).collect(),
        ensures: m.ensures.iter().map(ast::desugar_chains).collect(),
        decreases: m.decreases.as_ref().map(ast::desugar_chains),
        body: block(&m.body),
        ..m.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;
    use crate::typecheck::resolve_and_check;

    fn lower(src: &str, name: &str) -> GuardedCommandGraph {
        let tp = resolve_and_check(&parse("t.mdfy", src).unwrap()).unwrap();
        let m = tp.program.method(name).unwrap().clone();
        lower_method(&tp, &m, &BTreeMap::new())
    }

    #[test]
    fn assert_emits_assert_then_assume() {
        let g = lower("method M(x: int) { assert x == x; }", "M");
        let cmds = &g.blocks[0].commands;
        let pos = cmds
            .iter()
            .position(|c| matches!(c, Command::Assert(a) if a.kind == ObligationKind::AssertStmt))
            .expect("assert present");
        assert!(
            matches!(&cmds[pos + 1], Command::Assume(_)),
            "assert followed by assume"
        );
    }

    #[test]
    fn graphs_are_acyclic() {
        let g = lower(
            "method M(n: nat) {\n\
               var x := 0;\n\
               while (x < n) invariant x <= n; { if (x > 2) { break; } x := x + 1; }\n\
               assert x <= n;\n\
             }",
            "M",
        );
        assert!(g.topo_order().is_some(), "graph must be acyclic");
    }

    #[test]
    fn havoc_covers_assigned_vars() {
        let src = "method M(n: nat) {\n\
             var x := 0;\n\
             var y := 0;\n\
             while (x < n) invariant x <= n; { x := x + 1; if (x > 1) { y := y + 2; } }\n\
           }";
        let tp = resolve_and_check(&parse("t.mdfy", src).unwrap()).unwrap();
        let m = tp.program.method("M").unwrap().clone();
        let g = lower_method(&tp, &m, &BTreeMap::new());
        // independent AST scan
        let StmtKind::While { body, .. } = &m.body.stmts[2].kind else {
            panic!()
        };
        let (assigned, _) = assigned_in_block(&tp, body);
        let havocked: BTreeSet<String> = g.loop_havocs[0]
            .vars
            .iter()
            .map(|(v, _)| v.clone())
            .collect();
        assert!(
            havocked.is_superset(&assigned),
            "havoc {havocked:?} must cover assigned {assigned:?}"
        );
    }

    #[test]
    fn guess_decreases_common_forms() {
        let parse_guard = |s: &str| {
            let p = parse("t.mdfy", &format!("method M(a: int, b: int) {{ while ({s}) invariant true; {{ }} }}"))
                .unwrap();
            let m = p.method("M").unwrap().clone();
            let StmtKind::While { guard, .. } = &m.body.stmts[0].kind else {
                panic!()
            };
            guard.clone()
        };
        let g = guess_decreases(&parse_guard("a < b")).unwrap();
        assert_eq!(ast::expr_to_string(&g), "b - a");
        let g = guess_decreases(&parse_guard("a > 0")).unwrap();
        assert_eq!(ast::expr_to_string(&g), "a - 0");
        assert!(guess_decreases(&parse_guard("a != b")).is_none());
    }

    #[test]
    fn boolean_guard_yields_missing_decreases_diagnostic() {
        let g = lower(
            "method M(flag: bool) { while (flag) invariant true; { } }",
            "M",
        );
        assert_eq!(g.diagnostics.len(), 1);
        assert_eq!(g.diagnostics[0].code, Code::MissingDecreases);
        assert!(g.diagnostics[0]
            .message
            .contains("cannot prove termination; add a decreases clause"));
    }

    #[test]
    fn loop_emits_entry_maintained_and_termination() {
        let g = lower(
            "method M(n: nat) { var x := 0; while (x < n) invariant x <= n; decreases n - x; { x := x + 1; } }",
            "M",
        );
        let kinds: Vec<ObligationKind> = g.asserts().map(|a| a.kind).collect();
        assert!(kinds.contains(&ObligationKind::LoopInvEntry));
        assert!(kinds.contains(&ObligationKind::LoopInvMaintained));
        assert!(kinds.contains(&ObligationKind::TerminationDecreases));
        assert!(kinds.contains(&ObligationKind::TerminationBounded));
    }

    #[test]
    fn select_is_dominated_by_null_and_bounds_asserts() {
        let g = lower(
            "method M(a: array<int>) requires a != null; modifies a; { a[0] := a[0] + 1; }",
            "M",
        );
        // structural check: every HeapStore/select-bearing command is
        // preceded in its block by NullDeref and IndexInBounds asserts
        for b in &g.blocks {
            for (i, c) in b.commands.iter().enumerate() {
                if let Command::HeapStore { .. } = c {
                    let before = &b.commands[..i];
                    let has = |k: ObligationKind| {
                        before.iter().any(
                            |c| matches!(c, Command::Assert(a) if a.kind == k),
                        )
                    };
                    assert!(has(ObligationKind::NullDeref));
                    assert!(has(ObligationKind::IndexInBounds));
                }
            }
        }
    }

    #[test]
    fn division_emits_div_by_zero() {
        let g = lower("method M(x: int, y: int) { var z := x / y; }", "M");
        assert!(g.asserts().any(|a| a.kind == ObligationKind::DivByZero));
    }

    #[test]
    fn call_asserts_pre_havocs_outs_assumes_post() {
        let src = "method Fee(numAdults: nat, numChildren: nat) returns (totalFee: int)\n\
               requires numAdults >= 1; ensures totalFee > 0; { totalFee := 10 * numAdults + 6 * numChildren; }\n\
             method M() { var totalFee := Fee(2, 2); assert totalFee > 0; }";
        let g = lower(src, "M");
        let dump = g.dump();
        assert!(dump.contains("assert[PreconditionAtCall]"));
        assert!(dump.contains("havoc totalFee as totalFee@call0"));
        assert!(dump.contains("assume (totalFee > 0)"));
    }

    #[test]
    fn dump_is_stable() {
        let g = lower("method M(x: nat) returns (r: int) ensures r > x; { r := x + 1; }", "M");
        let dump = g.dump();
        assert_eq!(
            dump,
            "b0: assume (x >= 0); r := (x + 1); assert[Postcondition] (r > x) ->\n"
        );
    }
}
