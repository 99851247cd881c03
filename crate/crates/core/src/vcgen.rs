//! Verification-condition generation: weakest preconditions over the
//! acyclic block graph, one closed condition per assert.
//!
//! The computation walks blocks in reverse topological order with memoized
//! per-block postconditions; assignments substitute, assumes become
//! implications, havocs rename to fresh symbols that the closing step
//! universally quantifies away with every other free symbol. For the
//! condition of assert `A`, every other assert in the graph is treated as an
//! assumption, so each obligation is checked exactly once.
//!
//! Function applications stay uninterpreted in formulas; [`inline_functions`]
//! conjoins guarded definitional equations up to a fuel bound, plus each
//! function's postconditions, as hypotheses.

use crate::ast::{self, BinOp, Block as AstBlock, Expr, ExprKind, FunctionDecl, StmtKind, UnOp};
use crate::diag::{Code, Diagnostic};
use crate::ir::{
    self, lower_method, tr_formula, tr_term, wf_expr, Command, GuardedCommandGraph,
    ObligationKind, Oblig, TrCtx,
};
use crate::logic::*;
use crate::span::Span;
use crate::typecheck::{Type, TypedProgram};
use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::rc::Rc;

/// A closed first-order proof obligation. Free symbols listed in `symbols`
/// are implicitly universally quantified prelude constants.
#[derive(Debug, Clone)]
pub struct VerificationCondition {
    pub id: String,
    /// Bare per-declaration index; `id` is `<method>.<index>`.
    pub index: u32,
    pub method: String,
    pub kind: ObligationKind,
    pub span: Span,
    pub description: String,
    /// Typing facts: nat symbols are handled at their introduction sites;
    /// here live the per-array length facts.
    pub hypotheses: Vec<FormulaRef>,
    pub goal: FormulaRef,
    pub symbols: BTreeMap<String, Sort>,
}

impl VerificationCondition {
    /// The full formula: hypotheses ⇒ goal.
    pub fn formula(&self) -> FormulaRef {
        f_implies(f_and(self.hypotheses.clone()), self.goal.clone())
    }

    /// Readable dump used by `--emit-vc`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "VC {} [{}] {}:{}:{} — {}",
            self.id,
            self.kind,
            self.span.file,
            self.span.start_line,
            self.span.start_col,
            self.description
        );
        let _ = writeln!(out, "  {}", self.formula());
        out
    }
}

fn close_vc(
    method: &str,
    id: u32,
    kind: ObligationKind,
    span: Span,
    description: String,
    hypotheses: Vec<FormulaRef>,
    goal: FormulaRef,
    sorts: &BTreeMap<String, Sort>,
) -> VerificationCondition {
    let mut fv = FreeVars::default();
    for h in &hypotheses {
        free_vars_formula(h, &mut fv, &mut Vec::new());
    }
    free_vars_formula(&goal, &mut fv, &mut Vec::new());

    let mut symbols = BTreeMap::new();
    let mut hyps = hypotheses;
    for name in fv.terms.iter() {
        let sort = *sorts
            .get(name)
            .unwrap_or_else(|| panic!("unregistered symbol '{name}' in VC {method}.{id}"));
        symbols.insert(name.clone(), sort);
        if sort == Sort::Ref {
            // every non-null array has a non-negative length
            hyps.push(f_or(vec![
                f_ref_eq(t_var(name.clone()), t_null()),
                f_cmp(CmpOp::Ge, t_length(t_var(name.clone())), t_int(0)),
            ]));
        }
    }
    for name in fv.bools.iter() {
        symbols.insert(name.clone(), Sort::Bool);
    }
    for name in fv.heaps.iter() {
        let sort = *sorts
            .get(name)
            .unwrap_or_else(|| panic!("unregistered heap '{name}' in VC {method}.{id}"));
        symbols.insert(name.clone(), sort);
    }
    VerificationCondition {
        id: format!("{method}.{id}"),
        index: id,
        method: method.to_string(),
        kind,
        span,
        description,
        hypotheses: hyps,
        goal,
        symbols,
    }
}

// ---------------------------------------------------------------------------
// Weakest preconditions over the block graph
// ---------------------------------------------------------------------------

fn havoc_subst(g: &GuardedCommandGraph, targets: &[ir::HavocTarget]) -> Subst {
    let mut s = Subst::default();
    for t in targets {
        match t {
            ir::HavocTarget::Var { name, fresh } => {
                let arg = match g.symbol_sorts[name] {
                    Sort::Bool => Arg::F(f_boolvar(fresh.clone())),
                    _ => Arg::T(t_var(fresh.clone())),
                };
                s.map.insert(name.clone(), arg);
            }
            ir::HavocTarget::Heap { sort, fresh } => {
                s.map.insert(
                    sort.heap_var().to_string(),
                    Arg::H(*sort, Rc::new(HeapExpr::Var(fresh.clone()))),
                );
            }
        }
    }
    s
}

fn wp_block(
    g: &GuardedCommandGraph,
    idx: usize,
    target: u32,
    memo: &mut Vec<Option<FormulaRef>>,
) -> FormulaRef {
    if let Some(f) = &memo[idx] {
        return f.clone();
    }
    let block = &g.blocks[idx];
    let mut q = f_and(
        block
            .successors
            .iter()
            .map(|&s| wp_block(g, s, target, memo))
            .collect(),
    );
    for cmd in block.commands.iter().rev() {
        q = match cmd {
            Command::Assume(f) => f_implies(f.clone(), q),
            Command::Assert(a) => {
                if a.id == target {
                    a.formula.clone()
                } else {
                    f_implies(a.formula.clone(), q)
                }
            }
            Command::AssignVar { name, value } => {
                subst_formula(&q, &Subst::one(name.clone(), value.clone()))
            }
            Command::HeapStore {
                sort,
                array,
                index,
                value,
            } => {
                let store = Rc::new(HeapExpr::Store {
                    heap: Rc::new(HeapExpr::Var(sort.heap_var().into())),
                    array: array.clone(),
                    index: index.clone(),
                    value: value.clone(),
                });
                subst_formula(
                    &q,
                    &Subst::one(sort.heap_var().to_string(), Arg::H(*sort, store)),
                )
            }
            Command::Havoc(targets) => subst_formula(&q, &havoc_subst(g, targets)),
        };
    }
    memo[idx] = Some(q.clone());
    q
}

/// Emit one verification condition per assert in the graph.
pub fn compute_wp(g: &GuardedCommandGraph) -> Vec<VerificationCondition> {
    debug_assert!(g.topo_order().is_some(), "block graph must be acyclic");
    let mut vcs = Vec::new();
    for assert in g.asserts() {
        let mut memo = vec![None; g.blocks.len()];
        let goal = wp_block(g, 0, assert.id, &mut memo);
        vcs.push(close_vc(
            &g.method,
            assert.id,
            assert.kind,
            assert.span.clone(),
            assert.description.clone(),
            Vec::new(),
            goal,
            &g.symbol_sorts,
        ));
    }
    // deterministic: source order, then kind, then emission id
    vcs.sort_by(|a, b| {
        (&a.span, a.kind, &a.id).cmp(&(&b.span, b.kind, &b.id))
    });
    vcs
}

// ---------------------------------------------------------------------------
// Function inlining
// ---------------------------------------------------------------------------

fn collect_apps_formula(f: &FormulaRef, out: &mut Vec<(String, Vec<Arg>, bool)>) {
    match &**f {
        Formula::ApplyBool(name, args) => {
            for a in args {
                collect_apps_arg(a, out);
            }
            out.push((name.clone(), args.clone(), true));
        }
        Formula::Cmp(_, a, b) | Formula::RefEq(a, b) => {
            collect_apps_term(a, out);
            collect_apps_term(b, out);
        }
        Formula::SelectBool(h, a, i) => {
            collect_apps_heap(h, out);
            collect_apps_term(a, out);
            collect_apps_term(i, out);
        }
        Formula::Not(a) => collect_apps_formula(a, out),
        Formula::And(fs) | Formula::Or(fs) => {
            for g in fs {
                collect_apps_formula(g, out);
            }
        }
        Formula::Implies(p, q) | Formula::Iff(p, q) => {
            collect_apps_formula(p, out);
            collect_apps_formula(q, out);
        }
        Formula::Forall(_, b) | Formula::Exists(_, b) => collect_apps_formula(b, out),
        Formula::Bool(_) | Formula::BoolVar(_) => {}
    }
}

fn collect_apps_term(t: &TermRef, out: &mut Vec<(String, Vec<Arg>, bool)>) {
    match &**t {
        Term::Apply(name, args) => {
            for a in args {
                collect_apps_arg(a, out);
            }
            out.push((name.clone(), args.clone(), false));
        }
        Term::Neg(a) | Term::Length(a) => collect_apps_term(a, out),
        Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) | Term::Div(a, b) | Term::Mod(a, b) => {
            collect_apps_term(a, out);
            collect_apps_term(b, out);
        }
        Term::Select(h, a, i) => {
            collect_apps_heap(h, out);
            collect_apps_term(a, out);
            collect_apps_term(i, out);
        }
        Term::Ite(c, a, b) => {
            collect_apps_formula(c, out);
            collect_apps_term(a, out);
            collect_apps_term(b, out);
        }
        Term::IntLit(_) | Term::Var(_) | Term::Null => {}
    }
}

fn collect_apps_heap(h: &HeapRef, out: &mut Vec<(String, Vec<Arg>, bool)>) {
    if let HeapExpr::Store {
        heap,
        array,
        index,
        value,
    } = &**h
    {
        collect_apps_heap(heap, out);
        collect_apps_term(array, out);
        collect_apps_term(index, out);
        collect_apps_arg(value, out);
    }
}

fn collect_apps_arg(a: &Arg, out: &mut Vec<(String, Vec<Arg>, bool)>) {
    match a {
        Arg::T(t) => collect_apps_term(t, out),
        Arg::F(f) => collect_apps_formula(f, out),
        Arg::H(_, h) => collect_apps_heap(h, out),
    }
}

/// Strengthen `formula` with guarded definitions of the function
/// applications it contains: up to `fuel` unfoldings per call chain, each
/// application contributes `requires ⇒ (app = body)`; every application also
/// contributes its postconditions (and non-negativity for nat results) as
/// guarded assumptions.
pub fn inline_functions(tp: &TypedProgram, formula: &FormulaRef, fuel: u32) -> FormulaRef {
    let fresh = Cell::new(1_000_000); // bound-name counter disjoint from lowering
    let mut hyps: Vec<FormulaRef> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();

    let mut frontier: Vec<(String, Vec<Arg>, bool)> = Vec::new();
    collect_apps_formula(formula, &mut frontier);

    let mut depth = 0u32;
    while !frontier.is_empty() && depth <= fuel.saturating_add(2) {
        // deterministic processing order within a depth layer
        let mut layer: Vec<(String, Vec<Arg>, bool)> = frontier
            .drain(..)
            .filter(|(name, args, is_bool)| {
                let key = format!("{is_bool}:{name}{args:?}");
                seen.insert(key)
            })
            .collect();
        layer.sort_by_key(|(name, args, _)| format!("{name}{args:?}"));

        let mut new_hyps = Vec::new();
        for (name, args, is_bool) in layer {
            let Some(fd) = tp.program.function(&name) else {
                continue;
            };
            if fd.ins.len() != args.len() {
                continue;
            }
            let var_map: BTreeMap<String, Arg> = fd
                .ins
                .iter()
                .zip(args.iter())
                .map(|(p, a)| (p.name.clone(), a.clone()))
                .collect();
            let cx = TrCtx {
                tp,
                decl: &fd.name,
                var_map,
                fresh_bound: &fresh,
            };
            let guard = f_and(
                fd.requires
                    .iter()
                    .map(|r| tr_formula(&cx, &mut Vec::new(), &ast::desugar_chains(r)))
                    .collect(),
            );
            if depth < fuel {
                let body = ast::desugar_chains(&fd.body);
                let def = if is_bool {
                    let app = Rc::new(Formula::ApplyBool(name.clone(), args.clone()));
                    f_iff(app, tr_formula(&cx, &mut Vec::new(), &body))
                } else {
                    let app: TermRef = Rc::new(Term::Apply(name.clone(), args.clone()));
                    match tp.expr_type(&fd.name, &fd.body) {
                        Type::Array(_) | Type::Null => {
                            f_ref_eq(app, tr_term(&cx, &mut Vec::new(), &body))
                        }
                        _ => f_cmp(CmpOp::Eq, app, tr_term(&cx, &mut Vec::new(), &body)),
                    }
                };
                new_hyps.push(f_implies(guard.clone(), def));
            }
            for e in &fd.ensures {
                let post = tr_formula(&cx, &mut Vec::new(), &ast::desugar_chains(e));
                new_hyps.push(f_implies(guard.clone(), post));
            }
            if !is_bool {
                let mut sink = Vec::new();
                if crate::typecheck::type_of_type_expr(&fd.return_type, &mut sink) == Type::Nat {
                    let app: TermRef = Rc::new(Term::Apply(name.clone(), args.clone()));
                    new_hyps.push(f_implies(guard, f_cmp(CmpOp::Ge, app, t_int(0))));
                }
            }
        }
        for h in &new_hyps {
            collect_apps_formula(h, &mut frontier);
        }
        hyps.extend(new_hyps);
        depth += 1;
    }

    f_implies(f_and(hyps), formula.clone())
}

// ---------------------------------------------------------------------------
// Call graph and termination of recursion
// ---------------------------------------------------------------------------

fn function_calls(e: &Expr, out: &mut BTreeSet<String>) {
    match &e.kind {
        ExprKind::Call(f, args) => {
            out.insert(f.clone());
            for a in args {
                function_calls(a, out);
            }
        }
        ExprKind::Binary(_, a, b) => {
            function_calls(a, out);
            function_calls(b, out);
        }
        ExprKind::Unary(_, a) | ExprKind::Length(a) => function_calls(a, out),
        ExprKind::Chain(os, _) => {
            for o in os {
                function_calls(o, out);
            }
        }
        ExprKind::Select(a, i) => {
            function_calls(a, out);
            function_calls(i, out);
        }
        ExprKind::Ite(c, t, e2) => {
            function_calls(c, out);
            function_calls(t, out);
            function_calls(e2, out);
        }
        ExprKind::Quantifier(_, _, b) => function_calls(b, out),
        _ => {}
    }
}

fn method_calls(b: &AstBlock, out: &mut BTreeSet<String>) {
    for s in &b.stmts {
        match &s.kind {
            StmtKind::Call { method, .. } => {
                out.insert(method.clone());
            }
            StmtKind::If {
                then_block,
                else_block,
                ..
            } => {
                method_calls(then_block, out);
                if let Some(e) = else_block {
                    method_calls(e, out);
                }
            }
            StmtKind::While { body, .. } => method_calls(body, out),
            _ => {}
        }
    }
}

/// Nodes that take part in a call cycle, mapped to a cycle id.
fn recursion_sccs(nodes: &[String], edges: &BTreeMap<String, BTreeSet<String>>) -> BTreeMap<String, usize> {
    // Tarjan's strongly connected components, iterative over a small graph
    struct St<'a> {
        edges: &'a BTreeMap<String, BTreeSet<String>>,
        index: BTreeMap<String, usize>,
        low: BTreeMap<String, usize>,
        on_stack: BTreeSet<String>,
        stack: Vec<String>,
        counter: usize,
        sccs: Vec<Vec<String>>,
    }
    fn strongconnect(st: &mut St, v: &str) {
        st.index.insert(v.to_string(), st.counter);
        st.low.insert(v.to_string(), st.counter);
        st.counter += 1;
        st.stack.push(v.to_string());
        st.on_stack.insert(v.to_string());
        let succs: Vec<String> = st
            .edges
            .get(v)
            .map(|s| s.iter().cloned().collect())
            .unwrap_or_default();
        for w in succs {
            if !st.index.contains_key(&w) {
                strongconnect(st, &w);
                let lw = st.low[&w];
                let lv = st.low[v];
                st.low.insert(v.to_string(), lv.min(lw));
            } else if st.on_stack.contains(&w) {
                let iw = st.index[&w];
                let lv = st.low[v];
                st.low.insert(v.to_string(), lv.min(iw));
            }
        }
        if st.low[v] == st.index[v] {
            let mut scc = Vec::new();
            while let Some(w) = st.stack.pop() {
                st.on_stack.remove(&w);
                let done = w == v;
                scc.push(w);
                if done {
                    break;
                }
            }
            st.sccs.push(scc);
        }
    }
    let mut st = St {
        edges,
        index: BTreeMap::new(),
        low: BTreeMap::new(),
        on_stack: BTreeSet::new(),
        stack: Vec::new(),
        counter: 0,
        sccs: Vec::new(),
    };
    for n in nodes {
        if !st.index.contains_key(n) {
            strongconnect(&mut st, n);
        }
    }
    let mut out = BTreeMap::new();
    let mut id = 0;
    for scc in st.sccs {
        let cyclic = scc.len() > 1
            || edges
                .get(&scc[0])
                .map(|s| s.contains(&scc[0]))
                .unwrap_or(false);
        if cyclic {
            for n in scc {
                out.insert(n, id);
            }
            id += 1;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Per-function verification conditions
// ---------------------------------------------------------------------------

struct FuncVcBuilder<'a> {
    tp: &'a TypedProgram,
    f: &'a FunctionDecl,
    fresh: Cell<u32>,
    sorts: BTreeMap<String, Sort>,
    next_id: u32,
    vcs: Vec<VerificationCondition>,
    /// Obligations already emitted; like asserts on a method path, each one
    /// is assumed by everything after it, so only the earliest failure on a
    /// chain reports.
    established: Vec<FormulaRef>,
}

impl<'a> FuncVcBuilder<'a> {
    fn cx(&self) -> TrCtx<'_> {
        TrCtx::new(self.tp, &self.f.name, &self.fresh)
    }

    fn typing_hyps(&self) -> Vec<FormulaRef> {
        let mut hyps = Vec::new();
        for p in &self.f.ins {
            let mut sink = Vec::new();
            if crate::typecheck::type_of_type_expr(&p.ty, &mut sink) == Type::Nat {
                hyps.push(f_cmp(CmpOp::Ge, t_var(p.name.clone()), t_int(0)));
            }
        }
        hyps
    }

    fn push(&mut self, hyps: Vec<FormulaRef>, ob: Oblig) {
        let id = self.next_id;
        self.next_id += 1;
        let mut hyps = hyps;
        hyps.extend(self.established.iter().cloned());
        self.established.push(ob.formula.clone());
        self.vcs.push(close_vc(
            &self.f.name,
            id,
            ob.kind,
            ob.span,
            ob.description,
            hyps,
            ob.formula,
            &self.sorts,
        ));
    }

    fn wf_of(&mut self, e: &Expr, hyps: Vec<FormulaRef>) {
        let mut sink = Vec::new();
        wf_expr(&self.cx(), &mut Vec::new(), e, f_true(), &mut sink);
        for ob in sink {
            self.push(hyps.clone(), ob);
        }
    }

    /// Termination: recursive calls in the body must strictly decrease the
    /// measure, which must be bounded below.
    fn termination_walk(
        &mut self,
        e: &Expr,
        ctx: FormulaRef,
        bound: &mut Vec<(String, String)>,
        scc: &BTreeMap<String, usize>,
        hyps: &[FormulaRef],
    ) {
        match &e.kind {
            ExprKind::Call(g, args) => {
                for a in args {
                    self.termination_walk(a, ctx.clone(), bound, scc, hyps);
                }
                let same_cycle = matches!(
                    (scc.get(&self.f.name), scc.get(g.as_str())),
                    (Some(a), Some(b)) if a == b
                );
                if !same_cycle {
                    return;
                }
                let Some(gd) = self.tp.program.function(g) else {
                    return;
                };
                let (Some(cd), Some(kd)) = (&self.f.decreases, &gd.decreases) else {
                    return;
                };
                let caller_d = tr_term(&self.cx(), bound, &ast::desugar_chains(cd));
                let var_map: BTreeMap<String, Arg> = gd
                    .ins
                    .iter()
                    .zip(args.iter())
                    .map(|(p, a)| (p.name.clone(), ir::tr_arg(&self.cx(), bound, a)))
                    .collect();
                let callee_cx = TrCtx {
                    tp: self.tp,
                    decl: &gd.name,
                    var_map,
                    fresh_bound: &self.fresh,
                };
                let callee_d = tr_term(&callee_cx, &mut Vec::new(), &ast::desugar_chains(kd));
                let goal = f_implies(
                    ctx,
                    f_and(vec![
                        f_cmp(CmpOp::Gt, caller_d.clone(), callee_d),
                        f_cmp(CmpOp::Ge, caller_d, t_int(0)),
                    ]),
                );
                let ob = Oblig {
                    formula: goal,
                    kind: ObligationKind::TerminationDecreases,
                    span: e.span.clone(),
                    description: format!("recursive call to '{g}' might not decrease"),
                };
                self.push(hyps.to_vec(), ob);
            }
            ExprKind::Binary(op, a, b) => {
                self.termination_walk(a, ctx.clone(), bound, scc, hyps);
                let rhs_ctx = match op {
                    BinOp::And | BinOp::Implies => f_and(vec![
                        ctx,
                        tr_formula(&self.cx(), bound, a),
                    ]),
                    BinOp::Or => f_and(vec![ctx, f_not(tr_formula(&self.cx(), bound, a))]),
                    _ => ctx,
                };
                self.termination_walk(b, rhs_ctx, bound, scc, hyps);
            }
            ExprKind::Unary(UnOp::Not, a) | ExprKind::Unary(UnOp::Neg, a) => {
                self.termination_walk(a, ctx, bound, scc, hyps)
            }
            ExprKind::Length(a) => self.termination_walk(a, ctx, bound, scc, hyps),
            ExprKind::Select(a, i) => {
                self.termination_walk(a, ctx.clone(), bound, scc, hyps);
                self.termination_walk(i, ctx, bound, scc, hyps);
            }
            ExprKind::Ite(c, t, e2) => {
                self.termination_walk(c, ctx.clone(), bound, scc, hyps);
                let cf = tr_formula(&self.cx(), bound, c);
                self.termination_walk(t, f_and(vec![ctx.clone(), cf.clone()]), bound, scc, hyps);
                self.termination_walk(e2, f_and(vec![ctx, f_not(cf)]), bound, scc, hyps);
            }
            ExprKind::Quantifier(_, x, body) => {
                let n = self.fresh.get();
                self.fresh.set(n + 1);
                bound.push((x.clone(), format!("{x}#{n}")));
                self.termination_walk(body, ctx, bound, scc, hyps);
                bound.pop();
            }
            _ => {}
        }
    }
}

fn function_vcs(
    tp: &TypedProgram,
    f: &FunctionDecl,
    scc: &BTreeMap<String, usize>,
) -> Vec<VerificationCondition> {
    let f = desugar_function(f);
    let mut sorts: BTreeMap<String, Sort> = BTreeMap::new();
    sorts.insert(ElemSort::Int.heap_var().into(), Sort::HeapInt);
    sorts.insert(ElemSort::Bool.heap_var().into(), Sort::HeapBool);
    for p in &f.ins {
        let mut sink = Vec::new();
        let ty = crate::typecheck::type_of_type_expr(&p.ty, &mut sink);
        sorts.insert(p.name.clone(), ir::sort_of_type(ty));
    }
    let mut b = FuncVcBuilder {
        tp,
        f: &f,
        fresh: Cell::new(0),
        sorts,
        next_id: 0,
        vcs: Vec::new(),
        established: Vec::new(),
    };

    // requires clauses are well-formed under their predecessors
    let mut hyps = b.typing_hyps();
    for r in &f.requires {
        b.wf_of(r, hyps.clone());
        hyps.push(tr_formula(&b.cx(), &mut Vec::new(), r));
    }
    // the body is well-formed under all requires
    b.wf_of(&f.body, hyps.clone());
    // a nat function must produce a non-negative value
    let mut sink = Vec::new();
    if crate::typecheck::type_of_type_expr(&f.return_type, &mut sink) == Type::Nat
        && tp.expr_type(&f.name, &f.body) == Type::Int
    {
        let body_t = tr_term(&b.cx(), &mut Vec::new(), &f.body);
        let ob = Oblig {
            formula: f_cmp(CmpOp::Ge, body_t, t_int(0)),
            kind: ObligationKind::NatNonNegative,
            span: f.body.span.clone(),
            description: "function result may be negative for declared nat".into(),
        };
        b.push(hyps.clone(), ob);
    }
    // postconditions of the function itself
    for e in &f.ensures {
        b.wf_of(e, hyps.clone());
        let goal = tr_formula(&b.cx(), &mut Vec::new(), e);
        let ob = Oblig {
            formula: goal,
            kind: ObligationKind::Postcondition,
            span: e.span.clone(),
            description: "postcondition might not hold".into(),
        };
        b.push(hyps.clone(), ob);
    }
    if let Some(d) = &f.decreases {
        b.wf_of(d, hyps.clone());
    }
    // termination of recursion
    let hyps_v = hyps.clone();
    b.termination_walk(&f.body.clone(), f_true(), &mut Vec::new(), scc, &hyps_v);

    b.vcs
}

fn desugar_function(f: &FunctionDecl) -> FunctionDecl {
    FunctionDecl {
        requires: f.requires.iter().map(ast::desugar_chains).collect(),
        ensures: f.ensures.iter().map(ast::desugar_chains).collect(),
        decreases: f.decreases.as_ref().map(ast::desugar_chains),
        body: ast::desugar_chains(&f.body),
        ..f.clone()
    }
}

// ---------------------------------------------------------------------------
// Whole-program generation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct UnitVcs {
    pub name: String,
    /// Present for methods; functions have no block graph.
    pub graph: Option<GuardedCommandGraph>,
    pub vcs: Vec<VerificationCondition>,
}

#[derive(Debug, Clone)]
pub struct VcGenOutput {
    pub units: Vec<UnitVcs>,
    pub diagnostics: Vec<Diagnostic>,
    pub method_sccs: BTreeMap<String, usize>,
    pub function_sccs: BTreeMap<String, usize>,
}

/// Lower every declaration and compute its verification conditions.
pub fn generate(tp: &TypedProgram) -> VcGenOutput {
    let mut diagnostics = Vec::new();

    // call graphs
    let mut fn_edges: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let fn_names: Vec<String> = tp.program.functions().map(|f| f.name.clone()).collect();
    for f in tp.program.functions() {
        let mut calls = BTreeSet::new();
        function_calls(&f.body, &mut calls);
        calls.retain(|c| tp.program.function(c).is_some());
        fn_edges.insert(f.name.clone(), calls);
    }
    let function_sccs = recursion_sccs(&fn_names, &fn_edges);

    let mut m_edges: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let m_names: Vec<String> = tp.program.methods().map(|m| m.name.clone()).collect();
    for m in tp.program.methods() {
        let mut calls = BTreeSet::new();
        method_calls(&m.body, &mut calls);
        calls.retain(|c| tp.program.method(c).is_some());
        m_edges.insert(m.name.clone(), calls);
    }
    let method_sccs = recursion_sccs(&m_names, &m_edges);

    // a recursive declaration needs an explicit measure
    for f in tp.program.functions() {
        if function_sccs.contains_key(&f.name) && f.decreases.is_none() {
            diagnostics.push(Diagnostic::error(
                f.name_span.clone(),
                Code::MissingDecreases,
                format!("recursive function '{}' needs a decreases clause", f.name),
            ));
        }
    }
    for m in tp.program.methods() {
        if method_sccs.contains_key(&m.name) && m.decreases.is_none() {
            diagnostics.push(Diagnostic::error(
                m.name_span.clone(),
                Code::MissingDecreases,
                format!("recursive method '{}' needs a decreases clause", m.name),
            ));
        }
    }

    let mut units = Vec::new();
    for d in tp.program.decls() {
        match d {
            ast::Decl::Method(m) => {
                let graph = lower_method(tp, m, &method_sccs);
                diagnostics.extend(graph.diagnostics.iter().cloned());
                let vcs = compute_wp(&graph);
                units.push(UnitVcs {
                    name: m.name.clone(),
                    graph: Some(graph),
                    vcs,
                });
            }
            ast::Decl::Function(f) => {
                let vcs = function_vcs(tp, f, &function_sccs);
                units.push(UnitVcs {
                    name: f.name.clone(),
                    graph: None,
                    vcs,
                });
            }
        }
    }

    VcGenOutput {
        units,
        diagnostics,
        method_sccs,
        function_sccs,
    }
}

/// `check_function_termination` from the module contract: the termination
/// conditions for one declaration, given the program's call graph.
pub fn check_function_termination(
    tp: &TypedProgram,
    name: &str,
) -> (Vec<VerificationCondition>, Vec<Diagnostic>) {
    let out = generate(tp);
    let vcs = out
        .units
        .into_iter()
        .filter(|u| u.name == name)
        .flat_map(|u| u.vcs)
        .filter(|vc| vc.kind == ObligationKind::TerminationDecreases)
        .collect();
    let diags = out
        .diagnostics
        .into_iter()
        .filter(|d| d.code == Code::MissingDecreases && d.message.contains(name))
        .collect();
    (vcs, diags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;
    use crate::typecheck::resolve_and_check;

    fn vcs_for(src: &str, unit: &str) -> Vec<VerificationCondition> {
        let tp = resolve_and_check(&parse("t.mdfy", src).unwrap()).unwrap();
        let out = generate(&tp);
        out.units
            .into_iter()
            .find(|u| u.name == unit)
            .map(|u| u.vcs)
            .unwrap_or_default()
    }

    #[test]
    fn substitution_identity() {
        // wp(totalFee := 2, totalFee > 0) = 2 > 0
        let vcs = vcs_for(
            "method M() returns (totalFee: int) ensures totalFee > 0; { totalFee := 2; }",
            "M",
        );
        assert_eq!(vcs.len(), 1);
        assert_eq!(vcs[0].goal.to_string(), "(2 > 0)");
    }

    #[test]
    fn fee_postcondition_vc_shape() {
        let vcs = vcs_for(
            "method CalculateEdiCastleVisitFee(numAdults: nat, numChildren: int) returns (totalFee: int)\n\
               requires numAdults >= 1;\n\
               ensures totalFee > 0;\n\
             { totalFee := numAdults * 10 + numChildren * 6; }",
            "CalculateEdiCastleVisitFee",
        );
        assert_eq!(vcs.len(), 1);
        let f = vcs[0].formula().to_string();
        assert!(f.contains("numAdults"), "{f}");
        assert!(f.contains("* 6"), "{f}");
        // int-typed numChildren: no numChildren >= 0 hypothesis anywhere
        assert!(!f.contains("numChildren >= 0"), "{f}");
    }

    #[test]
    fn nat_parameter_adds_typing_fact() {
        let vcs = vcs_for(
            "method M(numChildren: nat) returns (r: int) ensures r >= 0; { r := numChildren; }",
            "M",
        );
        let f = vcs[0].formula().to_string();
        assert!(f.contains("(numChildren >= 0)"), "{f}");
    }

    #[test]
    fn termination_vc_for_recursive_function() {
        let src = "function Fact(n: nat): nat decreases n; { if n == 0 then 1 else n * Fact(n - 1) }";
        let tp = resolve_and_check(&parse("t.mdfy", src).unwrap()).unwrap();
        let (vcs, diags) = check_function_termination(&tp, "Fact");
        assert!(diags.is_empty());
        assert_eq!(vcs.len(), 1);
        let f = vcs[0].formula().to_string();
        assert!(f.contains("(n > (n - 1))"), "{f}");
    }

    #[test]
    fn non_recursive_function_has_no_termination_vcs() {
        let src = "function method GetDiscountedFamilyTicket(isWeekday: bool): nat { if isWeekday then 22 else 27 }";
        let tp = resolve_and_check(&parse("t.mdfy", src).unwrap()).unwrap();
        let (vcs, diags) = check_function_termination(&tp, "GetDiscountedFamilyTicket");
        assert!(vcs.is_empty());
        assert!(diags.is_empty());
    }

    #[test]
    fn recursive_function_without_decreases_diagnosed() {
        let src = "function Fact(n: nat): nat { if n == 0 then 1 else n * Fact(n - 1) }";
        let tp = resolve_and_check(&parse("t.mdfy", src).unwrap()).unwrap();
        let out = generate(&tp);
        assert!(out
            .diagnostics
            .iter()
            .any(|d| d.code == Code::MissingDecreases));
    }

    #[test]
    fn inline_adds_definitional_hypothesis() {
        let src = "function method F(b: bool): nat { if b then 22 else 27 }\n\
                   method M() { assert F(false) == 27; }";
        let tp = resolve_and_check(&parse("t.mdfy", src).unwrap()).unwrap();
        let vcs = {
            let out = generate(&tp);
            out.units
                .into_iter()
                .find(|u| u.name == "M")
                .unwrap()
                .vcs
        };
        let vc = vcs
            .iter()
            .find(|vc| vc.kind == ObligationKind::AssertStmt)
            .unwrap();
        let inlined = inline_functions(&tp, &vc.formula(), 2);
        let s = inlined.to_string();
        assert!(s.contains("ite(false, 22, 27)"), "{s}");
        // fuel 0 leaves the call uninterpreted
        let bare = inline_functions(&tp, &vc.formula(), 0);
        assert!(!bare.to_string().contains("ite("), "{bare}");
    }

    #[test]
    fn vc_ids_are_stable() {
        let src = "method M(x: nat) returns (r: int) ensures r > 0; { assert x >= 0; r := x + 1; }";
        let a: Vec<String> = vcs_for(src, "M").iter().map(|v| v.id.clone()).collect();
        let b: Vec<String> = vcs_for(src, "M").iter().map(|v| v.id.clone()).collect();
        assert_eq!(a, b);
        assert!(a.iter().all(|id| id.starts_with("M.")));
    }
}
