//! Span-annotated AST for the contract language, plus a pretty-printer whose
//! output parses back to a structurally identical tree.

use crate::span::Span;
use num_bigint::BigInt;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct TypeExpr {
    pub kind: TypeExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TypeExprKind {
    Int,
    Nat,
    Bool,
    Array(Box<TypeExpr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
    Implies,
    Iff,
}

impl BinOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
            BinOp::Implies => "==>",
            BinOp::Iff => "<==>",
        }
    }
}

/// Comparison operators that may participate in a chain (`a <= b < c`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainOp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl ChainOp {
    pub fn to_binop(self) -> BinOp {
        match self {
            ChainOp::Lt => BinOp::Lt,
            ChainOp::Le => BinOp::Le,
            ChainOp::Gt => BinOp::Gt,
            ChainOp::Ge => BinOp::Ge,
        }
    }

    /// Chains must keep a single direction; `<`/`<=` are ascending.
    pub fn ascending(self) -> bool {
        matches!(self, ChainOp::Lt | ChainOp::Le)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantKind {
    Forall,
    Exists,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    IntLit(BigInt),
    BoolLit(bool),
    NullLit,
    Var(String),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Unary(UnOp, Box<Expr>),
    /// `operands.len() == ops.len() + 1`, `ops.len() >= 2`; desugars to a
    /// conjunction of adjacent comparisons.
    Chain(Vec<Expr>, Vec<ChainOp>),
    /// `a[i]`
    Select(Box<Expr>, Box<Expr>),
    /// `a.Length`
    Length(Box<Expr>),
    /// `if c then t else e`
    Ite(Box<Expr>, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
    /// `forall x :: body` / `exists x :: body`; the bound variable is `int`.
    Quantifier(QuantKind, String, Box<Expr>),
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Lhs {
    Var {
        name: String,
        span: Span,
    },
    /// `a[i] := …` — the array side is restricted to an identifier.
    Index {
        array: String,
        array_span: Span,
        index: Expr,
    },
}

impl Lhs {
    pub fn span(&self) -> Span {
        match self {
            Lhs::Var { span, .. } => span.clone(),
            Lhs::Index {
                array_span, index, ..
            } => array_span.merge(&index.span),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    VarDecl {
        name: String,
        ty: Option<TypeExpr>,
        init: Option<Expr>,
        ghost: bool,
    },
    Assign {
        lhs: Lhs,
        rhs: Expr,
    },
    /// `x, y := M(args);` — also the resolved form of `x := M(args);` when
    /// `M` names a method.
    Call {
        lhss: Vec<(String, Span)>,
        method: String,
        args: Vec<Expr>,
    },
    If {
        cond: Expr,
        then_block: Block,
        else_block: Option<Block>,
    },
    While {
        guard: Expr,
        invariants: Vec<Expr>,
        decreases: Option<Expr>,
        body: Block,
    },
    Assert(Expr),
    Break,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub ty: TypeExpr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodDecl {
    pub name: String,
    pub name_span: Span,
    pub ins: Vec<Param>,
    pub outs: Vec<Param>,
    pub requires: Vec<Expr>,
    pub modifies: Vec<(String, Span)>,
    pub ensures: Vec<Expr>,
    pub decreases: Option<Expr>,
    /// `reads` on a method is accepted, warned about, and ignored.
    pub reads: Vec<(String, Span)>,
    pub body: Block,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDecl {
    pub name: String,
    pub name_span: Span,
    pub ins: Vec<Param>,
    pub return_type: TypeExpr,
    pub requires: Vec<Expr>,
    pub reads: Vec<(String, Span)>,
    pub ensures: Vec<Expr>,
    pub decreases: Option<Expr>,
    /// Exactly one expression.
    pub body: Expr,
    pub is_function_method: bool,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decl {
    Method(MethodDecl),
    Function(FunctionDecl),
}

impl Decl {
    pub fn name(&self) -> &str {
        match self {
            Decl::Method(m) => &m.name,
            Decl::Function(f) => &f.name,
        }
    }

    pub fn name_span(&self) -> &Span {
        match self {
            Decl::Method(m) => &m.name_span,
            Decl::Function(f) => &f.name_span,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDecl {
    pub name: String,
    pub name_span: Span,
    pub members: Vec<Decl>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Class(ClassDecl),
    Decl(Decl),
}

/// A parsed compilation unit. Classes are namespaces only; all declarations
/// live in one program-wide scope.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Program {
    pub items: Vec<Item>,
}

impl Program {
    /// All method/function declarations in source order, flattening classes.
    pub fn decls(&self) -> impl Iterator<Item = &Decl> {
        self.items.iter().flat_map(|item| match item {
            Item::Class(c) => c.members.iter().collect::<Vec<_>>(),
            Item::Decl(d) => vec![d],
        })
    }

    pub fn methods(&self) -> impl Iterator<Item = &MethodDecl> {
        self.decls().filter_map(|d| match d {
            Decl::Method(m) => Some(m),
            _ => None,
        })
    }

    pub fn functions(&self) -> impl Iterator<Item = &FunctionDecl> {
        self.decls().filter_map(|d| match d {
            Decl::Function(f) => Some(f),
            _ => None,
        })
    }

    pub fn function(&self, name: &str) -> Option<&FunctionDecl> {
        self.functions().find(|f| f.name == name)
    }

    pub fn method(&self, name: &str) -> Option<&MethodDecl> {
        self.methods().find(|m| m.name == name)
    }
}

/// Replace every `Chain` node by the conjunction of its adjacent
/// comparisons: `a <= b < c` becomes `a <= b && b < c`.
pub fn desugar_chains(expr: &Expr) -> Expr {
    let span = expr.span.clone();
    let kind = match &expr.kind {
        ExprKind::Chain(operands, ops) => {
            let operands: Vec<Expr> = operands.iter().map(desugar_chains).collect();
            let mut conj: Option<Expr> = None;
            for (i, op) in ops.iter().enumerate() {
                let cmp = Expr::new(
                    ExprKind::Binary(
                        op.to_binop(),
                        Box::new(operands[i].clone()),
                        Box::new(operands[i + 1].clone()),
                    ),
                    operands[i].span.merge(&operands[i + 1].span),
                );
                conj = Some(match conj {
                    None => cmp,
                    Some(left) => {
                        let sp = left.span.merge(&cmp.span);
                        Expr::new(ExprKind::Binary(BinOp::And, Box::new(left), Box::new(cmp)), sp)
                    }
                });
            }
            return conj.expect("chain has at least two comparisons");
        }
        ExprKind::Binary(op, a, b) => ExprKind::Binary(
            *op,
            Box::new(desugar_chains(a)),
            Box::new(desugar_chains(b)),
        ),
        ExprKind::Unary(op, a) => ExprKind::Unary(*op, Box::new(desugar_chains(a))),
        ExprKind::Select(a, i) => {
            ExprKind::Select(Box::new(desugar_chains(a)), Box::new(desugar_chains(i)))
        }
        ExprKind::Length(a) => ExprKind::Length(Box::new(desugar_chains(a))),
        ExprKind::Ite(c, t, e) => ExprKind::Ite(
            Box::new(desugar_chains(c)),
            Box::new(desugar_chains(t)),
            Box::new(desugar_chains(e)),
        ),
        ExprKind::Call(f, args) => {
            ExprKind::Call(f.clone(), args.iter().map(desugar_chains).collect())
        }
        ExprKind::Quantifier(q, x, body) => {
            ExprKind::Quantifier(*q, x.clone(), Box::new(desugar_chains(body)))
        }
        k => k.clone(),
    };
    Expr::new(kind, span)
}

/// Clone `p` with all spans replaced by a synthetic one, so trees can be
/// compared structurally.
pub fn normalize_spans(p: &Program) -> Program {
    struct N;
    impl N {
        fn ty(&self, t: &TypeExpr) -> TypeExpr {
            TypeExpr {
                kind: match &t.kind {
                    TypeExprKind::Array(e) => TypeExprKind::Array(Box::new(self.ty(e))),
                    k => k.clone(),
                },
                span: Span::synthetic(),
            }
        }
        fn expr(&self, e: &Expr) -> Expr {
            let kind = match &e.kind {
                ExprKind::Binary(op, a, b) => {
                    ExprKind::Binary(*op, Box::new(self.expr(a)), Box::new(self.expr(b)))
                }
                ExprKind::Unary(op, a) => ExprKind::Unary(*op, Box::new(self.expr(a))),
                ExprKind::Chain(os, ops) => {
                    ExprKind::Chain(os.iter().map(|o| self.expr(o)).collect(), ops.clone())
                }
                ExprKind::Select(a, i) => {
                    ExprKind::Select(Box::new(self.expr(a)), Box::new(self.expr(i)))
                }
                ExprKind::Length(a) => ExprKind::Length(Box::new(self.expr(a))),
                ExprKind::Ite(c, t, e2) => ExprKind::Ite(
                    Box::new(self.expr(c)),
                    Box::new(self.expr(t)),
                    Box::new(self.expr(e2)),
                ),
                ExprKind::Call(f, args) => {
                    ExprKind::Call(f.clone(), args.iter().map(|a| self.expr(a)).collect())
                }
                ExprKind::Quantifier(q, x, b) => {
                    ExprKind::Quantifier(*q, x.clone(), Box::new(self.expr(b)))
                }
                k => k.clone(),
            };
            Expr::new(kind, Span::synthetic())
        }
        fn block(&self, b: &Block) -> Block {
            Block {
                stmts: b.stmts.iter().map(|s| self.stmt(s)).collect(),
                span: Span::synthetic(),
            }
        }
        fn stmt(&self, s: &Stmt) -> Stmt {
            let kind = match &s.kind {
                StmtKind::VarDecl {
                    name,
                    ty,
                    init,
                    ghost,
                } => StmtKind::VarDecl {
                    name: name.clone(),
                    ty: ty.as_ref().map(|t| self.ty(t)),
                    init: init.as_ref().map(|e| self.expr(e)),
                    ghost: *ghost,
                },
                StmtKind::Assign { lhs, rhs } => StmtKind::Assign {
                    lhs: match lhs {
                        Lhs::Var { name, .. } => Lhs::Var {
                            name: name.clone(),
                            span: Span::synthetic(),
                        },
                        Lhs::Index { array, index, .. } => Lhs::Index {
                            array: array.clone(),
                            array_span: Span::synthetic(),
                            index: self.expr(index),
                        },
                    },
                    rhs: self.expr(rhs),
                },
                StmtKind::Call { lhss, method, args } => StmtKind::Call {
                    lhss: lhss
                        .iter()
                        .map(|(n, _)| (n.clone(), Span::synthetic()))
                        .collect(),
                    method: method.clone(),
                    args: args.iter().map(|a| self.expr(a)).collect(),
                },
                StmtKind::If {
                    cond,
                    then_block,
                    else_block,
                } => StmtKind::If {
                    cond: self.expr(cond),
                    then_block: self.block(then_block),
                    else_block: else_block.as_ref().map(|b| self.block(b)),
                },
                StmtKind::While {
                    guard,
                    invariants,
                    decreases,
                    body,
                } => StmtKind::While {
                    guard: self.expr(guard),
                    invariants: invariants.iter().map(|e| self.expr(e)).collect(),
                    decreases: decreases.as_ref().map(|e| self.expr(e)),
                    body: self.block(body),
                },
                StmtKind::Assert(e) => StmtKind::Assert(self.expr(e)),
                StmtKind::Break => StmtKind::Break,
            };
            Stmt {
                kind,
                span: Span::synthetic(),
            }
        }
        fn decl(&self, d: &Decl) -> Decl {
            match d {
                Decl::Method(m) => Decl::Method(MethodDecl {
                    name: m.name.clone(),
                    name_span: Span::synthetic(),
                    ins: m.ins.iter().map(|p| self.param(p)).collect(),
                    outs: m.outs.iter().map(|p| self.param(p)).collect(),
                    requires: m.requires.iter().map(|e| self.expr(e)).collect(),
                    modifies: m
                        .modifies
                        .iter()
                        .map(|(n, _)| (n.clone(), Span::synthetic()))
                        .collect(),
                    ensures: m.ensures.iter().map(|e| self.expr(e)).collect(),
                    decreases: m.decreases.as_ref().map(|e| self.expr(e)),
                    reads: m
                        .reads
                        .iter()
                        .map(|(n, _)| (n.clone(), Span::synthetic()))
                        .collect(),
                    body: self.block(&m.body),
                    span: Span::synthetic(),
                }),
                Decl::Function(f) => Decl::Function(FunctionDecl {
                    name: f.name.clone(),
                    name_span: Span::synthetic(),
                    ins: f.ins.iter().map(|p| self.param(p)).collect(),
                    return_type: self.ty(&f.return_type),
                    requires: f.requires.iter().map(|e| self.expr(e)).collect(),
                    reads: f
                        .reads
                        .iter()
                        .map(|(n, _)| (n.clone(), Span::synthetic()))
                        .collect(),
                    ensures: f.ensures.iter().map(|e| self.expr(e)).collect(),
                    decreases: f.decreases.as_ref().map(|e| self.expr(e)),
                    body: self.expr(&f.body),
                    is_function_method: f.is_function_method,
                    span: Span::synthetic(),
                }),
            }
        }
        fn param(&self, p: &Param) -> Param {
            Param {
                name: p.name.clone(),
                ty: self.ty(&p.ty),
                span: Span::synthetic(),
            }
        }
    }
    let n = N;
    Program {
        items: p
            .items
            .iter()
            .map(|item| match item {
                Item::Class(c) => Item::Class(ClassDecl {
                    name: c.name.clone(),
                    name_span: Span::synthetic(),
                    members: c.members.iter().map(|d| n.decl(d)).collect(),
                    span: Span::synthetic(),
                }),
                Item::Decl(d) => Item::Decl(n.decl(d)),
            })
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// Pretty-printing
// ---------------------------------------------------------------------------

fn binop_prec(op: BinOp) -> u8 {
    match op {
        BinOp::Iff => 1,
        BinOp::Implies => 2,
        BinOp::Or => 3,
        BinOp::And => 4,
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne => 5,
        BinOp::Add | BinOp::Sub => 6,
        BinOp::Mul | BinOp::Div | BinOp::Mod => 7,
    }
}

fn print_expr(e: &Expr, parent_prec: u8, out: &mut String) {
    match &e.kind {
        ExprKind::IntLit(n) => {
            let _ = write!(out, "{n}");
        }
        ExprKind::BoolLit(b) => {
            let _ = write!(out, "{b}");
        }
        ExprKind::NullLit => out.push_str("null"),
        ExprKind::Var(x) => out.push_str(x),
        ExprKind::Binary(op, a, b) => {
            let prec = binop_prec(*op);
            let paren = prec < parent_prec
                // comparisons do not associate; parenthesize nested ones
                || (prec == 5 && parent_prec == 5);
            if paren {
                out.push('(');
            }
            // left-associative chains reuse the same precedence on the left;
            // right operand gets prec+1 so `a - (b - c)` keeps its parens
            let (lp, rp) = match op {
                BinOp::Implies => (prec + 1, prec), // right-assoc
                _ => (prec, prec + 1),
            };
            print_expr(a, lp, out);
            let _ = write!(out, " {} ", op.symbol());
            print_expr(b, rp, out);
            if paren {
                out.push(')');
            }
        }
        ExprKind::Unary(op, a) => {
            if parent_prec > 8 {
                out.push('(');
            }
            out.push_str(match op {
                UnOp::Not => "!",
                UnOp::Neg => "-",
            });
            print_expr(a, 8, out);
            if parent_prec > 8 {
                out.push(')');
            }
        }
        ExprKind::Chain(operands, ops) => {
            let paren = parent_prec >= 5;
            if paren {
                out.push('(');
            }
            print_expr(&operands[0], 6, out);
            for (i, op) in ops.iter().enumerate() {
                let _ = write!(out, " {} ", op.to_binop().symbol());
                print_expr(&operands[i + 1], 6, out);
            }
            if paren {
                out.push(')');
            }
        }
        ExprKind::Select(a, i) => {
            print_expr(a, 9, out);
            out.push('[');
            print_expr(i, 0, out);
            out.push(']');
        }
        ExprKind::Length(a) => {
            print_expr(a, 9, out);
            out.push_str(".Length");
        }
        ExprKind::Ite(c, t, e2) => {
            if parent_prec > 0 {
                out.push('(');
            }
            out.push_str("if ");
            print_expr(c, 1, out);
            out.push_str(" then ");
            print_expr(t, 1, out);
            out.push_str(" else ");
            print_expr(e2, 0, out);
            if parent_prec > 0 {
                out.push(')');
            }
        }
        ExprKind::Call(f, args) => {
            out.push_str(f);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                print_expr(a, 0, out);
            }
            out.push(')');
        }
        ExprKind::Quantifier(q, x, body) => {
            if parent_prec > 0 {
                out.push('(');
            }
            out.push_str(match q {
                QuantKind::Forall => "forall ",
                QuantKind::Exists => "exists ",
            });
            out.push_str(x);
            out.push_str(" :: ");
            print_expr(body, 0, out);
            if parent_prec > 0 {
                out.push(')');
            }
        }
    }
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    print_expr(e, 0, &mut s);
    s
}

fn print_type(t: &TypeExpr, out: &mut String) {
    match &t.kind {
        TypeExprKind::Int => out.push_str("int"),
        TypeExprKind::Nat => out.push_str("nat"),
        TypeExprKind::Bool => out.push_str("bool"),
        TypeExprKind::Array(e) => {
            out.push_str("array<");
            print_type(e, out);
            out.push('>');
        }
    }
}

pub fn type_to_string(t: &TypeExpr) -> String {
    let mut s = String::new();
    print_type(t, &mut s);
    s
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("    ");
    }
}

fn print_block(b: &Block, level: usize, out: &mut String) {
    out.push_str("{\n");
    for s in &b.stmts {
        print_stmt(s, level + 1, out);
    }
    indent(out, level);
    out.push_str("}\n");
}

fn print_stmt(s: &Stmt, level: usize, out: &mut String) {
    indent(out, level);
    match &s.kind {
        StmtKind::VarDecl {
            name,
            ty,
            init,
            ghost,
        } => {
            if *ghost {
                out.push_str("ghost ");
            }
            let _ = write!(out, "var {name}");
            if let Some(t) = ty {
                out.push_str(": ");
                print_type(t, out);
            }
            if let Some(e) = init {
                out.push_str(" := ");
                print_expr(e, 0, out);
            }
            out.push_str(";\n");
        }
        StmtKind::Assign { lhs, rhs } => {
            match lhs {
                Lhs::Var { name, .. } => out.push_str(name),
                Lhs::Index { array, index, .. } => {
                    out.push_str(array);
                    out.push('[');
                    print_expr(index, 0, out);
                    out.push(']');
                }
            }
            out.push_str(" := ");
            print_expr(rhs, 0, out);
            out.push_str(";\n");
        }
        StmtKind::Call { lhss, method, args } => {
            for (i, (n, _)) in lhss.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(n);
            }
            if !lhss.is_empty() {
                out.push_str(" := ");
            }
            out.push_str(method);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                print_expr(a, 0, out);
            }
            out.push_str(");\n");
        }
        StmtKind::If {
            cond,
            then_block,
            else_block,
        } => {
            out.push_str("if (");
            print_expr(cond, 0, out);
            out.push_str(") ");
            print_block(then_block, level, out);
            if let Some(e) = else_block {
                indent(out, level);
                out.push_str("else ");
                print_block(e, level, out);
            }
        }
        StmtKind::While {
            guard,
            invariants,
            decreases,
            body,
        } => {
            out.push_str("while (");
            print_expr(guard, 0, out);
            out.push_str(")\n");
            for inv in invariants {
                indent(out, level + 1);
                out.push_str("invariant ");
                print_expr(inv, 0, out);
                out.push_str(";\n");
            }
            if let Some(d) = decreases {
                indent(out, level + 1);
                out.push_str("decreases ");
                print_expr(d, 0, out);
                out.push_str(";\n");
            }
            indent(out, level);
            print_block(body, level, out);
        }
        StmtKind::Assert(e) => {
            out.push_str("assert ");
            print_expr(e, 0, out);
            out.push_str(";\n");
        }
        StmtKind::Break => out.push_str("break;\n"),
    }
}

fn print_params(params: &[Param], out: &mut String) {
    for (i, p) in params.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&p.name);
        out.push_str(": ");
        print_type(&p.ty, out);
    }
}

fn print_decl(d: &Decl, level: usize, out: &mut String) {
    match d {
        Decl::Method(m) => {
            indent(out, level);
            let _ = write!(out, "method {}(", m.name);
            print_params(&m.ins, out);
            out.push(')');
            if !m.outs.is_empty() {
                out.push_str(" returns (");
                print_params(&m.outs, out);
                out.push(')');
            }
            out.push('\n');
            for r in &m.requires {
                indent(out, level + 1);
                out.push_str("requires ");
                print_expr(r, 0, out);
                out.push_str(";\n");
            }
            if !m.modifies.is_empty() {
                indent(out, level + 1);
                out.push_str("modifies ");
                for (i, (n, _)) in m.modifies.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    out.push_str(n);
                }
                out.push_str(";\n");
            }
            for (i, (n, _)) in m.reads.iter().enumerate() {
                if i == 0 {
                    indent(out, level + 1);
                    out.push_str("reads ");
                } else {
                    out.push_str(", ");
                }
                out.push_str(n);
                if i + 1 == m.reads.len() {
                    out.push_str(";\n");
                }
            }
            for e in &m.ensures {
                indent(out, level + 1);
                out.push_str("ensures ");
                print_expr(e, 0, out);
                out.push_str(";\n");
            }
            if let Some(dec) = &m.decreases {
                indent(out, level + 1);
                out.push_str("decreases ");
                print_expr(dec, 0, out);
                out.push_str(";\n");
            }
            indent(out, level);
            print_block(&m.body, level, out);
        }
        Decl::Function(f) => {
            indent(out, level);
            let _ = write!(
                out,
                "function{} {}(",
                if f.is_function_method { " method" } else { "" },
                f.name
            );
            print_params(&f.ins, out);
            out.push_str("): ");
            print_type(&f.return_type, out);
            out.push('\n');
            for r in &f.requires {
                indent(out, level + 1);
                out.push_str("requires ");
                print_expr(r, 0, out);
                out.push_str(";\n");
            }
            if !f.reads.is_empty() {
                indent(out, level + 1);
                out.push_str("reads ");
                for (i, (n, _)) in f.reads.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    out.push_str(n);
                }
                out.push_str(";\n");
            }
            for e in &f.ensures {
                indent(out, level + 1);
                out.push_str("ensures ");
                print_expr(e, 0, out);
                out.push_str(";\n");
            }
            if let Some(dec) = &f.decreases {
                indent(out, level + 1);
                out.push_str("decreases ");
                print_expr(dec, 0, out);
                out.push_str(";\n");
            }
            indent(out, level);
            out.push_str("{\n");
            indent(out, level + 1);
            print_expr(&f.body, 0, out);
            out.push('\n');
            indent(out, level);
            out.push_str("}\n");
        }
    }
}

/// Render a program back to surface syntax that parses to the same tree.
pub fn program_to_string(p: &Program) -> String {
    let mut out = String::new();
    for item in &p.items {
        match item {
            Item::Class(c) => {
                let _ = write!(out, "class {} {{\n", c.name);
                for (i, d) in c.members.iter().enumerate() {
                    if i > 0 {
                        out.push('\n');
                    }
                    print_decl(d, 1, &mut out);
                }
                out.push_str("}\n");
            }
            Item::Decl(d) => print_decl(d, 0, &mut out),
        }
        out.push('\n');
    }
    out
}
