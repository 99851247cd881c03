//! Sorted first-order terms and formulas.
//!
//! Sorts are `Int`, `Bool`, and `Ref` (array references with a distinguished
//! `null`), plus one heap map per element sort and an immutable length map.
//! Quantifiers range over `Int` only. Formulas are shared via `Rc`;
//! substitution rebuilds only the paths it touches.

use num_bigint::BigInt;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::rc::Rc;

pub type TermRef = Rc<Term>;
pub type FormulaRef = Rc<Formula>;
pub type HeapRef = Rc<HeapExpr>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Sort {
    Int,
    Bool,
    Ref,
    HeapInt,
    HeapBool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ElemSort {
    Int,
    Bool,
}

impl ElemSort {
    /// Name of the base heap variable for this element sort.
    pub fn heap_var(&self) -> &'static str {
        match self {
            ElemSort::Int => "$heap",
            ElemSort::Bool => "$heapb",
        }
    }

    pub fn heap_sort(&self) -> Sort {
        match self {
            ElemSort::Int => Sort::HeapInt,
            ElemSort::Bool => Sort::HeapBool,
        }
    }
}

/// A heap-sorted expression: a heap variable or a store chain over one.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum HeapExpr {
    Var(String),
    Store {
        heap: HeapRef,
        array: TermRef,
        index: TermRef,
        value: Arg,
    },
}

/// An argument of either term or formula sort (for applications, stores and
/// substitutions).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arg {
    T(TermRef),
    F(FormulaRef),
    H(ElemSort, HeapRef),
}

/// `Int`- or `Ref`-sorted terms. `Bool` positions are [`Formula`]s.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    IntLit(BigInt),
    /// Int- or Ref-sorted variable; the sort lives in the symbol table.
    Var(String),
    Null,
    Neg(TermRef),
    Add(TermRef, TermRef),
    Sub(TermRef, TermRef),
    Mul(TermRef, TermRef),
    /// Euclidean division / remainder (remainder is always non-negative).
    Div(TermRef, TermRef),
    Mod(TermRef, TermRef),
    /// Element read from the int-element heap.
    Select(HeapRef, TermRef, TermRef),
    Length(TermRef),
    Ite(FormulaRef, TermRef, TermRef),
    /// Uninterpreted application of a program function with Int or Ref result.
    Apply(String, Vec<Arg>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    Bool(bool),
    BoolVar(String),
    Cmp(CmpOp, TermRef, TermRef),
    /// Equality of Ref-sorted terms.
    RefEq(TermRef, TermRef),
    /// Element read from the bool-element heap.
    SelectBool(HeapRef, TermRef, TermRef),
    ApplyBool(String, Vec<Arg>),
    Not(FormulaRef),
    And(Vec<FormulaRef>),
    Or(Vec<FormulaRef>),
    Implies(FormulaRef, FormulaRef),
    Iff(FormulaRef, FormulaRef),
    Forall(String, FormulaRef),
    Exists(String, FormulaRef),
}

// -- constructors with light simplification ---------------------------------

pub fn t_int(n: i64) -> TermRef {
    Rc::new(Term::IntLit(BigInt::from(n)))
}

pub fn t_bigint(n: BigInt) -> TermRef {
    Rc::new(Term::IntLit(n))
}

pub fn t_var(name: impl Into<String>) -> TermRef {
    Rc::new(Term::Var(name.into()))
}

pub fn t_null() -> TermRef {
    Rc::new(Term::Null)
}

pub fn t_add(a: TermRef, b: TermRef) -> TermRef {
    Rc::new(Term::Add(a, b))
}

pub fn t_sub(a: TermRef, b: TermRef) -> TermRef {
    Rc::new(Term::Sub(a, b))
}

pub fn t_length(a: TermRef) -> TermRef {
    Rc::new(Term::Length(a))
}

pub fn f_bool(b: bool) -> FormulaRef {
    Rc::new(Formula::Bool(b))
}

pub fn f_true() -> FormulaRef {
    f_bool(true)
}

pub fn f_false() -> FormulaRef {
    f_bool(false)
}

pub fn f_boolvar(name: impl Into<String>) -> FormulaRef {
    Rc::new(Formula::BoolVar(name.into()))
}

pub fn f_cmp(op: CmpOp, a: TermRef, b: TermRef) -> FormulaRef {
    Rc::new(Formula::Cmp(op, a, b))
}

pub fn f_ref_eq(a: TermRef, b: TermRef) -> FormulaRef {
    Rc::new(Formula::RefEq(a, b))
}

pub fn f_not(f: FormulaRef) -> FormulaRef {
    match &*f {
        Formula::Bool(b) => f_bool(!b),
        Formula::Not(inner) => inner.clone(),
        _ => Rc::new(Formula::Not(f)),
    }
}

pub fn f_and(fs: Vec<FormulaRef>) -> FormulaRef {
    let mut out = Vec::new();
    for f in fs {
        match &*f {
            Formula::Bool(true) => {}
            Formula::Bool(false) => return f_false(),
            Formula::And(inner) => out.extend(inner.iter().cloned()),
            _ => out.push(f),
        }
    }
    match out.len() {
        0 => f_true(),
        1 => out.pop().unwrap(),
        _ => Rc::new(Formula::And(out)),
    }
}

pub fn f_or(fs: Vec<FormulaRef>) -> FormulaRef {
    let mut out = Vec::new();
    for f in fs {
        match &*f {
            Formula::Bool(false) => {}
            Formula::Bool(true) => return f_true(),
            Formula::Or(inner) => out.extend(inner.iter().cloned()),
            _ => out.push(f),
        }
    }
    match out.len() {
        0 => f_false(),
        1 => out.pop().unwrap(),
        _ => Rc::new(Formula::Or(out)),
    }
}

pub fn f_implies(p: FormulaRef, q: FormulaRef) -> FormulaRef {
    match (&*p, &*q) {
        (Formula::Bool(true), _) => q.clone(),
        (Formula::Bool(false), _) => f_true(),
        (_, Formula::Bool(true)) => f_true(),
        (_, Formula::Bool(false)) => f_not(p.clone()),
        _ => Rc::new(Formula::Implies(p, q)),
    }
}

pub fn f_iff(p: FormulaRef, q: FormulaRef) -> FormulaRef {
    Rc::new(Formula::Iff(p, q))
}

pub fn f_forall(x: impl Into<String>, body: FormulaRef) -> FormulaRef {
    if matches!(&*body, Formula::Bool(_)) {
        return body;
    }
    Rc::new(Formula::Forall(x.into(), body))
}

pub fn f_exists(x: impl Into<String>, body: FormulaRef) -> FormulaRef {
    if matches!(&*body, Formula::Bool(_)) {
        return body;
    }
    Rc::new(Formula::Exists(x.into(), body))
}

/// Bool-sorted if-then-else, lowered to a disjunction at construction.
pub fn f_ite(c: FormulaRef, t: FormulaRef, e: FormulaRef) -> FormulaRef {
    f_or(vec![
        f_and(vec![c.clone(), t]),
        f_and(vec![f_not(c), e]),
    ])
}

// -- substitution ------------------------------------------------------------

/// A parallel substitution of variables by terms/formulas/heaps.
#[derive(Debug, Clone, Default)]
pub struct Subst {
    pub map: BTreeMap<String, Arg>,
}

impl Subst {
    pub fn one(name: impl Into<String>, value: Arg) -> Self {
        let mut map = BTreeMap::new();
        map.insert(name.into(), value);
        Subst { map }
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

pub fn subst_term(t: &TermRef, s: &Subst) -> TermRef {
    if s.is_empty() {
        return t.clone();
    }
    match &**t {
        Term::IntLit(_) | Term::Null => t.clone(),
        Term::Var(x) => match s.map.get(x) {
            Some(Arg::T(rep)) => rep.clone(),
            Some(_) => panic!("ill-sorted substitution for term variable {x}"),
            None => t.clone(),
        },
        Term::Neg(a) => Rc::new(Term::Neg(subst_term(a, s))),
        Term::Add(a, b) => Rc::new(Term::Add(subst_term(a, s), subst_term(b, s))),
        Term::Sub(a, b) => Rc::new(Term::Sub(subst_term(a, s), subst_term(b, s))),
        Term::Mul(a, b) => Rc::new(Term::Mul(subst_term(a, s), subst_term(b, s))),
        Term::Div(a, b) => Rc::new(Term::Div(subst_term(a, s), subst_term(b, s))),
        Term::Mod(a, b) => Rc::new(Term::Mod(subst_term(a, s), subst_term(b, s))),
        Term::Select(h, a, i) => Rc::new(Term::Select(
            subst_heap(h, s),
            subst_term(a, s),
            subst_term(i, s),
        )),
        Term::Length(a) => Rc::new(Term::Length(subst_term(a, s))),
        Term::Ite(c, a, b) => Rc::new(Term::Ite(
            subst_formula(c, s),
            subst_term(a, s),
            subst_term(b, s),
        )),
        Term::Apply(f, args) => Rc::new(Term::Apply(
            f.clone(),
            args.iter().map(|a| subst_arg(a, s)).collect(),
        )),
    }
}

pub fn subst_heap(h: &HeapRef, s: &Subst) -> HeapRef {
    if s.is_empty() {
        return h.clone();
    }
    match &**h {
        HeapExpr::Var(x) => match s.map.get(x) {
            Some(Arg::H(_, rep)) => rep.clone(),
            Some(_) => panic!("ill-sorted substitution for heap variable {x}"),
            None => h.clone(),
        },
        HeapExpr::Store {
            heap,
            array,
            index,
            value,
        } => Rc::new(HeapExpr::Store {
            heap: subst_heap(heap, s),
            array: subst_term(array, s),
            index: subst_term(index, s),
            value: subst_arg(value, s),
        }),
    }
}

pub fn subst_arg(a: &Arg, s: &Subst) -> Arg {
    match a {
        Arg::T(t) => Arg::T(subst_term(t, s)),
        Arg::F(f) => Arg::F(subst_formula(f, s)),
        Arg::H(es, h) => Arg::H(*es, subst_heap(h, s)),
    }
}

pub fn subst_formula(f: &FormulaRef, s: &Subst) -> FormulaRef {
    if s.is_empty() {
        return f.clone();
    }
    match &**f {
        Formula::Bool(_) => f.clone(),
        Formula::BoolVar(x) => match s.map.get(x) {
            Some(Arg::F(rep)) => rep.clone(),
            Some(_) => panic!("ill-sorted substitution for bool variable {x}"),
            None => f.clone(),
        },
        Formula::Cmp(op, a, b) => f_cmp(*op, subst_term(a, s), subst_term(b, s)),
        Formula::RefEq(a, b) => Rc::new(Formula::RefEq(subst_term(a, s), subst_term(b, s))),
        Formula::SelectBool(h, a, i) => Rc::new(Formula::SelectBool(
            subst_heap(h, s),
            subst_term(a, s),
            subst_term(i, s),
        )),
        Formula::ApplyBool(name, args) => Rc::new(Formula::ApplyBool(
            name.clone(),
            args.iter().map(|a| subst_arg(a, s)).collect(),
        )),
        Formula::Not(a) => f_not(subst_formula(a, s)),
        Formula::And(fs) => f_and(fs.iter().map(|g| subst_formula(g, s)).collect()),
        Formula::Or(fs) => f_or(fs.iter().map(|g| subst_formula(g, s)).collect()),
        Formula::Implies(p, q) => f_implies(subst_formula(p, s), subst_formula(q, s)),
        Formula::Iff(p, q) => f_iff(subst_formula(p, s), subst_formula(q, s)),
        Formula::Forall(x, body) => {
            // bound variables are uniquely named at construction; drop any
            // colliding mapping defensively
            if s.map.contains_key(x) {
                let mut s2 = s.clone();
                s2.map.remove(x);
                Rc::new(Formula::Forall(x.clone(), subst_formula(body, &s2)))
            } else {
                Rc::new(Formula::Forall(x.clone(), subst_formula(body, s)))
            }
        }
        Formula::Exists(x, body) => {
            if s.map.contains_key(x) {
                let mut s2 = s.clone();
                s2.map.remove(x);
                Rc::new(Formula::Exists(x.clone(), subst_formula(body, &s2)))
            } else {
                Rc::new(Formula::Exists(x.clone(), subst_formula(body, s)))
            }
        }
    }
}

// -- free variables ----------------------------------------------------------

#[derive(Debug, Default, Clone)]
pub struct FreeVars {
    /// Int- or Ref-sorted term variables.
    pub terms: BTreeSet<String>,
    pub bools: BTreeSet<String>,
    pub heaps: BTreeSet<String>,
}

impl FreeVars {
    pub fn contains(&self, name: &str) -> bool {
        self.terms.contains(name) || self.bools.contains(name) || self.heaps.contains(name)
    }
}

pub fn free_vars_formula(f: &FormulaRef, out: &mut FreeVars, bound: &mut Vec<String>) {
    match &**f {
        Formula::Bool(_) => {}
        Formula::BoolVar(x) => {
            if !bound.iter().any(|b| b == x) {
                out.bools.insert(x.clone());
            }
        }
        Formula::Cmp(_, a, b) | Formula::RefEq(a, b) => {
            free_vars_term(a, out, bound);
            free_vars_term(b, out, bound);
        }
        Formula::SelectBool(h, a, i) => {
            free_vars_heap(h, out, bound);
            free_vars_term(a, out, bound);
            free_vars_term(i, out, bound);
        }
        Formula::ApplyBool(_, args) => {
            for a in args {
                free_vars_arg(a, out, bound);
            }
        }
        Formula::Not(a) => free_vars_formula(a, out, bound),
        Formula::And(fs) | Formula::Or(fs) => {
            for g in fs {
                free_vars_formula(g, out, bound);
            }
        }
        Formula::Implies(p, q) | Formula::Iff(p, q) => {
            free_vars_formula(p, out, bound);
            free_vars_formula(q, out, bound);
        }
        Formula::Forall(x, body) | Formula::Exists(x, body) => {
            bound.push(x.clone());
            free_vars_formula(body, out, bound);
            bound.pop();
        }
    }
}

pub fn free_vars_term(t: &TermRef, out: &mut FreeVars, bound: &mut Vec<String>) {
    match &**t {
        Term::IntLit(_) | Term::Null => {}
        Term::Var(x) => {
            if !bound.iter().any(|b| b == x) {
                out.terms.insert(x.clone());
            }
        }
        Term::Neg(a) | Term::Length(a) => free_vars_term(a, out, bound),
        Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) | Term::Div(a, b) | Term::Mod(a, b) => {
            free_vars_term(a, out, bound);
            free_vars_term(b, out, bound);
        }
        Term::Select(h, a, i) => {
            free_vars_heap(h, out, bound);
            free_vars_term(a, out, bound);
            free_vars_term(i, out, bound);
        }
        Term::Ite(c, a, b) => {
            free_vars_formula(c, out, bound);
            free_vars_term(a, out, bound);
            free_vars_term(b, out, bound);
        }
        Term::Apply(_, args) => {
            for a in args {
                free_vars_arg(a, out, bound);
            }
        }
    }
}

fn free_vars_arg(a: &Arg, out: &mut FreeVars, bound: &mut Vec<String>) {
    match a {
        Arg::T(t) => free_vars_term(t, out, bound),
        Arg::F(f) => free_vars_formula(f, out, bound),
        Arg::H(_, h) => free_vars_heap(h, out, bound),
    }
}

pub fn free_vars_heap(h: &HeapRef, out: &mut FreeVars, bound: &mut Vec<String>) {
    match &**h {
        HeapExpr::Var(x) => {
            out.heaps.insert(x.clone());
        }
        HeapExpr::Store {
            heap,
            array,
            index,
            value,
        } => {
            free_vars_heap(heap, out, bound);
            free_vars_term(array, out, bound);
            free_vars_term(index, out, bound);
            free_vars_arg(value, out, bound);
        }
    }
}

// -- printing ----------------------------------------------------------------

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::IntLit(n) => write!(f, "{n}"),
            Term::Var(x) => write!(f, "{x}"),
            Term::Null => write!(f, "null"),
            Term::Neg(a) => write!(f, "-({a})"),
            Term::Add(a, b) => write!(f, "({a} + {b})"),
            Term::Sub(a, b) => write!(f, "({a} - {b})"),
            Term::Mul(a, b) => write!(f, "({a} * {b})"),
            Term::Div(a, b) => write!(f, "({a} / {b})"),
            Term::Mod(a, b) => write!(f, "({a} % {b})"),
            Term::Select(h, a, i) => write!(f, "select({h}, {a}, {i})"),
            Term::Length(a) => write!(f, "len({a})"),
            Term::Ite(c, a, b) => write!(f, "ite({c}, {a}, {b})"),
            Term::Apply(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl fmt::Display for HeapExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HeapExpr::Var(x) => write!(f, "{x}"),
            HeapExpr::Store {
                heap,
                array,
                index,
                value,
            } => write!(f, "store({heap}, {array}, {index}, {value})"),
        }
    }
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::T(t) => write!(f, "{t}"),
            Arg::F(x) => write!(f, "{x}"),
            Arg::H(_, h) => write!(f, "{h}"),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Bool(b) => write!(f, "{b}"),
            Formula::BoolVar(x) => write!(f, "{x}"),
            Formula::Cmp(op, a, b) => {
                let sym = match op {
                    CmpOp::Lt => "<",
                    CmpOp::Le => "<=",
                    CmpOp::Gt => ">",
                    CmpOp::Ge => ">=",
                    CmpOp::Eq => "==",
                    CmpOp::Ne => "!=",
                };
                write!(f, "({a} {sym} {b})")
            }
            Formula::RefEq(a, b) => write!(f, "({a} == {b})"),
            Formula::SelectBool(h, a, i) => write!(f, "select({h}, {a}, {i})"),
            Formula::ApplyBool(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
            Formula::Not(a) => write!(f, "!{a}"),
            Formula::And(fs) => {
                write!(f, "(")?;
                for (i, g) in fs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " && ")?;
                    }
                    write!(f, "{g}")?;
                }
                write!(f, ")")
            }
            Formula::Or(fs) => {
                write!(f, "(")?;
                for (i, g) in fs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " || ")?;
                    }
                    write!(f, "{g}")?;
                }
                write!(f, ")")
            }
            Formula::Implies(p, q) => write!(f, "({p} ==> {q})"),
            Formula::Iff(p, q) => write!(f, "({p} <==> {q})"),
            Formula::Forall(x, body) => write!(f, "(forall {x} :: {body})"),
            Formula::Exists(x, body) => write!(f, "(exists {x} :: {body})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitution_on_assignment() {
        // wp of x := x + 1 applied to x == c + 1 must equal x + 1 == c + 1
        let post = f_cmp(
            CmpOp::Eq,
            t_var("x"),
            t_add(t_var("c"), t_int(1)),
        );
        let s = Subst::one("x", Arg::T(t_add(t_var("x"), t_int(1))));
        let got = subst_formula(&post, &s);
        let want = f_cmp(
            CmpOp::Eq,
            t_add(t_var("x"), t_int(1)),
            t_add(t_var("c"), t_int(1)),
        );
        assert_eq!(got, want);
    }

    #[test]
    fn substitution_respects_binders() {
        let body = f_cmp(CmpOp::Ge, t_var("i"), t_var("n"));
        let all = f_forall("i", body);
        let s = Subst::one("i", Arg::T(t_int(3)));
        // bound i is untouched
        assert_eq!(subst_formula(&all, &s), all);
        let s2 = Subst::one("n", Arg::T(t_int(7)));
        let got = subst_formula(&all, &s2);
        assert_eq!(got.to_string(), "(forall i :: (i >= 7))");
    }

    #[test]
    fn and_or_simplify() {
        assert_eq!(f_and(vec![f_true(), f_true()]), f_true());
        assert_eq!(f_or(vec![f_false()]), f_false());
        assert_eq!(f_implies(f_true(), f_boolvar("p")), f_boolvar("p"));
        assert_eq!(f_implies(f_boolvar("p"), f_true()), f_true());
    }

    #[test]
    fn free_vars_skip_bound() {
        let body = f_cmp(CmpOp::Lt, t_var("i"), t_length(t_var("a")));
        let all = f_forall("i", body);
        let mut fv = FreeVars::default();
        free_vars_formula(&all, &mut fv, &mut Vec::new());
        assert!(fv.terms.contains("a"));
        assert!(!fv.terms.contains("i"));
    }
}
