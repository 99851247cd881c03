//! Ground decision procedure: Tseitin clausification into CNF over theory
//! atoms, DPLL with eager theory consistency checks, and total model
//! construction.
//!
//! Theory atoms are linear integer constraints, reference equalities, and
//! named booleans. Heap selects are expanded read-over-write at ground
//! terms; selects left over a heap variable become fresh integer/boolean
//! variables tied together by functional-consistency splits (equal array and
//! index imply equal value). Division and modulo by integer literals are
//! exact via fresh quotient/remainder variables with Euclidean side
//! constraints; anything nonlinear is reported as an unsupported fragment.

use super::lia::{self, Constraint, Deadline, LinSum, VarId};
use crate::logic::*;
use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RefTerm {
    Null,
    Var(String),
    /// Introduced for ref-sorted if-then-else and opaque applications.
    Fresh(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LinCons {
    /// sum ≥ 0
    Ge(LinSum),
    /// sum = 0
    Eq(LinSum),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Atom {
    Bool(String),
    Lin(LinCons),
    RefEq(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lit {
    pub atom: u32,
    pub pos: bool,
}

impl Lit {
    fn neg(self) -> Lit {
        Lit {
            atom: self.atom,
            pos: !self.pos,
        }
    }
}

pub type Clause = Vec<Lit>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectValue {
    Int(VarId),
    Bool(u32),
}

#[derive(Debug, Clone)]
pub struct SelectRecord {
    pub heap: String,
    pub sort: ElemSort,
    pub array: usize,
    pub index: LinSum,
    pub value: SelectValue,
}

#[derive(Debug, Clone)]
enum GroundArg {
    Int(LinSum),
    Ref(usize),
    Bool(Lit),
}

#[derive(Debug, Clone)]
struct AppRecord {
    name: String,
    args: Vec<GroundArg>,
    result: SelectValue,
}

#[derive(Debug, Default)]
pub struct GroundProblem {
    pub atoms: Vec<Atom>,
    atom_ids: HashMap<Atom, u32>,
    pub clauses: Vec<Clause>,
    pub int_vars: Vec<String>,
    int_ids: BTreeMap<String, VarId>,
    pub ref_terms: Vec<RefTerm>,
    ref_ids: HashMap<RefTerm, usize>,
    pub selects: Vec<SelectRecord>,
    pub lens: Vec<(usize, VarId)>,
    apps: Vec<AppRecord>,
    true_lit: Option<Lit>,
    fresh: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClausifyError {
    Unsupported(String),
}

#[derive(Debug, Clone)]
pub struct GroundModel {
    pub bools: Vec<bool>,
    pub ints: BTreeMap<VarId, BigInt>,
    /// Representative ref term id per ref term.
    pub ref_class: Vec<usize>,
}

#[derive(Debug, Clone)]
pub enum GroundResult {
    Sat(GroundModel),
    Unsat,
}

impl GroundProblem {
    pub fn int_var(&mut self, name: &str) -> VarId {
        if let Some(&id) = self.int_ids.get(name) {
            return id;
        }
        let id = self.int_vars.len() as VarId;
        self.int_vars.push(name.to_string());
        self.int_ids.insert(name.to_string(), id);
        id
    }

    pub fn lookup_int(&self, name: &str) -> Option<VarId> {
        self.int_ids.get(name).copied()
    }

    fn fresh_int(&mut self, prefix: &str) -> VarId {
        let n = self.fresh;
        self.fresh += 1;
        self.int_var(&format!("${prefix}:{n}"))
    }

    pub fn ref_term(&mut self, t: RefTerm) -> usize {
        if let Some(&id) = self.ref_ids.get(&t) {
            return id;
        }
        let id = self.ref_terms.len();
        self.ref_terms.push(t.clone());
        self.ref_ids.insert(t, id);
        id
    }

    pub fn lookup_ref(&self, t: &RefTerm) -> Option<usize> {
        self.ref_ids.get(t).copied()
    }

    pub fn lookup_bool(&self, name: &str) -> Option<u32> {
        self.atom_ids.get(&Atom::Bool(name.to_string())).copied()
    }

    fn atom(&mut self, a: Atom) -> u32 {
        if let Some(&id) = self.atom_ids.get(&a) {
            return id;
        }
        let id = self.atoms.len() as u32;
        self.atoms.push(a.clone());
        self.atom_ids.insert(a, id);
        id
    }

    fn bool_atom(&mut self, name: &str) -> Lit {
        Lit {
            atom: self.atom(Atom::Bool(name.to_string())),
            pos: true,
        }
    }

    fn fresh_bool(&mut self, prefix: &str) -> Lit {
        let n = self.fresh;
        self.fresh += 1;
        self.bool_atom(&format!("${prefix}:{n}"))
    }

    fn true_lit(&mut self) -> Lit {
        if let Some(l) = self.true_lit {
            return l;
        }
        let l = self.bool_atom("$true");
        self.clauses.push(vec![l]);
        self.true_lit = Some(l);
        l
    }

    fn false_lit(&mut self) -> Lit {
        self.true_lit().neg()
    }

    fn clause(&mut self, c: Clause) {
        self.clauses.push(c);
    }

    /// Canonical literal for a linear constraint; constants fold away.
    fn lin_lit(&mut self, cons: LinCons) -> Lit {
        match cons {
            LinCons::Ge(e) => {
                if e.is_constant() {
                    return if e.constant >= BigInt::zero() {
                        self.true_lit()
                    } else {
                        self.false_lit()
                    };
                }
                Lit {
                    atom: self.atom(Atom::Lin(LinCons::Ge(e))),
                    pos: true,
                }
            }
            LinCons::Eq(mut e) => {
                if e.is_constant() {
                    return if e.constant.is_zero() {
                        self.true_lit()
                    } else {
                        self.false_lit()
                    };
                }
                // canonical sign: first coefficient positive
                if let Some((_, c)) = e.coeffs.iter().next() {
                    if c < &BigInt::zero() {
                        e = e.negated();
                    }
                }
                Lit {
                    atom: self.atom(Atom::Lin(LinCons::Eq(e))),
                    pos: true,
                }
            }
        }
    }

    fn ref_eq_lit(&mut self, a: usize, b: usize) -> Lit {
        if a == b {
            return self.true_lit();
        }
        let (lo, hi) = (a.min(b), a.max(b));
        Lit {
            atom: self.atom(Atom::RefEq(lo, hi)),
            pos: true,
        }
    }
}

// ---------------------------------------------------------------------------
// Clausifier
// ---------------------------------------------------------------------------

pub struct Clausifier<'a> {
    pub p: GroundProblem,
    symbols: &'a BTreeMap<String, Sort>,
    select_memo: HashMap<(String, ElemSort, usize, LinSum), SelectValue>,
    len_memo: HashMap<usize, VarId>,
    div_memo: HashMap<(LinSum, BigInt), (VarId, VarId)>,
    app_memo: HashMap<String, SelectValue>,
    ref_app_memo: HashMap<String, usize>,
    // keyed by node identity: asserted roots are retained in `roots` so
    // addresses stay valid for the clausifier's lifetime
    tseitin_memo: HashMap<*const Formula, Lit>,
    roots: Vec<FormulaRef>,
}

type CResult<T> = Result<T, ClausifyError>;

impl<'a> Clausifier<'a> {
    pub fn new(symbols: &'a BTreeMap<String, Sort>) -> Self {
        Clausifier {
            p: GroundProblem::default(),
            symbols,
            select_memo: HashMap::new(),
            len_memo: HashMap::new(),
            div_memo: HashMap::new(),
            app_memo: HashMap::new(),
            ref_app_memo: HashMap::new(),
            tseitin_memo: HashMap::new(),
            roots: Vec::new(),
        }
    }

    fn unsupported<T>(&self, what: impl Into<String>) -> CResult<T> {
        Err(ClausifyError::Unsupported(what.into()))
    }

    fn is_ref_sorted(&self, t: &TermRef) -> bool {
        match &**t {
            Term::Null => true,
            Term::Var(x) => matches!(self.symbols.get(x), Some(Sort::Ref)),
            Term::Ite(_, a, _) => self.is_ref_sorted(a),
            _ => false,
        }
    }

    pub fn norm_int(&mut self, t: &TermRef) -> CResult<LinSum> {
        Ok(match &**t {
            Term::IntLit(n) => LinSum::constant(n.clone()),
            Term::Var(x) => {
                let v = self.p.int_var(x);
                LinSum::var(v)
            }
            Term::Null => return self.unsupported("null in integer position"),
            Term::Neg(a) => self.norm_int(a)?.negated(),
            Term::Add(a, b) => {
                let mut e = self.norm_int(a)?;
                e.add(&self.norm_int(b)?);
                e
            }
            Term::Sub(a, b) => {
                let mut e = self.norm_int(a)?;
                e.sub(&self.norm_int(b)?);
                e
            }
            Term::Mul(a, b) => {
                let ea = self.norm_int(a)?;
                let eb = self.norm_int(b)?;
                if ea.is_constant() {
                    eb.scaled(&ea.constant)
                } else if eb.is_constant() {
                    ea.scaled(&eb.constant)
                } else {
                    return self.unsupported("nonlinear multiplication of two symbols");
                }
            }
            Term::Div(a, b) | Term::Mod(a, b) => {
                let ea = self.norm_int(a)?;
                let eb = self.norm_int(b)?;
                if !eb.is_constant() {
                    return self.unsupported("division by a non-constant divisor");
                }
                let d = eb.constant.clone();
                if d.is_zero() {
                    // unreachable under a passed DivByZero check; unspecified value
                    let v = self.p.fresh_int("divzero");
                    return Ok(LinSum::var(v));
                }
                let (q, r) = self.euclidean_divmod(ea, d)?;
                match &**t {
                    Term::Div(..) => LinSum::var(q),
                    _ => LinSum::var(r),
                }
            }
            Term::Select(h, a, i) => {
                let aref = self.norm_ref(a)?;
                let idx = self.norm_int(i)?;
                match self.resolve_select(h, ElemSort::Int, aref, idx)? {
                    SelectValue::Int(v) => LinSum::var(v),
                    SelectValue::Bool(_) => unreachable!("int select yielded bool"),
                }
            }
            Term::Length(a) => {
                let aref = self.norm_ref(a)?;
                LinSum::var(self.len_var(aref))
            }
            Term::Ite(c, a, b) => {
                let cl = self.lit_of(c)?;
                let ea = self.norm_int(a)?;
                let eb = self.norm_int(b)?;
                let v = self.p.fresh_int("ite");
                let mut then_eq = LinSum::var(v);
                then_eq.sub(&ea);
                let mut else_eq = LinSum::var(v);
                else_eq.sub(&eb);
                let then_lit = self.p.lin_lit(LinCons::Eq(then_eq));
                let else_lit = self.p.lin_lit(LinCons::Eq(else_eq));
                self.p.clause(vec![cl.neg(), then_lit]);
                self.p.clause(vec![cl, else_lit]);
                LinSum::var(v)
            }
            Term::Apply(..) => {
                let v = self.int_apply(t)?;
                LinSum::var(v)
            }
        })
    }

    fn euclidean_divmod(&mut self, dividend: LinSum, d: BigInt) -> CResult<(VarId, VarId)> {
        if let Some(&(q, r)) = self.div_memo.get(&(dividend.clone(), d.clone())) {
            return Ok((q, r));
        }
        let q = self.p.fresh_int("quot");
        let r = self.p.fresh_int("rem");
        // dividend = q*d + r, 0 <= r < |d|
        let mut def = dividend.clone();
        def.add_scaled(&LinSum::var(q), &-d.clone());
        def.sub(&LinSum::var(r));
        let l1 = self.p.lin_lit(LinCons::Eq(def));
        let l2 = self.p.lin_lit(LinCons::Ge(LinSum::var(r)));
        let mut ub = LinSum::constant(d.abs() - 1);
        ub.sub(&LinSum::var(r));
        let l3 = self.p.lin_lit(LinCons::Ge(ub));
        self.p.clause(vec![l1]);
        self.p.clause(vec![l2]);
        self.p.clause(vec![l3]);
        self.div_memo.insert((dividend, d), (q, r));
        Ok((q, r))
    }

    fn len_var(&mut self, aref: usize) -> VarId {
        if let Some(&v) = self.len_memo.get(&aref) {
            return v;
        }
        let v = self.p.fresh_int("len");
        self.len_memo.insert(aref, v);
        self.p.lens.push((aref, v));
        v
    }

    pub fn norm_ref(&mut self, t: &TermRef) -> CResult<usize> {
        Ok(match &**t {
            Term::Null => self.p.ref_term(RefTerm::Null),
            Term::Var(x) => self.p.ref_term(RefTerm::Var(x.clone())),
            Term::Ite(c, a, b) => {
                let cl = self.lit_of(c)?;
                let ra = self.norm_ref(a)?;
                let rb = self.norm_ref(b)?;
                let n = self.p.fresh;
                self.p.fresh += 1;
                let v = self.p.ref_term(RefTerm::Fresh(n));
                let then_eq = self.p.ref_eq_lit(v, ra);
                let else_eq = self.p.ref_eq_lit(v, rb);
                self.p.clause(vec![cl.neg(), then_eq]);
                self.p.clause(vec![cl, else_eq]);
                v
            }
            Term::Apply(name, args) => {
                // array-valued applications stay opaque (no congruence);
                // identical applications share one ref term
                let key = format!("{name}{args:?}");
                if let Some(&id) = self.ref_app_memo.get(&key) {
                    id
                } else {
                    let n = self.p.fresh;
                    self.p.fresh += 1;
                    let id = self.p.ref_term(RefTerm::Fresh(n));
                    self.ref_app_memo.insert(key, id);
                    id
                }
            }
            _ => return self.unsupported("ill-sorted reference term"),
        })
    }

    fn resolve_select(
        &mut self,
        heap: &HeapRef,
        sort: ElemSort,
        aref: usize,
        idx: LinSum,
    ) -> CResult<SelectValue> {
        match &**heap {
            HeapExpr::Var(h) => {
                let key = (h.clone(), sort, aref, idx.clone());
                if let Some(&v) = self.select_memo.get(&key) {
                    return Ok(v);
                }
                let value = match sort {
                    ElemSort::Int => SelectValue::Int(self.p.fresh_int("sel")),
                    ElemSort::Bool => SelectValue::Bool(self.p.fresh_bool("selb").atom),
                };
                self.select_memo.insert(key, value);
                self.p.selects.push(SelectRecord {
                    heap: h.clone(),
                    sort,
                    array: aref,
                    index: idx,
                    value,
                });
                Ok(value)
            }
            HeapExpr::Store {
                heap: inner_heap,
                array,
                index,
                value,
            } => {
                // read over write: equal cell reads the stored value,
                // different cell reads through
                let sa = self.norm_ref(array)?;
                let si = self.norm_int(index)?;
                let eq_arr = self.p.ref_eq_lit(aref, sa);
                let mut idx_diff = idx.clone();
                idx_diff.sub(&si);
                let eq_idx = self.p.lin_lit(LinCons::Eq(idx_diff));
                let inner = self.resolve_select(inner_heap, sort, aref, idx)?;
                match sort {
                    ElemSort::Int => {
                        let Arg::T(vt) = value else {
                            return self.unsupported("ill-sorted heap store");
                        };
                        let stored = self.norm_int(vt)?;
                        let SelectValue::Int(inner_v) = inner else {
                            unreachable!()
                        };
                        let out = self.p.fresh_int("rw");
                        let mut hit = LinSum::var(out);
                        hit.sub(&stored);
                        let hit_lit = self.p.lin_lit(LinCons::Eq(hit));
                        let mut miss = LinSum::var(out);
                        miss.sub(&LinSum::var(inner_v));
                        let miss_lit = self.p.lin_lit(LinCons::Eq(miss));
                        self.p.clause(vec![eq_arr.neg(), eq_idx.neg(), hit_lit]);
                        self.p.clause(vec![eq_arr, miss_lit]);
                        self.p.clause(vec![eq_idx, miss_lit]);
                        Ok(SelectValue::Int(out))
                    }
                    ElemSort::Bool => {
                        let Arg::F(vf) = value else {
                            return self.unsupported("ill-sorted heap store");
                        };
                        let stored = self.lit_of(vf)?;
                        let SelectValue::Bool(inner_a) = inner else {
                            unreachable!()
                        };
                        let inner_l = Lit {
                            atom: inner_a,
                            pos: true,
                        };
                        let out = self.p.fresh_bool("rwb");
                        self.p
                            .clause(vec![eq_arr.neg(), eq_idx.neg(), out.neg(), stored]);
                        self.p
                            .clause(vec![eq_arr.neg(), eq_idx.neg(), out, stored.neg()]);
                        self.p.clause(vec![eq_arr, out.neg(), inner_l]);
                        self.p.clause(vec![eq_arr, out, inner_l.neg()]);
                        self.p.clause(vec![eq_idx, out.neg(), inner_l]);
                        self.p.clause(vec![eq_idx, out, inner_l.neg()]);
                        Ok(SelectValue::Bool(out.atom))
                    }
                }
            }
        }
    }

    fn ground_arg(&mut self, a: &Arg) -> CResult<GroundArg> {
        Ok(match a {
            Arg::F(f) => GroundArg::Bool(self.lit_of(f)?),
            Arg::T(t) if self.is_ref_sorted(t) => GroundArg::Ref(self.norm_ref(t)?),
            Arg::T(t) => GroundArg::Int(self.norm_int(t)?),
            Arg::H(..) => return self.unsupported("heap-sorted application argument"),
        })
    }

    fn apply_key(name: &str, args: &[GroundArg], is_bool: bool) -> String {
        format!("{is_bool}:{name}:{args:?}")
    }

    fn int_apply(&mut self, t: &TermRef) -> CResult<VarId> {
        let Term::Apply(name, args) = &**t else {
            unreachable!()
        };
        let gargs: Vec<GroundArg> = args
            .iter()
            .map(|a| self.ground_arg(a))
            .collect::<CResult<_>>()?;
        let key = Self::apply_key(name, &gargs, false);
        if let Some(SelectValue::Int(v)) = self.app_memo.get(&key) {
            return Ok(*v);
        }
        let v = self.p.fresh_int("app");
        self.app_memo.insert(key, SelectValue::Int(v));
        self.p.apps.push(AppRecord {
            name: name.clone(),
            args: gargs,
            result: SelectValue::Int(v),
        });
        Ok(v)
    }

    fn bool_apply(&mut self, name: &str, args: &[Arg]) -> CResult<Lit> {
        let gargs: Vec<GroundArg> = args
            .iter()
            .map(|a| self.ground_arg(a))
            .collect::<CResult<_>>()?;
        let key = Self::apply_key(name, &gargs, true);
        if let Some(SelectValue::Bool(a)) = self.app_memo.get(&key) {
            return Ok(Lit {
                atom: *a,
                pos: true,
            });
        }
        let l = self.p.fresh_bool("appb");
        self.app_memo.insert(key, SelectValue::Bool(l.atom));
        self.p.apps.push(AppRecord {
            name: name.to_string(),
            args: gargs,
            result: SelectValue::Bool(l.atom),
        });
        Ok(l)
    }

    /// Tseitin encoding: returns a literal equisatisfiable with `f`.
    pub fn lit_of(&mut self, f: &FormulaRef) -> CResult<Lit> {
        let key = Rc::as_ptr(f);
        if let Some(&l) = self.tseitin_memo.get(&key) {
            return Ok(l);
        }
        let lit = match &**f {
            Formula::Bool(true) => self.p.true_lit(),
            Formula::Bool(false) => self.p.false_lit(),
            Formula::BoolVar(x) => self.p.bool_atom(x),
            Formula::Cmp(op, a, b) => {
                let ea = self.norm_int(a)?;
                let eb = self.norm_int(b)?;
                let mut diff = ea.clone();
                diff.sub(&eb);
                match op {
                    CmpOp::Lt => {
                        // a < b  <=>  b - a - 1 >= 0
                        let mut e = eb;
                        e.sub(&ea);
                        e.add_const(-1);
                        self.p.lin_lit(LinCons::Ge(e))
                    }
                    CmpOp::Le => {
                        let mut e = eb;
                        e.sub(&ea);
                        self.p.lin_lit(LinCons::Ge(e))
                    }
                    CmpOp::Gt => {
                        diff.add_const(-1);
                        self.p.lin_lit(LinCons::Ge(diff))
                    }
                    CmpOp::Ge => self.p.lin_lit(LinCons::Ge(diff)),
                    CmpOp::Eq => self.p.lin_lit(LinCons::Eq(diff)),
                    CmpOp::Ne => self.p.lin_lit(LinCons::Eq(diff)).neg(),
                }
            }
            Formula::RefEq(a, b) => {
                let ra = self.norm_ref(a)?;
                let rb = self.norm_ref(b)?;
                self.p.ref_eq_lit(ra, rb)
            }
            Formula::SelectBool(h, a, i) => {
                let aref = self.norm_ref(a)?;
                let idx = self.norm_int(i)?;
                match self.resolve_select(h, ElemSort::Bool, aref, idx)? {
                    SelectValue::Bool(atom) => Lit { atom, pos: true },
                    SelectValue::Int(_) => unreachable!("bool select yielded int"),
                }
            }
            Formula::ApplyBool(name, args) => self.bool_apply(name, args)?,
            Formula::Not(g) => self.lit_of(g)?.neg(),
            Formula::And(fs) => {
                let lits: Vec<Lit> = fs.iter().map(|g| self.lit_of(g)).collect::<CResult<_>>()?;
                let v = self.p.fresh_bool("t");
                let mut long = vec![v];
                for l in &lits {
                    self.p.clause(vec![v.neg(), *l]);
                    long.push(l.neg());
                }
                self.p.clause(long);
                v
            }
            Formula::Or(fs) => {
                let lits: Vec<Lit> = fs.iter().map(|g| self.lit_of(g)).collect::<CResult<_>>()?;
                let v = self.p.fresh_bool("t");
                let mut long = vec![v.neg()];
                for l in &lits {
                    self.p.clause(vec![v, l.neg()]);
                    long.push(*l);
                }
                self.p.clause(long);
                v
            }
            Formula::Implies(a, b) => {
                let la = self.lit_of(a)?;
                let lb = self.lit_of(b)?;
                let v = self.p.fresh_bool("t");
                self.p.clause(vec![v.neg(), la.neg(), lb]);
                self.p.clause(vec![v, la]);
                self.p.clause(vec![v, lb.neg()]);
                v
            }
            Formula::Iff(a, b) => {
                let la = self.lit_of(a)?;
                let lb = self.lit_of(b)?;
                let v = self.p.fresh_bool("t");
                self.p.clause(vec![v.neg(), la.neg(), lb]);
                self.p.clause(vec![v.neg(), la, lb.neg()]);
                self.p.clause(vec![v, la, lb]);
                self.p.clause(vec![v, la.neg(), lb.neg()]);
                v
            }
            Formula::Forall(..) | Formula::Exists(..) => {
                return self.unsupported("quantifier survived instantiation")
            }
        };
        self.tseitin_memo.insert(key, lit);
        Ok(lit)
    }

    /// Assert `f` (top-level conjunct).
    pub fn assert_formula(&mut self, f: &FormulaRef) -> CResult<()> {
        self.roots.push(f.clone());
        // keep top-level conjunctions as separate units for better propagation
        if let Formula::And(fs) = &**f {
            for g in fs {
                self.assert_formula(g)?;
            }
            return Ok(());
        }
        let l = self.lit_of(f)?;
        self.p.clause(vec![l]);
        Ok(())
    }

    /// Add functional-consistency splits for selects, lengths and
    /// applications, then hand over the finished problem.
    pub fn finish(mut self) -> GroundProblem {
        // select pairs over the same heap variable
        let selects = self.p.selects.clone();
        for i in 0..selects.len() {
            for j in (i + 1)..selects.len() {
                let (a, b) = (&selects[i], &selects[j]);
                if a.heap != b.heap || a.sort != b.sort {
                    continue;
                }
                let mut prefix = Vec::new();
                if a.array != b.array {
                    let eq = self.p.ref_eq_lit(a.array, b.array);
                    prefix.push(eq.neg());
                }
                if a.index != b.index {
                    let mut diff = a.index.clone();
                    diff.sub(&b.index);
                    let eq = self.p.lin_lit(LinCons::Eq(diff));
                    prefix.push(eq.neg());
                }
                if prefix.is_empty() {
                    continue; // identical key: same variable by memoization
                }
                match (a.value, b.value) {
                    (SelectValue::Int(v1), SelectValue::Int(v2)) => {
                        let mut diff = LinSum::var(v1);
                        diff.sub(&LinSum::var(v2));
                        let eq = self.p.lin_lit(LinCons::Eq(diff));
                        let mut c = prefix.clone();
                        c.push(eq);
                        self.p.clause(c);
                    }
                    (SelectValue::Bool(a1), SelectValue::Bool(a2)) => {
                        let l1 = Lit { atom: a1, pos: true };
                        let l2 = Lit { atom: a2, pos: true };
                        let mut c1 = prefix.clone();
                        c1.extend([l1.neg(), l2]);
                        let mut c2 = prefix.clone();
                        c2.extend([l1, l2.neg()]);
                        self.p.clause(c1);
                        self.p.clause(c2);
                    }
                    _ => {}
                }
            }
        }
        // equal arrays have equal lengths
        let lens = self.p.lens.clone();
        for i in 0..lens.len() {
            for j in (i + 1)..lens.len() {
                let (r1, v1) = lens[i];
                let (r2, v2) = lens[j];
                let eq = self.p.ref_eq_lit(r1, r2);
                let mut diff = LinSum::var(v1);
                diff.sub(&LinSum::var(v2));
                let leq = self.p.lin_lit(LinCons::Eq(diff));
                self.p.clause(vec![eq.neg(), leq]);
            }
        }
        // congruence of uninterpreted applications
        let apps = self.p.apps.clone();
        for i in 0..apps.len() {
            for j in (i + 1)..apps.len() {
                let (a, b) = (&apps[i], &apps[j]);
                if a.name != b.name || a.args.len() != b.args.len() {
                    continue;
                }
                // clauses of shape: args-equal => results-equal, expanding
                // boolean argument equalities into polarity cases
                let mut prefixes: Vec<Vec<Lit>> = vec![Vec::new()];
                let mut compatible = true;
                for (x, y) in a.args.iter().zip(b.args.iter()) {
                    match (x, y) {
                        (GroundArg::Int(e1), GroundArg::Int(e2)) => {
                            if e1 == e2 {
                                continue;
                            }
                            let mut diff = e1.clone();
                            diff.sub(e2);
                            let eq = self.p.lin_lit(LinCons::Eq(diff));
                            for pfx in &mut prefixes {
                                pfx.push(eq.neg());
                            }
                        }
                        (GroundArg::Ref(r1), GroundArg::Ref(r2)) => {
                            if r1 == r2 {
                                continue;
                            }
                            let eq = self.p.ref_eq_lit(*r1, *r2);
                            for pfx in &mut prefixes {
                                pfx.push(eq.neg());
                            }
                        }
                        (GroundArg::Bool(l1), GroundArg::Bool(l2)) => {
                            if l1 == l2 {
                                continue;
                            }
                            let mut expanded = Vec::new();
                            for pfx in prefixes {
                                let mut both_true = pfx.clone();
                                both_true.extend([l1.neg(), l2.neg()]);
                                let mut both_false = pfx;
                                both_false.extend([*l1, *l2]);
                                expanded.push(both_true);
                                expanded.push(both_false);
                            }
                            prefixes = expanded;
                        }
                        _ => {
                            compatible = false;
                            break;
                        }
                    }
                }
                if !compatible {
                    continue;
                }
                match (a.result, b.result) {
                    (SelectValue::Int(v1), SelectValue::Int(v2)) => {
                        let mut diff = LinSum::var(v1);
                        diff.sub(&LinSum::var(v2));
                        let eq = self.p.lin_lit(LinCons::Eq(diff));
                        for pfx in prefixes {
                            let mut c = pfx;
                            c.push(eq);
                            self.p.clause(c);
                        }
                    }
                    (SelectValue::Bool(a1), SelectValue::Bool(a2)) => {
                        let l1 = Lit { atom: a1, pos: true };
                        let l2 = Lit { atom: a2, pos: true };
                        for pfx in prefixes {
                            let mut c1 = pfx.clone();
                            c1.extend([l1.neg(), l2]);
                            let mut c2 = pfx;
                            c2.extend([l1, l2.neg()]);
                            self.p.clause(c1);
                            self.p.clause(c2);
                        }
                    }
                    _ => {}
                }
            }
        }
        self.p
    }
}

// ---------------------------------------------------------------------------
// DPLL with theory checks
// ---------------------------------------------------------------------------

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

/// Theory state of a (possibly partial) boolean assignment: `None` when
/// inconsistent, otherwise a witness for the integer variables.
fn theory_witness(
    p: &GroundProblem,
    assign: &[Option<bool>],
    deadline: &Deadline,
) -> Result<Option<BTreeMap<VarId, BigInt>>, lia::Aborted> {
    // reference equalities first
    let mut uf = UnionFind::new(p.ref_terms.len());
    for (i, a) in p.atoms.iter().enumerate() {
        if let (Atom::RefEq(x, y), Some(true)) = (a, assign[i]) {
            uf.union(*x, *y);
        }
    }
    for (i, a) in p.atoms.iter().enumerate() {
        if let (Atom::RefEq(x, y), Some(false)) = (a, assign[i]) {
            if uf.find(*x) == uf.find(*y) {
                return Ok(None);
            }
        }
    }
    // linear arithmetic with disequality splitting
    let mut cons = Vec::new();
    let mut neqs: Vec<LinSum> = Vec::new();
    for (i, a) in p.atoms.iter().enumerate() {
        let Atom::Lin(lc) = a else { continue };
        match assign[i] {
            Some(true) => cons.push(match lc {
                LinCons::Ge(e) => Constraint::Ge(e.clone()),
                LinCons::Eq(e) => Constraint::Eq(e.clone()),
            }),
            Some(false) => match lc {
                LinCons::Ge(e) => {
                    // !(e >= 0)  <=>  -e - 1 >= 0
                    let mut ne = e.negated();
                    ne.add_const(-1);
                    cons.push(Constraint::Ge(ne));
                }
                LinCons::Eq(e) => neqs.push(e.clone()),
            },
            None => {}
        }
    }
    disequality_split(&cons, &neqs, deadline)
}

/// Lazy disequality handling: solve without the disequalities, and only
/// case-split on one that the witness actually violates.
fn disequality_split(
    cons: &[Constraint],
    neqs: &[LinSum],
    deadline: &Deadline,
) -> Result<Option<BTreeMap<VarId, BigInt>>, lia::Aborted> {
    deadline.check()?;
    let a = match lia::solve(cons.to_vec(), deadline)? {
        lia::LiaResult::Sat(a) => a,
        lia::LiaResult::Unsat => return Ok(None),
    };
    let Some(violated) = neqs.iter().find(|e| e.eval(&a).is_zero()) else {
        return Ok(Some(a));
    };
    let rest: Vec<LinSum> = neqs
        .iter()
        .filter(|e| *e != violated)
        .cloned()
        .collect();
    // e != 0  <=>  e >= 1  or  -e >= 1
    let mut lo = violated.clone();
    lo.add_const(-1);
    let mut with_lo = cons.to_vec();
    with_lo.push(Constraint::Ge(lo));
    if let Some(a) = disequality_split(&with_lo, &rest, deadline)? {
        return Ok(Some(a));
    }
    let mut hi = violated.negated();
    hi.add_const(-1);
    let mut with_hi = cons.to_vec();
    with_hi.push(Constraint::Ge(hi));
    disequality_split(&with_hi, &rest, deadline)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveAbort {
    Timeout,
}

pub fn dpll(p: &GroundProblem, deadline: &Deadline) -> Result<GroundResult, SolveAbort> {
    let mut assign: Vec<Option<bool>> = vec![None; p.atoms.len()];
    match dpll_rec(p, &mut assign, deadline) {
        Ok(Some(model)) => Ok(GroundResult::Sat(model)),
        Ok(None) => Ok(GroundResult::Unsat),
        Err(lia::Aborted) => Err(SolveAbort::Timeout),
    }
}

fn propagate(p: &GroundProblem, assign: &mut [Option<bool>]) -> Result<(), ()> {
    loop {
        let mut changed = false;
        'clauses: for clause in &p.clauses {
            let mut unassigned: Option<Lit> = None;
            let mut n_unassigned = 0;
            for lit in clause {
                match assign[lit.atom as usize] {
                    Some(v) if v == lit.pos => continue 'clauses, // satisfied
                    Some(_) => {}
                    None => {
                        n_unassigned += 1;
                        unassigned = Some(*lit);
                    }
                }
            }
            match n_unassigned {
                0 => return Err(()), // conflict
                1 => {
                    let l = unassigned.unwrap();
                    assign[l.atom as usize] = Some(l.pos);
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            return Ok(());
        }
    }
}

fn dpll_rec(
    p: &GroundProblem,
    assign: &mut Vec<Option<bool>>,
    deadline: &Deadline,
) -> Result<Option<GroundModel>, lia::Aborted> {
    deadline.check()?;
    if propagate(p, assign).is_err() {
        return Ok(None);
    }
    if theory_witness(p, assign, deadline)?.is_none() {
        return Ok(None);
    }
    // decide a literal from the first clause not yet satisfied; when every
    // clause is satisfied the remaining atoms are free and the assignment is
    // completed semantically from the theory witness
    let mut decision: Option<Lit> = None;
    for clause in &p.clauses {
        let mut satisfied = false;
        let mut unassigned: Option<Lit> = None;
        for lit in clause {
            match assign[lit.atom as usize] {
                Some(v) if v == lit.pos => {
                    satisfied = true;
                    break;
                }
                None if unassigned.is_none() => unassigned = Some(*lit),
                _ => {}
            }
        }
        if !satisfied {
            match unassigned {
                Some(l) => {
                    decision = Some(l);
                    break;
                }
                None => return Ok(None), // conflict
            }
        }
    }
    let Some(lit) = decision else {
        let ints = theory_witness(p, assign, deadline)?
            .expect("checked consistent just above");
        let mut uf = UnionFind::new(p.ref_terms.len());
        for (i, a) in p.atoms.iter().enumerate() {
            if let (Atom::RefEq(x, y), Some(true)) = (a, assign[i]) {
                uf.union(*x, *y);
            }
        }
        let ref_class: Vec<usize> = (0..p.ref_terms.len()).map(|i| uf.find(i)).collect();
        let mut full_ints = ints;
        for v in 0..p.int_vars.len() as VarId {
            full_ints.entry(v).or_insert_with(BigInt::zero);
        }
        // semantic completion of undecided atoms
        let bools: Vec<bool> = p
            .atoms
            .iter()
            .enumerate()
            .map(|(i, atom)| match assign[i] {
                Some(v) => v,
                None => match atom {
                    Atom::Bool(_) => false,
                    Atom::Lin(LinCons::Ge(e)) => e.eval(&full_ints) >= BigInt::zero(),
                    Atom::Lin(LinCons::Eq(e)) => e.eval(&full_ints).is_zero(),
                    Atom::RefEq(a, b) => ref_class[*a] == ref_class[*b],
                },
            })
            .collect();
        return Ok(Some(GroundModel {
            bools,
            ints: full_ints,
            ref_class,
        }));
    };
    // satisfying polarity first
    for value in [lit.pos, !lit.pos] {
        let mut branch = assign.clone();
        branch[lit.atom as usize] = Some(value);
        if let Some(m) = dpll_rec(p, &mut branch, deadline)? {
            return Ok(Some(m));
        }
    }
    Ok(None)
}

// ---------------------------------------------------------------------------
// Model evaluation (used for minimization and the soundness property)
// ---------------------------------------------------------------------------

fn eval_atom(p: &GroundProblem, m: &GroundModel, idx: usize) -> bool {
    match &p.atoms[idx] {
        Atom::Bool(_) => m.bools[idx],
        Atom::Lin(LinCons::Ge(e)) => e.eval(&m.ints) >= BigInt::zero(),
        Atom::Lin(LinCons::Eq(e)) => e.eval(&m.ints).is_zero(),
        Atom::RefEq(a, b) => m.ref_class[*a] == m.ref_class[*b],
    }
}

/// All clauses satisfied under the candidate model?
pub fn eval_clauses(p: &GroundProblem, m: &GroundModel) -> bool {
    p.clauses.iter().all(|clause| {
        clause
            .iter()
            .any(|lit| eval_atom(p, m, lit.atom as usize) == lit.pos)
    })
}

/// Greedily halve integer magnitudes toward zero while the clause set stays
/// satisfied, in variable-name order, so counterexamples come out
/// human-scale.
pub fn minimize_model(p: &GroundProblem, m: &mut GroundModel) {
    let mut order: Vec<VarId> = (0..p.int_vars.len() as VarId).collect();
    order.sort_by(|a, b| p.int_vars[*a as usize].cmp(&p.int_vars[*b as usize]));
    for v in order {
        loop {
            let cur = m.ints[&v].clone();
            if cur.is_zero() {
                break;
            }
            let half: BigInt = &cur / 2;
            if half == cur {
                break;
            }
            m.ints.insert(v, half.clone());
            if !eval_clauses(p, m) {
                m.ints.insert(v, cur);
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{f_and, f_cmp, f_not, f_or, t_int, t_var};

    fn symbols(names: &[(&str, Sort)]) -> BTreeMap<String, Sort> {
        names
            .iter()
            .map(|(n, s)| (n.to_string(), *s))
            .collect()
    }

    fn solve_formula(f: &FormulaRef, syms: &BTreeMap<String, Sort>) -> GroundResult {
        let mut c = Clausifier::new(syms);
        c.assert_formula(f).unwrap();
        let p = c.finish();
        dpll(&p, &Deadline::none()).unwrap()
    }

    #[test]
    fn fig1_instance_is_sat() {
        // x >= 1 && y <= -1 && 10x + 6y <= 0
        let syms = symbols(&[("x", Sort::Int), ("y", Sort::Int)]);
        let f = f_and(vec![
            f_cmp(CmpOp::Ge, t_var("x"), t_int(1)),
            f_cmp(CmpOp::Le, t_var("y"), t_int(-1)),
            f_cmp(
                CmpOp::Le,
                Rc::new(Term::Add(
                    Rc::new(Term::Mul(t_int(10), t_var("x"))),
                    Rc::new(Term::Mul(t_int(6), t_var("y"))),
                )),
                t_int(0),
            ),
        ]);
        match solve_formula(&f, &syms) {
            GroundResult::Sat(_) => {}
            GroundResult::Unsat => panic!("expected sat"),
        }
    }

    #[test]
    fn antisymmetry_unsat() {
        let syms = symbols(&[("x", Sort::Int), ("y", Sort::Int)]);
        let f = f_and(vec![
            f_cmp(CmpOp::Lt, t_var("x"), t_var("y")),
            f_cmp(CmpOp::Lt, t_var("y"), t_var("x")),
        ]);
        assert!(matches!(solve_formula(&f, &syms), GroundResult::Unsat));
    }

    #[test]
    fn boolean_structure() {
        let syms = symbols(&[("x", Sort::Int)]);
        // (x >= 5 || x <= -5) && -4 <= x <= 4  is unsat
        let f = f_and(vec![
            f_or(vec![
                f_cmp(CmpOp::Ge, t_var("x"), t_int(5)),
                f_cmp(CmpOp::Le, t_var("x"), t_int(-5)),
            ]),
            f_cmp(CmpOp::Ge, t_var("x"), t_int(-4)),
            f_cmp(CmpOp::Le, t_var("x"), t_int(4)),
        ]);
        assert!(matches!(solve_formula(&f, &syms), GroundResult::Unsat));
    }

    #[test]
    fn select_consistency() {
        // a == b && i == j && select(h,a,i) != select(h,b,j) is unsat
        let syms = symbols(&[
            ("a", Sort::Ref),
            ("b", Sort::Ref),
            ("i", Sort::Int),
            ("j", Sort::Int),
        ]);
        let h: HeapRef = Rc::new(HeapExpr::Var("$heap".into()));
        let f = f_and(vec![
            Rc::new(Formula::RefEq(t_var("a"), t_var("b"))),
            f_cmp(CmpOp::Eq, t_var("i"), t_var("j")),
            f_not(f_cmp(
                CmpOp::Eq,
                Rc::new(Term::Select(h.clone(), t_var("a"), t_var("i"))),
                Rc::new(Term::Select(h, t_var("b"), t_var("j"))),
            )),
        ]);
        assert!(matches!(solve_formula(&f, &syms), GroundResult::Unsat));
    }

    #[test]
    fn read_over_write() {
        // select(store(h,a,i,42), a, i) == 42 must be valid: its negation unsat
        let syms = symbols(&[("a", Sort::Ref), ("i", Sort::Int)]);
        let h: HeapRef = Rc::new(HeapExpr::Var("$heap".into()));
        let stored: HeapRef = Rc::new(HeapExpr::Store {
            heap: h,
            array: t_var("a"),
            index: t_var("i"),
            value: Arg::T(t_int(42)),
        });
        let f = f_not(f_cmp(
            CmpOp::Eq,
            Rc::new(Term::Select(stored, t_var("a"), t_var("i"))),
            t_int(42),
        ));
        assert!(matches!(solve_formula(&f, &syms), GroundResult::Unsat));
    }

    #[test]
    fn read_over_write_other_cell() {
        // i != j: select(store(h,a,i,42), a, j) keeps the old value
        let syms = symbols(&[("a", Sort::Ref), ("i", Sort::Int), ("j", Sort::Int)]);
        let h: HeapRef = Rc::new(HeapExpr::Var("$heap".into()));
        let old = Rc::new(Term::Select(h.clone(), t_var("a"), t_var("j")));
        let stored: HeapRef = Rc::new(HeapExpr::Store {
            heap: h,
            array: t_var("a"),
            index: t_var("i"),
            value: Arg::T(t_int(42)),
        });
        let f = f_and(vec![
            f_not(f_cmp(CmpOp::Eq, t_var("i"), t_var("j"))),
            f_not(f_cmp(
                CmpOp::Eq,
                Rc::new(Term::Select(stored, t_var("a"), t_var("j"))),
                old,
            )),
        ]);
        assert!(matches!(solve_formula(&f, &syms), GroundResult::Unsat));
    }

    #[test]
    fn euclidean_division_by_literal() {
        // x == 7 && x / 2 != 3 is unsat; also (-7) mod 2 == 1 (Euclidean)
        let syms = symbols(&[("x", Sort::Int)]);
        let f = f_and(vec![
            f_cmp(CmpOp::Eq, t_var("x"), t_int(7)),
            f_not(f_cmp(
                CmpOp::Eq,
                Rc::new(Term::Div(t_var("x"), t_int(2))),
                t_int(3),
            )),
        ]);
        assert!(matches!(solve_formula(&f, &syms), GroundResult::Unsat));
        let g = f_and(vec![
            f_cmp(CmpOp::Eq, t_var("x"), t_int(-7)),
            f_not(f_cmp(
                CmpOp::Eq,
                Rc::new(Term::Mod(t_var("x"), t_int(2))),
                t_int(1),
            )),
        ]);
        assert!(matches!(solve_formula(&g, &syms), GroundResult::Unsat));
    }

    #[test]
    fn nonlinear_is_unsupported() {
        let syms = symbols(&[("x", Sort::Int), ("y", Sort::Int)]);
        let f = f_cmp(
            CmpOp::Ge,
            Rc::new(Term::Mul(t_var("x"), t_var("y"))),
            t_int(0),
        );
        let mut c = Clausifier::new(&syms);
        assert!(matches!(
            c.assert_formula(&f),
            Err(ClausifyError::Unsupported(_))
        ));
    }

    #[test]
    fn minimization_shrinks_toward_zero() {
        let syms = symbols(&[("x", Sort::Int), ("y", Sort::Int)]);
        // x >= 1, 10x + 6y <= 0: minimal-ish model has x = 1, y = -2
        let f = f_and(vec![
            f_cmp(CmpOp::Ge, t_var("x"), t_int(1)),
            f_cmp(
                CmpOp::Le,
                Rc::new(Term::Add(
                    Rc::new(Term::Mul(t_int(10), t_var("x"))),
                    Rc::new(Term::Mul(t_int(6), t_var("y"))),
                )),
                t_int(0),
            ),
        ]);
        let mut c = Clausifier::new(&syms);
        c.assert_formula(&f).unwrap();
        let p = c.finish();
        let GroundResult::Sat(mut m) = dpll(&p, &Deadline::none()).unwrap() else {
            panic!("expected sat");
        };
        minimize_model(&p, &mut m);
        assert!(eval_clauses(&p, &m));
        let x = p.lookup_int("x").unwrap();
        let y = p.lookup_int("y").unwrap();
        assert_eq!(m.ints[&x], BigInt::from(1));
        assert_eq!(m.ints[&y], BigInt::from(-2));
    }
}
