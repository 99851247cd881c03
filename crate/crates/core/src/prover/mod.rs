//! Deciding verification conditions.
//!
//! The built-in backend negates the condition, skolemizes, instantiates
//! universal hypotheses at ground terms, and runs DPLL over linear integer
//! arithmetic and array atoms. `Proved` means the ground core is
//! unsatisfiable, which soundly implies validity; `Counterexample` carries a
//! total model of the ground core, minimized toward human-scale magnitudes.
//! Valid conditions outside the instantiation heuristic's reach come back
//! `Unknown`, never silently proved.
//!
//! The alternative backend serializes the negated condition to SMT-LIB2 and
//! drives an external solver process (see [`smtlib`]).

pub mod ground;
pub mod inst;
pub mod lia;
pub mod smtlib;

use crate::logic::*;
use crate::typecheck::TypedProgram;
use crate::vcgen::{inline_functions, VerificationCondition};
use ground::{Clausifier, ClausifyError, GroundModel, GroundProblem, GroundResult, RefTerm};
use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use std::collections::BTreeMap;
use std::fmt;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScalarValue {
    Int(BigInt),
    Bool(bool),
}

impl fmt::Display for ScalarValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarValue::Int(n) => write!(f, "{n}"),
            ScalarValue::Bool(b) => write!(f, "{b}"),
        }
    }
}

impl Serialize for ScalarValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ScalarValue::Int(n) => match n.to_i64() {
                Some(v) => s.serialize_i64(v),
                None => s.serialize_str(&n.to_string()),
            },
            ScalarValue::Bool(b) => s.serialize_bool(*b),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArrayValue {
    Null,
    Array {
        length: BigInt,
        entries: BTreeMap<BigInt, ScalarValue>,
        default: ScalarValue,
    },
}

impl Serialize for ArrayValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ArrayValue::Null => s.serialize_none(),
            ArrayValue::Array {
                length,
                entries,
                default,
            } => {
                let mut m = s.serialize_map(Some(3))?;
                m.serialize_entry(
                    "length",
                    &length.to_i64().unwrap_or(i64::MAX),
                )?;
                let entries: BTreeMap<String, &ScalarValue> =
                    entries.iter().map(|(k, v)| (k.to_string(), v)).collect();
                m.serialize_entry("entries", &entries)?;
                m.serialize_entry("default", default)?;
                m.end()
            }
        }
    }
}

/// Counterexample assignment: scalar values plus array shapes, in terms of
/// the method's prelude constants (in-parameters, havoc symbols, skolems).
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Model {
    pub scalars: BTreeMap<String, ScalarValue>,
    pub arrays: BTreeMap<String, ArrayValue>,
}

impl Model {
    pub fn int(&self, name: &str) -> Option<&BigInt> {
        match self.scalars.get(name) {
            Some(ScalarValue::Int(n)) => Some(n),
            _ => None,
        }
    }

    pub fn render(&self) -> String {
        let mut parts = Vec::new();
        for (k, v) in &self.scalars {
            if k.starts_with('$') {
                continue;
            }
            parts.push(format!("{k} = {v}"));
        }
        for (k, v) in &self.arrays {
            match v {
                ArrayValue::Null => parts.push(format!("{k} = null")),
                ArrayValue::Array {
                    length, entries, ..
                } => {
                    let cells: Vec<String> =
                        entries.iter().map(|(i, x)| format!("[{i}]={x}")).collect();
                    parts.push(format!("{k} = array(len={length}{}{})",
                        if cells.is_empty() { "" } else { ", " },
                        cells.join(", ")));
                }
            }
        }
        parts.join(", ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnknownReason {
    InstantiationLimit,
    Timeout,
    ExternalSolverUnknown,
    UnsupportedFragment(String),
}

impl fmt::Display for UnknownReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnknownReason::InstantiationLimit => write!(f, "instantiation-limit"),
            UnknownReason::Timeout => write!(f, "timeout"),
            UnknownReason::ExternalSolverUnknown => write!(f, "external-solver-unknown"),
            UnknownReason::UnsupportedFragment(what) => {
                write!(f, "unsupported-fragment: {what}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Proved,
    Counterexample(Model),
    Unknown(UnknownReason),
}

impl Verdict {
    pub fn is_proved(&self) -> bool {
        matches!(self, Verdict::Proved)
    }
}

#[derive(Debug, Clone)]
pub struct ProverConfig {
    pub timeout_ms: u64,
    pub instantiation_rounds: u32,
    pub max_instantiations: u32,
    pub fuel: u32,
}

impl Default for ProverConfig {
    fn default() -> Self {
        ProverConfig {
            timeout_ms: 10_000,
            instantiation_rounds: 3,
            max_instantiations: 10_000,
            fuel: 2,
        }
    }
}

/// Decide the (already inlined) closed formula with the built-in procedure.
pub fn prove_formula(
    formula: &FormulaRef,
    symbols: &BTreeMap<String, Sort>,
    cfg: &ProverConfig,
) -> Verdict {
    let deadline = lia::Deadline {
        at: Some(Instant::now() + Duration::from_millis(cfg.timeout_ms)),
    };
    let negated = f_not(formula.clone());
    let mut symbols = symbols.clone();
    let ground = match inst::skolemize_and_instantiate(
        &negated,
        &mut symbols,
        cfg.instantiation_rounds,
        cfg.max_instantiations,
    ) {
        inst::InstOutcome::Ground { formula, .. } => formula,
        inst::InstOutcome::Unsupported(reason) => {
            return Verdict::Unknown(UnknownReason::UnsupportedFragment(reason))
        }
        inst::InstOutcome::InstantiationLimit => {
            return Verdict::Unknown(UnknownReason::InstantiationLimit)
        }
    };

    let mut clausifier = Clausifier::new(&symbols);
    if let Err(ClausifyError::Unsupported(what)) = clausifier.assert_formula(&ground) {
        return Verdict::Unknown(UnknownReason::UnsupportedFragment(what));
    }
    let problem = clausifier.finish();

    match ground::dpll(&problem, &deadline) {
        Ok(GroundResult::Unsat) => Verdict::Proved,
        Ok(GroundResult::Sat(mut gm)) => {
            ground::minimize_model(&problem, &mut gm);
            debug_assert!(ground::eval_clauses(&problem, &gm));
            Verdict::Counterexample(build_model(&problem, &gm, &symbols))
        }
        Err(ground::SolveAbort::Timeout) => Verdict::Unknown(UnknownReason::Timeout),
    }
}

/// Inline function bodies into the condition's formula, then decide it.
pub fn prove(tp: &TypedProgram, vc: &VerificationCondition, cfg: &ProverConfig) -> Verdict {
    let formula = inline_functions(tp, &vc.formula(), cfg.fuel);
    prove_formula(&formula, &vc.symbols, cfg)
}

fn build_model(
    p: &GroundProblem,
    gm: &GroundModel,
    symbols: &BTreeMap<String, Sort>,
) -> Model {
    let mut model = Model::default();
    let null_class = p
        .lookup_ref(&RefTerm::Null)
        .map(|id| gm.ref_class[id]);
    for (name, sort) in symbols {
        match sort {
            Sort::Int => {
                let value = p
                    .lookup_int(name)
                    .and_then(|v| gm.ints.get(&v).cloned())
                    .unwrap_or_else(BigInt::zero);
                model
                    .scalars
                    .insert(name.clone(), ScalarValue::Int(value));
            }
            Sort::Bool => {
                let value = p
                    .lookup_bool(name)
                    .map(|a| gm.bools[a as usize])
                    .unwrap_or(false);
                model
                    .scalars
                    .insert(name.clone(), ScalarValue::Bool(value));
            }
            Sort::Ref => {
                let Some(id) = p.lookup_ref(&RefTerm::Var(name.clone())) else {
                    model.arrays.insert(name.clone(), ArrayValue::Null);
                    continue;
                };
                let class = gm.ref_class[id];
                if Some(class) == null_class {
                    model.arrays.insert(name.clone(), ArrayValue::Null);
                    continue;
                }
                let mut length = BigInt::zero();
                for (r, v) in &p.lens {
                    if gm.ref_class[*r] == class {
                        length = gm.ints[v].clone();
                        break;
                    }
                }
                if length.is_negative() {
                    length = BigInt::zero();
                }
                let mut entries = BTreeMap::new();
                let mut default = ScalarValue::Int(BigInt::zero());
                for rec in &p.selects {
                    if gm.ref_class[rec.array] != class {
                        continue;
                    }
                    // only the entry heaps of the initial state feed the model
                    if rec.heap != ElemSort::Int.heap_var() && rec.heap != ElemSort::Bool.heap_var()
                    {
                        continue;
                    }
                    let idx = rec.index.eval(&gm.ints);
                    if idx < BigInt::zero() || idx >= length {
                        continue;
                    }
                    let value = match rec.value {
                        ground::SelectValue::Int(v) => ScalarValue::Int(gm.ints[&v].clone()),
                        ground::SelectValue::Bool(a) => {
                            default = ScalarValue::Bool(false);
                            ScalarValue::Bool(gm.bools[a as usize])
                        }
                    };
                    entries.insert(idx, value);
                }
                model.arrays.insert(
                    name.clone(),
                    ArrayValue::Array {
                        length,
                        entries,
                        default,
                    },
                );
            }
            Sort::HeapInt | Sort::HeapBool => {}
        }
    }
    model
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{f_cmp, f_implies, t_add, t_int, t_var, CmpOp};
    use std::rc::Rc;

    fn int_syms(names: &[&str]) -> BTreeMap<String, Sort> {
        names.iter().map(|n| (n.to_string(), Sort::Int)).collect()
    }

    #[test]
    fn arithmetic_tautology_proved() {
        // x >= 0 ==> x + 1 > 0
        let f = f_implies(
            f_cmp(CmpOp::Ge, t_var("x"), t_int(0)),
            f_cmp(CmpOp::Gt, t_add(t_var("x"), t_int(1)), t_int(0)),
        );
        let v = prove_formula(&f, &int_syms(&["x"]), &ProverConfig::default());
        assert_eq!(v, Verdict::Proved);
    }

    #[test]
    fn fee_counterexample_matches_paper_instance() {
        // numAdults >= 1 ==> 10*numAdults + 6*numChildren > 0 is invalid
        let fee = t_add(
            Rc::new(Term::Mul(t_int(10), t_var("numAdults"))),
            Rc::new(Term::Mul(t_int(6), t_var("numChildren"))),
        );
        let f = f_implies(
            f_cmp(CmpOp::Ge, t_var("numAdults"), t_int(1)),
            f_cmp(CmpOp::Gt, fee, t_int(0)),
        );
        let v = prove_formula(
            &f,
            &int_syms(&["numAdults", "numChildren"]),
            &ProverConfig::default(),
        );
        let Verdict::Counterexample(m) = v else {
            panic!("expected counterexample, got {v:?}");
        };
        let adults = m.int("numAdults").unwrap();
        let children = m.int("numChildren").unwrap();
        assert!(adults >= &BigInt::from(1));
        assert!(BigInt::from(10) * adults + BigInt::from(6) * children <= BigInt::zero());
        // minimization lands on the paper's scale
        assert_eq!(adults, &BigInt::from(1));
        assert_eq!(children, &BigInt::from(-2));
    }

    #[test]
    fn determinism_same_model_twice() {
        let fee = t_add(
            Rc::new(Term::Mul(t_int(10), t_var("a"))),
            Rc::new(Term::Mul(t_int(6), t_var("c"))),
        );
        let f = f_implies(
            f_cmp(CmpOp::Ge, t_var("a"), t_int(1)),
            f_cmp(CmpOp::Gt, fee.clone(), t_int(0)),
        );
        let v1 = prove_formula(&f, &int_syms(&["a", "c"]), &ProverConfig::default());
        let v2 = prove_formula(&f, &int_syms(&["a", "c"]), &ProverConfig::default());
        assert_eq!(v1, v2);
    }

    #[test]
    fn nonlinear_reports_unsupported_fragment() {
        let f = f_cmp(
            CmpOp::Ge,
            Rc::new(Term::Mul(t_var("x"), t_var("y"))),
            t_int(0),
        );
        let v = prove_formula(&f, &int_syms(&["x", "y"]), &ProverConfig::default());
        assert!(matches!(
            v,
            Verdict::Unknown(UnknownReason::UnsupportedFragment(_))
        ));
    }

    #[test]
    fn quantified_array_fact_proved() {
        // (forall i :: 0 <= i < len(a) ==> select(h,a,i) >= 18) && k in range
        //   ==> select(h,a,k) >= 18
        let h: HeapRef = Rc::new(HeapExpr::Var("$heap".into()));
        let hyp = f_forall(
            "i",
            f_implies(
                f_and(vec![
                    f_cmp(CmpOp::Le, t_int(0), t_var("i")),
                    f_cmp(CmpOp::Lt, t_var("i"), t_length(t_var("a"))),
                ]),
                f_cmp(
                    CmpOp::Ge,
                    Rc::new(Term::Select(h.clone(), t_var("a"), t_var("i"))),
                    t_int(18),
                ),
            ),
        );
        let goal = f_implies(
            f_and(vec![
                hyp,
                f_cmp(CmpOp::Le, t_int(0), t_var("k")),
                f_cmp(CmpOp::Lt, t_var("k"), t_length(t_var("a"))),
            ]),
            f_cmp(
                CmpOp::Ge,
                Rc::new(Term::Select(h, t_var("a"), t_var("k"))),
                t_int(18),
            ),
        );
        let mut syms = int_syms(&["k"]);
        syms.insert("a".into(), Sort::Ref);
        syms.insert("$heap".into(), Sort::HeapInt);
        let v = prove_formula(&goal, &syms, &ProverConfig::default());
        assert_eq!(v, Verdict::Proved);
    }
}
