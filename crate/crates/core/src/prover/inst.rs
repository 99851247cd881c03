//! Skolemization and heuristic quantifier instantiation.
//!
//! The negated verification condition is put into negation normal form;
//! existentials outside any universal become fresh skolem constants, and
//! each remaining universal is expanded into the conjunction of its
//! instances at every ground `Int`-sorted term of the formula (skolem
//! constants and select indices included), for a configurable number of
//! rounds with deduplication. Universal hypotheses only weaken under finite
//! instantiation, so an unsatisfiable ground core still soundly proves the
//! original condition; satisfiable cores may be spurious, which is what the
//! replay check is for.

use crate::logic::*;
use num_bigint::BigInt;
use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

#[derive(Debug, Clone)]
pub enum InstOutcome {
    /// Quantifier-free formula plus the skolem constants introduced.
    Ground {
        formula: FormulaRef,
        skolems: Vec<String>,
        instantiations: u32,
    },
    Unsupported(String),
    InstantiationLimit,
}

/// Negation normal form; `positive == false` negates.
fn nnf(f: &FormulaRef, positive: bool) -> FormulaRef {
    match &**f {
        Formula::Bool(b) => f_bool(*b == positive),
        Formula::BoolVar(_)
        | Formula::Cmp(..)
        | Formula::RefEq(..)
        | Formula::SelectBool(..)
        | Formula::ApplyBool(..) => {
            if positive {
                f.clone()
            } else {
                f_not(f.clone())
            }
        }
        Formula::Not(g) => nnf(g, !positive),
        Formula::And(fs) => {
            let parts: Vec<FormulaRef> = fs.iter().map(|g| nnf(g, positive)).collect();
            if positive {
                f_and(parts)
            } else {
                f_or(parts)
            }
        }
        Formula::Or(fs) => {
            let parts: Vec<FormulaRef> = fs.iter().map(|g| nnf(g, positive)).collect();
            if positive {
                f_or(parts)
            } else {
                f_and(parts)
            }
        }
        Formula::Implies(p, q) => {
            if positive {
                f_or(vec![nnf(p, false), nnf(q, true)])
            } else {
                f_and(vec![nnf(p, true), nnf(q, false)])
            }
        }
        Formula::Iff(p, q) => {
            // (p ∧ q) ∨ (¬p ∧ ¬q), negated: (p ∧ ¬q) ∨ (¬p ∧ q)
            if positive {
                f_or(vec![
                    f_and(vec![nnf(p, true), nnf(q, true)]),
                    f_and(vec![nnf(p, false), nnf(q, false)]),
                ])
            } else {
                f_or(vec![
                    f_and(vec![nnf(p, true), nnf(q, false)]),
                    f_and(vec![nnf(p, false), nnf(q, true)]),
                ])
            }
        }
        Formula::Forall(x, body) => {
            let inner = nnf(body, positive);
            if positive {
                f_forall(x.clone(), inner)
            } else {
                f_exists(x.clone(), inner)
            }
        }
        Formula::Exists(x, body) => {
            let inner = nnf(body, positive);
            if positive {
                f_exists(x.clone(), inner)
            } else {
                f_forall(x.clone(), inner)
            }
        }
    }
}

/// Replace existentials that are not under any universal with fresh skolem
/// constants. Existentials under a universal are outside the supported
/// fragment.
fn skolemize(
    f: &FormulaRef,
    under_forall: bool,
    next: &mut u32,
    skolems: &mut Vec<String>,
) -> Result<FormulaRef, String> {
    Ok(match &**f {
        Formula::Exists(x, body) => {
            if under_forall {
                return Err("existential under a universal quantifier".into());
            }
            let name = format!("$sk{}", *next);
            *next += 1;
            skolems.push(name.clone());
            let inner = subst_formula(body, &Subst::one(x.clone(), Arg::T(t_var(name))));
            skolemize(&inner, under_forall, next, skolems)?
        }
        Formula::Forall(x, body) => Rc::new(Formula::Forall(
            x.clone(),
            skolemize(body, true, next, skolems)?,
        )),
        Formula::And(fs) => f_and(
            fs.iter()
                .map(|g| skolemize(g, under_forall, next, skolems))
                .collect::<Result<_, _>>()?,
        ),
        Formula::Or(fs) => f_or(
            fs.iter()
                .map(|g| skolemize(g, under_forall, next, skolems))
                .collect::<Result<_, _>>()?,
        ),
        Formula::Not(g) => f_not(skolemize(g, under_forall, next, skolems)?),
        // NNF leaves no Implies/Iff above atoms, but handle defensively
        Formula::Implies(p, q) => f_implies(
            skolemize(p, under_forall, next, skolems)?,
            skolemize(q, under_forall, next, skolems)?,
        ),
        Formula::Iff(p, q) => f_iff(
            skolemize(p, under_forall, next, skolems)?,
            skolemize(q, under_forall, next, skolems)?,
        ),
        _ => f.clone(),
    })
}

// -- ground term harvesting ---------------------------------------------------

fn term_is_ground(t: &TermRef, bound: &[String]) -> bool {
    let mut fv = FreeVars::default();
    free_vars_term(t, &mut fv, &mut Vec::new());
    bound.iter().all(|b| !fv.contains(b))
}

fn harvest_terms(
    f: &FormulaRef,
    symbols: &BTreeMap<String, Sort>,
    bound: &mut Vec<String>,
    out: &mut BTreeSet<TermRef>,
) {
    match &**f {
        Formula::Cmp(_, a, b) => {
            harvest_int_term(a, symbols, bound, out);
            harvest_int_term(b, symbols, bound, out);
        }
        Formula::RefEq(a, b) => {
            harvest_subterms(a, symbols, bound, out);
            harvest_subterms(b, symbols, bound, out);
        }
        Formula::SelectBool(_, a, i) => {
            harvest_subterms(a, symbols, bound, out);
            harvest_int_term(i, symbols, bound, out);
        }
        Formula::ApplyBool(_, args) => {
            for a in args {
                if let Arg::T(t) = a {
                    harvest_subterms(t, symbols, bound, out);
                }
                if let Arg::F(g) = a {
                    harvest_terms(g, symbols, bound, out);
                }
            }
        }
        Formula::Not(g) => harvest_terms(g, symbols, bound, out),
        Formula::And(fs) | Formula::Or(fs) => {
            for g in fs {
                harvest_terms(g, symbols, bound, out);
            }
        }
        Formula::Implies(p, q) | Formula::Iff(p, q) => {
            harvest_terms(p, symbols, bound, out);
            harvest_terms(q, symbols, bound, out);
        }
        Formula::Forall(x, b) | Formula::Exists(x, b) => {
            bound.push(x.clone());
            harvest_terms(b, symbols, bound, out);
            bound.pop();
        }
        Formula::Bool(_) | Formula::BoolVar(_) => {}
    }
}

fn is_int_sorted(t: &TermRef, symbols: &BTreeMap<String, Sort>) -> bool {
    match &**t {
        Term::Var(x) => !matches!(symbols.get(x), Some(Sort::Ref)),
        Term::Null => false,
        Term::Ite(_, a, _) => is_int_sorted(a, symbols),
        Term::Apply(..) => false, // unknown result sort: skip as a candidate
        _ => true,
    }
}

/// Record `t` itself (when Int-sorted and ground) and recurse into subterms.
/// Select and application terms are traversed for their indices and
/// arguments but are not candidates themselves, which keeps the candidate
/// set from feeding back into itself quadratically.
fn harvest_int_term(
    t: &TermRef,
    symbols: &BTreeMap<String, Sort>,
    bound: &mut Vec<String>,
    out: &mut BTreeSet<TermRef>,
) {
    let opaque = matches!(&**t, Term::Select(..) | Term::Apply(..) | Term::Ite(..));
    if !opaque && is_int_sorted(t, symbols) && term_is_ground(t, bound) {
        out.insert(t.clone());
    }
    harvest_subterms(t, symbols, bound, out);
}

fn harvest_subterms(
    t: &TermRef,
    symbols: &BTreeMap<String, Sort>,
    bound: &mut Vec<String>,
    out: &mut BTreeSet<TermRef>,
) {
    match &**t {
        Term::IntLit(_) | Term::Var(_) | Term::Null => {}
        Term::Neg(a) => harvest_int_term(a, symbols, bound, out),
        Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) | Term::Div(a, b) | Term::Mod(a, b) => {
            harvest_int_term(a, symbols, bound, out);
            harvest_int_term(b, symbols, bound, out);
        }
        Term::Select(_, a, i) => {
            harvest_subterms(a, symbols, bound, out);
            harvest_int_term(i, symbols, bound, out);
        }
        Term::Length(a) => harvest_subterms(a, symbols, bound, out),
        Term::Ite(c, a, b) => {
            harvest_terms(c, symbols, bound, out);
            harvest_int_term(a, symbols, bound, out);
            harvest_int_term(b, symbols, bound, out);
        }
        Term::Apply(_, args) => {
            for a in args {
                match a {
                    Arg::T(x) => harvest_int_term(x, symbols, bound, out),
                    Arg::F(g) => harvest_terms(g, symbols, bound, out),
                    Arg::H(..) => {}
                }
            }
        }
    }
}

fn expand(
    f: &FormulaRef,
    candidates: &[TermRef],
    budget: &mut i64,
) -> Result<FormulaRef, ()> {
    Ok(match &**f {
        Formula::Forall(x, body) => {
            let mut parts = Vec::with_capacity(candidates.len());
            for t in candidates {
                *budget -= 1;
                if *budget < 0 {
                    return Err(());
                }
                let inst = subst_formula(body, &Subst::one(x.clone(), Arg::T(t.clone())));
                parts.push(expand(&inst, candidates, budget)?);
            }
            f_and(parts)
        }
        Formula::And(fs) => f_and(
            fs.iter()
                .map(|g| expand(g, candidates, budget))
                .collect::<Result<_, _>>()?,
        ),
        Formula::Or(fs) => f_or(
            fs.iter()
                .map(|g| expand(g, candidates, budget))
                .collect::<Result<_, _>>()?,
        ),
        Formula::Not(g) => f_not(expand(g, candidates, budget)?),
        Formula::Implies(p, q) => f_implies(
            expand(p, candidates, budget)?,
            expand(q, candidates, budget)?,
        ),
        Formula::Iff(p, q) => f_iff(
            expand(p, candidates, budget)?,
            expand(q, candidates, budget)?,
        ),
        _ => f.clone(),
    })
}

fn has_quantifier(f: &FormulaRef) -> bool {
    match &**f {
        Formula::Forall(..) | Formula::Exists(..) => true,
        Formula::Not(g) => has_quantifier(g),
        Formula::And(fs) | Formula::Or(fs) => fs.iter().any(has_quantifier),
        Formula::Implies(p, q) | Formula::Iff(p, q) => has_quantifier(p) || has_quantifier(q),
        _ => false,
    }
}

/// Skolemize the (already negated) condition and instantiate its universal
/// hypotheses at ground terms. `symbols` is extended with skolem constants.
pub fn skolemize_and_instantiate(
    negated: &FormulaRef,
    symbols: &mut BTreeMap<String, Sort>,
    rounds: u32,
    max_instantiations: u32,
) -> InstOutcome {
    let normalized = nnf(negated, true);
    let mut skolems = Vec::new();
    let mut next = 0u32;
    let skolemized = match skolemize(&normalized, false, &mut next, &mut skolems) {
        Ok(f) => f,
        Err(reason) => return InstOutcome::Unsupported(reason),
    };
    for sk in &skolems {
        symbols.insert(sk.clone(), Sort::Int);
    }

    if !has_quantifier(&skolemized) {
        return InstOutcome::Ground {
            formula: skolemized,
            skolems,
            instantiations: 0,
        };
    }

    // seed candidates with 0 and 1 so vacuous quantifications still ground out
    let mut candidates: BTreeSet<TermRef> = BTreeSet::new();
    candidates.insert(Rc::new(Term::IntLit(BigInt::from(0))));
    candidates.insert(Rc::new(Term::IntLit(BigInt::from(1))));
    harvest_terms(&skolemized, symbols, &mut Vec::new(), &mut candidates);

    let mut result = skolemized.clone();
    let mut used = 0i64;
    for _round in 0..rounds.max(1) {
        let mut ordered: Vec<TermRef> = candidates.iter().cloned().collect();
        ordered.sort_by_key(|t| (t.to_string().len(), t.to_string()));
        let mut budget = i64::from(max_instantiations) - used;
        match expand(&skolemized, &ordered, &mut budget) {
            Ok(f) => {
                used = i64::from(max_instantiations) - budget;
                result = f;
            }
            Err(()) => return InstOutcome::InstantiationLimit,
        }
        let before = candidates.len();
        harvest_terms(&result, symbols, &mut Vec::new(), &mut candidates);
        if candidates.len() == before {
            break;
        }
    }
    InstOutcome::Ground {
        formula: result,
        skolems,
        instantiations: used.max(0) as u32,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{f_cmp, f_implies, f_not, t_add, t_int, t_var, CmpOp};

    #[test]
    fn tautology_negation_grounds_without_quantifiers() {
        // VC: forall is implicit; negation of x >= 0 ==> x + 1 > 0
        let vc = f_implies(
            f_cmp(CmpOp::Ge, t_var("x"), t_int(0)),
            f_cmp(CmpOp::Gt, t_add(t_var("x"), t_int(1)), t_int(0)),
        );
        let mut symbols: BTreeMap<String, Sort> = BTreeMap::new();
        symbols.insert("x".into(), Sort::Int);
        let out = skolemize_and_instantiate(&f_not(vc), &mut symbols, 3, 1000);
        let InstOutcome::Ground { formula, .. } = out else {
            panic!("expected ground outcome");
        };
        assert!(!has_quantifier(&formula));
    }

    #[test]
    fn negated_forall_goal_becomes_skolem() {
        // ¬(forall i :: i >= 0) → skolem constant witnesses
        let f = f_not(f_forall("i", f_cmp(CmpOp::Ge, t_var("i"), t_int(0))));
        let mut symbols = BTreeMap::new();
        let out = skolemize_and_instantiate(&f, &mut symbols, 3, 1000);
        let InstOutcome::Ground {
            formula, skolems, ..
        } = out
        else {
            panic!()
        };
        assert_eq!(skolems.len(), 1);
        assert!(symbols.contains_key(&skolems[0]));
        assert!(formula.to_string().contains("$sk0"));
    }

    #[test]
    fn universal_hypothesis_instantiates_at_skolem() {
        // hypothesis: forall i :: 0 <= i < n ==> sel(i) >= 18 (as a boolean apply)
        // negated goal: exists k :: 0 <= k < n && sel(k) < 18
        let hyp = f_forall(
            "i",
            f_implies(
                f_and(vec![
                    f_cmp(CmpOp::Le, t_int(0), t_var("i")),
                    f_cmp(CmpOp::Lt, t_var("i"), t_var("n")),
                ]),
                f_cmp(
                    CmpOp::Ge,
                    Rc::new(Term::Apply("val".into(), vec![Arg::T(t_var("i"))])),
                    t_int(18),
                ),
            ),
        );
        let goal_neg = f_exists(
            "k",
            f_and(vec![
                f_cmp(CmpOp::Le, t_int(0), t_var("k")),
                f_cmp(CmpOp::Lt, t_var("k"), t_var("n")),
                f_cmp(
                    CmpOp::Lt,
                    Rc::new(Term::Apply("val".into(), vec![Arg::T(t_var("k"))])),
                    t_int(18),
                ),
            ]),
        );
        let mut symbols = BTreeMap::new();
        symbols.insert("n".to_string(), Sort::Int);
        let negated = f_and(vec![hyp, goal_neg]);
        let out = skolemize_and_instantiate(&negated, &mut symbols, 3, 10_000);
        let InstOutcome::Ground { formula, .. } = out else {
            panic!()
        };
        // the hypothesis instance at the skolem constant must be present
        assert!(formula.to_string().contains("val($sk0)"), "{formula}");
    }

    #[test]
    fn alternating_quantifier_unsupported() {
        let f = f_forall(
            "i",
            f_exists("j", f_cmp(CmpOp::Gt, t_var("j"), t_var("i"))),
        );
        let mut symbols = BTreeMap::new();
        assert!(matches!(
            skolemize_and_instantiate(&f, &mut symbols, 3, 1000),
            InstOutcome::Unsupported(_)
        ));
    }

    #[test]
    fn instantiation_cap_reports_limit() {
        let mut parts = Vec::new();
        for k in 0..40 {
            parts.push(f_forall(
                format!("i{k}"),
                f_cmp(CmpOp::Ge, t_add(t_var(format!("i{k}")), t_var("a")), t_int(0)),
            ));
        }
        // dozens of ground terms × dozens of universals overflows a tiny cap
        for k in 0..40 {
            parts.push(f_cmp(CmpOp::Ge, t_var(format!("g{k}")), t_int(k)));
        }
        let f = f_and(parts);
        let mut symbols: BTreeMap<String, Sort> = BTreeMap::new();
        symbols.insert("a".into(), Sort::Int);
        for k in 0..40 {
            symbols.insert(format!("g{k}"), Sort::Int);
        }
        assert!(matches!(
            skolemize_and_instantiate(&f, &mut symbols, 3, 100),
            InstOutcome::InstantiationLimit
        ));
    }

    #[test]
    fn zero_universals_identity() {
        let f = f_cmp(CmpOp::Ge, t_var("x"), t_int(0));
        let mut symbols: BTreeMap<String, Sort> = BTreeMap::new();
        symbols.insert("x".into(), Sort::Int);
        let InstOutcome::Ground {
            formula,
            instantiations,
            ..
        } = skolemize_and_instantiate(&f, &mut symbols, 3, 1000)
        else {
            panic!()
        };
        assert_eq!(instantiations, 0);
        assert_eq!(formula, f);
    }
}
