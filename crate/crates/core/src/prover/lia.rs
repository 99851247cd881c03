//! Exact feasibility of conjunctions of linear integer constraints.
//!
//! Variable elimination in the style of Cooper's algorithm: coefficients of
//! the eliminated variable are scaled to a common λ, a divisibility
//! constraint `λ | y` keeps the scaling exact, and the variable is removed
//! either by exact Fourier–Motzkin (unit coefficients, no divisibilities) or
//! by the case split `y = l + i` over each lower bound `l` and offset
//! `i ∈ [0, M)` with `M` the lcm of the live moduli. The split is an
//! equivalence, so the procedure is complete for conjunctions; every SAT
//! answer carries a witness assignment.
//!
//! All arithmetic is exact (`BigInt`); the gcd test refutes equalities like
//! `3x = 2` immediately.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;
use std::time::Instant;

pub type VarId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct LinSum {
    /// Non-zero coefficients only.
    pub coeffs: BTreeMap<VarId, BigInt>,
    pub constant: BigInt,
}

impl LinSum {
    pub fn constant(c: impl Into<BigInt>) -> Self {
        LinSum {
            coeffs: BTreeMap::new(),
            constant: c.into(),
        }
    }

    pub fn var(v: VarId) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(v, BigInt::one());
        LinSum {
            coeffs,
            constant: BigInt::zero(),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn add_scaled(&mut self, other: &LinSum, k: &BigInt) {
        if k.is_zero() {
            return;
        }
        for (v, c) in &other.coeffs {
            let e = self.coeffs.entry(*v).or_insert_with(BigInt::zero);
            *e += c * k;
            if e.is_zero() {
                self.coeffs.remove(v);
            }
        }
        self.constant += &other.constant * k;
    }

    pub fn add(&mut self, other: &LinSum) {
        self.add_scaled(other, &BigInt::one());
    }

    pub fn sub(&mut self, other: &LinSum) {
        self.add_scaled(other, &BigInt::from(-1));
    }

    pub fn scaled(&self, k: &BigInt) -> LinSum {
        let mut out = LinSum::default();
        out.add_scaled(self, k);
        out
    }

    pub fn negated(&self) -> LinSum {
        self.scaled(&BigInt::from(-1))
    }

    pub fn add_const(&mut self, k: impl Into<BigInt>) {
        self.constant += k.into();
    }

    pub fn coeff(&self, v: VarId) -> BigInt {
        self.coeffs.get(&v).cloned().unwrap_or_else(BigInt::zero)
    }

    /// Evaluate under `a`; unassigned variables count as 0.
    pub fn eval(&self, a: &BTreeMap<VarId, BigInt>) -> BigInt {
        let mut acc = self.constant.clone();
        for (v, c) in &self.coeffs {
            if let Some(val) = a.get(v) {
                acc += c * val;
            }
        }
        acc
    }

    fn coeff_gcd(&self) -> BigInt {
        let mut g = BigInt::zero();
        for c in self.coeffs.values() {
            g = g.gcd(c);
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Constraint {
    /// sum ≥ 0
    Ge(LinSum),
    /// sum = 0
    Eq(LinSum),
    /// m | sum, with m ≥ 2
    Div(BigInt, LinSum),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LiaResult {
    Sat(BTreeMap<VarId, BigInt>),
    Unsat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Aborted;

/// Wall-clock budget checked in solver loops.
#[derive(Debug, Clone, Copy)]
pub struct Deadline {
    pub at: Option<Instant>,
}

impl Deadline {
    pub fn none() -> Self {
        Deadline { at: None }
    }

    pub fn check(&self) -> Result<(), Aborted> {
        match self.at {
            Some(t) if Instant::now() >= t => Err(Aborted),
            _ => Ok(()),
        }
    }
}

fn floor_div(a: &BigInt, b: &BigInt) -> BigInt {
    a.div_floor(b)
}

/// Normalize in place; `Err(())` means a constant constraint is violated.
fn normalize(c: Constraint) -> Result<Option<Constraint>, ()> {
    match c {
        Constraint::Ge(mut e) => {
            if e.is_constant() {
                return if e.constant >= BigInt::zero() {
                    Ok(None)
                } else {
                    Err(())
                };
            }
            let g = e.coeff_gcd();
            if g > BigInt::one() {
                for v in e.coeffs.values_mut() {
                    *v /= &g;
                }
                e.constant = floor_div(&e.constant, &g);
            }
            Ok(Some(Constraint::Ge(e)))
        }
        Constraint::Eq(mut e) => {
            if e.is_constant() {
                return if e.constant.is_zero() { Ok(None) } else { Err(()) };
            }
            let g = e.coeff_gcd();
            if g > BigInt::one() {
                if !(&e.constant % &g).is_zero() {
                    return Err(()); // gcd of coefficients does not divide the constant
                }
                for v in e.coeffs.values_mut() {
                    *v /= &g;
                }
                e.constant /= &g;
            }
            Ok(Some(Constraint::Eq(e)))
        }
        Constraint::Div(m, mut e) => {
            let m = m.abs();
            if m <= BigInt::one() {
                return Ok(None);
            }
            // reduce coefficients into [0, m)
            let mut dead = Vec::new();
            for (v, c) in e.coeffs.iter_mut() {
                *c = c.mod_floor(&m);
                if c.is_zero() {
                    dead.push(*v);
                }
            }
            for v in dead {
                e.coeffs.remove(&v);
            }
            e.constant = e.constant.mod_floor(&m);
            if e.is_constant() {
                return if e.constant.is_zero() { Ok(None) } else { Err(()) };
            }
            Ok(Some(Constraint::Div(m, e)))
        }
    }
}

fn normalize_all(cons: Vec<Constraint>) -> Result<Vec<Constraint>, ()> {
    let mut out = Vec::with_capacity(cons.len());
    for c in cons {
        if let Some(c) = normalize(c)? {
            out.push(c);
        }
    }
    Ok(out)
}

fn substitute(cons: &[Constraint], v: VarId, rep: &LinSum) -> Vec<Constraint> {
    cons.iter()
        .map(|c| {
            let sub = |e: &LinSum| {
                let k = e.coeff(v);
                if k.is_zero() {
                    return e.clone();
                }
                let mut out = e.clone();
                out.coeffs.remove(&v);
                out.add_scaled(rep, &k);
                out
            };
            match c {
                Constraint::Ge(e) => Constraint::Ge(sub(e)),
                Constraint::Eq(e) => Constraint::Eq(sub(e)),
                Constraint::Div(m, e) => Constraint::Div(m.clone(), sub(e)),
            }
        })
        .collect()
}

fn vars_of(cons: &[Constraint]) -> Vec<VarId> {
    let mut vs = std::collections::BTreeSet::new();
    for c in cons {
        let e = match c {
            Constraint::Ge(e) | Constraint::Eq(e) | Constraint::Div(_, e) => e,
        };
        vs.extend(e.coeffs.keys().copied());
    }
    vs.into_iter().collect()
}

fn lcm(a: &BigInt, b: &BigInt) -> BigInt {
    if a.is_zero() || b.is_zero() {
        return BigInt::one();
    }
    (a * b).abs() / a.gcd(b)
}

/// Decide satisfiability over the integers; `Sat` carries a witness for
/// every variable occurring in the constraints.
pub fn solve(cons: Vec<Constraint>, deadline: &Deadline) -> Result<LiaResult, Aborted> {
    let all_vars = vars_of(&cons);
    match solve_rec(cons, deadline)? {
        Some(mut a) => {
            for v in all_vars {
                a.entry(v).or_insert_with(BigInt::zero);
            }
            Ok(LiaResult::Sat(a))
        }
        None => Ok(LiaResult::Unsat),
    }
}

fn solve_rec(
    cons: Vec<Constraint>,
    deadline: &Deadline,
) -> Result<Option<BTreeMap<VarId, BigInt>>, Aborted> {
    deadline.check()?;
    let cons = match normalize_all(cons) {
        Ok(c) => c,
        Err(()) => return Ok(None),
    };
    if cons.is_empty() {
        return Ok(Some(BTreeMap::new()));
    }

    // equalities with a unit coefficient substitute away exactly
    for (i, c) in cons.iter().enumerate() {
        if let Constraint::Eq(e) = c {
            if let Some((v, coeff)) = e
                .coeffs
                .iter()
                .find(|(_, c)| c.abs() == BigInt::one())
                .map(|(v, c)| (*v, c.clone()))
            {
                // coeff*v + rest = 0  =>  v = -rest/coeff = -coeff*rest
                let mut rest = e.clone();
                rest.coeffs.remove(&v);
                let rep = rest.scaled(&-coeff);
                let mut others: Vec<Constraint> = cons.clone();
                others.remove(i);
                let others = substitute(&others, v, &rep);
                return Ok(solve_rec(others, deadline)?.map(|mut a| {
                    let val = rep.eval(&a);
                    a.insert(v, val);
                    a
                }));
            }
        }
    }

    let vars = vars_of(&cons);
    let Some(&x) = vars.iter().min_by_key(|&&v| {
        // cheapest elimination first: smallest λ, then fewest bound pairs
        let mut lambda = BigInt::one();
        let mut lowers = 0usize;
        let mut uppers = 0usize;
        let mut divs = 0usize;
        for c in &cons {
            match c {
                Constraint::Ge(e) => {
                    let k = e.coeff(v);
                    if k > BigInt::zero() {
                        lowers += 1;
                        lambda = lcm(&lambda, &k);
                    } else if k < BigInt::zero() {
                        uppers += 1;
                        lambda = lcm(&lambda, &k);
                    }
                }
                Constraint::Eq(e) => {
                    let k = e.coeff(v);
                    if !k.is_zero() {
                        lowers += 1;
                        uppers += 1;
                        lambda = lcm(&lambda, &k);
                    }
                }
                Constraint::Div(_, e) => {
                    if !e.coeff(v).is_zero() {
                        divs += 1;
                    }
                }
            }
        }
        (lambda, lowers.max(1) * uppers.max(1) + divs, v)
    }) else {
        // constraints without variables were discharged by normalize
        return Ok(Some(BTreeMap::new()));
    };

    // split equalities on x into two inequalities
    let mut work: Vec<Constraint> = Vec::with_capacity(cons.len() + 2);
    for c in cons {
        match c {
            Constraint::Eq(e) if !e.coeff(x).is_zero() => {
                work.push(Constraint::Ge(e.clone()));
                work.push(Constraint::Ge(e.negated()));
            }
            other => work.push(other),
        }
    }

    // λ-scale: y = λ·x
    let mut lambda = BigInt::one();
    for c in &work {
        let e = match c {
            Constraint::Ge(e) | Constraint::Eq(e) | Constraint::Div(_, e) => e,
        };
        let k = e.coeff(x);
        if !k.is_zero() {
            lambda = lcm(&lambda, &k);
        }
    }

    let mut lowers: Vec<LinSum> = Vec::new(); // y >= l
    let mut uppers: Vec<LinSum> = Vec::new(); // y <= u
    let mut divs: Vec<(BigInt, LinSum)> = Vec::new(); // m | (y + v)
    let mut rest: Vec<Constraint> = Vec::new();
    if lambda > BigInt::one() {
        divs.push((lambda.clone(), LinSum::constant(0)));
    }
    for c in work {
        match c {
            Constraint::Ge(e) => {
                let k = e.coeff(x);
                if k.is_zero() {
                    rest.push(Constraint::Ge(e));
                    continue;
                }
                let scale = (&lambda / k.abs()).clone();
                let mut scaled = e.scaled(&scale);
                scaled.coeffs.remove(&x);
                if k > BigInt::zero() {
                    // λx + scaled >= 0  =>  y >= -scaled
                    lowers.push(scaled.negated());
                } else {
                    // -λx + scaled >= 0  =>  y <= scaled
                    uppers.push(scaled);
                }
            }
            Constraint::Div(m, e) => {
                let k = e.coeff(x);
                if k.is_zero() {
                    rest.push(Constraint::Div(m, e));
                    continue;
                }
                let scale = (&lambda / k.abs()).clone();
                let mut scaled = e.scaled(&scale);
                scaled.coeffs.remove(&x);
                let m2 = &m * &scale;
                if k > BigInt::zero() {
                    // m2 | y + scaled
                    divs.push((m2, scaled));
                } else {
                    // m2 | -y + scaled  <=>  m2 | y - scaled
                    divs.push((m2, scaled.negated()));
                }
            }
            Constraint::Eq(_) => unreachable!("equalities on x were split"),
        }
    }

    // exact Fourier–Motzkin when no divisibility constraints survive
    if divs.is_empty() {
        let mut proj = rest;
        for l in &lowers {
            for u in &uppers {
                let mut e = u.clone();
                e.sub(l);
                proj.push(Constraint::Ge(e));
            }
        }
        return Ok(solve_rec(proj, deadline)?.map(|mut a| {
            let y = if !lowers.is_empty() {
                lowers.iter().map(|l| l.eval(&a)).max().unwrap()
            } else if !uppers.is_empty() {
                uppers.iter().map(|u| u.eval(&a)).min().unwrap()
            } else {
                BigInt::zero()
            };
            // λ == 1 here (no divisibilities means no scaling was needed)
            a.insert(x, y);
            a
        }));
    }

    let m_all = divs
        .iter()
        .fold(BigInt::one(), |acc, (m, _)| lcm(&acc, m));

    if lowers.is_empty() {
        // unbounded below: only the residue of y modulo M matters
        let mut i = BigInt::zero();
        while i < m_all {
            deadline.check()?;
            let mut branch = rest.clone();
            for (m, v) in &divs {
                let mut e = v.clone();
                e.add_const(i.clone());
                branch.push(Constraint::Div(m.clone(), e));
            }
            for u in &uppers {
                // feasibility of the uppers is free (go low enough), nothing to add
                let _ = u;
            }
            if let Some(mut a) = solve_rec(branch, deadline)? {
                let y = if uppers.is_empty() {
                    i.clone()
                } else {
                    let u_min = uppers.iter().map(|u| u.eval(&a)).min().unwrap();
                    // largest y <= u_min with y ≡ i (mod M)
                    &i + &m_all * floor_div(&(&u_min - &i), &m_all)
                };
                let xv = &y / &lambda;
                a.insert(x, xv);
                return Ok(Some(a));
            }
            i += 1;
        }
        return Ok(None);
    }

    // the least witness sits within M of some lower bound
    for l in &lowers {
        let mut i = BigInt::zero();
        while i < m_all {
            deadline.check()?;
            let mut y_val = l.clone();
            y_val.add_const(i.clone());
            let mut branch = rest.clone();
            for lk in &lowers {
                let mut e = y_val.clone();
                e.sub(lk);
                branch.push(Constraint::Ge(e)); // l + i >= lk
            }
            for u in &uppers {
                let mut e = u.clone();
                e.sub(&y_val);
                branch.push(Constraint::Ge(e)); // u >= l + i
            }
            for (m, v) in &divs {
                let mut e = y_val.clone();
                e.add(v);
                branch.push(Constraint::Div(m.clone(), e));
            }
            if let Some(mut a) = solve_rec(branch, deadline)? {
                let y = y_val.eval(&a);
                let xv = &y / &lambda;
                a.insert(x, xv);
                return Ok(Some(a));
            }
            i += 1;
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ge(terms: &[(i64, VarId)], c: i64) -> Constraint {
        let mut e = LinSum::constant(c);
        for (k, v) in terms {
            e.add_scaled(&LinSum::var(*v), &BigInt::from(*k));
        }
        Constraint::Ge(e)
    }

    fn eq(terms: &[(i64, VarId)], c: i64) -> Constraint {
        let mut e = LinSum::constant(c);
        for (k, v) in terms {
            e.add_scaled(&LinSum::var(*v), &BigInt::from(*k));
        }
        Constraint::Eq(e)
    }

    fn check_sat(cons: Vec<Constraint>) -> BTreeMap<VarId, BigInt> {
        let cons2 = cons.clone();
        match solve(cons, &Deadline::none()).unwrap() {
            LiaResult::Sat(a) => {
                for c in &cons2 {
                    match c {
                        Constraint::Ge(e) => assert!(e.eval(&a) >= BigInt::zero(), "{c:?} under {a:?}"),
                        Constraint::Eq(e) => assert!(e.eval(&a).is_zero(), "{c:?} under {a:?}"),
                        Constraint::Div(m, e) => {
                            assert!((e.eval(&a) % m).is_zero(), "{c:?} under {a:?}")
                        }
                    }
                }
                a
            }
            LiaResult::Unsat => panic!("expected sat: {cons2:?}"),
        }
    }

    fn check_unsat(cons: Vec<Constraint>) {
        assert_eq!(solve(cons, &Deadline::none()).unwrap(), LiaResult::Unsat);
    }

    #[test]
    fn fee_counterexample_constraints() {
        // x >= 1, y <= -1, 10x + 6y <= 0
        let a = check_sat(vec![
            ge(&[(1, 0)], -1),
            ge(&[(-1, 1)], -1),
            ge(&[(-10, 0), (-6, 1)], 0),
        ]);
        assert!(a[&0] >= BigInt::one());
        assert!(a[&1] <= BigInt::from(-1));
    }

    #[test]
    fn strict_cycle_unsat() {
        // x < y, y < x
        check_unsat(vec![ge(&[(1, 1), (-1, 0)], -1), ge(&[(1, 0), (-1, 1)], -1)]);
    }

    #[test]
    fn three_x_equals_two_unsat() {
        check_unsat(vec![eq(&[(3, 0)], -2)]);
    }

    #[test]
    fn parity_constraints() {
        // 2 | x, 2 | x + 1 is unsat
        check_unsat(vec![
            Constraint::Div(BigInt::from(2), LinSum::var(0)),
            Constraint::Div(BigInt::from(2), {
                let mut e = LinSum::var(0);
                e.add_const(1);
                e
            }),
        ]);
        // 2 | x with 5 <= x <= 6 picks 6
        let a = check_sat(vec![
            Constraint::Div(BigInt::from(2), LinSum::var(0)),
            ge(&[(1, 0)], -5),
            ge(&[(-1, 0)], 6),
        ]);
        assert!((&a[&0] % 2u8).is_zero());
    }

    #[test]
    fn coupled_scaled_bounds() {
        // 1 <= 3x - 3y <= 2 has no integer solution
        check_unsat(vec![ge(&[(3, 0), (-3, 1)], -1), ge(&[(-3, 0), (3, 1)], 2)]);
    }

    #[test]
    fn equality_substitution_chain() {
        // x = y + 1, y = z + 1, z = 5
        let a = check_sat(vec![
            eq(&[(1, 0), (-1, 1)], -1),
            eq(&[(1, 1), (-1, 2)], -1),
            eq(&[(1, 2)], -5),
        ]);
        assert_eq!(a[&0], BigInt::from(7));
    }

    #[test]
    fn brute_force_agreement() {
        // deterministic pseudo-random systems over a [-4, 4] box
        let mut seed = 0x2545F4914F6CDD1Du64;
        let mut next = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            seed
        };
        for _case in 0..400 {
            let nvars = 1 + (next() % 3) as usize;
            let ncons = 1 + (next() % 4) as usize;
            let mut cons = Vec::new();
            for _ in 0..ncons {
                let mut e = LinSum::constant((next() % 9) as i64 - 4);
                for v in 0..nvars {
                    let k = (next() % 7) as i64 - 3;
                    e.add_scaled(&LinSum::var(v as VarId), &BigInt::from(k));
                }
                if next() % 4 == 0 {
                    cons.push(Constraint::Eq(e));
                } else {
                    cons.push(Constraint::Ge(e));
                }
            }
            // brute force over [-4,4]^nvars
            let mut found = None;
            let range = 9i64.pow(nvars as u32);
            'outer: for idx in 0..range {
                let mut a = BTreeMap::new();
                let mut rem = idx;
                for v in 0..nvars {
                    a.insert(v as VarId, BigInt::from(rem % 9 - 4));
                    rem /= 9;
                }
                for c in &cons {
                    let ok = match c {
                        Constraint::Ge(e) => e.eval(&a) >= BigInt::zero(),
                        Constraint::Eq(e) => e.eval(&a).is_zero(),
                        Constraint::Div(m, e) => (e.eval(&a) % m).is_zero(),
                    };
                    if !ok {
                        continue 'outer;
                    }
                }
                found = Some(a);
                break;
            }
            match solve(cons.clone(), &Deadline::none()).unwrap() {
                LiaResult::Sat(a) => {
                    // witness must satisfy everything
                    for c in &cons {
                        let ok = match c {
                            Constraint::Ge(e) => e.eval(&a) >= BigInt::zero(),
                            Constraint::Eq(e) => e.eval(&a).is_zero(),
                            Constraint::Div(m, e) => (e.eval(&a) % m).is_zero(),
                        };
                        assert!(ok, "witness violates {c:?}: {a:?}");
                    }
                }
                LiaResult::Unsat => {
                    assert!(
                        found.is_none(),
                        "solver said unsat but brute force found {found:?} for {cons:?}"
                    );
                }
            }
        }
    }
}
