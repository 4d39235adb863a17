//! Value-group decision procedures.
//!
//! Two group modes: the integers (Presburger arithmetic, eliminated with
//! Cooper's method; congruence atoms appear in outputs) and divisible
//! ordered abelian groups (dense-order elimination, congruence-free).
//! The Laurent model has value group Z, so the integer mode is the one
//! the rest of the toolkit exercises; the divisible mode exists for the
//! group sort in its own right.

use std::collections::BTreeMap;

use num::bigint::BigInt;
use num::{Integer, One, Signed, Zero};

use crate::error::{Error, Result};
use crate::formula::{Formula, Sort, Term, Var};

const MAX_DNF: usize = 65536;
const MAX_COOPER_DISJUNCTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupMode {
    Int,
    Divisible,
}

impl GroupMode {
    pub fn parse(s: &str) -> Result<GroupMode> {
        match s {
            "int" => Ok(GroupMode::Int),
            "divisible" => Ok(GroupMode::Divisible),
            _ => Err(Error::EvalError(format!(
                "unknown group mode {s:?} (want int or divisible)"
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// linear group terms

/// Integer-linear combination of group variables plus a constant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GTerm {
    pub coeffs: BTreeMap<String, BigInt>,
    pub konst: BigInt,
}

impl GTerm {
    pub fn zero() -> GTerm {
        GTerm { coeffs: BTreeMap::new(), konst: BigInt::zero() }
    }

    pub fn constant(k: BigInt) -> GTerm {
        GTerm { coeffs: BTreeMap::new(), konst: k }
    }

    pub fn var(name: &str) -> GTerm {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(name.to_string(), BigInt::one());
        GTerm { coeffs, konst: BigInt::zero() }
    }

    pub fn add(&self, other: &GTerm) -> GTerm {
        let mut coeffs = self.coeffs.clone();
        for (v, c) in &other.coeffs {
            let e = coeffs.entry(v.clone()).or_insert_with(BigInt::zero);
            *e += c;
            if e.is_zero() {
                coeffs.remove(v);
            }
        }
        GTerm { coeffs, konst: &self.konst + &other.konst }
    }

    pub fn neg(&self) -> GTerm {
        GTerm {
            coeffs: self.coeffs.iter().map(|(v, c)| (v.clone(), -c.clone())).collect(),
            konst: -self.konst.clone(),
        }
    }

    pub fn sub(&self, other: &GTerm) -> GTerm {
        self.add(&other.neg())
    }

    pub fn scale(&self, k: &BigInt) -> GTerm {
        if k.is_zero() {
            return GTerm::zero();
        }
        GTerm {
            coeffs: self.coeffs.iter().map(|(v, c)| (v.clone(), c * k)).collect(),
            konst: &self.konst * k,
        }
    }

    pub fn shift(&self, k: &BigInt) -> GTerm {
        GTerm { coeffs: self.coeffs.clone(), konst: &self.konst + k }
    }

    pub fn coeff(&self, v: &str) -> BigInt {
        self.coeffs.get(v).cloned().unwrap_or_else(BigInt::zero)
    }

    /// Same term with `v` struck out.
    pub fn without(&self, v: &str) -> GTerm {
        let mut coeffs = self.coeffs.clone();
        coeffs.remove(v);
        GTerm { coeffs, konst: self.konst.clone() }
    }

    pub fn is_ground(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn from_term(t: &Term) -> Result<GTerm> {
        match t {
            Term::Var(v) => {
                if v.sort != Sort::Group {
                    return Err(Error::SortError(format!(
                        "non-group variable {} in group kernel",
                        v.name
                    )));
                }
                Ok(GTerm::var(&v.name))
            }
            Term::Int(n, _) => Ok(GTerm::constant(n.clone())),
            Term::Add(a, b) => Ok(GTerm::from_term(a)?.add(&GTerm::from_term(b)?)),
            Term::Sub(a, b) => Ok(GTerm::from_term(a)?.sub(&GTerm::from_term(b)?)),
            Term::Neg(a) => Ok(GTerm::from_term(a)?.neg()),
            Term::ScalarMul(k, a) => Ok(GTerm::from_term(a)?.scale(k)),
            Term::Mul(a, b) => {
                // tolerate integer·term products that slipped past
                // elaboration
                let ga = GTerm::from_term(a)?;
                let gb = GTerm::from_term(b)?;
                if ga.is_ground() {
                    Ok(gb.scale(&ga.konst))
                } else if gb.is_ground() {
                    Ok(ga.scale(&gb.konst))
                } else {
                    Err(Error::SortError("nonlinear group term".into()))
                }
            }
            _ => Err(Error::SortError(format!(
                "term not valid in a group kernel: {t:?}"
            ))),
        }
    }

    pub fn to_term(&self) -> Term {
        let mut acc: Option<Term> = None;
        for (v, c) in &self.coeffs {
            let vt = Term::Var(Var::new(v.clone(), Sort::Group));
            let t = if c.is_one() {
                vt
            } else {
                Term::ScalarMul(c.clone(), Box::new(vt))
            };
            acc = Some(match acc {
                None => t,
                Some(prev) => prev.add(t),
            });
        }
        let kt = Term::Int(self.konst.clone(), Sort::Group);
        match acc {
            None => kt,
            Some(prev) if self.konst.is_zero() => prev,
            Some(prev) => prev.add(kt),
        }
    }

    pub fn eval(&self, assign: &BTreeMap<String, BigInt>) -> Result<BigInt> {
        let mut total = self.konst.clone();
        for (v, c) in &self.coeffs {
            let val = assign
                .get(v)
                .ok_or_else(|| Error::EvalError(format!("unassigned group variable {v}")))?;
            total += c * val;
        }
        Ok(total)
    }
}

// ---------------------------------------------------------------------------
// literals

#[derive(Debug, Clone)]
pub enum GLit {
    /// t < 0
    Lt(GTerm),
    /// t = 0
    Eq(GTerm),
    /// m | t (pos) or m ∤ t
    Cong { m: BigInt, t: GTerm, pos: bool },
}

impl GLit {
    fn to_formula(&self) -> Formula {
        let zero = Term::Int(BigInt::zero(), Sort::Group);
        match self {
            GLit::Lt(t) => Formula::Lt(t.to_term(), zero),
            GLit::Eq(t) => Formula::Eq(t.to_term(), zero),
            GLit::Cong { m, t, pos } => {
                let f = Formula::Cong { modulus: m.clone(), lhs: t.to_term(), rhs: zero };
                if *pos {
                    f
                } else {
                    f.not()
                }
            }
        }
    }

    fn mentions(&self, v: &str) -> bool {
        match self {
            GLit::Lt(t) | GLit::Eq(t) | GLit::Cong { t, .. } => !t.coeff(v).is_zero(),
        }
    }
}

fn conj_formula(lits: &[GLit]) -> Formula {
    // fold ground literals away so downstream DNF passes stay small
    let mut kept = Vec::new();
    for l in lits {
        let truth = match l {
            GLit::Lt(t) if t.is_ground() => Some(t.konst.is_negative()),
            GLit::Eq(t) if t.is_ground() => Some(t.konst.is_zero()),
            GLit::Cong { m, t, pos } if t.is_ground() => {
                Some(t.konst.mod_floor(m).is_zero() == *pos)
            }
            _ => None,
        };
        match truth {
            Some(true) => continue,
            Some(false) => return Formula::False,
            None => kept.push(l.to_formula()),
        }
    }
    Formula::big_and(kept)
}

fn dnf_lits(f: &Formula, positive: bool) -> Result<Vec<Vec<GLit>>> {
    let atom = |lits: Vec<GLit>| -> Vec<Vec<GLit>> { vec![lits] };
    let union = |mut a: Vec<Vec<GLit>>, b: Vec<Vec<GLit>>| -> Result<Vec<Vec<GLit>>> {
        a.extend(b);
        if a.len() > MAX_DNF {
            return Err(Error::BudgetExceeded("group DNF too large".into()));
        }
        Ok(a)
    };
    let cross = |a: Vec<Vec<GLit>>, b: Vec<Vec<GLit>>| -> Result<Vec<Vec<GLit>>> {
        let mut out = Vec::new();
        for x in &a {
            for y in &b {
                let mut c = x.clone();
                c.extend(y.iter().cloned());
                out.push(c);
                if out.len() > MAX_DNF {
                    return Err(Error::BudgetExceeded("group DNF too large".into()));
                }
            }
        }
        Ok(out)
    };
    match f {
        Formula::True => Ok(if positive { atom(vec![]) } else { vec![] }),
        Formula::False => Ok(if positive { vec![] } else { atom(vec![]) }),
        Formula::Lt(a, b) => {
            let t = GTerm::from_term(a)?.sub(&GTerm::from_term(b)?);
            if positive {
                Ok(atom(vec![GLit::Lt(t)]))
            } else {
                union(atom(vec![GLit::Lt(t.neg())]), atom(vec![GLit::Eq(t)]))
            }
        }
        Formula::Eq(a, b) => {
            let t = GTerm::from_term(a)?.sub(&GTerm::from_term(b)?);
            if positive {
                Ok(atom(vec![GLit::Eq(t)]))
            } else {
                union(atom(vec![GLit::Lt(t.clone())]), atom(vec![GLit::Lt(t.neg())]))
            }
        }
        Formula::Cong { modulus, lhs, rhs } => {
            let t = GTerm::from_term(lhs)?.sub(&GTerm::from_term(rhs)?);
            let m = modulus.abs();
            if m.is_zero() {
                return Err(Error::EvalError("zero modulus in congruence".into()));
            }
            Ok(atom(vec![GLit::Cong { m, t, pos: positive }]))
        }
        Formula::Sq(_) => Err(Error::SortError("squareness atom in group formula".into())),
        Formula::Not(g) => dnf_lits(g, !positive),
        Formula::And(a, b) => {
            let da = dnf_lits(a, positive)?;
            let db = dnf_lits(b, positive)?;
            if positive {
                cross(da, db)
            } else {
                union(da, db)
            }
        }
        Formula::Or(a, b) => {
            let da = dnf_lits(a, positive)?;
            let db = dnf_lits(b, positive)?;
            if positive {
                union(da, db)
            } else {
                cross(da, db)
            }
        }
        Formula::Implies(a, b) => {
            let da = dnf_lits(a, !positive)?;
            let db = dnf_lits(b, positive)?;
            if positive {
                union(da, db)
            } else {
                cross(da, db)
            }
        }
        Formula::Exists(..) | Formula::Forall(..) => Err(Error::EvalError(
            "quantifier below elimination point in group pipeline".into(),
        )),
    }
}

// ---------------------------------------------------------------------------
// Cooper's method (integers)

/// Normalized literal with the eliminated variable isolated at unit
/// coefficient: y occurs as `dir`·y where dir ∈ {+1, −1}, or not at all.
#[derive(Debug, Clone)]
enum NLit {
    /// dir·y + s < 0
    Lt { dir: i8, s: GTerm },
    /// y + s = 0 (equalities are normalized to dir = +1)
    Eq { s: GTerm },
    /// y + s ≡ 0 (mod m), or its negation
    Cong { m: BigInt, s: GTerm, pos: bool },
}

fn cooper_eliminate_var(x: &str, lits: Vec<GLit>) -> Result<Formula> {
    let (with_x, without): (Vec<GLit>, Vec<GLit>) =
        lits.into_iter().partition(|l| l.mentions(x));
    let rest = conj_formula(&without);
    if with_x.is_empty() {
        return Ok(rest);
    }
    // δ = lcm of |coefficients of x|
    let mut delta = BigInt::one();
    for l in &with_x {
        let c = match l {
            GLit::Lt(t) | GLit::Eq(t) | GLit::Cong { t, .. } => t.coeff(x),
        };
        delta = delta.lcm(&c.abs());
    }
    // rescale every literal so x's coefficient is ±δ, then substitute
    // y = δ·x (recorded as the congruence y ≡ 0 mod δ)
    let mut nlits: Vec<NLit> = Vec::new();
    for l in &with_x {
        match l {
            GLit::Lt(t) => {
                let c = t.coeff(x);
                let lambda = &delta / c.abs();
                let scaled = t.scale(&lambda); // coefficient of x now ±δ
                let s = scaled.without(x);
                let dir = if c.is_positive() { 1 } else { -1 };
                nlits.push(NLit::Lt { dir, s });
            }
            GLit::Eq(t) => {
                let c = t.coeff(x);
                let lambda = &delta / c.abs();
                let scaled = t.scale(&lambda);
                let s = scaled.without(x);
                // dir −1 means −y + s = 0, i.e. y − s = 0: normalize
                let s = if c.is_positive() { s } else { s.neg() };
                nlits.push(NLit::Eq { s });
            }
            GLit::Cong { m, t, pos } => {
                let c = t.coeff(x);
                let lambda = &delta / c.abs();
                let scaled = t.scale(&lambda);
                let s = scaled.without(x);
                let m2 = m * &lambda;
                // m | −y + s ⟺ m | y − s
                let s = if c.is_positive() { s } else { s.neg() };
                nlits.push(NLit::Cong { m: m2, s, pos: *pos });
            }
        }
    }
    nlits.push(NLit::Cong { m: delta, s: GTerm::zero(), pos: true });

    // equality shortcut: y = −s₀ pins the variable
    if let Some(s0) = nlits.iter().find_map(|l| match l {
        NLit::Eq { s } => Some(s.clone()),
        _ => None,
    }) {
        let y_val = s0.neg();
        let mut out = Vec::new();
        for l in &nlits {
            out.push(subst_nlit(l, &y_val));
        }
        return Ok(Formula::and(conj_formula(&out), rest));
    }

    // M = lcm of congruence moduli
    let mut big_m = BigInt::one();
    for l in &nlits {
        if let NLit::Cong { m, .. } = l {
            big_m = big_m.lcm(m);
        }
    }
    let lowers: Vec<GTerm> = nlits
        .iter()
        .filter_map(|l| match l {
            // −y + s < 0 ⟺ s < y
            NLit::Lt { dir: -1, s } => Some(s.clone()),
            _ => None,
        })
        .collect();
    let m_usize: usize = big_m
        .to_string()
        .parse()
        .map_err(|_| Error::BudgetExceeded("Cooper modulus too large".into()))?;
    if m_usize.saturating_mul(lowers.len() + 1) > MAX_COOPER_DISJUNCTS {
        return Err(Error::BudgetExceeded("Cooper disjunction too large".into()));
    }
    let mut branches = Vec::new();
    // the −∞ branch: all uppers hold, lowers fail; only congruences matter
    if lowers.is_empty() {
        for j in 1..=m_usize {
            let jv = GTerm::constant(BigInt::from(j));
            let mut out = Vec::new();
            let mut feasible = true;
            for l in &nlits {
                match l {
                    NLit::Lt { dir: 1, .. } => {} // true towards −∞
                    NLit::Lt { .. } => {
                        feasible = false;
                        break;
                    }
                    _ => out.push(subst_nlit(l, &jv)),
                }
            }
            if feasible {
                branches.push(conj_formula(&out));
            }
        }
    }
    // boundary branches: y = b + j for each lower bound b
    for b in &lowers {
        for j in 1..=m_usize {
            let yv = b.shift(&BigInt::from(j));
            let mut out = Vec::new();
            for l in &nlits {
                out.push(subst_nlit(l, &yv));
            }
            branches.push(conj_formula(&out));
        }
    }
    Ok(Formula::and(Formula::big_or(branches), rest))
}

/// Literal value at y = yv.
fn subst_nlit(l: &NLit, yv: &GTerm) -> GLit {
    match l {
        NLit::Lt { dir, s } => {
            let t = if *dir == 1 { yv.add(s) } else { yv.neg().add(s) };
            GLit::Lt(t)
        }
        NLit::Eq { s } => GLit::Eq(yv.add(s)),
        NLit::Cong { m, s, pos } => GLit::Cong { m: m.clone(), t: yv.add(s), pos: *pos },
    }
}

// ---------------------------------------------------------------------------
// divisible ordered abelian groups

fn doag_eliminate_var(x: &str, lits: Vec<GLit>) -> Result<Formula> {
    let (with_x, without): (Vec<GLit>, Vec<GLit>) =
        lits.into_iter().partition(|l| l.mentions(x));
    let rest = conj_formula(&without);
    for l in without.iter().chain(with_x.iter()) {
        if matches!(l, GLit::Cong { .. }) {
            return Err(Error::CongruenceAtomInDivisibleMode);
        }
    }
    if with_x.is_empty() {
        return Ok(rest);
    }
    // equality pins x = −r/c (divisibility makes the division available)
    if let Some((c0, r0)) = with_x.iter().find_map(|l| match l {
        GLit::Eq(t) => Some((t.coeff(x), t.without(x))),
        _ => None,
    }) {
        let mut out = Vec::new();
        for l in &with_x {
            match l {
                GLit::Eq(t) => {
                    let c = t.coeff(x);
                    let r = t.without(x);
                    // c·x + r = 0 at x = −r0/c0 ⟺ −c·r0 + r·c0 = 0
                    out.push(GLit::Eq(r0.scale(&c).neg().add(&r.scale(&c0))));
                }
                GLit::Lt(t) => {
                    let c = t.coeff(x);
                    let r = t.without(x);
                    let num = r0.scale(&c).neg().add(&r.scale(&c0));
                    let num = if c0.is_positive() { num } else { num.neg() };
                    out.push(GLit::Lt(num));
                }
                GLit::Cong { .. } => unreachable!(),
            }
        }
        return Ok(Formula::and(conj_formula(&out), rest));
    }
    // pure inequalities: dense order without endpoints
    let mut lowers: Vec<(BigInt, GTerm)> = Vec::new();
    let mut uppers: Vec<(BigInt, GTerm)> = Vec::new();
    for l in &with_x {
        if let GLit::Lt(t) = l {
            let c = t.coeff(x);
            let r = t.without(x);
            // c·x + r < 0: bound value −r/c
            if c.is_positive() {
                uppers.push((c, r));
            } else {
                lowers.push((c, r));
            }
        }
    }
    let mut out = Vec::new();
    for (cl, rl) in &lowers {
        for (cu, ru) in &uppers {
            // −rl/cl < −ru/cu ⟺ sign(cl·cu)·(−rl·cu + ru·cl) < 0; cl < 0 < cu
            let num = rl.scale(cu).neg().add(&ru.scale(cl));
            out.push(GLit::Lt(num.neg()));
        }
    }
    Ok(Formula::and(conj_formula(&out), rest))
}

// ---------------------------------------------------------------------------
// public pipeline

fn eliminate_exists_g(v: &Var, body: &Formula, mode: GroupMode) -> Result<Formula> {
    let conjs = dnf_lits(body, true)?;
    let mut out = Vec::new();
    for lits in conjs {
        out.push(match mode {
            GroupMode::Int => cooper_eliminate_var(&v.name, lits)?,
            GroupMode::Divisible => doag_eliminate_var(&v.name, lits)?,
        });
    }
    Ok(Formula::big_or(out))
}

/// Eliminates all group-sort quantifiers, bottom-up.
pub fn qe_group(f: &Formula, mode: GroupMode) -> Result<Formula> {
    match f {
        Formula::True
        | Formula::False
        | Formula::Eq(..)
        | Formula::Lt(..)
        | Formula::Sq(_)
        | Formula::Cong { .. } => Ok(f.clone()),
        Formula::Not(g) => Ok(qe_group(g, mode)?.not()),
        Formula::And(a, b) => Ok(Formula::and(qe_group(a, mode)?, qe_group(b, mode)?)),
        Formula::Or(a, b) => Ok(Formula::or(qe_group(a, mode)?, qe_group(b, mode)?)),
        Formula::Implies(a, b) => {
            Ok(Formula::or(qe_group(a, mode)?.not(), qe_group(b, mode)?))
        }
        Formula::Exists(v, body) => {
            let b = qe_group(body, mode)?;
            eliminate_exists_g(v, &b, mode)
        }
        Formula::Forall(v, body) => {
            let b = qe_group(body, mode)?;
            Ok(eliminate_exists_g(v, &b.not(), mode)?.not())
        }
    }
}

/// Quantifier elimination over Z with congruences in the output.
pub fn cooper_eliminate(f: &Formula) -> Result<Formula> {
    qe_group(f, GroupMode::Int)
}

/// Quantifier elimination over divisible ordered abelian groups.
pub fn doag_eliminate(f: &Formula) -> Result<Formula> {
    qe_group(f, GroupMode::Divisible)
}

/// Truth value of a ground, quantifier-free group formula (over Z; ground
/// constants are integers either way).
pub fn eval_ground_group(f: &Formula) -> Result<bool> {
    let ground = |t: &Term| -> Result<BigInt> {
        let g = GTerm::from_term(t)?;
        if !g.is_ground() {
            return Err(Error::EvalError("free group variable in ground atom".into()));
        }
        Ok(g.konst)
    };
    match f {
        Formula::True => Ok(true),
        Formula::False => Ok(false),
        Formula::Eq(a, b) => Ok(ground(a)? == ground(b)?),
        Formula::Lt(a, b) => Ok(ground(a)? < ground(b)?),
        Formula::Cong { modulus, lhs, rhs } => {
            let m = modulus.abs();
            if m.is_zero() {
                return Err(Error::EvalError("zero modulus in congruence".into()));
            }
            Ok((ground(lhs)? - ground(rhs)?).mod_floor(&m).is_zero())
        }
        Formula::Sq(_) => Err(Error::SortError("squareness atom in group formula".into())),
        Formula::Not(g) => Ok(!eval_ground_group(g)?),
        Formula::And(a, b) => Ok(eval_ground_group(a)? && eval_ground_group(b)?),
        Formula::Or(a, b) => Ok(eval_ground_group(a)? || eval_ground_group(b)?),
        Formula::Implies(a, b) => Ok(!eval_ground_group(a)? || eval_ground_group(b)?),
        Formula::Exists(..) | Formula::Forall(..) => {
            Err(Error::EvalError("quantifier in ground evaluation".into()))
        }
    }
}

/// Decides a closed group-sort sentence.
pub fn decide_group_sentence(f: &Formula, mode: GroupMode) -> Result<bool> {
    if !crate::formula::free_vars(f).is_empty() {
        return Err(Error::EvalError(
            "decide_group_sentence requires a closed formula".into(),
        ));
    }
    let qf = qe_group(f, mode)?;
    eval_ground_group(&qf)
}

/// Exhaustive evaluation of a closed integer-group sentence with all
/// quantifiers restricted to [−bound, bound]. Test oracle only: agreement
/// with the unbounded semantics holds when the relevant thresholds fall
/// inside the window.
pub fn eval_brute_int(f: &Formula, bound: i64) -> Result<bool> {
    fn go(f: &Formula, bound: i64, assign: &mut BTreeMap<String, BigInt>) -> Result<bool> {
        match f {
            Formula::True => Ok(true),
            Formula::False => Ok(false),
            Formula::Eq(a, b) => {
                Ok(GTerm::from_term(a)?.eval(assign)? == GTerm::from_term(b)?.eval(assign)?)
            }
            Formula::Lt(a, b) => {
                Ok(GTerm::from_term(a)?.eval(assign)? < GTerm::from_term(b)?.eval(assign)?)
            }
            Formula::Cong { modulus, lhs, rhs } => {
                let m = modulus.abs();
                if m.is_zero() {
                    return Err(Error::EvalError("zero modulus in congruence".into()));
                }
                let d = GTerm::from_term(lhs)?.eval(assign)?
                    - GTerm::from_term(rhs)?.eval(assign)?;
                Ok(d.mod_floor(&m).is_zero())
            }
            Formula::Sq(_) => {
                Err(Error::SortError("squareness atom in group formula".into()))
            }
            Formula::Not(g) => Ok(!go(g, bound, assign)?),
            Formula::And(a, b) => Ok(go(a, bound, assign)? && go(b, bound, assign)?),
            Formula::Or(a, b) => Ok(go(a, bound, assign)? || go(b, bound, assign)?),
            Formula::Implies(a, b) => Ok(!go(a, bound, assign)? || go(b, bound, assign)?),
            Formula::Exists(v, body) => {
                for k in -bound..=bound {
                    assign.insert(v.name.clone(), BigInt::from(k));
                    let r = go(body, bound, assign)?;
                    assign.remove(&v.name);
                    if r {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Formula::Forall(v, body) => {
                for k in -bound..=bound {
                    assign.insert(v.name.clone(), BigInt::from(k));
                    let r = go(body, bound, assign)?;
                    assign.remove(&v.name);
                    if !r {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
        }
    }
    let mut assign = BTreeMap::new();
    go(f, bound, &mut assign)
}

/// Largest congruence modulus appearing in a formula (1 when none).
pub fn max_modulus(f: &Formula) -> BigInt {
    match f {
        Formula::Cong { modulus, .. } => modulus.abs(),
        Formula::Not(g) => max_modulus(g),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            max_modulus(a).max(max_modulus(b))
        }
        Formula::Exists(_, b) | Formula::Forall(_, b) => max_modulus(b),
        _ => BigInt::one(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::subst;
    use crate::syntax::parse;

    fn inst(f: &Formula, v: &str, k: i64) -> Formula {
        subst(
            f,
            &Var::new(v.to_string(), Sort::Group),
            &Term::Int(BigInt::from(k), Sort::Group),
        )
    }

    #[test]
    fn parity() {
        let f = parse("E g (g + g = h)").unwrap();
        let out = cooper_eliminate(&f).unwrap();
        for d in -50i64..=50 {
            let got = eval_ground_group(&inst(&out, "h", d)).unwrap();
            assert_eq!(got, d % 2 == 0, "d={d}");
        }
    }

    #[test]
    fn three_g_in_window() {
        // ∃g (3g ≥ d ∧ 3g ≤ d+1) ⟺ d ≡ 0 or 2 (mod 3)
        let f = parse("E g (3*g >= h & 3*g <= h + 1)").unwrap();
        let out = cooper_eliminate(&f).unwrap();
        for d in -50i64..=50 {
            let got = eval_ground_group(&inst(&out, "h", d)).unwrap();
            let expect = d.rem_euclid(3) == 0 || d.rem_euclid(3) == 2;
            assert_eq!(got, expect, "d={d}");
        }
    }

    #[test]
    fn integer_gap() {
        // ∃g (a < g ∧ g < b) ⟺ b − a ≥ 2 over Z
        let f = parse("E g (h1 < g & g < h2)").unwrap();
        let out = cooper_eliminate(&f).unwrap();
        for a in -20i64..=20 {
            for b in -20i64..=20 {
                let got = eval_ground_group(&inst(&inst(&out, "h1", a), "h2", b)).unwrap();
                assert_eq!(got, b - a >= 2, "a={a} b={b}");
            }
        }
    }

    #[test]
    fn doag_density_and_divisibility() {
        let f = parse("E g (h1 < g & g < h2)").unwrap();
        let out = doag_eliminate(&f).unwrap();
        for (a, b) in [(0i64, 1i64), (1, 0), (3, 3), (-2, 7)] {
            let got = eval_ground_group(&inst(&inst(&out, "h1", a), "h2", b)).unwrap();
            assert_eq!(got, a < b, "a={a} b={b}");
        }
        let g = parse("E g (g + g = h)").unwrap();
        let out = doag_eliminate(&g).unwrap();
        for d in [-3i64, 0, 5] {
            assert!(eval_ground_group(&inst(&out, "h", d)).unwrap(), "d={d}");
        }
    }

    #[test]
    fn doag_forall_outside_interval() {
        // ∀g (g < a ∨ g > b) ⟺ a > b
        let f = parse("A g (g < h1 | h2 < g)").unwrap();
        let out = doag_eliminate(&f).unwrap();
        for (a, b) in [(0i64, 0i64), (1, 0), (0, 1), (-5, -7)] {
            let got = eval_ground_group(&inst(&inst(&out, "h1", a), "h2", b)).unwrap();
            assert_eq!(got, a > b, "a={a} b={b}");
        }
    }

    #[test]
    fn congruence_rejected_in_divisible_mode() {
        let f = parse("E g (g = 0 mod 2)").unwrap();
        assert!(matches!(
            doag_eliminate(&f),
            Err(Error::CongruenceAtomInDivisibleMode)
        ));
    }

    #[test]
    fn cooper_matches_brute_force_small() {
        let sentences = [
            "E g (A h (g < h | g = h | h < g))",
            "E g (2*g = 6)",
            "E g (2*g = 7)",
            "A g (E h (h + h = g | h + h = g + 1))",
            "E g (0 < g & g < 10 & g = 1 mod 3)",
        ];
        for src in sentences {
            let f = parse(src).unwrap();
            let got = decide_group_sentence(&f, GroupMode::Int).unwrap();
            let brute = eval_brute_int(&f, 25).unwrap();
            assert_eq!(got, brute, "{src}");
        }
    }

    #[test]
    fn idempotent_on_quantifier_free() {
        let f = parse("h1 < h2 & h1 = 0 mod 2").unwrap();
        let out = cooper_eliminate(&f).unwrap();
        assert_eq!(crate::syntax::print(&out), crate::syntax::print(&f));
    }

    #[test]
    fn output_moduli_bounded() {
        let f = parse("E g (3*g >= h & 3*g <= h + 1)").unwrap();
        let out = cooper_eliminate(&f).unwrap();
        // δ = 3, no input congruences: every output modulus divides 3
        let m = max_modulus(&out);
        assert!(BigInt::from(3) % m == BigInt::zero());
    }
}
