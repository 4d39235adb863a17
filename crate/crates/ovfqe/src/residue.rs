//! Residue-sort decision procedures.
//!
//! Two modes share one elimination pipeline. Linear occurrences of a
//! quantified variable go through virtual substitution / Fourier–Motzkin
//! with sign case-splits on symbolic coefficients; nonlinear univariate
//! bundles are decided by Sturm chains (real-closed mode) or exact
//! rational root finding (rational mode). Even powers of the quantified
//! variable are first halved through a `w = u²` substitution. Everything
//! else is rejected with an honest error rather than approximated: the
//! full first-order theory of the rationals is not decidable, and we do
//! not do multivariate real quantifier elimination.

use std::collections::BTreeMap;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{Integer, One, Signed, Zero};

use crate::error::{Error, Result};
use crate::formula::{Formula, Sort, Term, Var};
use crate::laurent::ResidueMode;

const MAX_DNF: usize = 4096;
const MAX_SIGN_SPLIT_VARS: u32 = 5;
const STURM_DEGREE_CAP: usize = 8;
const MAX_DIVISOR_MAGNITUDE: u64 = 1_000_000_000;

// ---------------------------------------------------------------------------
// multivariate polynomials over Q

pub type Mono = BTreeMap<String, u32>;

/// Polynomial over Q in residue-sort variables, normal form: no zero
/// coefficients, monomials in BTreeMap order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RPoly(pub BTreeMap<Mono, BigRational>);

impl RPoly {
    pub fn zero() -> Self {
        RPoly(BTreeMap::new())
    }

    pub fn constant(q: BigRational) -> Self {
        let mut m = BTreeMap::new();
        if !q.is_zero() {
            m.insert(Mono::new(), q);
        }
        RPoly(m)
    }

    pub fn var(name: &str) -> Self {
        let mut mono = Mono::new();
        mono.insert(name.to_string(), 1);
        let mut m = BTreeMap::new();
        m.insert(mono, BigRational::one());
        RPoly(m)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_constant(&self) -> Option<BigRational> {
        if self.0.is_empty() {
            return Some(BigRational::zero());
        }
        if self.0.len() == 1 {
            if let Some(c) = self.0.get(&Mono::new()) {
                return Some(c.clone());
            }
        }
        None
    }

    pub fn add(&self, other: &RPoly) -> RPoly {
        let mut m = self.0.clone();
        for (mono, c) in &other.0 {
            let e = m.entry(mono.clone()).or_insert_with(BigRational::zero);
            *e += c;
            if e.is_zero() {
                m.remove(mono);
            }
        }
        RPoly(m)
    }

    pub fn neg(&self) -> RPoly {
        RPoly(self.0.iter().map(|(m, c)| (m.clone(), -c.clone())).collect())
    }

    pub fn sub(&self, other: &RPoly) -> RPoly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &RPoly) -> RPoly {
        let mut m: BTreeMap<Mono, BigRational> = BTreeMap::new();
        for (ma, ca) in &self.0 {
            for (mb, cb) in &other.0 {
                let mut mono = ma.clone();
                for (v, e) in mb {
                    *mono.entry(v.clone()).or_insert(0) += e;
                }
                let entry = m.entry(mono).or_insert_with(BigRational::zero);
                *entry += ca * cb;
            }
        }
        m.retain(|_, c| !c.is_zero());
        RPoly(m)
    }

    pub fn scale(&self, q: &BigRational) -> RPoly {
        if q.is_zero() {
            return RPoly::zero();
        }
        RPoly(self.0.iter().map(|(m, c)| (m.clone(), c * q)).collect())
    }

    pub fn vars(&self) -> Vec<String> {
        let mut vs: Vec<String> = Vec::new();
        for mono in self.0.keys() {
            for v in mono.keys() {
                if !vs.contains(v) {
                    vs.push(v.clone());
                }
            }
        }
        vs.sort();
        vs
    }

    pub fn degree_in(&self, v: &str) -> u32 {
        self.0
            .keys()
            .map(|m| m.get(v).copied().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    /// Coefficient polynomials with respect to `v`: index i holds the
    /// coefficient of v^i (a polynomial in the remaining variables).
    pub fn coeffs_in(&self, v: &str) -> Vec<RPoly> {
        let d = self.degree_in(v) as usize;
        let mut out = vec![RPoly::zero(); d + 1];
        for (mono, c) in &self.0 {
            let e = mono.get(v).copied().unwrap_or(0) as usize;
            let mut rest = mono.clone();
            rest.remove(v);
            let mut m = BTreeMap::new();
            m.insert(rest, c.clone());
            out[e] = out[e].add(&RPoly(m));
        }
        out
    }

    pub fn subst(&self, v: &str, value: &RPoly) -> RPoly {
        let coeffs = self.coeffs_in(v);
        let mut acc = RPoly::zero();
        let mut pw = RPoly::constant(BigRational::one());
        for c in coeffs {
            acc = acc.add(&c.mul(&pw));
            pw = pw.mul(value);
        }
        acc
    }

    pub fn from_term(t: &Term) -> Result<RPoly> {
        match t {
            Term::Var(v) => {
                if v.sort != Sort::Residue {
                    return Err(Error::SortError(format!(
                        "non-residue variable {} in residue kernel",
                        v.name
                    )));
                }
                Ok(RPoly::var(&v.name))
            }
            Term::Int(n, _) => Ok(RPoly::constant(BigRational::from(n.clone()))),
            Term::Rat(q) => Ok(RPoly::constant(q.clone())),
            Term::Add(a, b) => Ok(RPoly::from_term(a)?.add(&RPoly::from_term(b)?)),
            Term::Sub(a, b) => Ok(RPoly::from_term(a)?.sub(&RPoly::from_term(b)?)),
            Term::Mul(a, b) => Ok(RPoly::from_term(a)?.mul(&RPoly::from_term(b)?)),
            Term::Neg(a) => Ok(RPoly::from_term(a)?.neg()),
            _ => Err(Error::SortError(format!(
                "term not valid in a residue kernel: {t:?}"
            ))),
        }
    }

    pub fn to_term(&self) -> Term {
        if self.0.is_empty() {
            return Term::Rat(BigRational::zero());
        }
        let mut acc: Option<Term> = None;
        for (mono, c) in &self.0 {
            let mut t: Option<Term> = None;
            for (v, e) in mono {
                for _ in 0..*e {
                    let vt = Term::Var(Var::new(v.clone(), Sort::Residue));
                    t = Some(match t {
                        None => vt,
                        Some(prev) => prev.mul(vt),
                    });
                }
            }
            let t = match t {
                None => Term::Rat(c.clone()),
                Some(vars) if c.is_one() => vars,
                Some(vars) => Term::Rat(c.clone()).mul(vars),
            };
            acc = Some(match acc {
                None => t,
                Some(prev) => prev.add(t),
            });
        }
        acc.unwrap()
    }

    pub fn eval(&self, assign: &BTreeMap<String, BigRational>) -> Result<BigRational> {
        let mut total = BigRational::zero();
        for (mono, c) in &self.0 {
            let mut term = c.clone();
            for (v, e) in mono {
                let val = assign.get(v).ok_or_else(|| {
                    Error::EvalError(format!("unassigned residue variable {v}"))
                })?;
                for _ in 0..*e {
                    term *= val;
                }
            }
            total += term;
        }
        Ok(total)
    }
}

// ---------------------------------------------------------------------------
// literals

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    /// poly = 0
    Eq,
    /// poly < 0
    Lt,
}

#[derive(Debug, Clone)]
pub enum RLit {
    Atom { poly: RPoly, rel: Rel },
    /// squareness of the polynomial's value (rational mode only; in the
    /// real-closed field it is rewritten to `poly >= 0` at extraction)
    Sq { poly: RPoly, pos: bool },
}

impl RLit {
    fn to_formula(&self) -> Formula {
        let zero = Term::Rat(BigRational::zero());
        match self {
            RLit::Atom { poly, rel: Rel::Eq } => Formula::Eq(poly.to_term(), zero),
            RLit::Atom { poly, rel: Rel::Lt } => Formula::Lt(poly.to_term(), zero),
            RLit::Sq { poly, pos: true } => Formula::Sq(poly.to_term()),
            RLit::Sq { poly, pos: false } => Formula::Sq(poly.to_term()).not(),
        }
    }

    fn mentions(&self, v: &str) -> bool {
        match self {
            RLit::Atom { poly, .. } | RLit::Sq { poly, .. } => poly.degree_in(v) > 0,
        }
    }
}

fn conj_formula(lits: &[RLit]) -> Formula {
    Formula::big_and(lits.iter().map(|l| l.to_formula()))
}

/// NNF + DNF of a quantifier-free residue formula, as lists of literals.
fn dnf_lits(f: &Formula, mode: ResidueMode, positive: bool) -> Result<Vec<Vec<RLit>>> {
    let atom = |lits: Vec<RLit>| -> Vec<Vec<RLit>> { vec![lits] };
    let union = |mut a: Vec<Vec<RLit>>, b: Vec<Vec<RLit>>| -> Result<Vec<Vec<RLit>>> {
        a.extend(b);
        if a.len() > MAX_DNF {
            return Err(Error::BudgetExceeded("residue DNF too large".into()));
        }
        Ok(a)
    };
    let cross = |a: Vec<Vec<RLit>>, b: Vec<Vec<RLit>>| -> Result<Vec<Vec<RLit>>> {
        let mut out = Vec::new();
        for x in &a {
            for y in &b {
                let mut c = x.clone();
                c.extend(y.iter().cloned());
                out.push(c);
                if out.len() > MAX_DNF {
                    return Err(Error::BudgetExceeded("residue DNF too large".into()));
                }
            }
        }
        Ok(out)
    };
    match f {
        Formula::True => Ok(if positive { atom(vec![]) } else { vec![] }),
        Formula::False => Ok(if positive { vec![] } else { atom(vec![]) }),
        Formula::Eq(a, b) => {
            let p = RPoly::from_term(a)?.sub(&RPoly::from_term(b)?);
            if positive {
                Ok(atom(vec![RLit::Atom { poly: p, rel: Rel::Eq }]))
            } else {
                union(
                    atom(vec![RLit::Atom { poly: p.clone(), rel: Rel::Lt }]),
                    atom(vec![RLit::Atom { poly: p.neg(), rel: Rel::Lt }]),
                )
            }
        }
        Formula::Lt(a, b) => {
            let p = RPoly::from_term(a)?.sub(&RPoly::from_term(b)?);
            if positive {
                Ok(atom(vec![RLit::Atom { poly: p, rel: Rel::Lt }]))
            } else {
                union(
                    atom(vec![RLit::Atom { poly: p.neg(), rel: Rel::Lt }]),
                    atom(vec![RLit::Atom { poly: p, rel: Rel::Eq }]),
                )
            }
        }
        Formula::Sq(t) => {
            let p = RPoly::from_term(t)?;
            match mode {
                ResidueMode::RealClosed => {
                    // every non-negative element of a real closed field is
                    // a square
                    if positive {
                        union(
                            atom(vec![RLit::Atom { poly: p.clone(), rel: Rel::Eq }]),
                            atom(vec![RLit::Atom { poly: p.neg(), rel: Rel::Lt }]),
                        )
                    } else {
                        Ok(atom(vec![RLit::Atom { poly: p, rel: Rel::Lt }]))
                    }
                }
                ResidueMode::Rational => Ok(atom(vec![RLit::Sq { poly: p, pos: positive }])),
            }
        }
        Formula::Cong { .. } => Err(Error::SortError(
            "congruence atom in residue formula".into(),
        )),
        Formula::Not(g) => dnf_lits(g, mode, !positive),
        Formula::And(a, b) => {
            let da = dnf_lits(a, mode, positive)?;
            let db = dnf_lits(b, mode, positive)?;
            if positive {
                cross(da, db)
            } else {
                union(da, db)
            }
        }
        Formula::Or(a, b) => {
            let da = dnf_lits(a, mode, positive)?;
            let db = dnf_lits(b, mode, positive)?;
            if positive {
                union(da, db)
            } else {
                cross(da, db)
            }
        }
        Formula::Implies(a, b) => {
            let da = dnf_lits(a, mode, !positive)?;
            let db = dnf_lits(b, mode, positive)?;
            if positive {
                union(da, db)
            } else {
                cross(da, db)
            }
        }
        Formula::Exists(..) | Formula::Forall(..) => Err(Error::EvalError(
            "quantifier below elimination point in residue pipeline".into(),
        )),
    }
}

// ---------------------------------------------------------------------------
// univariate polynomials over Q

/// Dense univariate polynomial, index = exponent, no trailing zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct UPoly(pub Vec<BigRational>);

impl UPoly {
    pub fn new(mut coeffs: Vec<BigRational>) -> Self {
        while coeffs.last().map(|c| c.is_zero()).unwrap_or(false) {
            coeffs.pop();
        }
        UPoly(coeffs)
    }

    pub fn zero() -> Self {
        UPoly(Vec::new())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn eval(&self, x: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for c in self.0.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn derivative(&self) -> UPoly {
        if self.0.len() <= 1 {
            return UPoly::zero();
        }
        UPoly::new(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * BigRational::from(BigInt::from(i)))
                .collect(),
        )
    }

    fn lead(&self) -> &BigRational {
        self.0.last().unwrap()
    }

    /// Remainder of self / d (rational coefficients, exact).
    fn rem(&self, d: &UPoly) -> UPoly {
        assert!(!d.is_zero());
        let mut r = self.0.clone();
        while r.len() >= d.0.len() && !r.is_empty() {
            if r.last().unwrap().is_zero() {
                r.pop();
                continue;
            }
            let q = r.last().unwrap() / d.lead();
            let off = r.len() - d.0.len();
            for (i, c) in d.0.iter().enumerate() {
                let v = &r[off + i] - c * &q;
                r[off + i] = v;
            }
            // leading entry is now exactly zero
            r.pop();
        }
        UPoly::new(r)
    }

    /// Exact quotient by (x − a); panics unless a is a root.
    fn deflate(&self, a: &BigRational) -> UPoly {
        let mut out = vec![BigRational::zero(); self.0.len().saturating_sub(1)];
        let mut carry = BigRational::zero();
        for i in (0..self.0.len()).rev() {
            let v = &self.0[i] + &carry * a;
            if i == 0 {
                assert!(v.is_zero(), "deflate at a non-root");
            } else {
                out[i - 1] = v.clone();
                carry = v;
            }
        }
        UPoly::new(out)
    }

    fn monic(&self) -> UPoly {
        if self.is_zero() {
            return UPoly::zero();
        }
        let l = self.lead().clone();
        UPoly::new(self.0.iter().map(|c| c / &l).collect())
    }

    pub fn gcd(&self, other: &UPoly) -> UPoly {
        let mut a = self.clone();
        let mut b = other.clone();
        while !b.is_zero() {
            let r = a.rem(&b);
            a = b;
            b = r;
        }
        a.monic()
    }

    pub fn squarefree(&self) -> UPoly {
        if self.is_zero() || self.degree() == 0 {
            return self.monic();
        }
        let g = self.gcd(&self.derivative());
        if g.degree() == 0 {
            return self.monic();
        }
        // exact division self / g via repeated deflation is wrong for
        // non-linear g; do polynomial long division instead
        self.div_exact(&g).monic()
    }

    fn div_exact(&self, d: &UPoly) -> UPoly {
        let mut r = self.0.clone();
        let mut q = vec![BigRational::zero(); self.0.len().saturating_sub(d.0.len()) + 1];
        while r.len() >= d.0.len() && !r.is_empty() {
            if r.last().unwrap().is_zero() {
                r.pop();
                continue;
            }
            let c = r.last().unwrap() / d.lead();
            let off = r.len() - d.0.len();
            q[off] = c.clone();
            for (i, dc) in d.0.iter().enumerate() {
                let v = &r[off + i] - dc * &c;
                r[off + i] = v;
            }
            r.pop();
        }
        UPoly::new(q)
    }

    pub fn from_rpoly(p: &RPoly, v: &str) -> Result<UPoly> {
        let vars = p.vars();
        if vars.iter().any(|w| w != v) {
            return Err(Error::NonlinearOccurrence(format!(
                "polynomial not univariate in {v}: {vars:?}"
            )));
        }
        let coeffs = p.coeffs_in(v);
        let cs = coeffs
            .into_iter()
            .map(|c| c.as_constant().expect("univariate coefficients are constants"))
            .collect();
        Ok(UPoly::new(cs))
    }

    /// Cauchy root bound: every real root lies in (−M, M).
    fn root_bound(&self) -> BigRational {
        if self.is_zero() || self.degree() == 0 {
            return BigRational::one();
        }
        let lead = self.lead().abs();
        let mut m = BigRational::zero();
        for c in &self.0[..self.0.len() - 1] {
            let r = c.abs() / &lead;
            if r > m {
                m = r;
            }
        }
        m + BigRational::one()
    }
}

fn sturm_sequence(p: &UPoly) -> Vec<UPoly> {
    let mut seq = vec![p.clone(), p.derivative()];
    loop {
        let n = seq.len();
        if seq[n - 1].is_zero() {
            seq.pop();
            return seq;
        }
        let r = seq[n - 2].rem(&seq[n - 1]);
        if r.is_zero() {
            return seq;
        }
        let mut neg = r;
        neg = UPoly::new(neg.0.into_iter().map(|c| -c).collect());
        seq.push(neg);
    }
}

fn sign_variations_at(seq: &[UPoly], x: &BigRational) -> usize {
    let mut signs = Vec::new();
    for p in seq {
        let v = p.eval(x);
        if !v.is_zero() {
            signs.push(v.is_positive());
        }
    }
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Number of distinct real roots of (squarefree) p in the interval (a, b].
pub fn count_roots(seq: &[UPoly], a: &BigRational, b: &BigRational) -> usize {
    sign_variations_at(seq, a).saturating_sub(sign_variations_at(seq, b))
}

#[derive(Debug, Clone)]
enum IsoRoot {
    Exact(BigRational),
    /// Open interval holding exactly one root; p does not vanish at the
    /// endpoints.
    Interval(BigRational, BigRational),
}

/// Isolates all real roots of a squarefree polynomial.
fn isolate_roots(p: &UPoly) -> Vec<IsoRoot> {
    if p.is_zero() || p.degree() == 0 {
        return Vec::new();
    }
    let m = p.root_bound();
    let lo = -m.clone();
    let hi = m;
    // endpoints lie strictly outside the root bound's closure? (−M, M)
    // contains all roots, so p(±M) may still vanish only if a root hits
    // the bound exactly — nudge outward to be safe.
    let one = BigRational::one();
    let lo = lo - &one;
    let hi = hi + &one;
    let seq = sturm_sequence(p);
    let mut out = Vec::new();
    let mut stack = vec![(lo, hi)];
    while let Some((a, b)) = stack.pop() {
        let n = count_roots(&seq, &a, &b);
        if n == 0 {
            continue;
        }
        if n == 1 {
            out.push(IsoRoot::Interval(a, b));
            continue;
        }
        let mid = (&a + &b) / BigRational::from(BigInt::from(2));
        if p.eval(&mid).is_zero() {
            out.push(IsoRoot::Exact(mid.clone()));
            // deflating keeps the remaining analysis on p impossible with
            // this Sturm chain; recurse on the deflated polynomial instead
            let q = p.deflate(&mid);
            let mut rest = isolate_roots(&q);
            // refine the deflated intervals until they exclude mid
            let qseq = sturm_sequence(&q);
            for r in rest.iter_mut() {
                if let IsoRoot::Interval(x, y) = r {
                    while *x < mid && mid < *y {
                        let m2 = (&*x + &*y) / BigRational::from(BigInt::from(2));
                        let m2 = if m2 == mid {
                            (&*x + &m2) / BigRational::from(BigInt::from(2))
                        } else {
                            m2
                        };
                        if q.eval(&m2).is_zero() {
                            *r = IsoRoot::Exact(m2);
                            break;
                        }
                        if count_roots(&qseq, x, &m2) == 1 {
                            *y = m2;
                        } else {
                            *x = m2;
                        }
                    }
                }
            }
            out.extend(rest);
            return dedup_roots(out);
        }
        stack.push((a, mid.clone()));
        stack.push((mid, b));
    }
    dedup_roots(out)
}

fn dedup_roots(mut roots: Vec<IsoRoot>) -> Vec<IsoRoot> {
    roots.sort_by(|a, b| root_key(a).cmp(&root_key(b)));
    roots
}

fn root_key(r: &IsoRoot) -> BigRational {
    match r {
        IsoRoot::Exact(x) => x.clone(),
        IsoRoot::Interval(a, b) => (a + b) / BigRational::from(BigInt::from(2)),
    }
}

fn sign(q: &BigRational) -> i8 {
    if q.is_zero() {
        0
    } else if q.is_positive() {
        1
    } else {
        -1
    }
}

/// Sign of q at the single root of (squarefree) p inside the given
/// isolating interval.
fn sign_at_root(q: &UPoly, p: &UPoly, root: &IsoRoot) -> i8 {
    match root {
        IsoRoot::Exact(x) => sign(&q.eval(x)),
        IsoRoot::Interval(a0, b0) => {
            if q.is_zero() {
                return 0;
            }
            let g = p.gcd(q);
            let pseq = sturm_sequence(p);
            if g.degree() >= 1 {
                let gseq = sturm_sequence(&g);
                if count_roots(&gseq, a0, b0) > 0 {
                    // the shared factor vanishes in the interval; since p
                    // has exactly one root there, q vanishes at it
                    return 0;
                }
            }
            let qseq = sturm_sequence(q);
            let mut a = a0.clone();
            let mut b = b0.clone();
            loop {
                let q_roots_inside =
                    count_roots(&qseq, &a, &b) + usize::from(q.eval(&a).is_zero());
                if q_roots_inside == 0 && !q.eval(&a).is_zero() {
                    return sign(&q.eval(&a));
                }
                let mid = (&a + &b) / BigRational::from(BigInt::from(2));
                if p.eval(&mid).is_zero() {
                    return sign(&q.eval(&mid));
                }
                if count_roots(&pseq, &a, &mid) == 1 {
                    b = mid;
                } else {
                    a = mid;
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// univariate conjunction decisions

#[derive(Debug, Clone)]
struct ULit {
    poly: UPoly,
    rel: Rel,
    /// squareness marker: Some(pos) means a rational-mode Sq literal
    sq: Option<bool>,
}

fn ulits(lits: &[RLit], v: &str) -> Result<Vec<ULit>> {
    lits.iter()
        .map(|l| match l {
            RLit::Atom { poly, rel } => Ok(ULit {
                poly: UPoly::from_rpoly(poly, v)?,
                rel: *rel,
                sq: None,
            }),
            RLit::Sq { poly, pos } => Ok(ULit {
                poly: UPoly::from_rpoly(poly, v)?,
                rel: Rel::Eq,
                sq: Some(*pos),
            }),
        })
        .collect()
}

fn check_degree_cap(lits: &[ULit]) -> Result<()> {
    for l in lits {
        if l.poly.degree() > STURM_DEGREE_CAP {
            return Err(Error::DegreeCapExceeded(format!(
                "degree {} exceeds the Sturm cap {STURM_DEGREE_CAP}",
                l.poly.degree()
            )));
        }
    }
    Ok(())
}

fn lit_holds_at(l: &ULit, x: &BigRational, mode: ResidueMode) -> bool {
    let v = l.poly.eval(x);
    match l.sq {
        Some(pos) => {
            let s = match mode {
                ResidueMode::Rational => is_square_rational(&v),
                ResidueMode::RealClosed => !v.is_negative(),
            };
            s == pos
        }
        None => match l.rel {
            Rel::Eq => v.is_zero(),
            Rel::Lt => v.is_negative(),
        },
    }
}

/// ∃u over a real closed field for a conjunction of univariate literals.
fn decide_exists_rcf(lits: &[ULit]) -> Result<bool> {
    check_degree_cap(lits)?;
    // trivially true literals (zero polynomial satisfying its relation)
    // and trivially false ones
    let mut eqs: Vec<&ULit> = Vec::new();
    let mut ineqs: Vec<&ULit> = Vec::new();
    for l in lits {
        debug_assert!(l.sq.is_none(), "Sq literal reached the RCF decision");
        if l.poly.is_zero() {
            match l.rel {
                Rel::Eq => continue,
                Rel::Lt => return Ok(false),
            }
        }
        if l.poly.degree() == 0 {
            let c = &l.poly.0[0];
            let ok = match l.rel {
                Rel::Eq => c.is_zero(),
                Rel::Lt => c.is_negative(),
            };
            if ok {
                continue;
            }
            return Ok(false);
        }
        match l.rel {
            Rel::Eq => eqs.push(l),
            Rel::Lt => ineqs.push(l),
        }
    }
    if !eqs.is_empty() {
        // common roots: gcd of all equality polynomials
        let mut g = eqs[0].poly.clone();
        for e in &eqs[1..] {
            g = g.gcd(&e.poly);
        }
        if g.degree() == 0 {
            return Ok(false);
        }
        let gsf = g.squarefree();
        for root in isolate_roots(&gsf) {
            let mut all = true;
            for l in &ineqs {
                let s = sign_at_root(&l.poly, &gsf, &root);
                if s >= 0 {
                    all = false;
                    break;
                }
            }
            if all {
                return Ok(true);
            }
        }
        return Ok(false);
    }
    // only strict inequalities: sample one point per sign-invariant region
    let mut product = UPoly::new(vec![BigRational::one()]);
    for l in &ineqs {
        product = mul_upoly(&product, &l.poly);
    }
    let psf = product.squarefree();
    let roots = isolate_roots(&psf);
    let mut samples: Vec<BigRational> = Vec::new();
    if roots.is_empty() {
        samples.push(BigRational::zero());
    } else {
        // refine to pairwise disjoint intervals so interval endpoints land
        // strictly between consecutive roots
        let refined = refine_disjoint(&psf, roots);
        if let Some(first) = refined.first() {
            samples.push(left_of(first));
        }
        for r in &refined {
            samples.push(right_of(r));
        }
    }
    for x in samples {
        if psf.eval(&x).is_zero() {
            continue;
        }
        if ineqs.iter().all(|l| l.poly.eval(&x).is_negative()) {
            return Ok(true);
        }
    }
    Ok(false)
}

fn mul_upoly(a: &UPoly, b: &UPoly) -> UPoly {
    if a.is_zero() || b.is_zero() {
        return UPoly::zero();
    }
    let mut out = vec![BigRational::zero(); a.0.len() + b.0.len() - 1];
    for (i, ca) in a.0.iter().enumerate() {
        for (j, cb) in b.0.iter().enumerate() {
            let v = &out[i + j] + ca * cb;
            out[i + j] = v;
        }
    }
    UPoly::new(out)
}

fn left_of(r: &IsoRoot) -> BigRational {
    match r {
        IsoRoot::Exact(x) => x - BigRational::one(),
        IsoRoot::Interval(a, _) => a.clone(),
    }
}

fn right_of(r: &IsoRoot) -> BigRational {
    match r {
        IsoRoot::Exact(x) => x + BigRational::one(),
        IsoRoot::Interval(_, b) => b.clone(),
    }
}

fn refine_disjoint(p: &UPoly, mut roots: Vec<IsoRoot>) -> Vec<IsoRoot> {
    let seq = sturm_sequence(p);
    let two = BigRational::from(BigInt::from(2));
    loop {
        let mut overlap = false;
        for i in 1..roots.len() {
            let (a, b) = bounds(&roots[i - 1]);
            let (c, d) = bounds(&roots[i]);
            if b > c && a < d {
                overlap = true;
                // shrink both intervals
                for idx in [i - 1, i] {
                    let r = &mut roots[idx];
                    if let IsoRoot::Interval(x, y) = r {
                        let mid = (&*x + &*y) / &two;
                        if p.eval(&mid).is_zero() {
                            *r = IsoRoot::Exact(mid);
                        } else if count_roots(&seq, x, &mid) == 1 {
                            *y = mid;
                        } else {
                            *x = mid;
                        }
                    }
                }
            }
        }
        if !overlap {
            return roots;
        }
    }
}

fn bounds(r: &IsoRoot) -> (BigRational, BigRational) {
    match r {
        IsoRoot::Exact(x) => (x.clone(), x.clone()),
        IsoRoot::Interval(a, b) => (a.clone(), b.clone()),
    }
}

/// ∃u over the rationals for a conjunction of univariate literals.
fn decide_exists_rational(lits: &[ULit]) -> Result<bool> {
    check_degree_cap(lits)?;
    let mut eqs: Vec<&ULit> = Vec::new();
    let mut others: Vec<&ULit> = Vec::new();
    for l in lits {
        if l.poly.is_zero() || l.poly.degree() == 0 {
            let v = if l.poly.is_zero() {
                BigRational::zero()
            } else {
                l.poly.0[0].clone()
            };
            if !lit_holds_at(l, &BigRational::zero(), ResidueMode::Rational)
                && l.poly.is_zero()
            {
                return Ok(false);
            }
            if !l.poly.is_zero() {
                // constant literal, value independent of u
                let c = ULit { poly: UPoly::new(vec![v]), rel: l.rel, sq: l.sq };
                if !lit_holds_at(&c, &BigRational::zero(), ResidueMode::Rational) {
                    return Ok(false);
                }
            }
            continue;
        }
        if l.sq.is_none() && l.rel == Rel::Eq {
            eqs.push(l);
        } else {
            others.push(l);
        }
    }
    if !eqs.is_empty() {
        let mut g = eqs[0].poly.clone();
        for e in &eqs[1..] {
            g = g.gcd(&e.poly);
        }
        if g.degree() == 0 {
            return Ok(false);
        }
        for root in rational_roots(&g)? {
            if others
                .iter()
                .all(|l| lit_holds_at(l, &root, ResidueMode::Rational))
            {
                return Ok(true);
            }
        }
        return Ok(false);
    }
    // no equalities: strict inequalities are decided over the reals (the
    // rationals are dense, and the satisfying set is open); squareness
    // of an unpinned variable is out of scope
    if others.iter().any(|l| l.sq.is_some()) {
        return Err(Error::ModeUnsupported(
            "squareness constraint on an unpinned rational variable".into(),
        ));
    }
    let borrowed: Vec<ULit> = others.iter().map(|l| (*l).clone()).collect();
    decide_exists_rcf(&borrowed)
}

/// All rational roots of a nonzero univariate polynomial.
pub fn rational_roots(p: &UPoly) -> Result<Vec<BigRational>> {
    assert!(!p.is_zero());
    let mut roots = Vec::new();
    // clear denominators
    let mut den = BigInt::one();
    for c in &p.0 {
        den = den.lcm(c.denom());
    }
    let ints: Vec<BigInt> = p.0.iter().map(|c| (c * BigRational::from(den.clone())).to_integer()).collect();
    // factor out powers of u
    let k = ints.iter().take_while(|c| c.is_zero()).count();
    if k > 0 {
        roots.push(BigRational::zero());
    }
    let ints = &ints[k..];
    if ints.len() <= 1 {
        return Ok(roots);
    }
    let a0 = ints[0].abs();
    let an = ints.last().unwrap().abs();
    let ds0 = divisors(&a0)?;
    let dsn = divisors(&an)?;
    for p0 in &ds0 {
        for q0 in &dsn {
            for s in [1i32, -1] {
                let cand = BigRational::new(p0 * BigInt::from(s), q0.clone());
                if p.eval(&cand).is_zero() && !roots.contains(&cand) {
                    roots.push(cand);
                }
            }
        }
    }
    roots.sort();
    Ok(roots)
}

fn divisors(n: &BigInt) -> Result<Vec<BigInt>> {
    if n.is_zero() {
        return Ok(vec![BigInt::one()]);
    }
    let n_u64: u64 = n
        .abs()
        .to_string()
        .parse()
        .map_err(|_| Error::BudgetExceeded("coefficient too large for rational root search".into()))?;
    if n_u64 > MAX_DIVISOR_MAGNITUDE {
        return Err(Error::BudgetExceeded(
            "coefficient too large for rational root search".into(),
        ));
    }
    let mut out = Vec::new();
    let mut d = 1u64;
    while d * d <= n_u64 {
        if n_u64 % d == 0 {
            out.push(BigInt::from(d));
            out.push(BigInt::from(n_u64 / d));
        }
        d += 1;
    }
    out.sort();
    out.dedup();
    Ok(out)
}

// ---------------------------------------------------------------------------
// squareness

/// Whether q is the square of a rational: q ≥ 0 with both numerator and
/// denominator perfect squares after reduction.
pub fn is_square_rational(q: &BigRational) -> bool {
    if q.is_negative() {
        return false;
    }
    is_square_int(q.numer()) && is_square_int(q.denom())
}

fn is_square_int(n: &BigInt) -> bool {
    if n.is_negative() {
        return false;
    }
    let r = n.sqrt();
    &(&r * &r) == n
}

// ---------------------------------------------------------------------------
// linear elimination with sign case-splits

#[derive(Debug, Clone)]
struct Bound {
    /// the bound value is −b/a
    a: RPoly,
    b: RPoly,
    a_sign: i8,
}

fn eliminate_conj(u: &str, lits: Vec<RLit>, mode: ResidueMode) -> Result<Formula> {
    let (with_u, without): (Vec<RLit>, Vec<RLit>) =
        lits.into_iter().partition(|l| l.mentions(u));
    let rest = conj_formula(&without);
    if with_u.is_empty() {
        return Ok(rest);
    }
    let max_deg = with_u
        .iter()
        .map(|l| match l {
            RLit::Atom { poly, .. } | RLit::Sq { poly, .. } => poly.degree_in(u),
        })
        .max()
        .unwrap();
    if max_deg <= 1 {
        let elim = eliminate_linear_conj(u, &with_u)?;
        return Ok(Formula::and(elim, rest));
    }
    // even powers only? substitute w = u² (u ranges over all of the field,
    // so w ranges over the squares: non-negatives in the real closed
    // field, rational squares in rational mode)
    let all_even = with_u.iter().all(|l| {
        let p = match l {
            RLit::Atom { poly, .. } | RLit::Sq { poly, .. } => poly,
        };
        p.0.keys().all(|m| m.get(u).copied().unwrap_or(0) % 2 == 0)
    });
    if all_even {
        let w = format!("$sq_{u}");
        let halve = |p: &RPoly| -> RPoly {
            RPoly(
                p.0.iter()
                    .map(|(m, c)| {
                        let mut m2 = m.clone();
                        if let Some(e) = m2.remove(u) {
                            if e > 0 {
                                m2.insert(w.clone(), e / 2);
                            }
                        }
                        (m2, c.clone())
                    })
                    .collect(),
            )
        };
        let mut new_lits: Vec<RLit> = with_u
            .iter()
            .map(|l| match l {
                RLit::Atom { poly, rel } => RLit::Atom { poly: halve(poly), rel: *rel },
                RLit::Sq { poly, pos } => RLit::Sq { poly: halve(poly), pos: *pos },
            })
            .collect();
        let wp = RPoly::var(&w);
        let elim = match mode {
            ResidueMode::RealClosed => {
                let mut pos_branch = new_lits.clone();
                pos_branch.push(RLit::Atom { poly: wp.neg(), rel: Rel::Lt });
                let mut zero_branch = new_lits;
                zero_branch.push(RLit::Atom { poly: wp, rel: Rel::Eq });
                Formula::or(
                    eliminate_conj(&w, pos_branch, mode)?,
                    eliminate_conj(&w, zero_branch, mode)?,
                )
            }
            ResidueMode::Rational => {
                new_lits.push(RLit::Sq { poly: wp, pos: true });
                eliminate_conj(&w, new_lits, mode)?
            }
        };
        return Ok(Formula::and(elim, rest));
    }
    // nonlinear: only the univariate case is in scope
    let univariate = with_u.iter().all(|l| {
        let p = match l {
            RLit::Atom { poly, .. } | RLit::Sq { poly, .. } => poly,
        };
        p.vars().iter().all(|v| v == u)
    });
    if !univariate {
        // last resort: a univariate equality pins u to a root; branch over
        // the roots and substitute, which also resolves the other literals
        // that mix u with further variables
        if let Some(elim) = eliminate_by_root_subst(u, &with_u, mode)? {
            return Ok(Formula::and(elim, rest));
        }
        return Err(Error::NonlinearOccurrence(format!(
            "nonlinear multivariate occurrence of {u}"
        )));
    }
    let uls = ulits(&with_u, u)?;
    let truth = match mode {
        ResidueMode::RealClosed => decide_exists_rcf(&uls)?,
        ResidueMode::Rational => decide_exists_rational(&uls)?,
    };
    Ok(if truth { rest } else { Formula::False })
}

/// If some positive equality literal is univariate in `u`, branch over its
/// roots and substitute them into the remaining literals. Sound whenever
/// every real root is rational; over the rationals the rational roots are
/// exhaustive by definition. Returns `Ok(None)` when no univariate
/// equality is available.
fn eliminate_by_root_subst(
    u: &str,
    with_u: &[RLit],
    mode: ResidueMode,
) -> Result<Option<Formula>> {
    let pinning = with_u.iter().find_map(|l| match l {
        RLit::Atom { poly, rel: Rel::Eq } if poly.vars().iter().all(|v| v == u) => Some(poly),
        _ => None,
    });
    let Some(pin) = pinning else {
        return Ok(None);
    };
    let up = UPoly::from_rpoly(pin, u)?;
    if up.is_zero() || up.degree() == 0 {
        // degenerate: the equality does not constrain u after all
        return Ok(None);
    }
    if up.degree() > STURM_DEGREE_CAP {
        return Err(Error::DegreeCapExceeded(format!(
            "degree {} exceeds the Sturm cap {STURM_DEGREE_CAP}",
            up.degree()
        )));
    }
    let roots = rational_roots(&up)?;
    if mode == ResidueMode::RealClosed {
        let n_real = isolate_roots(&up.squarefree()).len();
        if n_real > roots.len() {
            if up.degree() == 2 && roots.is_empty() {
                return Ok(Some(subst_quadratic_pin(u, &up, with_u)?));
            }
            return Err(Error::NonlinearOccurrence(format!(
                "irrational root pinning {u} mixes with other variables"
            )));
        }
    }
    let mut branches = Vec::new();
    for r in &roots {
        let value = RPoly::constant(r.clone());
        let subbed: Vec<RLit> = with_u
            .iter()
            .map(|l| match l {
                RLit::Atom { poly, rel } => RLit::Atom {
                    poly: poly.subst(u, &value),
                    rel: *rel,
                },
                RLit::Sq { poly, pos } => RLit::Sq {
                    poly: poly.subst(u, &value),
                    pos: *pos,
                },
            })
            .collect();
        branches.push(conj_formula(&subbed));
    }
    Ok(Some(Formula::big_or(branches)))
}

/// Virtual substitution of the two irrational roots of a rational
/// quadratic `a·u² + b·u + c = 0` (discriminant positive, not a square).
/// Each literal is reduced mod the pin to `A + B·u`; at the root
/// `u = (−b + ε√D)/(2a)` its sign equals the sign of `P + ε√D·Q` up to the
/// sign of `2a`, where `P = 2aA − bB`, `Q = B`, and comparisons against
/// `√D` clear the radical through `P² − D·Q²`.
fn subst_quadratic_pin(u: &str, up: &UPoly, with_u: &[RLit]) -> Result<Formula> {
    let a = up.0[2].clone();
    let b = up.0[1].clone();
    let c = up.0[0].clone();
    let disc = &b * &b - BigRational::from(BigInt::from(4)) * &a * &c;
    let zero_t = || Term::Rat(BigRational::zero());
    let lt0 = |p: &RPoly| Formula::Lt(p.to_term(), zero_t());
    let le0 = |p: &RPoly| Formula::Lt(p.neg().to_term(), zero_t()).not();
    let eq0 = |p: &RPoly| Formula::Eq(p.to_term(), zero_t());
    let gt0 = |p: &RPoly| Formula::Lt(p.neg().to_term(), zero_t());
    // A + B·u after reduction by u² = (−b·u − c)/a, via Horner
    let reduce = |q: &RPoly| -> (RPoly, RPoly) {
        let cs = q.coeffs_in(u);
        let mut aa = RPoly::zero();
        let mut bb = RPoly::zero();
        for qk in cs.iter().rev() {
            let na = bb.scale(&(-&c / &a)).add(qk);
            let nb = aa.add(&bb.scale(&(-&b / &a)));
            aa = na;
            bb = nb;
        }
        (aa, bb)
    };
    let two_a = BigRational::from(BigInt::from(2)) * &a;
    let mut branches = Vec::new();
    for eps in [1i32, -1] {
        let mut conj = Vec::new();
        for l in with_u {
            let (poly, rel) = match l {
                RLit::Atom { poly, rel } => (poly, *rel),
                RLit::Sq { .. } => {
                    return Err(Error::NonlinearOccurrence(
                        "squareness literal under an irrational pin".into(),
                    ))
                }
            };
            let (aa, bb) = reduce(poly);
            let mut p = aa.scale(&two_a).sub(&bb.scale(&b));
            let mut q = bb;
            // orient so the literal's sign matches sign(P + ε√D·Q)
            if two_a.is_negative() {
                p = p.neg();
                q = q.neg();
            }
            let r = if eps > 0 { q.clone() } else { q.neg() };
            let conjugate = p.mul(&p).sub(&q.mul(&q).scale(&disc));
            conj.push(match rel {
                Rel::Eq => Formula::and(le0(&p.mul(&r)), eq0(&conjugate)),
                Rel::Lt => Formula::big_or([
                    Formula::and(lt0(&p), le0(&r)),
                    Formula::big_and([lt0(&p).not(), lt0(&r), lt0(&conjugate)]),
                    Formula::big_and([lt0(&p), gt0(&r), gt0(&conjugate)]),
                ]),
            });
        }
        branches.push(Formula::big_and(conj));
    }
    Ok(Formula::big_or(branches))
}

/// Fourier–Motzkin / virtual substitution for literals linear in u, with
/// case splits on the signs of symbolic leading coefficients.
fn eliminate_linear_conj(u: &str, lits: &[RLit]) -> Result<Formula> {
    // distinct symbolic coefficients of u
    let mut sym_coeffs: Vec<RPoly> = Vec::new();
    for l in lits {
        let p = match l {
            RLit::Atom { poly, .. } | RLit::Sq { poly, .. } => poly,
        };
        let cs = p.coeffs_in(u);
        if cs.len() < 2 {
            continue;
        }
        let a = cs[1].clone();
        if a.as_constant().is_none() && !sym_coeffs.contains(&a) {
            sym_coeffs.push(a);
        }
    }
    if sym_coeffs.len() as u32 > MAX_SIGN_SPLIT_VARS {
        return Err(Error::BudgetExceeded(format!(
            "{} symbolic coefficient sign splits",
            sym_coeffs.len()
        )));
    }
    let n_branches = 3usize.pow(sym_coeffs.len() as u32);
    let mut branches = Vec::new();
    for mask in 0..n_branches {
        let mut signs: Vec<i8> = Vec::new();
        let mut m = mask;
        for _ in 0..sym_coeffs.len() {
            signs.push([-1i8, 0, 1][m % 3]);
            m /= 3;
        }
        let branch = eliminate_linear_branch(u, lits, &sym_coeffs, &signs)?;
        branches.push(branch);
    }
    Ok(Formula::big_or(branches))
}

fn eliminate_linear_branch(
    u: &str,
    lits: &[RLit],
    sym_coeffs: &[RPoly],
    signs: &[i8],
) -> Result<Formula> {
    let sign_of = |a: &RPoly| -> i8 {
        if let Some(c) = a.as_constant() {
            return sign(&c);
        }
        let i = sym_coeffs.iter().position(|p| p == a).unwrap();
        signs[i]
    };
    let mut side: Vec<RLit> = Vec::new();
    // branch guards
    for (a, s) in sym_coeffs.iter().zip(signs) {
        side.push(match s {
            0 => RLit::Atom { poly: a.clone(), rel: Rel::Eq },
            1 => RLit::Atom { poly: a.neg(), rel: Rel::Lt },
            _ => RLit::Atom { poly: a.clone(), rel: Rel::Lt },
        });
    }
    let mut eqs: Vec<(RPoly, RPoly, i8)> = Vec::new(); // a·u + b = 0, sign a ≠ 0
    let mut lowers: Vec<Bound> = Vec::new();
    let mut uppers: Vec<Bound> = Vec::new();
    let mut sq_with_u: Vec<(RPoly, RPoly, bool)> = Vec::new(); // Sq(a·u + b)
    for l in lits {
        let (p, is_sq, pos_or_rel) = match l {
            RLit::Atom { poly, rel } => (poly, false, *rel == Rel::Eq),
            RLit::Sq { poly, pos } => (poly, true, *pos),
        };
        let cs = p.coeffs_in(u);
        let a = cs.get(1).cloned().unwrap_or_else(RPoly::zero);
        let b = cs.first().cloned().unwrap_or_else(RPoly::zero);
        let s = sign_of(&a);
        if s == 0 {
            // coefficient vanishes on this branch: residual literal in b
            side.push(if is_sq {
                RLit::Sq { poly: b, pos: pos_or_rel }
            } else {
                RLit::Atom {
                    poly: b,
                    rel: if pos_or_rel { Rel::Eq } else { Rel::Lt },
                }
            });
            continue;
        }
        if is_sq {
            sq_with_u.push((a, b, pos_or_rel));
        } else if pos_or_rel {
            eqs.push((a, b, s));
        } else {
            // a·u + b < 0: u < −b/a when a > 0, u > −b/a when a < 0
            let bound = Bound { a, b, a_sign: s };
            if s > 0 {
                uppers.push(bound);
            } else {
                lowers.push(bound);
            }
        }
    }
    if let Some((a0, b0, s0)) = eqs.first().cloned() {
        // u = −b0/a0: substitute into the remaining u-literals, clearing
        // the denominator a0 (squared for Sq literals)
        for (a, b, s) in eqs.iter().skip(1) {
            let num = a.mul(&b0.neg()).add(&b.mul(&a0));
            let _ = s;
            side.push(RLit::Atom { poly: num, rel: Rel::Eq });
        }
        for bd in lowers.iter().chain(uppers.iter()) {
            // (a·u + b) < 0 at u = −b0/a0 ⟺ sign(a0)·(−a·b0 + b·a0) < 0
            let num = bd.a.mul(&b0.neg()).add(&bd.b.mul(&a0));
            let poly = if s0 > 0 { num } else { num.neg() };
            side.push(RLit::Atom { poly, rel: Rel::Lt });
        }
        for (a, b, pos) in &sq_with_u {
            // Sq((−a·b0 + b·a0)/a0) ⟺ Sq((−a·b0 + b·a0)·a0)
            let num = a.mul(&b0.neg()).add(&b.mul(&a0));
            side.push(RLit::Sq { poly: num.mul(&a0), pos: *pos });
        }
        return Ok(conj_formula(&side));
    }
    if !sq_with_u.is_empty() {
        return Err(Error::ModeUnsupported(
            "squareness constraint on a variable not pinned by an equality".into(),
        ));
    }
    // pure inequalities: satisfiable iff every lower bound is below every
    // upper bound (the order is dense)
    for lo in &lowers {
        for up in &uppers {
            // −b_l/a_l < −b_u/a_u ⟺ sign(a_l·a_u)·(−b_l·a_u + b_u·a_l) < 0
            let num = lo.b.neg().mul(&up.a).add(&up.b.mul(&lo.a));
            let poly = if lo.a_sign * up.a_sign > 0 { num } else { num.neg() };
            side.push(RLit::Atom { poly, rel: Rel::Lt });
        }
    }
    Ok(conj_formula(&side))
}

// ---------------------------------------------------------------------------
// public pipeline

fn eliminate_exists_r(v: &Var, body: &Formula, mode: ResidueMode) -> Result<Formula> {
    let conjs = dnf_lits(body, mode, true)?;
    let mut out = Vec::new();
    for lits in conjs {
        out.push(eliminate_conj(&v.name, lits, mode)?);
    }
    Ok(Formula::big_or(out))
}

/// Difficulty of eliminating `u` from a quantifier-free body: 0 linear,
/// 1 even powers only, 2 univariate nonlinear, 3 out of scope.
fn elim_rank(body: &Formula, u: &str) -> u8 {
    let mut polys: Vec<RPoly> = Vec::new();
    fn collect(f: &Formula, out: &mut Vec<RPoly>) {
        match f {
            Formula::Eq(a, b) | Formula::Lt(a, b) => {
                if let (Ok(pa), Ok(pb)) = (RPoly::from_term(a), RPoly::from_term(b)) {
                    out.push(pa.sub(&pb));
                }
            }
            Formula::Sq(t) => {
                if let Ok(p) = RPoly::from_term(t) {
                    out.push(p);
                }
            }
            Formula::Not(g) => collect(g, out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                collect(a, out);
                collect(b, out);
            }
            Formula::Exists(_, b) | Formula::Forall(_, b) => collect(b, out),
            _ => {}
        }
    }
    collect(body, &mut polys);
    let with_u: Vec<&RPoly> = polys.iter().filter(|p| p.degree_in(u) > 0).collect();
    if with_u.iter().all(|p| p.degree_in(u) <= 1) {
        return 0;
    }
    let all_even = with_u
        .iter()
        .all(|p| p.0.keys().all(|m| m.get(u).copied().unwrap_or(0) % 2 == 0));
    if all_even {
        return 1;
    }
    if with_u.iter().all(|p| p.vars().iter().all(|v| v == u)) {
        return 2;
    }
    3
}

/// Eliminates a block of consecutive existentials; the block commutes,
/// so variables are ordered easiest-first (a variable occurring only
/// linearly can always go first, often leaving a univariate tail).
fn eliminate_exists_block(vars: &[Var], body: Formula, mode: ResidueMode) -> Result<Formula> {
    let mut remaining: Vec<Var> = vars.to_vec();
    let mut body = body;
    while !remaining.is_empty() {
        let (idx, _) = remaining
            .iter()
            .enumerate()
            .min_by_key(|(i, v)| (elim_rank(&body, &v.name), *i))
            .expect("nonempty");
        let v = remaining.remove(idx);
        body = crate::qe::simplify(&eliminate_exists_r(&v, &body, mode)?);
    }
    Ok(body)
}

/// Eliminates all residue-sort quantifiers, bottom-up.
/// Prenex normal form with capture-avoiding renaming: every bound variable
/// is renamed to a fresh `$p{n}` so prefixes from sibling subformulas can
/// be concatenated safely. The bool marks an existential entry.
fn prenex(f: &Formula, ctr: &mut usize) -> (Vec<(bool, Var)>, Formula) {
    match f {
        Formula::True
        | Formula::False
        | Formula::Eq(..)
        | Formula::Lt(..)
        | Formula::Sq(_)
        | Formula::Cong { .. } => (Vec::new(), f.clone()),
        Formula::Not(g) => {
            let (mut p, m) = prenex(g, ctr);
            for e in &mut p {
                e.0 = !e.0;
            }
            (p, m.not())
        }
        Formula::And(a, b) => {
            let (mut pa, ma) = prenex(a, ctr);
            let (pb, mb) = prenex(b, ctr);
            pa.extend(pb);
            (pa, Formula::and(ma, mb))
        }
        Formula::Or(a, b) => {
            let (mut pa, ma) = prenex(a, ctr);
            let (pb, mb) = prenex(b, ctr);
            pa.extend(pb);
            (pa, Formula::or(ma, mb))
        }
        Formula::Implies(a, b) => prenex(&Formula::or(a.as_ref().clone().not(), (**b).clone()), ctr),
        Formula::Exists(v, body) | Formula::Forall(v, body) => {
            let exists = matches!(f, Formula::Exists(..));
            let fresh = Var::new(format!("$p{}", *ctr), v.sort);
            *ctr += 1;
            let renamed = crate::formula::subst(body, v, &Term::Var(fresh.clone()));
            let (mut p, m) = prenex(&renamed, ctr);
            p.insert(0, (exists, fresh));
            (p, m)
        }
    }
}

fn has_quantifier(f: &Formula) -> bool {
    match f {
        Formula::Exists(..) | Formula::Forall(..) => true,
        Formula::Not(g) => has_quantifier(g),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            has_quantifier(a) || has_quantifier(b)
        }
        _ => false,
    }
}

pub fn qe_residue(f: &Formula, mode: ResidueMode) -> Result<Formula> {
    match f {
        Formula::True
        | Formula::False
        | Formula::Eq(..)
        | Formula::Lt(..)
        | Formula::Sq(_)
        | Formula::Cong { .. } => Ok(f.clone()),
        Formula::Not(g) => Ok(qe_residue(g, mode)?.not()),
        Formula::And(a, b) => Ok(Formula::and(qe_residue(a, mode)?, qe_residue(b, mode)?)),
        Formula::Or(a, b) => Ok(Formula::or(qe_residue(a, mode)?, qe_residue(b, mode)?)),
        Formula::Implies(a, b) => Ok(Formula::or(
            qe_residue(a, mode)?.not(),
            qe_residue(b, mode)?,
        )),
        Formula::Exists(..) | Formula::Forall(..) => {
            // prenex the whole subformula so quantifiers separated by
            // connectives join one prefix; blocks of like quantifiers
            // commute, letting the eliminator pick an easy order
            let mut ctr = 0usize;
            let (prefix, matrix) = prenex(f, &mut ctr);
            debug_assert!(!has_quantifier(&matrix));
            let mut body = matrix;
            let mut i = prefix.len();
            while i > 0 {
                let exists = prefix[i - 1].0;
                let mut j = i;
                while j > 0 && prefix[j - 1].0 == exists {
                    j -= 1;
                }
                let vars: Vec<Var> = prefix[j..i].iter().map(|(_, v)| v.clone()).collect();
                body = if exists {
                    eliminate_exists_block(&vars, body, mode)?
                } else {
                    eliminate_exists_block(&vars, body.not(), mode)?.not()
                };
                i = j;
            }
            Ok(body)
        }
    }
}

/// Truth value of a ground, quantifier-free residue formula.
pub fn eval_ground_residue(f: &Formula, mode: ResidueMode) -> Result<bool> {
    match f {
        Formula::True => Ok(true),
        Formula::False => Ok(false),
        Formula::Eq(a, b) => {
            let p = RPoly::from_term(a)?.sub(&RPoly::from_term(b)?);
            match p.as_constant() {
                Some(c) => Ok(c.is_zero()),
                None => Err(Error::EvalError("free residue variable in ground atom".into())),
            }
        }
        Formula::Lt(a, b) => {
            let p = RPoly::from_term(a)?.sub(&RPoly::from_term(b)?);
            match p.as_constant() {
                Some(c) => Ok(c.is_negative()),
                None => Err(Error::EvalError("free residue variable in ground atom".into())),
            }
        }
        Formula::Sq(t) => {
            let p = RPoly::from_term(t)?;
            match p.as_constant() {
                Some(c) => Ok(match mode {
                    ResidueMode::Rational => is_square_rational(&c),
                    ResidueMode::RealClosed => !c.is_negative(),
                }),
                None => Err(Error::EvalError("free residue variable in Sq atom".into())),
            }
        }
        Formula::Cong { .. } => Err(Error::SortError(
            "congruence atom in residue formula".into(),
        )),
        Formula::Not(g) => Ok(!eval_ground_residue(g, mode)?),
        Formula::And(a, b) => {
            Ok(eval_ground_residue(a, mode)? && eval_ground_residue(b, mode)?)
        }
        Formula::Or(a, b) => {
            Ok(eval_ground_residue(a, mode)? || eval_ground_residue(b, mode)?)
        }
        Formula::Implies(a, b) => {
            Ok(!eval_ground_residue(a, mode)? || eval_ground_residue(b, mode)?)
        }
        Formula::Exists(..) | Formula::Forall(..) => {
            Err(Error::EvalError("quantifier in ground evaluation".into()))
        }
    }
}

/// Decides a closed residue-sort sentence.
pub fn decide_residue_sentence(f: &Formula, mode: ResidueMode) -> Result<bool> {
    if !crate::formula::free_vars(f).is_empty() {
        return Err(Error::EvalError(
            "decide_residue_sentence requires a closed formula".into(),
        ));
    }
    let qf = qe_residue(f, mode)?;
    eval_ground_residue(&qf, mode)
}

/// Decides a one-variable real-closed sentence with polynomial atoms of
/// degree ≤ 8.
pub fn decide_rcf_univariate(f: &Formula) -> Result<bool> {
    decide_residue_sentence(f, ResidueMode::RealClosed)
}

/// Eliminates the outermost quantifier of a residue formula whose bound
/// variable occurs only linearly.
pub fn eliminate_linear_residue(f: &Formula) -> Result<Formula> {
    let (v, body, negate) = match f {
        Formula::Exists(v, body) => (v, (**body).clone(), false),
        Formula::Forall(v, body) => (v, (**body).clone().not(), true),
        _ => {
            return Err(Error::EvalError(
                "eliminate_linear_residue expects a quantified formula".into(),
            ))
        }
    };
    check_linear_occurrence(&body, &v.name)?;
    let out = eliminate_exists_r(v, &body, ResidueMode::RealClosed)?;
    Ok(if negate { out.not() } else { out })
}

fn check_linear_occurrence(f: &Formula, v: &str) -> Result<()> {
    match f {
        Formula::True | Formula::False | Formula::Cong { .. } => Ok(()),
        Formula::Eq(a, b) | Formula::Lt(a, b) => {
            let p = RPoly::from_term(a)?.sub(&RPoly::from_term(b)?);
            if p.degree_in(v) > 1 {
                return Err(Error::NonlinearOccurrence(format!(
                    "{v} occurs with degree {}",
                    p.degree_in(v)
                )));
            }
            Ok(())
        }
        Formula::Sq(t) => {
            let p = RPoly::from_term(t)?;
            if p.degree_in(v) > 1 {
                return Err(Error::NonlinearOccurrence(format!(
                    "{v} occurs with degree {}",
                    p.degree_in(v)
                )));
            }
            Ok(())
        }
        Formula::Not(g) => check_linear_occurrence(g, v),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            check_linear_occurrence(a, v)?;
            check_linear_occurrence(b, v)
        }
        Formula::Exists(w, body) | Formula::Forall(w, body) => {
            if w.name == v {
                Ok(())
            } else {
                check_linear_occurrence(body, v)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn square_examples() {
        assert!(is_square_rational(&rat(1, 1)));
        assert!(!is_square_rational(&rat(2, 1)));
        assert!(is_square_rational(&rat(9, 4)));
        assert!(!is_square_rational(&rat(-4, 1)));
        assert!(is_square_rational(&rat(0, 1)));
    }

    #[test]
    fn rcf_sqrt2_exists() {
        let f = parse("E u (u*u = 2)").unwrap();
        assert!(decide_rcf_univariate(&f).unwrap());
    }

    #[test]
    fn rcf_no_root_of_u2_plus_1() {
        let f = parse("E u (u*u + 1 = 0)").unwrap();
        assert!(!decide_rcf_univariate(&f).unwrap());
    }

    #[test]
    fn rcf_odd_degree_has_root() {
        let f = parse("E u (u*u*u - u - 5 = 0)").unwrap();
        assert!(decide_rcf_univariate(&f).unwrap());
    }

    #[test]
    fn rational_mode_sqrt2_fails() {
        let f = parse("E u (u*u = 2)").unwrap();
        assert!(!decide_residue_sentence(&f, ResidueMode::Rational).unwrap());
        let g = parse("E u (u*u = 4)").unwrap();
        assert!(decide_residue_sentence(&g, ResidueMode::Rational).unwrap());
    }

    #[test]
    fn degree_cap() {
        let f = parse("E u (u*u*u*u*u*u*u*u*u = 2)").unwrap();
        assert!(matches!(
            decide_rcf_univariate(&f),
            Err(Error::DegreeCapExceeded(_))
        ));
    }

    #[test]
    fn linear_density() {
        // ∃u (a < u ∧ u < b) → a < b; check semantically on samples
        let f = parse("E u (u1 < u & u < u2)").unwrap();
        let g = eliminate_linear_residue(&f).unwrap();
        for (a, b) in [(0i64, 1i64), (1, 0), (2, 2), (-3, 5)] {
            let inst = crate::formula::subst(&g, &Var::new("u1".to_string(), Sort::Residue), &Term::Rat(rat(a, 1)));
            let inst = crate::formula::subst(&inst, &Var::new("u2".to_string(), Sort::Residue), &Term::Rat(rat(b, 1)));
            let got = eval_ground_residue(&inst, ResidueMode::RealClosed).unwrap();
            assert_eq!(got, a < b, "a={a} b={b}");
        }
    }

    #[test]
    fn linear_equality_with_sign() {
        // ∃u (c·u = d ∧ u > 0) ⟺ c·d > 0, or c = 0 ∧ d = 0 (then any u>0)
        let f = parse("E u (u1 * u = u2 & 0 < u)").unwrap();
        let g = eliminate_linear_residue(&f).unwrap();
        for c in -3i64..=3 {
            for d in -3i64..=3 {
                let inst = crate::formula::subst(&g, &Var::new("u1".to_string(), Sort::Residue), &Term::Rat(rat(c, 1)));
                let inst = crate::formula::subst(&inst, &Var::new("u2".to_string(), Sort::Residue), &Term::Rat(rat(d, 1)));
                let got = eval_ground_residue(&inst, ResidueMode::RealClosed).unwrap();
                let expect = (c != 0 && c * d > 0) || (c == 0 && d == 0);
                assert_eq!(got, expect, "c={c} d={d}");
            }
        }
    }

    #[test]
    fn forall_shift() {
        // ∀u (u + a > u) ⟺ a > 0
        let f = parse("A u (u < u + u1)").unwrap();
        let g = eliminate_linear_residue(&f).unwrap();
        for a in [-1i64, 0, 2] {
            let inst = crate::formula::subst(&g, &Var::new("u1".to_string(), Sort::Residue), &Term::Rat(rat(a, 1)));
            let got = eval_ground_residue(&inst, ResidueMode::RealClosed).unwrap();
            assert_eq!(got, a > 0, "a={a}");
        }
    }

    #[test]
    fn nonlinear_occurrence_rejected() {
        let f = parse("E u (u * u < u1)").unwrap();
        assert!(matches!(
            eliminate_linear_residue(&f),
            Err(Error::NonlinearOccurrence(_))
        ));
    }

    #[test]
    fn nested_quantifiers_linear() {
        // ∀u ∃w (u < w): true by unboundedness
        let f = parse("A u (E w (u < w))").unwrap();
        assert!(decide_residue_sentence(&f, ResidueMode::RealClosed).unwrap());
        // ∃w ∀u (u < w): false
        let g = parse("E w (A u (u < w))").unwrap();
        assert!(!decide_residue_sentence(&g, ResidueMode::RealClosed).unwrap());
    }

    #[test]
    fn even_power_reduction() {
        // ∃u (u⁴ = 16 ∧ u² = 4): u = ±√2·... wait: u⁴=16 gives u²=4, consistent
        let f = parse("E u (u*u*u*u = 16 & u*u = 4)").unwrap();
        assert!(decide_rcf_univariate(&f).unwrap());
        let g = parse("E u (u*u*u*u = 16 & u*u = 2)").unwrap();
        assert!(!decide_rcf_univariate(&g).unwrap());
    }

    #[test]
    fn sq_atom_modes() {
        let f = parse("sq(2)").unwrap();
        assert!(!decide_residue_sentence(&f, ResidueMode::Rational).unwrap());
        assert!(decide_residue_sentence(&f, ResidueMode::RealClosed).unwrap());
        let g = parse("E u (u = 2 & sq(u))").unwrap();
        assert!(!decide_residue_sentence(&g, ResidueMode::Rational).unwrap());
        let h = parse("E u (u = 4 & sq(u))").unwrap();
        assert!(decide_residue_sentence(&h, ResidueMode::Rational).unwrap());
    }

    #[test]
    fn sturm_counts_match_sampling() {
        // (u-1)(u-2)(u+3) has roots 1, 2, −3
        let p = UPoly::new(vec![rat(6, 1), rat(-7, 1), rat(0, 1), rat(1, 1)]);
        let seq = sturm_sequence(&p);
        assert_eq!(count_roots(&seq, &rat(-10, 1), &rat(10, 1)), 3);
        assert_eq!(count_roots(&seq, &rat(0, 1), &rat(10, 1)), 2);
        let roots = isolate_roots(&p.squarefree());
        assert_eq!(roots.len(), 3);
    }

    #[test]
    fn rational_roots_found() {
        // 6u² − 5u + 1 = (2u−1)(3u−1)
        let p = UPoly::new(vec![rat(1, 1), rat(-5, 1), rat(6, 1)]);
        let roots = rational_roots(&p).unwrap();
        assert_eq!(roots, vec![rat(1, 3), rat(1, 2)]);
    }
}
