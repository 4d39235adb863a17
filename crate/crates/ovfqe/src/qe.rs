//! Field-quantifier elimination.
//!
//! Strategy: after atom normalization every field term sits inside `ac(·)`
//! or `v(·)`. To eliminate `∃x`, collect the polynomials q(x) under those
//! maps, case-split on coefficient degeneracy, and factor each q over a
//! finite set of symbolic roots (rational functions of the parameters;
//! quadratics contribute square-completion roots guarded by the henselian
//! square criterion "v even and ac a square"). On each branch x is either
//! equal to a root or closest to a unique root r at distance δ = v(x−r)
//! with angular component η = ac(x−r); the ultrametric then determines
//! (v, ac) of every factor from (δ, η) and ground data, and `∃x` becomes
//! `∃δ ∃η` — one group-sort and one residue-sort existential, which is
//! exactly the special-formula target. Degree ≥ 3 is rejected honestly.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::formula::{
    check_sorts, free_vars, in_pas_normal_form, sort_of_term, Formula, PasDecomposition,
    QPoly, Sort, Term, Var,
};
use crate::group::GTerm;
use crate::laurent::LaurentSeries;
use crate::residue::RPoly;

#[derive(Debug, Clone)]
pub struct Budget {
    /// highest x-degree of polynomials under ac/v (2 is the supported max)
    pub max_degree: u32,
    /// cap on emitted case-split branches per eliminated quantifier
    pub max_splits: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_degree: 2, max_splits: 100_000 }
    }
}

#[derive(Debug)]
pub struct QeOutcome {
    pub formula: Formula,
    pub pas: PasDecomposition,
    pub trace: Vec<String>,
}

struct Ctx<'a> {
    budget: &'a Budget,
    trace: Vec<String>,
    tracing: bool,
    fresh: u64,
}

impl Ctx<'_> {
    fn fresh_var(&mut self, prefix: &str, sort: Sort) -> Var {
        let v = Var::new(format!("${prefix}{}", self.fresh), sort);
        self.fresh += 1;
        v
    }

    fn log(&mut self, msg: impl FnOnce() -> String) {
        if self.tracing {
            self.trace.push(msg());
        }
    }
}

/// Highest numeric suffix among `$`-prefixed variable names, so fresh
/// names never collide with ones already present.
fn fresh_floor(f: &Formula) -> u64 {
    free_and_bound_vars(f)
        .iter()
        .filter_map(|v| {
            let tail: String = v.name.chars().skip_while(|c| !c.is_ascii_digit()).collect();
            if v.name.starts_with('$') {
                tail.parse::<u64>().ok().map(|n| n + 1)
            } else {
                None
            }
        })
        .max()
        .unwrap_or(0)
}

fn free_and_bound_vars(f: &Formula) -> Vec<Var> {
    let mut out: Vec<Var> = free_vars(f).into_iter().collect();
    fn walk(f: &Formula, out: &mut Vec<Var>) {
        match f {
            Formula::Not(g) => walk(g, out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                walk(a, out);
                walk(b, out);
            }
            Formula::Exists(v, b) | Formula::Forall(v, b) => {
                out.push(v.clone());
                walk(b, out);
            }
            _ => {}
        }
    }
    walk(f, &mut out);
    out
}

// ---------------------------------------------------------------------------
// atom normalization

/// Rewrites field-sort atoms through the compatibility laws (`x > 0 iff
/// ac(x) > 0`; `x = 0 iff ac(x) = 0`) and expands `res` by the case split
/// res(a) = ac(a) on v(a) = 0 and res(a) = 0 elsewhere. Afterwards field
/// terms occur only as arguments of `ac` and `v`.
pub fn normalize_atoms(f: &Formula) -> Result<Formula> {
    let f = eliminate_res(f)?;
    rewrite_field_atoms(&f)
}

fn find_res(t: &Term) -> Option<Term> {
    match t {
        Term::Res(a) => Some((**a).clone()),
        Term::Var(_) | Term::Int(..) | Term::Rat(_) | Term::Series(_) => None,
        Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) => {
            find_res(a).or_else(|| find_res(b))
        }
        Term::Neg(a) | Term::ScalarMul(_, a) | Term::Val(a) | Term::Ac(a) => find_res(a),
    }
}

fn replace_res(t: &Term, arg: &Term, with: &Term) -> Term {
    match t {
        Term::Res(a) if **a == *arg => with.clone(),
        Term::Var(_) | Term::Int(..) | Term::Rat(_) | Term::Series(_) => t.clone(),
        Term::Add(a, b) => replace_res(a, arg, with).add(replace_res(b, arg, with)),
        Term::Sub(a, b) => replace_res(a, arg, with).sub(replace_res(b, arg, with)),
        Term::Mul(a, b) => replace_res(a, arg, with).mul(replace_res(b, arg, with)),
        Term::Neg(a) => replace_res(a, arg, with).neg(),
        Term::ScalarMul(k, a) => {
            Term::ScalarMul(k.clone(), Box::new(replace_res(a, arg, with)))
        }
        Term::Val(a) => replace_res(a, arg, with).val_of(),
        Term::Ac(a) => replace_res(a, arg, with).ac_of(),
        Term::Res(a) => Term::Res(Box::new(replace_res(a, arg, with))),
    }
}

fn atom_res_arg(f: &Formula) -> Option<Term> {
    match f {
        Formula::Eq(a, b) | Formula::Lt(a, b) => find_res(a).or_else(|| find_res(b)),
        Formula::Cong { lhs, rhs, .. } => find_res(lhs).or_else(|| find_res(rhs)),
        Formula::Sq(t) => find_res(t),
        _ => None,
    }
}

fn map_atom_terms(f: &Formula, rw: &impl Fn(&Term) -> Term) -> Formula {
    match f {
        Formula::Eq(a, b) => Formula::Eq(rw(a), rw(b)),
        Formula::Lt(a, b) => Formula::Lt(rw(a), rw(b)),
        Formula::Cong { modulus, lhs, rhs } => Formula::Cong {
            modulus: modulus.clone(),
            lhs: rw(lhs),
            rhs: rw(rhs),
        },
        Formula::Sq(t) => Formula::Sq(rw(t)),
        _ => f.clone(),
    }
}

fn eliminate_res(f: &Formula) -> Result<Formula> {
    match f {
        Formula::True | Formula::False => Ok(f.clone()),
        Formula::Eq(..) | Formula::Lt(..) | Formula::Cong { .. } | Formula::Sq(_) => {
            if let Some(arg) = atom_res_arg(f) {
                let on = map_atom_terms(f, &|t| replace_res(t, &arg, &arg.clone().ac_of()));
                let off = map_atom_terms(f, &|t| {
                    replace_res(t, &arg, &Term::Rat(BigRational::zero()))
                });
                let zero = Term::Int(BigInt::zero(), Sort::Group);
                let unit = Formula::Eq(arg.clone().val_of(), zero);
                let split = Formula::or(
                    Formula::and(unit.clone(), eliminate_res(&on)?),
                    Formula::and(unit.not(), eliminate_res(&off)?),
                );
                Ok(split)
            } else {
                Ok(f.clone())
            }
        }
        Formula::Not(g) => Ok(eliminate_res(g)?.not()),
        Formula::And(a, b) => Ok(Formula::and(eliminate_res(a)?, eliminate_res(b)?)),
        Formula::Or(a, b) => Ok(Formula::or(eliminate_res(a)?, eliminate_res(b)?)),
        Formula::Implies(a, b) => {
            Ok(Formula::Implies(Box::new(eliminate_res(a)?), Box::new(eliminate_res(b)?)))
        }
        Formula::Exists(v, b) => Ok(Formula::exists(v.clone(), eliminate_res(b)?)),
        Formula::Forall(v, b) => Ok(Formula::forall(v.clone(), eliminate_res(b)?)),
    }
}

fn rewrite_field_atoms(f: &Formula) -> Result<Formula> {
    match f {
        Formula::Eq(a, b) => {
            let s = sort_of_term(a).map_err(|v| Error::SortError(v.message))?;
            if s == Sort::Field {
                let diff = a.clone().sub(b.clone());
                Ok(Formula::Eq(diff.ac_of(), Term::Rat(BigRational::zero())))
            } else {
                Ok(f.clone())
            }
        }
        Formula::Lt(a, b) => {
            let s = sort_of_term(a).map_err(|v| Error::SortError(v.message))?;
            if s == Sort::Field {
                // a < b iff ac(b − a) > 0
                let diff = b.clone().sub(a.clone());
                Ok(Formula::Lt(Term::Rat(BigRational::zero()), diff.ac_of()))
            } else {
                Ok(f.clone())
            }
        }
        Formula::Not(g) => Ok(rewrite_field_atoms(g)?.not()),
        Formula::And(a, b) => {
            Ok(Formula::and(rewrite_field_atoms(a)?, rewrite_field_atoms(b)?))
        }
        Formula::Or(a, b) => {
            Ok(Formula::or(rewrite_field_atoms(a)?, rewrite_field_atoms(b)?))
        }
        Formula::Implies(a, b) => Ok(Formula::Implies(
            Box::new(rewrite_field_atoms(a)?),
            Box::new(rewrite_field_atoms(b)?),
        )),
        Formula::Exists(v, b) => Ok(Formula::exists(v.clone(), rewrite_field_atoms(b)?)),
        Formula::Forall(v, b) => Ok(Formula::forall(v.clone(), rewrite_field_atoms(b)?)),
        _ => Ok(f.clone()),
    }
}

// ---------------------------------------------------------------------------
// symbolic (v, ac) values

/// Value of a field element as kernel-language data: its valuation as a
/// group term and its angular component as a residue quotient num/den
/// with a denominator known on-branch to be nonzero.
#[derive(Debug, Clone)]
enum AcV {
    Zero,
    Elt { val: Term, num: Term, den: Term },
}

fn r_one() -> Term {
    Term::Rat(BigRational::one())
}

fn r_zero() -> Term {
    Term::Rat(BigRational::zero())
}

fn g_zero() -> Term {
    Term::Int(BigInt::zero(), Sort::Group)
}

fn elt(val: Term, num: Term) -> AcV {
    AcV::Elt { val, num, den: r_one() }
}

fn acv_mul(a: &AcV, b: &AcV) -> AcV {
    match (a, b) {
        (AcV::Zero, _) | (_, AcV::Zero) => AcV::Zero,
        (
            AcV::Elt { val: v1, num: n1, den: d1 },
            AcV::Elt { val: v2, num: n2, den: d2 },
        ) => AcV::Elt {
            val: v1.clone().add(v2.clone()),
            num: n1.clone().mul(n2.clone()),
            den: mul_den(d1, d2),
        },
    }
}

fn mul_den(a: &Term, b: &Term) -> Term {
    if *a == r_one() {
        b.clone()
    } else if *b == r_one() {
        a.clone()
    } else {
        a.clone().mul(b.clone())
    }
}

fn acv_neg(a: &AcV) -> AcV {
    match a {
        AcV::Zero => AcV::Zero,
        AcV::Elt { val, num, den } => AcV::Elt {
            val: val.clone(),
            num: num.clone().neg(),
            den: den.clone(),
        },
    }
}

fn acv_pow(a: &AcV, k: u32) -> AcV {
    let mut acc = elt(g_zero(), r_one());
    for _ in 0..k {
        acc = acv_mul(&acc, a);
    }
    acc
}

#[derive(Debug, Clone)]
struct Cased<T> {
    guards: Vec<Formula>,
    v: T,
}

type VCases = Vec<Cased<AcV>>;

fn cases_product(parts: &[VCases], cap: usize) -> Result<Vec<Cased<Vec<AcV>>>> {
    let mut acc: Vec<Cased<Vec<AcV>>> = vec![Cased { guards: Vec::new(), v: Vec::new() }];
    for p in parts {
        let mut next = Vec::new();
        for a in &acc {
            for c in p {
                let mut guards = a.guards.clone();
                guards.extend(c.guards.iter().cloned());
                let mut v = a.v.clone();
                v.push(c.v.clone());
                next.push(Cased { guards, v });
                if next.len() > cap {
                    return Err(Error::BudgetExceeded(
                        "case-split product exceeds --max-splits".into(),
                    ));
                }
            }
        }
        acc = next;
    }
    Ok(acc)
}

/// Decides zero-ness of a parameter polynomial when it is ground and
/// exactly evaluable; None means a runtime guard is required.
fn ground_zero(q: &QPoly) -> Option<bool> {
    if q.is_zero() {
        return Some(true);
    }
    if !q.vars().is_empty() {
        return None;
    }
    let s = qpoly_eval_series(q)?;
    if s.is_exact_zero() {
        return Some(true);
    }
    match s.ac() {
        Ok(a) => Some(a.is_zero()),
        Err(_) => None,
    }
}

pub(crate) fn qpoly_eval_series(q: &QPoly) -> Option<LaurentSeries> {
    use crate::formula::PolyAtom;
    let mut total = LaurentSeries::zero();
    for (mono, c) in &q.0 {
        let mut term = LaurentSeries::from_rational(BigRational::from(c.clone()));
        for (atom, e) in &mono.0 {
            match atom {
                PolyAtom::Param(s) => {
                    for _ in 0..*e {
                        term = term.mul(s);
                    }
                }
                PolyAtom::Var(_) => return None,
            }
        }
        total = total.add(&term);
    }
    Some(total)
}

// ---------------------------------------------------------------------------
// roots

#[derive(Debug, Clone)]
enum Root {
    Zero,
    /// num/den with den nonzero on-branch
    Rat { num: QPoly, den: QPoly },
    /// (−b + eps·s)/(2a) where s² = d, v(s) = gs, ac(s) = w > 0
    Quad { eps: i8 },
}

#[derive(Debug, Clone)]
struct QuadSym {
    a: QPoly,
    b: QPoly,
    d: QPoly,
    gs: Var,
    w: Var,
}

impl QuadSym {
    fn guards(&self) -> Vec<Formula> {
        let dt = self.d.to_term();
        let gs = Term::Var(self.gs.clone());
        let w = Term::Var(self.w.clone());
        vec![
            Formula::Eq(dt.clone().val_of(), gs.clone().add(gs)),
            Formula::Eq(w.clone().mul(w.clone()), dt.ac_of()),
            Formula::Lt(r_zero(), w),
        ]
    }
}

struct RootPool {
    roots: Vec<Root>,
    quad: Option<QuadSym>,
}

impl RootPool {
    fn rat_parts(&self, i: usize) -> Option<(QPoly, QPoly)> {
        match &self.roots[i] {
            Root::Zero => Some((QPoly::zero(), QPoly::constant(BigInt::one()))),
            Root::Rat { num, den } => Some((num.clone(), den.clone())),
            Root::Quad { .. } => None,
        }
    }

    /// Cases for the element roots[i] − roots[j].
    fn diff(&self, i: usize, j: usize) -> VCases {
        match (&self.roots[i], &self.roots[j]) {
            (Root::Quad { eps: e1 }, Root::Quad { eps: e2 }) => {
                let q = self.quad.as_ref().unwrap();
                if e1 == e2 {
                    return vec![Cased { guards: vec![], v: AcV::Zero }];
                }
                // ρ₊ − ρ₋ = s/a
                let at = q.a.to_term();
                let num = Term::Var(q.w.clone());
                let num = if *e1 > *e2 { num } else { num.neg() };
                vec![Cased {
                    guards: vec![],
                    v: AcV::Elt {
                        val: Term::Var(q.gs.clone()).sub(at.clone().val_of()),
                        num,
                        den: at.ac_of(),
                    },
                }]
            }
            (Root::Quad { eps }, _) => {
                let (nr, dr) = self.rat_parts(j).unwrap();
                let q = self.quad.as_ref().unwrap();
                // ρ_eps − nr/dr = ((−b·dr − 2a·nr) + eps·s·dr) / (2a·dr)
                let p = q.b.neg().mul(&dr).sub(&q.a.scale(&BigInt::from(2)).mul(&nr));
                let big_q = dr.clone();
                let r = q.a.scale(&BigInt::from(2)).mul(&dr);
                psq_cases(&p, &big_q, *eps, q, &r)
            }
            (_, Root::Quad { .. }) => {
                self.diff(j, i).into_iter().map(|c| Cased { guards: c.guards, v: acv_neg(&c.v) }).collect()
            }
            _ => {
                let (n1, d1) = self.rat_parts(i).unwrap();
                let (n2, d2) = self.rat_parts(j).unwrap();
                let num = n1.mul(&d2).sub(&n2.mul(&d1));
                let den = d1.mul(&d2);
                ratio_cases(&num, &den)
            }
        }
    }
}

/// Cases of num/den (den nonzero on-branch).
fn ratio_cases(num: &QPoly, den: &QPoly) -> VCases {
    let dt = den.to_term();
    let make = |v: AcV| v;
    match ground_zero(num) {
        Some(true) => vec![Cased { guards: vec![], v: AcV::Zero }],
        Some(false) => {
            let nt = num.to_term();
            vec![Cased {
                guards: vec![],
                v: make(AcV::Elt {
                    val: nt.clone().val_of().sub(dt.clone().val_of()),
                    num: nt.ac_of(),
                    den: dt.ac_of(),
                }),
            }]
        }
        None => {
            let nt = num.to_term();
            let z = Formula::Eq(nt.clone().ac_of(), r_zero());
            vec![
                Cased { guards: vec![z.clone()], v: AcV::Zero },
                Cased {
                    guards: vec![z.not()],
                    v: AcV::Elt {
                        val: nt.clone().val_of().sub(dt.clone().val_of()),
                        num: nt.ac_of(),
                        den: dt.ac_of(),
                    },
                },
            ]
        }
    }
}

/// Cases of (P + eps·s·Q)/R where s² = quad.d; Q and R nonzero on-branch.
fn psq_cases(p: &QPoly, q: &QPoly, eps: i8, quad: &QuadSym, r: &QPoly) -> VCases {
    let qt = q.to_term();
    let rt = r.to_term();
    let gs = Term::Var(quad.gs.clone());
    let w = Term::Var(quad.w.clone());
    let s_val = gs.clone().add(qt.clone().val_of()); // v(s·Q)
    let s_ac = {
        let base = w.clone().mul(qt.clone().ac_of());
        if eps > 0 {
            base
        } else {
            base.neg()
        }
    };
    let mut out = Vec::new();
    let sq_branch = |extra: Vec<Formula>| Cased {
        guards: extra,
        v: AcV::Elt {
            val: s_val.clone().sub(rt.clone().val_of()),
            num: s_ac.clone(),
            den: rt.clone().ac_of(),
        },
    };
    match ground_zero(p) {
        Some(true) => {
            out.push(sq_branch(vec![]));
            return out;
        }
        Some(false) => {}
        None => {
            let z = Formula::Eq(p.to_term().ac_of(), r_zero());
            out.push(sq_branch(vec![z.clone()]));
            out.extend(psq_nonzero_cases(p, q, eps, quad, r, vec![z.not()]));
            return out;
        }
    }
    out.extend(psq_nonzero_cases(p, q, eps, quad, r, vec![]));
    out
}

fn psq_nonzero_cases(
    p: &QPoly,
    q: &QPoly,
    eps: i8,
    quad: &QuadSym,
    r: &QPoly,
    base_guards: Vec<Formula>,
) -> VCases {
    let pt = p.to_term();
    let qt = q.to_term();
    let rt = r.to_term();
    let gs = Term::Var(quad.gs.clone());
    let w = Term::Var(quad.w.clone());
    let vp = pt.clone().val_of();
    let vsq = gs.clone().add(qt.clone().val_of());
    let acp = pt.clone().ac_of();
    let s_ac = {
        let base = w.clone().mul(qt.clone().ac_of());
        if eps > 0 {
            base
        } else {
            base.neg()
        }
    };
    let sum_ac = acp.clone().add(s_ac.clone());
    let mut out = Vec::new();
    let with = |mut extra: Vec<Formula>, base: &[Formula], v: AcV| {
        let mut g = base.to_vec();
        g.append(&mut extra);
        Cased { guards: g, v }
    };
    // v(P) < v(sQ): P dominates
    out.push(with(
        vec![Formula::Lt(vp.clone(), vsq.clone())],
        &base_guards,
        AcV::Elt {
            val: vp.clone().sub(rt.clone().val_of()),
            num: acp.clone(),
            den: rt.clone().ac_of(),
        },
    ));
    // v(P) > v(sQ): sQ dominates
    out.push(with(
        vec![Formula::Lt(vsq.clone(), vp.clone())],
        &base_guards,
        AcV::Elt {
            val: vsq.clone().sub(rt.clone().val_of()),
            num: s_ac.clone(),
            den: rt.clone().ac_of(),
        },
    ));
    // equal valuations, no residue cancellation
    out.push(with(
        vec![
            Formula::Eq(vp.clone(), vsq.clone()),
            Formula::Eq(sum_ac.clone(), r_zero()).not(),
        ],
        &base_guards,
        AcV::Elt {
            val: vp.clone().sub(rt.clone().val_of()),
            num: sum_ac.clone(),
            den: rt.clone().ac_of(),
        },
    ));
    // cancellation: recover through the conjugate, (P+sQ)(P−sQ) = P²−DQ²
    let e = p.mul(p).sub(&quad.d.mul(&q.mul(q)));
    let cancel_guards = vec![
        Formula::Eq(vp.clone(), vsq.clone()),
        Formula::Eq(sum_ac.clone(), r_zero()),
    ];
    match ground_zero(&e) {
        Some(true) => {
            out.push(with(cancel_guards, &base_guards, AcV::Zero));
        }
        known => {
            let et = e.to_term();
            let deep = AcV::Elt {
                val: et.clone().val_of().sub(vp.clone()).sub(rt.clone().val_of()),
                num: et.clone().ac_of(),
                den: Term::Rat(BigRational::from(BigInt::from(2)))
                    .mul(acp.clone())
                    .mul(rt.clone().ac_of()),
            };
            if known == Some(false) {
                out.push(with(cancel_guards, &base_guards, deep));
            } else {
                let z = Formula::Eq(et.clone().ac_of(), r_zero());
                let mut g1 = cancel_guards.clone();
                g1.push(z.clone());
                out.push(with(g1, &base_guards, AcV::Zero));
                let mut g2 = cancel_guards;
                g2.push(z.not());
                out.push(with(g2, &base_guards, deep));
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// polynomial shapes

#[derive(Debug, Clone)]
enum AltKind {
    Const(QPoly),
    /// lead·(x − num/den)^mult with lead nonzero on-branch
    Factored { lead: QPoly, num: QPoly, den: QPoly, mult: u32 },
    /// a·x² + b·x + c with square discriminant: roots (−b ± √d)/(2a)
    QuadSplit { a: QPoly, b: QPoly, d: QPoly },
    /// a·x² + b·x + c with nonzero non-square discriminant
    QuadAniso { a: QPoly, b: QPoly, d: QPoly },
}

#[derive(Debug, Clone)]
struct Alt {
    guards: Vec<Formula>,
    kind: AltKind,
}

fn nonzero_guard(q: &QPoly) -> Option<Vec<Formula>> {
    match ground_zero(q) {
        Some(false) => Some(vec![]),
        Some(true) => None, // unattainable
        None => Some(vec![Formula::Eq(q.to_term().ac_of(), r_zero()).not()]),
    }
}

fn zero_guard(q: &QPoly) -> Option<Vec<Formula>> {
    match ground_zero(q) {
        Some(true) => Some(vec![]),
        Some(false) => None,
        None => Some(vec![Formula::Eq(q.to_term().ac_of(), r_zero())]),
    }
}

/// "d is a nonzero square of the field": v(d) even and ac(d) a square of
/// the residue field (Hensel, residue characteristic 0).
fn square_formula(d: &QPoly, ctx: &mut Ctx) -> Formula {
    let h = ctx.fresh_var("h", Sort::Group);
    let dt = d.to_term();
    let even = Formula::exists(
        h.clone(),
        Formula::Eq(dt.clone().val_of(), Term::Var(h.clone()).add(Term::Var(h))),
    );
    Formula::and(even, Formula::Sq(dt.ac_of()))
}

fn shape_alternatives(coeffs: &[QPoly], ctx: &mut Ctx) -> Result<Vec<Alt>> {
    // coeffs[i] = coefficient of x^i
    let deg = coeffs.len() - 1;
    let mut alts = Vec::new();
    match deg {
        1 => {
            let a = &coeffs[1];
            let b = &coeffs[0];
            if let Some(g) = nonzero_guard(a) {
                alts.push(Alt {
                    guards: g,
                    kind: AltKind::Factored {
                        lead: a.clone(),
                        num: b.neg(),
                        den: a.clone(),
                        mult: 1,
                    },
                });
            }
            if let Some(g) = zero_guard(a) {
                alts.push(Alt { guards: g, kind: AltKind::Const(b.clone()) });
            }
        }
        2 => {
            let a = &coeffs[2];
            let b = &coeffs[1];
            let c = &coeffs[0];
            if let Some(ga) = nonzero_guard(a) {
                let d = b.mul(b).sub(&a.mul(c).scale(&BigInt::from(4)));
                // d = 0: double rational root −b/(2a)
                if let Some(mut g) = zero_guard(&d) {
                    let mut guards = ga.clone();
                    guards.append(&mut g);
                    alts.push(Alt {
                        guards,
                        kind: AltKind::Factored {
                            lead: a.clone(),
                            num: b.neg(),
                            den: a.scale(&BigInt::from(2)),
                            mult: 2,
                        },
                    });
                }
                if let Some(gnz) = nonzero_guard(&d) {
                    let sq = square_formula(&d, ctx);
                    // d a square: two simple roots
                    let mut guards = ga.clone();
                    guards.extend(gnz.iter().cloned());
                    guards.push(sq.clone());
                    alts.push(Alt {
                        guards,
                        kind: AltKind::QuadSplit { a: a.clone(), b: b.clone(), d: d.clone() },
                    });
                    // d not a square: anisotropic, no roots
                    let mut guards = ga.clone();
                    guards.extend(gnz);
                    guards.push(sq.not());
                    alts.push(Alt {
                        guards,
                        kind: AltKind::QuadAniso { a: a.clone(), b: b.clone(), d },
                    });
                }
            }
            if let Some(gz) = zero_guard(a) {
                // degenerate to the linear shape
                let sub = shape_alternatives(&coeffs[..2], ctx)?;
                for mut alt in sub {
                    let mut guards = gz.clone();
                    guards.append(&mut alt.guards);
                    alts.push(Alt { guards, kind: alt.kind });
                }
            }
        }
        _ => {
            return Err(Error::DegreeUnsupported(format!(
                "x-degree {deg} exceeds the supported maximum of 2"
            )))
        }
    }
    Ok(alts)
}

// ---------------------------------------------------------------------------
// eliminate_one

pub(crate) fn collect_x_polys(f: &Formula, x: &str, out: &mut Vec<QPoly>) -> Result<()> {
    fn walk_term(t: &Term, x: &str, out: &mut Vec<QPoly>) -> Result<()> {
        match t {
            Term::Ac(a) | Term::Val(a) => {
                let q = QPoly::from_term(a).ok_or_else(|| {
                    Error::EvalError(format!("non-polynomial field argument {a:?}"))
                })?;
                if q.degree_in(x) >= 1 && !out.contains(&q) {
                    out.push(q);
                }
                Ok(())
            }
            Term::Var(v) if v.name == x => Err(Error::EvalError(
                "field variable occurs outside ac/v after normalization".into(),
            )),
            Term::Var(_) | Term::Int(..) | Term::Rat(_) | Term::Series(_) => Ok(()),
            Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) => {
                walk_term(a, x, out)?;
                walk_term(b, x, out)
            }
            Term::Neg(a) | Term::ScalarMul(_, a) => walk_term(a, x, out),
            Term::Res(_) => Err(Error::EvalError(
                "res survived normalization".into(),
            )),
        }
    }
    match f {
        Formula::True | Formula::False => Ok(()),
        Formula::Eq(a, b) | Formula::Lt(a, b) => {
            walk_term(a, x, out)?;
            walk_term(b, x, out)
        }
        Formula::Cong { lhs, rhs, .. } => {
            walk_term(lhs, x, out)?;
            walk_term(rhs, x, out)
        }
        Formula::Sq(t) => walk_term(t, x, out),
        Formula::Not(g) => collect_x_polys(g, x, out),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            collect_x_polys(a, x, out)?;
            collect_x_polys(b, x, out)
        }
        Formula::Exists(_, b) | Formula::Forall(_, b) => collect_x_polys(b, x, out),
    }
}

/// Rewrites every ac(q(x)) and v(q(x)) according to the substitution
/// table (matched by polynomial normal form).
fn rewrite_with_table(f: &Formula, x: &str, table: &[(QPoly, Term, Term)]) -> Formula {
    fn rw_term(t: &Term, x: &str, table: &[(QPoly, Term, Term)]) -> Term {
        match t {
            Term::Ac(a) | Term::Val(a) => {
                if let Some(q) = QPoly::from_term(a) {
                    if q.degree_in(x) >= 1 {
                        for (p, val, ac) in table {
                            if *p == q {
                                return match t {
                                    Term::Val(_) => val.clone(),
                                    _ => ac.clone(),
                                };
                            }
                        }
                    }
                }
                t.clone()
            }
            Term::Var(_) | Term::Int(..) | Term::Rat(_) | Term::Series(_) => t.clone(),
            Term::Add(a, b) => rw_term(a, x, table).add(rw_term(b, x, table)),
            Term::Sub(a, b) => rw_term(a, x, table).sub(rw_term(b, x, table)),
            Term::Mul(a, b) => rw_term(a, x, table).mul(rw_term(b, x, table)),
            Term::Neg(a) => rw_term(a, x, table).neg(),
            Term::ScalarMul(k, a) => {
                Term::ScalarMul(k.clone(), Box::new(rw_term(a, x, table)))
            }
            Term::Res(a) => Term::Res(Box::new(rw_term(a, x, table))),
        }
    }
    crate::formula::map_terms(f, &|t| rw_term(t, x, table))
}

#[derive(Debug, Clone)]
enum Plan {
    Const(QPoly),
    Factored { lead: QPoly, factors: Vec<(usize, u32)> },
    Aniso { a: QPoly, d: QPoly, rho0: usize },
}

/// Aniso value from the shifted-variable profile y = x − (−b/2a):
/// q = a·(y² − d/4a²).
fn aniso_cases(a: &QPoly, d: &QPoly, y: &AcV) -> VCases {
    let at = a.to_term();
    let dt = d.to_term();
    let va = at.clone().val_of();
    let vd = dt.clone().val_of();
    let aca = at.clone().ac_of();
    let acd = dt.clone().ac_of();
    let four = Term::Rat(BigRational::from(BigInt::from(4)));
    // value when the discriminant part dominates (also the y = 0 value):
    // −d/(4a)
    let dom = AcV::Elt {
        val: vd.clone().sub(va.clone()),
        num: acd.clone().neg(),
        den: four.clone().mul(aca.clone()),
    };
    match y {
        AcV::Zero => vec![Cased { guards: vec![], v: dom }],
        AcV::Elt { val: vy, num: ny, den: dy } => {
            let two_vy = Term::ScalarMul(BigInt::from(2), Box::new(vy.clone()));
            let vdd = vd.clone().sub(Term::ScalarMul(
                BigInt::from(2),
                Box::new(va.clone()),
            )); // v(d/4a²)
            let mut out = Vec::new();
            // y² dominates
            out.push(Cased {
                guards: vec![Formula::Lt(two_vy.clone(), vdd.clone())],
                v: AcV::Elt {
                    val: va.clone().add(two_vy.clone()),
                    num: aca.clone().mul(ny.clone().mul(ny.clone())),
                    den: mul_den(dy, dy),
                },
            });
            // discriminant dominates
            out.push(Cased {
                guards: vec![Formula::Lt(vdd.clone(), two_vy.clone())],
                v: dom,
            });
            // equal valuations: ac(q) = ac(a)·ac(y)² − ac(d)/(4·ac(a));
            // nonzero because d is not a square on this branch
            out.push(Cased {
                guards: vec![Formula::Eq(two_vy.clone(), vdd)],
                v: AcV::Elt {
                    val: va.clone().add(two_vy),
                    num: four
                        .clone()
                        .mul(aca.clone())
                        .mul(aca.clone())
                        .mul(ny.clone().mul(ny.clone()))
                        .sub(acd.clone().mul(mul_den(dy, dy))),
                    den: four.mul(aca).mul(mul_den(dy, dy)),
                },
            });
            out
        }
    }
}

/// Eliminates `∃x` over a field-sort variable from a quantifier-free (in
/// x) matrix. The matrix is normalized first, so raw atoms like
/// `a·x + b = 0` are accepted.
pub fn eliminate_one(x: &Var, matrix: &Formula, budget: &Budget) -> Result<Formula> {
    let mut ctx = Ctx {
        budget,
        trace: Vec::new(),
        tracing: false,
        fresh: fresh_floor(matrix),
    };
    let m = normalize_atoms(matrix)?;
    eliminate_one_inner(x, &m, &mut ctx)
}

fn eliminate_one_inner(x: &Var, matrix: &Formula, ctx: &mut Ctx) -> Result<Formula> {
    if x.sort != Sort::Field {
        return Err(Error::SortError(format!(
            "eliminate_one expects a field variable, got {}:{}",
            x.name, x.sort
        )));
    }
    if !free_vars(matrix).contains(x) {
        return Ok(matrix.clone());
    }
    let mut polys = Vec::new();
    collect_x_polys(matrix, &x.name, &mut polys)?;
    for q in &polys {
        let d = q.degree_in(&x.name);
        if d > ctx.budget.max_degree.min(2) {
            return Err(Error::DegreeUnsupported(format!(
                "polynomial of x-degree {d} under ac/v (budget max-degree {})",
                ctx.budget.max_degree
            )));
        }
    }
    // coupled quadratics would need cross-radical root comparisons
    let quad_count = polys.iter().filter(|q| q.degree_in(&x.name) == 2).count();
    if quad_count >= 2 {
        return Err(Error::DegreeUnsupported(
            "two distinct quadratic polynomials of the bound variable (coupled radicals)"
                .into(),
        ));
    }
    ctx.log(|| format!("eliminate {}: {} polynomials", x.name, polys.len()));

    // shape alternatives per polynomial
    let mut all_alts = Vec::new();
    for q in &polys {
        let coeffs = q.coeffs_in(&x.name);
        all_alts.push(shape_alternatives(&coeffs, ctx)?);
    }
    // cartesian product of shape choices
    let mut combos: Vec<Vec<usize>> = vec![vec![]];
    for alts in &all_alts {
        let mut next = Vec::new();
        for c in &combos {
            for i in 0..alts.len() {
                let mut c2 = c.clone();
                c2.push(i);
                next.push(c2);
            }
        }
        combos = next;
        if combos.len() > ctx.budget.max_splits {
            return Err(Error::BudgetExceeded("shape-split product too large".into()));
        }
    }

    let mut branches = Vec::new();
    for combo in &combos {
        let disjunct = assemble_combo(x, matrix, &polys, &all_alts, combo, ctx)?;
        branches.push(disjunct);
        if branches.len() > ctx.budget.max_splits {
            return Err(Error::BudgetExceeded("branch count exceeds --max-splits".into()));
        }
    }
    Ok(Formula::big_or(branches))
}

fn assemble_combo(
    x: &Var,
    matrix: &Formula,
    polys: &[QPoly],
    all_alts: &[Vec<Alt>],
    combo: &[usize],
    ctx: &mut Ctx,
) -> Result<Formula> {
    let mut shape_guards: Vec<Formula> = Vec::new();
    let mut pool = RootPool { roots: vec![Root::Zero], quad: None };
    let mut quad_vars: Vec<Var> = Vec::new();
    let mut plans: Vec<Plan> = Vec::new();
    for (pi, &ai) in combo.iter().enumerate() {
        let alt = &all_alts[pi][ai];
        shape_guards.extend(alt.guards.iter().cloned());
        match &alt.kind {
            AltKind::Const(c) => plans.push(Plan::Const(c.clone())),
            AltKind::Factored { lead, num, den, mult } => {
                let idx = pool.roots.len();
                pool.roots.push(Root::Rat { num: num.clone(), den: den.clone() });
                plans.push(Plan::Factored { lead: lead.clone(), factors: vec![(idx, *mult)] });
            }
            AltKind::QuadSplit { a, b, d } => {
                let gs = ctx.fresh_var("g", Sort::Group);
                let w = ctx.fresh_var("w", Sort::Residue);
                let sym = QuadSym { a: a.clone(), b: b.clone(), d: d.clone(), gs: gs.clone(), w: w.clone() };
                shape_guards.extend(sym.guards());
                quad_vars.push(gs);
                quad_vars.push(w);
                let i1 = pool.roots.len();
                pool.roots.push(Root::Quad { eps: 1 });
                pool.roots.push(Root::Quad { eps: -1 });
                pool.quad = Some(sym);
                plans.push(Plan::Factored {
                    lead: a.clone(),
                    factors: vec![(i1, 1), (i1 + 1, 1)],
                });
            }
            AltKind::QuadAniso { a, b, d } => {
                let idx = pool.roots.len();
                pool.roots.push(Root::Rat {
                    num: b.neg(),
                    den: a.scale(&BigInt::from(2)),
                });
                plans.push(Plan::Aniso { a: a.clone(), d: d.clone(), rho0: idx });
            }
        }
    }

    // if no plan actually involves x (all Const), x is inert
    let any_x = plans.iter().any(|p| !matches!(p, Plan::Const(_)));
    if !any_x {
        let table = const_table(polys, &plans);
        let body = rewrite_with_table(matrix, &x.name, &table);
        return Ok(Formula::big_and(
            shape_guards.into_iter().chain(std::iter::once(body)),
        ));
    }

    let mut position_branches = Vec::new();
    for j in 0..pool.roots.len() {
        // branch: x equals root j
        position_branches.push(position_branch(
            x, matrix, polys, &plans, &pool, j, None, ctx,
        )?);
        // branch: x nearest to root j at fresh distance δ with residue η
        let delta = ctx.fresh_var("d", Sort::Group);
        let eta = ctx.fresh_var("e", Sort::Residue);
        position_branches.push(position_branch(
            x, matrix, polys, &plans, &pool, j, Some((delta, eta)), ctx,
        )?);
    }
    let inner = Formula::big_or(position_branches);
    let mut wrapped = Formula::big_and(shape_guards.into_iter().chain(std::iter::once(inner)));
    for v in quad_vars.into_iter().rev() {
        wrapped = Formula::exists(v, wrapped);
    }
    Ok(wrapped)
}

fn const_table(polys: &[QPoly], plans: &[Plan]) -> Vec<(QPoly, Term, Term)> {
    polys
        .iter()
        .zip(plans)
        .map(|(q, p)| match p {
            Plan::Const(c) => {
                let t = c.to_term();
                (q.clone(), t.clone().val_of(), t.ac_of())
            }
            _ => unreachable!(),
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn position_branch(
    x: &Var,
    matrix: &Formula,
    polys: &[QPoly],
    plans: &[Plan],
    pool: &RootPool,
    j: usize,
    near: Option<(Var, Var)>,
    ctx: &mut Ctx,
) -> Result<Formula> {
    // factor-value cases for (x − root_i), for every root index
    let mut factor_cases: Vec<VCases> = Vec::new();
    for i in 0..pool.roots.len() {
        let cases = match &near {
            None => {
                if i == j {
                    vec![Cased { guards: vec![], v: AcV::Zero }]
                } else {
                    // x − r_i = r_j − r_i
                    pool.diff(j, i)
                }
            }
            Some((delta, eta)) => {
                let dv = Term::Var(delta.clone());
                let ev = Term::Var(eta.clone());
                let w_elt = AcV::Elt { val: dv.clone(), num: ev.clone(), den: r_one() };
                if i == j {
                    vec![Cased { guards: vec![], v: w_elt }]
                } else {
                    // x − r_i = w + (r_j − r_i), v(w) = δ
                    let mut out = Vec::new();
                    for c in pool.diff(j, i) {
                        match &c.v {
                            AcV::Zero => {
                                out.push(Cased { guards: c.guards, v: w_elt.clone() });
                            }
                            AcV::Elt { val: vv, num: nn, den: dd } => {
                                // δ < v(r_j − r_i): w dominates
                                let mut g1 = c.guards.clone();
                                g1.push(Formula::Lt(dv.clone(), vv.clone()));
                                out.push(Cased { guards: g1, v: w_elt.clone() });
                                // δ > v(r_j − r_i): the gap dominates
                                let mut g2 = c.guards.clone();
                                g2.push(Formula::Lt(vv.clone(), dv.clone()));
                                out.push(Cased { guards: g2, v: c.v.clone() });
                                // tie without cancellation (the cancelling
                                // case belongs to a branch nearer r_i)
                                let tie_num =
                                    ev.clone().mul(dd.clone()).add(nn.clone());
                                let mut g3 = c.guards.clone();
                                g3.push(Formula::Eq(dv.clone(), vv.clone()));
                                g3.push(Formula::Eq(tie_num.clone(), r_zero()).not());
                                out.push(Cased {
                                    guards: g3,
                                    v: AcV::Elt {
                                        val: dv.clone(),
                                        num: tie_num,
                                        den: dd.clone(),
                                    },
                                });
                            }
                        }
                    }
                    out
                }
            }
        };
        factor_cases.push(cases);
    }
    // per-poly value cases out of factor data
    let mut poly_cases: Vec<VCases> = Vec::new();
    for plan in plans {
        poly_cases.push(match plan {
            Plan::Const(c) => {
                let t = c.to_term();
                vec![Cased { guards: vec![], v: elt(t.clone().val_of(), t.ac_of()) }]
            }
            Plan::Factored { lead, factors } => {
                let lt = lead.to_term();
                let lead_elt = elt(lt.clone().val_of(), lt.ac_of());
                let mut cases = vec![Cased { guards: vec![], v: lead_elt }];
                for (idx, mult) in factors {
                    let mut next = Vec::new();
                    for base in &cases {
                        for fc in &factor_cases[*idx] {
                            let mut guards = base.guards.clone();
                            guards.extend(fc.guards.iter().cloned());
                            next.push(Cased {
                                guards,
                                v: acv_mul(&base.v, &acv_pow(&fc.v, *mult)),
                            });
                        }
                    }
                    cases = next;
                }
                cases
            }
            Plan::Aniso { a, d, rho0 } => {
                let mut out = Vec::new();
                for yc in &factor_cases[*rho0] {
                    for qc in aniso_cases(a, d, &yc.v) {
                        let mut guards = yc.guards.clone();
                        guards.extend(qc.guards.iter().cloned());
                        out.push(Cased { guards, v: qc.v });
                    }
                }
                out
            }
        });
    }
    let combos = cases_product(&poly_cases, ctx.budget.max_splits)?;
    let mut disjuncts = Vec::new();
    for combo in combos {
        let mut guards = combo.guards.clone();
        let mut pins: Vec<Formula> = Vec::new();
        let mut pin_vars: Vec<Var> = Vec::new();
        let mut table: Vec<(QPoly, Term, Term)> = Vec::new();
        for (q, v) in polys.iter().zip(&combo.v) {
            let (val_t, ac_t) = match v {
                AcV::Zero => (g_zero(), r_zero()),
                AcV::Elt { val, num, den } => {
                    if *den == r_one() {
                        (val.clone(), num.clone())
                    } else {
                        let u = ctx.fresh_var("u", Sort::Residue);
                        pins.push(Formula::Eq(
                            Term::Var(u.clone()).mul(den.clone()),
                            num.clone(),
                        ));
                        pin_vars.push(u.clone());
                        (val.clone(), Term::Var(u))
                    }
                }
            };
            table.push((q.clone(), val_t, ac_t));
        }
        let body = rewrite_with_table(matrix, &x.name, &table);
        let mut parts = guards.drain(..).collect::<Vec<_>>();
        if let Some((_, eta)) = &near {
            parts.push(Formula::Eq(Term::Var(eta.clone()), r_zero()).not());
        }
        parts.extend(pins);
        parts.push(body);
        let mut d = Formula::big_and(parts);
        for u in pin_vars.into_iter().rev() {
            d = Formula::exists(u, d);
        }
        if let Some((delta, eta)) = &near {
            d = Formula::exists(eta.clone(), d);
            d = Formula::exists(delta.clone(), d);
        }
        disjuncts.push(d);
    }
    Ok(Formula::big_or(disjuncts))
}

// ---------------------------------------------------------------------------
// split_sums: the monomial order-type analysis as a standalone operation

#[derive(Debug, Clone)]
pub enum SplitOutcome {
    /// the polynomial value is 0 on this guard
    Zero,
    /// v and ac expressed in the given group/residue terms
    Determined { val: Term, ac: Term },
    /// leading residues cancel; v(p) is strictly below the monomial
    /// minimum and needs henselian refinement
    Cancellation,
}

#[derive(Debug, Clone)]
pub struct SplitCase {
    pub guard: Formula,
    pub outcome: SplitOutcome,
}

/// Enumerates guards fixing the order type of {v(c_i) + i·v(x)} for
/// p(x) = Σ c_i x^i, expressing v(p) and ac(p) through v(x) = delta and
/// ac(x) = eta on each non-cancelling guard. Guards are mutually
/// exclusive and exhaustive.
pub fn split_sums(p: &QPoly, x: &str, delta: &Var, eta: &Var) -> Result<Vec<SplitCase>> {
    if delta.sort != Sort::Group || eta.sort != Sort::Residue {
        return Err(Error::SortError("split_sums expects (group, residue) profile vars".into()));
    }
    let coeffs = p.coeffs_in(x);
    let idx: Vec<usize> = (0..coeffs.len()).filter(|&i| !coeffs[i].is_zero()).collect();
    if idx.is_empty() {
        return Ok(vec![SplitCase { guard: Formula::True, outcome: SplitOutcome::Zero }]);
    }
    let dv = Term::Var(delta.clone());
    let ev = Term::Var(eta.clone());
    let mono_val = |i: usize| -> Term {
        let cv = coeffs[i].to_term().val_of();
        if i == 0 {
            cv
        } else {
            cv.add(Term::ScalarMul(BigInt::from(i), Box::new(dv.clone())))
        }
    };
    let mono_ac = |i: usize| -> Term {
        let ca = coeffs[i].to_term().ac_of();
        let mut t = ca;
        for _ in 0..i {
            t = t.mul(ev.clone());
        }
        t
    };
    let mut out = Vec::new();
    // zero-pattern of the coefficients, then the argmin set
    let n = idx.len();
    for zmask in 0..(1usize << n) {
        let mut zguards = Vec::new();
        let mut live = Vec::new();
        for (k, &i) in idx.iter().enumerate() {
            let zatom = Formula::Eq(coeffs[i].to_term().ac_of(), r_zero());
            if zmask & (1 << k) != 0 {
                zguards.push(zatom);
            } else {
                zguards.push(zatom.not());
                live.push(i);
            }
        }
        if live.is_empty() {
            out.push(SplitCase {
                guard: Formula::big_and(zguards),
                outcome: SplitOutcome::Zero,
            });
            continue;
        }
        for smask in 1..(1usize << live.len()) {
            let argmin: Vec<usize> = live
                .iter()
                .enumerate()
                .filter(|(k, _)| smask & (1 << k) != 0)
                .map(|(_, &i)| i)
                .collect();
            let m0 = argmin[0];
            let mut guards = zguards.clone();
            for &i in &argmin[1..] {
                guards.push(Formula::Eq(mono_val(m0), mono_val(i)));
            }
            for &i in &live {
                if !argmin.contains(&i) {
                    guards.push(Formula::Lt(mono_val(m0), mono_val(i)));
                }
            }
            let ac_sum = argmin
                .iter()
                .map(|&i| mono_ac(i))
                .reduce(|a, b| a.add(b))
                .unwrap();
            if argmin.len() == 1 {
                out.push(SplitCase {
                    guard: Formula::big_and(guards),
                    outcome: SplitOutcome::Determined { val: mono_val(m0), ac: ac_sum },
                });
            } else {
                let cancel = Formula::Eq(ac_sum.clone(), r_zero());
                let mut g1 = guards.clone();
                g1.push(cancel.clone().not());
                out.push(SplitCase {
                    guard: Formula::big_and(g1),
                    outcome: SplitOutcome::Determined { val: mono_val(m0), ac: ac_sum },
                });
                let mut g2 = guards;
                g2.push(cancel);
                out.push(SplitCase {
                    guard: Formula::big_and(g2),
                    outcome: SplitOutcome::Cancellation,
                });
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Pas normal form canonicalization

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Purity {
    Neutral,
    R,
    S,
    Mixed,
}

fn join(a: Purity, b: Purity) -> Purity {
    match (a, b) {
        (Purity::Neutral, x) | (x, Purity::Neutral) => x,
        (x, y) if x == y => x,
        _ => Purity::Mixed,
    }
}

fn purity(f: &Formula) -> Result<Purity> {
    match f {
        Formula::True | Formula::False => Ok(Purity::Neutral),
        Formula::Eq(a, _) | Formula::Lt(a, _) => {
            match sort_of_term(a).map_err(|v| Error::SortError(v.message))? {
                Sort::Residue => Ok(Purity::R),
                Sort::Group => Ok(Purity::S),
                Sort::Field => Err(Error::CanonicalizationFailed(
                    "field-sort atom survives normalization".into(),
                )),
            }
        }
        Formula::Sq(_) => Ok(Purity::R),
        Formula::Cong { .. } => Ok(Purity::S),
        Formula::Not(g) => purity(g),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            Ok(join(purity(a)?, purity(b)?))
        }
        Formula::Exists(v, b) | Formula::Forall(v, b) => {
            let bind = match v.sort {
                Sort::Residue => Purity::R,
                Sort::Group => Purity::S,
                Sort::Field => {
                    return Err(Error::CanonicalizationFailed(
                        "field quantifier survives elimination".into(),
                    ))
                }
            };
            Ok(join(bind, purity(b)?))
        }
    }
}

type UnitDnf = Vec<Vec<Formula>>;

fn dnf_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        Err(Error::BudgetExceeded("normal-form distribution too large".into()))
    } else {
        Ok(())
    }
}

/// DNF (positive) / CNF (negative) with sort-pure subformulas as opaque
/// units; quantifiers over residue/group variables are miniscoped.
fn unit_nf(f: &Formula, positive: bool, cap: usize) -> Result<UnitDnf> {
    if purity(f)? != Purity::Mixed {
        let unit = if positive { f.clone() } else { f.clone().not() };
        return Ok(vec![vec![unit]]);
    }
    let merge_or = |mut a: UnitDnf, b: UnitDnf| -> Result<UnitDnf> {
        a.extend(b);
        dnf_cap(a.len(), cap)?;
        Ok(a)
    };
    let merge_and = |a: UnitDnf, b: UnitDnf| -> Result<UnitDnf> {
        let mut out = Vec::new();
        for x in &a {
            for y in &b {
                let mut c = x.clone();
                c.extend(y.iter().cloned());
                out.push(c);
                dnf_cap(out.len(), cap)?;
            }
        }
        Ok(out)
    };
    match f {
        Formula::Not(g) => unit_nf(g, !positive, cap),
        Formula::And(a, b) => {
            let da = unit_nf(a, positive, cap)?;
            let db = unit_nf(b, positive, cap)?;
            if positive {
                merge_and(da, db)
            } else {
                merge_or(da, db)
            }
        }
        Formula::Or(a, b) => {
            let da = unit_nf(a, positive, cap)?;
            let db = unit_nf(b, positive, cap)?;
            if positive {
                merge_or(da, db)
            } else {
                merge_and(da, db)
            }
        }
        Formula::Implies(a, b) => {
            let da = unit_nf(a, !positive, cap)?;
            let db = unit_nf(b, positive, cap)?;
            if positive {
                merge_or(da, db)
            } else {
                merge_and(da, db)
            }
        }
        Formula::Exists(v, body) => {
            if positive {
                // ∃ distributes over the DNF; v-free conjuncts move out
                let d = unit_nf(body, true, cap)?;
                let mut out = Vec::new();
                for conj in d {
                    let (with_v, rest): (Vec<Formula>, Vec<Formula>) = conj
                        .into_iter()
                        .partition(|u| free_vars(u).contains(v));
                    let mut c = rest;
                    if !with_v.is_empty() {
                        c.push(Formula::exists(v.clone(), Formula::big_and(with_v)));
                    }
                    out.push(c);
                }
                Ok(out)
            } else {
                // ¬∃v φ = ∀v ¬φ: CNF of ¬φ, ∀ into each clause
                let cnf = unit_nf(body, false, cap)?;
                let mut clauses = Vec::new();
                for clause in cnf {
                    let (with_v, rest): (Vec<Formula>, Vec<Formula>) = clause
                        .into_iter()
                        .partition(|u| free_vars(u).contains(v));
                    let mut c = rest;
                    if !with_v.is_empty() {
                        c.push(Formula::forall(
                            v.clone(),
                            Formula::big_or(with_v),
                        ));
                    }
                    clauses.push(c);
                }
                Ok(clauses)
            }
        }
        Formula::Forall(v, body) => {
            // ∀v φ = ¬∃v ¬φ
            let inner = Formula::exists(v.clone(), body.clone().not());
            unit_nf(&inner, !positive, cap)
        }
        _ => unreachable!("atoms are never Mixed"),
    }
}

/// Canonicalizes a field-quantifier-free formula into the shape
/// ⋁ (ψ_i ∧ θ_i) with ψ residue-sorted and θ group-sorted.
pub fn to_pas_normal_form(f: &Formula, budget: &Budget) -> Result<Formula> {
    if crate::formula::has_field_quantifier(f) {
        return Err(Error::CanonicalizationFailed(
            "field quantifier present; eliminate first".into(),
        ));
    }
    let dnf = unit_nf(f, true, budget.max_splits)?;
    let mut disjuncts = Vec::new();
    for conj in dnf {
        let mut psi = Vec::new();
        let mut theta = Vec::new();
        for u in conj {
            match purity(&u)? {
                Purity::R | Purity::Neutral => psi.push(u),
                Purity::S => theta.push(u),
                Purity::Mixed => {
                    return Err(Error::CanonicalizationFailed(
                        "irreducibly mixed unit".into(),
                    ))
                }
            }
        }
        disjuncts.push(Formula::and(Formula::big_and(psi), Formula::big_and(theta)));
    }
    Ok(simplify(&Formula::big_or(disjuncts)))
}

// ---------------------------------------------------------------------------
// ground-atom simplification

/// Folds atoms whose terms are closed residue/group constants and
/// re-applies the connective smart constructors.
pub fn simplify(f: &Formula) -> Formula {
    match f {
        Formula::Eq(..) | Formula::Lt(..) => {
            let folded = map_atom_terms(f, &fold_ground_term);
            let (a, b, lt) = match &folded {
                Formula::Eq(a, b) => (a, b, false),
                Formula::Lt(a, b) => (a, b, true),
                _ => unreachable!(),
            };
            if let Ok(Sort::Residue) = sort_of_term(a) {
                if let (Ok(pa), Ok(pb)) = (RPoly::from_term(a), RPoly::from_term(b)) {
                    if let Some(c) = pa.sub(&pb).as_constant() {
                        return truth(if lt { c.is_negative() } else { c.is_zero() });
                    }
                }
            }
            if let Ok(Sort::Group) = sort_of_term(a) {
                if let (Ok(ga), Ok(gb)) = (GTerm::from_term(a), GTerm::from_term(b)) {
                    let d = ga.sub(&gb);
                    if d.is_ground() {
                        return truth(if lt {
                            d.konst.is_negative()
                        } else {
                            d.konst.is_zero()
                        });
                    }
                }
            }
            folded
        }
        Formula::Cong { .. } | Formula::Sq(_) => map_atom_terms(f, &fold_ground_term),
        Formula::Not(g) => match simplify(g) {
            Formula::True => Formula::False,
            Formula::False => Formula::True,
            Formula::Not(h) => *h,
            s => s.not(),
        },
        Formula::And(..) => {
            let mut conj: Vec<Formula> = Vec::new();
            flat_and(f, &mut conj);
            let mut out: Vec<Formula> = Vec::new();
            for c in conj {
                let s = simplify(&c);
                match s {
                    Formula::True => {}
                    Formula::False => return Formula::False,
                    _ => {
                        if out.iter().any(|o| *o == s.clone().not() || s == o.clone().not()) {
                            return Formula::False;
                        }
                        if !out.contains(&s) {
                            out.push(s);
                        }
                    }
                }
            }
            Formula::big_and(out)
        }
        Formula::Or(..) => {
            let mut disj: Vec<Formula> = Vec::new();
            flat_or(f, &mut disj);
            let mut out: Vec<Vec<Formula>> = Vec::new();
            for d in disj {
                let s = simplify(&d);
                match s {
                    Formula::False => {}
                    Formula::True => return Formula::True,
                    _ => {
                        let mut parts = Vec::new();
                        flat_and(&s, &mut parts);
                        out.push(parts);
                    }
                }
            }
            // subsumption: drop a disjunct that is a superset of another
            let mut keep: Vec<Vec<Formula>> = Vec::new();
            'outer: for d in out {
                for k in &keep {
                    if k.iter().all(|u| d.contains(u)) {
                        continue 'outer;
                    }
                }
                keep.retain(|k| !d.iter().all(|u| k.contains(u)));
                keep.push(d);
            }
            Formula::big_or(keep.into_iter().map(Formula::big_and))
        }
        Formula::Implies(a, b) => Formula::or(simplify(a).not(), simplify(b)),
        Formula::Exists(v, b) => match simplify(b) {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            g => Formula::exists(v.clone(), g),
        },
        Formula::Forall(v, b) => match simplify(b) {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            g => Formula::forall(v.clone(), g),
        },
        _ => f.clone(),
    }
}

/// Best-effort folding of ac/v over ground series arguments.
fn fold_ground_term(t: &Term) -> Term {
    match t {
        Term::Ac(a) | Term::Val(a) => {
            if let Some(q) = QPoly::from_term(a) {
                if q.vars().is_empty() {
                    if let Some(s) = qpoly_eval_series(&q) {
                        match t {
                            Term::Val(_) => {
                                if let Ok(v) = s.val() {
                                    return Term::Int(BigInt::from(v), Sort::Group);
                                }
                            }
                            _ => {
                                if let Ok(a) = s.ac() {
                                    return Term::Rat(a);
                                }
                            }
                        }
                    }
                }
            }
            t.clone()
        }
        Term::Var(_) | Term::Int(..) | Term::Rat(_) | Term::Series(_) => t.clone(),
        Term::Add(a, b) => fold_ground_term(a).add(fold_ground_term(b)),
        Term::Sub(a, b) => fold_ground_term(a).sub(fold_ground_term(b)),
        Term::Mul(a, b) => fold_ground_term(a).mul(fold_ground_term(b)),
        Term::Neg(a) => fold_ground_term(a).neg(),
        Term::ScalarMul(k, a) => Term::ScalarMul(k.clone(), Box::new(fold_ground_term(a))),
        Term::Res(a) => Term::Res(Box::new(fold_ground_term(a))),
    }
}

fn flat_and(f: &Formula, out: &mut Vec<Formula>) {
    match f {
        Formula::And(a, b) => {
            flat_and(a, out);
            flat_and(b, out);
        }
        _ => out.push(f.clone()),
    }
}

fn flat_or(f: &Formula, out: &mut Vec<Formula>) {
    match f {
        Formula::Or(a, b) => {
            flat_or(a, out);
            flat_or(b, out);
        }
        _ => out.push(f.clone()),
    }
}

fn truth(b: bool) -> Formula {
    if b {
        Formula::True
    } else {
        Formula::False
    }
}

// ---------------------------------------------------------------------------
// full pipeline

/// Eliminates every field-sort quantifier (innermost first, universals by
/// dualization) and canonicalizes the result into Pas normal form.
pub fn eliminate_field_quantifiers(f: &Formula, budget: &Budget) -> Result<QeOutcome> {
    eliminate_field_quantifiers_traced(f, budget, false)
}

pub fn eliminate_field_quantifiers_traced(
    f: &Formula,
    budget: &Budget,
    tracing: bool,
) -> Result<QeOutcome> {
    let rep = check_sorts(f);
    if !rep.ok() {
        return Err(Error::SortError(rep.violations[0].message.clone()));
    }
    let mut ctx = Ctx { budget, trace: Vec::new(), tracing, fresh: fresh_floor(f) };
    ctx.log(|| "normalize_atoms".to_string());
    let n = normalize_atoms(f)?;
    let e = elim_rec(&n, &mut ctx)?;
    ctx.log(|| "to_pas_normal_form".to_string());
    let p = to_pas_normal_form(&e, budget)?;
    let pas = in_pas_normal_form(&p).ok_or_else(|| {
        Error::CanonicalizationFailed("output failed the normal-form check".into())
    })?;
    ctx.log(|| format!("done: N = {}", pas.n()));
    Ok(QeOutcome { formula: p, pas, trace: ctx.trace })
}

fn elim_rec(f: &Formula, ctx: &mut Ctx) -> Result<Formula> {
    match f {
        Formula::Exists(v, body) if v.sort == Sort::Field => {
            let b = elim_rec(body, ctx)?;
            ctx.log(|| format!("eliminate_one ∃{}", v.name));
            Ok(simplify(&eliminate_one_inner(v, &b, ctx)?))
        }
        Formula::Forall(v, body) if v.sort == Sort::Field => {
            let b = elim_rec(body, ctx)?;
            ctx.log(|| format!("eliminate_one ∀{} (dualized)", v.name));
            Ok(simplify(&eliminate_one_inner(v, &b.not(), ctx)?.not()))
        }
        Formula::Not(g) => Ok(elim_rec(g, ctx)?.not()),
        Formula::And(a, b) => Ok(Formula::and(elim_rec(a, ctx)?, elim_rec(b, ctx)?)),
        Formula::Or(a, b) => Ok(Formula::or(elim_rec(a, ctx)?, elim_rec(b, ctx)?)),
        Formula::Implies(a, b) => {
            Ok(Formula::Implies(Box::new(elim_rec(a, ctx)?), Box::new(elim_rec(b, ctx)?)))
        }
        Formula::Exists(v, body) => Ok(Formula::exists(v.clone(), elim_rec(body, ctx)?)),
        Formula::Forall(v, body) => Ok(Formula::forall(v.clone(), elim_rec(body, ctx)?)),
        _ => Ok(f.clone()),
    }
}

// ---------------------------------------------------------------------------
// ground decision (field-constant sentences)

/// Decides a sentence whose field content is ground (series constants
/// only): eliminate field quantifiers, fold ac/v of constants, then
/// dispatch the residue and group kernels to their backends.
pub fn decide_closed(
    f: &Formula,
    budget: &Budget,
    rmode: crate::laurent::ResidueMode,
    gmode: crate::group::GroupMode,
) -> Result<bool> {
    if !free_vars(f).is_empty() {
        return Err(Error::EvalError("decide_closed requires a closed formula".into()));
    }
    let out = eliminate_field_quantifiers(f, budget)?;
    let folded = fold_ground_field_terms(&out.formula)?;
    let pas = in_pas_normal_form(&folded).ok_or_else(|| {
        Error::CanonicalizationFailed("folded output failed the normal-form check".into())
    })?;
    for (psi, theta) in &pas.pairs {
        if !crate::residue::decide_residue_sentence(&psi.resubstitute(), rmode)? {
            continue;
        }
        if crate::group::decide_group_sentence(&theta.resubstitute(), gmode)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Replaces ac/v of ground series arguments by their exact values.
pub fn fold_ground_field_terms(f: &Formula) -> Result<Formula> {
    fn fold_term(t: &Term) -> Result<Term> {
        match t {
            Term::Ac(a) | Term::Val(a) => {
                let q = QPoly::from_term(a).ok_or_else(|| {
                    Error::EvalError(format!("non-polynomial field argument {a:?}"))
                })?;
                if !q.vars().is_empty() {
                    return Err(Error::EvalError(
                        "free field variable in ground folding".into(),
                    ));
                }
                let s = qpoly_eval_series(&q)
                    .ok_or_else(|| Error::EvalError("unexpected variables".into()))?;
                match t {
                    Term::Val(_) => Ok(Term::Int(BigInt::from(s.val()?), Sort::Group)),
                    _ => Ok(Term::Rat(s.ac()?)),
                }
            }
            Term::Var(_) | Term::Int(..) | Term::Rat(_) | Term::Series(_) => Ok(t.clone()),
            Term::Add(a, b) => Ok(fold_term(a)?.add(fold_term(b)?)),
            Term::Sub(a, b) => Ok(fold_term(a)?.sub(fold_term(b)?)),
            Term::Mul(a, b) => Ok(fold_term(a)?.mul(fold_term(b)?)),
            Term::Neg(a) => Ok(fold_term(a)?.neg()),
            Term::ScalarMul(k, a) => {
                Ok(Term::ScalarMul(k.clone(), Box::new(fold_term(a)?)))
            }
            Term::Res(a) => Ok(Term::Res(Box::new(fold_term(a)?))),
        }
    }
    fn fold(f: &Formula) -> Result<Formula> {
        Ok(match f {
            Formula::Eq(a, b) => Formula::Eq(fold_term(a)?, fold_term(b)?),
            Formula::Lt(a, b) => Formula::Lt(fold_term(a)?, fold_term(b)?),
            Formula::Cong { modulus, lhs, rhs } => Formula::Cong {
                modulus: modulus.clone(),
                lhs: fold_term(lhs)?,
                rhs: fold_term(rhs)?,
            },
            Formula::Sq(t) => Formula::Sq(fold_term(t)?),
            Formula::Not(g) => fold(g)?.not(),
            Formula::And(a, b) => Formula::and(fold(a)?, fold(b)?),
            Formula::Or(a, b) => Formula::or(fold(a)?, fold(b)?),
            Formula::Implies(a, b) => Formula::Implies(Box::new(fold(a)?), Box::new(fold(b)?)),
            Formula::Exists(v, b) => Formula::exists(v.clone(), fold(b)?),
            Formula::Forall(v, b) => Formula::forall(v.clone(), fold(b)?),
            _ => f.clone(),
        })
    }
    Ok(simplify(&fold(f)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupMode;
    use crate::laurent::ResidueMode;
    use crate::syntax::parse;

    fn qe(src: &str) -> QeOutcome {
        let f = parse(src).unwrap();
        eliminate_field_quantifiers(&f, &Budget::default()).unwrap()
    }

    fn decide(src: &str, rmode: ResidueMode) -> bool {
        let f = parse(src).unwrap();
        decide_closed(&f, &Budget::default(), rmode, GroupMode::Int).unwrap()
    }

    #[test]
    fn normalize_order_atom() {
        let f = parse("0 < x").unwrap();
        let n = normalize_atoms(&f).unwrap();
        // x > 0 → ac(x) > 0
        let expect = parse("0 < ac(x - 0)").unwrap();
        let _ = expect;
        assert!(crate::syntax::print(&n).contains("ac("));
        assert!(!crate::syntax::print(&n).contains("res("));
    }

    #[test]
    fn res_case_split() {
        let f = parse("res(x) = u").unwrap();
        let n = normalize_atoms(&f).unwrap();
        let s = crate::syntax::print(&n);
        assert!(s.contains("v(x) = 0"));
        assert!(!s.contains("res("));
    }

    #[test]
    fn linear_existential_shape() {
        let out = qe("E x (y * x + z = 0)");
        assert!(out.pas.n() >= 1);
        assert!(!crate::formula::has_field_quantifier(&out.formula));
    }

    #[test]
    fn square_sentences_remark() {
        // ∃x (x·x = t²) true in rational mode; ∃x (x·x = 2t²) false
        assert!(decide("E x (x * x = {1*t^2})", ResidueMode::Rational));
        assert!(!decide("E x (x * x = {2*t^2})", ResidueMode::Rational));
        // both true over a real closed residue field
        assert!(decide("E x (x * x = {1*t^2})", ResidueMode::RealClosed));
        assert!(decide("E x (x * x = {2*t^2})", ResidueMode::RealClosed));
        // odd valuation: never a square
        assert!(!decide("E x (x * x = {1*t^3})", ResidueMode::RealClosed));
        // negative leading coefficient: not a square in an ordered field
        assert!(!decide("E x (x * x = {-1*t^2})", ResidueMode::RealClosed));
    }

    #[test]
    fn forall_square_nonnegative() {
        assert!(decide("A x (x * x >= 0)", ResidueMode::RealClosed));
        assert!(decide("A x (x * x >= 0)", ResidueMode::Rational));
        assert!(!decide("A x (0 < x * x)", ResidueMode::RealClosed)); // x = 0
    }

    #[test]
    fn linear_ground_decisions() {
        assert!(decide("E x (x + x = {1*t})", ResidueMode::Rational));
        assert!(decide("E x ({2} * x + {1*t} = 0)", ResidueMode::Rational));
        assert!(!decide("E x ({0} * x + {1*t} = 0)", ResidueMode::Rational));
        assert!(decide("E x (0 < x & x < {1*t})", ResidueMode::Rational));
        assert!(decide("E x (v(x) = 3 & 0 < x)", ResidueMode::Rational));
        assert!(!decide("E x (x * x < 0)", ResidueMode::RealClosed));
    }

    #[test]
    fn nested_field_quantifiers() {
        // ∀c ∃x (x + c = 0)
        assert!(decide("A y (E x (x + y = 0))", ResidueMode::Rational));
        // ∃x ∀y (y < x) is false (no top element)
        assert!(!decide("E x (A y (y < x))", ResidueMode::Rational));
    }

    #[test]
    fn degree_cap_rejected() {
        let f = parse("E x (x * x * x = {1*t})").unwrap();
        assert!(matches!(
            eliminate_field_quantifiers(&f, &Budget::default()),
            Err(Error::DegreeUnsupported(_))
        ));
    }

    #[test]
    fn pas_shape_qf_idempotent() {
        let out = qe("ac(x) > 0 & v(x) = g");
        assert_eq!(out.pas.n(), 1);
        let out2 = qe("(ac(x) > 0 & v(x) = g) | sq(ac(y))");
        assert!(out2.pas.n() >= 2);
    }

    #[test]
    fn parameter_discipline() {
        let out = qe("E x (x < {1*t} & v(x) > g)");
        let leaked = crate::formula::field_constants_outside_ac_v(&out.formula);
        assert!(leaked.is_empty(), "constants outside ac/v: {leaked:?}");
    }

    #[test]
    fn split_sums_linear_shape() {
        // p = x + c: three relevant guard families
        let p = QPoly::var("x").add(&QPoly::var("c"));
        let delta = Var::new("$d0".to_string(), Sort::Group);
        let eta = Var::new("$e0".to_string(), Sort::Residue);
        let cases = split_sums(&p, "x", &delta, &eta).unwrap();
        assert!(cases.len() >= 4);
        assert!(cases
            .iter()
            .any(|c| matches!(c.outcome, SplitOutcome::Cancellation)));
        assert!(cases.iter().any(|c| matches!(c.outcome, SplitOutcome::Zero)));
    }

    #[test]
    fn monomial_split_single_case() {
        let p = QPoly::var("c").mul(&QPoly::var("x"));
        let delta = Var::new("$d0".to_string(), Sort::Group);
        let eta = Var::new("$e0".to_string(), Sort::Residue);
        let cases = split_sums(&p, "x", &delta, &eta).unwrap();
        // zero-pattern of c gives two cases: c = 0 and the determined one
        assert_eq!(cases.len(), 2);
    }

    #[test]
    fn trace_emitted() {
        let f = parse("E x (x = {1*t})").unwrap();
        let out = eliminate_field_quantifiers_traced(&f, &Budget::default(), true).unwrap();
        assert!(!out.trace.is_empty());
    }
}
