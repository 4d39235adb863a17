//! One-variable definable subsets of the Laurent-series field in a
//! canonical "Swiss cheese" form — order intervals and valuation balls
//! minus finitely many balls and points — together with dimension,
//! topological closure, and the closure/difference construction tree
//! that witnesses such sets as Borel.
//!
//! Scope is a single field variable: the construction for several
//! variables needs a cell decomposition that is out of scope here, and
//! callers are expected to reject higher arity with a message.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::One;

use crate::error::{Error, Result};
use crate::eval::exact_monomial_sqrt;
use crate::formula::{free_vars, Formula, Sort, Term, Var};
use crate::laurent::{topology_basis_check, LaurentSeries, SeriesPoly};

const MAX_DNF: usize = 4096;
const DEGREE_CAP: u32 = 2;

// ---------------------------------------------------------------------------
// canonical pieces

/// Interval endpoint. `At` carries an exact series and whether the
/// endpoint itself is excluded.
#[derive(Debug, Clone, PartialEq)]
pub enum Bound {
    NegInf,
    PosInf,
    At { value: LaurentSeries, open: bool },
}

/// A removed subset of a base piece: a full valuation ball (center
/// included) or a single point.
#[derive(Debug, Clone, PartialEq)]
pub enum Hole {
    Ball { center: LaurentSeries, level: i64 },
    Point(LaurentSeries),
}

/// The convex body of a piece: an order interval or a valuation ball
/// `{x : v(x−c) ≥ level} ∪ {c}` (as a set, the center belongs to the
/// ball; the `v(0) = 0` convention is resolved during translation by
/// punching or adding the center point explicitly).
#[derive(Debug, Clone, PartialEq)]
pub enum Base {
    Interval { lo: Bound, hi: Bound },
    Ball { center: LaurentSeries, level: i64 },
}

/// One Swiss-cheese piece: a point, or a base minus finitely many holes.
#[derive(Debug, Clone, PartialEq)]
pub enum Piece {
    Point(LaurentSeries),
    Region { base: Base, holes: Vec<Hole> },
}

/// A one-variable definable set in canonical form.
#[derive(Debug, Clone, PartialEq)]
pub struct DefinableSet1 {
    pub var: Var,
    pub pieces: Vec<Piece>,
}

// ---------------------------------------------------------------------------
// exact series helpers

fn series_cmp(a: &LaurentSeries, b: &LaurentSeries) -> Result<std::cmp::Ordering> {
    let d = b.sub(a);
    if d.is_exact_zero() {
        return Ok(std::cmp::Ordering::Equal);
    }
    if d.is_indeterminate() {
        return Err(Error::InsufficientPrecision(
            "order comparison undecided at current precision".into(),
        ));
    }
    Ok(if d.sign()? > 0 {
        std::cmp::Ordering::Less
    } else {
        std::cmp::Ordering::Greater
    })
}

fn require_exact(s: &LaurentSeries, what: &str) -> Result<()> {
    if s.prec().is_some() {
        return Err(Error::CanonicalizationFailed(format!(
            "{what} is not an exact series"
        )));
    }
    Ok(())
}

/// Exact quotient a/b, available when b is a nonzero monomial.
fn exact_div(a: &LaurentSeries, b: &LaurentSeries) -> Result<LaurentSeries> {
    require_exact(a, "numerator")?;
    require_exact(b, "denominator")?;
    let mut terms = b.terms();
    let Some((e, c)) = terms.next() else {
        return Err(Error::CanonicalizationFailed("division by zero".into()));
    };
    if terms.next().is_some() {
        return Err(Error::CanonicalizationFailed(
            "root not exactly representable: denominator is not a monomial".into(),
        ));
    }
    let inv = LaurentSeries::monomial(BigRational::one() / c.clone(), -e);
    Ok(a.mul(&inv))
}

/// Whether x lies in the full ball around the center at the given level
/// (ultrametric distance at least `level`; the center always belongs).
fn in_full_ball(x: &LaurentSeries, center: &LaurentSeries, level: i64) -> Result<bool> {
    let d = x.sub(center);
    if d.is_exact_zero() {
        return Ok(true);
    }
    if d.is_indeterminate() {
        return Err(Error::InsufficientPrecision("ball membership undecided".into()));
    }
    Ok(d.val()? >= level)
}

// ---------------------------------------------------------------------------
// membership

fn above_lo(x: &LaurentSeries, lo: &Bound) -> Result<bool> {
    Ok(match lo {
        Bound::NegInf => true,
        Bound::PosInf => false,
        Bound::At { value, open } => match series_cmp(value, x)? {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Equal => !open,
            std::cmp::Ordering::Greater => false,
        },
    })
}

fn below_hi(x: &LaurentSeries, hi: &Bound) -> Result<bool> {
    Ok(match hi {
        Bound::PosInf => true,
        Bound::NegInf => false,
        Bound::At { value, open } => match series_cmp(x, value)? {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Equal => !open,
            std::cmp::Ordering::Greater => false,
        },
    })
}

fn in_base(x: &LaurentSeries, base: &Base) -> Result<bool> {
    match base {
        Base::Interval { lo, hi } => Ok(above_lo(x, lo)? && below_hi(x, hi)?),
        Base::Ball { center, level } => in_full_ball(x, center, *level),
    }
}

fn in_hole(x: &LaurentSeries, hole: &Hole) -> Result<bool> {
    match hole {
        Hole::Ball { center, level } => in_full_ball(x, center, *level),
        Hole::Point(p) => x.eq_exact(p),
    }
}

impl Piece {
    pub fn member(&self, x: &LaurentSeries) -> Result<bool> {
        match self {
            Piece::Point(p) => x.eq_exact(p),
            Piece::Region { base, holes } => {
                if !in_base(x, base)? {
                    return Ok(false);
                }
                for h in holes {
                    if in_hole(x, h)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
        }
    }
}

impl DefinableSet1 {
    pub fn member(&self, x: &LaurentSeries) -> Result<bool> {
        for p in &self.pieces {
            if p.member(x)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// 0 iff the canonical form is a finite set of points.
    pub fn dim(&self) -> u8 {
        if self.pieces.iter().any(|p| matches!(p, Piece::Region { .. })) {
            1
        } else {
            0
        }
    }
}

pub fn dim1(set: &DefinableSet1) -> u8 {
    set.dim()
}

// ---------------------------------------------------------------------------
// translation: literals to unions of pieces

type Literal = (Formula, bool);

fn dnf(f: &Formula, positive: bool) -> Result<Vec<Vec<Literal>>> {
    let cross = |a: Vec<Vec<Literal>>, b: Vec<Vec<Literal>>| -> Result<Vec<Vec<Literal>>> {
        let mut out = Vec::new();
        for x in &a {
            for y in &b {
                let mut c = x.clone();
                c.extend(y.iter().cloned());
                out.push(c);
                if out.len() > MAX_DNF {
                    return Err(Error::BudgetExceeded("canonicalization DNF too large".into()));
                }
            }
        }
        Ok(out)
    };
    let union = |mut a: Vec<Vec<Literal>>, b: Vec<Vec<Literal>>| -> Result<Vec<Vec<Literal>>> {
        a.extend(b);
        if a.len() > MAX_DNF {
            return Err(Error::BudgetExceeded("canonicalization DNF too large".into()));
        }
        Ok(a)
    };
    match f {
        Formula::True => Ok(if positive { vec![vec![]] } else { vec![] }),
        Formula::False => Ok(if positive { vec![] } else { vec![vec![]] }),
        Formula::Not(g) => dnf(g, !positive),
        Formula::And(a, b) => {
            let (da, db) = (dnf(a, positive)?, dnf(b, positive)?);
            if positive {
                cross(da, db)
            } else {
                union(da, db)
            }
        }
        Formula::Or(a, b) => {
            let (da, db) = (dnf(a, positive)?, dnf(b, positive)?);
            if positive {
                union(da, db)
            } else {
                cross(da, db)
            }
        }
        Formula::Implies(a, b) => dnf(&Formula::or(a.as_ref().clone().not(), (**b).clone()), positive),
        Formula::Exists(..) | Formula::Forall(..) => Err(Error::CanonicalizationFailed(
            "canonical form needs a quantifier-free input (run qe first)".into(),
        )),
        Formula::Eq(..) | Formula::Lt(..) | Formula::Sq(_) | Formula::Cong { .. } => {
            Ok(vec![vec![(f.clone(), positive)]])
        }
    }
}

fn contains_map(t: &Term) -> (bool, bool) {
    // (has_val, has_ac_or_res)
    match t {
        Term::Var(_) | Term::Int(..) | Term::Rat(_) | Term::Series(_) => (false, false),
        Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) => {
            let (v1, r1) = contains_map(a);
            let (v2, r2) = contains_map(b);
            (v1 || v2, r1 || r2)
        }
        Term::Neg(a) | Term::ScalarMul(_, a) => contains_map(a),
        Term::Val(_) => (true, false),
        Term::Ac(_) | Term::Res(_) => (false, true),
    }
}

/// Dense exact-series coefficients of a field term as a polynomial in x.
fn poly_coeffs(t: &Term, x: &str) -> Result<Vec<LaurentSeries>> {
    fn konst(s: LaurentSeries) -> Vec<LaurentSeries> {
        vec![s]
    }
    fn add(a: Vec<LaurentSeries>, b: Vec<LaurentSeries>) -> Vec<LaurentSeries> {
        let n = a.len().max(b.len());
        (0..n)
            .map(|i| {
                let za = a.get(i).cloned().unwrap_or_else(LaurentSeries::zero);
                let zb = b.get(i).cloned().unwrap_or_else(LaurentSeries::zero);
                za.add(&zb)
            })
            .collect()
    }
    fn mul(a: &[LaurentSeries], b: &[LaurentSeries]) -> Vec<LaurentSeries> {
        let mut out = vec![LaurentSeries::zero(); a.len() + b.len() - 1];
        for (i, ca) in a.iter().enumerate() {
            for (j, cb) in b.iter().enumerate() {
                out[i + j] = out[i + j].add(&ca.mul(cb));
            }
        }
        out
    }
    let coeffs = match t {
        Term::Var(v) if v.name == x && v.sort == Sort::Field => {
            vec![LaurentSeries::zero(), LaurentSeries::one()]
        }
        Term::Var(v) => {
            return Err(Error::CanonicalizationFailed(format!(
                "unexpected variable {} in a one-variable field atom",
                v.name
            )))
        }
        Term::Int(n, Sort::Field) => konst(LaurentSeries::from_rational(BigRational::from(n.clone()))),
        Term::Rat(q) => konst(LaurentSeries::from_rational(q.clone())),
        Term::Series(s) => {
            require_exact(s, "series literal")?;
            konst(s.clone())
        }
        Term::Int(..) => {
            return Err(Error::CanonicalizationFailed(
                "non-field constant in a field atom".into(),
            ))
        }
        Term::Add(a, b) => add(poly_coeffs(a, x)?, poly_coeffs(b, x)?),
        Term::Sub(a, b) => add(
            poly_coeffs(a, x)?,
            poly_coeffs(b, x)?.iter().map(|c| c.neg()).collect(),
        ),
        Term::Mul(a, b) => mul(&poly_coeffs(a, x)?, &poly_coeffs(b, x)?),
        Term::Neg(a) => poly_coeffs(a, x)?.iter().map(|c| c.neg()).collect(),
        Term::ScalarMul(..) | Term::Val(_) | Term::Ac(_) | Term::Res(_) => {
            return Err(Error::CanonicalizationFailed(
                "group or map term inside a field polynomial".into(),
            ))
        }
    };
    let mut coeffs = coeffs;
    while coeffs.len() > 1 && coeffs.last().map(|c| c.is_exact_zero()) == Some(true) {
        coeffs.pop();
    }
    Ok(coeffs)
}

/// Integer value of a constant group term.
fn group_const(t: &Term) -> Option<i64> {
    match t {
        Term::Int(n, Sort::Group) => n.to_string().parse().ok(),
        Term::Neg(a) => group_const(a).map(|v| -v),
        Term::Add(a, b) => Some(group_const(a)? + group_const(b)?),
        Term::Sub(a, b) => Some(group_const(a)? - group_const(b)?),
        Term::ScalarMul(n, a) => {
            let k: i64 = n.to_string().parse().ok()?;
            Some(k * group_const(a)?)
        }
        _ => None,
    }
}

/// Real roots of an exact-series polynomial of degree ≤ 2, sorted
/// ascending; fails when a root exists but is not exactly representable.
fn exact_roots(coeffs: &[LaurentSeries]) -> Result<Vec<LaurentSeries>> {
    match coeffs.len() {
        0 | 1 => Ok(vec![]),
        2 => Ok(vec![exact_div(&coeffs[0].neg(), &coeffs[1])?]),
        3 => {
            let (c, b, a) = (&coeffs[0], &coeffs[1], &coeffs[2]);
            let four = LaurentSeries::from_int(4);
            let disc = b.mul(b).sub(&four.mul(a).mul(c));
            if disc.is_exact_zero() {
                let two_a = LaurentSeries::from_int(2).mul(a);
                return Ok(vec![exact_div(&b.neg(), &two_a)?]);
            }
            if disc.sign()? < 0 {
                return Ok(vec![]);
            }
            let Some(s) = exact_monomial_sqrt(&disc) else {
                return Err(Error::CanonicalizationFailed(
                    "quadratic root not exactly representable (irrational discriminant)".into(),
                ));
            };
            let two_a = LaurentSeries::from_int(2).mul(a);
            let r1 = exact_div(&b.neg().sub(&s), &two_a)?;
            let r2 = exact_div(&b.neg().add(&s), &two_a)?;
            let mut rs = vec![r1, r2];
            if series_cmp(&rs[0], &rs[1])? == std::cmp::Ordering::Greater {
                rs.swap(0, 1);
            }
            Ok(rs)
        }
        n => Err(Error::CanonicalizationFailed(format!(
            "degree {} exceeds the canonicalization cap {DEGREE_CAP}",
            n - 1
        ))),
    }
}

fn interval(lo: Bound, hi: Bound) -> Piece {
    Piece::Region { base: Base::Interval { lo, hi }, holes: vec![] }
}

fn full_line() -> Piece {
    interval(Bound::NegInf, Bound::PosInf)
}

fn ball_piece(center: LaurentSeries, level: i64, holes: Vec<Hole>) -> Piece {
    Piece::Region { base: Base::Ball { center, level }, holes }
}

/// Region of an order literal `p(x) rel 0` (`rel` ∈ {<, =}, possibly
/// negated) as a union of pieces, via the sign diagram on root gaps.
fn order_literal_pieces(coeffs: &[LaurentSeries], eq: bool, positive: bool) -> Result<Vec<Piece>> {
    if coeffs.len() == 1 || coeffs.is_empty() {
        // ground atom
        let c = coeffs.first().cloned().unwrap_or_else(LaurentSeries::zero);
        let holds = if eq { c.is_exact_zero() } else { c.sign()? < 0 };
        return Ok(if holds == positive { vec![full_line()] } else { vec![] });
    }
    let roots = exact_roots(coeffs)?;
    if eq {
        if positive {
            return Ok(roots.into_iter().map(Piece::Point).collect());
        }
        // x distinct from every root
        let mut holes: Vec<Hole> = roots.into_iter().map(Hole::Point).collect();
        holes.dedup();
        return Ok(vec![Piece::Region {
            base: Base::Interval { lo: Bound::NegInf, hi: Bound::PosInf },
            holes,
        }]);
    }
    // strict inequality: want p < 0 (positive) or p ≥ 0 (negative)
    let sp = SeriesPoly::new(coeffs.to_vec());
    let mut cuts: Vec<Bound> = vec![Bound::NegInf];
    for r in &roots {
        cuts.push(Bound::At { value: r.clone(), open: true });
    }
    cuts.push(Bound::PosInf);
    let sample_in = |lo: &Bound, hi: &Bound| -> LaurentSeries {
        match (lo, hi) {
            (Bound::NegInf, Bound::PosInf) => LaurentSeries::zero(),
            (Bound::NegInf, Bound::At { value, .. }) => value.sub(&LaurentSeries::one()),
            (Bound::At { value, .. }, Bound::PosInf) => value.add(&LaurentSeries::one()),
            (Bound::At { value: a, .. }, Bound::At { value: b, .. }) => {
                a.add(b).scale(&BigRational::new(BigInt::one(), BigInt::from(2)))
            }
            _ => unreachable!(),
        }
    };
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let sgn = sp.eval(&sample_in(&w[0], &w[1])).sign()?;
        let keep = if positive { sgn < 0 } else { sgn > 0 };
        if keep {
            out.push(interval(w[0].clone(), w[1].clone()));
        }
    }
    if !positive {
        // p ≥ 0 also holds at the roots themselves
        out.extend(roots.into_iter().map(Piece::Point));
    }
    Ok(out)
}

/// Region of a valuation literal on `v(p(x))` with p linear, against an
/// integer constant. `rel_ge`: the satisfied condition is `v(p) ≥ k`
/// when true, `v(p) = k` when false (negation handled by the caller
/// passing the complement through `complement`).
fn val_ge_pieces(center: LaurentSeries, m: i64, center_in: bool) -> Vec<Piece> {
    // {x ≠ c : v(x−c) ≥ m}, plus the center iff center_in; the full ball
    // already contains its center, so only the punctured case needs a hole
    let holes = if center_in { vec![] } else { vec![Hole::Point(center.clone())] };
    vec![ball_piece(center, m, holes)]
}

fn val_ge_complement_pieces(center: LaurentSeries, m: i64, center_in: bool) -> Vec<Piece> {
    // {x ≠ c : v(x−c) < m}, plus the center iff center_in
    let mut out = vec![Piece::Region {
        base: Base::Interval { lo: Bound::NegInf, hi: Bound::PosInf },
        holes: vec![Hole::Ball { center: center.clone(), level: m }],
    }];
    if center_in {
        out.push(Piece::Point(center));
    }
    out
}

fn val_eq_pieces(center: LaurentSeries, m: i64, center_in: bool) -> Vec<Piece> {
    // sphere {x ≠ c : v(x−c) = m}, plus the center iff center_in
    let mut out = vec![ball_piece(
        center.clone(),
        m,
        vec![Hole::Ball { center: center.clone(), level: m + 1 }],
    )];
    if center_in {
        out.push(Piece::Point(center));
    }
    out
}

fn val_ne_pieces(center: LaurentSeries, m: i64, center_in: bool) -> Vec<Piece> {
    // complement of the sphere: inside the smaller ball, or outside the
    // larger one
    let mut out = vec![
        ball_piece(center.clone(), m + 1, vec![Hole::Point(center.clone())]),
        Piece::Region {
            base: Base::Interval { lo: Bound::NegInf, hi: Bound::PosInf },
            holes: vec![Hole::Ball { center: center.clone(), level: m }],
        },
    ];
    if center_in {
        out.push(Piece::Point(center));
    }
    out
}

/// Pieces of one literal. The literal is `(atom, positive)`.
fn literal_pieces(atom: &Formula, positive: bool, x: &str) -> Result<Vec<Piece>> {
    let (a, b, eq) = match atom {
        Formula::Eq(a, b) => (a, b, true),
        Formula::Lt(a, b) => (a, b, false),
        Formula::Sq(_) | Formula::Cong { .. } => {
            return Err(Error::CanonicalizationFailed(
                "residue/group-sort atom has no one-variable field region".into(),
            ))
        }
        _ => unreachable!("dnf yields atoms"),
    };
    let (va, ra) = contains_map(a);
    let (vb, rb) = contains_map(b);
    if ra || rb {
        return Err(Error::CanonicalizationFailed(
            "ac/res atoms are not representable as Swiss-cheese pieces".into(),
        ));
    }
    if !va && !vb {
        // order atom: p(x) rel 0 with p = a − b
        let coeffs = poly_coeffs(&Term::Sub(Box::new(a.clone()), Box::new(b.clone())), x)?;
        if coeffs.len() as u32 > DEGREE_CAP + 1 {
            return Err(Error::CanonicalizationFailed(format!(
                "degree {} exceeds the canonicalization cap {DEGREE_CAP}",
                coeffs.len() - 1
            )));
        }
        return order_literal_pieces(&coeffs, eq, positive);
    }
    // valuation atom: v(p(x)) rel k (either orientation)
    let (vp, konst, flipped) = match (a, b) {
        (Term::Val(p), other) if group_const(other).is_some() => (p, group_const(other).unwrap(), false),
        (other, Term::Val(p)) if group_const(other).is_some() => (p, group_const(other).unwrap(), true),
        _ => {
            return Err(Error::CanonicalizationFailed(
                "valuation atom must compare v(p(x)) with a constant".into(),
            ))
        }
    };
    let coeffs = poly_coeffs(vp, x)?;
    if coeffs.len() != 2 {
        return Err(Error::CanonicalizationFailed(
            "valuation atoms are supported for linear arguments only".into(),
        ));
    }
    let center = exact_div(&coeffs[0].neg(), &coeffs[1])?;
    let vlead = coeffs[1].val()?;
    // v(p(x)) = vlead + v(x−c) for x ≠ c; p(c) = 0 has v = 0 by convention
    let k = konst;
    let m = k - vlead; // threshold on v(x−c)
    if eq {
        let center_sat = 0 == k;
        return Ok(if positive {
            val_eq_pieces(center, m, center_sat)
        } else {
            val_ne_pieces(center, m, !center_sat)
        });
    }
    // strict order on the group: v(p) < k, or flipped k < v(p)
    if !flipped {
        // v(p) < k  ⟺  ¬(v(p) ≥ k)
        let center_sat = 0 < k;
        Ok(if positive {
            val_ge_complement_pieces(center, m, center_sat)
        } else {
            val_ge_pieces(center, m, !center_sat)
        })
    } else {
        // k < v(p)  ⟺  v(p) ≥ k+1 over the integer value group
        let center_sat = k < 0;
        Ok(if positive {
            val_ge_pieces(center, m + 1, center_sat)
        } else {
            val_ge_complement_pieces(center, m + 1, !center_sat)
        })
    }
}

// ---------------------------------------------------------------------------
// intersection of pieces

fn bound_in_ball(bd: &Bound, center: &LaurentSeries, level: i64) -> Result<Option<bool>> {
    // None for infinities (never inside)
    match bd {
        Bound::NegInf | Bound::PosInf => Ok(None),
        Bound::At { value, .. } => Ok(Some(in_full_ball(value, center, level)?)),
    }
}

/// max of two lower bounds / min of two upper bounds.
fn tighter_lo(a: &Bound, b: &Bound) -> Result<Bound> {
    Ok(match (a, b) {
        (Bound::NegInf, _) => b.clone(),
        (_, Bound::NegInf) => a.clone(),
        (Bound::PosInf, _) | (_, Bound::PosInf) => Bound::PosInf,
        (Bound::At { value: va, open: oa }, Bound::At { value: vb, open: ob }) => {
            match series_cmp(va, vb)? {
                std::cmp::Ordering::Less => b.clone(),
                std::cmp::Ordering::Greater => a.clone(),
                std::cmp::Ordering::Equal => Bound::At { value: va.clone(), open: *oa || *ob },
            }
        }
    })
}

fn tighter_hi(a: &Bound, b: &Bound) -> Result<Bound> {
    Ok(match (a, b) {
        (Bound::PosInf, _) => b.clone(),
        (_, Bound::PosInf) => a.clone(),
        (Bound::NegInf, _) | (_, Bound::NegInf) => Bound::NegInf,
        (Bound::At { value: va, open: oa }, Bound::At { value: vb, open: ob }) => {
            match series_cmp(va, vb)? {
                std::cmp::Ordering::Less => a.clone(),
                std::cmp::Ordering::Greater => b.clone(),
                std::cmp::Ordering::Equal => Bound::At { value: va.clone(), open: *oa || *ob },
            }
        }
    })
}

/// Whether the interval with these bounds is nonempty; Some(point) if it
/// degenerates to one point.
enum IntervalShape {
    Empty,
    Point(LaurentSeries),
    Proper,
}

fn interval_shape(lo: &Bound, hi: &Bound) -> Result<IntervalShape> {
    Ok(match (lo, hi) {
        (Bound::PosInf, _) | (_, Bound::NegInf) => IntervalShape::Empty,
        (Bound::NegInf, _) | (_, Bound::PosInf) => IntervalShape::Proper,
        (Bound::At { value: a, open: oa }, Bound::At { value: b, open: ob }) => {
            match series_cmp(a, b)? {
                std::cmp::Ordering::Less => IntervalShape::Proper,
                std::cmp::Ordering::Greater => IntervalShape::Empty,
                std::cmp::Ordering::Equal => {
                    if *oa || *ob {
                        IntervalShape::Empty
                    } else {
                        IntervalShape::Point(a.clone())
                    }
                }
            }
        }
    })
}

/// Intersection of two convex bases: None = empty.
fn intersect_bases(a: &Base, b: &Base) -> Result<Option<Base>> {
    match (a, b) {
        (Base::Interval { lo: l1, hi: h1 }, Base::Interval { lo: l2, hi: h2 }) => {
            let lo = tighter_lo(l1, l2)?;
            let hi = tighter_hi(h1, h2)?;
            Ok(match interval_shape(&lo, &hi)? {
                IntervalShape::Empty => None,
                // a degenerate interval is handled by the caller through
                // normalization; keep it as an interval here
                _ => Some(Base::Interval { lo, hi }),
            })
        }
        (Base::Ball { center: c1, level: l1 }, Base::Ball { center: c2, level: l2 }) => {
            let (inner, outer) = if l1 >= l2 { (a, b) } else { (b, a) };
            let (Base::Ball { center: ci, .. }, Base::Ball { center: co, level: lo }) =
                (inner, outer)
            else {
                unreachable!()
            };
            if in_full_ball(ci, co, *lo)? {
                Ok(Some(inner.clone()))
            } else {
                let _ = (c1, c2, l1, l2);
                Ok(None)
            }
        }
        (Base::Interval { .. }, Base::Ball { .. }) => intersect_bases(b, a),
        (Base::Ball { center, level }, Base::Interval { lo, hi }) => {
            let lo_in = bound_in_ball(lo, center, *level)?;
            let hi_in = bound_in_ball(hi, center, *level)?;
            match (lo_in, hi_in) {
                (Some(true), Some(true)) => Ok(Some(b.clone())),
                (Some(true), _) | (_, Some(true)) => Err(Error::CanonicalizationFailed(
                    "interval endpoint cuts through a valuation ball".into(),
                )),
                _ => {
                    // both endpoints outside the ball: all of the ball is
                    // inside iff the center is, by convexity
                    if above_lo(center, lo)? && below_hi(center, hi)? {
                        Ok(Some(a.clone()))
                    } else {
                        Ok(None)
                    }
                }
            }
        }
    }
}

/// A hole restricted to a base: None = the hole misses the base,
/// Some(Err-like full coverage) handled by caller via covers flag.
enum HoleFit {
    Misses,
    Inside(Hole),
    Covers,
}

fn fit_hole(hole: &Hole, base: &Base) -> Result<HoleFit> {
    match hole {
        Hole::Point(p) => Ok(if in_base(p, base)? {
            HoleFit::Inside(hole.clone())
        } else {
            HoleFit::Misses
        }),
        Hole::Ball { center, level } => match base {
            Base::Ball { center: bc, level: bl } => {
                if *level >= *bl {
                    // candidate hole is the smaller (or equal) ball
                    if in_full_ball(center, bc, *bl)? {
                        if *level == *bl {
                            Ok(HoleFit::Covers)
                        } else {
                            Ok(HoleFit::Inside(hole.clone()))
                        }
                    } else {
                        Ok(HoleFit::Misses)
                    }
                } else if in_full_ball(bc, center, *level)? {
                    Ok(HoleFit::Covers)
                } else {
                    Ok(HoleFit::Misses)
                }
            }
            Base::Interval { lo, hi } => {
                let lo_in = bound_in_ball(lo, center, *level)?;
                let hi_in = bound_in_ball(hi, center, *level)?;
                match (lo_in, hi_in) {
                    (Some(true), Some(true)) => Ok(HoleFit::Covers),
                    (Some(true), _) | (_, Some(true)) => Err(Error::CanonicalizationFailed(
                        "valuation ball cuts through an interval endpoint".into(),
                    )),
                    _ => {
                        if above_lo(center, lo)? && below_hi(center, hi)? {
                            Ok(HoleFit::Inside(hole.clone()))
                        } else {
                            Ok(HoleFit::Misses)
                        }
                    }
                }
            }
        },
    }
}

/// Intersection of two pieces as a list of pieces (possibly empty).
fn intersect_pieces(a: &Piece, b: &Piece) -> Result<Vec<Piece>> {
    match (a, b) {
        (Piece::Point(p), other) | (other, Piece::Point(p)) => Ok(if other.member(p)? {
            vec![Piece::Point(p.clone())]
        } else {
            vec![]
        }),
        (
            Piece::Region { base: b1, holes: h1 },
            Piece::Region { base: b2, holes: h2 },
        ) => {
            let Some(base) = intersect_bases(b1, b2)? else {
                return Ok(vec![]);
            };
            let mut holes = Vec::new();
            for h in h1.iter().chain(h2.iter()) {
                match fit_hole(h, &base)? {
                    HoleFit::Misses => {}
                    HoleFit::Covers => return Ok(vec![]),
                    HoleFit::Inside(h) => {
                        if !holes.contains(&h) {
                            holes.push(h);
                        }
                    }
                }
            }
            Ok(vec![Piece::Region { base, holes }])
        }
    }
}

// ---------------------------------------------------------------------------
// normalization and merging

fn normalize_piece(p: Piece) -> Result<Option<Piece>> {
    match p {
        Piece::Point(s) => Ok(Some(Piece::Point(s))),
        Piece::Region { base, mut holes } => {
            if let Base::Interval { lo, hi } = &base {
                match interval_shape(lo, hi)? {
                    IntervalShape::Empty => return Ok(None),
                    IntervalShape::Point(v) => {
                        for h in &holes {
                            if in_hole(&v, h)? {
                                return Ok(None);
                            }
                        }
                        return Ok(Some(Piece::Point(v)));
                    }
                    IntervalShape::Proper => {}
                }
            }
            // refit holes against the base; drop subsumed holes
            let mut fitted: Vec<Hole> = Vec::new();
            for h in holes.drain(..) {
                match fit_hole(&h, &base)? {
                    HoleFit::Misses => {}
                    HoleFit::Covers => return Ok(None),
                    HoleFit::Inside(h) => fitted.push(h),
                }
            }
            let mut kept: Vec<Hole> = Vec::new();
            for h in &fitted {
                let mut subsumed = false;
                for other in &fitted {
                    if std::ptr::eq(h, other) {
                        continue;
                    }
                    if let Hole::Ball { center, level } = other {
                        let inside = match h {
                            Hole::Point(p) => {
                                in_full_ball(p, center, *level)?
                            }
                            Hole::Ball { center: c2, level: l2 } => {
                                *l2 > *level && in_full_ball(c2, center, *level)?
                            }
                        };
                        if inside {
                            subsumed = true;
                            break;
                        }
                    }
                }
                if !subsumed && !kept.contains(h) {
                    kept.push(h.clone());
                }
            }
            sort_holes(&mut kept)?;
            Ok(Some(Piece::Region { base, holes: kept }))
        }
    }
}

fn hole_key(h: &Hole) -> (LaurentSeries, i64) {
    match h {
        Hole::Point(p) => (p.clone(), i64::MAX),
        Hole::Ball { center, level } => (center.clone(), *level),
    }
}

fn sort_holes(holes: &mut [Hole]) -> Result<()> {
    // insertion sort with fallible comparison
    for i in 1..holes.len() {
        let mut j = i;
        while j > 0 {
            let (ka, la) = hole_key(&holes[j - 1]);
            let (kb, lb) = hole_key(&holes[j]);
            let swap = match series_cmp(&ka, &kb)? {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Equal => la > lb,
                std::cmp::Ordering::Less => false,
            };
            if swap {
                holes.swap(j - 1, j);
                j -= 1;
            } else {
                break;
            }
        }
    }
    Ok(())
}

/// Anchor used for the canonical piece order: the left endpoint of an
/// interval, the center of a ball, the value of a point. Infinite left
/// endpoints sort first.
fn piece_key(p: &Piece) -> (i8, Option<LaurentSeries>, i64, i8) {
    match p {
        Piece::Region { base: Base::Interval { lo, .. }, .. } => match lo {
            Bound::NegInf => (0, None, 0, 0),
            Bound::At { value, .. } => (1, Some(value.clone()), 0, 0),
            Bound::PosInf => (1, None, 0, 0),
        },
        Piece::Region { base: Base::Ball { center, level }, .. } => {
            (1, Some(center.clone()), *level, 1)
        }
        Piece::Point(v) => (1, Some(v.clone()), i64::MAX, 2),
    }
}

fn cmp_pieces(a: &Piece, b: &Piece) -> Result<std::cmp::Ordering> {
    let (ra, sa, la, ka) = piece_key(a);
    let (rb, sb, lb, kb) = piece_key(b);
    if ra != rb {
        return Ok(ra.cmp(&rb));
    }
    if let (Some(sa), Some(sb)) = (&sa, &sb) {
        let c = series_cmp(sa, sb)?;
        if c != std::cmp::Ordering::Equal {
            return Ok(c);
        }
    }
    Ok(la.cmp(&lb).then(ka.cmp(&kb)))
}

fn sort_pieces(pieces: &mut [Piece]) -> Result<()> {
    for i in 1..pieces.len() {
        let mut j = i;
        while j > 0 {
            if cmp_pieces(&pieces[j - 1], &pieces[j])? == std::cmp::Ordering::Greater {
                pieces.swap(j - 1, j);
                j -= 1;
            } else {
                break;
            }
        }
    }
    Ok(())
}

/// Best-effort containment test (false negatives are harmless for
/// canonicity, the merge just keeps both pieces).
fn piece_subset(a: &Piece, b: &Piece) -> Result<bool> {
    match (a, b) {
        (Piece::Point(p), other) => other.member(p),
        (Piece::Region { .. }, Piece::Point(_)) => Ok(false),
        (
            Piece::Region { base: b1, holes: h1 },
            Piece::Region { base: b2, holes: h2 },
        ) => {
            let base_in = match intersect_bases(b1, b2) {
                Ok(Some(i)) => &i == b1,
                Ok(None) => false,
                Err(_) => false,
            };
            if !base_in {
                return Ok(false);
            }
            // every hole of b restricted to base1 must be inside a hole of a
            for h in h2 {
                let fit = match fit_hole(h, b1) {
                    Ok(f) => f,
                    Err(_) => return Ok(false),
                };
                match fit {
                    HoleFit::Misses => {}
                    HoleFit::Covers => return Ok(false),
                    HoleFit::Inside(h) => {
                        let mut covered = false;
                        for mine in h1 {
                            covered = match (&h, mine) {
                                (Hole::Point(p), Hole::Point(q)) => p.eq_exact(q)?,
                                (Hole::Point(p), Hole::Ball { center, level }) => {
                                    in_full_ball(p, center, *level)?
                                }
                                (
                                    Hole::Ball { center: c1, level: l1 },
                                    Hole::Ball { center: c2, level: l2 },
                                ) => *l1 >= *l2 && in_full_ball(c1, c2, *l2)?,
                                (Hole::Ball { .. }, Hole::Point(_)) => false,
                            };
                            if covered {
                                break;
                            }
                        }
                        if !covered {
                            return Ok(false);
                        }
                    }
                }
            }
            Ok(true)
        }
    }
}

/// Merge a freshly collected union of pieces into canonical form.
fn merge_pieces(raw: Vec<Piece>) -> Result<Vec<Piece>> {
    let mut pieces: Vec<Piece> = Vec::new();
    for p in raw {
        if let Some(p) = normalize_piece(p)? {
            pieces.push(p);
        }
    }
    // absorb points: a point inside another piece disappears; a point
    // filling a point-hole removes the hole; a point at an open interval
    // endpoint closes the endpoint
    let mut changed = true;
    while changed {
        changed = false;
        'outer: for i in 0..pieces.len() {
            let Piece::Point(v) = &pieces[i] else { continue };
            let v = v.clone();
            for j in 0..pieces.len() {
                if i == j {
                    continue;
                }
                if let Piece::Point(w) = &pieces[j] {
                    if w.sub(&v).is_exact_zero() && i < j {
                        pieces.remove(j);
                        changed = true;
                        break 'outer;
                    }
                    continue;
                }
                // already covered by the region
                if pieces[j].member(&v)? {
                    pieces.remove(i);
                    changed = true;
                    break 'outer;
                }
                let mut absorbed = false;
                if let Piece::Region { holes, .. } = &mut pieces[j] {
                    // fill a matching point-hole, provided no other hole
                    // still excludes the point
                    if let Some(k) = holes
                        .iter()
                        .position(|h| matches!(h, Hole::Point(p) if p.sub(&v).is_exact_zero()))
                    {
                        let removed = holes.remove(k);
                        if pieces[j].member(&v)? {
                            absorbed = true;
                        } else if let Piece::Region { holes, .. } = &mut pieces[j] {
                            holes.insert(k, removed);
                        }
                    }
                }
                if !absorbed {
                    // close an open endpoint sitting exactly at the point
                    if let Piece::Region {
                        base: Base::Interval { lo, hi },
                        ..
                    } = &mut pieces[j]
                    {
                        if let Bound::At { value, open } = lo {
                            if *open && value.sub(&v).is_exact_zero() {
                                *open = false;
                                absorbed = true;
                            }
                        }
                        if !absorbed {
                            if let Bound::At { value, open } = hi {
                                if *open && value.sub(&v).is_exact_zero() {
                                    *open = false;
                                    absorbed = true;
                                }
                            }
                        }
                    }
                }
                if absorbed {
                    pieces.remove(i);
                    changed = true;
                    break 'outer;
                }
            }
        }
    }
    // merge overlapping / touching hole-free intervals
    let mut changed = true;
    while changed {
        changed = false;
        'merge: for i in 0..pieces.len() {
            for j in 0..pieces.len() {
                if i == j {
                    continue;
                }
                let (Piece::Region { base: Base::Interval { lo: l1, hi: h1 }, holes: ho1 },
                     Piece::Region { base: Base::Interval { lo: l2, hi: h2 }, holes: ho2 }) =
                    (&pieces[i], &pieces[j])
                else {
                    continue;
                };
                if !ho1.is_empty() || !ho2.is_empty() {
                    continue;
                }
                if intervals_joinable(h1, l2)? {
                    let merged = interval(l1.clone(), h2.clone());
                    let (a, b) = (i.min(j), i.max(j));
                    pieces.remove(b);
                    pieces.remove(a);
                    pieces.push(merged);
                    changed = true;
                    break 'merge;
                }
            }
        }
    }
    // drop pieces contained in other pieces
    let mut i = 0;
    while i < pieces.len() {
        let mut drop = false;
        for j in 0..pieces.len() {
            if i != j && piece_subset(&pieces[i], &pieces[j])? {
                // prefer keeping the earlier piece when both contain each
                // other (exact duplicates)
                if !(piece_subset(&pieces[j], &pieces[i])? && j > i) {
                    drop = true;
                    break;
                }
            }
        }
        if drop {
            pieces.remove(i);
        } else {
            i += 1;
        }
    }
    sort_pieces(&mut pieces)?;
    Ok(pieces)
}

/// Whether [.., hi) and (lo, ..] chain into one interval: the first ends
/// where the second begins with at least one side closed, or they
/// overlap.
fn intervals_joinable(hi: &Bound, lo: &Bound) -> Result<bool> {
    match (hi, lo) {
        (Bound::PosInf, _) | (_, Bound::NegInf) => Ok(true),
        (Bound::NegInf, _) | (_, Bound::PosInf) => Ok(false),
        (Bound::At { value: a, open: oa }, Bound::At { value: b, open: ob }) => {
            Ok(match series_cmp(b, a)? {
                std::cmp::Ordering::Less => true,
                std::cmp::Ordering::Equal => !(*oa && *ob),
                std::cmp::Ordering::Greater => false,
            })
        }
    }
}

// ---------------------------------------------------------------------------
// canonicalization entry point

/// Canonicalizes a quantifier-free one-variable field formula into a
/// Swiss-cheese union. Rejects higher arity, ac/res atoms, quantifiers,
/// and pieces whose endpoints are not exactly representable.
pub fn canonicalize(f: &Formula) -> Result<DefinableSet1> {
    let fv = free_vars(f);
    let field_vars: Vec<&Var> = fv.iter().filter(|v| v.sort == Sort::Field).collect();
    if fv.len() != field_vars.len() {
        return Err(Error::CanonicalizationFailed(
            "free residue/group variables are not supported in one-variable sets".into(),
        ));
    }
    if field_vars.len() > 1 {
        return Err(Error::CanonicalizationFailed(format!(
            "{} free variables: only n = 1 is supported (higher arity needs a cell \
             decomposition that is out of scope)",
            field_vars.len()
        )));
    }
    let var = field_vars
        .first()
        .map(|v| (*v).clone())
        .unwrap_or_else(|| Var::new("x", Sort::Field));
    let conjs = dnf(f, true)?;
    let mut all = Vec::new();
    for conj in conjs {
        // conjunct = intersection of literal regions, each a union of
        // pieces: distribute
        let mut acc: Vec<Piece> = vec![full_line()];
        for (atom, positive) in &conj {
            let lit = literal_pieces(atom, *positive, &var.name)?;
            let mut next = Vec::new();
            for p in &acc {
                for q in &lit {
                    next.extend(intersect_pieces(p, q)?);
                }
            }
            acc = next;
            if acc.is_empty() {
                break;
            }
        }
        all.extend(acc);
    }
    let pieces = merge_pieces(all)?;
    Ok(DefinableSet1 { var, pieces })
}

// ---------------------------------------------------------------------------
// formula reconstruction

fn series_term(s: &LaurentSeries) -> Term {
    Term::Series(s.clone())
}

fn ball_formula(x: &Term, center: &LaurentSeries, level: i64) -> Formula {
    // full ball incl center: x = c ∨ v(x−c) ≥ level
    let diff = Term::Sub(Box::new(x.clone()), Box::new(series_term(center)));
    let ge = Formula::Lt(
        Term::Val(Box::new(diff.clone())),
        Term::Int(BigInt::from(level), Sort::Group),
    )
    .not();
    Formula::or(Formula::Eq(x.clone(), series_term(center)), ge)
}

fn hole_formula(x: &Term, h: &Hole) -> Formula {
    match h {
        Hole::Point(p) => Formula::Eq(x.clone(), series_term(p)),
        Hole::Ball { center, level } => ball_formula(x, center, *level),
    }
}

impl DefinableSet1 {
    /// A quantifier-free formula defining the set; canonicalizing it
    /// returns the same pieces.
    pub fn to_formula(&self) -> Formula {
        let x = Term::Var(self.var.clone());
        let mut disjuncts = Vec::new();
        for p in &self.pieces {
            disjuncts.push(match p {
                Piece::Point(v) => Formula::Eq(x.clone(), series_term(v)),
                Piece::Region { base, holes } => {
                    let mut conj = Vec::new();
                    match base {
                        Base::Interval { lo, hi } => {
                            match lo {
                                Bound::NegInf => {}
                                Bound::PosInf => conj.push(Formula::False),
                                Bound::At { value, open } => {
                                    let a = Formula::Lt(series_term(value), x.clone());
                                    conj.push(if *open {
                                        a
                                    } else {
                                        Formula::Lt(x.clone(), series_term(value)).not()
                                    });
                                }
                            }
                            match hi {
                                Bound::PosInf => {}
                                Bound::NegInf => conj.push(Formula::False),
                                Bound::At { value, open } => {
                                    let a = Formula::Lt(x.clone(), series_term(value));
                                    conj.push(if *open {
                                        a
                                    } else {
                                        Formula::Lt(series_term(value), x.clone()).not()
                                    });
                                }
                            }
                        }
                        Base::Ball { center, level } => {
                            conj.push(ball_formula(&x, center, *level));
                        }
                    }
                    for h in holes {
                        conj.push(hole_formula(&x, h).not());
                    }
                    Formula::big_and(conj)
                }
            });
        }
        Formula::big_or(disjuncts)
    }
}

// ---------------------------------------------------------------------------
// closure

impl DefinableSet1 {
    /// Topological closure with the finite frontier X̄ ∖ X. Balls are
    /// clopen; intervals gain their endpoints; removed points return.
    pub fn closure_with_frontier(&self) -> Result<(DefinableSet1, Vec<LaurentSeries>)> {
        let mut out = Vec::new();
        let mut frontier: Vec<LaurentSeries> = Vec::new();
        let note = |s: &LaurentSeries, frontier: &mut Vec<LaurentSeries>| {
            if !frontier.iter().any(|q| q.sub(s).is_exact_zero()) {
                frontier.push(s.clone());
            }
        };
        for p in &self.pieces {
            match p {
                Piece::Point(v) => out.push(Piece::Point(v.clone())),
                Piece::Region { base, holes } => {
                    let mut base = base.clone();
                    if let Base::Interval { lo, hi } = &mut base {
                        if let Bound::At { value, open } = lo {
                            if *open {
                                *open = false;
                                note(value, &mut frontier);
                            }
                        }
                        if let Bound::At { value, open } = hi {
                            if *open {
                                *open = false;
                                note(value, &mut frontier);
                            }
                        }
                    }
                    let mut kept = Vec::new();
                    for h in holes {
                        match h {
                            Hole::Point(v) => note(v, &mut frontier),
                            Hole::Ball { .. } => kept.push(h.clone()),
                        }
                    }
                    out.push(Piece::Region { base, holes: kept });
                }
            }
        }
        let pieces = merge_pieces(out)?;
        let closed = DefinableSet1 { var: self.var.clone(), pieces };
        // points that were already in the set (covered by another piece)
        // are not frontier
        let mut real_frontier = Vec::new();
        for s in frontier {
            if !self.member(&s)? {
                real_frontier.push(s);
            }
        }
        Ok((closed, real_frontier))
    }

    /// Observation-style coincidence check: around each canonical piece,
    /// an order interval fits inside the valuation ball and vice versa,
    /// so both bases induce the same closure.
    pub fn topology_coincidence(&self) -> Result<bool> {
        for p in &self.pieces {
            match p {
                Piece::Point(_) => {}
                Piece::Region { base, .. } => match base {
                    Base::Ball { center, level } => {
                        let eps = LaurentSeries::monomial(BigRational::one(), *level + 1);
                        let w = topology_basis_check(center, *level, &eps)?;
                        if !(w.interval_in_ball_ok && w.ball_in_interval_ok) {
                            return Ok(false);
                        }
                    }
                    Base::Interval { lo, hi } => {
                        if let (
                            Bound::At { value: a, .. },
                            Bound::At { value: b, .. },
                        ) = (lo, hi)
                        {
                            let width = b.sub(a);
                            if width.is_exact_zero() {
                                continue;
                            }
                            let half = width.scale(&BigRational::new(
                                BigInt::one(),
                                BigInt::from(2),
                            ));
                            let mid = a.add(&half);
                            let gamma = half.val()?;
                            let w = topology_basis_check(&mid, gamma, &half)?;
                            if !(w.interval_in_ball_ok && w.ball_in_interval_ok) {
                                return Ok(false);
                            }
                        }
                    }
                },
            }
        }
        Ok(true)
    }
}

pub fn closure1(set: &DefinableSet1) -> Result<DefinableSet1> {
    Ok(set.closure_with_frontier()?.0)
}

// ---------------------------------------------------------------------------
// Borel construction tree

#[derive(Debug, Clone)]
pub enum BorelTree {
    /// A closed set, Borel as-is.
    ClosedLeaf { set: DefinableSet1 },
    /// A finite (dimension-0) set.
    FiniteLeaf { var: Var, points: Vec<LaurentSeries> },
    /// X = X̄ ∖ (X̄ ∖ X) with the frontier strictly lower-dimensional.
    Difference {
        closure: DefinableSet1,
        frontier: Box<BorelTree>,
    },
}

impl BorelTree {
    pub fn dim(&self) -> u8 {
        match self {
            BorelTree::ClosedLeaf { set } => set.dim(),
            BorelTree::FiniteLeaf { .. } => 0,
            BorelTree::Difference { closure, .. } => closure.dim(),
        }
    }

    pub fn depth(&self) -> u8 {
        match self {
            BorelTree::ClosedLeaf { .. } | BorelTree::FiniteLeaf { .. } => 1,
            BorelTree::Difference { frontier, .. } => 1 + frontier.depth(),
        }
    }

    /// Membership reconstructed from the tree alone.
    pub fn member(&self, x: &LaurentSeries) -> Result<bool> {
        match self {
            BorelTree::ClosedLeaf { set } => set.member(x),
            BorelTree::FiniteLeaf { points, .. } => {
                for p in points {
                    if p.sub(x).is_exact_zero() {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            BorelTree::Difference { closure, frontier } => {
                Ok(closure.member(x)? && !frontier.member(x)?)
            }
        }
    }

    /// Every difference node drops dimension strictly.
    pub fn strict_drop(&self) -> bool {
        match self {
            BorelTree::ClosedLeaf { .. } | BorelTree::FiniteLeaf { .. } => true,
            BorelTree::Difference { closure, frontier } => {
                frontier.dim() < closure.dim() && frontier.strict_drop()
            }
        }
    }

    pub fn render_text(&self, print: &dyn Fn(&Formula) -> String) -> String {
        fn go(
            t: &BorelTree,
            indent: usize,
            print: &dyn Fn(&Formula) -> String,
            out: &mut String,
        ) {
            let pad = "  ".repeat(indent);
            match t {
                BorelTree::ClosedLeaf { set } => {
                    out.push_str(&format!(
                        "{pad}closed-leaf dim={} {}\n",
                        set.dim(),
                        print(&set.to_formula())
                    ));
                }
                BorelTree::FiniteLeaf { var, points } => {
                    let set = DefinableSet1 {
                        var: var.clone(),
                        pieces: points.iter().cloned().map(Piece::Point).collect(),
                    };
                    out.push_str(&format!(
                        "{pad}finite-leaf dim=0 ({} points) {}\n",
                        points.len(),
                        print(&set.to_formula())
                    ));
                }
                BorelTree::Difference { closure, frontier } => {
                    out.push_str(&format!(
                        "{pad}difference dim={} closure={}\n",
                        closure.dim(),
                        print(&closure.to_formula())
                    ));
                    go(frontier, indent + 1, print, out);
                }
            }
        }
        let mut s = String::new();
        go(self, 0, print, &mut s);
        s
    }

    pub fn to_json(&self, print: &dyn Fn(&Formula) -> String) -> serde_json::Value {
        match self {
            BorelTree::ClosedLeaf { set } => serde_json::json!({
                "node": "closed-leaf",
                "dim": set.dim(),
                "set": print(&set.to_formula()),
            }),
            BorelTree::FiniteLeaf { var, points } => {
                let set = DefinableSet1 {
                    var: var.clone(),
                    pieces: points.iter().cloned().map(Piece::Point).collect(),
                };
                serde_json::json!({
                    "node": "finite-leaf",
                    "dim": 0,
                    "count": points.len(),
                    "set": print(&set.to_formula()),
                })
            }
            BorelTree::Difference { closure, frontier } => serde_json::json!({
                "node": "difference",
                "dim": closure.dim(),
                "closure": print(&closure.to_formula()),
                "frontier": frontier.to_json(print),
            }),
        }
    }
}

/// Builds the closure/difference tree: finite sets are leaves, closed
/// sets are leaves, and everything else is closure minus a finite
/// frontier (depth ≤ 2 at one variable).
pub fn borel_tree(set: &DefinableSet1) -> Result<BorelTree> {
    if set.dim() == 0 {
        let points = set
            .pieces
            .iter()
            .map(|p| match p {
                Piece::Point(v) => v.clone(),
                Piece::Region { .. } => unreachable!("dim 0 has only points"),
            })
            .collect();
        return Ok(BorelTree::FiniteLeaf { var: set.var.clone(), points });
    }
    let (closure, frontier) = set.closure_with_frontier()?;
    if frontier.is_empty() {
        return Ok(BorelTree::ClosedLeaf { set: closure });
    }
    let tree = BorelTree::Difference {
        closure,
        frontier: Box::new(BorelTree::FiniteLeaf { var: set.var.clone(), points: frontier }),
    };
    debug_assert!(tree.strict_drop());
    Ok(tree)
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn canon(text: &str) -> DefinableSet1 {
        canonicalize(&parse(text).unwrap()).unwrap()
    }

    fn ls(q: i64, e: i64) -> LaurentSeries {
        LaurentSeries::monomial(BigRational::from(BigInt::from(q)), e)
    }

    #[test]
    fn open_unit_interval() {
        let s = canon("0 < x & x < 1");
        assert_eq!(s.pieces.len(), 1);
        assert_eq!(s.dim(), 1);
        assert!(s.member(&ls(1, 2)).unwrap()); // small positive
        assert!(!s.member(&LaurentSeries::zero()).unwrap());
        assert!(!s.member(&ls(1, 0)).unwrap());
        assert!(!s.member(&ls(2, 0)).unwrap());
    }

    #[test]
    fn two_point_set() {
        let s = canon("x * x = 1");
        assert_eq!(s.pieces.len(), 2);
        assert_eq!(s.dim(), 0);
        assert!(s.member(&ls(1, 0)).unwrap());
        assert!(s.member(&ls(-1, 0)).unwrap());
        assert!(!s.member(&LaurentSeries::zero()).unwrap());
    }

    #[test]
    fn half_line() {
        let s = canon("0 < x");
        assert_eq!(s.dim(), 1);
        assert!(s.member(&ls(1, -3)).unwrap());
        assert!(!s.member(&ls(-1, 5)).unwrap());
    }

    #[test]
    fn punctured_ball() {
        // v(x) > 0 excludes 0 by the v(0) = 0 convention already
        let s = canon("0 < v(x)");
        assert_eq!(s.dim(), 1);
        assert!(s.member(&ls(1, 1)).unwrap());
        assert!(s.member(&ls(-3, 2)).unwrap());
        assert!(!s.member(&LaurentSeries::zero()).unwrap());
        assert!(!s.member(&ls(1, 0)).unwrap());
        let (cl, frontier) = s.closure_with_frontier().unwrap();
        assert_eq!(frontier.len(), 1);
        assert!(frontier[0].is_exact_zero());
        assert!(cl.member(&LaurentSeries::zero()).unwrap());
    }

    #[test]
    fn valuation_ring_minus_origin() {
        let s = canon("!(v(x) < 0) & !(x = 0)");
        assert_eq!(s.dim(), 1);
        assert!(s.member(&ls(5, 0)).unwrap());
        assert!(s.member(&ls(1, 7)).unwrap());
        assert!(!s.member(&LaurentSeries::zero()).unwrap());
        assert!(!s.member(&ls(1, -1)).unwrap());
        let tree = borel_tree(&s).unwrap();
        assert!(matches!(tree, BorelTree::Difference { .. }));
        assert!(tree.strict_drop());
        assert!(tree.depth() <= 2);
        assert!(tree.member(&ls(1, 3)).unwrap());
        assert!(!tree.member(&LaurentSeries::zero()).unwrap());
    }

    #[test]
    fn closure_of_open_interval() {
        let s = canon("0 < x & x < 1");
        let (cl, frontier) = s.closure_with_frontier().unwrap();
        assert_eq!(frontier.len(), 2);
        assert!(cl.member(&LaurentSeries::zero()).unwrap());
        assert!(cl.member(&ls(1, 0)).unwrap());
        // idempotent
        let (cl2, f2) = cl.closure_with_frontier().unwrap();
        assert_eq!(cl2, cl);
        assert!(f2.is_empty());
    }

    #[test]
    fn canonicalization_idempotent() {
        for text in [
            "0 < x & x < 1",
            "x * x = 1",
            "0 < x",
            "0 < v(x)",
            "!(v(x) < 0) & !(x = 0)",
            "v(x) = 0",
            "x * x < {1*t^2}",
            "x = 3 | (0 < x & x < 1)",
        ] {
            let s = canon(text);
            let round = canonicalize(&s.to_formula()).unwrap();
            assert_eq!(round, s, "idempotence failed for {text}");
        }
    }

    #[test]
    fn membership_matches_formula() {
        use crate::eval::{evaluate_qf, Assignment, Value};
        use crate::group::GroupMode;
        use crate::laurent::{ModelConfig, ResidueMode, Sampler};
        let cfg = ModelConfig::default();
        for text in [
            "0 < x & x < 1",
            "x * x = 1",
            "0 < v(x)",
            "!(v(x) < 0) & !(x = 0)",
            "v(x) = 0",
            "x * x < {1*t^2}",
        ] {
            let f = parse(text).unwrap();
            let s = canon(text);
            let mut sampler = Sampler::with_seed(&cfg, 11);
            for _ in 0..60 {
                let x = sampler.series();
                let mut asg = Assignment::new();
                asg.insert(Var::new("x", Sort::Field), Value::Field(x.clone())).unwrap();
                let direct = match evaluate_qf(&f, &asg, ResidueMode::RealClosed, GroupMode::Int) {
                    Ok(b) => b,
                    Err(_) => continue,
                };
                let via = match s.member(&x) {
                    Ok(b) => b,
                    Err(_) => continue,
                };
                assert_eq!(direct, via, "mismatch for {text} at sample");
            }
        }
    }

    #[test]
    fn sphere_canonical() {
        let s = canon("v(x) = 0");
        // unit sphere: ball of level 0 minus ball of level 1; the origin
        // satisfies v(0) = 0 by convention
        assert!(s.member(&ls(3, 0)).unwrap());
        assert!(s.member(&LaurentSeries::zero()).unwrap());
        assert!(!s.member(&ls(1, 1)).unwrap());
        assert!(!s.member(&ls(1, -1)).unwrap());
    }

    #[test]
    fn quadratic_ball() {
        // x² < t²  ⟺  |x| < t: an interval with series endpoints
        let s = canon("x * x < {1*t^2}");
        assert!(s.member(&ls(1, 2)).unwrap());
        assert!(s.member(&ls(-1, 2)).unwrap());
        assert!(s.member(&LaurentSeries::zero()).unwrap());
        assert!(!s.member(&ls(1, 1)).unwrap());
        assert!(!s.member(&ls(2, 1)).unwrap());
    }

    #[test]
    fn rejects_two_variables() {
        let f = parse("x < y").unwrap();
        assert!(matches!(
            canonicalize(&f),
            Err(Error::CanonicalizationFailed(_))
        ));
    }

    #[test]
    fn rejects_ac_atoms() {
        let f = parse("ac(x) = 1").unwrap();
        assert!(matches!(
            canonicalize(&f),
            Err(Error::CanonicalizationFailed(_))
        ));
    }

    #[test]
    fn topology_check_passes() {
        for text in ["0 < x & x < 1", "0 < v(x)", "v(x) = 0"] {
            let s = canon(text);
            assert!(s.topology_coincidence().unwrap(), "topology check failed for {text}");
        }
    }

    #[test]
    fn finite_leaf_tree() {
        let s = canon("x * x = 1");
        let tree = borel_tree(&s).unwrap();
        assert!(matches!(tree, BorelTree::FiniteLeaf { .. }));
        assert!(tree.member(&ls(1, 0)).unwrap());
        assert!(!tree.member(&ls(2, 0)).unwrap());
    }

    #[test]
    fn closed_leaf_tree() {
        let s = canon("!(x < 0)");
        let tree = borel_tree(&s).unwrap();
        assert!(matches!(tree, BorelTree::ClosedLeaf { .. }));
    }
}
