//! Ground-truth evaluation over the truncated-Laurent-series model and
//! the differential-testing oracle that certifies elimination outputs.

use std::collections::BTreeMap;
use std::fmt;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::Zero;

use crate::error::{Error, Result};
use crate::formula::{free_vars, has_field_quantifier, subst, Formula, Sort, Term, Var};
use crate::group::GroupMode;
use crate::laurent::{LaurentSeries, ModelConfig, ResidueMode, Sampler};
use crate::qe::Budget;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Field(LaurentSeries),
    Residue(BigRational),
    Group(i64),
}

impl Value {
    pub fn sort(&self) -> Sort {
        match self {
            Value::Field(_) => Sort::Field,
            Value::Residue(_) => Sort::Residue,
            Value::Group(_) => Sort::Group,
        }
    }

    pub fn to_term(&self) -> Term {
        match self {
            Value::Field(s) => Term::Series(s.clone()),
            Value::Residue(q) => Term::Rat(q.clone()),
            Value::Group(n) => Term::Int(BigInt::from(*n), Sort::Group),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Field(s) => write!(f, "{s}"),
            Value::Residue(q) => write!(f, "{q}"),
            Value::Group(n) => write!(f, "{n}"),
        }
    }
}

/// Sort-respecting map from variables to model elements.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Assignment(pub BTreeMap<Var, Value>);

impl Assignment {
    pub fn new() -> Assignment {
        Assignment(BTreeMap::new())
    }

    pub fn insert(&mut self, v: Var, value: Value) -> Result<()> {
        if v.sort != value.sort() {
            return Err(Error::SortError(format!(
                "assignment gives {}-sort value to {}:{}",
                value.sort(),
                v.name,
                v.sort
            )));
        }
        self.0.insert(v, value);
        Ok(())
    }

    pub fn get(&self, v: &Var) -> Option<&Value> {
        self.0.get(v)
    }

    /// Applies the assignment as a substitution.
    pub fn apply(&self, f: &Formula) -> Formula {
        let mut g = f.clone();
        for (v, value) in &self.0 {
            g = subst(&g, v, &value.to_term());
        }
        g
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, value) in &self.0 {
            if !first {
                write!(f, ", ")?;
            }
            first = false;
            write!(f, "{} = {}", v.name, value)?;
        }
        Ok(())
    }
}

/// Evaluates a field-quantifier-free formula at a total assignment.
/// Residue/group kernels (which may retain their own quantifiers) are
/// dispatched to the backend decision procedures after substitution.
pub fn evaluate_qf(
    f: &Formula,
    asg: &Assignment,
    rmode: ResidueMode,
    gmode: GroupMode,
) -> Result<bool> {
    if has_field_quantifier(f) {
        return Err(Error::EvalError("evaluate_qf requires a field-quantifier-free formula".into()));
    }
    let g = asg.apply(f);
    if let Some(v) = free_vars(&g).into_iter().next() {
        return Err(Error::EvalError(format!(
            "assignment does not cover free variable {}:{}",
            v.name, v.sort
        )));
    }
    crate::qe::decide_closed(&g, &Budget::default(), rmode, gmode)
}

#[derive(Debug, Clone)]
pub enum WitnessOutcome {
    Found(FracWitness),
    Exhausted,
}

#[derive(Debug, Clone)]
pub struct SearchBudget {
    /// coefficient numerator/denominator bound for monomial candidates
    pub coeff_bound: i64,
    /// exponent range for candidate monomials
    pub exp_min: i64,
    pub exp_max: i64,
    /// include the two-term grid stage
    pub two_term: bool,
    pub max_candidates: usize,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget { coeff_bound: 9, exp_min: -6, exp_max: 6, two_term: false, max_candidates: 4000 }
    }
}

impl SearchBudget {
    /// The escalated second-stage budget used when the eliminated output
    /// claims truth but the first stage found nothing.
    pub fn escalated() -> SearchBudget {
        SearchBudget { two_term: true, max_candidates: 20_000, ..SearchBudget::default() }
    }
}

fn candidate_coeffs(bound: i64) -> Vec<BigRational> {
    let mut out = Vec::new();
    for n in -bound..=bound {
        if n == 0 {
            continue;
        }
        for d in 1..=bound {
            let q = BigRational::new(BigInt::from(n), BigInt::from(d));
            if !out.contains(&q) {
                out.push(q);
            }
        }
    }
    out
}

/// An exact witness represented as a quotient of finite series, so
/// polynomial atoms can be certified by clearing denominators.
#[derive(Debug, Clone)]
pub struct FracWitness {
    pub num: LaurentSeries,
    pub den: LaurentSeries,
}

/// Evaluates a field-quantifier-free matrix at x = num/den exactly:
/// every ac/v(q(x)) is computed from q(num/den)·den^deg, which is a
/// polynomial in exact series.
fn eval_at_fraction(
    matrix: &Formula,
    x: &Var,
    num: &LaurentSeries,
    den: &LaurentSeries,
    asg: &Assignment,
    rmode: ResidueMode,
    gmode: GroupMode,
) -> Result<bool> {
    let g = asg.apply(matrix);
    let n = crate::qe::normalize_atoms(&g)?;
    let rewritten = crate::formula::map_terms(&n, &|t| frac_rw_term(t, &x.name, num, den));
    crate::qe::decide_closed(&rewritten, &Budget::default(), rmode, gmode)
}

fn frac_rw_term(t: &Term, x: &str, num: &LaurentSeries, den: &LaurentSeries) -> Term {
    let eval = |arg: &Term, want_val: bool| -> Option<Term> {
        let q = crate::formula::QPoly::from_term(arg)?;
        let deg = q.degree_in(x);
        if deg == 0 {
            return None;
        }
        // q(num/den)·den^deg = Σ c_i · num^i · den^(deg−i)
        let coeffs = q.coeffs_in(x);
        let mut total = LaurentSeries::zero();
        for (i, c) in coeffs.iter().enumerate() {
            let cs = crate::qe::qpoly_eval_series(c)?;
            let mut term = cs;
            term = term.mul(&num.pow(i as u32));
            term = term.mul(&den.pow((deg - i as u32) as u32));
            total = total.add(&term);
        }
        let dpow = den.pow(deg);
        if total.is_exact_zero() {
            // conventions v(0) = 0, ac(0) = 0
            return Some(if want_val {
                Term::Int(BigInt::zero(), Sort::Group)
            } else {
                Term::Rat(BigRational::zero())
            });
        }
        if want_val {
            let v = total.val().ok()? - dpow.val().ok()?;
            Some(Term::Int(BigInt::from(v), Sort::Group))
        } else {
            let a = total.ac().ok()?;
            let b = dpow.ac().ok()?;
            Some(Term::Rat(a / b))
        }
    };
    match t {
        Term::Ac(arg) => eval(arg, false).unwrap_or_else(|| t.clone()),
        Term::Val(arg) => eval(arg, true).unwrap_or_else(|| t.clone()),
        _ => t.clone(),
    }
}

/// Exact root candidates of the polynomials of x occurring in the
/// matrix after substituting the assignment, with small perturbations
/// r + q·t^γ (which stay exact fractions).
fn root_candidates(
    matrix: &Formula,
    x: &Var,
    asg: &Assignment,
) -> Vec<FracWitness> {
    let mut out: Vec<FracWitness> = Vec::new();
    let g = asg.apply(matrix);
    let n = match crate::qe::normalize_atoms(&g) {
        Ok(n) => n,
        Err(_) => return out,
    };
    let mut polys = Vec::new();
    if crate::qe::collect_x_polys(&n, &x.name, &mut polys).is_err() {
        return out;
    }
    let mut roots: Vec<FracWitness> = Vec::new();
    for q in &polys {
        let coeffs: Option<Vec<LaurentSeries>> = q
            .coeffs_in(&x.name)
            .iter()
            .map(crate::qe::qpoly_eval_series)
            .collect();
        let Some(coeffs) = coeffs else { continue };
        match coeffs.len() {
            2 => {
                let (c0, c1) = (&coeffs[0], &coeffs[1]);
                if !c1.is_exact_zero() && c1.ac().map(|a| !a.is_zero()).unwrap_or(false) {
                    roots.push(FracWitness { num: c0.neg(), den: c1.clone() });
                }
            }
            3 => {
                let (c, b, a) = (&coeffs[0], &coeffs[1], &coeffs[2]);
                if a.is_exact_zero() || a.ac().map(|x| x.is_zero()).unwrap_or(true) {
                    continue;
                }
                let d = b.mul(b).sub(&a.mul(c).scale(&BigRational::from(BigInt::from(4))));
                let two_a = a.scale(&BigRational::from(BigInt::from(2)));
                if d.is_exact_zero() {
                    roots.push(FracWitness { num: b.neg(), den: two_a });
                } else if let Some(s) = exact_monomial_sqrt(&d) {
                    roots.push(FracWitness { num: b.neg().add(&s), den: two_a.clone() });
                    roots.push(FracWitness { num: b.neg().sub(&s), den: two_a });
                }
            }
            _ => {}
        }
    }
    for r in &roots {
        out.push(r.clone());
        // perturbations r + q·t^γ = (num + q·t^γ·den)/den
        for e in -4..=6i64 {
            for k in [-1i64, 1, 2, -2] {
                let p = LaurentSeries::monomial(BigRational::from(BigInt::from(k)), e);
                out.push(FracWitness { num: r.num.add(&p.mul(&r.den)), den: r.den.clone() });
            }
        }
    }
    out
}

/// √s when s is a monomial with even exponent and a perfect-square
/// positive rational coefficient.
pub(crate) fn exact_monomial_sqrt(s: &LaurentSeries) -> Option<LaurentSeries> {
    let mut terms = s.terms();
    let (e, c) = terms.next()?;
    if terms.next().is_some() || s.prec().is_some() || e % 2 != 0 {
        return None;
    }
    let c = c.clone();
    if c < BigRational::zero() {
        return None;
    }
    let ns = c.numer().sqrt();
    let ds = c.denom().sqrt();
    if &ns * &ns != *c.numer() || &ds * &ds != *c.denom() {
        return None;
    }
    Some(LaurentSeries::monomial(BigRational::new(ns, ds), e / 2))
}

/// Sign of α + β·√D for exact rationals with D ≥ 0. Comparisons against
/// an irrational √D reduce to comparing α² with β²·D.
fn sign_ext(alpha: &BigRational, beta: &BigRational, d: &BigRational) -> i32 {
    let zero = BigRational::zero();
    let sgn = |q: &BigRational| -> i32 {
        if *q > zero {
            1
        } else if *q < zero {
            -1
        } else {
            0
        }
    };
    let sa = sgn(alpha);
    if *d == zero {
        return sa;
    }
    let sb = sgn(beta);
    if sb == 0 {
        return sa;
    }
    if sa == 0 {
        return sb;
    }
    if sa == sb {
        return sa;
    }
    sa * sgn(&(alpha * alpha - beta * beta * d))
}

/// Leading datum of a nonzero element of the quadratic extension: the
/// valuation and the angular component written as α + β·√D.
struct ExtLead {
    v: i64,
    alpha: BigRational,
    beta: BigRational,
}

/// Leading term of A + B·s where s² = d, v(s) = vs, ac(s) = √D > 0 and
/// A, B, d are exact series. `Ok(None)` means the element is exactly
/// zero. When the leading parts of A and B·s cancel, the valuation and
/// angular component are recovered from the exact conjugate product
/// A² − B²·d.
fn ext_lead(
    a: &LaurentSeries,
    b: &LaurentSeries,
    d: &LaurentSeries,
    vs: i64,
    dac: &BigRational,
) -> Option<Option<ExtLead>> {
    let za = a.is_exact_zero();
    let zb = b.is_exact_zero();
    if za && zb {
        return Some(None);
    }
    if zb {
        let (v, alpha) = (a.val().ok()?, a.ac().ok()?);
        return Some(Some(ExtLead { v, alpha, beta: BigRational::zero() }));
    }
    let (vb, acb) = (b.val().ok()? + vs, b.ac().ok()?);
    if za {
        return Some(Some(ExtLead { v: vb, alpha: BigRational::zero(), beta: acb }));
    }
    let (va, aca) = (a.val().ok()?, a.ac().ok()?);
    if va < vb {
        return Some(Some(ExtLead { v: va, alpha: aca, beta: BigRational::zero() }));
    }
    if vb < va {
        return Some(Some(ExtLead { v: vb, alpha: BigRational::zero(), beta: acb }));
    }
    if sign_ext(&aca, &acb, dac) != 0 {
        return Some(Some(ExtLead { v: va, alpha: aca, beta: acb }));
    }
    // leading cancellation: use (A + Bs)(A − Bs) = A² − B²d; the
    // conjugate cannot also cancel, its angular part is 2α ≠ 0
    let g = a.mul(a).sub(&b.mul(b).mul(d));
    if g.is_exact_zero() {
        return Some(None);
    }
    let (vg, acg) = (g.val().ok()?, g.ac().ok()?);
    let two = BigRational::from(BigInt::from(2));
    Some(Some(ExtLead { v: vg - va, alpha: acg / (two * aca), beta: BigRational::zero() }))
}

/// A root (E + f·s)/den of the solver equality, with f ∈ {−1, 0, 1}.
struct ExtRoot {
    e: LaurentSeries,
    f: i32,
    den: LaurentSeries,
}

/// Shared context for evaluating terms at an extension root.
struct ExtCtx {
    d: LaurentSeries,
    vs: i64,
    dac: BigRational,
}

/// Ground polynomial coefficients (constant first) of a term in x, with
/// every coefficient an exact series.
fn exact_coeffs_in(t: &Term, x: &Var) -> Option<Vec<LaurentSeries>> {
    let p = crate::formula::QPoly::from_term(t)?;
    let coeffs: Option<Vec<LaurentSeries>> =
        p.coeffs_in(&x.name).iter().map(crate::qe::qpoly_eval_series).collect();
    let coeffs = coeffs?;
    if coeffs.iter().any(|s| s.prec().is_some()) {
        return None;
    }
    Some(coeffs)
}

/// Leading term of q(x₀)·den for a polynomial q of degree ≤ 1 in x,
/// evaluated at the root x₀ = (E + f·s)/den.
fn ext_value_lead(
    q: &[LaurentSeries],
    root: &ExtRoot,
    ctx: &ExtCtx,
) -> Option<Option<ExtLead>> {
    let w = q.first().cloned().unwrap_or_else(LaurentSeries::zero);
    let r = q.get(1).cloned().unwrap_or_else(LaurentSeries::zero);
    if q.len() > 2 {
        return None;
    }
    let a = w.mul(&root.den).add(&r.mul(&root.e));
    let b = match root.f {
        0 => LaurentSeries::zero(),
        1 => r,
        _ => r.neg(),
    };
    ext_lead(&a, &b, &ctx.d, ctx.vs, &ctx.dac)
}

fn rational_sqrt(q: &BigRational) -> Option<BigRational> {
    if *q < BigRational::zero() {
        return None;
    }
    let ns = q.numer().sqrt();
    let ds = q.denom().sqrt();
    if &ns * &ns == *q.numer() && &ds * &ds == *q.denom() {
        Some(BigRational::new(ns, ds))
    } else {
        None
    }
}

/// Rewrites a residue/group atom by replacing v(u) and ac(u) subterms
/// whose argument mentions x with their exact values at the root. Fails
/// if x occurs outside such a map, if an argument is nonlinear in x, or
/// if an angular component falls outside the residue field.
fn ext_replace_term(t: &Term, x: &Var, root: &ExtRoot, ctx: &ExtCtx) -> Option<Term> {
    let mentions = |u: &Term| term_mentions(u, x);
    if !mentions(t) {
        return Some(t.clone());
    }
    match t {
        Term::Val(u) => {
            let q = exact_coeffs_in(u, x)?;
            let v = match ext_value_lead(&q, root, ctx)? {
                // convention v(0) = 0
                None => 0,
                Some(lead) => lead.v - root.den.val().ok()?,
            };
            Some(Term::Int(BigInt::from(v), Sort::Group))
        }
        Term::Ac(u) => {
            let q = exact_coeffs_in(u, x)?;
            let den_ac = root.den.ac().ok()?;
            let ac = match ext_value_lead(&q, root, ctx)? {
                None => BigRational::zero(),
                Some(lead) => {
                    let beta = &lead.beta / &den_ac;
                    if beta.is_zero() {
                        lead.alpha / den_ac
                    } else {
                        lead.alpha / den_ac + beta * rational_sqrt(&ctx.dac)?
                    }
                }
            };
            Some(Term::Rat(ac))
        }
        Term::Add(l, r) => Some(Term::Add(
            Box::new(ext_replace_term(l, x, root, ctx)?),
            Box::new(ext_replace_term(r, x, root, ctx)?),
        )),
        Term::Sub(l, r) => Some(Term::Sub(
            Box::new(ext_replace_term(l, x, root, ctx)?),
            Box::new(ext_replace_term(r, x, root, ctx)?),
        )),
        Term::Neg(u) => Some(Term::Neg(Box::new(ext_replace_term(u, x, root, ctx)?))),
        Term::ScalarMul(k, u) => {
            Some(Term::ScalarMul(k.clone(), Box::new(ext_replace_term(u, x, root, ctx)?)))
        }
        _ => None,
    }
}

fn term_mentions(t: &Term, x: &Var) -> bool {
    match t {
        Term::Var(v) => v == x,
        Term::Add(l, r) | Term::Sub(l, r) | Term::Mul(l, r) => {
            term_mentions(l, x) || term_mentions(r, x)
        }
        Term::Neg(u) | Term::ScalarMul(_, u) | Term::Res(u) | Term::Val(u) | Term::Ac(u) => {
            term_mentions(u, x)
        }
        _ => false,
    }
}

/// One conjunct of the matrix, classified for checking at a root.
enum ExtConstraint {
    /// q(x₀) = 0 (`negated` flips), q of degree ≤ 1 in x
    FieldEq { q: Vec<LaurentSeries>, negated: bool },
    /// 0 < q(x₀) (`negated` flips)
    FieldPos { q: Vec<LaurentSeries>, negated: bool },
    /// residue/group atom; x occurs only under v(·) / ac(·)
    Mapped(Formula),
}

/// Decides `∃x (p(x) = 0 ∧ side conditions)` exactly when the matrix is
/// a conjunction containing one polynomial equality of degree ≤ 2 in x
/// with ground exact coefficients. Solvability reduces to the henselian
/// square criterion on the discriminant d = b² − 4ac, and the roots
/// (−b ± √d)/(2a) are handled symbolically in the quadratic extension,
/// so instances whose roots have no finite series representation are
/// still settled. Side conditions may be sign or (dis)equality atoms of
/// degree ≤ 1 in x and residue/group atoms reaching x through v and ac.
fn certify_exists(
    body: &Formula,
    x: &Var,
    asg: &Assignment,
    rmode: ResidueMode,
    gmode: GroupMode,
) -> Option<bool> {
    let g = asg.apply(body);
    let mut stack = vec![&g];
    let mut conjuncts: Vec<&Formula> = Vec::new();
    while let Some(c) = stack.pop() {
        if let Formula::And(l, r) = c {
            stack.push(l);
            stack.push(r);
        } else {
            conjuncts.push(c);
        }
    }
    let empty = Assignment::new();
    let mut solver: Option<Vec<LaurentSeries>> = None;
    let mut constraints: Vec<ExtConstraint> = Vec::new();
    for c in conjuncts {
        if !free_vars(c).contains(x) {
            // ground conjunct: decide it outright
            match evaluate_qf(c, &empty, rmode, gmode) {
                Ok(true) => continue,
                Ok(false) => return Some(false),
                Err(_) => return None,
            }
        }
        let (inner, negated) = match c {
            Formula::Not(i) => (&**i, true),
            _ => (c, false),
        };
        match inner {
            Formula::Eq(l, r) => {
                if let Some(q) = exact_coeffs_in(&l.clone().sub(r.clone()), x) {
                    if !negated && solver.is_none() && q.len() >= 2 && q.len() <= 3 {
                        solver = Some(q);
                    } else if q.len() <= 2 {
                        constraints.push(ExtConstraint::FieldEq { q, negated });
                    } else {
                        return None;
                    }
                    continue;
                }
            }
            Formula::Lt(l, r) => {
                if let Some(q) = exact_coeffs_in(&r.clone().sub(l.clone()), x) {
                    if q.len() > 2 {
                        return None;
                    }
                    constraints.push(ExtConstraint::FieldPos { q, negated });
                    continue;
                }
            }
            _ => {}
        }
        match inner {
            Formula::Eq(..) | Formula::Lt(..) | Formula::Cong { .. } => {
                constraints.push(ExtConstraint::Mapped(c.clone()));
            }
            _ => return None,
        }
    }
    let mut coeffs = solver?;
    while coeffs.len() < 3 {
        coeffs.push(LaurentSeries::zero());
    }
    if coeffs.iter().any(|s| s.prec().is_some()) {
        return None;
    }
    let (c0, b, a) = (&coeffs[0], &coeffs[1], &coeffs[2]);
    let ac_nonzero = |s: &LaurentSeries| s.ac().map(|u| !u.is_zero()).unwrap_or(false);
    let zero_ctx =
        |roots: Vec<ExtRoot>| (roots, ExtCtx { d: LaurentSeries::zero(), vs: 0, dac: BigRational::zero() });
    let (roots, ctx) = if a.is_exact_zero() {
        // linear: b x + c = 0
        if b.is_exact_zero() {
            if c0.is_exact_zero() {
                // trivial equality constrains nothing
                return if constraints.is_empty() { Some(true) } else { None };
            }
            return if ac_nonzero(c0) { Some(false) } else { None };
        }
        if !ac_nonzero(b) {
            return None;
        }
        zero_ctx(vec![ExtRoot { e: c0.neg(), f: 0, den: b.clone() }])
    } else {
        if !ac_nonzero(a) {
            return None;
        }
        let two_a = a.scale(&BigRational::from(BigInt::from(2)));
        let d = b.mul(b).sub(&a.mul(c0).scale(&BigRational::from(BigInt::from(4))));
        if d.is_exact_zero() {
            zero_ctx(vec![ExtRoot { e: b.neg(), f: 0, den: two_a }])
        } else {
            let (vd, dac) = match (d.val(), d.ac()) {
                (Ok(v), Ok(u)) => (v, u),
                _ => return None,
            };
            if vd % 2 != 0 {
                return Some(false);
            }
            let square = match rmode {
                ResidueMode::RealClosed => dac > BigRational::zero(),
                ResidueMode::Rational => crate::residue::is_square_rational(&dac),
            };
            if !square {
                return Some(false);
            }
            let roots = vec![
                ExtRoot { e: b.neg(), f: 1, den: two_a.clone() },
                ExtRoot { e: b.neg(), f: -1, den: two_a },
            ];
            (roots, ExtCtx { d, vs: vd / 2, dac })
        }
    };
    let mut any_unknown = false;
    for root in &roots {
        let den_sign = match root.den.sign() {
            Ok(s) => s,
            Err(_) => return None,
        };
        let mut verdict = Some(true);
        for con in &constraints {
            let holds = match con {
                ExtConstraint::FieldEq { q, negated } => {
                    ext_value_lead(q, root, &ctx).map(|lead| lead.is_none() != *negated)
                }
                ExtConstraint::FieldPos { q, negated } => {
                    ext_value_lead(q, root, &ctx).map(|lead| {
                        let s = match lead {
                            None => 0,
                            Some(l) => sign_ext(&l.alpha, &l.beta, &ctx.dac) * den_sign,
                        };
                        (s > 0) != *negated
                    })
                }
                ExtConstraint::Mapped(f) => rewrite_atom(f, x, root, &ctx)
                    .and_then(|g| evaluate_qf(&g, &empty, rmode, gmode).ok()),
            };
            match holds {
                Some(true) => {}
                Some(false) => {
                    verdict = Some(false);
                    break;
                }
                None => verdict = None,
            }
        }
        match verdict {
            Some(true) => return Some(true),
            Some(false) => {}
            None => any_unknown = true,
        }
    }
    if any_unknown {
        None
    } else {
        Some(false)
    }
}

fn rewrite_atom(f: &Formula, x: &Var, root: &ExtRoot, ctx: &ExtCtx) -> Option<Formula> {
    match f {
        Formula::Not(i) => Some(Formula::Not(Box::new(rewrite_atom(i, x, root, ctx)?))),
        Formula::Eq(l, r) => Some(Formula::Eq(
            ext_replace_term(l, x, root, ctx)?,
            ext_replace_term(r, x, root, ctx)?,
        )),
        Formula::Lt(l, r) => Some(Formula::Lt(
            ext_replace_term(l, x, root, ctx)?,
            ext_replace_term(r, x, root, ctx)?,
        )),
        Formula::Cong { modulus, lhs, rhs } => Some(Formula::Cong {
            modulus: modulus.clone(),
            lhs: ext_replace_term(lhs, x, root, ctx)?,
            rhs: ext_replace_term(rhs, x, root, ctx)?,
        }),
        _ => None,
    }
}

/// One-sided witness search for `∃x matrix` (x field-sort): tries zero,
/// exact roots of the matrix polynomials (as series fractions), monomial
/// candidates q·t^γ, then optionally a two-term grid. `Found` guarantees
/// the matrix evaluates to true at the witness.
pub fn witness_search(
    x: &Var,
    matrix: &Formula,
    asg: &Assignment,
    budget: &SearchBudget,
    rmode: ResidueMode,
    gmode: GroupMode,
) -> Result<WitnessOutcome> {
    let mut tried = 0usize;
    let check = |cand: LaurentSeries| -> Result<Option<FracWitness>> {
        let mut a = asg.clone();
        a.insert(x.clone(), Value::Field(cand.clone()))?;
        match partial_eval(matrix, &a, budget, rmode, gmode) {
            Ok(Some(true)) => Ok(Some(FracWitness { num: cand, den: LaurentSeries::one() })),
            // indeterminate or erroring candidates are simply not witnesses
            _ => Ok(None),
        }
    };
    if let Some(w) = check(LaurentSeries::zero())? {
        return Ok(WitnessOutcome::Found(w));
    }
    if !has_field_quantifier(matrix) {
        for cand in root_candidates(matrix, x, asg) {
            tried += 1;
            if tried > budget.max_candidates {
                return Ok(WitnessOutcome::Exhausted);
            }
            if let Ok(true) =
                eval_at_fraction(matrix, x, &cand.num, &cand.den, asg, rmode, gmode)
            {
                return Ok(WitnessOutcome::Found(cand));
            }
        }
    }
    let coeffs = candidate_coeffs(budget.coeff_bound);
    for e in budget.exp_min..=budget.exp_max {
        for q in &coeffs {
            tried += 1;
            if tried > budget.max_candidates {
                return Ok(WitnessOutcome::Exhausted);
            }
            if let Some(w) = check(LaurentSeries::monomial(q.clone(), e))? {
                return Ok(WitnessOutcome::Found(w));
            }
        }
    }
    if budget.two_term {
        let small: Vec<BigRational> = [-2i64, -1, 1, 2]
            .iter()
            .map(|&n| BigRational::from(BigInt::from(n)))
            .collect();
        for e1 in -3..=3i64 {
            for e2 in (e1 + 1)..=4i64 {
                for q1 in &small {
                    for q2 in &small {
                        tried += 1;
                        if tried > budget.max_candidates {
                            return Ok(WitnessOutcome::Exhausted);
                        }
                        let cand = LaurentSeries::monomial(q1.clone(), e1)
                            .add(&LaurentSeries::monomial(q2.clone(), e2));
                        if let Some(w) = check(cand)? {
                            return Ok(WitnessOutcome::Found(w));
                        }
                    }
                }
            }
        }
    }
    Ok(WitnessOutcome::Exhausted)
}

/// Three-valued evaluation: `Some(b)` is a certified truth value, `None`
/// means the field existentials could not be confirmed within budget.
pub fn partial_eval(
    f: &Formula,
    asg: &Assignment,
    budget: &SearchBudget,
    rmode: ResidueMode,
    gmode: GroupMode,
) -> Result<Option<bool>> {
    if !has_field_quantifier(f) {
        return evaluate_qf(f, asg, rmode, gmode).map(Some);
    }
    match f {
        Formula::Exists(v, body) if v.sort == Sort::Field => {
            if let Some(b) = certify_exists(body, v, asg, rmode, gmode) {
                return Ok(Some(b));
            }
            match witness_search(v, body, asg, budget, rmode, gmode)? {
                WitnessOutcome::Found(_) => Ok(Some(true)),
                WitnessOutcome::Exhausted => Ok(None),
            }
        }
        Formula::Forall(v, body) if v.sort == Sort::Field => {
            if let Formula::Not(inner) = &**body {
                if let Some(b) = certify_exists(inner, v, asg, rmode, gmode) {
                    return Ok(Some(!b));
                }
            }
            let neg = (**body).clone().not();
            match witness_search(v, &neg, asg, budget, rmode, gmode)? {
                WitnessOutcome::Found(_) => Ok(Some(false)),
                WitnessOutcome::Exhausted => Ok(None),
            }
        }
        Formula::Not(g) => Ok(partial_eval(g, asg, budget, rmode, gmode)?.map(|b| !b)),
        Formula::And(a, b) => {
            let x = partial_eval(a, asg, budget, rmode, gmode)?;
            let y = partial_eval(b, asg, budget, rmode, gmode)?;
            Ok(match (x, y) {
                (Some(false), _) | (_, Some(false)) => Some(false),
                (Some(true), Some(true)) => Some(true),
                _ => None,
            })
        }
        Formula::Or(a, b) => {
            let x = partial_eval(a, asg, budget, rmode, gmode)?;
            let y = partial_eval(b, asg, budget, rmode, gmode)?;
            Ok(match (x, y) {
                (Some(true), _) | (_, Some(true)) => Some(true),
                (Some(false), Some(false)) => Some(false),
                _ => None,
            })
        }
        Formula::Implies(a, b) => {
            let g = Formula::or((**a).clone().not(), (**b).clone());
            partial_eval(&g, asg, budget, rmode, gmode)
        }
        // residue/group quantifier above a field quantifier: out of scope
        // for the search oracle
        _ => Ok(None),
    }
}

#[derive(Debug, Clone)]
pub enum EquivStatus {
    /// every sample certified agreement
    Consistent,
    /// no disagreement, but some existentials stayed unconfirmed
    /// (≤ 10% of samples)
    WeakPass { unconfirmed: usize },
    /// too many unconfirmed samples for any claim
    Inconclusive { unconfirmed: usize },
    Counterexample { assignment: Assignment, lhs: Option<bool>, rhs: bool },
}

#[derive(Debug, Clone)]
pub struct EquivVerdict {
    pub status: EquivStatus,
    pub samples_run: usize,
    pub unconfirmed: usize,
    /// samples skipped on evaluation errors (e.g. insufficient precision)
    pub skipped: usize,
}

impl EquivVerdict {
    pub fn is_pass(&self) -> bool {
        matches!(self.status, EquivStatus::Consistent | EquivStatus::WeakPass { .. })
    }
}

impl fmt::Display for EquivVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.status {
            EquivStatus::Consistent => {
                write!(f, "consistent, 0 counterexamples ({} samples)", self.samples_run)
            }
            EquivStatus::WeakPass { unconfirmed } => write!(
                f,
                "weak-pass: consistent with {unconfirmed} unconfirmed existentials ({} samples)",
                self.samples_run
            ),
            EquivStatus::Inconclusive { unconfirmed } => write!(
                f,
                "inconclusive: {unconfirmed} unconfirmed existentials ({} samples)",
                self.samples_run
            ),
            EquivStatus::Counterexample { assignment, lhs, rhs } => write!(
                f,
                "counterexample at [{assignment}]: input = {}, output = {rhs}",
                match lhs {
                    Some(b) => b.to_string(),
                    None => "unconfirmed".to_string(),
                }
            ),
        }
    }
}

fn sample_assignment(vars: &[Var], sampler: &mut Sampler) -> Assignment {
    let mut a = Assignment::new();
    for v in vars {
        let value = match v.sort {
            Sort::Field => Value::Field(sampler.series()),
            Sort::Residue => Value::Residue(sampler.rational()),
            Sort::Group => Value::Group(sampler.group_element()),
        };
        a.insert(v.clone(), value).expect("sorts match by construction");
    }
    a
}

/// Differential test between an input formula (field quantifiers allowed)
/// and a field-quantifier-free candidate: samples assignments to the free
/// variables and checks agreement, using the one-sided witness oracle for
/// field existentials.
pub fn differential_test(
    input: &Formula,
    output: &Formula,
    n_samples: usize,
    cfg: &ModelConfig,
    seed: u64,
    gmode: GroupMode,
) -> Result<EquivVerdict> {
    if has_field_quantifier(output) {
        return Err(Error::EvalError("differential_test output must be field-quantifier-free".into()));
    }
    let rmode = cfg.residue_mode;
    let mut vars: Vec<Var> = free_vars(input).into_iter().collect();
    for v in free_vars(output) {
        if !vars.contains(&v) {
            vars.push(v);
        }
    }
    vars.sort();
    let mut unconfirmed = 0usize;
    let mut skipped = 0usize;
    let mut samples_run = 0usize;
    let base = SearchBudget::default();
    if vars.is_empty() {
        // closed sentences: evaluation is assignment-independent, so one
        // decision settles the whole sample budget
        let asg = Assignment::new();
        let outcome = (|| -> Result<Option<(Option<bool>, bool)>> {
            let rhs = match evaluate_qf(output, &asg, rmode, gmode) {
                Ok(b) => b,
                Err(Error::InsufficientPrecision(_)) | Err(Error::ModeUnsupported(_)) => {
                    return Ok(None)
                }
                Err(e) => return Err(e),
            };
            let lhs = match partial_eval(input, &asg, &SearchBudget::escalated(), rmode, gmode) {
                Ok(v) => v,
                Err(Error::InsufficientPrecision(_)) | Err(Error::ModeUnsupported(_)) => {
                    return Ok(None)
                }
                Err(e) => return Err(e),
            };
            Ok(Some((lhs, rhs)))
        })()?;
        let status = match outcome {
            None => {
                skipped = n_samples;
                EquivStatus::Consistent
            }
            Some((lhs, rhs)) => {
                samples_run = n_samples;
                match lhs {
                    Some(b) if b != rhs => EquivStatus::Counterexample {
                        assignment: asg,
                        lhs: Some(b),
                        rhs,
                    },
                    Some(_) => EquivStatus::Consistent,
                    None if rhs => {
                        unconfirmed = n_samples;
                        EquivStatus::Inconclusive { unconfirmed }
                    }
                    None => EquivStatus::Consistent,
                }
            }
        };
        return Ok(EquivVerdict { status, samples_run, unconfirmed, skipped });
    }
    for i in 0..n_samples {
        let mut sampler = Sampler::with_seed(cfg, seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(i as u64 + 1)));
        let asg = sample_assignment(&vars, &mut sampler);
        let rhs = match evaluate_qf(output, &asg, rmode, gmode) {
            Ok(b) => b,
            Err(Error::InsufficientPrecision(_)) | Err(Error::ModeUnsupported(_)) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let lhs = match partial_eval(input, &asg, &base, rmode, gmode) {
            Ok(v) => v,
            Err(Error::InsufficientPrecision(_)) | Err(Error::ModeUnsupported(_)) => {
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        samples_run += 1;
        match lhs {
            Some(b) => {
                if b != rhs {
                    return Ok(EquivVerdict {
                        status: EquivStatus::Counterexample { assignment: asg, lhs: Some(b), rhs },
                        samples_run,
                        unconfirmed,
                        skipped,
                    });
                }
            }
            None => {
                if rhs {
                    // output claims truth: escalate the witness search
                    match partial_eval(input, &asg, &SearchBudget::escalated(), rmode, gmode)? {
                        Some(true) => {}
                        Some(false) => {
                            return Ok(EquivVerdict {
                                status: EquivStatus::Counterexample {
                                    assignment: asg,
                                    lhs: Some(false),
                                    rhs,
                                },
                                samples_run,
                                unconfirmed,
                                skipped,
                            });
                        }
                        None => unconfirmed += 1,
                    }
                }
                // output false with an unconfirmed input stays one-sided
            }
        }
    }
    let status = if unconfirmed == 0 {
        EquivStatus::Consistent
    } else if unconfirmed * 10 <= samples_run {
        EquivStatus::WeakPass { unconfirmed }
    } else {
        EquivStatus::Inconclusive { unconfirmed }
    };
    Ok(EquivVerdict { status, samples_run, unconfirmed, skipped })
}

/// Machine-readable record for corpus runs.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ReportRecord {
    pub id: String,
    pub status: String,
    pub samples: usize,
    pub unconfirmed: usize,
    pub skipped: usize,
    pub counterexample: Option<String>,
}

impl ReportRecord {
    pub fn from_verdict(id: &str, v: &EquivVerdict) -> ReportRecord {
        let (status, counterexample) = match &v.status {
            EquivStatus::Consistent => ("consistent".to_string(), None),
            EquivStatus::WeakPass { .. } => ("weak-pass".to_string(), None),
            EquivStatus::Inconclusive { .. } => ("inconclusive".to_string(), None),
            EquivStatus::Counterexample { assignment, lhs, rhs } => (
                "counterexample".to_string(),
                Some(format!(
                    "[{assignment}] input={} output={rhs}",
                    lhs.map(|b| b.to_string()).unwrap_or_else(|| "?".to_string())
                )),
            ),
        };
        ReportRecord {
            id: id.to_string(),
            status,
            samples: v.samples_run,
            unconfirmed: v.unconfirmed,
            skipped: v.skipped,
            counterexample,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{}\t{}\tsamples={}\tunconfirmed={}\t{}",
            self.id,
            self.status,
            self.samples,
            self.unconfirmed,
            self.counterexample.as_deref().unwrap_or("-")
        )
    }
}

pub fn report_json(records: &[ReportRecord]) -> String {
    serde_json::to_string_pretty(records).expect("report serialization is infallible")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse;

    fn asg(pairs: &[(&str, Value)]) -> Assignment {
        let mut a = Assignment::new();
        for (name, v) in pairs {
            let sort = v.sort();
            a.insert(Var::new(name.to_string(), sort), v.clone()).unwrap();
        }
        a
    }

    fn t_sq(k: i64, e: i64) -> LaurentSeries {
        LaurentSeries::monomial(BigRational::from(BigInt::from(k)), e)
    }

    #[test]
    fn evaluate_atoms() {
        let f = parse("ac(x) > 0").unwrap();
        let a = asg(&[("x", Value::Field(t_sq(2, 2)))]);
        assert!(evaluate_qf(&f, &a, ResidueMode::Rational, GroupMode::Int).unwrap());

        let f = parse("v(x) = 0").unwrap();
        let a = asg(&[("x", Value::Field(t_sq(1, 1)))]);
        assert!(!evaluate_qf(&f, &a, ResidueMode::Rational, GroupMode::Int).unwrap());
    }

    #[test]
    fn evaluate_group_kernel() {
        // ∃g (v(x) = g + g) at x = t²: 2 is even
        let f = parse("E g (v(x) = g + g)").unwrap();
        let a = asg(&[("x", Value::Field(t_sq(1, 2)))]);
        assert!(evaluate_qf(&f, &a, ResidueMode::Rational, GroupMode::Int).unwrap());
        let a = asg(&[("x", Value::Field(t_sq(1, 3)))]);
        assert!(!evaluate_qf(&f, &a, ResidueMode::Rational, GroupMode::Int).unwrap());
    }

    #[test]
    fn evaluate_field_order() {
        let f = parse("x < y").unwrap();
        let a = asg(&[
            ("x", Value::Field(t_sq(1, 2))),
            ("y", Value::Field(t_sq(1, 1))),
        ]);
        // t² < t (t infinitesimal positive)
        assert!(evaluate_qf(&f, &a, ResidueMode::Rational, GroupMode::Int).unwrap());
    }

    #[test]
    fn witness_square() {
        let x = Var::new("x".to_string(), Sort::Field);
        let matrix = parse("x * x = c").unwrap();
        let a = asg(&[("c", Value::Field(t_sq(1, 2)))]);
        let w = witness_search(&x, &matrix, &a, &SearchBudget::default(), ResidueMode::Rational, GroupMode::Int).unwrap();
        match w {
            WitnessOutcome::Found(s) => {
                assert_eq!(s.num.val().unwrap() - s.den.val().unwrap(), 1)
            }
            WitnessOutcome::Exhausted => panic!("expected witness t"),
        }
        // 2t² has no rational square root
        let a = asg(&[("c", Value::Field(t_sq(2, 2)))]);
        let w = witness_search(&x, &matrix, &a, &SearchBudget::default(), ResidueMode::Rational, GroupMode::Int).unwrap();
        assert!(matches!(w, WitnessOutcome::Exhausted));
    }

    #[test]
    fn witness_high_valuation() {
        let x = Var::new("x".to_string(), Sort::Field);
        let matrix = parse("c < x & v(x) > 5").unwrap();
        let a = asg(&[("c", Value::Field(t_sq(-1, 0)))]);
        let w = witness_search(&x, &matrix, &a, &SearchBudget::default(), ResidueMode::Rational, GroupMode::Int).unwrap();
        assert!(matches!(w, WitnessOutcome::Found(_)));
    }

    #[test]
    fn differential_compatibility_law() {
        let input = parse("0 < x").unwrap();
        let output = parse("0 < ac(x)").unwrap();
        let v = differential_test(&input, &output, 200, &ModelConfig::default(), 7, GroupMode::Int).unwrap();
        assert!(matches!(v.status, EquivStatus::Consistent), "{v}");
    }

    #[test]
    fn differential_linear_elimination() {
        let input = parse("E x (y * x + z = 0)").unwrap();
        let out = crate::qe::eliminate_field_quantifiers(&input, &Budget::default()).unwrap();
        let v = differential_test(&input, &out.formula, 100, &ModelConfig::default(), 11, GroupMode::Int).unwrap();
        assert!(v.is_pass(), "{v}");
        assert_eq!(v.unconfirmed, 0, "{v}");
    }

    #[test]
    fn differential_catches_corruption() {
        let input = parse("0 < x").unwrap();
        // corrupted guard: flipped comparison
        let output = parse("ac(x) < 0").unwrap();
        let v = differential_test(&input, &output, 200, &ModelConfig::default(), 7, GroupMode::Int).unwrap();
        match v.status {
            EquivStatus::Counterexample { assignment, lhs, rhs } => {
                // counterexample must re-evaluate to the reported disagreement
                let l = evaluate_qf(&input, &assignment, ResidueMode::RealClosed, GroupMode::Int).unwrap();
                let r = evaluate_qf(&output, &assignment, ResidueMode::RealClosed, GroupMode::Int).unwrap();
                assert_eq!(Some(l), lhs);
                assert_eq!(r, rhs);
                assert_ne!(l, r);
            }
            other => panic!("expected counterexample, got {other:?}"),
        }
    }

    #[test]
    fn deterministic_verdicts() {
        let input = parse("E x (x * x = c)").unwrap();
        let out = crate::qe::eliminate_field_quantifiers(&input, &Budget::default()).unwrap();
        let cfg = ModelConfig { residue_mode: ResidueMode::Rational, ..ModelConfig::default() };
        let v1 = differential_test(&input, &out.formula, 60, &cfg, 3, GroupMode::Int).unwrap();
        let v2 = differential_test(&input, &out.formula, 60, &cfg, 3, GroupMode::Int).unwrap();
        assert_eq!(format!("{v1}"), format!("{v2}"));
        assert!(v1.is_pass(), "{v1}");
    }
}
