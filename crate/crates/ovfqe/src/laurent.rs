//! Truncated formal Laurent series with exact rational coefficients.
//!
//! This is the computable carrier of the ordered henselian valued field:
//! coefficients are exact `BigRational`s, the value group is `Z` (the
//! exponent of `t`), and precision is tracked explicitly. Any query that
//! would need a digit at or beyond the precision horizon fails with
//! `InsufficientPrecision` instead of guessing.

use std::fmt;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Exact rational residue element. The model's residue field is Q; in
/// real-closed mode the same rationals are read as elements of the real
/// closure and only the decision procedures change.
pub type Residue = BigRational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ResidueMode {
    /// Exact rationals; quantifier-free evaluation plus the squareness
    /// predicate only.
    Rational,
    /// Residue sort treated as a real closed field; decisions routed
    /// through the Sturm-based backend.
    RealClosed,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ModelConfig {
    pub residue_mode: ResidueMode,
    pub default_prec: i64,
    pub sample_exp_min: i64,
    pub sample_exp_max: i64,
    pub sample_coeff_bound: i64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            residue_mode: ResidueMode::RealClosed,
            default_prec: 24,
            sample_exp_min: -6,
            sample_exp_max: 6,
            sample_coeff_bound: 9,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Parses a key=value config file. Unknown keys are rejected.
    pub fn parse(text: &str) -> Result<ModelConfig> {
        let mut cfg = ModelConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::SyntaxError {
                line: lineno + 1,
                col: 1,
                msg: format!("expected key=value, got {line:?}"),
            })?;
            let (k, v) = (k.trim(), v.trim());
            let bad = |msg: String| Error::SyntaxError { line: lineno + 1, col: 1, msg };
            match k {
                "residue_mode" => {
                    cfg.residue_mode = match v {
                        "rational" => ResidueMode::Rational,
                        "real_closed" | "real-closed" => ResidueMode::RealClosed,
                        _ => return Err(bad(format!("unknown residue_mode {v:?}"))),
                    }
                }
                "default_prec" => cfg.default_prec = v.parse().map_err(|e| bad(format!("{e}")))?,
                "sample_exp_min" => cfg.sample_exp_min = v.parse().map_err(|e| bad(format!("{e}")))?,
                "sample_exp_max" => cfg.sample_exp_max = v.parse().map_err(|e| bad(format!("{e}")))?,
                "sample_coeff_bound" => {
                    cfg.sample_coeff_bound = v.parse().map_err(|e| bad(format!("{e}")))?
                }
                "seed" => cfg.seed = v.parse().map_err(|e| bad(format!("{e}")))?,
                _ => return Err(bad(format!("unknown config key {k:?}"))),
            }
        }
        if cfg.sample_exp_min > cfg.sample_exp_max || cfg.sample_coeff_bound <= 0 {
            return Err(Error::EvalError("invalid sampler bounds".into()));
        }
        Ok(cfg)
    }
}

/// A truncated Laurent series. `coeffs[i]` is the coefficient of
/// `t^(offset+i)`. `prec = Some(p)` means exponents `>= p` are unknown;
/// `prec = None` means the series is exact (all further digits are zero).
#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct LaurentSeries {
    offset: i64,
    coeffs: Vec<BigRational>,
    prec: Option<i64>,
}

impl LaurentSeries {
    pub fn new(offset: i64, coeffs: Vec<BigRational>, prec: Option<i64>) -> LaurentSeries {
        let mut s = LaurentSeries { offset, coeffs, prec };
        s.normalize();
        s
    }

    pub fn zero() -> LaurentSeries {
        LaurentSeries { offset: 0, coeffs: vec![], prec: None }
    }

    pub fn one() -> LaurentSeries {
        LaurentSeries::from_rational(BigRational::one())
    }

    pub fn from_rational(q: BigRational) -> LaurentSeries {
        LaurentSeries::new(0, vec![q], None)
    }

    pub fn from_int(n: i64) -> LaurentSeries {
        LaurentSeries::from_rational(BigRational::from_integer(BigInt::from(n)))
    }

    /// The monomial `q * t^e`. This is also the valuation section s(e) when
    /// `q = 1`.
    pub fn monomial(q: BigRational, e: i64) -> LaurentSeries {
        LaurentSeries::new(e, vec![q], None)
    }

    pub fn prec(&self) -> Option<i64> {
        self.prec
    }

    pub fn is_exact_zero(&self) -> bool {
        self.coeffs.is_empty() && self.prec.is_none()
    }

    /// True if no nonzero digit is known and precision is finite: the
    /// series cannot be told apart from zero.
    pub fn is_indeterminate(&self) -> bool {
        self.coeffs.is_empty() && self.prec.is_some()
    }

    pub fn coeff(&self, e: i64) -> Result<BigRational> {
        if let Some(p) = self.prec {
            if e >= p {
                return Err(Error::InsufficientPrecision(format!(
                    "coefficient of t^{e} unknown (prec {p})"
                )));
            }
        }
        if e < self.offset || e - self.offset >= self.coeffs.len() as i64 {
            return Ok(BigRational::zero());
        }
        Ok(self.coeffs[(e - self.offset) as usize].clone())
    }

    fn normalize(&mut self) {
        // trim unknown tail
        if let Some(p) = self.prec {
            let known = (p - self.offset).max(0) as usize;
            self.coeffs.truncate(known);
        }
        // trim leading zeros
        let lead = self.coeffs.iter().take_while(|c| c.is_zero()).count();
        self.coeffs.drain(..lead);
        self.offset += lead as i64;
        // trim trailing zeros (they are implied)
        while matches!(self.coeffs.last(), Some(c) if c.is_zero()) {
            self.coeffs.pop();
        }
        if self.coeffs.is_empty() {
            self.offset = 0;
        }
    }

    /// Valuation, with the convention v(0) = 0 for the exact zero.
    pub fn val(&self) -> Result<i64> {
        if self.is_exact_zero() {
            return Ok(0);
        }
        if self.is_indeterminate() {
            return Err(Error::InsufficientPrecision(format!(
                "all known digits zero below prec {}",
                self.prec.unwrap()
            )));
        }
        Ok(self.offset)
    }

    /// Leading coefficient; this is the angular component for nonzero
    /// series under the monomial section s(g) = t^g.
    pub fn leading_coeff(&self) -> Result<BigRational> {
        if self.is_exact_zero() {
            return Ok(BigRational::zero());
        }
        if self.is_indeterminate() {
            return Err(Error::InsufficientPrecision("no resolvable leading digit".into()));
        }
        Ok(self.coeffs[0].clone())
    }

    /// Residue map: coefficient at t^0 when v >= 0, and 0 when v < 0.
    pub fn res(&self) -> Result<Residue> {
        if self.is_exact_zero() {
            return Ok(BigRational::zero());
        }
        if self.is_indeterminate() {
            return Err(Error::InsufficientPrecision("residue of indeterminate series".into()));
        }
        if self.offset < 0 {
            return Ok(BigRational::zero());
        }
        self.coeff(0)
    }

    /// Angular component ac(x) = res(x / t^v(x)); equals the leading
    /// coefficient, with ac(0) = 0.
    pub fn ac(&self) -> Result<Residue> {
        self.leading_coeff()
    }

    pub fn neg(&self) -> LaurentSeries {
        LaurentSeries {
            offset: self.offset,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
            prec: self.prec,
        }
    }

    pub fn add(&self, other: &LaurentSeries) -> LaurentSeries {
        let prec = match (self.prec, other.prec) {
            (None, None) => None,
            (Some(p), None) | (None, Some(p)) => Some(p),
            (Some(p), Some(q)) => Some(p.min(q)),
        };
        if self.coeffs.is_empty() && other.coeffs.is_empty() {
            return LaurentSeries { offset: 0, coeffs: vec![], prec };
        }
        let lo = match (self.coeffs.is_empty(), other.coeffs.is_empty()) {
            (true, false) => other.offset,
            (false, true) => self.offset,
            _ => self.offset.min(other.offset),
        };
        let hi = (self.offset + self.coeffs.len() as i64).max(other.offset + other.coeffs.len() as i64);
        let hi = match prec {
            Some(p) => hi.min(p),
            None => hi,
        };
        let mut coeffs = Vec::with_capacity((hi - lo).max(0) as usize);
        for e in lo..hi {
            let a = self.coeff_unchecked(e);
            let b = other.coeff_unchecked(e);
            coeffs.push(a + b);
        }
        LaurentSeries::new(lo, coeffs, prec)
    }

    fn coeff_unchecked(&self, e: i64) -> BigRational {
        if e < self.offset || e - self.offset >= self.coeffs.len() as i64 {
            BigRational::zero()
        } else {
            self.coeffs[(e - self.offset) as usize].clone()
        }
    }

    pub fn sub(&self, other: &LaurentSeries) -> LaurentSeries {
        self.add(&other.neg())
    }

    /// Lower bound on the valuation that is known without resolving a
    /// leading digit (used for multiplication precision bookkeeping).
    fn val_lower_bound(&self) -> Option<i64> {
        if !self.coeffs.is_empty() {
            Some(self.offset)
        } else {
            self.prec // all-zero up to prec: v >= prec (or exact zero)
        }
    }

    pub fn mul(&self, other: &LaurentSeries) -> LaurentSeries {
        if self.is_exact_zero() || other.is_exact_zero() {
            return LaurentSeries::zero();
        }
        // prec_result = min(prec_a + v(b), prec_b + v(a)), using known
        // lower bounds for the valuations.
        let pa = self.prec.map(|p| match other.val_lower_bound() {
            Some(vb) => p + vb,
            None => p,
        });
        let pb = other.prec.map(|p| match self.val_lower_bound() {
            Some(va) => p + va,
            None => p,
        });
        let prec = match (pa, pb) {
            (None, None) => None,
            (Some(p), None) | (None, Some(p)) => Some(p),
            (Some(p), Some(q)) => Some(p.min(q)),
        };
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return LaurentSeries { offset: 0, coeffs: vec![], prec };
        }
        let lo = self.offset + other.offset;
        let hi_full = lo + self.coeffs.len() as i64 + other.coeffs.len() as i64 - 1;
        let hi = match prec {
            Some(p) => hi_full.min(p),
            None => hi_full,
        };
        let mut coeffs = vec![BigRational::zero(); (hi - lo).max(0) as usize];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                let e = (i + j) as i64;
                if e < coeffs.len() as i64 {
                    coeffs[(i + j) as usize] += a * b;
                }
            }
        }
        LaurentSeries::new(lo, coeffs, prec)
    }

    pub fn scale(&self, q: &BigRational) -> LaurentSeries {
        if q.is_zero() {
            return LaurentSeries::zero();
        }
        LaurentSeries {
            offset: self.offset,
            coeffs: self.coeffs.iter().map(|c| c * q).collect(),
            prec: self.prec,
        }
    }

    /// Multiplicative inverse computed as a geometric expansion, truncated
    /// to `work_prec` known digits above the valuation of the result.
    pub fn inv(&self, work_prec: i64) -> Result<LaurentSeries> {
        if self.is_exact_zero() {
            return Err(Error::DivisionByZero);
        }
        if self.is_indeterminate() {
            return Err(Error::InsufficientPrecision("inverse of indeterminate series".into()));
        }
        let v = self.offset;
        let lead = self.coeffs[0].clone();
        // window of digits we can trust in the input
        let window = match self.prec {
            Some(p) => (p - v).min(work_prec),
            None => work_prec,
        };
        if window <= 0 {
            return Err(Error::InsufficientPrecision("no digits available for inverse".into()));
        }
        // self = lead * t^v * (1 + u), v(u) > 0
        let inv_lead = BigRational::one() / &lead;
        let unit = self.scale(&inv_lead); // valuation v, leading coeff 1
        // u = unit * t^-v - 1
        let mut u = LaurentSeries {
            offset: 0,
            coeffs: unit.coeffs.clone(),
            prec: unit.prec.map(|p| p - v),
        };
        u.coeffs[0] -= BigRational::one();
        let u = LaurentSeries::new(u.offset, u.coeffs, Some(window));
        // sum (-u)^k for k < window
        let mut acc = LaurentSeries::new(0, vec![BigRational::one()], Some(window));
        let mut pow = LaurentSeries::new(0, vec![BigRational::one()], Some(window));
        let neg_u = u.neg();
        if !neg_u.coeffs.is_empty() {
            let step = neg_u.offset.max(1);
            let mut k = 0;
            while k < window {
                pow = pow.mul(&neg_u);
                if pow.coeffs.is_empty() {
                    break;
                }
                acc = acc.add(&pow);
                k += step;
            }
        }
        // result = acc * t^-v / lead; exact when input exact and expansion closed
        let exact_input = self.prec.is_none();
        let expansion_closed = neg_u.coeffs.is_empty();
        let prec = if exact_input && expansion_closed { None } else { Some(window - v) };
        Ok(LaurentSeries::new(acc.offset - v, acc.coeffs, prec).scale(&inv_lead))
    }

    pub fn div(&self, other: &LaurentSeries, work_prec: i64) -> Result<LaurentSeries> {
        Ok(self.mul(&other.inv(work_prec)?))
    }

    pub fn pow(&self, n: u32) -> LaurentSeries {
        let mut acc = LaurentSeries::one();
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Truncate to the given precision.
    pub fn truncate(&self, prec: i64) -> LaurentSeries {
        let p = match self.prec {
            Some(q) => q.min(prec),
            None => prec,
        };
        LaurentSeries::new(self.offset, self.coeffs.clone(), Some(p))
    }

    /// Sign of the series: leading coefficient sign, 0 for exact zero.
    pub fn sign(&self) -> Result<i32> {
        if self.is_exact_zero() {
            return Ok(0);
        }
        let lead = self.leading_coeff()?;
        Ok(if lead.is_positive() { 1 } else { -1 })
    }

    /// Order comparison: a < b iff the leading coefficient of b - a is
    /// positive.
    pub fn lt(&self, other: &LaurentSeries) -> Result<bool> {
        Ok(other.sub(self).sign()? > 0)
    }

    /// Exact equality as field elements (difference is exact zero). An
    /// indeterminate difference is a precision fault, not "equal".
    pub fn eq_exact(&self, other: &LaurentSeries) -> Result<bool> {
        let d = self.sub(other);
        if d.is_exact_zero() {
            Ok(true)
        } else if d.is_indeterminate() {
            Err(Error::InsufficientPrecision("equality undecided at current precision".into()))
        } else {
            Ok(false)
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, &BigRational)> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(move |(i, c)| (self.offset + i as i64, c))
    }
}

impl fmt::Display for LaurentSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        let mut first = true;
        for (e, c) in self.terms() {
            if !first {
                write!(f, ", ")?;
            }
            first = false;
            write!(f, "{}*t^{}", c, e)?;
        }
        if first {
            write!(f, "0")?;
        }
        if let Some(p) = self.prec {
            write!(f, "; prec={}", p)?;
        }
        write!(f, "}}")
    }
}

/// Univariate polynomial with series coefficients, for Hensel lifting.
/// `coeffs[i]` is the coefficient of X^i.
#[derive(Debug, Clone)]
pub struct SeriesPoly {
    pub coeffs: Vec<LaurentSeries>,
}

impl SeriesPoly {
    pub fn new(coeffs: Vec<LaurentSeries>) -> SeriesPoly {
        SeriesPoly { coeffs }
    }

    pub fn eval(&self, x: &LaurentSeries) -> LaurentSeries {
        let mut acc = LaurentSeries::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(x).add(c);
        }
        acc
    }

    pub fn derivative(&self) -> SeriesPoly {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| c.scale(&BigRational::from_integer(BigInt::from(i))))
            .collect();
        SeriesPoly { coeffs }
    }

    /// Reduction mod the maximal ideal: rational polynomial of residues.
    /// Requires all coefficients in the valuation ring.
    pub fn residue_poly(&self) -> Result<Vec<BigRational>> {
        self.coeffs
            .iter()
            .map(|c| {
                if !c.is_exact_zero() && c.val()? < 0 {
                    return Err(Error::EvalError("coefficient outside valuation ring".into()));
                }
                c.res()
            })
            .collect()
    }
}

fn eval_rat_poly(p: &[BigRational], x: &BigRational) -> BigRational {
    let mut acc = BigRational::zero();
    for c in p.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

/// Diagnostics from a Hensel lift: valuation of the residual after each
/// Newton step, for the quadratic-convergence assertion.
#[derive(Debug, Clone)]
pub struct HenselReport {
    pub root: LaurentSeries,
    pub residual_vals: Vec<i64>,
}

/// Lifts a simple residue root u0 of f to an actual root to the requested
/// precision, by Newton iteration. Requires f coefficients in O_v,
/// f̄(u0) = 0 and f̄'(u0) ≠ 0.
pub fn hensel_lift(f: &SeriesPoly, u0: &Residue, target_prec: i64) -> Result<HenselReport> {
    let fbar = f.residue_poly()?;
    let fbar_d = f.derivative().residue_poly()?;
    if !eval_rat_poly(&fbar, u0).is_zero() {
        return Err(Error::NotSimpleRoot("value at residue point is nonzero".into()));
    }
    if eval_rat_poly(&fbar_d, u0).is_zero() {
        return Err(Error::NotSimpleRoot("derivative vanishes at residue root".into()));
    }
    let work = target_prec + 2;
    let fd = f.derivative();
    let mut a = LaurentSeries::from_rational(u0.clone()).truncate(work);
    let mut residual_vals = Vec::new();
    let max_iter = (64 - (target_prec.max(1) as u64).leading_zeros() as i64) + 2;
    for _ in 0..=max_iter {
        let fa = f.eval(&a);
        if fa.is_exact_zero() {
            residual_vals.push(target_prec);
            break;
        }
        let v = match fa.val() {
            Ok(v) => v,
            // residual vanished to working precision
            Err(_) => {
                residual_vals.push(fa.prec().unwrap_or(target_prec));
                break;
            }
        };
        residual_vals.push(v);
        if v >= target_prec {
            break;
        }
        let step = fa.div(&fd.eval(&a), work)?;
        a = a.sub(&step).truncate(work);
    }
    match residual_vals.last() {
        Some(&v) if v >= target_prec => {}
        _ => {
            return Err(Error::EvalError(format!(
                "hensel iteration did not reach target precision {target_prec}"
            )))
        }
    }
    Ok(HenselReport { root: a.truncate(target_prec), residual_vals })
}

/// Witnesses for Observation 2.1: the interval and ball bases refine each
/// other around a point.
#[derive(Debug, Clone)]
pub struct TopologyWitness {
    /// Half-width eps with (c - eps, c + eps) contained in the ball
    /// {x : v(x - c) > gamma}.
    pub interval_in_ball_eps: LaurentSeries,
    /// Ball level delta with {x : v(x - c) > delta} contained in
    /// (c - eps, c + eps) for the given eps.
    pub ball_in_interval_level: i64,
    pub interval_in_ball_ok: bool,
    pub ball_in_interval_ok: bool,
}

/// For a center and ball radius gamma, produces an order interval inside
/// the valuation ball and a ball inside a given order interval, checking
/// the defining inequalities symbolically.
pub fn topology_basis_check(
    center: &LaurentSeries,
    gamma: i64,
    interval_eps: &LaurentSeries,
) -> Result<TopologyWitness> {
    if center.is_indeterminate() {
        return Err(Error::InsufficientPrecision("indeterminate center".into()));
    }
    // choose eps = t^(gamma+1): every |x - c| < eps has v(x - c) >= gamma+1 > gamma
    let eps = LaurentSeries::monomial(BigRational::one(), gamma + 1);
    // containment check: v(eps) > gamma and eps > 0
    let interval_in_ball_ok = eps.val()? > gamma && eps.sign()? > 0;
    // for the given interval half-width, the ball of level v(eps') works:
    // v(d) > v(eps') implies |d| < eps' for positive eps'
    let level = interval_eps.val()?;
    let ball_in_interval_ok = interval_eps.sign()? > 0;
    Ok(TopologyWitness {
        interval_in_ball_eps: eps,
        ball_in_interval_level: level,
        interval_in_ball_ok,
        ball_in_interval_ok,
    })
}

/// Seeded sampler for random series, residues and group elements.
pub struct Sampler {
    rng: ChaCha8Rng,
    cfg: ModelConfig,
}

impl Sampler {
    pub fn new(cfg: &ModelConfig) -> Sampler {
        Sampler { rng: ChaCha8Rng::seed_from_u64(cfg.seed), cfg: cfg.clone() }
    }

    pub fn with_seed(cfg: &ModelConfig, seed: u64) -> Sampler {
        Sampler { rng: ChaCha8Rng::seed_from_u64(seed), cfg: cfg.clone() }
    }

    pub fn rational(&mut self) -> BigRational {
        let b = self.cfg.sample_coeff_bound;
        let num = self.rng.gen_range(-b..=b);
        let den = self.rng.gen_range(1..=b);
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    pub fn nonzero_rational(&mut self) -> BigRational {
        loop {
            let q = self.rational();
            if !q.is_zero() {
                return q;
            }
        }
    }

    pub fn group_element(&mut self) -> i64 {
        self.rng.gen_range(self.cfg.sample_exp_min..=self.cfg.sample_exp_max)
    }

    /// A random nonzero series with 1..=3 terms and exact precision.
    pub fn nonzero_series(&mut self) -> LaurentSeries {
        let nterms = self.rng.gen_range(1..=3usize);
        let lo = self.rng.gen_range(self.cfg.sample_exp_min..=self.cfg.sample_exp_max);
        let mut s = LaurentSeries::monomial(self.nonzero_rational(), lo);
        let mut e = lo;
        for _ in 1..nterms {
            e += self.rng.gen_range(1..=3i64);
            s = s.add(&LaurentSeries::monomial(self.nonzero_rational(), e));
        }
        s
    }

    /// A random series, occasionally zero.
    pub fn series(&mut self) -> LaurentSeries {
        if self.rng.gen_range(0..10) == 0 {
            LaurentSeries::zero()
        } else {
            self.nonzero_series()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn t_pow(e: i64) -> LaurentSeries {
        LaurentSeries::monomial(BigRational::one(), e)
    }

    #[test]
    fn val_of_polynomial() {
        // t^2 + t^3
        let s = t_pow(2).add(&t_pow(3));
        assert_eq!(s.val().unwrap(), 2);
    }

    #[test]
    fn val_of_zero_is_zero() {
        assert_eq!(LaurentSeries::zero().val().unwrap(), 0);
    }

    #[test]
    fn indeterminate_val_fails() {
        let s = LaurentSeries::new(0, vec![], Some(5));
        assert!(matches!(s.val(), Err(Error::InsufficientPrecision(_))));
    }

    #[test]
    fn res_examples() {
        let one_plus_t = LaurentSeries::one().add(&t_pow(1));
        assert_eq!(one_plus_t.res().unwrap(), BigRational::one());
        assert_eq!(t_pow(-1).res().unwrap(), BigRational::zero());
        assert_eq!(t_pow(2).res().unwrap(), BigRational::zero());
    }

    #[test]
    fn ac_examples() {
        assert_eq!(t_pow(2).ac().unwrap(), BigRational::one());
        assert_eq!(t_pow(2).scale(&rat(2, 1)).ac().unwrap(), rat(2, 1));
        // -3 t^-1 + 5
        let s = t_pow(-1).scale(&rat(-3, 1)).add(&LaurentSeries::from_int(5));
        assert_eq!(s.ac().unwrap(), rat(-3, 1));
        assert_eq!(LaurentSeries::zero().ac().unwrap(), BigRational::zero());
    }

    #[test]
    fn order_examples() {
        let t = t_pow(1);
        assert!(LaurentSeries::zero().lt(&t).unwrap());
        for n in [1i64, 2, 10, 1000, 1_000_000] {
            let inv_n = LaurentSeries::from_rational(rat(1, n));
            assert!(t.lt(&inv_n).unwrap(), "t < 1/{n}");
        }
        // 2t^2 < t
        assert!(t_pow(2).scale(&rat(2, 1)).lt(&t).unwrap());
    }

    #[test]
    fn mul_and_inv() {
        let one = LaurentSeries::one();
        let a = one.add(&t_pow(1)); // 1 + t
        let b = one.sub(&t_pow(1)); // 1 - t
        let prod = a.mul(&b);
        assert!(prod.eq_exact(&one.sub(&t_pow(2))).unwrap());

        let inv = b.inv(8).unwrap();
        // 1 + t + t^2 + ... up to prec
        for e in 0..8 {
            assert_eq!(inv.coeff(e).unwrap(), BigRational::one(), "coeff t^{e}");
        }
        assert!(matches!(LaurentSeries::zero().inv(8), Err(Error::DivisionByZero)));
    }

    #[test]
    fn precision_truncation_forces_failure() {
        // (t - t) with artificial finite precision
        let d = t_pow(1).sub(&t_pow(1)).truncate(5);
        assert!(matches!(d.val(), Err(Error::InsufficientPrecision(_))));
    }

    #[test]
    fn mul_precision_rule() {
        // a known to prec 3, b = t^2 exact: product digits known to 3 + 2
        let a = LaurentSeries::one().truncate(3);
        let b = t_pow(2);
        assert_eq!(a.mul(&b).prec(), Some(5));
    }

    #[test]
    fn hensel_sqrt_of_one_plus_t() {
        // f = X^2 - (1+t), u0 = 1
        let f = SeriesPoly::new(vec![
            LaurentSeries::one().add(&t_pow(1)).neg(),
            LaurentSeries::zero(),
            LaurentSeries::one(),
        ]);
        let rep = hensel_lift(&f, &BigRational::one(), 12).unwrap();
        let a = &rep.root;
        assert_eq!(a.coeff(0).unwrap(), BigRational::one());
        assert_eq!(a.coeff(1).unwrap(), rat(1, 2));
        assert_eq!(a.coeff(2).unwrap(), rat(-1, 8));
        // residual valuation >= target, verified by direct substitution
        let resid = f.eval(a);
        assert!(resid.is_indeterminate() || resid.val().unwrap() >= 12);
        // quadratic gain per iteration
        for w in rep.residual_vals.windows(2) {
            assert!(w[1] >= (2 * w[0]).min(12), "gain {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn hensel_linear_and_failure_cases() {
        // f = X - c
        let c = t_pow(1).scale(&rat(3, 1));
        let f = SeriesPoly::new(vec![c.neg(), LaurentSeries::one()]);
        let rep = hensel_lift(&f, &BigRational::zero(), 10).unwrap();
        assert!(rep.root.sub(&c).is_indeterminate() || rep.root.eq_exact(&c).unwrap());
        // f = X^2, u0 = 0: derivative vanishes
        let f2 = SeriesPoly::new(vec![
            LaurentSeries::zero(),
            LaurentSeries::zero(),
            LaurentSeries::one(),
        ]);
        assert!(matches!(hensel_lift(&f2, &BigRational::zero(), 4), Err(Error::NotSimpleRoot(_))));
    }

    #[test]
    fn topology_witnesses() {
        let w = topology_basis_check(&LaurentSeries::zero(), 0, &t_pow(3)).unwrap();
        assert!(w.interval_in_ball_ok);
        assert!(w.ball_in_interval_ok);
        assert_eq!(w.interval_in_ball_eps.val().unwrap(), 1);
        assert_eq!(w.ball_in_interval_level, 3);
        for gamma in -10..=10 {
            let w = topology_basis_check(&LaurentSeries::one(), gamma, &t_pow(gamma + 2)).unwrap();
            assert!(w.interval_in_ball_ok && w.ball_in_interval_ok);
        }
    }

    #[test]
    fn sampler_determinism() {
        let cfg = ModelConfig::default();
        let mut s1 = Sampler::with_seed(&cfg, 42);
        let mut s2 = Sampler::with_seed(&cfg, 42);
        for _ in 0..50 {
            assert_eq!(s1.series(), s2.series());
        }
    }

    #[test]
    fn config_parsing() {
        let cfg = ModelConfig::parse(
            "residue_mode = rational\ndefault_prec = 16\nseed = 7\n# comment\n",
        )
        .unwrap();
        assert_eq!(cfg.residue_mode, ResidueMode::Rational);
        assert_eq!(cfg.default_prec, 16);
        assert_eq!(cfg.seed, 7);
        assert!(ModelConfig::parse("bogus = 1").is_err());
    }
}
