//! Three-sorted abstract syntax: field sort (ordered ring language),
//! residue sort (ordered ring language) and group sort (ordered group
//! language), connected by the maps res, v and ac from the field sort.
//!
//! Congruence atoms (`Cong`) and the squareness predicate (`Sq`) are
//! internal extensions of the group and residue languages. They never
//! occur in user input; they only appear inside eliminated kernels and
//! are flagged in reports.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};

use crate::laurent::LaurentSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub enum Sort {
    Field,
    Residue,
    Group,
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Field => write!(f, "f"),
            Sort::Residue => write!(f, "r"),
            Sort::Group => write!(f, "s"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var {
    pub name: String,
    pub sort: Sort,
}

impl Var {
    pub fn new(name: impl Into<String>, sort: Sort) -> Var {
        Var { name: name.into(), sort }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Var(Var),
    /// Integer literal. Field and residue literals are ring elements;
    /// group literals are model-specific constants of the integer value
    /// group (bare L_og only provides 0).
    Int(BigInt, Sort),
    /// Rational literal in the residue sort (images of ac on concrete
    /// parameters).
    Rat(BigRational),
    /// Concrete series literal in the field sort.
    Series(LaurentSeries),
    Add(Box<Term>, Box<Term>),
    Sub(Box<Term>, Box<Term>),
    Mul(Box<Term>, Box<Term>),
    Neg(Box<Term>),
    /// Integer scaling n*z in the group sort, sugar for iterated addition.
    ScalarMul(BigInt, Box<Term>),
    Res(Box<Term>),
    Val(Box<Term>),
    Ac(Box<Term>),
}

impl Term {
    pub fn var(name: impl Into<String>, sort: Sort) -> Term {
        Term::Var(Var::new(name, sort))
    }

    pub fn int(n: i64, sort: Sort) -> Term {
        Term::Int(BigInt::from(n), sort)
    }

    pub fn add(self, other: Term) -> Term {
        Term::Add(Box::new(self), Box::new(other))
    }

    pub fn sub(self, other: Term) -> Term {
        Term::Sub(Box::new(self), Box::new(other))
    }

    pub fn mul(self, other: Term) -> Term {
        Term::Mul(Box::new(self), Box::new(other))
    }

    pub fn neg(self) -> Term {
        Term::Neg(Box::new(self))
    }

    pub fn res_of(self) -> Term {
        Term::Res(Box::new(self))
    }

    pub fn val_of(self) -> Term {
        Term::Val(Box::new(self))
    }

    pub fn ac_of(self) -> Term {
        Term::Ac(Box::new(self))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Eq(Term, Term),
    Lt(Term, Term),
    /// lhs ≡ rhs (mod m), group sort. Internal extension.
    Cong { modulus: BigInt, lhs: Term, rhs: Term },
    /// "is a square in the residue field", residue sort. Internal
    /// extension used by rational-mode elimination.
    Sq(Term),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Exists(Var, Box<Formula>),
    Forall(Var, Box<Formula>),
}

impl Formula {
    pub fn not(self) -> Formula {
        Formula::Not(Box::new(self))
    }

    pub fn and(self, other: Formula) -> Formula {
        match (self, other) {
            (Formula::True, g) => g,
            (f, Formula::True) => f,
            (Formula::False, _) | (_, Formula::False) => Formula::False,
            (f, g) => Formula::And(Box::new(f), Box::new(g)),
        }
    }

    pub fn or(self, other: Formula) -> Formula {
        match (self, other) {
            (Formula::False, g) => g,
            (f, Formula::False) => f,
            (Formula::True, _) | (_, Formula::True) => Formula::True,
            (f, g) => Formula::Or(Box::new(f), Box::new(g)),
        }
    }

    pub fn implies(self, other: Formula) -> Formula {
        Formula::Implies(Box::new(self), Box::new(other))
    }

    pub fn exists(v: Var, body: Formula) -> Formula {
        Formula::Exists(v, Box::new(body))
    }

    pub fn forall(v: Var, body: Formula) -> Formula {
        Formula::Forall(v, Box::new(body))
    }

    pub fn big_or(parts: impl IntoIterator<Item = Formula>) -> Formula {
        parts.into_iter().fold(Formula::False, Formula::or)
    }

    pub fn big_and(parts: impl IntoIterator<Item = Formula>) -> Formula {
        parts.into_iter().fold(Formula::True, Formula::and)
    }
}

/// One sort-discipline violation, with a path into the AST.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortViolation {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortReport {
    pub violations: Vec<SortViolation>,
}

impl SortReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Sort of a term, or a violation naming the offending subterm.
pub fn sort_of_term(t: &Term) -> Result<Sort, SortViolation> {
    sort_of_term_at(t, "")
}

fn violation(path: &str, msg: impl Into<String>) -> SortViolation {
    SortViolation { path: path.to_string(), message: msg.into() }
}

fn sort_of_term_at(t: &Term, path: &str) -> Result<Sort, SortViolation> {
    match t {
        Term::Var(v) => Ok(v.sort),
        Term::Int(_, s) => Ok(*s),
        Term::Rat(_) => Ok(Sort::Residue),
        Term::Series(_) => Ok(Sort::Field),
        Term::Add(a, b) | Term::Sub(a, b) => {
            let sa = sort_of_term_at(a, &format!("{path}.lhs"))?;
            let sb = sort_of_term_at(b, &format!("{path}.rhs"))?;
            if sa != sb {
                return Err(violation(path, format!("addition mixes sorts {sa} and {sb}")));
            }
            Ok(sa)
        }
        Term::Mul(a, b) => {
            let sa = sort_of_term_at(a, &format!("{path}.lhs"))?;
            let sb = sort_of_term_at(b, &format!("{path}.rhs"))?;
            if sa != sb {
                return Err(violation(path, format!("multiplication mixes sorts {sa} and {sb}")));
            }
            if sa == Sort::Group {
                return Err(violation(path, "group sort has no multiplication"));
            }
            Ok(sa)
        }
        Term::Neg(a) => sort_of_term_at(a, &format!("{path}.arg")),
        Term::ScalarMul(_, a) => {
            let s = sort_of_term_at(a, &format!("{path}.arg"))?;
            if s != Sort::Group {
                return Err(violation(path, "integer scaling applies to group terms only"));
            }
            Ok(Sort::Group)
        }
        Term::Res(a) => {
            let s = sort_of_term_at(a, &format!("{path}.arg"))?;
            if s != Sort::Field {
                return Err(violation(path, format!("res applied to {s} term")));
            }
            Ok(Sort::Residue)
        }
        Term::Val(a) => {
            let s = sort_of_term_at(a, &format!("{path}.arg"))?;
            if s != Sort::Field {
                return Err(violation(path, format!("v applied to {s} term")));
            }
            Ok(Sort::Group)
        }
        Term::Ac(a) => {
            let s = sort_of_term_at(a, &format!("{path}.arg"))?;
            if s != Sort::Field {
                return Err(violation(path, format!("ac applied to {s} term")));
            }
            Ok(Sort::Residue)
        }
    }
}

/// Checks every sort invariant; violations are data, not faults.
pub fn check_sorts(f: &Formula) -> SortReport {
    let mut violations = Vec::new();
    check_formula(f, "", &mut violations);
    SortReport { violations }
}

fn check_formula(f: &Formula, path: &str, out: &mut Vec<SortViolation>) {
    match f {
        Formula::True | Formula::False => {}
        Formula::Eq(a, b) | Formula::Lt(a, b) => {
            let sa = sort_of_term_at(a, &format!("{path}.lhs"));
            let sb = sort_of_term_at(b, &format!("{path}.rhs"));
            match (sa, sb) {
                (Ok(sa), Ok(sb)) if sa != sb => {
                    out.push(violation(path, format!("{sa} compared with {sb}: sort mismatch")));
                }
                (Ok(_), Ok(_)) => {}
                (Err(v), _) | (_, Err(v)) => out.push(v),
            }
        }
        Formula::Cong { lhs, rhs, .. } => {
            for (t, side) in [(lhs, "lhs"), (rhs, "rhs")] {
                match sort_of_term_at(t, &format!("{path}.{side}")) {
                    Ok(Sort::Group) => {}
                    Ok(s) => out.push(violation(path, format!("congruence on {s} term"))),
                    Err(v) => out.push(v),
                }
            }
        }
        Formula::Sq(t) => match sort_of_term_at(t, &format!("{path}.arg")) {
            Ok(Sort::Residue) => {}
            Ok(s) => out.push(violation(path, format!("sq applied to {s} term"))),
            Err(v) => out.push(v),
        },
        Formula::Not(g) => check_formula(g, &format!("{path}.not"), out),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            check_formula(a, &format!("{path}.lhs"), out);
            check_formula(b, &format!("{path}.rhs"), out);
        }
        Formula::Exists(_, body) | Formula::Forall(_, body) => {
            check_formula(body, &format!("{path}.body"), out);
        }
    }
}

pub fn free_vars(f: &Formula) -> BTreeSet<Var> {
    let mut acc = BTreeSet::new();
    collect_free(f, &mut BTreeSet::new(), &mut acc);
    acc
}

fn collect_free(f: &Formula, bound: &mut BTreeSet<Var>, acc: &mut BTreeSet<Var>) {
    match f {
        Formula::True | Formula::False => {}
        Formula::Eq(a, b) | Formula::Lt(a, b) => {
            term_free(a, bound, acc);
            term_free(b, bound, acc);
        }
        Formula::Cong { lhs, rhs, .. } => {
            term_free(lhs, bound, acc);
            term_free(rhs, bound, acc);
        }
        Formula::Sq(t) => term_free(t, bound, acc),
        Formula::Not(g) => collect_free(g, bound, acc),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            collect_free(a, bound, acc);
            collect_free(b, bound, acc);
        }
        Formula::Exists(v, body) | Formula::Forall(v, body) => {
            let fresh = bound.insert(v.clone());
            collect_free(body, bound, acc);
            if fresh {
                bound.remove(v);
            }
        }
    }
}

pub fn term_vars(t: &Term) -> BTreeSet<Var> {
    let mut acc = BTreeSet::new();
    term_free(t, &BTreeSet::new(), &mut acc);
    acc
}

fn term_free(t: &Term, bound: &BTreeSet<Var>, acc: &mut BTreeSet<Var>) {
    match t {
        Term::Var(v) => {
            if !bound.contains(v) {
                acc.insert(v.clone());
            }
        }
        Term::Int(..) | Term::Rat(_) | Term::Series(_) => {}
        Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) => {
            term_free(a, bound, acc);
            term_free(b, bound, acc);
        }
        Term::Neg(a) | Term::ScalarMul(_, a) | Term::Res(a) | Term::Val(a) | Term::Ac(a) => {
            term_free(a, bound, acc)
        }
    }
}

/// Substitutes a term for every free occurrence of a variable,
/// alpha-renaming bound variables that would capture.
pub fn subst(f: &Formula, var: &Var, replacement: &Term) -> Formula {
    let repl_vars = term_vars(replacement);
    subst_inner(f, var, replacement, &repl_vars)
}

fn subst_inner(f: &Formula, var: &Var, repl: &Term, repl_vars: &BTreeSet<Var>) -> Formula {
    match f {
        Formula::True | Formula::False => f.clone(),
        Formula::Eq(a, b) => Formula::Eq(subst_term(a, var, repl), subst_term(b, var, repl)),
        Formula::Lt(a, b) => Formula::Lt(subst_term(a, var, repl), subst_term(b, var, repl)),
        Formula::Cong { modulus, lhs, rhs } => Formula::Cong {
            modulus: modulus.clone(),
            lhs: subst_term(lhs, var, repl),
            rhs: subst_term(rhs, var, repl),
        },
        Formula::Sq(t) => Formula::Sq(subst_term(t, var, repl)),
        Formula::Not(g) => subst_inner(g, var, repl, repl_vars).not(),
        Formula::And(a, b) => Formula::And(
            Box::new(subst_inner(a, var, repl, repl_vars)),
            Box::new(subst_inner(b, var, repl, repl_vars)),
        ),
        Formula::Or(a, b) => Formula::Or(
            Box::new(subst_inner(a, var, repl, repl_vars)),
            Box::new(subst_inner(b, var, repl, repl_vars)),
        ),
        Formula::Implies(a, b) => Formula::Implies(
            Box::new(subst_inner(a, var, repl, repl_vars)),
            Box::new(subst_inner(b, var, repl, repl_vars)),
        ),
        Formula::Exists(v, body) | Formula::Forall(v, body) => {
            let is_exists = matches!(f, Formula::Exists(..));
            if v == var {
                return f.clone();
            }
            let (v2, body2) = if repl_vars.contains(v) {
                // rename the binder away from the replacement's variables
                let mut n = 0;
                let fresh = loop {
                    let cand = Var::new(format!("{}_{}", v.name, n), v.sort);
                    if !repl_vars.contains(&cand) && cand != *var {
                        break cand;
                    }
                    n += 1;
                };
                let renamed = subst_inner(body, v, &Term::Var(fresh.clone()), &BTreeSet::new());
                (fresh, renamed)
            } else {
                (v.clone(), (**body).clone())
            };
            let new_body = subst_inner(&body2, var, repl, repl_vars);
            if is_exists {
                Formula::exists(v2, new_body)
            } else {
                Formula::forall(v2, new_body)
            }
        }
    }
}

pub fn subst_term(t: &Term, var: &Var, repl: &Term) -> Term {
    match t {
        Term::Var(v) if v == var => repl.clone(),
        Term::Var(_) | Term::Int(..) | Term::Rat(_) | Term::Series(_) => t.clone(),
        Term::Add(a, b) => subst_term(a, var, repl).add(subst_term(b, var, repl)),
        Term::Sub(a, b) => subst_term(a, var, repl).sub(subst_term(b, var, repl)),
        Term::Mul(a, b) => subst_term(a, var, repl).mul(subst_term(b, var, repl)),
        Term::Neg(a) => subst_term(a, var, repl).neg(),
        Term::ScalarMul(n, a) => Term::ScalarMul(n.clone(), Box::new(subst_term(a, var, repl))),
        Term::Res(a) => subst_term(a, var, repl).res_of(),
        Term::Val(a) => subst_term(a, var, repl).val_of(),
        Term::Ac(a) => subst_term(a, var, repl).ac_of(),
    }
}

/// Alpha-equivalence, by comparing with binder indices.
pub fn alpha_eq(f: &Formula, g: &Formula) -> bool {
    alpha_eq_inner(f, g, &mut Vec::new(), &mut Vec::new())
}

fn alpha_eq_inner(f: &Formula, g: &Formula, bf: &mut Vec<Var>, bg: &mut Vec<Var>) -> bool {
    match (f, g) {
        (Formula::True, Formula::True) | (Formula::False, Formula::False) => true,
        (Formula::Eq(a, b), Formula::Eq(c, d)) | (Formula::Lt(a, b), Formula::Lt(c, d)) => {
            term_alpha_eq(a, c, bf, bg) && term_alpha_eq(b, d, bf, bg)
        }
        (
            Formula::Cong { modulus: m1, lhs: a, rhs: b },
            Formula::Cong { modulus: m2, lhs: c, rhs: d },
        ) => m1 == m2 && term_alpha_eq(a, c, bf, bg) && term_alpha_eq(b, d, bf, bg),
        (Formula::Sq(a), Formula::Sq(b)) => term_alpha_eq(a, b, bf, bg),
        (Formula::Not(a), Formula::Not(b)) => alpha_eq_inner(a, b, bf, bg),
        (Formula::And(a, b), Formula::And(c, d))
        | (Formula::Or(a, b), Formula::Or(c, d))
        | (Formula::Implies(a, b), Formula::Implies(c, d)) => {
            alpha_eq_inner(a, c, bf, bg) && alpha_eq_inner(b, d, bf, bg)
        }
        (Formula::Exists(v, a), Formula::Exists(w, b))
        | (Formula::Forall(v, a), Formula::Forall(w, b)) => {
            if v.sort != w.sort {
                return false;
            }
            bf.push(v.clone());
            bg.push(w.clone());
            let r = alpha_eq_inner(a, b, bf, bg);
            bf.pop();
            bg.pop();
            r
        }
        _ => false,
    }
}

fn term_alpha_eq(s: &Term, t: &Term, bf: &[Var], bg: &[Var]) -> bool {
    match (s, t) {
        (Term::Var(v), Term::Var(w)) => {
            let iv = bf.iter().rposition(|b| b == v);
            let iw = bg.iter().rposition(|b| b == w);
            match (iv, iw) {
                (Some(i), Some(j)) => i == j,
                (None, None) => v == w,
                _ => false,
            }
        }
        (Term::Int(a, s1), Term::Int(b, s2)) => a == b && s1 == s2,
        (Term::Rat(a), Term::Rat(b)) => a == b,
        (Term::Series(a), Term::Series(b)) => a == b,
        (Term::Add(a, b), Term::Add(c, d))
        | (Term::Sub(a, b), Term::Sub(c, d))
        | (Term::Mul(a, b), Term::Mul(c, d)) => {
            term_alpha_eq(a, c, bf, bg) && term_alpha_eq(b, d, bf, bg)
        }
        (Term::Neg(a), Term::Neg(b))
        | (Term::Res(a), Term::Res(b))
        | (Term::Val(a), Term::Val(b))
        | (Term::Ac(a), Term::Ac(b)) => term_alpha_eq(a, b, bf, bg),
        (Term::ScalarMul(n, a), Term::ScalarMul(m, b)) => n == m && term_alpha_eq(a, b, bf, bg),
        _ => false,
    }
}

// ---------------------------------------------------------------------------
// Integer polynomials in field variables and field constants, expanded
// multivariate normal form: sorted monomials with exact coefficients.
// Equality of special decompositions is equality of these normal forms.
// ---------------------------------------------------------------------------

/// An indeterminate of a q-polynomial: a free field variable or a concrete
/// series parameter.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PolyAtom {
    Var(String),
    Param(LaurentSeries),
}

impl PolyAtom {
    fn cmp_key(&self) -> (u8, String) {
        match self {
            PolyAtom::Var(n) => (0, n.clone()),
            PolyAtom::Param(s) => (1, format!("{s}")),
        }
    }
}

impl PartialOrd for LaurentSeries {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LaurentSeries {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        format!("{self}").cmp(&format!("{other}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Monomial(pub BTreeMap<PolyAtom, u32>);

impl Monomial {
    pub fn one() -> Monomial {
        Monomial(BTreeMap::new())
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut m = self.0.clone();
        for (a, e) in &other.0 {
            *m.entry(a.clone()).or_insert(0) += e;
        }
        Monomial(m)
    }

    pub fn degree_in(&self, name: &str) -> u32 {
        self.0.get(&PolyAtom::Var(name.to_string())).copied().unwrap_or(0)
    }
}

/// Polynomial over Z in field variables and parameters, expanded normal
/// form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct QPoly(pub BTreeMap<Monomial, BigInt>);

impl QPoly {
    pub fn zero() -> QPoly {
        QPoly(BTreeMap::new())
    }

    pub fn constant(n: BigInt) -> QPoly {
        let mut p = QPoly::zero();
        if !n.is_zero() {
            p.0.insert(Monomial::one(), n);
        }
        p
    }

    pub fn var(name: &str) -> QPoly {
        let mut m = Monomial::one();
        m.0.insert(PolyAtom::Var(name.to_string()), 1);
        let mut p = QPoly::zero();
        p.0.insert(m, BigInt::one());
        p
    }

    pub fn param(s: LaurentSeries) -> QPoly {
        let mut m = Monomial::one();
        m.0.insert(PolyAtom::Param(s), 1);
        let mut p = QPoly::zero();
        p.0.insert(m, BigInt::one());
        p
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn add(&self, other: &QPoly) -> QPoly {
        let mut out = self.0.clone();
        for (m, c) in &other.0 {
            let e = out.entry(m.clone()).or_insert_with(BigInt::zero);
            *e += c;
            if e.is_zero() {
                out.remove(m);
            }
        }
        QPoly(out)
    }

    pub fn neg(&self) -> QPoly {
        QPoly(self.0.iter().map(|(m, c)| (m.clone(), -c)).collect())
    }

    pub fn sub(&self, other: &QPoly) -> QPoly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &QPoly) -> QPoly {
        let mut out: BTreeMap<Monomial, BigInt> = BTreeMap::new();
        for (m1, c1) in &self.0 {
            for (m2, c2) in &other.0 {
                let m = m1.mul(m2);
                let e = out.entry(m.clone()).or_insert_with(BigInt::zero);
                *e += c1 * c2;
                if e.is_zero() {
                    out.remove(&m);
                }
            }
        }
        QPoly(out)
    }

    pub fn scale(&self, k: &BigInt) -> QPoly {
        if k.is_zero() {
            return QPoly::zero();
        }
        QPoly(self.0.iter().map(|(m, c)| (m.clone(), c * k)).collect())
    }

    pub fn degree_in(&self, name: &str) -> u32 {
        self.0.keys().map(|m| m.degree_in(name)).max().unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.0.keys().map(|m| m.0.values().sum::<u32>()).max().unwrap_or(0)
    }

    /// Coefficients of this polynomial viewed as univariate in `name`:
    /// result[i] is the coefficient q-polynomial of name^i.
    pub fn coeffs_in(&self, name: &str) -> Vec<QPoly> {
        let d = self.degree_in(name) as usize;
        let mut out = vec![QPoly::zero(); d + 1];
        let key = PolyAtom::Var(name.to_string());
        for (m, c) in &self.0 {
            let e = m.0.get(&key).copied().unwrap_or(0) as usize;
            let mut rest = m.clone();
            rest.0.remove(&key);
            let mut p = QPoly::zero();
            p.0.insert(rest, c.clone());
            out[e] = out[e].add(&p);
        }
        out
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for m in self.0.keys() {
            for a in m.0.keys() {
                if let PolyAtom::Var(n) = a {
                    out.insert(n.clone());
                }
            }
        }
        out
    }

    pub fn params(&self) -> Vec<LaurentSeries> {
        let mut out = Vec::new();
        for m in self.0.keys() {
            for a in m.0.keys() {
                if let PolyAtom::Param(s) = a {
                    if !out.contains(s) {
                        out.push(s.clone());
                    }
                }
            }
        }
        out
    }

    /// Renders the normal form back into a field-sort term. Monomials in
    /// sorted order; deterministic output.
    pub fn to_term(&self) -> Term {
        if self.is_zero() {
            return Term::Int(BigInt::zero(), Sort::Field);
        }
        let mut acc: Option<Term> = None;
        for (m, c) in &self.0 {
            let mut factors: Vec<Term> = Vec::new();
            let mut atoms: Vec<_> = m.0.iter().collect();
            atoms.sort_by_key(|(a, _)| a.cmp_key());
            for (a, e) in atoms {
                let base = match a {
                    PolyAtom::Var(n) => Term::var(n.clone(), Sort::Field),
                    PolyAtom::Param(s) => Term::Series(s.clone()),
                };
                for _ in 0..*e {
                    factors.push(base.clone());
                }
            }
            let mut mono: Option<Term> = None;
            let abs = c.abs();
            if abs != BigInt::one() || factors.is_empty() {
                mono = Some(Term::Int(abs.clone(), Sort::Field));
            }
            for f in factors {
                mono = Some(match mono {
                    Some(t) => t.mul(f),
                    None => f,
                });
            }
            let mut mono = mono.unwrap();
            if c.is_negative() {
                mono = mono.neg();
            }
            acc = Some(match acc {
                Some(t) => t.add(mono),
                None => mono,
            });
        }
        acc.unwrap()
    }

    /// Converts a field-sort term into expanded normal form. Fails on
    /// non-polynomial constructs (res/v/ac inside, non-field sorts).
    pub fn from_term(t: &Term) -> Option<QPoly> {
        match t {
            Term::Var(v) if v.sort == Sort::Field => Some(QPoly::var(&v.name)),
            Term::Var(_) => None,
            Term::Int(n, Sort::Field) => Some(QPoly::constant(n.clone())),
            Term::Int(..) | Term::Rat(_) => None,
            Term::Series(s) => Some(QPoly::param(s.clone())),
            Term::Add(a, b) => Some(QPoly::from_term(a)?.add(&QPoly::from_term(b)?)),
            Term::Sub(a, b) => Some(QPoly::from_term(a)?.sub(&QPoly::from_term(b)?)),
            Term::Mul(a, b) => Some(QPoly::from_term(a)?.mul(&QPoly::from_term(b)?)),
            Term::Neg(a) => Some(QPoly::from_term(a)?.neg()),
            Term::ScalarMul(..) | Term::Res(_) | Term::Val(_) | Term::Ac(_) => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Special formulas and the Pas normal form
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecialKind {
    RSpecial,
    SSpecial,
}

/// Witness that a formula is a special r- or s-formula: the polynomials
/// q_1..q_k and the pure one-sorted kernel with placeholder variables
/// `u$0..` (residue) or `v$0..` (group).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecialDecomposition {
    pub kind: SpecialKind,
    pub kernel: Formula,
    pub polys: Vec<QPoly>,
}

impl SpecialDecomposition {
    fn placeholder(kind: SpecialKind, i: usize) -> Var {
        match kind {
            SpecialKind::RSpecial => Var::new(format!("u${i}"), Sort::Residue),
            SpecialKind::SSpecial => Var::new(format!("v${i}"), Sort::Group),
        }
    }

    /// Re-substitutes ac(q_i) / v(q_i) for the kernel placeholders,
    /// reproducing the (normalized) original formula.
    pub fn resubstitute(&self) -> Formula {
        let mut f = self.kernel.clone();
        for (i, q) in self.polys.iter().enumerate() {
            let ph = Self::placeholder(self.kind, i);
            let image = match self.kind {
                SpecialKind::RSpecial => q.to_term().ac_of(),
                SpecialKind::SSpecial => q.to_term().val_of(),
            };
            f = subst(&f, &ph, &image);
        }
        f
    }
}

struct SpecialCtx {
    kind: Option<SpecialKind>,
    polys: Vec<QPoly>,
    failed: bool,
}

impl SpecialCtx {
    fn register(&mut self, kind: SpecialKind, q: QPoly) -> Option<usize> {
        match self.kind {
            None => self.kind = Some(kind),
            Some(k) if k != kind => {
                self.failed = true;
                return None;
            }
            Some(_) => {}
        }
        if let Some(i) = self.polys.iter().position(|p| p == &q) {
            Some(i)
        } else {
            self.polys.push(q);
            Some(self.polys.len() - 1)
        }
    }
}

/// Recognizes special r-/s-formulas. Returns the decomposition, or `None`
/// when the formula does not match the pattern (mixed kernels, field
/// access outside ac/v, field quantifiers).
pub fn classify_special(f: &Formula) -> Option<SpecialDecomposition> {
    let mut ctx = SpecialCtx { kind: None, polys: Vec::new(), failed: false };
    let kernel = special_formula(f, &mut ctx)?;
    if ctx.failed {
        return None;
    }
    // A formula with no field access: pick the kind by kernel sort.
    let kind = match ctx.kind {
        Some(k) => k,
        None => match kernel_sort(&kernel) {
            Some(Sort::Residue) | None => SpecialKind::RSpecial,
            Some(Sort::Group) => SpecialKind::SSpecial,
            Some(Sort::Field) => return None,
        },
    };
    // the kernel must be one-sorted in the matching sort
    let expect = match kind {
        SpecialKind::RSpecial => Sort::Residue,
        SpecialKind::SSpecial => Sort::Group,
    };
    match kernel_sort(&kernel) {
        None => {}
        Some(s) if s == expect => {}
        Some(_) => return None,
    }
    Some(SpecialDecomposition { kind, kernel, polys: ctx.polys })
}

/// The unique sort of atoms occurring in a formula, if consistent.
/// `None` when the formula has no atoms (pure true/false skeleton).
fn kernel_sort(f: &Formula) -> Option<Sort> {
    fn walk(f: &Formula, acc: &mut BTreeSet<Sort>) {
        match f {
            Formula::True | Formula::False => {}
            Formula::Eq(a, _) | Formula::Lt(a, _) => {
                if let Ok(s) = sort_of_term(a) {
                    acc.insert(s);
                }
            }
            Formula::Cong { .. } => {
                acc.insert(Sort::Group);
            }
            Formula::Sq(_) => {
                acc.insert(Sort::Residue);
            }
            Formula::Not(g) => walk(g, acc),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                walk(a, acc);
                walk(b, acc);
            }
            Formula::Exists(v, body) | Formula::Forall(v, body) => {
                acc.insert(v.sort);
                walk(body, acc);
            }
        }
    }
    let mut sorts = BTreeSet::new();
    walk(f, &mut sorts);
    if sorts.len() > 1 {
        // report Field so callers reject mixed kernels
        Some(Sort::Field)
    } else {
        sorts.into_iter().next()
    }
}

fn special_formula(f: &Formula, ctx: &mut SpecialCtx) -> Option<Formula> {
    match f {
        Formula::True | Formula::False => Some(f.clone()),
        Formula::Eq(a, b) => {
            Some(Formula::Eq(special_term(a, ctx)?, special_term(b, ctx)?))
        }
        Formula::Lt(a, b) => Some(Formula::Lt(special_term(a, ctx)?, special_term(b, ctx)?)),
        Formula::Cong { modulus, lhs, rhs } => Some(Formula::Cong {
            modulus: modulus.clone(),
            lhs: special_term(lhs, ctx)?,
            rhs: special_term(rhs, ctx)?,
        }),
        Formula::Sq(t) => Some(Formula::Sq(special_term(t, ctx)?)),
        Formula::Not(g) => Some(special_formula(g, ctx)?.not()),
        Formula::And(a, b) => {
            Some(Formula::And(Box::new(special_formula(a, ctx)?), Box::new(special_formula(b, ctx)?)))
        }
        Formula::Or(a, b) => {
            Some(Formula::Or(Box::new(special_formula(a, ctx)?), Box::new(special_formula(b, ctx)?)))
        }
        Formula::Implies(a, b) => Some(Formula::Implies(
            Box::new(special_formula(a, ctx)?),
            Box::new(special_formula(b, ctx)?),
        )),
        Formula::Exists(v, body) | Formula::Forall(v, body) => {
            if v.sort == Sort::Field {
                return None;
            }
            let inner = special_formula(body, ctx)?;
            Some(if matches!(f, Formula::Exists(..)) {
                Formula::exists(v.clone(), inner)
            } else {
                Formula::forall(v.clone(), inner)
            })
        }
    }
}

fn special_term(t: &Term, ctx: &mut SpecialCtx) -> Option<Term> {
    match t {
        Term::Ac(arg) => {
            let q = QPoly::from_term(arg)?;
            let i = ctx.register(SpecialKind::RSpecial, q)?;
            Some(Term::Var(SpecialDecomposition::placeholder(SpecialKind::RSpecial, i)))
        }
        Term::Val(arg) => {
            let q = QPoly::from_term(arg)?;
            let i = ctx.register(SpecialKind::SSpecial, q)?;
            Some(Term::Var(SpecialDecomposition::placeholder(SpecialKind::SSpecial, i)))
        }
        Term::Res(_) => None,
        Term::Var(v) if v.sort == Sort::Field => None,
        Term::Var(_) | Term::Int(..) | Term::Rat(_) => Some(t.clone()),
        Term::Series(_) => None,
        Term::Add(a, b) => Some(special_term(a, ctx)?.add(special_term(b, ctx)?)),
        Term::Sub(a, b) => Some(special_term(a, ctx)?.sub(special_term(b, ctx)?)),
        Term::Mul(a, b) => Some(special_term(a, ctx)?.mul(special_term(b, ctx)?)),
        Term::Neg(a) => Some(special_term(a, ctx)?.neg()),
        Term::ScalarMul(n, a) => {
            Some(Term::ScalarMul(n.clone(), Box::new(special_term(a, ctx)?)))
        }
    }
}

/// Witness of Theorem-3.4 shape: a finite disjunction of conjunctions of a
/// special r-formula and a special s-formula. The empty disjunction
/// (N = 0) is admitted and stands for "false".
#[derive(Debug, Clone)]
pub struct PasDecomposition {
    pub pairs: Vec<(SpecialDecomposition, SpecialDecomposition)>,
}

impl PasDecomposition {
    pub fn n(&self) -> usize {
        self.pairs.len()
    }
}

fn flatten_or(f: &Formula, out: &mut Vec<Formula>) {
    match f {
        Formula::Or(a, b) => {
            flatten_or(a, out);
            flatten_or(b, out);
        }
        Formula::False => {}
        _ => out.push(f.clone()),
    }
}

fn flatten_and(f: &Formula, out: &mut Vec<Formula>) {
    match f {
        Formula::And(a, b) => {
            flatten_and(a, out);
            flatten_and(b, out);
        }
        Formula::True => {}
        _ => out.push(f.clone()),
    }
}

/// Tests whether the formula is literally in Pas normal form and returns
/// the decomposition. Each disjunct must split into special r-conjuncts
/// and special s-conjuncts; true/false count as empty specials.
pub fn in_pas_normal_form(f: &Formula) -> Option<PasDecomposition> {
    if matches!(f, Formula::True) {
        let t = classify_special(&Formula::True).unwrap();
        return Some(PasDecomposition { pairs: vec![(t.clone(), t)] });
    }
    let mut disjuncts = Vec::new();
    flatten_or(f, &mut disjuncts);
    let mut pairs = Vec::new();
    for d in &disjuncts {
        let mut conjuncts = Vec::new();
        flatten_and(d, &mut conjuncts);
        let mut r_parts: Vec<Formula> = Vec::new();
        let mut s_parts: Vec<Formula> = Vec::new();
        for c in &conjuncts {
            let dec = classify_special(c)?;
            match dec.kind {
                SpecialKind::RSpecial => r_parts.push(c.clone()),
                SpecialKind::SSpecial => s_parts.push(c.clone()),
            }
        }
        let psi = Formula::big_and(r_parts);
        let theta = Formula::big_and(s_parts);
        let psi_dec = classify_special(&psi)?;
        let theta_dec = classify_special(&theta)?;
        // the grouped parts must still be one-sorted specials of the right kind
        if !matches!(psi, Formula::True) && psi_dec.kind != SpecialKind::RSpecial {
            return None;
        }
        if !matches!(theta, Formula::True) && theta_dec.kind != SpecialKind::SSpecial {
            return None;
        }
        pairs.push((psi_dec, theta_dec));
    }
    Some(PasDecomposition { pairs })
}

/// Rewrites every ac/v argument into polynomial expanded normal form, so
/// decomposition round-trips are exact AST equality.
pub fn normalize_field_args(f: &Formula) -> Formula {
    map_terms(f, &|t| match t {
        Term::Ac(arg) => match QPoly::from_term(arg) {
            Some(q) => q.to_term().ac_of(),
            None => t.clone(),
        },
        Term::Val(arg) => match QPoly::from_term(arg) {
            Some(q) => q.to_term().val_of(),
            None => t.clone(),
        },
        _ => t.clone(),
    })
}

/// Applies a bottom-up term rewriter to every term in the formula.
pub fn map_terms(f: &Formula, rw: &impl Fn(&Term) -> Term) -> Formula {
    fn term_walk(t: &Term, rw: &impl Fn(&Term) -> Term) -> Term {
        let rebuilt = match t {
            Term::Var(_) | Term::Int(..) | Term::Rat(_) | Term::Series(_) => t.clone(),
            Term::Add(a, b) => term_walk(a, rw).add(term_walk(b, rw)),
            Term::Sub(a, b) => term_walk(a, rw).sub(term_walk(b, rw)),
            Term::Mul(a, b) => term_walk(a, rw).mul(term_walk(b, rw)),
            Term::Neg(a) => term_walk(a, rw).neg(),
            Term::ScalarMul(n, a) => Term::ScalarMul(n.clone(), Box::new(term_walk(a, rw))),
            Term::Res(a) => term_walk(a, rw).res_of(),
            Term::Val(a) => term_walk(a, rw).val_of(),
            Term::Ac(a) => term_walk(a, rw).ac_of(),
        };
        rw(&rebuilt)
    }
    match f {
        Formula::True | Formula::False => f.clone(),
        Formula::Eq(a, b) => Formula::Eq(term_walk(a, rw), term_walk(b, rw)),
        Formula::Lt(a, b) => Formula::Lt(term_walk(a, rw), term_walk(b, rw)),
        Formula::Cong { modulus, lhs, rhs } => Formula::Cong {
            modulus: modulus.clone(),
            lhs: term_walk(lhs, rw),
            rhs: term_walk(rhs, rw),
        },
        Formula::Sq(t) => Formula::Sq(term_walk(t, rw)),
        Formula::Not(g) => map_terms(g, rw).not(),
        Formula::And(a, b) => Formula::And(Box::new(map_terms(a, rw)), Box::new(map_terms(b, rw))),
        Formula::Or(a, b) => Formula::Or(Box::new(map_terms(a, rw)), Box::new(map_terms(b, rw))),
        Formula::Implies(a, b) => {
            Formula::Implies(Box::new(map_terms(a, rw)), Box::new(map_terms(b, rw)))
        }
        Formula::Exists(v, body) => Formula::exists(v.clone(), map_terms(body, rw)),
        Formula::Forall(v, body) => Formula::forall(v.clone(), map_terms(body, rw)),
    }
}

/// True if the formula contains a field-sort quantifier.
pub fn has_field_quantifier(f: &Formula) -> bool {
    match f {
        Formula::True | Formula::False | Formula::Eq(..) | Formula::Lt(..)
        | Formula::Cong { .. } | Formula::Sq(_) => false,
        Formula::Not(g) => has_field_quantifier(g),
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            has_field_quantifier(a) || has_field_quantifier(b)
        }
        Formula::Exists(v, body) | Formula::Forall(v, body) => {
            v.sort == Sort::Field || has_field_quantifier(body)
        }
    }
}

/// Field-sort constants (series literals) occurring anywhere in the
/// formula, with a flag for whether each occurrence sits under ac or v.
pub fn field_constants_outside_ac_v(f: &Formula) -> Vec<LaurentSeries> {
    let mut out = Vec::new();
    fn term_scan(t: &Term, shielded: bool, out: &mut Vec<LaurentSeries>) {
        match t {
            Term::Series(s) => {
                if !shielded && !out.contains(s) {
                    out.push(s.clone());
                }
            }
            Term::Var(_) | Term::Int(..) | Term::Rat(_) => {}
            Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) => {
                term_scan(a, shielded, out);
                term_scan(b, shielded, out);
            }
            Term::Neg(a) | Term::ScalarMul(_, a) => term_scan(a, shielded, out),
            Term::Res(a) => term_scan(a, shielded, out),
            Term::Val(a) | Term::Ac(a) => term_scan(a, true, out),
        }
    }
    fn walk(f: &Formula, out: &mut Vec<LaurentSeries>) {
        match f {
            Formula::True | Formula::False => {}
            Formula::Eq(a, b) | Formula::Lt(a, b) => {
                term_scan(a, false, out);
                term_scan(b, false, out);
            }
            Formula::Cong { lhs, rhs, .. } => {
                term_scan(lhs, false, out);
                term_scan(rhs, false, out);
            }
            Formula::Sq(t) => term_scan(t, false, out),
            Formula::Not(g) => walk(g, out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                walk(a, out);
                walk(b, out);
            }
            Formula::Exists(_, b) | Formula::Forall(_, b) => walk(b, out),
        }
    }
    walk(f, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::One;

    fn x() -> Term {
        Term::var("x", Sort::Field)
    }

    #[test]
    fn sorts_ok_and_violations() {
        // v(x) < 0_s
        let f = Formula::Lt(x().val_of(), Term::int(0, Sort::Group));
        assert!(check_sorts(&f).ok());

        // ac(x) = x : residue vs field
        let f = Formula::Eq(x().ac_of(), x());
        let rep = check_sorts(&f);
        assert!(!rep.ok());
        assert!(rep.violations[0].message.contains("sort mismatch"));

        // res(v(x)) : res applied to group term
        let f = Formula::Eq(x().val_of().res_of(), Term::int(0, Sort::Residue));
        let rep = check_sorts(&f);
        assert!(!rep.ok());
        assert!(rep.violations[0].message.contains("res applied to s term"));
    }

    #[test]
    fn classify_r_special() {
        // ac(x*x - 1) > 0
        let q = x().mul(x()).sub(Term::int(1, Sort::Field));
        let f = Formula::Lt(Term::int(0, Sort::Residue), q.clone().ac_of());
        let dec = classify_special(&f).expect("special");
        assert_eq!(dec.kind, SpecialKind::RSpecial);
        assert_eq!(dec.polys.len(), 1);
        let expected = QPoly::from_term(&q).unwrap();
        assert_eq!(dec.polys[0], expected);
        // round trip: resubstitution reproduces the normalized input
        let back = dec.resubstitute();
        assert_eq!(back, normalize_field_args(&f));
    }

    #[test]
    fn classify_s_special() {
        // v(x) + v(x) = z
        let f = Formula::Eq(
            x().val_of().add(x().val_of()),
            Term::var("gz", Sort::Group),
        );
        let dec = classify_special(&f).expect("special");
        assert_eq!(dec.kind, SpecialKind::SSpecial);
        assert_eq!(dec.polys.len(), 1);
        assert_eq!(dec.polys[0], QPoly::var("x"));
    }

    #[test]
    fn mixed_sorts_not_special() {
        // ac(x) > 0 ∧ v(x) = 0: conjunction of specials, not itself special
        let f = Formula::Lt(Term::int(0, Sort::Residue), x().ac_of())
            .and(Formula::Eq(x().val_of(), Term::int(0, Sort::Group)));
        assert!(classify_special(&f).is_none());
    }

    #[test]
    fn pas_normal_form_shape() {
        let r1 = Formula::Lt(Term::int(0, Sort::Residue), x().ac_of());
        let s1 = Formula::Eq(x().val_of(), Term::int(0, Sort::Group));
        let r2 = Formula::Lt(x().ac_of(), Term::int(0, Sort::Residue));
        let s2 = Formula::Lt(Term::int(0, Sort::Group), x().val_of());
        let f = (r1.clone().and(s1.clone())).or(r2.and(s2));
        let dec = in_pas_normal_form(&f).expect("in shape");
        assert_eq!(dec.n(), 2);

        // field quantifier: not in shape
        let g = Formula::exists(Var::new("x", Sort::Field), r1.clone());
        assert!(in_pas_normal_form(&g).is_none());

        // bare field atom: not in shape
        let h = Formula::Lt(Term::int(0, Sort::Field), x());
        assert!(in_pas_normal_form(&h).is_none());

        // empty disjunction (false) admitted with N = 0
        assert_eq!(in_pas_normal_form(&Formula::False).unwrap().n(), 0);
    }

    #[test]
    fn pas_closed_under_disjunction() {
        let r1 = Formula::Lt(Term::int(0, Sort::Residue), x().ac_of());
        let s1 = Formula::Eq(x().val_of(), Term::int(0, Sort::Group));
        let f = r1.clone().and(s1.clone());
        let g = f.clone().or(f.clone());
        let n_f = in_pas_normal_form(&f).unwrap().n();
        let n_g = in_pas_normal_form(&g).unwrap().n();
        assert_eq!(n_g, 2 * n_f);
    }

    #[test]
    fn qpoly_normal_form() {
        // (x+1)*(x-1) == x^2 - 1
        let a = QPoly::var("x").add(&QPoly::constant(BigInt::one()));
        let b = QPoly::var("x").sub(&QPoly::constant(BigInt::one()));
        let p = a.mul(&b);
        let q = QPoly::var("x").mul(&QPoly::var("x")).sub(&QPoly::constant(BigInt::one()));
        assert_eq!(p, q);
        assert_eq!(p.degree_in("x"), 2);
        // to_term/from_term round trip through normal form
        assert_eq!(QPoly::from_term(&p.to_term()).unwrap(), p);
    }

    #[test]
    fn subst_capture_avoidance() {
        // (E u (u = w))[w := u]  must rename the binder
        let u = Var::new("u", Sort::Residue);
        let w = Var::new("w", Sort::Residue);
        let f = Formula::exists(u.clone(), Formula::Eq(Term::Var(u.clone()), Term::Var(w.clone())));
        let g = subst(&f, &w, &Term::Var(u.clone()));
        if let Formula::Exists(v2, body) = &g {
            assert_ne!(v2, &u);
            assert_eq!(**body, Formula::Eq(Term::Var(v2.clone()), Term::Var(u.clone())));
        } else {
            panic!("expected exists");
        }
    }

    #[test]
    fn alpha_equivalence() {
        let u = Var::new("u", Sort::Residue);
        let w = Var::new("w", Sort::Residue);
        let f = Formula::exists(u.clone(), Formula::Lt(Term::Var(u.clone()), Term::int(1, Sort::Residue)));
        let g = Formula::exists(w.clone(), Formula::Lt(Term::Var(w.clone()), Term::int(1, Sort::Residue)));
        assert!(alpha_eq(&f, &g));
        let h = Formula::exists(w.clone(), Formula::Lt(Term::int(1, Sort::Residue), Term::Var(w)));
        assert!(!alpha_eq(&f, &h));
    }

    #[test]
    fn check_sorts_stable_under_substitution() {
        let f = Formula::Lt(x().val_of(), Term::var("g1", Sort::Group));
        assert!(check_sorts(&f).ok());
        let repl = x().mul(x()).add(Term::int(2, Sort::Field));
        let g = subst(&f, &Var::new("x", Sort::Field), &repl);
        assert!(check_sorts(&g).ok());
    }
}
