//! Concrete grammar, parser and pretty-printer.
//!
//! Formulas: `E x:f (...)`, `A g:s (...)`, connectives `! & | ->`, atoms
//! `t < t`, `t = t` plus derived `<= >= !=` (desugared at parse time) and
//! `t = t mod m` for internal congruences. Variable sorts come from the
//! prefix convention (`u*` residue, `g*` group, everything else field) or
//! an explicit ascription `x:f`, `u:r`, `g:s`.
//!
//! Series literals: `{c1*t^e1, c2*t^e2; prec=P}` with exact rational
//! coefficients and strictly increasing integer exponents; `{0}` is the
//! exact zero. Without `prec=` the literal is exact.

use std::fmt::Write as _;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::formula::{check_sorts, Formula, Sort, Term, Var};
use crate::laurent::LaurentSeries;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(BigInt),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Colon,
    Star,
    Plus,
    Minus,
    Slash,
    Caret,
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
    Ne,
    Bang,
    Amp,
    Pipe,
    Arrow,
    Eof,
}

#[derive(Debug, Clone)]
struct Lexed {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Lexed>> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();
    macro_rules! push {
        ($t:expr) => {
            out.push(Lexed { tok: $t, line, col })
        };
    }
    while let Some(&c) = chars.peek() {
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            '#' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '(' => { push!(Tok::LParen); chars.next(); col += 1; }
            ')' => { push!(Tok::RParen); chars.next(); col += 1; }
            '{' => { push!(Tok::LBrace); chars.next(); col += 1; }
            '}' => { push!(Tok::RBrace); chars.next(); col += 1; }
            ',' => { push!(Tok::Comma); chars.next(); col += 1; }
            ';' => { push!(Tok::Semi); chars.next(); col += 1; }
            ':' => { push!(Tok::Colon); chars.next(); col += 1; }
            '*' => { push!(Tok::Star); chars.next(); col += 1; }
            '+' => { push!(Tok::Plus); chars.next(); col += 1; }
            '/' => { push!(Tok::Slash); chars.next(); col += 1; }
            '^' => { push!(Tok::Caret); chars.next(); col += 1; }
            '&' => { push!(Tok::Amp); chars.next(); col += 1; }
            '|' => { push!(Tok::Pipe); chars.next(); col += 1; }
            '=' => { push!(Tok::Eq); chars.next(); col += 1; }
            '-' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'>') {
                    chars.next();
                    col += 1;
                    out.push(Lexed { tok: Tok::Arrow, line, col: col - 2 });
                } else {
                    out.push(Lexed { tok: Tok::Minus, line, col: col - 1 });
                }
            }
            '<' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'=') {
                    chars.next();
                    col += 1;
                    push!(Tok::Le);
                } else {
                    push!(Tok::Lt);
                }
            }
            '>' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'=') {
                    chars.next();
                    col += 1;
                    push!(Tok::Ge);
                } else {
                    push!(Tok::Gt);
                }
            }
            '!' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'=') {
                    chars.next();
                    col += 1;
                    push!(Tok::Ne);
                } else {
                    push!(Tok::Bang);
                }
            }
            c if c.is_ascii_digit() => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_digit() {
                        s.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                push!(Tok::Int(s.parse().unwrap()));
            }
            c if c.is_ascii_alphabetic() || c == '_' || c == '$' => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' || c == '$' {
                        s.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                push!(Tok::Ident(s));
            }
            c => {
                return Err(Error::SyntaxError {
                    line,
                    col,
                    msg: format!("unexpected character {c:?}"),
                })
            }
        }
    }
    out.push(Lexed { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Lexed>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        let l = &self.toks[self.pos.min(self.toks.len() - 1)];
        Error::SyntaxError { line: l.line, col: l.col, msg: msg.into() }
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<()> {
        if self.peek() == &t {
            self.next();
            Ok(())
        } else {
            Err(self.err(format!("expected {what}, found {:?}", self.peek())))
        }
    }

    // formula := or ('->' formula)?
    fn formula(&mut self) -> Result<Formula> {
        let lhs = self.or_formula()?;
        if self.peek() == &Tok::Arrow {
            self.next();
            let rhs = self.formula()?;
            Ok(Formula::Implies(Box::new(lhs), Box::new(rhs)))
        } else {
            Ok(lhs)
        }
    }

    fn or_formula(&mut self) -> Result<Formula> {
        let mut f = self.and_formula()?;
        while self.peek() == &Tok::Pipe {
            self.next();
            let g = self.and_formula()?;
            f = Formula::Or(Box::new(f), Box::new(g));
        }
        Ok(f)
    }

    fn and_formula(&mut self) -> Result<Formula> {
        let mut f = self.unary_formula()?;
        while self.peek() == &Tok::Amp {
            self.next();
            let g = self.unary_formula()?;
            f = Formula::And(Box::new(f), Box::new(g));
        }
        Ok(f)
    }

    fn binder_var(&mut self, default_hint: Option<Sort>) -> Result<Var> {
        let name = match self.next() {
            Tok::Ident(n) => n,
            _ => return Err(self.err("expected variable name")),
        };
        let sort = if self.peek() == &Tok::Colon {
            self.next();
            match self.next() {
                Tok::Ident(s) => match s.as_str() {
                    "f" => Sort::Field,
                    "r" => Sort::Residue,
                    "s" => Sort::Group,
                    _ => return Err(self.err(format!("unknown sort {s:?} (want f, r or s)"))),
                },
                _ => return Err(self.err("expected sort after ':'")),
            }
        } else {
            default_hint.unwrap_or_else(|| sort_from_prefix(&name))
        };
        Ok(Var::new(name, sort))
    }

    fn unary_formula(&mut self) -> Result<Formula> {
        match self.peek().clone() {
            Tok::Bang => {
                self.next();
                Ok(self.unary_formula()?.not())
            }
            Tok::Ident(id) if id == "E" || id == "A" => {
                self.next();
                let v = self.binder_var(None)?;
                self.expect(Tok::LParen, "'(' after binder")?;
                let body = self.formula()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(if id == "E" {
                    Formula::exists(v, body)
                } else {
                    Formula::forall(v, body)
                })
            }
            Tok::Ident(id) if id == "true" => {
                self.next();
                Ok(Formula::True)
            }
            Tok::Ident(id) if id == "false" => {
                self.next();
                Ok(Formula::False)
            }
            Tok::Ident(id) if id == "sq" => {
                self.next();
                self.expect(Tok::LParen, "'('")?;
                let t = self.term()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(Formula::Sq(t))
            }
            Tok::LParen => {
                // could be a parenthesized formula or a parenthesized term
                // starting an atom; try formula first.
                let save = self.pos;
                self.next();
                if let Ok(f) = self.formula() {
                    if self.peek() == &Tok::RParen {
                        self.next();
                        // only accept if not followed by a term operator
                        if !matches!(
                            self.peek(),
                            Tok::Lt | Tok::Gt | Tok::Le | Tok::Ge | Tok::Eq | Tok::Ne
                                | Tok::Plus | Tok::Minus | Tok::Star
                        ) {
                            return Ok(f);
                        }
                    }
                }
                self.pos = save;
                self.atom()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Formula> {
        let lhs = self.term()?;
        let op = self.next();
        let rhs = self.term()?;
        // optional congruence suffix: `mod m`
        if let Tok::Ident(id) = self.peek() {
            if id == "mod" {
                if op != Tok::Eq {
                    return Err(self.err("'mod' only follows '='"));
                }
                self.next();
                let neg = if self.peek() == &Tok::Minus {
                    self.next();
                    true
                } else {
                    false
                };
                let m = match self.next() {
                    Tok::Int(m) => {
                        if neg {
                            -m
                        } else {
                            m
                        }
                    }
                    _ => return Err(self.err("expected integer modulus")),
                };
                return Ok(Formula::Cong { modulus: m, lhs, rhs });
            }
        }
        Ok(match op {
            Tok::Eq => Formula::Eq(lhs, rhs),
            Tok::Lt => Formula::Lt(lhs, rhs),
            Tok::Gt => Formula::Lt(rhs, lhs),
            Tok::Le => Formula::Lt(rhs, lhs).not(),
            Tok::Ge => Formula::Lt(lhs, rhs).not(),
            Tok::Ne => Formula::Eq(lhs, rhs).not(),
            _ => return Err(self.err(format!("expected comparison operator, found {op:?}"))),
        })
    }

    fn term(&mut self) -> Result<Term> {
        let mut t = self.mult_term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.next();
                    t = t.add(self.mult_term()?);
                }
                Tok::Minus => {
                    self.next();
                    t = t.sub(self.mult_term()?);
                }
                _ => break,
            }
        }
        Ok(t)
    }

    fn mult_term(&mut self) -> Result<Term> {
        let mut t = self.unary_term()?;
        while self.peek() == &Tok::Star {
            self.next();
            t = t.mul(self.unary_term()?);
        }
        Ok(t)
    }

    fn unary_term(&mut self) -> Result<Term> {
        match self.peek().clone() {
            Tok::Minus => {
                self.next();
                Ok(self.unary_term()?.neg())
            }
            Tok::Int(n) => {
                self.next();
                Ok(Term::Int(n, Sort::Field)) // sort refined by elaboration
            }
            Tok::LBrace => self.series_literal(),
            Tok::LParen => {
                self.next();
                let t = self.term()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(t)
            }
            Tok::Ident(id) if id == "res" || id == "v" || id == "ac" => {
                self.next();
                self.expect(Tok::LParen, "'('")?;
                let arg = self.term()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(match id.as_str() {
                    "res" => arg.res_of(),
                    "v" => arg.val_of(),
                    _ => arg.ac_of(),
                })
            }
            Tok::Ident(_) => {
                let v = self.binder_var(None)?;
                Ok(Term::Var(v))
            }
            t => Err(self.err(format!("expected term, found {t:?}"))),
        }
    }

    fn rational(&mut self) -> Result<BigRational> {
        let neg = if self.peek() == &Tok::Minus {
            self.next();
            true
        } else {
            false
        };
        let num = match self.next() {
            Tok::Int(n) => n,
            _ => return Err(self.err("expected rational coefficient")),
        };
        let den = if self.peek() == &Tok::Slash {
            self.next();
            match self.next() {
                Tok::Int(d) if !d.is_zero() => d,
                _ => return Err(self.err("expected nonzero denominator")),
            }
        } else {
            BigInt::one()
        };
        let q = BigRational::new(num, den);
        Ok(if neg { -q } else { q })
    }

    fn signed_int(&mut self) -> Result<i64> {
        let neg = if self.peek() == &Tok::Minus {
            self.next();
            true
        } else {
            false
        };
        match self.next() {
            Tok::Int(n) => {
                let v: i64 = n.to_string().parse().map_err(|_| self.err("exponent too large"))?;
                Ok(if neg { -v } else { v })
            }
            _ => Err(self.err("expected integer")),
        }
    }

    // `{c*t^e, ...; prec=P}` | `{0}`
    fn series_literal(&mut self) -> Result<Term> {
        self.expect(Tok::LBrace, "'{'")?;
        let mut series = LaurentSeries::zero();
        let mut last_exp: Option<i64> = None;
        let mut prec: Option<i64> = None;
        let mut max_exp: i64 = 0;
        loop {
            match self.peek() {
                Tok::RBrace => break,
                Tok::Semi => {
                    self.next();
                    // prec=P
                    match self.next() {
                        Tok::Ident(id) if id == "prec" => {}
                        _ => return Err(self.err("expected 'prec' after ';'")),
                    }
                    self.expect(Tok::Eq, "'='")?;
                    prec = Some(self.signed_int()?);
                    break;
                }
                _ => {}
            }
            let c = self.rational()?;
            let mut e = 0i64;
            if let Tok::Ident(id) = self.peek() {
                if id == "t" {
                    self.next();
                    e = 1;
                    if self.peek() == &Tok::Caret {
                        self.next();
                        e = self.signed_int()?;
                    }
                }
            } else if self.peek() == &Tok::Star {
                // c * t^e
            }
            if self.peek() == &Tok::Star {
                self.next();
                match self.next() {
                    Tok::Ident(id) if id == "t" => {}
                    _ => return Err(self.err("expected 't' in series term")),
                }
                e = 1;
                if self.peek() == &Tok::Caret {
                    self.next();
                    e = self.signed_int()?;
                }
            }
            if let Some(prev) = last_exp {
                if e <= prev {
                    return Err(self.err("series exponents must be strictly increasing"));
                }
            }
            last_exp = Some(e);
            max_exp = max_exp.max(e);
            if !c.is_zero() {
                series = series.add(&LaurentSeries::monomial(c, e));
            }
            if self.peek() == &Tok::Comma {
                self.next();
            }
        }
        self.expect(Tok::RBrace, "'}'")?;
        let s = match prec {
            Some(p) => series.truncate(p),
            None => series,
        };
        Ok(Term::Series(s))
    }
}

fn sort_from_prefix(name: &str) -> Sort {
    match name.chars().next() {
        Some('u') | Some('w') => Sort::Residue,
        Some('g') | Some('h') => Sort::Group,
        _ => Sort::Field,
    }
}

/// Elaboration: refine integer-literal sorts from context and rewrite
/// group-sort multiplications into integer scalings.
fn elaborate_term(t: &Term, expected: Option<Sort>) -> Result<Term> {
    use crate::formula::sort_of_term;
    match t {
        Term::Int(n, _) => Ok(Term::Int(n.clone(), expected.unwrap_or(Sort::Field))),
        Term::Var(_) | Term::Rat(_) | Term::Series(_) => Ok(t.clone()),
        Term::Add(a, b) | Term::Sub(a, b) => {
            // infer from whichever side has a definite sort
            let hint = infer_sort(a).or_else(|| infer_sort(b)).or(expected);
            let ea = elaborate_term(a, hint)?;
            let eb = elaborate_term(b, hint)?;
            Ok(match t {
                Term::Add(..) => ea.add(eb),
                _ => ea.sub(eb),
            })
        }
        Term::Mul(a, b) => {
            let hint = infer_sort(a).or_else(|| infer_sort(b)).or(expected);
            let ea = elaborate_term(a, hint)?;
            let eb = elaborate_term(b, hint)?;
            // group-sort products must be integer scalings
            if hint == Some(Sort::Group) {
                let as_int = |t: &Term| match t {
                    Term::Int(n, _) => Some(n.clone()),
                    Term::Neg(inner) => match &**inner {
                        Term::Int(n, _) => Some(-n.clone()),
                        _ => None,
                    },
                    _ => None,
                };
                if let Some(n) = as_int(&ea) {
                    return Ok(Term::ScalarMul(n, Box::new(eb)));
                }
                if let Some(n) = as_int(&eb) {
                    return Ok(Term::ScalarMul(n, Box::new(ea)));
                }
                return Err(Error::SortError(
                    "group sort admits only integer scalar multiples".into(),
                ));
            }
            Ok(ea.mul(eb))
        }
        Term::Neg(a) => Ok(elaborate_term(a, expected)?.neg()),
        Term::ScalarMul(n, a) => Ok(Term::ScalarMul(
            n.clone(),
            Box::new(elaborate_term(a, Some(Sort::Group))?),
        )),
        Term::Res(a) => Ok(elaborate_term(a, Some(Sort::Field))?.res_of()),
        Term::Val(a) => Ok(elaborate_term(a, Some(Sort::Field))?.val_of()),
        Term::Ac(a) => {
            let e = elaborate_term(a, Some(Sort::Field))?.ac_of();
            let _ = sort_of_term(&e);
            Ok(e)
        }
    }
}

/// Sort of a term ignoring unresolved integer literals.
fn infer_sort(t: &Term) -> Option<Sort> {
    match t {
        Term::Var(v) => Some(v.sort),
        Term::Int(..) => None,
        Term::Rat(_) => Some(Sort::Residue),
        Term::Series(_) => Some(Sort::Field),
        Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) => {
            infer_sort(a).or_else(|| infer_sort(b))
        }
        Term::Neg(a) => infer_sort(a),
        Term::ScalarMul(..) | Term::Val(_) => Some(Sort::Group),
        Term::Res(_) | Term::Ac(_) => Some(Sort::Residue),
    }
}

fn elaborate(f: &Formula) -> Result<Formula> {
    match f {
        Formula::True | Formula::False => Ok(f.clone()),
        Formula::Eq(a, b) | Formula::Lt(a, b) => {
            let hint = infer_sort(a).or_else(|| infer_sort(b));
            let ea = elaborate_term(a, hint)?;
            let eb = elaborate_term(b, hint)?;
            Ok(match f {
                Formula::Eq(..) => Formula::Eq(ea, eb),
                _ => Formula::Lt(ea, eb),
            })
        }
        Formula::Cong { modulus, lhs, rhs } => Ok(Formula::Cong {
            modulus: modulus.clone(),
            lhs: elaborate_term(lhs, Some(Sort::Group))?,
            rhs: elaborate_term(rhs, Some(Sort::Group))?,
        }),
        Formula::Sq(t) => Ok(Formula::Sq(elaborate_term(t, Some(Sort::Residue))?)),
        Formula::Not(g) => Ok(elaborate(g)?.not()),
        Formula::And(a, b) => Ok(Formula::And(Box::new(elaborate(a)?), Box::new(elaborate(b)?))),
        Formula::Or(a, b) => Ok(Formula::Or(Box::new(elaborate(a)?), Box::new(elaborate(b)?))),
        Formula::Implies(a, b) => {
            Ok(Formula::Implies(Box::new(elaborate(a)?), Box::new(elaborate(b)?)))
        }
        Formula::Exists(v, body) => Ok(Formula::exists(v.clone(), elaborate(body)?)),
        Formula::Forall(v, body) => Ok(Formula::forall(v.clone(), elaborate(body)?)),
    }
}

/// Parses one formula, checking well-sortedness.
pub fn parse(text: &str) -> Result<Formula> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let raw = p.formula()?;
    if p.peek() != &Tok::Eof {
        return Err(p.err(format!("trailing input: {:?}", p.peek())));
    }
    let f = elaborate(&raw)?;
    let rep = check_sorts(&f);
    if !rep.ok() {
        let v = &rep.violations[0];
        return Err(Error::SortError(format!("{} (at {})", v.message, v.path)));
    }
    Ok(f)
}

/// Parses a `;`-separated list of formulas.
pub fn parse_many(text: &str) -> Result<Vec<Formula>> {
    // split on top-level ';' (those not inside braces)
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in text.chars() {
        match c {
            '{' => {
                depth += 1;
                cur.push(c);
            }
            '}' => {
                depth -= 1;
                cur.push(c);
            }
            ';' if depth == 0 => {
                parts.push(std::mem::take(&mut cur));
            }
            _ => cur.push(c),
        }
    }
    if !cur.trim().is_empty() {
        parts.push(cur);
    }
    parts
        .into_iter()
        .filter(|p| !p.trim().is_empty())
        .map(|p| parse(&p))
        .collect()
}

/// Canonical printer: fully parenthesized, stable output. `parse(print(f))`
/// is alpha-equivalent to `f` for well-sorted `f`.
pub fn print(f: &Formula) -> String {
    let mut s = String::new();
    print_formula(f, &mut s);
    s
}

fn print_formula(f: &Formula, out: &mut String) {
    match f {
        Formula::True => out.push_str("true"),
        Formula::False => out.push_str("false"),
        Formula::Eq(a, b) => {
            print_term(a, out);
            out.push_str(" = ");
            print_term(b, out);
        }
        Formula::Lt(a, b) => {
            print_term(a, out);
            out.push_str(" < ");
            print_term(b, out);
        }
        Formula::Cong { modulus, lhs, rhs } => {
            print_term(lhs, out);
            out.push_str(" = ");
            print_term(rhs, out);
            let _ = write!(out, " mod {modulus}");
        }
        Formula::Sq(t) => {
            out.push_str("sq(");
            print_term(t, out);
            out.push(')');
        }
        Formula::Not(g) => {
            out.push_str("!(");
            print_formula(g, out);
            out.push(')');
        }
        Formula::And(a, b) => {
            out.push('(');
            print_formula(a, out);
            out.push_str(" & ");
            print_formula(b, out);
            out.push(')');
        }
        Formula::Or(a, b) => {
            out.push('(');
            print_formula(a, out);
            out.push_str(" | ");
            print_formula(b, out);
            out.push(')');
        }
        Formula::Implies(a, b) => {
            out.push('(');
            print_formula(a, out);
            out.push_str(" -> ");
            print_formula(b, out);
            out.push(')');
        }
        Formula::Exists(v, body) => {
            let _ = write!(out, "E {}:{} (", v.name, v.sort);
            print_formula(body, out);
            out.push(')');
        }
        Formula::Forall(v, body) => {
            let _ = write!(out, "A {}:{} (", v.name, v.sort);
            print_formula(body, out);
            out.push(')');
        }
    }
}

fn print_term(t: &Term, out: &mut String) {
    match t {
        Term::Var(v) => {
            // ascribe only when the prefix convention would get it wrong
            if sort_from_prefix(&v.name) == v.sort {
                out.push_str(&v.name);
            } else {
                let _ = write!(out, "{}:{}", v.name, v.sort);
            }
        }
        Term::Int(n, _) => {
            if n.is_negative() {
                let _ = write!(out, "(-{})", n.magnitude());
            } else {
                let _ = write!(out, "{n}");
            }
        }
        Term::Rat(q) => {
            if q.is_integer() {
                if q.is_negative() {
                    let _ = write!(out, "(-{})", q.numer().magnitude());
                } else {
                    let _ = write!(out, "{}", q.numer());
                }
            } else {
                out.push('(');
                if q.is_negative() {
                    let _ = write!(out, "-{}/{}", q.numer().magnitude(), q.denom());
                } else {
                    let _ = write!(out, "{}/{}", q.numer(), q.denom());
                }
                out.push(')');
            }
        }
        Term::Series(s) => {
            let _ = write!(out, "{s}");
        }
        Term::Add(a, b) => {
            out.push('(');
            print_term(a, out);
            out.push_str(" + ");
            print_term(b, out);
            out.push(')');
        }
        Term::Sub(a, b) => {
            out.push('(');
            print_term(a, out);
            out.push_str(" - ");
            print_term(b, out);
            out.push(')');
        }
        Term::Mul(a, b) => {
            out.push('(');
            print_term(a, out);
            out.push_str(" * ");
            print_term(b, out);
            out.push(')');
        }
        Term::Neg(a) => {
            out.push_str("(-");
            print_term(a, out);
            out.push(')');
        }
        Term::ScalarMul(n, a) => {
            out.push('(');
            if n.is_negative() {
                let _ = write!(out, "(-{})", n.magnitude());
            } else {
                let _ = write!(out, "{n}");
            }
            out.push_str(" * ");
            print_term(a, out);
            out.push(')');
        }
        Term::Res(a) => {
            out.push_str("res(");
            print_term(a, out);
            out.push(')');
        }
        Term::Val(a) => {
            out.push_str("v(");
            print_term(a, out);
            out.push(')');
        }
        Term::Ac(a) => {
            out.push_str("ac(");
            print_term(a, out);
            out.push(')');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::alpha_eq;

    #[test]
    fn parse_exists() {
        let f = parse("E x:f (x*x = c)").unwrap();
        if let Formula::Exists(v, body) = &f {
            assert_eq!(v.sort, Sort::Field);
            assert!(matches!(**body, Formula::Eq(..)));
        } else {
            panic!("expected exists");
        }
    }

    #[test]
    fn parse_mixed_atoms() {
        let f = parse("ac(x) > 0 & v(x) = 0").unwrap();
        if let Formula::And(a, b) = &f {
            assert!(matches!(**a, Formula::Lt(..)));
            assert!(matches!(**b, Formula::Eq(..)));
        } else {
            panic!("expected and");
        }
    }

    #[test]
    fn sort_error_on_res_of_group() {
        let e = parse("res(g) = 0").unwrap_err();
        assert!(matches!(e, Error::SortError(_)), "{e:?}");
    }

    #[test]
    fn print_examples() {
        let f = parse("E x:f (0 < x)").unwrap();
        assert_eq!(print(&f), "E x:f (0 < x)");
        let g = parse("{2*t^2} = x").unwrap();
        assert_eq!(print(&g), "{2*t^2} = x");
    }

    #[test]
    fn series_literals() {
        let f = parse("x = {1, -1/2*t, 3*t^4; prec=9}").unwrap();
        if let Formula::Eq(_, Term::Series(s)) = &f {
            assert_eq!(s.prec(), Some(9));
            assert_eq!(s.val().unwrap(), 0);
        } else {
            panic!("expected series literal");
        }
        let z = parse("x = {0}").unwrap();
        if let Formula::Eq(_, Term::Series(s)) = &z {
            assert!(s.is_exact_zero());
        } else {
            panic!("expected zero literal");
        }
    }

    #[test]
    fn congruence_atom() {
        let f = parse("g + g = 0 mod 2").unwrap();
        assert!(matches!(f, Formula::Cong { .. }));
    }

    #[test]
    fn desugared_comparisons() {
        let f = parse("x <= y:f").unwrap();
        assert!(matches!(f, Formula::Not(_)));
        let g = parse("x != 0").unwrap();
        assert!(matches!(g, Formula::Not(_)));
    }

    #[test]
    fn group_scalar_multiple() {
        let f = parse("3*g > h").unwrap();
        if let Formula::Lt(_, lhs) = &f {
            assert!(matches!(lhs, Term::ScalarMul(..)));
        } else {
            panic!("expected lt");
        }
    }

    #[test]
    fn round_trip_handwritten() {
        for src in [
            "E x:f (0 < x)",
            "ac(x) > 0 & v(x) = 0",
            "A g:s (E x:f (v(x) = g))",
            "(ac(x) > 0 & v(x) = 0) | (ac(x) < 0 & 0 < v(x))",
            "u + u * u = 1",
            "x = {2*t^2}",
            "g + g = 1 mod 3",
            "!(x = 0) -> 0 < x * x",
        ] {
            let f = parse(src).unwrap();
            let printed = print(&f);
            let g = parse(&printed).unwrap();
            assert!(alpha_eq(&f, &g), "round trip failed for {src}: {printed}");
            assert_eq!(printed, print(&g), "printer unstable for {src}");
        }
    }

    #[test]
    fn parse_many_split() {
        let fs = parse_many("x = 0; 0 < x").unwrap();
        assert_eq!(fs.len(), 2);
    }
}
