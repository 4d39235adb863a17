//! Induced structure on the residue field and value group: projection of
//! definable sets, rectangle decomposition of mixed-sort sets, and
//! parameter stripping for images of parameter-free sets.


use crate::error::{Error, Result};
use crate::formula::{
    free_vars, in_pas_normal_form, Formula, Sort, Term, Var,
};
use crate::group::GroupMode;
use crate::laurent::ResidueMode;
use crate::qe::{
    eliminate_field_quantifiers, fold_ground_field_terms, simplify, Budget,
};

fn check_free_sorts(f: &Formula, expect: Sort, what: &str) -> Result<()> {
    for v in free_vars(f) {
        if v.sort != expect {
            return Err(Error::SortError(format!(
                "{what} expects only {expect}-sort free variables, found {}:{}",
                v.name, v.sort
            )));
        }
    }
    Ok(())
}

/// Splits a definable set with residue-sort free variables into folded
/// Pas pairs (ψ_i, θ_i) where each θ_i is a closed group sentence, and
/// dually for group-sort free variables.
fn folded_pairs(f: &Formula, budget: &Budget) -> Result<Vec<(Formula, Formula)>> {
    let out = eliminate_field_quantifiers(f, budget)?;
    let folded = fold_ground_field_terms(&out.formula)?;
    let pas = in_pas_normal_form(&folded).ok_or_else(|| {
        Error::CanonicalizationFailed("folded output failed the normal-form check".into())
    })?;
    Ok(pas
        .pairs
        .iter()
        .map(|(psi, theta)| (psi.resubstitute(), theta.resubstitute()))
        .collect())
}

/// Projects a definable X ⊆ k^n (free variables residue-sort, field
/// parameters as series constants) to a pure residue-sort formula. Group
/// factors become closed sentences and are decided away.
pub fn project_residue_definable(
    f: &Formula,
    budget: &Budget,
    rmode: ResidueMode,
    gmode: GroupMode,
) -> Result<Formula> {
    check_free_sorts(f, Sort::Residue, "project_residue_definable")?;
    let mut kept = Vec::new();
    for (psi, theta) in folded_pairs(f, budget)? {
        if !free_vars(&theta).is_empty() {
            return Err(Error::CanonicalizationFailed(
                "group factor retained free variables".into(),
            ));
        }
        if crate::group::decide_group_sentence(&theta, gmode)? {
            kept.push(psi);
        }
    }
    let _ = rmode;
    Ok(simplify(&Formula::big_or(kept)))
}

/// Projects a definable Y ⊆ Γ^m (free variables group-sort) to a pure
/// group-sort formula; residue factors are decided away.
pub fn project_group_definable(
    f: &Formula,
    budget: &Budget,
    rmode: ResidueMode,
    gmode: GroupMode,
) -> Result<Formula> {
    check_free_sorts(f, Sort::Group, "project_group_definable")?;
    let _ = gmode;
    let mut kept = Vec::new();
    for (psi, theta) in folded_pairs(f, budget)? {
        if !free_vars(&psi).is_empty() {
            return Err(Error::CanonicalizationFailed(
                "residue factor retained free variables".into(),
            ));
        }
        if crate::residue::decide_residue_sentence(&psi, rmode)? {
            kept.push(theta);
        }
    }
    Ok(simplify(&Formula::big_or(kept)))
}

/// Decomposes a definable Z ⊆ k^n × Γ^m into finitely many rectangles
/// Y_i × Z_i. Pairs with syntactically equal residue factors are merged.
pub fn rectangle_decompose(
    f: &Formula,
    budget: &Budget,
) -> Result<Vec<(Formula, Formula)>> {
    for v in free_vars(f) {
        if v.sort == Sort::Field {
            return Err(Error::SortError(format!(
                "rectangle_decompose: free field variable {}",
                v.name
            )));
        }
    }
    let pairs = folded_pairs(f, budget)?;
    let mut merged: Vec<(Formula, Formula)> = Vec::new();
    for (psi, theta) in pairs {
        let psi = simplify(&psi);
        let theta = simplify(&theta);
        if matches!(psi, Formula::False) || matches!(theta, Formula::False) {
            continue;
        }
        if let Some(slot) = merged.iter_mut().find(|(p, _)| *p == psi) {
            if slot.1 != theta {
                slot.1 = simplify(&Formula::or(slot.1.clone(), theta));
            }
        } else {
            merged.push((psi, theta));
        }
    }
    // second pass: same group factor
    let mut out: Vec<(Formula, Formula)> = Vec::new();
    for (psi, theta) in merged {
        if let Some(slot) = out.iter_mut().find(|(_, t)| *t == theta) {
            if slot.0 != psi {
                slot.0 = simplify(&Formula::or(slot.0.clone(), psi));
            }
        } else {
            out.push((psi, theta));
        }
    }
    Ok(out)
}

fn scan_parameter_free(f: &Formula) -> Result<()> {
    fn term_ok(t: &Term) -> Result<()> {
        match t {
            Term::Series(_) => Err(Error::NonParameterFreeInput(
                "series constant in strip_parameters input".into(),
            )),
            Term::Rat(q) => {
                if q.is_integer() {
                    Ok(())
                } else {
                    Err(Error::NonParameterFreeInput(format!(
                        "non-integer residue constant {q}"
                    )))
                }
            }
            Term::Var(_) | Term::Int(..) => Ok(()),
            Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) => {
                term_ok(a)?;
                term_ok(b)
            }
            Term::Neg(a) | Term::ScalarMul(_, a) | Term::Val(a) | Term::Ac(a) | Term::Res(a) => {
                term_ok(a)
            }
        }
    }
    fn walk(f: &Formula) -> Result<()> {
        match f {
            Formula::True | Formula::False => Ok(()),
            Formula::Eq(a, b) | Formula::Lt(a, b) => {
                term_ok(a)?;
                term_ok(b)
            }
            Formula::Cong { lhs, rhs, .. } => {
                term_ok(lhs)?;
                term_ok(rhs)
            }
            Formula::Sq(t) => term_ok(t),
            Formula::Not(g) => walk(g),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                walk(a)?;
                walk(b)
            }
            Formula::Exists(_, b) | Formula::Forall(_, b) => walk(b),
        }
    }
    walk(f)
}

/// For a parameter-free definable X ⊆ K^n, returns parameter-free
/// formulas for the coordinatewise residue image res(X) and value image
/// v(X). For n > 1 the images are computed componentwise (the rectangle
/// hull of the joint image); joint images are out of scope.
pub fn strip_parameters(
    f: &Formula,
    budget: &Budget,
    rmode: ResidueMode,
    gmode: GroupMode,
) -> Result<(Formula, Formula)> {
    scan_parameter_free(f)?;
    let mut xs: Vec<Var> = free_vars(f).into_iter().collect();
    for v in &xs {
        if v.sort != Sort::Field {
            return Err(Error::SortError(format!(
                "strip_parameters expects field-sort free variables, found {}:{}",
                v.name, v.sort
            )));
        }
    }
    if xs.is_empty() {
        return Err(Error::EvalError("strip_parameters: no free variables".into()));
    }
    xs.sort();
    // res-image: ∃x⃗ (φ ∧ ⋀ res(x_i) = u_i), projected to the residue sort
    let mut res_body = f.clone();
    let mut val_body = f.clone();
    for (i, x) in xs.iter().enumerate() {
        let u = Var::new(format!("u{}", i + 1), Sort::Residue);
        let g = Var::new(format!("g{}", i + 1), Sort::Group);
        res_body = Formula::and(
            res_body,
            Formula::Eq(Term::var(x.name.clone(), Sort::Field).res_of(), Term::Var(u)),
        );
        val_body = Formula::and(
            val_body,
            Formula::Eq(Term::var(x.name.clone(), Sort::Field).val_of(), Term::Var(g)),
        );
    }
    for x in xs.iter().rev() {
        res_body = Formula::exists(x.clone(), res_body);
        val_body = Formula::exists(x.clone(), val_body);
    }
    let res_img = project_residue_definable(&res_body, budget, rmode, gmode)?;
    let val_img = project_group_definable(&val_body, budget, rmode, gmode)?;
    // parameter-free preservation check
    scan_parameter_free(&res_img)?;
    scan_parameter_free(&val_img)?;
    Ok((res_img, val_img))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{evaluate_qf, Assignment, Value};
    use crate::syntax::parse;
    use num::bigint::BigInt;
    use num::rational::BigRational;

    fn budget() -> Budget {
        Budget::default()
    }

    fn residue_truth(proj: &Formula, u: i64) -> bool {
        let mut a = Assignment::new();
        a.insert(
            Var::new("u".to_string(), Sort::Residue),
            Value::Residue(BigRational::from(BigInt::from(u))),
        )
        .unwrap();
        evaluate_qf(proj, &a, ResidueMode::RealClosed, GroupMode::Int).unwrap()
    }

    fn group_truth(proj: &Formula, g: i64) -> bool {
        let mut a = Assignment::new();
        a.insert(Var::new("g".to_string(), Sort::Group), Value::Group(g)).unwrap();
        evaluate_qf(proj, &a, ResidueMode::RealClosed, GroupMode::Int).unwrap()
    }

    #[test]
    fn residue_projection_halfline() {
        // {u : ∃x (x > 3 ∧ v(x) = 0 ∧ res(x) = u)} = {u : u ≥ 3}
        let f = parse("E x ({3} < x & v(x) = 0 & res(x) = u)").unwrap();
        let p = project_residue_definable(&f, &budget(), ResidueMode::RealClosed, GroupMode::Int)
            .unwrap();
        assert!(free_vars(&p).iter().all(|v| v.sort == Sort::Residue));
        assert!(!residue_truth(&p, 2));
        assert!(residue_truth(&p, 3));
        assert!(residue_truth(&p, 4));
    }

    #[test]
    fn residue_projection_ac_constant() {
        // {u : u = ac(a)} with a = 2t² → u = 2
        let f = parse("u = ac({2*t^2})").unwrap();
        let p = project_residue_definable(&f, &budget(), ResidueMode::RealClosed, GroupMode::Int)
            .unwrap();
        assert!(residue_truth(&p, 2));
        assert!(!residue_truth(&p, 1));
        // no field constants survive
        assert!(crate::formula::field_constants_outside_ac_v(&p).is_empty());
        assert!(!crate::syntax::print(&p).contains("t^"));
    }

    #[test]
    fn group_projection_square_bound() {
        // {g : ∃x (v(x) = g ∧ x > 0 ∧ x·x < a)} with a = t²
        let f = parse("E x (v(x) = g & 0 < x & x * x < {1*t^2})").unwrap();
        let p = project_group_definable(&f, &budget(), ResidueMode::RealClosed, GroupMode::Int)
            .unwrap();
        assert!(free_vars(&p).iter().all(|v| v.sort == Sort::Group));
        // ground truth by witness search over x
        let x = Var::new("x".to_string(), Sort::Field);
        let matrix = parse("v(x) = g & 0 < x & x * x < {1*t^2}").unwrap();
        for g in -5..=5i64 {
            let mut a = Assignment::new();
            a.insert(Var::new("g".to_string(), Sort::Group), Value::Group(g)).unwrap();
            let expected = matches!(
                crate::eval::witness_search(
                    &x,
                    &matrix,
                    &a,
                    &crate::eval::SearchBudget::default(),
                    ResidueMode::RealClosed,
                    GroupMode::Int
                )
                .unwrap(),
                crate::eval::WitnessOutcome::Found(_)
            );
            assert_eq!(group_truth(&p, g), expected, "g = {g}");
        }
    }

    #[test]
    fn group_projection_val_constant() {
        let f = parse("g = v({1*t^3})").unwrap();
        let p = project_group_definable(&f, &budget(), ResidueMode::RealClosed, GroupMode::Int)
            .unwrap();
        assert!(group_truth(&p, 3));
        assert!(!group_truth(&p, 2));
    }

    #[test]
    fn rectangles_trivial() {
        let f = parse("u > 0 & g > 0").unwrap();
        let r = rectangle_decompose(&f, &budget()).unwrap();
        assert_eq!(r.len(), 1);

        let f = parse("u > 0 | g > 0").unwrap();
        let r = rectangle_decompose(&f, &budget()).unwrap();
        assert_eq!(r.len(), 2);
    }

    #[test]
    fn rectangles_from_elimination() {
        // ∃x (ac(x) = u ∧ v(x) = g ∧ x > 1)
        let f = parse("E x (ac(x) = u & v(x) = g & {1} < x)").unwrap();
        let rects = rectangle_decompose(&f, &budget()).unwrap();
        assert!(!rects.is_empty());
        // sampled agreement on a (u, g) grid against witness search
        let x = Var::new("x".to_string(), Sort::Field);
        let matrix = parse("ac(x) = u & v(x) = g & {1} < x").unwrap();
        for u in [-2i64, 0, 1, 2] {
            for g in [-2i64, -1, 0, 1] {
                let mut a = Assignment::new();
                a.insert(
                    Var::new("u".to_string(), Sort::Residue),
                    Value::Residue(BigRational::from(BigInt::from(u))),
                )
                .unwrap();
                a.insert(Var::new("g".to_string(), Sort::Group), Value::Group(g)).unwrap();
                let expected = matches!(
                    crate::eval::witness_search(
                        &x,
                        &matrix,
                        &a,
                        &crate::eval::SearchBudget::default(),
                        ResidueMode::RealClosed,
                        GroupMode::Int
                    )
                    .unwrap(),
                    crate::eval::WitnessOutcome::Found(_)
                );
                let got = rects.iter().any(|(y, z)| {
                    evaluate_qf(y, &a, ResidueMode::RealClosed, GroupMode::Int).unwrap()
                        && evaluate_qf(z, &a, ResidueMode::RealClosed, GroupMode::Int).unwrap()
                });
                assert_eq!(got, expected, "u = {u}, g = {g}");
            }
        }
    }

    #[test]
    fn strip_square_bound() {
        // X = {x : x·x < 2}: v-image is g ≥ 0
        let f = parse("x * x < 2").unwrap();
        let (_, vimg) =
            strip_parameters(&f, &budget(), ResidueMode::RealClosed, GroupMode::Int).unwrap();
        let probe = |g: i64| {
            let mut a = Assignment::new();
            a.insert(Var::new("g1".to_string(), Sort::Group), Value::Group(g)).unwrap();
            evaluate_qf(&vimg, &a, ResidueMode::RealClosed, GroupMode::Int).unwrap()
        };
        assert!(!probe(-1));
        assert!(probe(0));
        assert!(probe(3));
    }

    #[test]
    fn strip_singleton_zero() {
        // X = {0}: res-image u = 0 and v-image g = 0 (conventions)
        let f = parse("x = 0").unwrap();
        let (rimg, vimg) =
            strip_parameters(&f, &budget(), ResidueMode::RealClosed, GroupMode::Int).unwrap();
        let ru = |u: i64| {
            let mut a = Assignment::new();
            a.insert(
                Var::new("u1".to_string(), Sort::Residue),
                Value::Residue(BigRational::from(BigInt::from(u))),
            )
            .unwrap();
            evaluate_qf(&rimg, &a, ResidueMode::RealClosed, GroupMode::Int).unwrap()
        };
        let vg = |g: i64| {
            let mut a = Assignment::new();
            a.insert(Var::new("g1".to_string(), Sort::Group), Value::Group(g)).unwrap();
            evaluate_qf(&vimg, &a, ResidueMode::RealClosed, GroupMode::Int).unwrap()
        };
        assert!(ru(0) && !ru(1));
        assert!(vg(0) && !vg(1) && !vg(-1));
    }

    #[test]
    fn strip_whole_line() {
        let f = parse("x = x").unwrap();
        let (rimg, vimg) =
            strip_parameters(&f, &budget(), ResidueMode::RealClosed, GroupMode::Int).unwrap();
        for u in [-3i64, 0, 5] {
            let mut a = Assignment::new();
            a.insert(
                Var::new("u1".to_string(), Sort::Residue),
                Value::Residue(BigRational::from(BigInt::from(u))),
            )
            .unwrap();
            assert!(evaluate_qf(&rimg, &a, ResidueMode::RealClosed, GroupMode::Int).unwrap());
        }
        for g in [-3i64, 0, 5] {
            let mut a = Assignment::new();
            a.insert(Var::new("g1".to_string(), Sort::Group), Value::Group(g)).unwrap();
            assert!(evaluate_qf(&vimg, &a, ResidueMode::RealClosed, GroupMode::Int).unwrap());
        }
    }

    #[test]
    fn strip_rejects_parameters() {
        let f = parse("x < {1*t}").unwrap();
        assert!(matches!(
            strip_parameters(&f, &budget(), ResidueMode::RealClosed, GroupMode::Int),
            Err(Error::NonParameterFreeInput(_))
        ));
    }
}

