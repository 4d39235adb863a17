//! Python bindings: parse and print formulas, run field-quantifier
//! elimination, evaluate over the Laurent-series model, differential-test
//! eliminations, decide one-sorted sentences, project definable sets, and
//! build Borel construction trees.

use std::collections::HashMap;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ovfqe_core::error::Error;
use ovfqe_core::eval::{self, Assignment, EquivStatus, Value};
use ovfqe_core::formula::{free_vars, Sort, Term, Var};
use ovfqe_core::group::GroupMode;
use ovfqe_core::laurent::{LaurentSeries, ModelConfig, ResidueMode};
use ovfqe_core::qe::Budget;
use ovfqe_core::syntax;

fn err(e: Error) -> PyErr {
    match e {
        Error::SyntaxError { .. } | Error::SortError(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn parse_residue_mode(s: &str) -> PyResult<ResidueMode> {
    match s {
        "real-closed" => Ok(ResidueMode::RealClosed),
        "rational" => Ok(ResidueMode::Rational),
        _ => Err(PyValueError::new_err(
            "residue_mode must be 'real-closed' or 'rational'",
        )),
    }
}

fn parse_group_mode(s: &str) -> PyResult<GroupMode> {
    match s {
        "int" => Ok(GroupMode::Int),
        "divisible" => Ok(GroupMode::Divisible),
        _ => Err(PyValueError::new_err("group_mode must be 'int' or 'divisible'")),
    }
}

/// A formula in the three-sorted language of ordered valued fields.
#[pyclass(frozen, name = "Formula")]
#[derive(Clone)]
struct PyFormula {
    inner: ovfqe_core::formula::Formula,
}

#[pymethods]
impl PyFormula {
    /// Parse surface syntax, e.g. `"E x (x * x = c)"`.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<PyFormula> {
        Ok(PyFormula { inner: syntax::parse(text).map_err(err)? })
    }

    fn __str__(&self) -> String {
        syntax::print(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!("Formula({:?})", syntax::print(&self.inner))
    }

    /// Free variables as (name, sort) pairs; sorts are "field",
    /// "residue", or "group".
    fn free_variables(&self) -> Vec<(String, String)> {
        let mut vars: Vec<Var> = free_vars(&self.inner).into_iter().collect();
        vars.sort();
        vars.into_iter()
            .map(|v| {
                let sort = match v.sort {
                    Sort::Field => "field",
                    Sort::Residue => "residue",
                    Sort::Group => "group",
                };
                (v.name, sort.to_string())
            })
            .collect()
    }

    /// True when no field-sort quantifier remains.
    fn is_field_quantifier_free(&self) -> bool {
        !ovfqe_core::formula::has_field_quantifier(&self.inner)
    }
}

/// Outcome of field-quantifier elimination.
#[pyclass(frozen, name = "QeResult")]
struct PyQeResult {
    #[pyo3(get)]
    formula: Py<PyFormula>,
    /// number of disjuncts in the normal form
    #[pyo3(get)]
    n: usize,
    #[pyo3(get)]
    trace: Vec<String>,
}

/// Eliminate all field-sort quantifiers, returning a normal form whose
/// field access goes through ac(q(x)) and v(q(x)) only.
#[pyfunction]
#[pyo3(signature = (formula, max_degree = 2, max_splits = 100_000, trace = false))]
fn eliminate(
    py: Python<'_>,
    formula: &PyFormula,
    max_degree: u32,
    max_splits: usize,
    trace: bool,
) -> PyResult<PyQeResult> {
    let budget = Budget { max_degree, max_splits };
    let out = ovfqe_core::qe::eliminate_field_quantifiers_traced(&formula.inner, &budget, trace)
        .map_err(err)?;
    Ok(PyQeResult {
        formula: Py::new(py, PyFormula { inner: out.formula })?,
        n: out.pas.n(),
        trace: out.trace,
    })
}

fn build_assignment(
    formula: &ovfqe_core::formula::Formula,
    assignment: &HashMap<String, String>,
) -> PyResult<Assignment> {
    let vars: Vec<Var> = free_vars(formula).into_iter().collect();
    let mut asg = Assignment::new();
    for (name, value_src) in assignment {
        let var = vars
            .iter()
            .find(|v| &v.name == name)
            .ok_or_else(|| PyValueError::new_err(format!("no free variable named {name}")))?;
        let tag = match var.sort {
            Sort::Field => "f",
            Sort::Residue => "r",
            Sort::Group => "s",
        };
        let line = format!("{name}:{tag} = {value_src}");
        let parsed = syntax::parse(&line).map_err(err)?;
        let ovfqe_core::formula::Formula::Eq(_, rhs) = parsed else {
            return Err(PyValueError::new_err(format!("cannot read value `{value_src}`")));
        };
        let value = term_to_value(var, &rhs).ok_or_else(|| {
            PyValueError::new_err(format!("`{value_src}` is not a {tag}-sort constant"))
        })?;
        asg.insert(var.clone(), value).map_err(err)?;
    }
    Ok(asg)
}

fn term_to_value(v: &Var, t: &Term) -> Option<Value> {
    match (v.sort, t) {
        (Sort::Field, Term::Series(s)) => Some(Value::Field(s.clone())),
        (Sort::Field, Term::Int(n, _)) => Some(Value::Field(LaurentSeries::from_rational(
            num::BigRational::from(n.clone()),
        ))),
        (Sort::Field, Term::Rat(q)) => Some(Value::Field(LaurentSeries::from_rational(q.clone()))),
        (Sort::Residue, Term::Rat(q)) => Some(Value::Residue(q.clone())),
        (Sort::Residue, Term::Int(n, _)) => {
            Some(Value::Residue(num::BigRational::from(n.clone())))
        }
        (Sort::Group, Term::Int(n, _)) => n.to_string().parse().ok().map(Value::Group),
        (_, Term::Neg(inner)) => match term_to_value(v, inner)? {
            Value::Field(s) => Some(Value::Field(s.neg())),
            Value::Residue(q) => Some(Value::Residue(-q)),
            Value::Group(g) => Some(Value::Group(-g)),
        },
        _ => None,
    }
}

/// Evaluate a field-quantifier-free formula at an assignment; values are
/// surface-syntax constants such as `"{2, 1*t}"`, `"1/2"`, or `"3"`.
#[pyfunction]
#[pyo3(signature = (formula, assignment, residue_mode = "real-closed", group_mode = "int"))]
fn evaluate(
    formula: &PyFormula,
    assignment: HashMap<String, String>,
    residue_mode: &str,
    group_mode: &str,
) -> PyResult<bool> {
    let asg = build_assignment(&formula.inner, &assignment)?;
    eval::evaluate_qf(
        &formula.inner,
        &asg,
        parse_residue_mode(residue_mode)?,
        parse_group_mode(group_mode)?,
    )
    .map_err(err)
}

/// Differential test: eliminate, then compare input and output on sampled
/// assignments. Returns a dict with status, samples, unconfirmed, skipped.
#[pyfunction]
#[pyo3(signature = (formula, samples = 200, seed = 0, group_mode = "int"))]
fn check(
    py: Python<'_>,
    formula: &PyFormula,
    samples: usize,
    seed: u64,
    group_mode: &str,
) -> PyResult<PyObject> {
    let budget = Budget::default();
    let cfg = ModelConfig::default();
    let gmode = parse_group_mode(group_mode)?;
    let out = ovfqe_core::qe::eliminate_field_quantifiers(&formula.inner, &budget).map_err(err)?;
    let v = eval::differential_test(&formula.inner, &out.formula, samples, &cfg, seed, gmode)
        .map_err(err)?;
    let status = match &v.status {
        EquivStatus::Consistent => "consistent",
        EquivStatus::WeakPass { .. } => "weak-pass",
        EquivStatus::Inconclusive { .. } => "inconclusive",
        EquivStatus::Counterexample { .. } => "counterexample",
    };
    let d = pyo3::types::PyDict::new_bound(py);
    d.set_item("status", status)?;
    d.set_item("samples", v.samples_run)?;
    d.set_item("unconfirmed", v.unconfirmed)?;
    d.set_item("skipped", v.skipped)?;
    Ok(d.into())
}

/// Decide a residue-sort sentence.
#[pyfunction]
#[pyo3(signature = (formula, residue_mode = "real-closed"))]
fn decide_residue(formula: &PyFormula, residue_mode: &str) -> PyResult<bool> {
    ovfqe_core::residue::decide_residue_sentence(&formula.inner, parse_residue_mode(residue_mode)?)
        .map_err(err)
}

/// Decide a group-sort sentence.
#[pyfunction]
#[pyo3(signature = (formula, group_mode = "int"))]
fn decide_group(formula: &PyFormula, group_mode: &str) -> PyResult<bool> {
    ovfqe_core::group::decide_group_sentence(&formula.inner, parse_group_mode(group_mode)?).map_err(err)
}

/// Project a residue-definable set to a pure residue-sort formula.
#[pyfunction]
fn project_residue(py: Python<'_>, formula: &PyFormula) -> PyResult<Py<PyFormula>> {
    let g = ovfqe_core::embed::project_residue_definable(
        &formula.inner,
        &Budget::default(),
        ResidueMode::RealClosed,
        GroupMode::Int,
    )
    .map_err(err)?;
    Py::new(py, PyFormula { inner: g })
}

/// Project a group-definable set to a pure group-sort formula.
#[pyfunction]
fn project_group(py: Python<'_>, formula: &PyFormula) -> PyResult<Py<PyFormula>> {
    let g = ovfqe_core::embed::project_group_definable(
        &formula.inner,
        &Budget::default(),
        ResidueMode::RealClosed,
        GroupMode::Int,
    )
    .map_err(err)?;
    Py::new(py, PyFormula { inner: g })
}

/// Decompose a mixed residue/group set into finitely many rectangles.
#[pyfunction]
fn rectangles(
    py: Python<'_>,
    formula: &PyFormula,
) -> PyResult<Vec<(Py<PyFormula>, Py<PyFormula>)>> {
    let pairs =
        ovfqe_core::embed::rectangle_decompose(&formula.inner, &Budget::default()).map_err(err)?;
    pairs
        .into_iter()
        .map(|(psi, theta)| {
            Ok((
                Py::new(py, PyFormula { inner: psi })?,
                Py::new(py, PyFormula { inner: theta })?,
            ))
        })
        .collect()
}

/// Borel construction tree of a one-variable definable set, as a JSON
/// string with node kinds, dimensions, and set descriptions.
#[pyfunction]
fn borel_tree(formula: &PyFormula) -> PyResult<String> {
    let set = ovfqe_core::borel::canonicalize(&formula.inner).map_err(err)?;
    let tree = ovfqe_core::borel::borel_tree(&set).map_err(err)?;
    serde_json::to_string_pretty(&tree.to_json(&|g| syntax::print(g)))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn ovfqe(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFormula>()?;
    m.add_class::<PyQeResult>()?;
    m.add_function(wrap_pyfunction!(eliminate, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(decide_residue, m)?)?;
    m.add_function(wrap_pyfunction!(decide_group, m)?)?;
    m.add_function(wrap_pyfunction!(project_residue, m)?)?;
    m.add_function(wrap_pyfunction!(project_group, m)?)?;
    m.add_function(wrap_pyfunction!(rectangles, m)?)?;
    m.add_function(wrap_pyfunction!(borel_tree, m)?)?;
    Ok(())
}
