//! Symbolic toolkit for ordered henselian valued fields in the
//! three-sorted angular-component language, with a computable truncated
//! Laurent-series model over the rationals.
//!
//! The centerpiece is [`qe::eliminate_field_quantifiers`], which rewrites
//! a formula into a disjunction of pairs of residue-sort and group-sort
//! conditions whose field-term access goes through `ac(q(x))` and
//! `v(q(x))` only. Downstream modules decide the resulting one-sorted
//! kernels, project definable sets onto the residue and group sorts,
//! and compute Borel presentations of definable subsets of the field.

pub mod borel;
pub mod embed;
pub mod error;
pub mod eval;
pub mod formula;
pub mod group;
pub mod laurent;
pub mod qe;
pub mod residue;
pub mod syntax;

pub use error::{Error, Result};
