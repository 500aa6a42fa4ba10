//! Weight expressions: parsing, evaluation, symbolic differentiation and the
//! catalog of pairs used throughout the crate.

mod catalog;
mod deriv;
mod expr;
mod parser;

pub use catalog::{catalog, catalog_about, catalog_names, CatalogPair, PairDim, BESSEL_J0_FIRST_ZERO};
pub use deriv::{derivative, nth_derivative};
pub use expr::{add, div, exp, ln, mul, neg, pow, sub, Node, Param, ParamBinding, WeightExpr};
pub use parser::parse;
