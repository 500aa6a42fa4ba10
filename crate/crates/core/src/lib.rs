//! Numerical lab for weighted Hardy, Hardy-Rellich and Rellich inequalities
//! on radial domains of `R^N`.

pub mod besselpair;
pub mod cli;
pub mod conditions;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod modeforms;
pub mod report;
pub mod spectrum;
pub mod weightlang;

pub use error::{Error, Result};
