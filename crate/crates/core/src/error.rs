use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier `{name}` at {pos}")]
    UnknownIdentifier { pos: usize, name: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero in `{at}` at r = {r}")]
    DivisionByZero { at: String, r: f64 },
    #[error("negative base with non-integer exponent in `{at}` at r = {r}")]
    NegativeBase { at: String, r: f64 },
    #[error("logarithm of a non-positive value in `{at}` at r = {r}")]
    LogDomain { at: String, r: f64 },
    #[error("non-finite value of `{at}` at r = {r}")]
    NonFinite { at: String, r: f64 },
    #[error("parameter `{0}` is not bound")]
    Unbound(&'static str),
    #[error("radius must be positive, got {0}")]
    BadRadius(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("unknown catalog entry `{0}`")]
    UnknownName(String),
    #[error("catalog entry `{name}` needs parameter {param}")]
    MissingParam { name: &'static str, param: &'static str },
    #[error("catalog entry `{name}`: {msg}")]
    InvalidParam { name: &'static str, msg: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("invalid domain: {0}")]
    Domain(String),
    #[error("invalid grid bounds: {0}")]
    Bounds(String),
    #[error("non-finite sample at node {index} (r = {r})")]
    NonFinite { index: usize, r: f64 },
    #[error("sample length {got} does not match grid size {want}")]
    Length { got: usize, want: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("eigen-solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("could not bracket the smallest eigenvalue: {0}")]
    Bracket(String),
    #[error("matrix sizes do not match: {0}")]
    Shape(String),
    #[error("mass matrix is not positive definite")]
    MassNotDefinite,
    #[error("empty problem")]
    Empty,
}

/// Errors from the numerical layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("weight V must be positive on the grid, got V({r}) = {value}")]
    NonPositiveV { r: f64, value: f64 },
    #[error("right-hand form is indefinite for mode k = {k}; use the margin operation instead")]
    IndefiniteRhs { k: u32 },
    #[error("incompatible forms: {0}")]
    FormMismatch(String),
    #[error("{0}")]
    Unsupported(String),
    #[error("profile violates support requirement: {0}")]
    Support(String),
    #[error("need at least two converged modes, got {0}")]
    TooFewModes(usize),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
