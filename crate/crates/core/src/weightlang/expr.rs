use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::EvalError;

/// Free parameters a weight may depend on besides `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Param {
    /// Dimension.
    N,
    /// Radius of the ball (may be infinite).
    R,
    /// Exponent parameter of the CKN family.
    B,
    /// Generic multiplier.
    C,
}

impl Param {
    pub fn symbol(self) -> &'static str {
        match self {
            Param::N => "N",
            Param::R => "R",
            Param::B => "b",
            Param::C => "c",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Param(Param),
    Var,
    Neg(Arc<Node>),
    Add(Arc<Node>, Arc<Node>),
    Sub(Arc<Node>, Arc<Node>),
    Mul(Arc<Node>, Arc<Node>),
    Div(Arc<Node>, Arc<Node>),
    Pow(Arc<Node>, Arc<Node>),
    Exp(Arc<Node>),
    Ln(Arc<Node>),
}

/// Values for the free parameters of a [`WeightExpr`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamBinding {
    pub n: Option<f64>,
    pub radius: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
}

impl ParamBinding {
    pub fn with_dim(n: u32) -> Self {
        ParamBinding {
            n: Some(n as f64),
            ..Default::default()
        }
    }

    /// Same binding with `N` replaced.
    pub fn n(mut self, n: u32) -> Self {
        self.n = Some(n as f64);
        self
    }

    pub fn radius(mut self, radius: f64) -> Self {
        self.radius = Some(radius);
        self
    }

    pub fn b(mut self, b: f64) -> Self {
        self.b = Some(b);
        self
    }

    pub fn c(mut self, c: f64) -> Self {
        self.c = Some(c);
        self
    }

    pub fn get(&self, p: Param) -> Option<f64> {
        match p {
            Param::N => self.n,
            Param::R => self.radius,
            Param::B => self.b,
            Param::C => self.c,
        }
    }

    pub fn dim(&self) -> Option<u32> {
        self.n.map(|n| n as u32)
    }
}

/// A radial weight `r -> V(r)` built from constants, parameters, `r`,
/// the four arithmetic operations, real powers, `exp` and `ln`.
///
/// Cloning is cheap; the tree is shared and never mutated.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightExpr {
    root: Arc<Node>,
}

impl WeightExpr {
    pub(crate) fn from_node(node: Node) -> Self {
        WeightExpr {
            root: Arc::new(node),
        }
    }

    pub(crate) fn from_arc(root: Arc<Node>) -> Self {
        WeightExpr { root }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub(crate) fn arc(&self) -> &Arc<Node> {
        &self.root
    }

    pub fn constant(c: f64) -> Self {
        Self::from_node(Node::Const(c))
    }

    pub fn var() -> Self {
        Self::from_node(Node::Var)
    }

    pub fn param(p: Param) -> Self {
        Self::from_node(Node::Param(p))
    }

    pub fn is_zero(&self) -> bool {
        matches!(*self.root, Node::Const(c) if c == 0.0)
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self.root {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    /// Whether the expression depends on `r`.
    pub fn depends_on_r(&self) -> bool {
        depends_on_var(&self.root)
    }

    /// Parameters referenced anywhere in the tree, in first-seen order.
    pub fn free_params(&self) -> Vec<Param> {
        let mut out = Vec::new();
        collect_params(&self.root, &mut out);
        out
    }

    pub fn evaluate(&self, r: f64, binding: &ParamBinding) -> Result<f64, EvalError> {
        if !(r > 0.0) || r.is_nan() {
            return Err(EvalError::BadRadius(r));
        }
        let v = eval_node(&self.root, r, binding)?;
        if v.is_nan() {
            return Err(EvalError::NonFinite {
                at: self.to_string(),
                r,
            });
        }
        Ok(v)
    }

    /// Evaluates on every point of `rs`, failing on the first singularity.
    pub fn evaluate_many(&self, rs: &[f64], binding: &ParamBinding) -> Result<Vec<f64>, EvalError> {
        rs.iter().map(|&r| self.evaluate(r, binding)).collect()
    }

    /// Checks that every free symbol is bound.
    pub fn check_bound(&self, binding: &ParamBinding) -> Result<(), EvalError> {
        for p in self.free_params() {
            if binding.get(p).is_none() {
                return Err(EvalError::Unbound(p.symbol()));
            }
        }
        Ok(())
    }
}

fn depends_on_var(n: &Node) -> bool {
    match n {
        Node::Const(_) | Node::Param(_) => false,
        Node::Var => true,
        Node::Neg(a) | Node::Exp(a) | Node::Ln(a) => depends_on_var(a),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
            depends_on_var(a) || depends_on_var(b)
        }
    }
}

fn collect_params(n: &Node, out: &mut Vec<Param>) {
    match n {
        Node::Const(_) | Node::Var => {}
        Node::Param(p) => {
            if !out.contains(p) {
                out.push(*p);
            }
        }
        Node::Neg(a) | Node::Exp(a) | Node::Ln(a) => collect_params(a, out),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b) => {
            collect_params(a, out);
            collect_params(b, out);
        }
    }
}

fn node_str(n: &Node) -> String {
    WeightExpr::from_node(n.clone()).to_string()
}

fn eval_node(n: &Node, r: f64, b: &ParamBinding) -> Result<f64, EvalError> {
    Ok(match n {
        Node::Const(c) => *c,
        Node::Param(p) => b.get(*p).ok_or(EvalError::Unbound(p.symbol()))?,
        Node::Var => r,
        Node::Neg(a) => -eval_node(a, r, b)?,
        Node::Add(x, y) => eval_node(x, r, b)? + eval_node(y, r, b)?,
        Node::Sub(x, y) => eval_node(x, r, b)? - eval_node(y, r, b)?,
        Node::Mul(x, y) => eval_node(x, r, b)? * eval_node(y, r, b)?,
        Node::Div(x, y) => {
            let num = eval_node(x, r, b)?;
            let den = eval_node(y, r, b)?;
            if den == 0.0 {
                return Err(EvalError::DivisionByZero { at: node_str(n), r });
            }
            num / den
        }
        Node::Pow(x, y) => {
            let base = eval_node(x, r, b)?;
            let exp = eval_node(y, r, b)?;
            if base < 0.0 && exp.fract() != 0.0 {
                return Err(EvalError::NegativeBase { at: node_str(n), r });
            }
            if base == 0.0 && exp < 0.0 {
                return Err(EvalError::DivisionByZero { at: node_str(n), r });
            }
            if exp.fract() == 0.0 && exp.abs() <= 64.0 {
                base.powi(exp as i32)
            } else {
                base.powf(exp)
            }
        }
        Node::Exp(a) => eval_node(a, r, b)?.exp(),
        Node::Ln(a) => {
            let v = eval_node(a, r, b)?;
            if v <= 0.0 {
                return Err(EvalError::LogDomain { at: node_str(n), r });
            }
            v.ln()
        }
    })
}

// Smart constructors with light constant folding. Used by the derivative
// and by programmatic construction; the parser builds raw nodes.

pub fn add(a: WeightExpr, b: WeightExpr) -> WeightExpr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => WeightExpr::constant(x + y),
        (Some(x), _) if x == 0.0 => b,
        (_, Some(y)) if y == 0.0 => a,
        (_, Some(y)) if y < 0.0 => WeightExpr::from_node(Node::Sub(a.root, Arc::new(Node::Const(-y)))),
        _ => WeightExpr::from_node(Node::Add(a.root, b.root)),
    }
}

pub fn sub(a: WeightExpr, b: WeightExpr) -> WeightExpr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => WeightExpr::constant(x - y),
        (Some(x), _) if x == 0.0 => neg(b),
        (_, Some(y)) if y == 0.0 => a,
        _ => WeightExpr::from_node(Node::Sub(a.root, b.root)),
    }
}

pub fn neg(a: WeightExpr) -> WeightExpr {
    match a.root.as_ref() {
        Node::Const(c) => WeightExpr::constant(-c),
        Node::Neg(inner) => WeightExpr::from_arc(inner.clone()),
        Node::Mul(x, y) => match **x {
            Node::Const(c) => mul(WeightExpr::constant(-c), WeightExpr::from_arc(y.clone())),
            _ => WeightExpr::from_node(Node::Neg(a.root)),
        },
        _ => WeightExpr::from_node(Node::Neg(a.root)),
    }
}

pub fn mul(a: WeightExpr, b: WeightExpr) -> WeightExpr {
    match (a.as_const(), b.as_const()) {
        (Some(x), Some(y)) => WeightExpr::constant(x * y),
        (Some(x), _) | (_, Some(x)) if x == 0.0 => WeightExpr::constant(0.0),
        (Some(x), _) if x == 1.0 => b,
        (_, Some(y)) if y == 1.0 => a,
        (Some(x), _) if x == -1.0 => neg(b),
        (_, Some(y)) if y == -1.0 => neg(a),
        // keep constants on the left
        (None, Some(_)) => mul(b, a),
        (Some(x), None) => match b.root.as_ref() {
            Node::Mul(p, q) if matches!(**p, Node::Const(_)) => {
                let Node::Const(c) = **p else { unreachable!() };
                mul(WeightExpr::constant(x * c), WeightExpr::from_arc(q.clone()))
            }
            _ => WeightExpr::from_node(Node::Mul(a.root, b.root)),
        },
        _ => WeightExpr::from_node(Node::Mul(a.root, b.root)),
    }
}

pub fn div(a: WeightExpr, b: WeightExpr) -> WeightExpr {
    match (a.as_const(), b.as_const()) {
        (Some(x), _) if x == 0.0 => WeightExpr::constant(0.0),
        (Some(x), Some(y)) if y != 0.0 => WeightExpr::constant(x / y),
        (_, Some(y)) if y == 1.0 => a,
        _ => WeightExpr::from_node(Node::Div(a.root, b.root)),
    }
}

pub fn pow(a: WeightExpr, b: WeightExpr) -> WeightExpr {
    match (a.as_const(), b.as_const()) {
        (_, Some(y)) if y == 0.0 => WeightExpr::constant(1.0),
        (_, Some(y)) if y == 1.0 => a,
        (Some(x), Some(y)) if x > 0.0 || y.fract() == 0.0 => {
            let v = x.powf(y);
            if v.is_finite() {
                WeightExpr::constant(v)
            } else {
                WeightExpr::from_node(Node::Pow(a.root, b.root))
            }
        }
        _ => WeightExpr::from_node(Node::Pow(a.root, b.root)),
    }
}

pub fn exp(a: WeightExpr) -> WeightExpr {
    WeightExpr::from_node(Node::Exp(a.root))
}

pub fn ln(a: WeightExpr) -> WeightExpr {
    WeightExpr::from_node(Node::Ln(a.root))
}

fn fmt_const(c: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    // `{:?}` is the shortest representation that round-trips.
    if c < 0.0 {
        write!(f, "(-{:?})", -c)
    } else {
        write!(f, "{:?}", c)
    }
}

fn fmt_node(n: &Node, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let bin = |f: &mut fmt::Formatter<'_>, a: &Node, op: &str, b: &Node| -> fmt::Result {
        write!(f, "(")?;
        fmt_node(a, f)?;
        write!(f, "{op}")?;
        fmt_node(b, f)?;
        write!(f, ")")
    };
    match n {
        Node::Const(c) => fmt_const(*c, f),
        Node::Param(p) => write!(f, "{}", p.symbol()),
        Node::Var => write!(f, "r"),
        Node::Neg(a) => {
            write!(f, "(-")?;
            fmt_node(a, f)?;
            write!(f, ")")
        }
        Node::Add(a, b) => bin(f, a, "+", b),
        Node::Sub(a, b) => bin(f, a, "-", b),
        Node::Mul(a, b) => bin(f, a, "*", b),
        Node::Div(a, b) => bin(f, a, "/", b),
        Node::Pow(a, b) => bin(f, a, "^", b),
        Node::Exp(a) => {
            write!(f, "exp(")?;
            fmt_node(a, f)?;
            write!(f, ")")
        }
        Node::Ln(a) => {
            write!(f, "ln(")?;
            fmt_node(a, f)?;
            write!(f, ")")
        }
    }
}

/// Canonical, fully parenthesized form. Re-parses to a structurally equal tree.
impl fmt::Display for WeightExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_node(&self.root, f)
    }
}

impl Serialize for WeightExpr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}
