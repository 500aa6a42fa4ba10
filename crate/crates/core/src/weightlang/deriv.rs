use std::sync::Arc;

use super::expr::{self as e, Node, WeightExpr};

/// Symbolic `d/dr`. Parameters are treated as constants.
pub fn derivative(expr: &WeightExpr) -> WeightExpr {
    d(expr.arc())
}

/// `n`-th derivative.
pub fn nth_derivative(expr: &WeightExpr, n: usize) -> WeightExpr {
    (0..n).fold(expr.clone(), |acc, _| derivative(&acc))
}

fn w(n: &Arc<Node>) -> WeightExpr {
    WeightExpr::from_arc(n.clone())
}

fn d(n: &Arc<Node>) -> WeightExpr {
    match n.as_ref() {
        Node::Const(_) | Node::Param(_) => WeightExpr::constant(0.0),
        Node::Var => WeightExpr::constant(1.0),
        Node::Neg(a) => e::neg(d(a)),
        Node::Add(a, b) => e::add(d(a), d(b)),
        Node::Sub(a, b) => e::sub(d(a), d(b)),
        Node::Mul(a, b) => e::add(e::mul(d(a), w(b)), e::mul(w(a), d(b))),
        Node::Div(a, b) => {
            let da = d(a);
            let db = d(b);
            if db.is_zero() {
                e::div(da, w(b))
            } else {
                e::div(
                    e::sub(e::mul(da, w(b)), e::mul(w(a), db)),
                    e::pow(w(b), WeightExpr::constant(2.0)),
                )
            }
        }
        Node::Pow(a, b) => {
            let base = w(a);
            let exp = w(b);
            if !exp.depends_on_r() {
                // c * f^(c-1) * f'
                let lowered = match exp.as_const() {
                    Some(c) => WeightExpr::constant(c - 1.0),
                    None => e::sub(exp.clone(), WeightExpr::constant(1.0)),
                };
                e::mul(e::mul(exp, e::pow(base.clone(), lowered)), d(a))
            } else {
                // f^g * (g' ln f + g f'/f)
                let this = w(n);
                let t1 = e::mul(d(b), e::ln(base.clone()));
                let t2 = e::div(e::mul(exp, d(a)), base);
                e::mul(this, e::add(t1, t2))
            }
        }
        Node::Exp(a) => e::mul(d(a), w(n)),
        Node::Ln(a) => e::div(d(a), w(a)),
    }
}
