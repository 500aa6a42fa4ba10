#![allow(dead_code)]

use hrlab::besselpair::shift_dimension;
use hrlab::weightlang::{add, derivative, div, mul, neg, nth_derivative, parse, pow, ParamBinding, WeightExpr};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SEED: u64 = 0x5eed_2024;

/// A weight `V` with `W` such that `(V, W + N V'/r)` is an `(N+2)`-dimensional
/// Bessel pair, built by shifting an `N`-dimensional pair.
#[derive(Debug, Clone)]
pub struct Admissible {
    pub v: WeightExpr,
    pub w: WeightExpr,
    pub n: u32,
}

fn c(x: f64) -> WeightExpr {
    WeightExpr::constant(x)
}

/// `-(r^{N-1} V φ')' / (r^{N-1} φ)` for `φ = e^ψ`.
pub fn pair_weight(v: &WeightExpr, psi: &WeightExpr, n: u32) -> WeightExpr {
    let r = WeightExpr::var();
    let p1 = derivative(psi);
    let p2 = nth_derivative(psi, 2);
    let drift = add(div(mul(c(n as f64 - 1.0), v.clone()), r), derivative(v));
    neg(add(
        mul(v.clone(), add(p2, mul(p1.clone(), p1.clone()))),
        mul(drift, p1),
    ))
}

/// `V = Σ a_i r^{p_i}` with `p_i` mostly inside the range where each power
/// satisfies Con2, and `φ = r^{-γ} e^{-α r^β}`.
pub fn random_admissible(rng: &mut ChaCha8Rng) -> Admissible {
    let n = rng.gen_range(5..=7);
    let r = WeightExpr::var();
    let mut v = c(0.0);
    for _ in 0..rng.gen_range(1..=3) {
        let a = rng.gen_range(0.2..2.0);
        let p = rng.gen_range(-0.5..4.5);
        v = add(v, mul(c(a), pow(r.clone(), c(p))));
    }
    let (alpha, beta, gamma) = (rng.gen_range(0.1..1.0), rng.gen_range(0.5..2.0), rng.gen_range(0.0..1.5));
    let psi = add(
        neg(mul(c(gamma), hrlab::weightlang::ln(r.clone()))),
        neg(mul(c(alpha), pow(r.clone(), c(beta)))),
    );
    let w1 = pair_weight(&v, &psi, n);
    let (w2, _) = shift_dimension(&v, &w1, n);
    // subtract N V'/r
    let w = add(w2, neg(div(mul(c(n as f64), derivative(&v)), r)));
    Admissible { v, w, n }
}

pub fn random_admissible_set(count: usize) -> Vec<Admissible> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    (0..count).map(|_| random_admissible(&mut rng)).collect()
}

pub fn binding(n: u32) -> ParamBinding {
    ParamBinding::with_dim(n)
}

pub fn e(text: &str) -> WeightExpr {
    parse(text).unwrap()
}
