//! Closed-form mode constants for `V = 1` and pure power weights, from the
//! power profiles `u = r^s`, `s = σ + iτ`, on the scale-invariant line.

use super::Problem;
use crate::modeforms::mode_coeff;

/// Upper end of the `τ` search interval.
pub const TAU_MAX: f64 = 100.0;

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Ratio of the mode-`k` forms at `u = r^{σ + iτ}`.
pub fn mellin_ratio(problem: Problem, n: u32, k: u32, tau: f64) -> f64 {
    let nf = n as f64;
    let c = mode_coeff(k, n);
    match problem {
        Problem::Hardy => {
            let sigma = (2.0 - nf) / 2.0;
            sigma * sigma + tau * tau + c
        }
        Problem::HardyRellich | Problem::Rellich => {
            let sigma = (4.0 - nf) / 2.0;
            let s2 = sigma * sigma + tau * tau;
            let s1 = (sigma - 1.0) * (sigma - 1.0) + tau * tau;
            let num = s2 * s1 + (nf - 1.0 + 2.0 * c) * s2 + c * c + 2.0 * (nf - 4.0) * c;
            match problem {
                Problem::Rellich => num,
                // the common factor |s|^2 cancels at k = 0
                _ if k == 0 => s1 + nf - 1.0,
                _ => num / (s2 + c),
            }
        }
    }
}

/// `min_τ` of [`mellin_ratio`] over `[0, TAU_MAX]`: coarse scan followed by
/// golden-section refinement of the best bracket.
pub fn mellin_constant(problem: Problem, n: u32, k: u32) -> f64 {
    let f = |t: f64| mellin_ratio(problem, n, k, t);
    let samples = 4000;
    let step = TAU_MAX / samples as f64;
    let mut best = 0;
    let mut best_val = f(0.0);
    for i in 1..=samples {
        let v = f(i as f64 * step);
        if v < best_val {
            best_val = v;
            best = i;
        }
    }
    let mut a = (best as f64 - 1.0).max(0.0) * step;
    let mut b = ((best + 1) as f64 * step).min(TAU_MAX);
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = f(x2);
        }
        if b - a < 1e-12 {
            break;
        }
    }
    best_val.min(f1).min(f2).min(f(a)).min(f(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hardy_rellich_values() {
        assert!((mellin_constant(Problem::HardyRellich, 5, 0) - 6.25).abs() < 1e-12);
        assert!((mellin_constant(Problem::HardyRellich, 4, 0) - 4.0).abs() < 1e-12);
        assert!((mellin_constant(Problem::HardyRellich, 4, 1) - 3.0).abs() < 1e-12);
        for n in 5..9 {
            let want = (n * n) as f64 / 4.0;
            assert!((mellin_constant(Problem::HardyRellich, n, 0) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn n4_k1_closed_form() {
        // (τ²+1)(τ²+9)/(τ²+3)
        for t in [0.0, 0.3, 1.0, 2.5, 10.0] {
            let t2: f64 = t * t;
            let want = (t2 + 1.0) * (t2 + 9.0) / (t2 + 3.0);
            assert!((mellin_ratio(Problem::HardyRellich, 4, 1, t) - want).abs() < 1e-12 * want);
        }
    }

    #[test]
    fn k0_limit_matches_general_formula() {
        for n in 3..9 {
            for t in [0.1, 1.0, 3.0] {
                let c = 1e-9;
                let nf = n as f64;
                let sigma = (4.0 - nf) / 2.0;
                let s2 = sigma * sigma + t * t;
                let s1 = (sigma - 1.0) * (sigma - 1.0) + t * t;
                let general = (s2 * s1 + (nf - 1.0 + 2.0 * c) * s2 + c * c + 2.0 * (nf - 4.0) * c) / (s2 + c);
                let closed = mellin_ratio(Problem::HardyRellich, n, 0, t);
                assert!((general - closed).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn rellich_and_hardy() {
        assert!((mellin_constant(Problem::Rellich, 5, 0) - 25.0 / 16.0).abs() < 1e-12);
        for n in 3..9u32 {
            let nf = n as f64;
            let want = nf * nf * (nf - 4.0) * (nf - 4.0) / 16.0;
            assert!((mellin_constant(Problem::Rellich, n, 0) - want).abs() < 1e-12, "N={n}");
            assert!((mellin_constant(Problem::Hardy, n, 0) - (nf - 2.0).powi(2) / 4.0).abs() < 1e-12);
        }
        assert!((mellin_constant(Problem::Hardy, 5, 0) - 2.25).abs() < 1e-12);
        assert!((mellin_constant(Problem::Hardy, 5, 1) - 6.25).abs() < 1e-12);
    }

    #[test]
    fn agrees_with_brute_force() {
        for (p, n, k) in [(Problem::HardyRellich, 3, 2), (Problem::Rellich, 6, 3), (Problem::HardyRellich, 8, 4)] {
            let direct = (0..200_001)
                .map(|i| mellin_ratio(p, n, k, i as f64 * 1e-4))
                .fold(f64::INFINITY, f64::min);
            let got = mellin_constant(p, n, k);
            assert!(got <= direct + 1e-12);
            assert!((got - direct).abs() < 1e-8 * direct);
        }
    }
}
