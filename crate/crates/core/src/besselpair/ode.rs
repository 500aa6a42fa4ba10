//! Phase integration of `(r^{d-1} V φ')' + r^{d-1} W φ = 0`.
//!
//! In `t = ln r` the equation reads `φ_tt + a φ_t + b φ = 0` with
//! `a = d - 2 + r V'/V` and `b = r^2 W/V`. The solution is carried in
//! modified Prüfer variables
//!
//! ```text
//! φ = ρ cos θ,   φ_t = q ρ sin θ,   q = (1 + b^2)^{1/4},
//! θ_t    = -(a + q_t/q) cos θ sin θ - (b/q) cos^2 θ - q sin^2 θ,
//! (ln ρ)_t = (q - b/q) cos θ sin θ - (a + q_t/q) sin^2 θ.
//! ```
//!
//! `ln ρ` absorbs all growth and decay, and `θ` sits near a stable
//! equilibrium wherever `|b|` is large, so the phase equation is stiff but
//! smooth. It is integrated by three-stage Radau IIA collocation; the step
//! size is controlled by the defect of the collocation polynomial.

use crate::error::{Error, Result};
use crate::weightlang::{derivative, ParamBinding, WeightExpr};

/// Step budget (accepted and rejected) before a trace is declared incomplete.
pub const MAX_STEPS: usize = 200_000;
/// Target for the normalized defect at the control points of each step.
pub const DEFECT_TOL: f64 = 1e-9;

/// Largest phase change accepted in one step.
const MAX_TURN: f64 = std::f64::consts::FRAC_PI_4;
const SQ6: f64 = 2.449_489_742_783_178;
const C: [f64; 3] = [(4.0 - SQ6) / 10.0, (4.0 + SQ6) / 10.0, 1.0];
const A: [[f64; 3]; 3] = [
    [(88.0 - 7.0 * SQ6) / 360.0, (296.0 - 169.0 * SQ6) / 1800.0, (-2.0 + 3.0 * SQ6) / 225.0],
    [(296.0 + 169.0 * SQ6) / 1800.0, (88.0 + 7.0 * SQ6) / 360.0, (-2.0 - 3.0 * SQ6) / 225.0],
    [(16.0 - SQ6) / 36.0, (16.0 + SQ6) / 36.0, 1.0 / 9.0],
];
// where the defect is sampled inside a step, between the collocation points
const PROBES: [f64; 4] = [0.0, 0.08, 0.4, 0.82];
const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_3, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Coefficients of the phase equation at one point.
#[derive(Debug, Clone, Copy)]
struct Coef {
    /// `a + q_t/q`
    damp: f64,
    /// `b/q`
    bq: f64,
    q: f64,
}

impl Coef {
    fn rhs(&self, th: f64) -> f64 {
        let (s, c) = th.sin_cos();
        -self.damp * c * s - self.bq * c * c - self.q * s * s
    }

    fn slope(&self, th: f64) -> f64 {
        let (s2, c2) = (2.0 * th).sin_cos();
        -self.damp * c2 + self.bq * s2 - self.q * s2
    }

    fn growth(&self, th: f64) -> f64 {
        let (s, c) = th.sin_cos();
        (self.q - self.bq) * c * s - self.damp * s * s
    }

    /// Size of the individual terms of [`Coef::rhs`].
    fn scale(&self, th: f64) -> f64 {
        let (s, c) = th.sin_cos();
        (self.damp * c * s).abs() + (self.bq * c * c).abs() + self.q * s * s
    }

    fn defect(&self, th: f64, dth: f64) -> f64 {
        let d = (dth - self.rhs(th)).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.scale(th).max(f64::MIN_POSITIVE)
        }
    }
}

struct Weights<'a> {
    v: &'a WeightExpr,
    w: &'a WeightExpr,
    dv: WeightExpr,
    dw: WeightExpr,
    d: f64,
    binding: &'a ParamBinding,
}

impl Weights<'_> {
    fn at(&self, t: f64) -> Result<Coef> {
        let r = t.exp();
        let v = self.v.evaluate(r, self.binding)?;
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::NonPositiveV { r, value: v });
        }
        let w = self.w.evaluate(r, self.binding)?;
        let dv = self.dv.evaluate(r, self.binding)?;
        let dw = self.dw.evaluate(r, self.binding)?;
        let a = self.d - 2.0 + r * dv / v;
        let b = r * r * w / v;
        let b_t = r * (2.0 * r * w / v + r * r * (dw * v - w * dv) / (v * v));
        let q = (1.0 + b * b).sqrt().sqrt();
        let ql = if b == 0.0 { 0.0 } else { b * b_t / (2.0 * (1.0 + b * b)) };
        let coef = Coef { damp: a + ql, bq: b / q, q };
        if !(coef.damp.is_finite() && coef.bq.is_finite() && q.is_finite()) {
            return Err(Error::Eval(crate::error::EvalError::NonFinite {
                at: format!("phase coefficients of V={}, W={}", self.v, self.w),
                r,
            }));
        }
        Ok(coef)
    }
}

/// Lagrange data of the collocation polynomial on `[0, 1]` through
/// `(0, 0), (c_1, y_1), (c_2, y_2), (1, y_3)`, with `y` relative to `θ_0`.
fn lagrange(tau: f64, y: &[f64; 3]) -> (f64, f64) {
    let x = [0.0, C[0], C[1], C[2]];
    let ys = [0.0, y[0], y[1], y[2]];
    let (mut val, mut der) = (0.0, 0.0);
    for i in 1..4 {
        let mut li = 1.0;
        let mut dli = 0.0;
        let mut denom = 1.0;
        for j in 0..4 {
            if j == i {
                continue;
            }
            denom *= x[i] - x[j];
            // product rule on Π (tau - x_j)
            dli = dli * (tau - x[j]) + li;
            li *= tau - x[j];
        }
        val += ys[i] * li / denom;
        der += ys[i] * dli / denom;
    }
    (val, der)
}

fn solve3(mut m: [[f64; 3]; 3], mut rhs: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let p = (col..3).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[p][col] == 0.0 || !m[p][col].is_finite() {
            return None;
        }
        m.swap(col, p);
        rhs.swap(col, p);
        for i in col + 1..3 {
            let f = m[i][col] / m[col][col];
            for j in col..3 {
                m[i][j] -= f * m[col][j];
            }
            rhs[i] -= f * rhs[col];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|j| m[i][j] * x[j]).sum();
        x[i] = (rhs[i] - s) / m[i][i];
    }
    Some(x)
}

/// Stage increments `Θ_j - θ_0` by Newton's method, or `None` when it fails.
fn stages(th0: f64, h: f64, co: &[Coef; 3]) -> Option<[f64; 3]> {
    let mut z = [0.0f64; 3];
    let mut prev = f64::INFINITY;
    for _ in 0..40 {
        let f: Vec<f64> = (0..3).map(|k| co[k].rhs(th0 + z[k])).collect();
        let df: Vec<f64> = (0..3).map(|k| co[k].slope(th0 + z[k])).collect();
        let mut jac = [[0.0; 3]; 3];
        let mut res = [0.0; 3];
        for j in 0..3 {
            res[j] = -(z[j] - h * (0..3).map(|k| A[j][k] * f[k]).sum::<f64>());
            for k in 0..3 {
                jac[j][k] = if j == k { 1.0 } else { 0.0 } - h * A[j][k] * df[k];
            }
        }
        let dz = solve3(jac, res)?;
        let mut big = 0.0f64;
        let mut size = 0.0f64;
        for j in 0..3 {
            z[j] += dz[j];
            big = big.max(dz[j].abs());
            size = size.max(z[j].abs());
        }
        if !big.is_finite() {
            return None;
        }
        let floor = 1e-15 * size + 4.0 * f64::EPSILON * th0.abs();
        let stalled = big >= 0.5 * prev && big <= 1e-10 * (size + th0.abs());
        if big <= floor || stalled {
            return Some(z);
        }
        prev = big;
    }
    None
}

/// Raw phase trace at the requested abscissae `ts` (increasing).
#[derive(Debug, Clone)]
pub(crate) struct PhaseTrace {
    pub theta: Vec<f64>,
    pub ln_rho: Vec<f64>,
    pub defect: Vec<f64>,
    /// Smallest phase seen at any node, stage or step end.
    pub theta_min: f64,
    pub steps: usize,
    /// Number of leading entries of `ts` that were reached.
    pub reached: usize,
    pub failure: Option<String>,
}

/// Integrates from `ts[0]` with `φ_t/φ = slope0` there.
pub(crate) fn integrate_phase(
    v: &WeightExpr,
    w: &WeightExpr,
    d: u32,
    binding: &ParamBinding,
    ts: &[f64],
    slope0: f64,
) -> Result<PhaseTrace> {
    let wts = Weights {
        v,
        w,
        dv: derivative(v),
        dw: derivative(w),
        d: d as f64,
        binding,
    };
    let t_end = *ts.last().expect("at least one abscissa");
    let mut t = ts[0];
    let mut c_here = wts.at(t)?;
    let mut th = slope0.atan2(c_here.q);
    let mut lr = 0.0;
    let mut out = PhaseTrace {
        theta: vec![th],
        ln_rho: vec![0.0],
        defect: vec![0.0],
        theta_min: th,
        steps: 0,
        reached: 1,
        failure: None,
    };
    let span = t_end - t;
    let mut h = (1e-3 * span).max(1e-6).min(span);
    let mut next = 1;
    while next < ts.len() {
        if out.steps >= MAX_STEPS {
            out.failure = Some(format!("step budget of {MAX_STEPS} exhausted at r = {:e}", t.exp()));
            return Ok(out);
        }
        if h < 1e-13 * t.abs().max(1.0) {
            out.failure = Some(format!("step size underflow at r = {:e}", t.exp()));
            return Ok(out);
        }
        out.steps += 1;
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        let co = [wts.at(t + C[0] * h)?, wts.at(t + C[1] * h)?, wts.at(t_end.min(t + h))?];
        // the phase equation is π-periodic: large stage increments can land
        // on a shifted branch of the equilibrium
        let Some(z) = stages(th, h, &co).filter(|z| z.iter().all(|x| x.abs() <= MAX_TURN)) else {
            h *= 0.25;
            continue;
        };
        let mut err = 0.0f64;
        for &p in &PROBES {
            let (val, der) = lagrange(p, &z);
            let cp = if p == 0.0 { c_here } else { wts.at(t + p * h)? };
            err = err.max(cp.defect(th + val, der / h));
        }
        if err > DEFECT_TOL {
            h *= (0.9 * (DEFECT_TOL / err).powf(1.0 / 3.0)).max(0.1);
            continue;
        }
        let t1 = if last { t_end } else { t + h };
        while next < ts.len() && ts[next] <= t1 {
            let tau = ((ts[next] - t) / h).clamp(0.0, 1.0);
            let (val, der) = lagrange(tau, &z);
            let cn = wts.at(ts[next])?;
            let mut inc = 0.0;
            for &(x, wq) in &GAUSS3 {
                let s = x * tau;
                let cs = wts.at(t + s * h)?;
                inc += wq * cs.growth(th + lagrange(s, &z).0);
            }
            out.theta.push(th + val);
            out.ln_rho.push(lr + inc * tau * h);
            out.defect.push(cn.defect(th + val, der / h));
            out.theta_min = out.theta_min.min(th + val);
            next += 1;
        }
        lr += h * (0..3).map(|k| A[2][k] * co[k].growth(th + z[k])).sum::<f64>();
        for &zk in &z {
            out.theta_min = out.theta_min.min(th + zk);
        }
        th += z[2];
        t = t1;
        c_here = co[2];
        out.reached = next;
        let grow = if err == 0.0 { 4.0 } else { (0.9 * (DEFECT_TOL / err).powf(1.0 / 3.0)).clamp(0.2, 4.0) };
        h = (h * grow).min(span);
    }
    Ok(out)
}

/// Zeros of `φ` implied by a minimum phase: the phase only crosses
/// `-π/2 - mπ` downwards.
pub(crate) fn zeros_from_phase(theta_min: f64) -> u32 {
    let m = ((std::f64::consts::FRAC_PI_2 - theta_min) / std::f64::consts::PI).floor();
    m.max(0.0) as u32
}
