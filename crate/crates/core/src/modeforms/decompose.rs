//! Three-dimensional check of the mode decomposition of `∫ V |Δu|^2` and
//! `∫ W |∇u|^2` for `u = Σ u_k(r) Y_k` with zonal harmonics `Y_k`, `k ≤ 2`.

use rayon::prelude::*;
use serde::Serialize;

use super::mode_coeff;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::weightlang::{nth_derivative, ParamBinding, WeightExpr};

/// Radial profile of one mode, supported in `support`.
#[derive(Debug, Clone)]
pub struct ModeProfile {
    pub k: u32,
    pub profile: WeightExpr,
    pub support: (f64, f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct DecomposeReport {
    pub lhs_3d: f64,
    pub lhs_modes: f64,
    pub rhs_3d: f64,
    pub rhs_modes: f64,
    /// Largest relative discrepancy of the two identities.
    pub residual: f64,
}

const SQRT_PI4: f64 = 3.544_907_701_811_032; // sqrt(4π)

/// Zonal spherical harmonic of degree `k ≤ 2` in `R^3`, normalized on the
/// unit sphere, as a function of `cos θ`.
pub fn sphere_harmonic(k: u32, x: f64) -> Option<f64> {
    match k {
        0 => Some(1.0 / SQRT_PI4),
        1 => Some(3f64.sqrt() / SQRT_PI4 * x),
        2 => Some(5f64.sqrt() / SQRT_PI4 * 0.5 * (3.0 * x * x - 1.0)),
        _ => None,
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        xs[i] = x;
        ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (xs, ws)
}

/// Composite Gauss-Legendre rule on `(a, b)`.
fn composite(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (xs, ws) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (x, w) in xs.iter().zip(&ws) {
            out.push((mid + 0.5 * h * x, 0.5 * h * w));
        }
    }
    out
}

struct Prepared {
    k: u32,
    d: [WeightExpr; 3],
    support: (f64, f64),
}

impl Prepared {
    fn value(&self, r: f64, order: usize, b: &ParamBinding) -> Result<f64> {
        if r <= self.support.0 || r >= self.support.1 {
            return Ok(0.0);
        }
        Ok(self.d[order].evaluate(r, b)?)
    }
}

fn prepare(profiles: &[ModeProfile], grid: &Grid, b: &ParamBinding) -> Result<Vec<Prepared>> {
    let mut seen = [false; 3];
    let mut out = Vec::new();
    for p in profiles {
        let k = p.k as usize;
        if k > 2 {
            return Err(Error::Unsupported(format!("mode k = {} (only k <= 2)", p.k)));
        }
        if seen[k] {
            return Err(Error::Support(format!("mode k = {} given twice", p.k)));
        }
        seen[k] = true;
        let (a, c) = p.support;
        if !(a >= grid.r_min && c <= grid.r_max && a < c) {
            return Err(Error::Support(format!(
                "support ({a}, {c}) not inside the window ({}, {})",
                grid.r_min, grid.r_max
            )));
        }
        let d = [
            p.profile.clone(),
            nth_derivative(&p.profile, 1),
            nth_derivative(&p.profile, 2),
        ];
        let scale = (1..64)
            .map(|i| d[0].evaluate(a + (c - a) * i as f64 / 64.0, b).map(f64::abs))
            .collect::<std::result::Result<Vec<_>, _>>()?
            .into_iter()
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        for end in [a, c] {
            let u = d[0].evaluate(end, b)?;
            let du = d[1].evaluate(end, b)? * (c - a);
            if u.abs() > 1e-10 * scale || du.abs() > 1e-10 * scale {
                return Err(Error::Support(format!(
                    "profile of mode {} does not vanish to first order at r = {end}",
                    p.k
                )));
            }
        }
        out.push(Prepared {
            k: p.k,
            d,
            support: p.support,
        });
    }
    Ok(out)
}

/// Continuous 1-D mode integrals `(A_k, B_k)` by composite Gauss quadrature
/// with symbolic derivatives.
fn mode_integrals(
    p: &Prepared,
    v: &[WeightExpr; 3],
    w: &WeightExpr,
    n: f64,
    b: &ParamBinding,
) -> Result<(f64, f64)> {
    let c = mode_coeff(p.k, n as u32);
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for (r, wt) in composite(p.support.0, p.support.1, 64, 10) {
        let (u0, u1, u2) = (p.value(r, 0, b)?, p.value(r, 1, b)?, p.value(r, 2, b)?);
        let (v0, v1, v2) = (v[0].evaluate(r, b)?, v[1].evaluate(r, b)?, v[2].evaluate(r, b)?);
        let rp = |e: f64| r.powf(n - 1.0 + e);
        lhs += wt
            * (v0 * rp(0.0) * u2 * u2
                + (n - 1.0 + 2.0 * c) * v0 * rp(-2.0) * u1 * u1
                + (c * c + 2.0 * (n - 4.0) * c) * v0 * rp(-4.0) * u0 * u0
                - (n - 1.0) * v1 * rp(-1.0) * u1 * u1
                - (n - 5.0) * c * v1 * rp(-3.0) * u0 * u0
                - c * v2 * rp(-2.0) * u0 * u0);
        let w0 = w.evaluate(r, b)?;
        rhs += wt * (w0 * rp(0.0) * u1 * u1 + c * w0 * rp(-2.0) * u0 * u0);
    }
    Ok((lhs, rhs))
}

fn field(profiles: &[Prepared], x: [f64; 3], b: &ParamBinding) -> Result<f64> {
    let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
    let ct = x[2] / r;
    let mut u = 0.0;
    for p in profiles {
        let y = sphere_harmonic(p.k, ct).expect("k <= 2");
        u += p.value(r, 0, b)? * y;
    }
    Ok(u)
}

/// Fourth order central differences of `u` along each axis:
/// returns `(∇u, Δu)`.
fn derivatives(profiles: &[Prepared], x: [f64; 3], delta: f64, b: &ParamBinding) -> Result<([f64; 3], f64)> {
    let u0 = field(profiles, x, b)?;
    let mut grad = [0.0; 3];
    let mut lap = 0.0;
    for axis in 0..3 {
        let at = |s: f64| {
            let mut y = x;
            y[axis] += s * delta;
            field(profiles, y, b)
        };
        let (m2, m1, p1, p2) = (at(-2.0)?, at(-1.0)?, at(1.0)?, at(2.0)?);
        grad[axis] = (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * delta);
        lap += (-m2 + 16.0 * m1 - 30.0 * u0 + 16.0 * p1 - p2) / (12.0 * delta * delta);
    }
    Ok((grad, lap))
}

/// Compares `∫ V |Δu|^2` and `∫ W |∇u|^2` computed by quadrature in `R^3`
/// with the sums of the continuous mode integrals. The grid only fixes the
/// admissible window and must be three dimensional.
pub fn decompose_check(
    profiles: &[ModeProfile],
    v: &WeightExpr,
    w: &WeightExpr,
    binding: &ParamBinding,
    grid: &Grid,
) -> Result<DecomposeReport> {
    if grid.domain.dim != 3 {
        return Err(Error::Unsupported(format!(
            "decomposition check runs in dimension 3, got {}",
            grid.domain.dim
        )));
    }
    if profiles.is_empty() {
        return Err(Error::Support("no profiles".into()));
    }
    let b = binding.n(3);
    let prepared = prepare(profiles, grid, &b)?;
    let vd = [v.clone(), nth_derivative(v, 1), nth_derivative(v, 2)];

    let (mut lhs_modes, mut rhs_modes) = (0.0, 0.0);
    for p in &prepared {
        let (a, c) = mode_integrals(p, &vd, w, 3.0, &b)?;
        lhs_modes += a;
        rhs_modes += c;
    }

    let lo = prepared.iter().map(|p| p.support.0).fold(f64::INFINITY, f64::min);
    let hi = prepared.iter().map(|p| p.support.1).fold(0.0, f64::max);
    let radial = composite(lo, hi, 48, 8);
    let (cx, cw) = gauss_legendre(12);
    let nphi = 4;
    let delta = 1e-3 * lo.max((hi - lo) * 1e-2);
    let parts: Vec<Result<(f64, f64)>> = radial
        .par_iter()
        .map(|&(r, wr)| {
            let (vr, wgt) = (vd[0].evaluate(r, &b)?, w.evaluate(r, &b)?);
            let (mut l, mut g) = (0.0, 0.0);
            for (ct, wc) in cx.iter().zip(&cw) {
                let st = (1.0 - ct * ct).sqrt();
                for j in 0..nphi {
                    let phi = 2.0 * std::f64::consts::PI * (j as f64 + 0.25) / nphi as f64;
                    let x = [r * st * phi.cos(), r * st * phi.sin(), r * ct];
                    let (grad, lap) = derivatives(&prepared, x, delta, &b)?;
                    let wa = wr * wc * r * r * 2.0 * std::f64::consts::PI / nphi as f64;
                    l += wa * vr * lap * lap;
                    g += wa * wgt * (grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2]);
                }
            }
            Ok((l, g))
        })
        .collect();
    let (mut lhs_3d, mut rhs_3d) = (0.0, 0.0);
    for part in parts {
        let (l, g) = part?;
        lhs_3d += l;
        rhs_3d += g;
    }
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
    Ok(DecomposeReport {
        lhs_3d,
        lhs_modes,
        rhs_3d,
        rhs_modes,
        residual: rel(lhs_3d, lhs_modes).max(rel(rhs_3d, rhs_modes)),
    })
}
