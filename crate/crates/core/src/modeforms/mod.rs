//! One-dimensional quadratic forms of the spherical-harmonics decomposition.
//!
//! A radial profile is stored by its node values `u_i`. The unknowns of a
//! form are the rescaled values `w_i = r_i^{-σ} u_i` on the free nodes, which
//! keeps power-weight problems scale invariant on a log mesh and the matrix
//! entries of order one.
//!
//! Stencils, in the mesh coordinate `t` with `r = g(t)`:
//! * order 0: node values with the grid quadrature weights;
//! * order 1: one-sided cell differences at cell midpoints (midpoint rule),
//!   which avoids the odd-even null modes of centered differences;
//! * order 2: `u'' = (u_tt - κ u_t) / g'^2` at nodes with three-point
//!   `u_tt`, `u_t` and `κ = g''/g'`. Clamped ends use the even ghost
//!   `u_{-1} = u_1`, i.e. `u' = 0` there.

mod decompose;

pub use decompose::{decompose_check, sphere_harmonic, DecomposeReport, ModeProfile};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::SymBand;
use crate::weightlang::{nth_derivative, ParamBinding, WeightExpr};

/// Laplace-Beltrami eigenvalue `c_k = k(N + k - 2)` of the degree-`k` harmonics.
pub fn mode_coeff(k: u32, n: u32) -> f64 {
    let (k, n) = (k as i64, n as i64);
    (k * (n + k - 2)) as f64
}

/// End conditions on the discrete profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// `u = u' = 0` at both truncation ends.
    Clamped,
    /// Free value at `r_min`, `u = 0` at `r_max`. First order forms only.
    FreeLeft,
}

/// Everything an assembly needs besides the weight.
#[derive(Debug, Clone)]
pub struct FormContext<'a> {
    pub grid: &'a Grid,
    /// Dimension entering the measure `r^{dim-1}`.
    pub dim: u32,
    pub binding: ParamBinding,
    /// Exponent of the diagonal rescaling `u = r^σ w`.
    pub sigma: f64,
    pub boundary: Boundary,
}

impl<'a> FormContext<'a> {
    /// Clamped context with the second order scaling `σ = (4 - dim)/2`.
    pub fn new(grid: &'a Grid, dim: u32, binding: ParamBinding) -> Self {
        FormContext {
            grid,
            dim,
            binding,
            sigma: (4.0 - dim as f64) / 2.0,
            boundary: Boundary::Clamped,
        }
    }

    /// Scaling suited to first order forms in dimension `dim`.
    pub fn first_order(grid: &'a Grid, dim: u32, binding: ParamBinding) -> Self {
        FormContext {
            sigma: (2.0 - dim as f64) / 2.0,
            ..FormContext::new(grid, dim, binding)
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    /// Inclusive node range carrying unknowns.
    pub fn dof_range(&self) -> (usize, usize) {
        let m = self.grid.len();
        match self.boundary {
            Boundary::Clamped => (1, m - 2),
            Boundary::FreeLeft => (0, m - 2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormMeta {
    pub label: String,
    pub dim: u32,
    pub mode: Option<u32>,
    pub max_order: u8,
}

/// A discretized quadratic form on the free nodes, in rescaled unknowns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormMatrix {
    pub meta: FormMeta,
    pub sigma: f64,
    pub boundary: Boundary,
    /// First and last free node.
    pub dofs: (usize, usize),
    #[serde(rename = "band")]
    pub matrix: SymBand,
    #[serde(skip)]
    r_dofs: Vec<f64>,
    #[serde(skip)]
    nodes: usize,
    /// The same form as `Σ c (s · w)^2`; evaluating through the band would
    /// cancel catastrophically for second differences on fine grids.
    #[serde(skip)]
    terms: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq)]
struct Term {
    coef: f64,
    stencil: Vec<(usize, f64)>,
}

impl FormMatrix {
    pub fn size(&self) -> usize {
        self.matrix.dim()
    }

    fn compatible(&self, other: &FormMatrix) -> bool {
        self.dofs == other.dofs
            && self.sigma == other.sigma
            && self.nodes == other.nodes
            && self.boundary == other.boundary
    }

    /// Rescaled unknowns of a profile given by its values at every node.
    pub fn unknowns(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.nodes {
            return Err(Error::FormMismatch(format!(
                "profile has {} samples, grid has {}",
                u.len(),
                self.nodes
            )));
        }
        Ok(self
            .r_dofs
            .iter()
            .zip(&u[self.dofs.0..=self.dofs.1])
            .map(|(r, u)| u * r.powf(-self.sigma))
            .collect())
    }

    /// Node values of the profile with the given rescaled unknowns; zero on
    /// constrained nodes.
    pub fn profile(&self, w: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.nodes];
        for (i, (r, w)) in self.r_dofs.iter().zip(w).enumerate() {
            u[self.dofs.0 + i] = w * r.powf(self.sigma);
        }
        u
    }

    /// Value of the form on a profile sampled at all nodes. Values on
    /// constrained nodes are ignored.
    pub fn evaluate(&self, u: &[f64]) -> Result<f64> {
        Ok(self.value(&self.unknowns(u)?))
    }

    /// Value of the form at rescaled unknowns.
    pub fn value(&self, w: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let d: f64 = t.stencil.iter().map(|&(i, s)| s * w[i]).sum();
                t.coef * d * d
            })
            .sum()
    }

    /// `Σ c_i F_i`, all forms on the same unknowns.
    pub fn combine(label: &str, terms: &[(f64, &FormMatrix)]) -> Result<FormMatrix> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| Error::FormMismatch("empty combination".into()))?;
        let mut m = SymBand::zeros(first.size(), 0);
        let mut all = Vec::new();
        let mut max_order = 0;
        for (c, f) in terms {
            if !first.compatible(f) {
                return Err(Error::FormMismatch(format!(
                    "cannot combine `{}` with `{}`",
                    first.meta.label, f.meta.label
                )));
            }
            m = m.add_scaled(*c, &f.matrix)?;
            all.extend(f.terms.iter().map(|t| Term {
                coef: c * t.coef,
                stencil: t.stencil.clone(),
            }));
            max_order = max_order.max(f.meta.max_order);
        }
        Ok(FormMatrix {
            meta: FormMeta {
                label: label.to_string(),
                dim: first.meta.dim,
                mode: first.meta.mode,
                max_order,
            },
            matrix: m,
            terms: all,
            ..(*first).clone()
        })
    }

    /// `self - other`.
    pub fn minus(&self, other: &FormMatrix) -> Result<FormMatrix> {
        let label = format!("{} - {}", self.meta.label, other.meta.label);
        FormMatrix::combine(&label, &[(1.0, self), (-1.0, other)])
    }

    pub fn with_mode(mut self, k: u32) -> Self {
        self.meta.mode = Some(k);
        self
    }
}

struct Point {
    /// Quadrature weight for `dr`.
    omega: f64,
    r: f64,
    stencil: Vec<(usize, f64)>,
}

fn points(grid: &Grid, order: u8, boundary: Boundary) -> Result<Vec<Point>> {
    let m = grid.len();
    let h = grid.h;
    let kappa = grid.curvature();
    let mut out = Vec::with_capacity(m);
    match order {
        0 => {
            for q in 0..m {
                out.push(Point {
                    omega: grid.weights[q],
                    r: grid.r[q],
                    stencil: vec![(q, 1.0)],
                });
            }
        }
        1 => {
            for q in 0..m - 1 {
                let tm = 0.5 * (grid.t[q] + grid.t[q + 1]);
                let jac = grid.jacobian_at(tm);
                let s = 1.0 / (h * jac);
                out.push(Point {
                    omega: h * jac,
                    r: grid.r_at(tm),
                    stencil: vec![(q, -s), (q + 1, s)],
                });
            }
        }
        2 => {
            if boundary != Boundary::Clamped {
                return Err(Error::Unsupported(
                    "second order forms need clamped ends".into(),
                ));
            }
            for q in 0..m {
                let jac = grid.jacobian_at(grid.t[q]);
                let j2 = jac * jac;
                let a = 1.0 / (h * h * j2);
                let b = kappa / (2.0 * h * j2);
                let stencil = if q == 0 {
                    vec![(0, -2.0 * a), (1, 2.0 * a)]
                } else if q == m - 1 {
                    vec![(m - 2, 2.0 * a), (m - 1, -2.0 * a)]
                } else {
                    vec![(q - 1, a + b), (q, -2.0 * a), (q + 1, a - b)]
                };
                out.push(Point {
                    omega: grid.weights[q],
                    r: grid.r[q],
                    stencil,
                });
            }
        }
        _ => return Err(Error::Unsupported(format!("derivative order {order}"))),
    }
    Ok(out)
}

/// Discretizes `∫ weight(r) r^{dim-1+r_power} |u^{(order)}|^2 dr`.
pub fn assemble_weighted_form(
    weight: &WeightExpr,
    r_power: i32,
    order: u8,
    ctx: &FormContext,
) -> Result<FormMatrix> {
    let grid = ctx.grid;
    if grid.len() < 4 {
        return Err(Error::FormMismatch("grid too small".into()));
    }
    let (lo, hi) = ctx.dof_range();
    let n = hi - lo + 1;
    let bw = if order == 2 { 2 } else { 1 };
    let mut band = SymBand::zeros(n, bw);
    let expo = ctx.dim as f64 - 1.0 + r_power as f64 + 2.0 * ctx.sigma;
    let constant = weight.as_const();
    let mut terms = Vec::new();
    for p in points(grid, order, ctx.boundary)? {
        let live: Vec<(usize, f64)> = p
            .stencil
            .iter()
            .filter(|(i, _)| *i >= lo && *i <= hi)
            .map(|&(i, s)| {
                let ratio = (ctx.sigma * (grid.r[i].ln() - p.r.ln())).exp();
                (i - lo, s * ratio)
            })
            .collect();
        if live.is_empty() {
            continue;
        }
        let f = match constant {
            Some(c) => c,
            None => weight.evaluate(p.r, &ctx.binding)?,
        };
        if f == 0.0 {
            continue;
        }
        let coef = p.omega * f * (expo * p.r.ln()).exp();
        for &(i, si) in &live {
            for &(j, sj) in &live {
                if j <= i {
                    band.add(i, j, coef * si * sj);
                }
            }
        }
        terms.push(Term { coef, stencil: live });
    }
    Ok(FormMatrix {
        meta: FormMeta {
            label: format!("int {weight} r^(N-1{r_power:+}) |u^({order})|^2"),
            dim: ctx.dim,
            mode: None,
            max_order: order,
        },
        sigma: ctx.sigma,
        boundary: ctx.boundary,
        dofs: (lo, hi),
        matrix: band,
        r_dofs: grid.r[lo..=hi].to_vec(),
        nodes: grid.len(),
        terms,
    })
}

/// Skips terms with a zero coefficient or a weight that is identically zero.
fn sum_terms(label: &str, ctx: &FormContext, terms: &[(f64, &WeightExpr, i32, u8)]) -> Result<FormMatrix> {
    let mut forms = Vec::new();
    for &(c, w, p, o) in terms {
        if c != 0.0 && !w.is_zero() {
            forms.push((c, assemble_weighted_form(w, p, o, ctx)?));
        }
    }
    if forms.is_empty() {
        // the zero form, with the widest band of the requested terms
        let w = WeightExpr::constant(0.0);
        let order = terms.iter().map(|t| t.3).max().unwrap_or(0);
        let mut f = assemble_weighted_form(&w, 0, order, ctx)?;
        f.meta.label = label.to_string();
        return Ok(f);
    }
    let refs: Vec<(f64, &FormMatrix)> = forms.iter().map(|(c, f)| (*c, f)).collect();
    FormMatrix::combine(label, &refs)
}

/// Mode-`k` part of `∫ V |Δu|^2` in dimension `ctx.dim`.
pub fn hr_lhs_form(v: &WeightExpr, k: u32, ctx: &FormContext) -> Result<FormMatrix> {
    let n = ctx.dim as f64;
    let c = mode_coeff(k, ctx.dim);
    let v1 = nth_derivative(v, 1);
    let v2 = nth_derivative(v, 2);
    sum_terms(
        &format!("hr_lhs(V={v}, k={k})"),
        ctx,
        &[
            (1.0, v, 0, 2),
            (n - 1.0 + 2.0 * c, v, -2, 1),
            (c * c + 2.0 * (n - 4.0) * c, v, -4, 0),
            (-(n - 1.0), &v1, -1, 1),
            (-(n - 5.0) * c, &v1, -3, 0),
            (-c, &v2, -2, 0),
        ],
    )
    .map(|f| f.with_mode(k))
}

/// Mode-`k` part of `∫ W |∇u|^2`.
pub fn hr_rhs_form(w: &WeightExpr, k: u32, ctx: &FormContext) -> Result<FormMatrix> {
    let c = mode_coeff(k, ctx.dim);
    sum_terms(
        &format!("hr_rhs(W={w}, k={k})"),
        ctx,
        &[(1.0, w, 0, 1), (c, w, -2, 0)],
    )
    .map(|f| f.with_mode(k))
}

/// `∫ W |u|^2`, the same for every mode.
pub fn rellich_rhs_form(w: &WeightExpr, ctx: &FormContext) -> Result<FormMatrix> {
    sum_terms(&format!("rellich_rhs(W={w})"), ctx, &[(1.0, w, 0, 0)])
}

/// Mode-`k` part of `∫ V |∇u|^2`; identical in form to [`hr_rhs_form`].
pub fn hardy_lhs_form(v: &WeightExpr, k: u32, ctx: &FormContext) -> Result<FormMatrix> {
    let c = mode_coeff(k, ctx.dim);
    sum_terms(
        &format!("hardy_lhs(V={v}, k={k})"),
        ctx,
        &[(1.0, v, 0, 1), (c, v, -2, 0)],
    )
    .map(|f| f.with_mode(k))
}

/// `∫ r^{dim-1+r_power} |u|^2`.
pub fn mass_form(r_power: i32, ctx: &FormContext) -> Result<FormMatrix> {
    let mut f = assemble_weighted_form(&WeightExpr::constant(1.0), r_power, 0, ctx)?;
    f.meta.label = format!("mass r^(N-1{r_power:+})");
    Ok(f)
}

#[cfg(test)]
mod tests;
