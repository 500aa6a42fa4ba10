//! Best constants and margins per mode, mode scans and symmetry verdicts.
//!
//! Truncating `(0, ∞)` to a window of log-length `L` raises the bottom of the
//! spectrum of a scale-invariant pencil by about `a / (L + δ)^2`. Best
//! constants are therefore computed on the full window and on two nested
//! windows with the same mesh, and the three values determine `C`, `a` and
//! `δ`; a fourth window measures how far the extrapolation can be trusted.

mod mellin;

pub use mellin::{mellin_constant, mellin_ratio, TAU_MAX};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, SolverError};
use crate::grid::{build_grid, Grid, GridSpec, RadialDomain};
use crate::linalg;
use crate::modeforms::{
    hardy_lhs_form, hr_lhs_form, hr_rhs_form, mass_form, rellich_rhs_form, Boundary, FormContext, FormMatrix,
};
use crate::weightlang::{ParamBinding, WeightExpr};

/// Ratio of consecutive nested window lengths.
pub const WINDOW_RATIO: f64 = 0.75;
/// Relative sensitivity below which a value counts as converged.
pub const CONVERGED_SENSITIVITY: f64 = 5e-3;
/// Relative tolerance for treating mode values as tied.
pub const TIE_TOL: f64 = 1e-9;
/// Default mode range `0..=DEFAULT_KMAX`.
pub const DEFAULT_KMAX: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    Hardy,
    HardyRellich,
    Rellich,
}

impl Problem {
    pub fn name(&self) -> &'static str {
        match self {
            Problem::Hardy => "hardy",
            Problem::HardyRellich => "hardy_rellich",
            Problem::Rellich => "rellich",
        }
    }

    /// Default right-hand weight.
    pub fn default_w(&self) -> &'static str {
        match self {
            Problem::Hardy | Problem::HardyRellich => "1/r^2",
            Problem::Rellich => "1/r^4",
        }
    }
}

impl std::str::FromStr for Problem {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.replace('-', "_").as_str() {
            "hardy" => Ok(Problem::Hardy),
            "hardy_rellich" => Ok(Problem::HardyRellich),
            "rellich" => Ok(Problem::Rellich),
            _ => Err(format!("unknown problem `{s}` (hardy, hardy-rellich, rellich)")),
        }
    }
}

impl std::fmt::Display for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// What a scan computes per mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanKind {
    Constant,
    Margin,
}

/// One inequality instance: problem family, weights and domain.
#[derive(Debug, Clone)]
pub struct Setup {
    pub problem: Problem,
    pub v: WeightExpr,
    pub w: WeightExpr,
    pub binding: ParamBinding,
    /// `dim` is the dimension of the forms; it may differ from `binding.n`.
    pub domain: RadialDomain,
    pub grid: GridSpec,
}

impl Setup {
    /// `V = 1`, default `W`, whole space, default grid.
    pub fn standard(problem: Problem, n: u32) -> Self {
        Setup {
            problem,
            v: WeightExpr::constant(1.0),
            w: crate::weightlang::parse(problem.default_w()).expect("default weight parses"),
            binding: ParamBinding::with_dim(n),
            domain: RadialDomain::whole_space(n),
            grid: GridSpec::default(),
        }
    }

    fn context<'a>(&self, grid: &'a Grid) -> FormContext<'a> {
        let dim = self.domain.dim;
        match self.problem {
            Problem::Hardy => FormContext::first_order(grid, dim, self.binding),
            _ => FormContext::new(grid, dim, self.binding),
        }
    }

    /// `(A_k, B_k)` on the given grid.
    pub fn pencil(&self, k: u32, grid: &Grid) -> Result<(FormMatrix, FormMatrix)> {
        let ctx = self.context(grid);
        Ok(match self.problem {
            Problem::Hardy => (hardy_lhs_form(&self.v, k, &ctx)?, rellich_rhs_form(&self.w, &ctx)?),
            Problem::HardyRellich => (hr_lhs_form(&self.v, k, &ctx)?, hr_rhs_form(&self.w, k, &ctx)?),
            Problem::Rellich => (hr_lhs_form(&self.v, k, &ctx)?, rellich_rhs_form(&self.w, &ctx)?),
        })
    }

    /// Mass `∫ r^{dim-1} |u|^2` matching [`Setup::pencil`].
    pub fn mass(&self, grid: &Grid) -> Result<FormMatrix> {
        mass_form(0, &self.context(grid))
    }

    pub fn build(&self) -> Result<Grid> {
        Ok(build_grid(self.domain, &self.grid)?)
    }
}

/// Smallest eigenvalue of `A u = λ B u` with eigen-profile at the nodes.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub value: f64,
    pub profile: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Smallest `λ` with `A u = λ B u`. `B` must be positive definite on the
/// free nodes; otherwise [`SolverError::MassNotDefinite`] is returned and the
/// caller should use a margin against a mass form instead.
pub fn min_gen_eig(a: &FormMatrix, b: &FormMatrix) -> Result<Eigen> {
    if a.dofs != b.dofs || a.sigma != b.sigma || a.size() != b.size() {
        return Err(Error::FormMismatch(format!("{} vs {}", a.meta.label, b.meta.label)));
    }
    let p = min_gen_eig_raw(a, b)?;
    Ok(Eigen {
        value: p.value,
        profile: a.profile(&p.vector),
        residual: p.residual,
        iterations: p.iterations,
    })
}

fn min_gen_eig_raw(a: &FormMatrix, b: &FormMatrix) -> Result<crate::linalg::EigPair> {
    Ok(linalg::min_gen_eig(&a.matrix, &b.matrix)?)
}

/// Smallest eigenvalue of `A - B` against `mass`.
pub fn margin_eig(a: &FormMatrix, b: &FormMatrix, mass: &FormMatrix) -> Result<Eigen> {
    min_gen_eig(&a.minus(b)?, mass)
}

/// A value with its grid sensitivity.
#[derive(Debug, Clone, Serialize)]
pub struct Estimate {
    /// Best estimate (window-extrapolated for constants).
    pub value: f64,
    /// Value on the requested window.
    pub raw: f64,
    /// `|raw(M) - raw(M/2)|`, relative to `max(|value|, 1)` for margins and
    /// to `|value|` for constants.
    pub mesh_change: f64,
    /// Relative uncertainty of the window extrapolation.
    pub window_change: f64,
    pub sensitivity: f64,
    pub converged: bool,
    #[serde(skip)]
    pub profile: Vec<f64>,
    #[serde(skip)]
    pub r: Vec<f64>,
}

/// Fits `C + a / (L + δ)^2` through three `(L, λ)` pairs and returns `C`.
/// `None` when the data are not monotone in `L` or no offset `δ > -min L`
/// reproduces their curvature.
fn window_fit(ls: [f64; 3], vals: [f64; 3]) -> Option<f64> {
    let (d1, d2) = (vals[1] - vals[0], vals[2] - vals[1]);
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    if d1.abs() < 1e-12 * scale && d2.abs() < 1e-12 * scale {
        return Some(vals[0]);
    }
    if d1 * d2 <= 0.0 {
        return None;
    }
    let rho = d1 / d2;
    let f = |l: f64, delta: f64| (l + delta).powi(-2);
    let g = |delta: f64| {
        (f(ls[1], delta) - f(ls[0], delta)) / (f(ls[2], delta) - f(ls[1], delta)) - rho
    };
    let lmin = ls.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut lo = -0.999 * lmin;
    let mut hi = 100.0 * ls[0];
    let (glo, ghi) = (g(lo), g(hi));
    if !(glo.is_finite() && ghi.is_finite()) || glo * ghi > 0.0 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) * glo > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let delta = 0.5 * (lo + hi);
    let a = d1 / (f(ls[1], delta) - f(ls[0], delta));
    Some(vals[0] - a * f(ls[0], delta))
}

/// Nested sub-window keeping `frac` of the log-length, trimmed at truncated ends.
fn sub_window(grid: &Grid, frac: f64) -> Result<Grid> {
    let m = grid.len();
    let keep = ((m - 1) as f64 * frac).round() as usize + 1;
    let drop = m - keep;
    let (lo, hi) = if grid.right_truncated() {
        (drop / 2, m - 1 - (drop - drop / 2))
    } else {
        (drop, m - 1)
    };
    Ok(grid.window(lo, hi)?)
}

fn coarse(grid: &Grid) -> Result<Grid> {
    Ok(grid.with_nodes((grid.len() - 1) / 2 + 1)?)
}

/// Best constant of the pencil at mode `k` with sensitivity estimates.
pub fn best_constant(setup: &Setup, k: u32) -> Result<Estimate> {
    let grid = setup.build()?;
    let solve = |g: &Grid| -> Result<Eigen> {
        let (a, b) = setup.pencil(k, g)?;
        min_gen_eig(&a, &b).map_err(|e| match e {
            Error::Solver(SolverError::MassNotDefinite) => Error::IndefiniteRhs { k },
            other => other,
        })
    };
    let full = solve(&grid)?;
    let raw = full.value;
    let mut seq = vec![raw];
    let mut ls = vec![grid.t[grid.len() - 1] - grid.t[0]];
    for j in 1..=3 {
        let sub = sub_window(&grid, WINDOW_RATIO.powi(j))?;
        ls.push(sub.t[sub.len() - 1] - sub.t[0]);
        seq.push(solve(&sub)?.value);
    }
    let half = solve(&coarse(&grid)?)?.value;
    let first = window_fit([ls[0], ls[1], ls[2]], [seq[0], seq[1], seq[2]]);
    let second = window_fit([ls[1], ls[2], ls[3]], [seq[1], seq[2], seq[3]]);
    let (value, window_change) = match (first, second) {
        (Some(x), Some(y)) => (x, (x - y).abs() / x.abs().max(f64::MIN_POSITIVE)),
        // inconsistent window dependence: keep the raw value, report the spread
        _ => (raw, (seq[0] - seq[1]).abs().max((seq[1] - seq[2]).abs()) / raw.abs().max(f64::MIN_POSITIVE)),
    };
    let mesh_change = (raw - half).abs() / value.abs().max(f64::MIN_POSITIVE);
    let sensitivity = mesh_change.max(window_change);
    Ok(Estimate {
        value,
        raw,
        mesh_change,
        window_change,
        sensitivity,
        converged: sensitivity < CONVERGED_SENSITIVITY,
        profile: full.profile,
        r: grid.r.clone(),
    })
}

/// Smallest eigenvalue of `A_k - B_k` against the mass `r^{dim-1}`; the
/// inequality holds at mode `k` iff it is `≥ -tol`.
pub fn inequality_margin(setup: &Setup, k: u32) -> Result<Estimate> {
    let grid = setup.build()?;
    let solve = |g: &Grid| -> Result<Eigen> {
        let (a, b) = setup.pencil(k, g)?;
        margin_eig(&a, &b, &setup.mass(g)?)
    };
    let full = solve(&grid)?;
    let half = solve(&coarse(&grid)?)?.value;
    let mesh_change = (full.value - half).abs() / full.value.abs().max(1.0);
    Ok(Estimate {
        value: full.value,
        raw: full.value,
        mesh_change,
        window_change: 0.0,
        sensitivity: mesh_change,
        converged: mesh_change < CONVERGED_SENSITIVITY,
        profile: full.profile,
        r: grid.r.clone(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ModeEntry {
    pub k: u32,
    pub value: Option<f64>,
    pub converged: bool,
    pub sensitivity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Per-mode values of one problem.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub problem: Problem,
    #[serde(rename = "N")]
    pub n: u32,
    pub kind: ScanKind,
    pub v: String,
    pub w: String,
    pub modes: Vec<ModeEntry>,
    pub argmin_k: Option<u32>,
    pub radial_optimal: Option<bool>,
    pub global_value: Option<f64>,
}

/// Runs [`best_constant`] or [`inequality_margin`] for every `k` in `ks`,
/// in parallel; entries are ordered as `ks`.
pub fn mode_scan(setup: &Setup, ks: &[u32], kind: ScanKind) -> SpectralReport {
    let modes: Vec<ModeEntry> = ks
        .par_iter()
        .map(|&k| {
            let res = match kind {
                ScanKind::Constant => best_constant(setup, k),
                ScanKind::Margin => inequality_margin(setup, k),
            };
            match res {
                Ok(e) => ModeEntry {
                    k,
                    value: Some(e.value),
                    converged: e.converged,
                    sensitivity: Some(e.sensitivity),
                    error: None,
                },
                Err(err) => ModeEntry {
                    k,
                    value: None,
                    converged: false,
                    sensitivity: None,
                    error: Some(err.to_string()),
                },
            }
        })
        .collect();
    let mut report = SpectralReport {
        problem: setup.problem,
        n: setup.binding.dim().unwrap_or(setup.domain.dim),
        kind,
        v: setup.v.to_string(),
        w: setup.w.to_string(),
        modes,
        argmin_k: None,
        radial_optimal: None,
        global_value: None,
    };
    let valued: Vec<(u32, f64)> = report.modes.iter().filter_map(|m| m.value.map(|v| (m.k, v))).collect();
    if let Some(&(k, v)) = valued.iter().min_by(|a, b| a.1.total_cmp(&b.1)) {
        let at0 = valued.iter().find(|m| m.0 == 0).map(|m| m.1);
        let radial = at0.map(|v0| radial_wins(v0, v));
        report.radial_optimal = radial;
        report.argmin_k = Some(if radial == Some(true) { 0 } else { k });
        report.global_value = Some(if radial == Some(true) { at0.unwrap() } else { v });
    }
    report
}

fn radial_wins(v0: f64, vmin: f64) -> bool {
    v0 <= vmin + TIE_TOL * vmin.abs().max(v0.abs()).max(1.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct SymmetryVerdict {
    pub radial_optimal: bool,
    pub argmin_k: u32,
    /// `value(argmin) - value(0)`.
    pub gap: f64,
}

/// Radial optimality from the converged modes of a report.
pub fn symmetry_verdict(report: &SpectralReport) -> Result<SymmetryVerdict> {
    let good: Vec<(u32, f64)> = report
        .modes
        .iter()
        .filter(|m| m.converged)
        .filter_map(|m| m.value.map(|v| (m.k, v)))
        .collect();
    let v0 = good.iter().find(|m| m.0 == 0).map(|m| m.1);
    let (Some(v0), true) = (v0, good.len() >= 2) else {
        return Err(Error::TooFewModes(good.len()));
    };
    let &(k, vmin) = good.iter().min_by(|a, b| a.1.total_cmp(&b.1)).expect("non-empty");
    if radial_wins(v0, vmin) {
        Ok(SymmetryVerdict {
            radial_optimal: true,
            argmin_k: 0,
            gap: 0.0,
        })
    } else {
        Ok(SymmetryVerdict {
            radial_optimal: false,
            argmin_k: k,
            gap: vmin - v0,
        })
    }
}

/// Radial Hardy-Rellich constant in dimension `N` against the Hardy constant
/// in dimension `N + 2`, for the same `W`.
#[derive(Debug, Clone, Serialize)]
pub struct Equivalence {
    pub c_hr_radial: f64,
    pub c_hardy_np2: f64,
    pub rel_diff: f64,
    pub converged: bool,
}

pub fn t51_equivalence_check(w: &WeightExpr, n: u32, radius: f64, grid: &GridSpec) -> Result<Equivalence> {
    let binding = ParamBinding::with_dim(n).radius(radius);
    let hr = Setup {
        problem: Problem::HardyRellich,
        v: WeightExpr::constant(1.0),
        w: w.clone(),
        binding,
        domain: RadialDomain::new(n, radius)?,
        grid: *grid,
    };
    let hardy = Setup {
        problem: Problem::Hardy,
        domain: RadialDomain::new(n + 2, radius)?,
        ..hr.clone()
    };
    let a = best_constant(&hr, 0)?;
    let b = best_constant(&hardy, 0)?;
    Ok(Equivalence {
        c_hr_radial: a.value,
        c_hardy_np2: b.value,
        rel_diff: (a.value - b.value).abs() / a.value.abs().max(b.value.abs()),
        converged: a.converged && b.converged,
    })
}

/// Remainder constant of the radial Hardy-Rellich inequality on the ball of
/// radius `R`: after the substitution `u' = r v` and the ground-state
/// transform `v = r^{-N/2} w` it is the bottom of `∫ r |w'|^2` against
/// `∫ r |w|^2` on `(0, R)`, with a free inner end and `w(R) = 0`.
pub fn brezis_vazquez_remainder(radius: f64, grid: &GridSpec) -> Result<Estimate> {
    let domain = RadialDomain::new(2, radius)?;
    let g = build_grid(domain, grid)?;
    let binding = ParamBinding::with_dim(2).radius(radius);
    let solve = |g: &Grid| -> Result<Eigen> {
        let ctx = FormContext::first_order(g, 2, binding).with_boundary(Boundary::FreeLeft);
        let a = hardy_lhs_form(&WeightExpr::constant(1.0), 0, &ctx)?;
        let m = mass_form(0, &ctx)?;
        min_gen_eig(&a, &m)
    };
    let full = solve(&g)?;
    let half = solve(&coarse(&g)?)?.value;
    let mesh_change = (full.value - half).abs() / full.value;
    Ok(Estimate {
        value: full.value,
        raw: full.value,
        mesh_change,
        window_change: 0.0,
        sensitivity: mesh_change,
        converged: mesh_change < CONVERGED_SENSITIVITY,
        profile: full.profile,
        r: g.r.clone(),
    })
}
