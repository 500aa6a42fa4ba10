//! Admissibility conditions on the weights: pointwise sign conditions on
//! symbolic expressions and integral conditions as quadratic-form margins.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{build_grid, Grid, GridSpec, RadialDomain};
use crate::modeforms::{assemble_weighted_form, mass_form, FormContext, FormMatrix};
use crate::spectrum::min_gen_eig;
use crate::weightlang::{add, derivative, div, mul, nth_derivative, pow, sub, ParamBinding, WeightExpr};

/// Default number of log-spaced samples for pointwise conditions.
pub const DEFAULT_SAMPLES: usize = 10_000;
/// Tolerance on normalized pointwise values.
pub const POINTWISE_TOL: f64 = 1e-9;
/// Tolerance on integral margins.
pub const INTEGRAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ConditionId {
    Con,
    Con2,
    Con3,
    ConM,
    ConM2,
}

impl ConditionId {
    pub const ALL: [ConditionId; 5] = [
        ConditionId::Con,
        ConditionId::Con2,
        ConditionId::Con3,
        ConditionId::ConM,
        ConditionId::ConM2,
    ];

    pub fn is_pointwise(self) -> bool {
        matches!(self, ConditionId::Con | ConditionId::Con2 | ConditionId::Con3)
    }

    pub fn name(self) -> &'static str {
        match self {
            ConditionId::Con => "Con",
            ConditionId::Con2 => "Con2",
            ConditionId::Con3 => "Con3",
            ConditionId::ConM => "ConM",
            ConditionId::ConM2 => "ConM2",
        }
    }

    pub fn needs_w(self) -> bool {
        !matches!(self, ConditionId::Con2 | ConditionId::Con3)
    }
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConditionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ConditionId::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Unsupported(format!("unknown condition `{s}` (expected Con, Con2, Con3, ConM, ConM2)")))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub id: ConditionId,
    pub holds: bool,
    /// Where the condition is closest to failing (or fails worst).
    pub worst_point: f64,
    /// Pointwise: the expression times `r^2/|V|`. Integral: the margin.
    pub worst_value: f64,
    pub tol: f64,
    pub r_min: f64,
    pub r_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Located sign changes of the pointwise expression.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sign_changes: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mesh_change: Option<f64>,
    /// Eigen-profile of a negative integral margin, at the grid nodes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
}

fn c(x: f64) -> WeightExpr {
    WeightExpr::constant(x)
}

fn over_r(e: WeightExpr, p: f64) -> WeightExpr {
    div(e, pow(WeightExpr::var(), c(p)))
}

/// The pointwise expression, oriented so that the condition reads `≥ 0`.
pub fn pointwise_expr(id: ConditionId, v: &WeightExpr, w: Option<&WeightExpr>, n: u32) -> Result<WeightExpr> {
    let (v1, v2) = (derivative(v), nth_derivative(v, 2));
    let nf = n as f64;
    // V'' - 3V'/r - k V/r^2 ≤ 0, negated
    let second = |k: f64| sub(add(over_r(mul(c(3.0), v1.clone()), 1.0), over_r(mul(c(k), v.clone()), 2.0)), v2.clone());
    Ok(match id {
        ConditionId::Con => {
            let w = w.ok_or_else(|| Error::Unsupported("Con needs W".into()))?;
            sub(
                add(sub(w.clone(), over_r(mul(c(2.0), v.clone()), 2.0)), over_r(mul(c(2.0), v1), 1.0)),
                v2,
            )
        }
        ConditionId::Con2 => second(nf - 5.0),
        ConditionId::Con3 => second(3.0 * nf - 5.0),
        _ => return Err(Error::Unsupported(format!("{id} is an integral condition"))),
    })
}

fn bounds(domain: RadialDomain, spec: &GridSpec) -> Result<(f64, f64)> {
    let g = build_grid(domain, &GridSpec { nodes: 4, ..*spec })?;
    Ok((g.r_min, g.r_max))
}

/// Checks a pointwise condition on `samples` log-spaced points of the open
/// interval `(r_min, r_max)`, refining the worst point and the sign changes.
pub fn check_pointwise(
    id: ConditionId,
    v: &WeightExpr,
    w: Option<&WeightExpr>,
    binding: &ParamBinding,
    domain: RadialDomain,
    spec: &GridSpec,
    samples: usize,
) -> Result<ConditionReport> {
    let expr = pointwise_expr(id, v, w, binding.dim().unwrap_or(domain.dim))?;
    let (lo, hi) = bounds(domain, spec)?;
    let samples = samples.max(2);
    let value = |r: f64| -> Result<f64> {
        let e = expr.evaluate(r, binding)?;
        let scale = v.evaluate(r, binding)?.abs();
        Ok(if scale > 0.0 { e * r * r / scale } else { e * r * r })
    };
    let (llo, lhi) = (lo.ln(), hi.ln());
    let step = (lhi - llo) / samples as f64;
    let rs: Vec<f64> = (0..samples).map(|i| (llo + (i as f64 + 0.5) * step).exp()).collect();
    let vals = rs.iter().map(|&r| value(r)).collect::<Result<Vec<_>>>()?;

    let mut sign_changes = Vec::new();
    for i in 1..samples {
        if (vals[i - 1] < 0.0) != (vals[i] < 0.0) {
            let (mut a, mut b) = (rs[i - 1].ln(), rs[i].ln());
            let neg_a = vals[i - 1] < 0.0;
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                if (value(m.exp())? < 0.0) == neg_a {
                    a = m;
                } else {
                    b = m;
                }
            }
            sign_changes.push((0.5 * (a + b)).exp());
        }
    }

    let k = (0..samples).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).expect("samples");
    // golden-section refinement of the minimum over the neighbouring cells
    let (mut a, mut b) = (rs[k.saturating_sub(1)].ln(), rs[(k + 1).min(samples - 1)].ln());
    let (mut best_r, mut best) = (rs[k], vals[k]);
    let g = 0.618_033_988_749_894_9;
    for _ in 0..80 {
        let (x1, x2) = (b - g * (b - a), a + g * (b - a));
        let (f1, f2) = (value(x1.exp())?, value(x2.exp())?);
        for (x, f) in [(x1, f1), (x2, f2)] {
            if f < best {
                best = f;
                best_r = x.exp();
            }
        }
        if f1 <= f2 {
            b = x2;
        } else {
            a = x1;
        }
    }
    Ok(ConditionReport {
        id,
        holds: best >= -POINTWISE_TOL,
        worst_point: best_r,
        worst_value: orient(id, best),
        tol: POINTWISE_TOL,
        r_min: lo,
        r_max: hi,
        samples: Some(samples),
        sign_changes,
        mesh_change: None,
        witness: None,
    })
}

/// Reports the value with the sign of the condition as written.
fn orient(id: ConditionId, x: f64) -> f64 {
    match id {
        ConditionId::Con2 | ConditionId::Con3 => -x,
        _ => x,
    }
}

/// Coefficient of `∫ V r^{N-5} |u|^2` in the integral condition.
pub fn integral_kappa(id: ConditionId, n: u32) -> Result<f64> {
    let n = n as f64;
    match id {
        ConditionId::ConM => Ok(3.0 * n - 9.0),
        ConditionId::ConM2 => Ok(5.0 * n - 9.0),
        _ => Err(Error::Unsupported(format!("{id} is a pointwise condition"))),
    }
}

/// `Q[u] = 2∫V r^{N-3}|u'|^2 - ∫V'' r^{N-3}|u|^2 - (N-5)∫V' r^{N-4}|u|^2
/// + κ∫V r^{N-5}|u|^2 - ∫W r^{N-3}|u|^2` on the clamped grid.
pub fn integral_form(id: ConditionId, v: &WeightExpr, w: &WeightExpr, ctx: &FormContext) -> Result<FormMatrix> {
    let n = ctx.dim;
    let kappa = integral_kappa(id, n)?;
    let (v1, v2) = (derivative(v), nth_derivative(v, 2));
    let parts = [
        (2.0, assemble_weighted_form(v, -2, 1, ctx)?),
        (-1.0, assemble_weighted_form(&v2, -2, 0, ctx)?),
        (-(n as f64 - 5.0), assemble_weighted_form(&v1, -3, 0, ctx)?),
        (kappa, assemble_weighted_form(v, -4, 0, ctx)?),
        (-1.0, assemble_weighted_form(w, -2, 0, ctx)?),
    ];
    let refs: Vec<(f64, &FormMatrix)> = parts.iter().map(|(k, f)| (*k, f)).collect();
    FormMatrix::combine(&format!("{id}(V={v}, W={w})"), &refs)
}

fn integral_margin(id: ConditionId, v: &WeightExpr, w: &WeightExpr, binding: &ParamBinding, grid: &Grid) -> Result<crate::spectrum::Eigen> {
    let n = binding.dim().unwrap_or(grid.domain.dim);
    let ctx = FormContext::new(grid, n, *binding);
    min_gen_eig(&integral_form(id, v, w, &ctx)?, &mass_form(-2, &ctx)?)
}

/// Smallest eigenvalue of the integral form against `∫ r^{N-3} |u|^2`;
/// the condition holds iff it is `≥ -INTEGRAL_TOL`.
pub fn check_integral(id: ConditionId, v: &WeightExpr, w: &WeightExpr, binding: &ParamBinding, grid: &Grid) -> Result<ConditionReport> {
    for &r in &grid.r[1..grid.len() - 1] {
        let value = v.evaluate(r, binding)?;
        if value < 0.0 {
            return Err(Error::NonPositiveV { r, value });
        }
    }
    let fine = integral_margin(id, v, w, binding, grid)?;
    let coarse = integral_margin(id, v, w, binding, &grid.with_nodes((grid.len() - 1) / 2 + 1)?)?;
    let holds = fine.value >= -INTEGRAL_TOL;
    let peak = (0..grid.len())
        .max_by(|&i, &j| fine.profile[i].abs().total_cmp(&fine.profile[j].abs()))
        .unwrap_or(0);
    Ok(ConditionReport {
        id,
        holds,
        worst_point: grid.r[peak],
        worst_value: fine.value,
        tol: INTEGRAL_TOL,
        r_min: grid.r_min,
        r_max: grid.r_max,
        samples: None,
        sign_changes: Vec::new(),
        mesh_change: Some((fine.value - coarse.value).abs()),
        witness: (!holds).then_some(fine.profile),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weightlang::parse;

    fn e(text: &str) -> WeightExpr {
        parse(text).unwrap()
    }

    fn pointwise(id: ConditionId, v: &str, w: Option<&str>, n: u32) -> ConditionReport {
        let w = w.map(e);
        check_pointwise(
            id,
            &e(v),
            w.as_ref(),
            &ParamBinding::with_dim(n),
            RadialDomain::whole_space(n),
            &GridSpec::default(),
            DEFAULT_SAMPLES,
        )
        .unwrap()
    }

    fn integral(id: ConditionId, v: &str, w: &str, n: u32) -> ConditionReport {
        let g = build_grid(RadialDomain::whole_space(n), &GridSpec::with_nodes(1024)).unwrap();
        check_integral(id, &e(v), &e(w), &ParamBinding::with_dim(n), &g).unwrap()
    }

    #[test]
    fn con2_for_constant_weight() {
        let r = pointwise(ConditionId::Con2, "1", None, 5);
        assert!(r.holds && r.worst_value == 0.0);
        let r = pointwise(ConditionId::Con2, "1", None, 4);
        assert!(!r.holds);
        // -(N-5)/r^2 times r^2
        assert!((r.worst_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn con_for_hardy_weight() {
        // (N-2)^2/4 - 2
        let r = pointwise(ConditionId::Con, "1", Some("(N-2)^2/(4*r^2)"), 5);
        assert!(r.holds && (r.worst_value - 0.25).abs() < 1e-12);
        let r = pointwise(ConditionId::Con, "1", Some("(N-2)^2/(4*r^2)"), 4);
        assert!(!r.holds && (r.worst_value + 1.0).abs() < 1e-12);
        let err = check_pointwise(
            ConditionId::Con,
            &e("1"),
            None,
            &ParamBinding::with_dim(5),
            RadialDomain::whole_space(5),
            &GridSpec::default(),
            100,
        );
        assert!(err.is_err());
    }

    #[test]
    fn power_weight_values() {
        // V = r^2: V'' - 3V'/r - k V/r^2 = 2 - 6 - k
        for n in [3, 5, 8] {
            let nf = n as f64;
            let r = pointwise(ConditionId::Con2, "r^2", None, n);
            assert!((r.worst_value - (-4.0 - (nf - 5.0))).abs() < 1e-9, "{r:?}");
            let r = pointwise(ConditionId::Con3, "r^2", None, n);
            assert!(r.holds && (r.worst_value - (-4.0 - (3.0 * nf - 5.0))).abs() < 1e-9);
        }
    }

    #[test]
    fn sign_change_is_located() {
        // V = e^r, N = 5: normalized value r^2 - 3r, zero at r = 3
        let r = check_pointwise(
            ConditionId::Con2,
            &e("exp(r)"),
            None,
            &ParamBinding::with_dim(5),
            RadialDomain::new(5, 100.0).unwrap(),
            &GridSpec::default(),
            DEFAULT_SAMPLES,
        )
        .unwrap();
        assert!(!r.holds);
        assert_eq!(r.sign_changes.len(), 1);
        assert!((r.sign_changes[0] - 3.0).abs() < 1e-9);
        // worst at the right end, written with the sign of the condition
        assert!((r.worst_point - r.r_max).abs() < 1e-2 * r.r_max);
        let rm = r.worst_point;
        assert!((r.worst_value - (rm * rm - 3.0 * rm)).abs() < 1e-6 * rm * rm);
    }

    #[test]
    fn integral_examples() {
        assert!(integral(ConditionId::ConM, "1", "N^2/(4*r^2)", 5).holds);
        let r = integral(ConditionId::ConM, "1", "N^2/(4*r^2)", 4);
        assert!(!r.holds && r.witness.is_some() && r.worst_value < -INTEGRAL_TOL);
        assert!(integral(ConditionId::ConM, "1", "0", 5).holds);
    }

    #[test]
    fn integral_threshold_matches_mellin() {
        // V = 1, W = c/r^2: Q ≥ 0 iff 2((N-4)/2)^2 + κ - c ≥ 0
        for (id, n) in [(ConditionId::ConM, 6), (ConditionId::ConM2, 5), (ConditionId::ConM, 7)] {
            let nf = n as f64;
            let star = 2.0 * ((nf - 4.0) / 2.0).powi(2) + integral_kappa(id, n).unwrap();
            assert!(integral(id, "1", &format!("{}/r^2", 0.98 * star), n).holds);
            assert!(integral(id, "1", &format!("{star}/r^2"), n).holds);
            assert!(!integral(id, "1", &format!("{}/r^2", 1.02 * star), n).holds);
        }
    }

    #[test]
    fn conm_margin_below_conm2() {
        for (v, w) in [("1", "N^2/(4*r^2)"), ("1+r^2", "1"), ("exp(-r)", "0")] {
            let a = integral(ConditionId::ConM, v, w, 5).worst_value;
            let b = integral(ConditionId::ConM2, v, w, 5).worst_value;
            assert!(b >= a, "{v}: {a} {b}");
        }
    }

    #[test]
    fn ids_parse() {
        assert_eq!("conm2".parse::<ConditionId>().unwrap(), ConditionId::ConM2);
        assert!("Con4".parse::<ConditionId>().is_err());
    }
}
