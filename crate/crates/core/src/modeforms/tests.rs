use super::*;
use crate::grid::{build_grid, quad_integral, GridSpec, MeshKind, RadialDomain};
use crate::linalg::is_positive_definite;
use crate::weightlang::{derivative, parse};

fn grid(n: u32, m: usize, a: f64, b: f64) -> Grid {
    build_grid(RadialDomain::whole_space(n), &GridSpec::with_nodes(m).bounds(a, b)).unwrap()
}

fn w(s: &str) -> WeightExpr {
    parse(s).unwrap()
}

fn sample(e: &WeightExpr, g: &Grid, bind: &ParamBinding) -> Vec<f64> {
    g.r.iter().map(|&r| e.evaluate(r, bind).unwrap()).collect()
}

/// Composite Simpson on `(a, b)` with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let c = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += c * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn max_rel_diff(a: &FormMatrix, b: &FormMatrix) -> f64 {
    let scale = a.matrix.max_abs().max(b.matrix.max_abs());
    let d = a.matrix.add_scaled(-1.0, &b.matrix).unwrap();
    d.max_abs() / scale
}

#[test]
fn mode_coefficients() {
    for n in 1..9 {
        assert_eq!(mode_coeff(0, n), 0.0);
        assert_eq!(mode_coeff(1, n), n as f64 - 1.0);
    }
    assert_eq!(mode_coeff(1, 5), 4.0);
    assert_eq!(mode_coeff(2, 5), 10.0);
    for n in 2..9 {
        for k in 0..10 {
            assert!(mode_coeff(k + 1, n) > mode_coeff(k, n));
            if k >= 2 {
                assert!(mode_coeff(k, n) >= 2.0 * n as f64);
            }
        }
    }
}

#[test]
fn order_zero_is_the_grid_quadrature() {
    let g = grid(5, 257, 0.1, 3.0);
    let b = ParamBinding::with_dim(5);
    let ctx = FormContext::new(&g, 5, b);
    let f = assemble_weighted_form(&w("1"), 0, 0, &ctx).unwrap();
    // hat profile on the interior nodes
    let u: Vec<f64> = g.r.iter().map(|r| (1.0 - (r - 1.5).abs()).max(0.0)).collect();
    let direct: Vec<f64> = g.r.iter().zip(&u).map(|(r, u)| r.powi(4) * u * u).collect();
    let want = quad_integral(&g, &direct).unwrap();
    let got = f.evaluate(&u).unwrap();
    assert!((got - want).abs() < 1e-10 * want, "{got} vs {want}");
}

#[test]
fn scaling_exponent_does_not_change_values() {
    let g = grid(5, 200, 0.01, 10.0);
    let b = ParamBinding::with_dim(5);
    let prof = w("(ln(r/0.01)*ln(10/r))^3");
    let u = sample(&prof, &g, &b);
    for order in 0..=2u8 {
        let v: Vec<f64> = [-1.5, 0.0, 0.5, 2.0]
            .iter()
            .map(|&s| {
                let ctx = FormContext::new(&g, 5, b).with_sigma(s);
                assemble_weighted_form(&w("1+r"), -1, order, &ctx).unwrap().evaluate(&u).unwrap()
            })
            .collect();
        for x in &v {
            assert!((x - v[0]).abs() < 1e-11 * v[0].abs(), "order {order}: {v:?}");
        }
    }
}

#[test]
fn second_order_convergence() {
    let (a, bb) = (0.2, 5.0);
    let bind = ParamBinding::with_dim(4);
    let text = format!("exp(ln(r)/3)*((r-{a})*({bb}-r))^3");
    let prof = w(&text);
    let derivs = [prof.clone(), derivative(&prof), derivative(&derivative(&prof))];
    for kind in [MeshKind::Log, MeshKind::Uniform] {
        for order in 1..=2u8 {
            let exact = simpson(
                |r| {
                    let d = derivs[order as usize].evaluate(r, &bind).unwrap();
                    r.powi(3) * d * d
                },
                a,
                bb,
                20_000,
            );
            let err = |m: usize| {
                let g = build_grid(
                    RadialDomain::whole_space(4),
                    &GridSpec { nodes: m, r_min: Some(a), r_max: Some(bb), kind },
                )
                .unwrap();
                let ctx = FormContext::new(&g, 4, bind);
                let f = assemble_weighted_form(&w("1"), 0, order, &ctx).unwrap();
                (f.evaluate(&sample(&prof, &g, &bind)).unwrap() - exact).abs()
            };
            let (e1, e2, e3) = (err(201), err(401), err(801));
            let p1 = (e1 / e2).log2();
            let p2 = (e2 / e3).log2();
            assert!(p1 > 1.8 && p2 > 1.8, "{kind:?} order {order}: {e1:e} {e2:e} {e3:e}");
        }
    }
}

#[test]
fn radial_biharmonic_reduces() {
    let g = grid(5, 300, 1e-3, 1e3);
    let ctx = FormContext::new(&g, 5, ParamBinding::with_dim(5));
    let got = hr_lhs_form(&w("1"), 0, &ctx).unwrap();
    let a = assemble_weighted_form(&w("1"), 0, 2, &ctx).unwrap();
    let b = assemble_weighted_form(&w("1"), -2, 1, &ctx).unwrap();
    let want = FormMatrix::combine("x", &[(1.0, &a), (4.0, &b)]).unwrap();
    assert!(max_rel_diff(&got, &want) < 1e-14);
}

#[test]
fn block_consistency_in_k() {
    let g = grid(5, 300, 1e-3, 1e3);
    let ctx = FormContext::new(&g, 5, ParamBinding::with_dim(5));
    let one = w("1");
    let base = hr_lhs_form(&one, 0, &ctx).unwrap();
    let d1 = assemble_weighted_form(&one, -2, 1, &ctx).unwrap();
    let d0 = assemble_weighted_form(&one, -4, 0, &ctx).unwrap();
    for k in 1..5 {
        let c = mode_coeff(k, 5);
        let want = FormMatrix::combine("x", &[(1.0, &base), (2.0 * c, &d1), (c * c + 2.0 * c, &d0)]).unwrap();
        let got = hr_lhs_form(&one, k, &ctx).unwrap();
        assert!(max_rel_diff(&got, &want) < 1e-13, "k={k}");
    }
    // N = 5, k = 1: coefficients 12 and 24
    let got = hr_lhs_form(&one, 1, &ctx).unwrap();
    let a = assemble_weighted_form(&one, 0, 2, &ctx).unwrap();
    let want = FormMatrix::combine("x", &[(1.0, &a), (12.0, &d1), (24.0, &d0)]).unwrap();
    assert!(max_rel_diff(&got, &want) < 1e-13);
}

#[test]
fn six_integrals_against_direct_quadrature() {
    // non-constant V so every term is active; N = 5, k = 1
    let (a, bb) = (0.5, 4.0);
    let n = 5u32;
    let k = 1u32;
    let bind = ParamBinding::with_dim(n);
    let v = w("1+r^2/4");
    let prof = w(&format!("r^2*exp(-r)*((r-{a})*({bb}-r))^4"));
    let u = [prof.clone(), derivative(&prof), derivative(&derivative(&prof))];
    let vd = [v.clone(), derivative(&v), derivative(&derivative(&v))];
    let c = mode_coeff(k, n);
    let nf = n as f64;
    let exact = simpson(
        |r| {
            let e = |x: &WeightExpr| x.evaluate(r, &bind).unwrap();
            let (u0, u1, u2) = (e(&u[0]), e(&u[1]), e(&u[2]));
            let (v0, v1, v2) = (e(&vd[0]), e(&vd[1]), e(&vd[2]));
            let p = |q: f64| r.powf(nf - 1.0 + q);
            v0 * p(0.0) * u2 * u2 + (nf - 1.0 + 2.0 * c) * v0 * p(-2.0) * u1 * u1
                + (c * c + 2.0 * (nf - 4.0) * c) * v0 * p(-4.0) * u0 * u0
                - (nf - 1.0) * v1 * p(-1.0) * u1 * u1
                - (nf - 5.0) * c * v1 * p(-3.0) * u0 * u0
                - c * v2 * p(-2.0) * u0 * u0
        },
        a,
        bb,
        200_000,
    );
    let discrete = |m: usize| {
        let g = grid(n, m, a, bb);
        let ctx = FormContext::new(&g, n, bind);
        hr_lhs_form(&v, k, &ctx).unwrap().evaluate(&sample(&prof, &g, &bind)).unwrap()
    };
    let (coarse, fine) = (discrete(2049), discrete(4097));
    let extrapolated = (4.0 * fine - coarse) / 3.0;
    assert!(
        (extrapolated - exact).abs() < 1e-9 * exact.abs(),
        "{extrapolated} vs {exact}"
    );
    assert!((fine - exact).abs() < 1e-5 * exact.abs());
}

#[test]
fn inverse_square_rhs_is_first_order_term() {
    let g = grid(5, 200, 1e-2, 1e2);
    let ctx = FormContext::new(&g, 5, ParamBinding::with_dim(5));
    let got = hr_rhs_form(&w("1/r^2"), 0, &ctx).unwrap();
    let want = assemble_weighted_form(&w("1"), -2, 1, &ctx).unwrap();
    assert!(max_rel_diff(&got, &want) < 1e-14);
    let got = hr_rhs_form(&w("1/r^2"), 1, &ctx).unwrap();
    let extra = assemble_weighted_form(&w("1"), -4, 0, &ctx).unwrap();
    let want = FormMatrix::combine("x", &[(1.0, &want), (4.0, &extra)]).unwrap();
    assert!(max_rel_diff(&got, &want) < 1e-14);
}

#[test]
fn heisenberg_rhs_is_indefinite() {
    let n = 5;
    let bind = ParamBinding::with_dim(n);
    let g = grid(n, 400, 1e-2, 10.0);
    let ctx = FormContext::new(&g, n, bind);
    let f = hr_rhs_form(&w("N+2-r^2"), 0, &ctx).unwrap();
    let prof = w("((r-3.2)*(6-r))^3");
    let u: Vec<f64> = g
        .r
        .iter()
        .map(|&r| if r > 3.2 && r < 6.0 { prof.evaluate(r, &bind).unwrap() } else { 0.0 })
        .collect();
    assert!(f.evaluate(&u).unwrap() < 0.0);
    assert!(!is_positive_definite(&f.matrix));
}

#[test]
fn rellich_rhs_values() {
    let g = grid(5, 100, 0.1, 2.0);
    let ctx = FormContext::new(&g, 5, ParamBinding::with_dim(5));
    let f = rellich_rhs_form(&w("1"), &ctx).unwrap();
    assert_eq!(f.evaluate(&vec![0.0; g.len()]).unwrap(), 0.0);
    let hat: Vec<f64> = g.r.iter().map(|r| (0.5 - (r - 1.0).abs()).max(0.0)).collect();
    assert!(f.evaluate(&hat).unwrap() > 0.0);
}

#[test]
fn biharmonic_form_is_positive_definite() {
    for n in [3, 5, 8] {
        let g = grid(n, 400, 1e-3, 1e3);
        let ctx = FormContext::new(&g, n, ParamBinding::with_dim(n));
        for k in 0..4 {
            let f = hr_lhs_form(&w("1"), k, &ctx).unwrap();
            assert!(is_positive_definite(&f.matrix), "N={n} k={k}");
        }
    }
}

#[test]
fn proof_form_monotone_in_k() {
    // 2 ∫ r^{N-3}|u'|^2 + (c_k + 3N - 9) ∫ r^{N-5}|u|^2 at fixed profiles
    let n = 5;
    let g = grid(n, 120, 1e-2, 1e2);
    let ctx = FormContext::new(&g, n, ParamBinding::with_dim(n));
    let d1 = assemble_weighted_form(&w("1"), -2, 1, &ctx).unwrap();
    let d0 = assemble_weighted_form(&w("1"), -4, 0, &ctx).unwrap();
    for seed in 0..5u64 {
        let u: Vec<f64> = (0..g.len())
            .map(|i| ((i as f64 * 0.37 + seed as f64).sin() * 1e3).fract())
            .collect();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..9 {
            let c = mode_coeff(k, n);
            let f = FormMatrix::combine("x", &[(2.0, &d1), (c + 3.0 * n as f64 - 9.0, &d0)]).unwrap();
            let val = f.evaluate(&u).unwrap();
            assert!(val >= prev);
            prev = val;
        }
    }
}

#[test]
fn free_left_rejects_second_order() {
    let g = grid(2, 50, 0.1, 1.0);
    let ctx = FormContext::first_order(&g, 2, ParamBinding::with_dim(2)).with_boundary(Boundary::FreeLeft);
    assert!(assemble_weighted_form(&w("1"), 0, 1, &ctx).is_ok());
    assert!(matches!(assemble_weighted_form(&w("1"), 0, 2, &ctx), Err(Error::Unsupported(_))));
}

#[test]
fn incompatible_forms_do_not_combine() {
    let g = grid(5, 50, 0.1, 1.0);
    let b = ParamBinding::with_dim(5);
    let a = mass_form(0, &FormContext::new(&g, 5, b)).unwrap();
    let c = mass_form(0, &FormContext::first_order(&g, 5, b)).unwrap();
    assert!(matches!(a.minus(&c), Err(Error::FormMismatch(_))));
}

