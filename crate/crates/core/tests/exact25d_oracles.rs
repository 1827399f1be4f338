use std::f64::consts::PI;

use mrelab_core::dynamics::{constitutive_velocity, induction_rhs};
use mrelab_core::exact25d::*;
use mrelab_core::random::random_scalar;
use mrelab_core::spectral::{derivative, pointwise};
use mrelab_core::{Grid, SpectralScalar, SpectralVector};

fn g64() -> Grid {
    Grid::cubic(2, 64).unwrap()
}

fn theorem_datum(g: &Grid, eps: f64) -> (SpectralScalar, SpectralScalar) {
    (
        SpectralScalar::from_fn(g, |x| eps * x[1].sin()),
        SpectralScalar::from_fn(g, |x| 1.0 + eps * x[0].cos()),
    )
}

fn ansatz_residuals(problem: &Rank1Problem, g: &SpectralScalar) -> (f64, f64) {
    let (b, u) = assemble_state(problem, g, 8).unwrap();
    let u_law = constitutive_velocity(&b, 0.0).unwrap();
    let rhs = induction_rhs(&b, &u).unwrap();
    let dg = rank1_rhs(g, &problem.v).extrude(b.grid()).unwrap();
    let expect = SpectralVector::from_components(vec![
        SpectralScalar::zeros(b.grid()),
        SpectralScalar::zeros(b.grid()),
        dg,
    ])
    .unwrap();
    (u_law.max_coeff_diff(&u), rhs.max_coeff_diff(&expect))
}

#[test]
fn assembled_states_solve_the_full_system() {
    let g = g64();
    let (profile, g0) = theorem_datum(&g, 0.1);
    let shear = Rank1Problem::shear(profile, g0.clone(), 1.0).unwrap();
    let (du, drhs) = ansatz_residuals(&shear, &g0);
    assert!(du <= 1e-10 && drhs <= 1e-10, "{du:e} {drhs:e}");

    for seed in 0..3 {
        let mut gr = random_scalar(&g, seed, 2.0, 4.0);
        gr.coeffs_mut()[0] = 0.7.into();
        let hyp = Rank1Problem::hyperbolic(gr.clone()).unwrap();
        let (du, drhs) = ansatz_residuals(&hyp, &gr);
        assert!(du <= 1e-10 && drhs <= 1e-10, "{du:e} {drhs:e}");
    }
}

#[test]
fn cellular_rank1_operator_matches_expanded_form() {
    let g = g64();
    let v = cellular_flow(&g);
    for seed in 10..13 {
        let s = random_scalar(&g, seed, 1.0, 4.0);
        let d = |s: &SpectralScalar, a| derivative(s, a).unwrap();
        let coeff = |f: fn(f64, f64) -> f64| SpectralScalar::from_fn(&g, move |x| f(x[0], x[1]));
        let terms = [
            (coeff(|a, b| (a.sin() * b.cos()).powi(2)), d(&d(&s, 0), 0)),
            (coeff(|a, b| (a.cos() * b.sin()).powi(2)), d(&d(&s, 1), 1)),
            (coeff(|a, b| -0.5 * (2.0 * a).sin() * (2.0 * b).sin()), d(&d(&s, 0), 1)),
            (coeff(|a, _| 0.5 * (2.0 * a).sin()), d(&s, 0)),
            (coeff(|_, b| 0.5 * (2.0 * b).sin()), d(&s, 1)),
        ];
        let mut expanded = SpectralScalar::zeros(&g);
        for (c, t) in &terms {
            expanded.axpy(1.0, &pointwise(&g, [c, t], |v| v[0] * v[1]));
        }
        let direct = rank1_rhs(&s, &v);
        assert!(direct.max_coeff_diff(&expanded) < 1e-10);
    }
}

#[test]
fn time_stepping_reproduces_closed_form() {
    let g = g64();
    let eps = 0.1;
    let (profile, g0) = theorem_datum(&g, eps);
    let p = Rank1Problem::shear(profile.clone(), g0.clone(), 1.0).unwrap();
    let stepped = p.integrate(1.0, 0.4).unwrap();
    let exact = shear_closed_form(&profile, &g0, 1.0, 1.0).unwrap();
    assert!(stepped.max_abs_diff(&exact) <= 1e-6);
}

#[test]
fn maximum_principle_holds_for_cellular_flow() {
    let g = Grid::cubic(2, 32).unwrap();
    let g0 = random_scalar(&g, 3, 3.0, 3.0);
    let p0 = g0.to_physical();
    let (lo, hi) = p0
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let g1 = Rank1Problem::hyperbolic(g0).unwrap().integrate(0.5, 0.4).unwrap();
    for x in g1.to_physical() {
        assert!(x >= lo - 1e-8 && x <= hi + 1e-8);
    }
}

#[test]
fn flat_trace_stays_flat() {
    let g = Grid::cubic(2, 32).unwrap();
    let g0 = SpectralScalar::from_fn(&g, |x| x[0].cos());
    let rep = hyperbolic_experiment(&g0, 0.5, 0.4, 20).unwrap();
    for s in &rep.samples {
        assert!(s.d1g_origin.abs() < 1e-10);
    }
    assert!(rep.energy_monotone);
}

#[test]
fn growth_law_slope_is_one_quarter() {
    let eps = 0.1;
    let rep = growth_report(eps, &log_spaced_times(eps, 10.0, 100.0, 40)).unwrap();
    let slope = rep.log_slope().unwrap();
    assert!((slope - 0.25).abs() <= 0.02, "slope {slope}");
    let last = rep.samples.last().unwrap();
    assert!((last.ratio1 - 1.0).abs() <= 0.05, "ratio1 {}", last.ratio1);
}

fn remark_profile(x2: f64) -> f64 {
    if x2.abs() <= 0.5 * PI {
        x2.cos().powi(2)
    } else {
        0.0
    }
}

#[test]
fn remark_current_sheets() {
    let lim = limiting_state(remark_profile, f64::sin).unwrap();
    assert!(lim.g0_mean().abs() < 1e-15);
    let rep = current_sheet_report(&lim, 64);
    assert_eq!(rep.sheets.len(), 2);
    for sheet in &rep.sheets {
        let sign = sheet.x2.signum();
        assert!((sheet.x2.abs() - 0.5 * PI).abs() < 1e-12);
        for ((x1, j), (_, amp)) in sheet.jump.iter().zip(&sheet.amplitude) {
            assert!((j[2] - sign * x1.sin()).abs() <= 1e-6);
            assert!(j[0].abs() <= 1e-6);
            assert!((amp[0] - sign * x1.sin()).abs() <= 1e-6);
        }
    }
    // bounded part of the current away from the planes
    for &(x1, x2) in &[(0.4, 0.3), (-2.0, -1.1)] {
        let c = lim.bounded_current(x1, x2).unwrap();
        assert!(c[0].abs() < 1e-9 && c[1].abs() < 1e-9);
        assert!((c[2] - (2.0 * x2).sin()).abs() < 1e-9);
    }
    let c = lim.bounded_current(1.0, 2.5).unwrap();
    assert!((c[1] + 1.0f64.cos()).abs() < 1e-9 && c[0].abs() < 1e-9 && c[2].abs() < 1e-9);
    assert!(lim.bounded_current(0.0, 0.5 * PI).is_none());
}

#[test]
fn closed_form_converges_to_the_limit_pointwise() {
    let lim = limiting_state(remark_profile, f64::sin).unwrap();
    let n = 64;
    for i in 0..n {
        for j in 0..n {
            let x1 = -PI + 2.0 * PI * i as f64 / n as f64;
            let x2 = -PI + 2.0 * PI * j as f64 / n as f64;
            let v = remark_profile(x2);
            let t = if v != 0.0 { 40.0 / (v * v) } else { 1e6 };
            let b = lim.closed_form(1.0, t, x1, x2);
            let limit = lim.sample(x1, x2);
            assert!((b[2] - limit[2]).abs() <= 1e-15 + 1e-15 * limit[2].abs().max(1.0), "({x1}, {x2})");
        }
    }
}
