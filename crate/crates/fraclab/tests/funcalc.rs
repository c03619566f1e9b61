use std::f64::consts::PI;

use fraclab::funcalc::{
    decay_fit, decay_fit_windows, decay_windows, log_grid, scalar_phi, scalar_psi, verify_calculus_identities,
    CalcMode, ContourSpec, OperatorCalculus, VertexRule,
};
use fraclab::linalg::c;
use fraclab::mlf::{ml_real, FracOrder, MLParams};
use fraclab::reglab::DiniModulus;
use fraclab::special::gamma;
use fraclab::triple::{build_weighted_triple, form_to_operators, NonAutonomousForm};

fn ord(a: f64) -> FracOrder {
    FracOrder::new(a).unwrap()
}

fn phi_exact(a: f64, lam: f64, s: f64) -> f64 {
    ml_real(&MLParams::new(a, 1.0).unwrap(), -lam * s.powf(a)).unwrap()
}

fn psi_exact(a: f64, lam: f64, s: f64) -> f64 {
    s.powf(a - 1.0) * ml_real(&MLParams::new(a, a).unwrap(), -lam * s.powf(a)).unwrap()
}

fn diagonal_calc(alpha: f64, vals: Vec<f64>, mode: Option<CalcMode>) -> OperatorCalculus {
    let tr = build_weighted_triple(vals.len(), |_| 1.0).unwrap();
    let f = NonAutonomousForm::multiplication(&tr, vals, 0.0, DiniModulus::zero(), 1.0).unwrap();
    let p = form_to_operators(&f, &tr, 0.0).unwrap();
    OperatorCalculus::new(ord(alpha), &p, &tr, mode).unwrap()
}

fn fd_calc(alpha: f64, n: usize, mode: Option<CalcMode>) -> OperatorCalculus {
    let tr = build_weighted_triple(n, |_| 1.0).unwrap();
    let f = NonAutonomousForm::finite_difference(&tr, 0.5, DiniModulus::power(0.6, 1.0).unwrap(), 1.0).unwrap();
    let p = form_to_operators(&f, &tr, 0.5).unwrap();
    OperatorCalculus::new(ord(alpha), &p, &tr, mode).unwrap()
}

#[test]
fn spec_scalar_values() {
    let spec = ContourSpec::default();
    let phi = scalar_phi(ord(0.5), 1.0, 1.0, &spec).unwrap();
    assert!((phi - 0.427583576155807).abs() < 1e-6);
    let psi = scalar_psi(ord(0.5), 1.0, 1.0, &spec).unwrap();
    assert!((psi - psi_exact(0.5, 1.0, 1.0)).abs() < 1e-6);
}

#[test]
fn scalar_equivalence_grid() {
    let spec = ContourSpec::default();
    let mut worst: f64 = 0.0;
    for alpha in [0.3, 0.5, 0.7] {
        for lam in [0.1, 1.0, 10.0] {
            for s in log_grid(1e-3, 10.0, 25) {
                let p = scalar_phi(ord(alpha), lam, s, &spec).unwrap();
                let q = scalar_psi(ord(alpha), lam, s, &spec).unwrap();
                let (pe, qe) = (phi_exact(alpha, lam, s), psi_exact(alpha, lam, s));
                worst = worst.max(((p - pe) / pe).abs()).max(((q - qe) / qe).abs());
            }
        }
    }
    assert!(worst <= 1e-6, "worst relative error {worst:e}");
}

#[test]
fn zero_operator_limit_of_psi() {
    let spec = ContourSpec::default();
    for s in [1e-2, 0.5, 3.0] {
        let q = scalar_psi(ord(0.35), 0.0, s, &spec).unwrap();
        let want = s.powf(-0.65) / gamma(0.35);
        assert!(((q - want) / want).abs() < 1e-9);
    }
}

#[test]
fn contour_invariance() {
    let base = ContourSpec::default();
    for theta in [0.6 * PI, 0.75 * PI, 0.9 * PI] {
        for vertex in [VertexRule::Fixed { r: 0.5 }, VertexRule::Fixed { r: 1.0 }, VertexRule::InverseS] {
            let spec = ContourSpec { theta, vertex, ..base };
            for s in [0.01, 0.3, 2.0] {
                let p = scalar_phi(ord(0.6), 2.0, s, &spec).unwrap();
                assert!((p - phi_exact(0.6, 2.0, s)).abs() < 1e-8, "θ={theta} {vertex:?} s={s}");
            }
        }
    }
}

#[test]
fn diagonal_operator_is_entrywise() {
    let vals = vec![0.3, 1.0, 4.0, 25.0];
    let calc = diagonal_calc(0.45, vals.clone(), None);
    let spec = ContourSpec::default();
    let smp = calc.sample(0.8, &spec).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            let (wp, wq) = if i == j { (phi_exact(0.45, vals[i], 0.8), psi_exact(0.45, vals[i], 0.8)) } else { (0.0, 0.0) };
            assert!((smp.phi[(i, j)] - c(wp, 0.0)).norm() < 1e-6);
            assert!((smp.psi[(i, j)] - c(wq, 0.0)).norm() < 1e-6);
        }
    }
}

#[test]
fn resolvent_and_spectral_paths_agree() {
    let spec = ContourSpec::default();
    let a = fd_calc(0.5, 12, Some(CalcMode::Spectral));
    let b = fd_calc(0.5, 12, Some(CalcMode::Resolvent));
    for s in [0.01, 0.2, 1.5] {
        let (x, y) = (a.sample(s, &spec).unwrap(), b.sample(s, &spec).unwrap());
        for (m1, m2) in [(&x.phi, &y.phi), (&x.psi, &y.psi), (&x.a_psi, &y.a_psi)] {
            assert!(a.norm_h(&(m1 - m2)) <= 1e-8 * a.norm_h(m2), "s={s}");
        }
    }
}

/// Fitted exponent of `s ↦ ‖φ(s)x − x‖_{V′}` between the ends of `s_grid`.
fn identity_rate(calc: &OperatorCalculus, tr: &fraclab::triple::DiscreteTriple, x: &fraclab::linalg::CVec, s_grid: &[f64]) -> f64 {
    let spec = ContourSpec::default();
    let errs: Vec<f64> = s_grid
        .iter()
        .map(|&s| tr.norm(fraclab::fracops::SpaceTag::Vp, &(&calc.phi(s, &spec).unwrap() * x - x)))
        .collect();
    let k = errs.len() - 1;
    (errs[0].ln() - errs[k].ln()) / (s_grid[0].ln() - s_grid[k].ln())
}

#[test]
fn phi_tends_to_identity() {
    // ‖φ(s)x − x‖_{V′} ≤ C s^α ‖x‖_V; the rate is visible once λ_max s^α ≪ 1
    let alpha = 0.5;
    let tr = build_weighted_triple(6, |_| 1.0).unwrap();
    let calc = diagonal_calc(alpha, vec![0.05, 0.1, 0.2, 0.4, 0.7, 1.0], None);
    let x = fraclab::linalg::CVec::from_iterator(6, (0..6).map(|k| c(1.0, 0.3 * k as f64)));
    let slope = identity_rate(&calc, &tr, &x, &[1e-1, 1e-2, 1e-3, 1e-4]);
    assert!(slope >= alpha - 0.05, "diagonal slope {slope}");

    let tr = build_weighted_triple(20, |_| 1.0).unwrap();
    let calc = fd_calc(alpha, 20, None);
    let x = fraclab::linalg::CVec::from_iterator(20, tr.nodes.iter().map(|x| c((PI * x).sin(), 0.0)));
    let slope = identity_rate(&calc, &tr, &x, &[1e-9, 1e-10, 1e-11, 1e-12]);
    assert!(slope >= alpha - 0.05, "fd slope {slope}");
}

#[test]
fn identities_on_diagonal_family() {
    let calc = diagonal_calc(0.5, vec![0.5, 1.0, 3.0, 10.0], None);
    let spec = ContourSpec::default();
    let rep = verify_calculus_identities(&calc, &spec, &[0.01, 0.5, 2.0], &[c(2.0, 0.0), c(1.0, 3.0)], 2048).unwrap();
    for p in &rep.laplace {
        assert!(p.residual <= 1e-4, "{p:?}");
    }
    for p in &rep.derivative {
        assert!(p.residual <= 1e-3, "{p:?}");
    }
    assert!(rep.convolution_residual <= 1e-3, "{rep:?}");
    assert!(rep.refines, "{rep:?}");
}

#[test]
fn scalar_laplace_identity() {
    let calc = diagonal_calc(0.5, vec![1.0, 1.0], None);
    let rep = verify_calculus_identities(&calc, &ContourSpec::default(), &[0.05, 5.0], &[c(2.0, 0.0)], 256).unwrap();
    assert!(rep.laplace[0].residual <= 1e-4);
}

#[test]
fn derivative_identity_on_fd_family() {
    let calc = fd_calc(0.5, 30, None);
    let rep = verify_calculus_identities(&calc, &ContourSpec::default(), &[0.005, 0.5], &[c(1.0, 0.0)], 256).unwrap();
    let at_half = rep.derivative.iter().find(|p| p.s == 0.5).unwrap();
    assert!(at_half.residual <= 1e-3, "{at_half:?}");
}

#[test]
fn scalar_decay_of_a_phi() {
    let calc = diagonal_calc(0.5, vec![1.0, 1.0], None);
    let rep = decay_fit(&calc, &ContourSpec::default(), &log_grid(10.0, 1e3, 9)).unwrap();
    assert!((rep.a_phi.slope + 0.5).abs() < 0.05, "{rep:?}");
}

#[test]
fn decay_slopes_on_diagonal_spread() {
    let alpha = 0.3;
    let vals: Vec<f64> = (0..24).map(|k| 100f64.powf(k as f64 / 23.0)).collect();
    let calc = diagonal_calc(alpha, vals, None);
    let w = decay_windows(ord(alpha), 1.0, 100.0);
    let spec = ContourSpec::default();
    let (lo, hi) = w.a_psi.unwrap();
    let rep = decay_fit_windows(
        &calc,
        &spec,
        &log_grid(w.a_phi.0, w.a_phi.1, 9),
        &log_grid(lo, hi, 9),
        &log_grid(w.psi.0, w.psi.1, 9),
    )
    .unwrap();
    assert!((rep.a_phi.slope + alpha).abs() <= 0.1, "{rep:?}");
    assert!((rep.a_psi.slope + 1.0).abs() <= 0.1, "{rep:?}");
    assert!((rep.psi.slope - (alpha - 1.0)).abs() <= 0.1, "{rep:?}");
    assert!(rep.within_bounds);
}

#[test]
fn one_point_grid_rejected() {
    let calc = diagonal_calc(0.5, vec![1.0, 2.0], None);
    assert!(decay_fit(&calc, &ContourSpec::default(), &[1.0]).is_err());
}
