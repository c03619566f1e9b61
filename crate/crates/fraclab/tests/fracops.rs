use fraclab::fracops::{
    caputo_derivative, euclid, kernel_convolve, kernel_convolve_with, lp_time_norm,
    lp_time_norm_from_first, product_rule_remainder, SpaceTag, StartBehavior, TimeGrid,
    Trajectory,
};
use fraclab::linalg::CVec;
use fraclab::mlf::{ml_real, FracOrder, MLParams};
use fraclab::special::gamma;
use fraclab::Complex64;

fn ord(a: f64) -> FracOrder {
    FracOrder::new(a).unwrap()
}

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn scalar_u0(x: f64) -> CVec {
    CVec::from_element(1, re(x))
}

/// max |traj(t) - want(t)| over nodes with t >= t_min
fn max_err(traj: &Trajectory, t_min: f64, want: impl Fn(f64) -> f64) -> f64 {
    traj.grid
        .nodes
        .iter()
        .zip(&traj.values)
        .filter(|(t, _)| **t >= t_min)
        .map(|(t, v)| (v[0] - re(want(*t))).norm())
        .fold(0.0, f64::max)
}

#[test]
fn power_function_has_constant_derivative() {
    // ∂^α t^α = Γ(1+α); the first node carries an N-independent error, so the
    // convergence check starts at t = 0.1
    let a = 0.5;
    let want = gamma(1.0 + a);
    let mut errs = Vec::new();
    for n in [1024, 2048, 4096] {
        let g = TimeGrid::uniform(1.0, n).unwrap();
        let u = Trajectory::scalar(g, |t| re(t.powf(a)));
        let d = caputo_derivative(ord(a), &u, &scalar_u0(0.0)).unwrap();
        errs.push(max_err(&d, 0.1, |_| want));
    }
    assert!(errs[0] <= 2e-2, "{errs:?}");
    assert!(errs[0] / errs[1] > 1.8 && errs[1] / errs[2] > 1.8, "{errs:?}");
}

#[test]
fn eigenfunction_relation_converges() {
    let a = 0.5;
    let p = MLParams::new(a, 1.0).unwrap();
    let e = |t: f64| ml_real(&p, -t.powf(a)).unwrap();
    let mut errs = Vec::new();
    for n in [128, 256, 512, 1024] {
        let g = TimeGrid::graded(1.0, n, TimeGrid::default_grading(ord(a))).unwrap();
        let u = Trajectory::scalar(g, |t| re(e(t)));
        let d = caputo_derivative(ord(a), &u, &scalar_u0(1.0)).unwrap();
        // the first node carries an N-independent error, as for t^α
        errs.push(max_err(&d, 0.05, |t| -e(t)));
    }
    assert!(errs[3] < 5e-3, "{errs:?}");
    for w in errs.windows(2) {
        assert!(w[1] < 0.75 * w[0], "{errs:?}");
    }
}

#[test]
fn convolution_of_constant_is_exact() {
    let a = 0.5;
    let g = TimeGrid::uniform(1.0, 1024).unwrap();
    let one = Trajectory::scalar(g.clone(), |_| re(1.0));
    let c = kernel_convolve(ord(a), &one).unwrap();
    assert!(max_err(&c, 0.0, |t| t.powf(1.0 - a) / gamma(2.0 - a)) < 1e-12);
    let zero = Trajectory::zeros(g, SpaceTag::H, 3);
    let z = kernel_convolve(ord(a), &zero).unwrap();
    assert!(z.values.iter().all(|v| v.norm() == 0.0));
}

#[test]
fn convolution_of_psi_is_phi() {
    let a = 0.5;
    let pa = MLParams::new(a, a).unwrap();
    let p1 = MLParams::new(a, 1.0).unwrap();
    let psi = |s: f64| s.powf(a - 1.0) * ml_real(&pa, -s.powf(a)).unwrap();
    let phi = |s: f64| ml_real(&p1, -s.powf(a)).unwrap();
    let mut errs = Vec::new();
    // s^{1-α}ψ(s) → 1/Γ(α) at the origin
    for n in [256, 512, 1024, 2048] {
        let g = TimeGrid::graded(1.0, n, 3.0).unwrap();
        let v = Trajectory::scalar(g, |s| if s > 0.0 { re(psi(s)) } else { re(1.0 / gamma(a)) });
        let c = kernel_convolve_with(ord(a), &v, StartBehavior::Power(a - 1.0)).unwrap();
        errs.push(max_err(&c, 1e-300, phi));
    }
    println!("k*psi errors {errs:?}");
    assert!(errs[3] < 1e-3, "{errs:?}");
    for w in errs.windows(2) {
        assert!(w[1] < w[0], "{errs:?}");
    }
}

#[test]
fn remainder_vanishes_for_constant_multiplier() {
    let g = TimeGrid::uniform(1.0, 64).unwrap();
    let u = Trajectory::scalar(g, |t| re((3.0 * t).sin()));
    let f = product_rule_remainder(ord(0.4), &u, |_| (1.0, 0.0), &scalar_u0(0.0)).unwrap();
    assert!(f.values.iter().all(|v| v.norm() == 0.0));
}

#[test]
fn remainder_with_constant_u_is_derivative_of_multiplier() {
    // F(u0, v) = u0 ∂^α v and ∂^α t² = 2 t^{2-α}/Γ(3-α)
    let a = 0.3;
    let u0 = CVec::from_vec(vec![Complex64::new(2.0, -1.0), re(0.5)]);
    let g = TimeGrid::uniform(1.0, 256).unwrap();
    let u = Trajectory::from_fn(g.clone(), SpaceTag::H, |_| u0.clone()).unwrap();
    let f = product_rule_remainder(ord(a), &u, |t| (t * t, 2.0 * t), &u0).unwrap();
    let dv = caputo_derivative(ord(a), &Trajectory::scalar(g, |t| re(t * t)), &scalar_u0(0.0)).unwrap();
    for ((t, fv), d) in f.grid.nodes.iter().zip(&f.values).zip(&dv.values).skip(1) {
        let exact = 2.0 * t.powf(2.0 - a) / gamma(3.0 - a);
        for k in 0..2 {
            assert!((fv[k] - u0[k] * exact).norm() < 1e-6 * u0[k].norm().max(1.0), "t={t}");
            assert!((fv[k] - u0[k] * d[0]).norm() < 2e-3 * u0[k].norm(), "t={t}");
        }
    }
}

#[test]
fn product_rule_residual_decreases() {
    let a = 0.5;
    let p = MLParams::new(a, 1.0).unwrap();
    let e = |t: f64| ml_real(&p, -t.powf(a)).unwrap();
    let mut res = Vec::new();
    for n in [512, 1024, 2048] {
        let g = TimeGrid::uniform(1.0, n).unwrap();
        let u = Trajectory::scalar(g.clone(), |t| re(e(t)));
        let vu = Trajectory::scalar(g, |t| re(t * t * e(t)));
        let d_vu = caputo_derivative(ord(a), &vu, &scalar_u0(0.0)).unwrap();
        let d_u = caputo_derivative(ord(a), &u, &scalar_u0(1.0)).unwrap();
        let f = product_rule_remainder(ord(a), &u, |t| (t * t, 2.0 * t), &scalar_u0(1.0)).unwrap();
        let r = d_vu
            .grid
            .nodes
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, t)| (d_vu.values[i][0] - re(t * t) * d_u.values[i][0] - f.values[i][0]).norm())
            .fold(0.0, f64::max);
        res.push(r);
    }
    assert!(res[2] <= 5e-3, "{res:?}");
    assert!(res[1] < res[0] && res[2] < res[1], "{res:?}");
}

#[test]
fn lp_norm_of_identity() {
    let g = TimeGrid::uniform(1.0, 4096).unwrap();
    let u = Trajectory::scalar(g, re);
    let n = lp_time_norm(2.0, &u, euclid).unwrap();
    assert!((n - 1.0 / 3f64.sqrt()).abs() < 1e-6);
}

#[test]
fn lp_norm_skips_singular_first_cell() {
    let g = TimeGrid::uniform(1.0, 1000).unwrap();
    let u = Trajectory::scalar(g, |t| if t == 0.0 { re(f64::INFINITY) } else { re(t.powf(-0.25)) });
    let s = lp_time_norm_from_first(2.0, &u, euclid).unwrap();
    assert!(s.value.is_finite() && s.omitted_mass.is_infinite());
    // ∫_{1e-3}^1 t^{-1/2} dt = 2 - 2·10^{-1.5}
    assert!((s.value.powi(2) - (2.0 - 2.0 * 10f64.powf(-1.5))).abs() < 1e-2);
}

mod props {
    use super::*;
    use proptest::prelude::*;

    fn traj(g: &TimeGrid, c: [f64; 4]) -> Trajectory {
        Trajectory::scalar(g.clone(), |t| Complex64::new(c[0] * t.sin() + c[1], c[2] * t * t + c[3]))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn derivative_is_linear(c1 in prop::array::uniform4(-3.0f64..3.0), c2 in prop::array::uniform4(-3.0f64..3.0),
                                a in -2.0f64..2.0, b in -2.0f64..2.0, al in 0.1f64..0.9) {
            let g = TimeGrid::graded(2.0, 40, 1.5).unwrap();
            let (u, w) = (traj(&g, c1), traj(&g, c2));
            let (ua, wa) = (u.values[0].clone(), w.values[0].clone());
            let lhs = caputo_derivative(ord(al), &u.combine(re(a), &w, re(b)).unwrap(), &(&ua * re(a) + &wa * re(b))).unwrap();
            let du = caputo_derivative(ord(al), &u, &ua).unwrap();
            let dw = caputo_derivative(ord(al), &w, &wa).unwrap();
            let rhs = du.combine(re(a), &dw, re(b)).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-11);
        }

        #[test]
        fn lp_triangle_inequality(c1 in prop::array::uniform4(-3.0f64..3.0), c2 in prop::array::uniform4(-3.0f64..3.0), p in 1.1f64..6.0) {
            let g = TimeGrid::uniform(1.0, 50).unwrap();
            let (u, w) = (traj(&g, c1), traj(&g, c2));
            let s = u.combine(re(1.0), &w, re(1.0)).unwrap();
            let ns = lp_time_norm(p, &s, euclid).unwrap();
            let nu = lp_time_norm(p, &u, euclid).unwrap();
            let nw = lp_time_norm(p, &w, euclid).unwrap();
            prop_assert!(ns <= nu + nw + 1e-12);
        }
    }
}
