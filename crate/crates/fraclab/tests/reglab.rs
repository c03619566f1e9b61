use fraclab::error::Error;
use fraclab::fracops::{SpaceTag, TimeGrid, Trajectory};
use fraclab::funcalc::{log_grid, ContourSpec};
use fraclab::linalg::{c, CMat, CVec};
use fraclab::mlf::{ml_real, FracOrder, MLParams};
use fraclab::quad::tanh_sinh;
use fraclab::reglab::{
    dini_check_a1, dini_check_a2, hormander_check, interpolation_norm, initial_class, r_operator_study,
    symbol_bounds_check, symbol_derivatives, symmetric_xi_grid, decade_grid, DiniModulus, InitialClass,
};
use fraclab::special::beta;
use fraclab::triple::{
    build_weighted_triple, form_to_operators, operators_from_matrix, DiscreteTriple, NonAutonomousForm,
};
use fraclab::volterra::ProblemSpec;
use fraclab::Complex64;
use proptest::prelude::*;

fn ord(a: f64) -> FracOrder {
    FracOrder::new(a).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn power(beta: f64) -> DiniModulus {
    DiniModulus::power(beta, 1.0).unwrap()
}

fn diag_form(base: Vec<f64>) -> (DiscreteTriple, NonAutonomousForm) {
    let tr = build_weighted_triple(base.len(), |_| 1.0).unwrap();
    let form = NonAutonomousForm::multiplication(&tr, base, 0.0, DiniModulus::zero(), 1.0).unwrap();
    (tr, form)
}

fn fd_form(n: usize, amp: f64, beta: f64) -> (DiscreteTriple, NonAutonomousForm) {
    let tr = build_weighted_triple(n, |_| 1.0).unwrap();
    let form = NonAutonomousForm::finite_difference(&tr, amp, power(beta), 1.0).unwrap();
    (tr, form)
}

/// `∫_{-∞}^{∞} g(e^u) du` by the trapezoid rule, exponentially accurate for
/// integrands decaying at both ends.
fn trapezoid_log(g: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let h = 0.01;
    let n = ((hi - lo) / h) as usize;
    (0..=n).map(|k| g((lo + h * k as f64).exp())).sum::<f64>() * h
}

#[test]
fn a1_power_law_values() {
    for alpha in [0.3, 0.5, 0.7] {
        for extra in [0.1, 0.25, 0.6] {
            for tau in [1.0, 2.5] {
                let b = alpha / 2.0 + extra;
                let rep = dini_check_a1(&power(b), ord(alpha), tau).unwrap();
                let exact = tau.powf(extra) / extra;
                assert!(rep.finite);
                assert!(rel(rep.value, exact) < 1e-6, "α={alpha} β={b}: {} vs {exact}", rep.value);
            }
        }
    }
}

#[test]
fn a1_boundary_diverges_logarithmically() {
    for alpha in [0.3, 0.5, 0.9] {
        let rep = dini_check_a1(&power(alpha / 2.0), ord(alpha), 1.0).unwrap();
        assert!(!rep.finite);
        // ω(t)/t^{1+α/2} = 1/t: one unit of integral per unit of ln(1/ε)
        let rate = rep.divergence_rate.unwrap();
        assert!((rate - 1.0).abs() < 1e-6, "{rate}");
        let (eps, partial) = *rep.partial.last().unwrap();
        assert!(rel(partial, (1.0 / eps).ln()) < 1e-9);
    }
    // below the boundary the integrand grows: still divergent
    assert!(!dini_check_a1(&power(0.2), ord(0.5), 1.0).unwrap().finite);
}

#[test]
fn a2_power_law_values_and_boundary() {
    for (alpha, p) in [(0.5, 2.0), (0.5, 4.0), (0.3, 3.0)] {
        for b in [0.1, 0.3, 0.45, 0.5, 0.8] {
            let e = p * (b - alpha);
            let rep = dini_check_a2(&power(b), ord(alpha), p, 1.0).unwrap();
            if e > -1.0 {
                assert!(rep.finite, "α={alpha} p={p} β={b}");
                assert!(rel(rep.value, 1.0 / (1.0 + e)) < 1e-6, "{} vs {}", rep.value, 1.0 / (1.0 + e));
            } else {
                assert!(!rep.finite, "α={alpha} p={p} β={b}");
            }
        }
        // p(β - α) = -1 exactly
        let b = alpha - 1.0 / p;
        if b > 0.0 {
            assert!(!dini_check_a2(&power(b), ord(alpha), p, 1.0).unwrap().finite);
        }
        // β = α: the integrand is 1
        let rep = dini_check_a2(&power(alpha), ord(alpha), p, 2.0).unwrap();
        assert!(rel(rep.value, 2.0) < 1e-12);
    }
    assert!(dini_check_a2(&power(0.5), ord(0.5), 1.0, 1.0).is_err());
}

#[test]
fn non_monotone_modulus_rejected() {
    let err = DiniModulus::table(vec![0.1, 0.2, 0.3], vec![0.5, 0.2, 0.6]);
    assert!(matches!(err, Err(Error::InvalidInput(_))));
    let mut m = power(0.5);
    m.monotone_checked = false;
    m.kind = fraclab::reglab::ModulusKind::Table { t: vec![0.0, 0.1], omega: vec![0.3, 0.4] };
    assert!(dini_check_a1(&m, ord(0.5), 1.0).is_err());
}

#[test]
fn measured_fd_increments_reproduce_the_generating_exponent() {
    let (alpha, p) = (0.5, 4.0);
    for beta in [0.6, 0.2] {
        let (tr, form) = fd_form(16, 0.5, beta);
        let b0 = form.matrix(&tr, 0.0);
        let ts = decade_grid(1e-10, 1.0, 20);
        let inc: Vec<f64> = ts.iter().map(|&t| tr.form_norm(&(form.matrix(&tr, t) - &b0))).collect();
        // least-squares slope in log-log
        let n = ts.len() as f64;
        let (lx, ly): (Vec<f64>, Vec<f64>) = ts.iter().zip(&inc).map(|(t, w)| (t.ln(), w.ln())).unzip();
        let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
        let slope = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!((slope - beta).abs() < 1e-6, "{slope}");
        let scale = inc.last().unwrap() / ts.last().unwrap().powf(beta);
        let fitted = DiniModulus::power(slope, scale).unwrap();
        let generating = DiniModulus::power(beta, scale).unwrap();
        let table = DiniModulus::table(ts.clone(), inc.clone()).unwrap();
        let v_fit = dini_check_a2(&fitted, ord(alpha), p, 1.0).unwrap();
        let v_gen = dini_check_a2(&generating, ord(alpha), p, 1.0).unwrap();
        assert_eq!(v_fit.finite, v_gen.finite);
        assert_eq!(v_gen.finite, p * (beta - alpha) > -1.0);
        if v_gen.finite {
            let v_tab = dini_check_a2(&table, ord(alpha), p, 1.0).unwrap();
            assert!(v_tab.finite);
            assert!(rel(v_tab.value, v_gen.value) < 1e-2, "{} vs {}", v_tab.value, v_gen.value);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dini_verdicts_are_scale_free(c in 1e-3f64..1e3, b in 0.05f64..1.0, p in 1.5f64..5.0) {
        let alpha = ord(0.5);
        let m = power(b);
        let mc = m.scaled(c);
        let (r1, s1) = (dini_check_a1(&m, alpha, 1.0).unwrap(), dini_check_a1(&mc, alpha, 1.0).unwrap());
        prop_assert_eq!(r1.finite, s1.finite);
        if r1.finite {
            prop_assert!(rel(s1.value, c * r1.value) < 1e-10);
        }
        let (r2, s2) = (dini_check_a2(&m, alpha, p, 1.0).unwrap(), dini_check_a2(&mc, alpha, p, 1.0).unwrap());
        prop_assert_eq!(r2.finite, s2.finite);
        if r2.finite {
            prop_assert!(rel(s2.value, c.powf(p) * r2.value) < 1e-10);
        }
    }
}

#[test]
fn interpolation_seminorm_of_identity() {
    let (tr, form) = diag_form(vec![1.0; 5]);
    let pair = form_to_operators(&form, &tr, 0.0).unwrap();
    let x = CVec::from_iterator(5, (0..5).map(|k| c(1.0 + k as f64, 0.5 - k as f64)));
    let hx = tr.norm(SpaceTag::H, &x);
    for gamma in [0.1, 0.3, 0.5, 0.9] {
        for p in [1.5, 2.0, 4.0] {
            let n = interpolation_norm(&pair, &tr, gamma, p, &x).unwrap();
            // ∫ t^{γp-1}(1+t)^{-p} dt = B(γp, (1-γ)p)
            let exact = hx * beta(gamma * p, (1.0 - gamma) * p).powf(1.0 / p);
            assert!(rel(n.seminorm, exact) < 1e-9, "γ={gamma} p={p}: {} vs {exact}", n.seminorm);
            assert!(rel(n.norm, hx + exact) < 1e-9);
            assert!(n.t_min <= 1.001e-4 && n.t_max >= 0.999e4);
        }
    }
}

#[test]
fn interpolation_seminorm_of_eigenvectors_rescales() {
    let base = vec![0.5, 3.0, 40.0, 900.0];
    let (tr, form) = diag_form(base.clone());
    let pair = form_to_operators(&form, &tr, 0.0).unwrap();
    let (gamma, p) = (0.4, 3.0);
    for (k, a) in base.iter().enumerate() {
        let mut x = CVec::zeros(4);
        x[k] = c(2.0, 0.0);
        let hx = tr.norm(SpaceTag::H, &x);
        let n = interpolation_norm(&pair, &tr, gamma, p, &x).unwrap();
        let oracle = hx
            * trapezoid_log(|t| (t.powf(gamma) * a / (t + a)).powf(p), -80.0, 80.0).powf(1.0 / p);
        assert!(rel(n.seminorm, oracle) < 1e-9, "{} vs {oracle}", n.seminorm);
        // t → a t: the seminorm carries a factor a^γ
        let unit = hx * beta(gamma * p, (1.0 - gamma) * p).powf(1.0 / p);
        assert!(rel(n.seminorm, a.powf(gamma) * unit) < 1e-9);
    }
}

#[test]
fn interpolation_norm_dense_path() {
    // non-self-adjoint: a e^{iθ} on each node
    let tr = build_weighted_triple(3, |_| 1.0).unwrap();
    let vals = [c(2.0, 1.0), c(10.0, -4.0), c(0.3, 0.2)];
    let b = CMat::from_diagonal(&CVec::from_iterator(3, vals.iter().zip(&tr.quad_weights).map(|(v, q)| v * *q)));
    let pair = operators_from_matrix(&tr, 0.0, b).unwrap();
    let (gamma, p) = (0.6, 2.5);
    let x = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 2.0), c(-1.0, 1.0)]);
    let n = interpolation_norm(&pair, &tr, gamma, p, &x).unwrap();
    let q = tr.quad_weights.clone();
    let oracle = trapezoid_log(
        |t| {
            let s: f64 = vals
                .iter()
                .zip(x.iter())
                .zip(&q)
                .map(|((a, x), q)| (a / (a + t) * x).norm_sqr() * q)
                .sum();
            (t.powf(gamma) * s.sqrt()).powf(p)
        },
        -80.0,
        80.0,
    )
    .powf(1.0 / p);
    assert!(rel(n.seminorm, oracle) < 1e-8, "{} vs {oracle}", n.seminorm);
}

#[test]
fn interpolation_exponent_must_be_interior() {
    let (tr, form) = diag_form(vec![1.0, 2.0]);
    let pair = form_to_operators(&form, &tr, 0.0).unwrap();
    let x = CVec::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]);
    for g in [0.0, 1.0, 1.5, -0.1] {
        assert!(matches!(interpolation_norm(&pair, &tr, g, 2.0, &x), Err(Error::Divergent(_))));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn interpolation_norm_is_a_norm(
        xs in prop::collection::vec(-1.0f64..1.0, 16),
        ys in prop::collection::vec(-1.0f64..1.0, 16),
        s in -5.0f64..5.0,
    ) {
        let (tr, form) = fd_form(8, 0.0, 0.6);
        let pair = form_to_operators(&form, &tr, 0.0).unwrap();
        let v = |a: &[f64]| CVec::from_iterator(8, (0..8).map(|k| c(a[2 * k], a[2 * k + 1])));
        let (x, y) = (v(&xs), v(&ys));
        let nx = interpolation_norm(&pair, &tr, 0.5, 4.0, &x).unwrap().norm;
        let ny = interpolation_norm(&pair, &tr, 0.5, 4.0, &y).unwrap().norm;
        let nxy = interpolation_norm(&pair, &tr, 0.5, 4.0, &(&x + &y)).unwrap().norm;
        let nsx = interpolation_norm(&pair, &tr, 0.5, 4.0, &(&x * c(s, 0.0))).unwrap().norm;
        prop_assert!(nxy <= (nx + ny) * (1.0 + 1e-12));
        prop_assert!((nsx - s.abs() * nx).abs() <= 1e-10 * nx.max(1e-300));
    }
}

fn r_problem(tr: DiscreteTriple, form: NonAutonomousForm, alpha: f64, p: f64, u0: CVec) -> ProblemSpec {
    let grid = TimeGrid::uniform(1.0, 4).unwrap();
    let f = Trajectory::zeros(grid, SpaceTag::H, tr.dim);
    ProblemSpec::new(ord(alpha), tr, form, f, u0, p).unwrap()
}

#[test]
fn initial_classes() {
    assert_eq!(initial_class(ord(0.3), 2.0), InitialClass::Subcritical);
    assert_eq!(initial_class(ord(0.5), 2.0), InitialClass::Critical);
    assert_eq!(initial_class(ord(0.5), 4.0), InitialClass::Supercritical);
}

#[test]
fn r_study_of_zero_data() {
    let (tr, form) = fd_form(8, 0.3, 0.6);
    let prob = r_problem(tr, form, 0.5, 4.0, CVec::zeros(8));
    let rep = r_operator_study(&prob, &ContourSpec::default(), 2).unwrap();
    assert!(rep.levels.iter().all(|l| l.lp_norm == 0.0 && l.ratio == 0.0));
    assert_eq!(rep.u0_class_norm, 0.0);
    assert_eq!(rep.remainder_constant, Some(0.0));
}

#[test]
fn r_study_eigenvector_matches_scalar_oracle() {
    let base = vec![1.0, 4.0, 16.0, 64.0];
    let (alpha, p) = (0.5, 4.0);
    let ml = MLParams::new(alpha, 1.0).unwrap();
    let gamma = 1.0 - 1.0 / (alpha * p);
    for k in [0, 2, 3] {
        let (tr, form) = diag_form(base.clone());
        let mut u0 = CVec::zeros(4);
        u0[k] = c(1.0, 0.0);
        let hx = tr.norm(SpaceTag::H, &u0);
        let prob = r_problem(tr, form, alpha, p, u0);
        let rep = r_operator_study(&prob, &ContourSpec::default(), 3).unwrap();
        assert_eq!(rep.case, InitialClass::Supercritical);
        let a = base[k];
        // (R u0)(t) = a E_α(-a t^α) u0
        let lp = tanh_sinh(0.0, 1.0, 1e-13, |t| (a * ml_real(&ml, -a * t.powf(alpha)).unwrap()).powf(p))
            .value
            .powf(1.0 / p)
            * hx;
        let rhs = hx + hx * a.powf(gamma) * beta(gamma * p, (1.0 - gamma) * p).powf(1.0 / p);
        let oracle = lp / rhs;
        let got = rep.levels.last().unwrap().ratio;
        assert!(rel(got, oracle) < 0.05, "a={a}: {got} vs {oracle}");
        assert!(rel(got, oracle) < 1e-4, "a={a}: {got} vs {oracle}");
        assert!(rep.stable);
    }
}

#[test]
fn r_study_subcritical_ratio_bounded() {
    let (tr, form) = fd_form(16, 0.5, 0.6);
    let u0 = CVec::from_iterator(16, tr.nodes.iter().map(|x| c((7.0 * x).cos() + x, 0.0)));
    let prob = r_problem(tr, form, 0.3, 2.0, u0);
    let rep = r_operator_study(&prob, &ContourSpec::default(), 3).unwrap();
    assert_eq!(rep.case, InitialClass::Subcritical);
    assert!(rep.stable, "{:?}", rep.levels);
    assert!(rep.levels.iter().all(|l| l.ratio.is_finite() && l.ratio > 0.0));
}

#[test]
fn r_study_critical_rough_and_smooth() {
    let mut ratios = Vec::new();
    for rough in [false, true] {
        let (tr, form) = fd_form(32, 0.0, 0.6);
        let u0 = CVec::from_iterator(
            32,
            tr.nodes.iter().map(|x| c(if rough { x.powf(-0.25) } else { (std::f64::consts::PI * x).sin() }, 0.0)),
        );
        let prob = r_problem(tr, form, 0.5, 2.0, u0);
        let rep = r_operator_study(&prob, &ContourSpec::default(), 3).unwrap();
        assert_eq!(rep.case, InitialClass::Critical);
        if !rough {
            assert!(rep.stable, "{:?}", rep.levels);
        }
        ratios.push(rep.levels.last().unwrap().ratio);
        println!("rough={rough}: {:?} drift {:.3e}", rep.levels, rep.drift);
    }
    assert!(ratios.iter().all(|r| r.is_finite() && *r > 0.0));
}

#[test]
fn r_study_remainder_follows_modulus() {
    let (tr, form) = fd_form(16, 0.5, 0.6);
    let u0 = CVec::from_iterator(16, tr.nodes.iter().map(|x| c((std::f64::consts::PI * x).sin(), 0.0)));
    let prob = r_problem(tr, form, 0.5, 4.0, u0);
    let rep = r_operator_study(&prob, &ContourSpec::default(), 2).unwrap();
    let cst = rep.remainder_constant.unwrap();
    assert!(cst > 0.0 && cst.is_finite(), "{cst}");
}

fn analytic_symbol(a: f64, alpha: f64, delta: f64, xi: f64) -> [Complex64; 3] {
    let z = c(delta, xi);
    let i = c(0.0, 1.0);
    let za = z.powf(alpha);
    let d = za + a;
    let s0 = a / d;
    // ∂_ξ z^α = iα z^{α-1}
    let dza = i * alpha * z.powf(alpha - 1.0);
    let d2za = -alpha * (alpha - 1.0) * z.powf(alpha - 2.0);
    let s1 = -a * dza / (d * d);
    let s2 = -a * (d2za / (d * d) - 2.0 * dza * dza / (d * d * d));
    [s0, s1, s2]
}

#[test]
fn scalar_symbol_derivatives() {
    let (alpha, delta) = (0.5, 1.0);
    for a in [0.1, 2.0, 50.0] {
        for xi in symmetric_xi_grid(1e-3, 1e4, 4) {
            let d = symbol_derivatives(&[a], ord(alpha), delta, xi, 2);
            let ex = analytic_symbol(a, alpha, delta, xi);
            for k in 0..3 {
                let err = (d[k][0] - ex[k]).norm() / ex[k].norm();
                assert!(err < 1e-7, "a={a} ξ={xi} k={k}: {err}");
            }
        }
    }
}

#[test]
fn scalar_symbol_bounds() {
    let (tr, form) = diag_form(vec![2.0; 3]);
    let xi = symmetric_xi_grid(1e-3, 1e4, 8);
    let rep = symbol_bounds_check(&form, &tr, ord(0.5), 1.0, &[(0.0, 0.5), (0.5, 1.0)], &xi, 2).unwrap();
    // |arg (iξ+δ)^α| < π/2 keeps |a/((iξ+δ)^α + a)| ≤ 1
    assert!(rep.constants[0] <= 1.0 + 1e-12);
    let direct = xi
        .iter()
        .map(|&x| (2.0 / (c(1.0, x).powf(0.5) + 2.0)).norm())
        .fold(0.0, f64::max);
    assert!(rel(rep.constants[0], direct) < 1e-12);
    assert!(rep.constants.iter().all(|c| c.is_finite() && *c > 0.0));
    assert_eq!(rep.increment_constants, vec![0.0; 3]);
}

#[test]
fn symbol_increments_scale_with_amplitude() {
    let xi = symmetric_xi_grid(1e-2, 1e3, 4);
    let pairs = [(0.0, 0.01), (0.25, 0.5), (0.5, 1.0), (0.9, 0.901)];
    let mut inc = Vec::new();
    for amp in [0.05, 0.1, 0.2] {
        let (tr, form) = fd_form(12, amp, 0.6);
        let rep = symbol_bounds_check(&form, &tr, ord(0.5), 1.0, &pairs, &xi, 2).unwrap();
        assert!(rep.increment_constants.iter().all(|c| c.is_finite() && *c > 0.0));
        inc.push(rep.increment_constants[0]);
    }
    for w in inc.windows(2) {
        let r = w[1] / w[0];
        assert!((r - 2.0).abs() < 0.2, "{inc:?}");
    }
}

#[test]
fn symbol_constants_uniform_in_time() {
    let (tr, form) = fd_form(12, 0.5, 0.6);
    let xi = symmetric_xi_grid(1e-2, 1e3, 4);
    let pairs = |n: usize| -> Vec<(f64, f64)> { (0..n).map(|k| (k as f64 / n as f64, (k + 1) as f64 / n as f64)).collect() };
    let a = symbol_bounds_check(&form, &tr, ord(0.5), 1.0, &pairs(4), &xi, 2).unwrap();
    let b = symbol_bounds_check(&form, &tr, ord(0.5), 1.0, &pairs(8), &xi, 2).unwrap();
    for k in 0..3 {
        assert!(rel(b.constants[k], a.constants[k]) < 0.05, "{:?} {:?}", a.constants, b.constants);
    }
}

#[test]
fn symbol_grid_must_span_decades() {
    let (tr, form) = diag_form(vec![2.0; 3]);
    let narrow = symmetric_xi_grid(1.0, 100.0, 4);
    assert!(symbol_bounds_check(&form, &tr, ord(0.5), 1.0, &[(0.0, 1.0)], &narrow, 2).is_err());
    let one_sided = log_grid(1e-3, 1e3, 4);
    assert!(symbol_bounds_check(&form, &tr, ord(0.5), 1.0, &[(0.0, 1.0)], &one_sided, 2).is_err());
}

/// Geometric spectrum: the supremum over the scalar kernels `aψ_a`.
fn scalar_family() -> (DiscreteTriple, NonAutonomousForm) {
    diag_form(decade_grid(0.1, 1e5, 8))
}

#[test]
fn hormander_scalar_family_tracks_log2_envelope() {
    let (tr, form) = scalar_family();
    let mut pairs = Vec::new();
    for d in decade_grid(1e-3, 1e-1, 2) {
        pairs.push((0.3, 0.3 + d));
        pairs.push((0.3, 0.3 - d));
    }
    let rep = hormander_check(&form, &tr, ord(0.5), &ContourSpec::default(), &pairs).unwrap();
    for r in &rep.rows {
        println!("gap {:.1e} s'-s {:+.1e}: first {:.5} env {:.4} ratio {:.4}", r.gap, r.s_prime - r.s, r.first, r.first_envelope, r.first_ratio);
        assert!(r.first_ratio > 0.8 && r.first_ratio < 1.2, "{r:?}");
        assert!(r.first <= rep.first_bound * 1.02);
        assert_eq!(r.transposed_operator_part, 0.0);
    }
}

#[test]
fn hormander_coarse_gap_is_small() {
    let (tr, form) = scalar_family();
    let rep = hormander_check(&form, &tr, ord(0.5), &ContourSpec::default(), &[(0.2, 0.7), (0.3, 0.55)]).unwrap();
    let fine = hormander_check(&form, &tr, ord(0.5), &ContourSpec::default(), &[(0.3, 0.301)]).unwrap();
    assert_eq!(rep.rows[0].first, 0.0);
    assert_eq!(rep.rows[0].transposed, 0.0);
    assert!(rep.sup_first < 0.5 * fine.sup_first, "{} vs {}", rep.sup_first, fine.sup_first);
}

#[test]
fn hormander_fd_transposed_within_modulus_envelope() {
    let (tr, form) = fd_form(16, 0.5, 0.6);
    let mut pairs = Vec::new();
    for d in decade_grid(1e-3, 1e-1, 2) {
        pairs.push((0.6, 0.6 - d));
    }
    let rep = hormander_check(&form, &tr, ord(0.5), &ContourSpec::default(), &pairs).unwrap();
    let mut ratios = Vec::new();
    for r in &rep.rows {
        ratios.push(r.transposed_operator_part / r.omega_envelope);
        println!(
            "gap {:.1e}: first {:.4} transposed {:.4} (op {:.4}, lag {:.4}) ω-env {:.4}",
            r.gap, r.first, r.transposed, r.transposed_operator_part, r.transposed_lag_part, r.omega_envelope
        );
        assert!(r.transposed <= r.transposed_operator_part + r.transposed_lag_part + 1e-12);
        assert!(r.first <= 2.0 * rep.first_bound);
    }
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    assert!(max.is_finite() && max > 0.0);
    // transposed integrals stay bounded as the gap shrinks
    let t: Vec<f64> = rep.rows.iter().map(|r| r.transposed).collect();
    assert!(t.iter().cloned().fold(0.0, f64::max) < 3.0 * t.last().unwrap().max(t[0]), "{t:?}");
}
