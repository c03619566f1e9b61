//! End-to-end acceptance suite. Every criterion runs at its stated tolerance
//! and prints one PASS/FAIL line; the test fails if any criterion does.
//!
//! Run with `cargo test -p fraclab-cli --test acceptance -- --nocapture` to
//! see the table.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use fraclab::counterexample::{
    blowup_demo, build_extended_form, calibrate, condition_checks, extend_numerical_range, extension_check,
    holder_modulus, holder_pairs, BadFunctionSpec, BlowupConfig, Cutoff,
};
use fraclab::fracops::{lp_time_norm, SpaceTag, TimeGrid, Trajectory};
use fraclab::funcalc::{
    decay_fit_windows, decay_windows, log_grid, scalar_phi, scalar_psi, verify_calculus_identities, ContourSpec,
    OperatorCalculus,
};
use fraclab::linalg::{c, weighted_inner, weighted_norm, CVec};
use fraclab::mlf::{ml_real, FracOrder, MLParams};
use fraclab::reglab::{decade_grid, dini_check_a1, dini_check_a2, hormander_check, initial_value_norm, DiniModulus};
use fraclab::triple::{
    build_weighted_triple, form_to_operators, resolvent_bound_check, sector_samples, DiscreteTriple,
    NonAutonomousForm,
};
use fraclab::volterra::{
    assemble_shifted_system, closed_form_autonomous, contraction_estimate, l1_direct_stepper, neumann_solve,
    regularity_norms, select_delta, ProblemSpec,
};
use fraclab::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

/// Name, check and optional runtime budget.
type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn ord(a: f64) -> FracOrder {
    FracOrder::new(a).unwrap()
}

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn power(beta: f64) -> DiniModulus {
    DiniModulus::power(beta, 1.0).unwrap()
}

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn within_budget(out: Outcome, took: Duration, budget: Option<Duration>) -> Outcome {
    match (out, budget) {
        (Ok(m), Some(b)) if took > b => Err(format!("{m}; runtime {took:.1?} over budget {b:?}")),
        (o, _) => o,
    }
}

fn diagonal(vals: Vec<f64>) -> (DiscreteTriple, NonAutonomousForm) {
    let tr = build_weighted_triple(vals.len(), |_| 1.0).unwrap();
    let f = NonAutonomousForm::multiplication(&tr, vals, 0.0, DiniModulus::zero(), 1.0).unwrap();
    (tr, f)
}

fn fd(n: usize, amp: f64, omega: DiniModulus) -> (DiscreteTriple, NonAutonomousForm) {
    let tr = build_weighted_triple(n, |_| 1.0).unwrap();
    let f = NonAutonomousForm::finite_difference(&tr, amp, omega, 1.0).unwrap();
    (tr, f)
}

fn calc(alpha: f64, (tr, form): &(DiscreteTriple, NonAutonomousForm), t: f64) -> OperatorCalculus {
    let p = form_to_operators(form, tr, t).unwrap();
    OperatorCalculus::new(ord(alpha), &p, tr, None).unwrap()
}

fn sine_source(nodes: &[f64], grid: TimeGrid) -> Trajectory {
    Trajectory::from_fn(grid, SpaceTag::H, |t| {
        CVec::from_iterator(nodes.len(), nodes.iter().map(|x| re((1.0 + t) * (3.0 * x).sin())))
    })
    .unwrap()
}

fn fd_problem(alpha: f64, nx: usize, nt: usize, amp: f64, omega: DiniModulus) -> ProblemSpec {
    let (tr, form) = fd(nx, amp, omega);
    let grid = TimeGrid::uniform(1.0, nt).unwrap();
    let f = sine_source(&tr.nodes, grid);
    ProblemSpec::new(ord(alpha), tr, form, f, CVec::zeros(nx), 2.0).unwrap()
}

fn h_lp(tr: &DiscreteTriple, p: f64, x: &Trajectory) -> f64 {
    let g = tr.gram_h();
    lp_time_norm(p, x, |v| weighted_norm(v, &g)).unwrap()
}

fn scalar_equivalence() -> Outcome {
    let spec = ContourSpec::default();
    let mut worst = 0.0f64;
    let mut n = 0;
    for alpha in [0.3, 0.5, 0.7] {
        let (p1, pa) = (MLParams::new(alpha, 1.0).unwrap(), MLParams::new(alpha, alpha).unwrap());
        for a in [0.1, 1.0, 10.0] {
            for s in log_grid(1e-3, 10.0, 25) {
                let x = -a * s.powf(alpha);
                let phi = scalar_phi(ord(alpha), a, s, &spec).map_err(|e| e.to_string())?;
                let psi = scalar_psi(ord(alpha), a, s, &spec).map_err(|e| e.to_string())?;
                let phi_ex = ml_real(&p1, x).unwrap();
                let psi_ex = s.powf(alpha - 1.0) * ml_real(&pa, x).unwrap();
                worst = worst.max(rel(phi, phi_ex)).max(rel(psi, psi_ex));
                n += 1;
            }
        }
    }
    ensure(worst <= 1e-6, format!("max relative error {worst:.2e} over {n} (α, a, s) triples"))
}

fn identity_suite() -> Outcome {
    let cl = calc(0.5, &diagonal(vec![0.5, 1.0, 3.0, 10.0]), 0.0);
    let rep = verify_calculus_identities(&cl, &ContourSpec::default(), &[0.01, 0.5, 2.0], &[c(2.0, 0.0), c(1.0, 3.0)], 2048)
        .map_err(|e| e.to_string())?;
    let lap = rep.laplace.iter().fold(0.0f64, |m, p| m.max(p.residual));
    let der = rep.derivative.iter().fold(0.0f64, |m, p| m.max(p.residual));
    let conv = rep.convolution_residual;
    ensure(
        lap <= 1e-4 && der <= 1e-3 && conv <= 1e-3 && rep.refines,
        format!("laplace {lap:.1e}, derivative {der:.1e}, convolution {conv:.1e}, refines under halving: {}", rep.refines),
    )
}

fn decay_exponents() -> Outcome {
    let spec = ContourSpec::default();
    let spread: Vec<f64> = (0..24).map(|k| 100f64.powf(k as f64 / 23.0)).collect();
    let families = [("diagonal", diagonal(spread), 0.0), ("fd", fd(24, 0.5, power(0.6)), 0.5)];
    let mut worst = 0.0f64;
    let mut fits = 0;
    for (name, fam, t) in &families {
        for alpha in [0.3, 0.5, 0.7] {
            let cl = calc(alpha, fam, *t);
            let eig = cl.eigenvalues().ok_or(format!("{name}: no real spectrum"))?;
            let w = decay_windows(ord(alpha), eig[0], eig[eig.len() - 1]);
            let (lo, hi) = w.a_psi.ok_or(format!("{name} α={alpha}: spectrum too narrow"))?;
            let rep = decay_fit_windows(
                &cl,
                &spec,
                &log_grid(w.a_phi.0, w.a_phi.1, 9),
                &log_grid(lo, hi, 9),
                &log_grid(w.psi.0, w.psi.1, 9),
            )
            .map_err(|e| format!("{name} α={alpha}: {e}"))?;
            for (got, want) in [(rep.a_phi.slope, -alpha), (rep.a_psi.slope, -1.0), (rep.psi.slope, alpha - 1.0)] {
                worst = worst.max((got - want).abs());
                fits += 1;
            }
        }
    }
    ensure(worst <= 0.1, format!("largest slope deviation {worst:.3} over {fits} fits (diagonal and FD, α ∈ {{0.3, 0.5, 0.7}})"))
}

fn resolvent_suite() -> Outcome {
    let theta = 0.75 * PI;
    let coarse = sector_samples(theta, 1e-2, 1e4, 20, 9);
    let fine = sector_samples(theta, 1e-2, 1e4, 40, 17);
    let mut worst = 0.0f64;
    let mut sups = Vec::new();
    for (tr, form) in [diagonal(vec![0.5, 2.0, 7.0, 40.0]), fd(32, 0.5, power(0.6))] {
        for t in [0.0, 0.5, 1.0] {
            let p = form_to_operators(&form, &tr, t).unwrap();
            let a = resolvent_bound_check(&p, &tr, theta, &coarse).map_err(|e| e.to_string())?;
            let b = resolvent_bound_check(&p, &tr, theta, &fine).map_err(|e| e.to_string())?;
            for (x, y) in [(a.sup_h, b.sup_h), (a.sup_vp, b.sup_vp), (a.sup_h_to_v, b.sup_h_to_v)] {
                if !(x.is_finite() && y.is_finite()) {
                    return Err(format!("non-finite supremum {x} / {y}"));
                }
                worst = worst.max(rel(x, y));
            }
            sups.push(b.sup_h.max(b.sup_vp));
        }
    }
    let top = sups.iter().cloned().fold(0.0, f64::max);
    ensure(
        worst <= 0.05,
        format!("max drift {:.2}% under doubling ({} → {} samples), largest sup {top:.3}", 100.0 * worst, coarse.len(), fine.len()),
    )
}

fn solver_triangle() -> Outcome {
    let spec = ContourSpec::default();
    // autonomous: FD with a frozen conductivity and a diagonal spread
    let mut auto_err = 0.0f64;
    {
        let prob = fd_problem(0.5, 200, 1024, 0.0, DiniModulus::zero());
        let sol = neumann_solve(&assemble_shifted_system(&prob, 0.0, &spec).map_err(|e| e.to_string())?, 1e-12, 10)
            .map_err(|e| e.to_string())?;
        let pair = form_to_operators(&prob.form, &prob.triple, 0.0).unwrap();
        let exact = closed_form_autonomous(prob.alpha, &pair, &prob.triple, prob.grid(), &prob.u0, &prob.f)
            .map_err(|e| e.to_string())?;
        auto_err = auto_err.max(sol.u.max_abs_diff(&exact));
    }
    {
        let (tr, form) = diagonal(log_grid(0.1, 1e3, 200));
        let grid = TimeGrid::uniform(1.0, 1024).unwrap();
        let f = sine_source(&tr.nodes, grid);
        let u0 = CVec::from_iterator(200, tr.nodes.iter().map(|x| re((PI * x).sin())));
        let prob = ProblemSpec::new(ord(0.5), tr, form, f, u0, 2.0).unwrap();
        let sol = neumann_solve(&assemble_shifted_system(&prob, 0.0, &spec).map_err(|e| e.to_string())?, 1e-12, 10)
            .map_err(|e| e.to_string())?;
        let pair = form_to_operators(&prob.form, &prob.triple, 0.0).unwrap();
        let exact = closed_form_autonomous(prob.alpha, &pair, &prob.triple, prob.grid(), &prob.u0, &prob.f)
            .map_err(|e| e.to_string())?;
        auto_err = auto_err.max(sol.u.max_abs_diff(&exact));
    }
    let mut disc = Vec::new();
    for (nx, nt) in [(8, 32), (16, 64), (32, 128)] {
        let prob = fd_problem(0.5, nx, nt, 0.5, power(0.6));
        let delta = select_delta(&prob, &spec, 0.5).map_err(|e| e.to_string())?;
        let sol = neumann_solve(&assemble_shifted_system(&prob, delta, &spec).unwrap(), 1e-12, 500).map_err(|e| e.to_string())?;
        let l1 = l1_direct_stepper(&prob).map_err(|e| e.to_string())?;
        let d = l1.combine(re(1.0), &sol.u, re(-1.0)).unwrap();
        disc.push(h_lp(&prob.triple, 2.0, &d) / h_lp(&prob.triple, 2.0, &sol.u));
    }
    let decreasing = disc.windows(2).all(|w| w[1] < w[0]);
    ensure(
        auto_err <= 5e-3 && decreasing,
        format!("closed-form max error {auto_err:.2e} at (200, 1024); L1 discrepancy {disc:?}"),
    )
}

fn contraction() -> Outcome {
    let spec = ContourSpec::default();
    let prob = fd_problem(0.5, 16, 32, 0.5, power(0.6));
    let delta = select_delta(&prob, &spec, 0.5).map_err(|e| e.to_string())?;
    let q_sel = contraction_estimate(&prob, &spec, delta).map_err(|e| e.to_string())?.q;
    let qs: Vec<f64> = (0..8).map(|k| contraction_estimate(&prob, &spec, 2f64.powi(k)).unwrap().q).collect();
    let decreasing = qs.windows(2).all(|w| w[1] < w[0]);
    ensure(
        q_sel < 0.5 && decreasing,
        format!("q = {q_sel:.3e} at δ = {delta}; δ = 1..128 gives q from {:.3e} to {:.3e}, strictly decreasing: {decreasing}", qs[0], qs[7]),
    )
}

/// `f(t,x) = Σ_k (a_k + b_k t) sin(kπx)` with uniform random coefficients.
fn random_source(rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    (0..4).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

fn a_priori_estimate() -> Outcome {
    let spec = ContourSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(fraclab_cli::DEFAULT_SEED);
    let sources: Vec<Vec<(f64, f64)>> = (0..20).map(|_| random_source(&mut rng)).collect();
    let mut lines = Vec::new();
    let mut ok = true;
    for p in [2.0, 4.0] {
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for (nx, nt) in [(8, 32), (16, 64), (32, 128)] {
            let base = fd_problem(0.5, nx, nt, 0.5, power(0.6));
            let nodes = base.triple.nodes.clone();
            // smooth u0 lies in every interpolation class of the FD operator
            let u0 = CVec::from_iterator(nx, nodes.iter().map(|x| re((PI * x).sin())));
            let pair0 = form_to_operators(&base.form, &base.triple, 0.0).unwrap();
            let u0_norm = initial_value_norm(&pair0, &base.triple, ord(0.5), p, &u0).map_err(|e| e.to_string())?;
            let delta = select_delta(&base, &spec, 0.5).map_err(|e| e.to_string())?;
            for coef in &sources {
                let f = Trajectory::from_fn(base.grid().clone(), SpaceTag::H, |t| {
                    CVec::from_iterator(
                        nx,
                        nodes.iter().map(|x| {
                            re(coef.iter().enumerate().map(|(k, (a, b))| (a + b * t) * ((k + 1) as f64 * PI * x).sin()).sum())
                        }),
                    )
                })
                .unwrap();
                let prob = ProblemSpec::new(ord(0.5), base.triple.clone(), base.form.clone(), f, u0.clone(), p).unwrap();
                let sol = neumann_solve(&assemble_shifted_system(&prob, delta, &spec).unwrap(), 1e-12, 500)
                    .map_err(|e| e.to_string())?;
                let ce = regularity_norms(&prob, &sol).unwrap().c_est(u0_norm);
                lo = lo.min(ce);
                hi = hi.max(ce);
            }
        }
        ok &= hi.is_finite() && hi <= 2.0 * lo;
        lines.push(format!("p={p}: C_est in [{lo:.3}, {hi:.3}] (drift {:.2}×)", hi / lo));
    }
    ensure(ok, format!("{} over 20 sources × 3 levels", lines.join("; ")))
}

fn dini_checkers() -> Outcome {
    let mut worst = 0.0f64;
    let mut verdicts = true;
    for alpha in [0.3, 0.5, 0.7] {
        for extra in [0.1, 0.25, 0.6] {
            let b = alpha / 2.0 + extra;
            let r = dini_check_a1(&power(b), ord(alpha), 1.0).map_err(|e| e.to_string())?;
            verdicts &= r.finite;
            worst = worst.max(rel(r.value, 1.0 / extra));
        }
        verdicts &= !dini_check_a1(&power(alpha / 2.0), ord(alpha), 1.0).unwrap().finite;
    }
    for (alpha, p) in [(0.7, 2.0), (0.5, 4.0), (0.7, 3.0)] {
        for b in [0.3, 0.45, 0.8] {
            let e = p * (b - alpha);
            let r = dini_check_a2(&power(b), ord(alpha), p, 1.0).map_err(|e| e.to_string())?;
            verdicts &= r.finite == (e > -1.0);
            if e > -1.0 {
                worst = worst.max(rel(r.value, 1.0 / (1.0 + e)));
            }
        }
        verdicts &= !dini_check_a2(&power(alpha - 1.0 / p), ord(alpha), p, 1.0).unwrap().finite;
    }
    ensure(worst <= 1e-6 && verdicts, format!("max relative error {worst:.1e}; boundary verdicts correct: {verdicts}"))
}

fn hormander() -> Outcome {
    let (tr, form) = diagonal(decade_grid(0.1, 1e5, 8));
    let mut pairs = Vec::new();
    for d in decade_grid(1e-3, 1e-1, 2) {
        pairs.push((0.3, 0.3 + d));
        pairs.push((0.3, 0.3 - d));
    }
    let rep = hormander_check(&form, &tr, ord(0.5), &ContourSpec::default(), &pairs).map_err(|e| e.to_string())?;
    let (lo, hi) = rep.rows.iter().fold((f64::INFINITY, 0.0f64), |(l, h), r| (l.min(r.first_ratio), h.max(r.first_ratio)));
    ensure(lo >= 0.8 && hi <= 1.2, format!("integral / envelope in [{lo:.3}, {hi:.3}] over {} gaps", rep.rows.len()))
}

fn counterexample_conditions() -> Outcome {
    let rep = condition_checks(&BadFunctionSpec::new(ord(0.5)), &[1e-3, 1e-4, 1e-5, 1e-6], 20, 1000)
        .map_err(|e| e.to_string())?;
    let b = rep.rows.iter().filter(|r| r.eps <= 1e-3).map(|r| rel(r.phi_c_h, (1.0 / r.eps).ln())).fold(0.0, f64::max);
    let u = rep.uniform;
    let cd = [u.c_v, u.phi_c_vp, u.phi_half_c_h].iter().map(|v| rel(*v, 2.0 / 3.0)).fold(0.0, f64::max);
    ensure(
        u.n_x == 1000 && b <= 0.02 && cd <= 0.02,
        format!("(C),(D) max deviation from 2/3 {:.2}%; (B) max deviation from ln(1/ε) {:.2}%", 100.0 * cd, 100.0 * b),
    )
}

fn holder_sharpness() -> Outcome {
    let mut slopes = Vec::new();
    let mut ok = true;
    for a in [0.4, 0.5, 0.6] {
        let sp = BadFunctionSpec::new(ord(a));
        let tr = sp.geometric_triple(1e-5, 100).unwrap();
        let cal = calibrate(&sp, &tr, 1.0, 40).map_err(|e| e.to_string())?;
        let rep = holder_modulus(&sp, &tr, &cal, &holder_pairs(0.5, 1e-4, 1e-1, 10)).map_err(|e| e.to_string())?;
        ok &= (rep.u_v.slope - a / 2.0).abs() <= 0.05;
        slopes.push(format!("α={a}: {:.3} (α/2 = {})", rep.u_v.slope, a / 2.0));
    }
    ensure(ok, slopes.join(", "))
}

fn extension_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(fraclab_cli::DEFAULT_SEED);
    let (mut worst_norm, mut worst_re) = (f64::NEG_INFINITY, f64::INFINITY);
    for _ in 0..10_000 {
        let n = 5;
        let gram: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..3.0)).collect();
        let rv = |rng: &mut ChaCha8Rng| CVec::from_fn(n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let u = rv(&mut rng);
        let mut tu = rv(&mut rng);
        let nu = weighted_norm(&u, &gram);
        let p = weighted_inner(&tu, &u, &gram).re / (nu * nu);
        if p < 0.0 {
            tu -= &u * c(2.0 * p, 0.0);
        }
        let s = extend_numerical_range(&gram, &u, &tu).map_err(|e| e.to_string())?;
        worst_norm = worst_norm.max(s.norm() - 2f64.sqrt() * s.t_norm);
        worst_re = worst_re.min(s.min_numerical_range_re());
    }
    let sp = BadFunctionSpec::new(ord(0.5));
    let tr = sp.geometric_triple(1e-4, 30).unwrap();
    let cal = calibrate(&sp, &tr, 1.0, 40).map_err(|e| e.to_string())?;
    let mut form_ok = true;
    let mut worst_coerc = f64::INFINITY;
    for (k, t) in [0.02, 0.3, 0.9].into_iter().enumerate() {
        let st = build_extended_form(&sp, &tr, t, &cal).map_err(|e| e.to_string())?;
        let chk = extension_check(&sp, &tr, &st, fraclab_cli::DEFAULT_SEED + k as u64, 10_000);
        let floor = 0.5 * cal.gamma * (1.0 - 1e-10);
        form_ok &= chk.min_sampled_re >= floor && chk.coercivity >= floor && chk.norm <= chk.norm_bound && chk.consistency <= 1e-10;
        worst_coerc = worst_coerc.min(chk.min_sampled_re / (0.5 * cal.gamma));
    }
    ensure(
        worst_norm <= 1e-12 && worst_re >= -1e-12 && form_ok,
        format!(
            "10⁴ instances: max ‖Ŝ‖−√2‖T‖ = {worst_norm:.2e}, min Re(Ŝw,w) = {worst_re:.2e}; form: min sampled Re a / (γ/2) = {worst_coerc:.4}, bounds respected: {form_ok}"
        ),
    )
}

fn blowup() -> Outcome {
    let cfg = BlowupConfig { eps_list: vec![1e-2, 1e-4, 1e-6], ..BlowupConfig::default() };
    let rep = blowup_demo(&BadFunctionSpec::new(ord(0.5)), &cfg, &Cutoff::smoothstep(cfg.tau)).map_err(|e| e.to_string())?;
    ensure(
        rel(rep.growth, 3.0) <= 0.15,
        format!("ratio growth ε=1e-2 → 1e-6: {:.3} (target 3 ± 15%), ‖g‖ drift {:.1e}", rep.growth, rep.g_drift),
    )
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_fraclab");
    let mut compared = 0;
    for cmd in [&["solve"][..], &["counterexample"], &["ml", "eval"]] {
        let mut snaps = Vec::new();
        for (k, jobs) in ["1", "1", "2"].iter().enumerate() {
            let out = tmp.path().join(format!("{}_{k}", cmd.join("_")));
            let st = Command::new(bin)
                .args(cmd)
                .args(["--out", out.to_str().unwrap(), "--jobs", jobs, "--seed", "12345"])
                .status()
                .map_err(|e| e.to_string())?;
            if st.code() != Some(0) {
                return Err(format!("{} exited with {st}", cmd.join(" ")));
            }
            snaps.push(snapshot(&out));
        }
        if snaps[0] != snaps[1] || snaps[0] != snaps[2] {
            return Err(format!("{} output differs between runs", cmd.join(" ")));
        }
        compared += snaps[0].len();
    }
    Ok(format!("{compared} files byte-identical over repeated runs and job counts"))
}

#[test]
fn acceptance() {
    let min = |m: u64| Some(Duration::from_secs(60 * m));
    let criteria: [Criterion; 14] = [
        ("scalar functional calculus equivalence", scalar_equivalence, min(1)),
        ("calculus identity suite", identity_suite, None),
        ("decay exponents", decay_exponents, None),
        ("resolvent bounds", resolvent_suite, None),
        ("solver oracle triangle", solver_triangle, min(10)),
        ("contraction of the shifted system", contraction, None),
        ("a-priori estimate", a_priori_estimate, None),
        ("Dini checkers", dini_checkers, None),
        ("Hörmander envelope", hormander, None),
        ("counterexample conditions", counterexample_conditions, None),
        ("Hölder sharpness", holder_sharpness, None),
        ("extension properties", extension_properties, None),
        ("blow-up demonstration", blowup, min(5)),
        ("determinism", determinism, None),
    ];
    let mut failed = Vec::new();
    for (i, (name, f, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let out = f();
        let took = start.elapsed();
        let out = within_budget(out, took, budget);
        let (tag, msg) = match &out {
            Ok(m) => ("PASS", m),
            Err(m) => ("FAIL", m),
        };
        println!("{tag} {:>2} {name} [{took:.1?}]: {msg}", i + 1);
        if out.is_err() {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
