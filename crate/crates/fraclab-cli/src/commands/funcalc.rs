//! `funcalc verify`: contour functional calculus against closed forms, the
//! calculus identities and the decay exponents.

use fraclab::funcalc::{
    decay_fit_windows, decay_windows, log_grid, scalar_phi, scalar_psi, verify_calculus_identities, ContourSpec,
    DecayReport, IdentityReport, OperatorCalculus,
};
use fraclab::mlf::{ml_real, FracOrder, MLParams};
use fraclab::triple::form_to_operators;
use fraclab::Complex64;
use serde::{Deserialize, Serialize};

use super::{Command, Ctx, Outcome};
use crate::config::{check_alpha, check_contour, check_count, check_positive, FormSetup, Profile};
use crate::error::{numeric, CliError};
use crate::report::{Check, Table};

/// Scalar kernels `φ_a`, `ψ_a` against the Mittag-Leffler closed forms
/// `E_α(-a s^α)` and `s^{α-1} E_{α,α}(-a s^α)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivalenceConfig {
    pub alphas: Vec<f64>,
    pub a_values: Vec<f64>,
    pub s_lo: f64,
    pub s_hi: f64,
    pub s_points: usize,
    /// Bound on the largest relative error.
    pub tol: f64,
}

impl Default for EquivalenceConfig {
    fn default() -> Self {
        Self { alphas: vec![0.3, 0.5, 0.7], a_values: vec![0.1, 1.0, 10.0], s_lo: 1e-3, s_hi: 10.0, s_points: 25, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityConfig {
    pub alpha: f64,
    pub operator: FormSetup,
    /// Time at which the form is frozen.
    #[serde(default)]
    pub t: f64,
    /// Points of the derivative check; must span two decades.
    pub s_grid: Vec<f64>,
    /// Laplace probes `[re, im]` with `re > 0`.
    pub probes: Vec<[f64; 2]>,
    pub conv_steps: usize,
    pub laplace_tol: f64,
    pub derivative_tol: f64,
    pub convolution_tol: f64,
}

impl Default for IdentityConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            operator: FormSetup::diagonal(Profile::Values { values: vec![0.5, 1.0, 3.0, 10.0] }, 4),
            t: 0.0,
            s_grid: vec![0.01, 0.5, 2.0],
            probes: vec![[2.0, 0.0], [1.0, 3.0]],
            conv_steps: 2048,
            laplace_tol: 1e-4,
            derivative_tol: 1e-3,
            convolution_tol: 1e-3,
        }
    }
}

/// Log-log slopes of `‖𝒜φ(s)‖`, `‖𝒜ψ(s)‖`, `‖ψ(s)‖` against `-α`, `-1`,
/// `α - 1`, each fitted on the window where its power law is visible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    pub alpha: f64,
    pub operator: FormSetup,
    #[serde(default)]
    pub t: f64,
    pub points: usize,
    pub tol: f64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            operator: FormSetup::diagonal(Profile::Geometric { lo: 1.0, hi: 100.0 }, 24),
            t: 0.0,
            points: 9,
            tol: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuncalcConfig {
    #[serde(default)]
    pub contour: ContourSpec,
    pub equivalence: Option<EquivalenceConfig>,
    pub identities: Option<IdentityConfig>,
    pub decay: Option<DecayConfig>,
}

impl Default for FuncalcConfig {
    fn default() -> Self {
        Self {
            contour: ContourSpec::default(),
            equivalence: Some(EquivalenceConfig::default()),
            identities: Some(IdentityConfig::default()),
            decay: Some(DecayConfig::default()),
        }
    }
}

#[derive(Debug, Serialize)]
struct EquivalenceResult {
    evaluations: usize,
    max_rel_error_phi: f64,
    max_rel_error_psi: f64,
}

#[derive(Debug, Serialize)]
struct DecayResult {
    alpha: f64,
    spectrum: [f64; 2],
    fit: DecayReport,
    expected: [f64; 3],
}

#[derive(Debug, Serialize)]
struct FuncalcResult {
    equivalence: Option<EquivalenceResult>,
    identities: Option<IdentityReport>,
    decay: Option<DecayResult>,
}

fn calculus(alpha: FracOrder, op: &FormSetup, t: f64) -> Result<OperatorCalculus, CliError> {
    let (tr, form) = op.build()?;
    let pair = form_to_operators(&form, &tr, t).map_err(numeric)?;
    OperatorCalculus::new(alpha, &pair, &tr, None).map_err(numeric)
}

fn equivalence(cfg: &EquivalenceConfig, spec: &ContourSpec, out: &mut Outcome) -> Result<EquivalenceResult, CliError> {
    let mut table = Table::new(&["alpha", "a", "s", "phi", "phi_exact", "psi", "psi_exact"]);
    let (mut e_phi, mut e_psi) = (0.0f64, 0.0f64);
    for &al in &cfg.alphas {
        let ord = check_alpha(al)?;
        let p1 = MLParams::new(al, 1.0).map_err(numeric)?;
        let pa = MLParams::new(al, al).map_err(numeric)?;
        for &a in &cfg.a_values {
            for s in log_grid(cfg.s_lo, cfg.s_hi, cfg.s_points) {
                let x = -a * s.powf(al);
                let phi = scalar_phi(ord, a, s, spec).map_err(numeric)?;
                let psi = scalar_psi(ord, a, s, spec).map_err(numeric)?;
                let phi_ex = ml_real(&p1, x).map_err(numeric)?;
                let psi_ex = s.powf(al - 1.0) * ml_real(&pa, x).map_err(numeric)?;
                e_phi = e_phi.max(((phi - phi_ex) / phi_ex).abs());
                e_psi = e_psi.max(((psi - psi_ex) / psi_ex).abs());
                table.push(vec![al, a, s, phi, phi_ex, psi, psi_ex]);
            }
        }
    }
    out.check(Check::at_most("equivalence_phi", e_phi, cfg.tol));
    out.check(Check::at_most("equivalence_psi", e_psi, cfg.tol));
    let res = EquivalenceResult { evaluations: table.rows.len(), max_rel_error_phi: e_phi, max_rel_error_psi: e_psi };
    out.table("equivalence", table);
    Ok(res)
}

fn identities(cfg: &IdentityConfig, spec: &ContourSpec, out: &mut Outcome) -> Result<IdentityReport, CliError> {
    let calc = calculus(check_alpha(cfg.alpha)?, &cfg.operator, cfg.t)?;
    let probes: Vec<Complex64> = cfg.probes.iter().map(|[r, i]| Complex64::new(*r, *i)).collect();
    let rep = verify_calculus_identities(&calc, spec, &cfg.s_grid, &probes, cfg.conv_steps).map_err(numeric)?;
    let lap = rep.laplace.iter().fold(0.0f64, |m, p| m.max(p.residual));
    let der = rep.derivative.iter().fold(0.0f64, |m, p| m.max(p.residual));
    out.check(Check::at_most("laplace_identity", lap, cfg.laplace_tol));
    out.check(Check::at_most("derivative_identity", der, cfg.derivative_tol));
    out.check(Check::at_most("convolution_identity", rep.convolution_residual, cfg.convolution_tol));
    out.check(Check::holds("identities_refine", rep.refines));
    Ok(rep)
}

fn decay(cfg: &DecayConfig, spec: &ContourSpec, out: &mut Outcome) -> Result<DecayResult, CliError> {
    let ord = check_alpha(cfg.alpha)?;
    let calc = calculus(ord, &cfg.operator, cfg.t)?;
    let eig = calc
        .eigenvalues()
        .ok_or_else(|| CliError::Numeric("decay windows need a real symmetric operator".into()))?;
    let (a_min, a_max) = (eig[0], eig[eig.len() - 1]);
    let w = decay_windows(ord, a_min, a_max);
    let (plo, phi) = w
        .a_psi
        .ok_or_else(|| CliError::Numeric(format!("spectrum [{a_min}, {a_max}] too narrow for a ‖𝒜ψ‖ window")))?;
    let fit = decay_fit_windows(
        &calc,
        spec,
        &log_grid(w.a_phi.0, w.a_phi.1, cfg.points),
        &log_grid(plo, phi, cfg.points),
        &log_grid(w.psi.0, w.psi.1, cfg.points),
    )
    .map_err(numeric)?;
    let al = cfg.alpha;
    let expected = [-al, -1.0, al - 1.0];
    out.check(Check::at_most("decay_a_phi", (fit.a_phi.slope - expected[0]).abs(), cfg.tol));
    out.check(Check::at_most("decay_a_psi", (fit.a_psi.slope - expected[1]).abs(), cfg.tol));
    out.check(Check::at_most("decay_psi", (fit.psi.slope - expected[2]).abs(), cfg.tol));
    Ok(DecayResult { alpha: al, spectrum: [a_min, a_max], fit, expected })
}

pub struct FuncalcVerify;

impl Command for FuncalcVerify {
    type Config = FuncalcConfig;

    fn validate(cfg: &FuncalcConfig) -> Result<(), CliError> {
        check_contour(&cfg.contour)?;
        if let Some(e) = &cfg.equivalence {
            for a in &e.alphas {
                check_alpha(*a)?;
            }
            if e.a_values.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
                return Err(CliError::Schema("equivalence.a_values must be finite and >= 0".into()));
            }
            check_positive("equivalence.s_lo", e.s_lo)?;
            check_positive("equivalence.s_hi", e.s_hi)?;
            if e.s_hi <= e.s_lo {
                return Err(CliError::Schema("equivalence.s_hi must exceed s_lo".into()));
            }
            check_count("equivalence.s_points", e.s_points, 2)?;
            check_positive("equivalence.tol", e.tol)?;
        }
        if let Some(i) = &cfg.identities {
            check_alpha(i.alpha)?;
            i.operator.build()?;
            check_count("identities.s_grid length", i.s_grid.len(), 2)?;
            check_count("identities.conv_steps", i.conv_steps, 4)?;
            if i.probes.iter().any(|[r, im]| !(*r > 0.0 && r.is_finite() && im.is_finite())) {
                return Err(CliError::Schema("identities.probes need finite values with re > 0".into()));
            }
            for (n, v) in [("laplace_tol", i.laplace_tol), ("derivative_tol", i.derivative_tol), ("convolution_tol", i.convolution_tol)] {
                check_positive(&format!("identities.{n}"), v)?;
            }
        }
        if let Some(d) = &cfg.decay {
            check_alpha(d.alpha)?;
            d.operator.build()?;
            check_count("decay.points", d.points, 2)?;
            check_positive("decay.tol", d.tol)?;
        }
        Ok(())
    }

    fn compute(cfg: &FuncalcConfig, _ctx: &Ctx) -> Result<Outcome, CliError> {
        let mut out = Outcome::default();
        let spec = &cfg.contour;
        let eq = cfg.equivalence.as_ref().map(|e| equivalence(e, spec, &mut out)).transpose()?;
        let id = cfg.identities.as_ref().map(|i| identities(i, spec, &mut out)).transpose()?;
        let de = cfg.decay.as_ref().map(|d| decay(d, spec, &mut out)).transpose()?;
        out.result = super::to_value(FuncalcResult { equivalence: eq, identities: id, decay: de });
        Ok(out)
    }
}
