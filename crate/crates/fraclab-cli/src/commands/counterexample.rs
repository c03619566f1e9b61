//! `counterexample`: the non-symmetric form without maximal regularity.
//! Conditions on the bad function, Hölder modulus, extension checks and the
//! blow-up sweep, each optional.

use fraclab::counterexample::{
    blowup_demo, build_extended_form, calibrate, condition_checks, extend_numerical_range, extension_check,
    holder_modulus, holder_pairs, BadFunctionSpec, BlowupConfig, BlowupReport, Calibration, ConditionReport,
    Cutoff, ExtensionCheck, HolderReport,
};
use fraclab::linalg::{weighted_inner, weighted_norm, CVec};
use fraclab::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Command, Ctx, Outcome};
use crate::config::{check_alpha, check_count, check_positive};
use crate::error::{numeric, CliError};
use crate::report::{Check, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionsConfig {
    /// Truncations of the geometric triples.
    pub eps: Vec<f64>,
    pub per_decade: usize,
    /// Nodes of the uniform triple for the finite integrals.
    pub n_uniform: usize,
    /// Relative tolerance of every integral against its closed form; the
    /// truncated divergent one is compared only for `ε ≤ 1e-3`.
    pub tol: f64,
}

impl Default for ConditionsConfig {
    fn default() -> Self {
        Self { eps: vec![1e-3, 1e-4, 1e-5, 1e-6], per_decade: 20, n_uniform: 1000, tol: 0.02 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolderConfig {
    pub eps: f64,
    pub per_decade: usize,
    /// Calibration samples in time.
    pub n_t: usize,
    pub t0: f64,
    pub gap_lo: f64,
    pub gap_hi: f64,
    pub points: usize,
    /// Allowed distance of the fitted exponents from `α/2`.
    pub tol: f64,
}

impl Default for HolderConfig {
    fn default() -> Self {
        Self { eps: 1e-5, per_decade: 100, n_t: 40, t0: 0.5, gap_lo: 1e-4, gap_hi: 1e-1, points: 10, tol: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtensionConfig {
    pub eps: f64,
    pub per_decade: usize,
    pub n_t: usize,
    /// Times at which the extended form is built and sampled.
    pub times: Vec<f64>,
    /// Random vectors per time.
    pub samples: usize,
    /// Random `(U, T)` instances for the bare numerical-range extension.
    pub random_instances: usize,
    pub instance_dim: usize,
    pub consistency_tol: f64,
}

impl Default for ExtensionConfig {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            per_decade: 30,
            n_t: 40,
            times: vec![0.02, 0.3, 0.9],
            samples: 10_000,
            random_instances: 10_000,
            instance_dim: 5,
            consistency_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlowupSection {
    pub eps: Vec<f64>,
    pub nodes_per_decade: usize,
    pub n_t: usize,
    /// Relative tolerance of the ratio growth against `ln(1/ε)` scaling.
    pub growth_tol: f64,
    /// Bound on the relative spread of `‖g‖` over the sweep.
    pub drift_tol: f64,
}

impl Default for BlowupSection {
    fn default() -> Self {
        Self { eps: vec![1e-2, 1e-4, 1e-6], nodes_per_decade: 20, n_t: 256, growth_tol: 0.15, drift_tol: 0.05 }
    }
}

fn three_halves() -> f64 {
    1.5
}

/// `u = x^c E_α(i^α t^α x^{-b})` on the triple with weight `x^{-a}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleConfig {
    pub alpha: f64,
    #[serde(default = "three_halves")]
    pub a: f64,
    #[serde(default = "three_halves")]
    pub b: f64,
    #[serde(default = "crate::config::one")]
    pub c: f64,
    /// Source amplitude `ρ`; calibrated for coercivity when absent.
    #[serde(default)]
    pub source_scale: Option<f64>,
    #[serde(default = "crate::config::one")]
    pub tau: f64,
    pub conditions: Option<ConditionsConfig>,
    pub holder: Option<HolderConfig>,
    pub extension: Option<ExtensionConfig>,
    pub blowup: Option<BlowupSection>,
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            a: 1.5,
            b: 1.5,
            c: 1.0,
            source_scale: None,
            tau: 1.0,
            conditions: Some(ConditionsConfig::default()),
            holder: Some(HolderConfig::default()),
            extension: Some(ExtensionConfig::default()),
            blowup: Some(BlowupSection::default()),
        }
    }
}

impl CounterexampleConfig {
    fn spec(&self) -> Result<BadFunctionSpec, CliError> {
        let s = BadFunctionSpec { a: self.a, b: self.b, c: self.c, alpha: check_alpha(self.alpha)?, source_scale: self.source_scale };
        s.validate().map_err(|e| CliError::Schema(e.to_string()))?;
        Ok(s)
    }
}

#[derive(Debug, Serialize)]
struct RandomInstances {
    seed: u64,
    count: usize,
    dim: usize,
    /// `max ‖Ŝ‖ - √2‖T‖`.
    worst_norm_excess: f64,
    /// `min Re(Ŝw, w)/‖w‖²`.
    min_numerical_range: f64,
}

#[derive(Debug, Serialize)]
struct ExtensionResult {
    calibration: Calibration,
    checks: Vec<ExtensionCheck>,
    random: Option<RandomInstances>,
}

#[derive(Debug, Serialize)]
struct CounterexampleResult {
    spec: BadFunctionSpec,
    conditions: Option<ConditionReport>,
    holder: Option<HolderReport>,
    extension: Option<ExtensionResult>,
    blowup: Option<BlowupReport>,
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> CVec {
    CVec::from_fn(n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

/// Random Gram weights, `u` and an image `Tu` reflected so that
/// `Re(Tu, u) ≥ 0`.
fn random_instances(count: usize, dim: usize, seed: u64) -> Result<RandomInstances, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_norm, mut worst_re) = (f64::NEG_INFINITY, f64::INFINITY);
    for _ in 0..count {
        let gram: Vec<f64> = (0..dim).map(|_| rng.random_range(0.1..3.0)).collect();
        let u = random_vec(&mut rng, dim);
        let mut tu = random_vec(&mut rng, dim);
        let nu = weighted_norm(&u, &gram);
        let p = weighted_inner(&tu, &u, &gram).re / (nu * nu);
        if p < 0.0 {
            tu -= &u * Complex64::new(2.0 * p, 0.0);
        }
        let s = extend_numerical_range(&gram, &u, &tu).map_err(numeric)?;
        worst_norm = worst_norm.max(s.norm() - 2f64.sqrt() * s.t_norm);
        worst_re = worst_re.min(s.min_numerical_range_re());
    }
    Ok(RandomInstances { seed, count, dim, worst_norm_excess: worst_norm, min_numerical_range: worst_re })
}

fn conditions(spec: &BadFunctionSpec, cfg: &ConditionsConfig, out: &mut Outcome) -> Result<ConditionReport, CliError> {
    let rep = condition_checks(spec, &cfg.eps, cfg.per_decade, cfg.n_uniform).map_err(numeric)?;
    let rel = |v: f64, w: f64| ((v - w) / w).abs();
    let mut worst_b = 0.0f64;
    for r in rep.rows.iter().filter(|r| r.eps <= 1e-3) {
        worst_b = worst_b.max(rel(r.phi_c_h, r.phi_c_h_exact));
    }
    out.check(Check::at_most("condition_b_truncated", worst_b, cfg.tol));
    let u = &rep.uniform;
    for (name, v, lim) in [
        ("condition_c", u.c_v, rep.limits.c_v),
        ("condition_d_dual", u.phi_c_vp, rep.limits.phi_c_vp),
        ("condition_d_half", u.phi_half_c_h, rep.limits.phi_half_c_h),
    ] {
        if let Some(l) = lim {
            out.check(Check::at_most(name, rel(v, l), cfg.tol));
        }
    }
    let mut t = Table::new(&["eps", "n_x", "phi_c_h", "phi_c_h_exact", "c_v", "phi_c_vp", "phi_half_c_h"]);
    for r in rep.rows.iter().chain(std::iter::once(&rep.uniform)) {
        t.push(vec![r.eps, r.n_x as f64, r.phi_c_h, r.phi_c_h_exact, r.c_v, r.phi_c_vp, r.phi_half_c_h]);
    }
    out.table("conditions", t);
    Ok(rep)
}

fn holder(spec: &BadFunctionSpec, tau: f64, cfg: &HolderConfig, out: &mut Outcome) -> Result<HolderReport, CliError> {
    let tr = spec.geometric_triple(cfg.eps, cfg.per_decade).map_err(numeric)?;
    let cal = calibrate(spec, &tr, tau, cfg.n_t).map_err(numeric)?;
    let rep = holder_modulus(spec, &tr, &cal, &holder_pairs(cfg.t0, cfg.gap_lo, cfg.gap_hi, cfg.points)).map_err(numeric)?;
    out.check(Check::at_most("holder_u_v", (rep.u_v.slope - rep.expected).abs(), cfg.tol));
    if let Some(f) = &rep.form {
        out.check(Check::at_most("holder_form", (f.slope - rep.expected).abs(), cfg.tol));
    }
    let mut t = Table::new(&["s", "t", "gap", "u_v", "w_inv_u_v", "du_vp", "form"]);
    for r in &rep.rows {
        t.push(vec![r.s, r.t, r.gap, r.u_v, r.w_inv_u_v, r.du_vp, r.form.unwrap_or(f64::NAN)]);
    }
    out.table("holder", t);
    Ok(rep)
}

fn extension(
    spec: &BadFunctionSpec,
    tau: f64,
    cfg: &ExtensionConfig,
    ctx: &Ctx,
    out: &mut Outcome,
) -> Result<ExtensionResult, CliError> {
    let tr = spec.geometric_triple(cfg.eps, cfg.per_decade).map_err(numeric)?;
    let cal = calibrate(spec, &tr, tau, cfg.n_t).map_err(numeric)?;
    // per-time builds are independent; results keep the input order
    let jobs = ctx.jobs.clamp(1, cfg.times.len().max(1));
    let chunk = cfg.times.len().div_ceil(jobs).max(1);
    let results: Vec<Result<ExtensionCheck, CliError>> = std::thread::scope(|sc| {
        let handles: Vec<_> = cfg
            .times
            .chunks(chunk)
            .enumerate()
            .map(|(ci, ts)| {
                let (tr, cal) = (&tr, &cal);
                sc.spawn(move || {
                    ts.iter()
                        .enumerate()
                        .map(|(k, &t)| {
                            let st = build_extended_form(spec, tr, t, cal).map_err(numeric)?;
                            let seed = ctx.seed.wrapping_add((ci * chunk + k) as u64);
                            Ok(extension_check(spec, tr, &st, seed, cfg.samples))
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("extension worker panicked")).collect()
    });
    let checks = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let half_gamma = 0.5 * cal.gamma;
    for c in &checks {
        out.check(Check::at_most(format!("consistency_t{}", c.t), c.consistency, cfg.consistency_tol));
        out.check(Check::at_least(format!("coercivity_t{}", c.t), c.min_sampled_re, half_gamma * (1.0 - 1e-10)));
        out.check(Check::at_most(format!("norm_bound_t{}", c.t), c.norm, c.norm_bound));
    }
    let random = if cfg.random_instances > 0 {
        let r = random_instances(cfg.random_instances, cfg.instance_dim, ctx.seed)?;
        out.check(Check::at_most("extension_norm_excess", r.worst_norm_excess, 1e-12));
        out.check(Check::at_least("extension_numerical_range", r.min_numerical_range, -1e-12));
        Some(r)
    } else {
        None
    };
    let mut t = Table::new(&["t", "h", "p", "m1", "m2", "m3", "m4", "coercivity"]);
    for r in &cal.rows {
        t.push(vec![r.t, r.h, r.p, r.m[0], r.m[1], r.m[2], r.m[3], r.coercivity]);
    }
    out.table("calibration", t);
    Ok(ExtensionResult { calibration: cal, checks, random })
}

fn blowup(spec: &BadFunctionSpec, tau: f64, cfg: &BlowupSection, out: &mut Outcome) -> Result<BlowupReport, CliError> {
    let bc = BlowupConfig { tau, eps_list: cfg.eps.clone(), nodes_per_decade: cfg.nodes_per_decade, n_t: cfg.n_t };
    let rep = blowup_demo(spec, &bc, &Cutoff::smoothstep(tau)).map_err(numeric)?;
    out.check(Check::at_most("blowup_growth", (rep.growth - rep.log_ratio).abs() / rep.log_ratio, cfg.growth_tol));
    out.check(Check::at_most("blowup_g_drift", rep.g_drift, cfg.drift_tol));
    let mut t = Table::new(&["eps", "n_x", "g_norm", "dw_norm_sq", "ratio", "under_resolved"]);
    for r in &rep.rows {
        t.push(vec![r.eps, r.n_x as f64, r.g_norm, r.dw_norm_sq, r.ratio, r.under_resolved]);
    }
    out.table("blowup", t);
    Ok(rep)
}

fn check_eps(name: &str, e: f64) -> Result<(), CliError> {
    if e > 0.0 && e < 1.0 {
        Ok(())
    } else {
        Err(CliError::Schema(format!("{name} must lie in (0,1), got {e}")))
    }
}

pub struct Counterexample;

impl Command for Counterexample {
    type Config = CounterexampleConfig;

    fn validate(cfg: &CounterexampleConfig) -> Result<(), CliError> {
        cfg.spec()?;
        check_positive("tau", cfg.tau)?;
        if let Some(c) = &cfg.conditions {
            check_count("conditions.eps length", c.eps.len(), 1)?;
            for e in &c.eps {
                check_eps("conditions.eps", *e)?;
            }
            check_count("conditions.per_decade", c.per_decade, 2)?;
            check_count("conditions.n_uniform", c.n_uniform, 2)?;
            check_positive("conditions.tol", c.tol)?;
        }
        if let Some(h) = &cfg.holder {
            check_eps("holder.eps", h.eps)?;
            check_count("holder.per_decade", h.per_decade, 2)?;
            check_count("holder.n_t", h.n_t, 2)?;
            check_count("holder.points", h.points, 2)?;
            check_positive("holder.gap_lo", h.gap_lo)?;
            if !(h.gap_hi > h.gap_lo && h.t0 > 0.0 && h.t0 + h.gap_hi <= cfg.tau) {
                return Err(CliError::Schema("holder pairs must satisfy 0 < t0 < t0 + gap_hi <= tau".into()));
            }
            check_positive("holder.tol", h.tol)?;
        }
        if let Some(x) = &cfg.extension {
            check_eps("extension.eps", x.eps)?;
            check_count("extension.per_decade", x.per_decade, 2)?;
            check_count("extension.n_t", x.n_t, 2)?;
            check_count("extension.instance_dim", x.instance_dim, 2)?;
            if x.times.iter().any(|t| !(*t > 0.0 && *t <= cfg.tau)) {
                return Err(CliError::Schema("extension.times must lie in (0, tau]".into()));
            }
            check_positive("extension.consistency_tol", x.consistency_tol)?;
        }
        if let Some(b) = &cfg.blowup {
            check_count("blowup.eps length", b.eps.len(), 2)?;
            for e in &b.eps {
                check_eps("blowup.eps", *e)?;
            }
            check_count("blowup.nodes_per_decade", b.nodes_per_decade, 2)?;
            check_count("blowup.n_t", b.n_t, 4)?;
            check_positive("blowup.growth_tol", b.growth_tol)?;
            check_positive("blowup.drift_tol", b.drift_tol)?;
        }
        Ok(())
    }

    fn compute(cfg: &CounterexampleConfig, ctx: &Ctx) -> Result<Outcome, CliError> {
        let spec = cfg.spec()?;
        let mut out = Outcome::default();
        let conditions = cfg.conditions.as_ref().map(|c| conditions(&spec, c, &mut out)).transpose()?;
        let holder = cfg.holder.as_ref().map(|h| holder(&spec, cfg.tau, h, &mut out)).transpose()?;
        let extension = cfg.extension.as_ref().map(|x| extension(&spec, cfg.tau, x, ctx, &mut out)).transpose()?;
        let blowup = cfg.blowup.as_ref().map(|b| blowup(&spec, cfg.tau, b, &mut out)).transpose()?;
        out.result = super::to_value(CounterexampleResult { spec, conditions, holder, extension, blowup });
        Ok(out)
    }
}
