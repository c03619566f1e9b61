//! `ml eval`: Mittag-Leffler values at given points and along the
//! oscillatory ray `i^α μ`.

use fraclab::mlf::{mittag_leffler_branch, mittag_leffler_forced, ml_oscillatory, Branch, MLParams};
use fraclab::Complex64;
use serde::{Deserialize, Serialize};

use super::{Command, Ctx, Outcome};
use crate::config::one;
use crate::error::{numeric, CliError};
use crate::report::{Check, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlEvalConfig {
    /// Order in `(0, 1]`; `α = 1` is the exponential.
    pub alpha: f64,
    #[serde(default = "one")]
    pub beta: f64,
    /// Complex arguments `[re, im]`.
    #[serde(default)]
    pub points: Vec<[f64; 2]>,
    /// `μ ≥ 0` for `E_{α,β}(i^α μ)`.
    #[serde(default)]
    pub oscillatory: Vec<f64>,
    /// Re-evaluate each point by an independent branch and assert the
    /// relative deviation stays below this tolerance.
    #[serde(default)]
    pub cross_check_tol: Option<f64>,
}

impl Default for MlEvalConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 1.0,
            points: vec![[-3.0, 0.0], [-1.0, 0.0], [0.5, 0.0], [1.0, 1.0], [0.0, 3.0], [-10.0, 0.0], [-40.0, 0.0]],
            oscillatory: vec![0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0],
            cross_check_tol: Some(1e-8),
        }
    }
}

#[derive(Debug, Serialize)]
struct PointValue {
    z: [f64; 2],
    value: [f64; 2],
    branch: Branch,
    /// Branch used for the cross-check, if any.
    check_branch: Option<Branch>,
    deviation: Option<f64>,
}

#[derive(Debug, Serialize)]
struct RayValue {
    mu: f64,
    value: [f64; 2],
    modulus: f64,
}

#[derive(Debug, Serialize)]
struct MlEvalResult {
    alpha: f64,
    beta: f64,
    points: Vec<PointValue>,
    oscillatory: Vec<RayValue>,
    max_deviation: Option<f64>,
}

/// Largest `|z|^{1/α}` at which the power series is a usable reference.
const SERIES_REFERENCE_X: f64 = 10.0;

pub struct MlEval;

impl Command for MlEval {
    type Config = MlEvalConfig;

    fn validate(cfg: &MlEvalConfig) -> Result<(), CliError> {
        MLParams::new(cfg.alpha, cfg.beta).map_err(|e| CliError::Schema(format!("alpha/beta: {e}")))?;
        if cfg.points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(CliError::Schema("points must be finite".into()));
        }
        if cfg.oscillatory.iter().any(|m| !(*m >= 0.0 && m.is_finite())) {
            return Err(CliError::Schema("oscillatory arguments must be finite and >= 0".into()));
        }
        if let Some(t) = cfg.cross_check_tol {
            crate::config::check_positive("cross_check_tol", t)?;
        }
        Ok(())
    }

    fn compute(cfg: &MlEvalConfig, _ctx: &Ctx) -> Result<Outcome, CliError> {
        let p = MLParams::new(cfg.alpha, cfg.beta).map_err(numeric)?;
        let mut points = Vec::new();
        let mut table = Table::new(&["z_re", "z_im", "re", "im"]);
        let mut max_dev: Option<f64> = None;
        for &[re, im] in &cfg.points {
            let z = Complex64::new(re, im);
            let (v, branch) = mittag_leffler_branch(&p, z).map_err(numeric)?;
            let reference = if cfg.cross_check_tol.is_none() || z.norm() == 0.0 {
                None
            } else if branch != Branch::Integral {
                Some(Branch::Integral)
            } else if z.norm().powf(1.0 / cfg.alpha) <= SERIES_REFERENCE_X {
                Some(Branch::Series)
            } else {
                None
            };
            let deviation = match reference {
                Some(b) => {
                    let w = mittag_leffler_forced(&p, z, b).map_err(numeric)?;
                    let d = (v - w).norm() / v.norm().max(f64::MIN_POSITIVE);
                    max_dev = Some(max_dev.unwrap_or(0.0).max(d));
                    Some(d)
                }
                None => None,
            };
            table.push(vec![re, im, v.re, v.im]);
            points.push(PointValue { z: [re, im], value: [v.re, v.im], branch, check_branch: reference, deviation });
        }
        let mut ray = Vec::new();
        let mut ray_table = Table::new(&["mu", "re", "im", "abs"]);
        for &mu in &cfg.oscillatory {
            let v = ml_oscillatory(&p, mu).map_err(numeric)?;
            ray_table.push(vec![mu, v.re, v.im, v.norm()]);
            ray.push(RayValue { mu, value: [v.re, v.im], modulus: v.norm() });
        }
        let mut out = Outcome::new(MlEvalResult {
            alpha: cfg.alpha,
            beta: cfg.beta,
            points,
            oscillatory: ray,
            max_deviation: max_dev,
        });
        if let (Some(tol), Some(d)) = (cfg.cross_check_tol, max_dev) {
            out.check(Check::at_most("branch_cross_check", d, tol));
        }
        if !cfg.points.is_empty() {
            out.table("points", table);
        }
        if !cfg.oscillatory.is_empty() {
            out.table("oscillatory", ray_table);
        }
        Ok(out)
    }
}
