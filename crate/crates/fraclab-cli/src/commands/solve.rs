//! `solve`: Neumann-series solution of the shifted Volterra system, with the
//! autonomous closed form and the L1 time stepper as references.

use fraclab::fracops::lp_time_norm;
use fraclab::funcalc::ContourSpec;
use fraclab::linalg::weighted_norm;
use fraclab::reglab::initial_value_norm;
use fraclab::triple::form_to_operators;
use fraclab::volterra::{
    assemble_shifted_system, closed_form_autonomous, l1_direct_stepper, neumann_solve, regularity_norms,
    select_delta, RegularityNorms,
};
use fraclab::Complex64;
use serde::{Deserialize, Serialize};

use super::{Command, Ctx, Outcome};
use crate::config::{check_contour, check_count, check_positive, ProblemConfig};
use crate::error::{numeric, CliError};
use crate::report::{Check, Table};

fn half() -> f64 {
    0.5
}

fn default_tol() -> f64 {
    1e-12
}

fn default_max_iter() -> usize {
    500
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub contour: ContourSpec,
    /// Shift `δ`; chosen so that `q ≤ target_q` when absent.
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default = "half")]
    pub target_q: f64,
    /// Relative increment at which the Neumann iteration stops.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Bound on the largest nodal error against the closed form; asserted
    /// for autonomous problems only.
    #[serde(default)]
    pub closed_form_tol: Option<f64>,
    /// Bound on the relative `L_p(0,τ;H)` gap to the L1 stepper.
    #[serde(default)]
    pub l1_tol: Option<f64>,
    #[serde(default = "yes")]
    pub write_trajectory: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            problem: ProblemConfig::default(),
            contour: ContourSpec::default(),
            delta: None,
            target_q: 0.5,
            tol: 1e-12,
            max_iter: 500,
            closed_form_tol: Some(5e-3),
            l1_tol: None,
            write_trajectory: true,
        }
    }
}

#[derive(Debug, Serialize)]
struct SolveResult {
    autonomous: bool,
    n_x: usize,
    n_t: usize,
    delta: f64,
    q: f64,
    kernel_constant: f64,
    iterations: usize,
    increments: Vec<f64>,
    caputo_discrepancy: f64,
    norms: RegularityNorms,
    u0_class_norm: f64,
    c_est: f64,
    closed_form_error: Option<f64>,
    l1_discrepancy: f64,
}

pub struct Solve;

impl Command for Solve {
    type Config = SolveConfig;

    fn validate(cfg: &SolveConfig) -> Result<(), CliError> {
        cfg.problem.build()?;
        check_contour(&cfg.contour)?;
        if let Some(d) = cfg.delta {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(CliError::Schema(format!("delta must be finite and >= 0, got {d}")));
            }
        }
        if !(cfg.target_q > 0.0 && cfg.target_q < 1.0) {
            return Err(CliError::Schema(format!("target_q must lie in (0,1), got {}", cfg.target_q)));
        }
        check_positive("tol", cfg.tol)?;
        check_count("max_iter", cfg.max_iter, 1)?;
        for (n, v) in [("closed_form_tol", cfg.closed_form_tol), ("l1_tol", cfg.l1_tol)] {
            if let Some(v) = v {
                check_positive(n, v)?;
            }
        }
        Ok(())
    }

    fn compute(cfg: &SolveConfig, _ctx: &Ctx) -> Result<Outcome, CliError> {
        let prob = cfg.problem.build()?;
        let spec = &cfg.contour;
        let delta = match cfg.delta {
            Some(d) => d,
            None => select_delta(&prob, spec, cfg.target_q).map_err(numeric)?,
        };
        let sys = assemble_shifted_system(&prob, delta, spec).map_err(numeric)?;
        let sol = neumann_solve(&sys, cfg.tol, cfg.max_iter).map_err(numeric)?;
        let norms = regularity_norms(&prob, &sol).map_err(numeric)?;
        let pair0 = form_to_operators(&prob.form, &prob.triple, 0.0).map_err(numeric)?;
        let u0_norm = initial_value_norm(&pair0, &prob.triple, prob.alpha, prob.p, &prob.u0).map_err(numeric)?;

        let autonomous = prob.form.is_autonomous();
        let closed_form_error = if autonomous {
            let exact = closed_form_autonomous(prob.alpha, &pair0, &prob.triple, prob.grid(), &prob.u0, &prob.f)
                .map_err(numeric)?;
            Some(sol.u.max_abs_diff(&exact))
        } else {
            None
        };
        let l1 = l1_direct_stepper(&prob).map_err(numeric)?;
        let gram = prob.triple.gram_h();
        let hn = |v: &fraclab::linalg::CVec| weighted_norm(v, &gram);
        let diff = l1.combine(Complex64::new(1.0, 0.0), &sol.u, Complex64::new(-1.0, 0.0)).map_err(numeric)?;
        let un = lp_time_norm(prob.p, &sol.u, hn).map_err(numeric)?;
        let dn = lp_time_norm(prob.p, &diff, hn).map_err(numeric)?;
        let l1_discrepancy = if un > 0.0 { dn / un } else { dn };

        let mut out = Outcome::new(SolveResult {
            autonomous,
            n_x: prob.triple.dim,
            n_t: prob.grid().steps(),
            delta,
            q: sys.q,
            kernel_constant: sys.kernel_constant,
            iterations: sol.iterations,
            increments: sol.increments.clone(),
            caputo_discrepancy: sol.caputo_discrepancy,
            norms,
            u0_class_norm: u0_norm,
            c_est: norms.c_est(u0_norm),
            closed_form_error,
            l1_discrepancy,
        });
        out.check(Check::below("contraction_q", sys.q, 1.0));
        if let (Some(tol), Some(err)) = (cfg.closed_form_tol, closed_form_error) {
            out.check(Check::at_most("closed_form_error", err, tol));
        }
        if let Some(tol) = cfg.l1_tol {
            out.check(Check::at_most("l1_discrepancy", l1_discrepancy, tol));
        }
        if cfg.write_trajectory {
            out.table("u", Table::trajectory(&sol.u));
        }
        let mut conv = Table::new(&["iteration", "increment", "plain_increment"]);
        for (k, (a, b)) in sol.increments.iter().zip(&sol.plain_increments).enumerate() {
            conv.push(vec![(k + 1) as f64, *a, *b]);
        }
        out.table("convergence", conv);
        Ok(out)
    }
}
