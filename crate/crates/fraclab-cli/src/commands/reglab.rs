//! Regularity diagnostics: `dini`, `symbol`, `hormander`, `rstudy`.

use fraclab::fracops::{SpaceTag, TimeGrid, Trajectory};
use fraclab::funcalc::ContourSpec;
use fraclab::reglab::{
    decade_grid, dini_check_a1, dini_check_a2, hormander_check, r_operator_study, symbol_bounds_check,
    symmetric_xi_grid, HormanderReport, IntegralReport, RStudyReport, SymbolReport, SYMBOL_GROWTH_LIMIT,
};
use fraclab::volterra::ProblemSpec;
use serde::{Deserialize, Serialize};

use super::{Command, Ctx, Outcome};
use crate::config::{check_alpha, check_contour, check_count, check_p, check_positive, one, FormSetup, ModulusConfig, Profile};
use crate::error::{numeric, CliError};
use crate::report::{Check, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Finite,
    Divergent,
}

impl Verdict {
    fn of(finite: bool) -> Self {
        if finite {
            Self::Finite
        } else {
            Self::Divergent
        }
    }
}

fn default_dini_tol() -> f64 {
    1e-6
}

/// Dini integrals `∫_0^τ ω(t)/t^{1+α/2} dt` and, when `p` is given,
/// `∫_0^τ (ω(t)/t^α)^p dt`. The verdicts are the output; only agreement
/// with the closed forms of power moduli is asserted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiniConfig {
    pub alpha: f64,
    pub modulus: ModulusConfig,
    #[serde(default = "one")]
    pub tau: f64,
    #[serde(default)]
    pub p: Option<f64>,
    /// Relative tolerance against the closed forms of power moduli.
    #[serde(default = "default_dini_tol")]
    pub analytic_tol: f64,
}

impl Default for DiniConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            modulus: ModulusConfig::Power { beta: 0.6, scale: 1.0 },
            tau: 1.0,
            p: Some(2.0),
            analytic_tol: 1e-6,
        }
    }
}

#[derive(Debug, Serialize)]
struct DiniIntegral {
    verdict: Verdict,
    /// Closed form for power moduli: `None` when it diverges or the modulus
    /// is not a power.
    analytic: Option<f64>,
    analytic_verdict: Option<Verdict>,
    report: IntegralReport,
}

#[derive(Debug, Serialize)]
struct DiniResult {
    verdict: Verdict,
    a1: DiniIntegral,
    a2: Option<DiniIntegral>,
}

/// `∫_0^τ c t^{e-1} dt` for an exponent `e`; `None` when it diverges.
fn power_integral(c: f64, e: f64, tau: f64) -> Option<f64> {
    if c == 0.0 {
        Some(0.0)
    } else if e > 0.0 {
        Some(c * tau.powf(e) / e)
    } else {
        None
    }
}

fn dini_integral(rep: IntegralReport, analytic: Option<Option<f64>>, tol: f64, name: &str, out: &mut Outcome) -> DiniIntegral {
    let verdict = Verdict::of(rep.finite);
    let analytic_verdict = analytic.map(|a| Verdict::of(a.is_some()));
    if let Some(av) = analytic_verdict {
        out.check(Check::holds(format!("{name}_verdict_analytic"), av == verdict));
    }
    if let Some(Some(exact)) = analytic {
        if rep.finite {
            let err = if exact == 0.0 { rep.value.abs() } else { ((rep.value - exact) / exact).abs() };
            out.check(Check::at_most(format!("{name}_analytic"), err, tol));
        }
    }
    DiniIntegral { verdict, analytic: analytic.flatten(), analytic_verdict, report: rep }
}

pub struct Dini;

impl Command for Dini {
    type Config = DiniConfig;

    fn validate(cfg: &DiniConfig) -> Result<(), CliError> {
        check_alpha(cfg.alpha)?;
        cfg.modulus.build()?;
        check_positive("tau", cfg.tau)?;
        if let Some(p) = cfg.p {
            check_p(p)?;
        }
        check_positive("analytic_tol", cfg.analytic_tol)
    }

    fn compute(cfg: &DiniConfig, _ctx: &Ctx) -> Result<Outcome, CliError> {
        let alpha = check_alpha(cfg.alpha)?;
        let omega = cfg.modulus.build()?;
        let power = match cfg.modulus {
            ModulusConfig::Power { beta, scale } => Some((beta, scale)),
            ModulusConfig::Zero => Some((1.0, 0.0)),
            _ => None,
        };
        let mut out = Outcome::default();
        let rep = dini_check_a1(&omega, alpha, cfg.tau).map_err(numeric)?;
        let exact = power.map(|(b, c)| power_integral(c, b - cfg.alpha / 2.0, cfg.tau));
        let a1 = dini_integral(rep, exact, cfg.analytic_tol, "a1", &mut out);
        let a2 = match cfg.p {
            Some(p) => {
                let rep = dini_check_a2(&omega, alpha, p, cfg.tau).map_err(numeric)?;
                let exact = power.map(|(b, c)| power_integral(c.powf(p), 1.0 + p * (b - cfg.alpha), cfg.tau));
                Some(dini_integral(rep, exact, cfg.analytic_tol, "a2", &mut out))
            }
            None => None,
        };
        let all_finite = a1.verdict == Verdict::Finite && a2.as_ref().map_or(true, |a| a.verdict == Verdict::Finite);
        let mut table = Table::new(&["integral", "eps", "partial"]);
        for (k, a) in std::iter::once(&a1).chain(a2.as_ref()).enumerate() {
            for (eps, v) in &a.report.partial {
                table.push(vec![(k + 1) as f64, *eps, *v]);
            }
        }
        out.table("partial", table);
        out.result = super::to_value(DiniResult { verdict: Verdict::of(all_finite), a1, a2 });
        Ok(out)
    }
}

/// Symbol bounds for `σ(t,ξ) = 𝒜(t)((iξ+δ)^α + 𝒜(t))^{-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolConfig {
    pub alpha: f64,
    pub operator: FormSetup,
    pub delta: f64,
    /// Time pairs `[t, t']` for the increment constants.
    pub t_pairs: Vec<[f64; 2]>,
    /// `|ξ|` range; must span four decades.
    pub xi_lo: f64,
    pub xi_hi: f64,
    pub per_decade: usize,
    pub k_max: usize,
}

impl Default for SymbolConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            operator: FormSetup::finite_difference(12, 0.5, 0.6),
            delta: 1.0,
            t_pairs: vec![[0.0, 0.01], [0.25, 0.5], [0.5, 1.0], [0.9, 0.901]],
            xi_lo: 1e-2,
            xi_hi: 1e3,
            per_decade: 4,
            k_max: 2,
        }
    }
}

pub struct Symbol;

impl Command for Symbol {
    type Config = SymbolConfig;

    fn validate(cfg: &SymbolConfig) -> Result<(), CliError> {
        check_alpha(cfg.alpha)?;
        cfg.operator.build()?;
        check_positive("delta", cfg.delta)?;
        check_positive("xi_lo", cfg.xi_lo)?;
        if !(cfg.xi_hi >= 1e4 * cfg.xi_lo && cfg.xi_hi.is_finite()) {
            return Err(CliError::Schema("xi_hi must be at least 1e4·xi_lo".into()));
        }
        check_count("per_decade", cfg.per_decade, 1)?;
        check_count("t_pairs length", cfg.t_pairs.len(), 1)?;
        if cfg.k_max > 2 {
            return Err(CliError::Schema(format!("k_max must be 0, 1 or 2, got {}", cfg.k_max)));
        }
        let tau = cfg.operator.tau;
        if cfg.t_pairs.iter().flatten().any(|t| !(*t >= 0.0 && *t <= tau)) {
            return Err(CliError::Schema("t_pairs must lie in [0, tau]".into()));
        }
        Ok(())
    }

    fn compute(cfg: &SymbolConfig, _ctx: &Ctx) -> Result<Outcome, CliError> {
        let (tr, form) = cfg.operator.build()?;
        let xi = symmetric_xi_grid(cfg.xi_lo, cfg.xi_hi, cfg.per_decade);
        let pairs: Vec<(f64, f64)> = cfg.t_pairs.iter().map(|[a, b]| (*a, *b)).collect();
        let rep: SymbolReport =
            symbol_bounds_check(&form, &tr, check_alpha(cfg.alpha)?, cfg.delta, &pairs, &xi, cfg.k_max).map_err(numeric)?;
        let mut out = Outcome::default();
        for (k, g) in rep.growth.iter().enumerate() {
            out.check(Check::at_most(format!("growth_k{k}"), *g, SYMBOL_GROWTH_LIMIT));
        }
        let finite = rep.constants.iter().chain(&rep.increment_constants).all(|c| c.is_finite());
        out.check(Check::holds("constants_finite", finite));
        let mut header = vec!["t".to_string()];
        header.extend((0..=cfg.k_max).map(|k| format!("c_{k}")));
        let mut table = Table { header, rows: Vec::new() };
        for row in &rep.per_t {
            let mut r = vec![row.t];
            r.extend(&row.constants);
            table.push(r);
        }
        out.table("per_t", table);
        out.result = super::to_value(&rep);
        Ok(out)
    }
}

/// Hörmander integrals of the kernel `𝒜(t)ψ_t(t-s)` at pairs `(s, s')`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HormanderConfig {
    pub alpha: f64,
    pub operator: FormSetup,
    #[serde(default)]
    pub contour: ContourSpec,
    /// Base point `s`; the pairs are `(s, s ± d)` for log-spaced gaps `d`.
    pub s: f64,
    pub gap_lo: f64,
    pub gap_hi: f64,
    pub per_decade: usize,
    pub both_sides: bool,
    /// Bound on `|first/(C·envelope) - 1|`: the first integral follows the
    /// `C ln 2`-type envelope of a scalar kernel.
    #[serde(default)]
    pub envelope_tol: Option<f64>,
}

impl Default for HormanderConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            operator: FormSetup::diagonal(Profile::Geometric { lo: 0.1, hi: 1e5 }, 49),
            contour: ContourSpec::default(),
            s: 0.3,
            gap_lo: 1e-3,
            gap_hi: 1e-1,
            per_decade: 2,
            both_sides: true,
            envelope_tol: Some(0.2),
        }
    }
}

impl HormanderConfig {
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for d in decade_grid(self.gap_lo, self.gap_hi, self.per_decade) {
            out.push((self.s, self.s + d));
            if self.both_sides {
                out.push((self.s, self.s - d));
            }
        }
        out
    }
}

pub struct Hormander;

impl Command for Hormander {
    type Config = HormanderConfig;

    fn validate(cfg: &HormanderConfig) -> Result<(), CliError> {
        check_alpha(cfg.alpha)?;
        cfg.operator.build()?;
        check_contour(&cfg.contour)?;
        check_positive("gap_lo", cfg.gap_lo)?;
        check_positive("gap_hi", cfg.gap_hi)?;
        if cfg.gap_hi < cfg.gap_lo {
            return Err(CliError::Schema("gap_hi must be >= gap_lo".into()));
        }
        check_count("per_decade", cfg.per_decade, 1)?;
        let tau = cfg.operator.tau;
        for (s, sp) in cfg.pairs() {
            if !(s > 0.0 && s < tau && sp > 0.0 && sp < tau) {
                return Err(CliError::Schema(format!("pair ({s}, {sp}) leaves (0, tau)")));
            }
        }
        if let Some(t) = cfg.envelope_tol {
            check_positive("envelope_tol", t)?;
        }
        Ok(())
    }

    fn compute(cfg: &HormanderConfig, _ctx: &Ctx) -> Result<Outcome, CliError> {
        let (tr, form) = cfg.operator.build()?;
        let rep: HormanderReport =
            hormander_check(&form, &tr, check_alpha(cfg.alpha)?, &cfg.contour, &cfg.pairs()).map_err(numeric)?;
        let mut out = Outcome::default();
        if let Some(tol) = cfg.envelope_tol {
            let worst = rep.rows.iter().fold(0.0f64, |m, r| m.max((r.first_ratio - 1.0).abs()));
            out.check(Check::at_most("first_envelope_ratio", worst, tol));
        }
        out.check(Check::holds(
            "integrals_finite",
            rep.sup_first.is_finite() && rep.sup_transposed.is_finite(),
        ));
        let mut table = Table::new(&["s", "s_prime", "gap", "first", "first_envelope", "first_ratio", "transposed", "omega_envelope"]);
        for r in &rep.rows {
            table.push(vec![r.s, r.s_prime, r.gap, r.first, r.first_envelope, r.first_ratio, r.transposed, r.omega_envelope]);
        }
        out.table("rows", table);
        out.result = super::to_value(&rep);
        Ok(out)
    }
}

/// `‖Ru0‖_{L_p(0,τ;H)}`, `(Ru0)(t) = 𝒜(t)φ_t(t)u0`, against the norm of `u0`
/// in its interpolation class, over refinement levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RStudyConfig {
    pub alpha: f64,
    pub p: f64,
    pub operator: FormSetup,
    #[serde(default)]
    pub contour: ContourSpec,
    pub u0: Profile,
    pub levels: usize,
    /// Assert that the ratio settles across the last two levels.
    pub require_stable: bool,
}

impl Default for RStudyConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            p: 4.0,
            operator: FormSetup::finite_difference(16, 0.5, 0.6),
            contour: ContourSpec::default(),
            u0: Profile::Sine { k: 1.0 },
            levels: 3,
            require_stable: true,
        }
    }
}

fn r_problem(cfg: &RStudyConfig) -> Result<ProblemSpec, CliError> {
    let (tr, form) = cfg.operator.build()?;
    let grid = TimeGrid::uniform(cfg.operator.tau, 4).map_err(crate::error::schema)?;
    let f = Trajectory::zeros(grid, SpaceTag::H, tr.dim);
    let u0 = cfg.u0.vector(&tr.nodes)?;
    ProblemSpec::new(check_alpha(cfg.alpha)?, tr, form, f, u0, cfg.p).map_err(|e| CliError::Schema(format!("problem: {e}")))
}

pub struct RStudy;

impl Command for RStudy {
    type Config = RStudyConfig;

    fn validate(cfg: &RStudyConfig) -> Result<(), CliError> {
        check_p(cfg.p)?;
        check_contour(&cfg.contour)?;
        if !(2..=6).contains(&cfg.levels) {
            return Err(CliError::Schema(format!("levels must lie in 2..=6, got {}", cfg.levels)));
        }
        r_problem(cfg).map(|_| ())
    }

    fn compute(cfg: &RStudyConfig, _ctx: &Ctx) -> Result<Outcome, CliError> {
        let prob = r_problem(cfg)?;
        let rep: RStudyReport = r_operator_study(&prob, &cfg.contour, cfg.levels).map_err(numeric)?;
        let mut out = Outcome::default();
        if cfg.require_stable {
            out.check(Check::holds("ratio_stable", rep.stable));
        }
        let mut table = Table::new(&["eps", "nodes_per_decade", "lp_norm", "ratio"]);
        for l in &rep.levels {
            table.push(vec![l.eps, l.nodes_per_decade as f64, l.lp_norm, l.ratio]);
        }
        out.table("levels", table);
        out.result = super::to_value(&rep);
        Ok(out)
    }
}
