//! Building blocks shared by the subcommand schemas.
//!
//! Every struct rejects unknown fields, so a typo in a config is a schema
//! violation rather than a silently ignored key.

use std::f64::consts::PI;

use fraclab::fracops::{SpaceTag, TimeGrid, Trajectory};
use fraclab::funcalc::ContourSpec;
use fraclab::linalg::CVec;
use fraclab::mlf::FracOrder;
use fraclab::reglab::DiniModulus;
use fraclab::triple::{build_geometric_triple, build_weighted_triple, DiscreteTriple, NonAutonomousForm};
use fraclab::volterra::ProblemSpec;
use fraclab::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{schema, CliError};

pub(crate) fn one() -> f64 {
    1.0
}

pub(crate) fn two() -> f64 {
    2.0
}

pub fn check_alpha(alpha: f64) -> Result<FracOrder, CliError> {
    FracOrder::new(alpha).map_err(|e| CliError::Schema(format!("alpha: {e}")))
}

pub fn check_p(p: f64) -> Result<(), CliError> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(CliError::Schema(format!("p must lie in the open interval (1,∞), got {p}")))
    }
}

pub fn check_count(name: &str, n: usize, min: usize) -> Result<(), CliError> {
    if n >= min {
        Ok(())
    } else {
        Err(CliError::Schema(format!("{name} must be at least {min}, got {n}")))
    }
}

pub fn check_positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Schema(format!("{name} must be finite and > 0, got {v}")))
    }
}

pub fn check_contour(spec: &ContourSpec) -> Result<(), CliError> {
    if !(spec.theta > PI / 2.0 && spec.theta < PI) {
        return Err(CliError::Schema(format!(
            "contour.theta must lie in the open interval (π/2,π), got {}",
            spec.theta
        )));
    }
    spec.validate().map_err(|e| CliError::Schema(format!("contour: {e}")))
}

/// A real function of `x ∈ (0,1)` sampled at the spatial nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    #[default]
    Zero,
    Constant { value: f64 },
    /// `sin(kπx)`.
    Sine { k: f64 },
    /// `cos(kπx)`.
    Cosine { k: f64 },
    /// `scale · x^exponent`.
    Power {
        exponent: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `lo + (hi - lo) x`.
    Linear { lo: f64, hi: f64 },
    /// `lo (hi/lo)^{j/(n-1)}` by node index: a geometric spectrum.
    Geometric { lo: f64, hi: f64 },
    /// One value per node.
    Values { values: Vec<f64> },
}

impl Profile {
    pub fn sample(&self, nodes: &[f64]) -> Result<Vec<f64>, CliError> {
        let n = nodes.len();
        let out: Vec<f64> = match self {
            Self::Zero => vec![0.0; n],
            Self::Constant { value } => vec![*value; n],
            Self::Sine { k } => nodes.iter().map(|x| (k * PI * x).sin()).collect(),
            Self::Cosine { k } => nodes.iter().map(|x| (k * PI * x).cos()).collect(),
            Self::Power { exponent, scale } => nodes.iter().map(|x| scale * x.powf(*exponent)).collect(),
            Self::Linear { lo, hi } => nodes.iter().map(|x| lo + (hi - lo) * x).collect(),
            Self::Geometric { lo, hi } => {
                if !(*lo > 0.0 && *hi > 0.0) {
                    return Err(schema("geometric profile needs lo, hi > 0"));
                }
                (0..n).map(|j| lo * (hi / lo).powf(j as f64 / (n - 1).max(1) as f64)).collect()
            }
            Self::Values { values } => {
                if values.len() != n {
                    return Err(CliError::Schema(format!(
                        "profile has {} values but the space has {n} nodes",
                        values.len()
                    )));
                }
                values.clone()
            }
        };
        if out.iter().any(|v| !v.is_finite()) {
            return Err(schema("profile is not finite on the spatial nodes"));
        }
        Ok(out)
    }

    pub fn vector(&self, nodes: &[f64]) -> Result<CVec, CliError> {
        let v = self.sample(nodes)?;
        Ok(CVec::from_iterator(v.len(), v.into_iter().map(|x| Complex64::new(x, 0.0))))
    }
}

/// Continuity modulus `ω` of the form in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModulusConfig {
    #[default]
    Zero,
    /// `scale · t^beta`.
    Power {
        beta: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `scale · t^beta (1 + ln(1 + 1/t))^{-k}`.
    PowerLog {
        beta: f64,
        k: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// Piecewise-linear samples.
    Table { t: Vec<f64>, omega: Vec<f64> },
}

impl ModulusConfig {
    pub fn build(&self) -> Result<DiniModulus, CliError> {
        let m = match self {
            Self::Zero => Ok(DiniModulus::zero()),
            Self::Power { beta, scale } => DiniModulus::power(*beta, *scale),
            Self::PowerLog { beta, k, scale } => DiniModulus::power_log(*beta, *k, *scale),
            Self::Table { t, omega } => DiniModulus::table(t.clone(), omega.clone()),
        };
        m.map_err(|e| CliError::Schema(format!("modulus: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightConfig {
    /// `w ≡ 1`: `V = H = V′` as sets, the plain `L₂` setting.
    #[default]
    Unit,
    /// `w(x) = x^{-a}`, `a ≥ 0`.
    Power { a: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceGrid {
    /// Midpoint nodes on `(0,1)`.
    #[default]
    Uniform,
    /// Geometric cells on `[eps, 1]`.
    Geometric { eps: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub n: usize,
    #[serde(default)]
    pub weight: WeightConfig,
    #[serde(default)]
    pub grid: SpaceGrid,
}

impl SpaceConfig {
    pub fn build(&self) -> Result<DiscreteTriple, CliError> {
        check_count("space.n", self.n, 2)?;
        let a = match self.weight {
            WeightConfig::Unit => 0.0,
            WeightConfig::Power { a } => {
                if !(a >= 0.0 && a.is_finite()) {
                    return Err(CliError::Schema(format!("space.weight.a must be finite and >= 0, got {a}")));
                }
                a
            }
        };
        let w = move |x: f64| if a == 0.0 { 1.0 } else { x.powf(-a) };
        let tr = match self.grid {
            SpaceGrid::Uniform => build_weighted_triple(self.n, w),
            SpaceGrid::Geometric { eps } => build_geometric_triple(self.n, eps, w),
        };
        tr.map_err(|e| CliError::Schema(format!("space: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FormConfig {
    /// `a(t; u, v) = ∫ m(t,x) u conj(v)` with
    /// `m = base(x)(1 + amp·ω(t)/ω(τ)·sin 2πx)`, `|amp| < 1`.
    Multiplication {
        base: Profile,
        #[serde(default)]
        amp: f64,
        #[serde(default)]
        omega: ModulusConfig,
    },
    /// Dirichlet finite differences with conductivity
    /// `1 + amp·ω(t)/ω(τ)·sin 2πx`; needs a uniform space grid.
    FiniteDifference {
        #[serde(default)]
        amp: f64,
        #[serde(default)]
        omega: ModulusConfig,
    },
}

impl FormConfig {
    pub fn build(&self, triple: &DiscreteTriple, tau: f64) -> Result<NonAutonomousForm, CliError> {
        let f = match self {
            Self::Multiplication { base, amp, omega } => {
                NonAutonomousForm::multiplication(triple, base.sample(&triple.nodes)?, *amp, omega.build()?, tau)
            }
            Self::FiniteDifference { amp, omega } => NonAutonomousForm::finite_difference(triple, *amp, omega.build()?, tau),
        };
        f.map_err(|e| CliError::Schema(format!("form: {e}")))
    }
}

/// A form on a triple, without data: the input of the operator-level
/// diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormSetup {
    pub space: SpaceConfig,
    pub form: FormConfig,
    #[serde(default = "one")]
    pub tau: f64,
}

impl FormSetup {
    pub fn build(&self) -> Result<(DiscreteTriple, NonAutonomousForm), CliError> {
        check_positive("tau", self.tau)?;
        let tr = self.space.build()?;
        let form = self.form.build(&tr, self.tau)?;
        Ok((tr, form))
    }

    /// Diagonal operator with the given spectrum on the unit-weight triple.
    pub fn diagonal(spectrum: Profile, n: usize) -> Self {
        Self {
            space: SpaceConfig { n, weight: WeightConfig::Unit, grid: SpaceGrid::Uniform },
            form: FormConfig::Multiplication { base: spectrum, amp: 0.0, omega: ModulusConfig::Zero },
            tau: 1.0,
        }
    }

    pub fn finite_difference(n: usize, amp: f64, beta: f64) -> Self {
        Self {
            space: SpaceConfig { n, weight: WeightConfig::Unit, grid: SpaceGrid::Uniform },
            form: FormConfig::FiniteDifference { amp, omega: ModulusConfig::Power { beta, scale: 1.0 } },
            tau: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub steps: usize,
    /// Grading exponent `r ≥ 1` of `t_j = τ (j/N)^r`; uniform when absent.
    #[serde(default)]
    pub grading: Option<f64>,
}

impl TimeConfig {
    pub fn build(&self, tau: f64) -> Result<TimeGrid, CliError> {
        check_count("time.steps", self.steps, 2)?;
        let g = match self.grading {
            None => TimeGrid::uniform(tau, self.steps),
            Some(r) => TimeGrid::graded(tau, self.steps, r),
        };
        g.map_err(|e| CliError::Schema(format!("time: {e}")))
    }
}

/// `f(t, x) = (a0 + a1·t) · profile(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    #[serde(default)]
    pub profile: Profile,
    #[serde(default = "one")]
    pub a0: f64,
    #[serde(default)]
    pub a1: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self { profile: Profile::Zero, a0: 1.0, a1: 0.0 }
    }
}

/// `∂_t^α u + A(t)u = f`, `u(0) = u0` on `(0, τ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub alpha: f64,
    #[serde(default = "one")]
    pub tau: f64,
    #[serde(default = "two")]
    pub p: f64,
    pub space: SpaceConfig,
    pub form: FormConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub source: SourceConfig,
    #[serde(default)]
    pub u0: Profile,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            tau: 1.0,
            p: 2.0,
            space: SpaceConfig { n: 16, weight: WeightConfig::Unit, grid: SpaceGrid::Uniform },
            form: FormConfig::FiniteDifference { amp: 0.5, omega: ModulusConfig::Power { beta: 0.6, scale: 1.0 } },
            time: TimeConfig { steps: 64, grading: None },
            source: SourceConfig { profile: Profile::Sine { k: 1.0 }, a0: 1.0, a1: 1.0 },
            u0: Profile::Zero,
        }
    }
}

impl ProblemConfig {
    pub fn build(&self) -> Result<ProblemSpec, CliError> {
        let alpha = check_alpha(self.alpha)?;
        check_p(self.p)?;
        check_positive("tau", self.tau)?;
        let triple = self.space.build()?;
        let form = self.form.build(&triple, self.tau)?;
        let grid = self.time.build(self.tau)?;
        let prof = self.source.profile.vector(&triple.nodes)?;
        let (a0, a1) = (self.source.a0, self.source.a1);
        let f = Trajectory::from_fn(grid, SpaceTag::H, |t| &prof * Complex64::new(a0 + a1 * t, 0.0)).map_err(schema)?;
        let u0 = self.u0.vector(&triple.nodes)?;
        ProblemSpec::new(alpha, triple, form, f, u0, self.p).map_err(|e| CliError::Schema(format!("problem: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_problem_builds() {
        let p = ProblemConfig::default().build().unwrap();
        assert_eq!(p.triple.dim, 16);
        assert_eq!(p.grid().steps(), 64);
    }

    #[test]
    fn alpha_outside_unit_interval_is_a_schema_error() {
        let cfg = ProblemConfig { alpha: 1.0, ..ProblemConfig::default() };
        match cfg.build() {
            Err(CliError::Schema(msg)) => assert!(msg.contains("(0,1)"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let r: Result<SpaceConfig, _> = serde_json::from_str(r#"{"n": 4, "nn": 5}"#);
        assert!(r.is_err());
        let r: Result<Profile, _> = serde_json::from_str(r#"{"kind": "sine", "k": 1, "phase": 0}"#);
        assert!(r.is_err());
    }

    #[test]
    fn profile_values_must_match_nodes() {
        let p = Profile::Values { values: vec![1.0, 2.0] };
        assert!(p.sample(&[0.1, 0.2, 0.3]).is_err());
        let g = Profile::Geometric { lo: 1.0, hi: 100.0 }.sample(&[0.0; 3]).unwrap();
        assert_eq!(g, vec![1.0, 10.0, 100.0]);
    }
}
