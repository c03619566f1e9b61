//! Mittag-Leffler function `E_{α,β}(z) = Σ z^k / Γ(αk+β)` and the Caputo
//! kernel `k(t) = t^{-α}/Γ(1-α)`.
//!
//! Three regimes are used for `0 < α ≤ 1`, chosen by `X = |z|^{1/α}`:
//! the compensated power series while `X` is moderate, the asymptotic
//! expansion with optimal truncation once it reaches double precision, and
//! otherwise the Gorenflo–Loutchko–Luchko integral representation
//! evaluated by tanh-sinh quadrature.

use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
#[allow(unused_imports)] // inherent in core on recent toolchains
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quad;
use crate::special::{gamma, ln_gamma, rgamma};

/// Fractional order `α ∈ (0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FracOrder(f64);

impl FracOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(Self(alpha))
        } else {
            Err(invalid(alloc::format!(
                "fractional order must lie in the open interval (0,1), got {alpha}"
            )))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for FracOrder {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FracOrder> for f64 {
    fn from(a: FracOrder) -> f64 {
        a.0
    }
}

/// Parameters of `E_{α,β}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MLParams {
    pub alpha: f64,
    pub beta: f64,
    /// Maximum number of power-series terms.
    pub series_cutoff: usize,
    /// Smallest `|z|` at which the asymptotic expansion is tried.
    pub asymptotic_switch_radius: f64,
    /// Maximum number of algebraic terms in the asymptotic expansion.
    pub asymptotic_terms: usize,
}

/// `X = |z|^{1/α}` up to which the series is used: the cancellation in
/// the alternating sum costs about `e^X` in relative accuracy.
const SERIES_X: f64 = 5.0;

impl MLParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let p = Self {
            alpha,
            beta,
            series_cutoff: 2000,
            asymptotic_switch_radius: 1.0,
            asymptotic_terms: 80,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(invalid(alloc::format!(
                "Mittag-Leffler order must lie in (0,1], got {}",
                self.alpha
            )));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(invalid(alloc::format!(
                "Mittag-Leffler beta must be real and positive, got {}",
                self.beta
            )));
        }
        if self.series_cutoff < 1 || self.asymptotic_terms < 1 {
            return Err(invalid("series_cutoff and asymptotic_terms must be at least 1"));
        }
        if !(self.asymptotic_switch_radius > 0.0) {
            return Err(invalid("asymptotic_switch_radius must be positive"));
        }
        Ok(())
    }
}

/// Which evaluation route produced a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Series,
    Integral,
    Asymptotic,
}

/// `i^α = e^{iπα/2}`.
pub fn i_pow(alpha: f64) -> Complex64 {
    Complex64::from_polar(1.0, 0.5 * PI * alpha)
}

/// `E_{α,β}(z)`.
pub fn mittag_leffler(p: &MLParams, z: Complex64) -> Result<Complex64> {
    mittag_leffler_branch(p, z).map(|(v, _)| v)
}

/// `E_{α,β}(z)` for real arguments (real result).
pub fn ml_real(p: &MLParams, x: f64) -> Result<f64> {
    mittag_leffler(p, Complex64::new(x, 0.0)).map(|v| v.re)
}

/// `E_{α,β}(z)` together with the branch used.
pub fn mittag_leffler_branch(p: &MLParams, z: Complex64) -> Result<(Complex64, Branch)> {
    p.validate()?;
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let (alpha, beta) = (p.alpha, p.beta);
    if z.norm() == 0.0 {
        return Ok((Complex64::new(rgamma(beta), 0.0), Branch::Series));
    }
    if alpha == 1.0 && beta == 1.0 {
        let e = z.exp();
        if !(e.re.is_finite() && e.im.is_finite()) {
            return Err(Error::Overflow { exponent: z.re });
        }
        return Ok((e, Branch::Series));
    }
    let x = z.norm().powf(1.0 / alpha);
    if x <= SERIES_X || z.norm() <= 1.0 {
        return series(p, z).map(|v| (v, Branch::Series));
    }
    if z.norm() >= p.asymptotic_switch_radius {
        if let Some(v) = asymptotic(p, z)? {
            return Ok((v, Branch::Asymptotic));
        }
    }
    integral(alpha, beta, z).map(|v| (v, Branch::Integral))
}

/// `E_{α,β}(i^α μ)` for `μ ≥ 0`. On this ray `(i^α μ)^{1/α} = iμ^{1/α}` is
/// formed exactly, so the exponential term keeps modulus one for arbitrarily
/// large `μ` instead of inheriting the rounding of `arg z`.
pub fn ml_oscillatory(p: &MLParams, mu: f64) -> Result<Complex64> {
    p.validate()?;
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(invalid(alloc::format!("oscillatory ray needs finite mu >= 0, got {mu}")));
    }
    let z = i_pow(p.alpha) * mu;
    let x = mu.powf(1.0 / p.alpha);
    if x <= SERIES_X || mu <= p.asymptotic_switch_radius {
        return mittag_leffler(p, z);
    }
    let (alg, err) = algebraic_tail(p, z);
    let lead = Complex64::from_polar(
        mu.powf((1.0 - p.beta) / p.alpha) / p.alpha,
        0.5 * PI * (1.0 - p.beta) + x % (2.0 * PI),
    );
    let v = lead - alg;
    if err <= 1e-15 * v.norm() {
        Ok(v)
    } else {
        integral(p.alpha, p.beta, z)
    }
}

/// Forces one branch; used to cross-check branches on their overlap.
pub fn mittag_leffler_forced(p: &MLParams, z: Complex64, branch: Branch) -> Result<Complex64> {
    p.validate()?;
    match branch {
        Branch::Series => series(p, z),
        Branch::Integral => integral(p.alpha, p.beta, z),
        Branch::Asymptotic => {
            asymptotic_sum(p, z).map(|(v, _)| v)
        }
    }
}

fn series(p: &MLParams, z: Complex64) -> Result<Complex64> {
    let (alpha, beta) = (p.alpha, p.beta);
    let lnz = z.ln();
    let mut sum = Complex64::new(rgamma(beta), 0.0);
    let mut comp = Complex64::new(0.0, 0.0);
    let mut small = 0;
    for k in 1..=p.series_cutoff {
        let kf = k as f64;
        let term = (lnz * kf - ln_gamma(alpha * kf + beta)).exp();
        // Kahan-compensated accumulation
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        if term.norm() <= 1e-18 * sum.norm().max(1e-300) && alpha * kf + beta > 2.0 {
            small += 1;
            if small >= 3 {
                return Ok(sum);
            }
        } else {
            small = 0;
        }
    }
    Err(Error::NoConvergence {
        iterations: p.series_cutoff,
        increment: f64::NAN,
    })
}

/// Asymptotic expansion with optimal truncation; returns the value and an
/// error estimate (size of the first omitted term).
fn asymptotic_sum(p: &MLParams, z: Complex64) -> Result<(Complex64, f64)> {
    let (alpha, beta) = (p.alpha, p.beta);
    let arg = z.arg().abs();
    let mut sum = Complex64::new(0.0, 0.0);
    // Exponential term on |arg z| < απ, where it is not beyond a Stokes line.
    if arg < alpha * PI {
        let w = z.powf(1.0 / alpha);
        if w.re > 709.0 {
            return Err(Error::Overflow { exponent: w.re });
        }
        sum += z.powf((1.0 - beta) / alpha) * w.exp() / alpha;
    }
    let (alg, err) = algebraic_tail(p, z);
    sum -= alg;
    Ok((sum, err))
}

/// `Σ_{k≥1} z^{-k}/Γ(β-αk)` truncated near its smallest term, with the
/// truncation error estimate.
fn algebraic_tail(p: &MLParams, z: Complex64) -> (Complex64, f64) {
    let (alpha, beta) = (p.alpha, p.beta);
    let mut sum = Complex64::new(0.0, 0.0);
    let zinv = z.inv();
    let mut zk = Complex64::new(1.0, 0.0);
    // Term sizes oscillate near the poles of Γ, so truncation is judged on
    // the envelope of the last few nonzero terms.
    let mut recent = [f64::INFINITY; 3];
    let mut best = f64::INFINITY;
    let mut err = f64::INFINITY;
    for k in 1..=p.asymptotic_terms {
        zk *= zinv;
        let x = beta - alpha * k as f64;
        if x <= 0.0 && (x - x.round()).abs() < 1e-12 {
            continue;
        }
        let t = zk * rgamma(x);
        recent.rotate_left(1);
        recent[2] = t.norm();
        let env = recent.iter().fold(0.0f64, |m, &v| m.max(v));
        if env > best {
            err = env;
            break;
        }
        best = best.min(env);
        sum += t;
        err = env;
        if env <= 1e-17 * sum.norm().max(1e-300) {
            break;
        }
    }
    (sum, err)
}

fn asymptotic(p: &MLParams, z: Complex64) -> Result<Option<Complex64>> {
    let (v, err) = asymptotic_sum(p, z)?;
    Ok((err <= 1e-15 * v.norm()).then_some(v))
}

/// Integral representation for `β < 1 + α`; larger `β` are reduced with
/// `E_{α,β}(z) = (E_{α,β-α}(z) - 1/Γ(β-α)) / z`.
fn integral(alpha: f64, beta: f64, z: Complex64) -> Result<Complex64> {
    if beta >= 1.0 + alpha {
        let lower = integral(alpha, beta - alpha, z)?;
        return Ok((lower - rgamma(beta - alpha)) / z);
    }
    let arg = z.arg().abs();
    let gap = arg - alpha * PI;
    if gap.abs() < 1e-6 {
        // The representation has a pole on the path exactly on |arg z| = απ;
        // a symmetric rotation cancels the first-order error.
        let rot = Complex64::from_polar(1.0, 1e-5);
        let a = integral(alpha, beta, z * rot)?;
        let b = integral(alpha, beta, z / rot)?;
        return Ok((a + b) * 0.5);
    }
    let s1 = (PI * (1.0 - beta)).sin();
    let s2 = (PI * (1.0 - beta + alpha)).sin();
    let ca = (alpha * PI).cos();
    // χ = y^α turns exp(-χ^{1/α}) into e^{-y}
    let kernel = |y: f64| -> Complex64 {
        let chi = y.powf(alpha);
        let num = Complex64::new(chi * s1, 0.0) - z * s2;
        let den = Complex64::new(chi * chi, 0.0) - z * (2.0 * chi * ca) + z * z;
        num / den * (y.powf(alpha - beta) * (-y).exp() / PI)
    };
    let y0 = z.norm().powf(1.0 / alpha);
    let y_end = 60.0f64.max(1.5 * y0.min(60.0));
    let mut cuts: Vec<f64> = Vec::with_capacity(4);
    cuts.push(0.0);
    let y1 = y0.min(1.0);
    cuts.push(y1);
    if y0 > y1 && y0 < y_end {
        cuts.push(y0);
    }
    cuts.push(y_end);
    let mut total = Complex64::new(0.0, 0.0);
    let mut err = 0.0;
    // y = v^{1/g} absorbs the y^{α-β} endpoint singularity on the first piece
    let g = alpha - beta + 1.0;
    let first = quad::tanh_sinh(0.0, y1.powf(g), 1e-14, |v: f64| {
        let y = v.powf(1.0 / g);
        let chi = y.powf(alpha);
        let num = Complex64::new(chi * s1, 0.0) - z * s2;
        let den = Complex64::new(chi * chi, 0.0) - z * (2.0 * chi * ca) + z * z;
        num / den * ((-y).exp() / (PI * g))
    });
    total += first.value;
    err += first.error;
    for w in cuts[1..].windows(2) {
        let e = quad::tanh_sinh(w[0], w[1], 1e-14, kernel);
        total += e.value;
        err += e.error;
    }
    if err > 1e-8 * total.norm().max(1e-300) && err > 1e-14 {
        return Err(Error::Quadrature {
            coarse: total.norm(),
            fine: total.norm() + err,
        });
    }
    if arg < alpha * PI {
        let w = z.powf(1.0 / alpha);
        if w.re > 709.0 {
            return Err(Error::Overflow { exponent: w.re });
        }
        total += z.powf((1.0 - beta) / alpha) * w.exp() / alpha;
    }
    Ok(total)
}

/// `k(t) = t^{-α}/Γ(1-α)`.
pub fn caputo_kernel(alpha: FracOrder, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid(alloc::format!("kernel needs t > 0, got {t}")));
    }
    let a = alpha.get();
    Ok(t.powf(-a) / gamma(1.0 - a))
}

/// `k̇(t) = -α t^{-α-1}/Γ(1-α)`.
pub fn caputo_kernel_derivative(alpha: FracOrder, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid(alloc::format!("kernel needs t > 0, got {t}")));
    }
    let a = alpha.get();
    Ok(-a * t.powf(-a - 1.0) / gamma(1.0 - a))
}

/// One row of an increment-bound report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IncrementRow {
    pub mu: f64,
    pub increment: f64,
    pub majorant: f64,
    pub ratio: f64,
}

/// Increment of `E_{α,1}(i^α t^α μ)` between two times against the
/// majorant `μ(t-s)^α + μ^{1/α}(t-s)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub alpha: f64,
    pub t: f64,
    pub s: f64,
    pub rows: Vec<IncrementRow>,
    /// Smallest constant making the bound hold on the grid.
    pub constant: f64,
    /// Same constant on the grid refined by geometric midpoints.
    pub refined_constant: f64,
    /// Set when refinement increases the constant by more than half.
    pub unbounded_growth: bool,
}

pub fn ml_increment_bound_report(
    alpha: FracOrder,
    mu_grid: &[f64],
    t: f64,
    s: f64,
) -> Result<BoundReport> {
    if mu_grid.is_empty() {
        return Err(invalid("mu grid is empty"));
    }
    if !(s < t) {
        return Err(invalid(alloc::format!("need s < t, got s={s}, t={t}")));
    }
    if mu_grid.iter().any(|&m| !(m > 0.0)) {
        return Err(invalid("mu values must be positive"));
    }
    let a = alpha.get();
    let p = MLParams::new(a, 1.0)?;
    let ia = i_pow(a);
    let row = |mu: f64| -> Result<IncrementRow> {
        let et = mittag_leffler(&p, ia * (t.powf(a) * mu))?;
        let es = mittag_leffler(&p, ia * (s.powf(a) * mu))?;
        let increment = (et - es).norm();
        let d = t - s;
        let majorant = mu * d.powf(a) + mu.powf(1.0 / a) * d;
        Ok(IncrementRow {
            mu,
            increment,
            majorant,
            ratio: increment / majorant,
        })
    };
    let mut sorted: Vec<f64> = mu_grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rows = sorted.iter().map(|&m| row(m)).collect::<Result<Vec<_>>>()?;
    let constant = rows.iter().fold(0.0f64, |c, r| c.max(r.ratio));
    let mut refined_constant = constant;
    for w in sorted.windows(2) {
        let mid = (w[0] * w[1]).sqrt();
        refined_constant = refined_constant.max(row(mid)?.ratio);
    }
    Ok(BoundReport {
        alpha: a,
        t,
        s,
        rows,
        constant,
        refined_constant,
        unbounded_growth: refined_constant > 1.5 * constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ml(a: f64, b: f64, z: Complex64) -> Complex64 {
        mittag_leffler(&MLParams::new(a, b).unwrap(), z).unwrap()
    }

    #[test]
    fn zero_argument_is_reciprocal_gamma() {
        assert_eq!(ml(0.7, 1.0, Complex64::new(0.0, 0.0)), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn order_one_is_exponential() {
        let v = ml(1.0, 1.0, Complex64::new(1.0, 0.0));
        assert!((v.re - core::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn half_order_at_minus_one() {
        // E_{1/2,1}(-1) = e·erfc(1)
        let v = ml(0.5, 1.0, Complex64::new(-1.0, 0.0));
        assert!((v.re - 0.427_583_576_155_807).abs() < 1e-14, "{v}");
    }

    #[test]
    fn complex_or_nonpositive_beta_rejected() {
        assert!(MLParams::new(0.5, 0.0).is_err());
        assert!(MLParams::new(0.5, -1.0).is_err());
        assert!(MLParams::new(1.5, 1.0).is_err());
    }

    #[test]
    fn non_finite_argument_rejected() {
        let p = MLParams::new(0.5, 1.0).unwrap();
        assert_eq!(
            mittag_leffler(&p, Complex64::new(f64::NAN, 0.0)),
            Err(Error::NonFinite)
        );
    }

    #[test]
    fn overflow_reports_exponent() {
        let p = MLParams::new(0.5, 1.0).unwrap();
        match mittag_leffler(&p, Complex64::new(40.0, 0.0)) {
            Err(Error::Overflow { exponent }) => assert!((exponent - 1600.0).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn kernel_values() {
        let a = FracOrder::new(0.5).unwrap();
        let sqrt_pi = PI.sqrt();
        assert!((caputo_kernel(a, 1.0).unwrap() - 1.0 / sqrt_pi).abs() < 1e-15);
        assert!((caputo_kernel(a, 4.0).unwrap() - 0.5 / sqrt_pi).abs() < 1e-15);
        assert!((caputo_kernel_derivative(a, 1.0).unwrap() + 0.5 / sqrt_pi).abs() < 1e-15);
        assert!(caputo_kernel(a, 0.0).is_err());
        assert!(caputo_kernel_derivative(a, -1.0).is_err());
    }

    #[test]
    fn frac_order_rejects_boundary() {
        assert!(FracOrder::new(0.0).is_err());
        assert!(FracOrder::new(1.0).is_err());
        assert!(FracOrder::new(0.3).is_ok());
    }

    #[test]
    fn zero_increment_at_same_point() {
        let a = FracOrder::new(0.5).unwrap();
        assert!(ml_increment_bound_report(a, &[1.0], 0.3, 0.3).is_err());
        let r = ml_increment_bound_report(a, &[1.0], 0.3 + 1e-300, 0.3).unwrap_err();
        assert!(matches!(r, Error::InvalidInput(_)));
    }
}
