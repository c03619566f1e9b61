//! Regularity diagnostics: Dini integrals, interpolation norms, the
//! `R`-operator study, symbol bounds and Hörmander kernel conditions.

use alloc::vec::Vec;
use core::f64::consts::LN_10;
use num_complex::Complex64;
#[allow(unused_imports)] // inherent in core on recent toolchains
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::funcalc::{cpow, log_grid, scalar_pairs, ContourSpec};
use crate::linalg::{as_real, c, is_symmetric, op_norm, real_mul, solve, weighted_norm, CMat, CVec, Spectral};
use crate::mlf::FracOrder;
use crate::quad::{log_panel_nodes, GaussLegendre};
use crate::triple::{form_to_operators, DiscreteTriple, NonAutonomousForm, OperatorPair};
use crate::volterra::{spectral_at, ProblemSpec};

/// Shape of a continuity modulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModulusKind {
    /// `c t^β`.
    Power { beta: f64, scale: f64 },
    /// `c t^β (1 + ln(1 + 1/t))^{-k}`, non-decreasing for `β, k ≥ 0`.
    PowerLog { beta: f64, k: f64, scale: f64 },
    /// Piecewise-linear interpolation of `(t, ω)` samples, anchored at
    /// `(0, 0)` and constant after the last sample.
    Table { t: Vec<f64>, omega: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiniModulus {
    pub kind: ModulusKind,
    #[serde(default)]
    pub monotone_checked: bool,
}

impl DiniModulus {
    pub fn power(beta: f64, scale: f64) -> Result<Self> {
        Self::checked(ModulusKind::Power { beta, scale })
    }

    pub fn power_log(beta: f64, k: f64, scale: f64) -> Result<Self> {
        Self::checked(ModulusKind::PowerLog { beta, k, scale })
    }

    pub fn table(t: Vec<f64>, omega: Vec<f64>) -> Result<Self> {
        Self::checked(ModulusKind::Table { t, omega })
    }

    /// The zero modulus of an autonomous form.
    pub fn zero() -> Self {
        Self {
            kind: ModulusKind::Power { beta: 1.0, scale: 0.0 },
            monotone_checked: true,
        }
    }

    pub fn checked(kind: ModulusKind) -> Result<Self> {
        let mut m = Self { kind, monotone_checked: false };
        m.validate()?;
        Ok(m)
    }

    /// Parameter checks plus monotonicity and `ω(0) = 0` on a sample grid.
    pub fn validate(&mut self) -> Result<()> {
        match &self.kind {
            ModulusKind::Power { beta, scale } => {
                if !(*beta > 0.0 && beta.is_finite() && *scale >= 0.0 && scale.is_finite()) {
                    return Err(invalid("power modulus needs beta > 0 and scale >= 0"));
                }
            }
            ModulusKind::PowerLog { beta, k, scale } => {
                if !(*beta >= 0.0 && *k >= 0.0 && *beta + *k > 0.0 && *scale >= 0.0) {
                    return Err(invalid("power_log modulus needs beta, k >= 0, not both 0, scale >= 0"));
                }
            }
            ModulusKind::Table { t, omega } => {
                if t.is_empty() || t.len() != omega.len() {
                    return Err(invalid("table modulus needs matching nonempty columns"));
                }
                if t[0] < 0.0 || t.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(invalid("table abscissae must be nonnegative and increasing"));
                }
                if t[0] == 0.0 && omega[0] != 0.0 {
                    return Err(invalid("table modulus must vanish at 0"));
                }
                if omega.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return Err(invalid("table modulus values must be finite and >= 0"));
                }
            }
        }
        let mut prev = self.eval(0.0);
        if prev != 0.0 {
            return Err(invalid("modulus must vanish at 0"));
        }
        for i in 0..=400 {
            let t = 10f64.powf(-12.0 + 13.0 * i as f64 / 400.0);
            let w = self.eval(t);
            if !(w >= prev * (1.0 - 1e-14)) {
                return Err(invalid(alloc::format!("modulus decreases near t = {t:e}")));
            }
            prev = w;
        }
        self.monotone_checked = true;
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            ModulusKind::Power { beta, scale } => scale * t.powf(*beta),
            ModulusKind::PowerLog { beta, k, scale } => {
                scale * t.powf(*beta) * (1.0 + (1.0 + 1.0 / t).ln()).powf(-k)
            }
            ModulusKind::Table { t: ts, omega } => {
                let (mut t0, mut w0) = (0.0, 0.0);
                for (&t1, &w1) in ts.iter().zip(omega) {
                    if t <= t1 {
                        if t1 == t0 {
                            return w1;
                        }
                        return w0 + (w1 - w0) * (t - t0) / (t1 - t0);
                    }
                    t0 = t1;
                    w0 = w1;
                }
                w0
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match &self.kind {
            ModulusKind::Power { scale, .. } | ModulusKind::PowerLog { scale, .. } => *scale == 0.0,
            ModulusKind::Table { omega, .. } => omega.iter().all(|w| *w == 0.0),
        }
    }

    /// `c·ω`.
    pub fn scaled(&self, c: f64) -> Self {
        let kind = match &self.kind {
            ModulusKind::Power { beta, scale } => ModulusKind::Power { beta: *beta, scale: scale * c },
            ModulusKind::PowerLog { beta, k, scale } => {
                ModulusKind::PowerLog { beta: *beta, k: *k, scale: scale * c }
            }
            ModulusKind::Table { t, omega } => ModulusKind::Table {
                t: t.clone(),
                omega: omega.iter().map(|w| w * c).collect(),
            },
        };
        Self { kind, monotone_checked: self.monotone_checked }
    }
}

/// Outcome of a singular integral `∫_0^τ` computed down to `ε = τ·10^{-K}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralReport {
    pub finite: bool,
    /// Extrapolated value when finite, otherwise the partial integral at
    /// the smallest `ε`.
    pub value: f64,
    pub eps_min: f64,
    /// Ratio of the last two per-decade contributions.
    pub tail_ratio: f64,
    /// Decay exponent `κ` of the per-decade contributions `~ d^{-κ}` when
    /// they are not geometric.
    pub algebraic_decay: Option<f64>,
    /// Growth of the partial integral per unit of `ln(1/ε)` when divergent.
    pub divergence_rate: Option<f64>,
    /// `(ε, ∫_ε^τ)` for `ε = τ, τ/10, …`.
    pub partial: Vec<(f64, f64)>,
}

const DECADES: usize = 60;

/// `∫_0^τ f(t) dt` given `g(t) = t·f(t)`, integrated in `ln t` one decade at
/// a time. Geometric decay of the decade contributions is extrapolated
/// exactly; algebraic decay `d^{-κ}` counts as finite only for `κ > 1.05`.
pub fn singular_integral(tau: f64, g: impl Fn(f64) -> f64) -> Result<IntegralReport> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(invalid("integration horizon must be positive"));
    }
    let rule = GaussLegendre::new(24);
    let ln10 = LN_10;
    let mut pieces = Vec::with_capacity(DECADES);
    let mut partial = Vec::with_capacity(DECADES + 1);
    let mut sum = 0.0;
    partial.push((tau, 0.0));
    let lt = tau.ln();
    for d in 0..DECADES {
        let hi = lt - ln10 * d as f64;
        let piece = rule.integrate(hi - ln10, hi, |x| g(x.exp()));
        if !piece.is_finite() || piece < 0.0 {
            return Err(invalid("integrand must be finite and nonnegative"));
        }
        pieces.push(piece);
        sum += piece;
        partial.push((tau * 10f64.powi(-(d as i32) - 1), sum));
    }
    let eps_min = partial[DECADES].0;
    let last = pieces[DECADES - 1];
    let mut rep = IntegralReport {
        finite: true,
        value: sum,
        eps_min,
        tail_ratio: 0.0,
        algebraic_decay: None,
        divergence_rate: None,
        partial,
    };
    if last <= 1e-300 || last <= 1e-17 * sum {
        return Ok(rep);
    }
    let prev = pieces[DECADES - 2];
    let r = last / prev;
    let r_back = pieces[DECADES - 11] / pieces[DECADES - 12];
    rep.tail_ratio = r;
    if r < 1.0 - 1e-9 && (r - r_back).abs() <= 1e-6 {
        rep.value = sum + last * r / (1.0 - r);
        return Ok(rep);
    }
    // sub-geometric: fit p_d ~ d^{-κ} over the last ten decades
    let (d1, d0) = (DECADES as f64, (DECADES - 10) as f64);
    let kappa = -(last / pieces[DECADES - 11]).ln() / (d1 / d0).ln();
    rep.algebraic_decay = Some(kappa);
    if kappa > 1.05 {
        rep.value = sum + last * d1 / (kappa - 1.0);
    } else {
        rep.finite = false;
        rep.divergence_rate = Some(last / ln10);
    }
    Ok(rep)
}

/// `∫_0^τ ω(t)/t^{1+α/2} dt`.
pub fn dini_check_a1(omega: &DiniModulus, alpha: FracOrder, tau: f64) -> Result<IntegralReport> {
    ensure_checked(omega)?;
    let e = alpha.get() / 2.0;
    singular_integral(tau, |t| omega.eval(t) * t.powf(-e))
}

/// `∫_0^τ (ω(t)/t^α)^p dt`.
pub fn dini_check_a2(omega: &DiniModulus, alpha: FracOrder, p: f64, tau: f64) -> Result<IntegralReport> {
    ensure_checked(omega)?;
    if !(p > 1.0 && p.is_finite()) {
        return Err(invalid("p must lie in (1, ∞)"));
    }
    let a = alpha.get();
    singular_integral(tau, |t| t * (omega.eval(t) * t.powf(-a)).powf(p))
}

/// `∫_0^τ e^{-δr} ω(r) r^{-1-α/2} dr`, the integral in the contraction bound.
pub fn contraction_integral(omega: &DiniModulus, alpha: FracOrder, tau: f64, delta: f64) -> Result<IntegralReport> {
    ensure_checked(omega)?;
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(invalid("delta must be finite and nonnegative"));
    }
    let e = alpha.get() / 2.0;
    singular_integral(tau, |t| (-delta * t).exp() * omega.eval(t) * t.powf(-e))
}

fn ensure_checked(omega: &DiniModulus) -> Result<()> {
    if omega.monotone_checked {
        Ok(())
    } else {
        omega.clone().validate()
    }
}

/// `‖x‖_H + [x]_{D_A(γ,p)}` with
/// `[x]^p = ∫_0^∞ (t^γ ‖A(t+A)^{-1}x‖_H)^p dt/t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterpolationNorm {
    pub h_norm: f64,
    pub seminorm: f64,
    pub norm: f64,
    pub t_min: f64,
    pub t_max: f64,
    /// Share of `[x]^p` supplied by the analytic tails outside `[t_min, t_max]`.
    pub tail_fraction: f64,
}

/// Log-spaced quadrature over a range padding the spectrum by at least four
/// decades each side (more when `γp` or `(1-γ)p` is small, so the tails
/// `~ t^{γp}` and `~ t^{(γ-1)p}` are negligible), plus those tails.
pub fn interpolation_norm(
    pair: &OperatorPair,
    triple: &DiscreteTriple,
    gamma: f64,
    p: f64,
    x: &CVec,
) -> Result<InterpolationNorm> {
    if gamma.is_nan() {
        return Err(Error::NonFinite);
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Divergent(alloc::format!(
            "interpolation tail diverges for gamma = {gamma}; need 0 < gamma < 1"
        )));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid("p must lie in [1, ∞)"));
    }
    if x.len() != triple.dim {
        return Err(Error::DimensionMismatch { expected: triple.dim, got: x.len() });
    }
    let gram = triple.gram_h();
    let h_norm = weighted_norm(x, &gram);
    if h_norm == 0.0 {
        return Ok(InterpolationNorm { h_norm: 0.0, seminorm: 0.0, norm: 0.0, t_min: 0.0, t_max: 0.0, tail_fraction: 0.0 });
    }
    // F(t) = ‖A(t+A)^{-1}x‖_H
    let real = as_real(&pair.form, 1e-14).filter(|b| is_symmetric(b, 1e-12));
    let (lo, hi, f): (f64, f64, alloc::boxed::Box<dyn Fn(f64) -> Result<f64>>) = match real {
        Some(b) => {
            let sp = Spectral::from_form(&b, &gram);
            if sp.eig[0] <= 0.0 {
                return Err(Error::NotCoercive(sp.eig[0]));
            }
            // V is H-orthonormal, so the norm is diagonal in the coefficients
            let y: Vec<f64> = real_mul(&sp.v_inv, x).iter().map(|z| z.norm_sqr()).collect();
            let (lo, hi) = (sp.eig[0], sp.eig[sp.dim() - 1]);
            let eig = sp.eig.clone();
            let f = move |t: f64| -> Result<f64> {
                Ok(eig.iter().zip(&y).map(|(a, y)| (a / (t + a)).powi(2) * y).sum::<f64>().sqrt())
            };
            (lo, hi, alloc::boxed::Box::new(f))
        }
        None => {
            let op = pair.op_h.clone();
            let lo = 1.0 / op_norm(&pair.op_vp_inv, &gram, &gram);
            let hi = op_norm(&op, &gram, &gram);
            let (x, g) = (x.clone(), gram.clone());
            let f = move |t: f64| -> Result<f64> {
                let mut m = op.clone();
                for i in 0..m.nrows() {
                    m[(i, i)] += t;
                }
                let y = solve(&m, &x).ok_or(Error::Singular)?;
                Ok(weighted_norm(&(&op * y), &g))
            };
            (lo, hi, alloc::boxed::Box::new(f))
        }
    };
    let gp = gamma * p;
    let hp = (1.0 - gamma) * p;
    let dec_lo = (13.0 / gp).max(4.0).min(lo.log10() + 290.0);
    let dec_hi = (13.0 / hp).max(4.0).min(290.0 - hi.log10());
    let (t_min, t_max) = (lo * 10f64.powf(-dec_lo), hi * 10f64.powf(dec_hi));
    let rule = GaussLegendre::new(20);
    // (t^γ F)^p / t, evaluated through logs to stay in range
    let dens = |t: f64| -> Result<f64> {
        let ft = f(t)?;
        if ft == 0.0 {
            return Ok(0.0);
        }
        Ok((p * (gamma * t.ln() + ft.ln())).exp())
    };
    let mut body = 0.0;
    for (t, w) in log_panel_nodes(&rule, t_min, t_max, 10.0) {
        body += dens(t)? * w / t;
    }
    let tails = dens(t_min)? / gp + dens(t_max)? / hp;
    let total = body + tails;
    let seminorm = total.powf(1.0 / p);
    Ok(InterpolationNorm {
        h_norm,
        seminorm,
        norm: h_norm + seminorm,
        t_min,
        t_max,
        tail_fraction: if total > 0.0 { tails / total } else { 0.0 },
    })
}

/// Position of `α` relative to `1/p`, which decides the space `u0` must lie in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialClass {
    /// `α < 1/p`: `u0 ∈ H`.
    Subcritical,
    /// `α = 1/p`: `u0 ∈ (H, D(A(0)))_{ε,2}`.
    Critical,
    /// `α > 1/p`: `u0 ∈ (H, D(A(0)))_{1-1/(αp),p}`.
    Supercritical,
}

pub fn initial_class(alpha: FracOrder, p: f64) -> InitialClass {
    let ap = alpha.get() * p;
    if (ap - 1.0).abs() <= 1e-12 {
        InitialClass::Critical
    } else if ap < 1.0 {
        InitialClass::Subcritical
    } else {
        InitialClass::Supercritical
    }
}

/// The `ε` of the critical case; any `ε > 0` is admissible.
pub const CRITICAL_EPSILON: f64 = 0.1;

/// Norm of `u0` in the class matching [`initial_class`].
pub fn initial_value_norm(pair: &OperatorPair, triple: &DiscreteTriple, alpha: FracOrder, p: f64, x: &CVec) -> Result<f64> {
    match initial_class(alpha, p) {
        InitialClass::Subcritical => Ok(weighted_norm(x, &triple.gram_h())),
        InitialClass::Critical => Ok(interpolation_norm(pair, triple, CRITICAL_EPSILON, 2.0, x)?.norm),
        InitialClass::Supercritical => {
            Ok(interpolation_norm(pair, triple, 1.0 - 1.0 / (alpha.get() * p), p, x)?.norm)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RStudyLevel {
    /// Lower end of the time quadrature; `[0, eps]` is added as `eps·‖Ru0(eps)‖^p`.
    pub eps: f64,
    pub nodes_per_decade: usize,
    pub lp_norm: f64,
    pub ratio: f64,
}

/// `‖Ru0‖_{L_p(0,τ;H)}`, `(Ru0)(t) = 𝒜(t)φ_t(t)u0`, against the norm of `u0`
/// in its class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RStudyReport {
    pub case: InitialClass,
    pub alpha: f64,
    pub p: f64,
    pub u0_h_norm: f64,
    pub u0_class_norm: f64,
    pub levels: Vec<RStudyLevel>,
    /// Relative change of the ratio between the last two levels.
    pub drift: f64,
    pub stable: bool,
    /// `sup_t ‖(R - R0)u0(t)‖_H t^α / (ω(t)‖u0‖_H)`, `R0` frozen at `t = 0`;
    /// computed in the supercritical case.
    pub remainder_constant: Option<f64>,
}

/// Drift below which a ratio counts as stable.
pub const RATIO_DRIFT_TOL: f64 = 0.05;

/// Level `k` integrates `[τ·10^{-4-2k}, τ]` with `8·2^k` Gauss nodes per
/// decade.
pub fn r_operator_study(prob: &ProblemSpec, spec: &ContourSpec, levels: usize) -> Result<RStudyReport> {
    spec.validate()?;
    if !(2..=6).contains(&levels) {
        return Err(invalid("levels must lie in 2..=6"));
    }
    let tau = prob.tau();
    let (alpha, p) = (prob.alpha, prob.p);
    let tr = &prob.triple;
    let gram = tr.gram_h();
    let case = initial_class(alpha, p);
    let u0 = &prob.u0;
    let h0 = weighted_norm(u0, &gram);
    let pair0 = form_to_operators(&prob.form, tr, 0.0)?;
    let class = initial_value_norm(&pair0, tr, alpha, p, u0)?;
    let mut report = RStudyReport {
        case,
        alpha: alpha.get(),
        p,
        u0_h_norm: h0,
        u0_class_norm: class,
        levels: Vec::with_capacity(levels),
        drift: 0.0,
        stable: true,
        remainder_constant: None,
    };
    let sp0 = spectral_at(&prob.form, tr, 0.0)?;
    let autonomous = prob.form.is_autonomous();
    let frozen = |sp: &Spectral, t: f64| -> Result<CVec> {
        let pairs = scalar_pairs(alpha, &sp.eig, t, spec)?;
        let vals: Vec<f64> = sp.eig.iter().zip(&pairs).map(|(a, q)| a * q[0]).collect();
        Ok(sp.apply(&vals, u0))
    };
    let r_at = |t: f64| -> Result<CVec> {
        if autonomous {
            frozen(&sp0, t)
        } else {
            frozen(&spectral_at(&prob.form, tr, t)?, t)
        }
    };
    let mut finest: Vec<f64> = Vec::new();
    for k in 0..levels {
        let eps = tau * 10f64.powi(-4 - 2 * k as i32);
        let per = 8usize << k;
        let rule = GaussLegendre::new(per);
        let mut acc = 0.0;
        let nodes = log_panel_nodes(&rule, eps, tau, 10.0);
        if h0 > 0.0 {
            for &(t, w) in &nodes {
                acc += weighted_norm(&r_at(t)?, &gram).powf(p) * w;
            }
            acc += eps * weighted_norm(&r_at(eps)?, &gram).powf(p);
        }
        let lp = acc.powf(1.0 / p);
        report.levels.push(RStudyLevel {
            eps,
            nodes_per_decade: per,
            lp_norm: lp,
            ratio: if class > 0.0 { lp / class } else { 0.0 },
        });
        if k + 1 == levels {
            finest = nodes.iter().map(|n| n.0).collect();
        }
    }
    let rs: Vec<f64> = report.levels.iter().map(|l| l.ratio).collect();
    let (a, b) = (rs[levels - 2], rs[levels - 1]);
    report.drift = if b > 0.0 { (b - a).abs() / b } else { 0.0 };
    report.stable = report.drift <= RATIO_DRIFT_TOL;
    if rs[0] > 0.0 && b > 2.0 * rs[0] {
        return Err(Error::Divergent(alloc::format!(
            "‖Ru0‖/‖u0‖ grows under refinement: {:.4e} -> {:.4e}",
            rs[0], b
        )));
    }
    if case == InitialClass::Supercritical {
        let mut sup = 0.0f64;
        if !autonomous && h0 > 0.0 {
            let al = alpha.get();
            for t in finest {
                let w = prob.form.omega.eval(t);
                let d = weighted_norm(&(r_at(t)? - frozen(&sp0, t)?), &gram);
                if d == 0.0 {
                    continue;
                }
                if w == 0.0 {
                    return Err(Error::Divergent(alloc::format!("R moves while ω({t:e}) = 0")));
                }
                sup = sup.max(d * t.powf(al) / (w * h0));
            }
        }
        report.remainder_constant = Some(sup);
    }
    Ok(report)
}

/// Log-spaced points on `[lo, hi]` with `per_decade` steps per decade.
pub fn decade_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let steps = ((hi / lo).log10() * per_decade as f64).ceil().max(1.0) as usize;
    log_grid(lo, hi, steps + 1)
}

/// `ξ = ±lo·10^{k/per}` up to `hi`, negative half first.
pub fn symmetric_xi_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let pos = decade_grid(lo, hi, per_decade);
    let mut out: Vec<f64> = pos.iter().rev().map(|x| -x).collect();
    out.extend(pos);
    out
}

/// Relative step of the ξ finite differences, in units of `|δ + iξ|`.
const XI_STEP: f64 = 5e-3;

/// `∂_ξ^k` of `a/((δ+iξ)^α + a)` for every eigenvalue `a`, `k = 0..=k_max`,
/// by Richardson-extrapolated central differences.
pub fn symbol_derivatives(eig: &[f64], alpha: FracOrder, delta: f64, xi: f64, k_max: usize) -> Vec<Vec<Complex64>> {
    let al = alpha.get();
    let sym = |x: f64| -> Vec<Complex64> {
        let za = cpow(c(delta, x), al);
        eig.iter().map(|&a| c(a, 0.0) / (za + a)).collect()
    };
    let h = XI_STEP * delta.hypot(xi);
    let s0 = sym(xi);
    let mut out = alloc::vec![s0.clone()];
    if k_max == 0 {
        return out;
    }
    let (p1, m1) = (sym(xi + h), sym(xi - h));
    let (p2, m2) = (sym(xi + h / 2.0), sym(xi - h / 2.0));
    let n = eig.len();
    let d1: Vec<Complex64> = (0..n)
        .map(|k| {
            let coarse = (p1[k] - m1[k]) / (2.0 * h);
            let fine = (p2[k] - m2[k]) / h;
            (fine * 4.0 - coarse) / 3.0
        })
        .collect();
    out.push(d1);
    if k_max >= 2 {
        let d2: Vec<Complex64> = (0..n)
            .map(|k| {
                let coarse = (p1[k] - s0[k] * 2.0 + m1[k]) / (h * h);
                let fine = (p2[k] - s0[k] * 2.0 + m2[k]) / (h * h / 4.0);
                (fine * 4.0 - coarse) / 3.0
            })
            .collect();
        out.push(d2);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolAtTime {
    pub t: f64,
    /// `sup_ξ ‖∂_ξ^k σ(t,ξ)‖ (1+ξ²)^{k/2}` for `k = 0..=k_max`.
    pub constants: Vec<f64>,
}

/// Smallest constants in `‖∂_ξ^k σ‖ ≤ C_k (1+ξ²)^{-k/2}` and
/// `‖∂_ξ^k σ(t,ξ) - ∂_ξ^k σ(t',ξ)‖ ≤ D_k ω(|t-t'|) (1+ξ²)^{-k/2}` on the
/// sampled points, `σ(t,ξ) = 𝒜(t)((iξ+δ)^α + 𝒜(t))^{-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolReport {
    pub alpha: f64,
    pub delta: f64,
    pub k_max: usize,
    pub constants: Vec<f64>,
    pub per_t: Vec<SymbolAtTime>,
    pub increment_constants: Vec<f64>,
    /// Per `k`: sup over the top decade of `|ξ|` divided by sup over the rest.
    pub growth: Vec<f64>,
}

/// Growth of a scaled derivative across the top decade that counts as
/// unbounded.
pub const SYMBOL_GROWTH_LIMIT: f64 = 10.0;

pub fn symbol_bounds_check(
    form: &NonAutonomousForm,
    triple: &DiscreteTriple,
    alpha: FracOrder,
    delta: f64,
    t_pairs: &[(f64, f64)],
    xi_grid: &[f64],
    k_max: usize,
) -> Result<SymbolReport> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid("delta must be positive"));
    }
    if k_max > 2 {
        return Err(invalid("derivatives are available up to order 2"));
    }
    if t_pairs.is_empty() {
        return Err(invalid("need at least one time pair"));
    }
    let amax = xi_grid.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let amin = xi_grid.iter().filter(|x| **x != 0.0).fold(f64::INFINITY, |m, x| m.min(x.abs()));
    let both = xi_grid.iter().any(|x| *x > 0.0) && xi_grid.iter().any(|x| *x < 0.0);
    if !both || !(amax >= 1e4 * amin) || xi_grid.iter().any(|x| !x.is_finite()) {
        return Err(invalid("ξ grid must take both signs and span at least four decades"));
    }
    let mut ts: Vec<f64> = t_pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let spectra: Vec<Spectral> = ts.iter().map(|&t| spectral_at(form, triple, t)).collect::<Result<_>>()?;
    let idx = |t: f64| ts.iter().position(|&s| s == t).unwrap_or(0);
    let weight = |k: usize, xi: f64| (1.0 + xi * xi).powf(k as f64 / 2.0);
    let mut per_t = Vec::with_capacity(ts.len());
    let mut top = alloc::vec![0.0f64; k_max + 1];
    let mut rest = alloc::vec![0.0f64; k_max + 1];
    for (t, sp) in ts.iter().zip(&spectra) {
        let mut consts = alloc::vec![0.0f64; k_max + 1];
        for &xi in xi_grid {
            let d = symbol_derivatives(&sp.eig, alpha, delta, xi, k_max);
            for k in 0..=k_max {
                // V is H-orthonormal: the operator norm is the largest entry
                let v = d[k].iter().fold(0.0f64, |m, z| m.max(z.norm())) * weight(k, xi);
                consts[k] = consts[k].max(v);
                if xi.abs() * 10.0 >= amax {
                    top[k] = top[k].max(v);
                } else {
                    rest[k] = rest[k].max(v);
                }
            }
        }
        per_t.push(SymbolAtTime { t: *t, constants: consts });
    }
    let growth: Vec<f64> = top.iter().zip(&rest).map(|(a, b)| if *b > 0.0 { a / b } else { 0.0 }).collect();
    if let Some(k) = growth.iter().position(|g| *g > SYMBOL_GROWTH_LIMIT) {
        return Err(Error::Divergent(alloc::format!(
            "scaled ∂^{k}σ grows by {:.3e} over the top ξ decade",
            growth[k]
        )));
    }
    let constants: Vec<f64> =
        (0..=k_max).map(|k| per_t.iter().fold(0.0f64, |m, r| m.max(r.constants[k]))).collect();

    let gram = triple.gram_h();
    let mut inc = alloc::vec![0.0f64; k_max + 1];
    for &(t1, t2) in t_pairs {
        let (s1, s2) = (&spectra[idx(t1)], &spectra[idx(t2)]);
        let w = form.omega.eval((t1 - t2).abs());
        for &xi in xi_grid {
            let d1 = symbol_derivatives(&s1.eig, alpha, delta, xi, k_max);
            let d2 = symbol_derivatives(&s2.eig, alpha, delta, xi, k_max);
            for k in 0..=k_max {
                let m = diag_matrix(s1, &d1[k]) - diag_matrix(s2, &d2[k]);
                let norm = op_norm(&m, &gram, &gram) * weight(k, xi);
                if norm <= 1e-14 * constants[k] {
                    continue;
                }
                if w == 0.0 {
                    return Err(Error::Divergent(alloc::format!(
                        "σ moves between t = {t1} and {t2} while ω vanishes"
                    )));
                }
                inc[k] = inc[k].max(norm / w);
            }
        }
    }
    Ok(SymbolReport {
        alpha: alpha.get(),
        delta,
        k_max,
        constants,
        per_t,
        increment_constants: inc,
        growth,
    })
}

fn diag_matrix(sp: &Spectral, vals: &[Complex64]) -> CMat {
    let n = sp.dim();
    let vd = CMat::from_fn(n, n, |i, k| vals[k] * sp.v[(i, k)]);
    vd * sp.v_inv.map(|x| c(x, 0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HormanderRow {
    pub s: f64,
    pub s_prime: f64,
    pub gap: f64,
    /// `∫_{|t-s| ≥ 2|s'-s|} ‖K(t,s) - K(t,s')‖ dt`.
    pub first: f64,
    /// `∫ |1/(t-s') - 1/(t-s)| dt` over the same region within `(0,τ)`;
    /// at most `ln 2`.
    pub first_envelope: f64,
    /// `first / (C · first_envelope)`.
    pub first_ratio: f64,
    /// `∫_{|t-s| ≥ 2|s'-s|} ‖K(s,t) - K(s',t)‖ dt`.
    pub transposed: f64,
    /// Part of the transposed integral from moving the operator at a fixed lag.
    pub transposed_operator_part: f64,
    /// Part from moving the lag at the fixed operator `𝒜(s')`.
    pub transposed_lag_part: f64,
    /// `∫_{2|s-s'|}^{s} ω(r)/r dr`.
    pub omega_envelope: f64,
}

/// Hörmander integrals for `K(t,s) = 1_{s≤t} 𝒜(t)ψ_t(t-s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HormanderReport {
    /// `C = sup r²‖∂_r 𝒜(t)ψ_t(r)‖` over sampled `t` and `r ∈ [min gap, τ]`.
    pub kernel_constant: f64,
    /// `C ln 2`.
    pub first_bound: f64,
    pub rows: Vec<HormanderRow>,
    pub sup_first: f64,
    pub sup_transposed: f64,
}

/// Relative step of the lag finite differences.
const LAG_STEP: f64 = 5e-3;

/// `max_k a_k |∂_r ψ_{a_k}(r)|` with Richardson-extrapolated differences.
fn kernel_derivative_norm(alpha: FracOrder, eig: &[f64], r: f64, spec: &ContourSpec) -> Result<f64> {
    let h = LAG_STEP * r;
    let at = |x: f64| scalar_pairs(alpha, eig, x, spec);
    let (p1, m1, p2, m2) = (at(r + h)?, at(r - h)?, at(r + h / 2.0)?, at(r - h / 2.0)?);
    let mut m = 0.0f64;
    for (k, a) in eig.iter().enumerate() {
        let coarse = (p1[k][1] - m1[k][1]) / (2.0 * h);
        let fine = (p2[k][1] - m2[k][1]) / h;
        m = m.max(a * ((4.0 * fine - coarse) / 3.0).abs());
    }
    Ok(m)
}

pub fn hormander_check(
    form: &NonAutonomousForm,
    triple: &DiscreteTriple,
    alpha: FracOrder,
    spec: &ContourSpec,
    s_pairs: &[(f64, f64)],
) -> Result<HormanderReport> {
    spec.validate()?;
    let tau = form.tau;
    if s_pairs.is_empty() {
        return Err(invalid("need at least one (s, s') pair"));
    }
    for &(s, sp) in s_pairs {
        if !(s > 0.0 && s < tau && sp > 0.0 && sp < tau && s != sp) {
            return Err(invalid(alloc::format!("pair ({s}, {sp}) must be distinct points of (0, τ)")));
        }
    }
    let autonomous = form.is_autonomous();
    let sp0 = spectral_at(form, triple, 0.0)?;
    let spectral = |t: f64| -> Result<Spectral> {
        if autonomous {
            Ok(sp0.clone())
        } else {
            spectral_at(form, triple, t)
        }
    };
    let min_gap = s_pairs.iter().fold(f64::INFINITY, |m, (a, b)| m.min((a - b).abs()));
    let t_samples: Vec<f64> =
        if autonomous { alloc::vec![0.0] } else { (0..=4).map(|k| tau * k as f64 / 4.0).collect() };
    let mut c_k = 0.0f64;
    for &t in &t_samples {
        let sp = spectral(t)?;
        for r in decade_grid(min_gap, tau, 16) {
            c_k = c_k.max(r * r * kernel_derivative_norm(alpha, &sp.eig, r, spec)?);
        }
    }
    let gram = triple.gram_h();
    let rule = GaussLegendre::new(16);
    let panel = 10f64.sqrt();
    let psi = |eig: &[f64], r: f64| -> Result<Vec<f64>> {
        Ok(scalar_pairs(alpha, eig, r, spec)?.iter().zip(eig).map(|(q, a)| a * q[1]).collect())
    };
    let mut rows = Vec::with_capacity(s_pairs.len());
    for &(s, s_prime) in s_pairs {
        let gap = (s - s_prime).abs();
        let shift = s - s_prime;
        // first integral: t = s + r, r ∈ [2 gap, τ - s]
        let (mut first, mut env1) = (0.0, 0.0);
        if tau - s > 2.0 * gap {
            for (r, w) in log_panel_nodes(&rule, 2.0 * gap, tau - s, panel) {
                let sp = spectral(s + r)?;
                let (k1, k2) = (psi(&sp.eig, r)?, psi(&sp.eig, r + shift)?);
                let d = k1.iter().zip(&k2).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                first += d * w;
            }
            let prim = |t: f64| (t - s_prime).ln() - (t - s).ln();
            env1 = (prim(tau) - prim(s + 2.0 * gap)).abs();
        }
        // transposed: t = s - r, r ∈ [2 gap, s]
        let (mut tr_total, mut tr_op, mut tr_lag, mut env_w) = (0.0, 0.0, 0.0, 0.0);
        if s > 2.0 * gap {
            let (ss, ssp) = (spectral(s)?, spectral(s_prime)?);
            for (r, w) in log_panel_nodes(&rule, 2.0 * gap, s, panel) {
                let a = psi(&ss.eig, r)?;
                let b = psi(&ssp.eig, r)?;
                let bl = psi(&ssp.eig, r - shift)?;
                let to_c = |v: &[f64]| v.iter().map(|x| c(*x, 0.0)).collect::<Vec<_>>();
                let (ma, mb, mbl) = (diag_matrix(&ss, &to_c(&a)), diag_matrix(&ssp, &to_c(&b)), diag_matrix(&ssp, &to_c(&bl)));
                tr_total += op_norm(&(&ma - &mbl), &gram, &gram) * w;
                tr_op += op_norm(&(&ma - &mb), &gram, &gram) * w;
                tr_lag += b.iter().zip(&bl).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) * w;
                env_w += form.omega.eval(r) / r * w;
            }
        }
        let ratio = if c_k * env1 > 0.0 { first / (c_k * env1) } else { 0.0 };
        if ratio > 2.0 {
            return Err(Error::Divergent(alloc::format!(
                "kernel difference at gap {gap:e} exceeds twice its r^-2 envelope (ratio {ratio:.3})"
            )));
        }
        rows.push(HormanderRow {
            s,
            s_prime,
            gap,
            first,
            first_envelope: env1,
            first_ratio: ratio,
            transposed: tr_total,
            transposed_operator_part: tr_op,
            transposed_lag_part: tr_lag,
            omega_envelope: env_w,
        });
    }
    let sup_first = rows.iter().fold(0.0f64, |m, r| m.max(r.first));
    let sup_transposed = rows.iter().fold(0.0f64, |m, r| m.max(r.transposed));
    Ok(HormanderReport {
        kernel_constant: c_k,
        first_bound: c_k * core::f64::consts::LN_2,
        rows,
        sup_first,
        sup_transposed,
    })
}
