//! A time-dependent form whose solutions lack maximal regularity.
//!
//! On `(0,1]` take `w = x^{-a}` (so `V = L₂(w dx)`), `φ = x^{-b}` and
//! `c = x^c`, and let `u(t,x) = c(x) E_{α,1}(i^α t^α φ(x))`. Then
//! `∂_t^α u = i^α φ u`, and for the defaults `a = b = 3/2`, `c = 1` the
//! solution stays bounded in `V` and `∂_t^α u` in `V′` while `‖φc‖_H`
//! diverges like `ln(1/ε)` on `[ε,1]`. A form is built around `u` by
//! extending the rank-one map `u ↦ w^{-1}(f - ∂_t^α u)` to all of `V`
//! without losing accretivity.
//!
//! The source is `f = ρ i^{α-1} u`. For `ρ = 1` the form is not accretive on
//! `span{u(t)}`, because
//! `Re (f - ∂_t^α u, u)_H = ρ sin(πα/2)‖u‖_H² - cos(πα/2)‖φ^{1/2}u‖_H²`
//! and `φ ≥ 1`. [`calibrate`] measures both norms and picks `ρ` so that the
//! real part stays positive with margin.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use nalgebra::Matrix2;
use num_complex::Complex64;
#[allow(unused_imports)] // inherent in core on recent toolchains
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fracops::{lp_time_norm, lp_time_norm_range, product_rule_remainder, SpaceTag, TimeGrid, Trajectory};
use crate::funcalc::{fit, log_grid, SlopeFit};
use crate::linalg::{c, spectral_norm, weighted_inner, weighted_norm, CMat, CVec};
use crate::mlf::{i_pow, ml_oscillatory, FracOrder, MLParams};
use crate::triple::{build_geometric_triple, build_weighted_triple, DiscreteTriple};

/// Relative size below which `Re(Te₁,e₁) < 0` is treated as round-off.
const ACCRETIVE_TOL: f64 = 1e-14;
/// Relative size of `κ` below which `T e₁` is taken to lie in `span{e₁}`.
const DEGENERATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BadFunctionSpec {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: FracOrder,
    /// Fixed source amplitude `ρ`; calibrated when absent.
    #[serde(default)]
    pub source_scale: Option<f64>,
}

impl BadFunctionSpec {
    /// `a = b = 3/2`, `c = 1`.
    pub fn new(alpha: FracOrder) -> Self {
        Self { a: 1.5, b: 1.5, c: 1.0, alpha, source_scale: None }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a", self.a), ("b", self.b), ("c", self.c)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!("exponent {name} must be finite and >= 0, got {v}")));
            }
        }
        if let Some(r) = self.source_scale {
            if !(r > 0.0 && r.is_finite()) {
                return Err(invalid(format!("source scale must be finite and > 0, got {r}")));
            }
        }
        Ok(())
    }

    pub fn weight(&self, x: f64) -> f64 {
        x.powf(-self.a)
    }

    pub fn phase(&self, x: f64) -> f64 {
        x.powf(-self.b)
    }

    pub fn amplitude(&self, x: f64) -> f64 {
        x.powf(self.c)
    }

    /// Geometric triple on `[eps, 1]` with about `per_decade` cells per decade.
    pub fn geometric_triple(&self, eps: f64, per_decade: usize) -> Result<DiscreteTriple> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(invalid(format!("truncation must lie in (0,1), got {eps}")));
        }
        let n = ((-eps.log10()) * per_decade as f64).ceil() as usize;
        build_geometric_triple(n.max(2), eps, |x| self.weight(x))
    }

    /// Uniform midpoint triple; it resolves down to `eps = x₁/2`.
    pub fn uniform_triple(&self, n: usize) -> Result<DiscreteTriple> {
        build_weighted_triple(n, |x| self.weight(x))
    }
}

/// `u(t, x_j)` at the given nodes.
pub fn bad_function(spec: &BadFunctionSpec, t: f64, nodes: &[f64]) -> Result<CVec> {
    spec.validate()?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid(format!("time must be finite and >= 0, got {t}")));
    }
    let p = MLParams::new(spec.alpha.get(), 1.0)?;
    let ta = t.powf(spec.alpha.get());
    let vals = nodes
        .iter()
        .map(|&x| {
            if !(x > 0.0 && x <= 1.0) {
                return Err(invalid(format!("nodes must lie in (0,1], got {x}")));
            }
            Ok(ml_oscillatory(&p, ta * spec.phase(x))? * spec.amplitude(x))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CVec::from_vec(vals))
}

/// `f = ρ i^{α-1} u`.
pub fn bad_source(spec: &BadFunctionSpec, rho: f64, u: &CVec) -> CVec {
    u * (i_pow(spec.alpha.get() - 1.0) * rho)
}

/// `∂_t^α u = i^α φ u`, entrywise.
pub fn bad_derivative(spec: &BadFunctionSpec, nodes: &[f64], u: &CVec) -> CVec {
    let ia = i_pow(spec.alpha.get());
    CVec::from_iterator(u.len(), u.iter().zip(nodes).map(|(z, &x)| z * ia * spec.phase(x)))
}

fn power_integral(k: f64, eps: f64) -> f64 {
    if (k + 1.0).abs() < 1e-12 {
        -eps.ln()
    } else {
        (1.0 - eps.powf(k + 1.0)) / (k + 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionRow {
    pub eps: f64,
    pub n_x: usize,
    /// `‖φc‖_H²`, divergent for the defaults.
    pub phi_c_h: f64,
    /// `∫_ε¹ |φc|² dx` in closed form.
    pub phi_c_h_exact: f64,
    /// `‖c‖_V²`.
    pub c_v: f64,
    /// `‖φc‖_{V′}²`.
    pub phi_c_vp: f64,
    /// `‖φ^{1/2}c‖_H²`.
    pub phi_half_c_h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionLimits {
    /// `∫_0^1` limits of the four integrals; `None` where it diverges.
    pub phi_c_h: Option<f64>,
    pub c_v: Option<f64>,
    pub phi_c_vp: Option<f64>,
    pub phi_half_c_h: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// One row per truncation, geometric triples.
    pub rows: Vec<ConditionRow>,
    /// Uniform midpoint triple, truncated at half the first node.
    pub uniform: ConditionRow,
    pub limits: ConditionLimits,
    /// Least-squares fit `‖φc‖_H² ≈ slope·ln(1/ε) + intercept`.
    pub log_slope: f64,
    pub log_intercept: f64,
}

fn condition_row(spec: &BadFunctionSpec, tr: &DiscreteTriple) -> ConditionRow {
    let mut row = ConditionRow {
        eps: tr.eps(),
        n_x: tr.dim,
        phi_c_h: 0.0,
        phi_c_h_exact: power_integral(2.0 * (spec.c - spec.b), tr.eps()),
        c_v: 0.0,
        phi_c_vp: 0.0,
        phi_half_c_h: 0.0,
    };
    for j in 0..tr.dim {
        let (x, q, w) = (tr.nodes[j], tr.quad_weights[j], tr.weight_w[j]);
        let (phi, cx) = (spec.phase(x), spec.amplitude(x));
        row.phi_c_h += q * (phi * cx).powi(2);
        row.c_v += q * w * cx * cx;
        row.phi_c_vp += q / w * (phi * cx).powi(2);
        row.phi_half_c_h += q * phi * cx * cx;
    }
    row
}

/// Quadrature of the integrals behind the three conditions on geometric
/// triples truncated at each `eps`, plus one uniform triple with `n_uniform`
/// nodes.
pub fn condition_checks(
    spec: &BadFunctionSpec,
    eps_list: &[f64],
    per_decade: usize,
    n_uniform: usize,
) -> Result<ConditionReport> {
    spec.validate()?;
    if eps_list.is_empty() {
        return Err(invalid("need at least one truncation"));
    }
    let rows = eps_list
        .iter()
        .map(|&e| spec.geometric_triple(e, per_decade).map(|tr| condition_row(spec, &tr)))
        .collect::<Result<Vec<_>>>()?;
    let uniform = condition_row(spec, &spec.uniform_triple(n_uniform)?);
    let lim = |k: f64| (k > -1.0).then(|| 1.0 / (k + 1.0));
    let (a, b, cc) = (spec.a, spec.b, spec.c);
    let limits = ConditionLimits {
        phi_c_h: lim(2.0 * (cc - b)),
        c_v: lim(2.0 * cc - a),
        phi_c_vp: lim(2.0 * (cc - b) + a),
        phi_half_c_h: lim(2.0 * cc - b),
    };
    let xs: Vec<f64> = rows.iter().map(|r| -r.eps.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.phi_c_h).collect();
    let (log_slope, log_intercept) = linear_fit(&xs, &ys);
    Ok(ConditionReport { rows, uniform, limits, log_slope, log_intercept })
}

fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return (f64::NAN, my);
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxy / sxx, my - sxy / sxx * mx)
}

/// Norm ratios of `u(t)` at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub t: f64,
    /// `‖u‖_H² / ‖u‖_V²`.
    pub h: f64,
    /// `‖φ^{1/2}u‖_H² / ‖u‖_V²`.
    pub p: f64,
    /// `‖∂u‖_H²/‖φc‖_H²`, `‖u‖_V²/‖c‖_V²`, `‖∂u‖_{V′}²/‖φc‖_{V′}²`,
    /// `‖u‖_H²/‖c‖_H²`.
    pub m: [f64; 4],
    /// `Re (f - ∂u, u)_H / ‖u‖_V²`.
    pub coercivity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub rho: f64,
    /// Smallest sampled `Re (f - ∂u, u)_H / ‖u‖_V²`. The extended form is
    /// coercive with constant `γ/2`.
    pub gamma: f64,
    pub eps: f64,
    pub rows: Vec<CalibrationRow>,
    /// `[min, max]` of each `m_i` over the samples.
    pub m_ranges: [[f64; 2]; 4],
}

/// Samples `t = 0` and `n_t` log-spaced times in `[10⁻³τ, τ]`. Unless the
/// spec fixes it, `ρ = 2 sup_t cos(πα/2) p(t) / (sin(πα/2) h(t))`, which
/// leaves `Re(f - ∂u, u)_H ≥ cos(πα/2)‖φ^{1/2}u‖_H²` at every sample.
pub fn calibrate(spec: &BadFunctionSpec, triple: &DiscreteTriple, tau: f64, n_t: usize) -> Result<Calibration> {
    spec.validate()?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(invalid(format!("horizon must be finite and > 0, got {tau}")));
    }
    let al = spec.alpha.get();
    let (sn, cs) = ((0.5 * PI * al).sin(), (0.5 * PI * al).cos());
    let mut ts = alloc::vec![0.0];
    ts.extend(log_grid(1e-3 * tau, tau, n_t.max(2)));
    let c0 = bad_function(spec, 0.0, &triple.nodes)?;
    let d0 = bad_derivative(spec, &triple.nodes, &c0);
    let refs = [
        triple.norm(SpaceTag::H, &d0).powi(2),
        triple.norm(SpaceTag::V, &c0).powi(2),
        triple.norm(SpaceTag::Vp, &d0).powi(2),
        triple.norm(SpaceTag::H, &c0).powi(2),
    ];
    let mut rows = Vec::with_capacity(ts.len());
    for &t in &ts {
        let u = bad_function(spec, t, &triple.nodes)?;
        let du = bad_derivative(spec, &triple.nodes, &u);
        let uh = triple.norm(SpaceTag::H, &u).powi(2);
        let uv = triple.norm(SpaceTag::V, &u).powi(2);
        let ph: f64 = (0..triple.dim)
            .map(|j| triple.quad_weights[j] * spec.phase(triple.nodes[j]) * u[j].norm_sqr())
            .sum();
        let m = [
            triple.norm(SpaceTag::H, &du).powi(2) / refs[0],
            uv / refs[1],
            triple.norm(SpaceTag::Vp, &du).powi(2) / refs[2],
            uh / refs[3],
        ];
        rows.push(CalibrationRow { t, h: uh / uv, p: ph / uv, m, coercivity: 0.0 });
    }
    let rho = match spec.source_scale {
        Some(r) => r,
        None => 2.0 * rows.iter().map(|r| cs * r.p / (sn * r.h)).fold(0.0, f64::max),
    };
    for r in &mut rows {
        r.coercivity = rho * sn * r.h - cs * r.p;
    }
    let gamma = rows.iter().map(|r| r.coercivity).fold(f64::INFINITY, f64::min);
    let mut m_ranges = [[f64::INFINITY, 0.0]; 4];
    for r in &rows {
        for (k, v) in r.m.iter().enumerate() {
            m_ranges[k][0] = m_ranges[k][0].min(*v);
            m_ranges[k][1] = m_ranges[k][1].max(*v);
        }
    }
    Ok(Calibration { rho, gamma, eps: triple.eps(), rows, m_ranges })
}

/// Extension of a map `T` given on a line `U = span{e₁}` of `V` to all of
/// `V`. On `span{e₁, e₂}`, with `e₂` the normalized part of `Te₁`
/// orthogonal to `e₁`, it acts by `s` (columns `Ŝe₁`, `Ŝe₂` in the basis
/// `e₁, e₂`); it vanishes on the orthogonal complement.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedOperator {
    pub gram: Vec<f64>,
    pub e1: CVec,
    /// `None` when `Te₁ ∈ span{e₁}` and the extension is trivial.
    pub e2: Option<CVec>,
    pub s: Matrix2<Complex64>,
    /// `‖T‖ = ‖Te₁‖_V`.
    pub t_norm: f64,
}

/// Eigenvalues of the Hermitian matrix `[[p, q], [q̄, r]]`, ascending.
fn herm2_eigs(p: f64, r: f64, q: Complex64) -> (f64, f64) {
    let m = 0.5 * (p + r);
    let d = (0.25 * (p - r) * (p - r) + q.norm_sqr()).sqrt();
    (m - d, m + d)
}

fn norm2(s: &Matrix2<Complex64>) -> f64 {
    let g = s.adjoint() * s;
    herm2_eigs(g[(0, 0)].re, g[(1, 1)].re, g[(0, 1)]).1.max(0.0).sqrt()
}

impl ExtendedOperator {
    /// `((y,e₁)_V, (y,e₂)_V)`.
    pub fn coords(&self, y: &CVec) -> (Complex64, Complex64) {
        let y1 = weighted_inner(y, &self.e1, &self.gram);
        let y2 = self.e2.as_ref().map_or(c(0.0, 0.0), |e2| weighted_inner(y, e2, &self.gram));
        (y1, y2)
    }

    pub fn apply(&self, y: &CVec) -> CVec {
        let (y1, y2) = self.coords(y);
        let s = &self.s;
        let mut out = &self.e1 * (s[(0, 0)] * y1 + s[(0, 1)] * y2);
        if let Some(e2) = &self.e2 {
            out += e2 * (s[(1, 0)] * y1 + s[(1, 1)] * y2);
        }
        out
    }

    /// Orthogonal projection onto `span{e₁, e₂}`.
    pub fn project(&self, y: &CVec) -> CVec {
        let (y1, y2) = self.coords(y);
        let mut out = &self.e1 * y1;
        if let Some(e2) = &self.e2 {
            out += e2 * y2;
        }
        out
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.s)
    }

    /// `inf Re(Ŝy,y)_V` over unit `y ∈ V`. Never positive since `Ŝ`
    /// vanishes off the span.
    pub fn min_numerical_range_re(&self) -> f64 {
        let s = &self.s;
        let q = 0.5 * (s[(0, 1)] + s[(1, 0)].conj());
        herm2_eigs(s[(0, 0)].re, s[(1, 1)].re, q).0.min(0.0)
    }
}

/// Builds `Ŝ` from `u` spanning `U` and `tu = T u`: `Ŝe₁ = Te₁` and
/// `Ŝe₂ = -conj((Te₁,e₂)_V) e₁`. Then `Re(Ŝy,y)_V = |y₁|² Re(Te₁,e₁)_V`
/// and `‖Ŝ‖ ≤ √2‖T‖`.
pub fn extend_numerical_range(gram: &[f64], u: &CVec, tu: &CVec) -> Result<ExtendedOperator> {
    if u.len() != gram.len() || tu.len() != gram.len() {
        return Err(Error::DimensionMismatch { expected: gram.len(), got: u.len().max(tu.len()) });
    }
    let nu = weighted_norm(u, gram);
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(invalid("U must be spanned by a nonzero finite vector"));
    }
    let e1 = u / c(nu, 0.0);
    let te1 = tu / c(nu, 0.0);
    let t_norm = weighted_norm(&te1, gram);
    let t11 = weighted_inner(&te1, &e1, gram);
    if t11.re < -ACCRETIVE_TOL * t_norm {
        return Err(invalid(format!("Re(Te1, e1) = {:e} < 0: T is not accretive on U", t11.re)));
    }
    let kappa = &te1 - &e1 * t11;
    let kn = weighted_norm(&kappa, gram);
    let zero = c(0.0, 0.0);
    let (e2, s) = if kn <= DEGENERATE_TOL * t_norm.max(f64::MIN_POSITIVE) {
        (None, Matrix2::new(t11, zero, zero, zero))
    } else {
        let t21 = c(kn, 0.0);
        (Some(kappa / t21), Matrix2::new(t11, -t21.conj(), t21, zero))
    };
    Ok(ExtendedOperator { gram: gram.to_vec(), e1, e2, s, t_norm })
}

/// The extended form at one time:
/// `a(t,y₁,y₂) = (Ŝ_t P_t y₁, P_t y₂)_V + (γ/2)(y₁,y₂)_V`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionState {
    pub t: f64,
    pub gamma: f64,
    pub rho: f64,
    pub u: CVec,
    pub u_norm_v: f64,
    /// `T_t e₁ = w^{-1}(f - ∂u)/‖u‖_V - (γ/2)e₁`.
    pub t_e1: CVec,
    /// `T_t u - (T_t u, e₁)_V e₁`. Named κ to keep `k` for the Caputo kernel.
    pub kappa: CVec,
    /// `‖f - ∂u‖_{V′} / ‖u‖_V`, the norm of `b(t,·,·)` on `span{u}`.
    pub m: f64,
    pub op: ExtendedOperator,
}

impl ExtensionState {
    pub fn e1(&self) -> &CVec {
        &self.op.e1
    }

    pub fn eval(&self, y1: &CVec, y2: &CVec) -> Complex64 {
        weighted_inner(&self.op.apply(y1), y2, &self.op.gram)
            + weighted_inner(y1, y2, &self.op.gram) * (0.5 * self.gamma)
    }

    /// Matrix `B` with `a(y₁,y₂) = y₂* B y₁`.
    pub fn matrix(&self) -> CMat {
        let g = &self.op.gram;
        let gv = |e: &CVec| CVec::from_iterator(e.len(), e.iter().zip(g).map(|(z, w)| z * *w));
        let mut basis = alloc::vec![&self.op.e1];
        if let Some(e2) = &self.op.e2 {
            basis.push(e2);
        }
        let mut b = CMat::from_diagonal(&CVec::from_iterator(g.len(), g.iter().map(|w| c(0.5 * self.gamma * w, 0.0))));
        for e in basis {
            b += gv(&self.op.apply(e)) * gv(e).adjoint();
        }
        b
    }

    /// `‖a(t)‖` on `V × V`.
    pub fn norm(&self) -> f64 {
        let hg = c(0.5 * self.gamma, 0.0);
        let shifted = self.op.s + Matrix2::new(hg, c(0.0, 0.0), c(0.0, 0.0), hg);
        norm2(&shifted).max(0.5 * self.gamma)
    }

    /// Best `γ'` with `Re a(y,y) ≥ γ'‖y‖_V²`.
    pub fn coercivity(&self) -> f64 {
        0.5 * self.gamma + self.op.min_numerical_range_re()
    }

    /// `√2(M + γ/2 + 2γ⁻¹(M + γ/2)²) + γ/2`.
    pub fn norm_bound(&self) -> f64 {
        let mg = self.m + 0.5 * self.gamma;
        2f64.sqrt() * (mg + 2.0 / self.gamma * mg * mg) + 0.5 * self.gamma
    }
}

pub fn build_extended_form(
    spec: &BadFunctionSpec,
    triple: &DiscreteTriple,
    t: f64,
    cal: &Calibration,
) -> Result<ExtensionState> {
    if !(cal.gamma > 0.0) {
        return Err(Error::NotCoercive(cal.gamma));
    }
    let u = bad_function(spec, t, &triple.nodes)?;
    let z = bad_source(spec, cal.rho, &u) - bad_derivative(spec, &triple.nodes, &u);
    let gram = triple.gram_v();
    let u_norm_v = weighted_norm(&u, &gram);
    if !(u_norm_v > 0.0) {
        return Err(invalid("u(t) vanishes in V"));
    }
    let hg = c(0.5 * cal.gamma, 0.0);
    let tu = CVec::from_iterator(u.len(), z.iter().zip(&triple.weight_w).map(|(z, w)| z / *w)) - &u * hg;
    let op = extend_numerical_range(&gram, &u, &tu)?;
    let kappa = &tu - &op.e1 * weighted_inner(&tu, &op.e1, &gram);
    Ok(ExtensionState {
        t,
        gamma: cal.gamma,
        rho: cal.rho,
        m: triple.norm(SpaceTag::Vp, &z) / u_norm_v,
        t_e1: tu / c(u_norm_v, 0.0),
        u,
        u_norm_v,
        kappa,
        op,
    })
}

/// Randomized checks of one extended form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtensionCheck {
    pub t: f64,
    pub seed: u64,
    pub samples: usize,
    /// Worst `|a(u,v) - (f,v)_H + (∂u,v)_H| / (M‖u‖_V‖v‖_V)`.
    pub consistency: f64,
    /// Smallest sampled `Re a(y,y) / ‖y‖_V²`.
    pub min_sampled_re: f64,
    pub coercivity: f64,
    pub norm: f64,
    pub norm_bound: f64,
    pub m: f64,
    pub kappa_norm: f64,
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> CVec {
    CVec::from_iterator(n, (0..n).map(|_| c(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)))
}

pub fn extension_check(
    spec: &BadFunctionSpec,
    triple: &DiscreteTriple,
    state: &ExtensionState,
    seed: u64,
    samples: usize,
) -> ExtensionCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = bad_source(spec, state.rho, &state.u);
    let du = bad_derivative(spec, &triple.nodes, &state.u);
    let mut consistency = 0.0f64;
    let mut min_re = f64::INFINITY;
    let gv = &state.op.gram;
    for _ in 0..samples {
        let v = random_vec(&mut rng, triple.dim);
        let lhs = state.eval(&state.u, &v);
        let rhs = triple.inner(SpaceTag::H, &f, &v) - triple.inner(SpaceTag::H, &du, &v);
        let scale = state.m * state.u_norm_v * weighted_norm(&v, gv);
        consistency = consistency.max((lhs - rhs).norm() / scale);
        // mix in the span so the check is not dominated by the complement
        let y = &v + &state.op.project(&v) * c(3.0 * rng.random::<f64>(), 0.0);
        min_re = min_re.min(state.eval(&y, &y).re / weighted_norm(&y, gv).powi(2));
    }
    ExtensionCheck {
        t: state.t,
        seed,
        samples,
        consistency,
        min_sampled_re: min_re,
        coercivity: state.coercivity(),
        norm: state.norm(),
        norm_bound: state.norm_bound(),
        m: state.m,
        kappa_norm: weighted_norm(&state.kappa, gv),
    }
}

/// `‖Ŝ_a - Ŝ_b‖` on `V`, computed on the span of both bases.
fn operator_gap(a: &ExtendedOperator, b: &ExtendedOperator) -> f64 {
    let g = &a.gram;
    let mut basis: Vec<CVec> = Vec::with_capacity(4);
    for v in [Some(&a.e1), a.e2.as_ref(), Some(&b.e1), b.e2.as_ref()].into_iter().flatten() {
        let mut r = v.clone();
        for _ in 0..2 {
            for q in &basis {
                let p = weighted_inner(&r, q, g);
                r -= q * p;
            }
        }
        let n = weighted_norm(&r, g);
        if n > 1e-10 {
            basis.push(r / c(n, 0.0));
        }
    }
    let imgs: Vec<CVec> = basis.iter().map(|q| a.apply(q) - b.apply(q)).collect();
    let m = CMat::from_fn(basis.len(), basis.len(), |i, j| weighted_inner(&imgs[j], &basis[i], g));
    spectral_norm(&m)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderRow {
    pub s: f64,
    pub t: f64,
    pub gap: f64,
    /// `‖u(t) - u(s)‖_V`.
    pub u_v: f64,
    /// `‖w⁻¹(u(t) - u(s))‖_V`.
    pub w_inv_u_v: f64,
    /// `‖∂u(t) - ∂u(s)‖_{V′}`.
    pub du_vp: f64,
    /// `‖a(t) - a(s)‖` on `V × V`, when the form could be built.
    pub form: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub alpha: f64,
    /// `α/2`.
    pub expected: f64,
    pub eps: f64,
    pub rows: Vec<HolderRow>,
    pub u_v: SlopeFit,
    pub w_inv_u_v: SlopeFit,
    pub du_vp: SlopeFit,
    pub form: Option<SlopeFit>,
    /// `|exponent of u in V - α/2| ≤ 0.05`.
    pub sharp: bool,
}

/// Pairs `(t0, t0 + gap)` with `n` log-spaced gaps in `[lo, hi]`.
pub fn holder_pairs(t0: f64, lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
    log_grid(lo, hi, n).into_iter().map(|g| (t0, t0 + g)).collect()
}

/// Increments over `t_pairs` and their log-log slopes. Pairs with zero gap
/// are reported but left out of the fits. The form increments need
/// `cal.gamma > 0`.
pub fn holder_modulus(
    spec: &BadFunctionSpec,
    triple: &DiscreteTriple,
    cal: &Calibration,
    t_pairs: &[(f64, f64)],
) -> Result<HolderReport> {
    let nodes = &triple.nodes;
    let winv: Vec<f64> = triple.weight_w.iter().map(|w| 1.0 / w).collect();
    let with_form = cal.gamma > 0.0;
    let mut rows = Vec::with_capacity(t_pairs.len());
    for &(s, t) in t_pairs {
        let (us, ut) = (bad_function(spec, s, nodes)?, bad_function(spec, t, nodes)?);
        let d = &ut - &us;
        let dd = bad_derivative(spec, nodes, &d);
        let wd = CVec::from_iterator(d.len(), d.iter().zip(&winv).map(|(z, w)| z * *w));
        let form = if with_form {
            let (fs, ft) = (build_extended_form(spec, triple, s, cal)?, build_extended_form(spec, triple, t, cal)?);
            Some(operator_gap(&ft.op, &fs.op))
        } else {
            None
        };
        rows.push(HolderRow {
            s,
            t,
            gap: (t - s).abs(),
            u_v: triple.norm(SpaceTag::V, &d),
            w_inv_u_v: triple.norm(SpaceTag::V, &wd),
            du_vp: triple.norm(SpaceTag::Vp, &dd),
            form,
        });
    }
    let used: Vec<&HolderRow> = rows.iter().filter(|r| r.gap > 0.0).collect();
    if used.len() < 2 {
        return Err(invalid("non-positive fit window: need two pairs with distinct positive gaps"));
    }
    let gaps: Vec<f64> = used.iter().map(|r| r.gap).collect();
    let col = |f: fn(&HolderRow) -> f64| -> Vec<f64> { used.iter().map(|r| f(r)).collect() };
    let u_v = fit(&gaps, &col(|r| r.u_v))?;
    let form = if with_form { Some(fit(&gaps, &col(|r| r.form.unwrap_or(0.0)))?) } else { None };
    let al = spec.alpha.get();
    Ok(HolderReport {
        alpha: al,
        expected: 0.5 * al,
        eps: triple.eps(),
        sharp: (u_v.slope - 0.5 * al).abs() <= 0.05,
        w_inv_u_v: fit(&gaps, &col(|r| r.w_inv_u_v))?,
        du_vp: fit(&gaps, &col(|r| r.du_vp))?,
        u_v,
        form,
        rows,
    })
}

/// Cut-off `η` with `η(0) = 0` and `η = 1` on `[τ/2, τ]`; evaluates to
/// `(η(t), η'(t))`.
#[derive(Clone)]
pub struct Cutoff {
    pub label: String,
    f: Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>,
}

impl fmt::Debug for Cutoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Cutoff").field("label", &self.label).finish()
    }
}

impl Cutoff {
    /// `6s⁵ - 15s⁴ + 10s³` with `s = min(2t/τ, 1)`.
    pub fn smoothstep(tau: f64) -> Self {
        let half = 0.5 * tau;
        Self::custom("quintic smoothstep", move |t| {
            let s = (t / half).clamp(0.0, 1.0);
            let v = s * s * s * (10.0 + s * (-15.0 + 6.0 * s));
            let d = if s < 1.0 { 30.0 * s * s * (1.0 - s) * (1.0 - s) / half } else { 0.0 };
            (v, d)
        })
    }

    pub fn custom(label: impl Into<String>, f: impl Fn(f64) -> (f64, f64) + Send + Sync + 'static) -> Self {
        Self { label: label.into(), f: Arc::new(f) }
    }

    pub fn eval(&self, t: f64) -> (f64, f64) {
        (self.f)(t)
    }

    /// Checks the endpoint conditions at `t = 0` and on a grid of `[τ/2, τ]`.
    pub fn validate(&self, tau: f64) -> Result<()> {
        let (v0, _) = self.eval(0.0);
        if !(v0.abs() <= 1e-12) {
            return Err(invalid(format!("cut-off must vanish at t = 0, got {v0}")));
        }
        for k in 0..=16 {
            let t = 0.5 * tau * (1.0 + k as f64 / 16.0);
            let (v, d) = self.eval(t);
            if !((v - 1.0).abs() <= 1e-12 && d.abs() <= 1e-12) {
                return Err(invalid(format!("cut-off must equal 1 on [tau/2, tau], got {v} at t = {t}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupConfig {
    pub tau: f64,
    pub eps_list: Vec<f64>,
    pub nodes_per_decade: usize,
    pub n_t: usize,
}

impl Default for BlowupConfig {
    fn default() -> Self {
        Self { tau: 1.0, eps_list: alloc::vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6], nodes_per_decade: 20, n_t: 256 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupRow {
    pub eps: f64,
    pub n_x: usize,
    /// `‖g‖_{L₂(0,τ;H_ε)}`.
    pub g_norm: f64,
    /// `‖∂_t^α w‖²_{L₂(τ/2,τ;H_ε)}`.
    pub dw_norm_sq: f64,
    /// `dw_norm_sq / g_norm²`.
    pub ratio: f64,
    /// Share of `‖c‖_H²` on nodes where `u` oscillates faster in time than
    /// the grid resolves (`φ^{1/α} Δt > π`); the remainder term there is a
    /// bounded but inaccurate quadrature.
    pub under_resolved: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub alpha: f64,
    pub rho: f64,
    pub tau: f64,
    pub cutoff: String,
    pub rows: Vec<BlowupRow>,
    /// `ratio(ε_min) / ratio(ε_max)`.
    pub growth: f64,
    /// `ln(1/ε_min) / ln(1/ε_max)`, the growth if the ratio is affine in
    /// `ln(1/ε)` through the origin.
    pub log_ratio: f64,
    /// `(max - min)/min` of `g_norm` over the sweep.
    pub g_drift: f64,
    /// Slope of `dw_norm_sq` against `ln(1/ε)`.
    pub log_slope: f64,
}

/// `w = ηu` solves `∂_t^α w + 𝒜(t)w = g` with `g = ηf + F(u,η)` and
/// `∂_t^α w = η i^α φ u + F(u,η)`, where `F` is the product-rule remainder.
/// `g` stays bounded as `ε ↓ 0` while `∂_t^α w` does not.
pub fn blowup_demo(spec: &BadFunctionSpec, cfg: &BlowupConfig, cutoff: &Cutoff) -> Result<BlowupReport> {
    spec.validate()?;
    if !(cfg.tau > 0.0 && cfg.tau.is_finite()) {
        return Err(invalid(format!("horizon must be finite and > 0, got {}", cfg.tau)));
    }
    if cfg.eps_list.len() < 2 || cfg.n_t < 4 || cfg.nodes_per_decade < 2 {
        return Err(invalid("blow-up sweep needs two truncations, n_t >= 4 and nodes_per_decade >= 2"));
    }
    cutoff.validate(cfg.tau)?;
    let al = spec.alpha.get();
    let eps_min = cfg.eps_list.iter().copied().fold(f64::INFINITY, f64::min);
    let eps_max = cfg.eps_list.iter().copied().fold(0.0, f64::max);
    let rho = match spec.source_scale {
        Some(r) => r,
        None => calibrate(spec, &spec.geometric_triple(eps_min, cfg.nodes_per_decade)?, cfg.tau, 32)?.rho,
    };
    let grid = TimeGrid::uniform(cfg.tau, cfg.n_t)?;
    let dt = cfg.tau / cfg.n_t as f64;
    let start = grid.nodes.iter().position(|&t| t >= 0.5 * cfg.tau - 1e-12 * cfg.tau).unwrap_or(0);
    let mut rows = Vec::with_capacity(cfg.eps_list.len());
    for &eps in &cfg.eps_list {
        let tr = spec.geometric_triple(eps, cfg.nodes_per_decade)?;
        let values = grid.nodes.iter().map(|&t| bad_function(spec, t, &tr.nodes)).collect::<Result<Vec<_>>>()?;
        let u0 = values[0].clone();
        let u = Trajectory::new(grid.clone(), SpaceTag::H, values)?;
        let rem = product_rule_remainder(spec.alpha, &u, |t| cutoff.eval(t), &u0)?;
        let eta: Vec<f64> = grid.nodes.iter().map(|&t| cutoff.eval(t).0).collect();
        let g = Trajectory::new(
            grid.clone(),
            SpaceTag::H,
            (0..grid.len()).map(|n| bad_source(spec, rho, &u.values[n]) * c(eta[n], 0.0) + &rem.values[n]).collect(),
        )?;
        let dw = Trajectory::new(
            grid.clone(),
            SpaceTag::H,
            (0..grid.len())
                .map(|n| bad_derivative(spec, &tr.nodes, &u.values[n]) * c(eta[n], 0.0) + &rem.values[n])
                .collect(),
        )?;
        let hn = |x: &CVec| tr.norm(SpaceTag::H, x);
        let g_norm = lp_time_norm(2.0, &g, hn)?;
        let dw_norm_sq = lp_time_norm_range(2.0, &dw, hn, start..grid.len())?.powi(2);
        let (mut fast, mut total) = (0.0, 0.0);
        for j in 0..tr.dim {
            let x = tr.nodes[j];
            let mass = tr.quad_weights[j] * spec.amplitude(x).powi(2);
            total += mass;
            if spec.phase(x).powf(1.0 / al) * dt > PI {
                fast += mass;
            }
        }
        rows.push(BlowupRow {
            eps,
            n_x: tr.dim,
            g_norm,
            dw_norm_sq,
            ratio: dw_norm_sq / (g_norm * g_norm),
            under_resolved: fast / total,
        });
    }
    let at = |e: f64| rows.iter().find(|r| r.eps == e).map(|r| r.ratio).unwrap_or(f64::NAN);
    let g_min = rows.iter().map(|r| r.g_norm).fold(f64::INFINITY, f64::min);
    let g_max = rows.iter().map(|r| r.g_norm).fold(0.0, f64::max);
    let xs: Vec<f64> = rows.iter().map(|r| -r.eps.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.dw_norm_sq).collect();
    Ok(BlowupReport {
        alpha: al,
        rho,
        tau: cfg.tau,
        cutoff: cutoff.label.clone(),
        growth: at(eps_min) / at(eps_max),
        log_ratio: eps_min.ln() / eps_max.ln(),
        g_drift: (g_max - g_min) / g_min,
        log_slope: linear_fit(&xs, &ys).0,
        rows,
    })
}
