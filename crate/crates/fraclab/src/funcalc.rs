//! Contour-integral realization of the operator families
//!
//! `φ(s) = (1/2πi) ∫_Γ λ^{α-1} e^{λs} (λ^α + 𝒜)⁻¹ dλ`,
//! `ψ(s) = (1/2πi) ∫_Γ e^{λs} (λ^α + 𝒜)⁻¹ dλ`,
//!
//! where `Γ` runs in along `arg λ = -θ`, around the arc `|λ| = R` and out
//! along `arg λ = θ`. For a real operator the integrand is conjugate
//! symmetric and only the upper half of `Γ` is visited.

use alloc::vec::Vec;
use core::f64::consts::PI;
use num_complex::Complex64;
#[allow(unused_imports)] // inherent in core on recent toolchains
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fracops::{kernel_convolve_with, SpaceTag, StartBehavior, TimeGrid, Trajectory};
use crate::linalg::{as_real, c, inverse, is_symmetric, op_norm, spectral_norm, CMat, CVec, Spectral};
use crate::mlf::FracOrder;
use crate::quad::{log_panel_nodes, GaussLegendre};
use crate::triple::{DiscreteTriple, OperatorPair};

/// How the arc radius `R` depends on `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum VertexRule {
    Fixed { r: f64 },
    InverseS,
    /// `R = s^{α-1}`, capped at `1/s` so the arc factor `e^{Rs}` stays
    /// below `e` for `s > 1`.
    SPowAlphaMinusOne,
}

impl VertexRule {
    pub fn radius(&self, alpha: f64, s: f64) -> f64 {
        match *self {
            Self::Fixed { r } => r,
            Self::InverseS => 1.0 / s,
            Self::SPowAlphaMinusOne => s.powf(alpha - 1.0).min(1.0 / s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContourSpec {
    pub theta: f64,
    pub vertex: VertexRule,
    pub nodes_per_decade: usize,
    pub arc_nodes: usize,
    pub tail_tol: f64,
    /// Allowed change under node doubling.
    pub quad_tol: f64,
    /// Recompute with doubled nodes and report disagreement.
    pub check_doubling: bool,
}

impl Default for ContourSpec {
    fn default() -> Self {
        Self {
            theta: 0.75 * PI,
            vertex: VertexRule::SPowAlphaMinusOne,
            nodes_per_decade: 24,
            arc_nodes: 64,
            tail_tol: 1e-14,
            quad_tol: 1e-8,
            check_doubling: true,
        }
    }
}

impl ContourSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > PI / 2.0 && self.theta < PI) {
            return Err(invalid(alloc::format!("contour angle must lie in (π/2, π), got {}", self.theta)));
        }
        if self.nodes_per_decade < 2 || self.arc_nodes < 2 {
            return Err(invalid("contour needs at least two nodes per panel"));
        }
        if !(self.tail_tol > 0.0 && self.tail_tol < 1.0) {
            return Err(invalid("tail tolerance must lie in (0,1)"));
        }
        if let VertexRule::Fixed { r } = self.vertex {
            if !(r > 0.0 && r.is_finite()) {
                return Err(invalid("fixed vertex radius must be positive"));
            }
        }
        Ok(())
    }

    pub fn doubled(&self) -> Self {
        Self {
            nodes_per_decade: 2 * self.nodes_per_decade,
            arc_nodes: 2 * self.arc_nodes,
            check_doubling: false,
            ..*self
        }
    }

    /// Ray truncation: `e^{r s cos θ} ≤ tail_tol`, and at least `2R`.
    pub fn r_max(&self, s: f64, r: f64) -> f64 {
        ((1.0 / self.tail_tol).ln() / (s * self.theta.cos().abs())).max(2.0 * r)
    }

    /// Nodes on the upper half of the contour for a given `s`.
    pub fn nodes_for(&self, alpha: f64, s: f64) -> ContourNodes {
        let r = self.vertex.radius(alpha, s);
        contour_nodes(self, r, self.r_max(s, r), s)
    }
}

/// Upper half of `Γ`: points `λ_k` and weights `w_k·dλ/dx` of the
/// parametrization (arc `φ ∈ [0, θ]`, ray `ρ ∈ [R, r_max]`).
#[derive(Debug, Clone)]
pub struct ContourNodes {
    pub lambda: Vec<Complex64>,
    pub dl: Vec<Complex64>,
}

///
/// Ray panels cover one decade of `ρ` each and are split further so that
/// the phase of `e^{λ s_osc}` turns by at most `π` per panel.
pub fn contour_nodes(spec: &ContourSpec, r: f64, r_max: f64, s_osc: f64) -> ContourNodes {
    contour_nodes_with(spec, r, r_max, s_osc, 1)
}

/// As [`contour_nodes`] with at least `min_sub` panels per decade.
pub fn contour_nodes_with(spec: &ContourSpec, r: f64, r_max: f64, s_osc: f64, min_sub: usize) -> ContourNodes {
    let arc = GaussLegendre::new(spec.arc_nodes);
    let ray = GaussLegendre::new(spec.nodes_per_decade);
    let mut lambda = Vec::new();
    let mut dl = Vec::new();
    for (phi, w) in arc.mapped(0.0, spec.theta) {
        let l = Complex64::from_polar(r, phi);
        lambda.push(l);
        dl.push(l * c(0.0, w));
    }
    let dir = Complex64::from_polar(1.0, spec.theta);
    let (la, lb) = (r.ln(), r_max.ln());
    let panels = ((lb - la) / core::f64::consts::LN_10).ceil().max(1.0) as usize;
    let step = (lb - la) / panels as f64;
    let rate = s_osc * spec.theta.sin();
    for k in 0..panels {
        let lo = la + step * k as f64;
        let width = (lo + step).exp() - lo.exp();
        let sub = ((rate * width / PI).ceil() as usize).max(min_sub.max(1));
        let sub_step = step / sub as f64;
        for m in 0..sub {
            let a = lo + sub_step * m as f64;
            for (x, w) in ray.mapped(a, a + sub_step) {
                let rho = x.exp();
                lambda.push(dir * rho);
                dl.push(dir * (w * rho));
            }
        }
    }
    ContourNodes { lambda, dl }
}

impl ContourNodes {
    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    /// `(1/2πi)∫_Γ f dλ` for conjugate-symmetric `f`, returned with the
    /// absolute mass `Σ|w f|/π` as a cancellation scale.
    pub fn real_integral(&self, mut f: impl FnMut(Complex64) -> Complex64) -> (f64, f64) {
        let mut s = c(0.0, 0.0);
        let mut mass = 0.0;
        for (l, w) in self.lambda.iter().zip(&self.dl) {
            let v = *w * f(*l);
            mass += v.norm();
            s += v;
        }
        (s.im / PI, mass / PI)
    }
}

/// Principal `λ^α`.
pub(crate) fn cpow(l: Complex64, a: f64) -> Complex64 {
    Complex64::from_polar(l.norm().powf(a), a * l.arg())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kernel {
    Phi,
    Psi,
}

/// `(φ_a(s), ψ_a(s))` on precomputed nodes, with the absolute masses.
fn scalar_pair_on(nodes: &ContourNodes, alpha: f64, a: f64, s: f64) -> ([f64; 2], [f64; 2]) {
    let mut acc = [c(0.0, 0.0); 2];
    let mut mass = [0.0; 2];
    for (l, w) in nodes.lambda.iter().zip(&nodes.dl) {
        let la = cpow(*l, alpha);
        let psi = *w * (*l * s).exp() / (la + a);
        let phi = psi * la / *l;
        acc[0] += phi;
        acc[1] += psi;
        mass[0] += phi.norm();
        mass[1] += psi.norm();
    }
    ([acc[0].im / PI, acc[1].im / PI], [mass[0] / PI, mass[1] / PI])
}

/// Both kernels for every `a` in `vals`, checked against doubled nodes.
pub(crate) fn scalar_pairs(alpha: FracOrder, vals: &[f64], s: f64, spec: &ContourSpec) -> Result<Vec<[f64; 2]>> {
    spec.validate()?;
    if !(s > 0.0 && s.is_finite()) {
        return Err(invalid(alloc::format!("s must be positive, got {s}")));
    }
    let al = alpha.get();
    let nodes = spec.nodes_for(al, s);
    let fine = spec.check_doubling.then(|| spec.doubled().nodes_for(al, s));
    let mut out = Vec::with_capacity(vals.len());
    for &a in vals {
        if !(a.is_finite() && a >= 0.0) {
            return Err(invalid("scalar operator must be finite and nonnegative"));
        }
        let (v, mass) = scalar_pair_on(&nodes, al, a, s);
        if let Some(f) = &fine {
            let (v2, _) = scalar_pair_on(f, al, a, s);
            for k in 0..2 {
                if (v[k] - v2[k]).abs() > spec.quad_tol * (v2[k].abs() + 1e-6 * mass[k]) {
                    return Err(Error::Quadrature { coarse: v[k], fine: v2[k] });
                }
            }
        }
        if !(v[0].is_finite() && v[1].is_finite()) {
            return Err(Error::NonFinite);
        }
        out.push(v);
    }
    Ok(out)
}

/// `φ_a(s) = E_{α,1}(-a s^α)` or `ψ_a(s) = s^{α-1} E_{α,α}(-a s^α)` for a
/// real `a ≥ 0`, by contour quadrature.
pub fn scalar_kernel(alpha: FracOrder, a: f64, s: f64, spec: &ContourSpec, kernel: Kernel) -> Result<f64> {
    let v = scalar_pairs(alpha, &[a], s, spec)?[0];
    Ok(match kernel {
        Kernel::Phi => v[0],
        Kernel::Psi => v[1],
    })
}

pub fn scalar_phi(alpha: FracOrder, a: f64, s: f64, spec: &ContourSpec) -> Result<f64> {
    scalar_kernel(alpha, a, s, spec, Kernel::Phi)
}

pub fn scalar_psi(alpha: FracOrder, a: f64, s: f64, spec: &ContourSpec) -> Result<f64> {
    scalar_kernel(alpha, a, s, spec, Kernel::Psi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalcMode {
    /// Diagonalize once (needs a real symmetric form) and integrate the
    /// scalar kernel per eigenvalue.
    Spectral,
    /// Dense LU of `λ^α + A` at every contour node.
    Resolvent,
}

/// `φ`, `ψ`, `𝒜φ`, `𝒜ψ` at one `s`.
#[derive(Debug, Clone)]
pub struct OperatorFamilySample {
    pub s: f64,
    pub phi: CMat,
    pub psi: CMat,
    pub a_phi: CMat,
    pub a_psi: CMat,
}

/// Functional calculus of one operator `𝒜(t)` on a triple.
#[derive(Debug, Clone)]
pub struct OperatorCalculus {
    pub alpha: FracOrder,
    pub op: CMat,
    pub mode: CalcMode,
    pub spectral: Option<Spectral>,
    pub gram_h: Vec<f64>,
    pub gram_vp: Vec<f64>,
    real: bool,
}

impl OperatorCalculus {
    /// `mode = None` picks the spectral path whenever the form allows it.
    pub fn new(alpha: FracOrder, pair: &OperatorPair, triple: &DiscreteTriple, mode: Option<CalcMode>) -> Result<Self> {
        let real_form = as_real(&pair.form, 1e-14).filter(|b| is_symmetric(b, 1e-12));
        let spectral = real_form.as_ref().map(|b| Spectral::from_form(b, &triple.gram_h()));
        let mode = match (mode, &spectral) {
            (Some(CalcMode::Spectral), None) => {
                return Err(invalid("spectral calculus needs a real symmetric form"));
            }
            (Some(m), _) => m,
            (None, Some(_)) => CalcMode::Spectral,
            (None, None) => CalcMode::Resolvent,
        };
        if let Some(sp) = &spectral {
            if sp.eig.first().is_some_and(|e| *e <= 0.0) {
                return Err(Error::NotCoercive(sp.eig[0]));
            }
        }
        let real = pair.op_h.iter().all(|z| z.im == 0.0);
        Ok(Self {
            alpha,
            op: pair.op_h.clone(),
            mode,
            spectral,
            gram_h: triple.gram_h(),
            gram_vp: triple.gram_vp(),
            real,
        })
    }

    pub fn dim(&self) -> usize {
        self.op.nrows()
    }

    pub fn eigenvalues(&self) -> Option<&[f64]> {
        self.spectral.as_ref().map(|s| s.eig.as_slice())
    }

    pub fn sample(&self, s: f64, spec: &ContourSpec) -> Result<OperatorFamilySample> {
        spec.validate()?;
        if !(s > 0.0 && s.is_finite()) {
            return Err(invalid(alloc::format!("s must be positive, got {s}")));
        }
        match (self.mode, &self.spectral) {
            (CalcMode::Spectral, Some(sp)) => {
                let pairs = scalar_pairs(self.alpha, &sp.eig, s, spec)?;
                let phi: Vec<f64> = pairs.iter().map(|p| p[0]).collect();
                let psi: Vec<f64> = pairs.iter().map(|p| p[1]).collect();
                let f = |v: &[f64]| diag_fn(sp, v);
                let a_phi: Vec<f64> = sp.eig.iter().zip(&phi).map(|(a, p)| a * p).collect();
                let a_psi: Vec<f64> = sp.eig.iter().zip(&psi).map(|(a, p)| a * p).collect();
                Ok(OperatorFamilySample {
                    s,
                    phi: to_c(&f(&phi)),
                    psi: to_c(&f(&psi)),
                    a_phi: to_c(&f(&a_phi)),
                    a_psi: to_c(&f(&a_psi)),
                })
            }
            _ => {
                let (phi, psi) = self.resolvent_pair(s, spec)?;
                if spec.check_doubling {
                    let (phi2, psi2) = self.resolvent_pair(s, &spec.doubled())?;
                    for (m1, m2) in [(&phi, &phi2), (&psi, &psi2)] {
                        let d = spectral_norm(&(m1 - m2));
                        let n2 = spectral_norm(m2);
                        if d > spec.quad_tol * n2.max(1e-300) {
                            return Err(Error::Quadrature { coarse: spectral_norm(m1), fine: n2 });
                        }
                    }
                }
                let a_phi = &self.op * &phi;
                let a_psi = &self.op * &psi;
                Ok(OperatorFamilySample { s, phi, psi, a_phi, a_psi })
            }
        }
    }

    fn resolvent_pair(&self, s: f64, spec: &ContourSpec) -> Result<(CMat, CMat)> {
        let a = self.alpha.get();
        let n = self.dim();
        let nodes = spec.nodes_for(a, s);
        let mut phi = CMat::zeros(n, n);
        let mut psi = CMat::zeros(n, n);
        let mut acc = |l: Complex64, w: Complex64, sign: f64| -> Result<()> {
            let la = cpow(l, a);
            let mut m = self.op.clone();
            for i in 0..n {
                m[(i, i)] += la;
            }
            let r = inverse(&m).ok_or(Error::Singular)?;
            let e = (l * s).exp() * w * sign;
            psi += &r * e;
            phi += &r * (e * la / l);
            Ok(())
        };
        if self.real {
            for (l, w) in nodes.lambda.iter().zip(&nodes.dl) {
                acc(*l, *w, 1.0)?;
            }
            // (X - conj X)/(2πi) = Im X / π
            let im = |m: &CMat| m.map(|z| c(z.im / PI, 0.0));
            Ok((im(&phi), im(&psi)))
        } else {
            for (l, w) in nodes.lambda.iter().zip(&nodes.dl) {
                acc(*l, *w, 1.0)?;
                // mirrored lower half, traversed in the opposite sense
                acc(l.conj(), w.conj(), -1.0)?;
            }
            let k = c(0.0, -0.5 / PI);
            Ok((phi * k, psi * k))
        }
    }

    pub fn phi(&self, s: f64, spec: &ContourSpec) -> Result<CMat> {
        Ok(self.sample(s, spec)?.phi)
    }

    pub fn psi(&self, s: f64, spec: &ContourSpec) -> Result<CMat> {
        Ok(self.sample(s, spec)?.psi)
    }

    /// `(λ^α + 𝒜)⁻¹` by LU.
    pub fn resolvent(&self, lambda: Complex64) -> Result<CMat> {
        let la = cpow(lambda, self.alpha.get());
        let mut m = self.op.clone();
        for i in 0..self.dim() {
            m[(i, i)] += la;
        }
        inverse(&m).ok_or(Error::Singular)
    }

    pub fn norm_vp(&self, m: &CMat) -> f64 {
        op_norm(m, &self.gram_vp, &self.gram_vp)
    }

    pub fn norm_h(&self, m: &CMat) -> f64 {
        op_norm(m, &self.gram_h, &self.gram_h)
    }
}

fn diag_fn(sp: &Spectral, vals: &[f64]) -> crate::linalg::RMat {
    let mut vd = sp.v.clone();
    for (k, v) in vals.iter().enumerate() {
        vd.column_mut(k).scale_mut(*v);
    }
    vd * &sp.v_inv
}

fn to_c(m: &crate::linalg::RMat) -> CMat {
    m.map(|x| c(x, 0.0))
}

pub fn contour_phi(calc: &OperatorCalculus, s: f64, spec: &ContourSpec) -> Result<CMat> {
    calc.phi(s, spec)
}

pub fn contour_psi(calc: &OperatorCalculus, s: f64, spec: &ContourSpec) -> Result<CMat> {
    calc.psi(s, spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceProbe {
    pub lambda_re: f64,
    pub lambda_im: f64,
    /// Relative residual with the default panel density.
    pub residual: f64,
    /// Same with half the panel density.
    pub residual_coarse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeProbe {
    pub s: f64,
    pub step: f64,
    pub residual: f64,
    pub residual_coarse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub laplace: Vec<LaplaceProbe>,
    pub derivative: Vec<DerivativeProbe>,
    pub convolution_steps: usize,
    pub convolution_residual: f64,
    pub convolution_residual_coarse: f64,
    /// Every residual is below half its coarse counterpart or already at
    /// the round-off floor.
    pub refines: bool,
}

/// Residual floor below which "halving under refinement" is not required.
pub const IDENTITY_FLOOR: f64 = 1e-9;

fn halves(fine: f64, coarse: f64) -> bool {
    fine <= 0.5 * coarse || fine <= IDENTITY_FLOOR
}

/// Checks the Laplace identity `ℒψ(λ) = (λ^α+𝒜)⁻¹`, the derivative identity
/// `φ' = -𝒜ψ` and the convolution identity `k*ψ = φ`.
///
/// `s_grid` supplies the points for the derivative check; its largest value
/// sets the horizon of the convolution check on a graded grid of
/// `conv_steps` steps (compared with `conv_steps/2`).
pub fn verify_calculus_identities(
    calc: &OperatorCalculus,
    spec: &ContourSpec,
    s_grid: &[f64],
    lambda_probes: &[Complex64],
    conv_steps: usize,
) -> Result<IdentityReport> {
    if s_grid.len() < 2 || s_grid.iter().any(|s| !(*s > 0.0)) {
        return Err(invalid("s grid needs at least two positive points"));
    }
    let (lo, hi) = s_grid.iter().fold((f64::INFINITY, 0.0f64), |(l, h), s| (l.min(*s), h.max(*s)));
    if hi / lo < 100.0 * (1.0 - 1e-12) {
        return Err(invalid("s grid must span at least two decades"));
    }
    if lambda_probes.iter().any(|l| !(l.re > 0.0)) {
        return Err(invalid("Laplace probes need Re λ > 0"));
    }
    let mut laplace = Vec::new();
    for &l in lambda_probes {
        let want = calc.resolvent(l)?;
        let scale = calc.norm_h(&want);
        let fine = laplace_of_psi(calc, spec, l, 16)?;
        let coarse = laplace_of_psi(calc, spec, l, 8)?;
        laplace.push(LaplaceProbe {
            lambda_re: l.re,
            lambda_im: l.im,
            residual: calc.norm_h(&(&fine - &want)) / scale,
            residual_coarse: calc.norm_h(&(&coarse - &want)) / scale,
        });
    }
    let mut derivative = Vec::new();
    for &s in s_grid {
        let h = 1e-4 * s.min(1.0);
        let fine = derivative_residual(calc, spec, s, h)?;
        let coarse = derivative_residual(calc, spec, s, 2.0 * h)?;
        derivative.push(DerivativeProbe { s, step: h, residual: fine, residual_coarse: coarse });
    }
    let conv_fine = convolution_residual(calc, spec, hi, conv_steps)?;
    let conv_coarse = convolution_residual(calc, spec, hi, (conv_steps / 2).max(2))?;
    let refines = laplace.iter().all(|p| halves(p.residual, p.residual_coarse))
        && derivative.iter().all(|p| halves(p.residual, p.residual_coarse))
        && halves(conv_fine, conv_coarse);
    Ok(IdentityReport {
        laplace,
        derivative,
        convolution_steps: conv_steps,
        convolution_residual: conv_fine,
        convolution_residual_coarse: conv_coarse,
        refines,
    })
}

/// `∫_0^∞ e^{-λs} ψ(s) ds` with `nodes` Gauss points per decade of `s` on
/// `[s0, 60/Re λ]`, the series head `ψ(s) ≈ s^{α-1}/Γ(α) - 𝒜 s^{2α-1}/Γ(2α)`
/// on `[0, s0]` and the exponentially small remainder dropped.
fn laplace_of_psi(calc: &OperatorCalculus, spec: &ContourSpec, l: Complex64, nodes: usize) -> Result<CMat> {
    use crate::special::gamma;
    let a = calc.alpha.get();
    let n = calc.dim();
    let s0 = 1e-10 / l.norm().max(1.0);
    let s1 = 60.0 / l.re;
    let rule = GaussLegendre::new(nodes);
    let mut acc = CMat::zeros(n, n);
    for (s, w) in log_panel_nodes(&rule, s0, s1, 10.0) {
        acc += calc.psi(s, spec)? * ((-l * s).exp() * w);
    }
    let head = s0.powf(a) / (a * gamma(a));
    for i in 0..n {
        acc[(i, i)] += c(head, 0.0);
    }
    acc -= &calc.op * c(s0.powf(2.0 * a) / (2.0 * a * gamma(2.0 * a)), 0.0);
    Ok(acc)
}

/// `‖φ'(s) + 𝒜ψ(s)‖ / ‖𝒜ψ(s)‖` with five-point central differences.
fn derivative_residual(calc: &OperatorCalculus, spec: &ContourSpec, s: f64, h: f64) -> Result<f64> {
    let p = |x: f64| calc.phi(x, spec);
    let d = (p(s - 2.0 * h)? - p(s + 2.0 * h)? + (p(s + h)? - p(s - h)?) * c(8.0, 0.0)) * c(1.0 / (12.0 * h), 0.0);
    let a_psi = calc.sample(s, spec)?.a_psi;
    Ok(calc.norm_vp(&(d + &a_psi)) / calc.norm_vp(&a_psi))
}

/// Max over nodes of `‖(k*ψ)(t)x − φ(t)x‖_H / ‖x‖_H` for `x = (1,…,1)`, on
/// a graded grid over `[0, horizon]`.
fn convolution_residual(calc: &OperatorCalculus, spec: &ContourSpec, horizon: f64, steps: usize) -> Result<f64> {
    use crate::special::gamma;
    let a = calc.alpha.get();
    let n = calc.dim();
    let x = CVec::from_element(n, c(1.0, 0.0));
    let grid = TimeGrid::graded(horizon, steps, 3.0)?;
    let mut psi_vals = Vec::with_capacity(grid.len());
    let mut phi_vals = Vec::with_capacity(grid.len());
    for &t in &grid.nodes {
        if t == 0.0 {
            // s^{1-α}ψ(s) → I/Γ(α)
            psi_vals.push(&x * c(1.0 / gamma(a), 0.0));
            phi_vals.push(x.clone());
        } else {
            let smp = calc.sample(t, spec)?;
            psi_vals.push(&smp.psi * &x);
            phi_vals.push(&smp.phi * &x);
        }
    }
    let psi_traj = Trajectory::new(grid, SpaceTag::H, psi_vals)?;
    let conv = kernel_convolve_with(calc.alpha, &psi_traj, StartBehavior::Power(a - 1.0))?;
    let xn = crate::linalg::weighted_norm(&x, &calc.gram_h);
    let mut worst = 0.0f64;
    for (k, p) in conv.values.iter().zip(&phi_vals).skip(1) {
        worst = worst.max(crate::linalg::weighted_norm(&(k - p), &calc.gram_h) / xn);
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub s_lo: f64,
    pub s_hi: f64,
    pub slope: f64,
    /// `exp` of the fitted intercept: the constant `C` in `C s^slope`.
    pub constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    /// `‖𝒜φ(s)‖_{L(V′)}`, bound slope `-α`.
    pub a_phi: SlopeFit,
    /// `‖𝒜ψ(s)‖_{L(V′)}`, bound slope `-1`.
    pub a_psi: SlopeFit,
    /// `‖ψ(s)‖_{L(V′)}`, bound slope `α-1`.
    pub psi: SlopeFit,
    /// No fitted slope is steeper than its bound by more than 0.1.
    pub within_bounds: bool,
}

pub(crate) fn fit(s: &[f64], y: &[f64]) -> Result<SlopeFit> {
    if s.len() < 2 {
        return Err(invalid("slope fit needs at least two points"));
    }
    let xs: Vec<f64> = s.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    if ys.iter().any(|v| !v.is_finite()) {
        return Err(invalid("non-positive norm in slope fit"));
    }
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(invalid("slope fit needs distinct points"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok(SlopeFit {
        s_lo: s.iter().copied().fold(f64::INFINITY, f64::min),
        s_hi: s.iter().copied().fold(0.0, f64::max),
        slope,
        constant: (my - slope * mx).exp(),
    })
}

/// Log-log fit of the three norms over `s_grid`.
pub fn decay_fit(calc: &OperatorCalculus, spec: &ContourSpec, s_grid: &[f64]) -> Result<DecayReport> {
    decay_fit_windows(calc, spec, s_grid, s_grid, s_grid)
}

/// Same, with a separate grid per norm.
pub fn decay_fit_windows(
    calc: &OperatorCalculus,
    spec: &ContourSpec,
    grid_a_phi: &[f64],
    grid_a_psi: &[f64],
    grid_psi: &[f64],
) -> Result<DecayReport> {
    let norms = |grid: &[f64], pick: fn(&OperatorFamilySample) -> &CMat| -> Result<Vec<f64>> {
        grid.iter()
            .map(|&s| {
                let smp = calc.sample(s, spec)?;
                let v = calc.norm_vp(pick(&smp));
                if v.is_finite() { Ok(v) } else { Err(Error::NonFinite) }
            })
            .collect()
    };
    let a_phi = fit(grid_a_phi, &norms(grid_a_phi, |m| &m.a_phi)?)?;
    let a_psi = fit(grid_a_psi, &norms(grid_a_psi, |m| &m.a_psi)?)?;
    let psi = fit(grid_psi, &norms(grid_psi, |m| &m.psi)?)?;
    let a = calc.alpha.get();
    let within_bounds = a_phi.slope >= -a - 0.1 && a_psi.slope >= -1.1 && psi.slope >= a - 1.1;
    Ok(DecayReport { a_phi, a_psi, psi, within_bounds })
}

/// `s` windows where each norm sits in its power-law regime, from the
/// spectral range `[a_min, a_max]` (with `x = a s^α`):
/// `‖𝒜φ‖` needs `a_max s^α ≥ 3`; `‖𝒜ψ‖` needs the maximizer of
/// `x E_{α,α}(-x)` inside `[a_min s^α, a_max s^α]`; `‖ψ‖` needs
/// `a_min s^α ≤ 0.1`. Each window spans two decades or less.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayWindows {
    pub a_phi: (f64, f64),
    pub a_psi: Option<(f64, f64)>,
    pub psi: (f64, f64),
}

pub fn decay_windows(alpha: FracOrder, a_min: f64, a_max: f64) -> DecayWindows {
    let ia = 1.0 / alpha.get();
    let lo = (3.0 / a_max).powf(ia);
    let a_phi = (lo, 100.0 * lo);
    let (p_lo, p_hi) = ((5.0 / a_max).powf(ia), (0.2 / a_min).powf(ia));
    let a_psi = (p_hi > 2.0 * p_lo).then(|| (p_lo, p_hi.min(100.0 * p_lo)));
    let hi = (0.1 / a_min).powf(ia);
    DecayWindows { a_phi, a_psi, psi: (hi / 100.0, hi) }
}

/// `n` log-spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_in_scalar_limit() {
        // a = 0: φ ≡ 1 and ψ = s^{α-1}/Γ(α)
        let al = FracOrder::new(0.4).unwrap();
        let spec = ContourSpec::default();
        let phi = scalar_phi(al, 0.0, 0.7, &spec).unwrap();
        let psi = scalar_psi(al, 0.0, 0.7, &spec).unwrap();
        assert!((phi - 1.0).abs() < 1e-10);
        let want = 0.7f64.powf(-0.6) / crate::special::gamma(0.4);
        assert!((psi - want).abs() < 1e-10 * want);
    }

    #[test]
    fn rejects_bad_angle() {
        let spec = ContourSpec { theta: 1.0, ..Default::default() };
        assert!(spec.validate().is_err());
    }
}
