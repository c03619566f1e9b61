//! Discrete Gelfand triples `V ↪ H ↪ V′` on (0,1] and non-autonomous
//! sesquilinear forms on them.
//!
//! All three inner products are diagonal in nodal coordinates:
//! `(u,v)_H = Σ q_j u_j v̄_j`, `(u,v)_V = Σ q_j w_j u_j v̄_j` and
//! `(u,v)_{V′} = Σ q_j u_j v̄_j / w_j`. A form is stored as the matrix `B`
//! with `a(u,v) = v* B u`; the functional `𝒜u ∈ V′` is represented through
//! the `H` pivot, so `𝒜 = G_H⁻¹ B` and its part in `H` has the same matrix.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use num_complex::Complex64;
#[allow(unused_imports)] // inherent in core on recent toolchains
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fracops::SpaceTag;
use crate::linalg::{c, inverse, min_hermitian_part_eig, op_norm, scale_rows_cols, CMat, CVec};
use crate::reglab::DiniModulus;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TripleKind {
    /// Midpoints of `N` equal cells.
    Uniform,
    /// Midpoints of `N` cells with geometrically growing width on `[eps, 1]`.
    Geometric { eps: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteTriple {
    pub dim: usize,
    pub nodes: Vec<f64>,
    pub quad_weights: Vec<f64>,
    pub weight_w: Vec<f64>,
    pub kind: TripleKind,
}

fn check_weight(x: f64, w: f64) -> Result<f64> {
    if !(w >= 1.0 && w.is_finite()) {
        return Err(invalid(alloc::format!("weight must be finite and >= 1, got w({x}) = {w}")));
    }
    Ok(w)
}

/// Midpoint nodes `x_j = (j - 1/2)/N`, weights `1/N`.
pub fn build_weighted_triple(n: usize, weight: impl Fn(f64) -> f64) -> Result<DiscreteTriple> {
    if n < 2 {
        return Err(invalid("triple needs at least two nodes"));
    }
    let h = 1.0 / n as f64;
    let nodes: Vec<f64> = (0..n).map(|j| (j as f64 + 0.5) * h).collect();
    let weight_w = nodes.iter().map(|&x| check_weight(x, weight(x))).collect::<Result<_>>()?;
    Ok(DiscreteTriple {
        dim: n,
        quad_weights: alloc::vec![h; n],
        nodes,
        weight_w,
        kind: TripleKind::Uniform,
    })
}

/// Cells `[eps^{1-k/N}, eps^{1-(k+1)/N}]` with midpoint nodes. Resolves
/// integrands like `x^{-1}` down to `eps` with few nodes.
pub fn build_geometric_triple(
    n: usize,
    eps: f64,
    weight: impl Fn(f64) -> f64,
) -> Result<DiscreteTriple> {
    if n < 2 {
        return Err(invalid("triple needs at least two nodes"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(alloc::format!("truncation must lie in (0,1), got {eps}")));
    }
    let edge = |k: usize| eps.powf(1.0 - k as f64 / n as f64);
    let mut nodes = Vec::with_capacity(n);
    let mut quad_weights = Vec::with_capacity(n);
    for k in 0..n {
        let (a, b) = (edge(k), if k + 1 == n { 1.0 } else { edge(k + 1) });
        nodes.push(0.5 * (a + b));
        quad_weights.push(b - a);
    }
    let weight_w = nodes.iter().map(|&x| check_weight(x, weight(x))).collect::<Result<_>>()?;
    Ok(DiscreteTriple { dim: n, nodes, quad_weights, weight_w, kind: TripleKind::Geometric { eps } })
}

impl DiscreteTriple {
    /// Left end of the resolved spatial interval: half the first node for
    /// uniform grids, `eps` for geometric ones.
    pub fn eps(&self) -> f64 {
        match self.kind {
            TripleKind::Uniform => 0.5 * self.nodes[0],
            TripleKind::Geometric { eps } => eps,
        }
    }

    pub fn gram(&self, space: SpaceTag) -> Vec<f64> {
        let q = self.quad_weights.iter().zip(&self.weight_w);
        match space {
            SpaceTag::H => self.quad_weights.clone(),
            SpaceTag::V => q.map(|(q, w)| q * w).collect(),
            SpaceTag::Vp => q.map(|(q, w)| q / w).collect(),
        }
    }

    pub fn gram_h(&self) -> Vec<f64> {
        self.gram(SpaceTag::H)
    }

    pub fn gram_v(&self) -> Vec<f64> {
        self.gram(SpaceTag::V)
    }

    pub fn gram_vp(&self) -> Vec<f64> {
        self.gram(SpaceTag::Vp)
    }

    pub fn norm(&self, space: SpaceTag, x: &CVec) -> f64 {
        let w = self.space_weights(space);
        x.iter()
            .enumerate()
            .map(|(j, z)| w(j) * z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn inner(&self, space: SpaceTag, x: &CVec, y: &CVec) -> Complex64 {
        let w = self.space_weights(space);
        x.iter()
            .zip(y.iter())
            .enumerate()
            .map(|(j, (a, b))| a * b.conj() * w(j))
            .sum()
    }

    fn space_weights(&self, space: SpaceTag) -> impl Fn(usize) -> f64 + '_ {
        move |j| {
            let (q, w) = (self.quad_weights[j], self.weight_w[j]);
            match space {
                SpaceTag::H => q,
                SpaceTag::V => q * w,
                SpaceTag::Vp => q / w,
            }
        }
    }

    /// Operator norm of `m: X → Y` in nodal coordinates.
    pub fn op_norm(&self, m: &CMat, from: SpaceTag, to: SpaceTag) -> f64 {
        op_norm(m, &self.gram(from), &self.gram(to))
    }

    /// Norm of the form `v* B u` on `V × V`.
    pub fn form_norm(&self, b: &CMat) -> f64 {
        let s: Vec<f64> = self.gram_v().iter().map(|g| 1.0 / g.sqrt()).collect();
        crate::linalg::spectral_norm(&scale_rows_cols(b, &s, &s))
    }

    /// Smallest eigenvalue of the Hermitian part of `B` relative to the V
    /// product: the best `γ` with `Re a(u,u) ≥ γ‖u‖_V²`.
    pub fn form_coercivity(&self, b: &CMat) -> f64 {
        let s: Vec<f64> = self.gram_v().iter().map(|g| 1.0 / g.sqrt()).collect();
        min_hermitian_part_eig(&scale_rows_cols(b, &s, &s))
    }

    /// Form matrix of `(m u, v)_H` for a multiplier `m`.
    pub fn multiplication_form(&self, m: &[f64]) -> CMat {
        CMat::from_diagonal(&CVec::from_iterator(
            self.dim,
            self.quad_weights.iter().zip(m).map(|(q, m)| c(q * m, 0.0)),
        ))
    }
}

pub type FormFn = Arc<dyn Fn(f64) -> CMat + Send + Sync>;

/// Built-in and user-supplied form families.
#[derive(Clone)]
pub enum FormKind {
    /// `B(t) = diag(q_j m(t, x_j))` with
    /// `m(t,x) = base(x)(1 + amp·ω(t)/ω(τ)·sin 2πx)`.
    Multiplication { base: Vec<f64>, amp: f64 },
    /// Dirichlet finite differences between the midpoint nodes,
    /// `a(u,v) = Σ_{j=0}^{N} d(t, jh)(u_{j+1}-u_j)(v̄_{j+1}-v̄_j)/h` with
    /// ghost values `u_0 = u_{N+1} = 0` and
    /// `d(t,x) = 1 + amp·ω(t)/ω(τ)·sin 2πx`.
    FiniteDifference { amp: f64 },
    Custom(FormFn),
}

impl fmt::Debug for FormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Multiplication { amp, .. } => write!(f, "Multiplication {{ amp: {amp} }}"),
            Self::FiniteDifference { amp } => write!(f, "FiniteDifference {{ amp: {amp} }}"),
            Self::Custom(_) => f.write_str("Custom"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NonAutonomousForm {
    pub kind: FormKind,
    pub tau: f64,
    pub omega: DiniModulus,
    pub bound_m: f64,
    pub coercivity_gamma: f64,
}

impl NonAutonomousForm {
    /// Multiplication family; `base` holds `base(x_j)` per node.
    pub fn multiplication(triple: &DiscreteTriple, base: Vec<f64>, amp: f64, omega: DiniModulus, tau: f64) -> Result<Self> {
        if base.len() != triple.dim {
            return Err(Error::DimensionMismatch { expected: triple.dim, got: base.len() });
        }
        if base.iter().any(|b| !(*b > 0.0 && b.is_finite())) || !(amp.abs() < 1.0) {
            return Err(invalid("multiplication form needs base > 0 and |amp| < 1"));
        }
        Self::with_kind(triple, FormKind::Multiplication { base, amp }, omega, tau)
    }

    pub fn finite_difference(triple: &DiscreteTriple, amp: f64, omega: DiniModulus, tau: f64) -> Result<Self> {
        if !(amp.abs() < 1.0) {
            return Err(invalid("finite-difference form needs |amp| < 1"));
        }
        if !matches!(triple.kind, TripleKind::Uniform) {
            return Err(invalid("finite-difference form needs a uniform triple"));
        }
        Self::with_kind(triple, FormKind::FiniteDifference { amp }, omega, tau)
    }

    pub fn custom(triple: &DiscreteTriple, f: FormFn, omega: DiniModulus, tau: f64) -> Result<Self> {
        Self::with_kind(triple, FormKind::Custom(f), omega, tau)
    }

    /// Builds the form and fills `(M, γ)` from 33 samples on `[0, τ]`.
    fn with_kind(triple: &DiscreteTriple, kind: FormKind, omega: DiniModulus, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(invalid("horizon must be positive"));
        }
        let mut form = Self { kind, tau, omega, bound_m: 0.0, coercivity_gamma: 0.0 };
        let samples: Vec<f64> = (0..=32).map(|i| tau * i as f64 / 32.0).collect();
        let k = estimate_form_constants(&form, triple, &samples)?;
        form.bound_m = k.m_est;
        form.coercivity_gamma = k.gamma_est;
        Ok(form)
    }

    pub fn is_autonomous(&self) -> bool {
        match &self.kind {
            FormKind::Multiplication { amp, .. } | FormKind::FiniteDifference { amp } => {
                *amp == 0.0 || self.omega.is_zero()
            }
            FormKind::Custom(_) => self.omega.is_zero(),
        }
    }

    fn profile(&self, t: f64) -> f64 {
        let top = self.omega.eval(self.tau);
        if top == 0.0 {
            0.0
        } else {
            self.omega.eval(t) / top
        }
    }

    /// Form matrix `B(t)`.
    pub fn matrix(&self, triple: &DiscreteTriple, t: f64) -> CMat {
        match &self.kind {
            FormKind::Multiplication { base, amp } => {
                let s = amp * self.profile(t);
                let m: Vec<f64> = base
                    .iter()
                    .zip(&triple.nodes)
                    .map(|(b, x)| b * (1.0 + s * (2.0 * PI * x).sin()))
                    .collect();
                triple.multiplication_form(&m)
            }
            FormKind::FiniteDifference { amp } => {
                let n = triple.dim;
                let h = 1.0 / n as f64;
                let s = amp * self.profile(t);
                let d: Vec<f64> = (0..=n).map(|j| 1.0 + s * (2.0 * PI * j as f64 * h).sin()).collect();
                let mut b = CMat::zeros(n, n);
                for i in 0..n {
                    // interfaces i (left) and i+1 (right) in 0-based node numbering
                    b[(i, i)] = c((d[i] + d[i + 1]) / h, 0.0);
                    if i + 1 < n {
                        b[(i, i + 1)] = c(-d[i + 1] / h, 0.0);
                        b[(i + 1, i)] = c(-d[i + 1] / h, 0.0);
                    }
                }
                b
            }
            FormKind::Custom(f) => f(t),
        }
    }

    /// `a(t; u, v) = v* B(t) u`.
    pub fn eval(&self, triple: &DiscreteTriple, t: f64, u: &CVec, v: &CVec) -> Complex64 {
        (v.adjoint() * self.matrix(triple, t) * u)[(0, 0)]
    }
}

/// `𝒜(t)` and its part `A(t)` in `H`, which share a matrix in nodal
/// coordinates.
#[derive(Debug, Clone)]
pub struct OperatorPair {
    pub t: f64,
    pub form: CMat,
    pub op_h: CMat,
    pub op_vp: CMat,
    pub op_vp_inv: CMat,
}

pub fn form_to_operators(form: &NonAutonomousForm, triple: &DiscreteTriple, t: f64) -> Result<OperatorPair> {
    if !(t >= 0.0 && t <= form.tau * (1.0 + 1e-12)) {
        return Err(invalid(alloc::format!("time {t} outside [0, {}]", form.tau)));
    }
    let b = form.matrix(triple, t);
    operators_from_matrix(triple, t, b)
}

pub fn operators_from_matrix(triple: &DiscreteTriple, t: f64, b: CMat) -> Result<OperatorPair> {
    if b.nrows() != triple.dim || b.ncols() != triple.dim {
        return Err(Error::DimensionMismatch { expected: triple.dim, got: b.nrows() });
    }
    let inv_q: Vec<f64> = triple.quad_weights.iter().map(|q| 1.0 / q).collect();
    let ones = alloc::vec![1.0; triple.dim];
    let op = scale_rows_cols(&b, &inv_q, &ones);
    let op_vp_inv = inverse(&op).ok_or(Error::Singular)?;
    Ok(OperatorPair { t, form: b, op_h: op.clone(), op_vp: op, op_vp_inv })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormConstants {
    pub m_est: f64,
    pub t_m: f64,
    pub gamma_est: f64,
    pub t_gamma: f64,
}

pub fn estimate_form_constants(
    form: &NonAutonomousForm,
    triple: &DiscreteTriple,
    t_samples: &[f64],
) -> Result<FormConstants> {
    if t_samples.is_empty() {
        return Err(invalid("no time samples"));
    }
    let mut k = FormConstants { m_est: 0.0, t_m: t_samples[0], gamma_est: f64::INFINITY, t_gamma: t_samples[0] };
    for &t in t_samples {
        let b = form.matrix(triple, t);
        let m = triple.form_norm(&b);
        let g = triple.form_coercivity(&b);
        if !(m.is_finite() && g.is_finite()) {
            return Err(Error::NonFinite);
        }
        if m > k.m_est {
            k.m_est = m;
            k.t_m = t;
        }
        if g < k.gamma_est {
            k.gamma_est = g;
            k.t_gamma = t;
        }
    }
    if k.gamma_est <= 0.0 {
        return Err(Error::NotCoercive(k.gamma_est));
    }
    Ok(k)
}

/// Largest `‖B(t)-B(s)‖_{V×V} / ω(|t-s|)` over the given pairs; pairs with
/// `ω = 0` must have zero increment.
pub fn modulus_ratio(form: &NonAutonomousForm, triple: &DiscreteTriple, pairs: &[(f64, f64)]) -> f64 {
    let mut worst = 0.0f64;
    for &(t, s) in pairs {
        let d = form.matrix(triple, t) - form.matrix(triple, s);
        let inc = triple.form_norm(&d);
        let w = form.omega.eval((t - s).abs());
        let r = if w > 0.0 { inc / w } else if inc > 0.0 { f64::INFINITY } else { 0.0 };
        worst = worst.max(r);
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolventReport {
    pub theta: f64,
    pub samples: usize,
    /// `sup |λ|·‖(λ+A)⁻¹‖_{L(H)}`.
    pub sup_h: f64,
    /// `sup |λ|·‖(λ+𝒜)⁻¹‖_{L(V′)}`.
    pub sup_vp: f64,
    /// `sup |λ|^{1/2}·‖(λ+A)⁻¹‖_{L(H,V)}`.
    pub sup_h_to_v: f64,
}

/// Points of the closed sector `|arg λ| ≤ θ`: `per_decade` radii per decade
/// on `[r_min, r_max]`, on each of `rays` equispaced angles in `[-θ, θ]`
/// (the two boundary rays included).
pub fn sector_samples(theta: f64, r_min: f64, r_max: f64, per_decade: usize, rays: usize) -> Vec<Complex64> {
    let decades = (r_max / r_min).log10();
    let nr = ((decades * per_decade as f64).ceil() as usize).max(1);
    let rays = rays.max(2);
    let mut out = Vec::with_capacity((nr + 1) * rays);
    for a in 0..rays {
        let phi = -theta + 2.0 * theta * a as f64 / (rays - 1) as f64;
        for i in 0..=nr {
            let r = r_min * (r_max / r_min).powf(i as f64 / nr as f64);
            out.push(Complex64::from_polar(r, phi));
        }
    }
    out
}

pub fn resolvent_bound_check(
    pair: &OperatorPair,
    triple: &DiscreteTriple,
    theta: f64,
    lambda_samples: &[Complex64],
) -> Result<ResolventReport> {
    if !(theta > PI / 2.0 && theta < PI) {
        return Err(invalid("sector angle must lie in (π/2, π)"));
    }
    let n = triple.dim;
    let (gh, gv, gvp) = (triple.gram_h(), triple.gram_v(), triple.gram_vp());
    let mut rep = ResolventReport { theta, samples: lambda_samples.len(), sup_h: 0.0, sup_vp: 0.0, sup_h_to_v: 0.0 };
    for &lam in lambda_samples {
        if lam.norm() == 0.0 || lam.arg().abs() > theta * (1.0 + 1e-12) {
            return Err(invalid(alloc::format!("λ = {lam} lies outside the sector")));
        }
        let mut m = pair.op_h.clone();
        for i in 0..n {
            m[(i, i)] += lam;
        }
        let r = inverse(&m).ok_or(Error::Singular)?;
        let mag = lam.norm();
        rep.sup_h = rep.sup_h.max(mag * op_norm(&r, &gh, &gh));
        rep.sup_vp = rep.sup_vp.max(mag * op_norm(&r, &gvp, &gvp));
        rep.sup_h_to_v = rep.sup_h_to_v.max(mag.sqrt() * op_norm(&r, &gh, &gv));
    }
    Ok(rep)
}
