//! The non-autonomous problem `∂_t^α u + A(t)u = f`, `u(0) = u0`, solved
//! through the Volterra equation for `g = 𝒜(·)u` obtained by freezing the
//! operator at the output time:
//!
//! `u(t) = φ_t(t)u0 + ∫_0^t ψ_t(t-s) [f(s) + (𝒜(t) - 𝒜(s)) u(s)] ds`
//!
//! with `φ_t = φ_{𝒜(t)}`, `ψ_t = ψ_{𝒜(t)}`. Applying `𝒜(t)` gives
//! `g = Qg + Lf + Ru0`.
//!
//! The shift multiplies `u, f, φ, ψ` by `e^{-δ·}`, which turns every kernel
//! `K(t_i, t_j)` into `e^{-δ(t_i - t_j)} K(t_i, t_j)`. The discrete shifted
//! system is assembled as that exact similarity transform, so `δ` changes
//! the norms in which the iteration contracts but not the discretization.
//!
//! Weights `∫ a ψ_a(t_i - s) ϕ_j(s) ds` against the hat functions `ϕ_j` of
//! the grid come from one contour integral per row, using closed-form
//! Laplace moments of the hats, so the `(t_i - s)^{α-1}` singularity is
//! integrated exactly.

use alloc::vec::Vec;
use core::f64::consts::PI;
use nalgebra::Dyn;
use num_complex::Complex64;
#[allow(unused_imports)] // inherent in core on recent toolchains
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fracops::{caputo_derivative, l1_weight, SpaceTag, TimeGrid, Trajectory};
use crate::funcalc::{contour_nodes_with, cpow, scalar_pairs, ContourNodes, ContourSpec};
use crate::linalg::{as_real, c, is_symmetric, op_norm, to_complex, CVec, RMat, Spectral};
use crate::mlf::{ml_real, FracOrder, MLParams};
use crate::reglab::{contraction_integral, IntegralReport};
use crate::special::gamma;
use crate::triple::{DiscreteTriple, NonAutonomousForm, OperatorPair};

/// Ray sub-panels per decade for the weight contour: the hat moments
/// oscillate with phase up to ~35 rad per unit of `ln|λ|`.
const WEIGHT_PANELS_PER_DECADE: usize = 4;

/// Largest `δτ` for which `e^{±δt}` stays comfortably inside double range.
const MAX_SHIFT: f64 = 600.0;

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub alpha: FracOrder,
    pub triple: DiscreteTriple,
    pub form: NonAutonomousForm,
    /// Source in `H`; its grid is the solve grid.
    pub f: Trajectory,
    pub u0: CVec,
    pub p: f64,
}

impl ProblemSpec {
    pub fn new(
        alpha: FracOrder,
        triple: DiscreteTriple,
        form: NonAutonomousForm,
        f: Trajectory,
        u0: CVec,
        p: f64,
    ) -> Result<Self> {
        if f.dim() != triple.dim {
            return Err(Error::DimensionMismatch { expected: triple.dim, got: f.dim() });
        }
        if u0.len() != triple.dim {
            return Err(Error::DimensionMismatch { expected: triple.dim, got: u0.len() });
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(invalid("p must lie in (1, ∞)"));
        }
        if f.grid.steps() < 2 {
            return Err(invalid("solve grid needs at least two steps"));
        }
        let tau = f.grid.tau;
        if (tau - form.tau).abs() > 1e-12 * tau {
            return Err(invalid(alloc::format!("grid horizon {tau} differs from form horizon {}", form.tau)));
        }
        for t in [0.0, 0.5 * tau, tau] {
            real_form(&form, &triple, t)?;
        }
        Ok(Self { alpha, triple, form, f, u0, p })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.f.grid
    }

    pub fn tau(&self) -> f64 {
        self.f.grid.tau
    }

    /// Same problem with another source and initial value.
    pub fn with_data(&self, f: Trajectory, u0: CVec) -> Result<Self> {
        if f.grid != self.f.grid {
            return Err(invalid("source grid differs from the problem grid"));
        }
        Self::new(self.alpha, self.triple.clone(), self.form.clone(), f, u0, self.p)
    }
}

fn real_form(form: &NonAutonomousForm, triple: &DiscreteTriple, t: f64) -> Result<RMat> {
    let b = form.matrix(triple, t);
    let r = as_real(&b, 1e-13).ok_or_else(|| invalid("spectral evaluation needs a real form"))?;
    if !is_symmetric(&r, 1e-12) {
        return Err(invalid("spectral evaluation needs a symmetric form"));
    }
    Ok(r)
}

/// Eigendecomposition of `𝒜(t)` for a real symmetric coercive form.
pub(crate) fn spectral_at(form: &NonAutonomousForm, triple: &DiscreteTriple, t: f64) -> Result<Spectral> {
    let sp = Spectral::from_form(&real_form(form, triple, t)?, &triple.gram_h());
    check_positive(&sp)?;
    Ok(sp)
}

/// Eigendecompositions of `𝒜(t_i)`, shared when the form is autonomous.
#[derive(Debug, Clone)]
struct Spectra {
    list: Vec<Spectral>,
    at: Vec<usize>,
}

impl Spectra {
    fn build(prob: &ProblemSpec) -> Result<Self> {
        let gram = prob.triple.gram_h();
        let nodes = &prob.grid().nodes;
        if prob.form.is_autonomous() {
            let sp = Spectral::from_form(&real_form(&prob.form, &prob.triple, 0.0)?, &gram);
            check_positive(&sp)?;
            return Ok(Self { list: alloc::vec![sp], at: alloc::vec![0; nodes.len()] });
        }
        let mut list = Vec::with_capacity(nodes.len());
        for &t in nodes {
            let sp = Spectral::from_form(&real_form(&prob.form, &prob.triple, t)?, &gram);
            check_positive(&sp)?;
            list.push(sp);
        }
        Ok(Self { list, at: (0..nodes.len()).collect() })
    }

    fn get(&self, i: usize) -> &Spectral {
        &self.list[self.at[i]]
    }
}

fn check_positive(sp: &Spectral) -> Result<()> {
    match sp.eig.first() {
        Some(&l) if l > 0.0 => Ok(()),
        Some(&l) => Err(Error::NotCoercive(l)),
        None => Err(invalid("empty operator")),
    }
}

/// A trajectory stored column-wise as real and imaginary parts.
#[derive(Debug, Clone)]
struct Split {
    re: RMat,
    im: RMat,
}

impl Split {
    fn zeros(n: usize, m: usize) -> Self {
        Self { re: RMat::zeros(n, m), im: RMat::zeros(n, m) }
    }

    fn from_traj(t: &Trajectory) -> Self {
        let (n, m) = (t.dim(), t.len());
        let mut s = Self::zeros(n, m);
        for (j, v) in t.values.iter().enumerate() {
            s.set(j, v);
        }
        s
    }

    fn set(&mut self, j: usize, v: &CVec) {
        for (k, z) in v.iter().enumerate() {
            self.re[(k, j)] = z.re;
            self.im[(k, j)] = z.im;
        }
    }

    fn col(&self, j: usize) -> CVec {
        CVec::from_fn(self.re.nrows(), |k, _| c(self.re[(k, j)], self.im[(k, j)]))
    }

    fn scale_cols(&mut self, s: &[f64]) {
        for (j, &f) in s.iter().enumerate() {
            self.re.column_mut(j).scale_mut(f);
            self.im.column_mut(j).scale_mut(f);
        }
    }

    fn to_traj(&self, grid: &TimeGrid, space: SpaceTag) -> Result<Trajectory> {
        Trajectory::new(grid.clone(), space, (0..self.re.ncols()).map(|j| self.col(j)).collect())
    }
}

/// `Σ_j w[k,j]·x[k,j]` for the first `w.ncols()` columns of `x`, where
/// `x` is given as the product `v_inv·(re + i·im)` over those columns.
fn weighted_row(w: &RMat, v_inv: &RMat, x: &Split, factors: Option<&[f64]>) -> CVec {
    let m = w.ncols();
    let yr = v_inv * x.re.columns(0, m);
    let yi = v_inv * x.im.columns(0, m);
    let n = w.nrows();
    CVec::from_fn(n, |k, _| {
        let mut acc = c(0.0, 0.0);
        for j in 0..m {
            let f = factors.map_or(1.0, |s| s[j]);
            acc += c(yr[(k, j)], yi[(k, j)]) * (w[(k, j)] * f);
        }
        acc
    })
}

fn real_times(m: &RMat, x: &CVec) -> CVec {
    crate::linalg::real_mul(m, x)
}

/// Moments `∫ e^{λr} ϕ(r) dr` of the two hat pieces on the cell
/// `[r_lo, r_lo + h]`: `near` for `(r_hi - r)/h`, `far` for `(r - r_lo)/h`.
/// On the cell at `r = 0` only the terms carrying `e^{λh}` are kept; the
/// rest integrate to zero over the contour because they decay like `λ^{-1}`
/// or faster and are analytic to its right.
fn cell_moments(l: Complex64, r_lo: f64, h: f64) -> (Complex64, Complex64) {
    let z = l * h;
    if r_lo == 0.0 {
        let e = z.exp() * h / (z * z);
        return (e, e * (z - 1.0));
    }
    let (near, far) = if z.norm() < 0.5 {
        // G1 - G2 = Σ z^k/(k!(k+1)(k+2)), G2 = Σ z^k/(k!(k+2))
        let (mut a, mut b) = (c(0.0, 0.0), c(0.0, 0.0));
        let mut zk = c(1.0, 0.0);
        for k in 0..20 {
            let kf = k as f64;
            a += zk / ((kf + 1.0) * (kf + 2.0));
            b += zk / (kf + 2.0);
            zk = zk * z / (kf + 1.0);
        }
        (a, b)
    } else {
        let ez = z.exp();
        let g1 = (ez - 1.0) / z;
        let g2 = (ez * (z - 1.0) + 1.0) / (z * z);
        (g1 - g2, g2)
    };
    let e = (l * r_lo).exp() * h;
    (e * near, e * far)
}

/// Contour for one row of weights: arc radius `1/span` keeps `e^{λr}`
/// bounded for `r ≤ span`, and the rays reach the decay scale of the
/// shortest cell `h`.
fn weight_contour(spec: &ContourSpec, span: f64, h: f64) -> ContourNodes {
    let r = 1.0 / span;
    let r_max = ((1.0 / spec.tail_tol).ln() / (h * spec.theta.cos().abs())).max(2.0 * r);
    contour_nodes_with(spec, r, r_max, 0.0, WEIGHT_PANELS_PER_DECADE)
}

/// `dl·a/(λ^α + a)/π` split into real and imaginary parts (eigen × node).
fn contour_coefficients(nodes: &ContourNodes, alpha: f64, eig: &[f64]) -> (RMat, RMat) {
    let lpow: Vec<Complex64> = nodes.lambda.iter().map(|l| cpow(*l, alpha)).collect();
    let (n, m) = (eig.len(), nodes.len());
    let mut cr = RMat::zeros(n, m);
    let mut ci = RMat::zeros(n, m);
    for (j, (lp, dl)) in lpow.iter().zip(&nodes.dl).enumerate() {
        for (k, &a) in eig.iter().enumerate() {
            let v = *dl * a / ((*lp + a) * PI);
            cr[(k, j)] = v.re;
            ci[(k, j)] = v.im;
        }
    }
    (cr, ci)
}

/// Near/far moments (node × cell) for the cells `(r_lo, h)`.
fn moment_matrices(nodes: &ContourNodes, cells: &[(f64, f64)]) -> [RMat; 4] {
    let (m, nc) = (nodes.len(), cells.len());
    let mut out = [RMat::zeros(m, nc), RMat::zeros(m, nc), RMat::zeros(m, nc), RMat::zeros(m, nc)];
    for (i, l) in nodes.lambda.iter().enumerate() {
        for (j, &(r_lo, h)) in cells.iter().enumerate() {
            let (a, b) = cell_moments(*l, r_lo, h);
            out[0][(i, j)] = a.re;
            out[1][(i, j)] = a.im;
            out[2][(i, j)] = b.re;
            out[3][(i, j)] = b.im;
        }
    }
    out
}

/// `Im(C·M)` for the split coefficient and moment matrices.
fn im_product(cr: &RMat, ci: &RMat, mr: &RMat, mi: &RMat) -> RMat {
    cr * mi + ci * mr
}

/// Node weights of row `i` from cell weights indexed by `cell(c)`.
fn compose_row(i: usize, near: impl Fn(usize) -> usize, far: impl Fn(usize) -> usize, wn: &RMat, wf: &RMat) -> RMat {
    let n = wn.nrows();
    RMat::from_fn(n, i + 1, |k, j| {
        let mut w = 0.0;
        if j >= 1 {
            w += wn[(k, near(j - 1))];
        }
        if j < i {
            w += wf[(k, far(j))];
        }
        w
    })
}

/// Product-integration weights `W[i][k, j] = ∫ a_k ψ_{a_k}(t_i - s) ϕ_j(s) ds`
/// with `a_k` the eigenvalues of `𝒜(t_i)`.
#[derive(Debug, Clone)]
enum Weights {
    /// Uniform grid and fixed operator: cell weights by lag.
    Lag { near: RMat, far: RMat },
    Rows(Vec<RMat>),
}

impl Weights {
    fn build(prob: &ProblemSpec, spectra: &Spectra, spec: &ContourSpec) -> Self {
        let grid = prob.grid();
        let t = &grid.nodes;
        let nn = grid.steps();
        let al = prob.alpha.get();
        let autonomous = spectra.list.len() == 1;
        if grid.is_uniform() {
            let h = grid.tau / nn as f64;
            let nodes = weight_contour(spec, grid.tau, h);
            let cells: Vec<(f64, f64)> = (0..nn).map(|l| (l as f64 * h, h)).collect();
            let [nr, ni, fr, fi] = moment_matrices(&nodes, &cells);
            if autonomous {
                let (cr, ci) = contour_coefficients(&nodes, al, &spectra.list[0].eig);
                return Self::Lag { near: im_product(&cr, &ci, &nr, &ni), far: im_product(&cr, &ci, &fr, &fi) };
            }
            let mut rows = Vec::with_capacity(nn + 1);
            rows.push(RMat::zeros(spectra.get(0).dim(), 1));
            for i in 1..=nn {
                let (cr, ci) = contour_coefficients(&nodes, al, &spectra.get(i).eig);
                let wn = im_product(&cr, &ci, &nr.columns(0, i).into_owned(), &ni.columns(0, i).into_owned());
                let wf = im_product(&cr, &ci, &fr.columns(0, i).into_owned(), &fi.columns(0, i).into_owned());
                rows.push(compose_row(i, |cc| i - 1 - cc, |cc| i - 1 - cc, &wn, &wf));
            }
            return Self::Rows(rows);
        }
        let mut rows = Vec::with_capacity(nn + 1);
        rows.push(RMat::zeros(spectra.get(0).dim(), 1));
        for i in 1..=nn {
            let nodes = weight_contour(spec, t[i], t[i] - t[i - 1]);
            let cells: Vec<(f64, f64)> = (0..i).map(|cc| (if cc + 1 == i { 0.0 } else { t[i] - t[cc + 1] }, t[cc + 1] - t[cc])).collect();
            let [nr, ni, fr, fi] = moment_matrices(&nodes, &cells);
            let (cr, ci) = contour_coefficients(&nodes, al, &spectra.get(i).eig);
            let wn = im_product(&cr, &ci, &nr, &ni);
            let wf = im_product(&cr, &ci, &fr, &fi);
            rows.push(compose_row(i, |cc| cc, |cc| cc, &wn, &wf));
        }
        Self::Rows(rows)
    }

    fn row(&self, i: usize) -> RMat {
        match self {
            Self::Lag { near, far } => compose_row(i, |cc| i - 1 - cc, |cc| i - 1 - cc, near, far),
            Self::Rows(rows) => rows[i].clone(),
        }
    }
}

/// Contraction bound `q = C·∫_0^τ e^{-δr} ω(r) r^{-1-α/2} dr`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionEstimate {
    pub delta: f64,
    pub q: f64,
    pub kernel_constant: f64,
    pub integral: Option<IntegralReport>,
}

/// `C = sup ‖K(t,s)‖_{L(H)} r^{1+α/2}/ω(r)` over sampled pairs, `r = t - s`,
/// `K(t,s) = 𝒜(t)ψ_t(r)(𝒜(t) - 𝒜(s))𝒜(s)^{-1}`.
pub fn kernel_constant(prob: &ProblemSpec, spec: &ContourSpec) -> Result<f64> {
    if prob.form.is_autonomous() {
        return Ok(0.0);
    }
    let tau = prob.tau();
    let gram = prob.triple.gram_h();
    let al = prob.alpha.get();
    let n = prob.triple.dim;
    let mut sup = 0.0f64;
    for frac in [0.25, 0.5, 0.75, 1.0] {
        let t = frac * tau;
        let bt = real_form(&prob.form, &prob.triple, t)?;
        let sp = Spectral::from_form(&bt, &gram);
        let at = RMat::from_fn(n, n, |i, j| bt[(i, j)] / gram[i]);
        for r in crate::funcalc::log_grid(1e-3 * tau, t, 8) {
            let w = prob.form.omega.eval(r);
            let bs = real_form(&prob.form, &prob.triple, t - r)?;
            // 𝒜(t)𝒜(s)^{-1} - I = 𝒜(t) B_s^{-1} G - I
            let bs_inv = bs.lu().try_inverse().ok_or(Error::Singular)?;
            let mut d = &at * bs_inv * RMat::from_diagonal(&nalgebra::DVector::from_column_slice(&gram));
            for i in 0..n {
                d[(i, i)] -= 1.0;
            }
            let pairs = scalar_pairs(prob.alpha, &sp.eig, r, spec)?;
            let vals: Vec<f64> = sp.eig.iter().zip(&pairs).map(|(a, p)| a * p[1]).collect();
            let k = sp.func_values(&vals) * d;
            let norm = op_norm(&to_complex(&k), &gram, &gram);
            if norm == 0.0 {
                continue;
            }
            if w == 0.0 {
                return Err(Error::Divergent(alloc::format!("form moves while ω({r:e}) = 0")));
            }
            sup = sup.max(norm * r.powf(1.0 + al / 2.0) / w);
        }
    }
    Ok(sup)
}

fn contraction_from(prob: &ProblemSpec, c_k: f64, delta: f64) -> Result<ContractionEstimate> {
    if c_k == 0.0 {
        return Ok(ContractionEstimate { delta, q: 0.0, kernel_constant: 0.0, integral: None });
    }
    let rep = contraction_integral(&prob.form.omega, prob.alpha, prob.tau(), delta)?;
    if !rep.finite {
        return Err(Error::Divergent(alloc::format!(
            "∫ ω(r) r^(-1-α/2) dr diverges at 0 (rate {:.3e} per unit ln(1/ε)); no δ gives a contraction",
            rep.divergence_rate.unwrap_or(f64::NAN)
        )));
    }
    Ok(ContractionEstimate { delta, q: c_k * rep.value, kernel_constant: c_k, integral: Some(rep) })
}

pub fn contraction_estimate(prob: &ProblemSpec, spec: &ContourSpec, delta: f64) -> Result<ContractionEstimate> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(invalid("delta must be finite and nonnegative"));
    }
    let c_k = kernel_constant(prob, spec)?;
    contraction_from(prob, c_k, delta)
}

pub const DELTA_CAP: f64 = 1e6;

/// Smallest `δ ∈ {0} ∪ {1, 2, 4, …}` whose bound is at most `target_q`.
pub fn select_delta(prob: &ProblemSpec, spec: &ContourSpec, target_q: f64) -> Result<f64> {
    if !(target_q > 0.0 && target_q < 1.0) {
        return Err(invalid("target q must lie in (0,1)"));
    }
    let c_k = kernel_constant(prob, spec)?;
    let mut est = contraction_from(prob, c_k, 0.0)?;
    if est.q <= target_q {
        return Ok(0.0);
    }
    let mut delta = 1.0;
    while delta <= DELTA_CAP {
        est = contraction_from(prob, c_k, delta)?;
        if est.q <= target_q {
            return Ok(delta);
        }
        delta *= 2.0;
    }
    Err(Error::NoContraction { q: est.q, delta: est.delta })
}

/// Discrete shifted system `g^δ = Q^δ g^δ + L f^δ + R^δ u0`.
#[derive(Debug, Clone)]
pub struct ShiftedSystem {
    pub delta: f64,
    pub q: f64,
    pub kernel_constant: f64,
    pub bound: Option<IntegralReport>,
    /// `e^{-δt}·𝒜(t)∫_0^t ψ_t(t-s) f(s) ds`.
    pub lf: Trajectory,
    /// `e^{-δt}·𝒜(t)φ_t(t) u0`.
    pub ru0: Trajectory,
    alpha: FracOrder,
    p: f64,
    gram_h: Vec<f64>,
    spectra: Spectra,
    weights: Weights,
    f: Trajectory,
    u0: CVec,
}

pub fn assemble_shifted_system(prob: &ProblemSpec, delta: f64, spec: &ContourSpec) -> Result<ShiftedSystem> {
    spec.validate()?;
    if !(delta >= 0.0 && delta * prob.tau() <= MAX_SHIFT) {
        return Err(invalid(alloc::format!("delta must lie in [0, {}/τ]", MAX_SHIFT)));
    }
    let est = contraction_estimate(prob, spec, delta)?;
    if est.q >= 1.0 {
        return Err(Error::NoContraction { q: est.q, delta });
    }
    let spectra = Spectra::build(prob)?;
    let weights = Weights::build(prob, &spectra, spec);
    let grid = prob.grid();
    let nodes = &grid.nodes;
    let n = prob.triple.dim;
    let shift: Vec<f64> = nodes.iter().map(|t| (-delta * t).exp()).collect();

    let fs = Split::from_traj(&prob.f);
    let mut lf = Split::zeros(n, nodes.len());
    let mut ru0 = Split::zeros(n, nodes.len());
    let zero_u0 = prob.u0.iter().all(|z| *z == c(0.0, 0.0));
    for i in 0..nodes.len() {
        let sp = spectra.get(i);
        if i > 0 {
            let w = weights.row(i);
            let acc = weighted_row(&w, &sp.v_inv, &fs, None);
            lf.set(i, &real_times(&sp.v, &acc));
        }
        if zero_u0 {
            continue;
        }
        let vals: Vec<f64> = if i == 0 {
            sp.eig.clone()
        } else {
            let pairs = scalar_pairs(prob.alpha, &sp.eig, nodes[i], spec)?;
            sp.eig.iter().zip(&pairs).map(|(a, p)| a * p[0]).collect()
        };
        ru0.set(i, &sp.apply(&vals, &prob.u0));
    }
    lf.scale_cols(&shift);
    ru0.scale_cols(&shift);
    Ok(ShiftedSystem {
        delta,
        q: est.q,
        kernel_constant: est.kernel_constant,
        bound: est.integral,
        lf: lf.to_traj(grid, SpaceTag::H)?,
        ru0: ru0.to_traj(grid, SpaceTag::H)?,
        alpha: prob.alpha,
        p: prob.p,
        gram_h: prob.triple.gram_h(),
        spectra,
        weights,
        f: prob.f.clone(),
        u0: prob.u0.clone(),
    })
}

impl ShiftedSystem {
    pub fn is_autonomous(&self) -> bool {
        self.spectra.list.len() == 1
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.f.grid
    }

    pub fn dim(&self) -> usize {
        self.u0.len()
    }

    /// `Q^δ g` for a shifted trajectory `g`.
    pub fn apply_q(&self, g: &Trajectory) -> Result<Trajectory> {
        if g.grid != *self.grid() || g.dim() != self.dim() {
            return Err(invalid("trajectory does not match the system"));
        }
        self.apply_q_split(&Split::from_traj(g)).to_traj(self.grid(), SpaceTag::H)
    }

    fn apply_q_split(&self, g: &Split) -> Split {
        let nodes = &self.grid().nodes;
        let n = self.dim();
        let mut out = Split::zeros(n, nodes.len());
        if self.is_autonomous() {
            return out;
        }
        // u_j = 𝒜_j^{-1} g_j
        let mut u = Split::zeros(n, nodes.len());
        for j in 0..nodes.len() {
            let sp = self.spectra.get(j);
            let inv: Vec<f64> = sp.eig.iter().map(|a| 1.0 / a).collect();
            u.set(j, &sp.apply(&inv, &g.col(j)));
        }
        for i in 1..nodes.len() {
            let sp = self.spectra.get(i);
            let w = self.weights.row(i);
            let w = w.columns(0, i).into_owned();
            let factors: Vec<f64> = (0..i).map(|j| (-self.delta * (nodes[i] - nodes[j])).exp()).collect();
            let mut acc = weighted_row(&w, &sp.v_inv, &u, Some(&factors));
            for (z, a) in acc.iter_mut().zip(&sp.eig) {
                *z *= *a;
            }
            acc -= weighted_row(&w, &sp.v_inv, g, Some(&factors));
            out.set(i, &real_times(&sp.v, &acc));
        }
        out
    }

    fn lp_norm(&self, s: &Split, unshift: bool) -> f64 {
        let t = &self.grid().nodes;
        let vals: Vec<f64> = (0..t.len())
            .map(|j| {
                let mut acc = 0.0;
                for k in 0..s.re.nrows() {
                    acc += self.gram_h[k] * (s.re[(k, j)].powi(2) + s.im[(k, j)].powi(2));
                }
                let scale = if unshift { (self.delta * t[j]).exp() } else { 1.0 };
                (acc.sqrt() * scale).powf(self.p)
            })
            .collect();
        let mut sum = 0.0;
        for k in 0..t.len() - 1 {
            sum += 0.5 * (t[k + 1] - t[k]) * (vals[k] + vals[k + 1]);
        }
        sum.powf(1.0 / self.p)
    }
}

/// Iterates, recovered solution and the consistency diagnostics.
#[derive(Debug, Clone)]
pub struct NeumannSolution {
    /// Shifted `g^δ = e^{-δt}𝒜(t)u(t)`.
    pub g: Trajectory,
    pub u: Trajectory,
    /// `A(t)u(t)`.
    pub au: Trajectory,
    /// `∂_t^α u = f - A(·)u`.
    pub du: Trajectory,
    /// `∂_t^α u` by the L1 scheme applied to `u`.
    pub du_l1: Trajectory,
    pub iterations: usize,
    /// Relative `L_p` increments in the shifted norm.
    pub increments: Vec<f64>,
    /// Relative `L_p` increments of the unshifted iterates.
    pub plain_increments: Vec<f64>,
    /// `‖du - du_l1‖ / ‖du‖` in `L_p(t_1, τ; H)`.
    pub caputo_discrepancy: f64,
}

pub fn neumann_solve(sys: &ShiftedSystem, tol: f64, max_iter: usize) -> Result<NeumannSolution> {
    if !(tol > 0.0) || max_iter == 0 {
        return Err(invalid("need tol > 0 and max_iter >= 1"));
    }
    if sys.q >= 1.0 {
        return Err(Error::NoContraction { q: sys.q, delta: sys.delta });
    }
    let grid = sys.grid().clone();
    let n = sys.dim();
    let m = grid.len();
    let mut b = Split::from_traj(&sys.lf);
    let r = Split::from_traj(&sys.ru0);
    b.re += &r.re;
    b.im += &r.im;

    let mut g = Split::zeros(n, m);
    let mut increments = Vec::new();
    let mut plain = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let mut next = sys.apply_q_split(&g);
        next.re += &b.re;
        next.im += &b.im;
        let diff = Split { re: &next.re - &g.re, im: &next.im - &g.im };
        let rel = |d: f64, v: f64| if d == 0.0 { 0.0 } else { d / v };
        let inc = rel(sys.lp_norm(&diff, false), sys.lp_norm(&next, false));
        let inc_plain = rel(sys.lp_norm(&diff, true), sys.lp_norm(&next, true));
        increments.push(inc);
        plain.push(inc_plain);
        g = next;
        if !(inc.is_finite() && inc_plain.is_finite()) {
            return Err(Error::Divergent("non-finite Neumann iterate".into()));
        }
        // Q = 0 makes the first iterate exact
        if sys.is_autonomous() || (inc <= tol && inc_plain <= tol) {
            converged = true;
            break;
        }
        let k = increments.len();
        if k >= 4 && increments[k - 1] > increments[k - 2] && increments[k - 2] > increments[k - 3]
            && increments[k - 3] > increments[k - 4] && increments[k - 1] > 1.0
        {
            return Err(Error::Divergent(alloc::format!("Neumann increments growing: {:.3e}", increments[k - 1])));
        }
    }
    if !converged {
        return Err(Error::NoConvergence { iterations, increment: *plain.last().unwrap_or(&f64::NAN) });
    }

    let nodes = &grid.nodes;
    let mut au = g.clone();
    au.scale_cols(&nodes.iter().map(|t| (sys.delta * t).exp()).collect::<Vec<_>>());
    let mut u = Split::zeros(n, m);
    for j in 0..m {
        let sp = sys.spectra.get(j);
        let inv: Vec<f64> = sp.eig.iter().map(|a| 1.0 / a).collect();
        u.set(j, &sp.apply(&inv, &au.col(j)));
    }
    let u = u.to_traj(&grid, SpaceTag::V)?;
    let au = au.to_traj(&grid, SpaceTag::H)?;
    let du = sys.f.combine(c(1.0, 0.0), &au, c(-1.0, 0.0))?;
    let du_l1 = caputo_derivative(sys.alpha, &u, &sys.u0)?;
    let diff = du.combine(c(1.0, 0.0), &du_l1, c(-1.0, 0.0))?;
    let gram = &sys.gram_h;
    let hn = |x: &CVec| crate::linalg::weighted_norm(x, gram);
    let den = crate::fracops::lp_time_norm_range(sys.p, &du, hn, 1..m)?;
    let num = crate::fracops::lp_time_norm_range(sys.p, &diff, hn, 1..m)?;
    let caputo_discrepancy = if den > 0.0 { num / den } else { num };
    Ok(NeumannSolution {
        g: g.to_traj(&grid, SpaceTag::H)?,
        u,
        au,
        du,
        du_l1,
        iterations,
        increments,
        plain_increments: plain,
        caputo_discrepancy,
    })
}

/// `L_p(0,τ;H)` norms entering the maximal-regularity estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityNorms {
    pub u: f64,
    pub du: f64,
    pub au: f64,
    pub f: f64,
}

impl RegularityNorms {
    /// `(‖u‖ + ‖∂^α u‖ + ‖Au‖)/(‖f‖ + u0_norm)`.
    pub fn c_est(&self, u0_norm: f64) -> f64 {
        (self.u + self.du + self.au) / (self.f + u0_norm)
    }
}

pub fn regularity_norms(prob: &ProblemSpec, sol: &NeumannSolution) -> Result<RegularityNorms> {
    let gram = prob.triple.gram_h();
    let hn = |x: &CVec| crate::linalg::weighted_norm(x, &gram);
    let p = prob.p;
    Ok(RegularityNorms {
        u: crate::fracops::lp_time_norm(p, &sol.u, hn)?,
        du: crate::fracops::lp_time_norm(p, &sol.du, hn)?,
        au: crate::fracops::lp_time_norm(p, &sol.au, hn)?,
        f: crate::fracops::lp_time_norm(p, &prob.f, hn)?,
    })
}

/// Largest relative residual of `(∂^α u, v)_H + a(t; u, v) - (f, v)_H`
/// over nodes `t_i ≥ t_min`, `i ≥ 1`, and the test vectors.
pub fn weak_residual(prob: &ProblemSpec, u: &Trajectory, du: &Trajectory, tests: &[CVec], t_min: f64) -> Result<f64> {
    let grid = prob.grid();
    if u.grid != *grid || du.grid != *grid {
        return Err(invalid("trajectories must live on the problem grid"));
    }
    let tr = &prob.triple;
    let mut worst = 0.0f64;
    for i in 1..grid.len() {
        let t = grid.nodes[i];
        if t < t_min {
            continue;
        }
        let b = prob.form.matrix(tr, t);
        for v in tests {
            let d = tr.inner(SpaceTag::H, &du.values[i], v);
            let a = (v.adjoint() * &b * &u.values[i])[(0, 0)];
            let f = tr.inner(SpaceTag::H, &prob.f.values[i], v);
            let scale = d.norm() + a.norm() + f.norm();
            if scale > 0.0 {
                worst = worst.max((d + a - f).norm() / scale);
            }
        }
    }
    Ok(worst)
}

/// Implicit L1 time stepping of `∂^α u + A(t)u = f`, independent of the
/// contour machinery: `(b_0 G + B(t_n)) u_n = G(f_n + b_0 u_{n-1} - history)`.
pub fn l1_direct_stepper(prob: &ProblemSpec) -> Result<Trajectory> {
    let grid = prob.grid();
    let nodes = &grid.nodes;
    let n = prob.triple.dim;
    let a = prob.alpha.get();
    let g2 = gamma(2.0 - a);
    let gram = prob.triple.gram_h();
    let reuse = prob.form.is_autonomous() && grid.is_uniform();
    let mut lu: Option<nalgebra::LU<f64, Dyn, Dyn>> = None;
    let mut u = Vec::with_capacity(nodes.len());
    u.push(prob.u0.clone());
    let mut inc: Vec<CVec> = Vec::with_capacity(nodes.len());
    for m in 1..nodes.len() {
        let b0 = l1_weight(nodes, m, m - 1, a, g2);
        let mut rhs = prob.f.values[m].clone() + &u[m - 1] * c(b0, 0.0);
        for (j, d) in inc.iter().enumerate() {
            let w = l1_weight(nodes, m, j, a, g2);
            rhs.axpy(c(-w, 0.0), d, c(1.0, 0.0));
        }
        for (z, g) in rhs.iter_mut().zip(&gram) {
            *z *= *g;
        }
        if lu.is_none() || !reuse {
            let mut mat = real_form(&prob.form, &prob.triple, nodes[m])?;
            for k in 0..n {
                mat[(k, k)] += b0 * gram[k];
            }
            lu = Some(mat.lu());
        }
        let f = lu.as_ref().ok_or(Error::Singular)?;
        let xr = f.solve(&rhs.map(|z| z.re)).ok_or(Error::Singular)?;
        let xi = f.solve(&rhs.map(|z| z.im)).ok_or(Error::Singular)?;
        let un = CVec::from_fn(n, |k, _| c(xr[k], xi[k]));
        inc.push(&un - &u[m - 1]);
        u.push(un);
    }
    Trajectory::new(grid.clone(), SpaceTag::V, u)
}

/// `u(t) = φ(t)u0 + ∫_0^t ψ(t-s) f(s) ds` for a fixed operator, with `f`
/// piecewise linear and every weight in closed form through
/// `∫_0^r ψ_a = r^α E_{α,α+1}(-a r^α)` and
/// `∫_0^r ρ ψ_a(ρ) dρ = r^{α+1}[E_{α,α+1} - E_{α,α+2}](-a r^α)`.
pub fn closed_form_autonomous(
    alpha: FracOrder,
    op: &OperatorPair,
    triple: &DiscreteTriple,
    grid: &TimeGrid,
    u0: &CVec,
    f: &Trajectory,
) -> Result<Trajectory> {
    let b = as_real(&op.form, 1e-13).ok_or_else(|| invalid("closed form needs a real operator"))?;
    if !is_symmetric(&b, 1e-12) {
        return Err(invalid("closed form needs a symmetric form"));
    }
    if f.grid != *grid || f.dim() != triple.dim || u0.len() != triple.dim {
        return Err(invalid("data do not match the grid and triple"));
    }
    let sp = Spectral::from_form(&b, &triple.gram_h());
    check_positive(&sp)?;
    let al = alpha.get();
    let e1 = MLParams::new(al, 1.0)?;
    let e2 = MLParams::new(al, al + 1.0)?;
    let e3 = MLParams::new(al, al + 2.0)?;
    // (∫_0^r ψ_a, ∫_0^r ρψ_a)
    let moments = |a: f64, r: f64| -> Result<(f64, f64)> {
        if r == 0.0 {
            return Ok((0.0, 0.0));
        }
        let x = -a * r.powf(al);
        let m1 = ml_real(&e2, x)?;
        let m2 = ml_real(&e3, x)?;
        Ok((r.powf(al) * m1, r.powf(al + 1.0) * (m1 - m2)))
    };
    let t = &grid.nodes;
    let nn = grid.steps();
    let n = sp.dim();
    let fs = Split::from_traj(f);
    let uhat = real_times(&sp.v_inv, u0);
    let mut out = Vec::with_capacity(t.len());
    out.push(u0.clone());
    // cell weights from primitive values at r_lo and r_hi
    let cell = |p_lo: (f64, f64), p_hi: (f64, f64), r_lo: f64, r_hi: f64| {
        let h = r_hi - r_lo;
        let dj = p_hi.0 - p_lo.0;
        let dk = p_hi.1 - p_lo.1;
        ((r_hi * dj - dk) / h, (dk - r_lo * dj) / h)
    };
    let lag_table: Option<Vec<Vec<(f64, f64)>>> = if grid.is_uniform() {
        let h = grid.tau / nn as f64;
        let mut tab = Vec::with_capacity(n);
        for &a in &sp.eig {
            tab.push((0..=nn).map(|l| moments(a, l as f64 * h)).collect::<Result<Vec<_>>>()?);
        }
        Some(tab)
    } else {
        None
    };
    for i in 1..t.len() {
        let mut w = RMat::zeros(n, i + 1);
        for (k, &a) in sp.eig.iter().enumerate() {
            let prim: Vec<(f64, f64)> = match &lag_table {
                Some(tab) => (0..=i).map(|l| tab[k][l]).collect(),
                // r = t_i - t_c for c = i, i-1, …, 0
                None => (0..=i).map(|l| moments(a, t[i] - t[i - l])).collect::<Result<Vec<_>>>()?,
            };
            for cc in 0..i {
                // s-cell [t_c, t_{c+1}] ↔ r in [t_i - t_{c+1}, t_i - t_c]
                let (l_lo, l_hi) = (i - 1 - cc, i - cc);
                let (r_lo, r_hi) = (t[i] - t[cc + 1], t[i] - t[cc]);
                let (near, far) = cell(prim[l_lo], prim[l_hi], r_lo, r_hi);
                w[(k, cc + 1)] += near;
                w[(k, cc)] += far;
            }
        }
        let mut acc = weighted_row(&w, &sp.v_inv, &fs, None);
        for (k, &a) in sp.eig.iter().enumerate() {
            acc[k] += uhat[k] * ml_real(&e1, -a * t[i].powf(al))?;
        }
        out.push(real_times(&sp.v, &acc));
    }
    Trajectory::new(grid.clone(), SpaceTag::V, out)
}
