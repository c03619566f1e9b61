//! Discrete Caputo calculus on time grids: the L1 scheme, product
//! integration against the kernel `k`, the product-rule remainder and
//! `L_p`-in-time norms.

use alloc::vec::Vec;
use core::ops::Range;
use num_complex::Complex64;
#[allow(unused_imports)] // inherent in core on recent toolchains
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::CVec;
use crate::mlf::{caputo_kernel, FracOrder};
use crate::quad::GaussLegendre;
use crate::special::{beta, gamma};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridKind {
    Uniform,
    /// `t_j = τ (j/N)^r`.
    Graded { r: f64 },
    /// Nodes supplied explicitly.
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub tau: f64,
    pub nodes: Vec<f64>,
    pub kind: GridKind,
}

impl TimeGrid {
    pub fn uniform(tau: f64, steps: usize) -> Result<Self> {
        Self::graded_inner(tau, steps, 1.0, GridKind::Uniform)
    }

    pub fn graded(tau: f64, steps: usize, r: f64) -> Result<Self> {
        if !(r >= 1.0) {
            return Err(invalid(alloc::format!("grading exponent must be >= 1, got {r}")));
        }
        Self::graded_inner(tau, steps, r, GridKind::Graded { r })
    }

    /// Grading `(2-α)/α`, capped at 4.
    pub fn default_grading(alpha: FracOrder) -> f64 {
        let a = alpha.get();
        ((2.0 - a) / a).min(4.0)
    }

    fn graded_inner(tau: f64, steps: usize, r: f64, kind: GridKind) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(invalid(alloc::format!("horizon must be positive, got {tau}")));
        }
        if steps < 1 {
            return Err(invalid("time grid needs at least one step"));
        }
        let n = steps as f64;
        let mut nodes: Vec<f64> = (0..=steps)
            .map(|j| tau * (j as f64 / n).powf(r))
            .collect();
        nodes[steps] = tau;
        Ok(Self { tau, nodes, kind })
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes[0] != 0.0 {
            return Err(invalid("grid must start at 0 and have at least two nodes"));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("grid nodes must be strictly increasing"));
        }
        let tau = *nodes.last().unwrap_or(&0.0);
        Ok(Self { tau, nodes, kind: GridKind::Custom })
    }

    /// Number of nodes, `N + 1`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.kind, GridKind::Uniform)
    }

    /// Step `t_{j+1} - t_j`.
    pub fn h(&self, j: usize) -> f64 {
        self.nodes[j + 1] - self.nodes[j]
    }

    /// Index of the node closest to `t`.
    pub fn nearest(&self, t: f64) -> usize {
        let mut best = 0;
        for (i, &x) in self.nodes.iter().enumerate() {
            if (x - t).abs() < (self.nodes[best] - t).abs() {
                best = i;
            }
        }
        best
    }
}

/// Which space of the triple a trajectory lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpaceTag {
    V,
    H,
    Vp,
}

/// One vector per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub space: SpaceTag,
    pub values: Vec<CVec>,
}

impl Trajectory {
    pub fn new(grid: TimeGrid, space: SpaceTag, values: Vec<CVec>) -> Result<Self> {
        if grid.is_empty() {
            return Err(invalid("empty grid"));
        }
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        let d = values[0].len();
        if let Some(v) = values.iter().find(|v| v.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: v.len() });
        }
        Ok(Self { grid, space, values })
    }

    pub fn from_fn(grid: TimeGrid, space: SpaceTag, f: impl FnMut(f64) -> CVec) -> Result<Self> {
        let values = grid.nodes.iter().copied().map(f).collect();
        Self::new(grid, space, values)
    }

    pub fn scalar(grid: TimeGrid, mut f: impl FnMut(f64) -> Complex64) -> Self {
        let values = grid
            .nodes
            .iter()
            .map(|&t| CVec::from_element(1, f(t)))
            .collect();
        Self { grid, space: SpaceTag::H, values }
    }

    pub fn zeros(grid: TimeGrid, space: SpaceTag, dim: usize) -> Self {
        let values = alloc::vec![CVec::zeros(dim); grid.len()];
        Self { grid, space, values }
    }

    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, |v| v.len())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Values of one component along the grid.
    pub fn component(&self, k: usize) -> Vec<Complex64> {
        self.values.iter().map(|v| v[k]).collect()
    }

    pub fn map(&self, mut f: impl FnMut(f64, &CVec) -> CVec) -> Self {
        let values = self
            .grid
            .nodes
            .iter()
            .zip(&self.values)
            .map(|(&t, v)| f(t, v))
            .collect();
        Self { grid: self.grid.clone(), space: self.space, values }
    }

    /// `a·self + b·other` on the same grid.
    pub fn combine(&self, a: Complex64, other: &Self, b: Complex64) -> Result<Self> {
        if other.len() != self.len() || other.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.len() * self.dim(),
                got: other.len() * other.dim(),
            });
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| x * a + y * b)
            .collect();
        Ok(Self { grid: self.grid.clone(), space: self.space, values })
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| (x - y).iter().fold(0.0f64, |m, z| m.max(z.norm())))
            .fold(0.0, f64::max)
    }
}

fn check_dims(u: &Trajectory, u0: &CVec) -> Result<()> {
    if u.is_empty() {
        return Err(invalid("empty trajectory"));
    }
    if u0.len() != u.dim() {
        return Err(Error::DimensionMismatch { expected: u.dim(), got: u0.len() });
    }
    Ok(())
}

/// L1 weight `[(t_n-t_j)^{1-α} - (t_n-t_{j+1})^{1-α}] / (Γ(2-α) h_j)`.
pub(crate) fn l1_weight(nodes: &[f64], n: usize, j: usize, a: f64, g2: f64) -> f64 {
    let (tn, tj, tj1) = (nodes[n], nodes[j], nodes[j + 1]);
    ((tn - tj).powf(1.0 - a) - (tn - tj1).powf(1.0 - a)) / (g2 * (tj1 - tj))
}

/// L1 discretization of `∂_t^α u = d/dt k*(u - u0)`. The value at `t_0`,
/// where the derivative of a Hölder function need not exist, repeats the
/// value at `t_1`.
pub fn caputo_derivative(alpha: FracOrder, u: &Trajectory, u0: &CVec) -> Result<Trajectory> {
    check_dims(u, u0)?;
    let a = alpha.get();
    let g2 = gamma(2.0 - a);
    let nodes = &u.grid.nodes;
    let n_nodes = nodes.len();
    let dim = u.dim();
    // increments of the piecewise-linear reconstruction, starting from u0
    let inc: Vec<CVec> = (0..n_nodes.saturating_sub(1))
        .map(|j| {
            let prev = if j == 0 { u0 } else { &u.values[j] };
            &u.values[j + 1] - prev
        })
        .collect();
    let mut out = alloc::vec![CVec::zeros(dim); n_nodes];
    for n in 1..n_nodes {
        let mut acc = CVec::zeros(dim);
        for (j, d) in inc.iter().enumerate().take(n) {
            let w = l1_weight(nodes, n, j, a, g2);
            acc.axpy(Complex64::new(w, 0.0), d, Complex64::new(1.0, 0.0));
        }
        out[n] = acc;
    }
    if n_nodes > 1 {
        out[0] = out[1].clone();
    }
    Trajectory::new(u.grid.clone(), u.space, out)
}

/// Shape assumed for the convolved function between nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StartBehavior {
    /// Linear interpolation between nodes.
    Linear,
    /// `g(s) = s^β ĝ(s)` with `ĝ` interpolated linearly and the weight `s^β`
    /// integrated exactly. The value stored at `t_0` is read as the limit
    /// `ĝ(0)` when it is finite and replaced by `ĝ(t_1)` otherwise, so weakly
    /// singular data such as `s^{α-1}` can be convolved.
    Power(f64),
}

/// `(k*g)(t_n)` by product integration: exact moments of `k` against the
/// piecewise-linear interpolant of `g`.
pub fn kernel_convolve(alpha: FracOrder, g: &Trajectory) -> Result<Trajectory> {
    kernel_convolve_with(alpha, g, StartBehavior::Linear)
}

pub fn kernel_convolve_with(
    alpha: FracOrder,
    g: &Trajectory,
    start: StartBehavior,
) -> Result<Trajectory> {
    if g.is_empty() {
        return Err(invalid("empty grid"));
    }
    let a = alpha.get();
    let g1 = gamma(1.0 - a);
    let nodes = &g.grid.nodes;
    let dim = g.dim();
    let one = Complex64::new(1.0, 0.0);
    let mut out = alloc::vec![CVec::zeros(dim); nodes.len()];
    match start {
        StartBehavior::Linear => {
            for n in 1..nodes.len() {
                let mut acc = CVec::zeros(dim);
                for j in 0..n {
                    let (wa, wb) = linear_moments(a, nodes[j], nodes[j + 1], nodes[n]);
                    acc.axpy(Complex64::new(wa / g1, 0.0), &g.values[j], one);
                    acc.axpy(Complex64::new(wb / g1, 0.0), &g.values[j + 1], one);
                }
                out[n] = acc;
            }
        }
        StartBehavior::Power(b) => {
            if !(b > -1.0) {
                return Err(invalid("power start needs exponent > -1"));
            }
            // smooth factor ĝ = g/s^β
            let mut smooth: Vec<CVec> = (0..nodes.len())
                .map(|j| if j == 0 { CVec::zeros(dim) } else { &g.values[j] * Complex64::new(nodes[j].powf(-b), 0.0) })
                .collect();
            if g.values[0].iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                smooth[0] = g.values[0].clone();
            } else if nodes.len() > 1 {
                smooth[0] = smooth[1].clone();
            }
            let gl = GaussLegendre::new(8);
            let gl_end = GaussLegendre::new(16);
            for n in 1..nodes.len() {
                let mut acc = CVec::zeros(dim);
                for j in 0..n {
                    let (wa, wb) = power_moments(a, b, nodes[j], nodes[j + 1], nodes[n], &gl, &gl_end);
                    acc.axpy(Complex64::new(wa / g1, 0.0), &smooth[j], one);
                    acc.axpy(Complex64::new(wb / g1, 0.0), &smooth[j + 1], one);
                }
                out[n] = acc;
            }
        }
    }
    Trajectory::new(g.grid.clone(), g.space, out)
}

/// `∫_a^b (T-s)^{-α} ℓ(s) ds` for the two hat pieces `ℓ` on `[a, b]`,
/// returned as (weight of the left node, weight of the right node).
pub(crate) fn linear_moments(a: f64, ta: f64, tb: f64, tn: f64) -> (f64, f64) {
    let h = tb - ta;
    let (r0, r1) = (tn - tb, tn - ta);
    let m1 = (r1.powf(1.0 - a) - r0.powf(1.0 - a)) / (1.0 - a);
    let m2 = (r1.powf(2.0 - a) - r0.powf(2.0 - a)) / (2.0 - a);
    // left hat (b - s)/h = (r - r0)/h, right hat (s - a)/h = (r1 - r)/h
    ((m2 - r0 * m1) / h, (r1 * m1 - m2) / h)
}

/// `∫_a^b (T-s)^{-α} s^β ℓ(s) ds` for the two hat pieces on `[a, b]`.
fn power_moments(
    a: f64,
    b: f64,
    ta: f64,
    tb: f64,
    tn: f64,
    gl: &GaussLegendre,
    gl_end: &GaussLegendre,
) -> (f64, f64) {
    let h = tb - ta;
    let first = ta == 0.0;
    let last = tb == tn;
    if first && last {
        // both endpoint singularities: Beta integrals
        let scale = h.powf(1.0 - a + b);
        let right = scale * beta(1.0 - a, b + 2.0);
        return (scale * beta(1.0 - a, b + 1.0) - right, right);
    }
    let (mut wa, mut wb) = (0.0, 0.0);
    if first {
        // s = h v^{1/(β+1)} turns s^β ds into h^{β+1}/(β+1) dv
        let e = 1.0 / (b + 1.0);
        let pre = h.powf(b + 1.0) * e;
        for (v, w) in gl_end.mapped(0.0, 1.0) {
            let s = h * v.powf(e);
            let f = pre * w * (tn - s).powf(-a);
            wa += f * (1.0 - s / h);
            wb += f * s / h;
        }
    } else if last {
        // r = h w^{1/(1-α)} turns r^{-α} dr into h^{1-α}/(1-α) dw
        let e = 1.0 / (1.0 - a);
        let pre = h.powf(1.0 - a) * e;
        for (x, w) in gl_end.mapped(0.0, 1.0) {
            let s = tn - h * x.powf(e);
            let f = pre * w * s.powf(b);
            let lam = (s - ta) / h;
            wa += f * (1.0 - lam);
            wb += f * lam;
        }
    } else {
        for (s, w) in gl.mapped(ta, tb) {
            let f = w * (tn - s).powf(-a) * s.powf(b);
            let lam = (s - ta) / h;
            wa += f * (1.0 - lam);
            wb += f * lam;
        }
    }
    (wa, wb)
}

/// `F(u,v)(t_n) = ∫_0^{t_n} -k̇(t_n-s)(v(t_n)-v(s))u(s) ds + k(t_n)(v(t_n)-v(0))u(0)`.
///
/// `v` returns `(v(t), v'(t))`. Cells away from `t_n` use Gauss–Legendre
/// against the linear interpolant of `u`; on the last cell the factor
/// `(v(t_n)-v(s))/(t_n-s)` is smooth and the remaining `(t_n-s)^{-α}` is
/// removed by a change of variables.
pub fn product_rule_remainder(
    alpha: FracOrder,
    u: &Trajectory,
    v: impl Fn(f64) -> (f64, f64),
    u0: &CVec,
) -> Result<Trajectory> {
    check_dims(u, u0)?;
    let a = alpha.get();
    let g1 = gamma(1.0 - a);
    let nodes = &u.grid.nodes;
    let dim = u.dim();
    let vals: Vec<(f64, f64)> = nodes.iter().map(|&t| v(t)).collect();
    if let Some(i) = vals.iter().position(|(x, d)| !(x.is_finite() && d.is_finite())) {
        return Err(invalid(alloc::format!("v is not defined at t = {}", nodes[i])));
    }
    let gl = GaussLegendre::new(8);
    let gl_last = GaussLegendre::new(12);
    let v0 = vals[0].0;
    let mut out = alloc::vec![CVec::zeros(dim); nodes.len()];
    let one = Complex64::new(1.0, 0.0);
    for n in 1..nodes.len() {
        let tn = nodes[n];
        let vn = vals[n].0;
        let mut acc = CVec::zeros(dim);
        for j in 0..n {
            let (ta, tb) = (nodes[j], nodes[j + 1]);
            let h = tb - ta;
            let ua = if j == 0 { u0 } else { &u.values[j] };
            let ub = &u.values[j + 1];
            let (mut wa, mut wb) = (0.0, 0.0);
            if j + 1 < n {
                for (s, w) in gl.mapped(ta, tb) {
                    let r = tn - s;
                    let kern = a * r.powf(-a - 1.0) / g1 * (vn - v(s).0);
                    let lam = (s - ta) / h;
                    wa += w * kern * (1.0 - lam);
                    wb += w * kern * lam;
                }
            } else {
                // r = h w^{1/(1-α)}: ∫_0^h r^{-α} q(r) dr = h^{1-α}/(1-α) ∫_0^1 q dw
                let e = 1.0 / (1.0 - a);
                let pre = a / g1 * h.powf(1.0 - a) * e;
                for (x, w) in gl_last.mapped(0.0, 1.0) {
                    let r = h * x.powf(e);
                    let s = tn - r;
                    let slope = if r > 1e-10 * tn.max(1.0) {
                        (vn - v(s).0) / r
                    } else {
                        vals[n].1
                    };
                    let lam = (s - ta) / h;
                    wa += pre * w * slope * (1.0 - lam);
                    wb += pre * w * slope * lam;
                }
            }
            acc.axpy(Complex64::new(wa, 0.0), ua, one);
            acc.axpy(Complex64::new(wb, 0.0), ub, one);
        }
        let k = caputo_kernel(alpha, tn)?;
        acc.axpy(Complex64::new(k * (vn - v0), 0.0), u0, one);
        out[n] = acc;
    }
    Trajectory::new(u.grid.clone(), u.space, out)
}

/// `L_p(0,τ)` norm by the composite trapezoid rule on `‖x(t)‖^p`.
pub fn lp_time_norm(p: f64, traj: &Trajectory, norm: impl Fn(&CVec) -> f64) -> Result<f64> {
    let n = traj.len();
    lp_time_norm_range(p, traj, norm, 0..n)
}

/// Same over the node range `range` (cells between consecutive nodes).
pub fn lp_time_norm_range(
    p: f64,
    traj: &Trajectory,
    norm: impl Fn(&CVec) -> f64,
    range: Range<usize>,
) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(invalid(alloc::format!("L_p exponent must be finite and > 1, got {p}")));
    }
    if traj.is_empty() {
        return Err(invalid("empty trajectory"));
    }
    if range.end > traj.len() || range.start >= range.end {
        return Err(invalid("empty or out-of-bounds node range"));
    }
    let t = &traj.grid.nodes;
    let vals: Vec<f64> = range.clone().map(|i| norm(&traj.values[i]).powf(p)).collect();
    let mut s = 0.0;
    for k in 0..vals.len().saturating_sub(1) {
        let i = range.start + k;
        s += 0.5 * (t[i + 1] - t[i]) * (vals[k] + vals[k + 1]);
    }
    Ok(s.powf(1.0 / p))
}

/// `L_p` norm integrated from `t_1`, with the trapezoid mass of the
/// omitted first cell reported separately (for data singular at `t = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitNorm {
    pub value: f64,
    /// `p`-th power mass of `[t_0, t_1]` that was left out.
    pub omitted_mass: f64,
}

pub fn lp_time_norm_from_first(
    p: f64,
    traj: &Trajectory,
    norm: impl Fn(&CVec) -> f64,
) -> Result<SplitNorm> {
    let n = traj.len();
    if n < 3 {
        return Err(invalid("need at least three nodes"));
    }
    let value = lp_time_norm_range(p, traj, &norm, 1..n)?;
    let omitted = lp_time_norm_range(p, traj, &norm, 0..2)?.powf(p);
    Ok(SplitNorm { value, omitted_mass: omitted })
}

/// Plain Euclidean norm of a coordinate vector.
pub fn euclid(x: &CVec) -> f64 {
    x.norm()
}
