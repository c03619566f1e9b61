//! Quadrature rules: Gauss–Legendre, log-spaced Gauss–Legendre panels and
//! tanh-sinh for endpoint singularities.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Add, Mul};
use num_complex::Complex64;
#[allow(unused_imports)] // inherent in core on recent toolchains
use num_traits::Float;

/// Values that a quadrature rule can accumulate.
pub trait Accum: Copy + Add<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn mag(&self) -> f64;
}

impl Accum for f64 {
    fn zero() -> Self {
        0.0
    }
    fn mag(&self) -> f64 {
        self.abs()
    }
}

impl Accum for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn mag(&self) -> f64 {
        self.norm()
    }
}

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes by Newton iteration on the three-term recurrence.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre needs at least one node");
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (c + h * x, h * w))
    }

    pub fn integrate<T: Accum>(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> T) -> T {
        let mut s = T::zero();
        for (x, w) in self.mapped(a, b) {
            s = s + f(x) * w;
        }
        s
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Integrates over `[a, b]`, `0 < a < b`, in the variable `ln x` with one
/// Gauss–Legendre panel of `rule.len()` nodes per `panel_ratio` factor of x.
pub fn log_panels<T: Accum>(
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    panel_ratio: f64,
    mut f: impl FnMut(f64) -> T,
) -> T {
    debug_assert!(a > 0.0 && b > a && panel_ratio > 1.0);
    let (la, lb) = (a.ln(), b.ln());
    let panels = ((lb - la) / panel_ratio.ln()).ceil().max(1.0) as usize;
    let step = (lb - la) / panels as f64;
    let mut s = T::zero();
    for k in 0..panels {
        let lo = la + step * k as f64;
        for (v, w) in rule.mapped(lo, lo + step) {
            let x = v.exp();
            s = s + f(x) * (w * x);
        }
    }
    s
}

/// Nodes and weights of [`log_panels`] as explicit pairs `(x, w)`.
pub fn log_panel_nodes(rule: &GaussLegendre, a: f64, b: f64, panel_ratio: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let (la, lb) = (a.ln(), b.ln());
    let panels = ((lb - la) / panel_ratio.ln()).ceil().max(1.0) as usize;
    let step = (lb - la) / panels as f64;
    for k in 0..panels {
        let lo = la + step * k as f64;
        for (v, w) in rule.mapped(lo, lo + step) {
            let x = v.exp();
            out.push((x, w * x));
        }
    }
    out
}

/// Result of an adaptive rule: value plus the last level-to-level change.
#[derive(Debug, Clone, Copy)]
pub struct Estimate<T> {
    pub value: T,
    pub error: f64,
}

/// Tanh-sinh quadrature on a finite interval. Integrable singularities are
/// tolerated at `a`, where abscissae are formed as `a + d` without loss;
/// nodes that round onto an endpoint are skipped.
pub fn tanh_sinh<T: Accum>(a: f64, b: f64, tol: f64, mut f: impl FnMut(f64) -> T) -> Estimate<T> {
    const T_MAX: f64 = 6.5;
    const MAX_LEVEL: usize = 9;
    let len = b - a;
    let half_pi = 0.5 * PI;
    let mut eval = |t: f64| -> T {
        let u = half_pi * t.sinh();
        let e = (-2.0 * u.abs()).exp();
        // distance to the nearer endpoint, computed without cancellation
        let d = len * e / (1.0 + e);
        if d == 0.0 {
            return T::zero();
        }
        let x = if t < 0.0 { a + d } else { b - d };
        let ch = (u.abs()).exp() * (1.0 + e);
        let w = len * half_pi * t.cosh() * 2.0 / (ch * ch);
        if w == 0.0 || x == a || x == b {
            return T::zero();
        }
        f(x) * w
    };
    let mut h = 1.0;
    let mut sum = eval(0.0);
    let mut k = 1;
    while (k as f64) * h <= T_MAX {
        let t = k as f64 * h;
        sum = sum + eval(t) + eval(-t);
        k += 1;
    }
    let mut value = sum * h;
    let mut error = f64::INFINITY;
    for _ in 1..=MAX_LEVEL {
        h *= 0.5;
        let mut k = 1;
        while (k as f64) * h <= T_MAX {
            let t = k as f64 * h;
            sum = sum + eval(t) + eval(-t);
            k += 2;
        }
        let next = sum * h;
        error = (next + value * -1.0).mag();
        value = next;
        if error <= tol * value.mag().max(1e-300) {
            break;
        }
    }
    Estimate { value, error }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let gl = GaussLegendre::new(8);
        // degree 15 is the exactness limit for 8 nodes
        let v = gl.integrate(0.0, 2.0, |x: f64| x.powi(15));
        assert!((v - 2f64.powi(16) / 16.0).abs() < 1e-9);
        let s: f64 = gl.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn large_rule_weights_are_accurate() {
        let gl = GaussLegendre::new(64);
        let v = gl.integrate(0.0, PI, |x: f64| x.sin());
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn tanh_sinh_handles_endpoint_singularities() {
        let e = tanh_sinh(0.0, 1.0, 1e-14, |x: f64| x.powf(-0.9));
        assert!((e.value - 10.0).abs() < 1e-10, "{}", e.value);
        let e = tanh_sinh(0.0, 1.0, 1e-14, |x: f64| (x * (1.0 - x)).sqrt());
        assert!((e.value - PI / 8.0).abs() < 1e-14, "{}", e.value);
    }

    #[test]
    fn log_panels_integrate_power() {
        let gl = GaussLegendre::new(16);
        let v: f64 = log_panels(&gl, 1e-8, 1.0, 10.0, |x: f64| x.powf(-0.5));
        assert!((v - 2.0 * (1.0 - 1e-4)).abs() < 1e-12);
    }
}
