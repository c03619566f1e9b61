//! Dense linear-algebra helpers shared by the modules.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
#[allow(unused_imports)] // inherent in core on recent toolchains
use num_traits::Float;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;
pub type RMat = DMatrix<f64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn to_complex(m: &RMat) -> CMat {
    m.map(|x| c(x, 0.0))
}

/// Real part if the imaginary part is negligible relative to the entries.
pub fn as_real(m: &CMat, rel_tol: f64) -> Option<RMat> {
    let scale = m.iter().fold(0.0f64, |s, z| s.max(z.norm()));
    let im = m.iter().fold(0.0f64, |s, z| s.max(z.im.abs()));
    (im <= rel_tol * scale.max(f64::MIN_POSITIVE)).then(|| m.map(|z| z.re))
}

pub fn is_symmetric(m: &RMat, rel_tol: f64) -> bool {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= rel_tol * scale))
}

/// `diag(left) · m · diag(right)`.
pub fn scale_rows_cols(m: &CMat, left: &[f64], right: &[f64]) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * (left[i] * right[j]))
}

/// Largest singular value.
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// Operator norm of `m: X → Y` when both spaces carry diagonal Gram
/// matrices: `‖G_Y^{1/2} m G_X^{-1/2}‖₂`.
pub fn op_norm(m: &CMat, gram_x: &[f64], gram_y: &[f64]) -> f64 {
    let l: Vec<f64> = gram_y.iter().map(|g| g.sqrt()).collect();
    let r: Vec<f64> = gram_x.iter().map(|g| 1.0 / g.sqrt()).collect();
    spectral_norm(&scale_rows_cols(m, &l, &r))
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_hermitian_part_eig(m: &CMat) -> f64 {
    let h = (m + m.adjoint()) * c(0.5, 0.0);
    h.symmetric_eigenvalues().min()
}

/// Euclidean norm in a space with diagonal Gram matrix.
pub fn weighted_norm(x: &CVec, gram: &[f64]) -> f64 {
    x.iter()
        .zip(gram)
        .map(|(z, g)| g * z.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// `(x, y)` with diagonal Gram matrix, linear in `x`.
pub fn weighted_inner(x: &CVec, y: &CVec, gram: &[f64]) -> Complex64 {
    x.iter()
        .zip(y.iter())
        .zip(gram)
        .map(|((a, b), g)| a * b.conj() * *g)
        .sum()
}

/// Real matrix times complex vector.
pub fn real_mul(m: &RMat, x: &CVec) -> CVec {
    let re = m * x.map(|z| z.re);
    let im = m * x.map(|z| z.im);
    CVec::from_fn(m.nrows(), |i, _| c(re[i], im[i]))
}

/// Solves `m x = b` by LU; `None` if `m` is singular.
pub fn solve(m: &CMat, b: &CVec) -> Option<CVec> {
    m.clone().lu().solve(b)
}

pub fn inverse(m: &CMat) -> Option<CMat> {
    m.clone().lu().try_inverse()
}

/// Eigendecomposition `A = V diag(eig) V⁻¹` of a matrix that is
/// self-adjoint with respect to a diagonal inner product `G`:
/// `A = G⁻¹ B` with `B` real symmetric.
#[derive(Debug, Clone)]
pub struct Spectral {
    pub eig: Vec<f64>,
    pub v: RMat,
    pub v_inv: RMat,
}

impl Spectral {
    pub fn from_form(b: &RMat, gram: &[f64]) -> Self {
        let n = b.nrows();
        let isq: Vec<f64> = gram.iter().map(|g| 1.0 / g.sqrt()).collect();
        let s = RMat::from_fn(n, n, |i, j| b[(i, j)] * isq[i] * isq[j]);
        let s = (&s + s.transpose()) * 0.5;
        let se = s.symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
        let eig = order.iter().map(|&k| se.eigenvalues[k]).collect();
        let v = RMat::from_fn(n, n, |i, k| isq[i] * se.eigenvectors[(i, order[k])]);
        let v_inv = RMat::from_fn(n, n, |k, j| se.eigenvectors[(j, order[k])] / isq[j]);
        Self { eig, v, v_inv }
    }

    pub fn dim(&self) -> usize {
        self.eig.len()
    }

    /// `V diag(f(eig)) V⁻¹`.
    pub fn func(&self, f: impl Fn(f64) -> f64) -> RMat {
        let n = self.dim();
        let mut vd = self.v.clone();
        for k in 0..n {
            let fk = f(self.eig[k]);
            vd.column_mut(k).scale_mut(fk);
        }
        vd * &self.v_inv
    }

    /// `V diag(vals) V⁻¹` for values given per eigenvalue.
    pub fn func_values(&self, vals: &[f64]) -> RMat {
        let mut vd = self.v.clone();
        for (k, f) in vals.iter().enumerate() {
            vd.column_mut(k).scale_mut(*f);
        }
        vd * &self.v_inv
    }

    /// Complex-valued spectral function.
    pub fn cfunc(&self, f: impl Fn(f64) -> Complex64) -> CMat {
        let n = self.dim();
        let vals: Vec<Complex64> = self.eig.iter().map(|&a| f(a)).collect();
        let vd = CMat::from_fn(n, n, |i, k| vals[k] * self.v[(i, k)]);
        vd * to_complex(&self.v_inv)
    }

    /// `V diag(vals) V⁻¹ x`.
    pub fn apply(&self, vals: &[f64], x: &CVec) -> CVec {
        let mut y = real_mul(&self.v_inv, x);
        for (z, v) in y.iter_mut().zip(vals) {
            *z *= *v;
        }
        real_mul(&self.v, &y)
    }
}
