//! Thin helpers over `nalgebra` for dense complex matrices.

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;
pub type Mat2 = Matrix2<Complex64>;

/// Matrices with a condition number above this are treated as singular.
pub const SINGULAR_COND: f64 = 1e12;

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// e^{j angle}
#[inline]
pub fn cis(angle: f64) -> Complex64 {
    Complex64::from_polar(1.0, angle)
}

/// Singular values sorted in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Ratio of extreme singular values; infinite for singular or empty input.
pub fn condition_number(m: &CMat) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// sigma_min / sigma_max, zero when the matrix is singular.
pub fn sigma_ratio(m: &CMat) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
        _ => 0.0,
    }
}

/// Number of singular values above `rel_tol * sigma_max`.
pub fn numeric_rank(m: &CMat, rel_tol: f64) -> usize {
    let s = singular_values(m);
    let Some(&hi) = s.first() else { return 0 };
    s.iter().filter(|&&v| v > rel_tol * hi).count()
}

/// LU inverse, refusing matrices whose condition number exceeds [`SINGULAR_COND`].
pub fn checked_inverse(m: &CMat) -> Result<CMat> {
    let cond = condition_number(m);
    if !(cond <= SINGULAR_COND) {
        return Err(Error::Singular(cond));
    }
    m.clone().lu().try_inverse().ok_or(Error::Singular(cond))
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// ||a - b|| / ||b||, falling back to the absolute norm when `b` vanishes.
pub fn rel_diff(a: &CMat, b: &CMat) -> f64 {
    let d = frobenius(&(a - b));
    let n = frobenius(b);
    if n > 0.0 {
        d / n
    } else {
        d
    }
}

/// Squared norm of the first row of a 2x2 block.
#[inline]
pub fn row0_norm_sqr(m: &Mat2) -> f64 {
    m[(0, 0)].norm_sqr() + m[(0, 1)].norm_sqr()
}

pub fn mat2_to_dyn(m: &Mat2) -> CMat {
    CMat::from_fn(2, 2, |i, j| m[(i, j)])
}

/// Real embedding of a complex matrix acting on interleaved (re, im) coordinates.
pub fn real_embedding(m: &CMat) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(2 * m.nrows(), 2 * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            out[(2 * i, 2 * j)] = z.re;
            out[(2 * i, 2 * j + 1)] = -z.im;
            out[(2 * i + 1, 2 * j)] = z.im;
            out[(2 * i + 1, 2 * j + 1)] = z.re;
        }
    }
    out
}

/// Interleaved (re, im) coordinates of a complex vector.
pub fn to_real(v: &[Complex64]) -> Vec<f64> {
    v.iter().flat_map(|z| [z.re, z.im]).collect()
}

pub fn from_real(v: &[f64]) -> Vec<Complex64> {
    v.chunks_exact(2).map(|p| c(p[0], p[1])).collect()
}
