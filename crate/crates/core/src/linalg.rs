//! Dense kernels for the small (d ≤ ~10) symmetric matrices of the imputer.
//! Matrices are row-major `[f64]` slices of length `d * d`.

use crate::error::{Error, Result};

/// In-place lower Cholesky factor. The strict upper triangle is zeroed.
/// Returns `false` if a pivot is not strictly positive.
pub fn cholesky_in_place(a: &mut [f64], d: usize) -> bool {
    for j in 0..d {
        let mut diag = a[j * d + j];
        for k in 0..j {
            diag -= a[j * d + k] * a[j * d + k];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return false;
        }
        let ljj = diag.sqrt();
        a[j * d + j] = ljj;
        for i in j + 1..d {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= a[i * d + k] * a[j * d + k];
            }
            a[i * d + j] = s / ljj;
        }
        for i in 0..j {
            a[i * d + j] = 0.0;
        }
    }
    true
}

/// Cholesky with bounded diagonal ridge repair: on failure, add
/// `ridge_rel · trace/d` to the diagonal, escalating ×10 up to three times.
/// `out` receives the factor.
pub fn cholesky_repaired(a: &[f64], d: usize, ridge_rel: f64, out: &mut [f64]) -> Result<()> {
    out.copy_from_slice(a);
    if cholesky_in_place(out, d) {
        return Ok(());
    }
    let trace: f64 = (0..d).map(|i| a[i * d + i]).sum();
    let mut ridge = ridge_rel * (trace / d as f64).abs();
    if !(ridge > 0.0) {
        ridge = ridge_rel.max(f64::MIN_POSITIVE);
    }
    for _ in 0..4 {
        out.copy_from_slice(a);
        for i in 0..d {
            out[i * d + i] += ridge;
        }
        if cholesky_in_place(out, d) {
            return Ok(());
        }
        ridge *= 10.0;
    }
    Err(Error::NonPositiveDefinite)
}

/// Solves `L z = b` in place for lower-triangular `l`.
pub fn forward_solve(l: &[f64], d: usize, b: &mut [f64]) {
    for i in 0..d {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * d + k] * b[k];
        }
        b[i] = s / l[i * d + i];
    }
}

/// Solves `Lᵀ z = b` in place for lower-triangular `l`.
pub fn backward_solve_t(l: &[f64], d: usize, b: &mut [f64]) {
    for i in (0..d).rev() {
        let mut s = b[i];
        for k in i + 1..d {
            s -= l[k * d + i] * b[k];
        }
        b[i] = s / l[i * d + i];
    }
}

/// Inverse of a lower-triangular matrix (lower-triangular result).
pub fn lower_inverse(l: &[f64], d: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for j in 0..d {
        out[j * d + j] = 1.0 / l[j * d + j];
        for i in j + 1..d {
            let mut s = 0.0;
            for k in j..i {
                s -= l[i * d + k] * out[k * d + j];
            }
            out[i * d + j] = s / l[i * d + i];
        }
    }
}

/// log-determinant from a Cholesky factor.
pub fn chol_logdet(l: &[f64], d: usize) -> f64 {
    2.0 * (0..d).map(|i| l[i * d + i].ln()).sum::<f64>()
}
