//! Real polynomials stored as coefficient slices in descending powers.

use num_complex::Complex64;

/// Relative tolerance below which leading coefficients are dropped.
pub const TRIM_TOL: f64 = 1e-14;

/// Drop leading coefficients whose magnitude is at most `TRIM_TOL` times the
/// largest coefficient. An all-zero polynomial becomes `[0.0]`.
pub fn trim(coeffs: &[f64]) -> Vec<f64> {
    let scale = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    if scale == 0.0 {
        return vec![0.0];
    }
    let first = coeffs
        .iter()
        .position(|c| c.abs() > TRIM_TOL * scale)
        .unwrap_or(coeffs.len() - 1);
    coeffs[first..].to_vec()
}

/// Degree after trimming.
pub fn degree(coeffs: &[f64]) -> usize {
    coeffs.len().saturating_sub(1)
}

pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return vec![0.0];
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    let mut out = vec![0.0; n];
    for (i, &x) in a.iter().enumerate() {
        out[n - a.len() + i] += x;
    }
    for (i, &y) in b.iter().enumerate() {
        out[n - b.len() + i] += y;
    }
    out
}

/// Horner evaluation at a complex point.
pub fn eval(coeffs: &[f64], s: Complex64) -> Complex64 {
    coeffs
        .iter()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}
