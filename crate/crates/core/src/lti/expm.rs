//! Matrix exponential by scaling and squaring around a [13/13] Padé core.

use nalgebra::DMatrix;

// Padé [13/13] numerator coefficients, b_0..b_13.
const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

// 1-norm bound below which the [13/13] approximant is accurate to unit roundoff.
const THETA_13: f64 = 5.371_920_351_148_152;

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Exponential of a square real matrix.
///
/// # Panics
/// If `a` is not square or contains non-finite entries.
pub fn mat_exp(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(a.is_square(), "mat_exp needs a square matrix");
    assert!(
        a.iter().all(|x| x.is_finite()),
        "mat_exp needs finite entries"
    );
    let n = a.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let ident = DMatrix::<f64>::identity(n, n);

    let nrm = norm1(a);
    let squarings = if nrm > THETA_13 {
        (nrm / THETA_13).log2().ceil() as i32
    } else {
        0
    };
    let a = a * 2f64.powi(-squarings);

    let b = &PADE13;
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * (b[13] * &a6 + b[11] * &a4 + b[9] * &a2)
        + b[7] * &a6
        + b[5] * &a4
        + b[3] * &a2
        + b[1] * &ident;
    let u = &a * u_inner;
    let v = &a6 * (b[12] * &a6 + b[10] * &a4 + b[8] * &a2)
        + b[6] * &a6
        + b[4] * &a4
        + b[2] * &a2
        + b[0] * &ident;

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .expect("Padé denominator is nonsingular for scaled arguments");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}
