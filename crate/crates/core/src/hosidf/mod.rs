//! Describing functions and higher-order sinusoidal-input describing
//! functions of reset elements and of reset controller open loops.

mod oracle;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::controllers::{phase_at, ControllerChain};
use crate::error::{Error, Result};
use crate::lti::{mat_exp, RationalTF, StateSpace};
use crate::reset::ResetElement;

pub use oracle::{harmonic_oracle, MeasuredHarmonics, OracleTarget};

const J: Complex64 = Complex64::new(0.0, 1.0);

/// Complex harmonic gains on a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicResponse {
    /// Strictly increasing, rad/s.
    pub freqs: Vec<f64>,
    pub orders: Vec<usize>,
    /// `values[i][k]` is the gain at `freqs[i]` for `orders[k]`.
    pub values: Vec<Vec<Complex64>>,
}

impl HarmonicResponse {
    /// Gain at grid index `i` for harmonic `n`. Even orders are exactly zero;
    /// orders that were not computed give `None`.
    pub fn get(&self, i: usize, n: usize) -> Option<Complex64> {
        if n >= 2 && n.is_multiple_of(2) {
            return (i < self.freqs.len()).then_some(Complex64::new(0.0, 0.0));
        }
        let k = self.orders.iter().position(|&m| m == n)?;
        self.values.get(i).map(|row| row[k])
    }

    /// Column for harmonic `n` across the grid.
    pub fn order(&self, n: usize) -> Option<Vec<Complex64>> {
        (0..self.freqs.len()).map(|i| self.get(i, n)).collect()
    }
}

fn check_omega(omega: f64) -> Result<()> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::invalid(
            "omega",
            format!("must be positive, got {omega}"),
        ));
    }
    Ok(())
}

fn check_order(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("n", "harmonic order starts at 1"));
    }
    Ok(())
}

fn check_grid(freqs: &[f64]) -> Result<()> {
    if freqs.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
        return Err(Error::invalid("freqs", "frequencies must be positive"));
    }
    if freqs.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::invalid("freqs", "grid must be strictly increasing"));
    }
    Ok(())
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

/// `C (s I - A)^{-1} v` for a complex vector `v`.
fn resolvent(
    base: &StateSpace,
    s: Complex64,
    v: &DVector<Complex64>,
    omega: f64,
) -> Result<Complex64> {
    let n = base.order();
    let m = DMatrix::<Complex64>::identity(n, n) * s - to_complex(&base.a);
    let x = m.lu().solve(v).ok_or(Error::Singular {
        context: "resolvent (sI - A)",
        omega,
    })?;
    Ok(base.c.iter().zip(x.iter()).map(|(&c, &xi)| xi * c).sum())
}

fn inverse(m: DMatrix<f64>, context: &'static str, omega: f64) -> Result<DMatrix<f64>> {
    let lu = m.lu();
    let scale = lu.u().diagonal().iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let min = lu
        .u()
        .diagonal()
        .iter()
        .fold(f64::INFINITY, |a, x| a.min(x.abs()));
    if !(min > 1e-14 * scale.max(1.0)) {
        return Err(Error::Singular { context, omega });
    }
    lu.try_inverse().ok_or(Error::Singular { context, omega })
}

/// `(2/pi) (I + E) (I + Ar E)^{-1} (I - Ar) ((A/w)^2 + I)^{-1}` with
/// `E = exp(pi A / w)`, factors multiplied left to right.
pub fn theta_rho(re: &ResetElement, omega: f64) -> Result<DMatrix<f64>> {
    check_omega(omega)?;
    let a = &re.base().a;
    let n = re.order();
    let ident = DMatrix::<f64>::identity(n, n);
    let ar = re.reset_matrix();
    let e = mat_exp(&(a * (PI / omega)));
    let aw = a / omega;
    let inv1 = inverse(&ident + &ar * &e, "I + Ar exp(pi A / w)", omega)?;
    let inv2 = inverse(&aw * &aw + &ident, "(A/w)^2 + I", omega)?;
    Ok((&ident + &e) * inv1 * (&ident - &ar) * inv2 * (2.0 / PI))
}

/// Describing function (first harmonic gain).
pub fn df(re: &ResetElement, omega: f64) -> Result<Complex64> {
    let theta = theta_rho(re, omega)?;
    df_with(re, &to_complex(&theta), Complex64::new(1.0, 0.0), omega)
}

// C (jwI - A)^{-1} (I + rot j Theta) B + D
fn df_with(
    re: &ResetElement,
    theta: &DMatrix<Complex64>,
    rot: Complex64,
    omega: f64,
) -> Result<Complex64> {
    let base = re.base();
    let b = base.b.map(|x| Complex64::new(x, 0.0));
    let v = &b + theta * &b * (rot * J);
    Ok(resolvent(base, J * omega, &v, omega)? + base.d)
}

fn higher_with(
    re: &ResetElement,
    theta: &DMatrix<Complex64>,
    rot: Complex64,
    omega: f64,
    n: usize,
) -> Result<Complex64> {
    let base = re.base();
    let b = base.b.map(|x| Complex64::new(x, 0.0));
    let v = theta * &b * (rot * J);
    resolvent(base, J * (omega * n as f64), &v, omega)
}

/// `n`-th harmonic gain. `n = 1` is [`df`]; even orders are exactly zero.
pub fn hosidf(re: &ResetElement, omega: f64, n: usize) -> Result<Complex64> {
    check_order(n)?;
    if n == 1 {
        return df(re, omega);
    }
    check_omega(omega)?;
    if n.is_multiple_of(2) {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let theta = theta_rho(re, omega)?;
    higher_with(re, &to_complex(&theta), Complex64::new(1.0, 0.0), omega, n)
}

/// `Theta_rho (-A sin(phi) + w cos(phi) I) / w`.
pub fn theta_shaped(re: &ResetElement, phi: f64, omega: f64) -> Result<DMatrix<f64>> {
    let theta = theta_rho(re, omega)?;
    let n = re.order();
    let shift = (&re.base().a * (-phi.sin())
        + DMatrix::<f64>::identity(n, n) * (omega * phi.cos()))
        / omega;
    Ok(theta * shift)
}

/// Harmonic gains when the reset trigger is the element input shifted by
/// `phi` radians at the fundamental.
pub fn hosidf_shaped(re: &ResetElement, phi: f64, omega: f64, n: usize) -> Result<Complex64> {
    check_order(n)?;
    check_omega(omega)?;
    if n >= 2 && n.is_multiple_of(2) {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let theta = to_complex(&theta_shaped(re, phi, omega)?);
    let rot = Complex64::from_polar(1.0, phi);
    if n == 1 {
        df_with(re, &theta, rot, omega)
    } else {
        higher_with(re, &theta, rot, omega, n)
    }
}

/// `C_L1(jw) H_n(w) C_L2(jnw) G(jnw)` for the chain's sequence. With a
/// shaping filter the shaped gains are used, its phase taken at `omega`.
pub fn open_loop_hosidf(
    chain: &ControllerChain,
    plant: &RationalTF,
    omega: f64,
    n: usize,
) -> Result<Complex64> {
    check_order(n)?;
    check_omega(omega)?;
    if n >= 2 && n.is_multiple_of(2) {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let h = match chain.shaping() {
        Some(sf) => hosidf_shaped(chain.reset(), phase_at(sf, omega), omega, n)?,
        None => hosidf(chain.reset(), omega, n)?,
    };
    let wn = omega * n as f64;
    Ok(chain.c_l1.freq_response(omega)?
        * h
        * chain.c_l2.freq_response(wn)?
        * plant.freq_response(wn)?)
}

/// `1 / (1 + L1)`.
pub fn df_sensitivity(l1: Complex64) -> Result<Complex64> {
    let den = 1.0 + l1;
    if den.norm() < 1e-300 {
        return Err(Error::Singular {
            context: "1 + L1",
            omega: f64::NAN,
        });
    }
    Ok(1.0 / den)
}

fn sweep<F>(freqs: &[f64], orders: &[usize], f: F) -> Result<HarmonicResponse>
where
    F: Fn(f64, usize) -> Result<Complex64> + Sync,
{
    check_grid(freqs)?;
    for &n in orders {
        check_order(n)?;
    }
    let values = freqs
        .par_iter()
        .map(|&w| orders.iter().map(|&n| f(w, n)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok(HarmonicResponse {
        freqs: freqs.to_vec(),
        orders: orders.to_vec(),
        values,
    })
}

/// Harmonic gains of a reset element over a grid (rad/s).
pub fn element_response(
    re: &ResetElement,
    freqs: &[f64],
    orders: &[usize],
) -> Result<HarmonicResponse> {
    sweep(freqs, orders, |w, n| hosidf(re, w, n))
}

/// Shaped harmonic gains; `phi` maps a frequency to the trigger phase shift.
pub fn element_response_shaped<P>(
    re: &ResetElement,
    phi: P,
    freqs: &[f64],
    orders: &[usize],
) -> Result<HarmonicResponse>
where
    P: Fn(f64) -> f64 + Sync,
{
    sweep(freqs, orders, |w, n| hosidf_shaped(re, phi(w), w, n))
}

/// Open-loop harmonic gains of `chain` with `plant` over a grid (rad/s).
pub fn open_loop_response(
    chain: &ControllerChain,
    plant: &RationalTF,
    freqs: &[f64],
    orders: &[usize],
) -> Result<HarmonicResponse> {
    sweep(freqs, orders, |w, n| open_loop_hosidf(chain, plant, w, n))
}

/// Gain crossover of a describing-function open loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossover {
    /// rad/s
    pub omega: f64,
    pub phase_margin_deg: f64,
}

/// First frequency in `[lo, hi]` (rad/s) where `|l(w)|` falls through 1,
/// refined by bisection in log frequency. `None` if it never does.
pub fn find_crossover<F>(l: F, lo: f64, hi: f64) -> Result<Option<Crossover>>
where
    F: Fn(f64) -> Result<Complex64>,
{
    check_omega(lo)?;
    if !(hi > lo) {
        return Err(Error::invalid("hi", "upper bound must exceed lower bound"));
    }
    let grid = crate::lti::log_space(lo, hi, 2000);
    let mut prev = (grid[0], l(grid[0])?.norm());
    for &w in &grid[1..] {
        let mag = l(w)?.norm();
        if prev.1 >= 1.0 && mag < 1.0 {
            let (mut a, mut b) = (prev.0.ln(), w.ln());
            for _ in 0..80 {
                let mid = 0.5 * (a + b);
                if l(mid.exp())?.norm() >= 1.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            let omega = (0.5 * (a + b)).exp();
            let pm = 180.0 + l(omega)?.arg().to_degrees();
            return Ok(Some(Crossover {
                omega,
                // negative when the loop is unstable
                phase_margin_deg: if pm > 180.0 { pm - 360.0 } else { pm },
            }));
        }
        prev = (w, mag);
    }
    Ok(None)
}
