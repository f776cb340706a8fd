//! Time-domain harmonic measurement used to check the analytic gains.
//!
//! The reset element is driven by an exact sinusoid. Between samples the
//! state is propagated exactly (forced periodic solution plus the decaying
//! homogeneous part), so the only approximation left is the sampled reset
//! instant. The internal rate holds an even whole number of samples per
//! period and is at least `max(fs, 100 f n_max)`, so every period is sampled
//! identically and the DFT window has no leakage.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::f64::consts::TAU;

use super::check_omega;
use crate::controllers::{phase_at, ControllerChain};
use crate::error::{Error, Result};
use crate::lti::{mat_exp, RationalTF};
use crate::reset::{is_crossing, ResetElement};

const MAX_OVERSAMPLE: f64 = 4096.0;
const MAX_SAMPLES_PER_PERIOD: usize = 1 << 24;
const SETTLE_TOL: f64 = 5e-3;

type PostFactor<'a> = Box<dyn Fn(usize) -> Result<Complex64> + 'a>;

/// What the oracle drives.
#[derive(Debug, Clone, Copy)]
pub enum OracleTarget<'a> {
    /// A bare reset element; the trigger is its input.
    Element(&'a ResetElement),
    /// Controller chain times plant, giving open-loop harmonics.
    OpenLoop(&'a ControllerChain, &'a RationalTF),
}

/// Measured harmonic gains at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredHarmonics {
    /// rad/s
    pub omega: f64,
    /// `gains[n - 1]` is the gain of harmonic `n`, normalized by the input amplitude.
    pub gains: Vec<Complex64>,
    /// Internal simulation rate, Hz.
    pub sim_rate: f64,
    /// Largest change between the last two single-period estimates, relative to `|H_1|`.
    pub settle_change: f64,
}

impl MeasuredHarmonics {
    pub fn gain(&self, n: usize) -> Option<Complex64> {
        n.checked_sub(1).and_then(|i| self.gains.get(i)).copied()
    }
}

// sin(2 pi c) with exact zeros at whole and half cycles.
fn sin_cycles(c: f64) -> f64 {
    let r = c - c.floor();
    if r == 0.0 || r == 0.5 {
        0.0
    } else {
        (TAU * r).sin()
    }
}

fn unit_phasor(c: f64) -> Complex64 {
    let r = c - c.floor();
    Complex64::from_polar(1.0, TAU * r)
}

/// Steady-state harmonic gains for the input `amplitude * sin(omega t)`.
pub fn harmonic_oracle(
    target: OracleTarget<'_>,
    omega: f64,
    amplitude: f64,
    n_max: usize,
    fs: f64,
    periods: usize,
) -> Result<MeasuredHarmonics> {
    check_omega(omega)?;
    if n_max == 0 {
        return Err(Error::invalid("n_max", "need at least the fundamental"));
    }
    if periods < 20 {
        return Err(Error::invalid(
            "periods",
            format!("need at least 20, got {periods}"),
        ));
    }
    if !(amplitude > 0.0) || !amplitude.is_finite() {
        return Err(Error::invalid("amplitude", "must be positive"));
    }
    if !(fs > 0.0) || !fs.is_finite() {
        return Err(Error::invalid("fs", "must be positive"));
    }
    let f = omega / TAU;
    let required = 100.0 * f * n_max as f64;
    let spp_min = (fs.max(required) / f).ceil();
    if spp_min > MAX_SAMPLES_PER_PERIOD as f64 || fs.max(required) > MAX_OVERSAMPLE * fs {
        return Err(Error::InsufficientSampling {
            fs: fs * MAX_OVERSAMPLE,
            required,
        });
    }
    let spp = spp_min as usize + spp_min as usize % 2;
    let rate = spp as f64 * f;

    // element input and trigger phasors, and the post-element linear factor per harmonic
    let (re, u_ph, trig_ph, post): (&ResetElement, Complex64, Complex64, PostFactor) = match target
    {
        OracleTarget::Element(re) => {
            let one = Complex64::new(1.0, 0.0);
            (re, one, one, Box::new(move |_| Ok(one)))
        }
        OracleTarget::OpenLoop(chain, plant) => {
            let c1 = chain.c_l1.freq_response(omega)?;
            let trig = match chain.shaping() {
                Some(sf) => c1 * Complex64::from_polar(1.0, phase_at(sf, omega)),
                None => c1,
            };
            let post = move |n: usize| -> Result<Complex64> {
                let wn = omega * n as f64;
                Ok(chain.c_l2.freq_response(wn)? * plant.freq_response(wn)?)
            };
            (chain.reset(), c1, trig, Box::new(post))
        }
    };

    let base = re.base();
    let n = re.order();
    let gamma = re.gamma();
    let u_amp = amplitude * u_ph.norm();
    let u_cyc = u_ph.arg() / TAU;
    let t_cyc = trig_ph.arg() / TAU;

    // forced response x_p(t) = Im(g e^{j w t})
    let b = base.b.map(|x| Complex64::new(x, 0.0));
    let g = {
        let mat = DMatrix::<Complex64>::identity(n, n) * Complex64::new(0.0, omega)
            - base.a.map(|x| Complex64::new(x, 0.0));
        mat.lu().solve(&b).ok_or(Error::Singular {
            context: "oracle forced response",
            omega,
        })? * (amplitude * u_ph)
    };
    let cycles = |k: usize| (k % spp) as f64 / spp as f64;
    let xp = |k: usize| -> DVector<f64> {
        let e = unit_phasor(cycles(k));
        g.map(|gi| (gi * e).im)
    };
    let phi = mat_exp(&(&base.a * (1.0 / rate)));

    let total = periods * spp;
    let mut y = Vec::with_capacity(total);
    let mut x = xp(0);
    let mut prev_trig = 0.0;
    let mut last_reset: Option<usize> = None;
    let cx = |x: &DVector<f64>| base.c.iter().zip(x.iter()).map(|(c, v)| c * v).sum::<f64>();

    let mut xp_k = xp(0);
    for k in 0..total {
        let c = cycles(k);
        let u = u_amp * sin_cycles(c + u_cyc);
        let trig = sin_cycles(c + t_cyc);
        let spaced = last_reset.is_none_or(|l| k > l + 1);
        let out = if is_crossing(prev_trig, trig) && spaced {
            let pre = cx(&x);
            x *= gamma;
            last_reset = Some(k);
            let post = cx(&x);
            if trig == 0.0 {
                0.5 * (pre + post)
            } else {
                post
            }
        } else {
            cx(&x)
        };
        y.push(out + base.d * u);
        prev_trig = trig;

        let xp_next = xp(k + 1);
        x = &xp_next + &phi * (&x - &xp_k);
        xp_k = xp_next;
    }

    let dft = |from: usize, to: usize, h: usize| -> Complex64 {
        let len = (to - from) as f64;
        let acc: Complex64 = (from..to).map(|k| y[k] * unit_phasor(-cycles(h * k))).sum();
        acc * Complex64::new(0.0, 2.0 / (len * amplitude))
    };

    let win = (periods / 2) * spp;
    let one = spp;
    let mut gains = Vec::with_capacity(n_max);
    let mut change = 0.0f64;
    let mut h1 = 0.0;
    for h in 1..=n_max {
        gains.push(dft(total - win, total, h) * post(h)?);
        let last = dft(total - one, total, h);
        let prev = dft(total - 2 * one, total - one, h);
        if h == 1 {
            h1 = last.norm();
        }
        change = change.max((last - prev).norm());
    }
    let settle_change = if h1 > 0.0 { change / h1 } else { change };
    if settle_change > SETTLE_TOL || !settle_change.is_finite() {
        return Err(Error::NotSettled {
            rel_change: settle_change,
        });
    }
    Ok(MeasuredHarmonics {
        omega,
        gains,
        sim_rate: rate,
        settle_change,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controllers::{arrange, ControllerParts, Sequence, TuningParams};
    use crate::hosidf::{hosidf, open_loop_hosidf};
    use crate::reset::make_fore;

    const HZ: f64 = TAU;

    #[test]
    fn sin_cycles_exact_zeros() {
        assert_eq!(sin_cycles(3.0), 0.0);
        assert_eq!(sin_cycles(7.5), 0.0);
        assert!((sin_cycles(0.25) - 1.0).abs() < 1e-15);
        assert!((sin_cycles(-0.25) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn linear_element_matches_frequency_response() {
        let re = make_fore(TuningParams::reference().omega_r, 1.0).unwrap();
        for fhz in [3.0, 47.0, 410.0] {
            let m = harmonic_oracle(OracleTarget::Element(&re), fhz * HZ, 2.0, 5, 20_000.0, 20)
                .unwrap();
            let lin = re.base().freq_response(fhz * HZ).unwrap();
            assert!(
                (m.gain(1).unwrap() - lin).norm() < 1e-6 * lin.norm(),
                "{fhz}"
            );
            for h in 2..=5 {
                assert!(m.gain(h).unwrap().norm() <= 1e-9 * lin.norm(), "{fhz} h{h}");
            }
        }
    }

    #[test]
    fn fore_third_harmonic_at_10hz() {
        let re = make_fore(TuningParams::reference().omega_r, 0.0).unwrap();
        let w = 10.0 * HZ;
        let m = harmonic_oracle(OracleTarget::Element(&re), w, 1.0, 5, 20_000.0, 40).unwrap();
        for n in [1, 3, 5] {
            let a = hosidf(&re, w, n).unwrap();
            let b = m.gain(n).unwrap();
            assert!((b.norm() / a.norm() - 1.0).abs() < 0.02, "n = {n}");
            assert!((b / a).arg().to_degrees().abs() < 2.0, "n = {n}");
        }
        assert!(m.gain(2).unwrap().norm() < 0.01 * m.gain(1).unwrap().norm());
    }

    #[test]
    fn open_loop_target_matches_formula() {
        let p = TuningParams::reference().with_kp(40.0);
        let parts = ControllerParts::pi_cglp(&p).unwrap();
        let plant = crate::presets::plant();
        let w = 60.0 * HZ;
        for s in Sequence::ALL {
            let chain = arrange(parts.clone(), s);
            let m = harmonic_oracle(
                OracleTarget::OpenLoop(&chain, &plant),
                w,
                1.0,
                3,
                20_000.0,
                40,
            )
            .unwrap();
            for n in [1, 3] {
                let a = open_loop_hosidf(&chain, &plant, w, n).unwrap();
                let b = m.gain(n).unwrap();
                assert!((b.norm() / a.norm() - 1.0).abs() < 0.02, "{s} n = {n}");
            }
        }
    }

    #[test]
    fn preconditions() {
        let re = make_fore(100.0, 0.0).unwrap();
        let t = OracleTarget::Element(&re);
        assert!(harmonic_oracle(t, 100.0, 1.0, 3, 20_000.0, 19).is_err());
        assert!(matches!(
            harmonic_oracle(t, 1e6 * HZ, 1.0, 5, 20_000.0, 20),
            Err(Error::InsufficientSampling { .. })
        ));
    }
}
