//! Sampled closed-loop simulation of a reset controller chain around a plant,
//! with reference, plant-input disturbance and measurement noise.
//!
//! Per sample: read `y`, form `e = r - (y + n)`, run `C_L1 -> reset -> C_L2`,
//! then advance the plant with `u + d`. Linear controller blocks use Tustin,
//! the plant and the reset base use ZOH, and no computational delay is added.

mod linear;
mod metrics;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use std::f64::consts::TAU;

use crate::controllers::ControllerChain;
use crate::error::{Error, Result};
use crate::lti::{discretize, tf_to_ss, DiscreteFilter, Discretization, RationalTF};

pub use linear::{LinearClosedLoop, LinearTrace};
pub use metrics::{detect_steady_state, step_metrics, SteadyState, StepMetrics};

/// Multisine disturbance component frequencies, Hz.
pub const DISTURBANCE_FREQS_HZ: [f64; 6] = [0.5, 1.0, 5.0, 10.0, 20.0, 30.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    /// i.i.d. uniform on `[-m, m]`.
    Uniform,
    /// i.i.d. normal with standard deviation `m / sqrt(3)` (same variance as uniform).
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Disturbance {
    Off,
    /// Equal-amplitude, zero-phase sines at [`DISTURBANCE_FREQS_HZ`], each of this amplitude.
    Multisine {
        amplitude: f64,
    },
}

impl Disturbance {
    #[inline]
    fn at(&self, t: f64) -> f64 {
        match *self {
            Disturbance::Off => 0.0,
            Disturbance::Multisine { amplitude } => {
                amplitude
                    * DISTURBANCE_FREQS_HZ
                        .iter()
                        .map(|f| (TAU * f * t).sin())
                        .sum::<f64>()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Sample rate, Hz.
    pub fs: f64,
    pub settle_periods: usize,
    pub measure_periods: usize,
    /// Noise magnitude in percent of the reference amplitude.
    pub noise_pct: f64,
    pub noise_kind: NoiseKind,
    pub disturbance: Disturbance,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            fs: 20_000.0,
            settle_periods: 10,
            measure_periods: 10,
            noise_pct: 0.0,
            noise_kind: NoiseKind::Uniform,
            disturbance: Disturbance::Off,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fs > 0.0) || !self.fs.is_finite() {
            return Err(Error::invalid(
                "fs",
                format!("must be positive, got {}", self.fs),
            ));
        }
        if self.measure_periods < 2 {
            return Err(Error::invalid("measure_periods", "need at least 2"));
        }
        if !(self.noise_pct >= 0.0) || !self.noise_pct.is_finite() {
            return Err(Error::invalid("noise_pct", "must be non-negative"));
        }
        if let Disturbance::Multisine { amplitude } = self.disturbance {
            if !(amplitude >= 0.0) || !amplitude.is_finite() {
                return Err(Error::invalid(
                    "disturbance",
                    "amplitude must be non-negative",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    Zero,
    Sine { amplitude: f64, freq_hz: f64 },
    Step { amplitude: f64 },
}

impl Reference {
    #[inline]
    fn at(&self, t: f64) -> f64 {
        match *self {
            Reference::Zero => 0.0,
            Reference::Sine { amplitude, freq_hz } => amplitude * (TAU * freq_hz * t).sin(),
            Reference::Step { amplitude } => amplitude,
        }
    }

    pub fn amplitude(&self) -> f64 {
        match *self {
            Reference::Zero => 0.0,
            Reference::Sine { amplitude, .. } | Reference::Step { amplitude } => amplitude.abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub fs: f64,
    pub r: Vec<f64>,
    pub e: Vec<f64>,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    /// Sample indices at which the reset element fired.
    pub resets: Vec<usize>,
    /// First sample of the steady-state window.
    pub t_ss: usize,
    pub settled: bool,
    pub max_abs_error: f64,
    pub max_abs_control: f64,
}

/// Discretized controller blocks for one run.
struct Pipeline {
    c1: DiscreteFilter,
    c2: DiscreteFilter,
    shaping: Option<DiscreteFilter>,
    reset: crate::reset::DiscreteResetElement,
    plant: DiscreteFilter,
}

impl Pipeline {
    fn new(chain: &ControllerChain, plant: &RationalTF, fs: f64) -> Result<Self> {
        let ts = 1.0 / fs;
        if !plant.is_proper() || plant.num_degree() == plant.den_degree() {
            return Err(Error::invalid("plant", "must be strictly proper"));
        }
        let tustin = |tf: &RationalTF| -> Result<DiscreteFilter> {
            Ok(DiscreteFilter::new(&discretize(
                &tf_to_ss(tf)?,
                ts,
                Discretization::Tustin,
            )?))
        };
        Ok(Self {
            c1: tustin(&chain.c_l1)?,
            c2: tustin(&chain.c_l2)?,
            shaping: chain.shaping().map(|sf| tustin(&sf.tf)).transpose()?,
            reset: chain.reset().discretize(ts)?,
            plant: DiscreteFilter::new(&discretize(&tf_to_ss(plant)?, ts, Discretization::Zoh)?),
        })
    }
}

fn noise_source(cfg: &SimConfig, reference_amplitude: f64) -> Result<Box<dyn FnMut() -> f64>> {
    let m = cfg.noise_pct / 100.0 * reference_amplitude;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    if m == 0.0 {
        return Ok(Box::new(|| 0.0));
    }
    Ok(match cfg.noise_kind {
        NoiseKind::Uniform => Box::new(move || rng.random_range(-m..=m)),
        NoiseKind::Gaussian => {
            let dist = Normal::new(0.0, m / 3f64.sqrt())
                .map_err(|e| Error::invalid("noise_pct", e.to_string()))?;
            Box::new(move || dist.sample(&mut rng))
        }
    })
}

/// Run `samples` steps of the loop. `period_samples` sets the steady-state
/// detection period.
pub fn simulate(
    chain: &ControllerChain,
    plant: &RationalTF,
    reference: Reference,
    cfg: &SimConfig,
    samples: usize,
    period_samples: usize,
) -> Result<SimResult> {
    cfg.validate()?;
    let mut p = Pipeline::new(chain, plant, cfg.fs)?;
    let mut st = p.reset.new_state();
    let mut noise = noise_source(cfg, reference.amplitude())?;
    let limit = 1e6
        * reference.amplitude().max(match cfg.disturbance {
            Disturbance::Off => 0.0,
            Disturbance::Multisine { amplitude } => amplitude,
        });
    let limit = if limit > 0.0 { limit } else { 1e6 };

    let mut res = SimResult {
        fs: cfg.fs,
        r: Vec::with_capacity(samples),
        e: Vec::with_capacity(samples),
        u: Vec::with_capacity(samples),
        y: Vec::with_capacity(samples),
        resets: Vec::new(),
        t_ss: 0,
        settled: false,
        max_abs_error: 0.0,
        max_abs_control: 0.0,
    };
    for k in 0..samples {
        let t = k as f64 / cfg.fs;
        let y = p.plant.output(0.0);
        if !(y.abs() <= limit) {
            return Err(Error::Diverged {
                sample: k,
                magnitude: y.abs(),
            });
        }
        let r = reference.at(t);
        let e = r - (y + noise());
        let v = p.c1.step(e);
        let trigger = match p.shaping.as_mut() {
            Some(f) => f.step(v),
            None => v,
        };
        let out = p.reset.step(&mut st, v, trigger);
        if out.reset {
            res.resets.push(k);
        }
        let u = p.c2.step(out.output);
        p.plant.update(u + cfg.disturbance.at(t));
        res.r.push(r);
        res.e.push(e);
        res.u.push(u);
        res.y.push(y);
    }
    let ss = detect_steady_state(&res.e, period_samples, cfg.settle_periods);
    res.t_ss = ss.t_ss.min(samples);
    res.settled = ss.settled;
    res.max_abs_error = res.e[res.t_ss..].iter().fold(0.0, |m, v| m.max(v.abs()));
    res.max_abs_control = max_control_input(&res);
    Ok(res)
}

/// Closed-loop run for a sinusoidal (or zero) reference over
/// `settle_periods + measure_periods` periods of `freq_hz`.
pub fn simulate_closed_loop(
    chain: &ControllerChain,
    plant: &RationalTF,
    reference: Reference,
    cfg: &SimConfig,
) -> Result<SimResult> {
    let freq_hz = match reference {
        Reference::Sine { freq_hz, .. } if freq_hz > 0.0 => freq_hz,
        Reference::Sine { .. } => return Err(Error::invalid("freq_hz", "must be positive")),
        _ => DISTURBANCE_FREQS_HZ[0],
    };
    let period = (cfg.fs / freq_hz).round().max(1.0) as usize;
    let samples = period * (cfg.settle_periods + cfg.measure_periods);
    simulate(chain, plant, reference, cfg, samples, period)
}

/// `max |u(t)|` for `t >= t_ss`.
pub fn max_control_input(res: &SimResult) -> f64 {
    res.u[res.t_ss.min(res.u.len())..]
        .iter()
        .fold(0.0, |m, v| m.max(v.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityPoint {
    pub freq_hz: f64,
    /// `max |e| / r` over the steady-state window.
    pub s_partial: f64,
    pub max_control: f64,
    pub settled: bool,
}

/// Noise seed for the `index`-th point of a sweep; shared across sequences so
/// they see the same noise realization.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Pseudo-sensitivity sweep. `amplitude` maps a frequency in Hz to the
/// reference amplitude used there.
pub fn pseudo_sensitivity<A>(
    chain: &ControllerChain,
    plant: &RationalTF,
    freqs_hz: &[f64],
    amplitude: A,
    cfg: &SimConfig,
) -> Result<Vec<SensitivityPoint>>
where
    A: Fn(f64) -> f64 + Sync,
{
    if freqs_hz.iter().any(|&f| !(f > 0.0)) {
        return Err(Error::invalid("freqs", "frequencies must be positive"));
    }
    freqs_hz
        .par_iter()
        .enumerate()
        .map(|(i, &f)| {
            let amp = amplitude(f);
            let cfg = SimConfig {
                seed: point_seed(cfg.seed, i),
                ..cfg.clone()
            };
            let res = simulate_closed_loop(
                chain,
                plant,
                Reference::Sine {
                    amplitude: amp,
                    freq_hz: f,
                },
                &cfg,
            )?;
            Ok(SensitivityPoint {
                freq_hz: f,
                s_partial: res.max_abs_error / amp,
                max_control: res.max_abs_control,
                settled: res.settled,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResponse {
    pub result: SimResult,
    pub metrics: StepMetrics,
}

/// Unit-step response over `duration` seconds, noise and disturbance off.
pub fn simulate_step(
    chain: &ControllerChain,
    plant: &RationalTF,
    cfg: &SimConfig,
    duration: f64,
) -> Result<StepResponse> {
    let cfg = SimConfig {
        noise_pct: 0.0,
        disturbance: Disturbance::Off,
        ..cfg.clone()
    };
    let samples = (duration * cfg.fs).round() as usize;
    if samples < 10 {
        return Err(Error::invalid("duration", "too short for the sample rate"));
    }
    let result = simulate(
        chain,
        plant,
        Reference::Step { amplitude: 1.0 },
        &cfg,
        samples,
        samples,
    )?;
    let metrics = step_metrics(&result.y, 1.0, cfg.fs);
    Ok(StepResponse { result, metrics })
}

/// Peak plant output with zero reference and noise, used to size the disturbance.
fn disturbance_peak(
    chain: &ControllerChain,
    plant: &RationalTF,
    amplitude: f64,
    cfg: &SimConfig,
) -> Result<f64> {
    let cfg = SimConfig {
        noise_pct: 0.0,
        disturbance: Disturbance::Multisine { amplitude },
        ..cfg.clone()
    };
    let period = (cfg.fs / DISTURBANCE_FREQS_HZ[0]).round() as usize;
    // the slowest component sets the record: two periods to settle, two to measure
    let res = simulate(chain, plant, Reference::Zero, &cfg, 4 * period, period)?;
    Ok(res.y[2 * period..].iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// Multisine amplitude giving a peak output of `target_pct` percent of
/// `reference_amplitude` with zero reference and noise.
pub fn calibrate_disturbance(
    plant: &RationalTF,
    chain: &ControllerChain,
    target_pct: f64,
    reference_amplitude: f64,
    cfg: &SimConfig,
) -> Result<f64> {
    const ROUNDS: usize = 8;
    if !(target_pct >= 0.0) {
        return Err(Error::invalid("target_pct", "must be non-negative"));
    }
    let target = target_pct / 100.0 * reference_amplitude;
    if target == 0.0 {
        return Ok(0.0);
    }
    let unit = disturbance_peak(chain, plant, 1.0, cfg)?;
    if !(unit > 0.0) {
        return Err(Error::CalibrationFailed { rounds: 0 });
    }
    let guess = target / unit;
    let within = |peak: f64| (peak - target).abs() <= 0.02 * target;
    if within(disturbance_peak(chain, plant, guess, cfg)?) {
        return Ok(guess);
    }
    let (mut lo, mut hi) = (0.5 * guess, 2.0 * guess);
    for _ in 0..ROUNDS {
        let mid = 0.5 * (lo + hi);
        let peak = disturbance_peak(chain, plant, mid, cfg)?;
        if within(peak) {
            return Ok(mid);
        }
        if peak < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::CalibrationFailed { rounds: ROUNDS })
}
