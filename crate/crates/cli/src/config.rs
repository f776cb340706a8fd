//! Run configuration: a sectioned `key = value` file (TOML syntax) with
//! command-line overrides applied on top. Unknown keys are rejected.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use resetctl::controllers::{tuned, TuningParams};
use resetctl::lti::{log_space, RationalTF};
use resetctl::presets::PLANT_DEN;
use resetctl::sim::NoiseKind;

use crate::error::{CliError, CliResult};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "RESETCTL_OUT";
pub const DEFAULT_OUT: &str = "out";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantSection {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

impl Default for PlantSection {
    fn default() -> Self {
        Self {
            num: vec![1.0],
            den: PLANT_DEN.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KpMode {
    /// Use `kp` as given.
    Fixed,
    /// Rescale `kp` so the DF open loop crosses 0 dB at `omega_c`.
    Crossover,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerSection {
    pub omega_c_hz: f64,
    pub omega_d_hz: f64,
    pub omega_t_hz: f64,
    pub omega_i_hz: f64,
    /// Defaults to `omega_d_hz / alpha`.
    pub omega_r_hz: Option<f64>,
    pub alpha: f64,
    pub kp: f64,
    pub gamma: f64,
    pub kp_mode: KpMode,
}

impl Default for ControllerSection {
    fn default() -> Self {
        let t = TuningParams::reference();
        Self {
            omega_c_hz: t.omega_c / TAU,
            omega_d_hz: t.omega_d / TAU,
            omega_t_hz: t.omega_t / TAU,
            omega_i_hz: t.omega_i / TAU,
            omega_r_hz: None,
            alpha: t.alpha,
            kp: t.kp,
            gamma: t.gamma,
            kp_mode: KpMode::Crossover,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HosidfSection {
    pub fmin_hz: f64,
    pub fmax_hz: f64,
    /// Total grid points; defaults to 200 per decade.
    pub points: Option<usize>,
    pub orders: Vec<usize>,
}

impl Default for HosidfSection {
    fn default() -> Self {
        Self {
            fmin_hz: 0.1,
            fmax_hz: 1000.0,
            points: None,
            orders: vec![1, 3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseModel {
    Uniform,
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub sequences: Vec<u8>,
    pub fs_hz: f64,
    pub settle_periods: usize,
    pub measure_periods: usize,
    /// Percent of the reference amplitude. Unset means the per-point
    /// tabulated level in `compare` and 0.1 elsewhere.
    pub noise_pct: Option<f64>,
    pub noise: NoiseModel,
    pub seed: u64,
    pub repetitions: usize,
    pub shaping: bool,
    /// Shaping low-pass corner as a multiple of `omega_c`.
    pub shaping_ratio: f64,
    /// Peak plant-output deviation caused by the disturbance, percent of the
    /// reference amplitude; 0 turns the disturbance off.
    pub disturbance_pct: f64,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
    pub points: usize,
    /// Reference amplitude; unset means the nearest tabulated amplitude.
    pub amplitude: Option<f64>,
    pub step_duration_s: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            sequences: vec![1, 2, 3, 4],
            fs_hz: 20_000.0,
            settle_periods: 10,
            measure_periods: 10,
            noise_pct: None,
            noise: NoiseModel::Uniform,
            seed: 0,
            repetitions: 1,
            shaping: false,
            shaping_ratio: 2.0,
            disturbance_pct: 0.0,
            fmin_hz: 1.0,
            fmax_hz: 100.0,
            points: 10,
            amplitude: None,
            step_duration_s: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub plots: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub plant: PlantSection,
    pub controller: ControllerSection,
    pub hosidf: HosidfSection,
    pub sim: SimSection,
    pub output: OutputSection,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub sequences: Option<Vec<u8>>,
    pub noise_pct: Option<f64>,
    pub seed: Option<u64>,
    pub shaping: Option<bool>,
    pub out: Option<PathBuf>,
    pub fmin_hz: Option<f64>,
    pub fmax_hz: Option<f64>,
    pub points: Option<usize>,
}

/// Which frequency grid the `--fmin/--fmax/--points` overrides act on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridTarget {
    Hosidf,
    Sim,
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn apply(&mut self, o: &Overrides, grid: GridTarget) -> CliResult<()> {
        if let Some(s) = &o.sequences {
            self.sim.sequences = s.clone();
        }
        if let Some(v) = o.noise_pct {
            self.sim.noise_pct = Some(v);
        }
        if let Some(v) = o.seed {
            self.sim.seed = v;
        }
        if let Some(v) = o.shaping {
            self.sim.shaping = v;
        }
        if let Some(v) = &o.out {
            self.output.dir = Some(v.clone());
        }
        match grid {
            GridTarget::Hosidf => {
                if let Some(v) = o.fmin_hz {
                    self.hosidf.fmin_hz = v;
                }
                if let Some(v) = o.fmax_hz {
                    self.hosidf.fmax_hz = v;
                }
                if let Some(v) = o.points {
                    self.hosidf.points = Some(v);
                }
            }
            GridTarget::Sim => {
                if let Some(v) = o.fmin_hz {
                    self.sim.fmin_hz = v;
                }
                if let Some(v) = o.fmax_hz {
                    self.sim.fmax_hz = v;
                }
                if let Some(v) = o.points {
                    self.sim.points = v;
                }
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        self.plant_tf()?;
        self.base_params()?;
        for (name, lo, hi) in [
            ("hosidf", self.hosidf.fmin_hz, self.hosidf.fmax_hz),
            ("sim", self.sim.fmin_hz, self.sim.fmax_hz),
        ] {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return bad(format!("[{name}] needs 0 < fmin_hz <= fmax_hz"));
            }
        }
        if self.hosidf.points == Some(0) || self.sim.points == 0 {
            return bad("points must be at least 1".into());
        }
        if self.hosidf.orders.is_empty() || self.hosidf.orders.contains(&0) {
            return bad("[hosidf] orders must be positive".into());
        }
        if self.sim.sequences.is_empty() || self.sim.sequences.iter().any(|s| !(1..=4).contains(s))
        {
            return bad("sequences must be drawn from 1..=4".into());
        }
        if !(self.sim.fs_hz > 0.0) {
            return bad("[sim] fs_hz must be positive".into());
        }
        if self.sim.measure_periods < 2 {
            return bad("[sim] measure_periods must be at least 2".into());
        }
        if self.sim.noise_pct.is_some_and(|v| !(v >= 0.0)) {
            return bad("[sim] noise_pct must be non-negative".into());
        }
        if !(self.sim.disturbance_pct >= 0.0) {
            return bad("[sim] disturbance_pct must be non-negative".into());
        }
        if self.sim.repetitions == 0 {
            return bad("[sim] repetitions must be at least 1".into());
        }
        if !(self.sim.shaping_ratio > 0.0) {
            return bad("[sim] shaping_ratio must be positive".into());
        }
        if self.sim.amplitude.is_some_and(|a| !(a > 0.0)) {
            return bad("[sim] amplitude must be positive".into());
        }
        if !(self.sim.step_duration_s > 0.0) {
            return bad("[sim] step_duration_s must be positive".into());
        }
        Ok(())
    }

    pub fn plant_tf(&self) -> CliResult<RationalTF> {
        let tf = RationalTF::new(self.plant.num.clone(), self.plant.den.clone())
            .map_err(|e| CliError::Config(format!("[plant] {e}")))?;
        if tf.num_degree() >= tf.den_degree() {
            return Err(CliError::Config("[plant] must be strictly proper".into()));
        }
        Ok(tf)
    }

    /// Tuning parameters exactly as written (no gain retuning).
    pub fn base_params(&self) -> CliResult<TuningParams> {
        let c = &self.controller;
        let p = TuningParams {
            omega_c: c.omega_c_hz * TAU,
            omega_d: c.omega_d_hz * TAU,
            omega_t: c.omega_t_hz * TAU,
            omega_i: c.omega_i_hz * TAU,
            omega_r: c
                .omega_r_hz
                .map_or(c.omega_d_hz * TAU / c.alpha, |v| v * TAU),
            kp: c.kp,
            gamma: c.gamma,
            alpha: c.alpha,
        };
        p.validate()
            .map_err(|e| CliError::Config(format!("[controller] {e}")))?;
        Ok(p)
    }

    /// Parameters used for analysis and simulation, after `kp_mode`.
    pub fn params(&self) -> CliResult<TuningParams> {
        let p = self.base_params()?;
        match self.controller.kp_mode {
            KpMode::Fixed => Ok(p),
            KpMode::Crossover => Ok(tuned(&p, &self.plant_tf()?)?),
        }
    }

    pub fn noise_kind(&self) -> NoiseKind {
        match self.sim.noise {
            NoiseModel::Uniform => NoiseKind::Uniform,
            NoiseModel::Gaussian => NoiseKind::Gaussian,
        }
    }

    /// HOSIDF grid in Hz.
    pub fn hosidf_grid(&self) -> Vec<f64> {
        let h = &self.hosidf;
        let n = h.points.unwrap_or_else(|| {
            let decades = (h.fmax_hz / h.fmin_hz).log10();
            (200.0 * decades).round() as usize + 1
        });
        log_space(h.fmin_hz, h.fmax_hz, n)
    }

    /// Simulation sweep grid in Hz.
    pub fn sim_grid(&self) -> Vec<f64> {
        log_space(self.sim.fmin_hz, self.sim.fmax_hz, self.sim.points)
    }

    /// Output directory: config/flag, then the environment, then `./out`.
    pub fn out_dir(&self) -> PathBuf {
        self.output
            .dir
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }
}
