//! The four subcommands. Each writes its tables (and optional SVG charts)
//! into the output directory together with a `run_info.txt` summary.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use resetctl::controllers::{
    arrange, check_crossover, design_shaping_filter, ControllerChain, ControllerParts,
    CrossoverCheck, Sequence, TuningParams,
};
use resetctl::hosidf::{df_sensitivity, open_loop_hosidf, open_loop_response};
use resetctl::lti::RationalTF;
use resetctl::presets::{amplitude_for, REFERENCE_POINTS};
use resetctl::sim::{
    calibrate_disturbance, point_seed, simulate_closed_loop, simulate_step, Disturbance, Reference,
    SimConfig,
};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::plot::{render, Chart, Series};
use crate::table::Table;

/// Noise level used by `sensitivity` when the config leaves it unset.
pub const DEFAULT_NOISE_PCT: f64 = 0.1;

pub const RUN_INFO: &str = "run_info.txt";

/// What a command produced.
#[derive(Debug, Default)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

struct Setup {
    plant: RationalTF,
    params: TuningParams,
    configured_kp: f64,
    chains: Vec<ControllerChain>,
    crossover: CrossoverCheck,
}

fn setup(cfg: &RunConfig) -> CliResult<Setup> {
    let plant = cfg.plant_tf()?;
    let configured_kp = cfg.base_params()?.kp;
    let params = cfg.params()?;
    let shaping = if cfg.sim.shaping {
        Some(design_shaping_filter(
            params.omega_c,
            cfg.sim.shaping_ratio * params.omega_c,
        )?)
    } else {
        None
    };
    let parts = ControllerParts::pi_cglp(&params)?.with_shaping(shaping);
    let chains = cfg
        .sim
        .sequences
        .iter()
        .map(|&id| Ok(arrange(parts.clone(), Sequence::from_id(id)?)))
        .collect::<CliResult<Vec<_>>>()?;
    let reference = arrange(parts, Sequence::LeadResetLag);
    let crossover = check_crossover(&reference, &plant, params.omega_c)?;
    Ok(Setup {
        plant,
        params,
        configured_kp,
        chains,
        crossover,
    })
}

struct Output {
    dir: PathBuf,
    report: Report,
    info: Vec<(String, String)>,
}

impl Output {
    fn new(cfg: &RunConfig, command: &str, setup: &Setup) -> CliResult<Self> {
        let dir = cfg.out_dir();
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let mut out = Self {
            dir,
            report: Report::default(),
            info: Vec::new(),
        };
        out.info("command", command);
        out.info(
            "kp_mode",
            format!("{:?}", cfg.controller.kp_mode).to_lowercase(),
        );
        out.info("kp_configured", num(setup.configured_kp));
        out.info("kp_used", num(setup.params.kp));
        out.info("gamma", num(setup.params.gamma));
        out.info("shaping", cfg.sim.shaping);
        match (setup.crossover.omega, setup.crossover.phase_margin_deg) {
            (Some(w), Some(pm)) => {
                out.info("crossover_hz", num(w / TAU));
                out.info("phase_margin_deg", num(pm));
            }
            _ => out.info("crossover_hz", "none"),
        }
        if setup.crossover.warn {
            let msg = match setup.crossover.omega {
                Some(w) => format!(
                    "DF crossover at {:.2} Hz deviates more than 10% from the intended {:.2} Hz",
                    w / TAU,
                    setup.params.omega_c / TAU
                ),
                None => {
                    "DF open loop has no gain crossover near the intended bandwidth".to_string()
                }
            };
            out.report.warnings.push(msg);
        }
        Ok(out)
    }

    fn info(&mut self, key: &str, value: impl ToString) {
        self.info.push((key.to_string(), value.to_string()));
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn table(&mut self, name: &str, t: &Table) -> CliResult<()> {
        let p = self.path(name);
        t.write(&p)?;
        self.report.files.push(p);
        Ok(())
    }

    fn svg(&mut self, name: &str, chart: &Chart<'_>, series: &[Series]) -> CliResult<()> {
        let p = self.path(name);
        write_text(&p, &render(chart, series))?;
        self.report.files.push(p);
        Ok(())
    }

    fn finish(mut self) -> CliResult<Report> {
        let mut text = String::new();
        for (k, v) in &self.info {
            let _ = writeln!(text, "{k}={v}");
        }
        for w in &self.report.warnings {
            let _ = writeln!(text, "warning={w}");
        }
        let p = self.path(RUN_INFO);
        write_text(&p, &text)?;
        self.report.files.push(p);
        Ok(self.report)
    }
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn db(v: f64) -> f64 {
    20.0 * v.log10()
}

fn sim_config(cfg: &RunConfig, noise_pct: f64) -> SimConfig {
    SimConfig {
        fs: cfg.sim.fs_hz,
        settle_periods: cfg.sim.settle_periods,
        measure_periods: cfg.sim.measure_periods,
        noise_pct,
        noise_kind: cfg.noise_kind(),
        disturbance: Disturbance::Off,
        seed: cfg.sim.seed,
    }
}

/// Multisine amplitude per unit reference amplitude for each chain; the loop
/// is homogeneous, so scaling by the point amplitude gives the same relative
/// disturbance everywhere.
fn unit_disturbance(cfg: &RunConfig, setup: &Setup, base: &SimConfig) -> CliResult<Vec<f64>> {
    if cfg.sim.disturbance_pct == 0.0 {
        return Ok(vec![0.0; setup.chains.len()]);
    }
    let quiet = SimConfig {
        noise_pct: 0.0,
        ..base.clone()
    };
    setup
        .chains
        .par_iter()
        .map(|c| {
            Ok(calibrate_disturbance(
                &setup.plant,
                c,
                cfg.sim.disturbance_pct,
                1.0,
                &quiet,
            )?)
        })
        .collect()
}

struct PointRun {
    freq_hz: f64,
    amplitude: f64,
    noise_pct: f64,
}

struct PointStats {
    max_error: f64,
    max_control: f64,
    settled: bool,
}

/// Simulate every chain at every point, `repetitions` times, and average.
/// Noise seeds depend on the point and repetition only, so all sequences see
/// the same realization.
fn run_points(
    out: &mut Output,
    cfg: &RunConfig,
    setup: &Setup,
    points: &[PointRun],
    base: &SimConfig,
) -> CliResult<Vec<Vec<PointStats>>> {
    let unit = unit_disturbance(cfg, setup, base)?;
    if cfg.sim.disturbance_pct > 0.0 {
        for (c, u) in setup.chains.iter().zip(&unit) {
            out.info(
                &format!("disturbance_per_unit_amplitude_seq{}", c.sequence.id()),
                num(*u),
            );
        }
    }
    let reps = cfg.sim.repetitions;
    let tasks: Vec<(usize, usize, usize)> = (0..setup.chains.len())
        .flat_map(|c| (0..points.len()).flat_map(move |p| (0..reps).map(move |r| (c, p, r))))
        .collect();
    let runs = tasks
        .par_iter()
        .map(|&(c, p, r)| {
            let pt = &points[p];
            let sc = SimConfig {
                noise_pct: pt.noise_pct,
                seed: point_seed(base.seed.wrapping_add(r as u64), p),
                disturbance: if unit[c] > 0.0 {
                    Disturbance::Multisine {
                        amplitude: unit[c] * pt.amplitude,
                    }
                } else {
                    Disturbance::Off
                },
                ..base.clone()
            };
            let reference = Reference::Sine {
                amplitude: pt.amplitude,
                freq_hz: pt.freq_hz,
            };
            Ok(simulate_closed_loop(
                &setup.chains[c],
                &setup.plant,
                reference,
                &sc,
            )?)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut out = Vec::with_capacity(setup.chains.len());
    for c in 0..setup.chains.len() {
        let mut row = Vec::with_capacity(points.len());
        for p in 0..points.len() {
            let first = (c * points.len() + p) * reps;
            let group = &runs[first..first + reps];
            row.push(PointStats {
                max_error: group.iter().map(|r| r.max_abs_error).sum::<f64>() / reps as f64,
                max_control: group.iter().map(|r| r.max_abs_control).sum::<f64>() / reps as f64,
                settled: group.iter().all(|r| r.settled),
            });
        }
        out.push(row);
    }
    Ok(out)
}

/// Open-loop harmonic responses, one table per sequence and order.
pub fn cmd_hosidf(cfg: &RunConfig) -> CliResult<Report> {
    let setup = setup(cfg)?;
    let mut out = Output::new(cfg, "hosidf", &setup)?;
    let grid_hz = cfg.hosidf_grid();
    let grid: Vec<f64> = grid_hz.iter().map(|f| f * TAU).collect();
    let orders = &cfg.hosidf.orders;
    let responses = setup
        .chains
        .par_iter()
        .map(|c| Ok(open_loop_response(c, &setup.plant, &grid, orders)?))
        .collect::<CliResult<Vec<_>>>()?;
    for (chain, resp) in setup.chains.iter().zip(&responses) {
        for &n in orders {
            let mut t = Table::new(&["freq_hz", "re", "im", "mag_db", "phase_deg"]);
            for (i, &f) in grid_hz.iter().enumerate() {
                let v = resp.get(i, n).expect("order was computed");
                t.push(vec![
                    f.into(),
                    v.re.into(),
                    v.im.into(),
                    db(v.norm()).into(),
                    v.arg().to_degrees().into(),
                ]);
            }
            out.table(&format!("hosidf_seq{}_n{n}.csv", chain.sequence.id()), &t)?;
        }
    }
    if cfg.output.plots {
        for &n in orders {
            let series: Vec<Series> = setup
                .chains
                .iter()
                .zip(&responses)
                .map(|(c, r)| Series {
                    label: format!("seq {}", c.sequence.id()),
                    points: grid_hz
                        .iter()
                        .enumerate()
                        .map(|(i, &f)| (f, db(r.get(i, n).expect("order was computed").norm())))
                        .collect(),
                })
                .collect();
            let title = format!("Open-loop harmonic n = {n}");
            let chart = Chart {
                title: &title,
                x_label: "frequency [Hz]",
                y_label: "magnitude [dB]",
                log_x: true,
            };
            out.svg(&format!("hosidf_n{n}.svg"), &chart, &series)?;
        }
    }
    out.info("points", grid_hz.len());
    out.finish()
}

/// Simulated pseudo-sensitivity sweep next to the DF prediction.
pub fn cmd_sensitivity(cfg: &RunConfig) -> CliResult<Report> {
    let setup = setup(cfg)?;
    let mut out = Output::new(cfg, "sensitivity", &setup)?;
    let noise_pct = cfg.sim.noise_pct.unwrap_or(DEFAULT_NOISE_PCT);
    let base = sim_config(cfg, noise_pct);
    let freqs = cfg.sim_grid();
    let points: Vec<PointRun> = freqs
        .iter()
        .map(|&f| PointRun {
            freq_hz: f,
            amplitude: cfg.sim.amplitude.unwrap_or_else(|| amplitude_for(f)),
            noise_pct,
        })
        .collect();
    let stats = run_points(&mut out, cfg, &setup, &points, &base)?;
    let mut t = Table::new(&[
        "freq_hz",
        "sequence_id",
        "s_partial_db",
        "max_control",
        "settled_flag",
        "df_sensitivity_db",
    ]);
    let mut series = Vec::new();
    for (chain, row) in setup.chains.iter().zip(&stats) {
        let mut sim_pts = Vec::new();
        let mut df_pts = Vec::new();
        for (pt, s) in points.iter().zip(row) {
            let l1 = open_loop_hosidf(chain, &setup.plant, pt.freq_hz * TAU, 1)?;
            let s_df = db(df_sensitivity(l1)?.norm());
            let s_partial = db(s.max_error / pt.amplitude);
            t.push(vec![
                pt.freq_hz.into(),
                chain.sequence.id().into(),
                s_partial.into(),
                s.max_control.into(),
                s.settled.into(),
                s_df.into(),
            ]);
            sim_pts.push((pt.freq_hz, s_partial));
            df_pts.push((pt.freq_hz, s_df));
        }
        series.push(Series {
            label: format!("seq {}", chain.sequence.id()),
            points: sim_pts,
        });
        series.push(Series {
            label: format!("seq {} DF", chain.sequence.id()),
            points: df_pts,
        });
    }
    out.table("sensitivity.csv", &t)?;
    if cfg.output.plots {
        let chart = Chart {
            title: "Pseudo-sensitivity",
            x_label: "frequency [Hz]",
            y_label: "max|e|/r [dB]",
            log_x: true,
        };
        out.svg("sensitivity.svg", &chart, &series)?;
    }
    sim_info(&mut out, cfg, noise_pct);
    out.finish()
}

/// Unit-step responses and their time-domain metrics.
pub fn cmd_step(cfg: &RunConfig) -> CliResult<Report> {
    let setup = setup(cfg)?;
    let mut out = Output::new(cfg, "step", &setup)?;
    let base = sim_config(cfg, 0.0);
    let runs = setup
        .chains
        .par_iter()
        .map(|c| {
            Ok(simulate_step(
                c,
                &setup.plant,
                &base,
                cfg.sim.step_duration_s,
            )?)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut metrics = Table::new(&[
        "sequence_id",
        "rise_time_s",
        "overshoot_pct",
        "settling_time_s",
        "ss_error",
        "settled_flag",
    ]);
    let mut series = Vec::new();
    for (chain, run) in setup.chains.iter().zip(&runs) {
        let r = &run.result;
        let mut t = Table::new(&["time_s", "y", "u", "e"]);
        for k in 0..r.y.len() {
            t.push(vec![
                (k as f64 / r.fs).into(),
                r.y[k].into(),
                r.u[k].into(),
                r.e[k].into(),
            ]);
        }
        let id = chain.sequence.id();
        out.table(&format!("step_seq{id}.csv"), &t)?;
        let m = &run.metrics;
        metrics.push(vec![
            id.into(),
            m.rise_time.into(),
            m.overshoot_pct.into(),
            m.settling_time.into(),
            m.ss_error.into(),
            m.settled.into(),
        ]);
        series.push(Series {
            label: format!("seq {id}"),
            points: r
                .y
                .iter()
                .enumerate()
                .map(|(k, &y)| (k as f64 / r.fs, y))
                .collect(),
        });
    }
    out.table("step_metrics.csv", &metrics)?;
    if cfg.output.plots {
        let chart = Chart {
            title: "Step response",
            x_label: "time [s]",
            y_label: "y",
            log_x: false,
        };
        out.svg("step.svg", &chart, &series)?;
    }
    out.info("fs_hz", num(cfg.sim.fs_hz));
    out.info("duration_s", num(cfg.sim.step_duration_s));
    out.finish()
}

/// Sequences side by side at the tabulated reference points.
pub fn cmd_compare(cfg: &RunConfig) -> CliResult<Report> {
    let setup = setup(cfg)?;
    let mut out = Output::new(cfg, "compare", &setup)?;
    let base = sim_config(cfg, 0.0);
    let points: Vec<PointRun> = REFERENCE_POINTS
        .iter()
        .map(|p| PointRun {
            freq_hz: p.freq_hz,
            amplitude: cfg.sim.amplitude.unwrap_or(p.amplitude),
            noise_pct: cfg.sim.noise_pct.unwrap_or(p.noise_pct),
        })
        .collect();
    let stats = run_points(&mut out, cfg, &setup, &points, &base)?;
    let mut t = Table::new(&[
        "frequency_hz",
        "sequence_id",
        "max_error",
        "max_control",
        "settled_flag",
    ]);
    for (chain, row) in setup.chains.iter().zip(&stats) {
        for (pt, s) in points.iter().zip(row) {
            t.push(vec![
                pt.freq_hz.into(),
                chain.sequence.id().into(),
                s.max_error.into(),
                s.max_control.into(),
                s.settled.into(),
            ]);
        }
    }
    let mut rank = Table::new(&["frequency_hz", "sequence_id", "error_rank", "control_rank"]);
    for (p, pt) in points.iter().enumerate() {
        let ranks = |key: &dyn Fn(&PointStats) -> f64| {
            let mut order: Vec<usize> = (0..setup.chains.len()).collect();
            order.sort_by(|&a, &b| key(&stats[a][p]).total_cmp(&key(&stats[b][p])));
            let mut r = vec![0i64; order.len()];
            for (pos, &c) in order.iter().enumerate() {
                r[c] = pos as i64 + 1;
            }
            r
        };
        let er = ranks(&|s| s.max_error);
        let ur = ranks(&|s| s.max_control);
        for (c, chain) in setup.chains.iter().enumerate() {
            rank.push(vec![
                pt.freq_hz.into(),
                chain.sequence.id().into(),
                er[c].into(),
                ur[c].into(),
            ]);
        }
    }
    out.table("compare.csv", &t)?;
    out.table("compare_rank.csv", &rank)?;
    if cfg.output.plots {
        let series: Vec<Series> = setup
            .chains
            .iter()
            .zip(&stats)
            .map(|(c, row)| Series {
                label: format!("seq {}", c.sequence.id()),
                points: points
                    .iter()
                    .zip(row)
                    .map(|(p, s)| (p.freq_hz, s.max_error))
                    .collect(),
            })
            .collect();
        let chart = Chart {
            title: "Steady-state error at the reference points",
            x_label: "frequency [Hz]",
            y_label: "max|e|",
            log_x: true,
        };
        out.svg("compare.svg", &chart, &series)?;
    }
    match cfg.sim.noise_pct {
        Some(v) => sim_info(&mut out, cfg, v),
        None => {
            sim_info_common(&mut out, cfg);
            out.info("noise_pct", "tabulated");
        }
    }
    out.finish()
}

fn sim_info_common(out: &mut Output, cfg: &RunConfig) {
    out.info("fs_hz", num(cfg.sim.fs_hz));
    out.info("seed", cfg.sim.seed);
    out.info("repetitions", cfg.sim.repetitions);
    out.info("disturbance_pct", num(cfg.sim.disturbance_pct));
}

fn sim_info(out: &mut Output, cfg: &RunConfig, noise_pct: f64) {
    sim_info_common(out, cfg);
    out.info("noise_pct", num(noise_pct));
}
