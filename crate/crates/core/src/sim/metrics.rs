#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SteadyState {
    pub t_ss: usize,
    pub settled: bool,
}

/// Earliest period boundary, not before `settle_periods`, after which
/// successive per-period maxima of `|e|` agree within 1%. Falls back to the
/// `settle_periods` boundary with `settled = false`.
pub fn detect_steady_state(e: &[f64], period_samples: usize, settle_periods: usize) -> SteadyState {
    let period = period_samples.max(1);
    let maxima: Vec<f64> = e
        .chunks_exact(period)
        .map(|c| c.iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .collect();
    let count = maxima.len();
    let floor = settle_periods.min(count.saturating_sub(2));
    let fallback = SteadyState {
        t_ss: floor * period,
        settled: false,
    };
    if count < 4 || maxima.iter().any(|m| !m.is_finite()) {
        return fallback;
    }
    let close = |a: f64, b: f64| {
        let scale = a.max(b);
        scale == 0.0 || (a - b).abs() < 0.01 * scale
    };
    // walk back from the end while neighbours agree
    let mut first = count - 1;
    while first > 0 && close(maxima[first - 1], maxima[first]) {
        first -= 1;
    }
    if first > count - 2 {
        return fallback;
    }
    SteadyState {
        t_ss: first.max(floor) * period,
        settled: true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    /// 10% to 90% of the final value, seconds.
    pub rise_time: f64,
    /// Peak above the final value, percent of the final value.
    pub overshoot_pct: f64,
    /// Last exit from the 2% band around the final value, seconds.
    pub settling_time: f64,
    /// Largest `|reference - y|` over the last tenth of the record; for a
    /// response that converges this is the final error, for a sustained
    /// oscillation it is the error that persists.
    pub ss_error: f64,
    /// False when the response is still outside the 2% band in the last tenth of the record.
    pub settled: bool,
}

/// Metrics of a step response `y` sampled at `fs`. The final value is the
/// mean of the last 5% of the record.
pub fn step_metrics(y: &[f64], reference: f64, fs: f64) -> StepMetrics {
    let n = y.len();
    let tail = (n / 20).max(1);
    let y_final = y[n - tail..].iter().sum::<f64>() / tail as f64;
    let first_at = |level: f64| {
        y.iter()
            .position(|&v| {
                if y_final >= 0.0 {
                    v >= level
                } else {
                    v <= level
                }
            })
            .map(|k| k as f64 / fs)
    };
    let rise_time = match (first_at(0.1 * y_final), first_at(0.9 * y_final)) {
        (Some(a), Some(b)) => b - a,
        _ => f64::NAN,
    };
    let peak = y
        .iter()
        .fold(f64::NEG_INFINITY, |m, &v| m.max(v * y_final.signum()));
    let overshoot_pct = if y_final != 0.0 {
        ((peak - y_final.abs()) / y_final.abs() * 100.0).max(0.0)
    } else {
        f64::NAN
    };
    let band = 0.02 * y_final.abs();
    let last_out = y.iter().rposition(|&v| (v - y_final).abs() > band);
    let settling_time = last_out.map_or(0.0, |k| (k + 1) as f64 / fs);
    let settled = last_out.is_none_or(|k| k < n - n / 10);
    StepMetrics {
        rise_time,
        overshoot_pct,
        settling_time,
        ss_error: y[n - (n / 10).max(1)..]
            .iter()
            .fold(0.0, |m, v| m.max((reference - v).abs())),
        settled,
    }
}
