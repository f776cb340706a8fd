//! Positioning-stage plant and the sinusoidal reference points used for
//! the sequence comparison.

use crate::lti::RationalTF;

/// Identified stage model `1 / (1.077e-4 s^2 + 0.0049 s + 4.2218)`.
pub const PLANT_DEN: [f64; 3] = [1.077e-4, 0.0049, 4.2218];

pub fn plant() -> RationalTF {
    RationalTF::new(vec![1.0], PLANT_DEN.to_vec()).expect("plant coefficients are valid")
}

/// A sinusoidal reference point: frequency and amplitude (0.1 um units)
/// with the matching measurement noise level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferencePoint {
    pub freq_hz: f64,
    pub amplitude: f64,
    /// Noise magnitude as a percentage of `amplitude`.
    pub noise_pct: f64,
}

pub const REFERENCE_POINTS: [ReferencePoint; 5] = [
    ReferencePoint {
        freq_hz: 1.0,
        amplitude: 100.0,
        noise_pct: 1.0,
    },
    ReferencePoint {
        freq_hz: 5.0,
        amplitude: 120.0,
        noise_pct: 0.83,
    },
    ReferencePoint {
        freq_hz: 10.0,
        amplitude: 120.0,
        noise_pct: 0.83,
    },
    ReferencePoint {
        freq_hz: 15.0,
        amplitude: 150.0,
        noise_pct: 0.67,
    },
    ReferencePoint {
        freq_hz: 20.0,
        amplitude: 200.0,
        noise_pct: 0.5,
    },
];

/// Reference amplitude for `freq_hz`, taken from the nearest tabulated point.
pub fn amplitude_for(freq_hz: f64) -> f64 {
    REFERENCE_POINTS
        .iter()
        .min_by(|a, b| {
            (a.freq_hz.ln() - freq_hz.ln())
                .abs()
                .total_cmp(&(b.freq_hz.ln() - freq_hz.ln()).abs())
        })
        .map(|p| p.amplitude)
        .unwrap_or(100.0)
}
