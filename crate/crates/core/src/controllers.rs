//! PI + CgLp controller family, the four lead/reset/lag arrangements and
//! the reset-trigger shaping filter.

use std::f64::consts::{FRAC_PI_4, PI};
use std::fmt;

use crate::error::{Error, Result};
use crate::lti::RationalTF;
use crate::reset::{make_fore, ResetElement};

const HZ: f64 = 2.0 * PI;

/// Loop-shaping parameters of a PI + CgLp controller. Frequencies in rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningParams {
    pub omega_c: f64,
    pub omega_d: f64,
    pub omega_t: f64,
    pub omega_r: f64,
    pub omega_i: f64,
    pub kp: f64,
    pub gamma: f64,
    pub alpha: f64,
}

impl TuningParams {
    pub const DEFAULT_ALPHA: f64 = 1.62;
    pub const REFERENCE_KP: f64 = 3980.0;

    /// Reference positioning-stage tuning: 100 Hz bandwidth, lead
    /// 25..600 Hz, integrator corner 10 Hz, `gamma = 0`, `Kp = 3980`.
    pub fn reference() -> Self {
        Self::from_bandwidth(100.0 * HZ, Self::DEFAULT_ALPHA, Self::REFERENCE_KP, 0.0)
    }

    /// Standard placement around a bandwidth `omega_c`: `omega_d = omega_c/4`,
    /// `omega_i = omega_c/10`, `omega_t = 6 omega_c`, `omega_r = omega_d/alpha`.
    pub fn from_bandwidth(omega_c: f64, alpha: f64, kp: f64, gamma: f64) -> Self {
        let omega_d = omega_c / 4.0;
        Self {
            omega_c,
            omega_d,
            omega_t: 6.0 * omega_c,
            omega_r: omega_d / alpha,
            omega_i: omega_c / 10.0,
            kp,
            gamma,
            alpha,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("omega_c", self.omega_c),
            ("omega_d", self.omega_d),
            ("omega_t", self.omega_t),
            ("omega_r", self.omega_r),
            ("omega_i", self.omega_i),
            ("alpha", self.alpha),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        if !self.kp.is_finite() || self.kp == 0.0 {
            return Err(Error::invalid(
                "kp",
                format!("must be finite and nonzero, got {}", self.kp),
            ));
        }
        if !(-1.0..=1.0).contains(&self.gamma) {
            return Err(Error::invalid(
                "gamma",
                format!("{} outside [-1, 1]", self.gamma),
            ));
        }
        if !(self.omega_d < self.omega_c && self.omega_c < self.omega_t) {
            return Err(Error::invalid(
                "omega_c",
                "requires omega_d < omega_c < omega_t",
            ));
        }
        let expect = self.omega_d / self.alpha;
        if ((self.omega_r - expect) / expect).abs() > 1e-9 {
            return Err(Error::invalid(
                "omega_r",
                format!("{} != omega_d / alpha = {expect}", self.omega_r),
            ));
        }
        Ok(())
    }

    pub fn with_kp(&self, kp: f64) -> Self {
        Self { kp, ..self.clone() }
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self {
            gamma,
            ..self.clone()
        }
    }
}

/// `Kp (1 + omega_i / s)`.
pub fn make_pi(kp: f64, omega_i: f64) -> Result<RationalTF> {
    if !(omega_i > 0.0) {
        return Err(Error::invalid(
            "omega_i",
            format!("must be positive, got {omega_i}"),
        ));
    }
    RationalTF::new(vec![kp, kp * omega_i], vec![1.0, 0.0])
}

/// `(s/omega_d + 1) / (s/omega_t + 1)`.
pub fn make_lead(omega_d: f64, omega_t: f64) -> Result<RationalTF> {
    if !(omega_d > 0.0 && omega_d < omega_t) {
        return Err(Error::invalid(
            "omega_d",
            format!("lead needs 0 < omega_d < omega_t, got {omega_d} and {omega_t}"),
        ));
    }
    RationalTF::new(vec![1.0 / omega_d, 1.0], vec![1.0 / omega_t, 1.0])
}

/// CgLp compensator: FORE at `omega_d / alpha` and the lead `D(s)`.
pub fn make_cglp(params: &TuningParams) -> Result<(ResetElement, RationalTF)> {
    params.validate()?;
    let fore = make_fore(params.omega_d / params.alpha, params.gamma)?;
    let lead = make_lead(params.omega_d, params.omega_t)?;
    Ok((fore, lead))
}

/// Low-pass plus tamed lead placed in front of the reset trigger.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapingFilter {
    pub omega_f: f64,
    pub omega_c: f64,
    pub a: f64,
    pub tf: RationalTF,
}

impl ShapingFilter {
    /// Residual of `atan(a) - atan(1/a) + phi_c`, zero when the lead cancels
    /// the low-pass phase at `omega_c`.
    pub fn tuning_residual(&self) -> f64 {
        let phi_c = -(self.omega_c / self.omega_f).atan();
        self.a.atan() - (1.0 / self.a).atan() + phi_c
    }
}

pub fn design_shaping_filter(omega_c: f64, omega_f: f64) -> Result<ShapingFilter> {
    if !(omega_c > 0.0) || !(omega_f > 0.0) {
        return Err(Error::invalid(
            "omega",
            "shaping filter frequencies must be positive",
        ));
    }
    // atan(a) - atan(1/a) = 2 atan(a) - pi/2
    let a = (FRAC_PI_4 + 0.5 * (omega_c / omega_f).atan()).tan();
    let lpf = RationalTF::new(vec![1.0], vec![1.0 / omega_f, 1.0])?;
    let lead = RationalTF::new(vec![a / omega_c, 1.0], vec![1.0 / (omega_c * a), 1.0])?;
    Ok(ShapingFilter {
        omega_f,
        omega_c,
        a,
        tf: lpf.series(&lead),
    })
}

/// Phase of the shaping filter at `omega` rad/s, in radians.
pub fn phase_at(sf: &ShapingFilter, omega: f64) -> f64 {
    sf.tf.freq_response(omega).map(|v| v.arg()).unwrap_or(0.0)
}

/// Relative order of lead, reset and lag parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sequence {
    LeadResetLag = 1,
    LagResetLead = 2,
    ResetLeadLag = 3,
    LeadLagReset = 4,
}

impl Sequence {
    pub const ALL: [Sequence; 4] = [
        Sequence::LeadResetLag,
        Sequence::LagResetLead,
        Sequence::ResetLeadLag,
        Sequence::LeadLagReset,
    ];

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(Sequence::LeadResetLag),
            2 => Ok(Sequence::LagResetLead),
            3 => Ok(Sequence::ResetLeadLag),
            4 => Ok(Sequence::LeadLagReset),
            _ => Err(Error::invalid("sequence", format!("id {id} not in 1..=4"))),
        }
    }

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            Sequence::LeadResetLag => "Lead-Reset-Lag",
            Sequence::LagResetLead => "Lag-Reset-Lead",
            Sequence::ResetLeadLag => "Reset-Lead-Lag",
            Sequence::LeadLagReset => "Lead-Lag-Reset",
        }
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.id(), self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerParts {
    pub lead: RationalTF,
    pub lag: RationalTF,
    pub reset: ResetElement,
    pub shaping: Option<ShapingFilter>,
}

impl ControllerParts {
    pub fn new(lead: RationalTF, lag: RationalTF, reset: ResetElement) -> Result<Self> {
        if !lead.is_proper() || !lag.is_proper() {
            return Err(Error::invalid("parts", "lead and lag must be proper"));
        }
        Ok(Self {
            lead,
            lag,
            reset,
            shaping: None,
        })
    }

    /// PI as the lag part, `D(s)` as the lead part and the FORE as the reset part.
    pub fn pi_cglp(params: &TuningParams) -> Result<Self> {
        let (fore, lead) = make_cglp(params)?;
        let lag = make_pi(params.kp, params.omega_i)?;
        Self::new(lead, lag, fore)
    }

    pub fn with_shaping(mut self, shaping: Option<ShapingFilter>) -> Self {
        self.shaping = shaping;
        self
    }
}

/// Controller parts arranged as `C_L1 -> reset -> C_L2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerChain {
    pub parts: ControllerParts,
    pub sequence: Sequence,
    pub c_l1: RationalTF,
    pub c_l2: RationalTF,
}

impl ControllerChain {
    pub fn reset(&self) -> &ResetElement {
        &self.parts.reset
    }

    pub fn shaping(&self) -> Option<&ShapingFilter> {
        self.parts.shaping.as_ref()
    }

    /// Linear transfer function obtained when the reset element never fires.
    pub fn base_linear(&self) -> Result<RationalTF> {
        let base = crate::lti::StateSpace::clone(self.parts.reset.base());
        Ok(self.c_l1.series(&ss_to_tf(&base)?).series(&self.c_l2))
    }
}

pub fn arrange_sequence(parts: ControllerParts, id: u8) -> Result<ControllerChain> {
    let sequence = Sequence::from_id(id)?;
    Ok(arrange(parts, sequence))
}

pub fn arrange(parts: ControllerParts, sequence: Sequence) -> ControllerChain {
    let one = RationalTF::identity();
    let (c_l1, c_l2) = match sequence {
        Sequence::LeadResetLag => (parts.lead.clone(), parts.lag.clone()),
        Sequence::LagResetLead => (parts.lag.clone(), parts.lead.clone()),
        Sequence::ResetLeadLag => (one, parts.lead.series(&parts.lag)),
        Sequence::LeadLagReset => (parts.lead.series(&parts.lag), one),
    };
    ControllerChain {
        parts,
        sequence,
        c_l1,
        c_l2,
    }
}

/// DF-based loop check against the intended bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossoverCheck {
    /// rad/s, `None` when the DF open loop never falls through 0 dB.
    pub omega: Option<f64>,
    pub phase_margin_deg: Option<f64>,
    /// Relative deviation of the crossover from `omega_c`.
    pub deviation: Option<f64>,
    /// True when the crossover is missing or more than 10% off `omega_c`.
    pub warn: bool,
}

/// Locate the DF crossover of `chain` with `plant` on `[omega_c/100, 100 omega_c]`.
pub fn check_crossover(
    chain: &ControllerChain,
    plant: &RationalTF,
    omega_c: f64,
) -> Result<CrossoverCheck> {
    let c = crate::hosidf::find_crossover(
        |w| crate::hosidf::open_loop_hosidf(chain, plant, w, 1),
        omega_c / 100.0,
        omega_c * 100.0,
    )?;
    Ok(match c {
        Some(c) => {
            let dev = (c.omega - omega_c) / omega_c;
            CrossoverCheck {
                omega: Some(c.omega),
                phase_margin_deg: Some(c.phase_margin_deg),
                deviation: Some(dev),
                warn: dev.abs() > 0.1,
            }
        }
        None => CrossoverCheck {
            omega: None,
            phase_margin_deg: None,
            deviation: None,
            warn: true,
        },
    })
}

/// Proportional gain that puts the DF open-loop magnitude at exactly 1 at
/// `omega_c`. The DF of the loop is linear in `kp`, so one evaluation suffices.
pub fn tune_kp(params: &TuningParams, plant: &RationalTF) -> Result<f64> {
    let chain = arrange(ControllerParts::pi_cglp(params)?, Sequence::LeadResetLag);
    let l = crate::hosidf::open_loop_hosidf(&chain, plant, params.omega_c, 1)?;
    if !(l.norm() > 0.0) || !l.norm().is_finite() {
        return Err(Error::invalid(
            "kp",
            "open loop has no usable gain at omega_c",
        ));
    }
    Ok(params.kp / l.norm())
}

/// `params` with `kp` replaced by [`tune_kp`].
pub fn tuned(params: &TuningParams, plant: &RationalTF) -> Result<TuningParams> {
    Ok(params.with_kp(tune_kp(params, plant)?))
}

// Transfer function of a realization with at most a few states, via the
// characteristic polynomial and the numerator from `C adj(sI - A) B + D det`.
fn ss_to_tf(ss: &crate::lti::StateSpace) -> Result<RationalTF> {
    let n = ss.order();
    if n == 0 {
        return Ok(RationalTF::gain(ss.d));
    }
    // Faddeev-LeVerrier: det(sI - A) = s^n + c1 s^{n-1} + ... ,
    // adj(sI - A) = sum_k M_k s^{n-1-k}
    let ident = nalgebra::DMatrix::<f64>::identity(n, n);
    let mut m = ident.clone();
    let mut den = vec![1.0];
    let mut num = vec![0.0; n + 1];
    for (k, slot) in num.iter_mut().enumerate().skip(1) {
        // numerator term for s^{n-k}
        *slot = (&ss.c * &m * &ss.b)[(0, 0)];
        let am = &ss.a * &m;
        let ck = -am.trace() / k as f64;
        den.push(ck);
        m = am + &ident * ck;
    }
    let num: Vec<f64> = num
        .iter()
        .zip(&den)
        .map(|(nb, dc)| nb + ss.d * dc)
        .collect();
    RationalTF::new(num, den)
}
