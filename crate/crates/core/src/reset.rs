//! Reset elements: a linear base system whose state is scaled by `gamma`
//! whenever the reset trigger crosses zero.
//!
//! Sampled semantics used throughout the crate:
//!
//! * a crossing at sample `k` means `prev != 0 && prev * curr <= 0`, so an
//!   exact zero counts once and a run of zeros is not re-triggered;
//! * a crossing only resets when `k > last_reset + 1` (no two consecutive
//!   reset samples);
//! * the reset `x <- gamma x` is applied before the ZOH flow update of the
//!   same sample, and the output is read after the update.

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{Error, Result};
use crate::lti::{
    discretize, tf_to_ss, DiscreteStateSpace, Discretization, RationalTF, StateSpace,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ResetElement {
    base: StateSpace,
    gamma: f64,
}

impl ResetElement {
    pub fn new(base: StateSpace, gamma: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&gamma) {
            return Err(Error::invalid("gamma", format!("{gamma} outside [-1, 1]")));
        }
        if base.order() == 0 {
            return Err(Error::invalid(
                "base",
                "reset element needs at least one state",
            ));
        }
        Ok(Self { base, gamma })
    }

    pub fn base(&self) -> &StateSpace {
        &self.base
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn order(&self) -> usize {
        self.base.order()
    }

    /// Reset matrix `gamma * I`.
    pub fn reset_matrix(&self) -> DMatrix<f64> {
        DMatrix::identity(self.order(), self.order()) * self.gamma
    }

    /// The same element with a different reset coefficient.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.base.clone(), gamma)
    }

    pub fn discretize(&self, ts: f64) -> Result<DiscreteResetElement> {
        let sys = discretize(&self.base, ts, Discretization::Zoh)?;
        Ok(DiscreteResetElement {
            ad: sys.a.iter().copied().collect::<Vec<_>>(),
            n: sys.order(),
            sys,
            gamma: self.gamma,
        })
    }

    /// One sample of the element, discretizing on the fly.
    ///
    /// Convenient for tests; simulations should discretize once with
    /// [`ResetElement::discretize`].
    pub fn step(
        &self,
        st: &ResetSimState,
        u: f64,
        trigger: f64,
        ts: f64,
    ) -> Result<(ResetSimState, f64)> {
        let d = self.discretize(ts)?;
        let mut next = st.clone();
        let y = d.step(&mut next, u, trigger).output;
        Ok((next, y))
    }
}

/// First order reset element `1 / (s/omega_r + 1)`.
pub fn make_fore(omega_r: f64, gamma: f64) -> Result<ResetElement> {
    if !(omega_r > 0.0) || !omega_r.is_finite() {
        return Err(Error::invalid(
            "omega_r",
            format!("must be positive, got {omega_r}"),
        ));
    }
    let tf = RationalTF::new(vec![1.0], vec![1.0 / omega_r, 1.0])?;
    ResetElement::new(tf_to_ss(&tf)?, gamma)
}

/// Clegg integrator: `A = 0, B = 1, C = 1, D = 0`.
pub fn make_clegg(gamma: f64) -> Result<ResetElement> {
    let base = StateSpace::new(
        DMatrix::zeros(1, 1),
        DVector::from_element(1, 1.0),
        RowDVector::from_element(1, 1.0),
        0.0,
    )?;
    ResetElement::new(base, gamma)
}

/// Per-run state of a sampled reset element.
#[derive(Debug, Clone, PartialEq)]
pub struct ResetSimState {
    pub x: Vec<f64>,
    /// Sample index of the most recent reset.
    pub last_reset_step: Option<u64>,
    pub prev_trigger: f64,
    /// Index of the next sample to be processed.
    pub step_index: u64,
}

impl ResetSimState {
    pub fn new(order: usize) -> Self {
        Self {
            x: vec![0.0; order],
            last_reset_step: None,
            prev_trigger: 0.0,
            step_index: 0,
        }
    }
}

/// Whether `prev -> curr` is a zero crossing under the sampled reset law.
#[inline]
pub fn is_crossing(prev: f64, curr: f64) -> bool {
    prev != 0.0 && prev * curr <= 0.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub output: f64,
    pub reset: bool,
}

/// ZOH-discretized reset element ready for stepping.
#[derive(Debug, Clone)]
pub struct DiscreteResetElement {
    sys: DiscreteStateSpace,
    ad: Vec<f64>, // column-major copy of Ad
    n: usize,
    gamma: f64,
}

impl DiscreteResetElement {
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn ts(&self) -> f64 {
        self.sys.ts
    }

    pub fn new_state(&self) -> ResetSimState {
        ResetSimState::new(self.n)
    }

    /// Linear equivalent with the same read-after-update convention:
    /// `(Ad, Bd, C Ad, C Bd + D)` stepped as output-then-update.
    pub fn base_filter(&self) -> DiscreteStateSpace {
        let c = &self.sys.c * &self.sys.a;
        let d = (&self.sys.c * &self.sys.b)[(0, 0)] + self.sys.d;
        DiscreteStateSpace {
            a: self.sys.a.clone(),
            b: self.sys.b.clone(),
            c,
            d,
            ts: self.sys.ts,
        }
    }

    pub fn step(&self, st: &mut ResetSimState, u: f64, trigger: f64) -> StepOutcome {
        let k = st.step_index;
        let spaced = st.last_reset_step.is_none_or(|last| k > last + 1);
        let reset = is_crossing(st.prev_trigger, trigger) && spaced;
        if reset {
            st.x.iter_mut().for_each(|v| *v *= self.gamma);
            st.last_reset_step = Some(k);
        }

        let n = self.n;
        let mut out = self.sys.d * u;
        if n == 1 {
            let x = self.ad[0] * st.x[0] + self.sys.b[0] * u;
            st.x[0] = x;
            out += self.sys.c[0] * x;
        } else {
            let mut next = [0.0; 8];
            let mut heap;
            let buf: &mut [f64] = if n <= 8 {
                &mut next[..n]
            } else {
                heap = vec![0.0; n];
                &mut heap
            };
            for (i, slot) in buf.iter_mut().enumerate() {
                let mut acc = self.sys.b[i] * u;
                for j in 0..n {
                    acc += self.ad[j * n + i] * st.x[j];
                }
                *slot = acc;
            }
            st.x.copy_from_slice(buf);
            out += self
                .sys
                .c
                .iter()
                .zip(&st.x)
                .map(|(c, x)| c * x)
                .sum::<f64>();
        }

        st.prev_trigger = trigger;
        st.step_index = k + 1;
        StepOutcome { output: out, reset }
    }
}
