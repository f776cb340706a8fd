//! Shared fixtures for the benchmarks.

use resetctl::controllers::{
    arrange, tuned, ControllerChain, ControllerParts, Sequence, TuningParams,
};
use resetctl::lti::RationalTF;
use resetctl::presets::plant;

/// Tuned PI+CgLp parameters with the reference plant.
pub fn fixture() -> (TuningParams, RationalTF) {
    let g = plant();
    let p = tuned(&TuningParams::reference(), &g).expect("reference tuning");
    (p, g)
}

pub fn chain(params: &TuningParams, sequence: Sequence) -> ControllerChain {
    arrange(
        ControllerParts::pi_cglp(params).expect("valid parameters"),
        sequence,
    )
}
