//! Linear time-invariant building blocks.

mod expm;
mod filter;
pub mod poly;
mod ss;
mod tf;

pub use expm::mat_exp;
pub use filter::DiscreteFilter;
pub use ss::{discretize, tf_to_ss, DiscreteStateSpace, Discretization, StateSpace};
pub use tf::{series, tf_eval, RationalTF};

/// `n` log-spaced points from `lo` to `hi` inclusive; the endpoints are exact.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let ratio = (hi / lo).ln();
            let mut v: Vec<f64> = (0..n)
                .map(|i| lo * (ratio * i as f64 / (n - 1) as f64).exp())
                .collect();
            v[0] = lo;
            v[n - 1] = hi;
            v
        }
    }
}
