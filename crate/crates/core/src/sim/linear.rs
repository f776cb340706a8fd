use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;

use crate::controllers::ControllerChain;
use crate::error::{Error, Result};
use crate::lti::{discretize, tf_to_ss, DiscreteStateSpace, Discretization, RationalTF};

/// The sampled loop with the reset element replaced by its base system,
/// assembled as one state-space model with input `r` and outputs `e`, `u`, `y`.
#[derive(Debug, Clone)]
pub struct LinearClosedLoop {
    pub phi: DMatrix<f64>,
    pub gamma: DVector<f64>,
    pub e_row: RowDVector<f64>,
    pub e_r: f64,
    pub u_row: RowDVector<f64>,
    pub u_r: f64,
    pub y_row: RowDVector<f64>,
    pub ts: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearTrace {
    pub e: Vec<f64>,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
}

impl LinearClosedLoop {
    pub fn new(chain: &ControllerChain, plant: &RationalTF, fs: f64) -> Result<Self> {
        let ts = 1.0 / fs;
        let tustin = |tf: &RationalTF| discretize(&tf_to_ss(tf)?, ts, Discretization::Tustin);
        let c1 = tustin(&chain.c_l1)?;
        let c2 = tustin(&chain.c_l2)?;
        let rb = chain.reset().discretize(ts)?.base_filter();
        let p = discretize(&tf_to_ss(plant)?, ts, Discretization::Zoh)?;
        if p.d != 0.0 {
            return Err(Error::invalid("plant", "must be strictly proper"));
        }
        let blocks: [&DiscreteStateSpace; 4] = [&c1, &rb, &c2, &p];
        let offs: Vec<usize> = blocks
            .iter()
            .scan(0, |acc, b| {
                let o = *acc;
                *acc += b.order();
                Some(o)
            })
            .collect();
        let total: usize = blocks.iter().map(|b| b.order()).sum();

        // signal = row * X + scalar * r
        let embed = |blk: usize| {
            let mut row = RowDVector::<f64>::zeros(total);
            row.columns_mut(offs[blk], blocks[blk].order())
                .copy_from(&blocks[blk].c);
            row
        };
        let y_row = embed(3);
        let e_row = -&y_row;
        let e_r = 1.0;
        let v_row = embed(0) + &e_row * c1.d;
        let v_r = c1.d * e_r;
        let w_row = embed(1) + &v_row * rb.d;
        let w_r = rb.d * v_r;
        let u_row = embed(2) + &w_row * c2.d;
        let u_r = c2.d * w_r;

        let mut phi = DMatrix::<f64>::zeros(total, total);
        let mut gamma = DVector::<f64>::zeros(total);
        let drivers = [(&e_row, e_r), (&v_row, v_r), (&w_row, w_r), (&u_row, u_r)];
        for (i, blk) in blocks.iter().enumerate() {
            let (o, n) = (offs[i], blk.order());
            phi.view_mut((o, o), (n, n)).copy_from(&blk.a);
            let (row, scalar) = drivers[i];
            let coupling = &blk.b * row;
            let mut view = phi.view_mut((o, 0), (n, total));
            view += coupling;
            gamma.rows_mut(o, n).copy_from(&(&blk.b * scalar));
        }
        Ok(Self {
            phi,
            gamma,
            e_row,
            e_r,
            u_row,
            u_r,
            y_row,
            ts,
        })
    }

    pub fn run(&self, r: &[f64]) -> LinearTrace {
        let mut x = DVector::<f64>::zeros(self.phi.nrows());
        let mut out = LinearTrace {
            e: Vec::with_capacity(r.len()),
            u: Vec::with_capacity(r.len()),
            y: Vec::with_capacity(r.len()),
        };
        for &rk in r {
            out.y.push(self.y_row.dot(&x.transpose()));
            out.e.push(self.e_row.dot(&x.transpose()) + self.e_r * rk);
            out.u.push(self.u_row.dot(&x.transpose()) + self.u_r * rk);
            x = &self.phi * &x + &self.gamma * rk;
        }
        out
    }

    fn response(&self, omega: f64, row: &RowDVector<f64>, direct: f64) -> Result<Complex64> {
        let n = self.phi.nrows();
        let z = Complex64::from_polar(1.0, omega * self.ts);
        let m = DMatrix::<Complex64>::identity(n, n) * z - self.phi.map(|v| Complex64::new(v, 0.0));
        let sol = m
            .lu()
            .solve(&self.gamma.map(|v| Complex64::new(v, 0.0)))
            .ok_or(Error::Singular {
                context: "sampled closed loop",
                omega,
            })?;
        Ok(row
            .iter()
            .zip(sol.iter())
            .map(|(&c, &s)| s * c)
            .sum::<Complex64>()
            + direct)
    }

    /// Sampled `r -> e` response at `omega` rad/s.
    pub fn sensitivity(&self, omega: f64) -> Result<Complex64> {
        self.response(omega, &self.e_row, self.e_r)
    }

    /// Sampled `r -> u` response at `omega` rad/s.
    pub fn control_sensitivity(&self, omega: f64) -> Result<Complex64> {
        self.response(omega, &self.u_row, self.u_r)
    }

    /// Spectral radius bound check: all closed-loop poles inside the unit circle.
    pub fn is_stable(&self) -> bool {
        self.phi
            .clone()
            .complex_eigenvalues()
            .iter()
            .all(|l| l.norm() < 1.0)
    }
}
