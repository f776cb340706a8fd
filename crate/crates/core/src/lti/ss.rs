use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;

use super::expm::mat_exp;
use super::tf::RationalTF;
use crate::error::{Error, Result};

/// SISO continuous-time realization `(A, B, C, D)`.
///
/// A zero-state system (`n = 0`) is a pure gain `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: RowDVector<f64>,
    pub d: f64,
}

/// SISO discrete-time realization with sample period `ts` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteStateSpace {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: RowDVector<f64>,
    pub d: f64,
    pub ts: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Discretization {
    Tustin,
    Zoh,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: RowDVector<f64>, d: f64) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.len() != n || c.len() != n {
            return Err(Error::invalid(
                "state space",
                format!(
                    "inconsistent dimensions A {}x{}, B {}, C {}",
                    a.nrows(),
                    a.ncols(),
                    b.len(),
                    c.len()
                ),
            ));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn gain(d: f64) -> Self {
        Self {
            a: DMatrix::zeros(0, 0),
            b: DVector::zeros(0),
            c: RowDVector::zeros(0),
            d,
        }
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// `C (sI - A)^{-1} B + D` at complex `s`.
    pub fn eval(&self, s: Complex64) -> Result<Complex64> {
        let n = self.order();
        if n == 0 {
            return Ok(Complex64::new(self.d, 0.0));
        }
        let m = DMatrix::<Complex64>::identity(n, n) * s - self.a.map(|x| Complex64::new(x, 0.0));
        let rhs = self.b.map(|x| Complex64::new(x, 0.0));
        let sol = m.lu().solve(&rhs).ok_or(Error::Singular {
            context: "state-space frequency response",
            omega: s.im,
        })?;
        let y: Complex64 = self.c.iter().zip(sol.iter()).map(|(&c, &x)| x * c).sum();
        Ok(y + self.d)
    }

    pub fn freq_response(&self, omega: f64) -> Result<Complex64> {
        self.eval(Complex64::new(0.0, omega))
    }
}

impl DiscreteStateSpace {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// `C (zI - A)^{-1} B + D` at `z = exp(j omega Ts)`.
    pub fn freq_response(&self, omega: f64) -> Result<Complex64> {
        let z = Complex64::from_polar(1.0, omega * self.ts);
        let n = self.order();
        if n == 0 {
            return Ok(Complex64::new(self.d, 0.0));
        }
        let m = DMatrix::<Complex64>::identity(n, n) * z - self.a.map(|x| Complex64::new(x, 0.0));
        let rhs = self.b.map(|x| Complex64::new(x, 0.0));
        let sol = m.lu().solve(&rhs).ok_or(Error::Singular {
            context: "discrete frequency response",
            omega,
        })?;
        let y: Complex64 = self.c.iter().zip(sol.iter()).map(|(&c, &x)| x * c).sum();
        Ok(y + self.d)
    }
}

/// Controllable canonical realization of a proper transfer function.
pub fn tf_to_ss(tf: &RationalTF) -> Result<StateSpace> {
    if !tf.is_proper() {
        return Err(Error::Improper {
            num: tf.num_degree(),
            den: tf.den_degree(),
        });
    }
    let lead = tf.den()[0];
    let den: Vec<f64> = tf.den().iter().map(|c| c / lead).collect();
    let n = den.len() - 1;
    // numerator padded to the denominator length
    let mut num = vec![0.0; n + 1 - tf.num().len()];
    num.extend(tf.num().iter().map(|c| c / lead));

    let d = num[0];
    if n == 0 {
        return Ok(StateSpace::gain(d));
    }
    // s^n + a1 s^{n-1} + ... + an ; residual numerator c_i = b_i - d a_i
    let mut a = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        a[(0, j)] = -den[j + 1];
    }
    for i in 1..n {
        a[(i, i - 1)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[0] = 1.0;
    let c = RowDVector::from_iterator(n, (1..=n).map(|i| num[i] - d * den[i]));
    StateSpace::new(a, b, c, d)
}

/// Discretize with sample period `ts` seconds.
pub fn discretize(ss: &StateSpace, ts: f64, method: Discretization) -> Result<DiscreteStateSpace> {
    if !(ts > 0.0) || !ts.is_finite() {
        return Err(Error::invalid("ts", format!("must be positive, got {ts}")));
    }
    let n = ss.order();
    if n == 0 {
        return Ok(DiscreteStateSpace {
            a: DMatrix::zeros(0, 0),
            b: DVector::zeros(0),
            c: RowDVector::zeros(0),
            d: ss.d,
            ts,
        });
    }
    match method {
        Discretization::Zoh => {
            // exp([[A, B], [0, 0]] Ts) = [[Ad, Bd], [0, 1]]
            let mut m = DMatrix::<f64>::zeros(n + 1, n + 1);
            m.view_mut((0, 0), (n, n)).copy_from(&(&ss.a * ts));
            m.view_mut((0, n), (n, 1)).copy_from(&(&ss.b * ts));
            let e = mat_exp(&m);
            Ok(DiscreteStateSpace {
                a: e.view((0, 0), (n, n)).into_owned(),
                b: e.view((0, n), (n, 1)).column(0).into_owned(),
                c: ss.c.clone(),
                d: ss.d,
                ts,
            })
        }
        Discretization::Tustin => {
            let ident = DMatrix::<f64>::identity(n, n);
            let m = &ident - &ss.a * (ts / 2.0);
            let scale = m.norm().powi(n as i32).max(1.0);
            let lu = m.lu();
            if lu.determinant().abs() <= 1e-12 * scale {
                return Err(Error::BilinearSingular(2.0 / ts));
            }
            let inv = lu.try_inverse().ok_or(Error::BilinearSingular(2.0 / ts))?;
            let ad = &inv * (&ident + &ss.a * (ts / 2.0));
            let bd = &inv * &ss.b * ts;
            let cd = &ss.c * &inv;
            let dd = ss.d + (&cd * &ss.b)[(0, 0)] * ts / 2.0;
            Ok(DiscreteStateSpace {
                a: ad,
                b: bd,
                c: cd,
                d: dd,
                ts,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn plant() -> RationalTF {
        RationalTF::new(vec![1.0], vec![1.077e-4, 0.0049, 4.2218]).unwrap()
    }

    fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
            .collect()
    }

    fn assert_realizes(tf: &RationalTF) {
        let ss = tf_to_ss(tf).unwrap();
        for w in log_grid(1e-2, 1e5, 120) {
            let a = tf.freq_response(w).unwrap();
            let b = ss.freq_response(w).unwrap();
            assert!((a - b).norm() <= 1e-9 * a.norm(), "w={w}: {a} vs {b}");
        }
    }

    #[test]
    fn fore_base_is_one_state() {
        let wr = 2.0 * PI * 15.43;
        let tf = RationalTF::new(vec![1.0], vec![1.0 / wr, 1.0]).unwrap();
        let ss = tf_to_ss(&tf).unwrap();
        assert_eq!(ss.order(), 1);
        assert!((ss.a[(0, 0)] + wr).abs() < 1e-12 * wr);
        assert_realizes(&tf);
    }

    #[test]
    fn constant_gain_has_no_state() {
        let ss = tf_to_ss(&RationalTF::gain(3.5)).unwrap();
        assert_eq!(ss.order(), 0);
        assert_eq!(ss.d, 3.5);
    }

    #[test]
    fn plant_two_states() {
        let ss = tf_to_ss(&plant()).unwrap();
        assert_eq!(ss.order(), 2);
        assert_realizes(&plant());
    }

    #[test]
    fn biproper_with_feedthrough() {
        let lead = RationalTF::new(vec![1.0 / 157.0, 1.0], vec![1.0 / 3770.0, 1.0]).unwrap();
        assert_realizes(&lead);
        let pi = RationalTF::new(vec![10.0, 628.0], vec![1.0, 0.0]).unwrap();
        assert_realizes(&pi.series(&lead));
    }

    #[test]
    fn improper_rejected() {
        let d = RationalTF::new(vec![1.0, 0.0], vec![1.0]).unwrap();
        assert!(matches!(
            tf_to_ss(&d),
            Err(Error::Improper { num: 1, den: 0 })
        ));
    }

    #[test]
    fn zoh_integrator() {
        let integ = tf_to_ss(&RationalTF::new(vec![1.0], vec![1.0, 0.0]).unwrap()).unwrap();
        let ts = 5e-5;
        let dz = discretize(&integ, ts, Discretization::Zoh).unwrap();
        assert!((dz.a[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((dz.b[0] * dz.c[0] - ts).abs() < 1e-18);
    }

    #[test]
    fn zoh_fore_is_scalar_exponential() {
        let wr = 2.0 * PI * 15.43;
        let ts = 5e-5;
        let ss = tf_to_ss(&RationalTF::new(vec![1.0], vec![1.0 / wr, 1.0]).unwrap()).unwrap();
        let dz = discretize(&ss, ts, Discretization::Zoh).unwrap();
        assert!((dz.a[(0, 0)] - (-wr * ts).exp()).abs() < 1e-15);
    }

    #[test]
    fn tustin_plant_matches_at_100hz() {
        let ts = 5e-5;
        let ss = tf_to_ss(&plant()).unwrap();
        let dz = discretize(&ss, ts, Discretization::Tustin).unwrap();
        let w = 2.0 * PI * 100.0;
        let c = plant().freq_response(w).unwrap();
        let d = dz.freq_response(w).unwrap();
        assert!(((d.norm() - c.norm()) / c.norm()).abs() < 1e-3);
    }

    #[test]
    fn tustin_preserves_dc_gain() {
        let lead = RationalTF::new(vec![1.0 / 157.0, 1.0], vec![1.0 / 3770.0, 1.0]).unwrap();
        for tf in [plant(), lead] {
            let dz = discretize(&tf_to_ss(&tf).unwrap(), 5e-5, Discretization::Tustin).unwrap();
            let dc_c = tf.freq_response(0.0).unwrap().re;
            let dc_d = dz.freq_response(0.0).unwrap().re;
            assert!((dc_c - dc_d).abs() <= 1e-12 * dc_c.abs());
        }
    }

    #[test]
    fn tustin_rejects_bilinear_pole() {
        let ts = 1e-3;
        // pole at s = 2/Ts
        let tf = RationalTF::new(vec![1.0], vec![1.0, -2.0 / ts]).unwrap();
        let ss = tf_to_ss(&tf).unwrap();
        assert!(matches!(
            discretize(&ss, ts, Discretization::Tustin),
            Err(Error::BilinearSingular(_))
        ));
    }

    #[test]
    fn discretization_accuracy_below_tenth_of_fs() {
        let ts = 5e-5;
        let lead = RationalTF::new(vec![1.0 / 157.0, 1.0], vec![1.0 / 3770.0, 1.0]).unwrap();
        for tf in [plant(), lead] {
            let ss = tf_to_ss(&tf).unwrap();
            for method in [Discretization::Tustin, Discretization::Zoh] {
                // feedthrough skips the ZOH half-sample lag, so only strictly proper
                // systems follow the continuous phase closely
                if method == Discretization::Zoh && tf.num_degree() == tf.den_degree() {
                    continue;
                }
                let dz = discretize(&ss, ts, method).unwrap();
                // Tustin warping and the ZOH half-sample delay bound the usable band
                let wmax = match method {
                    Discretization::Tustin => 2.0 * PI / (40.0 * ts),
                    Discretization::Zoh => 2.0 * PI / (200.0 * ts),
                };
                for w in log_grid(1.0, wmax, 60) {
                    let c = tf.freq_response(w).unwrap();
                    let d = dz.freq_response(w).unwrap();
                    let mag = (d.norm() / c.norm() - 1.0).abs();
                    let ph = (d / c).arg().to_degrees().abs();
                    assert!(
                        mag < 0.01 && ph < 1.0,
                        "{method:?} w={w}: mag {mag} ph {ph}"
                    );
                }
            }
        }
    }
}
