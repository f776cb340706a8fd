use num_complex::Complex64;

use super::poly;
use crate::error::{Error, Result};

/// Rational transfer function in the Laplace variable.
///
/// Coefficients are stored in descending powers of `s` and trimmed on
/// construction so that the leading denominator coefficient is nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalTF {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl RationalTF {
    pub fn new(num: impl Into<Vec<f64>>, den: impl Into<Vec<f64>>) -> Result<Self> {
        let num = num.into();
        let den = den.into();
        if den.iter().all(|&c| c == 0.0) || den.is_empty() {
            return Err(Error::ZeroDenominator);
        }
        if num.is_empty() {
            return Err(Error::invalid("num", "empty coefficient list"));
        }
        if num.iter().chain(den.iter()).any(|c| !c.is_finite()) {
            return Err(Error::invalid("coefficients", "non-finite value"));
        }
        Ok(Self {
            num: poly::trim(&num),
            den: poly::trim(&den),
        })
    }

    /// Static gain `k`.
    pub fn gain(k: f64) -> Self {
        Self {
            num: vec![k],
            den: vec![1.0],
        }
    }

    pub fn identity() -> Self {
        Self::gain(1.0)
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    pub fn num_degree(&self) -> usize {
        poly::degree(&self.num)
    }

    pub fn den_degree(&self) -> usize {
        poly::degree(&self.den)
    }

    pub fn is_proper(&self) -> bool {
        self.num_degree() <= self.den_degree()
    }

    /// `num(s) / den(s)`.
    pub fn eval(&self, s: Complex64) -> Result<Complex64> {
        let d = poly::eval(&self.den, s);
        if d.norm() < 1e-300 {
            return Err(Error::PoleOnGrid { re: s.re, im: s.im });
        }
        Ok(poly::eval(&self.num, s) / d)
    }

    /// Frequency response at `omega` rad/s.
    pub fn freq_response(&self, omega: f64) -> Result<Complex64> {
        self.eval(Complex64::new(0.0, omega))
    }

    /// Series connection `self * other`.
    pub fn series(&self, other: &RationalTF) -> RationalTF {
        RationalTF {
            num: poly::trim(&poly::mul(&self.num, &other.num)),
            den: poly::trim(&poly::mul(&self.den, &other.den)),
        }
    }

    pub fn scale(&self, k: f64) -> RationalTF {
        RationalTF {
            num: poly::trim(&self.num.iter().map(|c| c * k).collect::<Vec<_>>()),
            den: self.den.clone(),
        }
    }

    /// Unity negative-feedback closure `self / (1 + self)`.
    pub fn feedback_unity(&self) -> RationalTF {
        RationalTF {
            num: self.num.clone(),
            den: poly::trim(&poly::add(&self.den, &self.num)),
        }
    }

    /// Sensitivity `1 / (1 + self)`.
    pub fn sensitivity(&self) -> RationalTF {
        RationalTF {
            num: self.den.clone(),
            den: poly::trim(&poly::add(&self.den, &self.num)),
        }
    }
}

/// Free-function form of [`RationalTF::eval`].
pub fn tf_eval(tf: &RationalTF, s: Complex64) -> Result<Complex64> {
    tf.eval(s)
}

/// Free-function form of [`RationalTF::series`].
pub fn series(a: &RationalTF, b: &RationalTF) -> RationalTF {
    a.series(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn plant() -> RationalTF {
        RationalTF::new(vec![1.0], vec![1.077e-4, 0.0049, 4.2218]).unwrap()
    }

    #[test]
    fn plant_dc_gain() {
        let v = plant().eval(Complex64::new(0.0, 0.0)).unwrap();
        // 1 / 4.2218
        assert!((v.re - 0.236_865_791_842_342_13).abs() < 1e-15);
        assert_eq!(v.im, 0.0);
    }

    #[test]
    fn identity_is_one_everywhere() {
        let one = RationalTF::identity();
        for s in [Complex64::new(0.0, 3.0), Complex64::new(-2.0, 7.5)] {
            assert_eq!(one.eval(s).unwrap(), Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn lead_corner_is_one_plus_j() {
        let wd = 2.0 * PI * 25.0;
        let lead = RationalTF::new(vec![1.0 / wd, 1.0], vec![1.0]).unwrap();
        let v = lead.freq_response(wd).unwrap();
        assert!((v - Complex64::new(1.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn pole_on_grid_is_reported() {
        let integ = RationalTF::new(vec![1.0], vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            integ.eval(Complex64::new(0.0, 0.0)),
            Err(Error::PoleOnGrid { .. })
        ));
    }

    #[test]
    fn zero_denominator_rejected() {
        assert_eq!(
            RationalTF::new(vec![1.0], vec![0.0, 0.0]),
            Err(Error::ZeroDenominator)
        );
    }

    #[test]
    fn series_with_unity_is_noop() {
        let p = plant();
        assert_eq!(p.series(&RationalTF::identity()), p);
    }

    #[test]
    fn pi_times_lead_expands() {
        // Kp (s + wi)/s * (s/wd + 1)/(s/wt + 1)
        let (kp, wi, wd, wt) = (2.0, 3.0, 5.0, 7.0);
        let pi = RationalTF::new(vec![kp, kp * wi], vec![1.0, 0.0]).unwrap();
        let lead = RationalTF::new(vec![1.0 / wd, 1.0], vec![1.0 / wt, 1.0]).unwrap();
        let prod = pi.series(&lead);
        let expect_num = [kp / wd, kp + kp * wi / wd, kp * wi];
        let expect_den = [1.0 / wt, 1.0, 0.0];
        for (a, b) in prod.num().iter().zip(expect_num) {
            assert!((a - b).abs() < 1e-14);
        }
        for (a, b) in prod.den().iter().zip(expect_den) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn sensitivity_matches_pointwise() {
        let l = plant().scale(10.0);
        let s = l.sensitivity();
        let w = 37.0;
        let lv = l.freq_response(w).unwrap();
        let sv = s.freq_response(w).unwrap();
        assert!((sv - 1.0 / (1.0 + lv)).norm() < 1e-14);
    }
}
