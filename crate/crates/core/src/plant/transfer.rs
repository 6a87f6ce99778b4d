use nalgebra::DMatrix;

use super::{FilterDesign, PlantCoefficients};
use crate::error::{Error, Result};
use crate::linalg::{self, Complex64};

/// Rational matrix `N(s) / d(s)` with a matrix polynomial numerator and a
/// monic scalar denominator.
#[derive(Debug, Clone)]
pub struct RationalMatrix {
    /// Ascending numerator coefficients `N_0, N_1, ...`, all of one shape.
    pub numerator: Vec<DMatrix<f64>>,
    /// Lower coefficients `[d_0, ..., d_{k-1}]` of the monic denominator.
    pub denominator: Vec<f64>,
}

impl RationalMatrix {
    pub fn new(numerator: Vec<DMatrix<f64>>, denominator: Vec<f64>) -> Result<Self> {
        let Some(first) = numerator.first() else {
            return Err(Error::Dimension("numerator has no coefficients".into()));
        };
        let shape = first.shape();
        if numerator.iter().any(|c| c.shape() != shape) {
            return Err(Error::Dimension("numerator coefficients differ in shape".into()));
        }
        Ok(Self {
            numerator,
            denominator,
        })
    }

    /// Static gain `c`.
    pub fn constant(c: DMatrix<f64>) -> Self {
        Self {
            numerator: vec![c],
            denominator: Vec::new(),
        }
    }

    /// Process-noise channel `N_w(s) / D_lambda(s)` seen through the observer error.
    pub fn process_noise(coeffs: &PlantCoefficients, filter: &FilterDesign) -> Self {
        Self {
            numerator: coeffs.e.clone(),
            denominator: filter.lambda_coeffs.clone(),
        }
    }

    /// Measurement-noise channel `D(s) / D_lambda(s)`. Depends on the unknown `A_i`.
    pub fn measurement_noise(coeffs: &PlantCoefficients, filter: &FilterDesign) -> Self {
        let mut numerator = coeffs.a.clone();
        numerator.push(DMatrix::identity(coeffs.p, coeffs.p));
        Self {
            numerator,
            denominator: filter.lambda_coeffs.clone(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.numerator[0].shape()
    }

    pub fn poles(&self) -> Vec<Complex64> {
        linalg::monic_roots(&self.denominator)
    }

    pub fn eval(&self, s: Complex64) -> Result<DMatrix<Complex64>> {
        let den = linalg::eval_monic(&self.denominator, s);
        let scale = 1.0 + self.denominator.iter().map(|c| c.abs()).fold(0.0, f64::max);
        if den.norm() <= 1e-14 * scale * (1.0 + s.norm()).powi(self.denominator.len() as i32) {
            return Err(Error::Pole { re: s.re, im: s.im });
        }
        let (r, c) = self.shape();
        let mut num = DMatrix::<Complex64>::zeros(r, c);
        for coeff in self.numerator.iter().rev() {
            num = num * s + coeff.map(|v| Complex64::new(v, 0.0));
        }
        Ok(num / den)
    }

    /// Largest singular value at `s = i omega`.
    pub fn gain_at(&self, omega: f64) -> Result<f64> {
        let g = self.eval(Complex64::new(0.0, omega))?;
        if g.is_empty() {
            return Ok(0.0);
        }
        Ok(g.singular_values().iter().copied().fold(0.0, f64::max))
    }
}

/// Evaluates the rational matrix at a complex point.
pub fn transfer_gain_at(tf: &RationalMatrix, s: Complex64) -> Result<DMatrix<Complex64>> {
    tf.eval(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{build_state_space, compute_ground_truth};
    use nalgebra::DVector;

    fn reactor() -> (PlantCoefficients, FilterDesign) {
        (
            PlantCoefficients::batch_reactor(),
            FilterDesign::batch_reactor(DMatrix::zeros(2, 2)).unwrap(),
        )
    }

    #[test]
    fn scalar_dc_gain() {
        let coeffs = PlantCoefficients::scalar_example();
        let filter = FilterDesign::scalar_example(0.0).unwrap();
        let gw = RationalMatrix::process_noise(&coeffs, &filter);
        let g0 = transfer_gain_at(&gw, Complex64::new(0.0, 0.0)).unwrap();
        assert!((g0[(0, 0)] - Complex64::new(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn reactor_dc_gain() {
        let (coeffs, filter) = reactor();
        let gw = RationalMatrix::process_noise(&coeffs, &filter);
        let g0 = gw.eval(Complex64::new(0.0, 0.0)).unwrap();
        let expected = DMatrix::<Complex64>::identity(2, 2) * Complex64::new(1.0 / 12.0, 0.0);
        assert!((g0 - expected).camax() < 1e-14);
    }

    #[test]
    fn measurement_channel_is_biproper() {
        let coeffs = PlantCoefficients::scalar_example();
        let filter = FilterDesign::scalar_example(0.0).unwrap();
        let gv = RationalMatrix::measurement_noise(&coeffs, &filter);
        // (s - 1) / (s + 2)
        let far = gv.gain_at(1e8).unwrap();
        assert!((far - 1.0).abs() < 1e-12);
        assert!((gv.gain_at(0.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pole_evaluation_is_an_error() {
        let coeffs = PlantCoefficients::scalar_example();
        let filter = FilterDesign::scalar_example(0.0).unwrap();
        let gw = RationalMatrix::process_noise(&coeffs, &filter);
        assert!(matches!(
            gw.eval(Complex64::new(-2.0, 0.0)),
            Err(Error::Pole { .. })
        ));
    }

    #[test]
    fn process_channel_matches_error_dynamics() {
        // C (sI - Lambda~)^{-1} E equals N_w(s) / D_lambda(s).
        let (coeffs, filter) = reactor();
        let plant = build_state_space(&coeffs);
        let gt = compute_ground_truth(&plant, &filter, &DVector::zeros(4)).unwrap();
        let gw = RationalMatrix::process_noise(&coeffs, &filter);
        for omega in [0.0, 0.3, 2.0, 17.0] {
            let s = Complex64::new(0.1, omega);
            let lt = gt.lambda_tilde.map(|v| Complex64::new(v, 0.0));
            let resolvent = (DMatrix::<Complex64>::identity(4, 4) * s - lt)
                .try_inverse()
                .unwrap();
            let direct = plant.c.map(|v| Complex64::new(v, 0.0))
                * resolvent
                * plant.e.map(|v| Complex64::new(v, 0.0));
            assert!((direct - gw.eval(s).unwrap()).camax() < 1e-12);
        }
    }
}
