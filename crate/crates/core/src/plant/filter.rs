use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, RANK_RTOL};

/// User tuning `(Lambda, Gamma, Delta)` and the derived filter matrices
/// `F = I_{p+m} (x) Lambda`, `G = [0; I_m (x) Gamma]`, `L = [I_p (x) Gamma; 0]`.
#[derive(Debug, Clone)]
pub struct FilterDesign {
    pub lambda: DMatrix<f64>,
    pub gamma: DVector<f64>,
    pub delta: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub mu: usize,
    /// Lower coefficients `[lambda_0, ..., lambda_{n-1}]` of the monic
    /// characteristic polynomial of `Lambda`.
    pub lambda_coeffs: Vec<f64>,
}

impl FilterDesign {
    /// Validates the tuning and builds the filter matrices for a plant with
    /// `m` inputs. The output count `p` is taken from `delta`.
    pub fn new(
        lambda: DMatrix<f64>,
        gamma: DVector<f64>,
        delta: DMatrix<f64>,
        m: usize,
    ) -> Result<Self> {
        let n = lambda.nrows();
        if n == 0 || lambda.ncols() != n {
            return Err(Error::Dimension(format!(
                "Lambda must be square and non-empty, got {:?}",
                lambda.shape()
            )));
        }
        if gamma.len() != n {
            return Err(Error::Dimension(format!(
                "Gamma has {} entries, expected {n}",
                gamma.len()
            )));
        }
        let p = delta.nrows();
        if p == 0 || delta.ncols() != p {
            return Err(Error::Dimension(format!(
                "Delta must be square and non-empty, got {:?}",
                delta.shape()
            )));
        }
        if m == 0 {
            return Err(Error::Dimension("m must be at least 1".into()));
        }

        let eig = linalg::eigenvalues(&lambda);
        if let Some(z) = eig.iter().find(|z| z.re >= 0.0) {
            return Err(Error::InvalidFilter(format!(
                "Lambda is not Hurwitz: eigenvalue {z}"
            )));
        }
        let radius = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (i, zi) in eig.iter().enumerate() {
            for zj in &eig[i + 1..] {
                if (zi - zj).norm() <= 1e-8 * radius {
                    return Err(Error::InvalidFilter(format!(
                        "Lambda eigenvalues {zi} and {zj} are not distinct"
                    )));
                }
            }
        }

        let gamma_col = DMatrix::from_column_slice(n, 1, gamma.as_slice());
        let ctrb = linalg::controllability_matrix(&lambda, &gamma_col);
        if linalg::rank(&ctrb, RANK_RTOL) < n {
            return Err(Error::FilterNotControllable);
        }
        validate_delta(&delta)?;

        let mu = n * (p + m);
        let f = DMatrix::<f64>::identity(p + m, p + m).kronecker(&lambda);
        let mut g = DMatrix::zeros(mu, m);
        g.view_mut((n * p, 0), (n * m, m))
            .copy_from(&DMatrix::<f64>::identity(m, m).kronecker(&gamma_col));
        let mut l = DMatrix::zeros(mu, p);
        l.view_mut((0, 0), (n * p, p))
            .copy_from(&DMatrix::<f64>::identity(p, p).kronecker(&gamma_col));
        let lambda_coeffs = linalg::char_poly(&lambda);

        Ok(Self {
            lambda,
            gamma,
            delta,
            f,
            g,
            l,
            n,
            m,
            p,
            mu,
            lambda_coeffs,
        })
    }

    /// Scalar filter `Lambda = -2`, `Gamma = 2` for a single-input single-output plant.
    pub fn scalar_example(delta: f64) -> Result<Self> {
        Self::new(
            DMatrix::from_element(1, 1, -2.0),
            DVector::from_element(1, 2.0),
            DMatrix::from_element(1, 1, delta),
            1,
        )
    }

    /// Second-order filter with characteristic polynomial `s^2 + 7 s + 12`
    /// used for the batch reactor.
    pub fn batch_reactor(delta: DMatrix<f64>) -> Result<Self> {
        Self::new(
            DMatrix::from_row_slice(2, 2, &[0.0, -12.0, 1.0, -7.0]),
            DVector::from_column_slice(&[0.0, 1.0]),
            delta,
            2,
        )
    }

    /// Same tuning with a different noise bound.
    pub fn with_delta(&self, delta: DMatrix<f64>) -> Result<Self> {
        if delta.shape() != (self.p, self.p) {
            return Err(Error::Dimension(format!(
                "Delta must be {0}x{0}, got {1:?}",
                self.p,
                delta.shape()
            )));
        }
        validate_delta(&delta)?;
        Ok(Self {
            delta,
            ..self.clone()
        })
    }

    /// Controllability matrix `R = [Gamma, Lambda Gamma, ..., Lambda^{n-1} Gamma]`.
    pub fn krylov_basis(&self) -> DMatrix<f64> {
        linalg::controllability_matrix(
            &self.lambda,
            &DMatrix::from_column_slice(self.n, 1, self.gamma.as_slice()),
        )
    }

    /// Dimension `n + mu` of the regressor `zeta = [chi; z_hat]`.
    pub fn regressor_dim(&self) -> usize {
        self.n + self.mu
    }
}

fn validate_delta(delta: &DMatrix<f64>) -> Result<()> {
    let scale = 1.0 + delta.amax();
    if (delta - delta.transpose()).amax() > 1e-12 * scale {
        return Err(Error::InvalidFilter("Delta is not symmetric".into()));
    }
    if linalg::lambda_min(delta) < -1e-12 * scale {
        return Err(Error::InvalidFilter("Delta is not positive semidefinite".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_filter_matrices() {
        let f = FilterDesign::scalar_example(0.0).unwrap();
        assert_eq!(f.mu, 2);
        assert_eq!(f.f, DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, -2.0]));
        assert_eq!(f.g, DMatrix::from_column_slice(2, 1, &[0.0, 2.0]));
        assert_eq!(f.l, DMatrix::from_column_slice(2, 1, &[2.0, 0.0]));
        assert_eq!(f.lambda_coeffs, vec![2.0]);
    }

    #[test]
    fn reactor_filter_matrices() {
        let f = FilterDesign::batch_reactor(DMatrix::zeros(2, 2)).unwrap();
        assert_eq!(f.mu, 8);
        assert_eq!(f.f.shape(), (8, 8));
        assert_eq!(f.f.view((2, 2), (2, 2)), f.lambda);
        assert_eq!(f.f.view((0, 2), (2, 2)), DMatrix::<f64>::zeros(2, 2));
        // G stacks Gamma into the input blocks, L into the output blocks.
        assert_eq!(f.g.column(0).as_slice(), &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(f.g.column(1).as_slice(), &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(f.l.column(0).as_slice(), &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(f.l.column(1).as_slice(), &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!((f.lambda_coeffs[0] - 12.0).abs() < 1e-12);
        assert!((f.lambda_coeffs[1] - 7.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_uncontrollable_gamma() {
        let r = FilterDesign::new(
            DMatrix::from_element(1, 1, -2.0),
            DVector::zeros(1),
            DMatrix::zeros(1, 1),
            1,
        );
        assert!(matches!(r, Err(Error::FilterNotControllable)));
        let r = FilterDesign::new(
            DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]),
            DVector::from_column_slice(&[1.0, 0.0]),
            DMatrix::zeros(1, 1),
            1,
        );
        assert!(matches!(r, Err(Error::FilterNotControllable)));
    }

    #[test]
    fn rejects_bad_spectrum() {
        let unstable = FilterDesign::new(
            DMatrix::from_element(1, 1, 0.5),
            DVector::from_element(1, 1.0),
            DMatrix::zeros(1, 1),
            1,
        );
        assert!(matches!(unstable, Err(Error::InvalidFilter(_))));
        let repeated = FilterDesign::new(
            DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]),
            DVector::from_column_slice(&[1.0, 1.0]),
            DMatrix::zeros(1, 1),
            1,
        );
        assert!(matches!(repeated, Err(Error::InvalidFilter(_))));
    }

    #[test]
    fn rejects_indefinite_delta() {
        let r = FilterDesign::scalar_example(-1.0);
        assert!(matches!(r, Err(Error::InvalidFilter(_))));
        let f = FilterDesign::batch_reactor(DMatrix::zeros(2, 2)).unwrap();
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(f.with_delta(asym).is_err());
        assert!(f.with_delta(DMatrix::zeros(1, 1)).is_err());
    }
}
