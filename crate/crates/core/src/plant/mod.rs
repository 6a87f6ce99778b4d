//! Plant realizations, filter design, and the ground-truth quantities used
//! as verification oracles.
//!
//! The plant is described by the polynomial matrices
//! `D(s) = I s^n + A_{n-1} s^{n-1} + ... + A_0`, `N(s) = sum B_i s^i` and
//! `N_w(s) = sum E_i s^i`, realized in block companion form with state
//! dimension `n p` and output map `C = [0 ... 0 I_p]`.

mod filter;
mod transfer;
mod truth;

pub use filter::FilterDesign;
pub use transfer::{transfer_gain_at, RationalMatrix};
pub use truth::{compute_ground_truth, lambda_tilde, GroundTruth};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, RANK_RTOL};

/// Coefficients `A_i`, `B_i`, `E_i` of the input-output model.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantCoefficients {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub q: usize,
    pub a: Vec<DMatrix<f64>>,
    pub b: Vec<DMatrix<f64>>,
    pub e: Vec<DMatrix<f64>>,
}

impl PlantCoefficients {
    /// Validates and wraps the coefficient lists. `e` may hold `p x 0`
    /// matrices, meaning there is no process-noise channel.
    pub fn new(a: Vec<DMatrix<f64>>, b: Vec<DMatrix<f64>>, e: Vec<DMatrix<f64>>) -> Result<Self> {
        let n = a.len();
        if n == 0 {
            return Err(Error::Dimension("plant order n must be at least 1".into()));
        }
        if b.len() != n || e.len() != n {
            return Err(Error::Dimension(format!(
                "expected {n} coefficients for A, B and E, got {}, {}, {}",
                a.len(),
                b.len(),
                e.len()
            )));
        }
        let p = a[0].nrows();
        let m = b[0].ncols();
        let q = e[0].ncols();
        if p == 0 || m == 0 {
            return Err(Error::Dimension("p and m must be at least 1".into()));
        }
        for (i, ((ai, bi), ei)) in a.iter().zip(&b).zip(&e).enumerate() {
            if ai.shape() != (p, p) || bi.shape() != (p, m) || ei.shape() != (p, q) {
                return Err(Error::Dimension(format!(
                    "coefficient {i}: A {:?}, B {:?}, E {:?} (expected ({p},{p}), ({p},{m}), ({p},{q}))",
                    ai.shape(),
                    bi.shape(),
                    ei.shape()
                )));
            }
        }
        Ok(Self { n, m, p, q, a, b, e })
    }

    /// The unstable scalar plant `x' = x + u + w`, `y = x + v`.
    pub fn scalar_example() -> Self {
        let one = || DMatrix::from_element(1, 1, 1.0);
        Self::new(vec![DMatrix::from_element(1, 1, -1.0)], vec![one()], vec![one()])
            .expect("valid scalar plant")
    }

    /// Two-input two-output unstable batch reactor, process noise through `E_0 = I_2`.
    pub fn batch_reactor() -> Self {
        let a0 = DMatrix::from_row_slice(2, 2, &[-20.97, -48.63, 2.643, 5.867]);
        let a1 = DMatrix::from_row_slice(2, 2, &[5.297, -10.47, -0.2764, 6.371]);
        let b0 = DMatrix::from_row_slice(2, 2, &[-59.44, -12.63, 12.59, 0.8696]);
        let b1 = DMatrix::from_row_slice(2, 2, &[0.0, -3.146, 5.679, 0.0]);
        Self::new(
            vec![a0, a1],
            vec![b0, b1],
            vec![DMatrix::identity(2, 2), DMatrix::zeros(2, 2)],
        )
        .expect("valid reactor plant")
    }

    pub fn state_dim(&self) -> usize {
        self.n * self.p
    }
}

/// Block companion realization of a [`PlantCoefficients`] model.
#[derive(Debug, Clone)]
pub struct StateSpacePlant {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub q: usize,
    /// Numerical rank of the controllability matrix of `(A, B)`.
    pub controllability_rank: usize,
}

impl StateSpacePlant {
    pub fn state_dim(&self) -> usize {
        self.n * self.p
    }

    /// Whether `(A, B)` passed the controllability rank test.
    pub fn is_controllable(&self) -> bool {
        self.controllability_rank == self.state_dim()
    }

    /// Numerical rank of the observability matrix of `(C, A)`.
    pub fn observability_rank(&self) -> usize {
        let obs = linalg::controllability_matrix(&self.a.transpose(), &self.c.transpose());
        linalg::rank(&obs, RANK_RTOL)
    }

    /// Coefficient `A_i`, read back from the last block column.
    pub fn a_coeff(&self, i: usize) -> DMatrix<f64> {
        let (n, p) = (self.n, self.p);
        -self.a.view((i * p, (n - 1) * p), (p, p)).into_owned()
    }
}

/// Builds the block companion realization. A failed controllability test is
/// logged and recorded in the result, not raised, since synthesis may still
/// be attempted.
pub fn build_state_space(coeffs: &PlantCoefficients) -> StateSpacePlant {
    let PlantCoefficients { n, m, p, q, .. } = *coeffs;
    let np = n * p;
    let mut a = DMatrix::zeros(np, np);
    let mut b = DMatrix::zeros(np, m);
    let mut e = DMatrix::zeros(np, q);
    for i in 0..n {
        if i + 1 < n {
            a.view_mut(((i + 1) * p, i * p), (p, p))
                .copy_from(&DMatrix::identity(p, p));
        }
        a.view_mut((i * p, (n - 1) * p), (p, p))
            .copy_from(&(-&coeffs.a[i]));
        b.view_mut((i * p, 0), (p, m)).copy_from(&coeffs.b[i]);
        e.view_mut((i * p, 0), (p, q)).copy_from(&coeffs.e[i]);
    }
    let mut c = DMatrix::zeros(p, np);
    c.view_mut((0, (n - 1) * p), (p, p))
        .copy_from(&DMatrix::identity(p, p));

    let ctrb = linalg::controllability_matrix(&a, &b);
    let controllability_rank = linalg::rank(&ctrb, RANK_RTOL);
    if controllability_rank < np {
        log::warn!(
            "(A, B) is not controllable: rank {controllability_rank} < {np}; \
             the realization lemma does not apply"
        );
    }
    StateSpacePlant {
        a,
        b,
        c,
        e,
        n,
        m,
        p,
        q,
        controllability_rank,
    }
}

/// Observer canonical form `A_o = Phi A Phi^T`, `C_o = C Phi^T` together with
/// the perfect-shuffle permutation `Phi = [I_p (x) e_1, ..., I_p (x) e_n]`.
#[derive(Debug, Clone)]
pub struct ObserverForm {
    pub a_o: DMatrix<f64>,
    pub c_o: DMatrix<f64>,
    pub phi: DMatrix<f64>,
}

pub fn observer_canonical_form(plant: &StateSpacePlant) -> ObserverForm {
    let (n, p) = (plant.n, plant.p);
    let np = n * p;
    let mut phi = DMatrix::zeros(np, np);
    // Block column i is I_p (x) e_{i+1}: its j-th column selects row j*n + i.
    for i in 0..n {
        for j in 0..p {
            phi[(j * n + i, i * p + j)] = 1.0;
        }
    }
    let a_o = &phi * &plant.a * phi.transpose();
    let c_o = &plant.c * phi.transpose();
    ObserverForm { a_o, c_o, phi }
}
