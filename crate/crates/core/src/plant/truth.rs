use nalgebra::{DMatrix, DVector};

use super::{FilterDesign, StateSpacePlant};
use crate::error::{Error, Result};
use crate::linalg;

/// Harness-side quantities of the non-minimal realization. None of these
/// are available to the data-driven algorithm; they serve as oracles.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// `np x mu` with `Pi (F + L H) = A Pi`, `Pi G = B`.
    pub pi: DMatrix<f64>,
    /// `H = C Pi`.
    pub h: DMatrix<f64>,
    /// Free-response map with `C e^{Lambda~ t} x0 = H0 e^{Lambda t} Gamma`.
    pub h0: DMatrix<f64>,
    /// `[H0 H]`.
    pub theta_star: DMatrix<f64>,
    /// Error-dynamics matrix `A - Pi L C`.
    pub lambda_tilde: DMatrix<f64>,
    /// `Pi L`, the stack of `lambda_i I_p - A_i`.
    pub pi_l: DMatrix<f64>,
    /// Norms of `Pi (F + L H) - A Pi`, `Pi G - B` and `H - C Pi`.
    pub residuals: [f64; 3],
}

impl GroundTruth {
    /// `F + L H`, the state matrix of the non-minimal realization.
    pub fn realization_matrix(&self, filter: &FilterDesign) -> DMatrix<f64> {
        &filter.f + &filter.l * &self.h
    }
}

/// Block companion matrix with subdiagonal identities and last block column
/// `-lambda_i I_p`.
pub fn lambda_tilde(lambda_coeffs: &[f64], p: usize) -> DMatrix<f64> {
    let n = lambda_coeffs.len();
    let mut out = DMatrix::zeros(n * p, n * p);
    for (i, &c) in lambda_coeffs.iter().enumerate() {
        if i + 1 < n {
            out.view_mut(((i + 1) * p, i * p), (p, p))
                .fill_with_identity();
        }
        out.view_mut((i * p, (n - 1) * p), (p, p))
            .fill_diagonal(-c);
    }
    out
}

/// Computes `Pi`, `H`, `H0` and `Theta*` block by block: each `n`-column block
/// `W` solves `W Lambda = Lambda~ W`, `W Gamma = b`, which is
/// `W = [b, Lambda~ b, ..., Lambda~^{n-1} b] R^{-1}` with `R` the Krylov basis
/// of `(Lambda, Gamma)`. Seeds are the columns of `Pi L` for the output blocks
/// and the columns of `B` for the input blocks.
pub fn compute_ground_truth(
    plant: &StateSpacePlant,
    filter: &FilterDesign,
    x0: &DVector<f64>,
) -> Result<GroundTruth> {
    let (n, p, m) = (plant.n, plant.p, plant.m);
    if filter.n != n || filter.p != p || filter.m != m {
        return Err(Error::Dimension(format!(
            "filter (n={}, p={}, m={}) does not match plant (n={n}, p={p}, m={m})",
            filter.n, filter.p, filter.m
        )));
    }
    let np = n * p;
    if x0.len() != np {
        return Err(Error::Dimension(format!(
            "x0 has {} entries, expected {np}",
            x0.len()
        )));
    }

    let lt = lambda_tilde(&filter.lambda_coeffs, p);
    let mut pi_l = DMatrix::zeros(np, p);
    for i in 0..n {
        let mut block = -plant.a_coeff(i);
        for k in 0..p {
            block[(k, k)] += filter.lambda_coeffs[i];
        }
        pi_l.view_mut((i * p, 0), (p, p)).copy_from(&block);
    }

    let r = filter.krylov_basis();
    if linalg::rank(&r, linalg::RANK_RTOL) < n {
        return Err(Error::FilterNotControllable);
    }
    // W = K R^{-1}  <=>  R^T W^T = K^T
    let rt_lu = r.transpose().lu();
    let krylov_block = |seed: DVector<f64>| -> DMatrix<f64> {
        let mut k = DMatrix::zeros(np, n);
        let mut col = seed;
        for j in 0..n {
            k.set_column(j, &col);
            col = &lt * col;
        }
        rt_lu
            .solve(&k.transpose())
            .expect("R is invertible")
            .transpose()
    };

    let mut pi = DMatrix::zeros(np, filter.mu);
    for j in 0..p {
        pi.view_mut((0, j * n), (np, n))
            .copy_from(&krylov_block(pi_l.column(j).into_owned()));
    }
    for k in 0..m {
        pi.view_mut((0, (p + k) * n), (np, n))
            .copy_from(&krylov_block(plant.b.column(k).into_owned()));
    }
    let h = &plant.c * &pi;
    let v = krylov_block(x0.clone());
    let h0 = &plant.c * v;

    let mut theta_star = DMatrix::zeros(p, n + filter.mu);
    theta_star.view_mut((0, 0), (p, n)).copy_from(&h0);
    theta_star.view_mut((0, n), (p, filter.mu)).copy_from(&h);

    let realization = &filter.f + &filter.l * &h;
    let residuals = [
        linalg::spectral_norm(&(&pi * realization - &plant.a * &pi)),
        linalg::spectral_norm(&(&pi * &filter.g - &plant.b)),
        linalg::spectral_norm(&(&h - &plant.c * &pi)),
    ];
    let tolerance = 1e-8 * (1.0 + linalg::spectral_norm(&plant.a));
    let names = ["Pi (F + L H) = A Pi", "Pi G = B", "H = C Pi"];
    for (res, name) in residuals.iter().zip(names) {
        if !(*res < tolerance) {
            return Err(Error::Residual {
                equation: name,
                residual: *res,
                tolerance,
            });
        }
    }

    Ok(GroundTruth {
        pi,
        h,
        h0,
        theta_star,
        lambda_tilde: lt,
        pi_l,
        residuals,
    })
}
