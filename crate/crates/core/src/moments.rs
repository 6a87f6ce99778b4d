//! Moment matrices of the filtered data and the consistency ellipsoid.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg;
use crate::sim::{FilteredData, Trajectory};

/// Composite trapezoid approximation of `int s(t) s(t)^T dt` where the rows of
/// `samples` are `s(t_k)` on a uniform grid of step `h`.
pub fn trapezoid_gram(samples: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let rows = samples.nrows();
    let mut weights = vec![h; rows];
    if rows > 0 {
        weights[0] = 0.5 * h;
        weights[rows - 1] = 0.5 * h;
    }
    if rows == 1 {
        weights[0] = 0.0;
    }
    let mut scaled = samples.clone();
    for (k, w) in weights.iter().enumerate() {
        scaled.row_mut(k).scale_mut(w.sqrt());
    }
    linalg::symmetrize(&scaled.tr_mul(&scaled))
}

/// `Y = int y y^T`, `X = -int zeta y^T`, `Z = int zeta zeta^T` and the bound `Delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMoments {
    pub y: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub horizon: f64,
    pub delta: DMatrix<f64>,
}

impl DataMoments {
    pub fn new(
        y: DMatrix<f64>,
        x: DMatrix<f64>,
        z: DMatrix<f64>,
        horizon: f64,
        delta: DMatrix<f64>,
    ) -> Result<Self> {
        let p = y.nrows();
        let r = z.nrows();
        if y.ncols() != p || z.ncols() != r || x.shape() != (r, p) || delta.shape() != (p, p) {
            return Err(Error::Dimension(format!(
                "inconsistent moment blocks: Y {:?}, X {:?}, Z {:?}, Delta {:?}",
                y.shape(),
                x.shape(),
                z.shape(),
                delta.shape()
            )));
        }
        Ok(Self {
            y,
            x,
            z,
            horizon,
            delta,
        })
    }

    pub fn outputs(&self) -> usize {
        self.y.nrows()
    }

    pub fn regressor_dim(&self) -> usize {
        self.z.nrows()
    }

    /// The block matrix `[[Y, X^T], [X, Z]]`.
    pub fn block(&self) -> DMatrix<f64> {
        let (p, r) = (self.outputs(), self.regressor_dim());
        let mut out = DMatrix::zeros(p + r, p + r);
        out.view_mut((0, 0), (p, p)).copy_from(&self.y);
        out.view_mut((0, p), (p, r)).copy_from(&self.x.transpose());
        out.view_mut((p, 0), (r, p)).copy_from(&self.x);
        out.view_mut((p, p), (r, r)).copy_from(&self.z);
        out
    }

    pub fn with_delta(&self, delta: DMatrix<f64>) -> Result<Self> {
        Self::new(
            self.y.clone(),
            self.x.clone(),
            self.z.clone(),
            self.horizon,
            delta,
        )
    }

    /// Writes labelled row-major blocks `Y`, `X`, `Z`, `Delta` and `T`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for (label, m) in [
            ("Y", &self.y),
            ("X", &self.x),
            ("Z", &self.z),
            ("Delta", &self.delta),
        ] {
            for i in 0..m.nrows() {
                write!(out, "{label},{i}")?;
                for j in 0..m.ncols() {
                    write!(out, ",{:.16e}", m[(i, j)])?;
                }
                writeln!(out)?;
            }
        }
        writeln!(out, "T,0,{:.16e}", self.horizon)?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut blocks: [Vec<Vec<f64>>; 4] = Default::default();
        let mut horizon = None;
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let label = fields.next().unwrap_or_default();
            let _row = fields.next();
            let values = fields
                .map(|f| {
                    f.trim().parse::<f64>().map_err(|e| {
                        Error::Parse(format!("line {}: {e}", lineno + 1))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            let idx = match label {
                "Y" => 0,
                "X" => 1,
                "Z" => 2,
                "Delta" => 3,
                "T" => {
                    horizon = values.first().copied();
                    continue;
                }
                other => {
                    return Err(Error::Parse(format!(
                        "line {}: unknown block label {other:?}",
                        lineno + 1
                    )))
                }
            };
            blocks[idx].push(values);
        }
        let to_matrix = |rows: &Vec<Vec<f64>>, name: &str| -> Result<DMatrix<f64>> {
            let ncols = rows.first().map_or(0, Vec::len);
            if rows.iter().any(|r| r.len() != ncols) {
                return Err(Error::Parse(format!("block {name} is ragged")));
            }
            Ok(DMatrix::from_row_iterator(
                rows.len(),
                ncols,
                rows.iter().flatten().copied(),
            ))
        };
        let horizon = horizon.ok_or_else(|| Error::Parse("missing T line".into()))?;
        Self::new(
            to_matrix(&blocks[0], "Y")?,
            to_matrix(&blocks[1], "X")?,
            to_matrix(&blocks[2], "Z")?,
            horizon,
            to_matrix(&blocks[3], "Delta")?,
        )
    }
}

/// Accumulates the moments of `[y; -zeta]` by trapezoid quadrature.
pub fn accumulate_moments(
    traj: &Trajectory,
    fdata: &FilteredData,
    delta: &DMatrix<f64>,
) -> Result<DataMoments> {
    if traj.grid != fdata.grid || traj.y.nrows() != fdata.chi.nrows() {
        return Err(Error::GridMismatch(format!(
            "trajectory grid {:?} vs filtered grid {:?}",
            traj.grid, fdata.grid
        )));
    }
    let p = traj.y.ncols();
    if delta.shape() != (p, p) {
        return Err(Error::Dimension(format!(
            "Delta is {:?}, expected ({p}, {p})",
            delta.shape()
        )));
    }
    let zeta = fdata.zeta();
    let r = zeta.ncols();
    let rows = zeta.nrows();
    let mut s = DMatrix::zeros(rows, p + r);
    s.view_mut((0, 0), (rows, p)).copy_from(&traj.y);
    s.view_mut((0, p), (rows, r)).copy_from(&(-zeta));
    let gram = trapezoid_gram(&s, traj.grid.step);
    DataMoments::new(
        gram.view((0, 0), (p, p)).into_owned(),
        gram.view((p, 0), (r, p)).into_owned(),
        gram.view((p, p), (r, r)).into_owned(),
        traj.grid.horizon,
        delta.clone(),
    )
}

/// Excitation holds iff `lambda_min(Z) > 1e-10 lambda_max(Z)`.
pub fn excitation_check(m: &DataMoments) -> (bool, f64) {
    excitation_check_with(m, 1e-10)
}

pub fn excitation_check_with(m: &DataMoments, rel_threshold: f64) -> (bool, f64) {
    let eig = linalg::sym_eigenvalues(&m.z);
    let (lo, hi) = (eig[0], *eig.last().unwrap());
    (hi > 0.0 && lo > rel_threshold * hi, lo)
}

/// The ellipsoid `{Theta : [I Theta] N [I Theta]^T >= 0}`.
#[derive(Debug, Clone)]
pub struct ConsistencySet {
    pub n_matrix: DMatrix<f64>,
    pub theta_hat: DMatrix<f64>,
    pub s_n: DMatrix<f64>,
    pub rho: f64,
    /// `Z` and `Z^{-1/2}` kept for sampling.
    pub z: DMatrix<f64>,
    z_inv_sqrt: DMatrix<f64>,
}

pub fn build_consistency_set(m: &DataMoments) -> Result<ConsistencySet> {
    let (p, r) = (m.outputs(), m.regressor_dim());
    let (_, lmin) = excitation_check(m);
    let chol = nalgebra::Cholesky::new(m.z.clone())
        .filter(|_| lmin > 0.0)
        .ok_or(Error::SingularExcitation(lmin))?;
    let (ok, _) = excitation_check(m);
    if !ok {
        return Err(Error::SingularExcitation(lmin));
    }
    // Z^{-1} X
    let zinv_x = chol.solve(&m.x);
    let theta_hat = -zinv_x.transpose();
    let s_n = linalg::symmetrize(&(&m.delta - &m.y + m.x.transpose() * &zinv_x));
    let mut n_matrix = DMatrix::zeros(p + r, p + r);
    n_matrix
        .view_mut((0, 0), (p, p))
        .copy_from(&(&m.delta - &m.y));
    n_matrix
        .view_mut((0, p), (p, r))
        .copy_from(&(-m.x.transpose()));
    n_matrix.view_mut((p, 0), (r, p)).copy_from(&(-&m.x));
    n_matrix.view_mut((p, p), (r, r)).copy_from(&(-&m.z));
    let rho = linalg::lambda_max(&m.delta).max(0.0) / lmin;
    Ok(ConsistencySet {
        n_matrix,
        theta_hat,
        s_n,
        rho,
        z: m.z.clone(),
        z_inv_sqrt: linalg::pd_inv_sqrt(&m.z),
    })
}

impl ConsistencySet {
    pub fn outputs(&self) -> usize {
        self.s_n.nrows()
    }

    pub fn regressor_dim(&self) -> usize {
        self.z.nrows()
    }

    /// `lambda_min([I Theta] N [I Theta]^T)`.
    pub fn quadratic_margin(&self, theta: &DMatrix<f64>) -> f64 {
        let (p, r) = (self.outputs(), self.regressor_dim());
        let mut it = DMatrix::zeros(p, p + r);
        it.view_mut((0, 0), (p, p)).fill_with_identity();
        it.view_mut((0, p), (p, r)).copy_from(theta);
        linalg::lambda_min(&(&it * &self.n_matrix * it.transpose()))
    }

    /// Default membership tolerance `1e-9 (1 + |N|)`.
    pub fn tolerance(&self) -> f64 {
        1e-9 * (1.0 + linalg::spectral_norm(&self.n_matrix))
    }

    /// Maps `U` (`p x (n + mu)`, `|U| <= 1`) to `Theta_hat + S_N^{1/2} U Z^{-1/2}`.
    pub fn point(&self, u: &DMatrix<f64>) -> DMatrix<f64> {
        &self.theta_hat + linalg::psd_sqrt(&self.s_n) * u * &self.z_inv_sqrt
    }
}

pub fn ellipsoid_membership(cs: &ConsistencySet, theta: &DMatrix<f64>) -> (bool, f64) {
    let margin = cs.quadratic_margin(theta);
    (margin >= -cs.tolerance(), margin)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    /// `|U| = 1`.
    Boundary,
    /// `|U| <= 1`, radius drawn uniformly in `[0, 1]`.
    Interior,
}

/// Draws `count` members of the consistency set.
pub fn sample_ellipsoid(
    cs: &ConsistencySet,
    seed: u64,
    count: usize,
    mode: SampleMode,
) -> Result<Vec<DMatrix<f64>>> {
    let floor = linalg::lambda_min(&cs.s_n);
    if floor < -cs.tolerance() {
        return Err(Error::IndefiniteSchur(floor));
    }
    let (p, r) = (cs.outputs(), cs.regressor_dim());
    let sqrt_s = linalg::psd_sqrt(&cs.s_n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut u = DMatrix::<f64>::from_fn(p, r, |_, _| StandardNormal.sample(&mut rng));
        let norm = linalg::spectral_norm(&u);
        if norm > 0.0 {
            u /= norm;
        }
        if mode == SampleMode::Interior {
            let s: f64 = rand::Rng::random(&mut rng);
            u *= s;
        }
        out.push(&cs.theta_hat + &sqrt_s * u * &cs.z_inv_sqrt);
    }
    Ok(out)
}

/// Boundary samples of the consistency set.
pub fn sample_ellipsoid_boundary(
    cs: &ConsistencySet,
    seed: u64,
    count: usize,
) -> Result<Vec<DMatrix<f64>>> {
    sample_ellipsoid(cs, seed, count, SampleMode::Boundary)
}
