//! Semidefinite programs with affine symmetric-matrix constraints, and a
//! Clarabel backend.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `F_0 + sum_i x_i F_i >= 0`, all `F` symmetric of one size.
#[derive(Debug, Clone)]
pub struct LmiConstraint {
    pub constant: DMatrix<f64>,
    /// One coefficient per decision variable, `None` when the variable does
    /// not enter this constraint.
    pub coeffs: Vec<Option<DMatrix<f64>>>,
}

impl LmiConstraint {
    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        let mut out = self.constant.clone();
        for (xi, f) in x.iter().zip(&self.coeffs) {
            if let Some(f) = f {
                out += f * *xi;
            }
        }
        out
    }
}

/// Minimize `c^T x` subject to LMI constraints.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub objective: DVector<f64>,
    pub constraints: Vec<LmiConstraint>,
}

impl SdpProblem {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        for (k, c) in self.constraints.iter().enumerate() {
            let d = c.dim();
            if c.constant.ncols() != d || c.coeffs.len() != n {
                return Err(Error::Dimension(format!(
                    "constraint {k}: constant {:?} with {} coefficients for {n} variables",
                    c.constant.shape(),
                    c.coeffs.len()
                )));
            }
            if c.coeffs.iter().flatten().any(|f| f.shape() != (d, d)) {
                return Err(Error::Dimension(format!(
                    "constraint {k}: coefficient shape differs from {d}x{d}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    /// Certified primal infeasibility.
    Infeasible,
    /// Certified dual infeasibility (objective unbounded below).
    Unbounded,
    /// Anything the solver could not certify.
    Failed,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: u32,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Backend status text.
    pub detail: String,
}

pub trait SdpSolver: Send + Sync {
    fn solve(&self, problem: &SdpProblem) -> Result<SdpSolution>;
}

#[derive(Debug, Clone)]
pub struct ClarabelSolver {
    pub max_iter: u32,
    pub tol_gap: f64,
    pub tol_feas: f64,
    pub verbose: bool,
}

impl Default for ClarabelSolver {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol_gap: 1e-11,
            tol_feas: 1e-11,
            verbose: false,
        }
    }
}

/// Scaled upper-triangle, column-major vectorisation used by the PSD cone.
pub fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let s2 = std::f64::consts::SQRT_2;
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for j in 0..n {
        for i in 0..=j {
            out.push(if i == j { m[(i, j)] } else { s2 * 0.5 * (m[(i, j)] + m[(j, i)]) });
        }
    }
    out
}

impl SdpSolver for ClarabelSolver {
    fn solve(&self, problem: &SdpProblem) -> Result<SdpSolution> {
        problem.validate()?;
        let n = problem.num_vars();
        let mut rows = Vec::new();
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut b = Vec::new();
        let mut cones = Vec::new();
        let mut offset = 0;
        for c in &problem.constraints {
            let d = c.dim();
            let len = d * (d + 1) / 2;
            b.extend(svec(&c.constant));
            // s = b - A x = svec(F_0 + sum x_i F_i)
            for (j, f) in c.coeffs.iter().enumerate() {
                if let Some(f) = f {
                    for (r, v) in svec(f).into_iter().enumerate() {
                        if v != 0.0 {
                            rows.push(offset + r);
                            cols.push(j);
                            vals.push(-v);
                        }
                    }
                }
            }
            cones.push(SupportedConeT::PSDTriangleConeT(d));
            offset += len;
        }
        let a = CscMatrix::new_from_triplets(offset, n, rows, cols, vals);
        let p = CscMatrix::<f64>::zeros((n, n));
        let settings = DefaultSettingsBuilder::default()
            .max_iter(self.max_iter)
            .tol_gap_abs(self.tol_gap)
            .tol_gap_rel(self.tol_gap)
            .tol_feas(self.tol_feas)
            .verbose(self.verbose)
            .presolve_enable(false)
            .chordal_decomposition_enable(false)
            .build()
            .map_err(|e| Error::Solver(e.to_string()))?;
        let mut solver = DefaultSolver::new(&p, problem.objective.as_slice(), &a, &b, &cones, settings)
            .map_err(|e| Error::Solver(e.to_string()))?;
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => SdpStatus::Optimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                SdpStatus::Infeasible
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                SdpStatus::Unbounded
            }
            _ => SdpStatus::Failed,
        };
        Ok(SdpSolution {
            status,
            x: sol.x.clone(),
            objective: sol.obj_val,
            iterations: sol.iterations,
            primal_residual: sol.r_prim,
            dual_residual: sol.r_dual,
            detail: format!("{:?}", sol.status),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svec_preserves_inner_product() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        let b = DMatrix::from_row_slice(3, 3, &[0.5, -1.0, 0.0, -1.0, 2.0, 1.5, 0.0, 1.5, -3.0]);
        let dot: f64 = svec(&a).iter().zip(svec(&b)).map(|(x, y)| x * y).sum();
        assert!((dot - a.dot(&b)).abs() < 1e-12);
    }

    #[test]
    fn maximizes_smallest_eigenvalue() {
        // max t  s.t.  A - t I >= 0
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let problem = SdpProblem {
            objective: DVector::from_element(1, -1.0),
            constraints: vec![LmiConstraint {
                constant: a.clone(),
                coeffs: vec![Some(-DMatrix::identity(2, 2))],
            }],
        };
        let sol = ClarabelSolver::default().solve(&problem).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        let expected = a.symmetric_eigenvalues().min();
        assert!((sol.x[0] - expected).abs() < 1e-7);
    }

    #[test]
    fn detects_infeasibility() {
        // x >= 1 and -x >= 0
        let problem = SdpProblem {
            objective: DVector::zeros(1),
            constraints: vec![
                LmiConstraint {
                    constant: DMatrix::from_element(1, 1, -1.0),
                    coeffs: vec![Some(DMatrix::from_element(1, 1, 1.0))],
                },
                LmiConstraint {
                    constant: DMatrix::zeros(1, 1),
                    coeffs: vec![Some(DMatrix::from_element(1, 1, -1.0))],
                },
            ],
        };
        let sol = ClarabelSolver::default().solve(&problem).unwrap();
        assert_eq!(sol.status, SdpStatus::Infeasible);
    }

    #[test]
    fn rejects_bad_shapes() {
        let problem = SdpProblem {
            objective: DVector::zeros(2),
            constraints: vec![LmiConstraint {
                constant: DMatrix::zeros(2, 2),
                coeffs: vec![Some(DMatrix::zeros(3, 3)), None],
            }],
        };
        assert!(ClarabelSolver::default().solve(&problem).is_err());
    }
}
