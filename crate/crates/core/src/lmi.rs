//! Data-based stabilization LMI: assembly, solution, gain recovery and
//! closed-loop checks.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Complex64};
use crate::moments::DataMoments;
use crate::plant::{FilterDesign, GroundTruth, StateSpacePlant};
use crate::sdp::{ClarabelSolver, LmiConstraint, SdpProblem, SdpSolver, SdpStatus};
use crate::sim::closed_loop_matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Maximize `t` with `LMI >= t I`, `P >= t I`; feasible iff `t > eps`.
    /// The returned pair is a central point of the `eps`-feasible set.
    #[default]
    MaxMargin,
    /// Pure feasibility with `LMI >= eps I`, `P >= eps I`.
    Feasibility,
    /// Feasibility plus `min trace(P)`.
    MinTraceP,
}

/// `C0 - T(P, Q) >= 0`, `P > 0` where `C0 = [[L (Y - Delta) L^T, L X^T], [X L^T, Z]]`
/// and `T(P, Q) = [[F P + P F^T + G Q + Q^T G^T, [0 P]], [[0; P], 0]]`.
///
/// The solver works on an equivalent, well-scaled form. The unit triangular
/// congruence `U = [[I, 0], [-Z^-1 X L^T, I]]` removes the cancellation
/// between `L Y L^T` and `L X^T Z^-1 X L^T`, giving
/// `U^T (C0 - T) U = [[-L S_N L^T - He((F + L Hhat) P + G Q), -[0 P]], [., Z]]`.
/// Then `D = diag(R^-1, W)` with `W = Z^(-1/2)`, `R = Zb^(-1/2)` (`Zb` the
/// `zhat` block of `Z^-1`) and the variables `P = R Pt R`, `Q = Qt R`.
/// None of this changes definiteness; `D U^T (C0 - T) U D` and `Pt` are
/// compared with `eps`.
#[derive(Debug, Clone)]
pub struct LmiProblem {
    pub mu: usize,
    pub n: usize,
    pub p: usize,
    pub m: usize,
    pub constant: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    /// `U^T C0 U = diag(-L S_N L^T, Z)`.
    pub reduced_constant: DMatrix<f64>,
    /// `F + L Hhat`.
    pub reduced_f: DMatrix<f64>,
    /// Regressor whitening `W`.
    pub whitening: DMatrix<f64>,
    /// Realization scaling `R`.
    pub realization: DMatrix<f64>,
    pub realization_inv: DMatrix<f64>,
    /// Strictness margin on the scaled left-hand side.
    pub eps: f64,
}

impl LmiProblem {
    pub fn dim(&self) -> usize {
        2 * self.mu + self.n
    }

    /// `T(P, Q)`, the part of the left-hand side linear in the variables (before the sign).
    pub fn linear_term(&self, pm: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
        self.term_with(&self.f, pm, q)
    }

    fn term_with(&self, f: &DMatrix<f64>, pm: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
        let (mu, n) = (self.mu, self.n);
        let mut t = DMatrix::zeros(self.dim(), self.dim());
        let gq = &self.g * q;
        let fp = f * pm;
        t.view_mut((0, 0), (mu, mu))
            .copy_from(&(&fp + fp.transpose() + &gq + gq.transpose()));
        t.view_mut((0, mu + n), (mu, mu)).copy_from(pm);
        t.view_mut((mu + n, 0), (mu, mu)).copy_from(&pm.transpose());
        t
    }

    /// Left-hand side of the LMI at `(P, Q)`.
    pub fn lhs(&self, pm: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
        &self.constant - self.linear_term(pm, q)
    }

    /// `U^T lhs(P, Q) U`, evaluated without cancellation.
    pub fn reduced_lhs(&self, pm: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
        &self.reduced_constant - self.term_with(&self.reduced_f, pm, q)
    }

    /// `D U^T lhs(P, Q) U D`, the matrix whose `lambda_min` is compared with `eps`.
    pub fn scaled_lhs(&self, pm: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
        self.congruence(&self.reduced_lhs(pm, q))
    }

    /// `Pt = R^-1 P R^-1`, compared with `eps` alongside the LMI.
    pub fn scaled_p(&self, pm: &DMatrix<f64>) -> DMatrix<f64> {
        linalg::symmetrize(&(&self.realization_inv * pm * &self.realization_inv))
    }

    fn congruence(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mu = self.mu;
        let r = self.n + mu;
        let ri = &self.realization_inv;
        let w = &self.whitening;
        let mut out = DMatrix::zeros(self.dim(), self.dim());
        out.view_mut((0, 0), (mu, mu))
            .copy_from(&(ri * m.view((0, 0), (mu, mu)) * ri));
        let off = ri * m.view((0, mu), (mu, r)) * w;
        out.view_mut((0, mu), (mu, r)).copy_from(&off);
        out.view_mut((mu, 0), (r, mu)).copy_from(&off.transpose());
        out.view_mut((mu, mu), (r, r))
            .copy_from(&(w * m.view((mu, mu), (r, r)) * w));
        linalg::symmetrize(&out)
    }

    fn p_vars(&self) -> usize {
        self.mu * (self.mu + 1) / 2
    }

    /// `(Pt, Qt)` from the solver vector.
    fn unpack(&self, x: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let mu = self.mu;
        let mut pm = DMatrix::zeros(mu, mu);
        let mut k = 0;
        for j in 0..mu {
            for i in 0..=j {
                pm[(i, j)] = x[k];
                pm[(j, i)] = x[k];
                k += 1;
            }
        }
        let q = DMatrix::from_column_slice(self.m, mu, &x[k..k + self.m * mu]);
        (pm, q)
    }

    /// Casts the problem into the generic SDP form. Variables are the upper
    /// triangle of `Pt` (column-major), then `Qt` (column-major), then `t` for
    /// [`Objective::MaxMargin`].
    pub fn to_sdp(&self, objective: Objective) -> SdpProblem {
        let (mu, m, d) = (self.mu, self.m, self.dim());
        let with_t = objective == Objective::MaxMargin;
        let nv = self.p_vars() + m * mu + usize::from(with_t);
        let mut lmi = Vec::with_capacity(nv);
        let mut pos = Vec::with_capacity(nv);
        let zero_q = DMatrix::zeros(m, mu);
        for j in 0..mu {
            for i in 0..=j {
                let mut e = DMatrix::zeros(mu, mu);
                e[(i, j)] = 1.0;
                e[(j, i)] = 1.0;
                let pe = &self.realization * &e * &self.realization;
                lmi.push(Some(-self.congruence(&self.term_with(&self.reduced_f, &pe, &zero_q))));
                pos.push(Some(e));
            }
        }
        let zero_p = DMatrix::zeros(mu, mu);
        for j in 0..mu {
            for i in 0..m {
                let mut e = DMatrix::zeros(m, mu);
                e[(i, j)] = 1.0;
                let qe = &e * &self.realization;
                lmi.push(Some(-self.congruence(&self.term_with(&self.reduced_f, &zero_p, &qe))));
                pos.push(None);
            }
        }
        let mut objective_vec = DVector::zeros(nv);
        let (lmi_const, pos_const) = if with_t {
            lmi.push(Some(-DMatrix::identity(d, d)));
            pos.push(Some(-DMatrix::identity(mu, mu)));
            objective_vec[nv - 1] = -1.0;
            (self.congruence(&self.reduced_constant), DMatrix::zeros(mu, mu))
        } else {
            if objective == Objective::MinTraceP {
                let mut k = 0;
                for j in 0..mu {
                    for i in 0..=j {
                        if i == j {
                            objective_vec[k] = 1.0;
                        }
                        k += 1;
                    }
                }
            }
            (
                self.congruence(&self.reduced_constant) - DMatrix::identity(d, d) * self.eps,
                -DMatrix::identity(mu, mu) * self.eps,
            )
        };
        SdpProblem {
            objective: objective_vec,
            constraints: vec![
                LmiConstraint {
                    constant: lmi_const,
                    coeffs: lmi,
                },
                LmiConstraint {
                    constant: pos_const,
                    coeffs: pos,
                },
            ],
        }
    }
}

/// Builds the LMI from the data moments. `eps = None` selects `1e-8` times
/// the mean diagonal of the whitened `Z` block (`1e-8` once `Z` is excited).
pub fn assemble_lmi(
    moments: &DataMoments,
    filter: &FilterDesign,
    eps: Option<f64>,
) -> Result<LmiProblem> {
    let (n, mu, p, m) = (filter.n, filter.mu, filter.p, filter.m);
    if moments.outputs() != p || moments.regressor_dim() != n + mu {
        return Err(Error::Dimension(format!(
            "moments (p={}, n+mu={}) do not match filter (p={p}, n+mu={})",
            moments.outputs(),
            moments.regressor_dim(),
            n + mu
        )));
    }
    let l = &filter.l;
    let d = 2 * mu + n;
    let mut c0 = DMatrix::zeros(d, d);
    c0.view_mut((0, 0), (mu, mu))
        .copy_from(&(l * (&moments.y - &moments.delta) * l.transpose()));
    let lxt = l * moments.x.transpose();
    c0.view_mut((0, mu), (mu, n + mu)).copy_from(&lxt);
    c0.view_mut((mu, 0), (n + mu, mu)).copy_from(&lxt.transpose());
    c0.view_mut((mu, mu), (n + mu, n + mu)).copy_from(&moments.z);
    let c0 = linalg::symmetrize(&c0);
    let chol = moments
        .z
        .clone()
        .cholesky()
        .filter(|_| linalg::lambda_min(&moments.z) > 0.0);
    let (reduced_constant, reduced_f, whitening, realization, realization_inv) = match chol {
        Some(chol) => {
            // Theta_hat = -X^T Z^-1, S_N = Delta - Y - Theta_hat X
            let theta_hat = -chol.solve(&moments.x).transpose();
            let s_n = linalg::symmetrize(&(&moments.delta - &moments.y - &theta_hat * &moments.x));
            let mut reduced = DMatrix::zeros(d, d);
            reduced
                .view_mut((0, 0), (mu, mu))
                .copy_from(&linalg::symmetrize(&(-(l * s_n * l.transpose()))));
            reduced.view_mut((mu, mu), (n + mu, n + mu)).copy_from(&moments.z);
            let f_hat = &filter.f + l * theta_hat.columns(n, mu);
            let zb = chol.inverse().view((n, n), (mu, mu)).into_owned();
            (
                reduced,
                f_hat,
                linalg::pd_inv_sqrt(&moments.z),
                linalg::pd_inv_sqrt(&zb),
                linalg::psd_sqrt(&zb),
            )
        }
        None => (
            c0.clone(),
            filter.f.clone(),
            DMatrix::identity(n + mu, n + mu),
            DMatrix::identity(mu, mu),
            DMatrix::identity(mu, mu),
        ),
    };
    let z_trace = (&whitening * &moments.z * &whitening).trace();
    let eps = eps.unwrap_or_else(|| 1e-8 * z_trace.abs() / (n + mu) as f64);
    Ok(LmiProblem {
        mu,
        n,
        p,
        m,
        constant: c0,
        f: filter.f.clone(),
        g: filter.g.clone(),
        reduced_constant,
        reduced_f,
        whitening,
        realization,
        realization_inv,
        eps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthesisStatus {
    Feasible,
    Infeasible,
    NumericalFailure,
}

impl SynthesisStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SynthesisStatus::Feasible => "feasible",
            SynthesisStatus::Infeasible => "infeasible",
            SynthesisStatus::NumericalFailure => "numerical_failure",
        }
    }
}

impl std::fmt::Display for SynthesisStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct SolverDiagnostics {
    pub detail: String,
    pub iterations: u32,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Optimal `t` for the max-margin objective.
    pub margin_opt: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub status: SynthesisStatus,
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub k: DMatrix<f64>,
    /// `lambda_min` of the scaled LMI left-hand side at the returned point.
    pub lmi_margin: f64,
    pub p_margin: f64,
    pub cond_p: f64,
    pub eps: f64,
    pub diagnostics: SolverDiagnostics,
}

impl SynthesisResult {
    pub fn is_feasible(&self) -> bool {
        self.status == SynthesisStatus::Feasible
    }
}

pub fn solve_lmi(prob: &LmiProblem) -> Result<SynthesisResult> {
    solve_lmi_with(prob, Objective::default(), &ClarabelSolver::default())
}

pub fn solve_lmi_with(
    prob: &LmiProblem,
    objective: Objective,
    solver: &dyn SdpSolver,
) -> Result<SynthesisResult> {
    let sol = solver.solve(&prob.to_sdp(objective))?;
    let margin_opt = (objective == Objective::MaxMargin && !sol.x.is_empty())
        .then(|| sol.x[sol.x.len() - 1]);
    let diagnostics = diagnostics_of(&sol, margin_opt);
    match sol.status {
        SdpStatus::Optimal => {}
        SdpStatus::Infeasible if objective != Objective::MaxMargin => {
            return Ok(empty_result(prob, SynthesisStatus::Infeasible, diagnostics))
        }
        _ => return Ok(empty_result(prob, SynthesisStatus::NumericalFailure, diagnostics)),
    }
    if let Some(t) = margin_opt {
        if t <= prob.eps {
            return Ok(empty_result(prob, SynthesisStatus::Infeasible, diagnostics));
        }
        // the max-margin optimum sits on a degenerate face; a central point of
        // the eps-feasible set survives the round trip far more reliably
        let central = solver.solve(&prob.to_sdp(Objective::Feasibility))?;
        if central.status == SdpStatus::Optimal {
            let mut diag = diagnostics_of(&central, margin_opt);
            diag.iterations += sol.iterations;
            if let Some(res) = certify(prob, &central.x, diag, false) {
                return Ok(res);
            }
        }
    }
    Ok(certify(prob, &sol.x, diagnostics.clone(), true)
        .unwrap_or_else(|| empty_result(prob, SynthesisStatus::NumericalFailure, diagnostics)))
}

fn diagnostics_of(sol: &crate::sdp::SdpSolution, margin_opt: Option<f64>) -> SolverDiagnostics {
    SolverDiagnostics {
        detail: sol.detail.clone(),
        iterations: sol.iterations,
        objective: sol.objective,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        margin_opt,
    }
}

fn empty_result(prob: &LmiProblem, status: SynthesisStatus, diagnostics: SolverDiagnostics) -> SynthesisResult {
    let (mu, m) = (prob.mu, prob.m);
    SynthesisResult {
        status,
        p: DMatrix::zeros(mu, mu),
        q: DMatrix::zeros(m, mu),
        k: DMatrix::zeros(m, mu),
        lmi_margin: f64::NAN,
        p_margin: f64::NAN,
        cond_p: f64::NAN,
        eps: prob.eps,
        diagnostics,
    }
}

/// Round-trip check of a solver point; `None` if either margin is below `eps`.
fn certify(prob: &LmiProblem, x: &[f64], diagnostics: SolverDiagnostics, warn: bool) -> Option<SynthesisResult> {
    let mu = prob.mu;
    let (pt, qt) = prob.unpack(x);
    let pt = linalg::symmetrize(&pt);
    let r = &prob.realization;
    let pm = linalg::symmetrize(&(r * &pt * r));
    let q = &qt * r;
    let lmi_margin = linalg::lambda_min(&prob.scaled_lhs(&pm, &q));
    let p_margin = linalg::lambda_min(&pt);
    let floor = prob.eps * (1.0 - 1e-6);
    let chol = nalgebra::Cholesky::new(pt.clone()).filter(|_| p_margin >= floor);
    if chol.is_none() || lmi_margin < floor {
        if warn {
            log::warn!(
                "round-trip margins (LMI {lmi_margin:e}, P {p_margin:e}) below eps = {:e}",
                prob.eps
            );
        }
        return None;
    }
    let eig_p = linalg::sym_eigenvalues(&pm);
    let cond_p = eig_p[mu - 1] / eig_p[0];
    if cond_p > 1e10 {
        log::warn!("P is ill-conditioned: cond = {cond_p:e}");
    }
    // K = Q P^-1 = Qt Pt^-1 R^-1
    let k = chol?.solve(&qt.transpose()).transpose() * &prob.realization_inv;
    Some(SynthesisResult {
        status: SynthesisStatus::Feasible,
        p: pm,
        q,
        k,
        lmi_margin,
        p_margin,
        cond_p,
        eps: prob.eps,
        diagnostics,
    })
}

/// `F + L Theta [0; I_mu] + G K`.
pub fn realization_closed_loop(
    theta: &DMatrix<f64>,
    filter: &FilterDesign,
    k: &DMatrix<f64>,
) -> DMatrix<f64> {
    let h = theta.columns(filter.n, filter.mu);
    &filter.f + &filter.l * h + &filter.g * k
}

/// Checks `A P + P A^T < 0` for `A = F + L Theta [0; I] + G K` and returns the
/// spectral abscissa of `A`.
pub fn verify_stabilization(
    result: &SynthesisResult,
    theta: &DMatrix<f64>,
    filter: &FilterDesign,
) -> (bool, f64) {
    let a = realization_closed_loop(theta, filter, &result.k);
    let lyap = &a * &result.p + &result.p * a.transpose();
    (
        linalg::lambda_max(&lyap) < 0.0,
        linalg::spectral_abscissa(&a),
    )
}

#[derive(Debug, Clone)]
pub struct ClosedLoopSpectrum {
    pub eigenvalues: Vec<Complex64>,
    /// Greedy matching distance to `sigma(Lambda~) + sigma(F + L H + G K)`.
    pub decomposition_error: f64,
}

impl ClosedLoopSpectrum {
    pub fn abscissa(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Eigenvalues of `[[A, B K], [L C, F + G K]]`, with the decomposition
/// into error dynamics and realization closed loop checked against `truth`.
pub fn closed_loop_spectrum(
    plant: &StateSpacePlant,
    filter: &FilterDesign,
    truth: &GroundTruth,
    k: &DMatrix<f64>,
) -> Result<ClosedLoopSpectrum> {
    let a = closed_loop_matrix(plant, filter, k)?;
    let eigenvalues = linalg::eigenvalues(&a);
    let mut expected = linalg::eigenvalues(&truth.lambda_tilde);
    expected.extend(linalg::eigenvalues(&realization_closed_loop(
        &truth.theta_star,
        filter,
        k,
    )));
    let decomposition_error = linalg::multiset_distance(&eigenvalues, &expected);
    let scale = 1.0 + eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if decomposition_error > 1e-6 * scale {
        log::warn!("closed-loop spectrum deviates from its decomposition by {decomposition_error:e}");
    }
    Ok(ClosedLoopSpectrum {
        eigenvalues,
        decomposition_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{build_state_space, compute_ground_truth, PlantCoefficients};

    fn scalar() -> (StateSpacePlant, FilterDesign, GroundTruth) {
        let plant = build_state_space(&PlantCoefficients::scalar_example());
        let filter = FilterDesign::scalar_example(0.0).unwrap();
        let gt = compute_ground_truth(&plant, &filter, &DVector::zeros(1)).unwrap();
        (plant, filter, gt)
    }

    #[test]
    fn reference_gain_spectrum() {
        let (plant, filter, gt) = scalar();
        let k = DMatrix::from_row_slice(1, 2, &[-29.7075, -4.8734]);
        let spec = closed_loop_spectrum(&plant, &filter, &gt, &k).unwrap();
        assert!(spec.decomposition_error < 1e-8);
        let expected = [
            Complex64::new(-2.0, 0.0),
            Complex64::new(-5.37, 4.34),
            Complex64::new(-5.37, -4.34),
        ];
        assert!(linalg::multiset_distance(&spec.eigenvalues, &expected) < 0.05);
    }

    #[test]
    fn zero_gain_contains_error_dynamics() {
        let (plant, filter, gt) = scalar();
        let spec = closed_loop_spectrum(&plant, &filter, &gt, &DMatrix::zeros(1, 2)).unwrap();
        assert!(spec
            .eigenvalues
            .iter()
            .any(|z| (z - Complex64::new(-2.0, 0.0)).norm() < 1e-10));
    }

    #[test]
    fn model_based_moments_are_feasible() {
        // exact noise-free moments from a synthetic regressor Gram
        let (_, filter, gt) = scalar();
        let z = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 0.5]);
        let x = -(&z * gt.theta_star.transpose());
        let y = &gt.theta_star * &z * gt.theta_star.transpose();
        let mom = DataMoments::new(y, x, z, 1.0, DMatrix::zeros(1, 1)).unwrap();
        let prob = assemble_lmi(&mom, &filter, None).unwrap();
        assert_eq!(prob.dim(), 5);
        let res = solve_lmi(&prob).unwrap();
        assert!(res.is_feasible(), "{:?}", res.diagnostics);
        let (ok, abscissa) = verify_stabilization(&res, &gt.theta_star, &filter);
        assert!(ok && abscissa < 0.0);
        let residual = (&res.k * &res.p - &res.q).amax() / (1.0 + res.q.amax());
        assert!(residual < 1e-8);

        // same data with a huge noise bound
        let inflated = mom.with_delta(DMatrix::from_element(1, 1, 1e6)).unwrap();
        let res = solve_lmi(&assemble_lmi(&inflated, &filter, None).unwrap()).unwrap();
        assert_eq!(res.status, SynthesisStatus::Infeasible);
        for obj in [Objective::Feasibility, Objective::MinTraceP] {
            let res = solve_lmi_with(
                &assemble_lmi(&inflated, &filter, None).unwrap(),
                obj,
                &ClarabelSolver::default(),
            )
            .unwrap();
            assert_ne!(res.status, SynthesisStatus::Feasible);
        }
    }

    #[test]
    fn reduced_form_is_a_congruence() {
        let (_, filter, _) = scalar();
        let z = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 0.5]);
        let x = DMatrix::from_column_slice(3, 1, &[0.4, -0.7, 0.2]);
        let mom = DataMoments::new(
            DMatrix::from_element(1, 1, 3.0),
            x.clone(),
            z.clone(),
            1.0,
            DMatrix::from_element(1, 1, 0.2),
        )
        .unwrap();
        let prob = assemble_lmi(&mom, &filter, None).unwrap();
        let pm = DMatrix::from_row_slice(2, 2, &[1.3, 0.2, 0.2, 0.7]);
        let q = DMatrix::from_row_slice(1, 2, &[-0.5, 0.9]);
        // U = [[I, 0], [-Z^-1 X L^T, I]]
        let mut u = DMatrix::identity(5, 5);
        let zx = z.clone().cholesky().unwrap().solve(&(&x * filter.l.transpose()));
        u.view_mut((2, 0), (3, 2)).copy_from(&(-zx));
        let direct = u.transpose() * prob.lhs(&pm, &q) * &u;
        assert!((direct - prob.reduced_lhs(&pm, &q)).amax() < 1e-12);
        // whitening maps Z to I and Pt back to P
        let s = prob.scaled_lhs(&pm, &q);
        assert!((s.view((2, 2), (3, 3)) - DMatrix::identity(3, 3)).amax() < 1e-12);
        let pt = prob.scaled_p(&pm);
        assert!((&prob.realization * pt * &prob.realization - &pm).amax() < 1e-12);
    }

    #[test]
    fn zero_candidate_gives_constant_term() {
        let (_, filter, _) = scalar();
        let z = DMatrix::identity(3, 3);
        let x = DMatrix::from_column_slice(3, 1, &[0.1, -0.2, 0.3]);
        let mom = DataMoments::new(
            DMatrix::from_element(1, 1, 2.0),
            x.clone(),
            z,
            1.0,
            DMatrix::from_element(1, 1, 0.5),
        )
        .unwrap();
        let prob = assemble_lmi(&mom, &filter, None).unwrap();
        let lhs = prob.lhs(&DMatrix::zeros(2, 2), &DMatrix::zeros(1, 2));
        assert_eq!(lhs[(0, 0)], 4.0 * 1.5);
        assert_eq!(lhs[(1, 1)], 0.0);
        assert_eq!(lhs[(0, 2)], 2.0 * 0.1);
        assert_eq!(lhs[(4, 4)], 1.0);
    }
}
