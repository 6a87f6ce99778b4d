//! Fixed-step RK4 co-simulation of the plant, the filter and the closed loop.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::moments::trapezoid_gram;
use crate::plant::{FilterDesign, GroundTruth, StateSpacePlant};
use crate::signals::SignalSpec;

/// Default integration step in seconds.
pub const DEFAULT_STEP: f64 = 1e-4;

/// Uniform grid `t_k = k h`, `k = 0..=K`, with `K h = T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub step: f64,
    pub horizon: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(step: f64, horizon: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) || !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "step {step} and horizon {horizon} must be positive and finite"
            )));
        }
        let steps = (horizon / step).round() as usize;
        if steps == 0 || (steps as f64 * step - horizon).abs() > 1e-9 * horizon {
            return Err(Error::InvalidGrid(format!(
                "step {step} does not divide horizon {horizon}"
            )));
        }
        Ok(Self {
            step,
            horizon,
            steps,
        })
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.step
    }
}

/// Signals that the algorithm never sees; kept for verification.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenSignals {
    pub w: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub x: DMatrix<f64>,
    /// Controller state, closed-loop runs only.
    pub xc: Option<DMatrix<f64>>,
}

/// Sampled experiment. Rows are grid points; `u` and `y` are the measured
/// dataset, everything in `hidden` is harness-side only.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub u: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub hidden: Option<HiddenSignals>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.u.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.u.nrows() == 0
    }

    /// The dataset without any hidden signals.
    pub fn measured(&self) -> Trajectory {
        Trajectory {
            hidden: None,
            ..self.clone()
        }
    }
}

/// Filter outputs `chi(t) = e^{Lambda t} Gamma` and the observer state `z_hat`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredData {
    pub grid: TimeGrid,
    /// `(K+1) x n`.
    pub chi: DMatrix<f64>,
    /// `(K+1) x mu`.
    pub z_hat: DMatrix<f64>,
}

impl FilteredData {
    /// Regressor samples `zeta_k = [chi_k; z_hat_k]` as rows.
    pub fn zeta(&self) -> DMatrix<f64> {
        let rows = self.chi.nrows();
        let (n, mu) = (self.chi.ncols(), self.z_hat.ncols());
        let mut out = DMatrix::zeros(rows, n + mu);
        out.view_mut((0, 0), (rows, n)).copy_from(&self.chi);
        out.view_mut((0, n), (rows, mu)).copy_from(&self.z_hat);
        out
    }
}

/// `d = d_w + d_v` on the grid, with its two components.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceTrajectory {
    pub grid: TimeGrid,
    pub d: DMatrix<f64>,
    pub d_w: DMatrix<f64>,
    pub d_v: DMatrix<f64>,
}

impl DisturbanceTrajectory {
    /// Trapezoid approximation of `int_0^T d d^T`.
    pub fn gram(&self) -> DMatrix<f64> {
        trapezoid_gram(&self.d, self.grid.step)
    }

    /// Squared `L2[0, T]` norms of `d`, `d_w`, `d_v`.
    pub fn energies(&self) -> (f64, f64, f64) {
        let h = self.grid.step;
        (
            trapezoid_gram(&self.d, h).trace(),
            trapezoid_gram(&self.d_w, h).trace(),
            trapezoid_gram(&self.d_v, h).trace(),
        )
    }
}

/// Channel routing of the exogenous signals stacked into one input vector.
struct Inputs<'a> {
    specs: Vec<&'a SignalSpec>,
    offsets: Vec<usize>,
    dim: usize,
}

impl<'a> Inputs<'a> {
    fn new(specs: Vec<&'a SignalSpec>) -> Self {
        let mut offsets = Vec::with_capacity(specs.len());
        let mut dim = 0;
        for s in &specs {
            offsets.push(dim);
            dim += s.channels();
        }
        Self { specs, offsets, dim }
    }

    fn eval_into(&self, t: f64, out: &mut DVector<f64>) {
        for (spec, &off) in self.specs.iter().zip(&self.offsets) {
            let ch = spec.channels();
            spec.eval_into(t, &mut out.as_mut_slice()[off..off + ch]);
        }
    }
}

/// Integrates `x' = a x + b r(t)` with classical RK4 and hands every grid
/// sample `(k, x_k, r(t_k))` to `record`.
fn integrate_linear(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    x0: DVector<f64>,
    inputs: &Inputs<'_>,
    grid: TimeGrid,
    mut record: impl FnMut(usize, &DVector<f64>, &DVector<f64>),
) -> Result<()> {
    let dim = x0.len();
    let h = grid.step;
    let mut x = x0;
    let mut r_now = DVector::zeros(inputs.dim);
    let mut r_mid = DVector::zeros(inputs.dim);
    let mut r_next = DVector::zeros(inputs.dim);
    let (mut k1, mut k2, mut k3, mut k4) = (
        DVector::zeros(dim),
        DVector::zeros(dim),
        DVector::zeros(dim),
        DVector::zeros(dim),
    );
    let mut tmp = DVector::zeros(dim);
    let rhs = |out: &mut DVector<f64>, state: &DVector<f64>, r: &DVector<f64>| {
        out.gemv(1.0, a, state, 0.0);
        if !r.is_empty() {
            out.gemv(1.0, b, r, 1.0);
        }
    };

    inputs.eval_into(0.0, &mut r_now);
    record(0, &x, &r_now);
    for k in 0..grid.steps {
        let t = grid.time(k);
        inputs.eval_into(t + 0.5 * h, &mut r_mid);
        inputs.eval_into(grid.time(k + 1), &mut r_next);

        rhs(&mut k1, &x, &r_now);
        tmp.copy_from(&x);
        tmp.axpy(0.5 * h, &k1, 1.0);
        rhs(&mut k2, &tmp, &r_mid);
        tmp.copy_from(&x);
        tmp.axpy(0.5 * h, &k2, 1.0);
        rhs(&mut k3, &tmp, &r_mid);
        tmp.copy_from(&x);
        tmp.axpy(h, &k3, 1.0);
        rhs(&mut k4, &tmp, &r_next);

        x.axpy(h / 6.0, &k1, 1.0);
        x.axpy(h / 3.0, &k2, 1.0);
        x.axpy(h / 3.0, &k3, 1.0);
        x.axpy(h / 6.0, &k4, 1.0);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                t: grid.time(k + 1),
            });
        }
        std::mem::swap(&mut r_now, &mut r_next);
        record(k + 1, &x, &r_now);
    }
    Ok(())
}

fn check_channels(name: &str, spec: &SignalSpec, expected: usize) -> Result<()> {
    spec.validate()?;
    if spec.channels() != expected {
        return Err(Error::Dimension(format!(
            "{name} has {} channels, expected {expected}",
            spec.channels()
        )));
    }
    Ok(())
}

fn check_filter(plant: &StateSpacePlant, filter: &FilterDesign) -> Result<()> {
    if filter.n != plant.n || filter.p != plant.p || filter.m != plant.m {
        return Err(Error::Dimension(format!(
            "filter (n={}, p={}, m={}) does not match plant (n={}, p={}, m={})",
            filter.n, filter.p, filter.m, plant.n, plant.p, plant.m
        )));
    }
    Ok(())
}

/// Simulates one open-loop experiment together with the filter:
/// `x' = A x + B u + E w`, `chi' = Lambda chi` with `chi(0) = Gamma`,
/// `z_hat' = F z_hat + G u + L y` with `z_hat(0) = 0`, and `y = C x + v`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_open_loop(
    plant: &StateSpacePlant,
    filter: &FilterDesign,
    u_spec: &SignalSpec,
    w_spec: &SignalSpec,
    v_spec: &SignalSpec,
    x0: &DVector<f64>,
    step: f64,
    horizon: f64,
) -> Result<(Trajectory, FilteredData)> {
    check_filter(plant, filter)?;
    check_channels("u", u_spec, plant.m)?;
    check_channels("w", w_spec, plant.q)?;
    check_channels("v", v_spec, plant.p)?;
    let np = plant.state_dim();
    if x0.len() != np {
        return Err(Error::Dimension(format!("x0 has {} entries, expected {np}", x0.len())));
    }
    let grid = TimeGrid::new(step, horizon)?;
    let (n, mu, m, p, q) = (filter.n, filter.mu, plant.m, plant.p, plant.q);

    // state [x; chi; z_hat], input [u; w; v]
    let dim = np + n + mu;
    let mut a = DMatrix::zeros(dim, dim);
    a.view_mut((0, 0), (np, np)).copy_from(&plant.a);
    a.view_mut((np, np), (n, n)).copy_from(&filter.lambda);
    a.view_mut((np + n, 0), (mu, np))
        .copy_from(&(&filter.l * &plant.c));
    a.view_mut((np + n, np + n), (mu, mu)).copy_from(&filter.f);
    let mut b = DMatrix::zeros(dim, m + q + p);
    b.view_mut((0, 0), (np, m)).copy_from(&plant.b);
    b.view_mut((0, m), (np, q)).copy_from(&plant.e);
    b.view_mut((np + n, 0), (mu, m)).copy_from(&filter.g);
    b.view_mut((np + n, m + q), (mu, p)).copy_from(&filter.l);

    let mut s0 = DVector::zeros(dim);
    s0.rows_mut(0, np).copy_from(x0);
    s0.rows_mut(np, n).copy_from(&filter.gamma);

    let rows = grid.len();
    let mut u = DMatrix::zeros(rows, m);
    let mut y = DMatrix::zeros(rows, p);
    let mut w = DMatrix::zeros(rows, q);
    let mut v = DMatrix::zeros(rows, p);
    let mut x = DMatrix::zeros(rows, np);
    let mut chi = DMatrix::zeros(rows, n);
    let mut z_hat = DMatrix::zeros(rows, mu);
    let inputs = Inputs::new(vec![u_spec, w_spec, v_spec]);
    integrate_linear(&a, &b, s0, &inputs, grid, |k, s, r| {
        let xs = s.rows(0, np);
        u.row_mut(k).copy_from(&r.rows(0, m).transpose());
        w.row_mut(k).copy_from(&r.rows(m, q).transpose());
        v.row_mut(k).copy_from(&r.rows(m + q, p).transpose());
        let yk = &plant.c * xs + r.rows(m + q, p);
        y.row_mut(k).copy_from(&yk.transpose());
        x.row_mut(k).copy_from(&xs.transpose());
        chi.row_mut(k).copy_from(&s.rows(np, n).transpose());
        z_hat.row_mut(k).copy_from(&s.rows(np + n, mu).transpose());
    })?;

    Ok((
        Trajectory {
            grid,
            u,
            y,
            hidden: Some(HiddenSignals { w, v, x, xc: None }),
        },
        FilteredData { grid, chi, z_hat },
    ))
}

/// State matrix `[[A, B K], [L C, F + G K]]` of the plant in feedback with
/// `x_c' = (F + G K) x_c + L y`, `u = K x_c`.
pub fn closed_loop_matrix(
    plant: &StateSpacePlant,
    filter: &FilterDesign,
    gain: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_filter(plant, filter)?;
    if gain.shape() != (plant.m, filter.mu) {
        return Err(Error::Dimension(format!(
            "K is {:?}, expected ({}, {})",
            gain.shape(),
            plant.m,
            filter.mu
        )));
    }
    let (np, mu) = (plant.state_dim(), filter.mu);
    let mut a = DMatrix::zeros(np + mu, np + mu);
    a.view_mut((0, 0), (np, np)).copy_from(&plant.a);
    a.view_mut((0, np), (np, mu)).copy_from(&(&plant.b * gain));
    a.view_mut((np, 0), (mu, np))
        .copy_from(&(&filter.l * &plant.c));
    a.view_mut((np, np), (mu, mu))
        .copy_from(&(&filter.f + &filter.g * gain));
    Ok(a)
}

/// Simulates the deployed controller in closed loop with the plant.
#[allow(clippy::too_many_arguments)]
pub fn simulate_closed_loop(
    plant: &StateSpacePlant,
    filter: &FilterDesign,
    gain: &DMatrix<f64>,
    x0: &DVector<f64>,
    xc0: &DVector<f64>,
    w_spec: &SignalSpec,
    v_spec: &SignalSpec,
    step: f64,
    horizon: f64,
) -> Result<Trajectory> {
    let a = closed_loop_matrix(plant, filter, gain)?;
    check_channels("w", w_spec, plant.q)?;
    check_channels("v", v_spec, plant.p)?;
    let (np, mu, m, p, q) = (plant.state_dim(), filter.mu, plant.m, plant.p, plant.q);
    if x0.len() != np || xc0.len() != mu {
        return Err(Error::Dimension(format!(
            "initial states have {} and {} entries, expected {np} and {mu}",
            x0.len(),
            xc0.len()
        )));
    }
    let grid = TimeGrid::new(step, horizon)?;

    // state [x; x_c], input [w; v]
    let mut b = DMatrix::zeros(np + mu, q + p);
    b.view_mut((0, 0), (np, q)).copy_from(&plant.e);
    b.view_mut((np, q), (mu, p)).copy_from(&filter.l);
    let mut s0 = DVector::zeros(np + mu);
    s0.rows_mut(0, np).copy_from(x0);
    s0.rows_mut(np, mu).copy_from(xc0);

    let rows = grid.len();
    let mut u = DMatrix::zeros(rows, m);
    let mut y = DMatrix::zeros(rows, p);
    let mut w = DMatrix::zeros(rows, q);
    let mut v = DMatrix::zeros(rows, p);
    let mut x = DMatrix::zeros(rows, np);
    let mut xc = DMatrix::zeros(rows, mu);
    let inputs = Inputs::new(vec![w_spec, v_spec]);
    integrate_linear(&a, &b, s0, &inputs, grid, |k, s, r| {
        let xs = s.rows(0, np);
        let xcs = s.rows(np, mu);
        u.row_mut(k).copy_from(&(gain * xcs).transpose());
        y.row_mut(k)
            .copy_from(&(&plant.c * xs + r.rows(q, p)).transpose());
        w.row_mut(k).copy_from(&r.rows(0, q).transpose());
        v.row_mut(k).copy_from(&r.rows(q, p).transpose());
        x.row_mut(k).copy_from(&xs.transpose());
        xc.row_mut(k).copy_from(&xcs.transpose());
    })?;

    Ok(Trajectory {
        grid,
        u,
        y,
        hidden: Some(HiddenSignals {
            w,
            v,
            x,
            xc: Some(xc),
        }),
    })
}

/// Simulates `eta_w' = Lambda~ eta_w + E w`, `eta_v' = Lambda~ eta_v - Pi L v`
/// from rest and returns `d_w = C eta_w`, `d_v = C eta_v + v`.
pub fn simulate_disturbance(
    plant: &StateSpacePlant,
    truth: &GroundTruth,
    w_spec: &SignalSpec,
    v_spec: &SignalSpec,
    step: f64,
    horizon: f64,
) -> Result<DisturbanceTrajectory> {
    check_channels("w", w_spec, plant.q)?;
    check_channels("v", v_spec, plant.p)?;
    let (np, p, q) = (plant.state_dim(), plant.p, plant.q);
    if truth.lambda_tilde.nrows() != np {
        return Err(Error::Dimension("ground truth does not match plant".into()));
    }
    let grid = TimeGrid::new(step, horizon)?;
    let mut a = DMatrix::zeros(2 * np, 2 * np);
    a.view_mut((0, 0), (np, np)).copy_from(&truth.lambda_tilde);
    a.view_mut((np, np), (np, np)).copy_from(&truth.lambda_tilde);
    let mut b = DMatrix::zeros(2 * np, q + p);
    b.view_mut((0, 0), (np, q)).copy_from(&plant.e);
    b.view_mut((np, q), (np, p)).copy_from(&(-&truth.pi_l));

    let rows = grid.len();
    let mut d = DMatrix::zeros(rows, p);
    let mut d_w = DMatrix::zeros(rows, p);
    let mut d_v = DMatrix::zeros(rows, p);
    let inputs = Inputs::new(vec![w_spec, v_spec]);
    integrate_linear(&a, &b, DVector::zeros(2 * np), &inputs, grid, |k, s, r| {
        let dw = &plant.c * s.rows(0, np);
        let dv = &plant.c * s.rows(np, np) + r.rows(q, p);
        d.row_mut(k).copy_from(&(&dw + &dv).transpose());
        d_w.row_mut(k).copy_from(&dw.transpose());
        d_v.row_mut(k).copy_from(&dv.transpose());
    })?;
    Ok(DisturbanceTrajectory { grid, d, d_w, d_v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::{build_state_space, compute_ground_truth, PlantCoefficients};
    use std::f64::consts::PI;

    fn scalar() -> (StateSpacePlant, FilterDesign) {
        (
            build_state_space(&PlantCoefficients::scalar_example()),
            FilterDesign::scalar_example(0.0).unwrap(),
        )
    }

    /// Closed form of `int_0^t e^{t - tau} sin(w tau) d tau`.
    fn scalar_forced_response(t: f64, w: f64) -> f64 {
        (w * t.exp() - t.sin_mul(w) - w * (w * t).cos()) / (1.0 + w * w)
    }

    trait SinMul {
        fn sin_mul(self, w: f64) -> f64;
    }
    impl SinMul for f64 {
        fn sin_mul(self, w: f64) -> f64 {
            (w * self).sin()
        }
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(1e-4, 1.0).is_ok());
        assert_eq!(TimeGrid::new(1e-4, 1.0).unwrap().len(), 10_001);
        assert!(TimeGrid::new(0.3, 1.0).is_err());
        assert!(TimeGrid::new(-1.0, 1.0).is_err());
        assert!(TimeGrid::new(0.1, 0.0).is_err());
    }

    #[test]
    fn scalar_output_matches_convolution() {
        let (plant, filter) = scalar();
        let w = 5.0 * PI;
        let (traj, _) = simulate_open_loop(
            &plant,
            &filter,
            &SignalSpec::sinusoid(1.0, w, 0.0),
            &SignalSpec::zero(1),
            &SignalSpec::zero(1),
            &DVector::zeros(1),
            1e-4,
            1.0,
        )
        .unwrap();
        let worst = (0..traj.len())
            .map(|k| (traj.y[(k, 0)] - scalar_forced_response(traj.grid.time(k), w)).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-6, "max error {worst}");
    }

    #[test]
    fn zero_inputs_give_zero_trajectories() {
        let (plant, filter) = scalar();
        let (traj, fd) = simulate_open_loop(
            &plant,
            &filter,
            &SignalSpec::zero(1),
            &SignalSpec::zero(1),
            &SignalSpec::zero(1),
            &DVector::zeros(1),
            1e-3,
            1.0,
        )
        .unwrap();
        assert!(traj.y.iter().all(|&v| v == 0.0));
        assert!(fd.z_hat.iter().all(|&v| v == 0.0));
        assert_eq!(fd.chi[(0, 0)], 2.0);
    }

    #[test]
    fn chi_matches_matrix_exponential() {
        let (plant, filter) = scalar();
        let (_, fd) = simulate_open_loop(
            &plant,
            &filter,
            &SignalSpec::sinusoid(1.0, 5.0 * PI, 0.0),
            &SignalSpec::zero(1),
            &SignalSpec::zero(1),
            &DVector::zeros(1),
            1e-4,
            1.0,
        )
        .unwrap();
        let gamma = DMatrix::from_column_slice(1, 1, filter.gamma.as_slice());
        let worst = (0..fd.chi.nrows())
            .map(|k| {
                let exact = (&filter.lambda * fd.grid.time(k)).exp() * &gamma;
                (fd.chi[(k, 0)] - exact[(0, 0)]).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst <= 1e-8, "{worst}");
        assert_eq!(fd.z_hat.row(0).iter().copied().sum::<f64>(), 0.0);
    }

    #[test]
    fn closed_loop_zero_and_decay() {
        let (plant, filter) = scalar();
        let k = DMatrix::zeros(1, 2);
        let traj = simulate_closed_loop(
            &plant,
            &filter,
            &k,
            &DVector::zeros(1),
            &DVector::zeros(2),
            &SignalSpec::zero(1),
            &SignalSpec::zero(1),
            1e-3,
            1.0,
        )
        .unwrap();
        assert!(traj.y.iter().all(|&v| v == 0.0));

        // stable variant x' = -x + u
        let stable = build_state_space(
            &PlantCoefficients::new(
                vec![DMatrix::from_element(1, 1, 1.0)],
                vec![DMatrix::from_element(1, 1, 1.0)],
                vec![DMatrix::from_element(1, 1, 1.0)],
            )
            .unwrap(),
        );
        let traj = simulate_closed_loop(
            &stable,
            &filter,
            &k,
            &DVector::from_element(1, 1.0),
            &DVector::zeros(2),
            &SignalSpec::zero(1),
            &SignalSpec::zero(1),
            1e-3,
            10.0,
        )
        .unwrap();
        let x = &traj.hidden.unwrap().x;
        assert!(x[(x.nrows() - 1, 0)].abs() < 1e-3);
    }

    #[test]
    fn disturbance_zero_without_noise() {
        let (plant, filter) = scalar();
        let gt = compute_ground_truth(&plant, &filter, &DVector::zeros(1)).unwrap();
        let d = simulate_disturbance(&plant, &gt, &SignalSpec::zero(1), &SignalSpec::zero(1), 1e-3, 1.0)
            .unwrap();
        assert!(d.d.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn consistency_identity_holds() {
        // y = Theta* zeta + d on the scalar example with noise and x0 != 0.
        let (plant, filter) = scalar();
        let x0 = DVector::from_element(1, 0.4);
        let gt = compute_ground_truth(&plant, &filter, &x0).unwrap();
        let w = crate::signals::sample_l2_sphere(1, 20, 1.0, 1.0, 0.8e-3, 1);
        let v = crate::signals::sample_l2_sphere(1, 20, 1.0, 1.0, 0.3e-3, 2);
        let (traj, fd) = simulate_open_loop(
            &plant,
            &filter,
            &SignalSpec::sinusoid(1.0, 5.0 * PI, 0.0),
            &w,
            &v,
            &x0,
            1e-4,
            1.0,
        )
        .unwrap();
        let d = simulate_disturbance(&plant, &gt, &w, &v, 1e-4, 1.0).unwrap();
        let zeta = fd.zeta();
        let pred = &zeta * gt.theta_star.transpose();
        let worst = (&traj.y - pred - &d.d).amax();
        assert!(worst <= 1e-5, "{worst}");
    }

    #[test]
    fn rejects_wrong_channel_count() {
        let (plant, filter) = scalar();
        let r = simulate_open_loop(
            &plant,
            &filter,
            &SignalSpec::zero(2),
            &SignalSpec::zero(1),
            &SignalSpec::zero(1),
            &DVector::zeros(1),
            1e-3,
            1.0,
        );
        assert!(matches!(r, Err(Error::Dimension(_))));
    }

    #[test]
    fn unstable_blow_up_is_reported() {
        let fast = build_state_space(
            &PlantCoefficients::new(
                vec![DMatrix::from_element(1, 1, -800.0)],
                vec![DMatrix::from_element(1, 1, 1.0)],
                vec![DMatrix::zeros(1, 0)],
            )
            .unwrap(),
        );
        let filter = FilterDesign::scalar_example(0.0).unwrap();
        let r = simulate_open_loop(
            &fast,
            &filter,
            &SignalSpec::zero(1),
            &SignalSpec::zero(0),
            &SignalSpec::zero(1),
            &DVector::from_element(1, 1.0),
            1e-3,
            2.0,
        );
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }
}
