#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use datastab::experiments::config::EnergyMode;
use datastab::experiments::pipeline::{noise_bound, noise_signals};
use datastab::experiments::ExperimentConfig;
use datastab::linalg;
use datastab::noise::NoisePrior;
use datastab::plant::{build_state_space, compute_ground_truth, PlantCoefficients};
use datastab::sim::{simulate_disturbance, simulate_open_loop};
use datastab::Result;

/// Ratio of successive refinement differences of the noise-free scalar
/// simulation at steps `h`, `h/2`, `h/4`; about 16 for a fourth-order method.
pub fn rk4_refinement_ratio(cfg: &ExperimentConfig, h: f64) -> Result<f64> {
    let coeffs = cfg.plant_coefficients()?;
    let plant = build_state_space(&coeffs);
    let filter = cfg.filter_design(coeffs.m, DMatrix::zeros(coeffs.p, coeffs.p))?;
    let u = cfg.input_signal()?;
    let w = datastab::signals::SignalSpec::zero(coeffs.q);
    let v = datastab::signals::SignalSpec::zero(coeffs.p);
    let x0 = DVector::from_element(coeffs.state_dim(), 0.5);
    let horizon = cfg.simulation.horizon;
    let mut runs = Vec::new();
    for k in 0..3 {
        let step = h / f64::from(1 << k);
        let (traj, fd) = simulate_open_loop(&plant, &filter, &u, &w, &v, &x0, step, horizon)?;
        let stride = 1 << k;
        let rows = (traj.len() - 1) / stride + 1;
        // y and z_hat on the coarse grid
        let width = traj.y.ncols() + fd.z_hat.ncols();
        let mut coarse = DMatrix::zeros(rows, width);
        for r in 0..rows {
            let i = r * stride;
            for c in 0..traj.y.ncols() {
                coarse[(r, c)] = traj.y[(i, c)];
            }
            for c in 0..fd.z_hat.ncols() {
                coarse[(r, traj.y.ncols() + c)] = fd.z_hat[(i, c)];
            }
        }
        runs.push(coarse);
    }
    let e1 = (&runs[0] - &runs[1]).amax();
    let e2 = (&runs[1] - &runs[2]).amax();
    Ok(e1 / e2)
}

/// Largest `lambda_max(int d d^T - Delta)` over `draws` noise realizations
/// within the priors of `cfg`, with `Delta` as the pipeline computes it.
pub fn worst_disturbance_excess(cfg: &ExperimentConfig, energy: EnergyMode, draws: u64) -> Result<f64> {
    let mut cfg = cfg.clone();
    cfg.noise.energy = energy;
    let coeffs = cfg.plant_coefficients()?;
    let plant = build_state_space(&coeffs);
    let prior = cfg.noise_prior()?;
    let probe = cfg.filter_design(coeffs.m, DMatrix::zeros(coeffs.p, coeffs.p))?;
    let nb = noise_bound(&cfg, &coeffs, &probe, prior)?;
    let filter = probe.with_delta(nb.delta.clone())?;
    let truth = compute_ground_truth(&plant, &filter, &cfg.x0(&coeffs)?)?;
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..draws {
        let (w, v) = noise_signals(&cfg, &coeffs, &prior, seed)?;
        let d = simulate_disturbance(&plant, &truth, &w, &v, cfg.simulation.step, cfg.simulation.horizon)?;
        worst = worst.max(linalg::lambda_max(&(d.gram() - &nb.delta)));
    }
    Ok(worst)
}

/// Random single-output plants with `max |sigma(A)| <= 1` paired with a
/// diagonal `Lambda` of distinct real eigenvalues at most `-1`.
pub fn random_unit_gain_cases(count: usize, seed: u64) -> Vec<(PlantCoefficients, DMatrix<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(1..=4);
            // real roots and conjugate pairs inside the closed unit disc
            let mut poly = vec![1.0];
            let mut placed = 0;
            while placed < n {
                let factor = if n - placed >= 2 && rng.random_bool(0.5) {
                    let r: f64 = rng.random_range(0.0..1.0);
                    let phi: f64 = rng.random_range(0.0..std::f64::consts::PI);
                    placed += 2;
                    vec![r * r, -2.0 * r * phi.cos(), 1.0]
                } else {
                    placed += 1;
                    vec![-rng.random_range(-1.0..1.0), 1.0]
                };
                poly = multiply(&poly, &factor);
            }
            poly.pop();
            let a = poly.into_iter().map(|c| DMatrix::from_element(1, 1, c)).collect();
            let ones = || (0..n).map(|_| DMatrix::from_element(1, 1, 1.0)).collect::<Vec<_>>();
            let coeffs = PlantCoefficients::new(a, ones(), ones()).expect("valid random plant");
            let mut pole = -1.0 - rng.random_range(0.0..0.5);
            let mut diag = Vec::with_capacity(n);
            for _ in 0..n {
                diag.push(pole);
                pole -= rng.random_range(0.1..3.0);
            }
            (coeffs, DMatrix::from_diagonal(&DVector::from_vec(diag)))
        })
        .collect()
}

fn multiply(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn noise_free() -> NoisePrior {
    NoisePrior::new(0.0, 0.0).expect("zero priors are valid")
}

pub fn configs_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}
