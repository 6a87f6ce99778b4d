//! Noise-energy bound `Delta` from priors on `|w|` and `|v|`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Complex64};
use crate::plant::{PlantCoefficients, RationalMatrix};

/// Energy bounds `|w|^2 <= delta_w`, `|v|^2 <= delta_v` over `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisePrior {
    pub delta_w: f64,
    pub delta_v: f64,
}

impl NoisePrior {
    pub fn new(delta_w: f64, delta_v: f64) -> Result<Self> {
        if !(delta_w >= 0.0 && delta_v >= 0.0) || !delta_w.is_finite() || !delta_v.is_finite() {
            return Err(Error::Config(format!(
                "noise priors must be finite and non-negative, got {delta_w}, {delta_v}"
            )));
        }
        Ok(Self { delta_w, delta_v })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainCertificate {
    pub gamma: f64,
    pub gamma_inf: f64,
    pub dre_solved: bool,
    pub horizon: f64,
}

/// Result of one backward Riccati integration.
#[derive(Debug, Clone, PartialEq)]
pub struct DreOutcome {
    pub solvable: bool,
    /// Backward time `tau = T - t` at which the escape threshold was crossed.
    pub escape_time: Option<f64>,
    /// `(tau, |W(tau)|)` samples, filled only when requested.
    pub trace: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DreOptions {
    /// Step as a fraction of the horizon.
    pub rel_step: f64,
    /// Escape threshold is `blow_up * (1 + |C^T C|)`.
    pub blow_up: f64,
    /// Record every `trace_every` steps; `0` disables the trace.
    pub trace_every: usize,
}

impl Default for DreOptions {
    fn default() -> Self {
        Self {
            rel_step: 1e-4,
            blow_up: 1e8,
            trace_every: 0,
        }
    }
}

/// Integrates `dW/dtau = Lt^T W + W Lt + gamma^-2 W E E^T W + C^T C` from
/// `W(0) = 0` over `tau in [0, T]` (the backward form of the terminal-value
/// problem) and reports whether `W` stays bounded.
pub fn dre_solve(
    lambda_tilde: &DMatrix<f64>,
    e: &DMatrix<f64>,
    c: &DMatrix<f64>,
    gamma: f64,
    horizon: f64,
    opts: DreOptions,
) -> DreOutcome {
    let n = lambda_tilde.nrows();
    let ctc = c.transpose() * c;
    let eet = e * e.transpose() / (gamma * gamma);
    let threshold = opts.blow_up * (1.0 + linalg::spectral_norm(&ctc));
    let steps = (1.0 / opts.rel_step).round().max(1.0) as usize;
    let h = horizon / steps as f64;
    let at = lambda_tilde.transpose();
    let rhs = |w: &DMatrix<f64>| -> DMatrix<f64> {
        &at * w + w * lambda_tilde + w * &eet * w + &ctc
    };
    let mut w = DMatrix::zeros(n, n);
    let mut trace = Vec::new();
    if opts.trace_every > 0 {
        trace.push((0.0, 0.0));
    }
    for k in 0..steps {
        let k1 = rhs(&w);
        let k2 = rhs(&(&w + &k1 * (0.5 * h)));
        let k3 = rhs(&(&w + &k2 * (0.5 * h)));
        let k4 = rhs(&(&w + &k3 * h));
        w += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        w = linalg::symmetrize(&w);
        let tau = (k + 1) as f64 * h;
        // W is PSD along a bounded flow; the Frobenius norm is a cheap upper
        // bound on the spectral norm.
        let size = w.norm();
        if !size.is_finite() || size > threshold {
            return DreOutcome {
                solvable: false,
                escape_time: Some(tau),
                trace,
            };
        }
        if opts.trace_every > 0 && (k + 1) % opts.trace_every == 0 {
            trace.push((tau, size));
        }
    }
    DreOutcome {
        solvable: true,
        escape_time: None,
        trace,
    }
}

pub fn dre_solvable(
    lambda_tilde: &DMatrix<f64>,
    e: &DMatrix<f64>,
    c: &DMatrix<f64>,
    gamma: f64,
    horizon: f64,
) -> bool {
    dre_solve(lambda_tilde, e, c, gamma, horizon, DreOptions::default()).solvable
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HinfOptions {
    pub points: usize,
    pub omega_min: f64,
    pub omega_max: f64,
    pub rtol: f64,
}

impl Default for HinfOptions {
    fn default() -> Self {
        Self {
            points: 2000,
            omega_min: 1e-4,
            omega_max: 1e6,
            rtol: 1e-4,
        }
    }
}

/// Frequency sweep of `gain(omega)` at `omega = 0` and a log-spaced grid,
/// followed by golden-section refinement around the largest sample.
pub fn sweep_peak(mut gain: impl FnMut(f64) -> Result<f64>, opts: HinfOptions) -> Result<(f64, f64)> {
    let ratio = (opts.omega_max / opts.omega_min).ln();
    let last = opts.points.max(2) - 1;
    let mut grid = vec![0.0];
    grid.extend((0..=last).map(|k| opts.omega_min * (ratio * k as f64 / last as f64).exp()));
    let mut best = (0usize, f64::NEG_INFINITY);
    let mut values = Vec::with_capacity(grid.len());
    for (i, &w) in grid.iter().enumerate() {
        let g = gain(w)?;
        values.push(g);
        if g > best.1 {
            best = (i, g);
        }
    }
    let (i, _) = best;
    let lo = grid[i.saturating_sub(1)];
    let hi = grid[(i + 1).min(grid.len() - 1)];
    let (mut a, mut b) = (lo, hi);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let (mut f1, mut f2) = (gain(x1)?, gain(x2)?);
    let mut peak = (grid[i], values[i]);
    for _ in 0..200 {
        if (b - a) <= 1e-12 * (1.0 + b.abs()) {
            break;
        }
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = gain(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = gain(x2)?;
        }
        for (x, f) in [(x1, f1), (x2, f2)] {
            if f > peak.1 {
                peak = (x, f);
            }
        }
    }
    Ok(peak)
}

/// `H-infinity` norm of a stable rational matrix.
pub fn hinf_norm(tf: &RationalMatrix) -> Result<f64> {
    hinf_norm_with(tf, HinfOptions::default())
}

pub fn hinf_norm_with(tf: &RationalMatrix, opts: HinfOptions) -> Result<f64> {
    let abscissa = tf.poles().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if abscissa >= 0.0 {
        return Err(Error::UnstableDenominator(abscissa));
    }
    Ok(sweep_peak(|w| tf.gain_at(w), opts)?.1)
}

/// `H-infinity` norm of `C (sI - A)^{-1} B`.
pub fn hinf_norm_state_space(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<f64> {
    let abscissa = linalg::spectral_abscissa(a);
    if abscissa >= 0.0 {
        return Err(Error::UnstableDenominator(abscissa));
    }
    let n = a.nrows();
    let ac = a.map(|v| Complex64::new(v, 0.0));
    let bc = b.map(|v| Complex64::new(v, 0.0));
    let cc = c.map(|v| Complex64::new(v, 0.0));
    let gain = |w: f64| -> Result<f64> {
        let m = DMatrix::<Complex64>::identity(n, n) * Complex64::new(0.0, w) - &ac;
        let x = m
            .lu()
            .solve(&bc)
            .ok_or(Error::Pole { re: 0.0, im: w })?;
        let g = &cc * x;
        Ok(g.singular_values().iter().copied().fold(0.0, f64::max))
    };
    Ok(sweep_peak(gain, HinfOptions::default())?.1)
}

/// Bisection for the smallest `gamma` in `(0, gamma_inf]` with a DRE
/// solution on `[0, T]`, to relative tolerance `rel_tol`.
pub fn gamma_search(
    lambda_tilde: &DMatrix<f64>,
    e: &DMatrix<f64>,
    c: &DMatrix<f64>,
    horizon: f64,
    rel_tol: f64,
) -> Result<GainCertificate> {
    let gamma_inf = hinf_norm_state_space(lambda_tilde, e, c)?;
    if gamma_inf == 0.0 || e.is_empty() || e.amax() == 0.0 {
        return Ok(GainCertificate {
            gamma: 0.0,
            gamma_inf,
            dre_solved: true,
            horizon,
        });
    }
    // the sweep may undershoot the true peak by rtol
    let mut hi = gamma_inf * (1.0 + HinfOptions::default().rtol);
    let mut ok = dre_solvable(lambda_tilde, e, c, hi, horizon);
    let mut widen = 0;
    while !ok && widen < 20 {
        log::warn!("DRE not solvable at gamma = {hi:e}; widening the bracket");
        hi *= 1.5;
        widen += 1;
        ok = dre_solvable(lambda_tilde, e, c, hi, horizon);
    }
    if !ok {
        return Ok(GainCertificate {
            gamma: f64::INFINITY,
            gamma_inf,
            dre_solved: false,
            horizon,
        });
    }
    let mut lo = 0.0;
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if dre_solvable(lambda_tilde, e, c, mid, horizon) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(GainCertificate {
        gamma: hi,
        gamma_inf,
        dre_solved: true,
        horizon,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GvCheck {
    /// Whether the real-spectrum and spectral-radius hypothesis holds.
    pub applies: bool,
    pub sup: f64,
}

/// Checks the hypothesis under which the measurement-noise channel has unit
/// `H-infinity` norm and sweeps `sup |G_v(i omega)|`.
pub fn check_gv_norm_one(coeffs: &PlantCoefficients, lambda: &DMatrix<f64>) -> Result<GvCheck> {
    let eig_l = linalg::eigenvalues(lambda);
    let real = eig_l
        .iter()
        .all(|z| z.im.abs() <= 1e-12 * (1.0 + z.re.abs()));
    let min_l = eig_l.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    let a = crate::plant::build_state_space(coeffs).a;
    let max_a = linalg::eigenvalues(&a)
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    let applies = coeffs.p == 1 && real && min_l >= max_a;
    let filter_coeffs = linalg::char_poly(lambda);
    let mut numerator = coeffs.a.clone();
    numerator.push(DMatrix::identity(coeffs.p, coeffs.p));
    let gv = RationalMatrix::new(numerator, filter_coeffs)?;
    let sup = hinf_norm(&gv)?;
    if applies && !(1.0 - 1e-6..=1.0 + 1e-4).contains(&sup) {
        log::warn!("|G_v| = {sup} although the unit-norm hypothesis holds");
    }
    Ok(GvCheck { applies, sup })
}

/// `Delta = (gamma sqrt(delta_w) + g_v sqrt(delta_v))^2 I_p` with `g_v = 1`
/// unless overridden. Multi-output measurement noise needs an explicit
/// `gv_override` since no general bound on `|G_v|` is available.
pub fn compute_delta(
    prior: &NoisePrior,
    gamma: f64,
    p: usize,
    gv_override: Option<f64>,
) -> Result<DMatrix<f64>> {
    if p > 1 && prior.delta_v > 0.0 && gv_override.is_none() {
        return Err(Error::MultiOutputMeasurementNoise(p));
    }
    let gv = gv_override.unwrap_or(1.0);
    let root = gamma * prior.delta_w.sqrt() + gv * prior.delta_v.sqrt();
    Ok(DMatrix::identity(p, p) * (root * root))
}
