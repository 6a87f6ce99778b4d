//! Analytic excitation and noise signals.
//!
//! Signals are evaluated in closed form inside integrator stages, so the
//! input contributes no interpolation error to the RK4 budget. The only
//! exception is [`SignalSpec::Sampled`], used to replay recorded noise.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `amplitude * sin(frequency * t + phase)`, frequency in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub amplitude: f64,
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

/// Coefficients over the basis `{1/sqrt(T), sqrt(2/T) sin(2 pi j t / T'),
/// sqrt(2/T) cos(2 pi j t / T')}`, `j = 1..=J`. Column `0` multiplies the
/// constant, column `2j - 1` the sine and column `2j` the cosine of index `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierSignal {
    /// `channels x (2J + 1)`.
    pub coeffs: DMatrix<f64>,
    /// Period `T'` of the harmonics.
    pub period: f64,
    /// Horizon `T` fixing the normalisation.
    pub horizon: f64,
}

impl FourierSignal {
    pub fn max_index(&self) -> usize {
        (self.coeffs.ncols() - 1) / 2
    }

    /// `||c||^2`, the exact `L2[0, T]` energy when `T' = T`.
    pub fn coefficient_energy(&self) -> f64 {
        self.coeffs.norm_squared()
    }

    fn eval_into(&self, t: f64, out: &mut [f64]) {
        let j_max = self.max_index();
        let c0 = 1.0 / self.horizon.sqrt();
        let cj = (2.0 / self.horizon).sqrt();
        for (ch, o) in out.iter_mut().enumerate() {
            *o = self.coeffs[(ch, 0)] * c0;
        }
        let theta = 2.0 * PI * t / self.period;
        let (s1, c1) = theta.sin_cos();
        let (mut sj, mut cjv) = (s1, c1);
        for j in 1..=j_max {
            for (ch, o) in out.iter_mut().enumerate() {
                *o += cj * (self.coeffs[(ch, 2 * j - 1)] * sj + self.coeffs[(ch, 2 * j)] * cjv);
            }
            // rotate by theta
            let next_s = sj * c1 + cjv * s1;
            cjv = cjv * c1 - sj * s1;
            sj = next_s;
        }
    }
}

/// An input or noise signal over `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalSpec {
    Zero { channels: usize },
    /// One sum of sinusoids per channel.
    Sinusoids(Vec<Vec<Sinusoid>>),
    Fourier(FourierSignal),
    /// Uniformly spaced samples (rows) with linear interpolation between them
    /// and constant extrapolation past the last sample.
    Sampled { step: f64, values: DMatrix<f64> },
}

impl SignalSpec {
    pub fn zero(channels: usize) -> Self {
        SignalSpec::Zero { channels }
    }

    pub fn sinusoid(amplitude: f64, frequency: f64, phase: f64) -> Self {
        SignalSpec::Sinusoids(vec![vec![Sinusoid {
            amplitude,
            frequency,
            phase,
        }]])
    }

    pub fn channels(&self) -> usize {
        match self {
            SignalSpec::Zero { channels } => *channels,
            SignalSpec::Sinusoids(ch) => ch.len(),
            SignalSpec::Fourier(f) => f.coeffs.nrows(),
            SignalSpec::Sampled { values, .. } => values.ncols(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SignalSpec::Zero { .. } => Ok(()),
            SignalSpec::Sinusoids(ch) => {
                let bad = ch
                    .iter()
                    .flatten()
                    .any(|s| !(s.amplitude.is_finite() && s.frequency.is_finite() && s.phase.is_finite()));
                if bad {
                    Err(Error::Config("sinusoid parameters must be finite".into()))
                } else {
                    Ok(())
                }
            }
            SignalSpec::Fourier(f) => {
                if f.coeffs.ncols() % 2 != 1 {
                    return Err(Error::Dimension(format!(
                        "Fourier coefficient matrix needs 2J+1 columns, got {}",
                        f.coeffs.ncols()
                    )));
                }
                if !(f.period > 0.0 && f.horizon > 0.0) {
                    return Err(Error::Config("Fourier period and horizon must be positive".into()));
                }
                Ok(())
            }
            SignalSpec::Sampled { step, values } => {
                if !(*step > 0.0) || values.nrows() == 0 {
                    return Err(Error::Config("sampled signal needs a positive step and samples".into()));
                }
                Ok(())
            }
        }
    }

    /// Writes the signal value at time `t` into `out` (length = channel count).
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        match self {
            SignalSpec::Zero { .. } => out.fill(0.0),
            SignalSpec::Sinusoids(ch) => {
                for (o, sines) in out.iter_mut().zip(ch) {
                    *o = sines
                        .iter()
                        .map(|s| s.amplitude * (s.frequency * t + s.phase).sin())
                        .sum();
                }
            }
            SignalSpec::Fourier(f) => f.eval_into(t, out),
            SignalSpec::Sampled { step, values } => {
                let last = values.nrows() - 1;
                let pos = (t / step).max(0.0);
                let k = (pos.floor() as usize).min(last);
                let frac = if k == last { 0.0 } else { pos - k as f64 };
                for (ch, o) in out.iter_mut().enumerate() {
                    let a = values[(k, ch)];
                    let b = if k == last { a } else { values[(k + 1, ch)] };
                    *o = a + frac * (b - a);
                }
            }
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.channels()];
        self.eval_into(t, &mut out);
        out
    }

    /// Scales the signal by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            SignalSpec::Zero { channels } => SignalSpec::Zero { channels: *channels },
            SignalSpec::Sinusoids(ch) => SignalSpec::Sinusoids(
                ch.iter()
                    .map(|sines| {
                        sines
                            .iter()
                            .map(|s| Sinusoid {
                                amplitude: s.amplitude * factor,
                                ..*s
                            })
                            .collect()
                    })
                    .collect(),
            ),
            SignalSpec::Fourier(f) => SignalSpec::Fourier(FourierSignal {
                coeffs: &f.coeffs * factor,
                ..f.clone()
            }),
            SignalSpec::Sampled { step, values } => SignalSpec::Sampled {
                step: *step,
                values: values * factor,
            },
        }
    }
}

/// Draws Fourier coefficients uniformly from the Euclidean ball of radius
/// `sqrt(radius_sq)` in coefficient space: `c = sqrt(delta) U^{1/dim} g / |g|`
/// with `g` standard Gaussian and `U` uniform on `(0, 1)`.
///
/// With `period == horizon` the basis is orthonormal on `[0, T]`, so the
/// signal energy equals `|c|^2 <= radius_sq`.
pub fn sample_l2_ball(
    channels: usize,
    max_index: usize,
    period: f64,
    horizon: f64,
    radius_sq: f64,
    seed: u64,
) -> SignalSpec {
    let cols = 2 * max_index + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = DMatrix::zeros(channels, cols);
    if radius_sq > 0.0 && channels > 0 {
        let dim = (channels * cols) as f64;
        // column-major fill keeps the draw order independent of matrix layout changes
        for v in coeffs.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let g_norm = coeffs.norm();
        let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
        let radius = radius_sq.sqrt() * u.powf(1.0 / dim);
        if g_norm > 0.0 {
            coeffs *= radius / g_norm;
        }
    }
    SignalSpec::Fourier(FourierSignal {
        coeffs,
        period,
        horizon,
    })
}

/// Like [`sample_l2_ball`] but rescaled onto the sphere, so the energy equals
/// `energy` exactly (when `period == horizon`).
pub fn sample_l2_sphere(
    channels: usize,
    max_index: usize,
    period: f64,
    horizon: f64,
    energy: f64,
    seed: u64,
) -> SignalSpec {
    match sample_l2_ball(channels, max_index, period, horizon, 1.0, seed) {
        SignalSpec::Fourier(f) => {
            let norm = f.coefficient_energy().sqrt();
            let factor = if norm > 0.0 { energy.max(0.0).sqrt() / norm } else { 0.0 };
            SignalSpec::Fourier(f).scaled(factor)
        }
        _ => unreachable!("ball sampler returns a Fourier signal"),
    }
}
