//! TOML experiment configuration. Matrices are row-major nested lists.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lmi::Objective;
use crate::noise::NoisePrior;
use crate::plant::{FilterDesign, PlantCoefficients};
use crate::signals::{FourierSignal, SignalSpec, Sinusoid};

pub type Matrix = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub plant: PlantConfig,
    pub filter: FilterConfig,
    pub simulation: SimulationConfig,
    pub input: InputConfig,
    pub noise: NoiseConfig,
    #[serde(default)]
    pub synthesis: SynthesisConfig,
    #[serde(default)]
    pub deployment: DeploymentConfig,
    #[serde(default)]
    pub monte_carlo: Option<MonteCarloConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    /// `A_0, ..., A_{n-1}`, each `p x p`.
    pub a: Vec<Matrix>,
    /// `B_0, ..., B_{n-1}`, each `p x m`.
    pub b: Vec<Matrix>,
    /// `E_0, ..., E_{n-1}`, each `p x q`.
    pub e: Vec<Matrix>,
    /// Initial state of the companion realization; zero when absent.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    pub lambda: Matrix,
    pub gamma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub horizon: f64,
    #[serde(default = "default_step")]
    pub step: f64,
}

fn default_step() -> f64 {
    crate::sim::DEFAULT_STEP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputConfig {
    Zero { channels: usize },
    /// One list of sinusoids per channel.
    Sinusoids { channels: Vec<Vec<Sinusoid>> },
    Fourier {
        coeffs: Matrix,
        #[serde(default)]
        period: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Fourier-basis draws seeded from the run seed.
    #[default]
    Sampled,
    /// Samples read from `replay_file`.
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyMode {
    /// Uniform in the ball of radius `sqrt(delta)`.
    #[default]
    Ball,
    /// On the sphere: energy exactly `delta`.
    Sphere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub delta_w: f64,
    #[serde(default)]
    pub delta_v: f64,
    #[serde(default)]
    pub mode: NoiseMode,
    #[serde(default)]
    pub energy: EnergyMode,
    #[serde(default = "default_max_index")]
    pub max_index: usize,
    /// Harmonic period; defaults to the horizon.
    #[serde(default)]
    pub period: Option<f64>,
    /// CSV with header `t,w_1..w_q,v_1..v_p` on the simulation grid.
    #[serde(default)]
    pub replay_file: Option<PathBuf>,
    /// Fixed gain bound; searched when absent.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default = "default_gamma_tol")]
    pub gamma_tol: f64,
    /// User-supplied `|G_v|` bound, required for `p > 1` with `delta_v > 0`.
    #[serde(default)]
    pub gv_gain: Option<f64>,
    /// Explicit `Delta`, bypassing the computation.
    #[serde(default)]
    pub delta: Option<Matrix>,
}

fn default_max_index() -> usize {
    100
}

fn default_gamma_tol() -> f64 {
    1e-5
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisConfig {
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub objective: Objective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeploymentConfig {
    /// Closed-loop horizon; `20 / |spectral abscissa|` (capped at 1000) when absent.
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default = "default_deploy_step")]
    pub step: f64,
    /// Skip the closed-loop re-simulation.
    #[serde(default)]
    pub skip: bool,
}

fn default_deploy_step() -> f64 {
    1e-3
}

impl Default for DeploymentConfig {
    fn default() -> Self {
        Self {
            horizon: None,
            step: default_deploy_step(),
            skip: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    /// Explicit `delta_w` levels; chosen by a noise-free pilot when absent.
    #[serde(default)]
    pub levels: Option<Vec<f64>>,
    #[serde(default = "default_runs")]
    pub runs_per_level: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Multiples of the pilot's critical level.
    #[serde(default = "default_factors")]
    pub auto_factors: Vec<f64>,
}

fn default_runs() -> usize {
    50
}

fn default_factors() -> Vec<f64> {
    vec![0.1, 0.316, 1.0, 3.16, 10.0]
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            levels: None,
            runs_per_level: default_runs(),
            base_seed: 0,
            auto_factors: default_factors(),
        }
    }
}

pub fn to_matrix(rows: &Matrix, name: &str) -> Result<DMatrix<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Config(format!("matrix {name} has ragged rows")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Config(format!("matrix {name} has non-finite entries")));
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.iter().flatten().copied(),
    ))
}

pub fn from_matrix(m: &DMatrix<f64>) -> Matrix {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// `p x 0` blocks for a plant without process noise are written as lists of
/// empty rows; an entirely empty list means "no rows" and is widened here.
fn coefficient(rows: &Matrix, p: usize, name: &str) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Ok(DMatrix::zeros(p, 0));
    }
    to_matrix(rows, name)
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(file) = &cfg.noise.replay_file {
            if file.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.noise.replay_file = Some(dir.join(file));
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks every dimension and tuning constraint.
    pub fn validate(&self) -> Result<()> {
        let coeffs = self.plant_coefficients()?;
        self.filter_design(coeffs.m, DMatrix::zeros(coeffs.p, coeffs.p))?;
        self.x0(&coeffs)?;
        if !(self.simulation.horizon > 0.0) || !(self.simulation.step > 0.0) {
            return Err(Error::Config("horizon and step must be positive".into()));
        }
        crate::sim::TimeGrid::new(self.simulation.step, self.simulation.horizon)?;
        let input = self.input_signal()?;
        if input.channels() != coeffs.m {
            return Err(Error::Config(format!(
                "input has {} channels, plant has {} inputs",
                input.channels(),
                coeffs.m
            )));
        }
        self.noise_prior()?;
        if self.noise.mode == NoiseMode::Replay && self.noise.replay_file.is_none() {
            return Err(Error::Config("replay noise mode needs replay_file".into()));
        }
        if let Some(d) = &self.noise.delta {
            let d = to_matrix(d, "noise.delta")?;
            if d.shape() != (coeffs.p, coeffs.p) {
                return Err(Error::Config(format!("noise.delta must be {0}x{0}", coeffs.p)));
            }
        }
        if let Some(mc) = &self.monte_carlo {
            if mc.levels.as_ref().is_some_and(|l| l.is_empty()) || mc.auto_factors.is_empty() {
                return Err(Error::Config("Monte-Carlo levels must be non-empty".into()));
            }
            if mc.levels.iter().flatten().any(|l| !(*l >= 0.0)) {
                return Err(Error::Config("Monte-Carlo levels must be non-negative".into()));
            }
        }
        Ok(())
    }

    pub fn plant_coefficients(&self) -> Result<PlantCoefficients> {
        let first = self.plant.a.first().ok_or_else(|| Error::Config("plant.a is empty".into()))?;
        let p = first.len();
        let conv = |list: &Vec<Matrix>, name: &str| -> Result<Vec<DMatrix<f64>>> {
            list.iter()
                .enumerate()
                .map(|(i, m)| coefficient(m, p, &format!("plant.{name}[{i}]")))
                .collect()
        };
        PlantCoefficients::new(conv(&self.plant.a, "a")?, conv(&self.plant.b, "b")?, conv(&self.plant.e, "e")?)
    }

    pub fn filter_design(&self, m: usize, delta: DMatrix<f64>) -> Result<FilterDesign> {
        FilterDesign::new(
            to_matrix(&self.filter.lambda, "filter.lambda")?,
            DVector::from_vec(self.filter.gamma.clone()),
            delta,
            m,
        )
    }

    pub fn x0(&self, coeffs: &PlantCoefficients) -> Result<DVector<f64>> {
        let np = coeffs.state_dim();
        match &self.plant.x0 {
            None => Ok(DVector::zeros(np)),
            Some(v) if v.len() == np => Ok(DVector::from_vec(v.clone())),
            Some(v) => Err(Error::Config(format!("plant.x0 has {} entries, expected {np}", v.len()))),
        }
    }

    pub fn input_signal(&self) -> Result<SignalSpec> {
        let spec = match &self.input {
            InputConfig::Zero { channels } => SignalSpec::zero(*channels),
            InputConfig::Sinusoids { channels } => SignalSpec::Sinusoids(channels.clone()),
            InputConfig::Fourier { coeffs, period } => SignalSpec::Fourier(FourierSignal {
                coeffs: to_matrix(coeffs, "input.coeffs")?,
                period: period.unwrap_or(self.simulation.horizon),
                horizon: self.simulation.horizon,
            }),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn noise_prior(&self) -> Result<NoisePrior> {
        NoisePrior::new(self.noise.delta_w, self.noise.delta_v)
    }

    pub fn noise_period(&self) -> f64 {
        self.noise.period.unwrap_or(self.simulation.horizon)
    }

    /// Unstable scalar plant with the sinusoidal experiment on `[0, 1]`.
    pub fn scalar_example() -> Self {
        Self {
            name: Some("scalar".into()),
            seed: 1,
            plant: PlantConfig {
                a: vec![vec![vec![-1.0]]],
                b: vec![vec![vec![1.0]]],
                e: vec![vec![vec![1.0]]],
                x0: None,
            },
            filter: FilterConfig {
                lambda: vec![vec![-2.0]],
                gamma: vec![2.0],
            },
            simulation: SimulationConfig {
                horizon: 1.0,
                step: 1e-4,
            },
            input: InputConfig::Sinusoids {
                channels: vec![vec![Sinusoid {
                    amplitude: 1.0,
                    frequency: 5.0 * std::f64::consts::PI,
                    phase: 0.0,
                }]],
            },
            noise: NoiseConfig {
                delta_w: 0.8e-3,
                delta_v: 0.3e-3,
                mode: NoiseMode::Sampled,
                energy: EnergyMode::Sphere,
                max_index: 20,
                period: None,
                replay_file: None,
                gamma: Some(0.33),
                gamma_tol: default_gamma_tol(),
                gv_gain: None,
                delta: None,
            },
            synthesis: SynthesisConfig::default(),
            deployment: DeploymentConfig::default(),
            monte_carlo: None,
        }
    }

    /// Batch reactor on `[0, 3]` with per-channel sums of six sinusoids.
    pub fn batch_reactor() -> Self {
        let coeffs = PlantCoefficients::batch_reactor();
        let horizon = 3.0;
        // distinct frequency sets keep the two filtered inputs independent
        let sines = |multiples: [f64; 6]| -> Vec<Sinusoid> {
            multiples
                .iter()
                .map(|k| Sinusoid {
                    amplitude: 1.0,
                    frequency: k * std::f64::consts::PI / horizon,
                    phase: 0.0,
                })
                .collect()
        };
        Self {
            name: Some("batch_reactor".into()),
            seed: 0,
            plant: PlantConfig {
                a: coeffs.a.iter().map(from_matrix).collect(),
                b: coeffs.b.iter().map(from_matrix).collect(),
                e: coeffs.e.iter().map(from_matrix).collect(),
                x0: None,
            },
            filter: FilterConfig {
                lambda: vec![vec![0.0, -12.0], vec![1.0, -7.0]],
                gamma: vec![0.0, 1.0],
            },
            simulation: SimulationConfig {
                horizon,
                step: 1e-4,
            },
            input: InputConfig::Sinusoids {
                channels: vec![
                    sines([1.0, 3.0, 5.0, 7.0, 9.0, 11.0]),
                    sines([2.0, 4.0, 6.0, 8.0, 10.0, 12.0]),
                ],
            },
            noise: NoiseConfig {
                delta_w: 0.0,
                delta_v: 0.0,
                mode: NoiseMode::Sampled,
                energy: EnergyMode::Ball,
                max_index: 100,
                period: None,
                replay_file: None,
                gamma: Some(0.07685),
                gamma_tol: default_gamma_tol(),
                gv_gain: None,
                delta: None,
            },
            synthesis: SynthesisConfig::default(),
            deployment: DeploymentConfig::default(),
            monte_carlo: Some(MonteCarloConfig::default()),
        }
    }
}
