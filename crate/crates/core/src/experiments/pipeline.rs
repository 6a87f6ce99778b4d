//! One pass of the stabilization algorithm: initialization, filtering, gain
//! computation and simulated deployment.

use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{to_matrix, EnergyMode, ExperimentConfig, NoiseMode};
use super::io;
use crate::error::{Result, StageExt};
use crate::linalg;
use crate::lmi::{
    assemble_lmi, closed_loop_spectrum, solve_lmi_with, verify_stabilization, ClosedLoopSpectrum,
    SynthesisResult, SynthesisStatus,
};
use crate::moments::{accumulate_moments, build_consistency_set, excitation_check, ConsistencySet, DataMoments};
use crate::noise::{check_gv_norm_one, compute_delta, gamma_search, hinf_norm_state_space, GvCheck, NoisePrior};
use crate::plant::{
    build_state_space, compute_ground_truth, lambda_tilde, FilterDesign, GroundTruth, PlantCoefficients,
    StateSpacePlant,
};
use crate::sdp::ClarabelSolver;
use crate::signals::{sample_l2_ball, sample_l2_sphere, SignalSpec};
use crate::sim::{simulate_closed_loop, simulate_open_loop, FilteredData, Trajectory};

/// Offset between the process- and measurement-noise streams of one seed.
const V_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone)]
pub struct NoiseBound {
    pub prior: NoisePrior,
    pub gamma: f64,
    pub gamma_inf: f64,
    /// Whether `gamma` came from the bisection rather than the config.
    pub searched: bool,
    pub delta: DMatrix<f64>,
    pub gv_check: Option<GvCheck>,
}

/// Gain bound and `Delta` for the configured priors.
pub fn noise_bound(
    cfg: &ExperimentConfig,
    coeffs: &PlantCoefficients,
    filter: &FilterDesign,
    prior: NoisePrior,
) -> Result<NoiseBound> {
    let plant = build_state_space(coeffs);
    let lt = lambda_tilde(&filter.lambda_coeffs, coeffs.p);
    let (gamma, gamma_inf, searched) = match cfg.noise.gamma {
        Some(g) => {
            let gi = if plant.e.ncols() == 0 {
                0.0
            } else {
                hinf_norm_state_space(&lt, &plant.e, &plant.c)?
            };
            (g, gi, false)
        }
        None if plant.e.ncols() == 0 => (0.0, 0.0, false),
        None => {
            let cert = gamma_search(&lt, &plant.e, &plant.c, cfg.simulation.horizon, cfg.noise.gamma_tol)?;
            (cert.gamma, cert.gamma_inf, true)
        }
    };
    let gv_check = if coeffs.p == 1 && prior.delta_v > 0.0 {
        let check = check_gv_norm_one(coeffs, &filter.lambda)?;
        if !check.applies && cfg.noise.gv_gain.is_none() {
            log::warn!(
                "unit-norm hypothesis for G_v fails (sup = {:.6}); Delta is not certified",
                check.sup
            );
        }
        Some(check)
    } else {
        None
    };
    let delta = match &cfg.noise.delta {
        Some(d) => to_matrix(d, "noise.delta")?,
        None => compute_delta(&prior, gamma, coeffs.p, cfg.noise.gv_gain)?,
    };
    Ok(NoiseBound {
        prior,
        gamma,
        gamma_inf,
        searched,
        delta,
        gv_check,
    })
}

/// Process and measurement noise for one run.
pub fn noise_signals(
    cfg: &ExperimentConfig,
    coeffs: &PlantCoefficients,
    prior: &NoisePrior,
    seed: u64,
) -> Result<(SignalSpec, SignalSpec)> {
    match cfg.noise.mode {
        NoiseMode::Sampled => {
            let draw = match cfg.noise.energy {
                EnergyMode::Ball => sample_l2_ball,
                EnergyMode::Sphere => sample_l2_sphere,
            };
            let (j, period, horizon) = (cfg.noise.max_index, cfg.noise_period(), cfg.simulation.horizon);
            let w = if prior.delta_w > 0.0 {
                draw(coeffs.q, j, period, horizon, prior.delta_w, seed)
            } else {
                SignalSpec::zero(coeffs.q)
            };
            let v = if prior.delta_v > 0.0 {
                draw(coeffs.p, j, period, horizon, prior.delta_v, seed ^ V_STREAM)
            } else {
                SignalSpec::zero(coeffs.p)
            };
            Ok((w, v))
        }
        NoiseMode::Replay => {
            let path = cfg.noise.replay_file.as_deref().expect("validated");
            let (w, v, step) = io::read_noise_samples(path, coeffs.q, coeffs.p)?;
            Ok((
                SignalSpec::Sampled { step, values: w },
                SignalSpec::Sampled { step, values: v },
            ))
        }
    }
}

#[derive(Debug, Clone)]
pub struct Deployment {
    pub spectrum: ClosedLoopSpectrum,
    /// Lyapunov inequality with the synthesized `P` at the true parameters.
    pub lyapunov_ok: bool,
    pub realization_abscissa: f64,
    /// Noise-free closed-loop re-simulation.
    pub sim_horizon: f64,
    pub initial_norm: f64,
    pub final_norm: f64,
}

impl Deployment {
    pub fn decays(&self) -> bool {
        self.final_norm < self.initial_norm
    }
}

/// One row of a study: the quantities plotted per run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub seed: u64,
    pub level: usize,
    pub delta_w: f64,
    pub rho: f64,
    pub lambda_min_z: f64,
    pub status: SynthesisStatus,
    pub spectral_abscissa: Option<f64>,
    /// Seconds; kept out of the CSV so outputs stay byte-reproducible.
    pub wall_time: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub seed: u64,
    pub plant: StateSpacePlant,
    pub filter: FilterDesign,
    pub truth: GroundTruth,
    pub noise: NoiseBound,
    pub w: SignalSpec,
    pub v: SignalSpec,
    pub trajectory: Trajectory,
    pub filtered: FilteredData,
    pub moments: DataMoments,
    pub excitation: (bool, f64),
    pub consistency: ConsistencySet,
    pub synthesis: SynthesisResult,
    pub deployment: Option<Deployment>,
    pub wall_time: f64,
}

impl PipelineOutput {
    pub fn record(&self, level: usize) -> RunRecord {
        RunRecord {
            seed: self.seed,
            level,
            delta_w: self.noise.prior.delta_w,
            rho: self.consistency.rho,
            lambda_min_z: self.excitation.1,
            status: self.synthesis.status,
            spectral_abscissa: self.deployment.as_ref().map(|d| d.spectrum.abscissa()),
            wall_time: self.wall_time,
        }
    }

    /// `|Theta_hat - Theta*|_2`.
    pub fn estimation_error(&self) -> f64 {
        linalg::spectral_norm(&(&self.consistency.theta_hat - &self.truth.theta_star))
    }
}

/// Runs the full algorithm with the config's seed and priors.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<PipelineOutput> {
    run_pipeline_with(cfg, cfg.seed, cfg.noise_prior()?)
}

/// Initialization and filtering stages: everything up to the filtered data.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub coeffs: PlantCoefficients,
    pub plant: StateSpacePlant,
    pub filter: FilterDesign,
    pub truth: GroundTruth,
    pub noise: NoiseBound,
    pub w: SignalSpec,
    pub v: SignalSpec,
    pub trajectory: Trajectory,
    pub filtered: FilteredData,
}

pub fn prepare_experiment(cfg: &ExperimentConfig, seed: u64, prior: NoisePrior) -> Result<Experiment> {
    // Initialization
    let coeffs = cfg.plant_coefficients().stage("initialization")?;
    let plant = build_state_space(&coeffs);
    let probe = cfg
        .filter_design(coeffs.m, DMatrix::zeros(coeffs.p, coeffs.p))
        .stage("initialization")?;
    let noise = noise_bound(cfg, &coeffs, &probe, prior).stage("initialization")?;
    let filter = probe.with_delta(noise.delta.clone()).stage("initialization")?;
    let x0 = cfg.x0(&coeffs).stage("initialization")?;
    let truth = compute_ground_truth(&plant, &filter, &x0).stage("initialization")?;

    // Filtering
    let u = cfg.input_signal().stage("filtering")?;
    let (w, v) = noise_signals(cfg, &coeffs, &prior, seed).stage("filtering")?;
    let (trajectory, filtered) = simulate_open_loop(
        &plant,
        &filter,
        &u,
        &w,
        &v,
        &x0,
        cfg.simulation.step,
        cfg.simulation.horizon,
    )
    .stage("filtering")?;
    Ok(Experiment {
        coeffs,
        plant,
        filter,
        truth,
        noise,
        w,
        v,
        trajectory,
        filtered,
    })
}

pub fn run_pipeline_with(cfg: &ExperimentConfig, seed: u64, prior: NoisePrior) -> Result<PipelineOutput> {
    let start = Instant::now();
    let Experiment {
        plant,
        filter,
        truth,
        noise,
        w,
        v,
        trajectory,
        filtered,
        ..
    } = prepare_experiment(cfg, seed, prior)?;

    // Stabilizing gain computation
    let moments = accumulate_moments(&trajectory, &filtered, &filter.delta).stage("gain computation")?;
    let excitation = excitation_check(&moments);
    let consistency = build_consistency_set(&moments).stage("gain computation")?;
    let problem = assemble_lmi(&moments, &filter, cfg.synthesis.eps).stage("gain computation")?;
    let synthesis =
        solve_lmi_with(&problem, cfg.synthesis.objective, &ClarabelSolver::default()).stage("gain computation")?;

    // Control deployment
    let deployment = if synthesis.is_feasible() {
        Some(deploy(cfg, &plant, &filter, &truth, &synthesis, seed).stage("deployment")?)
    } else {
        None
    };

    Ok(PipelineOutput {
        seed,
        plant,
        filter,
        truth,
        noise,
        w,
        v,
        trajectory,
        filtered,
        moments,
        excitation,
        consistency,
        synthesis,
        deployment,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Closed-loop spectrum, Lyapunov check at the true parameters and a
/// noise-free re-simulation from random initial states.
pub fn deploy(
    cfg: &ExperimentConfig,
    plant: &StateSpacePlant,
    filter: &FilterDesign,
    truth: &GroundTruth,
    synthesis: &SynthesisResult,
    seed: u64,
) -> Result<Deployment> {
    let spectrum = closed_loop_spectrum(plant, filter, truth, &synthesis.k)?;
    let (lyapunov_ok, realization_abscissa) = verify_stabilization(synthesis, &truth.theta_star, filter);
    let abscissa = spectrum.abscissa();
    let (mut sim_horizon, mut initial_norm, mut final_norm) = (0.0, f64::NAN, f64::NAN);
    if !cfg.deployment.skip && abscissa < 0.0 {
        let a_cl = crate::sim::closed_loop_matrix(plant, filter, &synthesis.k)?;
        let radius = linalg::eigenvalues(&a_cl)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        // keep h |lambda| inside the RK4 stability region
        let step = cfg.deployment.step.min(1.0 / radius.max(1e-12));
        let horizon = cfg.deployment.horizon.unwrap_or(20.0 / abscissa.abs()).min(1e3);
        let steps = (horizon / step).ceil().max(1.0);
        let step = horizon / steps;
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(V_STREAM.rotate_left(17)));
        let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
        let x0 = DVector::from_fn(plant.state_dim(), |_, _| normal());
        let xc0 = DVector::from_fn(filter.mu, |_, _| normal());
        let traj = simulate_closed_loop(
            plant,
            filter,
            &synthesis.k,
            &x0,
            &xc0,
            &SignalSpec::zero(plant.q),
            &SignalSpec::zero(plant.p),
            step,
            horizon,
        )?;
        let hidden = traj.hidden.as_ref().expect("simulated trajectories carry hidden signals");
        let xc = hidden.xc.as_ref().expect("closed loop records x_c");
        let last = traj.len() - 1;
        let norm_at = |k: usize| (hidden.x.row(k).norm_squared() + xc.row(k).norm_squared()).sqrt();
        sim_horizon = horizon;
        initial_norm = norm_at(0);
        final_norm = norm_at(last);
    }
    Ok(Deployment {
        spectrum,
        lyapunov_ok,
        realization_abscissa,
        sim_horizon,
        initial_norm,
        final_norm,
    })
}

/// Writes the trajectory, filtered data, moments, synthesis and verification
/// CSVs of one pipeline run into `dir`.
pub fn write_artifacts(out: &PipelineOutput, dir: &Path) -> Result<()> {
    io::write_file(&dir.join("trajectory.csv"), |f| io::write_trajectory(&out.trajectory, f))?;
    io::write_file(&dir.join("filtered.csv"), |f| io::write_filtered(&out.filtered, f))?;
    io::write_file(&dir.join("moments.csv"), |f| out.moments.write_csv(f))?;
    io::write_file(&dir.join("noise_bound.csv"), |f| write_noise_bound(&out.noise, out.trajectory.grid.horizon, f))?;
    io::write_file(&dir.join("synthesis.csv"), |f| write_synthesis_blocks(&out.synthesis, f))?;
    io::write_file(&dir.join("synthesis_summary.csv"), |f| write_synthesis_summary(&out.synthesis, f))?;
    io::write_file(&dir.join("verification.csv"), |f| {
        write_verification(out.deployment.as_ref(), out.consistency.rho, out.estimation_error(), f)
    })?;
    if let Some(d) = &out.deployment {
        io::write_file(&dir.join("closed_loop_eigenvalues.csv"), |f| {
            write_eigenvalues(&d.spectrum.eigenvalues, f)
        })?;
    }
    Ok(())
}

/// `gamma_inf,gamma,searched,horizon,delta_w,delta_v,delta_max`.
pub fn write_noise_bound<W: std::io::Write>(nb: &NoiseBound, horizon: f64, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["gamma_inf", "gamma", "searched", "horizon", "delta_w", "delta_v", "delta_max"])?;
    wtr.write_record([
        io::fmt_f64(nb.gamma_inf),
        io::fmt_f64(nb.gamma),
        nb.searched.to_string(),
        io::fmt_f64(horizon),
        io::fmt_f64(nb.prior.delta_w),
        io::fmt_f64(nb.prior.delta_v),
        io::fmt_f64(linalg::lambda_max(&nb.delta)),
    ])?;
    wtr.flush()?;
    Ok(())
}

/// Labelled blocks `K`, `P`, `Q`.
pub fn write_synthesis_blocks<W: std::io::Write>(s: &SynthesisResult, out: W) -> Result<()> {
    io::write_blocks(&[("K", &s.k), ("P", &s.p), ("Q", &s.q)], out)
}

/// `status,lmi_margin,p_margin,eps,cond_p,margin_opt,solver_status,iterations`.
pub fn write_synthesis_summary<W: std::io::Write>(s: &SynthesisResult, out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record([
        "status",
        "lmi_margin",
        "p_margin",
        "eps",
        "cond_p",
        "margin_opt",
        "solver_status",
        "iterations",
    ])?;
    wtr.write_record([
        s.status.to_string(),
        io::fmt_f64(s.lmi_margin),
        io::fmt_f64(s.p_margin),
        io::fmt_f64(s.eps),
        io::fmt_f64(s.cond_p),
        s.diagnostics.margin_opt.map(io::fmt_f64).unwrap_or_default(),
        s.diagnostics.detail.clone(),
        s.diagnostics.iterations.to_string(),
    ])?;
    wtr.flush()?;
    Ok(())
}

/// `rho,theta_error,spectral_abscissa,decomposition_error,lyapunov_ok,sim_horizon,initial_norm,final_norm`.
pub fn write_verification<W: std::io::Write>(
    d: Option<&Deployment>,
    rho: f64,
    theta_error: f64,
    out: W,
) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record([
        "rho",
        "theta_error",
        "spectral_abscissa",
        "decomposition_error",
        "lyapunov_ok",
        "sim_horizon",
        "initial_norm",
        "final_norm",
    ])?;
    let mut row = vec![io::fmt_f64(rho), io::fmt_f64(theta_error)];
    match d {
        Some(d) => row.extend([
            io::fmt_f64(d.spectrum.abscissa()),
            io::fmt_f64(d.spectrum.decomposition_error),
            d.lyapunov_ok.to_string(),
            io::fmt_f64(d.sim_horizon),
            io::fmt_f64(d.initial_norm),
            io::fmt_f64(d.final_norm),
        ]),
        None => row.extend(std::iter::repeat_n(String::new(), 6)),
    }
    wtr.write_record(&row)?;
    wtr.flush()?;
    Ok(())
}

/// `re,im`.
pub fn write_eigenvalues<W: std::io::Write>(eig: &[linalg::Complex64], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["re", "im"])?;
    for z in eig {
        wtr.write_record([io::fmt_f64(z.re), io::fmt_f64(z.im)])?;
    }
    wtr.flush()?;
    Ok(())
}
