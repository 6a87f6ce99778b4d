use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use datastab::experiments::config::MonteCarloConfig;
use datastab::experiments::pipeline::{
    deploy, noise_bound, prepare_experiment, write_eigenvalues, write_noise_bound, write_synthesis_blocks,
    write_synthesis_summary, write_verification,
};
use datastab::experiments::{io, reactor, run_scalar_example, write_scalar_report, ExperimentConfig};
use datastab::lmi::{assemble_lmi, solve_lmi_with, SolverDiagnostics, SynthesisResult, SynthesisStatus};
use datastab::moments::{accumulate_moments, build_consistency_set, excitation_check, DataMoments};
use datastab::noise::{dre_solve, DreOptions};
use datastab::parallel::Workers;
use datastab::plant::{build_state_space, compute_ground_truth, lambda_tilde};
use datastab::sdp::ClarabelSolver;

#[derive(Parser)]
#[command(name = "datastab", version, about = "Data-driven output-feedback stabilization from noisy input-output data")]
struct Cli {
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Built-in configuration used when --config is absent.
    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,
    /// Overrides the configured seed (the base seed for studies).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for Monte-Carlo runs.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Scalar,
    Reactor,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the open-loop experiment and the filter; writes trajectory.csv and filtered.csv.
    Simulate,
    /// Gain bound and Delta; writes noise_bound.csv and dre_trace.csv.
    NoiseBound,
    /// Simulate and accumulate moments; writes moments.csv and consistency.csv.
    Moments,
    /// Solve the LMI from a moments file; writes synthesis.csv and synthesis_summary.csv.
    Synthesize {
        #[arg(long)]
        moments: PathBuf,
    },
    /// Check a synthesized gain against the true plant; writes verification.csv.
    Verify {
        #[arg(long)]
        synthesis: PathBuf,
    },
    /// Full pipeline on the scalar example plus the parameter-space grid.
    ScalarExample,
    /// Monte-Carlo feasibility study on the batch reactor.
    ReactorStudy {
        #[arg(long)]
        runs_per_level: Option<usize>,
        /// Explicit delta_w levels (comma separated); auto-chosen otherwise.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
    },
}

fn load_config(cli: &Cli, fallback: Option<Preset>) -> Result<ExperimentConfig> {
    let mut cfg = match (&cli.config, cli.preset.or(fallback)) {
        (Some(path), _) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        (None, Some(Preset::Scalar)) => ExperimentConfig::scalar_example(),
        (None, Some(Preset::Reactor)) => ExperimentConfig::batch_reactor(),
        (None, None) => bail!("pass --config <path> or --preset scalar|reactor"),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        if let Some(mc) = cfg.monte_carlo.as_mut() {
            mc.base_seed = seed;
        }
    }
    Ok(cfg)
}

fn write(path: &Path, f: impl FnOnce(&mut std::io::BufWriter<File>) -> datastab::Result<()>) -> Result<()> {
    io::write_file(path, f).with_context(|| format!("writing {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let out = cli.out.clone();
    match &cli.command {
        Command::Simulate => {
            let cfg = load_config(&cli, None)?;
            let exp = prepare_experiment(&cfg, cfg.seed, cfg.noise_prior()?)?;
            write(&out.join("trajectory.csv"), |f| io::write_trajectory(&exp.trajectory, f))?;
            write(&out.join("filtered.csv"), |f| io::write_filtered(&exp.filtered, f))?;
        }
        Command::NoiseBound => {
            let cfg = load_config(&cli, None)?;
            let coeffs = cfg.plant_coefficients()?;
            let filter = cfg.filter_design(coeffs.m, DMatrix::zeros(coeffs.p, coeffs.p))?;
            let nb = noise_bound(&cfg, &coeffs, &filter, cfg.noise_prior()?)?;
            println!("gamma_inf = {:.6e}", nb.gamma_inf);
            println!("gamma     = {:.6e}", nb.gamma);
            println!("Delta     = {}", nb.delta);
            write(&out.join("noise_bound.csv"), |f| write_noise_bound(&nb, cfg.simulation.horizon, f))?;
            let plant = build_state_space(&coeffs);
            let lt = lambda_tilde(&filter.lambda_coeffs, coeffs.p);
            let opts = DreOptions {
                trace_every: 100,
                ..DreOptions::default()
            };
            let trace = if nb.gamma > 0.0 {
                dre_solve(&lt, &plant.e, &plant.c, nb.gamma, cfg.simulation.horizon, opts).trace
            } else {
                Vec::new()
            };
            write(&out.join("dre_trace.csv"), |f| io::write_dre_trace(&trace, f))?;
        }
        Command::Moments => {
            let cfg = load_config(&cli, None)?;
            let exp = prepare_experiment(&cfg, cfg.seed, cfg.noise_prior()?)?;
            let m = accumulate_moments(&exp.trajectory, &exp.filtered, &exp.filter.delta)?;
            write(&out.join("moments.csv"), |f| m.write_csv(f))?;
            let (excited, lmin) = excitation_check(&m);
            println!("lambda_min(Z) = {lmin:.6e} (excited: {excited})");
            if excited {
                let cs = build_consistency_set(&m)?;
                println!("rho = {:.6e}", cs.rho);
                write(&out.join("consistency.csv"), |f| {
                    io::write_blocks(
                        &[("Theta_hat", &cs.theta_hat), ("S_N", &cs.s_n), ("N", &cs.n_matrix)],
                        f,
                    )
                })?;
            }
        }
        Command::Synthesize { moments } => {
            let cfg = load_config(&cli, None)?;
            let file = File::open(moments).with_context(|| format!("opening {}", moments.display()))?;
            let m = DataMoments::read_csv(BufReader::new(file))?;
            let coeffs = cfg.plant_coefficients()?;
            let filter = cfg.filter_design(coeffs.m, m.delta.clone())?;
            let prob = assemble_lmi(&m, &filter, cfg.synthesis.eps)?;
            let res = solve_lmi_with(&prob, cfg.synthesis.objective, &ClarabelSolver::default())?;
            println!("status = {}", res.status);
            if res.is_feasible() {
                println!("K = {}", res.k);
            }
            write(&out.join("synthesis.csv"), |f| write_synthesis_blocks(&res, f))?;
            write(&out.join("synthesis_summary.csv"), |f| write_synthesis_summary(&res, f))?;
        }
        Command::Verify { synthesis } => {
            let cfg = load_config(&cli, None)?;
            let file = File::open(synthesis).with_context(|| format!("opening {}", synthesis.display()))?;
            let blocks = io::read_blocks(BufReader::new(file))?;
            let (Some(k), Some(p)) = (blocks.get("K"), blocks.get("P")) else {
                bail!("{} must contain K and P blocks", synthesis.display());
            };
            let coeffs = cfg.plant_coefficients()?;
            let plant = build_state_space(&coeffs);
            let filter = cfg.filter_design(coeffs.m, DMatrix::zeros(coeffs.p, coeffs.p))?;
            let truth = compute_ground_truth(&plant, &filter, &cfg.x0(&coeffs)?)?;
            let res = SynthesisResult {
                status: SynthesisStatus::Feasible,
                p: p.clone(),
                q: blocks.get("Q").cloned().unwrap_or_else(|| k * p),
                k: k.clone(),
                lmi_margin: f64::NAN,
                p_margin: f64::NAN,
                cond_p: f64::NAN,
                eps: f64::NAN,
                diagnostics: SolverDiagnostics {
                    detail: "loaded".into(),
                    iterations: 0,
                    objective: f64::NAN,
                    primal_residual: f64::NAN,
                    dual_residual: f64::NAN,
                    margin_opt: None,
                },
            };
            let d = deploy(&cfg, &plant, &filter, &truth, &res, cfg.seed)?;
            println!("spectral abscissa = {:.6e}", d.spectrum.abscissa());
            println!("Lyapunov check at true parameters: {}", d.lyapunov_ok);
            // rho and the estimation error need data, so they are left as NaN
            write(&out.join("verification.csv"), |f| write_verification(Some(&d), f64::NAN, f64::NAN, f))?;
            write(&out.join("closed_loop_eigenvalues.csv"), |f| write_eigenvalues(&d.spectrum.eigenvalues, f))?;
        }
        Command::ScalarExample => {
            let cfg = load_config(&cli, Some(Preset::Scalar))?;
            let report = run_scalar_example(&cfg)?;
            let o = &report.output;
            println!("Delta = {:.6e}", report.delta());
            println!("Theta_hat = {}", o.consistency.theta_hat);
            println!("rho = {:.6e}, status = {}", o.consistency.rho, o.synthesis.status);
            if let Some(d) = &o.deployment {
                println!("K = {}", o.synthesis.k);
                for z in &d.spectrum.eigenvalues {
                    println!("  eig {:+.4} {:+.4}i", z.re, z.im);
                }
            }
            println!(
                "grid points: {}, inclusion violations: {}",
                report.grid.len(),
                report.inclusion_violations()
            );
            write_scalar_report(&report, &out)?;
        }
        Command::ReactorStudy { runs_per_level, levels } => {
            let mut cfg = load_config(&cli, Some(Preset::Reactor))?;
            let mc = cfg.monte_carlo.get_or_insert_with(MonteCarloConfig::default);
            if let Some(r) = runs_per_level {
                mc.runs_per_level = *r;
            }
            if let Some(l) = levels {
                mc.levels = Some(l.clone());
            }
            cfg.validate()?;
            let study = reactor::run_batch_reactor_study(&cfg, Workers(cli.workers))?;
            if let Some(p) = &study.pilot {
                println!("pilot: critical Delta scale {:.4e}, delta_w* = {:.4e}", p.critical_scale, p.critical_delta_w);
            }
            println!("level  delta_w     rho_median  feasible%  failure%");
            for s in &study.summary {
                println!(
                    "{:5}  {:.4e}  {:.4e}  {:8.1}  {:8.1}",
                    s.level, s.delta_w, s.rho_median, s.feasible_pct, s.failure_pct
                );
            }
            reactor::write_study(&study, &out)?;
        }
    }
    Ok(())
}
