//! Monte-Carlo study of LMI feasibility against the process-noise level.

use std::path::Path;

use nalgebra::DMatrix;

use super::config::{ExperimentConfig, MonteCarloConfig};
use super::io;
use super::pipeline::{run_pipeline_with, RunRecord};
use crate::error::{Error, Result};
use crate::lmi::{assemble_lmi, solve_lmi_with, SynthesisStatus};
use crate::noise::NoisePrior;
use crate::parallel::{map_indexed, Workers};
use crate::sdp::ClarabelSolver;

/// Outcome of the noise-free pilot used to place the levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pilot {
    /// Largest `c` for which `Delta = c I` keeps the noise-free LMI feasible.
    pub critical_scale: f64,
    pub gamma: f64,
    /// `critical_scale / gamma^2`.
    pub critical_delta_w: f64,
}

/// Locates the feasibility threshold of `Delta = c I` on noise-free data by
/// geometric bracketing and log-scale bisection.
pub fn pilot(cfg: &ExperimentConfig) -> Result<Pilot> {
    let out = run_pipeline_with(cfg, cfg.seed, NoisePrior::new(0.0, 0.0)?)?;
    if !out.synthesis.is_feasible() {
        return Err(Error::Solver(format!(
            "noise-free pilot is {}; cannot place levels",
            out.synthesis.status
        )));
    }
    let p = out.moments.outputs();
    let solver = ClarabelSolver::default();
    let feasible = |c: f64| -> Result<bool> {
        let m = out.moments.with_delta(DMatrix::identity(p, p) * c)?;
        let prob = assemble_lmi(&m, &out.filter, cfg.synthesis.eps)?;
        Ok(solve_lmi_with(&prob, cfg.synthesis.objective, &solver)?.is_feasible())
    };
    let mut lo = 0.0;
    let mut hi = 1e-12 * (1.0 + out.moments.y.trace());
    let mut guard = 0;
    while feasible(hi)? {
        lo = hi;
        hi *= 10.0;
        guard += 1;
        if guard > 60 {
            return Err(Error::Solver("pilot threshold not bracketed".into()));
        }
    }
    for _ in 0..40 {
        let mid = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * hi };
        if feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
        if lo > 0.0 && hi / lo < 1.0 + 1e-4 {
            break;
        }
    }
    let gamma = out.noise.gamma;
    if !(gamma > 0.0) {
        return Err(Error::Config("pilot needs a positive gain bound".into()));
    }
    Ok(Pilot {
        critical_scale: lo,
        gamma,
        critical_delta_w: lo / (gamma * gamma),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSummary {
    pub level: usize,
    pub delta_w: f64,
    pub rho_q1: f64,
    pub rho_median: f64,
    pub rho_q3: f64,
    pub feasible_pct: f64,
    pub failure_pct: f64,
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    pub pilot: Option<Pilot>,
    pub levels: Vec<f64>,
    pub runs: Vec<RunRecord>,
    pub summary: Vec<LevelSummary>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(levels: &[f64], runs: &[RunRecord]) -> Vec<LevelSummary> {
    levels
        .iter()
        .enumerate()
        .map(|(level, &delta_w)| {
            let rows: Vec<&RunRecord> = runs.iter().filter(|r| r.level == level).collect();
            let mut rho: Vec<f64> = rows.iter().map(|r| r.rho).filter(|r| r.is_finite()).collect();
            rho.sort_by(f64::total_cmp);
            let total = rows.len().max(1) as f64;
            let count = |s: SynthesisStatus| rows.iter().filter(|r| r.status == s).count() as f64;
            LevelSummary {
                level,
                delta_w,
                rho_q1: quantile(&rho, 0.25),
                rho_median: quantile(&rho, 0.5),
                rho_q3: quantile(&rho, 0.75),
                feasible_pct: 100.0 * count(SynthesisStatus::Feasible) / total,
                failure_pct: 100.0 * count(SynthesisStatus::NumericalFailure) / total,
            }
        })
        .collect()
}

/// Runs one Monte-Carlo sample; errors become `numerical_failure` records.
pub fn run_once(cfg: &ExperimentConfig, level: usize, delta_w: f64, seed: u64) -> RunRecord {
    let prior = NoisePrior {
        delta_w,
        delta_v: cfg.noise.delta_v,
    };
    match run_pipeline_with(cfg, seed, prior) {
        Ok(out) => out.record(level),
        Err(e) => {
            log::warn!("run with seed {seed} at level {level} failed: {e}");
            RunRecord {
                seed,
                level,
                delta_w,
                rho: f64::NAN,
                lambda_min_z: f64::NAN,
                status: SynthesisStatus::NumericalFailure,
                spectral_abscissa: None,
                wall_time: 0.0,
            }
        }
    }
}

/// Sweeps the configured levels (or pilot-chosen ones). Run `i` overall uses
/// seed `base_seed + i`; records are merged in index order.
pub fn run_batch_reactor_study(cfg: &ExperimentConfig, workers: Workers) -> Result<StudyResult> {
    let mc = cfg.monte_carlo.clone().unwrap_or_default();
    let (pilot, levels) = match &mc.levels {
        Some(levels) => (None, levels.clone()),
        None => {
            let p = pilot(cfg)?;
            let levels = mc.auto_factors.iter().map(|f| f * p.critical_delta_w).collect();
            (Some(p), levels)
        }
    };
    run_levels(cfg, &mc, pilot, levels, workers)
}

pub fn run_levels(
    cfg: &ExperimentConfig,
    mc: &MonteCarloConfig,
    pilot: Option<Pilot>,
    levels: Vec<f64>,
    workers: Workers,
) -> Result<StudyResult> {
    if levels.is_empty() {
        return Err(Error::Config("no Monte-Carlo levels".into()));
    }
    let per = mc.runs_per_level;
    let runs = map_indexed(levels.len() * per, workers, |i| {
        let level = i / per;
        run_once(cfg, level, levels[level], mc.base_seed.wrapping_add(i as u64))
    });
    let summary = summarize(&levels, &runs);
    Ok(StudyResult {
        pilot,
        levels,
        runs,
        summary,
    })
}

/// `runs.csv` (`level,delta_w,run,seed,rho,lambda_min_z,status,spectral_abscissa`),
/// `summary.csv` (`level,delta_w,rho_q1,rho_median,rho_q3,feasible_pct,failure_pct`)
/// and, when levels were auto-chosen, `pilot.csv`.
pub fn write_study(study: &StudyResult, dir: &Path) -> Result<()> {
    io::write_file(&dir.join("runs.csv"), |f| {
        let mut wtr = csv::Writer::from_writer(f);
        wtr.write_record([
            "level",
            "delta_w",
            "run",
            "seed",
            "rho",
            "lambda_min_z",
            "status",
            "spectral_abscissa",
        ])?;
        let mut per_level = vec![0usize; study.levels.len()];
        for r in &study.runs {
            let run = per_level[r.level];
            per_level[r.level] += 1;
            wtr.write_record([
                r.level.to_string(),
                io::fmt_f64(r.delta_w),
                run.to_string(),
                r.seed.to_string(),
                io::fmt_f64(r.rho),
                io::fmt_f64(r.lambda_min_z),
                r.status.to_string(),
                r.spectral_abscissa.map(io::fmt_f64).unwrap_or_default(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    })?;
    io::write_file(&dir.join("summary.csv"), |f| {
        let mut wtr = csv::Writer::from_writer(f);
        wtr.write_record([
            "level",
            "delta_w",
            "rho_q1",
            "rho_median",
            "rho_q3",
            "feasible_pct",
            "failure_pct",
        ])?;
        for s in &study.summary {
            wtr.write_record([
                s.level.to_string(),
                io::fmt_f64(s.delta_w),
                io::fmt_f64(s.rho_q1),
                io::fmt_f64(s.rho_median),
                io::fmt_f64(s.rho_q3),
                io::fmt_f64(s.feasible_pct),
                io::fmt_f64(s.failure_pct),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    })?;
    if let Some(p) = &study.pilot {
        io::write_file(&dir.join("pilot.csv"), |f| {
            let mut wtr = csv::Writer::from_writer(f);
            wtr.write_record(["critical_scale", "gamma", "critical_delta_w"])?;
            wtr.write_record([
                io::fmt_f64(p.critical_scale),
                io::fmt_f64(p.gamma),
                io::fmt_f64(p.critical_delta_w),
            ])?;
            wtr.flush()?;
            Ok(())
        })?;
    }
    Ok(())
}
