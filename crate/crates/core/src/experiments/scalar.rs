//! The scalar example with a membership grid over the 3-d parameter space.

use std::path::Path;

use nalgebra::DMatrix;

use super::config::ExperimentConfig;
use super::io;
use super::pipeline::{run_pipeline, write_artifacts, PipelineOutput};
use crate::error::Result;
use crate::lmi::verify_stabilization;
use crate::moments::ellipsoid_membership;

/// One grid point: `in_e` marks membership of the consistency set,
/// `in_c_complement` marks parameters the synthesized pair does not certify.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub theta: [f64; 3],
    pub in_e: bool,
    pub in_c_complement: bool,
}

#[derive(Debug, Clone)]
pub struct ScalarReport {
    pub output: PipelineOutput,
    pub grid: Vec<GridPoint>,
    pub theta_star_in_e: bool,
}

impl ScalarReport {
    pub fn delta(&self) -> f64 {
        self.output.noise.delta[(0, 0)]
    }

    /// Grid points inside the consistency set but outside the certified set.
    pub fn inclusion_violations(&self) -> usize {
        self.grid.iter().filter(|g| g.in_e && g.in_c_complement).count()
    }
}

pub const GRID_POINTS: usize = 21;

/// Runs the scalar configuration and evaluates the grid when the LMI is feasible.
pub fn run_scalar_example(cfg: &ExperimentConfig) -> Result<ScalarReport> {
    let output = run_pipeline(cfg)?;
    let cs = &output.consistency;
    let (theta_star_in_e, _) = ellipsoid_membership(cs, &output.truth.theta_star);
    let mut grid = Vec::new();
    if output.synthesis.is_feasible() && cs.regressor_dim() == 3 && cs.outputs() == 1 {
        let center = &cs.theta_hat;
        let z_inv = cs.z.clone().try_inverse().unwrap_or_else(|| DMatrix::zeros(3, 3));
        let s = cs.s_n[(0, 0)].max(0.0);
        let half: Vec<f64> = (0..3)
            .map(|i| {
                let extent = (s * z_inv[(i, i)]).sqrt();
                let reach = (output.truth.theta_star[(0, i)] - center[(0, i)]).abs();
                (1.5 * extent).max(1.2 * reach).max(1e-6)
            })
            .collect();
        let step = |i: usize, k: usize| {
            center[(0, i)] - half[i] + 2.0 * half[i] * k as f64 / (GRID_POINTS - 1) as f64
        };
        for a in 0..GRID_POINTS {
            for b in 0..GRID_POINTS {
                for c in 0..GRID_POINTS {
                    let theta = [step(0, a), step(1, b), step(2, c)];
                    let t = DMatrix::from_row_slice(1, 3, &theta);
                    let (in_e, _) = ellipsoid_membership(cs, &t);
                    let (ok, _) = verify_stabilization(&output.synthesis, &t, &output.filter);
                    grid.push(GridPoint {
                        theta,
                        in_e,
                        in_c_complement: !ok,
                    });
                }
            }
        }
    }
    Ok(ScalarReport {
        output,
        grid,
        theta_star_in_e,
    })
}

/// Pipeline artifacts plus `theta_grid.csv` with header
/// `theta_1,theta_2,theta_3,in_e,in_c_complement` and `report.csv`.
pub fn write_scalar_report(report: &ScalarReport, dir: &Path) -> Result<()> {
    write_artifacts(&report.output, dir)?;
    io::write_file(&dir.join("theta_grid.csv"), |f| {
        let mut wtr = csv::Writer::from_writer(f);
        wtr.write_record(["theta_1", "theta_2", "theta_3", "in_e", "in_c_complement"])?;
        for g in &report.grid {
            wtr.write_record([
                io::fmt_f64(g.theta[0]),
                io::fmt_f64(g.theta[1]),
                io::fmt_f64(g.theta[2]),
                u8::from(g.in_e).to_string(),
                u8::from(g.in_c_complement).to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    })?;
    io::write_file(&dir.join("report.csv"), |f| {
        let out = &report.output;
        let mut wtr = csv::Writer::from_writer(f);
        wtr.write_record([
            "delta",
            "gamma",
            "rho",
            "status",
            "theta_hat_1",
            "theta_hat_2",
            "theta_hat_3",
            "theta_star_in_e",
            "inclusion_violations",
        ])?;
        let th = &out.consistency.theta_hat;
        let cell = |j: usize| th.get((0, j)).copied().map(io::fmt_f64).unwrap_or_default();
        wtr.write_record([
            io::fmt_f64(report.delta()),
            io::fmt_f64(out.noise.gamma),
            io::fmt_f64(out.consistency.rho),
            out.synthesis.status.to_string(),
            cell(0),
            cell(1),
            cell(2),
            report.theta_star_in_e.to_string(),
            report.inclusion_violations().to_string(),
        ])?;
        wtr.flush()?;
        Ok(())
    })
}
