use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use log::info;

use super::config::ProblemConfig;
use super::study::StudyRow;
use super::{ensure_dir, io_err, write_rows, write_text, HarnessError, RunOptions};
use crate::material::Physics;
use crate::operator::{Discretization, HyperelasticOperator};
use crate::solver::{solve_with_continuation, ContinuationReport};

/// Builds the discretized operator described by `cfg`.
pub fn build_operator(cfg: &ProblemConfig) -> crate::Result<HyperelasticOperator> {
    let q = cfg.quadrature.unwrap_or(cfg.order + 1);
    let disc = Discretization::new(cfg.extents, cfg.counts, cfg.order, q, &cfg.boundary_conditions())?;
    let physics = Physics::new(cfg.material()?, cfg.representation);
    HyperelasticOperator::with_geometry_order(disc, physics, cfg.body_force, cfg.geometry_order.unwrap_or(cfg.order))
}

/// Result of one configured solve.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub displacement: Vec<f64>,
    pub report: ContinuationReport,
    pub psi: f64,
    pub dofs: usize,
    pub bytes_per_dof: f64,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
}

impl SolveOutcome {
    pub fn row(&self, case_id: &str, order: usize, refinement: usize, opts: &RunOptions) -> StudyRow {
        let mut row = StudyRow::new(case_id, "matrix-free", order, refinement, self.dofs);
        row.psi = Some(self.psi);
        row.newton_its = Some(self.report.nonlinear_iterations());
        row.cg_its = Some(self.report.linear_iterations());
        row.cond_max_estimate = Some(self.report.max_condition());
        row.bytes_per_dof = Some(self.bytes_per_dof);
        row.set_timing(self.setup_seconds, self.solve_seconds, self.dofs as f64, opts);
        row
    }
}

/// Runs load continuation for `cfg` without writing artifacts.
pub fn solve_problem(cfg: &ProblemConfig) -> Result<(HyperelasticOperator, SolveOutcome), HarnessError> {
    let t0 = Instant::now();
    let mut op = build_operator(cfg).map_err(|e| HarnessError::solver("setup", e))?;
    let build_seconds = t0.elapsed().as_secs_f64();
    info!("setup name={} dofs={} elements={} order={}", cfg.name, op.num_dofs(), op.discretization().num_elements(), cfg.order);
    let solver = cfg.nonlinear_solver();
    let (u, report) =
        solve_with_continuation(&mut op, &solver, cfg.load_steps).map_err(|e| HarnessError::solver("solve", e))?;
    let psi = op.total_strain_energy(&u).map_err(|e| HarnessError::solver("energy", e))?;
    let bytes_per_dof = match op.jacobian() {
        Ok(j) => j.bytes_per_dof(),
        Err(_) => 0.0,
    };
    let outcome = SolveOutcome {
        dofs: op.num_dofs(),
        displacement: u,
        psi,
        bytes_per_dof,
        setup_seconds: build_seconds + report.setup_seconds(),
        solve_seconds: report.solve_seconds(),
        report,
    };
    info!(
        "summary name={} dofs={} psi={:e} newton_its={} cg_its={}",
        cfg.name,
        outcome.dofs,
        outcome.psi,
        outcome.report.nonlinear_iterations(),
        outcome.report.linear_iterations()
    );
    Ok((op, outcome))
}

/// `solve` command: writes `summary.csv`, `iterations.log` and optionally
/// `solution.vtk` into `output`.
pub fn run_solve(cfg: &ProblemConfig, output: &Path, opts: &RunOptions) -> Result<SolveOutcome, HarnessError> {
    ensure_dir(output)?;
    let (op, outcome) = solve_problem(cfg)?;
    write_rows(&output.join("summary.csv"), &[outcome.row(&cfg.name, cfg.order, 1, opts)])?;
    let mut log = String::new();
    for (t, s) in outcome.report.load_factors.iter().zip(&outcome.report.solves) {
        for st in &s.steps {
            let _ = writeln!(
                log,
                "load={t} step={} residual={:e} cg_its={} cond={:e} alpha={}",
                st.iteration, st.residual_norm, st.linear_iterations, st.condition_estimate, st.alpha
            );
        }
        let _ = writeln!(log, "load={t} converged={} residual={:e}", s.converged, s.final_residual);
    }
    write_text(&output.join("iterations.log"), &log)?;
    if cfg.write_vtk {
        let path = output.join("solution.vtk");
        let f = std::fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        crate::vtk::write_vtk(std::io::BufWriter::new(f), op.discretization().mesh(), Some(&outcome.displacement), &cfg.name)
            .map_err(|e| io_err(&path, e))?;
    }
    Ok(outcome)
}
