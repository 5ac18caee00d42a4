use log::{info, warn};

use crate::error::{invalid, Error, Result};
use crate::operator::HyperelasticOperator;

use super::lbfgs::{lbfgs_solve, LbfgsConfig};
use super::newton::{newton_solve, NewtonConfig, SolveReport};

/// Bisections allowed for a failed load step.
pub const MAX_BISECTIONS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum NonlinearSolver {
    Newton(NewtonConfig),
    Lbfgs(LbfgsConfig),
}

impl NonlinearSolver {
    pub fn solve(&self, op: &mut HyperelasticOperator, u: &mut [f64]) -> Result<SolveReport> {
        match self {
            NonlinearSolver::Newton(c) => newton_solve(op, u, c),
            NonlinearSolver::Lbfgs(c) => lbfgs_solve(op, u, c),
        }
    }
}

/// Per-load-step results.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationReport {
    pub load_factors: Vec<f64>,
    pub solves: Vec<SolveReport>,
}

impl ContinuationReport {
    pub fn nonlinear_iterations(&self) -> usize {
        self.solves.iter().map(|s| s.iterations()).sum()
    }
    pub fn linear_iterations(&self) -> usize {
        self.solves.iter().map(|s| s.linear_iterations()).sum()
    }
    pub fn max_condition(&self) -> f64 {
        self.solves.iter().map(|s| s.max_condition()).fold(1.0, f64::max)
    }
    pub fn setup_seconds(&self) -> f64 {
        self.solves.iter().map(|s| s.setup_seconds).sum()
    }
    pub fn solve_seconds(&self) -> f64 {
        self.solves.iter().map(|s| s.solve_seconds).sum()
    }
}

/// Solves at `t_k = k / steps`, warm-starting each step from the previous
/// solution. A failed step is bisected up to three times.
pub fn solve_with_continuation(
    op: &mut HyperelasticOperator,
    solver: &NonlinearSolver,
    steps: usize,
) -> Result<(Vec<f64>, ContinuationReport)> {
    if steps == 0 {
        return Err(invalid("load steps must be at least 1"));
    }
    let mut u = vec![0.0; op.num_dofs()];
    let mut report = ContinuationReport { load_factors: Vec::new(), solves: Vec::new() };
    let mut t_prev = 0.0;
    for k in 1..=steps {
        let t = k as f64 / steps as f64;
        advance(op, solver, &mut u, t_prev, t, 0, &mut report)?;
        t_prev = t;
    }
    Ok((u, report))
}

fn advance(
    op: &mut HyperelasticOperator,
    solver: &NonlinearSolver,
    u: &mut Vec<f64>,
    t_from: f64,
    t_to: f64,
    depth: usize,
    report: &mut ContinuationReport,
) -> Result<()> {
    let saved = u.clone();
    op.set_load_factor(t_to);
    let outcome = solver.solve(op, u);
    let failure = match outcome {
        Ok(r) if r.converged => {
            info!("continuation load={t_to} iterations={} residual={:e}", r.iterations(), r.final_residual);
            report.load_factors.push(t_to);
            report.solves.push(r);
            return Ok(());
        }
        Ok(r) => Error::NotConverged(format!(
            "load {t_to}: residual {:e} after {} iterations",
            r.final_residual,
            r.iterations()
        )),
        Err(e) => e,
    };
    u.copy_from_slice(&saved);
    if depth == MAX_BISECTIONS {
        op.set_load_factor(t_from);
        return Err(failure);
    }
    let mid = 0.5 * (t_from + t_to);
    warn!("continuation event=bisect from={t_from} to={t_to} reason=\"{failure}\"");
    advance(op, solver, u, t_from, mid, depth + 1, report)?;
    advance(op, solver, u, mid, t_to, depth + 1, report)
}
