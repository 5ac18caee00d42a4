use std::time::Instant;

use log::{info, warn};

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, norm, Diagonal, LinearOperator};
use crate::operator::HyperelasticOperator;

use super::cg::cg_solve;
use super::line_search::{critical_point_alpha, is_inadmissible, LineSearchKind, MAX_HALVINGS};
use super::multigrid::{MultigridConfig, MultigridHierarchy};

/// Preconditioner for the Jacobian solves.
#[derive(Debug, Clone, PartialEq)]
pub enum Preconditioner {
    Multigrid(MultigridConfig),
    Jacobi,
}

/// Either a V-cycle or point Jacobi, built at the current linearization.
pub enum BuiltPreconditioner {
    Multigrid(MultigridHierarchy),
    Jacobi(Diagonal),
}

impl BuiltPreconditioner {
    pub fn build(op: &HyperelasticOperator, kind: &Preconditioner) -> Result<Self> {
        let jac = op.jacobian()?;
        Ok(match kind {
            Preconditioner::Multigrid(cfg) => BuiltPreconditioner::Multigrid(MultigridHierarchy::build(&jac, cfg)?),
            Preconditioner::Jacobi => {
                let d = jac.diagonal();
                if let Some(i) = d.iter().position(|v| !(*v > 0.0)) {
                    return Err(Error::InvalidSmoother(format!("non-positive diagonal entry {i}")));
                }
                BuiltPreconditioner::Jacobi(Diagonal(d.iter().map(|v| 1.0 / v).collect()))
            }
        })
    }

    pub fn as_operator(&self) -> &dyn LinearOperator {
        match self {
            BuiltPreconditioner::Multigrid(h) => h,
            BuiltPreconditioner::Jacobi(d) => d,
        }
    }

    pub fn bytes(&self) -> usize {
        match self {
            BuiltPreconditioner::Multigrid(h) => h.coarse_bytes(),
            BuiltPreconditioner::Jacobi(d) => d.0.len() * 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonConfig {
    pub max_iterations: usize,
    pub rtol: f64,
    pub atol: f64,
    /// Relative tolerance of each linear solve in the natural norm.
    pub linear_rtol: f64,
    pub linear_max_iterations: usize,
    pub line_search: LineSearchKind,
    pub preconditioner: Preconditioner,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            max_iterations: 50,
            rtol: 1e-8,
            atol: 1e-10,
            linear_rtol: 1e-3,
            linear_max_iterations: 1000,
            line_search: LineSearchKind::CriticalPoint,
            preconditioner: Preconditioner::Multigrid(MultigridConfig::default()),
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0 && self.linear_rtol > 0.0) {
            return Err(invalid("tolerances must be positive"));
        }
        if self.max_iterations == 0 || self.linear_max_iterations == 0 {
            return Err(invalid("iteration limits must be positive"));
        }
        Ok(())
    }
}

/// One nonlinear iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub iteration: usize,
    /// `‖F‖` after the step.
    pub residual_norm: f64,
    pub linear_iterations: usize,
    pub linear_converged: bool,
    pub condition_estimate: f64,
    pub alpha: f64,
}

/// Outcome of one nonlinear solve at a fixed load factor.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub converged: bool,
    pub initial_residual: f64,
    pub final_residual: f64,
    pub steps: Vec<StepReport>,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
}

impl SolveReport {
    pub fn iterations(&self) -> usize {
        self.steps.len()
    }
    pub fn linear_iterations(&self) -> usize {
        self.steps.iter().map(|s| s.linear_iterations).sum()
    }
    pub fn max_condition(&self) -> f64 {
        self.steps.iter().map(|s| s.condition_estimate).fold(1.0, f64::max)
    }
}

/// Takes `u ← u + α du`, storing the new state; α is halved while the
/// accepted point is inadmissible. Returns the new residual and the α used.
pub(crate) fn accept_step(
    op: &mut HyperelasticOperator,
    u: &mut [f64],
    du: &[f64],
    mut alpha: f64,
) -> Result<(Vec<f64>, f64)> {
    for _ in 0..=MAX_HALVINGS {
        let trial: Vec<f64> = u.iter().zip(du).map(|(a, b)| a + alpha * b).collect();
        match op.apply_residual(&trial) {
            Ok(f) if f.iter().all(|v| v.is_finite()) => {
                u.copy_from_slice(&trial);
                return Ok((f, alpha));
            }
            Ok(_) => {}
            Err(e) if is_inadmissible(&e) => {}
            Err(e) => return Err(e),
        }
        alpha *= 0.5;
    }
    // leave the operator linearized at the last accepted point
    op.apply_residual(u)?;
    Err(Error::StepRejected(format!("step inadmissible after {MAX_HALVINGS} halvings")))
}

/// Newton–Krylov at the operator's current load factor. Prescribed values
/// are imposed on `u` first.
pub fn newton_solve(op: &mut HyperelasticOperator, u: &mut [f64], cfg: &NewtonConfig) -> Result<SolveReport> {
    cfg.validate()?;
    if u.len() != op.num_dofs() {
        return Err(invalid("initial guess has the wrong length"));
    }
    op.lift(u);
    let mut f = op.apply_residual(u)?;
    let r0 = norm(&f);
    let mut rnorm = r0;
    let mut steps = Vec::new();
    let (mut setup, mut solve) = (0.0, 0.0);
    info!("newton step=0 residual={r0:e} load={}", op.load_factor());
    while rnorm > (cfg.rtol * r0).max(cfg.atol) && steps.len() < cfg.max_iterations {
        let t0 = Instant::now();
        let jac = op.jacobian()?;
        let pc = BuiltPreconditioner::build(op, &cfg.preconditioner)?;
        setup += t0.elapsed().as_secs_f64();
        let t1 = Instant::now();
        let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        let mut du = vec![0.0; u.len()];
        let cg = cg_solve(&jac, pc.as_operator(), &rhs, &mut du, cfg.linear_rtol, cfg.linear_max_iterations)?;
        if !cg.converged {
            warn!("newton event=linear_not_converged iterations={}", cg.iterations);
        }
        let alpha = match cfg.line_search {
            LineSearchKind::CriticalPoint => critical_point_alpha(op, u, &du, dot(&f, &du))?,
            LineSearchKind::None => 1.0,
        };
        let (fnew, alpha) = accept_step(op, u, &du, alpha)?;
        solve += t1.elapsed().as_secs_f64();
        f = fnew;
        rnorm = norm(&f);
        let step = StepReport {
            iteration: steps.len() + 1,
            residual_norm: rnorm,
            linear_iterations: cg.iterations,
            linear_converged: cg.converged,
            condition_estimate: cg.condition_estimate(),
            alpha,
        };
        info!(
            "newton step={} residual={:e} cg_its={} cond={:e} alpha={}",
            step.iteration, step.residual_norm, step.linear_iterations, step.condition_estimate, step.alpha
        );
        steps.push(step);
        if !rnorm.is_finite() {
            return Err(Error::NotConverged("residual is not finite".into()));
        }
    }
    Ok(SolveReport {
        converged: rnorm <= (cfg.rtol * r0).max(cfg.atol),
        initial_residual: r0,
        final_residual: rnorm,
        steps,
        setup_seconds: setup,
        solve_seconds: solve,
    })
}
