use std::collections::VecDeque;
use std::time::Instant;

use log::info;

use crate::error::{invalid, Result};
use crate::linalg::{axpy, dot, norm};
use crate::operator::HyperelasticOperator;

use super::line_search::{critical_point_alpha, LineSearchKind};
use super::newton::{accept_step, BuiltPreconditioner, Preconditioner, SolveReport, StepReport};
use super::multigrid::MultigridConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsConfig {
    /// Number of stored `(s, y)` pairs.
    pub memory: usize,
    pub max_iterations: usize,
    pub rtol: f64,
    pub atol: f64,
    /// Rebuild the initial inverse Hessian every this many iterations.
    pub refresh_interval: usize,
    pub line_search: LineSearchKind,
    pub preconditioner: Preconditioner,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            memory: 5,
            max_iterations: 200,
            rtol: 1e-8,
            atol: 1e-10,
            refresh_interval: 10,
            line_search: LineSearchKind::CriticalPoint,
            preconditioner: Preconditioner::Multigrid(MultigridConfig::default()),
        }
    }
}

/// Two-loop recursion with `h0` as the initial inverse Hessian.
fn two_loop(
    g: &[f64],
    pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    h0: &dyn crate::linalg::LinearOperator,
) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut a = vec![0.0; pairs.len()];
    for (i, (s, y, rho)) in pairs.iter().enumerate().rev() {
        a[i] = rho * dot(s, &q);
        axpy(-a[i], y, &mut q);
    }
    let mut r = vec![0.0; g.len()];
    h0.apply(&q, &mut r);
    for (i, (s, y, rho)) in pairs.iter().enumerate() {
        let b = rho * dot(y, &r);
        axpy(a[i] - b, s, &mut r);
    }
    r
}

/// Limited-memory BFGS on the potential energy at the current load factor.
pub fn lbfgs_solve(op: &mut HyperelasticOperator, u: &mut [f64], cfg: &LbfgsConfig) -> Result<SolveReport> {
    if !(cfg.rtol > 0.0 && cfg.atol > 0.0) || cfg.max_iterations == 0 || cfg.refresh_interval == 0 {
        return Err(invalid("L-BFGS tolerances and intervals must be positive"));
    }
    if u.len() != op.num_dofs() {
        return Err(invalid("initial guess has the wrong length"));
    }
    op.lift(u);
    let mut g = op.apply_residual(u)?;
    let r0 = norm(&g);
    let mut rnorm = r0;
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut steps = Vec::new();
    let (mut setup, mut solve) = (0.0, 0.0);
    let mut h0: Option<BuiltPreconditioner> = None;
    info!("lbfgs step=0 residual={r0:e} load={}", op.load_factor());
    while rnorm > (cfg.rtol * r0).max(cfg.atol) && steps.len() < cfg.max_iterations {
        if h0.is_none() || steps.len() % cfg.refresh_interval == 0 {
            let t0 = Instant::now();
            h0 = Some(BuiltPreconditioner::build(op, &cfg.preconditioner)?);
            setup += t0.elapsed().as_secs_f64();
        }
        let t1 = Instant::now();
        let m = h0.as_ref().unwrap().as_operator();
        let mut d: Vec<f64> = two_loop(&g, &pairs, m).iter().map(|v| -v).collect();
        let mut g0 = dot(&g, &d);
        if g0 >= 0.0 {
            pairs.clear();
            d = two_loop(&g, &pairs, m).iter().map(|v| -v).collect();
            g0 = dot(&g, &d);
        }
        let alpha = match cfg.line_search {
            LineSearchKind::CriticalPoint => critical_point_alpha(op, u, &d, g0)?,
            LineSearchKind::None => 1.0,
        };
        let (gnew, alpha) = accept_step(op, u, &d, alpha)?;
        let s: Vec<f64> = d.iter().map(|v| alpha * v).collect();
        let y: Vec<f64> = gnew.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if cfg.memory > 0 && sy > 0.0 {
            if pairs.len() == cfg.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        g = gnew;
        rnorm = norm(&g);
        solve += t1.elapsed().as_secs_f64();
        let step = StepReport {
            iteration: steps.len() + 1,
            residual_norm: rnorm,
            linear_iterations: 0,
            linear_converged: true,
            condition_estimate: 1.0,
            alpha,
        };
        info!("lbfgs step={} residual={:e} alpha={} pairs={}", step.iteration, rnorm, alpha, pairs.len());
        steps.push(step);
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
