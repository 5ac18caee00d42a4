//! Preconditioned conjugate gradients with eigenvalue estimates from the
//! Lanczos tridiagonal implied by the CG coefficients.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::linalg::{axpy, aypx, dot, LinearOperator};

/// Outcome of one CG solve.
#[derive(Debug, Clone, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub converged: bool,
    /// Natural-norm residual `√(rᵀ M r)`, starting with the initial residual.
    pub history: Vec<f64>,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl CgReport {
    /// `λmax / λmin`, at least 1.
    pub fn condition_estimate(&self) -> f64 {
        if self.lambda_min > 0.0 {
            (self.lambda_max / self.lambda_min).max(1.0)
        } else {
            1.0
        }
    }
}

/// Extreme eigenvalues of the Lanczos matrix built from CG step lengths
/// `alpha` and direction updates `beta` (one fewer than `alpha`, or equal).
pub fn lanczos_extremes(alpha: &[f64], beta: &[f64]) -> Option<(f64, f64)> {
    let k = alpha.len();
    if k == 0 {
        return None;
    }
    let mut t = DMatrix::<f64>::zeros(k, k);
    for j in 0..k {
        t[(j, j)] = 1.0 / alpha[j];
        if j > 0 {
            t[(j, j)] += beta[j - 1] / alpha[j - 1];
        }
        if j + 1 < k {
            let off = beta[j].sqrt() / alpha[j];
            t[(j, j + 1)] = off;
            t[(j + 1, j)] = off;
        }
    }
    let eig = SymmetricEigen::new(t).eigenvalues;
    let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Some((lo, hi))
}

struct CgRun {
    report: CgReport,
    alpha: Vec<f64>,
    beta: Vec<f64>,
}

fn cg_core(
    a: &dyn LinearOperator,
    m: &dyn LinearOperator,
    b: &[f64],
    x: &mut [f64],
    rtol: f64,
    max_iterations: usize,
    fixed_iterations: bool,
) -> Result<CgRun> {
    let n = a.size();
    if b.len() != n || x.len() != n || m.size() != n {
        return Err(invalid("CG operand sizes do not match"));
    }
    let mut r = vec![0.0; n];
    a.apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut z = vec![0.0; n];
    m.apply(&r, &mut z);
    let mut rz = dot(&r, &z);
    if rz < 0.0 {
        return Err(Error::IndefinitePreconditioner { iteration: 0, value: rz });
    }
    let r0 = rz.sqrt();
    let mut history = vec![r0];
    let (mut alphas, mut betas) = (Vec::new(), Vec::new());
    let mut converged = r0 == 0.0;
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut its = 0;
    while !converged && its < max_iterations {
        a.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::IndefiniteOperator { iteration: its, curvature: pap });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, x);
        axpy(-alpha, &ap, &mut r);
        m.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        its += 1;
        alphas.push(alpha);
        if rz_new < 0.0 {
            return Err(Error::IndefinitePreconditioner { iteration: its, value: rz_new });
        }
        if rz_new == 0.0 {
            converged = true;
            break;
        }
        let beta = rz_new / rz;
        betas.push(beta);
        rz = rz_new;
        history.push(rz.sqrt());
        if !fixed_iterations && rz.sqrt() <= rtol * r0 {
            converged = true;
            break;
        }
        aypx(beta, &z, &mut p);
    }
    let (lambda_min, lambda_max) = lanczos_extremes(&alphas, &betas).unwrap_or((1.0, 1.0));
    Ok(CgRun {
        report: CgReport { iterations: its, converged, history, lambda_min, lambda_max },
        alpha: alphas,
        beta: betas,
    })
}

/// Solves `A x = b` from the initial guess in `x`, preconditioned by `m`.
/// Stops when the natural-norm residual drops by `rtol` or after
/// `max_iterations` (then `converged` is false).
pub fn cg_solve(
    a: &dyn LinearOperator,
    m: &dyn LinearOperator,
    b: &[f64],
    x: &mut [f64],
    rtol: f64,
    max_iterations: usize,
) -> Result<CgReport> {
    if !(rtol > 0.0) {
        return Err(invalid("CG relative tolerance must be positive"));
    }
    Ok(cg_core(a, m, b, x, rtol, max_iterations, false)?.report)
}

/// Fixed-seed rough vector, uniform in (−1, 1), zero where `mask` is set.
pub fn rough_seed(n: usize, mask: Option<&[bool]>) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_cafe);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    if let Some(mask) = mask {
        for (vi, &c) in v.iter_mut().zip(mask) {
            if c {
                *vi = 0.0;
            }
        }
    }
    v
}

/// Number of Lanczos iterations used to estimate the largest eigenvalue.
pub const LAMBDA_MAX_ITERATIONS: usize = 10;

/// Largest Ritz value of `M A` after ten Lanczos steps from `seed`; returns
/// the current estimate on breakdown.
pub fn estimate_lambda_max(a: &dyn LinearOperator, m: &dyn LinearOperator, seed: &[f64]) -> Result<f64> {
    let mut x = vec![0.0; a.size()];
    let run = cg_core(a, m, seed, &mut x, 0.0, LAMBDA_MAX_ITERATIONS, true)?;
    match lanczos_extremes(&run.alpha, &run.beta) {
        Some((_, hi)) => Ok(hi),
        None => Err(invalid("Lanczos seed vector is zero")),
    }
}
