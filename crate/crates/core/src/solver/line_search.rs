use log::warn;

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::operator::HyperelasticOperator;

/// Line search applied after each nonlinear search direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineSearchKind {
    /// One secant step toward `F(u + α du)ᵀ du = 0`.
    CriticalPoint,
    None,
}

pub const ALPHA_MIN: f64 = 0.1;
pub const ALPHA_MAX: f64 = 2.0;
/// Trial-step halvings allowed when a trial point inverts an element.
pub const MAX_HALVINGS: usize = 5;

/// Returns `true` for errors caused by an inadmissible trial point.
pub(crate) fn is_inadmissible(err: &Error) -> bool {
    matches!(err, Error::InvertedElement { .. } | Error::InvertedDeformation { .. } | Error::Domain(_))
}

fn trial(u: &[f64], du: &[f64], alpha: f64) -> Vec<f64> {
    u.iter().zip(du).map(|(a, b)| a + alpha * b).collect()
}

/// Secant estimate of the critical point of `g(α) = F(u + α du)ᵀ du` from
/// `g(0) = g0` and one trial at α = 1 (halved while inadmissible).
pub fn critical_point_alpha(op: &HyperelasticOperator, u: &[f64], du: &[f64], g0: f64) -> Result<f64> {
    let mut alpha_t = 1.0;
    let mut halvings = 0;
    let gt = loop {
        match op.evaluate_residual(&trial(u, du, alpha_t)) {
            Ok(f) => {
                let g = dot(&f, du);
                if g.is_finite() {
                    break g;
                }
            }
            Err(e) if is_inadmissible(&e) => {}
            Err(e) => return Err(e),
        }
        if halvings == MAX_HALVINGS {
            return Err(Error::StepRejected(format!(
                "trial point inadmissible after {MAX_HALVINGS} halvings"
            )));
        }
        alpha_t *= 0.5;
        halvings += 1;
    };
    if g0 >= 0.0 {
        warn!("line_search event=not_descent g0={g0:e} alpha=1");
        return Ok(1.0f64.min(alpha_t));
    }
    if g0 == gt {
        return Ok(alpha_t);
    }
    let alpha = alpha_t * g0 / (g0 - gt);
    Ok(alpha.clamp(ALPHA_MIN, ALPHA_MAX))
}
