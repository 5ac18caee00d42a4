use crate::error::{Error, Result};
use crate::linalg::{Diagonal, LinearOperator};

use super::cg::{estimate_lambda_max, rough_seed};

/// Degree-2 Chebyshev iteration preconditioned by the Jacobi diagonal,
/// targeting `[0.1 λmax, 1.1 λmax]` of `D⁻¹ A`.
#[derive(Debug, Clone)]
pub struct ChebyshevSmoother {
    inv_diag: Vec<f64>,
    lambda_max: f64,
    lower: f64,
    upper: f64,
}

impl ChebyshevSmoother {
    pub const DEGREE: usize = 2;
    pub const LOWER_FRACTION: f64 = 0.1;
    pub const UPPER_FRACTION: f64 = 1.1;

    pub fn new(diagonal: &[f64], lambda_max: f64) -> Result<Self> {
        let mut inv_diag = Vec::with_capacity(diagonal.len());
        for (i, d) in diagonal.iter().enumerate() {
            if *d == 0.0 || !d.is_finite() {
                return Err(Error::InvalidSmoother(format!("diagonal entry {i} is {d}")));
            }
            inv_diag.push(1.0 / d);
        }
        if !(lambda_max > 0.0) || !lambda_max.is_finite() {
            return Err(Error::InvalidSmoother(format!("lambda_max = {lambda_max}")));
        }
        Ok(ChebyshevSmoother {
            inv_diag,
            lambda_max,
            lower: Self::LOWER_FRACTION * lambda_max,
            upper: Self::UPPER_FRACTION * lambda_max,
        })
    }

    /// Estimates λmax of `D⁻¹ A` with ten Lanczos steps from the rough seed.
    pub fn calibrate(a: &dyn LinearOperator, diagonal: &[f64], mask: Option<&[bool]>) -> Result<Self> {
        let jacobi = Self::new(diagonal, 1.0)?;
        let m = Diagonal(jacobi.inv_diag);
        let seed = rough_seed(a.size(), mask);
        let lambda_max = estimate_lambda_max(a, &m, &seed)?;
        Self::new(diagonal, lambda_max)
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    /// Worst-case error reduction on the target interval, `1 / T₂((u+l)/(u−l))`.
    pub fn contraction_bound(&self) -> f64 {
        let s = (self.upper + self.lower) / (self.upper - self.lower);
        1.0 / (2.0 * s * s - 1.0)
    }

    /// One smoothing application on `A x = b`. With `zero_guess` the
    /// incoming `x` is ignored and one operator apply is saved.
    pub fn apply(&self, a: &dyn LinearOperator, b: &[f64], x: &mut [f64], zero_guess: bool) {
        let n = b.len();
        let theta = 0.5 * (self.upper + self.lower);
        let delta = 0.5 * (self.upper - self.lower);
        let mut r = vec![0.0; n];
        if zero_guess {
            x.fill(0.0);
            r.copy_from_slice(b);
        } else {
            a.apply(x, &mut r);
            for (ri, bi) in r.iter_mut().zip(b) {
                *ri = bi - *ri;
            }
        }
        let mut d: Vec<f64> = r.iter().zip(&self.inv_diag).map(|(ri, di)| ri * di / theta).collect();
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi += di;
        }
        let sigma = theta / delta;
        let mut rho_old = 1.0 / sigma;
        for _ in 1..Self::DEGREE {
            a.apply(x, &mut r);
            for (ri, bi) in r.iter_mut().zip(b) {
                *ri = bi - *ri;
            }
            let rho = 1.0 / (2.0 * sigma - rho_old);
            for ((di, ri), dinv) in d.iter_mut().zip(&r).zip(&self.inv_diag) {
                *di = rho * rho_old * *di + 2.0 * rho / delta * ri * dinv;
            }
            for (xi, di) in x.iter_mut().zip(&d) {
                *xi += di;
            }
            rho_old = rho;
        }
    }
}
