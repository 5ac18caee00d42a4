//! Neo-Hookean hyperelasticity at a single material point.

pub mod dual;
pub mod qfunction;
pub mod tensor;

pub use dual::Dual;
pub use qfunction::{JacobianRepresentation, Physics};
pub use tensor::{Mat3, Scalar};

use crate::error::{invalid, Error, Result};
use tensor::*;

/// Isotropic compressible Neo-Hookean material given by its Lamé parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeoHookean {
    pub mu: f64,
    pub lambda: f64,
}

impl NeoHookean {
    pub fn new(mu: f64, lambda: f64) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(invalid(format!("shear modulus must be positive, got {mu}")));
        }
        if !(lambda > -2.0 / 3.0 * mu) || !lambda.is_finite() {
            return Err(invalid(format!("lambda = {lambda} violates lambda > -2/3 mu")));
        }
        Ok(NeoHookean { mu, lambda })
    }

    pub fn from_young_poisson(young: f64, nu: f64) -> Result<Self> {
        if nu == 0.5 {
            return Err(Error::IncompressibleUnsupported);
        }
        if !(young > 0.0) {
            return Err(invalid(format!("Young's modulus must be positive, got {young}")));
        }
        if !(nu > -1.0 && nu < 0.5) {
            return Err(invalid(format!("Poisson ratio must lie in (-1, 0.5), got {nu}")));
        }
        let mu = young / (2.0 * (1.0 + nu));
        let lambda = young * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
        Self::new(mu, lambda)
    }

    /// Strain energy density ψ for the displacement gradient `∇_X u`.
    pub fn strain_energy_density(&self, grad_u: &Mat3) -> Result<f64> {
        let log_j = log_det_deformation(grad_u)?;
        // trace e = trace H + |H|²/2
        let tr_e = trace(grad_u) + 0.5 * frobenius_dot(grad_u, grad_u);
        Ok(0.5 * self.lambda * log_j * log_j - self.mu * log_j + self.mu * tr_e)
    }

    /// Kirchhoff stress `τ = μ(b − I) + λ log J I`.
    pub fn kirchhoff_stress(&self, grad_u: &Mat3) -> Result<Mat3> {
        let log_j = log_det_deformation(grad_u)?;
        Ok(kirchhoff_from(self, grad_u, log_j))
    }

    /// Second Piola–Kirchhoff stress as a function of the Green–Lagrange strain.
    pub fn second_piola_kirchhoff<T: Scalar>(&self, green_lagrange: &Mat3<T>) -> Result<Mat3<T>> {
        let two = T::from_f64(2.0);
        let c = add(&identity(), &scale(green_lagrange, two));
        let det_c = det3(&c);
        if !(det_c.re() > 0.0) {
            return Err(Error::Domain(format!("det C = {} is not positive", det_c.re())));
        }
        let c_inv = inv3(&c, det_c);
        let log_j = T::from_f64(0.5) * det_c.ln();
        Ok(pk2_from(self, &c_inv, log_j))
    }
}

/// `log det(I + H)`, failing on inverted deformation.
pub(crate) fn log_det_deformation<T: Scalar>(h: &Mat3<T>) -> Result<T> {
    let jm1 = det_identity_plus_minus_one(h);
    if !(jm1.re() > -1.0) {
        return Err(Error::InvertedDeformation { det: 1.0 + jm1.re() });
    }
    Ok(jm1.ln_1p())
}

/// `b − I = H + Hᵀ + H Hᵀ`
pub(crate) fn left_cauchy_green_minus_identity(h: &Mat3) -> Mat3 {
    let hht = matmul_bt(h, h);
    let mut out = hht;
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] += h[i][j] + h[j][i];
        }
    }
    out
}

pub(crate) fn kirchhoff_from(m: &NeoHookean, h: &Mat3, log_j: f64) -> Mat3 {
    let mut tau = scale(&left_cauchy_green_minus_identity(h), m.mu);
    for (i, row) in tau.iter_mut().enumerate() {
        row[i] += m.lambda * log_j;
    }
    tau
}

/// `S = μ(I − C⁻¹) + λ log J C⁻¹`
pub(crate) fn pk2_from<T: Scalar>(m: &NeoHookean, c_inv: &Mat3<T>, log_j: T) -> Mat3<T> {
    let mu = T::from_f64(m.mu);
    let lam = T::from_f64(m.lambda);
    let mut s = zeros();
    for i in 0..3 {
        for j in 0..3 {
            let delta = if i == j { T::one() } else { T::zero() };
            s[i][j] = mu * (delta - c_inv[i][j]) + lam * log_j * c_inv[i][j];
        }
    }
    s
}
