//! Quadrature-point residual and Jacobian functions.
//!
//! Inputs and outputs are in reference coordinates: gradients are `3 × 3`
//! arrays indexed `[component][reference direction]` and the returned flux
//! already carries the weighted measure `w · det(∇_ξ X)`. Each Jacobian
//! representation stores a different set of scalars per point during the
//! residual evaluation and reads them back in the Jacobian.

use std::fmt;
use std::str::FromStr;

use super::dual::Dual;
use super::tensor::*;
use super::{kirchhoff_from, log_det_deformation, pk2_from, NeoHookean};
use crate::error::{invalid, Error, Result};

/// How the linearization is stored at quadrature points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JacobianRepresentation {
    /// `W; ∇_x ξ, τ, λ log J`: 17 scalars.
    Current,
    /// `∇_X ξ, W; ∇_X u`: 19 scalars; the Jacobian recomputes `C⁻¹`.
    InitialNative,
    /// Native plus `C⁻¹` and `λ log J`: 26 scalars.
    InitialTuned,
    /// Native plus `S`, differentiated with dual numbers: 25 scalars.
    InitialAd,
}

impl JacobianRepresentation {
    pub const ALL: [JacobianRepresentation; 4] = [
        JacobianRepresentation::Current,
        JacobianRepresentation::InitialNative,
        JacobianRepresentation::InitialTuned,
        JacobianRepresentation::InitialAd,
    ];

    /// Stored scalars per quadrature point.
    pub const fn scalars(self) -> usize {
        match self {
            JacobianRepresentation::Current => 17,
            JacobianRepresentation::InitialNative => 19,
            JacobianRepresentation::InitialTuned => 26,
            JacobianRepresentation::InitialAd => 25,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            JacobianRepresentation::Current => "current",
            JacobianRepresentation::InitialNative => "initial-native",
            JacobianRepresentation::InitialTuned => "initial-tuned",
            JacobianRepresentation::InitialAd => "initial-ad",
        }
    }
}

impl fmt::Display for JacobianRepresentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for JacobianRepresentation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        JacobianRepresentation::ALL
            .into_iter()
            .find(|r| r.name() == s.trim())
            .ok_or_else(|| invalid(format!("unknown Jacobian representation '{s}'")))
    }
}

// state offsets
const CUR_DXIDX: usize = 0;
const CUR_TAU: usize = 9;
const CUR_LLOGJ: usize = 15;
const CUR_W: usize = 16;
const INI_DXIDX: usize = 0;
const INI_W: usize = 9;
const INI_GRADU: usize = 10;
const INI_EXTRA: usize = 19;
const TUNED_LLOGJ: usize = 25;

/// Material plus Jacobian representation: the pointwise part of the operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Physics {
    pub material: NeoHookean,
    pub representation: JacobianRepresentation,
    /// Relative perturbation applied to every Jacobian output. Zero in normal
    /// use; the verification suite sets it to check that the finite-difference
    /// test notices a wrong tangent.
    #[doc(hidden)]
    pub jacobian_perturbation: f64,
}

impl Physics {
    pub fn new(material: NeoHookean, representation: JacobianRepresentation) -> Self {
        Physics { material, representation, jacobian_perturbation: 0.0 }
    }

    pub fn state_scalars(&self) -> usize {
        self.representation.scalars()
    }

    /// Strain energy density at a point with reference gradient `grad_ref`.
    pub fn energy(&self, grad_ref: &Mat3, dxi_dx: &[f64; 9]) -> Result<f64> {
        let h = matmul(grad_ref, &from_flat(dxi_dx));
        self.material.strain_energy_density(&h)
    }

    /// Pulled-back flux `f̂₁` at one point; writes the stored state.
    ///
    /// `dxi_dx` is the reference inverse map `∂ξ_d/∂X_c` stored `[d * 3 + c]`.
    pub fn residual(
        &self,
        grad_ref: &Mat3,
        dxi_dx: &[f64; 9],
        wdet: f64,
        state: &mut [f64],
    ) -> Result<Mat3> {
        debug_assert_eq!(state.len(), self.state_scalars());
        let a = from_flat(dxi_dx);
        let h = matmul(grad_ref, &a);
        let m = &self.material;
        match self.representation {
            JacobianRepresentation::Current => {
                let jm1 = det_identity_plus_minus_one(&h);
                let log_j = log_det_deformation(&h)?;
                let f = add(&identity(), &h);
                let f_inv = inv3(&f, 1.0 + jm1);
                let dxi_dx_cur = matmul(&a, &f_inv);
                let tau = kirchhoff_from(m, &h, log_j);
                state[CUR_DXIDX..CUR_DXIDX + 9].copy_from_slice(&to_flat(&dxi_dx_cur));
                state[CUR_TAU..CUR_TAU + 6].copy_from_slice(&to_voigt(&tau));
                state[CUR_LLOGJ] = m.lambda * log_j;
                state[CUR_W] = wdet;
                Ok(scale(&matmul_bt(&tau, &dxi_dx_cur), wdet))
            }
            rep => {
                let log_j = log_det_deformation(&h)?;
                let f = add(&identity(), &h);
                let c = matmul_at(&f, &f);
                let c_inv = inv3(&c, det3(&c));
                let s = pk2_from(m, &c_inv, log_j);
                state[INI_DXIDX..INI_DXIDX + 9].copy_from_slice(dxi_dx);
                state[INI_W] = wdet;
                state[INI_GRADU..INI_GRADU + 9].copy_from_slice(&to_flat(&h));
                match rep {
                    JacobianRepresentation::InitialTuned => {
                        state[INI_EXTRA..INI_EXTRA + 6].copy_from_slice(&to_voigt(&c_inv));
                        state[TUNED_LLOGJ] = m.lambda * log_j;
                    }
                    JacobianRepresentation::InitialAd => {
                        state[INI_EXTRA..INI_EXTRA + 6].copy_from_slice(&to_voigt(&s));
                    }
                    _ => {}
                }
                let p = matmul(&f, &s);
                Ok(scale(&matmul_bt(&p, &a), wdet))
            }
        }
    }

    /// Linearized flux for the reference gradient `grad_ref_du` of an
    /// increment, reading the state written by [`residual`](Self::residual).
    pub fn jacobian(&self, grad_ref_du: &Mat3, state: &[f64]) -> Mat3 {
        debug_assert_eq!(state.len(), self.state_scalars());
        let m = &self.material;
        let out = match self.representation {
            JacobianRepresentation::Current => {
                let dxi_dx_cur = from_flat(&state[CUR_DXIDX..CUR_DXIDX + 9]);
                let tau = from_voigt(&state[CUR_TAU..CUR_TAU + 6]);
                let llogj = state[CUR_LLOGJ];
                let w = state[CUR_W];
                let grad_du = matmul(grad_ref_du, &dxi_dx_cur);
                let deps = sym(&grad_du);
                let tr = trace(&deps);
                let mut t = matmul(&grad_du, &tau);
                for i in 0..3 {
                    for j in 0..3 {
                        t[i][j] += 2.0 * (m.mu - llogj) * deps[i][j];
                    }
                    t[i][i] += m.lambda * tr;
                }
                scale(&matmul_bt(&t, &dxi_dx_cur), w)
            }
            rep => {
                let a = from_flat(&state[INI_DXIDX..INI_DXIDX + 9]);
                let w = state[INI_W];
                let h = from_flat(&state[INI_GRADU..INI_GRADU + 9]);
                let f = add(&identity(), &h);
                let dh = matmul(grad_ref_du, &a);
                // dE = sym(Fᵀ dH)
                let de = sym(&matmul_at(&f, &dh));
                let (s, ds) = match rep {
                    JacobianRepresentation::InitialNative => {
                        let c = matmul_at(&f, &f);
                        let c_inv = inv3(&c, det3(&c));
                        let log_j = 0.5 * det3(&c).ln();
                        let s = pk2_from(m, &c_inv, log_j);
                        (s, pk2_increment(m, &c_inv, m.lambda * log_j, &de))
                    }
                    JacobianRepresentation::InitialTuned => {
                        let c_inv = from_voigt(&state[INI_EXTRA..INI_EXTRA + 6]);
                        let llogj = state[TUNED_LLOGJ];
                        let mut s = scale(&c_inv, llogj - m.mu);
                        for (i, row) in s.iter_mut().enumerate() {
                            row[i] += m.mu;
                        }
                        (s, pk2_increment(m, &c_inv, llogj, &de))
                    }
                    JacobianRepresentation::InitialAd => {
                        let s = from_voigt(&state[INI_EXTRA..INI_EXTRA + 6]);
                        (s, pk2_increment_dual(m, &h, &de))
                    }
                    JacobianRepresentation::Current => unreachable!(),
                };
                // dP = dH S + F dS
                let dp = add(&matmul(&dh, &s), &matmul(&f, &ds));
                scale(&matmul_bt(&dp, &a), w)
            }
        };
        if self.jacobian_perturbation != 0.0 {
            scale(&out, 1.0 + self.jacobian_perturbation)
        } else {
            out
        }
    }
}

/// `dS = 2(μ − λ log J) C⁻¹ dE C⁻¹ + λ tr(C⁻¹ dE) C⁻¹`
fn pk2_increment(m: &NeoHookean, c_inv: &Mat3, lambda_log_j: f64, de: &Mat3) -> Mat3 {
    let cde = matmul(c_inv, de);
    let tr = trace(&cde);
    let cdec = matmul(&cde, c_inv);
    let mut ds = zeros();
    for i in 0..3 {
        for j in 0..3 {
            ds[i][j] = 2.0 * (m.mu - lambda_log_j) * cdec[i][j] + m.lambda * tr * c_inv[i][j];
        }
    }
    ds
}

/// Directional derivative of `S(E)` along `dE` by forward-mode propagation.
fn pk2_increment_dual(m: &NeoHookean, h: &Mat3, de: &Mat3) -> Mat3 {
    // E = (H + Hᵀ + HᵀH)/2
    let hth = matmul_at(h, h);
    let mut e: Mat3<Dual> = zeros();
    for i in 0..3 {
        for j in 0..3 {
            e[i][j] = Dual::new(0.5 * (h[i][j] + h[j][i] + hth[i][j]), de[i][j]);
        }
    }
    let s = m
        .second_piola_kirchhoff(&e)
        .expect("stored state was produced from an admissible deformation");
    let mut ds = zeros();
    for i in 0..3 {
        for j in 0..3 {
            ds[i][j] = s[i][j].deriv;
        }
    }
    ds
}
