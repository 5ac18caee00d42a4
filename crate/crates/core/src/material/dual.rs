//! First-order dual numbers for forward-mode differentiation.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use super::tensor::Scalar;
use crate::error::{Error, Result};

/// `value + deriv·ε` with `ε² = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dual {
    pub value: f64,
    pub deriv: f64,
}

impl Dual {
    pub const fn new(value: f64, deriv: f64) -> Self {
        Dual { value, deriv }
    }

    pub const fn constant(value: f64) -> Self {
        Dual { value, deriv: 0.0 }
    }

    /// The independent variable at `value`.
    pub const fn variable(value: f64) -> Self {
        Dual { value, deriv: 1.0 }
    }

    /// Natural logarithm; fails for a non-positive primal.
    pub fn checked_ln(self) -> Result<Self> {
        if !(self.value > 0.0) {
            return Err(Error::Domain(format!("log of non-positive value {}", self.value)));
        }
        Ok(Scalar::ln(self))
    }

    /// Division; fails for a zero primal divisor.
    pub fn checked_div(self, rhs: Dual) -> Result<Self> {
        if rhs.value == 0.0 {
            return Err(Error::Domain("division by zero".into()));
        }
        Ok(self / rhs)
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, r: Dual) -> Dual {
        Dual::new(self.value + r.value, self.deriv + r.deriv)
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, r: Dual) -> Dual {
        Dual::new(self.value - r.value, self.deriv - r.deriv)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, r: Dual) -> Dual {
        Dual::new(self.value * r.value, self.deriv * r.value + self.value * r.deriv)
    }
}

impl Div for Dual {
    type Output = Dual;
    fn div(self, r: Dual) -> Dual {
        let inv = 1.0 / r.value;
        Dual::new(self.value * inv, (self.deriv - self.value * inv * r.deriv) * inv)
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.value, -self.deriv)
    }
}

impl AddAssign for Dual {
    fn add_assign(&mut self, r: Dual) {
        self.value += r.value;
        self.deriv += r.deriv;
    }
}

impl Scalar for Dual {
    fn from_f64(v: f64) -> Self {
        Dual::constant(v)
    }
    fn re(self) -> f64 {
        self.value
    }
    fn ln(self) -> Self {
        Dual::new(self.value.ln(), self.deriv / self.value)
    }
    fn ln_1p(self) -> Self {
        Dual::new(self.value.ln_1p(), self.deriv / (1.0 + self.value))
    }
}
