//! Small 3×3 tensor algebra, generic over the scalar so the same code runs
//! on `f64` and on dual numbers.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

/// Real-like scalar supporting the operations needed by the material model.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
{
    fn from_f64(v: f64) -> Self;
    /// Primal value.
    fn re(self) -> f64;
    fn ln(self) -> Self;
    fn ln_1p(self) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }
    fn one() -> Self {
        Self::from_f64(1.0)
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn re(self) -> f64 {
        self
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn ln_1p(self) -> Self {
        f64::ln_1p(self)
    }
}

pub type Mat3<T = f64> = [[T; 3]; 3];

pub fn identity<T: Scalar>() -> Mat3<T> {
    let (o, z) = (T::one(), T::zero());
    [[o, z, z], [z, o, z], [z, z, o]]
}

pub fn zeros<T: Scalar>() -> Mat3<T> {
    [[T::zero(); 3]; 3]
}

pub fn trace<T: Scalar>(a: &Mat3<T>) -> T {
    a[0][0] + a[1][1] + a[2][2]
}

pub fn transpose<T: Scalar>(a: &Mat3<T>) -> Mat3<T> {
    let mut t = *a;
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = a[j][i];
        }
    }
    t
}

pub fn matmul<T: Scalar>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    let mut c = zeros();
    for i in 0..3 {
        for j in 0..3 {
            let mut s = T::zero();
            for k in 0..3 {
                s += a[i][k] * b[k][j];
            }
            c[i][j] = s;
        }
    }
    c
}

/// `a · bᵀ`
pub fn matmul_bt<T: Scalar>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    let mut c = zeros();
    for i in 0..3 {
        for j in 0..3 {
            let mut s = T::zero();
            for k in 0..3 {
                s += a[i][k] * b[j][k];
            }
            c[i][j] = s;
        }
    }
    c
}

/// `aᵀ · b`
pub fn matmul_at<T: Scalar>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    let mut c = zeros();
    for i in 0..3 {
        for j in 0..3 {
            let mut s = T::zero();
            for k in 0..3 {
                s += a[k][i] * b[k][j];
            }
            c[i][j] = s;
        }
    }
    c
}

pub fn add<T: Scalar>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    let mut c = *a;
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = a[i][j] + b[i][j];
        }
    }
    c
}

pub fn scale<T: Scalar>(a: &Mat3<T>, s: T) -> Mat3<T> {
    let mut c = *a;
    for row in c.iter_mut() {
        for v in row.iter_mut() {
            *v = *v * s;
        }
    }
    c
}

pub fn det3<T: Scalar>(m: &Mat3<T>) -> T {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Inverse given a precomputed determinant.
pub fn inv3<T: Scalar>(m: &Mat3<T>, det: T) -> Mat3<T> {
    [
        [
            (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det,
            (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det,
            (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det,
        ],
        [
            (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det,
            (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det,
            (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det,
        ],
        [
            (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det,
            (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det,
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det,
        ],
    ]
}

/// `det(I + H) - 1` without cancellation for small `H`.
pub fn det_identity_plus_minus_one<T: Scalar>(h: &Mat3<T>) -> T {
    let tr = trace(h);
    let minors = h[0][0] * h[1][1] + h[0][0] * h[2][2] + h[1][1] * h[2][2]
        - h[0][1] * h[1][0]
        - h[0][2] * h[2][0]
        - h[1][2] * h[2][1];
    tr + minors + det3(h)
}

/// Symmetric part `(a + aᵀ)/2`.
pub fn sym<T: Scalar>(a: &Mat3<T>) -> Mat3<T> {
    let half = T::from_f64(0.5);
    let mut s = *a;
    for i in 0..3 {
        for j in 0..3 {
            s[i][j] = half * (a[i][j] + a[j][i]);
        }
    }
    s
}

/// Packs a symmetric tensor as `(00, 11, 22, 12, 02, 01)`.
pub fn to_voigt(a: &Mat3) -> [f64; 6] {
    [a[0][0], a[1][1], a[2][2], a[1][2], a[0][2], a[0][1]]
}

pub fn from_voigt(v: &[f64]) -> Mat3 {
    [[v[0], v[5], v[4]], [v[5], v[1], v[3]], [v[4], v[3], v[2]]]
}

pub fn from_flat(v: &[f64]) -> Mat3 {
    [[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]]
}

pub fn to_flat(a: &Mat3) -> [f64; 9] {
    [a[0][0], a[0][1], a[0][2], a[1][0], a[1][1], a[1][2], a[2][0], a[2][1], a[2][2]]
}

pub fn frobenius_dot(a: &Mat3, b: &Mat3) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += a[i][j] * b[i][j];
        }
    }
    s
}
