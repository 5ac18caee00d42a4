//! Linear-operator abstraction and vector kernels.
//!
//! Reductions run sequentially in index order so results do not depend on
//! the number of threads.

/// A square linear map on `f64` vectors.
pub trait LinearOperator: Sync {
    fn size(&self) -> usize;
    /// `y ← A x`
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn size(&self) -> usize {
        (**self).size()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }
}

/// Identity map of a given size.
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn size(&self) -> usize {
        self.0
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
}

/// Diagonal scaling `y = d ⊙ x`.
#[derive(Debug, Clone)]
pub struct Diagonal(pub Vec<f64>);

impl LinearOperator for Diagonal {
    fn size(&self) -> usize {
        self.0.len()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for ((yi, xi), di) in y.iter_mut().zip(x).zip(&self.0) {
            *yi = di * xi;
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y ← y + alpha x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `y ← x + beta y`
pub fn aypx(beta: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = xi + beta * *yi;
    }
}

pub fn apply_new(op: &dyn LinearOperator, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; op.size()];
    op.apply(x, &mut y);
    y
}
