#![allow(dead_code)]

use hyperpmg::material::{JacobianRepresentation, NeoHookean, Physics};
use hyperpmg::mesh::{BoundaryCondition, Face};
use hyperpmg::operator::{Discretization, HyperelasticOperator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.gen_range(-1.0..1.0)).collect()
}

pub fn physics(rep: JacobianRepresentation) -> Physics {
    Physics::new(NeoHookean::from_young_poisson(1.0, 0.3).unwrap(), rep)
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-300);
    num / den
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Bar clamped at -x with a traction on +x.
pub fn bar_operator(
    extents: [f64; 3],
    counts: [usize; 3],
    order: usize,
    traction: [f64; 3],
    rep: JacobianRepresentation,
) -> HyperelasticOperator {
    let bcs = [
        BoundaryCondition::clamped(Face::NegX),
        BoundaryCondition::Traction { face: Face::PosX, value: traction },
    ];
    let disc = Discretization::new(extents, counts, order, order + 1, &bcs).unwrap();
    HyperelasticOperator::new(disc, physics(rep), [0.0; 3]).unwrap()
}

/// Small smooth displacement field sampled at the nodes, zero on x = 0.
pub fn smooth_displacement(op: &HyperelasticOperator, amplitude: f64) -> Vec<f64> {
    let mesh = op.discretization().mesh();
    let mut u = vec![0.0; mesh.num_dofs()];
    for (n, x) in mesh.coords().iter().enumerate() {
        u[3 * n] = amplitude * x[0] * (1.0 + 0.3 * x[1]);
        u[3 * n + 1] = amplitude * 0.5 * x[0] * x[0] * (0.2 + x[2]);
        u[3 * n + 2] = -amplitude * 0.4 * x[0] * (x[1] - 0.3 * x[2]);
    }
    op.discretization().mask(&mut u);
    u
}
