use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::HarnessError;
use crate::linalg::{apply_new, dot, Diagonal};
use crate::material::{JacobianRepresentation, NeoHookean, Physics};
use crate::mesh::{BoundaryCondition, ElementRestriction, Face};
use crate::operator::{assemble, coo_symbolic, Discretization, HyperelasticOperator};
use crate::solver::{cg_solve, MultigridConfig, MultigridHierarchy};

/// One row of the verification table.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyCheck {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl VerifyCheck {
    fn below(name: &'static str, value: f64, tolerance: f64) -> Self {
        VerifyCheck { name, value, tolerance, passed: value.is_finite() && value <= tolerance }
    }

    fn exact(name: &'static str, ok: bool) -> Self {
        VerifyCheck { name, value: if ok { 0.0 } else { 1.0 }, tolerance: 0.0, passed: ok }
    }
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-300);
    num / den
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

struct Setup {
    perturbation: f64,
    rng: ChaCha8Rng,
}

impl Setup {
    fn bar(&self, counts: [usize; 3], order: usize, rep: JacobianRepresentation) -> crate::Result<HyperelasticOperator> {
        let bcs = [
            BoundaryCondition::clamped(Face::NegX),
            BoundaryCondition::Traction { face: Face::PosX, value: [0.02, 0.01, -0.01] },
        ];
        let disc = Discretization::new([2.0, 1.0, 1.0], counts, order, order + 1, &bcs)?;
        let mut physics = Physics::new(NeoHookean::from_young_poisson(1.0, 0.3)?, rep);
        physics.jacobian_perturbation = self.perturbation;
        HyperelasticOperator::new(disc, physics, [0.0; 3])
    }

    /// Smooth displacement plus noise, masked.
    fn state(&mut self, op: &HyperelasticOperator, amplitude: f64) -> Vec<f64> {
        let mesh = op.discretization().mesh();
        let mut u = vec![0.0; mesh.num_dofs()];
        for (n, x) in mesh.coords().iter().enumerate() {
            u[3 * n] = amplitude * x[0] * (1.0 + 0.3 * x[1]);
            u[3 * n + 1] = amplitude * 0.5 * x[0] * x[0] * (0.2 + x[2]);
            u[3 * n + 2] = -amplitude * 0.4 * x[0] * (x[1] - 0.3 * x[2]);
            for c in 0..3 {
                u[3 * n + c] += 0.05 * amplitude * self.rng.gen_range(-1.0..1.0);
            }
        }
        op.discretization().mask(&mut u);
        u
    }

    fn direction(&mut self, op: &HyperelasticOperator) -> Vec<f64> {
        let mut v = random_vec(&mut self.rng, op.num_dofs());
        op.discretization().mask(&mut v);
        v
    }
}

fn operator_equivalence(s: &mut Setup) -> crate::Result<f64> {
    let mut op = s.bar([2, 2, 2], 2, JacobianRepresentation::Current)?;
    let u = s.state(&op, 0.1);
    op.apply_residual(&u)?;
    let j = op.jacobian()?;
    let a = assemble(&j)?;
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let x = random_vec(&mut s.rng, op.num_dofs());
        worst = worst.max(rel_diff(&apply_new(&a, &x), &apply_new(&j, &x)));
    }
    Ok(worst)
}

fn jacobian_fd(s: &mut Setup) -> crate::Result<f64> {
    let mut worst = 0.0f64;
    for rep in JacobianRepresentation::ALL {
        let mut op = s.bar([2, 1, 1], 2, rep)?;
        let u = s.state(&op, 0.15);
        op.apply_residual(&u)?;
        let du = s.direction(&op);
        let jdu = op.apply_jacobian(&du)?;
        let h = 1e-6;
        let shifted = |sign: f64| -> Vec<f64> { u.iter().zip(&du).map(|(a, b)| a + sign * h * b).collect() };
        let fp = op.evaluate_residual(&shifted(1.0))?;
        let fm = op.evaluate_residual(&shifted(-1.0))?;
        let fd: Vec<f64> = fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        worst = worst.max(rel_diff(&jdu, &fd));
    }
    Ok(worst)
}

fn dual_vs_analytic(s: &mut Setup) -> crate::Result<f64> {
    let mut ad = s.bar([2, 1, 1], 3, JacobianRepresentation::InitialAd)?;
    let mut native = s.bar([2, 1, 1], 3, JacobianRepresentation::InitialNative)?;
    let u = s.state(&ad, 0.2);
    ad.apply_residual(&u)?;
    native.apply_residual(&u)?;
    let du = s.direction(&ad);
    Ok(rel_diff(&ad.apply_jacobian(&du)?, &native.apply_jacobian(&du)?))
}

fn energy_fd(s: &mut Setup) -> crate::Result<f64> {
    let mut worst = 0.0f64;
    for rep in [JacobianRepresentation::Current, JacobianRepresentation::InitialTuned] {
        let op = s.bar([2, 1, 2], 2, rep)?;
        let u = s.state(&op, 0.1);
        let du = s.direction(&op);
        let f = op.evaluate_residual(&u)?;
        let h = 1e-5;
        let at = |sign: f64| -> Vec<f64> { u.iter().zip(&du).map(|(a, b)| a + sign * h * b).collect() };
        let fd = (op.potential_energy(&at(1.0))? - op.potential_energy(&at(-1.0))?) / (2.0 * h);
        let an = dot(&f, &du);
        worst = worst.max(((an - fd) / an).abs());
    }
    Ok(worst)
}

fn galerkin(s: &mut Setup) -> crate::Result<f64> {
    let mut worst = 0.0f64;
    for (p, counts) in [(2, [2, 1, 1]), (3, [2, 1, 1])] {
        let mut op = s.bar(counts, p, JacobianRepresentation::Current)?;
        let u = s.state(&op, 0.1);
        op.apply_residual(&u)?;
        let fine = op.jacobian()?;
        let h = MultigridHierarchy::build(&fine, &MultigridConfig::default())?;
        for level in &h.levels()[1..] {
            let pr = level.prolongation().expect("coarse levels carry a prolongation");
            let finer = fine.on_discretization(pr.fine().clone())?;
            let coarse = fine.on_discretization(pr.coarse().clone())?;
            let mut x = random_vec(&mut s.rng, pr.coarse().num_dofs());
            pr.coarse().mask(&mut x);
            let mut px = vec![0.0; pr.fine().num_dofs()];
            pr.prolong(&x, &mut px);
            let mut ptapx = vec![0.0; x.len()];
            pr.restrict(&apply_new(&finer, &px), &mut ptapx);
            worst = worst.max(rel_diff(&apply_new(&coarse, &x), &ptapx));
        }
    }
    Ok(worst)
}

fn restriction_adjoint(s: &mut Setup) -> crate::Result<f64> {
    let disc = Discretization::new([1.0, 2.0, 1.0], [2, 3, 2], 3, 4, &[])?;
    let r: &ElementRestriction = disc.restriction();
    let l = random_vec(&mut s.rng, disc.num_dofs());
    let e = random_vec(&mut s.rng, r.evector_len(3));
    let mut gl = vec![0.0; e.len()];
    r.gather(3, &l, &mut gl);
    let mut se = vec![0.0; l.len()];
    r.scatter_add(3, &e, &mut se);
    let (a, b) = (dot(&gl, &e), dot(&l, &se));
    Ok(((a - b) / a.abs()).abs())
}

fn storage_counts() -> bool {
    use JacobianRepresentation::*;
    [(Current, 17), (InitialNative, 19), (InitialTuned, 26)].iter().all(|(r, n)| r.scalars() == *n)
}

fn q1_row_width() -> crate::Result<bool> {
    let disc = Discretization::new([1.0; 3], [2, 2, 2], 1, 2, &[])?;
    let m = coo_symbolic(&disc)?.pattern();
    let n = disc.mesh().node_index(1, 1, 1);
    Ok((0..3).all(|c| m.row(3 * n + c).0.len() == 27 * 3))
}

fn lanczos_lambda_max() -> crate::Result<f64> {
    let n = 50;
    let a = Diagonal((1..=n).map(|i| i as f64).collect());
    let m = Diagonal(vec![1.0; n]);
    let b = vec![1.0; n];
    let mut x = vec![0.0; n];
    let rep = cg_solve(&a, &m, &b, &mut x, 1e-12, 200)?;
    Ok(((rep.lambda_max - n as f64) / n as f64).abs())
}

/// Runs the invariant suite and prints a pass/fail table. `perturbation`
/// scales every Jacobian output by `1 + perturbation`.
pub fn run_verify(perturbation: f64) -> Result<Vec<VerifyCheck>, HarnessError> {
    let mut s = Setup { perturbation, rng: ChaCha8Rng::seed_from_u64(0x7e51f) };
    let wrap = |phase: &str, e| HarnessError::solver(phase, e);
    let checks = vec![
        VerifyCheck::below("assembled vs matrix-free", operator_equivalence(&mut s).map_err(|e| wrap("verify", e))?, 1e-12),
        VerifyCheck::below("jacobian vs residual fd", jacobian_fd(&mut s).map_err(|e| wrap("verify", e))?, 1e-6),
        VerifyCheck::below("dual vs analytic tangent", dual_vs_analytic(&mut s).map_err(|e| wrap("verify", e))?, 1e-12),
        VerifyCheck::below("residual vs energy fd", energy_fd(&mut s).map_err(|e| wrap("verify", e))?, 1e-6),
        VerifyCheck::below("galerkin coarse operator", galerkin(&mut s).map_err(|e| wrap("verify", e))?, 1e-12),
        VerifyCheck::below("gather/scatter adjoint", restriction_adjoint(&mut s).map_err(|e| wrap("verify", e))?, 1e-13),
        VerifyCheck::exact("state scalars 17/19/26", storage_counts()),
        VerifyCheck::exact("q1 interior row 27 nodes", q1_row_width().map_err(|e| wrap("verify", e))?),
        VerifyCheck::below("lanczos lambda_max", lanczos_lambda_max().map_err(|e| wrap("verify", e))?, 0.05),
    ];
    let mut table = String::new();
    let _ = writeln!(table, "{:<28} {:>12} {:>10}  result", "check", "value", "tolerance");
    for c in &checks {
        let verdict = if c.passed { "pass" } else { "FAIL" };
        let _ = writeln!(table, "{:<28} {:>12.3e} {:>10.1e}  {verdict}", c.name, c.value, c.tolerance);
    }
    print!("{table}");
    Ok(checks)
}
