mod common;

use std::sync::Arc;

use common::*;
use hyperpmg::linalg::{Diagonal, LinearOperator};
use hyperpmg::material::JacobianRepresentation::{self, *};
use hyperpmg::operator::{assemble, Discretization};
use hyperpmg::solver::*;
use nalgebra::{DMatrix, SymmetricEigen};

fn linearized_bar(p: usize, counts: [usize; 3], amplitude: f64) -> hyperpmg::operator::HyperelasticOperator {
    let mut op = bar_operator([2.0, 1.0, 1.0], counts, p, [0.0; 3], InitialTuned);
    let u = smooth_displacement(&op, amplitude);
    op.apply_residual(&u).unwrap();
    op
}

fn apply(op: &dyn LinearOperator, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; op.size()];
    op.apply(x, &mut y);
    y
}

#[test]
fn galerkin_identity_along_chains() {
    let mut r = rng(10);
    for (p, counts) in [(2, [2, 1, 1]), (3, [2, 2, 1])] {
        let op = linearized_bar(p, counts, 0.1);
        let fine = op.jacobian().unwrap();
        let h = MultigridHierarchy::build(&fine, &MultigridConfig::default()).unwrap();
        assert_eq!(h.orders(), coarsening_schedule(p));
        let levels = h.levels();
        for l in 1..levels.len() {
            let pr = levels[l].prolongation().unwrap();
            let finer = if l == 1 { fine.clone() } else { fine.on_discretization(pr.fine().clone()).unwrap() };
            let coarse = fine.on_discretization(pr.coarse().clone()).unwrap();
            let mut x = random_vec(&mut r, pr.coarse().num_dofs(), 1.0);
            pr.coarse().mask(&mut x);
            let mut px = vec![0.0; pr.fine().num_dofs()];
            pr.prolong(&x, &mut px);
            let apx = apply(&finer, &px);
            let mut ptapx = vec![0.0; x.len()];
            pr.restrict(&apx, &mut ptapx);
            let ax = apply(&coarse, &x);
            assert!(rel_diff(&ax, &ptapx) < 1e-12, "p {p} level {l}: {}", rel_diff(&ax, &ptapx));
            if let Some(m) = levels[l].coarse_matrix() {
                assert!(rel_diff(&apply(m, &x), &ptapx) < 1e-12);
            }
        }
    }
}

#[test]
fn prolongation_properties() {
    let mut r = rng(11);
    for (pf, pc) in [(2, 1), (3, 2), (4, 2)] {
        let fine = Arc::new(Discretization::new([1.0, 2.0, 1.5], [2, 3, 2], pf, pf + 1, &[]).unwrap());
        let coarse = Arc::new(fine.with_order(pc).unwrap());
        let p = Prolongation::new(fine.clone(), coarse.clone()).unwrap();
        // constants and linear fields are reproduced
        let field = |x: &[f64; 3]| [1.0, 0.5 * x[0] - x[1] + 2.0 * x[2], -3.0];
        let sample = |d: &Discretization| {
            let mut v = vec![0.0; d.num_dofs()];
            for (n, x) in d.mesh().coords().iter().enumerate() {
                v[3 * n..3 * n + 3].copy_from_slice(&field(x));
            }
            v
        };
        let mut pf_v = vec![0.0; fine.num_dofs()];
        p.prolong(&sample(&coarse), &mut pf_v);
        assert!(rel_diff(&pf_v, &sample(&fine)) < 1e-14);
        // adjoint
        let x = random_vec(&mut r, coarse.num_dofs(), 1.0);
        let y = random_vec(&mut r, fine.num_dofs(), 1.0);
        let mut px = vec![0.0; fine.num_dofs()];
        let mut pty = vec![0.0; coarse.num_dofs()];
        p.prolong(&x, &mut px);
        p.restrict(&y, &mut pty);
        let (a, b) = (dot(&px, &y), dot(&x, &pty));
        assert!(((a - b) / a.abs()).abs() < 1e-13);
    }
}

#[test]
fn q2_to_q1_dof_ratio() {
    for n in [1usize, 2, 4] {
        let fine = Discretization::new([1.0; 3], [n; 3], 2, 3, &[]).unwrap();
        let coarse = fine.with_order(1).unwrap();
        assert_eq!(fine.num_dofs(), 3 * (2 * n + 1).pow(3));
        assert_eq!(coarse.num_dofs(), 3 * (n + 1).pow(3));
    }
}

#[test]
fn v_cycle_is_symmetric_and_contracts() {
    let mut r = rng(12);
    let op = linearized_bar(2, [4, 2, 2], 0.1);
    let a = op.jacobian().unwrap();
    let h = MultigridHierarchy::build(&a, &MultigridConfig::default()).unwrap();
    let mask = op.discretization().constrained().to_vec();
    let masked = |v: &mut Vec<f64>| op.discretization().mask(v);
    let mut x = random_vec(&mut r, a.size(), 1.0);
    let mut y = random_vec(&mut r, a.size(), 1.0);
    masked(&mut x);
    masked(&mut y);
    let (mx, my) = (apply(&h, &x), apply(&h, &y));
    let (s1, s2) = (dot(&mx, &y), dot(&x, &my));
    assert!(((s1 - s2) / s1.abs()).abs() < 1e-11, "{s1} vs {s2}");

    // stationary iteration on A x = 0: the error is x itself
    let mut e = random_vec(&mut r, a.size(), 1.0);
    masked(&mut e);
    let zero = vec![0.0; a.size()];
    let e0 = dot(&e, &apply(&a, &e)).sqrt();
    for _ in 0..10 {
        h.v_cycle(&zero, &mut e);
    }
    let e10 = dot(&e, &apply(&a, &e)).sqrt();
    let rho = (e10 / e0).powf(0.1);
    assert!(rho < 1.0, "rho = {rho}");
    assert!(e.iter().zip(&mask).all(|(v, m)| !m || *v == 0.0));
}

#[test]
fn single_level_is_a_direct_solve() {
    let mut r = rng(13);
    let op = linearized_bar(1, [3, 2, 2], 0.1);
    let a = op.jacobian().unwrap();
    let h = MultigridHierarchy::build(&a, &MultigridConfig::default()).unwrap();
    assert_eq!(h.orders(), vec![1]);
    let mut b = random_vec(&mut r, a.size(), 1.0);
    op.discretization().mask(&mut b);
    let x = apply(&h, &b);
    assert!(rel_diff(&apply(&a, &x), &b) < 1e-12);
}

#[test]
fn multigrid_beats_jacobi_and_history_is_monotone() {
    let mut r = rng(14);
    let op = linearized_bar(2, [4, 2, 2], 0.1);
    let jac = op.jacobian().unwrap();
    let a = assemble(&jac).unwrap();
    let mut b = random_vec(&mut r, a.size(), 1.0);
    op.discretization().mask(&mut b);
    let h = MultigridHierarchy::build(&jac, &MultigridConfig::default()).unwrap();
    let mut x = vec![0.0; b.len()];
    let mg = cg_solve(&a, &h, &b, &mut x, 1e-8, 500).unwrap();
    assert!(mg.converged);
    assert!(mg.history.windows(2).all(|w| w[1] < w[0]), "{:?}", mg.history);
    let jacobi = Diagonal(a.diagonal().iter().map(|d| 1.0 / d).collect());
    let mut x = vec![0.0; b.len()];
    let jr = cg_solve(&a, &jacobi, &b, &mut x, 1e-8, 5000).unwrap();
    assert!(jr.converged);
    assert!(
        mg.condition_estimate() * 10.0 < jr.condition_estimate(),
        "mg {} vs jacobi {}",
        mg.condition_estimate(),
        jr.condition_estimate()
    );
}

#[test]
fn mesh_robustness_of_multigrid_cg() {
    for p in [2, 3] {
        let mut its = Vec::new();
        for k in 1..=3 {
            let mut op = bar_operator([4.0, 1.0, 1.0], [4 * k, k, k], p, [0.0, 0.0, -0.01], InitialTuned);
            let f = op.apply_residual(&vec![0.0; op.num_dofs()]).unwrap();
            let jac = op.jacobian().unwrap();
            let h = MultigridHierarchy::build(&jac, &MultigridConfig::default()).unwrap();
            let b: Vec<f64> = f.iter().map(|v| -v).collect();
            let mut x = vec![0.0; b.len()];
            let rep = cg_solve(&jac, &h, &b, &mut x, 1e-3, 200).unwrap();
            assert!(rep.converged);
            its.push(rep.iterations);
        }
        let (lo, hi) = (*its.iter().min().unwrap(), *its.iter().max().unwrap());
        assert!(hi <= 30 && hi <= 2 * lo, "p {p}: {its:?}");
    }
}

/// Smoother check against the eigen-decomposition of `D^{-1/2} A D^{-1/2}`.
#[test]
fn chebyshev_damps_target_interval() {
    let mut r = rng(15);
    let op = linearized_bar(2, [2, 1, 1], 0.1);
    let jac = op.jacobian().unwrap();
    let n = jac.size();
    assert!(n <= 300);
    let a = assemble(&jac).unwrap();
    let diag = jac.diagonal();
    let s = ChebyshevSmoother::calibrate(&jac, &diag, Some(op.discretization().constrained())).unwrap();
    let dense = DMatrix::from_row_slice(n, n, &a.to_dense());
    let dh = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 / diag[i].sqrt() } else { 0.0 });
    let eig = SymmetricEigen::new(&dh * &dense * &dh);
    let (lo, hi) = s.interval();
    assert!(s.lambda_max() <= eig.eigenvalues.max() * (1.0 + 1e-10));

    // fixed point
    let x_true = random_vec(&mut r, n, 1.0);
    let b = apply(&a, &x_true);
    let mut x = x_true.clone();
    s.apply(&jac, &b, &mut x, false);
    assert!(rel_diff(&x, &x_true) < 1e-13);

    // damping of interval components: w = D^{1/2} e
    let e0 = random_vec(&mut r, n, 1.0);
    let mut e1 = e0.clone();
    s.apply(&jac, &vec![0.0; n], &mut e1, false);
    let to_w = |e: &[f64]| DMatrix::from_fn(n, 1, |i, _| e[i] * diag[i].sqrt());
    let c0 = eig.eigenvectors.transpose() * to_w(&e0);
    let c1 = eig.eigenvectors.transpose() * to_w(&e1);
    let bound = s.contraction_bound();
    let mut checked = 0;
    for i in 0..n {
        let lam = eig.eigenvalues[i];
        if lam >= lo && lam <= hi {
            assert!(c1[i].abs() <= bound * c0[i].abs() + 1e-12, "lambda {lam}");
            checked += 1;
        }
    }
    assert!(checked > n / 2);

    // linearity in (x, b)
    let (x1, b1) = (random_vec(&mut r, n, 1.0), random_vec(&mut r, n, 1.0));
    let (x2, b2) = (random_vec(&mut r, n, 1.0), random_vec(&mut r, n, 1.0));
    let run = |x: &[f64], b: &[f64]| {
        let mut y = x.to_vec();
        s.apply(&jac, b, &mut y, false);
        y
    };
    let lhs = run(
        &x1.iter().zip(&x2).map(|(a, b)| a + 2.0 * b).collect::<Vec<_>>(),
        &b1.iter().zip(&b2).map(|(a, b)| a + 2.0 * b).collect::<Vec<_>>(),
    );
    let rhs: Vec<f64> = run(&x1, &b1).iter().zip(run(&x2, &b2)).map(|(a, b)| a + 2.0 * b).collect();
    assert!(rel_diff(&lhs, &rhs) < 1e-13);
}

fn tight_newton() -> NewtonConfig {
    NewtonConfig { linear_rtol: 1e-12, ..NewtonConfig::default() }
}

#[test]
fn near_linear_problem_takes_one_newton_step() {
    let mut op = bar_operator([2.0, 1.0, 1.0], [4, 2, 2], 1, [0.0, 0.0, -1e-9], Current);
    let mut u = vec![0.0; op.num_dofs()];
    let rep = newton_solve(&mut op, &mut u, &NewtonConfig::default()).unwrap();
    assert!(rep.converged);
    assert_eq!(rep.iterations(), 1);
}

#[test]
fn quadratic_convergence_tail() {
    let mut op = bar_operator([2.0, 1.0, 1.0], [4, 2, 2], 2, [0.0, 0.0, -0.04], InitialTuned);
    let mut u = vec![0.0; op.num_dofs()];
    let cfg = NewtonConfig { rtol: 1e-11, ..tight_newton() };
    let rep = newton_solve(&mut op, &mut u, &cfg).unwrap();
    assert!(rep.converged, "{rep:?}");
    let norms: Vec<f64> = std::iter::once(rep.initial_residual)
        .chain(rep.steps.iter().map(|s| s.residual_norm))
        .collect();
    let k = norms.len();
    assert!(k >= 3);
    for i in k - 3..k - 1 {
        let ratio = norms[i + 1] / (norms[i] * norms[i]);
        assert!(ratio < 1e3, "{norms:?}");
    }
}

#[test]
fn line_search_behaviour() {
    // nearly linear: the secant root is the full step
    let mut op = bar_operator([2.0, 1.0, 1.0], [2, 1, 1], 1, [0.0, 0.0, -1e-8], Current);
    let u = vec![0.0; op.num_dofs()];
    let f = op.apply_residual(&u).unwrap();
    let jac = op.jacobian().unwrap();
    let h = MultigridHierarchy::build(&jac, &MultigridConfig::default()).unwrap();
    let du: Vec<f64> = apply(&h, &f.iter().map(|v| -v).collect::<Vec<_>>());
    let alpha = critical_point_alpha(&op, &u, &du, dot(&f, &du)).unwrap();
    assert!((alpha - 1.0).abs() < 1e-6);
    // ascent direction: full step with a warning
    let up: Vec<f64> = du.iter().map(|v| -v).collect();
    assert_eq!(critical_point_alpha(&op, &u, &up, dot(&f, &up)).unwrap(), 1.0);

    // hyperelastic step from rest under a large load
    let mut op = bar_operator([2.0, 1.0, 1.0], [4, 2, 2], 2, [0.0, 0.0, -0.08], InitialTuned);
    let u = vec![0.0; op.num_dofs()];
    let f = op.apply_residual(&u).unwrap();
    let jac = op.jacobian().unwrap();
    let h = MultigridHierarchy::build(&jac, &MultigridConfig::default()).unwrap();
    let mut du = vec![0.0; u.len()];
    cg_solve(&jac, &h, &f.iter().map(|v| -v).collect::<Vec<_>>(), &mut du, 1e-10, 200).unwrap();
    let g = |a: f64| {
        let x: Vec<f64> = u.iter().zip(&du).map(|(p, q)| p + a * q).collect();
        dot(&op.evaluate_residual(&x).unwrap(), &du)
    };
    let alpha = critical_point_alpha(&op, &u, &du, dot(&f, &du)).unwrap();
    assert!(g(alpha).abs() < g(1.0).abs(), "alpha {alpha}");
}

#[test]
fn lbfgs_variants() {
    // exact initial inverse Hessian on a nearly linear problem
    let mut op = bar_operator([2.0, 1.0, 1.0], [3, 2, 2], 1, [0.0, 0.0, -1e-9], Current);
    let mut u = vec![0.0; op.num_dofs()];
    let rep = lbfgs_solve(&mut op, &mut u, &LbfgsConfig::default()).unwrap();
    assert!(rep.converged && rep.iterations() == 1, "{rep:?}");

    // m = 0 is preconditioned steepest descent and still converges
    let mut op = bar_operator([2.0, 1.0, 1.0], [4, 2, 2], 2, [0.0, 0.0, -0.02], InitialTuned);
    let mut u0 = vec![0.0; op.num_dofs()];
    let cfg = LbfgsConfig { memory: 0, rtol: 1e-6, ..LbfgsConfig::default() };
    let sd = lbfgs_solve(&mut op, &mut u0, &cfg).unwrap();
    let cfg = LbfgsConfig { memory: 5, rtol: 1e-6, ..LbfgsConfig::default() };
    let mut u5 = vec![0.0; op.num_dofs()];
    let lb = lbfgs_solve(&mut op, &mut u5, &cfg).unwrap();
    assert!(sd.converged && lb.converged);
    assert!(lb.iterations() <= sd.iterations());
    assert!(rel_diff(&u0, &u5) < 1e-4);
}

#[test]
fn lbfgs_uses_fewer_jacobian_applies_than_newton() {
    let traction = [0.0, 0.0, -0.003];
    let mut op = bar_operator([4.0, 1.0, 1.0], [8, 2, 2], 2, traction, InitialTuned);
    let mut u = vec![0.0; op.num_dofs()];
    op.reset_counters();
    let cfg = NewtonConfig { rtol: 1e-6, ..NewtonConfig::default() };
    let nr = newton_solve(&mut op, &mut u, &cfg).unwrap();
    let newton_applies = op.jacobian_applies();
    let mut op = bar_operator([4.0, 1.0, 1.0], [8, 2, 2], 2, traction, InitialTuned);
    let mut v = vec![0.0; op.num_dofs()];
    op.reset_counters();
    let cfg = LbfgsConfig { rtol: 1e-6, refresh_interval: 1000, ..LbfgsConfig::default() };
    let lr = lbfgs_solve(&mut op, &mut v, &cfg).unwrap();
    let lbfgs_applies = op.jacobian_applies();
    assert!(nr.converged && lr.converged, "{nr:?}\n{lr:?}");
    assert!(lbfgs_applies < newton_applies, "lbfgs {lbfgs_applies} newton {newton_applies}");
}

#[test]
fn continuation_properties() {
    let energy_for = |steps: usize| {
        let mut op = bar_operator([2.0, 1.0, 1.0], [4, 2, 2], 2, [0.0, 0.0, -0.03], InitialTuned);
        let solver = NonlinearSolver::Newton(NewtonConfig { rtol: 1e-10, ..tight_newton() });
        let (u, rep) = solve_with_continuation(&mut op, &solver, steps).unwrap();
        assert_eq!(rep.load_factors.len(), steps);
        assert_eq!(*rep.load_factors.last().unwrap(), 1.0);
        op.total_strain_energy(&u).unwrap()
    };
    let psi: Vec<f64> = [1, 2, 5].iter().map(|n| energy_for(*n)).collect();
    assert!(psi[0] > 0.0);
    for v in &psi[1..] {
        assert!(((v - psi[0]) / psi[0]).abs() < 1e-8, "{psi:?}");
    }

    let mut op = bar_operator([2.0, 1.0, 1.0], [2, 1, 1], 2, [0.0; 3], Current);
    let solver = NonlinearSolver::Newton(NewtonConfig::default());
    let (u, rep) = solve_with_continuation(&mut op, &solver, 3).unwrap();
    assert!(u.iter().all(|v| *v == 0.0));
    assert!(rep.solves.iter().all(|s| s.iterations() == 0));
}

#[test]
fn every_representation_solves_the_same_problem() {
    let mut reference = None;
    for rep in JacobianRepresentation::ALL {
        let mut op = bar_operator([2.0, 1.0, 1.0], [2, 1, 1], 2, [0.0, 0.02, -0.03], rep);
        let mut u = vec![0.0; op.num_dofs()];
        let r = newton_solve(&mut op, &mut u, &tight_newton()).unwrap();
        assert!(r.converged);
        match &reference {
            None => reference = Some(u),
            Some(u0) => assert!(rel_diff(&u, u0) < 1e-7),
        }
    }
}
