mod common;

use common::*;
use hyperpmg::basis::{gauss_lobatto_nodes, QuadratureRule1D};
use hyperpmg::linalg::LinearOperator;
use hyperpmg::material::{JacobianRepresentation, NeoHookean, Physics};
use hyperpmg::mesh::{BoundaryCondition, Face};
use hyperpmg::operator::{assemble, coo_numeric, coo_symbolic, Discretization, HyperelasticOperator};
use hyperpmg::Error;

use JacobianRepresentation::*;

#[test]
fn zero_displacement_zero_load_gives_zero_residual() {
    let mut op = bar_operator([1.0, 1.0, 1.0], [2, 2, 2], 2, [0.0; 3], Current);
    let f = op.apply_residual(&vec![0.0; op.num_dofs()]).unwrap();
    assert!(f.iter().all(|v| *v == 0.0));
    assert_eq!(op.total_strain_energy(&vec![0.0; op.num_dofs()]).unwrap(), 0.0);
}

/// ∫ φ_a over a 1D element equals its GLL weight times h/2, so the nodal
/// load of a uniform traction on a flat face is a product of 1D sums.
fn gll_weights(p: usize) -> Vec<f64> {
    let x = gauss_lobatto_nodes(p + 1).unwrap();
    let n = p as f64;
    x.iter()
        .map(|xi| {
            // P_p(x) by recurrence
            let (mut p0, mut p1) = (1.0, *xi);
            for k in 1..p {
                let k = k as f64;
                let p2 = ((2.0 * k + 1.0) * xi * p1 - k * p0) / (k + 1.0);
                p0 = p1;
                p1 = p2;
            }
            2.0 / (n * (n + 1.0) * p1 * p1)
        })
        .collect()
}

fn lattice_integral(count: usize, length: f64, p: usize) -> Vec<f64> {
    let w = gll_weights(p);
    let h = length / count as f64;
    let mut out = vec![0.0; count * p + 1];
    for e in 0..count {
        for (a, wa) in w.iter().enumerate() {
            out[e * p + a] += 0.5 * h * wa;
        }
    }
    out
}

#[test]
fn traction_matches_boundary_quadrature_oracle() {
    for p in 1..=3 {
        let t = [0.3, -0.2, 0.7];
        let (ext, counts) = ([2.0, 1.5, 0.5], [2, 3, 2]);
        let mut op = bar_operator(ext, counts, p, t, Current);
        let f = op.apply_residual(&vec![0.0; op.num_dofs()]).unwrap();
        let iy = lattice_integral(counts[1], ext[1], p);
        let iz = lattice_integral(counts[2], ext[2], p);
        let mesh = op.discretization().mesh();
        let dims = mesh.node_dims();
        let mut expected = vec![0.0; op.num_dofs()];
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                let n = mesh.node_index(dims[0] - 1, j, k);
                for c in 0..3 {
                    expected[3 * n + c] = -t[c] * iy[j] * iz[k];
                }
            }
        }
        assert!(rel_diff(&f, &expected) < 1e-13, "p = {p}: {}", rel_diff(&f, &expected));
    }
}

#[test]
fn residual_is_energy_gradient() {
    let mut r = rng(1);
    for rep in JacobianRepresentation::ALL {
        let op = bar_operator([1.0, 1.0, 1.0], [2, 1, 2], 2, [0.05, 0.02, -0.01], rep);
        let mut u = smooth_displacement(&op, 0.1);
        let noise = random_vec(&mut r, u.len(), 0.01);
        for (ui, ni) in u.iter_mut().zip(&noise) {
            *ui += ni;
        }
        op.discretization().mask(&mut u);
        let mut du = random_vec(&mut r, u.len(), 1.0);
        op.discretization().mask(&mut du);
        let f = op.evaluate_residual(&u).unwrap();
        let h = 1e-5;
        let plus: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + h * b).collect();
        let minus: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a - h * b).collect();
        let fd = (op.potential_energy(&plus).unwrap() - op.potential_energy(&minus).unwrap()) / (2.0 * h);
        let an = dot(&f, &du);
        assert!(((an - fd) / an).abs() < 1e-6, "{rep}: {an} vs {fd}");
    }
}

#[test]
fn jacobian_needs_state() {
    let op = bar_operator([1.0, 1.0, 1.0], [1, 1, 1], 1, [0.0; 3], Current);
    assert_eq!(op.jacobian().unwrap_err(), Error::StateNotInitialized);
    assert_eq!(op.apply_jacobian(&vec![0.0; op.num_dofs()]).unwrap_err(), Error::StateNotInitialized);
}

#[test]
fn jacobian_matches_finite_differences_and_is_symmetric() {
    let mut r = rng(2);
    for rep in JacobianRepresentation::ALL {
        let mut op = bar_operator([2.0, 1.0, 1.0], [2, 1, 1], 3, [0.0; 3], rep);
        let u = smooth_displacement(&op, 0.15);
        op.apply_residual(&u).unwrap();
        let j = op.jacobian().unwrap();
        let n = op.num_dofs();
        assert!(op.apply_jacobian(&vec![0.0; n]).unwrap().iter().all(|v| *v == 0.0));

        let mut du = random_vec(&mut r, n, 1.0);
        op.discretization().mask(&mut du);
        let jdu = op.apply_jacobian(&du).unwrap();
        let h = 1e-6;
        let plus: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + h * b).collect();
        let minus: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a - h * b).collect();
        let fp = op.evaluate_residual(&plus).unwrap();
        let fm = op.evaluate_residual(&minus).unwrap();
        let fd: Vec<f64> = fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        assert!(rel_diff(&jdu, &fd) < 1e-6, "{rep}: {}", rel_diff(&jdu, &fd));

        let x = random_vec(&mut r, n, 1.0);
        let y = random_vec(&mut r, n, 1.0);
        let mut jx = vec![0.0; n];
        let mut jy = vec![0.0; n];
        j.apply(&x, &mut jx);
        j.apply(&y, &mut jy);
        let (a, b) = (dot(&jx, &y), dot(&x, &jy));
        assert!(((a - b) / a.abs()).abs() < 1e-11, "{rep}: {a} vs {b}");

        // constrained entries pass through
        for (d, &c) in op.discretization().constrained().iter().enumerate() {
            if c {
                assert_eq!(jx[d], x[d]);
            }
        }
        // linearity
        let combo: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
        let jc = op.apply_jacobian(&combo).unwrap();
        let want: Vec<f64> = jx.iter().zip(&jy).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
        assert!(rel_diff(&jc, &want) < 1e-13);
    }
}

#[test]
fn assembled_matches_matrix_free() {
    let mut r = rng(3);
    for p in 1..=3 {
        for counts in [[1, 1, 1], [2, 2, 2], [3, 3, 3]] {
            if p == 3 && counts[0] == 3 {
                continue;
            }
            let rep = JacobianRepresentation::ALL[p % 4];
            let mut op = bar_operator([1.0, 1.0, 1.0], counts, p, [0.0; 3], rep);
            let u = smooth_displacement(&op, 0.2);
            op.apply_residual(&u).unwrap();
            let j = op.jacobian().unwrap();
            let a = assemble(&j).unwrap();
            assert!(a.symmetry_defect() < 1e-12);
            let x = random_vec(&mut r, op.num_dofs(), 1.0);
            let mut ax = vec![0.0; x.len()];
            let mut jx = vec![0.0; x.len()];
            a.apply(&x, &mut ax);
            j.apply(&x, &mut jx);
            assert!(rel_diff(&ax, &jx) < 1e-12, "p {p} {counts:?}: {}", rel_diff(&ax, &jx));
            let diag = op.extract_diagonal().unwrap();
            assert!(rel_diff(&diag, &a.diagonal()) < 1e-12);
            for (d, &c) in op.discretization().constrained().iter().enumerate() {
                if c {
                    assert_eq!(a.get(d, d), 1.0);
                    assert_eq!(diag[d], 1.0);
                    assert_eq!(a.row(d).0, &[d]);
                }
            }
            assert!(diag.iter().all(|v| *v > 0.0));
        }
    }
}

#[test]
fn coo_refill_is_bit_identical() {
    let mut op = bar_operator([1.0, 1.0, 1.0], [2, 2, 2], 2, [0.0; 3], InitialTuned);
    let u = smooth_displacement(&op, 0.1);
    op.apply_residual(&u).unwrap();
    let j = op.jacobian().unwrap();
    let t = coo_symbolic(j.discretization()).unwrap();
    let mut a = t.pattern();
    let mut b = t.pattern();
    coo_numeric(&j, &t, &mut a).unwrap();
    coo_numeric(&j, &t, &mut b).unwrap();
    assert_eq!(a.values(), b.values());

    // a template for another discretization is rejected
    let other = bar_operator([1.0, 1.0, 1.0], [1, 1, 1], 2, [0.0; 3], InitialTuned);
    let t2 = coo_symbolic(other.discretization()).unwrap();
    assert!(coo_numeric(&j, &t2, &mut t2.pattern()).is_err());
}

#[test]
fn q1_interior_vertex_row_has_81_entries() {
    let disc = Discretization::new([1.0; 3], [3, 3, 3], 1, 2, &[]).unwrap();
    let t = coo_symbolic(&disc).unwrap();
    let m = t.pattern();
    let n = disc.mesh().node_index(1, 1, 1);
    for c in 0..3 {
        assert_eq!(m.row(3 * n + c).0.len(), 81);
    }
    let corner = disc.mesh().node_index(0, 0, 0);
    assert_eq!(m.row(3 * corner).0.len(), 24);
}

/// Dense linear-elasticity stiffness built from element matrices with its own
/// Lagrange tabulation.
fn dense_linear_stiffness(disc: &Discretization, mat: &NeoHookean) -> Vec<f64> {
    let p = disc.order();
    let nodes = gauss_lobatto_nodes(p + 1).unwrap();
    let rule = QuadratureRule1D::gauss_legendre(p + 1).unwrap();
    let lag = |a: usize, x: f64| -> (f64, f64) {
        let mut v = 1.0;
        for (m, xm) in nodes.iter().enumerate() {
            if m != a {
                v *= (x - xm) / (nodes[a] - xm);
            }
        }
        let mut d = 0.0;
        for (k, xk) in nodes.iter().enumerate() {
            if k == a {
                continue;
            }
            let mut t = 1.0 / (nodes[a] - xk);
            for (m, xm) in nodes.iter().enumerate() {
                if m != a && m != k {
                    t *= (x - xm) / (nodes[a] - xm);
                }
            }
            d += t;
        }
        (v, d)
    };
    let mesh = disc.mesh();
    let h: Vec<f64> = (0..3).map(|d| mesh.extents()[d] / mesh.counts()[d] as f64).collect();
    let n = disc.num_dofs();
    let p1 = p + 1;
    let nn = p1 * p1 * p1;
    let mut k = vec![0.0; n * n];
    for e in 0..disc.num_elements() {
        let enodes = disc.restriction().element_nodes(e);
        let mut ke = vec![0.0; 9 * nn * nn];
        for (qk, wk) in rule.weights.iter().enumerate() {
            for (qj, wj) in rule.weights.iter().enumerate() {
                for (qi, wi) in rule.weights.iter().enumerate() {
                    let w = wi * wj * wk * h[0] * h[1] * h[2] / 8.0;
                    let q = [rule.points[qi], rule.points[qj], rule.points[qk]];
                    let grads: Vec<[f64; 3]> = (0..nn)
                        .map(|a| {
                            let idx = [a % p1, (a / p1) % p1, a / (p1 * p1)];
                            let v: Vec<(f64, f64)> = (0..3).map(|d| lag(idx[d], q[d])).collect();
                            [
                                v[0].1 * v[1].0 * v[2].0 * 2.0 / h[0],
                                v[0].0 * v[1].1 * v[2].0 * 2.0 / h[1],
                                v[0].0 * v[1].0 * v[2].1 * 2.0 / h[2],
                            ]
                        })
                        .collect();
                    for a in 0..nn {
                        for b in 0..nn {
                            let gg: f64 = (0..3).map(|d| grads[a][d] * grads[b][d]).sum();
                            for ci in 0..3 {
                                for cj in 0..3 {
                                    let mut v = mat.lambda * grads[a][ci] * grads[b][cj]
                                        + mat.mu * grads[a][cj] * grads[b][ci];
                                    if ci == cj {
                                        v += mat.mu * gg;
                                    }
                                    ke[((ci * nn + a) * 3 + cj) * nn + b] += w * v;
                                }
                            }
                        }
                    }
                }
            }
        }
        for ci in 0..3 {
            for a in 0..nn {
                for cj in 0..3 {
                    for b in 0..nn {
                        let (r, c) = (3 * enodes[a] + ci, 3 * enodes[b] + cj);
                        k[r * n + c] += ke[((ci * nn + a) * 3 + cj) * nn + b];
                    }
                }
            }
        }
    }
    let mask = disc.constrained();
    for r in 0..n {
        for c in 0..n {
            if mask[r] || mask[c] {
                k[r * n + c] = if r == c { 1.0 } else { 0.0 };
            }
        }
    }
    k
}

#[test]
fn assembled_at_rest_equals_linear_elastic_stiffness() {
    for (p, counts) in [(1, [2, 1, 2]), (2, [2, 2, 1]), (3, [1, 1, 1])] {
        for rep in JacobianRepresentation::ALL {
            let bcs = [BoundaryCondition::clamped(Face::NegX)];
            let disc = Discretization::new([1.0, 0.7, 1.3], counts, p, p + 1, &bcs).unwrap();
            let mat = NeoHookean::from_young_poisson(1.0, 0.3).unwrap();
            let oracle = dense_linear_stiffness(&disc, &mat);
            let mut op = HyperelasticOperator::new(disc, Physics::new(mat, rep), [0.0; 3]).unwrap();
            op.apply_residual(&vec![0.0; op.num_dofs()]).unwrap();
            let a = assemble(&op.jacobian().unwrap()).unwrap().to_dense();
            let scale = oracle.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let err = a.iter().zip(&oracle).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            assert!(err / scale < 1e-12, "p {p} {rep}: {err}");
        }
    }
}

#[test]
fn uniform_stretch_energy_on_unit_cube() {
    let mat = NeoHookean::new(0.8, 1.1).unwrap();
    for p in 1..=3 {
        let alpha = 1.15;
        let disc = Discretization::new([1.0; 3], [1, 1, 1], p, p + 1, &[]).unwrap();
        let op = HyperelasticOperator::new(disc, Physics::new(mat, Current), [0.0; 3]).unwrap();
        let mesh = op.discretization().mesh();
        let mut u = vec![0.0; op.num_dofs()];
        for (n, x) in mesh.coords().iter().enumerate() {
            for c in 0..3 {
                u[3 * n + c] = (alpha - 1.0) * x[c];
            }
        }
        let la: f64 = 3.0 * alpha.ln();
        let psi = 0.5 * mat.lambda * la * la - mat.mu * la + 1.5 * mat.mu * (alpha * alpha - 1.0);
        let got = op.total_strain_energy(&u).unwrap();
        assert!((got - psi).abs() < 1e-13 * psi, "p {p}: {got} vs {psi}");
    }
}

#[test]
fn inverted_element_is_located() {
    let mut op = bar_operator([1.0; 3], [2, 1, 1], 1, [0.0; 3], Current);
    let mesh = op.discretization().mesh();
    let mut u = vec![0.0; op.num_dofs()];
    for (n, x) in mesh.coords().iter().enumerate() {
        u[3 * n] = -2.5 * x[0];
    }
    op.lift(&mut u);
    match op.apply_residual(&u) {
        Err(Error::InvertedElement { element, .. }) => assert!(element < 2),
        other => panic!("expected inverted element, got {other:?}"),
    }
    assert!(op.total_strain_energy(&u).is_err());
}

#[test]
fn body_force_load_integrates_to_total_weight() {
    let disc = Discretization::new([2.0, 1.0, 0.5], [2, 2, 1], 2, 3, &[]).unwrap();
    let mut op = HyperelasticOperator::new(disc, physics(Current), [0.0, 0.0, -3.0]).unwrap();
    let f = op.apply_residual(&vec![0.0; op.num_dofs()]).unwrap();
    let fz: f64 = f.iter().skip(2).step_by(3).sum();
    assert!((fz - 3.0).abs() < 1e-13);
    op.set_load_factor(0.5);
    assert!((op.external_load().iter().skip(2).step_by(3).sum::<f64>() + 1.5).abs() < 1e-13);
}

#[test]
fn energy_converges_monotonically_under_refinement() {
    // nodal interpolant of a fixed smooth field
    let mat = NeoHookean::new(1.0, 1.0).unwrap();
    let field = |x: [f64; 3]| {
        [
            0.1 * (x[1] * 2.0).sin(),
            0.05 * x[0] * x[0] * x[2],
            0.08 * (x[0] + x[1]).cos() - 0.08,
        ]
    };
    let energy = |p: usize, n: usize| {
        let disc = Discretization::new([1.0; 3], [n; 3], p, p + 1, &[]).unwrap();
        let op = HyperelasticOperator::new(disc, Physics::new(mat, Current), [0.0; 3]).unwrap();
        let mesh = op.discretization().mesh();
        let mut u = vec![0.0; op.num_dofs()];
        for (i, x) in mesh.coords().iter().enumerate() {
            u[3 * i..3 * i + 3].copy_from_slice(&field(*x));
        }
        op.total_strain_energy(&u).unwrap()
    };
    let reference = energy(4, 4);
    let errs: Vec<f64> = (1..=3).map(|n| (energy(1, n) - reference).abs()).collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}
