//! Matrix-free residual and Jacobian operators `Eᵀ Bᵀ D B E`, assembled
//! sparse matrices, diagonals and strain energy.

mod assembly;
mod sparse;

pub use assembly::{assemble, coo_numeric, coo_symbolic, coo_values, CooTemplate, DISCARD};
pub use sparse::SparseMatrix;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rayon::prelude::*;

use crate::basis::{lagrange_tabulate, Basis1D};
use crate::error::{invalid, Error, Result};
use crate::linalg::LinearOperator;
use crate::material::tensor::{to_flat, Mat3};
use crate::material::Physics;
use crate::mesh::{BoundaryCondition, BoxMesh, ElementRestriction, Face, GeometricFactors};

/// Elements processed per parallel task.
const CHUNK: usize = 8;

/// Function space on a box mesh: lattice, restriction, basis and the
/// Dirichlet mask (one flag per DoF, interleaved `node * 3 + component`).
#[derive(Debug, Clone)]
pub struct Discretization {
    mesh: BoxMesh,
    restriction: ElementRestriction,
    basis: Basis1D,
    conditions: Vec<BoundaryCondition>,
    constrained: Vec<bool>,
    dirichlet_values: Vec<f64>,
}

impl Discretization {
    /// Order-`p` space with `q` Gauss points per direction.
    pub fn new(
        extents: [f64; 3],
        counts: [usize; 3],
        order: usize,
        q: usize,
        conditions: &[BoundaryCondition],
    ) -> Result<Self> {
        let mesh = BoxMesh::new(extents, counts, order)?;
        let basis = Basis1D::new(order, q)?;
        Self::from_parts(mesh, basis, conditions)
    }

    pub fn from_parts(mesh: BoxMesh, basis: Basis1D, conditions: &[BoundaryCondition]) -> Result<Self> {
        if basis.order() != mesh.order() {
            return Err(invalid("basis order must match mesh order"));
        }
        let restriction = ElementRestriction::new(&mesh);
        let n = mesh.num_dofs();
        let mut constrained = vec![false; n];
        let mut values = vec![0.0; n];
        for bc in conditions {
            if let BoundaryCondition::Dirichlet { face, components, value } = bc {
                for node in mesh.boundary_nodes(*face) {
                    for c in 0..3 {
                        if !components[c] {
                            continue;
                        }
                        let dof = 3 * node + c;
                        if constrained[dof] && values[dof] != value[c] {
                            return Err(invalid(format!(
                                "conflicting Dirichlet values on node {node} component {c}"
                            )));
                        }
                        constrained[dof] = true;
                        values[dof] = value[c];
                    }
                }
            }
        }
        Ok(Discretization {
            mesh,
            restriction,
            basis,
            conditions: conditions.to_vec(),
            constrained,
            dirichlet_values: values,
        })
    }

    /// Same mesh and quadrature with a different polynomial order.
    pub fn with_order(&self, order: usize) -> Result<Self> {
        Self::new(
            self.mesh.extents(),
            self.mesh.counts(),
            order,
            self.basis.num_qpts_1d(),
            &self.conditions,
        )
    }

    pub fn mesh(&self) -> &BoxMesh {
        &self.mesh
    }
    pub fn restriction(&self) -> &ElementRestriction {
        &self.restriction
    }
    pub fn basis(&self) -> &Basis1D {
        &self.basis
    }
    pub fn order(&self) -> usize {
        self.basis.order()
    }
    pub fn conditions(&self) -> &[BoundaryCondition] {
        &self.conditions
    }
    pub fn constrained(&self) -> &[bool] {
        &self.constrained
    }
    pub fn num_dofs(&self) -> usize {
        self.mesh.num_dofs()
    }
    pub fn num_elements(&self) -> usize {
        self.mesh.num_elements()
    }
    pub fn num_constrained(&self) -> usize {
        self.constrained.iter().filter(|c| **c).count()
    }

    /// Writes `scale` times the prescribed values into the constrained DoFs of `u`.
    pub fn lift(&self, u: &mut [f64], scale: f64) {
        for ((ui, &c), &v) in u.iter_mut().zip(&self.constrained).zip(&self.dirichlet_values) {
            if c {
                *ui = scale * v;
            }
        }
    }

    /// Zeroes the constrained DoFs.
    pub fn mask(&self, v: &mut [f64]) {
        for (vi, &c) in v.iter_mut().zip(&self.constrained) {
            if c {
                *vi = 0.0;
            }
        }
    }

    fn check_len(&self, v: &[f64], what: &str) -> Result<()> {
        if v.len() != self.num_dofs() {
            return Err(invalid(format!(
                "{what}: expected {} DoFs, got {}",
                self.num_dofs(),
                v.len()
            )));
        }
        Ok(())
    }
}

/// Linearization data stored at every quadrature point.
#[derive(Debug, Clone)]
pub struct QuadratureState {
    physics: Physics,
    qpts_per_element: usize,
    data: Vec<f64>,
}

impl QuadratureState {
    pub fn scalars_per_point(&self) -> usize {
        self.physics.state_scalars()
    }
    pub fn qpts_per_element(&self) -> usize {
        self.qpts_per_element
    }
    pub fn num_points(&self) -> usize {
        self.data.len() / self.scalars_per_point()
    }
    pub fn data(&self) -> &[f64] {
        &self.data
    }
    pub fn bytes(&self) -> usize {
        self.data.len() * std::mem::size_of::<f64>()
    }
    pub fn point(&self, element: usize, q: usize) -> &[f64] {
        let s = self.scalars_per_point();
        let o = (element * self.qpts_per_element + q) * s;
        &self.data[o..o + s]
    }
}

/// Nonlinear hyperelastic operator on one discretization, with loads.
#[derive(Debug)]
pub struct HyperelasticOperator {
    disc: Arc<Discretization>,
    geometry: Arc<GeometricFactors>,
    physics: Physics,
    /// Full-load external force vector (traction plus body force).
    external: Vec<f64>,
    load_factor: f64,
    state: Option<Arc<QuadratureState>>,
    jacobian_applies: Arc<AtomicUsize>,
    residual_evaluations: AtomicUsize,
}

impl HyperelasticOperator {
    /// Isoparametric operator; geometry has the same order as the solution.
    pub fn new(disc: Discretization, physics: Physics, body_force: [f64; 3]) -> Result<Self> {
        let order = disc.order();
        Self::with_geometry_order(disc, physics, body_force, order)
    }

    /// Builds geometric factors from an order-`geometry_order` lattice of the
    /// same box, tabulated at the solution quadrature points.
    pub fn with_geometry_order(
        disc: Discretization,
        physics: Physics,
        body_force: [f64; 3],
        geometry_order: usize,
    ) -> Result<Self> {
        let q = disc.basis().num_qpts_1d();
        let geometry = if geometry_order == disc.order() {
            GeometricFactors::compute(disc.mesh(), disc.basis())?
        } else {
            if geometry_order + 1 > q {
                return Err(invalid("geometry order too high for the quadrature rule"));
            }
            let gmesh = BoxMesh::new(disc.mesh().extents(), disc.mesh().counts(), geometry_order)?;
            GeometricFactors::compute(&gmesh, &Basis1D::new(geometry_order, q)?)?
        };
        Self::from_geometry(disc, geometry, physics, body_force)
    }

    /// Uses caller-supplied geometric factors (for example from a mapped mesh).
    pub fn from_geometry(
        disc: Discretization,
        geometry: GeometricFactors,
        physics: Physics,
        body_force: [f64; 3],
    ) -> Result<Self> {
        if geometry.len() != disc.num_elements() * disc.basis().num_qpts() {
            return Err(invalid("geometric factors do not match the discretization"));
        }
        let mut external = vec![0.0; disc.num_dofs()];
        for bc in disc.conditions() {
            if let BoundaryCondition::Traction { face, value } = bc {
                add_traction_load(&disc, *face, *value, &mut external)?;
            }
        }
        if body_force.iter().any(|b| *b != 0.0) {
            add_body_load(&disc, &geometry, body_force, &mut external)?;
        }
        disc.mask(&mut external);
        Ok(HyperelasticOperator {
            disc: Arc::new(disc),
            geometry: Arc::new(geometry),
            physics,
            external,
            load_factor: 1.0,
            state: None,
            jacobian_applies: Arc::new(AtomicUsize::new(0)),
            residual_evaluations: AtomicUsize::new(0),
        })
    }

    pub fn discretization(&self) -> &Arc<Discretization> {
        &self.disc
    }
    pub fn geometry(&self) -> &GeometricFactors {
        &self.geometry
    }
    pub fn physics(&self) -> &Physics {
        &self.physics
    }
    pub fn num_dofs(&self) -> usize {
        self.disc.num_dofs()
    }
    pub fn load_factor(&self) -> f64 {
        self.load_factor
    }

    /// Scales tractions, body force and prescribed displacements.
    pub fn set_load_factor(&mut self, t: f64) {
        self.load_factor = t;
    }

    pub fn state(&self) -> Option<&Arc<QuadratureState>> {
        self.state.as_ref()
    }

    pub fn clear_state(&mut self) {
        self.state = None;
    }

    /// Fine-level Jacobian applications so far (matrix-free, including smoothing).
    pub fn jacobian_applies(&self) -> usize {
        self.jacobian_applies.load(Ordering::Relaxed)
    }

    pub fn residual_evaluations(&self) -> usize {
        self.residual_evaluations.load(Ordering::Relaxed)
    }

    pub fn reset_counters(&self) {
        self.jacobian_applies.store(0, Ordering::Relaxed);
        self.residual_evaluations.store(0, Ordering::Relaxed);
    }

    /// External load vector at the current load factor.
    pub fn external_load(&self) -> Vec<f64> {
        self.external.iter().map(|f| f * self.load_factor).collect()
    }

    /// Imposes the prescribed displacements (at the current load factor).
    pub fn lift(&self, u: &mut [f64]) {
        self.disc.lift(u, self.load_factor);
    }

    /// `F(u)`; stores the quadrature state for subsequent Jacobian applies.
    pub fn apply_residual(&mut self, u: &[f64]) -> Result<Vec<f64>> {
        let (f, state) = self.residual_with_state(u)?;
        self.state = Some(Arc::new(state));
        Ok(f)
    }

    /// `F(u)` without touching the stored state.
    pub fn evaluate_residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok(self.residual_with_state(u)?.0)
    }

    fn residual_with_state(&self, u: &[f64]) -> Result<(Vec<f64>, QuadratureState)> {
        self.disc.check_len(u, "residual input")?;
        self.residual_evaluations.fetch_add(1, Ordering::Relaxed);
        let disc = &*self.disc;
        let geo = &*self.geometry;
        let basis = disc.basis();
        let (nn, nq) = (basis.num_nodes(), basis.num_qpts());
        let nelem = disc.num_elements();
        let ns = self.physics.state_scalars();
        let mut out_e = vec![0.0; nelem * 3 * nn];
        let mut state = vec![0.0; nelem * nq * ns];
        let results: Vec<Result<()>> = out_e
            .par_chunks_mut(CHUNK * 3 * nn)
            .zip(state.par_chunks_mut(CHUNK * nq * ns))
            .enumerate()
            .map(|(ci, (oe, st))| {
                let first = ci * CHUNK;
                let count = oe.len() / (3 * nn);
                let mut ev = vec![0.0; count * 3 * nn];
                disc.restriction().gather_range(3, first..first + count, u, &mut ev);
                let mut grad = vec![0.0; count * 9 * nq];
                basis.apply_grad(3, &ev, &mut grad)?;
                for le in 0..count {
                    let e = first + le;
                    for q in 0..nq {
                        let g = read_grad(&grad, le, q, nq);
                        let gi = e * nq + q;
                        let flux = self
                            .physics
                            .residual(&g, &geo.dxi_dx[gi], geo.wdet[gi], &mut st[(le * nq + q) * ns..(le * nq + q + 1) * ns])
                            .map_err(|err| locate(err, e, q))?;
                        write_grad(&mut grad, le, q, nq, &flux);
                    }
                }
                basis.apply_grad_transpose(3, &grad, oe)?;
                Ok(())
            })
            .collect();
        results.into_iter().collect::<Result<()>>()?;
        let mut f = vec![0.0; disc.num_dofs()];
        disc.restriction().scatter_add(3, &out_e, &mut f);
        for (fi, ext) in f.iter_mut().zip(&self.external) {
            *fi -= self.load_factor * ext;
        }
        disc.mask(&mut f);
        Ok((f, QuadratureState { physics: self.physics, qpts_per_element: nq, data: state }))
    }

    /// Matrix-free Jacobian at the stored linearization point.
    pub fn jacobian(&self) -> Result<JacobianOperator> {
        let state = self.state.clone().ok_or(Error::StateNotInitialized)?;
        Ok(JacobianOperator {
            disc: self.disc.clone(),
            physics: self.physics,
            state,
            applies: self.jacobian_applies.clone(),
        })
    }

    /// `J du` at the stored linearization point.
    pub fn apply_jacobian(&self, du: &[f64]) -> Result<Vec<f64>> {
        self.disc.check_len(du, "jacobian input")?;
        let j = self.jacobian()?;
        let mut y = vec![0.0; du.len()];
        j.apply(du, &mut y);
        Ok(y)
    }

    /// Diagonal of the Jacobian at the stored linearization point.
    pub fn extract_diagonal(&self) -> Result<Vec<f64>> {
        Ok(self.jacobian()?.diagonal())
    }

    /// Total strain energy `Ψ(u) = Σ_e Σ_q W ψ`.
    pub fn total_strain_energy(&self, u: &[f64]) -> Result<f64> {
        self.disc.check_len(u, "energy input")?;
        let disc = &*self.disc;
        let geo = &*self.geometry;
        let basis = disc.basis();
        let (nn, nq) = (basis.num_nodes(), basis.num_qpts());
        let nelem = disc.num_elements();
        let nchunks = nelem.div_ceil(CHUNK);
        let partial: Vec<Result<f64>> = (0..nchunks)
            .into_par_iter()
            .map(|ci| {
                let first = ci * CHUNK;
                let count = CHUNK.min(nelem - first);
                let mut ev = vec![0.0; count * 3 * nn];
                disc.restriction().gather_range(3, first..first + count, u, &mut ev);
                let mut grad = vec![0.0; count * 9 * nq];
                basis.apply_grad(3, &ev, &mut grad)?;
                let mut sum = 0.0;
                for le in 0..count {
                    let e = first + le;
                    for q in 0..nq {
                        let g = read_grad(&grad, le, q, nq);
                        let gi = e * nq + q;
                        let psi = self.physics.energy(&g, &geo.dxi_dx[gi]).map_err(|err| locate(err, e, q))?;
                        sum += geo.wdet[gi] * psi;
                    }
                }
                Ok(sum)
            })
            .collect();
        let mut total = 0.0;
        for p in partial {
            total += p?;
        }
        Ok(total)
    }

    /// `Ψ(u) − f_ext · u` at the current load factor; its gradient on the
    /// free DoFs is `F(u)` under dead loads.
    pub fn potential_energy(&self, u: &[f64]) -> Result<f64> {
        let psi = self.total_strain_energy(u)?;
        let work: f64 = self.external.iter().zip(u).map(|(f, x)| f * x).sum();
        Ok(psi - self.load_factor * work)
    }
}

fn locate(err: Error, element: usize, point: usize) -> Error {
    match err {
        Error::InvertedDeformation { det } => Error::InvertedElement { element, point, det },
        other => other,
    }
}

#[inline]
fn read_grad(grad: &[f64], le: usize, q: usize, nq: usize) -> Mat3 {
    let mut g = [[0.0; 3]; 3];
    for (c, row) in g.iter_mut().enumerate() {
        for (d, v) in row.iter_mut().enumerate() {
            *v = grad[((le * 3 + c) * 3 + d) * nq + q];
        }
    }
    g
}

#[inline]
fn write_grad(grad: &mut [f64], le: usize, q: usize, nq: usize, m: &Mat3) {
    for (c, row) in m.iter().enumerate() {
        for (d, v) in row.iter().enumerate() {
            grad[((le * 3 + c) * 3 + d) * nq + q] = *v;
        }
    }
}

/// Linear Jacobian operator: a discretization (possibly coarser than the one
/// that produced the state) evaluated on a shared quadrature state. Constrained
/// DoFs act as the identity.
#[derive(Debug, Clone)]
pub struct JacobianOperator {
    disc: Arc<Discretization>,
    physics: Physics,
    state: Arc<QuadratureState>,
    applies: Arc<AtomicUsize>,
}

impl JacobianOperator {
    /// Galerkin coarse operator: the coarse basis is tabulated at the same
    /// quadrature points as the state.
    pub fn on_discretization(&self, disc: Arc<Discretization>) -> Result<Self> {
        if disc.basis().num_qpts() != self.state.qpts_per_element
            || disc.num_elements() * self.state.qpts_per_element != self.state.num_points()
        {
            return Err(invalid("discretization does not share the state's quadrature points"));
        }
        Ok(JacobianOperator {
            disc,
            physics: self.physics,
            state: self.state.clone(),
            applies: Arc::new(AtomicUsize::new(0)),
        })
    }

    pub fn discretization(&self) -> &Arc<Discretization> {
        &self.disc
    }
    pub fn physics(&self) -> &Physics {
        &self.physics
    }
    pub fn state(&self) -> &Arc<QuadratureState> {
        &self.state
    }
    pub fn applies(&self) -> usize {
        self.applies.load(Ordering::Relaxed)
    }

    /// The 9×9 pointwise tangent, `[(c_out * 3 + d_out) * 9 + c_in * 3 + d_in]`.
    pub fn point_tangent(&self, element: usize, q: usize) -> [f64; 81] {
        let st = self.state.point(element, q);
        let mut d = [0.0; 81];
        for col in 0..9 {
            let mut unit = [[0.0; 3]; 3];
            unit[col / 3][col % 3] = 1.0;
            let out = to_flat(&self.physics.jacobian(&unit, st));
            for row in 0..9 {
                d[row * 9 + col] = out[row];
            }
        }
        d
    }

    /// Diagonal of the operator; constrained entries are 1.
    pub fn diagonal(&self) -> Vec<f64> {
        let disc = &*self.disc;
        let basis = disc.basis();
        let (nn, nq) = (basis.num_nodes(), basis.num_qpts());
        let g = basis.dense_gradients();
        let nelem = disc.num_elements();
        let mut de = vec![0.0; nelem * 3 * nn];
        de.par_chunks_mut(3 * nn).enumerate().for_each(|(e, out)| {
            for q in 0..nq {
                let d = self.point_tangent(e, q);
                for c in 0..3 {
                    for i in 0..nn {
                        let gi = &g[(q * nn + i) * 3..(q * nn + i) * 3 + 3];
                        let mut s = 0.0;
                        for a in 0..3 {
                            for b in 0..3 {
                                s += gi[a] * d[(c * 3 + a) * 9 + c * 3 + b] * gi[b];
                            }
                        }
                        out[c * nn + i] += s;
                    }
                }
            }
        });
        let mut diag = vec![0.0; disc.num_dofs()];
        disc.restriction().scatter_add(3, &de, &mut diag);
        for (v, &c) in diag.iter_mut().zip(disc.constrained()) {
            if c {
                *v = 1.0;
            }
        }
        diag
    }

    /// Bytes held by this operator per DoF: state, restriction indices and
    /// two work vectors.
    pub fn bytes_per_dof(&self) -> f64 {
        let n = self.disc.num_dofs();
        let restriction = self.disc.num_elements()
            * self.disc.restriction().nodes_per_element()
            * std::mem::size_of::<usize>();
        (self.state.bytes() + restriction + 2 * n * 8) as f64 / n as f64
    }
}

impl LinearOperator for JacobianOperator {
    fn size(&self) -> usize {
        self.disc.num_dofs()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.applies.fetch_add(1, Ordering::Relaxed);
        let disc = &*self.disc;
        let basis = disc.basis();
        let (nn, nq) = (basis.num_nodes(), basis.num_qpts());
        let nelem = disc.num_elements();
        let mut xm = x.to_vec();
        disc.mask(&mut xm);
        let mut out_e = vec![0.0; nelem * 3 * nn];
        out_e.par_chunks_mut(CHUNK * 3 * nn).enumerate().for_each(|(ci, oe)| {
            let first = ci * CHUNK;
            let count = oe.len() / (3 * nn);
            let mut ev = vec![0.0; count * 3 * nn];
            disc.restriction().gather_range(3, first..first + count, &xm, &mut ev);
            let mut grad = vec![0.0; count * 9 * nq];
            basis.apply_grad(3, &ev, &mut grad).expect("shapes fixed at construction");
            for le in 0..count {
                let e = first + le;
                for q in 0..nq {
                    let g = read_grad(&grad, le, q, nq);
                    let out = self.physics.jacobian(&g, self.state.point(e, q));
                    write_grad(&mut grad, le, q, nq, &out);
                }
            }
            basis.apply_grad_transpose(3, &grad, oe).expect("shapes fixed at construction");
        });
        y.fill(0.0);
        disc.restriction().scatter_add(3, &out_e, y);
        for ((yi, xi), &c) in y.iter_mut().zip(x).zip(disc.constrained()) {
            if c {
                *yi = *xi;
            }
        }
    }
}

/// Consistent nodal load of a uniform dead traction on one box face.
fn add_traction_load(disc: &Discretization, face: Face, traction: [f64; 3], f: &mut [f64]) -> Result<()> {
    let mesh = disc.mesh();
    let basis = disc.basis();
    let p1 = basis.num_nodes_1d();
    let rule = basis.rule();
    let (interp, deriv) = lagrange_tabulate(basis.nodes(), &rule.points);
    let (axis, max_side) = face.axis_and_side();
    let fixed = if max_side { p1 - 1 } else { 0 };
    let (ta, tb) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let nq = rule.len();
    for e in mesh.boundary_elements(face) {
        let nodes = disc.restriction().element_nodes(e);
        // face nodes as a (p+1)² lattice indexed (a, b)
        let face_node = |a: usize, b: usize| {
            let mut ijk = [0; 3];
            ijk[axis] = fixed;
            ijk[ta] = a;
            ijk[tb] = b;
            nodes[ijk[0] + p1 * (ijk[1] + p1 * ijk[2])]
        };
        for qb in 0..nq {
            for qa in 0..nq {
                let mut dxa = [0.0; 3];
                let mut dxb = [0.0; 3];
                for b in 0..p1 {
                    for a in 0..p1 {
                        let x = mesh.coords()[face_node(a, b)];
                        let wa = deriv.get(qa, a) * interp.get(qb, b);
                        let wb = interp.get(qa, a) * deriv.get(qb, b);
                        for c in 0..3 {
                            dxa[c] += wa * x[c];
                            dxb[c] += wb * x[c];
                        }
                    }
                }
                let cross = [
                    dxa[1] * dxb[2] - dxa[2] * dxb[1],
                    dxa[2] * dxb[0] - dxa[0] * dxb[2],
                    dxa[0] * dxb[1] - dxa[1] * dxb[0],
                ];
                let ds = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
                let w = rule.weights[qa] * rule.weights[qb] * ds;
                for b in 0..p1 {
                    for a in 0..p1 {
                        let phi = interp.get(qa, a) * interp.get(qb, b);
                        let n = face_node(a, b);
                        for c in 0..3 {
                            f[3 * n + c] += w * phi * traction[c];
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Consistent nodal load of a uniform body force `ρ₀ g`.
fn add_body_load(
    disc: &Discretization,
    geo: &GeometricFactors,
    body: [f64; 3],
    f: &mut [f64],
) -> Result<()> {
    let basis = disc.basis();
    let nq = basis.num_qpts();
    let nelem = disc.num_elements();
    let mut qv = vec![0.0; nelem * 3 * nq];
    for e in 0..nelem {
        for c in 0..3 {
            for q in 0..nq {
                qv[(e * 3 + c) * nq + q] = geo.wdet[e * nq + q] * body[c];
            }
        }
    }
    let mut ev = vec![0.0; nelem * 3 * basis.num_nodes()];
    basis.apply_interp_transpose(3, &qv, &mut ev)?;
    disc.restriction().scatter_add(3, &ev, f);
    Ok(())
}
