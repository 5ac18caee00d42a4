//! Structured hexahedral box meshes, element restrictions, boundary sets and
//! geometric factors.

use std::fmt;
use std::str::FromStr;

use crate::basis::{gauss_lobatto_nodes, Basis1D};
use crate::error::{invalid, Error, Result};

/// Axis-aligned box `[0, Lx] × [0, Ly] × [0, Lz]` split into `nx × ny × nz`
/// bricks with an order-`p` Gauss–Lobatto node lattice.
#[derive(Debug, Clone)]
pub struct BoxMesh {
    extents: [f64; 3],
    counts: [usize; 3],
    order: usize,
    coords: Vec<[f64; 3]>,
}

impl BoxMesh {
    pub fn new(extents: [f64; 3], counts: [usize; 3], order: usize) -> Result<Self> {
        if extents.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(invalid(format!("extents must be positive, got {extents:?}")));
        }
        if counts.contains(&0) {
            return Err(invalid(format!("element counts must be >= 1, got {counts:?}")));
        }
        if order < 1 {
            return Err(invalid("mesh order must be >= 1"));
        }
        let gll = gauss_lobatto_nodes(order + 1)?;
        let axis_coords: Vec<Vec<f64>> = (0..3)
            .map(|a| {
                let h = extents[a] / counts[a] as f64;
                (0..=order * counts[a])
                    .map(|g| {
                        let e = (g / order).min(counts[a] - 1);
                        let i = g - e * order;
                        h * (e as f64 + 0.5 * (1.0 + gll[i]))
                    })
                    .collect()
            })
            .collect();
        let dims = [axis_coords[0].len(), axis_coords[1].len(), axis_coords[2].len()];
        let mut coords = Vec::with_capacity(dims.iter().product());
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    coords.push([axis_coords[0][i], axis_coords[1][j], axis_coords[2][k]]);
                }
            }
        }
        Ok(BoxMesh { extents, counts, order, coords })
    }

    pub fn extents(&self) -> [f64; 3] {
        self.extents
    }

    pub fn counts(&self) -> [usize; 3] {
        self.counts
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Lattice extents `(p·nx + 1, p·ny + 1, p·nz + 1)`.
    pub fn node_dims(&self) -> [usize; 3] {
        [
            self.order * self.counts[0] + 1,
            self.order * self.counts[1] + 1,
            self.order * self.counts[2] + 1,
        ]
    }

    pub fn num_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn num_dofs(&self) -> usize {
        3 * self.num_nodes()
    }

    pub fn num_elements(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn coords(&self) -> &[[f64; 3]] {
        &self.coords
    }

    pub fn node_index(&self, i: usize, j: usize, k: usize) -> usize {
        let d = self.node_dims();
        i + d[0] * (j + d[1] * k)
    }

    /// Element `(ex, ey, ez)` from its lexicographic index.
    pub fn element_coords(&self, e: usize) -> [usize; 3] {
        let [nx, ny, _] = self.counts;
        [e % nx, (e / nx) % ny, e / (nx * ny)]
    }

    /// Moves every node through `f`. Used to build non-brick geometries in tests.
    pub fn map_nodes(&mut self, f: impl Fn([f64; 3]) -> [f64; 3]) {
        for c in self.coords.iter_mut() {
            *c = f(*c);
        }
    }

    /// Nodes lying on one of the six faces of the box, ascending.
    pub fn boundary_nodes(&self, face: Face) -> Vec<usize> {
        let d = self.node_dims();
        let (axis, at) = face.axis_and_side();
        let fixed = if at { d[axis] - 1 } else { 0 };
        let mut out = Vec::new();
        for k in 0..d[2] {
            for j in 0..d[1] {
                for i in 0..d[0] {
                    if [i, j, k][axis] == fixed {
                        out.push(self.node_index(i, j, k));
                    }
                }
            }
        }
        out
    }

    /// Elements with one face on the given box face, ascending.
    pub fn boundary_elements(&self, face: Face) -> Vec<usize> {
        let (axis, at) = face.axis_and_side();
        let fixed = if at { self.counts[axis] - 1 } else { 0 };
        (0..self.num_elements())
            .filter(|&e| self.element_coords(e)[axis] == fixed)
            .collect()
    }

    /// Element-vector of node coordinates, `(element, component, node)`.
    pub fn coordinate_evector(&self, restriction: &ElementRestriction) -> Vec<f64> {
        let flat: Vec<f64> = self.coords.iter().flat_map(|c| c.iter().copied()).collect();
        let mut ev = vec![0.0; restriction.evector_len(3)];
        restriction.gather(3, &flat, &mut ev);
        ev
    }
}

/// One of the six faces of a box mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Face {
    NegX,
    PosX,
    NegY,
    PosY,
    NegZ,
    PosZ,
}

impl Face {
    pub const ALL: [Face; 6] = [Face::NegX, Face::PosX, Face::NegY, Face::PosY, Face::NegZ, Face::PosZ];

    /// `(axis, is_max_side)`.
    pub fn axis_and_side(self) -> (usize, bool) {
        match self {
            Face::NegX => (0, false),
            Face::PosX => (0, true),
            Face::NegY => (1, false),
            Face::PosY => (1, true),
            Face::NegZ => (2, false),
            Face::PosZ => (2, true),
        }
    }
}

impl FromStr for Face {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "-x" => Ok(Face::NegX),
            "+x" | "x" => Ok(Face::PosX),
            "-y" => Ok(Face::NegY),
            "+y" | "y" => Ok(Face::PosY),
            "-z" => Ok(Face::NegZ),
            "+z" | "z" => Ok(Face::PosZ),
            other => Err(invalid(format!("unknown face '{other}' (expected one of -x +x -y +y -z +z)"))),
        }
    }
}

impl fmt::Display for Face {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Face::NegX => "-x",
            Face::PosX => "+x",
            Face::NegY => "-y",
            Face::PosY => "+y",
            Face::NegZ => "-z",
            Face::PosZ => "+z",
        };
        f.write_str(s)
    }
}

/// Boundary condition on a box face. Values are the full-load values; the
/// solver scales them by the load factor.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryCondition {
    /// Prescribed displacement on the masked components.
    Dirichlet { face: Face, components: [bool; 3], value: [f64; 3] },
    /// Dead-load traction per unit reference area.
    Traction { face: Face, value: [f64; 3] },
}

impl BoundaryCondition {
    pub fn clamped(face: Face) -> Self {
        BoundaryCondition::Dirichlet { face, components: [true; 3], value: [0.0; 3] }
    }
}

/// Element-to-global node map with node multiplicity.
#[derive(Debug, Clone)]
pub struct ElementRestriction {
    nodes_per_element: usize,
    num_nodes: usize,
    indices: Vec<usize>,
    multiplicity: Vec<usize>,
}

impl ElementRestriction {
    pub fn new(mesh: &BoxMesh) -> Self {
        let p = mesh.order();
        let p1 = p + 1;
        let nelem = mesh.num_elements();
        let mut indices = Vec::with_capacity(nelem * p1 * p1 * p1);
        for e in 0..nelem {
            let [ex, ey, ez] = mesh.element_coords(e);
            for k in 0..p1 {
                for j in 0..p1 {
                    for i in 0..p1 {
                        indices.push(mesh.node_index(p * ex + i, p * ey + j, p * ez + k));
                    }
                }
            }
        }
        let mut multiplicity = vec![0usize; mesh.num_nodes()];
        for &n in &indices {
            multiplicity[n] += 1;
        }
        ElementRestriction { nodes_per_element: p1 * p1 * p1, num_nodes: mesh.num_nodes(), indices, multiplicity }
    }

    pub fn num_elements(&self) -> usize {
        self.indices.len() / self.nodes_per_element
    }

    pub fn nodes_per_element(&self) -> usize {
        self.nodes_per_element
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn element_nodes(&self, e: usize) -> &[usize] {
        &self.indices[e * self.nodes_per_element..(e + 1) * self.nodes_per_element]
    }

    pub fn multiplicity(&self) -> &[usize] {
        &self.multiplicity
    }

    pub fn evector_len(&self, ncomp: usize) -> usize {
        self.indices.len() * ncomp
    }

    /// Gathers an interleaved nodal field (`node * ncomp + c`) into an
    /// element vector `(element, component, node)`.
    pub fn gather(&self, ncomp: usize, l: &[f64], e: &mut [f64]) {
        self.gather_range(ncomp, 0..self.num_elements(), l, e);
    }

    pub(crate) fn gather_range(
        &self,
        ncomp: usize,
        elems: std::ops::Range<usize>,
        l: &[f64],
        e: &mut [f64],
    ) {
        let npe = self.nodes_per_element;
        for (local, el) in elems.enumerate() {
            let nodes = self.element_nodes(el);
            for c in 0..ncomp {
                let dst = &mut e[(local * ncomp + c) * npe..(local * ncomp + c + 1) * npe];
                for (d, &n) in dst.iter_mut().zip(nodes) {
                    *d = l[n * ncomp + c];
                }
            }
        }
    }

    /// Transpose of [`gather`](Self::gather): sums element contributions into `l`.
    pub fn scatter_add(&self, ncomp: usize, e: &[f64], l: &mut [f64]) {
        self.scatter_add_range(ncomp, 0..self.num_elements(), e, l);
    }

    pub(crate) fn scatter_add_range(
        &self,
        ncomp: usize,
        elems: std::ops::Range<usize>,
        e: &[f64],
        l: &mut [f64],
    ) {
        let npe = self.nodes_per_element;
        for (local, el) in elems.enumerate() {
            let nodes = self.element_nodes(el);
            for c in 0..ncomp {
                let src = &e[(local * ncomp + c) * npe..(local * ncomp + c + 1) * npe];
                for (s, &n) in src.iter().zip(nodes) {
                    l[n * ncomp + c] += s;
                }
            }
        }
    }
}

/// Geometry at every quadrature point of every element.
#[derive(Debug, Clone)]
pub struct GeometricFactors {
    qpts_per_element: usize,
    /// `∂X_c/∂ξ_d` stored `[c * 3 + d]`.
    pub dx_dxi: Vec<[f64; 9]>,
    /// `∂ξ_d/∂X_c` stored `[d * 3 + c]`.
    pub dxi_dx: Vec<[f64; 9]>,
    pub det: Vec<f64>,
    /// Quadrature weight times determinant.
    pub wdet: Vec<f64>,
}

impl GeometricFactors {
    pub fn compute(mesh: &BoxMesh, basis: &Basis1D) -> Result<Self> {
        if basis.order() != mesh.order() {
            return Err(invalid(format!(
                "basis order {} does not match mesh geometry order {}",
                basis.order(),
                mesh.order()
            )));
        }
        let restriction = ElementRestriction::new(mesh);
        let ev = mesh.coordinate_evector(&restriction);
        let nq = basis.num_qpts();
        let nelem = mesh.num_elements();
        let mut grad = vec![0.0; nelem * 3 * 3 * nq];
        basis.apply_grad(3, &ev, &mut grad)?;
        let qw = basis.qweights();
        let mut out = GeometricFactors {
            qpts_per_element: nq,
            dx_dxi: Vec::with_capacity(nelem * nq),
            dxi_dx: Vec::with_capacity(nelem * nq),
            det: Vec::with_capacity(nelem * nq),
            wdet: Vec::with_capacity(nelem * nq),
        };
        for e in 0..nelem {
            for q in 0..nq {
                let mut m = [0.0; 9];
                for c in 0..3 {
                    for d in 0..3 {
                        m[c * 3 + d] = grad[((e * 3 + c) * 3 + d) * nq + q];
                    }
                }
                let det = det3(&m);
                if !(det > 0.0) {
                    return Err(Error::DegenerateElement { element: e, det });
                }
                out.dx_dxi.push(m);
                out.dxi_dx.push(inv3(&m, det));
                out.det.push(det);
                out.wdet.push(qw[q] * det);
            }
        }
        Ok(out)
    }

    pub fn qpts_per_element(&self) -> usize {
        self.qpts_per_element
    }

    pub fn len(&self) -> usize {
        self.det.len()
    }

    pub fn is_empty(&self) -> bool {
        self.det.is_empty()
    }
}

pub(crate) fn det3(m: &[f64; 9]) -> f64 {
    m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
        + m[2] * (m[3] * m[7] - m[4] * m[6])
}

pub(crate) fn inv3(m: &[f64; 9], det: f64) -> [f64; 9] {
    let id = 1.0 / det;
    [
        (m[4] * m[8] - m[5] * m[7]) * id,
        (m[2] * m[7] - m[1] * m[8]) * id,
        (m[1] * m[5] - m[2] * m[4]) * id,
        (m[5] * m[6] - m[3] * m[8]) * id,
        (m[0] * m[8] - m[2] * m[6]) * id,
        (m[2] * m[3] - m[0] * m[5]) * id,
        (m[3] * m[7] - m[4] * m[6]) * id,
        (m[1] * m[6] - m[0] * m[7]) * id,
        (m[0] * m[4] - m[1] * m[3]) * id,
    ]
}
