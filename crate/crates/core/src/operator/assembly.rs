//! Split-phase COO assembly: a symbolic phase fixes the pattern and the
//! entry-to-slot plan once, the numeric phase refills values as often as needed.

use rayon::prelude::*;

use super::{Discretization, JacobianOperator, SparseMatrix};
use crate::error::{invalid, Result};

/// Plan target for entries with a negative row or column.
pub const DISCARD: usize = usize::MAX;

/// COO coordinate lists with their mapping onto CSR slots.
#[derive(Debug, Clone)]
pub struct CooTemplate {
    n: usize,
    plan: Vec<usize>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl CooTemplate {
    /// Analyzes the coordinates of an `n × n` matrix. Entries with a negative
    /// index are discarded; duplicate coordinates share one slot.
    pub fn new(n: usize, rows: &[i64], cols: &[i64]) -> Result<Self> {
        if rows.len() != cols.len() {
            return Err(invalid("COO row and column arrays differ in length"));
        }
        let mut counts = vec![0usize; n + 1];
        for (&r, &c) in rows.iter().zip(cols) {
            if r < 0 || c < 0 {
                continue;
            }
            if r as usize >= n || c as usize >= n {
                return Err(invalid(format!("COO entry ({r}, {c}) outside a {n} x {n} matrix")));
            }
            counts[r as usize + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        // bucket (col, entry) by row
        let mut bucket = vec![(0usize, 0usize); counts[n]];
        let mut next = counts.clone();
        for (k, (&r, &c)) in rows.iter().zip(cols).enumerate() {
            if r < 0 || c < 0 {
                continue;
            }
            let r = r as usize;
            bucket[next[r]] = (c as usize, k);
            next[r] += 1;
        }
        let mut plan = vec![DISCARD; rows.len()];
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            let seg = &mut bucket[counts[i]..counts[i + 1]];
            seg.sort_unstable();
            let mut last = None;
            for &(c, k) in seg.iter() {
                if last != Some(c) {
                    col_idx.push(c);
                    last = Some(c);
                }
                plan[k] = col_idx.len() - 1;
            }
            row_ptr.push(col_idx.len());
        }
        Ok(CooTemplate { n, plan, row_ptr, col_idx })
    }

    pub fn size(&self) -> usize {
        self.n
    }
    /// Number of COO entries, discarded ones included.
    pub fn num_entries(&self) -> usize {
        self.plan.len()
    }
    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }
    pub fn plan(&self) -> &[usize] {
        &self.plan
    }

    /// Zero-valued matrix with the final pattern.
    pub fn pattern(&self) -> SparseMatrix {
        SparseMatrix::from_parts(self.n, self.row_ptr.clone(), self.col_idx.clone(), vec![0.0; self.nnz()])
    }

    /// Overwrites `matrix` values with the sums of `values` per slot, in entry order.
    pub fn fill(&self, values: &[f64], matrix: &mut SparseMatrix) -> Result<()> {
        if values.len() != self.plan.len() {
            return Err(invalid(format!(
                "expected {} COO values, got {}",
                self.plan.len(),
                values.len()
            )));
        }
        self.check_matrix(matrix)?;
        let out = matrix.values_mut();
        out.fill(0.0);
        for (&slot, &v) in self.plan.iter().zip(values) {
            if slot != DISCARD {
                out[slot] += v;
            }
        }
        Ok(())
    }

    fn check_matrix(&self, matrix: &SparseMatrix) -> Result<()> {
        if matrix.size() != self.n || matrix.row_ptr() != self.row_ptr.as_slice() || matrix.col_idx() != self.col_idx.as_slice() {
            return Err(invalid("matrix pattern does not match the COO template"));
        }
        Ok(())
    }
}

/// Symbolic phase for a discretization. Entries are ordered
/// `(element, row component, row node, column component, column node)`;
/// constrained rows and columns are emitted as negative, then one diagonal
/// entry per constrained DoF is appended.
pub fn coo_symbolic(disc: &Discretization) -> Result<CooTemplate> {
    let (rows, cols) = coo_coordinates(disc);
    CooTemplate::new(disc.num_dofs(), &rows, &cols)
}

fn coo_coordinates(disc: &Discretization) -> (Vec<i64>, Vec<i64>) {
    let r = disc.restriction();
    let nn = r.nodes_per_element();
    let mask = disc.constrained();
    let total = disc.num_elements() * 9 * nn * nn + disc.num_constrained();
    let mut rows = Vec::with_capacity(total);
    let mut cols = Vec::with_capacity(total);
    let dof = |node: usize, c: usize| {
        let d = 3 * node + c;
        if mask[d] {
            -1
        } else {
            d as i64
        }
    };
    for e in 0..disc.num_elements() {
        let nodes = r.element_nodes(e);
        for ci in 0..3 {
            for &ni in nodes {
                let row = dof(ni, ci);
                for cj in 0..3 {
                    for &nj in nodes {
                        rows.push(row);
                        cols.push(dof(nj, cj));
                    }
                }
            }
        }
    }
    for (d, &c) in mask.iter().enumerate() {
        if c {
            rows.push(d as i64);
            cols.push(d as i64);
        }
    }
    (rows, cols)
}

/// COO values of the Jacobian, in the entry order of [`coo_symbolic`].
pub fn coo_values(jac: &JacobianOperator) -> Vec<f64> {
    let disc = jac.discretization();
    let basis = disc.basis();
    let (nn, nq) = (basis.num_nodes(), basis.num_qpts());
    let g = basis.dense_gradients();
    let per_element = 9 * nn * nn;
    let nelem = disc.num_elements();
    let mut values = vec![0.0; nelem * per_element + disc.num_constrained()];
    let (elem_part, diag_part) = values.split_at_mut(nelem * per_element);
    elem_part.par_chunks_mut(per_element).enumerate().for_each(|(e, out)| {
        let tangents: Vec<[f64; 81]> = (0..nq).map(|q| jac.point_tangent(e, q)).collect();
        // rowact[q][cj * 3 + b] = Σ_a G[q,i,a] D_q[(ci,a),(cj,b)]
        let mut rowact = vec![0.0; nq * 9];
        for ci in 0..3 {
            for i in 0..nn {
                for (q, d) in tangents.iter().enumerate() {
                    let gi = &g[(q * nn + i) * 3..(q * nn + i) * 3 + 3];
                    for col in 0..9 {
                        let mut s = 0.0;
                        for a in 0..3 {
                            s += gi[a] * d[(ci * 3 + a) * 9 + col];
                        }
                        rowact[q * 9 + col] = s;
                    }
                }
                let base = (ci * nn + i) * 3 * nn;
                for cj in 0..3 {
                    for j in 0..nn {
                        let mut s = 0.0;
                        for q in 0..nq {
                            let gj = &g[(q * nn + j) * 3..(q * nn + j) * 3 + 3];
                            let ra = &rowact[q * 9 + cj * 3..q * 9 + cj * 3 + 3];
                            s += ra[0] * gj[0] + ra[1] * gj[1] + ra[2] * gj[2];
                        }
                        out[base + cj * nn + j] = s;
                    }
                }
            }
        }
    });
    diag_part.fill(1.0);
    values
}

/// Numeric phase: refills `matrix` from the Jacobian's current state.
pub fn coo_numeric(jac: &JacobianOperator, template: &CooTemplate, matrix: &mut SparseMatrix) -> Result<()> {
    let disc = jac.discretization();
    let nn = disc.restriction().nodes_per_element();
    let expected = disc.num_elements() * 9 * nn * nn + disc.num_constrained();
    if template.size() != disc.num_dofs() || template.num_entries() != expected {
        return Err(invalid("COO template was built for a different discretization"));
    }
    template.fill(&coo_values(jac), matrix)
}

/// Symbolic plus numeric phase in one call.
pub fn assemble(jac: &JacobianOperator) -> Result<SparseMatrix> {
    let template = coo_symbolic(jac.discretization())?;
    let mut m = template.pattern();
    coo_numeric(jac, &template, &mut m)?;
    Ok(m)
}
