//! Envelope (skyline) Cholesky factorization under reverse Cuthill–McKee
//! ordering, used as the direct solver on the coarsest level.

use std::collections::VecDeque;

use crate::error::{invalid, Error, Result};
use crate::linalg::LinearOperator;
use crate::operator::SparseMatrix;

/// Reverse Cuthill–McKee permutation of a structurally symmetric matrix;
/// `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &SparseMatrix) -> Vec<usize> {
    let n = a.size();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).0.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut nbrs = Vec::new();
    while order.len() < n {
        // lowest-degree unvisited vertex, then the far end of its BFS tree
        let start = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| (degree[i], i)).unwrap();
        let start = peripheral(a, start, &degree);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            nbrs.clear();
            nbrs.extend(a.row(v).0.iter().copied().filter(|&w| !visited[w]));
            nbrs.sort_by_key(|&w| (degree[w], w));
            for &w in &nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(a: &SparseMatrix, start: usize) -> Vec<usize> {
    let mut level = vec![usize::MAX; a.size()];
    level[start] = 0;
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        for &w in a.row(v).0 {
            if level[w] == usize::MAX {
                level[w] = level[v] + 1;
                queue.push_back(w);
            }
        }
    }
    level
}

fn peripheral(a: &SparseMatrix, mut start: usize, degree: &[usize]) -> usize {
    let mut ecc = 0;
    for _ in 0..8 {
        let level = bfs_levels(a, start);
        let depth = level.iter().filter(|l| **l != usize::MAX).max().copied().unwrap_or(0);
        if depth <= ecc {
            break;
        }
        ecc = depth;
        start = (0..a.size())
            .filter(|&i| level[i] == depth)
            .min_by_key(|&i| (degree[i], i))
            .unwrap();
    }
    start
}

/// `P A Pᵀ = L Lᵀ` with `L` stored row-wise over its envelope.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    perm: Vec<usize>,
    /// First stored column of each (permuted) row.
    first: Vec<usize>,
    /// Offsets of each row's envelope segment `first[i]..=i`.
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl EnvelopeCholesky {
    /// Factors a symmetric positive definite matrix. `level` only labels the
    /// error on failure.
    pub fn factor(a: &SparseMatrix, level: usize) -> Result<Self> {
        let n = a.size();
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in perm.iter().enumerate() {
            for &c in a.row(old).0 {
                first[new] = first[new].min(inv[c]);
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0usize);
        for i in 0..n {
            offsets.push(offsets[i] + i - first[i] + 1);
        }
        let mut values = vec![0.0; offsets[n]];
        for (new, &old) in perm.iter().enumerate() {
            let (cols, vals) = a.row(old);
            for (&c, &v) in cols.iter().zip(vals) {
                let j = inv[c];
                if j <= new {
                    values[offsets[new] + j - first[new]] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let mut s = values[offsets[i] + j - fi];
                let ri = &values[offsets[i] + k0 - fi..offsets[i] + j - fi];
                let rj = &values[offsets[j] + k0 - fj..offsets[j] + j - fj];
                for (x, y) in ri.iter().zip(rj) {
                    s -= x * y;
                }
                if j < i {
                    s /= values[offsets[j] + j - fj];
                    values[offsets[i] + j - fi] = s;
                } else {
                    if !(s > 0.0) {
                        return Err(Error::NotSpd { level, pivot: perm[i], value: s });
                    }
                    values[offsets[i] + i - fi] = s.sqrt();
                }
            }
        }
        Ok(EnvelopeCholesky { perm, first, offsets, values })
    }

    pub fn size(&self) -> usize {
        self.perm.len()
    }

    /// Stored entries of the factor.
    pub fn envelope_size(&self) -> usize {
        self.values.len()
    }

    pub fn bytes(&self) -> usize {
        self.values.len() * 8 + (self.perm.len() * 3 + 1) * std::mem::size_of::<usize>()
    }

    pub fn solve(&self, b: &[f64], x: &mut [f64]) -> Result<()> {
        let n = self.size();
        if b.len() != n || x.len() != n {
            return Err(invalid("Cholesky solve size mismatch"));
        }
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.offsets[i]..self.offsets[i + 1]];
            let mut s = y[i];
            for (k, l) in (fi..i).zip(row) {
                s -= l * y[k];
            }
            y[i] = s / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.values[self.offsets[i]..self.offsets[i + 1]];
            y[i] /= row[i - fi];
            let yi = y[i];
            for (k, l) in (fi..i).zip(row) {
                y[k] -= l * yi;
            }
        }
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        Ok(())
    }
}

impl LinearOperator for EnvelopeCholesky {
    fn size(&self) -> usize {
        self.perm.len()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.solve(x, y).expect("sizes checked by caller");
    }
}
