//! One-dimensional Lagrange bases, Gauss quadrature, and sum-factorized
//! tensor-product actions on hexahedra.
//!
//! Three-dimensional arrays are stored with the x index fastest: the entry
//! `(i, j, k)` of an `nx × ny × nz` block lives at `i + nx * (j + ny * k)`.
//! Element vectors are laid out `(element, component, node)` and quadrature
//! values `(element, component, point)`; gradients add a direction index
//! between component and point.

use nalgebra::DMatrix;

use crate::error::{invalid, Result};

/// Dense row-major matrix used for 1D tabulations.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulation {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tabulation {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tabulation { rows, cols, data: vec![0.0; rows * cols] }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        let mut t = Tabulation::zeros(m.nrows(), m.ncols());
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                t.set(r, c, m[(r, c)]);
            }
        }
        t
    }
}

/// Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule1D {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule1D {
    pub fn gauss_legendre(q: usize) -> Result<Self> {
        if q < 1 {
            return Err(invalid("quadrature size must be at least 1"));
        }
        let mut points = vec![0.0; q];
        let mut weights = vec![0.0; q];
        let n = q as f64;
        for i in 0..q.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_and_derivative(q, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_and_derivative(q, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            points[i] = -x;
            points[q - 1 - i] = x;
            weights[i] = w;
            weights[q - 1 - i] = w;
        }
        if q % 2 == 1 {
            points[q / 2] = 0.0;
        }
        Ok(QuadratureRule1D { points, weights })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Legendre polynomial P_n(x) and its derivative by the three-term recurrence.
fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = if (1.0 - x * x).abs() < 1e-300 {
        // P_n'(±1) = (±1)^(n+1) n(n+1)/2
        let s = if x > 0.0 || n % 2 == 1 { 1.0 } else { -1.0 };
        s * nf * (nf + 1.0) / 2.0
    } else {
        nf * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, d)
}

/// Gauss–Lobatto–Legendre points (endpoints included), ascending.
pub fn gauss_lobatto_nodes(n_points: usize) -> Result<Vec<f64>> {
    if n_points < 2 {
        return Err(invalid("Gauss-Lobatto rule needs at least 2 points"));
    }
    let n = n_points - 1;
    let mut x: Vec<f64> = (0..=n)
        .map(|i| -(std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect();
    for xi in x.iter_mut().take(n).skip(1) {
        for _ in 0..100 {
            let mut p_prev = 1.0;
            let mut p = *xi;
            for k in 2..=n {
                let k = k as f64;
                let next = ((2.0 * k - 1.0) * *xi * p - (k - 1.0) * p_prev) / k;
                p_prev = p;
                p = next;
            }
            let dx = (*xi * p - p_prev) / ((n + 1) as f64 * p);
            *xi -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
    }
    x[0] = -1.0;
    x[n] = 1.0;
    // symmetrize against round-off
    for i in 0..n_points / 2 {
        let a = 0.5 * (x[n - i] - x[i]);
        x[i] = -a;
        x[n - i] = a;
    }
    if n_points % 2 == 1 {
        x[n / 2] = 0.0;
    }
    Ok(x)
}

/// Tabulates the Lagrange polynomials through `nodes` and their derivatives
/// at `points`; returns `(interp, deriv)`, each `points.len() × nodes.len()`.
pub fn lagrange_tabulate(nodes: &[f64], points: &[f64]) -> (Tabulation, Tabulation) {
    let n = nodes.len();
    let mut interp = Tabulation::zeros(points.len(), n);
    let mut deriv = Tabulation::zeros(points.len(), n);
    for (r, &x) in points.iter().enumerate() {
        for j in 0..n {
            let mut value = 1.0;
            for k in 0..n {
                if k != j {
                    value *= (x - nodes[k]) / (nodes[j] - nodes[k]);
                }
            }
            let mut d = 0.0;
            for m in 0..n {
                if m == j {
                    continue;
                }
                let mut term = 1.0 / (nodes[j] - nodes[m]);
                for k in 0..n {
                    if k != j && k != m {
                        term *= (x - nodes[k]) / (nodes[j] - nodes[k]);
                    }
                }
                d += term;
            }
            interp.set(r, j, value);
            deriv.set(r, j, d);
        }
    }
    (interp, deriv)
}

/// Lagrange basis of order `p` on Gauss–Lobatto nodes, tabulated at a
/// Gauss–Legendre rule.
#[derive(Debug, Clone)]
pub struct Basis1D {
    order: usize,
    nodes: Vec<f64>,
    rule: QuadratureRule1D,
    interp: Tabulation,
    deriv: Tabulation,
    /// `B_ξ B_I†`, the derivative acting on values already at quadrature points.
    collocated_deriv: Tabulation,
}

impl Basis1D {
    /// Builds the basis with `q` quadrature points per direction.
    pub fn new(p: usize, q: usize) -> Result<Self> {
        if p < 1 {
            return Err(invalid(format!("polynomial order must be >= 1, got {p}")));
        }
        if q < 1 {
            return Err(invalid(format!("quadrature size must be >= 1, got {q}")));
        }
        if q < p + 1 {
            return Err(invalid(format!(
                "quadrature size {q} too small for order {p}; need q >= p + 1"
            )));
        }
        let nodes = gauss_lobatto_nodes(p + 1)?;
        let rule = QuadratureRule1D::gauss_legendre(q)?;
        let (interp, deriv) = lagrange_tabulate(&nodes, &rule.points);

        let b = interp.to_dmatrix();
        let normal = b.transpose() * &b;
        let chol = normal
            .cholesky()
            .ok_or_else(|| invalid("interpolation matrix is rank deficient"))?;
        let pinv = chol.solve(&b.transpose());
        let colloc = deriv.to_dmatrix() * pinv;

        Ok(Basis1D {
            order: p,
            nodes,
            rule,
            interp,
            deriv,
            collocated_deriv: Tabulation::from_dmatrix(&colloc),
        })
    }

    /// Default rule with `p + 1` points per direction.
    pub fn with_default_quadrature(p: usize) -> Result<Self> {
        Self::new(p, p + 1)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn rule(&self) -> &QuadratureRule1D {
        &self.rule
    }

    pub fn interp(&self) -> &Tabulation {
        &self.interp
    }

    pub fn deriv(&self) -> &Tabulation {
        &self.deriv
    }

    pub fn collocated_deriv(&self) -> &Tabulation {
        &self.collocated_deriv
    }

    pub fn num_nodes_1d(&self) -> usize {
        self.order + 1
    }

    pub fn num_qpts_1d(&self) -> usize {
        self.rule.len()
    }

    /// Nodes per element, `(p+1)³`.
    pub fn num_nodes(&self) -> usize {
        self.num_nodes_1d().pow(3)
    }

    /// Quadrature points per element, `q³`.
    pub fn num_qpts(&self) -> usize {
        self.num_qpts_1d().pow(3)
    }

    /// Tensor quadrature weights, x fastest.
    pub fn qweights(&self) -> Vec<f64> {
        let w = &self.rule.weights;
        let q = w.len();
        let mut out = Vec::with_capacity(q * q * q);
        for k in 0..q {
            for j in 0..q {
                for i in 0..q {
                    out.push(w[i] * w[j] * w[k]);
                }
            }
        }
        out
    }

    fn blocks(&self, ncomp: usize, len: usize, block: usize, what: &str) -> Result<usize> {
        if ncomp == 0 || len % (ncomp * block) != 0 {
            return Err(invalid(format!(
                "{what}: length {len} is not a multiple of {ncomp} x {block}"
            )));
        }
        Ok(len / (ncomp * block))
    }

    /// Values at quadrature points: `(B_I ⊗ B_I ⊗ B_I) u` per element and component.
    pub fn apply_interp(&self, ncomp: usize, input: &[f64], output: &mut [f64]) -> Result<()> {
        let (nn, nq) = (self.num_nodes(), self.num_qpts());
        let nelem = self.blocks(ncomp, input.len(), nn, "interp input")?;
        check_len(output.len(), nelem * ncomp * nq, "interp output")?;
        let mut s = Scratch::default();
        for (inb, outb) in input.chunks_exact(nn).zip(output.chunks_exact_mut(nq)) {
            tensor_apply_block(&self.interp, false, inb, outb, &mut s);
        }
        Ok(())
    }

    pub fn apply_interp_transpose(
        &self,
        ncomp: usize,
        input: &[f64],
        output: &mut [f64],
    ) -> Result<()> {
        let (nn, nq) = (self.num_nodes(), self.num_qpts());
        let nelem = self.blocks(ncomp, input.len(), nq, "interp transpose input")?;
        check_len(output.len(), nelem * ncomp * nn, "interp transpose output")?;
        let mut s = Scratch::default();
        for (inb, outb) in input.chunks_exact(nq).zip(output.chunks_exact_mut(nn)) {
            tensor_apply_block(&self.interp, true, inb, outb, &mut s);
        }
        Ok(())
    }

    /// Reference gradients, laid out `(element, component, direction, point)`.
    ///
    /// Interpolates to quadrature points first and then differentiates with
    /// the collocated derivative along each axis: six 1D contractions rather
    /// than nine.
    pub fn apply_grad(&self, ncomp: usize, input: &[f64], output: &mut [f64]) -> Result<()> {
        let (nn, nq) = (self.num_nodes(), self.num_qpts());
        let nelem = self.blocks(ncomp, input.len(), nn, "grad input")?;
        check_len(output.len(), nelem * ncomp * 3 * nq, "grad output")?;
        let q = self.num_qpts_1d();
        let mut s = Scratch::default();
        let mut at_q = vec![0.0; nq];
        for (inb, outb) in input.chunks_exact(nn).zip(output.chunks_exact_mut(3 * nq)) {
            tensor_apply_block(&self.interp, false, inb, &mut at_q, &mut s);
            for (d, outd) in outb.chunks_exact_mut(nq).enumerate() {
                outd.fill(0.0);
                contract_axis(&self.collocated_deriv, false, d, [q, q, q], &at_q, outd);
            }
        }
        Ok(())
    }

    pub fn apply_grad_transpose(
        &self,
        ncomp: usize,
        input: &[f64],
        output: &mut [f64],
    ) -> Result<()> {
        let (nn, nq) = (self.num_nodes(), self.num_qpts());
        let nelem = self.blocks(ncomp, input.len(), 3 * nq, "grad transpose input")?;
        check_len(output.len(), nelem * ncomp * nn, "grad transpose output")?;
        let q = self.num_qpts_1d();
        let mut s = Scratch::default();
        let mut acc = vec![0.0; nq];
        for (inb, outb) in input.chunks_exact(3 * nq).zip(output.chunks_exact_mut(nn)) {
            acc.fill(0.0);
            for (d, ind) in inb.chunks_exact(nq).enumerate() {
                contract_axis(&self.collocated_deriv, true, d, [q, q, q], ind, &mut acc);
            }
            tensor_apply_block(&self.interp, true, &acc, outb, &mut s);
        }
        Ok(())
    }

    /// Dense reference gradients of every element basis function at every
    /// quadrature point, indexed `[(point * nodes + node) * 3 + direction]`.
    pub fn dense_gradients(&self) -> Vec<f64> {
        let (p1, q) = (self.num_nodes_1d(), self.num_qpts_1d());
        let (nn, nq) = (self.num_nodes(), self.num_qpts());
        let mut g = vec![0.0; nq * nn * 3];
        for qk in 0..q {
            for qj in 0..q {
                for qi in 0..q {
                    let qp = qi + q * (qj + q * qk);
                    for k in 0..p1 {
                        for j in 0..p1 {
                            for i in 0..p1 {
                                let n = i + p1 * (j + p1 * k);
                                let (bi, bj, bk) = (
                                    self.interp.get(qi, i),
                                    self.interp.get(qj, j),
                                    self.interp.get(qk, k),
                                );
                                let (di, dj, dk) = (
                                    self.deriv.get(qi, i),
                                    self.deriv.get(qj, j),
                                    self.deriv.get(qk, k),
                                );
                                let base = (qp * nn + n) * 3;
                                g[base] = di * bj * bk;
                                g[base + 1] = bi * dj * bk;
                                g[base + 2] = bi * bj * dk;
                            }
                        }
                    }
                }
            }
        }
        g
    }
}

fn check_len(got: usize, want: usize, what: &str) -> Result<()> {
    if got != want {
        return Err(invalid(format!("{what}: expected length {want}, got {got}")));
    }
    Ok(())
}

#[derive(Default)]
pub(crate) struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
}

/// Applies `T ⊗ T ⊗ T` (or the transpose) to one cubic block.
pub(crate) fn tensor_apply_block(
    t: &Tabulation,
    transpose: bool,
    input: &[f64],
    output: &mut [f64],
    s: &mut Scratch,
) {
    let (n_in, n_out) = if transpose { (t.rows, t.cols) } else { (t.cols, t.rows) };
    s.a.clear();
    s.a.resize(n_out * n_in * n_in, 0.0);
    contract_axis(t, transpose, 0, [n_in, n_in, n_in], input, &mut s.a);
    s.b.clear();
    s.b.resize(n_out * n_out * n_in, 0.0);
    contract_axis(t, transpose, 1, [n_out, n_in, n_in], &s.a, &mut s.b);
    output.fill(0.0);
    contract_axis(t, transpose, 2, [n_out, n_out, n_in], &s.b, output);
}

/// Applies `T ⊗ T ⊗ T` (or its transpose) to every `ncomp` block of an
/// element vector; the number of blocks is inferred from the input length.
pub fn tensor_apply(t: &Tabulation, transpose: bool, input: &[f64], output: &mut [f64]) -> Result<()> {
    let (n_in, n_out) = if transpose { (t.rows, t.cols) } else { (t.cols, t.rows) };
    let (bin, bout) = (n_in.pow(3), n_out.pow(3));
    if input.len() % bin != 0 {
        return Err(invalid(format!("tensor input length {} not a multiple of {bin}", input.len())));
    }
    check_len(output.len(), input.len() / bin * bout, "tensor output")?;
    let mut s = Scratch::default();
    for (i, o) in input.chunks_exact(bin).zip(output.chunks_exact_mut(bout)) {
        tensor_apply_block(t, transpose, i, o, &mut s);
    }
    Ok(())
}

/// Accumulates the contraction of `input` with `T` (or `Tᵀ`) along one axis
/// into `output`. `dims` are the input extents (x, y, z).
pub(crate) fn contract_axis(
    t: &Tabulation,
    transpose: bool,
    axis: usize,
    dims: [usize; 3],
    input: &[f64],
    output: &mut [f64],
) {
    let (rows, cols) = if transpose { (t.cols, t.rows) } else { (t.rows, t.cols) };
    debug_assert_eq!(dims[axis], cols);
    let inner: usize = dims[..axis].iter().product();
    let outer: usize = dims[axis + 1..].iter().product();
    debug_assert_eq!(input.len(), inner * cols * outer);
    debug_assert_eq!(output.len(), inner * rows * outer);
    for o in 0..outer {
        for a in 0..rows {
            let out_base = inner * (a + rows * o);
            for i in 0..cols {
                let m = if transpose { t.data[i * t.cols + a] } else { t.data[a * t.cols + i] };
                if m == 0.0 {
                    continue;
                }
                let in_base = inner * (i + cols * o);
                let src = &input[in_base..in_base + inner];
                let dst = &mut output[out_base..out_base + inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += m * s;
                }
            }
        }
    }
}
