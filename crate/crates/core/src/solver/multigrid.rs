//! p-multigrid: coarse levels share the fine quadrature state, so each coarse
//! operator is the exact Galerkin product `Pᵀ A P`.

use std::sync::Arc;

use crate::basis::{lagrange_tabulate, tensor_apply, Tabulation};
use crate::error::{invalid, Result};
use crate::linalg::LinearOperator;
use crate::operator::{assemble, Discretization, JacobianOperator, SparseMatrix};

use super::chebyshev::ChebyshevSmoother;
use super::cholesky::EnvelopeCholesky;

/// Orders visited from `p` down to 1 by repeated `ceil(p / 2)`.
pub fn coarsening_schedule(p: usize) -> Vec<usize> {
    let mut out = vec![p.max(1)];
    while *out.last().unwrap() > 1 {
        let last = *out.last().unwrap();
        out.push(last.div_ceil(2));
    }
    out
}

/// Interpolation between two orders on the same mesh, masked on constrained
/// DoFs on both sides.
#[derive(Debug, Clone)]
pub struct Prolongation {
    fine: Arc<Discretization>,
    coarse: Arc<Discretization>,
    /// Coarse Lagrange basis at the fine nodes.
    interp: Tabulation,
    inv_multiplicity: Vec<f64>,
}

impl Prolongation {
    pub fn new(fine: Arc<Discretization>, coarse: Arc<Discretization>) -> Result<Self> {
        if fine.mesh().counts() != coarse.mesh().counts() || fine.mesh().extents() != coarse.mesh().extents() {
            return Err(invalid("prolongation requires the same element lattice"));
        }
        let (interp, _) = lagrange_tabulate(coarse.basis().nodes(), fine.basis().nodes());
        let inv_multiplicity = fine.restriction().multiplicity().iter().map(|m| 1.0 / *m as f64).collect();
        Ok(Prolongation { fine, coarse, interp, inv_multiplicity })
    }

    pub fn fine(&self) -> &Arc<Discretization> {
        &self.fine
    }
    pub fn coarse(&self) -> &Arc<Discretization> {
        &self.coarse
    }

    /// `x_f = P x_c`
    pub fn prolong(&self, xc: &[f64], xf: &mut [f64]) {
        let mut xm = xc.to_vec();
        self.coarse.mask(&mut xm);
        let rc = self.coarse.restriction();
        let rf = self.fine.restriction();
        let mut ec = vec![0.0; rc.evector_len(3)];
        rc.gather(3, &xm, &mut ec);
        let mut ef = vec![0.0; rf.evector_len(3)];
        tensor_apply(&self.interp, false, &ec, &mut ef).expect("element shapes");
        self.scale_by_multiplicity(&mut ef);
        xf.fill(0.0);
        rf.scatter_add(3, &ef, xf);
        self.fine.mask(xf);
    }

    /// `x_c = Pᵀ x_f`
    pub fn restrict(&self, xf: &[f64], xc: &mut [f64]) {
        let mut xm = xf.to_vec();
        self.fine.mask(&mut xm);
        let rc = self.coarse.restriction();
        let rf = self.fine.restriction();
        let mut ef = vec![0.0; rf.evector_len(3)];
        rf.gather(3, &xm, &mut ef);
        self.scale_by_multiplicity(&mut ef);
        let mut ec = vec![0.0; rc.evector_len(3)];
        tensor_apply(&self.interp, true, &ef, &mut ec).expect("element shapes");
        xc.fill(0.0);
        rc.scatter_add(3, &ec, xc);
        self.coarse.mask(xc);
    }

    fn scale_by_multiplicity(&self, ef: &mut [f64]) {
        let rf = self.fine.restriction();
        let nn = rf.nodes_per_element();
        for (block, chunk) in ef.chunks_exact_mut(nn).enumerate() {
            let nodes = rf.element_nodes(block / 3);
            for (v, &n) in chunk.iter_mut().zip(nodes) {
                *v *= self.inv_multiplicity[n];
            }
        }
    }
}

/// Hierarchy settings.
#[derive(Debug, Clone, PartialEq)]
pub struct MultigridConfig {
    /// Explicit orders, finest first and ending at 1; `None` uses halving.
    pub schedule: Option<Vec<usize>>,
    pub pre_smooth: usize,
    pub post_smooth: usize,
}

impl Default for MultigridConfig {
    fn default() -> Self {
        MultigridConfig { schedule: None, pre_smooth: 1, post_smooth: 1 }
    }
}

#[derive(Debug, Clone)]
enum LevelKind {
    Smoothed { op: JacobianOperator, smoother: ChebyshevSmoother },
    Direct { matrix: SparseMatrix, factor: EnvelopeCholesky },
}

/// One level of the hierarchy.
#[derive(Debug, Clone)]
pub struct MgLevel {
    order: usize,
    disc: Arc<Discretization>,
    kind: LevelKind,
    /// To the next finer level; `None` on the finest.
    prolongation: Option<Prolongation>,
}

impl MgLevel {
    pub fn order(&self) -> usize {
        self.order
    }
    pub fn num_dofs(&self) -> usize {
        self.disc.num_dofs()
    }
    pub fn lambda_max(&self) -> Option<f64> {
        match &self.kind {
            LevelKind::Smoothed { smoother, .. } => Some(smoother.lambda_max()),
            LevelKind::Direct { .. } => None,
        }
    }
    pub fn coarse_matrix(&self) -> Option<&SparseMatrix> {
        match &self.kind {
            LevelKind::Direct { matrix, .. } => Some(matrix),
            LevelKind::Smoothed { .. } => None,
        }
    }
    pub fn prolongation(&self) -> Option<&Prolongation> {
        self.prolongation.as_ref()
    }
    fn operator(&self) -> &dyn LinearOperator {
        match &self.kind {
            LevelKind::Smoothed { op, .. } => op,
            LevelKind::Direct { matrix, .. } => matrix,
        }
    }
}

/// Levels ordered finest first; the last one is the assembled `p = 1`
/// operator with its Cholesky factor.
#[derive(Debug, Clone)]
pub struct MultigridHierarchy {
    levels: Vec<MgLevel>,
    pre_smooth: usize,
    post_smooth: usize,
}

impl MultigridHierarchy {
    /// Builds levels from a fine Jacobian with stored state; smoothers are
    /// calibrated on every setup.
    pub fn build(fine: &JacobianOperator, config: &MultigridConfig) -> Result<Self> {
        let p = fine.discretization().order();
        let schedule = match &config.schedule {
            Some(s) => s.clone(),
            None => coarsening_schedule(p),
        };
        if schedule.first() != Some(&p)
            || schedule.last() != Some(&1)
            || schedule.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(invalid(format!(
                "coarsening schedule {schedule:?} must decrease strictly from {p} to 1"
            )));
        }
        let mut levels: Vec<MgLevel> = Vec::with_capacity(schedule.len());
        for (l, &order) in schedule.iter().enumerate() {
            let jac = if l == 0 {
                fine.clone()
            } else {
                let disc = Arc::new(fine.discretization().with_order(order)?);
                fine.on_discretization(disc)?
            };
            let disc = jac.discretization().clone();
            let kind = if order == 1 {
                let matrix = assemble(&jac)?;
                let factor = EnvelopeCholesky::factor(&matrix, l)?;
                LevelKind::Direct { matrix, factor }
            } else {
                let diag = jac.diagonal();
                let smoother = ChebyshevSmoother::calibrate(&jac, &diag, Some(disc.constrained()))?;
                LevelKind::Smoothed { op: jac, smoother }
            };
            let prolongation = match levels.last() {
                Some(finer) => Some(Prolongation::new(finer.disc.clone(), disc.clone())?),
                None => None,
            };
            levels.push(MgLevel { order, disc, kind, prolongation });
        }
        Ok(MultigridHierarchy { levels, pre_smooth: config.pre_smooth, post_smooth: config.post_smooth })
    }

    pub fn levels(&self) -> &[MgLevel] {
        &self.levels
    }

    pub fn orders(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.order).collect()
    }

    /// Bytes held by coarse matrices and factors.
    pub fn coarse_bytes(&self) -> usize {
        self.levels
            .iter()
            .map(|l| match &l.kind {
                LevelKind::Direct { matrix, factor } => matrix.bytes() + factor.bytes(),
                LevelKind::Smoothed { .. } => 0,
            })
            .sum()
    }

    /// One V-cycle on `A x = b` starting from `x`.
    pub fn v_cycle(&self, b: &[f64], x: &mut [f64]) {
        self.cycle(0, b, x, false);
    }

    fn cycle(&self, l: usize, b: &[f64], x: &mut [f64], zero_guess: bool) {
        let level = &self.levels[l];
        let a = level.operator();
        let n = b.len();
        match &level.kind {
            LevelKind::Direct { factor, .. } => {
                if zero_guess {
                    factor.solve(b, x).expect("coarse sizes");
                } else {
                    let mut r = vec![0.0; n];
                    a.apply(x, &mut r);
                    for (ri, bi) in r.iter_mut().zip(b) {
                        *ri = bi - *ri;
                    }
                    let mut e = vec![0.0; n];
                    factor.solve(&r, &mut e).expect("coarse sizes");
                    for (xi, ei) in x.iter_mut().zip(&e) {
                        *xi += ei;
                    }
                }
            }
            LevelKind::Smoothed { smoother, .. } => {
                let mut zero = zero_guess;
                // pre-smooth
                for _ in 0..self.pre_smooth {
                    smoother.apply(a, b, x, zero);
                    zero = false;
                }
                // restrict the residual
                let mut r = vec![0.0; n];
                if zero {
                    r.copy_from_slice(b);
                    x.fill(0.0);
                } else {
                    a.apply(x, &mut r);
                    for (ri, bi) in r.iter_mut().zip(b) {
                        *ri = bi - *ri;
                    }
                }
                let coarse = &self.levels[l + 1];
                let p = coarse.prolongation.as_ref().expect("coarse level has a prolongation");
                let mut rc = vec![0.0; coarse.num_dofs()];
                p.restrict(&r, &mut rc);
                // solve on the coarse grid
                let mut ec = vec![0.0; coarse.num_dofs()];
                self.cycle(l + 1, &rc, &mut ec, true);
                // prolong the error correction
                let mut e = vec![0.0; n];
                p.prolong(&ec, &mut e);
                for (xi, ei) in x.iter_mut().zip(&e) {
                    *xi += ei;
                }
                // post-smooth
                for _ in 0..self.post_smooth {
                    smoother.apply(a, b, x, false);
                }
            }
        }
    }
}

/// Preconditioner action: one V-cycle from a zero guess.
impl LinearOperator for MultigridHierarchy {
    fn size(&self) -> usize {
        self.levels[0].num_dofs()
    }
    fn apply(&self, b: &[f64], x: &mut [f64]) {
        self.cycle(0, b, x, true);
    }
}
