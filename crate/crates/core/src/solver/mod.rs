//! Krylov, multigrid and nonlinear solvers.

pub mod cg;
pub mod chebyshev;
pub mod cholesky;
pub mod continuation;
pub mod lbfgs;
pub mod line_search;
pub mod multigrid;
pub mod newton;

pub use cg::{cg_solve, estimate_lambda_max, rough_seed, CgReport};
pub use chebyshev::ChebyshevSmoother;
pub use cholesky::EnvelopeCholesky;
pub use continuation::{solve_with_continuation, ContinuationReport, NonlinearSolver};
pub use lbfgs::{lbfgs_solve, LbfgsConfig};
pub use line_search::{critical_point_alpha, LineSearchKind};
pub use multigrid::{coarsening_schedule, MgLevel, MultigridConfig, MultigridHierarchy, Prolongation};
pub use newton::{newton_solve, BuiltPreconditioner, NewtonConfig, Preconditioner, SolveReport, StepReport};
