//! Recovery of sparse, box-constrained source terms in elliptic PDEs from
//! boundary measurements.
//!
//! The model problem is `-laplace(u) + eps*u = f` on the unit square with
//! homogeneous Neumann boundary conditions (`eps = +kappa^2` screened
//! Poisson, `eps = -kappa^2` Helmholtz).  Given Dirichlet traces of `u` on
//! the boundary, the library recovers a nonnegative, bounded, sparse `f`:
//!
//! * [`fem`] — P1 elements on a uniform triangulation of the square;
//! * [`forward`] — the boundary-data forward matrix, its truncated SVD,
//!   and the row-norm weights used by the weighted l1 penalty;
//! * [`admm`] — ADMM solver for the weighted-l1, box-constrained problem;
//! * [`simplex`] / [`certificate`] — a two-phase simplex core, exact-recovery
//!   certificates and the weighted basis-pursuit linear program;
//! * [`sweep`] — bound-strength sweeps, vertex detection and discrepancy
//!   based selection of the regularization weight;
//! * [`experiments`] — reference scenarios, data generation, metrics and
//!   artifact export.

pub mod error;
pub mod linalg;
pub mod fem;
pub mod forward;
pub mod admm;
pub mod simplex;
pub mod certificate;
pub mod sweep;
pub mod experiments;

pub use admm::{AdmmResult, ObjectiveMode, RecoveryProblem};
pub use certificate::{BasisPursuit, CertificateOptions, CertificateReport};
pub use error::Error;
pub use experiments::metrics::RecoveryReport;
pub use experiments::source::SourceSpec;
pub use experiments::{Overrides, RunOutcome};
pub use fem::{build_mesh, TriMesh};
pub use forward::{build_forward, ForwardModel};
pub use simplex::{LinearProgram, LpOutcome, SimplexOptions};
pub use sweep::{MorozovResult, SweepResult, VertexDetection};

/// Dense column-major matrix of `f64`, the working type of the library.
pub type DenseMatrix = nalgebra::DMatrix<f64>;
/// Dense vector of `f64`.
pub type DenseVector = nalgebra::DVector<f64>;
