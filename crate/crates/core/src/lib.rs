//! Eigenvalue-constrained EM for a reduced family of parsimonious Gaussian
//! mixture models.
//!
//! Each component covariance is `Σ_g = D_g B_g D_gᵀ` with orthogonal `D_g`
//! and diagonal `B_g`; the eight structures differ in which of the two
//! factors are shared across components. Eigenvalues are kept inside an
//! interval `[a, b]` at every M-step, either fixed or relaxed over the first
//! iterations by a schedule.

pub mod constraints;
pub mod em;
pub mod error;
pub mod experiment;
pub mod family;
pub mod init;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod report;
pub mod selection;
pub mod simulate;

pub use constraints::{Bounds, ConstraintSpec, Regime, Schedule};
pub use em::{fit, EmConfig, FitReport, MixtureModel, Responsibilities};
pub use error::{Error, Result};
pub use family::CovarianceStructure;
pub use init::{InitKind, InitSpec};
pub use linalg::Matrix;
pub use selection::{sweep, SweepResult};
