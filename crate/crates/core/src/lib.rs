//! Robust shifted proper orthogonal decomposition (sPOD).
//!
//! Decomposes a space-time snapshot matrix into a sum of transported
//! low-rank co-moving fields plus a sparse noise matrix,
//! `Q = sum_k T^k(Q^k) + E`, using proximal splitting algorithms.
//!
//! The crate is organized as follows:
//! - [`grid`]: periodic spatial grids, snapshot matrices and the discrete
//!   shift transport operators (degree-5 Lagrange interpolation).
//! - [`prox`]: norms and proximal operators (singular value thresholding,
//!   elementwise soft thresholding) shared by all solvers.
//! - [`solver`]: the three solvers (joint forward-backward, block-coordinate
//!   forward-backward, augmented Lagrangian) with convergence histories.
//! - [`synth`]: synthetic benchmark generators with exact ground truth.
//! - [`metrics`]: reconstruction-error metrics, POD baseline and run reports.

extern crate openblas_src as _;

pub mod error;
pub mod grid;
pub mod metrics;
pub mod prox;
pub mod solver;
pub mod synth;

pub use error::{Result, SpodError};
pub use grid::{SnapshotMatrix, SpatialGrid, StencilWeights, TransportOperator};
pub use prox::{SingularSpectrum, SvtResult};
pub use solver::{
    ConvergenceHistory, Decomposition, IterationRecord, Method, SolverConfig, SpodProblem,
};
pub use synth::{BenchmarkSpec, GroundTruth};
