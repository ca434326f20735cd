//! Unsupervised feature selection by sparse PCA under a joint row budget
//! (`‖X‖_{2,0} ≤ r`) and element budget (`‖X‖_0 ≤ s`).
//!
//! The projection `X` is kept orthonormal while two auxiliary copies carry
//! the sparsity constraints; an outer proximal alternating loop couples them:
//!
//! ```text
//! min  −Tr(XᵀAAᵀX) + μ1‖X − Y‖² + μ2‖X − Z‖²
//! s.t. XᵀX = I,  ‖Y‖_0 ≤ s,  ‖Z‖_{2,0} ≤ r
//! ```
//!
//! * [`model`]: data types, objective, merit function and penalty bounds.
//! * [`penalty`]: exact-penalty gradient solver for the X-subproblem.
//! * [`prox`]: hard-thresholding Y- and Z-updates.
//! * [`solver`]: the outer loop and its diagnostics.
//! * [`selection`], [`cluster`], [`stats`]: ranking, clustering evaluation
//!   and rank-based significance tests.
//! * [`synth`], [`io`]: planted benchmarks and file formats.

pub mod cluster;
pub mod config;
pub mod error;
pub mod io;
pub mod model;
pub mod penalty;
pub mod prox;
pub mod rng;
pub mod selection;
pub mod solver;
pub mod stats;
pub mod synth;

pub use config::{ResolvedConfig, SolverConfig};
pub use error::{DscofsError, Result};
pub use model::{center_columns, DataMatrix, Mat};
pub use solver::{run, run_from, SolveResult};
