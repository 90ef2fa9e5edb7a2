//! Phase retrieval from magnitude-only measurements with reweighted amplitude flow.
//!
//! The crate is organised around the two stages of the algorithm and the
//! machinery needed to run them reproducibly:
//!
//! - [`sensing`]: measurement models (real/complex Gaussian, coded diffraction
//!   patterns) applied matrix-free, plus problem-instance generation.
//! - [`init`]: weighted maximal-correlation initialization via power iterations.
//! - [`solver`]: the iteratively reweighted generalized-gradient flow.
//! - [`metrics`]: sign/phase-invariant distance and the residual success test.
//! - [`experiments`]: seeded Monte-Carlo sweeps producing CSV/JSON reports.
//! - [`cli`]: the `raf` command-line frontend.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod init;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod scalar;
pub mod sensing;
pub mod solver;

pub use error::{RafError, Result};
pub use init::{initialize, InitConfig, InitResult};
pub use metrics::{distance, evaluate, EvalReport};
pub use scalar::Scalar;
pub use sensing::{
    CdpModel, GaussianModel, MeasurementOperator, ModelKind, ProblemInstance, SensingModel,
};
pub use solver::{solve, SolverConfig, SolverResult, WeightScheme};
