//! Certificates and margins for mean-square exponential synchronization of
//! networks of identical discrete-time Lur'e systems coupled through
//! stochastically uncertain links.
//!
//! The crate is organized around the analysis pipeline:
//!
//! * [`linalg`] — dense symmetric linear algebra sized for desk-scale systems
//!   (Jacobi eigensolver, Kronecker products, matrix exponential / ZOH).
//! * [`graph`] — uncertain weighted graphs, their Laplacians and spectra,
//!   synchronization-subspace complements, and torus lattices with analytic
//!   eigenvalues.
//! * [`prl`] — stochastic positive-real Riccati feasibility solvers and the
//!   three synchronization sufficiency checks (full, per-eigenvalue torus,
//!   reduced).
//! * [`margin`] — quantitative margins: small-gain certificate and critical
//!   variance, the closed-form scalar torus margin, the critical coefficient
//!   of dispersion, and torus parameter sweeps.
//! * [`sim`] — Monte Carlo simulation of the coupled stochastic network with
//!   synchronization-error traces and decay-rate estimation.
//! * [`config`] / [`cli`] — the TOML analysis config and the command-line
//!   front end built on it.

pub mod cli;
pub mod config;
pub mod graph;
pub mod linalg;
pub mod margin;
pub mod prl;
pub mod sim;

/// Errors shared across the analysis pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric at ({i},{j}): {upper} vs {lower}")]
    NotSymmetric { i: usize, j: usize, upper: f64, lower: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error(
        "eigensolver did not converge for order {order}: off-diagonal residual {residual:.3e} after {sweeps} sweeps"
    )]
    EigNonConvergence { order: usize, residual: f64, sweeps: usize },

    #[error("matrix is not positive definite: smallest eigenvalue {min_eigenvalue:.6e}")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("invalid edge ({i},{j}): {reason}")]
    InvalidEdge { i: usize, j: usize, reason: String },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("cannot synchronize a disconnected network (Fiedler eigenvalue {lambda2:.3e})")]
    Disconnected { lambda2: f64 },

    #[error("invalid torus: {0}")]
    InvalidTorus(String),

    #[error("torus with {size} nodes exceeds the materialization cap {cap}; use the analytic eigenvalue mode")]
    TorusTooLarge { size: usize, cap: usize },

    #[error("problem size {state_dims} state dims exceeds the cap {cap}; use the reduced condition")]
    ProblemTooLarge { state_dims: usize, cap: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("deterministically infeasible: {0}")]
    DeterministicallyInfeasible(String),

    #[error("positivity check failed for {block}: smallest eigenvalue {min_eigenvalue:.6e}")]
    BlockNotPositive { block: &'static str, min_eigenvalue: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
