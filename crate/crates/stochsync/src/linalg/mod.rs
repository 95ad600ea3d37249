//! Dense symmetric linear algebra primitives for desk-scale systems.
//!
//! Everything here is a pure function of its inputs; no shared mutable
//! state, so concurrent use needs no coordination.

mod eigen;
mod expm;
mod matrix;

pub use eigen::{
    is_positive_definite, spectral_norm, sym_eig, sym_inv_sqrt, Cholesky, EigDecomposition,
    SymMatrix,
};
pub use expm::{expm, zoh_discretize};
pub use matrix::{kron, Matrix};
