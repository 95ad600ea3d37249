//! Matrix exponential and zero-order-hold discretization.

use super::matrix::Matrix;
use crate::{Error, Result};

/// Taylor order used after scaling; at `‖X‖ ≤ 0.5` the truncation error is
/// far below the 1e-12 relative target.
const TAYLOR_ORDER: usize = 20;

/// Matrix exponential by scaling-and-squaring with a truncated Taylor series.
pub fn expm(a: &Matrix) -> Result<Matrix> {
    let n = a.require_square()?;
    let norm = a.max_abs() * n as f64;
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let x = a.scale(scale);

    // Horner evaluation of sum_{k=0}^{ORDER} X^k / k!
    let mut e = Matrix::identity(n);
    for k in (1..=TAYLOR_ORDER).rev() {
        e = x.matmul(&e).scale(1.0 / k as f64).add(&Matrix::identity(n));
    }
    for _ in 0..squarings {
        e = e.matmul(&e);
    }
    Ok(e)
}

/// Zero-order-hold discretization at sampling time `t`:
/// `a_disc = exp(a t)`, `b_disc = (∫₀ᵗ exp(a s) ds) b`.
///
/// The integral is obtained from the exponential of the augmented matrix
/// `[[a, I], [0, 0]]`, whose top-right block is exactly `∫₀ᵗ exp(a s) ds`.
pub fn zoh_discretize(a_cont: &Matrix, b_cont: &Matrix, t: f64) -> Result<(Matrix, Matrix)> {
    let n = a_cont.require_square()?;
    if b_cont.rows() != n {
        return Err(Error::DimensionMismatch(format!(
            "ZOH: B has {} rows but A is {n}x{n}",
            b_cont.rows()
        )));
    }
    if t <= 0.0 {
        return Err(Error::InvalidInput(format!("ZOH sampling time must be positive, got {t}")));
    }
    let mut aug = Matrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            aug.set(i, j, a_cont.get(i, j) * t);
        }
        aug.set(i, n + i, t);
    }
    let e = expm(&aug)?;
    let mut a_disc = Matrix::zeros(n, n);
    let mut integral = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a_disc.set(i, j, e.get(i, j));
            integral.set(i, j, e.get(i, n + j));
        }
    }
    Ok((a_disc, integral.matmul(b_cont)))
}
