//! Symmetric eigendecomposition (cyclic Jacobi) and routines built on it.

use super::matrix::Matrix;
use crate::{Error, Result};

/// Square matrix with exact symmetry enforced on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    m: Matrix,
}

impl SymMatrix {
    /// Wrap a matrix that is already exactly symmetric.
    pub fn new(m: Matrix) -> Result<Self> {
        let n = m.require_square()?;
        for i in 0..n {
            for j in (i + 1)..n {
                if m.get(i, j) != m.get(j, i) {
                    return Err(Error::NotSymmetric {
                        i,
                        j,
                        upper: m.get(i, j),
                        lower: m.get(j, i),
                    });
                }
            }
        }
        Ok(Self { m })
    }

    /// Force symmetry as `(M + Mᵀ)/2`; used after floating-point products
    /// of the form `AᵀPA` that are symmetric only up to rounding.
    pub fn symmetrized(m: &Matrix) -> Result<Self> {
        let n = m.require_square()?;
        let mut s = m.clone();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (m.get(i, j) + m.get(j, i));
                s.set(i, j, v);
                s.set(j, i, v);
            }
        }
        Ok(Self { m: s })
    }

    pub fn identity(n: usize) -> Self {
        Self { m: Matrix::identity(n) }
    }

    pub fn zeros(n: usize) -> Self {
        Self { m: Matrix::zeros(n, n) }
    }

    pub fn diag(d: &[f64]) -> Self {
        Self { m: Matrix::diag(d) }
    }

    /// Scaled identity `s·I`.
    pub fn scaled_identity(n: usize, s: f64) -> Self {
        Self { m: Matrix::identity(n).scale(s) }
    }

    /// Fill from `f(i, j)` evaluated only for `i ≤ j`, mirrored below.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        Self { m }
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.m.rows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m.get(i, j)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.m
    }

    pub fn into_matrix(self) -> Matrix {
        self.m
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix { m: self.m.add(&other.m) }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix { m: self.m.sub(&other.m) }
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix { m: self.m.scale(s) }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m.frobenius_norm()
    }

    /// Smallest eigenvalue; `None` if the eigensolver does not converge.
    pub fn min_eigenvalue(&self) -> Option<f64> {
        sym_eig(self).ok().map(|e| e.eigenvalues[0])
    }
}

/// Eigendecomposition of a symmetric matrix: `A = V diag(λ) Vᵀ` with the
/// eigenvalues sorted ascending and `V` orthonormal (columns).
#[derive(Debug, Clone)]
pub struct EigDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl EigDecomposition {
    /// Rebuild `V diag(λ) Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let v = &self.eigenvectors;
        let n = v.rows();
        let mut vd = v.clone();
        for j in 0..n {
            for i in 0..n {
                vd.set(i, j, v.get(i, j) * self.eigenvalues[j]);
            }
        }
        vd.matmul(&v.transpose())
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_OFFDIAG_TOL: f64 = 1e-12;

fn offdiag_frobenius(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += 2.0 * a.get(i, j) * a.get(i, j);
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Sweeps rotate every off-diagonal pair in turn until the off-diagonal
/// Frobenius norm falls below `1e-12` relative to the matrix scale; this
/// is reached quadratically for any real symmetric input.
pub fn sym_eig(m: &SymMatrix) -> Result<EigDecomposition> {
    let n = m.order();
    let mut a = m.as_matrix().clone();
    let mut v = Matrix::identity(n);
    if n == 1 {
        return Ok(EigDecomposition { eigenvalues: vec![a.get(0, 0)], eigenvectors: v });
    }

    let scale = m.frobenius_norm().max(1.0);
    let tol = JACOBI_OFFDIAG_TOL * scale;
    let mut residual = offdiag_frobenius(&a);
    let mut sweeps = 0;

    while residual > tol {
        if sweeps >= JACOBI_MAX_SWEEPS {
            return Err(Error::EigNonConvergence { order: n, residual, sweeps });
        }
        for p in 0..(n - 1) {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() <= tol * 1e-4 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (1.0 + theta * theta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                // rows/columns p and q of A
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                // accumulate rotations into V
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
        sweeps += 1;
        residual = offdiag_frobenius(&a);
    }

    // sort ascending, permuting eigenvector columns alongside
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(i, i).partial_cmp(&a.get(j, j)).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a.get(i, i)).collect();
    let mut eigenvectors = Matrix::zeros(n, n);
    for (new_j, &old_j) in order.iter().enumerate() {
        for i in 0..n {
            eigenvectors.set(i, new_j, v.get(i, old_j));
        }
    }
    Ok(EigDecomposition { eigenvalues, eigenvectors })
}

/// True iff the smallest eigenvalue exceeds `margin`.
///
/// Uses the eigenvalue route rather than a Cholesky attempt so failures of
/// the eigensolver (never observed at desk scale) read as "not certified".
pub fn is_positive_definite(m: &SymMatrix, margin: f64) -> bool {
    match sym_eig(m) {
        Ok(e) => e.eigenvalues[0] > margin,
        Err(_) => false,
    }
}

/// Symmetric positive definite square root of the inverse: returns `S` with
/// `S·S = m⁻¹`.
pub fn sym_inv_sqrt(m: &SymMatrix) -> Result<SymMatrix> {
    let e = sym_eig(m)?;
    let min = e.eigenvalues[0];
    if min <= 0.0 {
        return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
    }
    let v = &e.eigenvectors;
    let n = m.order();
    let mut vd = v.clone();
    for j in 0..n {
        let s = 1.0 / e.eigenvalues[j].sqrt();
        for i in 0..n {
            vd.set(i, j, v.get(i, j) * s);
        }
    }
    SymMatrix::symmetrized(&vd.matmul(&v.transpose()))
}

/// Largest singular value, via the eigenvalues of `mᵀm`.
pub fn spectral_norm(m: &Matrix) -> f64 {
    let gram = SymMatrix::symmetrized(&m.transpose().matmul(m)).expect("gram is square");
    match sym_eig(&gram) {
        Ok(e) => e.eigenvalues[gram.order() - 1].max(0.0).sqrt(),
        Err(_) => f64::NAN,
    }
}

/// Lower-triangular Cholesky factor of a symmetric matrix, or `None` when
/// the matrix is not positive definite. Cheap in-loop PD test and solver.
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    pub fn new(m: &SymMatrix) -> Option<Self> {
        let n = m.order();
        let mut l = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = m.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                if i == j {
                    if s <= 0.0 {
                        return None;
                    }
                    l.set(i, i, s.sqrt());
                } else {
                    l.set(i, j, s / l.get(j, j));
                }
            }
        }
        Some(Self { l })
    }

    /// Solve `m x = b` in place of a fresh vector.
    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.l.rows();
        assert_eq!(b.len(), n);
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l.get(i, k) * y[k];
            }
            y[i] /= self.l.get(i, i);
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                y[i] -= self.l.get(k, i) * y[k];
            }
            y[i] /= self.l.get(i, i);
        }
        y
    }

    /// Solve `m X = B` column by column.
    pub fn solve_mat(&self, b: &Matrix) -> Matrix {
        let n = self.l.rows();
        assert_eq!(b.rows(), n);
        let mut out = Matrix::zeros(n, b.cols());
        let mut col = vec![0.0; n];
        for j in 0..b.cols() {
            for i in 0..n {
                col[i] = b.get(i, j);
            }
            let x = self.solve_vec(&col);
            for i in 0..n {
                out.set(i, j, x[i]);
            }
        }
        out
    }

    /// Inverse of the factored matrix.
    pub fn inverse(&self) -> SymMatrix {
        let n = self.l.rows();
        let inv = self.solve_mat(&Matrix::identity(n));
        SymMatrix::symmetrized(&inv).expect("inverse is square")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn eig_identity() {
        let e = sym_eig(&SymMatrix::identity(3)).unwrap();
        for &l in &e.eigenvalues {
            assert_close(l, 1.0, 1e-14);
        }
    }

    #[test]
    fn eig_diagonal_sorted() {
        let e = sym_eig(&SymMatrix::diag(&[4.0, 1.0, 9.0])).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 4.0, 9.0]);
    }

    #[test]
    fn eig_complete_graph_laplacian() {
        let m = SymMatrix::new(Matrix::from_rows(&[
            &[2.0, -1.0, -1.0],
            &[-1.0, 2.0, -1.0],
            &[-1.0, -1.0, 2.0],
        ]))
        .unwrap();
        let e = sym_eig(&m).unwrap();
        assert_close(e.eigenvalues[0], 0.0, 1e-12);
        assert_close(e.eigenvalues[1], 3.0, 1e-12);
        assert_close(e.eigenvalues[2], 3.0, 1e-12);
    }

    #[test]
    fn eig_reconstruction_and_orthonormality() {
        // deterministic pseudo-random symmetric matrix
        let n = 7;
        let mut seed = 0x9e3779b97f4a7c15_u64;
        let mut next = || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let m = SymMatrix::from_fn(n, |_, _| next() * 4.0);
        let e = sym_eig(&m).unwrap();
        let rec = e.reconstruct();
        let rel =
            rec.sub(m.as_matrix()).frobenius_norm() / m.frobenius_norm().max(1.0);
        assert!(rel < 1e-10, "reconstruction rel err {rel}");
        let vtv = e.eigenvectors.transpose().matmul(&e.eigenvectors);
        let err = vtv.sub(&Matrix::identity(n)).frobenius_norm();
        assert!(err < 1e-10, "orthonormality err {err}");
    }

    #[test]
    fn pd_predicate() {
        assert!(is_positive_definite(&SymMatrix::identity(2), 0.0));
        assert!(!is_positive_definite(&SymMatrix::diag(&[1.0, 0.0]), 0.0));
        // margin dominates a tiny positive eigenvalue
        assert!(!is_positive_definite(&SymMatrix::diag(&[1.0, 1e-8]), 1e-6));
    }

    #[test]
    fn inv_sqrt_identity_and_diag() {
        let s = sym_inv_sqrt(&SymMatrix::identity(4)).unwrap();
        assert!(s.as_matrix().sub(&Matrix::identity(4)).frobenius_norm() < 1e-12);
        let s = sym_inv_sqrt(&SymMatrix::diag(&[4.0, 9.0])).unwrap();
        assert_close(s.get(0, 0), 0.5, 1e-12);
        assert_close(s.get(1, 1), 1.0 / 3.0, 1e-12);
    }

    #[test]
    fn inv_sqrt_reconstruction() {
        // random SPD 5x5 as G Gᵀ + I
        let g = Matrix::from_fn(5, 5, |i, j| ((i * 5 + j) as f64 * 0.37).sin());
        let spd =
            SymMatrix::symmetrized(&g.matmul(&g.transpose()).add(&Matrix::identity(5))).unwrap();
        let s = sym_inv_sqrt(&spd).unwrap();
        let ssm = s.as_matrix().matmul(s.as_matrix()).matmul(spd.as_matrix());
        let err = ssm.sub(&Matrix::identity(5)).frobenius_norm() / 5.0_f64.sqrt();
        assert!(err < 1e-9, "S·S·m vs I err {err}");
    }

    #[test]
    fn inv_sqrt_rejects_non_pd() {
        let err = sym_inv_sqrt(&SymMatrix::diag(&[1.0, -2.0])).unwrap_err();
        match err {
            crate::Error::NotPositiveDefinite { min_eigenvalue } => {
                assert_close(min_eigenvalue, -2.0, 1e-12)
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn spectral_norm_cases() {
        assert_close(spectral_norm(&Matrix::diag(&[3.0, -5.0])), 5.0, 1e-10);
        assert_close(spectral_norm(&Matrix::zeros(3, 2)), 0.0, 1e-14);
        assert_close(spectral_norm(&Matrix::column(&[3.0, 4.0])), 5.0, 1e-10);
    }

    #[test]
    fn cholesky_solve_and_inverse() {
        let m = SymMatrix::new(Matrix::from_rows(&[&[4.0, 2.0], &[2.0, 3.0]])).unwrap();
        let ch = Cholesky::new(&m).unwrap();
        let x = ch.solve_vec(&[8.0, 7.0]);
        assert_close(x[0], 1.25, 1e-12);
        assert_close(x[1], 1.5, 1e-12);
        let inv = ch.inverse();
        let prod = inv.as_matrix().matmul(m.as_matrix());
        assert!(prod.sub(&Matrix::identity(2)).frobenius_norm() < 1e-12);
        assert!(Cholesky::new(&SymMatrix::diag(&[1.0, -1.0])).is_none());
    }
}
