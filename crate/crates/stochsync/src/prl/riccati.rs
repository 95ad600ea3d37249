//! Damped fixed-point solver for structured stochastic Riccati equations.
//!
//! All feasibility checks in this crate reduce to one equation shape:
//!
//! ```text
//! P = A_clᵀ Φ(P) A_cl + Σ_i σ_i² A_iᵀ Φ(P) A_i + K + R,
//! Φ(P) = P + P B (Σ - Bᵀ P B)⁻¹ Bᵀ P,        Σ - Bᵀ P B ≻ 0,
//! ```
//!
//! with `K` the sector constant (`CᵀΣ⁻¹C` in some incarnation) and `R ≻ 0`
//! the strictness slack. `Φ` is matrix-monotone on the region where the
//! Gram condition holds, so iterating from `P₀ = R` produces a monotone
//! nondecreasing sequence that converges to the minimal solution exactly
//! when one exists; divergence, loss of the Gram condition, or hitting the
//! iteration cap are reported as (numerical) infeasibility.

use crate::linalg::{is_positive_definite, Cholesky, Matrix, SymMatrix};
use crate::{Error, Result};

/// Solver knobs; defaults match the documented tolerances.
#[derive(Debug, Clone, Copy)]
pub struct RiccatiOptions {
    /// Step damping `η` in `P ← (1-η)P + η F(P)`.
    pub damping: f64,
    /// Iteration cap before declaring numerical infeasibility.
    pub max_iterations: usize,
    /// Relative residual target: `‖F(P)-P‖ ≤ tol·(1+‖P‖)`.
    pub residual_tol: f64,
    /// Margin for every strict positivity check.
    pub pd_margin: f64,
    /// Frobenius-norm cap treated as divergence.
    pub divergence_norm: f64,
    /// Scale of the default slack `R = r·I`.
    pub r_scale: f64,
}

impl Default for RiccatiOptions {
    fn default() -> Self {
        Self {
            damping: 0.5,
            max_iterations: 10_000,
            residual_tol: 1e-9,
            pd_margin: 1e-9,
            divergence_norm: 1e12,
            r_scale: 1e-6,
        }
    }
}

/// Which positivity condition broke when a check is infeasible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BindingCondition {
    /// `Σ - BᵀPB ≻ 0` was lost and damping could not recover it.
    GramPositivity,
    /// Iterates blew past the divergence cap.
    Divergence,
    /// Residual failed to converge within the iteration cap.
    IterationCap,
    /// The solved matrix failed its final positivity verification.
    SolutionNotPositive,
}

impl std::fmt::Display for BindingCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            BindingCondition::GramPositivity => "gram-positivity",
            BindingCondition::Divergence => "divergence",
            BindingCondition::IterationCap => "iteration-cap",
            BindingCondition::SolutionNotPositive => "solution-not-positive",
        };
        f.write_str(s)
    }
}

/// Outcome of a feasibility check.
///
/// When `feasible`, `p` solves the defining equation to within
/// `residual ≤ tol·(1+‖P‖)` and satisfies both positivity conditions.
/// Multi-instance checks (per endpoint or per eigenvalue) report the
/// binding instance's solution and eigenvalue.
#[derive(Debug, Clone)]
pub struct FeasibilityCertificate {
    pub feasible: bool,
    pub p: Option<SymMatrix>,
    pub residual: f64,
    pub iterations: usize,
    pub binding_condition: Option<BindingCondition>,
    /// For per-eigenvalue checks: the Laplacian eigenvalue of the reported
    /// instance (the failing one when infeasible, the slackest otherwise).
    pub binding_eigenvalue: Option<f64>,
}

impl FeasibilityCertificate {
    fn infeasible(cond: BindingCondition, iterations: usize, residual: f64) -> Self {
        Self {
            feasible: false,
            p: None,
            residual,
            iterations,
            binding_condition: Some(cond),
            binding_eigenvalue: None,
        }
    }
}

/// One structured Riccati feasibility problem.
#[derive(Debug, Clone)]
pub struct StructuredRiccati {
    /// Closed-loop nominal state matrix `A_cl` (already includes any
    /// `-λ G C` coupling shift).
    pub a_cl: Matrix,
    /// Input matrix entering the Gram condition.
    pub b: Matrix,
    /// Sector Gram matrix (`Σ` or `Σ₁`).
    pub sigma: SymMatrix,
    /// Sector constant `CᵀΣ⁻¹C` (without the slack).
    pub c_term: SymMatrix,
    /// Strictness slack `R ≻ 0`; also the iteration start point.
    pub r: SymMatrix,
    /// Multiplicative uncertainty terms `(A_i, σ_i²)`.
    pub uncertainty: Vec<(Matrix, f64)>,
}

impl StructuredRiccati {
    pub fn validate(&self) -> Result<()> {
        let n = self.a_cl.require_square()?;
        let m = self.sigma.order();
        if self.b.rows() != n || self.b.cols() != m {
            return Err(Error::DimensionMismatch(format!(
                "B is {}x{}, expected {n}x{m}",
                self.b.rows(),
                self.b.cols()
            )));
        }
        if self.c_term.order() != n || self.r.order() != n {
            return Err(Error::DimensionMismatch("constant terms must match the state order".into()));
        }
        for (a_i, var) in &self.uncertainty {
            if a_i.rows() != n || a_i.cols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "uncertainty direction is {}x{}, expected {n}x{n}",
                    a_i.rows(),
                    a_i.cols()
                )));
            }
            if *var < 0.0 {
                return Err(Error::InvalidInput(format!("variance must be nonnegative, got {var}")));
            }
        }
        Ok(())
    }

    /// `Σ - BᵀPB`, exactly symmetric.
    fn gram(&self, p: &SymMatrix) -> SymMatrix {
        let btpb = self.b.transpose().matmul(p.as_matrix()).matmul(&self.b);
        SymMatrix::symmetrized(&self.sigma.as_matrix().sub(&btpb)).expect("square")
    }

    /// Right-hand side `F(P)`; `None` when the Gram condition fails at the
    /// required margin.
    pub fn rhs(&self, p: &SymMatrix, pd_margin: f64) -> Option<SymMatrix> {
        let n = p.order();
        let gram = self.gram(p);
        Cholesky::new(&gram.add(&SymMatrix::scaled_identity(gram.order(), -pd_margin)))?;
        let chol = Cholesky::new(&gram)?;

        // Φ(P) = P + PB (Σ - BᵀPB)⁻¹ BᵀP
        let pb = p.as_matrix().matmul(&self.b);
        let inner = chol.solve_mat(&pb.transpose());
        let phi = SymMatrix::symmetrized(&p.as_matrix().add(&pb.matmul(&inner))).ok()?;

        let mut acc = self
            .a_cl
            .transpose()
            .matmul(phi.as_matrix())
            .matmul(&self.a_cl);
        for (a_i, var) in &self.uncertainty {
            if *var == 0.0 {
                continue;
            }
            let term = a_i.transpose().matmul(phi.as_matrix()).matmul(a_i).scale(*var);
            acc = acc.add(&term);
        }
        acc = acc.add(self.c_term.as_matrix()).add(self.r.as_matrix());
        if acc.data().iter().any(|x| !x.is_finite()) {
            return None;
        }
        debug_assert_eq!(acc.rows(), n);
        SymMatrix::symmetrized(&acc).ok()
    }

    /// Residual `‖F(P) - P‖_F` of a candidate solution.
    pub fn residual(&self, p: &SymMatrix, pd_margin: f64) -> Option<f64> {
        self.rhs(p, pd_margin).map(|f| f.sub(p).frobenius_norm())
    }

    /// Run the damped fixed-point iteration from `P₀ = R`.
    pub fn solve(&self, opts: &RiccatiOptions) -> Result<FeasibilityCertificate> {
        self.validate()?;
        let mut p = self.r.clone();
        let mut residual = f64::INFINITY;
        for iter in 1..=opts.max_iterations {
            let f = match self.rhs(&p, opts.pd_margin) {
                Some(f) => f,
                None => {
                    return Ok(FeasibilityCertificate::infeasible(
                        BindingCondition::GramPositivity,
                        iter,
                        residual,
                    ))
                }
            };
            residual = f.sub(&p).frobenius_norm();
            if residual <= opts.residual_tol * (1.0 + p.frobenius_norm()) {
                return Ok(self.certify(p, residual, iter, opts));
            }

            // damped step; halve on Gram loss a few times before giving up
            let mut eta = opts.damping;
            let mut accepted = None;
            for _ in 0..6 {
                let cand = p.scale(1.0 - eta).add(&f.scale(eta));
                let gram_ok = Cholesky::new(
                    &self
                        .gram(&cand)
                        .add(&SymMatrix::scaled_identity(self.sigma.order(), -opts.pd_margin)),
                )
                .is_some();
                if gram_ok {
                    accepted = Some(cand);
                    break;
                }
                eta *= 0.5;
            }
            p = match accepted {
                Some(cand) => cand,
                None => {
                    return Ok(FeasibilityCertificate::infeasible(
                        BindingCondition::GramPositivity,
                        iter,
                        residual,
                    ))
                }
            };
            if p.frobenius_norm() > opts.divergence_norm || !p.frobenius_norm().is_finite() {
                return Ok(FeasibilityCertificate::infeasible(
                    BindingCondition::Divergence,
                    iter,
                    residual,
                ));
            }
        }
        Ok(FeasibilityCertificate::infeasible(
            BindingCondition::IterationCap,
            opts.max_iterations,
            residual,
        ))
    }

    fn certify(
        &self,
        p: SymMatrix,
        residual: f64,
        iterations: usize,
        opts: &RiccatiOptions,
    ) -> FeasibilityCertificate {
        let p_pd = is_positive_definite(&p, opts.pd_margin);
        let gram_pd = is_positive_definite(&self.gram(&p), opts.pd_margin);
        if p_pd && gram_pd {
            FeasibilityCertificate {
                feasible: true,
                p: Some(p),
                residual,
                iterations,
                binding_condition: None,
                binding_eigenvalue: None,
            }
        } else {
            FeasibilityCertificate::infeasible(
                if gram_pd {
                    BindingCondition::SolutionNotPositive
                } else {
                    BindingCondition::GramPositivity
                },
                iterations,
                residual,
            )
        }
    }
}

/// Combine per-instance certificates (one Riccati per Laplacian eigenvalue)
/// into a single verdict: feasible iff every instance is.
///
/// Infeasible: the first failing instance is reported. Feasible: the
/// instance with the largest `trace(P)` (the one closest to blow-up) is
/// reported as binding. Iteration counts accumulate.
pub fn combine_instances(
    instances: Vec<(f64, FeasibilityCertificate)>,
) -> FeasibilityCertificate {
    assert!(!instances.is_empty(), "no Riccati instances to combine");
    let total_iterations: usize = instances.iter().map(|(_, c)| c.iterations).sum();
    if let Some((lambda, cert)) = instances.iter().find(|(_, c)| !c.feasible) {
        return FeasibilityCertificate {
            feasible: false,
            p: None,
            residual: cert.residual,
            iterations: total_iterations,
            binding_condition: cert.binding_condition,
            binding_eigenvalue: Some(*lambda),
        };
    }
    let (lambda, cert) = instances
        .into_iter()
        .max_by(|(_, a), (_, b)| {
            let ta = trace(a.p.as_ref().expect("feasible"));
            let tb = trace(b.p.as_ref().expect("feasible"));
            ta.partial_cmp(&tb).unwrap()
        })
        .expect("nonempty");
    FeasibilityCertificate { binding_eigenvalue: Some(lambda), ..cert }
}

fn trace(p: &SymMatrix) -> f64 {
    (0..p.order()).map(|i| p.get(i, i)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_problem(a0: f64, sigma: f64, c: f64, var: f64, r: f64) -> StructuredRiccati {
        StructuredRiccati {
            a_cl: Matrix::from_rows(&[&[a0]]),
            b: Matrix::from_rows(&[&[1.0]]),
            sigma: SymMatrix::diag(&[sigma]),
            c_term: SymMatrix::diag(&[c * c / sigma]),
            r: SymMatrix::diag(&[r]),
            uncertainty: vec![(Matrix::from_rows(&[&[1.0]]), var)],
        }
    }

    #[test]
    fn degenerate_fixed_point() {
        // A_cl = 0, no uncertainty: P = CᵀΣ⁻¹C + R immediately
        let prob = scalar_problem(0.0, 2.0, 1.0, 0.0, 1e-6);
        let cert = prob.solve(&RiccatiOptions::default()).unwrap();
        assert!(cert.feasible);
        let p = cert.p.unwrap();
        assert!((p.get(0, 0) - (0.5 + 1e-6)).abs() < 1e-8, "p = {}", p.get(0, 0));
    }

    #[test]
    fn infeasible_at_large_variance() {
        // stable scalar loop but overwhelming multiplicative noise
        let prob = scalar_problem(0.3, 2.0, 1.0, 50.0, 1e-6);
        let cert = prob.solve(&RiccatiOptions::default()).unwrap();
        assert!(!cert.feasible);
        assert!(cert.binding_condition.is_some());
    }

    #[test]
    fn residual_certified() {
        let prob = scalar_problem(0.4, 2.0, 1.0, 0.05, 1e-6);
        let opts = RiccatiOptions::default();
        let cert = prob.solve(&opts).unwrap();
        assert!(cert.feasible);
        let p = cert.p.unwrap();
        let res = prob.residual(&p, opts.pd_margin).unwrap();
        assert!(res <= opts.residual_tol * (1.0 + p.frobenius_norm()));
    }

    #[test]
    fn validates_dimensions() {
        let mut prob = scalar_problem(0.0, 2.0, 1.0, 0.0, 1e-6);
        prob.uncertainty = vec![(Matrix::zeros(2, 2), 1.0)];
        assert!(prob.solve(&RiccatiOptions::default()).is_err());
    }
}
