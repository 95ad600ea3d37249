//! Quantitative synchronization margins: the small-gain certificate and
//! critical variance, the closed-form scalar torus margin `ρ_SM`, the
//! critical coefficient of dispersion, and torus parameter sweeps.

use crate::graph::{GraphSpectra, TorusSpec};
use crate::linalg::{spectral_norm, sym_inv_sqrt, Cholesky, Matrix, SymMatrix};
use crate::prl::{
    check_reduced_sync_condition, FeasibilityCertificate, LureSystem, RiccatiOptions, SyncProblem,
};
use crate::{Error, Result};

/// Absolute tolerance of the critical-CoD bisection.
pub const DEFAULT_BISECTION_TOL: f64 = 1e-3;

/// Doubling cap of the bisection bracket.
pub const COD_BRACKET_CAP: f64 = (1 << 20) as f64;

/// Small-gain separation of the deterministic loop from the stochastic
/// uncertainty loop: stability holds while `σ²·ρ² < 1`.
#[derive(Debug, Clone, Copy)]
pub struct SmallGainCertificate {
    /// Largest singular value of the stacked gain matrix `M`.
    pub rho: f64,
    /// Critical variance `1/ρ²`.
    pub sigma_critical_sq: f64,
    /// Whether the tested variance satisfies `σ²ρ² < 1`.
    pub holds: bool,
}

/// Build the stacked small-gain matrix from a feasible full-check
/// certificate and evaluate `σ²ρ(M)² < 1` at the given variance.
///
/// Blocks: `Ŝ = 𝒫⁻¹ - B̂Σ̂₁⁻¹B̂ᵀ` and `T̂ - A_clᵀŜ⁻¹A_cl` with
/// `T̂ = 𝒫 - ĈᵀΣ̂₁⁻¹Ĉ`; both must be positive definite, which holds for
/// any certificate produced by the solver. Requires all links to share
/// one variance (the identical-variance assumption of the theorem).
pub fn small_gain_margin(
    problem: &SyncProblem,
    cert: &FeasibilityCertificate,
    sigma_sq: f64,
) -> Result<SmallGainCertificate> {
    if !cert.feasible {
        return Err(Error::InvalidInput(
            "small-gain margin needs a feasible full-check certificate".into(),
        ));
    }
    let p = cert.p.as_ref().expect("feasible certificate carries P");
    if problem.directions().is_empty() {
        return Err(Error::InvalidInput("no uncertain links; the small-gain loop is empty".into()));
    }
    let first = problem.variances()[0];
    if problem.variances().iter().any(|v| (v - first).abs() > 1e-12) {
        return Err(Error::InvalidInput(
            "small-gain margin requires identical variance on every uncertain link".into(),
        ));
    }

    let ric = problem.riccati();
    let p_inv = Cholesky::new(p)
        .ok_or(Error::BlockNotPositive { block: "P", min_eigenvalue: f64::NAN })?
        .inverse();
    let sigma_chol = Cholesky::new(&ric.sigma).ok_or(Error::BlockNotPositive {
        block: "Σ̂₁",
        min_eigenvalue: f64::NAN,
    })?;
    let b_sigma_bt = ric.b.matmul(&sigma_chol.solve_mat(&ric.b.transpose()));
    let s_hat = SymMatrix::symmetrized(&p_inv.as_matrix().sub(&b_sigma_bt))?;
    let s_min = s_hat.min_eigenvalue().unwrap_or(f64::NAN);
    if s_min.is_nan() || s_min <= 0.0 {
        return Err(Error::BlockNotPositive { block: "Ŝ = P⁻¹ - B̂Σ̂₁⁻¹B̂ᵀ", min_eigenvalue: s_min });
    }

    let t_hat = p.sub(&ric.c_term);
    let s_chol = Cholesky::new(&s_hat).expect("Ŝ verified positive definite");
    let a_s_a = ric.a_cl.transpose().matmul(&s_chol.solve_mat(&ric.a_cl));
    let w = SymMatrix::symmetrized(&t_hat.as_matrix().sub(&a_s_a))?;
    let w_min = w.min_eigenvalue().unwrap_or(f64::NAN);
    if w_min.is_nan() || w_min <= 0.0 {
        return Err(Error::BlockNotPositive {
            block: "T̂ - A_clᵀŜ⁻¹A_cl",
            min_eigenvalue: w_min,
        });
    }

    let s_inv_sqrt = sym_inv_sqrt(&s_hat)?;
    let w_inv_sqrt = sym_inv_sqrt(&w)?;
    let dim = p.order();
    let mut stacked = Matrix::zeros(problem.directions().len() * dim, dim);
    for (block, a_k) in problem.directions().iter().enumerate() {
        let piece = s_inv_sqrt.as_matrix().matmul(a_k).matmul(w_inv_sqrt.as_matrix());
        for i in 0..dim {
            for j in 0..dim {
                stacked.set(block * dim + i, j, piece.get(i, j));
            }
        }
    }
    let rho = spectral_norm(&stacked);
    let sigma_critical_sq = if rho > 0.0 { 1.0 / (rho * rho) } else { f64::INFINITY };
    Ok(SmallGainCertificate { rho, sigma_critical_sq, holds: sigma_sq * rho * rho < 1.0 })
}

/// Scalar agents `x⁺ = a x - φ(x)` coupled through a torus with gain `g`,
/// link mean `μ`, link variance `σ²`, and sector scalar `δ` (`D = δ/2`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarTorusParams {
    pub a: f64,
    pub delta: f64,
    pub g: f64,
    pub mu: f64,
    pub sigma_sq: f64,
}

impl ScalarTorusParams {
    pub fn validate(&self) -> Result<()> {
        if self.delta.is_nan() || self.delta <= 1.0 {
            return Err(Error::InvalidInput(format!("δ must exceed 1, got {}", self.delta)));
        }
        if self.mu.is_nan() || self.mu <= 0.0 {
            return Err(Error::InvalidInput(format!("μ must be positive, got {}", self.mu)));
        }
        if self.sigma_sq < 0.0 {
            return Err(Error::InvalidInput(format!("σ² must be nonnegative, got {}", self.sigma_sq)));
        }
        Ok(())
    }

    /// Loop-shifted scalar `a₀ = a - 1/δ`.
    pub fn a0(&self) -> f64 {
        self.a - 1.0 / self.delta
    }

    /// `α²(λ̃) = (a₀ - μλ̃g)² + σ²λ̃²g²`.
    pub fn alpha_sq(&self, lambda: f64) -> f64 {
        let det = self.a0() - self.mu * lambda * self.g;
        det * det + self.sigma_sq * lambda * lambda * self.g * self.g
    }

    /// `(1 - 1/δ)²`, the closed-form feasibility budget.
    pub fn budget(&self) -> f64 {
        let b = 1.0 - 1.0 / self.delta;
        b * b
    }
}

/// Closed-form feasibility of the scalar torus condition:
/// `(1 - 1/δ)² > max{α²(λ̃₂), α²(λ̃_N)}`.
pub fn scalar_torus_feasible(p: &ScalarTorusParams, spec: &TorusSpec) -> Result<bool> {
    p.validate()?;
    spec.validate()?;
    let (l2, ln) = spec.extreme_eigenvalues();
    Ok(p.budget() > p.alpha_sq(l2).max(p.alpha_sq(ln)))
}

/// Closed-form synchronization margin of a scalar torus network.
#[derive(Debug, Clone, Copy)]
pub struct TorusMargin {
    /// Binding eigenvalue (argmax of `α²`, ties toward `λ̃₂`).
    pub lambda_sup: f64,
    pub alpha_sq_2: f64,
    pub alpha_sq_n: f64,
    /// `ρ_SM`; `None` when the deterministic part alone fails (the formula
    /// would divide by a nonpositive number).
    pub rho_sm: Option<f64>,
    /// Whether `(1 - 1/δ)² > (a₀ - μλ̃_sup g)²`.
    pub deterministic_feasible: bool,
}

impl TorusMargin {
    /// `ρ_SM > 0` is equivalent to the closed-form feasibility test.
    pub fn feasible(&self) -> bool {
        self.rho_sm.is_some_and(|r| r > 0.0)
    }
}

/// Evaluate `ρ_SM = 1 - σ²·λ̃_sup²g² / ((1-1/δ)² - (a₀ - μλ̃_sup g)²)` at
/// the binding eigenvalue.
pub fn scalar_torus_margin(p: &ScalarTorusParams, spec: &TorusSpec) -> Result<TorusMargin> {
    p.validate()?;
    spec.validate()?;
    let (l2, ln) = spec.extreme_eigenvalues();
    let alpha_sq_2 = p.alpha_sq(l2);
    let alpha_sq_n = p.alpha_sq(ln);
    // ties toward λ̃₂; both α² agree there so only the report is affected
    let lambda_sup = if alpha_sq_n > alpha_sq_2 { ln } else { l2 };
    let det = p.a0() - p.mu * lambda_sup * p.g;
    let denom = p.budget() - det * det;
    let deterministic_feasible = denom > 0.0;
    let rho_sm = deterministic_feasible.then(|| {
        1.0 - p.sigma_sq * lambda_sup * lambda_sup * p.g * p.g / denom
    });
    Ok(TorusMargin { lambda_sup, alpha_sq_2, alpha_sq_n, rho_sm, deterministic_feasible })
}

/// Critical coefficient of dispersion: the largest `γ̄` for which the
/// reduced condition stays feasible, located by doubling then bisection to
/// `tol`. Returns `+∞` when no bracket up to the doubling cap goes
/// infeasible (e.g. when the graph has no uncertain links, so `τ = 0`).
///
/// Errors with [`Error::DeterministicallyInfeasible`] when the reduced
/// check already fails at `γ̄ = 0`.
pub fn critical_cod(
    sys: &LureSystem,
    g_coupling: &Matrix,
    spectra: &GraphSpectra,
    opts: &RiccatiOptions,
    tol: f64,
) -> Result<f64> {
    let feasible_at = |gamma: f64| -> Result<bool> {
        let s = spectra.with_gamma_bar(gamma);
        Ok(check_reduced_sync_condition(sys, g_coupling, &s, opts)?.feasible)
    };
    if !feasible_at(0.0)? {
        return Err(Error::DeterministicallyInfeasible(
            "reduced condition fails at γ̄ = 0; no positive dispersion is tolerable".into(),
        ));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while feasible_at(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > COD_BRACKET_CAP {
            return Ok(f64::INFINITY);
        }
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if feasible_at(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One cell of a torus sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepCell {
    pub d: usize,
    pub k: usize,
    /// `ρ_SM` when the deterministic part is feasible.
    pub rho_sm: Option<f64>,
    pub feasible: bool,
}

/// Evaluate the scalar torus margin over `(d, k)` ranges (inclusive),
/// row-major in `(d, k)`. Infeasible cells are kept and marked.
pub fn torus_sweep(
    p: &ScalarTorusParams,
    n: usize,
    k_range: (usize, usize),
    d_range: (usize, usize),
) -> Result<Vec<SweepCell>> {
    p.validate()?;
    if k_range.0 < 1 || k_range.0 > k_range.1 || k_range.1 > n / 2 {
        return Err(Error::InvalidInput(format!(
            "k range {}..={} invalid for N={n} (max {})",
            k_range.0,
            k_range.1,
            n / 2
        )));
    }
    if d_range.0 < 1 || d_range.0 > d_range.1 {
        return Err(Error::InvalidInput(format!("d range {}..={} invalid", d_range.0, d_range.1)));
    }
    let mut cells = Vec::new();
    for d in d_range.0..=d_range.1 {
        for k in k_range.0..=k_range.1 {
            let spec = TorusSpec::new(n, k, d)?;
            let margin = scalar_torus_margin(p, &spec)?;
            cells.push(SweepCell { d, k, rho_sm: margin.rho_sm, feasible: margin.feasible() });
        }
    }
    Ok(cells)
}

/// CSV form of a sweep: header `d,k,rho_sm,feasible`, doubles at 12
/// significant digits, `nan` for deterministically infeasible cells.
pub fn sweep_to_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from("d,k,rho_sm,feasible\n");
    for c in cells {
        let rho = match c.rho_sm {
            Some(r) => format!("{r:.11e}"),
            None => "nan".into(),
        };
        out.push_str(&format!("{},{},{},{}\n", c.d, c.k, rho, c.feasible));
    }
    out
}

/// Best `k` per dimension: `(d, Some((k, ρ_SM)))` over feasible cells.
pub fn optimal_k_per_dimension(cells: &[SweepCell]) -> Vec<(usize, Option<(usize, f64)>)> {
    let mut dims: Vec<usize> = cells.iter().map(|c| c.d).collect();
    dims.dedup();
    dims.into_iter()
        .map(|d| {
            let best = cells
                .iter()
                .filter(|c| c.d == d && c.feasible)
                .filter_map(|c| c.rho_sm.map(|r| (c.k, r)))
                .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
            (d, best)
        })
        .collect()
}
