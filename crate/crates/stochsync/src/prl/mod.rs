//! Stochastic positive-real feasibility certificates and the
//! synchronization sufficiency checks built from them.

mod riccati;

pub use riccati::{
    combine_instances, BindingCondition, FeasibilityCertificate, RiccatiOptions, StructuredRiccati,
};

use crate::graph::{GraphSpectra, TorusSpec, UncertainGraph};
use crate::linalg::{kron, sym_eig, Cholesky, Matrix, SymMatrix};
use crate::{Error, Result};

/// Largest `N·n` the full synchronization check will assemble.
pub const FULL_CHECK_STATE_CAP: usize = 256;

/// Distinct-eigenvalue cap for the per-mode torus check.
pub const TORUS_DISTINCT_EIG_CAP: usize = 20_000;

/// One network component in Lur'e form: linear block `(A, B, C)` closed
/// through a sector nonlinearity bounded by `D` (pointwise) and `D₁`
/// (incremental). Construction verifies that `Σ = D + Dᵀ` and
/// `Σ₁ = D₁ + D₁ᵀ` are positive definite.
#[derive(Debug, Clone)]
pub struct LureSystem {
    a: Matrix,
    b: Matrix,
    c: Matrix,
    d: Matrix,
    d1: Matrix,
}

impl LureSystem {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, d: Matrix, d1: Matrix) -> Result<Self> {
        let n = a.require_square()?;
        let m = d.require_square()?;
        if d1.require_square()? != m {
            return Err(Error::DimensionMismatch("D and D₁ must have equal order".into()));
        }
        if b.rows() != n || b.cols() != m {
            return Err(Error::DimensionMismatch(format!(
                "B is {}x{}, expected {n}x{m}",
                b.rows(),
                b.cols()
            )));
        }
        if c.rows() != m || c.cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "C is {}x{}, expected {m}x{n}",
                c.rows(),
                c.cols()
            )));
        }
        let sys = Self { a, b, c, d, d1 };
        for (name, gram) in [("Σ = D + Dᵀ", sys.sigma()), ("Σ₁ = D₁ + D₁ᵀ", sys.sigma1())] {
            let min = sym_eig(&gram)?.eigenvalues[0];
            if min <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive definite (smallest eigenvalue {min:.3e})"
                )));
            }
        }
        Ok(sys)
    }

    /// Scalar system `(a, 1, 1)` with sector scalars `d`, `d1`.
    pub fn scalar(a: f64, d: f64, d1: f64) -> Result<Self> {
        Self::new(
            Matrix::from_rows(&[&[a]]),
            Matrix::from_rows(&[&[1.0]]),
            Matrix::from_rows(&[&[1.0]]),
            Matrix::from_rows(&[&[d]]),
            Matrix::from_rows(&[&[d1]]),
        )
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.c.rows()
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    pub fn d(&self) -> &Matrix {
        &self.d
    }

    pub fn d1(&self) -> &Matrix {
        &self.d1
    }

    pub fn sigma(&self) -> SymMatrix {
        SymMatrix::symmetrized(&self.d.add(&self.d.transpose())).expect("square")
    }

    pub fn sigma1(&self) -> SymMatrix {
        SymMatrix::symmetrized(&self.d1.add(&self.d1.transpose())).expect("square")
    }

    fn loop_shift(&self, sigma: &SymMatrix) -> Result<(Matrix, SymMatrix)> {
        let chol = Cholesky::new(sigma).ok_or(Error::NotPositiveDefinite {
            min_eigenvalue: sigma.min_eigenvalue().unwrap_or(f64::NAN),
        })?;
        let sigma_inv_c = chol.solve_mat(&self.c);
        let a0 = self.a.sub(&self.b.matmul(&sigma_inv_c));
        let c_term = SymMatrix::symmetrized(&self.c.transpose().matmul(&sigma_inv_c))?;
        Ok((a0, c_term))
    }

    /// `A₀ = A - BΣ⁻¹C` and `CᵀΣ⁻¹C` for the pointwise sector.
    pub fn loop_shift_pointwise(&self) -> Result<(Matrix, SymMatrix)> {
        self.loop_shift(&self.sigma())
    }

    /// `A₀ = A - BΣ₁⁻¹C` and `CᵀΣ₁⁻¹C` for the incremental sector used by
    /// all synchronization conditions.
    pub fn loop_shift_incremental(&self) -> Result<(Matrix, SymMatrix)> {
        self.loop_shift(&self.sigma1())
    }
}

/// Multiplicative structured uncertainty: the state matrix is
/// `A + Σ_i ξ_i A_i` with `ξ_i` zero-mean i.i.d. of variance `σ_i²`.
#[derive(Debug, Clone, Default)]
pub struct StructuredUncertainty {
    terms: Vec<(Matrix, f64)>,
}

impl StructuredUncertainty {
    pub fn new(terms: Vec<(Matrix, f64)>) -> Result<Self> {
        for (_, var) in &terms {
            if *var < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "uncertainty variance must be nonnegative, got {var}"
                )));
            }
        }
        Ok(Self { terms })
    }

    pub fn none() -> Self {
        Self { terms: Vec::new() }
    }

    pub fn terms(&self) -> &[(Matrix, f64)] {
        &self.terms
    }

    /// Same directions with every variance multiplied by `factor`; used by
    /// monotonicity ladders and bisection.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|(a, v)| (a.clone(), v * factor)).collect(),
        }
    }
}

/// Stochastic positive-real feasibility for the primal Riccati: find
/// `P ≻ 0` with `Σ - BᵀPB ≻ 0` solving
/// `P = A₀ᵀΦP A₀ + Σ σ_i² A_iᵀΦP A_i + CᵀΣ⁻¹C + R_P`.
pub fn solve_stochastic_prl(
    sys: &LureSystem,
    unc: &StructuredUncertainty,
    r_p: &SymMatrix,
    opts: &RiccatiOptions,
) -> Result<FeasibilityCertificate> {
    let n = sys.state_dim();
    if r_p.order() != n {
        return Err(Error::DimensionMismatch(format!(
            "R_P order {} does not match state dim {n}",
            r_p.order()
        )));
    }
    let (a0, c_term) = sys.loop_shift_pointwise()?;
    let prob = StructuredRiccati {
        a_cl: a0,
        b: sys.b.clone(),
        sigma: sys.sigma(),
        c_term,
        r: r_p.clone(),
        uncertainty: unc.terms.clone(),
    };
    prob.solve(opts)
}

/// Dual feasibility (`Q`-form): the same engine applied to the transposed
/// data `(A₀ᵀ, Cᵀ, Bᵀ)`, so the Gram condition reads `Σ - CQCᵀ ≻ 0` and
/// the constant becomes `BΣ⁻¹Bᵀ`.
pub fn solve_dual_prl(
    sys: &LureSystem,
    unc: &StructuredUncertainty,
    r_q: &SymMatrix,
    opts: &RiccatiOptions,
) -> Result<FeasibilityCertificate> {
    let n = sys.state_dim();
    if r_q.order() != n {
        return Err(Error::DimensionMismatch(format!(
            "R_Q order {} does not match state dim {n}",
            r_q.order()
        )));
    }
    let (a0, _) = sys.loop_shift_pointwise()?;
    let sigma = sys.sigma();
    let chol = Cholesky::new(&sigma).ok_or(Error::NotPositiveDefinite {
        min_eigenvalue: sigma.min_eigenvalue().unwrap_or(f64::NAN),
    })?;
    let sigma_inv_bt = chol.solve_mat(&sys.b.transpose());
    let b_term = SymMatrix::symmetrized(&sys.b.matmul(&sigma_inv_bt))?;
    let prob = StructuredRiccati {
        a_cl: a0.transpose(),
        b: sys.c.transpose(),
        sigma,
        c_term: b_term,
        r: r_q.clone(),
        uncertainty: unc.terms.iter().map(|(a, v)| (a.transpose(), *v)).collect(),
    };
    prob.solve(opts)
}

/// One mode of the synchronization condition: the `n`-order Riccati with
/// closed loop `A₀ - coupling·GC` and one multiplicative direction `GC` of
/// the given intensity. The reduced condition uses
/// `(λ, 2γ̄τλ)`, the torus condition `(μλ̃, σ²λ̃²)`.
pub fn solve_modal_riccati(
    sys: &LureSystem,
    g_coupling: &Matrix,
    coupling: f64,
    intensity: f64,
    opts: &RiccatiOptions,
) -> Result<FeasibilityCertificate> {
    let gc = coupling_times_output(sys, g_coupling)?;
    let (a0, c_term) = sys.loop_shift_incremental()?;
    let prob = StructuredRiccati {
        a_cl: a0.sub(&gc.scale(coupling)),
        b: sys.b.clone(),
        sigma: sys.sigma1(),
        c_term,
        r: SymMatrix::scaled_identity(sys.state_dim(), opts.r_scale),
        uncertainty: vec![(gc, intensity)],
    };
    prob.solve(opts)
}

fn coupling_times_output(sys: &LureSystem, g_coupling: &Matrix) -> Result<Matrix> {
    let n = sys.state_dim();
    let m = sys.output_dim();
    if g_coupling.rows() != n || g_coupling.cols() != m {
        return Err(Error::DimensionMismatch(format!(
            "coupling G is {}x{}, expected {n}x{m}",
            g_coupling.rows(),
            g_coupling.cols()
        )));
    }
    Ok(g_coupling.matmul(&sys.c))
}

/// The assembled `(N-1)n`-order synchronization problem on the complement
/// of the agreement subspace: closed loop `Â₀ - Λ̂⊗GC` with one rank-one
/// uncertainty direction `ℓ̂ℓ̂ᵀ ⊗ GC` per uncertain link.
#[derive(Debug, Clone)]
pub struct SyncProblem {
    riccati: StructuredRiccati,
    directions: Vec<Matrix>,
    variances: Vec<f64>,
}

impl SyncProblem {
    pub fn new(g: &UncertainGraph, sys: &LureSystem, g_coupling: &Matrix) -> Result<Self> {
        Self::with_options(g, sys, g_coupling, &RiccatiOptions::default())
    }

    pub fn with_options(
        g: &UncertainGraph,
        sys: &LureSystem,
        g_coupling: &Matrix,
        opts: &RiccatiOptions,
    ) -> Result<Self> {
        g.spectra()?; // connectivity gate
        let n_nodes = g.n_nodes();
        let n = sys.state_dim();
        let state_dims = n_nodes * n;
        if state_dims > FULL_CHECK_STATE_CAP {
            return Err(Error::ProblemTooLarge { state_dims, cap: FULL_CHECK_STATE_CAP });
        }
        let gc = coupling_times_output(sys, g_coupling)?;
        let u = crate::graph::sync_complement(n_nodes);
        let lambda_hat = SymMatrix::symmetrized(
            &u.transpose().matmul(g.laplacian().as_matrix()).matmul(&u),
        )?;
        let (a0, c_term_small) = sys.loop_shift_incremental()?;
        let reduced_dim = n_nodes - 1;
        let ident = Matrix::identity(reduced_dim);
        let a_cl = kron(&ident, &a0).sub(&kron(lambda_hat.as_matrix(), &gc));

        let mut directions = Vec::new();
        let mut variances = Vec::new();
        for e in g.unc_edges() {
            let ell = crate::graph::edge_vector(e.i, e.j, n_nodes)?;
            let ell_hat = u.transpose().matvec(&ell);
            let outer = Matrix::from_fn(reduced_dim, reduced_dim, |p, q| ell_hat[p] * ell_hat[q]);
            directions.push(kron(&outer, &gc));
            variances.push(e.variance);
        }

        let riccati = StructuredRiccati {
            a_cl,
            b: kron(&ident, sys.b()),
            sigma: SymMatrix::new(kron(&ident, sys.sigma1().as_matrix()))?,
            c_term: SymMatrix::new(kron(&ident, c_term_small.as_matrix()))?,
            r: SymMatrix::scaled_identity(reduced_dim * n, opts.r_scale),
            uncertainty: directions
                .iter()
                .cloned()
                .zip(variances.iter().copied())
                .collect(),
        };
        Ok(Self { riccati, directions, variances })
    }

    /// The structured Riccati problem (closed loop, sector data, slack).
    pub fn riccati(&self) -> &StructuredRiccati {
        &self.riccati
    }

    /// Uncertainty directions `A_{α_k} = ℓ̂ℓ̂ᵀ ⊗ GC`, one per uncertain link.
    pub fn directions(&self) -> &[Matrix] {
        &self.directions
    }

    /// Per-link variances in the same order as [`Self::directions`].
    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// Replace every link variance with `sigma_sq`.
    pub fn with_identical_variance(&self, sigma_sq: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.variances {
            *v = sigma_sq;
        }
        for (_, v) in &mut out.riccati.uncertainty {
            *v = sigma_sq;
        }
        out
    }

    /// Scale every link variance by `factor`.
    pub fn with_variance_scale(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for v in &mut out.variances {
            *v *= factor;
        }
        for (_, v) in &mut out.riccati.uncertainty {
            *v *= factor;
        }
        out
    }

    pub fn solve(&self, opts: &RiccatiOptions) -> Result<FeasibilityCertificate> {
        self.riccati.solve(opts)
    }
}

/// Full synchronization sufficiency check on the `(N-1)n` transverse
/// dynamics. Prefer [`check_reduced_sync_condition`] for large networks.
pub fn check_full_sync_condition(
    g: &UncertainGraph,
    sys: &LureSystem,
    g_coupling: &Matrix,
    opts: &RiccatiOptions,
) -> Result<FeasibilityCertificate> {
    SyncProblem::with_options(g, sys, g_coupling, opts)?.solve(opts)
}

/// Reduced (network-size-independent) synchronization check: the
/// `n`-order Riccati at the spectrum endpoints `λ₂` and `λ_N` with
/// uncertainty intensity `2γ̄τλ`. Feasible iff both endpoints are;
/// interior eigenvalues follow from convexity in `λ`.
pub fn check_reduced_sync_condition(
    sys: &LureSystem,
    g_coupling: &Matrix,
    spectra: &GraphSpectra,
    opts: &RiccatiOptions,
) -> Result<FeasibilityCertificate> {
    let mut lambdas = vec![spectra.lambda2];
    if (spectra.lambda_n - spectra.lambda2).abs() > 1e-12 {
        lambdas.push(spectra.lambda_n);
    }
    let mut instances = Vec::new();
    for lambda in lambdas {
        let intensity = 2.0 * spectra.gamma_bar * spectra.tau * lambda;
        let cert = solve_modal_riccati(sys, g_coupling, lambda, intensity, opts)?;
        let failed = !cert.feasible;
        instances.push((lambda, cert));
        if failed {
            break;
        }
    }
    Ok(combine_instances(instances))
}

/// Per-eigenvalue synchronization check for a torus lattice with uniform
/// link mean `μ` and variance `σ²`: one `n`-order Riccati per distinct
/// nonzero analytic eigenvalue `λ̃`, closed loop `A₀ - μλ̃GC`, intensity
/// `σ²λ̃²`.
pub fn check_torus_matrix_condition(
    spec: &TorusSpec,
    sys: &LureSystem,
    g_coupling: &Matrix,
    mu: f64,
    sigma_sq: f64,
    opts: &RiccatiOptions,
) -> Result<FeasibilityCertificate> {
    spec.validate()?;
    if mu <= 0.0 {
        return Err(Error::InvalidInput(format!("link mean must be positive, got {mu}")));
    }
    if sigma_sq < 0.0 {
        return Err(Error::InvalidInput(format!("variance must be nonnegative, got {sigma_sq}")));
    }
    let eigs = spec.distinct_nonzero_eigenvalues(TORUS_DISTINCT_EIG_CAP)?;
    check_eigenvalue_instances(sys, g_coupling, &eigs, mu, sigma_sq, opts)
}

/// Run the per-mode Riccati at each supplied Laplacian eigenvalue with
/// closed loop `A₀ - μλGC` and intensity `σ²λ²`; feasible iff all are.
pub fn check_eigenvalue_instances(
    sys: &LureSystem,
    g_coupling: &Matrix,
    eigenvalues: &[f64],
    mu: f64,
    sigma_sq: f64,
    opts: &RiccatiOptions,
) -> Result<FeasibilityCertificate> {
    if eigenvalues.is_empty() {
        return Err(Error::InvalidInput("no eigenvalue instances to check".into()));
    }
    let mut instances = Vec::new();
    for &lambda in eigenvalues {
        let cert = solve_modal_riccati(sys, g_coupling, mu * lambda, sigma_sq * lambda * lambda, opts)?;
        let failed = !cert.feasible;
        instances.push((lambda, cert));
        if failed {
            break;
        }
    }
    Ok(combine_instances(instances))
}

/// Grid validation of the sector assumptions for a scalar nonlinearity:
/// pointwise `φ(y)(y - d·φ(y)) > 0` away from the origin and the
/// incremental form with `d1` over all grid pairs.
pub fn sector_check(phi: impl Fn(f64) -> f64, d: f64, d1: f64, grid: &[f64]) -> bool {
    if grid.is_empty() {
        return false;
    }
    let vals: Vec<(f64, f64)> = grid.iter().map(|&y| (y, phi(y))).collect();
    for &(y, p) in &vals {
        if y.abs() < 1e-12 {
            continue;
        }
        if p * (y - d * p) <= 0.0 {
            return false;
        }
    }
    for (idx, &(ya, pa)) in vals.iter().enumerate() {
        for &(yb, pb) in &vals[idx + 1..] {
            if (ya - yb).abs() < 1e-12 {
                continue;
            }
            let dp = pa - pb;
            if dp * ((ya - yb) - d1 * dp) <= 0.0 {
                return false;
            }
        }
    }
    true
}
