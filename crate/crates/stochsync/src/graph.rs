//! Uncertain weighted graphs, their Laplacians and spectra, the
//! synchronization-subspace complement, and torus lattices.
//!
//! Laplacians follow the positive-semidefinite convention (diagonals are
//! weighted degrees, off-diagonals `-μ_ij`), so the spectrum satisfies
//! `0 = λ₁ ≤ λ₂ ≤ … ≤ λ_N` and the Fiedler eigenvalue measures algebraic
//! connectivity.

use crate::linalg::{kron, sym_eig, Matrix, SymMatrix};
use crate::{Error, Result};

/// Fiedler eigenvalues above this threshold count as "connected".
pub const CONNECTIVITY_TOL: f64 = 1e-8;

/// Largest matrix order that torus materialization will build.
pub const TORUS_MATERIALIZE_CAP: usize = 4096;

/// Deterministic weighted edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetEdge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Stochastic edge with mean weight `μ` and per-step variance `σ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncEdge {
    pub i: usize,
    pub j: usize,
    pub mean: f64,
    pub variance: f64,
}

/// Undirected graph with deterministic and stochastically uncertain edges.
///
/// All mean weights are positive, node indices are 0-based, and the two
/// edge sets are disjoint with no self-loops or duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertainGraph {
    n_nodes: usize,
    det_edges: Vec<DetEdge>,
    unc_edges: Vec<UncEdge>,
}

impl UncertainGraph {
    pub fn new(
        n_nodes: usize,
        det_edges: Vec<DetEdge>,
        unc_edges: Vec<UncEdge>,
    ) -> Result<Self> {
        if n_nodes < 2 {
            return Err(Error::InvalidGraph(format!("need at least 2 nodes, got {n_nodes}")));
        }
        let mut seen = std::collections::HashSet::new();
        let mut check = |i: usize, j: usize, w: f64, var: Option<f64>| -> Result<(usize, usize)> {
            if i == j {
                return Err(Error::InvalidEdge { i, j, reason: "self-loop".into() });
            }
            if i >= n_nodes || j >= n_nodes {
                return Err(Error::InvalidEdge { i, j, reason: format!("node out of range 0..{n_nodes}") });
            }
            if w <= 0.0 {
                return Err(Error::InvalidEdge { i, j, reason: format!("mean weight must be positive, got {w}") });
            }
            if let Some(v) = var {
                if v < 0.0 {
                    return Err(Error::InvalidEdge { i, j, reason: format!("variance must be nonnegative, got {v}") });
                }
            }
            let key = (i.min(j), i.max(j));
            if !seen.insert(key) {
                return Err(Error::InvalidEdge { i, j, reason: "duplicate edge".into() });
            }
            Ok(key)
        };
        let mut det = Vec::with_capacity(det_edges.len());
        for e in det_edges {
            let (i, j) = check(e.i, e.j, e.weight, None)?;
            det.push(DetEdge { i, j, weight: e.weight });
        }
        let mut unc = Vec::with_capacity(unc_edges.len());
        for e in unc_edges {
            let (i, j) = check(e.i, e.j, e.mean, Some(e.variance))?;
            unc.push(UncEdge { i, j, mean: e.mean, variance: e.variance });
        }
        Ok(Self { n_nodes, det_edges: det, unc_edges: unc })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn det_edges(&self) -> &[DetEdge] {
        &self.det_edges
    }

    pub fn unc_edges(&self) -> &[UncEdge] {
        &self.unc_edges
    }

    /// Nominal Laplacian: mean weights for uncertain edges, `L·1 = 0`.
    pub fn laplacian(&self) -> SymMatrix {
        let mut l = Matrix::zeros(self.n_nodes, self.n_nodes);
        let mut add = |i: usize, j: usize, w: f64| {
            l.set(i, j, l.get(i, j) - w);
            l.set(j, i, l.get(j, i) - w);
            l.set(i, i, l.get(i, i) + w);
            l.set(j, j, l.get(j, j) + w);
        };
        for e in &self.det_edges {
            add(e.i, e.j, e.weight);
        }
        for e in &self.unc_edges {
            add(e.i, e.j, e.mean);
        }
        SymMatrix::new(l).expect("laplacian is symmetric by construction")
    }

    /// Split `L = L_d + L_u` into the deterministic-edge and
    /// uncertain-edge (mean weight) Laplacians; the sum is exact.
    pub fn split_laplacians(&self) -> (SymMatrix, SymMatrix) {
        let d = Self {
            n_nodes: self.n_nodes,
            det_edges: self.det_edges.clone(),
            unc_edges: Vec::new(),
        };
        let u = Self {
            n_nodes: self.n_nodes,
            det_edges: self
                .unc_edges
                .iter()
                .map(|e| DetEdge { i: e.i, j: e.j, weight: e.mean })
                .collect(),
            unc_edges: Vec::new(),
        };
        (d.laplacian(), u.laplacian())
    }

    /// Spectral summary of the nominal and split Laplacians.
    ///
    /// Errors with [`Error::Disconnected`] when the nominal graph has
    /// Fiedler eigenvalue at or below [`CONNECTIVITY_TOL`].
    pub fn spectra(&self) -> Result<GraphSpectra> {
        let eig = sym_eig(&self.laplacian())?;
        let lambda2 = eig.eigenvalues[1];
        let lambda_n = eig.eigenvalues[self.n_nodes - 1];
        if lambda2 <= CONNECTIVITY_TOL {
            return Err(Error::Disconnected { lambda2 });
        }
        let (ld, lu) = self.split_laplacians();
        let lambda2_d = sym_eig(&ld)?.eigenvalues[1].max(0.0);
        let lambda_n_u = sym_eig(&lu)?.eigenvalues[self.n_nodes - 1].max(0.0);
        let tau = if lambda_n_u > CONNECTIVITY_TOL {
            lambda_n_u / (lambda_n_u + lambda2_d)
        } else {
            0.0
        };
        let gamma_bar = self
            .unc_edges
            .iter()
            .map(|e| e.variance / e.mean)
            .fold(0.0_f64, f64::max);
        Ok(GraphSpectra { lambda2, lambda_n, lambda2_d, lambda_n_u, tau, gamma_bar })
    }

    /// Nonzero Laplacian eigenvalues (the spectrum with the structural
    /// zero removed), ascending. Meaningful for connected graphs.
    pub fn nonzero_laplacian_eigenvalues(&self) -> Result<Vec<f64>> {
        let eig = sym_eig(&self.laplacian())?;
        Ok(eig.eigenvalues[1..].to_vec())
    }
}

/// Spectral quantities entering the reduced synchronization condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphSpectra {
    /// Fiedler eigenvalue of the nominal Laplacian.
    pub lambda2: f64,
    /// Largest eigenvalue of the nominal Laplacian.
    pub lambda_n: f64,
    /// Second smallest eigenvalue of the deterministic-edge Laplacian.
    pub lambda2_d: f64,
    /// Largest eigenvalue of the uncertain-edge (mean weight) Laplacian.
    pub lambda_n_u: f64,
    /// `λ_{N_u} / (λ_{N_u} + λ_{2_d})`; zero when no edge is uncertain.
    pub tau: f64,
    /// Largest coefficient of dispersion `σ²/μ` over uncertain edges.
    pub gamma_bar: f64,
}

impl GraphSpectra {
    /// Same spectra with the coefficient of dispersion overridden; used by
    /// bisection searches over `γ̄`.
    pub fn with_gamma_bar(mut self, gamma_bar: f64) -> Self {
        self.gamma_bar = gamma_bar;
        self
    }
}

/// Edge incidence vector: `+1` at `i`, `-1` at `j`, zero elsewhere.
pub fn edge_vector(i: usize, j: usize, n: usize) -> Result<Vec<f64>> {
    if i == j {
        return Err(Error::InvalidEdge { i, j, reason: "self-loop has no incidence vector".into() });
    }
    if i >= n || j >= n {
        return Err(Error::InvalidEdge { i, j, reason: format!("node out of range 0..{n}") });
    }
    let mut v = vec![0.0; n];
    v[i] = 1.0;
    v[j] = -1.0;
    Ok(v)
}

/// Orthonormal complement of the synchronization direction: an
/// `N x (N-1)` matrix `U` with `UᵀU = I`, `Uᵀ1 = 0`, and
/// `UUᵀ = I - (1/N)·11ᵀ`.
///
/// Built from the Householder reflector mapping `e₁` to `1/√N`, so the
/// construction is deterministic and reproducible.
pub fn sync_complement(n: usize) -> Matrix {
    assert!(n >= 2, "complement needs at least 2 nodes");
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    // v = e1 - 1/sqrt(N); H = I - 2 v vᵀ / (vᵀv)
    let mut v = vec![-inv_sqrt_n; n];
    v[0] += 1.0;
    let vtv: f64 = v.iter().map(|x| x * x).sum();
    let mut u = Matrix::zeros(n, n - 1);
    for col in 1..n {
        for row in 0..n {
            let h = if row == col { 1.0 } else { 0.0 };
            u.set(row, col - 1, h - 2.0 * v[row] * v[col] / vtv);
        }
    }
    u
}

/// Spatially periodic lattice: `d` dimensions of `N`-agent rings, each
/// agent coupled to its `k` nearest neighbors on both sides per dimension.
///
/// `k = ⌊N/2⌋` is the complete ring (every agent connected to all others;
/// for even `N` the antipodal link is counted once).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusSpec {
    pub n: usize,
    pub k: usize,
    pub d: usize,
}

impl TorusSpec {
    pub fn new(n: usize, k: usize, d: usize) -> Result<Self> {
        let spec = Self { n, k, d };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidTorus(format!("need at least 2 agents per ring, got {}", self.n)));
        }
        if self.d < 1 {
            return Err(Error::InvalidTorus("dimension count must be at least 1".into()));
        }
        if self.k < 1 || self.k > self.n / 2 {
            return Err(Error::InvalidTorus(format!(
                "stencil radius k={} outside 1..={} for N={}",
                self.k,
                self.n / 2,
                self.n
            )));
        }
        Ok(())
    }

    /// Total number of agents `N^d`.
    pub fn total_nodes(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    /// Eigenvalues of the 1-D ring Laplacian by the circulant formula,
    /// indexed `j = 0..N-1`:
    /// `λ_j = Σ_{m=1}^{k} 2(1 - cos(2πjm/N))`, with the antipodal offset
    /// (even `N`, `k = N/2`) contributing `1 - cos(πj)` once.
    pub fn one_dim_eigenvalues(&self) -> Vec<f64> {
        let n = self.n;
        let paired_max = (n - 1) / 2;
        let antipodal = n.is_multiple_of(2) && self.k >= n / 2;
        (0..n)
            .map(|j| {
                let mut lam = 0.0;
                for m in 1..=self.k.min(paired_max) {
                    lam += 2.0 * (1.0 - (2.0 * std::f64::consts::PI * (j * m) as f64 / n as f64).cos());
                }
                if antipodal {
                    lam += 1.0 - (std::f64::consts::PI * j as f64).cos();
                }
                lam
            })
            .collect()
    }

    /// All `N^d` eigenvalues of the torus Laplacian (d-fold sums of the
    /// 1-D eigenvalues), ascending. Only valid under the materialization cap.
    pub fn all_eigenvalues(&self) -> Result<Vec<f64>> {
        let size = self.total_nodes();
        if size > TORUS_MATERIALIZE_CAP {
            return Err(Error::TorusTooLarge { size, cap: TORUS_MATERIALIZE_CAP });
        }
        let one = self.one_dim_eigenvalues();
        let mut sums = vec![0.0];
        for _ in 0..self.d {
            let mut next = Vec::with_capacity(sums.len() * one.len());
            for &s in &sums {
                for &l in &one {
                    next.push(s + l);
                }
            }
            sums = next;
        }
        sums.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(sums)
    }

    /// Distinct nonzero eigenvalues of the torus Laplacian, ascending,
    /// deduplicated at 1e-9 resolution. `cap` bounds the intermediate set
    /// size so high-dimensional tori fail loudly instead of exploding.
    pub fn distinct_nonzero_eigenvalues(&self, cap: usize) -> Result<Vec<f64>> {
        let mut one: Vec<f64> = dedup_sorted(self.one_dim_eigenvalues());
        one.retain(|&l| l > 0.0 || l.abs() < 1e-12);
        let mut sums: Vec<f64> = vec![0.0];
        for _ in 0..self.d {
            let mut next = Vec::with_capacity(sums.len() * one.len());
            for &s in &sums {
                for &l in &one {
                    next.push(s + l);
                }
            }
            sums = dedup_sorted(next);
            if sums.len() > cap {
                return Err(Error::InvalidTorus(format!(
                    "{} distinct eigenvalue sums exceed the cap {cap}; use the scalar closed form",
                    sums.len()
                )));
            }
        }
        sums.retain(|&l| l > CONNECTIVITY_TOL);
        Ok(sums)
    }

    /// `(λ̃₂, λ̃_N)`: the smallest nonzero and largest torus eigenvalues,
    /// computed analytically as `λ₂(1-D)` and `d·λ_N(1-D)` without
    /// building any matrix.
    pub fn extreme_eigenvalues(&self) -> (f64, f64) {
        let one = self.one_dim_eigenvalues();
        let lambda2 = one[1..].iter().fold(f64::INFINITY, |m, &x| m.min(x));
        let lambda_n = one.iter().fold(0.0_f64, |m, &x| m.max(x));
        (lambda2, self.d as f64 * lambda_n)
    }

    /// 1-D ring Laplacian with unit edge weights.
    pub fn ring_laplacian(&self) -> SymMatrix {
        let n = self.n;
        let paired_max = (n - 1) / 2;
        let antipodal = n.is_multiple_of(2) && self.k >= n / 2;
        let mut l = Matrix::zeros(n, n);
        let mut add = |i: usize, j: usize| {
            l.set(i, j, l.get(i, j) - 1.0);
            l.set(j, i, l.get(j, i) - 1.0);
            l.set(i, i, l.get(i, i) + 1.0);
            l.set(j, j, l.get(j, j) + 1.0);
        };
        for i in 0..n {
            for m in 1..=self.k.min(paired_max) {
                let j = (i + m) % n;
                add(i, j);
            }
        }
        if antipodal {
            for i in 0..n / 2 {
                add(i, i + n / 2);
            }
        }
        SymMatrix::new(l).expect("ring laplacian is symmetric")
    }

    /// Materialized torus Laplacian `Σ_i I ⊗ L₁ ⊗ I` together with the
    /// analytic eigenvalue list.
    ///
    /// Errors when `N^d` exceeds [`TORUS_MATERIALIZE_CAP`]; the analytic
    /// eigenvalue routes stay available at any size.
    pub fn laplacian(&self) -> Result<(SymMatrix, Vec<f64>)> {
        let size = self.total_nodes();
        if size > TORUS_MATERIALIZE_CAP {
            return Err(Error::TorusTooLarge { size, cap: TORUS_MATERIALIZE_CAP });
        }
        let l1 = self.ring_laplacian();
        let mut total = Matrix::zeros(size, size);
        for i in 0..self.d {
            let left = self.n.pow((self.d - 1 - i) as u32);
            let right = self.n.pow(i as u32);
            let term = kron(&kron(&Matrix::identity(left), l1.as_matrix()), &Matrix::identity(right));
            total = total.add(&term);
        }
        Ok((SymMatrix::new(total).expect("kronecker sum of symmetric terms"), self.all_eigenvalues()?))
    }

    /// Expand the torus into an [`UncertainGraph`] whose links all carry
    /// mean `μ` and variance `σ²`; used by the simulator.
    pub fn to_uncertain_graph(&self, mu: f64, sigma_sq: f64) -> Result<UncertainGraph> {
        let (lap, _) = self.laplacian()?;
        let size = lap.order();
        let mut unc = Vec::new();
        for i in 0..size {
            for j in (i + 1)..size {
                let w = -lap.get(i, j);
                if w > 0.5 {
                    unc.push(UncEdge { i, j, mean: mu * w, variance: sigma_sq });
                }
            }
        }
        UncertainGraph::new(size, Vec::new(), unc)
    }
}

fn dedup_sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out: Vec<f64> = Vec::with_capacity(v.len());
    for x in v {
        match out.last() {
            Some(&last) if (x - last).abs() <= 1e-9 => {}
            _ => out.push(x),
        }
    }
    out
}
