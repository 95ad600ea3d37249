//! Margin-layer tests: critical dispersion against the scalar closed
//! form, and the small-gain certificate against direct scalar algebra.

use stochsync::graph::{UncEdge, UncertainGraph};
use stochsync::linalg::{Cholesky, Matrix, SymMatrix};
use stochsync::margin::{critical_cod, small_gain_margin, DEFAULT_BISECTION_TOL};
use stochsync::prl::{LureSystem, RiccatiOptions, SyncProblem};
use stochsync::Error;

fn opts() -> RiccatiOptions {
    RiccatiOptions::default()
}

fn ring(n: usize, mu: f64, variance: f64) -> UncertainGraph {
    let unc = (0..n)
        .map(|i| {
            let j = (i + 1) % n;
            UncEdge { i: i.min(j), j: i.max(j), mean: mu, variance }
        })
        .collect();
    UncertainGraph::new(n, vec![], unc).unwrap()
}

/// Closed-form critical dispersion for scalar agents: the reduced modal
/// condition is `(1 - 1/δ)² > (a₀ - λg)² + 2γ̄τλg²` at both endpoints.
fn scalar_gamma_c(a: f64, delta: f64, g: f64, lambda2: f64, lambda_n: f64, tau: f64) -> f64 {
    let a0 = a - 1.0 / delta;
    let budget = (1.0 - 1.0 / delta) * (1.0 - 1.0 / delta);
    [lambda2, lambda_n]
        .iter()
        .map(|&l| {
            let det = a0 - l * g;
            (budget - det * det) / (2.0 * tau * l * g * g)
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn critical_cod_matches_scalar_closed_form_on_k3() {
    // complete graph on 3 nodes, all links uncertain: λ₂ = λ₃ = 3μ, τ = 1
    let mu = 1.0;
    let graph = UncertainGraph::new(
        3,
        vec![],
        vec![
            UncEdge { i: 0, j: 1, mean: mu, variance: 0.1 },
            UncEdge { i: 0, j: 2, mean: mu, variance: 0.1 },
            UncEdge { i: 1, j: 2, mean: mu, variance: 0.1 },
        ],
    )
    .unwrap();
    let (a, delta, g) = (0.9, 2.0, 0.1);
    let sys = LureSystem::scalar(a, delta / 2.0, delta / 2.0).unwrap();
    let g_mat = Matrix::from_rows(&[&[g]]);
    let spectra = graph.spectra().unwrap();
    let got = critical_cod(&sys, &g_mat, &spectra, &opts(), DEFAULT_BISECTION_TOL).unwrap();
    let want = scalar_gamma_c(a, delta, g, spectra.lambda2, spectra.lambda_n, spectra.tau);
    assert!(
        (got - want).abs() < 3.0 * DEFAULT_BISECTION_TOL,
        "bisection {got} vs closed form {want}"
    );
}

#[test]
fn critical_cod_consistent_under_weight_doubling() {
    let (a, delta, g) = (0.85, 2.0, 0.08);
    let sys = LureSystem::scalar(a, delta / 2.0, delta / 2.0).unwrap();
    let g_mat = Matrix::from_rows(&[&[g]]);
    for mu in [1.0, 2.0] {
        let graph = ring(4, mu, 0.1);
        let spectra = graph.spectra().unwrap();
        let got = critical_cod(&sys, &g_mat, &spectra, &opts(), DEFAULT_BISECTION_TOL).unwrap();
        let rerun = critical_cod(&sys, &g_mat, &spectra, &opts(), DEFAULT_BISECTION_TOL).unwrap();
        assert_eq!(got, rerun, "bisection must be deterministic");
        let want = scalar_gamma_c(a, delta, g, spectra.lambda2, spectra.lambda_n, spectra.tau);
        assert!(
            (got - want).abs() < 3.0 * DEFAULT_BISECTION_TOL,
            "mu {mu}: bisection {got} vs closed form {want}"
        );
    }
}

#[test]
fn critical_cod_rejects_deterministically_infeasible() {
    // strongly unstable agent with negligible coupling
    let sys = LureSystem::scalar(2.0, 1.0, 1.0).unwrap();
    let g_mat = Matrix::from_rows(&[&[1e-4]]);
    let spectra = ring(4, 1.0, 0.1).spectra().unwrap();
    let err = critical_cod(&sys, &g_mat, &spectra, &opts(), DEFAULT_BISECTION_TOL).unwrap_err();
    assert!(matches!(err, Error::DeterministicallyInfeasible(_)));
}

#[test]
fn critical_cod_infinite_without_uncertain_links() {
    // all-deterministic ring: τ = 0, so γ̄ never bites
    let det = (0..4)
        .map(|i| {
            let j = (i + 1) % 4;
            stochsync::graph::DetEdge { i: i.min(j), j: i.max(j), weight: 1.0 }
        })
        .collect();
    let graph = UncertainGraph::new(4, det, vec![]).unwrap();
    let sys = LureSystem::scalar(0.9, 1.0, 1.0).unwrap();
    let g_mat = Matrix::from_rows(&[&[0.1]]);
    let spectra = graph.spectra().unwrap();
    let got = critical_cod(&sys, &g_mat, &spectra, &opts(), DEFAULT_BISECTION_TOL).unwrap();
    assert!(got.is_infinite());
}

#[test]
fn small_gain_scalar_two_agents_matches_direct_algebra() {
    // N = 2, one uncertain link: every block is a scalar, so ρ can be
    // evaluated straight from the solved P
    let graph = UncertainGraph::new(
        2,
        vec![],
        vec![UncEdge { i: 0, j: 1, mean: 1.0, variance: 0.05 }],
    )
    .unwrap();
    let sys = LureSystem::scalar(0.9, 1.0, 1.0).unwrap();
    let g = 0.15;
    let g_mat = Matrix::from_rows(&[&[g]]);
    let problem = SyncProblem::new(&graph, &sys, &g_mat).unwrap();
    let cert = problem.solve(&opts()).unwrap();
    assert!(cert.feasible);
    let p = cert.p.as_ref().unwrap().get(0, 0);

    let sigma1 = 2.0;
    let a0 = 0.9 - 1.0 / sigma1;
    let a_cl = a0 - 2.0 * g; // Λ̂ = 2μ
    let s_hat = 1.0 / p - 1.0 / sigma1;
    let t_hat = p - 1.0 / sigma1;
    let w = t_hat - a_cl * a_cl / s_hat;
    let direction = 2.0 * g; // ℓ̂ℓ̂ᵀ ⊗ GC = 2g
    let rho_direct = (direction * direction / (s_hat * w)).sqrt();

    let sg = small_gain_margin(&problem, &cert, 0.05).unwrap();
    assert!(
        (sg.rho - rho_direct).abs() < 1e-8 * rho_direct.max(1.0),
        "matrix path {} vs scalar algebra {rho_direct}",
        sg.rho
    );
    assert!((sg.sigma_critical_sq - 1.0 / (rho_direct * rho_direct)).abs() < 1e-6);
}

#[test]
fn small_gain_zero_variance_always_holds() {
    let graph = ring(4, 1.0, 0.0);
    let sys = LureSystem::scalar(0.8, 1.0, 1.0).unwrap();
    let g_mat = Matrix::from_rows(&[&[0.1]]);
    let problem = SyncProblem::new(&graph, &sys, &g_mat).unwrap();
    let cert = problem.solve(&opts()).unwrap();
    assert!(cert.feasible);
    let sg = small_gain_margin(&problem, &cert, 0.0).unwrap();
    assert!(sg.holds);
    assert!(sg.rho.is_finite());
}

#[test]
fn small_gain_holds_is_monotone_in_variance() {
    let graph = ring(4, 1.0, 0.1);
    let sys = LureSystem::scalar(0.8, 1.0, 1.0).unwrap();
    let g_mat = Matrix::from_rows(&[&[0.1]]);
    let problem = SyncProblem::new(&graph, &sys, &g_mat).unwrap();
    let cert = problem.solve(&opts()).unwrap();
    let sg = small_gain_margin(&problem, &cert, 0.1).unwrap();
    let mut last_holds = true;
    for step in 0..8 {
        let sigma_sq = sg.sigma_critical_sq * (0.2 + 0.3 * step as f64);
        let s = small_gain_margin(&problem, &cert, sigma_sq).unwrap();
        assert!(!(s.holds && !last_holds), "holds recovered along the variance ray");
        last_holds = s.holds;
    }
    assert!(!last_holds);
}

#[test]
fn small_gain_requires_identical_variances() {
    let graph = UncertainGraph::new(
        3,
        vec![stochsync::graph::DetEdge { i: 1, j: 2, weight: 1.0 }],
        vec![
            UncEdge { i: 0, j: 1, mean: 1.0, variance: 0.1 },
            UncEdge { i: 0, j: 2, mean: 1.0, variance: 0.4 },
        ],
    )
    .unwrap();
    let sys = LureSystem::scalar(0.8, 1.0, 1.0).unwrap();
    let g_mat = Matrix::from_rows(&[&[0.1]]);
    let problem = SyncProblem::new(&graph, &sys, &g_mat).unwrap();
    let cert = problem.solve(&opts()).unwrap();
    assert!(cert.feasible);
    assert!(small_gain_margin(&problem, &cert, 0.1).is_err());
    // forcing a common variance makes it well-posed again
    let unified = problem.with_identical_variance(0.1);
    let cert2 = unified.solve(&opts()).unwrap();
    assert!(small_gain_margin(&unified, &cert2, 0.1).is_ok());
}

#[test]
fn solved_p_inverse_identities_hold() {
    // Ŝ and T̂ - A_clᵀŜ⁻¹A_cl are positive definite for solver output,
    // per the matrix-inversion-lemma rewrite of the Riccati equation
    let graph = ring(5, 1.0, 0.2);
    let sys = LureSystem::scalar(0.85, 1.0, 1.0).unwrap();
    let g_mat = Matrix::from_rows(&[&[0.08]]);
    let problem = SyncProblem::new(&graph, &sys, &g_mat).unwrap();
    let cert = problem.solve(&opts()).unwrap();
    assert!(cert.feasible);
    let p = cert.p.as_ref().unwrap();
    let ric = problem.riccati();
    let p_inv = Cholesky::new(p).unwrap().inverse();
    let sigma_chol = Cholesky::new(&ric.sigma).unwrap();
    let s_hat = SymMatrix::symmetrized(
        &p_inv.as_matrix().sub(&ric.b.matmul(&sigma_chol.solve_mat(&ric.b.transpose())))
    )
    .unwrap();
    assert!(s_hat.min_eigenvalue().unwrap() > 0.0);
    let s_chol = Cholesky::new(&s_hat).unwrap();
    let w = SymMatrix::symmetrized(
        &p.sub(&ric.c_term)
            .as_matrix()
            .sub(&ric.a_cl.transpose().matmul(&s_chol.solve_mat(&ric.a_cl))),
    )
    .unwrap();
    assert!(w.min_eigenvalue().unwrap() > 0.0);
}
