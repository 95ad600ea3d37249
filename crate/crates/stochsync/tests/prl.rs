//! Feasibility-solver tests against independent oracles: the scalar
//! brute-force fixed-point map, closed-form torus algebra, and
//! cross-checks between the three synchronization conditions.

use stochsync::graph::{DetEdge, TorusSpec, UncEdge, UncertainGraph};
use stochsync::linalg::{Matrix, SymMatrix};
use stochsync::margin::{scalar_torus_feasible, ScalarTorusParams};
use stochsync::prl::{
    check_eigenvalue_instances, check_full_sync_condition, check_reduced_sync_condition,
    check_torus_matrix_condition, sector_check, solve_dual_prl, solve_stochastic_prl, LureSystem,
    RiccatiOptions, StructuredUncertainty, SyncProblem,
};
use stochsync::sim::{chua_nonlinearity, ChuaParams};

fn opts() -> RiccatiOptions {
    RiccatiOptions::default()
}

/// xorshift in [0,1); deterministic across runs
struct Rand(u64);

impl Rand {
    fn unit(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }

    fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }
}

/// Brute-force feasibility of the scalar stochastic Riccati
/// `p > theta * sigma * p / (sigma - p) + c²/sigma + r` over `p ∈ (0, sigma)`
/// with `theta = a0² + var·a1²`: grid plus ternary refinement of the gap.
fn scalar_feasible_bruteforce(sigma: f64, c: f64, r: f64, theta: f64) -> bool {
    let gap = |p: f64| p - (theta * sigma * p / (sigma - p) + c * c / sigma + r);
    let n = 10_000;
    let mut best_p = f64::NAN;
    let mut best = f64::NEG_INFINITY;
    for i in 1..n {
        let p = sigma * i as f64 / n as f64;
        let g = gap(p);
        if g > best {
            best = g;
            best_p = p;
        }
    }
    // ternary refinement around the best grid point (gap is concave there)
    let mut lo = (best_p - sigma / n as f64).max(1e-12);
    let mut hi = (best_p + sigma / n as f64).min(sigma - 1e-12);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if gap(m1) < gap(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    gap(0.5 * (lo + hi)).max(best) > 0.0
}

fn scalar_system(a: f64, d: f64) -> LureSystem {
    LureSystem::scalar(a, d, d).unwrap()
}

#[test]
fn degenerate_loop_gives_constant_solution() {
    // A = BΣ⁻¹C makes A₀ = 0; P = CᵀΣ⁻¹C + R_P
    let b = Matrix::column(&[1.0, -0.5, 2.0]);
    let c = Matrix::from_rows(&[&[0.5, 1.0, 0.0]]);
    let d = Matrix::from_rows(&[&[1.0]]);
    let sigma_inv = 0.5; // Σ = 2
    let a = b.matmul(&c).scale(sigma_inv);
    let sys = LureSystem::new(a, b, c.clone(), d.clone(), d).unwrap();
    let r_p = SymMatrix::scaled_identity(3, 1e-6);
    let cert = solve_stochastic_prl(&sys, &StructuredUncertainty::none(), &r_p, &opts()).unwrap();
    assert!(cert.feasible);
    let p = cert.p.unwrap();
    let want = SymMatrix::symmetrized(&c.transpose().matmul(&c).scale(sigma_inv))
        .unwrap()
        .add(&r_p);
    assert!(p.sub(&want).frobenius_norm() < 1e-8);
}

#[test]
fn zero_variance_matches_deterministic_solution() {
    let sys = scalar_system(0.5, 1.0);
    let r_p = SymMatrix::scaled_identity(1, 1e-6);
    let unc = StructuredUncertainty::new(vec![(Matrix::from_rows(&[&[1.0]]), 0.0)]).unwrap();
    let with_zero = solve_stochastic_prl(&sys, &unc, &r_p, &opts()).unwrap();
    let without = solve_stochastic_prl(&sys, &StructuredUncertainty::none(), &r_p, &opts()).unwrap();
    assert_eq!(with_zero.feasible, without.feasible);
    let (pa, pb) = (with_zero.p.unwrap(), without.p.unwrap());
    assert!(pa.sub(&pb).frobenius_norm() < 1e-9);
}

#[test]
fn scalar_feasibility_boundary_matches_bruteforce() {
    // a = 0.5, b = c = 1, D = 1 (Σ = 2), A₁ = 1: bisect the critical
    // variance with both the solver and the brute-force map
    let sys = scalar_system(0.5, 1.0);
    let r = 1e-6;
    let r_p = SymMatrix::scaled_identity(1, r);
    let a0 = 0.5 - 1.0 / 2.0;

    let solver_feasible = |var: f64| {
        let unc = StructuredUncertainty::new(vec![(Matrix::from_rows(&[&[1.0]]), var)]).unwrap();
        solve_stochastic_prl(&sys, &unc, &r_p, &opts()).unwrap().feasible
    };
    let oracle_feasible = |var: f64| scalar_feasible_bruteforce(2.0, 1.0, r, a0 * a0 + var);

    let bisect = |feasible: &dyn Fn(f64) -> bool| {
        let mut lo = 0.0;
        let mut hi = 1.0;
        while feasible(hi) {
            lo = hi;
            hi *= 2.0;
            assert!(hi < 64.0, "no infeasible bracket found");
        }
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let solver_boundary = bisect(&solver_feasible);
    let oracle_boundary = bisect(&oracle_feasible);
    assert!(
        (solver_boundary - oracle_boundary).abs() < 1e-6,
        "solver {solver_boundary} vs oracle {oracle_boundary}"
    );
}

#[test]
fn dual_degenerate_and_symmetric_agreement() {
    // A₀ = 0 scalar: Q = BΣ⁻¹Bᵀ + R_Q
    let r_q = SymMatrix::scaled_identity(1, 1e-6);
    let b = Matrix::column(&[2.0]);
    let c = Matrix::from_rows(&[&[0.7]]);
    let d = Matrix::from_rows(&[&[1.0]]);
    let a_mat = b.matmul(&c).scale(0.5); // A = BΣ⁻¹C
    let sys0 = LureSystem::new(a_mat, b.clone(), c, d.clone(), d).unwrap();
    let cert = solve_dual_prl(&sys0, &StructuredUncertainty::none(), &r_q, &opts()).unwrap();
    assert!(cert.feasible);
    let q = cert.p.unwrap();
    let want = 2.0 * 2.0 / 2.0 + 1e-6; // BΣ⁻¹Bᵀ + R_Q
    assert!((q.get(0, 0) - want).abs() < 1e-8, "q = {}", q.get(0, 0));

    // symmetric instances (A = Aᵀ, B = Cᵀ): primal and dual verdicts agree
    let mut rng = Rand(31);
    for _ in 0..20 {
        let n = 2 + (rng.unit() * 2.0) as usize;
        let a = SymMatrix::from_fn(n, |_, _| rng.range(-0.4, 0.4));
        let bvec: Vec<f64> = (0..n).map(|_| rng.range(-1.0, 1.0)).collect();
        let b = Matrix::column(&bvec);
        let c = b.transpose();
        let d = Matrix::from_rows(&[&[rng.range(0.6, 1.4)]]);
        let sys = LureSystem::new(a.as_matrix().clone(), b, c, d.clone(), d).unwrap();
        let var = rng.range(0.0, 0.5);
        let dir = Matrix::identity(n);
        let unc = StructuredUncertainty::new(vec![(dir, var)]).unwrap();
        let r = SymMatrix::scaled_identity(n, 1e-6);
        let primal = solve_stochastic_prl(&sys, &unc, &r, &opts()).unwrap();
        let dual = solve_dual_prl(&sys, &unc, &r, &opts()).unwrap();
        assert_eq!(primal.feasible, dual.feasible);
    }
}

#[test]
fn dual_of_feasible_primal_is_feasible() {
    let mut rng = Rand(77);
    let mut tested = 0;
    let mut attempts = 0;
    while tested < 100 && attempts < 3000 {
        attempts += 1;
        let n = 3;
        let mut a = Matrix::from_fn(n, n, |_, _| rng.range(-0.6, 0.6));
        // pull the spectral radius toward stability through row scaling
        let norm = a.frobenius_norm();
        if norm > 0.9 {
            a = a.scale(0.9 / norm);
        }
        let b = Matrix::column(&[rng.range(-1.0, 1.0), rng.range(-1.0, 1.0), rng.range(-1.0, 1.0)]);
        let c = Matrix::from_rows(&[&[rng.range(-1.0, 1.0), rng.range(-1.0, 1.0), rng.range(-1.0, 1.0)]]);
        let d = Matrix::from_rows(&[&[rng.range(0.7, 1.5)]]);
        let sys = match LureSystem::new(a.clone(), b, c, d.clone(), d) {
            Ok(s) => s,
            Err(_) => continue,
        };
        let var = rng.range(0.0, 0.3);
        let unc = StructuredUncertainty::new(vec![(a.scale(rng.range(0.0, 1.0)), var)]).unwrap();
        let r = SymMatrix::scaled_identity(n, 1e-6);
        let primal = solve_stochastic_prl(&sys, &unc, &r, &opts()).unwrap();
        if !primal.feasible {
            continue;
        }
        tested += 1;
        let dual = solve_dual_prl(&sys, &unc, &r, &opts()).unwrap();
        assert!(dual.feasible, "dual infeasible for a feasible primal instance");
    }
    assert!(tested >= 100, "only {tested} feasible primal instances generated");
}

fn ring_graph(n: usize, mu: f64, variance: f64) -> UncertainGraph {
    let unc = (0..n)
        .map(|i| UncEdge { i, j: (i + 1) % n, mean: mu, variance })
        .map(|e| UncEdge { i: e.i.min(e.j), j: e.i.max(e.j), mean: e.mean, variance: e.variance })
        .collect();
    UncertainGraph::new(n, vec![], unc).unwrap()
}

#[test]
fn full_check_two_agents_matches_scalar_oracle() {
    // N = 2, scalar agents, one uncertain link: the transverse problem is
    // the scalar Riccati with nominal eigenvalue 2μ and gain doubled by
    // ‖ℓ̂‖² = 2
    let (a, d) = (0.9, 1.0);
    let sys = scalar_system(a, d);
    let g = Matrix::from_rows(&[&[0.15]]);
    let mu = 1.0;
    let r = 1e-6;
    let a0 = a - 0.5;
    for var in [0.0, 0.05, 0.2, 0.8, 2.0, 5.0] {
        let graph = UncertainGraph::new(
            2,
            vec![],
            vec![UncEdge { i: 0, j: 1, mean: mu, variance: var }],
        )
        .unwrap();
        let cert = check_full_sync_condition(&graph, &sys, &g, &opts()).unwrap();
        // closed loop a0 - 2μg, uncertainty direction 2g
        let theta = {
            let acl = a0 - 2.0 * mu * 0.15;
            acl * acl + var * (2.0 * 0.15) * (2.0 * 0.15)
        };
        let oracle = scalar_feasible_bruteforce(2.0 * d, 1.0, r, theta);
        assert_eq!(cert.feasible, oracle, "variance {var}");
    }
}

#[test]
fn zero_variance_full_check_matches_per_eigenvalue() {
    let mut rng = Rand(5);
    for trial in 0..20 {
        let n_nodes = 3 + (rng.unit() * 3.0) as usize;
        let graph = ring_graph(n_nodes, rng.range(0.3, 1.5), 0.0);
        let a = rng.range(0.3, 1.1);
        let sys = scalar_system(a, 1.0);
        let g = Matrix::from_rows(&[&[rng.range(0.01, 0.4)]]);
        let full = check_full_sync_condition(&graph, &sys, &g, &opts()).unwrap();
        let eigs = graph.nonzero_laplacian_eigenvalues().unwrap();
        let per = check_eigenvalue_instances(&sys, &g, &eigs, 1.0, 0.0, &opts()).unwrap();
        assert_eq!(full.feasible, per.feasible, "trial {trial}");
    }
}

#[test]
fn reduced_feasible_implies_full_feasible() {
    let mut rng = Rand(91);
    let mut reduced_feasible_seen = 0;
    for _ in 0..30 {
        let n_nodes = 4 + (rng.unit() * 2.0) as usize;
        let mut det = Vec::new();
        let mut unc = Vec::new();
        for i in 0..n_nodes {
            let j = (i + 1) % n_nodes;
            let (lo, hi) = (i.min(j), i.max(j));
            if rng.unit() < 0.5 {
                det.push(DetEdge { i: lo, j: hi, weight: rng.range(0.3, 1.2) });
            } else {
                unc.push(UncEdge { i: lo, j: hi, mean: rng.range(0.3, 1.2), variance: rng.range(0.0, 0.4) });
            }
        }
        if rng.unit() < 0.6 {
            unc.push(UncEdge { i: 0, j: 2, mean: rng.range(0.3, 1.0), variance: rng.range(0.0, 0.4) });
        }
        let graph = UncertainGraph::new(n_nodes, det, unc).unwrap();
        let sys = scalar_system(rng.range(0.4, 1.05), 1.0);
        let g = Matrix::from_rows(&[&[rng.range(0.02, 0.3)]]);
        let spectra = graph.spectra().unwrap();
        let reduced = check_reduced_sync_condition(&sys, &g, &spectra, &opts()).unwrap();
        if reduced.feasible {
            reduced_feasible_seen += 1;
            let full = check_full_sync_condition(&graph, &sys, &g, &opts()).unwrap();
            assert!(full.feasible, "reduced feasible but full infeasible");
        }
    }
    assert!(reduced_feasible_seen >= 5, "too few feasible draws to exercise the implication");
}

#[test]
fn reduced_endpoints_cover_interior_eigenvalues() {
    let mut rng = Rand(13);
    for _ in 0..20 {
        let n_nodes = 5;
        let graph = ring_graph(n_nodes, rng.range(0.4, 1.2), rng.range(0.0, 0.3));
        let sys = scalar_system(rng.range(0.4, 1.0), 1.0);
        let g = Matrix::from_rows(&[&[rng.range(0.02, 0.25)]]);
        let spectra = graph.spectra().unwrap();
        let reduced = check_reduced_sync_condition(&sys, &g, &spectra, &opts()).unwrap();
        if !reduced.feasible {
            continue;
        }
        for lambda in graph.nonzero_laplacian_eigenvalues().unwrap() {
            let intensity = 2.0 * spectra.gamma_bar * spectra.tau * lambda;
            let cert = stochsync::prl::solve_modal_riccati(&sys, &g, lambda, intensity, &opts()).unwrap();
            assert!(cert.feasible, "interior eigenvalue {lambda} infeasible despite endpoints");
        }
    }
}

#[test]
fn feasibility_monotone_in_gamma() {
    let graph = ring_graph(4, 1.0, 0.1);
    let sys = scalar_system(0.9, 1.0);
    let g = Matrix::from_rows(&[&[0.1]]);
    let spectra = graph.spectra().unwrap();
    let mut last_feasible = true;
    for step in 0..10 {
        let gamma = step as f64 * 0.7;
        let cert =
            check_reduced_sync_condition(&sys, &g, &spectra.with_gamma_bar(gamma), &opts()).unwrap();
        assert!(
            !(cert.feasible && !last_feasible),
            "feasibility recovered after being lost along the γ̄ ray"
        );
        last_feasible = cert.feasible;
    }
    assert!(!last_feasible, "expected infeasibility by the top of the ladder");
}

#[test]
fn torus_condition_matches_full_on_two_ring() {
    let spec = TorusSpec::new(2, 1, 1).unwrap();
    let sys = scalar_system(0.9, 1.0);
    let g = Matrix::from_rows(&[&[0.12]]);
    for (mu, var) in [(1.0, 0.0), (1.0, 0.3), (0.7, 1.5), (1.0, 6.0)] {
        let torus = check_torus_matrix_condition(&spec, &sys, &g, mu, var, &opts()).unwrap();
        let graph = spec.to_uncertain_graph(mu, var).unwrap();
        let full = check_full_sync_condition(&graph, &sys, &g, &opts()).unwrap();
        assert_eq!(torus.feasible, full.feasible, "mu {mu} var {var}");
    }
}

#[test]
fn torus_condition_matches_closed_form_for_scalar_agents() {
    let mut rng = Rand(2024);
    let mut checked = 0;
    for _ in 0..60 {
        let delta = rng.range(1.5, 10.0);
        let p = ScalarTorusParams {
            a: rng.range(-0.5, 1.3),
            delta,
            g: rng.range(0.005, 0.1),
            mu: rng.range(0.3, 1.5),
            sigma_sq: rng.range(0.0, 1.0),
        };
        let n = 3 + (rng.unit() * 6.0) as usize;
        let k = 1 + (rng.unit() * ((n / 2) as f64 - 1.0).max(0.0)) as usize;
        let d = 1 + (rng.unit() * 2.0) as usize;
        let spec = TorusSpec::new(n, k, d).unwrap();
        let closed = scalar_torus_feasible(&p, &spec).unwrap();
        // skip draws too close to the boundary for the iterative solver
        let (l2, ln) = spec.extreme_eigenvalues();
        let margin = p.budget() - p.alpha_sq(l2).max(p.alpha_sq(ln));
        if margin.abs() < 1e-4 {
            continue;
        }
        let sys = LureSystem::scalar(p.a, delta / 2.0, delta / 2.0).unwrap();
        let g = Matrix::from_rows(&[&[p.g]]);
        let cert =
            check_torus_matrix_condition(&spec, &sys, &g, p.mu, p.sigma_sq, &opts()).unwrap();
        assert_eq!(cert.feasible, closed, "params {p:?} spec {spec:?}");
        checked += 1;
    }
    assert!(checked > 30, "too many draws skipped");
}

#[test]
fn certificate_resubstitutes_into_its_equation() {
    let graph = ring_graph(4, 1.0, 0.2);
    let sys = scalar_system(0.8, 1.0);
    let g = Matrix::from_rows(&[&[0.1]]);
    let problem = SyncProblem::new(&graph, &sys, &g).unwrap();
    let cert = problem.solve(&opts()).unwrap();
    assert!(cert.feasible);
    let p = cert.p.as_ref().unwrap();
    let residual = problem.riccati().residual(p, opts().pd_margin).unwrap();
    assert!(residual <= opts().residual_tol * (1.0 + p.frobenius_norm()));
}

#[test]
fn sector_check_examples() {
    let grid: Vec<f64> = (-40..=40).map(|i| i as f64 * 0.25).collect();
    // linear slope well inside the sector
    assert!(sector_check(|y| 0.1 * y, 1.0, 1.0, &grid));
    // cubic with zero sector scalars: monotone and first-quadrant
    assert!(sector_check(|y| y * y * y, 0.0, 0.0, &grid));
    // chua: valid iff d·s_max < 1 with s_max = 0.6
    let params = ChuaParams::default();
    let phi = |y: f64| chua_nonlinearity(y, &params);
    assert!(sector_check(phi, 0.9 / 0.6, 0.9 / 0.6, &grid));
    assert!(!sector_check(phi, 1.1 / 0.6, 1.1 / 0.6, &grid));
    // the tightened shifted sector used by the benchmark
    let shifted = |y: f64| chua_nonlinearity(y, &params) - 0.299 * y;
    assert!(sector_check(shifted, 3.32, 3.32, &grid));
    // empty grid is rejected
    assert!(!sector_check(phi, 1.0, 1.0, &[]));
}

#[test]
fn oversize_full_problem_is_rejected() {
    let graph = ring_graph(90, 1.0, 0.1);
    let sys = LureSystem::new(
        Matrix::identity(3).scale(0.5),
        Matrix::column(&[1.0, 0.0, 0.0]),
        Matrix::from_rows(&[&[1.0, 0.0, 0.0]]),
        Matrix::from_rows(&[&[1.0]]),
        Matrix::from_rows(&[&[1.0]]),
    )
    .unwrap();
    let g = Matrix::from_rows(&[&[0.1], &[0.0], &[0.0]]);
    assert!(matches!(
        check_full_sync_condition(&graph, &sys, &g, &opts()),
        Err(stochsync::Error::ProblemTooLarge { .. })
    ));
}

#[test]
fn disconnected_graph_is_rejected() {
    let graph = UncertainGraph::new(4, vec![DetEdge { i: 0, j: 1, weight: 1.0 }], vec![]).unwrap();
    let sys = scalar_system(0.5, 1.0);
    let g = Matrix::from_rows(&[&[0.1]]);
    assert!(matches!(
        check_full_sync_condition(&graph, &sys, &g, &opts()),
        Err(stochsync::Error::Disconnected { .. })
    ));
}
