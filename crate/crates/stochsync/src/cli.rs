//! Command implementations behind the `stochsync` binary.
//!
//! Exit codes are a stable contract: 0 feasible/success, 2 infeasible or
//! desync, 1 usage or input error.

use std::path::Path;

use crate::config::{AnalysisConfig, GraphSource};
use crate::graph::GraphSpectra;
use crate::margin::{
    critical_cod, optimal_k_per_dimension, small_gain_margin, sweep_to_csv, torus_sweep,
};
use crate::prl::{
    check_full_sync_condition, check_reduced_sync_condition, check_torus_matrix_condition,
    FeasibilityCertificate, SyncProblem,
};
use crate::sim::{simulate, trace_to_csv, Verdict};
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;

/// Install a global rayon pool of the requested size; later calls with a
/// different size are ignored (the first pool wins).
pub fn set_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn fail(err: &Error) -> i32 {
    eprintln!("error: {err}");
    EXIT_INPUT
}

/// Spectral summary for either graph source. Torus sources use the
/// analytic eigenvalues: nominal `μλ̃`, all links uncertain (`τ = 1`,
/// `γ̄ = σ²/μ`).
fn spectra_of(source: &GraphSource) -> Result<GraphSpectra> {
    match source {
        GraphSource::Graph(g) => g.spectra(),
        GraphSource::Torus { spec, mu, sigma_sq } => {
            let (l2, ln) = spec.extreme_eigenvalues();
            Ok(GraphSpectra {
                lambda2: mu * l2,
                lambda_n: mu * ln,
                lambda2_d: 0.0,
                lambda_n_u: mu * ln,
                tau: 1.0,
                gamma_bar: sigma_sq / mu,
            })
        }
    }
}

fn print_spectra(s: &GraphSpectra) {
    println!(
        "spectra: lambda2={:.6} lambda_n={:.6} lambda2_d={:.6} lambda_n_u={:.6} tau={:.6} gamma_bar={:.6}",
        s.lambda2, s.lambda_n, s.lambda2_d, s.lambda_n_u, s.tau, s.gamma_bar
    );
}

fn print_certificate(name: &str, cert: &FeasibilityCertificate) {
    let verdict = if cert.feasible { "FEASIBLE" } else { "INFEASIBLE" };
    let binding = match (&cert.binding_condition, cert.binding_eigenvalue) {
        (Some(c), Some(l)) => format!(", binding {c} at lambda {l:.6}"),
        (Some(c), None) => format!(", binding {c}"),
        (None, Some(l)) => format!(", binding lambda {l:.6}"),
        (None, None) => String::new(),
    };
    println!(
        "check {name}: {verdict} (residual {:.3e}, {} iterations{binding})",
        cert.residual, cert.iterations
    );
}

pub fn cmd_analyze(config_path: &Path, threads: Option<usize>) -> i32 {
    set_threads(threads);
    match run_analyze(config_path) {
        Ok(all_feasible) => {
            if all_feasible {
                EXIT_OK
            } else {
                EXIT_INFEASIBLE
            }
        }
        Err(e) => fail(&e),
    }
}

fn run_analyze(config_path: &Path) -> Result<bool> {
    let cfg = AnalysisConfig::from_file(config_path)?;
    let (sys, _) = cfg.resolved_system()?;
    let coupling = cfg.resolved_coupling(&sys)?;
    let source = cfg.resolved_graph()?;
    let opts = cfg.riccati_options();

    let mut spectra = spectra_of(&source)?;
    if let Some(gamma) = cfg.analysis.as_ref().and_then(|a| a.gamma_bar) {
        spectra = spectra.with_gamma_bar(gamma);
    }
    print_spectra(&spectra);

    let default_checks = match &source {
        GraphSource::Graph(_) => vec!["reduced".to_string()],
        GraphSource::Torus { .. } => vec!["torus".to_string()],
    };
    let checks = cfg
        .analysis
        .as_ref()
        .and_then(|a| a.checks.clone())
        .unwrap_or(default_checks);

    let mut all_feasible = true;
    for name in &checks {
        let cert = match name.as_str() {
            "reduced" => check_reduced_sync_condition(&sys, &coupling, &spectra, &opts)?,
            "full" => {
                let g = match &source {
                    GraphSource::Graph(g) => g.clone(),
                    GraphSource::Torus { spec, mu, sigma_sq } => {
                        spec.to_uncertain_graph(*mu, *sigma_sq)?
                    }
                };
                check_full_sync_condition(&g, &sys, &coupling, &opts)?
            }
            "torus" => match &source {
                GraphSource::Torus { spec, mu, sigma_sq } => {
                    check_torus_matrix_condition(spec, &sys, &coupling, *mu, *sigma_sq, &opts)?
                }
                GraphSource::Graph(_) => {
                    return Err(Error::Config(
                        "analysis: the torus check needs a [graph.torus] source".into(),
                    ))
                }
            },
            other => return Err(Error::Config(format!("analysis: unknown check '{other}'"))),
        };
        print_certificate(name, &cert);
        all_feasible &= cert.feasible;
    }
    Ok(all_feasible)
}

pub fn cmd_margin(config_path: &Path, threads: Option<usize>) -> i32 {
    set_threads(threads);
    match run_margin(config_path) {
        Ok(ok) => {
            if ok {
                EXIT_OK
            } else {
                EXIT_INFEASIBLE
            }
        }
        Err(e) => fail(&e),
    }
}

fn run_margin(config_path: &Path) -> Result<bool> {
    let cfg = AnalysisConfig::from_file(config_path)?;
    let (sys, _) = cfg.resolved_system()?;
    let coupling = cfg.resolved_coupling(&sys)?;
    let source = cfg.resolved_graph()?;
    let opts = cfg.riccati_options();
    let spectra = spectra_of(&source)?;
    print_spectra(&spectra);

    let compute = cfg
        .margin
        .as_ref()
        .map(|m| m.compute.clone())
        .unwrap_or_else(|| vec!["critical_cod".to_string()]);

    let mut ok = true;
    for item in &compute {
        match item.as_str() {
            "critical_cod" => {
                match critical_cod(&sys, &coupling, &spectra, &opts, cfg.bisection_tol()) {
                    Ok(gamma) if gamma.is_finite() => println!("critical_cod: {gamma:.3}"),
                    Ok(_) => println!(
                        "critical_cod: infinite (still feasible at the doubling cap; no positive-dispersion limit found)"
                    ),
                    Err(Error::DeterministicallyInfeasible(msg)) => {
                        println!("critical_cod: deterministically infeasible ({msg})");
                        ok = false;
                    }
                    Err(e) => return Err(e),
                }
            }
            "small_gain" => {
                let g = match &source {
                    GraphSource::Graph(g) => g.clone(),
                    GraphSource::Torus { spec, mu, sigma_sq } => {
                        spec.to_uncertain_graph(*mu, *sigma_sq)?
                    }
                };
                let sigma_sq = match cfg.margin.as_ref().and_then(|m| m.sigma_sq) {
                    Some(v) => v,
                    None => g
                        .unc_edges()
                        .first()
                        .map(|e| e.variance)
                        .ok_or_else(|| Error::InvalidInput("small_gain: no uncertain links".into()))?,
                };
                let problem =
                    SyncProblem::with_options(&g, &sys, &coupling, &opts)?.with_identical_variance(sigma_sq);
                let cert = problem.solve(&opts)?;
                if !cert.feasible {
                    print_certificate("full (small-gain reference)", &cert);
                    ok = false;
                    continue;
                }
                let sg = small_gain_margin(&problem, &cert, sigma_sq)?;
                println!(
                    "small_gain: rho={:.6e} sigma_critical_sq={:.6e} holds={} (tested sigma_sq={:.6e})",
                    sg.rho, sg.sigma_critical_sq, sg.holds, sigma_sq
                );
                ok &= sg.holds;
            }
            other => return Err(Error::Config(format!("margin: unknown item '{other}'"))),
        }
    }
    Ok(ok)
}

pub fn cmd_torus(config_path: &Path, csv: Option<&Path>, threads: Option<usize>) -> i32 {
    set_threads(threads);
    match run_torus(config_path, csv) {
        Ok(()) => EXIT_OK,
        Err(e) => fail(&e),
    }
}

fn run_torus(config_path: &Path, csv: Option<&Path>) -> Result<()> {
    let cfg = AnalysisConfig::from_file(config_path)?;
    let (params, n, k_range, d_range) = cfg.sweep_params()?;
    let cells = torus_sweep(&params, n, k_range, d_range)?;
    if let Some(path) = csv {
        std::fs::write(path, sweep_to_csv(&cells))?;
        println!("wrote {} cells to {}", cells.len(), path.display());
    }
    println!("d, optimal k, rho_sm");
    for (d, best) in optimal_k_per_dimension(&cells) {
        match best {
            Some((k, rho)) => println!("{d}, {k}, {rho:.6}"),
            None => println!("{d}, -, infeasible"),
        }
    }
    Ok(())
}

pub fn cmd_simulate(
    config_path: &Path,
    csv: Option<&Path>,
    threads: Option<usize>,
    seed: Option<u64>,
) -> i32 {
    set_threads(threads);
    match run_simulate(config_path, csv, seed) {
        Ok(Verdict::Sync) => EXIT_OK,
        Ok(_) => EXIT_INFEASIBLE,
        Err(e) => fail(&e),
    }
}

fn run_simulate(config_path: &Path, csv: Option<&Path>, seed: Option<u64>) -> Result<Verdict> {
    let cfg = AnalysisConfig::from_file(config_path)?;
    let sim_cfg = cfg.sim_config(seed)?;
    let trace = simulate(&sim_cfg)?;
    if let Some(path) = csv {
        std::fs::write(path, trace_to_csv(&trace))?;
    }
    println!(
        "simulate: verdict={} K_hat={:.6e} beta_hat={:.9} r_squared={:.4} diverged={}/{}",
        trace.verdict, trace.k_hat, trace.beta_hat, trace.r_squared, trace.diverged_trials, sim_cfg.trials
    );
    Ok(trace.verdict)
}
