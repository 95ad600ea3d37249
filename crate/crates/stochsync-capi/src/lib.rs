//! C ABI over the synchronization analysis library: opaque config handles,
//! plain-struct results, and integer status codes. The generated header
//! lives at `include/stochsync.h`.
//!
//! Every function is safe to call from any thread; error detail for the
//! most recent failing call on the current thread is available through
//! [`ss_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

use stochsync::config::{AnalysisConfig, GraphSource};
use stochsync::graph::TorusSpec;
use stochsync::margin::{
    critical_cod, scalar_torus_margin, sweep_to_csv, torus_sweep, ScalarTorusParams,
};
use stochsync::prl::{
    check_full_sync_condition, check_reduced_sync_condition, check_torus_matrix_condition,
    FeasibilityCertificate,
};
use stochsync::sim::{simulate, trace_to_csv, Verdict};

/// Status code returned by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SsStatus {
    /// Success.
    SsOk = 0,
    /// A pointer argument was null or UTF-8 conversion failed.
    SsBadArgument = 1,
    /// The config or problem data was rejected; see `ss_last_error`.
    SsInvalidInput = 2,
    /// Numerical analysis failed; see `ss_last_error`.
    SsAnalysisError = 3,
    /// Filesystem I/O failed.
    SsIoError = 4,
}

/// Opaque parsed analysis configuration.
pub struct SsConfig {
    inner: AnalysisConfig,
}

/// Feasibility verdict of one synchronization check.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SsCertificate {
    /// 1 when feasible, 0 otherwise.
    pub feasible: i32,
    /// Fixed-point residual of the reported Riccati solution.
    pub residual: f64,
    /// Total solver iterations across all instances.
    pub iterations: u64,
    /// Laplacian eigenvalue of the binding instance; NaN when not
    /// applicable.
    pub binding_eigenvalue: f64,
}

/// Spectral summary of the configured network.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SsSpectra {
    pub lambda2: f64,
    pub lambda_n: f64,
    pub lambda2_d: f64,
    pub lambda_n_u: f64,
    pub tau: f64,
    pub gamma_bar: f64,
}

/// Closed-form scalar torus margin.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SsTorusMargin {
    pub lambda_sup: f64,
    pub alpha_sq_2: f64,
    pub alpha_sq_n: f64,
    /// NaN when the deterministic part alone is infeasible.
    pub rho_sm: f64,
    /// 1 when the deterministic part is feasible.
    pub deterministic_feasible: i32,
}

/// Monte Carlo outcome summary.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SsSimSummary {
    /// 0 sync, 1 desync, 2 inconclusive.
    pub verdict: i32,
    pub k_hat: f64,
    pub beta_hat: f64,
    pub r_squared: f64,
    pub diverged_trials: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn fail(status: SsStatus, err: impl std::fmt::Display) -> SsStatus {
    set_error(&err.to_string());
    status
}

fn classify(err: &stochsync::Error) -> SsStatus {
    match err {
        stochsync::Error::Io(_) => SsStatus::SsIoError,
        stochsync::Error::Config(_)
        | stochsync::Error::InvalidInput(_)
        | stochsync::Error::InvalidEdge { .. }
        | stochsync::Error::InvalidGraph(_)
        | stochsync::Error::InvalidTorus(_)
        | stochsync::Error::DimensionMismatch(_) => SsStatus::SsInvalidInput,
        _ => SsStatus::SsAnalysisError,
    }
}

/// Most recent error message for this thread; the pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ss_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

unsafe fn str_arg<'a>(ptr: *const c_char) -> Option<&'a str> {
    if ptr.is_null() {
        return None;
    }
    CStr::from_ptr(ptr).to_str().ok()
}

/// Parse a TOML config file into an opaque handle; null on failure.
///
/// # Safety
/// `path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ss_config_from_file(path: *const c_char) -> *mut SsConfig {
    let Some(path) = str_arg(path) else {
        set_error("path must be a valid UTF-8 C string");
        return std::ptr::null_mut();
    };
    match AnalysisConfig::from_file(Path::new(path)) {
        Ok(inner) => Box::into_raw(Box::new(SsConfig { inner })),
        Err(e) => {
            set_error(&e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Parse a TOML config from memory; null on failure.
///
/// # Safety
/// `text` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ss_config_parse(text: *const c_char) -> *mut SsConfig {
    let Some(text) = str_arg(text) else {
        set_error("text must be a valid UTF-8 C string");
        return std::ptr::null_mut();
    };
    match AnalysisConfig::parse(text) {
        Ok(inner) => Box::into_raw(Box::new(SsConfig { inner })),
        Err(e) => {
            set_error(&e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Release a config handle. Null is ignored.
///
/// # Safety
/// `cfg` must come from `ss_config_from_file`/`ss_config_parse` and must
/// not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ss_config_free(cfg: *mut SsConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

fn spectra_of(cfg: &AnalysisConfig) -> stochsync::Result<stochsync::graph::GraphSpectra> {
    match cfg.resolved_graph()? {
        GraphSource::Graph(g) => g.spectra(),
        GraphSource::Torus { spec, mu, sigma_sq } => {
            let (l2, ln) = spec.extreme_eigenvalues();
            Ok(stochsync::graph::GraphSpectra {
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

/// Spectral summary (λ₂, λ_N, split eigenvalues, τ, γ̄) of the configured
/// network.
///
/// # Safety
/// `cfg` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ss_spectra(cfg: *const SsConfig, out: *mut SsSpectra) -> SsStatus {
    let (Some(cfg), false) = (cfg.as_ref(), out.is_null()) else {
        return fail(SsStatus::SsBadArgument, "null pointer argument");
    };
    match spectra_of(&cfg.inner) {
        Ok(s) => {
            *out = SsSpectra {
                lambda2: s.lambda2,
                lambda_n: s.lambda_n,
                lambda2_d: s.lambda2_d,
                lambda_n_u: s.lambda_n_u,
                tau: s.tau,
                gamma_bar: s.gamma_bar,
            };
            SsStatus::SsOk
        }
        Err(e) => fail(classify(&e), e),
    }
}

fn export_cert(cert: &FeasibilityCertificate) -> SsCertificate {
    SsCertificate {
        feasible: cert.feasible as i32,
        residual: cert.residual,
        iterations: cert.iterations as u64,
        binding_eigenvalue: cert.binding_eigenvalue.unwrap_or(f64::NAN),
    }
}

#[derive(Clone, Copy)]
enum CheckKind {
    Reduced,
    Full,
    Torus,
}

unsafe fn run_check(cfg: *const SsConfig, out: *mut SsCertificate, kind: CheckKind) -> SsStatus {
    let (Some(cfg), false) = (cfg.as_ref(), out.is_null()) else {
        return fail(SsStatus::SsBadArgument, "null pointer argument");
    };
    let result = (|| -> stochsync::Result<FeasibilityCertificate> {
        let (sys, _) = cfg.inner.resolved_system()?;
        let coupling = cfg.inner.resolved_coupling(&sys)?;
        let opts = cfg.inner.riccati_options();
        match kind {
            CheckKind::Reduced => {
                let spectra = spectra_of(&cfg.inner)?;
                check_reduced_sync_condition(&sys, &coupling, &spectra, &opts)
            }
            CheckKind::Full => {
                let graph = match cfg.inner.resolved_graph()? {
                    GraphSource::Graph(g) => g,
                    GraphSource::Torus { spec, mu, sigma_sq } => {
                        spec.to_uncertain_graph(mu, sigma_sq)?
                    }
                };
                check_full_sync_condition(&graph, &sys, &coupling, &opts)
            }
            CheckKind::Torus => match cfg.inner.resolved_graph()? {
                GraphSource::Torus { spec, mu, sigma_sq } => {
                    check_torus_matrix_condition(&spec, &sys, &coupling, mu, sigma_sq, &opts)
                }
                GraphSource::Graph(_) => Err(stochsync::Error::Config(
                    "the torus check needs a [graph.torus] source".into(),
                )),
            },
        }
    })();
    match result {
        Ok(cert) => {
            *out = export_cert(&cert);
            SsStatus::SsOk
        }
        Err(e) => fail(classify(&e), e),
    }
}

/// Reduced (network-size-independent) synchronization check.
///
/// # Safety
/// `cfg` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ss_check_reduced(
    cfg: *const SsConfig,
    out: *mut SsCertificate,
) -> SsStatus {
    run_check(cfg, out, CheckKind::Reduced)
}

/// Full transverse-dynamics synchronization check.
///
/// # Safety
/// `cfg` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ss_check_full(cfg: *const SsConfig, out: *mut SsCertificate) -> SsStatus {
    run_check(cfg, out, CheckKind::Full)
}

/// Per-eigenvalue torus synchronization check.
///
/// # Safety
/// `cfg` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ss_check_torus(cfg: *const SsConfig, out: *mut SsCertificate) -> SsStatus {
    run_check(cfg, out, CheckKind::Torus)
}

/// Critical coefficient of dispersion by bisection; `+inf` when no finite
/// bracket exists. Fails with `SsAnalysisError` when the deterministic
/// check already fails at zero dispersion.
///
/// # Safety
/// `cfg` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ss_critical_cod(cfg: *const SsConfig, out: *mut f64) -> SsStatus {
    let (Some(cfg), false) = (cfg.as_ref(), out.is_null()) else {
        return fail(SsStatus::SsBadArgument, "null pointer argument");
    };
    let result = (|| -> stochsync::Result<f64> {
        let (sys, _) = cfg.inner.resolved_system()?;
        let coupling = cfg.inner.resolved_coupling(&sys)?;
        let spectra = spectra_of(&cfg.inner)?;
        critical_cod(
            &sys,
            &coupling,
            &spectra,
            &cfg.inner.riccati_options(),
            cfg.inner.bisection_tol(),
        )
    })();
    match result {
        Ok(v) => {
            *out = v;
            SsStatus::SsOk
        }
        Err(e) => fail(classify(&e), e),
    }
}

/// Closed-form scalar torus margin for one lattice.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ss_scalar_torus_margin(
    a: f64,
    delta: f64,
    g: f64,
    mu: f64,
    sigma_sq: f64,
    n: u64,
    k: u64,
    d: u64,
    out: *mut SsTorusMargin,
) -> SsStatus {
    if out.is_null() {
        return fail(SsStatus::SsBadArgument, "null output pointer");
    }
    let result = (|| -> stochsync::Result<stochsync::margin::TorusMargin> {
        let params = ScalarTorusParams { a, delta, g, mu, sigma_sq };
        let spec = TorusSpec::new(n as usize, k as usize, d as usize)?;
        scalar_torus_margin(&params, &spec)
    })();
    match result {
        Ok(m) => {
            *out = SsTorusMargin {
                lambda_sup: m.lambda_sup,
                alpha_sq_2: m.alpha_sq_2,
                alpha_sq_n: m.alpha_sq_n,
                rho_sm: m.rho_sm.unwrap_or(f64::NAN),
                deterministic_feasible: m.deterministic_feasible as i32,
            };
            SsStatus::SsOk
        }
        Err(e) => fail(classify(&e), e),
    }
}

/// Run the configured `[sweep]` block and write the CSV table.
///
/// # Safety
/// `cfg` and `csv_path` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ss_torus_sweep_csv(
    cfg: *const SsConfig,
    csv_path: *const c_char,
) -> SsStatus {
    let (Some(cfg), Some(path)) = (cfg.as_ref(), str_arg(csv_path)) else {
        return fail(SsStatus::SsBadArgument, "null pointer argument");
    };
    let result = (|| -> stochsync::Result<()> {
        let (params, n, k_range, d_range) = cfg.inner.sweep_params()?;
        let cells = torus_sweep(&params, n, k_range, d_range)?;
        std::fs::write(path, sweep_to_csv(&cells))?;
        Ok(())
    })();
    match result {
        Ok(()) => SsStatus::SsOk,
        Err(e) => fail(classify(&e), e),
    }
}

/// Monte Carlo simulation of the configured network. `csv_path` may be
/// null; `seed_override < 0` keeps the config seed.
///
/// # Safety
/// `cfg` and `out` must be valid pointers; `csv_path` may be null.
#[no_mangle]
pub unsafe extern "C" fn ss_simulate(
    cfg: *const SsConfig,
    csv_path: *const c_char,
    seed_override: i64,
    out: *mut SsSimSummary,
) -> SsStatus {
    let (Some(cfg), false) = (cfg.as_ref(), out.is_null()) else {
        return fail(SsStatus::SsBadArgument, "null pointer argument");
    };
    let csv = if csv_path.is_null() {
        None
    } else {
        match str_arg(csv_path) {
            Some(p) => Some(p.to_owned()),
            None => return fail(SsStatus::SsBadArgument, "csv path is not valid UTF-8"),
        }
    };
    let seed = (seed_override >= 0).then_some(seed_override as u64);
    let result = (|| -> stochsync::Result<stochsync::sim::SyncTrace> {
        let sim_cfg = cfg.inner.sim_config(seed)?;
        let trace = simulate(&sim_cfg)?;
        if let Some(path) = &csv {
            std::fs::write(path, trace_to_csv(&trace))?;
        }
        Ok(trace)
    })();
    match result {
        Ok(trace) => {
            *out = SsSimSummary {
                verdict: match trace.verdict {
                    Verdict::Sync => 0,
                    Verdict::Desync => 1,
                    Verdict::Inconclusive => 2,
                },
                k_hat: trace.k_hat,
                beta_hat: trace.beta_hat,
                r_squared: trace.r_squared,
                diverged_trials: trace.diverged_trials as u64,
            };
            SsStatus::SsOk
        }
        Err(e) => fail(classify(&e), e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONFIG: &str = r#"
[system]
a = [[0.98]]
b = [[1.0]]
c = [[1.0]]
d = [[1.0]]
d1 = [[1.0]]

[graph]
nodes = 3
unc_edges = [[1, 2, 1.0, 0.05], [2, 3, 1.0, 0.05], [1, 3, 1.0, 0.05]]

[coupling]
g = 0.01

[sim]
horizon = 200
trials = 10
seed = 3
init_spread = 0.5
init_base = 0.0

[sweep]
a = 1.05
delta = 8.0
g = 0.01
mu = 1.0
sigma_sq = 0.01
n = 50
k_min = 1
k_max = 3
d_min = 1
d_max = 2
"#;

    fn handle() -> *mut SsConfig {
        let text = CString::new(CONFIG).unwrap();
        let cfg = unsafe { ss_config_parse(text.as_ptr()) };
        assert!(!cfg.is_null());
        cfg
    }

    #[test]
    fn config_roundtrip_and_checks() {
        let cfg = handle();
        let mut spectra = SsSpectra {
            lambda2: 0.0,
            lambda_n: 0.0,
            lambda2_d: 0.0,
            lambda_n_u: 0.0,
            tau: 0.0,
            gamma_bar: 0.0,
        };
        assert_eq!(unsafe { ss_spectra(cfg, &mut spectra) }, SsStatus::SsOk);
        assert!((spectra.lambda2 - 3.0).abs() < 1e-9);
        assert!((spectra.tau - 1.0).abs() < 1e-12);

        let mut cert = SsCertificate {
            feasible: 0,
            residual: 0.0,
            iterations: 0,
            binding_eigenvalue: 0.0,
        };
        assert_eq!(unsafe { ss_check_reduced(cfg, &mut cert) }, SsStatus::SsOk);
        assert_eq!(cert.feasible, 1);
        assert_eq!(unsafe { ss_check_full(cfg, &mut cert) }, SsStatus::SsOk);
        assert_eq!(cert.feasible, 1);

        let mut gamma = 0.0;
        assert_eq!(unsafe { ss_critical_cod(cfg, &mut gamma) }, SsStatus::SsOk);
        assert!(gamma > 0.0);
        unsafe { ss_config_free(cfg) };
    }

    #[test]
    fn torus_check_requires_torus_source() {
        let cfg = handle();
        let mut cert = SsCertificate {
            feasible: 0,
            residual: 0.0,
            iterations: 0,
            binding_eigenvalue: 0.0,
        };
        assert_eq!(unsafe { ss_check_torus(cfg, &mut cert) }, SsStatus::SsInvalidInput);
        let msg = unsafe { CStr::from_ptr(ss_last_error()) };
        assert!(msg.to_string_lossy().contains("torus"));
        unsafe { ss_config_free(cfg) };
    }

    #[test]
    fn scalar_margin_matches_library() {
        let mut out = SsTorusMargin {
            lambda_sup: 0.0,
            alpha_sq_2: 0.0,
            alpha_sq_n: 0.0,
            rho_sm: 0.0,
            deterministic_feasible: 0,
        };
        let status =
            unsafe { ss_scalar_torus_margin(1.05, 8.0, 0.01, 1.0, 0.01, 50, 25, 1, &mut out) };
        assert_eq!(status, SsStatus::SsOk);
        assert_eq!(out.deterministic_feasible, 1);
        assert!((out.rho_sm - (1.0 - 0.0025 / 0.585)).abs() < 1e-12);
    }

    #[test]
    fn simulate_and_sweep_produce_files() {
        let cfg = handle();
        let dir = std::env::temp_dir().join(format!("sscapi-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let trace = CString::new(dir.join("trace.csv").to_str().unwrap()).unwrap();
        let mut summary = SsSimSummary {
            verdict: -1,
            k_hat: 0.0,
            beta_hat: 0.0,
            r_squared: 0.0,
            diverged_trials: 0,
        };
        let status = unsafe { ss_simulate(cfg, trace.as_ptr(), 9, &mut summary) };
        assert_eq!(status, SsStatus::SsOk);
        assert!(std::fs::read_to_string(dir.join("trace.csv"))
            .unwrap()
            .starts_with("t,err\n"));

        let sweep = CString::new(dir.join("sweep.csv").to_str().unwrap()).unwrap();
        assert_eq!(unsafe { ss_torus_sweep_csv(cfg, sweep.as_ptr()) }, SsStatus::SsOk);
        let table = std::fs::read_to_string(dir.join("sweep.csv")).unwrap();
        assert_eq!(table.lines().count(), 1 + 3 * 2);
        unsafe { ss_config_free(cfg) };
    }

    #[test]
    fn null_arguments_are_rejected() {
        let mut out = 0.0;
        assert_eq!(
            unsafe { ss_critical_cod(std::ptr::null(), &mut out) },
            SsStatus::SsBadArgument
        );
        assert!(unsafe { ss_config_from_file(std::ptr::null()) }.is_null());
    }
}
