//! TOML analysis configuration: one file describes the component system,
//! the network, the coupling, and the requested checks, margins, sweeps,
//! and simulations.
//!
//! Exactly one system source (`[system]` matrices or `[system.chua]`) and
//! exactly one graph source (`[graph]` edge lists or `[graph.torus]`) must
//! be present; node indices in edge lists are 1-based.

use serde::{Deserialize, Serialize};

use crate::graph::{DetEdge, TorusSpec, UncEdge, UncertainGraph};
use crate::linalg::Matrix;
use crate::margin::{ScalarTorusParams, DEFAULT_BISECTION_TOL};
use crate::prl::{LureSystem, RiccatiOptions};
use crate::sim::{
    build_shifted_chua_system, ChuaParams, FitOptions, NetworkSimConfig, NoiseModel, Nonlinearity,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub system: SystemBlock,
    pub graph: GraphBlock,
    pub coupling: CouplingBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<MarginBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d1: Option<Vec<Vec<f64>>>,
    /// Nonlinearity tag for explicit-matrix systems: "zero", "cubic", or
    /// "linear" (with `linear_slope`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonlinearity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear_slope: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chua: Option<ChuaBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChuaBlock {
    pub t: f64,
    #[serde(default = "default_chua_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_chua_m0")]
    pub m0: f64,
    #[serde(default = "default_chua_m1")]
    pub m1: f64,
    /// Pointwise sector scalar `D`.
    pub d: f64,
    /// Incremental sector scalar `D₁`.
    pub d1: f64,
    /// Loop-transformation shift: `shift·y` moves from the nonlinearity
    /// into the state matrix, tightening the sector around the remaining
    /// slopes. Zero (the default) keeps the plain Chua decomposition.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sector_shift: Option<f64>,
}

fn default_chua_epsilon() -> f64 {
    0.3
}
fn default_chua_m0() -> f64 {
    -0.1
}
fn default_chua_m1() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    /// `[i, j, mu]` rows, 1-based nodes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub det_edges: Option<Vec<(usize, usize, f64)>>,
    /// `[i, j, mu, sigma_sq]` rows, 1-based nodes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unc_edges: Option<Vec<(usize, usize, f64, f64)>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub torus: Option<TorusBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusBlock {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub mu: f64,
    pub sigma_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingBlock {
    /// Scalar shorthand: `G = g·Cᵀ` (output injection).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisBlock {
    /// Any of "full", "reduced", "torus"; defaults to the natural check
    /// for the graph source.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<String>>,
    /// Override of the coefficient of dispersion used by the reduced check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_bar: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pd_margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bisection_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarginBlock {
    /// Any of "critical_cod", "small_gain".
    pub compute: Vec<String>,
    /// Variance tested by the small-gain certificate; defaults to the
    /// common link variance of the graph.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_sq: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub a: f64,
    pub delta: f64,
    pub g: f64,
    pub mu: f64,
    pub sigma_sq: f64,
    pub n: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub d_min: usize,
    pub d_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimBlock {
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    /// "gaussian" (default) or "shifted-bernoulli".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub additive_noise: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_spread: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_base: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transient_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_squared_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth_factor: Option<f64>,
}

/// Resolved graph source.
#[derive(Debug, Clone)]
pub enum GraphSource {
    Graph(UncertainGraph),
    Torus { spec: TorusSpec, mu: f64, sigma_sq: f64 },
}

impl AnalysisConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: AnalysisConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn validate(&self) -> Result<()> {
        let explicit = self.system.a.is_some()
            || self.system.b.is_some()
            || self.system.c.is_some()
            || self.system.d.is_some()
            || self.system.d1.is_some();
        match (explicit, self.system.chua.is_some()) {
            (true, true) => {
                return Err(Error::Config(
                    "system: give either explicit matrices or a chua preset, not both".into(),
                ))
            }
            (false, false) => {
                return Err(Error::Config("system: missing matrices or chua preset".into()))
            }
            _ => {}
        }
        let edges = self.graph.nodes.is_some()
            || self.graph.det_edges.is_some()
            || self.graph.unc_edges.is_some();
        match (edges, self.graph.torus.is_some()) {
            (true, true) => {
                return Err(Error::Config(
                    "graph: give either edge lists or a torus block, not both".into(),
                ))
            }
            (false, false) => {
                return Err(Error::Config("graph: missing edge lists or torus block".into()))
            }
            _ => {}
        }
        if edges && self.graph.nodes.is_none() {
            return Err(Error::Config("graph: edge lists need a node count".into()));
        }
        match (self.coupling.g.is_some(), self.coupling.matrix.is_some()) {
            (true, true) => {
                return Err(Error::Config("coupling: give either g or matrix, not both".into()))
            }
            (false, false) => return Err(Error::Config("coupling: missing g or matrix".into())),
            _ => {}
        }
        Ok(())
    }

    /// Build the component system and its simulation nonlinearity.
    pub fn resolved_system(&self) -> Result<(LureSystem, Nonlinearity)> {
        if let Some(chua) = &self.system.chua {
            let params = ChuaParams { epsilon: chua.epsilon, m0: chua.m0, m1: chua.m1 };
            let shift = chua.sector_shift.unwrap_or(0.0);
            let sys = build_shifted_chua_system(chua.t, shift, chua.d, chua.d1)?;
            let nl = if shift == 0.0 {
                Nonlinearity::Chua(params)
            } else {
                Nonlinearity::ShiftedChua { params, shift }
            };
            return Ok((sys, nl));
        }
        let matrix = |name: &str, field: &Option<Vec<Vec<f64>>>| -> Result<Matrix> {
            let rows = field
                .as_ref()
                .ok_or_else(|| Error::Config(format!("system: missing matrix {name}")))?;
            if rows.is_empty() || rows.iter().any(|r| r.len() != rows[0].len()) {
                return Err(Error::Config(format!("system: matrix {name} is ragged or empty")));
            }
            let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
            Ok(Matrix::from_rows(&refs))
        };
        let sys = LureSystem::new(
            matrix("a", &self.system.a)?,
            matrix("b", &self.system.b)?,
            matrix("c", &self.system.c)?,
            matrix("d", &self.system.d)?,
            matrix("d1", &self.system.d1)?,
        )?;
        let nl = match self.system.nonlinearity.as_deref() {
            None | Some("zero") => Nonlinearity::Zero,
            Some("cubic") => Nonlinearity::Cubic,
            Some("linear") => Nonlinearity::Linear {
                slope: self
                    .system
                    .linear_slope
                    .ok_or_else(|| Error::Config("system: linear nonlinearity needs linear_slope".into()))?,
            },
            Some(other) => {
                return Err(Error::Config(format!("system: unknown nonlinearity '{other}'")))
            }
        };
        Ok((sys, nl))
    }

    pub fn resolved_graph(&self) -> Result<GraphSource> {
        if let Some(t) = &self.graph.torus {
            let spec = TorusSpec::new(t.n, t.k, t.d)?;
            if t.mu <= 0.0 {
                return Err(Error::Config("graph.torus: mu must be positive".into()));
            }
            if t.sigma_sq < 0.0 {
                return Err(Error::Config("graph.torus: sigma_sq must be nonnegative".into()));
            }
            return Ok(GraphSource::Torus { spec, mu: t.mu, sigma_sq: t.sigma_sq });
        }
        let nodes = self.graph.nodes.expect("validated");
        let to_idx = |v: usize| -> Result<usize> {
            if v == 0 || v > nodes {
                return Err(Error::Config(format!("graph: node {v} outside 1..={nodes}")));
            }
            Ok(v - 1)
        };
        let mut det = Vec::new();
        for &(i, j, w) in self.graph.det_edges.as_deref().unwrap_or_default() {
            det.push(DetEdge { i: to_idx(i)?, j: to_idx(j)?, weight: w });
        }
        let mut unc = Vec::new();
        for &(i, j, mu, var) in self.graph.unc_edges.as_deref().unwrap_or_default() {
            unc.push(UncEdge { i: to_idx(i)?, j: to_idx(j)?, mean: mu, variance: var });
        }
        Ok(GraphSource::Graph(UncertainGraph::new(nodes, det, unc)?))
    }

    /// `G` matrix; the scalar shorthand expands to `g·Cᵀ`.
    pub fn resolved_coupling(&self, sys: &LureSystem) -> Result<Matrix> {
        if let Some(g) = self.coupling.g {
            return Ok(sys.c().transpose().scale(g));
        }
        let rows = self.coupling.matrix.as_ref().expect("validated");
        if rows.is_empty() || rows.iter().any(|r| r.len() != rows[0].len()) {
            return Err(Error::Config("coupling: matrix is ragged or empty".into()));
        }
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let m = Matrix::from_rows(&refs);
        if m.rows() != sys.state_dim() || m.cols() != sys.output_dim() {
            return Err(Error::Config(format!(
                "coupling: matrix is {}x{}, expected {}x{}",
                m.rows(),
                m.cols(),
                sys.state_dim(),
                sys.output_dim()
            )));
        }
        Ok(m)
    }

    pub fn riccati_options(&self) -> RiccatiOptions {
        let mut opts = RiccatiOptions::default();
        if let Some(a) = &self.analysis {
            if let Some(v) = a.residual_tol {
                opts.residual_tol = v;
            }
            if let Some(v) = a.pd_margin {
                opts.pd_margin = v;
            }
            if let Some(v) = a.max_iterations {
                opts.max_iterations = v;
            }
            if let Some(v) = a.damping {
                opts.damping = v;
            }
            if let Some(v) = a.r_scale {
                opts.r_scale = v;
            }
        }
        opts
    }

    pub fn bisection_tol(&self) -> f64 {
        self.analysis
            .as_ref()
            .and_then(|a| a.bisection_tol)
            .unwrap_or(DEFAULT_BISECTION_TOL)
    }

    pub fn sweep_params(&self) -> Result<(ScalarTorusParams, usize, (usize, usize), (usize, usize))> {
        let s = self
            .sweep
            .as_ref()
            .ok_or_else(|| Error::Config("missing [sweep] block".into()))?;
        let p = ScalarTorusParams { a: s.a, delta: s.delta, g: s.g, mu: s.mu, sigma_sq: s.sigma_sq };
        p.validate()?;
        Ok((p, s.n, (s.k_min, s.k_max), (s.d_min, s.d_max)))
    }

    /// Assemble the Monte Carlo configuration; torus sources expand into
    /// explicit uncertain graphs.
    pub fn sim_config(&self, seed_override: Option<u64>) -> Result<NetworkSimConfig> {
        let block = self
            .sim
            .as_ref()
            .ok_or_else(|| Error::Config("missing [sim] block".into()))?;
        let (sys, nl) = self.resolved_system()?;
        let coupling = self.resolved_coupling(&sys)?;
        let graph = match self.resolved_graph()? {
            GraphSource::Graph(g) => g,
            GraphSource::Torus { spec, mu, sigma_sq } => spec.to_uncertain_graph(mu, sigma_sq)?,
        };
        let noise_model = match block.noise.as_deref() {
            None | Some("gaussian") => NoiseModel::Gaussian,
            Some("shifted-bernoulli") => NoiseModel::ShiftedBernoulli,
            Some(other) => return Err(Error::Config(format!("sim: unknown noise model '{other}'"))),
        };
        let defaults = FitOptions::default();
        let cfg = NetworkSimConfig {
            graph,
            system: sys,
            nonlinearity: nl,
            coupling,
            noise_model,
            additive_noise: block.additive_noise.unwrap_or(0.0),
            horizon: block.horizon,
            trials: block.trials,
            seed: seed_override.unwrap_or(block.seed),
            init_spread: block.init_spread.unwrap_or(1.0),
            init_base: block.init_base.unwrap_or(1.0),
            fit: FitOptions {
                transient_fraction: block.transient_fraction.unwrap_or(defaults.transient_fraction),
                beta_margin: block.beta_margin.unwrap_or(defaults.beta_margin),
                r_squared_min: block.r_squared_min.unwrap_or(defaults.r_squared_min),
                growth_factor: block.growth_factor.unwrap_or(defaults.growth_factor),
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[system.chua]
t = 0.01
d = 1.0
d1 = 1.0

[graph]
nodes = 4
det_edges = [[1, 2, 1.0], [2, 3, 1.0]]
unc_edges = [[3, 4, 1.0, 0.01], [1, 4, 1.0, 0.01]]

[coupling]
g = 0.05

[analysis]
checks = ["reduced"]

[sim]
horizon = 100
trials = 4
seed = 9
"#;

    #[test]
    fn parses_and_resolves() {
        let cfg = AnalysisConfig::parse(SAMPLE).unwrap();
        let (sys, nl) = cfg.resolved_system().unwrap();
        assert_eq!(sys.state_dim(), 3);
        assert!(matches!(nl, Nonlinearity::Chua(_)));
        match cfg.resolved_graph().unwrap() {
            GraphSource::Graph(g) => {
                assert_eq!(g.n_nodes(), 4);
                assert_eq!(g.det_edges().len(), 2);
                assert_eq!(g.unc_edges().len(), 2);
            }
            _ => panic!("expected explicit graph"),
        }
        let g = cfg.resolved_coupling(&sys).unwrap();
        assert_eq!((g.rows(), g.cols()), (3, 1));
        assert!((g.get(0, 0) - 0.05).abs() < 1e-15);
        let sim = cfg.sim_config(None).unwrap();
        assert_eq!(sim.horizon, 100);
        assert_eq!(sim.seed, 9);
    }

    #[test]
    fn roundtrip_is_identity() {
        let cfg = AnalysisConfig::parse(SAMPLE).unwrap();
        let again = AnalysisConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn rejects_double_sources() {
        let bad = SAMPLE.replace(
            "[graph]",
            "[graph.torus]\nn = 4\nk = 1\nd = 1\nmu = 1.0\nsigma_sq = 0.0\n\n[graph]",
        );
        assert!(AnalysisConfig::parse(&bad).is_err());
    }

    #[test]
    fn rejects_unknown_fields_with_location() {
        let bad = format!("{SAMPLE}\n[extra]\nx = 1\n");
        let err = AnalysisConfig::parse(&bad).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("extra"), "diagnostic was: {msg}");
    }

    #[test]
    fn torus_source() {
        let text = r#"
[system.chua]
t = 0.01
d = 1.0
d1 = 1.0

[graph.torus]
n = 50
k = 2
d = 1
mu = 1.0
sigma_sq = 0.01

[coupling]
g = 0.01
"#;
        let cfg = AnalysisConfig::parse(text).unwrap();
        match cfg.resolved_graph().unwrap() {
            GraphSource::Torus { spec, mu, sigma_sq } => {
                assert_eq!((spec.n, spec.k, spec.d), (50, 2, 1));
                assert_eq!(mu, 1.0);
                assert_eq!(sigma_sq, 0.01);
            }
            _ => panic!("expected torus"),
        }
    }
}
