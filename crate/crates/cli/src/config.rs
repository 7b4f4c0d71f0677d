//! Network configuration documents.
//!
//! ```json
//! {
//!   "subsystems": [{
//!     "id": "s1",
//!     "A": [[-1.0]], "B": [[1.0]], "C": [[1.0]], "D": [[0.0]], "E": [[1.0]],
//!     "reference_model": { "K_bl": [[2.0, -2.0]] },
//!     "tuning": { "Q": [[1.0, 0.0], [0.0, 1.0]], "Gamma": 10.0, "theta_max": 2.0 }
//!   }],
//!   "edges": [{ "from": "s2", "to": "s1", "A": [[0.2]] }],
//!   "options": { "tol": 1e-10, "xi_mode": "per-edge" },
//!   "scenario": { "horizon": 60.0, "dt": 0.001, "nodes": [] }
//! }
//! ```
//!
//! `C`, `D` and `E` may be omitted (no tracked outputs / no disturbance).
//! `reference_model` takes `Am` directly, `K_bl` (then `Âₘ = Ā − B̄K_bl`),
//! or both.

use std::path::Path;

use gascert_core::control::reference_model;
use gascert_core::model::{augment, DEFAULT_EPS0};
use gascert_core::{CertifyOptions, Interconnection, Matrix, NetworkModel, NodeSpec, Scenario, Subsystem, Tuning, XiMode};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub subsystems: Vec<SubsystemConfig>,
    #[serde(default)]
    pub edges: Vec<EdgeConfig>,
    #[serde(default)]
    pub options: OptionsConfig,
    #[serde(default)]
    pub scenario: Option<Scenario>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsystemConfig {
    pub id: String,
    #[serde(rename = "A", with = "gascert_core::serde_rows")]
    pub a: Matrix,
    #[serde(rename = "B", with = "gascert_core::serde_rows")]
    pub b: Matrix,
    #[serde(rename = "C", default, with = "gascert_core::serde_rows::option")]
    pub c: Option<Matrix>,
    #[serde(rename = "D", default, with = "gascert_core::serde_rows::option")]
    pub d: Option<Matrix>,
    #[serde(rename = "E", default, with = "gascert_core::serde_rows::option")]
    pub e: Option<Matrix>,
    pub reference_model: ReferenceModelConfig,
    pub tuning: TuningConfig,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceModelConfig {
    #[serde(rename = "Am", default, with = "gascert_core::serde_rows::option")]
    pub am: Option<Matrix>,
    #[serde(rename = "K_bl", default, with = "gascert_core::serde_rows::option")]
    pub k_bl: Option<Matrix>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningConfig {
    /// Defaults to the identity.
    #[serde(rename = "Q", default, with = "gascert_core::serde_rows::option")]
    pub q: Option<Matrix>,
    #[serde(rename = "Gamma")]
    pub gamma: f64,
    pub theta_max: f64,
    #[serde(default)]
    pub eps0: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeConfig {
    pub from: String,
    pub to: String,
    #[serde(rename = "A", with = "gascert_core::serde_rows")]
    pub a: Matrix,
    /// The block is not trusted; only `norm_bound` enters the analyses.
    #[serde(default)]
    pub bound_only: bool,
    #[serde(default)]
    pub norm_bound: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsConfig {
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub xi_mode: Option<XiMode>,
}

/// A parsed and validated configuration.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub config: NetworkConfig,
    pub subsystems: Vec<Subsystem>,
    pub network: NetworkModel,
    /// Hex SHA-256 of the raw document.
    pub digest: String,
}

impl Loaded {
    /// Config options overridden by command-line flags.
    pub fn certify_options(&self, tol: Option<f64>, strict: bool) -> Result<CertifyOptions, CliError> {
        let mut opts = CertifyOptions::default();
        if let Some(t) = tol.or(self.config.options.tol) {
            if !(t > 0.0) || !t.is_finite() {
                return Err(CliError::Config(format!("tol: must be finite and > 0, got {t}")));
            }
            opts.tol = t;
        }
        if let Some(mode) = self.config.options.xi_mode {
            opts.xi_mode = mode;
        }
        if strict {
            opts.xi_mode = XiMode::Symmetric;
        }
        Ok(opts)
    }

    pub fn scenario(&self) -> Result<&Scenario, CliError> {
        self.config
            .scenario
            .as_ref()
            .ok_or_else(|| CliError::Config("scenario: missing (required by simulate)".into()))
    }
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let bytes = std::fs::read(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse(&bytes)
}

pub fn parse(bytes: &[u8]) -> Result<Loaded, CliError> {
    let digest = hex::encode(Sha256::digest(bytes));
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let config: NetworkConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("{path}: {}", e.inner()))
    })?;
    let (subsystems, network) = build(&config)?;
    Ok(Loaded {
        config,
        subsystems,
        network,
        digest,
    })
}

fn field_err(what: String) -> impl FnOnce(gascert_core::Error) -> CliError {
    move |e| CliError::Config(format!("{what}: {e}"))
}

fn build(config: &NetworkConfig) -> Result<(Vec<Subsystem>, NetworkModel), CliError> {
    if config.subsystems.is_empty() {
        return Err(CliError::Config("subsystems: at least one subsystem is required".into()));
    }
    let mut subsystems = Vec::with_capacity(config.subsystems.len());
    let mut nodes = Vec::with_capacity(config.subsystems.len());
    for (k, sc) in config.subsystems.iter().enumerate() {
        let at = format!("subsystems[{k}]");
        let n = sc.a.nrows();
        let m = sc.b.ncols();
        let c = sc.c.clone().unwrap_or_else(|| Matrix::zeros(0, n));
        let d = sc.d.clone().unwrap_or_else(|| Matrix::zeros(c.nrows(), m));
        let e = sc.e.clone().unwrap_or_else(|| Matrix::zeros(n, 0));
        let s = Subsystem::new(sc.id.clone(), sc.a.clone(), sc.b.clone(), c, d, e).map_err(field_err(at.clone()))?;
        let aug = augment(&s).map_err(field_err(at.clone()))?;
        let am = match (&sc.reference_model.am, &sc.reference_model.k_bl) {
            (Some(am), _) => am.clone(),
            (None, Some(k)) => reference_model(&aug, k).map_err(field_err(format!("{at}.reference_model.K_bl")))?,
            (None, None) => {
                return Err(CliError::Config(format!("{at}.reference_model: needs `Am` or `K_bl`")));
            }
        };
        let dim = aug.dim();
        let t = &sc.tuning;
        let tuning = Tuning::new(
            t.q.clone().unwrap_or_else(|| Matrix::identity(dim, dim)),
            t.gamma,
            t.theta_max,
            t.eps0.unwrap_or(DEFAULT_EPS0),
        );
        let node = NodeSpec::new(&s, am, sc.reference_model.k_bl.clone(), tuning).map_err(field_err(at.clone()))?;
        // node-level checks (Hurwitz Âₘ, K_bl shape, SPD Q) in isolation, so
        // the error can name this entry
        NetworkModel::new(vec![node.clone()], vec![]).map_err(field_err(at))?;
        subsystems.push(s);
        nodes.push(node);
    }
    let mut edges = Vec::with_capacity(config.edges.len());
    for (k, ec) in config.edges.iter().enumerate() {
        let edge = match (ec.bound_only, ec.norm_bound) {
            (true, Some(b)) => Interconnection::bound_only(ec.from.clone(), ec.to.clone(), ec.a.clone(), b),
            (true, None) => {
                return Err(CliError::Config(format!("edges[{k}].norm_bound: required when bound_only is set")));
            }
            (false, Some(_)) => {
                return Err(CliError::Config(format!("edges[{k}].norm_bound: only allowed with bound_only")));
            }
            (false, None) => Interconnection::new(ec.from.clone(), ec.to.clone(), ec.a.clone()),
        };
        edges.push(edge);
    }
    let network = NetworkModel::new(nodes, edges).map_err(|e| CliError::Config(locate_network_error(config, e)))?;
    Ok((subsystems, network))
}

/// Prefixes a network-level error with the config field it refers to.
fn locate_network_error(config: &NetworkConfig, e: gascert_core::Error) -> String {
    use gascert_core::Error;
    let at = match &e {
        Error::Edge { from, to, .. } => config
            .edges
            .iter()
            .position(|x| &x.from == from && &x.to == to)
            .map(|k| format!("edges[{k}]")),
        Error::UnknownSubsystem(id) => config.edges.iter().enumerate().find_map(|(k, x)| {
            if &x.from == id {
                Some(format!("edges[{k}].from"))
            } else if &x.to == id {
                Some(format!("edges[{k}].to"))
            } else {
                None
            }
        }),
        Error::InvalidParameter(_) => {
            // duplicate id: point at the second occurrence
            let mut seen = std::collections::HashSet::new();
            config
                .subsystems
                .iter()
                .position(|s| !seen.insert(&s.id))
                .map(|k| format!("subsystems[{k}].id"))
        }
        _ => None,
    };
    match at {
        Some(at) => format!("{at}: {e}"),
        None => e.to_string(),
    }
}
