//! Experiment configuration, read from TOML.
//!
//! ```toml
//! [experiment]
//! preset = "star4"        # or "classic"; ignored when [[node]] blocks are given
//! horizon = 80
//! alpha = 0.01
//! reps = 100
//! seed = 7
//! kappa_bar = 1.0
//! eps = 0.0
//! max_lambda = 20         # optional: resample until every λ_j ≤ max_lambda
//! edge_convention = "literal"   # or "aligned"
//!
//! [[node]]
//! rho = 0.1
//! pre = { mean = 1.0, variance = 1.0 }
//! post = { mean = 0.0, variance = 1.0 }
//!
//! [[edge]]
//! a = 1                   # 1-based node numbers
//! b = 2
//! pre = { mean = 1.0, variance = 1.0 }
//! post = { mean = 0.0, variance = 1.0 }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classic::GaussianSpec;
use crate::error::{Error, Result};
use crate::graph::{EdgeConvention, EdgeSpec, Network, NodeSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentParams {
    pub preset: Option<String>,
    pub horizon: usize,
    pub alpha: f64,
    pub reps: usize,
    pub seed: u64,
    pub kappa_bar: f64,
    pub eps: f64,
    pub max_lambda: Option<u64>,
    pub edge_convention: EdgeConvention,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            preset: None,
            horizon: 100,
            alpha: 0.01,
            reps: 100,
            seed: 0,
            kappa_bar: 1.0,
            eps: 0.0,
            max_lambda: None,
            edge_convention: EdgeConvention::Literal,
            out: None,
        }
    }
}

/// An edge as written in a config file, with 1-based endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeEntry {
    pub a: usize,
    pub b: usize,
    pub pre: GaussianSpec,
    pub post: GaussianSpec,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentParams,
    #[serde(rename = "node", skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<NodeSpec>,
    #[serde(rename = "edge", skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<EdgeEntry>,
}

impl ExperimentConfig {
    /// Defaults with the given preset.
    #[must_use]
    pub fn with_preset(name: &str) -> Self {
        Self {
            experiment: ExperimentParams {
                preset: Some(name.to_string()),
                ..ExperimentParams::default()
            },
            ..Self::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.experiment;
        if p.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if p.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if !(p.alpha > 0.0 && p.alpha < 1.0) {
            return Err(Error::Config(format!("alpha = {} outside (0, 1)", p.alpha)));
        }
        if !(p.kappa_bar >= 0.0 && p.kappa_bar.is_finite()) || !p.eps.is_finite() {
            return Err(Error::Config(
                "kappa_bar must be nonnegative and eps finite".into(),
            ));
        }
        if p.max_lambda == Some(0) {
            return Err(Error::Config("max_lambda must be at least 1".into()));
        }
        if self.nodes.is_empty() && !self.edges.is_empty() {
            return Err(Error::Config("[[edge]] blocks need [[node]] blocks".into()));
        }
        self.network().map(|_| ())
    }

    /// The network: explicit `[[node]]`/`[[edge]]` blocks if present,
    /// otherwise the preset (default `star4`).
    pub fn network(&self) -> Result<Network> {
        let net = if self.nodes.is_empty() {
            Network::preset(self.experiment.preset.as_deref().unwrap_or("star4"))?
        } else {
            let edges = self
                .edges
                .iter()
                .map(|e| {
                    if e.a == 0 || e.b == 0 {
                        return Err(Error::Config("edge endpoints are numbered from 1".into()));
                    }
                    Ok(EdgeSpec {
                        a: e.a - 1,
                        b: e.b - 1,
                        pre: e.pre,
                        post: e.post,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Network::new(self.nodes.clone(), edges)?
        };
        Ok(net.with_edge_convention(self.experiment.edge_convention))
    }

    /// Seed of replication `r`.
    #[must_use]
    pub fn rep_seed(&self, r: usize) -> u64 {
        self.experiment.seed.wrapping_add(r as u64)
    }
}
