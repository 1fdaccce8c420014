//! Experiment configuration: one JSON file per run, archived next to the
//! outputs it produced.

use std::fmt;
use std::path::{Path, PathBuf};

use facets::lattice::{ModelParams, TailMode};
use facets::norm::{make_norm, NormSpec};
use facets::sampler::ChainConfig;
use facets::wulff::{build_wulff, WulffGeometry};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Bad input: unreadable or malformed config, or parameters out of range.
/// Maps to exit code 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub norm: NormSpec,
    /// Facet count of the discretized Wulff shape.
    #[serde(default = "default_facets")]
    pub facets: usize,
    /// Lattice model; the bulk excess comes from `excess`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    /// Bulk excess values `A` to simulate or tabulate.
    #[serde(default)]
    pub excess: Vec<f64>,
    #[serde(default)]
    pub phase: PhaseOptions,
    #[serde(default)]
    pub chain: ChainOptions,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub n: usize,
    pub beta: f64,
    pub p_v: f64,
    pub p_s: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

impl ModelSpec {
    pub fn params(&self, excess: f64) -> ModelParams {
        ModelParams { n: self.n, beta: self.beta, p_v: self.p_v, p_s: self.p_s, excess, eps: self.eps }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Slope `v` of the rescaled problem.
    V,
    /// Bulk excess `A`; needs a model.
    Excess,
}

/// `points` evenly spaced values from `start` to `stop` inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.start],
            k => (0..k).map(|i| self.start + (self.stop - self.start) * i as f64 / (k - 1) as f64).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseOptions {
    /// Stiffness of the rescaled problem; only without a model, which
    /// fixes it to `D tau_e`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
    #[serde(default = "default_l_max")]
    pub l_max: usize,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        PhaseOptions { sigma: None, sweep: None, l_max: default_l_max() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainOptions {
    #[serde(default)]
    pub sweeps: usize,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default = "one")]
    pub thinning: usize,
    #[serde(default)]
    pub tail_mode: TailMode,
    /// Expected monolayer attempts per sweep.
    #[serde(default = "default_mix")]
    pub proposal_mix: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<usize>,
    /// Chains per excess value.
    #[serde(default = "one")]
    pub replicas: usize,
}

impl Default for ChainOptions {
    fn default() -> Self {
        ChainOptions {
            sweeps: 0,
            burn_in: 0,
            thinning: 1,
            tail_mode: TailMode::default(),
            proposal_mix: default_mix(),
            snapshot_every: None,
            replicas: 1,
        }
    }
}

fn default_facets() -> usize {
    1024
}
fn default_eps() -> f64 {
    0.25
}
fn default_l_max() -> usize {
    12
}
fn default_mix() -> f64 {
    0.2
}
fn one() -> usize {
    1
}

/// Continuum constants of a config: Wulff geometry and, with a model,
/// `Delta`, `D` and `tau_e`.
pub struct Continuum {
    pub wulff: WulffGeometry,
    pub sigma: f64,
    pub model: Option<Scales>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Scales {
    pub delta_p: f64,
    pub diffusivity: f64,
    pub tau_e: f64,
}

impl Scales {
    /// Slope of the rescaled problem at bulk excess `a`.
    pub fn slope(&self, a: f64) -> f64 {
        facets::phase::rescale(a / self.delta_p, self.diffusivity, self.tau_e).1
    }

    pub fn excess(&self, v: f64) -> f64 {
        self.delta_p * self.tau_e * self.diffusivity * v
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
    }

    /// Pretty JSON as archived; the config hash is taken over these bytes.
    pub fn to_archive(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn hash(&self) -> String {
        format!("{:x}", Sha256::digest(self.to_archive().as_bytes()))
    }

    pub fn chain_config(&self, excess: f64) -> ChainConfig {
        let model = self.model.as_ref().expect("validated model");
        let c = &self.chain;
        ChainConfig {
            burn_in: c.burn_in,
            thinning: c.thinning,
            tail_mode: c.tail_mode,
            proposal_mix: c.proposal_mix,
            snapshot_every: c.snapshot_every,
            ..ChainConfig::new(model.params(excess), c.sweeps, self.seed)
        }
    }

    /// Checks shared by every command; builds the norm and its Wulff shape.
    pub fn continuum(&self) -> anyhow::Result<Continuum> {
        let norm = make_norm(&self.norm).map_err(|e| config_error(format!("norm: {e}")))?;
        let wulff = build_wulff(&norm, self.facets).map_err(|e| config_error(format!("facets: {e}")))?;
        if self.phase.l_max == 0 {
            return Err(config_error("phase.l_max must be positive"));
        }
        let model = match &self.model {
            Some(m) => {
                let p = m.params(0.0);
                p.validate().map_err(|e| config_error(format!("model: {e}")))?;
                Some(Scales { delta_p: p.delta_p(), diffusivity: p.diffusivity(), tau_e: norm.axis_tension() })
            }
            None => None,
        };
        let sigma = match (model, self.phase.sigma) {
            (Some(_), Some(_)) => return Err(config_error("phase.sigma conflicts with model, which fixes sigma = D tau_e")),
            (Some(s), None) => s.diffusivity * s.tau_e,
            (None, Some(s)) if s > 0.0 && s.is_finite() => s,
            (None, Some(s)) => return Err(config_error(format!("phase.sigma = {s}"))),
            (None, None) => 1.0,
        };
        if let Some(sw) = &self.phase.sweep {
            if !(sw.start.is_finite() && sw.stop.is_finite()) {
                return Err(config_error("phase.sweep bounds must be finite"));
            }
            let (lo, _) = if sw.start <= sw.stop { (sw.start, sw.stop) } else { (sw.stop, sw.start) };
            if sw.points > 0 && lo < 0.0 {
                return Err(config_error("phase.sweep values must be nonnegative"));
            }
            if sw.variable == SweepVariable::Excess && model.is_none() {
                return Err(config_error("an excess sweep needs a model"));
            }
        }
        if self.excess.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(config_error("excess values must be finite and nonnegative"));
        }
        Ok(Continuum { wulff, sigma, model })
    }

    /// Extra checks for `simulate`.
    pub fn validate_simulation(&self) -> anyhow::Result<()> {
        if self.model.is_none() {
            return Err(config_error("simulate needs a model"));
        }
        if self.excess.is_empty() {
            return Err(config_error("simulate needs at least one excess value"));
        }
        if self.chain.replicas == 0 {
            return Err(config_error("chain.replicas must be positive"));
        }
        for &a in &self.excess {
            self.chain_config(a).validate().map_err(|e| config_error(format!("chain at A = {a}: {e}")))?;
        }
        Ok(())
    }
}
