//! Experiment configuration file (TOML). Unknown keys are rejected.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use lmsv_core::asymptotics::Statistic;
use lmsv_core::sv_model::SvModel;
use lmsv_core::verify::{Distance, MarkBox, NamedCoupling, ReferenceChoice, Tolerances};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub strict: bool,
    #[serde(default)]
    pub model: Option<SvModel>,
    #[serde(default)]
    pub simulate: Option<SimulateSection>,
    #[serde(default)]
    pub regime: Option<RegimeSection>,
    #[serde(default)]
    pub cov: Option<CovSection>,
    #[serde(default)]
    pub scan: Option<ScanSection>,
    #[serde(default)]
    pub verify: Option<VerifySection>,
    #[serde(default)]
    pub pointprocess: Option<PointSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathFormat {
    #[default]
    Csv,
    Binary,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub n: usize,
    #[serde(default)]
    pub format: PathFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSection {
    pub statistic: Statistic,
    /// Overrides the computed Hermite rank.
    #[serde(default)]
    pub tau: Option<u32>,
    /// Optional regime map over these grids, written as CSV.
    #[serde(default)]
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub hursts: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovSection {
    pub n: usize,
    pub p: f64,
    pub lags: usize,
    #[serde(default = "one")]
    pub replicates: usize,
}

fn one() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn default_reference_samples() -> usize {
    2000
}
fn default_n_internal() -> usize {
    1 << 14
}
fn default_margin() -> f64 {
    lmsv_core::verify::DEFAULT_BOUNDARY_MARGIN
}
fn default_bound() -> f64 {
    0.01
}
fn default_level() -> f64 {
    0.01
}
fn default_factor() -> u64 {
    100
}

/// One experiment plan; the model defaults to the top-level one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanSection {
    pub name: String,
    #[serde(default)]
    pub model: Option<SvModel>,
    pub statistic: Statistic,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    #[serde(default)]
    pub distance: Distance,
    #[serde(default = "yes")]
    pub affine_fit: bool,
    #[serde(default)]
    pub reference: ReferenceChoice,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_reference_samples")]
    pub reference_samples: usize,
    #[serde(default = "default_n_internal")]
    pub hermite_n_internal: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub plans: Vec<PlanSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    pub statistic: Statistic,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub hursts: Vec<f64>,
    pub couplings: Vec<NamedCoupling>,
    #[serde(default = "yes")]
    pub simulate: bool,
    #[serde(default = "default_margin")]
    pub boundary_margin: f64,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSection {
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub h: usize,
    pub u: f64,
    #[serde(default)]
    pub boxes: Vec<MarkBox>,
    /// Upper bound on the multi-exceedance fraction at the largest `n`.
    #[serde(default = "default_bound")]
    pub bound: f64,
    #[serde(default = "default_level")]
    pub level: f64,
    /// Monte Carlo sample size for `a_n`, `b_n` as a multiple of `n`.
    #[serde(default = "default_factor")]
    pub norm_factor: u64,
    #[serde(default)]
    pub tail_draws: Option<u64>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config schema error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config schema error: {0}")]
    Schema(String),
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Schema(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn model(&self) -> Result<&SvModel, ConfigError> {
        self.model.as_ref().ok_or_else(|| ConfigError::Schema("missing [model] table".into()))
    }

    pub fn section<'a, T>(&'a self, s: &'a Option<T>, name: &str) -> Result<&'a T, ConfigError> {
        s.as_ref().ok_or_else(|| ConfigError::Schema(format!("missing [{name}] table")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
seed = 7

[model.gaussian]
hurst = 0.9
coeff_law = { law = "arfima" }
far_past = "exact"

[model.noise.law]
alpha = 1.5
beta = 0.5
family = { family = "two_sided_pareto" }

[model.volatility]
kind = "exp"

[simulate]
n = 100
"#;

    #[test]
    fn minimal_config_parses() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.simulate.unwrap().n, 100);
        assert_eq!(cfg.model.unwrap().noise.law.alpha, 1.5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = MINIMAL.replace("n = 100", "n = 100\nlength = 3");
        assert!(matches!(ExperimentConfig::parse(&bad), Err(ConfigError::Parse(_))));
        let bad = MINIMAL.replace("alpha = 1.5", "alpha = 1.5\ngamma = 2");
        assert!(ExperimentConfig::parse(&bad).is_err());
    }

    #[test]
    fn schema_version_is_checked() {
        let bad = MINIMAL.replace("schema_version = 1", "schema_version = 2");
        assert!(matches!(ExperimentConfig::parse(&bad), Err(ConfigError::Schema(_))));
    }
}
