//! TOML experiment configuration, format version 1.
//!
//! ```toml
//! version = 1
//!
//! [model]             # AR coefficients; `order` alone suffices for `test` on data
//! betas = [0.5, 0.3]
//! nu = 1.0
//!
//! [hypothesis]
//! g0 = { kind = "gaussian", sigma = 1.0 }
//! m = 4
//! alpha = 0.05
//!
//! [estimator]
//! method = "least_squares"     # or "huber_m" with k = 1.345
//!
//! [alternative]
//! h = { kind = "gaussian", sigma = 2.0 }
//! rho = [0.0, 3.0]
//!
//! [contamination]
//! pi = { kind = "point_mass", c = 10.0 }
//! gamma = [0.0, 5.0]
//!
//! [experiment]
//! n = [5000]
//! replications = 2000
//! seed = 1
//!
//! [data]              # optional input series for `test`
//! path = "series.csv"
//! ```
//!
//! Relative data paths resolve against the directory of the config file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use symchi::ar_sim::ArSpec;
use symchi::distributions::ScalarDistribution;
use symchi::estimation::EstimationMethod;
use symchi::montecarlo::{linear_grid, ExperimentConfig};

use crate::CliError;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub version: u32,
    pub model: ModelSection,
    pub hypothesis: HypothesisSection,
    #[serde(default)]
    pub estimator: EstimationMethod,
    #[serde(default)]
    pub alternative: AlternativeSection,
    #[serde(default)]
    pub contamination: ContaminationSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default)]
    pub nu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisSection {
    pub m: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breakpoints: Option<Vec<f64>>,
    pub g0: ScalarDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlternativeSection {
    #[serde(default = "zero_grid")]
    pub rho: Vec<f64>,
    /// Defaults to `g0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<ScalarDistribution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContaminationSection {
    #[serde(default = "zero_grid")]
    pub gamma: Vec<f64>,
    #[serde(default = "no_outliers")]
    pub pi: ScalarDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_n")]
    pub n: Vec<usize>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Evaluation points of `edf-check`; nine points on [-2, 2] by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_grid: Option<Vec<f64>>,
    /// `γ` values of `robustness`; the contamination grid by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robustness_gamma: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub path: PathBuf,
}

fn default_alpha() -> f64 {
    0.05
}

fn zero_grid() -> Vec<f64> {
    vec![0.0]
}

fn no_outliers() -> ScalarDistribution {
    ScalarDistribution::point_mass(0.0)
}

fn default_n() -> Vec<usize> {
    vec![500]
}

fn default_replications() -> usize {
    1000
}

impl Default for AlternativeSection {
    fn default() -> Self {
        Self { rho: zero_grid(), h: None }
    }
}

impl Default for ContaminationSection {
    fn default() -> Self {
        Self { gamma: zero_grid(), pi: no_outliers() }
    }
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            n: default_n(),
            replications: default_replications(),
            seed: 0,
            threads: None,
            x_grid: None,
            robustness_gamma: None,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replications: Option<usize>,
    pub threads: Option<usize>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.version != CONFIG_VERSION {
            return Err(CliError::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    /// Read a config and resolve its data path against the config directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        if let Some(data) = &mut cfg.data {
            if data.path.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                data.path = base.join(&data.path);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn apply(&mut self, o: Overrides) {
        if let Some(s) = o.seed {
            self.experiment.seed = s;
        }
        if let Some(r) = o.replications {
            self.experiment.replications = r;
        }
        if let Some(t) = o.threads {
            self.experiment.threads = Some(t);
        }
    }

    /// AR order `p`, from `order` or the length of `betas`.
    pub fn order(&self) -> Result<usize, CliError> {
        match (&self.model.betas, self.model.order) {
            (Some(b), Some(p)) if b.len() != p => Err(CliError::Config(format!(
                "model.order = {p} disagrees with {} coefficients",
                b.len()
            ))),
            (Some(b), _) => Ok(b.len()),
            (None, Some(p)) => Ok(p),
            (None, None) => Err(CliError::Config("model needs `betas` or `order`".into())),
        }
    }

    pub fn x_grid(&self) -> Vec<f64> {
        self.experiment.x_grid.clone().unwrap_or_else(|| linear_grid(-2.0, 2.0, 9))
    }

    pub fn robustness_gamma(&self) -> Vec<f64> {
        self.experiment.robustness_gamma.clone().unwrap_or_else(|| self.contamination.gamma.clone())
    }

    pub fn experiment(&self) -> Result<ExperimentConfig, CliError> {
        let betas = self
            .model
            .betas
            .clone()
            .ok_or_else(|| CliError::Config("simulation needs model.betas".into()))?;
        self.order()?;
        let cfg = ExperimentConfig {
            ar: ArSpec::new(betas, self.model.nu)?,
            g0: self.hypothesis.g0.clone(),
            h: self.alternative.h.clone().unwrap_or_else(|| self.hypothesis.g0.clone()),
            pi: self.contamination.pi.clone(),
            gamma_grid: self.contamination.gamma.clone(),
            rho_grid: self.alternative.rho.clone(),
            n_grid: self.experiment.n.clone(),
            m: self.hypothesis.m,
            breakpoints: self.hypothesis.breakpoints.clone(),
            alpha: self.hypothesis.alpha,
            replications: self.experiment.replications,
            master_seed: self.experiment.seed,
            method: self.estimator,
            burn_in: self.model.burn_in,
            threads: self.experiment.threads,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
