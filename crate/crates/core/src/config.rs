//! The JSON run configuration shared by the `train`, `eval` and `sweep` commands.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::boosting::SolverSettings;
use crate::data::{cosine_divergence, path_divergence, DatasetBundle, DivergenceMatrix};
use crate::error::{Error, Result};
use crate::selection::{PaceMode, PaceParams};
use crate::trainer::TrainConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DivergenceSource {
    /// Rescaled cosine distance between label embeddings.
    #[default]
    Cosine,
    /// Path lengths read from `spath.csv`.
    Path,
    /// A precomputed `delta.csv`.
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PaceConfig {
    pub mode: PaceMode,
    pub lambda0: f64,
    pub zeta0: f64,
    pub lambda_max: f64,
    pub mu: f64,
    pub p0: f64,
    pub p_step: f64,
}

impl Default for PaceConfig {
    fn default() -> Self {
        let p = TrainConfig::default().pace;
        PaceConfig {
            mode: p.mode,
            lambda0: p.lambda,
            zeta0: p.zeta,
            lambda_max: p.lambda_max,
            mu: p.mu,
            p0: p.p0,
            p_step: p.p_step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Must be present and equal to [`SCHEMA_VERSION`].
    pub schema_version: u32,
    pub divergence: DivergenceSource,
    pub nu_over_n: f64,
    pub beta_over_n: f64,
    pub pace: PaceConfig,
    pub solver: SolverSettings,
    pub t_es: usize,
    pub max_iters_outer: usize,
    pub seed: u64,
    /// Pin every sample weight to 1.
    pub boosting_only: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        RunConfig {
            schema_version: SCHEMA_VERSION,
            divergence: DivergenceSource::Cosine,
            nu_over_n: t.nu_over_n,
            beta_over_n: t.beta_over_n,
            pace: PaceConfig::default(),
            solver: t.solver,
            t_es: t.t_es,
            max_iters_outer: t.max_iters_outer,
            seed: t.seed,
            boosting_only: false,
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        if value.get("schema_version").is_none() {
            return Err(Error::Config(format!("{}: missing schema_version", path.display())));
        }
        let config: RunConfig = serde_json::from_value(value).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        config.train_config()?;
        Ok(config)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::data::io::write_json(path.as_ref(), self)
    }

    /// Validated trainer configuration.
    pub fn train_config(&self) -> Result<TrainConfig> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let p = &self.pace;
        let pace = PaceParams::new(p.mode, p.lambda0, p.zeta0, p.lambda_max, p.mu, p.p0, p.p_step)
            .map_err(|e| Error::Config(e.to_string()))?;
        let config = TrainConfig {
            nu_over_n: self.nu_over_n,
            beta_over_n: self.beta_over_n,
            pace,
            solver: self.solver,
            t_es: self.t_es,
            max_iters_outer: self.max_iters_outer,
            seed: self.seed,
        };
        config.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(config)
    }

    pub fn divergence(&self, bundle: &DatasetBundle) -> Result<DivergenceMatrix> {
        match self.divergence {
            DivergenceSource::Cosine => cosine_divergence(&bundle.embeddings),
            DivergenceSource::Path => match &bundle.path_lengths {
                Some(p) => path_divergence(p),
                None => Err(Error::Config("divergence \"path\" needs spath.csv in the data directory".into())),
            },
            DivergenceSource::File => bundle
                .delta
                .clone()
                .ok_or_else(|| Error::Config("divergence \"file\" needs delta.csv in the data directory".into())),
        }
    }
}
