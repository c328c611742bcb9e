//! Experiment configuration: per-experiment defaults, command-line overrides and an optional
//! TOML file layered on top.

use std::path::PathBuf;

use gapshrink::samplers::SamplerConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::thresholds::Thresholds;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentId {
    #[serde(rename = "exp1-sparse")]
    Sparse,
    #[serde(rename = "exp2-matrix")]
    Matrix,
    #[serde(rename = "exp3-fused-probit")]
    FusedProbit,
    #[serde(rename = "gap-check")]
    GapCheck,
}

impl ExperimentId {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::Sparse => "exp1-sparse",
            ExperimentId::Matrix => "exp2-matrix",
            ExperimentId::FusedProbit => "exp3-fused-probit",
            ExperimentId::GapCheck => "gap-check",
        }
    }
}

/// Shape of the synthetic fused-probit problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbitSetup {
    pub n: usize,
    pub p: usize,
    /// Department of each category; its length is the number of categories.
    pub departments: Vec<usize>,
    /// Category whose first coefficient is shifted in the deviant scenario.
    pub deviant_category: usize,
    pub deviant_offset: f64,
}

impl Default for ProbitSetup {
    fn default() -> Self {
        ProbitSetup { n: 2000, p: 2, departments: vec![0, 0, 0, 0, 1, 1, 1, 1], deviant_category: 2, deviant_offset: 1.2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub reps: usize,
    /// Base seed of the synthetic data; replication `r` uses `data_seed + r`.
    pub data_seed: u64,
    pub out: PathBuf,
    pub sampler: SamplerConfig,
    /// Also run the Bayesian lasso and GDP comparators in the sparse experiment.
    pub comparators: bool,
    pub probit: ProbitSetup,
    pub thresholds: Thresholds,
}

impl ExperimentConfig {
    /// Full-scale defaults for each experiment.
    pub fn defaults(experiment: ExperimentId) -> Self {
        let base = SamplerConfig::default();
        let (reps, sampler) = match experiment {
            ExperimentId::Sparse => (5, SamplerConfig { warmup: 1000, retain: 1000, ..base }),
            ExperimentId::Matrix => (1, SamplerConfig { warmup: 3000, retain: 3000, rank: 5, ..base }),
            ExperimentId::FusedProbit => (1, SamplerConfig { warmup: 1000, retain: 1000, ..base }),
            ExperimentId::GapCheck => (1, base),
        };
        ExperimentConfig {
            experiment,
            reps,
            data_seed: 1,
            out: PathBuf::from("runs").join(experiment.as_str()),
            sampler,
            comparators: true,
            probit: ProbitSetup::default(),
            thresholds: Thresholds::builtin(),
        }
    }

    /// Overlay a TOML document: every key present in `text` replaces the current value,
    /// tables merge recursively.
    pub fn overlay_toml(&self, text: &str) -> Result<Self> {
        let patch: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let mut current = toml::Table::try_from(self).map_err(|e| CliError::Config(e.to_string()))?;
        merge(&mut current, patch);
        let merged: ExperimentConfig =
            toml::Value::Table(current).try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        merged.validate()?;
        Ok(merged)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps < 1 {
            return Err(CliError::Config("reps must be at least 1".into()));
        }
        self.sampler.validate()?;
        let deps = &self.probit.departments;
        if deps.is_empty() {
            return Err(CliError::Config("probit departments are empty".into()));
        }
        if self.probit.deviant_category >= deps.len() {
            return Err(CliError::Config("deviant category out of range".into()));
        }
        Ok(())
    }
}

fn merge(base: &mut toml::Table, patch: toml::Table) {
    for (key, value) in patch {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(p)) => merge(b, p),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}
