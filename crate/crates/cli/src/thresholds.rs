//! Acceptance limits, read from `config/thresholds.toml`.
//!
//! The file is compiled in as the default so the binary is self-contained, and any table
//! can be overridden from an experiment config file.

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// The thresholds file shipped with the crate.
pub const BUILTIN: &str = include_str!("../config/thresholds.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapCheckLimits {
    pub nonnegativity_floor: f64,
    pub nonnegativity_seconds: f64,
    pub distance_slack: f64,
    pub distance_seconds: f64,
    pub kl_slack: f64,
    pub kl_seconds: f64,
    pub zero_gap_closed_form: f64,
    pub zero_gap_admm_factor: f64,
    pub admm_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseLimits {
    pub nonzero_abs_error: f64,
    pub zero_abs_mean: f64,
    pub zero_fraction: f64,
    pub acf_lag: usize,
    pub acf_max: f64,
    pub comparator_min_fraction: f64,
    pub acf_envelope_tolerance: f64,
    pub acf_envelope_lags: usize,
    pub budget_seconds: f64,
    pub gap_concentration_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixLimits {
    pub sigma2_min: f64,
    pub sigma2_max: f64,
    pub top_singular_values: Vec<f64>,
    pub top_relative_error: f64,
    pub tail_max: f64,
    pub budget_seconds: f64,
    pub frobenius_norm: f64,
    pub frobenius_tol: f64,
    pub sparsity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbitLimits {
    pub within_department_max: f64,
    pub deviant_ratio: f64,
    pub omega_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailLimits {
    pub points: Vec<f64>,
    pub slope_min: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderStatisticLimits {
    pub cases: usize,
    pub min_group: usize,
    pub max_group: usize,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalLimits {
    pub draws: usize,
    pub thin: usize,
    pub p_min: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EssLimits {
    pub length: usize,
    pub phi: f64,
    pub relative_tolerance: f64,
    pub acf_tolerance: f64,
    pub acf_lags: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub gap_check: GapCheckLimits,
    pub exp1: SparseLimits,
    pub exp2: MatrixLimits,
    pub exp3: ProbitLimits,
    pub tail: TailLimits,
    pub order_statistics: OrderStatisticLimits,
    pub conditionals: ConditionalLimits,
    pub ess: EssLimits,
}

impl Thresholds {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("thresholds: {e}")))
    }

    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("bundled thresholds file parses")
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Self::builtin()
    }
}
