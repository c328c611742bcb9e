//! Run reports: metrics, threshold checks and their persistence.
//!
//! `report.json` holds only quantities that are a pure function of the configuration, so two
//! runs of the same configuration produce identical bytes. Wall-clock figures live in
//! [`Timing`], which is written to `timing.log` and never to the JSON report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use gapshrink::certify::CertificationReport;
use gapshrink::diagnostics::ChainSummary;
use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentId};
use crate::error::{io_at, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

/// One comparison of a measured value against a limit from the thresholds file.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub limit: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `value <= limit`; a NaN value never passes.
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, relation: Relation::AtMost, limit, passed: value <= limit }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check { name: name.into(), value, relation: Relation::AtLeast, limit, passed: value >= limit }
    }

    pub fn line(&self) -> String {
        let rel = match self.relation {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        };
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        format!("{verdict} {}: {:.6e} {rel} {:.6e}", self.name, self.value, self.limit)
    }
}

/// Results of one replication (or one scenario of one replication).
#[derive(Clone, Debug, Serialize)]
pub struct Replication {
    pub label: String,
    pub index: usize,
    pub data_seed: u64,
    pub chain: u64,
    /// Set when the sampler failed; the other replications still run.
    pub error: Option<String>,
    /// Posterior summaries, with `wall_seconds` and `ess_per_second` zeroed.
    pub summary: Option<ChainSummary>,
    pub metrics: BTreeMap<String, f64>,
}

impl Replication {
    pub fn failed(label: String, index: usize, data_seed: u64, chain: u64, error: String) -> Self {
        Replication { label, index, data_seed, chain, error: Some(error), summary: None, metrics: BTreeMap::new() }
    }

    pub fn metric(&self, name: &str) -> f64 {
        self.metrics.get(name).copied().unwrap_or(f64::NAN)
    }
}

/// Wall-clock accounting for one chain.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ChainTiming {
    pub label: String,
    pub seconds: f64,
    pub median_ess: f64,
    pub ess_per_second: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Timing {
    pub total_seconds: f64,
    pub chains: Vec<ChainTiming>,
    /// Budget check for experiments that have one.
    pub budget: Option<Check>,
}

impl Timing {
    pub fn within_budget(&self) -> bool {
        self.budget.as_ref().is_none_or(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "total_seconds = {:.3}", self.total_seconds);
        for c in &self.chains {
            let _ = writeln!(
                s,
                "{}: seconds = {:.3}, median_ess = {:.1}, ess_per_second = {:.2}",
                c.label, c.seconds, c.median_ess, c.ess_per_second
            );
        }
        if let Some(b) = &self.budget {
            let _ = writeln!(s, "{}", b.line());
        }
        s
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub experiment: ExperimentId,
    pub config: ExperimentConfig,
    pub replications: Vec<Replication>,
    /// Certification suites of `gap-check`, with their timings zeroed.
    pub certification: Option<CertificationReport>,
    pub checks: Vec<Check>,
    pub passed: bool,
    #[serde(skip)]
    pub timing: Timing,
}

impl RunReport {
    pub fn new(config: &ExperimentConfig, replications: Vec<Replication>, checks: Vec<Check>) -> Self {
        let passed = checks.iter().all(|c| c.passed) && replications.iter().all(|r| r.error.is_none());
        RunReport {
            experiment: config.experiment,
            config: config.clone(),
            replications,
            certification: None,
            checks,
            passed,
            timing: Timing::default(),
        }
    }

    /// Acceptance checks and the runtime budget together.
    pub fn succeeded(&self) -> bool {
        self.passed && self.timing.within_budget()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("report.json");
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        fs::write(&path, json).map_err(io_at(&path))?;
        let path = dir.join("timing.log");
        fs::write(&path, self.timing.render()).map_err(io_at(&path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nan_never_passes() {
        assert!(!Check::at_most("x", f64::NAN, 1.0).passed);
        assert!(!Check::at_least("x", f64::NAN, 1.0).passed);
        assert!(Check::at_least("x", 1.0, 1.0).passed);
    }

    #[test]
    fn check_serializes_relation_symbol() {
        let json = serde_json::to_string(&Check::at_most("a", 0.5, 1.0)).unwrap();
        assert!(json.contains("\"<=\""), "{json}");
    }
}
