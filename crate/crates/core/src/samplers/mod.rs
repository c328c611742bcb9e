//! Blocked Gibbs samplers.
//!
//! Every model implements [`GibbsModel`]; [`run_chain`] drives warmup and retention and
//! assembles [`PosteriorSamples`]. Each block of each sweep draws from its own counter-based
//! stream (see [`crate::rng`]), so a chain is a pure function of its configuration.

mod matrix;
mod probe;
mod probit;
mod slice;
mod sparse;
mod variates;

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{GapError, Result};

pub use matrix::{factor_draws, FactorDraws, gibbs_matrix_smoothing, MatrixData, MatrixSampler, MatrixState, MatrixTarget};
pub use probe::{probe_conditional, ProbeOutcome};
pub use probit::{gibbs_fused_probit, ProbitData, ProbitSampler, ProbitState, ProbitTarget};
pub use slice::{slice_sample_1d, slice_sample_1d_tracked, SliceStats};
pub use sparse::{
    gibbs_bayesian_lasso, gibbs_gdp, gibbs_sparse_regression, BayesianLassoSampler, GapSparseSampler,
    GapSparseState, GdpSampler, RegressionData, SparseTarget,
};
pub use variates::{
    log_inverse_gamma_kernel, sample_beta, sample_gamma, sample_inverse_gamma, sample_inverse_gaussian,
    sample_truncated_normal, std_normal,
};

/// Hyperprior parameters shared by the models. Inverse-gamma entries are `(shape, scale)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperpriors {
    /// Global shrinkage level `lambda` (and `lambda2` in the matrix model).
    pub lambda: (f64, f64),
    pub sigma2: (f64, f64),
    pub rho: (f64, f64),
    /// Beta prior on the cross-department weight.
    pub omega: (f64, f64),
    /// Variance of the Gaussian anchor kernel in the matrix and probit models.
    pub kernel_variance: f64,
    /// Bayesian lasso `lambda^2 ~ Gamma(shape, rate)`.
    pub bl_lambda2: (f64, f64),
    /// GDP `lambda_j ~ Gamma(alpha, eta)`.
    pub gdp: (f64, f64),
    /// Random-intercept variance in the probit model.
    pub tau2: (f64, f64),
}

impl Default for Hyperpriors {
    fn default() -> Self {
        Hyperpriors {
            lambda: (2.0, 1.0),
            sigma2: (1.0, 1.0),
            rho: (2.0, 1.0),
            omega: (1.0, 1.0),
            kernel_variance: 100.0,
            bl_lambda2: (1.0, 1.78),
            gdp: (1.0, 1.0),
            tau2: (2.0, 1.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub warmup: usize,
    pub retain: usize,
    pub thin: usize,
    pub seed: u64,
    /// Chain identifier; part of every random stream key.
    pub chain: u64,
    pub alpha: f64,
    pub hyper: Hyperpriors,
    /// Factor rank in the matrix model.
    pub rank: usize,
    /// Store the dual blocks of the matrix model (large).
    pub store_duals: bool,
    /// Per-row random intercept in the probit model.
    pub random_intercept: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            warmup: 1000,
            retain: 1000,
            thin: 1,
            seed: 0,
            chain: 0,
            alpha: 1000.0,
            hyper: Hyperpriors::default(),
            rank: 5,
            store_duals: false,
            random_intercept: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.warmup < 1 || self.retain < 1 || self.thin < 1 {
            return Err(GapError::InvalidParameter("warmup, retain and thin must all be >= 1".into()));
        }
        if self.thin > self.retain {
            return Err(GapError::InvalidParameter(format!(
                "thin ({}) exceeds retain ({}); no draw would be kept",
                self.thin, self.retain
            )));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(GapError::InvalidParameter(format!("alpha must be positive, got {}", self.alpha)));
        }
        let h = &self.hyper;
        for (name, (a, b)) in [
            ("lambda", h.lambda),
            ("sigma2", h.sigma2),
            ("rho", h.rho),
            ("omega", h.omega),
            ("bl_lambda2", h.bl_lambda2),
            ("gdp", h.gdp),
            ("tau2", h.tau2),
        ] {
            if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                return Err(GapError::InvalidParameter(format!("hyperprior {name} needs positive parameters")));
            }
        }
        if !(h.kernel_variance > 0.0) {
            return Err(GapError::InvalidParameter("kernel variance must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON encoding.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let hash = Sha256::digest(&json);
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub model: String,
    pub seed: u64,
    pub chain: u64,
    pub config_digest: String,
    pub wall_seconds: f64,
    pub stats: BTreeMap<String, f64>,
}

/// Retained draws, one row per kept sweep, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSamples {
    pub names: Vec<String>,
    draws: Vec<f64>,
    pub meta: SampleMeta,
}

impl PosteriorSamples {
    pub fn new(names: Vec<String>, draws: Vec<f64>, meta: SampleMeta) -> Result<Self> {
        if names.is_empty() || !draws.len().is_multiple_of(names.len()) {
            return Err(GapError::Dimension(format!(
                "{} values do not fill rows of {} columns",
                draws.len(),
                names.len()
            )));
        }
        Ok(PosteriorSamples { names, draws, meta })
    }

    pub fn ncols(&self) -> usize {
        self.names.len()
    }

    pub fn nrows(&self) -> usize {
        self.draws.len() / self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.ncols();
        &self.draws[i * c..(i + 1) * c]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        let c = self.ncols();
        self.draws.iter().skip(j).step_by(c).copied().collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column_by_name(&self, name: &str) -> Option<Vec<f64>> {
        self.index_of(name).map(|j| self.column(j))
    }

    /// Columns whose names start with `prefix` followed by `[`.
    pub fn columns_with_prefix(&self, prefix: &str) -> Vec<(String, Vec<f64>)> {
        let tag = format!("{prefix}[");
        self.names
            .iter()
            .enumerate()
            .filter(|(_, n)| n.starts_with(&tag))
            .map(|(j, n)| (n.clone(), self.column(j)))
            .collect()
    }

    pub fn column_means(&self) -> Vec<f64> {
        let (r, c) = (self.nrows(), self.ncols());
        let mut m = vec![0.0; c];
        for i in 0..r {
            for (acc, v) in m.iter_mut().zip(self.row(i)) {
                *acc += v;
            }
        }
        m.iter_mut().for_each(|v| *v /= r as f64);
        m
    }

    pub fn mean_of(&self, name: &str) -> Option<f64> {
        self.column_by_name(name).map(|c| c.iter().sum::<f64>() / c.len() as f64)
    }

    /// Headered CSV; values use Rust's shortest round-trip formatting.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", self.names.join(","))?;
        let mut line = String::new();
        for i in 0..self.nrows() {
            line.clear();
            for (j, v) in self.row(i).iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                line.push_str(&v.to_string());
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// A model that can be advanced one sweep at a time.
pub trait GibbsModel {
    fn model_name(&self) -> &'static str;
    fn parameter_names(&self) -> Vec<String>;
    /// Advance one full sweep; `warmup` allows tuning of internal step sizes.
    fn sweep(&mut self, sweep: u64, warmup: bool) -> Result<()>;
    fn record(&self, out: &mut Vec<f64>);
    fn stats(&self) -> BTreeMap<String, f64> {
        BTreeMap::new()
    }
}

/// Run `warmup` sweeps, then `retain` more, recording every `thin`-th of the latter.
pub fn run_chain<M: GibbsModel>(model: &mut M, config: &SamplerConfig) -> Result<PosteriorSamples> {
    config.validate()?;
    let start = Instant::now();
    let names = model.parameter_names();
    let mut draws = Vec::with_capacity(names.len() * (config.retain / config.thin));
    let mut sweep = 0u64;
    for _ in 0..config.warmup {
        model.sweep(sweep, true)?;
        sweep += 1;
    }
    for i in 0..config.retain {
        model.sweep(sweep, false)?;
        sweep += 1;
        if (i + 1) % config.thin == 0 {
            model.record(&mut draws);
        }
    }
    let meta = SampleMeta {
        model: model.model_name().to_string(),
        seed: config.seed,
        chain: config.chain,
        config_digest: config.digest(),
        wall_seconds: start.elapsed().as_secs_f64(),
        stats: model.stats(),
    };
    PosteriorSamples::new(names, draws, meta)
}

/// A one-dimensional full conditional on a frozen state.
///
/// `log_density` is evaluated from the model's joint density, independently of the
/// closed-form update in `update`, so the two can be checked against each other.
pub trait Conditional {
    fn label(&self) -> String;
    fn support(&self) -> (f64, f64);
    fn current(&self) -> f64;
    fn log_density(&self, x: f64) -> f64;
    /// Apply the model's own update to this coordinate and return the new value.
    fn update(&mut self, rng: &mut rand_chacha::ChaCha8Rng) -> Result<f64>;
}

pub(crate) fn indexed(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}[{i}]"))
}

pub(crate) fn indexed2(prefix: &str, rows: usize, cols: usize) -> Vec<String> {
    let mut v = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            v.push(format!("{prefix}[{i},{j}]"));
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_digest_is_stable() {
        let a = SamplerConfig::default();
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.seed = 1;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn config_validation() {
        let mut c = SamplerConfig::default();
        assert!(c.validate().is_ok());
        c.retain = 0;
        assert!(c.validate().is_err());
        let mut c = SamplerConfig::default();
        c.hyper.rho = (0.0, 1.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn samples_layout() {
        let meta = SampleMeta {
            model: "t".into(),
            seed: 0,
            chain: 0,
            config_digest: String::new(),
            wall_seconds: 0.0,
            stats: BTreeMap::new(),
        };
        let s = PosteriorSamples::new(vec!["a".into(), "b".into()], vec![1.0, 2.0, 3.0, 4.0], meta.clone()).unwrap();
        assert_eq!(s.nrows(), 2);
        assert_eq!(s.column(1), vec![2.0, 4.0]);
        assert_eq!(s.column_means(), vec![2.0, 3.0]);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,b\n1,2\n3,4\n");
        assert!(PosteriorSamples::new(vec!["a".into(), "b".into()], vec![1.0], meta).is_err());
    }
}
