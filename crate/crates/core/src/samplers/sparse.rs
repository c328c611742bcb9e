//! Linear regression with the l1 gap-shrinkage prior, plus the Bayesian lasso and the
//! generalized double Pareto comparators.
//!
//! The gap-shrinkage chain works with `kappa_j = |u_j|` and `u_j = sign(theta_j) kappa_j`.
//! Writing the Cauchy kernel as `N(theta_j + u_j; 0, w_j)` with `w_j ~ IG(1/2, 1/2)`, the
//! cross term `kappa_j |theta_j| / w_j` merges with the gap into one Laplace factor
//! `exp(-c_j |theta_j|)`, `c_j = alpha (lambda - kappa_j) + kappa_j / w_j`. Its exponential
//! scale mixture makes the coefficient block Gaussian. The mixing scale is drawn right
//! before the coefficients and never used elsewhere, so every other conditional is taken
//! with the Laplace factor in closed form.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;

use super::slice::{slice_sample_1d_tracked, SliceStats};
use super::variates::{
    log_inverse_gamma_kernel, sample_gamma, sample_inverse_gamma, sample_inverse_gaussian, sample_truncated_normal,
    std_normal,
};
use super::{indexed, run_chain, Conditional, GibbsModel, PosteriorSamples, SamplerConfig};
use crate::error::{dim_check, GapError, Result};
use crate::linalg::sample_gaussian_precision;
use crate::rng::{blocks, stream};

/// Block size of the coordinate-block fallback when the joint Cholesky fails.
pub const FALLBACK_BLOCK: usize = 50;

/// Sweep index reserved for initialization streams.
pub(crate) const INIT_SWEEP: u64 = u64::MAX;

#[derive(Clone, Debug)]
pub struct RegressionData {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
}

impl RegressionData {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        dim_check("response", x.nrows(), y.len())?;
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(GapError::InvalidParameter("design must have n, p >= 1".into()));
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(GapError::Domain("design and response must be finite".into()));
        }
        let xt = x.transpose();
        let xtx = &xt * &x;
        let xty = &xt * &y;
        Ok(RegressionData { x, y, xtx, xty })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    fn rss(&self, theta: &DVector<f64>) -> f64 {
        (&self.y - &self.x * theta).norm_squared()
    }

    fn initial_sigma2(&self) -> f64 {
        let n = self.n() as f64;
        let m = self.y.sum() / n;
        let v = self.y.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0).max(1.0);
        if v > 0.0 {
            v
        } else {
            1.0
        }
    }

    /// Draw from `N(P^{-1} X^T y / sigma2, P^{-1})`, `P = X^T X / sigma2 + diag(extra)`.
    fn draw_coefficients(
        &self,
        sigma2: f64,
        extra: &[f64],
        current: &DVector<f64>,
        rng: &mut ChaCha8Rng,
    ) -> Result<DVector<f64>> {
        let mut prec = &self.xtx / sigma2;
        for (j, e) in extra.iter().enumerate() {
            prec[(j, j)] += e;
        }
        let lin = &self.xty / sigma2;
        draw_gaussian_blocked(prec, lin, current, rng)
    }
}

/// Joint Gaussian draw from precision form, falling back to Gibbs over coordinate blocks.
pub(crate) fn draw_gaussian_blocked(
    prec: DMatrix<f64>,
    lin: DVector<f64>,
    current: &DVector<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<DVector<f64>> {
    if let Some(draw) = sample_gaussian_precision(prec.clone(), &lin, rng) {
        return Ok(draw);
    }
    let p = lin.len();
    let mut theta = current.clone();
    for start in (0..p).step_by(FALLBACK_BLOCK) {
        let len = FALLBACK_BLOCK.min(p - start);
        let block = prec.view((start, start), (len, len)).clone_owned();
        let mut rhs = lin.rows(start, len).clone_owned();
        for j in (0..p).filter(|&j| j < start || j >= start + len) {
            let tj = theta[j];
            if tj != 0.0 {
                rhs -= prec.view((start, j), (len, 1)) * tj;
            }
        }
        let min_diag = block.diagonal().min();
        let draw = sample_gaussian_precision(block, &rhs, rng).ok_or_else(|| {
            GapError::Numeric(format!(
                "conditional precision not positive definite (block at {start}, size {len}, smallest diagonal {min_diag:e})"
            ))
        })?;
        theta.rows_mut(start, len).copy_from(&draw);
    }
    Ok(theta)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapSparseState {
    pub theta: DVector<f64>,
    /// `|u_j|`; the sign of `u_j` follows `theta_j`.
    pub kappa: DVector<f64>,
    /// Cauchy mixing variances.
    pub w: DVector<f64>,
    pub lambda: f64,
    pub sigma2: f64,
}

impl GapSparseState {
    pub fn u(&self) -> DVector<f64> {
        self.theta.zip_map(&self.kappa, |t, k| if t < 0.0 { -k } else { k })
    }

    pub fn gap(&self) -> f64 {
        self.theta.iter().zip(self.kappa.iter()).map(|(t, k)| (self.lambda - k) * t.abs()).sum()
    }
}

/// Gibbs sampler for `y ~ N(X theta, sigma2 I)` under the l1 gap-shrinkage prior.
#[derive(Clone, Debug)]
pub struct GapSparseSampler {
    data: RegressionData,
    config: SamplerConfig,
    pub state: GapSparseState,
    slice: SliceStats,
}

impl GapSparseSampler {
    pub fn new(data: RegressionData, config: SamplerConfig) -> Result<Self> {
        config.validate()?;
        let p = data.p();
        let mut rng = stream(config.seed, config.chain, INIT_SWEEP, blocks::INIT);
        // Cauchy draws scaled by 0.1: a ratio of independent normals
        let theta = DVector::from_fn(p, |_, _| 0.1 * std_normal(&mut rng) / std_normal(&mut rng));
        let state = GapSparseState {
            theta,
            kappa: DVector::zeros(p),
            w: DVector::from_element(p, 1.0),
            lambda: 1.0,
            sigma2: data.initial_sigma2(),
        };
        Ok(GapSparseSampler { data, config, state, slice: SliceStats::default() })
    }

    pub fn data(&self) -> &RegressionData {
        &self.data
    }

    fn rng(&self, sweep: u64, block: u64) -> ChaCha8Rng {
        stream(self.config.seed, self.config.chain, sweep, block)
    }

    fn laplace_rate(&self, j: usize) -> f64 {
        let s = &self.state;
        self.config.alpha * (s.lambda - s.kappa[j]) + s.kappa[j] / s.w[j]
    }

    fn update_w(&mut self, rng: &mut ChaCha8Rng) -> Result<()> {
        for j in 0..self.data.p() {
            let x = self.state.theta[j].abs() + self.state.kappa[j];
            self.state.w[j] = sample_inverse_gamma(1.0, 0.5 * (1.0 + x * x), rng)?;
        }
        Ok(())
    }

    fn update_theta(&mut self, rng: &mut ChaCha8Rng) -> Result<()> {
        let p = self.data.p();
        let mut extra = vec![0.0; p];
        for (j, e) in extra.iter_mut().enumerate() {
            let c = self.laplace_rate(j);
            let t = self.state.theta[j].abs();
            let s = if t > 0.0 {
                1.0 / sample_inverse_gaussian(c / t, c * c, rng)?
            } else {
                sample_gamma(0.5, 0.5 * c * c, rng)?
            };
            *e = 1.0 / s + 1.0 / self.state.w[j];
        }
        self.state.theta = self.data.draw_coefficients(self.state.sigma2, &extra, &self.state.theta, rng)?;
        Ok(())
    }

    /// Draw `kappa_j` from its truncated-normal conditional on `[0, lambda]`.
    pub fn update_kappa(&mut self, j: usize, rng: &mut ChaCha8Rng) -> Result<()> {
        let s = &self.state;
        let t = s.theta[j].abs();
        let w = s.w[j];
        let mean = if t > 0.0 { t * (self.config.alpha * w - 1.0) } else { 0.0 };
        self.state.kappa[j] = sample_truncated_normal(mean, w.sqrt(), 0.0, s.lambda, rng)?;
        Ok(())
    }

    fn lambda_log_target(&self) -> impl Fn(f64) -> f64 {
        let (a, b) = self.config.hyper.lambda;
        let rate = self.config.alpha * self.state.theta.iter().map(|t| t.abs()).sum::<f64>();
        move |eta: f64| {
            let l = eta.exp();
            -(a + 1.0) * eta - b / l + eta - rate * l
        }
    }

    /// Slice update of `log lambda` above `max_j kappa_j`.
    pub fn update_lambda(&mut self, rng: &mut ChaCha8Rng) -> Result<()> {
        let lower = self.state.kappa.max().ln();
        let target = self.lambda_log_target();
        let eta = slice_sample_1d_tracked(target, self.state.lambda.ln(), 1.0, (lower, f64::INFINITY), rng, &mut self.slice)?;
        self.state.lambda = eta.exp().max(self.state.kappa.max());
        Ok(())
    }

    /// Joint rescaling of `(lambda, kappa)` with `f_j = kappa_j / lambda` held fixed.
    ///
    /// The lower bound `lambda >= max kappa` pins `lambda` once the duals pile up at the box
    /// edge; moving both together (Jacobian `lambda^p`) lets the level travel freely.
    pub fn update_lambda_rescale(&mut self, rng: &mut ChaCha8Rng) -> Result<()> {
        let (a, b) = self.config.hyper.lambda;
        let alpha = self.config.alpha;
        let st = &self.state;
        let p = self.data.p() as f64;
        let frac: Vec<f64> = st.kappa.iter().map(|k| k / st.lambda).collect();
        let slack: f64 = st.theta.iter().zip(&frac).map(|(t, f)| (1.0 - f) * t.abs()).sum();
        let terms: Vec<(f64, f64, f64)> =
            st.theta.iter().zip(&frac).zip(st.w.iter()).map(|((t, f), w)| (t.abs(), *f, *w)).collect();
        let target = move |eta: f64| {
            let l = eta.exp();
            let kernel: f64 = terms.iter().map(|&(t, f, w)| (t + l * f).powi(2) / (2.0 * w)).sum();
            -(a + 1.0) * eta - b / l + (p + 1.0) * eta - alpha * l * slack - kernel
        };
        let eta = slice_sample_1d_tracked(target, st.lambda.ln(), 1.0, (f64::NEG_INFINITY, f64::INFINITY), rng, &mut self.slice)?;
        let l = eta.exp();
        self.state.kappa = DVector::from_iterator(frac.len(), frac.iter().map(|f| (f * l).min(l)));
        self.state.lambda = l;
        Ok(())
    }

    /// Conjugate draw `sigma2 ~ IG(a + n/2, b + RSS/2)`.
    pub fn update_sigma2(&mut self, rng: &mut ChaCha8Rng) -> Result<()> {
        let (a, b) = self.config.hyper.sigma2;
        let rss = self.data.rss(&self.state.theta);
        self.state.sigma2 = sample_inverse_gamma(a + 0.5 * self.data.n() as f64, b + 0.5 * rss, rng)?;
        Ok(())
    }

    /// One-dimensional conditionals of `kappa_j` and `lambda` on the current state.
    pub fn conditional(&self, target: SparseTarget) -> Box<dyn Conditional + '_> {
        Box::new(SparseProbe { sampler: self.clone(), target })
    }
}

impl GibbsModel for GapSparseSampler {
    fn model_name(&self) -> &'static str {
        "gap-shrinkage"
    }

    fn parameter_names(&self) -> Vec<String> {
        let p = self.data.p();
        indexed("theta", p)
            .chain(indexed("u", p))
            .chain(["lambda", "sigma2", "gap"].map(String::from))
            .collect()
    }

    fn sweep(&mut self, sweep: u64, _warmup: bool) -> Result<()> {
        self.update_w(&mut self.rng(sweep, blocks::LATENT))?;
        self.update_theta(&mut self.rng(sweep, blocks::PRIMAL))?;
        let mut rng = self.rng(sweep, blocks::DUAL);
        for j in 0..self.data.p() {
            self.update_kappa(j, &mut rng)?;
        }
        let mut rng = self.rng(sweep, blocks::HYPER);
        self.update_lambda(&mut rng)?;
        self.update_lambda_rescale(&mut rng)?;
        self.update_sigma2(&mut self.rng(sweep, blocks::NOISE))
    }

    fn record(&self, out: &mut Vec<f64>) {
        out.extend(self.state.theta.iter());
        out.extend(self.state.u().iter());
        out.extend([self.state.lambda, self.state.sigma2, self.state.gap()]);
    }

    fn stats(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([("lambda_slice_evaluations".to_string(), self.slice.mean_evaluations())])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SparseTarget {
    Kappa(usize),
    Lambda,
}

struct SparseProbe {
    sampler: GapSparseSampler,
    target: SparseTarget,
}

impl Conditional for SparseProbe {
    fn label(&self) -> String {
        match self.target {
            SparseTarget::Kappa(j) => format!("kappa[{j}]"),
            SparseTarget::Lambda => "lambda".into(),
        }
    }

    fn support(&self) -> (f64, f64) {
        let s = &self.sampler.state;
        match self.target {
            SparseTarget::Kappa(_) => (0.0, s.lambda),
            SparseTarget::Lambda => (s.kappa.max(), f64::INFINITY),
        }
    }

    fn current(&self) -> f64 {
        let s = &self.sampler.state;
        match self.target {
            SparseTarget::Kappa(j) => s.kappa[j],
            SparseTarget::Lambda => s.lambda,
        }
    }

    // Terms of the augmented joint density that involve the target coordinate.
    fn log_density(&self, x: f64) -> f64 {
        let s = &self.sampler.state;
        let alpha = self.sampler.config.alpha;
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return f64::NEG_INFINITY;
        }
        match self.target {
            SparseTarget::Kappa(j) => {
                let t = s.theta[j].abs();
                let gap = (s.lambda - x) * t;
                let anchor = t + x;
                -alpha * gap - anchor * anchor / (2.0 * s.w[j])
            }
            SparseTarget::Lambda => {
                let (a, b) = self.sampler.config.hyper.lambda;
                let gap: f64 = s.theta.iter().zip(s.kappa.iter()).map(|(t, k)| (x - k) * t.abs()).sum();
                log_inverse_gamma_kernel(x, a, b) - alpha * gap
            }
        }
    }

    fn update(&mut self, rng: &mut ChaCha8Rng) -> Result<f64> {
        match self.target {
            SparseTarget::Kappa(j) => self.sampler.update_kappa(j, rng)?,
            SparseTarget::Lambda => self.sampler.update_lambda(rng)?,
        }
        Ok(self.current())
    }
}

/// Posterior draws of `(theta, u, lambda, sigma2)` plus the per-draw gap value.
pub fn gibbs_sparse_regression(x: &DMatrix<f64>, y: &DVector<f64>, config: &SamplerConfig) -> Result<PosteriorSamples> {
    let data = RegressionData::new(x.clone(), y.clone())?;
    let mut sampler = GapSparseSampler::new(data, config.clone())?;
    let mut samples = run_chain(&mut sampler, config)?;
    if let Some(g) = samples.mean_of("gap") {
        samples.meta.stats.insert("mean_gap".into(), g);
    }
    Ok(samples)
}

/// Park–Casella Bayesian lasso.
#[derive(Clone, Debug)]
pub struct BayesianLassoSampler {
    data: RegressionData,
    config: SamplerConfig,
    pub theta: DVector<f64>,
    pub tau2: DVector<f64>,
    pub lambda2: f64,
    pub sigma2: f64,
}

impl BayesianLassoSampler {
    pub fn new(data: RegressionData, config: SamplerConfig) -> Result<Self> {
        config.validate()?;
        let p = data.p();
        let mut rng = stream(config.seed, config.chain, INIT_SWEEP, blocks::INIT);
        let theta = DVector::from_fn(p, |_, _| 0.1 * std_normal(&mut rng) / std_normal(&mut rng));
        let sigma2 = data.initial_sigma2();
        Ok(BayesianLassoSampler { data, config, theta, tau2: DVector::from_element(p, 1.0), lambda2: 1.0, sigma2 })
    }
}

impl GibbsModel for BayesianLassoSampler {
    fn model_name(&self) -> &'static str {
        "bayesian-lasso"
    }

    fn parameter_names(&self) -> Vec<String> {
        indexed("theta", self.data.p()).chain(["lambda", "sigma2"].map(String::from)).collect()
    }

    fn sweep(&mut self, sweep: u64, _warmup: bool) -> Result<()> {
        let (seed, chain) = (self.config.seed, self.config.chain);
        let p = self.data.p();
        let mut rng = stream(seed, chain, sweep, blocks::SCALES);
        for j in 0..p {
            let t = self.theta[j].abs();
            let inv = if t > 0.0 {
                sample_inverse_gaussian((self.lambda2 * self.sigma2 / (t * t)).sqrt(), self.lambda2, &mut rng)?
            } else {
                1.0 / sample_gamma(0.5, 0.5 * self.lambda2, &mut rng)?
            };
            self.tau2[j] = 1.0 / inv;
        }
        let extra: Vec<f64> = self.tau2.iter().map(|t| 1.0 / (t * self.sigma2)).collect();
        self.theta = self.data.draw_coefficients(self.sigma2, &extra, &self.theta, &mut stream(seed, chain, sweep, blocks::PRIMAL))?;
        let (a, b) = self.config.hyper.sigma2;
        let rss = self.data.rss(&self.theta);
        let pen: f64 = self.theta.iter().zip(self.tau2.iter()).map(|(t, s)| t * t / s).sum();
        let shape = a + 0.5 * (self.data.n() + p) as f64;
        self.sigma2 = sample_inverse_gamma(shape, b + 0.5 * (rss + pen), &mut stream(seed, chain, sweep, blocks::NOISE))?;
        let (r, delta) = self.config.hyper.bl_lambda2;
        let rate = delta + 0.5 * self.tau2.sum();
        self.lambda2 = sample_gamma(p as f64 + r, rate, &mut stream(seed, chain, sweep, blocks::HYPER))?;
        Ok(())
    }

    fn record(&self, out: &mut Vec<f64>) {
        out.extend(self.theta.iter());
        out.extend([self.lambda2.sqrt(), self.sigma2]);
    }
}

pub fn gibbs_bayesian_lasso(x: &DMatrix<f64>, y: &DVector<f64>, config: &SamplerConfig) -> Result<PosteriorSamples> {
    let data = RegressionData::new(x.clone(), y.clone())?;
    run_chain(&mut BayesianLassoSampler::new(data, config.clone())?, config)
}

/// Generalized double Pareto prior in hierarchical Laplace form:
/// `theta_j ~ N(0, sigma2 tau_j)`, `tau_j ~ Exp(lambda_j^2 / 2)`, `lambda_j ~ Gamma(a, eta)`.
#[derive(Clone, Debug)]
pub struct GdpSampler {
    data: RegressionData,
    config: SamplerConfig,
    pub theta: DVector<f64>,
    pub tau: DVector<f64>,
    pub rate: DVector<f64>,
    pub sigma2: f64,
}

impl GdpSampler {
    pub fn new(data: RegressionData, config: SamplerConfig) -> Result<Self> {
        config.validate()?;
        let p = data.p();
        let mut rng = stream(config.seed, config.chain, INIT_SWEEP, blocks::INIT);
        let theta = DVector::from_fn(p, |_, _| 0.1 * std_normal(&mut rng) / std_normal(&mut rng));
        let sigma2 = data.initial_sigma2();
        Ok(GdpSampler {
            data,
            config,
            theta,
            tau: DVector::from_element(p, 1.0),
            rate: DVector::from_element(p, 1.0),
            sigma2,
        })
    }
}

impl GibbsModel for GdpSampler {
    fn model_name(&self) -> &'static str {
        "gdp"
    }

    fn parameter_names(&self) -> Vec<String> {
        indexed("theta", self.data.p()).chain(["sigma2".to_string()]).collect()
    }

    fn sweep(&mut self, sweep: u64, _warmup: bool) -> Result<()> {
        let (seed, chain) = (self.config.seed, self.config.chain);
        let (ga, eta) = self.config.hyper.gdp;
        let p = self.data.p();
        let sigma = self.sigma2.sqrt();
        let mut rng = stream(seed, chain, sweep, blocks::SCALES);
        for j in 0..p {
            let t = self.theta[j].abs();
            // the rate is drawn with tau integrated out, then tau given the rate
            let l = sample_gamma(ga + 1.0, t / sigma + eta, &mut rng)?;
            self.rate[j] = l;
            let inv = if t > 0.0 {
                sample_inverse_gaussian(l * sigma / t, l * l, &mut rng)?
            } else {
                1.0 / sample_gamma(0.5, 0.5 * l * l, &mut rng)?
            };
            self.tau[j] = 1.0 / inv;
        }
        let extra: Vec<f64> = self.tau.iter().map(|t| 1.0 / (t * self.sigma2)).collect();
        self.theta = self.data.draw_coefficients(self.sigma2, &extra, &self.theta, &mut stream(seed, chain, sweep, blocks::PRIMAL))?;
        let (a, b) = self.config.hyper.sigma2;
        let rss = self.data.rss(&self.theta);
        let pen: f64 = self.theta.iter().zip(self.tau.iter()).map(|(t, s)| t * t / s).sum();
        let shape = a + 0.5 * (self.data.n() + p) as f64;
        self.sigma2 = sample_inverse_gamma(shape, b + 0.5 * (rss + pen), &mut stream(seed, chain, sweep, blocks::NOISE))?;
        Ok(())
    }

    fn record(&self, out: &mut Vec<f64>) {
        out.extend(self.theta.iter());
        out.push(self.sigma2);
    }
}

pub fn gibbs_gdp(x: &DMatrix<f64>, y: &DVector<f64>, config: &SamplerConfig) -> Result<PosteriorSamples> {
    let data = RegressionData::new(x.clone(), y.clone())?;
    run_chain(&mut GdpSampler::new(data, config.clone())?, config)
}

