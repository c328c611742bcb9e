//! Multi-category probit regression with a complete-graph fused gap prior.
//!
//! `y_ij ~ Bernoulli(Phi(x_i^T theta_j + gamma_i))` for categories `j = 1..m`. Every pair of
//! categories is an edge, weighted 1 inside a department and `omega` across departments.
//! The prior is `exp[-alpha {rho |Lambda B theta|_1 - <theta, B^T Lambda v>}]` times a Gaussian
//! kernel on `beta = theta + B^T Lambda v`, with `|v| <= rho`.
//!
//! Sweep: probit latents, edge mixing scales, `theta` (one joint Gaussian block), `v`,
//! `rho`, `omega`, and the optional random intercepts.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;

use super::slice::{slice_sample_1d_tracked, SliceStats};
use super::sparse::{draw_gaussian_blocked, INIT_SWEEP};
use super::variates::{
    log_inverse_gamma_kernel, sample_gamma, sample_inverse_gamma, sample_inverse_gaussian, sample_truncated_normal,
    std_normal,
};
use super::{indexed2, run_chain, Conditional, GibbsModel, PosteriorSamples, SamplerConfig};
use crate::error::{dim_check, GapError, Result};
use crate::priors::{hyper, log_gap_prior_fused, BaseKernel, FusionGraph, GapPriorSpec};
use crate::rng::{blocks, stream};

/// Gap weight at the first warmup sweep, relative to the target.
pub const ANNEAL_START: f64 = 1e-3;

/// Largest edge mixing precision, relative to the likelihood precision scale.
pub const EDGE_PRECISION_RATIO: f64 = 1e8;

#[derive(Clone, Debug)]
pub struct ProbitData {
    /// `n x m` responses in {0, 1}.
    pub y: DMatrix<f64>,
    /// `n x p` covariates.
    pub x: DMatrix<f64>,
    /// Department label of each category, labels `0..D` all used.
    pub departments: Vec<usize>,
    xtx: DMatrix<f64>,
    edges: Vec<(usize, usize)>,
    cross: Vec<bool>,
}

impl ProbitData {
    pub fn new(y: DMatrix<f64>, x: DMatrix<f64>, departments: Vec<usize>) -> Result<Self> {
        dim_check("covariate rows", y.nrows(), x.nrows())?;
        dim_check("department labels", y.ncols(), departments.len())?;
        if y.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(GapError::Domain("responses must be 0 or 1".into()));
        }
        if y.ncols() < 2 || x.ncols() < 1 || y.nrows() < 1 {
            return Err(GapError::InvalidParameter("need n >= 1, p >= 1 and at least two categories".into()));
        }
        let d = departments.iter().max().map_or(0, |m| m + 1);
        for dep in 0..d {
            if !departments.contains(&dep) {
                return Err(GapError::InvalidParameter(format!("department {dep} is empty")));
            }
        }
        let m = departments.len();
        let mut edges = Vec::new();
        let mut cross = Vec::new();
        for i in 0..m {
            for j in i + 1..m {
                edges.push((i, j));
                cross.push(departments[i] != departments[j]);
            }
        }
        let xtx = x.transpose() * &x;
        Ok(ProbitData { y, x, departments, xtx, edges, cross })
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn m(&self) -> usize {
        self.y.ncols()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn is_cross(&self, e: usize) -> bool {
        self.cross[e]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbitState {
    /// `m x p` coefficients, one row per category.
    pub theta: DMatrix<f64>,
    /// `edges x p` duals.
    pub v: DMatrix<f64>,
    /// `n x m` probit latents.
    pub z: DMatrix<f64>,
    pub rho: f64,
    pub omega: f64,
    pub intercept: DVector<f64>,
    pub tau2: f64,
}

#[derive(Clone, Debug)]
pub struct ProbitSampler {
    data: ProbitData,
    config: SamplerConfig,
    pub state: ProbitState,
    /// Gap weight in force for the current sweep; below `config.alpha` only early in warmup.
    alpha: f64,
    slice_rho: SliceStats,
    slice_omega: SliceStats,
}

impl ProbitSampler {
    pub fn new(data: ProbitData, config: SamplerConfig) -> Result<Self> {
        config.validate()?;
        let (n, m, p) = (data.n(), data.m(), data.p());
        let mut rng = stream(config.seed, config.chain, INIT_SWEEP, blocks::INIT);
        let sd = 0.1 * config.hyper.kernel_variance.sqrt();
        let theta = DMatrix::from_fn(m, p, |_, _| sd * std_normal(&mut rng));
        let e = data.edges.len();
        let state = ProbitState {
            theta,
            v: DMatrix::zeros(e, p),
            z: DMatrix::zeros(n, m),
            rho: 1.0,
            omega: 0.5,
            intercept: DVector::zeros(n),
            tau2: 1.0,
        };
        let alpha = config.alpha;
        Ok(ProbitSampler { data, config, state, alpha, slice_rho: SliceStats::default(), slice_omega: SliceStats::default() })
    }

    /// Geometric ramp from `ANNEAL_START * alpha` to `alpha` over the first half of warmup.
    ///
    /// With a large gap weight, two categories that happen to start close fuse within a few
    /// sweeps and the edge mixing scales then hold their difference near `1 / (alpha rho)`,
    /// so the likelihood pulls them apart only very slowly. Starting weak lets the data
    /// place the categories first.
    fn annealed_alpha(&self, sweep: u64) -> f64 {
        let ramp = (self.config.warmup / 2).max(1) as f64;
        let t = (sweep as f64 / ramp).min(1.0);
        self.config.alpha * ANNEAL_START.powf(1.0 - t)
    }

    fn rng(&self, sweep: u64, block: u64) -> ChaCha8Rng {
        stream(self.config.seed, self.config.chain, sweep, block)
    }

    fn weight(&self, e: usize, omega: f64) -> f64 {
        if self.data.cross[e] {
            omega
        } else {
            1.0
        }
    }

    /// `B^T Lambda v` at the given cross weight.
    fn adjoint(&self, v: &DMatrix<f64>, omega: f64) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.data.m(), v.ncols());
        for (e, &(i, j)) in self.data.edges.iter().enumerate() {
            let w = self.weight(e, omega);
            for k in 0..v.ncols() {
                out[(i, k)] += w * v[(e, k)];
                out[(j, k)] -= w * v[(e, k)];
            }
        }
        out
    }

    fn linear_predictor(&self) -> DMatrix<f64> {
        let mut mu = &self.data.x * self.state.theta.transpose();
        for (i, g) in self.state.intercept.iter().enumerate() {
            if *g != 0.0 {
                mu.row_mut(i).add_scalar_mut(*g);
            }
        }
        mu
    }

    fn update_latents(&mut self, rng: &mut ChaCha8Rng) -> Result<()> {
        let mu = self.linear_predictor();
        for ((z, &y), &m) in self.state.z.iter_mut().zip(self.data.y.iter()).zip(mu.iter()) {
            *z = if y == 1.0 {
                sample_truncated_normal(m, 1.0, 0.0, f64::INFINITY, rng)?
            } else {
                sample_truncated_normal(m, 1.0, f64::NEG_INFINITY, 0.0, rng)?
            };
        }
        Ok(())
    }

    /// Mixing scales for the edge Laplace factors, then `theta` as one Gaussian block.
    fn update_theta(&mut self, sweep: u64) -> Result<()> {
        let (m, p) = (self.data.m(), self.data.p());
        let st = &self.state;
        let alpha = self.alpha;
        let kv = self.config.hyper.kernel_variance;
        let mut rng = self.rng(sweep, blocks::SCALES);
        // Nearly fused pairs draw precisions near 1e18, which makes the graph Laplacian in the
        // precision numerically singular. Past this cap the pair is fused to ~1e-5 anyway.
        let cap = EDGE_PRECISION_RATIO * (self.data.xtx.diagonal().max() + 1.0 / kv);
        let mut inv_scale = DMatrix::zeros(self.data.edges.len(), p);
        for (e, &(i, j)) in self.data.edges.iter().enumerate() {
            let c = alpha * st.rho * self.weight(e, st.omega);
            for k in 0..p {
                let d = (st.theta[(i, k)] - st.theta[(j, k)]).abs();
                let w = if d > 0.0 {
                    sample_inverse_gaussian(c / d, c * c, &mut rng)?
                } else {
                    1.0 / sample_gamma(0.5, 0.5 * c * c, &mut rng)?
                };
                inv_scale[(e, k)] = w.min(cap);
            }
        }
        let dim = m * p;
        let mut prec = DMatrix::zeros(dim, dim);
        for k in 0..p {
            for l in 0..p {
                let xkl = self.data.xtx[(k, l)];
                for j in 0..m {
                    prec[(k * m + j, l * m + j)] += xkl;
                }
            }
            for j in 0..m {
                prec[(k * m + j, k * m + j)] += 1.0 / kv;
            }
            for (e, &(i, j)) in self.data.edges.iter().enumerate() {
                let w = inv_scale[(e, k)];
                let (a, b) = (k * m + i, k * m + j);
                prec[(a, a)] += w;
                prec[(b, b)] += w;
                prec[(a, b)] -= w;
                prec[(b, a)] -= w;
            }
        }
        let mut resid = st.z.clone();
        for (i, g) in st.intercept.iter().enumerate() {
            if *g != 0.0 {
                resid.row_mut(i).add_scalar_mut(-*g);
            }
        }
        let xr = self.data.x.transpose() * resid; // p x m
        let bv = self.adjoint(&st.v, st.omega);
        let lin = DVector::from_fn(dim, |idx, _| {
            let (k, j) = (idx / m, idx % m);
            xr[(k, j)] + (alpha - 1.0 / kv) * bv[(j, k)]
        });
        let current = DVector::from_fn(dim, |idx, _| st.theta[(idx % m, idx / m)]);
        let draw = draw_gaussian_blocked(prec, lin, &current, &mut self.rng(sweep, blocks::PRIMAL))?;
        for idx in 0..dim {
            self.state.theta[(idx % m, idx / m)] = draw[idx];
        }
        Ok(())
    }

    /// Truncated-normal draw of `v_ek` on `[-rho, rho]` given everything else.
    pub fn update_v(&mut self, e: usize, k: usize, beta: &mut DMatrix<f64>, rng: &mut ChaCha8Rng) -> Result<()> {
        let kv = self.config.hyper.kernel_variance;
        let st = &self.state;
        let (i, j) = self.data.edges[e];
        let w = self.weight(e, st.omega);
        let old = st.v[(e, k)];
        let bi = beta[(i, k)] - w * old;
        let bj = beta[(j, k)] + w * old;
        let d = st.theta[(i, k)] - st.theta[(j, k)];
        let mean = kv / (2.0 * w) * (self.alpha * d - (bi - bj) / kv);
        let sd = (kv / 2.0).sqrt() / w;
        let new = sample_truncated_normal(mean, sd, -st.rho, st.rho, rng)?;
        self.state.v[(e, k)] = new;
        beta[(i, k)] = bi + w * new;
        beta[(j, k)] = bj - w * new;
        Ok(())
    }

    fn update_duals(&mut self, rng: &mut ChaCha8Rng) -> Result<()> {
        let mut beta = &self.state.theta + self.adjoint(&self.state.v, self.state.omega);
        for e in 0..self.data.edges.len() {
            for k in 0..self.data.p() {
                self.update_v(e, k, &mut beta, rng)?;
            }
        }
        Ok(())
    }

    fn weighted_abs_diff(&self, cross_only: bool) -> (f64, f64) {
        // returns (sum w_e |d|, sum over cross edges of (rho |d| - v d))
        let st = &self.state;
        let mut total = 0.0;
        let mut cross_gap = 0.0;
        for (e, &(i, j)) in self.data.edges.iter().enumerate() {
            for k in 0..self.data.p() {
                let d = st.theta[(i, k)] - st.theta[(j, k)];
                if !cross_only {
                    total += self.weight(e, st.omega) * d.abs();
                }
                if self.data.cross[e] {
                    cross_gap += st.rho * d.abs() - st.v[(e, k)] * d;
                }
            }
        }
        (total, cross_gap)
    }

    /// Slice update of `log rho` above `max |v|`.
    pub fn update_rho(&mut self, rng: &mut ChaCha8Rng) -> Result<()> {
        let (a, b) = self.config.hyper.rho;
        let rate = self.alpha * self.weighted_abs_diff(false).0;
        let floor = self.state.v.amax();
        let target = move |eta: f64| {
            let r = eta.exp();
            -(a + 1.0) * eta - b / r + eta - rate * r
        };
        let eta = slice_sample_1d_tracked(target, self.state.rho.ln(), 1.0, (floor.ln(), f64::INFINITY), rng, &mut self.slice_rho)?;
        self.state.rho = eta.exp().max(floor);
        Ok(())
    }

    /// Rescale `(rho, v)` jointly with `v / rho` fixed, so `rho` is not held up by `max |v|`.
    pub fn update_rho_rescale(&mut self, rng: &mut ChaCha8Rng) -> Result<()> {
        let (a, b) = self.config.hyper.rho;
        let alpha = self.alpha;
        let kv = self.config.hyper.kernel_variance;
        let st = &self.state;
        let frac = &st.v / st.rho;
        let mut slack = 0.0;
        for (e, &(i, j)) in self.data.edges.iter().enumerate() {
            let w = self.weight(e, st.omega);
            for k in 0..self.data.p() {
                let d = st.theta[(i, k)] - st.theta[(j, k)];
                slack += w * (d.abs() - frac[(e, k)] * d);
            }
        }
        let bf = self.adjoint(&frac, st.omega);
        let (ff, ft, tt) = (bf.norm_squared(), bf.dot(&st.theta), st.theta.norm_squared());
        let dim = frac.len() as f64;
        let target = move |eta: f64| {
            let r = eta.exp();
            let kernel = (r * r * ff + 2.0 * r * ft + tt) / (2.0 * kv);
            -(a + 1.0) * eta - b / r + (dim + 1.0) * eta - alpha * r * slack - kernel
        };
        let eta = slice_sample_1d_tracked(target, st.rho.ln(), 1.0, (f64::NEG_INFINITY, f64::INFINITY), rng, &mut self.slice_rho)?;
        let r = eta.exp();
        self.state.v = frac.map(|f| (f * r).clamp(-r, r));
        self.state.rho = r;
        Ok(())
    }

    /// Slice update of the cross-department weight on `(0, 1)`.
    pub fn update_omega(&mut self, rng: &mut ChaCha8Rng) -> Result<()> {
        let (a, b) = self.config.hyper.omega;
        let alpha = self.alpha;
        let kv = self.config.hyper.kernel_variance;
        let cross_gap = self.weighted_abs_diff(true).1;
        let within = self.adjoint(&self.state.v, 0.0);
        let cross = self.adjoint(&self.state.v, 1.0) - &within;
        let theta_plus = &self.state.theta + within;
        let target = |w: f64| {
            let beta = &theta_plus + &cross * w;
            (a - 1.0) * w.ln() + (b - 1.0) * (-w).ln_1p() - alpha * w * cross_gap - beta.norm_squared() / (2.0 * kv)
        };
        self.state.omega = slice_sample_1d_tracked(target, self.state.omega, 0.25, (0.0, 1.0), rng, &mut self.slice_omega)?;
        Ok(())
    }

    fn update_intercepts(&mut self, rng: &mut ChaCha8Rng) -> Result<()> {
        let m = self.data.m() as f64;
        let xb = &self.data.x * self.state.theta.transpose();
        let prec = m + 1.0 / self.state.tau2;
        for i in 0..self.data.n() {
            let r: f64 = (0..self.data.m()).map(|j| self.state.z[(i, j)] - xb[(i, j)]).sum();
            self.state.intercept[i] = r / prec + std_normal(rng) / prec.sqrt();
        }
        let (a, b) = self.config.hyper.tau2;
        let ss = self.state.intercept.norm_squared();
        self.state.tau2 = sample_inverse_gamma(a + 0.5 * self.data.n() as f64, b + 0.5 * ss, rng)?;
        Ok(())
    }

    pub fn conditional(&self, target: ProbitTarget) -> Box<dyn Conditional + '_> {
        Box::new(ProbitProbe { sampler: self.clone(), target })
    }
}

impl GibbsModel for ProbitSampler {
    fn model_name(&self) -> &'static str {
        "fused-probit"
    }

    fn parameter_names(&self) -> Vec<String> {
        let mut names = indexed2("theta", self.data.m(), self.data.p());
        names.extend(indexed2("v", self.data.edges.len(), self.data.p()));
        names.extend(["rho", "omega"].map(String::from));
        if self.config.random_intercept {
            names.push("tau2".into());
        }
        names
    }

    fn sweep(&mut self, sweep: u64, warmup: bool) -> Result<()> {
        self.alpha = if warmup { self.annealed_alpha(sweep) } else { self.config.alpha };
        self.update_latents(&mut self.rng(sweep, blocks::LATENT))?;
        self.update_theta(sweep)?;
        self.update_duals(&mut self.rng(sweep, blocks::DUAL))?;
        let mut rng = self.rng(sweep, blocks::HYPER);
        self.update_rho(&mut rng)?;
        self.update_rho_rescale(&mut rng)?;
        self.update_omega(&mut rng)?;
        if self.config.random_intercept {
            self.update_intercepts(&mut self.rng(sweep, blocks::EXTRA))?;
        }
        Ok(())
    }

    fn record(&self, out: &mut Vec<f64>) {
        let st = &self.state;
        for m in [&st.theta, &st.v] {
            for i in 0..m.nrows() {
                out.extend(m.row(i).iter());
            }
        }
        out.extend([st.rho, st.omega]);
        if self.config.random_intercept {
            out.push(st.tau2);
        }
    }

    fn stats(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([
            ("rho_slice_evaluations".to_string(), self.slice_rho.mean_evaluations()),
            ("omega_slice_evaluations".to_string(), self.slice_omega.mean_evaluations()),
        ])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbitTarget {
    V(usize, usize),
    Rho,
    Omega,
}

struct ProbitProbe {
    sampler: ProbitSampler,
    target: ProbitTarget,
}

impl Conditional for ProbitProbe {
    fn label(&self) -> String {
        match self.target {
            ProbitTarget::V(e, k) => format!("v[{e},{k}]"),
            ProbitTarget::Rho => "rho".into(),
            ProbitTarget::Omega => "omega".into(),
        }
    }

    fn support(&self) -> (f64, f64) {
        let st = &self.sampler.state;
        match self.target {
            ProbitTarget::V(..) => (-st.rho, st.rho),
            ProbitTarget::Rho => (st.v.amax(), f64::INFINITY),
            ProbitTarget::Omega => (0.0, 1.0),
        }
    }

    fn current(&self) -> f64 {
        let st = &self.sampler.state;
        match self.target {
            ProbitTarget::V(e, k) => st.v[(e, k)],
            ProbitTarget::Rho => st.rho,
            ProbitTarget::Omega => st.omega,
        }
    }

    // Prior density from the priors module plus the hyperprior of the target.
    fn log_density(&self, x: f64) -> f64 {
        let st = &self.sampler.state;
        let cfg = &self.sampler.config;
        let (lo, hi) = self.support();
        if x < lo || x > hi || (self.target == ProbitTarget::Omega && (x <= 0.0 || x >= 1.0)) {
            return f64::NEG_INFINITY;
        }
        let mut v = st.v.clone();
        let (mut rho, mut omega) = (st.rho, st.omega);
        let mut extra = 0.0;
        match self.target {
            ProbitTarget::V(e, k) => v[(e, k)] = x,
            ProbitTarget::Rho => {
                rho = x;
                extra = log_inverse_gamma_kernel(x, cfg.hyper.rho.0, cfg.hyper.rho.1);
            }
            ProbitTarget::Omega => {
                omega = x;
                let (a, b) = cfg.hyper.omega;
                extra = (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln();
            }
        }
        let Ok(graph) = FusionGraph::from_taxonomy(&self.sampler.data.departments, omega) else {
            return f64::NEG_INFINITY;
        };
        let spec = GapPriorSpec {
            alpha: self.sampler.alpha,
            penalty: crate::gapcore::PenaltySpec::L1 { lambda: rho },
            kernel: BaseKernel::Gaussian(cfg.hyper.kernel_variance.sqrt()),
            hyper: BTreeMap::from([(hyper::RHO.to_string(), rho)]),
        };
        log_gap_prior_fused(&st.theta, &v, &graph, &spec).map_or(f64::NEG_INFINITY, |v| v.to_f64()) + extra
    }

    fn update(&mut self, rng: &mut ChaCha8Rng) -> Result<f64> {
        match self.target {
            ProbitTarget::V(e, k) => {
                let mut beta = &self.sampler.state.theta + self.sampler.adjoint(&self.sampler.state.v, self.sampler.state.omega);
                self.sampler.update_v(e, k, &mut beta, rng)?;
            }
            ProbitTarget::Rho => self.sampler.update_rho(rng)?,
            ProbitTarget::Omega => self.sampler.update_omega(rng)?,
        }
        Ok(self.current())
    }
}

/// Posterior draws of `(theta, v, rho, omega)` and `tau2` when the intercept is enabled.
pub fn gibbs_fused_probit(
    y: &DMatrix<f64>,
    x: &DMatrix<f64>,
    departments: &[usize],
    config: &SamplerConfig,
) -> Result<PosteriorSamples> {
    let data = ProbitData::new(y.clone(), x.clone(), departments.to_vec())?;
    run_chain(&mut ProbitSampler::new(data, config.clone())?, config)
}
