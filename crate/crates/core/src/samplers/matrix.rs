//! Low-rank plus sparse matrix smoothing under the factorized nuclear / l1 gap prior.
//!
//! Model: `Y_s = theta + noise`, `theta = A B^T`, duals `V1` (nuclear part, with
//! `lambda1 = |V1|_F`) and `V2` (`|V2_ij| <= lambda2`), Gaussian kernel on
//! `beta = theta + V1 + V2`. The l1 term `alpha lambda2 |theta_ij|` is carried by exponential
//! scale mixtures so factor rows have Gaussian conditionals.
//!
//! Sweep: rows of `A`, rows of `B`, then `(lambda2, scales)` as one block (the level is drawn
//! with the scales integrated out), `V2`, `V1`, `sigma2`.

use std::collections::BTreeMap;
use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;

use super::slice::{slice_sample_1d_tracked, SliceStats};
use super::sparse::INIT_SWEEP;
use super::variates::{
    log_inverse_gamma_kernel, sample_inverse_gamma, sample_inverse_gaussian, sample_truncated_normal, std_normal,
};
use super::{indexed2, run_chain, Conditional, GibbsModel, PosteriorSamples, SamplerConfig};
use crate::error::{GapError, Result};
use crate::linalg::sample_gaussian_precision;
use crate::priors::{hyper, log_gap_prior_nuclear_sparse, BaseKernel, GapPriorSpec};
use crate::rng::{blocks, stream};

/// Replicated noisy observations of one matrix, reduced to sufficient statistics.
#[derive(Clone, Debug)]
pub struct MatrixData {
    pub replicates: usize,
    pub mean: DMatrix<f64>,
    /// `sum_s |Y_s - Ybar|_F^2`.
    pub within_ss: f64,
}

impl MatrixData {
    pub fn from_stack(stack: &[DMatrix<f64>]) -> Result<Self> {
        let first = stack.first().ok_or_else(|| GapError::InvalidParameter("empty replicate stack".into()))?;
        let shape = first.shape();
        if stack.iter().any(|m| m.shape() != shape) {
            return Err(GapError::Dimension("replicates differ in shape".into()));
        }
        let s = stack.len();
        let mut mean = DMatrix::zeros(shape.0, shape.1);
        for m in stack {
            mean += m;
        }
        mean /= s as f64;
        let within_ss = stack.iter().map(|m| (m - &mean).norm_squared()).sum();
        Ok(MatrixData { replicates: s, mean, within_ss })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.mean.shape()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixState {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub v1: DMatrix<f64>,
    pub v2: DMatrix<f64>,
    /// Exponential mixing variances of the l1 term.
    pub scales: DMatrix<f64>,
    pub lambda2: f64,
    pub sigma2: f64,
}

impl MatrixState {
    pub fn theta(&self) -> DMatrix<f64> {
        &self.a * self.b.transpose()
    }

    pub fn lambda1(&self) -> f64 {
        self.v1.norm()
    }

    pub fn gap(&self) -> f64 {
        let theta = self.theta();
        let l1: f64 = theta.iter().map(|x| x.abs()).sum();
        0.5 * self.lambda1() * (self.a.norm_squared() + self.b.norm_squared()) + self.lambda2 * l1
            - (&self.v1 + &self.v2).dot(&theta)
    }
}

#[derive(Clone, Debug)]
pub struct MatrixSampler {
    data: MatrixData,
    config: SamplerConfig,
    pub state: MatrixState,
    v1_width: DMatrix<f64>,
    v1_step: DMatrix<f64>,
    slice_v1: SliceStats,
    slice_lambda2: SliceStats,
}

impl MatrixSampler {
    pub fn new(data: MatrixData, config: SamplerConfig) -> Result<Self> {
        config.validate()?;
        let (p1, p2) = data.shape();
        let r = config.rank;
        if r < 1 || r > p1.min(p2) {
            return Err(GapError::InvalidParameter(format!("rank {r} must lie in 1..={}", p1.min(p2))));
        }
        let mut rng = stream(config.seed, config.chain, INIT_SWEEP, blocks::INIT);
        let sd = 0.1 * config.hyper.kernel_variance.sqrt();
        let a = DMatrix::from_fn(p1, r, |_, _| sd * std_normal(&mut rng));
        let b = DMatrix::from_fn(p2, r, |_, _| sd * std_normal(&mut rng));
        let n = (data.replicates * p1 * p2) as f64;
        let var = (data.within_ss + data.replicates as f64 * data.mean.norm_squared()) / n;
        let state = MatrixState {
            a,
            b,
            v1: DMatrix::zeros(p1, p2),
            v2: DMatrix::zeros(p1, p2),
            scales: DMatrix::from_element(p1, p2, 1.0),
            lambda2: 1.0,
            sigma2: if var > 0.0 { var } else { 1.0 },
        };
        Ok(MatrixSampler {
            data,
            config,
            state,
            v1_width: DMatrix::from_element(p1, p2, 1.0),
            v1_step: DMatrix::zeros(p1, p2),
            slice_v1: SliceStats::default(),
            slice_lambda2: SliceStats::default(),
        })
    }

    fn rng(&self, sweep: u64, block: u64) -> ChaCha8Rng {
        stream(self.config.seed, self.config.chain, sweep, block)
    }

    fn prior_spec(&self, lambda2: f64) -> GapPriorSpec {
        GapPriorSpec {
            alpha: self.config.alpha,
            penalty: crate::gapcore::PenaltySpec::L1 { lambda: lambda2 },
            kernel: BaseKernel::Gaussian(self.config.hyper.kernel_variance.sqrt()),
            hyper: BTreeMap::from([(hyper::LAMBDA2.to_string(), lambda2)]),
        }
    }

    /// Per-entry precision and linear coefficients of `theta_ij` in the factor conditionals.
    fn entry_terms(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let st = &self.state;
        let s = self.data.replicates as f64;
        let kv = self.config.hyper.kernel_variance;
        let alpha = self.config.alpha;
        let u = &st.v1 + &st.v2;
        let q = st.scales.map(|sc| s / st.sigma2 + 1.0 / kv + 1.0 / sc);
        let l = DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| {
            s * self.data.mean[(i, j)] / st.sigma2 - u[(i, j)] / kv + alpha * u[(i, j)]
        });
        (q, l)
    }

    fn update_factors(&mut self, sweep: u64) -> Result<()> {
        let ridge = self.config.alpha * self.state.lambda1();
        let (q, l) = self.entry_terms();
        let r = self.config.rank;
        let mut rng = self.rng(sweep, blocks::PRIMAL);
        let (p1, p2) = self.data.shape();
        for i in 0..p1 {
            let b = &self.state.b;
            let mut prec = DMatrix::from_diagonal_element(r, r, ridge);
            let mut lin = DVector::zeros(r);
            for j in 0..p2 {
                let bj = b.row(j).transpose();
                prec += &bj * bj.transpose() * q[(i, j)];
                lin += bj * l[(i, j)];
            }
            let row = sample_gaussian_precision(prec, &lin, &mut rng)
                .ok_or_else(|| GapError::Numeric(format!("row {i} of A: conditional precision not positive definite")))?;
            self.state.a.set_row(i, &row.transpose());
        }
        let mut rng = self.rng(sweep, blocks::EXTRA);
        for j in 0..p2 {
            let a = &self.state.a;
            let mut prec = DMatrix::from_diagonal_element(r, r, ridge);
            let mut lin = DVector::zeros(r);
            for i in 0..p1 {
                let ai = a.row(i).transpose();
                prec += &ai * ai.transpose() * q[(i, j)];
                lin += ai * l[(i, j)];
            }
            let row = sample_gaussian_precision(prec, &lin, &mut rng)
                .ok_or_else(|| GapError::Numeric(format!("row {j} of B: conditional precision not positive definite")))?;
            self.state.b.set_row(j, &row.transpose());
        }
        Ok(())
    }

    /// Slice update of `log lambda2` above `max |V2|`, with the mixing scales integrated out.
    pub fn update_lambda2(&mut self, rng: &mut ChaCha8Rng) -> Result<()> {
        let (a, b) = self.config.hyper.lambda;
        let rate = self.config.alpha * self.state.theta().iter().map(|x| x.abs()).sum::<f64>();
        let floor = self.state.v2.amax();
        let target = move |eta: f64| {
            let l = eta.exp();
            -(a + 1.0) * eta - b / l + eta - rate * l
        };
        let eta = slice_sample_1d_tracked(
            target,
            self.state.lambda2.ln(),
            1.0,
            (floor.ln(), f64::INFINITY),
            rng,
            &mut self.slice_lambda2,
        )?;
        self.state.lambda2 = eta.exp().max(floor);
        Ok(())
    }

    /// Rescale `(lambda2, V2)` jointly with `V2 / lambda2` fixed; see the sparse sampler for why.
    pub fn update_lambda2_rescale(&mut self, rng: &mut ChaCha8Rng) -> Result<()> {
        let (a, b) = self.config.hyper.lambda;
        let alpha = self.config.alpha;
        let kv = self.config.hyper.kernel_variance;
        let st = &self.state;
        let theta = st.theta();
        let frac = &st.v2 / st.lambda2;
        let slack = theta.iter().map(|t| t.abs()).sum::<f64>() - frac.dot(&theta);
        let base = &theta + &st.v1;
        let (ff, fb, bb) = (frac.norm_squared(), frac.dot(&base), base.norm_squared());
        let dim = frac.len() as f64;
        let target = move |eta: f64| {
            let l = eta.exp();
            let kernel = (l * l * ff + 2.0 * l * fb + bb) / (2.0 * kv);
            -(a + 1.0) * eta - b / l + (dim + 1.0) * eta - alpha * l * slack - kernel
        };
        let eta = slice_sample_1d_tracked(
            target,
            st.lambda2.ln(),
            1.0,
            (f64::NEG_INFINITY, f64::INFINITY),
            rng,
            &mut self.slice_lambda2,
        )?;
        let l = eta.exp();
        self.state.v2 = frac.map(|f| (f * l).clamp(-l, l));
        self.state.lambda2 = l;
        Ok(())
    }

    fn update_scales(&mut self, rng: &mut ChaCha8Rng) -> Result<()> {
        let c = self.config.alpha * self.state.lambda2;
        let theta = self.state.theta();
        for (sc, t) in self.state.scales.iter_mut().zip(theta.iter()) {
            let t = t.abs();
            *sc = if t > 0.0 {
                1.0 / sample_inverse_gaussian(c / t, c * c, rng)?
            } else {
                super::variates::sample_gamma(0.5, 0.5 * c * c, rng)?
            };
        }
        Ok(())
    }

    fn v2_update_at(&mut self, i: usize, j: usize, theta: f64, rng: &mut ChaCha8Rng) -> Result<()> {
        let kv = self.config.hyper.kernel_variance;
        let st = &self.state;
        let mean = kv * self.config.alpha * theta - (theta + st.v1[(i, j)]);
        self.state.v2[(i, j)] = sample_truncated_normal(mean, kv.sqrt(), -st.lambda2, st.lambda2, rng)?;
        Ok(())
    }

    fn v1_update_at(&mut self, i: usize, j: usize, theta: f64, k: f64, sumsq: &mut f64, rng: &mut ChaCha8Rng) -> Result<()> {
        let kv = self.config.hyper.kernel_variance;
        let alpha = self.config.alpha;
        let x0 = self.state.v1[(i, j)];
        let rest = (*sumsq - x0 * x0).max(0.0);
        let v2 = self.state.v2[(i, j)];
        let target = move |x: f64| {
            let anchor = theta + x + v2;
            -0.5 * alpha * k * (rest + x * x).sqrt() + alpha * theta * x - anchor * anchor / (2.0 * kv)
        };
        let w = self.v1_width[(i, j)];
        let x = slice_sample_1d_tracked(target, x0, w, (f64::NEG_INFINITY, f64::INFINITY), rng, &mut self.slice_v1)?;
        self.state.v1[(i, j)] = x;
        self.v1_step[(i, j)] = (x - x0).abs();
        *sumsq = rest + x * x;
        Ok(())
    }

    fn update_duals(&mut self, sweep: u64, warmup: bool) -> Result<()> {
        let theta = self.state.theta();
        let (p1, p2) = self.data.shape();
        let mut rng = self.rng(sweep, blocks::DUAL);
        for j in 0..p2 {
            for i in 0..p1 {
                self.v2_update_at(i, j, theta[(i, j)], &mut rng)?;
            }
        }
        let k = self.state.a.norm_squared() + self.state.b.norm_squared();
        let mut sumsq = self.state.v1.norm_squared();
        let mut rng = self.rng(sweep, blocks::LATENT);
        for j in 0..p2 {
            for i in 0..p1 {
                self.v1_update_at(i, j, theta[(i, j)], k, &mut sumsq, &mut rng)?;
            }
        }
        if warmup {
            // track a few multiples of the typical move so brackets stay near the slice size
            for (w, st) in self.v1_width.iter_mut().zip(self.v1_step.iter()) {
                *w = (0.8 * *w + 0.2 * 3.0 * st).clamp(1e-10, 1e3);
            }
        }
        Ok(())
    }

    /// Conjugate draw from the pooled residuals of all replicates.
    pub fn update_sigma2(&mut self, rng: &mut ChaCha8Rng) -> Result<()> {
        let (a, b) = self.config.hyper.sigma2;
        let (p1, p2) = self.data.shape();
        let s = self.data.replicates as f64;
        let rss = self.data.within_ss + s * (&self.data.mean - self.state.theta()).norm_squared();
        self.state.sigma2 = sample_inverse_gamma(a + 0.5 * s * (p1 * p2) as f64, b + 0.5 * rss, rng)?;
        Ok(())
    }

    pub fn conditional(&self, target: MatrixTarget) -> Box<dyn Conditional + '_> {
        Box::new(MatrixProbe { sampler: self.clone(), target })
    }
}

impl GibbsModel for MatrixSampler {
    fn model_name(&self) -> &'static str {
        "matrix-smoothing"
    }

    fn parameter_names(&self) -> Vec<String> {
        let (p1, p2) = self.data.shape();
        let r = self.config.rank;
        let mut names = indexed2("A", p1, r);
        names.extend(indexed2("B", p2, r));
        names.extend(["lambda1", "lambda2", "sigma2", "gap"].map(String::from));
        if self.config.store_duals {
            names.extend(indexed2("V1", p1, p2));
            names.extend(indexed2("V2", p1, p2));
        }
        names
    }

    fn sweep(&mut self, sweep: u64, warmup: bool) -> Result<()> {
        self.update_factors(sweep)?;
        let mut rng = self.rng(sweep, blocks::HYPER);
        self.update_lambda2(&mut rng)?;
        self.update_lambda2_rescale(&mut rng)?;
        self.update_scales(&mut self.rng(sweep, blocks::SCALES))?;
        self.update_duals(sweep, warmup)?;
        self.update_sigma2(&mut self.rng(sweep, blocks::NOISE))
    }

    fn record(&self, out: &mut Vec<f64>) {
        let st = &self.state;
        // row-major to match the column labels
        for m in [&st.a, &st.b] {
            for i in 0..m.nrows() {
                out.extend(m.row(i).iter());
            }
        }
        out.extend([st.lambda1(), st.lambda2, st.sigma2, st.gap()]);
        if self.config.store_duals {
            for m in [&st.v1, &st.v2] {
                for i in 0..m.nrows() {
                    out.extend(m.row(i).iter());
                }
            }
        }
    }

    fn stats(&self) -> BTreeMap<String, f64> {
        BTreeMap::from([
            ("v1_slice_evaluations".to_string(), self.slice_v1.mean_evaluations()),
            ("lambda2_slice_evaluations".to_string(), self.slice_lambda2.mean_evaluations()),
        ])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixTarget {
    V1(usize, usize),
    V2(usize, usize),
    Lambda2,
}

struct MatrixProbe {
    sampler: MatrixSampler,
    target: MatrixTarget,
}

impl Conditional for MatrixProbe {
    fn label(&self) -> String {
        match self.target {
            MatrixTarget::V1(i, j) => format!("V1[{i},{j}]"),
            MatrixTarget::V2(i, j) => format!("V2[{i},{j}]"),
            MatrixTarget::Lambda2 => "lambda2".into(),
        }
    }

    fn support(&self) -> (f64, f64) {
        let st = &self.sampler.state;
        match self.target {
            MatrixTarget::V1(..) => (f64::NEG_INFINITY, f64::INFINITY),
            MatrixTarget::V2(..) => (-st.lambda2, st.lambda2),
            MatrixTarget::Lambda2 => (st.v2.amax(), f64::INFINITY),
        }
    }

    fn current(&self) -> f64 {
        let st = &self.sampler.state;
        match self.target {
            MatrixTarget::V1(i, j) => st.v1[(i, j)],
            MatrixTarget::V2(i, j) => st.v2[(i, j)],
            MatrixTarget::Lambda2 => st.lambda2,
        }
    }

    // Full prior density from the priors module, plus the lambda2 hyperprior.
    fn log_density(&self, x: f64) -> f64 {
        let st = &self.sampler.state;
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return f64::NEG_INFINITY;
        }
        let mut v1 = st.v1.clone();
        let mut v2 = st.v2.clone();
        let mut lambda2 = st.lambda2;
        let mut extra = 0.0;
        match self.target {
            MatrixTarget::V1(i, j) => v1[(i, j)] = x,
            MatrixTarget::V2(i, j) => v2[(i, j)] = x,
            MatrixTarget::Lambda2 => {
                lambda2 = x;
                let (a, b) = self.sampler.config.hyper.lambda;
                extra = log_inverse_gamma_kernel(x, a, b);
            }
        }
        let spec = self.sampler.prior_spec(lambda2);
        log_gap_prior_nuclear_sparse(&st.a, &st.b, &v1, &v2, &spec).map_or(f64::NEG_INFINITY, |v| v.to_f64()) + extra
    }

    fn update(&mut self, rng: &mut ChaCha8Rng) -> Result<f64> {
        let theta = self.sampler.state.theta();
        match self.target {
            MatrixTarget::V1(i, j) => {
                let k = self.sampler.state.a.norm_squared() + self.sampler.state.b.norm_squared();
                let mut sumsq = self.sampler.state.v1.norm_squared();
                self.sampler.v1_update_at(i, j, theta[(i, j)], k, &mut sumsq, rng)?;
            }
            MatrixTarget::V2(i, j) => self.sampler.v2_update_at(i, j, theta[(i, j)], rng)?,
            MatrixTarget::Lambda2 => self.sampler.update_lambda2(rng)?,
        }
        Ok(self.current())
    }
}

/// Posterior draws of `(A, B, lambda1, lambda2, sigma2)`; the duals only when
/// `config.store_duals` is set.
pub fn gibbs_matrix_smoothing(stack: &[DMatrix<f64>], config: &SamplerConfig) -> Result<PosteriorSamples> {
    let data = MatrixData::from_stack(stack)?;
    let mut sampler = MatrixSampler::new(data, config.clone())?;
    run_chain(&mut sampler, config)
}

/// Per-draw `A` and `B` factor matrices.
pub type FactorDraws = (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>);

/// Rebuild per-draw factor matrices from stored `A[i,k]` and `B[j,k]` columns.
pub fn factor_draws(samples: &PosteriorSamples, p1: usize, p2: usize, r: usize) -> Result<FactorDraws> {
    let index: HashMap<&str, usize> = samples.names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let a0 = *index.get("A[0,0]").ok_or_else(|| GapError::InvalidParameter("no A columns".into()))?;
    let b0 = *index.get("B[0,0]").ok_or_else(|| GapError::InvalidParameter("no B columns".into()))?;
    if a0 + p1 * r != b0 || samples.ncols() < b0 + p2 * r {
        return Err(GapError::Dimension("factor columns do not match the requested shapes".into()));
    }
    let mut a_draws = Vec::with_capacity(samples.nrows());
    let mut b_draws = Vec::with_capacity(samples.nrows());
    for d in 0..samples.nrows() {
        let row = samples.row(d);
        a_draws.push(DMatrix::from_row_slice(p1, r, &row[a0..a0 + p1 * r]));
        b_draws.push(DMatrix::from_row_slice(p2, r, &row[b0..b0 + p2 * r]));
    }
    Ok((a_draws, b_draws))
}
