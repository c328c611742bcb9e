//! Randomized certification suites.
//!
//! Each suite draws random problem instances from a seeded stream, evaluates a gap function
//! and compares it with the matching reference solver from [`crate::oracles`]. The suites
//! are shared by the test harness and the `gap-check` command of the CLI, so both report
//! the same numbers for the same seed.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::Result;
use crate::extended::ExtReal;
use crate::gapcore::{
    fenchel_young_gap, fused_duality_gap, generalized_l1_gap, kl_divergence, kl_gap, l1_gap,
    proximal_duality_gap, strong_convexity_radius, variational_additive_gap,
    variational_nuclear_gap, NormKind, NuclearDual, PenaltySpec, SimplexConstraint, SimplexPoint,
};
use crate::linalg::singular_values;
use crate::oracles::{kl_project_detailed, prox_fused, soft_threshold, svt};
use crate::rng::{blocks, stream};
use crate::samplers::{
    probe_conditional, std_normal, GapSparseSampler, GibbsModel, MatrixData, MatrixSampler, MatrixTarget,
    ProbeOutcome, ProbitData, ProbitSampler, ProbitTarget, RegressionData, SamplerConfig, SparseTarget,
};

/// Outcome of one suite. `worst` is the largest observed violation of the certified
/// inequality, expressed so that the suite passes when `worst <= limit`.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub cases: usize,
    pub worst: f64,
    pub limit: f64,
    /// Instances whose gap came out infinite although the generator aimed for feasibility.
    pub infinite: usize,
    pub seconds: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.worst <= self.limit && self.infinite == 0
    }
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn normal_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Log-uniform scale in `[lo, hi]`.
fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

fn clamp_box(u: &DVector<f64>, lambda: f64) -> DVector<f64> {
    u.map(|x| x.clamp(-lambda, lambda))
}

/// A random `d x p` analysis operator: first differences, a random graph incidence or a
/// dense Gaussian matrix.
fn random_operator(rng: &mut ChaCha8Rng, p: usize) -> DMatrix<f64> {
    match rng.random_range(0..3) {
        0 => {
            let mut d = DMatrix::zeros(p - 1, p);
            for i in 0..p - 1 {
                d[(i, i)] = -1.0;
                d[(i, i + 1)] = 1.0;
            }
            d
        }
        1 => {
            let edges = rng.random_range(1..=p + 2);
            let mut d = DMatrix::zeros(edges, p);
            for e in 0..edges {
                let a = rng.random_range(0..p);
                let mut b = rng.random_range(0..p - 1);
                if b >= a {
                    b += 1;
                }
                d[(e, a)] = 1.0;
                d[(e, b)] = -1.0;
            }
            d
        }
        _ => {
            let rows = rng.random_range(1..=p + 2);
            normal_mat(rng, rows, p)
        }
    }
}

/// Scale `u` so that `norm(u) <= bound`, landing at a random fraction of the bound.
fn shrink_into(rng: &mut ChaCha8Rng, u: DVector<f64>, current: f64, bound: f64) -> DVector<f64> {
    if current == 0.0 {
        return u;
    }
    let frac: f64 = rng.random_range(0.0..1.0);
    u * (frac * bound / current)
}

fn random_norm(rng: &mut ChaCha8Rng) -> NormKind {
    match rng.random_range(0..3) {
        0 => NormKind::L1,
        1 => NormKind::L2,
        _ => NormKind::LInf,
    }
}

/// A random point inside the ball `{z : norm(z) <= r}`.
fn point_in_ball(rng: &mut ChaCha8Rng, norm: NormKind, r: f64, p: usize) -> DVector<f64> {
    let z = normal_vec(rng, p);
    let n = norm.eval(z.as_slice());
    shrink_into(rng, z, n, r)
}

fn random_simplex(rng: &mut ChaCha8Rng, p: usize) -> Result<SimplexPoint> {
    // Exponential weights give a uniform draw on the simplex; the floor keeps it interior.
    let w: Vec<f64> = (0..p).map(|_| -rng.random_range(1e-12f64..1.0).ln() + 1e-3).collect();
    SimplexPoint::normalized(w)
}

/// One gap evaluation per instance, cycling through every penalty kind and gap flavour.
fn one_nonnegativity_case(rng: &mut ChaCha8Rng, case: usize) -> Result<ExtReal> {
    let p = rng.random_range(2..=8);
    let lambda = log_uniform(rng, 0.01, 10.0);
    match case % 12 {
        0 => {
            let spec = PenaltySpec::l1(lambda)?;
            let theta = normal_vec(rng, p) * log_uniform(rng, 0.01, 10.0);
            let u = clamp_box(&(normal_vec(rng, p) * lambda), lambda);
            fenchel_young_gap(&spec, &theta, &u)
        }
        1 => {
            let theta = normal_vec(rng, p);
            let mags = DVector::from_fn(p, |_, _| rng.random_range(0.0..=lambda));
            let u = theta.zip_map(&mags, |t, m| if t >= 0.0 { m } else { -m });
            l1_gap(lambda, &theta, &u)
        }
        2 => {
            let spec = PenaltySpec::l1(lambda)?;
            let beta = normal_vec(rng, p) * 3.0;
            let z = normal_vec(rng, p) * 3.0;
            let u = clamp_box(&(normal_vec(rng, p) * lambda), lambda);
            proximal_duality_gap(&spec, &beta, &z, &u)
        }
        3 => {
            let d = random_operator(rng, p);
            let beta = normal_vec(rng, p) * 3.0;
            let z = normal_vec(rng, p) * 3.0;
            let u = clamp_box(&(normal_vec(rng, d.nrows()) * lambda), lambda);
            fused_duality_gap(&d, lambda, &beta, &z, &u)
        }
        4 => {
            let d = random_operator(rng, p);
            let theta = normal_vec(rng, p);
            let dt = &d * &theta;
            let u = dt.map(|x| x.signum() * rng.random_range(0.0..=lambda));
            generalized_l1_gap(&d, lambda, &theta, &u)
        }
        5 => {
            let norm = random_norm(rng);
            let spec = PenaltySpec::norm_ball(norm, lambda)?;
            let theta = point_in_ball(rng, norm, lambda, p);
            let u = normal_vec(rng, p) * log_uniform(rng, 0.01, 10.0);
            fenchel_young_gap(&spec, &theta, &u)
        }
        6 => {
            // disjoint groups covering 0..p
            let mut groups: Vec<Vec<usize>> = Vec::new();
            let mut start = 0;
            while start < p {
                let len = rng.random_range(1..=(p - start).min(3));
                groups.push((start..start + len).collect());
                start += len;
            }
            let radii: Vec<f64> = groups.iter().map(|_| log_uniform(rng, 0.1, 5.0)).collect();
            let mut theta = normal_vec(rng, p);
            for (g, &r) in groups.iter().zip(&radii) {
                let n = g.iter().map(|&i| theta[i] * theta[i]).sum::<f64>().sqrt();
                let frac: f64 = rng.random_range(0.0..1.0);
                for &i in g {
                    theta[i] *= frac * r / n.max(1e-300);
                }
            }
            let spec = PenaltySpec::group_l2(p, groups, radii)?;
            let u = normal_vec(rng, p) * log_uniform(rng, 0.01, 10.0);
            fenchel_young_gap(&spec, &theta, &u)
        }
        7 => {
            let rows = rng.random_range(1..=5);
            let cols = rng.random_range(1..=5);
            let spec = PenaltySpec::nuclear(lambda, rows, cols)?;
            let theta = normal_mat(rng, rows, cols);
            let um = normal_mat(rng, rows, cols);
            let op = singular_values(&um)?.first().copied().unwrap_or(0.0);
            // stay clear of the power-iteration feasibility margin
            let scale = if op > 0.0 { rng.random_range(0.0..0.999) * lambda / op } else { 0.0 };
            let u = DVector::from_column_slice((um * scale).as_slice());
            fenchel_young_gap(&spec, &DVector::from_column_slice(theta.as_slice()), &u)
        }
        8 => {
            let m = normal_mat(rng, p, p);
            let q = &m * m.transpose() + DMatrix::identity(p, p) * 0.1;
            let spec = PenaltySpec::quadratic(q)?;
            fenchel_young_gap(&spec, &normal_vec(rng, p), &normal_vec(rng, p))
        }
        9 => {
            let n1 = random_norm(rng);
            let n2 = random_norm(rng);
            let r1 = log_uniform(rng, 0.1, 5.0);
            let r2 = log_uniform(rng, 0.1, 5.0);
            let parts = vec![PenaltySpec::norm_ball(n1, r1)?, PenaltySpec::norm_ball(n2, r2)?];
            // a point inside both balls: shrink until it fits the tighter one
            let mut z = point_in_ball(rng, n1, r1, p);
            let n2z = n2.eval(z.as_slice());
            if n2z > r2 {
                z *= r2 / n2z * 0.999;
            }
            let v = vec![normal_vec(rng, p), normal_vec(rng, p)];
            let beta = &z + &v[0] + &v[1];
            // recompute z from beta so the consistency check sees exact round-off
            let z = &beta - &v[0] - &v[1];
            variational_additive_gap(&parts, &z, &v, &beta)
        }
        10 => {
            let beta = random_simplex(rng, p)?;
            let z = random_simplex(rng, p)?;
            let a = normal_vec(rng, p);
            let b = a.dot(z.as_vector()) + rng.random_range(0.0..1.0);
            let nu = log_uniform(rng, 1e-3, 10.0);
            kl_gap(&beta, &z, &(&a * nu), &SimplexConstraint::HalfSpace { a, b })
        }
        _ => {
            let p1 = rng.random_range(1..=5);
            let p2 = rng.random_range(1..=5);
            let r = rng.random_range(1..=3);
            let a = normal_mat(rng, p1, r);
            let b = normal_mat(rng, p2, r);
            let lambda2 = log_uniform(rng, 0.01, 5.0);
            let v1 = normal_mat(rng, p1, p2);
            let v1 = &v1 * (rng.random_range(0.0..1.0) * lambda / v1.norm());
            let v2 = normal_mat(rng, p1, p2).map(|x| x.clamp(-lambda2, lambda2));
            variational_nuclear_gap(&a, &b, &NuclearDual::Pair { v1, v2 }, lambda, lambda2)
        }
    }
}

/// Weak duality: every gap evaluated at feasible inputs is nonnegative.
pub fn nonnegativity(seed: u64, cases: usize) -> Result<SuiteReport> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut infinite = 0;
    for case in 0..cases {
        match one_nonnegativity_case(&mut rng, case)? {
            ExtReal::Finite(g) => worst = worst.max(-g),
            _ => infinite += 1,
        }
    }
    Ok(SuiteReport {
        name: "gap nonnegativity".into(),
        cases,
        worst,
        limit: 1e-10,
        infinite,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Distance certificate: a feasible primal-dual pair `(z, u)` lies within
/// `sqrt(2 gap)` of the exact proximal point.
///
/// Pairs are random perturbations of the oracle pair at log-uniform scales, so the bound is
/// probed both far from and very close to the optimum. `admm_tol` is passed to the fused
/// solver for the generalized-l1 half of the suite.
pub fn distance_certificate(seed: u64, cases_per_kind: usize, admm_tol: f64) -> Result<SuiteReport> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut infinite = 0;
    let mut record = |dist: f64, gap: ExtReal| -> Result<()> {
        match gap {
            ExtReal::Finite(g) => {
                let radius = strong_convexity_radius(g.max(0.0), 1.0)?;
                worst = worst.max(dist - radius);
            }
            _ => infinite += 1,
        }
        Ok(())
    };
    for _ in 0..cases_per_kind {
        let p = rng.random_range(2..=10);
        let lambda = log_uniform(&mut rng, 0.05, 5.0);
        let beta = normal_vec(&mut rng, p) * 3.0;
        let zhat = soft_threshold(&beta, lambda);
        let uhat = &beta - &zhat;
        let z = &zhat + normal_vec(&mut rng, p) * log_uniform(&mut rng, 1e-6, 1.0);
        let u = clamp_box(&(&uhat + normal_vec(&mut rng, p) * log_uniform(&mut rng, 1e-6, 1.0)), lambda);
        let spec = PenaltySpec::l1(lambda)?;
        record((&z - &zhat).norm(), proximal_duality_gap(&spec, &beta, &z, &u)?)?;
    }
    for _ in 0..cases_per_kind {
        let p = rng.random_range(2..=8);
        let lambda = log_uniform(&mut rng, 0.05, 5.0);
        let d = random_operator(&mut rng, p);
        let beta = normal_vec(&mut rng, p) * 3.0;
        let oracle = prox_fused(&beta, &d, lambda, admm_tol)?;
        let uhat = oracle.dual.clone().unwrap_or_else(|| DVector::zeros(d.nrows()));
        let z = &oracle.solution + normal_vec(&mut rng, p) * log_uniform(&mut rng, 1e-6, 1.0);
        let noise = normal_vec(&mut rng, d.nrows()) * log_uniform(&mut rng, 1e-6, 1.0);
        let u = clamp_box(&(&uhat + noise), lambda);
        record((&z - &oracle.solution).norm(), fused_duality_gap(&d, lambda, &beta, &z, &u)?)?;
    }
    Ok(SuiteReport {
        name: "distance certificate".into(),
        cases: 2 * cases_per_kind,
        worst,
        limit: 1e-6,
        infinite,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// KL certificate: `KL(z || z_hat) <= kl_gap(beta, z, u)` for the KL projection `z_hat` onto
/// a half-space intersected with the simplex, any feasible `z` and any dual `u = nu a`.
pub fn kl_certificate(seed: u64, cases: usize) -> Result<SuiteReport> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut infinite = 0;
    for _ in 0..cases {
        let p = rng.random_range(2..=10);
        let beta = random_simplex(&mut rng, p)?;
        let a = normal_vec(&mut rng, p);
        // put the constraint level strictly between min a and a^T beta so it binds
        let amin = a.min();
        let ab = a.dot(beta.as_vector());
        let b = amin + rng.random_range(0.05..1.0) * (ab - amin);
        let proj = kl_project_detailed(&beta, &a, b, 1e-12)?;
        let zhat = proj.point;
        // feasible z: mix the projection with the minimizing vertex of a^T z
        let (imin, _) = a.argmin();
        let mut z = random_simplex(&mut rng, p)?.as_vector().clone();
        if a.dot(&z) > b {
            let mut vertex = DVector::zeros(p);
            vertex[imin] = 1.0;
            let az = a.dot(&z);
            let t = (az - b) / (az - amin);
            z = &z * (1.0 - t) + vertex * t;
        }
        let z = SimplexPoint::normalized(z.iter().map(|x| x.max(0.0)).collect())?;
        let nu = proj.multiplier * log_uniform(&mut rng, 0.1, 10.0);
        let constraint = SimplexConstraint::HalfSpace { a: a.clone(), b };
        let gap = kl_gap(&beta, &z, &(&a * nu), &constraint)?;
        let kl = kl_divergence(&z, &zhat)?;
        match (gap, kl) {
            (ExtReal::Finite(g), ExtReal::Finite(k)) => worst = worst.max(k - g),
            _ => infinite += 1,
        }
    }
    Ok(SuiteReport {
        name: "KL certificate".into(),
        cases,
        worst,
        limit: 1e-6,
        infinite,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Gap at the oracle optimum, split by how the optimum was computed.
#[derive(Clone, Debug, Serialize)]
pub struct ZeroGapReport {
    pub closed_form: SuiteReport,
    pub iterative: SuiteReport,
}

impl ZeroGapReport {
    pub fn passed(&self) -> bool {
        self.closed_form.passed() && self.iterative.passed()
    }
}

/// Zero gap at the optimum: soft thresholding and singular-value thresholding give
/// gaps at round-off level; the ADMM solution with its multiplier gives at most `10 tol`.
pub fn zero_gap_at_optimum(seed: u64, cases: usize, admm_tol: f64) -> Result<ZeroGapReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut closed = (f64::NEG_INFINITY, 0usize, 0usize, 0.0);
    let mut iter = (f64::NEG_INFINITY, 0usize, 0usize, 0.0);
    for case in 0..cases {
        let lambda = log_uniform(&mut rng, 0.05, 5.0);
        let t0 = Instant::now();
        match case % 3 {
            0 => {
                let p = rng.random_range(1..=20);
                let beta = normal_vec(&mut rng, p) * 3.0;
                let zhat = soft_threshold(&beta, lambda);
                let gap = fenchel_young_gap(&PenaltySpec::l1(lambda)?, &zhat, &(&beta - &zhat))?;
                tally(&mut closed, gap, t0);
            }
            1 => {
                let rows = rng.random_range(1..=6);
                let cols = rng.random_range(1..=6);
                let beta = normal_mat(&mut rng, rows, cols) * 3.0;
                let zhat = svt(&beta, lambda)?;
                let spec = PenaltySpec::nuclear(lambda, rows, cols)?;
                let z = DVector::from_column_slice(zhat.as_slice());
                let u = DVector::from_column_slice((&beta - &zhat).as_slice());
                tally(&mut closed, fenchel_young_gap(&spec, &z, &u)?, t0);
            }
            _ => {
                let p = rng.random_range(2..=8);
                let d = random_operator(&mut rng, p);
                let beta = normal_vec(&mut rng, p) * 3.0;
                let oracle = prox_fused(&beta, &d, lambda, admm_tol)?;
                let u = oracle.dual.clone().unwrap_or_else(|| DVector::zeros(d.nrows()));
                let gap = fused_duality_gap(&d, lambda, &beta, &oracle.solution, &u)?;
                tally(&mut iter, gap, t0);
            }
        }
    }
    let build = |name: &str, acc: (f64, usize, usize, f64), limit: f64| SuiteReport {
        name: name.into(),
        cases: acc.1,
        worst: acc.0,
        limit,
        infinite: acc.2,
        seconds: acc.3,
    };
    Ok(ZeroGapReport {
        closed_form: build("zero gap, closed-form oracles", closed, 1e-8),
        iterative: build("zero gap, ADMM oracle", iter, 10.0 * admm_tol),
    })
}

fn tally(acc: &mut (f64, usize, usize, f64), gap: ExtReal, t0: Instant) {
    acc.1 += 1;
    match gap {
        // the optimum gap is nonnegative; its magnitude is the violation
        ExtReal::Finite(g) => acc.0 = acc.0.max(g.abs()),
        _ => acc.2 += 1,
    }
    acc.3 += t0.elapsed().as_secs_f64();
}

/// Everything the `gap-check` command runs, with the sizes used by the acceptance suite.
#[derive(Clone, Debug, Serialize)]
pub struct CertificationReport {
    pub nonnegativity: SuiteReport,
    pub distance: SuiteReport,
    pub kl: SuiteReport,
    pub zero_gap: ZeroGapReport,
}

impl CertificationReport {
    pub fn passed(&self) -> bool {
        self.nonnegativity.passed() && self.distance.passed() && self.kl.passed() && self.zero_gap.passed()
    }
}

/// Default ADMM tolerance used by the certification suites.
pub const ADMM_TOL: f64 = 1e-10;

pub fn run_all(seed: u64) -> Result<CertificationReport> {
    Ok(CertificationReport {
        nonnegativity: nonnegativity(seed, 10_000)?,
        distance: distance_certificate(seed.wrapping_add(1), 1000, ADMM_TOL)?,
        kl: kl_certificate(seed.wrapping_add(2), 1000)?,
        zero_gap: zero_gap_at_optimum(seed.wrapping_add(3), 1000, ADMM_TOL)?,
    })
}

/// Draws per conditional in [`conditional_suite`].
pub const PROBE_DRAWS: usize = 2000;
/// Thinning of both the model chain and the slice reference in [`conditional_suite`].
pub const PROBE_THIN: usize = 10;

fn snapshots<M: GibbsModel + Clone>(model: &mut M, at: &[u64]) -> Result<Vec<M>> {
    let last = at.iter().copied().max().unwrap_or(0);
    let mut out = Vec::with_capacity(at.len());
    for sweep in 0..=last {
        model.sweep(sweep, true)?;
        if at.contains(&sweep) {
            out.push(model.clone());
        }
    }
    Ok(out)
}

/// Every non-conjugate one-dimensional full conditional of the three gap-prior samplers,
/// checked on three frozen states each against a slice-sampling reference.
pub fn conditional_suite(seed: u64, draws: usize, thin: usize) -> Result<Vec<ProbeOutcome>> {
    let frozen_at = [60u64, 120, 180];
    let mut out = Vec::new();
    let mut probe_seed = seed;
    let mut next_seed = || {
        probe_seed = probe_seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
        probe_seed
    };

    // sparse regression: one active and one inactive coordinate, plus the level
    let mut rng = stream(seed, 0, 0, blocks::DATA);
    let (n, p) = (60, 12);
    let x = DMatrix::from_fn(n, p, |_, _| std_normal(&mut rng));
    let mut theta0 = DVector::zeros(p);
    theta0[0] = 2.0;
    theta0[3] = -1.5;
    let y = &x * &theta0 + DVector::from_fn(n, |_, _| std_normal(&mut rng));
    let config = SamplerConfig { seed, ..SamplerConfig::default() };
    let mut sparse = GapSparseSampler::new(RegressionData::new(x, y)?, config)?;
    for state in snapshots(&mut sparse, &frozen_at)? {
        for target in [SparseTarget::Kappa(0), SparseTarget::Kappa(5), SparseTarget::Lambda] {
            out.push(probe_conditional(state.conditional(target).as_mut(), draws, thin, next_seed())?);
        }
    }

    // matrix smoothing: rank-one truth on a small grid
    let (p1, p2, reps) = (8, 6, 20);
    let u0 = DVector::from_fn(p1, |i, _| if i < 3 { 1.0 } else { 0.0 });
    let v0 = DVector::from_fn(p2, |j, _| if j < 2 { 2.0 } else { 0.0 });
    let truth = &u0 * v0.transpose();
    let stack: Vec<DMatrix<f64>> =
        (0..reps).map(|_| truth.map(|t| t + 0.3 * std_normal(&mut rng))).collect();
    let config = SamplerConfig { seed, rank: 2, ..SamplerConfig::default() };
    let mut matrix = MatrixSampler::new(MatrixData::from_stack(&stack)?, config)?;
    for state in snapshots(&mut matrix, &frozen_at)? {
        for target in [MatrixTarget::V1(0, 0), MatrixTarget::V2(4, 3), MatrixTarget::Lambda2] {
            out.push(probe_conditional(state.conditional(target).as_mut(), draws, thin, next_seed())?);
        }
    }

    // fused probit: two departments of two categories, latent-threshold data
    let (n, m, p) = (300, 4, 2);
    let departments = vec![0, 0, 1, 1];
    let theta0 = DMatrix::from_row_slice(m, p, &[0.8, -0.5, 0.8, -0.5, -0.6, 0.7, -0.6, 0.7]);
    let x = DMatrix::from_fn(n, p, |_, _| std_normal(&mut rng));
    let mu = &x * theta0.transpose();
    let y = mu.map(|v| if v + std_normal(&mut rng) > 0.0 { 1.0 } else { 0.0 });
    // short warmup so the gap weight has finished its warmup ramp before the first snapshot
    let config = SamplerConfig { seed, warmup: 100, ..SamplerConfig::default() };
    let mut probit = ProbitSampler::new(ProbitData::new(y, x, departments)?, config)?;
    for state in snapshots(&mut probit, &frozen_at)? {
        for target in [ProbitTarget::V(0, 0), ProbitTarget::V(2, 1), ProbitTarget::Rho, ProbitTarget::Omega] {
            out.push(probe_conditional(state.conditional(target).as_mut(), draws, thin, next_seed())?);
        }
    }
    Ok(out)
}
