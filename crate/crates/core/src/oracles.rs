//! Reference solvers for proximal mappings and projections.
//!
//! These certify the gap bounds and validate the samplers. None of them is called from a
//! Gibbs update.

use nalgebra::{DMatrix, DVector};

use crate::error::{dim_check, GapError, Result};
use crate::gapcore::{fused_duality_gap, penalty_value, PenaltySpec, SimplexPoint};

/// Default iteration cap for [`prox_fused`].
pub const ADMM_MAX_ITER: usize = 100_000;

/// Smallest accepted grid resolution (points per axis) for [`brute_force_prox`].
pub const MIN_GRID_POINTS: usize = 1000;

#[derive(Clone, Debug)]
pub struct OracleResult {
    pub solution: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub residual: f64,
    /// Dual certificate when the solver produces one (`u in R^d` for the fused prox).
    pub dual: Option<DVector<f64>>,
}

/// `sign(beta) (|beta| - lambda)_+`, elementwise.
pub fn soft_threshold(beta: &DVector<f64>, lambda: f64) -> DVector<f64> {
    beta.map(|b| soft(b, lambda))
}

#[inline]
fn soft(b: f64, lambda: f64) -> f64 {
    b.signum() * (b.abs() - lambda).max(0.0)
}

/// Euclidean projection onto `{z : |z|_1 <= r}` by sorting `|beta|`.
pub fn project_l1_ball(beta: &DVector<f64>, r: f64) -> Result<DVector<f64>> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(GapError::InvalidParameter(format!("radius must be positive, got {r}")));
    }
    let l1: f64 = beta.iter().map(|x| x.abs()).sum();
    if l1 <= r {
        return Ok(beta.clone());
    }
    let mut mags: Vec<f64> = beta.iter().map(|x| x.abs()).collect();
    // stable sort keeps index order among ties
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (k, &m) in mags.iter().enumerate() {
        cumsum += m;
        let t = (cumsum - r) / (k as f64 + 1.0);
        if m > t {
            tau = t;
        } else {
            break;
        }
    }
    Ok(soft_threshold(beta, tau))
}

fn fused_objective(beta: &DVector<f64>, d: &DMatrix<f64>, lambda: f64, z: &DVector<f64>) -> f64 {
    0.5 * (z - beta).norm_squared() + lambda * (d * z).iter().map(|x| x.abs()).sum::<f64>()
}

/// Proximal mapping of `lambda |Dz|_1` by ADMM on the split `Dz = w`.
///
/// Stops once both ADMM residuals are below `tol` and the primal-dual gap at the iterate and
/// the recovered multiplier is below `10 tol`. The multiplier is returned in
/// [`OracleResult::dual`]; it always satisfies `|u|_inf <= lambda`.
pub fn prox_fused(beta: &DVector<f64>, d: &DMatrix<f64>, lambda: f64, tol: f64) -> Result<OracleResult> {
    prox_fused_with_cap(beta, d, lambda, tol, ADMM_MAX_ITER)
}

pub fn prox_fused_with_cap(
    beta: &DVector<f64>,
    d: &DMatrix<f64>,
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Result<OracleResult> {
    dim_check("beta", d.ncols(), beta.len())?;
    if !(tol > 0.0) {
        return Err(GapError::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    if !(lambda >= 0.0) {
        return Err(GapError::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
    }
    let (m, p) = d.shape();
    if lambda == 0.0 {
        return Ok(OracleResult {
            solution: beta.clone(),
            objective: 0.0,
            iterations: 0,
            residual: 0.0,
            dual: Some(DVector::zeros(m)),
        });
    }
    let dt = d.transpose();
    let dtd = &dt * d;
    let factor = |rho: f64| {
        (DMatrix::<f64>::identity(p, p) + &dtd * rho)
            .cholesky()
            .ok_or_else(|| GapError::Numeric("I + rho D^T D not positive definite".into()))
    };
    let mut rho = 1.0;
    let mut chol = factor(rho)?;
    let mut z = beta.clone();
    let mut w = d * &z;
    let mut y = DVector::<f64>::zeros(m); // scaled multiplier, u = rho * y
    let mut residual = f64::INFINITY;
    for it in 1..=max_iter {
        z = chol.solve(&(beta + &dt * ((&w - &y) * rho)));
        let dz = d * &z;
        let w_old = w.clone();
        w = (&dz + &y).map(|x| soft(x, lambda / rho));
        y += &dz - &w;
        let r_pri = (&dz - &w).norm();
        let r_dual = rho * (&dt * (&w - &w_old)).norm();
        residual = r_pri.max(r_dual);
        if residual <= tol {
            let u = &y * rho;
            let gap = fused_duality_gap(d, lambda, beta, &z, &u)?.to_f64();
            if gap <= 10.0 * tol {
                return Ok(OracleResult {
                    objective: fused_objective(beta, d, lambda, &z),
                    solution: z,
                    iterations: it,
                    residual,
                    dual: Some(u),
                });
            }
        }
        if it % 10 == 0 {
            let scale = if r_pri > 10.0 * r_dual {
                2.0
            } else if r_dual > 10.0 * r_pri {
                0.5
            } else {
                1.0
            };
            if scale != 1.0 {
                rho *= scale;
                y /= scale;
                chol = factor(rho)?;
            }
        }
    }
    Err(GapError::Convergence { iterations: max_iter, residual })
}

/// Singular-value soft-thresholding, the proximal mapping of `lambda |.|_*`.
pub fn svt(beta: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    if !(lambda >= 0.0) {
        return Err(GapError::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
    }
    if lambda == 0.0 || beta.is_empty() {
        return Ok(beta.clone());
    }
    let svd = beta
        .clone()
        .try_svd(true, true, 1e-14, 10_000)
        .ok_or_else(|| GapError::Numeric("SVD did not converge".into()))?;
    let u = svd.u.as_ref().ok_or_else(|| GapError::Numeric("missing U".into()))?;
    let vt = svd.v_t.as_ref().ok_or_else(|| GapError::Numeric("missing V^T".into()))?;
    let shrunk = svd.singular_values.map(|s| (s - lambda).max(0.0));
    Ok(u * DMatrix::from_diagonal(&shrunk) * vt)
}

/// KL projection together with its half-space multiplier.
#[derive(Clone, Debug)]
pub struct KlProjection {
    pub point: SimplexPoint,
    /// `nu >= 0` with `z_j ∝ beta_j exp(-nu a_j)`; the optimal dual point is `nu * a`.
    pub multiplier: f64,
    pub residual: f64,
}

/// `argmin_{z in simplex, a^T z <= b} KL(z || beta)`.
pub fn kl_project(beta: &SimplexPoint, a: &DVector<f64>, b: f64, tol: f64) -> Result<SimplexPoint> {
    Ok(kl_project_detailed(beta, a, b, tol)?.point)
}

pub fn kl_project_detailed(beta: &SimplexPoint, a: &DVector<f64>, b: f64, tol: f64) -> Result<KlProjection> {
    dim_check("half-space normal", beta.len(), a.len())?;
    if !(tol > 0.0) {
        return Err(GapError::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    let bv = beta.as_vector();
    if bv.iter().any(|&x| x <= 0.0) {
        return Err(GapError::Domain("anchor must be strictly positive".into()));
    }
    let tilt = |nu: f64| -> DVector<f64> {
        let logs: Vec<f64> = bv.iter().zip(a.iter()).map(|(bj, aj)| bj.ln() - nu * aj).collect();
        let mx = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logs.iter().map(|l| (l - mx).exp()).collect();
        let s: f64 = e.iter().sum();
        DVector::from_iterator(e.len(), e.into_iter().map(|x| x / s))
    };
    let ax0 = a.dot(bv);
    if ax0 <= b {
        return Ok(KlProjection { point: beta.clone(), multiplier: 0.0, residual: 0.0 });
    }
    let amin = a.iter().copied().fold(f64::INFINITY, f64::min);
    if amin >= b {
        return Err(GapError::Infeasible(format!(
            "half-space a^T z <= {b} has no interior point on the simplex (min a_j = {amin})"
        )));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while a.dot(&tilt(hi)) > b {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(GapError::Numeric("could not bracket the multiplier".into()));
        }
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if a.dot(&tilt(mid)) > b {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let z = tilt(hi);
    let slack = b - a.dot(&z);
    let residual = hi * slack.abs();
    if residual > tol || slack < -tol {
        return Err(GapError::Convergence { iterations: 2000, residual });
    }
    let point = SimplexPoint::normalized(z.iter().copied().collect())?;
    Ok(KlProjection { point, multiplier: hi, residual })
}

/// Largest coordinate deviation between a central difference of `f` at `x` and `grad`.
pub fn finite_diff_check<F>(f: F, x: &DVector<f64>, grad: &DVector<f64>, h: f64) -> f64
where
    F: Fn(&DVector<f64>) -> f64,
{
    let mut worst = 0.0f64;
    let mut xp = x.clone();
    for i in 0..x.len() {
        let xi = x[i];
        xp[i] = xi + h;
        let fp = f(&xp);
        xp[i] = xi - h;
        let fm = f(&xp);
        xp[i] = xi;
        worst = worst.max(((fp - fm) / (2.0 * h) - grad[i]).abs());
    }
    worst
}

/// Grid search for `argmin_z 1/2 |beta - z|^2 + g(z)` on `[-2|beta|_inf, 2|beta|_inf]^d`,
/// `d <= 3`, followed by a cyclic ternary search inside one grid cell per axis.
///
/// Independent of every closed-form oracle; accurate to about one grid step.
pub fn brute_force_prox(beta: &DVector<f64>, spec: &PenaltySpec, grid: usize) -> Result<DVector<f64>> {
    let dim = beta.len();
    if dim == 0 || dim > 3 {
        return Err(GapError::Unsupported(format!("brute force prox needs 1 <= dim <= 3, got {dim}")));
    }
    if grid < MIN_GRID_POINTS {
        return Err(GapError::InvalidParameter(format!(
            "grid needs at least {MIN_GRID_POINTS} points per axis, got {grid}"
        )));
    }
    spec.check_point(beta)?;
    let radius = 2.0 * beta.amax();
    if radius == 0.0 {
        return Ok(DVector::zeros(dim));
    }
    let step = 2.0 * radius / (grid - 1) as f64;
    let mut buf = DVector::zeros(dim);
    let mut objective = |z: &[f64]| -> f64 {
        buf.as_mut_slice().copy_from_slice(z);
        let g = fast_penalty(spec, &buf);
        let q: f64 = z.iter().zip(beta.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        0.5 * q + g
    };
    let coord = |i: usize| -radius + step * i as f64;
    let mut best = vec![0.0; dim];
    let mut best_val = f64::INFINITY;
    let mut z = vec![0.0; dim];
    let total = grid.pow(dim as u32);
    for flat in 0..total {
        let mut rem = flat;
        for zk in z.iter_mut() {
            *zk = coord(rem % grid);
            rem /= grid;
        }
        let val = objective(&z);
        if val < best_val {
            best_val = val;
            best.copy_from_slice(&z);
        }
    }
    if !best_val.is_finite() {
        return Err(GapError::Infeasible("objective infinite on the whole grid".into()));
    }
    for _sweep in 0..20 {
        for k in 0..dim {
            let (mut lo, mut hi) = (best[k] - step, best[k] + step);
            for _ in 0..60 {
                let m1 = lo + (hi - lo) / 3.0;
                let m2 = hi - (hi - lo) / 3.0;
                z.copy_from_slice(&best);
                z[k] = m1;
                let f1 = objective(&z);
                z[k] = m2;
                let f2 = objective(&z);
                if f1 <= f2 {
                    hi = m2;
                } else {
                    lo = m1;
                }
            }
            z.copy_from_slice(&best);
            z[k] = 0.5 * (lo + hi);
            let val = objective(&z);
            if val < best_val {
                best_val = val;
                best.copy_from_slice(&z);
            }
        }
    }
    Ok(DVector::from_vec(best))
}

fn fast_penalty(spec: &PenaltySpec, z: &DVector<f64>) -> f64 {
    match spec {
        PenaltySpec::L1 { lambda } => lambda * z.iter().map(|x| x.abs()).sum::<f64>(),
        PenaltySpec::GeneralizedL1 { d, lambda } => {
            let mut s = 0.0;
            for i in 0..d.nrows() {
                let mut row = 0.0;
                for j in 0..d.ncols() {
                    row += d[(i, j)] * z[j];
                }
                s += row.abs();
            }
            lambda * s
        }
        PenaltySpec::Sum(parts) => parts.iter().map(|p| fast_penalty(p, z)).sum(),
        other => penalty_value(other, z).map(|v| v.to_f64()).unwrap_or(f64::INFINITY),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gapcore::NormKind;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn close(a: &DVector<f64>, b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(&v(&[3.0, -3.0]), 1.0), v(&[2.0, -2.0]));
        assert_eq!(soft_threshold(&v(&[0.5, -0.2]), 1.0), v(&[0.0, 0.0]));
        assert_eq!(soft_threshold(&v(&[0.5, -0.2]), 0.0), v(&[0.5, -0.2]));
    }

    #[test]
    fn l1_ball_examples() {
        assert!(close(&project_l1_ball(&v(&[3.0, 1.0]), 1.0).unwrap(), &[1.0, 0.0], 1e-15));
        assert_eq!(project_l1_ball(&v(&[0.2, 0.1]), 1.0).unwrap(), v(&[0.2, 0.1]));
        assert!(close(&project_l1_ball(&v(&[-3.0, 1.0]), 2.0).unwrap(), &[-2.0, 0.0], 1e-15));
        assert!(project_l1_ball(&v(&[1.0]), 0.0).is_err());
        // ties: both coordinates share the mass equally
        assert!(close(&project_l1_ball(&v(&[2.0, -2.0]), 2.0).unwrap(), &[1.0, -1.0], 1e-15));
    }

    #[test]
    fn fused_prox_examples() {
        let d = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let r = prox_fused(&v(&[1.0, 0.0]), &d, 1.0, 1e-10).unwrap();
        assert!(close(&r.solution, &[0.5, 0.5], 1e-8));
        assert!((r.dual.unwrap()[0] - 0.5).abs() < 1e-8);
        let r = prox_fused(&v(&[1.0, 0.0]), &d, 0.0, 1e-10).unwrap();
        assert_eq!(r.solution, v(&[1.0, 0.0]));
        let r = prox_fused(&v(&[1.0, 0.0]), &d, 10.0, 1e-10).unwrap();
        assert!(close(&r.solution, &[0.5, 0.5], 1e-8));
        assert!(prox_fused(&v(&[1.0, 0.0]), &d, 1.0, 0.0).is_err());
    }

    #[test]
    fn fused_prox_iteration_cap() {
        let d = DMatrix::from_row_slice(2, 3, &[1.0, -1.0, 0.0, 0.0, 1.0, -1.0]);
        let r = prox_fused_with_cap(&v(&[3.0, -1.0, 2.0]), &d, 0.7, 1e-14, 3);
        assert!(matches!(r, Err(GapError::Convergence { iterations: 3, .. })));
    }

    #[test]
    fn svt_examples() {
        let b = DMatrix::from_diagonal(&v(&[3.0, 1.0]));
        let z = svt(&b, 2.0).unwrap();
        assert!((z - DMatrix::from_diagonal(&v(&[1.0, 0.0]))).amax() < 1e-12);
        assert_eq!(svt(&b, 0.0).unwrap(), b);
    }

    #[test]
    fn kl_projection_examples() {
        let half = SimplexPoint::new(vec![0.5, 0.5]).unwrap();
        let z = kl_project(&half, &v(&[1.0, 1.0]), 1.0, 1e-12).unwrap();
        assert_eq!(z, half);
        let b = SimplexPoint::new(vec![0.8, 0.2]).unwrap();
        let z = kl_project(&b, &v(&[1.0, 0.0]), 0.5, 1e-12).unwrap();
        assert!(close(z.as_vector(), &[0.5, 0.5], 1e-10));
        assert!(matches!(
            kl_project(&half, &v(&[1.0, 1.0]), -1.0, 1e-12),
            Err(GapError::Infeasible(_))
        ));
    }

    #[test]
    fn finite_differences() {
        let sq = |x: &DVector<f64>| 0.5 * x.norm_squared();
        assert!(finite_diff_check(sq, &v(&[1.0, 2.0]), &v(&[1.0, 2.0]), 1e-5) < 1e-8);
        let a = v(&[0.3, -2.0, 5.0]);
        let lin = |x: &DVector<f64>| a.dot(x);
        assert!(finite_diff_check(lin, &v(&[1.0, -4.0, 0.5]), &a, 1e-5) < 1e-10);
        let lse = |x: &DVector<f64>| x.iter().map(|t| t.exp()).sum::<f64>().ln();
        assert!(finite_diff_check(lse, &v(&[0.0, 0.0]), &v(&[0.5, 0.5]), 1e-5) < 1e-8);
    }

    #[test]
    fn brute_force_examples() {
        let step = |b: &DVector<f64>| 4.0 * b.amax() / (MIN_GRID_POINTS - 1) as f64;
        let b = v(&[3.0]);
        let z = brute_force_prox(&b, &PenaltySpec::l1(1.0).unwrap(), MIN_GRID_POINTS).unwrap();
        assert!((z[0] - 2.0).abs() <= step(&b));
        let b = v(&[1.0, 0.0]);
        let fused = PenaltySpec::generalized_l1(DMatrix::from_row_slice(1, 2, &[1.0, -1.0]), 1.0).unwrap();
        let z = brute_force_prox(&b, &fused, MIN_GRID_POINTS).unwrap();
        assert!(close(&z, &[0.5, 0.5], step(&b)));
        let b = v(&[3.0, 1.0]);
        let ball = PenaltySpec::norm_ball(NormKind::L1, 1.0).unwrap();
        let z = brute_force_prox(&b, &ball, MIN_GRID_POINTS).unwrap();
        assert!(close(&z, &[1.0, 0.0], step(&b)));
        assert!(brute_force_prox(&v(&[1.0; 4]), &PenaltySpec::l1(1.0).unwrap(), MIN_GRID_POINTS).is_err());
        assert!(brute_force_prox(&b, &ball, 10).is_err());
    }
}
