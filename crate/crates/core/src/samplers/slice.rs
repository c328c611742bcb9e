//! Univariate slice sampling with stepping out and shrinkage.

use rand::Rng;
use rand_distr::Exp1;

use crate::error::{GapError, Result};

/// Cap on stepping-out expansions on each side.
pub const MAX_STEPS: usize = 64;
/// Cap on shrinkage proposals before the update is declared stuck.
pub const MAX_SHRINKS: usize = 10_000;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SliceStats {
    pub updates: u64,
    pub evaluations: u64,
    /// Total width of the stepped-out brackets, for warmup width tuning.
    pub bracket_width: f64,
}

impl SliceStats {
    pub fn mean_evaluations(&self) -> f64 {
        if self.updates == 0 {
            0.0
        } else {
            self.evaluations as f64 / self.updates as f64
        }
    }
}

/// One slice update of `x0` targeting `exp(logf)` on `bounds`.
pub fn slice_sample_1d<F, R>(logf: F, x0: f64, width: f64, bounds: (f64, f64), rng: &mut R) -> Result<f64>
where
    F: Fn(f64) -> f64,
    R: Rng + ?Sized,
{
    slice_sample_1d_tracked(logf, x0, width, bounds, rng, &mut SliceStats::default())
}

pub fn slice_sample_1d_tracked<F, R>(
    logf: F,
    x0: f64,
    width: f64,
    bounds: (f64, f64),
    rng: &mut R,
    stats: &mut SliceStats,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
    R: Rng + ?Sized,
{
    let (lb, ub) = bounds;
    if !(lb < ub) {
        return Err(GapError::InvalidParameter(format!("empty slice bounds ({lb}, {ub})")));
    }
    if !(width > 0.0) || !width.is_finite() {
        return Err(GapError::InvalidParameter(format!("slice width must be positive, got {width}")));
    }
    if !(x0 > lb && x0 < ub) && !(x0 == lb && lb.is_finite()) {
        return Err(GapError::Domain(format!("slice start {x0} outside ({lb}, {ub})")));
    }
    let eval = |x: f64, stats: &mut SliceStats| -> f64 {
        stats.evaluations += 1;
        if x <= lb || x >= ub {
            f64::NEG_INFINITY
        } else {
            let v = logf(x);
            if v.is_nan() {
                f64::NEG_INFINITY
            } else {
                v
            }
        }
    };
    let f0 = {
        stats.evaluations += 1;
        logf(x0)
    };
    if !f0.is_finite() {
        return Err(GapError::Domain(format!("log density is not finite at the start point {x0}")));
    }
    stats.updates += 1;
    let e: f64 = rng.sample(Exp1);
    let level = f0 - e;

    let mut left = x0 - width * rng.random::<f64>();
    let mut right = left + width;
    let j = (MAX_STEPS as f64 * rng.random::<f64>()) as usize;
    let mut k = MAX_STEPS - 1 - j;
    let mut j = j;
    while j > 0 && left > lb && eval(left, stats) > level {
        left -= width;
        j -= 1;
    }
    while k > 0 && right < ub && eval(right, stats) > level {
        right += width;
        k -= 1;
    }
    left = left.max(lb);
    right = right.min(ub);
    stats.bracket_width += right - left;

    for _ in 0..MAX_SHRINKS {
        let x = left + (right - left) * rng.random::<f64>();
        if eval(x, stats) > level {
            return Ok(x);
        }
        if x < x0 {
            left = x;
        } else {
            right = x;
        }
        if right - left <= f64::EPSILON * x0.abs().max(f64::MIN_POSITIVE) {
            return Ok(x0);
        }
    }
    Err(GapError::Convergence { iterations: MAX_SHRINKS, residual: right - left })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::variates::log_inverse_gamma_kernel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chain<F: Fn(f64) -> f64 + Copy>(logf: F, x0: f64, bounds: (f64, f64), n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = x0;
        (0..n)
            .map(|_| {
                x = slice_sample_1d(logf, x, 1.0, bounds, &mut rng).unwrap();
                x
            })
            .collect()
    }

    #[test]
    fn standard_normal_moments() {
        let xs = chain(|x| -0.5 * x * x, 0.3, (f64::NEG_INFINITY, f64::INFINITY), 100_000, 5);
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64;
        assert!(m.abs() < 0.02 && (v - 1.0).abs() < 0.05, "{m} {v}");
    }

    #[test]
    fn inverse_gamma_mean_and_bounds() {
        let xs = chain(|x| log_inverse_gamma_kernel(x, 2.0, 1.0), 1.0, (0.0, f64::INFINITY), 100_000, 6);
        let m = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((m - 1.0).abs() < 0.05, "{m}");
        let xs = chain(|x| -0.5 * x * x, 0.5, (0.2, 3.0), 20_000, 7);
        assert!(xs.iter().all(|&x| x > 0.2 && x < 3.0));
    }

    #[test]
    fn rejects_bad_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(slice_sample_1d(|_| f64::NEG_INFINITY, 0.0, 1.0, (-1.0, 1.0), &mut rng).is_err());
        assert!(slice_sample_1d(|x| -x, 2.0, 1.0, (-1.0, 1.0), &mut rng).is_err());
    }
}
