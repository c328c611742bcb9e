//! Random-variate primitives used by the Gibbs updates.

use rand::Rng;
use rand_distr::{Beta, Distribution, Exp1, Gamma, StandardNormal};

use crate::error::{GapError, Result};

/// Draw from `N(mu, sigma^2)` restricted to `(lo, hi)`; either bound may be infinite.
///
/// Works on the standardized interval `(a, b)`:
/// * an interval straddling zero uses uniform rejection when narrow and plain normal
///   rejection otherwise,
/// * a one-sided interval uses uniform rejection when short relative to the tail scale and
///   Robert's translated-exponential proposal otherwise (left tails are mirrored).
///
/// The result is clamped into `[lo, hi]` to absorb rounding in `mu + sigma z`.
pub fn sample_truncated_normal<R: Rng + ?Sized>(mu: f64, sigma: f64, lo: f64, hi: f64, rng: &mut R) -> Result<f64> {
    if !(lo < hi) {
        return Err(GapError::InvalidParameter(format!("empty truncation interval ({lo}, {hi})")));
    }
    if !(sigma > 0.0) || !sigma.is_finite() || !mu.is_finite() {
        return Err(GapError::InvalidParameter(format!("need finite mu and sigma > 0 (got {mu}, {sigma})")));
    }
    let a = (lo - mu) / sigma;
    let b = (hi - mu) / sigma;
    let z = if a >= 0.0 {
        right_tail(a, b, rng)
    } else if b <= 0.0 {
        -right_tail(-b, -a, rng)
    } else {
        straddle(a, b, rng)
    };
    Ok((mu + sigma * z).clamp(lo, hi))
}

fn straddle<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if b - a <= 2.0 {
        loop {
            let z = a + (b - a) * rng.random::<f64>();
            if rng.random::<f64>() <= (-0.5 * z * z).exp() {
                return z;
            }
        }
    }
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z > a && z < b {
            return z;
        }
    }
}

// Standardized draw on [a, b] with 0 <= a < b (b may be infinite).
fn right_tail<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    if b - a < 1.0 / rate {
        loop {
            let z = a + (b - a) * rng.random::<f64>();
            if rng.random::<f64>() <= (0.5 * (a * a - z * z)).exp() {
                return z;
            }
        }
    }
    loop {
        let e: f64 = rng.sample(Exp1);
        let z = a + e / rate;
        if z > b {
            continue;
        }
        let d = z - rate;
        if rng.random::<f64>() <= (-0.5 * d * d).exp() {
            return z;
        }
    }
}

/// Inverse Gaussian draw by the transformation-with-rejection construction.
///
/// The root is taken as `mu / (1 + r + sqrt(r^2 + 2r))`, which avoids the cancellation
/// in the textbook form `mu (1 + r - sqrt(r^2 + 2r))` when `mu / lam` is extreme.
pub fn sample_inverse_gaussian<R: Rng + ?Sized>(mu: f64, lam: f64, rng: &mut R) -> Result<f64> {
    if !(mu > 0.0 && lam > 0.0) || !mu.is_finite() || !lam.is_finite() {
        return Err(GapError::InvalidParameter(format!(
            "inverse Gaussian needs finite positive parameters (got {mu}, {lam})"
        )));
    }
    let nu: f64 = rng.sample(StandardNormal);
    let r = mu * nu * nu / (2.0 * lam);
    let root = if r > 1.0 { r * (1.0 + 2.0 / r).sqrt() } else { (r * (r + 2.0)).sqrt() };
    let x = mu / (1.0 + r + root);
    let x = if rng.random::<f64>() <= mu / (mu + x) { x } else { mu * (mu / x) };
    Ok(x.max(f64::MIN_POSITIVE))
}

/// `Gamma(shape, rate)`.
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(GapError::InvalidParameter(format!("gamma rate must be positive, got {rate}")));
    }
    let g = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| GapError::InvalidParameter(format!("gamma({shape}, {rate}): {e}")))?;
    Ok(g.sample(rng).max(f64::MIN_POSITIVE))
}

/// `InverseGamma(shape, scale)`, i.e. the reciprocal of `Gamma(shape, rate = scale)`.
pub fn sample_inverse_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Result<f64> {
    Ok(1.0 / sample_gamma(shape, scale, rng)?)
}

pub fn sample_beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<f64> {
    let d = Beta::new(a, b).map_err(|e| GapError::InvalidParameter(format!("beta({a}, {b}): {e}")))?;
    Ok(d.sample(rng))
}

/// `N(0, 1)` draw.
#[inline]
pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Log-density of `InverseGamma(shape, scale)` up to a constant.
#[inline]
pub fn log_inverse_gamma_kernel(x: f64, shape: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    -(shape + 1.0) * x.ln() - scale / x
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        (m, xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn truncated_normal_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> =
            (0..100_000).map(|_| sample_truncated_normal(0.0, 1.0, 0.0, f64::INFINITY, &mut rng).unwrap()).collect();
        assert!((moments(&xs).0 - (2.0 / std::f64::consts::PI).sqrt()).abs() < 0.01);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_truncated_normal(0.0, 1.0, f64::NEG_INFINITY, f64::INFINITY, &mut rng).unwrap())
            .collect();
        assert!(moments(&xs).0.abs() < 0.01);
        for _ in 0..10_000 {
            let x = sample_truncated_normal(0.0, 1.0, 8.0, 9.0, &mut rng).unwrap();
            assert!(x > 8.0 && x < 9.0);
            let x = sample_truncated_normal(0.0, 1.0, -9.0, -8.0, &mut rng).unwrap();
            assert!(x > -9.0 && x < -8.0);
        }
        assert!(sample_truncated_normal(0.0, 1.0, 1.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn truncated_normal_wide_sigma_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let xs: Vec<f64> =
            (0..50_000).map(|_| sample_truncated_normal(3.0, 1e6, 0.0, 1.0, &mut rng).unwrap()).collect();
        let (m, v) = moments(&xs);
        assert!((m - 0.5).abs() < 0.01 && (v - 1.0 / 12.0).abs() < 0.005);
    }

    #[test]
    fn inverse_gaussian_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xs: Vec<f64> = (0..100_000).map(|_| sample_inverse_gaussian(1.0, 1.0, &mut rng).unwrap()).collect();
        assert!((moments(&xs).0 - 1.0).abs() < 0.02);
        let xs: Vec<f64> = (0..200_000).map(|_| sample_inverse_gaussian(2.0, 1.0, &mut rng).unwrap()).collect();
        assert!((moments(&xs).1 / 8.0 - 1.0).abs() < 0.05);
        assert!(xs.iter().all(|&x| x > 0.0));
        // extreme ratio stays positive and finite
        for _ in 0..1000 {
            let x = sample_inverse_gaussian(1e12, 1e-6, &mut rng).unwrap();
            assert!(x > 0.0 && x.is_finite());
        }
        assert!(sample_inverse_gaussian(0.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn gamma_family() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xs: Vec<f64> = (0..100_000).map(|_| sample_inverse_gamma(3.0, 2.0, &mut rng).unwrap()).collect();
        assert!((moments(&xs).0 - 1.0).abs() < 0.02);
        let xs: Vec<f64> = (0..100_000).map(|_| sample_beta(2.0, 3.0, &mut rng).unwrap()).collect();
        assert!((moments(&xs).0 - 0.4).abs() < 0.01);
    }
}
