//! Chain diagnostics and posterior summaries.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GapError, Result};
use crate::linalg::singular_values;

/// ESS reported for antithetic chains is capped at this multiple of the chain length.
pub const ESS_CAP_FACTOR: f64 = 1.05;

/// Minimum chain length accepted by [`ess`].
pub const MIN_ESS_LENGTH: usize = 100;

struct Centered {
    x: Vec<f64>,
    c0: f64,
}

impl Centered {
    fn new(series: &[f64]) -> Result<Self> {
        let n = series.len() as f64;
        let mean = series.iter().sum::<f64>() / n;
        let x: Vec<f64> = series.iter().map(|v| v - mean).collect();
        let c0 = x.iter().map(|v| v * v).sum::<f64>() / n;
        // relative to the scale of the data, so tiny but genuine variation still counts
        let scale = series.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        if !(c0 > (1e-14 * scale).powi(2)) || !c0.is_finite() {
            return Err(GapError::Domain("series is constant; autocorrelation undefined".into()));
        }
        Ok(Centered { x, c0 })
    }

    fn rho(&self, k: usize) -> f64 {
        let n = self.x.len();
        let s: f64 = self.x[..n - k].iter().zip(&self.x[k..]).map(|(a, b)| a * b).sum();
        s / n as f64 / self.c0
    }
}

/// Autocorrelations at lags `0..=max_lag` from the biased autocovariance.
pub fn acf(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if series.len() <= max_lag {
        return Err(GapError::InvalidParameter(format!(
            "series of length {} is too short for lag {max_lag}",
            series.len()
        )));
    }
    let c = Centered::new(series)?;
    Ok((0..=max_lag).map(|k| if k == 0 { 1.0 } else { c.rho(k) }).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EssEstimate {
    /// Reported ESS, at most `1.05 n`.
    pub value: f64,
    /// Whether the raw estimate exceeded the cap (antithetic chain).
    pub capped: bool,
    /// Autocorrelations consumed by the truncation rule, starting at lag 0.
    pub acf: Vec<f64>,
}

/// ESS from an autocorrelation sequence by Geyer's initial positive sequence.
///
/// Pairs `rho_{2k} + rho_{2k+1}` are summed while positive. If `acf` ends before the
/// sequence turns nonpositive the available pairs are used.
pub fn ess_from_acf(acf: &[f64], n: usize) -> f64 {
    ess_from_acf_detailed(acf, n).0
}

fn ess_from_acf_detailed(acf: &[f64], n: usize) -> (f64, bool) {
    let mut tau = -1.0;
    for pair in acf.chunks_exact(2) {
        let g = pair[0] + pair[1];
        if g <= 0.0 {
            break;
        }
        tau += 2.0 * g;
    }
    let n = n as f64;
    let cap = ESS_CAP_FACTOR * n;
    if tau <= 0.0 {
        return (cap, true);
    }
    let raw = n / tau;
    if raw > cap {
        (cap, true)
    } else {
        (raw, false)
    }
}

/// Effective sample size `n / (1 + 2 sum_k rho_k)`.
pub fn ess(series: &[f64]) -> Result<f64> {
    Ok(ess_detailed(series)?.value)
}

pub fn ess_detailed(series: &[f64]) -> Result<EssEstimate> {
    let n = series.len();
    if n < MIN_ESS_LENGTH {
        return Err(GapError::InvalidParameter(format!("ESS needs at least {MIN_ESS_LENGTH} draws, got {n}")));
    }
    let c = Centered::new(series)?;
    let mut rho = Vec::with_capacity(64);
    let mut k = 0;
    while k + 1 < n {
        let r0 = if k == 0 { 1.0 } else { c.rho(k) };
        let r1 = c.rho(k + 1);
        rho.push(r0);
        rho.push(r1);
        if r0 + r1 <= 0.0 {
            break;
        }
        k += 2;
    }
    let (value, capped) = ess_from_acf_detailed(&rho, n);
    Ok(EssEstimate { value, capped, acf: rho })
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn median(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    quantile(&s, 0.5)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q50: f64,
    pub q975: f64,
    /// `None` for a constant column.
    pub ess: Option<f64>,
    pub ess_capped: bool,
    pub acf: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub params: Vec<ParamSummary>,
    pub wall_seconds: f64,
    pub median_ess: f64,
    pub ess_per_second: f64,
}

pub fn summarize_param(name: &str, draws: &[f64], max_lag: usize) -> ParamSummary {
    let n = draws.len();
    let m = mean(draws);
    let sd = if n > 1 {
        (draws.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut s = draws.to_vec();
    s.sort_by(f64::total_cmp);
    let (ess_val, capped) = match ess_detailed(draws) {
        Ok(e) => (Some(e.value), e.capped),
        Err(_) => (None, false),
    };
    let acf = acf(draws, max_lag.min(n.saturating_sub(1))).unwrap_or_default();
    ParamSummary {
        name: name.to_string(),
        mean: m,
        sd,
        q025: quantile(&s, 0.025),
        q50: quantile(&s, 0.5),
        q975: quantile(&s, 0.975),
        ess: ess_val,
        ess_capped: capped,
        acf,
    }
}

/// Summaries for named columns of draws; `wall_seconds` comes from the sampler's metadata.
pub fn summarize_columns(names: &[String], columns: &[Vec<f64>], wall_seconds: f64, max_lag: usize) -> ChainSummary {
    let params: Vec<ParamSummary> =
        names.iter().zip(columns).map(|(n, c)| summarize_param(n, c, max_lag)).collect();
    let esses: Vec<f64> = params.iter().filter_map(|p| p.ess).collect();
    let median_ess = if esses.is_empty() { 0.0 } else { median(&esses) };
    let ess_per_second = if wall_seconds > 0.0 { median_ess / wall_seconds } else { 0.0 };
    ChainSummary { params, wall_seconds, median_ess, ess_per_second }
}

/// Lagwise median of the autocorrelations of several series; constant series are skipped.
pub fn pooled_acf(columns: &[Vec<f64>], max_lag: usize) -> Result<Vec<f64>> {
    let per: Vec<Vec<f64>> = columns.iter().filter_map(|c| acf(c, max_lag).ok()).collect();
    if per.is_empty() {
        return Err(GapError::Domain("no nonconstant series to pool".into()));
    }
    Ok((0..=max_lag)
        .map(|k| median(&per.iter().map(|a| a[k]).collect::<Vec<_>>()))
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularValuePosterior {
    /// Descending singular values, one row per draw.
    pub draws: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub q025: Vec<f64>,
    pub q975: Vec<f64>,
}

/// Singular values of `A B^T` for each retained `(A, B)` pair.
pub fn singular_value_posterior(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> Result<SingularValuePosterior> {
    if a.len() != b.len() || a.is_empty() {
        return Err(GapError::Dimension(format!("{} A draws but {} B draws", a.len(), b.len())));
    }
    let shape = (a[0].shape(), b[0].shape());
    let mut draws = Vec::with_capacity(a.len());
    for (ai, bi) in a.iter().zip(b) {
        if (ai.shape(), bi.shape()) != shape || ai.ncols() != bi.ncols() {
            return Err(GapError::Dimension("inconsistent factor shapes across draws".into()));
        }
        draws.push(singular_values(&(ai * bi.transpose()))?);
    }
    Ok(summarize_singular_values(draws))
}

pub fn summarize_singular_values(draws: Vec<Vec<f64>>) -> SingularValuePosterior {
    let k = draws.first().map_or(0, |d| d.len());
    let mut mean_v = Vec::with_capacity(k);
    let mut lo = Vec::with_capacity(k);
    let mut hi = Vec::with_capacity(k);
    for idx in 0..k {
        let mut col: Vec<f64> = draws.iter().map(|d| d[idx]).collect();
        mean_v.push(mean(&col));
        col.sort_by(f64::total_cmp);
        lo.push(quantile(&col, 0.025));
        hi.push(quantile(&col, 0.975));
    }
    SingularValuePosterior { draws, mean: mean_v, q025: lo, q975: hi }
}

/// Two-sample Kolmogorov-Smirnov statistic with its asymptotic p-value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// Kolmogorov survival function `Q(x) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2)`.
fn kolmogorov_q(x: f64) -> f64 {
    if x < 0.2 {
        // the alternating series converges too slowly here and Q is 1 to double precision
        return 1.0;
    }
    let mut total = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * x * x).exp();
        total += sign * term;
        if term < 1e-16 * total.abs() {
            break;
        }
        sign = -sign;
    }
    (2.0 * total).clamp(0.0, 1.0)
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsTest> {
    if a.is_empty() || b.is_empty() {
        return Err(GapError::Domain("KS test needs two nonempty samples".into()));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(GapError::Domain("KS test input contains NaN".into()));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let en = (n * m / (n + m)).sqrt();
    let p_value = kolmogorov_q((en + 0.12 + 0.11 / en) * d);
    Ok(KsTest { statistic: d, p_value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn ar1(phi: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sd = (1.0 - phi * phi).sqrt();
        let mut x = rng.sample::<f64, _>(StandardNormal);
        (0..n)
            .map(|_| {
                x = phi * x + sd * rng.sample::<f64, _>(StandardNormal);
                x
            })
            .collect()
    }

    #[test]
    fn iid_acf_and_ess() {
        let x = ar1(0.0, 10_000, 3);
        let a = acf(&x, 10).unwrap();
        assert_eq!(a[0], 1.0);
        assert!(a[1..].iter().all(|r| r.abs() < 0.03));
        let e = ess(&x).unwrap();
        assert!((e / 1e4 - 1.0).abs() < 0.15, "{e}");
    }

    #[test]
    fn ar1_acf_and_ess() {
        let n = 100_000;
        let x = ar1(0.5, n, 11);
        let a = acf(&x, 8).unwrap();
        for (k, r) in a.iter().enumerate() {
            assert!((r - 0.5f64.powi(k as i32)).abs() < 0.03);
        }
        let e = ess_detailed(&x).unwrap();
        assert!((e.value / (n as f64 / 3.0) - 1.0).abs() < 0.15, "{}", e.value);
        assert_eq!(ess_from_acf(&e.acf, n), e.value);
    }

    #[test]
    fn alternating_is_capped() {
        let x: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let e = ess_detailed(&x).unwrap();
        assert!(e.capped);
        assert_eq!(e.value, 1050.0);
    }

    #[test]
    fn constant_and_short_series() {
        assert!(acf(&[2.0; 50], 3).is_err());
        assert!(ess(&[2.0; 500]).is_err());
        assert!(ess(&[1.0, 2.0]).is_err());
        assert!(acf(&[1.0, 2.0], 2).is_err());
    }

    #[test]
    fn singular_values_of_draws() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&[3.0, 1.0]));
        let b = DMatrix::identity(2, 2);
        let sv = singular_value_posterior(&[a.clone(), a], &[b.clone(), b]).unwrap();
        assert!((sv.mean[0] - 3.0).abs() < 1e-12 && (sv.mean[1] - 1.0).abs() < 1e-12);
        assert_eq!(sv.q025, sv.q975);
    }

    #[test]
    fn quantiles_interpolate() {
        let s = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&s, 0.5), 2.0);
        assert_eq!(quantile(&s, 0.125), 0.5);
    }

    #[test]
    fn ks_detects_shift_and_accepts_same_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a: Vec<f64> = (0..2000).map(|_| rng.sample(StandardNormal)).collect();
        let b: Vec<f64> = (0..2000).map(|_| rng.sample(StandardNormal)).collect();
        let c: Vec<f64> = b.iter().map(|v| v + 0.3).collect();
        assert!(ks_two_sample(&a, &b).unwrap().p_value > 0.01);
        assert!(ks_two_sample(&a, &c).unwrap().p_value < 1e-6);
    }

    #[test]
    fn ks_statistic_of_disjoint_samples_is_one() {
        let t = ks_two_sample(&[1.0, 2.0, 3.0], &[4.0, 5.0]).unwrap();
        assert_eq!(t.statistic, 1.0);
        // identical samples give zero distance
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[2.0, 1.0]).unwrap().statistic, 0.0);
    }
}
