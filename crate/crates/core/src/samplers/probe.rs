//! Standalone chains on one full conditional, for checking a model's own update against a
//! generic slice-sampling reference on the same one-dimensional density.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::slice::slice_sample_1d;
use super::Conditional;
use crate::diagnostics::{ks_two_sample, quantile};
use crate::error::{GapError, Result};

#[derive(Clone, Debug, Serialize)]
pub struct ProbeOutcome {
    pub label: String,
    pub draws: usize,
    pub statistic: f64,
    pub p_value: f64,
}

/// Draw `draws` values from the model's update and from a slice-sampling reference on
/// `log_density`, both keeping every `thin`-th state, and compare them with a two-sample KS
/// test. The rest of the model state stays frozen throughout.
pub fn probe_conditional(probe: &mut dyn Conditional, draws: usize, thin: usize, seed: u64) -> Result<ProbeOutcome> {
    if draws == 0 || thin == 0 {
        return Err(GapError::InvalidParameter("draws and thin must be positive".into()));
    }
    let x0 = probe.current();
    let bounds = probe.support();
    if !probe.log_density(x0).is_finite() {
        return Err(GapError::Domain(format!("{}: current value has zero density", probe.label())));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Vec::with_capacity(draws);
    for _ in 0..draws {
        let mut v = 0.0;
        for _ in 0..thin {
            v = probe.update(&mut rng)?;
        }
        model.push(v);
    }

    // Width from the spread of the model draws; stepping out corrects a poor guess anyway.
    let mut sorted = model.clone();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let width = if iqr > 0.0 { iqr } else { (x0.abs() * 0.1).max(1e-6) };

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed_5eed_5eed);
    let mut x = x0;
    let mut reference = Vec::with_capacity(draws);
    for _ in 0..draws {
        for _ in 0..thin {
            x = slice_sample_1d(|t| probe.log_density(t), x, width, bounds, &mut rng)?;
        }
        reference.push(x);
    }
    let ks = ks_two_sample(&model, &reference)?;
    Ok(ProbeOutcome { label: probe.label(), draws, statistic: ks.statistic, p_value: ks.p_value })
}
