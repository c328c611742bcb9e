use nalgebra::DVector;

use super::gap::fenchel_young_gap;
use super::penalty::PenaltySpec;
use crate::error::{dim_check, Result};
use crate::extended::ExtReal;

/// A primal point, a dual point and their anchor `beta = theta + u`, with the cached
/// Fenchel-Young gap.
#[derive(Clone, Debug, PartialEq)]
pub struct GapTriple {
    pub theta: DVector<f64>,
    pub u: DVector<f64>,
    pub beta: DVector<f64>,
    pub gap: ExtReal,
}

impl GapTriple {
    pub fn new(spec: &PenaltySpec, theta: DVector<f64>, u: DVector<f64>) -> Result<Self> {
        dim_check("dual point", theta.len(), u.len())?;
        if let Some(dim) = spec.dim() {
            dim_check("primal point", dim, theta.len())?;
        }
        let gap = fenchel_young_gap(spec, &theta, &u)?;
        let beta = &theta + &u;
        Ok(GapTriple { theta, u, beta, gap })
    }

    /// Recompute the cached gap, e.g. after editing `theta` or `u` in place.
    pub fn refresh(&mut self, spec: &PenaltySpec) -> Result<()> {
        self.gap = fenchel_young_gap(spec, &self.theta, &self.u)?;
        self.beta = &self.theta + &self.u;
        Ok(())
    }
}
