use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{dim_check, GapError, Result};
use crate::extended::ExtReal;
use crate::linalg;

/// Relative slack when testing membership in a norm ball (`|z| <= r (1 + tol)` style).
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Absolute slack on `|u|_op <= lambda` for the nuclear-norm conjugate.
pub const NUCLEAR_FEASIBILITY_MARGIN: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    L1,
    L2,
    LInf,
}

impl NormKind {
    pub fn eval(self, z: &[f64]) -> f64 {
        match self {
            NormKind::L1 => z.iter().map(|v| v.abs()).sum(),
            NormKind::L2 => z.iter().map(|v| v * v).sum::<f64>().sqrt(),
            NormKind::LInf => z.iter().fold(0.0, |m, v| f64::max(m, v.abs())),
        }
    }

    pub fn dual(self) -> NormKind {
        match self {
            NormKind::L1 => NormKind::LInf,
            NormKind::L2 => NormKind::L2,
            NormKind::LInf => NormKind::L1,
        }
    }
}

/// Algebraic description of the penalty `g` in `1/2 |beta - z|^2 + g(z)`.
#[derive(Clone, Debug, PartialEq)]
pub enum PenaltySpec {
    /// `lambda |z|_1`
    L1 { lambda: f64 },
    /// `lambda |D z|_1` with `D` of shape `d x p`.
    GeneralizedL1 { d: DMatrix<f64>, lambda: f64 },
    /// Indicator of `{z : |z| <= radius}`.
    NormBall { norm: NormKind, radius: f64 },
    /// Indicator of the intersection of `{z : |z_G|_2 <= r_G}` over the groups.
    GroupL2 {
        dim: usize,
        groups: Vec<Vec<usize>>,
        radii: Vec<f64>,
    },
    /// `lambda |Z|_*` for `Z` of shape `rows x cols`.
    Nuclear {
        lambda: f64,
        rows: usize,
        cols: usize,
    },
    /// `1/2 z^T Q z` with `Q` symmetric positive definite.
    Quadratic { q: DMatrix<f64> },
    Sum(Vec<PenaltySpec>),
}

fn nonneg(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(GapError::InvalidParameter(format!("{name} must be finite and >= 0, got {v}")))
    }
}

impl PenaltySpec {
    pub fn l1(lambda: f64) -> Result<Self> {
        nonneg("lambda", lambda)?;
        Ok(PenaltySpec::L1 { lambda })
    }

    pub fn generalized_l1(d: DMatrix<f64>, lambda: f64) -> Result<Self> {
        nonneg("lambda", lambda)?;
        if d.nrows() == 0 || d.ncols() == 0 {
            return Err(GapError::InvalidParameter("D must have at least one row and column".into()));
        }
        Ok(PenaltySpec::GeneralizedL1 { d, lambda })
    }

    pub fn norm_ball(norm: NormKind, radius: f64) -> Result<Self> {
        nonneg("radius", radius)?;
        Ok(PenaltySpec::NormBall { norm, radius })
    }

    pub fn group_l2(dim: usize, groups: Vec<Vec<usize>>, radii: Vec<f64>) -> Result<Self> {
        if groups.len() != radii.len() {
            return Err(GapError::InvalidParameter("one radius per group required".into()));
        }
        for r in &radii {
            nonneg("radius", *r)?;
        }
        for g in &groups {
            if g.is_empty() || g.iter().any(|&i| i >= dim) {
                return Err(GapError::InvalidParameter(format!(
                    "group {g:?} is empty or indexes outside 0..{dim}"
                )));
            }
        }
        Ok(PenaltySpec::GroupL2 { dim, groups, radii })
    }

    pub fn nuclear(lambda: f64, rows: usize, cols: usize) -> Result<Self> {
        nonneg("lambda", lambda)?;
        Ok(PenaltySpec::Nuclear { lambda, rows, cols })
    }

    pub fn quadratic(q: DMatrix<f64>) -> Result<Self> {
        if !q.is_square() || q.nrows() == 0 {
            return Err(GapError::InvalidParameter("Q must be square and nonempty".into()));
        }
        if (&q - q.transpose()).amax() > 1e-12 * q.amax().max(1.0) {
            return Err(GapError::InvalidParameter("Q must be symmetric".into()));
        }
        if q.clone().cholesky().is_none() {
            return Err(GapError::InvalidParameter("Q must be positive definite".into()));
        }
        Ok(PenaltySpec::Quadratic { q })
    }

    pub fn sum(parts: Vec<PenaltySpec>) -> Result<Self> {
        if parts.is_empty() {
            return Err(GapError::InvalidParameter("empty sum".into()));
        }
        let mut dim = None;
        for p in &parts {
            if let Some(d) = p.dim() {
                match dim {
                    None => dim = Some(d),
                    Some(d0) if d0 != d => {
                        return Err(GapError::Dimension(format!(
                            "sum parts disagree on domain dimension ({d0} vs {d})"
                        )))
                    }
                    _ => {}
                }
            }
        }
        Ok(PenaltySpec::Sum(parts))
    }

    /// Domain dimension when the spec pins one; `None` for dimension-free kinds (`L1`,
    /// `NormBall`).
    pub fn dim(&self) -> Option<usize> {
        match self {
            PenaltySpec::L1 { .. } | PenaltySpec::NormBall { .. } => None,
            PenaltySpec::GeneralizedL1 { d, .. } => Some(d.ncols()),
            PenaltySpec::GroupL2 { dim, .. } => Some(*dim),
            PenaltySpec::Nuclear { rows, cols, .. } => Some(rows * cols),
            PenaltySpec::Quadratic { q } => Some(q.nrows()),
            PenaltySpec::Sum(parts) => parts.iter().find_map(|p| p.dim()),
        }
    }

    pub fn is_indicator(&self) -> bool {
        matches!(self, PenaltySpec::NormBall { .. } | PenaltySpec::GroupL2 { .. })
    }

    pub(crate) fn check_point(&self, z: &DVector<f64>) -> Result<()> {
        match self.dim() {
            Some(d) => dim_check("point", d, z.len()),
            None => Ok(()),
        }
    }
}

fn within(value: f64, radius: f64) -> bool {
    value <= radius + FEASIBILITY_TOL * radius.max(1.0)
}

/// `g(z)`; `+inf` for indicator penalties outside their set.
pub fn penalty_value(spec: &PenaltySpec, z: &DVector<f64>) -> Result<ExtReal> {
    spec.check_point(z)?;
    Ok(match spec {
        PenaltySpec::L1 { lambda } => ExtReal::Finite(lambda * NormKind::L1.eval(z.as_slice())),
        PenaltySpec::GeneralizedL1 { d, lambda } => {
            ExtReal::Finite(lambda * NormKind::L1.eval((d * z).as_slice()))
        }
        PenaltySpec::NormBall { norm, radius } => {
            if within(norm.eval(z.as_slice()), *radius) {
                ExtReal::ZERO
            } else {
                ExtReal::PosInf
            }
        }
        PenaltySpec::GroupL2 { groups, radii, .. } => {
            let inside = groups.iter().zip(radii).all(|(g, &r)| {
                let n = g.iter().map(|&i| z[i] * z[i]).sum::<f64>().sqrt();
                within(n, r)
            });
            if inside {
                ExtReal::ZERO
            } else {
                ExtReal::PosInf
            }
        }
        PenaltySpec::Nuclear { lambda, rows, cols } => {
            let m = linalg::reshape(z, *rows, *cols)?;
            ExtReal::Finite(lambda * linalg::nuclear_norm(&m)?)
        }
        PenaltySpec::Quadratic { q } => ExtReal::Finite(0.5 * z.dot(&(q * z))),
        PenaltySpec::Sum(parts) => {
            let mut total = ExtReal::ZERO;
            for p in parts {
                total = total + penalty_value(p, z)?;
                if total == ExtReal::PosInf {
                    break;
                }
            }
            total
        }
    })
}

/// Support function of a set-indicator spec: `sup_{w in C} u^T w`.
///
/// For [`PenaltySpec::GroupL2`] the groups must be pairwise disjoint, in which case the set is
/// a product of balls and the support function is `sum_j r_j |u_{G_j}|_2`. Coordinates outside
/// every group are unconstrained, so any nonzero dual mass there gives `+inf`.
pub fn support_function(ball: &PenaltySpec, u: &DVector<f64>) -> Result<ExtReal> {
    ball.check_point(u)?;
    match ball {
        PenaltySpec::NormBall { norm, radius } => {
            Ok(ExtReal::Finite(radius * norm.dual().eval(u.as_slice())))
        }
        PenaltySpec::GroupL2 { dim, groups, radii } => {
            let mut covered = vec![false; *dim];
            for g in groups {
                for &i in g {
                    if covered[i] {
                        return Err(GapError::Unsupported(
                            "support function of overlapping groups; split them into a Sum and \
                             use variational_additive_gap"
                                .into(),
                        ));
                    }
                    covered[i] = true;
                }
            }
            if covered.iter().zip(u.iter()).any(|(&c, &v)| !c && v != 0.0) {
                return Ok(ExtReal::PosInf);
            }
            let s = groups
                .iter()
                .zip(radii)
                .map(|(g, r)| r * g.iter().map(|&i| u[i] * u[i]).sum::<f64>().sqrt())
                .sum();
            Ok(ExtReal::Finite(s))
        }
        _ => Err(GapError::Unsupported("support function of a non-set penalty".into())),
    }
}

/// Fenchel conjugate `g*(u) = sup_w u^T w - g(w)`.
pub fn conjugate_value(spec: &PenaltySpec, u: &DVector<f64>) -> Result<ExtReal> {
    spec.check_point(u)?;
    match spec {
        PenaltySpec::L1 { lambda } => {
            if within(NormKind::LInf.eval(u.as_slice()), *lambda) {
                Ok(ExtReal::ZERO)
            } else {
                Ok(ExtReal::PosInf)
            }
        }
        PenaltySpec::NormBall { .. } | PenaltySpec::GroupL2 { .. } => support_function(spec, u),
        PenaltySpec::Quadratic { q } => {
            let chol = q.clone().cholesky().ok_or_else(|| {
                GapError::Numeric("Q lost positive definiteness".into())
            })?;
            let x = chol.solve(u);
            Ok(ExtReal::Finite(0.5 * u.dot(&x)))
        }
        PenaltySpec::Nuclear { lambda, rows, cols } => {
            let m = linalg::reshape(u, *rows, *cols)?;
            if linalg::operator_norm(&m) <= lambda + NUCLEAR_FEASIBILITY_MARGIN {
                Ok(ExtReal::ZERO)
            } else {
                Ok(ExtReal::PosInf)
            }
        }
        PenaltySpec::GeneralizedL1 { .. } => Err(GapError::Unsupported(
            "conjugate of lambda |Dz|_1 has no closed form; use generalized_l1_gap with a \
             dual point in R^d"
                .into(),
        )),
        PenaltySpec::Sum(_) => Err(GapError::Unsupported(
            "conjugate of a sum is an infimal convolution; use variational_additive_gap".into(),
        )),
    }
}
