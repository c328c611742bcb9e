use nalgebra::{DMatrix, DVector};

use super::penalty::{conjugate_value, penalty_value, support_function, PenaltySpec, FEASIBILITY_TOL};
use super::NEGATIVE_SLACK;
use crate::error::{dim_check, GapError, Result};
use crate::extended::ExtReal;

fn dual_box_ok(u: &[f64], lambda: f64) -> bool {
    let bound = lambda + FEASIBILITY_TOL * lambda.max(1.0);
    u.iter().all(|x| x.abs() <= bound)
}

/// Fenchel-Young gap `g*(u) + g(theta) - u^T theta`, i.e. the proximal duality gap under the
/// identification `beta = theta + u`.
pub fn fenchel_young_gap(spec: &PenaltySpec, theta: &DVector<f64>, u: &DVector<f64>) -> Result<ExtReal> {
    dim_check("dual point", theta.len(), u.len())?;
    let g = penalty_value(spec, theta)?;
    if g == ExtReal::PosInf {
        return Ok(ExtReal::PosInf);
    }
    let gs = conjugate_value(spec, u)?;
    Ok(g + gs + (-u.dot(theta)))
}

/// Primal-dual gap `f(z; beta) - d(u; beta)` of the proximal loss for independent `z` and `u`.
pub fn proximal_duality_gap(
    spec: &PenaltySpec,
    beta: &DVector<f64>,
    z: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<ExtReal> {
    dim_check("primal point", beta.len(), z.len())?;
    dim_check("dual point", beta.len(), u.len())?;
    let g = penalty_value(spec, z)?;
    if g == ExtReal::PosInf {
        return Ok(ExtReal::PosInf);
    }
    let gs = conjugate_value(spec, u)?;
    let primal = g + 0.5 * (z - beta).norm_squared();
    Ok(primal + gs + (0.5 * u.norm_squared() - u.dot(beta)))
}

/// Primal-dual gap of `1/2 |z - beta|^2 + lambda |Dz|_1` against the split dual
/// `d(u) = -1/2 |D^T u|^2 + beta^T D^T u`, `|u|_inf <= lambda`.
pub fn fused_duality_gap(
    d: &DMatrix<f64>,
    lambda: f64,
    beta: &DVector<f64>,
    z: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<ExtReal> {
    dim_check("primal point", d.ncols(), z.len())?;
    dim_check("anchor", d.ncols(), beta.len())?;
    dim_check("dual point", d.nrows(), u.len())?;
    if !dual_box_ok(u.as_slice(), lambda) {
        return Ok(ExtReal::PosInf);
    }
    let dz = d * z;
    let dtu = d.transpose() * u;
    let primal = 0.5 * (z - beta).norm_squared() + lambda * dz.iter().map(|x| x.abs()).sum::<f64>();
    let dual = -0.5 * dtu.norm_squared() + beta.dot(&dtu);
    Ok(ExtReal::Finite(primal - dual))
}

fn signed_box_gap(lambda: f64, primal: &[f64], u: &[f64]) -> ExtReal {
    if !dual_box_ok(u, lambda) {
        return ExtReal::PosInf;
    }
    let mut total = 0.0;
    for (&t, &uj) in primal.iter().zip(u) {
        // A zero primal coordinate accepts any dual sign and contributes nothing.
        if t != 0.0 && uj * t < 0.0 {
            return ExtReal::PosInf;
        }
        total += (lambda - uj.abs()) * t.abs();
    }
    ExtReal::Finite(total)
}

/// `sum_j (lambda - |u_j|) |theta_j|` on the region `|u|_inf <= lambda`, `u_j theta_j >= 0`;
/// `+inf` outside it.
pub fn l1_gap(lambda: f64, theta: &DVector<f64>, u: &DVector<f64>) -> Result<ExtReal> {
    dim_check("dual point", theta.len(), u.len())?;
    Ok(signed_box_gap(lambda, theta.as_slice(), u.as_slice()))
}

/// `sum_j (lambda - |u_j|) |(D theta)_j|` with the same sign convention on `D theta`.
pub fn generalized_l1_gap(
    d: &DMatrix<f64>,
    lambda: f64,
    theta: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<ExtReal> {
    dim_check("primal point", d.ncols(), theta.len())?;
    dim_check("dual point", d.nrows(), u.len())?;
    let dt = d * theta;
    Ok(signed_box_gap(lambda, dt.as_slice(), u.as_slice()))
}

/// `sqrt(2 gap / mu)`: the distance bound from a `mu`-strongly convex primal loss.
pub fn strong_convexity_radius(gap: f64, mu: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(GapError::InvalidParameter(format!("mu must be positive, got {mu}")));
    }
    if gap.is_nan() || gap < -NEGATIVE_SLACK {
        return Err(GapError::Contract(format!("gap must be nonnegative, got {gap:e}")));
    }
    Ok((2.0 * gap.max(0.0) / mu).sqrt())
}

/// A point of the probability simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexPoint(DVector<f64>);

impl SimplexPoint {
    pub const SUM_TOL: f64 = 1e-12;

    pub fn new(z: Vec<f64>) -> Result<Self> {
        if z.is_empty() {
            return Err(GapError::Domain("empty simplex point".into()));
        }
        if z.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(GapError::Domain("simplex entries must be finite and >= 0".into()));
        }
        let s: f64 = z.iter().sum();
        if (s - 1.0).abs() > Self::SUM_TOL {
            return Err(GapError::Domain(format!("simplex entries sum to {s}, not 1")));
        }
        Ok(SimplexPoint(DVector::from_vec(z)))
    }

    /// Normalize a nonnegative vector onto the simplex.
    pub fn normalized(z: Vec<f64>) -> Result<Self> {
        let s: f64 = z.iter().sum();
        if !(s > 0.0) {
            return Err(GapError::Domain("cannot normalize a vector with nonpositive mass".into()));
        }
        let mut v: Vec<f64> = z.iter().map(|x| x / s).collect();
        // push the rounding residue into the largest entry
        let resid = 1.0 - v.iter().sum::<f64>();
        let imax = (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap_or(0);
        v[imax] += resid;
        SimplexPoint::new(v)
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The set `C_0` intersected with the simplex in a KL projection.
#[derive(Clone, Debug, PartialEq)]
pub enum SimplexConstraint {
    /// `C_0` is the whole space.
    Free,
    /// `{z : a^T z <= b}`.
    HalfSpace { a: DVector<f64>, b: f64 },
    /// A set-indicator penalty (norm ball or group ball).
    Set(PenaltySpec),
}

impl SimplexConstraint {
    pub fn contains(&self, z: &DVector<f64>) -> Result<bool> {
        match self {
            SimplexConstraint::Free => Ok(true),
            SimplexConstraint::HalfSpace { a, b } => {
                dim_check("half-space normal", z.len(), a.len())?;
                Ok(a.dot(z) <= b + FEASIBILITY_TOL * b.abs().max(1.0))
            }
            SimplexConstraint::Set(spec) => Ok(penalty_value(spec, z)?.is_finite()),
        }
    }

    pub fn support(&self, u: &DVector<f64>) -> Result<ExtReal> {
        match self {
            SimplexConstraint::Free => Ok(if u.iter().all(|&x| x == 0.0) {
                ExtReal::ZERO
            } else {
                ExtReal::PosInf
            }),
            SimplexConstraint::HalfSpace { a, b } => {
                dim_check("half-space normal", u.len(), a.len())?;
                let aa = a.norm_squared();
                if aa == 0.0 {
                    return SimplexConstraint::Free.support(u);
                }
                let nu = u.dot(a) / aa;
                let tol = 1e-12 * u.amax().max(1.0);
                let parallel = (u - a * nu).amax() <= tol;
                if parallel && nu >= -tol {
                    Ok(ExtReal::Finite(nu.max(0.0) * b))
                } else {
                    Ok(ExtReal::PosInf)
                }
            }
            SimplexConstraint::Set(spec) => support_function(spec, u),
        }
    }
}

/// `KL(z || beta) = sum_j z_j log(z_j / beta_j)` with `0 log 0 = 0`.
pub fn kl_divergence(z: &SimplexPoint, beta: &SimplexPoint) -> Result<ExtReal> {
    dim_check("simplex point", beta.len(), z.len())?;
    let mut total = 0.0;
    for (&zj, &bj) in z.as_vector().iter().zip(beta.as_vector().iter()) {
        if zj == 0.0 {
            continue;
        }
        if bj == 0.0 {
            return Ok(ExtReal::PosInf);
        }
        total += zj * (zj / bj).ln();
    }
    Ok(ExtReal::Finite(total))
}

/// Bregman (KL) projection gap
/// `KL(z || beta) + log sum_j beta_j exp(-u_j) + sigma_{C0}(u)`.
pub fn kl_gap(
    beta: &SimplexPoint,
    z: &SimplexPoint,
    u: &DVector<f64>,
    c0: &SimplexConstraint,
) -> Result<ExtReal> {
    dim_check("simplex point", beta.len(), z.len())?;
    dim_check("dual point", beta.len(), u.len())?;
    if beta.as_vector().iter().any(|&b| b <= 0.0) {
        return Err(GapError::Domain("anchor must be strictly positive".into()));
    }
    if !c0.contains(z.as_vector())? {
        return Ok(ExtReal::PosInf);
    }
    let sigma = c0.support(u)?;
    if sigma == ExtReal::PosInf {
        return Ok(ExtReal::PosInf);
    }
    // stable log-sum-exp of log(beta_j) - u_j
    let terms: Vec<f64> = beta.as_vector().iter().zip(u.iter()).map(|(b, x)| b.ln() - x).collect();
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln();
    Ok(kl_divergence(z, beta)? + lse + sigma)
}
