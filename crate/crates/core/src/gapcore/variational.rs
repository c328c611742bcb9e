use nalgebra::{DMatrix, DVector};

use super::penalty::{conjugate_value, penalty_value, PenaltySpec, FEASIBILITY_TOL};
use crate::error::{dim_check, GapError, Result};
use crate::extended::ExtReal;

/// Absolute per-coordinate tolerance for `z = beta - sum_j v_j`.
pub const CONSISTENCY_TOL: f64 = 1e-10;

/// Variational gap for an additive penalty `g = sum_j g_j`:
/// `sum_j g_j*(v_j) + g(z) - (sum_j v_j)^T z`, evaluated at `z = beta - sum_j v_j`.
///
/// Splitting the dual across the parts replaces the infimal convolution in the exact
/// conjugate of the sum, so the value upper-bounds the Fenchel-Young gap of the sum.
pub fn variational_additive_gap(
    parts: &[PenaltySpec],
    z: &DVector<f64>,
    v: &[DVector<f64>],
    beta: &DVector<f64>,
) -> Result<ExtReal> {
    if parts.len() != v.len() {
        return Err(GapError::Dimension(format!(
            "{} penalty parts but {} dual blocks",
            parts.len(),
            v.len()
        )));
    }
    if parts.is_empty() {
        return Err(GapError::InvalidParameter("no penalty parts".into()));
    }
    dim_check("anchor", z.len(), beta.len())?;
    let mut vsum = DVector::zeros(z.len());
    for vj in v {
        dim_check("dual block", z.len(), vj.len())?;
        vsum += vj;
    }
    let worst = (beta - &vsum - z).amax();
    if worst > CONSISTENCY_TOL {
        return Err(GapError::Contract(format!(
            "z differs from beta - sum(v) by {worst:e} (tolerance {CONSISTENCY_TOL:e})"
        )));
    }
    let mut total = ExtReal::ZERO;
    for part in parts {
        total = total + penalty_value(part, z)?;
        if total == ExtReal::PosInf {
            return Ok(ExtReal::PosInf);
        }
    }
    for (part, vj) in parts.iter().zip(v) {
        total = total + conjugate_value(part, vj)?;
        if total == ExtReal::PosInf {
            return Ok(ExtReal::PosInf);
        }
    }
    Ok(total + (-vsum.dot(z)))
}

/// Dual input for [`variational_nuclear_gap`].
#[derive(Clone, Debug)]
pub enum NuclearDual {
    /// `V1 + V2` already summed; feasibility is the caller's responsibility.
    Summed(DMatrix<f64>),
    /// Separate blocks, checked against `|V1|_F <= lambda1` (which implies
    /// `|V1|_op <= lambda1`) and `|V2_ij| <= lambda2`.
    Pair { v1: DMatrix<f64>, v2: DMatrix<f64> },
}

/// Factorized nuclear plus elementwise-l1 gap
/// `lambda1/2 (|A|_F^2 + |B|_F^2) + lambda2 |A B^T|_1 - <V1 + V2, A B^T>`.
pub fn variational_nuclear_gap(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    dual: &NuclearDual,
    lambda1: f64,
    lambda2: f64,
) -> Result<ExtReal> {
    if a.ncols() != b.ncols() {
        return Err(GapError::Dimension(format!(
            "factor ranks differ: A has {} columns, B has {}",
            a.ncols(),
            b.ncols()
        )));
    }
    let shape = (a.nrows(), b.nrows());
    let check = |m: &DMatrix<f64>| -> Result<()> {
        if m.shape() != shape {
            return Err(GapError::Dimension(format!(
                "dual has shape {:?}, expected {shape:?}",
                m.shape()
            )));
        }
        Ok(())
    };
    let u = match dual {
        NuclearDual::Summed(u) => {
            check(u)?;
            u.clone()
        }
        NuclearDual::Pair { v1, v2 } => {
            check(v1)?;
            check(v2)?;
            if v1.norm() > lambda1 + FEASIBILITY_TOL * lambda1.max(1.0)
                || v2.amax() > lambda2 + FEASIBILITY_TOL * lambda2.max(1.0)
            {
                return Ok(ExtReal::PosInf);
            }
            v1 + v2
        }
    };
    let theta = a * b.transpose();
    let l1: f64 = theta.iter().map(|x| x.abs()).sum();
    let value = 0.5 * lambda1 * (a.norm_squared() + b.norm_squared()) + lambda2 * l1 - u.dot(&theta);
    Ok(ExtReal::Finite(value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gapcore::NormKind;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn additive_examples() {
        let l1b = PenaltySpec::norm_ball(NormKind::L1, 1.0).unwrap();
        let linf = PenaltySpec::norm_ball(NormKind::LInf, 1.0).unwrap();
        let g = variational_additive_gap(std::slice::from_ref(&l1b), &v(&[1.0, 0.0]), &[v(&[1.0, 0.0])], &v(&[2.0, 0.0]));
        assert_eq!(g.unwrap(), ExtReal::Finite(0.0));
        let g = variational_additive_gap(
            &[l1b.clone(), linf],
            &v(&[1.0, 0.0]),
            &[v(&[1.0, 0.0]), v(&[1.0, 1.0])],
            &v(&[3.0, 1.0]),
        );
        assert_eq!(g.unwrap(), ExtReal::Finite(1.0));
        let g = variational_additive_gap(std::slice::from_ref(&l1b), &v(&[2.0, 0.0]), &[v(&[0.0, 0.0])], &v(&[2.0, 0.0]));
        assert_eq!(g.unwrap(), ExtReal::PosInf);
    }

    #[test]
    fn additive_consistency_is_checked() {
        let l1b = PenaltySpec::norm_ball(NormKind::L1, 1.0).unwrap();
        let r = variational_additive_gap(std::slice::from_ref(&l1b), &v(&[1.0, 0.0]), &[v(&[1.0, 0.0])], &v(&[2.0, 1e-9]));
        assert!(matches!(r, Err(GapError::Contract(_))));
        let r = variational_additive_gap(&[l1b], &v(&[1.0, 0.0]), &[], &v(&[1.0, 0.0]));
        assert!(matches!(r, Err(GapError::Dimension(_))));
    }

    #[test]
    fn nuclear_examples() {
        let s2 = 2f64.sqrt();
        let e1 = |c: f64| DMatrix::from_column_slice(2, 1, &[c, 0.0]);
        let e11 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let zero = DMatrix::zeros(2, 2);
        let pair = NuclearDual::Pair { v1: e11.clone(), v2: zero.clone() };
        let g = variational_nuclear_gap(&e1(s2), &e1(s2), &pair, 1.0, 0.0).unwrap().finite().unwrap();
        assert!(g.abs() < 1e-12);
        let g = variational_nuclear_gap(&e1(2.0), &e1(1.0), &pair, 1.0, 0.0).unwrap().finite().unwrap();
        assert!((g - 0.5).abs() < 1e-12);
        let pair = NuclearDual::Pair { v1: zero.clone(), v2: e11.clone() };
        let g = variational_nuclear_gap(&e1(s2), &e1(s2), &pair, 0.0, 1.0).unwrap().finite().unwrap();
        assert!(g.abs() < 1e-12);
        let infeasible = NuclearDual::Pair { v1: zero, v2: e11 * 2.0 };
        assert_eq!(variational_nuclear_gap(&e1(s2), &e1(s2), &infeasible, 0.0, 1.0).unwrap(), ExtReal::PosInf);
        let bad_rank = DMatrix::zeros(2, 2);
        assert!(variational_nuclear_gap(&e1(1.0), &bad_rank, &NuclearDual::Summed(DMatrix::zeros(2, 2)), 1.0, 0.0).is_err());
    }
}
