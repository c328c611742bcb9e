use nalgebra::{DMatrix, DVector};

use super::penalty::PenaltySpec;
use crate::error::{dim_check, GapError, Result};
use crate::linalg;

/// The `(theta, u)` block of `alpha * [[hess g(theta), -I], [-I, hess g*(u)]]` together with its
/// smallest eigenvalue.
#[derive(Clone, Debug)]
pub struct HessianBlock {
    pub matrix: DMatrix<f64>,
    pub min_eigenvalue: f64,
}

/// Curvature of the gap term in the log-posterior. At the primal-dual optimum
/// `hess g*(u) = (hess g(theta))^{-1}`, so the block is singular; a near-zero smallest
/// eigenvalue signals the near-deterministic `theta`-`u` relation that large `alpha` induces.
///
/// Only twice-differentiable penalties are supported, i.e. [`PenaltySpec::Quadratic`].
pub fn hessian_block(
    spec: &PenaltySpec,
    theta: &DVector<f64>,
    u: &DVector<f64>,
    alpha: f64,
) -> Result<HessianBlock> {
    let q = match spec {
        PenaltySpec::Quadratic { q } => q,
        _ => {
            return Err(GapError::Unsupported(
                "Hessian block needs a twice-differentiable penalty (Quadratic)".into(),
            ))
        }
    };
    if !(alpha > 0.0) {
        return Err(GapError::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    let p = q.nrows();
    dim_check("theta", p, theta.len())?;
    dim_check("u", p, u.len())?;
    let q_inv = q
        .clone()
        .cholesky()
        .ok_or_else(|| GapError::Numeric("Q is not positive definite".into()))?
        .inverse();
    let mut m = DMatrix::zeros(2 * p, 2 * p);
    m.view_mut((0, 0), (p, p)).copy_from(q);
    m.view_mut((p, p), (p, p)).copy_from(&q_inv);
    for i in 0..p {
        m[(i, p + i)] = -1.0;
        m[(p + i, i)] = -1.0;
    }
    m *= alpha;
    let min_eigenvalue = linalg::min_eigenvalue(&m);
    Ok(HessianBlock { matrix: m, min_eigenvalue })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_quadratic_block_is_singular() {
        let spec = PenaltySpec::quadratic(DMatrix::identity(2, 2)).unwrap();
        let x = DVector::from_vec(vec![0.3, -1.0]);
        let h = hessian_block(&spec, &x, &x, 1.0).unwrap();
        assert_eq!(h.matrix[(0, 0)], 1.0);
        assert_eq!(h.matrix[(0, 2)], -1.0);
        assert_eq!(h.matrix[(2, 2)], 1.0);
        assert!(h.min_eigenvalue.abs() < 1e-12);
    }

    #[test]
    fn scaled_quadratic_block() {
        // Eigen-decomposition oracle: [[2,-1],[-1,1/2]] has det 0 and trace 5/2.
        let spec = PenaltySpec::quadratic(DMatrix::identity(2, 2) * 2.0).unwrap();
        let x = DVector::zeros(2);
        let h = hessian_block(&spec, &x, &x, 1.0).unwrap();
        assert!(h.min_eigenvalue.abs() < 1e-12);
        assert!((h.matrix[(2, 2)] - 0.5).abs() < 1e-15);
        let h10 = hessian_block(&spec, &x, &x, 10.0).unwrap();
        assert!(h10.min_eigenvalue.abs() < 1e-10);
        assert!((h10.matrix[(0, 0)] - 20.0).abs() < 1e-12);
    }

    #[test]
    fn nonsmooth_is_unsupported() {
        let x = DVector::zeros(2);
        let r = hessian_block(&PenaltySpec::l1(1.0).unwrap(), &x, &x, 1.0);
        assert!(matches!(r, Err(GapError::Unsupported(_))));
    }
}
