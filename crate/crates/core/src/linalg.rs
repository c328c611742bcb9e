//! Small dense linear-algebra helpers shared by the gap functions, oracles and samplers.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{GapError, Result};

/// Iteration budget and relative tolerance for the power-iteration operator norm.
pub const POWER_ITERATIONS: usize = 100;
pub const POWER_REL_TOL: f64 = 1e-8;

/// Largest singular value of `m` by power iteration on `m^T m`.
///
/// The estimate never exceeds the true operator norm (up to rounding), so using it for a
/// feasibility test can only accept points that are at most marginally infeasible.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    let fro = m.norm();
    if fro == 0.0 {
        return 0.0;
    }
    // Deterministic start with full support: a column sum plus a ramp breaks symmetry.
    let mut x = DVector::from_fn(cols, |j, _| 1.0 + (j as f64 + 1.0).sqrt() * 1e-3);
    x /= x.norm();
    let mut sigma = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let y = m * &x;
        let z = m.transpose() * &y;
        let nz = z.norm();
        if nz == 0.0 {
            return y.norm();
        }
        let next = y.norm();
        x = z / nz;
        if (next - sigma).abs() <= POWER_REL_TOL * next.max(f64::MIN_POSITIVE) {
            sigma = next;
            break;
        }
        sigma = next;
    }
    sigma
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    let svd = m.clone().try_svd(false, false, 1e-14, 10_000).ok_or_else(|| {
        GapError::Numeric("SVD did not converge".into())
    })?;
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

pub fn nuclear_norm(m: &DMatrix<f64>) -> Result<f64> {
    Ok(singular_values(m)?.iter().sum())
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigen();
    eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Column-major reshape of a flat vector.
pub fn reshape(z: &DVector<f64>, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    if z.len() != rows * cols {
        return Err(GapError::Dimension(format!(
            "cannot view length {} as {rows}x{cols}",
            z.len()
        )));
    }
    Ok(DMatrix::from_column_slice(rows, cols, z.as_slice()))
}

pub fn flatten(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Draw from `N(P^{-1} b, P^{-1})` given a symmetric positive-definite precision `P`.
///
/// Returns `None` when `P` is not numerically positive definite.
pub fn sample_gaussian_precision<R: Rng + ?Sized>(
    precision: DMatrix<f64>,
    linear: &DVector<f64>,
    rng: &mut R,
) -> Option<DVector<f64>> {
    let n = linear.len();
    let chol = precision.cholesky()?;
    let l = chol.l_dirty();
    // mean = P^{-1} b = L^{-T} L^{-1} b; draw = L^{-T}(L^{-1} b + z)
    let mut w = linear.clone();
    if !l.solve_lower_triangular_mut(&mut w) {
        return None;
    }
    for i in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        w[i] += z;
    }
    if !l.tr_solve_lower_triangular_mut(&mut w) {
        return None;
    }
    if w.iter().all(|v| v.is_finite()) {
        Some(w)
    } else {
        None
    }
}
