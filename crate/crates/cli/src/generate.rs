//! Synthetic data sets for the three experiments.

use gapshrink::rng::{blocks, stream};
use gapshrink::samplers::std_normal;
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{CliError, Result};

#[derive(Clone, Debug)]
pub struct SparseRegression {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub theta0: DVector<f64>,
}

/// Sample sizes and signal values of the sparse regression benchmark.
pub const SPARSE_N: usize = 200;
pub const SPARSE_P: usize = 500;
pub const SPARSE_NONZEROS: usize = 5;
pub const SPARSE_VALUES: [f64; 4] = [-4.0, -2.0, 2.0, 4.0];

/// `n = 200`, `p = 500`, standard normal design, five nonzero coefficients drawn uniformly
/// from `{-4, -2, 2, 4}` at uniformly chosen positions, unit noise.
pub fn gen_sparse_regression(seed: u64) -> SparseRegression {
    let mut rng = stream(seed, 0, 0, blocks::DATA);
    let x = DMatrix::from_fn(SPARSE_N, SPARSE_P, |_, _| std_normal(&mut rng));
    let mut theta0 = DVector::zeros(SPARSE_P);
    let mut support = sample(&mut rng, SPARSE_P, SPARSE_NONZEROS).into_vec();
    support.sort_unstable();
    for j in support {
        theta0[j] = SPARSE_VALUES[rng.random_range(0..SPARSE_VALUES.len())];
    }
    let noise = DVector::from_fn(SPARSE_N, |_, _| std_normal(&mut rng));
    let y = &x * &theta0 + noise;
    SparseRegression { x, y, theta0 }
}

#[derive(Clone, Debug)]
pub struct LowRankSparse {
    pub stack: Vec<DMatrix<f64>>,
    pub theta0: DMatrix<f64>,
    pub sigma: f64,
}

pub const MATRIX_SHAPE: (usize, usize) = (50, 40);
pub const MATRIX_REPLICATES: usize = 100;
pub const MATRIX_SIGMA: f64 = 0.3;
pub const BLOCK_AMPLITUDES: [f64; 3] = [10.0, 7.0, 4.0];
pub const BLOCK_STARTS: [usize; 3] = [0, 10, 20];
pub const BLOCK_SIZE: usize = 5;

/// Three rank-one `5 x 5` diagonal blocks with unit factors `1/sqrt(5)`, so each block's
/// singular value equals its amplitude, plus `S = 100` noisy replicates with `sigma = 0.3`.
pub fn gen_lowrank_sparse(seed: u64) -> LowRankSparse {
    let (p1, p2) = MATRIX_SHAPE;
    let mut theta0 = DMatrix::zeros(p1, p2);
    for (&amp, &start) in BLOCK_AMPLITUDES.iter().zip(&BLOCK_STARTS) {
        let entry = amp / BLOCK_SIZE as f64;
        for i in start..start + BLOCK_SIZE {
            for j in start..start + BLOCK_SIZE {
                theta0[(i, j)] = entry;
            }
        }
    }
    let mut rng = stream(seed, 0, 0, blocks::DATA);
    let stack = (0..MATRIX_REPLICATES)
        .map(|_| theta0.map(|t| t + MATRIX_SIGMA * std_normal(&mut rng)))
        .collect();
    LowRankSparse { stack, theta0, sigma: MATRIX_SIGMA }
}

#[derive(Clone, Debug)]
pub struct FusedProbitData {
    pub y: DMatrix<f64>,
    pub x: DMatrix<f64>,
    pub departments: Vec<usize>,
    pub theta0: DMatrix<f64>,
}

/// Department-level coefficient rows; departments beyond the table reuse it cyclically.
const DEPARTMENT_ROWS: [[f64; 2]; 2] = [[0.8, -0.5], [-0.6, 0.7]];

/// Department-constant truth: every category in department `d` shares one coefficient row.
/// With `deviant = Some((j, delta))`, category `j` has `delta` added to its first coefficient.
/// Responses are `y_ij ~ Bernoulli(Phi(x_i^T theta_j))`.
pub fn gen_fused_probit(
    seed: u64,
    p: usize,
    departments: &[usize],
    n: usize,
    deviant: Option<(usize, f64)>,
) -> Result<FusedProbitData> {
    let m = departments.len();
    if m == 0 || n == 0 || p == 0 {
        return Err(CliError::Config("probit data needs n, m, p >= 1".into()));
    }
    let ndep = departments.iter().copied().max().unwrap_or(0) + 1;
    if (0..ndep).any(|d| !departments.contains(&d)) {
        return Err(CliError::Config(format!("departments {departments:?} do not form a partition 0..{ndep}")));
    }
    let mut theta0 = DMatrix::from_fn(m, p, |j, k| {
        let row = DEPARTMENT_ROWS[departments[j] % DEPARTMENT_ROWS.len()];
        // extra coordinates alternate the department's pattern with halved magnitude
        if k < 2 {
            row[k]
        } else {
            0.5 * row[k % 2]
        }
    });
    if let Some((j, delta)) = deviant {
        if j >= m {
            return Err(CliError::Config(format!("deviant category {j} out of range")));
        }
        theta0[(j, 0)] += delta;
    }
    let mut rng = stream(seed, 0, 0, blocks::DATA);
    let x = DMatrix::from_fn(n, p, |_, _| std_normal(&mut rng));
    let mu = &x * theta0.transpose();
    let phi = Normal::standard();
    let y = mu.map(|v| if rng.random::<f64>() < phi.cdf(v) { 1.0 } else { 0.0 });
    Ok(FusedProbitData { y, x, departments: departments.to_vec(), theta0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_truth_has_five_signed_levels() {
        let d = gen_sparse_regression(3);
        let nz: Vec<f64> = d.theta0.iter().copied().filter(|v| *v != 0.0).collect();
        assert_eq!(nz.len(), 5);
        assert!(nz.iter().all(|v| SPARSE_VALUES.contains(v)));
        // column means have sd 1/sqrt(200) ~ 0.07, so +-0.2 is a 2.8 sd band
        let inside = (0..SPARSE_P).filter(|&j| d.x.column(j).mean().abs() < 0.2).count();
        assert!(inside as f64 >= 0.98 * SPARSE_P as f64, "{inside} of {SPARSE_P}");
        // data are a deterministic function of the seed
        assert_eq!(gen_sparse_regression(3).y, d.y);
    }

    #[test]
    fn lowrank_truth_matches_its_design() {
        let d = gen_lowrank_sparse(1);
        assert!((d.theta0.norm() - 12.85).abs() < 0.01);
        let zeros = d.theta0.iter().filter(|v| **v == 0.0).count();
        assert_eq!(zeros, 1925);
        let sv = gapshrink::linalg::singular_values(&d.theta0).unwrap();
        for (s, t) in sv.iter().zip([10.0, 7.0, 4.0, 0.0]) {
            assert!((s - t).abs() < 1e-10);
        }
        assert_eq!(d.stack.len(), 100);
    }

    #[test]
    fn probit_cell_rates_match_the_link() {
        let deps = [0, 0, 1];
        let n = 20_000;
        let d = gen_fused_probit(4, 1, &deps, n, Some((1, 1.0))).unwrap();
        // marginal rate of each category against the average link probability
        let phi = Normal::standard();
        for j in 0..deps.len() {
            let empirical = d.y.column(j).mean();
            let expected = (0..n).map(|i| phi.cdf(d.x[(i, 0)] * d.theta0[(j, 0)])).sum::<f64>() / n as f64;
            assert!((empirical - expected).abs() < 3.0 / (n as f64).sqrt(), "category {j}");
        }
        assert!((d.theta0[(1, 0)] - d.theta0[(0, 0)]).abs() >= 1.0);
        let flat = gen_fused_probit(4, 2, &deps, 10, None).unwrap();
        assert_eq!(flat.theta0.row(0), flat.theta0.row(1));
        assert!(gen_fused_probit(4, 1, &[0, 2], 10, None).is_err());
    }
}
