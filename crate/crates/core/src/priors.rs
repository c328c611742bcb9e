//! Unnormalized log-densities of gap-shrinkage priors.
//!
//! Every density here is `-alpha * gap + log kernel(beta)`, where `beta` is the anchor
//! reconstructed from the primal and dual blocks. Normalizing constants are never computed.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{dim_check, GapError, Result};
use crate::extended::ExtReal;
use crate::gapcore::{l1_gap, variational_nuclear_gap, NuclearDual, PenaltySpec};
use crate::quadrature;

/// Base density on the anchor `beta`, applied independently to every coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BaseKernel {
    /// `(1 + x^2)^{-1}`
    Cauchy,
    /// `exp(-x^2 / (2 s^2))`
    Gaussian(f64),
}

impl BaseKernel {
    pub fn validate(self) -> Result<Self> {
        match self {
            BaseKernel::Gaussian(s) if !(s > 0.0 && s.is_finite()) => {
                Err(GapError::InvalidParameter(format!("Gaussian kernel scale must be positive, got {s}")))
            }
            k => Ok(k),
        }
    }

    #[inline]
    pub fn log_density(self, x: f64) -> f64 {
        match self {
            BaseKernel::Cauchy => -(x * x).ln_1p(),
            BaseKernel::Gaussian(s) => -x * x / (2.0 * s * s),
        }
    }

    pub fn log_density_sum<'a, I: IntoIterator<Item = &'a f64>>(self, xs: I) -> f64 {
        xs.into_iter().map(|&x| self.log_density(x)).sum()
    }
}

/// Named hyperparameters recognised by the prior evaluators.
pub mod hyper {
    pub const LAMBDA2: &str = "lambda2";
    pub const RHO: &str = "rho";
    pub const OMEGA_CROSS: &str = "omega_cross";
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapPriorSpec {
    pub alpha: f64,
    pub penalty: PenaltySpec,
    pub kernel: BaseKernel,
    pub hyper: BTreeMap<String, f64>,
}

impl GapPriorSpec {
    pub fn new(alpha: f64, penalty: PenaltySpec, kernel: BaseKernel, hyper: BTreeMap<String, f64>) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(GapError::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        for (k, &v) in &hyper {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(GapError::InvalidParameter(format!("hyperparameter {k} must be >= 0, got {v}")));
            }
        }
        if let Some(&w) = hyper.get(hyper::OMEGA_CROSS) {
            if !(w > 0.0 && w < 1.0) {
                return Err(GapError::InvalidParameter(format!("omega_cross must lie in (0, 1), got {w}")));
            }
        }
        Ok(GapPriorSpec { alpha, penalty, kernel: kernel.validate()?, hyper })
    }

    pub fn hyper(&self, name: &str) -> Result<f64> {
        self.hyper
            .get(name)
            .copied()
            .ok_or_else(|| GapError::InvalidParameter(format!("missing hyperparameter {name}")))
    }
}

fn finite_or_neg_inf(alpha: f64, gap: ExtReal, log_kernel: f64) -> ExtReal {
    match gap {
        ExtReal::Finite(g) => ExtReal::Finite(-alpha * g + log_kernel),
        _ => ExtReal::NegInf,
    }
}

/// `-alpha sum_j (lambda - |u_j|)|theta_j| + sum_j log kernel(theta_j + u_j)`.
pub fn log_gap_prior_l1(theta: &DVector<f64>, u: &DVector<f64>, spec: &GapPriorSpec) -> Result<ExtReal> {
    let lambda = match spec.penalty {
        PenaltySpec::L1 { lambda } => lambda,
        _ => return Err(GapError::Unsupported("l1 prior needs an L1 penalty".into())),
    };
    dim_check("dual point", theta.len(), u.len())?;
    let gap = l1_gap(lambda, theta, u)?;
    let lk = spec.kernel.log_density_sum((theta + u).iter());
    Ok(finite_or_neg_inf(spec.alpha, gap, lk))
}

/// Weighted undirected graph over `m` categories with edges stored as `i < j`.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionGraph {
    nodes: usize,
    edges: Vec<(usize, usize)>,
    weights: Vec<f64>,
}

impl FusionGraph {
    pub fn new(nodes: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        let mut e = Vec::with_capacity(edges.len());
        let mut w = Vec::with_capacity(edges.len());
        for (i, j, wt) in edges {
            if i >= nodes || j >= nodes {
                return Err(GapError::InvalidParameter(format!(
                    "edge ({i}, {j}) references a node outside 0..{nodes}"
                )));
            }
            if i == j {
                return Err(GapError::InvalidParameter(format!("self loop at node {i}")));
            }
            if !(wt > 0.0 && wt.is_finite()) {
                return Err(GapError::InvalidParameter(format!("edge weight must be positive, got {wt}")));
            }
            e.push((i.min(j), i.max(j)));
            w.push(wt);
        }
        Ok(FusionGraph { nodes, edges: e, weights: w })
    }

    /// Complete graph over the categories; weight 1 within a department, `omega` across.
    pub fn from_taxonomy(departments: &[usize], omega: f64) -> Result<Self> {
        let m = departments.len();
        let mut edges = Vec::with_capacity(m * m.saturating_sub(1) / 2);
        for i in 0..m {
            for j in i + 1..m {
                let w = if departments[i] == departments[j] { 1.0 } else { omega };
                edges.push((i, j, w));
            }
        }
        FusionGraph::new(m, edges)
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Edge-node incidence matrix `B` with `+1` at the smaller and `-1` at the larger node.
    pub fn incidence(&self) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.edges.len(), self.nodes);
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            b[(e, i)] = 1.0;
            b[(e, j)] = -1.0;
        }
        b
    }

    /// `B^T diag(w) v` for an edge array `v` of shape `edges x p`.
    pub fn adjoint_weighted(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nodes, v.ncols());
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            let w = self.weights[e];
            for k in 0..v.ncols() {
                let x = w * v[(e, k)];
                out[(i, k)] += x;
                out[(j, k)] -= x;
            }
        }
        out
    }
}

/// `-alpha {rho |Lambda B theta|_{1,1} - <theta, B^T Lambda v>} + log kernel(theta + B^T Lambda v)`,
/// `-inf` once any `|v_ek|` exceeds `rho`.
pub fn log_gap_prior_fused(
    theta: &DMatrix<f64>,
    v: &DMatrix<f64>,
    graph: &FusionGraph,
    spec: &GapPriorSpec,
) -> Result<ExtReal> {
    dim_check("theta rows", graph.nodes(), theta.nrows())?;
    dim_check("dual rows", graph.len(), v.nrows())?;
    dim_check("dual columns", theta.ncols(), v.ncols())?;
    let rho = spec.hyper(hyper::RHO)?;
    if v.iter().any(|x| x.abs() > rho) {
        return Ok(ExtReal::NegInf);
    }
    let mut gap = 0.0;
    for (e, &(i, j)) in graph.edges().iter().enumerate() {
        let w = graph.weights()[e];
        for k in 0..theta.ncols() {
            let d = theta[(i, k)] - theta[(j, k)];
            gap += w * (rho * d.abs() - v[(e, k)] * d);
        }
    }
    let beta = theta + graph.adjoint_weighted(v);
    let lk = spec.kernel.log_density_sum(beta.iter());
    Ok(ExtReal::Finite(-spec.alpha * gap + lk))
}

/// Low-rank plus sparse prior on `theta = A B^T` with duals `V1`, `V2`; `lambda1 = |V1|_F`.
pub fn log_gap_prior_nuclear_sparse(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    v1: &DMatrix<f64>,
    v2: &DMatrix<f64>,
    spec: &GapPriorSpec,
) -> Result<ExtReal> {
    let lambda2 = spec.hyper(hyper::LAMBDA2)?;
    let lambda1 = v1.norm();
    let gap = variational_nuclear_gap(a, b, &NuclearDual::Pair { v1: v1.clone(), v2: v2.clone() }, lambda1, lambda2)?;
    if !gap.is_finite() {
        return Ok(ExtReal::NegInf);
    }
    let beta = a * b.transpose() + v1 + v2;
    let lk = spec.kernel.log_density_sum(beta.iter());
    Ok(finite_or_neg_inf(spec.alpha, gap, lk))
}

/// Relative accuracy targeted by [`marginal_l1_prior`].
pub const MARGINAL_REL_TOL: f64 = 1e-10;

/// `int_{-lambda}^{lambda} exp{-alpha (lambda - |u|)|theta|} / (1 + (theta + u)^2) du`.
///
/// The dual coordinate ranges over the whole box, as in the tail bound this function is
/// compared against; restricting it to the sign of `theta` roughly halves the value.
pub fn marginal_l1_prior(theta: f64, lambda: f64, alpha: f64) -> Result<f64> {
    if !(lambda > 0.0 && alpha > 0.0) || !theta.is_finite() {
        return Err(GapError::InvalidParameter(format!(
            "need lambda > 0, alpha > 0 and finite theta (got {lambda}, {alpha}, {theta})"
        )));
    }
    let t = theta.abs();
    let f = |u: f64| (-alpha * (lambda - u.abs()) * t).exp() / (1.0 + (theta + u) * (theta + u));
    let left = quadrature::integrate(f, -lambda, 0.0, 0.0, MARGINAL_REL_TOL)?;
    let right = quadrature::integrate(f, 0.0, lambda, 0.0, MARGINAL_REL_TOL)?;
    Ok(left.value + right.value)
}

/// `2 (1 - e^{-alpha lambda |theta|}) / (alpha |theta| (1 + (|theta| + lambda)^2))`, continuous at 0.
pub fn marginal_l1_lower_bound(theta: f64, lambda: f64, alpha: f64) -> f64 {
    let t = theta.abs();
    let mass = if t == 0.0 { lambda } else { -(-alpha * lambda * t).exp_m1() / (alpha * t) };
    2.0 * mass / (1.0 + (t + lambda) * (t + lambda))
}

/// Sample median; the midpoint of the two central order statistics for even lengths.
pub fn sample_median(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(GapError::InvalidParameter("median of an empty sample".into()));
    }
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len();
    Ok(if m % 2 == 1 { s[m / 2] } else { 0.5 * (s[m / 2 - 1] + s[m / 2]) })
}

/// `rho sum_{j < j'} |theta_j - theta_j'|` by the direct double sum.
pub fn pairwise_fusion_sum(theta: &[f64], rho: f64) -> f64 {
    let mut s = 0.0;
    for (i, a) in theta.iter().enumerate() {
        for b in &theta[i + 1..] {
            s += (a - b).abs();
        }
    }
    rho * s
}

/// `rho sum_t |2t - m - 1| |theta_(t) - c|` with `c` the sample median.
pub fn order_statistic_fusion_sum(theta: &[f64], rho: f64) -> Result<f64> {
    let c = sample_median(theta)?;
    let mut s = theta.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() as f64;
    let total: f64 = s
        .iter()
        .enumerate()
        .map(|(idx, x)| {
            let t = idx as f64 + 1.0;
            (2.0 * t - m - 1.0).abs() * (x - c).abs()
        })
        .sum();
    Ok(rho * total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l1_spec(lambda: f64, alpha: f64) -> GapPriorSpec {
        GapPriorSpec::new(alpha, PenaltySpec::l1(lambda).unwrap(), BaseKernel::Cauchy, BTreeMap::new()).unwrap()
    }

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn l1_prior_examples() {
        let s = l1_spec(1.0, 1.0);
        assert_eq!(log_gap_prior_l1(&v(&[0.0]), &v(&[0.0]), &s).unwrap(), ExtReal::Finite(0.0));
        let val = log_gap_prior_l1(&v(&[2.0]), &v(&[1.0]), &s).unwrap().to_f64();
        assert!((val + 10f64.ln()).abs() < 1e-14);
        assert_eq!(log_gap_prior_l1(&v(&[1.0]), &v(&[2.0]), &s).unwrap(), ExtReal::NegInf);
        assert_eq!(log_gap_prior_l1(&v(&[1.0]), &v(&[-0.5]), &s).unwrap(), ExtReal::NegInf);
        assert!(log_gap_prior_l1(&v(&[1.0]), &v(&[0.5, 0.1]), &s).is_err());
    }

    #[test]
    fn spec_validation() {
        let pen = PenaltySpec::l1(1.0).unwrap();
        assert!(GapPriorSpec::new(0.0, pen.clone(), BaseKernel::Cauchy, BTreeMap::new()).is_err());
        assert!(GapPriorSpec::new(1.0, pen.clone(), BaseKernel::Gaussian(0.0), BTreeMap::new()).is_err());
        let bad = BTreeMap::from([(hyper::OMEGA_CROSS.to_string(), 1.0)]);
        assert!(GapPriorSpec::new(1.0, pen, BaseKernel::Cauchy, bad).is_err());
    }

    fn fused_spec(rho: f64) -> GapPriorSpec {
        GapPriorSpec::new(
            1.0,
            PenaltySpec::l1(rho).unwrap(),
            BaseKernel::Gaussian(10.0),
            BTreeMap::from([(hyper::RHO.to_string(), rho)]),
        )
        .unwrap()
    }

    #[test]
    fn fused_prior_examples() {
        let g = FusionGraph::new(2, vec![(0, 1, 1.0)]).unwrap();
        let theta = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let v0 = DMatrix::zeros(1, 1);
        let val = log_gap_prior_fused(&theta, &v0, &g, &fused_spec(1.0)).unwrap().to_f64();
        assert!((val - (-1.0 - 1.0 / 200.0)).abs() < 1e-14);

        let vbig = DMatrix::from_element(1, 1, 2.0);
        assert_eq!(log_gap_prior_fused(&theta, &vbig, &g, &fused_spec(1.0)).unwrap(), ExtReal::NegInf);

        let tax = FusionGraph::from_taxonomy(&[0, 0, 1], 0.3).unwrap();
        let flat = DMatrix::from_element(3, 2, 0.7);
        let vv = DMatrix::from_fn(3, 2, |i, k| 0.1 * (i as f64) - 0.05 * k as f64);
        let val = log_gap_prior_fused(&flat, &vv, &tax, &fused_spec(1.0)).unwrap().to_f64();
        let beta = &flat + tax.adjoint_weighted(&vv);
        let lk: f64 = beta.iter().map(|x| -x * x / 200.0).sum();
        assert!((val - lk).abs() < 1e-14);

        assert!(FusionGraph::new(2, vec![(0, 2, 1.0)]).is_err());
    }

    #[test]
    fn incidence_matches_adjoint() {
        let g = FusionGraph::from_taxonomy(&[0, 1, 0, 1], 0.4).unwrap();
        let v = DMatrix::from_fn(g.len(), 3, |e, k| (e as f64 * 0.37 + k as f64).sin());
        let w = DMatrix::from_diagonal(&DVector::from_column_slice(g.weights()));
        let direct = g.incidence().transpose() * w * &v;
        assert!((direct - g.adjoint_weighted(&v)).amax() < 1e-14);
    }

    #[test]
    fn nuclear_prior_examples() {
        let spec = GapPriorSpec::new(
            1.0,
            PenaltySpec::l1(0.5).unwrap(),
            BaseKernel::Gaussian(10.0),
            BTreeMap::from([(hyper::LAMBDA2.to_string(), 0.5)]),
        )
        .unwrap();
        let z = DMatrix::zeros(2, 1);
        let zb = DMatrix::zeros(3, 1);
        let v0 = DMatrix::zeros(2, 3);
        assert_eq!(log_gap_prior_nuclear_sparse(&z, &zb, &v0, &v0, &spec).unwrap(), ExtReal::Finite(0.0));
        let mut v2 = v0.clone();
        v2[(0, 0)] = 0.6;
        assert_eq!(log_gap_prior_nuclear_sparse(&z, &zb, &v0, &v2, &spec).unwrap(), ExtReal::NegInf);

        // balanced rank-one optimum: A = B = sqrt(2) e1, V1 = lambda1 e1 e1^T with lambda1 = 1
        let a = DMatrix::from_column_slice(2, 1, &[2f64.sqrt(), 0.0]);
        let b = DMatrix::from_column_slice(3, 1, &[2f64.sqrt(), 0.0, 0.0]);
        let mut v1 = DMatrix::zeros(2, 3);
        v1[(0, 0)] = 1.0;
        let spec0 = GapPriorSpec::new(
            1.0,
            PenaltySpec::l1(0.0).unwrap(),
            BaseKernel::Gaussian(10.0),
            BTreeMap::from([(hyper::LAMBDA2.to_string(), 0.0)]),
        )
        .unwrap();
        let val = log_gap_prior_nuclear_sparse(&a, &b, &v1, &v0, &spec0).unwrap().to_f64();
        let beta = &a * b.transpose() + &v1;
        let lk: f64 = beta.iter().map(|x| -x * x / 200.0).sum();
        assert!((val - lk).abs() < 1e-12);
    }

    #[test]
    fn marginal_examples() {
        let m0 = marginal_l1_prior(0.0, 1.0, 1.0).unwrap();
        assert!((m0 - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
        let m10 = marginal_l1_prior(10.0, 1.0, 1.0).unwrap();
        assert!(m10 >= marginal_l1_lower_bound(10.0, 1.0, 1.0));
        assert!((marginal_l1_lower_bound(10.0, 1.0, 1.0) - 1.638e-3).abs() < 2e-6);
        assert!((marginal_l1_lower_bound(0.0, 1.0, 1.0) - 1.0).abs() < 1e-15);
        assert!(marginal_l1_prior(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn median_conventions() {
        assert_eq!(sample_median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(sample_median(&[4.0, 1.0, 2.0, 3.0]).unwrap(), 2.5);
        assert!(sample_median(&[]).is_err());
        let x = [0.3, -1.2, 4.0, 2.2];
        let a = pairwise_fusion_sum(&x, 0.7);
        let b = order_statistic_fusion_sum(&x, 0.7).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}
