use gapshrink::gapcore::{
    fenchel_young_gap, kl_gap, l1_gap, penalty_value, variational_additive_gap, NormKind,
    PenaltySpec, SimplexConstraint, SimplexPoint,
};
use gapshrink::linalg::{nuclear_norm, singular_values};
use gapshrink::oracles::{kl_project, project_l1_ball, prox_fused, soft_threshold, svt};
use gapshrink::priors::{order_statistic_fusion_sum, pairwise_fusion_sum};
use gapshrink::ExtReal;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn vec_strategy(len: std::ops::RangeInclusive<usize>, scale: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-scale..scale, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn l1_gap_matches_fenchel_young_on_sign_region(
        theta in vec_strategy(1..=10, 5.0),
        frac in prop::collection::vec(0.0f64..=1.0, 10),
        lambda in 0.01f64..10.0,
    ) {
        let p = theta.len();
        let theta = DVector::from_vec(theta);
        let u = DVector::from_fn(p, |j, _| theta[j].signum() * frac[j] * lambda);
        let spec = PenaltySpec::l1(lambda).unwrap();
        let a = l1_gap(lambda, &theta, &u).unwrap().finite().unwrap();
        let b = fenchel_young_gap(&spec, &theta, &u).unwrap().finite().unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{a} vs {b}");
    }

    #[test]
    fn splitting_the_dual_never_lowers_the_gap(
        z in vec_strategy(2..=6, 3.0),
        v1 in vec_strategy(6..=6, 2.0),
        v2 in vec_strategy(6..=6, 2.0),
        l1 in 0.1f64..3.0,
        l2 in 0.1f64..3.0,
        q in prop::collection::vec(-1.0f64..1.0, 36),
    ) {
        // Two cases where the conjugate of the sum has a closed form:
        // l1(a) + l1(b) = l1(a + b), and Q1 + Q2 quadratics.
        let p = z.len();
        let z = DVector::from_vec(z);
        let v = vec![
            DVector::from_fn(p, |j, _| v1[j].clamp(-l1, l1)),
            DVector::from_fn(p, |j, _| v2[j].clamp(-l2, l2)),
        ];
        let beta = &z + &v[0] + &v[1];
        let z = &beta - &v[0] - &v[1];
        let u = &v[0] + &v[1];

        let parts = vec![PenaltySpec::l1(l1).unwrap(), PenaltySpec::l1(l2).unwrap()];
        let split = variational_additive_gap(&parts, &z, &v, &beta).unwrap().to_f64();
        let exact = fenchel_young_gap(&PenaltySpec::l1(l1 + l2).unwrap(), &z, &u).unwrap().to_f64();
        prop_assert!(split >= exact - 1e-10, "{split} < {exact}");

        let m = DMatrix::from_column_slice(6, 6, &q).view((0, 0), (p, p)).into_owned();
        let q1 = &m * m.transpose() + DMatrix::identity(p, p) * 0.5;
        let q2 = DMatrix::from_diagonal(&DVector::from_fn(p, |j, _| 0.5 + q[j].abs()));
        let parts = vec![PenaltySpec::quadratic(q1.clone()).unwrap(), PenaltySpec::quadratic(q2.clone()).unwrap()];
        let split = variational_additive_gap(&parts, &z, &v, &beta).unwrap().to_f64();
        let exact = fenchel_young_gap(&PenaltySpec::quadratic(q1 + q2).unwrap(), &z, &u).unwrap().to_f64();
        prop_assert!(split >= exact - 1e-9 * (1.0 + exact.abs()), "{split} < {exact}");
    }

    #[test]
    fn balanced_factorization_attains_nuclear_norm(
        entries in prop::collection::vec(-3.0f64..3.0, 24),
        rows in 1usize..=4,
    ) {
        let cols = 24 / 4;
        let theta = DMatrix::from_column_slice(rows, cols, &entries[..rows * cols]);
        let svd = theta.clone().svd(true, true);
        let root = svd.singular_values.map(|s| s.sqrt());
        let a = svd.u.unwrap() * DMatrix::from_diagonal(&root);
        let b = svd.v_t.unwrap().transpose() * DMatrix::from_diagonal(&root);
        let half = 0.5 * (a.norm_squared() + b.norm_squared());
        let nuc = nuclear_norm(&theta).unwrap();
        prop_assert!((half - nuc).abs() <= 1e-8 * (1.0 + nuc));
        prop_assert!((&a * b.transpose() - &theta).amax() <= 1e-10);
    }

    #[test]
    fn prox_mappings_shrink_monotonically(
        beta in vec_strategy(1..=8, 5.0),
        l1 in 0.0f64..3.0,
        dl in 0.0f64..3.0,
    ) {
        let beta = DVector::from_vec(beta);
        let a = soft_threshold(&beta, l1);
        let b = soft_threshold(&beta, l1 + dl);
        for j in 0..beta.len() {
            prop_assert!(b[j].abs() <= a[j].abs() + 1e-15);
        }
        // l1-ball projection: smaller radius, smaller l1 norm
        let r = 0.1 + l1;
        let pa = project_l1_ball(&beta, r + dl).unwrap();
        let pb = project_l1_ball(&beta, r).unwrap();
        prop_assert!(NormKind::L1.eval(pb.as_slice()) <= NormKind::L1.eval(pa.as_slice()) + 1e-12);
        prop_assert!(NormKind::L1.eval(pb.as_slice()) <= r + 1e-10);
    }

    #[test]
    fn svt_shrinks_every_singular_value(
        entries in prop::collection::vec(-3.0f64..3.0, 12),
        lambda in 0.0f64..2.0,
    ) {
        let beta = DMatrix::from_column_slice(3, 4, &entries);
        let before = singular_values(&beta).unwrap();
        let after = singular_values(&svt(&beta, lambda).unwrap()).unwrap();
        for (s, t) in before.iter().zip(&after) {
            prop_assert!((t - (s - lambda).max(0.0)).abs() <= 1e-9);
        }
    }

    #[test]
    fn order_statistic_form_matches_pairwise_sum(
        theta in vec_strategy(2..=8, 10.0),
        rho in 0.01f64..5.0,
    ) {
        let pair = pairwise_fusion_sum(&theta, rho);
        let ord = order_statistic_fusion_sum(&theta, rho).unwrap();
        prop_assert!((pair - ord).abs() <= 1e-10 * (1.0 + pair.abs()));
    }

    #[test]
    fn oracle_outputs_are_feasible(
        beta in vec_strategy(2..=6, 4.0),
        a in vec_strategy(6..=6, 2.0),
        lambda in 0.05f64..3.0,
    ) {
        let p = beta.len();
        let b = DVector::from_vec(beta);
        // ADMM multiplier stays in the box and the gap is finite
        let mut d = DMatrix::zeros(p - 1, p);
        for i in 0..p - 1 {
            d[(i, i)] = -1.0;
            d[(i, i + 1)] = 1.0;
        }
        let res = prox_fused(&b, &d, lambda, 1e-9).unwrap();
        prop_assert!(res.dual.unwrap().amax() <= lambda * (1.0 + 1e-12));
        // KL projection lands in the half-space
        let w: Vec<f64> = b.iter().map(|x| x.exp()).collect();
        let beta_s = SimplexPoint::normalized(w).unwrap();
        let av = DVector::from_column_slice(&a[..p]);
        let level = 0.5 * (av.min() + av.dot(beta_s.as_vector()));
        if av.min() < level {
            let z = kl_project(&beta_s, &av, level, 1e-12).unwrap();
            prop_assert!(av.dot(z.as_vector()) <= level + 1e-9);
            let g = kl_gap(&beta_s, &z, &DVector::zeros(p), &SimplexConstraint::HalfSpace { a: av.clone(), b: level }).unwrap();
            prop_assert!(g.is_finite());
        }
    }
}

#[test]
fn indicator_penalties_are_infinite_outside() {
    let ball = PenaltySpec::norm_ball(NormKind::L2, 1.0).unwrap();
    assert_eq!(penalty_value(&ball, &DVector::from_vec(vec![1.0, 1.0])).unwrap(), ExtReal::PosInf);
    assert_eq!(penalty_value(&ball, &DVector::from_vec(vec![0.6, 0.8])).unwrap(), ExtReal::Finite(0.0));
}

#[test]
fn certification_suites_are_deterministic() {
    use gapshrink::certify::{distance_certificate, kl_certificate};
    let a = distance_certificate(9, 50, 1e-10).unwrap();
    let b = distance_certificate(9, 50, 1e-10).unwrap();
    assert_eq!(a.worst.to_bits(), b.worst.to_bits());
    let c = kl_certificate(9, 50).unwrap();
    let d = kl_certificate(9, 50).unwrap();
    assert_eq!(c.worst.to_bits(), d.worst.to_bits());
}
