use gapshrink::diagnostics::singular_value_posterior;
use gapshrink::rng::{blocks, stream};
use gapshrink::samplers::{
    factor_draws, gibbs_bayesian_lasso, gibbs_fused_probit, gibbs_gdp, gibbs_matrix_smoothing,
    gibbs_sparse_regression, std_normal, GapSparseSampler, GibbsModel, MatrixData, MatrixSampler,
    PosteriorSamples, RegressionData, SamplerConfig,
};
use nalgebra::{DMatrix, DVector};

fn short(seed: u64) -> SamplerConfig {
    SamplerConfig { warmup: 500, retain: 500, seed, ..SamplerConfig::default() }
}

fn coefficient_means(s: &PosteriorSamples, p: usize) -> Vec<f64> {
    (0..p).map(|j| s.mean_of(&format!("theta[{j}]")).unwrap()).collect()
}

/// Well-conditioned design with a strong, low-noise signal, plus its OLS fit.
fn ols_problem() -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
    let (n, p) = (50, 5);
    let mut rng = stream(17, 0, 0, blocks::DATA);
    let x = DMatrix::from_fn(n, p, |_, _| std_normal(&mut rng));
    let truth = DVector::from_vec(vec![1.5, -2.0, 0.7, 3.0, -1.0]);
    let y = &x * &truth + DVector::from_fn(n, |_, _| 0.01 * std_normal(&mut rng));
    let xt = x.transpose();
    let ols = (&xt * &x).cholesky().unwrap().solve(&(&xt * &y));
    (x, y, ols)
}

#[test]
fn strong_signal_recovers_least_squares() {
    let (x, y, ols) = ols_problem();
    let runs = [
        ("gap", gibbs_sparse_regression(&x, &y, &short(1)).unwrap()),
        ("lasso", gibbs_bayesian_lasso(&x, &y, &short(1)).unwrap()),
        ("gdp", gibbs_gdp(&x, &y, &short(1)).unwrap()),
    ];
    for (name, s) in &runs {
        for (j, m) in coefficient_means(s, 5).iter().enumerate() {
            assert!((m - ols[j]).abs() < 0.05, "{name}: theta[{j}] mean {m} vs OLS {}", ols[j]);
        }
    }
}

#[test]
fn null_signal_shrinks_to_zero() {
    let (n, p) = (60, 10);
    let mut rng = stream(23, 0, 0, blocks::DATA);
    let x = DMatrix::from_fn(n, p, |_, _| std_normal(&mut rng));
    let y = DVector::zeros(n);
    for s in [
        gibbs_sparse_regression(&x, &y, &short(2)).unwrap(),
        gibbs_bayesian_lasso(&x, &y, &short(2)).unwrap(),
        gibbs_gdp(&x, &y, &short(2)).unwrap(),
    ] {
        for m in coefficient_means(&s, p) {
            assert!(m.abs() < 0.1, "{}: mean {m}", s.meta.model);
        }
    }
}

#[test]
fn sparse_draws_are_feasible_and_reproducible() {
    let (x, y, _) = ols_problem();
    let cfg = SamplerConfig { warmup: 50, retain: 100, seed: 4, ..SamplerConfig::default() };
    let a = gibbs_sparse_regression(&x, &y, &cfg).unwrap();
    let b = gibbs_sparse_regression(&x, &y, &cfg).unwrap();
    let mut csv_a = Vec::new();
    let mut csv_b = Vec::new();
    a.write_csv(&mut csv_a).unwrap();
    b.write_csv(&mut csv_b).unwrap();
    assert_eq!(csv_a, csv_b);

    let other = gibbs_sparse_regression(&x, &y, &SamplerConfig { chain: 1, ..cfg.clone() }).unwrap();
    assert_ne!(a.column(0), other.column(0));

    let lam = a.index_of("lambda").unwrap();
    let gap = a.index_of("gap").unwrap();
    let u0 = a.index_of("u[0]").unwrap();
    for i in 0..a.nrows() {
        let row = a.row(i);
        for j in 0..5 {
            let (t, u) = (row[j], row[u0 + j]);
            assert!(u.abs() <= row[lam] * (1.0 + 1e-12));
            assert!(t == 0.0 || t * u >= 0.0, "sign convention violated");
        }
        assert!(row[gap].is_finite() && row[gap] >= -1e-10);
    }
    assert_eq!(a.nrows(), 100);
}

#[test]
fn thinning_controls_row_count() {
    let (x, y, _) = ols_problem();
    let cfg = SamplerConfig { warmup: 10, retain: 90, thin: 3, seed: 5, ..SamplerConfig::default() };
    assert_eq!(gibbs_sparse_regression(&x, &y, &cfg).unwrap().nrows(), 30);
}

#[test]
fn sigma2_update_matches_its_inverse_gamma_law() {
    let (x, y, _) = ols_problem();
    let data = RegressionData::new(x.clone(), y.clone()).unwrap();
    let mut sampler = GapSparseSampler::new(data, short(6)).unwrap();
    for s in 0..20 {
        sampler.sweep(s, true).unwrap();
    }
    let theta = sampler.state.theta.clone();
    let rss = (&y - &x * &theta).norm_squared();
    let (a0, b0) = SamplerConfig::default().hyper.sigma2;
    let shape = a0 + 0.5 * y.len() as f64;
    let scale = b0 + 0.5 * rss;
    let want_mean = scale / (shape - 1.0);
    let want_var = want_mean * want_mean / (shape - 2.0);

    let mut rng = stream(6, 0, 0, blocks::EXTRA);
    let n = 100_000;
    let mut draws = Vec::with_capacity(n);
    for _ in 0..n {
        sampler.update_sigma2(&mut rng).unwrap();
        draws.push(sampler.state.sigma2);
    }
    let m = draws.iter().sum::<f64>() / n as f64;
    let v = draws.iter().map(|d| (d - m) * (d - m)).sum::<f64>() / (n - 1) as f64;
    assert!((m / want_mean - 1.0).abs() < 0.02, "mean {m} vs {want_mean}");
    assert!((v / want_var - 1.0).abs() < 0.02 * 3.0, "variance {v} vs {want_var}");
}

#[test]
fn matrix_sigma2_update_matches_its_inverse_gamma_law() {
    let mut rng = stream(31, 0, 0, blocks::DATA);
    let stack: Vec<DMatrix<f64>> = (0..10).map(|_| DMatrix::from_fn(4, 3, |_, _| std_normal(&mut rng))).collect();
    let data = MatrixData::from_stack(&stack).unwrap();
    let cfg = SamplerConfig { rank: 2, ..short(7) };
    let mut sampler = MatrixSampler::new(data.clone(), cfg).unwrap();
    for s in 0..20 {
        sampler.sweep(s, true).unwrap();
    }
    let theta = sampler.state.theta();
    let rss: f64 = stack.iter().map(|y| (y - &theta).norm_squared()).sum();
    let shape = 1.0 + 0.5 * 120.0;
    let scale = 1.0 + 0.5 * rss;
    let want_mean = scale / (shape - 1.0);
    let mut total = 0.0;
    let n = 100_000;
    for _ in 0..n {
        sampler.update_sigma2(&mut rng).unwrap();
        total += sampler.state.sigma2;
    }
    assert!((total / n as f64 / want_mean - 1.0).abs() < 0.02);
}

#[test]
fn tiny_rank_one_matrix_is_recovered() {
    let (p1, p2, reps) = (6, 5, 1000);
    let u = DVector::from_vec(vec![1.0, -0.5, 0.0, 0.8, 0.0, 0.3]);
    let v = DVector::from_vec(vec![2.0, 0.0, -1.0, 0.5, 0.0]);
    let truth = &u * v.transpose();
    let mut rng = stream(41, 0, 0, blocks::DATA);
    let stack: Vec<DMatrix<f64>> = (0..reps).map(|_| truth.map(|t| t + 0.01 * std_normal(&mut rng))).collect();
    let cfg = SamplerConfig { rank: 2, warmup: 1000, retain: 1000, seed: 8, store_duals: true, ..SamplerConfig::default() };
    let s = gibbs_matrix_smoothing(&stack, &cfg).unwrap();
    let (a, b) = factor_draws(&s, p1, p2, 2).unwrap();
    let mut mean = DMatrix::zeros(p1, p2);
    for (ai, bi) in a.iter().zip(&b) {
        mean += ai * bi.transpose();
    }
    mean /= a.len() as f64;
    let err = (&mean - &truth).norm();
    assert!(err < 0.05, "Frobenius error {err}");

    let sv = singular_value_posterior(&a, &b).unwrap();
    assert!((sv.mean[0] - u.norm() * v.norm()).abs() < 0.05);

    // dual feasibility on every retained draw
    let l2 = s.index_of("lambda2").unwrap();
    let v2 = s.index_of("V2[0,0]").unwrap();
    for i in 0..s.nrows() {
        let row = s.row(i);
        assert!(row[v2..v2 + p1 * p2].iter().all(|x| x.abs() <= row[l2] * (1.0 + 1e-12)));
        assert!(row[s.index_of("gap").unwrap()] >= -1e-10);
    }
}

/// Probit data drawn through the latent-threshold construction.
fn probit_data(theta0: &DMatrix<f64>, n: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut rng = stream(seed, 0, 0, blocks::DATA);
    let x = DMatrix::from_fn(n, theta0.ncols(), |_, _| std_normal(&mut rng));
    let mu = &x * theta0.transpose();
    let y = mu.map(|m| if m + std_normal(&mut rng) > 0.0 { 1.0 } else { 0.0 });
    (y, x)
}

fn mean_abs_difference(s: &PosteriorSamples, i: usize, j: usize, p: usize) -> f64 {
    let mut acc = 0.0;
    for k in 0..p {
        let a = s.column_by_name(&format!("theta[{i},{k}]")).unwrap();
        let b = s.column_by_name(&format!("theta[{j},{k}]")).unwrap();
        acc += a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64;
    }
    acc / p as f64
}

fn department_truth(deps: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(deps.len(), 2, |j, k| match (deps[j], k) {
        (0, 0) => 0.8,
        (0, _) => -0.5,
        (_, 0) => -0.6,
        _ => 0.7,
    })
}

#[test]
fn fused_probit_merges_departments_and_flags_a_deviant() {
    let deps = vec![0, 0, 0, 0, 1, 1, 1, 1];
    let cfg = SamplerConfig { warmup: 1000, retain: 1000, seed: 9, ..SamplerConfig::default() };

    let theta0 = department_truth(&deps);
    let (y, x) = probit_data(&theta0, 2000, 51);
    let s = gibbs_fused_probit(&y, &x, &deps, &cfg).unwrap();
    let mut within = Vec::new();
    for i in 0..8 {
        for j in i + 1..8 {
            if deps[i] == deps[j] {
                within.push(mean_abs_difference(&s, i, j, 2));
            }
        }
    }
    assert!(within.iter().all(|d| *d < 0.1), "{within:?}");
    // unrelated departments: the cross weight is pushed low
    assert!(s.mean_of("omega").unwrap() < 0.2);

    let mut theta_dev = theta0.clone();
    theta_dev[(2, 0)] += 1.2;
    let (y, x) = probit_data(&theta_dev, 2000, 52);
    let s = gibbs_fused_probit(&y, &x, &deps, &cfg).unwrap();
    let deviant: Vec<f64> = [0, 1, 3].iter().map(|&j| mean_abs_difference(&s, 2, j, 2)).collect();
    let others: Vec<f64> = [(0, 1), (0, 3), (1, 3)].iter().map(|&(i, j)| mean_abs_difference(&s, i, j, 2)).collect();
    let dmin = deviant.iter().copied().fold(f64::INFINITY, f64::min);
    let omax = others.iter().copied().fold(0.0, f64::max);
    assert!(dmin >= 3.0 * omax, "deviant {deviant:?} vs others {others:?}");

    // dual feasibility
    let rho = s.index_of("rho").unwrap();
    let v0 = s.index_of("v[0,0]").unwrap();
    for i in 0..s.nrows() {
        let row = s.row(i);
        assert!(row[v0..rho].iter().all(|v| v.abs() <= row[rho] * (1.0 + 1e-12)));
    }
}

#[test]
fn fused_probit_rejects_an_empty_department() {
    let deps = vec![0, 0, 2, 2];
    let theta0 = DMatrix::from_element(4, 1, 0.5);
    let (y, x) = probit_data(&theta0, 50, 3);
    assert!(gibbs_fused_probit(&y, &x, &deps, &short(1)).is_err());
}
