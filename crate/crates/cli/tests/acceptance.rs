//! Acceptance suite: every criterion at its stated tolerance and at full scale.
//!
//! Each criterion prints one `criterion N: PASS|FAIL ...` line; the test fails if any
//! criterion fails. Limits come from the bundled thresholds file, the same source the CLI
//! reports use. Run with `cargo test -p gapshrink-cli --test acceptance`.

use std::io::Write;
use std::time::Instant;

use gapshrink::certify::{
    conditional_suite, distance_certificate, kl_certificate, nonnegativity, zero_gap_at_optimum, SuiteReport,
};
use gapshrink::diagnostics::{acf, ess};
use gapshrink::priors::{marginal_l1_lower_bound, marginal_l1_prior, order_statistic_fusion_sum, pairwise_fusion_sum};
use gapshrink::rng::stream;
use gapshrink::samplers::std_normal;
use gapshrink_cli::experiments::{CERTIFICATE_CASES, NONNEGATIVITY_CASES};
use gapshrink_cli::{run_experiment, ExperimentConfig, ExperimentId, RunReport, Thresholds};
use rand::Rng;

/// Seed of the certification suites and of the random inputs below.
const SEED: u64 = 20;

struct Outcome {
    id: &'static str,
    passed: bool,
    detail: String,
}

impl Outcome {
    fn line(&self) -> String {
        format!("criterion {}: {} {}", self.id, if self.passed { "PASS" } else { "FAIL" }, self.detail)
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed().as_secs_f64())
}

fn suite_detail(s: &SuiteReport, seconds: f64) -> String {
    format!("[{} cases, worst {:.3e} vs {:.1e}, {} infinite, {:.2} s]", s.cases, s.worst, s.limit, s.infinite, seconds)
}

fn experiment(id: ExperimentId, dir: &tempfile::TempDir) -> RunReport {
    let cfg = ExperimentConfig { out: dir.path().join(id.as_str()), ..ExperimentConfig::defaults(id) };
    run_experiment(&cfg).expect("experiment runs")
}

fn failures(report: &RunReport) -> String {
    let mut bad: Vec<String> = report.checks.iter().filter(|c| !c.passed).map(|c| c.line()).collect();
    bad.extend(report.replications.iter().filter_map(|r| r.error.as_ref().map(|e| format!("{}: {e}", r.label))));
    if let Some(b) = report.timing.budget.as_ref().filter(|b| !b.passed) {
        bad.push(b.line());
    }
    bad.join("; ")
}

fn run_all() -> Vec<Outcome> {
    let t = Thresholds::builtin();
    let g = &t.gap_check;
    let dir = tempfile::tempdir().unwrap();
    let mut out = Vec::new();

    let (s, secs) = timed(|| nonnegativity(SEED, NONNEGATIVITY_CASES).unwrap());
    out.push(Outcome {
        id: "1 (gap nonnegativity)",
        passed: -s.worst >= g.nonnegativity_floor && s.infinite == 0 && secs < g.nonnegativity_seconds,
        detail: suite_detail(&s, secs),
    });

    let (s, secs) = timed(|| distance_certificate(SEED + 1, CERTIFICATE_CASES, g.admm_tol).unwrap());
    out.push(Outcome {
        id: "2 (distance certificate)",
        passed: s.worst <= g.distance_slack && s.infinite == 0 && secs < g.distance_seconds,
        detail: suite_detail(&s, secs),
    });

    let (s, secs) = timed(|| kl_certificate(SEED + 2, CERTIFICATE_CASES).unwrap());
    out.push(Outcome {
        id: "3 (KL certificate)",
        passed: s.worst <= g.kl_slack && s.infinite == 0 && secs < g.kl_seconds,
        detail: suite_detail(&s, secs),
    });

    let z = zero_gap_at_optimum(SEED + 3, CERTIFICATE_CASES, g.admm_tol).unwrap();
    let admm_limit = g.zero_gap_admm_factor * g.admm_tol;
    out.push(Outcome {
        id: "4 (zero gap at optimum)",
        passed: z.closed_form.worst <= g.zero_gap_closed_form
            && z.iterative.worst <= admm_limit
            && z.closed_form.infinite + z.iterative.infinite == 0,
        detail: format!(
            "[closed form {:.3e} <= {:.1e} over {} cases; ADMM {:.3e} <= {:.1e} over {} cases]",
            z.closed_form.worst, g.zero_gap_closed_form, z.closed_form.cases, z.iterative.worst, admm_limit, z.iterative.cases
        ),
    });

    let r = experiment(ExperimentId::Sparse, &dir);
    let worst = |name: &str, pick: fn(f64, f64) -> f64, init: f64| {
        r.replications.iter().map(|rep| rep.metric(name)).fold(init, pick)
    };
    out.push(Outcome {
        id: "5 (sparse regression)",
        passed: r.succeeded(),
        detail: format!(
            "[max nonzero error {:.3}, min zero share {:.4}, max ACF lag 10 {:.3}, BL worse in share {:.2} of reps, gap ratio {:.2e}, {:.0} s] {}",
            worst("nonzero_max_abs_error", f64::max, 0.0),
            worst("zero_fraction_small", f64::min, 1.0),
            worst("acf_lag10", f64::max, f64::NEG_INFINITY),
            r.check("share of replications with larger Bayesian lasso nonzero RMSE").map_or(f64::NAN, |c| c.value),
            r.check("mean gap ratio, working alpha over alpha = 1").map_or(f64::NAN, |c| c.value),
            r.timing.total_seconds,
            failures(&r)
        ),
    });

    let r = experiment(ExperimentId::Matrix, &dir);
    let m = |name: &str| r.replications.first().map_or(f64::NAN, |rep| rep.metric(name));
    out.push(Outcome {
        id: "6 (low-rank matrix)",
        passed: r.succeeded(),
        detail: format!(
            "[sigma2 {:.4}, singular values {:.3} {:.3} {:.3} | {:.2e} {:.2e} {:.2e}, {:.0} s] {}",
            m("sigma2"),
            m("sv_mean[1]"),
            m("sv_mean[2]"),
            m("sv_mean[3]"),
            m("sv_mean[4]"),
            m("sv_mean[5]"),
            m("sv_mean[6]"),
            r.timing.total_seconds,
            failures(&r)
        ),
    });

    let tail = &t.tail;
    let mut ok = true;
    let mut parts = Vec::new();
    for &th in &tail.points {
        let v = marginal_l1_prior(th, 1.0, 1.0).unwrap();
        let lb = marginal_l1_lower_bound(th, 1.0, 1.0);
        ok &= v >= lb;
        parts.push(format!("{th}: {v:.4e} >= {lb:.4e}"));
    }
    // log-log slope between the two largest points
    let (a, b) = (tail.points[tail.points.len() - 2], tail.points[tail.points.len() - 1]);
    let slope = (marginal_l1_prior(b, 1.0, 1.0).unwrap() / marginal_l1_prior(a, 1.0, 1.0).unwrap()).ln() / (b / a).ln();
    ok &= slope >= tail.slope_min;
    out.push(Outcome {
        id: "7 (polynomial tail)",
        passed: ok,
        detail: format!("[{}; slope {slope:.3} >= {}]", parts.join(", "), tail.slope_min),
    });

    let os = &t.order_statistics;
    let mut rng = stream(SEED, 0, 0, 8);
    let mut worst_diff: f64 = 0.0;
    for _ in 0..os.cases {
        let m = rng.random_range(os.min_group..=os.max_group);
        let theta: Vec<f64> = (0..m).map(|_| 3.0 * std_normal(&mut rng)).collect();
        let rho = rng.random_range(0.01..5.0);
        let d = (pairwise_fusion_sum(&theta, rho) - order_statistic_fusion_sum(&theta, rho).unwrap()).abs();
        worst_diff = worst_diff.max(d);
    }
    out.push(Outcome {
        id: "8 (order-statistic identity)",
        passed: worst_diff <= os.tolerance,
        detail: format!("[{} vectors, max |difference| {worst_diff:.3e} <= {:.0e}]", os.cases, os.tolerance),
    });

    let c = &t.conditionals;
    let probes = conditional_suite(c.seed, c.draws, c.thin).unwrap();
    let lowest = probes.iter().min_by(|a, b| a.p_value.total_cmp(&b.p_value)).unwrap();
    out.push(Outcome {
        id: "9 (conditional correctness)",
        passed: probes.iter().all(|p| p.p_value > c.p_min),
        detail: format!(
            "[{} conditionals x {} draws, lowest KS p = {:.4} ({}) vs {}]",
            probes.len(),
            c.draws,
            lowest.p_value,
            lowest.label,
            c.p_min
        ),
    });

    let e = &t.ess;
    let mut rng = stream(SEED, 0, 0, 9);
    let innovation = (1.0 - e.phi * e.phi).sqrt();
    let mut x = std_normal(&mut rng);
    let series: Vec<f64> = (0..e.length)
        .map(|_| {
            x = e.phi * x + innovation * std_normal(&mut rng);
            x
        })
        .collect();
    let target = e.length as f64 * (1.0 - e.phi) / (1.0 + e.phi);
    let est = ess(&series).unwrap();
    let rel = (est - target).abs() / target;
    let rho = acf(&series, e.acf_lags).unwrap();
    let acf_err = (1..=e.acf_lags).map(|k| (rho[k] - e.phi.powi(k as i32)).abs()).fold(0.0, f64::max);
    out.push(Outcome {
        id: "10 (ESS and ACF)",
        passed: rel <= e.relative_tolerance && acf_err <= e.acf_tolerance,
        detail: format!(
            "[ESS {est:.0} vs {target:.0}, relative error {rel:.3} <= {}; max ACF error {acf_err:.4} <= {}]",
            e.relative_tolerance, e.acf_tolerance
        ),
    });

    let r = experiment(ExperimentId::FusedProbit, &dir);
    out.push(Outcome {
        id: "supplementary (fused probit recovery)",
        passed: r.succeeded(),
        detail: format!(
            "[{}] {}",
            r.checks.iter().map(|c| format!("{} {:.3}", c.name, c.value)).collect::<Vec<_>>().join(", "),
            failures(&r)
        ),
    });
    out
}

#[test]
fn acceptance_criteria() {
    let outcomes = run_all();
    // written straight to stdout, past the test harness capture, so the lines show up
    // in a plain `cargo test` run
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout).unwrap();
    for o in &outcomes {
        writeln!(stdout, "{}", o.line()).unwrap();
    }
    drop(stdout);
    let failed: Vec<&str> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
