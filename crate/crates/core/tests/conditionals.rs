use gapshrink::certify::{conditional_suite, PROBE_DRAWS, PROBE_THIN};
use gapshrink::samplers::{probe_conditional, slice_sample_1d, Conditional};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seed for the frozen states and both chains of every probe.
const SEED: u64 = 1;

#[test]
fn every_nonconjugate_conditional_matches_slice_reference() {
    let outcomes = conditional_suite(SEED, PROBE_DRAWS, PROBE_THIN).unwrap();
    assert_eq!(outcomes.len(), 30);
    for o in &outcomes {
        assert!(o.p_value > 0.01, "{}: KS D = {:.4}, p = {:.4}", o.label, o.statistic, o.p_value);
    }
}

/// A deliberately wrong update: draws from N(0.3, 1) while the density is N(0, 1).
struct Biased {
    x: f64,
}

impl Conditional for Biased {
    fn label(&self) -> String {
        "biased".into()
    }
    fn support(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
    fn current(&self) -> f64 {
        self.x
    }
    fn log_density(&self, x: f64) -> f64 {
        -0.5 * x * x
    }
    fn update(&mut self, rng: &mut ChaCha8Rng) -> gapshrink::Result<f64> {
        self.x = 0.3 + gapshrink::samplers::std_normal(rng);
        Ok(self.x)
    }
}

#[test]
fn probe_rejects_a_wrong_update() {
    let mut b = Biased { x: 0.0 };
    let out = probe_conditional(&mut b, PROBE_DRAWS, PROBE_THIN, 1).unwrap();
    assert!(out.p_value < 1e-4, "p = {}", out.p_value);
}

#[test]
fn slice_reference_respects_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut x = 0.5;
    for _ in 0..5000 {
        x = slice_sample_1d(|t| -0.5 * t * t, x, 1.0, (0.0, 1.0), &mut rng).unwrap();
        assert!((0.0..=1.0).contains(&x));
    }
}
