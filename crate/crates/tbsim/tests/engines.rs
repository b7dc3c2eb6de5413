use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tbsim::circuit::{random_circuit, CircuitBounds, Engine, Op};
use tbsim::fock::{Detector, FockState};
use tbsim::gaussian::CovarianceState;

fn tms(p: f64) -> Op {
    Op::TwoModeSqueeze { a: "a".into(), b: "b".into(), p, phase: 0.3 }
}

#[test]
fn vacuum_never_clicks() {
    let det = [Detector::new("A", &["a"], 1.0), Detector::new("B", &["b"], 0.5)];
    let f = FockState::vacuum(&["a", "b"], 4).clicks(&det).unwrap();
    let g = CovarianceState::vacuum(&["a", "b"]).clicks(&det).unwrap();
    assert_eq!(f.probability(0), 1.0);
    assert!((g.probability(0) - 1.0).abs() < 1e-15);
}

#[test]
fn thermal_click_probability() {
    // P(click) = η n / (1 + η n) for a thermal state.
    for (n, eff) in [(1.0, 1.0), (0.2, 0.3)] {
        let det = [Detector::new("A", &["a"], eff)];
        let want = eff * n / (1.0 + eff * n);
        let g = CovarianceState::thermal("a", n).clicks(&det).unwrap().marginal_click(0);
        assert!((g - want).abs() < 1e-12, "{g} vs {want}");
    }
    let f = FockState::thermal("a", 0.05, 12).clicks(&[Detector::new("A", &["a"], 1.0)]).unwrap();
    assert!((f.marginal_click(0) - 0.05 / 1.05).abs() < 1e-12);
}

#[test]
fn two_mode_squeezer_is_strongly_correlated() {
    for p in [1e-3, 1e-2] {
        let det = [Detector::new("A", &["a"], 1.0), Detector::new("B", &["b"], 1.0)];
        let d = CovarianceState::vacuum(&["a", "b"]).apply(&tms(p)).unwrap().clicks(&det).unwrap();
        // Each side is thermal with n = p/(1-p), so a click happens with probability p.
        assert!((d.marginal_click(0) - p).abs() < 1e-12);
        let g2 = d.probability(3) / (d.marginal_click(0) * d.marginal_click(1));
        assert!((g2 - 1.0 / p).abs() < 1e-9 / p, "{g2}");
        let f = FockState::vacuum(&["a", "b"], 8).apply(&tms(p)).unwrap().clicks(&det).unwrap();
        assert!(f.max_abs_difference(&d) < 1e-12);
    }
}

#[test]
fn loss_scales_the_occupancy() {
    let s = CovarianceState::thermal("a", 0.4).apply_loss("a", 0.25).unwrap();
    assert!((s.mean_number("a").unwrap() - 0.1).abs() < 1e-14);
    let f = FockState::thermal("a", 0.4, 20).apply_loss("a", 0.25).unwrap();
    assert!((f.mean_number("a").unwrap() - 0.1).abs() < 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn fock_states_stay_physical(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_circuit(&mut rng, CircuitBounds { max_modes: 3, ..CircuitBounds::default() });
        let s = FockState::vacuum(&c.modes, 5).run(&c.ops).unwrap();
        prop_assert!(s.trace() <= 1.0 + 1e-12);
        prop_assert!(s.hermiticity_error() < 1e-12);
        prop_assert!(s.min_eigenvalue() > -1e-12);
        let d = s.clicks(&c.detectors).unwrap();
        prop_assert!(d.probabilities().iter().all(|&p| p > -1e-12));
    }

    #[test]
    fn gaussian_states_stay_physical(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = random_circuit(&mut rng, CircuitBounds { max_modes: 4, ..CircuitBounds::default() });
        let s = CovarianceState::vacuum(&c.modes).run(&c.ops).unwrap();
        prop_assert!(s.uncertainty_margin() > -1e-10);
        let d = s.clicks(&c.detectors).unwrap();
        prop_assert!((d.total() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn passive_ops_conserve_the_total_number(t in 0.0f64..1.0, phase in 0.0f64..6.3, n in 0.0f64..2.0) {
        let s = CovarianceState::thermal("a", n)
            .with_vacuum_modes(&["b"]).unwrap()
            .apply_beam_splitter("a", "b", t, phase).unwrap();
        let total = s.mean_number("a").unwrap() + s.mean_number("b").unwrap();
        prop_assert!((total - n).abs() < 1e-12);
    }
}
