//! Invariants of the pulse sequence that hold for any parameters.

use std::f64::consts::PI;

use proptest::prelude::*;
use tbsim::model::{EngineKind, PhaseSettings, ThermalSchedule};
use tbsim::outcome::OutcomeDistribution;
use tbsim::protocol::{
    channel_mask, exact_distribution, sample_aggregate, window_mask, ProtocolParams, Window, WRITE_MASK,
};

fn noisy(ph: PhaseSettings, thermal: [f64; 4]) -> ProtocolParams {
    let mut p = ProtocolParams::noiseless(0.003, 0.008, ph, EngineKind::Gaussian);
    p.thermal = ThermalSchedule::new(thermal);
    p.retrieval = 0.9;
    p.interferometer.visibility = 0.95;
    p.chain.efficiency = [0.3, 0.3];
    p.jitter_sigma = (0.15, 0.05);
    p
}

fn coincidence(d: &OutcomeDistribution, k: usize, l: usize) -> f64 {
    d.all_click(channel_mask(Window::WriteOverlap, k) | channel_mask(Window::ReadOverlap, l))
}

fn overlap_e(d: &OutcomeDistribution) -> f64 {
    let n = |k, l| coincidence(d, k, l);
    (n(0, 0) + n(1, 1) - n(0, 1) - n(1, 0)) / (n(0, 0) + n(1, 1) + n(0, 1) + n(1, 0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn heralds_are_symmetric(phi_w in 0.0f64..6.3, n in proptest::array::uniform4(0.0f64..0.1)) {
        let d = exact_distribution(&noisy(PhaseSettings::new(phi_w, 0.0, 0.25 * PI), n)).unwrap();
        for w in [Window::WriteEarlyDirect, Window::WriteOverlap, Window::WriteLateDelayed] {
            let a = d.all_click(channel_mask(w, 0));
            let b = d.all_click(channel_mask(w, 1));
            prop_assert!((a - b).abs() <= 1e-12 * a.max(b), "{w:?}: {a} vs {b}");
        }
    }

    #[test]
    fn detector_herald_flips_the_sign(phi_w in 0.0f64..6.3, phi_r in 0.0f64..3.2, n in proptest::array::uniform4(0.0f64..0.1)) {
        let p = noisy(PhaseSettings::new(phi_w, phi_r, 0.25 * PI), n);
        let d0 = exact_distribution(&p).unwrap();
        let d1 = exact_distribution(&p.with_phases(phi_w + PI, phi_r)).unwrap();
        for l in 0..2 {
            let (x, y) = (coincidence(&d0, 0, l), coincidence(&d1, 1, l));
            prop_assert!((x - y).abs() <= 1e-9 * x.max(y), "{x} vs {y}");
        }
    }

    #[test]
    fn overlap_statistics_depend_on_the_total_phase_only(
        phi_w in 0.0f64..6.3, phi_r in 0.0f64..6.3, phi_off in 0.0f64..3.2, shift in -3.0f64..3.0,
    ) {
        let a = PhaseSettings::new(phi_w, phi_r, phi_off);
        // Same Φ = φ_w − φ_r − 2φ_off, different parts.
        let b = PhaseSettings::new(phi_w + shift, phi_r + 0.5 * shift, phi_off + 0.25 * shift);
        prop_assert!((a.total_phase() - b.total_phase()).abs() < 1e-12);
        let da = exact_distribution(&ProtocolParams::noiseless(0.002, 0.007, a, EngineKind::Gaussian)).unwrap();
        let db = exact_distribution(&ProtocolParams::noiseless(0.002, 0.007, b, EngineKind::Gaussian)).unwrap();
        for k in 0..2 {
            for l in 0..2 {
                let (x, y) = (coincidence(&da, k, l), coincidence(&db, k, l));
                prop_assert!((x - y).abs() <= 1e-7 * x.max(y).max(1e-15), "{x} vs {y}");
            }
        }
        prop_assert!((overlap_e(&da) - overlap_e(&db)).abs() < 1e-6);
    }
}

#[test]
fn sampled_counts_converge_to_exact_probabilities() {
    let d = exact_distribution(&noisy(PhaseSettings::new(0.7, 0.0, 0.25 * PI), [0.02, 0.04, 0.06, 0.09])).unwrap();
    let trials = 1_000_000u64;
    let c = sample_aggregate(&d, trials, 11, 0);
    assert_eq!(c.counts.iter().sum::<u64>(), trials);
    for mask in [window_mask(Window::WriteOverlap), WRITE_MASK, window_mask(Window::ReadLateDelayed)] {
        let p = 1.0 - d.none_click(mask);
        let n = c.any_click(mask) as f64;
        let sd = (trials as f64 * p * (1.0 - p)).sqrt();
        assert!((n - trials as f64 * p).abs() < 3.0 * sd.max(1.0), "mask {mask:#x}: {n} vs {}", trials as f64 * p);
    }
}

#[test]
fn fock_and_gaussian_agree_on_a_noisy_setting() {
    let mut p = noisy(PhaseSettings::new(1.1, 0.4, 0.25 * PI), [0.02, 0.04, 0.06, 0.09]);
    let g = exact_distribution(&p).unwrap();
    let mut gap = |n| {
        p.engine = EngineKind::Fock { truncation: n };
        g.max_abs_difference(&exact_distribution(&p).unwrap())
    };
    let (g5, g6) = (gap(5), gap(6));
    // Truncation error shrinks by about a decade per level.
    assert!(g6 < 1e-6 && g6 < 0.2 * g5, "{g5:e} {g6:e}");
}
