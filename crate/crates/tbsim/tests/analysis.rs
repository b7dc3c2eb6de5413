use std::f64::consts::{FRAC_PI_2, TAU};

use proptest::prelude::*;
use tbsim::analysis::{
    fit_exponential, fit_sinusoid, fit_sinusoid_and_choose_phases, nth_from_asymmetry, parse_sweep, witness_r,
    AnalysisResult, SweepCurve,
};
use tbsim::model::wrap_signed;
use tbsim::waveguide::{constant_fsr_spectrum, delay_grid, extract_round_trip, g2_tau_curve};

fn curve(phi_r: f64, amp: f64, theta: f64, offset: f64) -> SweepCurve {
    let phi_w: Vec<f64> = (0..24).map(|i| TAU * i as f64 / 24.0).collect();
    let e = phi_w.iter().map(|&p| offset - amp * (p - theta).sin()).collect();
    SweepCurve { phi_r, phi_w, e, sigma: Vec::new() }
}

proptest! {
    #[test]
    fn sinusoid_fit_recovers_clean_curves(amp in 0.05f64..1.0, theta in 0.0f64..TAU, offset in -0.2f64..0.2) {
        let f = fit_sinusoid(&curve(0.0, amp, theta, offset)).unwrap();
        prop_assert!((f.amplitude - amp).abs() < 1e-12);
        prop_assert!(wrap_signed(f.zero_crossing - theta).abs() < 1e-10);
        prop_assert!((f.offset - offset).abs() < 1e-12);
    }

    #[test]
    fn ideal_curves_give_tsirelson_settings(theta in 0.0f64..TAU) {
        let cal = fit_sinusoid_and_choose_phases(&curve(0.0, 1.0, theta, 0.0), &curve(FRAC_PI_2, 1.0, theta + FRAC_PI_2, 0.0)).unwrap();
        prop_assert!((cal.expected_s - 2.0 * 2f64.sqrt()).abs() < 1e-9);
        prop_assert!(cal.epsilon.iter().all(|e| e.abs() < 1e-9), "{:?}", cal.epsilon);
    }
}

#[test]
fn sweep_tables_parse_by_read_phase() {
    let text = "# phi_r\tphi_w\tE\tsigma\n0\t0\t0.5\t0.1\n0\t1\t0.4\t0.1\n1.5\t0\t-0.2\t0.1\n";
    let c = parse_sweep(text).unwrap();
    assert_eq!(c.len(), 2);
    assert_eq!(c[0].e, vec![0.5, 0.4]);
    assert_eq!(c[1].phi_r, 1.5);
    assert!(parse_sweep("0 x 1\n").unwrap_err().is_validation());
}

#[test]
fn witness_matches_hand_values() {
    let r = |v: f64, a: f64, b: f64| {
        let x = |v| AnalysisResult::new(v, 0.0, "given", &[v]);
        witness_r(&x(v), &x(a), &x(b)).unwrap().value
    };
    // R = 1 at V = 1 − 2/(1 + ḡ).
    assert!((r(1.0 - 2.0 / 11.0, 10.0, 10.0) - 1.0).abs() < 1e-12);
    assert!((r(0.82, 9.4, 5.0) - 0.738).abs() < 1e-12);
}

#[test]
fn sideband_asymmetry_gives_occupancy() {
    // Stokes ∝ n + 1, anti-Stokes ∝ n.
    let n = nth_from_asymmetry(1.2e4, 2.0e3).unwrap();
    assert!((n.value - 0.2).abs() < 1e-12);
    assert!(nth_from_asymmetry(1.0, 2.0).is_err());
}

#[test]
fn exponential_fit_is_exact_on_clean_data() {
    let t: Vec<f64> = (0..40).map(|i| 1e-6 + 0.1e-6 * i as f64).collect();
    let y: Vec<f64> = t.iter().map(|t| 0.8 * (-t / 2.2e-6).exp()).collect();
    let fit = fit_exponential(&t, &y, 1e-6).unwrap();
    assert!((fit.value - 2.2e-6).abs() < 1e-12, "{}", fit.value);
}

#[test]
fn constant_fsr_revives_at_the_round_trip() {
    let fsr = 7.94e6;
    let sp = constant_fsr_spectrum(12, fsr, Some(30e-9), f64::INFINITY).unwrap();
    let delays = delay_grid(200e-9, 0.25e-9);
    let rt = extract_round_trip(&delays, &g2_tau_curve(&sp, &delays)).unwrap();
    assert!((rt.tau - 1.0 / fsr).abs() < 0.25e-9, "{}", rt.tau);
    assert!((rt.packet_fwhm - 30e-9).abs() < 0.1 * 30e-9, "{}", rt.packet_fwhm);
}
