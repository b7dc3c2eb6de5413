//! Cross-engine and analytic-limit checks.

use std::f64::consts::{PI, TAU};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use tbsim::circuit::{cross_engine_deviation, random_circuit, CircuitBounds, Engine, Op};
use tbsim::fock::Detector;
use tbsim::gaussian::CovarianceState;
use tbsim::model::{EngineKind, PhaseSettings};
use tbsim::protocol::{pair_correlation, ProtocolParams};
use tbsim::waveguide::thermal_g2_zero;

#[derive(Clone, Copy, Debug)]
pub struct OracleScale {
    pub circuits: usize,
    pub max_modes: usize,
    pub truncation: usize,
    pub tolerance: f64,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// The case with the largest deviation.
    pub worst_case: String,
}

impl CheckLine {
    fn new(name: &str, deviation: f64, tolerance: f64, worst_case: String) -> Self {
        CheckLine { name: name.into(), deviation, tolerance, pass: deviation <= tolerance, worst_case }
    }
}

pub fn cross_engine(scale: OracleScale) -> tbsim::Result<CheckLine> {
    let mut rng = ChaCha8Rng::seed_from_u64(scale.seed);
    let bounds = CircuitBounds { max_modes: scale.max_modes, ..CircuitBounds::default() };
    let mut worst = (0.0, String::from("none"));
    for i in 0..scale.circuits {
        let c = random_circuit(&mut rng, bounds);
        let d = cross_engine_deviation(&c, scale.truncation)?;
        if d > worst.0 {
            worst = (d, format!("circuit {i}: {} modes, ops {:?}", c.modes.len(), c.ops));
        }
    }
    Ok(CheckLine::new(
        &format!("fock(N={}) vs gaussian, {} circuits", scale.truncation, scale.circuits),
        worst.0,
        scale.tolerance,
        worst.1,
    ))
}

/// E of the photon-pair term against `expected` at 24 write phases and two
/// read phases.
pub fn correlation_limit(expected: impl Fn(&PhaseSettings) -> f64) -> tbsim::Result<CheckLine> {
    let mut worst = (0.0, String::new());
    for &phi_r in &[0.0, 0.3 * PI] {
        for i in 0..24 {
            let ph = PhaseSettings::new(TAU * i as f64 / 24.0, phi_r, 0.25 * PI);
            let e = pair_correlation(&ProtocolParams::noiseless(0.002, 0.007, ph, EngineKind::Gaussian))?;
            let d = (e - expected(&ph)).abs();
            if d >= worst.0 {
                worst = (d, format!("phi_w = {:.4}, phi_r = {:.4}: E = {e:.12}", ph.phi_w, ph.phi_r));
            }
        }
    }
    Ok(CheckLine::new("noiseless E = cos(total phase)", worst.0, 1e-9, worst.1))
}

pub fn thermal_limit() -> tbsim::Result<CheckLine> {
    let mut worst = (0.0, String::new());
    for &n in &[0.01, 0.5, 3.0] {
        let d = (thermal_g2_zero(n)? - 2.0).abs();
        if d >= worst.0 {
            worst = (d, format!("n = {n}"));
        }
    }
    Ok(CheckLine::new("thermal g2(0) = 2", worst.0, 1e-6, worst.1))
}

/// Click cross-correlation of a weak two-mode squeezer, relative to 1/p.
pub fn pair_limit() -> tbsim::Result<CheckLine> {
    let p = 0.002;
    let state = CovarianceState::vacuum(&["a", "b"]).apply(&Op::TwoModeSqueeze {
        a: "a".into(),
        b: "b".into(),
        p,
        phase: 0.0,
    })?;
    let d = state.clicks(&[Detector::new("A", &["a"], 1.0), Detector::new("B", &["b"], 1.0)])?;
    let g2 = d.probability(3) / (d.marginal_click(0) * d.marginal_click(1));
    let rel = (g2 * p - 1.0).abs();
    Ok(CheckLine::new("two-mode squeezer g2 = 1/p", rel, 0.01, format!("p = {p}, g2 = {g2:.3}")))
}

pub fn run_all(scale: OracleScale) -> tbsim::Result<Vec<CheckLine>> {
    Ok(vec![
        cross_engine(scale)?,
        correlation_limit(|ph| ph.total_phase().cos())?,
        thermal_limit()?,
        pair_limit()?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_circuits_agree_exactly() {
        let ops: [Op; 0] = [];
        let det = [Detector::new("A", &["a"], 0.7)];
        let g = CovarianceState::vacuum(&["a"]).run(&ops).unwrap().clicks(&det).unwrap();
        let f = tbsim::fock::FockState::vacuum(&["a"], 3).run(&ops).unwrap().clicks(&det).unwrap();
        assert_eq!(g.max_abs_difference(&f), 0.0);
    }

    #[test]
    fn flipped_read_phase_sign_is_caught() {
        let wrong = correlation_limit(|ph| (ph.phi_w + ph.phi_r - 2.0 * ph.phi_off).cos()).unwrap();
        assert!(!wrong.pass, "{wrong:?}");
        assert!(correlation_limit(|ph| ph.total_phase().cos()).unwrap().pass);
    }

    #[test]
    fn analytic_limits_pass() {
        assert!(thermal_limit().unwrap().pass);
        assert!(pair_limit().unwrap().pass);
    }
}
