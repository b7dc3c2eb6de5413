use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Detuning, ExperimentKind, PulseRole, PulseSpec};
use crate::error::{Error, Result};

/// σ = FWHM · FWHM_TO_SIGMA for a Gaussian.
pub const FWHM_TO_SIGMA: f64 = 0.424_660_900_144_009_5; // 1 / (2√(2 ln 2))

/// Energy → scattering-probability anchors, one list per role.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyCalibration {
    /// (energy in J, probability) pairs for blue-detuned pulses.
    pub write: Vec<(f64, f64)>,
    /// (energy in J, probability) pairs for red-detuned pulses.
    pub read: Vec<(f64, f64)>,
}

impl Default for EnergyCalibration {
    fn default() -> Self {
        EnergyCalibration {
            write: vec![(15e-15, 0.0013), (26e-15, 0.002)],
            read: vec![(112e-15, 0.007), (225e-15, 0.014)],
        }
    }
}

impl EnergyCalibration {
    pub fn validate(&self) -> Result<()> {
        for (name, anchors) in [("write", &self.write), ("read", &self.read)] {
            if anchors.is_empty() {
                return Err(Error::validation(format!("no {name} energy anchors")));
            }
            if anchors.iter().any(|&(e, p)| !(e > 0.0 && p > 0.0)) {
                return Err(Error::validation(format!("{name} energy anchors must be positive")));
            }
        }
        Ok(())
    }

    /// Least-squares slope through the origin, probability per joule.
    pub fn slope(&self, write: bool) -> f64 {
        let anchors = if write { &self.write } else { &self.read };
        let (num, den) = anchors
            .iter()
            .fold((0.0, 0.0), |(n, d), &(e, p)| (n + e * p, d + e * e));
        num / den
    }
}

/// Linear-through-origin map from pulse energy to scattering probability,
/// clipped just below `max_probability`.
pub fn scattering_probability_from_energy(
    energy: f64,
    write: bool,
    calibration: &EnergyCalibration,
    max_probability: f64,
) -> f64 {
    let p = calibration.slope(write) * energy.max(0.0);
    let ceiling = max_probability * (1.0 - 1e-9);
    if p > ceiling {
        log::info!("scattering probability {p:.4} clipped to {ceiling:.4}");
        ceiling
    } else {
        p
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PulseSchedule {
    Pulsed(Vec<PulseSpec>),
    /// Continuous red-detuned pump used for thermal g²(Δt).
    ContinuousPump { detuning: Detuning },
}

/// Pulse timings for an experiment kind.
///
/// `energies` and `probabilities` are (write, read) pairs. Reads arrive one
/// full round trip after their writes.
pub fn build_pulse_sequence(
    kind: ExperimentKind,
    tau: f64,
    t0: f64,
    duration_fwhm: f64,
    energies: (f64, f64),
    probabilities: (f64, f64),
) -> Result<PulseSchedule> {
    if !(tau > 0.0) {
        return Err(Error::validation(format!("round-trip time must be positive, got {tau}")));
    }
    if kind == ExperimentKind::ThermalG2Tau {
        return Ok(PulseSchedule::ContinuousPump { detuning: Detuning::Red });
    }
    let offsets = [0.0, tau / 2.0, tau, 1.5 * tau];
    let pulses = PulseRole::ALL
        .iter()
        .zip(offsets)
        .map(|(&role, dt)| {
            let (energy, probability) = if role.is_write() {
                (energies.0, probabilities.0)
            } else {
                (energies.1, probabilities.1)
            };
            PulseSpec {
                role,
                center_time: t0 + dt,
                duration_fwhm,
                energy,
                probability,
                detuning: role.detuning(),
            }
        })
        .collect();
    Ok(PulseSchedule::Pulsed(pulses))
}

/// Zero-mean Gaussian phase error with the given FWHM.
pub fn sample_phase_jitter<R: Rng + ?Sized>(rng: &mut R, fwhm: f64) -> f64 {
    if fwhm <= 0.0 {
        return 0.0;
    }
    Normal::new(0.0, fwhm * FWHM_TO_SIGMA)
        .expect("finite positive width")
        .sample(rng)
}
