//! Domain types shared by every other module.
//!
//! Values in this module are plain data. They are validated once, when a
//! configuration is loaded or built, and treated as immutable afterwards.

mod config;
mod pulses;

use std::f64::consts::{FRAC_PI_2, PI};

pub use config::{apply_override, load_config, parse_config, RawConfig};
pub use pulses::{
    build_pulse_sequence, sample_phase_jitter, scattering_probability_from_energy,
    EnergyCalibration, PulseSchedule, FWHM_TO_SIGMA,
};

use crate::error::{Error, Result};

/// Optical cavity parameters. Rates are linear frequencies (κ/2π etc.) in Hz.
#[derive(Clone, Debug, PartialEq)]
pub struct CavityParams {
    pub wavelength: f64,
    pub kappa: f64,
    pub kappa_i: f64,
    pub g0: f64,
    pub mech_frequency: f64,
}

impl Default for CavityParams {
    fn default() -> Self {
        CavityParams {
            wavelength: 1556.06e-9,
            kappa: 1.05e9,
            kappa_i: 250e6,
            g0: 380e3,
            mech_frequency: 5.154e9,
        }
    }
}

impl CavityParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("cavity.wavelength", self.wavelength),
            ("cavity.kappa", self.kappa),
            ("cavity.kappa_i", self.kappa_i),
            ("cavity.g0", self.g0),
            ("cavity.mech_frequency", self.mech_frequency),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(format!("{name} must be positive, got {v}")));
            }
        }
        if self.kappa_i > self.kappa {
            return Err(Error::validation(format!(
                "cavity.kappa_i ({}) exceeds cavity.kappa ({})",
                self.kappa_i, self.kappa
            )));
        }
        Ok(())
    }
}

/// Phononic waveguide and timing parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveguideParams {
    /// Round-trip time τ in seconds.
    pub round_trip_time: f64,
    pub group_velocity: f64,
    pub length: f64,
    /// Energy decay time T1 in seconds.
    pub t1: f64,
    /// Time between trials in seconds.
    pub repetition_period: f64,
    /// Extra retrieval factor from modal dispersion, multiplied onto e^{−τ/T1}.
    pub dispersion_efficiency: f64,
}

impl Default for WaveguideParams {
    fn default() -> Self {
        WaveguideParams {
            round_trip_time: 126e-9,
            group_velocity: 2000.0,
            length: 126e-6,
            t1: 2.2e-6,
            repetition_period: 15e-6,
            dispersion_efficiency: 1.0,
        }
    }
}

impl WaveguideParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.round_trip_time.is_finite() && self.round_trip_time > 0.0) {
            return Err(Error::validation("waveguide.round_trip_time must be positive"));
        }
        if !(self.t1 > self.round_trip_time) {
            return Err(Error::validation(format!(
                "waveguide.t1 ({}) must exceed the round-trip time ({})",
                self.t1, self.round_trip_time
            )));
        }
        if !(self.group_velocity > 0.0 && self.length > 0.0) {
            return Err(Error::validation("waveguide.group_velocity and length must be positive"));
        }
        if !(self.repetition_period > 0.0) {
            return Err(Error::validation("waveguide.repetition_period must be positive"));
        }
        check_unit("waveguide.dispersion_efficiency", self.dispersion_efficiency)?;
        let expected = 2.0 * self.length / self.group_velocity;
        if (expected - self.round_trip_time).abs() > 0.2 * self.round_trip_time {
            log::warn!(
                "round-trip time {:.3e} s differs from 2·length/velocity = {:.3e} s by more than 20%",
                self.round_trip_time,
                expected
            );
        }
        Ok(())
    }

    /// Survival of a stored phonon over one round trip: e^{−τ/T1} times the
    /// dispersion factor.
    pub fn retrieval_efficiency(&self) -> f64 {
        (-self.round_trip_time / self.t1).exp() * self.dispersion_efficiency
    }

    /// True when less than 0.2% of the previous trial's population is left,
    /// about 6.2·T1. The 15 µs spacing at T1 = 2.2 µs leaves 0.11%.
    pub fn trials_independent(&self) -> bool {
        (-self.repetition_period / self.t1).exp() < 2e-3
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PulseRole {
    WriteEarly,
    WriteLate,
    ReadEarly,
    ReadLate,
}

impl PulseRole {
    pub const ALL: [PulseRole; 4] = [
        PulseRole::WriteEarly,
        PulseRole::WriteLate,
        PulseRole::ReadEarly,
        PulseRole::ReadLate,
    ];

    pub fn is_write(self) -> bool {
        matches!(self, PulseRole::WriteEarly | PulseRole::WriteLate)
    }

    pub fn detuning(self) -> Detuning {
        if self.is_write() {
            Detuning::Blue
        } else {
            Detuning::Red
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PulseRole::WriteEarly => "write_early",
            PulseRole::WriteLate => "write_late",
            PulseRole::ReadEarly => "read_early",
            PulseRole::ReadLate => "read_late",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Detuning {
    Blue,
    Red,
}

/// A single control pulse.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseSpec {
    pub role: PulseRole,
    pub center_time: f64,
    pub duration_fwhm: f64,
    pub energy: f64,
    pub probability: f64,
    pub detuning: Detuning,
}

impl PulseSpec {
    pub fn validate(&self, max_probability: f64) -> Result<()> {
        if !(0.0..1.0).contains(&self.probability) {
            return Err(Error::validation(format!(
                "{} scattering probability {} outside [0, 1)",
                self.role.label(),
                self.probability
            )));
        }
        if self.probability >= max_probability {
            return Err(Error::validation(format!(
                "{} scattering probability {} is not below the perturbative guard {}",
                self.role.label(),
                self.probability,
                max_probability
            )));
        }
        if self.detuning != self.role.detuning() {
            return Err(Error::validation(format!(
                "{} must be {:?}-detuned",
                self.role.label(),
                self.role.detuning()
            )));
        }
        if !(self.energy >= 0.0 && self.duration_fwhm > 0.0) {
            return Err(Error::validation(format!(
                "{} needs non-negative energy and positive duration",
                self.role.label()
            )));
        }
        Ok(())
    }
}

/// Phase settings in radians. `phi_0` is derived and never stored.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct PhaseSettings {
    /// Phase on the Late write pulse.
    pub phi_w: f64,
    /// Phase on the Late read pulse.
    pub phi_r: f64,
    /// Fixed offset of the interferometer long arm.
    pub phi_off: f64,
}

impl PhaseSettings {
    pub fn new(phi_w: f64, phi_r: f64, phi_off: f64) -> Self {
        PhaseSettings { phi_w, phi_r, phi_off }
    }

    /// Write phase at which E crosses zero with negative slope for φ_r = 0.
    pub fn phi_0(&self) -> f64 {
        wrap_angle(2.0 * self.phi_off + FRAC_PI_2)
    }

    /// Total interference phase Φ for the noiseless correlation E = cos Φ.
    ///
    /// The read phase enters with a minus sign: the anti-Stokes field carries
    /// the conjugate of the read-pulse phase.
    pub fn total_phase(&self) -> f64 {
        self.phi_w - self.phi_r - 2.0 * self.phi_off
    }

    pub fn with_phases(&self, phi_w: f64, phi_r: f64) -> Self {
        PhaseSettings { phi_w, phi_r, phi_off: self.phi_off }
    }
}

/// Wraps an angle to [0, 2π).
pub fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y >= 2.0 * PI {
        0.0
    } else {
        y
    }
}

/// Wraps an angle to (−π, π].
pub fn wrap_signed(x: f64) -> f64 {
    let y = wrap_angle(x);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Thermal occupancy seen by each pulse.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ThermalSchedule {
    pub write_early: f64,
    pub write_late: f64,
    pub read_early: f64,
    pub read_late: f64,
}

impl ThermalSchedule {
    pub fn new(values: [f64; 4]) -> Self {
        ThermalSchedule {
            write_early: values[0],
            write_late: values[1],
            read_early: values[2],
            read_late: values[3],
        }
    }

    pub fn get(&self, role: PulseRole) -> f64 {
        match role {
            PulseRole::WriteEarly => self.write_early,
            PulseRole::WriteLate => self.write_late,
            PulseRole::ReadEarly => self.read_early,
            PulseRole::ReadLate => self.read_late,
        }
    }

    pub fn values(&self) -> [f64; 4] {
        [self.write_early, self.write_late, self.read_early, self.read_late]
    }
}

/// Per-detector leakage probability of the strong control pulses, per window.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Leakage {
    pub write: [f64; 2],
    pub read: [f64; 2],
}

/// Noise and detection parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    pub thermal: ThermalSchedule,
    pub interferometer_visibility: f64,
    pub write_jitter_fwhm: f64,
    pub read_jitter_fwhm: f64,
    /// SNSPD efficiency for detectors 1 and 2.
    pub detector_efficiency: [f64; 2],
    pub dark_count_prob: f64,
    pub leakage: Leakage,
    pub coupling_efficiency: f64,
    /// Pulse transmission of filters F1 and F2 (detector k sits behind Fk).
    pub filter_efficiency: [f64; 2],
    /// Relative deviation of BS1/BS2 from 50:50.
    pub splitting_asymmetry: f64,
    /// Coupling ε of the heating channel.
    pub heating_epsilon: f64,
    /// False when the delay arm is blocked (double cross-correlation runs).
    pub interferometer_connected: bool,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            thermal: ThermalSchedule::default(),
            interferometer_visibility: 1.0,
            write_jitter_fwhm: 0.0,
            read_jitter_fwhm: 0.0,
            detector_efficiency: [1.0, 1.0],
            dark_count_prob: 0.0,
            leakage: Leakage::default(),
            coupling_efficiency: 1.0,
            filter_efficiency: [1.0, 1.0],
            splitting_asymmetry: 0.0,
            heating_epsilon: 0.01,
            interferometer_connected: true,
        }
    }
}

impl NoiseModel {
    /// The noiseless model with perfect detection.
    pub fn ideal() -> Self {
        Self::default()
    }

    /// Detector defaults used when the configuration is silent: 0.85 SNSPD
    /// efficiency and 10⁻⁶ dark-count probability per window.
    pub fn assumed_detectors() -> ([f64; 2], f64) {
        ([0.85, 0.85], 1e-6)
    }

    pub fn validate(&self) -> Result<()> {
        for (role, n) in PulseRole::ALL.iter().zip(self.thermal.values()) {
            if !(n.is_finite() && n >= 0.0) {
                return Err(Error::validation(format!(
                    "probability/occupancy out of range: noise.thermal.{} = {n}",
                    role.label()
                )));
            }
        }
        let v = self.thermal.values();
        if v.windows(2).any(|w| w[1] < w[0]) {
            log::warn!("thermal schedule decreases across pulses: {v:?}");
        }
        check_unit("noise.interferometer_visibility", self.interferometer_visibility)?;
        check_unit("noise.dark_count_prob", self.dark_count_prob)?;
        check_unit("noise.coupling_efficiency", self.coupling_efficiency)?;
        for k in 0..2 {
            check_unit("noise.detector_efficiency", self.detector_efficiency[k])?;
            check_unit("noise.filter_efficiency", self.filter_efficiency[k])?;
            check_unit("noise.leakage.write", self.leakage.write[k])?;
            check_unit("noise.leakage.read", self.leakage.read[k])?;
        }
        for (name, v) in [
            ("noise.write_jitter_fwhm", self.write_jitter_fwhm),
            ("noise.read_jitter_fwhm", self.read_jitter_fwhm),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(format!("{name} must be non-negative")));
            }
        }
        if !(self.splitting_asymmetry.abs() < 0.5) {
            return Err(Error::validation("noise.splitting_asymmetry must be below 0.5"));
        }
        if !(self.heating_epsilon > 0.0 && self.heating_epsilon <= 1.0) {
            return Err(Error::validation("noise.heating_epsilon must be in (0, 1]"));
        }
        Ok(())
    }

    /// Total efficiency of detector `k` from the device to a click.
    pub fn chain_efficiency(&self, k: usize) -> f64 {
        self.coupling_efficiency * self.filter_efficiency[k] * self.detector_efficiency[k]
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::validation(format!("probability/occupancy out of range: {name} = {v}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    ThermalG2Tau,
    DoubleCrossCorrelation,
    TimeBinEntanglement,
    BellTest,
    Calibration,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::ThermalG2Tau => "ThermalG2Tau",
            ExperimentKind::DoubleCrossCorrelation => "DoubleCrossCorrelation",
            ExperimentKind::TimeBinEntanglement => "TimeBinEntanglement",
            ExperimentKind::BellTest => "BellTest",
            ExperimentKind::Calibration => "Calibration",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            ExperimentKind::ThermalG2Tau,
            ExperimentKind::DoubleCrossCorrelation,
            ExperimentKind::TimeBinEntanglement,
            ExperimentKind::BellTest,
            ExperimentKind::Calibration,
        ]
        .into_iter()
        .find(|k| k.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EngineKind {
    Fock { truncation: usize },
    Gaussian,
}

impl EngineKind {
    pub fn name(self) -> &'static str {
        match self {
            EngineKind::Fock { .. } => "fock",
            EngineKind::Gaussian => "gaussian",
        }
    }
}

/// How Monte Carlo trials are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sampling {
    /// Exact distributions only.
    None,
    /// One multinomial draw of pattern counts per setting.
    Aggregate,
    /// One [`crate::protocol::ClickRecord`] per trial.
    PerTrial,
}

impl Sampling {
    pub fn name(self) -> &'static str {
        match self {
            Sampling::None => "none",
            Sampling::Aggregate => "aggregate",
            Sampling::PerTrial => "per-trial",
        }
    }
}

/// φ_w sweep, repeated for each read phase.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSweep {
    pub phi_w: Vec<f64>,
    pub phi_r: Vec<f64>,
}

/// Calibration run used to pick CHSH settings before a Bell test.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationPlan {
    pub write_energy: f64,
    pub read_energy: f64,
    /// Thermal schedule during calibration; `None` reuses the main one.
    pub thermal: Option<ThermalSchedule>,
    pub points: usize,
    pub trials_per_point: u64,
    /// Second read phase in radians (nominally π/2).
    pub phi_r_second: f64,
}

impl Default for CalibrationPlan {
    fn default() -> Self {
        CalibrationPlan {
            write_energy: 90e-15,
            read_energy: 225e-15,
            thermal: None,
            points: 24,
            trials_per_point: 120_000_000,
            phi_r_second: FRAC_PI_2,
        }
    }
}

/// Input spectrum for the waveguide model.
#[derive(Clone, Debug, PartialEq)]
pub enum SpectrumSource {
    File(std::path::PathBuf),
    Synthetic {
        modes: usize,
        fsr_mean: f64,
        fsr_std: f64,
        /// Gaussian power envelope matched to this packet FWHM; `None` gives
        /// equal amplitudes.
        packet_fwhm: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumPlan {
    pub source: SpectrumSource,
    pub delay_max: f64,
    pub delay_step: f64,
}

/// A fully validated run description.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub engine: EngineKind,
    pub trials: u64,
    pub seed: u64,
    pub sampling: Sampling,
    pub cavity: CavityParams,
    pub waveguide: WaveguideParams,
    pub calibration: EnergyCalibration,
    pub schedule: PulseSchedule,
    pub max_probability: f64,
    pub phases: PhaseSettings,
    pub sweep: Option<PhaseSweep>,
    /// Explicit CHSH settings (φ_w, φ_r) in radians.
    pub chsh_settings: Option<[(f64, f64); 4]>,
    pub calibration_plan: CalibrationPlan,
    pub noise: NoiseModel,
    pub spectrum: Option<SpectrumPlan>,
    /// Which detector defaults were assumed rather than configured.
    pub assumptions: Vec<String>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::validation("trials must be positive"));
        }
        self.cavity.validate()?;
        self.waveguide.validate()?;
        self.noise.validate()?;
        if !(self.max_probability > 0.0 && self.max_probability < 1.0) {
            return Err(Error::validation("pulses.max_probability must be in (0, 1)"));
        }
        if let PulseSchedule::Pulsed(pulses) = &self.schedule {
            for p in pulses {
                p.validate(self.max_probability)?;
            }
            let t = |r: PulseRole| pulses.iter().find(|p| p.role == r).map(|p| p.center_time);
            let half = self.waveguide.round_trip_time / 2.0;
            for (e, l) in [
                (PulseRole::WriteEarly, PulseRole::WriteLate),
                (PulseRole::ReadEarly, PulseRole::ReadLate),
            ] {
                match (t(e), t(l)) {
                    (Some(te), Some(tl)) if ((tl - te) - half).abs() <= 1e-15 => {}
                    _ => {
                        return Err(Error::validation(format!(
                            "{} and {} must be separated by τ/2",
                            e.label(),
                            l.label()
                        )))
                    }
                }
            }
        }
        if let EngineKind::Fock { truncation } = self.engine {
            if truncation < 1 {
                return Err(Error::validation("Fock truncation must be at least 1"));
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.phi_w.is_empty() || sweep.phi_r.is_empty() {
                return Err(Error::validation("phase sweep lists must not be empty"));
            }
        }
        if self.calibration_plan.points < 6 {
            return Err(Error::validation("calibration needs at least 6 phase points"));
        }
        if !self.waveguide.trials_independent() {
            log::warn!("trial spacing leaves more than 0.2% of the population; trials are still simulated as independent");
        }
        Ok(())
    }

    /// Pulse with the given role. Panics on a continuous-pump schedule.
    pub fn pulse(&self, role: PulseRole) -> &PulseSpec {
        match &self.schedule {
            PulseSchedule::Pulsed(p) => p.iter().find(|p| p.role == role).expect("validated schedule"),
            PulseSchedule::ContinuousPump { .. } => panic!("continuous pump has no discrete pulses"),
        }
    }

    pub fn write_probability(&self) -> f64 {
        self.pulse(PulseRole::WriteEarly).probability
    }

    pub fn read_probability(&self) -> f64 {
        self.pulse(PulseRole::ReadEarly).probability
    }
}
