//! TOML configuration files.
//!
//! Units are SI throughout, except angles, which are given in units of π
//! (`phi_r = 0.5` means π/2). See `configs/` for one reference file per
//! experiment kind.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::*;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub kind: String,
    pub engine: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    pub trials: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<String>,
    pub cavity: RawCavity,
    pub waveguide: RawWaveguide,
    pub pulses: RawPulses,
    pub phases: RawPhases,
    pub noise: RawNoise,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<RawCalibration>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<RawSpectrum>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCavity {
    pub wavelength: Option<f64>,
    pub kappa: Option<f64>,
    pub kappa_i: Option<f64>,
    pub g0: Option<f64>,
    pub mech_frequency: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawWaveguide {
    pub round_trip_time: Option<f64>,
    pub group_velocity: Option<f64>,
    pub length: Option<f64>,
    pub t1: Option<f64>,
    pub repetition_period: Option<f64>,
    pub dispersion_efficiency: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPulses {
    pub write_energy: Option<f64>,
    pub read_energy: Option<f64>,
    /// Overrides the energy calibration when present.
    pub write_probability: Option<f64>,
    pub read_probability: Option<f64>,
    pub duration_fwhm: Option<f64>,
    pub t0: Option<f64>,
    pub max_probability: Option<f64>,
    pub anchors: Option<RawAnchors>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAnchors {
    pub write: Vec<[f64; 2]>,
    pub read: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPhases {
    #[serde(default)]
    pub phi_w: f64,
    #[serde(default)]
    pub phi_r: f64,
    #[serde(default)]
    pub phi_off: f64,
    pub phi_w_sweep: Option<Vec<f64>>,
    pub phi_r_curves: Option<Vec<f64>>,
    /// Four explicit (φ_w, φ_r) CHSH settings.
    pub settings: Option<Vec<[f64; 2]>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawThermal {
    pub write_early: f64,
    pub write_late: f64,
    pub read_early: f64,
    pub read_late: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawLeakage {
    pub write: [f64; 2],
    pub read: [f64; 2],
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawNoise {
    pub thermal: Option<RawThermal>,
    pub interferometer_visibility: Option<f64>,
    pub write_jitter_fwhm: Option<f64>,
    pub read_jitter_fwhm: Option<f64>,
    pub detector_efficiency: Option<[f64; 2]>,
    pub dark_count_prob: Option<f64>,
    pub leakage: Option<RawLeakage>,
    pub coupling_efficiency: Option<f64>,
    pub filter_efficiency: Option<[f64; 2]>,
    pub splitting_asymmetry: Option<f64>,
    pub heating_epsilon: Option<f64>,
    pub interferometer_connected: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawCalibration {
    pub write_energy: Option<f64>,
    pub read_energy: Option<f64>,
    pub thermal: Option<RawThermal>,
    pub points: Option<usize>,
    pub trials_per_point: Option<u64>,
    pub phi_r_second: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSpectrum {
    pub file: Option<String>,
    pub modes: Option<usize>,
    pub fsr_mean: Option<f64>,
    pub fsr_std: Option<f64>,
    pub packet_fwhm: Option<f64>,
    pub delay_max: Option<f64>,
    pub delay_step: Option<f64>,
}

impl From<RawThermal> for ThermalSchedule {
    fn from(t: RawThermal) -> Self {
        ThermalSchedule::new([t.write_early, t.write_late, t.read_early, t.read_late])
    }
}

impl From<ThermalSchedule> for RawThermal {
    fn from(t: ThermalSchedule) -> Self {
        RawThermal {
            write_early: t.write_early,
            write_late: t.write_late,
            read_early: t.read_early,
            read_late: t.read_late,
        }
    }
}

/// Reads, overrides and validates a configuration file.
///
/// Each override is `dotted.path=VALUE`, where VALUE is any TOML value
/// (bare words are taken as strings).
pub fn load_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
        context: path.display().to_string(),
        message: e.to_string(),
    })?;
    let mut cfg = parse_config(&text, overrides).map_err(|e| match e {
        Error::Parse { context, message } if context == "config" => Error::Parse {
            context: path.display().to_string(),
            message,
        },
        other => other,
    })?;
    if let Some(SpectrumPlan { source: SpectrumSource::File(f), .. }) = cfg.spectrum.as_mut() {
        if f.is_relative() {
            if let Some(dir) = path.parent() {
                *f = dir.join(&*f);
            }
        }
    }
    Ok(cfg)
}

/// Like [`load_config`], from a string.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Parse {
        context: "config".into(),
        message: e.to_string(),
    })?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let raw: RawConfig = table.try_into().map_err(|e: toml::de::Error| Error::Parse {
        context: "config".into(),
        message: e.to_string(),
    })?;
    raw.into_config()
}

/// Sets `dotted.path=VALUE` in a TOML table, creating tables as needed.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, value) = spec
        .split_once('=')
        .ok_or_else(|| Error::validation(format!("override `{spec}` is not KEY=VALUE")))?;
    let key = key.trim();
    let value = value.trim();
    let parsed: toml::Value = match format!("v = {value}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(value.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::validation(format!("bad override key `{key}`")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::validation(format!("override path `{key}` crosses a non-table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}

fn pi(x: f64) -> f64 {
    x * PI
}

fn unpi(x: f64) -> f64 {
    x / PI
}

impl RawConfig {
    pub fn into_config(self) -> Result<ExperimentConfig> {
        let kind = ExperimentKind::parse(&self.kind)
            .ok_or_else(|| Error::validation(format!("unknown experiment kind `{}`", self.kind)))?;
        let engine = match self.engine.to_ascii_lowercase().as_str() {
            "gaussian" => EngineKind::Gaussian,
            "fock" => EngineKind::Fock { truncation: self.truncation.unwrap_or(4) },
            other => return Err(Error::validation(format!("unknown engine `{other}`"))),
        };
        let sampling = match self.sampling.as_deref().unwrap_or("aggregate") {
            "none" => Sampling::None,
            "aggregate" => Sampling::Aggregate,
            "per-trial" => Sampling::PerTrial,
            other => return Err(Error::validation(format!("unknown sampling mode `{other}`"))),
        };

        let d = CavityParams::default();
        let c = self.cavity;
        let cavity = CavityParams {
            wavelength: c.wavelength.unwrap_or(d.wavelength),
            kappa: c.kappa.unwrap_or(d.kappa),
            kappa_i: c.kappa_i.unwrap_or(d.kappa_i),
            g0: c.g0.unwrap_or(d.g0),
            mech_frequency: c.mech_frequency.unwrap_or(d.mech_frequency),
        };
        let d = WaveguideParams::default();
        let w = self.waveguide;
        let waveguide = WaveguideParams {
            round_trip_time: w.round_trip_time.unwrap_or(d.round_trip_time),
            group_velocity: w.group_velocity.unwrap_or(d.group_velocity),
            length: w.length.unwrap_or(d.length),
            t1: w.t1.unwrap_or(d.t1),
            repetition_period: w.repetition_period.unwrap_or(d.repetition_period),
            dispersion_efficiency: w.dispersion_efficiency.unwrap_or(d.dispersion_efficiency),
        };

        let p = self.pulses;
        let calibration = match p.anchors {
            Some(a) => EnergyCalibration {
                write: a.write.iter().map(|x| (x[0], x[1])).collect(),
                read: a.read.iter().map(|x| (x[0], x[1])).collect(),
            },
            None => EnergyCalibration::default(),
        };
        calibration.validate()?;
        let max_probability = p.max_probability.unwrap_or(0.05);
        let write_energy = p.write_energy.unwrap_or(0.0);
        let read_energy = p.read_energy.unwrap_or(0.0);
        let pw = p.write_probability.unwrap_or_else(|| {
            scattering_probability_from_energy(write_energy, true, &calibration, max_probability)
        });
        let pr = p.read_probability.unwrap_or_else(|| {
            scattering_probability_from_energy(read_energy, false, &calibration, max_probability)
        });
        let schedule = build_pulse_sequence(
            kind,
            waveguide.round_trip_time,
            p.t0.unwrap_or(0.0),
            p.duration_fwhm.unwrap_or(30e-9),
            (write_energy, read_energy),
            (pw, pr),
        )?;

        let ph = self.phases;
        let phases = PhaseSettings::new(pi(ph.phi_w), pi(ph.phi_r), pi(ph.phi_off));
        let sweep = match (ph.phi_w_sweep, ph.phi_r_curves) {
            (None, None) => None,
            (w, r) => Some(PhaseSweep {
                phi_w: w.unwrap_or_else(|| vec![ph.phi_w]).into_iter().map(pi).collect(),
                phi_r: r.unwrap_or_else(|| vec![ph.phi_r]).into_iter().map(pi).collect(),
            }),
        };
        let chsh_settings = match ph.settings {
            None => None,
            Some(s) if s.len() == 4 => Some([
                (pi(s[0][0]), pi(s[0][1])),
                (pi(s[1][0]), pi(s[1][1])),
                (pi(s[2][0]), pi(s[2][1])),
                (pi(s[3][0]), pi(s[3][1])),
            ]),
            Some(s) => {
                return Err(Error::validation(format!(
                    "phases.settings needs 4 (phi_w, phi_r) pairs, got {}",
                    s.len()
                )))
            }
        };

        let n = self.noise;
        let mut assumptions = Vec::new();
        let (assumed_eff, assumed_dark) = NoiseModel::assumed_detectors();
        let detector_efficiency = n.detector_efficiency.unwrap_or_else(|| {
            assumptions.push(format!("detector_efficiency defaulted to {}", assumed_eff[0]));
            assumed_eff
        });
        let dark_count_prob = n.dark_count_prob.unwrap_or_else(|| {
            assumptions.push(format!("dark_count_prob defaulted to {assumed_dark}"));
            assumed_dark
        });
        let dn = NoiseModel::default();
        let noise = NoiseModel {
            thermal: n.thermal.map(Into::into).unwrap_or_default(),
            interferometer_visibility: n.interferometer_visibility.unwrap_or(dn.interferometer_visibility),
            write_jitter_fwhm: pi(n.write_jitter_fwhm.unwrap_or(0.0)),
            read_jitter_fwhm: pi(n.read_jitter_fwhm.unwrap_or(0.0)),
            detector_efficiency,
            dark_count_prob,
            leakage: n
                .leakage
                .map(|l| Leakage { write: l.write, read: l.read })
                .unwrap_or_default(),
            coupling_efficiency: n.coupling_efficiency.unwrap_or(dn.coupling_efficiency),
            filter_efficiency: n.filter_efficiency.unwrap_or(dn.filter_efficiency),
            splitting_asymmetry: n.splitting_asymmetry.unwrap_or(0.0),
            heating_epsilon: n.heating_epsilon.unwrap_or(dn.heating_epsilon),
            interferometer_connected: n.interferometer_connected.unwrap_or(true),
        };

        let dc = CalibrationPlan::default();
        let calibration_plan = match self.calibration {
            None => dc,
            Some(c) => CalibrationPlan {
                write_energy: c.write_energy.unwrap_or(dc.write_energy),
                read_energy: c.read_energy.unwrap_or(dc.read_energy),
                thermal: c.thermal.map(Into::into),
                points: c.points.unwrap_or(dc.points),
                trials_per_point: c.trials_per_point.unwrap_or(dc.trials_per_point),
                phi_r_second: c.phi_r_second.map(pi).unwrap_or(dc.phi_r_second),
            },
        };

        let spectrum = self.spectrum.map(|s| {
            let source = match s.file {
                Some(f) => SpectrumSource::File(f.into()),
                None => SpectrumSource::Synthetic {
                    modes: s.modes.unwrap_or(12),
                    fsr_mean: s.fsr_mean.unwrap_or(1.0 / waveguide.round_trip_time),
                    fsr_std: s.fsr_std.unwrap_or(0.0),
                    packet_fwhm: s.packet_fwhm,
                },
            };
            SpectrumPlan {
                source,
                delay_max: s.delay_max.unwrap_or(3.0 * waveguide.round_trip_time),
                delay_step: s.delay_step.unwrap_or(0.5e-9),
            }
        });
        if kind == ExperimentKind::ThermalG2Tau && spectrum.is_none() {
            return Err(Error::validation("ThermalG2Tau needs a [spectrum] table"));
        }
        if let Some(s) = &spectrum {
            if !(s.delay_step > 0.0 && s.delay_max > s.delay_step) {
                return Err(Error::validation("spectrum delay grid must be positive and non-empty"));
            }
            if let SpectrumSource::Synthetic { modes, fsr_mean, fsr_std, .. } = s.source {
                if modes < 2 || !(fsr_mean > 0.0) || !(fsr_std >= 0.0) {
                    return Err(Error::validation("synthetic spectrum needs ≥2 modes, fsr_mean > 0, fsr_std ≥ 0"));
                }
            }
        }

        let cfg = ExperimentConfig {
            kind,
            engine,
            trials: self.trials,
            seed: self.seed,
            sampling,
            cavity,
            waveguide,
            calibration,
            schedule,
            max_probability,
            phases,
            sweep,
            chsh_settings,
            calibration_plan,
            noise,
            spectrum,
            assumptions,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl ExperimentConfig {
    /// File representation with every derived value written explicitly.
    pub fn to_raw(&self) -> RawConfig {
        let (engine, truncation) = match self.engine {
            EngineKind::Gaussian => ("gaussian".to_string(), None),
            EngineKind::Fock { truncation } => ("fock".to_string(), Some(truncation)),
        };
        let pulses = match &self.schedule {
            PulseSchedule::Pulsed(p) => {
                let w = self.pulse(PulseRole::WriteEarly);
                let r = self.pulse(PulseRole::ReadEarly);
                RawPulses {
                    write_energy: Some(w.energy),
                    read_energy: Some(r.energy),
                    write_probability: Some(w.probability),
                    read_probability: Some(r.probability),
                    duration_fwhm: Some(w.duration_fwhm),
                    t0: Some(p[0].center_time),
                    max_probability: Some(self.max_probability),
                    anchors: None,
                }
            }
            PulseSchedule::ContinuousPump { .. } => RawPulses {
                max_probability: Some(self.max_probability),
                ..Default::default()
            },
        };
        let pulses = RawPulses {
            anchors: Some(RawAnchors {
                write: self.calibration.write.iter().map(|&(e, p)| [e, p]).collect(),
                read: self.calibration.read.iter().map(|&(e, p)| [e, p]).collect(),
            }),
            ..pulses
        };
        let n = &self.noise;
        let c = &self.calibration_plan;
        RawConfig {
            kind: self.kind.name().to_string(),
            engine,
            truncation,
            trials: self.trials,
            seed: self.seed,
            sampling: Some(self.sampling.name().to_string()),
            cavity: RawCavity {
                wavelength: Some(self.cavity.wavelength),
                kappa: Some(self.cavity.kappa),
                kappa_i: Some(self.cavity.kappa_i),
                g0: Some(self.cavity.g0),
                mech_frequency: Some(self.cavity.mech_frequency),
            },
            waveguide: RawWaveguide {
                round_trip_time: Some(self.waveguide.round_trip_time),
                group_velocity: Some(self.waveguide.group_velocity),
                length: Some(self.waveguide.length),
                t1: Some(self.waveguide.t1),
                repetition_period: Some(self.waveguide.repetition_period),
                dispersion_efficiency: Some(self.waveguide.dispersion_efficiency),
            },
            pulses,
            phases: RawPhases {
                phi_w: unpi(self.phases.phi_w),
                phi_r: unpi(self.phases.phi_r),
                phi_off: unpi(self.phases.phi_off),
                phi_w_sweep: self.sweep.as_ref().map(|s| s.phi_w.iter().copied().map(unpi).collect()),
                phi_r_curves: self.sweep.as_ref().map(|s| s.phi_r.iter().copied().map(unpi).collect()),
                settings: self
                    .chsh_settings
                    .map(|s| s.iter().map(|&(w, r)| [unpi(w), unpi(r)]).collect()),
            },
            noise: RawNoise {
                thermal: Some(n.thermal.into()),
                interferometer_visibility: Some(n.interferometer_visibility),
                write_jitter_fwhm: Some(unpi(n.write_jitter_fwhm)),
                read_jitter_fwhm: Some(unpi(n.read_jitter_fwhm)),
                detector_efficiency: Some(n.detector_efficiency),
                dark_count_prob: Some(n.dark_count_prob),
                leakage: Some(RawLeakage { write: n.leakage.write, read: n.leakage.read }),
                coupling_efficiency: Some(n.coupling_efficiency),
                filter_efficiency: Some(n.filter_efficiency),
                splitting_asymmetry: Some(n.splitting_asymmetry),
                heating_epsilon: Some(n.heating_epsilon),
                interferometer_connected: Some(n.interferometer_connected),
            },
            calibration: Some(RawCalibration {
                write_energy: Some(c.write_energy),
                read_energy: Some(c.read_energy),
                thermal: c.thermal.map(Into::into),
                points: Some(c.points),
                trials_per_point: Some(c.trials_per_point),
                phi_r_second: Some(unpi(c.phi_r_second)),
            }),
            spectrum: self.spectrum.as_ref().map(|s| match &s.source {
                SpectrumSource::File(f) => RawSpectrum {
                    file: Some(f.display().to_string()),
                    delay_max: Some(s.delay_max),
                    delay_step: Some(s.delay_step),
                    ..Default::default()
                },
                SpectrumSource::Synthetic { modes, fsr_mean, fsr_std, packet_fwhm } => RawSpectrum {
                    file: None,
                    modes: Some(*modes),
                    fsr_mean: Some(*fsr_mean),
                    fsr_std: Some(*fsr_std),
                    packet_fwhm: *packet_fwhm,
                    delay_max: Some(s.delay_max),
                    delay_step: Some(s.delay_step),
                },
            }),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_raw()).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
kind = "BellTest"
engine = "gaussian"
trials = 1000
seed = 42
[cavity]
[waveguide]
[pulses]
write_probability = 0.0013
read_probability = 0.007
[phases]
phi_off = 0.25
[noise]
"#;

    #[test]
    fn minimal_bell_config() {
        let cfg = parse_config(MINIMAL, &[]).unwrap();
        assert_eq!(cfg.write_probability(), 0.0013);
        assert_eq!(cfg.read_probability(), 0.007);
        assert_eq!(cfg.assumptions.len(), 2);
        assert!((cfg.phases.phi_0() - PI).abs() < 1e-15);
    }

    #[test]
    fn zero_probability_is_valid() {
        let cfg = parse_config(
            MINIMAL,
            &["pulses.write_probability=0".into(), "pulses.read_probability=0".into()],
        )
        .unwrap();
        assert_eq!(cfg.write_probability(), 0.0);
    }

    #[test]
    fn negative_occupancy_rejected() {
        let text = format!(
            "{MINIMAL}[noise.thermal]\nwrite_early = -0.1\nwrite_late = 0.0\nread_early = 0.0\nread_late = 0.0\n"
        );
        let err = parse_config(&text, &[]).unwrap_err();
        assert!(err.is_validation());
        assert!(err.to_string().contains("probability/occupancy out of range"), "{err}");
    }

    #[test]
    fn zero_trials_rejected() {
        let err = parse_config(MINIMAL, &["trials=0".into()]).unwrap_err();
        assert!(err.is_validation());
    }

    #[test]
    fn parse_errors_carry_location() {
        let err = parse_config("kind = \n", &[]).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        assert!(err.to_string().contains("line 1"), "{err}");
        let err = parse_config(&MINIMAL.replace("[noise]", "[noise]\nbogus = 1"), &[]).unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn overrides_reach_nested_tables() {
        let cfg = parse_config(
            MINIMAL,
            &["noise.detector_efficiency=[0.5, 0.6]".into(), "engine=fock".into()],
        )
        .unwrap();
        assert_eq!(cfg.noise.detector_efficiency, [0.5, 0.6]);
        assert_eq!(cfg.engine, EngineKind::Fock { truncation: 4 });
        assert!(parse_config(MINIMAL, &["noise".into()]).is_err());
    }

    #[test]
    fn phi_0_follows_offset() {
        let mut cfg = parse_config(MINIMAL, &[]).unwrap();
        for off in [0.0, 0.3, -1.2, 7.0] {
            cfg.phases.phi_off = off;
            let d = wrap_signed(cfg.phases.phi_0() - 2.0 * off - std::f64::consts::FRAC_PI_2);
            assert!(d.abs() < 1e-12);
        }
    }
}
