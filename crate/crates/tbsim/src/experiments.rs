//! End-to-end workflows: run a configuration and reduce it to the
//! quantities each experiment reports.

use std::f64::consts::TAU;

use serde::Serialize;

use crate::analysis::{
    chsh_s, correlation_e, fit_sinusoid_and_choose_phases, g2_cross, visibility_fitted, visibility_max, witness_r,
    witnesses_entanglement, AnalysisResult, CoincidenceTable, PhaseCalibration, SweepCurve,
};
use crate::circuit::{Engine, Op};
use crate::error::{Error, Result};
use crate::fock::Detector;
use crate::gaussian::CovarianceState;
use crate::model::{
    build_pulse_sequence, scattering_probability_from_energy, ExperimentConfig, ExperimentKind, PhaseSweep,
    PulseSchedule, Sampling, SpectrumSource,
};
use crate::protocol::{run_experiment, window_mask, ExperimentOutput, SettingOutcome, Window};
use crate::waveguide::{
    constant_fsr_spectrum, delay_grid, extract_round_trip, g2_tau_curve, read_spectrum, sample_jittered_spectrum,
    thermal_g2_zero, FsrStatistics, RoundTrip,
};

/// Singles and coincidences between two windows of one setting, from the
/// sampled counts when present and otherwise from the exact distribution
/// scaled to the trial count.
fn window_g2(s: &SettingOutcome, trials: u64, w: Window, r: Window) -> Result<AnalysisResult> {
    let (mw, mr) = (window_mask(w), window_mask(r));
    match &s.counts {
        Some(c) => crate::analysis::g2_between_windows(c, w, r),
        None => {
            let d = &s.exact;
            let n = trials as f64;
            let both = 1.0 - d.none_click(mw) - d.none_click(mr) + d.none_click(mw | mr);
            g2_cross(n * (1.0 - d.none_click(mw)), n * (1.0 - d.none_click(mr)), n * both, n)
        }
    }
}

fn overlap_table(s: &SettingOutcome, trials: u64) -> Result<CoincidenceTable> {
    match &s.counts {
        Some(c) => CoincidenceTable::from_counts(c, Window::WriteOverlap, Window::ReadOverlap),
        None => CoincidenceTable::from_distribution(&s.exact, trials as f64, Window::WriteOverlap, Window::ReadOverlap),
    }
}

/// g² for each combination of write and read time bins, measured with the
/// delay arm disconnected.
#[derive(Clone, Debug, Serialize)]
pub struct CrossCorrelations {
    pub ee: AnalysisResult,
    pub el: AnalysisResult,
    pub le: AnalysisResult,
    pub ll: AnalysisResult,
}

/// With the delay arm disconnected, early photons arrive in the
/// early-direct window and late photons in the overlap window.
pub fn cross_correlations(out: &ExperimentOutput) -> Result<CrossCorrelations> {
    if out.kind != ExperimentKind::DoubleCrossCorrelation {
        return Err(Error::validation("cross-correlations need a DoubleCrossCorrelation run"));
    }
    let s = &out.settings[0];
    let (we, wl, re, rl) = (Window::WriteEarlyDirect, Window::WriteOverlap, Window::ReadEarlyDirect, Window::ReadOverlap);
    Ok(CrossCorrelations {
        ee: window_g2(s, out.trials, we, re)?,
        el: window_g2(s, out.trials, we, rl)?,
        le: window_g2(s, out.trials, wl, re)?,
        ll: window_g2(s, out.trials, wl, rl)?,
    })
}

/// E from the overlap windows of every setting.
pub fn correlations(out: &ExperimentOutput) -> Result<Vec<AnalysisResult>> {
    out.settings.iter().map(|s| correlation_e(&overlap_table(s, out.trials)?)).collect()
}

/// E(φ_w) curves, one per read phase, in the order the run visited them.
pub fn sweep_curves(out: &ExperimentOutput) -> Result<Vec<SweepCurve>> {
    let es = correlations(out)?;
    let mut curves: Vec<SweepCurve> = Vec::new();
    for (s, e) in out.settings.iter().zip(es) {
        let idx = match curves.iter().position(|c| c.phi_r == s.phi_r) {
            Some(i) => i,
            None => {
                curves.push(SweepCurve { phi_r: s.phi_r, phi_w: vec![], e: vec![], sigma: vec![] });
                curves.len() - 1
            }
        };
        curves[idx].phi_w.push(s.phi_w);
        curves[idx].e.push(e.value);
        curves[idx].sigma.push(e.sigma);
    }
    Ok(curves)
}

#[derive(Clone, Debug, Serialize)]
pub struct BellResult {
    /// E in the order w0r0, w1r0, w0r1, w1r1.
    pub e: [AnalysisResult; 4],
    pub s: AnalysisResult,
    /// S of the exact distributions.
    pub exact_s: f64,
}

pub fn bell_result(out: &ExperimentOutput) -> Result<BellResult> {
    if out.kind != ExperimentKind::BellTest || out.settings.len() != 4 {
        return Err(Error::validation("CHSH evaluation needs a BellTest run with four settings"));
    }
    let es = correlations(out)?;
    let e: [AnalysisResult; 4] = es.try_into().expect("four settings");
    let exact: Vec<f64> = out
        .settings
        .iter()
        .map(|s| {
            let t = CoincidenceTable::from_distribution(&s.exact, 1.0, Window::WriteOverlap, Window::ReadOverlap)?;
            Ok(correlation_e(&t)?.value)
        })
        .collect::<Result<_>>()?;
    Ok(BellResult {
        s: chsh_s(&e),
        exact_s: (exact[0] - exact[1] + exact[2] + exact[3]).abs(),
        e,
    })
}

/// Replaces both pulse probabilities, keeping the schedule timing.
fn with_probabilities(cfg: &ExperimentConfig, energies: (f64, f64), probs: (f64, f64)) -> Result<ExperimentConfig> {
    let mut c = cfg.clone();
    let (t0, fwhm) = match &cfg.schedule {
        PulseSchedule::Pulsed(p) => (p[0].center_time, p[0].duration_fwhm),
        PulseSchedule::ContinuousPump { .. } => return Err(Error::validation("continuous pump has no pulses")),
    };
    c.schedule = build_pulse_sequence(c.kind, c.waveguide.round_trip_time, t0, fwhm, energies, probs)?;
    Ok(c)
}

/// The calibration sweep derived from a Bell configuration: calibration
/// pulse energies, `points` write phases over one period, and read phases
/// 0 and the configured second phase.
pub fn calibration_config(cfg: &ExperimentConfig) -> Result<ExperimentConfig> {
    let plan = &cfg.calibration_plan;
    let pw = scattering_probability_from_energy(plan.write_energy, true, &cfg.calibration, cfg.max_probability);
    let pr = scattering_probability_from_energy(plan.read_energy, false, &cfg.calibration, cfg.max_probability);
    let mut c = cfg.clone();
    c.kind = ExperimentKind::Calibration;
    c = with_probabilities(&c, (plan.write_energy, plan.read_energy), (pw, pr))?;
    if let Some(t) = plan.thermal {
        c.noise.thermal = t;
    }
    c.sweep = Some(PhaseSweep {
        phi_w: (0..plan.points).map(|i| TAU * i as f64 / plan.points as f64).collect(),
        phi_r: vec![0.0, plan.phi_r_second],
    });
    c.chsh_settings = None;
    c.trials = plan.trials_per_point;
    c.sampling = Sampling::Aggregate;
    Ok(c)
}

/// Runs the calibration sweep and fits it.
pub fn run_calibration(cfg: &ExperimentConfig) -> Result<(PhaseCalibration, Vec<SweepCurve>)> {
    let cal_cfg = calibration_config(cfg)?;
    let out = run_experiment(&cal_cfg)?;
    let curves = sweep_curves(&out)?;
    let cal = fit_sinusoid_and_choose_phases(&curves[0], &curves[1])?;
    Ok((cal, curves))
}

/// The Bell configuration with the calibrated CHSH settings.
pub fn calibrated_bell_config(cfg: &ExperimentConfig, cal: &PhaseCalibration) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.kind = ExperimentKind::BellTest;
    c.chsh_settings = Some(cal.settings);
    c
}

/// Witness R from a φ_w sweep and a reference cross-correlation run.
#[derive(Clone, Debug, Serialize)]
pub struct WitnessResult {
    pub visibility: AnalysisResult,
    pub visibility_fitted: Option<AnalysisResult>,
    pub g2_ee: AnalysisResult,
    pub g2_ll: AnalysisResult,
    pub r: AnalysisResult,
    /// R + 3σ < 1.
    pub entangled: bool,
}

/// The configuration of the reference cross-correlation run for `cfg`.
pub fn reference_config(cfg: &ExperimentConfig) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.kind = ExperimentKind::DoubleCrossCorrelation;
    c.sweep = None;
    c.chsh_settings = None;
    c
}

pub fn witness(sweep: &ExperimentOutput, reference: &ExperimentOutput) -> Result<WitnessResult> {
    let es = correlations(sweep)?;
    let visibility = visibility_max(&es)?;
    let fitted = sweep_curves(sweep)?.first().and_then(|c| visibility_fitted(c).ok());
    let cc = cross_correlations(reference)?;
    let r = witness_r(&visibility, &cc.ee, &cc.ll)?;
    Ok(WitnessResult {
        entangled: witnesses_entanglement(&r, 3.0),
        visibility,
        visibility_fitted: fitted,
        g2_ee: cc.ee,
        g2_ll: cc.ll,
        r,
    })
}

/// The thermal g²(Δt) curve and the numbers read off it.
#[derive(Clone, Debug, Serialize)]
pub struct ThermalG2 {
    pub delays: Vec<f64>,
    pub g2: Vec<f64>,
    pub tau: f64,
    pub packet_fwhm: f64,
    pub revival_height: f64,
    /// g²(0) of a single thermal mode from its covariance matrix.
    pub g2_zero_single_mode: f64,
}

pub fn run_thermal_g2(cfg: &ExperimentConfig) -> Result<ThermalG2> {
    let plan = cfg
        .spectrum
        .as_ref()
        .ok_or_else(|| Error::validation("ThermalG2Tau needs a [spectrum] table"))?;
    let t1 = cfg.waveguide.t1;
    let spectrum = match &plan.source {
        SpectrumSource::File(p) => read_spectrum(p, t1)?,
        SpectrumSource::Synthetic { modes, fsr_mean, fsr_std, packet_fwhm } => {
            if *fsr_std > 0.0 {
                use rand::SeedableRng;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
                let stats = FsrStatistics { mean: *fsr_mean, std: *fsr_std, modes: *modes };
                sample_jittered_spectrum(stats, *packet_fwhm, t1, &mut rng)?
            } else {
                constant_fsr_spectrum(*modes, *fsr_mean, *packet_fwhm, t1)?
            }
        }
    };
    let delays = delay_grid(plan.delay_max, plan.delay_step);
    let g2 = g2_tau_curve(&spectrum, &delays);
    let RoundTrip { tau, packet_fwhm, revival_height } = extract_round_trip(&delays, &g2)?;
    Ok(ThermalG2 { delays, g2, tau, packet_fwhm, revival_height, g2_zero_single_mode: thermal_g2_zero(1.0)? })
}

/// Click probabilities of a Stokes (blue) and an anti-Stokes (red) pulse
/// of equal scattering probability `p` on a thermal mechanical mode.
pub fn sideband_click_probabilities(n_th: f64, p: f64, efficiency: f64) -> Result<(f64, f64)> {
    let det = [Detector::new("D", &["o"], efficiency)];
    let start = || CovarianceState::thermal("m", n_th).tensor(&CovarianceState::vacuum(&["o"]));
    let blue = start()?.apply(&Op::TwoModeSqueeze { a: "o".into(), b: "m".into(), p, phase: 0.0 })?;
    let red = start()?.apply(&Op::BeamSplitter { a: "o".into(), b: "m".into(), transmissivity: 1.0 - p, phase: 0.0 })?;
    Ok((blue.clicks(&det)?.marginal_click(0), red.clicks(&det)?.marginal_click(0)))
}
