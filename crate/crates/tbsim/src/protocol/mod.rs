//! The write/read pulse sequence, the unbalanced interferometer and the
//! detection chain, run on either engine.
//!
//! Every trial produces clicks on 12 channels: two detectors times six time
//! windows. Channel `2·w + k` is detector `k` in window `w`, in the order of
//! [`Window::ALL`]. Write channels occupy the low six bits of a pattern.

mod exact;
mod rates;
mod sampling;

pub use exact::{distribution_at_jitter, exact_distribution, no_click_table, pair_coincidences, pair_correlation};
pub use rates::{rate_budget, RateBudget, RateFactor};
pub use sampling::{
    click_records_table, counts_from_records, parse_click_records, sample_aggregate, sample_per_trial,
    ClickRecord, JitterInterpolator, PatternCounts,
};

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::model::{
    EngineKind, ExperimentConfig, ExperimentKind, Leakage, PhaseSettings, Sampling, ThermalSchedule,
    FWHM_TO_SIGMA,
};
use crate::outcome::OutcomeDistribution;

pub const CHANNELS: usize = 12;
pub const PATTERNS: usize = 1 << CHANNELS;
pub const WRITE_MASK: usize = 0b00_0000_111111;
pub const READ_MASK: usize = 0b1111_1100_0000;

/// Detection time windows, in arrival order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Window {
    WriteEarlyDirect,
    WriteOverlap,
    WriteLateDelayed,
    ReadEarlyDirect,
    ReadOverlap,
    ReadLateDelayed,
}

impl Window {
    pub const ALL: [Window; 6] = [
        Window::WriteEarlyDirect,
        Window::WriteOverlap,
        Window::WriteLateDelayed,
        Window::ReadEarlyDirect,
        Window::ReadOverlap,
        Window::ReadLateDelayed,
    ];

    pub fn index(self) -> usize {
        Window::ALL.iter().position(|&w| w == self).unwrap()
    }

    pub fn label(self) -> &'static str {
        match self {
            Window::WriteEarlyDirect => "write-early-direct",
            Window::WriteOverlap => "write-overlap",
            Window::WriteLateDelayed => "write-late-delayed",
            Window::ReadEarlyDirect => "read-early-direct",
            Window::ReadOverlap => "read-overlap",
            Window::ReadLateDelayed => "read-late-delayed",
        }
    }

    pub fn parse(s: &str) -> Option<Window> {
        Window::ALL.into_iter().find(|w| w.label() == s)
    }

    pub fn is_write(self) -> bool {
        self.index() < 3
    }
}

/// Bit index of detector `k` (0 or 1) in window `w`.
pub fn channel(w: Window, k: usize) -> usize {
    2 * w.index() + k
}

/// Pattern mask of detector `k` in window `w`.
pub fn channel_mask(w: Window, k: usize) -> usize {
    1 << channel(w, k)
}

/// Mask of both detectors in window `w`.
pub fn window_mask(w: Window) -> usize {
    channel_mask(w, 0) | channel_mask(w, 1)
}

pub fn channel_labels() -> Vec<String> {
    Window::ALL
        .iter()
        .flat_map(|w| (1..=2).map(move |k| format!("{}:D{k}", w.label())))
        .collect()
}

/// The unbalanced Mach–Zehnder between the device and the detectors.
#[derive(Clone, Debug, PartialEq)]
pub struct InterferometerModel {
    pub delay: f64,
    pub phi_off: f64,
    /// Overlap-window visibility of one photon passing the interferometer.
    pub visibility: f64,
    /// Relative deviation of BS1 and BS2 from 50:50.
    pub asymmetry: f64,
    /// False when the delay arm is disconnected.
    pub connected: bool,
}

/// Amplitude rows of one channel over the (early, late) input modes. Each
/// row is a separate output mode; rows of one channel add incoherently.
pub type ChannelRows = Vec<[C64; 2]>;

impl InterferometerModel {
    /// Output rows for the three windows of a stage, indexed `[window][detector]`.
    /// `jitter` adds to the delay-arm phase.
    pub fn port_rows(&self, jitter: f64) -> [[ChannelRows; 2]; 3] {
        let c = (0.5 * (1.0 + self.asymmetry)).sqrt();
        let s = (0.5 * (1.0 - self.asymmetry)).sqrt();
        let i = C64::new(0.0, 1.0);
        let long_phase = if self.connected { C64::from_polar(1.0, self.phi_off + jitter) } else { C64::new(0.0, 0.0) };
        // Short arm goes through both splitters' through ports; long arm is
        // reflected at BS1 and enters BS2 on the other input.
        let short = [C64::new(c * c, 0.0), i * c * s];
        let long = [-(s * s) * long_phase, i * s * c * long_phase];
        let zero = C64::new(0.0, 0.0);
        let v = self.visibility;
        let mut out: [[ChannelRows; 2]; 3] = Default::default();
        for k in 0..2 {
            out[0][k] = vec![[short[k], zero]];
            out[1][k] = vec![
                [v.sqrt() * long[k], v.sqrt() * short[k]],
                [(1.0 - v).sqrt() * long[k], zero],
                [zero, (1.0 - v).sqrt() * short[k]],
            ];
            out[2][k] = vec![[zero, long[k]]];
        }
        out
    }
}

/// Efficiencies and background clicks between the device and a click.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectionChain {
    /// Composite efficiency per detector.
    pub efficiency: [f64; 2],
    pub dark_count_prob: f64,
    pub leakage: Leakage,
}

impl DetectionChain {
    pub fn ideal() -> Self {
        DetectionChain { efficiency: [1.0, 1.0], dark_count_prob: 0.0, leakage: Leakage::default() }
    }

    /// Independent background click probability of every channel.
    pub fn background(&self) -> [f64; CHANNELS] {
        let mut q = [0.0; CHANNELS];
        for w in Window::ALL {
            for k in 0..2 {
                let leak = if w.is_write() { self.leakage.write[k] } else { self.leakage.read[k] };
                q[channel(w, k)] = 1.0 - (1.0 - self.dark_count_prob) * (1.0 - leak);
            }
        }
        q
    }
}

/// Everything the exact calculation needs for one phase setting.
#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolParams {
    pub p_w: f64,
    pub p_r: f64,
    pub phases: PhaseSettings,
    pub thermal: ThermalSchedule,
    /// Mechanical survival between write and read of the same bin.
    pub retrieval: f64,
    pub heating_epsilon: f64,
    pub interferometer: InterferometerModel,
    pub chain: DetectionChain,
    /// Standard deviations of the write and read phase jitter.
    pub jitter_sigma: (f64, f64),
    pub engine: EngineKind,
}

impl ProtocolParams {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        if cfg.kind == ExperimentKind::ThermalG2Tau {
            return Err(Error::validation("the thermal g²(Δt) experiment has no pulse sequence"));
        }
        let n = &cfg.noise;
        Ok(ProtocolParams {
            p_w: cfg.write_probability(),
            p_r: cfg.read_probability(),
            phases: cfg.phases,
            thermal: n.thermal,
            retrieval: cfg.waveguide.retrieval_efficiency(),
            heating_epsilon: n.heating_epsilon,
            interferometer: InterferometerModel {
                delay: cfg.waveguide.round_trip_time / 2.0,
                phi_off: cfg.phases.phi_off,
                // V_int scales the photon-pair coherence; write and read
                // photons each pass once.
                visibility: n.interferometer_visibility.sqrt(),
                asymmetry: n.splitting_asymmetry,
                connected: n.interferometer_connected && cfg.kind != ExperimentKind::DoubleCrossCorrelation,
            },
            chain: DetectionChain {
                efficiency: [n.chain_efficiency(0), n.chain_efficiency(1)],
                dark_count_prob: n.dark_count_prob,
                leakage: n.leakage,
            },
            jitter_sigma: (n.write_jitter_fwhm * FWHM_TO_SIGMA, n.read_jitter_fwhm * FWHM_TO_SIGMA),
            engine: cfg.engine,
        })
    }

    /// Noiseless parameters: pure states, perfect detection, no jitter.
    pub fn noiseless(p_w: f64, p_r: f64, phases: PhaseSettings, engine: EngineKind) -> Self {
        ProtocolParams {
            p_w,
            p_r,
            phases,
            thermal: ThermalSchedule::default(),
            retrieval: 1.0,
            heating_epsilon: 0.01,
            interferometer: InterferometerModel {
                delay: 63e-9,
                phi_off: phases.phi_off,
                visibility: 1.0,
                asymmetry: 0.0,
                connected: true,
            },
            chain: DetectionChain::ideal(),
            jitter_sigma: (0.0, 0.0),
            engine,
        }
    }

    pub fn with_phases(&self, phi_w: f64, phi_r: f64) -> Self {
        let mut p = self.clone();
        p.phases = self.phases.with_phases(phi_w, phi_r);
        p
    }

    /// Standard deviation of the summed jitter. Only δ_w + δ_r matters: the
    /// early chain is invariant under rotating its write photon by θ and its
    /// read photon by −θ.
    pub fn jitter_sum_sigma(&self) -> f64 {
        self.jitter_sigma.0.hypot(self.jitter_sigma.1)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_w", self.p_w), ("p_r", self.p_r)] {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::validation(format!("probability/occupancy out of range: {name} = {p}")));
            }
        }
        if !(0.0..=1.0).contains(&self.retrieval) {
            return Err(Error::validation("retrieval efficiency outside [0, 1]"));
        }
        Ok(())
    }
}

/// Read-channel rows conjugate the phase of the late read pulse.
pub(crate) fn read_late_phase(phases: &PhaseSettings) -> f64 {
    -phases.phi_r
}

/// Hermitian 2×2 response a†Ka of a set of stage channels. `mask` holds the
/// six channel bits of one stage.
pub(crate) fn stage_response(rows: &[[ChannelRows; 2]; 3], efficiency: [f64; 2], mask: usize) -> CMatrix {
    let mut k = CMatrix::zeros(2, 2);
    for (w, per_det) in rows.iter().enumerate() {
        for (d, ch_rows) in per_det.iter().enumerate() {
            if mask & (1 << (2 * w + d)) == 0 {
                continue;
            }
            for r in ch_rows {
                for i in 0..2 {
                    for j in 0..2 {
                        k[(i, j)] += r[i].conj() * r[j] * efficiency[d];
                    }
                }
            }
        }
    }
    k
}

/// One phase setting and the distributions computed for it.
#[derive(Clone, Debug)]
pub struct SettingOutcome {
    pub label: String,
    pub phi_w: f64,
    pub phi_r: f64,
    /// Jitter-averaged exact distribution with background folded in.
    pub exact: OutcomeDistribution,
    pub counts: Option<PatternCounts>,
    pub records: Option<Vec<ClickRecord>>,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub kind: ExperimentKind,
    pub trials: u64,
    pub settings: Vec<SettingOutcome>,
}

/// Phase settings a run iterates over, as (label, φ_w, φ_r).
pub fn phase_settings(cfg: &ExperimentConfig) -> Vec<(String, f64, f64)> {
    let ph = &cfg.phases;
    match cfg.kind {
        ExperimentKind::BellTest => {
            let s = cfg.chsh_settings.unwrap_or_else(|| ideal_chsh_settings(ph.phi_0()));
            let names = ["w0r0", "w1r0", "w0r1", "w1r1"];
            names.iter().zip(s).map(|(n, (w, r))| (n.to_string(), w, r)).collect()
        }
        ExperimentKind::TimeBinEntanglement | ExperimentKind::Calibration => match &cfg.sweep {
            Some(sw) => sw
                .phi_r
                .iter()
                .enumerate()
                .flat_map(|(j, &r)| sw.phi_w.iter().enumerate().map(move |(i, &w)| (format!("r{j}w{i}"), w, r)))
                .collect(),
            None => vec![("single".to_string(), ph.phi_w, ph.phi_r)],
        },
        _ => vec![("single".to_string(), ph.phi_w, ph.phi_r)],
    }
}

/// (φ_0 ∓ π/4, {0, π/2}) in the order w0r0, w1r0, w0r1, w1r1.
pub fn ideal_chsh_settings(phi_0: f64) -> [(f64, f64); 4] {
    let q = std::f64::consts::FRAC_PI_4;
    [(phi_0 - q, 0.0), (phi_0 + q, 0.0), (phi_0 - q, FRAC_PI_2), (phi_0 + q, FRAC_PI_2)]
}

/// Runs every phase setting of the configuration: exact distribution, and
/// sampled counts when sampling is enabled. Deterministic in (config, seed)
/// and independent of the rayon pool size.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let base = ProtocolParams::from_config(cfg)?;
    base.validate()?;
    let mut settings = Vec::new();
    for (idx, (label, w, r)) in phase_settings(cfg).into_iter().enumerate() {
        let params = base.with_phases(w, r);
        let exact = exact_distribution(&params)?;
        let (counts, records) = match cfg.sampling {
            Sampling::None => (None, None),
            Sampling::Aggregate => (Some(sample_aggregate(&exact, cfg.trials, cfg.seed, idx as u64)), None),
            Sampling::PerTrial => {
                let interp = JitterInterpolator::new(&params)?;
                let recs = sample_per_trial(&interp, &params, cfg.trials, cfg.seed, idx as u64);
                (Some(counts_from_records(&recs, cfg.trials)), Some(recs))
            }
        };
        log::info!("setting {label}: φ_w = {w:.4}, φ_r = {r:.4}");
        settings.push(SettingOutcome { label, phi_w: w, phi_r: r, exact, counts, records });
    }
    Ok(ExperimentOutput { kind: cfg.kind, trials: cfg.trials, settings })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn port_rows_conserve_power() {
        let ifm = InterferometerModel { delay: 63e-9, phi_off: 0.4, visibility: 0.9, asymmetry: 0.004, connected: true };
        let rows = ifm.port_rows(0.1);
        for input in 0..2 {
            let total: f64 = rows.iter().flatten().flatten().map(|r| r[input].norm_sqr()).sum();
            assert!((total - 1.0).abs() < 1e-12, "{total}");
        }
    }

    #[test]
    fn early_photon_splits_into_quarters() {
        let ifm = InterferometerModel { delay: 63e-9, phi_off: 0.0, visibility: 1.0, asymmetry: 0.0, connected: true };
        let rows = ifm.port_rows(0.0);
        for k in 0..2 {
            let direct: f64 = rows[0][k].iter().map(|r| r[0].norm_sqr()).sum();
            let overlap: f64 = rows[1][k].iter().map(|r| r[0].norm_sqr()).sum();
            assert!((direct - 0.25).abs() < 1e-15);
            assert!((overlap - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn labels_follow_channel_order() {
        let l = channel_labels();
        assert_eq!(l.len(), CHANNELS);
        assert_eq!(l[channel(Window::ReadOverlap, 1)], "read-overlap:D2");
        assert_eq!(window_mask(Window::WriteEarlyDirect) | window_mask(Window::WriteOverlap) | window_mask(Window::WriteLateDelayed), WRITE_MASK);
    }
}
