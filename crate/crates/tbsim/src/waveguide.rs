//! Mode-sum model of the hybridized cavity–waveguide mechanical spectrum.
//!
//! A phonon launched into the waveguide is a superposition of the
//! hybridized modes. Its population revives at the round-trip time when the
//! free spectral range is constant and dephases when it is not.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian::CovarianceState;
use crate::linalg::C64;

/// Mechanical modes relative to the central frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeSpectrum {
    /// Angular frequencies in rad/s.
    pub omegas: Vec<f64>,
    pub amplitudes: Vec<C64>,
    /// Energy damping rate γ = 1/T1.
    pub gamma: f64,
}

impl ModeSpectrum {
    pub fn new(omegas: Vec<f64>, amplitudes: Vec<C64>, gamma: f64) -> Result<Self> {
        if omegas.len() < 2 || omegas.len() != amplitudes.len() {
            return Err(Error::validation("a spectrum needs at least 2 modes with one amplitude each"));
        }
        if !(amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() > 0.0) {
            return Err(Error::validation("spectrum has zero total weight"));
        }
        if !(gamma >= 0.0) {
            return Err(Error::validation("damping rate must be non-negative"));
        }
        Ok(ModeSpectrum { omegas, amplitudes, gamma })
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    fn weights(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

/// Statistics of the spacing between neighboring modes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FsrStatistics {
    pub mean: f64,
    pub std: f64,
    pub modes: usize,
}

impl FsrStatistics {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean > 0.0 && self.std >= 0.0) || self.modes < 2 {
            return Err(Error::validation("FSR statistics need mean > 0, std ≥ 0 and at least 2 modes"));
        }
        Ok(())
    }
}

/// Power weight per mode: equal, or Gaussian with the width that gives a
/// zero-delay g² − 1 peak of the requested FWHM.
fn envelope_weights(freqs: &[f64], packet_fwhm: Option<f64>) -> Vec<f64> {
    match packet_fwhm {
        None => vec![1.0; freqs.len()],
        Some(fwhm) => {
            let sf = 2f64.ln().sqrt() / (PI * fwhm);
            freqs.iter().map(|f| (-f * f / (2.0 * sf * sf)).exp()).collect()
        }
    }
}

fn from_frequencies(freqs: Vec<f64>, packet_fwhm: Option<f64>, t1: f64) -> Result<ModeSpectrum> {
    let center = 0.5 * (freqs[0] + freqs[freqs.len() - 1]);
    let freqs: Vec<f64> = freqs.into_iter().map(|f| f - center).collect();
    let amps = envelope_weights(&freqs, packet_fwhm).into_iter().map(|w| C64::new(w.sqrt(), 0.0)).collect();
    let gamma = if t1.is_finite() { 1.0 / t1 } else { 0.0 };
    ModeSpectrum::new(freqs.into_iter().map(|f| TAU * f).collect(), amps, gamma)
}

/// Evenly spaced modes. `t1 = f64::INFINITY` disables damping.
pub fn constant_fsr_spectrum(modes: usize, fsr: f64, packet_fwhm: Option<f64>, t1: f64) -> Result<ModeSpectrum> {
    FsrStatistics { mean: fsr, std: 0.0, modes }.validate()?;
    from_frequencies((0..modes).map(|k| k as f64 * fsr).collect(), packet_fwhm, t1)
}

/// Modes whose neighbor spacings are independent normal draws. Spacings are
/// kept positive by redrawing.
pub fn sample_jittered_spectrum<R: Rng + ?Sized>(
    stats: FsrStatistics,
    packet_fwhm: Option<f64>,
    t1: f64,
    rng: &mut R,
) -> Result<ModeSpectrum> {
    stats.validate()?;
    let spacing = Normal::new(stats.mean, stats.std).map_err(|e| Error::validation(e.to_string()))?;
    let mut freqs = vec![0.0];
    while freqs.len() < stats.modes {
        let d = spacing.sample(rng);
        if d > 0.0 {
            freqs.push(freqs[freqs.len() - 1] + d);
        }
    }
    from_frequencies(freqs, packet_fwhm, t1)
}

/// P(t) = |b(t)|²/|b(0)|² with b(t) = Σ A_k e^{−iω_k t − γt/2}.
pub fn mode_sum_envelope(spectrum: &ModeSpectrum, times: &[f64]) -> Result<Vec<f64>> {
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::validation("time grid must be sorted"));
    }
    let b0: C64 = spectrum.amplitudes.iter().sum();
    if b0.norm_sqr() == 0.0 {
        return Err(Error::Undefined("packet amplitude vanishes at t = 0".into()));
    }
    Ok(times
        .iter()
        .map(|&t| {
            let b: C64 = spectrum
                .omegas
                .iter()
                .zip(&spectrum.amplitudes)
                .map(|(&w, &a)| a * C64::from_polar(1.0, -w * t))
                .sum();
            b.norm_sqr() * (-spectrum.gamma * t).exp() / b0.norm_sqr()
        })
        .collect())
}

/// g¹(Δt) of the stationary thermal field, with amplitude decay γ/2.
pub fn g1(spectrum: &ModeSpectrum, dt: f64) -> C64 {
    let w = spectrum.weights();
    let total: f64 = w.iter().sum();
    let s: C64 = spectrum.omegas.iter().zip(&w).map(|(&om, &p)| C64::from_polar(p, -om * dt)).sum();
    s * (-0.5 * spectrum.gamma * dt.abs()).exp() / total
}

/// g²(Δt) = 1 + |g¹(Δt)|² for thermal light.
pub fn g2_tau_curve(spectrum: &ModeSpectrum, delays: &[f64]) -> Vec<f64> {
    delays.iter().map(|&dt| 1.0 + g1(spectrum, dt).norm_sqr()).collect()
}

/// g²(0) of a thermal mode from its covariance matrix, by Isserlis:
/// ⟨a†a†aa⟩ = 2⟨a†a⟩² + |⟨aa⟩|².
pub fn thermal_g2_zero(nbar: f64) -> Result<f64> {
    if !(nbar > 0.0) {
        return Err(Error::Undefined("g² of the vacuum".into()));
    }
    let s = CovarianceState::thermal("m", nbar);
    let n = s.normal_correlations(&["m"])?[(0, 0)].re;
    let sig = s.sigma();
    let m = C64::new(0.5 * (sig[(0, 0)] - sig[(1, 1)]), sig[(0, 1)]);
    Ok((2.0 * n * n + m.norm_sqr()) / (n * n))
}

/// Delay grid 0, step, 2·step, … up to `max`.
pub fn delay_grid(max: f64, step: f64) -> Vec<f64> {
    let n = (max / step).floor() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

/// Round-trip time and packet length read off a g² curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundTrip {
    pub tau: f64,
    /// FWHM of the Δt = 0 peak of g² − 1.
    pub packet_fwhm: f64,
    pub revival_height: f64,
}

/// Locates the first revival above 1.2 and the zero-delay FWHM. `delays`
/// must start at 0 and be evenly spaced.
pub fn extract_round_trip(delays: &[f64], g2: &[f64]) -> Result<RoundTrip> {
    if delays.len() != g2.len() || delays.len() < 5 {
        return Err(Error::validation("g² curve needs at least 5 points on its delay grid"));
    }
    let step = delays[1] - delays[0];
    let half = 0.5 * (g2[0] - 1.0);
    let cross = (1..g2.len())
        .find(|&i| g2[i] - 1.0 < half)
        .ok_or_else(|| Error::Undefined("zero-delay peak does not fall to half height".into()))?;
    let (y0, y1) = (g2[cross - 1] - 1.0, g2[cross] - 1.0);
    let t_half = delays[cross - 1] + step * (y0 - half) / (y0 - y1);
    let fwhm = 2.0 * (t_half - delays[0]);
    // First interior local maximum above 1.2 past the zero-delay peak.
    let peak = (cross..g2.len() - 1)
        .find(|&i| g2[i] > 1.2 && g2[i] >= g2[i - 1] && g2[i] >= g2[i + 1])
        .ok_or_else(|| Error::Undefined("no revival found in the g² curve".into()))?;
    let (a, b, c) = (g2[peak - 1], g2[peak], g2[peak + 1]);
    let denom = a - 2.0 * b + c;
    let shift = if denom.abs() > 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
    Ok(RoundTrip {
        tau: delays[peak] + shift.clamp(-0.5, 0.5) * step,
        packet_fwhm: fwhm,
        revival_height: b - 0.25 * (a - c) * shift,
    })
}

/// Heights of the first `count` revivals of a population curve: the maximum
/// within ±period/2 of each multiple of `period`.
pub fn revival_peaks(times: &[f64], population: &[f64], period: f64, count: usize) -> Vec<f64> {
    (1..=count)
        .map(|k| {
            let c = k as f64 * period;
            times
                .iter()
                .zip(population)
                .filter(|(&t, _)| (t - c).abs() <= 0.5 * period)
                .map(|(_, &p)| p)
                .fold(f64::NAN, f64::max)
        })
        .collect()
}

/// Ensemble mean of P(t) over `seeds` jittered spectra. Seed `s` draws from
/// its own ChaCha stream.
pub fn ensemble_envelope(
    stats: FsrStatistics,
    packet_fwhm: Option<f64>,
    t1: f64,
    times: &[f64],
    seeds: u64,
    base_seed: u64,
) -> Result<Vec<f64>> {
    use rand::SeedableRng;
    let curves: Vec<Vec<f64>> = (0..seeds)
        .into_par_iter()
        .map(|s| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(base_seed);
            rng.set_stream(s);
            let sp = sample_jittered_spectrum(stats, packet_fwhm, t1, &mut rng)?;
            mode_sum_envelope(&sp, times)
        })
        .collect::<Result<_>>()?;
    let mut mean = vec![0.0; times.len()];
    for c in &curves {
        for (m, v) in mean.iter_mut().zip(c) {
            *m += v / seeds as f64;
        }
    }
    Ok(mean)
}

/// Retrieval factor from dephasing alone: the ensemble mean of |g¹|² at the
/// nominal round trip 1/FSR, without damping.
pub fn dispersion_retrieval_efficiency(
    stats: FsrStatistics,
    packet_fwhm: Option<f64>,
    seeds: u64,
    base_seed: u64,
) -> Result<f64> {
    let tau = 1.0 / stats.mean;
    let grid = delay_grid(1.5 * tau, tau / 200.0);
    let mean = ensemble_envelope(stats, packet_fwhm, f64::INFINITY, &grid, seeds, base_seed)?;
    Ok(revival_peaks(&grid, &mean, tau, 1)[0])
}

/// Reads a spectrum file: whitespace-separated `frequency_Hz amplitude`
/// or `frequency_Hz re im` rows. Frequencies are taken relative to the
/// midpoint of the listed range.
pub fn read_spectrum(path: &Path, t1: f64) -> Result<ModeSpectrum> {
    let text = std::fs::read_to_string(path)?;
    parse_spectrum(&text, t1).map_err(|e| match e {
        Error::Parse { context, message } => Error::Parse { context: format!("{}: {context}", path.display()), message },
        other => other,
    })
}

pub fn parse_spectrum(text: &str, t1: f64) -> Result<ModeSpectrum> {
    let mut freqs = Vec::new();
    let mut amps = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |m: String| Error::Parse { context: format!("line {}", n + 1), message: m };
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|x| x.parse::<f64>().map_err(|e| bad(e.to_string())))
            .collect::<Result<_>>()?;
        match v.as_slice() {
            [f, a] => {
                freqs.push(*f);
                amps.push(C64::new(*a, 0.0));
            }
            [f, re, im] => {
                freqs.push(*f);
                amps.push(C64::new(*re, *im));
            }
            _ => return Err(bad("expected `frequency amplitude` or `frequency re im`".into())),
        }
    }
    if freqs.len() < 2 {
        return Err(Error::validation("spectrum file lists fewer than 2 modes"));
    }
    let lo = freqs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = freqs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let center = 0.5 * (lo + hi);
    let gamma = if t1.is_finite() { 1.0 / t1 } else { 0.0 };
    ModeSpectrum::new(freqs.into_iter().map(|f| TAU * (f - center)).collect(), amps, gamma)
}

/// Two-column text table with a header line.
pub fn curve_table(header: &str, x: &[f64], y: &[f64]) -> String {
    let mut out = format!("# {header}\n");
    for (a, b) in x.iter().zip(y) {
        let _ = writeln!(out, "{a:.6e}\t{b:.9}");
    }
    out
}
