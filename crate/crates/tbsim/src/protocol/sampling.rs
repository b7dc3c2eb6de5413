//! Monte Carlo trials drawn from the exact distributions.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;

use super::{channel, distribution_at_jitter, ProtocolParams, Window, CHANNELS, PATTERNS};
use crate::error::{Error, Result};
use crate::outcome::OutcomeDistribution;

const NODES: usize = 64;
const HALF: usize = NODES / 2;
const CHUNK: u64 = 1 << 15;

/// Number of trials that produced each click pattern.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternCounts {
    pub trials: u64,
    pub counts: Vec<u64>,
}

impl PatternCounts {
    pub fn zeros(trials: u64) -> Self {
        PatternCounts { trials, counts: vec![0; PATTERNS] }
    }

    /// Trials in which every channel of `mask` clicked.
    pub fn all_click(&self, mask: usize) -> u64 {
        self.counts.iter().enumerate().filter(|(s, _)| s & mask == mask).map(|(_, c)| c).sum()
    }

    /// Trials in which at least one channel of `mask` clicked.
    pub fn any_click(&self, mask: usize) -> u64 {
        self.counts.iter().enumerate().filter(|(s, _)| s & mask != 0).map(|(_, c)| c).sum()
    }
}

/// One trial with at least one click.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClickRecord {
    pub trial: u64,
    /// Bit `2·w + k` set when detector `k` clicked in window `w`.
    pub pattern: u16,
    pub delta_w: f64,
    pub delta_r: f64,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Pattern counts for `trials` independent trials, drawn as one multinomial
/// from the jitter-averaged distribution by sequential binomials.
pub fn sample_aggregate(dist: &OutcomeDistribution, trials: u64, seed: u64, stream: u64) -> PatternCounts {
    let mut rng = stream_rng(seed, stream);
    let probs: Vec<f64> = dist.probabilities().iter().map(|&p| p.max(0.0)).collect();
    let mut mass: f64 = probs.iter().sum();
    let mut left = trials;
    let mut out = PatternCounts::zeros(trials);
    for (i, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        let x = if i + 1 == probs.len() || p >= mass {
            left
        } else if p <= 0.0 {
            0
        } else {
            Binomial::new(left, (p / mass).min(1.0)).expect("valid binomial").sample(&mut rng)
        };
        out.counts[i] = x;
        left -= x;
        mass -= p;
    }
    out
}

/// Trigonometric interpolant of the distribution as a function of the summed
/// jitter, from 64 equally spaced exact evaluations.
#[derive(Clone, Debug)]
pub struct JitterInterpolator {
    /// Per pattern: a₀, a₁..a₃₁, a₃₂, b₁..b₃₁.
    coeffs: Vec<[f64; NODES]>,
}

impl JitterInterpolator {
    pub fn new(params: &ProtocolParams) -> Result<Self> {
        let samples: Vec<Vec<f64>> = (0..NODES)
            .into_par_iter()
            .map(|j| {
                let delta = TAU * j as f64 / NODES as f64;
                distribution_at_jitter(params, delta).map(|d| d.probabilities().to_vec())
            })
            .collect::<Result<_>>()?;
        let mut coeffs = vec![[0.0; NODES]; PATTERNS];
        for (p, c) in coeffs.iter_mut().enumerate() {
            for (j, s) in samples.iter().enumerate() {
                let f = s[p];
                let x = TAU * j as f64 / NODES as f64;
                c[0] += f / NODES as f64;
                for k in 1..HALF {
                    c[k] += 2.0 * f * (k as f64 * x).cos() / NODES as f64;
                    c[HALF + k] += 2.0 * f * (k as f64 * x).sin() / NODES as f64;
                }
                c[HALF] += f * if j % 2 == 0 { 1.0 } else { -1.0 } / NODES as f64;
            }
        }
        Ok(JitterInterpolator { coeffs })
    }

    fn basis(delta: f64) -> [f64; NODES] {
        let mut b = [0.0; NODES];
        b[0] = 1.0;
        for k in 1..HALF {
            let (s, c) = (k as f64 * delta).sin_cos();
            b[k] = c;
            b[HALF + k] = s;
        }
        b[HALF] = (HALF as f64 * delta).cos();
        b
    }

    fn eval_with(&self, pattern: usize, basis: &[f64; NODES]) -> f64 {
        self.coeffs[pattern].iter().zip(basis).map(|(a, b)| a * b).sum()
    }

    pub fn probability(&self, pattern: usize, delta: f64) -> f64 {
        self.eval_with(pattern, &Self::basis(delta))
    }

    /// Draws a pattern at summed jitter `delta` from a uniform variate `u`.
    fn draw(&self, delta: f64, u: f64) -> usize {
        let basis = Self::basis(delta);
        let mut acc = self.eval_with(0, &basis);
        if u < acc {
            return 0;
        }
        let mut last = 0;
        for s in 1..PATTERNS {
            let p = self.eval_with(s, &basis);
            if p <= 0.0 {
                continue;
            }
            last = s;
            acc += p;
            if u < acc {
                return s;
            }
        }
        last
    }
}

/// Trial-by-trial sampling with per-trial jitter. Trial `t` draws from its
/// own ChaCha stream, so the records do not depend on the thread count.
pub fn sample_per_trial(
    interp: &JitterInterpolator,
    params: &ProtocolParams,
    trials: u64,
    seed: u64,
    stream: u64,
) -> Vec<ClickRecord> {
    let (sw, sr) = params.jitter_sigma;
    let key = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let chunks: Vec<u64> = (0..trials.div_ceil(CHUNK)).collect();
    let parts: Vec<Vec<ClickRecord>> = chunks
        .into_par_iter()
        .map(|c| {
            let mut out = Vec::new();
            for trial in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                let mut rng = stream_rng(key, trial);
                let dw: f64 = sw * rng.sample::<f64, _>(StandardNormal);
                let dr: f64 = sr * rng.sample::<f64, _>(StandardNormal);
                let u: f64 = rng.random();
                let pattern = interp.draw(dw + dr, u);
                if pattern != 0 {
                    out.push(ClickRecord { trial, pattern: pattern as u16, delta_w: dw, delta_r: dr });
                }
            }
            out
        })
        .collect();
    parts.into_iter().flatten().collect()
}

pub fn counts_from_records(records: &[ClickRecord], trials: u64) -> PatternCounts {
    let mut out = PatternCounts::zeros(trials);
    for r in records {
        out.counts[r.pattern as usize] += 1;
    }
    out.counts[0] = trials - records.len() as u64;
    out
}

/// Columnar text: one `trial window detector delta_w delta_r` row per click.
pub fn click_records_table(records: &[ClickRecord]) -> String {
    let mut out = String::from("# trial\twindow\tdetector\tdelta_w\tdelta_r\n");
    for r in records {
        for w in Window::ALL {
            for k in 0..2 {
                if r.pattern & (1 << channel(w, k)) != 0 {
                    let _ = writeln!(out, "{}\t{}\t{}\t{:.9}\t{:.9}", r.trial, w.label(), k + 1, r.delta_w, r.delta_r);
                }
            }
        }
    }
    out
}

pub fn parse_click_records(text: &str) -> Result<Vec<ClickRecord>> {
    let mut out: Vec<ClickRecord> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |m: &str| Error::Parse { context: format!("click records line {}", n + 1), message: m.to_string() };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(bad("expected 5 columns"));
        }
        let trial: u64 = f[0].parse().map_err(|_| bad("bad trial index"))?;
        let w = Window::parse(f[1]).ok_or_else(|| bad("unknown window"))?;
        let k: usize = f[2].parse().map_err(|_| bad("bad detector"))?;
        if !(1..=2).contains(&k) {
            return Err(bad("detector must be 1 or 2"));
        }
        let dw: f64 = f[3].parse().map_err(|_| bad("bad delta_w"))?;
        let dr: f64 = f[4].parse().map_err(|_| bad("bad delta_r"))?;
        let bit = 1u16 << channel(w, k - 1);
        match out.last_mut() {
            Some(last) if last.trial == trial => last.pattern |= bit,
            _ => out.push(ClickRecord { trial, pattern: bit, delta_w: dw, delta_r: dr }),
        }
    }
    debug_assert!(CHANNELS <= 16);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EngineKind, PhaseSettings, ThermalSchedule};

    fn params() -> ProtocolParams {
        let mut p = ProtocolParams::noiseless(0.01, 0.02, PhaseSettings::new(0.3, 0.0, 0.1), EngineKind::Gaussian);
        p.thermal = ThermalSchedule::new([0.02, 0.04, 0.06, 0.09]);
        p.chain.efficiency = [0.4, 0.6];
        p.jitter_sigma = (0.19, 0.07);
        p
    }

    #[test]
    fn interpolation_matches_direct_evaluation() {
        let p = params();
        let interp = JitterInterpolator::new(&p).unwrap();
        for &delta in &[0.013, 0.71, -1.3, 2.9] {
            let direct = distribution_at_jitter(&p, delta).unwrap();
            for s in 0..PATTERNS {
                let err = (interp.probability(s, delta) - direct.probability(s)).abs();
                assert!(err < 1e-13, "{s} {err}");
            }
        }
    }

    #[test]
    fn aggregate_counts_sum_to_trials() {
        let dist = super::super::exact_distribution(&params()).unwrap();
        let c = sample_aggregate(&dist, 1_000_000, 7, 0);
        assert_eq!(c.counts.iter().sum::<u64>(), 1_000_000);
        let again = sample_aggregate(&dist, 1_000_000, 7, 0);
        assert_eq!(c, again);
    }

    #[test]
    fn records_round_trip_through_text() {
        let p = params();
        let interp = JitterInterpolator::new(&p).unwrap();
        let recs = sample_per_trial(&interp, &p, 20_000, 3, 1);
        assert!(!recs.is_empty());
        let text = click_records_table(&recs);
        let back = parse_click_records(&text).unwrap();
        assert_eq!(back.len(), recs.len());
        for (a, b) in recs.iter().zip(&back) {
            assert_eq!(a.trial, b.trial);
            assert_eq!(a.pattern, b.pattern);
            assert!((a.delta_w - b.delta_w).abs() < 1e-9);
        }
    }

    #[test]
    fn per_trial_frequencies_match_exact() {
        let p = params();
        let interp = JitterInterpolator::new(&p).unwrap();
        let trials = 1_000_000;
        let recs = sample_per_trial(&interp, &p, trials, 11, 0);
        let counts = counts_from_records(&recs, trials);
        let exact = super::super::exact_distribution(&p).unwrap();
        for w in Window::ALL {
            for k in 0..2 {
                let m = 1 << channel(w, k);
                let prob = exact.all_click(m);
                let n = counts.all_click(m) as f64;
                let sd = (trials as f64 * prob * (1.0 - prob)).sqrt();
                assert!((n - trials as f64 * prob).abs() < 4.0 * sd + 1.0, "{w:?} {k} {n} {prob}");
            }
        }
    }
}
