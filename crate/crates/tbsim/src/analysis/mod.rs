//! Estimators with one-standard-deviation uncertainties.
//!
//! Counting errors are Poisson for singles and coincidences and multinomial
//! for correlation coefficients. Derived quantities use first-order
//! propagation; [`bootstrap_counts`] resamples instead.

mod fit;

pub use fit::{
    fit_exponential, fit_sinusoid, fit_sinusoid_and_choose_phases, parse_sweep, PhaseCalibration, SinusoidFit,
    SweepCurve,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::outcome::OutcomeDistribution;
use crate::protocol::{channel_mask, window_mask, PatternCounts, Window};

/// An estimate with its standard deviation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnalysisResult {
    pub value: f64,
    pub sigma: f64,
    pub method: String,
    /// SHA-256 of the numeric inputs.
    pub inputs_digest: String,
    /// Conditions a reader should know about, such as an unbounded fit.
    pub flags: Vec<String>,
}

impl AnalysisResult {
    pub fn new(value: f64, sigma: f64, method: &str, inputs: &[f64]) -> Self {
        AnalysisResult {
            value,
            sigma: sigma.abs(),
            method: method.to_string(),
            inputs_digest: digest(inputs),
            flags: Vec::new(),
        }
    }

    fn flagged(mut self, flag: impl Into<String>) -> Self {
        self.flags.push(flag.into());
        self
    }

    /// Distance of the value below `bound`, in standard deviations.
    pub fn sigmas_below(&self, bound: f64) -> f64 {
        (bound - self.value) / self.sigma
    }
}

/// Hex SHA-256 of the little-endian bytes of `inputs`.
pub fn digest(inputs: &[f64]) -> String {
    let mut h = Sha256::new();
    for x in inputs {
        h.update(x.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Coincidences between one write window and one read window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoincidenceTable {
    /// `n[k][l]`: write detector k and read detector l both clicked.
    pub n: [[f64; 2]; 2],
    pub write_singles: [f64; 2],
    pub read_singles: [f64; 2],
    pub trials: f64,
}

impl CoincidenceTable {
    fn build(all: impl Fn(usize) -> f64, write: Window, read: Window, trials: f64) -> Result<Self> {
        if !write.is_write() || read.is_write() {
            return Err(Error::validation("coincidence table needs a write window and a read window"));
        }
        let mut n = [[0.0; 2]; 2];
        for (k, row) in n.iter_mut().enumerate() {
            for (l, x) in row.iter_mut().enumerate() {
                *x = all(channel_mask(write, k) | channel_mask(read, l));
            }
        }
        Ok(CoincidenceTable {
            n,
            write_singles: [all(channel_mask(write, 0)), all(channel_mask(write, 1))],
            read_singles: [all(channel_mask(read, 0)), all(channel_mask(read, 1))],
            trials,
        })
    }

    pub fn from_counts(counts: &PatternCounts, write: Window, read: Window) -> Result<Self> {
        Self::build(|m| counts.all_click(m) as f64, write, read, counts.trials as f64)
    }

    /// Expected counts of `trials` trials drawn from `dist`.
    pub fn from_distribution(dist: &OutcomeDistribution, trials: f64, write: Window, read: Window) -> Result<Self> {
        Self::build(|m| trials * dist.all_click(m), write, read, trials)
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.n.iter().flatten().chain(&self.write_singles).chain(&self.read_singles);
        if all.clone().any(|&x| !(x >= 0.0)) || !(self.trials > 0.0) {
            return Err(Error::validation("coincidence counts must be non-negative and trials positive"));
        }
        for k in 0..2 {
            for l in 0..2 {
                if self.n[k][l] > self.write_singles[k].min(self.read_singles[l]) * (1.0 + 1e-12) {
                    return Err(Error::validation("coincidences exceed the singles they are drawn from"));
                }
            }
        }
        Ok(())
    }
}

/// Normalized cross-correlation N_c·N / (N_w·N_r).
pub fn g2_cross(write_singles: f64, read_singles: f64, coincidences: f64, trials: f64) -> Result<AnalysisResult> {
    if !(trials > 0.0) {
        return Err(Error::validation("trials must be positive"));
    }
    if !(write_singles > 0.0 && read_singles > 0.0) {
        return Err(Error::Undefined("g² with zero singles".into()));
    }
    let g = coincidences * trials / (write_singles * read_singles);
    let inputs = [write_singles, read_singles, coincidences, trials];
    let sigma = if coincidences > 0.0 {
        g * (1.0 / coincidences + 1.0 / write_singles + 1.0 / read_singles).sqrt()
    } else {
        trials / (write_singles * read_singles)
    };
    let r = AnalysisResult::new(g, sigma, "g2-cross/poisson", &inputs);
    Ok(if coincidences == 0.0 { r.flagged("no coincidences; sigma is the one-count level") } else { r })
}

/// g² between "either detector clicked in window `w`" and the same for `r`.
pub fn g2_between_windows(counts: &PatternCounts, w: Window, r: Window) -> Result<AnalysisResult> {
    let (mw, mr) = (window_mask(w), window_mask(r));
    let nw = counts.any_click(mw) as f64;
    let nr = counts.any_click(mr) as f64;
    let both = counts
        .counts
        .iter()
        .enumerate()
        .filter(|(s, _)| s & mw != 0 && s & mr != 0)
        .map(|(_, &c)| c as f64)
        .sum();
    g2_cross(nw, nr, both, counts.trials as f64)
}

/// Infinite-trial limit of [`g2_between_windows`].
pub fn g2_between_windows_exact(dist: &OutcomeDistribution, w: Window, r: Window) -> f64 {
    let (mw, mr) = (window_mask(w), window_mask(r));
    let pw = 1.0 - dist.none_click(mw);
    let pr = 1.0 - dist.none_click(mr);
    let both = 1.0 - dist.none_click(mw) - dist.none_click(mr) + dist.none_click(mw | mr);
    both / (pw * pr)
}

/// E = (n11 + n22 − n12 − n21)/(n11 + n22 + n12 + n21).
pub fn correlation_e(table: &CoincidenceTable) -> Result<AnalysisResult> {
    let [[n11, n12], [n21, n22]] = table.n;
    let total = n11 + n12 + n21 + n22;
    if !(total > 0.0) {
        return Err(Error::Undefined("correlation coefficient with no coincidences".into()));
    }
    let e = (n11 + n22 - n12 - n21) / total;
    let sigma = ((1.0 - e * e) / total).sqrt();
    Ok(AnalysisResult::new(e, sigma, "E/multinomial", &[n11, n12, n21, n22]))
}

/// S = |E(w0,r0) − E(w1,r0) + E(w0,r1) + E(w1,r1)|, inputs in that order.
pub fn chsh_s(e: &[AnalysisResult; 4]) -> AnalysisResult {
    let s = (e[0].value - e[1].value + e[2].value + e[3].value).abs();
    let sigma = e.iter().map(|x| x.sigma * x.sigma).sum::<f64>().sqrt();
    let inputs: Vec<f64> = e.iter().map(|x| x.value).collect();
    AnalysisResult::new(s, sigma, "S/chsh", &inputs)
}

/// V = max |E| over the measured points.
pub fn visibility_max(e: &[AnalysisResult]) -> Result<AnalysisResult> {
    let best = e
        .iter()
        .max_by(|a, b| a.value.abs().total_cmp(&b.value.abs()))
        .ok_or_else(|| Error::Undefined("visibility of an empty sweep".into()))?;
    let inputs: Vec<f64> = e.iter().map(|x| x.value).collect();
    Ok(AnalysisResult::new(best.value.abs(), best.sigma, "V/max-abs-E", &inputs))
}

/// V as the fitted amplitude of a sinusoid through the sweep.
pub fn visibility_fitted(curve: &SweepCurve) -> Result<AnalysisResult> {
    let f = fit_sinusoid(curve)?;
    let inputs: Vec<f64> = curve.phi_w.iter().chain(&curve.e).copied().collect();
    Ok(AnalysisResult::new(f.amplitude, f.amplitude_sigma, "V/fitted-amplitude", &inputs))
}

/// Witness R = (1 − V)(1 + ḡ)/2 with ḡ the mean of g²_EE and g²_LL.
/// Classical sources satisfy R ≥ 1.
pub fn witness_r(v: &AnalysisResult, g2_ee: &AnalysisResult, g2_ll: &AnalysisResult) -> Result<AnalysisResult> {
    if !(0.0..=1.0).contains(&v.value) || !(g2_ee.value > 0.0 && g2_ll.value > 0.0) {
        return Err(Error::validation("witness needs V in [0, 1] and positive g² values"));
    }
    let g = 0.5 * (g2_ee.value + g2_ll.value);
    let sg = 0.5 * g2_ee.sigma.hypot(g2_ll.sigma);
    let r = (1.0 - v.value) * (1.0 + g) / 2.0;
    let sigma = (0.5 * (1.0 + g) * v.sigma).hypot(0.5 * (1.0 - v.value) * sg);
    Ok(AnalysisResult::new(r, sigma, "R/(1-V)(1+g)/2", &[v.value, g2_ee.value, g2_ll.value]))
}

/// True when R lies below 1 by at least `k` standard deviations.
pub fn witnesses_entanglement(r: &AnalysisResult, k: f64) -> bool {
    r.value + k * r.sigma < 1.0
}

/// Thermal occupancy n = Γ_AS/(Γ_S − Γ_AS) from Stokes and anti-Stokes
/// click counts at equal pulse energy.
pub fn nth_from_asymmetry(stokes: f64, anti_stokes: f64) -> Result<AnalysisResult> {
    if !(anti_stokes >= 0.0) || !(stokes > anti_stokes) {
        return Err(Error::Undefined(format!(
            "non-physical sideband asymmetry: Stokes {stokes}, anti-Stokes {anti_stokes}"
        )));
    }
    let d = stokes - anti_stokes;
    let n = anti_stokes / d;
    // Poisson counts: ∂n/∂AS = S/d², ∂n/∂S = −AS/d².
    let sigma = ((stokes / (d * d)).powi(2) * anti_stokes + (anti_stokes / (d * d)).powi(2) * stokes).sqrt();
    Ok(AnalysisResult::new(n, sigma, "nth/sideband-asymmetry", &[stokes, anti_stokes]))
}

/// Bootstrap standard deviation of `stat` under multinomial resampling of
/// `counts` with their total held fixed.
pub fn bootstrap_counts(
    counts: &[f64],
    resamples: usize,
    seed: u64,
    stat: impl Fn(&[f64]) -> f64,
) -> Result<AnalysisResult> {
    let total: f64 = counts.iter().sum();
    if !(total >= 1.0) || counts.len() < 2 {
        return Err(Error::Undefined("bootstrap of an empty table".into()));
    }
    let n = total.round() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<f64> = (0..resamples)
        .map(|_| {
            // Multinomial by sequential binomials.
            let (mut left, mut mass) = (n, total);
            let x: Vec<f64> = counts
                .iter()
                .map(|&c| {
                    let k = if left == 0 || c <= 0.0 {
                        0
                    } else if c >= mass {
                        left
                    } else {
                        Binomial::new(left, c / mass).expect("valid binomial").sample(&mut rng)
                    };
                    left -= k;
                    mass -= c;
                    k as f64
                })
                .collect();
            stat(&x)
        })
        .filter(|v| v.is_finite())
        .collect();
    if draws.len() < 2 {
        return Err(Error::Undefined("bootstrap statistic undefined on every resample".into()));
    }
    let m = draws.iter().sum::<f64>() / draws.len() as f64;
    let var = draws.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
    Ok(AnalysisResult::new(stat(counts), var.sqrt(), "bootstrap", counts))
}

/// Bootstrap cross-check of [`correlation_e`] with 1000 resamples.
pub fn correlation_e_bootstrap(table: &CoincidenceTable, seed: u64) -> Result<AnalysisResult> {
    let [[a, b], [c, d]] = table.n;
    let mut r = bootstrap_counts(&[a, b, c, d], 1000, seed, |x| (x[0] + x[3] - x[1] - x[2]) / x.iter().sum::<f64>())?;
    r.method = "E/bootstrap".into();
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(v: f64, s: f64) -> AnalysisResult {
        AnalysisResult::new(v, s, "given", &[v])
    }

    fn table(n11: f64, n12: f64, n21: f64, n22: f64) -> CoincidenceTable {
        CoincidenceTable { n: [[n11, n12], [n21, n22]], write_singles: [1e3; 2], read_singles: [1e3; 2], trials: 1e6 }
    }

    #[test]
    fn uncorrelated_singles_give_unity() {
        let g = g2_cross(1000.0, 1000.0, 1.0, 1e6).unwrap();
        assert!((g.value - 1.0).abs() < 1e-12);
        assert!(g2_cross(0.0, 5.0, 0.0, 10.0).is_err());
    }

    #[test]
    fn correlation_limits() {
        let e = correlation_e(&table(50.0, 0.0, 0.0, 50.0)).unwrap();
        assert_eq!(e.value, 1.0);
        let e = correlation_e(&table(25.0, 25.0, 25.0, 25.0)).unwrap();
        assert_eq!(e.value, 0.0);
        assert!((e.sigma - 0.1).abs() < 1e-12);
        assert!(correlation_e(&table(0.0, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn chsh_reference_points() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let s = chsh_s(&[r(h, 0.0), r(-h, 0.0), r(h, 0.0), r(h, 0.0)]);
        assert!((s.value - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-12);
        let s = chsh_s(&[r(0.5, 0.0), r(0.5, 0.0), r(0.5, 0.0), r(0.5, 0.0)]);
        assert!((s.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn witness_reference_values() {
        let w = witness_r(&r(0.82, 0.04), &r(9.4, 1.3), &r(5.0, 0.8)).unwrap();
        assert!((w.value - 0.738).abs() < 1e-12);
        let w = witness_r(&r(0.0, 0.0), &r(3.0, 0.0), &r(5.0, 0.0)).unwrap();
        assert!((w.value - 2.5).abs() < 1e-12);
        let w = witness_r(&r(1.0, 0.0), &r(1.0, 0.0), &r(1.0, 0.0)).unwrap();
        assert_eq!(w.value, 0.0);
    }

    #[test]
    fn occupancy_from_asymmetry() {
        let n = nth_from_asymmetry(1e6, 0.0476 * 1e6).unwrap();
        assert!((n.value - 0.05).abs() < 1e-4, "{}", n.value);
        assert_eq!(nth_from_asymmetry(1e4, 0.0).unwrap().value, 0.0);
        assert!(nth_from_asymmetry(10.0, 10.0).is_err());
    }

    #[test]
    fn bootstrap_matches_multinomial_sigma() {
        let t = table(400.0, 100.0, 120.0, 380.0);
        let a = correlation_e(&t).unwrap();
        let b = correlation_e_bootstrap(&t, 5).unwrap();
        assert!((a.sigma - b.sigma).abs() / a.sigma < 0.1, "{} {}", a.sigma, b.sigma);
    }

    #[test]
    fn digest_depends_on_inputs() {
        assert_ne!(digest(&[1.0, 2.0]), digest(&[2.0, 1.0]));
        assert_eq!(digest(&[0.5]).len(), 64);
    }

    proptest! {
        #[test]
        fn correlation_is_bounded(a in 0u32..1000, b in 0u32..1000, c in 0u32..1000, d in 1u32..1000) {
            let e = correlation_e(&table(a as f64, b as f64, c as f64, d as f64)).unwrap();
            prop_assert!(e.value.abs() <= 1.0);
        }

        #[test]
        fn chsh_never_exceeds_four(e in proptest::array::uniform4(-1.0f64..=1.0)) {
            let s = chsh_s(&[r(e[0], 0.0), r(e[1], 0.0), r(e[2], 0.0), r(e[3], 0.0)]);
            prop_assert!(s.value <= 4.0);
        }

        #[test]
        fn independent_poisson_streams_are_uncorrelated(pw in 0.01f64..0.2, pr in 0.01f64..0.2, seed in 0u64..1000) {
            use rand_distr::Binomial;
            let n = 200_000u64;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = Binomial::new(n, pw).unwrap().sample(&mut rng);
            // Given w write clicks, independent read clicks fall on them binomially.
            let both = Binomial::new(w, pr).unwrap().sample(&mut rng);
            let rest = Binomial::new(n - w, pr).unwrap().sample(&mut rng);
            let g = g2_cross(w as f64, (both + rest) as f64, both as f64, n as f64).unwrap();
            prop_assert!((g.value - 1.0).abs() < 4.0 * g.sigma, "{} ± {}", g.value, g.sigma);
        }
    }
}
