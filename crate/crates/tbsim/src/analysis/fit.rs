use std::f64::consts::{FRAC_PI_4, PI};

use nalgebra::{Matrix2, Matrix3, Vector3};
use serde::Serialize;

use super::AnalysisResult;
use crate::error::{Error, Result};
use crate::model::{wrap_angle, wrap_signed};

/// E(φ_w) measured at one fixed read phase.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepCurve {
    pub phi_r: f64,
    pub phi_w: Vec<f64>,
    pub e: Vec<f64>,
    /// Per-point standard deviations; empty for an unweighted fit.
    pub sigma: Vec<f64>,
}

/// E(φ) = offset − A·sin(φ − θ): θ is the zero crossing with negative slope.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SinusoidFit {
    pub offset: f64,
    pub amplitude: f64,
    pub amplitude_sigma: f64,
    pub zero_crossing: f64,
    pub zero_crossing_sigma: f64,
    pub residual_rms: f64,
    /// Coefficients of E = c + α·sin φ + β·cos φ.
    coeffs: [f64; 3],
}

impl SinusoidFit {
    pub fn eval(&self, phi: f64) -> f64 {
        self.coeffs[0] + self.coeffs[1] * phi.sin() + self.coeffs[2] * phi.cos()
    }
}

/// Linear least squares for E = c + α·sin φ + β·cos φ.
pub fn fit_sinusoid(curve: &SweepCurve) -> Result<SinusoidFit> {
    let n = curve.phi_w.len();
    if n < 6 || curve.e.len() != n {
        return Err(Error::validation(format!("sinusoid fit needs at least 6 (φ, E) points, got {n}")));
    }
    let weighted = curve.sigma.len() == n && curve.sigma.iter().all(|&s| s > 0.0);
    let mut xtx = Matrix3::zeros();
    let mut xty = Vector3::zeros();
    for i in 0..n {
        let x = Vector3::new(1.0, curve.phi_w[i].sin(), curve.phi_w[i].cos());
        let w = if weighted { curve.sigma[i].powi(-2) } else { 1.0 };
        xtx += w * x * x.transpose();
        xty += w * curve.e[i] * x;
    }
    let inv = xtx.try_inverse().ok_or_else(|| Error::Fit("phase points do not span a sinusoid".into()))?;
    let c = inv * xty;
    let ss: f64 = (0..n)
        .map(|i| (curve.e[i] - c[0] - c[1] * curve.phi_w[i].sin() - c[2] * curve.phi_w[i].cos()).powi(2))
        .sum();
    let rms = (ss / n as f64).sqrt();
    let cov = if weighted { inv } else { inv * (ss / (n - 3) as f64) };
    let (alpha, beta) = (c[1], c[2]);
    let amp = alpha.hypot(beta);
    if amp < 3.0 * rms {
        return Err(Error::Fit(format!("degenerate sinusoid: amplitude {amp:.3e} below 3σ of residuals ({rms:.3e})")));
    }
    let cab = Matrix2::new(cov[(1, 1)], cov[(1, 2)], cov[(2, 1)], cov[(2, 2)]);
    let grad_a = nalgebra::Vector2::new(alpha / amp, beta / amp);
    // θ = atan2(β, −α).
    let grad_t = nalgebra::Vector2::new(beta / (amp * amp), -alpha / (amp * amp));
    Ok(SinusoidFit {
        offset: c[0],
        amplitude: amp,
        amplitude_sigma: (grad_a.transpose() * cab * grad_a)[0].max(0.0).sqrt(),
        zero_crossing: wrap_angle(beta.atan2(-alpha)),
        zero_crossing_sigma: (grad_t.transpose() * cab * grad_t)[0].max(0.0).sqrt(),
        residual_rms: rms,
        coeffs: [c[0], alpha, beta],
    })
}

/// Result of the calibration sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseCalibration {
    pub phi_0: AnalysisResult,
    pub amplitude: AnalysisResult,
    /// (φ_w, φ_r) in the order w0r0, w1r0, w0r1, w1r1.
    pub settings: [(f64, f64); 4],
    /// Offsets of the chosen write phases from φ_0 − π/4 and φ_0 + π/4.
    pub epsilon: [f64; 2],
    /// S predicted by the fitted curves at the chosen settings.
    pub expected_s: f64,
    pub fits: [SinusoidFit; 2],
}

/// Fits both curves and picks the CHSH settings that maximize the fitted S.
///
/// φ_0 is the negative-slope zero crossing of the first curve, which is
/// taken at the reference read phase. The second read phase is used as
/// measured, not assumed to be exactly π/2 away.
pub fn fit_sinusoid_and_choose_phases(first: &SweepCurve, second: &SweepCurve) -> Result<PhaseCalibration> {
    let f0 = fit_sinusoid(first)?;
    let f1 = fit_sinusoid(second)?;
    let sum = [f0.coeffs[1] + f1.coeffs[1], f0.coeffs[2] + f1.coeffs[2], f0.coeffs[0] + f1.coeffs[0]];
    let diff = [f1.coeffs[1] - f0.coeffs[1], f1.coeffs[2] - f0.coeffs[2], f1.coeffs[0] - f0.coeffs[0]];
    // a·sin φ + b·cos φ peaks at atan2(a, b) with height hypot(a, b).
    let peak = |v: [f64; 3]| (v[0].atan2(v[1]), v[0].hypot(v[1]));
    let ((ws, hs), (wd, hd)) = (peak(sum), peak(diff));
    let plus = hs + sum[2] + hd + diff[2];
    let minus = hs - sum[2] + hd - diff[2];
    // Both branches give the same |S| when the offsets vanish; keep φ_0 ∓ π/4 then.
    let tie = 1e-12 * (plus.abs() + minus.abs());
    let (w0, w1) = if plus >= minus - tie { (ws, wd) } else { (ws + PI, wd + PI) };
    let (w0, w1) = (wrap_angle(w0), wrap_angle(w1));
    let phi_0 = f0.zero_crossing;
    let (r0, r1) = (first.phi_r, second.phi_r);
    let settings = [(w0, r0), (w1, r0), (w0, r1), (w1, r1)];
    let expected_s = (f0.eval(w0) - f0.eval(w1) + f1.eval(w0) + f1.eval(w1)).abs();
    let inputs: Vec<f64> = [first, second]
        .iter()
        .flat_map(|c| std::iter::once(c.phi_r).chain(c.phi_w.iter().copied()).chain(c.e.iter().copied()))
        .collect();
    Ok(PhaseCalibration {
        phi_0: AnalysisResult::new(phi_0, f0.zero_crossing_sigma, "phi0/sinusoid-zero-crossing", &inputs),
        amplitude: AnalysisResult::new(f0.amplitude, f0.amplitude_sigma, "V/fitted-amplitude", &inputs),
        settings,
        epsilon: [wrap_signed(w0 - (phi_0 - FRAC_PI_4)), wrap_signed(w1 - (phi_0 + FRAC_PI_4))],
        expected_s,
        fits: [f0, f1],
    })
}

/// Parses whitespace-separated `phi_r phi_w E [sigma]` rows (radians) into
/// one curve per read phase, in order of first appearance.
pub fn parse_sweep(text: &str) -> Result<Vec<SweepCurve>> {
    let mut curves: Vec<SweepCurve> = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse::<f64>).collect();
        let f = f.map_err(|e| Error::Parse { context: format!("sweep line {}", n + 1), message: e.to_string() })?;
        if !(3..=4).contains(&f.len()) {
            return Err(Error::Parse {
                context: format!("sweep line {}", n + 1),
                message: "expected `phi_r phi_w E [sigma]`".into(),
            });
        }
        let idx = match curves.iter().position(|c| c.phi_r == f[0]) {
            Some(i) => i,
            None => {
                curves.push(SweepCurve { phi_r: f[0], phi_w: vec![], e: vec![], sigma: vec![] });
                curves.len() - 1
            }
        };
        let c = &mut curves[idx];
        c.phi_w.push(f[1]);
        c.e.push(f[2]);
        if let Some(&s) = f.get(3) {
            c.sigma.push(s);
        }
    }
    for c in &curves {
        if !c.sigma.is_empty() && c.sigma.len() != c.e.len() {
            return Err(Error::Parse { context: "sweep".into(), message: "sigma column given on some rows only".into() });
        }
    }
    Ok(curves)
}

/// T1 from a pump-probe decay y(t) = a·e^{−t/T1}, using points with
/// t ≥ `window_start`.
///
/// Two points are inverted in closed form. Otherwise a is eliminated
/// analytically and the residual is minimized over the rate.
pub fn fit_exponential(t: &[f64], y: &[f64], window_start: f64) -> Result<AnalysisResult> {
    if t.len() != y.len() {
        return Err(Error::validation("time and value series differ in length"));
    }
    let (t, y): (Vec<f64>, Vec<f64>) = t.iter().zip(y).filter(|(&ti, _)| ti >= window_start).map(|(a, b)| (*a, *b)).unzip();
    let inputs: Vec<f64> = t.iter().chain(&y).copied().collect();
    let n = t.len();
    if n == 2 {
        if !(y[0] > 0.0 && y[1] > 0.0) || t[0] == t[1] {
            return Err(Error::Fit("two-point decay needs positive values at distinct times".into()));
        }
        let k = (y[0] / y[1]).ln() / (t[1] - t[0]);
        let r = AnalysisResult::new(1.0 / k, 0.0, "T1/two-point", &inputs);
        return Ok(if k > 0.0 { r } else { r.flagged("series does not decay") });
    }
    if n < 4 {
        return Err(Error::validation(format!("exponential fit needs at least 4 points after the window start, got {n}")));
    }
    let span = t.iter().cloned().fold(f64::MIN, f64::max) - t.iter().cloned().fold(f64::MAX, f64::min);
    if !(span > 0.0) {
        return Err(Error::Fit("all points at the same time".into()));
    }
    let amp = |k: f64| {
        let (num, den) = t.iter().zip(&y).fold((0.0, 0.0), |(a, b), (&ti, &yi)| {
            let e = (-k * ti).exp();
            (a + yi * e, b + e * e)
        });
        num / den
    };
    let ss = |k: f64| {
        let a = amp(k);
        t.iter().zip(&y).map(|(&ti, &yi)| (yi - a * (-k * ti).exp()).powi(2)).sum::<f64>()
    };
    // Scan log k, then golden-section refine around the best node.
    let (lo, hi) = ((1e-4 / span).ln(), (1e3 / span).ln());
    let grid: Vec<f64> = (0..=400).map(|i| lo + (hi - lo) * i as f64 / 400.0).collect();
    let best = (0..grid.len()).min_by(|&a, &b| ss(grid[a].exp()).total_cmp(&ss(grid[b].exp()))).unwrap();
    if best == 0 {
        return Ok(AnalysisResult::new(f64::INFINITY, f64::INFINITY, "T1/least-squares", &inputs)
            .flagged("no decay within the fit window; T1 unbounded"));
    }
    let (mut a, mut b) = (grid[best - 1], grid[(best + 1).min(grid.len() - 1)]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if ss(c.exp()) < ss(d.exp()) {
            b = d;
        } else {
            a = c;
        }
    }
    let k = (0.5 * (a + b)).exp();
    let a0 = amp(k);
    // Gauss–Newton covariance of (a, k).
    let (mut jtj, s2) = (Matrix2::zeros(), ss(k) / (n - 2) as f64);
    for &ti in &t {
        let e = (-k * ti).exp();
        let j = nalgebra::Vector2::new(e, -a0 * ti * e);
        jtj += j * j.transpose();
    }
    let cov = jtj.try_inverse().ok_or_else(|| Error::Fit("singular exponential fit".into()))? * s2;
    let sk = cov[(1, 1)].max(0.0).sqrt();
    if !k.is_finite() || best == grid.len() - 1 {
        return Err(Error::Fit("exponential fit did not converge".into()));
    }
    Ok(AnalysisResult::new(1.0 / k, sk / (k * k), "T1/least-squares", &inputs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn curve(phi_r: f64, amp: f64, phi_0: f64, points: usize) -> SweepCurve {
        let phi_w: Vec<f64> = (0..points).map(|i| 2.0 * PI * i as f64 / points as f64).collect();
        let e = phi_w.iter().map(|&w| -amp * (w - phi_r - phi_0).sin()).collect();
        SweepCurve { phi_r, phi_w, e, sigma: vec![] }
    }

    #[test]
    fn ideal_curves_give_textbook_settings() {
        let phi_0 = PI;
        let cal = fit_sinusoid_and_choose_phases(&curve(0.0, 1.0, phi_0, 24), &curve(PI / 2.0, 1.0, phi_0, 24)).unwrap();
        assert!((cal.phi_0.value - phi_0).abs() < 1e-12);
        assert!(cal.epsilon.iter().all(|e| e.abs() < 1e-12), "{:?}", cal.epsilon);
        assert!((cal.expected_s - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-12);
        assert_eq!(cal.settings[2].1, PI / 2.0);
    }

    #[test]
    fn flat_curve_is_degenerate() {
        let mut c = curve(0.0, 0.0, 0.0, 12);
        c.e.iter_mut().enumerate().for_each(|(i, e)| *e = if i % 2 == 0 { 0.01 } else { -0.01 });
        assert!(matches!(fit_sinusoid(&c), Err(Error::Fit(_))));
        assert!(fit_sinusoid(&curve(0.0, 1.0, 0.0, 5)).is_err());
    }

    #[test]
    fn noisy_phase_recovered_within_its_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let mut pulls = Vec::new();
        for _ in 0..200 {
            let mut c = curve(0.0, 0.6, 1.0, 24);
            c.e.iter_mut().for_each(|e| *e += noise.sample(&mut rng));
            let f = fit_sinusoid(&c).unwrap();
            pulls.push(wrap_signed(f.zero_crossing - 1.0) / f.zero_crossing_sigma);
        }
        let rms = (pulls.iter().map(|p| p * p).sum::<f64>() / pulls.len() as f64).sqrt();
        assert!((rms - 1.0).abs() < 0.15, "{rms}");
    }

    #[test]
    fn exponential_fits() {
        let t1 = 2.2e-6;
        let y2 = [(-1e-6f64 / t1).exp(), (-3e-6f64 / t1).exp()];
        let r = fit_exponential(&[1e-6, 3e-6], &y2, 0.0).unwrap();
        assert!((r.value - t1).abs() / t1 < 1e-12);
        let t: Vec<f64> = (0..40).map(|i| 0.25e-6 * i as f64).collect();
        let y: Vec<f64> = t.iter().map(|&x| 3.0 * (-x / t1).exp()).collect();
        let r = fit_exponential(&t, &y, 1e-6).unwrap();
        assert!((r.value - t1).abs() / t1 < 1e-9, "{}", r.value);
        let flat = vec![1.0; t.len()];
        let r = fit_exponential(&t, &flat, 1e-6).unwrap();
        assert!(r.value.is_infinite() && !r.flags.is_empty());
        assert!(fit_exponential(&t[..7], &y[..7], 1e-6).is_err());
    }

    #[test]
    fn sweep_text_groups_by_read_phase() {
        let text = "# phi_r phi_w E\n0 0 0.5\n0 1 0.4\n1.57 0 0.1 0.02\n";
        let c = parse_sweep(text).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].phi_w, vec![0.0, 1.0]);
        assert_eq!(c[1].sigma, vec![0.02]);
        assert!(parse_sweep("0 x 1").is_err());
    }
}
