//! Truncated Fock-space density-matrix engine.
//!
//! Each mode holds 0..=N quanta. Basis states are mixed-radix integers with
//! the first registered mode as the most significant digit. Operations take
//! the state by value and return the evolved state.

mod functor;

use std::fmt::Write as _;

use nalgebra::DMatrix;

pub use functor::{second_quantize, two_mode_squeezer};
use functor::digits;

use crate::error::{Error, Result};
use crate::linalg::{binomial, min_eigenvalue, CMatrix, C64};
use crate::outcome::OutcomeDistribution;

/// A threshold detector watching one or more modes with a common efficiency.
#[derive(Clone, Debug, PartialEq)]
pub struct Detector {
    pub label: String,
    pub modes: Vec<String>,
    pub efficiency: f64,
}

impl Detector {
    pub fn new(label: impl Into<String>, modes: &[&str], efficiency: f64) -> Self {
        Detector {
            label: label.into(),
            modes: modes.iter().map(|m| m.to_string()).collect(),
            efficiency,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FockState {
    modes: Vec<String>,
    cutoff: usize,
    rho: CMatrix,
}

const ZERO: C64 = C64::new(0.0, 0.0);

impl FockState {
    pub fn vacuum<S: AsRef<str>>(modes: &[S], cutoff: usize) -> Self {
        assert!(cutoff >= 1, "truncation must be at least 1");
        let m = modes.len();
        let dim = (cutoff + 1).pow(m as u32);
        let mut rho = CMatrix::zeros(dim, dim);
        rho[(0, 0)] = C64::new(1.0, 0.0);
        FockState { modes: modes.iter().map(|s| s.as_ref().to_string()).collect(), cutoff, rho }
    }

    /// Single-mode thermal state, renormalized over 0..=N.
    pub fn thermal(mode: &str, nbar: f64, cutoff: usize) -> Self {
        assert!(nbar >= 0.0);
        let d = cutoff + 1;
        let x = nbar / (nbar + 1.0);
        let w: Vec<f64> = (0..d).map(|n| x.powi(n as i32)).collect();
        let z: f64 = w.iter().sum();
        let rho = CMatrix::from_fn(d, d, |i, j| if i == j { C64::new(w[i] / z, 0.0) } else { ZERO });
        FockState { modes: vec![mode.to_string()], cutoff, rho }
    }

    /// Tensor product; `other`'s modes are appended.
    pub fn tensor(&self, other: &FockState) -> Result<Self> {
        if self.cutoff != other.cutoff {
            return Err(Error::numerical("tensor product of states with different truncation"));
        }
        if other.modes.iter().any(|m| self.modes.contains(m)) {
            return Err(Error::numerical("tensor product with duplicate mode labels"));
        }
        let rho = self.rho.kronecker(&other.rho);
        let mut modes = self.modes.clone();
        modes.extend(other.modes.iter().cloned());
        Ok(FockState { modes, cutoff: self.cutoff, rho })
    }

    pub fn from_density_matrix<S: AsRef<str>>(modes: &[S], cutoff: usize, rho: CMatrix) -> Result<Self> {
        let dim = (cutoff + 1).pow(modes.len() as u32);
        if rho.nrows() != dim || rho.ncols() != dim {
            return Err(Error::numerical(format!("density matrix must be {dim}×{dim}")));
        }
        Ok(FockState { modes: modes.iter().map(|s| s.as_ref().to_string()).collect(), cutoff, rho })
    }

    pub fn modes(&self) -> &[String] {
        &self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn rho(&self) -> &CMatrix {
        &self.rho
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    /// Probability mass lost to truncation, 1 − tr ρ.
    pub fn truncation_deficit(&self) -> f64 {
        1.0 - self.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.rho - self.rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.rho)
    }

    pub fn mode_index(&self, label: &str) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| m == label)
            .ok_or_else(|| Error::UnknownMode(label.to_string()))
    }

    fn stride(&self, site: usize) -> usize {
        (self.cutoff + 1).pow((self.modes.len() - 1 - site) as u32)
    }

    /// Offsets of every local basis state and base indices of every
    /// configuration of the remaining modes.
    fn layout(&self, sites: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let d = self.cutoff + 1;
        let k = sites.len();
        let local: Vec<usize> = (0..d.pow(k as u32))
            .map(|l| {
                digits(l, k, d)
                    .iter()
                    .zip(sites)
                    .map(|(&n, &s)| n * self.stride(s))
                    .sum()
            })
            .collect();
        let strides: Vec<usize> = sites.iter().map(|&s| self.stride(s)).collect();
        let base: Vec<usize> = (0..self.dim())
            .filter(|&i| strides.iter().all(|&st| (i / st) % d == 0))
            .collect();
        (local, base)
    }

    /// (A ⊗ I)·m for a local operator A on `sites`.
    fn left_apply(&self, sites: &[usize], a: &CMatrix, m: &CMatrix) -> CMatrix {
        let (local, base) = self.layout(sites);
        let dim = m.nrows();
        let ncols = m.ncols();
        let ld = local.len();
        let mut out = CMatrix::zeros(dim, ncols);
        let src = m.as_slice();
        let dst = out.as_mut_slice();
        let mut v = vec![ZERO; ld];
        for c in 0..ncols {
            let col = &src[c * dim..(c + 1) * dim];
            for &b in &base {
                let mut any = false;
                for (l, &off) in local.iter().enumerate() {
                    v[l] = col[b + off];
                    any |= v[l] != ZERO;
                }
                if !any {
                    continue;
                }
                for (lp, &off) in local.iter().enumerate() {
                    let mut acc = ZERO;
                    for l in 0..ld {
                        acc += a[(lp, l)] * v[l];
                    }
                    dst[c * dim + b + off] = acc;
                }
            }
        }
        out
    }

    /// ρ → UρU† for a local operator U on the named modes.
    pub fn apply_local(self, modes: &[&str], u: &CMatrix) -> Result<Self> {
        let sites: Vec<usize> = modes.iter().map(|m| self.mode_index(m)).collect::<Result<_>>()?;
        let ld = (self.cutoff + 1).pow(sites.len() as u32);
        if u.nrows() != ld || u.ncols() != ld {
            return Err(Error::numerical("local operator has the wrong dimension"));
        }
        let x = self.left_apply(&sites, u, &self.rho);
        let rho = self.left_apply(&sites, u, &x.adjoint());
        Ok(FockState { rho, ..self })
    }

    /// Applies a single-mode channel given by Kraus operators.
    pub fn apply_kraus(self, mode: &str, kraus: &[CMatrix]) -> Result<Self> {
        let site = self.mode_index(mode)?;
        let d = self.cutoff + 1;
        // Superoperator on the (row digit, column digit) pair of the mode.
        let mut sup = CMatrix::zeros(d * d, d * d);
        for a in kraus {
            for ip in 0..d {
                for jp in 0..d {
                    for i in 0..d {
                        let aii = a[(ip, i)];
                        if aii == ZERO {
                            continue;
                        }
                        for j in 0..d {
                            sup[(ip * d + jp, i * d + j)] += aii * a[(jp, j)].conj();
                        }
                    }
                }
            }
        }
        let nz: Vec<Vec<(usize, C64)>> = (0..d * d)
            .map(|r| (0..d * d).filter(|&c| sup[(r, c)] != ZERO).map(|c| (c, sup[(r, c)])).collect())
            .collect();
        let stride = self.stride(site);
        let dim = self.dim();
        let base: Vec<usize> = (0..dim).filter(|&i| (i / stride) % d == 0).collect();
        let src = self.rho.as_slice();
        let mut out = CMatrix::zeros(dim, dim);
        let dst = out.as_mut_slice();
        let mut blk = vec![ZERO; d * d];
        for &bs in &base {
            for &br in &base {
                let mut any = false;
                for i in 0..d {
                    for j in 0..d {
                        let v = src[(bs + j * stride) * dim + br + i * stride];
                        blk[i * d + j] = v;
                        any |= v != ZERO;
                    }
                }
                if !any {
                    continue;
                }
                for ip in 0..d {
                    for jp in 0..d {
                        let acc: C64 = nz[ip * d + jp].iter().map(|&(c, s)| s * blk[c]).sum();
                        dst[(bs + jp * stride) * dim + br + ip * stride] = acc;
                    }
                }
            }
        }
        Ok(FockState { rho: out, ..self })
    }

    /// Two-mode squeezing with tanh²r = p; on vacuum the amplitude of |n,n⟩ is
    /// √(1−p)·p^{n/2}·e^{inφ}.
    pub fn apply_two_mode_squeeze(self, a: &str, b: &str, p: f64, phase: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::validation(format!("squeezing probability {p} outside [0, 1)")));
        }
        if p == 0.0 {
            self.mode_index(a)?;
            self.mode_index(b)?;
            return Ok(self);
        }
        let s = two_mode_squeezer(p, phase, self.cutoff);
        self.apply_local(&[a, b], &s)
    }

    /// Beam splitter a′ = cosθ·a + e^{iφ}sinθ·b, b′ = −e^{−iφ}sinθ·a + cosθ·b
    /// with cos²θ = `transmissivity`.
    pub fn apply_beam_splitter(self, a: &str, b: &str, transmissivity: f64, phase: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&transmissivity) {
            return Err(Error::validation(format!("transmissivity {transmissivity} outside [0, 1]")));
        }
        let m = beam_splitter_matrix(transmissivity, phase);
        let g = second_quantize(&m, self.cutoff);
        self.apply_local(&[a, b], &g)
    }

    /// |n⟩ → e^{inφ}|n⟩ on one mode.
    pub fn apply_phase(mut self, mode: &str, phase: f64) -> Result<Self> {
        let site = self.mode_index(mode)?;
        let d = self.cutoff + 1;
        let stride = self.stride(site);
        let dim = self.dim();
        let ph: Vec<C64> = (0..dim).map(|i| C64::from_polar(1.0, phase * ((i / stride) % d) as f64)).collect();
        for c in 0..dim {
            for r in 0..dim {
                self.rho[(r, c)] *= ph[r] * ph[c].conj();
            }
        }
        Ok(self)
    }

    /// Pure loss with survival η.
    pub fn apply_loss(self, mode: &str, survival: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&survival) {
            return Err(Error::validation(format!("survival {survival} outside [0, 1]")));
        }
        if survival == 1.0 {
            self.mode_index(mode)?;
            return Ok(self);
        }
        let k = loss_kraus(survival, self.cutoff);
        self.apply_kraus(mode, &k)
    }

    /// Phase-insensitive thermal-loss channel: σ → ησ + (1−η)(n_env + ½).
    ///
    /// Built as a quantum-limited amplifier of gain G = 1 + (1−η)n_env after a
    /// loss of η/G. Amplifier outputs above the truncation are dropped and
    /// show up in [`FockState::truncation_deficit`].
    pub fn apply_thermal_loss(self, mode: &str, survival: f64, n_env: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&survival) || !(n_env >= 0.0) {
            return Err(Error::validation("thermal loss needs survival in [0, 1] and n_env ≥ 0"));
        }
        let gain = 1.0 + (1.0 - survival) * n_env;
        let s = self.apply_loss(mode, survival / gain)?;
        if gain == 1.0 {
            return Ok(s);
        }
        let k = amplifier_kraus(gain, s.cutoff);
        s.apply_kraus(mode, &k)
    }

    /// Adds Δn thermal quanta through a thermal-loss channel with coupling ε.
    pub fn apply_thermal_noise(self, mode: &str, added: f64, epsilon: f64) -> Result<Self> {
        if !(added >= 0.0) {
            return Err(Error::validation(format!("added occupancy {added} is negative")));
        }
        if added == 0.0 {
            self.mode_index(mode)?;
            return Ok(self);
        }
        self.apply_thermal_loss(mode, 1.0 - epsilon, added / epsilon)
    }

    /// Mean occupation of a mode.
    pub fn mean_number(&self, mode: &str) -> Result<f64> {
        let site = self.mode_index(mode)?;
        let d = self.cutoff + 1;
        let stride = self.stride(site);
        Ok((0..self.dim()).map(|i| ((i / stride) % d) as f64 * self.rho[(i, i)].re).sum())
    }

    /// Tr_sites[(E ⊗ I)ρ] for a local operator E; unnormalized.
    pub fn partial_expectation(&self, modes: &[&str], e: &CMatrix) -> Result<Self> {
        let sites: Vec<usize> = modes.iter().map(|m| self.mode_index(m)).collect::<Result<_>>()?;
        let (local, _) = self.layout(&sites);
        let keep: Vec<usize> = (0..self.modes.len()).filter(|s| !sites.contains(s)).collect();
        let d = self.cutoff + 1;
        let kd = d.pow(keep.len() as u32);
        let keep_off: Vec<usize> = (0..kd)
            .map(|r| digits(r, keep.len(), d).iter().zip(&keep).map(|(&n, &s)| n * self.stride(s)).sum())
            .collect();
        let ld = local.len();
        let mut out = CMatrix::zeros(kd, kd);
        for (c, &oc) in keep_off.iter().enumerate() {
            for (r, &or) in keep_off.iter().enumerate() {
                let mut acc = ZERO;
                for l in 0..ld {
                    for lp in 0..ld {
                        let ev = e[(l, lp)];
                        if ev != ZERO {
                            acc += ev * self.rho[(local[lp] + or, local[l] + oc)];
                        }
                    }
                }
                out[(r, c)] = acc;
            }
        }
        Ok(FockState {
            modes: keep.iter().map(|&s| self.modes[s].clone()).collect(),
            cutoff: self.cutoff,
            rho: out,
        })
    }

    pub fn trace_out(&self, modes: &[&str]) -> Result<Self> {
        let ld = (self.cutoff + 1).pow(modes.len() as u32);
        self.partial_expectation(modes, &CMatrix::identity(ld, ld))
    }

    /// Tr[ρ·Γ(I − K)] over the named modes: the probability that a detector
    /// with mode-space response K (a positive contraction) registers nothing.
    pub fn no_click_expectation(&self, modes: &[&str], k: &CMatrix) -> Result<f64> {
        let n = modes.len();
        let t = CMatrix::identity(n, n) - k;
        let g = second_quantize(&t, self.cutoff);
        let r = self.partial_expectation(modes, &g)?;
        Ok(r.trace())
    }

    /// Exact click-pattern distribution for threshold detectors.
    pub fn click_distribution(&self, detectors: &[Detector]) -> Result<OutcomeDistribution> {
        let d = self.cutoff + 1;
        let sites: Vec<Vec<usize>> = detectors
            .iter()
            .map(|det| det.modes.iter().map(|m| self.mode_index(m)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let nd = detectors.len();
        let mut q = vec![0.0; 1 << nd];
        let mut t = vec![0.0; nd];
        for i in 0..self.dim() {
            let pi = self.rho[(i, i)].re;
            if pi == 0.0 {
                continue;
            }
            for (k, det) in detectors.iter().enumerate() {
                let n: usize = sites[k].iter().map(|&s| (i / self.stride(s)) % d).sum();
                t[k] = (1.0 - det.efficiency).powi(n as i32);
            }
            for (s, qs) in q.iter_mut().enumerate() {
                let mut prod = pi;
                for (k, tk) in t.iter().enumerate() {
                    if s & (1 << k) != 0 {
                        prod *= tk;
                    }
                }
                *qs += prod;
            }
        }
        let labels = detectors.iter().map(|d| d.label.clone()).collect();
        OutcomeDistribution::from_no_click(labels, &q)
    }

    /// Text dump: header lines, then `row col re im` for non-zero entries.
    pub fn to_dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# fock-state");
        let _ = writeln!(out, "modes {}", self.modes.join(" "));
        let _ = writeln!(out, "truncation {}", self.cutoff);
        for c in 0..self.dim() {
            for r in 0..self.dim() {
                let v = self.rho[(r, c)];
                if v != ZERO {
                    let _ = writeln!(out, "{r} {c} {:.17e} {:.17e}", v.re, v.im);
                }
            }
        }
        out
    }

    pub fn from_dump(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Parse {
            context: format!("fock dump line {}", line + 1),
            message: msg.to_string(),
        };
        let mut modes: Option<Vec<String>> = None;
        let mut cutoff: Option<usize> = None;
        let mut entries = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some("modes") => modes = Some(parts.map(str::to_string).collect()),
                Some("truncation") => {
                    cutoff = Some(parts.next().and_then(|x| x.parse().ok()).ok_or_else(|| bad(ln, "bad truncation"))?)
                }
                Some(first) => {
                    let nums: Vec<&str> = std::iter::once(first).chain(parts).collect();
                    if nums.len() != 4 {
                        return Err(bad(ln, "expected `row col re im`"));
                    }
                    let r: usize = nums[0].parse().map_err(|_| bad(ln, "bad row"))?;
                    let c: usize = nums[1].parse().map_err(|_| bad(ln, "bad column"))?;
                    let re: f64 = nums[2].parse().map_err(|_| bad(ln, "bad real part"))?;
                    let im: f64 = nums[3].parse().map_err(|_| bad(ln, "bad imaginary part"))?;
                    entries.push((ln, r, c, C64::new(re, im)));
                }
                None => {}
            }
        }
        let modes = modes.ok_or_else(|| bad(0, "missing `modes` line"))?;
        let cutoff = cutoff.ok_or_else(|| bad(0, "missing `truncation` line"))?;
        let dim = (cutoff + 1).pow(modes.len() as u32);
        let mut rho = CMatrix::zeros(dim, dim);
        for (ln, r, c, v) in entries {
            if r >= dim || c >= dim {
                return Err(bad(ln, "index out of range"));
            }
            rho[(r, c)] = v;
        }
        Ok(FockState { modes, cutoff, rho })
    }
}

/// Single-quantum amplitude matrix of the beam splitter.
pub fn beam_splitter_matrix(transmissivity: f64, phase: f64) -> CMatrix {
    let c = transmissivity.sqrt();
    let s = (1.0 - transmissivity).sqrt();
    CMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(c, 0.0),
            C64::from_polar(s, phase),
            -C64::from_polar(s, -phase),
            C64::new(c, 0.0),
        ],
    )
}

/// A_k = Σ_n √C(n,k)·η^{(n−k)/2}·(1−η)^{k/2}·|n−k⟩⟨n|
pub fn loss_kraus(survival: f64, cutoff: usize) -> Vec<CMatrix> {
    let d = cutoff + 1;
    (0..d)
        .map(|k| {
            DMatrix::from_fn(d, d, |row, col| {
                if col >= k && row == col - k {
                    let v = binomial(col, k).sqrt()
                        * survival.powf((col - k) as f64 / 2.0)
                        * (1.0 - survival).powf(k as f64 / 2.0);
                    C64::new(v, 0.0)
                } else {
                    ZERO
                }
            })
        })
        .collect()
}

/// B_k = G^{−1/2}·Σ_n √C(n+k,n)·(1−1/G)^{k/2}·G^{−n/2}·|n+k⟩⟨n|, truncated.
pub fn amplifier_kraus(gain: f64, cutoff: usize) -> Vec<CMatrix> {
    let d = cutoff + 1;
    (0..d)
        .map(|k| {
            DMatrix::from_fn(d, d, |row, col| {
                if row == col + k {
                    let v = (binomial(col + k, col) / gain).sqrt()
                        * (1.0 - 1.0 / gain).powf(k as f64 / 2.0)
                        * gain.powf(-(col as f64) / 2.0);
                    C64::new(v, 0.0)
                } else {
                    ZERO
                }
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn single_photon(mode_count: usize, which: usize, n: usize) -> FockState {
        let labels: Vec<String> = (0..mode_count).map(|i| format!("m{i}")).collect();
        let mut s = FockState::vacuum(&labels, n);
        let idx = (n + 1).pow((mode_count - 1 - which) as u32);
        s.rho[(0, 0)] = ZERO;
        s.rho[(idx, idx)] = C64::new(1.0, 0.0);
        s
    }

    #[test]
    fn thermal_populations() {
        let t = FockState::thermal("a", 1.0, 10);
        assert!((t.rho[(0, 0)].re - 0.5).abs() < 1e-3);
        let t = FockState::thermal("a", 0.09, 4);
        assert!((t.mean_number("a").unwrap() - 0.09).abs() < 1e-4);
        let v = FockState::vacuum(&["a", "b"], 3);
        assert_eq!(v.mean_number("b").unwrap(), 0.0);
    }

    #[test]
    fn squeezing_populates_pairs() {
        let s = FockState::vacuum(&["o", "m"], 4).apply_two_mode_squeeze("o", "m", 0.04, 0.0).unwrap();
        assert!((s.rho[(6, 6)].re - 0.96 * 0.04).abs() < 1e-15);
        assert!(s.truncation_deficit() > 0.0 && s.truncation_deficit() <= 0.04f64.powi(4));
        let same = FockState::vacuum(&["o", "m"], 4).apply_two_mode_squeeze("o", "m", 0.0, 0.0).unwrap();
        assert_eq!(same, FockState::vacuum(&["o", "m"], 4));
        assert!(FockState::vacuum(&["o"], 2).apply_two_mode_squeeze("o", "x", 0.1, 0.0).is_err());
    }

    #[test]
    fn beam_splitter_examples() {
        let s = single_photon(2, 0, 2).apply_beam_splitter("m0", "m1", 0.5, 0.0).unwrap();
        assert!((s.rho[(3, 3)].re - 0.5).abs() < 1e-15);
        assert!((s.rho[(1, 1)].re - 0.5).abs() < 1e-15);
        let s = single_photon(2, 1, 2).apply_beam_splitter("m0", "m1", 1.0 - 0.007, 0.3).unwrap();
        assert!((s.rho[(3, 3)].re - 0.007).abs() < 1e-15);
        let id = single_photon(2, 1, 2).apply_beam_splitter("m0", "m1", 1.0, 0.0).unwrap();
        assert!((id.rho - single_photon(2, 1, 2).rho).norm() < 1e-15);
    }

    #[test]
    fn beam_splitter_amplitude_convention() {
        // A single quantum in mode b ends up with amplitude e^{iφ}sinθ in a.
        let phase = 0.4;
        let mut s = FockState::vacuum(&["a", "b"], 1);
        // (|0,0⟩ + |0,1⟩)/√2 keeps the phase of the one-quantum amplitude visible.
        for (r, c) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            s.rho[(r, c)] = C64::new(0.5, 0.0);
        }
        let out = s.apply_beam_splitter("a", "b", 0.5, phase).unwrap();
        let amp_a = out.rho[(2, 0)] * 2.0;
        assert!((amp_a - C64::from_polar(FRAC_1_SQRT_2, phase)).norm() < 1e-14);
    }

    #[test]
    fn phase_examples() {
        let mut s = FockState::vacuum(&["a"], 2);
        for (r, c) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            s.rho[(r, c)] = C64::new(0.5, 0.0);
        }
        let flipped = s.clone().apply_phase("a", PI).unwrap();
        assert!((flipped.rho[(0, 1)] + s.rho[(0, 1)]).norm() < 1e-15);
        let full = s.clone().apply_phase("a", 2.0 * PI).unwrap();
        assert!((full.rho - s.rho.clone()).norm() < 1e-12);
    }

    #[test]
    fn loss_and_heating() {
        let t = FockState::thermal("a", 1.0, 40).apply_loss("a", 0.5).unwrap();
        assert!((t.mean_number("a").unwrap() - 0.5 * FockState::thermal("a", 1.0, 40).mean_number("a").unwrap()).abs() < 1e-12);
        let h = FockState::vacuum(&["a"], 6).apply_thermal_noise("a", 0.022, 0.01).unwrap();
        assert!((h.mean_number("a").unwrap() - 0.022).abs() < 1e-6);
        let a = FockState::thermal("a", 0.2, 5);
        let two = a.clone().apply_loss("a", 0.7).unwrap().apply_loss("a", 0.6).unwrap();
        let one = a.apply_loss("a", 0.42).unwrap();
        assert!((two.rho - one.rho).norm() < 1e-14);
    }

    #[test]
    fn click_examples() {
        let v = FockState::vacuum(&["a", "b"], 3);
        let det = [Detector::new("A", &["a"], 1.0), Detector::new("B", &["b"], 1.0)];
        assert!((v.click_distribution(&det).unwrap().probability(0) - 1.0).abs() < 1e-15);
        let t = FockState::thermal("a", 1.0, 40);
        let p = t.click_distribution(&[Detector::new("A", &["a"], 1.0)]).unwrap();
        assert!((p.probability(1) - 0.5).abs() < 1e-10);
        let s = FockState::vacuum(&["a", "b"], 4).apply_two_mode_squeeze("a", "b", 0.002, 0.0).unwrap();
        let p = s.click_distribution(&det).unwrap();
        let g = p.probability(3) / (p.marginal_click(0) * p.marginal_click(1));
        assert!((g - 500.0).abs() < 2.0, "{g}");
    }

    #[test]
    fn no_click_povm_matches_diagonal_detection() {
        let s = FockState::vacuum(&["a", "b"], 4)
            .apply_two_mode_squeeze("a", "b", 0.01, 0.2)
            .unwrap()
            .apply_thermal_noise("a", 0.05, 0.01)
            .unwrap();
        let eta = 0.3;
        let k = CMatrix::from_row_slice(2, 2, &[C64::new(eta, 0.0), ZERO, ZERO, C64::new(eta, 0.0)]);
        let q = s.no_click_expectation(&["a", "b"], &k).unwrap();
        let det = [Detector::new("A", &["a"], eta), Detector::new("B", &["b"], eta)];
        let dist = s.click_distribution(&det).unwrap();
        assert!((q - dist.probability(0)).abs() < 1e-14);
    }

    #[test]
    fn trace_out_and_dump_round_trip() {
        let s = FockState::vacuum(&["a", "b"], 3)
            .apply_two_mode_squeeze("a", "b", 0.02, 0.5)
            .unwrap();
        let r = s.trace_out(&["b"]).unwrap();
        assert_eq!(r.modes(), &["a".to_string()]);
        assert!((r.trace() - s.trace()).abs() < 1e-15);
        let back = FockState::from_dump(&s.to_dump()).unwrap();
        assert!((back.rho - s.rho.clone()).norm() < 1e-15);
    }
}
