//! Zero-mean Gaussian states as covariance matrices.
//!
//! Convention: ħ = 1, quadratures ordered (x₁, p₁, x₂, p₂, …) with
//! a = (x + ip)/√2, so the vacuum covariance is I/2. Operations are given as
//! Heisenberg maps a → A·a + B·a† and act as σ → SσSᵀ.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::fock::{beam_splitter_matrix, Detector};
use crate::linalg::{CMatrix, C64};
use crate::outcome::OutcomeDistribution;

pub type RMatrix = DMatrix<f64>;

#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceState {
    modes: Vec<String>,
    sigma: RMatrix,
    mean: DVector<f64>,
}

impl CovarianceState {
    pub fn vacuum<S: AsRef<str>>(modes: &[S]) -> Self {
        let m = modes.len();
        CovarianceState {
            modes: modes.iter().map(|s| s.as_ref().to_string()).collect(),
            sigma: RMatrix::identity(2 * m, 2 * m) * 0.5,
            mean: DVector::zeros(2 * m),
        }
    }

    pub fn thermal(mode: &str, nbar: f64) -> Self {
        let mut s = Self::vacuum(&[mode]);
        s.sigma *= 2.0 * nbar + 1.0;
        s
    }

    pub fn from_covariance<S: AsRef<str>>(modes: &[S], sigma: RMatrix) -> Result<Self> {
        let m = modes.len();
        if sigma.nrows() != 2 * m || sigma.ncols() != 2 * m {
            return Err(Error::numerical("covariance matrix has the wrong size"));
        }
        Ok(CovarianceState {
            modes: modes.iter().map(|s| s.as_ref().to_string()).collect(),
            sigma,
            mean: DVector::zeros(2 * m),
        })
    }

    /// Direct sum; `other`'s modes are appended.
    pub fn tensor(&self, other: &CovarianceState) -> Result<Self> {
        if other.modes.iter().any(|m| self.modes.contains(m)) {
            return Err(Error::numerical("tensor product with duplicate mode labels"));
        }
        let (a, b) = (self.sigma.nrows(), other.sigma.nrows());
        let mut sigma = RMatrix::zeros(a + b, a + b);
        sigma.view_mut((0, 0), (a, a)).copy_from(&self.sigma);
        sigma.view_mut((a, a), (b, b)).copy_from(&other.sigma);
        let mut modes = self.modes.clone();
        modes.extend(other.modes.iter().cloned());
        Ok(CovarianceState { modes, sigma, mean: DVector::zeros(a + b) })
    }

    /// Appends vacuum modes.
    pub fn with_vacuum_modes<S: AsRef<str>>(&self, modes: &[S]) -> Result<Self> {
        self.tensor(&Self::vacuum(modes))
    }

    pub fn modes(&self) -> &[String] {
        &self.modes
    }

    pub fn sigma(&self) -> &RMatrix {
        &self.sigma
    }

    pub fn mode_index(&self, label: &str) -> Result<usize> {
        self.modes
            .iter()
            .position(|m| m == label)
            .ok_or_else(|| Error::UnknownMode(label.to_string()))
    }

    fn assert_zero_mean(&self) {
        assert!(self.mean.iter().all(|&x| x == 0.0), "displaced states are not supported");
    }

    /// σ → SσSᵀ for the Heisenberg map a → A·a + B·a† on the given modes.
    pub fn apply_bogoliubov(mut self, modes: &[&str], a: &CMatrix, b: &CMatrix) -> Result<Self> {
        let sites: Vec<usize> = modes.iter().map(|m| self.mode_index(m)).collect::<Result<_>>()?;
        let s = embed(&bogoliubov_symplectic(a, b), &sites, self.modes.len());
        self.sigma = &s * &self.sigma * s.transpose();
        symmetrize(&mut self.sigma);
        Ok(self)
    }

    /// Two-mode squeezing with tanh²r = p: a → cosh r·a + e^{iφ} sinh r·b†.
    pub fn apply_two_mode_squeeze(self, a: &str, b: &str, p: f64, phase: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::validation(format!("squeezing probability {p} outside [0, 1)")));
        }
        let (am, bm) = two_mode_squeeze_maps(p, phase);
        self.apply_bogoliubov(&[a, b], &am, &bm)
    }

    pub fn apply_beam_splitter(self, a: &str, b: &str, transmissivity: f64, phase: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&transmissivity) {
            return Err(Error::validation(format!("transmissivity {transmissivity} outside [0, 1]")));
        }
        let m = beam_splitter_matrix(transmissivity, phase);
        self.apply_bogoliubov(&[a, b], &m, &CMatrix::zeros(2, 2))
    }

    pub fn apply_phase(self, mode: &str, phase: f64) -> Result<Self> {
        let a = CMatrix::from_element(1, 1, C64::from_polar(1.0, phase));
        self.apply_bogoliubov(&[mode], &a, &CMatrix::zeros(1, 1))
    }

    /// Mode block → η·σ + (1−η)(n_env + ½)·I, cross blocks scaled by √η.
    pub fn apply_thermal_loss(mut self, mode: &str, survival: f64, n_env: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&survival) || !(n_env >= 0.0) {
            return Err(Error::validation("thermal loss needs survival in [0, 1] and n_env ≥ 0"));
        }
        let i = self.mode_index(mode)?;
        let r = survival.sqrt();
        let n = self.sigma.nrows();
        for q in [2 * i, 2 * i + 1] {
            for k in 0..n {
                if k / 2 != i {
                    self.sigma[(q, k)] *= r;
                    self.sigma[(k, q)] *= r;
                }
            }
        }
        for q in [2 * i, 2 * i + 1] {
            for k in [2 * i, 2 * i + 1] {
                self.sigma[(q, k)] *= survival;
            }
            self.sigma[(q, q)] += (1.0 - survival) * (n_env + 0.5);
        }
        Ok(self)
    }

    pub fn apply_loss(self, mode: &str, survival: f64) -> Result<Self> {
        self.apply_thermal_loss(mode, survival, 0.0)
    }

    /// Adds Δn quanta through a thermal-loss channel with coupling ε.
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

    pub fn mean_number(&self, mode: &str) -> Result<f64> {
        let i = self.mode_index(mode)?;
        Ok((self.sigma[(2 * i, 2 * i)] + self.sigma[(2 * i + 1, 2 * i + 1)]) / 2.0 - 0.5)
    }

    /// ⟨a_i† a_j⟩ over the given modes.
    pub fn normal_correlations(&self, modes: &[&str]) -> Result<CMatrix> {
        let sites: Vec<usize> = modes.iter().map(|m| self.mode_index(m)).collect::<Result<_>>()?;
        let k = sites.len();
        Ok(CMatrix::from_fn(k, k, |a, b| {
            let (i, j) = (sites[a], sites[b]);
            let s = |u: usize, v: usize| self.sigma[(u, v)];
            // a_i†a_j = ½(x_i − ip_i)(x_j + ip_j) minus the commutator term.
            let re = 0.5 * (s(2 * i, 2 * j) + s(2 * i + 1, 2 * j + 1));
            let im = 0.5 * (s(2 * i, 2 * j + 1) - s(2 * i + 1, 2 * j));
            let vac = if i == j { 0.5 } else { 0.0 };
            C64::new(re - vac, im)
        }))
    }

    /// ⟨a_i a_j⟩ over the given modes.
    pub fn anomalous_correlations(&self, modes: &[&str]) -> Result<CMatrix> {
        let sites: Vec<usize> = modes.iter().map(|m| self.mode_index(m)).collect::<Result<_>>()?;
        let k = sites.len();
        Ok(CMatrix::from_fn(k, k, |a, b| {
            let (i, j) = (sites[a], sites[b]);
            let s = |u: usize, v: usize| self.sigma[(u, v)];
            let re = 0.5 * (s(2 * i, 2 * j) - s(2 * i + 1, 2 * j + 1));
            let im = 0.5 * (s(2 * i, 2 * j + 1) + s(2 * i + 1, 2 * j));
            C64::new(re, im)
        }))
    }

    /// Reduced covariance of the listed modes.
    pub fn reduced(&self, modes: &[&str]) -> Result<Self> {
        let sites: Vec<usize> = modes.iter().map(|m| self.mode_index(m)).collect::<Result<_>>()?;
        let idx: Vec<usize> = sites.iter().flat_map(|&s| [2 * s, 2 * s + 1]).collect();
        let sigma = RMatrix::from_fn(idx.len(), idx.len(), |a, b| self.sigma[(idx[a], idx[b])]);
        Self::from_covariance(modes, sigma)
    }

    /// ⟨:exp(−a†Ka):⟩ = det(I + K̃(σ − I/2))^{−1/2} over the listed modes, for
    /// a Hermitian K ≥ 0. This is the no-click probability of a detector whose
    /// response in mode space is K.
    pub fn no_click_probability(&self, modes: &[&str], k: &CMatrix) -> Result<f64> {
        self.assert_zero_mean();
        let red = self.reduced(modes)?;
        let n = red.sigma.nrows();
        let kr = realify_hermitian(k);
        let m = RMatrix::identity(n, n) + kr * (&red.sigma - RMatrix::identity(n, n) * 0.5);
        let det = m.determinant();
        if !(det > 0.0) {
            return Err(Error::numerical(format!("non-positive determinant {det} in no-click probability")));
        }
        Ok(1.0 / det.sqrt())
    }

    /// Exact click-pattern distribution: P(no click on S) = 1/√det(σ_S + I/2)
    /// with efficiencies applied as pure loss, then inclusion–exclusion.
    pub fn click_probabilities(&self, detectors: &[Detector]) -> Result<OutcomeDistribution> {
        self.assert_zero_mean();
        let mut state = self.clone();
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for det in detectors {
            let mut g = Vec::new();
            for m in &det.modes {
                state = state.apply_loss(m, det.efficiency)?;
                g.push(state.mode_index(m)?);
            }
            groups.push(g);
        }
        let nd = detectors.len();
        let mut q = vec![1.0; 1 << nd];
        for (s, qs) in q.iter_mut().enumerate().skip(1) {
            let idx: Vec<usize> = (0..nd)
                .filter(|d| s & (1 << d) != 0)
                .flat_map(|d| groups[d].iter().flat_map(|&m| [2 * m, 2 * m + 1]))
                .collect();
            let n = idx.len();
            if n == 0 {
                continue;
            }
            let m = RMatrix::from_fn(n, n, |a, b| {
                state.sigma[(idx[a], idx[b])] + if a == b { 0.5 } else { 0.0 }
            });
            let det = m.determinant();
            if !(det > 0.0) {
                return Err(Error::numerical(format!("non-positive determinant {det} for detector subset {s:#b}")));
            }
            *qs = 1.0 / det.sqrt();
        }
        OutcomeDistribution::from_no_click(detectors.iter().map(|d| d.label.clone()).collect(), &q)
    }

    /// Output modes b = L·a of a passive linear network fed with vacuum in its
    /// unused inputs. `l` has one row per output port and one column per
    /// listed input mode and must be a contraction.
    pub fn passive_outputs<S: AsRef<str>>(&self, inputs: &[&str], l: &CMatrix, outputs: &[S]) -> Result<Self> {
        if l.ncols() != inputs.len() || l.nrows() != outputs.len() {
            return Err(Error::numerical("port map has the wrong shape"));
        }
        let red = self.reduced(inputs)?;
        let t = bogoliubov_symplectic_rect(l);
        let p = t.nrows();
        let mut sigma = &t * &red.sigma * t.transpose();
        let noise = RMatrix::identity(p, p) - &t * t.transpose();
        sigma += noise * 0.5;
        symmetrize(&mut sigma);
        Self::from_covariance(outputs, sigma)
    }

    /// Smallest eigenvalue of σ + (i/2)Ω; non-negative for physical states.
    pub fn uncertainty_margin(&self) -> f64 {
        let n = self.sigma.nrows();
        let mut h = CMatrix::from_fn(n, n, |a, b| C64::new(self.sigma[(a, b)], 0.0));
        for m in 0..n / 2 {
            h[(2 * m, 2 * m + 1)] += C64::new(0.0, 0.5);
            h[(2 * m + 1, 2 * m)] -= C64::new(0.0, 0.5);
        }
        SymmetricEigen::new(h).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// det(2σ); 1 for pure states.
    pub fn purity_determinant(&self) -> f64 {
        (&self.sigma * 2.0).determinant()
    }
}

fn symmetrize(m: &mut RMatrix) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Heisenberg maps (A, B) of the two-mode squeezer.
pub fn two_mode_squeeze_maps(p: f64, phase: f64) -> (CMatrix, CMatrix) {
    let ch = 1.0 / (1.0 - p).sqrt();
    let sh = (p / (1.0 - p)).sqrt();
    let a = CMatrix::from_row_slice(2, 2, &[C64::new(ch, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(ch, 0.0)]);
    let e = C64::from_polar(sh, phase);
    let b = CMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), e, e, C64::new(0.0, 0.0)]);
    (a, b)
}

/// Real 2k×2k symplectic matrix of a → A·a + B·a† in (x, p) interleaved order.
pub fn bogoliubov_symplectic(a: &CMatrix, b: &CMatrix) -> RMatrix {
    let k = a.nrows();
    let c = a + b;
    let d = a - b;
    RMatrix::from_fn(2 * k, 2 * k, |r, s| {
        let (j, l) = (r / 2, s / 2);
        match (r % 2, s % 2) {
            (0, 0) => c[(j, l)].re,
            (0, 1) => -d[(j, l)].im,
            (1, 0) => c[(j, l)].im,
            _ => d[(j, l)].re,
        }
    })
}

fn bogoliubov_symplectic_rect(l: &CMatrix) -> RMatrix {
    RMatrix::from_fn(2 * l.nrows(), 2 * l.ncols(), |r, s| {
        let v = l[(r / 2, s / 2)];
        match (r % 2, s % 2) {
            (0, 0) | (1, 1) => v.re,
            (0, 1) => -v.im,
            _ => v.im,
        }
    })
}

/// K̃ with α†Kα = ½·vᵀK̃v for v = (x₁, p₁, …).
pub(crate) fn realify_hermitian(k: &CMatrix) -> RMatrix {
    RMatrix::from_fn(2 * k.nrows(), 2 * k.ncols(), |r, s| {
        let v = k[(r / 2, s / 2)];
        match (r % 2, s % 2) {
            (0, 0) | (1, 1) => v.re,
            (0, 1) => -v.im,
            _ => v.im,
        }
    })
}

fn embed(local: &RMatrix, sites: &[usize], modes: usize) -> RMatrix {
    let mut s = RMatrix::identity(2 * modes, 2 * modes);
    for (a, &i) in sites.iter().enumerate() {
        for (b, &j) in sites.iter().enumerate() {
            for u in 0..2 {
                for v in 0..2 {
                    s[(2 * i + u, 2 * j + v)] = local[(2 * a + u, 2 * b + v)];
                }
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn squeezing_and_phase_examples() {
        let v = CovarianceState::vacuum(&["a"]);
        assert_eq!(v.clone().apply_phase("a", 1.3).unwrap().sigma, v.sigma);
        let s = CovarianceState::vacuum(&["a", "b"]).apply_two_mode_squeeze("a", "b", 0.04, 0.0).unwrap();
        let n = s.mean_number("a").unwrap();
        assert!((n - 0.04 / 0.96).abs() < 1e-14);
        assert!((s.purity_determinant() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn beam_splitter_splits_energy() {
        let s = CovarianceState::thermal("a", 1.0)
            .tensor(&CovarianceState::vacuum(&["b"]))
            .unwrap()
            .apply_beam_splitter("a", "b", 0.5, 0.0)
            .unwrap();
        assert!((s.mean_number("a").unwrap() - 0.5).abs() < 1e-14);
        assert!((s.mean_number("b").unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn thermal_loss_examples() {
        let v = CovarianceState::vacuum(&["a"]);
        assert_eq!(v.clone().apply_thermal_loss("a", 1.0, 3.0).unwrap(), v);
        let t = v.clone().apply_thermal_loss("a", 0.0, 0.09).unwrap();
        assert!((t.mean_number("a").unwrap() - 0.09).abs() < 1e-15);
        let h = v.apply_thermal_loss("a", 0.99, 2.2).unwrap();
        assert!((h.mean_number("a").unwrap() - 0.022).abs() < 1e-15);
    }

    #[test]
    fn click_examples() {
        let v = CovarianceState::vacuum(&["a", "b"]);
        let det = [Detector::new("A", &["a"], 1.0), Detector::new("B", &["b"], 1.0)];
        assert!((v.click_probabilities(&det).unwrap().probability(0) - 1.0).abs() < 1e-15);
        let t = CovarianceState::thermal("a", 1.0);
        let p = t.click_probabilities(&[Detector::new("A", &["a"], 1.0)]).unwrap();
        assert!((p.probability(0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn symplectic_determinant() {
        let (a, b) = two_mode_squeeze_maps(0.3, 0.8);
        let s = bogoliubov_symplectic(&a, &b);
        assert!((s.determinant() - 1.0).abs() < 1e-12);
        let s = bogoliubov_symplectic(&beam_splitter_matrix(0.3, 1.1), &CMatrix::zeros(2, 2));
        assert!((s.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn povm_route_matches_determinant_route() {
        let s = CovarianceState::vacuum(&["a", "b"])
            .apply_two_mode_squeeze("a", "b", 0.02, 0.4)
            .unwrap()
            .apply_thermal_noise("b", 0.1, 0.01)
            .unwrap();
        let eta = 0.6;
        let det = [Detector::new("A", &["a"], eta), Detector::new("B", &["b"], eta)];
        let dist = s.click_probabilities(&det).unwrap();
        let k = CMatrix::identity(2, 2) * C64::new(eta, 0.0);
        let q = s.no_click_probability(&["a", "b"], &k).unwrap();
        assert!((q - dist.probability(0)).abs() < 1e-14);
    }

    #[test]
    fn passive_outputs_match_beam_splitter() {
        let s = CovarianceState::vacuum(&["a", "b"])
            .apply_two_mode_squeeze("a", "b", 0.03, 0.2)
            .unwrap();
        let m = beam_splitter_matrix(0.3, 0.7);
        let direct = s.clone().apply_beam_splitter("a", "b", 0.3, 0.7).unwrap();
        let ports = s.passive_outputs(&["a", "b"], &m, &["a", "b"]).unwrap();
        assert!((direct.sigma - ports.sigma).norm() < 1e-14);
    }

    #[test]
    fn normal_correlations_of_squeezed_pair() {
        let s = CovarianceState::vacuum(&["a", "b"])
            .apply_beam_splitter("a", "b", 0.5, 0.0)
            .unwrap();
        let c = s.normal_correlations(&["a", "b"]).unwrap();
        assert!(c.norm() < 1e-15);
        let t = CovarianceState::thermal("a", 0.4)
            .tensor(&CovarianceState::vacuum(&["b"]))
            .unwrap()
            .apply_beam_splitter("a", "b", 0.5, 0.3)
            .unwrap();
        let c = t.normal_correlations(&["a", "b"]).unwrap();
        assert!((c[(0, 0)].re - 0.2).abs() < 1e-14);
        assert!((c[(0, 1)].norm() - 0.2).abs() < 1e-14);
    }
}
