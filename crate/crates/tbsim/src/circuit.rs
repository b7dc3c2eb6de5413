//! Circuit vocabulary shared by both engines.

use rand::Rng;

use crate::error::Result;
use crate::fock::{Detector, FockState};
use crate::gaussian::CovarianceState;
use crate::outcome::OutcomeDistribution;

#[derive(Clone, Debug, PartialEq)]
pub enum Op {
    TwoModeSqueeze { a: String, b: String, p: f64, phase: f64 },
    BeamSplitter { a: String, b: String, transmissivity: f64, phase: f64 },
    Phase { mode: String, phase: f64 },
    Loss { mode: String, survival: f64 },
    ThermalNoise { mode: String, added: f64, epsilon: f64 },
}

/// Operations both engines understand.
pub trait Engine: Sized {
    fn apply(self, op: &Op) -> Result<Self>;
    fn clicks(&self, detectors: &[Detector]) -> Result<OutcomeDistribution>;
    fn occupancy(&self, mode: &str) -> Result<f64>;

    fn run(self, ops: &[Op]) -> Result<Self> {
        ops.iter().try_fold(self, |s, op| s.apply(op))
    }
}

impl Engine for FockState {
    fn apply(self, op: &Op) -> Result<Self> {
        match op {
            Op::TwoModeSqueeze { a, b, p, phase } => self.apply_two_mode_squeeze(a, b, *p, *phase),
            Op::BeamSplitter { a, b, transmissivity, phase } => {
                self.apply_beam_splitter(a, b, *transmissivity, *phase)
            }
            Op::Phase { mode, phase } => self.apply_phase(mode, *phase),
            Op::Loss { mode, survival } => self.apply_loss(mode, *survival),
            Op::ThermalNoise { mode, added, epsilon } => self.apply_thermal_noise(mode, *added, *epsilon),
        }
    }

    fn clicks(&self, detectors: &[Detector]) -> Result<OutcomeDistribution> {
        self.click_distribution(detectors)
    }

    fn occupancy(&self, mode: &str) -> Result<f64> {
        self.mean_number(mode)
    }
}

impl Engine for CovarianceState {
    fn apply(self, op: &Op) -> Result<Self> {
        match op {
            Op::TwoModeSqueeze { a, b, p, phase } => self.apply_two_mode_squeeze(a, b, *p, *phase),
            Op::BeamSplitter { a, b, transmissivity, phase } => {
                self.apply_beam_splitter(a, b, *transmissivity, *phase)
            }
            Op::Phase { mode, phase } => self.apply_phase(mode, *phase),
            Op::Loss { mode, survival } => self.apply_loss(mode, *survival),
            Op::ThermalNoise { mode, added, epsilon } => self.apply_thermal_noise(mode, *added, *epsilon),
        }
    }

    fn clicks(&self, detectors: &[Detector]) -> Result<OutcomeDistribution> {
        self.click_probabilities(detectors)
    }

    fn occupancy(&self, mode: &str) -> Result<f64> {
        self.mean_number(mode)
    }
}

/// A random circuit with its detectors.
#[derive(Clone, Debug)]
pub struct RandomCircuit {
    pub modes: Vec<String>,
    pub ops: Vec<Op>,
    pub detectors: Vec<Detector>,
}

/// Bounds for [`random_circuit`].
#[derive(Clone, Copy, Debug)]
pub struct CircuitBounds {
    pub max_modes: usize,
    pub max_ops: usize,
    pub max_p: f64,
    /// Cap on the total thermal occupancy injected into any mode.
    pub max_nbar: f64,
}

impl Default for CircuitBounds {
    fn default() -> Self {
        CircuitBounds { max_modes: 4, max_ops: 8, max_p: 0.02, max_nbar: 0.2 }
    }
}

/// Draws a circuit over 2..=max_modes modes. Squeezing is applied at most
/// once per mode pair so the occupancy stays within the stated bounds.
pub fn random_circuit<R: Rng + ?Sized>(rng: &mut R, bounds: CircuitBounds) -> RandomCircuit {
    let m = rng.random_range(2..=bounds.max_modes.max(2));
    let modes: Vec<String> = (0..m).map(|i| format!("q{i}")).collect();
    let n_ops = rng.random_range(1..=bounds.max_ops.max(1));
    let mut ops = Vec::with_capacity(n_ops);
    let mut heat = vec![0.0; m];
    let mut squeezed = vec![false; m];
    let pair = |rng: &mut R| {
        let a = rng.random_range(0..m);
        let mut b = rng.random_range(0..m - 1);
        if b >= a {
            b += 1;
        }
        (a, b)
    };
    for _ in 0..n_ops {
        match rng.random_range(0..5) {
            0 => {
                let (a, b) = pair(rng);
                if squeezed[a] || squeezed[b] {
                    continue;
                }
                squeezed[a] = true;
                squeezed[b] = true;
                ops.push(Op::TwoModeSqueeze {
                    a: modes[a].clone(),
                    b: modes[b].clone(),
                    p: rng.random_range(0.0..bounds.max_p),
                    phase: rng.random_range(0.0..std::f64::consts::TAU),
                });
            }
            1 => {
                let (a, b) = pair(rng);
                ops.push(Op::BeamSplitter {
                    a: modes[a].clone(),
                    b: modes[b].clone(),
                    transmissivity: rng.random_range(0.0..=1.0),
                    phase: rng.random_range(0.0..std::f64::consts::TAU),
                });
            }
            2 => ops.push(Op::Phase {
                mode: modes[rng.random_range(0..m)].clone(),
                phase: rng.random_range(0.0..std::f64::consts::TAU),
            }),
            3 => ops.push(Op::Loss {
                mode: modes[rng.random_range(0..m)].clone(),
                survival: rng.random_range(0.3..=1.0),
            }),
            _ => {
                let i = rng.random_range(0..m);
                let room = bounds.max_nbar - heat[i];
                if room <= 0.0 {
                    continue;
                }
                let added = rng.random_range(0.0..room);
                heat[i] += added;
                ops.push(Op::ThermalNoise { mode: modes[i].clone(), added, epsilon: 0.01 });
            }
        }
    }
    let detectors = modes
        .iter()
        .map(|mode| Detector::new(format!("D{mode}"), &[mode.as_str()], rng.random_range(0.2..=1.0)))
        .collect();
    RandomCircuit { modes, ops, detectors }
}

/// Largest click-pattern difference between the engines on one circuit.
pub fn cross_engine_deviation(circuit: &RandomCircuit, truncation: usize) -> Result<f64> {
    let fock = FockState::vacuum(&circuit.modes, truncation).run(&circuit.ops)?;
    let gauss = CovarianceState::vacuum(&circuit.modes).run(&circuit.ops)?;
    let a = fock.clicks(&circuit.detectors)?;
    let b = gauss.clicks(&circuit.detectors)?;
    Ok(a.max_abs_difference(&b))
}
