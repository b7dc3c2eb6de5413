//! Analytic event-rate estimate.

use std::fmt;

use crate::error::{Error, Result};
use crate::model::{ExperimentConfig, PulseSchedule};

/// One multiplicative factor of the budget.
#[derive(Clone, Debug, PartialEq)]
pub struct RateFactor {
    pub name: &'static str,
    pub value: f64,
    /// Which rate the factor enters: the herald rate or only coincidences.
    pub coincidence_only: bool,
}

/// Expected herald and coincidence rates with every factor listed.
#[derive(Clone, Debug, PartialEq)]
pub struct RateBudget {
    pub factors: Vec<RateFactor>,
    pub herald_per_second: f64,
    pub coincidence_per_second: f64,
}

impl RateBudget {
    /// Builds the budget from its raw factors.
    ///
    /// The herald rate is `f_rep · 2·p_w · w_write · η̄`: two bins scatter a
    /// Stokes photon with probability `p_w` each, a fraction `w_write` lands
    /// in the analyzed window, and `η̄` is the mean detector chain efficiency.
    /// A coincidence further needs the read pulse to convert the stored
    /// phonon (`p_r · η_ret`), the anti-Stokes photon to land in the analyzed
    /// window (`w_read`) and be detected (`η̄`).
    pub fn from_factors(
        repetition_rate: f64,
        p_w: f64,
        p_r: f64,
        retrieval: f64,
        window_fraction: [f64; 2],
        chain: [f64; 2],
    ) -> Self {
        let eta = 0.5 * (chain[0] + chain[1]);
        let factors = vec![
            RateFactor { name: "repetition rate [1/s]", value: repetition_rate, coincidence_only: false },
            RateFactor { name: "write scattering probability per bin", value: p_w, coincidence_only: false },
            RateFactor { name: "time bins per trial", value: 2.0, coincidence_only: false },
            RateFactor { name: "write photon in analyzed window", value: window_fraction[0], coincidence_only: false },
            RateFactor { name: "mean chain efficiency (write)", value: eta, coincidence_only: false },
            RateFactor { name: "read conversion probability", value: p_r, coincidence_only: true },
            RateFactor { name: "mechanical retrieval efficiency", value: retrieval, coincidence_only: true },
            RateFactor { name: "read photon in analyzed window", value: window_fraction[1], coincidence_only: true },
            RateFactor { name: "mean chain efficiency (read)", value: eta, coincidence_only: true },
        ];
        let herald: f64 = factors.iter().filter(|f| !f.coincidence_only).map(|f| f.value).product();
        let extra: f64 = factors.iter().filter(|f| f.coincidence_only).map(|f| f.value).product();
        // Two bins with p_w = 1 cannot herald twice per trial.
        let herald = herald.min(repetition_rate);
        RateBudget { factors, herald_per_second: herald, coincidence_per_second: herald * extra }
    }

    pub fn herald_per_hour(&self) -> f64 {
        self.herald_per_second * 3600.0
    }

    pub fn coincidence_per_hour(&self) -> f64 {
        self.coincidence_per_second * 3600.0
    }
}

impl fmt::Display for RateBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for x in &self.factors {
            let tag = if x.coincidence_only { "coincidence" } else { "herald" };
            writeln!(f, "{:<40} {:>12.6e}  ({tag})", x.name, x.value)?;
        }
        writeln!(f, "heralds per hour      {:.4e}", self.herald_per_hour())?;
        write!(f, "coincidences per hour {:.4e}", self.coincidence_per_hour())
    }
}

/// Rate budget of a pulsed configuration, counting events in the overlap
/// windows: an early or late photon reaches a given overlap window with
/// probability ½ once both detectors are summed.
pub fn rate_budget(cfg: &ExperimentConfig) -> Result<RateBudget> {
    if matches!(cfg.schedule, PulseSchedule::ContinuousPump { .. }) {
        return Err(Error::validation("rate budget needs a pulsed schedule"));
    }
    let fraction = if cfg.noise.interferometer_connected { 0.5 } else { 1.0 };
    Ok(RateBudget::from_factors(
        1.0 / cfg.waveguide.repetition_period,
        cfg.write_probability(),
        cfg.read_probability(),
        cfg.waveguide.retrieval_efficiency(),
        [fraction, fraction],
        [cfg.noise.chain_efficiency(0), cfg.noise.chain_efficiency(1)],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lossless_unit_probabilities_give_repetition_rate() {
        let b = RateBudget::from_factors(1e5, 1.0, 1.0, 1.0, [1.0, 1.0], [1.0, 1.0]);
        assert!((b.coincidence_per_second - 1e5).abs() < 1e-9);
        assert!((b.herald_per_second - 1e5).abs() < 1e-9);
    }

    #[test]
    fn herald_rate_is_linear_in_write_probability() {
        let a = RateBudget::from_factors(1e5, 0.002, 0.01, 0.8, [0.5, 0.5], [0.3, 0.4]);
        let b = RateBudget::from_factors(1e5, 0.004, 0.01, 0.8, [0.5, 0.5], [0.3, 0.4]);
        assert!((b.herald_per_second / a.herald_per_second - 2.0).abs() < 1e-12);
    }
}
