//! Exact probability distributions over threshold-detector click patterns.
//!
//! A pattern is a bitmask: bit `d` is set when detector `d` clicked.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeDistribution {
    labels: Vec<String>,
    probs: Vec<f64>,
}

impl OutcomeDistribution {
    pub fn new(labels: Vec<String>, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != 1usize << labels.len() {
            return Err(Error::numerical(format!(
                "{} probabilities for {} detectors",
                probs.len(),
                labels.len()
            )));
        }
        Ok(OutcomeDistribution { labels, probs })
    }

    /// Builds the distribution from no-click probabilities: `no_click[s]` is
    /// the probability that none of the detectors in `s` clicks.
    pub fn from_no_click(labels: Vec<String>, no_click: &[f64]) -> Result<Self> {
        let d = labels.len();
        let full = (1usize << d) - 1;
        if no_click.len() != full + 1 {
            return Err(Error::numerical("no-click table has the wrong length"));
        }
        // F(S) = P(clicks ⊆ S) = Q(complement of S); Möbius over subsets.
        let mut f: Vec<f64> = (0..=full).map(|s| no_click[full ^ s]).collect();
        for bit in 0..d {
            let b = 1usize << bit;
            for s in 0..=full {
                if s & b != 0 {
                    f[s] -= f[s ^ b];
                }
            }
        }
        Ok(OutcomeDistribution { labels, probs: f })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn detectors(&self) -> usize {
        self.labels.len()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn probability(&self, pattern: usize) -> f64 {
        self.probs[pattern]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn detector_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Probability that every detector in `mask` clicks (others free).
    pub fn all_click(&self, mask: usize) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|(s, _)| s & mask == mask)
            .map(|(_, p)| p)
            .sum()
    }

    /// Probability that no detector in `mask` clicks.
    pub fn none_click(&self, mask: usize) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|(s, _)| s & mask == 0)
            .map(|(_, p)| p)
            .sum()
    }

    pub fn marginal_click(&self, detector: usize) -> f64 {
        self.all_click(1 << detector)
    }

    /// ORs independent clicks with probability `q[d]` into detector `d`.
    pub fn with_independent_clicks(&self, q: &[f64]) -> Self {
        assert_eq!(q.len(), self.labels.len());
        let mut p = self.probs.clone();
        for (d, &qd) in q.iter().enumerate() {
            if qd == 0.0 {
                continue;
            }
            let b = 1usize << d;
            for s in 0..p.len() {
                if s & b == 0 {
                    let a = p[s];
                    p[s] = a * (1.0 - qd);
                    p[s | b] += a * qd;
                }
            }
        }
        OutcomeDistribution { labels: self.labels.clone(), probs: p }
    }

    /// Marginal over the listed detectors, in the given order.
    pub fn marginal(&self, detectors: &[usize]) -> Self {
        let mut p = vec![0.0; 1 << detectors.len()];
        for (s, &ps) in self.probs.iter().enumerate() {
            let mut t = 0;
            for (j, &d) in detectors.iter().enumerate() {
                if s & (1 << d) != 0 {
                    t |= 1 << j;
                }
            }
            p[t] += ps;
        }
        OutcomeDistribution {
            labels: detectors.iter().map(|&d| self.labels[d].clone()).collect(),
            probs: p,
        }
    }

    /// Weighted mixture of distributions over the same detectors.
    pub fn mixture(parts: &[(f64, OutcomeDistribution)]) -> Result<Self> {
        let first = &parts.first().ok_or_else(|| Error::numerical("empty mixture"))?.1;
        let mut p = vec![0.0; first.probs.len()];
        for (w, d) in parts {
            if d.labels != first.labels {
                return Err(Error::numerical("mixture over different detector sets"));
            }
            for (a, b) in p.iter_mut().zip(&d.probs) {
                *a += w * b;
            }
        }
        Ok(OutcomeDistribution { labels: first.labels.clone(), probs: p })
    }

    pub fn pattern_label(&self, pattern: usize) -> String {
        let clicked: Vec<&str> = (0..self.labels.len())
            .filter(|d| pattern & (1 << d) != 0)
            .map(|d| self.labels[d].as_str())
            .collect();
        if clicked.is_empty() {
            "none".to_string()
        } else {
            clicked.join("+")
        }
    }

    /// Labeled probability table: one `pattern<TAB>bits<TAB>probability` row
    /// per pattern whose probability exceeds `threshold` in magnitude.
    pub fn to_table(&self, threshold: f64) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# detectors: {}", self.labels.join(" "));
        let _ = writeln!(out, "# pattern\tbits\tprobability");
        for (s, &p) in self.probs.iter().enumerate() {
            if p.abs() > threshold || s == 0 {
                let bits: String = (0..self.labels.len())
                    .map(|d| if s & (1 << d) != 0 { '1' } else { '0' })
                    .collect();
                let _ = writeln!(out, "{}\t{}\t{:.17e}", self.pattern_label(s), bits, p);
            }
        }
        out
    }

    pub fn max_abs_difference(&self, other: &Self) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("d{i}")).collect()
    }

    #[test]
    fn independent_detectors_factorize() {
        let p = [0.1, 0.3, 0.7];
        let q: Vec<f64> = (0..8)
            .map(|s: usize| (0..3).filter(|d| s & (1 << d) != 0).map(|d| 1.0 - p[d]).product())
            .collect();
        let dist = OutcomeDistribution::from_no_click(labels(3), &q).unwrap();
        for s in 0..8usize {
            let want: f64 = (0..3)
                .map(|d| if s & (1 << d) != 0 { p[d] } else { 1.0 - p[d] })
                .product();
            assert!((dist.probability(s) - want).abs() < 1e-15);
        }
        for d in 0..3 {
            assert!((dist.marginal_click(d) - p[d]).abs() < 1e-15);
        }
    }

    #[test]
    fn noise_folding_saturates() {
        let dist = OutcomeDistribution::new(labels(2), vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let noisy = dist.with_independent_clicks(&[1.0, 1.0]);
        assert_eq!(noisy.probability(3), 1.0);
        let half = dist.with_independent_clicks(&[0.5, 0.0]);
        assert_eq!(half.probability(1), 0.5);
        assert!((half.total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn marginal_and_table() {
        let dist = OutcomeDistribution::new(labels(2), vec![0.4, 0.3, 0.2, 0.1]).unwrap();
        let m = dist.marginal(&[1]);
        assert!((m.probability(1) - 0.3).abs() < 1e-15);
        let t = dist.to_table(0.0);
        assert!(t.contains("d0+d1\t11\t"));
    }
}
