//! Exact click distributions of the 12 protocol channels.

use nalgebra::SMatrix;

use super::{read_late_phase, stage_response, ProtocolParams, CHANNELS, PATTERNS};
use crate::circuit::{Engine, Op};
use crate::error::{Error, Result};
use crate::fock::{second_quantize, FockState};
use crate::gaussian::{realify_hermitian, CovarianceState};
use crate::linalg::{normal_grid, CMatrix, C64};
use crate::model::{EngineKind, PulseRole};
use crate::outcome::OutcomeDistribution;

const JITTER_NODES: usize = 16;

type M8 = SMatrix<f64, 8, 8>;

/// Circuit of one time bin: (write ops, read ops).
fn bin_ops(params: &ProtocolParams, late: bool) -> (Vec<Op>, Vec<Op>) {
    let (o_w, m, o_r) = if late { ("o_wL", "m_L", "o_rL") } else { ("o_wE", "m_E", "o_rE") };
    let (wrole, rrole) = if late {
        (PulseRole::WriteLate, PulseRole::ReadLate)
    } else {
        (PulseRole::WriteEarly, PulseRole::ReadEarly)
    };
    let eps = params.heating_epsilon;
    let write = vec![
        Op::ThermalNoise { mode: m.into(), added: params.thermal.get(wrole), epsilon: eps },
        Op::TwoModeSqueeze {
            a: o_w.into(),
            b: m.into(),
            p: params.p_w,
            phase: if late { params.phases.phi_w } else { 0.0 },
        },
    ];
    let read = vec![
        Op::Loss { mode: m.into(), survival: params.retrieval },
        Op::ThermalNoise { mode: m.into(), added: params.thermal.get(rrole), epsilon: eps },
        Op::BeamSplitter {
            a: o_r.into(),
            b: m.into(),
            transmissivity: 1.0 - params.p_r,
            phase: if late { read_late_phase(&params.phases) } else { 0.0 },
        },
    ];
    (write, read)
}

/// Q[s]: probability that no channel in `s` clicks, averaged over the given
/// (summed jitter, weight) nodes. Background clicks are not included.
pub fn no_click_table(params: &ProtocolParams, jitter: &[(f64, f64)]) -> Result<Vec<f64>> {
    let nodes: Vec<(f64, f64, f64)> = jitter.iter().map(|&(d, w)| (d, 0.0, w)).collect();
    split_table(params, &nodes)
}

/// As [`no_click_table`] with separate (δ_w, δ_r, weight) nodes.
fn split_table(params: &ProtocolParams, nodes: &[(f64, f64, f64)]) -> Result<Vec<f64>> {
    params.validate()?;
    match params.engine {
        EngineKind::Gaussian => gaussian_table(params, nodes),
        EngineKind::Fock { truncation } => {
            let mut q = vec![0.0; PATTERNS];
            let mut read_deltas: Vec<f64> = nodes.iter().map(|n| n.1).collect();
            read_deltas.dedup();
            for dr in read_deltas {
                let group: Vec<(f64, f64)> = nodes.iter().filter(|n| n.1 == dr).map(|n| (n.0, n.2)).collect();
                for (a, b) in q.iter_mut().zip(fock_table(params, &group, dr, truncation)?) {
                    *a += b;
                }
            }
            Ok(q)
        }
    }
}

fn with_background(params: &ProtocolParams, q: &[f64]) -> Result<OutcomeDistribution> {
    let dist = OutcomeDistribution::from_no_click(super::channel_labels(), q)?;
    Ok(dist.with_independent_clicks(&params.chain.background()))
}

/// Distribution at a fixed summed jitter δ_w + δ_r.
pub fn distribution_at_jitter(params: &ProtocolParams, delta: f64) -> Result<OutcomeDistribution> {
    with_background(params, &no_click_table(params, &[(delta, 1.0)])?)
}

/// Distribution averaged over the Gaussian phase jitter.
pub fn exact_distribution(params: &ProtocolParams) -> Result<OutcomeDistribution> {
    let nodes: Vec<(f64, f64)> = normal_grid(&[params.jitter_sum_sigma()], JITTER_NODES)
        .into_iter()
        .map(|(x, w)| (x[0], w))
        .collect();
    with_background(params, &no_click_table(params, &nodes)?)
}

fn gaussian_table(params: &ProtocolParams, nodes: &[(f64, f64, f64)]) -> Result<Vec<f64>> {
    let (we, re) = bin_ops(params, false);
    let (wl, rl) = bin_ops(params, true);
    let modes = ["o_wE", "m_E", "o_wL", "m_L", "o_rE", "o_rL"];
    let state = CovarianceState::vacuum(&modes).run(&we)?.run(&wl)?.run(&re)?.run(&rl)?;
    let opt = state.reduced(&["o_wE", "o_wL", "o_rE", "o_rL"])?;
    let sigma = M8::from_fn(|i, j| opt.sigma()[(i, j)] - if i == j { 0.5 } else { 0.0 });

    let eff = params.chain.efficiency;
    let mut q = vec![0.0; PATTERNS];
    for &(delta, delta_r, weight) in nodes {
        let read_rows = params.interferometer.port_rows(delta_r);
        let read_k: Vec<_> = (0..64).map(|r| realify_hermitian(&stage_response(&read_rows, eff, r))).collect();
        let rows = params.interferometer.port_rows(delta);
        let write_k: Vec<_> = (0..64).map(|s| realify_hermitian(&stage_response(&rows, eff, s))).collect();
        for (s, kw) in write_k.iter().enumerate() {
            // Rows 0..4 of K·Σ only depend on the write block.
            let mut top = M8::zeros();
            for i in 0..4 {
                for j in 0..8 {
                    top[(i, j)] = (0..4).map(|l| kw[(i, l)] * sigma[(l, j)]).sum();
                }
            }
            for (r, kr) in read_k.iter().enumerate() {
                let mut m = top;
                for i in 0..4 {
                    for j in 0..8 {
                        m[(4 + i, j)] = (0..4).map(|l| kr[(i, l)] * sigma[(4 + l, j)]).sum();
                    }
                }
                for i in 0..8 {
                    m[(i, i)] += 1.0;
                }
                let det = m.determinant();
                if !(det > 0.0) {
                    return Err(Error::numerical(format!("non-positive determinant {det} in protocol click table")));
                }
                q[s | (r << 6)] += weight / det.sqrt();
            }
        }
    }
    Ok(q)
}

/// Photon-pair coincidence weights `W[k][l]` between write-overlap detector
/// `k` and read-overlap detector `l`: η_k η_l Σ |⟨d_k d_l⟩|² over the output
/// rows, averaged over the summed jitter. This is the two-photon amplitude
/// term of the coincidence probability. Background, multi-pair and
/// accidental terms are left out, so in the noiseless case it gives E = cos Φ
/// at any scattering probability.
pub fn pair_coincidences(params: &ProtocolParams) -> Result<[[f64; 2]; 2]> {
    params.validate()?;
    let (we, re) = bin_ops(params, false);
    let (wl, rl) = bin_ops(params, true);
    let modes = ["o_wE", "m_E", "o_wL", "m_L", "o_rE", "o_rL"];
    let state = CovarianceState::vacuum(&modes).run(&we)?.run(&wl)?.run(&re)?.run(&rl)?;
    let m = state.anomalous_correlations(&["o_wE", "o_wL", "o_rE", "o_rL"])?;
    let eff = params.chain.efficiency;
    let nodes = normal_grid(&[params.jitter_sum_sigma()], JITTER_NODES);
    let read_rows = params.interferometer.port_rows(0.0);
    let mut w = [[0.0; 2]; 2];
    for (x, weight) in nodes {
        let rows = params.interferometer.port_rows(x[0]);
        for k in 0..2 {
            for l in 0..2 {
                for rw in &rows[1][k] {
                    for rr in &read_rows[1][l] {
                        let mut amp = C64::new(0.0, 0.0);
                        for i in 0..2 {
                            for j in 0..2 {
                                amp += rw[i] * rr[j] * m[(i, 2 + j)];
                            }
                        }
                        w[k][l] += weight * eff[k] * eff[l] * amp.norm_sqr();
                    }
                }
            }
        }
    }
    Ok(w)
}

/// Correlation E of the photon-pair term, see [`pair_coincidences`].
pub fn pair_correlation(params: &ProtocolParams) -> Result<f64> {
    let w = pair_coincidences(params)?;
    let total = w[0][0] + w[1][1] + w[0][1] + w[1][0];
    if !(total > 0.0) {
        return Err(Error::numerical("no photon-pair coincidences between the overlap windows"));
    }
    Ok((w[0][0] + w[1][1] - w[0][1] - w[1][0]) / total)
}

/// Single-bin read channel from the mechanical mode to its read photon, as a
/// d²×d² matrix on row-major vectorized operators.
fn read_superoperator(read_ops: &[Op], mech: &str, optical: &str, n: usize) -> Result<CMatrix> {
    let d = n + 1;
    let run = |x: CMatrix| -> Result<CMatrix> {
        let s = FockState::vacuum(&[optical], n).tensor(&FockState::from_density_matrix(&[mech], n, x)?)?;
        Ok(s.run(read_ops)?.trace_out(&[mech])?.rho().clone())
    };
    let mut sup = CMatrix::zeros(d * d, d * d);
    let unit = |i: usize, j: usize| {
        let mut x = CMatrix::zeros(d, d);
        x[(i, j)] = C64::new(1.0, 0.0);
        x
    };
    for i in 0..d {
        for j in i..d {
            // The engine expects Hermitian inputs; split |i⟩⟨j| accordingly.
            let (yij, yji) = if i == j {
                let y = run(unit(i, i))?;
                (y.clone(), y)
            } else {
                let h1 = run(unit(i, j) + unit(j, i))?;
                let h2 = run((unit(i, j) - unit(j, i)) * C64::new(0.0, 1.0))?;
                let a = (&h1 - &h2 * C64::new(0.0, 1.0)) * C64::new(0.5, 0.0);
                let b = (&h1 + &h2 * C64::new(0.0, 1.0)) * C64::new(0.5, 0.0);
                (a, b)
            };
            for a in 0..d {
                for b in 0..d {
                    sup[(a * d + b, i * d + j)] = yij[(a, b)];
                    sup[(a * d + b, j * d + i)] = yji[(a, b)];
                }
            }
        }
    }
    Ok(sup)
}

fn fock_table(params: &ProtocolParams, jitter: &[(f64, f64)], delta_r: f64, n: usize) -> Result<Vec<f64>> {
    let d = n + 1;
    let (we, re) = bin_ops(params, false);
    let (wl, rl) = bin_ops(params, true);
    let early = FockState::vacuum(&["o_wE", "m_E"], n).run(&we)?;
    let late = FockState::vacuum(&["o_wL", "m_L"], n).run(&wl)?;
    let write_state = early.tensor(&late)?;
    let se = read_superoperator(&re, "m_E", "o_rE", n)?;
    let sl = read_superoperator(&rl, "m_L", "o_rL", n)?;

    let eff = params.chain.efficiency;
    let id2 = CMatrix::identity(2, 2);

    // Read no-click operators pulled back onto (m_E, m_L).
    let read_rows = params.interferometer.port_rows(delta_r);
    let mut pulled = Vec::with_capacity(64);
    for r in 0..64 {
        let g = second_quantize(&(&id2 - stage_response(&read_rows, eff, r)), n);
        let mut m = CMatrix::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let mut acc = C64::new(0.0, 0.0);
                        for a in 0..d {
                            for b in 0..d {
                                let e = se[(a * d + b, i * d + j)];
                                if e == C64::new(0.0, 0.0) {
                                    continue;
                                }
                                for c in 0..d {
                                    for dd in 0..d {
                                        acc += e * sl[(c * d + dd, k * d + l)] * g[(b * d + dd, a * d + c)];
                                    }
                                }
                            }
                        }
                        m[(j * d + l, i * d + k)] = acc;
                    }
                }
            }
        }
        pulled.push(m);
    }

    let mut q = vec![0.0; PATTERNS];
    for s in 0..64 {
        let mut g = CMatrix::zeros(d * d, d * d);
        for &(delta, weight) in jitter {
            let rows = params.interferometer.port_rows(delta);
            g += second_quantize(&(&id2 - stage_response(&rows, eff, s)), n) * C64::new(weight, 0.0);
        }
        let tau = write_state.partial_expectation(&["o_wE", "o_wL"], &g)?;
        let tau = tau.rho();
        for (r, m) in pulled.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for x in 0..d * d {
                for y in 0..d * d {
                    acc += tau[(x, y)] * m[(y, x)];
                }
            }
            q[s | (r << 6)] = acc.re;
        }
    }
    debug_assert_eq!(q.len(), 1 << CHANNELS);
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::super::{channel_mask, Window};
    use super::*;
    use crate::model::PhaseSettings;

    fn e_from(dist: &OutcomeDistribution) -> f64 {
        let n = |k: usize, l: usize| {
            dist.all_click(channel_mask(Window::WriteOverlap, k) | channel_mask(Window::ReadOverlap, l))
        };
        let (n11, n22, n12, n21) = (n(0, 0), n(1, 1), n(0, 1), n(1, 0));
        (n11 + n22 - n12 - n21) / (n11 + n22 + n12 + n21)
    }

    #[test]
    fn noiseless_correlation_follows_total_phase() {
        for engine in [EngineKind::Gaussian, EngineKind::Fock { truncation: 3 }] {
            for &(w, r, off) in &[(0.0, 0.0, 0.0), (0.7, 0.2, 0.1), (2.0, -1.0, 0.4)] {
                let ph = PhaseSettings::new(w, r, off);
                let params = ProtocolParams::noiseless(1e-4, 1e-4, ph, engine);
                let dist = exact_distribution(&params).unwrap();
                let e = e_from(&dist);
                assert!((e - ph.total_phase().cos()).abs() < 1e-3, "{engine:?} {e} {}", ph.total_phase().cos());
            }
        }
    }

    #[test]
    fn pair_term_is_the_small_probability_limit() {
        let ph = PhaseSettings::new(0.7, 0.2, 0.1);
        let pair = pair_correlation(&ProtocolParams::noiseless(0.3, 0.4, ph, EngineKind::Gaussian)).unwrap();
        assert!((pair - ph.total_phase().cos()).abs() < 1e-12);
        let full = e_from(&exact_distribution(&ProtocolParams::noiseless(1e-4, 1e-4, ph, EngineKind::Gaussian)).unwrap());
        assert!((pair - full).abs() < 1e-3, "{pair} {full}");
    }

    #[test]
    fn engines_agree_on_protocol_with_noise() {
        let ph = PhaseSettings::new(0.9, 0.3, 0.2);
        let mut params = ProtocolParams::noiseless(0.004, 0.01, ph, EngineKind::Gaussian);
        params.thermal = crate::model::ThermalSchedule::new([0.02, 0.03, 0.04, 0.05]);
        params.retrieval = 0.8;
        params.interferometer.visibility = 0.9;
        params.interferometer.asymmetry = 0.003;
        params.chain.efficiency = [0.3, 0.5];
        params.jitter_sigma = (0.2, 0.05);
        let g = exact_distribution(&params).unwrap();
        // N = 4 leaves 2e-6 of truncation error, N = 5 leaves 1.4e-7.
        params.engine = EngineKind::Fock { truncation: 6 };
        let f = exact_distribution(&params).unwrap();
        let dev = g.max_abs_difference(&f);
        assert!(dev < 1e-7, "{dev}");
        assert!((g.total() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn jitter_enters_only_through_its_sum() {
        let ph = PhaseSettings::new(0.4, 0.0, 0.3);
        for engine in [EngineKind::Gaussian, EngineKind::Fock { truncation: 3 }] {
            let mut params = ProtocolParams::noiseless(0.003, 0.01, ph, engine);
            params.thermal = crate::model::ThermalSchedule::new([0.02, 0.03, 0.04, 0.05]);
            let a = split_table(&params, &[(0.5, 0.0, 1.0)]).unwrap();
            let b = split_table(&params, &[(0.3, 0.2, 1.0)]).unwrap();
            let c = split_table(&params, &[(0.3, -0.2, 1.0)]).unwrap();
            let dev = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
            assert!(dev(&a, &b) < 1e-13, "{engine:?}");
            assert!(dev(&a, &c) > 1e-9);
        }
    }
}
