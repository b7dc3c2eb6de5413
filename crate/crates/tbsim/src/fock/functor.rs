//! Matrix elements of passive and two-mode-squeezing operations on a
//! truncated multimode Fock space.

use crate::linalg::{factorial, CMatrix, C64};

/// Local Fock-space basis of `k` modes, each holding 0..=cutoff quanta.
/// Mode 0 is the most significant digit.
pub(crate) fn digits(index: usize, k: usize, d: usize) -> Vec<usize> {
    let mut out = vec![0; k];
    let mut x = index;
    for j in (0..k).rev() {
        out[j] = x % d;
        x /= d;
    }
    out
}

pub(crate) fn index_of(digits: &[usize], d: usize) -> usize {
    digits.iter().fold(0, |acc, &n| acc * d + n)
}

/// Γ(T): the operator on k modes that maps creation operators as
/// a_i† → Σ_j T_ji a_j†, truncated to `cutoff` quanta per mode.
///
/// For unitary T this is the passive linear-optics unitary with single-quantum
/// amplitudes transforming as ψ → Tψ. For a contraction it is the
/// normally-ordered operator used for no-click POVM elements:
/// Γ(I − K) = :exp(−a†Ka):.
pub fn second_quantize(t: &CMatrix, cutoff: usize) -> CMatrix {
    let k = t.nrows();
    assert_eq!(k, t.ncols());
    let d = cutoff + 1;
    let dim = d.pow(k as u32);
    let mut out = CMatrix::zeros(dim, dim);
    let fact: Vec<f64> = (0..=k * cutoff).map(factorial).collect();
    for col in 0..dim {
        let n = digits(col, k, d);
        let total: usize = n.iter().sum();
        let r = total + 1;
        let size = r.pow(k as u32);
        // Polynomial in k variables, exponents < r, radix-r packed.
        let mut poly = vec![C64::new(0.0, 0.0); size];
        poly[0] = C64::new(1.0, 0.0);
        let strides: Vec<usize> = (0..k).map(|j| r.pow((k - 1 - j) as u32)).collect();
        for (i, &ni) in n.iter().enumerate() {
            for _ in 0..ni {
                let mut next = vec![C64::new(0.0, 0.0); size];
                for (e, &c) in poly.iter().enumerate() {
                    if c == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for j in 0..k {
                        let tji = t[(j, i)];
                        if tji != C64::new(0.0, 0.0) && (e / strides[j]) % r + 1 < r {
                            next[e + strides[j]] += c * tji;
                        }
                    }
                }
                poly = next;
            }
        }
        let norm_in: f64 = n.iter().map(|&x| fact[x]).product::<f64>().sqrt();
        for (e, &c) in poly.iter().enumerate() {
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            let m = digits(e, k, r);
            if m.iter().any(|&x| x > cutoff) {
                continue;
            }
            let norm_out: f64 = m.iter().map(|&x| fact[x]).product::<f64>().sqrt();
            out[(index_of(&m, d), col)] = c * norm_out / norm_in;
        }
    }
    out
}

/// Two-mode squeezer exp(ξ a†b† − ξ* ab) with ξ = r e^{iφ} and tanh²r = p,
/// restricted to the truncated space. Entries are exact: they come from the
/// normal-ordered disentangled form, whose intermediate states never exceed
/// the inputs or outputs.
pub fn two_mode_squeezer(p: f64, phase: f64, cutoff: usize) -> CMatrix {
    let d = cutoff + 1;
    let mut s = CMatrix::zeros(d * d, d * d);
    let lambda = C64::from_polar(p.sqrt(), phase);
    let inv_cosh = (1.0 - p).sqrt();
    let fact: Vec<f64> = (0..=2 * cutoff).map(factorial).collect();
    let cpow = |z: C64, n: usize| (0..n).fold(C64::new(1.0, 0.0), |acc, _| acc * z);
    for n1 in 0..d {
        for n2 in 0..d {
            for j in 0..=n1.min(n2) {
                let (k1, k2) = (n1 - j, n2 - j);
                let c3 = cpow(-lambda.conj(), j) / fact[j]
                    * (fact[n1] / fact[k1] * fact[n2] / fact[k2]).sqrt();
                let diag = inv_cosh.powi((k1 + k2 + 1) as i32);
                for i in 0..d {
                    let (m1, m2) = (k1 + i, k2 + i);
                    if m1 > cutoff || m2 > cutoff {
                        break;
                    }
                    let c1 = cpow(lambda, i) / fact[i] * (fact[m1] / fact[k1] * fact[m2] / fact[k2]).sqrt();
                    s[(m1 * d + m2, n1 * d + n2)] += c1 * diag * c3;
                }
            }
        }
    }
    s
}
