//! Small numerical helpers.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

/// Gauss–Hermite rule for expectations over a standard normal variable:
/// E[f(X)] ≈ Σ wᵢ f(xᵢ). Golub–Welsch on the probabilists' Jacobi matrix.
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        j[(k - 1, k)] = b;
        j[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut rule: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

/// Tensor-product quadrature over independent zero-mean normals with the
/// given standard deviations. Zero widths collapse to a single node.
pub fn normal_grid(sigmas: &[f64], nodes: usize) -> Vec<(Vec<f64>, f64)> {
    let mut grid = vec![(Vec::new(), 1.0)];
    for &s in sigmas {
        let rule = if s > 0.0 { gauss_hermite(nodes) } else { vec![(0.0, 1.0)] };
        grid = grid
            .into_iter()
            .flat_map(|(x, w)| {
                rule.iter().map(move |&(xi, wi)| {
                    let mut x = x.clone();
                    x.push(s * xi);
                    (x, w * wi)
                })
            })
            .collect();
    }
    grid
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    SymmetricEigen::new(h)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_moments() {
        let rule = gauss_hermite(12);
        let m = |k: i32| rule.iter().map(|&(x, w)| w * x.powi(k)).sum::<f64>();
        assert!((m(0) - 1.0).abs() < 1e-13);
        assert!(m(1).abs() < 1e-13);
        assert!((m(2) - 1.0).abs() < 1e-12);
        assert!((m(4) - 3.0).abs() < 1e-11);
        assert!((m(6) - 15.0).abs() < 1e-10);
        // E[cos(σX)] = e^{−σ²/2}
        let s: f64 = 0.4;
        let c: f64 = rule.iter().map(|&(x, w)| w * (s * x).cos()).sum();
        assert!((c - (-s * s / 2.0).exp()).abs() < 1e-14);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(3, 4), 0.0);
        assert!((factorial(5) - 120.0).abs() < 1e-12);
        assert!((ln_factorial(10) - factorial(10).ln()).abs() < 1e-12);
    }
}
