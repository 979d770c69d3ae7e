//! Quadrature rules: Gauss–Hermite nodes via the Golub–Welsch
//! eigenproblem, and adaptive Simpson integration for smooth scalar
//! integrands.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights of the n-point Gauss–Hermite rule for
/// `∫ e^{−ξ²} g(ξ) dξ ≈ Σ w_j g(ξ_j)` (physicists' weight).
///
/// Computed from the symmetric tridiagonal Jacobi matrix with off-diagonal
/// `β_j = √(j/2)`; the weights are `√π·(first eigenvector component)²`.
/// Results are cached per node count.
type Rule = Arc<(Vec<f64>, Vec<f64>)>;

pub fn gauss_hermite(n: usize) -> Rule {
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().expect("quadrature cache").get(&n) {
        return hit.clone();
    }
    let mut jacobi = DMatrix::zeros(n, n);
    for j in 1..n {
        let b = (j as f64 / 2.0).sqrt();
        jacobi[(j - 1, j)] = b;
        jacobi[(j, j - 1)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let nodes: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let weights: Vec<f64> = order
        .iter()
        .map(|&i| {
            let v0 = eig.eigenvectors[(0, i)];
            sqrt_pi * v0 * v0
        })
        .collect();
    let entry = Arc::new((nodes, weights));
    cache
        .lock()
        .expect("quadrature cache")
        .insert(n, entry.clone());
    entry
}

/// Expectation of `g` under `N(mean, var)` by Gauss–Hermite:
/// substituting `x = mean + √(2·var)·ξ` gives
/// `E[g] = (1/√π)·Σ w_j g(mean + √(2·var)·ξ_j)`.
pub fn gauss_expectation(mean: f64, var: f64, n: usize, g: impl Fn(f64) -> f64) -> f64 {
    let rule = gauss_hermite(n);
    let scale = (2.0 * var).sqrt();
    let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
    let (nodes, weights) = (&rule.0, &rule.1);
    let mut acc = 0.0;
    for (xi, w) in nodes.iter().zip(weights) {
        acc += w * g(mean + scale * xi);
    }
    acc * inv_sqrt_pi
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Adaptive Simpson on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    simpson_rec(&f, a, b, fa, fm, fb, whole, tol, 40)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hermite_integrates_polynomials() {
        // ∫e^{−ξ²}dξ = √π, ∫ξ²e^{−ξ²}dξ = √π/2.
        let rule = gauss_hermite(20);
        let total: f64 = rule.1.iter().sum();
        assert_abs_diff_eq!(total, std::f64::consts::PI.sqrt(), epsilon = 1e-12);
        let second: f64 = rule.0.iter().zip(&rule.1).map(|(x, w)| w * x * x).sum();
        assert_abs_diff_eq!(second, std::f64::consts::PI.sqrt() / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn gaussian_expectation_of_square() {
        // E[x²] under N(μ, σ²) = μ² + σ².
        let v = gauss_expectation(2.0, 3.0, 40, |x| x * x);
        assert_abs_diff_eq!(v, 7.0, epsilon = 1e-10);
    }

    #[test]
    fn simpson_integrates_smooth_function() {
        let v = adaptive_simpson(|x| (x * x).exp(), 0.0, 1.0, 1e-12);
        // Reference from a dense trapezoid evaluation.
        let n = 2_000_000;
        let mut acc = 0.0;
        for i in 0..=n {
            let x = i as f64 / n as f64;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            acc += w * (x * x).exp();
        }
        acc /= n as f64;
        assert_abs_diff_eq!(v, acc, epsilon = 1e-9);
    }
}
