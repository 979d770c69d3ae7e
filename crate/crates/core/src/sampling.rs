//! Seeded random generators for matrices, channels and covariance
//! partitions.
//!
//! These back the brute-force search oracles (random partition search) and
//! the randomized test corpora. Everything is deterministic given the RNG
//! state handed in.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::psdcore::{max_eigenvalue, symmetrize, PsdMatrix};

/// Random matrix with i.i.d. standard normal entries.
pub fn rand_gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Random PSD matrix `G Gᵀ / dim` (possibly near-singular).
pub fn rand_psd<R: Rng>(rng: &mut R, dim: usize) -> PsdMatrix {
    let g = rand_gaussian_matrix(rng, dim, dim);
    PsdMatrix::new_unchecked(&g * g.transpose() / dim as f64)
}

/// Random strictly positive definite matrix `G Gᵀ / dim + εI`.
pub fn rand_spd<R: Rng>(rng: &mut R, dim: usize) -> PsdMatrix {
    let g = rand_gaussian_matrix(rng, dim, dim);
    let m = &g * g.transpose() / dim as f64 + DMatrix::identity(dim, dim) * 0.1;
    PsdMatrix::new_unchecked(m)
}

/// Random partition `{K_1, …, K_n}` of PSD matrices with `ΣK_i ⪯ cap`,
/// scaled so the total uses a fraction `usage ∈ (0, 1]` of the budget along
/// its largest generalized eigenvalue.
pub fn rand_partition<R: Rng>(
    rng: &mut R,
    cap: &PsdMatrix,
    users: usize,
    usage: f64,
) -> Vec<PsdMatrix> {
    let dim = cap.dim();
    let raw: Vec<DMatrix<f64>> = (0..users)
        .map(|_| {
            let g = rand_gaussian_matrix(rng, dim, dim);
            &g * g.transpose()
        })
        .collect();
    let total = raw.iter().fold(DMatrix::zeros(dim, dim), |acc, k| acc + k);
    // Largest λ with total·v = λ·cap·v, via cap⁻¹/²·total·cap⁻¹/².
    let cap_chol = nalgebra::Cholesky::new(cap.as_matrix().clone())
        .expect("cap must be strictly positive definite");
    let l_inv = cap_chol
        .l()
        .try_inverse()
        .expect("Cholesky factor is invertible");
    let whitened = symmetrize(&(&l_inv * &total * l_inv.transpose()));
    let lam = max_eigenvalue(&whitened).max(1e-300);
    let scale = usage / lam;
    raw.into_iter()
        .map(|k| PsdMatrix::new_unchecked(k * scale))
        .collect()
}

/// Brute-force partition sampler: `count` random partitions of `cap` among
/// `users`, with budget usage swept over (0, 1] and full-budget samples
/// included. Calls `eval` on each and returns the best objective seen.
pub fn partition_search_max<R, F>(
    rng: &mut R,
    cap: &PsdMatrix,
    users: usize,
    count: usize,
    mut eval: F,
) -> f64
where
    R: Rng,
    F: FnMut(&[PsdMatrix]) -> Option<f64>,
{
    let mut best = f64::NEG_INFINITY;
    for i in 0..count {
        // Half the draws exhaust the budget; boundary points carry the
        // weighted-sum optima.
        let usage = if i % 2 == 0 {
            1.0
        } else {
            rng.gen_range(0.05..=1.0)
        };
        let parts = rand_partition(rng, cap, users, usage);
        if let Some(v) = eval(&parts) {
            if v > best {
                best = v;
            }
        }
    }
    best
}
