//! Weighted-sum secrecy-rate maximization over covariance partitions, KKT
//! residual certification, and region-boundary sweeps.
//!
//! The objective `Σ μ_k R_k` is maximized with the positive-weight users
//! encoded in ascending-μ order, in three phases per restart:
//!
//! 1. barrier continuation — parts parameterized as `K_j = B_j B_jᵀ` with a
//!    logarithmic barrier on `S − ΣK_j`, Barzilai–Borwein ascent per stage;
//!    keeps iterates strictly feasible and locates the basin;
//! 2. projected-gradient polish — ascent on the true objective with exact
//!    Dykstra projections onto `{K_j ⪰ 0} ∩ {ΣK ⪯ S}`;
//! 3. Anderson-accelerated endgame on the fixed-point map, which converges
//!    fast once the active faces settle.
//!
//! The problem is non-convex, so the search is multi-start and the best
//! objective wins. At a fixed point the Dykstra corrections are exact KKT
//! multipliers up to scaling; those are cross-checked against chain
//! back-substitution and a support-basis least-squares fit, and the
//! certificate with the smallest residual is returned.

use nalgebra::{Cholesky, DMatrix};
use serde::{Deserialize, Serialize};

use crate::channel_model::AlignedChannel;
use crate::psdcore::{psd_project, spd_inverse, symmetrize, PsdMatrix};
use crate::rate_eval::{dpc_rates_aligned, CovariancePartition, RatePoint};
use crate::sampling::rand_gaussian_matrix;
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Non-negative user weights, at least one strictly positive.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightVector {
    pub mu: Vec<f64>,
}

impl WeightVector {
    pub fn new(mu: Vec<f64>) -> Result<Self> {
        if mu.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidWeights("weights must be non-negative".into()));
        }
        if !mu.iter().any(|w| *w > 0.0) {
            return Err(Error::InvalidWeights(
                "at least one weight must be positive".into(),
            ));
        }
        Ok(Self { mu })
    }

    pub fn users(&self) -> usize {
        self.mu.len()
    }
}

/// Sort weights ascending (stable on ties): returns the full permutation
/// `pi`, the positive-weight tail `pi_prime`, and the count `m` of strictly
/// positive weights. `pi[k]` is the user encoded at position `k`.
pub fn weight_permutation(mu: &WeightVector) -> Result<(Vec<usize>, Vec<usize>, usize)> {
    let k = mu.users();
    let mut pi: Vec<usize> = (0..k).collect();
    pi.sort_by(|&a, &b| mu.mu[a].total_cmp(&mu.mu[b]).then(a.cmp(&b)));
    let m = mu.mu.iter().filter(|w| **w > 0.0).count();
    if m == 0 {
        return Err(Error::InvalidWeights("all weights are zero".into()));
    }
    let pi_prime = pi[k - m..].to_vec();
    Ok((pi, pi_prime, m))
}

/// Optimizer knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimOptions {
    /// Number of random restarts beyond the deterministic balanced start.
    pub restarts: usize,
    /// RNG seed for restart initializations.
    pub seed: u64,
    /// Iteration budget for the final barrier stage.
    pub max_iters: usize,
    /// Stopping threshold on the projected-gradient fixed-point residual
    /// (scaled by the budget size).
    pub grad_tol: f64,
    /// Descending barrier weights for the continuation phase that locates
    /// the basin before the exact polish.
    pub barrier_schedule: Vec<f64>,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            restarts: 8,
            seed: 0,
            max_iters: 10_000,
            grad_tol: 1e-9,
            barrier_schedule: vec![1e-1, 1e-3, 1e-5],
        }
    }
}

/// Lagrange multiplier matrices with the residuals of each KKT equation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KktCertificate {
    /// Multipliers on `K_j ⪰ 0`, one per positive-weight user, in the
    /// encoding order used by the optimizer (ascending μ).
    pub multipliers: Vec<PsdMatrix>,
    /// Multiplier on the covariance budget `S − ΣK ⪰ 0`.
    pub cap_multiplier: PsdMatrix,
    /// Stationarity equation residuals: the m−1 chain equations, then the
    /// final equation against the cap multiplier.
    pub stationarity_residuals: Vec<f64>,
    /// `‖M_j·K_j‖` for each j, then `‖M_Z·(S − ΣK)‖`.
    pub slackness_residuals: Vec<f64>,
    /// PSD-projection distances absorbed while forming each multiplier
    /// (the m part multipliers, then the cap multiplier).
    pub projection_distances: Vec<f64>,
}

impl KktCertificate {
    pub fn max_residual(&self) -> f64 {
        self.stationarity_residuals
            .iter()
            .chain(&self.slackness_residuals)
            .fold(0.0_f64, |a, &b| a.max(b))
    }
}

/// Output of one weighted-sum maximization.
#[derive(Debug, Clone)]
pub struct OptimResult {
    pub partition: CovariancePartition,
    pub rates: RatePoint,
    pub certificate: KktCertificate,
    pub objective: f64,
    /// Whether the certificate residuals meet the default tolerance.
    pub converged: bool,
    /// Fixed-point residual of the projected-gradient mapping at the
    /// returned partition.
    pub grad_norm: f64,
}

/// The reduced problem: positive-weight users only, in encoding order.
struct Reduced {
    cap: DMatrix<f64>,
    noises: Vec<DMatrix<f64>>,
    eve: DMatrix<f64>,
    weights: Vec<f64>,
    dim: usize,
}

impl Reduced {
    fn from_channel(ch: &AlignedChannel, mu: &WeightVector, order: &[usize]) -> Result<Self> {
        if mu.users() != ch.users() {
            return Err(Error::InvalidWeights(format!(
                "{} weights for {} users",
                mu.users(),
                ch.users()
            )));
        }
        let mut seen = vec![false; ch.users()];
        for &u in order {
            if u >= ch.users() || seen[u] {
                return Err(Error::InvalidPermutation(format!("bad entry {u}")));
            }
            if mu.mu[u] <= 0.0 {
                return Err(Error::InvalidPermutation(format!(
                    "user {u} has zero weight and cannot take an encoding position"
                )));
            }
            seen[u] = true;
        }
        if order.len() != mu.mu.iter().filter(|w| **w > 0.0).count() {
            return Err(Error::InvalidPermutation(
                "order must list every positive-weight user exactly once".into(),
            ));
        }
        Ok(Self {
            cap: ch.input_cap.as_matrix().clone(),
            noises: order
                .iter()
                .map(|&u| ch.receiver_noises[u].as_matrix().clone())
                .collect(),
            eve: ch.eve_noise.as_matrix().clone(),
            weights: order.iter().map(|&u| mu.mu[u]).collect(),
            dim: ch.dim(),
        })
    }

    fn positions(&self) -> usize {
        self.noises.len()
    }

    /// Prefix sums `W_k = Σ_{i≤k} K_i`, `W_0 = 0`.
    fn prefixes(&self, parts: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
        let mut out = Vec::with_capacity(parts.len() + 1);
        out.push(DMatrix::zeros(self.dim, self.dim));
        for k in parts {
            let next = out.last().expect("non-empty") + k;
            out.push(next);
        }
        out
    }

    /// Weighted objective `Σ μ_k R_k` (no barrier). `None` if a log-det
    /// argument is numerically singular.
    fn objective(&self, parts: &[DMatrix<f64>]) -> Option<f64> {
        let w = self.prefixes(parts);
        let ld = |m: DMatrix<f64>| -> Option<f64> {
            let ch = Cholesky::new(symmetrize(&m))?;
            let mut acc = 0.0;
            for i in 0..self.dim {
                let d = ch.l_dirty()[(i, i)];
                if d <= 0.0 {
                    return None;
                }
                acc += d.ln();
            }
            Some(2.0 * acc)
        };
        let mut total = 0.0;
        for k in 0..self.positions() {
            let legit = 0.5 * (ld(&w[k + 1] + &self.noises[k])? - ld(&w[k] + &self.noises[k])?);
            let eve = 0.5 * (ld(&w[k + 1] + &self.eve)? - ld(&w[k] + &self.eve)?);
            total += self.weights[k] * (legit - eve);
        }
        Some(total)
    }

    /// Stationarity gradients `∇_j` of `2·Σ μ_k R_k` with respect to `K_j`
    /// (the factor 2 matches the KKT equations with the halves absorbed
    /// into the multipliers), via the backward recursion
    /// `∇_m = μ_m[(W_m+Σ_m)⁻¹ − (W_m+Σ_Z)⁻¹]`,
    /// `∇_j = ∇_{j+1} + μ_j(W_j+Σ_j)⁻¹ − μ_{j+1}(W_j+Σ_{j+1})⁻¹
    ///        + (μ_{j+1}−μ_j)(W_j+Σ_Z)⁻¹`.
    fn kkt_gradients(&self, parts: &[DMatrix<f64>]) -> Result<Vec<DMatrix<f64>>> {
        let m = self.positions();
        let w = self.prefixes(parts);
        let inv = |mat: DMatrix<f64>| -> Result<DMatrix<f64>> { spd_inverse(&mat) };
        let mut grads = vec![DMatrix::zeros(self.dim, self.dim); m];
        grads[m - 1] =
            self.weights[m - 1] * (inv(&w[m] + &self.noises[m - 1])? - inv(&w[m] + &self.eve)?);
        for j in (0..m - 1).rev() {
            let chain = self.weights[j] * inv(&w[j + 1] + &self.noises[j])?
                - self.weights[j + 1] * inv(&w[j + 1] + &self.noises[j + 1])?
                + (self.weights[j + 1] - self.weights[j]) * inv(&w[j + 1] + &self.eve)?;
            grads[j] = &grads[j + 1] + chain;
        }
        Ok(grads)
    }
}

/// Barrier-augmented value: `Σ μ_k R_k + τ·log|S − ΣK|`, `None` when the
/// iterate leaves the interior.
fn barrier_value(red: &Reduced, parts: &[DMatrix<f64>], tau: f64) -> Option<f64> {
    let total = parts
        .iter()
        .fold(DMatrix::zeros(red.dim, red.dim), |acc, k| acc + k);
    let slack = symmetrize(&(&red.cap - total));
    let chol = Cholesky::new(slack)?;
    let mut ld = 0.0;
    for i in 0..red.dim {
        let d = chol.l_dirty()[(i, i)];
        if d <= 0.0 {
            return None;
        }
        ld += d.ln();
    }
    Some(red.objective(parts)? + tau * 2.0 * ld)
}

/// One barrier stage of Barzilai–Borwein ascent on the factors.
fn bb_stage(
    red: &Reduced,
    factors: &mut [DMatrix<f64>],
    tau: f64,
    grad_tol: f64,
    max_iters: usize,
) -> Result<()> {
    let m = red.positions();
    let dim = red.dim;
    let parts_of = |fs: &[DMatrix<f64>]| -> Vec<DMatrix<f64>> {
        fs.iter().map(|b| b * b.transpose()).collect()
    };
    // Gradient of the barrier objective with respect to each factor:
    // (½∇_j − τ(S−W)⁻¹)·2B_j, using the KKT-scaled ∇_j.
    let grad_of = |fs: &[DMatrix<f64>]| -> Result<Vec<DMatrix<f64>>> {
        let parts = parts_of(fs);
        let grads_k = red.kkt_gradients(&parts)?;
        let total = parts
            .iter()
            .fold(DMatrix::zeros(dim, dim), |acc, k| acc + k);
        let slack_inv = spd_inverse(&(&red.cap - total))?;
        Ok((0..m)
            .map(|j| (0.5 * &grads_k[j] - tau * &slack_inv) * 2.0 * &fs[j])
            .collect())
    };
    let norm_of =
        |gs: &[DMatrix<f64>]| -> f64 { gs.iter().map(|g| g.norm_squared()).sum::<f64>().sqrt() };

    let mut value = barrier_value(red, &parts_of(factors), tau)
        .ok_or_else(|| Error::InvalidPartition("infeasible optimizer start".into()))?;
    let mut grad = grad_of(factors)?;
    let mut grad_norm = norm_of(&grad);
    let mut step = 1e-2;
    type FactorState = (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>);
    let mut prev: Option<FactorState> = None;

    let mut iters = 0;
    let mut stall = 0usize;
    while iters < max_iters && grad_norm > grad_tol {
        iters += 1;
        // Barzilai–Borwein step length from the last displacement pair.
        if let Some((ref fs_prev, ref g_prev)) = prev {
            let mut ss = 0.0;
            let mut sy = 0.0;
            for j in 0..m {
                let s = &factors[j] - &fs_prev[j];
                let y = &grad[j] - &g_prev[j];
                ss += s.dot(&s);
                sy += s.dot(&y);
            }
            // Ascent: curvature along the path should be negative.
            if sy < 0.0 {
                step = (ss / -sy).clamp(1e-14, 1e8);
            }
        }
        let mut accepted = false;
        let mut trial_step = step;
        for _ in 0..70 {
            let trial: Vec<DMatrix<f64>> = (0..m)
                .map(|j| &factors[j] + trial_step * &grad[j])
                .collect();
            if let Some(v) = barrier_value(red, &parts_of(&trial), tau) {
                if v >= value - 1e-14 * (1.0 + value.abs()) {
                    prev = Some((factors.to_vec(), grad.clone()));
                    for (f, t) in factors.iter_mut().zip(trial) {
                        *f = t;
                    }
                    if v > value + 1e-12 * (1.0 + value.abs()) {
                        stall = 0;
                    } else {
                        stall += 1;
                    }
                    value = v;
                    accepted = true;
                    break;
                }
            }
            trial_step *= 0.5;
        }
        // The polish phases take over once ascent flattens out.
        if !accepted || stall > 60 {
            break;
        }
        grad = grad_of(factors)?;
        grad_norm = norm_of(&grad);
    }
    Ok(())
}

/// Frobenius projection of stacked parts onto
/// `{K_j ⪰ 0 ∀j} ∩ {ΣK_j ⪯ cap}` by Dykstra's alternating scheme.
/// Also returns the limiting normal-cone components: the shared budget
/// correction `Λ ⪰ 0` (with `Λ·(cap − ΣK) = 0`) and the per-part
/// corrections `N_j ⪰ 0` (with `N_j·K_j = 0`); these are the exact
/// projection multipliers that turn a fixed point into a KKT point.
fn dykstra_project(
    cap: &DMatrix<f64>,
    input: &[DMatrix<f64>],
) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>, DMatrix<f64>) {
    dykstra_project_budgeted(cap, input, 400)
}

fn dykstra_project_budgeted(
    cap: &DMatrix<f64>,
    input: &[DMatrix<f64>],
    budget: usize,
) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>, DMatrix<f64>) {
    let m = input.len();
    let dim = cap.nrows();
    let mut x: Vec<DMatrix<f64>> = input.to_vec();
    let mut lambda = DMatrix::zeros(dim, dim);
    let mut q: Vec<DMatrix<f64>> = vec![DMatrix::zeros(dim, dim); m];
    let scale = 1.0 + cap.amax();
    for _ in 0..budget {
        // Project (x + p) onto {ΣK ⪯ cap}: subtract the shared correction
        // Λ = positive part of (Σz − cap)/m in its eigenbasis.
        let z: Vec<DMatrix<f64>> = x.iter().map(|k| k + &lambda).collect();
        let sum_z = z.iter().fold(DMatrix::zeros(dim, dim), |a, k| a + k);
        let excess = symmetrize(&(&sum_z - cap));
        let (pos, _) = psd_project(&excess);
        let new_lambda = pos / m as f64;
        let y: Vec<DMatrix<f64>> = z.iter().map(|k| k - &new_lambda).collect();
        // Project (y + q) onto {K_j ⪰ 0} componentwise.
        let mut max_move = 0.0_f64;
        for j in 0..m {
            let w = symmetrize(&(&y[j] + &q[j]));
            let (proj, _) = psd_project(&w);
            let new_q = &w - &proj;
            max_move = max_move.max((&proj - &x[j]).amax());
            x[j] = proj;
            q[j] = new_q;
        }
        max_move = max_move.max((&new_lambda - &lambda).amax());
        lambda = new_lambda;
        if max_move < 1e-15 * scale {
            break;
        }
    }
    let n_parts: Vec<DMatrix<f64>> = q.iter().map(|qq| -qq).collect();
    (x, n_parts, lambda)
}

struct PolishOutcome {
    /// Projected-gradient fixed-point residual `‖K⁺ − K‖/γ`.
    fp_residual: f64,
    /// Budget multiplier implied by the final projection (`2Λ/γ`).
    cap_multiplier: DMatrix<f64>,
    /// Part multipliers implied by the final projection (`2N_j/γ`).
    multipliers: Vec<DMatrix<f64>>,
}

/// Projected-gradient ascent on the true objective with exact feasibility,
/// warm-started from the barrier solution. The fixed point of the
/// projection mapping satisfies the KKT system with multipliers read off
/// the final Dykstra corrections.
fn pg_polish(
    red: &Reduced,
    parts: &mut Vec<DMatrix<f64>>,
    max_iters: usize,
    target: f64,
) -> Result<PolishOutcome> {
    let m = red.positions();
    let mut value = red
        .objective(parts)
        .ok_or_else(|| Error::InvalidPartition("infeasible polish start".into()))?;
    let scale = 1.0 + red.cap.trace() / red.dim as f64;
    let mut gamma = 0.25 * scale;
    let mut stall = 0usize;
    let mut last_fp = f64::INFINITY;
    for _ in 0..max_iters {
        let grads = red.kkt_gradients(parts)?;
        let stepped: Vec<DMatrix<f64>> = (0..m)
            .map(|j| &parts[j] + 0.5 * gamma * &grads[j])
            .collect();
        let (proj, _, _) = dykstra_project(&red.cap, &stepped);
        // Alternating projections are inexact for far-away inputs; a step
        // whose "projection" leaks outside the budget is rejected outright,
        // otherwise the objective would inflate on infeasible power.
        let total = proj
            .iter()
            .fold(DMatrix::zeros(red.dim, red.dim), |a, k| a + k);
        if crate::psdcore::min_eigenvalue(&(&red.cap - total)) < -1e-11 * scale {
            gamma *= 0.4;
            continue;
        }
        let trial_value = match red.objective(&proj) {
            Some(v) => v,
            None => {
                gamma *= 0.4;
                continue;
            }
        };
        if trial_value < value - 1e-13 * (1.0 + value.abs()) {
            gamma *= 0.4;
            if gamma < 1e-14 {
                break;
            }
            continue;
        }
        let move_norm: f64 = (0..m)
            .map(|j| (&proj[j] - &parts[j]).norm_squared())
            .sum::<f64>()
            .sqrt();
        let fp_residual = move_norm / gamma;
        *parts = proj;
        value = trial_value;
        if fp_residual < 0.9 * last_fp {
            stall = 0;
        } else {
            stall += 1;
        }
        last_fp = fp_residual;
        if fp_residual <= target || stall > 300 {
            break;
        }
        gamma = (gamma * 1.15).min(50.0 * scale);
    }

    // Endgame: Anderson-accelerated iteration of the fixed-point map
    // T(K) = P(K + γ·g) at a frozen step size. Once the active faces have
    // settled the map is smooth and the extrapolation converges far faster
    // than the plain linear rate.
    let gamma_end = gamma.clamp(1e-3 * scale, 50.0 * scale);
    anderson_endgame(red, parts, gamma_end, max_iters / 4, 0.02 * target)?;

    // Exact feasibility: shrink uniformly if the Dykstra tolerance left the
    // total a hair over the budget (relative change ~1e-15, invisible to
    // the objective).
    let total = parts
        .iter()
        .fold(DMatrix::zeros(red.dim, red.dim), |a, k| a + k);
    if let Some(chol) = Cholesky::new(red.cap.clone()) {
        if let Some(l_inv) = chol.l().try_inverse() {
            let lam =
                crate::psdcore::max_eigenvalue(&symmetrize(&(&l_inv * &total * l_inv.transpose())));
            if lam > 1.0 {
                let shrink = 1.0 / lam;
                for k in parts.iter_mut() {
                    *k *= shrink;
                }
            }
        }
    }

    // Multipliers consistent with the final point: one projection at a
    // moderate step, discarding the (negligible) move.
    let gamma_ex = gamma.clamp(1e-3 * scale, scale);
    let grads = red.kkt_gradients(parts)?;
    let stepped: Vec<DMatrix<f64>> = (0..m)
        .map(|j| &parts[j] + 0.5 * gamma_ex * &grads[j])
        .collect();
    let (proj, n_parts, lambda) = dykstra_project_budgeted(&red.cap, &stepped, 20_000);
    let move_norm: f64 = (0..m)
        .map(|j| (&proj[j] - &parts[j]).norm_squared())
        .sum::<f64>()
        .sqrt();
    Ok(PolishOutcome {
        fp_residual: move_norm / gamma_ex,
        cap_multiplier: 2.0 * &lambda / gamma_ex,
        multipliers: n_parts.iter().map(|n| 2.0 * n / gamma_ex).collect(),
    })
}

fn stack_parts(parts: &[DMatrix<f64>]) -> nalgebra::DVector<f64> {
    let mut out = Vec::new();
    for p in parts {
        out.extend_from_slice(p.as_slice());
    }
    nalgebra::DVector::from_vec(out)
}

fn unstack_parts(v: &nalgebra::DVector<f64>, m: usize, dim: usize) -> Vec<DMatrix<f64>> {
    (0..m)
        .map(|j| {
            let block = v.rows(j * dim * dim, dim * dim);
            symmetrize(&DMatrix::from_column_slice(dim, dim, block.as_slice()))
        })
        .collect()
}

/// Anderson acceleration of `T(K) = P(K + γ·½∇)` with plain-step
/// safeguarding; drives the fixed-point residual toward `target·γ`.
fn anderson_endgame(
    red: &Reduced,
    parts: &mut Vec<DMatrix<f64>>,
    gamma: f64,
    max_iters: usize,
    target: f64,
) -> Result<()> {
    let m = red.positions();
    let dim = red.dim;
    let scale = 1.0 + red.cap.amax();
    let apply_map = |x: &nalgebra::DVector<f64>| -> Result<Option<nalgebra::DVector<f64>>> {
        let p = unstack_parts(x, m, dim);
        let grads = red.kkt_gradients(&p)?;
        let stepped: Vec<DMatrix<f64>> = (0..m).map(|j| &p[j] + 0.5 * gamma * &grads[j]).collect();
        let (proj, _, _) = dykstra_project(&red.cap, &stepped);
        let total = proj.iter().fold(DMatrix::zeros(dim, dim), |a, k| a + k);
        if crate::psdcore::min_eigenvalue(&(&red.cap - total)) < -1e-11 * scale {
            return Ok(None);
        }
        Ok(Some(stack_parts(&proj)))
    };

    let mut x = stack_parts(parts);
    let mut hist_x: Vec<nalgebra::DVector<f64>> = Vec::new();
    let mut hist_g: Vec<nalgebra::DVector<f64>> = Vec::new();
    let memory = 6usize;
    let mut g = match apply_map(&x)? {
        Some(t) => &t - &x,
        None => return Ok(()),
    };
    let mut best_norm = f64::INFINITY;
    let mut stall = 0usize;
    for _ in 0..max_iters {
        let g_norm = g.norm();
        if g_norm / gamma <= target {
            break;
        }
        // Under a non-contracting map (active faces still moving, or the
        // fixed point only marginally attractive) further grinding buys
        // nothing the multiplier recovery cannot provide.
        if g_norm < 0.97 * best_norm {
            best_norm = g_norm;
            stall = 0;
        } else {
            stall += 1;
            if stall > 80 {
                break;
            }
        }
        hist_x.push(x.clone());
        hist_g.push(g.clone());
        if hist_x.len() > memory {
            hist_x.remove(0);
            hist_g.remove(0);
        }
        let k = hist_x.len();
        let x_new = &x + &g;
        if k >= 2 {
            // Least squares over the residual differences.
            let cols = k - 1;
            let mut dg = DMatrix::zeros(g.len(), cols);
            let mut dx = DMatrix::zeros(g.len(), cols);
            for c in 0..cols {
                dg.set_column(c, &(&hist_g[c + 1] - &hist_g[c]));
                dx.set_column(c, &(&hist_x[c + 1] - &hist_x[c]));
            }
            let svd = nalgebra::SVD::new(dg.clone(), true, true);
            let reg = 1e-10 * svd.singular_values.iter().fold(0.0_f64, |a, &b| a.max(b));
            if let Ok(theta) = svd.solve(&g, reg.max(1e-300)) {
                let candidate = &x + &g - (&dx + &dg) * &theta;
                // Safeguard: keep the extrapolation only when it is
                // feasible and shrinks the fixed-point residual.
                if let Some(t_cand) = apply_map(&candidate)? {
                    let g_cand = &t_cand - &candidate;
                    if g_cand.norm() <= 0.995 * g.norm() {
                        x = candidate;
                        g = g_cand;
                        continue;
                    }
                }
            }
        }
        // Plain fixed-point step.
        x = x_new;
        g = match apply_map(&x)? {
            Some(t) => &t - &x,
            None => break,
        };
    }
    *parts = unstack_parts(&x, m, dim);
    Ok(())
}

/// Zero out negligible eigencomponents of each part so users whose optimal
/// share is empty do not carry ghost mass into the certificate.
fn truncate_factors(factors: &mut [DMatrix<f64>], scale: f64) {
    for b in factors.iter_mut() {
        let k = symmetrize(&(&*b * b.transpose()));
        let eig = nalgebra::SymmetricEigen::new(k);
        let mut any = false;
        let mut vals = eig.eigenvalues.clone();
        for v in vals.iter_mut() {
            if *v < 1e-11 * scale {
                *v = 0.0;
                any = true;
            }
        }
        if any {
            let sqrt_vals = vals.map(|v| v.max(0.0).sqrt());
            *b = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals);
        }
    }
}

fn certificate_from_multipliers(
    red: &Reduced,
    parts: &[DMatrix<f64>],
    multipliers_raw: &[DMatrix<f64>],
    cap_raw: &DMatrix<f64>,
) -> Result<KktCertificate> {
    let m = red.positions();
    let mut projection_distances = Vec::with_capacity(m + 1);
    let mut multipliers = Vec::with_capacity(m);
    for raw in multipliers_raw {
        let (proj, dist) = psd_project(raw);
        projection_distances.push(dist);
        multipliers.push(PsdMatrix::new_unchecked(proj));
    }
    let (cap_proj, cap_dist) = psd_project(cap_raw);
    projection_distances.push(cap_dist);
    let cap_multiplier = PsdMatrix::new_unchecked(cap_proj);

    let w = red.prefixes(parts);
    let inv = |mat: DMatrix<f64>| -> Result<DMatrix<f64>> { spd_inverse(&mat) };
    let mut stationarity = Vec::with_capacity(m);
    for j in 0..m.saturating_sub(1) {
        let lhs = red.weights[j] * inv(&w[j + 1] + &red.noises[j])?
            + (red.weights[j + 1] - red.weights[j]) * inv(&w[j + 1] + &red.eve)?
            + multipliers[j].as_matrix();
        let rhs = red.weights[j + 1] * inv(&w[j + 1] + &red.noises[j + 1])?
            + multipliers[j + 1].as_matrix();
        stationarity.push((lhs - rhs).norm());
    }
    let lhs =
        red.weights[m - 1] * inv(&w[m] + &red.noises[m - 1])? + multipliers[m - 1].as_matrix();
    let rhs = red.weights[m - 1] * inv(&w[m] + &red.eve)? + cap_multiplier.as_matrix();
    stationarity.push((lhs - rhs).norm());

    let mut slackness = Vec::with_capacity(m + 1);
    for j in 0..m {
        slackness.push((multipliers[j].as_matrix() * &parts[j]).norm());
    }
    let slack = &red.cap - &w[m];
    slackness.push((cap_multiplier.as_matrix() * slack).norm());

    Ok(KktCertificate {
        multipliers,
        cap_multiplier,
        stationarity_residuals: stationarity,
        slackness_residuals: slackness,
        projection_distances,
    })
}

/// Recover candidate multipliers for a (near-)stationary reduced partition
/// by back-substitution, trying both the cap-inactive and cap-active
/// hypotheses and keeping the smaller total residual.
fn recover_for_reduced(red: &Reduced, parts: &[DMatrix<f64>]) -> Result<KktCertificate> {
    let grads = red.kkt_gradients(parts)?;
    let dim = red.dim;
    let scale = red.cap.trace() / dim as f64;

    // Hypothesis A: budget constraint inactive, M_Z = 0.
    let zero = DMatrix::zeros(dim, dim);
    let mult_a: Vec<DMatrix<f64>> = grads.iter().map(|g| -g).collect();
    let cert_a = certificate_from_multipliers(red, parts, &mult_a, &zero)?;

    // Hypothesis B: budget active; on users with interior parts the
    // stationarity equation pins M_Z = ∇_j, so average over those.
    let mut acc = DMatrix::zeros(dim, dim);
    let mut count = 0usize;
    for (j, g) in grads.iter().enumerate() {
        if crate::psdcore::min_eigenvalue(&parts[j]) > 1e-7 * scale {
            acc += g;
            count += 1;
        }
    }
    let mut cert = if count > 0 {
        let cap_raw = acc / count as f64;
        let mult_b: Vec<DMatrix<f64>> = grads.iter().map(|g| &cap_raw - g).collect();
        let cert_b = certificate_from_multipliers(red, parts, &mult_b, &cap_raw)?;
        if cert_b.max_residual() < cert_a.max_residual() {
            cert_b
        } else {
            cert_a
        }
    } else {
        cert_a
    };

    // Hypothesis C: complementary-slackness support bases. Each multiplier
    // lives on the null space of its primal block; alternating least
    // squares on the (linear) stationarity system converges fast and
    // handles partial-rank activity exactly.
    let face_tol = 1e-7 * scale;
    let null_basis = |mat: &DMatrix<f64>| -> DMatrix<f64> {
        let eig = nalgebra::SymmetricEigen::new(symmetrize(mat));
        let cols: Vec<nalgebra::DVector<f64>> = (0..dim)
            .filter(|&i| eig.eigenvalues[i] < face_tol)
            .map(|i| eig.eigenvectors.column(i).into_owned())
            .collect();
        if cols.is_empty() {
            DMatrix::zeros(dim, 0)
        } else {
            DMatrix::from_columns(&cols)
        }
    };
    let total = parts.iter().fold(DMatrix::zeros(dim, dim), |a, k| a + k);
    let slack_basis = null_basis(&(&red.cap - &total));
    let part_bases: Vec<DMatrix<f64>> = parts.iter().map(&null_basis).collect();
    let m = red.positions();
    let mut cap_c = DMatrix::zeros(dim, dim);
    let mut mult_c: Vec<DMatrix<f64>> = vec![DMatrix::zeros(dim, dim); m];
    for _ in 0..200 {
        for j in 0..m {
            let z = &part_bases[j];
            if z.ncols() > 0 {
                let a = z.transpose() * (&cap_c - &grads[j]) * z;
                mult_c[j] = z * a * z.transpose();
            }
        }
        if slack_basis.ncols() > 0 {
            let mut acc = DMatrix::zeros(dim, dim);
            for j in 0..m {
                acc += &grads[j] + &mult_c[j];
            }
            let b = slack_basis.transpose() * (acc / m as f64) * &slack_basis;
            cap_c = &slack_basis * b * slack_basis.transpose();
        }
    }
    let cert_c = certificate_from_multipliers(red, parts, &mult_c, &cap_c)?;
    if cert_c.max_residual() < cert.max_residual() {
        cert = cert_c;
    }
    Ok(cert)
}

fn expand_partition(
    users: usize,
    dim: usize,
    order: &[usize],
    reduced_parts: &[DMatrix<f64>],
) -> CovariancePartition {
    let mut parts = vec![PsdMatrix::zeros(dim); users];
    for (pos, &u) in order.iter().enumerate() {
        parts[u] = PsdMatrix::new_unchecked(reduced_parts[pos].clone());
    }
    CovariancePartition::new(parts)
}

/// Maximize `Σ μ_k R_k` over partitions with a fixed encoding order for the
/// positive-weight users (`order` lists original user indices, encoding
/// position by position). Zero-weight users receive `K = 0`.
pub fn maximize_with_order(
    ch: &AlignedChannel,
    mu: &WeightVector,
    order: &[usize],
    opts: &OptimOptions,
) -> Result<OptimResult> {
    let red = Reduced::from_channel(ch, mu, order)?;
    if opts.barrier_schedule.is_empty() {
        return Err(Error::InvalidWeights("empty barrier schedule".into()));
    }
    let m = red.positions();
    let dim = red.dim;
    let scale = red.cap.trace() / dim as f64;

    let cap_chol = Cholesky::new(red.cap.clone()).ok_or(Error::InvalidChannel(
        "covariance budget is not strictly positive definite".into(),
    ))?;
    let cap_l = cap_chol.l();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<(f64, Vec<DMatrix<f64>>, PolishOutcome)> = None;

    for restart in 0..=opts.restarts {
        // Restart 0 is the deterministic balanced interior start; the rest
        // are random feasible factor draws.
        let mut factors: Vec<DMatrix<f64>> = if restart == 0 {
            let b = &cap_l * DMatrix::identity(dim, dim) * (0.5 / m as f64).sqrt();
            vec![b; m]
        } else {
            // Random factors normalized so the drawn total sits strictly
            // inside the budget at a random usage level.
            let usage: f64 = rng.gen_range(0.2..0.9);
            let gs: Vec<DMatrix<f64>> = (0..m)
                .map(|_| rand_gaussian_matrix(&mut rng, dim, dim))
                .collect();
            let total = gs
                .iter()
                .fold(DMatrix::zeros(dim, dim), |acc, g| acc + g * g.transpose());
            let lam = crate::psdcore::max_eigenvalue(&total).max(1e-12);
            gs.into_iter()
                .map(|g| &cap_l * g * (usage / lam).sqrt())
                .collect()
        };
        // Barrier continuation locates the basin; the projected-gradient
        // polish then drives the exact stationarity system.
        for (si, &tau) in opts.barrier_schedule.iter().enumerate() {
            let stage_tol = (tau * scale * 1e-3).max(opts.grad_tol);
            let iters = if si + 1 == opts.barrier_schedule.len() {
                opts.max_iters / 2
            } else {
                opts.max_iters / 4
            };
            bb_stage(&red, &mut factors, tau * scale, stage_tol, iters)?;
        }
        truncate_factors(&mut factors, scale);
        let mut parts: Vec<DMatrix<f64>> = factors.iter().map(|b| b * b.transpose()).collect();
        let polish = pg_polish(&red, &mut parts, opts.max_iters, opts.grad_tol * scale)?;
        if let Some(obj) = red.objective(&parts) {
            if best.as_ref().is_none_or(|(b, _, _)| obj > *b) {
                best = Some((obj, parts, polish));
            }
        }
    }

    let (objective, parts, polish) =
        best.ok_or_else(|| Error::InvalidPartition("optimizer produced no feasible point".into()))?;
    let grad_norm = polish.fp_residual;

    // Certificate: multipliers read off the final projection, checked
    // against the back-substitution recovery; the smaller residual wins.
    let cert_projection =
        certificate_from_multipliers(&red, &parts, &polish.multipliers, &polish.cap_multiplier)?;
    let cert_recovered = recover_for_reduced(&red, &parts)?;
    let certificate = if cert_recovered.max_residual() < cert_projection.max_residual() {
        cert_recovered
    } else {
        cert_projection
    };

    let partition = expand_partition(ch.users(), dim, order, &parts);
    let full_order = full_encoding_order(ch.users(), mu, order);
    let rates = dpc_rates_aligned(ch, &partition, &full_order)?;
    let converged = certificate.max_residual() <= crate::psdcore::Tolerance::default().residual_tol
        || grad_norm <= opts.grad_tol;
    Ok(OptimResult {
        partition,
        rates,
        certificate,
        objective,
        converged,
        grad_norm,
    })
}

/// Full encoding order: zero-weight users first (they carry `K = 0`, so
/// their position is immaterial), then the positive users in the given
/// order.
fn full_encoding_order(users: usize, mu: &WeightVector, positive_order: &[usize]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..users).filter(|&u| mu.mu[u] == 0.0).collect();
    order.extend_from_slice(positive_order);
    order
}

/// Maximize the weighted secrecy sum with the ascending-μ encoding order.
/// Returns the best partition across restarts together with its rate point
/// and KKT certificate.
pub fn maximize_weighted_secrecy(
    ch: &AlignedChannel,
    mu: &WeightVector,
    opts: &OptimOptions,
) -> Result<OptimResult> {
    let (_, pi_prime, _) = weight_permutation(mu)?;
    maximize_with_order(ch, mu, &pi_prime, opts)
}

/// Residual report for a given partition/certificate pair under the
/// ascending-μ encoding order.
pub fn kkt_residuals(
    ch: &AlignedChannel,
    p: &CovariancePartition,
    mu: &WeightVector,
    cert: &KktCertificate,
) -> Result<KktCertificate> {
    let (_, pi_prime, m) = weight_permutation(mu)?;
    if cert.multipliers.len() != m {
        return Err(Error::InvalidCertificate(format!(
            "{} multipliers for {} positive-weight users",
            cert.multipliers.len(),
            m
        )));
    }
    let red = Reduced::from_channel(ch, mu, &pi_prime)?;
    let parts: Vec<DMatrix<f64>> = pi_prime
        .iter()
        .map(|&u| p.parts[u].as_matrix().clone())
        .collect();
    let mult_raw: Vec<DMatrix<f64>> = cert
        .multipliers
        .iter()
        .map(|mm| mm.as_matrix().clone())
        .collect();
    certificate_from_multipliers(&red, &parts, &mult_raw, cert.cap_multiplier.as_matrix())
}

/// Recover multipliers for an approximately stationary partition by
/// back-substituting the stationarity chain from the last equation, with
/// each multiplier projected to the PSD cone.
pub fn recover_multipliers(
    ch: &AlignedChannel,
    p: &CovariancePartition,
    mu: &WeightVector,
) -> Result<KktCertificate> {
    let (_, pi_prime, _) = weight_permutation(mu)?;
    let red = Reduced::from_channel(ch, mu, &pi_prime)?;
    let parts: Vec<DMatrix<f64>> = pi_prime
        .iter()
        .map(|&u| p.parts[u].as_matrix().clone())
        .collect();
    recover_for_reduced(&red, &parts)
}

/// One boundary point of a sweep.
#[derive(Debug)]
pub struct SweepPoint {
    pub mu: WeightVector,
    pub result: Result<OptimResult>,
}

/// Maximize along a grid of weight vectors; each point gets its own seed
/// derived from the sweep seed and the grid index, so the sweep is
/// deterministic and per-point failures do not abort the rest.
pub fn sweep_boundary(
    ch: &AlignedChannel,
    grid: &[WeightVector],
    opts: &OptimOptions,
) -> Vec<SweepPoint> {
    grid.iter()
        .enumerate()
        .map(|(i, mu)| {
            let mut point_opts = opts.clone();
            point_opts.seed = opts
                .seed
                .wrapping_mul(0x9e3779b97f4a7c15)
                .wrapping_add(i as u64);
            SweepPoint {
                mu: mu.clone(),
                result: maximize_weighted_secrecy(ch, mu, &point_opts),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psdcore::Tolerance;
    use crate::sampling::rand_spd;
    use approx::assert_abs_diff_eq;

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn weight_permutation_examples() {
        let (pi, pp, m) =
            weight_permutation(&WeightVector::new(vec![0.0, 1.0, 2.0]).unwrap()).unwrap();
        assert_eq!(pi, vec![0, 1, 2]);
        assert_eq!(m, 2);
        assert_eq!(pp, vec![1, 2]);

        let (_, pp, m) = weight_permutation(&WeightVector::new(vec![1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(m, 2);
        assert_eq!(pp, vec![0, 1], "ties break by ascending index");

        let (_, pp, m) =
            weight_permutation(&WeightVector::new(vec![3.0, 0.0, 1.0]).unwrap()).unwrap();
        assert_eq!(m, 2);
        assert_eq!(pp, vec![2, 0]);
    }

    #[test]
    fn weight_vector_rejects_bad_inputs() {
        assert!(WeightVector::new(vec![0.0, 0.0]).is_err());
        assert!(WeightVector::new(vec![-1.0, 1.0]).is_err());
    }

    #[test]
    fn single_user_scalar_takes_full_power() {
        let ch = AlignedChannel::new(
            PsdMatrix::from_scalar(1.0),
            vec![PsdMatrix::from_scalar(1.0)],
            PsdMatrix::from_scalar(4.0),
            &tol(),
        )
        .unwrap();
        let mu = WeightVector::new(vec![1.0]).unwrap();
        let opts = OptimOptions {
            restarts: 2,
            ..OptimOptions::default()
        };
        let out = maximize_weighted_secrecy(&ch, &mu, &opts).unwrap();
        let want = 0.5 * (1.0 + 1.0 / 1.0_f64).ln() - 0.5 * (1.0 + 1.0 / 4.0_f64).ln();
        assert_abs_diff_eq!(out.objective, want, epsilon = 1e-7);
        assert_abs_diff_eq!(
            out.partition.parts[0].as_matrix()[(0, 0)],
            1.0,
            epsilon = 1e-5
        );
        assert!(out.converged, "grad norm {}", out.grad_norm);
        assert!(out.certificate.max_residual() < 1e-8);
    }

    #[test]
    fn single_user_scalar_certificate_closed_form() {
        // Interior optimum K = P: M₁ = 0 and
        // M_Z = μ[(P+σ²)⁻¹ − (P+σ_Z²)⁻¹].
        let ch = AlignedChannel::new(
            PsdMatrix::from_scalar(1.0),
            vec![PsdMatrix::from_scalar(1.0)],
            PsdMatrix::from_scalar(4.0),
            &tol(),
        )
        .unwrap();
        let mu = WeightVector::new(vec![2.0]).unwrap();
        let p = CovariancePartition::new(vec![PsdMatrix::from_scalar(1.0)]);
        let cert = recover_multipliers(&ch, &p, &mu).unwrap();
        let m_z_want = 2.0 * (1.0 / 2.0 - 1.0 / 5.0);
        assert_abs_diff_eq!(
            cert.multipliers[0].as_matrix()[(0, 0)],
            0.0,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(
            cert.cap_multiplier.as_matrix()[(0, 0)],
            m_z_want,
            epsilon = 1e-10
        );
        assert!(cert.max_residual() < 1e-10);
    }

    #[test]
    fn perturbed_partition_breaks_stationarity() {
        let ch = AlignedChannel::new(
            PsdMatrix::from_scalar(1.0),
            vec![PsdMatrix::from_scalar(1.0)],
            PsdMatrix::from_scalar(4.0),
            &tol(),
        )
        .unwrap();
        let mu = WeightVector::new(vec![1.0]).unwrap();
        // Interior non-stationary point: no multiplier assignment can
        // satisfy the whole KKT system here.
        let p = CovariancePartition::new(vec![PsdMatrix::from_scalar(0.5)]);
        let cert = recover_multipliers(&ch, &p, &mu).unwrap();
        let report = kkt_residuals(&ch, &p, &mu, &cert).unwrap();
        assert!(
            report.max_residual() > 1e-3,
            "some KKT equation must be violated by construction, got {report:?}"
        );
    }

    #[test]
    fn recovered_multipliers_have_small_projection_distances() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let ch = AlignedChannel::new(
            rand_spd(&mut rng, 2),
            vec![rand_spd(&mut rng, 2), rand_spd(&mut rng, 2)],
            rand_spd(&mut rng, 2),
            &tol(),
        )
        .unwrap();
        let mu = WeightVector::new(vec![1.0, 2.0]).unwrap();
        let opts = OptimOptions {
            restarts: 4,
            seed: 2,
            ..OptimOptions::default()
        };
        let out = maximize_weighted_secrecy(&ch, &mu, &opts).unwrap();
        let cert = recover_multipliers(&ch, &out.partition, &mu).unwrap();
        for d in &cert.projection_distances {
            assert!(*d <= 1e-8, "projection distance {d}");
        }
    }

    #[test]
    fn strictly_interior_total_gives_zero_cap_multiplier() {
        // Single user with noise above the eavesdropper's: the optimum is
        // K = 0, strictly inside the budget, so M_Z vanishes.
        let ch = AlignedChannel::new(
            PsdMatrix::from_scalar(1.0),
            vec![PsdMatrix::from_scalar(4.0)],
            PsdMatrix::from_scalar(1.0),
            &tol(),
        )
        .unwrap();
        let mu = WeightVector::new(vec![1.0]).unwrap();
        let p = CovariancePartition::new(vec![PsdMatrix::zeros(1)]);
        let cert = recover_multipliers(&ch, &p, &mu).unwrap();
        assert!(cert.cap_multiplier.as_matrix()[(0, 0)].abs() < 1e-12);
        assert!(cert.max_residual() < 1e-10, "{cert:?}");
    }

    #[test]
    fn objective_invariant_under_user_relabeling() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let noises = vec![rand_spd(&mut rng, 2), rand_spd(&mut rng, 2)];
        let eve = rand_spd(&mut rng, 2);
        let s = rand_spd(&mut rng, 2);
        let ch = AlignedChannel::new(s.clone(), noises.clone(), eve.clone(), &tol()).unwrap();
        let swapped =
            AlignedChannel::new(s, vec![noises[1].clone(), noises[0].clone()], eve, &tol())
                .unwrap();
        let opts = OptimOptions {
            restarts: 4,
            seed: 3,
            ..OptimOptions::default()
        };
        let a = maximize_weighted_secrecy(&ch, &WeightVector::new(vec![1.0, 2.0]).unwrap(), &opts)
            .unwrap();
        let b =
            maximize_weighted_secrecy(&swapped, &WeightVector::new(vec![2.0, 1.0]).unwrap(), &opts)
                .unwrap();
        assert_abs_diff_eq!(a.objective, b.objective, epsilon = 1e-6);
    }

    #[test]
    fn weight_scaling_leaves_argmax_unchanged() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(22);
        let ch = AlignedChannel::new(
            rand_spd(&mut rng, 2),
            vec![rand_spd(&mut rng, 2), rand_spd(&mut rng, 2)],
            rand_spd(&mut rng, 2),
            &tol(),
        )
        .unwrap();
        let opts = OptimOptions {
            restarts: 3,
            seed: 5,
            ..OptimOptions::default()
        };
        let a = maximize_weighted_secrecy(&ch, &WeightVector::new(vec![1.0, 2.0]).unwrap(), &opts)
            .unwrap();
        let b = maximize_weighted_secrecy(&ch, &WeightVector::new(vec![7.0, 14.0]).unwrap(), &opts)
            .unwrap();
        assert_abs_diff_eq!(b.objective, 7.0 * a.objective, epsilon = 1e-5);
        for u in 0..2 {
            let d = (a.partition.parts[u].as_matrix() - b.partition.parts[u].as_matrix()).amax();
            assert!(d < 1e-4, "argmax drifted by {d}");
        }
    }

    #[test]
    fn optimizer_outputs_feasible_partitions() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for seed in 0..5u64 {
            let ch = AlignedChannel::new(
                rand_spd(&mut rng, 2),
                vec![rand_spd(&mut rng, 2), rand_spd(&mut rng, 2)],
                rand_spd(&mut rng, 2),
                &tol(),
            )
            .unwrap();
            let opts = OptimOptions {
                restarts: 2,
                seed,
                ..OptimOptions::default()
            };
            let out =
                maximize_weighted_secrecy(&ch, &WeightVector::new(vec![1.0, 1.5]).unwrap(), &opts)
                    .unwrap();
            out.partition
                .validate_against(&ch.input_cap, &tol())
                .expect("optimizer output must satisfy the covariance budget");
        }
    }
}
