//! Numerical checks of the information identities and matrix inequalities:
//! de Bruijn, I-MMSE, the complementary MMSE–Fisher relation, the
//! single-crossing property, the worst-additive-noise comparison, and the
//! conditional Fisher-matrix inequality suite.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::quad::adaptive_simpson;
use super::vector::{entropy_directional_fd, stein_mc, MatrixEstimate};
use super::{fisher, scalar, Estimate, EstimatorConfig, Mixture, ScalarMixture, VectorMixture};
use crate::psdcore::{symmetrize, PsdMatrix};
use crate::{Error, Result};

const LOG_2PI_E: f64 = 2.8378770664093453;

/// Two sides of an identity with their absolute difference and the
/// estimator uncertainty scale.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub stderr: f64,
}

impl IdentityCheck {
    fn new(lhs: f64, rhs: f64, stderr: f64) -> Self {
        Self {
            lhs,
            rhs,
            residual: (lhs - rhs).abs(),
            stderr,
        }
    }
}

fn min_eig_with_vector(m: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut idx = 0;
    for i in 1..eig.eigenvalues.len() {
        if eig.eigenvalues[i] < eig.eigenvalues[idx] {
            idx = i;
        }
    }
    (eig.eigenvalues[idx], eig.eigenvectors.column(idx).into())
}

/// Derivative of entropy under added noise versus half the Fisher
/// information. The scalar path differentiates `h(X+√t·N|U)` in `t` by
/// Richardson-extrapolated central differences; the vector path perturbs
/// the noise covariance along a seeded random PSD direction `Δ` and
/// compares with `½·tr(J·Δ)`.
pub fn check_de_bruijn(x: &Mixture, t: f64, cfg: &EstimatorConfig) -> Result<IdentityCheck> {
    if t <= 0.0 {
        return Err(Error::OutOfRange {
            name: "t",
            value: t,
            lo: f64::MIN_POSITIVE,
            hi: f64::INFINITY,
        });
    }
    match x {
        Mixture::Scalar(mix) => {
            let h = |tt: f64| -> Result<Estimate> { scalar::entropy(&mix.convolve(tt), cfg) };
            let e = (cfg.fd_step * t.max(1.0)).min(0.5 * t);
            let d_at = |step: f64| -> Result<Estimate> {
                let hp = h(t + step)?;
                let hm = h(t - step)?;
                Ok(Estimate {
                    value: (hp.value - hm.value) / (2.0 * step),
                    stderr: (hp.stderr + hm.stderr) / (2.0 * step),
                })
            };
            let d1 = d_at(e)?;
            let d2 = d_at(0.5 * e)?;
            let lhs = (4.0 * d2.value - d1.value) / 3.0;
            let j = scalar::fisher(&mix.convolve(t), cfg)?;
            let rhs = 0.5 * j.value;
            Ok(IdentityCheck::new(
                lhs,
                rhs,
                d1.stderr.max(d2.stderr) + 0.5 * j.stderr,
            ))
        }
        Mixture::Vector(mix) => {
            let dim = mix.dim;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xdb);
            let g = crate::sampling::rand_gaussian_matrix(&mut rng, dim, dim);
            let mut delta = symmetrize(&(&g * g.transpose()));
            delta /= delta.norm();
            let sigma = PsdMatrix::scaled_identity(dim, t);
            let eps = (cfg.fd_step * t.max(1.0)).min(0.4 * t);
            let lhs = entropy_directional_fd(mix, &sigma, &delta, eps, cfg)?;
            let j = super::vector::fisher_mc(&mix.convolve(&sigma), cfg)?;
            let rhs = 0.5 * (&j.pooled * &delta).trace();
            let rhs_se = 0.5
                * spread(
                    &j.chunks
                        .iter()
                        .map(|c| (c * &delta).trace())
                        .collect::<Vec<_>>(),
                );
            Ok(IdentityCheck::new(lhs.value, rhs, lhs.stderr + rhs_se))
        }
    }
}

fn spread(vals: &[f64]) -> f64 {
    let n = vals.len();
    if n < 2 {
        return 0.0;
    }
    let mean = vals.iter().sum::<f64>() / n as f64;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// Mutual-information increment versus the half-integral of the MMSE over
/// the SNR interval `[t1, t2]`.
pub fn check_immse(
    x: &ScalarMixture,
    t1: f64,
    t2: f64,
    cfg: &EstimatorConfig,
) -> Result<IdentityCheck> {
    if !(0.0 <= t1 && t1 <= t2) {
        return Err(Error::OutOfRange {
            name: "t1",
            value: t1,
            lo: 0.0,
            hi: t2,
        });
    }
    // I(X; √t·X + N | U) = h(√t·X + N | U) − ½·ln(2πe).
    let mi = |t: f64| -> Result<Estimate> {
        let obs = x.scaled(t.sqrt()).convolve(1.0);
        let h = scalar::entropy(&obs, cfg)?;
        Ok(Estimate {
            value: h.value - 0.5 * LOG_2PI_E,
            stderr: h.stderr,
        })
    };
    let hi = mi(t2)?;
    let lo = mi(t1)?;
    let lhs = hi.value - lo.value;
    let rhs = 0.5
        * adaptive_simpson(
            |t| scalar::mmse(x, t, cfg).unwrap_or(f64::NAN),
            t1,
            t2,
            1e-11,
        );
    Ok(IdentityCheck::new(lhs, rhs, hi.stderr + lo.stderr))
}

/// Complementary relation `J(√t·X + N) = 1 − t·mmse(X, t)`.
pub fn check_complementary(
    x: &ScalarMixture,
    t: f64,
    cfg: &EstimatorConfig,
) -> Result<IdentityCheck> {
    if t < 0.0 {
        return Err(Error::OutOfRange {
            name: "t",
            value: t,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    let obs = x.scaled(t.sqrt()).convolve(1.0);
    let j = scalar::fisher(&obs, cfg)?;
    let m = scalar::mmse(x, t, cfg)?;
    Ok(IdentityCheck::new(j.value, 1.0 - t * m, j.stderr))
}

/// Sign pattern of `f(t) = σ²/(σ²·t + 1) − mmse(X, t|U)` on a grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossingReport {
    pub values: Vec<f64>,
    pub sign_changes: usize,
    /// Grid index right after the last sign change, when one exists.
    pub crossing_index: Option<usize>,
    pub positive_after_crossing: bool,
    pub max_abs: f64,
    /// All grid values within the zero band.
    pub identically_zero: bool,
}

impl CrossingReport {
    /// The single-crossing property: at most one sign change, and positive
    /// after it.
    pub fn holds(&self) -> bool {
        self.sign_changes <= 1 && (self.sign_changes == 0 || self.positive_after_crossing)
    }
}

/// Evaluate the single-crossing function on `t_grid` and classify signs
/// with a zero band that absorbs quadrature noise.
pub fn check_single_crossing(
    x: &ScalarMixture,
    sigma_sq: f64,
    t_grid: &[f64],
    cfg: &EstimatorConfig,
) -> Result<CrossingReport> {
    if t_grid.is_empty() || t_grid.windows(2).any(|w| w[0] >= w[1]) || t_grid[0] < 0.0 {
        return Err(Error::OutOfRange {
            name: "t_grid",
            value: f64::NAN,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    let values: Vec<f64> = t_grid
        .iter()
        .map(|&t| -> Result<f64> { Ok(sigma_sq / (sigma_sq * t + 1.0) - scalar::mmse(x, t, cfg)?) })
        .collect::<Result<Vec<_>>>()?;
    let band = 1e-9 * (1.0 + sigma_sq.abs());
    let mut signs: Vec<i8> = Vec::new();
    for v in &values {
        if v.abs() <= band {
            signs.push(0);
        } else {
            signs.push(if *v > 0.0 { 1 } else { -1 });
        }
    }
    let mut sign_changes = 0;
    let mut crossing_index = None;
    let mut last_sign: i8 = 0;
    for (i, &s) in signs.iter().enumerate() {
        if s != 0 {
            if last_sign != 0 && s != last_sign {
                sign_changes += 1;
                crossing_index = Some(i);
            }
            last_sign = s;
        }
    }
    let positive_after_crossing = match crossing_index {
        Some(idx) => values[idx..].iter().all(|v| *v > -band),
        None => true,
    };
    let max_abs = values.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    Ok(CrossingReport {
        values,
        sign_changes,
        crossing_index,
        positive_after_crossing,
        max_abs,
        identically_zero: signs.iter().all(|s| *s == 0),
    })
}

/// One candidate of the worst-noise comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorstNoiseCandidate {
    pub mutual_info: Estimate,
    /// `I(candidate) − I(gaussian)`; non-negative up to noise when the
    /// Gaussian is the minimizer.
    pub margin: f64,
}

/// Gaussian-is-worst-signal comparison for `I(N; N+X)` at fixed `Cov(X)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorstNoiseReport {
    pub gaussian_value: f64,
    pub candidates: Vec<WorstNoiseCandidate>,
    pub ok: bool,
}

/// Check that a Gaussian signal minimizes `I(N; N+X)` over candidates with
/// the same covariance. The Gaussian baseline is closed-form.
pub fn check_worst_noise(
    sigma: &PsdMatrix,
    k_x: &PsdMatrix,
    candidates: &[Mixture],
    cfg: &EstimatorConfig,
) -> Result<WorstNoiseReport> {
    let dim = sigma.dim();
    if k_x.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: k_x.dim(),
        });
    }
    let gaussian_value = 0.5
        * (crate::psdcore::logdet_mat(&(sigma.as_matrix() + k_x.as_matrix()))?
            - crate::psdcore::logdet(k_x)?);
    let mut out = Vec::with_capacity(candidates.len());
    let mut ok = true;
    for cand in candidates {
        if cand.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: cand.dim(),
            });
        }
        let (cov_err, mi) = match cand {
            Mixture::Scalar(mix) => {
                let mean: f64 = mix
                    .branches
                    .iter()
                    .map(|(p, cs)| p * cs.iter().map(|c| c.weight * c.mean).sum::<f64>())
                    .sum();
                let cov = mix.second_moment() - mean * mean;
                let err = (cov - k_x.as_matrix()[(0, 0)]).abs();
                if !mix.has_density() {
                    return Err(Error::DegenerateDensity(
                        "worst-noise candidates need a density".into(),
                    ));
                }
                let h_sum = scalar::entropy(&mix.convolve(sigma.as_matrix()[(0, 0)]), cfg)?;
                let h_x = scalar::entropy(mix, cfg)?;
                (
                    err,
                    Estimate {
                        value: h_sum.value - h_x.value,
                        stderr: h_sum.stderr + h_x.stderr,
                    },
                )
            }
            Mixture::Vector(mix) => {
                let err = (mix.covariance().as_matrix() - k_x.as_matrix()).amax();
                let h_sum = super::vector::entropy_mc(&mix.convolve(sigma), cfg)?;
                let h_x = super::vector::entropy_mc(mix, cfg)?;
                (
                    err,
                    Estimate {
                        value: h_sum.value - h_x.value,
                        stderr: (h_sum.stderr * h_sum.stderr + h_x.stderr * h_x.stderr).sqrt(),
                    },
                )
            }
        };
        if cov_err > 1e-6 * (1.0 + k_x.as_matrix().amax()) {
            return Err(Error::InvalidMixture(format!(
                "candidate covariance deviates from the target by {cov_err:.3e}"
            )));
        }
        let margin = mi.value - gaussian_value;
        if margin < -3.0 * mi.stderr.max(1e-9) {
            ok = false;
        }
        out.push(WorstNoiseCandidate {
            mutual_info: mi,
            margin,
        });
    }
    Ok(WorstNoiseReport {
        gaussian_value,
        candidates: out,
        ok,
    })
}

/// Margins and residuals of the conditional Fisher-matrix toolkit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FisherInequalityReport {
    /// `‖E[ρ(X|U)]‖` — zero by the Stein identity.
    pub stein_mean_residual: Estimate,
    /// `‖E[X·ρ(X|U)ᵀ] + I‖` — zero by the Stein identity.
    pub stein_correlation_residual: Estimate,
    /// `λ_min(J(X|U) − Cov(X|U)⁻¹)` — non-negative (Cramér–Rao).
    pub cramer_rao_margin: Estimate,
    /// `λ_min([J(X|U)⁻¹+J(Y|U)⁻¹]⁻¹ − J(X+Y|U))` — non-negative (FII).
    pub fii_margin: Estimate,
    /// `λ_min(J(X+V₂)⁻¹ − Σ₂ − J(X+V₁)⁻¹ + Σ₁)` for Gaussian `V₁, V₂`
    /// with `Σ₁ ⪯ Σ₂` — non-negative.
    pub shift_margin: Estimate,
    /// `λ_min(J(X|U) − J(X|V))` under a sampled Markov chain `V → U → X` —
    /// non-negative (conditioning cannot reduce Fisher information).
    pub markov_margin: Estimate,
}

impl FisherInequalityReport {
    /// The smallest inequality margin (Stein residuals excluded).
    pub fn min_margin(&self) -> f64 {
        self.cramer_rao_margin
            .value
            .min(self.fii_margin.value)
            .min(self.shift_margin.value)
            .min(self.markov_margin.value)
    }

    /// The largest `3·stderr + tol` slack any single check needs to pass.
    pub fn all_hold(&self, tol: f64) -> bool {
        let margin_ok = |e: &Estimate| e.value >= -(tol + 3.0 * e.stderr);
        let resid_ok = |e: &Estimate| e.value <= tol + 3.0 * e.stderr;
        resid_ok(&self.stein_mean_residual)
            && resid_ok(&self.stein_correlation_residual)
            && margin_ok(&self.cramer_rao_margin)
            && margin_ok(&self.fii_margin)
            && margin_ok(&self.shift_margin)
            && margin_ok(&self.markov_margin)
    }
}

fn fisher_matrix(x: &Mixture, cfg: &EstimatorConfig) -> Result<MatrixEstimate> {
    fisher(x, cfg)
}

fn convolve_gaussian(x: &Mixture, cov: &PsdMatrix) -> Mixture {
    match x {
        Mixture::Scalar(m) => Mixture::Scalar(m.convolve(cov.as_matrix()[(0, 0)])),
        Mixture::Vector(m) => Mixture::Vector(m.convolve(cov)),
    }
}

fn flatten_mixture(x: &Mixture) -> Mixture {
    match x {
        Mixture::Scalar(m) => {
            let mut comps = Vec::new();
            for (p, branch) in &m.branches {
                for c in branch {
                    comps.push(super::ScalarComponent {
                        weight: p * c.weight,
                        mean: c.mean,
                        var: c.var,
                    });
                }
            }
            Mixture::Scalar(ScalarMixture {
                branches: vec![(1.0, comps)],
            })
        }
        Mixture::Vector(m) => Mixture::Vector(m.flatten()),
    }
}

fn sum_mixture(x: &Mixture, y: &Mixture) -> Result<Mixture> {
    match (x, y) {
        (Mixture::Scalar(a), Mixture::Scalar(b)) => {
            if a.branches.len() != b.branches.len() {
                return Err(Error::InvalidMixture(
                    "mixtures must share the branch structure".into(),
                ));
            }
            let branches = a
                .branches
                .iter()
                .zip(&b.branches)
                .map(|((p, xs), (q, ys))| {
                    if (p - q).abs() > 1e-9 {
                        return Err(Error::InvalidMixture(
                            "branch probabilities must agree".into(),
                        ));
                    }
                    let mut comps = Vec::with_capacity(xs.len() * ys.len());
                    for cx in xs {
                        for cy in ys {
                            comps.push(super::ScalarComponent {
                                weight: cx.weight * cy.weight,
                                mean: cx.mean + cy.mean,
                                var: cx.var + cy.var,
                            });
                        }
                    }
                    Ok((*p, comps))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Mixture::Scalar(ScalarMixture { branches }))
        }
        (Mixture::Vector(a), Mixture::Vector(b)) => Ok(Mixture::Vector(a.convolve_with(b)?)),
        _ => Err(Error::InvalidMixture(
            "cannot mix scalar and vector inputs".into(),
        )),
    }
}

fn cond_covariance_of(x: &Mixture) -> DMatrix<f64> {
    match x {
        Mixture::Scalar(m) => DMatrix::from_element(1, 1, m.cond_variance()),
        Mixture::Vector(m) => m.cond_covariance().as_matrix().clone(),
    }
}

/// Margin `λ_min` of an expression built from chunked estimates. The
/// reported uncertainty combines the quadratic-form spread along the pooled
/// eigenvector with the entrywise spread norm: the latter bounds the
/// systematic downward bias a minimum eigenvalue picks up from matrix noise
/// when the true margin sits at zero.
fn margin_with_stderr(
    pooled_expr: &DMatrix<f64>,
    chunk_exprs: &[DMatrix<f64>],
    fallback_se: f64,
) -> Estimate {
    let (lam, v) = min_eig_with_vector(pooled_expr);
    if chunk_exprs.is_empty() {
        return Estimate {
            value: lam,
            stderr: fallback_se,
        };
    }
    let vals: Vec<f64> = chunk_exprs
        .iter()
        .map(|m| (v.transpose() * m * &v)[(0, 0)])
        .collect();
    let dim = pooled_expr.nrows();
    let mut se_norm_sq = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            let entries: Vec<f64> = chunk_exprs.iter().map(|m| m[(i, j)]).collect();
            let se = spread(&entries);
            se_norm_sq += se * se;
        }
    }
    Estimate {
        value: lam,
        stderr: spread(&vals) + se_norm_sq.sqrt(),
    }
}

fn paired_chunks(
    a: &MatrixEstimate,
    b: &MatrixEstimate,
    f: impl Fn(&DMatrix<f64>, &DMatrix<f64>) -> DMatrix<f64>,
) -> Vec<DMatrix<f64>> {
    if a.chunks.is_empty() || b.chunks.is_empty() {
        return Vec::new();
    }
    a.chunks
        .iter()
        .zip(&b.chunks)
        .map(|(x, y)| f(x, y))
        .collect()
}

/// Run the full conditional Fisher-matrix inequality suite on a pair of
/// conditionally independent mixtures sharing the branch structure.
pub fn check_fisher_inequalities(
    x: &Mixture,
    y: &Mixture,
    cfg: &EstimatorConfig,
) -> Result<FisherInequalityReport> {
    cfg.validate()?;
    let dim = x.dim();
    if y.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: y.dim(),
        });
    }

    // Stein corollaries.
    let (stein_mean_residual, stein_correlation_residual) = match x {
        Mixture::Scalar(m) => {
            let (a, b) = scalar::stein_residuals(m, cfg);
            (
                Estimate {
                    value: a.value.abs(),
                    stderr: a.stderr,
                },
                Estimate {
                    value: b.value.abs(),
                    stderr: b.stderr,
                },
            )
        }
        Mixture::Vector(m) => {
            let (a, b) = stein_mc(m, cfg)?;
            (
                Estimate {
                    value: a.pooled.norm(),
                    stderr: a.stderr_norm(),
                },
                Estimate {
                    value: b.pooled.norm(),
                    stderr: b.stderr_norm(),
                },
            )
        }
    };

    // Cramér–Rao: J(X|U) ⪰ Cov(X|U)⁻¹, with the covariance closed-form.
    let j_x = fisher_matrix(x, cfg)?;
    let cov_inv = cond_covariance_of(x)
        .try_inverse()
        .ok_or(Error::Singular { min_eig: 0.0 })?;
    let cr_expr = &j_x.pooled - &cov_inv;
    let cr_chunks: Vec<DMatrix<f64>> = j_x.chunks.iter().map(|c| c - &cov_inv).collect();
    let cramer_rao_margin = margin_with_stderr(&cr_expr, &cr_chunks, j_x.stderr_norm());

    // Fisher information inequality on the exact sum mixture.
    let j_y = fisher_matrix(y, cfg)?;
    let j_xy = fisher_matrix(&sum_mixture(x, y)?, cfg)?;
    let fii_of = |jx: &DMatrix<f64>, jy: &DMatrix<f64>, jxy: &DMatrix<f64>| -> DMatrix<f64> {
        let hx = jx.clone().try_inverse().unwrap_or_else(|| jx.clone());
        let hy = jy.clone().try_inverse().unwrap_or_else(|| jy.clone());
        let hsum = (hx + hy)
            .try_inverse()
            .unwrap_or_else(|| DMatrix::zeros(dim, dim));
        hsum - jxy
    };
    let fii_expr = fii_of(&j_x.pooled, &j_y.pooled, &j_xy.pooled);
    let fii_chunks: Vec<DMatrix<f64>> =
        if j_x.chunks.is_empty() || j_y.chunks.is_empty() || j_xy.chunks.is_empty() {
            Vec::new()
        } else {
            (0..j_x.chunks.len())
                .map(|i| fii_of(&j_x.chunks[i], &j_y.chunks[i], &j_xy.chunks[i]))
                .collect()
        };
    let fii_margin = margin_with_stderr(
        &fii_expr,
        &fii_chunks,
        j_x.stderr_norm() + j_y.stderr_norm() + j_xy.stderr_norm(),
    );

    // Fisher shift: seeded Σ₁ ⪯ Σ₂ around the input scale.
    let flat = flatten_mixture(x);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5f);
    let scale = cond_covariance_of(x).trace() / dim as f64;
    let s1 = {
        let g = crate::sampling::rand_gaussian_matrix(&mut rng, dim, dim);
        PsdMatrix::new_unchecked(
            &g * g.transpose() * (0.5 * scale / dim as f64)
                + DMatrix::identity(dim, dim) * (0.2 * scale),
        )
    };
    let bump = {
        let g = crate::sampling::rand_gaussian_matrix(&mut rng, dim, dim);
        PsdMatrix::new_unchecked(&g * g.transpose() * (0.5 * scale / dim as f64))
    };
    let s2 = &s1 + &bump;
    let j1 = fisher_matrix(&convolve_gaussian(&flat, &s1), cfg)?;
    let j2 = fisher_matrix(&convolve_gaussian(&flat, &s2), cfg)?;
    let shift_of = |a: &DMatrix<f64>, b: &DMatrix<f64>| -> DMatrix<f64> {
        let inv2 = b.clone().try_inverse().unwrap_or_else(|| b.clone());
        let inv1 = a.clone().try_inverse().unwrap_or_else(|| a.clone());
        inv2 - s2.as_matrix() - inv1 + s1.as_matrix()
    };
    let shift_expr = shift_of(&j1.pooled, &j2.pooled);
    let shift_chunks = paired_chunks(&j1, &j2, |a, b| shift_of(a, b));
    let shift_margin = margin_with_stderr(
        &shift_expr,
        &shift_chunks,
        j1.stderr_norm() + j2.stderr_norm(),
    );

    // Markov conditioning: build V → U → X by drawing p(v|u) and comparing
    // J(X|U) with J(X|V); branch weights of X|V=v follow from Bayes.
    let markov_margin = {
        let branches: Vec<(f64, usize)> = match x {
            Mixture::Scalar(m) => m.branches.iter().map(|(p, cs)| (*p, cs.len())).collect(),
            Mixture::Vector(m) => m.branches.iter().map(|(p, cs)| (*p, cs.len())).collect(),
        };
        let n_u = branches.len();
        let n_v = 2usize;
        let mut p_v_given_u = vec![[0.0_f64; 2]; n_u];
        for row in p_v_given_u.iter_mut() {
            let a: f64 = rng.gen_range(0.05..0.95);
            row[0] = a;
            row[1] = 1.0 - a;
        }
        let mut p_v = [0.0_f64; 2];
        for (u, (p_u, _)) in branches.iter().enumerate() {
            for v in 0..n_v {
                p_v[v] += p_u * p_v_given_u[u][v];
            }
        }
        // X|V=v: branch-u components reweighted by p(u|v), flattened.
        let conditioned_on_v = |v: usize| -> Mixture {
            match x {
                Mixture::Scalar(m) => {
                    let mut comps = Vec::new();
                    for (u, (p_u, branch)) in m.branches.iter().enumerate() {
                        let w_u = p_u * p_v_given_u[u][v] / p_v[v];
                        for c in branch {
                            comps.push(super::ScalarComponent {
                                weight: w_u * c.weight,
                                mean: c.mean,
                                var: c.var,
                            });
                        }
                    }
                    Mixture::Scalar(ScalarMixture {
                        branches: vec![(1.0, comps)],
                    })
                }
                Mixture::Vector(m) => {
                    let mut comps = Vec::new();
                    for (u, (p_u, branch)) in m.branches.iter().enumerate() {
                        let w_u = p_u * p_v_given_u[u][v] / p_v[v];
                        for c in branch {
                            comps.push(super::VectorComponent {
                                weight: w_u * c.weight,
                                mean: c.mean.clone(),
                                cov: c.cov.clone(),
                            });
                        }
                    }
                    Mixture::Vector(VectorMixture {
                        dim,
                        branches: vec![(1.0, comps)],
                    })
                }
            }
        };
        let j_given_u = &j_x;
        let j_v0 = fisher_matrix(&conditioned_on_v(0), cfg)?;
        let j_v1 = fisher_matrix(&conditioned_on_v(1), cfg)?;
        let combine =
            |a: &DMatrix<f64>, b: &DMatrix<f64>| -> DMatrix<f64> { p_v[0] * a + p_v[1] * b };
        let j_given_v = combine(&j_v0.pooled, &j_v1.pooled);
        let expr = &j_given_u.pooled - &j_given_v;
        let chunks: Vec<DMatrix<f64>> =
            if j_given_u.chunks.is_empty() || j_v0.chunks.is_empty() || j_v1.chunks.is_empty() {
                Vec::new()
            } else {
                (0..j_given_u.chunks.len())
                    .map(|i| &j_given_u.chunks[i] - combine(&j_v0.chunks[i], &j_v1.chunks[i]))
                    .collect()
            };
        margin_with_stderr(
            &expr,
            &chunks,
            j_given_u.stderr_norm() + j_v0.stderr_norm() + j_v1.stderr_norm(),
        )
    };

    Ok(FisherInequalityReport {
        stein_mean_residual,
        stein_correlation_residual,
        cramer_rao_margin,
        fii_margin,
        shift_margin,
        markov_margin,
    })
}
