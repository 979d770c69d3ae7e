//! Construction and verification of the enhanced degraded channel.
//!
//! Given a KKT-stationary partition of an aligned channel, each
//! positive-weight user's noise is shrunk to
//! `Σ̃_{j+1} = [(W_j + Σ_{j+1})⁻¹ + M_{j+1}/μ_{j+1}]⁻¹ − W_j`
//! (`W_j` the signal prefix sum). The shrunk noises form a Loewner chain
//! below the eavesdropper's noise, preserve every per-user rate at the
//! stationary partition, and keep the budget identity
//! `(S+Σ̃_m)(W_m+Σ̃_m)⁻¹ = (S+Σ_Z)(W_m+Σ_Z)⁻¹`, which together make the
//! degraded region of the shrunk channel touch the original region at the
//! optimized boundary point.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::boundary_opt::{weight_permutation, KktCertificate, WeightVector};
use crate::channel_model::{AlignedChannel, DegradedChannel};
use crate::psdcore::{
    loewner_margin, min_eigenvalue, psd_project, spd_inverse, symmetrize, PsdMatrix, Tolerance,
};
use crate::rate_eval::{dpc_rates_aligned, identity_order, CovariancePartition};
use crate::sampling::partition_search_max;
use crate::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Multipliers with min eigenvalue above this are PSD-projected before the
/// enhancement formula; anything worse is rejected as an invalid
/// certificate.
const MULTIPLIER_INDEFINITENESS_CAP: f64 = 1e-9;

/// Enhanced noise covariances for the positive-weight users (ascending-μ
/// encoding order) plus the shrink factors for zero-weight users.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnhancedNoise {
    /// `Σ̃_1 ⪯ … ⪯ Σ̃_m`, one per positive-weight user in encoding order.
    pub sigmas_tilde: Vec<PsdMatrix>,
    /// `α ∈ (0,1]` per zero-weight user (original user order preserved):
    /// the user's stand-in noise in the degraded extension is `α·Σ̃_1`.
    pub alphas: Vec<f64>,
    /// Original user index carried at each encoding position.
    pub encoding_order: Vec<usize>,
}

struct ReducedView {
    parts: Vec<DMatrix<f64>>,
    noises: Vec<DMatrix<f64>>,
    weights: Vec<f64>,
    order: Vec<usize>,
}

fn reduce(ch: &AlignedChannel, p: &CovariancePartition, mu: &WeightVector) -> Result<ReducedView> {
    if mu.users() != ch.users() || p.users() != ch.users() {
        return Err(Error::InvalidWeights(format!(
            "expected {} users, got {} weights / {} parts",
            ch.users(),
            mu.users(),
            p.users()
        )));
    }
    let (_, pi_prime, _) = weight_permutation(mu)?;
    Ok(ReducedView {
        parts: pi_prime
            .iter()
            .map(|&u| p.parts[u].as_matrix().clone())
            .collect(),
        noises: pi_prime
            .iter()
            .map(|&u| ch.receiver_noises[u].as_matrix().clone())
            .collect(),
        weights: pi_prime.iter().map(|&u| mu.mu[u]).collect(),
        order: pi_prime,
    })
}

fn prefixes(parts: &[DMatrix<f64>], dim: usize) -> Vec<DMatrix<f64>> {
    let mut out = vec![DMatrix::zeros(dim, dim)];
    for k in parts {
        let next = out.last().expect("non-empty") + k;
        out.push(next);
    }
    out
}

/// Build the enhanced noises from a certificate. The certificate's
/// residuals must already be within `residual_tol`; slightly indefinite
/// multipliers are PSD-projected, larger violations rejected.
pub fn enhance(
    ch: &AlignedChannel,
    p: &CovariancePartition,
    cert: &KktCertificate,
    mu: &WeightVector,
) -> Result<EnhancedNoise> {
    let tol = Tolerance::default();
    let red = reduce(ch, p, mu)?;
    let m = red.order.len();
    if cert.multipliers.len() != m {
        return Err(Error::InvalidCertificate(format!(
            "{} multipliers for {} positive-weight users",
            cert.multipliers.len(),
            m
        )));
    }
    if cert.max_residual() > 10.0 * tol.residual_tol {
        return Err(Error::InvalidCertificate(format!(
            "certificate residual {:.3e} exceeds tolerance",
            cert.max_residual()
        )));
    }
    let mut multipliers = Vec::with_capacity(m);
    for mm in &cert.multipliers {
        let min_eig = mm.min_eigenvalue();
        if min_eig < -MULTIPLIER_INDEFINITENESS_CAP {
            return Err(Error::InvalidCertificate(format!(
                "multiplier min eigenvalue {min_eig:.3e} too negative"
            )));
        }
        let (proj, _) = psd_project(mm.as_matrix());
        multipliers.push(proj);
    }

    let dim = ch.dim();
    let w = prefixes(&red.parts, dim);
    let mut sigmas_tilde = Vec::with_capacity(m);
    for j in 0..m {
        let base = spd_inverse(&(&w[j] + &red.noises[j]))?;
        let shifted = base + &multipliers[j] / red.weights[j];
        let inv = spd_inverse(&shifted).map_err(|_| {
            Error::InvalidCertificate("non-PSD intermediate inverse in enhancement".into())
        })?;
        sigmas_tilde.push(PsdMatrix::new_unchecked(symmetrize(&(inv - &w[j]))));
    }
    if !sigmas_tilde[0].is_strictly_positive(&tol) {
        return Err(Error::InvalidCertificate(format!(
            "enhanced noise for the first encoded user is not strictly positive \
             (min eigenvalue {:.3e})",
            sigmas_tilde[0].min_eigenvalue()
        )));
    }

    // Shrink factors for zero-weight users: the largest α ∈ (0,1] with
    // α·Σ̃_1 ⪯ Σ_k, which is 1/λ_max(L⁻¹·Σ̃_1·L⁻ᵀ) for Σ_k = LLᵀ.
    let mut alphas = Vec::new();
    for u in 0..ch.users() {
        if mu.mu[u] > 0.0 {
            continue;
        }
        let chol = nalgebra::Cholesky::new(ch.receiver_noises[u].as_matrix().clone()).ok_or(
            Error::InvalidChannel(format!("receiver {} noise is singular", u + 1)),
        )?;
        let l_inv = chol
            .l()
            .try_inverse()
            .ok_or(Error::Singular { min_eig: 0.0 })?;
        let whitened = symmetrize(&(&l_inv * sigmas_tilde[0].as_matrix() * l_inv.transpose()));
        let lam = crate::psdcore::max_eigenvalue(&whitened);
        if !(lam.is_finite() && lam > 0.0) {
            return Err(Error::InvalidCertificate(
                "no feasible shrink factor for a zero-weight user".into(),
            ));
        }
        alphas.push((1.0 / lam).min(1.0));
    }

    Ok(EnhancedNoise {
        sigmas_tilde,
        alphas,
        encoding_order: red.order,
    })
}

/// Residuals of the five enhancement properties.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnhancementReport {
    /// (1) `Σ̃_j ⪯ Σ_j`: worst negative Loewner margin, as a magnitude.
    pub shrink_residual: f64,
    /// (2) `0 ≺ Σ̃_1 ⪯ … ⪯ Σ̃_m ⪯ Σ_Z`: worst chain violation.
    pub chain_residual: f64,
    /// (3) stationarity re-expressed with the enhanced noises.
    pub stationarity_residual: f64,
    /// (4) per-user rate preservation as a matrix identity.
    pub rate_preservation_residual: f64,
    /// (5) the budget identity tying `Σ̃_m` to `Σ_Z` at full power.
    pub budget_identity_residual: f64,
}

impl EnhancementReport {
    pub fn residuals(&self) -> [f64; 5] {
        [
            self.shrink_residual,
            self.chain_residual,
            self.stationarity_residual,
            self.rate_preservation_residual,
            self.budget_identity_residual,
        ]
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals().iter().fold(0.0_f64, |a, &b| a.max(b))
    }
}

/// Verify the five properties of the enhanced noises at the partition the
/// certificate was issued for.
pub fn verify_enhancement(
    ch: &AlignedChannel,
    p: &CovariancePartition,
    cert: &KktCertificate,
    mu: &WeightVector,
    enh: &EnhancedNoise,
) -> Result<EnhancementReport> {
    let red = reduce(ch, p, mu)?;
    let m = red.order.len();
    if enh.sigmas_tilde.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: enh.sigmas_tilde.len(),
        });
    }
    let dim = ch.dim();
    let w = prefixes(&red.parts, dim);
    let eve = ch.eve_noise.as_matrix();
    let tilde: Vec<&DMatrix<f64>> = enh.sigmas_tilde.iter().map(|s| s.as_matrix()).collect();

    // (1) Each enhanced noise sits below the original.
    let mut shrink = 0.0_f64;
    for (t_j, noise_j) in tilde.iter().zip(&red.noises) {
        shrink = shrink.max(-loewner_margin(t_j, noise_j).min(0.0));
    }

    // (2) Strict positivity at the bottom, chain up to the eavesdropper.
    let mut chain = (-min_eigenvalue(tilde[0])).max(0.0);
    for j in 0..m - 1 {
        chain = chain.max(-loewner_margin(tilde[j], tilde[j + 1]).min(0.0));
    }
    chain = chain.max(-loewner_margin(tilde[m - 1], eve).min(0.0));

    // (3) Stationarity with the enhanced noises replacing the originals.
    let inv = |mat: DMatrix<f64>| -> Result<DMatrix<f64>> { spd_inverse(&mat) };
    let mut stat = 0.0_f64;
    for j in 0..m - 1 {
        let lhs = red.weights[j] * inv(&w[j + 1] + tilde[j])?
            + (red.weights[j + 1] - red.weights[j]) * inv(&w[j + 1] + eve)?;
        let rhs = red.weights[j + 1] * inv(&w[j + 1] + tilde[j + 1])?;
        stat = stat.max((lhs - rhs).norm());
    }
    let lhs = red.weights[m - 1] * inv(&w[m] + tilde[m - 1])?;
    let rhs = red.weights[m - 1] * inv(&w[m] + eve)? + cert.cap_multiplier.as_matrix();
    stat = stat.max((lhs - rhs).norm());

    // (4) Rate preservation: the enhanced and original per-user determinant
    // ratios coincide as a matrix identity.
    let mut rate = 0.0_f64;
    for j in 0..m {
        let enh_side = inv(&w[j + 1] + tilde[j])? * (&w[j] + tilde[j]);
        let orig_side = inv(&w[j + 1] + &red.noises[j])? * (&w[j] + &red.noises[j]);
        rate = rate.max((enh_side - orig_side).norm());
    }

    // (5) Budget identity at full power.
    let s = ch.input_cap.as_matrix();
    let lhs = (s + tilde[m - 1]) * inv(&w[m] + tilde[m - 1])?;
    let rhs = (s + eve) * inv(&w[m] + eve)?;
    let budget = (lhs - rhs).norm();

    Ok(EnhancementReport {
        shrink_residual: shrink,
        chain_residual: chain,
        stationarity_residual: stat,
        rate_preservation_residual: rate,
        budget_identity_residual: budget,
    })
}

/// The degraded channel extending the enhancement to all users, together
/// with the user order its receivers are listed in.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DegradedExtension {
    pub channel: DegradedChannel,
    /// Original user index of each receiver position in the degraded chain.
    pub user_order: Vec<usize>,
}

/// Extend the enhanced noises to a full degraded channel: zero-weight users
/// receive `α·Σ̃_1` and are ordered by ascending α ahead of the enhanced
/// chain so the Loewner ordering holds end to end.
pub fn build_degraded_extension(
    ch: &AlignedChannel,
    enh: &EnhancedNoise,
    mu: &WeightVector,
) -> Result<DegradedExtension> {
    let tol = Tolerance::default();
    let zero_users: Vec<usize> = (0..ch.users()).filter(|&u| mu.mu[u] == 0.0).collect();
    if zero_users.len() != enh.alphas.len() {
        return Err(Error::DimensionMismatch {
            expected: zero_users.len(),
            found: enh.alphas.len(),
        });
    }
    let mut fronted: Vec<(f64, usize)> = enh.alphas.iter().copied().zip(zero_users).collect();
    fronted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut noises = Vec::with_capacity(ch.users());
    let mut user_order = Vec::with_capacity(ch.users());
    for (alpha, u) in &fronted {
        noises.push(PsdMatrix::new_unchecked(
            enh.sigmas_tilde[0].as_matrix() * *alpha,
        ));
        user_order.push(*u);
    }
    for (pos, sigma) in enh.sigmas_tilde.iter().enumerate() {
        noises.push(sigma.clone());
        user_order.push(enh.encoding_order[pos]);
    }
    // Enhancement numerics can leave chain margins a hair below zero; the
    // degraded constructor's tolerance-aware ordering check absorbs ties
    // but not real violations.
    let channel = DegradedChannel::new(ch.input_cap.clone(), noises, ch.eve_noise.clone(), &tol)?;
    Ok(DegradedExtension {
        channel,
        user_order,
    })
}

/// Configuration of the brute-force search inside [`touching_point_check`].
#[derive(Debug, Clone)]
pub struct TouchingConfig {
    pub search_samples: usize,
    pub seed: u64,
    /// Allowed excess of the search over the certified value.
    pub search_tol: f64,
}

impl Default for TouchingConfig {
    fn default() -> Self {
        Self {
            search_samples: 100_000,
            seed: 0,
            search_tol: 1e-4,
        }
    }
}

/// Outcome of the touching-point confirmation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TouchingReport {
    /// Weighted dirty-paper sum on the original channel at the partition.
    pub weighted_original: f64,
    /// Weighted degraded sum on the enhanced channel at the same partition.
    pub weighted_enhanced: f64,
    /// `|weighted_enhanced − weighted_original|`.
    pub equality_gap: f64,
    /// Best weighted sum a random partition search found on the enhanced
    /// degraded channel.
    pub search_best: f64,
    /// How far the search exceeded the certified value (0 when it did not).
    pub search_excess: f64,
    pub ok: bool,
}

/// Confirm that the enhanced degraded channel touches the original region
/// at the certified partition: the weighted sums agree, and a brute-force
/// partition search on the enhanced channel cannot beat them by more than
/// the search tolerance.
pub fn touching_point_check(
    ch: &AlignedChannel,
    p: &CovariancePartition,
    mu: &WeightVector,
    enh: &EnhancedNoise,
    cfg: &TouchingConfig,
) -> Result<TouchingReport> {
    let tol = Tolerance::default();
    let red = reduce(ch, p, mu)?;
    let m = red.order.len();

    // The enhanced channel over the positive-weight users; identity
    // encoding order matches the ascending-μ chain.
    let enhanced = AlignedChannel::new(
        ch.input_cap.clone(),
        enh.sigmas_tilde.clone(),
        ch.eve_noise.clone(),
        &tol,
    )?;
    let reduced_partition = CovariancePartition::new(
        red.parts
            .iter()
            .map(|k| PsdMatrix::new_unchecked(k.clone()))
            .collect(),
    );
    let enhanced_rates = dpc_rates_aligned(&enhanced, &reduced_partition, &identity_order(m))?;
    let weighted_enhanced: f64 = enhanced_rates
        .rates
        .iter()
        .zip(&red.weights)
        .map(|(r, w)| r * w)
        .sum();

    let original = AlignedChannel::new(
        ch.input_cap.clone(),
        red.noises
            .iter()
            .map(|n| PsdMatrix::new_unchecked(n.clone()))
            .collect(),
        ch.eve_noise.clone(),
        &tol,
    )?;
    let original_rates = dpc_rates_aligned(&original, &reduced_partition, &identity_order(m))?;
    let weighted_original: f64 = original_rates
        .rates
        .iter()
        .zip(&red.weights)
        .map(|(r, w)| r * w)
        .sum();

    let equality_gap = (weighted_enhanced - weighted_original).abs();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let weights = red.weights.clone();
    let search_best =
        partition_search_max(&mut rng, &ch.input_cap, m, cfg.search_samples, |parts| {
            let cp = CovariancePartition::new(parts.to_vec());
            dpc_rates_aligned(&enhanced, &cp, &identity_order(m))
                .ok()
                .map(|rp| rp.rates.iter().zip(&weights).map(|(r, w)| r * w).sum())
        });
    let search_excess = (search_best - weighted_enhanced).max(0.0);
    let ok = equality_gap <= tol.residual_tol.max(1e-8) && search_excess <= cfg.search_tol;
    Ok(TouchingReport {
        weighted_original,
        weighted_enhanced,
        equality_gap,
        search_best,
        search_excess,
        ok,
    })
}

/// Machine-checkable record of a certified boundary point: channel echo,
/// partition, multipliers, enhanced noises and the residual table. A
/// verifier can re-check every property from this file alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryCertificate {
    pub channel: crate::channel_model::ChannelJson,
    pub mu: Vec<f64>,
    /// Per-user covariance parts, row-major.
    pub partition: Vec<Vec<Vec<f64>>>,
    /// Multipliers on the positive-weight users' parts, encoding order.
    pub multipliers: Vec<Vec<Vec<f64>>>,
    pub cap_multiplier: Vec<Vec<f64>>,
    /// Enhanced noises `Σ̃_1 ⪯ … ⪯ Σ̃_m`, encoding order.
    pub enhanced_noises: Vec<Vec<Vec<f64>>>,
    /// Shrink factors for the zero-weight users.
    pub shrink_factors: Vec<f64>,
    pub residuals: CertificateResiduals,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateResiduals {
    pub stationarity: Vec<f64>,
    pub slackness: Vec<f64>,
    pub enhancement: Vec<f64>,
    pub touching_equality_gap: f64,
    pub touching_search_excess: f64,
}

impl BoundaryCertificate {
    pub fn max_residual(&self) -> f64 {
        self.residuals
            .stationarity
            .iter()
            .chain(&self.residuals.slackness)
            .chain(&self.residuals.enhancement)
            .chain(std::iter::once(&self.residuals.touching_equality_gap))
            .fold(0.0_f64, |a, &b| a.max(b))
    }

    /// Assemble from the channel, weights, certificate pieces and reports.
    pub fn assemble(
        ch: &AlignedChannel,
        mu: &WeightVector,
        partition: &CovariancePartition,
        cert: &KktCertificate,
        enh: &EnhancedNoise,
        report: &EnhancementReport,
        touching: &TouchingReport,
    ) -> Self {
        use crate::channel_model::matrix_to_rows;
        Self {
            channel: crate::channel_model::ChannelSpec::Aligned(ch.clone()).to_json(),
            mu: mu.mu.clone(),
            partition: partition
                .parts
                .iter()
                .map(|k| matrix_to_rows(k.as_matrix()))
                .collect(),
            multipliers: cert
                .multipliers
                .iter()
                .map(|m| matrix_to_rows(m.as_matrix()))
                .collect(),
            cap_multiplier: matrix_to_rows(cert.cap_multiplier.as_matrix()),
            enhanced_noises: enh
                .sigmas_tilde
                .iter()
                .map(|s| matrix_to_rows(s.as_matrix()))
                .collect(),
            shrink_factors: enh.alphas.clone(),
            residuals: CertificateResiduals {
                stationarity: cert.stationarity_residuals.clone(),
                slackness: cert.slackness_residuals.clone(),
                enhancement: report.residuals().to_vec(),
                touching_equality_gap: touching.equality_gap,
                touching_search_excess: touching.search_excess,
            },
        }
    }
}
