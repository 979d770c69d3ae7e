//! Closed-form secrecy-rate evaluation for all four channel classes.
//!
//! Every rate is a difference of two telescoping log-determinant ratios:
//! the legitimate receiver's ratio minus the eavesdropper's. Rates are in
//! nats throughout; negative dirty-paper rates are returned as-is since a
//! partition that produces them is simply not on the region boundary.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel_model::{AlignedChannel, DegradedChannel, GeneralChannel, SisoChannel};
use crate::psdcore::{loewner_leq, logdet_mat, PsdMatrix, Tolerance};
use crate::{Error, Result};

/// Ordered split of the input covariance budget into per-user PSD parts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovariancePartition {
    pub parts: Vec<PsdMatrix>,
}

impl CovariancePartition {
    pub fn new(parts: Vec<PsdMatrix>) -> Self {
        Self { parts }
    }

    pub fn users(&self) -> usize {
        self.parts.len()
    }

    pub fn dim(&self) -> usize {
        self.parts.first().map_or(0, PsdMatrix::dim)
    }

    /// Sum of all parts.
    pub fn total(&self) -> PsdMatrix {
        let dim = self.dim();
        let sum = self
            .parts
            .iter()
            .fold(DMatrix::zeros(dim, dim), |acc, k| acc + k.as_matrix());
        PsdMatrix::new_unchecked(sum)
    }

    /// Check `ΣK_i ⪯ cap` and dimensional consistency (each part is PSD by
    /// construction of [`PsdMatrix`]).
    pub fn validate_against(&self, cap: &PsdMatrix, tol: &Tolerance) -> Result<()> {
        if self.parts.is_empty() {
            return Err(Error::InvalidPartition("no parts".into()));
        }
        let dim = cap.dim();
        if self.parts.iter().any(|k| k.dim() != dim) {
            return Err(Error::InvalidPartition(
                "part dimension does not match the budget".into(),
            ));
        }
        if !loewner_leq(&self.total(), cap, tol)? {
            return Err(Error::InvalidPartition(
                "parts exceed the covariance budget".into(),
            ));
        }
        Ok(())
    }
}

/// Per-user secrecy rates (nats) with the encoding order that produced
/// them, and optionally the dummy rates absorbed by the eavesdropper.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatePoint {
    /// Secrecy rate of user `u` in `rates[u]`.
    pub rates: Vec<f64>,
    /// Dummy (confusion) rate of user `u`, each non-negative.
    pub dummy_rates: Option<Vec<f64>>,
    /// Encoding permutation: position `k` in the successive-encoding chain
    /// carries user `order[k]`.
    pub order: Vec<usize>,
}

impl RatePoint {
    pub fn weighted_sum(&self, weights: &[f64]) -> f64 {
        self.rates.iter().zip(weights).map(|(r, w)| r * w).sum()
    }
}

fn check_permutation(order: &[usize], users: usize) -> Result<()> {
    if order.len() != users {
        return Err(Error::InvalidPermutation(format!(
            "length {} for {} users",
            order.len(),
            users
        )));
    }
    let mut seen = vec![false; users];
    for &u in order {
        if u >= users || seen[u] {
            return Err(Error::InvalidPermutation(format!("bad entry {u}")));
        }
        seen[u] = true;
    }
    Ok(())
}

/// Identity permutation.
pub fn identity_order(users: usize) -> Vec<usize> {
    (0..users).collect()
}

/// `½·log(|num|/|den|)`.
fn half_logdet_ratio(num: &DMatrix<f64>, den: &DMatrix<f64>) -> Result<f64> {
    Ok(0.5 * (logdet_mat(num)? - logdet_mat(den)?))
}

/// Two-user scalar rates at power split `α ∈ [0,1]`: the stronger user
/// transmits with power `αP`, the weaker sees it as interference.
pub fn siso_rates(ch: &SisoChannel, alpha: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::OutOfRange {
            name: "alpha",
            value: alpha,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let p = ch.power;
    let abar = 1.0 - alpha;
    let r1 =
        0.5 * (1.0 + alpha * p / ch.sigma1_sq).ln() - 0.5 * (1.0 + alpha * p / ch.sigma_z_sq).ln();
    let r2 = 0.5 * (1.0 + abar * p / (alpha * p + ch.sigma2_sq)).ln()
        - 0.5 * (1.0 + abar * p / (alpha * p + ch.sigma_z_sq)).ln();
    Ok((r1, r2))
}

/// Core of the dirty-paper chain: position `k` (1-based in the formulas)
/// sees signal prefix `W_k = Σ_{i≤k} K_{order[i]}`, and the rate at that
/// position is the receiver's log-det increment minus the eavesdropper's.
/// Gains are applied when present (`obs = H·W·Hᵀ + Σ`).
fn dpc_chain(
    parts: &[PsdMatrix],
    order: &[usize],
    receiver_obs: impl Fn(usize, &DMatrix<f64>) -> DMatrix<f64>,
    eve_obs: impl Fn(&DMatrix<f64>) -> DMatrix<f64>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let users = parts.len();
    let dim = parts[0].dim();
    let mut prefix = DMatrix::zeros(dim, dim);
    let mut rates = vec![0.0; users];
    let mut dummies = vec![0.0; users];
    for &user in order {
        let next = &prefix + parts[user].as_matrix();
        let legit = half_logdet_ratio(&receiver_obs(user, &next), &receiver_obs(user, &prefix))?;
        let eve = half_logdet_ratio(&eve_obs(&next), &eve_obs(&prefix))?;
        rates[user] = legit - eve;
        dummies[user] = eve;
        prefix = next;
    }
    Ok((rates, dummies))
}

/// Degraded-channel rates: identity encoding order, each rate
/// non-negative thanks to the noise ordering.
pub fn degraded_rates(ch: &DegradedChannel, p: &CovariancePartition) -> Result<RatePoint> {
    let tol = Tolerance::default();
    p.validate_against(&ch.input_cap, &tol)?;
    if p.users() != ch.users() {
        return Err(Error::InvalidPartition(format!(
            "{} parts for {} users",
            p.users(),
            ch.users()
        )));
    }
    let order = identity_order(ch.users());
    let (rates, dummies) = dpc_chain(
        &p.parts,
        &order,
        |u, w| w + ch.receiver_noises[u].as_matrix(),
        |w| w + ch.eve_noise.as_matrix(),
    )?;
    Ok(RatePoint {
        rates,
        dummy_rates: Some(dummies),
        order,
    })
}

/// Dirty-paper rates on an aligned channel under encoding order `pi`
/// (position `k` carries user `pi[k]`). Rates may be negative for
/// unfavorable partitions.
pub fn dpc_rates_aligned(
    ch: &AlignedChannel,
    p: &CovariancePartition,
    pi: &[usize],
) -> Result<RatePoint> {
    let tol = Tolerance::default();
    p.validate_against(&ch.input_cap, &tol)?;
    check_permutation(pi, ch.users())?;
    if p.users() != ch.users() {
        return Err(Error::InvalidPartition(format!(
            "{} parts for {} users",
            p.users(),
            ch.users()
        )));
    }
    let (rates, dummies) = dpc_chain(
        &p.parts,
        pi,
        |u, w| w + ch.receiver_noises[u].as_matrix(),
        |w| w + ch.eve_noise.as_matrix(),
    )?;
    Ok(RatePoint {
        rates,
        dummy_rates: Some(dummies),
        order: pi.to_vec(),
    })
}

/// Dirty-paper rates on a general channel: signal prefixes are observed
/// through the gains, `H_u·W·H_uᵀ + Σ_u` and `H_Z·W·H_Zᵀ + Σ_Z`.
pub fn dpc_rates_general(
    ch: &GeneralChannel,
    p: &CovariancePartition,
    pi: &[usize],
) -> Result<RatePoint> {
    let tol = Tolerance::default();
    p.validate_against(&ch.input_cap, &tol)?;
    check_permutation(pi, ch.users())?;
    if p.users() != ch.users() {
        return Err(Error::InvalidPartition(format!(
            "{} parts for {} users",
            p.users(),
            ch.users()
        )));
    }
    let (rates, dummies) = dpc_chain(
        &p.parts,
        pi,
        |u, w| {
            let h = &ch.gains[u];
            h * w * h.transpose() + ch.receiver_noises[u].as_matrix()
        },
        |w| {
            let hz = &ch.eve_gain;
            hz * w * hz.transpose() + ch.eve_noise.as_matrix()
        },
    )?;
    Ok(RatePoint {
        rates,
        dummy_rates: Some(dummies),
        order: pi.to_vec(),
    })
}

/// Dummy-rate accounting: user `u`'s confusion rate is the eavesdropper's
/// log-det increment at `u`'s encoding position. All non-negative, and they
/// telescope to `½·log|ΣK + Σ_Z|/|Σ_Z|`.
pub fn dummy_rates(
    ch_eve_noise: &PsdMatrix,
    eve_gain: Option<&DMatrix<f64>>,
    p: &CovariancePartition,
    pi: &[usize],
) -> Result<Vec<f64>> {
    check_permutation(pi, p.users())?;
    let dim = p.dim();
    let obs = |w: &DMatrix<f64>| -> DMatrix<f64> {
        match eve_gain {
            Some(hz) => hz * w * hz.transpose() + ch_eve_noise.as_matrix(),
            None => w + ch_eve_noise.as_matrix(),
        }
    };
    let mut prefix = DMatrix::zeros(dim, dim);
    let mut dummies = vec![0.0; p.users()];
    for &user in pi {
        let next = &prefix + p.parts[user].as_matrix();
        dummies[user] = half_logdet_ratio(&obs(&next), &obs(&prefix))?;
        prefix = next;
    }
    Ok(dummies)
}

/// The rate each legitimate receiver can decode at its encoding position:
/// secrecy rate plus dummy rate, i.e. the receiver-side log-det increment.
pub fn decodable_rates(
    ch: &AlignedChannel,
    p: &CovariancePartition,
    pi: &[usize],
) -> Result<Vec<f64>> {
    check_permutation(pi, ch.users())?;
    let dim = p.dim();
    let mut prefix = DMatrix::zeros(dim, dim);
    let mut out = vec![0.0; ch.users()];
    for &user in pi {
        let next = &prefix + p.parts[user].as_matrix();
        out[user] = half_logdet_ratio(
            &(&next + ch.receiver_noises[user].as_matrix()),
            &(&prefix + ch.receiver_noises[user].as_matrix()),
        )?;
        prefix = next;
    }
    Ok(out)
}
