//! Channel descriptions, structural validation, and the reduction chain
//! general → square → aligned.
//!
//! The square form gives every terminal the full input dimension `t` with
//! gain `Λ̂·V` (orthonormal `V`, diagonal `Λ̂` whose leading entries are zero
//! where the original gain lost rank) and block-diagonal noise. Dirty-paper
//! rates are invariant under the transformation. Perturbing the zero block
//! of `Λ̂` by `α > 0` makes the gain invertible, which turns the channel into
//! an aligned one whose rates converge to the square channel's as `α → 0`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::psdcore::{loewner_margin, spd_inverse, symmetrize, PsdMatrix, Tolerance};
use crate::{Error, Result};

/// Two-user scalar wiretap channel with ordered noise variances.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SisoChannel {
    /// Input power budget.
    pub power: f64,
    /// Noise variance at the stronger receiver.
    pub sigma1_sq: f64,
    /// Noise variance at the weaker receiver.
    pub sigma2_sq: f64,
    /// Noise variance at the eavesdropper.
    pub sigma_z_sq: f64,
}

impl SisoChannel {
    pub fn new(power: f64, sigma1_sq: f64, sigma2_sq: f64, sigma_z_sq: f64) -> Result<Self> {
        let ch = Self {
            power,
            sigma1_sq,
            sigma2_sq,
            sigma_z_sq,
        };
        let report = validate(&ChannelSpec::Siso(ch.clone()), &Tolerance::default());
        if report.is_clean() {
            Ok(ch)
        } else {
            Err(Error::InvalidChannel(report.to_string()))
        }
    }
}

/// Degraded vector channel: noise covariances form a Loewner chain up to the
/// eavesdropper.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DegradedChannel {
    /// Input covariance cap, strictly positive definite.
    pub input_cap: PsdMatrix,
    /// Receiver noise covariances, ordered `0 ≺ Σ₁ ⪯ … ⪯ Σ_K`.
    pub receiver_noises: Vec<PsdMatrix>,
    /// Eavesdropper noise covariance, dominating the chain.
    pub eve_noise: PsdMatrix,
    /// Eigenvalue margins certifying the ordering at construction:
    /// min eig of `Σ₁`, of each `Σ_{k+1} − Σ_k`, and of `Σ_Z − Σ_K`.
    pub ordering_margins: Vec<f64>,
}

impl DegradedChannel {
    pub fn new(
        input_cap: PsdMatrix,
        receiver_noises: Vec<PsdMatrix>,
        eve_noise: PsdMatrix,
        tol: &Tolerance,
    ) -> Result<Self> {
        let mut ch = Self {
            input_cap,
            receiver_noises,
            eve_noise,
            ordering_margins: Vec::new(),
        };
        let report = validate(&ChannelSpec::Degraded(ch.clone()), tol);
        if !report.is_clean() {
            return Err(Error::InvalidChannel(report.to_string()));
        }
        ch.ordering_margins = ch.compute_margins();
        Ok(ch)
    }

    fn compute_margins(&self) -> Vec<f64> {
        let mut margins = vec![self.receiver_noises[0].min_eigenvalue()];
        for w in self.receiver_noises.windows(2) {
            margins.push(loewner_margin(w[0].as_matrix(), w[1].as_matrix()));
        }
        margins.push(loewner_margin(
            self.receiver_noises
                .last()
                .expect("at least one receiver")
                .as_matrix(),
            self.eve_noise.as_matrix(),
        ));
        margins
    }

    pub fn users(&self) -> usize {
        self.receiver_noises.len()
    }

    pub fn dim(&self) -> usize {
        self.input_cap.dim()
    }
}

/// Aligned vector channel: identity gains, strictly positive definite noise
/// covariances with no ordering assumption.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignedChannel {
    pub input_cap: PsdMatrix,
    pub receiver_noises: Vec<PsdMatrix>,
    pub eve_noise: PsdMatrix,
}

impl AlignedChannel {
    pub fn new(
        input_cap: PsdMatrix,
        receiver_noises: Vec<PsdMatrix>,
        eve_noise: PsdMatrix,
        tol: &Tolerance,
    ) -> Result<Self> {
        let ch = Self {
            input_cap,
            receiver_noises,
            eve_noise,
        };
        let report = validate(&ChannelSpec::Aligned(ch.clone()), tol);
        if report.is_clean() {
            Ok(ch)
        } else {
            Err(Error::InvalidChannel(report.to_string()))
        }
    }

    pub fn users(&self) -> usize {
        self.receiver_noises.len()
    }

    pub fn dim(&self) -> usize {
        self.input_cap.dim()
    }
}

/// General vector channel with per-terminal gain matrices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneralChannel {
    /// Input covariance cap (t×t), positive semi-definite.
    pub input_cap: PsdMatrix,
    /// Receiver gains, `r_k × t`.
    pub gains: Vec<DMatrix<f64>>,
    /// Receiver noise covariances, `r_k × r_k`, strictly positive definite.
    pub receiver_noises: Vec<PsdMatrix>,
    /// Eavesdropper gain, `r_Z × t`.
    pub eve_gain: DMatrix<f64>,
    /// Eavesdropper noise covariance.
    pub eve_noise: PsdMatrix,
}

impl GeneralChannel {
    pub fn new(
        input_cap: PsdMatrix,
        gains: Vec<DMatrix<f64>>,
        receiver_noises: Vec<PsdMatrix>,
        eve_gain: DMatrix<f64>,
        eve_noise: PsdMatrix,
        tol: &Tolerance,
    ) -> Result<Self> {
        let ch = Self {
            input_cap,
            gains,
            receiver_noises,
            eve_gain,
            eve_noise,
        };
        let report = validate(&ChannelSpec::General(ch.clone()), tol);
        if report.is_clean() {
            Ok(ch)
        } else {
            Err(Error::InvalidChannel(report.to_string()))
        }
    }

    pub fn users(&self) -> usize {
        self.gains.len()
    }

    pub fn input_dim(&self) -> usize {
        self.input_cap.dim()
    }
}

/// One terminal of a square channel: gain `Λ̂·V` with `V` orthonormal and
/// `Λ̂` diagonal carrying exactly `t − rank` leading zeros; block-diagonal
/// noise whose leading block covers the zero-gain coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SquareReceiver {
    /// Orthonormal `t×t` basis applied to the input.
    pub basis: DMatrix<f64>,
    /// Diagonal of `Λ̂`, leading `t − rank` entries zero, rest positive.
    pub gain_diag: DVector<f64>,
    /// Block-diagonal noise covariance.
    pub noise: PsdMatrix,
    /// Rank of the original gain matrix.
    pub rank: usize,
}

impl SquareReceiver {
    /// The full gain matrix `Λ̂·V`.
    pub fn gain(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.gain_diag) * &self.basis
    }
}

/// Square channel: every terminal at the input dimension `t`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SquareChannel {
    pub input_cap: PsdMatrix,
    pub receivers: Vec<SquareReceiver>,
    pub eve: SquareReceiver,
}

impl SquareChannel {
    pub fn users(&self) -> usize {
        self.receivers.len()
    }

    pub fn dim(&self) -> usize {
        self.input_cap.dim()
    }

    /// View as a general channel (gains `Λ̂V`, block-diagonal noises), for
    /// rate evaluation.
    pub fn to_general(&self) -> GeneralChannel {
        GeneralChannel {
            input_cap: self.input_cap.clone(),
            gains: self.receivers.iter().map(|r| r.gain()).collect(),
            receiver_noises: self.receivers.iter().map(|r| r.noise.clone()).collect(),
            eve_gain: self.eve.gain(),
            eve_noise: self.eve.noise.clone(),
        }
    }
}

/// Tagged union of the channel classes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ChannelSpec {
    Siso(SisoChannel),
    Degraded(DegradedChannel),
    Aligned(AlignedChannel),
    General(GeneralChannel),
}

/// One violated structural assumption, with the offending eigenvalue when
/// the check is spectral.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Violation {
    pub what: String,
    pub offending_eigenvalue: Option<f64>,
}

/// Report-only diagnostics from [`validate`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, what: impl Into<String>, eig: Option<f64>) {
        self.violations.push(Violation {
            what: what.into(),
            offending_eigenvalue: eig,
        });
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        for v in &self.violations {
            match v.offending_eigenvalue {
                Some(e) => writeln!(f, "{} (eigenvalue {:.3e})", v.what, e)?,
                None => writeln!(f, "{}", v.what)?,
            }
        }
        Ok(())
    }
}

fn check_strictly_positive(
    report: &mut ValidationReport,
    m: &PsdMatrix,
    name: &str,
    tol: &Tolerance,
) {
    if !m.is_strictly_positive(tol) {
        report.push(
            format!("{name} is not strictly positive definite"),
            Some(m.min_eigenvalue()),
        );
    }
}

/// Check every structural assumption of a channel spec and list the
/// violations. Never fails; an empty report means the description is valid.
pub fn validate(channel: &ChannelSpec, tol: &Tolerance) -> ValidationReport {
    let mut report = ValidationReport::default();
    match channel {
        ChannelSpec::Siso(ch) => {
            if ch.power <= 0.0 {
                report.push(format!("power {} is not positive", ch.power), None);
            }
            if ch.sigma1_sq <= 0.0 {
                report.push("sigma1_sq is not positive", Some(ch.sigma1_sq));
            }
            if ch.sigma1_sq > ch.sigma2_sq {
                report.push(
                    "variance ordering violated: sigma1_sq > sigma2_sq",
                    Some(ch.sigma2_sq - ch.sigma1_sq),
                );
            }
            if ch.sigma2_sq > ch.sigma_z_sq {
                report.push(
                    "variance ordering violated: sigma2_sq > sigmaZ_sq",
                    Some(ch.sigma_z_sq - ch.sigma2_sq),
                );
            }
        }
        ChannelSpec::Degraded(ch) => {
            let dim = ch.input_cap.dim();
            check_strictly_positive(&mut report, &ch.input_cap, "S", tol);
            if ch.receiver_noises.is_empty() {
                report.push("no receivers", None);
                return report;
            }
            for (k, sigma) in ch.receiver_noises.iter().enumerate() {
                if sigma.dim() != dim {
                    report.push(format!("Sigma_{} has wrong dimension", k + 1), None);
                }
            }
            if ch.eve_noise.dim() != dim {
                report.push("SigmaZ has wrong dimension", None);
            }
            if report.is_clean() {
                check_strictly_positive(&mut report, &ch.receiver_noises[0], "Sigma_1", tol);
                for k in 0..ch.receiver_noises.len() - 1 {
                    let margin = loewner_margin(
                        ch.receiver_noises[k].as_matrix(),
                        ch.receiver_noises[k + 1].as_matrix(),
                    );
                    if margin < -tol.psd_tol {
                        report.push(
                            format!("ordering violated: Sigma_{} ⋠ Sigma_{}", k + 1, k + 2),
                            Some(margin),
                        );
                    }
                }
                let margin = loewner_margin(
                    ch.receiver_noises[ch.receiver_noises.len() - 1].as_matrix(),
                    ch.eve_noise.as_matrix(),
                );
                if margin < -tol.psd_tol {
                    report.push(
                        format!(
                            "ordering violated: Sigma_{} ⋠ SigmaZ",
                            ch.receiver_noises.len()
                        ),
                        Some(margin),
                    );
                }
            }
        }
        ChannelSpec::Aligned(ch) => {
            let dim = ch.input_cap.dim();
            check_strictly_positive(&mut report, &ch.input_cap, "S", tol);
            if ch.receiver_noises.is_empty() {
                report.push("no receivers", None);
            }
            for (k, sigma) in ch.receiver_noises.iter().enumerate() {
                if sigma.dim() != dim {
                    report.push(format!("Sigma_{} has wrong dimension", k + 1), None);
                } else {
                    check_strictly_positive(&mut report, sigma, &format!("Sigma_{}", k + 1), tol);
                }
            }
            if ch.eve_noise.dim() != dim {
                report.push("SigmaZ has wrong dimension", None);
            } else {
                check_strictly_positive(&mut report, &ch.eve_noise, "SigmaZ", tol);
            }
        }
        ChannelSpec::General(ch) => {
            let t = ch.input_cap.dim();
            if ch.gains.len() != ch.receiver_noises.len() {
                report.push("gain/noise count mismatch", None);
                return report;
            }
            if ch.gains.is_empty() {
                report.push("no receivers", None);
            }
            for (k, (h, sigma)) in ch.gains.iter().zip(&ch.receiver_noises).enumerate() {
                if h.ncols() != t {
                    report.push(format!("H_{} has wrong input dimension", k + 1), None);
                }
                if sigma.dim() != h.nrows() {
                    report.push(
                        format!("Sigma_{} does not match H_{} rows", k + 1, k + 1),
                        None,
                    );
                } else {
                    check_strictly_positive(&mut report, sigma, &format!("Sigma_{}", k + 1), tol);
                }
            }
            if ch.eve_gain.ncols() != t {
                report.push("HZ has wrong input dimension", None);
            }
            if ch.eve_noise.dim() != ch.eve_gain.nrows() {
                report.push("SigmaZ does not match HZ rows", None);
            } else {
                check_strictly_positive(&mut report, &ch.eve_noise, "SigmaZ", tol);
            }
        }
    }
    report
}

/// Input-covariance constraint classes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum PowerConstraint {
    /// `tr(S) ≤ P`.
    Total(f64),
    /// `S_ii ≤ P_i` per transmit antenna.
    PerAntenna(Vec<f64>),
}

impl PowerConstraint {
    /// Membership test for an input covariance candidate.
    pub fn is_feasible(&self, s: &PsdMatrix) -> bool {
        match self {
            PowerConstraint::Total(p) => s.as_matrix().trace() <= *p + 1e-12 * (1.0 + p.abs()),
            PowerConstraint::PerAntenna(limits) => {
                s.dim() == limits.len()
                    && s.as_matrix()
                        .diagonal()
                        .iter()
                        .zip(limits)
                        .all(|(d, p)| *d <= *p + 1e-12 * (1.0 + p.abs()))
            }
        }
    }
}

/// Orthonormal completion: extend the orthonormal columns of `basis`
/// (t×k, k ≤ t) to a full t×t orthonormal matrix, deterministically, by
/// Gram–Schmidt over the identity candidates.
fn complete_orthonormal(basis: &DMatrix<f64>) -> DMatrix<f64> {
    let t = basis.nrows();
    let mut cols: Vec<DVector<f64>> = (0..basis.ncols()).map(|j| basis.column(j).into()).collect();
    let mut cand = 0;
    while cols.len() < t {
        let mut v = DVector::zeros(t);
        v[cand % t] = 1.0;
        cand += 1;
        // Re-orthogonalize twice against the accepted columns so the
        // completion stays orthonormal to machine precision.
        for _ in 0..2 {
            for c in &cols {
                let proj = c.dot(&v);
                v -= c * proj;
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            cols.push(v / norm);
        }
        assert!(cand <= 2 * t, "orthonormal completion failed");
    }
    DMatrix::from_columns(&cols)
}

fn reduce_receiver(
    gain: &DMatrix<f64>,
    noise: &PsdMatrix,
    rank_tol: f64,
) -> Result<SquareReceiver> {
    let t = gain.ncols();
    let r = gain.nrows();
    // Singular structure of the gain; `SVD::new` sorts descending.
    let svd = nalgebra::SVD::new(gain.clone(), false, true);
    let sv_desc = &svd.singular_values;
    let v_t = svd.v_t.as_ref().expect("requested right singular vectors");
    let sv_max = sv_desc.iter().fold(0.0_f64, |a, &b| a.max(b));
    let rank = sv_desc
        .iter()
        .filter(|&&s| s > rank_tol * sv_max && s > 0.0)
        .count();

    // Positive-gain input directions, ascending singular value, then the
    // orthonormal completion spanning the null space placed first.
    let mut sv = vec![0.0; t - rank];
    let mut pos_cols: Vec<DVector<f64>> = Vec::with_capacity(rank);
    for i in (0..rank).rev() {
        sv.push(sv_desc[i]);
        pos_cols.push(v_t.row(i).transpose());
    }
    let pos = if rank > 0 {
        DMatrix::from_columns(&pos_cols)
    } else {
        DMatrix::zeros(t, 0)
    };
    let full = complete_orthonormal(&pos);
    let mut basis_rows: Vec<DVector<f64>> = Vec::with_capacity(t);
    for j in rank..t {
        basis_rows.push(full.column(j).into_owned());
    }
    for j in 0..rank {
        basis_rows.push(full.column(j).into_owned());
    }
    let basis_t = DMatrix::from_columns(&basis_rows); // columns v_1..v_t
    let basis = basis_t.transpose(); // rows are the input directions

    let mut gain_diag = DVector::zeros(t);
    for (i, &s) in sv.iter().enumerate() {
        gain_diag[i] = s;
    }

    // Left directions carrying signal: u_i = H v_i / s_i for the positive
    // block, an orthonormal r×rank frame.
    let mut noise_out = DMatrix::identity(t, t);
    if rank > 0 {
        let mut u_cols = Vec::with_capacity(rank);
        for i in 0..rank {
            let v_i = basis_t.column(t - rank + i);
            let u = gain * v_i / sv[t - rank + i];
            u_cols.push(DVector::from(u));
        }
        let u_b = DMatrix::from_columns(&u_cols);
        let sigma_b = if rank == r {
            // No pure-noise rows in the observation.
            symmetrize(&(u_b.transpose() * noise.as_matrix() * &u_b))
        } else {
            // Split the rotated observation into pure-noise rows (the
            // complement frame) and signal rows, then decorrelate the signal
            // noise from the pure-noise part; the Schur complement is the
            // effective noise of the signal block.
            let u_full = complete_orthonormal(&u_b);
            let u_a = u_full.columns(rank, r - rank).into_owned();
            let s_bb = u_b.transpose() * noise.as_matrix() * &u_b;
            let s_aa = u_a.transpose() * noise.as_matrix() * &u_a;
            let s_ba = u_b.transpose() * noise.as_matrix() * &u_a;
            let s_aa_inv = spd_inverse(&s_aa)?;
            symmetrize(&(&s_bb - &s_ba * s_aa_inv * s_ba.transpose()))
        };
        noise_out
            .view_mut((t - rank, t - rank), (rank, rank))
            .copy_from(&sigma_b);
    }
    Ok(SquareReceiver {
        basis,
        gain_diag,
        noise: PsdMatrix::new_unchecked(noise_out),
        rank,
    })
}

/// Reduce a general channel to an equivalent square channel with the same
/// dirty-paper rates for every partition and encoding order.
pub fn reduce_general_to_square(g: &GeneralChannel, rank_tol: f64) -> Result<SquareChannel> {
    let t = g.input_dim();
    for h in &g.gains {
        if h.ncols() != t {
            return Err(Error::DimensionMismatch {
                expected: t,
                found: h.ncols(),
            });
        }
    }
    if g.eve_gain.ncols() != t {
        return Err(Error::DimensionMismatch {
            expected: t,
            found: g.eve_gain.ncols(),
        });
    }
    let receivers = g
        .gains
        .iter()
        .zip(&g.receiver_noises)
        .map(|(h, sigma)| reduce_receiver(h, sigma, rank_tol))
        .collect::<Result<Vec<_>>>()?;
    let eve = reduce_receiver(&g.eve_gain, &g.eve_noise, rank_tol)?;
    Ok(SquareChannel {
        input_cap: g.input_cap.clone(),
        receivers,
        eve,
    })
}

/// Perturb the zero gain block of each terminal by `α > 0` and whiten,
/// producing an aligned channel (identity gains) with noise
/// `H̄⁻¹ Σ̂ H̄⁻ᵀ` where `H̄ = (Λ̂ + α·Î)·V`.
pub fn perturb_to_aligned(sq: &SquareChannel, alpha: f64) -> Result<AlignedChannel> {
    if alpha <= 0.0 {
        return Err(Error::OutOfRange {
            name: "alpha",
            value: alpha,
            lo: f64::MIN_POSITIVE,
            hi: f64::INFINITY,
        });
    }
    let whiten = |r: &SquareReceiver| -> PsdMatrix {
        let t = r.basis.nrows();
        let mut inv_diag = DVector::zeros(t);
        for i in 0..t {
            let d = if i < t - r.rank {
                alpha
            } else {
                r.gain_diag[i]
            };
            inv_diag[i] = 1.0 / d;
        }
        // H̄⁻¹ = Vᵀ·(Λ̂+αÎ)⁻¹ since V is orthonormal.
        let inv = r.basis.transpose() * DMatrix::from_diagonal(&inv_diag);
        PsdMatrix::new_unchecked(&inv * r.noise.as_matrix() * inv.transpose())
    };
    let receiver_noises = sq.receivers.iter().map(&whiten).collect();
    let eve_noise = whiten(&sq.eve);
    Ok(AlignedChannel {
        input_cap: sq.input_cap.clone(),
        receiver_noises,
        eve_noise,
    })
}

/// JSON wire format for channel specs. Matrices are row-major arrays of
/// arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelJson {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(rename = "S", skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Sigma")]
    pub sigma: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "SigmaZ")]
    pub sigma_z: Vec<Vec<f64>>,
    #[serde(rename = "H", skip_serializing_if = "Option::is_none")]
    pub h: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(rename = "HZ", skip_serializing_if = "Option::is_none")]
    pub hz: Option<Vec<Vec<f64>>>,
    #[serde(rename = "P", skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

/// Parse a row-major nested array into a matrix.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(Error::InvalidChannel("empty matrix".into()));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidChannel("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Serialize a matrix to row-major nested arrays.
pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl ChannelSpec {
    /// Build from the JSON wire format, validating structure.
    pub fn from_json(json: &ChannelJson, tol: &Tolerance) -> Result<Self> {
        let psd = |rows: &[Vec<f64>]| -> Result<PsdMatrix> {
            PsdMatrix::new(matrix_from_rows(rows)?, tol)
        };
        match json.kind.as_str() {
            "siso" => {
                let p = json
                    .p
                    .ok_or_else(|| Error::InvalidChannel("siso requires \"P\"".into()))?;
                if json.sigma.len() != 2 {
                    return Err(Error::InvalidChannel(
                        "siso requires two receiver variances".into(),
                    ));
                }
                let scalar = |rows: &[Vec<f64>], name: &str| -> Result<f64> {
                    let m = matrix_from_rows(rows)?;
                    if m.nrows() == 1 && m.ncols() == 1 {
                        Ok(m[(0, 0)])
                    } else {
                        Err(Error::InvalidChannel(format!("{name} must be 1×1")))
                    }
                };
                Ok(ChannelSpec::Siso(SisoChannel::new(
                    p,
                    scalar(&json.sigma[0], "Sigma[0]")?,
                    scalar(&json.sigma[1], "Sigma[1]")?,
                    scalar(&json.sigma_z, "SigmaZ")?,
                )?))
            }
            "degraded" | "aligned" => {
                let s = psd(json
                    .s
                    .as_ref()
                    .ok_or_else(|| Error::InvalidChannel("missing \"S\"".into()))?)?;
                let noises = json
                    .sigma
                    .iter()
                    .map(|m| psd(m))
                    .collect::<Result<Vec<_>>>()?;
                let eve = psd(&json.sigma_z)?;
                if json.kind == "degraded" {
                    Ok(ChannelSpec::Degraded(DegradedChannel::new(
                        s, noises, eve, tol,
                    )?))
                } else {
                    Ok(ChannelSpec::Aligned(AlignedChannel::new(
                        s, noises, eve, tol,
                    )?))
                }
            }
            "general" => {
                let s = psd(json
                    .s
                    .as_ref()
                    .ok_or_else(|| Error::InvalidChannel("missing \"S\"".into()))?)?;
                let h = json
                    .h
                    .as_ref()
                    .ok_or_else(|| Error::InvalidChannel("general requires \"H\"".into()))?
                    .iter()
                    .map(|m| matrix_from_rows(m))
                    .collect::<Result<Vec<_>>>()?;
                let hz = matrix_from_rows(
                    json.hz
                        .as_ref()
                        .ok_or_else(|| Error::InvalidChannel("general requires \"HZ\"".into()))?,
                )?;
                let noises = json
                    .sigma
                    .iter()
                    .map(|m| psd(m))
                    .collect::<Result<Vec<_>>>()?;
                let eve = psd(&json.sigma_z)?;
                Ok(ChannelSpec::General(GeneralChannel::new(
                    s, h, noises, hz, eve, tol,
                )?))
            }
            other => Err(Error::InvalidChannel(format!("unknown type {other:?}"))),
        }
    }

    /// Serialize to the JSON wire format.
    pub fn to_json(&self) -> ChannelJson {
        match self {
            ChannelSpec::Siso(ch) => ChannelJson {
                kind: "siso".into(),
                s: None,
                sigma: vec![vec![vec![ch.sigma1_sq]], vec![vec![ch.sigma2_sq]]],
                sigma_z: vec![vec![ch.sigma_z_sq]],
                h: None,
                hz: None,
                p: Some(ch.power),
            },
            ChannelSpec::Degraded(ch) => ChannelJson {
                kind: "degraded".into(),
                s: Some(matrix_to_rows(ch.input_cap.as_matrix())),
                sigma: ch
                    .receiver_noises
                    .iter()
                    .map(|m| matrix_to_rows(m.as_matrix()))
                    .collect(),
                sigma_z: matrix_to_rows(ch.eve_noise.as_matrix()),
                h: None,
                hz: None,
                p: None,
            },
            ChannelSpec::Aligned(ch) => ChannelJson {
                kind: "aligned".into(),
                s: Some(matrix_to_rows(ch.input_cap.as_matrix())),
                sigma: ch
                    .receiver_noises
                    .iter()
                    .map(|m| matrix_to_rows(m.as_matrix()))
                    .collect(),
                sigma_z: matrix_to_rows(ch.eve_noise.as_matrix()),
                h: None,
                hz: None,
                p: None,
            },
            ChannelSpec::General(ch) => ChannelJson {
                kind: "general".into(),
                s: Some(matrix_to_rows(ch.input_cap.as_matrix())),
                sigma: ch
                    .receiver_noises
                    .iter()
                    .map(|m| matrix_to_rows(m.as_matrix()))
                    .collect(),
                sigma_z: matrix_to_rows(ch.eve_noise.as_matrix()),
                h: Some(ch.gains.iter().map(matrix_to_rows).collect()),
                hz: Some(matrix_to_rows(&ch.eve_gain)),
                p: None,
            },
        }
    }
}
