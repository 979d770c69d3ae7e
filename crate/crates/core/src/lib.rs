//! Secrecy capacity regions of Gaussian multi-receiver wiretap channels.
//!
//! The crate evaluates, optimizes, and certifies the dirty-paper-coding
//! secrecy rate regions of SISO, degraded MIMO, aligned MIMO and general
//! MIMO wiretap channels, and numerically validates the Fisher/MMSE
//! information identities that underpin the converse arguments:
//!
//! - [`psdcore`] — positive semi-definite matrix foundations: Loewner
//!   ordering, log-determinants, simultaneous diagonalization and the
//!   monotone determinant-ratio root finder.
//! - [`channel_model`] — channel descriptions, structural validation, and
//!   the general → square → aligned reductions.
//! - [`rate_eval`] — closed-form secrecy rates, dirty-paper rates with an
//!   encoding order, and dummy-rate accounting.
//! - [`boundary_opt`] — weighted-sum secrecy-rate maximization over
//!   covariance partitions with KKT residual certification.
//! - [`enhancement`] — construction and verification of the enhanced
//!   degraded channel that touches the boundary at a certified point.
//! - [`infoest`] — quadrature / Monte Carlo estimators of entropy, MMSE
//!   and Fisher information for Gaussian-mixture inputs, with property
//!   checks for the de Bruijn, I-MMSE, complementary and Cramér–Rao
//!   relations.
//!
//! All rates are in nats; conversion to bits happens only at output
//! boundaries.
//!
//! ## Quick start
//!
//! ```rust
//! use secrecy_core::boundary_opt::{maximize_weighted_secrecy, OptimOptions, WeightVector};
//! use secrecy_core::channel_model::AlignedChannel;
//! use secrecy_core::enhancement::{enhance, verify_enhancement};
//! use secrecy_core::psdcore::{PsdMatrix, Tolerance};
//!
//! let tol = Tolerance::default();
//! let channel = AlignedChannel::new(
//!     PsdMatrix::from_scalar(1.0),                 // input covariance budget
//!     vec![PsdMatrix::from_scalar(0.5)],           // receiver noise
//!     PsdMatrix::from_scalar(2.0),                 // eavesdropper noise
//!     &tol,
//! )?;
//! let weights = WeightVector::new(vec![1.0])?;
//! let out = maximize_weighted_secrecy(&channel, &weights, &OptimOptions::default())?;
//! assert!(out.converged);
//! assert!(out.certificate.max_residual() < 1e-8);
//!
//! // The boundary point comes with a machine-checkable converse witness:
//! // shrunk noises that make the channel degraded without moving the point.
//! let enhanced = enhance(&channel, &out.partition, &out.certificate, &weights)?;
//! let report = verify_enhancement(&channel, &out.partition, &out.certificate, &weights, &enhanced)?;
//! assert!(report.max_residual() < 1e-6);
//! # Ok::<(), secrecy_core::Error>(())
//! ```

pub mod boundary_opt;
pub mod channel_model;
pub mod enhancement;
pub mod infoest;
pub mod psdcore;
pub mod rate_eval;
pub mod sampling;

use thiserror::Error;

/// Error type for all library operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric: relative deviation {deviation:.3e} exceeds 1e-12")]
    NotSymmetric { deviation: f64 },

    #[error(
        "matrix is not positive semi-definite: min eigenvalue {min_eig:.3e} below -{slack:.3e}"
    )]
    NotPsd { min_eig: f64, slack: f64 },

    #[error("matrix is singular to tolerance: min eigenvalue {min_eig:.3e}")]
    Singular { min_eig: f64 },

    #[error("{name} = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("target {target:.6e} outside bracket [{lo:.6e}, {hi:.6e}]")]
    TargetOutOfBracket { target: f64, lo: f64, hi: f64 },

    #[error("tolerances must be strictly positive")]
    InvalidTolerance,

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid mixture: {0}")]
    InvalidMixture(String),

    #[error("density is degenerate: {0}")]
    DegenerateDensity(String),

    #[error("dimension {dim} exceeds estimator cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("estimator noise too large: {0}")]
    EstimatorNoise(String),

    #[error("invalid certificate: {0}")]
    InvalidCertificate(String),
}

pub type Result<T> = std::result::Result<T, Error>;
