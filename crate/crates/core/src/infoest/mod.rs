//! Estimators of differential entropy, MMSE and (conditional) Fisher
//! information for finite Gaussian mixtures, and numerical checks of the
//! information identities and matrix inequalities built on them.
//!
//! Scalar quantities integrate exactly-shaped mixture densities with
//! Gauss–Hermite quadrature against each Gaussian component (the reported
//! `stderr` is a node-halving truncation estimate). Vector quantities use
//! Monte Carlo with antithetic sampling in deterministic per-chunk streams;
//! `stderr` comes from the chunk spread, and derived matrix expressions
//! propagate uncertainty by re-evaluating chunk-paired estimates.

mod checks;
mod kstar;
mod quad;
mod scalar;
mod vector;

pub use checks::{
    check_complementary, check_de_bruijn, check_fisher_inequalities, check_immse,
    check_single_crossing, check_worst_noise, CrossingReport, FisherInequalityReport,
    IdentityCheck, WorstNoiseReport,
};
pub use kstar::{find_kstar, KstarReport};
pub use quad::{adaptive_simpson, gauss_hermite};
pub use vector::MatrixEstimate;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::psdcore::PsdMatrix;
use crate::{Error, Result};

/// Hard cap on the dimension of vector estimators.
pub const VECTOR_DIM_CAP: usize = 3;

/// Estimator configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Gauss–Hermite node count for scalar quadrature.
    pub quad_nodes: usize,
    /// Monte Carlo sample budget for vector estimators.
    pub mc_samples: usize,
    /// Seed for all Monte Carlo streams.
    pub seed: u64,
    /// Relative finite-difference step for derivative checks.
    pub fd_step: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            quad_nodes: 200,
            mc_samples: 1_000_000,
            seed: 0,
            fd_step: 1e-4,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.quad_nodes < 2 || self.mc_samples < 2 || self.fd_step <= 0.0 {
            return Err(Error::InvalidMixture(
                "estimator configuration requires positive node/sample counts".into(),
            ));
        }
        Ok(())
    }
}

/// A point estimate with an uncertainty scale: Monte Carlo standard error,
/// or a quadrature truncation estimate on the deterministic path.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, stderr: 0.0 }
    }
}

/// One Gaussian component of a scalar mixture.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScalarComponent {
    pub weight: f64,
    pub mean: f64,
    pub var: f64,
}

/// Scalar Gaussian mixture, optionally conditioned on a discrete variable:
/// one branch per conditioning value, with branch probabilities summing to
/// one. An unconditional mixture is a single branch of probability one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalarMixture {
    pub branches: Vec<(f64, Vec<ScalarComponent>)>,
}

impl ScalarMixture {
    pub fn unconditional(components: Vec<ScalarComponent>) -> Result<Self> {
        Self::new(vec![(1.0, components)])
    }

    pub fn new(branches: Vec<(f64, Vec<ScalarComponent>)>) -> Result<Self> {
        let mix = Self { branches };
        mix.validate()?;
        Ok(mix)
    }

    /// Single zero-mean Gaussian.
    pub fn gaussian(var: f64) -> Self {
        Self {
            branches: vec![(
                1.0,
                vec![ScalarComponent {
                    weight: 1.0,
                    mean: 0.0,
                    var,
                }],
            )],
        }
    }

    /// Deterministic value (zero-variance component); only meaningful once
    /// convolved with noise.
    pub fn point_mass(at: f64) -> Self {
        Self {
            branches: vec![(
                1.0,
                vec![ScalarComponent {
                    weight: 1.0,
                    mean: at,
                    var: 0.0,
                }],
            )],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.branches.is_empty() {
            return Err(Error::InvalidMixture("no branches".into()));
        }
        let p_sum: f64 = self.branches.iter().map(|(p, _)| p).sum();
        if (p_sum - 1.0).abs() > 1e-9 || self.branches.iter().any(|(p, _)| *p <= 0.0) {
            return Err(Error::InvalidMixture(
                "branch probabilities must be positive and sum to 1".into(),
            ));
        }
        for (_, comps) in &self.branches {
            if comps.is_empty() {
                return Err(Error::InvalidMixture("empty branch".into()));
            }
            let w_sum: f64 = comps.iter().map(|c| c.weight).sum();
            if (w_sum - 1.0).abs() > 1e-9 || comps.iter().any(|c| c.weight <= 0.0) {
                return Err(Error::InvalidMixture(
                    "component weights must be positive and sum to 1".into(),
                ));
            }
            if comps.iter().any(|c| c.var < 0.0) {
                return Err(Error::InvalidMixture("negative variance".into()));
            }
        }
        Ok(())
    }

    /// All component variances strictly positive, so densities exist.
    pub fn has_density(&self) -> bool {
        self.branches
            .iter()
            .all(|(_, comps)| comps.iter().all(|c| c.var > 0.0))
    }

    /// Add independent Gaussian noise of variance `t`.
    pub fn convolve(&self, t: f64) -> Self {
        Self {
            branches: self
                .branches
                .iter()
                .map(|(p, comps)| {
                    (
                        *p,
                        comps
                            .iter()
                            .map(|c| ScalarComponent {
                                weight: c.weight,
                                mean: c.mean,
                                var: c.var + t,
                            })
                            .collect(),
                    )
                })
                .collect(),
        }
    }

    /// The mixture of `a·X`.
    pub fn scaled(&self, a: f64) -> Self {
        Self {
            branches: self
                .branches
                .iter()
                .map(|(p, comps)| {
                    (
                        *p,
                        comps
                            .iter()
                            .map(|c| ScalarComponent {
                                weight: c.weight,
                                mean: a * c.mean,
                                var: a * a * c.var,
                            })
                            .collect(),
                    )
                })
                .collect(),
        }
    }

    /// Mean conditional variance `E_U[Var(X|U)]`.
    pub fn cond_variance(&self) -> f64 {
        self.branches
            .iter()
            .map(|(p, comps)| {
                let mean: f64 = comps.iter().map(|c| c.weight * c.mean).sum();
                let second: f64 = comps
                    .iter()
                    .map(|c| c.weight * (c.var + c.mean * c.mean))
                    .sum();
                p * (second - mean * mean)
            })
            .sum()
    }

    /// Unconditional second moment `E[X²]`.
    pub fn second_moment(&self) -> f64 {
        self.branches
            .iter()
            .map(|(p, comps)| {
                p * comps
                    .iter()
                    .map(|c| c.weight * (c.var + c.mean * c.mean))
                    .sum::<f64>()
            })
            .sum()
    }
}

/// One Gaussian component of a vector mixture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VectorComponent {
    pub weight: f64,
    pub mean: DVector<f64>,
    pub cov: PsdMatrix,
}

/// Vector Gaussian mixture with optional discrete conditioning, dimension
/// capped at [`VECTOR_DIM_CAP`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VectorMixture {
    pub dim: usize,
    pub branches: Vec<(f64, Vec<VectorComponent>)>,
}

impl VectorMixture {
    pub fn unconditional(dim: usize, components: Vec<VectorComponent>) -> Result<Self> {
        Self::new(dim, vec![(1.0, components)])
    }

    pub fn new(dim: usize, branches: Vec<(f64, Vec<VectorComponent>)>) -> Result<Self> {
        let mix = Self { dim, branches };
        mix.validate()?;
        Ok(mix)
    }

    /// Single zero-mean Gaussian.
    pub fn gaussian(cov: PsdMatrix) -> Result<Self> {
        let dim = cov.dim();
        Self::new(
            dim,
            vec![(
                1.0,
                vec![VectorComponent {
                    weight: 1.0,
                    mean: DVector::zeros(dim),
                    cov,
                }],
            )],
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidMixture("zero dimension".into()));
        }
        if self.dim > VECTOR_DIM_CAP {
            return Err(Error::DimensionCap {
                dim: self.dim,
                cap: VECTOR_DIM_CAP,
            });
        }
        if self.branches.is_empty() {
            return Err(Error::InvalidMixture("no branches".into()));
        }
        let p_sum: f64 = self.branches.iter().map(|(p, _)| p).sum();
        if (p_sum - 1.0).abs() > 1e-9 || self.branches.iter().any(|(p, _)| *p <= 0.0) {
            return Err(Error::InvalidMixture(
                "branch probabilities must be positive and sum to 1".into(),
            ));
        }
        for (_, comps) in &self.branches {
            if comps.is_empty() {
                return Err(Error::InvalidMixture("empty branch".into()));
            }
            let w_sum: f64 = comps.iter().map(|c| c.weight).sum();
            if (w_sum - 1.0).abs() > 1e-9 || comps.iter().any(|c| c.weight <= 0.0) {
                return Err(Error::InvalidMixture(
                    "component weights must be positive and sum to 1".into(),
                ));
            }
            for c in comps {
                if c.mean.len() != self.dim || c.cov.dim() != self.dim {
                    return Err(Error::InvalidMixture("component dimension mismatch".into()));
                }
            }
        }
        Ok(())
    }

    /// Add independent Gaussian noise with covariance `sigma`.
    pub fn convolve(&self, sigma: &PsdMatrix) -> Self {
        Self {
            dim: self.dim,
            branches: self
                .branches
                .iter()
                .map(|(p, comps)| {
                    (
                        *p,
                        comps
                            .iter()
                            .map(|c| VectorComponent {
                                weight: c.weight,
                                mean: c.mean.clone(),
                                cov: &c.cov + sigma,
                            })
                            .collect(),
                    )
                })
                .collect(),
        }
    }

    /// Unconditional covariance `Cov(X)`.
    pub fn covariance(&self) -> PsdMatrix {
        let mut mean = DVector::zeros(self.dim);
        for (p, comps) in &self.branches {
            for c in comps {
                mean += *p * c.weight * &c.mean;
            }
        }
        let mut second = nalgebra::DMatrix::zeros(self.dim, self.dim);
        for (p, comps) in &self.branches {
            for c in comps {
                second += *p * c.weight * (c.cov.as_matrix() + &c.mean * c.mean.transpose());
            }
        }
        PsdMatrix::new_unchecked(second - &mean * mean.transpose())
    }

    /// Mean conditional covariance `E_U[Cov(X|U)]`.
    pub fn cond_covariance(&self) -> PsdMatrix {
        let mut acc = nalgebra::DMatrix::zeros(self.dim, self.dim);
        for (p, comps) in &self.branches {
            let mut mean = DVector::zeros(self.dim);
            for c in comps {
                mean += c.weight * &c.mean;
            }
            let mut second = nalgebra::DMatrix::zeros(self.dim, self.dim);
            for c in comps {
                second += c.weight * (c.cov.as_matrix() + &c.mean * c.mean.transpose());
            }
            acc += *p * (second - &mean * mean.transpose());
        }
        PsdMatrix::new_unchecked(acc)
    }

    /// Exact mixture of the sum `X + Y` of conditionally independent
    /// mixtures sharing the branch structure.
    pub fn convolve_with(&self, other: &VectorMixture) -> Result<VectorMixture> {
        if self.dim != other.dim || self.branches.len() != other.branches.len() {
            return Err(Error::InvalidMixture(
                "mixtures must share dimension and branch structure".into(),
            ));
        }
        let branches = self
            .branches
            .iter()
            .zip(&other.branches)
            .map(|((p, xs), (q, ys))| {
                if (p - q).abs() > 1e-9 {
                    return Err(Error::InvalidMixture(
                        "branch probabilities must agree".into(),
                    ));
                }
                let mut comps = Vec::with_capacity(xs.len() * ys.len());
                for cx in xs {
                    for cy in ys {
                        comps.push(VectorComponent {
                            weight: cx.weight * cy.weight,
                            mean: &cx.mean + &cy.mean,
                            cov: &cx.cov + &cy.cov,
                        });
                    }
                }
                Ok((*p, comps))
            })
            .collect::<Result<Vec<_>>>()?;
        VectorMixture::new(self.dim, branches)
    }

    /// Flatten the conditioning into a single unconditional branch.
    pub fn flatten(&self) -> VectorMixture {
        let mut comps = Vec::new();
        for (p, branch) in &self.branches {
            for c in branch {
                comps.push(VectorComponent {
                    weight: p * c.weight,
                    mean: c.mean.clone(),
                    cov: c.cov.clone(),
                });
            }
        }
        VectorMixture {
            dim: self.dim,
            branches: vec![(1.0, comps)],
        }
    }
}

/// Either a scalar or a vector mixture; ops that support both dispatch on
/// this.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Mixture {
    Scalar(ScalarMixture),
    Vector(VectorMixture),
}

impl Mixture {
    pub fn dim(&self) -> usize {
        match self {
            Mixture::Scalar(_) => 1,
            Mixture::Vector(v) => v.dim,
        }
    }
}

/// JSON wire format for mixtures: either a flat component list or a
/// `conditioning` array of branches. Means are numbers (scalar) or arrays
/// (vector); covariances numbers or row-major nested arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureJson {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<ComponentJson>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conditioning: Option<Vec<BranchJson>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchJson {
    pub p: f64,
    pub components: Vec<ComponentJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentJson {
    pub w: f64,
    pub mean: serde_json::Value,
    pub cov: serde_json::Value,
}

fn component_dim(c: &ComponentJson) -> usize {
    match &c.mean {
        serde_json::Value::Array(a) => a.len().max(1),
        _ => 1,
    }
}

fn parse_scalar_component(c: &ComponentJson) -> Result<ScalarComponent> {
    let get = |v: &serde_json::Value, name: &str| -> Result<f64> {
        v.as_f64()
            .ok_or_else(|| Error::InvalidMixture(format!("{name} must be a number")))
    };
    Ok(ScalarComponent {
        weight: c.w,
        mean: get(&c.mean, "mean")?,
        var: get(&c.cov, "cov")?,
    })
}

fn parse_vector_component(c: &ComponentJson, dim: usize) -> Result<VectorComponent> {
    let mean: Vec<f64> = serde_json::from_value(c.mean.clone())
        .map_err(|_| Error::InvalidMixture("mean must be an array".into()))?;
    let cov_rows: Vec<Vec<f64>> = serde_json::from_value(c.cov.clone())
        .map_err(|_| Error::InvalidMixture("cov must be a nested array".into()))?;
    if mean.len() != dim || cov_rows.len() != dim || cov_rows.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidMixture("component dimension mismatch".into()));
    }
    Ok(VectorComponent {
        weight: c.w,
        mean: DVector::from_vec(mean),
        cov: PsdMatrix::new_unchecked(crate::channel_model::matrix_from_rows(&cov_rows)?),
    })
}

impl Mixture {
    pub fn from_json(json: &MixtureJson) -> Result<Self> {
        let branches: Vec<(f64, Vec<ComponentJson>)> = match (&json.components, &json.conditioning)
        {
            (Some(comps), None) => vec![(1.0, comps.clone())],
            (None, Some(branches)) => branches
                .iter()
                .map(|b| (b.p, b.components.clone()))
                .collect(),
            _ => {
                return Err(Error::InvalidMixture(
                    "exactly one of \"components\" or \"conditioning\" is required".into(),
                ))
            }
        };
        let first = branches
            .first()
            .and_then(|(_, cs)| cs.first())
            .ok_or_else(|| Error::InvalidMixture("empty mixture".into()))?;
        let dim = component_dim(first);
        if dim == 1 && !matches!(first.mean, serde_json::Value::Array(_)) {
            let parsed = branches
                .iter()
                .map(|(p, cs)| {
                    Ok((
                        *p,
                        cs.iter()
                            .map(parse_scalar_component)
                            .collect::<Result<Vec<_>>>()?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Mixture::Scalar(ScalarMixture::new(parsed)?))
        } else {
            let parsed = branches
                .iter()
                .map(|(p, cs)| {
                    Ok((
                        *p,
                        cs.iter()
                            .map(|c| parse_vector_component(c, dim))
                            .collect::<Result<Vec<_>>>()?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Mixture::Vector(VectorMixture::new(dim, parsed)?))
        }
    }

    pub fn to_json(&self) -> MixtureJson {
        let branch_to_json = |comps: &[ComponentJson]| comps.to_vec();
        match self {
            Mixture::Scalar(m) => {
                let branches: Vec<BranchJson> = m
                    .branches
                    .iter()
                    .map(|(p, cs)| BranchJson {
                        p: *p,
                        components: cs
                            .iter()
                            .map(|c| ComponentJson {
                                w: c.weight,
                                mean: serde_json::json!(c.mean),
                                cov: serde_json::json!(c.var),
                            })
                            .collect(),
                    })
                    .collect();
                if branches.len() == 1 {
                    MixtureJson {
                        components: Some(branch_to_json(&branches[0].components)),
                        conditioning: None,
                    }
                } else {
                    MixtureJson {
                        components: None,
                        conditioning: Some(branches),
                    }
                }
            }
            Mixture::Vector(m) => {
                let branches: Vec<BranchJson> = m
                    .branches
                    .iter()
                    .map(|(p, cs)| BranchJson {
                        p: *p,
                        components: cs
                            .iter()
                            .map(|c| ComponentJson {
                                w: c.weight,
                                mean: serde_json::json!(c.mean.as_slice()),
                                cov: serde_json::json!(crate::channel_model::matrix_to_rows(
                                    c.cov.as_matrix()
                                )),
                            })
                            .collect(),
                    })
                    .collect();
                if branches.len() == 1 {
                    MixtureJson {
                        components: Some(branch_to_json(&branches[0].components)),
                        conditioning: None,
                    }
                } else {
                    MixtureJson {
                        components: None,
                        conditioning: Some(branches),
                    }
                }
            }
        }
    }
}

/// Differential entropy of `X + √t·N|U` with `N` standard normal (scalar)
/// or `X + N(0, t·I)|U` (vector). Scalar path is quadrature; vector path is
/// Monte Carlo with the reported standard error.
pub fn entropy_plus_noise(x: &Mixture, t: f64, cfg: &EstimatorConfig) -> Result<Estimate> {
    cfg.validate()?;
    if t < 0.0 {
        return Err(Error::OutOfRange {
            name: "t",
            value: t,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    match x {
        Mixture::Scalar(mix) => {
            let conv = mix.convolve(t);
            if !conv.has_density() {
                return Err(Error::DegenerateDensity(
                    "zero-variance component with t = 0".into(),
                ));
            }
            scalar::entropy(&conv, cfg)
        }
        Mixture::Vector(mix) => {
            let noise = PsdMatrix::scaled_identity(mix.dim, t);
            let conv = mix.convolve(&noise);
            if conv.branches.iter().any(|(_, cs)| {
                cs.iter()
                    .any(|c| !c.cov.is_strictly_positive(&Default::default()))
            }) {
                return Err(Error::DegenerateDensity(
                    "singular component covariance with t = 0".into(),
                ));
            }
            vector::entropy_mc(&conv, cfg).map(|e| e.estimate())
        }
    }
}

/// MMSE of estimating scalar `X` from `√t·X + N` and the conditioning.
pub fn mmse(x: &ScalarMixture, t: f64, cfg: &EstimatorConfig) -> Result<f64> {
    cfg.validate()?;
    if t < 0.0 {
        return Err(Error::OutOfRange {
            name: "t",
            value: t,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    scalar::mmse(x, t, cfg)
}

/// Fisher information of an already-convolved mixture: scalar `J(X)` or the
/// matrix `J(X|U)`, as a 1×1 or d×d matrix estimate.
pub fn fisher(x_plus_noise: &Mixture, cfg: &EstimatorConfig) -> Result<MatrixEstimate> {
    cfg.validate()?;
    match x_plus_noise {
        Mixture::Scalar(mix) => {
            if !mix.has_density() {
                return Err(Error::DegenerateDensity(
                    "Fisher information needs a smooth density".into(),
                ));
            }
            let est = scalar::fisher(mix, cfg)?;
            Ok(MatrixEstimate::from_scalar(est))
        }
        Mixture::Vector(mix) => vector::fisher_mc(mix, cfg),
    }
}
