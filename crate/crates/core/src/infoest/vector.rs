//! Monte Carlo estimators for vector mixtures: antithetic sampling in
//! deterministic per-chunk streams, combined by chunk index. Densities and
//! scores are exact mixture formulas, so the only error is sampling noise;
//! chunk means are retained so derived matrix expressions can propagate
//! uncertainty by re-evaluating chunk-paired estimates.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{Estimate, EstimatorConfig, VectorMixture};
use crate::psdcore::PsdMatrix;
use crate::{Error, Result};

const LOG_2PI: f64 = 1.8378770664093453;
const CHUNKS: usize = 64;

/// Scalar Monte Carlo result with per-chunk means retained.
#[derive(Debug, Clone)]
pub struct ScalarChunks {
    pub value: f64,
    pub stderr: f64,
    pub chunks: Vec<f64>,
}

impl ScalarChunks {
    pub fn estimate(&self) -> Estimate {
        Estimate {
            value: self.value,
            stderr: self.stderr,
        }
    }
}

/// Matrix estimate with per-chunk means; `chunks` is empty on deterministic
/// (quadrature) paths.
#[derive(Debug, Clone)]
pub struct MatrixEstimate {
    pub pooled: DMatrix<f64>,
    pub chunks: Vec<DMatrix<f64>>,
    /// Entrywise standard error of `pooled` from the chunk spread.
    pub stderr: DMatrix<f64>,
}

impl MatrixEstimate {
    pub fn from_scalar(est: Estimate) -> Self {
        Self {
            pooled: DMatrix::from_element(1, 1, est.value),
            chunks: Vec::new(),
            stderr: DMatrix::from_element(1, 1, est.stderr),
        }
    }

    pub fn exact(m: DMatrix<f64>) -> Self {
        let stderr = DMatrix::zeros(m.nrows(), m.ncols());
        Self {
            pooled: m,
            chunks: Vec::new(),
            stderr,
        }
    }

    /// Frobenius norm of the entrywise standard errors.
    pub fn stderr_norm(&self) -> f64 {
        self.stderr.norm()
    }

    /// Standard error of the quadratic form `vᵀ·M·v` from the chunk spread;
    /// zero when the estimate is deterministic.
    pub fn quadratic_form_stderr(&self, v: &DVector<f64>) -> f64 {
        if self.chunks.is_empty() {
            return 0.0;
        }
        let vals: Vec<f64> = self
            .chunks
            .iter()
            .map(|m| (v.transpose() * m * v)[(0, 0)])
            .collect();
        spread_stderr(&vals)
    }
}

fn spread_stderr(vals: &[f64]) -> f64 {
    let n = vals.len();
    if n < 2 {
        return 0.0;
    }
    let mean = vals.iter().sum::<f64>() / n as f64;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn chunk_rng(seed: u64, salt: u64, branch: usize, chunk: usize) -> ChaCha8Rng {
    let derived = splitmix(
        seed ^ splitmix(salt)
            ^ splitmix(branch as u64).rotate_left(17)
            ^ splitmix(chunk as u64).rotate_left(31),
    );
    ChaCha8Rng::seed_from_u64(derived)
}

struct PreparedComp {
    cum_weight: f64,
    weight: f64,
    mean: DVector<f64>,
    chol_l: DMatrix<f64>,
    inv: DMatrix<f64>,
    log_norm: f64,
}

struct PreparedBranch {
    prob: f64,
    comps: Vec<PreparedComp>,
}

fn prepare(mix: &VectorMixture) -> Result<Vec<PreparedBranch>> {
    mix.validate()?;
    let dim = mix.dim;
    mix.branches
        .iter()
        .map(|(p, comps)| {
            let mut cum = 0.0;
            let prepared = comps
                .iter()
                .map(|c| {
                    let chol = Cholesky::new(c.cov.as_matrix().clone()).ok_or_else(|| {
                        Error::DegenerateDensity("singular component covariance".into())
                    })?;
                    let logdet: f64 =
                        (0..dim).map(|i| chol.l_dirty()[(i, i)].ln()).sum::<f64>() * 2.0;
                    cum += c.weight;
                    Ok(PreparedComp {
                        cum_weight: cum,
                        weight: c.weight,
                        mean: c.mean.clone(),
                        chol_l: chol.l(),
                        inv: chol.inverse(),
                        log_norm: -0.5 * (dim as f64 * LOG_2PI + logdet),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(PreparedBranch {
                prob: *p,
                comps: prepared,
            })
        })
        .collect()
}

fn log_density(branch: &PreparedBranch, x: &DVector<f64>) -> f64 {
    let mut max = f64::NEG_INFINITY;
    let logs: Vec<f64> = branch
        .comps
        .iter()
        .map(|c| {
            let d = x - &c.mean;
            let quad = (d.transpose() * &c.inv * &d)[(0, 0)];
            let l = c.weight.ln() + c.log_norm - 0.5 * quad;
            if l > max {
                max = l;
            }
            l
        })
        .collect();
    max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

fn score(branch: &PreparedBranch, x: &DVector<f64>) -> DVector<f64> {
    let log_f = log_density(branch, x);
    let mut rho = DVector::zeros(x.len());
    for c in &branch.comps {
        let d = x - &c.mean;
        let whitened = &c.inv * &d;
        let quad = d.dot(&whitened);
        let resp = (c.weight.ln() + c.log_norm - 0.5 * quad - log_f).exp();
        rho -= resp * whitened;
    }
    rho
}

fn sample_pair<R: Rng>(branch: &PreparedBranch, rng: &mut R) -> (DVector<f64>, DVector<f64>) {
    let u: f64 = rng.gen();
    let comp = branch
        .comps
        .iter()
        .find(|c| u <= c.cum_weight)
        .unwrap_or_else(|| branch.comps.last().expect("non-empty branch"));
    let dim = comp.mean.len();
    let z = DVector::from_fn(dim, |_, _| rng.sample(StandardNormal));
    let shift = &comp.chol_l * z;
    (&comp.mean + &shift, &comp.mean - &shift)
}

fn pairs_per_chunk(prob: f64, cfg: &EstimatorConfig) -> usize {
    let total_pairs = (cfg.mc_samples / 2).max(CHUNKS);
    ((prob * total_pairs as f64 / CHUNKS as f64).round() as usize).max(1)
}

/// Generic chunked MC: `f(branch, x)` is averaged over antithetic pairs,
/// branch-weighted, per chunk.
fn run_scalar_mc(
    branches: &[PreparedBranch],
    cfg: &EstimatorConfig,
    salt: u64,
    f: impl Fn(&PreparedBranch, &DVector<f64>) -> f64 + Sync,
) -> ScalarChunks {
    let chunks: Vec<f64> = (0..CHUNKS)
        .into_par_iter()
        .map(|chunk| {
            let mut total = 0.0;
            for (bi, branch) in branches.iter().enumerate() {
                let mut rng = chunk_rng(cfg.seed, salt, bi, chunk);
                let pairs = pairs_per_chunk(branch.prob, cfg);
                let mut acc = 0.0;
                for _ in 0..pairs {
                    let (xp, xm) = sample_pair(branch, &mut rng);
                    acc += 0.5 * (f(branch, &xp) + f(branch, &xm));
                }
                total += branch.prob * acc / pairs as f64;
            }
            total
        })
        .collect();
    let value = chunks.iter().sum::<f64>() / CHUNKS as f64;
    ScalarChunks {
        value,
        stderr: spread_stderr(&chunks),
        chunks,
    }
}

fn run_matrix_mc(
    branches: &[PreparedBranch],
    cfg: &EstimatorConfig,
    salt: u64,
    rows: usize,
    cols: usize,
    f: impl Fn(&PreparedBranch, &DVector<f64>) -> DMatrix<f64> + Sync,
) -> MatrixEstimate {
    let chunks: Vec<DMatrix<f64>> = (0..CHUNKS)
        .into_par_iter()
        .map(|chunk| {
            let mut total = DMatrix::zeros(rows, cols);
            for (bi, branch) in branches.iter().enumerate() {
                let mut rng = chunk_rng(cfg.seed, salt, bi, chunk);
                let pairs = pairs_per_chunk(branch.prob, cfg);
                let mut acc = DMatrix::zeros(rows, cols);
                for _ in 0..pairs {
                    let (xp, xm) = sample_pair(branch, &mut rng);
                    acc += 0.5 * (f(branch, &xp) + f(branch, &xm));
                }
                total += branch.prob * acc / pairs as f64;
            }
            total
        })
        .collect();
    let mut pooled = DMatrix::zeros(rows, cols);
    for c in &chunks {
        pooled += c;
    }
    pooled /= CHUNKS as f64;
    let mut stderr = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let vals: Vec<f64> = chunks.iter().map(|c| c[(i, j)]).collect();
            stderr[(i, j)] = spread_stderr(&vals);
        }
    }
    MatrixEstimate {
        pooled,
        chunks,
        stderr,
    }
}

/// `h(X|U)` by Monte Carlo: `−E[log f(X|U)]`.
pub fn entropy_mc(mix: &VectorMixture, cfg: &EstimatorConfig) -> Result<ScalarChunks> {
    let branches = prepare(mix)?;
    Ok(run_scalar_mc(&branches, cfg, 0x68, |b, x| {
        -log_density(b, x)
    }))
}

/// `J(X|U)` by Monte Carlo: `E[ρ(X|U)·ρ(X|U)ᵀ]`.
pub fn fisher_mc(mix: &VectorMixture, cfg: &EstimatorConfig) -> Result<MatrixEstimate> {
    let branches = prepare(mix)?;
    let d = mix.dim;
    Ok(run_matrix_mc(&branches, cfg, 0x4a, d, d, |b, x| {
        let rho = score(b, x);
        &rho * rho.transpose()
    }))
}

/// Stein residuals: `E[ρ(X|U)]` (d×1) and `E[X·ρ(X|U)ᵀ] + I` (d×d); both
/// vanish in exact arithmetic.
pub fn stein_mc(
    mix: &VectorMixture,
    cfg: &EstimatorConfig,
) -> Result<(MatrixEstimate, MatrixEstimate)> {
    let branches = prepare(mix)?;
    let d = mix.dim;
    let mean_rho = run_matrix_mc(&branches, cfg, 0x51, d, 1, |b, x| {
        DMatrix::from_column_slice(d, 1, score(b, x).as_slice())
    });
    let mut x_rho = run_matrix_mc(&branches, cfg, 0x52, d, d, |b, x| {
        let rho = score(b, x);
        x * rho.transpose()
    });
    x_rho.pooled += DMatrix::identity(d, d);
    for c in x_rho.chunks.iter_mut() {
        *c += DMatrix::identity(d, d);
    }
    Ok((mean_rho, x_rho))
}

/// Directional derivative of `h(X + N(0, Σ))` along a symmetric direction:
/// `(h(Σ + ε·Δ) − h(Σ − ε·Δ))/(2ε)` with common random numbers, Richardson
/// extrapolated over a half step. The de Bruijn gradient identity predicts
/// `½·tr(J(X+N)·Δ)`.
pub fn entropy_directional_fd(
    mix: &VectorMixture,
    sigma: &PsdMatrix,
    delta: &DMatrix<f64>,
    eps: f64,
    cfg: &EstimatorConfig,
) -> Result<Estimate> {
    let fd = |e: f64| -> Result<ScalarChunks> {
        let plus = mix.convolve(&PsdMatrix::new_unchecked(sigma.as_matrix() + e * delta));
        let minus = mix.convolve(&PsdMatrix::new_unchecked(sigma.as_matrix() - e * delta));
        let bp = prepare(&plus)?;
        let bm = prepare(&minus)?;
        // Common random numbers: the same uniform/normal stream drives both
        // perturbed densities, so the per-pair difference is low-variance.
        let diff = run_paired_scalar_mc(&bp, &bm, cfg, 0x77, |bp, bm, xp1, xm1, xp2, xm2| {
            let hp = -0.5 * (log_density(bp, xp1) + log_density(bp, xm1));
            let hm = -0.5 * (log_density(bm, xp2) + log_density(bm, xm2));
            hp - hm
        });
        Ok(ScalarChunks {
            value: diff.value / (2.0 * e),
            stderr: diff.stderr / (2.0 * e),
            chunks: diff.chunks,
        })
    };
    let d1 = fd(eps)?;
    let d2 = fd(0.5 * eps)?;
    Ok(Estimate {
        value: (4.0 * d2.value - d1.value) / 3.0,
        stderr: d2.stderr.max(d1.stderr),
    })
}

/// Paired sampler for common-random-number differences: branch/component
/// choice and the normal draw are shared, each prepared mixture maps them
/// through its own Cholesky factor.
fn run_paired_scalar_mc(
    plus: &[PreparedBranch],
    minus: &[PreparedBranch],
    cfg: &EstimatorConfig,
    salt: u64,
    f: impl Fn(
            &PreparedBranch,
            &PreparedBranch,
            &DVector<f64>,
            &DVector<f64>,
            &DVector<f64>,
            &DVector<f64>,
        ) -> f64
        + Sync,
) -> ScalarChunks {
    let chunks: Vec<f64> = (0..CHUNKS)
        .into_par_iter()
        .map(|chunk| {
            let mut total = 0.0;
            for (bi, (bp, bm)) in plus.iter().zip(minus).enumerate() {
                let mut rng = chunk_rng(cfg.seed, salt, bi, chunk);
                let pairs = pairs_per_chunk(bp.prob, cfg);
                let mut acc = 0.0;
                for _ in 0..pairs {
                    let u: f64 = rng.gen();
                    let ci = bp
                        .comps
                        .iter()
                        .position(|c| u <= c.cum_weight)
                        .unwrap_or(bp.comps.len() - 1);
                    let dim = bp.comps[ci].mean.len();
                    let z = DVector::from_fn(dim, |_, _| rng.sample(StandardNormal));
                    let sp = &bp.comps[ci].chol_l * &z;
                    let sm = &bm.comps[ci].chol_l * &z;
                    let xp1 = &bp.comps[ci].mean + &sp;
                    let xm1 = &bp.comps[ci].mean - &sp;
                    let xp2 = &bm.comps[ci].mean + &sm;
                    let xm2 = &bm.comps[ci].mean - &sm;
                    acc += f(bp, bm, &xp1, &xm1, &xp2, &xm2);
                }
                total += bp.prob * acc / pairs as f64;
            }
            total
        })
        .collect();
    let value = chunks.iter().sum::<f64>() / CHUNKS as f64;
    ScalarChunks {
        value,
        stderr: spread_stderr(&chunks),
        chunks,
    }
}
