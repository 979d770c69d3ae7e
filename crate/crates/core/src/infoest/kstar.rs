//! Numerical verification of the existence of the interpolating covariance
//! `K*`: for any admissible input, the entropy difference
//! `α = h(X+N_Z|U) − h(X+N₂|U)` is matched exactly by a Gaussian of
//! covariance `K*` between 0 and the budget, and the same `K*` lower-bounds
//! the entropy difference toward the strongest receiver.
//!
//! The construction estimates `A = J(X+N₂|U)⁻¹`, `B = Σ_Z − Σ₂` and
//! `Δ = J(X+N_Z|U)⁻¹ + Σ₂ − Σ_Z − A`, root-finds `t*` with
//! `r(t*) = α` on the monotone determinant-ratio curve, and sets
//! `K* = A + t*·Δ − Σ₂`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::vector::MatrixEstimate;
use super::{entropy_plus_noise, fisher, Estimate, EstimatorConfig, Mixture};
use crate::psdcore::{
    loewner_leq, logdet_mat, min_eigenvalue, psd_project, symmetrize, PsdMatrix, Tolerance,
};
use crate::{Error, Result};

/// Outcome of the `K*` construction and its verification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KstarReport {
    pub k_star: PsdMatrix,
    pub t_star: f64,
    /// Estimated entropy difference `h(X+N_Z|U) − h(X+N₂|U)`.
    pub alpha: Estimate,
    /// `|½·log|K*+Σ_Z|/|K*+Σ₂| − α|`.
    pub equality_residual: f64,
    /// `h(X+N_Z|U) − h(X+N₁|U) − ½·log|K*+Σ_Z|/|K*+Σ₁|`, non-negative up
    /// to estimator noise.
    pub inequality_margin: Estimate,
    /// `λ_min(K*)` before projection.
    pub psd_margin: f64,
    /// `λ_min(S − K*)`.
    pub cap_margin: f64,
    /// Uncertainty scale for the matrix margins.
    pub matrix_stderr: f64,
}

impl KstarReport {
    /// All three verification clauses at the given base tolerance.
    pub fn verified(&self, tol: f64) -> bool {
        let slack = tol + 3.0 * self.matrix_stderr;
        self.psd_margin >= -slack
            && self.cap_margin >= -slack
            && self.equality_residual <= tol + 3.0 * self.alpha.stderr
            && self.inequality_margin.value
                >= -(tol + 3.0 * self.inequality_margin.stderr + 3.0 * self.matrix_stderr)
    }
}

fn entropy_with_noise(x: &Mixture, sigma: &PsdMatrix, cfg: &EstimatorConfig) -> Result<Estimate> {
    match x {
        Mixture::Scalar(_) => entropy_plus_noise(x, sigma.as_matrix()[(0, 0)], cfg),
        Mixture::Vector(mix) => {
            super::vector::entropy_mc(&mix.convolve(sigma), cfg).map(|e| e.estimate())
        }
    }
}

fn fisher_with_noise(
    x: &Mixture,
    sigma: &PsdMatrix,
    cfg: &EstimatorConfig,
) -> Result<MatrixEstimate> {
    match x {
        Mixture::Scalar(mix) => {
            let conv = Mixture::Scalar(mix.convolve(sigma.as_matrix()[(0, 0)]));
            fisher(&conv, cfg)
        }
        Mixture::Vector(mix) => fisher(&Mixture::Vector(mix.convolve(sigma)), cfg),
    }
}

fn inverse_of(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone()
        .try_inverse()
        .map(|inv| symmetrize(&inv))
        .ok_or(Error::Singular {
            min_eig: min_eigenvalue(m),
        })
}

/// Construct and verify `K*` for a mixture input under the noise chain
/// `0 ≺ Σ₁ ⪯ Σ₂ ⪯ Σ_Z` and input covariance budget `cap`.
pub fn find_kstar(
    x: &Mixture,
    sigma1: &PsdMatrix,
    sigma2: &PsdMatrix,
    sigma_z: &PsdMatrix,
    cap: &PsdMatrix,
    cfg: &EstimatorConfig,
) -> Result<KstarReport> {
    cfg.validate()?;
    let tol = Tolerance::default();
    let dim = x.dim();
    for (name, m) in [
        ("Sigma1", sigma1),
        ("Sigma2", sigma2),
        ("SigmaZ", sigma_z),
        ("S", cap),
    ] {
        if m.dim() != dim {
            return Err(Error::InvalidChannel(format!("{name} dimension mismatch")));
        }
    }
    if !sigma1.is_strictly_positive(&tol)
        || !loewner_leq(sigma1, sigma2, &tol)?
        || !loewner_leq(sigma2, sigma_z, &tol)?
    {
        return Err(Error::InvalidChannel(
            "noise covariances must satisfy 0 ≺ Σ1 ⪯ Σ2 ⪯ ΣZ".into(),
        ));
    }

    let h_z = entropy_with_noise(x, sigma_z, cfg)?;
    let h_2 = entropy_with_noise(x, sigma2, cfg)?;
    let alpha = Estimate {
        value: h_z.value - h_2.value,
        stderr: h_z.stderr + h_2.stderr,
    };

    let j2 = fisher_with_noise(x, sigma2, cfg)?;
    let jz = fisher_with_noise(x, sigma_z, cfg)?;
    let a_mat = inverse_of(&j2.pooled)?;
    let jz_inv = inverse_of(&jz.pooled)?;
    let delta_raw = &jz_inv + sigma2.as_matrix() - sigma_z.as_matrix() - &a_mat;
    let matrix_noise = j2.stderr_norm() * a_mat.norm_squared().sqrt()
        + jz.stderr_norm() * jz_inv.norm_squared().sqrt();
    let delta_min = min_eigenvalue(&delta_raw);
    let allowed = 3.0 * matrix_noise + tol.psd_tol * (1.0 + delta_raw.norm());
    if delta_min < -allowed {
        return Err(Error::EstimatorNoise(format!(
            "Fisher-difference direction has min eigenvalue {delta_min:.3e}, beyond the noise \
             allowance {allowed:.3e}"
        )));
    }
    let (delta_mat, _) = psd_project(&delta_raw);

    let a = PsdMatrix::new_unchecked(a_mat.clone());
    let b = PsdMatrix::new_unchecked(sigma_z.as_matrix() - sigma2.as_matrix());
    let delta = PsdMatrix::new_unchecked(delta_mat.clone());

    let r0 = crate::psdcore::r_function(&a, &b, &delta, 0.0)?;
    let r1 = crate::psdcore::r_function(&a, &b, &delta, 1.0)?;
    let slack = 3.0 * alpha.stderr + tol.residual_tol;
    if alpha.value > r0 + slack || alpha.value < r1 - slack {
        return Err(Error::EstimatorNoise(format!(
            "entropy difference {:.6e} falls outside [r(1), r(0)] = [{:.6e}, {:.6e}] beyond \
             the noise allowance",
            alpha.value, r1, r0
        )));
    }
    let target = alpha.value.clamp(r1, r0);
    let t_star = crate::psdcore::solve_r_equals(&a, &b, &delta, target, &tol)?;

    let k_raw = symmetrize(&(&a_mat + t_star * &delta_mat - sigma2.as_matrix()));
    let psd_margin = min_eigenvalue(&k_raw);
    let cap_margin = min_eigenvalue(&(cap.as_matrix() - &k_raw));
    let (k_proj, _) = psd_project(&k_raw);
    let k_star = PsdMatrix::new_unchecked(k_proj);

    // Equality clause evaluated on the raw construction: K*+Σ₂ = A + t*Δ.
    let num = &a_mat + t_star * &delta_mat + b.as_matrix();
    let den = &a_mat + t_star * &delta_mat;
    let equality_residual = (0.5 * (logdet_mat(&num)? - logdet_mat(&den)?) - alpha.value).abs();

    // Inequality clause toward the strongest receiver.
    let h_1 = entropy_with_noise(x, sigma1, cfg)?;
    let lhs = h_z.value - h_1.value;
    let rhs = 0.5
        * (logdet_mat(&(k_star.as_matrix() + sigma_z.as_matrix()))?
            - logdet_mat(&(k_star.as_matrix() + sigma1.as_matrix()))?);
    let inequality_margin = Estimate {
        value: lhs - rhs,
        stderr: h_z.stderr + h_1.stderr,
    };

    // Matrix-margin uncertainty via chunk-paired reconstruction when the
    // Fisher estimates carry chunks.
    let matrix_stderr = if j2.chunks.is_empty() || jz.chunks.is_empty() {
        matrix_noise
    } else {
        let v: nalgebra::DVector<f64> = {
            let eig = nalgebra::SymmetricEigen::new(k_raw.clone());
            let mut idx = 0;
            for i in 1..eig.eigenvalues.len() {
                if eig.eigenvalues[i] < eig.eigenvalues[idx] {
                    idx = i;
                }
            }
            eig.eigenvectors.column(idx).into_owned()
        };
        let k_chunks: Vec<DMatrix<f64>> = j2
            .chunks
            .iter()
            .zip(&jz.chunks)
            .filter_map(|(c2, cz)| {
                let a_c = c2.clone().try_inverse()?;
                let z_c = cz.clone().try_inverse()?;
                let d_c = &z_c + sigma2.as_matrix() - sigma_z.as_matrix() - &a_c;
                Some(&a_c + t_star * d_c - sigma2.as_matrix())
            })
            .collect();
        let n = k_chunks.len();
        if n < 2 {
            matrix_noise
        } else {
            let spread = |vals: &[f64]| -> f64 {
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let var = vals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
                    / (vals.len() - 1) as f64;
                (var / vals.len() as f64).sqrt()
            };
            let quad: Vec<f64> = k_chunks
                .iter()
                .map(|k| (v.transpose() * k * &v)[(0, 0)])
                .collect();
            // Include the entrywise spread norm: it bounds the downward
            // bias of extreme eigenvalues under matrix noise.
            let mut se_norm_sq = 0.0;
            for i in 0..dim {
                for j in 0..dim {
                    let entries: Vec<f64> = k_chunks.iter().map(|k| k[(i, j)]).collect();
                    let se = spread(&entries);
                    se_norm_sq += se * se;
                }
            }
            spread(&quad) + se_norm_sq.sqrt()
        }
    };

    Ok(KstarReport {
        k_star,
        t_star,
        alpha,
        equality_residual,
        inequality_margin,
        psd_margin,
        cap_margin,
        matrix_stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infoest::{ScalarComponent, ScalarMixture};

    fn cfg() -> EstimatorConfig {
        EstimatorConfig::default()
    }

    fn scalar_chain() -> (PsdMatrix, PsdMatrix, PsdMatrix) {
        (
            PsdMatrix::from_scalar(0.5),
            PsdMatrix::from_scalar(1.0),
            PsdMatrix::from_scalar(3.0),
        )
    }

    #[test]
    fn gaussian_input_recovers_its_covariance() {
        let (s1, s2, sz) = scalar_chain();
        let q = 0.8;
        let x = Mixture::Scalar(ScalarMixture::gaussian(q));
        let cap = PsdMatrix::from_scalar(2.0);
        let report = find_kstar(&x, &s1, &s2, &sz, &cap, &cfg()).unwrap();
        assert!(
            (report.k_star.as_matrix()[(0, 0)] - q).abs() < 1e-6,
            "{report:?}"
        );
        assert!(report.verified(1e-8), "{report:?}");
        assert!(report.equality_residual <= 1e-8_f64.max(3.0 * report.alpha.stderr));
        assert!(report.inequality_margin.value.abs() < 1e-6);
    }

    #[test]
    fn point_mass_gives_zero_kstar() {
        let (s1, s2, sz) = scalar_chain();
        let x = Mixture::Scalar(ScalarMixture::point_mass(0.7));
        let cap = PsdMatrix::from_scalar(1.0);
        let report = find_kstar(&x, &s1, &s2, &sz, &cap, &cfg()).unwrap();
        let want_alpha = 0.5 * (3.0_f64 / 1.0).ln();
        assert!((report.alpha.value - want_alpha).abs() < 1e-8, "{report:?}");
        assert!(report.k_star.as_matrix()[(0, 0)].abs() < 1e-7, "{report:?}");
        assert!(report.verified(1e-8), "{report:?}");
    }

    #[test]
    fn two_component_mixture_verifies() {
        let (s1, s2, sz) = scalar_chain();
        let x = Mixture::Scalar(
            ScalarMixture::unconditional(vec![
                ScalarComponent {
                    weight: 0.5,
                    mean: -0.6,
                    var: 0.2,
                },
                ScalarComponent {
                    weight: 0.5,
                    mean: 0.6,
                    var: 0.2,
                },
            ])
            .unwrap(),
        );
        let cap = PsdMatrix::from_scalar(1.0);
        let report = find_kstar(&x, &s1, &s2, &sz, &cap, &cfg()).unwrap();
        assert!(report.verified(1e-7), "{report:?}");
        // Strict inequality for a non-Gaussian input.
        assert!(report.inequality_margin.value > 0.0, "{report:?}");
    }

    #[test]
    fn rejects_unordered_noise_chain() {
        let x = Mixture::Scalar(ScalarMixture::gaussian(1.0));
        let cap = PsdMatrix::from_scalar(1.0);
        let err = find_kstar(
            &x,
            &PsdMatrix::from_scalar(2.0),
            &PsdMatrix::from_scalar(1.0),
            &PsdMatrix::from_scalar(3.0),
            &cap,
            &cfg(),
        );
        assert!(err.is_err());
    }
}
