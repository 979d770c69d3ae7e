//! Scalar-mixture estimators via Gauss–Hermite quadrature against each
//! Gaussian component. Densities, scores and conditional means are exact
//! mixture formulas; the only numerical step is the outer expectation, and
//! the reported `stderr` is a node-halving truncation estimate.

use super::quad::gauss_expectation;
use super::{Estimate, EstimatorConfig, ScalarComponent, ScalarMixture};
use crate::Result;

const LOG_2PI: f64 = 1.8378770664093453;

fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LOG_2PI + var.ln()) - d * d / (2.0 * var)
}

/// `log f(x)` of one branch.
fn log_density(comps: &[ScalarComponent], x: f64) -> f64 {
    let mut max = f64::NEG_INFINITY;
    let logs: Vec<f64> = comps
        .iter()
        .map(|c| {
            let l = c.weight.ln() + log_normal(x, c.mean, c.var);
            if l > max {
                max = l;
            }
            l
        })
        .collect();
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

/// Score `ρ(x) = d/dx log f(x)` of one branch, from exact responsibilities.
fn score(comps: &[ScalarComponent], x: f64) -> f64 {
    let log_f = log_density(comps, x);
    comps
        .iter()
        .map(|c| {
            let r = (c.weight.ln() + log_normal(x, c.mean, c.var) - log_f).exp();
            r * (-(x - c.mean) / c.var)
        })
        .sum()
}

/// Evaluate `Σ_i w_i·E_{component i}[g]` for one branch at a given node
/// count.
fn branch_expectation(
    comps: &[ScalarComponent],
    nodes: usize,
    g: impl Fn(f64) -> f64 + Copy,
) -> f64 {
    comps
        .iter()
        .map(|c| c.weight * gauss_expectation(c.mean, c.var, nodes, g))
        .sum()
}

/// Branch-averaged expectation with a node-halving truncation estimate.
fn mixture_expectation(
    mix: &ScalarMixture,
    cfg: &EstimatorConfig,
    g: impl Fn(&[ScalarComponent], f64) -> f64 + Copy,
) -> Estimate {
    let full: f64 = mix
        .branches
        .iter()
        .map(|(p, comps)| p * branch_expectation(comps, cfg.quad_nodes, |x| g(comps, x)))
        .sum();
    let half: f64 = mix
        .branches
        .iter()
        .map(|(p, comps)| {
            p * branch_expectation(comps, (cfg.quad_nodes / 2).max(2), |x| g(comps, x))
        })
        .sum();
    Estimate {
        value: full,
        stderr: (full - half).abs(),
    }
}

/// Conditional differential entropy `h(X|U) = −E[log f(X|U)]`.
pub fn entropy(mix: &ScalarMixture, cfg: &EstimatorConfig) -> Result<Estimate> {
    let e = mixture_expectation(mix, cfg, |comps, x| -log_density(comps, x));
    Ok(e)
}

/// Conditional Fisher information `J(X|U) = E[ρ(X|U)²]`.
pub fn fisher(mix: &ScalarMixture, cfg: &EstimatorConfig) -> Result<Estimate> {
    let e = mixture_expectation(mix, cfg, |comps, x| {
        let s = score(comps, x);
        s * s
    });
    Ok(e)
}

/// Stein corollary residuals: (`E[ρ(X|U)]`, `E[X·ρ(X|U)] + 1`); both are
/// zero in exact arithmetic.
pub fn stein_residuals(mix: &ScalarMixture, cfg: &EstimatorConfig) -> (Estimate, Estimate) {
    let mean_rho = mixture_expectation(mix, cfg, score);
    let x_rho = mixture_expectation(mix, cfg, |comps, x| x * score(comps, x));
    (
        mean_rho,
        Estimate {
            value: x_rho.value + 1.0,
            stderr: x_rho.stderr,
        },
    )
}

/// MMSE of `X` from `√t·X + N` (and the conditioning): the Bayes estimator
/// for mixtures is closed-form, leaving one quadrature over the
/// observation.
pub fn mmse(mix: &ScalarMixture, t: f64, cfg: &EstimatorConfig) -> Result<f64> {
    let mut acc = 0.0;
    for (p, comps) in &mix.branches {
        acc += p * branch_mmse(comps, t, cfg.quad_nodes);
    }
    Ok(acc)
}

fn branch_mmse(comps: &[ScalarComponent], t: f64, nodes: usize) -> f64 {
    let rt = t.sqrt();
    // Observation mixture: component i becomes N(√t·m_i, t·v_i + 1).
    let obs: Vec<ScalarComponent> = comps
        .iter()
        .map(|c| ScalarComponent {
            weight: c.weight,
            mean: rt * c.mean,
            var: t * c.var + 1.0,
        })
        .collect();
    let posterior_var = |y: f64| -> f64 {
        let log_g = log_density(&obs, y);
        let mut mean = 0.0;
        let mut second = 0.0;
        for (c, o) in comps.iter().zip(&obs) {
            let resp = (o.weight.ln() + log_normal(y, o.mean, o.var) - log_g).exp();
            // Per-component posterior of X given the observation.
            let gain = rt * c.var / o.var;
            let m_post = c.mean + gain * (y - o.mean);
            let v_post = c.var / o.var;
            mean += resp * m_post;
            second += resp * (v_post + m_post * m_post);
        }
        second - mean * mean
    };
    obs.iter()
        .map(|o| o.weight * gauss_expectation(o.mean, o.var, nodes, posterior_var))
        .sum()
}
