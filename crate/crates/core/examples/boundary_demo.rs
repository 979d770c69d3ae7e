//! Sweep the secrecy boundary of a two-user aligned channel, certify one
//! point, and print the region table.
//!
//! Run with: cargo run --release --example boundary_demo

use nalgebra::DMatrix;
use secrecy_core::boundary_opt::{maximize_weighted_secrecy, OptimOptions, WeightVector};
use secrecy_core::channel_model::AlignedChannel;
use secrecy_core::enhancement::{enhance, touching_point_check, verify_enhancement, TouchingConfig};
use secrecy_core::psdcore::{PsdMatrix, Tolerance};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tol = Tolerance::default();
    let channel = AlignedChannel::new(
        PsdMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.8]), &tol)?,
        vec![
            PsdMatrix::new(DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.6]), &tol)?,
            PsdMatrix::new(DMatrix::from_row_slice(2, 2, &[0.9, -0.2, -0.2, 1.1]), &tol)?,
        ],
        PsdMatrix::new(DMatrix::from_row_slice(2, 2, &[1.5, 0.0, 0.0, 1.4]), &tol)?,
        &tol,
    )?;

    println!("  mu_1   mu_2      R_1 (nats)   R_2 (nats)   kkt residual");
    let steps = 9;
    for i in 0..steps {
        let s = i as f64 / (steps - 1) as f64;
        let mu = WeightVector::new(vec![1.0 - s, s])?;
        let opts = OptimOptions {
            seed: i as u64,
            ..OptimOptions::default()
        };
        let out = maximize_weighted_secrecy(&channel, &mu, &opts)?;
        println!(
            "  {:.3}  {:.3}    {:.8}   {:.8}   {:.1e}",
            1.0 - s,
            s,
            out.rates.rates[0],
            out.rates.rates[1],
            out.certificate.max_residual(),
        );
    }

    // Certify the equal-weight point: shrink the noises into a degraded
    // chain that touches the boundary there.
    let mu = WeightVector::new(vec![0.5, 0.5])?;
    let out = maximize_weighted_secrecy(&channel, &mu, &OptimOptions::default())?;
    let enhanced = enhance(&channel, &out.partition, &out.certificate, &mu)?;
    let report = verify_enhancement(&channel, &out.partition, &out.certificate, &mu, &enhanced)?;
    let touching = touching_point_check(
        &channel,
        &out.partition,
        &mu,
        &enhanced,
        &TouchingConfig::default(),
    )?;
    println!("\nequal-weight certificate:");
    println!("  enhancement residuals: {:?}", report.residuals());
    println!(
        "  touching gap {:.2e}, search excess {:.2e}",
        touching.equality_gap, touching.search_excess
    );
    Ok(())
}
