//! Coherence bounds under which the Lasso and block FLASH recover the signed
//! support, and the smallest eigenvalue of the adversarial equicorrelated design.
//!
//! Run with `cargo run --example coherence_bounds`.

use flash::theory::{build_recovery_design, min_eigenvalue, mu_flash_bound, mu_lasso_bound, two_level_magnitudes};

fn main() -> flash::Result<()> {
    println!("{:>3} {:>9} {:>22} {:>16}", "S", "mu_L", "mu_FL(q1=q2=0.5)", "mu_FL(q2=1/S)");
    for s in [2, 5, 10, 20, 30] {
        let half = (s as f64 / 2.0).ceil() / s as f64;
        println!(
            "{s:>3} {:>9.5} {:>22.5} {:>16.5}",
            mu_lasso_bound(s)?,
            mu_flash_bound(s, half, 1.0 - half)?,
            mu_flash_bound(s, 1.0 - 1.0 / s as f64, 1.0 / s as f64)?
        );
    }

    let s = 5;
    let magnitudes = two_level_magnitudes(s, 3, 1.0, 10.0 * (s as f64).sqrt());
    println!("\nadversarial design, S = {s}, p = 20:");
    for factor in [0.5, 1.05, 1.5, 2.0] {
        let rho = factor * mu_lasso_bound(s)?;
        match build_recovery_design(s, 20, rho, s, &magnitudes) {
            Ok(d) => println!("  rho = {rho:.4}: min eigenvalue {:.4}", min_eigenvalue(&d.sigma)),
            Err(e) => println!("  rho = {rho:.4}: rejected ({e})"),
        }
    }
    Ok(())
}
