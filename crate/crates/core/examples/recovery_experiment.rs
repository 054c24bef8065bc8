//! Signed-support recovery on an equicorrelated design just above the Lasso
//! coherence bound.
//!
//! Run with `cargo run --release --example recovery_experiment`.

use flash::theory::{
    build_recovery_design, mu_flash_bound, mu_lasso_bound, recovery_csv, recovery_experiment, two_level_magnitudes,
    RecoveryMethod,
};

fn main() -> flash::Result<()> {
    let (s, p, n) = (5, 20, 200);
    let mu_l = mu_lasso_bound(s)?;
    let rho = 1.05 * mu_l;
    // three large coefficients, two small ones, separated by 10 sqrt(S)
    let magnitudes = two_level_magnitudes(s, 3, 1.0, 10.0 * (s as f64).sqrt());
    let design = build_recovery_design(s, p, rho, s, &magnitudes)?;
    let mu_fl = mu_flash_bound(s, design.q1, design.q2)?;
    println!("mu_L = {mu_l:.4}, mu_FL = {mu_fl:.4}, rho = {rho:.4}");

    let methods = [
        RecoveryMethod::Lasso,
        RecoveryMethod::BlockFlash {
            l_star_max: 20.min(n / 4),
        },
    ];
    let outcomes = recovery_experiment(&design, n, 0.05, &methods, 100, 2009)?;
    print!("{}", recovery_csv(&design, n, &outcomes));
    Ok(())
}
