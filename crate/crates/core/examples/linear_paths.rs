//! Lasso, FLASH and Forward Selection paths on one synthetic dataset.
//!
//! Shows how the shrinkage `delta` changes the order in which variables enter
//! and how quickly the coefficients approach the least-squares fit.
//!
//! Run with `cargo run --release --example linear_paths`.

use flash::bench::{gen_linear, SimulationScenario};
use flash::data::standardize;
use flash::linear::{fit_flash_path, path_coefficients_at, DeltaSchedule};

fn main() -> flash::Result<()> {
    let scn = SimulationScenario {
        n: 80,
        p: 30,
        s: 5,
        rho: 0.3,
        ..Default::default()
    };
    let sample = gen_linear(&scn, 0)?;
    println!("true support: {:?}", sample.support);
    let sd = standardize(&sample.train)?;

    for schedule in [
        DeltaSchedule::lasso(),
        DeltaSchedule::global(0.5)?,
        DeltaSchedule::forward(),
        DeltaSchedule::block(3)?,
    ] {
        let path = fit_flash_path(&sd, &schedule, None)?;
        let entered: Vec<usize> = path.breakpoints.iter().filter_map(|b| b.entered).take(8).collect();
        println!("\n{schedule:?}: {} breakpoints, first entries {entered:?}", path.len());
        println!("{:>5} {:>6} {:>8} {:>12}", "step", "|A|", "gamma", "max|corr|");
        for b in path.breakpoints.iter().take(6) {
            println!("{:>5} {:>6} {:>8.4} {:>12.5}", b.step, b.active.len(), b.gamma, b.max_abs_corr);
        }
        // coefficients at step 5, and fully relaxed toward least squares
        let step = 5.min(path.len());
        let at = path_coefficients_at(&path, step, 0.0)?;
        let relaxed = path_coefficients_at(&path, step, 1.0)?;
        let err = |b: &[f64]| -> f64 {
            b.iter().zip(sample.beta_true.iter()).map(|(e, t)| (e - t) * (e - t)).sum()
        };
        println!(
            "step {step}: squared error {:.4} (phi = 0), {:.4} (phi = 1)",
            err(&at.beta),
            err(&relaxed.beta)
        );
    }
    Ok(())
}
