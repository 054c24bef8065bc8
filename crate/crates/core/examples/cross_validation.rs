//! Ten-fold cross-validation of global FLASH over `delta`, step and relaxation,
//! followed by the RMSE curve against the number of steps for each `delta`.
//!
//! Run with `cargo run --release --example cross_validation`.

use flash::bench::{gen_linear, SimulationScenario};
use flash::tuning::{fit_block_flash, fit_global_flash, Selector, TuningOptions, DEFAULT_GRID};

fn main() -> flash::Result<()> {
    let scn = SimulationScenario {
        n: 120,
        p: 60,
        s: 8,
        rho: 0.2,
        ..Default::default()
    };
    let sample = gen_linear(&scn, 1)?;
    let opts = TuningOptions::default();
    let sel = Selector::KFold { k: 10, seed: 7 };

    let global = fit_global_flash(&sample.train, sel, &DEFAULT_GRID, &opts)?;
    println!(
        "global FLASH: {} at step {}, phi {}, CV MSE {:.4}, {} nonzero",
        global.best.schedule_label(),
        global.best.step,
        global.best.phi,
        global.best.score.unwrap_or(f64::NAN),
        global.best.coef.nonzero()
    );
    let block = fit_block_flash(&sample.train, sel, 15, &opts)?;
    println!(
        "block FLASH:  {} at step {}, phi {}, CV MSE {:.4}, {} nonzero",
        block.best.schedule_label(),
        block.best.step,
        block.best.phi,
        block.best.score.unwrap_or(f64::NAN),
        block.best.coef.nonzero()
    );

    // unrelaxed CV RMSE by step, one column per delta
    println!("\nstep  {}", DEFAULT_GRID.map(|d| format!("d={d:<6}")).join(" "));
    for step in 1..=15 {
        let row: Vec<String> = DEFAULT_GRID
            .iter()
            .map(|&d| {
                global
                    .table
                    .iter()
                    .find(|c| c.step == step && c.phi == 0.0 && c.schedule_label() == format!("delta={d}"))
                    .and_then(|c| c.score)
                    .map_or("      -".into(), |s| format!("{:8.4}", s.sqrt()))
            })
            .collect();
        println!("{step:>4}  {}", row.join(" "));
    }
    Ok(())
}
