//! Runs a simulation scenario and prints the per-method summary table.
//!
//! Usage: `cargo run --release --example simulation_benchmark [scenario.cfg] [reps] [methods]`
//!
//! `methods` is a comma-separated list such as `FLASH_B,Lasso`.

use flash::bench::{run_benchmark, BenchMethod, BenchOptions, SimulationScenario};

fn main() -> flash::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/linear_sparse.cfg").to_string());
    let mut scn = SimulationScenario::load(&path)?;
    if let Some(reps) = args.next() {
        scn.reps = reps
            .parse()
            .map_err(|_| flash::FlashError::InvalidArgument(format!("invalid reps {reps:?}")))?;
    }
    let methods = match args.next() {
        Some(list) => list.split(',').map(str::parse).collect::<flash::Result<Vec<BenchMethod>>>()?,
        None => BenchMethod::defaults(scn.family),
    };
    let start = std::time::Instant::now();
    let report = run_benchmark(&scn, &methods, &BenchOptions::default())?;
    print!("{}", report.to_csv());
    eprintln!("{} replicates in {:.1}s", scn.reps, start.elapsed().as_secs_f64());
    Ok(())
}
