//! Logistic regression paths: GLasso, GLM FLASH, Forward Selection and a block
//! path, then validation-deviance tuning of block FLASH against GLasso.
//!
//! Run with `cargo run --release --example logistic_paths`.

use flash::bench::{evaluate_metrics, gen_glm, CoefLaw, ResponseFamily, SimulationScenario};
use flash::glm::{fit_glm_block_flash, fit_glm_flash_path, glm_forward_path, Family, GlmData, GlmPathOptions};
use flash::tuning::{glm_validation_select, GlmMethod, GlmTuningOptions};

fn main() -> flash::Result<()> {
    let scn = SimulationScenario {
        n: 200,
        p: 30,
        s: 5,
        coef_law: CoefLaw::PointMass,
        family: ResponseFamily::Bernoulli,
        ..Default::default()
    };
    let sample = gen_glm(&scn, 0)?;
    println!("true support: {:?}", sample.support);
    let gd = GlmData::from_dataset(&sample.train, Family::BernoulliLogit)?;
    let opts = GlmPathOptions::default();

    let glasso = fit_glm_flash_path(&gd, 0.0, &opts)?;
    let half = fit_glm_flash_path(&gd, 0.5, &opts)?;
    let forward = glm_forward_path(&gd, 10)?;
    let block = fit_glm_block_flash(&gd, 3, &opts)?;
    for (name, path) in [("GLasso", &glasso), ("delta=0.5", &half), ("GForward", &forward), ("block l*=3", &block)] {
        let sizes: Vec<usize> = path.points.iter().map(|p| p.active.len()).take(12).collect();
        println!("{name:>11}: {:>4} points, active-set sizes {sizes:?}", path.len());
    }

    let tuning = GlmTuningOptions::default();
    for method in [GlmMethod::GLasso, GlmMethod::BlockFlash(10), GlmMethod::GForward] {
        let res = glm_validation_select(&sample.train, &sample.valid, Family::BernoulliLogit, &method, &tuning)?;
        let m = evaluate_metrics(&res.best.coef, &sample.beta_true)?;
        println!(
            "{:>16}: deviance {:.2}, false pos {}, false neg {}, L2 sq {:.4}",
            res.method,
            res.best.score.unwrap_or(f64::NAN),
            m.false_pos,
            m.false_neg,
            m.l2_sq
        );
    }
    Ok(())
}
