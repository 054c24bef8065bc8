//! FLASH for generalized linear models: a predictor-corrector path over
//! per-coordinate L1 penalties.
//!
//! `delta = 0` gives the GLasso path and `delta = 1` greedy forward selection on
//! the score `X^T (y - mu)`.

mod corrector;
mod family;
mod path;

pub use corrector::{kkt_residual, ml_fit, solve_penalized, CorrectorOptions, Solution};
pub use family::{deviance, glm_gradient_corr, glm_loglik, glm_mu, Family, GlmData, ETA_CLAMP, WEIGHT_FLOOR};
pub use path::{
    fit_glm_block_flash, fit_glm_flash_path, glm_block_from_lasso, glm_forward_path, glm_predictor, GlmPath,
    GlmPathOptions, GlmPathPoint, WarmStart, LAMBDA_FLOOR,
};

/// Solves the penalized problem on `active` starting from `warm`.
pub fn glm_corrector(gd: &GlmData, active: &[usize], lam_active: &[f64], warm: &GlmPathPoint) -> crate::error::Result<GlmPathPoint> {
    let sol = solve_penalized(
        gd,
        active,
        lam_active,
        &warm.beta_vector(),
        warm.intercept,
        &CorrectorOptions::default(),
    )?;
    let max_lam = lam_active.iter().copied().fold(0.0, f64::max);
    Ok(GlmPathPoint::from_solution(&sol, active, lam_active, max_lam))
}
