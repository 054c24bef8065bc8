use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::engine::{advance_step, Breakpoint, PathState};
use super::schedule::DeltaSchedule;
use crate::data::{destandardize, CoefficientEstimate, Standardization, StandardizedDataset};
use crate::error::{FlashError, Result};

/// Correlations below this (relative to the response norm) count as zero.
pub const TERMINATION_TOL: f64 = 1e-8;

/// A fitted FLASH path on the standardized scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlashPath {
    pub schedule: DeltaSchedule,
    pub breakpoints: Vec<Breakpoint>,
    pub standardization: Standardization,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl FlashPath {
    pub fn len(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.breakpoints.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("path serialization cannot fail")
    }
}

/// Default cap on logical steps: `8 min(p, n)`.
pub fn default_max_steps(sd: &StandardizedDataset) -> usize {
    8 * sd.p().min(sd.n())
}

/// Runs the FLASH path from the null model until every correlation is zero,
/// the active set is full, or `max_steps` logical steps have been taken.
pub fn fit_flash_path(
    sd: &StandardizedDataset,
    schedule: &DeltaSchedule,
    max_steps: Option<usize>,
) -> Result<FlashPath> {
    schedule.validate()?;
    let max_steps = max_steps.unwrap_or_else(|| default_max_steps(sd));
    if max_steps == 0 {
        return Err(FlashError::InvalidArgument("max_steps must be at least 1".into()));
    }
    let (n, p) = (sd.n(), sd.p());
    let cap = p.min(n.saturating_sub(1));
    let tol = TERMINATION_TOL * sd.ys.norm().max(1.0);

    let mut state = PathState::new(sd);
    let mut breakpoints: Vec<Breakpoint> = Vec::new();
    while state.step <= max_steps && state.max_abs_corr() > tol {
        let delta = schedule.delta_at(state.step);
        let frags = advance_step(sd, &mut state, delta)?;
        let Some(last) = frags.last() else { break };
        let reached_ls = last.gamma >= 1.0 - 1e-12;
        breakpoints.extend(frags);
        let nothing_left = (0..p).all(|j| state.active.contains(&j) || state.barred.contains(&j));
        if reached_ls && (nothing_left || (state.active.len() >= cap && state.suspended.is_empty())) {
            break;
        }
    }

    Ok(FlashPath {
        schedule: schedule.clone(),
        breakpoints,
        standardization: sd.scaling.clone(),
        warnings: state.warnings,
    })
}

/// `(1 - phi) beta_end + phi relax_end`.
pub fn relaxation_point(b: &Breakpoint, phi: f64) -> Result<DVector<f64>> {
    if !(0.0..=1.0).contains(&phi) {
        return Err(FlashError::InvalidArgument(format!("phi must lie in [0, 1], got {phi}")));
    }
    Ok(DVector::from_iterator(
        b.beta_end.len(),
        b.beta_end
            .iter()
            .zip(&b.relax_end)
            .map(|(e, r)| if phi == 0.0 { *e } else if phi == 1.0 { *r } else { (1.0 - phi) * e + phi * r }),
    ))
}

/// Original-scale coefficients at breakpoint `step` (1-based) and relaxation `phi`.
pub fn path_coefficients_at(path: &FlashPath, step: usize, phi: f64) -> Result<CoefficientEstimate> {
    if step == 0 || step > path.len() {
        return Err(FlashError::InvalidArgument(format!(
            "step {step} outside 1..={}",
            path.len()
        )));
    }
    let beta = relaxation_point(&path.breakpoints[step - 1], phi)?;
    destandardize(&beta, &path.standardization)
}
