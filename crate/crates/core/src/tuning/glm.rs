use std::collections::HashMap;

use nalgebra::DVector;
use rayon::prelude::*;

use super::{check_columns, select_best, CandidatePoint, TuningResult, DEFAULT_GRID};
use crate::data::{CoefficientEstimate, Dataset};
use crate::error::{FlashError, Result};
use crate::glm::{
    deviance, fit_glm_flash_path, glm_block_from_lasso, glm_forward_path, ml_fit, Family, GlmData, GlmPath,
    GlmPathOptions,
};
use crate::linear::DeltaSchedule;

/// GLM path families searched by [`glm_validation_select`].
#[derive(Debug, Clone, PartialEq)]
pub enum GlmMethod {
    /// GLasso path points.
    GLasso,
    /// GLasso points relaxed toward the unpenalized fit on their support.
    GRelaxo,
    /// Greedy forward selection with unpenalized refits.
    GForward,
    /// Block GLM FLASH for every break point `1..=l_star_max`.
    BlockFlash(usize),
}

impl GlmMethod {
    pub fn name(&self) -> &'static str {
        match self {
            GlmMethod::GLasso => "glasso",
            GlmMethod::GRelaxo => "grelaxo",
            GlmMethod::GForward => "gforward",
            GlmMethod::BlockFlash(_) => "glm_flash_block",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmTuningOptions {
    pub phi_grid: Vec<f64>,
    pub path: GlmPathOptions,
}

impl Default for GlmTuningOptions {
    fn default() -> Self {
        Self {
            phi_grid: DEFAULT_GRID.to_vec(),
            path: GlmPathOptions::default(),
        }
    }
}

fn validation_deviance(coef: &CoefficientEstimate, valid: &Dataset, family: Family) -> f64 {
    let mu = coef.predict(&valid.x).map(|e| family.mean(e));
    deviance(&valid.y, &mu, family)
}

fn path_candidates(path: &GlmPath, schedule: DeltaSchedule) -> Result<Vec<CandidatePoint>> {
    (0..path.len())
        .map(|i| {
            Ok(CandidatePoint {
                schedule: schedule.clone(),
                step: i + 1,
                phi: 0.0,
                coef: path.coefficients_at(i)?,
                score: None,
            })
        })
        .collect()
}

/// Relaxes every GLasso point toward the unpenalized fit on its support.
fn relaxed_candidates(gd: &GlmData, path: &GlmPath, phi_grid: &[f64]) -> Result<Vec<CandidatePoint>> {
    let mut refits: HashMap<Vec<usize>, (DVector<f64>, f64)> = HashMap::new();
    let mut out = Vec::new();
    for (i, pt) in path.points.iter().enumerate() {
        let support = pt.support();
        if !refits.contains_key(&support) {
            let sol = ml_fit(gd, &support, &pt.beta_vector(), pt.intercept, 200)?;
            refits.insert(support.clone(), (sol.beta, sol.intercept));
        }
        let (ml_beta, ml_b0) = &refits[&support];
        for &phi in phi_grid {
            let beta: Vec<f64> = pt
                .beta
                .iter()
                .zip(ml_beta.iter())
                .map(|(b, m)| if phi == 0.0 { *b } else { (1.0 - phi) * b + phi * m })
                .collect();
            let b0 = (1.0 - phi) * pt.intercept + phi * ml_b0;
            out.push(CandidatePoint {
                schedule: DeltaSchedule::lasso(),
                step: i + 1,
                phi,
                coef: gd.to_original(&beta, b0),
                score: None,
            });
        }
    }
    Ok(out)
}

/// Fits the method on `train` and picks the point with the smallest deviance on `valid`.
pub fn glm_validation_select(
    train: &Dataset,
    valid: &Dataset,
    family: Family,
    method: &GlmMethod,
    opts: &GlmTuningOptions,
) -> Result<TuningResult> {
    check_columns(train, valid)?;
    if valid.n() == 0 {
        return Err(FlashError::InvalidArgument("empty validation set".into()));
    }
    let gd = GlmData::from_dataset(train, family)?;
    let mut table = match method {
        GlmMethod::GLasso => {
            let path = fit_glm_flash_path(&gd, 0.0, &opts.path)?;
            path_candidates(&path, DeltaSchedule::lasso())?
        }
        GlmMethod::GRelaxo => {
            let path = fit_glm_flash_path(&gd, 0.0, &opts.path)?;
            relaxed_candidates(&gd, &path, &opts.phi_grid)?
        }
        GlmMethod::GForward => {
            let steps = gd.p().min(gd.n().saturating_sub(1));
            let path = glm_forward_path(&gd, steps)?;
            path_candidates(&path, DeltaSchedule::forward())?
        }
        GlmMethod::BlockFlash(l_max) => {
            let glasso = fit_glm_flash_path(&gd, 0.0, &opts.path)?;
            if *l_max == 0 {
                path_candidates(&glasso, DeltaSchedule::lasso())?
            } else {
                let blocks: Vec<Vec<CandidatePoint>> = (1..=*l_max)
                    .into_par_iter()
                    .map(|l| {
                        let path = glm_block_from_lasso(&glasso, &gd, l, &opts.path)?;
                        path_candidates(&path, DeltaSchedule::Block { l_star: l })
                    })
                    .collect::<Result<_>>()?;
                blocks.into_iter().flatten().collect()
            }
        }
    };
    for c in &mut table {
        c.score = Some(validation_deviance(&c.coef, valid, family));
    }
    let best = select_best(&table)?;
    Ok(TuningResult {
        method: method.name().into(),
        best,
        table,
    })
}
