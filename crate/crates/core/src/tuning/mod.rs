//! Model selection over `(schedule, step, phi)`.
//!
//! Every fitted path is evaluated on a fixed relaxation grid; candidates are
//! scored on the original scale of the response by validation mean squared
//! error or by k-fold cross-validation.

mod glm;

pub use glm::{glm_validation_select, GlmMethod, GlmTuningOptions};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::data::{standardize, CoefficientEstimate, Dataset};
use crate::error::{FlashError, Result};
use crate::linear::{fit_flash_path, path_coefficients_at, DeltaSchedule, FlashPath};

/// Default grid for both `delta` and the relaxation `phi`.
pub const DEFAULT_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Default largest block break point: `min(20, n / 4)`.
pub fn default_l_star_max(n: usize) -> usize {
    20.min(n / 4)
}

/// Which family of paths to search.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    /// One path per `delta` in the grid, relaxation over the `phi` grid.
    GlobalFlash(Vec<f64>),
    /// One block path per break point `1..=l_star_max`; `0` means the Lasso path only.
    BlockFlash(usize),
    /// The Lasso path without relaxation.
    Lasso,
    /// The Lasso path with relaxation toward the least-squares refits.
    Relaxo,
    /// Forward selection.
    Forward,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::GlobalFlash(_) => "flash_global",
            Method::BlockFlash(_) => "flash_block",
            Method::Lasso => "lasso",
            Method::Relaxo => "relaxo",
            Method::Forward => "forward",
        }
    }

    pub fn schedules(&self) -> Result<Vec<DeltaSchedule>> {
        match self {
            Method::GlobalFlash(deltas) => {
                if deltas.is_empty() {
                    return Err(FlashError::InvalidArgument("empty delta grid".into()));
                }
                deltas.iter().map(|&d| DeltaSchedule::global(d)).collect()
            }
            Method::BlockFlash(0) => Ok(vec![DeltaSchedule::lasso()]),
            Method::BlockFlash(l) => (1..=*l).map(DeltaSchedule::block).collect(),
            Method::Lasso | Method::Relaxo => Ok(vec![DeltaSchedule::lasso()]),
            Method::Forward => Ok(vec![DeltaSchedule::forward()]),
        }
    }

    fn phi_grid(&self, grid: &[f64]) -> Vec<f64> {
        match self {
            Method::Lasso | Method::Forward => vec![0.0],
            _ => grid.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningOptions {
    pub phi_grid: Vec<f64>,
    /// Step cap per path; `None` uses the engine default.
    pub max_steps: Option<usize>,
}

impl Default for TuningOptions {
    fn default() -> Self {
        Self {
            phi_grid: DEFAULT_GRID.to_vec(),
            max_steps: None,
        }
    }
}

impl TuningOptions {
    fn validate(&self) -> Result<()> {
        if self.phi_grid.is_empty() || self.phi_grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(FlashError::InvalidArgument("phi grid must be nonempty and inside [0, 1]".into()));
        }
        Ok(())
    }
}

/// One `(schedule, step, phi)` coordinate with its coefficients and score.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePoint {
    pub schedule: DeltaSchedule,
    /// Breakpoint (or path point) index, starting at 1.
    pub step: usize,
    pub phi: f64,
    pub coef: CoefficientEstimate,
    pub score: Option<f64>,
}

impl CandidatePoint {
    fn coordinate_json(&self) -> Value {
        let mut v = match &self.schedule {
            DeltaSchedule::Global { delta } => json!({ "delta": delta }),
            DeltaSchedule::Block { l_star } => json!({ "l_star": l_star }),
            DeltaSchedule::Explicit { deltas } => json!({ "deltas": deltas }),
        };
        v["step"] = json!(self.step);
        v["phi"] = json!(self.phi);
        v["score"] = json!(self.score);
        v["support"] = json!(self.coef.support);
        v
    }

    fn to_json(&self) -> Value {
        let mut v = self.coordinate_json();
        v["beta"] = json!(self.coef.beta);
        v["intercept"] = json!(self.coef.intercept);
        v
    }

    /// Short label of the schedule, e.g. `delta=0.25` or `l_star=3`.
    pub fn schedule_label(&self) -> String {
        match &self.schedule {
            DeltaSchedule::Global { delta } => format!("delta={delta}"),
            DeltaSchedule::Block { l_star } => format!("l_star={l_star}"),
            DeltaSchedule::Explicit { .. } => "explicit".into(),
        }
    }
}

/// The selected candidate and the full scored table.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningResult {
    pub method: String,
    pub best: CandidatePoint,
    pub table: Vec<CandidatePoint>,
}

impl TuningResult {
    pub fn to_json_value(&self) -> Value {
        json!({
            "method": self.method,
            "best": self.best.to_json(),
            "table": self.table.iter().map(CandidatePoint::coordinate_json).collect::<Vec<_>>(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_json_value()).expect("json serialization cannot fail")
    }

    /// One row per candidate: `schedule,step,phi,nonzero,score,rmse`.
    pub fn score_table_csv(&self) -> String {
        let mut out = String::from("schedule,step,phi,nonzero,score,rmse\n");
        for c in &self.table {
            let s = c.score.unwrap_or(f64::NAN);
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                c.schedule_label(),
                c.step,
                c.phi,
                c.coef.nonzero(),
                s,
                s.sqrt()
            ));
        }
        out
    }
}

/// One unscored candidate per `(breakpoint, phi)` pair, on the original scale.
pub fn enumerate_candidates(path: &FlashPath, phi_grid: &[f64]) -> Result<Vec<CandidatePoint>> {
    let mut out = Vec::with_capacity(path.len() * phi_grid.len());
    for step in 1..=path.len() {
        for &phi in phi_grid {
            out.push(CandidatePoint {
                schedule: path.schedule.clone(),
                step,
                phi,
                coef: path_coefficients_at(path, step, phi)?,
                score: None,
            });
        }
    }
    Ok(out)
}

fn mse(coef: &CoefficientEstimate, x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    let r = y - coef.predict(x);
    r.norm_squared() / y.len() as f64
}

/// Lowest score; ties go to fewer nonzero coefficients, then the earlier step.
fn select_best(table: &[CandidatePoint]) -> Result<CandidatePoint> {
    let mut best: Option<&CandidatePoint> = None;
    for c in table {
        let Some(s) = c.score.filter(|s| s.is_finite()) else { continue };
        let better = match best {
            None => true,
            Some(b) => {
                let bs = b.score.unwrap();
                s < bs || (s == bs && (c.coef.nonzero(), c.step) < (b.coef.nonzero(), b.step))
            }
        };
        if better {
            best = Some(c);
        }
    }
    best.cloned()
        .ok_or_else(|| FlashError::InvalidArgument("no candidate with a finite score".into()))
}

fn check_columns(a: &Dataset, b: &Dataset) -> Result<()> {
    if a.p() != b.p() {
        return Err(FlashError::Shape(format!(
            "training data has {} predictors, validation data {}",
            a.p(),
            b.p()
        )));
    }
    Ok(())
}

fn fit_all(train: &Dataset, method: &Method, opts: &TuningOptions) -> Result<Vec<FlashPath>> {
    let sd = standardize(train)?;
    let schedules = method.schedules()?;
    schedules
        .par_iter()
        .map(|s| fit_flash_path(&sd, s, opts.max_steps))
        .collect()
}

/// Fits the method's paths on `train` and picks the candidate with the
/// smallest mean squared error on `valid`.
pub fn validation_select(train: &Dataset, valid: &Dataset, method: &Method, opts: &TuningOptions) -> Result<TuningResult> {
    opts.validate()?;
    check_columns(train, valid)?;
    if valid.n() == 0 {
        return Err(FlashError::InvalidArgument("empty validation set".into()));
    }
    let paths = fit_all(train, method, opts)?;
    let phi = method.phi_grid(&opts.phi_grid);
    let mut table = Vec::new();
    for path in &paths {
        let mut cands = enumerate_candidates(path, &phi)?;
        for c in &mut cands {
            c.score = Some(mse(&c.coef, &valid.x, &valid.y));
        }
        table.extend(cands);
    }
    let best = select_best(&table)?;
    Ok(TuningResult {
        method: method.name().into(),
        best,
        table,
    })
}

/// Seeded permutation split into `k` contiguous blocks.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    (0..k).map(|f| idx[f * n / k..(f + 1) * n / k].to_vec()).collect()
}

/// k-fold cross-validation over the coordinates of the full-data paths.
///
/// Each fold refits every path on the remaining rows; a coordinate beyond the
/// end of a fold's path uses its last breakpoint. The score is the mean over
/// folds of the held-out mean squared error, and the reported coefficients are
/// those of the full-data path at the chosen coordinate.
pub fn kfold_cv_select(d: &Dataset, k: usize, method: &Method, seed: u64, opts: &TuningOptions) -> Result<TuningResult> {
    opts.validate()?;
    if k < 2 || k > d.n() {
        return Err(FlashError::InvalidArgument(format!(
            "number of folds must lie in 2..={}, got {k}",
            d.n()
        )));
    }
    let full = fit_all(d, method, opts)?;
    let phi = method.phi_grid(&opts.phi_grid);
    let mut table = Vec::new();
    for path in &full {
        table.extend(enumerate_candidates(path, &phi)?);
    }

    let folds = fold_assignment(d.n(), k, seed);
    let fold_scores: Vec<Vec<f64>> = folds
        .par_iter()
        .map(|held| -> Result<Vec<f64>> {
            let mut keep = vec![true; d.n()];
            for &i in held {
                keep[i] = false;
            }
            let rest: Vec<usize> = (0..d.n()).filter(|&i| keep[i]).collect();
            let train = d.select_rows(&rest)?;
            let vx = d.x.select_rows(held.iter());
            let vy = DVector::from_iterator(held.len(), held.iter().map(|&i| d.y[i]));
            let paths = fit_all(&train, method, opts)?;
            let sched_index = |s: &DeltaSchedule| full.iter().position(|p| &p.schedule == s).unwrap();
            table
                .iter()
                .map(|c| {
                    let path = &paths[sched_index(&c.schedule)];
                    let coef = if path.is_empty() {
                        CoefficientEstimate::new(vec![0.0; d.p()], train.y.mean())
                    } else {
                        path_coefficients_at(path, c.step.min(path.len()), c.phi)?
                    };
                    Ok(mse(&coef, &vx, &vy))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    for (i, c) in table.iter_mut().enumerate() {
        let total: f64 = fold_scores.iter().map(|f| f[i]).sum();
        c.score = Some(total / k as f64);
    }
    let best = select_best(&table)?;
    Ok(TuningResult {
        method: method.name().into(),
        best,
        table,
    })
}

/// Validation data or cross-validation for the convenience wrappers.
#[derive(Debug, Clone, Copy)]
pub enum Selector<'a> {
    Validation(&'a Dataset),
    KFold { k: usize, seed: u64 },
}

fn select(train: &Dataset, sel: Selector, method: &Method, opts: &TuningOptions) -> Result<TuningResult> {
    match sel {
        Selector::Validation(v) => validation_select(train, v, method, opts),
        Selector::KFold { k, seed } => kfold_cv_select(train, k, method, seed, opts),
    }
}

/// Global FLASH tuned over `delta_grid`, the steps and the relaxation grid.
pub fn fit_global_flash(train: &Dataset, sel: Selector, delta_grid: &[f64], opts: &TuningOptions) -> Result<TuningResult> {
    select(train, sel, &Method::GlobalFlash(delta_grid.to_vec()), opts)
}

/// Block FLASH tuned over the break points `1..=l_star_max`, the steps and the relaxation grid.
pub fn fit_block_flash(train: &Dataset, sel: Selector, l_star_max: usize, opts: &TuningOptions) -> Result<TuningResult> {
    select(train, sel, &Method::BlockFlash(l_star_max), opts)
}
