use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::corrector::{ml_fit, solve_penalized, CorrectorOptions, Solution};
use super::family::{Family, GlmData, ETA_CLAMP};
use crate::data::CoefficientEstimate;
use crate::error::{FlashError, Result};

/// Paths stop once the largest penalty falls below this fraction of its start.
pub const LAMBDA_FLOOR: f64 = 1e-6;

/// One corrector solution along a GLM path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmPathPoint {
    /// Penalties of the active coordinates, in the order of `active`.
    #[serde(rename = "lam_active")]
    pub lam: Vec<f64>,
    pub active: Vec<usize>,
    /// Coefficients on the standardized scale; zero off the active set.
    pub beta: Vec<f64>,
    pub intercept: f64,
    /// Grid level of this point: the largest active penalty, or the entry
    /// gradient for unpenalized forward steps.
    pub max_lam: f64,
    #[serde(skip)]
    pub mu: Vec<f64>,
    /// `X^T (y - mu)` for every column.
    #[serde(skip)]
    pub grad: Vec<f64>,
    #[serde(skip)]
    pub corrector_iterations: usize,
}

impl GlmPathPoint {
    pub(crate) fn from_solution(sol: &Solution, active: &[usize], lam: &[f64], max_lam: f64) -> Self {
        Self {
            lam: lam.to_vec(),
            active: active.to_vec(),
            beta: sol.beta.iter().copied().collect(),
            intercept: sol.intercept,
            max_lam,
            mu: sol.mu.iter().copied().collect(),
            grad: sol.grad.iter().copied().collect(),
            corrector_iterations: sol.outer_iterations,
        }
    }

    pub fn beta_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.beta)
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.beta.len()).filter(|&j| self.beta[j] != 0.0).collect()
    }
}

/// A sequence of GLM path points on the standardized scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmPath {
    pub family: Family,
    pub delta: f64,
    pub epsilon: f64,
    /// Break point of a block path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_star: Option<usize>,
    /// False when a block path ended before acquiring `l_star` variables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_star_reached: Option<bool>,
    pub points: Vec<GlmPathPoint>,
    pub col_means: Vec<f64>,
    pub col_scales: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl GlmPath {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("path serialization cannot fail")
    }

    /// Original-scale coefficients of point `i` (0-based).
    pub fn coefficients_at(&self, i: usize) -> Result<CoefficientEstimate> {
        let pt = self.points.get(i).ok_or_else(|| {
            FlashError::InvalidArgument(format!("point {i} outside 0..{}", self.points.len()))
        })?;
        let b: Vec<f64> = pt
            .beta
            .iter()
            .zip(&self.col_scales)
            .map(|(b, s)| if *b == 0.0 { 0.0 } else { b / s })
            .collect();
        let shift: f64 = b.iter().zip(&self.col_means).map(|(b, m)| b * m).sum();
        Ok(CoefficientEstimate::new(b, pt.intercept - shift))
    }
}

/// Where the corrector starts each solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WarmStart {
    /// Linear extrapolation of the last two solutions.
    Predictor,
    /// The previous solution.
    Previous,
    /// All coefficients zero, null intercept.
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmPathOptions {
    /// Grid shrink: each outer iteration scales the penalties by `1 - epsilon`.
    pub epsilon: f64,
    /// Defaults to `10 min(n, p)`.
    pub max_points: Option<usize>,
    pub warm_start: WarmStart,
    pub corrector: CorrectorOptions,
}

impl Default for GlmPathOptions {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            max_points: None,
            warm_start: WarmStart::Predictor,
            corrector: CorrectorOptions::default(),
        }
    }
}

impl GlmPathOptions {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 0.2) {
            return Err(FlashError::InvalidArgument(format!(
                "epsilon must lie in (0, 0.2], got {}",
                self.epsilon
            )));
        }
        if self.max_points == Some(0) {
            return Err(FlashError::InvalidArgument("max_points must be at least 1".into()));
        }
        Ok(())
    }
}

/// Warm start for the solve at grid level `next_max_lam`: the linear
/// extrapolation through `before` and `prev` against their grid levels when
/// both share an active set, otherwise a copy of `prev`.
pub fn glm_predictor(prev: &GlmPathPoint, before: Option<&GlmPathPoint>, next_max_lam: f64) -> GlmPathPoint {
    let mut out = prev.clone();
    out.max_lam = next_max_lam;
    if let Some(b) = before {
        let span = prev.max_lam - b.max_lam;
        if b.active == prev.active && span.abs() > 0.0 && span.is_finite() {
            let t = (next_max_lam - prev.max_lam) / span;
            for &j in &prev.active {
                out.beta[j] = prev.beta[j] + t * (prev.beta[j] - b.beta[j]);
            }
            out.intercept = prev.intercept + t * (prev.intercept - b.intercept);
        }
    }
    out
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(0.0, f64::max)
}

struct Runner<'a> {
    gd: &'a GlmData,
    delta: f64,
    opts: GlmPathOptions,
    cap: usize,
    lam0: f64,
    max_points: usize,
    active: Vec<usize>,
    lam: Vec<f64>,
    sol: Solution,
    points: Vec<GlmPathPoint>,
    warnings: Vec<String>,
}

impl<'a> Runner<'a> {
    fn new(gd: &'a GlmData, delta: f64, opts: &GlmPathOptions) -> Self {
        let (n, p) = (gd.n(), gd.p());
        let b0 = gd.null_intercept();
        let eta = DVector::from_element(n, b0);
        let mu = eta.map(|e| gd.family.mean(e));
        let grad = gd.x.tr_mul(&(&gd.y - &mu));
        let lam0 = grad.amax();
        let sol = Solution {
            beta: DVector::zeros(p),
            intercept: b0,
            eta,
            mu,
            grad,
            outer_iterations: 0,
            kkt_residual: 0.0,
        };
        Self {
            gd,
            delta,
            opts: opts.clone(),
            cap: p.min(n.saturating_sub(1)),
            lam0,
            max_points: opts.max_points.unwrap_or(10 * n.min(p)),
            active: Vec::new(),
            lam: Vec::new(),
            sol,
            points: Vec::new(),
            warnings: Vec::new(),
        }
    }

    /// Continues from the last point of an existing path.
    fn resume(gd: &'a GlmData, delta: f64, opts: &GlmPathOptions, lam0: f64, prefix: &[GlmPathPoint]) -> Result<Self> {
        let mut r = Self::new(gd, delta, opts);
        r.lam0 = lam0;
        let last = prefix.last().ok_or_else(|| FlashError::InvalidArgument("empty path prefix".into()))?;
        r.active = last.active.clone();
        r.lam = last.lam.clone();
        let beta = last.beta_vector();
        let eta = gd.eta(&beta, last.intercept);
        let mu = eta.map(|e| gd.family.mean(e));
        let grad = gd.x.tr_mul(&(&gd.y - &mu));
        r.sol = Solution {
            beta,
            intercept: last.intercept,
            eta,
            mu,
            grad,
            outer_iterations: 0,
            kkt_residual: 0.0,
        };
        r.points = prefix.to_vec();
        Ok(r)
    }

    fn inactive_argmax(&self, grad: &DVector<f64>) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (j, g) in grad.iter().enumerate() {
            if self.active.contains(&j) {
                continue;
            }
            if best.is_none_or(|(_, b)| g.abs() > b) {
                best = Some((j, g.abs()));
            }
        }
        best
    }

    fn emit(&mut self, max_lam: f64) {
        if self.sol.eta.iter().any(|e| e.abs() >= ETA_CLAMP) && self.warnings.is_empty() {
            self.warnings.push(format!(
                "linear predictor reached the clamp {ETA_CLAMP} at point {}; data may be separable",
                self.points.len()
            ));
        }
        self.points.push(GlmPathPoint::from_solution(&self.sol, &self.active, &self.lam, max_lam));
    }

    fn solve(&self, active: &[usize], lam: &[f64], beta: &DVector<f64>, b0: f64) -> Result<Solution> {
        solve_penalized(self.gd, active, lam, beta, b0, &self.opts.corrector)
    }

    fn warm(&self, next_level: f64) -> (DVector<f64>, f64) {
        match self.opts.warm_start {
            WarmStart::Previous => (self.sol.beta.clone(), self.sol.intercept),
            WarmStart::Zero => (DVector::zeros(self.gd.p()), self.gd.null_intercept()),
            WarmStart::Predictor => {
                let k = self.points.len();
                let last = &self.points[k - 1];
                // only extrapolate when the last point is the current state
                if last.active != self.active || last.lam != self.lam {
                    return (self.sol.beta.clone(), self.sol.intercept);
                }
                let before = if k >= 2 { Some(&self.points[k - 2]) } else { None };
                let pred = glm_predictor(last, before, next_level);
                (pred.beta_vector(), pred.intercept)
            }
        }
    }

    fn trial(&self, scale: f64) -> Result<(Vec<f64>, Solution)> {
        let lam_t: Vec<f64> = self.lam.iter().map(|l| l * scale).collect();
        let (wb, w0) = self.warm(max_of(&lam_t));
        let sol = self.solve(&self.active, &lam_t, &wb, w0)?;
        Ok((lam_t, sol))
    }

    /// Inactive gradients at or above the largest penalty plus penalized active zeros.
    fn events(&self, lam_t: &[f64], sol: &Solution) -> usize {
        let level = max_of(lam_t);
        let entering = (0..self.gd.p())
            .filter(|j| !self.active.contains(j) && sol.grad[*j].abs() >= level)
            .count();
        let zeros = self
            .active
            .iter()
            .zip(lam_t)
            .filter(|(j, l)| **l > 0.0 && sol.beta[**j] == 0.0)
            .count();
        entering + zeros
    }

    fn done(&self) -> bool {
        let level = max_of(&self.lam);
        self.points.len() >= self.max_points
            || self.active.len() >= self.cap
            || level <= LAMBDA_FLOOR * self.lam0
    }

    /// One outer iteration: grid shrink, event refinement, optional `(1 - delta)`
    /// shrink, then augmentation and removal.
    fn step(&mut self) -> Result<()> {
        let s0 = 1.0 - self.opts.epsilon;
        let (mut lam_t, mut sol) = self.trial(s0)?;
        let mut count = self.events(&lam_t, &sol);
        if count >= 2 {
            // locate a scale at which events arrive one at a time
            let (mut lo, mut hi) = (s0, 1.0);
            for _ in 0..40 {
                if hi - lo <= 1e-12 {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                let (lm, sm) = self.trial(mid)?;
                let c = self.events(&lm, &sm);
                if c == 0 {
                    hi = mid;
                } else {
                    lo = mid;
                    lam_t = lm;
                    sol = sm;
                    count = c;
                    if c == 1 {
                        break;
                    }
                }
            }
        }
        let level = max_of(&lam_t);
        if count > 0 && self.delta > 0.0 {
            for l in lam_t.iter_mut() {
                *l *= 1.0 - self.delta;
            }
            sol = self.solve(&self.active, &lam_t, &sol.beta.clone(), sol.intercept)?;
        }

        let mut new_active = Vec::with_capacity(self.active.len() + 1);
        let mut new_lam = Vec::with_capacity(self.active.len() + 1);
        for (k, &j) in self.active.iter().enumerate() {
            if !(lam_t[k] > 0.0 && sol.beta[j] == 0.0) {
                new_active.push(j);
                new_lam.push(lam_t[k]);
            }
        }
        let removed_any = new_active.len() < self.active.len();
        let current_max = max_of(&lam_t);
        self.active = new_active;
        self.lam = new_lam;
        if let Some((j, g)) = self.inactive_argmax(&sol.grad) {
            let enters = self.active.is_empty() || g >= current_max * (1.0 - 1e-12);
            if enters && self.active.len() < self.cap && !(removed_any && self.last_removed(j)) {
                let lj = g.min(level);
                self.active.push(j);
                self.lam.push(lj);
                if g > lj * (1.0 + 1e-12) {
                    sol = self.solve(&self.active, &self.lam, &sol.beta.clone(), sol.intercept)?;
                }
            }
        }
        self.sol = sol;
        let m = max_of(&self.lam);
        self.emit(m);
        Ok(())
    }

    /// True when `j` was active at the previous point, i.e. it was just removed.
    fn last_removed(&self, j: usize) -> bool {
        self.points.last().is_some_and(|p| p.active.contains(&j))
    }

    /// Appends the unpenalized fit once every variable has entered.
    fn finish_full(&mut self) -> Result<()> {
        if self.active.len() == self.gd.p()
            && self.gd.p() < self.gd.n()
            && self.points.len() < self.max_points
            && self.lam.iter().any(|l| *l > 0.0)
        {
            let zeros = vec![0.0; self.active.len()];
            let sol = self.solve(&self.active, &zeros, &self.sol.beta.clone(), self.sol.intercept)?;
            self.sol = sol;
            self.lam = zeros;
            self.emit(0.0);
        }
        Ok(())
    }

    fn run(&mut self, stop: &dyn Fn(&Runner) -> bool) -> Result<()> {
        while !self.done() && !stop(self) {
            self.step()?;
        }
        Ok(())
    }

    fn into_path(self, l_star: Option<usize>, reached: Option<bool>) -> GlmPath {
        GlmPath {
            family: self.gd.family,
            delta: self.delta,
            epsilon: self.opts.epsilon,
            l_star,
            l_star_reached: reached,
            points: self.points,
            col_means: self.gd.col_means.clone(),
            col_scales: self.gd.col_scales.clone(),
            warnings: self.warnings,
        }
    }

    fn fail(self, e: FlashError, l_star: Option<usize>) -> FlashError {
        FlashError::GlmPath {
            prefix: Box::new(self.into_path(l_star, None)),
            source: Box::new(e),
        }
    }
}

/// Emits the starting point: the strongest gradient enters at its own level with
/// a zero coefficient.
fn start(r: &mut Runner) {
    if let Some((j, g)) = r.inactive_argmax(&r.sol.grad.clone()) {
        r.active.push(j);
        r.lam.push(g);
        r.emit(g);
    }
}

/// The GLM FLASH path with a single shrinkage `delta`.
///
/// `delta = 0` is the GLasso path and `delta = 1` the greedy forward path
/// (each new variable followed by an unpenalized refit).
pub fn fit_glm_flash_path(gd: &GlmData, delta: f64, opts: &GlmPathOptions) -> Result<GlmPath> {
    opts.validate()?;
    if !(0.0..=1.0).contains(&delta) {
        return Err(FlashError::InvalidArgument(format!("delta must lie in [0, 1], got {delta}")));
    }
    if delta == 1.0 {
        return forward_path(gd, opts, Refit::Corrector);
    }
    let mut r = Runner::new(gd, delta, opts);
    start(&mut r);
    let res = r.run(&|_| false).and_then(|_| r.finish_full());
    match res {
        Ok(()) => Ok(r.into_path(None, None)),
        Err(e) => Err(r.fail(e, None)),
    }
}

#[derive(Clone, Copy)]
enum Refit {
    Corrector,
    Newton,
}

fn forward_path(gd: &GlmData, opts: &GlmPathOptions, refit: Refit) -> Result<GlmPath> {
    let mut r = Runner::new(gd, 1.0, opts);
    r.emit(r.lam0);
    let floor = LAMBDA_FLOOR * r.lam0;
    while r.points.len() < r.max_points && r.active.len() < r.cap {
        let Some((j, g)) = r.inactive_argmax(&r.sol.grad) else { break };
        if g <= floor {
            break;
        }
        r.active.push(j);
        r.lam.push(0.0);
        let zeros = vec![0.0; r.active.len()];
        let res = match refit {
            Refit::Corrector => r.solve(&r.active, &zeros, &r.sol.beta.clone(), r.sol.intercept),
            Refit::Newton => ml_fit(gd, &r.active, &r.sol.beta.clone(), r.sol.intercept, 200),
        };
        match res {
            Ok(sol) => r.sol = sol,
            Err(e) => return Err(r.fail(e, None)),
        }
        r.emit(g);
    }
    Ok(r.into_path(None, None))
}

/// Greedy forward selection for GLMs: add the largest `|X_j^T (y - mu)|`, refit by
/// Newton's method, repeat for at most `max_steps` additions.
pub fn glm_forward_path(gd: &GlmData, max_steps: usize) -> Result<GlmPath> {
    let opts = GlmPathOptions {
        max_points: Some(max_steps + 1),
        ..GlmPathOptions::default()
    };
    forward_path(gd, &opts, Refit::Newton)
}

/// Block GLM FLASH: the GLasso path until `l_star` variables are active, an
/// unpenalized refit of those variables, then the GLasso path for the rest with
/// the first block left unpenalized.
pub fn fit_glm_block_flash(gd: &GlmData, l_star: usize, opts: &GlmPathOptions) -> Result<GlmPath> {
    opts.validate()?;
    if l_star == 0 {
        return Err(FlashError::InvalidArgument("block break point must be at least 1".into()));
    }
    let mut r = Runner::new(gd, 0.0, opts);
    start(&mut r);
    let res = r.run(&|r| r.active.len() >= l_star);
    if let Err(e) = res {
        return Err(r.fail(e, Some(l_star)));
    }
    if r.active.len() < l_star {
        if let Err(e) = r.finish_full() {
            return Err(r.fail(e, Some(l_star)));
        }
        return Ok(r.into_path(Some(l_star), Some(false)));
    }
    let lam0 = r.lam0;
    let prefix = r.points;
    block_continue(gd, &prefix, l_star, lam0, opts)
}

/// Block path built on an already computed GLasso path, reusing its prefix.
pub fn glm_block_from_lasso(glasso: &GlmPath, gd: &GlmData, l_star: usize, opts: &GlmPathOptions) -> Result<GlmPath> {
    if l_star == 0 {
        return Err(FlashError::InvalidArgument("block break point must be at least 1".into()));
    }
    let lam0 = glasso.points.first().map_or(0.0, |p| p.max_lam);
    match glasso.points.iter().position(|p| p.active.len() >= l_star && p.lam.iter().all(|l| *l > 0.0)) {
        Some(i) => block_continue(gd, &glasso.points[..=i], l_star, lam0, opts),
        None => {
            let mut out = glasso.clone();
            out.l_star = Some(l_star);
            out.l_star_reached = Some(false);
            Ok(out)
        }
    }
}

fn block_continue(
    gd: &GlmData,
    prefix: &[GlmPathPoint],
    l_star: usize,
    lam0: f64,
    opts: &GlmPathOptions,
) -> Result<GlmPath> {
    let mut r = Runner::resume(gd, 0.0, opts, lam0, prefix)?;
    // unpenalized refit of the first block
    r.lam = vec![0.0; r.active.len()];
    match r.solve(&r.active, &r.lam, &r.sol.beta.clone(), r.sol.intercept) {
        Ok(sol) => r.sol = sol,
        Err(e) => return Err(r.fail(e, Some(l_star))),
    }
    r.emit(0.0);
    if r.points.len() < r.max_points && r.active.len() < r.cap {
        if let Some((j, g)) = r.inactive_argmax(&r.sol.grad) {
            if g > LAMBDA_FLOOR * r.lam0 {
                r.active.push(j);
                r.lam.push(g);
                let res = r.run(&|_| false).and_then(|_| r.finish_full());
                if let Err(e) = res {
                    return Err(r.fail(e, Some(l_star)));
                }
            }
        }
    }
    Ok(r.into_path(Some(l_star), Some(true)))
}
