//! One FLASH step at a time.
//!
//! The active correlations always move along `c_A (1 - gamma)`: the direction
//! `h_A = (X_A^T X_A)^{-1} c_A` reaches the least-squares fit at `gamma = 1`.
//! A step first finds the Lasso step length `gamma_L` (the first time an
//! inactive correlation catches the active maximum) and then travels
//! `gamma_L + delta (1 - gamma_L)`. Coefficients that cross zero are removed
//! and come back when their correlation reaches the value it would have had
//! as an active variable.

use std::collections::BTreeMap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::data::StandardizedDataset;
use crate::error::{FlashError, Result};
use crate::linalg::{ActiveCholesky, Append, REFACTOR_CONDITION};

/// Step lengths at or below this are not treated as positive.
pub(crate) const GAMMA_EPS: f64 = 1e-12;
/// Denominators at or below this magnitude are skipped in step-length formulas.
const DENOM_EPS: f64 = 1e-12;

/// Evolving state of a path fit on the standardized scale.
#[derive(Debug, Clone)]
pub struct PathState {
    pub beta: DVector<f64>,
    /// Active indices in activation order.
    pub active: Vec<usize>,
    /// Removed indices with the absolute correlation they would have had if still active.
    pub suspended: BTreeMap<usize, f64>,
    /// Columns found to lie in the span of the active set; never activated.
    pub barred: Vec<usize>,
    /// Next logical step, starting at 1.
    pub step: usize,
    pub corr: DVector<f64>,
    pub warnings: Vec<String>,
    fragments: usize,
    factor: ActiveCholesky,
}

impl PathState {
    /// The null model: `beta = 0`, nothing active.
    pub fn new(sd: &StandardizedDataset) -> Self {
        let p = sd.p();
        Self {
            beta: DVector::zeros(p),
            active: Vec::new(),
            suspended: BTreeMap::new(),
            barred: Vec::new(),
            step: 1,
            corr: sd.xs.tr_mul(&sd.ys),
            warnings: Vec::new(),
            fragments: 0,
            factor: ActiveCholesky::default(),
        }
    }

    /// Largest absolute correlation over all usable variables.
    pub fn max_abs_corr(&self) -> f64 {
        self.corr
            .iter()
            .enumerate()
            .filter(|(j, _)| !self.barred.contains(j))
            .fold(0.0f64, |m, (_, c)| m.max(c.abs()))
    }

    fn is_candidate(&self, j: usize) -> bool {
        !self.active.contains(&j) && !self.suspended.contains_key(&j) && !self.barred.contains(&j)
    }

    fn refresh_corr(&mut self, sd: &StandardizedDataset) {
        let resid = &sd.ys - &sd.xs * &self.beta;
        self.corr = sd.xs.tr_mul(&resid);
    }

    /// Adds `j` to the active set; bars it when its column is in the active span.
    fn try_activate(&mut self, sd: &StandardizedDataset, j: usize) -> bool {
        let xj = sd.xs.column(j);
        let cross: Vec<f64> = self.active.iter().map(|&k| sd.xs.column(k).dot(&xj)).collect();
        match self.factor.push(&cross, xj.dot(&xj)) {
            Append::Added => {
                self.active.push(j);
                if self.factor.condition_estimate() > REFACTOR_CONDITION {
                    self.refactor(sd);
                }
                self.active.contains(&j)
            }
            Append::Collinear(pivot) => {
                self.barred.push(j);
                self.warnings.push(format!(
                    "column {j} lies in the span of the active set (pivot {pivot:.2e}); skipped"
                ));
                false
            }
        }
    }

    fn refactor(&mut self, sd: &StandardizedDataset) {
        let (factor, rejected) = ActiveCholesky::refactor(&sd.xs, &self.active);
        for &pos in rejected.iter().rev() {
            let j = self.active.remove(pos);
            self.beta[j] = 0.0;
            self.barred.push(j);
            self.warnings
                .push(format!("column {j} dropped after refactorization: ill-conditioned"));
        }
        self.factor = factor;
    }

    fn deactivate(&mut self, j: usize) {
        let pos = self
            .active
            .iter()
            .position(|&k| k == j)
            .expect("deactivating an inactive index");
        self.active.remove(pos);
        self.factor.remove(pos);
    }

    fn direction(&self) -> DVector<f64> {
        let c_a: Vec<f64> = self.active.iter().map(|&j| self.corr[j]).collect();
        let h_a = self.factor.solve(&c_a);
        let mut h = DVector::zeros(self.beta.len());
        for (&j, v) in self.active.iter().zip(h_a) {
            h[j] = v;
        }
        h
    }
}

/// One straight-line move of the path.
///
/// A logical step normally produces one of these; it produces several when a
/// coefficient crosses zero or a removed variable rejoins part way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint {
    /// Position of this breakpoint on the path, starting at 1.
    pub step: usize,
    /// Logical step this move belongs to.
    pub flash_step: usize,
    pub delta: f64,
    /// Active set while moving.
    pub active: Vec<usize>,
    #[serde(skip)]
    pub active_after: Vec<usize>,
    #[serde(skip)]
    pub direction: Vec<f64>,
    #[serde(rename = "gamma_L")]
    pub gamma_l: f64,
    pub gamma: f64,
    #[serde(skip)]
    pub beta_start: Vec<f64>,
    pub beta_end: Vec<f64>,
    /// Least-squares fit on `active`, i.e. `beta_start + direction`.
    pub relax_end: Vec<f64>,
    pub entered: Option<usize>,
    pub removed: Vec<usize>,
    #[serde(skip)]
    pub rejoined: Vec<usize>,
    pub max_abs_corr: f64,
}

/// `h_A = (X_A^T X_A)^{-1} c_A` padded with zeros, using a fresh factorization.
pub fn direction_vector(
    sd: &StandardizedDataset,
    active: &[usize],
    c_active: &[f64],
) -> Result<DVector<f64>> {
    if active.len() != c_active.len() {
        return Err(FlashError::Shape(format!(
            "{} active indices but {} correlations",
            active.len(),
            c_active.len()
        )));
    }
    let mut factor = ActiveCholesky::default();
    for (pos, &j) in active.iter().enumerate() {
        let xj = sd.xs.column(j);
        let cross: Vec<f64> = active[..pos].iter().map(|&k| sd.xs.column(k).dot(&xj)).collect();
        if let Append::Collinear(_) = factor.push(&cross, xj.dot(&xj)) {
            return Err(FlashError::SingularGram { index: j });
        }
    }
    let h_a = factor.solve(c_active);
    let mut h = DVector::zeros(sd.p());
    for (&j, v) in active.iter().zip(h_a) {
        h[j] = v;
    }
    Ok(h)
}

/// `X^T X h`: the rate at which each correlation decreases along `h`.
fn correlation_slopes(sd: &StandardizedDataset, h: &DVector<f64>) -> DVector<f64> {
    let fitted = &sd.xs * h;
    sd.xs.tr_mul(&fitted)
}

/// Active index with the largest absolute correlation, lowest index on ties.
fn leading_active(active: &[usize], corr: &DVector<f64>) -> Option<usize> {
    active.iter().copied().fold(None, |best: Option<usize>, j| match best {
        None => Some(j),
        Some(b) => {
            let (cb, cj) = (corr[b].abs(), corr[j].abs());
            if cj > cb || (cj == cb && j < b) {
                Some(j)
            } else {
                Some(b)
            }
        }
    })
}

fn gamma_lasso_from(state: &PathState, slopes: &DVector<f64>) -> f64 {
    let Some(lead) = leading_active(&state.active, &state.corr) else {
        return 1.0;
    };
    let c_lead = state.corr[lead];
    let a_lead = slopes[lead];
    let m = c_lead.abs();
    let candidates = (0..state.corr.len()).filter(|&j| state.is_candidate(j));

    let mut best = 1.0f64;
    for j in candidates {
        let cj = state.corr[j];
        // Already above the active level: the Lasso stopping point is behind us.
        if cj.abs() > m + 1e-10 * m.max(1e-300) {
            return 0.0;
        }
        let aj = slopes[j];
        for (num, den) in [(c_lead - cj, a_lead - aj), (c_lead + cj, a_lead + aj)] {
            if den.abs() <= DENOM_EPS {
                continue;
            }
            let g = num / den;
            if g > GAMMA_EPS && g < best {
                best = g;
            }
        }
    }
    best
}

/// Step length along `h` until an inactive absolute correlation reaches the active maximum.
///
/// Removed (suspended) and barred variables are not candidates. Returns 1 when
/// no candidate crosses before the least-squares point.
pub fn gamma_lasso(sd: &StandardizedDataset, state: &PathState, h: &DVector<f64>) -> f64 {
    gamma_lasso_from(state, &correlation_slopes(sd, h))
}

/// `c_{i*} / (X_{i*}^T X h)`; equals one for a consistent state.
pub fn gamma_forward_check(sd: &StandardizedDataset, state: &PathState, h: &DVector<f64>) -> f64 {
    let Some(lead) = leading_active(&state.active, &state.corr) else {
        return f64::NAN;
    };
    let fitted = &sd.xs * h;
    state.corr[lead] / sd.xs.column(lead).dot(&fitted)
}

/// First positive `gamma < limit` at which an active nonzero coefficient hits zero.
pub fn zero_cross_gamma(state: &PathState, h: &DVector<f64>, limit: f64) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for &j in &state.active {
        let (b, d) = (state.beta[j], h[j]);
        if b == 0.0 || d == 0.0 {
            continue;
        }
        let g = -b / d;
        if g > GAMMA_EPS && g < limit && best.map_or(true, |(bg, bj)| g < bg || (g == bg && j < bj)) {
            best = Some((g, j));
        }
    }
    best
}

/// First positive `gamma < limit` at which a suspended variable's absolute
/// correlation meets its would-be value `r_j (1 - gamma)`.
fn rejoin_gamma(state: &PathState, slopes: &DVector<f64>, limit: f64) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (&j, &r) in &state.suspended {
        let (cj, aj) = (state.corr[j], slopes[j]);
        // c_j - g a_j = +-r (1 - g)
        for (num, den) in [(r - cj, r - aj), (r + cj, r + aj)] {
            if den.abs() <= DENOM_EPS {
                continue;
            }
            let g = num / den;
            if g > GAMMA_EPS && g < limit && best.map_or(true, |(bg, bj)| g < bg || (g == bg && j < bj)) {
                best = Some((g, j));
            }
        }
    }
    best
}

enum Event {
    Remove(usize),
    Rejoin(usize),
}

/// Caps the number of partial moves inside one logical step.
fn event_budget(p: usize) -> usize {
    10 * p + 10
}

/// Performs logical step `state.step` with shrinkage `delta` and returns its moves.
///
/// Zero crossings and rejoins are handled for `delta < 1`; a full step goes
/// straight to the least-squares fit on the active set.
pub fn advance_step(sd: &StandardizedDataset, state: &mut PathState, delta: f64) -> Result<Vec<Breakpoint>> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(FlashError::InvalidArgument(format!("delta must lie in [0, 1], got {delta}")));
    }
    let (n, p) = (sd.n(), sd.p());
    let cap = p.min(n.saturating_sub(1));
    let allow_events = delta < 1.0;

    // Rejoins that became due exactly at the end of the previous step.
    let due: Vec<usize> = state
        .suspended
        .iter()
        .filter(|(&j, &r)| state.corr[j].abs() >= r - 1e-10 * r.max(1.0))
        .map(|(&j, _)| j)
        .collect();
    let mut rejoined = Vec::new();
    for j in due {
        state.suspended.remove(&j);
        if state.active.len() < cap && state.try_activate(sd, j) {
            rejoined.push(j);
        }
    }

    let mut entered = rejoined.first().copied();
    if rejoined.is_empty() && state.active.len() < cap {
        loop {
            let next = (0..p)
                .filter(|&j| state.is_candidate(j))
                .fold(None, |best: Option<usize>, j| match best {
                    Some(b) if state.corr[b].abs() >= state.corr[j].abs() => Some(b),
                    _ => Some(j),
                });
            let Some(j) = next else { break };
            if state.try_activate(sd, j) {
                entered = Some(j);
                break;
            }
        }
    }

    if state.active.is_empty() {
        return Ok(Vec::new());
    }

    let flash_step = state.step;
    let mut fragments = Vec::new();
    let budget = event_budget(p);

    loop {
        let h = state.direction();
        let slopes = correlation_slopes(sd, &h);
        let gamma_l = gamma_lasso_from(state, &slopes);
        let target = gamma_l + delta * (1.0 - gamma_l);

        let mut gamma = target;
        let mut event = None;
        if allow_events {
            if let Some((g, j)) = zero_cross_gamma(state, &h, gamma) {
                gamma = g;
                event = Some(Event::Remove(j));
            }
            if let Some((g, j)) = rejoin_gamma(state, &slopes, gamma) {
                gamma = g;
                event = Some(Event::Rejoin(j));
            }
        }

        let active_before = state.active.clone();
        let beta_start = state.beta.clone();
        state.beta.axpy(gamma, &h, 1.0);
        for r in state.suspended.values_mut() {
            *r *= 1.0 - gamma;
        }
        let mut removed = Vec::new();
        let mut rejoined_now = Vec::new();
        match event {
            Some(Event::Remove(j)) => {
                state.beta[j] = 0.0;
                state.refresh_corr(sd);
                let r = state.corr[j].abs();
                state.deactivate(j);
                state.suspended.insert(j, r);
                removed.push(j);
            }
            Some(Event::Rejoin(j)) => {
                state.refresh_corr(sd);
                state.suspended.remove(&j);
                if state.try_activate(sd, j) {
                    rejoined_now.push(j);
                }
            }
            None => state.refresh_corr(sd),
        }

        state.fragments += 1;
        let relax_end = &beta_start + &h;
        fragments.push(Breakpoint {
            step: state.fragments,
            flash_step,
            delta,
            active: active_before,
            active_after: state.active.clone(),
            direction: h.as_slice().to_vec(),
            gamma_l,
            gamma,
            beta_start: beta_start.as_slice().to_vec(),
            beta_end: state.beta.as_slice().to_vec(),
            relax_end: relax_end.as_slice().to_vec(),
            entered: if fragments.is_empty() { entered } else { None },
            removed,
            rejoined: if fragments.is_empty() {
                let mut r = rejoined.clone();
                r.extend(&rejoined_now);
                r
            } else {
                rejoined_now
            },
            max_abs_corr: state.max_abs_corr(),
        });

        if event.is_none() || state.active.is_empty() {
            break;
        }
        if fragments.len() >= budget {
            return Err(FlashError::StepBudget(budget));
        }
    }

    state.step += 1;
    Ok(fragments)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Standardization;
    use nalgebra::DMatrix;

    /// Standardized data with orthonormal, centered columns and `X^T y = xty`.
    pub(crate) fn orthonormal(n: usize, xty: &[f64]) -> StandardizedDataset {
        let p = xty.len();
        // Centered orthonormal columns from a cosine basis.
        let mut cols: Vec<DVector<f64>> = Vec::new();
        for k in 1..=p {
            let mut v = DVector::from_fn(n, |i, _| {
                (std::f64::consts::PI * k as f64 * (i as f64 + 0.5) / n as f64).cos()
            });
            let mean = v.mean();
            v.add_scalar_mut(-mean);
            for c in &cols {
                let d = c.dot(&v);
                v.axpy(-d, c, 1.0);
            }
            v /= v.norm();
            cols.push(v);
        }
        let xs = DMatrix::from_columns(&cols);
        let mut ys = DVector::zeros(n);
        for (c, &t) in cols.iter().zip(xty) {
            ys.axpy(t, c, 1.0);
        }
        StandardizedDataset {
            xs,
            ys,
            scaling: Standardization {
                col_means: vec![0.0; p],
                col_scales: vec![1.0; p],
                y_mean: 0.0,
            },
            column_names: (0..p).map(|j| format!("x{j}")).collect(),
        }
    }

    #[test]
    fn orthonormal_direction_is_correlation() {
        let sd = orthonormal(10, &[2.0, 1.0, 0.5]);
        let h = direction_vector(&sd, &[0, 2], &[2.0, 0.5]).unwrap();
        assert!((h[0] - 2.0).abs() < 1e-12);
        assert_eq!(h[1], 0.0);
        assert!((h[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_column_direction() {
        let sd = orthonormal(6, &[2.0, 1.0]);
        let h = direction_vector(&sd, &[0], &[2.0]).unwrap();
        assert!((h[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_active_columns_are_singular() {
        let mut sd = orthonormal(8, &[2.0, 1.0, 0.5]);
        let c0 = sd.xs.column(0).clone_owned();
        sd.xs.set_column(2, &c0);
        let err = direction_vector(&sd, &[0, 1, 2], &[1.0, 1.0, 1.0]).unwrap_err();
        assert!(matches!(err, FlashError::SingularGram { index: 2 }));
    }

    #[test]
    fn orthonormal_lasso_step_length() {
        let sd = orthonormal(10, &[2.0, 1.0]);
        let mut state = PathState::new(&sd);
        assert!(state.try_activate(&sd, 0));
        let h = state.direction();
        assert!((gamma_lasso(&sd, &state, &h) - 0.5).abs() < 1e-12);
        assert!((gamma_forward_check(&sd, &state, &h) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_complement_gives_full_step() {
        let sd = orthonormal(10, &[2.0]);
        let mut state = PathState::new(&sd);
        state.try_activate(&sd, 0);
        let h = state.direction();
        assert_eq!(gamma_lasso(&sd, &state, &h), 1.0);
    }

    #[test]
    fn zero_crossing_of_second_coefficient() {
        let sd = orthonormal(10, &[2.0, 1.0]);
        let mut state = PathState::new(&sd);
        state.beta = DVector::from_vec(vec![1.0, 1.0]);
        state.active = vec![0, 1];
        let h = DVector::from_vec(vec![2.0, -2.0]);
        assert_eq!(zero_cross_gamma(&state, &h, 1.0), Some((0.5, 1)));
        let h = DVector::from_vec(vec![2.0, 2.0]);
        assert_eq!(zero_cross_gamma(&state, &h, 1.0), None);
    }

    #[test]
    fn half_shrinkage_first_step() {
        let sd = orthonormal(10, &[2.0, 1.0]);
        let mut state = PathState::new(&sd);
        let frags = advance_step(&sd, &mut state, 0.5).unwrap();
        assert_eq!(frags.len(), 1);
        assert!((frags[0].gamma - 0.75).abs() < 1e-12);
        assert!((state.beta[0] - 1.5).abs() < 1e-12);
        assert_eq!(state.beta[1], 0.0);
    }

    #[test]
    fn forward_step_reaches_least_squares() {
        let sd = orthonormal(10, &[2.0, 1.0, -0.3]);
        let mut state = PathState::new(&sd);
        advance_step(&sd, &mut state, 1.0).unwrap();
        advance_step(&sd, &mut state, 1.0).unwrap();
        for &j in &state.active {
            assert!(state.corr[j].abs() < 1e-12);
        }
    }
}
