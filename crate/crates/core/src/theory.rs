//! Coherence bounds for signed-support recovery and a finite-sample recovery
//! experiment on equicorrelated designs where the Lasso is known to fail.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::{standardize, CoefficientEstimate, Dataset};
use crate::error::{FlashError, Result};
use crate::linear::{fit_flash_path, DeltaSchedule, FlashPath};

/// Smallest eigenvalue a design correlation matrix must exceed.
pub const PD_TOL: f64 = 1e-10;

/// Largest pairwise correlation under which the Lasso recovers the signed
/// support of every `S`-sparse vector: `1 / (2S - 1)`.
pub fn mu_lasso_bound(s: usize) -> Result<f64> {
    if s < 1 {
        return Err(FlashError::InvalidArgument("sparsity must be at least 1".into()));
    }
    Ok(1.0 / (2.0 * s as f64 - 1.0))
}

/// The block FLASH counterpart of [`mu_lasso_bound`] when a fraction `q1` of
/// the coefficients is large and a fraction `q2` small:
/// `min(1 / (2 (1 - q2) S - 1), 1 / ((2 - q1) S))`.
///
/// `q1 = q2 = 1` means every coefficient has the same magnitude; there is no
/// separation to exploit and the bound is the Lasso bound.
pub fn mu_flash_bound(s: usize, q1: f64, q2: f64) -> Result<f64> {
    if s < 1 {
        return Err(FlashError::InvalidArgument("sparsity must be at least 1".into()));
    }
    let sf = s as f64;
    let lo = 1.0 / sf - 1e-12;
    for (name, q) in [("q1", q1), ("q2", q2)] {
        if !(q >= lo && q <= 1.0) {
            return Err(FlashError::InvalidArgument(format!("{name} = {q} outside [1/S, 1]")));
        }
    }
    if q1 == 1.0 && q2 == 1.0 {
        return mu_lasso_bound(s);
    }
    if q1 + q2 > 1.0 + 1e-12 {
        return Err(FlashError::InvalidArgument(format!(
            "q1 + q2 = {} exceeds one",
            q1 + q2
        )));
    }
    let a = 1.0 / (2.0 * (1.0 - q2) * sf - 1.0);
    let b = 1.0 / ((2.0 - q1) * sf);
    Ok(a.min(b))
}

/// Population design for a recovery experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryDesign {
    pub sigma: DMatrix<f64>,
    pub beta_true: DVector<f64>,
    pub s: usize,
    /// Fraction of nonzero coefficients at the largest magnitude.
    pub q1: f64,
    /// Fraction of nonzero coefficients at the smallest magnitude.
    pub q2: f64,
    pub rho: f64,
}

impl RecoveryDesign {
    pub fn p(&self) -> usize {
        self.beta_true.len()
    }
}

/// `n_large` magnitudes of `small * separation` followed by `s - n_large` of `small`.
pub fn two_level_magnitudes(s: usize, n_large: usize, small: f64, separation: f64) -> Vec<f64> {
    (0..s)
        .map(|k| if k < n_large { small * separation } else { small })
        .collect()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.min()
}

/// The counterexample design: the first `S` predictors and predictor
/// `noise_index` are pairwise correlated at `-rho`, every other pair is
/// uncorrelated, and the true coefficients are `-magnitudes` on the first `S`.
pub fn build_recovery_design(s: usize, p: usize, rho: f64, noise_index: usize, magnitudes: &[f64]) -> Result<RecoveryDesign> {
    if s < 1 || p < s + 1 {
        return Err(FlashError::InvalidArgument(format!("need 1 <= S < p, got S = {s}, p = {p}")));
    }
    if !(0.0..1.0 / s as f64).contains(&rho) {
        return Err(FlashError::InvalidArgument(format!(
            "rho = {rho} must lie in [0, 1/S) = [0, {})",
            1.0 / s as f64
        )));
    }
    if noise_index < s || noise_index >= p {
        return Err(FlashError::InvalidArgument(format!(
            "noise index {noise_index} must lie outside the support 0..{s} and below {p}"
        )));
    }
    if magnitudes.len() != s || magnitudes.iter().any(|m| !(*m > 0.0)) {
        return Err(FlashError::InvalidArgument(format!("need {s} positive magnitudes")));
    }
    let mut block: Vec<usize> = (0..s).collect();
    block.push(noise_index);
    let mut sigma = DMatrix::identity(p, p);
    for &a in &block {
        for &b in &block {
            if a != b {
                sigma[(a, b)] = -rho;
            }
        }
    }
    let ev = min_eigenvalue(&sigma);
    if ev <= PD_TOL {
        return Err(FlashError::InvalidArgument(format!(
            "correlation matrix is not positive definite (smallest eigenvalue {ev:.3e})"
        )));
    }
    let mut beta = DVector::zeros(p);
    for k in 0..s {
        beta[k] = -magnitudes[k];
    }
    let (big, small) = magnitudes
        .iter()
        .fold((f64::MIN, f64::MAX), |(b, s), m| (b.max(*m), s.min(*m)));
    let frac = |v: f64| magnitudes.iter().filter(|m| **m == v).count() as f64 / s as f64;
    Ok(RecoveryDesign {
        sigma,
        beta_true: beta,
        s,
        q1: frac(big),
        q2: frac(small),
        rho,
    })
}

/// True when every coefficient has the sign of the truth, zeros included.
pub fn signed_support_match(estimate: &CoefficientEstimate, truth: &DVector<f64>) -> bool {
    signs_match(&estimate.beta, truth.as_slice())
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn signs_match(est: &[f64], truth: &[f64]) -> bool {
    est.len() == truth.len() && est.iter().zip(truth).all(|(a, b)| sign(*a) == sign(*b))
}

/// Path estimators whose recovery is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecoveryMethod {
    /// Success when any breakpoint of the Lasso path has the right signs.
    Lasso,
    /// Success when any breakpoint of any block path with `l_star <= l_star_max` does.
    BlockFlash { l_star_max: usize },
}

impl RecoveryMethod {
    pub fn name(&self) -> &'static str {
        match self {
            RecoveryMethod::Lasso => "lasso",
            RecoveryMethod::BlockFlash { .. } => "flash_block",
        }
    }
}

/// Recovery frequency of one method.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryOutcome {
    pub method: String,
    pub successes: usize,
    /// Replicates whose fit failed; counted as misses.
    pub failures: usize,
    pub reps: usize,
    pub rate: f64,
}

/// Rows of `N(0, sigma)` via the Cholesky factor, response `X beta + noise_sd * e`.
/// Replicate `rep` draws from its own stream of the generator seeded with `seed`.
pub fn sample_design(design: &RecoveryDesign, n: usize, noise_sd: f64, seed: u64, rep: u64) -> Result<Dataset> {
    let p = design.p();
    let chol = design
        .sigma
        .clone()
        .cholesky()
        .ok_or_else(|| FlashError::InvalidArgument("correlation matrix is not positive definite".into()))?;
    let l = chol.l();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    let z = DMatrix::from_fn(p, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let x = (l * z).transpose();
    let mut y = &x * &design.beta_true;
    for v in y.iter_mut() {
        *v += noise_sd * rng.sample::<f64, _>(StandardNormal);
    }
    Dataset::from_parts(x, y)
}

fn path_recovers(path: &FlashPath, truth: &[f64]) -> bool {
    path.breakpoints.iter().any(|b| signs_match(&b.beta_end, truth))
}

fn recovers(d: &Dataset, truth: &[f64], method: RecoveryMethod) -> Result<bool> {
    let sd = standardize(d)?;
    match method {
        RecoveryMethod::Lasso => Ok(path_recovers(&fit_flash_path(&sd, &DeltaSchedule::lasso(), None)?, truth)),
        RecoveryMethod::BlockFlash { l_star_max } => {
            for l in 1..=l_star_max {
                if path_recovers(&fit_flash_path(&sd, &DeltaSchedule::block(l)?, None)?, truth) {
                    return Ok(true);
                }
            }
            Ok(false)
        }
    }
}

/// Monte-Carlo signed-support recovery rates along the path of each method.
pub fn recovery_experiment(
    design: &RecoveryDesign,
    n: usize,
    noise_sd: f64,
    methods: &[RecoveryMethod],
    reps: usize,
    seed: u64,
) -> Result<Vec<RecoveryOutcome>> {
    if n <= design.s + 1 {
        return Err(FlashError::InvalidArgument(format!("need n > S + 1, got n = {n}")));
    }
    if reps == 0 {
        return Err(FlashError::InvalidArgument("reps must be at least 1".into()));
    }
    let truth: Vec<f64> = design.beta_true.iter().copied().collect();
    // per replicate, per method: Some(success) or None on failure
    let results: Vec<Vec<Option<bool>>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let data = sample_design(design, n, noise_sd, seed, rep as u64);
            methods
                .iter()
                .map(|&m| data.as_ref().ok().and_then(|d| recovers(d, &truth, m).ok()))
                .collect()
        })
        .collect();
    Ok(methods
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let successes = results.iter().filter(|r| r[k] == Some(true)).count();
            let failures = results.iter().filter(|r| r[k].is_none()).count();
            RecoveryOutcome {
                method: m.name().into(),
                successes,
                failures,
                reps,
                rate: successes as f64 / reps as f64,
            }
        })
        .collect())
}

/// `method,rho,S,q1,q2,n,reps,recovery_rate,failures`.
pub fn recovery_csv(design: &RecoveryDesign, n: usize, outcomes: &[RecoveryOutcome]) -> String {
    let mut out = String::from("method,rho,S,q1,q2,n,reps,recovery_rate,failures\n");
    for o in outcomes {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            o.method, design.rho, design.s, design.q1, design.q2, n, o.reps, o.rate, o.failures
        ));
    }
    out
}
