use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{center_and_scale, CoefficientEstimate, Dataset};
use crate::error::{FlashError, Result};

/// Linear predictors are clamped to this magnitude before exponentiation.
pub const ETA_CLAMP: f64 = 30.0;
/// Lower bound on IRLS weights.
pub const WEIGHT_FLOOR: f64 = 1e-6;
const MU_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// Bernoulli response with the logistic link.
    BernoulliLogit,
    /// Normal response with the identity link; reduces to least squares.
    GaussianIdentity,
}

impl Family {
    pub fn mean(self, eta: f64) -> f64 {
        match self {
            Family::BernoulliLogit => {
                let e = eta.clamp(-ETA_CLAMP, ETA_CLAMP);
                1.0 / (1.0 + (-e).exp())
            }
            Family::GaussianIdentity => eta,
        }
    }

    /// `b(eta)` in `l = sum(y eta - b(eta))`.
    pub fn cumulant(self, eta: f64) -> f64 {
        match self {
            // log(1 + e^eta) without overflow
            Family::BernoulliLogit => eta.max(0.0) + (-eta.abs()).exp().ln_1p(),
            Family::GaussianIdentity => 0.5 * eta * eta,
        }
    }

    pub fn weight(self, mu: f64) -> f64 {
        match self {
            Family::BernoulliLogit => (mu * (1.0 - mu)).max(WEIGHT_FLOOR),
            Family::GaussianIdentity => 1.0,
        }
    }

    /// Canonical link.
    pub fn link(self, mu: f64) -> f64 {
        match self {
            Family::BernoulliLogit => {
                let m = mu.clamp(MU_CLAMP, 1.0 - MU_CLAMP);
                (m / (1.0 - m)).ln()
            }
            Family::GaussianIdentity => mu,
        }
    }
}

/// Standardized design and response for the GLM engine.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmData {
    /// Centered columns with unit Euclidean norm.
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub family: Family,
    pub col_means: Vec<f64>,
    pub col_scales: Vec<f64>,
}

impl GlmData {
    /// Wraps an already standardized design.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, family: Family) -> Result<Self> {
        let p = x.ncols();
        Self::with_scaling(x, y, family, vec![0.0; p], vec![1.0; p])
    }

    /// Standardizes the predictors of `d`; the response is left as is.
    pub fn from_dataset(d: &Dataset, family: Family) -> Result<Self> {
        let (x, means, scales) = center_and_scale(&d.x, &d.column_names)?;
        Self::with_scaling(x, d.y.clone(), family, means, scales)
    }

    fn with_scaling(
        x: DMatrix<f64>,
        y: DVector<f64>,
        family: Family,
        col_means: Vec<f64>,
        col_scales: Vec<f64>,
    ) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(FlashError::Shape(format!(
                "{} responses for {} rows",
                y.len(),
                x.nrows()
            )));
        }
        if family == Family::BernoulliLogit {
            if y.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(FlashError::InvalidArgument(
                    "bernoulli responses must be 0 or 1".into(),
                ));
            }
            let ones = y.sum();
            if ones == 0.0 || ones == y.len() as f64 {
                return Err(FlashError::InvalidArgument(
                    "bernoulli response needs both classes".into(),
                ));
            }
        }
        Ok(Self {
            x,
            y,
            family,
            col_means,
            col_scales,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Intercept of the intercept-only fit.
    pub fn null_intercept(&self) -> f64 {
        self.family.link(self.y.mean())
    }

    /// Coefficients on the scale of the original predictors.
    pub fn to_original(&self, beta: &[f64], intercept: f64) -> CoefficientEstimate {
        let b: Vec<f64> = beta
            .iter()
            .zip(&self.col_scales)
            .map(|(b, s)| if *b == 0.0 { 0.0 } else { b / s })
            .collect();
        let shift: f64 = b.iter().zip(&self.col_means).map(|(b, m)| b * m).sum();
        CoefficientEstimate::new(b, intercept - shift)
    }

    pub(crate) fn eta(&self, beta: &DVector<f64>, intercept: f64) -> DVector<f64> {
        let mut eta = DVector::from_element(self.n(), intercept);
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                eta.axpy(b, &self.x.column(j), 1.0);
            }
        }
        eta
    }
}

/// Fitted means `b'(eta)`.
pub fn glm_mu(gd: &GlmData, beta: &DVector<f64>, intercept: f64) -> DVector<f64> {
    gd.eta(beta, intercept).map(|e| gd.family.mean(e))
}

/// `sum(y_i eta_i - b(eta_i))` with `eta = intercept + X beta`.
pub fn glm_loglik(gd: &GlmData, beta: &DVector<f64>, intercept: f64) -> f64 {
    loglik_from_eta(gd, &gd.eta(beta, intercept))
}

pub(crate) fn loglik_from_eta(gd: &GlmData, eta: &DVector<f64>) -> f64 {
    gd.y
        .iter()
        .zip(eta.iter())
        .map(|(y, e)| y * e - gd.family.cumulant(*e))
        .sum()
}

/// `X^T (y - mu)`, the derivative of the log-likelihood in each coefficient.
pub fn glm_gradient_corr(gd: &GlmData, beta: &DVector<f64>, intercept: f64) -> DVector<f64> {
    let resid = &gd.y - glm_mu(gd, beta, intercept);
    gd.x.tr_mul(&resid)
}

/// Bernoulli: `-2 sum(y log mu + (1 - y) log(1 - mu))`; Gaussian: residual sum of squares.
pub fn deviance(y: &DVector<f64>, mu: &DVector<f64>, family: Family) -> f64 {
    match family {
        Family::BernoulliLogit => {
            -2.0 * y
                .iter()
                .zip(mu.iter())
                .map(|(y, m)| {
                    let m = m.clamp(MU_CLAMP, 1.0 - MU_CLAMP);
                    y * m.ln() + (1.0 - y) * (1.0 - m).ln()
                })
                .sum::<f64>()
        }
        Family::GaussianIdentity => y.iter().zip(mu.iter()).map(|(y, m)| (y - m).powi(2)).sum(),
    }
}
