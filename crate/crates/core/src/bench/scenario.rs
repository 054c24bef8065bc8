use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::Dataset;
use crate::error::{FlashError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseFamily {
    Linear,
    Bernoulli,
}

/// Law of the nonzero coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefLaw {
    /// `N(0, sigma_beta^2)`.
    Normal,
    /// `+0.5` or `-0.5` with probability one half each.
    PointMass,
}

/// A simulation design and its replication plan.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationScenario {
    pub name: String,
    pub n: usize,
    pub p: usize,
    /// Number of nonzero coefficients.
    pub s: usize,
    /// Common pairwise correlation of the predictors.
    pub rho: f64,
    pub sigma_beta: f64,
    pub coef_law: CoefLaw,
    pub family: ResponseFamily,
    /// Validation size as a fraction of `n`.
    pub valid_frac: f64,
    pub reps: usize,
    pub seed: u64,
}

impl Default for SimulationScenario {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            n: 100,
            p: 100,
            s: 10,
            rho: 0.0,
            sigma_beta: 1.0,
            coef_law: CoefLaw::Normal,
            family: ResponseFamily::Linear,
            valid_frac: 0.5,
            reps: 200,
            seed: 1,
        }
    }
}

fn bad_value(key: &str, value: &str) -> FlashError {
    FlashError::InvalidArgument(format!("invalid value {value:?} for scenario key `{key}`"))
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| bad_value(key, value))
}

impl SimulationScenario {
    /// Parses `key=value` lines; blank lines and `#` comments are ignored.
    /// Unset keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut scn = Self::default();
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| FlashError::InvalidArgument(format!("scenario line without `=`: {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "name" => scn.name = value.to_string(),
                "n" => scn.n = parse_num(key, value)?,
                "p" => scn.p = parse_num(key, value)?,
                "S" | "s" => scn.s = parse_num(key, value)?,
                "rho" => scn.rho = parse_num(key, value)?,
                "sigma_beta" => scn.sigma_beta = parse_num(key, value)?,
                "valid_frac" => scn.valid_frac = parse_num(key, value)?,
                "reps" => scn.reps = parse_num(key, value)?,
                "seed" => scn.seed = parse_num(key, value)?,
                "family" => {
                    scn.family = match value {
                        "linear" | "gaussian" => ResponseFamily::Linear,
                        "bernoulli" | "logistic" => ResponseFamily::Bernoulli,
                        _ => return Err(bad_value(key, value)),
                    }
                }
                "coef_law" => {
                    scn.coef_law = match value {
                        "normal" => CoefLaw::Normal,
                        "point_mass" | "pointmass" => CoefLaw::PointMass,
                        _ => return Err(bad_value(key, value)),
                    }
                }
                _ => return Err(FlashError::InvalidArgument(format!("unknown scenario key `{key}`"))),
            }
        }
        scn.validate()?;
        Ok(scn)
    }

    /// Reads and parses a scenario file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| FlashError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(FlashError::InvalidArgument(m));
        if self.n < 2 || self.p < 1 {
            return err(format!("need n >= 2 and p >= 1, got n = {}, p = {}", self.n, self.p));
        }
        if self.s > self.p {
            return err(format!("S = {} exceeds p = {}", self.s, self.p));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return err(format!("rho = {} outside [0, 1)", self.rho));
        }
        if !(self.valid_frac > 0.0 && self.valid_frac <= 1.0) {
            return err(format!("valid_frac = {} outside (0, 1]", self.valid_frac));
        }
        if self.valid_size() < 2 {
            return err("validation set would have fewer than 2 rows".into());
        }
        if !(self.sigma_beta >= 0.0) {
            return err(format!("sigma_beta = {} is negative", self.sigma_beta));
        }
        Ok(())
    }

    pub fn valid_size(&self) -> usize {
        (self.valid_frac * self.n as f64).round() as usize
    }
}

impl fmt::Display for SimulationScenario {
    /// The scenario in the `key=value` format accepted by [`SimulationScenario::parse`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "name={}", self.name)?;
        writeln!(f, "n={}\np={}\nS={}\nrho={}\nsigma_beta={}", self.n, self.p, self.s, self.rho, self.sigma_beta)?;
        let law = match self.coef_law {
            CoefLaw::Normal => "normal",
            CoefLaw::PointMass => "point_mass",
        };
        let family = match self.family {
            ResponseFamily::Linear => "linear",
            ResponseFamily::Bernoulli => "bernoulli",
        };
        writeln!(f, "coef_law={law}\nfamily={family}")?;
        writeln!(f, "valid_frac={}\nreps={}\nseed={}", self.valid_frac, self.reps, self.seed)
    }
}

/// Training data, validation data from the same coefficients, and the truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub train: Dataset,
    pub valid: Dataset,
    pub beta_true: DVector<f64>,
    /// Indices of the nonzero coefficients, ascending.
    pub support: Vec<usize>,
}

fn replicate_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Rows with unit variances and common correlation `rho`: `sqrt(rho) g + sqrt(1 - rho) z`.
fn equicorrelated(rng: &mut ChaCha8Rng, rows: usize, p: usize, rho: f64) -> DMatrix<f64> {
    let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
    let mut x = DMatrix::zeros(rows, p);
    for i in 0..rows {
        let g: f64 = rng.sample(StandardNormal);
        for j in 0..p {
            let z: f64 = rng.sample(StandardNormal);
            x[(i, j)] = a * g + b * z;
        }
    }
    x
}

/// Draws `(X_train, X_valid, support, beta)` in that order.
fn design_and_beta(scn: &SimulationScenario, rng: &mut ChaCha8Rng) -> (DMatrix<f64>, DMatrix<f64>, Vec<usize>, DVector<f64>) {
    let xt = equicorrelated(rng, scn.n, scn.p, scn.rho);
    let xv = equicorrelated(rng, scn.valid_size(), scn.p, scn.rho);
    let mut support = sample(rng, scn.p, scn.s).into_vec();
    support.sort_unstable();
    let mut beta = DVector::zeros(scn.p);
    for &j in &support {
        beta[j] = match scn.coef_law {
            CoefLaw::Normal => scn.sigma_beta * rng.sample::<f64, _>(StandardNormal),
            CoefLaw::PointMass => {
                if rng.random::<bool>() {
                    0.5
                } else {
                    -0.5
                }
            }
        };
    }
    (xt, xv, support, beta)
}

/// Linear replicate `rep`: `y = X beta + N(0, 1)` for both training and validation rows.
pub fn gen_linear(scn: &SimulationScenario, rep: usize) -> Result<Sample> {
    scn.validate()?;
    let mut rng = replicate_rng(scn.seed, rep as u64);
    let (xt, xv, support, beta) = design_and_beta(scn, &mut rng);
    let mut yt = &xt * &beta;
    for v in yt.iter_mut() {
        *v += rng.sample::<f64, _>(StandardNormal);
    }
    let mut yv = &xv * &beta;
    for v in yv.iter_mut() {
        *v += rng.sample::<f64, _>(StandardNormal);
    }
    Ok(Sample {
        train: Dataset::from_parts(xt, yt)?,
        valid: Dataset::from_parts(xv, yv)?,
        beta_true: beta,
        support,
    })
}

const GLM_TRIES: u64 = 10;

/// Bernoulli replicate `rep` with `P(y = 1) = 1 / (1 + exp(-X beta))`.
///
/// A sample with a single class in either part is redrawn from the next
/// substream, at most ten times.
pub fn gen_glm(scn: &SimulationScenario, rep: usize) -> Result<Sample> {
    scn.validate()?;
    for attempt in 0..GLM_TRIES {
        let mut rng = replicate_rng(scn.seed, rep as u64 + (attempt << 40));
        let (xt, xv, support, beta) = design_and_beta(scn, &mut rng);
        let mut draw = |x: &DMatrix<f64>| {
            (x * &beta).map(|e| {
                let pr = 1.0 / (1.0 + (-e).exp());
                if rng.random::<f64>() < pr {
                    1.0
                } else {
                    0.0
                }
            })
        };
        let yt = draw(&xt);
        let yv = draw(&xv);
        let two_classes = |y: &DVector<f64>| {
            let s = y.sum();
            s > 0.0 && s < y.len() as f64
        };
        if two_classes(&yt) && two_classes(&yv) {
            return Ok(Sample {
                train: Dataset::from_parts(xt, yt)?,
                valid: Dataset::from_parts(xv, yv)?,
                beta_true: beta,
                support,
            });
        }
    }
    Err(FlashError::Simulation(format!(
        "replicate {rep}: every draw had a single response class"
    )))
}

/// Draws a replicate for the scenario's family.
pub fn generate(scn: &SimulationScenario, rep: usize) -> Result<Sample> {
    match scn.family {
        ResponseFamily::Linear => gen_linear(scn, rep),
        ResponseFamily::Bernoulli => gen_glm(scn, rep),
    }
}
