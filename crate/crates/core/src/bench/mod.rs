//! Simulation benchmark: synthetic replicates, method comparison and summary metrics.

mod scenario;

pub use scenario::{gen_glm, gen_linear, generate, CoefLaw, ResponseFamily, Sample, SimulationScenario};

use std::fmt::Write as _;
use std::str::FromStr;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::data::CoefficientEstimate;
use crate::error::{FlashError, Result};
use crate::glm::Family;
use crate::tuning::{
    default_l_star_max, glm_validation_select, validation_select, GlmMethod, GlmTuningOptions, Method, TuningOptions,
    DEFAULT_GRID,
};

/// Estimators compared by the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BenchMethod {
    FlashG,
    FlashB,
    Lasso,
    Relaxo,
    Forward,
    GLasso,
    GRelaxo,
    GForward,
    GlmFlashB,
}

impl BenchMethod {
    pub const LINEAR: [BenchMethod; 5] = [
        BenchMethod::FlashG,
        BenchMethod::FlashB,
        BenchMethod::Lasso,
        BenchMethod::Relaxo,
        BenchMethod::Forward,
    ];
    pub const GLM: [BenchMethod; 4] = [
        BenchMethod::GlmFlashB,
        BenchMethod::GLasso,
        BenchMethod::GRelaxo,
        BenchMethod::GForward,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchMethod::FlashG => "FLASH_G",
            BenchMethod::FlashB => "FLASH_B",
            BenchMethod::Lasso => "Lasso",
            BenchMethod::Relaxo => "Relaxo",
            BenchMethod::Forward => "Forward",
            BenchMethod::GLasso => "GLasso",
            BenchMethod::GRelaxo => "GRelaxo",
            BenchMethod::GForward => "GForward",
            BenchMethod::GlmFlashB => "GLM-FLASH_B",
        }
    }

    pub fn is_glm(self) -> bool {
        matches!(
            self,
            BenchMethod::GLasso | BenchMethod::GRelaxo | BenchMethod::GForward | BenchMethod::GlmFlashB
        )
    }

    /// Default method list for a response family.
    pub fn defaults(family: ResponseFamily) -> Vec<BenchMethod> {
        match family {
            ResponseFamily::Linear => Self::LINEAR.to_vec(),
            ResponseFamily::Bernoulli => Self::GLM.to_vec(),
        }
    }

    /// Maps linear method names onto their GLM counterparts for Bernoulli scenarios.
    pub fn for_family(self, family: ResponseFamily) -> Result<BenchMethod> {
        match (family, self) {
            (ResponseFamily::Linear, m) if !m.is_glm() => Ok(m),
            (ResponseFamily::Bernoulli, m) if m.is_glm() => Ok(m),
            (ResponseFamily::Bernoulli, BenchMethod::FlashB) => Ok(BenchMethod::GlmFlashB),
            (ResponseFamily::Bernoulli, BenchMethod::Lasso) => Ok(BenchMethod::GLasso),
            (ResponseFamily::Bernoulli, BenchMethod::Relaxo) => Ok(BenchMethod::GRelaxo),
            (ResponseFamily::Bernoulli, BenchMethod::Forward) => Ok(BenchMethod::GForward),
            (f, m) => Err(FlashError::InvalidArgument(format!(
                "method {} is not available for the {f:?} family",
                m.name()
            ))),
        }
    }
}

impl FromStr for BenchMethod {
    type Err = FlashError;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        Ok(match key.as_str() {
            "flash_g" | "flash_global" => BenchMethod::FlashG,
            "flash_b" | "flash_block" => BenchMethod::FlashB,
            "lasso" => BenchMethod::Lasso,
            "relaxo" => BenchMethod::Relaxo,
            "forward" => BenchMethod::Forward,
            "glasso" => BenchMethod::GLasso,
            "grelaxo" => BenchMethod::GRelaxo,
            "gforward" => BenchMethod::GForward,
            "glm_flash_b" | "glm_flash_block" => BenchMethod::GlmFlashB,
            _ => return Err(FlashError::InvalidArgument(format!("unknown method `{s}`"))),
        })
    }
}

/// Support errors and squared coefficient error of one estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub false_pos: usize,
    pub false_neg: usize,
    pub l2_sq: f64,
}

/// Compares an estimate on the original scale with the true coefficients.
pub fn evaluate_metrics(est: &CoefficientEstimate, beta_true: &DVector<f64>) -> Result<Metrics> {
    if est.beta.len() != beta_true.len() {
        return Err(FlashError::Shape(format!(
            "estimate has {} coefficients, truth has {}",
            est.beta.len(),
            beta_true.len()
        )));
    }
    let mut m = Metrics {
        false_pos: 0,
        false_neg: 0,
        l2_sq: 0.0,
    };
    for (b, t) in est.beta.iter().zip(beta_true.iter()) {
        match (*b != 0.0, *t != 0.0) {
            (true, false) => m.false_pos += 1,
            (false, true) => m.false_neg += 1,
            _ => {}
        }
        m.l2_sq += (b - t) * (b - t);
    }
    Ok(m)
}

/// Tuning settings shared by every replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchOptions {
    pub delta_grid: Vec<f64>,
    pub phi_grid: Vec<f64>,
    /// Largest block break point; `None` uses `min(20, n / 4)`.
    pub l_star_max: Option<usize>,
    pub glm: GlmTuningOptions,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            delta_grid: DEFAULT_GRID.to_vec(),
            phi_grid: DEFAULT_GRID.to_vec(),
            l_star_max: None,
            glm: GlmTuningOptions::default(),
        }
    }
}

/// Result of one method on one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub rep: usize,
    pub method: BenchMethod,
    /// `None` when the fit failed; the error message is kept.
    pub metrics: std::result::Result<Metrics, String>,
    /// Selected support, ascending.
    pub support: Vec<usize>,
}

/// Averages over replicates for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scenario: String,
    pub method: BenchMethod,
    pub false_pos: f64,
    pub false_neg: f64,
    pub l2_sq: f64,
    /// Standard error of the mean of `l2_sq`.
    pub l2_sq_se: f64,
    /// Replicates that contributed.
    pub reps: usize,
    /// Replicates dropped because the fit failed.
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub scenario: SimulationScenario,
    pub rows: Vec<SummaryRow>,
    pub records: Vec<ReplicateRecord>,
}

impl BenchmarkReport {
    pub fn row(&self, method: BenchMethod) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    /// Summary table, one row per method.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scenario,method,false_pos,false_neg,l2_sq,l2_sq_se,reps,excluded\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.scenario,
                r.method.name(),
                r.false_pos,
                r.false_neg,
                r.l2_sq,
                r.l2_sq_se,
                r.reps,
                r.excluded
            );
        }
        out
    }

    /// Per-replicate metrics and selected supports (`;`-separated).
    pub fn records_csv(&self) -> String {
        let mut out = String::from("scenario,rep,method,false_pos,false_neg,l2_sq,support,error\n");
        for r in &self.records {
            let support = r.support.iter().map(|j| j.to_string()).collect::<Vec<_>>().join(";");
            let _ = match &r.metrics {
                Ok(m) => writeln!(
                    out,
                    "{},{},{},{},{},{},{},",
                    self.scenario.name,
                    r.rep,
                    r.method.name(),
                    m.false_pos,
                    m.false_neg,
                    m.l2_sq,
                    support
                ),
                Err(e) => writeln!(
                    out,
                    "{},{},{},,,,,\"{}\"",
                    self.scenario.name,
                    r.rep,
                    r.method.name(),
                    e.replace('"', "'")
                ),
            };
        }
        out
    }
}

/// Fits one method on one replicate and returns the selected estimate.
pub fn fit_method(sample: &Sample, method: BenchMethod, l_star_max: usize, opts: &BenchOptions) -> Result<CoefficientEstimate> {
    let lin_opts = TuningOptions {
        phi_grid: opts.phi_grid.clone(),
        max_steps: None,
    };
    let (train, valid) = (&sample.train, &sample.valid);
    let lin = |m: Method| validation_select(train, valid, &m, &lin_opts).map(|r| r.best.coef);
    let glm = |m: GlmMethod| {
        glm_validation_select(train, valid, Family::BernoulliLogit, &m, &opts.glm).map(|r| r.best.coef)
    };
    match method {
        BenchMethod::FlashG => lin(Method::GlobalFlash(opts.delta_grid.clone())),
        BenchMethod::FlashB => lin(Method::BlockFlash(l_star_max)),
        BenchMethod::Lasso => lin(Method::Lasso),
        BenchMethod::Relaxo => lin(Method::Relaxo),
        BenchMethod::Forward => lin(Method::Forward),
        BenchMethod::GLasso => glm(GlmMethod::GLasso),
        BenchMethod::GRelaxo => glm(GlmMethod::GRelaxo),
        BenchMethod::GForward => glm(GlmMethod::GForward),
        BenchMethod::GlmFlashB => glm(GlmMethod::BlockFlash(l_star_max)),
    }
}

fn summarize(name: &str, method: BenchMethod, records: &[&ReplicateRecord]) -> SummaryRow {
    let ok: Vec<&Metrics> = records.iter().filter_map(|r| r.metrics.as_ref().ok()).collect();
    let m = ok.len();
    let mean = |f: &dyn Fn(&Metrics) -> f64| {
        if m == 0 {
            f64::NAN
        } else {
            ok.iter().map(|x| f(x)).sum::<f64>() / m as f64
        }
    };
    let l2 = mean(&|x| x.l2_sq);
    let se = if m >= 2 {
        let var = ok.iter().map(|x| (x.l2_sq - l2).powi(2)).sum::<f64>() / (m - 1) as f64;
        (var / m as f64).sqrt()
    } else {
        f64::NAN
    };
    SummaryRow {
        scenario: name.to_string(),
        method,
        false_pos: mean(&|x| x.false_pos as f64),
        false_neg: mean(&|x| x.false_neg as f64),
        l2_sq: l2,
        l2_sq_se: se,
        reps: m,
        excluded: records.len() - m,
    }
}

/// Runs `scn.reps` replicates in parallel and summarizes every method.
///
/// A failed fit removes that replicate for that method only and is counted in
/// `excluded`. A replicate whose data cannot be generated is an error.
pub fn run_benchmark(scn: &SimulationScenario, methods: &[BenchMethod], opts: &BenchOptions) -> Result<BenchmarkReport> {
    scn.validate()?;
    if scn.reps == 0 {
        return Err(FlashError::InvalidArgument("reps must be at least 1".into()));
    }
    let methods: Vec<BenchMethod> = if methods.is_empty() {
        BenchMethod::defaults(scn.family)
    } else {
        methods.iter().map(|m| m.for_family(scn.family)).collect::<Result<_>>()?
    };
    let l_star_max = opts.l_star_max.unwrap_or_else(|| default_l_star_max(scn.n));
    let per_rep: Vec<Vec<ReplicateRecord>> = (0..scn.reps)
        .into_par_iter()
        .map(|rep| {
            let sample = generate(scn, rep)?;
            Ok(methods
                .iter()
                .map(|&method| {
                    let fit = fit_method(&sample, method, l_star_max, opts);
                    let (metrics, support) = match fit {
                        Ok(est) => (
                            evaluate_metrics(&est, &sample.beta_true).map_err(|e| e.to_string()),
                            est.support.clone(),
                        ),
                        Err(e) => (Err(e.to_string()), Vec::new()),
                    };
                    ReplicateRecord {
                        rep,
                        method,
                        metrics,
                        support,
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let records: Vec<ReplicateRecord> = per_rep.into_iter().flatten().collect();
    let rows = methods
        .iter()
        .map(|&m| {
            let mine: Vec<&ReplicateRecord> = records.iter().filter(|r| r.method == m).collect();
            summarize(&scn.name, m, &mine)
        })
        .collect();
    Ok(BenchmarkReport {
        scenario: scn.clone(),
        rows,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_count_support_errors() {
        let est = CoefficientEstimate::new(vec![1.0, 0.0, 0.5, 0.0], 0.0);
        let truth = DVector::from_vec(vec![2.0, 1.0, 0.0, 0.0]);
        let m = evaluate_metrics(&est, &truth).unwrap();
        assert_eq!((m.false_pos, m.false_neg), (1, 1));
        assert!((m.l2_sq - (1.0 + 1.0 + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn method_names_round_trip() {
        for m in BenchMethod::LINEAR.iter().chain(BenchMethod::GLM.iter()) {
            assert_eq!(m.name().parse::<BenchMethod>().unwrap(), *m);
        }
        assert!("ridge".parse::<BenchMethod>().is_err());
    }

    #[test]
    fn family_mapping() {
        let b = ResponseFamily::Bernoulli;
        assert_eq!(BenchMethod::FlashB.for_family(b).unwrap(), BenchMethod::GlmFlashB);
        assert_eq!(BenchMethod::Lasso.for_family(b).unwrap(), BenchMethod::GLasso);
        assert!(BenchMethod::FlashG.for_family(b).is_err());
        assert!(BenchMethod::GLasso.for_family(ResponseFamily::Linear).is_err());
    }

    #[test]
    fn standard_error_uses_sample_variance() {
        let recs: Vec<ReplicateRecord> = [1.0, 3.0]
            .iter()
            .enumerate()
            .map(|(rep, l)| ReplicateRecord {
                rep,
                method: BenchMethod::Lasso,
                metrics: Ok(Metrics {
                    false_pos: rep,
                    false_neg: 0,
                    l2_sq: *l,
                }),
                support: vec![],
            })
            .chain(std::iter::once(ReplicateRecord {
                rep: 2,
                method: BenchMethod::Lasso,
                metrics: Err("failed".into()),
                support: vec![],
            }))
            .collect();
        let refs: Vec<&ReplicateRecord> = recs.iter().collect();
        let row = summarize("t", BenchMethod::Lasso, &refs);
        assert_eq!((row.reps, row.excluded), (2, 1));
        assert!((row.l2_sq - 2.0).abs() < 1e-15);
        assert!((row.l2_sq_se - 1.0).abs() < 1e-12);
        assert!((row.false_pos - 0.5).abs() < 1e-15);
    }
}
