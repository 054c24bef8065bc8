//! Command-line front end: path fitting, tuning, benchmarks and recovery experiments.
//!
//! [`run`] parses arguments, executes one subcommand and returns the process
//! exit code: 0 on success, 1 for I/O failures, 2 for invalid input and 3 for
//! numerical failures.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::bench::{run_benchmark, BenchMethod, BenchOptions, SimulationScenario};
use crate::data::{load_csv, standardize, CoefficientEstimate, Dataset};
use crate::error::{FlashError, Result};
use crate::glm::{fit_glm_block_flash, fit_glm_flash_path, glm_forward_path, Family, GlmData, GlmPath, GlmPathOptions};
use crate::linear::{fit_flash_path, path_coefficients_at, DeltaSchedule, FlashPath};
use crate::theory::{
    build_recovery_design, mu_flash_bound, mu_lasso_bound, recovery_csv, recovery_experiment, two_level_magnitudes,
    RecoveryMethod,
};
use crate::tuning::{
    default_l_star_max, glm_validation_select, kfold_cv_select, validation_select, GlmMethod, GlmTuningOptions,
    Method, TuningOptions, TuningResult,
};

#[derive(Debug, Parser)]
#[command(name = "flash", version, about = "Forward-Lasso adaptive shrinkage paths for linear and logistic models")]
pub struct Cli {
    /// Worker threads for parallel folds, schedules and replicates (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tune a method and print the selected coefficients.
    Fit(TuneArgs),
    /// Fit a single path and print every point.
    Path(PathArgs),
    /// Tune a method and print the full score table.
    Cv(CvArgs),
    /// Run a simulation scenario and print per-method metrics.
    Simulate(SimulateArgs),
    /// Run a signed-support recovery experiment on an equicorrelated design.
    Recovery(RecoveryArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Estimator requested with `--method`; an optional `:value` suffix sets its
/// shrinkage (`flash-global:0.25`) or break point (`flash-block:5`).
#[derive(Debug, Clone, PartialEq)]
pub enum MethodSpec {
    FlashGlobal(Option<f64>),
    FlashBlock(Option<usize>),
    Lasso,
    Relaxo,
    Forward,
    GLasso,
    GRelaxo,
    GForward,
    GlmFlash(Option<f64>),
    GlmFlashBlock(Option<usize>),
}

const METHOD_NAMES: &str =
    "flash-global[:delta], flash-block[:l*], lasso, relaxo, forward, glasso, grelaxo, gforward, glm-flash[:delta], glm-flash-block[:l*]";

/// Parses a `--method` value.
pub fn parse_method(s: &str) -> std::result::Result<MethodSpec, String> {
    let norm = s.trim().to_ascii_lowercase().replace('_', "-");
    let (name, arg) = match norm.split_once(':') {
        Some((a, b)) => (a.to_string(), Some(b.to_string())),
        None => (norm, None),
    };
    let real = |a: &Option<String>| -> std::result::Result<Option<f64>, String> {
        a.as_deref()
            .map(|v| v.parse::<f64>().map_err(|_| format!("invalid delta `{v}`")))
            .transpose()
    };
    let int = |a: &Option<String>| -> std::result::Result<Option<usize>, String> {
        a.as_deref()
            .map(|v| v.parse::<usize>().map_err(|_| format!("invalid break point `{v}`")))
            .transpose()
    };
    let plain = |m: MethodSpec| {
        if arg.is_some() {
            Err(format!("method `{name}` takes no `:value` suffix"))
        } else {
            Ok(m)
        }
    };
    match name.as_str() {
        "flash-global" | "flash" => Ok(MethodSpec::FlashGlobal(real(&arg)?)),
        "flash-block" => Ok(MethodSpec::FlashBlock(int(&arg)?)),
        "lasso" => plain(MethodSpec::Lasso),
        "relaxo" => plain(MethodSpec::Relaxo),
        "forward" => plain(MethodSpec::Forward),
        "glasso" => plain(MethodSpec::GLasso),
        "grelaxo" => plain(MethodSpec::GRelaxo),
        "gforward" => plain(MethodSpec::GForward),
        "glm-flash" | "glm-flash-global" => Ok(MethodSpec::GlmFlash(real(&arg)?)),
        "glm-flash-block" => Ok(MethodSpec::GlmFlashBlock(int(&arg)?)),
        _ => Err(format!("unknown method `{s}`; expected one of {METHOD_NAMES}")),
    }
}

/// Comma-separated grid of values, e.g. `0,0.25,0.5`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid(pub Vec<f64>);

fn parse_grid(s: &str) -> std::result::Result<Grid, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| format!("invalid grid value `{v}`")))
        .collect::<std::result::Result<_, _>>()
        .map(Grid)
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Training data as CSV with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Name of the response column.
    #[arg(long, default_value = "y")]
    pub response: String,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file (default: standard output).
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct PathArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_parser = parse_method, help = METHOD_NAMES)]
    pub method: MethodSpec,
    /// Shrinkage for `flash-global` and `glm-flash`.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Break point for `flash-block` and `glm-flash-block`.
    #[arg(long)]
    pub lstar: Option<usize>,
    /// Cap on path steps (linear) or points (logistic).
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_parser = parse_method, help = METHOD_NAMES)]
    pub method: MethodSpec,
    /// Single shrinkage for `flash-global` (overrides `--delta-grid`).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Largest block break point searched (default: min(20, n/4)).
    #[arg(long)]
    pub lstar: Option<usize>,
    #[arg(long, value_parser = parse_grid, default_value = "0,0.25,0.5,0.75,1")]
    pub phi_grid: Grid,
    #[arg(long, value_parser = parse_grid, default_value = "0,0.25,0.5,0.75,1")]
    pub delta_grid: Grid,
    /// Number of cross-validation folds.
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Validation CSV; switches from cross-validation to a held-out set.
    #[arg(long)]
    pub valid: Option<PathBuf>,
    /// Seed for the fold assignment.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub tune: TuneArgs,
    /// Also write the per-step error curve as CSV to this file.
    #[arg(long)]
    pub curve: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario file of `key=value` lines.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Comma-separated methods (default: all methods of the scenario's family).
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lstar: Option<usize>,
    #[arg(long, value_parser = parse_grid, default_value = "0,0.25,0.5,0.75,1")]
    pub phi_grid: Grid,
    #[arg(long, value_parser = parse_grid, default_value = "0,0.25,0.5,0.75,1")]
    pub delta_grid: Grid,
    /// Output file (default: standard output).
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct RecoveryArgs {
    /// Number of nonzero coefficients.
    #[arg(long = "S", alias = "s", default_value_t = 5)]
    pub s: usize,
    #[arg(long, default_value_t = 20)]
    pub p: usize,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Pairwise correlation magnitude (default: 1.05 times the Lasso bound).
    #[arg(long)]
    pub rho: Option<f64>,
    /// Ratio of large to small coefficient magnitudes (default: 10 sqrt(S)).
    #[arg(long)]
    pub separation: Option<f64>,
    /// Number of large coefficients (default: ceil(S / 2)).
    #[arg(long)]
    pub n_large: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub noise_sd: f64,
    /// Largest block break point searched (default: min(20, n/4)).
    #[arg(long)]
    pub lstar: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return 0;
            }
            if !e.render().to_string().contains("Usage:") {
                eprintln!("\n{}", usage_for(&args));
            }
            return 2;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Usage line of the subcommand named in `args`, or of the whole program.
fn usage_for(args: &[std::ffi::OsString]) -> String {
    use clap::CommandFactory;
    let mut cmd = Cli::command();
    let name = args.get(1).and_then(|a| a.to_str()).unwrap_or("");
    match cmd.find_subcommand_mut(name) {
        Some(sub) => {
            let mut sub = sub.clone().bin_name(format!("flash {name}"));
            sub.render_usage().to_string()
        }
        None => cmd.render_usage().to_string(),
    }
}

/// Runs a parsed command inside a pool of the requested size.
pub fn execute(cli: &Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(FlashError::InvalidArgument("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| FlashError::InvalidArgument(format!("cannot start thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Path(a) => cmd_path(a),
        Command::Cv(a) => cmd_cv(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Recovery(a) => cmd_recovery(a),
    })
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => std::fs::write(path, text).map_err(|source| FlashError::Write {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| FlashError::Write {
                    path: PathBuf::from("<stdout>"),
                    source,
                })
        }
    }
}

fn with_newline(mut s: String) -> String {
    if !s.ends_with('\n') {
        s.push('\n');
    }
    s
}

fn pretty(v: &Value) -> String {
    with_newline(serde_json::to_string_pretty(v).expect("json serialization cannot fail"))
}

fn csv_header(names: &[String]) -> String {
    names.join(",")
}

fn linear_trace_csv(path: &FlashPath, names: &[String]) -> Result<String> {
    let mut out = format!("step,flash_step,delta,max_abs_corr,intercept,{}\n", csv_header(names));
    for (i, b) in path.breakpoints.iter().enumerate() {
        let coef = path_coefficients_at(path, i + 1, 0.0)?;
        let _ = write!(out, "{},{},{},{},{}", b.step, b.flash_step, b.delta, b.max_abs_corr, coef.intercept);
        for v in &coef.beta {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    Ok(out)
}

fn glm_trace_csv(path: &GlmPath, names: &[String]) -> Result<String> {
    let mut out = format!("point,max_lam,intercept,{}\n", csv_header(names));
    for (i, pt) in path.points.iter().enumerate() {
        let coef = path.coefficients_at(i)?;
        let _ = write!(out, "{},{},{}", i + 1, pt.max_lam, coef.intercept);
        for v in &coef.beta {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    Ok(out)
}

fn missing(flag: &str, method: &str) -> FlashError {
    FlashError::InvalidArgument(format!("method {method} needs {flag}"))
}

fn cmd_path(a: &PathArgs) -> Result<()> {
    let d = load_csv(&a.data.input, &a.data.response)?;
    let text = match &a.method {
        MethodSpec::FlashGlobal(_) | MethodSpec::FlashBlock(_) | MethodSpec::Lasso | MethodSpec::Relaxo | MethodSpec::Forward => {
            let schedule = match &a.method {
                MethodSpec::FlashGlobal(s) => DeltaSchedule::global(s.or(a.delta).ok_or_else(|| missing("--delta", "flash-global"))?)?,
                MethodSpec::FlashBlock(s) => DeltaSchedule::block(s.or(a.lstar).ok_or_else(|| missing("--lstar", "flash-block"))?)?,
                MethodSpec::Forward => DeltaSchedule::forward(),
                _ => DeltaSchedule::lasso(),
            };
            let sd = standardize(&d)?;
            let path = fit_flash_path(&sd, &schedule, a.max_steps)?;
            match a.out.format {
                Format::Json => with_newline(path.to_json()),
                Format::Csv => linear_trace_csv(&path, &d.column_names)?,
            }
        }
        glm => {
            let gd = GlmData::from_dataset(&d, Family::BernoulliLogit)?;
            let opts = GlmPathOptions {
                max_points: a.max_steps,
                ..Default::default()
            };
            let path = match glm {
                MethodSpec::GLasso | MethodSpec::GRelaxo => fit_glm_flash_path(&gd, 0.0, &opts)?,
                MethodSpec::GForward => glm_forward_path(&gd, a.max_steps.unwrap_or(gd.p().min(gd.n() - 1)))?,
                MethodSpec::GlmFlash(s) => {
                    fit_glm_flash_path(&gd, s.or(a.delta).ok_or_else(|| missing("--delta", "glm-flash"))?, &opts)?
                }
                MethodSpec::GlmFlashBlock(s) => {
                    fit_glm_block_flash(&gd, s.or(a.lstar).ok_or_else(|| missing("--lstar", "glm-flash-block"))?, &opts)?
                }
                _ => unreachable!("linear methods handled above"),
            };
            for w in &path.warnings {
                eprintln!("warning: {w}");
            }
            match a.out.format {
                Format::Json => with_newline(path.to_json()),
                Format::Csv => glm_trace_csv(&path, &d.column_names)?,
            }
        }
    };
    emit(a.out.output.as_deref(), &text)
}

/// Runs the tuning requested by `a` on `d`.
fn tune(a: &TuneArgs, d: &Dataset) -> Result<TuningResult> {
    let valid = a.valid.as_ref().map(|v| load_csv(v, &a.data.response)).transpose()?;
    let l_star_max = |s: &Option<usize>| s.or(a.lstar).unwrap_or_else(|| default_l_star_max(d.n()));
    let linear = |m: Method| {
        let opts = TuningOptions {
            phi_grid: a.phi_grid.0.clone(),
            max_steps: None,
        };
        match &valid {
            Some(v) => validation_select(d, v, &m, &opts),
            None => kfold_cv_select(d, a.folds, &m, a.seed, &opts),
        }
    };
    let glm = |m: GlmMethod| {
        let v = valid
            .as_ref()
            .ok_or_else(|| FlashError::InvalidArgument("logistic methods are tuned on a validation set; pass --valid".into()))?;
        let opts = GlmTuningOptions {
            phi_grid: a.phi_grid.0.clone(),
            ..Default::default()
        };
        glm_validation_select(d, v, Family::BernoulliLogit, &m, &opts)
    };
    match &a.method {
        MethodSpec::FlashGlobal(s) => {
            let grid = match s.or(a.delta) {
                Some(delta) => vec![delta],
                None => a.delta_grid.0.clone(),
            };
            linear(Method::GlobalFlash(grid))
        }
        MethodSpec::FlashBlock(s) => linear(Method::BlockFlash(l_star_max(s))),
        MethodSpec::Lasso => linear(Method::Lasso),
        MethodSpec::Relaxo => linear(Method::Relaxo),
        MethodSpec::Forward => linear(Method::Forward),
        MethodSpec::GLasso => glm(GlmMethod::GLasso),
        MethodSpec::GRelaxo => glm(GlmMethod::GRelaxo),
        MethodSpec::GForward => glm(GlmMethod::GForward),
        MethodSpec::GlmFlashBlock(s) => glm(GlmMethod::BlockFlash(l_star_max(s))),
        MethodSpec::GlmFlash(_) => Err(FlashError::InvalidArgument(
            "glm-flash with a single delta is available for `path`; tune logistic models with glm-flash-block".into(),
        )),
    }
}

fn model_json(res: &TuningResult, names: &[String]) -> Value {
    let best = &res.best;
    let coefficients: Vec<Value> = names
        .iter()
        .zip(&best.coef.beta)
        .filter(|(_, b)| **b != 0.0)
        .map(|(n, b)| json!({ "name": n, "value": b }))
        .collect();
    json!({
        "method": res.method,
        "schedule": best.schedule_label(),
        "step": best.step,
        "phi": best.phi,
        "score": best.score,
        "intercept": best.coef.intercept,
        "coefficients": coefficients,
    })
}

fn model_csv(coef: &CoefficientEstimate, names: &[String]) -> String {
    let mut out = format!("name,value\n(intercept),{}\n", coef.intercept);
    for (n, b) in names.iter().zip(&coef.beta) {
        let _ = writeln!(out, "{n},{b}");
    }
    out
}

fn cmd_fit(a: &TuneArgs) -> Result<()> {
    let d = load_csv(&a.data.input, &a.data.response)?;
    let res = tune(a, &d)?;
    let text = match a.out.format {
        Format::Json => pretty(&model_json(&res, &d.column_names)),
        Format::Csv => model_csv(&res.best.coef, &d.column_names),
    };
    emit(a.out.output.as_deref(), &text)
}

fn cmd_cv(a: &CvArgs) -> Result<()> {
    let t = &a.tune;
    let d = load_csv(&t.data.input, &t.data.response)?;
    let res = tune(t, &d)?;
    if let Some(curve) = &a.curve {
        emit(Some(curve), &res.score_table_csv())?;
    }
    let text = match t.out.format {
        Format::Json => with_newline(res.to_json()),
        Format::Csv => res.score_table_csv(),
    };
    emit(t.out.output.as_deref(), &text)
}

fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let mut scn = SimulationScenario::load(&a.scenario)?;
    if let Some(r) = a.reps {
        scn.reps = r;
    }
    if let Some(s) = a.seed {
        scn.seed = s;
    }
    let methods = match &a.method {
        Some(list) => list.split(',').map(str::parse).collect::<Result<Vec<BenchMethod>>>()?,
        None => BenchMethod::defaults(scn.family),
    };
    let opts = BenchOptions {
        delta_grid: a.delta_grid.0.clone(),
        phi_grid: a.phi_grid.0.clone(),
        l_star_max: a.lstar,
        glm: GlmTuningOptions {
            phi_grid: a.phi_grid.0.clone(),
            ..Default::default()
        },
    };
    let report = run_benchmark(&scn, &methods, &opts)?;
    let text = match a.format {
        Format::Csv => report.to_csv(),
        Format::Json => {
            let rows: Vec<Value> = report
                .rows
                .iter()
                .map(|r| {
                    json!({
                        "scenario": r.scenario, "method": r.method.name(), "false_pos": r.false_pos,
                        "false_neg": r.false_neg, "l2_sq": r.l2_sq, "l2_sq_se": r.l2_sq_se,
                        "reps": r.reps, "excluded": r.excluded,
                    })
                })
                .collect();
            let records: Vec<Value> = report
                .records
                .iter()
                .map(|r| match &r.metrics {
                    Ok(m) => json!({
                        "rep": r.rep, "method": r.method.name(), "false_pos": m.false_pos,
                        "false_neg": m.false_neg, "l2_sq": m.l2_sq, "support": r.support,
                    }),
                    Err(e) => json!({ "rep": r.rep, "method": r.method.name(), "error": e }),
                })
                .collect();
            pretty(&json!({ "scenario": scn.name, "rows": rows, "replicates": records }))
        }
    };
    emit(a.output.as_deref(), &text)
}

fn cmd_recovery(a: &RecoveryArgs) -> Result<()> {
    let mu_l = mu_lasso_bound(a.s)?;
    let rho = a.rho.unwrap_or(1.05 * mu_l);
    let separation = a.separation.unwrap_or(10.0 * (a.s as f64).sqrt());
    let n_large = a.n_large.unwrap_or(a.s.div_ceil(2));
    if n_large == 0 || n_large > a.s {
        return Err(FlashError::InvalidArgument(format!("--n-large must lie in 1..={}", a.s)));
    }
    let magnitudes = two_level_magnitudes(a.s, n_large, 1.0, separation);
    let design = build_recovery_design(a.s, a.p, rho, a.s, &magnitudes)?;
    let mu_fl = mu_flash_bound(a.s, design.q1, design.q2)?;
    let methods = [
        RecoveryMethod::Lasso,
        RecoveryMethod::BlockFlash {
            l_star_max: a.lstar.unwrap_or_else(|| default_l_star_max(a.n)),
        },
    ];
    let outcomes = recovery_experiment(&design, a.n, a.noise_sd, &methods, a.reps, a.seed)?;
    let text = match a.format {
        Format::Csv => recovery_csv(&design, a.n, &outcomes),
        Format::Json => pretty(&json!({
            "mu_lasso": mu_l,
            "mu_flash": mu_fl,
            "rho": design.rho,
            "S": design.s,
            "q1": design.q1,
            "q2": design.q2,
            "n": a.n,
            "outcomes": outcomes.iter().map(|o| json!({
                "method": o.method, "successes": o.successes, "failures": o.failures,
                "reps": o.reps, "recovery_rate": o.rate,
            })).collect::<Vec<_>>(),
        })),
    };
    emit(a.output.as_deref(), &text)
}
