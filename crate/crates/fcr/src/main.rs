//! Command-line interface for functional continuum regression.
//!
//! Exit codes: 0 success, 2 usage error, 3 data format error, 4 numerical
//! failure, 5 I/O error. Data go to `--out` when given, otherwise to
//! standard output; diagnostics go to standard error, gated by
//! `FCR_LOG={error|info|debug}`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use fcr::baselines::{fpcr_fit, fpls_fit};
use fcr::continuum::{deflate, fit, fit_component, CenteredSample, FitOptions};
use fcr::error::FcrError;
use fcr::io;
use fcr::oracle::{brute_force, certification_instance, gradient_check, t_star};
use fcr::simulate::{
    run_estimation_study, run_prediction_study, GenerativeModel, Method, Scenario,
};
use fcr::tuning::{tune, PmaxRule, TuningGrid, DEFAULT_ALPHAS};
use fcr::FunctionalDataset;

// ---------------------------------------------------------------------------
// Logging
// ---------------------------------------------------------------------------

fn log_level() -> u8 {
    match std::env::var("FCR_LOG").as_deref() {
        Ok("debug") => 2,
        Ok("info") => 1,
        _ => 0,
    }
}

fn log_info(msg: impl AsRef<str>) {
    if log_level() >= 1 {
        eprintln!("fcr: {}", msg.as_ref());
    }
}

fn log_debug(msg: impl AsRef<str>) {
    if log_level() >= 2 {
        eprintln!("fcr[debug]: {}", msg.as_ref());
    }
}

// ---------------------------------------------------------------------------
// Arguments
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "fcr",
    version,
    about = "Functional continuum regression for scalar-on-function linear models"
)]
struct Cli {
    /// TOML file supplying defaults for numeric options (flags win).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model at fixed parameters.
    Fit(FitArgs),
    /// Predict responses for curves using a saved model.
    Predict(PredictArgs),
    /// Select (p, alpha) by GCV and emit the best model.
    Tune(TuneArgs),
    /// Monte Carlo estimation study against the generative model.
    Simulate(SimulateArgs),
    /// Repeated-split held-out prediction study on a dataset.
    RemspeStudy(RemspeArgs),
    /// Certify the fitter against the brute-force sphere maximizer.
    OracleCheck(OracleArgs),
    /// Estimate a generative model from a curve sample.
    EstimateGm(EstimateGmArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodFlag {
    Fcr,
    Fpcr,
    Fpls,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ScenarioFlag {
    I,
    Ii,
}

impl From<ScenarioFlag> for Scenario {
    fn from(value: ScenarioFlag) -> Self {
        match value {
            ScenarioFlag::I => Scenario::I,
            ScenarioFlag::Ii => Scenario::II,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Curve-matrix CSV (first row = grid points).
    #[arg(long, value_name = "FILE")]
    x: PathBuf,
    /// Single-column response CSV, row-aligned with the curves.
    #[arg(long, value_name = "FILE")]
    y: PathBuf,
    #[arg(long, value_enum, default_value = "fcr")]
    method: MethodFlag,
    /// Continuum parameter in [0, 1); fcr only.
    #[arg(long)]
    alpha: Option<f64>,
    /// Number of components.
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, value_name = "TOL")]
    rank_tol: Option<f64>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    #[arg(long, value_name = "FILE")]
    x: PathBuf,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TuneArgs {
    #[arg(long, value_name = "FILE")]
    x: PathBuf,
    #[arg(long, value_name = "FILE")]
    y: PathBuf,
    /// Comma-separated alpha candidates, e.g. "0,0.25,0.5".
    #[arg(long, value_name = "LIST")]
    alpha_grid: Option<String>,
    /// Component-count cap: a number or "auto".
    #[arg(long, value_name = "N|auto")]
    pmax: Option<String>,
    /// Variance fraction for the automatic pmax rule.
    #[arg(long)]
    var_threshold: Option<f64>,
    #[arg(long)]
    rank_tol: Option<f64>,
    /// Worker threads for the alpha loop.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Also write the full GCV table as CSV.
    #[arg(long, value_name = "FILE")]
    gcv_table: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Which eigenfunction plays the coefficient; with --gm the file's own
    /// beta is kept unless this flag is given explicitly.
    #[arg(long, value_enum)]
    scenario: Option<ScenarioFlag>,
    #[arg(long)]
    snr: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Generative-model JSON; the bundled surrogate when omitted.
    #[arg(long, value_name = "FILE")]
    gm: Option<PathBuf>,
    /// Comma-separated methods: fcr, fpcr:P, fpls:P, mean.
    #[arg(long, value_name = "LIST", default_value = "fcr,fpcr:2")]
    methods: String,
    /// Component cap for the tuned fcr entry.
    #[arg(long)]
    pmax: Option<String>,
    #[arg(long)]
    var_threshold: Option<f64>,
    #[arg(long)]
    rank_tol: Option<f64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RemspeArgs {
    #[arg(long, value_name = "FILE")]
    x: PathBuf,
    #[arg(long, value_name = "FILE")]
    y: PathBuf,
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long)]
    splits: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "LIST", default_value = "fcr,fpcr:2,fpls:2,mean")]
    methods: String,
    #[arg(long)]
    pmax: Option<String>,
    #[arg(long)]
    var_threshold: Option<f64>,
    #[arg(long)]
    rank_tol: Option<f64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 20)]
    instances: usize,
    #[arg(long)]
    replicates: Option<usize>,
    /// Random restarts per oracle maximization.
    #[arg(long, default_value_t = 200)]
    restarts: usize,
    #[arg(long)]
    rank_tol: Option<f64>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateGmArgs {
    #[arg(long, value_name = "FILE")]
    x: PathBuf,
    /// Number of eigenpairs to keep.
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, value_enum, default_value = "i")]
    scenario: ScenarioFlag,
    /// Emit this signal-to-noise ratio (resolved to sigma on load).
    #[arg(long)]
    snr: Option<f64>,
    /// Emit this response-noise standard deviation.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    rank_tol: Option<f64>,
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Config file
// ---------------------------------------------------------------------------

/// Numeric defaults loadable from a TOML file; flags take precedence.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct FileConfig {
    alpha: Option<f64>,
    alpha_grid: Option<Vec<f64>>,
    p: Option<usize>,
    pmax: Option<String>,
    var_threshold: Option<f64>,
    snr: Option<f64>,
    n: Option<usize>,
    replicates: Option<usize>,
    splits: Option<usize>,
    test_fraction: Option<f64>,
    seed: Option<u64>,
    rank_tol: Option<f64>,
    jobs: Option<usize>,
}

fn load_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::new(5, format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::new(2, format!("config {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// Error handling
// ---------------------------------------------------------------------------

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn new(code: u8, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }
}

impl From<FcrError> for CliError {
    fn from(e: FcrError) -> Self {
        let code = match &e {
            FcrError::InvalidArgument(_) => 2,
            FcrError::DataFormat(_)
            | FcrError::InvalidGrid(_)
            | FcrError::DimensionMismatch { .. }
            | FcrError::GridMismatch
            | FcrError::EmptyDataset => 3,
            FcrError::Io(_) => 5,
            _ => 4,
        };
        CliError::new(code, e.to_string())
    }
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => {
            io::write_atomic(path, bytes)?;
            log_info(format!("wrote {}", path.display()));
            Ok(())
        }
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(bytes)
                .map_err(|e| CliError::new(5, format!("stdout: {e}")))?;
            Ok(())
        }
    }
}

fn read_dataset(x: &Path, y: Option<&Path>) -> Result<FunctionalDataset, CliError> {
    let ds = io::read_curves_csv(x)?;
    log_debug(format!(
        "{} curves on {} grid points",
        ds.n(),
        ds.grid().len()
    ));
    match y {
        None => Ok(ds),
        Some(path) => {
            let responses = io::read_responses_csv(path)?;
            if responses.len() != ds.n() {
                return Err(CliError::new(
                    3,
                    format!("{} responses for {} curves", responses.len(), ds.n()),
                ));
            }
            Ok(ds.with_responses(responses)?)
        }
    }
}

fn fit_options(rank_tol: Option<f64>, config: &FileConfig) -> Result<FitOptions, CliError> {
    let mut opts = FitOptions::default();
    if let Some(tol) = rank_tol.or(config.rank_tol) {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(CliError::new(
                2,
                format!("rank-tol must lie in (0,1), got {tol}"),
            ));
        }
        opts.rank_tol = tol;
    }
    Ok(opts)
}

fn parse_alpha_grid(text: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<f64>()
                .map_err(|_| CliError::new(2, format!("bad alpha '{tok}' in alpha-grid")))
        })
        .collect()
}

fn parse_pmax(text: &str) -> Result<Option<usize>, CliError> {
    if text.eq_ignore_ascii_case("auto") {
        return Ok(None);
    }
    text.parse::<usize>()
        .map(Some)
        .map_err(|_| CliError::new(2, format!("pmax must be a count or 'auto', got '{text}'")))
}

fn tuning_grid(
    alpha_grid: Option<&str>,
    pmax: Option<&str>,
    var_threshold: Option<f64>,
    config: &FileConfig,
) -> Result<TuningGrid, CliError> {
    let alphas = match alpha_grid {
        Some(text) => parse_alpha_grid(text)?,
        None => config
            .alpha_grid
            .clone()
            .unwrap_or_else(|| DEFAULT_ALPHAS.to_vec()),
    };
    let pmax_text = pmax.map(str::to_string).or_else(|| config.pmax.clone());
    let var = var_threshold.or(config.var_threshold).unwrap_or(0.99);
    let rule = match pmax_text.as_deref() {
        None => PmaxRule::Auto { var_threshold: var },
        Some(text) => match parse_pmax(text)? {
            None => PmaxRule::Auto { var_threshold: var },
            Some(p) => PmaxRule::Fixed(p),
        },
    };
    Ok(TuningGrid::new(alphas, rule)?)
}

fn parse_methods(text: &str, fcr_grid: &TuningGrid) -> Result<Vec<Method>, CliError> {
    let mut methods = Vec::new();
    for tok in text.split(',') {
        let tok = tok.trim();
        if tok.is_empty() {
            continue;
        }
        if tok == "fcr" {
            methods.push(Method::FcrTuned(fcr_grid.clone()));
        } else if tok == "mean" {
            methods.push(Method::MeanOnly);
        } else if let Some(p) = tok.strip_prefix("fpcr:") {
            let p = p
                .parse()
                .map_err(|_| CliError::new(2, format!("bad component count in '{tok}'")))?;
            methods.push(Method::Fpcr { p });
        } else if let Some(p) = tok.strip_prefix("fpls:") {
            let p = p
                .parse()
                .map_err(|_| CliError::new(2, format!("bad component count in '{tok}'")))?;
            methods.push(Method::Fpls { p });
        } else {
            return Err(CliError::new(
                2,
                format!("unknown method '{tok}' (expected fcr, fpcr:P, fpls:P, mean)"),
            ));
        }
    }
    if methods.is_empty() {
        return Err(CliError::new(2, "no methods given"));
    }
    Ok(methods)
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match jobs {
        None => Ok(f()),
        Some(threads) => {
            if threads == 0 {
                return Err(CliError::new(2, "jobs must be at least 1"));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| CliError::new(2, format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn load_generative(path: Option<&Path>) -> Result<GenerativeModel, CliError> {
    match path {
        None => Ok(GenerativeModel::default_surrogate()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::new(5, format!("cannot read {}: {e}", path.display())))?;
            Ok(io::generative_from_json(&text)?)
        }
    }
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn cmd_fit(args: FitArgs, config: &FileConfig) -> Result<(), CliError> {
    let ds = read_dataset(&args.x, Some(&args.y))?;
    let opts = fit_options(args.rank_tol, config)?;
    let p = args.p.or(config.p).unwrap_or(2);
    let file = match args.method {
        MethodFlag::Fcr => {
            let alpha = args.alpha.or(config.alpha).unwrap_or(0.5);
            let model = fit(&ds, alpha, p, &opts)?;
            if model.truncated() {
                log_info(format!("signal exhausted after {} component(s)", model.p()));
            }
            io::fcr_model_to_file(&model)
        }
        MethodFlag::Fpcr => io::baseline_model_to_file(&fpcr_fit(&ds, p)?),
        MethodFlag::Fpls => io::baseline_model_to_file(&fpls_fit(&ds, p)?),
    };
    let json = io::model_to_json(&file)?;
    emit(args.out.as_deref(), json.as_bytes())
}

fn cmd_predict(args: PredictArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.model)
        .map_err(|e| CliError::new(5, format!("cannot read {}: {e}", args.model.display())))?;
    let model = io::model_from_json(&text)?;
    let ds = io::read_curves_csv(&args.x)?;
    let preds = model.predict(&ds)?;
    emit(
        args.out.as_deref(),
        io::predictions_to_csv(&preds).as_bytes(),
    )
}

fn cmd_tune(args: TuneArgs, config: &FileConfig) -> Result<(), CliError> {
    let ds = read_dataset(&args.x, Some(&args.y))?;
    let opts = fit_options(args.rank_tol, config)?;
    let grid = tuning_grid(
        args.alpha_grid.as_deref(),
        args.pmax.as_deref(),
        args.var_threshold,
        config,
    )?;
    let jobs = args.jobs.or(config.jobs);
    let report = with_jobs(jobs, || tune(&ds, &grid, &opts))??;
    log_info(format!(
        "selected p = {}, alpha = {}",
        report.best_p, report.best_alpha
    ));
    if let Some(path) = &args.gcv_table {
        io::write_atomic(path, io::gcv_table_to_csv(&report).as_bytes())?;
        log_info(format!("wrote {}", path.display()));
    }
    let json = io::model_to_json(&io::fcr_model_to_file(&report.model))?;
    emit(args.out.as_deref(), json.as_bytes())
}

fn cmd_simulate(args: SimulateArgs, config: &FileConfig) -> Result<(), CliError> {
    let mut gm = load_generative(args.gm.as_deref())?;
    match (args.gm.is_some(), args.scenario) {
        (_, Some(s)) => gm = gm.with_scenario(s.into())?,
        (false, None) => gm = gm.with_scenario(Scenario::I)?,
        (true, None) => {}
    }
    let opts = fit_options(args.rank_tol, config)?;
    let snr = args.snr.or(config.snr).unwrap_or(10.0);
    let n = args.n.or(config.n).unwrap_or(35);
    let replicates = args.replicates.or(config.replicates).unwrap_or(200);
    let seed = args.seed.or(config.seed).unwrap_or(1);
    // Tuned-fcr entries default to the 2 × 11 candidate pool.
    let pmax_text = args
        .pmax
        .clone()
        .or_else(|| config.pmax.clone())
        .unwrap_or_else(|| "2".into());
    let fcr_grid = tuning_grid(None, Some(&pmax_text), args.var_threshold, config)?;
    let methods = parse_methods(&args.methods, &fcr_grid)?;
    let jobs = args.jobs.or(config.jobs);
    let report = with_jobs(jobs, || {
        run_estimation_study(&gm, &methods, n, replicates, snr, seed, &opts)
    })??;
    emit(
        args.out.as_deref(),
        io::study_report_to_csv(&report).as_bytes(),
    )
}

fn cmd_remspe(args: RemspeArgs, config: &FileConfig) -> Result<(), CliError> {
    let ds = read_dataset(&args.x, Some(&args.y))?;
    let opts = fit_options(args.rank_tol, config)?;
    let fraction = args.test_fraction.or(config.test_fraction).unwrap_or(0.1);
    let splits = args.splits.or(config.splits).unwrap_or(200);
    let seed = args.seed.or(config.seed).unwrap_or(1);
    let fcr_grid = tuning_grid(None, args.pmax.as_deref(), args.var_threshold, config)?;
    let methods = parse_methods(&args.methods, &fcr_grid)?;
    let jobs = args.jobs.or(config.jobs);
    let report = with_jobs(jobs, || {
        run_prediction_study(&ds, &methods, fraction, splits, seed, &opts)
    })??;
    emit(
        args.out.as_deref(),
        io::study_report_to_csv(&report).as_bytes(),
    )
}

fn cmd_oracle_check(args: OracleArgs, config: &FileConfig) -> Result<(), CliError> {
    let seed = args.seed.or(config.seed).unwrap_or(1);
    let opts = fit_options(args.rank_tol, config)?;
    let alphas = [0.0, 0.25, 0.5, 0.75, 0.9];
    let mut out = String::from("instance,alpha,p,objective_fit,objective_oracle,rel_gap,status\n");
    let mut failures = 0usize;
    let started = Instant::now();
    for inst in 0..args.instances {
        let rank = 4 + inst % 3;
        let ds = certification_instance(15, 12, rank, seed.wrapping_add(inst as u64 * 101))?;
        let sample = CenteredSample::new(&ds)?;
        for &alpha in &alphas {
            let mut state = fcr::continuum::init_state(&ds, &opts)?;
            // The sequence at alpha = 0 terminates after one component.
            let depth = if alpha == 0.0 { 1 } else { 2 };
            for p in 1..=depth {
                let component = fit_component(&state, &sample, alpha, &opts)?;
                let oracle = brute_force(&state, alpha, args.restarts, seed ^ 0xfc)?;
                let t_fit = t_star(&state, alpha, &component.weight)?;
                let gap = (t_fit - oracle.objective).abs() / oracle.objective.abs().max(1.0);
                let ok = gap <= 1e-8;
                if !ok {
                    failures += 1;
                }
                out.push_str(&format!(
                    "{inst},{alpha},{p},{t_fit},{},{gap},{}\n",
                    oracle.objective,
                    if ok { "pass" } else { "FAIL" }
                ));
                if p < depth {
                    state = deflate(&state, &component, &sample, &opts)?;
                }
            }
        }
    }
    // Gradient sanity on one instance per run.
    let ds = certification_instance(15, 12, 5, seed ^ 0xabcd)?;
    let state = fcr::continuum::init_state(&ds, &opts)?;
    let worst = gradient_check(&state, 0.6, 5, seed)?;
    let grad_ok = worst <= 1e-5;
    if !grad_ok {
        failures += 1;
    }
    out.push_str(&format!(
        "gradient,0.6,1,,,{worst},{}\n",
        if grad_ok { "pass" } else { "FAIL" }
    ));
    log_info(format!(
        "oracle check finished in {:.1}s, {failures} failure(s)",
        started.elapsed().as_secs_f64()
    ));
    emit(args.out.as_deref(), out.as_bytes())?;
    if failures > 0 {
        return Err(CliError::new(
            4,
            format!("{failures} oracle check(s) failed"),
        ));
    }
    Ok(())
}

fn cmd_estimate_gm(args: EstimateGmArgs, config: &FileConfig) -> Result<(), CliError> {
    if args.k < 1 {
        return Err(CliError::new(2, "k must be at least 1"));
    }
    let ds = io::read_curves_csv(&args.x)?;
    let opts = fit_options(args.rank_tol, config)?;
    let (centered, mean, _) = ds.center()?;
    let eig = centered.empirical_cov()?.eigen(opts.rank_tol)?;
    if args.k > eig.rank() {
        return Err(CliError::new(
            4,
            format!("k = {} exceeds the covariance rank {}", args.k, eig.rank()),
        ));
    }
    let eigenpairs: Vec<_> = (0..args.k)
        .map(|j| {
            let (lam, phi) = eig.pair(j);
            (lam, phi.clone())
        })
        .collect();
    let beta_index = match args.scenario {
        ScenarioFlag::I => 0,
        ScenarioFlag::Ii => 2,
    };
    if beta_index >= eigenpairs.len() {
        return Err(CliError::new(
            2,
            format!(
                "scenario needs eigenpair {}, only {} kept",
                beta_index + 1,
                args.k
            ),
        ));
    }
    // Eigenfunctions are defined up to sign; orient the coefficient so the
    // mean projects positively and the SNR ratio stays well defined.
    let mut beta = eigenpairs[beta_index].1.clone();
    if ds.grid().inner_product(&mean, &beta)? < 0.0 {
        beta.scale(-1.0);
    }
    let sigma = args.sigma.unwrap_or(0.0);
    let gm = GenerativeModel::new(ds.grid().clone(), mean, eigenpairs, beta, sigma)?;
    let snr = if args.sigma.is_some() {
        None
    } else {
        args.snr.or(config.snr)
    };
    let json = io::generative_to_json(&io::generative_to_file(&gm, snr))?;
    emit(args.out.as_deref(), json.as_bytes())
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Fit(args) => cmd_fit(args, &config),
        Command::Predict(args) => cmd_predict(args),
        Command::Tune(args) => cmd_tune(args, &config),
        Command::Simulate(args) => cmd_simulate(args, &config),
        Command::RemspeStudy(args) => cmd_remspe(args, &config),
        Command::OracleCheck(args) => cmd_oracle_check(args, &config),
        Command::EstimateGm(args) => cmd_estimate_gm(args, &config),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fcr: error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
