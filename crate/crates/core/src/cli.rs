//! `hd-delta` command line.
//!
//! Reports are JSON, tables are CSV. Failures print
//! `{"error": {"kind": ..., "message": ...}}` on stderr and exit with 2
//! (usage/parse), 3 (numerical) or 4 (I/O).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::Serialize;
use serde_json::json;

use crate::bound::{classify_regime, pathwise_check, FunctionSpec, RateSpec, REGIME_TOL};
use crate::error::{Error, Result};
use crate::estimators::{
    conservative_lasso_with, debias_dcl, default_node_lambda, lasso_cd, nodewise_precision, ols, Estimate,
    LassoOptions,
};
use crate::io::{read_dataset_csv, read_matrix_csv, read_returns_csv, read_vector_csv, write_vector_csv};
use crate::montecarlo::{run_table1_with_threads, select_lambda_ic, IcPoint, RatioScale, SimConfig, DEFAULT_LAMBDA_COEFS};
use crate::norms::{check_compatibility, check_symmetric_frobenius_bound, VectorNorm};
use crate::portfolio::{
    div_measure, estimate_gmv, oos_variance, variance_error_bound_direct, variance_error_bound_theorem,
    PortfolioInstance,
};
use crate::series::{simulate_series, BasisSpec, TestFunction, DEFAULT_GRID, DEFAULT_ORACLE_SAMPLES};

pub const SEED_ENV: &str = "HD_DELTA_SEED";

#[derive(Debug, Parser)]
#[command(name = "hd-delta", version, about = "Pathwise bounds for functions of high-dimensional estimators")]
pub struct Cli {
    /// Worker threads (1 = sequential).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo table of mean ratios.
    Simulate(SimulateArgs),
    /// Fit an estimator to a CSV dataset (header, y first).
    Estimate(EstimateArgs),
    /// Evaluate the pathwise bound for supplied coefficient vectors.
    Bound(BoundArgs),
    /// GMV weights from returns, with bounds when the true covariance is given.
    Portfolio(PortfolioArgs),
    /// Series regression on a synthetic function with the pointwise bound.
    Series(SeriesArgs),
    /// Norm compatibility checks.
    Norms {
        #[command(subcommand)]
        command: NormsCommand,
    },
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config replication count.
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long, value_enum)]
    pub ratio_scale: Option<RatioScaleArg>,
    /// Include per-replication ratios in the diagnostics.
    #[arg(long)]
    pub keep_ratios: bool,
    /// CSV table destination (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-cell diagnostics JSON destination.
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum RatioScaleArg {
    Printed,
    Frobenius,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Lasso,
    Conservative,
    Dcl,
    Ols,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "lasso")]
    pub method: Method,
    /// Penalty level, or `auto` for the information criterion over
    /// `c·√(log p/n)`.
    #[arg(long, default_value = "auto")]
    pub lambda: String,
    /// Stage-2 penalty for the conservative lasso (default: same as stage 1).
    #[arg(long)]
    pub lambda_stage2: Option<f64>,
    /// Comma-separated `c` grid for `--lambda auto`.
    #[arg(long, value_delimiter = ',')]
    pub lambda_coefs: Option<Vec<f64>>,
    /// Nodewise penalty for `dcl` (default `√(log p/n)`).
    #[arg(long)]
    pub node_lambda: Option<f64>,
    /// Also write β̂ as a one-column CSV.
    #[arg(long)]
    pub beta_out: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FunctionKind {
    Linear,
    Quadratic,
    Basis,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long = "f", value_enum)]
    pub function: FunctionKind,
    /// Linear map `D` (m × p CSV).
    #[arg(long = "D")]
    pub d: Option<PathBuf>,
    /// Symmetric `Σ` for the quadratic form (p × p CSV).
    #[arg(long)]
    pub sigma: Option<PathBuf>,
    /// Evaluation point for the basis function.
    #[arg(long)]
    pub x0: Option<f64>,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub b: f64,
    #[arg(long)]
    pub beta_hat: PathBuf,
    #[arg(long)]
    pub beta0: PathBuf,
    /// 1, 2 or inf.
    #[arg(long, default_value = "2")]
    pub norm: VectorNorm,
    /// Regime constant `C`; enables regime classification.
    #[arg(long)]
    pub regime_c: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub k_n: f64,
    #[arg(long, default_value_t = 1.0)]
    pub d_n: f64,
    #[arg(long, default_value_t = REGIME_TOL)]
    pub regime_tol: f64,
    /// Rate as JSON, e.g. `{"kind":"lasso","n":200,"p":100,"s0":5}`.
    #[arg(long)]
    pub rate: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PortfolioArgs {
    /// Returns CSV, one column per asset with a header row.
    #[arg(long)]
    pub returns: PathBuf,
    /// True covariance (p × p CSV) for the variance bounds.
    #[arg(long)]
    pub sigma: Option<PathBuf>,
    #[arg(long)]
    pub lambda_node: Option<f64>,
    /// Use raw second moments instead of demeaned returns.
    #[arg(long)]
    pub no_demean: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SeriesArgs {
    #[arg(long, default_value = "sin2x")]
    pub function: TestFunction,
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Number of basis terms.
    #[arg(long, default_value_t = 8)]
    pub p: usize,
    #[arg(long, default_value_t = 0.1)]
    pub noise_sd: f64,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub b: f64,
    #[arg(long, default_value_t = DEFAULT_GRID)]
    pub grid: usize,
    #[arg(long, default_value_t = DEFAULT_ORACLE_SAMPLES)]
    pub oracle_samples: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum NormsCommand {
    /// `‖Ax‖_q ≤ ‖|A|‖_q‖x‖_q`, plus the symmetric Frobenius bound for square symmetric `A`.
    Check {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        vector: PathBuf,
        /// 1, 2, inf; all three if absent.
        #[arg(long)]
        norm: Option<VectorNorm>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) | Error::InvalidArgument(_) => 2,
        Error::Dimension(_) | Error::Degenerate(_) | Error::Rank(_) | Error::Domain(_) | Error::Hypothesis(_) => 3,
        Error::Io(_) => 4,
    }
}

fn error_json(kind: &str, message: &str) -> String {
    json!({ "error": { "kind": kind, "message": message } }).to_string()
}

pub fn main() -> i32 {
    run(std::env::args_os())
}

/// Parses `args` (program name first), dispatches, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            eprintln!("{}", error_json("usage", e.to_string().trim()));
            return 2;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_json(e.kind(), &e.to_string()));
            exit_code(&e)
        }
    }
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    let threads = cli.threads.map(usize::from);
    if let Some(t) = threads {
        // Ignore the error if a global pool already exists (repeat calls in-process).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match &cli.command {
        Command::Simulate(a) => simulate(a, threads),
        Command::Estimate(a) => estimate(a),
        Command::Bound(a) => bound(a),
        Command::Portfolio(a) => portfolio(a),
        Command::Series(a) => series(a),
        Command::Norms {
            command: NormsCommand::Check { matrix, vector, norm, out },
        } => norms_check(matrix, vector, *norm, out.as_deref()),
    }
}

fn emit(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, content)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(content.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    emit(out, &s)
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Parse(format!("{SEED_ENV}=`{v}` is not an unsigned 64-bit integer"))),
        Err(_) => Ok(None),
    }
}

/// `--seed`, then the config value, then `HD_DELTA_SEED`.
fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<u64> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    env_seed()?.ok_or_else(|| Error::InvalidArgument(format!("no seed: pass --seed, set it in the config, or set {SEED_ENV}")))
}

fn simulate(a: &SimulateArgs, threads: Option<usize>) -> Result<()> {
    let file = std::fs::File::open(&a.config)?;
    let mut config: SimConfig = serde_json::from_reader(std::io::BufReader::new(file))?;
    config.seed = Some(resolve_seed(a.seed, config.seed)?);
    if let Some(r) = a.reps {
        config.reps = r;
        for c in &mut config.cells {
            c.reps = None;
        }
    }
    if let Some(s) = a.ratio_scale {
        config.ratio_scale = match s {
            RatioScaleArg::Printed => RatioScale::Printed,
            RatioScaleArg::Frobenius => RatioScale::Frobenius,
        };
    }
    let cells = config.cells()?;
    let table = run_table1_with_threads(&cells, threads, a.keep_ratios || config.keep_ratios)?;
    if let Some(path) = &a.diagnostics {
        emit_json(
            Some(path),
            &json!({
                "seed": config.seed,
                "ratio_scale": config.ratio_scale,
                "results": table.results,
            }),
        )?;
    }
    emit(a.out.as_deref(), &table.to_csv())
}

#[derive(Serialize)]
struct Selection<'a> {
    c_star: f64,
    lambda_star: f64,
    path: &'a [IcPoint],
}

#[derive(Serialize)]
struct EstimateReport<'a> {
    method: Method,
    n: usize,
    p: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    selection: Option<Selection<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    node_lambda: Option<f64>,
    estimate: &'a Estimate,
}

fn parse_positive(name: &str, v: f64) -> Result<f64> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::InvalidArgument(format!("{name} must be finite and >= 0, got {v}")))
    }
}

fn estimate(a: &EstimateArgs) -> Result<()> {
    let data = read_dataset_csv(&a.data)?;
    let opts = LassoOptions::default();
    let coefs = a.lambda_coefs.clone().unwrap_or_else(|| DEFAULT_LAMBDA_COEFS.to_vec());

    let mut selection = None;
    let lambda = if a.method == Method::Ols {
        0.0
    } else if a.lambda.trim().eq_ignore_ascii_case("auto") {
        let sel = select_lambda_ic(&data, &coefs, &opts)?;
        let l = sel.lambda_star;
        selection = Some(sel);
        l
    } else {
        let v: f64 = a
            .lambda
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("--lambda must be `auto` or a number, got `{}`", a.lambda)))?;
        parse_positive("--lambda", v)?
    };

    let mut node_lambda = None;
    let est = match a.method {
        Method::Ols => ols(&data)?,
        Method::Lasso => match &selection {
            Some(sel) => sel.estimate.clone(),
            None => lasso_cd(&data, lambda, None, &opts)?,
        },
        Method::Conservative | Method::Dcl => {
            let l2 = a.lambda_stage2.map_or(Ok(lambda), |v| parse_positive("--lambda-stage2", v))?;
            let cl = conservative_lasso_with(&data, lambda, l2, &opts)?;
            if a.method == Method::Dcl {
                let ln = match a.node_lambda {
                    Some(v) => parse_positive("--node-lambda", v)?,
                    None => default_node_lambda(data.n(), data.p()),
                };
                node_lambda = Some(ln);
                let prec = nodewise_precision(data.x(), &vec![ln; data.p()], &opts)?;
                debias_dcl(&data, &cl, &prec)?
            } else {
                cl
            }
        }
    };
    if let Some(path) = &a.beta_out {
        write_vector_csv(path, &est.beta_hat)?;
    }
    let report = EstimateReport {
        method: a.method,
        n: data.n(),
        p: data.p(),
        selection: selection.as_ref().map(|s| Selection {
            c_star: s.c_star,
            lambda_star: s.lambda_star,
            path: &s.path,
        }),
        node_lambda,
        estimate: &est,
    };
    emit_json(a.out.as_deref(), &report)
}

fn require<'a, T>(v: &'a Option<T>, flag: &str, f: &str) -> Result<&'a T> {
    v.as_ref()
        .ok_or_else(|| Error::InvalidArgument(format!("--f {f} requires {flag}")))
}

fn bound(a: &BoundArgs) -> Result<()> {
    let beta_hat = read_vector_csv(&a.beta_hat)?;
    let beta0 = read_vector_csv(&a.beta0)?;
    let f = match a.function {
        FunctionKind::Linear => FunctionSpec::linear(read_matrix_csv(require(&a.d, "--D", "linear")?)?)?,
        FunctionKind::Quadratic => FunctionSpec::quadratic(read_matrix_csv(require(&a.sigma, "--sigma", "quadratic")?)?)?,
        FunctionKind::Basis => {
            let x0 = *require(&a.x0, "--x0", "basis")?;
            let spec = BasisSpec::power(beta0.len(), a.a, a.b)?;
            FunctionSpec::basis_point(crate::series::basis_eval(&spec, x0)?)?
        }
    };
    let mut report = pathwise_check(&f, &beta_hat, &beta0, a.norm)?;
    let rate = a
        .rate
        .as_deref()
        .map(|r| serde_json::from_str::<RateSpec>(r).map_err(|e| Error::Parse(format!("--rate: {e}"))))
        .transpose()?;
    if let Some(c) = a.regime_c {
        let regime = classify_regime(report.fd_norm, c, a.k_n, a.d_n, a.regime_tol)?;
        report = report.with_regime(regime, rate.as_ref())?;
    } else if rate.is_some() {
        return Err(Error::InvalidArgument("--rate needs --regime-c to pick the bound order".into()));
    }
    emit_json(a.out.as_deref(), &report)
}

fn portfolio(a: &PortfolioArgs) -> Result<()> {
    let (names, returns) = read_returns_csv(&a.returns)?;
    let (n, p) = returns.shape();
    let ln = match a.lambda_node {
        Some(v) => parse_positive("--lambda-node", v)?,
        None => default_node_lambda(n, p),
    };
    let fit = estimate_gmv(&returns, &vec![ln; p], !a.no_demean, &LassoOptions::default())?;
    let mut report = json!({
        "assets": names,
        "n": n,
        "p": p,
        "lambda_node": ln,
        "fit": fit,
    });
    if let Some(path) = &a.sigma {
        let sigma = read_matrix_csv(path)?;
        let truth = PortfolioInstance::gmv(sigma)?;
        let w = truth.weights();
        let s = truth.sigma();
        report["true_weights"] = json!(w.iter().collect::<Vec<_>>());
        report["oos_variance"] = json!(oos_variance(&fit.weights, s)?);
        report["gmv_variance"] = json!(oos_variance(w, s)?);
        report["weight_error_l1"] = json!((&fit.weights - w).lp_norm(1));
        report["bound_theorem"] = serde_json::to_value(variance_error_bound_theorem(&fit.weights, w, s)?)?;
        report["bound_direct"] = serde_json::to_value(variance_error_bound_direct(&fit.weights, w, s)?)?;
        report["div"] = json!(div_measure(s)?);
    }
    emit_json(a.out.as_deref(), &report)
}

fn series(a: &SeriesArgs) -> Result<()> {
    let seed = resolve_seed(a.seed, None)?;
    let spec = BasisSpec::power(a.p, a.a, a.b)?;
    let report = simulate_series(a.function, &spec, a.n, a.noise_sd, seed, a.grid, a.oracle_samples)?;
    emit_json(a.out.as_deref(), &report)
}

fn norms_check(matrix: &Path, vector: &Path, norm: Option<VectorNorm>, out: Option<&Path>) -> Result<()> {
    let a = read_matrix_csv(matrix)?;
    let x: DVector<f64> = read_vector_csv(vector)?;
    let norms = norm.map_or_else(|| VectorNorm::ALL.to_vec(), |q| vec![q]);
    let reports = norms
        .into_iter()
        .map(|q| check_compatibility(&a, &x, q))
        .collect::<Result<Vec<_>>>()?;
    let mut report = json!({ "compatibility": reports, "all_hold": reports.iter().all(|r| r.holds) });
    if a.is_square() && a == a.transpose() {
        let (fro, rhs, holds) = check_symmetric_frobenius_bound(&a)?;
        report["symmetric_bound"] = json!({ "frobenius": fro, "p_max_abs": rhs, "holds": holds });
    }
    emit_json(out, &report)
}
