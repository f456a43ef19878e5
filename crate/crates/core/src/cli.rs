//! Command-line front end. The `rydfit` binary is a thin wrapper around
//! [`run`], which takes its output streams as arguments so it can be
//! driven from tests.
//!
//! Exit codes: `0` success, `1` input error, `2` a fit that did not
//! converge (a diagnostic JSON object with `"converged": false` is still
//! written).

use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    aggregate_scan_set, read_budget, read_scan_sets, third_step_to_total, total_error, ErrorBudget,
    TOTAL_ERROR_ROUNDING_MHZ,
};
use crate::config::PipelineConfig;
use crate::levels::{format_decimal, read_level_table, validate_dataset, write_level_table, LevelDataset};
use crate::lineshape::{
    auto_init_guess, fit_line_center, read_scan_trace, write_fit_plot, LineFit, LineFitOptions, LineShapeParams,
    ModelKind,
};
use crate::ritz::{
    fit, predict_level, residual_stats, write_per_level_csv, DefectClosure, FitMethod, ResidualStats, RitzFitOptions,
    RitzFitResult, RitzParameters,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "rydfit",
    version,
    about = "Line-center and Rydberg-series fitting for level spectroscopy"
)]
pub struct Cli {
    /// `key = value` pipeline configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Write the main output here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// JSON instead of CSV for `reduce`, `predict` and `budget`.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a lineshape to a `freq_mhz,signal` scan trace.
    FitLine(FitLineArgs),
    /// Average scan sets into a level table with budget sigmas.
    Reduce(ReduceArgs),
    /// Fit a Rydberg-Ritz series to a level table.
    FitSeries(FitSeriesArgs),
    /// Predict level energies from fitted series parameters.
    Predict(PredictArgs),
    /// Quadrature sum of a `label,value_mhz` error budget.
    Budget(BudgetArgs),
}

#[derive(Debug, Args)]
pub struct FitLineArgs {
    /// `freq_mhz,signal` CSV.
    pub trace: PathBuf,
    /// `wahlquist` (FM derivative) or `lorentzian`.
    #[arg(long, default_value = "wahlquist")]
    pub model: String,
    /// Initial center, MHz (default: guessed from the trace).
    #[arg(long)]
    pub center: Option<f64>,
    /// Initial FWHM, MHz.
    #[arg(long)]
    pub fwhm: Option<f64>,
    /// Initial modulation amplitude, MHz (default 15).
    #[arg(long)]
    pub mod_amplitude: Option<f64>,
    /// Initial amplitude, signal units.
    #[arg(long, allow_hyphen_values = true)]
    pub amplitude: Option<f64>,
    /// Initial baseline, signal units.
    #[arg(long, allow_hyphen_values = true)]
    pub baseline: Option<f64>,
    /// Hold the modulation amplitude at its initial value.
    #[arg(long)]
    pub pin_mod: bool,
    /// Plot CSV `freq_mhz,signal,model`.
    #[arg(long, value_name = "PATH")]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    /// `n,center_mhz` third-step line centers, several per n.
    pub scan_sets: PathBuf,
    /// `label,value_mhz` error budget.
    pub budget: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitSeriesArgs {
    /// `n,energy_mhz[,sigma_mhz]` level table.
    pub levels: PathBuf,
    /// 1 (Ritz), 2 (expanded) or 3 (two-term); default from config, else 3.
    #[arg(long)]
    pub method: Option<u8>,
    /// Number of defect coefficients, 1-3 (Method 3: 2).
    #[arg(long)]
    pub order: Option<usize>,
    /// `measured` or `self-consistent` (Method 1 only).
    #[arg(long)]
    pub closure: Option<String>,
    /// Report unscaled covariance sigmas.
    #[arg(long)]
    pub no_chi2_scaling: bool,
    /// Additional level table merged in before fitting.
    #[arg(long, value_name = "PATH")]
    pub extra_levels: Option<PathBuf>,
    /// Per-level plot CSV.
    #[arg(long, value_name = "PATH")]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// `fit-series` JSON output, or bare series parameters.
    pub params: PathBuf,
    /// `50`, `105..120` (inclusive) or a comma list of either.
    #[arg(long)]
    pub n: String,
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    /// `label,value_mhz` CSV.
    pub budget: PathBuf,
    /// Rounding step for the reported total, MHz.
    #[arg(long, default_value_t = TOTAL_ERROR_ROUNDING_MHZ)]
    pub round_to: f64,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    /// Fit ran but did not converge; payload is the diagnostic JSON.
    #[error("fit did not converge")]
    NotConverged(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NotConverged(_) => EXIT_NOT_CONVERGED,
            _ => EXIT_INPUT,
        }
    }
}

fn input_err(path: &Path, err: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{}: {err}", path.display()))
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// JSON payload of `fit-line`.
#[derive(Debug, Serialize)]
pub struct LineFitSummary {
    pub model: ModelKind,
    pub converged: bool,
    pub center_mhz: f64,
    pub center_sigma_mhz: f64,
    pub fwhm_mhz: f64,
    pub fwhm_sigma_mhz: f64,
    pub mod_amplitude_mhz: f64,
    pub mod_amplitude_sigma_mhz: f64,
    pub amplitude: f64,
    pub amplitude_sigma: f64,
    pub baseline: f64,
    pub baseline_sigma: f64,
    pub chi2: f64,
    pub reduced_chi2: f64,
    pub dof: usize,
    pub n_iterations: usize,
    pub message: Option<String>,
}

impl From<&LineFit> for LineFitSummary {
    fn from(f: &LineFit) -> Self {
        Self {
            model: f.kind,
            converged: f.report.converged,
            center_mhz: f.params.center.value(),
            center_sigma_mhz: f.center_sigma,
            fwhm_mhz: f.params.fwhm.value(),
            fwhm_sigma_mhz: f.fwhm_sigma,
            mod_amplitude_mhz: f.params.mod_amplitude.value(),
            mod_amplitude_sigma_mhz: f.mod_amplitude_sigma,
            amplitude: f.params.amplitude,
            amplitude_sigma: f.amplitude_sigma,
            baseline: f.params.baseline,
            baseline_sigma: f.baseline_sigma,
            chi2: f.report.chi2,
            reduced_chi2: f.report.reduced_chi2,
            dof: f.report.dof,
            n_iterations: f.report.n_iterations,
            message: f.report.message.clone(),
        }
    }
}

/// JSON payload of `fit-series`: the full fit result plus a few
/// convenience fields at top level.
#[derive(Debug, Serialize, Deserialize)]
pub struct SeriesSummary {
    pub converged: bool,
    pub order: usize,
    pub e_ionisation_mhz: f64,
    pub e_ionisation_sigma_mhz: f64,
    pub residual_stats: ResidualStats,
    #[serde(flatten)]
    pub result: RitzFitResult,
}

#[derive(Debug, Serialize)]
struct ReducedLevel {
    n: u32,
    scans: usize,
    nu3_mean_mhz: f64,
    nu3_std_mhz: f64,
    energy_mhz: f64,
    sigma_mhz: f64,
}

#[derive(Debug, Serialize)]
struct Prediction {
    n: u32,
    e_pred_mhz: f64,
}

#[derive(Debug, Serialize)]
struct BudgetSummary<'a> {
    components: &'a [crate::analysis::ErrorComponent],
    quadrature_sum_mhz: f64,
    round_to_mhz: f64,
    total_mhz: f64,
}

struct Context {
    config: PipelineConfig,
    out: Option<PathBuf>,
    json: bool,
}

impl Context {
    fn resolve(&self, path: &Path) -> Result<PathBuf, CliError> {
        let full = match &self.config.output_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        };
        if let Some(parent) = full.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| CliError::Io {
                path: parent.to_path_buf(),
                source: e,
            })?;
        }
        Ok(full)
    }

    fn write_file(&self, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        let full = self.resolve(path)?;
        fs::write(&full, bytes).map_err(|e| CliError::Io { path: full, source: e })
    }

    fn emit(&self, stdout: &mut dyn Write, bytes: &[u8]) -> Result<(), CliError> {
        match &self.out {
            Some(path) => self.write_file(path, bytes),
            None => stdout.write_all(bytes).map_err(|e| CliError::Io {
                path: PathBuf::from("<stdout>"),
                source: e,
            }),
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report types serialize");
    bytes.push(b'\n');
    bytes
}

/// Parses arguments and runs one subcommand, returning the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(err) => {
            let _ = writeln!(stderr, "rydfit: {err}");
            err.exit_code()
        }
    }
}

pub fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Io {
                path: path.clone(),
                source: e,
            })?;
            PipelineConfig::parse(&text).map_err(|e| input_err(path, e))?
        }
        None => PipelineConfig::default(),
    };
    let ctx = Context {
        config,
        out: cli.out,
        json: cli.json,
    };
    match cli.command {
        Command::FitLine(a) => cmd_fit_line(&ctx, &a, stdout),
        Command::Reduce(a) => cmd_reduce(&ctx, &a, stdout),
        Command::FitSeries(a) => cmd_fit_series(&ctx, &a, stdout),
        Command::Predict(a) => cmd_predict(&ctx, &a, stdout),
        Command::Budget(a) => cmd_budget(&ctx, &a, stdout),
    }
}

fn cmd_fit_line(ctx: &Context, a: &FitLineArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let kind: ModelKind = a.model.parse().map_err(CliError::Input)?;
    let trace = read_scan_trace(open(&a.trace)?).map_err(|e| input_err(&a.trace, e))?;

    let guess = match auto_init_guess(&trace, kind) {
        Ok(g) => g,
        Err(e) => {
            let diag = serde_json::json!({
                "model": kind,
                "converged": false,
                "message": e.to_string(),
            });
            ctx.emit(stdout, &to_json(&diag))?;
            return Err(CliError::NotConverged(e.to_string()));
        }
    };
    let init = LineShapeParams::new(
        a.center.unwrap_or(guess.center.value()),
        a.fwhm.unwrap_or(guess.fwhm.value()),
        a.mod_amplitude.unwrap_or(guess.mod_amplitude.value()),
        a.amplitude.unwrap_or(guess.amplitude),
        a.baseline.unwrap_or(guess.baseline),
    )
    .map_err(|e| CliError::Input(e.to_string()))?;
    let mut opts = LineFitOptions {
        pin_mod_amplitude: a.pin_mod,
        ..LineFitOptions::default()
    };
    opts.solver.scale_by_reduced_chi2 = ctx.config.scale_by_reduced_chi2;

    let fit = fit_line_center(&trace, kind, Some(init), &opts).map_err(|e| input_err(&a.trace, e))?;
    if let Some(plot) = &a.plot {
        let mut buf = Vec::new();
        write_fit_plot(&mut buf, &trace, &fit).expect("writing to memory");
        ctx.write_file(plot, &buf)?;
    }
    let summary = LineFitSummary::from(&fit);
    let bytes = to_json(&summary);
    ctx.emit(stdout, &bytes)?;
    if summary.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged(String::from_utf8_lossy(&bytes).into_owned()))
    }
}

fn cmd_reduce(ctx: &Context, a: &ReduceArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let sets = read_scan_sets(open(&a.scan_sets)?).map_err(|e| input_err(&a.scan_sets, e))?;
    let budget: ErrorBudget = read_budget(open(&a.budget)?).map_err(|e| input_err(&a.budget, e))?;
    let sigma = total_error(&budget, TOTAL_ERROR_ROUNDING_MHZ).value();

    let mut rows = Vec::with_capacity(sets.len());
    for set in &sets {
        let (mean, std) = aggregate_scan_set(set).map_err(|e| input_err(&a.scan_sets, e))?;
        let energy = third_step_to_total(mean, &ctx.config.constants).value();
        rows.push(ReducedLevel {
            n: set.n,
            scans: set.centers.len(),
            nu3_mean_mhz: mean.value(),
            nu3_std_mhz: std.value(),
            energy_mhz: energy,
            sigma_mhz: sigma,
        });
    }
    let bytes = if ctx.json {
        to_json(&rows)
    } else {
        let raw: Vec<_> = rows.iter().map(|r| (r.n, r.energy_mhz, r.sigma_mhz)).collect();
        let data = validate_dataset(&raw).map_err(|e| input_err(&a.scan_sets, e))?;
        let mut buf = Vec::new();
        write_level_table(&mut buf, &data).map_err(|e| CliError::Input(e.to_string()))?;
        buf
    };
    ctx.emit(stdout, &bytes)
}

fn read_levels(ctx: &Context, path: &Path) -> Result<LevelDataset, CliError> {
    read_level_table(open(path)?, ctx.config.default_sigma).map_err(|e| input_err(path, e))
}

fn cmd_fit_series(ctx: &Context, a: &FitSeriesArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let method = match a.method {
        Some(m) => {
            FitMethod::from_number(m).ok_or_else(|| CliError::Input(format!("--method must be 1, 2 or 3, got {m}")))?
        }
        None => cfg.method,
    };
    let order = a.order.or(cfg.order).unwrap_or(method.default_order());
    let closure: DefectClosure = match &a.closure {
        Some(text) => text.parse().map_err(CliError::Input)?,
        None => cfg.closure,
    };

    let mut data = read_levels(ctx, &a.levels)?;
    if let Some(extra) = &a.extra_levels {
        data = data.merge(&read_levels(ctx, extra)?).map_err(|e| input_err(extra, e))?;
    }

    let mut opts = RitzFitOptions {
        closure,
        constants: cfg.constants,
        ..RitzFitOptions::default()
    };
    opts.solver.scale_by_reduced_chi2 = cfg.scale_by_reduced_chi2 && !a.no_chi2_scaling;

    let result = fit(&data, method, order, &opts).map_err(|e| input_err(&a.levels, e))?;
    if let Some(plot) = &a.plot {
        let mut buf = Vec::new();
        write_per_level_csv(&mut buf, &result).expect("writing to memory");
        ctx.write_file(plot, &buf)?;
    }
    let summary = SeriesSummary {
        converged: result.report.converged,
        order,
        e_ionisation_mhz: result.e_ionisation(),
        e_ionisation_sigma_mhz: result.e_ionisation_sigma(),
        residual_stats: residual_stats(&result),
        result,
    };
    let bytes = to_json(&summary);
    ctx.emit(stdout, &bytes)?;
    if summary.converged {
        Ok(())
    } else {
        Err(CliError::NotConverged(String::from_utf8_lossy(&bytes).into_owned()))
    }
}

/// Parses `50`, `105..120` or comma-separated combinations, keeping order.
pub fn parse_n_list(text: &str) -> Result<Vec<u32>, String> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let num = |s: &str| s.trim().parse::<u32>().map_err(|_| format!("bad n `{s}` in `{text}`"));
        match part.split_once("..") {
            Some((lo, hi)) => {
                let (lo, hi) = (num(lo)?, num(hi.trim_start_matches('='))?);
                if lo > hi {
                    return Err(format!("empty range `{part}`"));
                }
                out.extend(lo..=hi);
            }
            None => out.push(num(part)?),
        }
    }
    if out.is_empty() {
        return Err("no n values given".into());
    }
    Ok(out)
}

fn read_params(path: &Path) -> Result<RitzParameters, CliError> {
    let value: serde_json::Value = serde_json::from_reader(open(path)?).map_err(|e| input_err(path, e))?;
    let params = value.get("params").cloned().unwrap_or(value);
    let p: RitzParameters = serde_json::from_value(params).map_err(|e| input_err(path, e))?;
    // Re-validate through the constructor.
    RitzParameters::new(p.e_ionisation.value(), p.method, p.coefficients).map_err(|e| input_err(path, e))
}

fn cmd_predict(ctx: &Context, a: &PredictArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let params = read_params(&a.params)?;
    let ns = parse_n_list(&a.n).map_err(CliError::Input)?;
    let mut rows = Vec::with_capacity(ns.len());
    for n in ns {
        let e = predict_level(&params, n, &ctx.config.constants).map_err(|e| CliError::Input(e.to_string()))?;
        rows.push(Prediction {
            n,
            e_pred_mhz: e.value(),
        });
    }
    let bytes = if ctx.json {
        to_json(&rows)
    } else {
        let mut buf = String::from("n,E_pred_mhz\n");
        for r in &rows {
            buf.push_str(&format!("{},{}\n", r.n, format_decimal(r.e_pred_mhz, 3)));
        }
        buf.into_bytes()
    };
    ctx.emit(stdout, &bytes)
}

fn cmd_budget(ctx: &Context, a: &BudgetArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    if !(a.round_to.is_finite() && a.round_to > 0.0) {
        return Err(CliError::Input(format!(
            "--round-to must be positive, got {}",
            a.round_to
        )));
    }
    let budget = read_budget(open(&a.budget)?).map_err(|e| input_err(&a.budget, e))?;
    let total = total_error(&budget, a.round_to).value();
    let bytes = if ctx.json {
        to_json(&BudgetSummary {
            components: budget.components(),
            quadrature_sum_mhz: budget.quadrature_sum(),
            round_to_mhz: a.round_to,
            total_mhz: total,
        })
    } else {
        let mut buf = String::from("label,value_mhz\n");
        for c in budget.components() {
            buf.push_str(&format!("{},{}\n", c.label, c.value.value()));
        }
        buf.push_str(&format!(
            "quadrature_sum,{}\n",
            format_decimal(budget.quadrature_sum(), 4)
        ));
        buf.push_str(&format!("total,{}\n", format_decimal(total, 3)));
        buf.into_bytes()
    };
    ctx.emit(stdout, &bytes)
}
