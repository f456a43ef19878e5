//! Rydberg formula, Ritz quantum-defect expansion and series fits.
//!
//! Level energies follow `E_n = E_i - R / (n*)^2` with the effective
//! quantum number `n* = n - delta(n)`. Three parameterisations of the
//! defect are fitted:
//!
//! * [`FitMethod::Method1`]: the full Ritz expansion
//!   `delta = d0 + d2 t + d4 t^2 + ...` with `t = 1 / (n*)^2`. Because `t`
//!   depends on `delta`, the expansion is closed either with the measured
//!   binding energy, `t = (E_i - E_n) / R`, or by solving the fixed point
//!   self-consistently (see [`DefectClosure`]).
//! * [`FitMethod::Method2`]: `t` approximated by `1 / (n - d0)^2`, giving
//!   `n* = x - a / x^2 - b / x^4 - ...` with `x = n - d0`.
//! * [`FitMethod::Method3`]: Method 2 truncated after `a`, intended for
//!   `n >= 20`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::levels::{validate_dataset, LevelDataset, LevelError};
use crate::optimize::{lm_fit, EvalError, FitReport, OptimizeError, ResidualModel, SolverOptions};
use crate::units::{FrequencyMHz, PhysicalConstants};

/// Starting quantum defect for F-series fits.
pub const INITIAL_DELTA0: f64 = 0.016;
/// Default fixed-point tolerance for [`solve_defect`].
pub const DEFECT_TOL: f64 = 1e-14;
pub const MAX_DEFECT_ITERATIONS: usize = 100;
/// Below this `n` the abridged (Method 3) formula is not trusted.
pub const METHOD3_MIN_N: u32 = 20;

#[derive(Debug, Error)]
pub enum RitzError {
    #[error("n={n}: effective quantum number {n_star} is not positive")]
    Domain { n: u32, n_star: f64 },
    #[error("energy {energy} MHz is not below the ionisation energy {e_ionisation} MHz")]
    Unbound { energy: f64, e_ionisation: f64 },
    #[error("defect iteration for n={n} did not converge (last iterates {last}, {previous})")]
    DefectNotConverged { n: u32, last: f64, previous: f64 },
    #[error("fit needs at least {required} levels, got {got}")]
    TooFewLevels { required: usize, got: usize },
    #[error("series order must be 1, 2 or 3, got {0}")]
    BadOrder(usize),
    #[error("Method 3 uses exactly two defect coefficients (d0, a), got {0}")]
    Method3Order(usize),
    #[error("no levels left after filtering")]
    NoLevels,
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error(transparent)]
    Level(#[from] LevelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitMethod {
    Method1,
    Method2,
    Method3,
}

impl FitMethod {
    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Self::Method1),
            2 => Some(Self::Method2),
            3 => Some(Self::Method3),
            _ => None,
        }
    }

    pub fn default_order(self) -> usize {
        match self {
            Self::Method1 | Self::Method2 => 3,
            Self::Method3 => 2,
        }
    }

    pub fn coefficient_names(self, order: usize) -> Vec<String> {
        let names: Vec<String> = match self {
            Self::Method1 => (0..order).map(|k| format!("delta{}", 2 * k)).collect(),
            Self::Method2 | Self::Method3 => std::iter::once("delta0".to_string())
                .chain(["a", "b"].iter().map(|s| s.to_string()))
                .take(order)
                .collect(),
        };
        names
    }
}

/// How the `t` in the Ritz expansion is obtained during a Method 1 fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DefectClosure {
    /// `t = (E_i - E_n) / R` from the measured energy and current `E_i`.
    #[default]
    Measured,
    /// `t` from [`solve_defect`] on the current coefficients.
    SelfConsistent,
}

impl std::str::FromStr for DefectClosure {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "measured" => Ok(Self::Measured),
            "self-consistent" | "self_consistent" => Ok(Self::SelfConsistent),
            other => Err(format!("unknown defect closure `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RitzParameters {
    pub e_ionisation: FrequencyMHz,
    pub method: FitMethod,
    /// `(d0, d2, d4, ...)` for Method 1, `(d0, a, b, ...)` otherwise.
    pub coefficients: Vec<f64>,
}

impl RitzParameters {
    pub fn new(e_ionisation: f64, method: FitMethod, coefficients: Vec<f64>) -> Result<Self, RitzError> {
        if coefficients.is_empty() || coefficients.len() > 3 {
            return Err(RitzError::BadOrder(coefficients.len()));
        }
        if method == FitMethod::Method3 && coefficients.len() != 2 {
            return Err(RitzError::Method3Order(coefficients.len()));
        }
        let e = FrequencyMHz::new(e_ionisation).map_err(|_| RitzError::Unbound {
            energy: f64::NAN,
            e_ionisation,
        })?;
        Ok(Self {
            e_ionisation: e,
            method,
            coefficients,
        })
    }
}

pub fn rydberg_energy(
    n: u32,
    defect: f64,
    e_ionisation: FrequencyMHz,
    constants: &PhysicalConstants,
) -> Result<FrequencyMHz, RitzError> {
    let n_star = n as f64 - defect;
    if !(n_star > 0.0) {
        return Err(RitzError::Domain { n, n_star });
    }
    Ok(FrequencyMHz::from_finite(energy_at(
        e_ionisation.value(),
        n_star,
        constants.rydberg(),
    )))
}

fn energy_at(e_ionisation: f64, n_star: f64, rydberg: f64) -> f64 {
    e_ionisation - rydberg / (n_star * n_star)
}

/// `n* = sqrt(R / (E_i - E_n))`. The quantum defect is `n - n*`.
pub fn effective_n(
    energy: FrequencyMHz,
    e_ionisation: FrequencyMHz,
    constants: &PhysicalConstants,
) -> Result<f64, RitzError> {
    let binding = e_ionisation.value() - energy.value();
    if !(binding > 0.0) {
        return Err(RitzError::Unbound {
            energy: energy.value(),
            e_ionisation: e_ionisation.value(),
        });
    }
    Ok((constants.rydberg() / binding).sqrt())
}

fn ritz_series(coefficients: &[f64], t: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

/// Self-consistent solution of `delta = d0 + d2 t + d4 t^2 + ...` with
/// `t = 1 / (n - delta)^2`, by fixed-point iteration from `delta = d0`.
/// Returns `(delta, t)`.
pub fn solve_defect(n: u32, coefficients: &[f64], tol: f64) -> Result<(f64, f64), RitzError> {
    let nf = n as f64;
    let t_of = |delta: f64| -> Result<f64, RitzError> {
        let n_star = nf - delta;
        if !(n_star > 0.0) {
            return Err(RitzError::Domain { n, n_star });
        }
        Ok(1.0 / (n_star * n_star))
    };
    let mut delta = coefficients.first().copied().unwrap_or(0.0);
    if coefficients.len() <= 1 {
        return Ok((delta, t_of(delta)?));
    }
    let mut previous = delta;
    for _ in 0..MAX_DEFECT_ITERATIONS {
        let next = ritz_series(coefficients, t_of(delta)?);
        if !next.is_finite() {
            break;
        }
        previous = delta;
        delta = next;
        if (delta - previous).abs() <= tol {
            return Ok((delta, t_of(delta)?));
        }
    }
    Err(RitzError::DefectNotConverged {
        n,
        last: delta,
        previous,
    })
}

/// `n*` of the Method 2/3 formula: `x - a / x^2 - b / x^4 - ...`.
fn approx_effective_n(n: u32, coefficients: &[f64]) -> Result<f64, RitzError> {
    let x = n as f64 - coefficients[0];
    if !(x > 0.0) {
        return Err(RitzError::Domain { n, n_star: x });
    }
    let inv_x2 = 1.0 / (x * x);
    let correction = inv_x2 * ritz_series(&coefficients[1..], inv_x2);
    let n_star = x - correction;
    if !(n_star > 0.0) {
        return Err(RitzError::Domain { n, n_star });
    }
    Ok(n_star)
}

fn model_effective_n(params: &RitzParameters, n: u32) -> Result<f64, RitzError> {
    match params.method {
        FitMethod::Method1 => {
            let (delta, _) = solve_defect(n, &params.coefficients, DEFECT_TOL)?;
            Ok(n as f64 - delta)
        }
        FitMethod::Method2 | FitMethod::Method3 => approx_effective_n(n, &params.coefficients),
    }
}

/// Level energy predicted by the method's series formula. Method 1 uses
/// the self-consistent defect.
pub fn predict_level(
    params: &RitzParameters,
    n: u32,
    constants: &PhysicalConstants,
) -> Result<FrequencyMHz, RitzError> {
    if n < 1 {
        return Err(RitzError::Domain { n, n_star: 0.0 });
    }
    let n_star = model_effective_n(params, n)?;
    Ok(FrequencyMHz::from_finite(energy_at(
        params.e_ionisation.value(),
        n_star,
        constants.rydberg(),
    )))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RitzFitOptions {
    pub solver: SolverOptions,
    pub closure: DefectClosure,
    pub constants: PhysicalConstants,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelResult {
    pub n: u32,
    pub e_measured: f64,
    pub e_model: f64,
    /// `e_measured - e_model`, MHz.
    pub residual: f64,
    /// `sqrt(R / (E_i - E_measured))` with the fitted `E_i`.
    pub effective_n: f64,
    /// `n - effective_n`.
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RitzFitResult {
    pub params: RitzParameters,
    pub coefficient_names: Vec<String>,
    pub closure: Option<DefectClosure>,
    /// Fit parameters are `[E_i, coefficients...]`.
    pub report: FitReport,
    pub per_level: Vec<LevelResult>,
    pub warnings: Vec<String>,
}

impl RitzFitResult {
    pub fn e_ionisation(&self) -> f64 {
        self.params.e_ionisation.value()
    }

    pub fn e_ionisation_sigma(&self) -> f64 {
        self.report.sigmas[0]
    }

    pub fn coefficient_sigmas(&self) -> &[f64] {
        &self.report.sigmas[1..]
    }

    /// Statistical sigma of `E_i` combined in quadrature with a systematic
    /// error common to all levels (which shifts `E_i` one-for-one).
    pub fn e_ionisation_total_sigma(&self, systematic: f64) -> f64 {
        self.e_ionisation_sigma().hypot(systematic)
    }
}

/// Series model in internal coordinates: parameter 0 is `E_i - E_ref`
/// with `E_ref` the largest measured energy, and each datum is stored as
/// `E_ref - E_n`, which is exact in floating point.
struct SeriesModel {
    method: FitMethod,
    closure: DefectClosure,
    n_params: usize,
    rydberg: f64,
    ns: Vec<u32>,
    below_ref: Vec<f64>,
    sigmas: Vec<f64>,
}

impl SeriesModel {
    fn effective_n(&self, params: &[f64], index: usize) -> Result<f64, EvalError> {
        let n = self.ns[index];
        let coefficients = &params[1..];
        let fail = |e: RitzError| EvalError(e.to_string());
        match (self.method, self.closure) {
            (FitMethod::Method1, DefectClosure::Measured) => {
                let binding = params[0] + self.below_ref[index];
                if !(binding > 0.0) {
                    return Err(EvalError(format!("ionisation energy below measured level n={n}")));
                }
                let n_star = n as f64 - ritz_series(coefficients, binding / self.rydberg);
                if !(n_star > 0.0) {
                    return Err(fail(RitzError::Domain { n, n_star }));
                }
                Ok(n_star)
            }
            (FitMethod::Method1, DefectClosure::SelfConsistent) => {
                let (delta, _) = solve_defect(n, coefficients, DEFECT_TOL).map_err(fail)?;
                Ok(n as f64 - delta)
            }
            _ => approx_effective_n(n, coefficients).map_err(fail),
        }
    }
}

impl ResidualModel for SeriesModel {
    fn n_params(&self) -> usize {
        self.n_params
    }
    fn n_data(&self) -> usize {
        self.ns.len()
    }
    fn weighted_residual(&self, params: &[f64], index: usize) -> Result<f64, EvalError> {
        let n_star = self.effective_n(params, index)?;
        let model_minus_datum = params[0] - self.rydberg / (n_star * n_star) + self.below_ref[index];
        Ok(model_minus_datum / self.sigmas[index])
    }
}

fn fit_series(
    data: &LevelDataset,
    method: FitMethod,
    order: usize,
    opts: &RitzFitOptions,
) -> Result<RitzFitResult, RitzError> {
    if !(1..=3).contains(&order) {
        return Err(RitzError::BadOrder(order));
    }
    let required = order + 2;
    if data.len() < required {
        return Err(RitzError::TooFewLevels {
            required,
            got: data.len(),
        });
    }
    let rydberg = opts.constants.rydberg();
    let e_ref = data.max_energy();
    let mut warnings = Vec::new();
    if method == FitMethod::Method3 {
        let low: Vec<u32> = data
            .levels()
            .iter()
            .map(|l| l.n)
            .filter(|&n| n < METHOD3_MIN_N)
            .collect();
        if !low.is_empty() {
            warnings.push(format!(
                "abridged series is only accurate for n >= {METHOD3_MIN_N}; dataset contains n = {low:?}"
            ));
        }
    }
    let model = SeriesModel {
        method,
        closure: opts.closure,
        n_params: order + 1,
        rydberg,
        ns: data.levels().iter().map(|l| l.n).collect(),
        below_ref: data.levels().iter().map(|l| e_ref - l.energy.value()).collect(),
        sigmas: data.levels().iter().map(|l| l.sigma.value()).collect(),
    };
    let n_max = data.max_n() as f64;
    let mut init = vec![0.0; order + 1];
    init[0] = rydberg / (n_max * n_max);
    init[1] = INITIAL_DELTA0;
    let mut report = lm_fit(&model, &init, &opts.solver)?;

    let e_ionisation = e_ref + report.params[0];
    report.params[0] = e_ionisation;
    let params = RitzParameters {
        e_ionisation: FrequencyMHz::new(e_ionisation).map_err(|_| RitzError::Unbound {
            energy: e_ref,
            e_ionisation,
        })?,
        method,
        coefficients: report.params[1..].to_vec(),
    };
    if !(e_ionisation > e_ref) {
        warnings.push(format!(
            "fitted ionisation energy {e_ionisation} MHz does not exceed the highest level {e_ref} MHz"
        ));
    }

    let internal: Vec<f64> = std::iter::once(e_ionisation - e_ref)
        .chain(params.coefficients.iter().copied())
        .collect();
    let mut per_level = Vec::with_capacity(data.len());
    for (i, level) in data.levels().iter().enumerate() {
        let e_measured = level.energy.value();
        let e_model = match (method, opts.closure) {
            (FitMethod::Method1, DefectClosure::Measured) => {
                let n_star = model.effective_n(&internal, i).map_err(|_| RitzError::Domain {
                    n: level.n,
                    n_star: f64::NAN,
                })?;
                energy_at(e_ionisation, n_star, rydberg)
            }
            _ => predict_level(&params, level.n, &opts.constants)?.value(),
        };
        let n_star = effective_n(level.energy, params.e_ionisation, &opts.constants).unwrap_or(f64::NAN);
        per_level.push(LevelResult {
            n: level.n,
            e_measured,
            e_model,
            residual: e_measured - e_model,
            effective_n: n_star,
            defect: level.n as f64 - n_star,
        });
    }

    Ok(RitzFitResult {
        coefficient_names: method.coefficient_names(order),
        closure: (method == FitMethod::Method1).then_some(opts.closure),
        params,
        report,
        per_level,
        warnings,
    })
}

/// Weighted fit of the full Ritz expansion with `order` defect coefficients.
pub fn fit_method1(data: &LevelDataset, order: usize, opts: &RitzFitOptions) -> Result<RitzFitResult, RitzError> {
    fit_series(data, FitMethod::Method1, order, opts)
}

/// Weighted fit of the `t ~ 1/(n - d0)^2` series with `order` coefficients.
pub fn fit_method2(data: &LevelDataset, order: usize, opts: &RitzFitOptions) -> Result<RitzFitResult, RitzError> {
    fit_series(data, FitMethod::Method2, order, opts)
}

/// Weighted fit of the abridged series `(E_i, d0, a)`.
pub fn fit_method3(data: &LevelDataset, opts: &RitzFitOptions) -> Result<RitzFitResult, RitzError> {
    fit_series(data, FitMethod::Method3, 2, opts)
}

pub fn fit(
    data: &LevelDataset,
    method: FitMethod,
    order: usize,
    opts: &RitzFitOptions,
) -> Result<RitzFitResult, RitzError> {
    if method == FitMethod::Method3 && order != 2 {
        return Err(RitzError::Method3Order(order));
    }
    fit_series(data, method, order, opts)
}

/// Levels predicted from `params` at each `(n, sigma)`, with seeded
/// Gaussian noise of standard deviation `noise_sd` MHz added to every
/// energy. The declared per-level sigma is kept as given.
pub fn synthetic_levels(
    params: &RitzParameters,
    levels: &[(u32, f64)],
    noise_sd: f64,
    seed: u64,
    constants: &PhysicalConstants,
) -> Result<LevelDataset, RitzError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = (noise_sd > 0.0).then(|| Normal::new(0.0, noise_sd).expect("positive sd"));
    let mut raw = Vec::with_capacity(levels.len());
    for &(n, sigma) in levels {
        let e = predict_level(params, n, constants)?.value();
        let noise = normal.as_ref().map_or(0.0, |d| d.sample(&mut rng));
        raw.push((n, e + noise, sigma));
    }
    Ok(validate_dataset(&raw)?)
}

/// Per-level plot table `n,E_meas_mhz,E_model_mhz,residual_mhz,effective_n,defect`.
pub fn write_per_level_csv<W: std::io::Write>(mut writer: W, result: &RitzFitResult) -> std::io::Result<()> {
    writeln!(writer, "n,E_meas_mhz,E_model_mhz,residual_mhz,effective_n,defect")?;
    for l in &result.per_level {
        writeln!(
            writer,
            "{},{:.4},{:.4},{:.4},{:.9},{:.9}",
            l.n, l.e_measured, l.e_model, l.residual, l.effective_n, l.defect
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub mean: f64,
    /// Sample (N - 1) standard deviation; zero for a single level.
    pub std: f64,
    pub max_abs: f64,
}

pub fn residual_stats(result: &RitzFitResult) -> ResidualStats {
    let r: Vec<f64> = result.per_level.iter().map(|l| l.residual).collect();
    let n = r.len() as f64;
    let mean = r.iter().sum::<f64>() / n;
    let var = if r.len() > 1 {
        r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    ResidualStats {
        mean,
        std: var.sqrt(),
        max_abs: r.iter().fold(0.0, |m, x| m.max(x.abs())),
    }
}
