//! Lineshape models and line-center extraction from laser scan traces.
//!
//! Two profiles are supported: a plain Lorentzian (direct detection, e.g. an
//! oscilloscope trace of the probe transmission) and the Wahlquist
//! first-harmonic profile of a Lorentzian under sinusoidal frequency
//! modulation, which is what a lock-in amplifier at the modulation
//! frequency returns.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optimize::{lm_fit, EvalError, FitReport, OptimizeError, ResidualModel, SolverOptions};
use crate::units::FrequencyMHz;

/// Modulation amplitude assumed when guessing Wahlquist parameters.
pub const DEFAULT_MOD_AMPLITUDE_MHZ: f64 = 15.0;

pub const MIN_TRACE_POINTS: usize = 8;

#[derive(Debug, Error)]
pub enum LineShapeError {
    #[error("scan trace needs at least {MIN_TRACE_POINTS} points, got {0}")]
    TooFewPoints(usize),
    #[error("scan frequencies must be strictly increasing (point {0})")]
    NotIncreasing(usize),
    #[error("non-finite value at point {0}")]
    NonFinite(usize),
    #[error("invalid lineshape parameters: {0}")]
    InvalidParams(String),
    #[error("Wahlquist profile undefined at {freq} MHz for {params:?}")]
    Evaluation { freq: f64, params: LineShapeParams },
    #[error("cannot guess initial parameters: {0}")]
    GuessFailed(String),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("missing column `{0}` in scan trace header")]
    MissingColumn(&'static str),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lorentzian,
    Wahlquist,
}

impl std::str::FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lorentzian" => Ok(Self::Lorentzian),
            "wahlquist" => Ok(Self::Wahlquist),
            other => Err(format!("unknown lineshape model `{other}`")),
        }
    }
}

/// One laser sweep: frequencies strictly increasing, at least eight points.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanTrace {
    points: Vec<(FrequencyMHz, f64)>,
}

impl ScanTrace {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, LineShapeError> {
        if points.len() < MIN_TRACE_POINTS {
            return Err(LineShapeError::TooFewPoints(points.len()));
        }
        let mut out = Vec::with_capacity(points.len());
        for (i, &(f, s)) in points.iter().enumerate() {
            let freq = FrequencyMHz::new(f).map_err(|_| LineShapeError::NonFinite(i))?;
            if !s.is_finite() {
                return Err(LineShapeError::NonFinite(i));
            }
            if i > 0 && f <= points[i - 1].0 {
                return Err(LineShapeError::NotIncreasing(i));
            }
            out.push((freq, s));
        }
        Ok(Self { points: out })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.0.value())
    }

    pub fn signals(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.1)
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().map(|p| (p.0.value(), p.1))
    }

    pub fn shifted(&self, delta: f64) -> Result<Self, LineShapeError> {
        Self::new(self.points().map(|(f, s)| (f + delta, s)).collect())
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, LineShapeError> {
        Self::new(self.points().map(|(f, s)| (f, s * factor)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineShapeParams {
    pub center: FrequencyMHz,
    /// Full width at half maximum of the underlying Lorentzian.
    pub fwhm: FrequencyMHz,
    /// Peak frequency excursion of the modulation; unused by the Lorentzian.
    pub mod_amplitude: FrequencyMHz,
    pub amplitude: f64,
    pub baseline: f64,
}

impl LineShapeParams {
    pub fn new(
        center: f64,
        fwhm: f64,
        mod_amplitude: f64,
        amplitude: f64,
        baseline: f64,
    ) -> Result<Self, LineShapeError> {
        let freq = |v: f64, what: &str| {
            FrequencyMHz::new(v).map_err(|_| LineShapeError::InvalidParams(format!("{what} is not finite")))
        };
        if !(fwhm > 0.0) {
            return Err(LineShapeError::InvalidParams(format!("fwhm must be > 0, got {fwhm}")));
        }
        if !(mod_amplitude >= 0.0) {
            return Err(LineShapeError::InvalidParams(format!(
                "modulation amplitude must be >= 0, got {mod_amplitude}"
            )));
        }
        if !(amplitude.is_finite() && baseline.is_finite()) {
            return Err(LineShapeError::InvalidParams("amplitude/baseline not finite".into()));
        }
        Ok(Self {
            center: freq(center, "center")?,
            fwhm: freq(fwhm, "fwhm")?,
            mod_amplitude: freq(mod_amplitude, "mod_amplitude")?,
            amplitude,
            baseline,
        })
    }
}

/// Unit-height Lorentzian at `detuning` from line center.
pub fn lorentzian_profile(detuning: f64, fwhm: f64) -> f64 {
    let hw2 = 0.25 * fwhm * fwhm;
    hw2 / (detuning * detuning + hw2)
}

pub fn lorentzian_eval(freq: FrequencyMHz, p: &LineShapeParams) -> f64 {
    let detuning = freq.value() - p.center.value();
    p.baseline + p.amplitude * lorentzian_profile(detuning, p.fwhm.value())
}

/// Wahlquist first-derivative profile (unit amplitude, zero baseline).
///
/// With `alpha = detuning / H_w`, `beta = fwhm / (2 H_w)`,
/// `gamma = 1 + alpha^2 + beta^2` and `u = gamma + s`,
/// `s = sqrt(gamma^2 - 4 alpha^2)`, the profile is
///
/// ```text
/// sign(alpha) (2 / H_w)^2 sqrt(2 gamma - u) / (2 sqrt(u - 2) (u - gamma))
/// ```
///
/// Evaluated in the algebraically equivalent form
/// `(2/H_w)^2 alpha / (sqrt(gamma + s) sqrt(u - 2) s)`, using
/// `2 gamma - u = 4 alpha^2 / (gamma + s)` and `u - 2 = 4 beta^2 / (s + w)`
/// with `w = 1 - alpha^2 - beta^2`, which avoids cancellation near line
/// center and makes the value there exactly zero.
pub fn wahlquist_profile(detuning: f64, fwhm: f64, mod_amplitude: f64) -> Option<f64> {
    let alpha = detuning / mod_amplitude;
    let beta = 0.5 * fwhm / mod_amplitude;
    let a2 = alpha * alpha;
    let b2 = beta * beta;
    let gamma = 1.0 + a2 + b2;
    // gamma^2 - 4 alpha^2 factored to stay non-negative.
    let s = (((1.0 - alpha).powi(2) + b2) * ((1.0 + alpha).powi(2) + b2)).sqrt();
    let w = 1.0 - a2 - b2;
    let u_minus_2 = if w > 0.0 { 4.0 * b2 / (s + w) } else { s - w };
    if !(u_minus_2 > 0.0) || !(s > 0.0) {
        return None;
    }
    let value = (2.0 / mod_amplitude).powi(2) * alpha / ((gamma + s).sqrt() * u_minus_2.sqrt() * s);
    value.is_finite().then_some(value)
}

pub fn wahlquist_eval(freq: FrequencyMHz, p: &LineShapeParams) -> Result<f64, LineShapeError> {
    let fail = || LineShapeError::Evaluation {
        freq: freq.value(),
        params: *p,
    };
    if !(p.fwhm.value() > 0.0 && p.mod_amplitude.value() > 0.0) {
        return Err(fail());
    }
    let detuning = freq.value() - p.center.value();
    let g = wahlquist_profile(detuning, p.fwhm.value(), p.mod_amplitude.value()).ok_or_else(fail)?;
    Ok(p.baseline + p.amplitude * g)
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    }
}

/// Peak-to-peak of the unit Wahlquist profile, found by dense sampling.
fn wahlquist_peak_to_peak(fwhm: f64, mod_amplitude: f64) -> f64 {
    let span = 4.0 * (fwhm + mod_amplitude);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in 0..=4000 {
        let x = -span + 2.0 * span * k as f64 / 4000.0;
        if let Some(v) = wahlquist_profile(x, fwhm, mod_amplitude) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    hi - lo
}

/// Heuristic starting point for a line fit.
pub fn auto_init_guess(trace: &ScanTrace, kind: ModelKind) -> Result<LineShapeParams, LineShapeError> {
    let f: Vec<f64> = trace.frequencies().collect();
    let s: Vec<f64> = trace.signals().collect();
    let baseline = median(&s);
    let (i_min, i_max) = s.iter().enumerate().fold((0, 0), |(lo, hi), (i, &v)| {
        (if v < s[lo] { i } else { lo }, if v > s[hi] { i } else { hi })
    });
    let spread = s[i_max] - s[i_min];
    let magnitude = s[i_max].abs().max(s[i_min].abs());
    if !(spread > 4.0 * f64::EPSILON * magnitude) || spread == 0.0 {
        return Err(LineShapeError::GuessFailed("trace has no feature (flat signal)".into()));
    }
    let span = f[f.len() - 1] - f[0];

    match kind {
        ModelKind::Lorentzian => {
            let k = if (s[i_max] - baseline).abs() >= (s[i_min] - baseline).abs() {
                i_max
            } else {
                i_min
            };
            let amplitude = s[k] - baseline;
            let rel = |i: usize| (s[i] - baseline) / amplitude;
            let crossing = |i: usize, j: usize| {
                // Linear interpolation of the half-maximum between samples i and j.
                let (ri, rj) = (rel(i), rel(j));
                f[i] + (0.5 - ri) * (f[j] - f[i]) / (rj - ri)
            };
            let left = (1..=k).rev().find(|&i| rel(i - 1) < 0.5).map(|i| crossing(i, i - 1));
            let right = (k..s.len() - 1).find(|&i| rel(i + 1) < 0.5).map(|i| crossing(i, i + 1));
            let fwhm = match (left, right) {
                (Some(l), Some(r)) => r - l,
                (Some(l), None) => 2.0 * (f[k] - l),
                (None, Some(r)) => 2.0 * (r - f[k]),
                (None, None) => span / 4.0,
            };
            LineShapeParams::new(f[k], fwhm.max(span / f.len() as f64), 0.0, amplitude, baseline)
        }
        ModelKind::Wahlquist => {
            let (lo, hi) = (i_min.min(i_max), i_min.max(i_max));
            let centered = |i: usize| s[i] - baseline;
            let zero = (lo..hi)
                .find(|&i| centered(i).signum() != centered(i + 1).signum() || centered(i + 1) == 0.0)
                .ok_or_else(|| LineShapeError::GuessFailed("no sign change between signal extrema".into()))?;
            let (a, b) = (centered(zero), centered(zero + 1));
            if a.signum() == b.signum() && b != 0.0 {
                return Err(LineShapeError::GuessFailed(
                    "no sign change between signal extrema".into(),
                ));
            }
            let center = f[zero] + a * (f[zero + 1] - f[zero]) / (a - b);
            let separation = (f[i_max] - f[i_min]).abs();
            // Extrema of a Lorentzian derivative sit fwhm / sqrt(3) apart.
            let fwhm = (3f64.sqrt() * separation).max(span / f.len() as f64);
            let mod_amplitude = DEFAULT_MOD_AMPLITUDE_MHZ;
            let sign = if f[i_max] > f[i_min] { 1.0 } else { -1.0 };
            let amplitude = sign * spread / wahlquist_peak_to_peak(fwhm, mod_amplitude);
            LineShapeParams::new(center, fwhm, mod_amplitude, amplitude, baseline)
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LineFitOptions {
    pub solver: SolverOptions,
    /// Hold the modulation amplitude at its initial value (Wahlquist only).
    pub pin_mod_amplitude: bool,
}

/// Unit-weight residuals of a line profile.
///
/// Frequencies are held relative to a reference close to the line, and the
/// first parameter is the center offset from that reference, so that the
/// fit never differences two numbers of order 1e8 MHz.
struct LineModel {
    kind: ModelKind,
    detunings: Vec<f64>,
    signals: Vec<f64>,
    pinned_mod: Option<f64>,
}

impl LineModel {
    fn profile(&self, params: &[f64], x: f64) -> Result<f64, EvalError> {
        let (offset, fwhm, amplitude, baseline) = (params[0], params[1], params[2], params[3]);
        if !(fwhm > 0.0) {
            return Err(EvalError(format!("fwhm {fwhm} <= 0")));
        }
        let shape = match self.kind {
            ModelKind::Lorentzian => lorentzian_profile(x - offset, fwhm),
            ModelKind::Wahlquist => {
                let modulation = self.pinned_mod.unwrap_or_else(|| params[4]);
                if !(modulation > 0.0) {
                    return Err(EvalError(format!("modulation amplitude {modulation} <= 0")));
                }
                wahlquist_profile(x - offset, fwhm, modulation)
                    .ok_or_else(|| EvalError(format!("Wahlquist profile undefined at detuning {x}")))?
            }
        };
        Ok(baseline + amplitude * shape)
    }
}

impl ResidualModel for LineModel {
    fn n_params(&self) -> usize {
        match (self.kind, self.pinned_mod) {
            (ModelKind::Wahlquist, None) => 5,
            _ => 4,
        }
    }
    fn n_data(&self) -> usize {
        self.detunings.len()
    }
    fn weighted_residual(&self, params: &[f64], index: usize) -> Result<f64, EvalError> {
        Ok(self.profile(params, self.detunings[index])? - self.signals[index])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineFit {
    pub kind: ModelKind,
    pub params: LineShapeParams,
    pub center_sigma: f64,
    pub fwhm_sigma: f64,
    pub amplitude_sigma: f64,
    pub baseline_sigma: f64,
    /// Zero when the modulation amplitude was pinned or unused.
    pub mod_amplitude_sigma: f64,
    /// Parameter order: center, fwhm, amplitude, baseline[, mod_amplitude].
    pub report: FitReport,
}

impl LineFit {
    pub fn model_value(&self, freq: f64) -> f64 {
        let f = FrequencyMHz::from_finite(freq);
        match self.kind {
            ModelKind::Lorentzian => lorentzian_eval(f, &self.params),
            ModelKind::Wahlquist => wahlquist_eval(f, &self.params).unwrap_or(f64::NAN),
        }
    }
}

/// Unit-weight least-squares fit of a line profile to a scan trace.
///
/// The returned center is the line-center estimate. A fit that did not
/// converge is still returned, with `report.converged == false`.
pub fn fit_line_center(
    trace: &ScanTrace,
    kind: ModelKind,
    init: Option<LineShapeParams>,
    opts: &LineFitOptions,
) -> Result<LineFit, LineShapeError> {
    let init = match init {
        Some(p) => p,
        None => auto_init_guess(trace, kind)?,
    };
    if kind == ModelKind::Wahlquist && !(init.mod_amplitude.value() > 0.0) {
        return Err(LineShapeError::InvalidParams(
            "Wahlquist fit needs a positive modulation amplitude".into(),
        ));
    }
    let reference = init.center.value();
    let pinned_mod = (kind == ModelKind::Wahlquist && opts.pin_mod_amplitude).then_some(init.mod_amplitude.value());
    let model = LineModel {
        kind,
        detunings: trace.frequencies().map(|f| f - reference).collect(),
        signals: trace.signals().collect(),
        pinned_mod,
    };
    let mut start = vec![0.0, init.fwhm.value(), init.amplitude, init.baseline];
    if model.n_params() == 5 {
        start.push(init.mod_amplitude.value());
    }
    let report = lm_fit(&model, &start, &opts.solver)?;
    let p = &report.params;
    let sig = &report.sigmas;
    let mod_amplitude = match kind {
        ModelKind::Lorentzian => 0.0,
        ModelKind::Wahlquist => pinned_mod.unwrap_or_else(|| p[4]),
    };
    let params = LineShapeParams::new(reference + p[0], p[1].abs(), mod_amplitude.abs(), p[2], p[3])?;
    Ok(LineFit {
        kind,
        params,
        center_sigma: sig[0],
        fwhm_sigma: sig[1],
        amplitude_sigma: sig[2],
        baseline_sigma: sig[3],
        mod_amplitude_sigma: sig.get(4).copied().unwrap_or(0.0),
        report,
    })
}

/// Evenly spaced synthetic trace with additive seeded Gaussian noise whose
/// standard deviation is `noise_rel` times the largest excursion of the
/// noiseless profile from its baseline.
pub fn synthetic_trace(
    kind: ModelKind,
    params: &LineShapeParams,
    start: f64,
    stop: f64,
    n_points: usize,
    noise_rel: f64,
    seed: u64,
) -> Result<ScanTrace, LineShapeError> {
    let step = (stop - start) / (n_points.max(2) - 1) as f64;
    let center = params.center.value();
    let clean: Vec<(f64, f64)> = (0..n_points)
        .map(|i| {
            let f = start + step * i as f64;
            let x = f - center;
            let shape = match kind {
                ModelKind::Lorentzian => lorentzian_profile(x, params.fwhm.value()),
                ModelKind::Wahlquist => {
                    wahlquist_profile(x, params.fwhm.value(), params.mod_amplitude.value()).unwrap_or(0.0)
                }
            };
            (f, params.amplitude * shape)
        })
        .collect();
    let peak = clean.iter().fold(0.0f64, |m, p| m.max(p.1.abs()));
    let sd = noise_rel * peak;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = if sd > 0.0 {
        let normal = Normal::new(0.0, sd).expect("positive standard deviation");
        clean
            .into_iter()
            .map(|(f, v)| (f, params.baseline + v + normal.sample(&mut rng)))
            .collect()
    } else {
        clean.into_iter().map(|(f, v)| (f, params.baseline + v)).collect()
    };
    ScanTrace::new(points)
}

/// Reads a `freq_mhz,signal` trace.
pub fn read_scan_trace<R: Read>(reader: R) -> Result<ScanTrace, LineShapeError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let f_col = headers
        .iter()
        .position(|h| h == "freq_mhz")
        .ok_or(LineShapeError::MissingColumn("freq_mhz"))?;
    let s_col = headers
        .iter()
        .position(|h| h == "signal")
        .ok_or(LineShapeError::MissingColumn("signal"))?;
    let mut points = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let parse = |i: usize, what: &str| -> Result<f64, LineShapeError> {
            let text = record.get(i).unwrap_or("");
            text.parse().map_err(|_| LineShapeError::Parse {
                line,
                message: format!("bad {what} `{text}`"),
            })
        };
        points.push((parse(f_col, "frequency")?, parse(s_col, "signal")?));
    }
    ScanTrace::new(points)
}

pub fn write_scan_trace<W: Write>(mut writer: W, trace: &ScanTrace) -> std::io::Result<()> {
    writeln!(writer, "freq_mhz,signal")?;
    for (f, s) in trace.points() {
        writeln!(writer, "{f:.4},{s:.6e}")?;
    }
    Ok(())
}

/// Plot-ready `freq_mhz,signal,model` columns.
pub fn write_fit_plot<W: Write>(mut writer: W, trace: &ScanTrace, fit: &LineFit) -> std::io::Result<()> {
    writeln!(writer, "freq_mhz,signal,model")?;
    for (f, s) in trace.points() {
        writeln!(writer, "{f:.4},{s:.6e},{:.6e}", fit.model_value(f))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(center: f64, fwhm: f64, modulation: f64) -> LineShapeParams {
        LineShapeParams::new(center, fwhm, modulation, 1.0, 0.25).unwrap()
    }

    fn f(v: f64) -> FrequencyMHz {
        FrequencyMHz::new(v).unwrap()
    }

    #[test]
    fn lorentzian_peak_and_half_maximum() {
        let p = params(100.0, 20.0, 0.0);
        assert_eq!(lorentzian_eval(f(100.0), &p), 1.25);
        assert!((lorentzian_eval(f(110.0), &p) - 0.75).abs() < 1e-15);
        assert!((lorentzian_eval(f(90.0), &p) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn wahlquist_matches_literal_formula() {
        // Direct transcription, valid away from line center.
        let literal = |x: f64, h: f64, w: f64| {
            let a = x / w;
            let b = 0.5 * h / w;
            let g = 1.0 + b * b + a * a;
            let u = g + (g * g - 4.0 * a * a).sqrt();
            x.signum() * (2.0 / w).powi(2) * (2.0 * g - u).sqrt() / (2.0 * (u - 2.0).sqrt() * (u - g))
        };
        for &(x, h, w) in &[
            (5.0, 20.0, 15.0),
            (-12.0, 20.0, 15.0),
            (40.0, 20.0, 15.0),
            (3.0, 5.0, 30.0),
        ] {
            let stable = wahlquist_profile(x, h, w).unwrap();
            assert!((stable - literal(x, h, w)).abs() <= 1e-12 * stable.abs());
        }
    }

    #[test]
    fn wahlquist_center_is_baseline() {
        let p = params(236_429_214.0, 20.0, 15.0);
        assert_eq!(wahlquist_eval(p.center, &p).unwrap(), p.baseline);
    }

    #[test]
    fn wahlquist_rejects_zero_modulation() {
        let p = params(0.0, 20.0, 0.0);
        assert!(matches!(
            wahlquist_eval(f(3.0), &p),
            Err(LineShapeError::Evaluation { .. })
        ));
    }

    #[test]
    fn trace_validation() {
        assert!(matches!(
            ScanTrace::new(vec![(0.0, 0.0); 3]),
            Err(LineShapeError::TooFewPoints(3))
        ));
        let mut pts: Vec<_> = (0..10).map(|i| (i as f64, 0.0)).collect();
        pts[5].0 = 4.0;
        assert!(matches!(ScanTrace::new(pts), Err(LineShapeError::NotIncreasing(5))));
        let mut pts: Vec<_> = (0..10).map(|i| (i as f64, 0.0)).collect();
        pts[2].1 = f64::NAN;
        assert!(matches!(ScanTrace::new(pts), Err(LineShapeError::NonFinite(2))));
    }

    #[test]
    fn flat_trace_guess_fails() {
        let trace = ScanTrace::new((0..50).map(|i| (i as f64, 0.3)).collect()).unwrap();
        for kind in [ModelKind::Lorentzian, ModelKind::Wahlquist] {
            assert!(matches!(
                auto_init_guess(&trace, kind),
                Err(LineShapeError::GuessFailed(_))
            ));
        }
    }

    #[test]
    fn lorentzian_guess_within_ten_percent() {
        let truth = LineShapeParams::new(500.0, 20.0, 0.0, -2.0, 1.0).unwrap();
        let trace = synthetic_trace(ModelKind::Lorentzian, &truth, 400.0, 600.0, 401, 0.0, 0).unwrap();
        let guess = auto_init_guess(&trace, ModelKind::Lorentzian).unwrap();
        assert!((guess.fwhm.value() - 20.0).abs() < 2.0);
        assert!((guess.center.value() - 500.0).abs() < 0.5);
        assert!(guess.amplitude < 0.0);
    }

    #[test]
    fn wahlquist_guess_center_within_quarter_width() {
        let truth = LineShapeParams::new(1000.0, 20.0, 15.0, 3.0, 0.1).unwrap();
        let trace = synthetic_trace(ModelKind::Wahlquist, &truth, 920.0, 1080.0, 321, 0.03, 11).unwrap();
        let guess = auto_init_guess(&trace, ModelKind::Wahlquist).unwrap();
        assert!((guess.center.value() - 1000.0).abs() < 20.0 / 4.0);
        assert!(guess.amplitude > 0.0);
    }

    #[test]
    fn lorentzian_fit_recovers_noise_free_params() {
        let truth = LineShapeParams::new(250.0, 20.0, 0.0, 1.5, 0.2).unwrap();
        let trace = synthetic_trace(ModelKind::Lorentzian, &truth, 200.0, 300.0, 28, 0.0, 0).unwrap();
        let init = LineShapeParams::new(253.0, 26.0, 0.0, 1.2, 0.1).unwrap();
        let fit = fit_line_center(&trace, ModelKind::Lorentzian, Some(init), &LineFitOptions::default()).unwrap();
        assert!(fit.report.converged);
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        assert!(rel(fit.params.center.value(), 250.0) < 1e-8);
        assert!(rel(fit.params.fwhm.value(), 20.0) < 1e-8);
        assert!(rel(fit.params.amplitude, 1.5) < 1e-8);
        assert!(rel(fit.params.baseline, 0.2) < 1e-8);
    }

    #[test]
    fn pinned_modulation_is_held() {
        let truth = LineShapeParams::new(0.0, 20.0, 15.0, 1.0, 0.0).unwrap();
        let trace = synthetic_trace(ModelKind::Wahlquist, &truth, -80.0, 80.0, 161, 0.01, 3).unwrap();
        let opts = LineFitOptions {
            pin_mod_amplitude: true,
            ..Default::default()
        };
        let fit = fit_line_center(&trace, ModelKind::Wahlquist, None, &opts).unwrap();
        assert_eq!(fit.report.params.len(), 4);
        assert_eq!(fit.params.mod_amplitude.value(), DEFAULT_MOD_AMPLITUDE_MHZ);
        assert!(fit.params.center.value().abs() < 0.5);
    }

    #[test]
    fn trace_csv_reports_line() {
        let text = "freq_mhz,signal\n1,0\n2,0\n3,x\n";
        match read_scan_trace(text.as_bytes()) {
            Err(LineShapeError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn wahlquist_antisymmetric(
            x in 0.0f64..200.0,
            fwhm in 1.0f64..60.0,
            modulation in 0.5f64..40.0,
            amplitude in -5.0f64..5.0,
        ) {
            let p = LineShapeParams::new(0.0, fwhm, modulation, amplitude, 0.7).unwrap();
            let c = p.center.value();
            let plus = wahlquist_eval(f(c + x), &p).unwrap();
            let minus = wahlquist_eval(f(c - x), &p).unwrap();
            prop_assert!((plus + minus - 2.0 * p.baseline).abs() <= 1e-12 * amplitude.abs().max(1e-300) + 1e-15);
        }

        #[test]
        fn models_translation_invariant(shift in -1.0e8f64..1.0e8, x in -100.0f64..100.0) {
            let p = params(236_429_214.0, 20.0, 15.0);
            let mut q = p;
            q.center = f(p.center.value() + shift);
            let fp = p.center.value() + x;
            let fq = q.center.value() + x;
            // Detunings agree up to the rounding of the shifted abscissa.
            let tol = 1e-6;
            prop_assert!((lorentzian_eval(f(fp), &p) - lorentzian_eval(f(fq), &q)).abs() < tol);
            prop_assert!((wahlquist_eval(f(fp), &p).unwrap() - wahlquist_eval(f(fq), &q).unwrap()).abs() < tol);
        }
    }
}
