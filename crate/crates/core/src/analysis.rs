//! Measurement bookkeeping: scan-set aggregation, conversion of third-step
//! frequencies to total level energies, and error-budget quadrature.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::{FrequencyMHz, PhysicalConstants};

/// Default rounding step for a reported total error.
pub const TOTAL_ERROR_ROUNDING_MHZ: f64 = 0.1;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("error budget is empty")]
    EmptyBudget,
    #[error("error component `{label}` must be finite and >= 0, got {value}")]
    NegativeComponent { label: String, value: f64 },
    #[error("duplicate error component `{0}`")]
    DuplicateLabel(String),
    #[error("scan set for n={n} has {count} centers; at least 2 are needed")]
    TooFewScans { n: u32, count: usize },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("missing column `{0}` in header")]
    MissingColumn(&'static str),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorComponent {
    pub label: String,
    pub value: FrequencyMHz,
}

/// Independent error contributions, combined in quadrature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    components: Vec<ErrorComponent>,
}

impl ErrorBudget {
    pub fn new<S: Into<String>>(components: impl IntoIterator<Item = (S, f64)>) -> Result<Self, AnalysisError> {
        let mut out: Vec<ErrorComponent> = Vec::new();
        for (label, value) in components {
            let label = label.into();
            if !(value.is_finite() && value >= 0.0) {
                return Err(AnalysisError::NegativeComponent { label, value });
            }
            if out.iter().any(|c| c.label == label) {
                return Err(AnalysisError::DuplicateLabel(label));
            }
            out.push(ErrorComponent {
                label,
                value: FrequencyMHz::from_finite(value),
            });
        }
        if out.is_empty() {
            return Err(AnalysisError::EmptyBudget);
        }
        Ok(Self { components: out })
    }

    pub fn components(&self) -> &[ErrorComponent] {
        &self.components
    }

    /// Unrounded root-sum-of-squares.
    pub fn quadrature_sum(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.value.value().powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Quadrature total of `budget`, rounded half-up to a multiple of `round_to`.
pub fn total_error(budget: &ErrorBudget, round_to: f64) -> FrequencyMHz {
    FrequencyMHz::from_finite(round_half_up(budget.quadrature_sum(), round_to))
}

pub fn round_half_up(x: f64, step: f64) -> f64 {
    if step > 0.0 {
        (x / step + 0.5).floor() * step
    } else {
        x
    }
}

pub fn third_step_to_total(nu3: FrequencyMHz, constants: &PhysicalConstants) -> FrequencyMHz {
    nu3 + constants.ground_offset
}

pub fn total_to_third_step(total: FrequencyMHz, constants: &PhysicalConstants) -> FrequencyMHz {
    total - constants.ground_offset
}

/// Fitted line centers of repeated scans over one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSet {
    pub n: u32,
    pub centers: Vec<FrequencyMHz>,
}

impl ScanSet {
    pub fn new(n: u32, centers: &[f64]) -> Result<Self, AnalysisError> {
        let centers = centers
            .iter()
            .map(|&c| {
                FrequencyMHz::new(c).map_err(|_| AnalysisError::Parse {
                    line: 0,
                    message: format!("non-finite center for n={n}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { n, centers })
    }
}

/// Mean and sample (N - 1) standard deviation of the centers.
pub fn aggregate_scan_set(set: &ScanSet) -> Result<(FrequencyMHz, FrequencyMHz), AnalysisError> {
    let count = set.centers.len();
    if count < 2 {
        return Err(AnalysisError::TooFewScans { n: set.n, count });
    }
    // Accumulate deviations from the first center; absolute values are ~1e8.
    let origin = set.centers[0].value();
    let dev: Vec<f64> = set.centers.iter().map(|c| c.value() - origin).collect();
    let mean_dev = dev.iter().sum::<f64>() / count as f64;
    let var = dev.iter().map(|d| (d - mean_dev).powi(2)).sum::<f64>() / (count - 1) as f64;
    Ok((
        FrequencyMHz::from_finite(origin + mean_dev),
        FrequencyMHz::from_finite(var.sqrt()),
    ))
}

/// Reads a `label,value_mhz` budget file.
pub fn read_budget<R: Read>(reader: R) -> Result<ErrorBudget, AnalysisError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let l_col = headers
        .iter()
        .position(|h| h == "label")
        .ok_or(AnalysisError::MissingColumn("label"))?;
    let v_col = headers
        .iter()
        .position(|h| h == "value_mhz")
        .ok_or(AnalysisError::MissingColumn("value_mhz"))?;
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let text = record.get(v_col).unwrap_or("");
        let value: f64 = text.parse().map_err(|_| AnalysisError::Parse {
            line,
            message: format!("bad value `{text}`"),
        })?;
        rows.push((record.get(l_col).unwrap_or("").to_string(), value));
    }
    ErrorBudget::new(rows)
}

/// Reads an `n,center_mhz` file into scan sets ordered by `n`.
pub fn read_scan_sets<R: Read>(reader: R) -> Result<Vec<ScanSet>, AnalysisError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let n_col = headers
        .iter()
        .position(|h| h == "n")
        .ok_or(AnalysisError::MissingColumn("n"))?;
    let c_col = headers
        .iter()
        .position(|h| h == "center_mhz")
        .ok_or(AnalysisError::MissingColumn("center_mhz"))?;
    let mut groups: BTreeMap<u32, Vec<FrequencyMHz>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let err = |message: String| AnalysisError::Parse { line, message };
        let n_text = record.get(n_col).unwrap_or("");
        let n: u32 = n_text.parse().map_err(|_| err(format!("bad n `{n_text}`")))?;
        let c_text = record.get(c_col).unwrap_or("");
        let center = c_text
            .parse::<f64>()
            .ok()
            .and_then(|c| FrequencyMHz::new(c).ok())
            .ok_or_else(|| err(format!("bad center `{c_text}`")))?;
        groups.entry(n).or_default().push(center);
    }
    Ok(groups.into_iter().map(|(n, centers)| ScanSet { n, centers }).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn f(v: f64) -> FrequencyMHz {
        FrequencyMHz::new(v).unwrap()
    }

    #[test]
    fn third_step_conversion() {
        let c = PhysicalConstants::default();
        let e = third_step_to_total(f(236_429_214.0), &c).value();
        assert!((e - 1_007_000_763.6).abs() < 1e-6);
        assert_eq!(e.round(), 1_007_000_764.0);
        let e = third_step_to_total(f(239_124_074.0), &c).value();
        assert_eq!(e.round(), 1_009_695_624.0);
        assert_eq!(third_step_to_total(f(0.0), &c).value(), 770_571_549.6);
    }

    #[test]
    fn budget_totals() {
        let b = ErrorBudget::new([
            ("wavemeter calibration", 6.2),
            ("first step frequency", 0.75),
            ("second step frequency", 1.0),
            ("pressure shifts", 2.7),
            ("power shifts", 4.0),
        ])
        .unwrap();
        assert!((b.quadrature_sum() - 7.956).abs() < 5e-4);
        assert_eq!(total_error(&b, 0.1).value(), 8.0);
        assert_eq!(
            total_error(&ErrorBudget::new([("only", 2.5)]).unwrap(), 0.1).value(),
            2.5
        );
        assert_eq!(
            total_error(&ErrorBudget::new([("a", 3.0), ("b", 4.0)]).unwrap(), 0.1).value(),
            5.0
        );
    }

    #[test]
    fn budget_validation() {
        assert!(matches!(
            ErrorBudget::new(Vec::<(String, f64)>::new()),
            Err(AnalysisError::EmptyBudget)
        ));
        assert!(matches!(
            ErrorBudget::new([("a", -1.0)]),
            Err(AnalysisError::NegativeComponent { .. })
        ));
        assert!(matches!(
            ErrorBudget::new([("a", 1.0), ("a", 2.0)]),
            Err(AnalysisError::DuplicateLabel(_))
        ));
    }

    #[test]
    fn scan_set_statistics() {
        let x = 236_429_214.0;
        let s = ScanSet::new(33, &[x; 10]).unwrap();
        let (mean, std) = aggregate_scan_set(&s).unwrap();
        assert_eq!(mean.value(), x);
        assert_eq!(std.value(), 0.0);

        let s = ScanSet::new(33, &[x - 1.0, x + 1.0]).unwrap();
        let (mean, std) = aggregate_scan_set(&s).unwrap();
        assert_eq!(mean.value(), x);
        assert!((std.value() - 2f64.sqrt()).abs() < 1e-12);

        let s = ScanSet::new(33, &[x]).unwrap();
        assert!(matches!(
            aggregate_scan_set(&s),
            Err(AnalysisError::TooFewScans { n: 33, count: 1 })
        ));
    }

    #[test]
    fn ten_scan_std_within_chi_square_band() {
        // For N = 10 and sigma = 2 MHz, the 0.5% and 99.5% points of the
        // sample std are 2 * sqrt(chi2_9 / 9) = 0.88 and 3.24 MHz.
        let normal = Normal::new(0.0, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let trials = 400;
        let inside = (0..trials)
            .filter(|_| {
                let centers: Vec<f64> = (0..10).map(|_| 236_429_214.0 + normal.sample(&mut rng)).collect();
                let (_, std) = aggregate_scan_set(&ScanSet::new(33, &centers).unwrap()).unwrap();
                (0.9..=3.7).contains(&std.value())
            })
            .count();
        assert!(inside as f64 / trials as f64 >= 0.97, "{inside}/{trials}");
    }

    #[test]
    fn scan_set_file_grouped() {
        let text = "n,center_mhz\n34,2\n33,1\n34,4\n33,3\n";
        let sets = read_scan_sets(text.as_bytes()).unwrap();
        assert_eq!(sets.len(), 2);
        assert_eq!(sets[0].n, 33);
        assert_eq!(sets[1].centers.len(), 2);
        assert!(matches!(
            read_scan_sets("n,center_mhz\n33,abc\n".as_bytes()),
            Err(AnalysisError::Parse { line: 2, .. })
        ));
    }

    proptest! {
        #[test]
        fn quadrature_bounds_and_symmetry(values in proptest::collection::vec(0.0f64..50.0, 1..8)) {
            let labeled: Vec<_> = values.iter().enumerate().map(|(i, v)| (format!("c{i}"), *v)).collect();
            let b = ErrorBudget::new(labeled.clone()).unwrap();
            let total = b.quadrature_sum();
            let max = values.iter().cloned().fold(0.0, f64::max);
            let sum: f64 = values.iter().sum();
            prop_assert!(total >= max * (1.0 - 1e-12));
            prop_assert!(total <= sum * (1.0 + 1e-12) + 1e-300);
            let mut reversed = labeled;
            reversed.reverse();
            let r = ErrorBudget::new(reversed).unwrap().quadrature_sum();
            prop_assert!((r - total).abs() <= 1e-12 * total.max(1e-300));
        }

        #[test]
        fn conversion_invertible(nu3 in 1.0e8f64..3.0e8) {
            let c = PhysicalConstants::default();
            let back = total_to_third_step(third_step_to_total(f(nu3), &c), &c).value();
            prop_assert!((back - nu3).abs() <= 1e-7);
        }
    }
}
