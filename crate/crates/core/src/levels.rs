//! Measured level energies and the `n,energy_mhz,sigma_mhz` level table.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::FrequencyMHz;

/// Decimal places kept when a level table is written out.
pub const LEVEL_TABLE_DECIMALS: usize = 3;

#[derive(Debug, Error)]
pub enum LevelError {
    #[error("level list is empty")]
    Empty,
    #[error("duplicate principal quantum number n={0}")]
    DuplicateN(u32),
    #[error("level n={n}: sigma must be positive and finite, got {sigma}")]
    BadSigma { n: u32, sigma: f64 },
    #[error("level n={n}: energy must be positive and finite, got {energy}")]
    BadEnergy { n: u32, energy: f64 },
    #[error("principal quantum number must be >= 1")]
    BadN,
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("missing column `{0}` in level table header")]
    MissingColumn(&'static str),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasuredLevel {
    pub n: u32,
    pub energy: FrequencyMHz,
    pub sigma: FrequencyMHz,
}

impl MeasuredLevel {
    pub fn new(n: u32, energy: f64, sigma: f64) -> Result<Self, LevelError> {
        if n < 1 {
            return Err(LevelError::BadN);
        }
        if !(energy.is_finite() && energy > 0.0) {
            return Err(LevelError::BadEnergy { n, energy });
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(LevelError::BadSigma { n, sigma });
        }
        Ok(Self {
            n,
            energy: FrequencyMHz::from_finite(energy),
            sigma: FrequencyMHz::from_finite(sigma),
        })
    }
}

/// Non-empty set of levels with strictly increasing `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelDataset {
    levels: Vec<MeasuredLevel>,
}

impl LevelDataset {
    pub fn levels(&self) -> &[MeasuredLevel] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn max_energy(&self) -> f64 {
        self.levels
            .iter()
            .map(|l| l.energy.value())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_n(&self) -> u32 {
        self.levels.last().map(|l| l.n).unwrap_or(0)
    }

    /// Levels satisfying `keep`, or `None` when nothing survives.
    pub fn filter(&self, keep: impl Fn(&MeasuredLevel) -> bool) -> Option<LevelDataset> {
        let levels: Vec<_> = self.levels.iter().copied().filter(|l| keep(l)).collect();
        (!levels.is_empty()).then_some(LevelDataset { levels })
    }

    /// Union of two datasets; overlapping `n` is rejected.
    pub fn merge(&self, other: &LevelDataset) -> Result<LevelDataset, LevelError> {
        let mut all = self.levels.clone();
        all.extend_from_slice(&other.levels);
        from_levels(all)
    }

    /// Same levels with every energy shifted by `delta` MHz.
    pub fn shifted(&self, delta: f64) -> Result<LevelDataset, LevelError> {
        let levels = self
            .levels
            .iter()
            .map(|l| MeasuredLevel::new(l.n, l.energy.value() + delta, l.sigma.value()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(LevelDataset { levels })
    }
}

/// Builds a dataset from raw `(n, energy, sigma)` triples, sorting by `n`.
pub fn validate_dataset(raw: &[(u32, f64, f64)]) -> Result<LevelDataset, LevelError> {
    let levels = raw
        .iter()
        .map(|&(n, e, s)| MeasuredLevel::new(n, e, s))
        .collect::<Result<Vec<_>, _>>()?;
    from_levels(levels)
}

fn from_levels(mut levels: Vec<MeasuredLevel>) -> Result<LevelDataset, LevelError> {
    if levels.is_empty() {
        return Err(LevelError::Empty);
    }
    levels.sort_by_key(|l| l.n);
    if let Some(w) = levels.windows(2).find(|w| w[0].n == w[1].n) {
        return Err(LevelError::DuplicateN(w[0].n));
    }
    Ok(LevelDataset { levels })
}

/// Parses a level table. The `sigma_mhz` column is optional; missing or
/// blank entries take `default_sigma`.
pub fn read_level_table<R: Read>(reader: R, default_sigma: f64) -> Result<LevelDataset, LevelError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &'static str| headers.iter().position(|h| h == name);
    let n_col = col("n").ok_or(LevelError::MissingColumn("n"))?;
    let e_col = col("energy_mhz").ok_or(LevelError::MissingColumn("energy_mhz"))?;
    let s_col = col("sigma_mhz");

    let mut raw = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| record.get(i).unwrap_or("");
        let parse_err = |message: String| LevelError::Parse { line, message };
        let n: u32 = field(n_col)
            .parse()
            .map_err(|_| parse_err(format!("bad n `{}`", field(n_col))))?;
        let e: f64 = field(e_col)
            .parse()
            .map_err(|_| parse_err(format!("bad energy `{}`", field(e_col))))?;
        let s = match s_col.map(field) {
            None | Some("") => default_sigma,
            Some(text) => text.parse().map_err(|_| parse_err(format!("bad sigma `{text}`")))?,
        };
        raw.push((n, e, s));
    }
    validate_dataset(&raw)
}

pub fn write_level_table<W: Write>(mut writer: W, data: &LevelDataset) -> Result<(), LevelError> {
    writeln!(writer, "n,energy_mhz,sigma_mhz")?;
    for l in data.levels() {
        writeln!(
            writer,
            "{},{},{}",
            l.n,
            format_decimal(l.energy.value(), LEVEL_TABLE_DECIMALS),
            format_decimal(l.sigma.value(), LEVEL_TABLE_DECIMALS)
        )?;
    }
    Ok(())
}

/// Fixed-point formatting with at most `max_decimals` places, trailing
/// zeros trimmed but always at least one decimal (`8.0`, `0.75`).
pub fn format_decimal(x: f64, max_decimals: usize) -> String {
    let mut s = format!("{x:.max_decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.push('0');
        }
    } else {
        s.push_str(".0");
    }
    s
}
