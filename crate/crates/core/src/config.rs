//! `key=value` pipeline configuration.
//!
//! ```text
//! # comments and blank lines are ignored
//! rydberg_rb85_mhz = 3289820706.19
//! ground_offset_mhz = 770571549.6
//! default_sigma_mhz = 8.0
//! method = 3
//! order = 2
//! scale_by_reduced_chi2 = true
//! closure = measured
//! output_dir = out
//! ```

use std::path::PathBuf;

use thiserror::Error;

use crate::ritz::{DefectClosure, FitMethod};
use crate::units::{FrequencyMHz, PhysicalConstants, DEFAULT_LEVEL_SIGMA_MHZ};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value `{value}` for `{key}`")]
    BadValue { line: usize, key: String, value: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub constants: PhysicalConstants,
    pub default_sigma: f64,
    pub method: FitMethod,
    /// `None` means the method's default order.
    pub order: Option<usize>,
    pub scale_by_reduced_chi2: bool,
    pub closure: DefectClosure,
    pub output_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            constants: PhysicalConstants::default(),
            default_sigma: DEFAULT_LEVEL_SIGMA_MHZ,
            method: FitMethod::Method3,
            order: None,
            scale_by_reduced_chi2: true,
            closure: DefectClosure::Measured,
            output_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || ConfigError::BadValue {
                line,
                key: key.to_string(),
                value: value.to_string(),
            };
            let positive = |v: &str| -> Result<f64, ConfigError> {
                v.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite() && *x > 0.0)
                    .ok_or_else(bad)
            };
            match key {
                "rydberg_rb85_mhz" => {
                    cfg.constants.rydberg_rb85 = FrequencyMHz::new(positive(value)?).map_err(|_| bad())?
                }
                "ground_offset_mhz" => {
                    let v: f64 = value.parse().map_err(|_| bad())?;
                    cfg.constants.ground_offset = FrequencyMHz::new(v).map_err(|_| bad())?;
                }
                "default_sigma_mhz" => cfg.default_sigma = positive(value)?,
                "method" => {
                    cfg.method = value
                        .trim_start_matches("method")
                        .parse::<u8>()
                        .ok()
                        .and_then(FitMethod::from_number)
                        .ok_or_else(bad)?
                }
                "order" => cfg.order = Some(value.parse().map_err(|_| bad())?),
                "scale_by_reduced_chi2" => cfg.scale_by_reduced_chi2 = value.parse().map_err(|_| bad())?,
                "closure" => cfg.closure = value.parse().map_err(|_| bad())?,
                "output_dir" => cfg.output_dir = Some(PathBuf::from(value)),
                _ => {
                    return Err(ConfigError::UnknownKey {
                        line,
                        key: key.to_string(),
                    })
                }
            }
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_keys() {
        let cfg = PipelineConfig::parse(
            "# test\nrydberg_rb85_mhz = 3289820706.2\nground_offset_mhz=770571549.6\n\
             default_sigma_mhz = 5\nmethod = 1\norder = 2\nscale_by_reduced_chi2 = false\n\
             closure = self-consistent\noutput_dir = out # trailing\n",
        )
        .unwrap();
        assert_eq!(cfg.constants.rydberg(), 3_289_820_706.2);
        assert_eq!(cfg.default_sigma, 5.0);
        assert_eq!(cfg.method, FitMethod::Method1);
        assert_eq!(cfg.order, Some(2));
        assert!(!cfg.scale_by_reduced_chi2);
        assert_eq!(cfg.closure, DefectClosure::SelfConsistent);
        assert_eq!(cfg.output_dir, Some(PathBuf::from("out")));
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert_eq!(
            PipelineConfig::parse("colour = blue").unwrap_err(),
            ConfigError::UnknownKey {
                line: 1,
                key: "colour".into()
            }
        );
        assert_eq!(
            PipelineConfig::parse("\nmethod 3").unwrap_err(),
            ConfigError::Syntax { line: 2 }
        );
        assert!(matches!(
            PipelineConfig::parse("method = 4"),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(matches!(
            PipelineConfig::parse("default_sigma_mhz = -1"),
            Err(ConfigError::BadValue { .. })
        ));
    }
}
