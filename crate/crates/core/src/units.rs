//! Frequency newtype and the physical constants shared by every fit.
//!
//! Everything in this crate is expressed in megahertz: line centers, level
//! energies, uncertainties and the Rydberg constant alike.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Speed of light in vacuum (m/s), exact SI value.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Rydberg constant for 85Rb in m^-1.
pub const RYDBERG_RB85_PER_M: f64 = 10_973_660.672_249;

/// R_Rb * c in MHz, precomputed from the two constants above.
pub const RYDBERG_RB85_MHZ: f64 = RYDBERG_RB85_PER_M * SPEED_OF_LIGHT * 1e-6;

/// Offset added to a third-step frequency to reference it to the 5S1/2
/// hyperfine centre of mass.
pub const GROUND_OFFSET_MHZ: f64 = 770_571_549.6;

/// Total accumulated error of a single level measurement.
pub const DEFAULT_LEVEL_SIGMA_MHZ: f64 = 8.0;

#[derive(Debug, Error, PartialEq)]
#[error("frequency value {0} is not finite")]
pub struct NonFiniteFrequency(pub f64);

/// A frequency (or energy expressed as a frequency) in MHz.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FrequencyMHz(f64);

impl FrequencyMHz {
    pub fn new(value: f64) -> Result<Self, NonFiniteFrequency> {
        if value.is_finite() {
            Ok(Self(value))
        } else {
            Err(NonFiniteFrequency(value))
        }
    }

    /// Caller guarantees `value` is finite.
    pub(crate) const fn from_finite(value: f64) -> Self {
        Self(value)
    }

    pub const fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for FrequencyMHz {
    type Error = NonFiniteFrequency;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<FrequencyMHz> for f64 {
    fn from(f: FrequencyMHz) -> f64 {
        f.0
    }
}

impl fmt::Display for FrequencyMHz {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} MHz", self.0)
    }
}

impl Add for FrequencyMHz {
    type Output = FrequencyMHz;
    fn add(self, rhs: Self) -> Self {
        FrequencyMHz(self.0 + rhs.0)
    }
}

impl Sub for FrequencyMHz {
    type Output = FrequencyMHz;
    fn sub(self, rhs: Self) -> Self {
        FrequencyMHz(self.0 - rhs.0)
    }
}

impl Neg for FrequencyMHz {
    type Output = FrequencyMHz;
    fn neg(self) -> Self {
        FrequencyMHz(-self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// R_Rb * c.
    pub rydberg_rb85: FrequencyMHz,
    /// 5S1/2 centre of mass to the start of the third excitation step.
    pub ground_offset: FrequencyMHz,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            rydberg_rb85: FrequencyMHz::from_finite(RYDBERG_RB85_MHZ),
            ground_offset: FrequencyMHz::from_finite(GROUND_OFFSET_MHZ),
        }
    }
}

impl PhysicalConstants {
    pub fn rydberg(&self) -> f64 {
        self.rydberg_rb85.value()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_constants() {
        let c = PhysicalConstants::default();
        // 10 973 660.672 249 m^-1 * 299 792 458 m/s = 3 289 820 706.19 MHz
        assert!((c.rydberg() - 3_289_820_706.2).abs() < 0.1);
        assert_eq!(c.ground_offset.value(), 770_571_549.6);
    }

    #[test]
    fn rejects_nan() {
        assert!(FrequencyMHz::new(f64::NAN).is_err());
        assert!(FrequencyMHz::new(f64::INFINITY).is_err());
        assert!(serde_json::from_str::<FrequencyMHz>("1e400").is_err());
    }

    #[test]
    fn arithmetic() {
        let a = FrequencyMHz::new(10.0).unwrap();
        let b = FrequencyMHz::new(2.5).unwrap();
        assert_eq!((a + b).value(), 12.5);
        assert_eq!((a - b).value(), 7.5);
        assert_eq!((-a).value(), -10.0);
    }
}
