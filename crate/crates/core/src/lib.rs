//! Data reduction for absolute Rydberg level spectroscopy: lineshape fits
//! to laser scans, error budgets, and Rydberg-Ritz quantum-defect series
//! fits with level prediction.
//!
//! | module | purpose |
//! |---|---|
//! | [`units`] | MHz newtype, Rydberg constant, ground-state offset |
//! | [`levels`] | measured level tables |
//! | [`optimize`] | Levenberg-Marquardt with covariance |
//! | [`lineshape`] | Lorentzian and FM-derivative (Wahlquist) line fits |
//! | [`ritz`] | series formulas, defect solver, three fit methods |
//! | [`analysis`] | error budgets, scan averaging, third-step conversion |
//! | [`config`], [`cli`] | the `rydfit` command line |

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod levels;
pub mod lineshape;
pub mod optimize;
pub mod ritz;
pub mod units;
