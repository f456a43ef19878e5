//! Fit the measured F-series with all three defect parameterisations and
//! both Method-1 closures.
//!
//! ```text
//! cargo run --example fit_series_methods
//! ```

use std::error::Error;
use std::fs::File;

use rydfit::levels::read_level_table;
use rydfit::ritz::{fit, residual_stats, DefectClosure, FitMethod, RitzFitOptions, RitzFitResult};
use rydfit::units::DEFAULT_LEVEL_SIGMA_MHZ;

fn show(label: &str, r: &RitzFitResult) {
    let coeffs: Vec<String> = r
        .coefficient_names
        .iter()
        .zip(&r.params.coefficients)
        .zip(r.coefficient_sigmas())
        .map(|((name, v), s)| format!("{name} = {v:.6} +- {s:.1e}"))
        .collect();
    let stats = residual_stats(r);
    println!(
        "{label:<24} E_i = {:.3} +- {:.3} MHz  {}  chi2 {:.3}  resid std {:.2} MHz",
        r.e_ionisation(),
        r.e_ionisation_sigma(),
        coeffs.join(", "),
        r.report.chi2,
        stats.std
    );
}

fn main() -> Result<(), Box<dyn Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/f_levels.csv");
    let data = read_level_table(File::open(path)?, DEFAULT_LEVEL_SIGMA_MHZ)?;
    let opts = RitzFitOptions::default();

    show("method 3", &fit(&data, FitMethod::Method3, 2, &opts)?);
    for order in [2, 3] {
        show(
            &format!("method 2, order {order}"),
            &fit(&data, FitMethod::Method2, order, &opts)?,
        );
        for closure in [DefectClosure::Measured, DefectClosure::SelfConsistent] {
            let o = RitzFitOptions { closure, ..opts };
            show(
                &format!("method 1, order {order}, {closure:?}"),
                &fit(&data, FitMethod::Method1, order, &o)?,
            );
        }
    }
    Ok(())
}
