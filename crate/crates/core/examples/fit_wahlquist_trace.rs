//! Fit the FM-derivative (Wahlquist) lineshape to a lock-in scan and print
//! the line center.
//!
//! ```text
//! cargo run --example fit_wahlquist_trace [trace.csv]
//! ```

use std::error::Error;
use std::fs::File;

use rydfit::lineshape::{fit_line_center, read_scan_trace, LineFitOptions, ModelKind};

fn main() -> Result<(), Box<dyn Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/trace_33f_fm.csv").to_string());
    let trace = read_scan_trace(File::open(&path)?)?;

    // Free modulation amplitude, then pinned at the nominal 15 MHz.
    for pin in [false, true] {
        let opts = LineFitOptions {
            pin_mod_amplitude: pin,
            ..Default::default()
        };
        let fit = fit_line_center(&trace, ModelKind::Wahlquist, None, &opts)?;
        println!(
            "pin_mod={pin:<5} center {:.3} +- {:.3} MHz  fwhm {:.2} MHz  H_w {:.2} MHz  reduced chi2 {:.3e}",
            fit.params.center.value(),
            fit.center_sigma,
            fit.params.fwhm.value(),
            fit.params.mod_amplitude.value(),
            fit.report.reduced_chi2,
        );
    }
    Ok(())
}
