//! Lorentzian fit to a direct-detection fast scan across a third-step line.
//!
//! ```text
//! cargo run --example fit_lorentzian_fast_scan [trace.csv]
//! ```

use std::error::Error;
use std::fs::File;

use rydfit::lineshape::{fit_line_center, read_scan_trace, write_fit_plot, LineFitOptions, ModelKind};

fn main() -> Result<(), Box<dyn Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/trace_33f_fast.csv").to_string());
    let trace = read_scan_trace(File::open(&path)?)?;
    let fit = fit_line_center(&trace, ModelKind::Lorentzian, None, &LineFitOptions::default())?;

    println!("points     {}", trace.len());
    println!(
        "center     {:.3} +- {:.3} MHz",
        fit.params.center.value(),
        fit.center_sigma
    );
    println!("fwhm       {:.3} +- {:.3} MHz", fit.params.fwhm.value(), fit.fwhm_sigma);
    println!("amplitude  {:.4}", fit.params.amplitude);
    println!("iterations {}", fit.report.n_iterations);

    let plot = std::env::temp_dir().join("fast_scan_fit.csv");
    write_fit_plot(File::create(&plot)?, &trace, &fit)?;
    println!("plot data  {}", plot.display());
    Ok(())
}
