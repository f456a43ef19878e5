//! Quadrature total of an uncertainty budget.
//!
//! ```text
//! cargo run --example error_budget [budget.csv]
//! ```

use std::error::Error;
use std::fs::File;

use rydfit::analysis::{read_budget, total_error, TOTAL_ERROR_ROUNDING_MHZ};

fn main() -> Result<(), Box<dyn Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/error_budget.csv").to_string());
    let budget = read_budget(File::open(&path)?)?;
    for c in budget.components() {
        println!("{:<24} {:>6.2} MHz", c.label, c.value.value());
    }
    println!("{:<24} {:>6.3} MHz", "quadrature sum", budget.quadrature_sum());
    println!(
        "{:<24} {:>6.1} MHz",
        "total (rounded)",
        total_error(&budget, TOTAL_ERROR_ROUNDING_MHZ).value()
    );
    Ok(())
}
