//! Average repeated third-step line centers per level and convert them to
//! absolute level energies, with the budget total as the per-level sigma.
//!
//! ```text
//! cargo run --example reduce_scan_sets
//! ```

use std::error::Error;
use std::fs::File;

use rydfit::analysis::{
    aggregate_scan_set, read_budget, read_scan_sets, third_step_to_total, total_error, TOTAL_ERROR_ROUNDING_MHZ,
};
use rydfit::units::PhysicalConstants;

fn main() -> Result<(), Box<dyn Error>> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let sets = read_scan_sets(File::open(format!("{dir}/scan_sets.csv"))?)?;
    let budget = read_budget(File::open(format!("{dir}/error_budget.csv"))?)?;
    let sigma = total_error(&budget, TOTAL_ERROR_ROUNDING_MHZ);
    let consts = PhysicalConstants::default();

    println!(
        "{:>4} {:>6} {:>16} {:>8} {:>16} {:>6}",
        "n", "scans", "nu3 MHz", "std", "E_n MHz", "sigma"
    );
    for set in &sets {
        let (mean, std) = aggregate_scan_set(set)?;
        let e = third_step_to_total(mean, &consts);
        println!(
            "{:>4} {:>6} {:>16.1} {:>8.2} {:>16.1} {:>6.1}",
            set.n,
            set.centers.len(),
            mean.value(),
            std.value(),
            e.value(),
            sigma.value()
        );
    }
    Ok(())
}
