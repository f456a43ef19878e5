//! Predict unmeasured levels from a series fit, and check a hold-out: fit
//! n <= 80 only and compare the predictions for the higher levels with
//! their measured values.
//!
//! ```text
//! cargo run --example predict_levels
//! ```

use std::error::Error;
use std::fs::File;

use rydfit::levels::read_level_table;
use rydfit::ritz::{fit_method3, predict_level, RitzFitOptions};
use rydfit::units::DEFAULT_LEVEL_SIGMA_MHZ;

fn main() -> Result<(), Box<dyn Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/f_levels.csv");
    let data = read_level_table(File::open(path)?, DEFAULT_LEVEL_SIGMA_MHZ)?;
    let opts = RitzFitOptions::default();

    let full = fit_method3(&data, &opts)?;
    println!("levels above the measured range (all levels fitted):");
    for n in [105, 110, 120, 150, 200] {
        let e = predict_level(&full.params, n, &opts.constants)?;
        println!(
            "  n={n:<4} E = {:.1} MHz  (E_i - E = {:.1} MHz)",
            e.value(),
            full.e_ionisation() - e.value()
        );
    }

    let train = data.filter(|l| l.n <= 80).ok_or("no training levels")?;
    let held = fit_method3(&train, &opts)?;
    println!("hold-out (fit n <= 80):");
    for l in data.levels().iter().filter(|l| l.n > 80) {
        let e = predict_level(&held.params, l.n, &opts.constants)?;
        println!(
            "  n={:<4} measured {:.1}  predicted {:.1}  diff {:+.2} MHz",
            l.n,
            l.energy.value(),
            e.value(),
            l.energy.value() - e.value()
        );
    }
    Ok(())
}
