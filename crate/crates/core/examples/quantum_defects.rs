//! Quantum defects and effective quantum numbers: the self-consistent
//! Ritz defect for given coefficients, and the defect implied by each
//! measured level for a given ionisation energy.
//!
//! ```text
//! cargo run --example quantum_defects
//! ```

use std::error::Error;
use std::fs::File;

use rydfit::levels::read_level_table;
use rydfit::ritz::{effective_n, solve_defect, DEFECT_TOL};
use rydfit::units::{FrequencyMHz, PhysicalConstants, DEFAULT_LEVEL_SIGMA_MHZ};

fn main() -> Result<(), Box<dyn Error>> {
    let consts = PhysicalConstants::default();
    let ritz = [0.016473, -0.0783, 0.028];
    println!("self-consistent defect for d = {ritz:?}");
    for n in [4, 5, 8, 20, 33, 100] {
        let (delta, t) = solve_defect(n, &ritz, DEFECT_TOL)?;
        println!("  n={n:<4} delta {delta:.9}  t = 1/n*^2 = {t:.6e}");
    }

    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/f_levels.csv");
    let data = read_level_table(File::open(path)?, DEFAULT_LEVEL_SIGMA_MHZ)?;
    let e_i = FrequencyMHz::new(1_010_024_717.0)?;
    println!("measured defects for E_i = {e_i}");
    for l in data.levels() {
        let n_star = effective_n(l.energy, e_i, &consts)?;
        println!("  n={:<4} n* {:.5}  delta {:.5}", l.n, n_star, l.n as f64 - n_star);
    }
    Ok(())
}
