//! Regenerates the synthetic fixtures shipped in `data/`:
//!
//! * `trace_33f_fm.csv` – FM (Wahlquist) trace of the n=33 third step,
//!   center 236 429 214 MHz, FWHM 20 MHz, modulation 15 MHz, 3% noise;
//! * `trace_33f_fast.csv` – direct-absorption (Lorentzian) fast scan, FWHM 20 MHz, 5% noise;
//! * `scan_sets.csv` – ten line centers per level, 2 MHz scatter, shifted
//!   so each set's mean is exactly the tabulated third-step frequency.
//!
//! ```text
//! cargo run --example synthetic_fixtures
//! ```

use std::error::Error;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rydfit::lineshape::{synthetic_trace, write_scan_trace, LineShapeParams, ModelKind};

const CENTER_33: f64 = 236_429_214.0;
const SCANS_PER_LEVEL: usize = 10;
const SCAN_SCATTER_MHZ: f64 = 2.0;

fn main() -> Result<(), Box<dyn Error>> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");

    let fm = LineShapeParams::new(CENTER_33, 20.0, 15.0, 1.0, 0.05)?;
    let trace = synthetic_trace(
        ModelKind::Wahlquist,
        &fm,
        CENTER_33 - 60.0,
        CENTER_33 + 60.0,
        241,
        0.03,
        33,
    )?;
    write_scan_trace(BufWriter::new(File::create(data.join("trace_33f_fm.csv"))?), &trace)?;

    let fast = LineShapeParams::new(CENTER_33, 20.0, 0.0, 1.0, 0.02)?;
    // 10 000-sample oscilloscope record over +-5 FWHM.
    let trace = synthetic_trace(
        ModelKind::Lorentzian,
        &fast,
        CENTER_33 - 100.0,
        CENTER_33 + 100.0,
        10_000,
        0.05,
        34,
    )?;
    write_scan_trace(BufWriter::new(File::create(data.join("trace_33f_fast.csv"))?), &trace)?;

    let mut rdr = csv::Reader::from_path(data.join("f_third_step.csv"))?;
    let mut out = BufWriter::new(File::create(data.join("scan_sets.csv"))?);
    writeln!(out, "n,center_mhz")?;
    let mut rng = ChaCha8Rng::seed_from_u64(2012);
    let normal = Normal::new(0.0, SCAN_SCATTER_MHZ)?;
    for record in rdr.records() {
        let record = record?;
        let n: u32 = record[0].parse()?;
        let nu3: f64 = record[1].parse()?;
        let offsets: Vec<f64> = (0..SCANS_PER_LEVEL).map(|_| normal.sample(&mut rng)).collect();
        let mean = offsets.iter().sum::<f64>() / offsets.len() as f64;
        for d in offsets {
            writeln!(out, "{n},{:.4}", nu3 + d - mean)?;
        }
    }
    out.flush()?;
    println!("fixtures written to {}", data.display());
    Ok(())
}
