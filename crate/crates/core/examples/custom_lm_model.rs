//! Any weighted least-squares problem can use the Levenberg-Marquardt
//! solver by implementing `ResidualModel`. Here: an exponential decay
//! `y = A exp(-t / tau)` with known per-point sigma.
//!
//! ```text
//! cargo run --example custom_lm_model
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rydfit::optimize::{lm_fit, EvalError, OptimizeError, ResidualModel, SolverOptions};

struct Decay {
    t: Vec<f64>,
    y: Vec<f64>,
    sigma: f64,
}

impl ResidualModel for Decay {
    fn n_params(&self) -> usize {
        2
    }
    fn n_data(&self) -> usize {
        self.t.len()
    }
    fn weighted_residual(&self, p: &[f64], i: usize) -> Result<f64, EvalError> {
        if p[1] <= 0.0 {
            return Err(EvalError(format!("tau must be positive, got {}", p[1])));
        }
        Ok((self.y[i] - p[0] * (-self.t[i] / p[1]).exp()) / self.sigma)
    }
}

fn main() -> Result<(), OptimizeError> {
    let (amp, tau, sigma) = (3.0, 1.7, 0.05);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise = Normal::new(0.0, sigma).unwrap();
    let t: Vec<f64> = (0..60).map(|i| i as f64 * 0.1).collect();
    let y = t
        .iter()
        .map(|&t| amp * (-t / tau).exp() + noise.sample(&mut rng))
        .collect();
    let model = Decay { t, y, sigma };

    let opts = SolverOptions {
        scale_by_reduced_chi2: false,
        ..Default::default()
    };
    let report = lm_fit(&model, &[1.0, 0.5], &opts)?;
    println!(
        "converged {} after {} iterations",
        report.converged, report.n_iterations
    );
    println!("A   = {:.4} +- {:.4} (true {amp})", report.params[0], report.sigmas[0]);
    println!("tau = {:.4} +- {:.4} (true {tau})", report.params[1], report.sigmas[1]);
    println!("chi2/dof = {:.3}", report.reduced_chi2);
    println!("chi2 per accepted step: {:?}", report.chi2_history);
    Ok(())
}
