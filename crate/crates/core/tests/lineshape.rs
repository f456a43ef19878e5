use rydfit::lineshape::{
    fit_line_center, lorentzian_profile, synthetic_trace, LineFitOptions, LineShapeParams, ModelKind,
};

const CENTER: f64 = 236_429_214.0;

fn fm_truth() -> LineShapeParams {
    LineShapeParams::new(CENTER, 20.0, 15.0, 1.0, 0.05).unwrap()
}

fn fm_trace(seed: u64) -> rydfit::lineshape::ScanTrace {
    synthetic_trace(
        ModelKind::Wahlquist,
        &fm_truth(),
        CENTER - 60.0,
        CENTER + 60.0,
        241,
        0.03,
        seed,
    )
    .unwrap()
}

#[test]
fn wahlquist_center_recovered_at_absolute_frequency() {
    for seed in 0..5 {
        let fit = fit_line_center(&fm_trace(seed), ModelKind::Wahlquist, None, &LineFitOptions::default()).unwrap();
        assert!(fit.report.converged);
        let err = (fit.params.center.value() - CENTER).abs();
        assert!(err < 0.5, "seed {seed}: center off by {err} MHz");
    }
}

#[test]
fn center_shift_equivariance() {
    let trace = fm_trace(1);
    let opts = LineFitOptions::default();
    let a = fit_line_center(&trace, ModelKind::Wahlquist, None, &opts).unwrap();
    let b = fit_line_center(&trace.shifted(10.0).unwrap(), ModelKind::Wahlquist, None, &opts).unwrap();
    let moved = b.params.center.value() - a.params.center.value();
    assert!((moved - 10.0).abs() < 1e-6, "moved {moved}");
}

#[test]
fn signal_scaling_leaves_center() {
    let trace = fm_trace(2);
    let opts = LineFitOptions::default();
    let a = fit_line_center(&trace, ModelKind::Wahlquist, None, &opts).unwrap();
    let b = fit_line_center(&trace.scaled(7.5).unwrap(), ModelKind::Wahlquist, None, &opts).unwrap();
    assert!((a.params.center.value() - b.params.center.value()).abs() < 1e-6);
    assert!((b.params.amplitude / a.params.amplitude - 7.5).abs() < 1e-6);
}

#[test]
fn small_modulation_fit_gives_lorentzian_width() {
    // A noiseless Lorentzian derivative, fitted with the Wahlquist model.
    let fwhm = 20.0;
    let step = 1e-4;
    let points: Vec<(f64, f64)> = (0..=400)
        .map(|k| {
            let x = -80.0 + 0.4 * k as f64;
            let d = (lorentzian_profile(x + step, fwhm) - lorentzian_profile(x - step, fwhm)) / (2.0 * step);
            (x, -d)
        })
        .collect();
    let trace = rydfit::lineshape::ScanTrace::new(points).unwrap();
    let init = LineShapeParams::new(0.5, 18.0, 0.2, 40.0, 0.0).unwrap();
    let opts = LineFitOptions {
        pin_mod_amplitude: true,
        ..LineFitOptions::default()
    };
    let fit = fit_line_center(&trace, ModelKind::Wahlquist, Some(init), &opts).unwrap();
    let rel = (fit.params.fwhm.value() - fwhm).abs() / fwhm;
    assert!(rel < 0.02, "fwhm {}", fit.params.fwhm.value());
    assert!(fit.params.center.value().abs() < 1e-3);
}

#[test]
fn lorentzian_fast_scan_width() {
    let truth = LineShapeParams::new(CENTER, 20.0, 0.0, 1.0, 0.02).unwrap();
    let trace = synthetic_trace(
        ModelKind::Lorentzian,
        &truth,
        CENTER - 100.0,
        CENTER + 100.0,
        10_000,
        0.05,
        5,
    )
    .unwrap();
    let fit = fit_line_center(&trace, ModelKind::Lorentzian, None, &LineFitOptions::default()).unwrap();
    assert!((fit.params.fwhm.value() - 20.0).abs() / 20.0 < 0.02);
    assert!((fit.params.center.value() - CENTER).abs() < 0.5);
}

#[test]
fn fit_chi2_never_increases() {
    let fit = fit_line_center(&fm_trace(3), ModelKind::Wahlquist, None, &LineFitOptions::default()).unwrap();
    assert!(fit.report.chi2_history.windows(2).all(|w| w[1] <= w[0]));
}
