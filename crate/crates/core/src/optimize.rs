//! Weighted nonlinear least squares by Levenberg-Marquardt.
//!
//! Models expose weighted residuals `(model - datum) / sigma`; the solver
//! minimises their sum of squares using central-difference Jacobians and
//! reports a covariance estimate at the optimum.
//!
//! Parameters are normalised internally by `max(|init|, 1)` so that fits
//! mixing quantities of very different magnitude (an ionisation energy and
//! a quantum defect, say) still produce well-conditioned normal equations.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A model failed to evaluate at a parameter vector (outside its domain).
#[derive(Debug, Clone, Error, PartialEq)]
#[error("{0}")]
pub struct EvalError(pub String);

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("expected {expected} initial parameters, got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error("{n_data} data points cannot constrain {n_params} parameters")]
    TooFewData { n_data: usize, n_params: usize },
    #[error("residual {index} is not finite at parameters {params:?}")]
    NonFiniteResidual { index: usize, params: Vec<f64> },
    #[error("model cannot be evaluated at the initial parameters: {0}")]
    InitialEvaluation(EvalError),
    #[error("Jacobian evaluation failed at parameters {params:?}: {source}")]
    Jacobian { params: Vec<f64>, source: EvalError },
    #[error("parameter {index} is not constrained by the data (rank-deficient Jacobian)")]
    RankDeficient { index: usize },
    #[error("degrees of freedom must be at least 1")]
    NoDegreesOfFreedom,
}

/// Maps a parameter vector to weighted residuals, one per data point.
pub trait ResidualModel {
    fn n_params(&self) -> usize;
    fn n_data(&self) -> usize;

    /// `(model - datum) / sigma` for data point `index`.
    fn weighted_residual(&self, params: &[f64], index: usize) -> Result<f64, EvalError>;

    fn residuals(&self, params: &[f64]) -> Result<Vec<f64>, EvalError> {
        (0..self.n_data()).map(|i| self.weighted_residual(params, i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub param_tol: f64,
    pub chi2_tol: f64,
    pub initial_damping: f64,
    pub jacobian_step_rel: f64,
    /// Multiply the covariance by chi2/dof.
    pub scale_by_reduced_chi2: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            param_tol: 1e-10,
            chi2_tol: 1e-12,
            initial_damping: 1e-3,
            jacobian_step_rel: 1e-6,
            scale_by_reduced_chi2: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub params: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub chi2: f64,
    pub reduced_chi2: f64,
    pub dof: usize,
    /// Weighted residuals at the final parameters.
    pub residuals: Vec<f64>,
    pub n_iterations: usize,
    pub converged: bool,
    /// chi2 of every accepted iterate, starting with the initial point.
    pub chi2_history: Vec<f64>,
    /// Parameters whose Jacobian column used the absolute fallback step.
    pub jacobian_fallback: Vec<bool>,
    pub message: Option<String>,
}

impl FitReport {
    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let n = self.covariance.len();
        DMatrix::from_fn(n, n, |i, j| self.covariance[i][j])
    }
}

#[derive(Debug, Clone)]
pub struct Jacobian {
    /// Entry (i, j) is d residual_i / d param_j.
    pub matrix: DMatrix<f64>,
    pub fallback: Vec<bool>,
}

/// Central-difference Jacobian with step `|p_j| * step_rel`. When that
/// step would fall below machine precision the absolute step `step_rel`
/// is used instead and the column is flagged.
pub fn numeric_jacobian<M: ResidualModel + ?Sized>(
    model: &M,
    params: &[f64],
    step_rel: f64,
) -> Result<Jacobian, OptimizeError> {
    let mut fallback = vec![false; params.len()];
    let steps: Vec<f64> = params
        .iter()
        .zip(fallback.iter_mut())
        .map(|(&p, flag)| {
            let h = p.abs() * step_rel;
            if h < f64::EPSILON {
                *flag = true;
                step_rel
            } else {
                h
            }
        })
        .collect();
    let matrix = central_differences(model, params, &steps)?;
    Ok(Jacobian { matrix, fallback })
}

fn central_differences<M: ResidualModel + ?Sized>(
    model: &M,
    params: &[f64],
    steps: &[f64],
) -> Result<DMatrix<f64>, OptimizeError> {
    let m = model.n_data();
    let mut jac = DMatrix::zeros(m, params.len());
    let mut probe = params.to_vec();
    let fail = |source| OptimizeError::Jacobian {
        params: params.to_vec(),
        source,
    };
    for (j, &h) in steps.iter().enumerate() {
        probe[j] = params[j] + h;
        let plus = model.residuals(&probe);
        probe[j] = params[j] - h;
        let minus = model.residuals(&probe);
        probe[j] = params[j];
        // One-sided differences near a domain boundary.
        let column: Vec<f64> = match (plus, minus) {
            (Ok(p), Ok(mi)) => p.iter().zip(&mi).map(|(a, b)| (a - b) / (2.0 * h)).collect(),
            (Ok(p), Err(_)) => {
                let c = model.residuals(params).map_err(fail)?;
                p.iter().zip(&c).map(|(a, b)| (a - b) / h).collect()
            }
            (Err(_), Ok(mi)) => {
                let c = model.residuals(params).map_err(fail)?;
                c.iter().zip(&mi).map(|(a, b)| (a - b) / h).collect()
            }
            (Err(e), Err(_)) => return Err(fail(e)),
        };
        for (i, v) in column.into_iter().enumerate() {
            jac[(i, j)] = v;
        }
    }
    Ok(jac)
}

/// Relative singular-value threshold below which a direction counts as
/// unconstrained.
const RANK_TOL: f64 = 1.5e-8;

/// Parameter covariance `(J^T J)^-1` of a weighted Jacobian, optionally
/// scaled by `chi2 / dof`, and the matching 1-sigma uncertainties.
pub fn covariance_and_sigmas(
    jacobian: &DMatrix<f64>,
    chi2: f64,
    dof: usize,
    scale_by_reduced_chi2: bool,
) -> Result<(DMatrix<f64>, DVector<f64>), OptimizeError> {
    let (cov, deficient) = covariance_inner(jacobian, chi2, dof, scale_by_reduced_chi2)?;
    match deficient {
        Some(index) => Err(OptimizeError::RankDeficient { index }),
        None => {
            let sig = sigmas_of(&cov);
            Ok((cov, sig))
        }
    }
}

fn sigmas_of(cov: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(cov.nrows(), (0..cov.nrows()).map(|i| cov[(i, i)].max(0.0).sqrt()))
}

/// Returns the (pseudo-inverse) covariance and, if the Jacobian is
/// rank-deficient, the index of the least constrained parameter.
fn covariance_inner(
    jacobian: &DMatrix<f64>,
    chi2: f64,
    dof: usize,
    scale_by_reduced_chi2: bool,
) -> Result<(DMatrix<f64>, Option<usize>), OptimizeError> {
    if dof < 1 {
        return Err(OptimizeError::NoDegreesOfFreedom);
    }
    let n = jacobian.ncols();
    // Column equilibration makes the rank test independent of units.
    let norms: Vec<f64> = (0..n).map(|j| jacobian.column(j).norm()).collect();
    let mut deficient = norms.iter().position(|&c| !(c > 0.0) || !c.is_finite());
    let safe: Vec<f64> = norms
        .iter()
        .map(|&c| if c > 0.0 && c.is_finite() { c } else { 1.0 })
        .collect();
    let mut normalized = jacobian.clone();
    for (j, &c) in safe.iter().enumerate() {
        normalized.column_mut(j).scale_mut(1.0 / c);
    }
    let svd = normalized.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let s_max = svd.singular_values.max();
    let mut inner = DMatrix::zeros(n, n);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        let row = v_t.row(k);
        if s <= s_max * RANK_TOL {
            if deficient.is_none() {
                deficient = (0..n).max_by(|&a, &b| row[a].abs().total_cmp(&row[b].abs()));
            }
            continue;
        }
        inner += row.transpose() * row / (s * s);
    }
    let factor = if scale_by_reduced_chi2 { chi2 / dof as f64 } else { 1.0 };
    let cov = DMatrix::from_fn(n, n, |i, j| {
        let a = inner[(i, j)] / (safe[i] * safe[j]);
        let b = inner[(j, i)] / (safe[i] * safe[j]);
        0.5 * (a + b) * factor
    });
    Ok((cov, deficient))
}

/// Evaluates a model in normalised coordinates `q = p / scale`.
struct Scaled<'a, M: ?Sized> {
    model: &'a M,
    scale: &'a [f64],
}

impl<M: ResidualModel + ?Sized> Scaled<'_, M> {
    fn physical(&self, q: &[f64]) -> Vec<f64> {
        q.iter().zip(self.scale).map(|(a, s)| a * s).collect()
    }
}

impl<M: ResidualModel + ?Sized> ResidualModel for Scaled<'_, M> {
    fn n_params(&self) -> usize {
        self.model.n_params()
    }
    fn n_data(&self) -> usize {
        self.model.n_data()
    }
    fn weighted_residual(&self, q: &[f64], index: usize) -> Result<f64, EvalError> {
        self.model.weighted_residual(&self.physical(q), index)
    }
    fn residuals(&self, q: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.model.residuals(&self.physical(q))
    }
}

fn chi2_of(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

fn checked_residuals<M: ResidualModel + ?Sized>(
    model: &Scaled<'_, M>,
    q: &[f64],
) -> Result<Result<Vec<f64>, EvalError>, OptimizeError> {
    match model.residuals(q) {
        Ok(r) => {
            if let Some(index) = r.iter().position(|x| !x.is_finite()) {
                return Err(OptimizeError::NonFiniteResidual {
                    index,
                    params: model.physical(q),
                });
            }
            Ok(Ok(r))
        }
        Err(e) => Ok(Err(e)),
    }
}

const MAX_DAMPING: f64 = 1e16;

/// Fits `model` starting from `init`.
///
/// Accepted steps never increase chi2; a rejected step multiplies the
/// damping by 10 and an accepted one divides it by 10. The fit is reported
/// as converged once a step changes the normalised parameters by less than
/// `param_tol` or lowers chi2 by less than `chi2_tol` (relative).
pub fn lm_fit<M: ResidualModel + ?Sized>(
    model: &M,
    init: &[f64],
    opts: &SolverOptions,
) -> Result<FitReport, OptimizeError> {
    let n_params = model.n_params();
    let n_data = model.n_data();
    if init.len() != n_params {
        return Err(OptimizeError::ParamCount {
            expected: n_params,
            got: init.len(),
        });
    }
    if n_data < n_params || n_params == 0 {
        return Err(OptimizeError::TooFewData { n_data, n_params });
    }

    let scale: Vec<f64> = init.iter().map(|p| p.abs().max(1.0)).collect();
    let scaled = Scaled { model, scale: &scale };
    let mut q: Vec<f64> = init.iter().zip(&scale).map(|(p, s)| p / s).collect();
    let mut r = checked_residuals(&scaled, &q)?.map_err(OptimizeError::InitialEvaluation)?;
    let mut chi2 = chi2_of(&r);
    let mut history = vec![chi2];
    let mut damping = opts.initial_damping;
    let mut converged = chi2 == 0.0;
    let mut message = None;
    let mut iterations = 0;

    let step_of = |q: &[f64]| -> Vec<f64> { q.iter().map(|v| opts.jacobian_step_rel * v.abs().max(1.0)).collect() };

    'outer: while !converged && iterations < opts.max_iterations {
        iterations += 1;
        let jac = central_differences(&scaled, &q, &step_of(&q))?;
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * DVector::from_column_slice(&r);
        let diag_floor = jtj.diagonal().max() * 1e-15;

        loop {
            let mut lhs = jtj.clone();
            for j in 0..n_params {
                lhs[(j, j)] += damping * jtj[(j, j)].max(diag_floor);
            }
            let step = match lhs.cholesky() {
                Some(ch) => -ch.solve(&grad),
                None => {
                    damping *= 10.0;
                    if damping > MAX_DAMPING {
                        message = Some("damping exhausted: normal equations singular".into());
                        break 'outer;
                    }
                    continue;
                }
            };
            let q_norm = q.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let small_step = step.amax() <= opts.param_tol * (q_norm + opts.param_tol);
            let trial: Vec<f64> = q.iter().zip(step.iter()).map(|(a, d)| a + d).collect();
            match checked_residuals(&scaled, &trial)? {
                Ok(r_new) if chi2_of(&r_new) <= chi2 => {
                    let chi2_new = chi2_of(&r_new);
                    let small_drop = chi2 - chi2_new <= opts.chi2_tol * chi2;
                    q = trial;
                    r = r_new;
                    chi2 = chi2_new;
                    history.push(chi2);
                    damping = (damping / 10.0).max(1e-15);
                    converged = small_step || small_drop || chi2 == 0.0;
                    break;
                }
                _ => {
                    if small_step {
                        // No representable improvement left.
                        converged = true;
                        break 'outer;
                    }
                    damping *= 10.0;
                    if damping > MAX_DAMPING {
                        message = Some("damping exhausted without reducing chi2".into());
                        break 'outer;
                    }
                }
            }
        }
    }
    if !converged && message.is_none() {
        message = Some(format!("no convergence within {} iterations", opts.max_iterations));
    }

    let params = scaled.physical(&q);
    let dof = n_data.saturating_sub(n_params).max(1);
    let jac_q = central_differences(&scaled, &q, &step_of(&q))?;
    let mut jac_p = jac_q;
    for (j, s) in scale.iter().enumerate() {
        jac_p.column_mut(j).scale_mut(1.0 / s);
    }
    let (cov, deficient) = covariance_inner(&jac_p, chi2, dof, opts.scale_by_reduced_chi2)?;
    if let Some(index) = deficient {
        converged = false;
        message = Some(format!(
            "parameter {index} is not constrained by the data (rank-deficient Jacobian)"
        ));
    }
    let sigmas = sigmas_of(&cov);
    let n = cov.nrows();
    Ok(FitReport {
        params,
        sigmas: sigmas.iter().copied().collect(),
        covariance: (0..n).map(|i| (0..n).map(|j| cov[(i, j)]).collect()).collect(),
        chi2,
        reduced_chi2: chi2 / dof as f64,
        dof,
        residuals: r,
        n_iterations: iterations,
        converged,
        chi2_history: history,
        jacobian_fallback: q.iter().map(|v| v.abs() < 1.0).collect(),
        message,
    })
}
