//! Weighted (adaptive) lasso by cyclic coordinate descent.
//!
//! The objective on the original scale is
//! `(1/2n) ||y - b0 - Theta beta||^2 + lambda * sum_k w_k |beta_k|`
//! with the intercept unpenalised. It is solved on standardised columns.
//! Weights can apply to the original-scale coefficients (penalty `w_k / sd_k`
//! on the standardised ones) or, as glmnet's `penalty.factor` does, directly
//! to the standardised coefficients. Columns with an infinite weight are held
//! at zero.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::design::{CvFolds, Design, Quadratic};
use super::ridge::log_grid;
use crate::error::{Error, Result};
use crate::library::CandidateLibrary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightScale {
    Original,
    #[default]
    Standardized,
}

#[derive(Debug, Clone, Copy)]
pub struct LassoOptions {
    pub weight_scale: WeightScale,
    pub folds: usize,
    pub cv: CvFolds,
    pub phase1_points: usize,
    pub phase1_min_ratio: f64,
    pub phase2_points: usize,
    /// Convergence threshold, as in glmnet: stop once every coordinate update
    /// changes the loss by less than `tol` times the response variance.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            weight_scale: WeightScale::default(),
            folds: 10,
            cv: CvFolds::default(),
            phase1_points: 100,
            phase1_min_ratio: 1e-4,
            phase2_points: 100,
            tol: 1e-7,
            max_sweeps: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PilotKind {
    Ridge,
    Ols,
}

#[derive(Debug, Clone)]
pub struct LassoPath {
    pub lambda: f64,
    pub coeffs: DVector<f64>,
    pub weights: DVector<f64>,
    pub pilot_kind: PilotKind,
}

/// Adaptive weights `|pilot_k|^-gamma`; a zero pilot gives an infinite weight.
pub fn adaptive_weights(pilot: &DVector<f64>, gamma: f64) -> DVector<f64> {
    pilot.map(|b| {
        if b == 0.0 {
            f64::INFINITY
        } else {
            b.abs().powf(-gamma)
        }
    })
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct CdOutcome {
    pub converged: bool,
    pub sweeps: usize,
    pub last_change: f64,
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Coordinate descent on `(1/2n)(b'Gb - 2c'b) + lambda sum omega_k |b_k|`,
/// warm-started from `b`.
pub(crate) fn coordinate_descent(
    prob: &Quadratic,
    omega: &[f64],
    lambda: f64,
    b: &mut [f64],
    tol: f64,
    max_sweeps: usize,
) -> CdOutcome {
    let q = b.len();
    let n = prob.n;
    let g = &prob.g;
    let thresh = tol * prob.y_scale().powi(2);
    for k in 0..q {
        if !omega[k].is_finite() || g[(k, k)] <= 0.0 {
            b[k] = 0.0;
        }
    }
    let eligible: Vec<usize> = (0..q)
        .filter(|&k| omega[k].is_finite() && g[(k, k)] > 0.0)
        .collect();
    let mut resid: Vec<f64> = (0..q)
        .map(|k| prob.c[k] - (0..q).map(|j| g[(k, j)] * b[j]).sum::<f64>())
        .collect();
    let mut sweeps = 0;
    let mut last_change;

    let sweep = |set: &[usize], b: &mut [f64], resid: &mut [f64]| -> f64 {
        let mut max_change: f64 = 0.0;
        for &k in set {
            let gkk = g[(k, k)];
            let zk = resid[k] + gkk * b[k];
            let new = soft_threshold(zk, n * lambda * omega[k]) / gkk;
            let d = new - b[k];
            if d != 0.0 {
                for (j, r) in resid.iter_mut().enumerate() {
                    *r -= g[(j, k)] * d;
                }
                b[k] = new;
                max_change = max_change.max(gkk / n * d * d);
            }
        }
        max_change
    };

    loop {
        last_change = sweep(&eligible, b, &mut resid);
        sweeps += 1;
        if last_change <= thresh {
            return CdOutcome {
                converged: true,
                sweeps,
                last_change,
            };
        }
        if sweeps >= max_sweeps {
            break;
        }
        let active: Vec<usize> = eligible.iter().copied().filter(|&k| b[k] != 0.0).collect();
        loop {
            last_change = sweep(&active, b, &mut resid);
            sweeps += 1;
            if last_change <= thresh || sweeps >= max_sweeps {
                break;
            }
        }
        if sweeps >= max_sweeps {
            break;
        }
    }
    CdOutcome {
        converged: false,
        sweeps,
        last_change,
    }
}

/// Penalty factors on the standardised scale.
fn standardized_omega(design: &Design, weights: &DVector<f64>, scale: WeightScale) -> Vec<f64> {
    design
        .cols
        .iter()
        .zip(&design.sds)
        .map(|(&k, sd)| {
            let w = weights[k];
            if !w.is_finite() {
                f64::INFINITY
            } else if scale == WeightScale::Original {
                w / sd
            } else {
                w
            }
        })
        .collect()
}

/// Smallest lambda at which every penalised coefficient is zero.
fn lambda_max(prob: &Quadratic, omega: &[f64]) -> f64 {
    prob.c
        .iter()
        .zip(omega)
        .filter(|(_, w)| w.is_finite() && **w > 0.0)
        .map(|(c, w)| c.abs() / (prob.n * w))
        .fold(0.0, f64::max)
}

struct CvSetup<'a> {
    design: &'a Design,
    folds: Vec<(Quadratic, Vec<usize>)>,
    omega: Vec<f64>,
    opts: LassoOptions,
}

impl CvSetup<'_> {
    /// Total held-out SSE for each lambda, in the order given.
    /// Warm starts run from the largest lambda down.
    fn curve(&self, lambdas: &[f64]) -> Vec<f64> {
        let mut order: Vec<usize> = (0..lambdas.len()).collect();
        order.sort_by(|&a, &b| lambdas[b].total_cmp(&lambdas[a]));
        let mut sse = vec![0.0; lambdas.len()];
        for (prob, rows) in &self.folds {
            let mut b = vec![0.0; self.design.q()];
            for &i in &order {
                // non-converged path fits still give a usable CV estimate
                coordinate_descent(
                    prob,
                    &self.omega,
                    lambdas[i],
                    &mut b,
                    self.opts.tol,
                    self.opts.max_sweeps,
                );
                sse[i] += self.design.holdout_sse(prob, &b, rows);
            }
        }
        sse
    }
}

fn argmin(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |acc, (i, e)| if *e < acc.1 { (i, *e) } else { acc },
        )
        .0
}

/// The phase-2 grid: `points` evenly spaced values on `[lambda0/10, 1.1 lambda0]`.
pub fn refined_grid(lambda0: f64, points: usize) -> Vec<f64> {
    let (lo, hi) = (lambda0 / 10.0, 1.1 * lambda0);
    if points == 1 {
        return vec![lo];
    }
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

fn select_lambda(design: &Design, weights: &DVector<f64>, opts: &LassoOptions) -> f64 {
    let omega = standardized_omega(design, weights, opts.weight_scale);
    let full = design.full_problem();
    let lmax = lambda_max(&full, &omega);
    if lmax == 0.0 {
        return 0.0;
    }
    let setup = CvSetup {
        design,
        folds: design.fold_problems(opts.folds, opts.cv),
        omega,
        opts: *opts,
    };
    let phase1 = log_grid(lmax, lmax * opts.phase1_min_ratio, opts.phase1_points);
    let lambda0 = phase1[argmin(&setup.curve(&phase1))];
    let phase2 = refined_grid(lambda0, opts.phase2_points);
    phase2[argmin(&setup.curve(&phase2))]
}

/// Two-phase cross-validated choice of the lasso penalty.
pub fn two_phase_lambda(
    lib: &CandidateLibrary,
    y: &DVector<f64>,
    weights: &DVector<f64>,
    opts: &LassoOptions,
) -> f64 {
    select_lambda(&Design::new(lib, y), weights, opts)
}

/// Weighted lasso at a fixed `lambda`; returns original-scale coefficients.
pub fn lasso_at(
    lib: &CandidateLibrary,
    y: &DVector<f64>,
    weights: &DVector<f64>,
    lambda: f64,
    opts: &LassoOptions,
) -> Result<DVector<f64>> {
    let design = Design::new(lib, y);
    fit_at(&design, weights, lambda, opts)
}

fn fit_at(
    design: &Design,
    weights: &DVector<f64>,
    lambda: f64,
    opts: &LassoOptions,
) -> Result<DVector<f64>> {
    let omega = standardized_omega(design, weights, opts.weight_scale);
    let full = design.full_problem();
    let mut b = vec![0.0; design.q()];
    let out = coordinate_descent(&full, &omega, lambda, &mut b, opts.tol, opts.max_sweeps);
    if !out.converged {
        return Err(Error::NonConvergence {
            sweeps: out.sweeps,
            last_change: out.last_change,
        });
    }
    Ok(design.to_original(&b))
}

/// Adaptive lasso with the penalty picked by [`two_phase_lambda`].
pub fn adaptive_lasso(
    lib: &CandidateLibrary,
    y: &DVector<f64>,
    weights: &DVector<f64>,
    pilot_kind: PilotKind,
    opts: &LassoOptions,
) -> Result<LassoPath> {
    if weights.len() != lib.n_terms() {
        return Err(Error::DimensionMismatch {
            expected: lib.n_terms(),
            actual: weights.len(),
        });
    }
    if weights.iter().any(|w| w.is_nan() || *w < 0.0) {
        return Err(Error::InvalidArgument("weights must be >= 0".into()));
    }
    let design = Design::new(lib, y);
    let lambda = select_lambda(&design, weights, opts);
    let coeffs = fit_at(&design, weights, lambda, opts)?;
    Ok(LassoPath {
        lambda,
        coeffs,
        weights: weights.clone(),
        pilot_kind,
    })
}

/// Per-coefficient weights on the original scale that reproduce the penalty
/// applied under `scale`.
pub fn original_scale_weights(
    lib: &CandidateLibrary,
    y: &DVector<f64>,
    weights: &DVector<f64>,
    scale: WeightScale,
) -> DVector<f64> {
    match scale {
        WeightScale::Original => weights.clone(),
        WeightScale::Standardized => {
            let design = Design::new(lib, y);
            let mut w = weights.clone();
            for (&k, sd) in design.cols.iter().zip(&design.sds) {
                w[k] *= sd;
            }
            w
        }
    }
}

/// Objective value on the original scale (intercept, if any, taken from `beta`).
pub fn lasso_objective(
    lib: &CandidateLibrary,
    y: &DVector<f64>,
    weights: &DVector<f64>,
    lambda: f64,
    beta: &DVector<f64>,
) -> f64 {
    let r = y - &lib.theta * beta;
    let n = y.len() as f64;
    let pen: f64 = beta
        .iter()
        .zip(weights.iter())
        .enumerate()
        .filter(|(k, _)| Some(*k) != lib.intercept_index())
        .map(|(_, (b, w))| if *b == 0.0 { 0.0 } else { w * b.abs() })
        .sum();
    r.norm_squared() / (2.0 * n) + lambda * pen
}

/// Largest violation of the optimality conditions at `beta`:
/// for zero coefficients `|g_k| <= lambda w_k`, otherwise `g_k = lambda w_k sign(beta_k)`,
/// with `g_k = theta_k' r / n`.
pub fn kkt_violation(
    lib: &CandidateLibrary,
    y: &DVector<f64>,
    weights: &DVector<f64>,
    lambda: f64,
    beta: &DVector<f64>,
) -> f64 {
    let n = y.len() as f64;
    let r = y - &lib.theta * beta;
    let grad: DVector<f64> = lib.theta.transpose() * r / n;
    let icpt = lib.intercept_index();
    let mut worst: f64 = 0.0;
    for k in 0..beta.len() {
        let w = weights[k];
        let v = if Some(k) == icpt {
            grad[k].abs()
        } else if !w.is_finite() {
            continue;
        } else if beta[k] == 0.0 {
            (grad[k].abs() - lambda * w).max(0.0)
        } else {
            (grad[k] - lambda * w * beta[k].signum()).abs()
        };
        worst = worst.max(v);
    }
    worst
}
