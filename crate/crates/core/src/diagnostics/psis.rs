//! Pareto-smoothed importance sampling diagnostics for leave-one-out
//! cross-validation.

use nalgebra::DVector;

use crate::bayes::Draws;
use crate::error::{Error, Result};
use crate::library::CandidateLibrary;

pub const MIN_DRAWS: usize = 100;

/// Tail length `min(ceil(0.2 S), ceil(3 sqrt(S)))`.
pub fn tail_length(s: usize) -> usize {
    let a = (0.2 * s as f64).ceil() as usize;
    let b = (3.0 * (s as f64).sqrt()).ceil() as usize;
    a.min(b)
}

/// Generalised Pareto fit by probability-weighted moments.
/// Returns `(shape, scale)` with positive shape meaning a heavy tail.
pub fn fit_gpd(exceedances: &[f64]) -> (f64, f64) {
    let mut x = exceedances.to_vec();
    x.sort_by(f64::total_cmp);
    let m = x.len() as f64;
    let a0 = x.iter().sum::<f64>() / m;
    let a1 = x
        .iter()
        .enumerate()
        .map(|(i, v)| (1.0 - (i as f64 + 1.0 - 0.35) / m) * v)
        .sum::<f64>()
        / m;
    let denom = a0 - 2.0 * a1;
    if !(denom > 0.0) || !(a0 > 0.0) {
        return (f64::INFINITY, f64::NAN);
    }
    let k = a0 / denom - 2.0;
    (-k, 2.0 * a0 * a1 / denom)
}

/// Pareto shape of the upper tail of `exp(log_ratios)`.
pub fn khat(log_ratios: &[f64]) -> f64 {
    let s = log_ratios.len();
    let m = tail_length(s);
    let mut lr = log_ratios.to_vec();
    lr.sort_by(f64::total_cmp);
    let top = lr[s - 1];
    let cut = (lr[s - m - 1] - top).exp();
    let exceed: Vec<f64> = lr[s - m..].iter().map(|v| (v - top).exp() - cut).collect();
    if exceed.iter().all(|e| *e <= 0.0) {
        return 0.0;
    }
    let (shape, _) = fit_gpd(&exceed);
    if shape.is_finite() {
        shape
    } else {
        f64::MAX
    }
}

/// Per-observation `k_hat` of the leave-one-out importance ratios
/// `1 / p(y_i | beta_s, sigma_s)`.
pub fn psis_loo(draws: &Draws, trimmed: &CandidateLibrary, y: &DVector<f64>) -> Result<Vec<f64>> {
    let s = draws.n_draws();
    if s < MIN_DRAWS {
        return Err(Error::TooFewDraws {
            needed: MIN_DRAWS,
            got: s,
        });
    }
    let k = draws.n_coeffs();
    if trimmed.n_terms() != k || trimmed.n_rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: trimmed.n_terms(),
        });
    }
    let all = draws.stacked();
    let beta = all.columns(0, k).transpose();
    let sigma: Vec<f64> = all.column(k).iter().copied().collect();
    // rows: draws, columns: observations
    let mu = (&trimmed.theta * &beta).transpose();
    Ok((0..y.len())
        .map(|i| {
            let lr: Vec<f64> = (0..s)
                .map(|d| {
                    let z = (y[i] - mu[(d, i)]) / sigma[d];
                    0.5 * z * z + sigma[d].ln()
                })
                .collect();
            khat(&lr)
        })
        .collect())
}
