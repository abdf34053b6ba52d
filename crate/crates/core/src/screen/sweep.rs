//! Threshold sweep with OLS refits scored by BIC.

use std::collections::HashSet;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::library::CandidateLibrary;
use crate::linalg::{least_squares, select_columns};

/// Hard thresholds `1e-8, 1e-7, ..., 1e1`.
pub const THRESHOLDS: [f64; 10] = [1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1e0, 1e1];

/// Relative round-off level below which residual sums of squares are not
/// distinguished.
pub const RSS_FLOOR: f64 = 1e-24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseFit {
    /// Selected library columns, ascending.
    pub support: Vec<usize>,
    /// OLS coefficients on `support`, in the same order.
    pub coeffs: Vec<f64>,
    /// Residual sum of squares, floored at `RSS_FLOOR * ||y||^2`.
    pub rss: f64,
    pub bic: f64,
    pub threshold: f64,
    /// Columns of the support that were numerically dependent and dropped
    /// from the refit (their coefficient is zero).
    pub dropped: Vec<usize>,
}

impl SparseFit {
    pub fn rank_deficient(&self) -> bool {
        !self.dropped.is_empty()
    }

    /// Coefficients expanded to a full `p`-vector.
    pub fn dense(&self, p: usize) -> DVector<f64> {
        let mut beta = DVector::zeros(p);
        for (&k, &c) in self.support.iter().zip(&self.coeffs) {
            beta[k] = c;
        }
        beta
    }
}

/// `n ln(max(rss, 1e-300) / n) + k ln n`.
pub fn bic(rss: f64, n: usize, k: usize) -> f64 {
    let n = n as f64;
    n * (rss.max(1e-300) / n).ln() + k as f64 * n.ln()
}

/// OLS refit on `support`, scored by BIC.
pub fn refit(
    lib: &CandidateLibrary,
    y: &DVector<f64>,
    support: Vec<usize>,
    threshold: f64,
) -> SparseFit {
    let n = y.len();
    let floor = RSS_FLOOR * y.norm_squared();
    let (coeffs, rss, dropped) = if support.is_empty() {
        (Vec::new(), y.norm_squared(), Vec::new())
    } else {
        let ls = least_squares(&select_columns(&lib.theta, &support), y);
        let dropped = ls.dropped.iter().map(|&j| support[j]).collect();
        (ls.coeffs.iter().copied().collect(), ls.rss, dropped)
    };
    let rss = rss.max(floor);
    SparseFit {
        bic: bic(rss, n, support.len()),
        support,
        coeffs,
        rss,
        threshold,
        dropped,
    }
}

/// Every distinct candidate of the sweep, in order of increasing threshold.
pub fn sweep_candidates(
    lib: &CandidateLibrary,
    y: &DVector<f64>,
    lasso_coeffs: &DVector<f64>,
) -> Vec<SparseFit> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for &eta in &THRESHOLDS {
        let support: Vec<usize> = (0..lasso_coeffs.len())
            .filter(|&k| lasso_coeffs[k].abs() >= eta)
            .collect();
        if !seen.insert(support.clone()) {
            continue;
        }
        out.push(refit(lib, y, support, eta));
    }
    out
}

/// The BIC-minimising candidate. Ties go to the larger threshold, i.e. the
/// smaller support.
pub fn threshold_sweep(
    lib: &CandidateLibrary,
    y: &DVector<f64>,
    lasso_coeffs: &DVector<f64>,
) -> SparseFit {
    let candidates = sweep_candidates(lib, y, lasso_coeffs);
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate() {
        if c.bic <= candidates[best].bic {
            best = i;
        }
    }
    if candidates[best].rank_deficient() {
        log::warn!(
            "rank-deficient refit: dropped columns {:?}",
            candidates[best].dropped
        );
    }
    candidates
        .into_iter()
        .nth(best)
        .expect("at least one threshold")
}
