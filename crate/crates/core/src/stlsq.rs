//! Sequentially thresholded least squares, the classical sparse-regression
//! baseline.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::library::CandidateLibrary;
use crate::linalg::{least_squares, select_columns};
use crate::screen::{bic, SparseFit, RSS_FLOOR};

pub const STLSQ_MAX_ITERS: usize = 50;

/// Ridge solution via the augmented system `[X; sqrt(a) I] b = [y; 0]`.
fn ridge_solve(x: &DMatrix<f64>, y: &DVector<f64>, alpha: f64) -> (DVector<f64>, Vec<usize>) {
    if alpha == 0.0 {
        let ls = least_squares(x, y);
        return (ls.coeffs, ls.dropped);
    }
    let (n, k) = x.shape();
    let s = alpha.sqrt();
    let aug = DMatrix::from_fn(n + k, k, |i, j| {
        if i < n {
            x[(i, j)]
        } else if i - n == j {
            s
        } else {
            0.0
        }
    });
    let yy = DVector::from_fn(n + k, |i, _| if i < n { y[i] } else { 0.0 });
    let ls = least_squares(&aug, &yy);
    (ls.coeffs, ls.dropped)
}

/// Alternates ridge fits on the active set with hard thresholding of
/// coefficients below `threshold` in magnitude, until the active set stops
/// changing or `STLSQ_MAX_ITERS` is reached.
pub fn stlsq_baseline(
    lib: &CandidateLibrary,
    y: &DVector<f64>,
    threshold: f64,
    ridge_penalty: f64,
) -> Result<SparseFit> {
    if !(threshold > 0.0) || !threshold.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "threshold must be positive, got {threshold}"
        )));
    }
    if !(ridge_penalty >= 0.0) || !ridge_penalty.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "ridge penalty must be non-negative, got {ridge_penalty}"
        )));
    }
    if lib.n_rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: lib.n_rows(),
            actual: y.len(),
        });
    }
    let n = y.len();
    let mut active: Vec<usize> = (0..lib.n_terms()).collect();
    let mut coeffs = Vec::new();
    let mut dropped = Vec::new();
    for _ in 0..STLSQ_MAX_ITERS {
        if active.is_empty() {
            coeffs.clear();
            dropped.clear();
            break;
        }
        let (b, d) = ridge_solve(&select_columns(&lib.theta, &active), y, ridge_penalty);
        let keep: Vec<usize> = (0..active.len())
            .filter(|&i| b[i].abs() >= threshold)
            .collect();
        coeffs = b.iter().copied().collect();
        dropped = d.iter().map(|&i| active[i]).collect();
        if keep.len() == active.len() {
            break;
        }
        active = keep.iter().map(|&i| active[i]).collect();
        coeffs.clear();
        dropped.clear();
    }
    if coeffs.len() != active.len() {
        // iteration cap hit right after shrinking the set
        let (b, d) = ridge_solve(&select_columns(&lib.theta, &active), y, ridge_penalty);
        coeffs = b.iter().copied().collect();
        dropped = d.iter().map(|&i| active[i]).collect();
    }
    let mut resid = y.clone();
    for (&k, &c) in active.iter().zip(&coeffs) {
        resid.axpy(-c, &lib.theta.column(k), 1.0);
    }
    let rss = resid.norm_squared().max(RSS_FLOOR * y.norm_squared());
    Ok(SparseFit {
        bic: bic(rss, n, active.len()),
        support: active,
        coeffs,
        rss,
        threshold,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::TermDescriptor;
    use rand::Rng;

    fn random_lib(n: usize, p: usize, seed: u64) -> CandidateLibrary {
        let mut rng = crate::seed::rng(seed);
        let x = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-2.0..2.0));
        let lib = CandidateLibrary::build(&x, 3, false).unwrap();
        let cols: Vec<usize> = (0..p).collect();
        lib.subset(&cols)
    }

    #[test]
    fn noiseless_sparse_support() {
        let lib = random_lib(200, 10, 3);
        let mut beta = DVector::zeros(10);
        beta[1] = 2.0;
        beta[4] = -0.7;
        beta[8] = 1.3;
        let y = &lib.theta * &beta;
        let fit = stlsq_baseline(&lib, &y, 0.1, 0.0).unwrap();
        assert_eq!(fit.support, vec![1, 4, 8]);
        for (c, k) in fit.coeffs.iter().zip(&fit.support) {
            assert!((c - beta[*k]).abs() < 1e-9);
        }
    }

    #[test]
    fn large_threshold_empties_support() {
        let lib = random_lib(100, 6, 5);
        let y = DVector::from_fn(100, |i, _| lib.theta[(i, 1)] * 0.5 - lib.theta[(i, 2)]);
        let fit = stlsq_baseline(&lib, &y, 100.0, 0.05).unwrap();
        assert!(fit.support.is_empty() && fit.coeffs.is_empty());
        assert!((fit.rss - y.norm_squared()).abs() < 1e-9 * y.norm_squared());
    }

    #[test]
    fn orthonormal_design_is_hard_thresholded_ols() {
        let n = 64;
        let q = DMatrix::from_fn(n, 4, |i, j| {
            let t = std::f64::consts::PI * (i as f64 + 0.5) * (j as f64 + 1.0) / n as f64;
            t.cos() * (2.0 / n as f64).sqrt()
        });
        assert!((q.transpose() * &q - DMatrix::identity(4, 4)).amax() < 1e-12);
        let terms: Vec<TermDescriptor> = (0..4).map(|j| TermDescriptor::power(4, j, 1)).collect();
        let lib = CandidateLibrary {
            theta: q.clone(),
            terms,
            scales: vec![1.0; 4],
            degree: 1,
            trig: false,
        };
        let mut rng = crate::seed::rng(9);
        let y = DVector::from_fn(n, |_, _| rng.random_range(-0.3..0.3)) + q.column(0) * 0.8
            - q.column(2) * 0.25;
        let ols = q.transpose() * &y;
        let want: Vec<usize> = (0..4).filter(|&k| ols[k].abs() >= 0.1).collect();
        let fit = stlsq_baseline(&lib, &y, 0.1, 0.0).unwrap();
        assert_eq!(fit.support, want);
        for (c, k) in fit.coeffs.iter().zip(&fit.support) {
            assert!((c - ols[*k]).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_threshold() {
        let lib = random_lib(30, 3, 1);
        let y = DVector::zeros(30);
        assert!(stlsq_baseline(&lib, &y, 0.0, 0.0).is_err());
        assert!(stlsq_baseline(&lib, &y, 0.1, -1.0).is_err());
    }
}
