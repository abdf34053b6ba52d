//! Variance inflation factors.

use nalgebra::{DMatrix, DVector};

use crate::library::CandidateLibrary;
use crate::linalg::least_squares;

/// `1 / (1 - R^2)` of each non-intercept column regressed on the others plus
/// an intercept. Intercept and constant columns get `None`; perfectly
/// collinear columns get `Some(inf)`.
pub fn vif(lib: &CandidateLibrary) -> Vec<Option<f64>> {
    let (n, p) = lib.theta.shape();
    let icpt = lib.intercept_index();
    (0..p)
        .map(|k| {
            if Some(k) == icpt {
                return None;
            }
            let y: DVector<f64> = lib.theta.column(k).into_owned();
            let mean = y.mean();
            let tss = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
            if !(tss > 0.0) {
                return None;
            }
            let others: Vec<usize> = (0..p).filter(|&j| j != k && Some(j) != icpt).collect();
            let x = DMatrix::from_fn(n, others.len() + 1, |i, j| {
                if j == 0 {
                    1.0
                } else {
                    lib.theta[(i, others[j - 1])]
                }
            });
            let rss = least_squares(&x, &y).rss;
            let r2 = 1.0 - rss / tss;
            if rss <= 1e-12 * tss {
                Some(f64::INFINITY)
            } else {
                Some(1.0 / (1.0 - r2))
            }
        })
        .collect()
}
