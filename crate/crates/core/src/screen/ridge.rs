//! Ridge pilot estimates.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::design::{CvFolds, Design, Quadratic};
use crate::library::CandidateLibrary;

pub const RIDGE_FOLDS: usize = 10;
pub const RIDGE_GRID_POINTS: usize = 100;
pub const RIDGE_MIN_RATIO: f64 = 1e-10;

struct EigenRidge {
    vectors: DMatrix<f64>,
    values: DVector<f64>,
    rotated_c: DVector<f64>,
    n: f64,
}

impl EigenRidge {
    fn new(prob: &Quadratic) -> Self {
        let eig = SymmetricEigen::new(prob.g.clone());
        let mut rotated_c = eig.eigenvectors.transpose() * &prob.c;
        let mut values = eig.eigenvalues;
        // directions in the numerical null space of G carry no signal
        let cut = values.amax() * values.len() as f64 * f64::EPSILON;
        for (l, c) in values.iter_mut().zip(rotated_c.iter_mut()) {
            if *l <= cut {
                *l = 0.0;
                *c = 0.0;
            }
        }
        Self {
            vectors: eig.eigenvectors,
            values,
            rotated_c,
            n: prob.n,
        }
    }

    /// Solves `(G + n alpha I) b = c`.
    fn solve(&self, alpha: f64) -> Vec<f64> {
        let scaled = DVector::from_iterator(
            self.values.len(),
            self.values.iter().zip(self.rotated_c.iter()).map(|(l, c)| {
                if *c == 0.0 {
                    0.0
                } else {
                    c / (l + self.n * alpha)
                }
            }),
        );
        (&self.vectors * scaled).iter().copied().collect()
    }
}

/// Log-spaced penalty grid, largest first. The top is glmnet's ridge
/// convention (the lasso `lambda_max` over 0.001) with the response scaled to
/// unit variance, so the grid does not depend on the units of `y`.
fn alpha_grid(design: &Design, prob: &Quadratic) -> Vec<f64> {
    let cmax = prob.c.amax();
    let ys = prob.y_scale();
    if design.q() == 0 || cmax == 0.0 || ys == 0.0 {
        return Vec::new();
    }
    let top = cmax / (prob.n * ys) / 1e-3;
    log_grid(top, top * RIDGE_MIN_RATIO, RIDGE_GRID_POINTS)
}

pub(crate) fn log_grid(hi: f64, lo: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![hi];
    }
    let (a, b) = (hi.ln(), lo.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Ridge coefficients (original scale, intercept unpenalised) with the
/// penalty chosen by 10-fold cross-validation.
pub fn ridge_pilot(lib: &CandidateLibrary, y: &DVector<f64>, cv: CvFolds) -> DVector<f64> {
    let design = Design::new(lib, y);
    let full = design.full_problem();
    let grid = alpha_grid(&design, &full);
    if grid.is_empty() {
        return design.to_original(&vec![0.0; design.q()]);
    }
    let mut sse = vec![0.0; grid.len()];
    for (prob, rows) in design.fold_problems(RIDGE_FOLDS, cv) {
        let eig = EigenRidge::new(&prob);
        for (a, err) in grid.iter().zip(sse.iter_mut()) {
            let b = eig.solve(*a);
            *err += design.holdout_sse(&prob, &b, &rows);
        }
    }
    let best = sse
        .iter()
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |acc, (i, e)| if *e < acc.1 { (i, *e) } else { acc },
        )
        .0;
    let b = EigenRidge::new(&full).solve(grid[best]);
    design.to_original(&b)
}

/// Ridge coefficients at a fixed penalty `alpha` for the standardised
/// objective `(1/2n)||y - b0 - Zb||^2 + (alpha/2)||b||^2`.
pub fn ridge_at(lib: &CandidateLibrary, y: &DVector<f64>, alpha: f64) -> DVector<f64> {
    let design = Design::new(lib, y);
    let b = EigenRidge::new(&design.full_problem()).solve(alpha);
    design.to_original(&b)
}
