//! Adaptive Savitzky-Golay smoothing and differentiation.
//!
//! Each column is filtered with a fixed quartic and the window length picked
//! from the odd grid `13, 15, ..., l_max`. Near the ends the polynomial is fit
//! on the first (last) full window and evaluated off-centre.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

pub const SG_ORDER: usize = 4;
pub const MIN_WINDOW: usize = 13;
pub const MAX_WINDOW: usize = 101;

/// Least-squares polynomial weights for every evaluation position in one window.
#[derive(Debug, Clone)]
pub struct SgKernel {
    window: usize,
    /// `weights[(pos, r)]`: weight of sample `r` when evaluating at position `pos`.
    weights: DMatrix<f64>,
}

impl SgKernel {
    pub fn new(window: usize, order: usize, deriv: usize, dt: f64) -> Result<Self> {
        if window.is_multiple_of(2) || window <= order || deriv > 1 {
            return Err(Error::InvalidWindow {
                window,
                order,
                len: window,
            });
        }
        let half = (window / 2) as f64;
        let u: Vec<f64> = (0..window).map(|i| (i as f64 - half) / half).collect();
        let vander = DMatrix::from_fn(window, order + 1, |i, j| u[i].powi(j as i32));
        let gram = vander.transpose() * &vander;
        let chol = gram
            .cholesky()
            .expect("Vandermonde of distinct nodes has full column rank");
        // (V^T V)^{-1} V^T, shape (order + 1) x window
        let proj = chol.solve(&vander.transpose());
        let basis = DMatrix::from_fn(window, order + 1, |pos, j| match deriv {
            0 => u[pos].powi(j as i32),
            _ if j == 0 => 0.0,
            _ => j as f64 * u[pos].powi(j as i32 - 1) / (half * dt),
        });
        Ok(Self {
            window,
            weights: basis * proj,
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Weight the fit at `pos` puts on the sample at `pos` itself.
    fn self_weight(&self, pos: usize) -> f64 {
        self.weights[(pos, pos)]
    }

    fn apply_at(&self, series: &[f64], start: usize, pos: usize) -> f64 {
        let row = self.weights.row(pos);
        row.iter()
            .zip(&series[start..start + self.window])
            .map(|(w, x)| w * x)
            .sum()
    }

    /// Filters a whole series. Returns the filtered values and, per sample,
    /// the weight placed on that sample itself.
    fn apply(&self, series: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = series.len();
        let l = self.window;
        let h = l / 2;
        let mut out = vec![0.0; n];
        let mut diag = vec![0.0; n];
        for i in 0..n {
            let (start, pos) = if i < h {
                (0, i)
            } else if i + h >= n {
                (n - l, i - (n - l))
            } else {
                (i - h, h)
            };
            out[i] = self.apply_at(series, start, pos);
            diag[i] = self.self_weight(pos);
        }
        (out, diag)
    }
}

/// Savitzky-Golay filter of `series`; `deriv = 1` returns the first
/// derivative with respect to time for sample spacing `dt`.
pub fn sg_filter(
    series: &[f64],
    order: usize,
    window: usize,
    deriv: usize,
    dt: f64,
) -> Result<Vec<f64>> {
    if window.is_multiple_of(2) || window > series.len() || window <= order || deriv > 1 {
        return Err(Error::InvalidWindow {
            window,
            order,
            len: series.len(),
        });
    }
    Ok(SgKernel::new(window, order, deriv, dt)?.apply(series).0)
}

/// How the window length is chosen for each column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowCriterion {
    /// In-sample reconstruction error `||SG(x) - x||^2`.
    #[default]
    Reconstruction,
    /// Leave-one-out reconstruction error `sum (r_i / (1 - h_ii))^2`.
    LeaveOneOut,
}

#[derive(Debug, Clone)]
pub struct SmoothedData {
    pub x: DMatrix<f64>,
    pub xdot: DMatrix<f64>,
    pub window_per_column: Vec<usize>,
    pub order: usize,
}

/// Largest admissible window for `n` samples.
pub fn max_window(n: usize) -> usize {
    let largest_odd = if n % 2 == 1 { n } else { n.saturating_sub(1) };
    MIN_WINDOW.max(largest_odd.min(MAX_WINDOW))
}

pub fn smooth_and_differentiate(noisy: &Trajectory) -> Result<SmoothedData> {
    smooth_and_differentiate_with(noisy, WindowCriterion::default())
}

pub fn smooth_and_differentiate_with(
    noisy: &Trajectory,
    criterion: WindowCriterion,
) -> Result<SmoothedData> {
    let (n, m) = noisy.states.shape();
    if n < MIN_WINDOW {
        return Err(Error::TooFewSamples {
            needed: MIN_WINDOW,
            got: n,
        });
    }
    let windows: Vec<usize> = (MIN_WINDOW..=max_window(n)).step_by(2).collect();
    let kernels: Vec<SgKernel> = windows
        .iter()
        .map(|&l| SgKernel::new(l, SG_ORDER, 0, noisy.dt))
        .collect::<Result<_>>()?;
    let mut x = DMatrix::zeros(n, m);
    let mut xdot = DMatrix::zeros(n, m);
    let mut chosen = Vec::with_capacity(m);
    for j in 0..m {
        let col: Vec<f64> = noisy.states.column(j).iter().copied().collect();
        // scores below round-off of the data are ties
        let floor = 1e-20 * col.iter().map(|v| v * v).sum::<f64>();
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for k in &kernels {
            let (fit, diag) = k.apply(&col);
            let score: f64 = fit
                .iter()
                .zip(&col)
                .zip(&diag)
                .map(|((f, y), h)| {
                    let r = f - y;
                    match criterion {
                        WindowCriterion::Reconstruction => r * r,
                        WindowCriterion::LeaveOneOut => (r / (1.0 - h)).powi(2),
                    }
                })
                .sum::<f64>()
                .max(floor);
            // strict `<` keeps the smallest window on ties
            if best.as_ref().is_none_or(|(s, _, _)| score < *s) {
                best = Some((score, k.window(), fit));
            }
        }
        let (_, l, fit) = best.expect("window grid is never empty");
        let deriv = SgKernel::new(l, SG_ORDER, 1, noisy.dt)?.apply(&col).0;
        x.set_column(j, &DVector::from_vec(fit));
        xdot.set_column(j, &DVector::from_vec(deriv));
        chosen.push(l);
    }
    Ok(SmoothedData {
        x,
        xdot,
        window_per_column: chosen,
        order: SG_ORDER,
    })
}
