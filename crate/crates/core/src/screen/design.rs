//! Standardised design shared by the ridge and lasso solvers.
//!
//! Non-constant columns are centred (when the library has an intercept) and
//! scaled to unit population standard deviation; the intercept is recovered
//! from the means afterwards. Each cross-validation training set is described
//! by its centred Gram matrix.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::library::CandidateLibrary;

/// How rows are assigned to cross-validation folds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum CvFolds {
    /// Consecutive blocks of rows.
    Contiguous,
    /// Balanced random assignment (fold sizes differ by at most one).
    Shuffled { seed: u64 },
}

impl Default for CvFolds {
    fn default() -> Self {
        CvFolds::Shuffled { seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Design {
    pub n: usize,
    pub p: usize,
    /// Library columns that enter the standardised problem.
    pub cols: Vec<usize>,
    pub z: DMatrix<f64>,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    pub y_mean: f64,
    pub yc: DVector<f64>,
    pub intercept: Option<usize>,
}

impl Design {
    pub fn new(lib: &CandidateLibrary, y: &DVector<f64>) -> Self {
        let (n, p) = lib.theta.shape();
        let intercept = lib.intercept_index();
        let center = intercept.is_some();
        let nf = n as f64;
        let y_mean = if center { y.mean() } else { 0.0 };
        let yc = y.map(|v| v - y_mean);
        let mut cols = Vec::new();
        let mut means = Vec::new();
        let mut sds = Vec::new();
        for k in 0..p {
            if Some(k) == intercept {
                continue;
            }
            let col = lib.theta.column(k);
            let mean = if center { col.mean() } else { 0.0 };
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nf;
            let sd = var.sqrt();
            if !(sd > 1e-10 * mean.abs()) || !sd.is_finite() {
                continue;
            }
            cols.push(k);
            means.push(mean);
            sds.push(sd);
        }
        let z = DMatrix::from_fn(n, cols.len(), |i, j| {
            (lib.theta[(i, cols[j])] - means[j]) / sds[j]
        });
        Self {
            n,
            p,
            cols,
            z,
            means,
            sds,
            y_mean,
            yc,
            intercept,
        }
    }

    pub fn q(&self) -> usize {
        self.cols.len()
    }

    pub fn centered(&self) -> bool {
        self.intercept.is_some()
    }

    /// Maps standardised coefficients back to a full library coefficient vector.
    pub fn to_original(&self, b: &[f64]) -> DVector<f64> {
        let mut beta = DVector::zeros(self.p);
        let mut shift = 0.0;
        for (j, &k) in self.cols.iter().enumerate() {
            beta[k] = b[j] / self.sds[j];
            shift += beta[k] * self.means[j];
        }
        if let Some(i) = self.intercept {
            beta[i] = self.y_mean - shift;
        }
        beta
    }

    pub fn folds(&self, k: usize, scheme: CvFolds) -> Vec<Vec<usize>> {
        let k = k.clamp(1, self.n.max(1));
        match scheme {
            CvFolds::Contiguous => (0..k)
                .map(|f| ((f * self.n / k)..((f + 1) * self.n / k)).collect::<Vec<_>>())
                .filter(|r| !r.is_empty())
                .collect(),
            CvFolds::Shuffled { seed } => {
                let mut label: Vec<usize> = (0..self.n).map(|i| i % k).collect();
                label.shuffle(&mut crate::seed::rng(seed));
                let mut out = vec![Vec::new(); k];
                for (i, f) in label.into_iter().enumerate() {
                    out[f].push(i);
                }
                out.retain(|f| !f.is_empty());
                out
            }
        }
    }

    fn block_sums(&self, rows: &[usize]) -> BlockSums {
        let zb = self.z.select_rows(rows);
        let yb = self.yc.select_rows(rows);
        BlockSums {
            n: rows.len() as f64,
            zz: zb.transpose() * &zb,
            zy: zb.transpose() * &yb,
            zs: DVector::from_iterator(self.q(), zb.column_iter().map(|c| c.sum())),
            ys: yb.sum(),
            yy: yb.norm_squared(),
        }
    }

    /// Quadratic problem on all rows.
    pub fn full_problem(&self) -> Quadratic {
        let all: Vec<usize> = (0..self.n).collect();
        Quadratic::from_sums(&self.block_sums(&all), self.centered())
    }

    /// One training problem per fold, plus the held-out rows.
    pub fn fold_problems(&self, k: usize, scheme: CvFolds) -> Vec<(Quadratic, Vec<usize>)> {
        let folds = self.folds(k, scheme);
        let blocks: Vec<BlockSums> = folds.iter().map(|r| self.block_sums(r)).collect();
        let mut total = blocks[0].clone();
        for b in &blocks[1..] {
            total.add(b, 1.0);
        }
        folds
            .into_iter()
            .zip(&blocks)
            .map(|(rows, b)| {
                let mut t = total.clone();
                t.add(b, -1.0);
                (Quadratic::from_sums(&t, self.centered()), rows)
            })
            .collect()
    }

    /// Held-out sum of squared errors of a training-set fit.
    pub fn holdout_sse(&self, prob: &Quadratic, b: &[f64], rows: &[usize]) -> f64 {
        let b0 = prob.intercept(b);
        let active: Vec<(usize, f64)> = b
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j, *v))
            .collect();
        rows.iter()
            .map(|&i| {
                let pred = b0 + active.iter().map(|&(j, v)| self.z[(i, j)] * v).sum::<f64>();
                let r = self.yc[i] - pred;
                r * r
            })
            .sum()
    }
}

#[derive(Debug, Clone)]
struct BlockSums {
    n: f64,
    zz: DMatrix<f64>,
    zy: DVector<f64>,
    zs: DVector<f64>,
    ys: f64,
    yy: f64,
}

impl BlockSums {
    fn add(&mut self, other: &BlockSums, sign: f64) {
        self.n += sign * other.n;
        self.zz += &other.zz * sign;
        self.zy += &other.zy * sign;
        self.zs += &other.zs * sign;
        self.ys += sign * other.ys;
        self.yy += sign * other.yy;
    }
}

/// `(1/2n) (b'Gb - 2c'b + yy)`: the least-squares loss of one (training) set
/// with the intercept profiled out.
#[derive(Debug, Clone)]
pub(crate) struct Quadratic {
    pub n: f64,
    pub g: DMatrix<f64>,
    pub c: DVector<f64>,
    pub yy: f64,
    pub zbar: DVector<f64>,
    pub ybar: f64,
}

impl Quadratic {
    fn from_sums(s: &BlockSums, center: bool) -> Self {
        let n = s.n;
        let (zbar, ybar) = if center {
            (&s.zs / n, s.ys / n)
        } else {
            (DVector::zeros(s.zs.len()), 0.0)
        };
        let g = &s.zz - (&zbar * zbar.transpose()) * n;
        let c = &s.zy - &zbar * (n * ybar);
        let yy = (s.yy - n * ybar * ybar).max(0.0);
        Self {
            n,
            g,
            c,
            yy,
            zbar,
            ybar,
        }
    }

    pub fn intercept(&self, b: &[f64]) -> f64 {
        self.ybar - self.zbar.iter().zip(b).map(|(z, v)| z * v).sum::<f64>()
    }

    /// Standard deviation of the response on this set.
    pub fn y_scale(&self) -> f64 {
        (self.yy / self.n).sqrt()
    }
}
