//! Log posterior of the Gaussian linear model with scale-adaptive priors.
//!
//! The residual sum of squares is evaluated through sufficient statistics,
//! `rss(beta) = rss_ols + (beta - beta_ols)' G (beta - beta_ols)`, so one
//! density evaluation costs O(k^2) regardless of the number of rows.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{least_squares, sample_sd};

/// Prior standard deviation multiplier on `s_y / s_x`.
pub const PRIOR_SCALE: f64 = 2.5;

#[derive(Debug, Clone)]
pub struct LinearPosterior {
    n: f64,
    gram: DMatrix<f64>,
    beta_ols: DVector<f64>,
    rss_ols: f64,
    prior_sd: DVector<f64>,
    s_y: f64,
    fixed_sigma: Option<f64>,
}

impl LinearPosterior {
    /// `theta` is the n x k design, `fixed_sigma` pins the noise scale.
    pub fn new(theta: &DMatrix<f64>, y: &DVector<f64>, fixed_sigma: Option<f64>) -> Result<Self> {
        let (n, k) = theta.shape();
        if y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: y.len(),
            });
        }
        if k == 0 {
            return Err(Error::EmptySupport);
        }
        if n <= k {
            return Err(Error::TooFewSamples {
                needed: k + 1,
                got: n,
            });
        }
        if let Some(s) = fixed_sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidArgument(
                    "fixed sigma must be positive".into(),
                ));
            }
        }
        let ls = least_squares(theta, y);
        if fixed_sigma.is_none() && ls.rss <= 1e-24 * y.norm_squared() {
            return Err(Error::DegeneratePosterior(
                "the library fits the response exactly, so the noise scale has no lower bound"
                    .into(),
            ));
        }
        let s_y = match sample_sd(y.as_slice()) {
            s if s > 0.0 && s.is_finite() => s,
            _ => 1.0,
        };
        let prior_sd = DVector::from_iterator(
            k,
            theta.column_iter().map(|col| {
                let s_x = sample_sd(col.as_slice());
                if s_x > 0.0 {
                    PRIOR_SCALE * s_y / s_x
                } else {
                    // constant column: an intercept, possibly rescaled
                    PRIOR_SCALE * s_y / col[0].abs().max(f64::MIN_POSITIVE)
                }
            }),
        );
        Ok(Self {
            n: n as f64,
            gram: theta.transpose() * theta,
            beta_ols: ls.coeffs,
            rss_ols: ls.rss,
            prior_sd,
            s_y,
            fixed_sigma,
        })
    }

    pub fn n_coeffs(&self) -> usize {
        self.beta_ols.len()
    }

    /// Length of the parameter vector: coefficients, then `log sigma` unless fixed.
    pub fn dim(&self) -> usize {
        self.n_coeffs() + usize::from(self.fixed_sigma.is_none())
    }

    pub fn prior_sd(&self) -> &DVector<f64> {
        &self.prior_sd
    }

    pub fn s_y(&self) -> f64 {
        self.s_y
    }

    pub fn fixed_sigma(&self) -> Option<f64> {
        self.fixed_sigma
    }

    pub fn rss(&self, beta: &[f64]) -> f64 {
        let d = DVector::from_iterator(
            beta.len(),
            beta.iter().zip(self.beta_ols.iter()).map(|(b, o)| b - o),
        );
        self.rss_ols + d.dot(&(&self.gram * &d)).max(0.0)
    }

    fn split<'a>(&self, theta: &'a [f64]) -> (&'a [f64], f64) {
        let k = self.n_coeffs();
        match self.fixed_sigma {
            Some(s) => (&theta[..k], s.ln()),
            None => (&theta[..k], theta[k]),
        }
    }

    /// Log density (up to a constant) and its gradient.
    pub fn log_density_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let k = self.n_coeffs();
        let (beta, log_sigma) = self.split(theta);
        let sigma = log_sigma.exp();
        let inv_var = (-2.0 * log_sigma).exp();
        let d =
            DVector::from_iterator(k, beta.iter().zip(self.beta_ols.iter()).map(|(b, o)| b - o));
        let gd = &self.gram * &d;
        let rss = self.rss_ols + d.dot(&gd).max(0.0);
        let mut lp = -0.5 * rss * inv_var;
        for j in 0..k {
            let tau2 = self.prior_sd[j] * self.prior_sd[j];
            lp -= 0.5 * beta[j] * beta[j] / tau2;
            grad[j] = -gd[j] * inv_var - beta[j] / tau2;
        }
        if self.fixed_sigma.is_none() {
            // likelihood normaliser, exponential prior, and the log-sigma Jacobian
            lp += -self.n * log_sigma - sigma / self.s_y + log_sigma;
            grad[k] = rss * inv_var - self.n - sigma / self.s_y + 1.0;
        }
        lp
    }

    pub fn log_density(&self, theta: &[f64]) -> f64 {
        let mut g = vec![0.0; theta.len()];
        self.log_density_grad(theta, &mut g)
    }

    /// Gaussian approximation around the conditional posterior mode at the
    /// OLS noise estimate: centre and Cholesky factor of its covariance.
    pub fn laplace(&self) -> (DVector<f64>, DMatrix<f64>) {
        let k = self.n_coeffs();
        let sigma2 = match self.fixed_sigma {
            Some(s) => s * s,
            None => self.rss_ols / (self.n - k as f64).max(1.0),
        };
        let mut precision = &self.gram / sigma2;
        for j in 0..k {
            precision[(j, j)] += 1.0 / (self.prior_sd[j] * self.prior_sd[j]);
        }
        let chol =
            Cholesky::new(precision.clone()).expect("prior makes the precision positive definite");
        let mean = chol.solve(&(&self.gram * &self.beta_ols / sigma2));
        let cov = chol.inverse();
        let cov_chol = Cholesky::new(cov.clone())
            .map(|c| c.l())
            .unwrap_or_else(|| DMatrix::from_diagonal(&cov.diagonal().map(|v| v.max(0.0).sqrt())));
        let d = self.dim();
        let mut centre = DVector::zeros(d);
        centre.rows_mut(0, k).copy_from(&mean);
        let mut l = DMatrix::zeros(d, d);
        l.view_mut((0, 0), (k, k)).copy_from(&cov_chol);
        if self.fixed_sigma.is_none() {
            centre[k] = 0.5 * sigma2.ln();
            l[(k, k)] = (0.5 / self.n).sqrt();
        }
        (centre, l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(fixed: Option<f64>) -> LinearPosterior {
        let n = 60;
        let theta = DMatrix::from_fn(n, 3, |i, j| match j {
            0 => 1.0,
            1 => (i as f64 * 0.3).sin() * 4.0,
            _ => (i as f64 * 0.17).cos() + 0.01 * i as f64,
        });
        let y = DVector::from_fn(n, |i, _| {
            2.0 + 0.5 * theta[(i, 1)] - theta[(i, 2)] + 0.3 * ((i * 7) as f64).sin()
        });
        LinearPosterior::new(&theta, &y, fixed).unwrap()
    }

    #[test]
    fn gradient_matches_central_differences() {
        for fixed in [None, Some(0.4)] {
            let post = problem(fixed);
            let mut rng = crate::seed::rng(11);
            use rand::Rng;
            for _ in 0..20 {
                let theta: Vec<f64> = (0..post.dim())
                    .map(|_| rng.random_range(-1.5..1.5))
                    .collect();
                let mut g = vec![0.0; theta.len()];
                post.log_density_grad(&theta, &mut g);
                for j in 0..theta.len() {
                    let h = 1e-5 * theta[j].abs().max(1.0);
                    let mut up = theta.clone();
                    let mut dn = theta.clone();
                    up[j] += h;
                    dn[j] -= h;
                    let fd = (post.log_density(&up) - post.log_density(&dn)) / (2.0 * h);
                    assert!(
                        (fd - g[j]).abs() <= 1e-6 * g[j].abs().max(1.0),
                        "{fd} vs {}",
                        g[j]
                    );
                }
            }
        }
    }

    #[test]
    fn sufficient_statistics_match_direct_rss() {
        let n = 40;
        let theta = DMatrix::from_fn(n, 2, |i, j| ((i + 1) as f64).powi(j as i32));
        let y = DVector::from_fn(n, |i, _| 1.0 + 0.2 * i as f64 + (i as f64).sin());
        let post = LinearPosterior::new(&theta, &y, None).unwrap();
        let beta = [0.7, 0.3];
        let direct = (&y - &theta * DVector::from_row_slice(&beta)).norm_squared();
        assert!((post.rss(&beta) - direct).abs() < 1e-9 * direct);
    }

    #[test]
    fn prior_scales() {
        let post = problem(None);
        let s_y = post.s_y();
        assert!((post.prior_sd()[0] - 2.5 * s_y).abs() < 1e-12);
    }

    #[test]
    fn exact_fit_is_degenerate() {
        let theta = DMatrix::from_fn(10, 1, |i, _| i as f64);
        let y = DVector::from_fn(10, |i, _| 2.0 * i as f64);
        assert!(matches!(
            LinearPosterior::new(&theta, &y, None),
            Err(Error::DegeneratePosterior(_))
        ));
        assert!(LinearPosterior::new(&theta, &y, Some(1.0)).is_ok());
    }
}
