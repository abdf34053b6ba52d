//! Small dense linear-algebra helpers shared by the regression modules.

use nalgebra::{DMatrix, DVector};

/// Relative residual-norm threshold below which a column is treated as
/// linearly dependent on the columns kept before it.
pub const RANK_TOL: f64 = 1e-10;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation with the (n - 1) denominator; 0 for fewer than two values.
pub fn sample_sd(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Result of a least-squares solve with rank detection.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    /// Coefficients for every input column; dropped columns get 0.
    pub coeffs: DVector<f64>,
    pub rss: f64,
    /// Columns removed because they were (numerically) dependent on earlier ones.
    pub dropped: Vec<usize>,
}

/// Thin QR of the independent columns of `x`, found greedily left to right.
struct GreedyQr {
    q: Vec<DVector<f64>>,
    r: DMatrix<f64>,
    kept: Vec<usize>,
    scale: Vec<f64>,
}

fn greedy_qr(x: &DMatrix<f64>) -> GreedyQr {
    let p = x.ncols();
    let mut q: Vec<DVector<f64>> = Vec::with_capacity(p);
    let mut kept = Vec::with_capacity(p);
    let mut scale = Vec::with_capacity(p);
    let mut r_cols: Vec<Vec<f64>> = Vec::with_capacity(p);
    for k in 0..p {
        let col = x.column(k).into_owned();
        let norm = col.norm();
        if norm == 0.0 || !norm.is_finite() {
            continue;
        }
        let mut v = col / norm;
        let mut coeffs = vec![0.0; q.len()];
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let c = qi.dot(&v);
                coeffs[i] += c;
                v.axpy(-c, qi, 1.0);
            }
        }
        let rest = v.norm();
        if rest <= RANK_TOL {
            continue;
        }
        coeffs.push(rest);
        q.push(v / rest);
        kept.push(k);
        scale.push(norm);
        r_cols.push(coeffs);
    }
    let r_dim = kept.len();
    let mut r = DMatrix::zeros(r_dim, r_dim);
    for (j, c) in r_cols.iter().enumerate() {
        for (i, v) in c.iter().enumerate() {
            r[(i, j)] = *v;
        }
    }
    GreedyQr { q, r, kept, scale }
}

/// Ordinary least squares of `y` on the columns of `x`. Columns that are
/// numerically dependent on earlier ones are dropped and reported.
pub fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> LeastSquares {
    let p = x.ncols();
    let qr = greedy_qr(x);
    let mut coeffs = DVector::zeros(p);
    let mut fitted = DVector::zeros(y.len());
    if !qr.kept.is_empty() {
        let qty = DVector::from_iterator(qr.q.len(), qr.q.iter().map(|qi| qi.dot(y)));
        let b =
            qr.r.solve_upper_triangular(&qty)
                .expect("R has a positive diagonal by construction");
        for (j, &k) in qr.kept.iter().enumerate() {
            coeffs[k] = b[j] / qr.scale[j];
        }
        for (qi, c) in qr.q.iter().zip(qty.iter()) {
            fitted.axpy(*c, qi, 1.0);
        }
    }
    let rss = (y - fitted).norm_squared();
    let dropped = (0..p).filter(|k| !qr.kept.contains(k)).collect();
    LeastSquares {
        coeffs,
        rss,
        dropped,
    }
}

/// Selects a subset of columns.
pub fn select_columns(x: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), cols.len(), |i, j| x[(i, cols[j])])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fit_recovers_coefficients() {
        let x = DMatrix::from_fn(20, 3, |i, j| ((i + 1) as f64).powi(j as i32));
        let beta = DVector::from_vec(vec![1.5, -2.0, 0.25]);
        let y = &x * &beta;
        let ls = least_squares(&x, &y);
        assert!((ls.coeffs - beta).amax() < 1e-9);
        assert!(ls.rss < 1e-16);
        assert!(ls.dropped.is_empty());
    }

    #[test]
    fn duplicated_column_is_dropped() {
        let base = DMatrix::from_fn(10, 2, |i, j| (i as f64 + 1.0).powi(j as i32 + 1));
        let x = DMatrix::from_fn(10, 3, |i, j| base[(i, j.min(1))]);
        let y = DVector::from_fn(10, |i, _| 2.0 * base[(i, 1)] + base[(i, 0)]);
        let ls = least_squares(&x, &y);
        assert_eq!(ls.dropped, vec![2]);
        assert!((ls.coeffs[0] - 1.0).abs() < 1e-9 && (ls.coeffs[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn sd_uses_n_minus_one() {
        assert!((sample_sd(&[1.0, 2.0, 3.0, 4.0]) - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
