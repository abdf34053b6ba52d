//! Equilibrium and eigen-structure of affine linear systems `z' = A z + b`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalAnalysis {
    pub equilibrium: Vec<f64>,
    /// Sorted by decreasing real part, conjugate pairs adjacent with the
    /// positive imaginary part first.
    pub eigenvalues: Vec<Eigenvalue>,
    /// `2 pi / Im` for each oscillatory pair.
    pub periods: Vec<f64>,
    /// `ln 2 / |Re|` for every eigenvalue.
    pub half_lives: Vec<f64>,
    /// `1 / |Re|` for each real eigenvalue.
    pub decay_timescales: Vec<f64>,
}

/// Treats eigenvalues with `|Im|` below this (relative to the spectral
/// radius) as real.
const REAL_TOL: f64 = 1e-12;

pub fn analyze_affine_modes(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<ModalAnalysis> {
    let m = a.nrows();
    if a.ncols() != m || b.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: b.len(),
        });
    }
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if !(condition < MAX_CONDITION) {
        return Err(Error::SingularMatrix { condition });
    }
    let z = a
        .clone()
        .lu()
        .solve(&(-b))
        .ok_or(Error::SingularMatrix { condition })?;
    let radius = smax.max(f64::MIN_POSITIVE);
    let mut eig: Vec<Eigenvalue> = a
        .complex_eigenvalues()
        .iter()
        .map(|c| Eigenvalue {
            re: c.re,
            im: if c.im.abs() <= REAL_TOL * radius {
                0.0
            } else {
                c.im
            },
        })
        .collect();
    eig.sort_by(|x, y| y.re.total_cmp(&x.re).then(y.im.total_cmp(&x.im)));
    let periods = eig
        .iter()
        .filter(|e| e.im > 0.0)
        .map(|e| 2.0 * std::f64::consts::PI / e.im)
        .collect();
    let half_lives = eig
        .iter()
        .map(|e| std::f64::consts::LN_2 / e.re.abs())
        .collect();
    let decay_timescales = eig
        .iter()
        .filter(|e| e.im == 0.0)
        .map(|e| 1.0 / e.re.abs())
        .collect();
    Ok(ModalAnalysis {
        equilibrium: z.iter().copied().collect(),
        eigenvalues: eig,
        periods,
        half_lives,
        decay_timescales,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negative_identity() {
        let r = analyze_affine_modes(&-DMatrix::<f64>::identity(3, 3), &DVector::zeros(3)).unwrap();
        assert_eq!(r.equilibrium, vec![0.0; 3]);
        assert!(r
            .eigenvalues
            .iter()
            .all(|e| (e.re + 1.0).abs() < 1e-12 && e.im == 0.0));
        assert!(r.decay_timescales.iter().all(|t| (t - 1.0).abs() < 1e-12));
        assert!(r.periods.is_empty());
    }

    #[test]
    fn diagonal_closed_form() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, -3.0]));
        let r = analyze_affine_modes(&a, &DVector::from_vec(vec![-2.0, 3.0])).unwrap();
        assert!((r.equilibrium[0] - 1.0).abs() < 1e-14 && (r.equilibrium[1] - 1.0).abs() < 1e-14);
        assert!((r.eigenvalues[0].re - 2.0).abs() < 1e-12);
        assert!((r.eigenvalues[1].re + 3.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_pair() {
        let a = DMatrix::from_row_slice(2, 2, &[-0.1, 2.0, -2.0, -0.1]);
        let r = analyze_affine_modes(&a, &DVector::zeros(2)).unwrap();
        assert_eq!(r.eigenvalues.len(), 2);
        assert!(
            (r.eigenvalues[0].im - 2.0).abs() < 1e-12 && (r.eigenvalues[1].im + 2.0).abs() < 1e-12
        );
        assert!((r.periods[0] - std::f64::consts::PI).abs() < 1e-12);
        assert!((r.half_lives[0] - std::f64::consts::LN_2 / 0.1).abs() < 1e-9);
    }

    #[test]
    fn singular_matrix_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(
            analyze_affine_modes(&a, &DVector::zeros(2)),
            Err(Error::SingularMatrix { .. })
        ));
    }
}
