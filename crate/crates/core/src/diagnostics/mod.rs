//! Reliability diagnostics for an identified equation.

mod modes;
mod psis;
mod vif;

pub use modes::{analyze_affine_modes, Eigenvalue, ModalAnalysis, MAX_CONDITION};
pub use psis::{fit_gpd, khat, psis_loo, tail_length, MIN_DRAWS};
pub use vif::vif;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::bayes::{Draws, PosteriorSummary};
use crate::error::{Error, Result};
use crate::library::CandidateLibrary;

pub const VIF_THRESHOLD: f64 = 10.0;
pub const KHAT_THRESHOLD: f64 = 0.7;
pub const RHAT_THRESHOLD: f64 = 1.1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosticFlags {
    pub multicollinearity: bool,
    pub influential: bool,
    pub convergence: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsReport {
    /// `(term, VIF)`; `None` for the intercept.
    pub vif: Vec<(String, Option<f64>)>,
    pub khat: Vec<f64>,
    /// `(posterior predictive mean, residual)` per observation.
    pub residual_pairs: Vec<(f64, f64)>,
    pub flags: DiagnosticFlags,
}

fn number(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v > 0.0 {
        json!("inf")
    } else if v < 0.0 {
        json!("-inf")
    } else {
        Value::Null
    }
}

impl DiagnosticsReport {
    pub fn to_json(&self) -> Value {
        let mut vif = Map::new();
        for (name, v) in &self.vif {
            vif.insert(name.clone(), v.map_or(Value::Null, number));
        }
        json!({
            "vif": vif,
            "khat": self.khat.iter().map(|k| number(*k)).collect::<Vec<_>>(),
            "residuals": self.residual_pairs.iter().map(|(m, r)| json!([m, r])).collect::<Vec<_>>(),
            "flags": self.flags,
        })
    }
}

/// Posterior predictive means `Theta_i E[beta]` and the matching residuals.
pub fn residual_diagnostics(
    draws: &Draws,
    trimmed: &CandidateLibrary,
    y: &DVector<f64>,
) -> Result<Vec<(f64, f64)>> {
    let k = draws.n_coeffs();
    if trimmed.n_terms() != k || trimmed.n_rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: trimmed.n_terms(),
        });
    }
    let all = draws.stacked();
    let mean = DVector::from_iterator(
        k,
        (0..k).map(|j| crate::bayes::summary::mean(all.column(j).as_slice())),
    );
    let mu = &trimmed.theta * mean;
    Ok(mu.iter().zip(y.iter()).map(|(m, v)| (*m, v - m)).collect())
}

/// All diagnostics for one equation. `trimmed` is the library the posterior
/// was sampled on; VIFs are scored on `collinearity`, normally the refined
/// library the final support was selected from.
pub fn diagnose(
    summary: &PosteriorSummary,
    trimmed: &CandidateLibrary,
    collinearity: &CandidateLibrary,
    y: &DVector<f64>,
) -> Result<DiagnosticsReport> {
    let vif: Vec<(String, Option<f64>)> = collinearity
        .names()
        .into_iter()
        .zip(vif(collinearity))
        .collect();
    let khat = psis_loo(&summary.draws, trimmed, y)?;
    let residual_pairs = residual_diagnostics(&summary.draws, trimmed, y)?;
    let flags = DiagnosticFlags {
        multicollinearity: vif
            .iter()
            .any(|(_, v)| v.is_some_and(|v| v > VIF_THRESHOLD)),
        influential: khat.iter().any(|k| *k > KHAT_THRESHOLD),
        convergence: summary.max_rhat() >= RHAT_THRESHOLD,
    };
    Ok(DiagnosticsReport {
        vif,
        khat,
        residual_pairs,
        flags,
    })
}
