//! End-to-end identification: smoothing, library, screening and Bayesian
//! term selection for every state variable.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::{self, BayesConfig, PosteriorSummary, TermEstimate};
use crate::diagnostics::{self, DiagnosticsReport};
use crate::error::{Error, Result};
use crate::library::{CandidateLibrary, TermDescriptor};
use crate::linalg::{least_squares, select_columns};
use crate::ode::{DynamicalSystem, Snr};
use crate::screen::{self, CvFolds, LassoOptions};
use crate::seed::{self, Stream};
use crate::smoothing::{smooth_and_differentiate_with, SmoothedData, WindowCriterion};
use crate::trajectory::Trajectory;

#[derive(Debug, Clone)]
pub struct DiscoverConfig {
    pub degree: u32,
    pub trig: bool,
    pub bayes: BayesConfig,
    pub lasso: LassoOptions,
    pub window_criterion: WindowCriterion,
    pub seed: u64,
    pub diagnostics: bool,
    /// Recorded in the model metadata only.
    pub snr: Option<Snr>,
}

impl Default for DiscoverConfig {
    fn default() -> Self {
        Self {
            degree: 5,
            trig: false,
            bayes: BayesConfig::default(),
            lasso: LassoOptions::default(),
            window_criterion: WindowCriterion::default(),
            seed: 0,
            diagnostics: false,
            snr: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquationModel {
    pub lhs: String,
    pub terms: Vec<TermEstimate>,
    /// Terms passed from screening to the Bayesian stage.
    #[serde(default)]
    pub screened_terms: Vec<String>,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rhat: Option<f64>,
    /// Set when the posterior was improper and OLS estimates were kept.
    #[serde(default)]
    pub ols_fallback: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub n: usize,
    pub dim: usize,
    pub dt: f64,
    pub snr_db: Option<Snr>,
    pub seed: u64,
    pub degree: u32,
    pub trig: bool,
    pub windows: Vec<usize>,
    pub converged: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveredModel {
    pub equations: Vec<EquationModel>,
    pub meta: ModelMeta,
    #[serde(skip)]
    pub diagnostics: Vec<Option<DiagnosticsReport>>,
}

impl DiscoveredModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Retained term names of every equation.
    pub fn supports(&self) -> Vec<Vec<String>> {
        self.equations
            .iter()
            .map(|e| e.terms.iter().map(|t| t.name.clone()).collect())
            .collect()
    }

    /// One line per equation, e.g. `dx1/dt = -10.0021 x1 + 10.0013 x2`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for eq in &self.equations {
            let _ = write!(out, "{} =", eq.lhs);
            if eq.terms.is_empty() {
                out.push_str(" 0");
            }
            for (i, t) in eq.terms.iter().enumerate() {
                let sign = if t.mean < 0.0 { '-' } else { '+' };
                let mag = t.mean.abs();
                let body = if t.name == "1" {
                    format!("{mag:.4}")
                } else {
                    format!("{mag:.4} {}", t.name)
                };
                match (i, sign) {
                    (0, '-') => {
                        let _ = write!(out, " -{body}");
                    }
                    (0, _) => {
                        let _ = write!(out, " {body}");
                    }
                    _ => {
                        let _ = write!(out, " {sign} {body}");
                    }
                }
            }
            if let Some(e) = &eq.error {
                let _ = write!(out, "    [failed: {e}]");
            } else if !eq.converged {
                out.push_str("    [not converged]");
            }
            out.push('\n');
        }
        out
    }
}

/// Per-equation sub-seeds.
pub fn equation_seeds(master: u64, eq: usize) -> (u64, u64) {
    let e = eq as u64;
    (
        seed::derive(master, Stream::Folds, &[e]),
        seed::derive(master, Stream::Chain, &[e]),
    )
}

struct EquationRun {
    model: EquationModel,
    diagnostics: Option<DiagnosticsReport>,
}

fn ols_fallback(lib: &CandidateLibrary, y: &DVector<f64>) -> Vec<TermEstimate> {
    let ls = least_squares(&lib.theta, y);
    lib.terms
        .iter()
        .zip(ls.coeffs.iter())
        .filter(|(_, c)| **c != 0.0)
        .map(|(t, c)| TermEstimate {
            name: t.name().to_string(),
            mean: *c,
            ci_lo: *c,
            ci_hi: *c,
        })
        .collect()
}

fn run_equation(
    lib0: &CandidateLibrary,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    j: usize,
    cfg: &DiscoverConfig,
) -> Result<EquationRun> {
    let (fold_seed, chain_seed) = equation_seeds(cfg.seed, j);
    let lasso = LassoOptions {
        cv: match cfg.lasso.cv {
            CvFolds::Shuffled { .. } => CvFolds::Shuffled { seed: fold_seed },
            CvFolds::Contiguous => CvFolds::Contiguous,
        },
        ..cfg.lasso
    };
    let screened = screen::screen(lib0, x, y, &lasso)?;
    let mut model = EquationModel {
        lhs: format!("dx{}/dt", j + 1),
        terms: Vec::new(),
        screened_terms: screened
            .support
            .iter()
            .map(|t| t.name().to_string())
            .collect(),
        converged: true,
        max_rhat: None,
        ols_fallback: false,
        error: None,
    };
    if screened.support.is_empty() {
        return Ok(EquationRun {
            model,
            diagnostics: None,
        });
    }
    let bcfg = BayesConfig {
        seed: chain_seed,
        ..cfg.bayes
    };
    let draws = match bayes::hmc_sample(&screened.library, y, &bcfg) {
        Ok(d) => d,
        Err(Error::DegeneratePosterior(why)) => {
            log::warn!("{}: {why}; keeping OLS estimates", model.lhs);
            model.terms = ols_fallback(&screened.library, y);
            model.ols_fallback = true;
            return Ok(EquationRun {
                model,
                diagnostics: None,
            });
        }
        Err(e) => return Err(e),
    };
    let summary: PosteriorSummary = bayes::summarize(draws, &bcfg)?;
    model.terms = bayes::select_terms(&summary, &screened.library);
    model.converged = summary.converged();
    model.max_rhat = Some(summary.max_rhat());
    let diagnostics = if cfg.diagnostics {
        Some(diagnostics::diagnose(
            &summary,
            &screened.library,
            &screened.refined,
            y,
        )?)
    } else {
        None
    };
    Ok(EquationRun { model, diagnostics })
}

/// Smoothed data and full candidate library shared by all equations.
pub struct Prepared {
    pub smoothed: SmoothedData,
    pub library: CandidateLibrary,
}

pub fn prepare(traj: &Trajectory, cfg: &DiscoverConfig) -> Result<Prepared> {
    cfg.bayes.validate()?;
    let smoothed = smooth_and_differentiate_with(traj, cfg.window_criterion)?;
    let library = CandidateLibrary::build(&smoothed.x, cfg.degree, cfg.trig)?;
    Ok(Prepared { smoothed, library })
}

/// Identifies equation `j`. Failures are folded into the returned model.
pub fn discover_equation(
    prep: &Prepared,
    j: usize,
    cfg: &DiscoverConfig,
) -> (EquationModel, Option<DiagnosticsReport>) {
    let dim = prep.smoothed.xdot.ncols();
    let result = if j < dim {
        let y: DVector<f64> = prep.smoothed.xdot.column(j).into_owned();
        run_equation(&prep.library, &prep.smoothed.x, &y, j, cfg)
    } else {
        Err(Error::DimensionMismatch {
            expected: dim,
            actual: j + 1,
        })
    };
    match result {
        Ok(run) => (run.model, run.diagnostics),
        Err(e) => {
            log::warn!("equation dx{}/dt failed: {e}", j + 1);
            let model = EquationModel {
                lhs: format!("dx{}/dt", j + 1),
                terms: Vec::new(),
                screened_terms: Vec::new(),
                converged: false,
                max_rhat: None,
                ols_fallback: false,
                error: Some(e.to_string()),
            };
            (model, None)
        }
    }
}

/// Smooths the trajectory once, then identifies each equation independently.
/// A failing equation is reported empty with its error; the others proceed.
pub fn discover(traj: &Trajectory, cfg: &DiscoverConfig) -> Result<DiscoveredModel> {
    let prep = prepare(traj, cfg)?;
    let (equations, diags): (Vec<_>, Vec<_>) = (0..traj.dim())
        .into_par_iter()
        .map(|j| discover_equation(&prep, j, cfg))
        .unzip();
    let meta = ModelMeta {
        n: traj.len(),
        dim: traj.dim(),
        dt: traj.dt,
        snr_db: cfg.snr,
        seed: cfg.seed,
        degree: cfg.degree,
        trig: cfg.trig,
        windows: prep.smoothed.window_per_column.clone(),
        converged: equations
            .iter()
            .map(|e| e.converged && e.error.is_none())
            .collect(),
    };
    Ok(DiscoveredModel {
        equations,
        meta,
        diagnostics: diags,
    })
}

/// Recomputes diagnostics for a previously identified model on the same data:
/// the screened terms are refitted with the recorded seed. VIFs are scored on
/// the library refined to the degree of the screened terms.
pub fn rediagnose(
    traj: &Trajectory,
    model: &DiscoveredModel,
    bayes_cfg: &BayesConfig,
) -> Result<Vec<Option<DiagnosticsReport>>> {
    if model.meta.dim != traj.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.meta.dim,
            actual: traj.dim(),
        });
    }
    let sm = smooth_and_differentiate_with(traj, WindowCriterion::default())?;
    model
        .equations
        .iter()
        .enumerate()
        .map(|(j, eq)| {
            if eq.screened_terms.is_empty() {
                return Ok(None);
            }
            let terms = eq
                .screened_terms
                .iter()
                .map(|n| TermDescriptor::parse(n, traj.dim()))
                .collect::<Result<Vec<_>>>()?;
            let full = CandidateLibrary::build(&sm.x, model.meta.degree, model.meta.trig)?;
            let refined = full.refine(&terms, &sm.x)?;
            let lib = CandidateLibrary::from_terms(&sm.x, terms)?;
            let y: DVector<f64> = sm.xdot.column(j).into_owned();
            let (_, chain_seed) = equation_seeds(model.meta.seed, j);
            let cfg = BayesConfig {
                seed: chain_seed,
                ..*bayes_cfg
            };
            let draws = match bayes::hmc_sample(&lib, &y, &cfg) {
                Ok(d) => d,
                Err(Error::DegeneratePosterior(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
            let summary = bayes::summarize(draws, &cfg)?;
            diagnostics::diagnose(&summary, &lib, &refined, &y).map(Some)
        })
        .collect()
}

fn term_set(names: impl IntoIterator<Item = String>, dim: usize) -> Result<BTreeSet<String>> {
    names
        .into_iter()
        .map(|n| TermDescriptor::parse(&n, dim).map(|t| t.name().to_string()))
        .collect()
}

/// True iff every equation's retained terms equal the ground-truth terms.
pub fn compare_truth(model: &DiscoveredModel, sys: &DynamicalSystem) -> Result<bool> {
    supports_match(&model.supports(), sys)
}

/// Support comparison on bare term-name lists, shared with baselines.
pub fn supports_match(supports: &[Vec<String>], sys: &DynamicalSystem) -> Result<bool> {
    if supports.len() != sys.dim {
        return Err(Error::DimensionMismatch {
            expected: sys.dim,
            actual: supports.len(),
        });
    }
    let truth = sys.truth();
    for (got, want) in supports.iter().zip(truth) {
        let got = term_set(got.iter().cloned(), sys.dim)?;
        let want = term_set(want.iter().map(|t| t.name().to_string()), sys.dim)?;
        if got != want {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Coefficients of the retained terms as an `m x p` matrix over `lib`'s terms.
pub fn coefficient_matrix(model: &DiscoveredModel, terms: &[TermDescriptor]) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(model.equations.len(), terms.len());
    for (i, eq) in model.equations.iter().enumerate() {
        for t in &eq.terms {
            if let Some(k) = terms.iter().position(|d| d.name() == t.name) {
                b[(i, k)] = t.mean;
            }
        }
    }
    b
}

/// Columns of `lib` matching `names`, for refitting a known support.
pub fn support_columns(lib: &CandidateLibrary, names: &[String]) -> Vec<usize> {
    names
        .iter()
        .filter_map(|n| lib.terms.iter().position(|t| t.name() == n))
        .collect()
}

pub fn restrict(lib: &CandidateLibrary, cols: &[usize]) -> DMatrix<f64> {
    select_columns(&lib.theta, cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::builtin_system;

    fn model_with(supports: Vec<Vec<&str>>) -> DiscoveredModel {
        DiscoveredModel {
            equations: supports
                .into_iter()
                .enumerate()
                .map(|(j, s)| EquationModel {
                    lhs: format!("dx{}/dt", j + 1),
                    terms: s
                        .into_iter()
                        .map(|n| TermEstimate {
                            name: n.into(),
                            mean: 1.0,
                            ci_lo: 0.5,
                            ci_hi: 1.5,
                        })
                        .collect(),
                    screened_terms: vec![],
                    converged: true,
                    max_rhat: Some(1.0),
                    ols_fallback: false,
                    error: None,
                })
                .collect(),
            meta: ModelMeta {
                n: 10,
                dim: 3,
                dt: 0.1,
                snr_db: Some(Snr::Infinite),
                seed: 0,
                degree: 5,
                trig: false,
                windows: vec![13; 3],
                converged: vec![true; 3],
            },
            diagnostics: vec![],
        }
    }

    #[test]
    fn truth_comparison() {
        let lorenz = builtin_system("lorenz").unwrap();
        let exact = model_with(vec![
            vec!["x1", "x2"],
            vec!["x1", "x2", "x1*x3"],
            vec!["x1*x2", "x3"],
        ]);
        assert!(compare_truth(&exact, &lorenz).unwrap());
        let reordered = model_with(vec![
            vec!["x2", "x1"],
            vec!["x1*x3", "x2", "x1"],
            vec!["x3", "x1*x2"],
        ]);
        assert!(compare_truth(&reordered, &lorenz).unwrap());
        let extra = model_with(vec![
            vec!["1", "x1", "x2"],
            vec!["x1", "x2", "x1*x3"],
            vec!["x1*x2", "x3"],
        ]);
        assert!(!compare_truth(&extra, &lorenz).unwrap());
        let missing = model_with(vec![
            vec!["x1", "x2"],
            vec!["x1", "x1*x3"],
            vec!["x1*x2", "x3"],
        ]);
        assert!(!compare_truth(&missing, &lorenz).unwrap());
        let short = model_with(vec![vec!["x1"]]);
        assert!(compare_truth(&short, &lorenz).is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = model_with(vec![vec!["x1"], vec![], vec!["sin(x2)"]]);
        let back = DiscoveredModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        let v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        assert_eq!(v["equations"][0]["lhs"], "dx1/dt");
        assert_eq!(v["equations"][0]["terms"][0]["name"], "x1");
        assert_eq!(v["meta"]["snr_db"], "inf");
    }

    #[test]
    fn text_rendering() {
        let mut m = model_with(vec![vec!["x1", "x2"], vec![], vec!["1"]]);
        m.equations[0].terms[0].mean = -10.0;
        let text = m.to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "dx1/dt = -10.0000 x1 + 1.0000 x2");
        assert_eq!(lines[1], "dx2/dt = 0");
        assert_eq!(lines[2], "dx3/dt = 1.0000");
    }
}
