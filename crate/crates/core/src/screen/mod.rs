//! Two-pass frequentist screening: pilot estimate, adaptive lasso, and a
//! threshold sweep with OLS refits, run once on the initial library and again
//! on a library refined to the selected degree.

mod design;
mod lasso;
mod ridge;
mod sweep;

pub use design::CvFolds;
pub use lasso::{
    adaptive_lasso, adaptive_weights, kkt_violation, lasso_at, lasso_objective,
    original_scale_weights, refined_grid, two_phase_lambda, LassoOptions, LassoPath, PilotKind,
    WeightScale,
};
pub use ridge::{ridge_at, ridge_pilot};
pub use sweep::{bic, refit, sweep_candidates, threshold_sweep, SparseFit, RSS_FLOOR, THRESHOLDS};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::library::{CandidateLibrary, TermDescriptor};
use crate::linalg::{least_squares, select_columns};

#[derive(Debug, Clone)]
pub struct PassResult {
    pub lasso: LassoPath,
    pub fit: SparseFit,
}

#[derive(Debug, Clone)]
pub struct ScreenResult {
    /// Selected terms after the second pass.
    pub support: Vec<TermDescriptor>,
    /// The refined library restricted to `support`.
    pub library: CandidateLibrary,
    /// The full refined library used in the second pass.
    pub refined: CandidateLibrary,
    pub pass1: PassResult,
    pub pass2: PassResult,
}

fn run_pass(
    lib: &CandidateLibrary,
    y: &DVector<f64>,
    pilot: &DVector<f64>,
    kind: PilotKind,
    opts: &LassoOptions,
) -> Result<PassResult> {
    let weights = adaptive_weights(pilot, 1.0);
    let lasso = adaptive_lasso(lib, y, &weights, kind, opts)?;
    let fit = threshold_sweep(lib, y, &lasso.coeffs);
    Ok(PassResult { lasso, fit })
}

/// Pilot for the second pass: OLS on the columns carried over from the
/// first pass, ridge on the full library for everything else.
fn second_pilot(
    lib: &CandidateLibrary,
    y: &DVector<f64>,
    carried: &[usize],
    cv: CvFolds,
) -> DVector<f64> {
    let mut pilot = ridge_pilot(lib, y, cv);
    if !carried.is_empty() {
        let ols = least_squares(&select_columns(&lib.theta, carried), y);
        for (j, &k) in carried.iter().enumerate() {
            if !ols.dropped.contains(&j) {
                pilot[k] = ols.coeffs[j];
            }
        }
    }
    pilot
}

/// Screens one equation. `x` are the (smoothed) states `lib0` was built from
/// and `y` the matching derivative column.
pub fn screen(
    lib0: &CandidateLibrary,
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    opts: &LassoOptions,
) -> Result<ScreenResult> {
    if y.len() != lib0.n_rows() || x.nrows() != lib0.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: lib0.n_rows(),
            actual: y.len(),
        });
    }
    if y.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: y.len(),
        });
    }
    let pass1 = run_pass(
        lib0,
        y,
        &ridge_pilot(lib0, y, opts.cv),
        PilotKind::Ridge,
        opts,
    )?;
    let terms1: Vec<TermDescriptor> = pass1
        .fit
        .support
        .iter()
        .map(|&k| lib0.terms[k].clone())
        .collect();
    let refined = match lib0.refine(&terms1, x) {
        Ok(lib) => lib,
        Err(Error::EmptySupport) => {
            log::info!("first pass selected nothing; second pass reuses the initial library");
            lib0.clone()
        }
        Err(e) => return Err(e),
    };
    let carried: Vec<usize> = terms1.iter().filter_map(|t| refined.index_of(t)).collect();
    let pilot = second_pilot(&refined, y, &carried, opts.cv);
    let pass2 = run_pass(&refined, y, &pilot, PilotKind::Ols, opts)?;
    let support = pass2
        .fit
        .support
        .iter()
        .map(|&k| refined.terms[k].clone())
        .collect();
    let library = refined.subset(&pass2.fit.support);
    Ok(ScreenResult {
        support,
        library,
        refined,
        pass1,
        pass2,
    })
}
