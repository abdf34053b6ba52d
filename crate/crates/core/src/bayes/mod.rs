//! Bayesian linear regression on a trimmed library, sampled with HMC, and
//! credible-interval term selection.

mod hmc;
mod posterior;
pub mod summary;

pub use hmc::{
    leapfrog, run_chain, ChainOutput, HmcSettings, Phase, Target, Whitened, DIVERGENCE_THRESHOLD,
};
pub use posterior::{LinearPosterior, PRIOR_SCALE};

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::library::CandidateLibrary;
use crate::seed::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BayesConfig {
    pub chains: usize,
    pub iters: usize,
    pub warmup: usize,
    pub ci_level: f64,
    pub target_accept: f64,
    pub max_leapfrog: usize,
    pub seed: u64,
    /// Fix the noise scale instead of sampling it.
    pub fixed_sigma: Option<f64>,
}

impl Default for BayesConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            iters: 2000,
            warmup: 1000,
            ci_level: 0.90,
            target_accept: 0.8,
            max_leapfrog: 32,
            seed: 0,
            fixed_sigma: None,
        }
    }
}

impl BayesConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains < 1 || self.warmup >= self.iters {
            return Err(Error::InvalidArgument(
                "need chains >= 1 and warmup < iters".into(),
            ));
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(Error::InvalidArgument("ci_level must lie in (0, 1)".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::InvalidArgument(
                "target_accept must lie in (0, 1)".into(),
            ));
        }
        if self.max_leapfrog < 1 {
            return Err(Error::InvalidArgument("max_leapfrog must be >= 1".into()));
        }
        Ok(())
    }
}

/// Post-warmup draws: one matrix per chain with a column per coefficient
/// followed by `sigma`.
#[derive(Debug, Clone)]
pub struct Draws {
    pub names: Vec<String>,
    pub chains: Vec<DMatrix<f64>>,
    pub divergences: usize,
    pub step_sizes: Vec<f64>,
}

impl Draws {
    pub fn n_coeffs(&self) -> usize {
        self.names.len()
    }

    pub fn n_draws(&self) -> usize {
        self.chains.iter().map(|c| c.nrows()).sum()
    }

    /// Draws of column `j` split by chain.
    pub fn column(&self, j: usize) -> Vec<Vec<f64>> {
        self.chains
            .iter()
            .map(|c| c.column(j).iter().copied().collect())
            .collect()
    }

    /// All draws stacked chain after chain.
    pub fn stacked(&self) -> DMatrix<f64> {
        let cols = self.n_coeffs() + 1;
        let mut out = DMatrix::zeros(self.n_draws(), cols);
        let mut r = 0;
        for c in &self.chains {
            out.view_mut((r, 0), (c.nrows(), cols)).copy_from(c);
            r += c.nrows();
        }
        out
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["chain".to_string(), "iter".to_string()];
        header.extend(self.names.iter().map(|n| format!("beta_{n}")));
        header.push("sigma".into());
        wr.write_record(&header)?;
        for (c, m) in self.chains.iter().enumerate() {
            for i in 0..m.nrows() {
                let mut rec = vec![c.to_string(), i.to_string()];
                rec.extend(m.row(i).iter().map(|v| format!("{v:.16e}")));
                wr.write_record(&rec)?;
            }
        }
        wr.flush().map_err(|e| Error::io("<draws>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

/// Samples the posterior of the coefficients of `trimmed` and the noise scale.
pub fn hmc_sample(
    trimmed: &CandidateLibrary,
    y: &DVector<f64>,
    cfg: &BayesConfig,
) -> Result<Draws> {
    cfg.validate()?;
    let post = LinearPosterior::new(&trimmed.theta, y, cfg.fixed_sigma)?;
    let (centre, l) = post.laplace();
    let w = Whitened::new(&post, centre, l);
    let settings = HmcSettings {
        iters: cfg.iters,
        warmup: cfg.warmup,
        target_accept: cfg.target_accept,
        max_leapfrog: cfg.max_leapfrog,
        init_radius: 2.0,
    };
    let k = post.n_coeffs();
    let mut chains = Vec::with_capacity(cfg.chains);
    let mut divergences = 0;
    let mut step_sizes = Vec::with_capacity(cfg.chains);
    for c in 0..cfg.chains {
        let mut rng = seed::rng(seed::derive(cfg.seed, Stream::Chain, &[c as u64]));
        let out = run_chain(&w, &settings, &mut rng);
        divergences += out.divergences;
        step_sizes.push(out.step_size);
        let mut m = DMatrix::zeros(out.draws.nrows(), k + 1);
        m.view_mut((0, 0), (out.draws.nrows(), k))
            .copy_from(&out.draws.columns(0, k));
        match cfg.fixed_sigma {
            Some(s) => m.column_mut(k).fill(s),
            None => m
                .column_mut(k)
                .copy_from(&out.draws.column(k).map(f64::exp)),
        }
        chains.push(m);
    }
    let total = cfg.chains * (cfg.iters - cfg.warmup);
    if divergences * 10 > total {
        return Err(Error::DivergenceRate {
            diverged: divergences,
            total,
        });
    }
    Ok(Draws {
        names: trimmed.names(),
        chains,
        divergences,
        step_sizes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSummary {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub rhat: f64,
    pub ess: f64,
    pub mcse: f64,
    pub retained: bool,
}

#[derive(Debug, Clone)]
pub struct PosteriorSummary {
    pub terms: Vec<TermSummary>,
    pub sigma_mean: f64,
    pub sigma_rhat: f64,
    pub draws: Draws,
}

impl PosteriorSummary {
    /// True when every split R-hat (coefficients and sigma) is below 1.1.
    pub fn converged(&self) -> bool {
        self.terms.iter().all(|t| t.rhat < 1.1) && !(self.sigma_rhat >= 1.1)
    }

    pub fn max_rhat(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.rhat)
            .fold(self.sigma_rhat, f64::max)
    }
}

/// Credible-interval retention: zero lies outside the interval and the
/// posterior mean inside it.
pub fn retained(mean: f64, lo: f64, hi: f64) -> bool {
    !(lo <= 0.0 && 0.0 <= hi) && lo <= mean && mean <= hi
}

fn summarize_column(name: String, chains: &[Vec<f64>], ci_level: f64) -> TermSummary {
    let mut all: Vec<f64> = chains.iter().flatten().copied().collect();
    let mean = summary::mean(&all);
    let sd = summary::variance(&all).max(0.0).sqrt();
    all.sort_by(f64::total_cmp);
    let a = (1.0 - ci_level) / 2.0;
    let ci_lo = summary::quantile_sorted(&all, a);
    let ci_hi = summary::quantile_sorted(&all, 1.0 - a);
    let rhat = if chains.len() >= 2 {
        summary::split_rhat(chains)
    } else {
        f64::NAN
    };
    let ess = summary::ess(chains);
    TermSummary {
        name,
        mean,
        sd,
        ci_lo,
        ci_hi,
        rhat,
        ess,
        mcse: sd / ess.sqrt(),
        retained: retained(mean, ci_lo, ci_hi),
    }
}

pub fn summarize(draws: Draws, cfg: &BayesConfig) -> Result<PosteriorSummary> {
    if draws.chains.len() < 2 {
        return Err(Error::InvalidArgument(
            "summaries need at least two chains".into(),
        ));
    }
    let k = draws.n_coeffs();
    let terms = (0..k)
        .map(|j| summarize_column(draws.names[j].clone(), &draws.column(j), cfg.ci_level))
        .collect();
    let sigma = draws.column(k);
    let all: Vec<f64> = sigma.iter().flatten().copied().collect();
    let summary = PosteriorSummary {
        terms,
        sigma_mean: summary::mean(&all),
        sigma_rhat: summary::split_rhat(&sigma),
        draws,
    };
    if !summary.converged() {
        log::warn!(
            "posterior not converged: max R-hat {:.3}",
            summary.max_rhat()
        );
    }
    Ok(summary)
}

/// A retained term of an identified equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermEstimate {
    pub name: String,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Retained terms in library order; empty when nothing survives.
pub fn select_terms(summary: &PosteriorSummary, trimmed: &CandidateLibrary) -> Vec<TermEstimate> {
    let out: Vec<TermEstimate> = summary
        .terms
        .iter()
        .zip(&trimmed.terms)
        .filter(|(s, _)| s.retained)
        .map(|(s, t)| TermEstimate {
            name: t.name().to_string(),
            mean: s.mean,
            ci_lo: s.ci_lo,
            ci_hi: s.ci_hi,
        })
        .collect();
    if out.is_empty() {
        log::warn!("no term retained; equation is identically zero");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::TermDescriptor;

    fn draws_from(cols: Vec<Vec<Vec<f64>>>) -> Draws {
        // cols[j][c] = draws of coefficient j in chain c
        let k = cols.len();
        let chains = (0..cols[0].len())
            .map(|c| {
                let s = cols[0][c].len();
                DMatrix::from_fn(s, k + 1, |i, j| if j < k { cols[j][c][i] } else { 1.0 })
            })
            .collect();
        Draws {
            names: (0..k).map(|j| format!("t{j}")).collect(),
            chains,
            divergences: 0,
            step_sizes: vec![],
        }
    }

    #[test]
    fn constant_draws_are_retained() {
        let d = draws_from(vec![vec![vec![1.7; 50]; 4]]);
        let s = summarize(d, &BayesConfig::default()).unwrap();
        assert_eq!((s.terms[0].ci_lo, s.terms[0].ci_hi), (1.7, 1.7));
        assert!(s.terms[0].retained);
    }

    #[test]
    fn symmetric_draws_are_dropped() {
        let chain: Vec<f64> = (0..200).map(|i| (i as f64 - 99.5) / 10.0).collect();
        let d = draws_from(vec![vec![chain; 4]]);
        let s = summarize(d, &BayesConfig::default()).unwrap();
        assert!(!s.terms[0].retained);
    }

    #[test]
    fn retention_rule() {
        assert!(retained(1.0, 0.5, 1.5));
        assert!(retained(-1.0, -1.5, -0.5));
        assert!(!retained(0.2, -0.1, 0.5));
        assert!(!retained(2.0, 0.5, 1.5));
        assert!(!retained(0.0, 0.0, 1.0));
    }

    #[test]
    fn select_passes_retained_terms_through() {
        let d = draws_from(vec![
            vec![vec![10.0; 20]; 2],
            vec![[-1.0, 1.0].repeat(10); 2],
        ]);
        let s = summarize(d, &BayesConfig::default()).unwrap();
        let x = DMatrix::from_fn(5, 2, |i, j| (i + j) as f64);
        let lib = CandidateLibrary::from_terms(
            &x,
            vec![
                TermDescriptor::power(2, 1, 1),
                TermDescriptor::power(2, 0, 1),
            ],
        )
        .unwrap();
        let sel = select_terms(&s, &lib);
        assert_eq!(sel.len(), 1);
        assert_eq!(sel[0].name, "x2");
        assert_eq!(sel[0].mean, 10.0);
    }

    #[test]
    fn draw_dump_header() {
        let d = draws_from(vec![vec![vec![1.0; 3]; 2]]);
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "chain,iter,beta_t0,sigma");
        assert_eq!(text.lines().count(), 7);
    }
}
