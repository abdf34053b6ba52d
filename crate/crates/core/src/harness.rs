//! Success-rate experiments over grids of sample size and noise level.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::BayesConfig;
use crate::error::{Error, Result};
use crate::library::CandidateLibrary;
use crate::ode::{
    add_noise, builtin_system, sample_initial_condition, simulate, DynamicalSystem, NoiseSpec, Snr,
};
use crate::pipeline::{discover, supports_match, DiscoverConfig};
use crate::seed::{self, Stream};
use crate::smoothing::smooth_and_differentiate;
use crate::stlsq::stlsq_baseline;
use crate::trajectory::Trajectory;

/// Initial conditions tried per trial before giving up on a divergent system.
pub const MAX_IC_ATTEMPTS: u64 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bayes,
    Stlsq,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Bayes => "bayes",
            Method::Stlsq => "stlsq",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "bayes" => Ok(Method::Bayes),
            "stlsq" => Ok(Method::Stlsq),
            other => Err(Error::Parse(format!(
                "unknown method `{other}` (expected bayes or stlsq)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub system: String,
    pub n_grid: Vec<usize>,
    pub snr_grid: Vec<Snr>,
    pub trials: usize,
    pub degree: u32,
    pub trig: bool,
    pub master_seed: u64,
    pub out_dir: PathBuf,
    /// Sampling step; the system default when absent.
    pub dt: Option<f64>,
    pub method: Method,
    pub stlsq_threshold: f64,
    pub stlsq_ridge: f64,
    /// Success rate a cell must reach to count as recovered.
    pub success_threshold: f64,
    pub chains: usize,
    pub iters: usize,
    pub warmup: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            system: "lorenz".into(),
            n_grid: vec![5000],
            snr_grid: vec![Snr::Db(49.0)],
            trials: 20,
            degree: 5,
            trig: false,
            master_seed: 0,
            out_dir: PathBuf::from("argoskit-out"),
            dt: None,
            method: Method::Bayes,
            stlsq_threshold: 0.1,
            stlsq_ridge: 0.05,
            success_threshold: 0.8,
            chains: 4,
            iters: 2000,
            warmup: 1000,
        }
    }
}

fn parse_list<T>(v: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(f)
        .collect()
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad value `{v}` for `{key}`")))
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment. Lists are comma separated.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("line {}: expected key = value", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "system" => cfg.system = value.to_string(),
                "n_grid" => cfg.n_grid = parse_list(value, |s| parse_num(key, s))?,
                "snr_grid" => cfg.snr_grid = parse_list(value, Snr::parse)?,
                "trials" => cfg.trials = parse_num(key, value)?,
                "degree" => cfg.degree = parse_num(key, value)?,
                "trig" => cfg.trig = parse_num(key, value)?,
                "master_seed" | "seed" => cfg.master_seed = parse_num(key, value)?,
                "out_dir" => cfg.out_dir = PathBuf::from(value),
                "dt" => cfg.dt = Some(parse_num(key, value)?),
                "method" => cfg.method = Method::parse(value)?,
                "stlsq_threshold" => cfg.stlsq_threshold = parse_num(key, value)?,
                "stlsq_ridge" => cfg.stlsq_ridge = parse_num(key, value)?,
                "success_threshold" => cfg.success_threshold = parse_num(key, value)?,
                "chains" => cfg.chains = parse_num(key, value)?,
                "iters" => cfg.iters = parse_num(key, value)?,
                "warmup" => cfg.warmup = parse_num(key, value)?,
                other => {
                    return Err(Error::Parse(format!(
                        "line {}: unknown key `{other}`",
                        lineno + 1
                    )))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Inverse of [`ExperimentConfig::parse`].
    pub fn to_text(&self) -> String {
        let join = |v: Vec<String>| v.join(",");
        let mut s = String::new();
        let _ = writeln!(s, "system = {}", self.system);
        let _ = writeln!(
            s,
            "n_grid = {}",
            join(self.n_grid.iter().map(|n| n.to_string()).collect())
        );
        let _ = writeln!(
            s,
            "snr_grid = {}",
            join(self.snr_grid.iter().map(|x| x.to_string()).collect())
        );
        let _ = writeln!(s, "trials = {}", self.trials);
        let _ = writeln!(s, "degree = {}", self.degree);
        let _ = writeln!(s, "trig = {}", self.trig);
        let _ = writeln!(s, "master_seed = {}", self.master_seed);
        let _ = writeln!(s, "out_dir = {}", self.out_dir.display());
        if let Some(dt) = self.dt {
            let _ = writeln!(s, "dt = {dt}");
        }
        let _ = writeln!(s, "method = {}", self.method.as_str());
        let _ = writeln!(s, "stlsq_threshold = {}", self.stlsq_threshold);
        let _ = writeln!(s, "stlsq_ridge = {}", self.stlsq_ridge);
        let _ = writeln!(s, "success_threshold = {}", self.success_threshold);
        let _ = writeln!(s, "chains = {}", self.chains);
        let _ = writeln!(s, "iters = {}", self.iters);
        let _ = writeln!(s, "warmup = {}", self.warmup);
        s
    }

    pub fn validate(&self) -> Result<()> {
        builtin_system(&self.system)?;
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.n_grid.is_empty() || self.snr_grid.is_empty() {
            return Err(Error::InvalidArgument(
                "n_grid and snr_grid must be nonempty".into(),
            ));
        }
        if let Some(&n) = self.n_grid.iter().find(|&&n| n < 13) {
            return Err(Error::InvalidArgument(format!(
                "n = {n} is below the 13-sample minimum"
            )));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "dt must be positive, got {dt}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.success_threshold) {
            return Err(Error::InvalidArgument(
                "success_threshold must lie in [0, 1]".into(),
            ));
        }
        self.bayes().validate()
    }

    pub fn bayes(&self) -> BayesConfig {
        BayesConfig {
            chains: self.chains,
            iters: self.iters,
            warmup: self.warmup,
            ..BayesConfig::default()
        }
    }
}

fn snr_key(snr: Snr) -> u64 {
    match snr {
        Snr::Db(db) => db.to_bits(),
        Snr::Infinite => u64::MAX,
    }
}

/// Master seed of one trial; a function of the cell and trial index only.
pub fn trial_seed(master: u64, n: usize, snr: Snr, trial: usize) -> u64 {
    seed::derive(
        master,
        Stream::Trial,
        &[n as u64, snr_key(snr), trial as u64],
    )
}

/// Simulates and corrupts one trajectory. Divergent initial conditions are
/// replaced by the next derived one.
pub fn generate_trajectory(
    sys: &DynamicalSystem,
    n: usize,
    dt: f64,
    snr: Snr,
    seed: u64,
) -> Result<Trajectory> {
    let mut last = None;
    for attempt in 0..MAX_IC_ATTEMPTS {
        let ic = sample_initial_condition(
            sys,
            seed::derive(seed, Stream::InitialCondition, &[attempt]),
        );
        match simulate(sys, &ic, dt, n) {
            Ok(clean) => {
                let spec = NoiseSpec::new(snr, seed::derive(seed, Stream::Noise, &[]))?;
                return add_noise(&clean, &spec);
            }
            Err(e @ Error::IntegrationFailure { .. }) => {
                log::debug!(
                    "{}: initial condition {ic:?} diverged, resampling",
                    sys.name
                );
                last = Some(e);
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Term supports found by thresholded least squares on the smoothed data.
pub fn stlsq_supports(
    traj: &Trajectory,
    degree: u32,
    trig: bool,
    threshold: f64,
    ridge: f64,
) -> Result<Vec<Vec<String>>> {
    let sm = smooth_and_differentiate(traj)?;
    let lib = CandidateLibrary::build(&sm.x, degree, trig)?;
    (0..traj.dim())
        .map(|j| {
            let y: DVector<f64> = sm.xdot.column(j).into_owned();
            let fit = stlsq_baseline(&lib, &y, threshold, ridge)?;
            Ok(fit
                .support
                .iter()
                .map(|&k| lib.terms[k].name().to_string())
                .collect())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub n: usize,
    pub snr_db: Snr,
    pub trial: usize,
    pub seed: u64,
    pub success: bool,
    /// Wall-clock seconds spent in identification (data generation excluded).
    pub runtime_s: f64,
    #[serde(default)]
    pub error: String,
}

/// Runs one trial end to end. Never fails: errors are recorded as unsuccessful.
pub fn run_trial(
    cfg: &ExperimentConfig,
    sys: &DynamicalSystem,
    n: usize,
    snr: Snr,
    trial: usize,
) -> TrialRecord {
    let seed = trial_seed(cfg.master_seed, n, snr, trial);
    let dt = cfg.dt.unwrap_or(sys.default_dt);
    let mut record = TrialRecord {
        n,
        snr_db: snr,
        trial,
        seed,
        success: false,
        runtime_s: 0.0,
        error: String::new(),
    };
    let traj = match generate_trajectory(sys, n, dt, snr, seed) {
        Ok(t) => t,
        Err(e) => {
            record.error = e.to_string();
            return record;
        }
    };
    let start = Instant::now();
    let outcome = match cfg.method {
        Method::Bayes => {
            let dcfg = DiscoverConfig {
                degree: cfg.degree,
                trig: cfg.trig,
                bayes: cfg.bayes(),
                seed,
                snr: Some(snr),
                ..DiscoverConfig::default()
            };
            discover(&traj, &dcfg).and_then(|m| {
                let failed: Vec<_> = m.equations.iter().filter_map(|e| e.error.clone()).collect();
                supports_match(&m.supports(), sys).map(|ok| (ok, failed.join("; ")))
            })
        }
        Method::Stlsq => stlsq_supports(
            &traj,
            cfg.degree,
            cfg.trig,
            cfg.stlsq_threshold,
            cfg.stlsq_ridge,
        )
        .and_then(|s| supports_match(&s, sys))
        .map(|ok| (ok, String::new())),
    };
    record.runtime_s = start.elapsed().as_secs_f64();
    match outcome {
        Ok((ok, err)) => {
            record.success = ok;
            record.error = err;
        }
        Err(e) => record.error = e.to_string(),
    }
    record
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessRow {
    pub n: usize,
    pub snr_db: Snr,
    pub successes: usize,
    pub trials: usize,
    pub success_rate: f64,
    pub mean_runtime_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuccessTable {
    pub method: Method,
    pub rows: Vec<SuccessRow>,
}

impl SuccessTable {
    /// Aggregates trial records per (n, SNR) cell, in grid order.
    pub fn from_records(
        method: Method,
        n_grid: &[usize],
        snr_grid: &[Snr],
        records: &[TrialRecord],
    ) -> Self {
        let mut by_cell: HashMap<(usize, u64), Vec<&TrialRecord>> = HashMap::new();
        for r in records {
            by_cell.entry((r.n, snr_key(r.snr_db))).or_default().push(r);
        }
        let mut rows = Vec::new();
        for &n in n_grid {
            for &snr in snr_grid {
                let Some(cell) = by_cell.get_mut(&(n, snr_key(snr))) else {
                    continue;
                };
                cell.sort_by_key(|r| r.trial);
                let trials = cell.len();
                let successes = cell.iter().filter(|r| r.success).count();
                let runtime: f64 = cell.iter().map(|r| r.runtime_s).sum();
                rows.push(SuccessRow {
                    n,
                    snr_db: snr,
                    successes,
                    trials,
                    success_rate: successes as f64 / trials as f64,
                    mean_runtime_seconds: runtime / trials as f64,
                });
            }
        }
        Self { method, rows }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path, method: Method) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let rows = r
            .deserialize()
            .collect::<std::result::Result<Vec<SuccessRow>, _>>()?;
        Ok(Self { method, rows })
    }
}

pub const TRIALS_FILE: &str = "trials.csv";
pub const TABLE_FILE: &str = "success_table.csv";
pub const CONFIG_FILE: &str = "config.txt";

fn read_records(path: &Path) -> Result<Vec<TrialRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.deserialize::<TrialRecord>() {
        match rec {
            Ok(rec) => out.push(rec),
            // a torn final line from an interrupted run
            Err(e) => log::warn!(
                "skipping unreadable trial record in {}: {e}",
                path.display()
            ),
        }
    }
    Ok(out)
}

/// Worker-pool size from `ARGOSKIT_THREADS`, if set.
pub fn thread_cap() -> Option<usize> {
    std::env::var("ARGOSKIT_THREADS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n| n > 0)
}

/// Runs every (n, SNR, trial) not already recorded in `out_dir`, appending
/// each finished trial to `trials.csv`, then writes `success_table.csv`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<SuccessTable> {
    cfg.validate()?;
    let sys = builtin_system(&cfg.system)?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;

    let config_path = cfg.out_dir.join(CONFIG_FILE);
    let fingerprint = cfg.to_text();
    if config_path.exists() {
        let previous = fs::read_to_string(&config_path).map_err(|e| Error::io(&config_path, e))?;
        if previous != fingerprint {
            return Err(Error::InvalidArgument(format!(
                "{} holds results for a different configuration",
                cfg.out_dir.display()
            )));
        }
    } else {
        fs::write(&config_path, &fingerprint).map_err(|e| Error::io(&config_path, e))?;
    }

    let trials_path = cfg.out_dir.join(TRIALS_FILE);
    let mut done: BTreeMap<(usize, u64, usize), TrialRecord> = BTreeMap::new();
    if trials_path.exists() {
        for r in read_records(&trials_path)? {
            done.insert((r.n, snr_key(r.snr_db), r.trial), r);
        }
    }
    let mut pending = Vec::new();
    for &n in &cfg.n_grid {
        for &snr in &cfg.snr_grid {
            for t in 0..cfg.trials {
                if !done.contains_key(&(n, snr_key(snr), t)) {
                    pending.push((n, snr, t));
                }
            }
        }
    }
    log::info!(
        "{}: {} trials pending, {} recorded",
        cfg.system,
        pending.len(),
        done.len()
    );

    if !pending.is_empty() {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&trials_path)
            .map_err(|e| Error::io(&trials_path, e))?;
        let empty = file.metadata().map(|m| m.len() == 0).unwrap_or(true);
        if !empty {
            let bytes = fs::read(&trials_path).map_err(|e| Error::io(&trials_path, e))?;
            if bytes.last() != Some(&b'\n') {
                use std::io::Write as _;
                (&file)
                    .write_all(b"\n")
                    .map_err(|e| Error::io(&trials_path, e))?;
            }
        }
        let mut writer = csv::WriterBuilder::new()
            .has_headers(empty)
            .from_writer(file);
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(k) = thread_cap() {
            builder = builder.num_threads(k);
        }
        let pool = builder
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let (tx, rx) = mpsc::channel::<TrialRecord>();
        let write_result = std::thread::scope(|s| {
            let sys = &sys;
            let pending = &pending;
            s.spawn(move || {
                pool.install(|| {
                    pending.par_iter().for_each_with(tx, |tx, &(n, snr, t)| {
                        let _ = tx.send(run_trial(cfg, sys, n, snr, t));
                    })
                })
            });
            for rec in rx {
                log::info!(
                    "n={} snr={} trial={} success={} ({:.2}s)",
                    rec.n,
                    rec.snr_db,
                    rec.trial,
                    rec.success,
                    rec.runtime_s
                );
                writer.serialize(&rec)?;
                writer.flush().map_err(|e| Error::io(&trials_path, e))?;
                done.insert((rec.n, snr_key(rec.snr_db), rec.trial), rec);
            }
            Ok::<(), Error>(())
        });
        write_result?;
    }

    let records: Vec<TrialRecord> = done
        .into_values()
        .filter(|r| r.trial < cfg.trials)
        .collect();
    let table = SuccessTable::from_records(cfg.method, &cfg.n_grid, &cfg.snr_grid, &records);
    table.write_csv(&cfg.out_dir.join(TABLE_FILE))?;
    Ok(table)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    pub n: usize,
    pub snr_db: Snr,
    pub success_rate: f64,
    pub method: String,
}

impl SuccessTable {
    pub fn plot_points(&self) -> Vec<PlotPoint> {
        self.rows
            .iter()
            .map(|r| PlotPoint {
                n: r.n,
                snr_db: r.snr_db,
                success_rate: r.success_rate,
                method: self.method.as_str().into(),
            })
            .collect()
    }
}

/// Writes `n,snr_db,success_rate,method`, one line per cell.
pub fn emit_plot_data(table: &SuccessTable, path: &Path) -> Result<()> {
    if table.rows.is_empty() {
        return Err(Error::InvalidArgument("empty success table".into()));
    }
    let mut w = csv::Writer::from_path(path)?;
    for p in table.plot_points() {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_plot_data(path: &Path) -> Result<Vec<PlotPoint>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize()
        .collect::<std::result::Result<Vec<PlotPoint>, _>>()?)
}
