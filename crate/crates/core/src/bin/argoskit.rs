use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use serde_json::{json, Map, Value};

use argoskit::bayes::BayesConfig;
use argoskit::diagnostics::{analyze_affine_modes, DiagnosticsReport};
use argoskit::harness::{emit_plot_data, run_experiment, ExperimentConfig};
use argoskit::ode::{
    add_noise, builtin_system, sample_initial_condition, simulate, NoiseSpec, Snr,
};
use argoskit::pipeline::{discover, rediagnose, DiscoverConfig, DiscoveredModel};
use argoskit::smoothing::{smooth_and_differentiate_with, WindowCriterion};
use argoskit::trajectory::{write_matrix_csv, Trajectory};

#[derive(Parser)]
#[command(
    name = "argoskit",
    version,
    about = "Sparse ODE discovery from noisy trajectories"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a benchmark system and add observation noise.
    Simulate(SimulateArgs),
    /// Identify governing equations from a trajectory CSV.
    Discover(DiscoverArgs),
    /// Run a success-rate experiment from a config file.
    Benchmark(BenchmarkArgs),
    /// Recompute diagnostics for a saved model.
    Diagnose(DiagnoseArgs),
    /// Equilibrium and eigen-analysis of an affine system dx/dt = A x + b.
    Modes(ModesArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    system: String,
    /// Sampling step; the system default when omitted.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, short = 'n')]
    n: usize,
    /// Signal-to-noise ratio in dB, or `inf`.
    #[arg(long, default_value = "inf")]
    snr: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Explicit initial condition, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    ic: Option<Vec<f64>>,
    #[arg(long, short = 'o')]
    output: PathBuf,
}

#[derive(Args, Clone)]
struct BayesArgs {
    #[arg(long, default_value_t = 4)]
    chains: usize,
    #[arg(long, default_value_t = 2000)]
    iters: usize,
    #[arg(long, default_value_t = 1000)]
    warmup: usize,
    #[arg(long, default_value_t = 0.9)]
    ci_level: f64,
    #[arg(long, default_value_t = 0.8)]
    target_accept: f64,
}

impl BayesArgs {
    fn config(&self) -> BayesConfig {
        BayesConfig {
            chains: self.chains,
            iters: self.iters,
            warmup: self.warmup,
            ci_level: self.ci_level,
            target_accept: self.target_accept,
            ..BayesConfig::default()
        }
    }
}

#[derive(Args)]
struct DiscoverArgs {
    /// Trajectory CSV (`t,x1,...,xm`).
    #[arg(long, short = 'i')]
    input: PathBuf,
    #[arg(long, default_value_t = 5)]
    degree: u32,
    /// Add sin/cos of each state to the library.
    #[arg(long)]
    trig: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    bayes: BayesArgs,
    /// Pick smoothing windows by leave-one-out error instead of in-sample error.
    #[arg(long)]
    loo_window: bool,
    /// Model JSON; stdout when omitted.
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
    /// Also print the model as equations.
    #[arg(long)]
    text: bool,
    /// Write per-equation diagnostics JSON here.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
    /// Write smoothed states and derivatives to `<prefix>_x.csv` and `<prefix>_xdot.csv`.
    #[arg(long)]
    smoothed: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Flat `key = value` experiment file.
    #[arg(long, short = 'c')]
    config: PathBuf,
    /// Also write `n,snr_db,success_rate,method` plot data.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long, short = 'i')]
    input: PathBuf,
    #[arg(long, short = 'm')]
    model: PathBuf,
    #[command(flatten)]
    bayes: BayesArgs,
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ModesArgs {
    /// JSON object `{"A": [[...], ...], "b": [...]}`.
    #[arg(long, short = 'i')]
    input: PathBuf,
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
}

fn write_out(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn diagnostics_json(model: &DiscoveredModel, reports: &[Option<DiagnosticsReport>]) -> Value {
    let mut out = Map::new();
    for (eq, r) in model.equations.iter().zip(reports) {
        out.insert(
            eq.lhs.clone(),
            r.as_ref().map_or(Value::Null, DiagnosticsReport::to_json),
        );
    }
    Value::Object(out)
}

fn cmd_simulate(a: SimulateArgs) -> anyhow::Result<()> {
    let sys = builtin_system(&a.system)?;
    let dt = a.dt.unwrap_or(sys.default_dt);
    let snr = Snr::parse(&a.snr)?;
    let ic = match a.ic {
        Some(ic) => ic,
        None => sample_initial_condition(
            &sys,
            argoskit::seed::derive(a.seed, argoskit::seed::Stream::InitialCondition, &[0]),
        ),
    };
    if ic.len() != sys.dim {
        bail!(
            "{} needs {} initial values, got {}",
            sys.name,
            sys.dim,
            ic.len()
        );
    }
    let clean = simulate(&sys, &ic, dt, a.n)?;
    let noise_seed = argoskit::seed::derive(a.seed, argoskit::seed::Stream::Noise, &[]);
    let traj = add_noise(&clean, &NoiseSpec::new(snr, noise_seed)?)?;
    traj.save_csv(&a.output)?;
    log::info!(
        "wrote {} samples of {} to {}",
        traj.len(),
        sys.name,
        a.output.display()
    );
    Ok(())
}

fn cmd_discover(a: DiscoverArgs) -> anyhow::Result<()> {
    let traj = Trajectory::load_csv(&a.input)?;
    let criterion = if a.loo_window {
        WindowCriterion::LeaveOneOut
    } else {
        WindowCriterion::Reconstruction
    };
    let cfg = DiscoverConfig {
        degree: a.degree,
        trig: a.trig,
        bayes: a.bayes.config(),
        window_criterion: criterion,
        seed: a.seed,
        diagnostics: a.diagnostics.is_some(),
        ..DiscoverConfig::default()
    };
    if let Some(prefix) = &a.smoothed {
        let sm = smooth_and_differentiate_with(&traj, criterion)?;
        for (suffix, m) in [("x", &sm.x), ("xdot", &sm.xdot)] {
            let path = PathBuf::from(format!("{}_{suffix}.csv", prefix.display()));
            let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            write_matrix_csv(BufWriter::new(f), &traj.times, m)?;
        }
    }
    let model = discover(&traj, &cfg)?;
    write_out(a.output.as_deref(), &model.to_json()?)?;
    if a.text {
        print!("{}", model.to_text());
    }
    if let Some(path) = &a.diagnostics {
        let v = diagnostics_json(&model, &model.diagnostics);
        fs::write(path, serde_json::to_string_pretty(&v)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cmd_benchmark(a: BenchmarkArgs) -> anyhow::Result<()> {
    let cfg = ExperimentConfig::load(&a.config)?;
    let table = run_experiment(&cfg)?;
    println!("n,snr_db,successes,trials,success_rate,mean_runtime_seconds,recovered");
    for r in &table.rows {
        println!(
            "{},{},{},{},{:.4},{:.3},{}",
            r.n,
            r.snr_db,
            r.successes,
            r.trials,
            r.success_rate,
            r.mean_runtime_seconds,
            r.success_rate >= cfg.success_threshold
        );
    }
    if let Some(p) = &a.plot {
        emit_plot_data(&table, p)?;
    }
    Ok(())
}

fn cmd_diagnose(a: DiagnoseArgs) -> anyhow::Result<()> {
    let traj = Trajectory::load_csv(&a.input)?;
    let model = DiscoveredModel::load(&a.model)?;
    let reports = rediagnose(&traj, &model, &a.bayes.config())?;
    write_out(
        a.output.as_deref(),
        &serde_json::to_string_pretty(&diagnostics_json(&model, &reports))?,
    )
}

#[derive(Deserialize)]
struct AffineInput {
    #[serde(rename = "A", alias = "a")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

fn cmd_modes(a: ModesArgs) -> anyhow::Result<()> {
    let text =
        fs::read_to_string(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let input: AffineInput = serde_json::from_str(&text)?;
    let m = input.a.len();
    if input.a.iter().any(|r| r.len() != m) {
        bail!("A must be square");
    }
    let am = DMatrix::from_fn(m, m, |i, j| input.a[i][j]);
    let b = DVector::from_vec(input.b);
    let modes = analyze_affine_modes(&am, &b)?;
    let v = json!(modes);
    write_out(a.output.as_deref(), &serde_json::to_string_pretty(&v)?)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Discover(a) => cmd_discover(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::Modes(a) => cmd_modes(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
