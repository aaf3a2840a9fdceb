//! `dasloc`: run localization sweeps, ambiguity-function cuts, the numerical
//! oracle suite and complexity accounting from a JSON configuration.

mod manifest;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use dasloc::experiment::{
    account_complexity, ambiguity_function, parse_estimators, run_sweep, CutAxis, Estimator,
};
use dasloc::model::{node_positions, Point};
use dasloc::oracle::run_oracle_suite;
use dasloc::SystemConfig;

use manifest::Manifest;

#[derive(Parser)]
#[command(name = "dasloc", version, about = "Distributed-array OFDM source localization simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo RMSE/SER/MAE sweep over the configured SNR points.
    Sweep(SweepArgs),
    /// Noise-free ambiguity-function cut.
    Af(AfArgs),
    /// Quadrature and fast/approx cross-checks on random toy instances.
    OracleCheck(OracleArgs),
    /// Per-step operation counts next to their asymptotic formulas.
    Complexity(ComplexityArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// JSON configuration file.
    #[arg(required_unless_present = "from_manifest", conflicts_with = "from_manifest")]
    config: Option<PathBuf>,
    /// Comma-separated estimator names, e.g. `P,PD,HDD-centr,MML-fast`.
    #[arg(long, default_value = "P,PD,HDD-centr,HDD-distr,SDD-centr,SDD-distr,MML-fast")]
    estimators: String,
    #[arg(long, default_value = "sweep.csv")]
    out: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, env = "DASLOC_THREADS")]
    threads: Option<usize>,
    /// Re-run exactly the configuration and estimators recorded in a manifest.
    #[arg(long)]
    from_manifest: Option<PathBuf>,
}

#[derive(Args)]
struct AfArgs {
    config: PathBuf,
    #[arg(long, default_value = "x")]
    cut_axis: String,
    #[arg(long, default_value_t = 801)]
    samples: usize,
    #[arg(long, default_value = "af.csv")]
    out: PathBuf,
    /// True position, m.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    x: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    y: f64,
    /// Half-length of the cut, m; defaults to the scene radius.
    #[arg(long)]
    half_span: Option<f64>,
    #[arg(long, env = "DASLOC_THREADS")]
    threads: Option<usize>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long, env = "DASLOC_THREADS")]
    threads: Option<usize>,
}

#[derive(Args)]
struct ComplexityArgs {
    config: PathBuf,
    #[arg(long, default_value = "P,PD,HDD-centr,HDD-distr,SDD-centr,SDD-distr,MML-fast,MML-approx")]
    estimators: String,
    #[arg(long, default_value = "complexity.csv")]
    out: PathBuf,
    #[arg(long, env = "DASLOC_THREADS")]
    threads: Option<usize>,
}

/// Failure classes mapped to exit codes.
enum Failure {
    /// Bad invocation or configuration: exit 2.
    Usage(anyhow::Error),
    /// Runtime or validation failure: exit 1.
    Run(anyhow::Error),
}

impl Failure {
    fn usage(e: impl Into<anyhow::Error>) -> Self {
        Failure::Usage(e.into())
    }

    fn run(e: impl Into<anyhow::Error>) -> Self {
        Failure::Run(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sweep(a) => sweep(a),
        Command::Af(a) => af(a),
        Command::OracleCheck(a) => oracle_check(a),
        Command::Complexity(a) => complexity(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn set_threads(threads: Option<usize>) -> Result<(), Failure> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Failure::usage(anyhow!("--threads must be at least 1")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(Failure::run)?;
    }
    Ok(())
}

fn load_config(path: &Path) -> Result<SystemConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))
        .map_err(Failure::usage)?;
    SystemConfig::from_json(&text)
        .with_context(|| format!("invalid config {}", path.display()))
        .map_err(Failure::usage)
}

fn estimators(list: &str) -> Result<Vec<Estimator>, Failure> {
    parse_estimators(list).map_err(Failure::usage)
}

fn sweep(a: SweepArgs) -> Result<(), Failure> {
    set_threads(a.threads)?;
    let (cfg, set) = match (&a.from_manifest, &a.config) {
        (Some(m), _) => {
            let m = Manifest::load(m).map_err(Failure::usage)?;
            m.config.validate().map_err(Failure::usage)?;
            let set = m.estimators.iter().map(|s| s.parse()).collect::<Result<Vec<Estimator>, _>>();
            (m.config, set.map_err(Failure::usage)?)
        }
        (None, Some(path)) => (load_config(path)?, estimators(&a.estimators)?),
        (None, None) => unreachable!("clap requires one of them"),
    };
    let mut manifest = Manifest::start("sweep", &cfg, &set);
    let result = run_sweep(&cfg, &set).map_err(Failure::run)?;
    output::write_sweep(&a.out, &result).map_err(Failure::run)?;
    manifest.finish(&a.out).map_err(Failure::run)?;
    eprintln!("wrote {} rows to {}", result.rows.len(), a.out.display());
    Ok(())
}

fn af(a: AfArgs) -> Result<(), Failure> {
    set_threads(a.threads)?;
    let cfg = load_config(&a.config)?;
    let axis: CutAxis = a.cut_axis.parse().map_err(Failure::usage)?;
    if a.samples < 2 {
        return Err(Failure::usage(anyhow!("--samples must be at least 2, got {}", a.samples)));
    }
    let p_true = Point::new(a.x, a.y);
    let half_span = a.half_span.unwrap_or(cfg.r_s);
    let mut manifest = Manifest::start("af", &cfg, &[]);
    manifest.extra = serde_json::json!({
        "cut_axis": a.cut_axis,
        "samples": a.samples,
        "p_true": p_true,
        "half_span": half_span,
    });
    let cut = ambiguity_function(&node_positions(&cfg), &cfg, p_true, axis, a.samples, half_span)
        .map_err(Failure::usage)?;
    output::write_af(&a.out, &cut, cfg.n, cfg.q).map_err(Failure::run)?;
    manifest.finish(&a.out).map_err(Failure::run)?;
    Ok(())
}

fn oracle_check(a: OracleArgs) -> Result<(), Failure> {
    set_threads(a.threads)?;
    let report = run_oracle_suite(a.seed, a.instances).map_err(Failure::run)?;
    println!("seed {} instances {}", report.seed, report.instances);
    println!(
        "marginal likelihood vs quadrature: max relative error {:e} (tolerance {:e})",
        report.max_marginal_rel_err, report.marginal_tolerance
    );
    println!(
        "fast vs approximate objective: max relative error {:e} (tolerance {:e})",
        report.max_fast_approx_rel_err, report.fast_approx_tolerance
    );
    if report.passed() {
        println!("PASS");
        Ok(())
    } else {
        println!("FAIL");
        Err(Failure::run(anyhow!("oracle tolerances violated")))
    }
}

fn complexity(a: ComplexityArgs) -> Result<(), Failure> {
    set_threads(a.threads)?;
    let cfg = load_config(&a.config)?;
    let set = estimators(&a.estimators)?;
    let mut manifest = Manifest::start("complexity", &cfg, &set);
    let mut rows = Vec::new();
    for e in &set {
        rows.extend(account_complexity(&cfg, *e).map_err(Failure::usage)?);
    }
    output::write_complexity(&a.out, &rows).map_err(Failure::run)?;
    manifest.finish(&a.out).map_err(Failure::run)?;
    Ok(())
}
