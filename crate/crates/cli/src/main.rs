//! `bvmlab`: runs the posterior and limit-theorem experiments from a TOML config.

mod commands;
mod config;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use config::{Command, ConfigError, RunConfig};
use stages::Run;

/// Why a run stopped. Validation failures exit with 2, compute failures with 3.
#[derive(Debug)]
pub enum Failure {
    Invalid(ConfigError),
    Compute { stage: String, message: String },
}

impl Failure {
    pub fn compute(stage: &str, message: String) -> Self {
        Failure::Compute {
            stage: stage.to_string(),
            message,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 2,
            Failure::Compute { .. } => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Invalid(e) => write!(f, "invalid configuration: {e}"),
            Failure::Compute { stage, message } => write!(f, "stage `{stage}` failed: {message}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "bvmlab",
    version,
    about = "Bayesian inversion of a periodic reaction-diffusion equation and Bernstein-von Mises diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML run configuration; defaults apply to anything it leaves out.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Master seed (overrides `seed` in the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Scalar override, e.g. `--set prior.gamma=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output root (overrides `io.out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Recompute every stage and overwrite cached results.
    #[arg(long)]
    no_cache: bool,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Sub {
    /// Assemble the information operator and the limit covariance.
    Info(RunArgs),
    /// Solve the forward problem and draw a dataset.
    Simulate(RunArgs),
    /// Run pCN and summarise the posterior with a credible band.
    Posterior(RunArgs),
    /// Projected W1 between rescaled posterior and limit law across N.
    BvmTheta(RunArgs),
    /// Path-space comparison of posterior and limit-process draws.
    BvmPath(RunArgs),
    /// Sampling law of the efficient estimator.
    Clt(RunArgs),
    /// Frequentist coverage of sup-norm credible bands.
    Coverage(RunArgs),
    /// Numerical probes of the forward-map regularity conditions.
    Probes(RunArgs),
    /// Posterior contraction in Sobolev norms across N.
    Contraction(RunArgs),
    /// Print the default configuration as TOML.
    Defaults,
}

fn load_config(args: &RunArgs) -> Result<RunConfig, Failure> {
    let text = match &args.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| {
            Failure::Invalid(ConfigError::new(
                "config",
                format!("cannot read {}: {e}", p.display()),
            ))
        })?,
        None => String::new(),
    };
    let mut cfg = RunConfig::from_toml(&text, &args.set).map_err(Failure::Invalid)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.io.out_dir = o.display().to_string();
    }
    Ok(cfg)
}

fn run(cmd: Command, args: &RunArgs) -> Result<(), Failure> {
    let cfg = load_config(args)?;
    cfg.validate(cmd).map_err(Failure::Invalid)?;
    let value = cfg.command_value(cmd);
    let hash = stages::hash_value(&value);
    let mut run = Run::open(
        cfg.io.out_dir.as_ref(),
        cmd.name(),
        &hash,
        cfg.seed,
        !args.no_cache,
    )?;
    println!(
        "bvmlab {} run {} -> {}",
        cmd.name(),
        &hash[..16],
        run.dir.display()
    );
    if !args.no_cache && run.dir.join("report.json").exists() {
        run.record("report", 0.0, true);
        println!("report already present for this configuration");
        return Ok(());
    }
    let start = Instant::now();
    let report = match args.threads {
        Some(n) => bvmlab_core::par::with_threads(n, || commands::execute(cmd, &cfg, &mut run)),
        None => commands::execute(cmd, &cfg, &mut run),
    }?;
    run.record("total", start.elapsed().as_secs_f64(), false);
    run.write_text("config.toml", &cfg.to_toml())?;
    run.finish(cmd.name(), &report)?;
    let passed = report.checks.iter().filter(|c| c.pass).count();
    for c in &report.checks {
        let mark = if c.pass { "pass" } else { "FAIL" };
        println!("  {mark} {} = {:.6e} {}", c.name, c.value, c.detail);
    }
    println!("checks passed: {passed}/{}", report.checks.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Sub::Defaults => {
            print!("{}", RunConfig::default().to_toml());
            return ExitCode::SUCCESS;
        }
        Sub::Info(a) => (Command::Info, a),
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::Posterior(a) => (Command::Posterior, a),
        Sub::BvmTheta(a) => (Command::BvmTheta, a),
        Sub::BvmPath(a) => (Command::BvmPath, a),
        Sub::Clt(a) => (Command::Clt, a),
        Sub::Coverage(a) => (Command::Coverage, a),
        Sub::Probes(a) => (Command::Probes, a),
        Sub::Contraction(a) => (Command::Contraction, a),
    };
    match run(cmd, &args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
