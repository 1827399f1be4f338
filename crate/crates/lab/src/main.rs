use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use mrelab::config::{parse_config, serialize, ConfigError};
use mrelab::experiments::{resume, run_experiment};
use mrelab::manifest::RunManifest;

/// Reproducible experiments for the magnetic relaxation equations.
#[derive(Parser)]
#[command(name = "mrelab", version)]
struct Cli {
    /// Output directory, overriding `out_dir` in the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for random initial data, overriding `params.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a configuration file.
    Run { config: PathBuf },
    /// Continue a free-run or energy-audit from a checkpoint.
    Resume {
        checkpoint: PathBuf,
        #[arg(long = "t-end")]
        t_end: Option<f64>,
    },
    /// Check a configuration and print it with defaults filled in.
    Validate { config: PathBuf },
}

/// Exit status for configuration errors; bound failures use 1 and blow-ups 2.
const EXIT_CONFIG: u8 = 3;
const EXIT_ERROR: u8 = 4;

fn load(path: &PathBuf, cli: &Cli) -> Result<mrelab::config::ExperimentConfig, ExitCode> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: reading {}: {e}", path.display());
            return Err(ExitCode::from(EXIT_ERROR));
        }
    };
    let mut cfg = parse_config(&text).map_err(|e: ConfigError| {
        eprintln!("{}: {e}", path.display());
        ExitCode::from(EXIT_CONFIG)
    })?;
    if let Some(out) = &cli.out {
        cfg.out_dir = Some(out.clone());
    }
    if let Some(seed) = cli.seed {
        if seed > i64::MAX as u64 {
            eprintln!("error: --seed must be at most {}", i64::MAX);
            return Err(ExitCode::from(EXIT_CONFIG));
        }
        cfg.params.seed = Some(seed);
    }
    Ok(cfg)
}

fn report(result: anyhow::Result<RunManifest>) -> ExitCode {
    match result {
        Ok(m) => {
            for w in &m.warnings {
                eprintln!("warning: {w}");
            }
            for f in &m.failures {
                eprintln!("FAIL: {f}");
            }
            println!(
                "{}: {:?} in {:.2} s, {} files",
                m.experiment,
                m.status,
                m.wall_clock_seconds,
                m.files.len()
            );
            ExitCode::from(m.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("MRELAB_THREADS") {
        let n: usize = v.parse().context("MRELAB_THREADS must be a positive integer")?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_ERROR);
    }
    match &cli.command {
        Command::Run { config } => match load(config, &cli) {
            Ok(cfg) => report(run_experiment(&cfg)),
            Err(code) => code,
        },
        Command::Resume { checkpoint, t_end } => report(resume(checkpoint, *t_end, cli.out.clone())),
        Command::Validate { config } => match load(config, &cli) {
            Ok(cfg) => {
                print!("{}", serialize(&cfg));
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
    }
}
