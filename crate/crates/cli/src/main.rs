use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use starswipt_cli::{load_config, run_grid, run_optimize, Mode, Outcome};

#[derive(Parser)]
#[command(name = "starswipt", version, about = "STAR-RIS SWIPT-NOMA outage analysis, simulation and allocation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form metrics only.
    Analyze(Common),
    /// Monte Carlo estimates only.
    Simulate(Common),
    /// Closed forms against Monte Carlo, with an agreement report; exits
    /// nonzero when any check fails.
    Validate(Common),
    /// Particle swarm allocation of the splitting and power ratios.
    Optimize(Common),
    /// Closed forms and Monte Carlo over the configured grid.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment file (TOML, or JSON with a .json extension).
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Overrides the trial count of the file.
    #[arg(long)]
    trials: Option<u64>,
    /// Overrides the seed of the file.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to one per core.
    #[arg(long)]
    threads: Option<usize>,
}

fn execute(command: Command) -> anyhow::Result<Outcome> {
    let (mode, c) = match command {
        Command::Analyze(c) => (Some(Mode::Analyze), c),
        Command::Simulate(c) => (Some(Mode::Simulate), c),
        Command::Validate(c) => (Some(Mode::Validate), c),
        Command::Sweep(c) => (Some(Mode::Sweep), c),
        Command::Optimize(c) => (None, c),
    };
    let mut spec = load_config(&c.config)?;
    if let Some(n) = c.trials {
        anyhow::ensure!(n > 0, "--trials must be positive");
        spec.trials = n;
    }
    if let Some(s) = c.seed {
        spec.seed = s;
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = c.threads {
        anyhow::ensure!(n > 0, "--threads must be positive");
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("starting worker pool")?;
    pool.install(|| match mode {
        Some(m) => run_grid(m, &spec, &c.out_dir),
        None => run_optimize(&spec, &c.out_dir),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if outcome.checks > 0 || !outcome.failures.is_empty() {
                println!("checks: {}, failures: {}", outcome.checks, outcome.failures.len());
                for f in &outcome.failures {
                    println!("FAIL {f}");
                }
            }
            if outcome.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
