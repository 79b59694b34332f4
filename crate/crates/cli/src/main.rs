use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hmmob_cli::{resolve_jobs, CliError, CliResult, ExperimentConfig, JOBS_ENV};

#[derive(Parser)]
#[command(name = "hmmob", version, about = "Bayesian order selection experiments for hidden Markov models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one dataset per (n, replicate)
    Simulate(RunArgs),
    /// Run the sampler on every simulated dataset
    Fit(RunArgs),
    /// Posterior order of every trace
    Order(RunArgs),
    /// Distances from posterior samples to the true parameter
    Distance(RunArgs),
    /// Two-state fit to one-state data: emptying versus merging
    Twostate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides output_dir
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; HMMOB_JOBS takes precedence
    #[arg(long)]
    jobs: Option<usize>,
}

impl RunArgs {
    fn load(&self) -> CliResult<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> CliResult<String> {
    let (args, cmd) = match &cli.command {
        Command::Simulate(a) => (a, "simulate"),
        Command::Fit(a) => (a, "fit"),
        Command::Order(a) => (a, "order"),
        Command::Distance(a) => (a, "distance"),
        Command::Twostate(a) => (a, "twostate"),
    };
    let env = std::env::var(JOBS_ENV).ok();
    let jobs = resolve_jobs(args.jobs, env.as_deref())?;
    let cfg = args.load()?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    let out = cfg.output_dir.display().to_string();
    pool.install(|| match cmd {
        "simulate" => hmmob_cli::cmd_simulate(&cfg).map(|m| format!("{} datasets in {out}", m.datasets.len())),
        "fit" => hmmob_cli::cmd_fit(&cfg).map(|t| format!("{} traces in {out}/traces", t.len())),
        "order" => hmmob_cli::cmd_order(&cfg).map(|r| format!("{} order reports in {out}/order", r.len())),
        "distance" => hmmob_cli::cmd_distance(&cfg).map(|r| format!("{} distance reports in {out}/distance", r.len())),
        _ => hmmob_cli::cmd_twostate(&cfg).map(|r| format!("{} two-state reports in {out}/twostate", r.len())),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("hmmob: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
