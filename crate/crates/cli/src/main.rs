use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dfm_cli::simulate::simulate_cmd;
use dfm_cli::{run, CliError, LoadedConfig, RunOverrides, Stage};

#[derive(Parser)]
#[command(name = "dfm", version, about = "Dynamic factor model estimation, risk measures and scenarios")]
struct Cli {
    /// Worker threads for finite-difference evaluations (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model and write the coefficient table and factor path.
    Estimate(RunArgs),
    /// Fit, then refit keeping only series with significant loadings.
    Reduce(RunArgs),
    /// Fit and compute trend, volatility and percentile measures.
    Risk(RunArgs),
    /// Fit and forecast the factor and the observed series.
    Forecast(RunArgs),
    /// Fit, forecast and evaluate the configured scenarios.
    Scenario(RunArgs),
    /// Every stage.
    Run(RunArgs),
    /// Generate a synthetic panel from a parameter file.
    Simulate(SimArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Significance level for the reduced model.
    #[arg(long)]
    alpha: Option<f64>,
    /// Forecast horizon in periods.
    #[arg(long)]
    horizon: Option<usize>,
}

#[derive(Args)]
struct SimArgs {
    /// Parameter file.
    #[arg(long)]
    params: PathBuf,
    /// Number of periods to simulate.
    #[arg(long)]
    periods: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn execute(command: Command) -> Result<(), CliError> {
    let (stage, args) = match command {
        Command::Simulate(a) => {
            for path in simulate_cmd(&a.params, a.periods, a.seed, &a.out)? {
                println!("{}", path.display());
            }
            return Ok(());
        }
        Command::Estimate(a) => (Stage::Estimate, a),
        Command::Reduce(a) => (Stage::Reduce, a),
        Command::Risk(a) => (Stage::Risk, a),
        Command::Forecast(a) => (Stage::Forecast, a),
        Command::Scenario(a) => (Stage::Scenario, a),
        Command::Run(a) => (Stage::All, a),
    };
    let loaded = LoadedConfig::load(&args.config)?;
    let overrides = RunOverrides { output: args.out, seed: args.seed, alpha: args.alpha, horizon: args.horizon };
    let artifacts = run(&loaded, stage, &overrides)?;
    for f in &artifacts.files {
        println!("{}", artifacts.dir.join(f).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(cli.command)),
            Err(e) => Err(CliError::Config(format!("thread pool: {e}"))),
        },
        None => execute(cli.command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
