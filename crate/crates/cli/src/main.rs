use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use convexvi::config::RunConfig;
use convexvi::{solve, verify, RunError, EXIT_OK};

/// Worker thread cap for the Monte Carlo checks.
const THREADS_ENV: &str = "CONVEXVI_THREADS";

#[derive(Parser)]
#[command(name = "convexvi", version, about = "Lower and upper value bounds for perpetual Bermudan puts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured schemes and write results.csv, run.log and curve.csv.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Overrides output.dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the Monte Carlo bracket, refinement chain and contraction checks.
    Verify {
        #[arg(long)]
        config: PathBuf,
    },
}

fn init_threads() -> Result<(), RunError> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| {
        convexvi::config::ConfigError::Invalid(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))
    })?;
    if n > 0 {
        // fails only if the pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn run_solve(config: PathBuf, out: Option<PathBuf>) -> Result<(), RunError> {
    let start = Instant::now();
    let cfg = RunConfig::from_file(&config)?;
    let sol = solve::solve(&cfg)?;
    let dir = out.unwrap_or_else(|| cfg.out_dir.clone());
    solve::write_artifacts(&cfg, &sol, &dir, start.elapsed())?;
    print!("{}", solve::results_csv(&cfg, &sol)?);
    if !sol.converged() {
        let names: Vec<&str> =
            sol.lower.iter().chain(&sol.upper).filter(|r| !r.result.converged).map(|r| r.bound.name()).collect();
        return Err(RunError::NotConverged(format!("{} scheme", names.join(" and "))));
    }
    Ok(())
}

fn run_verify(config: PathBuf) -> Result<(), RunError> {
    let cfg = RunConfig::from_file(&config)?;
    let reports = verify::verify(&cfg)?;
    for r in &reports {
        println!("{r}");
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(RunError::VerifyFailed(failed.join(", ")))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match cli.command {
        Command::Solve { config, out } => run_solve(config, out),
        Command::Verify { config } => run_verify(config),
    });
    match result {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
