use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nlkw::commands::{self, Overrides};
use nlkw::{ConfigError, RunError, RunSummary};
use nlkw_core::FamilyKind;

#[derive(Parser)]
#[command(version, about = "Monte Carlo experiments with nonlinear stochastic integrals", long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a path batch and write it as a binary dump
    Simulate(Common),
    /// Martingale, representation, derivative and Hölder checks for a family
    VerifyFamily(Common),
    /// Kunita-Watanabe projection of the payoff
    Kw(Common),
    /// Full pipeline with the configured family, payoff and strategy
    Optimize(Common),
    /// Full pipeline for the exponential-family example
    ReproduceExample(Common),
    /// Objective and floor over the configured correlations
    SweepRho(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config file; absent keys take their defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of Monte Carlo paths
    #[arg(long)]
    paths: Option<usize>,
    /// Number of time steps
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    /// linear | exp | exp-as-printed
    #[arg(long)]
    family: Option<FamilyKind>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            out: self.out.clone(),
            seed: self.seed,
            paths: self.paths,
            steps: self.steps,
            rho: self.rho,
            family: self.family,
        }
    }
}

fn configure_threads() -> Result<(), RunError> {
    let Ok(value) = std::env::var("NLKW_THREADS") else {
        return Ok(());
    };
    let invalid = || ConfigError::Invalid {
        key: "NLKW_THREADS".into(),
        message: format!("expected a positive integer, got {value:?}"),
    };
    let threads: usize = value.trim().parse().map_err(|_| invalid())?;
    if threads == 0 {
        return Err(invalid().into());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| ConfigError::Invalid {
            key: "NLKW_THREADS".into(),
            message: e.to_string(),
        })?;
    Ok(())
}

fn print_run(summary: &RunSummary) {
    let show = |name: &str, e: &nlkw_core::MCEstimate| {
        println!("{name:<14} {:.6} ± {:.6}", e.mean, e.std_err)
    };
    println!("family         {}", summary.family);
    show("lambda_sq", &summary.lambda_sq);
    show("objective", &summary.objective);
    show("orthogonality", &summary.orthogonality);
    if let Some(excess) = &summary.excess {
        show("excess", excess);
    }
    if let Some(f) = summary.stationary_fraction {
        println!("stationary     {:.4}", f);
    }
    println!(
        "floor          {}",
        if summary.floor_respected {
            "respected"
        } else {
            "VIOLATED"
        }
    );
    if let Some(ladder) = &summary.ladder {
        println!("ladder         {:?}", ladder.status);
    }
    println!("wall clock     {:.2}s", summary.wall_clock_seconds);
}

fn run(cli: Cli) -> Result<(), RunError> {
    configure_threads()?;
    let (Command::Simulate(common)
    | Command::VerifyFamily(common)
    | Command::Kw(common)
    | Command::Optimize(common)
    | Command::ReproduceExample(common)
    | Command::SweepRho(common)) = &cli.command;
    let config = commands::load_config(common.config.as_deref(), &common.overrides())?;
    match cli.command {
        Command::Simulate(_) => {
            let r = commands::simulate(&config)?;
            println!("wrote {}", r.dump.display());
            println!(
                "E[W_T W1_T] {:.6} ± {:.6} (rho T = {})",
                r.terminal_covariance.mean,
                r.terminal_covariance.std_err,
                config.rho * config.horizon
            );
        }
        Command::VerifyFamily(_) => {
            let r = commands::verify_family(&config)?;
            println!("family         {}", r.family);
            for m in &r.martingale {
                println!(
                    "E[M(T,{:>4})]   {:.6} ± {:.6}",
                    m.x, m.mean.mean, m.mean.std_err
                );
            }
            for rung in &r.ladder.report.rungs {
                println!("N={:<6} rmse {:.6e}", rung.n_steps, rung.rmse);
            }
            println!("ladder         {:?}", r.ladder.status);
        }
        Command::Kw(_) => {
            let r = commands::kw(&config)?;
            println!(
                "lambda_sq      {:.6} ± {:.6}",
                r.kw.lambda_sq.mean, r.kw.lambda_sq.std_err
            );
            for (b, se) in r.kw.coefficients.iter().zip(&r.kw.coefficient_se) {
                println!("beta           {:.6} ± {:.6}", b, se);
            }
        }
        Command::Optimize(_) => print_run(&commands::optimize(&config)?),
        Command::ReproduceExample(_) => print_run(&commands::reproduce_example(&config)?),
        Command::SweepRho(_) => {
            let s = commands::sweep(&config)?;
            for p in &s.points {
                println!(
                    "rho {:.2}  lambda_sq {:.6}  objective {:.6}",
                    p.rho, p.lambda_sq.mean, p.objective.mean
                );
            }
        }
    }
    println!("outputs in {}", config.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
