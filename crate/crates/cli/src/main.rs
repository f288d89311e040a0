use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mvfbm_cli::{parse_with_overrides, run, Command, Overrides, RunError};

#[derive(Parser)]
#[command(name = "mvfbm", version, about = "Tamed theta schemes for neutral McKean-Vlasov delay equations driven by fBm")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Sample fractional Brownian paths on the problem grid.
    SampleFbm(Common),
    /// One particle-system run.
    Simulate(Common),
    /// Strong error against the step size.
    Convergence(Common),
    /// Propagation-of-chaos error against the particle count.
    Chaos(Common),
    /// Randomised scans of the standing assumptions.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// Flat key=value configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out`).
    #[arg(long)]
    out: Option<String>,
    /// Master seed (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let (command, args) = match Cli::parse().command {
        Sub::SampleFbm(a) => (Command::SampleFbm, a),
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::Convergence(a) => (Command::Convergence, a),
        Sub::Chaos(a) => (Command::Chaos, a),
        Sub::Validate(a) => (Command::Validate, a),
    };
    let result = std::fs::read_to_string(&args.config)
        .map_err(|source| RunError::Io { path: args.config.clone(), source })
        .and_then(|text| {
            let overrides = Overrides { command: Some(command), out: args.out, seed: args.seed };
            Ok(parse_with_overrides(&text, &overrides)?)
        })
        .and_then(|cfg| run(&cfg));
    match result {
        Ok(summary) => {
            for f in &summary.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
