use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rws_cli::{run_experiment, CliError, CommandKind, ExperimentConfig};

#[derive(Parser)]
#[command(name = "rws", version, about = "Recency weighted sampler experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate one trajectory and write trajectory.csv
    Simulate(ExperimentConfig),
    /// Minimal k-CURB blocks, written to curb.json
    Curb(ExperimentConfig),
    /// Mean-field fixed point and optional k sweep, written to fixed_point.json
    FixedPoint(ExperimentConfig),
    /// Integrate the mean-value ODE and write meanpath.csv
    Meanfield(ExperimentConfig),
    /// Windowed distance between two chains, written to ergodicity.csv
    Ergodicity(ExperimentConfig),
    /// Stationary exceedance probabilities, written to concentration.csv
    Concentration(ExperimentConfig),
    /// Time spent near the minimal CURB blocks, written to occupancy.csv
    Occupancy(ExperimentConfig),
    /// Stationary mean squared distance to x* per beta, written to variance.csv
    VarianceScan(ExperimentConfig),
    /// Trajectories of RWS and the comparison processes
    Compare(ExperimentConfig),
    /// Run the experiment described by a TOML or JSON config file
    Run {
        config: PathBuf,
        #[arg(long, env = "RWS_OUT_DIR")]
        out_dir: Option<PathBuf>,
    },
}

fn config_of(cmd: Cmd) -> Result<ExperimentConfig, CliError> {
    let (kind, mut config) = match cmd {
        Cmd::Run { config, out_dir } => {
            let mut c = ExperimentConfig::from_file(&config)?;
            if out_dir.is_some() {
                c.out_dir = out_dir;
            }
            return Ok(c);
        }
        Cmd::Simulate(c) => (CommandKind::Simulate, c),
        Cmd::Curb(c) => (CommandKind::Curb, c),
        Cmd::FixedPoint(c) => (CommandKind::FixedPoint, c),
        Cmd::Meanfield(c) => (CommandKind::Meanfield, c),
        Cmd::Ergodicity(c) => (CommandKind::Ergodicity, c),
        Cmd::Concentration(c) => (CommandKind::Concentration, c),
        Cmd::Occupancy(c) => (CommandKind::Occupancy, c),
        Cmd::VarianceScan(c) => (CommandKind::VarianceScan, c),
        Cmd::Compare(c) => (CommandKind::Compare, c),
    };
    config.command = Some(kind);
    Ok(config)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = config_of(cli.command).and_then(|c| run_experiment(&c));
    match result {
        Ok(report) => {
            for f in &report.files {
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
