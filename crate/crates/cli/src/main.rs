use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use etpa_cli::config::{Overrides, Scenario};
use etpa_cli::error::CliError;

#[derive(Parser)]
#[command(
    name = "etpa",
    version,
    about = "Entangled two-photon absorption detectability calculations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute one scenario and write CSV/JSON outputs plus a manifest
    Run(RunArgs),
    /// Check a configuration and print it with every default filled in
    Validate(RunArgs),
    /// List the built-in scenarios
    ListScenarios,
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    scenario: Option<Scenario>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// worker threads; results do not depend on it
    #[arg(long)]
    threads: Option<usize>,
    /// pump bandwidth, nm
    #[arg(long)]
    pump_sigma_nm: Option<f64>,
    /// dotted override, e.g. notch.eta=0.9 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// directory with ktp_sellmeier.toml and/or samples.toml
    #[arg(long, env = "ETPA_DATA_DIR")]
    data_dir: Option<PathBuf>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            scenario: self.scenario,
            seed: self.seed,
            output_dir: self.output_dir.clone(),
            pump_sigma_nm: self.pump_sigma_nm,
            set: self.set.clone(),
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::ListScenarios => {
            for s in Scenario::ALL {
                println!("{:<8} {}", s.to_string(), s.describe());
            }
            Ok(())
        }
        Command::Validate(args) => {
            let (data, _) = etpa_cli::load_data(args.data_dir.as_deref())?;
            let (plan, _) = etpa_cli::resolve(args.config.as_deref(), &args.overrides(), &data)?;
            println!("OK");
            print!("{}", plan.echo_toml());
            Ok(())
        }
        Command::Run(args) => {
            if let Some(n) = args.threads {
                if n == 0 {
                    return Err(CliError::Config(
                        "invalid parameter `threads`: must be >= 1".into(),
                    ));
                }
                rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                    .map_err(|e| CliError::Config(format!("threads: {e}")))?;
            }
            let dir = etpa_cli::run(
                args.config.as_deref(),
                &args.overrides(),
                args.data_dir.as_deref(),
            )?;
            println!("wrote {}", dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
