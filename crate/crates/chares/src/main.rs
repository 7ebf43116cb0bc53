use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use chares::config::Config;
use chares::runner::{
    cmd_evaluate, cmd_sweep_jammer, cmd_train_agent, cmd_train_classifier, default_config_text,
    resolve, PolicyKind,
};

/// Closed-loop FIR waveform synthesis experiments: train the frozen receiver
/// classifier, train the filter-synthesis agent against it, and compare
/// frozen policies under degraded channels.
#[derive(Parser)]
#[command(name = "chares", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train the receiver-side classifier on its nominal channel regime.
    TrainClassifier {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train the TD3 filter-synthesis agent against a frozen classifier.
    TrainAgent {
        #[command(flatten)]
        common: CommonArgs,
        /// Classifier checkpoint base path (default: <out_dir>/classifier).
        #[arg(long)]
        classifier: Option<PathBuf>,
    },
    /// Evaluate a frozen policy across the scenario's SNR grid.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// Which policy to run: chares | none | static.
        #[arg(long)]
        policy: String,
        #[arg(long)]
        classifier: Option<PathBuf>,
        /// Agent checkpoint directory (default: <out_dir>/agent).
        #[arg(long)]
        agent: Option<PathBuf>,
    },
    /// Evaluate all three policies across the jammer power grid.
    SweepJammer {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        classifier: Option<PathBuf>,
        #[arg(long)]
        agent: Option<PathBuf>,
    },
    /// Print the default experiment config.
    EmitDefaultConfig,
}

fn run() -> chares::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::TrainClassifier { common } => {
            let resolved = resolve(
                &Config::from_path(&common.config)?,
                common.seed,
                common.out_dir.as_deref(),
            )?;
            let path = cmd_train_classifier(&resolved)?;
            println!("classifier written to {}", path.display());
        }
        Command::TrainAgent { common, classifier } => {
            let resolved = resolve(
                &Config::from_path(&common.config)?,
                common.seed,
                common.out_dir.as_deref(),
            )?;
            let path = cmd_train_agent(&resolved, classifier.as_deref())?;
            println!("agent written to {}", path.display());
        }
        Command::Evaluate { common, policy, classifier, agent } => {
            let resolved = resolve(
                &Config::from_path(&common.config)?,
                common.seed,
                common.out_dir.as_deref(),
            )?;
            let kind = PolicyKind::parse(&policy)?;
            let path = cmd_evaluate(&resolved, kind, classifier.as_deref(), agent.as_deref())?;
            println!("results written to {}", path.display());
        }
        Command::SweepJammer { common, classifier, agent } => {
            let resolved = resolve(
                &Config::from_path(&common.config)?,
                common.seed,
                common.out_dir.as_deref(),
            )?;
            let path = cmd_sweep_jammer(&resolved, classifier.as_deref(), agent.as_deref())?;
            println!("results written to {}", path.display());
        }
        Command::EmitDefaultConfig => {
            print!("{}", default_config_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
