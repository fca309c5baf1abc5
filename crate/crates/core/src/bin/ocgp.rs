use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ocgp::experiment::{self, ProbeVariant, RunOptions};
use ocgp::SceneConfig;

#[derive(Parser)]
#[command(name = "ocgp", about = "Object-centric GP experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Probe a single object open loop.
    ProbeSingle {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        variant: Option<Variant>,
    },
    /// Probe several objects open loop.
    ProbeMulti {
        #[command(flatten)]
        common: Common,
    },
    /// Run the planner towards the goal region.
    Plan {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    snapshots: Option<usize>,
    #[arg(long)]
    no_images: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Tipping,
    Pushing,
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    let (common, artifacts) = match cli.command {
        Command::ProbeSingle { common, variant } => {
            let cfg = SceneConfig::load(&common.config)?;
            let variant = variant.map(|v| match v {
                Variant::Tipping => ProbeVariant::Tipping,
                Variant::Pushing => ProbeVariant::Pushing,
            });
            let a = experiment::run_probe_single(&cfg, variant, options(&common))?;
            (common, a)
        }
        Command::ProbeMulti { common } => {
            let cfg = SceneConfig::load(&common.config)?;
            let a = experiment::run_probe_multi(&cfg, options(&common))?;
            (common, a)
        }
        Command::Plan { common } => {
            let cfg = SceneConfig::load(&common.config)?;
            let a = experiment::run_plan(&cfg, options(&common))?;
            (common, a)
        }
    };
    experiment::write_artifacts(&artifacts, &common.out, !common.no_images)?;
    println!("{}", serde_json::to_string_pretty(&artifacts.summary)?);
    Ok(())
}

fn options(common: &Common) -> RunOptions {
    RunOptions {
        seed: common.seed,
        snapshots: common.snapshots,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
