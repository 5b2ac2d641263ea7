//! `lexshift`: batch pipeline from a corpus to attributed word-usage shifts.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lexshift_core::didreg::DesignMode;
use lexshift_core::syncontrol::DonorStrategy;

use config::{Overrides, RunConfig, DOCUMENTED_DEFAULTS};
use error::CliResult;

#[derive(Parser)]
#[command(
    name = "lexshift",
    version,
    about = "Detect and attribute shifts in word usage"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML run configuration; relative paths inside resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct WordArgs {
    /// Stem to analyze; repeatable.
    #[arg(long = "word")]
    words: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Build monthly frequency series from the corpus.
    Ingest {
        #[command(flatten)]
        common: Common,
    },
    /// Score the contrastive vocabulary.
    Score {
        #[command(flatten)]
        common: Common,
    },
    /// Fit synthetic controls (default words: the top-k scored).
    Synth {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        words: WordArgs,
        #[arg(long)]
        strategy: Option<DonorStrategy>,
    },
    /// In-space placebo test for fitted words.
    Placebo {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        words: WordArgs,
    },
    /// In-time placebo test for fitted words.
    Intime {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        words: WordArgs,
    },
    /// Bayesian difference-in-differences against the synthetic control.
    Did {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        words: WordArgs,
        #[arg(long)]
        mode: Option<DesignMode>,
    },
    /// Run the pipeline on simulated series with known effects.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Scenario TOML.
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Print every config key with its default.
    Defaults,
}

fn load(
    common: &Common,
    strategy: Option<DonorStrategy>,
    mode: Option<DesignMode>,
) -> CliResult<RunConfig> {
    let overrides = Overrides {
        seed: common.seed,
        out: common.out.clone(),
        strategy,
        mode,
    };
    RunConfig::load(common.config.as_deref(), &overrides)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Ingest { common } => commands::ingest(&load(&common, None, None)?),
        Command::Score { common } => commands::score(&load(&common, None, None)?),
        Command::Synth {
            common,
            words,
            strategy,
        } => commands::synth(&load(&common, strategy, None)?, &words.words),
        Command::Placebo { common, words } => {
            commands::placebo(&load(&common, None, None)?, &words.words)
        }
        Command::Intime { common, words } => {
            commands::intime(&load(&common, None, None)?, &words.words)
        }
        Command::Did {
            common,
            words,
            mode,
        } => commands::did(&load(&common, None, mode)?, &words.words),
        Command::Simulate { common, scenario } => {
            let out = match (&common.out, &common.config) {
                (Some(o), _) => o.clone(),
                (None, Some(_)) => load(&common, None, None)?.output_dir,
                (None, None) => commands::default_out(),
            };
            commands::simulate(&scenario, common.seed, &out)
        }
        Command::Defaults => {
            print!("{DOCUMENTED_DEFAULTS}");
            Ok(())
        }
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
