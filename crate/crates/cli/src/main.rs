//! Command-line front end for the event-signal pipeline.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 missing prerequisite artifact (the message names the stage to run).

mod commands;
mod config;
mod error;
mod manifest;

use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::PipelineConfig;
use error::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "eventscope",
    version,
    about = "Detect and describe entity-level events in timestamped news text"
)]
struct Cli {
    /// Config file of `key = value` lines; defaults apply for absent keys.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Overrides the configured random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Overrides the configured worker thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the corpus and lexicon into a binary sentence store.
    Ingest,
    /// Pair mention sentences with events and write training labels.
    Label,
    /// Train sentence embeddings on the ingested corpus.
    TrainEmbed,
    /// Train the relevance classifier on labeled sentence vectors.
    TrainClf,
    /// Cross-validate the classifier and write the metric report.
    Evaluate,
    /// Aggregate sentence scores into entity, group, and global indices.
    Index,
    /// Rank the most event-relevant excerpts within one period.
    Describe {
        /// Period to describe: YYYY-MM, YYYY-Wnn, or YYYY-Qn.
        #[arg(long)]
        period: String,
        /// Comma-separated entity ids to restrict to; default is all.
        #[arg(long, default_value = "")]
        entities: String,
    },
    /// Generate a synthetic corpus, lexicon, and event list.
    Synth,
}

fn load_config(cli: &Cli) -> CliResult<PipelineConfig> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            PipelineConfig::parse(&text, path).map_err(CliError::Usage)?
        }
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Usage("threads must be positive".into()));
        }
        config.threads = threads;
    }
    Ok(config)
}

fn run(cli: Cli) -> CliResult<String> {
    let config = load_config(&cli)?;
    match cli.command {
        Command::Ingest => commands::ingest(&config),
        Command::Label => commands::label(&config),
        Command::TrainEmbed => commands::train_embed(&config),
        Command::TrainClf => commands::train_clf(&config),
        Command::Evaluate => commands::evaluate(&config),
        Command::Index => commands::index(&config),
        Command::Describe { period, entities } => commands::describe(&config, &period, &entities),
        Command::Synth => commands::synth(&config),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests are not failures.
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(summary) => println!("{summary}"),
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}
