//! Command-line interface. `run` parses arguments, executes one command and
//! returns the process exit code: 0 success, 2 bad input, 3 external
//! service failure, 4 validation failure.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{InputFormat, RunConfig};

use crate::analytics::GroupBy;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_EXTERNAL: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError {
            code: EXIT_INPUT,
            error: e.into(),
        }
    }
}

pub(crate) type CliResult<T = ()> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "delineate", version, about = "Delineate a research field in a citation-index export and analyze it")]
pub struct Cli {
    /// Run configuration (TOML). Paths inside it are relative to its directory.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Print nothing but errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse export files and store their records.
    Ingest {
        files: Vec<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<InputFormat>,
        #[arg(long)]
        corpus: Option<String>,
        /// `ut,topic` side file.
        #[arg(long)]
        topics: Option<PathBuf>,
    },
    /// Show a stored corpus.
    Stat {
        #[arg(long)]
        corpus: Option<String>,
    },
    /// Run strategies over the corpus and write the sorted ut list.
    Search {
        /// Strategy file or `bundled:<name>`; repeatable. Defaults to the
        /// preliminary strategies.
        #[arg(long = "strategy")]
        strategies: Vec<String>,
        /// Output name; the list is written to `<out>/<name>.uts`.
        #[arg(long)]
        name: Option<String>,
    },
    /// Tag the initial corpus with admitting stages.
    Pipeline {
        /// Continue from the checkpoint of an interrupted run.
        #[arg(long)]
        resume: bool,
        /// Initial corpus as a ut list; defaults to `<out>/initial.uts`,
        /// computed from the preliminary strategies when absent.
        #[arg(long)]
        initial: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Sample records for review and write a review sheet.
    Label {
        #[arg(long)]
        n: Option<usize>,
        /// Pool to sample from (ut list); defaults to `<out>/initial.uts`.
        #[arg(long)]
        from: Option<PathBuf>,
        /// Ask for each correction on the terminal.
        #[arg(long)]
        interactive: bool,
    },
    /// Add a reviewed sheet's corrections to the training set.
    Review {
        sheet: PathBuf,
        #[arg(long)]
        per_example: Option<usize>,
        #[arg(long)]
        no_augment: bool,
        /// Augmentation pool (ut list); defaults to `<out>/initial.uts`.
        #[arg(long)]
        from: Option<PathBuf>,
    },
    /// Write the training set as prompt/completion JSONL.
    TrainExport {
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Classify records with the configured backend.
    Classify {
        /// ut list; defaults to the whole corpus.
        #[arg(long)]
        set: Option<PathBuf>,
    },
    /// Precision, recall and F1 against expert labels.
    Eval {
        #[arg(long)]
        gold: Option<PathBuf>,
        /// Predicted ut list; defaults to `<out>/final.uts`.
        #[arg(long)]
        predicted: Option<PathBuf>,
        #[arg(long)]
        resolutions: Option<PathBuf>,
    },
    /// Share of a labeled random sample's relevant records a set captures.
    RecallEstimate {
        #[arg(long)]
        gold: Option<PathBuf>,
        /// ut list whose coverage is measured.
        #[arg(long)]
        members: PathBuf,
        #[arg(long)]
        name: Option<String>,
    },
    /// Overlap counts of two or three ut lists given as NAME=FILE.
    Venn { sets: Vec<String> },
    /// Analytics tables.
    Report {
        /// ut list to analyze; defaults to `<out>/final.uts` when present.
        #[arg(long, global = true)]
        set: Option<PathBuf>,
        #[command(subcommand)]
        which: Report,
    },
}

#[derive(Debug, Subcommand)]
pub enum Report {
    /// Yearly counts per key.
    Trend {
        /// year, country, institution or category.
        #[arg(long, default_value = "year")]
        dimension: String,
        /// Add shares of a yearly denominator.
        #[arg(long)]
        share: bool,
        /// `corpus` (whole stored corpus), `set` (the analyzed set) or a
        /// `year,count` CSV.
        #[arg(long)]
        denominator: Option<String>,
    },
    /// Citation profiles per country or institution.
    Citations {
        #[arg(long, value_enum, default_value = "country")]
        group_by: GroupByArg,
    },
    /// Keyword frequency ranking.
    Keywords {
        #[arg(long)]
        min_count: Option<u64>,
    },
    /// Label a random sample with subfields and count them per year.
    Subfields {
        #[arg(long)]
        n: Option<usize>,
    },
    /// Subfield co-occurrence network.
    Cooccur {
        #[arg(long)]
        threshold: Option<u64>,
        /// `ut,labels` CSV; defaults to `<out>/subfield_labels.csv`.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Most cited records.
    TopCited {
        #[arg(long, short, default_value_t = 10)]
        n: usize,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum GroupByArg {
    Country,
    Institution,
}

impl From<GroupByArg> for GroupBy {
    fn from(g: GroupByArg) -> Self {
        match g {
            GroupByArg::Country => GroupBy::Country,
            GroupByArg::Institution => GroupBy::Institution,
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match commands::execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {:#}", e.error);
            e.code
        }
    }
}
