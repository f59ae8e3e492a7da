use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser)]
#[command(name = "fairgram", version, about = "Balanced synthetic hate-speech datasets from a slot grammar")]
struct Cli {
    /// Pipeline configuration (TOML); the built-in desk configuration by default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read annotated posts into slot spans and context spans.
    Ingest {
        #[arg(long)]
        input: PathBuf,
    },
    /// Cluster spans into equivalence classes; the demo lexicon when no spans are given.
    Cluster {
        #[arg(long)]
        spans: Option<PathBuf>,
        /// Held-out clusters per kind added to the demo lexicon.
        #[arg(long, default_value_t = 2)]
        held_out: usize,
    },
    /// Extend a sparse label with model-generated spans (remote backend only).
    Augment {
        #[arg(long)]
        spans: PathBuf,
        /// Slot label to extend, e.g. ThreateningSpeech.
        #[arg(long)]
        label: String,
    },
    /// Compute per-pair quotas and report balance issues.
    Plan,
    /// Instantiate the plan and build instance trees.
    Build {
        #[arg(long)]
        clusters: Option<PathBuf>,
        /// Build even when the plan reports issues.
        #[arg(long)]
        allow_infeasible: bool,
    },
    /// Turn trees into posts.
    Realize {
        #[arg(long, value_enum)]
        backend: Option<BackendArg>,
        #[arg(long)]
        trees: Option<PathBuf>,
        #[arg(long)]
        clusters: Option<PathBuf>,
    },
    /// Recount pair, class and injection balance of a dataset.
    VerifyBalance {
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Also compare against the planned counts.
        #[arg(long)]
        plan: bool,
        /// Exit with status 1 on any violation.
        #[arg(long)]
        strict: bool,
    },
    /// Stratified train/dev/test split and manifest.
    Split {
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Training set mixing real and synthetic records.
    Mix {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        synthetic: PathBuf,
        /// Share of synthetic records.
        #[arg(long)]
        fraction: f64,
        #[arg(long)]
        total: usize,
    },
    /// Generalisation test suites.
    Bench {
        #[command(subcommand)]
        action: BenchAction,
    },
    /// Baseline predictions for a gold file.
    Predict {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, value_enum, default_value_t = Baseline::Majority)]
        baseline: Baseline,
        /// Training records for the majority class.
        #[arg(long)]
        train: Option<PathBuf>,
    },
    /// Score predictions.
    Eval {
        #[arg(long, value_enum)]
        setting: SettingArg,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[command(flatten)]
        productions: ProductionArgs,
    },
    /// Summarise the files in the output directory.
    Report,
    /// Hermetic pipeline: plan, build, realize, verify, split, bench, predict, eval.
    Run {
        #[arg(long)]
        clusters: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum BenchAction {
    /// Build the configured tests, disjoint from the training pairs.
    Build {
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        clusters: Option<PathBuf>,
    },
    /// Count test instances sharing a cluster pair with training.
    Audit {
        #[arg(long)]
        bench: Option<PathBuf>,
        #[arg(long)]
        train: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Template,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum SettingArg {
    Cls,
    Icsf,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Baseline {
    /// Most frequent training class with an unspecified target.
    Majority,
    /// The gold labels themselves.
    Gold,
}

#[derive(Args, Clone, Copy)]
struct ProductionArgs {
    /// Leave intent nodes out of the production sets.
    #[arg(long)]
    no_intents: bool,
    /// Position-free multiset productions.
    #[arg(long)]
    multiset: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
