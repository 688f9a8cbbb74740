//! The `convforest` command line: argument parsing, the seven commands and
//! the exit-code contract (0 success, 1 bad input, 2 internal failure).

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::Error;

#[derive(Debug, Parser)]
#[command(
    name = "convforest",
    version,
    about = "Convolutional features over tabular rows, classified by a fast random forest"
)]
pub struct Cli {
    /// Seed for every random choice (folds, weights, dropout, bootstraps) [default: 1; for
    /// `experiment`, the manifest's seeds]
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads; results are identical for every value
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Print one JSON record on stdout instead of text
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Summarize a dataset: size, classes, missing cells and grid shape
    Inspect {
        /// ARFF or CSV file
        dataset: PathBuf,
        /// Class attribute (default: the last one)
        #[arg(long, value_name = "NAME")]
        class: Option<String>,
    },
    /// Train the convolutional network on a whole dataset and save a checkpoint
    TrainDcnn {
        /// ARFF or CSV file
        dataset: PathBuf,
        /// Checkpoint to write
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Class attribute (default: the last one)
        #[arg(long, value_name = "NAME")]
        class: Option<String>,
        /// Layer preset: small (6-3-3-2-2, 12-3-3-2-2) or large (20-5-5-2-2, 100-5-5-2-2)
        #[arg(long, default_value = "small")]
        preset: String,
        /// Network configuration file (TOML or JSON); replaces --preset
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        /// Grid layout: square (ceil(sqrt d) side) or fit (centred in the smallest grid the layers accept)
        #[arg(long, default_value = "fit")]
        grid: String,
        /// Training epochs
        #[arg(long)]
        epochs: Option<usize>,
        /// SGD learning rate
        #[arg(long)]
        lr: Option<f64>,
        /// SGD momentum
        #[arg(long)]
        momentum: Option<f64>,
        /// Minibatch size
        #[arg(long)]
        batch_size: Option<usize>,
        /// Dropout rate on the input grid
        #[arg(long)]
        input_dropout: Option<f64>,
        /// Dropout rate on the dense hidden layer
        #[arg(long)]
        hidden_dropout: Option<f64>,
        /// Width of the dense hidden layer (the extracted feature count)
        #[arg(long)]
        dense_units: Option<usize>,
        /// Filter initialization: fan-in-scaled or uniform-unit
        #[arg(long)]
        init: Option<String>,
    },
    /// Write a trained network's dense-layer activations as a feature CSV
    Extract {
        /// ARFF or CSV file with the attributes the network was trained on
        dataset: PathBuf,
        /// Checkpoint from train-dcnn
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        /// Feature CSV to write (header f0..f{n-1},class)
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Class attribute (default: the last one)
        #[arg(long, value_name = "NAME")]
        class: Option<String>,
    },
    /// Grow a random forest on a feature CSV or a raw dataset
    TrainFrf {
        /// Feature CSV from extract, or any complete ARFF/CSV dataset
        input: PathBuf,
        /// Forest model to write
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Class attribute (default: the last one)
        #[arg(long, value_name = "NAME")]
        class: Option<String>,
        /// Number of trees
        #[arg(long, default_value_t = 100)]
        trees: usize,
        /// Attributes drawn per split [default: floor(log2 f) + 1]
        #[arg(long)]
        mtry: Option<usize>,
        /// Smallest in-bag weight allowed on either side of a split
        #[arg(long, default_value_t = 1)]
        min_leaf: usize,
        /// Depth limit [default: none]
        #[arg(long)]
        max_depth: Option<usize>,
        /// Write every attribute's importance, descending, as CSV
        #[arg(long, value_name = "PATH")]
        importance: Option<PathBuf>,
    },
    /// Classify a dataset with a network, a forest, or a network feeding a forest
    Predict {
        /// ARFF or CSV file
        dataset: PathBuf,
        /// Checkpoint from train-dcnn
        #[arg(long, value_name = "PATH")]
        network: Option<PathBuf>,
        /// Forest from train-frf; with --network it classifies the extracted features
        #[arg(long, value_name = "PATH")]
        forest: Option<PathBuf>,
        /// Predictions CSV to write (row,predicted,actual)
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Class attribute (default: the last one)
        #[arg(long, value_name = "NAME")]
        class: Option<String>,
    },
    /// Cross-validate every pipeline of a manifest on every dataset and write the report bundle
    Experiment {
        /// Experiment manifest (TOML)
        manifest: PathBuf,
        /// Bundle directory [default: results/<manifest name> next to the manifest]
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Report zero times so reruns are byte-identical
        #[arg(long)]
        no_timing: bool,
        /// Train each dcnn+frf network once on every row and cross-validate only the forest
        #[arg(long)]
        all_rows: bool,
    },
    /// Paired t-test between two lists of fold accuracies
    Ttest {
        /// Comma-separated accuracies, or a report JSON from an experiment bundle
        a: String,
        /// Comma-separated accuracies, or a report JSON from an experiment bundle
        b: String,
    },
}

/// Exit status plus everything the command printed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandResult {
    pub exit_code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// A failure with its exit code and one-line diagnostic.
#[derive(Debug)]
pub(crate) struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn user(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    /// `error` while handling `input`.
    pub fn from_lib(input: impl std::fmt::Display, error: Error) -> Self {
        let code = match error {
            Error::EmptyNode => 2,
            _ => 1,
        };
        let mut message = format!("{input}: {error}");
        if let Error::DivergedLoss { learning_rate, .. } = error {
            message.push_str(&format!("; retry with --lr {}", learning_rate / 10.0));
        }
        CliError { code, message }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> CommandResult
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                CommandResult {
                    exit_code: 1,
                    stdout: String::new(),
                    stderr: text,
                }
            } else {
                CommandResult {
                    exit_code: 0,
                    stdout: text,
                    stderr: String::new(),
                }
            };
        }
    };
    let json = cli.json;
    let name = commands::name(&cli.command);
    let outcome = match cli.threads {
        Some(0) => Err(CliError::user("--threads: must be at least 1")),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| commands::dispatch(&cli)),
            Err(e) => Err(CliError {
                code: 2,
                message: format!("cannot start {n} worker threads: {e}"),
            }),
        },
        None => commands::dispatch(&cli),
    };
    match outcome {
        Ok(stdout) => CommandResult {
            exit_code: 0,
            stdout,
            stderr: String::new(),
        },
        Err(e) => {
            let stdout = if json {
                let record = serde_json::json!({"command": name, "error": e.message, "exit_code": e.code});
                format!("{record}\n")
            } else {
                String::new()
            };
            CommandResult {
                exit_code: e.code,
                stdout,
                stderr: format!("error: {}\n", e.message),
            }
        }
    }
}
