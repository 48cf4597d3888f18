//! `sameproj` command-line front end.
//!
//! Every subcommand reads its inputs, writes its outputs and, when it has an
//! output location, a `RunManifest` with content hashes of both.
//!
//! Exit codes: 0 success, 1 validation error, 2 environment error (for
//! example git missing), 64 usage error.

mod commands;
mod manifest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use sameproj_core::ingest::ParseMode;
use sameproj_core::metrics::Smoothing;
use sameproj_core::provenance::ProvenanceError;
use sameproj_core::{Language, PipelineConfig};

pub use manifest::{sha256_file, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_ENVIRONMENT: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

/// Marker for failures caused by the environment rather than the input.
#[derive(Debug)]
pub struct Environment(pub String);

impl std::fmt::Display for Environment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Environment {}

#[derive(Debug, Parser)]
#[command(name = "sameproj", version, about = "Same-project dataset construction and evaluation")]
struct Cli {
    /// Pipeline configuration file (TOML, or JSON with a .json extension).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Root seed; overrides the configuration file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ParseArgs {
    /// Abort on the first malformed record (default).
    #[arg(long, conflicts_with = "lenient")]
    strict: bool,
    /// Skip malformed records and report them.
    #[arg(long)]
    lenient: bool,
}

impl ParseArgs {
    fn mode(&self) -> ParseMode {
        if self.lenient {
            ParseMode::Lenient
        } else {
            ParseMode::Strict
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate and normalize raw JSONL records.
    Ingest {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        lang: Option<Language>,
        #[command(flatten)]
        parse: ParseArgs,
    },
    /// Attach creation dates mined with git blame.
    Dates {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Directory holding checkouts as <owner>/<name>.
        #[arg(long)]
        repos: PathBuf,
        /// Revisions file passed to git blame --ignore-revs-file.
        #[arg(long)]
        ignore_revs: Option<PathBuf>,
        #[command(flatten)]
        parse: ParseArgs,
    },
    /// Time-split each project into train/valid/test.
    Split {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        lang: Option<Language>,
    },
    /// Identifier overlap between early and later samples of each project.
    Overlap {
        #[arg(long = "in")]
        input: PathBuf,
        /// CSV output; a JSON copy is written alongside.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        group_size: usize,
        #[arg(long)]
        lang: Option<Language>,
    },
    /// Build denoising pairs from training-partition docstrings.
    Noise {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Treat records without a partition label as training data.
        #[arg(long)]
        assume_train: bool,
        #[arg(long)]
        lang: Option<Language>,
    },
    /// Score predictions against references with smoothed BLEU-4.
    Bleu {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long, default_value = "orange-add1")]
        smoothing: Smoothing,
        #[arg(long)]
        lowercase: bool,
        /// Report path; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Paired comparison of two BLEU reports.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Mean BLEU difference that counts as noticeable.
        #[arg(long)]
        threshold: Option<f64>,
        /// Rank zero differences before dropping them.
        #[arg(long)]
        pratt: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Days until each project has N samples, against its lifespan.
    Feasibility {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        repos: PathBuf,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long)]
        lang: Option<Language>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Same-project versus cross-project training cost.
    Cost {
        /// Cross-project training set size.
        #[arg(long)]
        cross: u64,
        /// Same-project training set size.
        #[arg(long, required_unless_present = "split_dir")]
        same: Option<u64>,
        /// Output of `split`; reports the largest project and the sum over
        /// categories I and II.
        #[arg(long, conflicts_with = "same")]
        split_dir: Option<PathBuf>,
        #[arg(long)]
        lang: Option<Language>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Markdown summary of earlier outputs.
    Report {
        #[arg(long)]
        split_dir: Option<PathBuf>,
        #[arg(long)]
        overlap: Option<PathBuf>,
        #[arg(long)]
        feasibility: Option<PathBuf>,
        #[arg(long)]
        cost: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<PipelineConfig> {
    let mut cfg = match path {
        None => PipelineConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            if p.extension().is_some_and(|e| e == "json") {
                serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            } else {
                toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
        }
    };
    if let Some(seed) = seed {
        cfg.rng_seed = seed;
    }
    Ok(cfg)
}

fn exit_code(err: &anyhow::Error) -> i32 {
    let environmental = err.chain().any(|cause| {
        cause.downcast_ref::<Environment>().is_some()
            || cause
                .downcast_ref::<ProvenanceError>()
                .is_some_and(ProvenanceError::is_environmental)
    });
    if environmental {
        EXIT_ENVIRONMENT
    } else {
        EXIT_VALIDATION
    }
}

/// Parse `argv` (program name first) and execute one subcommand.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let command_line = argv
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join(" ");
    let started = manifest::now();

    let cfg = match load_config(cli.config.as_deref(), cli.seed).and_then(|cfg| {
        cfg.validate()?;
        Ok(cfg)
    }) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e:#}");
            return EXIT_VALIDATION;
        }
    };

    let mut log = manifest::RunLog::default();
    if let Some(path) = &cli.config {
        log.input(path);
    }
    let (code, cfg) = match commands::execute(cli.command, cfg.clone(), &mut log) {
        Ok(cfg) => (EXIT_OK, cfg),
        Err(e) => {
            eprintln!("error: {e:#}");
            (exit_code(&e), cfg)
        }
    };
    if let Err(e) = log.finish(command_line, &cfg, started, code) {
        eprintln!("error: writing run manifest: {e:#}");
        return if code == EXIT_OK { EXIT_VALIDATION } else { code };
    }
    code
}
