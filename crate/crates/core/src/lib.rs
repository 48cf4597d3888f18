//! Dataset construction and evaluation tooling for same-project code
//! summarization.
//!
//! The crate turns CodeXGLUE/CodeSearchNet style function records into
//! time-partitioned per-project datasets, builds a denoising corpus for
//! comment decoders, and scores model outputs with smoothed BLEU-4 and a
//! paired Wilcoxon signed-rank test.
//!
//! Modules follow the pipeline order:
//!
//! * [`ingest`]: JSONL records to [`FunctionSample`] values.
//! * [`provenance`]: creation dates mined from `git blame`.
//! * [`corpus`]: per-project segmentation, leakage-safe time split, categories.
//! * [`identlex`]: identifier extraction and Jaccard overlap matrices.
//! * [`noisegen`]: docstring corruption for decoder pretraining.
//! * [`metrics`]: smooth BLEU-4 and paired model comparison.
//! * [`analytics`]: feasibility and training cost reports.

pub mod analytics;
pub mod config;
pub mod corpus;
pub mod identlex;
pub mod ingest;
pub mod metrics;
pub mod noisegen;
pub mod provenance;
pub mod seed;

pub use analytics::{CostRatio, FeasibilityRow};
pub use config::{ConfigError, PipelineConfig};
pub use corpus::{Category, ProjectCorpus, Split};
pub use identlex::{IdentifierGroup, OverlapMatrix};
pub use ingest::{FunctionSample, Language};
pub use metrics::{BleuBreakdown, PairedComparison, Smoothing};
pub use noisegen::{NoiseMode, NoisedExample};
pub use provenance::LineBlame;

/// Seconds since the Unix epoch, UTC.
pub type Timestamp = i64;
