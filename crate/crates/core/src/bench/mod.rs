//! Datasets, benchmark construction, synthetic data and evaluation.

mod conflicts;
mod dataset;
mod eval;
mod pairs;
mod stats;
mod synth;

pub use conflicts::{build_clean, build_hard, detect_conflicts, CleanMode};
pub use dataset::{load_mquake, parse_cases, Dataset, Instance, Loaded};
pub use eval::{evaluate, make_batches, Batch, BatchSize, EvalConfig, EvalRecord, EvalReport, EvalSummary, Runner};
pub use pairs::{evaluate_verifier, gen_verifier_suite, to_demonstrations, VerifierPair};
pub use stats::{stats, StatsRow};
pub use synth::{gen_synthetic, DistractorMode, SynthConfig, Synthetic};

use std::path::PathBuf;

use thiserror::Error;

use crate::knowledge::KnowledgeError;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("cannot access `{path}`")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("`{path}` is not a JSON array of cases")]
    Format { path: PathBuf, source: serde_json::Error },
    #[error("`{0}` contains no loadable cases")]
    Empty(PathBuf),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
