use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BenchError, Dataset, Instance};
use crate::constraints::Verifier;
use crate::knowledge::{Embedder, KnowledgeStore};
use crate::llm::Generator;
use crate::search::{Method, Outcome, SearchLimits, SearchTrace, Termination, TraceEvent};
use crate::text::TemplateCatalog;

/// How many instances pool their edits into one retrieval store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchSize {
    Count(usize),
    Full,
}

impl BatchSize {
    pub fn parse(text: &str) -> Option<Self> {
        let text = text.trim();
        if text.eq_ignore_ascii_case("full") {
            return Some(BatchSize::Full);
        }
        text.parse().ok().filter(|n| *n > 0).map(BatchSize::Count)
    }
}

impl fmt::Display for BatchSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BatchSize::Count(n) => write!(f, "{n}"),
            BatchSize::Full => f.write_str("full"),
        }
    }
}

/// A group of instances answered against the union of their edits.
#[derive(Debug, Clone)]
pub struct Batch {
    /// Indices into the dataset.
    pub members: Vec<usize>,
    pub store: KnowledgeStore,
}

/// Groups instances in dataset order (or a seeded shuffle of it) and builds
/// one store per group from the members' edits and distractors.
pub fn make_batches(
    ds: &Dataset,
    batch: BatchSize,
    shuffle_seed: Option<u64>,
    embedder: Arc<dyn Embedder>,
) -> Result<Vec<Batch>, BenchError> {
    let mut order: Vec<usize> = (0..ds.len()).collect();
    if let Some(seed) = shuffle_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let size = match batch {
        BatchSize::Count(0) => return Err(BenchError::Config("batch size must be positive".into())),
        BatchSize::Count(n) => n,
        BatchSize::Full => ds.len().max(1),
    };
    order
        .chunks(size)
        .map(|members| {
            let facts = members
                .iter()
                .flat_map(|i| {
                    let inst = &ds.instances[*i];
                    inst.edits.iter().chain(&inst.distractors).cloned()
                })
                .collect();
            Ok(Batch {
                members: members.to_vec(),
                store: KnowledgeStore::build(facts, embedder.clone())?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub batch: BatchSize,
    pub limits: SearchLimits,
    /// Worker threads for the instance fan-out.
    pub parallelism: usize,
    pub shuffle_seed: Option<u64>,
    /// Zero out wall-clock fields so reports are byte-reproducible.
    pub stable: bool,
    /// Keep full search traces in the report.
    pub keep_traces: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            batch: BatchSize::Count(100),
            limits: SearchLimits::default(),
            parallelism: 4,
            shuffle_seed: None,
            stable: false,
            keep_traces: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub id: String,
    pub question: String,
    pub predicted: Option<String>,
    pub gold: String,
    pub correct: bool,
    pub termination: Option<Termination>,
    pub expansions: usize,
    pub generator_calls: usize,
    pub verifier_calls: usize,
    pub backtracks: usize,
    pub wall_time_ms: f64,
    /// Why the instance did not produce a clean answer, if it did not.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub method: String,
    pub dataset: String,
    pub batch_size: String,
    pub instances: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub mean_steps: f64,
    pub mean_generator_calls: f64,
    pub mean_time_ms: f64,
    pub flagged: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub summary: EvalSummary,
    pub records: Vec<EvalRecord>,
    /// Present when [`EvalConfig::keep_traces`] is set, aligned with `records`.
    pub traces: Vec<SearchTrace>,
}

impl EvalReport {
    pub fn from_records(method: &str, dataset: &str, batch_size: &str, records: Vec<EvalRecord>) -> Self {
        let n = records.len();
        let mean = |f: &dyn Fn(&EvalRecord) -> f64| {
            if n == 0 {
                0.0
            } else {
                records.iter().map(f).sum::<f64>() / n as f64
            }
        };
        let correct = records.iter().filter(|r| r.correct).count();
        let summary = EvalSummary {
            method: method.into(),
            dataset: dataset.into(),
            batch_size: batch_size.into(),
            instances: n,
            correct,
            accuracy: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
            mean_steps: mean(&|r| r.expansions as f64),
            mean_generator_calls: mean(&|r| r.generator_calls as f64),
            mean_time_ms: mean(&|r| r.wall_time_ms),
            flagged: records.iter().filter(|r| r.flag.is_some()).count(),
        };
        Self {
            summary,
            records,
            traces: Vec::new(),
        }
    }

    /// One JSON object per line, in record order.
    pub fn to_jsonl(&self) -> Result<String, BenchError> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    /// Writes `<stem>.jsonl` and `<stem>.summary.json` into `dir`, plus
    /// `<stem>.traces.jsonl` when traces were kept. Returns the paths.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>, BenchError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| BenchError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let records = dir.join(format!("{stem}.jsonl"));
        std::fs::write(&records, self.to_jsonl()?).map_err(io(&records))?;
        let summary = dir.join(format!("{stem}.summary.json"));
        std::fs::write(&summary, serde_json::to_string_pretty(&self.summary)? + "\n").map_err(io(&summary))?;
        let mut paths = vec![records, summary];
        if !self.traces.is_empty() {
            let traces = dir.join(format!("{stem}.traces.jsonl"));
            let mut file = std::fs::File::create(&traces).map_err(io(&traces))?;
            for t in &self.traces {
                writeln!(file, "{}", serde_json::to_string(t)?).map_err(io(&traces))?;
            }
            paths.push(traces);
        }
        Ok(paths)
    }
}

/// Everything a method needs besides the question.
pub struct Runner<'a> {
    pub backend: &'a dyn Generator,
    pub verifier: &'a dyn Verifier,
    pub catalog: &'a TemplateCatalog,
}

fn record_for(inst: &Instance, outcome: &Outcome, wall_time_ms: f64) -> EvalRecord {
    let predicted = outcome.answer.clone();
    let correct = predicted.as_deref().is_some_and(|p| inst.is_correct(p));
    let flag = match outcome.termination {
        Termination::Answered => None,
        other => {
            let reason = serde_json::to_value(other)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default();
            let incident = outcome.trace.incidents().next().map(|e| match e {
                TraceEvent::GeneratorDeadEnd { message, .. }
                | TraceEvent::RetrievalFailed { message, .. }
                | TraceEvent::VerifierIncident { message, .. } => message.clone(),
                _ => String::new(),
            });
            Some(match incident {
                Some(m) => format!("{reason}: {m}"),
                None => reason,
            })
        }
    };
    EvalRecord {
        id: inst.id.clone(),
        question: inst.questions[0].clone(),
        predicted,
        gold: inst.new_answer.clone(),
        correct,
        termination: Some(outcome.termination),
        expansions: outcome.trace.totals.expansions,
        generator_calls: outcome.trace.totals.generator_calls,
        verifier_calls: outcome.trace.totals.verifier_calls,
        backtracks: outcome.trace.backtracks(),
        wall_time_ms,
        flag,
    }
}

/// Runs `method` on the first question of every instance.
///
/// Instances fan out over a thread pool; records come back in dataset order.
/// A failing instance scores as incorrect and is flagged.
pub fn evaluate(
    method: Method,
    ds: &Dataset,
    cfg: &EvalConfig,
    runner: &Runner<'_>,
    embedder: Arc<dyn Embedder>,
) -> Result<EvalReport, BenchError> {
    cfg.limits.validate().map_err(|e| BenchError::Config(e.to_string()))?;
    let batches = make_batches(ds, cfg.batch, cfg.shuffle_seed, embedder)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism.max(1))
        .build()
        .map_err(|e| BenchError::Config(format!("thread pool: {e}")))?;
    let jobs: Vec<(usize, &KnowledgeStore)> = batches
        .iter()
        .flat_map(|b| b.members.iter().map(move |i| (*i, &b.store)))
        .collect();
    let mut results: Vec<(usize, EvalRecord, Option<SearchTrace>)> = pool.install(|| {
        jobs.par_iter()
            .map(|(i, store)| {
                let inst = &ds.instances[*i];
                let started = Instant::now();
                let mut outcome = method.run(
                    &inst.questions[0],
                    store,
                    runner.backend,
                    runner.verifier,
                    runner.catalog,
                    cfg.limits,
                );
                let elapsed = if cfg.stable {
                    0.0
                } else {
                    started.elapsed().as_secs_f64() * 1e3
                };
                if cfg.stable {
                    outcome.trace.totals.wall_time_ms = 0.0;
                }
                let record = record_for(inst, &outcome, elapsed);
                (*i, record, cfg.keep_traces.then_some(outcome.trace))
            })
            .collect()
    });
    results.sort_by_key(|(i, _, _)| *i);
    let mut traces = Vec::new();
    let records = results
        .into_iter()
        .map(|(_, r, t)| {
            traces.extend(t);
            r
        })
        .collect();
    let mut report = EvalReport::from_records(method.name(), &ds.name, &cfg.batch.to_string(), records);
    report.traces = traces;
    Ok(report)
}
