//! Step-level search over constrained candidates.
//!
//! At every node the generator proposes one greedy step and the store
//! contributes the edited facts nearest to it. Candidates passing all four
//! constraints are ranked with edits ahead of the generated step and closer
//! edits first. [`dfs`] follows the top-ranked candidate, backtracks when a
//! node runs out of valid candidates, and stops at the first answer.

mod baselines;
mod bfs;
mod dfs;
mod trace;

pub use baselines::{mello, parametric_only};
pub use bfs::bfs;
pub use dfs::{dfs, dfs_with, DfsOptions};
pub use trace::{render_trace, IterationRecord, SearchTrace, Totals, TraceEvent};

use std::cmp::Ordering;
use std::collections::HashMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{all_passed, evaluated, verify_all, Verdict, Verifier, VerifierContext};
use crate::knowledge::KnowledgeStore;
use crate::llm::{extract_answer, generate_step, CountingGenerator, Generator};
use crate::text::{normalize, TemplateCatalog};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Source {
    Parametric,
    Edited { distance: f64, fact_index: usize },
}

/// A proposed next step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub text: String,
    pub source: Source,
    pub verdicts: Vec<Verdict>,
    /// True iff all four verdicts passed.
    pub valid: bool,
}

impl Candidate {
    pub fn parametric(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            source: Source::Parametric,
            verdicts: Vec::new(),
            valid: false,
        }
    }

    pub fn edited(text: impl Into<String>, distance: f64, fact_index: usize) -> Self {
        Self {
            text: text.into(),
            source: Source::Edited { distance, fact_index },
            verdicts: Vec::new(),
            valid: false,
        }
    }

    pub fn with_verdicts(mut self, verdicts: Vec<Verdict>) -> Self {
        self.valid = all_passed(&verdicts);
        self.verdicts = verdicts;
        self
    }

    pub fn is_edited(&self) -> bool {
        matches!(self.source, Source::Edited { .. })
    }

    pub fn distance(&self) -> Option<f64> {
        match self.source {
            Source::Edited { distance, .. } => Some(distance),
            Source::Parametric => None,
        }
    }

    pub fn answer(&self) -> Option<String> {
        extract_answer(&self.text)
    }
}

/// Importance order: edits before the generated step, closer edits first,
/// then text.
pub fn importance_order(a: &Candidate, b: &Candidate) -> Ordering {
    match (&a.source, &b.source) {
        (
            Source::Edited {
                distance: da,
                fact_index: ia,
            },
            Source::Edited {
                distance: db,
                fact_index: ib,
            },
        ) => da
            .total_cmp(db)
            .then_with(|| a.text.cmp(&b.text))
            .then_with(|| ia.cmp(ib)),
        (Source::Edited { .. }, Source::Parametric) => Ordering::Less,
        (Source::Parametric, Source::Edited { .. }) => Ordering::Greater,
        (Source::Parametric, Source::Parametric) => a.text.cmp(&b.text),
    }
}

/// Sorts valid candidates by [`importance_order`].
pub fn rank(mut valid: Vec<Candidate>) -> Vec<Candidate> {
    valid.sort_by(importance_order);
    valid
}

fn ranked_indices(candidates: &[Candidate]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..candidates.len()).filter(|i| candidates[*i].valid).collect();
    idx.sort_by(|a, b| importance_order(&candidates[*a], &candidates[*b]));
    let mut seen = std::collections::HashSet::new();
    idx.retain(|i| seen.insert(normalize(&candidates[*i].text)));
    idx
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("search limit `{0}` must be positive")]
pub struct LimitsError(pub &'static str);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchLimits {
    /// Edited facts retrieved per node.
    pub retrieval_n: usize,
    /// Maximum chain length, terminal step included.
    pub d_max: usize,
    /// Maximum number of node expansions.
    pub node_budget: usize,
}

impl Default for SearchLimits {
    fn default() -> Self {
        Self {
            retrieval_n: 5,
            d_max: 8,
            node_budget: 200,
        }
    }
}

impl SearchLimits {
    pub fn validate(&self) -> Result<(), LimitsError> {
        if self.retrieval_n == 0 {
            return Err(LimitsError("retrieval_n"));
        }
        if self.d_max == 0 {
            return Err(LimitsError("d_max"));
        }
        if self.node_budget == 0 {
            return Err(LimitsError("node_budget"));
        }
        Ok(())
    }
}

/// A search node: the accepted steps so far.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReasoningState {
    pub chain: Vec<String>,
    pub answer: Option<String>,
}

impl ReasoningState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn depth(&self) -> usize {
        self.chain.len()
    }

    /// Appends an accepted step, setting the answer if it is terminal.
    pub fn push(&mut self, step: String) {
        self.answer = extract_answer(&step);
        self.chain.push(step);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Answered,
    Exhausted,
    BudgetExceeded,
    DepthLimited,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    /// Present iff `termination` is [`Termination::Answered`].
    pub answer: Option<String>,
    /// Accepted steps of the answering chain, terminal step included.
    pub chain: Vec<String>,
    pub termination: Termination,
    pub trace: SearchTrace,
}

/// Result of proposing candidates at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub generated: Option<String>,
    /// The generated step first (when present), then edits by ascending
    /// distance.
    pub candidates: Vec<Candidate>,
    pub generator_error: Option<String>,
    pub retrieval_error: Option<String>,
}

type VerdictCache = HashMap<(String, String), Vec<Verdict>>;

fn chain_key(chain: &[String]) -> String {
    chain.iter().map(|s| normalize(s)).collect::<Vec<_>>().join("\u{1f}")
}

struct Proposer<'a> {
    question: &'a str,
    store: &'a KnowledgeStore,
    backend: &'a dyn Generator,
    verifier: &'a dyn Verifier,
    limits: SearchLimits,
    cache: VerdictCache,
    verifier_calls: usize,
}

impl<'a> Proposer<'a> {
    fn propose(&mut self, chain: &[String]) -> Proposal {
        let (generated, generator_error) = match generate_step(self.backend, self.question, chain) {
            Ok(step) => (Some(step), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let query = generated
            .clone()
            .or_else(|| chain.last().cloned())
            .unwrap_or_else(|| self.question.to_string());

        let mut candidates = Vec::new();
        let mut retrieval_error = None;
        match self.store.retrieve_top_n(&query, self.limits.retrieval_n) {
            Ok(hits) => {
                for hit in hits {
                    candidates.push(Candidate::edited(hit.fact.text.clone(), hit.distance, hit.index));
                }
            }
            Err(e) => retrieval_error = Some(e.to_string()),
        }
        if let Some(step) = &generated {
            let norm = normalize(step);
            if !candidates.iter().any(|c| normalize(&c.text) == norm) {
                candidates.insert(0, Candidate::parametric(step.clone()));
            }
        }

        let key = chain_key(chain);
        let ctx = VerifierContext {
            question: self.question,
            chain,
            store: self.store,
        };
        for c in &mut candidates {
            let cache_key = (key.clone(), normalize(&c.text));
            let verdicts = match self.cache.get(&cache_key) {
                Some(v) => v.clone(),
                None => {
                    let v = verify_all(self.verifier, &ctx, &c.text);
                    self.verifier_calls += evaluated(&v);
                    self.cache.insert(cache_key, v.clone());
                    v
                }
            };
            c.valid = all_passed(&verdicts);
            c.verdicts = verdicts;
        }
        Proposal {
            generated,
            candidates,
            generator_error,
            retrieval_error,
        }
    }
}

/// Proposes and verifies the candidates for one state.
pub fn propose(
    state: &ReasoningState,
    question: &str,
    store: &KnowledgeStore,
    backend: &dyn Generator,
    verifier: &dyn Verifier,
    limits: SearchLimits,
) -> Proposal {
    Proposer {
        question,
        store,
        backend,
        verifier,
        limits,
        cache: HashMap::new(),
        verifier_calls: 0,
    }
    .propose(&state.chain)
}

/// Shared bookkeeping for the tree searches.
struct Expander<'a> {
    proposer: Proposer<'a>,
    counter: &'a CountingGenerator<'a>,
    trace: SearchTrace,
    started: Instant,
}

impl<'a> Expander<'a> {
    fn new(
        method: &str,
        question: &'a str,
        store: &'a KnowledgeStore,
        counter: &'a CountingGenerator<'a>,
        verifier: &'a dyn Verifier,
        limits: SearchLimits,
    ) -> Self {
        Self {
            proposer: Proposer {
                question,
                store,
                backend: counter,
                verifier,
                limits,
                cache: HashMap::new(),
                verifier_calls: 0,
            },
            counter,
            trace: SearchTrace {
                method: method.to_string(),
                question: question.to_string(),
                ..Default::default()
            },
            started: Instant::now(),
        }
    }

    fn expansions(&self) -> usize {
        self.trace.iterations.len()
    }

    /// Expands `chain`, records the iteration and returns its index.
    fn expand(&mut self, chain: Vec<String>) -> usize {
        let index = self.trace.iterations.len();
        let proposal = self.proposer.propose(&chain);
        let depth = chain.len();
        self.trace.events.push(TraceEvent::Expanded {
            iteration: index,
            depth,
        });
        if let Some(message) = proposal.generator_error {
            self.trace.events.push(TraceEvent::GeneratorDeadEnd {
                iteration: index,
                message,
            });
        }
        if let Some(message) = proposal.retrieval_error {
            self.trace.events.push(TraceEvent::RetrievalFailed {
                iteration: index,
                message,
            });
        }
        for (ci, c) in proposal.candidates.iter().enumerate() {
            for v in &c.verdicts {
                if let Some(message) = &v.incident {
                    self.trace.events.push(TraceEvent::VerifierIncident {
                        iteration: index,
                        candidate: ci,
                        message: message.clone(),
                    });
                }
            }
        }
        let ranked = ranked_indices(&proposal.candidates);
        self.trace.iterations.push(IterationRecord {
            index,
            depth,
            chain,
            generated: proposal.generated,
            candidates: proposal.candidates,
            ranked,
            chosen: Vec::new(),
        });
        index
    }

    /// Marks a candidate as accepted and returns the extended chain.
    fn choose(&mut self, iteration: usize, candidate: usize) -> Vec<String> {
        let rec = &mut self.trace.iterations[iteration];
        rec.chosen.push(candidate);
        let text = rec.candidates[candidate].text.clone();
        let mut chain = rec.chain.clone();
        chain.push(text.clone());
        self.trace.events.push(TraceEvent::Chose {
            iteration,
            candidate,
            text,
        });
        chain
    }

    fn finish(mut self, termination: Termination, answer: Option<(String, Vec<String>)>) -> Outcome {
        self.trace.totals = Totals {
            expansions: self.trace.iterations.len(),
            generator_calls: self.counter.calls(),
            verifier_calls: self.proposer.verifier_calls,
            wall_time_ms: self.started.elapsed().as_secs_f64() * 1e3,
        };
        let (answer, chain) = match answer {
            Some((a, c)) => (Some(a), c),
            None => (None, Vec::new()),
        };
        debug_assert_eq!(termination == Termination::Answered, answer.is_some());
        Outcome {
            answer,
            chain,
            termination,
            trace: self.trace,
        }
    }
}

/// Search strategies and baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dfs,
    /// Depth-first search that keeps exploring after the first answer.
    DfsExhaustive,
    Bfs,
    Mello,
    ParametricOnly,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Dfs => "dfs",
            Method::DfsExhaustive => "dfs_exhaustive",
            Method::Bfs => "bfs",
            Method::Mello => "mello",
            Method::ParametricOnly => "parametric_only",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        [
            Method::Dfs,
            Method::DfsExhaustive,
            Method::Bfs,
            Method::Mello,
            Method::ParametricOnly,
        ]
        .into_iter()
        .find(|m| m.name() == name.trim().to_ascii_lowercase().replace('-', "_"))
    }

    #[allow(clippy::too_many_arguments)]
    pub fn run(
        self,
        question: &str,
        store: &KnowledgeStore,
        backend: &dyn Generator,
        verifier: &dyn Verifier,
        catalog: &TemplateCatalog,
        limits: SearchLimits,
    ) -> Outcome {
        match self {
            Method::Dfs => dfs(question, store, backend, verifier, limits),
            Method::DfsExhaustive => dfs_with(
                question,
                store,
                backend,
                verifier,
                limits,
                DfsOptions { early_stop: false },
            ),
            Method::Bfs => bfs(question, store, backend, verifier, limits),
            Method::Mello => mello(question, store, backend, catalog, limits),
            Method::ParametricOnly => parametric_only(question, backend, limits),
        }
    }
}
