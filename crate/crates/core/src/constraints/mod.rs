//! The four step constraints and their verifiers.
//!
//! A candidate step is valid when it is unique within the chain
//! ([`ConstraintKind::Conciseness`]), follows from the previous step
//! ([`ConstraintKind::Coherence`]), does not contradict any edited fact
//! ([`ConstraintKind::Receptiveness`]) and relates to the question
//! ([`ConstraintKind::Pertinence`]).

mod fault;
mod judge;
mod rules;

pub use fault::FaultInjectingVerifier;
pub use judge::{
    build_judge_prompt, judge_context, load_demonstrations, parse_judgment, DemoSet, Demonstration, JudgeVerifier,
    JUDGE_RETRIES,
};
pub use rules::RuleVerifier;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::knowledge::KnowledgeStore;

#[derive(Debug, Error)]
pub enum ConstraintError {
    #[error("cannot read demonstrations")]
    Io(#[from] std::io::Error),
    #[error("malformed demonstrations file")]
    Json(#[from] serde_json::Error),
    #[error("need {needed} {label} demonstrations for {kind}, found {found}")]
    NotEnoughDemos {
        kind: ConstraintKind,
        label: &'static str,
        needed: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    Conciseness,
    Coherence,
    Receptiveness,
    Pertinence,
}

impl ConstraintKind {
    pub const ALL: [ConstraintKind; 4] = [
        ConstraintKind::Conciseness,
        ConstraintKind::Coherence,
        ConstraintKind::Receptiveness,
        ConstraintKind::Pertinence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConstraintKind::Conciseness => "conciseness",
            ConstraintKind::Coherence => "coherence",
            ConstraintKind::Receptiveness => "receptiveness",
            ConstraintKind::Pertinence => "pertinence",
        }
    }
}

impl fmt::Display for ConstraintKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Order used by [`verify_all`]: syntactic and store checks run before the
/// relevance judgments.
pub const VERIFICATION_ORDER: [ConstraintKind; 4] = [
    ConstraintKind::Conciseness,
    ConstraintKind::Receptiveness,
    ConstraintKind::Coherence,
    ConstraintKind::Pertinence,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub kind: ConstraintKind,
    pub passed: bool,
    pub rationale: String,
    pub verifier_id: String,
    /// Not evaluated because an earlier constraint failed; counts as failed.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub skipped: bool,
    /// Set when the verifier could not produce a judgment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub incident: Option<String>,
}

impl Verdict {
    pub fn pass(kind: ConstraintKind, verifier_id: &str, rationale: impl Into<String>) -> Self {
        Self {
            kind,
            passed: true,
            rationale: rationale.into(),
            verifier_id: verifier_id.to_string(),
            skipped: false,
            incident: None,
        }
    }

    pub fn fail(kind: ConstraintKind, verifier_id: &str, rationale: impl Into<String>) -> Self {
        Self {
            passed: false,
            ..Self::pass(kind, verifier_id, rationale)
        }
    }

    fn skipped(kind: ConstraintKind, verifier_id: &str) -> Self {
        Self {
            skipped: true,
            ..Self::fail(kind, verifier_id, "skipped")
        }
    }
}

/// What a verifier may look at: the question, the accepted steps so far and
/// the edited-fact store.
#[derive(Debug, Clone, Copy)]
pub struct VerifierContext<'a> {
    pub question: &'a str,
    pub chain: &'a [String],
    pub store: &'a KnowledgeStore,
}

pub trait Verifier: Send + Sync {
    fn verify(&self, kind: ConstraintKind, ctx: &VerifierContext<'_>, candidate: &str) -> Verdict;
    fn id(&self) -> &str;
}

impl<V: Verifier + ?Sized> Verifier for std::sync::Arc<V> {
    fn verify(&self, kind: ConstraintKind, ctx: &VerifierContext<'_>, candidate: &str) -> Verdict {
        (**self).verify(kind, ctx, candidate)
    }
    fn id(&self) -> &str {
        (**self).id()
    }
}

/// Runs all four constraints in [`VERIFICATION_ORDER`], short-circuiting on
/// the first failure. Always returns four verdicts.
pub fn verify_all(verifier: &dyn Verifier, ctx: &VerifierContext<'_>, candidate: &str) -> Vec<Verdict> {
    let mut out = Vec::with_capacity(4);
    let mut failed = false;
    for kind in VERIFICATION_ORDER {
        if failed {
            out.push(Verdict::skipped(kind, verifier.id()));
            continue;
        }
        let verdict = if candidate.trim().is_empty() {
            Verdict::fail(kind, verifier.id(), "empty candidate")
        } else {
            verifier.verify(kind, ctx, candidate)
        };
        failed = !verdict.passed;
        out.push(verdict);
    }
    out
}

/// Number of verdicts that actually ran.
pub fn evaluated(verdicts: &[Verdict]) -> usize {
    verdicts.iter().filter(|v| !v.skipped).count()
}

pub fn all_passed(verdicts: &[Verdict]) -> bool {
    verdicts.len() == 4 && verdicts.iter().all(|v| v.passed)
}
