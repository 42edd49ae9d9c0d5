//! Constraint verification by prompting a generator with labelled
//! demonstrations and reading a Yes/No judgment.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ConstraintError, ConstraintKind, Verdict, Verifier, VerifierContext};
use crate::llm::{GenerationRequest, Generator};

/// Retries after an unparsable judgment.
pub const JUDGE_RETRIES: usize = 2;
/// Facts shown to the receptiveness judge.
const RECEPTIVENESS_FACTS: usize = 3;

/// A labelled example for one constraint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demonstration {
    pub constraint: ConstraintKind,
    pub context: String,
    pub candidate: String,
    pub label: bool,
}

pub fn load_demonstrations(path: &Path) -> Result<Vec<Demonstration>, ConstraintError> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Demonstrations drawn once per constraint and frozen.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DemoSet {
    per_kind: BTreeMap<ConstraintKind, Vec<Demonstration>>,
}

impl DemoSet {
    /// Samples `positives` positive and `negatives` negative demonstrations
    /// per constraint with a seeded generator. The result alternates
    /// positive and negative examples.
    pub fn sample(
        pool: &[Demonstration],
        positives: usize,
        negatives: usize,
        seed: u64,
    ) -> Result<Self, ConstraintError> {
        let mut per_kind = BTreeMap::new();
        for (i, kind) in ConstraintKind::ALL.into_iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let pick = |label: bool, count: usize, rng: &mut ChaCha8Rng| {
                let candidates: Vec<&Demonstration> = pool
                    .iter()
                    .filter(|d| d.constraint == kind && d.label == label)
                    .collect();
                if candidates.len() < count {
                    return Err(ConstraintError::NotEnoughDemos {
                        kind,
                        label: if label { "positive" } else { "negative" },
                        needed: count,
                        found: candidates.len(),
                    });
                }
                Ok(candidates
                    .choose_multiple(rng, count)
                    .map(|d| (*d).clone())
                    .collect::<Vec<_>>())
            };
            let pos = pick(true, positives, &mut rng)?;
            let neg = pick(false, negatives, &mut rng)?;
            let mut merged = Vec::with_capacity(pos.len() + neg.len());
            let mut pos = pos.into_iter();
            let mut neg = neg.into_iter();
            loop {
                match (pos.next(), neg.next()) {
                    (None, None) => break,
                    (p, n) => merged.extend(p.into_iter().chain(n)),
                }
            }
            per_kind.insert(kind, merged);
        }
        Ok(Self { per_kind })
    }

    pub fn get(&self, kind: ConstraintKind) -> &[Demonstration] {
        self.per_kind.get(&kind).map_or(&[], Vec::as_slice)
    }
}

fn requirement(kind: ConstraintKind) -> &'static str {
    match kind {
        ConstraintKind::Conciseness => "The candidate step must not repeat any of the previous steps.",
        ConstraintKind::Coherence => {
            "The candidate step must continue directly from the previous step, or from the question when there is no previous step."
        }
        ConstraintKind::Receptiveness => "The candidate step must not contradict any of the new facts.",
        ConstraintKind::Pertinence => "The candidate step must be relevant to answering the question.",
    }
}

/// The sentence pair a judge sees for `kind`, apart from the candidate.
pub fn judge_context(kind: ConstraintKind, ctx: &VerifierContext<'_>, candidate: &str) -> String {
    let joined = |items: &[String]| {
        if items.is_empty() {
            "(none)".to_string()
        } else {
            items.join(" | ")
        }
    };
    match kind {
        ConstraintKind::Conciseness => format!("Previous steps: {}", joined(ctx.chain)),
        ConstraintKind::Coherence => format!(
            "Question: {}\nPrevious step: {}",
            ctx.question,
            ctx.chain.last().map_or("(none)", String::as_str)
        ),
        ConstraintKind::Receptiveness => {
            let facts = match ctx.store.retrieve_top_n(candidate, RECEPTIVENESS_FACTS) {
                Ok(hits) => hits.iter().map(|h| h.fact.text.clone()).collect::<Vec<_>>(),
                Err(e) => {
                    tracing::warn!(error = %e, "retrieval failed while building judge context");
                    Vec::new()
                }
            };
            format!("New facts: {}", joined(&facts))
        }
        ConstraintKind::Pertinence => format!("Question: {}", ctx.question),
    }
}

fn render_example(context: &str, candidate: &str) -> String {
    format!("{context}\nCandidate step: {candidate}\nSatisfied:")
}

/// Builds a Yes/No judgment prompt with the given demonstrations.
pub fn build_judge_prompt(
    kind: ConstraintKind,
    ctx: &VerifierContext<'_>,
    candidate: &str,
    demos: &[Demonstration],
) -> String {
    let mut prompt = format!(
        "You check one step of a multi-hop reasoning chain.\nConstraint ({kind}): {}\nReply Yes if the candidate step satisfies the constraint, otherwise reply No.\n\n",
        requirement(kind)
    );
    for demo in demos {
        prompt.push_str(&render_example(&demo.context, &demo.candidate));
        prompt.push_str(if demo.label { " Yes\n\n" } else { " No\n\n" });
    }
    prompt.push_str(&render_example(&judge_context(kind, ctx, candidate), candidate));
    prompt
}

/// Reads a leading "yes"/"no", ignoring case and leading punctuation.
pub fn parse_judgment(text: &str) -> Option<bool> {
    let word: String = text
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .chars()
        .take_while(|c| c.is_alphabetic())
        .collect::<String>()
        .to_lowercase();
    match word.as_str() {
        "yes" => Some(true),
        "no" => Some(false),
        _ => None,
    }
}

/// Four in-context judges sharing one generator.
pub struct JudgeVerifier {
    backend: Arc<dyn Generator>,
    demos: DemoSet,
    id: String,
}

impl JudgeVerifier {
    pub fn new(backend: Arc<dyn Generator>, demos: DemoSet) -> Self {
        let id = format!("judge:{}", backend.id());
        Self { backend, demos, id }
    }

    pub fn demos(&self) -> &DemoSet {
        &self.demos
    }
}

impl Verifier for JudgeVerifier {
    fn verify(&self, kind: ConstraintKind, ctx: &VerifierContext<'_>, candidate: &str) -> Verdict {
        let request = GenerationRequest {
            prompt: build_judge_prompt(kind, ctx, candidate, self.demos.get(kind)),
            temperature: 0.0,
            stop_sequences: vec!["\n".into()],
            max_tokens: 16,
        };
        let mut last = String::new();
        for _ in 0..=JUDGE_RETRIES {
            match self.backend.complete(&request) {
                Ok(text) => match parse_judgment(&text) {
                    Some(true) => return Verdict::pass(kind, &self.id, text.trim()),
                    Some(false) => return Verdict::fail(kind, &self.id, text.trim()),
                    None => last = text,
                },
                Err(e) => {
                    let mut v = Verdict::fail(kind, &self.id, "backend error");
                    v.incident = Some(e.to_string());
                    return v;
                }
            }
        }
        let mut v = Verdict::fail(kind, &self.id, "unparsable");
        v.incident = Some(format!("unparsable judge output: {}", last.trim()));
        v
    }

    fn id(&self) -> &str {
        &self.id
    }
}
