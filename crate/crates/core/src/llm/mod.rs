//! Black-box text generation: prompt rendering, single-step decoding,
//! answer extraction, and the backends.

mod oracle;
mod remote;

pub use oracle::{FactGraph, GraphError, OracleGenerator, QuestionTemplate};
pub use remote::{RemoteGenerator, ReplayGenerator, ReplayLog, ReplayRecord, WireRequest, WireResponse};

use std::sync::atomic::{AtomicUsize, Ordering};

use thiserror::Error;

/// Stop sequences that end one reasoning step.
pub const STOP_SEQUENCES: [&str; 2] = ["#", "\n"];
/// Token cap for a single step.
pub const MAX_STEP_TOKENS: u32 = 64;
/// Retries after an empty completion before giving up on the node.
pub const EMPTY_COMPLETION_RETRIES: usize = 2;

const THOUGHTS_LABEL: &str = "Thoughts with New Knowledge: ";
const QUESTION_LABEL: &str = "Question: ";

/// Few-shot exemplars prepended to every generation prompt.
pub const GENERATION_EXEMPLARS: [&str; 3] = [
    "Question: What is the capital of the country where Plainfield Town Hall is located?\n\
Thoughts with New Knowledge: Plainfield Town Hall is located in the country of the United States of America.# The capital of United States is Washington, D.C.# Washington, D.C. is the answer.\n\
Answer: Washington, D.C.",
    "Question: In which country is the company that created Nissan 200SX located?\n\
Thoughts with New Knowledge: Nissan 200SX was created by Nissan.# Nissan is located in the country of Japan.# Japan is the answer.\n\
Answer: Japan",
    "Question: Which continent is the country where the director of \"My House Husband: Ikaw Na!\" was educated located in?\n\
Thoughts with New Knowledge: The director of \"My House Husband: Ikaw Na!\" is Jose Javier Reyes.# Jose Javier Reyes was educated at De La Salle University.# De La Salle University is located in the country of Philippines.# Philippines is located in the continent if Asia.# Asia is the answer.\n\
Answer: Asia",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LlmError {
    #[error("backend `{backend}` failed: {message}")]
    Backend {
        backend: String,
        message: String,
        retryable: bool,
    },
    #[error("generator produced no step after {attempts} attempts")]
    DeadEnd { attempts: usize },
    #[error("prompt does not follow the generation template: {0}")]
    UnparseablePrompt(String),
    #[error("question matches no known template: {0}")]
    UnknownQuestion(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRequest {
    pub prompt: String,
    pub temperature: f64,
    pub stop_sequences: Vec<String>,
    pub max_tokens: u32,
}

impl GenerationRequest {
    /// Greedy single-step request.
    pub fn step(prompt: String) -> Self {
        Self {
            prompt,
            temperature: 0.0,
            stop_sequences: STOP_SEQUENCES.iter().map(|s| s.to_string()).collect(),
            max_tokens: MAX_STEP_TOKENS,
        }
    }
}

/// A text generator reachable only through its output text.
pub trait Generator: Send + Sync {
    fn complete(&self, request: &GenerationRequest) -> Result<String, LlmError>;
    fn id(&self) -> &str;
}

impl<G: Generator + ?Sized> Generator for std::sync::Arc<G> {
    fn complete(&self, request: &GenerationRequest) -> Result<String, LlmError> {
        (**self).complete(request)
    }
    fn id(&self) -> &str {
        (**self).id()
    }
}

/// Wraps a generator and counts `complete` calls.
pub struct CountingGenerator<'a> {
    inner: &'a dyn Generator,
    calls: AtomicUsize,
}

impl<'a> CountingGenerator<'a> {
    pub fn new(inner: &'a dyn Generator) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl Generator for CountingGenerator<'_> {
    fn complete(&self, request: &GenerationRequest) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.complete(request)
    }
    fn id(&self) -> &str {
        self.inner.id()
    }
}

/// Builds the few-shot generation prompt. A non-empty chain is followed by
/// a trailing separator so the continuation is the next step.
pub fn render_generation_prompt(question: &str, chain: &[String]) -> String {
    let mut prompt = GENERATION_EXEMPLARS.join("\n\n");
    prompt.push_str("\n\n");
    prompt.push_str(QUESTION_LABEL);
    prompt.push_str(question.trim());
    prompt.push('\n');
    prompt.push_str(THOUGHTS_LABEL);
    if !chain.is_empty() {
        prompt.push_str(&chain.join("# "));
        prompt.push_str("# ");
    }
    prompt
}

/// Recovers `(question, chain)` from a prompt built by
/// [`render_generation_prompt`].
pub fn parse_generation_prompt(prompt: &str) -> Result<(String, Vec<String>), LlmError> {
    let start = prompt
        .rfind(&format!("\n{QUESTION_LABEL}"))
        .map(|i| i + 1)
        .or_else(|| prompt.starts_with(QUESTION_LABEL).then_some(0))
        .ok_or_else(|| LlmError::UnparseablePrompt("missing question".into()))?;
    let tail = &prompt[start + QUESTION_LABEL.len()..];
    let (question, rest) = tail
        .split_once('\n')
        .ok_or_else(|| LlmError::UnparseablePrompt("missing thoughts line".into()))?;
    let thoughts = rest
        .strip_prefix(THOUGHTS_LABEL)
        .or_else(|| rest.strip_prefix(THOUGHTS_LABEL.trim_end()))
        .ok_or_else(|| LlmError::UnparseablePrompt("missing thoughts label".into()))?;
    if thoughts.contains('\n') {
        return Err(LlmError::UnparseablePrompt("target block is already answered".into()));
    }
    let chain = thoughts
        .split('#')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    Ok((question.trim().to_string(), chain))
}

/// Cuts a completion at the first stop sequence and trims it.
pub fn first_step(completion: &str, stops: &[String]) -> String {
    let cut = stops
        .iter()
        .filter(|s| !s.is_empty())
        .filter_map(|s| completion.find(s.as_str()))
        .min()
        .unwrap_or(completion.len());
    completion[..cut].trim().to_string()
}

/// Generates the next reasoning step greedily. Empty completions are retried
/// [`EMPTY_COMPLETION_RETRIES`] times before reporting a dead end.
pub fn generate_step(backend: &dyn Generator, question: &str, chain: &[String]) -> Result<String, LlmError> {
    let request = GenerationRequest::step(render_generation_prompt(question, chain));
    let attempts = EMPTY_COMPLETION_RETRIES + 1;
    for _ in 0..attempts {
        let completion = backend.complete(&request)?;
        let step = first_step(&completion, &request.stop_sequences);
        if !step.is_empty() {
            return Ok(step);
        }
    }
    Err(LlmError::DeadEnd { attempts })
}

/// Pulls the final answer out of a terminal step: `"<X> is the answer."` or
/// `"Answer: <X>"`.
pub fn extract_answer(step: &str) -> Option<String> {
    let trimmed = step.trim();
    let body = trimmed.trim_end_matches(|c: char| matches!(c, '.' | '!' | '?') || c.is_whitespace());
    const MARKER: &str = " is the answer";
    if body.len() > MARKER.len() {
        let split = body.len() - MARKER.len();
        if body.is_char_boundary(split) && body[split..].eq_ignore_ascii_case(MARKER) {
            let answer = body[..split].trim();
            if !answer.is_empty() {
                return Some(answer.to_string());
            }
        }
    }
    if trimmed.len() >= 7 && trimmed.is_char_boundary(7) && trimmed[..7].eq_ignore_ascii_case("answer:") {
        let answer = trimmed[7..].trim();
        if !answer.is_empty() {
            return Some(answer.to_string());
        }
    }
    None
}
