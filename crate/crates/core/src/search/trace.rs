use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Candidate, Outcome, Source};

/// One node expansion: the candidates proposed at a state and which of them
/// were valid, in rank order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: usize,
    pub depth: usize,
    pub chain: Vec<String>,
    /// The generator's step, absent on a dead end.
    pub generated: Option<String>,
    pub candidates: Vec<Candidate>,
    /// Indices into `candidates` of the valid ones, highest priority first.
    pub ranked: Vec<usize>,
    /// Indices into `candidates` accepted from this node, in order.
    pub chosen: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Expanded {
        iteration: usize,
        depth: usize,
    },
    Chose {
        iteration: usize,
        candidate: usize,
        text: String,
    },
    Backtracked {
        iteration: usize,
        from_depth: usize,
        to_depth: usize,
    },
    AnswerFound {
        iteration: usize,
        answer: String,
    },
    GeneratorDeadEnd {
        iteration: usize,
        message: String,
    },
    RetrievalFailed {
        iteration: usize,
        message: String,
    },
    VerifierIncident {
        iteration: usize,
        candidate: usize,
        message: String,
    },
    DepthLimited {
        iteration: usize,
        depth: usize,
    },
    BudgetExceeded {
        expansions: usize,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub expansions: usize,
    pub generator_calls: usize,
    pub verifier_calls: usize,
    pub wall_time_ms: f64,
}

/// Complete record of one search.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub method: String,
    pub question: String,
    pub iterations: Vec<IterationRecord>,
    pub events: Vec<TraceEvent>,
    pub totals: Totals,
}

impl SearchTrace {
    pub fn backtracks(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e, TraceEvent::Backtracked { .. }))
            .count()
    }

    pub fn incidents(&self) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(|e| {
            matches!(
                e,
                TraceEvent::GeneratorDeadEnd { .. }
                    | TraceEvent::RetrievalFailed { .. }
                    | TraceEvent::VerifierIncident { .. }
            )
        })
    }
}

fn describe(c: &Candidate) -> String {
    let tag = match &c.source {
        Source::Parametric => "generated".to_string(),
        Source::Edited { distance, .. } => format!("edit d={distance:.3}"),
    };
    let verdicts = c
        .verdicts
        .iter()
        .map(|v| {
            let mark = if v.skipped {
                "-"
            } else if v.passed {
                "ok"
            } else {
                "FAIL"
            };
            format!("{}:{mark}", v.kind)
        })
        .collect::<Vec<_>>()
        .join(" ");
    let valid = if c.valid { "valid" } else { "invalid" };
    format!("[{tag}] {} ({valid}; {verdicts})", c.text)
}

/// Human-readable, iteration-by-iteration rendering of a search.
pub fn render_trace(outcome: &Outcome) -> String {
    let trace = &outcome.trace;
    let mut out = String::new();
    let _ = writeln!(out, "Method: {}", trace.method);
    let _ = writeln!(out, "Question: {}", trace.question);
    for event in &trace.events {
        match event {
            TraceEvent::Expanded { iteration, depth } => {
                let rec = &trace.iterations[*iteration];
                let _ = writeln!(out, "\nIteration {} (depth {depth})", iteration + 1);
                if let Some(g) = &rec.generated {
                    let _ = writeln!(out, "  generated step: {g}");
                }
                let _ = writeln!(out, "  candidates:");
                for c in &rec.candidates {
                    let _ = writeln!(out, "    {}", describe(c));
                }
                let ranked: Vec<&str> = rec.ranked.iter().map(|i| rec.candidates[*i].text.as_str()).collect();
                let _ = writeln!(
                    out,
                    "  ranked valid: {}",
                    if ranked.is_empty() {
                        "(none)".into()
                    } else {
                        ranked.join(" > ")
                    }
                );
            }
            TraceEvent::Chose { iteration, text, .. } => {
                let _ = writeln!(out, "  -> chose (iteration {}): {text}", iteration + 1);
            }
            TraceEvent::Backtracked {
                from_depth, to_depth, ..
            } => {
                let _ = writeln!(out, "  <- backtrack from depth {from_depth} to depth {to_depth}");
            }
            TraceEvent::AnswerFound { answer, .. } => {
                let _ = writeln!(out, "  answer found: {answer}");
            }
            TraceEvent::GeneratorDeadEnd { message, .. } => {
                let _ = writeln!(out, "  generator dead end: {message}");
            }
            TraceEvent::RetrievalFailed { message, .. } => {
                let _ = writeln!(out, "  retrieval failed: {message}");
            }
            TraceEvent::VerifierIncident { message, .. } => {
                let _ = writeln!(out, "  verifier incident: {message}");
            }
            TraceEvent::DepthLimited { depth, .. } => {
                let _ = writeln!(out, "  depth limit reached at depth {depth}");
            }
            TraceEvent::BudgetExceeded { expansions } => {
                let _ = writeln!(out, "  node budget exhausted after {expansions} expansions");
            }
        }
    }
    let _ = writeln!(out, "\nTermination: {:?}", outcome.termination);
    if let Some(a) = &outcome.answer {
        let _ = writeln!(out, "Answer: {a}");
    }
    if !outcome.chain.is_empty() {
        let _ = writeln!(out, "Chain: {}", outcome.chain.join(" # "));
    }
    let t = &trace.totals;
    let _ = writeln!(
        out,
        "Totals: {} expansions, {} generator calls, {} verifier calls, {} backtracks",
        t.expansions,
        t.generator_calls,
        t.verifier_calls,
        trace.backtracks()
    );
    out
}
