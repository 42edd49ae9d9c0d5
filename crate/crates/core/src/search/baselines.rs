//! Single-path baselines without constraint checks.

use std::time::Instant;

use super::{Candidate, IterationRecord, Outcome, SearchLimits, SearchTrace, Termination, Totals, TraceEvent};
use crate::knowledge::KnowledgeStore;
use crate::llm::{extract_answer, generate_step, CountingGenerator, Generator};
use crate::text::{StepForm, TemplateCatalog};

struct Walk<'a> {
    counter: CountingGenerator<'a>,
    trace: SearchTrace,
    chain: Vec<String>,
    started: Instant,
}

impl<'a> Walk<'a> {
    fn new(method: &str, question: &str, backend: &'a dyn Generator) -> Self {
        Self {
            counter: CountingGenerator::new(backend),
            trace: SearchTrace {
                method: method.into(),
                question: question.into(),
                ..Default::default()
            },
            chain: Vec::new(),
            started: Instant::now(),
        }
    }

    fn record(&mut self, generated: Option<String>, candidates: Vec<Candidate>, chosen: Option<usize>) -> usize {
        let index = self.trace.iterations.len();
        let depth = self.chain.len();
        self.trace.events.push(TraceEvent::Expanded {
            iteration: index,
            depth,
        });
        if let Some(c) = chosen {
            let text = candidates[c].text.clone();
            self.trace.events.push(TraceEvent::Chose {
                iteration: index,
                candidate: c,
                text: text.clone(),
            });
        }
        self.trace.iterations.push(IterationRecord {
            index,
            depth,
            chain: self.chain.clone(),
            generated,
            candidates,
            ranked: Vec::new(),
            chosen: chosen.into_iter().collect(),
        });
        index
    }

    /// Accepts a step; returns the answer if it was terminal.
    fn accept(&mut self, iteration: usize, step: String) -> Option<String> {
        let answer = extract_answer(&step);
        self.chain.push(step);
        if let Some(a) = &answer {
            self.trace.events.push(TraceEvent::AnswerFound {
                iteration,
                answer: a.clone(),
            });
        }
        answer
    }

    fn finish(mut self, termination: Termination, answer: Option<String>) -> Outcome {
        self.trace.totals = Totals {
            expansions: self.trace.iterations.len(),
            generator_calls: self.counter.calls(),
            verifier_calls: 0,
            wall_time_ms: self.started.elapsed().as_secs_f64() * 1e3,
        };
        let chain = if answer.is_some() { self.chain } else { Vec::new() };
        Outcome {
            answer,
            chain,
            termination,
            trace: self.trace,
        }
    }
}

/// Greedy chain with an edit check per step: the generated step is compared
/// against its nearest edited fact, which replaces it when the two disagree
/// on the same subject and relation.
pub fn mello(
    question: &str,
    store: &KnowledgeStore,
    backend: &dyn Generator,
    catalog: &TemplateCatalog,
    limits: SearchLimits,
) -> Outcome {
    let mut walk = Walk::new("mello", question, backend);
    while walk.chain.len() < limits.d_max {
        let step = match generate_step(&walk.counter, question, &walk.chain) {
            Ok(s) => s,
            Err(e) => {
                let it = walk.record(None, Vec::new(), None);
                walk.trace.events.push(TraceEvent::GeneratorDeadEnd {
                    iteration: it,
                    message: e.to_string(),
                });
                return walk.finish(Termination::Exhausted, None);
            }
        };
        let mut candidates = vec![Candidate::parametric(step.clone())];
        let mut chosen = 0;
        if extract_answer(&step).is_none() {
            match store.retrieve_top_n(&step, 1) {
                Ok(hits) => {
                    if let Some(hit) = hits.first() {
                        candidates.push(Candidate::edited(hit.fact.text.clone(), hit.distance, hit.index));
                        if let StepForm::Fact(generated) = catalog.parse_step(&step) {
                            if hit.fact.triple.overrides(&generated) {
                                chosen = 1;
                            }
                        }
                    }
                }
                Err(e) => {
                    let it = walk.trace.iterations.len();
                    walk.trace.events.push(TraceEvent::RetrievalFailed {
                        iteration: it,
                        message: e.to_string(),
                    });
                }
            }
        }
        let text = candidates[chosen].text.clone();
        let it = walk.record(Some(step), candidates, Some(chosen));
        if let Some(answer) = walk.accept(it, text) {
            return walk.finish(Termination::Answered, Some(answer));
        }
    }
    let it = walk.trace.iterations.len().saturating_sub(1);
    walk.trace.events.push(TraceEvent::DepthLimited {
        iteration: it,
        depth: walk.chain.len(),
    });
    walk.finish(Termination::DepthLimited, None)
}

/// Greedy chain from the generator alone, ignoring the edits.
pub fn parametric_only(question: &str, backend: &dyn Generator, limits: SearchLimits) -> Outcome {
    let mut walk = Walk::new("parametric_only", question, backend);
    while walk.chain.len() < limits.d_max {
        match generate_step(&walk.counter, question, &walk.chain) {
            Ok(step) => {
                let it = walk.record(Some(step.clone()), vec![Candidate::parametric(step.clone())], Some(0));
                if let Some(answer) = walk.accept(it, step) {
                    return walk.finish(Termination::Answered, Some(answer));
                }
            }
            Err(e) => {
                let it = walk.record(None, Vec::new(), None);
                walk.trace.events.push(TraceEvent::GeneratorDeadEnd {
                    iteration: it,
                    message: e.to_string(),
                });
                return walk.finish(Termination::Exhausted, None);
            }
        }
    }
    let it = walk.trace.iterations.len().saturating_sub(1);
    walk.trace.events.push(TraceEvent::DepthLimited {
        iteration: it,
        depth: walk.chain.len(),
    });
    walk.finish(Termination::DepthLimited, None)
}
