use super::{Expander, Outcome, SearchLimits, Termination, TraceEvent};
use crate::constraints::Verifier;
use crate::knowledge::KnowledgeStore;
use crate::llm::{extract_answer, CountingGenerator, Generator};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DfsOptions {
    /// Return at the first answer instead of exploring the whole tree.
    pub early_stop: bool,
}

impl Default for DfsOptions {
    fn default() -> Self {
        Self { early_stop: true }
    }
}

struct Frame {
    iteration: usize,
    cursor: usize,
}

/// Depth-first search with early stop.
pub fn dfs(
    question: &str,
    store: &KnowledgeStore,
    backend: &dyn Generator,
    verifier: &dyn Verifier,
    limits: SearchLimits,
) -> Outcome {
    dfs_with(question, store, backend, verifier, limits, DfsOptions::default())
}

pub fn dfs_with(
    question: &str,
    store: &KnowledgeStore,
    backend: &dyn Generator,
    verifier: &dyn Verifier,
    limits: SearchLimits,
    options: DfsOptions,
) -> Outcome {
    let counter = CountingGenerator::new(backend);
    let method = if options.early_stop { "dfs" } else { "dfs_exhaustive" };
    let mut ex = Expander::new(method, question, store, &counter, verifier, limits);
    let budget = limits.node_budget.max(1);

    let mut first_answer: Option<(String, Vec<String>)> = None;
    let mut depth_limited = false;
    let root = ex.expand(Vec::new());
    let mut stack = vec![Frame {
        iteration: root,
        cursor: 0,
    }];

    while let Some(top) = stack.last_mut() {
        let rec = &ex.trace.iterations[top.iteration];
        let Some(&candidate) = rec.ranked.get(top.cursor) else {
            let from_depth = rec.depth;
            let iteration = top.iteration;
            stack.pop();
            if let Some(parent) = stack.last() {
                let to_depth = ex.trace.iterations[parent.iteration].depth;
                ex.trace.events.push(TraceEvent::Backtracked {
                    iteration,
                    from_depth,
                    to_depth,
                });
            }
            continue;
        };
        top.cursor += 1;
        let iteration = top.iteration;
        let chain = ex.choose(iteration, candidate);

        if let Some(answer) = extract_answer(chain.last().expect("chosen step")) {
            ex.trace.events.push(TraceEvent::AnswerFound {
                iteration,
                answer: answer.clone(),
            });
            if options.early_stop {
                return ex.finish(Termination::Answered, Some((answer, chain)));
            }
            first_answer.get_or_insert((answer, chain));
            continue;
        }
        if chain.len() >= limits.d_max {
            depth_limited = true;
            ex.trace.events.push(TraceEvent::DepthLimited {
                iteration,
                depth: chain.len(),
            });
            continue;
        }
        if ex.expansions() >= budget {
            ex.trace.events.push(TraceEvent::BudgetExceeded {
                expansions: ex.expansions(),
            });
            return match first_answer {
                Some(found) => ex.finish(Termination::Answered, Some(found)),
                None => ex.finish(Termination::BudgetExceeded, None),
            };
        }
        let child = ex.expand(chain);
        stack.push(Frame {
            iteration: child,
            cursor: 0,
        });
    }

    match first_answer {
        Some(found) => ex.finish(Termination::Answered, Some(found)),
        None if depth_limited => ex.finish(Termination::DepthLimited, None),
        None => ex.finish(Termination::Exhausted, None),
    }
}
