use std::collections::VecDeque;

use super::{Expander, Outcome, SearchLimits, Termination, TraceEvent};
use crate::constraints::Verifier;
use crate::knowledge::KnowledgeStore;
use crate::llm::{extract_answer, CountingGenerator, Generator};

/// Breadth-first search over the same candidate tree as [`super::dfs`].
///
/// Each expanded node is checked for a terminal candidate first; the
/// leftmost answer in level order wins.
pub fn bfs(
    question: &str,
    store: &KnowledgeStore,
    backend: &dyn Generator,
    verifier: &dyn Verifier,
    limits: SearchLimits,
) -> Outcome {
    let counter = CountingGenerator::new(backend);
    let mut ex = Expander::new("bfs", question, store, &counter, verifier, limits);
    let budget = limits.node_budget.max(1);
    let mut depth_limited = false;
    let mut queue = VecDeque::from([Vec::<String>::new()]);

    while let Some(chain) = queue.pop_front() {
        if ex.expansions() >= budget {
            ex.trace.events.push(TraceEvent::BudgetExceeded {
                expansions: ex.expansions(),
            });
            return ex.finish(Termination::BudgetExceeded, None);
        }
        let iteration = ex.expand(chain);
        let ranked = ex.trace.iterations[iteration].ranked.clone();
        let terminal = ranked
            .iter()
            .copied()
            .find(|i| extract_answer(&ex.trace.iterations[iteration].candidates[*i].text).is_some());
        if let Some(candidate) = terminal {
            let chain = ex.choose(iteration, candidate);
            let answer = extract_answer(chain.last().expect("chosen step")).expect("terminal step");
            ex.trace.events.push(TraceEvent::AnswerFound {
                iteration,
                answer: answer.clone(),
            });
            return ex.finish(Termination::Answered, Some((answer, chain)));
        }
        for candidate in ranked {
            let child = ex.choose(iteration, candidate);
            if child.len() >= limits.d_max {
                depth_limited = true;
                ex.trace.events.push(TraceEvent::DepthLimited {
                    iteration,
                    depth: child.len(),
                });
                continue;
            }
            queue.push_back(child);
        }
    }

    if depth_limited {
        ex.finish(Termination::DepthLimited, None)
    } else {
        ex.finish(Termination::Exhausted, None)
    }
}
