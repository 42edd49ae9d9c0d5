//! Labelled (context, candidate) pairs for measuring verifier accuracy.

use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BenchError, Dataset, EvalRecord, EvalReport, Instance};
use crate::constraints::{judge_context, ConstraintKind, Demonstration, Verifier, VerifierContext};
use crate::knowledge::{EditedFact, Embedder, KnowledgeStore, Triple};
use crate::text::{contains_phrase, render_answer_step, TemplateCatalog};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifierPair {
    pub id: String,
    pub constraint: ConstraintKind,
    pub question: String,
    pub chain: Vec<String>,
    /// Contents of the retrieval store for this pair.
    pub facts: Vec<EditedFact>,
    pub candidate: String,
    pub label: bool,
}

fn steps(inst: &Instance, catalog: &TemplateCatalog) -> Option<Vec<String>> {
    let mut out = inst
        .gold_chain
        .iter()
        .map(|t| catalog.render(t))
        .collect::<Option<Vec<_>>>()?;
    out.push(render_answer_step(&inst.new_answer));
    Some(out)
}

/// Builds `per_constraint` pairs for each constraint, alternating positive
/// and negative labels. Labels follow from how each candidate is built:
/// positives are the next gold step, negatives repeat a step, jump to an
/// unrelated entity, or contradict an edit.
pub fn gen_verifier_suite(ds: &Dataset, per_constraint: usize, seed: u64) -> Result<Vec<VerifierPair>, BenchError> {
    let catalog = TemplateCatalog::standard();
    let eligible: Vec<(&Instance, Vec<String>)> = ds
        .instances
        .iter()
        .filter(|i| i.hops() >= 2 && !i.edits.is_empty())
        .filter_map(|i| steps(i, &catalog).map(|s| (i, s)))
        .collect();
    if eligible.len() < 2 {
        return Err(BenchError::Config(
            "verifier suite needs at least two instances with 2+ hops and an edit".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(per_constraint * 4);
    for kind in ConstraintKind::ALL {
        for j in 0..per_constraint {
            let label = j % 2 == 0;
            let (inst, gold) = &eligible[rng.gen_range(0..eligible.len())];
            let h = inst.hops();
            let (k, candidate) = 'pick: {
                let k = rng.gen_range(0..=h);
                let candidate = if label {
                    gold[k].clone()
                } else {
                    match kind {
                        ConstraintKind::Conciseness => {
                            let k = rng.gen_range(1..=h);
                            break 'pick (k, gold[rng.gen_range(0..k)].clone());
                        }
                        ConstraintKind::Receptiveness => {
                            let edit = inst.edits.choose(&mut rng).expect("non-empty edits");
                            let k = inst
                                .gold_chain
                                .iter()
                                .position(|t| t.key() == edit.triple.key())
                                .expect("edits lie on the gold chain");
                            let other = unrelated(&eligible, inst, &mut rng);
                            let wrong = Triple::new(&edit.triple.subject, &edit.triple.relation, &other.new_answer)
                                .expect("non-empty names");
                            break 'pick (k, catalog.render(&wrong).expect("known relation"));
                        }
                        ConstraintKind::Coherence | ConstraintKind::Pertinence => {
                            let other = unrelated(&eligible, inst, &mut rng);
                            if k == h && kind == ConstraintKind::Coherence {
                                render_answer_step(&other.new_answer)
                            } else {
                                let t = other.gold_chain.choose(&mut rng).expect("hops > 0");
                                catalog.render(t).expect("known relation")
                            }
                        }
                    }
                };
                (k, candidate)
            };
            pairs.push(VerifierPair {
                id: format!("{}-{j}", kind.name()),
                constraint: kind,
                question: inst.questions[0].clone(),
                chain: gold[..k].to_vec(),
                facts: inst.edits.clone(),
                candidate,
                label,
            });
        }
    }
    Ok(pairs)
}

/// Another instance sharing no entity with `inst`.
fn unrelated<'a>(eligible: &'a [(&'a Instance, Vec<String>)], inst: &Instance, rng: &mut ChaCha8Rng) -> &'a Instance {
    let mentions = |other: &Instance| {
        other.gold_chain.iter().any(|t| {
            [&t.subject, &t.object].into_iter().any(|e| {
                contains_phrase(&inst.questions[0], e)
                    || inst
                        .gold_chain
                        .iter()
                        .any(|g| g.subject.eq_ignore_ascii_case(e) || g.object.eq_ignore_ascii_case(e))
            })
        })
    };
    for _ in 0..64 {
        let (other, _) = &eligible[rng.gen_range(0..eligible.len())];
        if other.id != inst.id && !mentions(other) {
            return other;
        }
    }
    eligible
        .iter()
        .map(|(o, _)| *o)
        .find(|o| o.id != inst.id && !mentions(o))
        .expect("dataset has an unrelated instance")
}

/// Scores `verifier` on every pair, one report per constraint in
/// [`ConstraintKind::ALL`] order. `predicted` is "yes" or "no".
pub fn evaluate_verifier(
    verifier: &dyn Verifier,
    pairs: &[VerifierPair],
    embedder: Arc<dyn Embedder>,
    stable: bool,
) -> Result<Vec<EvalReport>, BenchError> {
    let records: Vec<(ConstraintKind, EvalRecord)> = pairs
        .par_iter()
        .map(|p| {
            let store = KnowledgeStore::build(p.facts.clone(), embedder.clone())?;
            let ctx = VerifierContext {
                question: &p.question,
                chain: &p.chain,
                store: &store,
            };
            let started = Instant::now();
            let v = verifier.verify(p.constraint, &ctx, &p.candidate);
            let wall = if stable {
                0.0
            } else {
                started.elapsed().as_secs_f64() * 1e3
            };
            let yes_no = |b: bool| if b { "yes" } else { "no" }.to_string();
            Ok((
                p.constraint,
                EvalRecord {
                    id: p.id.clone(),
                    question: p.candidate.clone(),
                    predicted: Some(yes_no(v.passed)),
                    gold: yes_no(p.label),
                    correct: v.passed == p.label,
                    termination: None,
                    expansions: 0,
                    generator_calls: 0,
                    verifier_calls: 1,
                    backtracks: 0,
                    wall_time_ms: wall,
                    flag: v.incident,
                },
            ))
        })
        .collect::<Result<_, BenchError>>()?;
    Ok(ConstraintKind::ALL
        .into_iter()
        .map(|kind| {
            let mine = records
                .iter()
                .filter(|(k, _)| *k == kind)
                .map(|(_, r)| r.clone())
                .collect();
            EvalReport::from_records(verifier.id(), &format!("verifier-suite/{kind}"), "1", mine)
        })
        .collect())
}

/// Converts pairs into judge demonstrations.
pub fn to_demonstrations(
    pairs: &[VerifierPair],
    embedder: Arc<dyn Embedder>,
) -> Result<Vec<Demonstration>, BenchError> {
    pairs
        .iter()
        .map(|p| {
            let store = KnowledgeStore::build(p.facts.clone(), embedder.clone())?;
            let ctx = VerifierContext {
                question: &p.question,
                chain: &p.chain,
                store: &store,
            };
            Ok(Demonstration {
                constraint: p.constraint,
                context: judge_context(p.constraint, &ctx, &p.candidate),
                candidate: p.candidate.clone(),
                label: p.label,
            })
        })
        .collect()
}
