//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any fails.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use clap::Parser;
use kedit_cli::{run, Cli};
use kedit_core::bench::{
    build_clean, build_hard, detect_conflicts, evaluate, evaluate_verifier, gen_synthetic, gen_verifier_suite,
    load_mquake, to_demonstrations, BatchSize, CleanMode, Dataset, DistractorMode, EvalConfig, Instance, Runner,
    SynthConfig, Synthetic,
};
use kedit_core::constraints::{DemoSet, FaultInjectingVerifier, JudgeVerifier};
use kedit_core::llm::{extract_answer, render_generation_prompt, GenerationRequest, LlmError, RemoteGenerator};
use kedit_core::search::{bfs, dfs, dfs_with, rank, Candidate, DfsOptions, TraceEvent};
use kedit_core::text::TemplateCatalog;
use kedit_core::{
    EditedFact, Embedder, Generator, HashingEmbedder, KnowledgeStore, Method, OracleGenerator, RuleVerifier,
    SearchLimits, Termination, Triple, Verifier,
};
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn embedder() -> Arc<dyn Embedder> {
    Arc::new(HashingEmbedder::new())
}

fn per_instance() -> EvalConfig {
    EvalConfig {
        batch: BatchSize::Count(1),
        stable: true,
        keep_traces: true,
        ..Default::default()
    }
}

fn synth(cfg: SynthConfig) -> Synthetic {
    gen_synthetic(&cfg).expect("valid synthetic config")
}

fn store_for(inst: &Instance) -> KnowledgeStore {
    let facts = inst.edits.iter().chain(&inst.distractors).cloned().collect();
    KnowledgeStore::build(facts, embedder()).expect("store builds")
}

/// Retrieval wide enough to see every fact of a single-instance store.
fn limits_for(store: &KnowledgeStore) -> SearchLimits {
    SearchLimits {
        retrieval_n: store.len().max(5),
        ..SearchLimits::default()
    }
}

fn c1_oracle_end_to_end() -> Check {
    let s = synth(SynthConfig {
        seed: 2024,
        count: 200,
        hops: (2, 4),
        edits: (1, 4),
        ..Default::default()
    });
    let oracle = OracleGenerator::new(s.graph.clone());
    let verifier = RuleVerifier::standard();
    let catalog = TemplateCatalog::standard();
    let runner = Runner {
        backend: &oracle,
        verifier: &verifier,
        catalog: &catalog,
    };
    let started = Instant::now();
    let dfs = evaluate(Method::Dfs, &s.dataset, &per_instance(), &runner, embedder()).map_err(|e| e.to_string())?;
    let param = evaluate(Method::ParametricOnly, &s.dataset, &per_instance(), &runner, embedder())
        .map_err(|e| e.to_string())?;
    let secs = started.elapsed().as_secs_f64();
    ensure(s.dataset.len() == 200, || format!("{} instances", s.dataset.len()))?;
    ensure(dfs.summary.accuracy == 1.0, || {
        format!(
            "dfs accuracy {} (first miss {:?})",
            dfs.summary.accuracy,
            dfs.records.iter().find(|r| !r.correct)
        )
    })?;
    let changed: Vec<_> = s
        .dataset
        .instances
        .iter()
        .zip(&param.records)
        .filter(|(i, _)| i.answer_changed())
        .collect();
    let param_correct = changed.iter().filter(|(_, r)| r.correct).count();
    ensure(!changed.is_empty() && param_correct == 0, || {
        format!(
            "parametric correct on {param_correct}/{} answer-changing instances",
            changed.len()
        )
    })?;
    ensure(secs < 10.0, || format!("took {secs:.2} s"))?;
    Ok(format!(
        "dfs 200/200, parametric 0/{} answer-changing, {secs:.2} s",
        changed.len()
    ))
}

fn c2_best_case_complexity() -> Check {
    let s = synth(SynthConfig {
        seed: 2024,
        count: 200,
        ..Default::default()
    });
    let oracle = OracleGenerator::new(s.graph.clone());
    let verifier = RuleVerifier::standard();
    for inst in &s.dataset.instances {
        let store = store_for(inst);
        let out = dfs(&inst.questions[0], &store, &oracle, &verifier, limits_for(&store));
        ensure(out.trace.totals.expansions == inst.hops() + 1, || {
            format!(
                "instance {}: {} expansions for {} hops",
                inst.id,
                out.trace.totals.expansions,
                inst.hops()
            )
        })?;
    }
    Ok(format!("expansions = hops + 1 on all {} instances", s.dataset.len()))
}

/// First hop at depth `d <= h - 2` whose gold fact is not edited. Deeper
/// hops are skipped: a wrong step there reaches the end of the question
/// path, where the oracle would declare its object the answer.
fn fault_depth(inst: &Instance) -> Option<usize> {
    let edited: HashSet<&Triple> = inst.edits.iter().map(|e| &e.triple).collect();
    (0..inst.hops().saturating_sub(1)).find(|d| !edited.contains(&inst.gold_chain[*d]))
}

fn c3_backtracking_recovery() -> Check {
    let s = synth(SynthConfig {
        seed: 77,
        count: 120,
        hops: (2, 4),
        edits: (1, 2),
        ..Default::default()
    });
    let oracle = OracleGenerator::new(s.graph.clone());
    let mut catalog = TemplateCatalog::standard();
    catalog.extend(s.graph.templates());
    let mut affected = 0;
    let mut correct = 0;
    for inst in &s.dataset.instances {
        let Some(depth) = fault_depth(inst) else {
            let store = store_for(inst);
            let out = dfs(
                &inst.questions[0],
                &store,
                &oracle,
                &RuleVerifier::standard(),
                limits_for(&store),
            );
            correct += usize::from(out.answer.as_deref().is_some_and(|a| inst.is_correct(a)));
            continue;
        };
        // A fact about an unrelated entity: incoherent, so only the fault lets it through.
        let hop = &inst.gold_chain[depth];
        let wrong_triple = Triple::new(&format!("Qorvath Zimuel {}", inst.id), &hop.relation, "Ulvar Pentaro")
            .map_err(|e| e.to_string())?;
        let wrong_text = catalog.render(&wrong_triple).ok_or("no template for distractor")?;
        let mut facts: Vec<EditedFact> = inst.edits.clone();
        facts.push(EditedFact::new(wrong_triple, wrong_text.clone(), "fault"));
        let store = KnowledgeStore::build(facts, embedder()).map_err(|e| e.to_string())?;
        let verifier = FaultInjectingVerifier::new(RuleVerifier::standard(), depth, [wrong_text.clone()]);
        let out = dfs(&inst.questions[0], &store, &oracle, &verifier, limits_for(&store));
        let ok = out.answer.as_deref().is_some_and(|a| inst.is_correct(a));
        correct += usize::from(ok);
        let chose_wrong = out
            .trace
            .events
            .iter()
            .any(|e| matches!(e, TraceEvent::Chose { text, .. } if *text == wrong_text));
        ensure(chose_wrong, || {
            format!("instance {}: injected candidate never chosen", inst.id)
        })?;
        affected += 1;
        ensure(out.trace.backtracks() >= 1, || {
            format!("instance {}: no backtrack", inst.id)
        })?;
        ensure(!out.chain.contains(&wrong_text), || {
            format!("instance {}: wrong step kept", inst.id)
        })?;
        ensure(out.trace.totals.expansions == inst.hops() + 2, || {
            format!(
                "instance {}: {} expansions for {} hops",
                inst.id,
                out.trace.totals.expansions,
                inst.hops()
            )
        })?;
    }
    let n = s.dataset.len();
    ensure(correct == n, || format!("accuracy {correct}/{n}"))?;
    ensure(affected > n / 2, || {
        format!("only {affected}/{n} instances had a fault")
    })?;
    Ok(format!(
        "accuracy {correct}/{n}; {affected} affected traces all backtrack"
    ))
}

fn c4_dfs_vs_bfs() -> Check {
    let s = synth(SynthConfig {
        seed: 404,
        count: 120,
        hops: (2, 4),
        edits: (4, 4),
        distractors: DistractorMode::DeadEnd,
        ..Default::default()
    });
    let oracle = OracleGenerator::new(s.graph.clone());
    let verifier = RuleVerifier::standard();
    let (mut d_total, mut b_total, mut counted) = (0usize, 0usize, 0usize);
    for inst in &s.dataset.instances {
        let store = store_for(inst);
        let limits = limits_for(&store);
        let q = &inst.questions[0];
        let d = dfs(q, &store, &oracle, &verifier, limits);
        let b = bfs(q, &store, &oracle, &verifier, limits);
        for (name, out) in [("dfs", &d), ("bfs", &b)] {
            ensure(out.termination == Termination::Answered, || {
                format!("instance {}: {name} ended {:?}", inst.id, out.termination)
            })?;
        }
        ensure(d.answer == b.answer, || {
            format!("instance {}: {:?} vs {:?}", inst.id, d.answer, b.answer)
        })?;
        ensure(inst.is_correct(d.answer.as_deref().unwrap_or("")), || {
            format!("instance {}: wrong answer", inst.id)
        })?;
        // Only instances where every non-terminal node offers two or more valid steps count.
        let branching = d
            .trace
            .iterations
            .iter()
            .filter(|it| it.depth < inst.hops())
            .all(|it| it.ranked.len() >= 2);
        if !branching {
            continue;
        }
        counted += 1;
        d_total += d.trace.totals.expansions;
        b_total += b.trace.totals.expansions;
    }
    ensure(counted * 2 >= s.dataset.len(), || {
        format!("only {counted} instances branch at every node")
    })?;
    let n = counted as f64;
    let (dm, bm) = (d_total as f64 / n, b_total as f64 / n);
    ensure(dm < bm, || format!("mean expansions dfs {dm:.2} vs bfs {bm:.2}"))?;
    Ok(format!(
        "identical answers on {}; over {counted} branching instances mean expansions dfs {dm:.2} < bfs {bm:.2}",
        s.dataset.len()
    ))
}

fn c5_early_stop() -> Check {
    let s = synth(SynthConfig {
        seed: 505,
        count: 120,
        hops: (2, 4),
        edits: (1, 4),
        distractors: DistractorMode::Branching,
        ..Default::default()
    });
    let oracle = OracleGenerator::new(s.graph.clone());
    let verifier = RuleVerifier::standard();
    let mut multi = 0;
    for inst in &s.dataset.instances {
        let store = store_for(inst);
        let limits = limits_for(&store);
        let q = &inst.questions[0];
        let early = dfs(q, &store, &oracle, &verifier, limits);
        let full = dfs_with(q, &store, &oracle, &verifier, limits, DfsOptions { early_stop: false });
        let (e, f) = (early.trace.totals.expansions, full.trace.totals.expansions);
        ensure(e <= f, || format!("instance {}: early {e} > full {f}", inst.id))?;
        let answers = full
            .trace
            .events
            .iter()
            .filter(|e| matches!(e, TraceEvent::AnswerFound { .. }))
            .count();
        if answers >= 2 {
            multi += 1;
            ensure(e < f, || {
                format!(
                    "instance {}: {answers} complete chains but early {e} = full {f}",
                    inst.id
                )
            })?;
        }
    }
    ensure(multi > 0, || "no instance had two complete chains".into())?;
    Ok(format!(
        "early <= full on {}; strictly fewer on all {multi} multi-chain instances",
        s.dataset.len()
    ))
}

fn t(s: &str, r: &str, o: &str) -> Triple {
    Triple::new(s, r, o).expect("non-empty")
}

fn hand_instance(id: &str, question: &str, chain: Vec<Triple>, edits: Vec<(Triple, &str)>) -> Instance {
    Instance {
        id: id.into(),
        questions: vec![question.into()],
        orig_answer: String::new(),
        orig_answer_aliases: vec![],
        new_answer: chain.last().map(|t| t.object.clone()).unwrap_or_default(),
        answer_aliases: vec![],
        edits: edits
            .into_iter()
            .map(|(tr, text)| EditedFact::new(tr, text, id))
            .collect(),
        gold_chain: chain,
        orig_chain: vec![],
        distractors: vec![],
    }
}

fn c6_conflict_detection() -> Check {
    // Instance 2 edits the UK head of state; instance 1's gold chain still
    // walks through the unedited one, so its annotated answer is stale.
    let one = hand_instance(
        "1",
        "Who is the spouse of the head of state of the United Kingdom?",
        vec![
            t("United Kingdom", "head_of_state", "Charles III"),
            t("Charles III", "spouse", "Camilla"),
        ],
        vec![(
            t("Camilla", "citizen_of", "Ireland"),
            "Camilla is a citizen of Ireland.",
        )],
    );
    let two = hand_instance(
        "2",
        "What is the capital of the country whose head of state is the UK's?",
        vec![
            t("United Kingdom", "head_of_state", "Rishi Sunak"),
            t("Rishi Sunak", "born_in", "Southampton"),
        ],
        vec![(
            t("United Kingdom", "head_of_state", "Rishi Sunak"),
            "The head of state of United Kingdom is Rishi Sunak.",
        )],
    );
    let three = hand_instance(
        "3",
        "Which continent is Japan located in?",
        vec![t("Japan", "continent", "Oceania")],
        vec![(
            t("Japan", "continent", "Oceania"),
            "Japan is located in the continent of Oceania.",
        )],
    );
    let ds = Dataset::new("planted", vec![one, two, three]);
    let found = detect_conflicts(&ds);
    let expected: BTreeSet<String> = ["1".to_string()].into();
    ensure(found == expected, || format!("detected {found:?}"))?;
    let clean = build_clean(&ds, CleanMode::FixedPoint);
    ensure(detect_conflicts(&clean).is_empty(), || {
        "clean subset still conflicted".into()
    })?;
    let ids: Vec<_> = clean.instances.iter().map(|i| i.id.as_str()).collect();
    ensure(ids == ["2", "3"], || format!("clean ids {ids:?}"))?;
    Ok("detected {1}; clean {2, 3} re-checks to zero conflicts".into())
}

fn prefixed(mut s: Synthetic, prefix: &str) -> Vec<Instance> {
    for inst in &mut s.dataset.instances {
        inst.id = format!("{prefix}{}", inst.id);
    }
    s.dataset.instances
}

fn c7_hard_subset() -> Check {
    let light = prefixed(
        synth(SynthConfig {
            seed: 71,
            count: 40,
            hops: (3, 4),
            edits: (1, 2),
            ..Default::default()
        }),
        "l",
    );
    let heavy = prefixed(
        synth(SynthConfig {
            seed: 72,
            count: 15,
            hops: (3, 3),
            edits: (3, 3),
            ..Default::default()
        }),
        "h",
    );
    let expected: BTreeSet<String> = heavy.iter().map(|i| i.id.clone()).collect();
    let mut all = light;
    all.extend(heavy);
    let full = Dataset::new("mixed", all);
    let hard = build_hard(&full, &BTreeSet::new());
    let got: BTreeSet<String> = hard.instances.iter().map(|i| i.id.clone()).collect();
    ensure(got == expected, || {
        format!("hard subset {} ids, expected {}", got.len(), expected.len())
    })?;
    let mut note = format!("synthetic: exactly the {} max-edit instances", expected.len());

    match std::env::var_os("MQUAKE_PATH") {
        None => note.push_str("; real MQuAKE skipped (MQUAKE_PATH unset)"),
        Some(path) => {
            let full = load_mquake(Path::new(&path)).map_err(|e| e.to_string())?.dataset;
            let conflicted = detect_conflicts(&full);
            let clean = build_clean(&full, CleanMode::FixedPoint);
            let hard = build_hard(&full, &conflicted);
            ensure(full.len() == 3000, || format!("{} instances loaded", full.len()))?;
            ensure(conflicted.len() == 998, || format!("{} conflicted", conflicted.len()))?;
            ensure(clean.len() == 2002, || format!("{} clean", clean.len()))?;
            ensure(hard.len() == 429, || format!("{} hard", hard.len()))?;
            ensure(
                hard.instances.iter().all(|i| i.edits.len() == 4 && i.hops() == 4),
                || "hard instance without 4 edits and 4 hops".into(),
            )?;
            note.push_str("; MQuAKE 998 conflicted / 2002 clean / 429 hard");
        }
    }
    Ok(note)
}

fn brute_distance(a: &[f32], b: &[f32]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum();
    let na: f64 = a.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
    1.0 - dot / (na * nb)
}

const WORDS: [&str; 16] = [
    "paris", "london", "river", "king", "queen", "born", "capital", "city", "france", "music", "novel", "author",
    "located", "country", "spouse", "team",
];

fn sentence() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(WORDS.to_vec()), 1..7).prop_map(|w| w.join(" "))
}

fn c8_retrieval_and_ranking() -> Check {
    let emb = HashingEmbedder::new();
    let mut runner = TestRunner::new(PropConfig {
        cases: 300,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let store_case = (prop::collection::vec(sentence(), 1..=100), sentence(), 1usize..12);
    runner
        .run(&store_case, |(texts, query, n)| {
            let facts: Vec<EditedFact> = texts
                .iter()
                .enumerate()
                .map(|(i, text)| {
                    EditedFact::new(
                        Triple::new(&format!("s{i}"), "r", "o").unwrap(),
                        text.clone(),
                        format!("i{i}"),
                    )
                })
                .collect();
            let store = KnowledgeStore::build(facts, embedder()).unwrap();
            let hits = store.retrieve_top_n(&query, n).unwrap();
            let q = emb.embed(&query).unwrap();
            let mut brute: Vec<(f64, &str, usize)> = texts
                .iter()
                .enumerate()
                .map(|(i, text)| {
                    (
                        brute_distance(q.values(), emb.embed(text).unwrap().values()),
                        text.as_str(),
                        i,
                    )
                })
                .collect();
            brute.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(b.1)).then(a.2.cmp(&b.2)));
            brute.truncate(n);
            prop_assert_eq!(hits.len(), brute.len());
            for (hit, (d, _, i)) in hits.iter().zip(&brute) {
                prop_assert!((hit.distance - d).abs() < 1e-6, "distance {} vs {}", hit.distance, d);
                // Equal texts embed identically, so only near-equal distances may swap order.
                if hit.index != *i {
                    let own = brute_distance(q.values(), emb.embed(&texts[hit.index]).unwrap().values());
                    prop_assert!((own - d).abs() < 1e-6);
                }
            }
            Ok(())
        })
        .map_err(|e| format!("retrieval: {e}"))?;

    let mut runner = TestRunner::new(PropConfig {
        cases: 1000,
        failure_persistence: None,
        ..PropConfig::default()
    });
    let cand = (any::<bool>(), 0.0f64..2.0, 0usize..50).prop_map(|(edited, d, i)| {
        if edited {
            Candidate::edited(format!("fact {i}"), d, i)
        } else {
            Candidate::parametric(format!("step {i}"))
        }
    });
    runner
        .run(&prop::collection::vec(cand, 0..20), |cands| {
            let ranked = rank(cands.clone());
            prop_assert_eq!(ranked.len(), cands.len());
            let first_param = ranked.iter().position(|c| !c.is_edited()).unwrap_or(ranked.len());
            prop_assert!(ranked[first_param..].iter().all(|c| !c.is_edited()));
            for w in ranked[..first_param].windows(2) {
                prop_assert!(w[0].distance().unwrap() <= w[1].distance().unwrap());
            }
            Ok(())
        })
        .map_err(|e| format!("ranking: {e}"))?;
    Ok("300 random stores match brute force; 1000 candidate sets ranked correctly".into())
}

const EXPECTED_EXEMPLARS: [&str; 3] = [
    "Question: What is the capital of the country where Plainfield Town Hall is located?\nThoughts with New Knowledge: Plainfield Town Hall is located in the country of the United States of America.# The capital of United States is Washington, D.C.# Washington, D.C. is the answer.\nAnswer: Washington, D.C.",
    "Question: In which country is the company that created Nissan 200SX located?\nThoughts with New Knowledge: Nissan 200SX was created by Nissan.# Nissan is located in the country of Japan.# Japan is the answer.\nAnswer: Japan",
    "Question: Which continent is the country where the director of \"My House Husband: Ikaw Na!\" was educated located in?\nThoughts with New Knowledge: The director of \"My House Husband: Ikaw Na!\" is Jose Javier Reyes.# Jose Javier Reyes was educated at De La Salle University.# De La Salle University is located in the country of Philippines.# Philippines is located in the continent if Asia.# Asia is the answer.\nAnswer: Asia",
];

fn c9_prompt_fidelity() -> Check {
    for chain in [vec![], vec!["George Orwell wrote 1984.".to_string()]] {
        let prompt = render_generation_prompt("Who wrote 1984?", &chain);
        for (i, ex) in EXPECTED_EXEMPLARS.iter().enumerate() {
            ensure(prompt.contains(ex), || format!("exemplar {} missing", i + 1))?;
        }
    }
    let got = extract_answer("Washington, D.C. is the answer.");
    ensure(got.as_deref() == Some("Washington, D.C."), || {
        format!("extracted {got:?}")
    })?;
    for step in [
        "The capital of United States is Washington, D.C.",
        "Nissan is located in the country of Japan.",
        "",
    ] {
        ensure(extract_answer(step).is_none(), || {
            format!("answer extracted from `{step}`")
        })?;
    }
    Ok("three exemplars verbatim; extraction exact".into())
}

/// Judge stand-in that answers "Yes" to everything.
struct YesJudge;

impl Generator for YesJudge {
    fn complete(&self, _: &GenerationRequest) -> Result<String, LlmError> {
        Ok("Yes".into())
    }
    fn id(&self) -> &str {
        "always-yes"
    }
}

fn c10_verifier_harness() -> Check {
    let s = synth(SynthConfig {
        seed: 1010,
        count: 200,
        ..Default::default()
    });
    let pairs = gen_verifier_suite(&s.dataset, 1000, 3).map_err(|e| e.to_string())?;
    ensure(pairs.len() == 4000, || format!("{} pairs", pairs.len()))?;
    let reports = evaluate_verifier(&RuleVerifier::standard(), &pairs, embedder(), true).map_err(|e| e.to_string())?;
    for r in &reports {
        ensure(r.summary.instances == 1000 && r.summary.accuracy == 1.0, || {
            format!("{}: {}/{}", r.summary.dataset, r.summary.correct, r.summary.instances)
        })?;
    }

    let demo_pairs = gen_verifier_suite(&s.dataset, 8, 4).map_err(|e| e.to_string())?;
    let pool = to_demonstrations(&demo_pairs, embedder()).map_err(|e| e.to_string())?;
    let demos = DemoSet::sample(&pool, 2, 2, 0).map_err(|e| e.to_string())?;
    let configured: Option<Arc<dyn Generator>> = match (std::env::var("JUDGE_URL"), std::env::var("JUDGE_MODEL")) {
        (Ok(url), Ok(model)) => Some(Arc::new(RemoteGenerator::new(
            &url,
            &model,
            std::env::var("GENERATOR_API_KEY").ok(),
        ))),
        _ => None,
    };
    let label = if configured.is_some() {
        "configured judge"
    } else {
        "always-yes judge"
    };
    let backend = configured.unwrap_or_else(|| Arc::new(YesJudge));
    let judge = JudgeVerifier::new(backend, demos);
    let judged = evaluate_verifier(&judge as &dyn Verifier, &pairs, embedder(), true).map_err(|e| e.to_string())?;
    let per_kind: Vec<String> = judged
        .iter()
        .map(|r| {
            format!(
                "{} {:.3}",
                r.summary.dataset.rsplit('/').next().unwrap_or(""),
                r.summary.accuracy
            )
        })
        .collect();
    Ok(format!("rules 4000/4000; {label} reported: {}", per_kind.join(", ")))
}

fn kedit(args: &[&str]) -> Result<String, String> {
    let cli = Cli::try_parse_from(std::iter::once("kedit").chain(args.iter().copied())).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    run(cli, &mut out).map_err(|e| format!("{e:#}"))?;
    Ok(String::from_utf8_lossy(&out).into_owned())
}

fn c11_determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = tmp.path().join("data");
    let d = data.to_str().unwrap();
    kedit(&[
        "synth",
        "--out",
        d,
        "--seed",
        "11",
        "--count",
        "60",
        "--distractors",
        "dead-end",
        "--pairs",
        "0",
        "--demos",
        "0",
    ])?;
    let dataset = data.join("dataset.json");
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        kedit(&[
            "eval",
            "--dataset",
            dataset.to_str().unwrap(),
            "--method",
            "dfs",
            "--seed",
            "7",
            "--batch-size",
            "10",
            "--stable",
            "--shuffle",
            "--traces",
            "--out",
            out.to_str().unwrap(),
        ])?;
        outputs.push(out);
    }
    let mut compared = 0;
    for name in [
        "dataset-dfs.jsonl",
        "dataset-dfs.summary.json",
        "dataset-dfs.traces.jsonl",
    ] {
        let a = std::fs::read(outputs[0].join(name)).map_err(|e| format!("{name}: {e}"))?;
        let b = std::fs::read(outputs[1].join(name)).map_err(|e| format!("{name}: {e}"))?;
        ensure(!a.is_empty() && a == b, || format!("{name} differs between runs"))?;
        compared += a.len();
    }
    Ok(format!("three report files byte-identical ({compared} bytes)"))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("oracle end-to-end correctness", c1_oracle_end_to_end),
        ("best-case complexity", c2_best_case_complexity),
        ("backtracking recovery", c3_backtracking_recovery),
        ("dfs vs bfs efficiency", c4_dfs_vs_bfs),
        ("early-stop effect", c5_early_stop),
        ("conflict detection", c6_conflict_detection),
        ("hard-subset construction", c7_hard_subset),
        ("retrieval and ranking", c8_retrieval_and_ranking),
        ("prompt and extraction fidelity", c9_prompt_fidelity),
        ("constraint-verifier harness", c10_verifier_harness),
        ("determinism", c11_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
