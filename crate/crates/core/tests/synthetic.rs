use std::collections::HashSet;
use std::sync::Arc;

use kedit_core::bench::{
    build_clean, detect_conflicts, evaluate, evaluate_verifier, gen_synthetic, gen_verifier_suite, stats, BatchSize,
    CleanMode, DistractorMode, EvalConfig, Runner, SynthConfig,
};
use kedit_core::constraints::{all_passed, verify_all};
use kedit_core::search::{bfs, dfs, dfs_with, DfsOptions, Method};
use kedit_core::text::{normalize, TemplateCatalog};
use kedit_core::{
    HashingEmbedder, KnowledgeStore, OracleGenerator, RuleVerifier, SearchLimits, Termination, VerifierContext,
};
use proptest::prelude::*;

fn per_instance() -> EvalConfig {
    EvalConfig {
        batch: BatchSize::Count(1),
        stable: true,
        ..Default::default()
    }
}

#[test]
fn dfs_is_exact_on_synthetic_data() {
    let s = gen_synthetic(&SynthConfig {
        seed: 11,
        count: 60,
        ..Default::default()
    })
    .unwrap();
    let oracle = OracleGenerator::new(s.graph.clone());
    let verifier = RuleVerifier::standard();
    let catalog = TemplateCatalog::standard();
    let runner = Runner {
        backend: &oracle,
        verifier: &verifier,
        catalog: &catalog,
    };
    let report = evaluate(
        Method::Dfs,
        &s.dataset,
        &per_instance(),
        &runner,
        Arc::new(HashingEmbedder::new()),
    )
    .unwrap();
    assert_eq!(
        report.summary.accuracy,
        1.0,
        "{:?}",
        report.records.iter().find(|r| !r.correct)
    );
    for (r, inst) in report.records.iter().zip(&s.dataset.instances) {
        assert_eq!(r.expansions, inst.hops() + 1, "{}", r.id);
    }
    let parametric = evaluate(
        Method::ParametricOnly,
        &s.dataset,
        &per_instance(),
        &runner,
        Arc::new(HashingEmbedder::new()),
    )
    .unwrap();
    assert_eq!(parametric.summary.correct, 0);
}

#[test]
fn injected_conflicts_are_detected_exactly() {
    let s = gen_synthetic(&SynthConfig {
        seed: 5,
        count: 40,
        conflicts: 6,
        ..Default::default()
    })
    .unwrap();
    assert_eq!(s.injected.len(), 6);
    assert_eq!(detect_conflicts(&s.dataset), s.injected);
    let clean = build_clean(&s.dataset, CleanMode::FixedPoint);
    assert_eq!(clean.len(), 40 + 6 - 6);
    assert_eq!(stats(&clean).conflicted, 0);
    assert_eq!(build_clean(&s.dataset, CleanMode::OneShot).instances, clean.instances);
}

#[test]
fn rule_verifiers_are_exact_on_the_pair_suite() {
    let s = gen_synthetic(&SynthConfig {
        seed: 2,
        count: 50,
        ..Default::default()
    })
    .unwrap();
    let pairs = gen_verifier_suite(&s.dataset, 200, 9).unwrap();
    assert_eq!(pairs.len(), 800);
    let reports = evaluate_verifier(
        &RuleVerifier::standard(),
        &pairs,
        Arc::new(HashingEmbedder::new()),
        true,
    )
    .unwrap();
    for r in reports {
        assert_eq!(r.summary.instances, 200);
        assert_eq!(
            r.summary.accuracy,
            1.0,
            "{}: {:?}",
            r.summary.dataset,
            r.records.iter().find(|x| !x.correct)
        );
    }
}

#[test]
fn dataset_json_round_trip_preserves_instances() {
    let s = gen_synthetic(&SynthConfig {
        seed: 4,
        count: 15,
        distractors: DistractorMode::DeadEnd,
        ..Default::default()
    })
    .unwrap();
    let json = s.dataset.to_json().unwrap();
    let again = kedit_core::bench::parse_cases(&json, &s.dataset.name).unwrap();
    assert_eq!(again.skipped(), 0);
    assert_eq!(again.dataset.instances, s.dataset.instances);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn search_properties_hold(seed in 0u64..10_000, mode in 0usize..3) {
        let distractors = [DistractorMode::None, DistractorMode::DeadEnd, DistractorMode::Branching][mode];
        let s = gen_synthetic(&SynthConfig { seed, count: 6, distractors, ..Default::default() }).unwrap();
        let oracle = OracleGenerator::new(s.graph.clone());
        let verifier = RuleVerifier::standard();
        let limits = SearchLimits::default();
        for inst in &s.dataset.instances {
            let facts = inst.edits.iter().chain(&inst.distractors).cloned().collect();
            let store = KnowledgeStore::build(facts, Arc::new(HashingEmbedder::new())).unwrap();
            let q = &inst.questions[0];
            let early = dfs(q, &store, &oracle, &verifier, limits);
            let full = dfs_with(q, &store, &oracle, &verifier, limits, DfsOptions { early_stop: false });

            prop_assert_eq!(early.termination, Termination::Answered);
            prop_assert!(inst.is_correct(early.answer.as_deref().unwrap()));
            if distractors == DistractorMode::None {
                prop_assert_eq!(early.trace.totals.expansions, inst.hops() + 1);
            }
            prop_assert!(early.trace.totals.expansions <= full.trace.totals.expansions);
            prop_assert_eq!(&early.answer, &full.answer);

            // No chain is expanded twice.
            let mut seen = HashSet::new();
            for it in &full.trace.iterations {
                let key: Vec<String> = it.chain.iter().map(|c| normalize(c)).collect();
                prop_assert!(seen.insert(key));
            }

            // Every accepted step re-checks as valid against its prefix.
            for (i, step) in early.chain.iter().enumerate() {
                let ctx = VerifierContext { question: q, chain: &early.chain[..i], store: &store };
                prop_assert!(all_passed(&verify_all(&verifier, &ctx, step)));
            }

            let b = bfs(q, &store, &oracle, &verifier, limits);
            if b.termination == Termination::Answered {
                prop_assert_eq!(&b.answer, &early.answer);
            }
        }
    }
}
