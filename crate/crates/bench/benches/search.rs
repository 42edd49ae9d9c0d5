use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kedit_core::bench::{gen_synthetic, DistractorMode, Instance, SynthConfig};
use kedit_core::search::{bfs, dfs};
use kedit_core::{HashingEmbedder, KnowledgeStore, OracleGenerator, RuleVerifier, SearchLimits};

fn store(inst: &Instance) -> KnowledgeStore {
    let facts = inst.edits.iter().chain(&inst.distractors).cloned().collect();
    KnowledgeStore::build(facts, Arc::new(HashingEmbedder::new())).expect("store")
}

fn search(c: &mut Criterion) {
    let s = gen_synthetic(&SynthConfig {
        seed: 9,
        count: 20,
        hops: (4, 4),
        edits: (4, 4),
        distractors: DistractorMode::DeadEnd,
        ..Default::default()
    })
    .expect("config");
    let oracle = OracleGenerator::new(s.graph.clone());
    let verifier = RuleVerifier::standard();
    let limits = SearchLimits::default();
    let cases: Vec<(String, KnowledgeStore)> = s
        .dataset
        .instances
        .iter()
        .map(|i| (i.questions[0].clone(), store(i)))
        .collect();

    let mut group = c.benchmark_group("four_hop_suite");
    group.bench_function(BenchmarkId::new("search", "dfs"), |b| {
        b.iter(|| {
            cases
                .iter()
                .map(|(q, st)| dfs(q, st, &oracle, &verifier, limits).trace.totals.expansions)
                .sum::<usize>()
        })
    });
    group.bench_function(BenchmarkId::new("search", "bfs"), |b| {
        b.iter(|| {
            cases
                .iter()
                .map(|(q, st)| bfs(q, st, &oracle, &verifier, limits).trace.totals.expansions)
                .sum::<usize>()
        })
    });
    group.finish();
}

criterion_group!(benches, search);
criterion_main!(benches);
