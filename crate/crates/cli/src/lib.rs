//! The `kedit` command line.

pub mod config;

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use kedit_core::bench::{
    build_clean, build_hard, detect_conflicts, evaluate, evaluate_verifier, gen_synthetic, gen_verifier_suite,
    load_mquake, stats, to_demonstrations, CleanMode, DistractorMode, EvalConfig, EvalReport, Runner, StatsRow,
    SynthConfig, VerifierPair,
};
use kedit_core::constraints::{load_demonstrations, DemoSet, FaultInjectingVerifier, JudgeVerifier};
use kedit_core::knowledge::RemoteEmbedder;
use kedit_core::llm::{RemoteGenerator, ReplayGenerator, ReplayLog};
use kedit_core::search::render_trace;
use kedit_core::text::TemplateCatalog;
use kedit_core::{
    EditedFact, Embedder, FactGraph, Generator, HashingEmbedder, KnowledgeStore, Method, OracleGenerator, RuleVerifier,
    Triple, Verifier,
};

pub use config::{BackendSpec, ConfigError, EmbedderSpec, RunFlags, Settings, VerifierSpec};

#[derive(Debug, Parser)]
#[command(name = "kedit", version, about = "Multi-hop QA under knowledge edits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate a method on a dataset.
    Eval(EvalArgs),
    /// Build the conflict-free or hard subset of a dataset.
    BuildBench(BuildBenchArgs),
    /// Print dataset statistics.
    Stats(StatsArgs),
    /// Run one question and print the search iteration by iteration.
    Trace(TraceArgs),
    /// Generate a synthetic dataset, its fact graph and judge demonstrations.
    Synth(SynthArgs),
    /// Score the configured verifiers on a labelled pair suite.
    Verifiers(VerifiersArgs),
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).ok_or_else(|| format!("unknown method `{s}` (dfs, dfs-exhaustive, bfs, mello, parametric-only)"))
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value = "dfs", value_parser = parse_method)]
    pub method: Method,
    /// Also write full search traces.
    #[arg(long)]
    pub traces: bool,
    /// Shuffle instances into batches using the configured seed.
    #[arg(long)]
    pub shuffle: bool,
    #[command(flatten)]
    pub run: RunFlags,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Subset {
    Clean,
    Hard,
}

#[derive(Debug, Args)]
pub struct BuildBenchArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum)]
    pub subset: Subset,
    #[arg(long)]
    pub out: PathBuf,
    /// Filter conflicts once instead of iterating to a fixed point.
    #[arg(long)]
    pub one_shot: bool,
    /// Dataset whose instance ids are excluded from the hard subset.
    #[arg(long)]
    pub exclude: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub dataset: PathBuf,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    /// Built-in scenario.
    #[arg(long, value_parser = ["orwell"], conflicts_with_all = ["dataset", "question"])]
    pub example: Option<String>,
    #[arg(long, requires = "id")]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub id: Option<String>,
    #[arg(long)]
    pub question: Option<String>,
    /// Extra edit as `subject|relation|object` or `subject|relation|object|sentence`.
    #[arg(long = "edit")]
    pub edits: Vec<String>,
    #[arg(long, default_value = "dfs", value_parser = parse_method)]
    pub method: Method,
    /// Chain depth at which the verifier wrongly admits `--fault-admit` steps.
    #[arg(long, requires = "fault_admit")]
    pub fault_depth: Option<usize>,
    #[arg(long)]
    pub fault_admit: Vec<String>,
    #[command(flatten)]
    pub run: RunFlags,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 200)]
    pub count: usize,
    /// Inclusive range, e.g. 2-4.
    #[arg(long, default_value = "2-4", value_parser = parse_range)]
    pub hops: (usize, usize),
    #[arg(long, default_value = "1-4", value_parser = parse_range)]
    pub edits: (usize, usize),
    #[arg(long, default_value_t = 0)]
    pub conflicts: usize,
    #[arg(long, value_enum, default_value = "none")]
    pub distractors: DistractorArg,
    /// Verifier pairs per constraint.
    #[arg(long, default_value_t = 1000)]
    pub pairs: usize,
    /// Judge demonstrations per constraint.
    #[arg(long, default_value_t = 20)]
    pub demos: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DistractorArg {
    None,
    DeadEnd,
    Branching,
}

impl From<DistractorArg> for DistractorMode {
    fn from(d: DistractorArg) -> Self {
        match d {
            DistractorArg::None => DistractorMode::None,
            DistractorArg::DeadEnd => DistractorMode::DeadEnd,
            DistractorArg::Branching => DistractorMode::Branching,
        }
    }
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once('-').unwrap_or((s, s));
    let lo = a.trim().parse().map_err(|_| format!("bad range `{s}`"))?;
    let hi = b.trim().parse().map_err(|_| format!("bad range `{s}`"))?;
    if lo > hi {
        return Err(format!("empty range `{s}`"));
    }
    Ok((lo, hi))
}

#[derive(Debug, Args)]
pub struct VerifiersArgs {
    /// Pair suite written by `synth`.
    #[arg(long)]
    pub pairs: PathBuf,
    #[command(flatten)]
    pub run: RunFlags,
}

/// Maps an error to the process exit status: 2 for configuration problems,
/// 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        2
    } else {
        1
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Eval(a) => cmd_eval(a, out),
        Command::BuildBench(a) => cmd_build_bench(a, out),
        Command::Stats(a) => cmd_stats(a, out),
        Command::Trace(a) => cmd_trace(a, out),
        Command::Synth(a) => cmd_synth(a, out),
        Command::Verifiers(a) => cmd_verifiers(a, out),
    }
}

/// Generator, verifier and embedder built from settings.
pub struct Wiring {
    pub backend: Arc<dyn Generator>,
    pub verifier: Arc<dyn Verifier>,
    pub embedder: Arc<dyn Embedder>,
    pub catalog: TemplateCatalog,
}

fn read_graph(path: &Path) -> Result<FactGraph> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading graph `{}`", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing graph `{}`", path.display()))
}

/// Builds the providers. `default_graph` is used by the oracle backend when
/// no graph is configured.
pub fn wire(settings: &Settings, default_graph: Option<FactGraph>) -> Result<Wiring> {
    let (generator_key, embedding_key) = settings.keys()?;
    let mut catalog = TemplateCatalog::standard();
    let backend: Arc<dyn Generator> = match &settings.backend {
        BackendSpec::Oracle { graph } => {
            let graph = match (graph, default_graph) {
                (Some(p), _) => read_graph(p)?,
                (None, Some(g)) => g,
                (None, None) => {
                    return Err(ConfigError("backend.graph is required for backend.kind = \"oracle\"".into()).into())
                }
            };
            catalog.extend(graph.templates());
            Arc::new(OracleGenerator::new(graph))
        }
        BackendSpec::Remote { url, model } => match &settings.replay {
            Some(log) => Arc::new(
                ReplayGenerator::from_file(log, model)
                    .with_context(|| format!("reading replay log `{}`", log.display()))?,
            ),
            None => {
                let mut remote = RemoteGenerator::new(url, model, generator_key);
                if let Some(log) = &settings.record {
                    let log = ReplayLog::append_to(log).with_context(|| format!("opening `{}`", log.display()))?;
                    remote = remote.with_log(log);
                }
                Arc::new(remote)
            }
        },
    };
    let embedder: Arc<dyn Embedder> = match &settings.embedder {
        EmbedderSpec::Hashing => Arc::new(HashingEmbedder::new()),
        EmbedderSpec::Remote { url } => Arc::new(RemoteEmbedder::new(url, embedding_key)),
    };
    let verifier: Arc<dyn Verifier> = match &settings.verifier {
        VerifierSpec::Rules => Arc::new(RuleVerifier::new(Arc::new(catalog.clone()))),
        VerifierSpec::Judge {
            demos,
            seed,
            positives,
            negatives,
        } => {
            let pool = load_demonstrations(demos).with_context(|| format!("reading demos `{}`", demos.display()))?;
            let set = DemoSet::sample(&pool, *positives, *negatives, *seed)?;
            Arc::new(JudgeVerifier::new(backend.clone(), set))
        }
    };
    Ok(Wiring {
        backend,
        verifier,
        embedder,
        catalog,
    })
}

fn sibling_graph(dataset: &Path) -> Option<FactGraph> {
    let candidate = dataset.parent()?.join("graph.json");
    candidate.exists().then(|| read_graph(&candidate).ok()).flatten()
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into())
}

fn print_summary(out: &mut dyn Write, report: &EvalReport) -> Result<()> {
    let s = &report.summary;
    writeln!(
        out,
        "{} on {} (batch {}): accuracy {:.4} ({}/{}), mean steps {:.2}, mean generator calls {:.2}, mean time {:.2} ms, flagged {}",
        s.method,
        s.dataset,
        s.batch_size,
        s.accuracy,
        s.correct,
        s.instances,
        s.mean_steps,
        s.mean_generator_calls,
        s.mean_time_ms,
        s.flagged
    )?;
    Ok(())
}

pub fn cmd_eval(args: EvalArgs, out: &mut dyn Write) -> Result<()> {
    let settings = Settings::resolve(&args.run)?;
    settings.keys()?;
    let loaded = load_mquake(&args.dataset)?;
    if loaded.skipped() > 0 {
        tracing::warn!(skipped = loaded.skipped(), "some cases could not be loaded");
    }
    let wiring = wire(&settings, sibling_graph(&args.dataset))?;
    let cfg = EvalConfig {
        batch: settings.batch,
        limits: settings.limits,
        parallelism: settings.parallelism,
        shuffle_seed: args.shuffle.then_some(settings.seed),
        stable: settings.stable,
        keep_traces: args.traces,
    };
    let runner = Runner {
        backend: wiring.backend.as_ref(),
        verifier: wiring.verifier.as_ref(),
        catalog: &wiring.catalog,
    };
    let report = evaluate(args.method, &loaded.dataset, &cfg, &runner, wiring.embedder.clone())?;
    let stem = format!("{}-{}", stem_of(&args.dataset), args.method.name());
    let paths = report.write(&settings.output_dir, &stem)?;
    print_summary(out, &report)?;
    for p in paths {
        writeln!(out, "wrote {}", p.display())?;
    }
    Ok(())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating `{}`", dir.display()))?;
    }
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).with_context(|| format!("writing `{}`", path.display()))
}

fn print_stats(out: &mut dyn Write, row: &StatsRow) -> Result<()> {
    writeln!(out, "{}", StatsRow::HEADER)?;
    writeln!(out, "{row}")?;
    Ok(())
}

pub fn cmd_build_bench(args: BuildBenchArgs, out: &mut dyn Write) -> Result<()> {
    let full = load_mquake(&args.dataset)?.dataset;
    let subset = match args.subset {
        Subset::Clean => {
            let mode = if args.one_shot {
                CleanMode::OneShot
            } else {
                CleanMode::FixedPoint
            };
            writeln!(out, "conflicted instances in input: {}", detect_conflicts(&full).len())?;
            build_clean(&full, mode)
        }
        Subset::Hard => {
            let excluded: BTreeSet<String> = match &args.exclude {
                Some(p) => load_mquake(p)?.dataset.instances.into_iter().map(|i| i.id).collect(),
                None => BTreeSet::new(),
            };
            build_hard(&full, &excluded)
        }
    };
    subset.save(&args.out)?;
    let row = stats(&subset);
    let sidecar = args.out.with_extension("stats.json");
    write_json(&sidecar, &row)?;
    print_stats(out, &row)?;
    writeln!(out, "wrote {} and {}", args.out.display(), sidecar.display())?;
    Ok(())
}

pub fn cmd_stats(args: StatsArgs, out: &mut dyn Write) -> Result<()> {
    let loaded = load_mquake(&args.dataset)?;
    print_stats(out, &stats(&loaded.dataset))
}

fn parse_edit(spec: &str, catalog: &TemplateCatalog) -> Result<EditedFact> {
    let parts: Vec<&str> = spec.split('|').map(str::trim).collect();
    let (s, r, o, text) = match parts.as_slice() {
        [s, r, o] => (*s, *r, *o, None),
        [s, r, o, t] => (*s, *r, *o, Some(t.to_string())),
        _ => return Err(ConfigError(format!("--edit `{spec}` must be subject|relation|object[|sentence]")).into()),
    };
    let triple = Triple::new(s, r, o).map_err(|e| ConfigError(format!("--edit `{spec}`: {e}")))?;
    let text = match text {
        Some(t) => t,
        None => catalog
            .render(&triple)
            .ok_or_else(|| ConfigError(format!("--edit `{spec}`: no sentence template for relation `{r}`")))?,
    };
    Ok(EditedFact::new(triple, text, "cli"))
}

pub fn cmd_trace(args: TraceArgs, out: &mut dyn Write) -> Result<()> {
    let settings = Settings::resolve(&args.run)?;
    let catalog = TemplateCatalog::standard();
    let (question, mut edits, default_graph, label) = if args.example.is_some() {
        let ex = kedit_core::example::orwell();
        (ex.question, ex.edits, Some(ex.graph), "orwell".to_string())
    } else if let Some(path) = &args.dataset {
        let id = args.id.clone().expect("clap enforces --id");
        let ds = load_mquake(path)?.dataset;
        let inst = ds
            .get(&id)
            .ok_or_else(|| ConfigError(format!("no instance `{id}` in `{}`", path.display())))?;
        let facts = inst.edits.iter().chain(&inst.distractors).cloned().collect();
        (inst.questions[0].clone(), facts, sibling_graph(path), id)
    } else if let Some(q) = &args.question {
        (q.clone(), Vec::new(), None, "question".to_string())
    } else {
        return Err(ConfigError("trace needs --example, --dataset with --id, or --question".into()).into());
    };
    for spec in &args.edits {
        edits.push(parse_edit(spec, &catalog)?);
    }
    let wiring = wire(&settings, default_graph)?;
    let store = KnowledgeStore::build(edits, wiring.embedder.clone())?;
    let verifier: Arc<dyn Verifier> = match args.fault_depth {
        Some(depth) => Arc::new(FaultInjectingVerifier::new(
            wiring.verifier.clone(),
            depth,
            args.fault_admit.clone(),
        )),
        None => wiring.verifier.clone(),
    };
    let mut outcome = args.method.run(
        &question,
        &store,
        wiring.backend.as_ref(),
        verifier.as_ref(),
        &wiring.catalog,
        settings.limits,
    );
    if settings.stable {
        outcome.trace.totals.wall_time_ms = 0.0;
    }
    write!(out, "{}", render_trace(&outcome))?;
    let path = settings.output_dir.join(format!("trace-{label}.json"));
    write_json(&path, &outcome)?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}

pub fn cmd_synth(args: SynthArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = SynthConfig {
        seed: args.seed,
        count: args.count,
        hops: args.hops,
        edits: args.edits,
        conflicts: args.conflicts,
        distractors: args.distractors.into(),
    };
    cfg.validate().map_err(|e| ConfigError(e.to_string()))?;
    let synthetic = gen_synthetic(&cfg)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating `{}`", args.out.display()))?;
    let dataset_path = args.out.join("dataset.json");
    synthetic.dataset.save(&dataset_path)?;
    write_json(&args.out.join("graph.json"), &synthetic.graph)?;
    let mut written = vec![dataset_path, args.out.join("graph.json")];
    if !synthetic.injected.is_empty() {
        write_json(&args.out.join("injected.json"), &synthetic.injected)?;
        written.push(args.out.join("injected.json"));
    }
    if args.pairs > 0 || args.demos > 0 {
        let embedder: Arc<dyn Embedder> = Arc::new(HashingEmbedder::new());
        let pairs = gen_verifier_suite(&synthetic.dataset, args.pairs, args.seed)?;
        write_json(&args.out.join("verifier_pairs.json"), &pairs)?;
        // Demonstrations come from a separately seeded draw.
        let demo_pairs = gen_verifier_suite(&synthetic.dataset, args.demos, args.seed.wrapping_add(1))?;
        write_json(
            &args.out.join("judge_demos.json"),
            &to_demonstrations(&demo_pairs, embedder)?,
        )?;
        written.push(args.out.join("verifier_pairs.json"));
        written.push(args.out.join("judge_demos.json"));
    }
    print_stats(out, &stats(&synthetic.dataset))?;
    for p in written {
        writeln!(out, "wrote {}", p.display())?;
    }
    Ok(())
}

pub fn cmd_verifiers(args: VerifiersArgs, out: &mut dyn Write) -> Result<()> {
    let settings = Settings::resolve(&args.run)?;
    let text = std::fs::read_to_string(&args.pairs).with_context(|| format!("reading `{}`", args.pairs.display()))?;
    let pairs: Vec<VerifierPair> = serde_json::from_str(&text).context("parsing verifier pairs")?;
    if pairs.is_empty() {
        bail!("`{}` holds no pairs", args.pairs.display());
    }
    let graph = sibling_graph(&args.pairs).unwrap_or_default();
    let wiring = wire(&settings, Some(graph))?;
    let reports = evaluate_verifier(
        wiring.verifier.as_ref(),
        &pairs,
        wiring.embedder.clone(),
        settings.stable,
    )?;
    for r in &reports {
        let kind = r
            .summary
            .dataset
            .rsplit('/')
            .next()
            .ok_or_else(|| anyhow!("report without constraint"))?
            .to_string();
        r.write(&settings.output_dir, &format!("verifier-{kind}"))?;
        writeln!(
            out,
            "{kind}: accuracy {:.4} ({}/{}), incidents {}",
            r.summary.accuracy, r.summary.correct, r.summary.instances, r.summary.flagged
        )?;
    }
    writeln!(out, "wrote reports to {}", settings.output_dir.display())?;
    Ok(())
}
