//! Seeded synthetic datasets whose answers are known by construction.
//!
//! Every instance gets fresh entity names, so instances never share
//! entities unless a conflict is injected on purpose. The fact graph holds
//! the pre-edit ("parametric") world that the oracle generator reads.

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BenchError, Dataset, Instance};
use crate::knowledge::{cosine_distance, EditedFact, Embedder, HashingEmbedder, Triple};
use crate::llm::FactGraph;
use crate::text::TemplateCatalog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Kind {
    Person,
    City,
    Country,
    Continent,
    Org,
    Work,
    Language,
    Religion,
    Sport,
    Genre,
}

impl Kind {
    fn is_hub(self) -> bool {
        SCHEMA.iter().any(|r| r.domain == self)
    }
}

struct Rel {
    name: &'static str,
    domain: Kind,
    range: Kind,
    /// Noun phrase for question composition; `{}` is the inner entity.
    phrase: &'static str,
}

const fn rel(name: &'static str, domain: Kind, range: Kind, phrase: &'static str) -> Rel {
    Rel {
        name,
        domain,
        range,
        phrase,
    }
}

const SCHEMA: &[Rel] = &[
    rel("born_in", Kind::Person, Kind::City, "the city where {} was born"),
    rel("died_in", Kind::Person, Kind::City, "the city where {} died"),
    rel(
        "citizen_of",
        Kind::Person,
        Kind::Country,
        "the country of citizenship of {}",
    ),
    rel("spouse", Kind::Person, Kind::Person, "the spouse of {}"),
    rel("employer", Kind::Person, Kind::Org, "the employer of {}"),
    rel(
        "educated_at",
        Kind::Person,
        Kind::Org,
        "the institution where {} was educated",
    ),
    rel("religion", Kind::Person, Kind::Religion, "the religion of {}"),
    rel("sport", Kind::Person, Kind::Sport, "the sport played by {}"),
    rel("country", Kind::City, Kind::Country, "the country where {} is located"),
    rel("mayor", Kind::City, Kind::Person, "the mayor of {}"),
    rel("twinned_with", Kind::City, Kind::City, "the twin city of {}"),
    rel("capital", Kind::Country, Kind::City, "the capital of {}"),
    rel(
        "continent",
        Kind::Country,
        Kind::Continent,
        "the continent where {} is located",
    ),
    rel("head_of_state", Kind::Country, Kind::Person, "the head of state of {}"),
    rel("language", Kind::Country, Kind::Language, "the official language of {}"),
    rel("headquarters", Kind::Org, Kind::City, "the headquarters city of {}"),
    rel("ceo", Kind::Org, Kind::Person, "the chief executive officer of {}"),
    rel("founded_by", Kind::Org, Kind::Person, "the founder of {}"),
    rel("author", Kind::Work, Kind::Person, "the author of {}"),
    rel("director", Kind::Work, Kind::Person, "the director of {}"),
    rel("created_by", Kind::Work, Kind::Person, "the creator of {}"),
    rel("genre", Kind::Work, Kind::Genre, "the genre of {}"),
];

const START_KINDS: [Kind; 5] = [Kind::Person, Kind::City, Kind::Country, Kind::Org, Kind::Work];

/// Extra retrievable facts planted next to the edits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistractorMode {
    #[default]
    None,
    /// At every edited hop, a valid fact about the current entity whose
    /// object leads nowhere.
    DeadEnd,
    /// At one edited hop, a valid fact that starts a second complete chain
    /// with a different answer.
    Branching,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    /// Base instances; injected conflict sources are appended on top.
    pub count: usize,
    /// Inclusive hop range.
    pub hops: (usize, usize),
    /// Inclusive edit range, clamped to the hop count per instance.
    pub edits: (usize, usize),
    /// Number of base instances to corrupt with a cross-instance edit.
    pub conflicts: usize,
    pub distractors: DistractorMode,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            count: 200,
            hops: (2, 4),
            edits: (1, 4),
            conflicts: 0,
            distractors: DistractorMode::None,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::Config(m.to_string()));
        if self.count == 0 {
            return bad("count must be positive");
        }
        if self.hops.0 == 0 || self.hops.0 > self.hops.1 {
            return bad("hops must be a non-empty range starting at 1 or more");
        }
        if self.edits.0 > self.edits.1 {
            return bad("edits range is empty");
        }
        if self.conflicts > self.count {
            return bad("conflicts cannot exceed count");
        }
        Ok(())
    }
}

/// A generated dataset with the world it was drawn from.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub dataset: Dataset,
    pub graph: FactGraph,
    /// Ids of the instances corrupted by conflict injection.
    pub injected: BTreeSet<String>,
}

struct Names {
    used: HashSet<String>,
}

impl Names {
    fn word(rng: &mut ChaCha8Rng) -> String {
        const C: &[u8] = b"bdfgklmnprstvz";
        const V: &[u8] = b"aeiou";
        let syllables = rng.gen_range(2..=3);
        let mut w = String::new();
        for i in 0..syllables {
            let c = C[rng.gen_range(0..C.len())] as char;
            w.push(if i == 0 { c.to_ascii_uppercase() } else { c });
            w.push(V[rng.gen_range(0..V.len())] as char);
        }
        w
    }

    fn fresh(&mut self, rng: &mut ChaCha8Rng) -> String {
        loop {
            let name = format!("{} {}", Self::word(rng), Self::word(rng));
            if self.used.insert(name.to_lowercase()) {
                return name;
            }
        }
    }
}

struct Builder {
    rng: ChaCha8Rng,
    names: Names,
    graph: FactGraph,
    catalog: TemplateCatalog,
    embedder: HashingEmbedder,
}

impl Builder {
    fn find(name: &str) -> &'static Rel {
        SCHEMA.iter().find(|r| r.name == name).expect("relation in schema")
    }

    fn sample_path(&mut self, hops: usize, first: Option<&'static Rel>) -> Vec<&'static Rel> {
        'restart: loop {
            let mut path: Vec<&'static Rel> = Vec::with_capacity(hops);
            let mut kind = match first {
                Some(r) => r.domain,
                None => *START_KINDS.choose(&mut self.rng).expect("start kinds"),
            };
            for k in 0..hops {
                let last = k + 1 == hops;
                let step = match (k, first) {
                    (0, Some(r)) => r,
                    _ => {
                        let options: Vec<&'static Rel> = SCHEMA
                            .iter()
                            .filter(|r| r.domain == kind && (last || r.range.is_hub()))
                            .collect();
                        match options.choose(&mut self.rng) {
                            Some(r) => *r,
                            None => continue 'restart,
                        }
                    }
                };
                if !last && !step.range.is_hub() {
                    continue 'restart;
                }
                path.push(step);
                kind = step.range;
            }
            return path;
        }
    }

    /// Returns the parametric object of `(subject, rel)`, creating it if the
    /// graph does not know it yet.
    fn object_of(&mut self, subject: &str, rel: &Rel) -> String {
        if let Some(t) = self.graph.get(subject, rel.name) {
            return t.object.clone();
        }
        let object = self.names.fresh(&mut self.rng);
        let t = Triple::new(subject, rel.name, &object).expect("non-empty names");
        self.graph.insert(t).expect("fresh key");
        object
    }

    fn render(&self, t: &Triple) -> String {
        self.catalog.render(t).expect("schema relations have templates")
    }

    fn distance(&self, a: &str, b: &str) -> f64 {
        let ea = self.embedder.embed(a).expect("non-empty text");
        let eb = self.embedder.embed(b).expect("non-empty text");
        cosine_distance(&ea, &eb)
    }

    /// Builds one instance. `start` forces the subject and first relation;
    /// `force_first_edit` guarantees an edit at hop 0.
    fn instance(
        &mut self,
        id: String,
        hops: usize,
        edit_count: usize,
        start: Option<(String, &'static Rel)>,
        distractors: DistractorMode,
    ) -> Instance {
        let path = self.sample_path(hops, start.as_ref().map(|(_, r)| *r));
        let force_first_edit = start.is_some();
        let subject = match start {
            Some((s, _)) => s,
            None => self.names.fresh(&mut self.rng),
        };

        let mut orig_chain = Vec::with_capacity(hops);
        let mut cur = subject.clone();
        for rel in &path {
            let o = self.object_of(&cur, rel);
            orig_chain.push(Triple::new(&cur, rel.name, &o).expect("names"));
            cur = o;
        }

        let m = edit_count.min(hops);
        let positions: BTreeSet<usize> = if force_first_edit && m > 0 {
            let rest = rand::seq::index::sample(&mut self.rng, hops - 1, m - 1);
            std::iter::once(0).chain(rest.into_iter().map(|i| i + 1)).collect()
        } else {
            rand::seq::index::sample(&mut self.rng, hops, m).into_iter().collect()
        };

        let mut gold_chain = Vec::with_capacity(hops);
        let mut edits = Vec::new();
        let mut cur = subject.clone();
        for (k, rel) in path.iter().enumerate() {
            let next = if positions.contains(&k) {
                self.object_of(&cur, rel);
                let new = self.names.fresh(&mut self.rng);
                let t = Triple::new(&cur, rel.name, &new).expect("names");
                edits.push(EditedFact::new(t.clone(), self.render(&t), id.clone()));
                new
            } else {
                self.object_of(&cur, rel)
            };
            gold_chain.push(Triple::new(&cur, rel.name, &next).expect("names"));
            cur = next;
        }

        let mut pattern = "{s}".to_string();
        for rel in &path {
            pattern = rel.phrase.replace("{}", &pattern);
        }
        let pattern = format!("What is {pattern}?");
        self.graph
            .add_question(path.iter().map(|r| r.name.to_string()).collect(), &pattern)
            .expect("one subject slot");
        let question = pattern.replace("{s}", &subject);

        let mut inst = Instance {
            id,
            questions: vec![question],
            orig_answer: orig_chain.last().expect("hops > 0").object.clone(),
            orig_answer_aliases: Vec::new(),
            new_answer: cur,
            answer_aliases: Vec::new(),
            edits,
            gold_chain,
            orig_chain,
            distractors: Vec::new(),
        };
        self.plant_distractors(&mut inst, &path, &positions, distractors);
        inst
    }

    fn plant_distractors(
        &mut self,
        inst: &mut Instance,
        path: &[&'static Rel],
        edited: &BTreeSet<usize>,
        mode: DistractorMode,
    ) {
        if mode == DistractorMode::None {
            return;
        }
        let mut hops: Vec<usize> = edited.iter().copied().collect();
        if mode == DistractorMode::Branching {
            hops.shuffle(&mut self.rng);
        }
        for k in hops {
            let rel = path[k];
            let entity = inst.gold_chain[k].subject.clone();
            let stale = self.render(
                self.graph
                    .get(&entity, rel.name)
                    .expect("edited hop has a parametric fact"),
            );
            let edit_text = inst
                .edits
                .iter()
                .find(|e| e.triple.key() == inst.gold_chain[k].key())
                .expect("edited hop has an edit")
                .text
                .clone();
            let alternatives: Vec<&'static Rel> = SCHEMA
                .iter()
                .filter(|r| r.domain == rel.domain && r.name != rel.name)
                .filter(|r| mode == DistractorMode::DeadEnd || r.range == rel.range)
                .filter(|r| self.graph.get(&entity, r.name).is_none())
                .collect();
            let mut planted = None;
            for _ in 0..32 {
                let Some(alt) = alternatives.choose(&mut self.rng).copied() else {
                    break;
                };
                let object = self.names.fresh(&mut self.rng);
                let t = Triple::new(&entity, alt.name, &object).expect("names");
                let text = self.render(&t);
                // The true edit must stay the closest candidate.
                if self.distance(&stale, &edit_text) < self.distance(&stale, &text) {
                    planted = Some((t, text));
                    break;
                }
            }
            let Some((triple, text)) = planted else { continue };
            if mode == DistractorMode::Branching {
                // Complete the parametric world along the rest of the path.
                let mut cur = triple.object.clone();
                for rel in &path[k + 1..] {
                    cur = self.object_of(&cur, rel);
                }
            }
            inst.distractors.push(EditedFact::new(triple, text, inst.id.clone()));
            if mode == DistractorMode::Branching {
                break;
            }
        }
    }
}

/// Generates a dataset and its fact graph from `cfg`.
pub fn gen_synthetic(cfg: &SynthConfig) -> Result<Synthetic, BenchError> {
    cfg.validate()?;
    let mut b = Builder {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        names: Names { used: HashSet::new() },
        graph: FactGraph::new(),
        catalog: TemplateCatalog::standard(),
        embedder: HashingEmbedder::new(),
    };
    let mut instances = Vec::with_capacity(cfg.count + cfg.conflicts);
    for i in 0..cfg.count {
        let hops = b.rng.gen_range(cfg.hops.0..=cfg.hops.1);
        let edits = b.rng.gen_range(cfg.edits.0..=cfg.edits.1);
        instances.push(b.instance((i + 1).to_string(), hops, edits, None, cfg.distractors));
    }

    // Each injected source edits an unedited hop of one victim's chain.
    let mut injected = BTreeSet::new();
    let mut order: Vec<usize> = (0..instances.len()).collect();
    order.shuffle(&mut b.rng);
    for victim in order {
        if injected.len() == cfg.conflicts {
            break;
        }
        let inst: &Instance = &instances[victim];
        let edited: HashSet<_> = inst.edits.iter().map(|e| e.triple.key()).collect();
        let hops = b.rng.gen_range(cfg.hops.0..=cfg.hops.1);
        let open: Vec<&Triple> = inst
            .gold_chain
            .iter()
            .filter(|t| !edited.contains(&t.key()))
            .filter(|t| hops == 1 || Builder::find(&t.relation).range.is_hub())
            .collect();
        let Some(target) = open.choose(&mut b.rng) else {
            continue;
        };
        let start = (target.subject.clone(), Builder::find(&target.relation));
        let victim_id = inst.id.clone();
        let edits = b.rng.gen_range(cfg.edits.0.max(1)..=cfg.edits.1.max(1));
        let id = (instances.len() + 1).to_string();
        let source = b.instance(id, hops, edits, Some(start), DistractorMode::None);
        instances.push(source);
        injected.insert(victim_id);
    }
    if injected.len() < cfg.conflicts {
        return Err(BenchError::Config(format!(
            "only {} of {} conflicts could be injected",
            injected.len(),
            cfg.conflicts
        )));
    }

    Ok(Synthetic {
        dataset: Dataset::new(format!("synthetic-{}", cfg.seed), instances),
        graph: b.graph,
        injected,
    })
}
