//! Deterministic generator backed by an explicit fact graph.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{parse_generation_prompt, GenerationRequest, Generator, LlmError};
use crate::knowledge::Triple;
use crate::text::{normalize, render_answer_step, Pattern, RelationTemplate, Slot, StepForm, TemplateCatalog};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("({subject}, {relation}) already maps to `{existing}`, cannot also map to `{object}`")]
    NotFunctional {
        subject: String,
        relation: String,
        existing: String,
        object: String,
    },
    #[error("question template `{0}` needs exactly one {{s}} placeholder")]
    BadQuestionTemplate(String),
}

/// A question phrasing for one relation path; `{s}` marks the subject.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionTemplate {
    pub path: Vec<String>,
    pub pattern: String,
}

/// A functional set of triples plus the question phrasings the oracle
/// understands.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(from = "GraphFile", into = "GraphFile")]
pub struct FactGraph {
    facts: BTreeMap<(String, String), Triple>,
    questions: Vec<QuestionTemplate>,
    templates: Vec<RelationTemplate>,
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    triples: Vec<Triple>,
    questions: Vec<QuestionTemplate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    templates: Vec<RelationTemplate>,
}

impl From<GraphFile> for FactGraph {
    fn from(file: GraphFile) -> Self {
        let mut graph = FactGraph {
            questions: file.questions,
            templates: file.templates,
            ..Default::default()
        };
        for t in file.triples {
            // Later duplicates lose; a graph file is expected to be functional.
            if let Err(e) = graph.insert(t) {
                tracing::warn!(error = %e, "dropping non-functional triple from graph file");
            }
        }
        graph
    }
}

impl From<FactGraph> for GraphFile {
    fn from(graph: FactGraph) -> Self {
        GraphFile {
            triples: graph.facts.into_values().collect(),
            questions: graph.questions,
            templates: graph.templates,
        }
    }
}

impl FactGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a triple; re-adding the same fact is a no-op.
    pub fn insert(&mut self, triple: Triple) -> Result<(), GraphError> {
        let key = triple.key();
        if let Some(existing) = self.facts.get(&key) {
            if existing.normalized_object() != triple.normalized_object() {
                return Err(GraphError::NotFunctional {
                    subject: triple.subject,
                    relation: triple.relation,
                    existing: existing.object.clone(),
                    object: triple.object,
                });
            }
            return Ok(());
        }
        self.facts.insert(key, triple);
        Ok(())
    }

    pub fn add_question(&mut self, path: Vec<String>, pattern: &str) -> Result<(), GraphError> {
        let parsed = Pattern::parse(pattern).ok_or_else(|| GraphError::BadQuestionTemplate(pattern.into()))?;
        if parsed.slot_kinds() != [Slot::Subject] {
            return Err(GraphError::BadQuestionTemplate(pattern.into()));
        }
        let template = QuestionTemplate {
            path,
            pattern: pattern.to_string(),
        };
        if !self.questions.contains(&template) {
            self.questions.push(template);
        }
        Ok(())
    }

    pub fn add_templates(&mut self, templates: &[RelationTemplate]) {
        self.templates.extend_from_slice(templates);
    }

    pub fn templates(&self) -> &[RelationTemplate] {
        &self.templates
    }

    pub fn get(&self, subject: &str, relation: &str) -> Option<&Triple> {
        self.facts.get(&(normalize(subject), normalize(relation)))
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn triples(&self) -> impl Iterator<Item = &Triple> {
        self.facts.values()
    }

    pub fn questions(&self) -> &[QuestionTemplate] {
        &self.questions
    }

    /// Walks `path` from `subject`, returning the visited triples; stops
    /// early when a hop is missing.
    pub fn walk(&self, subject: &str, path: &[String]) -> Vec<Triple> {
        let mut out = Vec::with_capacity(path.len());
        let mut current = subject.to_string();
        for relation in path {
            let Some(t) = self.get(&current, relation) else { break };
            current = t.object.clone();
            out.push(t.clone());
        }
        out
    }

    /// Finds the subject and relation path of a question, preferring the
    /// most specific matching template.
    pub fn match_question(&self, question: &str) -> Option<(String, Vec<String>)> {
        let mut best: Option<(usize, String, Vec<String>)> = None;
        for qt in &self.questions {
            let Some(pattern) = Pattern::parse(&qt.pattern) else {
                continue;
            };
            let Some(subject) = pattern.capture_subject(question) else {
                continue;
            };
            let score = pattern.literal_length();
            if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
                best = Some((score, subject, qt.path.clone()));
            }
        }
        best.map(|(_, s, p)| (s, p))
    }
}

/// Step-level generator that reads the prompt and follows the graph.
///
/// The step index is the chain length; the next hop continues from the
/// object of the last step (the question subject for an empty chain). Once
/// the question's relation path is exhausted it emits `"X is the answer."`.
/// A missing hop yields an empty completion.
pub struct OracleGenerator {
    graph: FactGraph,
    catalog: TemplateCatalog,
    hallucinations: HashMap<usize, String>,
    id: String,
}

impl OracleGenerator {
    pub fn new(graph: FactGraph) -> Self {
        let mut catalog = TemplateCatalog::standard();
        catalog.extend(graph.templates());
        Self {
            graph,
            catalog,
            hallucinations: HashMap::new(),
            id: "oracle".into(),
        }
    }

    pub fn with_catalog(mut self, catalog: TemplateCatalog) -> Self {
        self.catalog = catalog;
        self
    }

    /// Arms a fault: at chain length `depth` the oracle emits `sentence`
    /// instead of the graph continuation.
    pub fn with_hallucination(mut self, depth: usize, sentence: impl Into<String>) -> Self {
        self.hallucinations.insert(depth, sentence.into());
        self
    }

    pub fn graph(&self) -> &FactGraph {
        &self.graph
    }

    pub fn catalog(&self) -> &TemplateCatalog {
        &self.catalog
    }

    /// Computes the oracle continuation for a generation prompt.
    pub fn oracle_complete(&self, request: &GenerationRequest) -> Result<String, LlmError> {
        let (question, chain) = parse_generation_prompt(&request.prompt)?;
        if let Some(sentence) = self.hallucinations.get(&chain.len()) {
            return Ok(sentence.clone());
        }
        let (subject, path) = self
            .graph
            .match_question(&question)
            .ok_or_else(|| LlmError::UnknownQuestion(question.clone()))?;
        let entity = match chain.last() {
            None => subject,
            Some(last) => match self.catalog.parse_step(last) {
                StepForm::Fact(t) => t.object,
                StepForm::Answer(_) | StepForm::Unknown => return Ok(String::new()),
            },
        };
        let hop = chain.len();
        if hop >= path.len() {
            return Ok(render_answer_step(&entity));
        }
        Ok(self
            .graph
            .get(&entity, &path[hop])
            .and_then(|t| self.catalog.render(t))
            .unwrap_or_default())
    }
}

impl Generator for OracleGenerator {
    fn complete(&self, request: &GenerationRequest) -> Result<String, LlmError> {
        self.oracle_complete(request)
    }

    fn id(&self) -> &str {
        &self.id
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::llm::{generate_step, render_generation_prompt};

    fn t(s: &str, r: &str, o: &str) -> Triple {
        Triple::new(s, r, o).unwrap()
    }

    fn orwell_graph() -> FactGraph {
        let mut g = FactGraph::new();
        g.insert(t("the novel \"1984\"", "author", "George Orwell")).unwrap();
        g.insert(t("George Orwell", "died_in", "London")).unwrap();
        g.insert(t("London", "continent", "Europe")).unwrap();
        g.add_question(
            vec!["author".into(), "died_in".into(), "continent".into()],
            "The writer of {s} died in which continent?",
        )
        .unwrap();
        g
    }

    fn plainfield_graph() -> FactGraph {
        let mut g = FactGraph::new();
        g.insert(t("Plainfield Town Hall", "country", "the United States of America"))
            .unwrap();
        g.insert(t("the United States of America", "capital", "Washington, D.C."))
            .unwrap();
        g.add_question(
            vec!["country".into(), "capital".into()],
            "What is the capital of the country where {s} is located?",
        )
        .unwrap();
        g
    }

    #[test]
    fn plainfield_first_step() {
        let oracle = OracleGenerator::new(plainfield_graph());
        let step = generate_step(
            &oracle,
            "What is the capital of the country where Plainfield Town Hall is located?",
            &[],
        )
        .unwrap();
        assert_eq!(
            step,
            "Plainfield Town Hall is located in the country of the United States of America."
        );
    }

    #[test]
    fn plainfield_terminal_step() {
        let oracle = OracleGenerator::new(plainfield_graph());
        let chain = vec![
            "Plainfield Town Hall is located in the country of the United States of America.".to_string(),
            "The capital of United States is Washington, D.C.".to_string(),
        ];
        let step = generate_step(
            &oracle,
            "What is the capital of the country where Plainfield Town Hall is located?",
            &chain,
        )
        .unwrap();
        assert_eq!(step, "Washington, D.C. is the answer.");
    }

    #[test]
    fn orwell_chain() {
        let oracle = OracleGenerator::new(orwell_graph());
        let q = "The writer of the novel “1984” died in which continent?";
        let first = generate_step(&oracle, q, &[]).unwrap();
        assert_eq!(first, "The writer of the novel \"1984\" is George Orwell.");
        let chain = vec![first, "George Orwell died in the city of London.".to_string()];
        assert_eq!(
            generate_step(&oracle, q, &chain).unwrap(),
            "London is in the continent of Europe."
        );
        let mut full = chain.clone();
        full.push("London is in the continent of Europe.".into());
        assert_eq!(generate_step(&oracle, q, &full).unwrap(), "Europe is the answer.");
    }

    #[test]
    fn missing_hop_is_empty_completion() {
        let oracle = OracleGenerator::new(orwell_graph());
        let q = "The writer of the novel “1984” died in which continent?";
        let chain = vec![
            "The writer of the novel \"1984\" is George Orwell.".to_string(),
            "George Orwell died in the city of Bucharest.".to_string(),
        ];
        let req = GenerationRequest::step(render_generation_prompt(q, &chain));
        assert_eq!(oracle.complete(&req).unwrap(), "");
    }

    #[test]
    fn hallucination_fault() {
        let oracle =
            OracleGenerator::new(orwell_graph()).with_hallucination(0, "Berlin is located in the continent of Asia.");
        let q = "The writer of the novel “1984” died in which continent?";
        assert_eq!(
            generate_step(&oracle, q, &[]).unwrap(),
            "Berlin is located in the continent of Asia."
        );
    }

    #[test]
    fn errors_on_bad_prompt_or_question() {
        let oracle = OracleGenerator::new(orwell_graph());
        let bad = GenerationRequest::step("just text".into());
        assert!(matches!(oracle.complete(&bad), Err(LlmError::UnparseablePrompt(_))));
        let unknown = GenerationRequest::step(render_generation_prompt("Who?", &[]));
        assert!(matches!(oracle.complete(&unknown), Err(LlmError::UnknownQuestion(_))));
    }

    #[test]
    fn functional_graph() {
        let mut g = FactGraph::new();
        g.insert(t("A", "r", "B")).unwrap();
        g.insert(t("a", "R", "b")).unwrap();
        assert!(matches!(
            g.insert(t("A", "r", "C")),
            Err(GraphError::NotFunctional { .. })
        ));
        assert!(g.add_question(vec![], "no slot").is_err());
    }

    #[test]
    fn graph_json_round_trip() {
        let g = orwell_graph();
        let json = serde_json::to_string(&g).unwrap();
        let back: FactGraph = serde_json::from_str(&json).unwrap();
        assert_eq!(back.len(), g.len());
        assert_eq!(back.questions(), g.questions());
    }

    proptest! {
        #[test]
        fn oracle_parses_rendered_prompts(
            hops in 1usize..5,
            names in proptest::collection::vec("[A-Z][a-z]{2,8}", 6),
            chain_len in 0usize..6,
        ) {
            let relations = ["died_in", "citizen_of", "capital", "spouse", "employer"];
            let mut g = FactGraph::new();
            let path: Vec<String> = relations[..hops].iter().map(|s| s.to_string()).collect();
            let mut entity = format!("{} Start", names[0]);
            let mut rendered = Vec::new();
            let catalog = TemplateCatalog::standard();
            for (i, rel) in path.iter().enumerate() {
                let next = format!("{} {}", names[i + 1], i);
                let triple = t(&entity, rel, &next);
                rendered.push(catalog.render(&triple).unwrap());
                g.insert(triple).unwrap();
                entity = next;
            }
            g.add_question(path.clone(), "Where does the path from {s} end?").unwrap();
            let oracle = OracleGenerator::new(g);
            let q = format!("Where does the path from {} Start end?", names[0]);
            let k = chain_len.min(hops);
            let req = GenerationRequest::step(render_generation_prompt(&q, &rendered[..k]));
            let out = oracle.complete(&req).unwrap();
            let again = oracle.complete(&req).unwrap();
            prop_assert_eq!(&out, &again);
            if k == hops {
                prop_assert_eq!(out, format!("{} is the answer.", entity));
            } else {
                prop_assert_eq!(&out, &rendered[k]);
            }
        }
    }
}
