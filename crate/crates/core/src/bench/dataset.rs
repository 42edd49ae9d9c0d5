use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::BenchError;
use crate::knowledge::{EditedFact, Triple};
use crate::text::normalize_answer;

/// One multi-hop question with its edits and post-edit reasoning path.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: String,
    pub questions: Vec<String>,
    pub orig_answer: String,
    pub orig_answer_aliases: Vec<String>,
    pub new_answer: String,
    pub answer_aliases: Vec<String>,
    pub edits: Vec<EditedFact>,
    /// Post-edit reasoning path.
    pub gold_chain: Vec<Triple>,
    /// Pre-edit reasoning path, when known.
    pub orig_chain: Vec<Triple>,
    /// Retrievable facts that are not edits of this instance.
    pub distractors: Vec<EditedFact>,
}

impl Instance {
    pub fn hops(&self) -> usize {
        self.gold_chain.len()
    }

    /// True when `predicted` matches the post-edit answer or an alias.
    pub fn is_correct(&self, predicted: &str) -> bool {
        let p = normalize_answer(predicted);
        !p.is_empty()
            && std::iter::once(&self.new_answer)
                .chain(&self.answer_aliases)
                .any(|a| normalize_answer(a) == p)
    }

    pub fn answer_changed(&self) -> bool {
        let orig = normalize_answer(&self.orig_answer);
        normalize_answer(&self.new_answer) != orig && !self.answer_aliases.iter().any(|a| normalize_answer(a) == orig)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub instances: Vec<Instance>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, instances: Vec<Instance>) -> Self {
        Self {
            name: name.into(),
            instances,
        }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Instance> {
        self.instances.iter().find(|i| i.id == id)
    }

    /// Serializes to the case-list JSON schema read by [`load_mquake`].
    pub fn to_json(&self) -> Result<String, BenchError> {
        let cases: Vec<RawCase> = self.instances.iter().map(RawCase::from_instance).collect();
        Ok(serde_json::to_string_pretty(&cases)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), BenchError> {
        let json = self.to_json()?;
        std::fs::write(path, json + "\n").map_err(|source| BenchError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Outcome of loading a case file.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: Dataset,
    /// Skipped cases with the reason for each.
    pub warnings: Vec<String>,
}

impl Loaded {
    pub fn skipped(&self) -> usize {
        self.warnings.len()
    }
}

/// Reads a JSON array of MQuAKE-style cases. Malformed cases are skipped and
/// reported in [`Loaded::warnings`].
pub fn load_mquake(path: &Path) -> Result<Loaded, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let loaded = parse_cases(&text, &name).map_err(|source| BenchError::Format {
        path: path.to_path_buf(),
        source,
    })?;
    if loaded.dataset.is_empty() {
        return Err(BenchError::Empty(path.to_path_buf()));
    }
    Ok(loaded)
}

/// Parses case-list JSON text; see [`load_mquake`].
pub fn parse_cases(text: &str, name: &str) -> Result<Loaded, serde_json::Error> {
    let raw: Vec<Value> = serde_json::from_str(text)?;
    let mut instances = Vec::with_capacity(raw.len());
    let mut warnings = Vec::new();
    let mut ids = HashSet::new();
    for (position, value) in raw.into_iter().enumerate() {
        let label = value
            .get("case_id")
            .and_then(id_string)
            .unwrap_or_else(|| format!("#{position}"));
        let case: RawCase = match serde_json::from_value(value) {
            Ok(c) => c,
            Err(e) => {
                warnings.push(format!("case {label}: {e}"));
                continue;
            }
        };
        match case.into_instance() {
            Ok(instance) => {
                if !ids.insert(instance.id.clone()) {
                    warnings.push(format!("case {label}: duplicate id"));
                    continue;
                }
                instances.push(instance);
            }
            Err(reason) => warnings.push(format!("case {label}: {reason}")),
        }
    }
    for w in &warnings {
        tracing::warn!("{w}");
    }
    Ok(Loaded {
        dataset: Dataset::new(name, instances),
        warnings,
    })
}

fn id_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RawTarget {
    #[serde(rename = "str")]
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawRewrite {
    prompt: String,
    subject: String,
    target_new: RawTarget,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target_true: Option<RawTarget>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    relation_id: Option<String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct RawOrig {
    #[serde(default)]
    triples_labeled: Vec<[String; 3]>,
    #[serde(default)]
    new_triples_labeled: Vec<[String; 3]>,
    #[serde(default)]
    edit_triples_labeled: Vec<[String; 3]>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawDistractor {
    triple: [String; 3],
    text: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawCase {
    case_id: Value,
    #[serde(default)]
    requested_rewrite: Vec<RawRewrite>,
    #[serde(default)]
    questions: Vec<String>,
    #[serde(default)]
    answer: Option<String>,
    #[serde(default)]
    answer_alias: Vec<String>,
    #[serde(default)]
    new_answer: Option<String>,
    #[serde(default)]
    new_answer_alias: Vec<String>,
    #[serde(default)]
    orig: RawOrig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    distractors: Vec<RawDistractor>,
}

fn triple_of(t: &[String; 3]) -> Result<Triple, String> {
    Triple::new(&t[0], &t[1], &t[2]).map_err(|e| e.to_string())
}

/// Recovers a cloze prompt from `"<prompt with subject> <object>."`.
fn cloze_from_text(fact: &EditedFact) -> Option<String> {
    let body = fact.text.trim().strip_suffix('.').unwrap_or(fact.text.trim());
    let body = body.strip_suffix(fact.triple.object.trim_end_matches('.'))?.trim_end();
    if !body.contains(&fact.triple.subject) {
        return None;
    }
    Some(body.replacen(&fact.triple.subject, "{}", 1))
}

impl RawCase {
    fn into_instance(self) -> Result<Instance, String> {
        let id = id_string(&self.case_id).ok_or("case_id must be a string or number")?;
        let questions: Vec<String> = self
            .questions
            .into_iter()
            .map(|q| q.trim().to_string())
            .filter(|q| !q.is_empty())
            .collect();
        if questions.is_empty() {
            return Err("no questions".into());
        }
        let new_answer = self
            .new_answer
            .filter(|a| !a.trim().is_empty())
            .ok_or("missing post-edit answer")?;
        let gold_chain = self
            .orig
            .new_triples_labeled
            .iter()
            .map(triple_of)
            .collect::<Result<Vec<_>, _>>()?;
        if gold_chain.is_empty() {
            return Err("missing post-edit triples".into());
        }
        let orig_chain = self
            .orig
            .triples_labeled
            .iter()
            .map(triple_of)
            .collect::<Result<Vec<_>, _>>()?;
        let labeled = &self.orig.edit_triples_labeled;
        let mut edits = Vec::with_capacity(self.requested_rewrite.len());
        let mut keys = HashSet::new();
        for (i, rw) in self.requested_rewrite.iter().enumerate() {
            let relation = labeled
                .get(i)
                .filter(|_| labeled.len() == self.requested_rewrite.len())
                .map(|t| t[1].clone())
                .or_else(|| rw.relation_id.clone())
                .unwrap_or_else(|| rw.prompt.clone());
            let triple = Triple::new(&rw.subject, &relation, &rw.target_new.text).map_err(|e| e.to_string())?;
            if !keys.insert(triple.key()) {
                return Err(format!("edits ({}, {relation}) twice", rw.subject));
            }
            let stem = rw.prompt.replace("{}", &rw.subject);
            let text = format!("{} {}.", stem.trim(), rw.target_new.text.trim().trim_end_matches('.'));
            edits.push(EditedFact::new(triple, text, id.clone()));
        }
        let distractors = self
            .distractors
            .iter()
            .map(|d| Ok(EditedFact::new(triple_of(&d.triple)?, d.text.clone(), id.clone())))
            .collect::<Result<Vec<_>, String>>()?;
        let last = gold_chain.last().expect("non-empty chain");
        let instance = Instance {
            id: id.clone(),
            questions,
            orig_answer: self.answer.unwrap_or_default(),
            orig_answer_aliases: self.answer_alias,
            new_answer,
            answer_aliases: self.new_answer_alias,
            edits,
            gold_chain: gold_chain.clone(),
            orig_chain,
            distractors,
        };
        if !instance.is_correct(&last.object) {
            tracing::warn!(id = %id, "post-edit answer differs from the last post-edit triple");
        }
        Ok(instance)
    }

    fn from_instance(inst: &Instance) -> Self {
        let case_id = match inst.id.parse::<u64>() {
            Ok(n) => Value::from(n),
            Err(_) => Value::from(inst.id.clone()),
        };
        let labeled = |t: &Triple| [t.subject.clone(), t.relation.clone(), t.object.clone()];
        let requested_rewrite = inst
            .edits
            .iter()
            .map(|e| RawRewrite {
                prompt: cloze_from_text(e).unwrap_or_else(|| format!("{{}} {}", e.triple.relation)),
                subject: e.triple.subject.clone(),
                target_new: RawTarget {
                    text: e.triple.object.clone(),
                    id: None,
                },
                target_true: None,
                relation_id: Some(e.triple.relation.clone()),
            })
            .collect();
        RawCase {
            case_id,
            requested_rewrite,
            questions: inst.questions.clone(),
            answer: Some(inst.orig_answer.clone()),
            answer_alias: inst.orig_answer_aliases.clone(),
            new_answer: Some(inst.new_answer.clone()),
            new_answer_alias: inst.answer_aliases.clone(),
            orig: RawOrig {
                triples_labeled: inst.orig_chain.iter().map(labeled).collect(),
                new_triples_labeled: inst.gold_chain.iter().map(labeled).collect(),
                edit_triples_labeled: inst.edits.iter().map(|e| labeled(&e.triple)).collect(),
            },
            distractors: inst
                .distractors
                .iter()
                .map(|d| RawDistractor {
                    triple: labeled(&d.triple),
                    text: d.text.clone(),
                })
                .collect(),
        }
    }
}
