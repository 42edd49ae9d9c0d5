//! Text normalization, relation sentence templates, and step parsing.
//!
//! Reasoning steps are plain sentences. The rule-based verifiers and the
//! oracle generator both need to recover a `(subject, relation, object)`
//! triple from a step, so every relation carries one or more sentence
//! templates with `{s}` and `{o}` placeholders.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::knowledge::Triple;

/// Case-folds, trims, collapses internal whitespace and maps typographic
/// quotes to their ASCII forms.
pub fn normalize(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        for ch in word.chars() {
            match ch {
                '\u{201c}' | '\u{201d}' | '\u{201e}' | '\u{00ab}' | '\u{00bb}' => out.push('"'),
                '\u{2018}' | '\u{2019}' | '`' => out.push('\''),
                _ => out.extend(ch.to_lowercase()),
            }
        }
    }
    // LaTeX-style ``quotes'' occur in dataset text.
    out.replace("''", "\"")
}

/// Normalization used when comparing answers: [`normalize`] plus stripping
/// leading and trailing punctuation.
pub fn normalize_answer(text: &str) -> String {
    normalize(text)
        .trim_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace())
        .to_string()
}

/// Whitespace-collapse without case folding; quotes are still unified so
/// template literals match dataset renderings.
fn canonical_surface(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        for ch in word.chars() {
            match ch {
                '\u{201c}' | '\u{201d}' | '\u{201e}' => out.push('"'),
                '\u{2018}' | '\u{2019}' | '`' => out.push('\''),
                _ => out.push(ch),
            }
        }
    }
    out.replace("''", "\"")
}

/// True when `needle` occurs in `haystack` on token boundaries, after both
/// are normalized.
pub fn contains_phrase(haystack: &str, needle: &str) -> bool {
    let hay = normalize(haystack);
    let needle = normalize(needle);
    if needle.is_empty() {
        return false;
    }
    let is_word = |c: Option<char>| c.is_some_and(|c| c.is_alphanumeric());
    let mut start = 0;
    while let Some(pos) = hay[start..].find(&needle) {
        let at = start + pos;
        let end = at + needle.len();
        let before = hay[..at].chars().next_back();
        let after = hay[end..].chars().next();
        let needle_starts_word = is_word(needle.chars().next());
        let needle_ends_word = is_word(needle.chars().next_back());
        let left_ok = !needle_starts_word || !is_word(before);
        let right_ok = !needle_ends_word || !is_word(after);
        if left_ok && right_ok {
            return true;
        }
        start = at + hay[at..].chars().next().map_or(1, char::len_utf8);
    }
    false
}

/// Renders the terminal step that closes a reasoning chain.
pub fn render_answer_step(answer: &str) -> String {
    format!("{} is the answer.", answer.trim())
}

/// A sentence pattern with literal text around one or two placeholders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Pattern {
    raw: String,
    /// Literal pieces; `slots[i]` sits between `literals[i]` and `literals[i + 1]`.
    literals: Vec<String>,
    slots: Vec<Slot>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Slot {
    Subject,
    Object,
}

impl Pattern {
    pub(crate) fn parse(raw: &str) -> Option<Self> {
        let raw = canonical_surface(raw);
        let mut literals = Vec::new();
        let mut slots = Vec::new();
        let mut rest = raw.as_str();
        loop {
            let next = [("{s}", Slot::Subject), ("{o}", Slot::Object)]
                .into_iter()
                .filter_map(|(tag, slot)| rest.find(tag).map(|pos| (pos, tag, slot)))
                .min_by_key(|(pos, _, _)| *pos);
            match next {
                Some((pos, tag, slot)) => {
                    literals.push(rest[..pos].to_string());
                    slots.push(slot);
                    rest = &rest[pos + tag.len()..];
                }
                None => {
                    literals.push(rest.to_string());
                    break;
                }
            }
        }
        if slots.is_empty() || slots.len() > 2 {
            return None;
        }
        if slots.len() == 2 && slots[0] == slots[1] {
            return None;
        }
        // Adjacent placeholders cannot be split apart.
        if literals[1..literals.len() - 1].iter().any(|l| l.is_empty()) {
            return None;
        }
        Some(Self { raw, literals, slots })
    }

    fn literal_len(&self) -> usize {
        self.literals.iter().map(|l| l.len()).sum()
    }

    pub(crate) fn literal_length(&self) -> usize {
        self.literal_len()
    }

    pub(crate) fn slot_kinds(&self) -> &[Slot] {
        &self.slots
    }

    pub(crate) fn capture_subject(&self, text: &str) -> Option<String> {
        self.captures(text)?
            .into_iter()
            .find(|(slot, _)| *slot == Slot::Subject)
            .map(|(_, v)| v)
    }

    /// Matches `text` case-insensitively (ASCII), returning the captured
    /// placeholder values in slot order.
    fn captures(&self, text: &str) -> Option<Vec<(Slot, String)>> {
        let surface = canonical_surface(text);
        let lower = surface.to_ascii_lowercase();
        let lits: Vec<String> = self.literals.iter().map(|l| l.to_ascii_lowercase()).collect();
        let first = &lits[0];
        if !lower.starts_with(first.as_str()) {
            return None;
        }
        let last = &lits[lits.len() - 1];
        if lower.len() < first.len() + last.len() || !lower.ends_with(last.as_str()) {
            return None;
        }
        let body_end = lower.len() - last.len();
        let mut cursor = first.len();
        let mut out = Vec::with_capacity(self.slots.len());
        for (i, slot) in self.slots.iter().enumerate() {
            let value_end = if i + 1 == self.slots.len() {
                body_end
            } else {
                let sep = &lits[i + 1];
                cursor + lower[cursor..body_end].find(sep.as_str())?
            };
            if value_end < cursor {
                return None;
            }
            let value = surface[cursor..value_end].trim();
            if value.is_empty() {
                return None;
            }
            out.push((*slot, value.to_string()));
            cursor = value_end + lits.get(i + 1).map_or(0, |l| l.len());
        }
        Some(out)
    }

    pub(crate) fn fill(&self, subject: &str, object: &str) -> String {
        let mut out = self.literals[0].clone();
        for (i, slot) in self.slots.iter().enumerate() {
            let value = match slot {
                Slot::Subject => subject,
                Slot::Object => object,
            };
            out.push_str(value);
            let lit = &self.literals[i + 1];
            // "Washington, D.C." already ends the sentence.
            if i + 1 == self.slots.len() && lit == "." && value.ends_with('.') {
                continue;
            }
            out.push_str(lit);
        }
        out
    }

    pub(crate) fn raw(&self) -> &str {
        &self.raw
    }
}

/// Re-attaches a sentence-final period swallowed from an initialism such as
/// "D.C." when the template literal consumed it.
fn repair_initialism(value: String, pattern_ends_with_period: bool) -> String {
    if !pattern_ends_with_period {
        return value;
    }
    let last = value.rsplit(' ').next().unwrap_or("");
    let pieces: Vec<&str> = last.split('.').collect();
    let initialism = pieces.len() >= 2
        && pieces
            .iter()
            .all(|p| p.chars().count() == 1 && p.chars().all(char::is_alphabetic));
    if initialism {
        format!("{value}.")
    } else {
        value
    }
}

/// Sentence templates for one relation. The first template is used for
/// rendering; all of them are tried when parsing.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct RelationTemplate {
    pub relation: String,
    pub patterns: Vec<String>,
}

/// How a reasoning step reads under the known templates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepForm {
    Fact(Triple),
    Answer(String),
    Unknown,
}

impl StepForm {
    /// Entity mentions carried by the step.
    pub fn entities(&self) -> Vec<&str> {
        match self {
            StepForm::Fact(t) => vec![t.subject.as_str(), t.object.as_str()],
            StepForm::Answer(a) => vec![a.as_str()],
            StepForm::Unknown => Vec::new(),
        }
    }
}

/// Registry of relation sentence templates.
#[derive(Debug, Clone, Default)]
pub struct TemplateCatalog {
    relations: BTreeMap<String, Vec<Pattern>>,
}

impl TemplateCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Templates for the relations used by the worked examples and the
    /// synthetic generator.
    pub fn standard() -> Self {
        let mut catalog = Self::new();
        for (relation, patterns) in STANDARD_TEMPLATES {
            for p in *patterns {
                catalog.add(relation, p).expect("built-in templates are well formed");
            }
        }
        catalog
    }

    /// Registers a pattern. Returns `None` when the pattern lacks a subject
    /// and object placeholder.
    pub fn add(&mut self, relation: &str, pattern: &str) -> Option<()> {
        let parsed = Pattern::parse(pattern)?;
        if parsed.slots.len() != 2 {
            return None;
        }
        let entry = self.relations.entry(relation.trim().to_string()).or_default();
        if !entry.iter().any(|p| p.raw == parsed.raw) {
            entry.push(parsed);
        }
        Some(())
    }

    pub fn extend(&mut self, templates: &[RelationTemplate]) {
        for t in templates {
            for p in &t.patterns {
                if self.add(&t.relation, p).is_none() {
                    tracing::warn!(relation = %t.relation, pattern = %p, "ignoring malformed template");
                }
            }
        }
    }

    pub fn relations(&self) -> impl Iterator<Item = &str> {
        self.relations.keys().map(String::as_str)
    }

    pub fn contains(&self, relation: &str) -> bool {
        self.relations.contains_key(relation)
    }

    pub fn to_templates(&self) -> Vec<RelationTemplate> {
        self.relations
            .iter()
            .map(|(relation, patterns)| RelationTemplate {
                relation: relation.clone(),
                patterns: patterns.iter().map(|p| p.raw().to_string()).collect(),
            })
            .collect()
    }

    /// Renders a triple with its relation's primary template.
    pub fn render(&self, triple: &Triple) -> Option<String> {
        let pattern = self.relations.get(triple.relation.as_str())?.first()?;
        Some(pattern.fill(&triple.subject, &triple.object))
    }

    /// Renders the prompt stem used by dataset rewrite records: the primary
    /// template cut before the object, with `{}` in place of the subject.
    pub fn cloze_prompt(&self, relation: &str) -> Option<String> {
        let pattern = self.relations.get(relation)?.first()?;
        let raw = pattern.raw();
        let cut = raw.find("{o}")?;
        if raw[cut + 3..].trim() != "." && !raw[cut + 3..].trim().is_empty() {
            return None;
        }
        Some(raw[..cut].trim_end().replace("{s}", "{}"))
    }

    /// Parses a fact sentence into a triple, preferring the most specific
    /// (longest literal) matching template.
    pub fn parse_fact(&self, sentence: &str) -> Option<Triple> {
        let mut best: Option<(usize, Triple)> = None;
        for (relation, patterns) in &self.relations {
            for pattern in patterns {
                let Some(caps) = pattern.captures(sentence) else {
                    continue;
                };
                let mut subject = None;
                let mut object = None;
                for (slot, value) in caps {
                    match slot {
                        Slot::Subject => subject = Some(value),
                        Slot::Object => object = Some(value),
                    }
                }
                let (Some(subject), Some(object)) = (subject, object) else {
                    continue;
                };
                let ends_with_object = pattern.slots.last() == Some(&Slot::Object);
                let object = if ends_with_object {
                    repair_initialism(object, pattern.literals.last().is_some_and(|l| l == "."))
                } else {
                    object
                };
                let Ok(triple) = Triple::new(&subject, relation, &object) else {
                    continue;
                };
                let score = pattern.literal_len();
                if best.as_ref().is_none_or(|(s, _)| score > *s) {
                    best = Some((score, triple));
                }
            }
        }
        best.map(|(_, t)| t)
    }

    /// Classifies a reasoning step as a fact, a terminal answer, or unknown.
    pub fn parse_step(&self, step: &str) -> StepForm {
        if let Some(answer) = crate::llm::extract_answer(step) {
            return StepForm::Answer(answer);
        }
        match self.parse_fact(step) {
            Some(t) => StepForm::Fact(t),
            None => StepForm::Unknown,
        }
    }
}

/// Built-in relation templates. Every primary template ends with `{o}.` so
/// it can be cut into a dataset-style cloze prompt.
const STANDARD_TEMPLATES: &[(&str, &[&str])] = &[
    ("author", &["The writer of {s} is {o}.", "The author of {s} is {o}."]),
    ("died_in", &["{s} died in the city of {o}."]),
    ("born_in", &["{s} was born in the city of {o}."]),
    (
        "continent",
        &[
            "{s} is in the continent of {o}.",
            "{s} is located in the continent of {o}.",
            "{s} is located in the continent if {o}.",
        ],
    ),
    ("country", &["{s} is located in the country of {o}."]),
    ("capital", &["The capital of {s} is {o}."]),
    ("mayor", &["The mayor of {s} is {o}."]),
    ("twinned_with", &["{s} is twinned with the city of {o}."]),
    ("citizen_of", &["{s} is a citizen of {o}."]),
    ("created_by", &["{s} was created by {o}."]),
    ("director", &["The director of {s} is {o}."]),
    ("educated_at", &["{s} was educated at {o}."]),
    ("head_of_state", &["The head of state of {s} is {o}."]),
    ("founded_by", &["{s} was founded by {o}."]),
    ("ceo", &["The chief executive officer of {s} is {o}."]),
    ("spouse", &["{s} is married to {o}."]),
    ("language", &["The official language of {s} is {o}."]),
    ("headquarters", &["The headquarters of {s} is in the city of {o}."]),
    ("sport", &["{s} plays the sport of {o}."]),
    ("employer", &["{s} works for {o}."]),
    ("religion", &["{s} is affiliated with the religion of {o}."]),
    ("genre", &["The genre of {s} is {o}."]),
];
