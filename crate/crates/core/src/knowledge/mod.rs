//! Edited-fact storage and embedding-based retrieval.

mod embed;
mod remote;
mod store;

pub use embed::{cosine_distance, Embedder, Embedding, HashingEmbedder, HASHING_DIMENSION};
pub use remote::RemoteEmbedder;
pub use store::{KnowledgeStore, Retrieved};

use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{contains_phrase, normalize};

#[derive(Debug, Error)]
pub enum KnowledgeError {
    #[error("triple field `{0}` is empty")]
    EmptyField(&'static str),
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("embedding provider `{provider}` failed: {message}")]
    Provider {
        provider: String,
        message: String,
        retryable: bool,
    },
    #[error("embedding has dimension {got}, store expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedding contains a non-finite value")]
    NonFinite,
    #[error("instance `{instance}` edits ({subject}, {relation}) more than once")]
    DuplicateEdit {
        instance: String,
        subject: String,
        relation: String,
    },
}

impl KnowledgeError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, KnowledgeError::Provider { retryable: true, .. })
    }
}

/// A `(subject, relation, object)` fact. Equality and hashing use the
/// normalized form of each field.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub relation: String,
    pub object: String,
}

impl Triple {
    pub fn new(subject: &str, relation: &str, object: &str) -> Result<Self, KnowledgeError> {
        let clean = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ");
        let (subject, relation, object) = (clean(subject), clean(relation), clean(object));
        if subject.is_empty() {
            return Err(KnowledgeError::EmptyField("subject"));
        }
        if relation.is_empty() {
            return Err(KnowledgeError::EmptyField("relation"));
        }
        if object.is_empty() {
            return Err(KnowledgeError::EmptyField("object"));
        }
        Ok(Self {
            subject,
            relation,
            object,
        })
    }

    /// Normalized `(subject, relation)` pair: the key of a functional fact.
    pub fn key(&self) -> (String, String) {
        (normalize(&self.subject), normalize(&self.relation))
    }

    pub fn normalized_object(&self) -> String {
        normalize(&self.object)
    }

    /// True when both facts assign the same subject and relation but
    /// disagree on the object.
    pub fn overrides(&self, other: &Triple) -> bool {
        self.key() == other.key() && self.normalized_object() != other.normalized_object()
    }
}

impl PartialEq for Triple {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key() && self.normalized_object() == other.normalized_object()
    }
}

impl Eq for Triple {}

impl Hash for Triple {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key().hash(state);
        self.normalized_object().hash(state);
    }
}

/// One piece of injected knowledge: a triple, its sentence form, and the
/// instance it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditedFact {
    pub triple: Triple,
    pub text: String,
    pub source_instance: String,
}

impl EditedFact {
    pub fn new(triple: Triple, text: impl Into<String>, source_instance: impl Into<String>) -> Self {
        let fact = Self {
            triple,
            text: text.into(),
            source_instance: source_instance.into(),
        };
        if !fact.mentions_entities() {
            tracing::warn!(text = %fact.text, "edited fact text does not mention its subject and object");
        }
        fact
    }

    pub fn mentions_entities(&self) -> bool {
        !self.text.trim().is_empty()
            && contains_phrase(&self.text, &self.triple.subject)
            && contains_phrase(&self.text, &self.triple.object)
    }
}
