use serde::{Deserialize, Serialize};

use super::KnowledgeError;

/// Dimension of the default hashing embedder.
pub const HASHING_DIMENSION: usize = 256;

/// A unit-norm embedding vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding(Vec<f32>);

impl Embedding {
    /// Normalizes `values` to unit length. Fails on non-finite entries or a
    /// zero vector.
    pub fn from_raw(values: Vec<f32>) -> Result<Self, KnowledgeError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(KnowledgeError::NonFinite);
        }
        let norm = values.iter().map(|v| (*v as f64) * (*v as f64)).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(KnowledgeError::NonFinite);
        }
        Ok(Self(values.into_iter().map(|v| (v as f64 / norm) as f32).collect()))
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| (*v as f64) * (*v as f64)).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Embedding) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| *a as f64 * *b as f64).sum()
    }
}

/// Cosine distance between unit vectors, clamped to `[0, 2]`.
pub fn cosine_distance(a: &Embedding, b: &Embedding) -> f64 {
    (1.0 - a.dot(b)).clamp(0.0, 2.0)
}

/// Sentence embedding provider.
pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<Embedding, KnowledgeError>;

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Embedding>, KnowledgeError> {
        texts.iter().map(|t| self.embed(t)).collect()
    }

    fn id(&self) -> &str;
}

/// Feature-hashed bag of case-folded alphanumeric tokens.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    dimension: usize,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self {
            dimension: HASHING_DIMENSION,
        }
    }
}

impl HashingEmbedder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_dimension(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self { dimension }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Case-folded runs of alphanumeric characters.
    pub fn tokens(text: &str) -> Vec<String> {
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty())
            .map(|t| t.to_lowercase())
            .collect()
    }

    pub fn bucket(&self, token: &str) -> usize {
        (fnv1a(token.as_bytes()) % self.dimension as u64) as usize
    }
}

impl Embedder for HashingEmbedder {
    fn embed(&self, text: &str) -> Result<Embedding, KnowledgeError> {
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return Err(KnowledgeError::EmptyText);
        }
        let mut tokens = Self::tokens(trimmed);
        if tokens.is_empty() {
            // Punctuation-only text still needs a direction.
            tokens.push(trimmed.to_string());
        }
        let mut values = vec![0f32; self.dimension];
        for token in &tokens {
            values[self.bucket(token)] += 1.0;
        }
        Embedding::from_raw(values)
    }

    fn id(&self) -> &str {
        "hashing-256"
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(PRIME))
}
