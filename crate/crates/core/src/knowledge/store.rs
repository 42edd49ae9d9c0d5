use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use super::{cosine_distance, EditedFact, Embedder, Embedding, KnowledgeError, Triple};

struct StoredFact {
    fact: EditedFact,
    embedding: Embedding,
}

/// Immutable collection of embedded edited facts.
///
/// Cloning is cheap; clones share the facts and the embedding provider.
#[derive(Clone)]
pub struct KnowledgeStore {
    inner: Arc<Inner>,
}

struct Inner {
    facts: Vec<StoredFact>,
    dimension: usize,
    embedder: Arc<dyn Embedder>,
    by_key: HashMap<(String, String), Vec<usize>>,
}

/// One retrieval hit.
#[derive(Debug, Clone, Copy)]
pub struct Retrieved<'a> {
    pub index: usize,
    pub fact: &'a EditedFact,
    pub distance: f64,
}

impl fmt::Debug for KnowledgeStore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KnowledgeStore")
            .field("facts", &self.inner.facts.len())
            .field("dimension", &self.inner.dimension)
            .field("embedder", &self.inner.embedder.id())
            .finish()
    }
}

impl KnowledgeStore {
    /// Embeds every fact. Two edits of the same `(subject, relation)` from
    /// one source instance are rejected; across instances they are kept.
    pub fn build(facts: Vec<EditedFact>, embedder: Arc<dyn Embedder>) -> Result<Self, KnowledgeError> {
        let mut seen: HashMap<(String, (String, String)), usize> = HashMap::new();
        for (i, fact) in facts.iter().enumerate() {
            let key = (fact.source_instance.clone(), fact.triple.key());
            if seen.insert(key, i).is_some() {
                return Err(KnowledgeError::DuplicateEdit {
                    instance: fact.source_instance.clone(),
                    subject: fact.triple.subject.clone(),
                    relation: fact.triple.relation.clone(),
                });
            }
        }

        let texts: Vec<&str> = facts.iter().map(|f| f.text.as_str()).collect();
        let embeddings = if texts.is_empty() {
            Vec::new()
        } else {
            embedder.embed_batch(&texts)?
        };
        let dimension = embeddings.first().map_or(0, Embedding::dimension);
        if let Some(bad) = embeddings.iter().find(|e| e.dimension() != dimension) {
            return Err(KnowledgeError::DimensionMismatch {
                expected: dimension,
                got: bad.dimension(),
            });
        }

        let mut by_key: HashMap<(String, String), Vec<usize>> = HashMap::new();
        for (i, fact) in facts.iter().enumerate() {
            by_key.entry(fact.triple.key()).or_default().push(i);
        }
        let facts = facts
            .into_iter()
            .zip(embeddings)
            .map(|(fact, embedding)| StoredFact { fact, embedding })
            .collect();
        Ok(Self {
            inner: Arc::new(Inner {
                facts,
                dimension,
                embedder,
                by_key,
            }),
        })
    }

    pub fn empty(embedder: Arc<dyn Embedder>) -> Self {
        Self::build(Vec::new(), embedder).expect("empty store never fails")
    }

    pub fn len(&self) -> usize {
        self.inner.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inner.facts.is_empty()
    }

    /// Embedding dimension; 0 for an empty store.
    pub fn dimension(&self) -> usize {
        self.inner.dimension
    }

    pub fn embedder(&self) -> &Arc<dyn Embedder> {
        &self.inner.embedder
    }

    pub fn fact(&self, index: usize) -> &EditedFact {
        &self.inner.facts[index].fact
    }

    pub fn embedding(&self, index: usize) -> &Embedding {
        &self.inner.facts[index].embedding
    }

    pub fn facts(&self) -> impl ExactSizeIterator<Item = &EditedFact> {
        self.inner.facts.iter().map(|s| &s.fact)
    }

    /// Edited facts sharing `triple`'s subject and relation but naming a
    /// different object.
    pub fn conflicts_with<'a>(&'a self, triple: &'a Triple) -> impl Iterator<Item = &'a EditedFact> + 'a {
        let object = triple.normalized_object();
        self.inner
            .by_key
            .get(&triple.key())
            .into_iter()
            .flatten()
            .map(|i| &self.inner.facts[*i].fact)
            .filter(move |f| f.triple.normalized_object() != object)
    }

    /// The `n` facts closest to `query` by cosine distance, ascending; ties
    /// broken by fact text.
    pub fn retrieve_top_n(&self, query: &str, n: usize) -> Result<Vec<Retrieved<'_>>, KnowledgeError> {
        if self.is_empty() || n == 0 {
            return Ok(Vec::new());
        }
        let q = self.inner.embedder.embed(query)?;
        if q.dimension() != self.inner.dimension {
            return Err(KnowledgeError::DimensionMismatch {
                expected: self.inner.dimension,
                got: q.dimension(),
            });
        }
        Ok(self.rank_against(&q, n))
    }

    pub fn rank_against(&self, query: &Embedding, n: usize) -> Vec<Retrieved<'_>> {
        let mut hits: Vec<Retrieved<'_>> = self
            .inner
            .facts
            .iter()
            .enumerate()
            .map(|(index, s)| Retrieved {
                index,
                fact: &s.fact,
                distance: cosine_distance(query, &s.embedding),
            })
            .collect();
        let k = n.min(hits.len());
        let order = |a: &Retrieved<'_>, b: &Retrieved<'_>| {
            a.distance
                .total_cmp(&b.distance)
                .then_with(|| a.fact.text.cmp(&b.fact.text))
                .then_with(|| a.index.cmp(&b.index))
        };
        if k < hits.len() {
            hits.select_nth_unstable_by(k, order);
            hits.truncate(k);
        }
        hits.sort_by(order);
        hits
    }
}
