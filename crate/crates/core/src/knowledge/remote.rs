use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Embedder, Embedding, KnowledgeError};
use crate::http::JsonClient;

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f32>>,
}

/// Embedding provider behind an HTTP endpoint.
///
/// Request `{"texts": [..]}`, response `{"vectors": [[..]]}`. Vectors are
/// re-normalized on receipt.
pub struct RemoteEmbedder {
    client: JsonClient,
    id: String,
}

impl RemoteEmbedder {
    pub fn new(url: &str, api_key: Option<String>) -> Self {
        Self {
            client: JsonClient::new(url, api_key, Duration::from_secs(60)),
            id: format!("remote:{url}"),
        }
    }

    fn failure(&self, message: String, retryable: bool) -> KnowledgeError {
        KnowledgeError::Provider {
            provider: self.client.url().to_string(),
            message,
            retryable,
        }
    }
}

impl Embedder for RemoteEmbedder {
    fn embed(&self, text: &str) -> Result<Embedding, KnowledgeError> {
        let mut out = self.embed_batch(&[text])?;
        Ok(out.remove(0))
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<Embedding>, KnowledgeError> {
        if texts.iter().any(|t| t.trim().is_empty()) {
            return Err(KnowledgeError::EmptyText);
        }
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let resp: EmbedResponse = self
            .client
            .post(&EmbedRequest { texts })
            .map_err(|f| self.failure(f.message, f.retryable))?;
        if resp.vectors.len() != texts.len() {
            return Err(self.failure(
                format!("expected {} vectors, got {}", texts.len(), resp.vectors.len()),
                false,
            ));
        }
        let dimension = resp.vectors.first().map_or(0, Vec::len);
        resp.vectors
            .into_iter()
            .map(|v| {
                if v.len() != dimension {
                    return Err(KnowledgeError::DimensionMismatch {
                        expected: dimension,
                        got: v.len(),
                    });
                }
                Embedding::from_raw(v)
            })
            .collect()
    }

    fn id(&self) -> &str {
        &self.id
    }
}
