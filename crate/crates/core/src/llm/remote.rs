use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{GenerationRequest, Generator, LlmError};
use crate::http::JsonClient;

/// Body posted to a remote generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub model: String,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub stop: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireResponse {
    pub text: String,
}

/// One line of a replay log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub request: WireRequest,
    pub response: WireResponse,
}

/// Append-only JSON-lines log of remote traffic.
pub struct ReplayLog {
    file: Mutex<File>,
}

impl ReplayLog {
    pub fn append_to(path: &Path) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { file: Mutex::new(file) })
    }

    pub fn record(&self, record: &ReplayRecord) -> std::io::Result<()> {
        let mut line = serde_json::to_string(record).map_err(std::io::Error::other)?;
        line.push('\n');
        let mut file = self.file.lock().unwrap_or_else(|e| e.into_inner());
        file.write_all(line.as_bytes())?;
        file.flush()
    }
}

/// Generator served over HTTP. Temperature is always sent as 0.
pub struct RemoteGenerator {
    client: JsonClient,
    model: String,
    id: String,
    log: Option<ReplayLog>,
}

impl RemoteGenerator {
    pub fn new(url: &str, model: &str, api_key: Option<String>) -> Self {
        Self {
            client: JsonClient::new(url, api_key, Duration::from_secs(120)),
            model: model.to_string(),
            id: format!("remote:{model}"),
            log: None,
        }
    }

    pub fn with_log(mut self, log: ReplayLog) -> Self {
        self.log = Some(log);
        self
    }

    #[cfg(test)]
    fn with_fast_backoff(mut self) -> Self {
        self.client = self.client.with_backoff(Duration::from_millis(1));
        self
    }

    pub fn wire_request(&self, request: &GenerationRequest) -> WireRequest {
        wire(&self.model, request)
    }
}

fn wire(model: &str, request: &GenerationRequest) -> WireRequest {
    WireRequest {
        model: model.to_string(),
        prompt: request.prompt.clone(),
        temperature: 0.0,
        max_tokens: request.max_tokens,
        stop: request.stop_sequences.clone(),
    }
}

impl Generator for RemoteGenerator {
    fn complete(&self, request: &GenerationRequest) -> Result<String, LlmError> {
        let body = self.wire_request(request);
        let response: WireResponse = self.client.post(&body).map_err(|f| LlmError::Backend {
            backend: self.id.clone(),
            message: f.message,
            retryable: f.retryable,
        })?;
        if let Some(log) = &self.log {
            let record = ReplayRecord {
                request: body,
                response: response.clone(),
            };
            if let Err(e) = log.record(&record) {
                tracing::warn!(error = %e, "failed to append to replay log");
            }
        }
        Ok(response.text)
    }

    fn id(&self) -> &str {
        &self.id
    }
}

/// Serves responses recorded in a replay log.
pub struct ReplayGenerator {
    model: String,
    responses: HashMap<String, String>,
    id: String,
}

impl ReplayGenerator {
    pub fn from_file(path: &Path, model: &str) -> std::io::Result<Self> {
        let reader = BufReader::new(File::open(path)?);
        let mut responses = HashMap::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: ReplayRecord = serde_json::from_str(&line).map_err(|e| {
                std::io::Error::new(
                    std::io::ErrorKind::InvalidData,
                    format!("{}:{}: {e}", path.display(), lineno + 1),
                )
            })?;
            responses.insert(key(&record.request), record.response.text);
        }
        Ok(Self {
            model: model.to_string(),
            responses,
            id: format!("replay:{model}"),
        })
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

fn key(request: &WireRequest) -> String {
    serde_json::to_string(request).expect("wire requests serialize")
}

impl Generator for ReplayGenerator {
    fn complete(&self, request: &GenerationRequest) -> Result<String, LlmError> {
        self.responses
            .get(&key(&wire(&self.model, request)))
            .cloned()
            .ok_or_else(|| LlmError::Backend {
                backend: self.id.clone(),
                message: "no recorded response for request".into(),
                retryable: false,
            })
    }

    fn id(&self) -> &str {
        &self.id
    }
}
