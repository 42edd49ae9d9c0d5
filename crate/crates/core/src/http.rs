//! Minimal JSON-over-HTTP client shared by the remote providers.

use std::thread;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

/// Transport retries after the first attempt.
pub(crate) const RETRIES: u32 = 2;
const BASE_BACKOFF: Duration = Duration::from_millis(200);

#[derive(Debug)]
pub(crate) struct HttpFailure {
    pub message: String,
    /// Transport errors and 5xx/429 responses are retryable.
    pub retryable: bool,
}

pub(crate) struct JsonClient {
    agent: ureq::Agent,
    url: String,
    api_key: Option<String>,
    backoff: Duration,
}

impl JsonClient {
    pub(crate) fn new(url: &str, api_key: Option<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            agent,
            url: url.to_string(),
            api_key,
            backoff: BASE_BACKOFF,
        }
    }

    #[cfg(test)]
    pub(crate) fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    pub(crate) fn url(&self) -> &str {
        &self.url
    }

    /// POSTs `body`, retrying retryable failures with exponential backoff.
    pub(crate) fn post<Req: Serialize, Resp: DeserializeOwned>(&self, body: &Req) -> Result<Resp, HttpFailure> {
        let mut attempt = 0;
        loop {
            match self.post_once(body) {
                Ok(resp) => return Ok(resp),
                Err(err) if err.retryable && attempt < RETRIES => {
                    tracing::debug!(url = %self.url, attempt, error = %err.message, "retrying request");
                    thread::sleep(self.backoff * 2u32.pow(attempt));
                    attempt += 1;
                }
                Err(err) => return Err(err),
            }
        }
    }

    fn post_once<Req: Serialize, Resp: DeserializeOwned>(&self, body: &Req) -> Result<Resp, HttpFailure> {
        let mut request = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request.send_json(body).map_err(|e| HttpFailure {
            message: e.to_string(),
            retryable: true,
        })?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            let text = response.body_mut().read_to_string().unwrap_or_default();
            return Err(HttpFailure {
                message: format!("HTTP {status}: {}", text.chars().take(200).collect::<String>()),
                retryable: status >= 500 || status == 429,
            });
        }
        response.body_mut().read_json::<Resp>().map_err(|e| HttpFailure {
            message: format!("invalid response body: {e}"),
            retryable: false,
        })
    }
}
