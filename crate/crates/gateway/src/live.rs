//! Network adapters: an OpenAI-style completions endpoint and plain HTTP
//! asset downloads. Both are blocking and only ever run on worker threads.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use holoforge_core::assets::{AssetRecord, FetchOutcome, Fetcher};
use holoforge_core::resolver::{CompletionClient, CompletionRequest, Provenance, ResolverError};
use serde::{Deserialize, Serialize};

use crate::config::LlmConfig;
use crate::error::GatewayError;

#[derive(Serialize)]
struct Body<'a> {
    model: &'a str,
    prompt: &'a str,
    temperature: f64,
    frequency_penalty: f64,
    max_tokens: u32,
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    stop: &'a [String],
}

#[derive(Deserialize)]
struct Choice {
    text: String,
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
}

// built lazily: a blocking client must not be created on an async thread
fn http(slot: &OnceLock<reqwest::blocking::Client>, timeout: Option<Duration>) -> &reqwest::blocking::Client {
    slot.get_or_init(|| {
        let mut b = reqwest::blocking::Client::builder();
        if let Some(t) = timeout {
            b = b.timeout(t);
        }
        b.build().expect("http client")
    })
}

pub struct OpenAiClient {
    url: String,
    key: String,
    timeout: Duration,
    http: OnceLock<reqwest::blocking::Client>,
}

impl OpenAiClient {
    pub fn from_config(c: &LlmConfig) -> Result<Self, GatewayError> {
        let key = std::env::var(&c.api_key_env).map_err(|_| GatewayError::Setup(format!("{} is not set", c.api_key_env)))?;
        Ok(Self {
            url: format!("{}/completions", c.api_base.trim_end_matches('/')),
            key,
            timeout: Duration::from_millis(c.timeout_ms),
            http: OnceLock::new(),
        })
    }
}

impl CompletionClient for OpenAiClient {
    fn complete(&self, r: &CompletionRequest) -> Result<String, ResolverError> {
        let body = Body {
            model: &r.model,
            prompt: &r.prompt,
            temperature: r.temperature,
            frequency_penalty: r.frequency_penalty,
            max_tokens: r.max_tokens,
            stop: &r.stop,
        };
        let resp = http(&self.http, Some(self.timeout))
            .post(&self.url)
            .bearer_auth(&self.key)
            .json(&body)
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    ResolverError::ClientTimeout
                } else {
                    ResolverError::ClientError(e.to_string())
                }
            })?;
        let status = resp.status();
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(ResolverError::ClientError(format!(
                "{status}: {}",
                text.chars().take(200).collect::<String>()
            )));
        }
        let c: Completion = resp.json().map_err(|e| ResolverError::ClientError(e.to_string()))?;
        c.choices
            .into_iter()
            .next()
            .map(|c| c.text)
            .ok_or_else(|| ResolverError::ClientError("no choices in the response".into()))
    }

    fn provenance(&self) -> Provenance {
        Provenance::Live
    }
}

/// GETs the record's download URL within the deadline.
#[derive(Default)]
pub struct HttpFetcher {
    http: OnceLock<reqwest::blocking::Client>,
}

impl Fetcher for HttpFetcher {
    fn fetch(&self, record: &AssetRecord, deadline: Duration) -> FetchOutcome {
        let start = Instant::now();
        let result = http(&self.http, None)
            .get(&record.download_url)
            .timeout(deadline)
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.bytes());
        match result {
            Ok(_) => FetchOutcome::Completed {
                latency: start.elapsed(),
            },
            Err(e) if e.is_timeout() => FetchOutcome::TimedOut { waited: deadline },
            Err(e) => FetchOutcome::Failed { reason: e.to_string() },
        }
    }
}
