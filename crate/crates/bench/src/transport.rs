//! Chat transports and the self-consistency sampling loop.
//!
//! Prompts are content-addressed: the digest is the sha256 of the exact
//! prompt bytes sent to the model. A replay archive answers by digest and
//! sample index; a missing entry is fatal.

use std::sync::Arc;
use std::time::{Duration, Instant};

use aisbench_core::prompt::{Prompt, PromptData};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::archive::{Archive, TransportRecord};
use crate::error::{BenchError, Result};
use crate::scripted::ScriptCase;

pub fn text_digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Hash state after the preamble and data blocks of a method's prompts, so
/// each question only hashes its own tail.
#[derive(Clone)]
pub struct PrefixDigest(Sha256);

impl PrefixDigest {
    pub fn new(data: &PromptData) -> Self {
        let mut h = Sha256::new();
        h.update(aisbench_core::prompt::PREAMBLE.as_bytes());
        h.update(b"\n\n");
        for b in &data.blocks {
            h.update(b"### ");
            h.update(b.label.as_bytes());
            h.update(b"\n");
            h.update(b.text.as_bytes());
            h.update(b"\n");
        }
        Self(h)
    }

    /// Digest of a prompt whose blocks are the ones this prefix was built from.
    pub fn finish(&self, prompt: &Prompt) -> String {
        let mut h = self.0.clone();
        h.update(b"Question: ");
        h.update(prompt.question.as_bytes());
        h.update(b"\n");
        h.update(prompt.instruction.as_bytes());
        h.update(b"\n");
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, Copy)]
pub enum PromptBody<'a> {
    Zsa(&'a Prompt),
    Text(&'a str),
}

impl PromptBody<'_> {
    pub fn render(&self) -> String {
        match self {
            PromptBody::Zsa(p) => p.render(),
            PromptBody::Text(t) => (*t).to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ChatRequest<'a> {
    pub body: PromptBody<'a>,
    pub digest: &'a str,
    pub sample_index: u32,
    pub temperature: f64,
    /// Ground truth and stage for the scripted model; other transports
    /// never read it.
    pub case: Option<&'a ScriptCase>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("transient: {0}")]
    Transient(String),
    #[error("{0}")]
    Fatal(String),
    /// Replay archive has no entry for the request.
    #[error("replay archive has no response for prompt {digest} sample {index}")]
    Missing { digest: String, index: u32 },
}

pub trait Transport: Send + Sync {
    fn complete(&self, req: &ChatRequest<'_>) -> Result<String, TransportError>;
    fn model_id(&self) -> &str;
    /// Whether successful exchanges go into the archive.
    fn records(&self) -> bool;
}

pub struct ReplayTransport {
    archive: Arc<Archive>,
    model: String,
}

impl ReplayTransport {
    pub fn new(archive: Arc<Archive>, model: impl Into<String>) -> Self {
        Self { archive, model: model.into() }
    }
}

impl Transport for ReplayTransport {
    fn complete(&self, req: &ChatRequest<'_>) -> Result<String, TransportError> {
        self.archive
            .get(req.digest, req.sample_index)
            .map(|r| r.response_text)
            .ok_or_else(|| TransportError::Missing { digest: req.digest.to_string(), index: req.sample_index })
    }

    fn model_id(&self) -> &str {
        &self.model
    }

    fn records(&self) -> bool {
        false
    }
}

/// One JSON POST. Returns the status code and body, or a connection-level
/// error message.
pub trait HttpPost: Send + Sync {
    fn post_json(&self, url: &str, bearer: &str, body: &serde_json::Value, timeout: Duration)
        -> Result<(u16, String), String>;
}

pub struct ReqwestPost {
    client: reqwest::blocking::Client,
}

impl ReqwestPost {
    pub fn new() -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| BenchError::Transport(format!("http client: {e}")))?;
        Ok(Self { client })
    }
}

impl HttpPost for ReqwestPost {
    fn post_json(&self, url: &str, bearer: &str, body: &serde_json::Value, timeout: Duration) -> Result<(u16, String), String> {
        let resp =
            self.client.post(url).bearer_auth(bearer).timeout(timeout).json(body).send().map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        resp.text().map(|t| (status, t)).map_err(|e| e.to_string())
    }
}

/// OpenAI-compatible chat-completions endpoint.
pub struct LiveTransport<H> {
    http: H,
    endpoint: String,
    credential: String,
    model: String,
    timeout: Duration,
}

impl<H: HttpPost> LiveTransport<H> {
    pub fn new(http: H, endpoint: String, credential: String, model: String, timeout: Duration) -> Self {
        Self { http, endpoint, credential, model, timeout }
    }
}

impl<H: HttpPost> Transport for LiveTransport<H> {
    fn complete(&self, req: &ChatRequest<'_>) -> Result<String, TransportError> {
        let body = json!({
            "model": self.model,
            "temperature": req.temperature,
            "messages": [{"role": "user", "content": req.body.render()}],
        });
        let (status, text) =
            self.http.post_json(&self.endpoint, &self.credential, &body, self.timeout).map_err(TransportError::Transient)?;
        match status {
            200..=299 => {}
            408 | 429 | 500..=599 => return Err(TransportError::Transient(format!("HTTP {status}"))),
            _ => return Err(TransportError::Fatal(format!("HTTP {status}: {}", text.chars().take(200).collect::<String>()))),
        }
        let v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| TransportError::Fatal(format!("malformed response: {e}")))?;
        v.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| TransportError::Fatal("response has no choices[0].message.content".into()))
    }

    fn model_id(&self) -> &str {
        &self.model
    }

    fn records(&self) -> bool {
        true
    }
}

/// Outcome of one self-consistency sample after retries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleResult {
    pub index: u32,
    pub text: Result<String, String>,
    pub attempts: u32,
}

/// One request with up to `retry_budget` attempts on transient failures.
/// Returns the text or the final error message, and the attempts used. A
/// missing replay entry aborts the run.
pub fn request(
    transport: &dyn Transport,
    archive: Option<&Archive>,
    req: &ChatRequest<'_>,
    retry_budget: u32,
) -> Result<(Result<String, String>, u32)> {
    let mut attempts = 0;
    loop {
        attempts += 1;
        let started = Instant::now();
        match transport.complete(req) {
            Ok(text) => {
                if let Some(a) = archive.filter(|_| transport.records()) {
                    a.record(TransportRecord {
                        prompt_digest: req.digest.to_string(),
                        sample_index: req.sample_index,
                        response_text: text.clone(),
                        latency_ms: if req.case.is_some() { 0 } else { started.elapsed().as_millis() as u64 },
                        model_id: transport.model_id().to_string(),
                    })?;
                }
                return Ok((Ok(text), attempts));
            }
            Err(e @ TransportError::Missing { .. }) => return Err(BenchError::Transport(e.to_string())),
            Err(TransportError::Transient(msg)) if attempts < retry_budget => {
                log::debug!("{} #{} attempt {attempts} failed: {msg}; retrying", req.digest, req.sample_index);
            }
            Err(e) => return Ok((Err(e.to_string()), attempts)),
        }
    }
}

/// Requests `samples` responses for one prompt, sample indices 0..samples.
pub fn sample(
    transport: &dyn Transport,
    archive: Option<&Archive>,
    base: ChatRequest<'_>,
    samples: u32,
    retry_budget: u32,
) -> Result<Vec<SampleResult>> {
    (0..samples)
        .map(|index| {
            let req = ChatRequest { sample_index: index, ..base };
            request(transport, archive, &req, retry_budget).map(|(text, attempts)| SampleResult { index, text, attempts })
        })
        .collect()
}
