//! The single chat-completion boundary used by every model-backed step.
//!
//! All requests go through [`AgentGateway::complete`], which enforces the
//! execution protocol (temperature 0, non-empty user text) and appends a
//! [`Transcript`] for every exchange. Backends are pluggable: a live HTTP
//! provider, a read-only replay store for deterministic offline runs, or a
//! scripted closure for tests and fixture generation.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Environment variable naming the live chat-completion endpoint.
pub const ENV_LLM_URL: &str = "ALIGN_LLM_URL";
/// Environment variable holding the live endpoint's API key.
pub const ENV_LLM_KEY: &str = "ALIGN_LLM_KEY";

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("pipeline requests must use temperature 0, got {0}")]
    NonZeroTemperature(f64),
    #[error("request user_text must be non-empty")]
    EmptyRequest,
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("replay store has no entry for request digest {0}")]
    ReplayMiss(String),
    #[error("template {template}: placeholder {{{{{name}}}}} has no binding")]
    UnboundPlaceholder { template: String, name: String },
    #[error("two transcripts share digest {0} but carry different responses")]
    Conflict(String),
    #[error("backend returned an empty response")]
    EmptyResponse,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("replay store is not valid JSON: {0}")]
    Store(#[from] serde_json::Error),
}

/// One chat-completion request. Pipeline constructors always fix the
/// temperature at 0; the field stays public so tests can probe the
/// gateway's rejection path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRequest {
    pub model_id: String,
    pub temperature: f64,
    pub system_text: String,
    pub user_text: String,
}

impl AgentRequest {
    pub fn new(
        model_id: impl Into<String>,
        system_text: impl Into<String>,
        user_text: impl Into<String>,
    ) -> Self {
        AgentRequest {
            model_id: model_id.into(),
            temperature: 0.0,
            system_text: system_text.into(),
            user_text: user_text.into(),
        }
    }

    /// Stable content hash over (model_id, temperature, system_text,
    /// user_text). Each field is length-prefixed so that concatenation
    /// ambiguities cannot collide. Timestamps are deliberately excluded.
    pub fn digest(&self) -> String {
        let temperature = format!("{}", self.temperature);
        let mut hasher = Sha256::new();
        for field in [
            self.model_id.as_str(),
            temperature.as_str(),
            self.system_text.as_str(),
            self.user_text.as_str(),
        ] {
            hasher.update((field.len() as u64).to_le_bytes());
            hasher.update(field.as_bytes());
        }
        hex::encode(hasher.finalize())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentResponse {
    pub text: String,
    pub model_id: String,
}

/// One completed request/response exchange.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Transcript {
    pub request: AgentRequest,
    pub response: AgentResponse,
    pub timestamp: DateTime<Utc>,
    pub request_digest: String,
}

/// A named prompt body with `{{var}}` placeholders.
#[derive(Debug, Clone)]
pub struct PromptTemplate {
    pub name: String,
    pub body: String,
}

/// Rendering output: the final text plus any bindings the template never
/// used (a warning, not an error).
#[derive(Debug, Clone)]
pub struct RenderedPrompt {
    pub text: String,
    pub unused_bindings: Vec<String>,
}

impl PromptTemplate {
    pub fn new(name: impl Into<String>, body: impl Into<String>) -> Self {
        PromptTemplate {
            name: name.into(),
            body: body.into(),
        }
    }

    /// Substitute every `{{var}}` occurrence exactly once. Fails if any
    /// placeholder has no binding.
    pub fn render(
        &self,
        bindings: &BTreeMap<String, String>,
    ) -> Result<RenderedPrompt, GatewayError> {
        let pattern = placeholder_regex();
        let mut missing: Option<String> = None;
        let mut used = std::collections::BTreeSet::new();
        let text = pattern
            .replace_all(&self.body, |caps: &regex::Captures<'_>| {
                let name = caps.get(1).unwrap().as_str();
                used.insert(name.to_string());
                match bindings.get(name) {
                    Some(value) => value.clone(),
                    None => {
                        if missing.is_none() {
                            missing = Some(name.to_string());
                        }
                        String::new()
                    }
                }
            })
            .into_owned();

        if let Some(name) = missing {
            return Err(GatewayError::UnboundPlaceholder {
                template: self.name.clone(),
                name,
            });
        }
        let unused_bindings = bindings
            .keys()
            .filter(|k| !used.contains(*k))
            .cloned()
            .collect();
        Ok(RenderedPrompt {
            text,
            unused_bindings,
        })
    }
}

fn placeholder_regex() -> &'static Regex {
    use std::sync::OnceLock;
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{\{([A-Za-z0-9_]+)\}\}").unwrap())
}

/// A chat-completion provider. Implementations must be safe for concurrent
/// calls.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &AgentRequest) -> Result<String, GatewayError>;
    fn name(&self) -> &'static str;
}

/// Stored response for one request digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub text: String,
    pub model_id: String,
}

/// Read-only store mapping request digests to recorded responses.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ReplayStore {
    pub entries: BTreeMap<String, ReplayEntry>,
}

impl ReplayStore {
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let raw = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&raw)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), GatewayError> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json + "\n")?;
        Ok(())
    }
}

impl ChatBackend for ReplayStore {
    fn complete(&self, request: &AgentRequest) -> Result<String, GatewayError> {
        let digest = request.digest();
        self.entries
            .get(&digest)
            .map(|e| e.text.clone())
            .ok_or(GatewayError::ReplayMiss(digest))
    }

    fn name(&self) -> &'static str {
        "replay"
    }
}

/// Deterministic closure backend for tests and fixture generation.
pub struct ScriptedChat<F>(pub F);

impl<F> ChatBackend for ScriptedChat<F>
where
    F: Fn(&AgentRequest) -> Result<String, GatewayError> + Send + Sync,
{
    fn complete(&self, request: &AgentRequest) -> Result<String, GatewayError> {
        (self.0)(request)
    }

    fn name(&self) -> &'static str {
        "scripted"
    }
}

/// Live HTTP adapter speaking a minimal chat-completion contract: one
/// system message, one user message, one text reply. The endpoint comes
/// from `ALIGN_LLM_URL` and the key from `ALIGN_LLM_KEY`.
pub struct LiveChat {
    base_url: String,
    api_key: String,
    client: reqwest::blocking::Client,
}

impl LiveChat {
    pub fn from_env() -> Result<Self, GatewayError> {
        let base_url = std::env::var(ENV_LLM_URL)
            .map_err(|_| GatewayError::BackendUnavailable(format!("{ENV_LLM_URL} not set")))?;
        let api_key = std::env::var(ENV_LLM_KEY)
            .map_err(|_| GatewayError::BackendUnavailable(format!("{ENV_LLM_KEY} not set")))?;
        Ok(LiveChat {
            base_url,
            api_key,
            client: reqwest::blocking::Client::new(),
        })
    }

    fn request_body(request: &AgentRequest) -> serde_json::Value {
        serde_json::json!({
            "model": request.model_id,
            "temperature": request.temperature,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": request.user_text},
            ],
        })
    }

    /// Accepts either an OpenAI-style `choices[0].message.content` shape or
    /// a bare `{"text": ...}` reply.
    fn extract_text(body: &serde_json::Value) -> Option<String> {
        if let Some(text) = body
            .get("choices")
            .and_then(|c| c.get(0))
            .and_then(|c| c.get("message"))
            .and_then(|m| m.get("content"))
            .and_then(|t| t.as_str())
        {
            return Some(text.to_string());
        }
        body.get("text").and_then(|t| t.as_str()).map(String::from)
    }
}

impl ChatBackend for LiveChat {
    fn complete(&self, request: &AgentRequest) -> Result<String, GatewayError> {
        let response = self
            .client
            .post(&self.base_url)
            .bearer_auth(&self.api_key)
            .json(&Self::request_body(request))
            .send()
            .map_err(|e| GatewayError::BackendUnavailable(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            return Err(GatewayError::BackendUnavailable(format!(
                "provider returned HTTP {status}"
            )));
        }
        let body: serde_json::Value = response
            .json()
            .map_err(|e| GatewayError::BackendUnavailable(e.to_string()))?;
        Self::extract_text(&body).ok_or_else(|| {
            GatewayError::BackendUnavailable("provider reply carried no text".to_string())
        })
    }

    fn name(&self) -> &'static str {
        "live"
    }
}

/// The gateway every model-backed stage talks to. Protocol checks happen
/// here, in exactly one place; transcript appends are serialized.
pub struct AgentGateway {
    backend: Box<dyn ChatBackend>,
    transcripts: Mutex<Vec<Transcript>>,
}

impl AgentGateway {
    pub fn new(backend: Box<dyn ChatBackend>) -> Self {
        AgentGateway {
            backend,
            transcripts: Mutex::new(Vec::new()),
        }
    }

    pub fn backend_name(&self) -> &'static str {
        self.backend.name()
    }

    pub fn complete(&self, request: &AgentRequest) -> Result<AgentResponse, GatewayError> {
        if request.temperature != 0.0 {
            return Err(GatewayError::NonZeroTemperature(request.temperature));
        }
        if request.user_text.is_empty() {
            return Err(GatewayError::EmptyRequest);
        }
        let text = self.backend.complete(request)?;
        if text.is_empty() {
            return Err(GatewayError::EmptyResponse);
        }
        let response = AgentResponse {
            text,
            model_id: request.model_id.clone(),
        };
        let transcript = Transcript {
            request_digest: request.digest(),
            request: request.clone(),
            response: response.clone(),
            timestamp: Utc::now(),
        };
        self.transcripts
            .lock()
            .expect("transcript log poisoned")
            .push(transcript);
        Ok(response)
    }

    pub fn transcripts(&self) -> Vec<Transcript> {
        self.transcripts
            .lock()
            .expect("transcript log poisoned")
            .clone()
    }
}

/// Build a replay store from a completed run's transcripts and write it to
/// `sink`. Equal digests with equal responses deduplicate; equal digests
/// with different responses are a determinism violation.
pub fn record_session(transcripts: &[Transcript], sink: &Path) -> Result<ReplayStore, GatewayError> {
    let store = store_from_transcripts(transcripts)?;
    store.save(sink)?;
    Ok(store)
}

pub fn store_from_transcripts(transcripts: &[Transcript]) -> Result<ReplayStore, GatewayError> {
    let mut entries: BTreeMap<String, ReplayEntry> = BTreeMap::new();
    for t in transcripts {
        let entry = ReplayEntry {
            text: t.response.text.clone(),
            model_id: t.response.model_id.clone(),
        };
        match entries.get(&t.request_digest) {
            Some(existing) if existing.text != entry.text => {
                return Err(GatewayError::Conflict(t.request_digest.clone()));
            }
            _ => {
                entries.insert(t.request_digest.clone(), entry);
            }
        }
    }
    Ok(ReplayStore { entries })
}
