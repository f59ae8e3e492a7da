//! Chat-completion clients: an HTTP backend, an on-disk response cache and a
//! scripted client for offline use.

use std::collections::VecDeque;
use std::fs;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::User, content: content.into() }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage { role: Role::Assistant, content: content.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub top_p: f64,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams { temperature: 0.8, top_p: 0.95 }
    }
}

/// A chat-completion backend.
pub trait GenerationClient: Send + Sync {
    fn complete(&self, messages: &[ChatMessage], params: &SamplingParams) -> Result<String>;
}

fn check_messages(messages: &[ChatMessage]) -> Result<()> {
    if messages.is_empty() {
        return Err(Error::Client("empty conversation".into()));
    }
    if let Some(i) = messages.iter().position(|m| m.content.trim().is_empty()) {
        return Err(Error::Client(format!("message {i} has empty content")));
    }
    Ok(())
}

/// Settings for an OpenAI-style chat-completions endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpSettings {
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token.
    #[serde(default = "default_token_env")]
    pub token_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_token_env() -> String {
    "GENERATION_API_TOKEN".into()
}

fn default_timeout() -> u64 {
    60
}

pub struct HttpClient {
    settings: HttpSettings,
    agent: ureq::Agent,
}

impl HttpClient {
    pub fn new(settings: HttpSettings) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(settings.timeout_secs)))
            .build()
            .into();
        HttpClient { settings, agent }
    }
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
    top_p: f64,
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: String,
}

impl GenerationClient for HttpClient {
    fn complete(&self, messages: &[ChatMessage], params: &SamplingParams) -> Result<String> {
        check_messages(messages)?;
        let body = CompletionRequest {
            model: &self.settings.model,
            messages,
            temperature: params.temperature,
            top_p: params.top_p,
        };
        let mut req = self.agent.post(&self.settings.endpoint);
        if let Ok(token) = std::env::var(&self.settings.token_env) {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req.send_json(&body).map_err(|e| Error::Client(e.to_string()))?;
        let parsed: CompletionResponse = resp.body_mut().read_json().map_err(|e| Error::Client(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| Error::Client("response has no choices".into()))
    }
}

/// Caches completions on disk, keyed by a digest of the messages and params.
pub struct CachedClient<C> {
    inner: C,
    dir: PathBuf,
}

impl<C: GenerationClient> CachedClient<C> {
    pub fn new(inner: C, dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(CachedClient { inner, dir })
    }

    pub fn key(messages: &[ChatMessage], params: &SamplingParams) -> String {
        let payload = serde_json::to_vec(&(messages, params)).expect("messages serialize");
        hex::encode(&Sha256::digest(&payload)[..])
    }
}

impl<C: GenerationClient> GenerationClient for CachedClient<C> {
    fn complete(&self, messages: &[ChatMessage], params: &SamplingParams) -> Result<String> {
        let path = self.dir.join(format!("{}.txt", Self::key(messages, params)));
        if let Ok(hit) = fs::read_to_string(&path) {
            return Ok(hit);
        }
        let text = self.inner.complete(messages, params)?;
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, &text).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        Ok(text)
    }
}

/// Replays queued responses in order; errors once the queue is empty. Records
/// every conversation it receives.
#[derive(Default)]
pub struct ScriptedClient {
    responses: Mutex<VecDeque<Result<String, String>>>,
    seen: Mutex<Vec<Vec<ChatMessage>>>,
}

impl ScriptedClient {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedClient {
            responses: Mutex::new(responses.into_iter().map(|s| Ok(s.into())).collect()),
            seen: Mutex::new(Vec::new()),
        }
    }

    pub fn push_error(&self, msg: impl Into<String>) {
        self.responses.lock().unwrap().push_back(Err(msg.into()));
    }

    pub fn push(&self, text: impl Into<String>) {
        self.responses.lock().unwrap().push_back(Ok(text.into()));
    }

    pub fn conversations(&self) -> Vec<Vec<ChatMessage>> {
        self.seen.lock().unwrap().clone()
    }
}

impl GenerationClient for ScriptedClient {
    fn complete(&self, messages: &[ChatMessage], _params: &SamplingParams) -> Result<String> {
        check_messages(messages)?;
        self.seen.lock().unwrap().push(messages.to_vec());
        match self.responses.lock().unwrap().pop_front() {
            Some(Ok(text)) => Ok(text),
            Some(Err(e)) => Err(Error::Client(e)),
            None => Err(Error::Client("scripted client exhausted".into())),
        }
    }
}

/// Always fails; stands in for an unreachable backend.
pub struct UnavailableClient;

impl GenerationClient for UnavailableClient {
    fn complete(&self, _messages: &[ChatMessage], _params: &SamplingParams) -> Result<String> {
        Err(Error::Client("no generation backend configured".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_client_replays_in_order() {
        let c = ScriptedClient::new(["a", "b"]);
        let m = [ChatMessage::user("hi")];
        let p = SamplingParams::default();
        assert_eq!(c.complete(&m, &p).unwrap(), "a");
        assert_eq!(c.complete(&m, &p).unwrap(), "b");
        assert!(c.complete(&m, &p).is_err());
        assert_eq!(c.conversations().len(), 3);
    }

    #[test]
    fn empty_message_is_rejected() {
        let c = ScriptedClient::new(["a"]);
        assert!(c.complete(&[ChatMessage::user("  ")], &SamplingParams::default()).is_err());
    }

    #[test]
    fn cache_serves_second_call_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let cached = CachedClient::new(ScriptedClient::new(["first"]), dir.path()).unwrap();
        let m = [ChatMessage::user("hello")];
        let p = SamplingParams::default();
        assert_eq!(cached.complete(&m, &p).unwrap(), "first");
        assert_eq!(cached.complete(&m, &p).unwrap(), "first");
        let other = SamplingParams { temperature: 0.1, top_p: 0.5 };
        assert!(cached.complete(&m, &other).is_err());
    }

    #[test]
    fn cache_key_depends_on_params() {
        let m = [ChatMessage::user("x")];
        let a = CachedClient::<ScriptedClient>::key(&m, &SamplingParams::default());
        let b = CachedClient::<ScriptedClient>::key(&m, &SamplingParams { temperature: 0.0, top_p: 1.0 });
        assert_ne!(a, b);
        assert_eq!(a.len(), 64);
    }
}
