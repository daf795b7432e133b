//! Text-completion client port with offline-first implementations.
//!
//! `MockClient` serves scripted responses, `ReplayClient` replays a
//! recorded cassette in sequence, `RecordingClient` wraps another client
//! and appends every interaction to a cassette on disk, and `HttpClient`
//! talks to an environment-configured endpoint. No test requires the
//! remote client.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("cassette exhausted after {served} interactions")]
    CassetteExhausted { served: usize },
    #[error("mock client has no more scripted responses")]
    MockExhausted,
    #[error("missing configuration: {0}")]
    MissingConfig(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed cassette: {0}")]
    Cassette(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub max_tokens: u32,
    pub temperature: f64,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            max_tokens: 2048,
            temperature: 0.0,
        }
    }
}

/// One operation: prompt in, completion out.
pub trait CompletionClient {
    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, ClientError>;
}

// ---- mock ------------------------------------------------------------------

/// Scripted client for tests: either a single fixed response or a finite
/// sequence consumed in order.
pub struct MockClient {
    fixed: Option<String>,
    queue: Mutex<Vec<String>>,
}

impl MockClient {
    pub fn fixed(response: impl Into<String>) -> Self {
        MockClient {
            fixed: Some(response.into()),
            queue: Mutex::new(Vec::new()),
        }
    }

    pub fn sequence(responses: Vec<String>) -> Self {
        let mut q = responses;
        q.reverse();
        MockClient {
            fixed: None,
            queue: Mutex::new(q),
        }
    }
}

impl CompletionClient for MockClient {
    fn complete(&self, _prompt: &str, _params: &GenerationParams) -> Result<String, ClientError> {
        if let Some(f) = &self.fixed {
            return Ok(f.clone());
        }
        self.queue
            .lock()
            .expect("mock queue lock")
            .pop()
            .ok_or(ClientError::MockExhausted)
    }
}

// ---- cassette --------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub seq: usize,
    /// Stored for audit; replay matches by sequence, not by prompt.
    pub prompt: String,
    pub params: GenerationParams,
    pub completion: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Cassette {
    pub interactions: Vec<Interaction>,
}

impl Cassette {
    pub fn load(path: &Path) -> Result<Self, ClientError> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| ClientError::Cassette(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), ClientError> {
        let text = serde_json::to_string_pretty(self).expect("cassette serializes");
        fs::write(path, text)?;
        Ok(())
    }
}

/// Replays a cassette's completions in recording order. Deterministic: the
/// same cassette always yields the same sequence.
pub struct ReplayClient {
    cassette: Cassette,
    cursor: Mutex<usize>,
}

impl ReplayClient {
    pub fn new(cassette: Cassette) -> Self {
        ReplayClient {
            cassette,
            cursor: Mutex::new(0),
        }
    }

    pub fn from_path(path: &Path) -> Result<Self, ClientError> {
        Ok(Self::new(Cassette::load(path)?))
    }
}

impl CompletionClient for ReplayClient {
    fn complete(&self, _prompt: &str, _params: &GenerationParams) -> Result<String, ClientError> {
        let mut cursor = self.cursor.lock().expect("cassette cursor lock");
        match self.cassette.interactions.get(*cursor) {
            Some(i) => {
                *cursor += 1;
                Ok(i.completion.clone())
            }
            None => Err(ClientError::CassetteExhausted { served: *cursor }),
        }
    }
}

/// Wraps another client and appends every interaction to a cassette file,
/// flushed after each call.
pub struct RecordingClient<C: CompletionClient> {
    inner: C,
    path: PathBuf,
    cassette: Mutex<Cassette>,
}

impl<C: CompletionClient> RecordingClient<C> {
    pub fn new(inner: C, path: impl Into<PathBuf>) -> Self {
        RecordingClient {
            inner,
            path: path.into(),
            cassette: Mutex::new(Cassette::default()),
        }
    }
}

impl<C: CompletionClient> CompletionClient for RecordingClient<C> {
    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, ClientError> {
        let completion = self.inner.complete(prompt, params)?;
        let mut cassette = self.cassette.lock().expect("cassette lock");
        let seq = cassette.interactions.len();
        cassette.interactions.push(Interaction {
            seq,
            prompt: prompt.to_string(),
            params: params.clone(),
            completion: completion.clone(),
        });
        cassette.save(&self.path)?;
        Ok(completion)
    }
}

// ---- remote ----------------------------------------------------------------

/// Environment variables read by [`HttpClient::from_env`].
pub const ENV_ENDPOINT: &str = "COMPLYGEN_API_ENDPOINT";
pub const ENV_API_KEY: &str = "COMPLYGEN_API_KEY";
pub const ENV_MODEL: &str = "COMPLYGEN_API_MODEL";

/// Minimal HTTP client. POSTs `{"model", "prompt", "max_tokens",
/// "temperature"}` as JSON and expects `{"completion": "..."}` back.
pub struct HttpClient {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
}

impl HttpClient {
    pub fn from_env() -> Result<Self, ClientError> {
        let endpoint = std::env::var(ENV_ENDPOINT)
            .map_err(|_| ClientError::MissingConfig(format!("{ENV_ENDPOINT} is not set")))?;
        Ok(HttpClient {
            endpoint,
            api_key: std::env::var(ENV_API_KEY).ok(),
            model: std::env::var(ENV_MODEL).unwrap_or_else(|_| "default".to_string()),
        })
    }
}

impl CompletionClient for HttpClient {
    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, ClientError> {
        let body = serde_json::json!({
            "model": self.model,
            "prompt": prompt,
            "max_tokens": params.max_tokens,
            "temperature": params.temperature,
        })
        .to_string();
        let mut req = ureq::post(&self.endpoint).header("content-type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("authorization", format!("Bearer {key}"));
        }
        let mut response = req
            .send(&body)
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| ClientError::Transport(format!("non-JSON reply: {e}")))?;
        value
            .get("completion")
            .and_then(|c| c.as_str())
            .map(|s| s.to_string())
            .ok_or_else(|| ClientError::Transport("reply lacks a `completion` field".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mock_sequence_serves_in_order_then_errors() {
        let c = MockClient::sequence(vec!["one".into(), "two".into()]);
        let p = GenerationParams::default();
        assert_eq!(c.complete("", &p).unwrap(), "one");
        assert_eq!(c.complete("", &p).unwrap(), "two");
        assert!(matches!(
            c.complete("", &p),
            Err(ClientError::MockExhausted)
        ));
    }

    #[test]
    fn replay_is_sequential_and_deterministic() {
        let cassette = Cassette {
            interactions: vec![
                Interaction {
                    seq: 0,
                    prompt: "a".into(),
                    params: GenerationParams::default(),
                    completion: "first".into(),
                },
                Interaction {
                    seq: 1,
                    prompt: "b".into(),
                    params: GenerationParams::default(),
                    completion: "second".into(),
                },
            ],
        };
        let p = GenerationParams::default();
        for _ in 0..2 {
            let c = ReplayClient::new(cassette.clone());
            assert_eq!(c.complete("whatever", &p).unwrap(), "first");
            assert_eq!(c.complete("ignored", &p).unwrap(), "second");
            assert!(matches!(
                c.complete("", &p),
                Err(ClientError::CassetteExhausted { served: 2 })
            ));
        }
    }

    #[test]
    fn recording_then_replaying_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cassette.json");
        let p = GenerationParams::default();
        {
            let rec = RecordingClient::new(MockClient::fixed("hello"), &path);
            assert_eq!(rec.complete("prompt one", &p).unwrap(), "hello");
            assert_eq!(rec.complete("prompt two", &p).unwrap(), "hello");
        }
        let replay = ReplayClient::from_path(&path).unwrap();
        assert_eq!(replay.complete("anything", &p).unwrap(), "hello");
        assert_eq!(replay.complete("anything", &p).unwrap(), "hello");
        assert!(replay.complete("anything", &p).is_err());
    }

    #[test]
    fn http_client_requires_endpoint_env() {
        // guard against ambient configuration in the test environment
        if std::env::var(ENV_ENDPOINT).is_ok() {
            return;
        }
        assert!(matches!(
            HttpClient::from_env(),
            Err(ClientError::MissingConfig(_))
        ));
    }
}
