//! Narration audio through an external text-to-speech HTTP endpoint.
//!
//! The endpoint receives `{"text", "voice", "format"}` as JSON and answers
//! with audio bytes; its Content-Type header names the audio format. Clips
//! are cached by a digest of the endpoint, voice, format and text.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};
use std::time::Duration;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const DEFAULT_FORMAT: &str = "mp3";
const REQUEST_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct TtsConfig {
    pub endpoint: Option<String>,
    pub voice: String,
    pub format: String,
}

impl Default for TtsConfig {
    fn default() -> Self {
        TtsConfig {
            endpoint: None,
            voice: String::new(),
            format: DEFAULT_FORMAT.into(),
        }
    }
}

impl TtsConfig {
    /// Reads `TTS_ENDPOINT`, `TTS_VOICE` and `TTS_FORMAT`.
    pub fn from_env() -> Self {
        let var = |k: &str| std::env::var(k).ok().filter(|v| !v.trim().is_empty());
        TtsConfig {
            endpoint: var("TTS_ENDPOINT"),
            voice: var("TTS_VOICE").unwrap_or_default(),
            format: var("TTS_FORMAT").unwrap_or_else(|| DEFAULT_FORMAT.into()),
        }
    }

    pub fn enabled(&self) -> bool {
        self.endpoint.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub content_type: String,
    pub bytes: Arc<[u8]>,
    pub text_hash: String,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum TtsError {
    #[error("text-to-speech is not configured")]
    FeatureDisabled,
    #[error("text-to-speech service unavailable: {0}")]
    TTSUnavailable(String),
}

impl TtsError {
    pub fn code(&self) -> &'static str {
        match self {
            TtsError::FeatureDisabled => "FeatureDisabled",
            TtsError::TTSUnavailable(_) => "TTSUnavailable",
        }
    }
}

/// Stable cache key for one clip.
pub fn text_hash(config: &TtsConfig, text: &str) -> String {
    let mut h = Sha256::new();
    for part in [config.endpoint.as_deref().unwrap_or(""), &config.voice, &config.format, text] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    hex::encode(h.finalize())
}

fn default_content_type(format: &str) -> String {
    match format {
        "mp3" => "audio/mpeg".into(),
        "wav" => "audio/wav".into(),
        "ogg" => "audio/ogg".into(),
        other => format!("audio/{other}"),
    }
}

#[derive(Serialize)]
struct SynthesisRequest<'a> {
    text: &'a str,
    voice: &'a str,
    format: &'a str,
}

/// A caching TTS client. Shared readers may look up the cache while other
/// texts are being synthesized; the lock is never held across a request.
pub struct Vocalizer {
    config: TtsConfig,
    agent: ureq::Agent,
    cache: RwLock<HashMap<String, AudioClip>>,
    requests: std::sync::atomic::AtomicUsize,
}

impl Vocalizer {
    pub fn new(config: TtsConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(REQUEST_TIMEOUT))
            .http_status_as_error(false)
            .build()
            .new_agent();
        Vocalizer {
            config,
            agent,
            cache: RwLock::new(HashMap::new()),
            requests: Default::default(),
        }
    }

    pub fn config(&self) -> &TtsConfig {
        &self.config
    }

    /// Number of requests sent to the endpoint so far.
    pub fn request_count(&self) -> usize {
        self.requests.load(std::sync::atomic::Ordering::Relaxed)
    }

    pub fn synthesize(&self, text: &str) -> Result<AudioClip, TtsError> {
        let endpoint = self.config.endpoint.as_deref().ok_or(TtsError::FeatureDisabled)?;
        let key = text_hash(&self.config, text);
        if let Some(hit) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let clip = self.fetch(endpoint, text, key.clone())?;
        let mut cache = self.cache.write().expect("cache lock");
        Ok(cache.entry(key).or_insert(clip).clone())
    }

    fn fetch(&self, endpoint: &str, text: &str, key: String) -> Result<AudioClip, TtsError> {
        let unavailable = |e: String| TtsError::TTSUnavailable(e);
        let body = serde_json::to_string(&SynthesisRequest {
            text,
            voice: &self.config.voice,
            format: &self.config.format,
        })
        .expect("request serializes");
        self.requests.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        let mut resp = self
            .agent
            .post(endpoint)
            .header("Content-Type", "application/json")
            .send(body.as_str())
            .map_err(|e| unavailable(e.to_string()))?;
        let status = resp.status();
        let content_type = resp
            .headers()
            .get("content-type")
            .and_then(|v| v.to_str().ok())
            .map(str::to_string);
        let bytes = resp.body_mut().read_to_vec().map_err(|e| unavailable(e.to_string()))?;
        if !status.is_success() {
            let detail = String::from_utf8_lossy(&bytes[..bytes.len().min(200)]).into_owned();
            return Err(unavailable(format!("HTTP {status}: {detail}")));
        }
        if bytes.is_empty() {
            return Err(unavailable("empty audio response".into()));
        }
        Ok(AudioClip {
            content_type: content_type.unwrap_or_else(|| default_content_type(&self.config.format)),
            bytes: bytes.into(),
            text_hash: key,
        })
    }
}

impl std::fmt::Debug for Vocalizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Vocalizer").field("config", &self.config).finish_non_exhaustive()
    }
}
