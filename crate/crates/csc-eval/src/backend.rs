//! Chat-completion backends: one HTTP client for OpenAI-compatible endpoints
//! plus deterministic mocks for offline runs and tests.
//!
//! Every completion call carries a full per-sentence transcript and no
//! server-side conversation state, so sentence histories cannot leak into
//! each other. All backends are safe to call from multiple workers.

use std::collections::HashMap;
use std::collections::VecDeque;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Dataset;
use crate::prompt::Transcript;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BackendKind {
    #[serde(rename = "http_openai_compatible")]
    HttpOpenAiCompatible,
    #[serde(rename = "mock_echo")]
    MockEcho,
    #[serde(rename = "mock_gold")]
    MockGold,
    #[serde(rename = "mock_scripted")]
    MockScripted,
}

impl BackendKind {
    pub fn name(self) -> &'static str {
        match self {
            BackendKind::HttpOpenAiCompatible => "http_openai_compatible",
            BackendKind::MockEcho => "mock_echo",
            BackendKind::MockGold => "mock_gold",
            BackendKind::MockScripted => "mock_scripted",
        }
    }

    pub fn parse(s: &str) -> Result<BackendKind, BackendError> {
        match s {
            "http_openai_compatible" => Ok(BackendKind::HttpOpenAiCompatible),
            "mock_echo" => Ok(BackendKind::MockEcho),
            "mock_gold" => Ok(BackendKind::MockGold),
            "mock_scripted" => Ok(BackendKind::MockScripted),
            other => Err(BackendError::InvalidConfig(format!(
                "unknown backend kind {other:?}"
            ))),
        }
    }
}

fn default_model_name() -> String {
    "gpt-3.5-turbo".to_string()
}

fn default_temperature() -> f64 {
    0.8
}

fn default_max_retries() -> u32 {
    3
}

fn default_timeout_secs() -> u64 {
    60
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Chat-completions URL; required for the HTTP kind.
    #[serde(default)]
    pub endpoint_url: Option<String>,
    #[serde(default = "default_model_name")]
    pub model_name: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    /// Requests per second shared across all workers; unset = unlimited.
    #[serde(default)]
    pub rate_limit: Option<f64>,
    /// Name of the environment variable holding the bearer credential;
    /// required for the HTTP kind. The credential itself never appears in
    /// config files.
    #[serde(default)]
    pub api_key_env: Option<String>,
    /// Replay log supplying scripted responses (mock_scripted only).
    #[serde(default)]
    pub script_path: Option<PathBuf>,
}

impl BackendConfig {
    pub fn mock(kind: BackendKind) -> BackendConfig {
        BackendConfig {
            kind,
            endpoint_url: None,
            model_name: default_model_name(),
            temperature: default_temperature(),
            max_retries: default_max_retries(),
            timeout_secs: default_timeout_secs(),
            rate_limit: None,
            api_key_env: None,
            script_path: None,
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        let invalid = |reason: String| Err(BackendError::InvalidConfig(reason));
        if !(0.0..=2.0).contains(&self.temperature) {
            return invalid(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            ));
        }
        if let Some(rate) = self.rate_limit {
            if !rate.is_finite() || rate <= 0.0 {
                return invalid(format!("rate_limit {rate} must be positive"));
            }
        }
        if self.kind == BackendKind::HttpOpenAiCompatible {
            if self.endpoint_url.as_deref().unwrap_or("").is_empty() {
                return invalid("http backend requires endpoint_url".into());
            }
            if self.api_key_env.as_deref().unwrap_or("").is_empty() {
                return invalid("http backend requires api_key_env".into());
            }
            if self.model_name.is_empty() {
                return invalid("http backend requires model_name".into());
            }
        }
        if self.kind == BackendKind::MockScripted && self.script_path.is_none() {
            return invalid("mock_scripted backend requires script_path".into());
        }
        Ok(())
    }
}

/// One completion request: the sentence's own transcript, nothing shared.
#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub sentence_id: &'a str,
    pub transcript: &'a Transcript,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub latency: Duration,
    pub attempt_count: u32,
    pub raw_finish_reason: String,
}

impl Completion {
    fn immediate(text: String) -> Completion {
        Completion {
            text,
            latency: Duration::ZERO,
            attempt_count: 1,
            raw_finish_reason: "stop".to_string(),
        }
    }
}

pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendError>;
}

/// Returns the query sentence unchanged; the null model.
pub struct EchoBackend;

impl ChatBackend for EchoBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendError> {
        Ok(Completion::immediate(
            request.transcript.query_sentence.clone(),
        ))
    }
}

/// Returns the gold correction for every known source sentence; the perfect
/// model.
pub struct GoldBackend {
    gold_by_source: HashMap<String, String>,
}

impl GoldBackend {
    pub fn from_dataset(dataset: &Dataset) -> GoldBackend {
        GoldBackend {
            gold_by_source: dataset
                .pairs()
                .iter()
                .map(|p| (p.source.clone(), p.gold.clone()))
                .collect(),
        }
    }
}

impl ChatBackend for GoldBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendError> {
        let sentence = &request.transcript.query_sentence;
        let gold = self
            .gold_by_source
            .get(sentence)
            .ok_or_else(|| BackendError::UnknownSentence(sentence.clone()))?;
        Ok(Completion::immediate(gold.clone()))
    }
}

enum Script {
    /// Responses consumed in call order; single-worker use only.
    Ordered(Mutex<VecDeque<String>>),
    /// Responses keyed by sentence id; deterministic under any parallelism.
    Keyed(HashMap<String, String>),
}

/// Replays canned responses.
pub struct ScriptedBackend {
    script: Script,
}

impl ScriptedBackend {
    pub fn ordered<I, S>(responses: I) -> ScriptedBackend
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ScriptedBackend {
            script: Script::Ordered(Mutex::new(
                responses.into_iter().map(Into::into).collect(),
            )),
        }
    }

    pub fn keyed<I, K, V>(responses: I) -> ScriptedBackend
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        ScriptedBackend {
            script: Script::Keyed(
                responses
                    .into_iter()
                    .map(|(k, v)| (k.into(), v.into()))
                    .collect(),
            ),
        }
    }
}

impl ChatBackend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendError> {
        let text = match &self.script {
            Script::Ordered(queue) => queue
                .lock()
                .expect("script mutex poisoned")
                .pop_front()
                .ok_or(BackendError::ScriptExhausted)?,
            Script::Keyed(map) => map
                .get(request.sentence_id)
                .cloned()
                .ok_or_else(|| BackendError::ScriptMissing(request.sentence_id.to_string()))?,
        };
        Ok(Completion::immediate(text))
    }
}

/// Wraps another backend and keeps every request it saw, for asserting the
/// fresh-history contract.
pub struct RecordingBackend<B> {
    inner: B,
    seen: Mutex<Vec<(String, Transcript)>>,
}

impl<B> RecordingBackend<B> {
    pub fn new(inner: B) -> RecordingBackend<B> {
        RecordingBackend {
            inner,
            seen: Mutex::new(Vec::new()),
        }
    }

    pub fn requests(&self) -> Vec<(String, Transcript)> {
        self.seen.lock().expect("recorder mutex poisoned").clone()
    }
}

impl<B: ChatBackend> ChatBackend for RecordingBackend<B> {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendError> {
        self.seen
            .lock()
            .expect("recorder mutex poisoned")
            .push((request.sentence_id.to_string(), request.transcript.clone()));
        self.inner.complete(request)
    }
}

/// Spaces request starts so the shared rate cap holds across workers.
pub struct RateLimiter {
    min_interval: Duration,
    next_slot: Mutex<Instant>,
}

impl RateLimiter {
    pub fn new(requests_per_second: f64) -> RateLimiter {
        assert!(requests_per_second > 0.0);
        RateLimiter {
            min_interval: Duration::from_secs_f64(1.0 / requests_per_second),
            next_slot: Mutex::new(Instant::now()),
        }
    }

    /// Blocks until this caller's slot arrives.
    pub fn acquire(&self) {
        let slot = {
            let mut next = self.next_slot.lock().expect("rate limiter mutex poisoned");
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + self.min_interval;
            slot
        };
        let now = Instant::now();
        if slot > now {
            std::thread::sleep(slot - now);
        }
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: Vec<WireMessage<'a>>,
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireResponseMessage,
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct WireResponseMessage {
    content: String,
}

/// Client for OpenAI-compatible chat-completions endpoints.
///
/// Retries 429, 5xx, and transport failures with exponential backoff, up to
/// 1 + max_retries total attempts. Other HTTP errors fail immediately.
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    endpoint_url: String,
    model_name: String,
    temperature: f64,
    max_retries: u32,
    api_key: String,
    rate_limiter: Option<RateLimiter>,
    backoff_base: Duration,
}

impl HttpBackend {
    pub fn from_config(config: &BackendConfig) -> Result<HttpBackend, BackendError> {
        config.validate()?;
        if config.kind != BackendKind::HttpOpenAiCompatible {
            return Err(BackendError::InvalidConfig(format!(
                "cannot build an HTTP backend from kind {}",
                config.kind.name()
            )));
        }
        let env_name = config.api_key_env.as_deref().unwrap();
        let api_key = std::env::var(env_name)
            .map_err(|_| BackendError::AuthMissing(env_name.to_string()))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::InvalidConfig(format!("http client: {e}")))?;
        Ok(HttpBackend {
            client,
            endpoint_url: config.endpoint_url.clone().unwrap(),
            model_name: config.model_name.clone(),
            temperature: config.temperature,
            max_retries: config.max_retries,
            api_key,
            rate_limiter: config.rate_limit.map(RateLimiter::new),
            backoff_base: Duration::from_millis(500),
        })
    }

    /// Shrinks the retry backoff; tests use this to keep retry paths fast.
    pub fn with_backoff_base(mut self, base: Duration) -> HttpBackend {
        self.backoff_base = base;
        self
    }

    fn attempt(&self, request: &CompletionRequest<'_>) -> Result<(String, String), AttemptFailure> {
        let body = WireRequest {
            model: &self.model_name,
            temperature: self.temperature,
            messages: request
                .transcript
                .turns
                .iter()
                .map(|t| WireMessage {
                    role: t.role.name(),
                    content: &t.content,
                })
                .collect(),
        };
        let response = self
            .client
            .post(&self.endpoint_url)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| AttemptFailure::Transport {
                timeout: e.is_timeout(),
                detail: e.to_string(),
            })?;
        let status = response.status();
        let text = response.text().map_err(|e| AttemptFailure::Transport {
            timeout: e.is_timeout(),
            detail: e.to_string(),
        })?;
        if !status.is_success() {
            return Err(AttemptFailure::Status {
                code: status.as_u16(),
                transient: status.as_u16() == 429 || status.is_server_error(),
                detail: truncate(&text, 200),
            });
        }
        let parsed: WireResponse = serde_json::from_str(&text).map_err(|e| {
            AttemptFailure::Malformed {
                detail: format!("{e} in body {}", truncate(&text, 200)),
            }
        })?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| AttemptFailure::Malformed {
                detail: "response has no choices".to_string(),
            })?;
        Ok((
            choice.message.content,
            choice.finish_reason.unwrap_or_default(),
        ))
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<Completion, BackendError> {
        let start = Instant::now();
        let mut attempts = 0u32;
        loop {
            attempts += 1;
            if let Some(limiter) = &self.rate_limiter {
                limiter.acquire();
            }
            let failure = match self.attempt(request) {
                Ok((text, finish_reason)) => {
                    return Ok(Completion {
                        text,
                        latency: start.elapsed(),
                        attempt_count: attempts,
                        raw_finish_reason: finish_reason,
                    })
                }
                Err(failure) => failure,
            };
            match failure {
                AttemptFailure::Malformed { detail } => {
                    return Err(BackendError::MalformedResponse { detail })
                }
                AttemptFailure::Status {
                    code,
                    transient: false,
                    detail,
                } => return Err(BackendError::RequestFailed { status: code, detail }),
                AttemptFailure::Status {
                    code,
                    transient: true,
                    detail,
                } => {
                    if attempts > self.max_retries {
                        return Err(BackendError::ExhaustedRetries {
                            attempts,
                            last_status: Some(code),
                            detail,
                        });
                    }
                }
                AttemptFailure::Transport { timeout, detail } => {
                    if attempts > self.max_retries {
                        return Err(if timeout {
                            BackendError::Timeout { attempts }
                        } else {
                            BackendError::ExhaustedRetries {
                                attempts,
                                last_status: None,
                                detail,
                            }
                        });
                    }
                }
            }
            std::thread::sleep(self.backoff_base * 2u32.saturating_pow(attempts - 1));
        }
    }
}

enum AttemptFailure {
    Status {
        code: u16,
        transient: bool,
        detail: String,
    },
    Transport {
        timeout: bool,
        detail: String,
    },
    Malformed {
        detail: String,
    },
}

fn truncate(s: &str, max_chars: usize) -> String {
    if s.chars().count() <= max_chars {
        s.to_string()
    } else {
        let cut: String = s.chars().take(max_chars).collect();
        format!("{cut}…")
    }
}

const QUOTE_PAIRS: [(char, char); 8] = [
    ('"', '"'),
    ('\'', '\''),
    ('“', '”'),
    ('‘', '’'),
    ('「', '」'),
    ('『', '』'),
    ('«', '»'),
    ('`', '`'),
];

/// Defensive cleanup of model text: keeps only the first line, trims
/// whitespace, and peels surrounding quote pairs. Interior characters are
/// never altered, and the function is idempotent.
pub fn strip_response(text: &str) -> String {
    let mut current = text.trim().lines().next().unwrap_or("").trim();
    loop {
        let mut changed = false;
        for (open, close) in QUOTE_PAIRS {
            if current.chars().count() >= 2
                && current.starts_with(open)
                && current.ends_with(close)
            {
                current = current[open.len_utf8()..current.len() - close.len_utf8()].trim();
                changed = true;
            }
        }
        if !changed {
            return current.to_string();
        }
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("retries exhausted after {attempts} attempts (last status {last_status:?}): {detail}")]
    ExhaustedRetries {
        attempts: u32,
        last_status: Option<u16>,
        detail: String,
    },
    #[error("request timed out ({attempts} attempts)")]
    Timeout { attempts: u32 },
    #[error("environment variable {0} holding the API credential is not set")]
    AuthMissing(String),
    #[error("endpoint rejected the request with status {status}: {detail}")]
    RequestFailed { status: u16, detail: String },
    #[error("could not parse endpoint response: {detail}")]
    MalformedResponse { detail: String },
    #[error("scripted backend ran out of responses")]
    ScriptExhausted,
    #[error("scripted backend has no response for sentence {0}")]
    ScriptMissing(String),
    #[error("gold backend has no pair with source {0:?}")]
    UnknownSentence(String),
    #[error("invalid backend configuration: {0}")]
    InvalidConfig(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Split;
    use crate::prompt::{ChatTurn, Role};
    use proptest::prelude::*;

    fn transcript(sentence: &str) -> Transcript {
        Transcript {
            turns: vec![
                ChatTurn {
                    role: Role::System,
                    content: "preamble".to_string(),
                },
                ChatTurn {
                    role: Role::User,
                    content: format!("query {sentence}"),
                },
            ],
            query_sentence: sentence.to_string(),
        }
    }

    #[test]
    fn echo_returns_the_query_sentence() {
        let t = transcript("我真胡秃");
        let completion = EchoBackend
            .complete(&CompletionRequest {
                sentence_id: "00001",
                transcript: &t,
            })
            .unwrap();
        assert_eq!(completion.text, "我真胡秃");
        assert_eq!(completion.attempt_count, 1);
    }

    #[test]
    fn gold_returns_the_paired_correction() {
        let ds = Dataset::parse("我真胡秃\t我真糊涂\n", "d", Split::Test).unwrap();
        let backend = GoldBackend::from_dataset(&ds);
        let t = transcript("我真胡秃");
        let completion = backend
            .complete(&CompletionRequest {
                sentence_id: "00001",
                transcript: &t,
            })
            .unwrap();
        assert_eq!(completion.text, "我真糊涂");
        let unknown = transcript("没见过");
        assert!(matches!(
            backend.complete(&CompletionRequest {
                sentence_id: "x",
                transcript: &unknown
            }),
            Err(BackendError::UnknownSentence(_))
        ));
    }

    #[test]
    fn ordered_script_exhausts() {
        let backend = ScriptedBackend::ordered(["我真糊涂"]);
        let t = transcript("我真胡秃");
        let req = CompletionRequest {
            sentence_id: "00001",
            transcript: &t,
        };
        assert_eq!(backend.complete(&req).unwrap().text, "我真糊涂");
        assert!(matches!(
            backend.complete(&req),
            Err(BackendError::ScriptExhausted)
        ));
    }

    #[test]
    fn keyed_script_ignores_call_order() {
        let backend = ScriptedBackend::keyed([("00002", "乙"), ("00001", "甲")]);
        let t1 = transcript("一");
        let t2 = transcript("二");
        let r2 = backend
            .complete(&CompletionRequest {
                sentence_id: "00002",
                transcript: &t2,
            })
            .unwrap();
        let r1 = backend
            .complete(&CompletionRequest {
                sentence_id: "00001",
                transcript: &t1,
            })
            .unwrap();
        assert_eq!((r1.text.as_str(), r2.text.as_str()), ("甲", "乙"));
        assert!(matches!(
            backend.complete(&CompletionRequest {
                sentence_id: "00009",
                transcript: &t1
            }),
            Err(BackendError::ScriptMissing(id)) if id == "00009"
        ));
    }

    #[test]
    fn recorder_keeps_requests_in_order() {
        let backend = RecordingBackend::new(EchoBackend);
        for sentence in ["一", "二", "三"] {
            let t = transcript(sentence);
            backend
                .complete(&CompletionRequest {
                    sentence_id: sentence,
                    transcript: &t,
                })
                .unwrap();
        }
        let seen = backend.requests();
        assert_eq!(seen.len(), 3);
        assert_eq!(seen[1].0, "二");
        assert_eq!(seen[1].1.query_sentence, "二");
        assert_eq!(seen[1].1.turns.len(), 2);
    }

    #[test]
    fn rate_limiter_spaces_slots() {
        let limiter = RateLimiter::new(100.0);
        let start = Instant::now();
        for _ in 0..4 {
            limiter.acquire();
        }
        // 4 acquisitions at 100 rps spread over ~30 ms; allow scheduler slack
        assert!(start.elapsed() >= Duration::from_millis(25));
    }

    #[test]
    fn config_validation_catches_bad_values() {
        let mut config = BackendConfig::mock(BackendKind::MockEcho);
        config.temperature = 2.5;
        assert!(config.validate().is_err());

        let mut config = BackendConfig::mock(BackendKind::HttpOpenAiCompatible);
        assert!(config.validate().is_err());
        config.endpoint_url = Some("http://127.0.0.1:1/v1/chat/completions".to_string());
        assert!(config.validate().is_err());
        config.api_key_env = Some("CSC_EVAL_TEST_KEY".to_string());
        assert!(config.validate().is_ok());

        let mut config = BackendConfig::mock(BackendKind::MockScripted);
        assert!(config.validate().is_err());
        config.script_path = Some(PathBuf::from("replay.jsonl"));
        assert!(config.validate().is_ok());

        let mut config = BackendConfig::mock(BackendKind::MockEcho);
        config.rate_limit = Some(0.0);
        assert!(config.validate().is_err());
    }

    #[test]
    fn missing_credential_is_reported_with_env_name() {
        let mut config = BackendConfig::mock(BackendKind::HttpOpenAiCompatible);
        config.endpoint_url = Some("http://127.0.0.1:1/v1/chat/completions".to_string());
        config.api_key_env = Some("CSC_EVAL_SURELY_UNSET_KEY".to_string());
        match HttpBackend::from_config(&config).err().unwrap() {
            BackendError::AuthMissing(name) => assert_eq!(name, "CSC_EVAL_SURELY_UNSET_KEY"),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn strip_handles_the_known_noise_shapes() {
        assert_eq!(strip_response("我真糊涂\n"), "我真糊涂");
        assert_eq!(strip_response("“我真糊涂”"), "我真糊涂");
        assert_eq!(strip_response("我真糊涂\n解释：这句话的意思是…"), "我真糊涂");
        assert_eq!(strip_response("  「『我真糊涂』」 "), "我真糊涂");
        assert_eq!(strip_response("\n\n 你好 \n"), "你好");
        assert_eq!(strip_response(""), "");
        assert_eq!(strip_response("“"), "“");
        assert_eq!(strip_response("\"\""), "");
    }

    #[test]
    fn strip_keeps_interior_characters() {
        assert_eq!(strip_response("他说“好”了"), "他说“好”了");
        assert_eq!(strip_response("我真糊涂。"), "我真糊涂。");
    }

    proptest! {
        #[test]
        fn strip_is_idempotent(text in ".{0,60}") {
            let once = strip_response(&text);
            prop_assert_eq!(strip_response(&once), once.clone());
        }

        #[test]
        fn strip_never_alters_interior_characters(
            core in "[一-鿿]{1,10}",
            quote in 0usize..8,
            newline_tail in proptest::bool::ANY,
        ) {
            let (open, close) = QUOTE_PAIRS[quote];
            let mut wrapped = format!(" {open}{core}{close} ");
            if newline_tail {
                wrapped.push_str("\n第二行");
            }
            prop_assert_eq!(strip_response(&wrapped), core);
        }
    }
}
