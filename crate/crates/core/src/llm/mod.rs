//! Batch annotation client for chat-completion backends.
//!
//! `annotate_batch` sends rendered prompts to an HTTP backend under a
//! sliding-window rate limit with bounded concurrency, retries transient
//! failures with exponential backoff, parses each reply into a label /
//! refusal / ambiguous outcome, and appends every completed record to a
//! JSONL log so an interrupted run resumes without re-querying finished ids.

pub mod clock;
pub mod limiter;
pub mod mock;

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::prompt::{parse_response_with, ParsedResponse, DEFAULT_REFUSAL_PHRASES};

pub use clock::{Clock, SystemClock, TestClock};
pub use limiter::RateLimiter;
pub use mock::{MockScript, MockServer, UsageRule};

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("invalid backend config: {0}")]
    InvalidConfig(String),
    /// Authentication problems are never retried.
    #[error("authentication failed: {0}")]
    Auth(String),
    /// A request that could not be completed; earlier records stay in the
    /// log so a rerun picks up where this one stopped.
    #[error("query {query_id}: request failed after {attempts} attempt(s): {detail}")]
    TerminalTransport {
        query_id: String,
        attempts: u32,
        detail: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("annotation log record: {0}")]
    RecordFormat(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Total attempts per prompt, including the first.
    pub max_attempts: u32,
    /// First retry waits this long; each later retry doubles it.
    pub backoff_base_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            backoff_base_ms: 1_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackendConfig {
    pub endpoint_url: String,
    pub model_name: String,
    /// Name of the environment variable holding the API key. The key value
    /// itself is read at request time and never stored or logged. `None`
    /// sends no authorization header (local mock backends).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env_var: Option<String>,
    pub max_requests_per_minute: u32,
    pub max_concurrent_inflight: usize,
    #[serde(default)]
    pub retry: RetryPolicy,
    pub timeout_secs: u64,
}

/// One prompt to annotate. `query_id` must be unique within a batch; it is
/// the resume key.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PromptRequest {
    pub query_id: String,
    pub prompt_text: String,
}

/// Completed annotation, one JSONL line in the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub query_id: String,
    pub prompt_text: String,
    pub response_text: String,
    pub parsed: ParsedResponse,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    /// Time from first attempt to the successful response, clock units.
    pub latency_ms: u64,
    pub attempt_count: u32,
    pub timestamp_ms: u64,
}

/// Class vocabulary and refusal phrases used to interpret replies.
#[derive(Debug, Clone)]
pub struct ParserContext {
    pub class_names: Vec<String>,
    pub refusal_phrases: Vec<String>,
}

impl ParserContext {
    pub fn new(class_names: Vec<String>) -> Self {
        ParserContext {
            class_names,
            refusal_phrases: DEFAULT_REFUSAL_PHRASES
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }

    pub fn parse(&self, text: &str) -> ParsedResponse {
        let phrases: Vec<&str> = self.refusal_phrases.iter().map(String::as_str).collect();
        parse_response_with(text, &self.class_names, &phrases)
    }
}

/// Token estimate used before any backend reports real usage: ceil(chars/4).
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

/// Signature for swapping in a different token estimator.
pub type TokenEstimator = fn(&str) -> u64;

/// Reads every intact record from a JSONL annotation log. A malformed final
/// line (torn by an interrupted run) is dropped; malformed lines anywhere
/// else are real corruption and error out.
pub fn read_annotation_log(path: &Path) -> Result<Vec<AnnotationRecord>, LlmError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(path)?;
    let lines: Vec<&str> = text.lines().collect();
    let mut records = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<AnnotationRecord>(line) {
            Ok(record) => records.push(record),
            Err(e) if i + 1 == lines.len() => {
                let _ = e;
            }
            Err(e) => return Err(LlmError::RecordFormat(e)),
        }
    }
    Ok(records)
}

fn open_log_for_append(path: &Path) -> Result<std::fs::File, LlmError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    if let Ok(bytes) = std::fs::read(path) {
        if !bytes.is_empty() && !bytes.ends_with(b"\n") {
            // Drop the torn final line (a write interrupted mid-record); its
            // id was not counted as completed, so it will be re-queried.
            let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
            let file = std::fs::OpenOptions::new().write(true).open(path)?;
            file.set_len(keep as u64)?;
        }
    }
    Ok(std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)?)
}

fn validate_config(config: &BackendConfig) -> Result<(), LlmError> {
    if config.endpoint_url.is_empty() {
        return Err(LlmError::InvalidConfig("endpoint_url is empty".into()));
    }
    if config.max_requests_per_minute == 0 {
        return Err(LlmError::InvalidConfig(
            "max_requests_per_minute must be at least 1".into(),
        ));
    }
    if config.max_concurrent_inflight == 0 {
        return Err(LlmError::InvalidConfig(
            "max_concurrent_inflight must be at least 1".into(),
        ));
    }
    if config.retry.max_attempts == 0 {
        return Err(LlmError::InvalidConfig(
            "retry.max_attempts must be at least 1".into(),
        ));
    }
    if config.timeout_secs == 0 {
        return Err(LlmError::InvalidConfig(
            "timeout_secs must be at least 1".into(),
        ));
    }
    Ok(())
}

enum AttemptOutcome {
    Success {
        content: String,
        prompt_tokens: u64,
        completion_tokens: u64,
    },
    Auth(String),
    Fatal(String),
    Retryable(String),
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
    usage: Option<ChatUsage>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

#[derive(Deserialize)]
struct ChatUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

fn attempt_request(
    prompt: &PromptRequest,
    config: &BackendConfig,
    api_key: &Option<String>,
    client: &reqwest::blocking::Client,
) -> AttemptOutcome {
    let body = serde_json::json!({
        "model": config.model_name,
        "messages": [{"role": "user", "content": prompt.prompt_text}],
        "temperature": 0,
    });
    let mut request = client.post(&config.endpoint_url).json(&body);
    if let Some(key) = api_key {
        request = request.header("authorization", format!("Bearer {key}"));
    }
    let response = match request.send() {
        Ok(r) => r,
        Err(e) => return AttemptOutcome::Retryable(format!("transport: {e}")),
    };
    let status = response.status().as_u16();
    match status {
        200..=299 => {}
        401 | 403 => return AttemptOutcome::Auth(format!("backend returned HTTP {status}")),
        429 => return AttemptOutcome::Retryable("HTTP 429 rate limited".into()),
        500..=599 => return AttemptOutcome::Retryable(format!("HTTP {status}")),
        _ => return AttemptOutcome::Fatal(format!("HTTP {status}")),
    }
    let parsed: ChatResponse = match response.json() {
        Ok(p) => p,
        Err(e) => return AttemptOutcome::Fatal(format!("malformed response body: {e}")),
    };
    let Some(choice) = parsed.choices.into_iter().next() else {
        return AttemptOutcome::Fatal("response had no choices".into());
    };
    let content = choice.message.content;
    let (prompt_tokens, completion_tokens) = match parsed.usage {
        Some(u) => (u.prompt_tokens, u.completion_tokens),
        None => (
            estimate_tokens(&prompt.prompt_text),
            estimate_tokens(&content),
        ),
    };
    AttemptOutcome::Success {
        content,
        prompt_tokens,
        completion_tokens,
    }
}

fn run_one(
    prompt: &PromptRequest,
    config: &BackendConfig,
    api_key: &Option<String>,
    client: &reqwest::blocking::Client,
    parser: &ParserContext,
    limiter: &RateLimiter,
    clock: &dyn Clock,
) -> Result<AnnotationRecord, LlmError> {
    let started = clock.now_ms();
    for attempt in 1..=config.retry.max_attempts {
        limiter.acquire(clock);
        match attempt_request(prompt, config, api_key, client) {
            AttemptOutcome::Success {
                content,
                prompt_tokens,
                completion_tokens,
            } => {
                let finished = clock.now_ms();
                let parsed = parser.parse(&content);
                return Ok(AnnotationRecord {
                    query_id: prompt.query_id.clone(),
                    prompt_text: prompt.prompt_text.clone(),
                    response_text: content,
                    parsed,
                    prompt_tokens,
                    completion_tokens,
                    latency_ms: finished.saturating_sub(started),
                    attempt_count: attempt,
                    timestamp_ms: finished,
                });
            }
            AttemptOutcome::Auth(detail) => return Err(LlmError::Auth(detail)),
            AttemptOutcome::Fatal(detail) => {
                return Err(LlmError::TerminalTransport {
                    query_id: prompt.query_id.clone(),
                    attempts: attempt,
                    detail,
                })
            }
            AttemptOutcome::Retryable(detail) => {
                if attempt == config.retry.max_attempts {
                    return Err(LlmError::TerminalTransport {
                        query_id: prompt.query_id.clone(),
                        attempts: attempt,
                        detail,
                    });
                }
                let doubling = (attempt - 1).min(20);
                clock.sleep_ms(config.retry.backoff_base_ms.saturating_mul(1u64 << doubling));
            }
        }
    }
    unreachable!("validated max_attempts >= 1");
}

/// Annotates every prompt, returning records in prompt order.
///
/// Prompts whose `query_id` already appears in the log at `log_path` are not
/// re-sent; their logged records are returned as-is. Newly completed records
/// are appended to the log one line at a time, so killing the process loses
/// at most the in-flight requests.
pub fn annotate_batch(
    prompts: &[PromptRequest],
    config: &BackendConfig,
    parser: &ParserContext,
    log_path: &Path,
    clock: &dyn Clock,
) -> Result<Vec<AnnotationRecord>, LlmError> {
    validate_config(config)?;
    let mut seen = HashSet::new();
    for p in prompts {
        if !seen.insert(p.query_id.as_str()) {
            return Err(LlmError::InvalidConfig(format!(
                "duplicate query_id {:?}",
                p.query_id
            )));
        }
    }

    let existing = read_annotation_log(log_path)?;
    let by_id: HashMap<&str, &AnnotationRecord> =
        existing.iter().map(|r| (r.query_id.as_str(), r)).collect();
    let prefilled: Vec<Option<AnnotationRecord>> = prompts
        .iter()
        .map(|p| by_id.get(p.query_id.as_str()).map(|r| (*r).clone()))
        .collect();
    let pending: Vec<usize> = prefilled
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.is_none().then_some(i))
        .collect();
    if pending.is_empty() {
        return Ok(prefilled.into_iter().map(|r| r.expect("prefilled")).collect());
    }

    let api_key = match &config.api_key_env_var {
        Some(var) => Some(std::env::var(var).map_err(|_| {
            LlmError::Auth(format!("environment variable {var} is not set"))
        })?),
        None => None,
    };
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(config.timeout_secs))
        .build()
        .map_err(|e| LlmError::InvalidConfig(format!("http client: {e}")))?;

    let limiter = RateLimiter::new(config.max_requests_per_minute);
    let log_file = Mutex::new(open_log_for_append(log_path)?);
    let results = Mutex::new(prefilled);
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let first_error: Mutex<Option<LlmError>> = Mutex::new(None);
    let workers = config.max_concurrent_inflight.min(pending.len());

    let record_error = |e: LlmError| {
        let mut slot = first_error.lock().unwrap();
        if slot.is_none() {
            *slot = Some(e);
        }
        stop.store(true, Ordering::SeqCst);
    };

    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let slot = next.fetch_add(1, Ordering::SeqCst);
                if slot >= pending.len() {
                    break;
                }
                let index = pending[slot];
                match run_one(&prompts[index], config, &api_key, &client, parser, &limiter, clock)
                {
                    Ok(record) => {
                        let line = match serde_json::to_string(&record) {
                            Ok(l) => l,
                            Err(e) => {
                                record_error(LlmError::RecordFormat(e));
                                break;
                            }
                        };
                        let written = {
                            let mut file = log_file.lock().unwrap();
                            file.write_all(line.as_bytes())
                                .and_then(|_| file.write_all(b"\n"))
                                .and_then(|_| file.flush())
                        };
                        if let Err(e) = written {
                            record_error(LlmError::Io(e));
                            break;
                        }
                        results.lock().unwrap()[index] = Some(record);
                    }
                    Err(e) => {
                        record_error(e);
                        break;
                    }
                }
            });
        }
    });

    if let Some(e) = first_error.into_inner().unwrap() {
        return Err(e);
    }
    Ok(results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every pending prompt completed"))
        .collect())
}
