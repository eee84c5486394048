//! Deterministic in-process HTTP backend for tests and offline runs.
//!
//! Serves a minimal chat-completion endpoint on a loopback socket. Response
//! status codes can be scripted per request (e.g. 429, 429, 200) and reply
//! text is drawn from a fixed rotation, so failure handling and retry logic
//! can be exercised without a network.

use std::collections::VecDeque;
use std::io::{Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde_json::json;

use super::estimate_tokens;

/// How the mock fills in `usage` token counts on successful replies.
#[derive(Debug, Clone, Copy)]
pub enum UsageRule {
    /// Same ceil(chars/4) heuristic the client-side estimator uses.
    CharsOver4,
    /// Whitespace-separated token count.
    Whitespace,
    Fixed { prompt: u64, completion: u64 },
}

impl UsageRule {
    fn count(&self, text: &str) -> u64 {
        match self {
            UsageRule::CharsOver4 => estimate_tokens(text),
            UsageRule::Whitespace => text.split_whitespace().count() as u64,
            UsageRule::Fixed { .. } => 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MockScript {
    /// Status codes consumed one per incoming request; afterwards every
    /// request gets 200.
    pub statuses: Vec<u16>,
    /// Reply texts cycled over successful requests.
    pub contents: Vec<String>,
    pub usage: UsageRule,
    /// Real milliseconds each handler holds the connection open; lets tests
    /// observe how many requests are in flight at once.
    pub handler_delay_ms: u64,
}

impl Default for MockScript {
    fn default() -> Self {
        MockScript {
            statuses: Vec::new(),
            contents: vec!["walking".to_string()],
            usage: UsageRule::CharsOver4,
            handler_delay_ms: 0,
        }
    }
}

/// One observed request.
#[derive(Debug, Clone)]
pub struct MockHit {
    pub prompt_text: String,
    pub authorization: Option<String>,
    pub status_sent: u16,
}

struct MockState {
    statuses: Mutex<VecDeque<u16>>,
    contents: Vec<String>,
    usage: UsageRule,
    handler_delay_ms: u64,
    served: AtomicUsize,
    hits: Mutex<Vec<MockHit>>,
    inflight: AtomicUsize,
    max_inflight: AtomicUsize,
    stop: AtomicBool,
}

pub struct MockServer {
    addr: SocketAddr,
    state: Arc<MockState>,
    accept_thread: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn start(script: MockScript) -> std::io::Result<MockServer> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let state = Arc::new(MockState {
            statuses: Mutex::new(script.statuses.into_iter().collect()),
            contents: if script.contents.is_empty() {
                vec!["walking".to_string()]
            } else {
                script.contents
            },
            usage: script.usage,
            handler_delay_ms: script.handler_delay_ms,
            served: AtomicUsize::new(0),
            hits: Mutex::new(Vec::new()),
            inflight: AtomicUsize::new(0),
            max_inflight: AtomicUsize::new(0),
            stop: AtomicBool::new(false),
        });
        let accept_state = Arc::clone(&state);
        let accept_thread = std::thread::spawn(move || {
            let mut handlers = Vec::new();
            for stream in listener.incoming() {
                if accept_state.stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let handler_state = Arc::clone(&accept_state);
                handlers.push(std::thread::spawn(move || {
                    handle_connection(stream, &handler_state);
                }));
            }
            for h in handlers {
                let _ = h.join();
            }
        });
        Ok(MockServer {
            addr,
            state,
            accept_thread: Some(accept_thread),
        })
    }

    pub fn endpoint_url(&self) -> String {
        format!("http://{}/v1/chat/completions", self.addr)
    }

    /// Total requests served so far.
    pub fn request_count(&self) -> usize {
        self.state.served.load(Ordering::SeqCst)
    }

    pub fn hits(&self) -> Vec<MockHit> {
        self.state.hits.lock().unwrap().clone()
    }

    /// Largest number of simultaneously open handlers observed.
    pub fn max_inflight_observed(&self) -> usize {
        self.state.max_inflight.load(Ordering::SeqCst)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.state.stop.store(true, Ordering::SeqCst);
        // Unblock the accept loop with a throwaway connection.
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.accept_thread.take() {
            let _ = t.join();
        }
    }
}

fn handle_connection(mut stream: TcpStream, state: &MockState) {
    let inflight = state.inflight.fetch_add(1, Ordering::SeqCst) + 1;
    state.max_inflight.fetch_max(inflight, Ordering::SeqCst);
    let outcome = serve_one(&mut stream, state);
    state.inflight.fetch_sub(1, Ordering::SeqCst);
    if outcome.is_some() {
        state.served.fetch_add(1, Ordering::SeqCst);
    }
}

fn serve_one(stream: &mut TcpStream, state: &MockState) -> Option<()> {
    let (headers, body) = read_request(stream)?;
    let authorization = header_value(&headers, "authorization");
    let prompt_text = extract_prompt(&body).unwrap_or_default();
    if state.handler_delay_ms > 0 {
        std::thread::sleep(std::time::Duration::from_millis(state.handler_delay_ms));
    }

    let status = state
        .statuses
        .lock()
        .unwrap()
        .pop_front()
        .unwrap_or(200);
    let index = state.hits.lock().unwrap().len();
    state.hits.lock().unwrap().push(MockHit {
        prompt_text: prompt_text.clone(),
        authorization,
        status_sent: status,
    });

    let body = if (200..300).contains(&status) {
        let content = &state.contents[index % state.contents.len()];
        let (prompt_tokens, completion_tokens) = match state.usage {
            UsageRule::Fixed { prompt, completion } => (prompt, completion),
            rule => (rule.count(&prompt_text), rule.count(content)),
        };
        json!({
            "choices": [{"message": {"role": "assistant", "content": content}}],
            "usage": {
                "prompt_tokens": prompt_tokens,
                "completion_tokens": completion_tokens,
            }
        })
        .to_string()
    } else {
        json!({"error": {"message": format!("scripted status {status}")}}).to_string()
    };

    let reason = match status {
        200 => "OK",
        401 => "Unauthorized",
        403 => "Forbidden",
        429 => "Too Many Requests",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        _ => "Status",
    };
    let response = format!(
        "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
        body.len()
    );
    stream.write_all(response.as_bytes()).ok()?;
    stream.flush().ok()?;
    Some(())
}

/// Reads one HTTP/1.1 request; returns (header block, body bytes as text).
fn read_request(stream: &mut TcpStream) -> Option<(String, String)> {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 4096];
    let header_end = loop {
        if let Some(pos) = find_header_end(&buf) {
            break pos;
        }
        let n = stream.read(&mut chunk).ok()?;
        if n == 0 {
            return None;
        }
        buf.extend_from_slice(&chunk[..n]);
    };
    let headers = String::from_utf8_lossy(&buf[..header_end]).to_string();
    let content_length: usize = header_value(&headers, "content-length")
        .and_then(|v| v.parse().ok())
        .unwrap_or(0);
    let mut body = buf[header_end + 4..].to_vec();
    while body.len() < content_length {
        let n = stream.read(&mut chunk).ok()?;
        if n == 0 {
            break;
        }
        body.extend_from_slice(&chunk[..n]);
    }
    body.truncate(content_length);
    Some((headers, String::from_utf8_lossy(&body).to_string()))
}

fn find_header_end(buf: &[u8]) -> Option<usize> {
    buf.windows(4).position(|w| w == b"\r\n\r\n")
}

fn header_value(headers: &str, name: &str) -> Option<String> {
    headers.lines().find_map(|line| {
        let (key, value) = line.split_once(':')?;
        if key.trim().eq_ignore_ascii_case(name) {
            Some(value.trim().to_string())
        } else {
            None
        }
    })
}

fn extract_prompt(body: &str) -> Option<String> {
    let value: serde_json::Value = serde_json::from_str(body).ok()?;
    let content = value.get("messages")?.as_array()?.first()?.get("content")?;
    content.as_str().map(|s| s.to_string())
}
