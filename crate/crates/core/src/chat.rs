//! Chat-completions plumbing shared by the detection and planning backends.
//!
//! [`PromptBundle`] is the backend-neutral prompt; [`ChatRequest`] is what goes
//! on the wire. [`HttpChatClient`] talks to any chat-completions-compatible
//! endpoint; tests substitute their own [`ChatClient`].

use std::fmt::Write as _;
use std::time::Duration;

use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::detection::{ImageSpec, PayloadRef};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct UserItem {
    pub question: String,
    pub images: Vec<ImageSpec>,
}

/// A fully substituted prompt: system text, a fixed assistant example, an
/// optional previous answer, and the ordered user questions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_text: String,
    pub assistant_example: String,
    pub user_items: Vec<UserItem>,
    pub prior_detection: Option<String>,
}

impl PromptBundle {
    pub fn image_count(&self) -> usize {
        self.user_items.iter().map(|u| u.images.len()).sum()
    }

    pub fn images(&self) -> impl Iterator<Item = &ImageSpec> {
        self.user_items.iter().flat_map(|u| u.images.iter())
    }

    /// Chat messages in send order: system, assistant example, optional
    /// prior answer (assistant role), then a single multi-part user message.
    pub fn to_messages(&self) -> Vec<ChatMessage> {
        let mut msgs = vec![
            ChatMessage::text(Role::System, &self.system_text),
            ChatMessage::text(Role::Assistant, &self.assistant_example),
        ];
        if let Some(prior) = &self.prior_detection {
            msgs.push(ChatMessage::text(Role::Assistant, prior));
        }
        let mut parts = Vec::new();
        for item in &self.user_items {
            parts.extend(item.images.iter().cloned().map(ContentPart::Image));
            parts.push(ContentPart::Text(item.question.clone()));
        }
        msgs.push(ChatMessage {
            role: Role::User,
            parts,
        });
        msgs
    }

    /// Plain-text rendering used for golden files and logs.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "[system]\n{}\n", self.system_text);
        let _ = writeln!(out, "[assistant:example]\n{}\n", self.assistant_example);
        if let Some(prior) = &self.prior_detection {
            let _ = writeln!(out, "[assistant:prior]\n{prior}\n");
        }
        for (i, item) in self.user_items.iter().enumerate() {
            let _ = writeln!(out, "[user:{}]", i + 1);
            for img in &item.images {
                let _ = writeln!(
                    out,
                    "<image {}x{} detail={:?} {}>",
                    img.width,
                    img.height,
                    img.detail,
                    payload_label(&img.payload)
                );
            }
            let _ = writeln!(out, "{}", item.question);
        }
        out
    }
}

fn payload_label(p: &PayloadRef) -> String {
    match p {
        PayloadRef::File(path) => format!("file:{}", path.display()),
        PayloadRef::Symbolic(s) => s.clone(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    Assistant,
    User,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ContentPart {
    Text(String),
    Image(ImageSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatMessage {
    pub role: Role,
    pub parts: Vec<ContentPart>,
}

impl ChatMessage {
    pub fn text(role: Role, text: &str) -> Self {
        Self {
            role,
            parts: vec![ContentPart::Text(text.to_string())],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<ChatMessage>,
}

impl ChatRequest {
    /// Temperature is pinned to 0 so repeated calls stay deterministic.
    pub fn from_bundle(model: &str, bundle: &PromptBundle) -> Self {
        Self {
            model: model.to_string(),
            temperature: 0.0,
            messages: bundle.to_messages(),
        }
    }

    /// JSON body in chat-completions format. Images are inlined as base64.
    pub fn to_json(&self) -> Result<Value, ChatError> {
        let mut messages = Vec::with_capacity(self.messages.len());
        for m in &self.messages {
            let content = match m.parts.as_slice() {
                [ContentPart::Text(t)] => Value::String(t.clone()),
                parts => Value::Array(
                    parts
                        .iter()
                        .map(|p| match p {
                            ContentPart::Text(t) => Ok(json!({"type": "text", "text": t})),
                            ContentPart::Image(img) => Ok(json!({
                                "type": "image_url",
                                "image_url": {"url": data_url(&img.payload)?, "detail": img.detail},
                            })),
                        })
                        .collect::<Result<Vec<_>, ChatError>>()?,
                ),
            };
            messages.push(json!({"role": m.role, "content": content}));
        }
        Ok(json!({
            "model": self.model,
            "temperature": self.temperature,
            "messages": messages,
        }))
    }
}

fn data_url(payload: &PayloadRef) -> Result<String, ChatError> {
    let b64 = base64::engine::general_purpose::STANDARD;
    match payload {
        PayloadRef::File(path) => {
            let bytes = std::fs::read(path)
                .map_err(|e| ChatError::Request(format!("{}: {e}", path.display())))?;
            let mime = match path.extension().and_then(|e| e.to_str()) {
                Some("jpg" | "jpeg") => "image/jpeg",
                Some("webp") => "image/webp",
                Some("gif") => "image/gif",
                _ => "image/png",
            };
            Ok(format!("data:{mime};base64,{}", b64.encode(bytes)))
        }
        PayloadRef::Symbolic(s) => Ok(format!("data:text/plain;base64,{}", b64.encode(s))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatReply {
    pub text: String,
    pub prompt_tokens: Option<u32>,
    pub completion_tokens: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChatError {
    #[error("request timed out")]
    Timeout,
    #[error("malformed reply: {0}")]
    Protocol(String),
    #[error("http status {0}")]
    Status(u16),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("could not build request: {0}")]
    Request(String),
}

pub trait ChatClient: Send {
    fn complete(&self, request: &ChatRequest) -> Result<ChatReply, ChatError>;
}

/// Extracts the reply text and usage from a chat-completions response body.
pub fn parse_reply(body: &str) -> Result<ChatReply, ChatError> {
    let v: Value = serde_json::from_str(body).map_err(|e| ChatError::Protocol(e.to_string()))?;
    let text = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| ChatError::Protocol("missing choices[0].message.content".into()))?;
    let usage = |k: &str| {
        v.pointer(&format!("/usage/{k}"))
            .and_then(Value::as_u64)
            .map(|n| n as u32)
    };
    Ok(ChatReply {
        text: text.to_string(),
        prompt_tokens: usage("prompt_tokens"),
        completion_tokens: usage("completion_tokens"),
    })
}

#[derive(Clone, PartialEq)]
pub struct LlmEndpoint {
    pub url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout: Duration,
}

impl std::fmt::Debug for LlmEndpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LlmEndpoint")
            .field("url", &self.url)
            .field("model", &self.model)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("timeout", &self.timeout)
            .finish()
    }
}

impl LlmEndpoint {
    pub const DEFAULT_URL: &'static str = "https://api.openai.com/v1/chat/completions";

    /// Reads `ASSIST_LLM_URL`, `ASSIST_LLM_MODEL` and `ASSIST_LLM_API_KEY`
    /// (falling back to `OPENAI_API_KEY`).
    pub fn from_env(default_model: &str) -> Self {
        Self {
            url: std::env::var("ASSIST_LLM_URL").unwrap_or_else(|_| Self::DEFAULT_URL.into()),
            model: std::env::var("ASSIST_LLM_MODEL").unwrap_or_else(|_| default_model.into()),
            api_key: std::env::var("ASSIST_LLM_API_KEY")
                .or_else(|_| std::env::var("OPENAI_API_KEY"))
                .ok(),
            timeout: Duration::from_secs(60),
        }
    }
}

/// Blocking chat-completions client.
pub struct HttpChatClient {
    agent: ureq::Agent,
    endpoint: LlmEndpoint,
}

impl std::fmt::Debug for HttpChatClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // The key stays out of debug output.
        f.debug_struct("HttpChatClient")
            .field("url", &self.endpoint.url)
            .field("model", &self.endpoint.model)
            .finish_non_exhaustive()
    }
}

impl HttpChatClient {
    pub fn new(endpoint: LlmEndpoint) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(endpoint.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { agent, endpoint }
    }

    pub fn model(&self) -> &str {
        &self.endpoint.model
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&self, request: &ChatRequest) -> Result<ChatReply, ChatError> {
        let body = request.to_json()?;
        let mut req = self
            .agent
            .post(&self.endpoint.url)
            .header("Content-Type", "application/json");
        if let Some(key) = &self.endpoint.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(&body).map_err(map_ureq_error)?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(map_ureq_error)?;
        if !(200..300).contains(&status) {
            return Err(ChatError::Status(status));
        }
        parse_reply(&text)
    }
}

fn map_ureq_error(e: ureq::Error) -> ChatError {
    match e {
        ureq::Error::Timeout(_) => ChatError::Timeout,
        ureq::Error::Io(io) if io.kind() == std::io::ErrorKind::TimedOut => ChatError::Timeout,
        ureq::Error::StatusCode(code) => ChatError::Status(code),
        ureq::Error::Protocol(p) => ChatError::Protocol(p.to_string()),
        other => ChatError::Transport(other.to_string()),
    }
}
