//! Uniform chat-completion interface with tool calling.
//!
//! Four providers implement [`ModelProvider`]: a remote client speaking the
//! widely adopted chat-completions wire protocol, a scripted provider for
//! offline tests, a recorder that captures every exchange into a
//! [`Transcript`], and a replayer that serves a recorded transcript back —
//! making entire verification runs reproducible without network access.

mod remote;
mod replay;
mod scripted;
mod transcript;

pub use remote::RemoteProvider;
pub use replay::{Recorder, Replayer};
pub use scripted::ScriptedProvider;
pub use transcript::{Transcript, TranscriptEntry, TRANSCRIPT_FORMAT_VERSION};

use crate::tools::{ToolCall, ToolSchema};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::ops::{Add, AddAssign};
use std::sync::{Arc, Mutex};
use thiserror::Error;

/// Message role in a chat conversation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
            Role::Tool => "tool",
        }
    }
}

/// One chat message. Tool calls appear only on assistant messages; tool
/// results carry the id of the call they answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call_id: Option<String>,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
            tool_calls: Vec::new(),
            tool_call_id: None,
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            ..Self::system(content)
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            ..Self::system(content)
        }
    }

    pub fn assistant_tool_calls(content: impl Into<String>, tool_calls: Vec<ToolCall>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: content.into(),
            tool_calls,
            tool_call_id: None,
        }
    }

    pub fn tool(call_id: impl Into<String>, content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Tool,
            content: content.into(),
            tool_calls: Vec::new(),
            tool_call_id: Some(call_id.into()),
        }
    }
}

/// Sampling knobs. Defaults to temperature 0 so runs stay as deterministic
/// as the provider allows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub max_output_tokens: u32,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams {
            temperature: 0.0,
            max_output_tokens: 4096,
        }
    }
}

/// One completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRequest {
    pub model_id: String,
    pub messages: Vec<ChatMessage>,
    pub tools: Vec<ToolSchema>,
    pub sampling: SamplingParams,
}

impl ModelRequest {
    /// Checks the message-shape invariants providers rely on.
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.messages.is_empty() {
            return Err(GatewayError::InvalidRequest("messages are empty".into()));
        }
        if self.messages[0].role != Role::System {
            return Err(GatewayError::InvalidRequest(
                "first message must have the system role".into(),
            ));
        }
        for (i, msg) in self.messages.iter().enumerate() {
            if msg.role == Role::Tool && msg.tool_call_id.is_none() {
                return Err(GatewayError::InvalidRequest(format!(
                    "tool message at index {i} has no tool_call_id"
                )));
            }
            if !msg.tool_calls.is_empty() && msg.role != Role::Assistant {
                return Err(GatewayError::InvalidRequest(format!(
                    "message at index {i} carries tool_calls but is not an assistant message"
                )));
            }
        }
        Ok(())
    }
}

/// Token counts reported by a provider (zeros for scripted runs).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Usage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl Add for Usage {
    type Output = Usage;
    fn add(self, rhs: Usage) -> Usage {
        Usage {
            input_tokens: self.input_tokens + rhs.input_tokens,
            output_tokens: self.output_tokens + rhs.output_tokens,
        }
    }
}

impl AddAssign for Usage {
    fn add_assign(&mut self, rhs: Usage) {
        *self = *self + rhs;
    }
}

/// One completion: exactly one assistant message plus usage accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub message: ChatMessage,
    pub usage: Usage,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("provider error: {0}")]
    Provider(String),
    #[error("environment variable `{0}` is not set")]
    MissingEnv(String),
    #[error("replay miss at entry {position}: expected fingerprint {expected}, got {actual}")]
    ReplayMiss {
        position: usize,
        expected: String,
        actual: String,
    },
    #[error("transcript exhausted: no recorded entry left for fingerprint {actual}")]
    ReplayExhausted { actual: String },
    #[error("transcript error: {0}")]
    Transcript(String),
    #[error("no script staged for agent `{agent}` at this point of the conversation")]
    ScriptMiss { agent: String },
}

/// A chat-completion backend. Implementations must be safe for concurrent
/// `complete` calls.
pub trait ModelProvider: Send + Sync {
    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, GatewayError>;
}

impl<P: ModelProvider + ?Sized> ModelProvider for Arc<P> {
    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, GatewayError> {
        (**self).complete(request)
    }
}

/// Stable content hash of a request: model id, message roles and contents,
/// requested tool names, and any tool calls embedded in the history.
/// Sampling parameters are deliberately excluded, so recordings survive
/// temperature tweaks.
pub fn fingerprint(request: &ModelRequest) -> String {
    let mut hasher = Sha256::new();
    let mut put = |tag: &str, data: &str| {
        hasher.update(tag.as_bytes());
        hasher.update((data.len() as u64).to_le_bytes());
        hasher.update(data.as_bytes());
    };
    put("model", &request.model_id);
    for msg in &request.messages {
        put("role", msg.role.as_str());
        put("content", &msg.content);
        if let Some(id) = &msg.tool_call_id {
            put("tool_call_id", id);
        }
        for call in &msg.tool_calls {
            put("call_tool", &call.tool);
            // serde_json maps are key-sorted, so this is canonical
            put(
                "call_args",
                &serde_json::to_string(&call.arguments).expect("arguments serialize"),
            );
        }
    }
    for tool in &request.tools {
        put("tool", &tool.name);
    }
    hex::encode(hasher.finalize())
}

pub(crate) fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Accumulates per-model token usage across all providers in a run.
#[derive(Default)]
pub struct UsageMeter {
    per_model: Mutex<indexmap::IndexMap<String, Usage>>,
}

impl UsageMeter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, model_id: &str, usage: Usage) {
        let mut map = self.per_model.lock().expect("meter lock poisoned");
        *map.entry(model_id.to_string()).or_default() += usage;
    }

    pub fn totals(&self) -> Usage {
        self.per_model
            .lock()
            .expect("meter lock poisoned")
            .values()
            .fold(Usage::default(), |acc, u| acc + *u)
    }

    pub fn per_model(&self) -> indexmap::IndexMap<String, Usage> {
        self.per_model.lock().expect("meter lock poisoned").clone()
    }

    pub fn reset(&self) {
        self.per_model.lock().expect("meter lock poisoned").clear();
    }
}

/// Wraps a provider so every completion's usage lands in a shared meter.
pub struct MeteredProvider {
    inner: Arc<dyn ModelProvider>,
    meter: Arc<UsageMeter>,
}

impl MeteredProvider {
    pub fn new(inner: Arc<dyn ModelProvider>, meter: Arc<UsageMeter>) -> Self {
        MeteredProvider { inner, meter }
    }
}

impl ModelProvider for MeteredProvider {
    fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, GatewayError> {
        let response = self.inner.complete(request)?;
        self.meter.record(&request.model_id, response.usage);
        Ok(response)
    }
}

#[cfg(test)]
pub(crate) fn simple_request(model_id: &str, user: &str) -> ModelRequest {
    ModelRequest {
        model_id: model_id.to_string(),
        messages: vec![ChatMessage::system("sys"), ChatMessage::user(user)],
        tools: Vec::new(),
        sampling: SamplingParams::default(),
    }
}
