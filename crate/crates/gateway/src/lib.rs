//! Chat-completion plumbing: the exchange types, a content hash used as the
//! replay key, backends (live HTTP, replay, recording, scripted) and the
//! generation session with its single search round.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

mod live;
mod replay;
mod session;

pub use live::{LiveBackend, LiveConfig, LIVE_OPT_IN_VAR};
pub use replay::{
    RecordingBackend, ReplayBackend, ReplayRecord, ReplayStore, ScriptedBackend, REPLAY_FORMAT,
};
pub use session::{
    format_search_results, run_generation_session, SessionOptions, SessionOutput, Transcript,
    TranscriptRound, SEARCH_HEADER, SEARCH_K, TOOL_INSTRUCTION, TRANSCRIPT_FORMAT,
};

pub const DEFAULT_TEMPERATURE: f64 = 1.0;
pub const DEFAULT_MAX_OUTPUT_TOKENS: u32 = 4096;
pub const SEARCH_TOOL: &str = "search";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
            Role::Tool => "tool",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub text: String,
}

impl Message {
    pub fn new(role: Role, text: impl Into<String>) -> Self {
        Message {
            role,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
}

impl ToolSpec {
    pub fn search() -> Self {
        ToolSpec {
            name: SEARCH_TOOL.to_owned(),
            description: "Search the course corpus for definitions. Takes a list of query strings and returns the \
                          best matching definitions for each."
                .to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatParams {
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub model: String,
}

impl Default for ChatParams {
    fn default() -> Self {
        ChatParams {
            temperature: DEFAULT_TEMPERATURE,
            max_output_tokens: DEFAULT_MAX_OUTPUT_TOKENS,
            model: "gpt-4".to_owned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatExchange {
    pub messages: Vec<Message>,
    #[serde(default)]
    pub tool_spec: Option<ToolSpec>,
    pub params: ChatParams,
}

impl ChatExchange {
    /// A system message may only open the conversation.
    pub fn check(&self) -> Result<(), GatewayError> {
        if self.messages.is_empty() {
            return Err(GatewayError::InvalidExchange("no messages".into()));
        }
        if let Some(i) = self
            .messages
            .iter()
            .skip(1)
            .position(|m| m.role == Role::System)
        {
            return Err(GatewayError::InvalidExchange(format!(
                "system message at position {}",
                i + 1
            )));
        }
        Ok(())
    }

    /// Hex sha256 of the canonical JSON form; see docs/replay-format.md.
    pub fn content_hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("exchanges serialize");
        hex::encode(Sha256::digest(&canonical))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCall {
    pub name: String,
    pub arguments: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Completion {
    Text(String),
    Call(ToolCall),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: usize,
    pub output_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionOutcome {
    pub completion: Completion,
    pub usage: Usage,
}

impl CompletionOutcome {
    /// Usage filled in from the byte-length estimate.
    pub fn estimated(exchange: &ChatExchange, completion: Completion) -> Self {
        let prompt = exchange
            .messages
            .iter()
            .map(|m| stexquiz_core::context::estimate_tokens(&m.text))
            .sum();
        let output = match &completion {
            Completion::Text(t) => stexquiz_core::context::estimate_tokens(t),
            Completion::Call(c) => c
                .arguments
                .iter()
                .map(|a| stexquiz_core::context::estimate_tokens(a))
                .sum(),
        };
        CompletionOutcome {
            completion,
            usage: Usage {
                prompt_tokens: prompt,
                output_tokens: output,
            },
        }
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("transport failure: {message}")]
    TransportFailure { message: String, retryable: bool },
    #[error("replay store has no exchange {0}")]
    ReplayMiss(String),
    #[error("provider refused: {0}")]
    ProviderRefusal(String),
    #[error("model asked for a second tool round")]
    ToolLoopExceeded,
    #[error("model called undeclared tool `{0}`")]
    UnknownTool(String),
    #[error("invalid exchange: {0}")]
    InvalidExchange(String),
    #[error("replay store: {0}")]
    Store(String),
    #[error(transparent)]
    Prompt(#[from] stexquiz_core::prompt::PromptError),
}

impl GatewayError {
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            GatewayError::TransportFailure {
                retryable: true,
                ..
            }
        )
    }
}

pub trait LlmBackend: Send + Sync {
    fn complete(&self, exchange: &ChatExchange) -> Result<CompletionOutcome, GatewayError>;

    /// Short label for logs and transcripts. Never includes credentials.
    fn describe(&self) -> String;
}

impl<B: LlmBackend + ?Sized> LlmBackend for Box<B> {
    fn complete(&self, exchange: &ChatExchange) -> Result<CompletionOutcome, GatewayError> {
        (**self).complete(exchange)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

impl<B: LlmBackend + ?Sized> LlmBackend for std::sync::Arc<B> {
    fn complete(&self, exchange: &ChatExchange) -> Result<CompletionOutcome, GatewayError> {
        (**self).complete(exchange)
    }

    fn describe(&self) -> String {
        (**self).describe()
    }
}

/// An API key. Debug and Display print a placeholder, and there is no
/// Serialize impl, so it cannot end up in a transcript.
#[derive(Clone)]
pub struct ApiKey(String);

impl ApiKey {
    pub fn new(key: impl Into<String>) -> Self {
        ApiKey(key.into())
    }

    pub(crate) fn expose(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ApiKey(<redacted>)")
    }
}

impl fmt::Display for ApiKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<redacted>")
    }
}
