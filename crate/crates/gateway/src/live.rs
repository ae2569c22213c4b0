//! OpenAI-style `chat/completions` over blocking HTTP.

use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};

use crate::{
    ApiKey, ChatExchange, Completion, CompletionOutcome, GatewayError, LlmBackend, Role, ToolCall,
    Usage, SEARCH_TOOL,
};

/// Must be set to `1` before [`LiveConfig::from_env`] will build a config.
pub const LIVE_OPT_IN_VAR: &str = "STEXQUIZ_LIVE";
const URL_VAR: &str = "STEXQUIZ_LLM_URL";
const MODEL_VAR: &str = "STEXQUIZ_LLM_MODEL";
const KEY_VAR: &str = "STEXQUIZ_LLM_API_KEY";

#[derive(Debug, Clone)]
pub struct LiveConfig {
    /// Full URL of the chat completions endpoint.
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<ApiKey>,
    pub timeout: Duration,
    /// Extra attempts after a retryable failure.
    pub max_retries: u32,
    pub backoff: Duration,
}

impl LiveConfig {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        api_key: Option<ApiKey>,
    ) -> Self {
        LiveConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key,
            timeout: Duration::from_secs(300),
            max_retries: 2,
            backoff: Duration::from_secs(2),
        }
    }

    /// Reads endpoint, model and key from the environment. Refuses unless
    /// the opt-in variable is `1`.
    pub fn from_env() -> Result<Self, GatewayError> {
        if std::env::var(LIVE_OPT_IN_VAR).as_deref() != Ok("1") {
            return Err(GatewayError::InvalidExchange(format!(
                "live backend disabled; set {LIVE_OPT_IN_VAR}=1 to enable"
            )));
        }
        let endpoint = std::env::var(URL_VAR)
            .unwrap_or_else(|_| "https://api.openai.com/v1/chat/completions".to_owned());
        let model = std::env::var(MODEL_VAR).unwrap_or_else(|_| "gpt-4".to_owned());
        let api_key = std::env::var(KEY_VAR)
            .ok()
            .filter(|k| !k.is_empty())
            .map(ApiKey::new);
        Ok(LiveConfig::new(endpoint, model, api_key))
    }
}

pub struct LiveBackend {
    config: LiveConfig,
    client: reqwest::blocking::Client,
}

impl LiveBackend {
    pub fn new(config: LiveConfig) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| GatewayError::TransportFailure {
                message: e.to_string(),
                retryable: false,
            })?;
        Ok(LiveBackend { config, client })
    }

    pub fn config(&self) -> &LiveConfig {
        &self.config
    }

    fn attempt(
        &self,
        body: &Value,
        exchange: &ChatExchange,
    ) -> Result<CompletionOutcome, GatewayError> {
        let mut req = self.client.post(&self.config.endpoint).json(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key.expose());
        }
        let resp = req.send().map_err(|e| {
            let retryable = e.is_timeout() || e.is_connect() || e.is_request();
            GatewayError::TransportFailure {
                message: e.without_url().to_string(),
                retryable,
            }
        })?;
        let status = resp.status();
        let text = resp.text().map_err(|e| GatewayError::TransportFailure {
            message: e.without_url().to_string(),
            retryable: true,
        })?;
        if !status.is_success() {
            return Err(GatewayError::TransportFailure {
                message: format!("HTTP {}: {}", status.as_u16(), truncate(&text, 500)),
                retryable: status.as_u16() == 429 || status.is_server_error(),
            });
        }
        parse_response(&text, exchange)
    }
}

impl LlmBackend for LiveBackend {
    fn complete(&self, exchange: &ChatExchange) -> Result<CompletionOutcome, GatewayError> {
        exchange.check()?;
        let body = request_body(exchange, &self.config.model);
        let mut attempt = 0;
        loop {
            match self.attempt(&body, exchange) {
                Err(e) if e.is_retryable() && attempt < self.config.max_retries => {
                    attempt += 1;
                    std::thread::sleep(self.config.backoff * attempt);
                }
                other => return other,
            }
        }
    }

    fn describe(&self) -> String {
        format!("live:{}", self.config.model)
    }
}

fn truncate(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

/// The wire body. `model` overrides the exchange's model name so the
/// transcript keeps what the caller asked for while the provider sees its
/// own identifier.
pub(crate) fn request_body(exchange: &ChatExchange, model: &str) -> Value {
    let messages: Vec<Value> = exchange
        .messages
        .iter()
        .map(|m| {
            // tool output is spliced into the prompt, never sent as a
            // provider tool message, so it travels as user text
            let role = match m.role {
                Role::Tool => Role::User,
                r => r,
            };
            json!({ "role": role.as_str(), "content": m.text })
        })
        .collect();
    let mut body = json!({
        "model": model,
        "messages": messages,
        "temperature": exchange.params.temperature,
        "max_tokens": exchange.params.max_output_tokens,
    });
    if let Some(tool) = &exchange.tool_spec {
        body["tools"] = json!([{
            "type": "function",
            "function": {
                "name": tool.name,
                "description": tool.description,
                "parameters": {
                    "type": "object",
                    "properties": {
                        "queries": { "type": "array", "items": { "type": "string" } }
                    },
                    "required": ["queries"]
                }
            }
        }]);
    }
    body
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
    refusal: Option<String>,
    #[serde(default)]
    tool_calls: Vec<WireToolCall>,
}

#[derive(Deserialize)]
struct WireToolCall {
    function: WireFunction,
}

#[derive(Deserialize)]
struct WireFunction {
    name: String,
    arguments: String,
}

#[derive(Deserialize)]
struct WireUsage {
    prompt_tokens: usize,
    completion_tokens: usize,
}

pub(crate) fn parse_response(
    text: &str,
    exchange: &ChatExchange,
) -> Result<CompletionOutcome, GatewayError> {
    let malformed = |what: String| GatewayError::TransportFailure {
        message: format!("malformed response: {what}"),
        retryable: false,
    };
    let wire: WireResponse = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
    let choice = wire
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| malformed("no choices".into()))?;
    if let Some(refusal) = choice.message.refusal {
        return Err(GatewayError::ProviderRefusal(refusal));
    }
    if choice.finish_reason.as_deref() == Some("content_filter") {
        return Err(GatewayError::ProviderRefusal(
            choice
                .message
                .content
                .unwrap_or_else(|| "content_filter".into()),
        ));
    }
    let completion = if let Some(call) = choice.message.tool_calls.into_iter().next() {
        if exchange
            .tool_spec
            .as_ref()
            .is_none_or(|t| t.name != call.function.name)
        {
            return Err(GatewayError::UnknownTool(call.function.name));
        }
        Completion::Call(ToolCall {
            name: call.function.name,
            arguments: parse_arguments(&call.function.arguments).map_err(malformed)?,
        })
    } else {
        Completion::Text(choice.message.content.unwrap_or_default())
    };
    let mut outcome = CompletionOutcome::estimated(exchange, completion);
    if let Some(u) = wire.usage {
        outcome.usage = Usage {
            prompt_tokens: u.prompt_tokens,
            output_tokens: u.completion_tokens,
        };
    }
    Ok(outcome)
}

/// Accepts `{"queries": [...]}`, a bare array, or a single string.
fn parse_arguments(raw: &str) -> Result<Vec<String>, String> {
    let value: Value = serde_json::from_str(raw).map_err(|e| format!("tool arguments: {e}"))?;
    let list = match &value {
        Value::Object(map) => map
            .get("queries")
            .or_else(|| map.values().next())
            .cloned()
            .unwrap_or(Value::Null),
        other => other.clone(),
    };
    match list {
        Value::Array(items) => items
            .into_iter()
            .map(|v| match v {
                Value::String(s) => Ok(s),
                other => Err(format!("non-string query {other}")),
            })
            .collect(),
        Value::String(s) => Ok(vec![s]),
        other => Err(format!("unexpected {SEARCH_TOOL} arguments {other}")),
    }
}
