//! Settings resolved from command-line flags, then environment variables,
//! then a TOML file, then defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stexquiz_gateway::{ChatParams, DEFAULT_MAX_OUTPUT_TOKENS, DEFAULT_TEMPERATURE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendMode {
    /// Answer from the replay store only.
    Replay,
    /// Call the live endpoint and store every exchange.
    Record,
    /// Call the live endpoint.
    Live,
}

/// Every setting as optional, the shape shared by all three sources.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialSettings {
    pub store: Option<PathBuf>,
    pub replay: Option<PathBuf>,
    pub backend: Option<BackendMode>,
    pub model: Option<String>,
    pub temperature: Option<f64>,
    pub max_output_tokens: Option<u32>,
    pub search_tool: Option<bool>,
    pub listen: Option<String>,
    pub template: Option<PathBuf>,
    /// RFC 3339 timestamp stamped on every stored record instead of the
    /// wall clock.
    pub fixed_time: Option<String>,
}

impl PartialSettings {
    /// Fills unset fields from `lower`.
    pub fn or(self, lower: PartialSettings) -> PartialSettings {
        PartialSettings {
            store: self.store.or(lower.store),
            replay: self.replay.or(lower.replay),
            backend: self.backend.or(lower.backend),
            model: self.model.or(lower.model),
            temperature: self.temperature.or(lower.temperature),
            max_output_tokens: self.max_output_tokens.or(lower.max_output_tokens),
            search_tool: self.search_tool.or(lower.search_tool),
            listen: self.listen.or(lower.listen),
            template: self.template.or(lower.template),
            fixed_time: self.fixed_time.or(lower.fixed_time),
        }
    }

    /// Reads `STEXQUIZ_*` variables through `get`.
    pub fn from_env(get: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let parse = |var: &str| get(var).filter(|v| !v.is_empty());
        let backend = match parse("STEXQUIZ_BACKEND") {
            Some(v) => Some(
                <BackendMode as clap::ValueEnum>::from_str(&v, true)
                    .map_err(|_| ConfigError::Invalid("STEXQUIZ_BACKEND".into(), v))?,
            ),
            None => None,
        };
        let number = |var: &str| -> Result<Option<f64>, ConfigError> {
            parse(var)
                .map(|v| v.parse().map_err(|_| ConfigError::Invalid(var.into(), v)))
                .transpose()
        };
        Ok(PartialSettings {
            store: parse("STEXQUIZ_STORE").map(PathBuf::from),
            replay: parse("STEXQUIZ_REPLAY").map(PathBuf::from),
            backend,
            model: parse("STEXQUIZ_MODEL"),
            temperature: number("STEXQUIZ_TEMPERATURE")?,
            max_output_tokens: number("STEXQUIZ_MAX_OUTPUT_TOKENS")?.map(|v| v as u32),
            search_tool: parse("STEXQUIZ_SEARCH_TOOL")
                .map(|v| match v.as_str() {
                    "1" | "true" | "yes" => Ok(true),
                    "0" | "false" | "no" => Ok(false),
                    _ => Err(ConfigError::Invalid("STEXQUIZ_SEARCH_TOOL".into(), v)),
                })
                .transpose()?,
            listen: parse("STEXQUIZ_LISTEN"),
            template: parse("STEXQUIZ_TEMPLATE").map(PathBuf::from),
            fixed_time: parse("STEXQUIZ_FIXED_TIME"),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::File(path.to_owned(), e.to_string()))?;
        let mut parsed: PartialSettings =
            toml::from_str(&text).map_err(|e| ConfigError::File(path.to_owned(), e.to_string()))?;
        // relative paths in the file are relative to the file
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut parsed.store, &mut parsed.replay, &mut parsed.template]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(parsed)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{0}: invalid value `{1}`")]
    Invalid(String, String),
    #[error("config file {0}: {1}")]
    File(PathBuf, String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub store: PathBuf,
    pub replay: PathBuf,
    pub backend: BackendMode,
    pub model: String,
    pub temperature: f64,
    pub max_output_tokens: u32,
    pub search_tool: bool,
    pub listen: String,
    pub template: Option<PathBuf>,
    pub fixed_time: Option<String>,
}

impl Settings {
    pub fn resolve(partial: PartialSettings) -> Settings {
        let defaults = ChatParams::default();
        Settings {
            store: partial
                .store
                .unwrap_or_else(|| PathBuf::from("stexquiz-data")),
            replay: partial.replay.unwrap_or_else(|| PathBuf::from("replay")),
            backend: partial.backend.unwrap_or(BackendMode::Replay),
            model: partial.model.unwrap_or(defaults.model),
            temperature: partial.temperature.unwrap_or(DEFAULT_TEMPERATURE),
            max_output_tokens: partial
                .max_output_tokens
                .unwrap_or(DEFAULT_MAX_OUTPUT_TOKENS),
            search_tool: partial.search_tool.unwrap_or(true),
            listen: partial
                .listen
                .unwrap_or_else(|| "127.0.0.1:8080".to_owned()),
            template: partial.template,
            fixed_time: partial.fixed_time,
        }
    }

    pub fn chat_params(&self) -> ChatParams {
        ChatParams {
            temperature: self.temperature,
            max_output_tokens: self.max_output_tokens,
            model: self.model.clone(),
        }
    }
}
