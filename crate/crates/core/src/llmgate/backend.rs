use std::time::Duration;

use serde_json::{json, Value};

use super::{estimate_tokens, BackendKind, LlmError, LlmExchange};

pub const API_URL_ENV: &str = "LLM_API_URL";
pub const API_KEY_ENV: &str = "LLM_API_KEY";
const DEFAULT_URL: &str = "https://api.openai.com/v1/chat/completions";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatReply {
    pub content: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl ChatReply {
    pub(super) fn into_exchange(self, prompt: &str, digest: String, backend: BackendKind) -> LlmExchange {
        LlmExchange {
            prompt: prompt.to_string(),
            response: self.content,
            input_tokens: self.input_tokens,
            output_tokens: self.output_tokens,
            backend,
            prompt_digest: digest,
        }
    }
}

/// A single-turn chat-completion provider.
pub trait ChatBackend: Send + Sync {
    fn chat(&self, model: &str, prompt: &str) -> Result<ChatReply, LlmError>;
}

/// OpenAI-compatible chat-completion endpoint over HTTPS.
pub struct HttpBackend {
    url: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(url: impl Into<String>, api_key: Option<String>) -> Result<Self, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| LlmError::Http(e.to_string()))?;
        Ok(HttpBackend { url: url.into(), api_key, client })
    }

    /// Reads the endpoint from `LLM_API_URL` (OpenAI by default) and the key
    /// from `LLM_API_KEY`.
    pub fn from_env() -> Result<Self, LlmError> {
        let url = std::env::var(API_URL_ENV).unwrap_or_else(|_| DEFAULT_URL.to_string());
        Self::new(url, std::env::var(API_KEY_ENV).ok())
    }

    fn post_once(&self, model: &str, prompt: &str) -> Result<ChatReply, LlmError> {
        let body = json!({
            "model": model,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut req = self.client.post(&self.url).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| LlmError::Http(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| LlmError::Http(e.to_string()))?;
        if !status.is_success() {
            return Err(LlmError::Http(format!("{status}: {}", text.chars().take(300).collect::<String>())));
        }
        parse_completion(&text)
    }
}

impl ChatBackend for HttpBackend {
    fn chat(&self, model: &str, prompt: &str) -> Result<ChatReply, LlmError> {
        match self.post_once(model, prompt) {
            Ok(r) => Ok(r),
            Err(first) => {
                log::warn!("LLM request failed, retrying once: {first}");
                self.post_once(model, prompt)
            }
        }
    }
}

pub(crate) fn parse_completion(body: &str) -> Result<ChatReply, LlmError> {
    let v: Value = serde_json::from_str(body).map_err(|e| LlmError::Http(format!("malformed response: {e}")))?;
    let content = v
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| LlmError::Http("response has no choices[0].message.content".into()))?;
    let usage = |k: &str| v.pointer(&format!("/usage/{k}")).and_then(Value::as_u64);
    Ok(ChatReply {
        content: content.to_string(),
        input_tokens: usage("prompt_tokens").unwrap_or(0),
        output_tokens: usage("completion_tokens").unwrap_or(0),
    })
}

type Responder = dyn Fn(&str) -> Result<String, String> + Send + Sync;

/// In-process stand-in for a live model. Token usage is the byte estimate of
/// the prompt and response.
pub struct ScriptedBackend {
    respond: Box<Responder>,
}

impl ScriptedBackend {
    pub fn new<F>(respond: F) -> Self
    where
        F: Fn(&str) -> Result<String, String> + Send + Sync + 'static,
    {
        ScriptedBackend { respond: Box::new(respond) }
    }
}

impl ChatBackend for ScriptedBackend {
    fn chat(&self, _model: &str, prompt: &str) -> Result<ChatReply, LlmError> {
        let content = (self.respond)(prompt).map_err(LlmError::Backend)?;
        Ok(ChatReply {
            input_tokens: estimate_tokens(prompt) as u64,
            output_tokens: estimate_tokens(&content) as u64,
            content,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_openai_shape() {
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"hi"}}],
                       "usage":{"prompt_tokens":12,"completion_tokens":3}}"#;
        let r = parse_completion(body).unwrap();
        assert_eq!(r, ChatReply { content: "hi".into(), input_tokens: 12, output_tokens: 3 });
    }

    #[test]
    fn rejects_missing_content() {
        assert!(parse_completion(r#"{"choices":[]}"#).is_err());
        assert!(parse_completion("not json").is_err());
    }

    #[test]
    fn unreachable_endpoint_errors_after_retry() {
        let b = HttpBackend::new("http://127.0.0.1:9/v1/chat/completions", None).unwrap();
        assert!(matches!(b.chat("m", "p"), Err(LlmError::Http(_))));
    }
}
