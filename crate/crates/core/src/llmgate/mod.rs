//! The single gateway for LLM traffic.
//!
//! Every prompt goes through [`LlmGate::complete`], which enforces the
//! context-window budget, dispatches to the configured backend and logs the
//! resulting [`LlmExchange`]. Three modes exist:
//!
//! * **live**: send the prompt to a chat-completion backend;
//! * **record**: as live, and append the exchange to a fixture file;
//! * **replay**: answer from a fixture file without touching the network.
//!
//! A replay store may hold several records for one prompt digest (the same
//! prompt re-issued after a shortfall, for instance). They are served in
//! recorded order; once exhausted the last one keeps being returned.

mod backend;
mod cost;
mod fixtures;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use backend::{ChatBackend, ChatReply, HttpBackend, ScriptedBackend, API_KEY_ENV, API_URL_ENV};
pub use cost::{accumulate_cost, CostReport};
pub use fixtures::{FixtureRecord, FixtureStore, FixtureWriter};

#[derive(Debug, Error)]
pub enum LlmError {
    #[error(
        "prompt needs ~{estimated} tokens plus {max_output} output tokens, exceeding the {window}-token context window"
    )]
    ContextWindow { estimated: usize, max_output: usize, window: usize },
    #[error("no recorded response for prompt digest {digest}; nearest stored prompt: {}", nearest.as_deref().map_or("(store is empty)".to_string(), |p| format!("{p:?}")))]
    ReplayMiss { digest: String, nearest: Option<String> },
    #[error("LLM request failed: {0}")]
    Http(String),
    #[error("LLM backend error: {0}")]
    Backend(String),
    #[error("fixture store {path}: {message}")]
    Fixture { path: String, message: String },
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
}

/// Limits and prices of the model behind the gateway.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmModelSpec {
    pub model_name: String,
    pub context_window: usize,
    pub max_output_tokens: usize,
    pub input_price_per_1m: f64,
    pub output_price_per_1m: f64,
}

impl Default for LlmModelSpec {
    /// GPT-4o (2024-08-06) limits and February 2025 list prices.
    fn default() -> Self {
        LlmModelSpec {
            model_name: "gpt-4o-2024-08-06".into(),
            context_window: 128_000,
            max_output_tokens: 16_384,
            input_price_per_1m: 2.50,
            output_price_per_1m: 10.00,
        }
    }
}

impl LlmModelSpec {
    pub fn validate(&self) -> Result<(), LlmError> {
        if self.max_output_tokens >= self.context_window {
            return Err(LlmError::InvalidSpec(format!(
                "max_output_tokens ({}) must be below context_window ({})",
                self.max_output_tokens, self.context_window
            )));
        }
        if !(self.input_price_per_1m >= 0.0 && self.output_price_per_1m >= 0.0) {
            return Err(LlmError::InvalidSpec("prices must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Live,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmExchange {
    pub prompt: String,
    pub response: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub backend: BackendKind,
    pub prompt_digest: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LlmMode {
    Live,
    Record,
    Replay,
}

/// Budget heuristic: one token per four UTF-8 bytes, rounded up.
///
/// Used for batching and context-window checks only; billing always uses the
/// provider-reported usage.
pub fn estimate_tokens(text: &str) -> usize {
    text.len().div_ceil(4)
}

/// Stable SHA-256 digest of `(model_name, prompt)`, hex encoded.
pub fn prompt_digest(model_name: &str, prompt: &str) -> String {
    let mut h = Sha256::new();
    h.update(model_name.as_bytes());
    h.update([0u8]);
    h.update(prompt.as_bytes());
    hex::encode(h.finalize())
}

enum Route {
    Live(Arc<dyn ChatBackend>),
    Record { inner: Arc<dyn ChatBackend>, writer: Arc<FixtureWriter> },
    Replay(Arc<FixtureStore>),
}

impl Clone for Route {
    fn clone(&self) -> Self {
        match self {
            Route::Live(b) => Route::Live(Arc::clone(b)),
            Route::Record { inner, writer } => Route::Record { inner: Arc::clone(inner), writer: Arc::clone(writer) },
            Route::Replay(s) => Route::Replay(Arc::clone(s)),
        }
    }
}

/// Gateway handle. Cheap to [`fork`](LlmGate::fork): forks share the backend
/// and fixture store but keep their own exchange log and replay cursors, so a
/// pipeline run can account for exactly the traffic it caused.
pub struct LlmGate {
    route: Route,
    log: Mutex<Vec<LlmExchange>>,
    cursors: Mutex<HashMap<String, usize>>,
}

impl LlmGate {
    pub fn live(backend: Arc<dyn ChatBackend>) -> Self {
        Self::with_route(Route::Live(backend))
    }

    pub fn record(inner: Arc<dyn ChatBackend>, writer: Arc<FixtureWriter>) -> Self {
        Self::with_route(Route::Record { inner, writer })
    }

    pub fn replay(store: Arc<FixtureStore>) -> Self {
        Self::with_route(Route::Replay(store))
    }

    fn with_route(route: Route) -> Self {
        LlmGate { route, log: Mutex::new(Vec::new()), cursors: Mutex::new(HashMap::new()) }
    }

    pub fn mode(&self) -> LlmMode {
        match self.route {
            Route::Live(_) => LlmMode::Live,
            Route::Record { .. } => LlmMode::Record,
            Route::Replay(_) => LlmMode::Replay,
        }
    }

    pub fn fork(&self) -> Self {
        Self::with_route(self.route.clone())
    }

    /// Sends one single-turn prompt.
    pub fn complete(&self, spec: &LlmModelSpec, prompt: &str) -> Result<LlmExchange, LlmError> {
        let estimated = estimate_tokens(prompt);
        if estimated + spec.max_output_tokens > spec.context_window {
            return Err(LlmError::ContextWindow {
                estimated,
                max_output: spec.max_output_tokens,
                window: spec.context_window,
            });
        }
        let digest = prompt_digest(&spec.model_name, prompt);
        let exchange = match &self.route {
            Route::Live(backend) => {
                let reply = backend.chat(&spec.model_name, prompt)?;
                reply.into_exchange(prompt, digest, BackendKind::Live)
            }
            Route::Record { inner, writer } => {
                let reply = inner.chat(&spec.model_name, prompt)?;
                let ex = reply.into_exchange(prompt, digest, BackendKind::Live);
                writer.append(&FixtureRecord::from_exchange(&spec.model_name, &ex))?;
                ex
            }
            Route::Replay(store) => {
                let records = store.lookup(&digest).ok_or_else(|| LlmError::ReplayMiss {
                    digest: digest.clone(),
                    nearest: store.nearest_prompt(prompt).map(|p| p.chars().take(80).collect()),
                })?;
                let idx = {
                    let mut cursors = self.cursors.lock().expect("cursor lock");
                    let c = cursors.entry(digest.clone()).or_insert(0);
                    let idx = (*c).min(records.len() - 1);
                    *c += 1;
                    idx
                };
                let rec = &records[idx];
                LlmExchange {
                    prompt: prompt.to_string(),
                    response: rec.response.clone(),
                    input_tokens: rec.input_tokens,
                    output_tokens: rec.output_tokens,
                    backend: BackendKind::Replay,
                    prompt_digest: digest,
                }
            }
        };
        self.log.lock().expect("log lock").push(exchange.clone());
        Ok(exchange)
    }

    /// Every exchange issued through this handle, in completion order.
    pub fn exchanges(&self) -> Vec<LlmExchange> {
        self.log.lock().expect("log lock").clone()
    }

    pub fn exchange_count(&self) -> usize {
        self.log.lock().expect("log lock").len()
    }
}
