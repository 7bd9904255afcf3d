//! Table filtering: cut the catalog down to the tables plausibly relevant to a
//! query before any rewrite prompt is built.
//!
//! Three strategies:
//!
//! * **embedding**: a table passes if its name embedding has cosine ≥ ε with
//!   the embedding of any table the query references;
//! * **simple LLM**: the table names are sent to the LLM in packages sized to
//!   the context window, and it answers with the usable ones;
//! * **complex LLM**: the LLM invents names of ideal tables without seeing the
//!   catalog, and catalog tables within cosine γ of a suggestion pass.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Catalog;
use crate::embedkit::{cosine, NameEmbedding, VectorStore};
use crate::exec::Execution;
use crate::llmgate::{estimate_tokens, LlmError, LlmExchange, LlmGate, LlmModelSpec};
use crate::prompts;
use crate::sqlkit::QueryAnalysis;

pub const NO_TABLES_SENTINEL: &str = "No tables usable";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterStrategy {
    Embedding,
    SimpleLlm,
    ComplexLlm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub strategy: FilterStrategy,
    pub epsilon: f64,
    pub gamma: f64,
    pub expected_return_fraction: f64,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            strategy: FilterStrategy::ComplexLlm,
            epsilon: 0.4,
            gamma: 0.7,
            expected_return_fraction: 0.5,
            execution: Execution::default(),
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), FilterError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.epsilon) {
            return Err(FilterError::InvalidConfig(format!("epsilon {} outside [0,1]", self.epsilon)));
        }
        if !unit(self.gamma) {
            return Err(FilterError::InvalidConfig(format!("gamma {} outside [0,1]", self.gamma)));
        }
        if !(self.expected_return_fraction > 0.0 && self.expected_return_fraction <= 1.0) {
            return Err(FilterError::InvalidConfig(format!(
                "expected_return_fraction {} outside (0,1]",
                self.expected_return_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterResult {
    pub relevant_tables: Vec<String>,
    pub exchanges: Vec<LlmExchange>,
}

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("invalid filter config: {0}")]
    InvalidConfig(String),
    #[error("cannot extract the query's tables: {0}")]
    QueryUnparsable(String),
    #[error("table name {name:?} alone exceeds the package budget")]
    Unpackable { name: String },
    #[error(transparent)]
    Llm(#[from] LlmError),
}

/// Catalog tables whose best clamped cosine against `probes` is ≥ `threshold`,
/// in catalog order. Tables with no in-vocabulary token never pass.
pub fn threshold_scan(
    catalog: &Catalog,
    store: &VectorStore,
    probes: &[NameEmbedding],
    threshold: f64,
    execution: Execution,
) -> Vec<String> {
    let passes = execution.map(catalog.tables(), |t| {
        let e = store.embed_name(&t.prefixed_name);
        if e.is_oov() || probes.is_empty() {
            return false;
        }
        let best = probes.iter().map(|p| cosine(&e, p).max(0.0)).fold(0.0, f64::max);
        best >= threshold
    });
    catalog.tables().iter().zip(passes).filter(|(_, keep)| *keep).map(|(t, _)| t.prefixed_name.clone()).collect()
}

pub fn embedding_filter(
    catalog: &Catalog,
    analysis: &QueryAnalysis,
    store: &VectorStore,
    cfg: &FilterConfig,
) -> Result<FilterResult, FilterError> {
    cfg.validate()?;
    if !analysis.parse_ok {
        return Err(FilterError::QueryUnparsable(analysis.parse_error.clone().unwrap_or_default()));
    }
    let probes: Vec<NameEmbedding> = analysis.referenced_tables.iter().map(|t| store.embed_name(t)).collect();
    Ok(FilterResult {
        relevant_tables: threshold_scan(catalog, store, &probes, cfg.epsilon, cfg.execution),
        exchanges: Vec::new(),
    })
}

/// Tokens one name adds to a package: the name plus its `"; "` separator.
fn name_tokens(name: &str) -> usize {
    estimate_tokens(name) + 1
}

/// Greedy packing of `names`, in order, into prompt-sized packages.
///
/// A package is closed when adding the next name would break either budget:
/// `prompt + query + Σ names + max_output ≤ context_window` or
/// `Σ names · expected_return_fraction ≤ max_output`.
pub fn partition_packages<S: AsRef<str>>(
    names: &[S],
    query: &str,
    spec: &LlmModelSpec,
    cfg: &FilterConfig,
) -> Result<Vec<Vec<String>>, FilterError> {
    let fixed = prompts::overhead_tokens(prompts::SIMPLE_FILTER, &["query", "name_list"]) + estimate_tokens(query);
    let fits = |sum: usize| {
        fixed + sum + spec.max_output_tokens <= spec.context_window
            && sum as f64 * cfg.expected_return_fraction <= spec.max_output_tokens as f64
    };
    let mut packages = Vec::new();
    let mut current: Vec<String> = Vec::new();
    let mut sum = 0;
    for name in names {
        let name = name.as_ref();
        let cost = name_tokens(name);
        if !fits(cost) {
            return Err(FilterError::Unpackable { name: name.to_string() });
        }
        if !fits(sum + cost) {
            packages.push(std::mem::take(&mut current));
            sum = 0;
        }
        current.push(name.to_string());
        sum += cost;
    }
    if !current.is_empty() {
        packages.push(current);
    }
    Ok(packages)
}

/// Token budget of a package as counted by [`partition_packages`].
pub fn package_tokens<S: AsRef<str>>(package: &[S]) -> usize {
    package.iter().map(|n| name_tokens(n.as_ref())).sum()
}

fn clean_name(s: &str) -> &str {
    s.trim_matches(|c: char| c.is_whitespace() || matches!(c, '.' | '\'' | '"' | '`' | '*' | ','))
}

/// Parses a `;`-separated name list. Returns `Some(vec![])` for the
/// "No tables usable" sentinel and `None` if nothing usable is found.
pub fn parse_name_list(response: &str) -> Option<Vec<String>> {
    if clean_name(response).eq_ignore_ascii_case(NO_TABLES_SENTINEL) {
        return Some(Vec::new());
    }
    let names: Vec<String> =
        response.split([';', '\n']).map(clean_name).filter(|s| !s.is_empty()).map(str::to_string).collect();
    (!names.is_empty()).then_some(names)
}

fn in_catalog_order(catalog: &Catalog, picked: &HashSet<usize>) -> Vec<String> {
    let mut idx: Vec<usize> = picked.iter().copied().collect();
    idx.sort_unstable();
    idx.into_iter().map(|i| catalog.tables()[i].prefixed_name.clone()).collect()
}

pub fn simple_llm_filter(
    catalog: &Catalog,
    query: &str,
    gate: &LlmGate,
    spec: &LlmModelSpec,
    cfg: &FilterConfig,
) -> Result<FilterResult, FilterError> {
    cfg.validate()?;
    let names: Vec<&str> = catalog.names().collect();
    let packages = partition_packages(&names, query, spec, cfg)?;
    let replies = cfg.execution.map(&packages, |pkg| {
        let prompt = prompts::render(prompts::SIMPLE_FILTER, &[("query", query), ("name_list", &pkg.join("; "))]);
        gate.complete(spec, &prompt)
    });
    let mut picked = HashSet::new();
    let mut exchanges = Vec::with_capacity(replies.len());
    for (i, reply) in replies.into_iter().enumerate() {
        let ex = reply?;
        match parse_name_list(&ex.response) {
            None => log::warn!("package {i}: unparseable filter response {:?}", ex.response),
            Some(names) => {
                for n in names {
                    match catalog.position(&n) {
                        Some(p) => {
                            picked.insert(p);
                        }
                        None => log::info!("package {i}: dropping unknown table {n:?}"),
                    }
                }
            }
        }
        exchanges.push(ex);
    }
    Ok(FilterResult { relevant_tables: in_catalog_order(catalog, &picked), exchanges })
}

pub fn complex_llm_filter(
    catalog: &Catalog,
    query: &str,
    gate: &LlmGate,
    spec: &LlmModelSpec,
    store: &VectorStore,
    cfg: &FilterConfig,
) -> Result<FilterResult, FilterError> {
    cfg.validate()?;
    let prompt = prompts::render(prompts::COMPLEX_FILTER, &[("query", query)]);
    let ex = gate.complete(spec, &prompt)?;
    let suggestions = parse_name_list(&ex.response).unwrap_or_default();
    if suggestions.is_empty() {
        log::warn!("complex filter: no table suggestions in {:?}", ex.response);
        return Ok(FilterResult { relevant_tables: Vec::new(), exchanges: vec![ex] });
    }
    let probes: Vec<NameEmbedding> = suggestions.iter().map(|s| store.embed_name(s)).collect();
    Ok(FilterResult {
        relevant_tables: threshold_scan(catalog, store, &probes, cfg.gamma, cfg.execution),
        exchanges: vec![ex],
    })
}
