//! Rewrite generation over the filtered tables.
//!
//! The simple strategy shows the LLM the original SQL; the NL strategy first
//! asks for the query's intent in prose and then requests SQL for that intent.
//! Both parse the response the same way and retry once on a shortfall.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, CatalogError};
use crate::llmgate::{LlmError, LlmExchange, LlmGate, LlmModelSpec};
use crate::prompts;
use crate::sqlkit::{normalize_sql, split_statements};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewriterKind {
    Simple,
    Nl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateState {
    Raw,
    Pruned,
    Kept,
    Corrected,
    Uncorrectable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteCandidate {
    pub sql: String,
    pub origin: RewriterKind,
    pub batch_index: usize,
    pub state: CandidateState,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteRequest {
    pub original_query: String,
    pub allowed_tables: Vec<String>,
    pub n: usize,
}

#[derive(Debug, Error)]
pub enum RewriteError {
    #[error("invalid rewrite request: {0}")]
    InvalidRequest(String),
    #[error("no rewrites could be parsed from the LLM response")]
    NoRewrites,
    #[error("empty intent")]
    EmptyIntent,
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

/// Candidates plus every exchange the strategy issued.
#[derive(Debug, Clone, Default)]
pub struct RewriteOutcome {
    pub candidates: Vec<RewriteCandidate>,
    pub exchanges: Vec<LlmExchange>,
    pub intent: Option<String>,
}

const SQL_STARTS: [&str; 2] = ["select", "with"];

fn starts_like_sql(s: &str) -> bool {
    let head: String = s.chars().take_while(|c| c.is_ascii_alphabetic()).collect::<String>().to_ascii_lowercase();
    SQL_STARTS.contains(&head.as_str()) || s.starts_with('(')
}

/// Drops a leading enumeration marker such as `1.`, `2)` or `-`.
fn strip_list_marker(line: &str) -> &str {
    let t = line.trim_start();
    let digits = t.chars().take_while(char::is_ascii_digit).count();
    let rest = &t[digits..];
    if digits > 0 {
        if let Some(r) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
            return r.trim_start();
        }
        return t;
    }
    t.strip_prefix("- ").or_else(|| t.strip_prefix("* ")).unwrap_or(t)
}

/// Extracts SQL statements from a chat response.
///
/// Code fences and prose lines are removed, the rest is split on top-level
/// semicolons, and only fragments that begin like a query survive.
pub fn parse_sql_list(response: &str) -> Vec<String> {
    let mut kept = String::new();
    let mut in_statement = false;
    for line in response.lines() {
        let trimmed = line.trim();
        if trimmed.starts_with("```") {
            in_statement = false;
            kept.push_str(";\n");
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let body = strip_list_marker(trimmed);
        if starts_like_sql(body) {
            if in_statement {
                // a new statement without a separator before it
                kept.push_str(";\n");
            }
            in_statement = true;
            kept.push_str(body);
            kept.push('\n');
        } else if in_statement && !looks_like_prose(trimmed) {
            kept.push_str(line);
            kept.push('\n');
        } else if in_statement {
            in_statement = false;
            kept.push_str(";\n");
        }
        if in_statement && trimmed.ends_with(';') {
            in_statement = false;
        }
    }
    split_statements(&kept).into_iter().map(|s| s.trim().to_string()).filter(|s| starts_like_sql(s)).collect()
}

/// Heuristic for explanation lines mixed into an unterminated statement:
/// a trailing colon, or a capitalized sentence of four or more words with no
/// SQL punctuation.
fn looks_like_prose(line: &str) -> bool {
    if line.ends_with(':') {
        return true;
    }
    let words: Vec<&str> = line.split_whitespace().collect();
    let first = words.first().copied().unwrap_or("");
    let capitalized =
        first.chars().next().is_some_and(char::is_uppercase) && first.chars().skip(1).all(|c| c.is_lowercase());
    capitalized && words.len() >= 4 && !line.contains(['(', ')', ',', '=', '<', '>', '*', '\''])
}

fn dedup_extend(into: &mut Vec<String>, seen: &mut HashSet<String>, from: Vec<String>) {
    for sql in from {
        if seen.insert(normalize_sql(&sql)) {
            into.push(sql);
        }
    }
}

fn validate(req: &RewriteRequest) -> Result<(), RewriteError> {
    if req.n == 0 {
        return Err(RewriteError::InvalidRequest("n must be at least 1".into()));
    }
    if req.allowed_tables.is_empty() {
        return Err(RewriteError::InvalidRequest("no allowed tables".into()));
    }
    Ok(())
}

/// One prompt, parsed; re-issued once if fewer than `n` distinct statements
/// come back.
fn generate(
    prompt: &str,
    n: usize,
    origin: RewriterKind,
    gate: &LlmGate,
    spec: &LlmModelSpec,
    exchanges: &mut Vec<LlmExchange>,
) -> Result<Vec<RewriteCandidate>, RewriteError> {
    let mut seen = HashSet::new();
    let mut sqls = Vec::new();
    let first = gate.complete(spec, prompt)?;
    dedup_extend(&mut sqls, &mut seen, parse_sql_list(&first.response));
    exchanges.push(first);
    if sqls.len() < n {
        log::info!("{} of {n} rewrites parsed; re-issuing the prompt once", sqls.len());
        let second = gate.complete(spec, prompt)?;
        dedup_extend(&mut sqls, &mut seen, parse_sql_list(&second.response));
        exchanges.push(second);
    }
    if sqls.is_empty() {
        return Err(RewriteError::NoRewrites);
    }
    if sqls.len() < n {
        log::warn!("rewrite shortfall: {} of {n} candidates", sqls.len());
    }
    sqls.truncate(n);
    Ok(sqls
        .into_iter()
        .enumerate()
        .map(|(i, sql)| RewriteCandidate { sql, origin, batch_index: i, state: CandidateState::Raw })
        .collect())
}

pub fn simple_rewrite(
    req: &RewriteRequest,
    catalog: &Catalog,
    gate: &LlmGate,
    spec: &LlmModelSpec,
) -> Result<RewriteOutcome, RewriteError> {
    validate(req)?;
    let tables = catalog.serialize_for_prompt(&req.allowed_tables)?;
    let n = req.n.to_string();
    let prompt = prompts::render(
        prompts::SIMPLE_REWRITE,
        &[("query", &req.original_query), ("filtered_tables", &tables), ("n", &n)],
    );
    let mut exchanges = Vec::new();
    let candidates = generate(&prompt, req.n, RewriterKind::Simple, gate, spec, &mut exchanges)?;
    Ok(RewriteOutcome { candidates, exchanges, intent: None })
}

/// Asks for the query's intent in prose. The response is returned verbatim.
pub fn extract_intent(query: &str, gate: &LlmGate, spec: &LlmModelSpec) -> Result<LlmExchange, RewriteError> {
    let ex = gate.complete(spec, &prompts::render(prompts::INTENT, &[("query", query)]))?;
    if ex.response.trim().is_empty() {
        return Err(RewriteError::EmptyIntent);
    }
    Ok(ex)
}

pub fn nl_rewrite(
    req: &RewriteRequest,
    catalog: &Catalog,
    gate: &LlmGate,
    spec: &LlmModelSpec,
) -> Result<RewriteOutcome, RewriteError> {
    validate(req)?;
    let tables = catalog.serialize_for_prompt(&req.allowed_tables)?;
    let intent_ex = extract_intent(&req.original_query, gate, spec)?;
    let intent = intent_ex.response.clone();
    let n = req.n.to_string();
    let prompt = prompts::render(prompts::NL_REWRITE, &[("intent", &intent), ("filtered_tables", &tables), ("n", &n)]);
    let mut exchanges = vec![intent_ex];
    let candidates = generate(&prompt, req.n, RewriterKind::Nl, gate, spec, &mut exchanges)?;
    Ok(RewriteOutcome { candidates, exchanges, intent: Some(intent) })
}
