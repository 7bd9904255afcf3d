//! Candidate cleanup: cross-database join pruning, executability checks
//! against empty copies of the catalog tables, and the LLM correction loop.

use std::sync::Mutex;

use rusqlite::Connection;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{quote_ident, Catalog, TableSchema};
use crate::llmgate::{LlmExchange, LlmGate, LlmModelSpec};
use crate::prompts;
use crate::rewriters::parse_sql_list;
use crate::sqlkit::{analyze_query, JoinEdge};

/// Hard cap on LLM repair attempts per candidate.
pub const MAX_CORRECTION_ITERATIONS: usize = 3;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneVerdict {
    pub pruned: bool,
    pub offending_edges: Vec<JoinEdge>,
}

/// A join edge is offending when its two tables come from different source
/// databases and no declared foreign key links the two columns. SQL that does
/// not parse is never pruned; the correction loop deals with it.
pub fn prune(sql: &str, catalog: &Catalog) -> PruneVerdict {
    let analysis = analyze_query(sql);
    if !analysis.parse_ok {
        return PruneVerdict::default();
    }
    let mut offending = Vec::new();
    for edge in analysis.join_edges {
        let (Some(l), Some(r)) = (catalog.table(&edge.left_table), catalog.table(&edge.right_table)) else {
            continue;
        };
        let linked = catalog.has_foreign_key(&l.prefixed_name, &edge.left_column, &r.prefixed_name, &edge.right_column);
        if l.db_id != r.db_id && !linked {
            offending.push(edge);
        } else if !linked && l.prefixed_name != r.prefixed_name {
            log::warn!(
                "join {}.{} = {}.{} has no declared foreign key",
                edge.left_table,
                edge.left_column,
                edge.right_table,
                edge.right_column
            );
        }
    }
    PruneVerdict { pruned: !offending.is_empty(), offending_edges: offending }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("cannot open the embedded SQL engine: {0}")]
    Open(#[from] rusqlite::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedTable {
    pub table: String,
    pub error: String,
}

/// In-memory SQLite database holding an empty copy of every catalog table,
/// under its prefixed name.
pub struct SqlBackend {
    conn: Mutex<Connection>,
    created: usize,
    skipped: Vec<SkippedTable>,
}

fn create_statement(t: &TableSchema, typed: bool) -> String {
    let cols: Vec<String> = t
        .columns
        .iter()
        .map(|c| {
            if typed && !c.sql_type.is_empty() {
                format!("{} {}", quote_ident(&c.name), c.sql_type)
            } else {
                quote_ident(&c.name)
            }
        })
        .collect();
    format!("CREATE TABLE IF NOT EXISTS {} ({})", quote_ident(&t.prefixed_name), cols.join(", "))
}

impl SqlBackend {
    /// Creates every catalog table, empty. A table whose typed DDL the engine
    /// rejects is retried without column types, then skipped with a warning.
    pub fn instantiate(catalog: &Catalog) -> Result<Self, BackendError> {
        let conn = Connection::open_in_memory()?;
        let mut created = 0;
        let mut skipped = Vec::new();
        for t in catalog.tables() {
            let typed = conn.execute_batch(&create_statement(t, true));
            let result = typed.or_else(|_| conn.execute_batch(&create_statement(t, false)));
            match result {
                Ok(()) => created += 1,
                Err(e) => {
                    log::warn!("table {} skipped by the SQL engine: {e}", t.prefixed_name);
                    skipped.push(SkippedTable { table: t.prefixed_name.clone(), error: e.to_string() });
                }
            }
        }
        Ok(SqlBackend { conn: Mutex::new(conn), created, skipped })
    }

    pub fn created_count(&self) -> usize {
        self.created
    }

    pub fn skipped(&self) -> &[SkippedTable] {
        &self.skipped
    }

    /// Prepares and runs `sql`. Returns the engine's error text verbatim on
    /// failure. Statements that would modify the database are refused.
    pub fn check_executable(&self, sql: &str) -> Result<(), String> {
        let conn = self.conn.lock().expect("sql backend lock");
        let mut stmt = conn.prepare(sql).map_err(|e| e.to_string())?;
        if !stmt.readonly() {
            return Err("only read-only queries can be checked".to_string());
        }
        let mut rows = stmt.raw_query();
        while rows.next().map_err(|e| e.to_string())?.is_some() {}
        Ok(())
    }
}

pub fn check_executable(backend: &SqlBackend, sql: &str) -> Result<(), String> {
    backend.check_executable(sql)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionAttempt {
    pub sql: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionTrace {
    /// Every failing version, in order, with the engine's message.
    pub attempts: Vec<CorrectionAttempt>,
    pub final_sql: String,
    pub corrected: bool,
    /// LLM repair calls made.
    pub iterations_used: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
}

/// Tables to show the LLM: those the SQL references, or, if it does not
/// parse, catalog names that occur in its text.
fn prompt_tables(sql: &str, catalog: &Catalog) -> Vec<String> {
    let analysis = analyze_query(sql);
    let mut names: Vec<String> = if analysis.parse_ok {
        analysis.referenced_tables.iter().filter_map(|t| catalog.table(t)).map(|t| t.prefixed_name.clone()).collect()
    } else {
        let lower = sql.to_lowercase();
        let words: std::collections::HashSet<&str> =
            lower.split(|c: char| !(c.is_alphanumeric() || c == '_')).filter(|w| !w.is_empty()).collect();
        catalog
            .tables()
            .iter()
            .filter(|t| words.contains(t.prefixed_name.to_lowercase().as_str()))
            .map(|t| t.prefixed_name.clone())
            .collect()
    };
    names.dedup();
    names
}

fn extract_corrected_sql(response: &str) -> String {
    parse_sql_list(response).into_iter().next().unwrap_or_else(|| response.trim().trim_end_matches(';').to_string())
}

/// Runs the repair loop: check, and on failure hand the SQL, the schemas of
/// its tables and the verbatim error to the LLM, adopt its answer and check
/// again. Stops on success or after [`MAX_CORRECTION_ITERATIONS`] LLM calls.
pub fn correct(
    sql: &str,
    catalog: &Catalog,
    backend: &SqlBackend,
    gate: &LlmGate,
    spec: &LlmModelSpec,
) -> (CorrectionTrace, Vec<LlmExchange>) {
    let mut attempts = Vec::new();
    let mut exchanges = Vec::new();
    let mut current = sql.to_string();
    let mut aborted = None;
    let mut corrected = false;
    for iteration in 0..=MAX_CORRECTION_ITERATIONS {
        let error = match backend.check_executable(&current) {
            Ok(()) => {
                corrected = true;
                break;
            }
            Err(e) => e,
        };
        attempts.push(CorrectionAttempt { sql: current.clone(), error: error.clone() });
        if iteration == MAX_CORRECTION_ITERATIONS {
            break;
        }
        let tables = catalog.serialize_for_prompt(&prompt_tables(&current, catalog)).unwrap_or_default();
        let prompt =
            prompts::render(prompts::CORRECTION, &[("query", &current), ("tables", &tables), ("error", &error)]);
        match gate.complete(spec, &prompt) {
            Ok(ex) => {
                current = extract_corrected_sql(&ex.response);
                exchanges.push(ex);
            }
            Err(e) => {
                aborted = Some(e.to_string());
                break;
            }
        }
    }
    let trace = CorrectionTrace { iterations_used: exchanges.len(), attempts, final_sql: current, corrected, aborted };
    (trace, exchanges)
}
