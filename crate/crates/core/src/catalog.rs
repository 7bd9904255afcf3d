//! The catalog of available tables.
//!
//! Tables are loaded from a directory of DDL files. Each file holds one source
//! schema; its tables are exposed under the prefixed name
//! `<db_id>_<TableName>`, where `db_id` is the file stem. In the layout where
//! every schema lives in `<db_id>/schema.sql`, the directory name is used
//! instead of the generic stem.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sqlparser::ast::{ColumnOption, CreateTable, Expr, ObjectName, Statement, TableConstraint};
use sqlparser::dialect::{GenericDialect, SQLiteDialect};
use sqlparser::parser::Parser;
use thiserror::Error;

use crate::sqlkit::split_statements;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: String,
    pub sql_type: String,
    pub is_primary_key: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForeignKey {
    pub from_table: String,
    pub from_column: String,
    pub to_table: String,
    pub to_column: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableSchema {
    pub prefixed_name: String,
    pub db_id: String,
    pub base_name: String,
    pub columns: Vec<ColumnDef>,
    pub foreign_keys: Vec<ForeignKey>,
}

impl TableSchema {
    pub fn column(&self, name: &str) -> Option<&ColumnDef> {
        self.columns.iter().find(|c| c.name.eq_ignore_ascii_case(name))
    }

    /// Renders the table back to a `CREATE TABLE` statement using its base name.
    pub fn to_ddl(&self) -> String {
        let mut parts: Vec<String> = self
            .columns
            .iter()
            .map(|c| format!("  {} {}", quote_ident(&c.name), c.sql_type).trim_end().to_string())
            .collect();
        let pk: Vec<String> = self.columns.iter().filter(|c| c.is_primary_key).map(|c| quote_ident(&c.name)).collect();
        if !pk.is_empty() {
            parts.push(format!("  PRIMARY KEY ({})", pk.join(", ")));
        }
        for fk in &self.foreign_keys {
            let target = fk.to_table.strip_prefix(&format!("{}_", self.db_id)).unwrap_or(&fk.to_table);
            parts.push(format!(
                "  FOREIGN KEY ({}) REFERENCES {}({})",
                quote_ident(&fk.from_column),
                quote_ident(target),
                quote_ident(&fk.to_column)
            ));
        }
        format!("CREATE TABLE {} (\n{}\n);\n", quote_ident(&self.base_name), parts.join(",\n"))
    }
}

pub(crate) fn quote_ident(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

/// Where a statement came from: file and 1-based statement index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceLocation {
    pub file: PathBuf,
    pub statement: usize,
}

impl fmt::Display for SourceLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (statement {})", self.file.display(), self.statement)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub location: SourceLocation,
    pub statement: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}\n    {}", self.location, self.message, self.statement.replace('\n', "\n    "))
    }
}

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{} unparsable CREATE TABLE statement(s):\n{}", .0.len(), format_diagnostics(.0))]
    Unparsable(Vec<Diagnostic>),
    #[error("duplicate table {name}: defined at {first} and at {second}")]
    Duplicate { name: String, first: SourceLocation, second: SourceLocation },
    #[error("unknown table {0}")]
    UnknownTable(String),
}

fn format_diagnostics(d: &[Diagnostic]) -> String {
    d.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n")
}

/// Immutable set of available tables, in load order (files sorted by path,
/// then statement order).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Catalog {
    tables: Vec<TableSchema>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    db_count: usize,
    #[serde(skip)]
    warnings: Vec<String>,
}

impl PartialEq for Catalog {
    fn eq(&self, other: &Self) -> bool {
        self.tables == other.tables && self.db_count == other.db_count
    }
}

impl Catalog {
    /// Builds a catalog from already-prefixed tables. Foreign keys whose
    /// endpoints do not resolve are dropped with a warning.
    pub fn from_tables(tables: Vec<TableSchema>) -> Result<Self, CatalogError> {
        let mut index = HashMap::new();
        for (i, t) in tables.iter().enumerate() {
            if index.insert(t.prefixed_name.to_lowercase(), i).is_some() {
                let loc = SourceLocation { file: PathBuf::from("<memory>"), statement: i + 1 };
                return Err(CatalogError::Duplicate { name: t.prefixed_name.clone(), first: loc.clone(), second: loc });
            }
        }
        let db_count = tables.iter().map(|t| t.db_id.as_str()).collect::<BTreeSet<_>>().len();
        let mut catalog = Catalog { tables, index, db_count, warnings: Vec::new() };
        catalog.drop_dangling_foreign_keys();
        Ok(catalog)
    }

    fn drop_dangling_foreign_keys(&mut self) {
        let mut warnings = Vec::new();
        let snapshot = self.clone();
        for t in &mut self.tables {
            t.foreign_keys.retain(|fk| {
                let ok = snapshot.table(&fk.from_table).is_some_and(|s| s.column(&fk.from_column).is_some())
                    && snapshot.table(&fk.to_table).is_some_and(|s| s.column(&fk.to_column).is_some());
                if !ok {
                    warnings.push(format!(
                        "dropping foreign key {}.{} -> {}.{}: endpoint does not exist",
                        fk.from_table, fk.from_column, fk.to_table, fk.to_column
                    ));
                }
                ok
            });
        }
        for w in &warnings {
            log::warn!("{w}");
        }
        self.warnings.extend(warnings);
    }

    pub fn tables(&self) -> &[TableSchema] {
        &self.tables
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn db_count(&self) -> usize {
        self.db_count
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Case-insensitive lookup by prefixed name.
    pub fn table(&self, name: &str) -> Option<&TableSchema> {
        self.index.get(&name.to_lowercase()).map(|&i| &self.tables[i])
    }

    /// Catalog position of a table, used to normalize result order.
    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(&name.to_lowercase()).copied()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tables.iter().map(|t| t.prefixed_name.as_str())
    }

    /// True when a declared foreign key links the two columns in either direction.
    pub fn has_foreign_key(&self, t1: &str, c1: &str, t2: &str, c2: &str) -> bool {
        let matches = |fk: &ForeignKey, ft: &str, fc: &str, tt: &str, tc: &str| {
            fk.from_table.eq_ignore_ascii_case(ft)
                && fk.from_column.eq_ignore_ascii_case(fc)
                && fk.to_table.eq_ignore_ascii_case(tt)
                && fk.to_column.eq_ignore_ascii_case(tc)
        };
        let check = |owner: &str, ft: &str, fc: &str, tt: &str, tc: &str| {
            self.table(owner).is_some_and(|t| t.foreign_keys.iter().any(|fk| matches(fk, ft, fc, tt, tc)))
        };
        check(t1, t1, c1, t2, c2) || check(t2, t2, c2, t1, c1)
    }

    /// Serializes the named tables in the prompt format
    /// `table: col type, col type` plus an optional `Foreign keys:` line.
    pub fn serialize_for_prompt<S: AsRef<str>>(&self, names: &[S]) -> Result<String, CatalogError> {
        let mut blocks = Vec::with_capacity(names.len());
        for name in names {
            let name = name.as_ref();
            let t = self.table(name).ok_or_else(|| CatalogError::UnknownTable(name.to_string()))?;
            let cols: Vec<String> = t
                .columns
                .iter()
                .map(|c| if c.sql_type.is_empty() { c.name.clone() } else { format!("{} {}", c.name, c.sql_type) })
                .collect();
            let mut block = format!("{}: {}", t.prefixed_name, cols.join(", "));
            if !t.foreign_keys.is_empty() {
                let fks: Vec<String> = t
                    .foreign_keys
                    .iter()
                    .map(|fk| format!("{} references {}({})", fk.from_column, fk.to_table, fk.to_column))
                    .collect();
                block.push_str("\nForeign keys: ");
                block.push_str(&fks.join("; "));
            }
            blocks.push(block);
        }
        Ok(blocks.join("\n\n"))
    }
}

/// Loads every `.sql` file below `dir` (recursively, sorted by path).
pub fn load_catalog(dir: impl AsRef<Path>) -> Result<Catalog, CatalogError> {
    let dir = dir.as_ref();
    let mut files = Vec::new();
    collect_sql_files(dir, &mut files)?;
    files.sort();

    let mut tables: Vec<TableSchema> = Vec::new();
    let mut origins: HashMap<String, SourceLocation> = HashMap::new();
    let mut diagnostics = Vec::new();
    let mut pending_fks: Vec<(usize, RawForeignKey)> = Vec::new();

    for file in &files {
        let text = fs::read_to_string(file).map_err(|source| CatalogError::Io { path: file.clone(), source })?;
        let db_id = db_id_for(file);
        for (i, stmt) in split_statements(&text).into_iter().enumerate() {
            if !is_create_table(stmt) {
                continue;
            }
            let location = SourceLocation { file: file.clone(), statement: i + 1 };
            let parsed = match parse_create_table(stmt) {
                Ok(p) => p,
                Err(message) => {
                    diagnostics.push(Diagnostic { location, statement: stmt.to_string(), message });
                    continue;
                }
            };
            let prefixed = format!("{db_id}_{}", parsed.name);
            let key = prefixed.to_lowercase();
            if let Some(first) = origins.get(&key) {
                return Err(CatalogError::Duplicate { name: prefixed, first: first.clone(), second: location });
            }
            origins.insert(key, location);
            let idx = tables.len();
            pending_fks.extend(parsed.foreign_keys.into_iter().map(|fk| (idx, fk)));
            tables.push(TableSchema {
                prefixed_name: prefixed,
                db_id: db_id.clone(),
                base_name: parsed.name,
                columns: parsed.columns,
                foreign_keys: Vec::new(),
            });
        }
    }
    if !diagnostics.is_empty() {
        return Err(CatalogError::Unparsable(diagnostics));
    }

    // Resolve FK targets within the owning schema.
    let lookup: HashMap<(String, String), usize> =
        tables.iter().enumerate().map(|(i, t)| ((t.db_id.to_lowercase(), t.base_name.to_lowercase()), i)).collect();
    let mut warnings = Vec::new();
    for (idx, raw) in pending_fks {
        let db = tables[idx].db_id.to_lowercase();
        let Some(&target) = lookup.get(&(db, raw.to_table.to_lowercase())) else {
            warnings.push(format!(
                "{}: foreign key references missing table {}; dropped",
                tables[idx].prefixed_name, raw.to_table
            ));
            continue;
        };
        let to_cols = if raw.to_columns.is_empty() {
            tables[target].columns.iter().filter(|c| c.is_primary_key).map(|c| c.name.clone()).collect()
        } else {
            raw.to_columns
        };
        if to_cols.len() != raw.from_columns.len() {
            warnings.push(format!(
                "{}: foreign key column count mismatch towards {}; dropped",
                tables[idx].prefixed_name, raw.to_table
            ));
            continue;
        }
        let to_table = tables[target].prefixed_name.clone();
        let from_table = tables[idx].prefixed_name.clone();
        for (fc, tc) in raw.from_columns.into_iter().zip(to_cols) {
            let fk = ForeignKey {
                from_table: from_table.clone(),
                from_column: fc,
                to_table: to_table.clone(),
                to_column: tc,
            };
            if !tables[idx].foreign_keys.contains(&fk) {
                tables[idx].foreign_keys.push(fk);
            }
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }

    let mut catalog = Catalog::from_tables(tables)?;
    warnings.append(&mut catalog.warnings);
    catalog.warnings = warnings;
    Ok(catalog)
}

fn collect_sql_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), CatalogError> {
    let entries = fs::read_dir(dir).map_err(|source| CatalogError::Io { path: dir.to_path_buf(), source })?;
    for entry in entries {
        let path = entry.map_err(|source| CatalogError::Io { path: dir.to_path_buf(), source })?.path();
        if path.is_dir() {
            collect_sql_files(&path, out)?;
        } else if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("sql")) {
            out.push(path);
        }
    }
    Ok(())
}

fn db_id_for(file: &Path) -> String {
    let stem = file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    if stem.eq_ignore_ascii_case("schema") {
        if let Some(parent) = file.parent().and_then(|p| p.file_name()) {
            return parent.to_string_lossy().into_owned();
        }
    }
    stem
}

fn is_create_table(stmt: &str) -> bool {
    let words: Vec<String> =
        strip_leading_comments(stmt).split_whitespace().take(4).map(|w| w.to_ascii_uppercase()).collect();
    match words.as_slice() {
        [c, t, ..] if c == "CREATE" && t == "TABLE" => true,
        [c, tmp, t, ..] if c == "CREATE" && (tmp == "TEMP" || tmp == "TEMPORARY") && t == "TABLE" => true,
        _ => false,
    }
}

fn strip_leading_comments(mut s: &str) -> &str {
    loop {
        s = s.trim_start();
        if let Some(rest) = s.strip_prefix("--") {
            s = rest.split_once('\n').map(|(_, r)| r).unwrap_or("");
        } else if let Some(rest) = s.strip_prefix("/*") {
            s = rest.split_once("*/").map(|(_, r)| r).unwrap_or("");
        } else {
            return s;
        }
    }
}

struct RawForeignKey {
    from_columns: Vec<String>,
    to_table: String,
    to_columns: Vec<String>,
}

struct ParsedTable {
    name: String,
    columns: Vec<ColumnDef>,
    foreign_keys: Vec<RawForeignKey>,
}

fn last_ident(name: &ObjectName) -> String {
    name.0.last().and_then(|p| p.as_ident()).map(|i| i.value.clone()).unwrap_or_else(|| name.to_string())
}

fn parse_create_table(stmt: &str) -> Result<ParsedTable, String> {
    let statements = Parser::parse_sql(&SQLiteDialect {}, stmt)
        .or_else(|_| Parser::parse_sql(&GenericDialect {}, stmt))
        .map_err(|e| e.to_string())?;
    let create = match statements.as_slice() {
        [Statement::CreateTable(ct)] => ct,
        _ => return Err("expected a single CREATE TABLE statement".into()),
    };
    table_from_ast(stmt, create)
}

fn table_from_ast(stmt: &str, create: &CreateTable) -> Result<ParsedTable, String> {
    let name = last_ident(&create.name);
    let mut columns: Vec<ColumnDef> = Vec::new();
    let mut foreign_keys = Vec::new();
    for col in &create.columns {
        if columns.iter().any(|c| c.name.eq_ignore_ascii_case(&col.name.value)) {
            return Err(format!("duplicate column {}", col.name.value));
        }
        if col.name.value.is_empty() {
            return Err("empty column name".into());
        }
        let mut is_pk = false;
        for opt in &col.options {
            match &opt.option {
                ColumnOption::PrimaryKey(_) => is_pk = true,
                ColumnOption::ForeignKey(fk) => foreign_keys.push(RawForeignKey {
                    from_columns: vec![col.name.value.clone()],
                    to_table: last_ident(&fk.foreign_table),
                    to_columns: fk.referred_columns.iter().map(|c| c.value.clone()).collect(),
                }),
                _ => {}
            }
        }
        columns.push(ColumnDef {
            name: col.name.value.clone(),
            sql_type: raw_type(stmt, &col.name, &col.data_type.to_string()),
            is_primary_key: is_pk,
        });
    }
    if columns.is_empty() {
        return Err("table declares no columns".into());
    }
    for constraint in &create.constraints {
        match constraint {
            TableConstraint::PrimaryKey(pk) => {
                for ic in &pk.columns {
                    if let Expr::Identifier(id) = &ic.column.expr {
                        if let Some(c) = columns.iter_mut().find(|c| c.name.eq_ignore_ascii_case(&id.value)) {
                            c.is_primary_key = true;
                        }
                    }
                }
            }
            TableConstraint::ForeignKey(fk) => foreign_keys.push(RawForeignKey {
                from_columns: fk.columns.iter().map(|c| c.value.clone()).collect(),
                to_table: last_ident(&fk.foreign_table),
                to_columns: fk.referred_columns.iter().map(|c| c.value.clone()).collect(),
            }),
            _ => {}
        }
    }
    Ok(ParsedTable { name, columns, foreign_keys })
}

// Recovers the declared type text as written, e.g. `varchar(20)` rather than
// the parser's canonical `VARCHAR(20)`. Falls back to the canonical rendering
// when the source spelling cannot be located.
fn raw_type(stmt: &str, column: &sqlparser::ast::Ident, canonical: &str) -> String {
    if canonical.is_empty() {
        return String::new();
    }
    let end = column.span.end;
    let Some(offset) = byte_offset(stmt, end.line, end.column) else {
        return canonical.to_string();
    };
    let rest = stmt[offset..].trim_start();
    let candidate: String = rest.chars().take(canonical.chars().count()).collect();
    if candidate.eq_ignore_ascii_case(canonical) {
        candidate
    } else {
        canonical.to_string()
    }
}

fn byte_offset(text: &str, line: u64, column: u64) -> Option<usize> {
    if line == 0 {
        return None;
    }
    let mut line_start = 0;
    for _ in 1..line {
        line_start += text[line_start..].find('\n')? + 1;
    }
    let line_text = &text[line_start..];
    let col = (column as usize).saturating_sub(1);
    let within = line_text.char_indices().nth(col).map(|(i, _)| i).unwrap_or(line_text.len());
    Some(line_start + within)
}
