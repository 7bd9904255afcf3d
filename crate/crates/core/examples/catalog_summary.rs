//! Prints table counts, warnings and SQL-engine instantiation results for a
//! DDL directory.
//!
//! cargo run -p qrewrite --example catalog_summary -- <ddl-dir>

use qrewrite::catalog::load_catalog;
use qrewrite::refinery::SqlBackend;

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "crates/core/fixtures/ddl".into());
    let start = std::time::Instant::now();
    let catalog = match load_catalog(&dir) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(1);
        }
    };
    println!("{} tables from {} databases in {:?}", catalog.len(), catalog.db_count(), start.elapsed());
    for w in catalog.warnings() {
        println!("warning: {w}");
    }
    let backend = SqlBackend::instantiate(&catalog).expect("in-memory sqlite");
    println!("instantiated {} tables, skipped {}", backend.created_count(), backend.skipped().len());
    for s in backend.skipped() {
        println!("skipped {}: {}", s.table, s.error);
    }
}
