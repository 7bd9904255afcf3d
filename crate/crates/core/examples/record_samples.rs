//! Records the replay fixture for the three sample queries under every
//! configuration in `CONFIGS`, using the scripted model.
//!
//! cargo run -p qrewrite --example record_samples [-- --check]

use std::path::Path;
use std::sync::Arc;

use qrewrite::catalog::load_catalog;
use qrewrite::embedkit::load_vectors;
use qrewrite::exec::Execution;
use qrewrite::llmgate::{FixtureWriter, LlmGate, LlmMode};
use qrewrite::pipeline::Engine;

#[path = "../tests/support/samples.rs"]
mod samples;

fn record(out: &Path) {
    let catalog = Arc::new(load_catalog(samples::ddl_dir()).expect("catalog"));
    let store = Arc::new(load_vectors(samples::vectors_path()).expect("vectors"));
    let writer = Arc::new(FixtureWriter::create(out).expect("fixture file"));
    for name in samples::CONFIGS {
        for (label, query) in samples::QUERIES {
            // sequential, so the file order is stable
            let mut cfg = samples::config(name).with_execution(Execution::Sequential);
            cfg.llm_mode = LlmMode::Record;
            let gate = LlmGate::record(Arc::new(samples::backend()), Arc::clone(&writer));
            let engine = Engine::with_parts(cfg, Arc::clone(&catalog), Arc::clone(&store), gate).expect("engine");
            let report = engine.run(query).expect("pipeline run");
            println!(
                "{name:>24} {label}: {} raw, {} ranked, {} pruned, {} uncorrectable, {} LLM calls",
                report.raw_candidates,
                report.ranked.len(),
                report.pruned,
                report.uncorrectable,
                report.exchanges.len()
            );
        }
    }
}

fn main() {
    let target = samples::fixture_path();
    if std::env::args().any(|a| a == "--check") {
        let dir = tempfile::tempdir().expect("tempdir");
        let fresh = dir.path().join("samples.jsonl");
        record(&fresh);
        let same = std::fs::read(&fresh).ok() == std::fs::read(&target).ok();
        if !same {
            eprintln!("{} is stale", target.display());
            std::process::exit(1);
        }
        println!("{} is up to date", target.display());
    } else {
        std::fs::create_dir_all(target.parent().unwrap()).expect("fixture dir");
        record(&target);
        println!("wrote {}", target.display());
    }
}
