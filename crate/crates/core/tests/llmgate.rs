use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use qrewrite::llmgate::{
    prompt_digest, BackendKind, FixtureRecord, FixtureStore, FixtureWriter, LlmError, LlmGate, LlmMode, LlmModelSpec,
    ScriptedBackend,
};

#[path = "support/samples.rs"]
mod samples;

fn counting() -> (LlmGate, Arc<AtomicUsize>) {
    let calls = Arc::new(AtomicUsize::new(0));
    let c = Arc::clone(&calls);
    let backend = ScriptedBackend::new(move |p: &str| {
        let n = c.fetch_add(1, Ordering::SeqCst);
        Ok(format!("answer {n}: {}", p.len()))
    });
    (LlmGate::live(Arc::new(backend)), calls)
}

#[test]
fn oversized_prompt_fails_before_any_call() {
    let (g, calls) = counting();
    let spec = LlmModelSpec { context_window: 100, max_output_tokens: 60, ..LlmModelSpec::default() };
    let e = g.complete(&spec, &"x".repeat(200)).unwrap_err();
    assert!(matches!(e, LlmError::ContextWindow { estimated: 50, max_output: 60, window: 100 }));
    assert_eq!(calls.load(Ordering::SeqCst), 0);
    assert_eq!(g.exchange_count(), 0);
}

#[test]
fn live_exchanges_are_logged_and_forks_start_empty() {
    let (g, _) = counting();
    let spec = LlmModelSpec::default();
    let ex = g.complete(&spec, "hello").unwrap();
    assert_eq!(ex.backend, BackendKind::Live);
    assert_eq!(ex.prompt_digest, prompt_digest(&spec.model_name, "hello"));
    assert_eq!(g.exchanges(), vec![ex]);
    assert_eq!(g.fork().exchange_count(), 0);
    assert_eq!(g.mode(), LlmMode::Live);
}

#[test]
fn replay_serves_recorded_occurrences_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.jsonl");
    let (inner, _) = counting();
    let spec = LlmModelSpec::default();
    let writer = Arc::new(FixtureWriter::create(&path).unwrap());
    // the record gate wraps the same scripted model
    let backend = ScriptedBackend::new({
        let n = AtomicUsize::new(0);
        move |_: &str| Ok(format!("take {}", n.fetch_add(1, Ordering::SeqCst)))
    });
    drop(inner);
    let rec = LlmGate::record(Arc::new(backend), writer);
    for _ in 0..2 {
        rec.complete(&spec, "same prompt").unwrap();
    }
    let store = Arc::new(FixtureStore::open(&path).unwrap());
    let replay = LlmGate::replay(Arc::clone(&store));
    let got: Vec<String> = (0..3).map(|_| replay.complete(&spec, "same prompt").unwrap().response).collect();
    assert_eq!(got, ["take 0", "take 1", "take 1"]);
    // a fork starts over
    assert_eq!(replay.fork().complete(&spec, "same prompt").unwrap().response, "take 0");
}

#[test]
fn identical_prompts_replay_to_identical_exchanges() {
    let store = Arc::new(FixtureStore::open(samples::fixture_path()).unwrap());
    let spec = LlmModelSpec::default();
    let prompt = qrewrite::prompts::render(qrewrite::prompts::INTENT, &[("query", samples::QUERY_5)]);
    let a = LlmGate::replay(Arc::clone(&store)).complete(&spec, &prompt).unwrap();
    let b = LlmGate::replay(store).complete(&spec, &prompt).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.backend, BackendKind::Replay);
}

#[test]
fn replay_miss_names_digest_and_nearest_prompt() {
    let record = FixtureRecord {
        digest: prompt_digest("gpt-4o-2024-08-06", "Describe the query SELECT 1"),
        model: "gpt-4o-2024-08-06".into(),
        prompt: "Describe the query SELECT 1".into(),
        response: "one".into(),
        input_tokens: 7,
        output_tokens: 1,
    };
    let g = LlmGate::replay(Arc::new(FixtureStore::from_records(vec![record])));
    let spec = LlmModelSpec::default();
    match g.complete(&spec, "Describe the query SELECT 2").unwrap_err() {
        LlmError::ReplayMiss { digest, nearest } => {
            assert_eq!(digest, prompt_digest(&spec.model_name, "Describe the query SELECT 2"));
            assert_eq!(nearest.as_deref(), Some("Describe the query SELECT 1"));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn fixture_lines_carry_the_documented_fields() {
    let text = std::fs::read_to_string(samples::fixture_path()).unwrap();
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for key in ["digest", "model", "prompt", "response", "input_tokens", "output_tokens"] {
            assert!(v.get(key).is_some(), "{key} missing in {line}");
        }
        let prompt = v["prompt"].as_str().unwrap();
        assert_eq!(v["digest"], prompt_digest(v["model"].as_str().unwrap(), prompt));
    }
}

#[test]
fn append_keeps_existing_records() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.jsonl");
    let rec = |p: &str| FixtureRecord {
        digest: prompt_digest("m", p),
        model: "m".into(),
        prompt: p.into(),
        response: "r".into(),
        input_tokens: 1,
        output_tokens: 1,
    };
    FixtureWriter::create(&path).unwrap().append(&rec("a")).unwrap();
    FixtureWriter::append_to(&path).unwrap().append(&rec("b")).unwrap();
    assert_eq!(FixtureStore::open(&path).unwrap().len(), 2);
}
