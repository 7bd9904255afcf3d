//! `qrewrite`: rewrite a SQL query into queries with the same intent over the
//! tables of a catalog, and print the JSON report.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{ArgGroup, Parser, ValueEnum};
use qrewrite::exec::Execution;
use qrewrite::filters::FilterStrategy;
use qrewrite::llmgate::LlmMode;
use qrewrite::pipeline::{run, PipelineConfig, PipelineError};
use qrewrite::ranker::{RankAlgorithm, SimilarityKind};
use qrewrite::rewriters::RewriterKind;

#[derive(Clone, Copy, ValueEnum)]
enum FilterArg {
    Embedding,
    Sllm,
    Cllm,
}

#[derive(Clone, Copy, ValueEnum)]
enum RewriterArg {
    Simple,
    Nl,
}

#[derive(Clone, Copy, ValueEnum)]
enum RankerArg {
    Intent,
    Mmr,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimilarityArg {
    Embedding,
    Llm,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Live,
    Record,
    Replay,
}

#[derive(Parser)]
#[command(name = "qrewrite", version, about = "Intent-based SQL query rewriting over a table catalog")]
#[command(group(ArgGroup::new("input").required(true).args(["query", "query_file"])))]
struct Args {
    /// SQL query to rewrite.
    #[arg(long)]
    query: Option<String>,
    /// Read the query from a file.
    #[arg(long, value_name = "PATH")]
    query_file: Option<PathBuf>,
    /// Directory of CREATE TABLE files; each file is one source database.
    #[arg(long, value_name = "PATH")]
    catalog_dir: PathBuf,
    /// Word vectors, one `token f1 .. fd` line per word.
    #[arg(long, value_name = "PATH")]
    vectors: PathBuf,
    #[arg(long, value_enum, default_value = "cllm")]
    filter: FilterArg,
    #[arg(long, value_enum, default_value = "nl")]
    rewriter: RewriterArg,
    #[arg(long, value_enum, default_value = "mmr")]
    ranker: RankerArg,
    #[arg(long, value_enum, default_value = "llm")]
    similarity: SimilarityArg,
    /// Number of rewrites to request.
    #[arg(long, default_value_t = 5)]
    n: usize,
    /// Cosine threshold of the embedding filter.
    #[arg(long, default_value_t = 0.4)]
    epsilon: f64,
    /// Cosine threshold of the complex LLM filter.
    #[arg(long, default_value_t = 0.7)]
    gamma: f64,
    /// MMR weight of intent similarity against structural redundancy.
    #[arg(long, default_value_t = 0.7)]
    lambda: f64,
    /// live: call the endpoint in LLM_API_URL; record: also append to --fixtures;
    /// replay: answer from --fixtures only.
    #[arg(long, value_enum, default_value = "live")]
    llm_mode: ModeArg,
    /// Fixture file (JSON lines) for record and replay modes.
    #[arg(long, value_name = "PATH")]
    fixtures: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Leave per-phase timings out of the report.
    #[arg(long)]
    no_timings: bool,
    /// Run every stage on the calling thread.
    #[arg(long)]
    sequential: bool,
}

impl Args {
    fn config(&self) -> PipelineConfig {
        let mut cfg = PipelineConfig::new(&self.catalog_dir, &self.vectors);
        cfg.filter.strategy = match self.filter {
            FilterArg::Embedding => FilterStrategy::Embedding,
            FilterArg::Sllm => FilterStrategy::SimpleLlm,
            FilterArg::Cllm => FilterStrategy::ComplexLlm,
        };
        cfg.filter.epsilon = self.epsilon;
        cfg.filter.gamma = self.gamma;
        cfg.rewriter = match self.rewriter {
            RewriterArg::Simple => RewriterKind::Simple,
            RewriterArg::Nl => RewriterKind::Nl,
        };
        cfg.n = self.n;
        cfg.ranking.algorithm = match self.ranker {
            RankerArg::Intent => RankAlgorithm::Intent,
            RankerArg::Mmr => RankAlgorithm::Mmr,
        };
        cfg.ranking.similarity = match self.similarity {
            SimilarityArg::Embedding => SimilarityKind::Embedding,
            SimilarityArg::Llm => SimilarityKind::Llm,
        };
        cfg.ranking.lambda = self.lambda;
        cfg.llm_mode = match self.llm_mode {
            ModeArg::Live => LlmMode::Live,
            ModeArg::Record => LlmMode::Record,
            ModeArg::Replay => LlmMode::Replay,
        };
        cfg.fixture_path = self.fixtures.clone();
        let execution = if self.sequential { Execution::Sequential } else { Execution::default() };
        cfg.with_execution(execution)
    }
}

fn usage_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };

    let query = match (&args.query, &args.query_file) {
        (Some(q), _) => q.clone(),
        (None, Some(p)) => match fs::read_to_string(p) {
            Ok(q) => q,
            Err(e) => return usage_error(format!("cannot read {}: {e}", p.display())),
        },
        (None, None) => unreachable!("clap enforces the input group"),
    };
    if query.trim().is_empty() {
        return usage_error("the query is empty");
    }
    let cfg = args.config();
    if let Err(e) = cfg.validate() {
        return usage_error(e);
    }

    let report = match run(&query, cfg) {
        Ok(r) => r,
        Err(e) => return stage_error(&e),
    };
    let json = report.to_json(!args.no_timings);
    match write_out(args.out.as_ref(), &json) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn stage_error(e: &PipelineError) -> ExitCode {
    let stage = serde_json::to_value(e.stage()).ok().and_then(|v| v.as_str().map(str::to_string));
    eprintln!("error in {} stage: {e}", stage.unwrap_or_default());
    ExitCode::from(1)
}

fn write_out(out: Option<&PathBuf>, json: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => fs::write(p, format!("{json}\n")).with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}
