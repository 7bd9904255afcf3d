//! End-to-end orchestration: filter → rewrite → prune → correct → rank.
//!
//! [`Engine`] owns the loaded catalog, vectors, the empty-schema SQL backend
//! and the LLM gateway, and can serve any number of queries. Each
//! [`Engine::run`] works on a fresh fork of the gateway, so its report's cost
//! covers exactly the exchanges that run issued.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{load_catalog, Catalog, CatalogError};
use crate::embedkit::{load_vectors, EmbedError, VectorStore};
use crate::exec::Execution;
use crate::filters::{self, FilterConfig, FilterError, FilterStrategy};
use crate::llmgate::{
    accumulate_cost, BackendKind, CostReport, FixtureStore, FixtureWriter, HttpBackend, LlmError, LlmGate, LlmMode,
    LlmModelSpec,
};
use crate::ranker::{self, RankAlgorithm, RankError, RankingConfig, SimilarityKind};
use crate::refinery::{self, BackendError, CorrectionTrace, PruneVerdict, SqlBackend};
use crate::rewriters::{self, CandidateState, RewriteCandidate, RewriteError, RewriteRequest, RewriterKind};
use crate::sqlkit::analyze_query;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub filter: FilterConfig,
    pub rewriter: RewriterKind,
    pub n: usize,
    pub ranking: RankingConfig,
    pub llm_mode: LlmMode,
    pub model: LlmModelSpec,
    pub catalog_dir: PathBuf,
    pub vectors_path: PathBuf,
    pub fixture_path: Option<PathBuf>,
    #[serde(skip)]
    pub execution: Execution,
}

impl PipelineConfig {
    /// The default configuration (complex LLM filter, NL rewriter, MMR with
    /// LLM similarity, n = 5) over the given inputs, in replay mode.
    pub fn new(catalog_dir: impl Into<PathBuf>, vectors_path: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            filter: FilterConfig::default(),
            rewriter: RewriterKind::Nl,
            n: 5,
            ranking: RankingConfig::default(),
            llm_mode: LlmMode::Replay,
            model: LlmModelSpec::default(),
            catalog_dir: catalog_dir.into(),
            vectors_path: vectors_path.into(),
            fixture_path: None,
            execution: Execution::default(),
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self.filter.execution = execution;
        self.ranking.execution = execution;
        self
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let invalid = |m: String| PipelineError::Config(m);
        self.filter.validate().map_err(|e| invalid(e.to_string()))?;
        self.ranking.validate().map_err(|e| invalid(e.to_string()))?;
        self.model.validate().map_err(|e| invalid(e.to_string()))?;
        if self.n == 0 {
            return Err(invalid("n must be at least 1".into()));
        }
        if self.llm_mode != LlmMode::Live && self.fixture_path.is_none() {
            return Err(invalid(format!("{:?} mode requires a fixture path", self.llm_mode).to_lowercase()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Load,
    Filter,
    Rewrite,
    Refine,
    Rank,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("query is empty")]
    EmptyQuery,
    #[error("loading the catalog failed: {0}")]
    Catalog(#[from] CatalogError),
    #[error("loading the vectors failed: {0}")]
    Vectors(#[from] EmbedError),
    #[error("starting the SQL engine failed: {0}")]
    Backend(#[from] BackendError),
    #[error("setting up the LLM gateway failed: {0}")]
    Gateway(LlmError),
    #[error("filter stage failed: {0}")]
    Filter(#[from] FilterError),
    #[error("rewrite stage failed: {0}")]
    Rewrite(RewriteError),
    #[error("rank stage failed: {0}")]
    Rank(#[from] RankError),
}

impl PipelineError {
    pub fn stage(&self) -> Stage {
        match self {
            PipelineError::Config(_) | PipelineError::EmptyQuery => Stage::Config,
            PipelineError::Catalog(_)
            | PipelineError::Vectors(_)
            | PipelineError::Backend(_)
            | PipelineError::Gateway(_) => Stage::Load,
            PipelineError::Filter(_) => Stage::Filter,
            PipelineError::Rewrite(_) => Stage::Rewrite,
            PipelineError::Rank(_) => Stage::Rank,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    NoUsableTables,
    NoRewrites,
}

/// Accounting line for one LLM exchange.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExchangeSummary {
    pub stage: Stage,
    pub prompt_digest: String,
    pub backend: BackendKind,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub candidate: RewriteCandidate,
    pub prune: PruneVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correction: Option<CorrectionTrace>,
    /// SQL after correction; equal to the candidate's SQL if none was needed.
    pub final_sql: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRewrite {
    pub rank: usize,
    pub intent_score: f64,
    /// Index into [`PipelineReport::candidates`].
    pub candidate: usize,
    pub sql: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub filter_ms: f64,
    pub rewrite_ms: f64,
    pub prune_ms: f64,
    pub correct_ms: f64,
    pub rank_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub query: String,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub filter_strategy: FilterStrategy,
    pub filter_tables: Vec<String>,
    pub rewriter: RewriterKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intent: Option<String>,
    pub raw_candidates: usize,
    pub pruned: usize,
    pub uncorrectable: usize,
    pub candidates: Vec<CandidateReport>,
    pub ranking: RankAlgorithm,
    pub similarity: SimilarityKind,
    pub ranked: Vec<ScoredRewrite>,
    pub exchanges: Vec<ExchangeSummary>,
    pub cost: CostReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase_timings: Option<PhaseTimings>,
}

impl PipelineReport {
    /// Pretty JSON. Timings are left out unless asked for, so that replayed
    /// runs compare byte for byte.
    pub fn to_json(&self, with_timings: bool) -> String {
        let mut copy;
        let r = if with_timings || self.phase_timings.is_none() {
            self
        } else {
            copy = self.clone();
            copy.phase_timings = None;
            &copy
        };
        serde_json::to_string_pretty(r).expect("report serializes")
    }
}

pub struct Engine {
    cfg: PipelineConfig,
    catalog: Arc<Catalog>,
    store: Arc<VectorStore>,
    backend: Arc<SqlBackend>,
    gate: LlmGate,
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

impl Engine {
    /// Loads catalog and vectors and opens the gateway named by the config.
    pub fn from_config(cfg: PipelineConfig) -> Result<Self, PipelineError> {
        cfg.validate()?;
        let catalog = load_catalog(&cfg.catalog_dir)?;
        let store = load_vectors(&cfg.vectors_path)?;
        let gate = match cfg.llm_mode {
            LlmMode::Replay => {
                let path = cfg.fixture_path.as_ref().expect("validated");
                LlmGate::replay(Arc::new(FixtureStore::open(path).map_err(PipelineError::Gateway)?))
            }
            LlmMode::Live => LlmGate::live(Arc::new(HttpBackend::from_env().map_err(PipelineError::Gateway)?)),
            LlmMode::Record => {
                let path = cfg.fixture_path.as_ref().expect("validated");
                let writer = FixtureWriter::append_to(path).map_err(PipelineError::Gateway)?;
                LlmGate::record(Arc::new(HttpBackend::from_env().map_err(PipelineError::Gateway)?), Arc::new(writer))
            }
        };
        Self::with_parts(cfg, Arc::new(catalog), Arc::new(store), gate)
    }

    /// Builds an engine around already loaded inputs and an arbitrary gateway.
    pub fn with_parts(
        cfg: PipelineConfig,
        catalog: Arc<Catalog>,
        store: Arc<VectorStore>,
        gate: LlmGate,
    ) -> Result<Self, PipelineError> {
        let mut cfg = cfg;
        cfg.filter.execution = cfg.execution;
        cfg.ranking.execution = cfg.execution;
        cfg.filter.validate()?;
        cfg.ranking.validate()?;
        let backend = Arc::new(SqlBackend::instantiate(&catalog)?);
        Ok(Engine { cfg, catalog, store, backend, gate })
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn backend(&self) -> &SqlBackend {
        &self.backend
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn run(&self, query: &str) -> Result<PipelineReport, PipelineError> {
        let query = query.trim();
        if query.is_empty() {
            return Err(PipelineError::EmptyQuery);
        }
        let cfg = &self.cfg;
        let spec = &cfg.model;
        let gate = self.gate.fork();
        let mut stages: Vec<(Stage, usize)> = Vec::new();
        let mark = |stages: &mut Vec<(Stage, usize)>, stage: Stage, gate: &LlmGate| {
            stages.push((stage, gate.exchange_count()));
        };
        let started = Instant::now();
        let mut timings = PhaseTimings::default();

        let mut report = PipelineReport {
            query: query.to_string(),
            status: RunStatus::Ok,
            reason: None,
            filter_strategy: cfg.filter.strategy,
            filter_tables: Vec::new(),
            rewriter: cfg.rewriter,
            intent: None,
            raw_candidates: 0,
            pruned: 0,
            uncorrectable: 0,
            candidates: Vec::new(),
            ranking: cfg.ranking.algorithm,
            similarity: cfg.ranking.similarity,
            ranked: Vec::new(),
            exchanges: Vec::new(),
            cost: CostReport::default(),
            phase_timings: None,
        };

        // filter
        let t = Instant::now();
        let filtered = match cfg.filter.strategy {
            FilterStrategy::Embedding => {
                filters::embedding_filter(&self.catalog, &analyze_query(query), &self.store, &cfg.filter)?
            }
            FilterStrategy::SimpleLlm => filters::simple_llm_filter(&self.catalog, query, &gate, spec, &cfg.filter)?,
            FilterStrategy::ComplexLlm => {
                filters::complex_llm_filter(&self.catalog, query, &gate, spec, &self.store, &cfg.filter)?
            }
        };
        mark(&mut stages, Stage::Filter, &gate);
        timings.filter_ms = ms(t);
        report.filter_tables = filtered.relevant_tables;

        if report.filter_tables.is_empty() {
            report.status = RunStatus::NoUsableTables;
            report.reason = Some("the filter kept no tables".into());
            return Ok(self.finish(report, &gate, &stages, timings, started));
        }

        // rewrite
        let t = Instant::now();
        let req = RewriteRequest {
            original_query: query.to_string(),
            allowed_tables: report.filter_tables.clone(),
            n: cfg.n,
        };
        let outcome = match cfg.rewriter {
            RewriterKind::Simple => rewriters::simple_rewrite(&req, &self.catalog, &gate, spec),
            RewriterKind::Nl => rewriters::nl_rewrite(&req, &self.catalog, &gate, spec),
        };
        mark(&mut stages, Stage::Rewrite, &gate);
        timings.rewrite_ms = ms(t);
        let outcome = match outcome {
            Ok(o) => o,
            Err(RewriteError::NoRewrites) => {
                report.status = RunStatus::NoRewrites;
                report.reason = Some(RewriteError::NoRewrites.to_string());
                return Ok(self.finish(report, &gate, &stages, timings, started));
            }
            Err(e) => return Err(PipelineError::Rewrite(e)),
        };
        report.intent = outcome.intent;
        report.raw_candidates = outcome.candidates.len();

        // prune
        let t = Instant::now();
        let verdicts = cfg.execution.map(&outcome.candidates, |c| refinery::prune(&c.sql, &self.catalog));
        timings.prune_ms = ms(t);

        // correct
        let t = Instant::now();
        let traces = cfg.execution.map_indexed(&outcome.candidates, |i, c| {
            if verdicts[i].pruned {
                return None;
            }
            Some(refinery::correct(&c.sql, &self.catalog, &self.backend, &gate, spec).0)
        });
        mark(&mut stages, Stage::Refine, &gate);
        timings.correct_ms = ms(t);

        for ((mut candidate, mut prune), trace) in outcome.candidates.into_iter().zip(verdicts).zip(traces) {
            let final_sql = trace.as_ref().map_or_else(|| candidate.sql.clone(), |tr| tr.final_sql.clone());
            candidate.state = match &trace {
                None => CandidateState::Pruned,
                Some(tr) if !tr.corrected => CandidateState::Uncorrectable,
                Some(tr) => {
                    // corrected SQL may have picked up a cross-database join
                    let after = refinery::prune(&tr.final_sql, &self.catalog);
                    if after.pruned {
                        prune = after;
                        CandidateState::Pruned
                    } else if tr.iterations_used == 0 {
                        CandidateState::Kept
                    } else {
                        CandidateState::Corrected
                    }
                }
            };
            match candidate.state {
                CandidateState::Pruned => report.pruned += 1,
                CandidateState::Uncorrectable => report.uncorrectable += 1,
                _ => {}
            }
            report.candidates.push(CandidateReport { candidate, prune, correction: trace, final_sql });
        }

        // rank
        let t = Instant::now();
        let survivors: Vec<usize> = (0..report.candidates.len())
            .filter(|&i| {
                matches!(report.candidates[i].candidate.state, CandidateState::Kept | CandidateState::Corrected)
            })
            .collect();
        if !survivors.is_empty() {
            let sqls: Vec<&str> = survivors.iter().map(|&i| report.candidates[i].final_sql.as_str()).collect();
            let scores = match cfg.ranking.similarity {
                SimilarityKind::Embedding => {
                    cfg.execution.map(&sqls, |s| ranker::embedding_intent_similarity(query, s, &self.store))
                }
                SimilarityKind::Llm => ranker::llm_intent_similarity(query, &sqls, &gate, spec, &cfg.ranking).0,
            };
            let order = match cfg.ranking.algorithm {
                RankAlgorithm::Intent => ranker::rank_intent(&scores),
                RankAlgorithm::Mmr => ranker::rank_mmr(&sqls, &scores, cfg.ranking.lambda, cfg.execution),
            };
            report.ranked = order
                .into_iter()
                .map(|r| ScoredRewrite {
                    rank: r.rank,
                    intent_score: r.intent_score,
                    candidate: survivors[r.index],
                    sql: sqls[r.index].to_string(),
                })
                .collect();
        }
        mark(&mut stages, Stage::Rank, &gate);
        timings.rank_ms = ms(t);

        Ok(self.finish(report, &gate, &stages, timings, started))
    }

    fn finish(
        &self,
        mut report: PipelineReport,
        gate: &LlmGate,
        stages: &[(Stage, usize)],
        mut timings: PhaseTimings,
        started: Instant,
    ) -> PipelineReport {
        let exchanges = gate.exchanges();
        let mut from = 0;
        for &(stage, upto) in stages {
            for ex in &exchanges[from..upto] {
                report.exchanges.push(ExchangeSummary {
                    stage,
                    prompt_digest: ex.prompt_digest.clone(),
                    backend: ex.backend,
                    input_tokens: ex.input_tokens,
                    output_tokens: ex.output_tokens,
                });
            }
            from = upto;
        }
        // digests within a parallel stage arrive in scheduling order
        report.exchanges.sort_by(|a, b| {
            (a.stage as u8, &a.prompt_digest, a.input_tokens, a.output_tokens).cmp(&(
                b.stage as u8,
                &b.prompt_digest,
                b.input_tokens,
                b.output_tokens,
            ))
        });
        report.cost = accumulate_cost(&self.cfg.model, &exchanges);
        timings.total_ms = ms(started);
        report.phase_timings = Some(timings);
        report
    }
}

/// Loads everything named by `cfg` and runs one query.
pub fn run(query: &str, cfg: PipelineConfig) -> Result<PipelineReport, PipelineError> {
    Engine::from_config(cfg)?.run(query)
}
