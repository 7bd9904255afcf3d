//! Ranking of surviving rewrites by intent similarity, optionally diversified
//! with maximal marginal relevance (MMR).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedkit::{cosine, VectorStore};
use crate::exec::Execution;
use crate::llmgate::{LlmExchange, LlmGate, LlmModelSpec};
use crate::prompts;
use crate::sqlkit::{analyze_query, structural_similarity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityKind {
    Embedding,
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankAlgorithm {
    Intent,
    Mmr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingConfig {
    pub similarity: SimilarityKind,
    pub algorithm: RankAlgorithm,
    pub lambda: f64,
    pub llm_batch_size: usize,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for RankingConfig {
    fn default() -> Self {
        RankingConfig {
            similarity: SimilarityKind::Llm,
            algorithm: RankAlgorithm::Mmr,
            lambda: 0.7,
            llm_batch_size: 5,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum RankError {
    #[error("invalid ranking config: {0}")]
    InvalidConfig(String),
}

impl RankingConfig {
    pub fn validate(&self) -> Result<(), RankError> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(RankError::InvalidConfig(format!("lambda {} outside [0,1]", self.lambda)));
        }
        if self.llm_batch_size == 0 {
            return Err(RankError::InvalidConfig("llm_batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Result position of one input item.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ranked {
    /// Index into the ranked input.
    pub index: usize,
    pub intent_score: f64,
    /// 1-based final position.
    pub rank: usize,
}

fn unit(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(0.0, 1.0)
    }
}

/// Mean clamped cosine over all pairs of tables of `original` × `rewrite`.
/// Table names are used as written. Either side empty (or unparsable) → 0.
pub fn embedding_intent_similarity(original: &str, rewrite: &str, store: &VectorStore) -> f64 {
    let to = analyze_query(original).referenced_tables;
    let tr = analyze_query(rewrite).referenced_tables;
    if to.is_empty() || tr.is_empty() {
        return 0.0;
    }
    let eo: Vec<_> = to.iter().map(|t| store.embed_name(t)).collect();
    let er: Vec<_> = tr.iter().map(|t| store.embed_name(t)).collect();
    let mut sum = 0.0;
    for a in &eo {
        for b in &er {
            sum += cosine(a, b).max(0.0);
        }
    }
    unit(sum / (eo.len() * er.len()) as f64)
}

/// Parses `;`-separated scores, clamped to [0, 1]. Unparseable entries make
/// the whole response unusable.
pub fn parse_scores(response: &str) -> Option<Vec<f64>> {
    response
        .split(';')
        .map(|s| s.trim().trim_end_matches('.'))
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().ok().map(unit))
        .collect()
}

fn render_alternatives(batch: &[&str]) -> String {
    batch.iter().map(|q| format!("{};", q.trim().trim_end_matches(';'))).collect::<Vec<_>>().join("\n")
}

/// Scores rewrites with the LLM in batches of `llm_batch_size`. A batch whose
/// score count does not match is re-issued once; if it still does not match,
/// or the LLM fails, every member of the batch scores 0.
pub fn llm_intent_similarity(
    original: &str,
    rewrites: &[&str],
    gate: &LlmGate,
    spec: &LlmModelSpec,
    cfg: &RankingConfig,
) -> (Vec<f64>, Vec<LlmExchange>) {
    let batches: Vec<&[&str]> = rewrites.chunks(cfg.llm_batch_size.max(1)).collect();
    let per_batch = cfg.execution.map(&batches, |batch| {
        let prompt = prompts::render(
            prompts::SIMILARITY,
            &[("input_query", original), ("alternative_queries", &render_alternatives(batch))],
        );
        let mut exchanges = Vec::new();
        for attempt in 0..2 {
            match gate.complete(spec, &prompt) {
                Ok(ex) => {
                    let scores = parse_scores(&ex.response).filter(|s| s.len() == batch.len());
                    exchanges.push(ex);
                    if let Some(s) = scores {
                        return (s, exchanges);
                    }
                    log::warn!("similarity batch miscounted (attempt {})", attempt + 1);
                }
                Err(e) => log::warn!("similarity batch failed (attempt {}): {e}", attempt + 1),
            }
        }
        (vec![0.0; batch.len()], exchanges)
    });
    let mut scores = Vec::with_capacity(rewrites.len());
    let mut exchanges = Vec::new();
    for (s, e) in per_batch {
        scores.extend(s);
        exchanges.extend(e);
    }
    (scores, exchanges)
}

/// Stable descending sort by score.
pub fn rank_intent(scores: &[f64]) -> Vec<Ranked> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| unit(scores[b]).total_cmp(&unit(scores[a])));
    order
        .into_iter()
        .enumerate()
        .map(|(pos, index)| Ranked { index, intent_score: unit(scores[index]), rank: pos + 1 })
        .collect()
}

/// MMR meta score of a candidate given its running max structural similarity
/// to the already selected set.
pub fn meta_score(lambda: f64, intent: f64, max_structural: f64) -> f64 {
    lambda * intent - (1.0 - lambda) * max_structural
}

/// Greedy MMR. The first pick is the highest intent score; each later pick
/// maximizes `λ·intent − (1−λ)·max structural similarity to the picked set`.
/// Ties go to the earliest candidate.
pub fn rank_mmr(sqls: &[&str], scores: &[f64], lambda: f64, execution: Execution) -> Vec<Ranked> {
    assert_eq!(sqls.len(), scores.len(), "one score per candidate");
    let k = sqls.len();
    let intent: Vec<f64> = scores.iter().copied().map(unit).collect();
    let mut remaining: Vec<usize> = (0..k).collect();
    let mut max_struct = vec![0.0f64; k];
    let mut out = Vec::with_capacity(k);
    while !remaining.is_empty() {
        let pick_pos = if out.is_empty() {
            argmax(remaining.iter().map(|&i| intent[i]))
        } else {
            argmax(remaining.iter().map(|&i| meta_score(lambda, intent[i], max_struct[i])))
        };
        let picked = remaining.remove(pick_pos);
        out.push(Ranked { index: picked, intent_score: intent[picked], rank: out.len() + 1 });
        let sims = execution.map(&remaining, |&i| structural_similarity(sqls[i], sqls[picked]));
        for (&i, s) in remaining.iter().zip(sims) {
            max_struct[i] = max_struct[i].max(s);
        }
    }
    out
}

/// Position of the first maximum.
fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}
