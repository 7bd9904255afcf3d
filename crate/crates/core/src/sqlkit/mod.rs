//! SQL text utilities shared by the catalog loader, the rewriters and the
//! cleanup phase.

mod analyze;
mod similarity;
mod split;
mod tokenize;

pub use analyze::{analyze_query, JoinEdge, QueryAnalysis};
pub use similarity::structural_similarity;
pub use split::{normalize_sql, split_statements};
pub use tokenize::{tokenize_name, NameTokens};
