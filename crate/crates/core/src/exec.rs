//! Data-parallel helpers with a sequential fallback.
//!
//! Every batch-shaped loop in the engine (catalog-wide cosine scans, LLM
//! package fan-out, candidate refinement, MMR meta scores) goes through
//! [`Execution::map`]. With the `parallel` feature the work is spread over the
//! rayon pool; without it, or when [`Execution::Sequential`] is selected, the
//! same closure runs on the calling thread. Output order always matches input
//! order, so the choice never changes results.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}

impl Execution {
    /// Maps `f` over `items`, preserving order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Execution::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).collect()
            }
        }
    }

    /// Like [`Execution::map`] but also hands the closure the item index.
    pub fn map_indexed<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> R + Sync + Send,
    {
        match self {
            Execution::Sequential => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
            }
        }
    }

    pub fn is_parallel(self) -> bool {
        self != Execution::Sequential
    }
}
