//! Word-vector lookup for table names.
//!
//! Names are split with [`tokenize_name`] and represented by the mean of the
//! vectors of their in-vocabulary tokens. Out-of-vocabulary tokens are skipped;
//! a name with no known token gets the zero vector and is flagged, and every
//! cosine involving it is 0.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sqlkit::tokenize_name;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: expected {expected} components, found {found}")]
    DimensionMismatch { path: PathBuf, line: usize, expected: usize, found: usize },
    #[error("{0}: no vectors found")]
    Empty(PathBuf),
}

/// Immutable token → vector table. Vectors are stored as `f32`; arithmetic is
/// done in `f64`.
#[derive(Debug, Clone)]
pub struct VectorStore {
    dim: usize,
    vectors: HashMap<String, Vec<f32>>,
}

impl VectorStore {
    /// Builds a store from in-memory entries. Tokens are lowercased; the first
    /// occurrence of a token wins.
    pub fn from_entries<I, S>(dim: usize, entries: I) -> Self
    where
        I: IntoIterator<Item = (S, Vec<f32>)>,
        S: AsRef<str>,
    {
        let mut vectors = HashMap::new();
        for (tok, v) in entries {
            assert_eq!(v.len(), dim, "vector for {:?} has wrong dimension", tok.as_ref());
            vectors.entry(tok.as_ref().to_lowercase()).or_insert(v);
        }
        VectorStore { dim, vectors }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Returns a copy of the store with every vector multiplied by `factor`.
    pub fn scaled(&self, factor: f32) -> Self {
        let vectors = self.vectors.iter().map(|(k, v)| (k.clone(), v.iter().map(|x| x * factor).collect())).collect();
        VectorStore { dim: self.dim, vectors }
    }

    pub fn embed_name(&self, name: &str) -> NameEmbedding {
        embed_name(self, name)
    }
}

/// Loads a plain-text vector file: `token f1 f2 ... fd` per line, with an
/// optional `count dim` header. Lines whose numbers do not parse are skipped;
/// a line with the wrong number of components fails the load.
pub fn load_vectors(path: impl AsRef<Path>) -> Result<VectorStore, EmbedError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| EmbedError::Io { path: path.to_path_buf(), source })?;
    let mut dim: Option<usize> = None;
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else { continue };
        let rest: Vec<&str> = fields.collect();
        if i == 0 && rest.len() == 1 && token.parse::<usize>().is_ok() && rest[0].parse::<usize>().is_ok() {
            continue;
        }
        let Ok(values) = rest.iter().map(|f| f.parse::<f32>()).collect::<Result<Vec<f32>, _>>() else {
            log::warn!("{}:{}: unparseable vector line skipped", path.display(), i + 1);
            continue;
        };
        if values.is_empty() {
            continue;
        }
        match dim {
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(EmbedError::DimensionMismatch {
                    path: path.to_path_buf(),
                    line: i + 1,
                    expected: d,
                    found: values.len(),
                });
            }
            Some(_) => {}
        }
        entries.push((token.to_string(), values));
    }
    let Some(dim) = dim else { return Err(EmbedError::Empty(path.to_path_buf())) };
    Ok(VectorStore::from_entries(dim, entries))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NameEmbedding {
    pub vector: Vec<f64>,
    pub known_token_count: usize,
}

impl NameEmbedding {
    pub fn is_oov(&self) -> bool {
        self.known_token_count == 0
    }

    fn norm(&self) -> f64 {
        self.vector.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

pub fn embed_name(store: &VectorStore, name: &str) -> NameEmbedding {
    let mut sum = vec![0.0f64; store.dim];
    let mut known = 0;
    for tok in tokenize_name(name).tokens {
        if let Some(v) = store.get(&tok) {
            known += 1;
            for (s, x) in sum.iter_mut().zip(v) {
                *s += f64::from(*x);
            }
        }
    }
    if known > 0 {
        let n = known as f64;
        sum.iter_mut().for_each(|s| *s /= n);
    }
    NameEmbedding { vector: sum, known_token_count: known }
}

/// Cosine similarity; 0 when either side is OOV or has zero norm.
pub fn cosine(a: &NameEmbedding, b: &NameEmbedding) -> f64 {
    if a.is_oov() || b.is_oov() {
        return 0.0;
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 || !na.is_finite() || !nb.is_finite() {
        return 0.0;
    }
    let dot: f64 = a.vector.iter().zip(&b.vector).map(|(x, y)| x * y).sum();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}
