// Independent reference implementations the library is checked against.
// Deliberately naive: brute force over every block, recomputation from scratch.

#![allow(dead_code)]

use qrewrite::catalog::Catalog;
use qrewrite::embedkit::VectorStore;

/// Longest common block of a[alo..ahi], b[blo..bhi] by trying every pair of
/// start positions. Earliest in `a` wins, then earliest in `b`.
fn longest_block(a: &[char], b: &[char], alo: usize, ahi: usize, blo: usize, bhi: usize) -> (usize, usize, usize) {
    let mut best = (alo, blo, 0);
    for i in alo..ahi {
        for j in blo..bhi {
            let mut k = 0;
            while i + k < ahi && j + k < bhi && a[i + k] == b[j + k] {
                k += 1;
            }
            if k > best.2 {
                best = (i, j, k);
            }
        }
    }
    best
}

fn matches(a: &[char], b: &[char], alo: usize, ahi: usize, blo: usize, bhi: usize) -> usize {
    let (i, j, k) = longest_block(a, b, alo, ahi, blo, bhi);
    if k == 0 {
        return 0;
    }
    k + matches(a, b, alo, i, blo, j) + matches(a, b, i + k, ahi, j + k, bhi)
}

/// Ratcliff/Obershelp ratio straight from the recursive definition.
pub fn ratcliff_obershelp(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let m = matches(&a, &b, 0, a.len(), 0, b.len());
    2.0 * m as f64 / (a.len() + b.len()) as f64
}

/// The greedy MMR choice for one step, recomputed from scratch: among the
/// candidates not in `picked`, the first one maximizing the meta score.
pub fn mmr_step(sqls: &[&str], scores: &[f64], lambda: f64, picked: &[usize]) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..sqls.len() {
        if picked.contains(&i) {
            continue;
        }
        let intent = scores[i].clamp(0.0, 1.0);
        let value = if picked.is_empty() {
            intent
        } else {
            let redundancy = picked.iter().map(|&p| ratcliff_obershelp(sqls[i], sqls[p])).fold(0.0, f64::max);
            lambda * intent - (1.0 - lambda) * redundancy
        };
        if best.is_none_or(|(_, v)| value > v) {
            best = Some((i, value));
        }
    }
    best.expect("at least one candidate left").0
}

/// Full greedy MMR order by repeated brute-force steps.
pub fn mmr_order(sqls: &[&str], scores: &[f64], lambda: f64) -> Vec<usize> {
    let mut picked = Vec::new();
    while picked.len() < sqls.len() {
        let next = mmr_step(sqls, scores, lambda, &picked);
        picked.push(next);
    }
    picked
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean of the token vectors, recomputed without the library's embedding code.
fn embed(store: &VectorStore, name: &str) -> Option<Vec<f64>> {
    // split on separators and where a lowercase letter meets an uppercase one;
    // digits neither split nor reset the case of the previous letter
    let mut tokens: Vec<String> = Vec::new();
    let mut cur = String::new();
    let mut last_letter_lower = false;
    for c in name.chars() {
        if !c.is_alphanumeric() {
            if !cur.is_empty() {
                tokens.push(std::mem::take(&mut cur));
            }
            last_letter_lower = false;
            continue;
        }
        if c.is_uppercase() && last_letter_lower && !cur.is_empty() {
            tokens.push(std::mem::take(&mut cur));
        }
        if c.is_alphabetic() {
            last_letter_lower = c.is_lowercase();
        }
        cur.extend(c.to_lowercase());
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    let known: Vec<&[f32]> = tokens.iter().filter_map(|t| store.get(t)).collect();
    if known.is_empty() {
        return None;
    }
    let mut v = vec![0.0; store.dim()];
    for k in &known {
        for (s, x) in v.iter_mut().zip(k.iter()) {
            *s += f64::from(*x);
        }
    }
    Some(v.into_iter().map(|s| s / known.len() as f64).collect())
}

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let n = dot(a, a).sqrt() * dot(b, b).sqrt();
    if n == 0.0 {
        0.0
    } else {
        dot(a, b) / n
    }
}

/// Catalog tables whose best cosine against any probe name reaches `threshold`.
pub fn cosine_scan(catalog: &Catalog, store: &VectorStore, probes: &[&str], threshold: f64) -> Vec<String> {
    let probes: Vec<Vec<f64>> = probes.iter().filter_map(|p| embed(store, p)).collect();
    catalog
        .tables()
        .iter()
        .filter(|t| {
            let Some(e) = embed(store, &t.prefixed_name) else { return false };
            probes.iter().any(|p| cos(&e, p).max(0.0) >= threshold)
        })
        .map(|t| t.prefixed_name.clone())
        .collect()
}

/// Cosine of two names' mean token vectors; 0 if either has no known token.
pub fn name_cosine(store: &VectorStore, a: &str, b: &str) -> f64 {
    match (embed(store, a), embed(store, b)) {
        (Some(x), Some(y)) => cos(&x, &y),
        _ => 0.0,
    }
}
