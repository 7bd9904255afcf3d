//! Ratcliff/Obershelp ("gestalt pattern matching") similarity.
//!
//! The longest common contiguous block is located, then the regions on its
//! left and right are matched recursively. Among equally long blocks the one
//! starting earliest in `a` wins, then earliest in `b`; this is the tie-break
//! of the common `SequenceMatcher` implementations with junk heuristics off,
//! which matters because the total can depend on which block is taken.

/// Ratcliff/Obershelp ratio `2·M / (|a| + |b|)` over Unicode scalar values.
///
/// Argument order is `(candidate, reference)`; the measure is not symmetric in
/// general. Two empty strings compare as 1.0.
pub fn structural_similarity(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let total = a.len() + b.len();
    if total == 0 {
        return 1.0;
    }
    let matched = matched_chars(&a, &b);
    2.0 * matched as f64 / total as f64
}

fn matched_chars(a: &[char], b: &[char]) -> usize {
    let mut matched = 0;
    let mut stack = vec![(0, a.len(), 0, b.len())];
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    while let Some((alo, ahi, blo, bhi)) = stack.pop() {
        let (i, j, k) = longest_block(a, b, (alo, ahi, blo, bhi), &mut prev, &mut cur);
        if k == 0 {
            continue;
        }
        matched += k;
        if alo < i && blo < j {
            stack.push((alo, i, blo, j));
        }
        if i + k < ahi && j + k < bhi {
            stack.push((i + k, ahi, j + k, bhi));
        }
    }
    matched
}

// Longest common substring of a[alo..ahi] and b[blo..bhi] by dynamic
// programming over run lengths. Iteration order (i ascending, then j
// ascending) with a strict improvement test yields the earliest block.
fn longest_block(
    a: &[char],
    b: &[char],
    (alo, ahi, blo, bhi): (usize, usize, usize, usize),
    prev: &mut [usize],
    cur: &mut [usize],
) -> (usize, usize, usize) {
    let (mut best_i, mut best_j, mut best_k) = (alo, blo, 0);
    prev[blo..=bhi].fill(0);
    for (i, &ca) in a.iter().enumerate().take(ahi).skip(alo) {
        cur[blo] = 0;
        for j in blo..bhi {
            let run = if ca == b[j] { prev[j] + 1 } else { 0 };
            cur[j + 1] = run;
            if run > best_k {
                best_k = run;
                best_i = i + 1 - run;
                best_j = j + 1 - run;
            }
        }
        prev[blo..=bhi].copy_from_slice(&cur[blo..=bhi]);
    }
    (best_i, best_j, best_k)
}
