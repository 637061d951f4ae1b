//! Fragment-set fingerprints and Tanimoto similarity.
//!
//! Similarity gates the pair/triplet meta-key construction. Fingerprints
//! are the raw (unhashed-width) key sets restricted to a small radius —
//! folding into a fixed bit vector would only introduce collisions. The
//! pair search is an exact O(N²) scan with an early size-ratio exit; the
//! datasets this crate targets are small enough that approximate indexes
//! would only cost determinism.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::chem::FragmentIndex;

/// Distinct fragment keys of one molecule at depth ≤ `sim_radius`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeySetFingerprint {
    pub molecule_id: usize,
    pub keys: BTreeSet<u64>,
}

/// An unordered molecule pair at or above the similarity threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarPair {
    /// Molecule id of the first member; always < `j`.
    pub i: usize,
    pub j: usize,
    pub similarity: f64,
}

/// Restrict a fragment index to keys observed at depth ≤ `sim_radius`.
#[must_use]
pub fn key_fingerprint(index: &FragmentIndex, sim_radius: u8) -> KeySetFingerprint {
    let keys = index
        .hits
        .iter()
        .filter(|h| h.depth <= sim_radius)
        .map(|h| h.key)
        .collect();
    KeySetFingerprint {
        molecule_id: index.molecule_id,
        keys,
    }
}

/// Tanimoto similarity |a∩b| / |a∪b|.
///
/// Two empty sets have no defined overlap; that case returns 0 by
/// convention (it cannot arise from parsed molecules, which always have at
/// least one atom and hence at least one key).
#[must_use]
pub fn tanimoto(a: &KeySetFingerprint, b: &KeySetFingerprint) -> f64 {
    if a.keys.is_empty() && b.keys.is_empty() {
        return 0.0;
    }
    let inter = intersection_size(&a.keys, &b.keys);
    let union = a.keys.len() + b.keys.len() - inter;
    inter as f64 / union as f64
}

/// Size of the intersection of two sorted sets, by merge walk.
fn intersection_size(a: &BTreeSet<u64>, b: &BTreeSet<u64>) -> usize {
    // Iterate the smaller set against the larger when sizes are lopsided.
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    if small.len() * 16 < large.len() {
        return small.iter().filter(|k| large.contains(k)).count();
    }
    let mut ia = small.iter().peekable();
    let mut ib = large.iter().peekable();
    let mut count = 0;
    while let (Some(&&x), Some(&&y)) = (ia.peek(), ib.peek()) {
        match x.cmp(&y) {
            std::cmp::Ordering::Less => {
                ia.next();
            }
            std::cmp::Ordering::Greater => {
                ib.next();
            }
            std::cmp::Ordering::Equal => {
                count += 1;
                ia.next();
                ib.next();
            }
        }
    }
    count
}

/// All unordered pairs with Tanimoto ≥ `tau`, ordered by (i, j).
///
/// The scan parallelizes over the first index; results are concatenated in
/// row order so the output is deterministic.
#[must_use]
pub fn similar_pairs(fingerprints: &[KeySetFingerprint], tau: f64) -> Vec<SimilarPair> {
    debug_assert!((0.0..=1.0).contains(&tau), "tau must lie in [0,1]");
    let rows: Vec<Vec<SimilarPair>> = fingerprints
        .par_iter()
        .enumerate()
        .map(|(ai, fa)| {
            let mut row = Vec::new();
            for fb in &fingerprints[ai + 1..] {
                // Size bound: tanimoto ≤ min/max of the set sizes.
                let (sa, sb) = (fa.keys.len(), fb.keys.len());
                let upper = sa.min(sb) as f64 / sa.max(sb).max(1) as f64;
                if upper < tau {
                    continue;
                }
                let sim = tanimoto(fa, fb);
                if sim >= tau {
                    let (i, j) = if fa.molecule_id < fb.molecule_id {
                        (fa.molecule_id, fb.molecule_id)
                    } else {
                        (fb.molecule_id, fa.molecule_id)
                    };
                    row.push(SimilarPair {
                        i,
                        j,
                        similarity: sim,
                    });
                }
            }
            row
        })
        .collect();
    rows.into_iter().flatten().collect()
}
