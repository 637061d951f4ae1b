//! Pair (2D) and triplet (3D) meta-key statistics.
//!
//! Label-discordant similar pairs feed a per-key McNemar test on presence
//! discordance; activity-cliff triplets (anchor, same-label partner,
//! opposite-label partner) feed binomial or Friedman vote tests. Both
//! attach scores to the same fragment keys as the 1D view, so the
//! vectorizer can pool them over atom-localized hits unchanged.
//!
//! Vote orientation is class-absolute: `n10`/`m_align` always count
//! evidence that a key tracks the *positive* class, whichever class the
//! anchor belongs to. That convention is what makes label inversion swap
//! the count pair and negate every score exactly.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::chem::FragmentIndex;
use crate::prevalence::{ScoreEntry, ScoreMap, StatDetail, StatVariant, ViewOrder};
use crate::similarity::SimilarPair;
use crate::stats::{binomial_half_tail, chi_square_survival, signed_score, P_FLOOR};

/// A τ-similar pair retained for contrastive scoring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastPair {
    pub pair: SimilarPair,
    /// Whether the two members carry different labels. Construction keeps
    /// discordant pairs only, so this is true for every retained pair.
    pub label_discordant: bool,
}

/// An activity-cliff triplet: an anchor, a same-label τ-neighbor (`pos`),
/// and an opposite-label τ-neighbor (`neg`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorTriplet {
    pub anchor: usize,
    /// Neighbor sharing the anchor's label.
    pub pos: usize,
    /// Neighbor with the opposite label.
    pub neg: usize,
    /// (sim(anchor, pos), sim(anchor, neg)), both ≥ τ.
    pub sims: (f64, f64),
}

/// Keep only label-discordant pairs.
#[must_use]
pub fn build_contrast_pairs(pairs: &[SimilarPair], labels: &[bool]) -> Vec<ContrastPair> {
    pairs
        .iter()
        .filter(|p| labels[p.i] != labels[p.j])
        .map(|&pair| ContrastPair {
            pair,
            label_discordant: true,
        })
        .collect()
}

/// Cross each anchor's same-label τ-neighbors with its opposite-label
/// τ-neighbors, keeping at most `cap_per_anchor` triplets per anchor.
///
/// When an anchor exceeds the cap, triplets with the highest
/// `min(sim(anchor,pos), sim(anchor,neg))` win; exact ties fall back to
/// lexicographic (pos, neg) ids, so the selection is deterministic.
#[must_use]
pub fn build_triplets(
    pairs: &[SimilarPair],
    labels: &[bool],
    cap_per_anchor: usize,
) -> Vec<AnchorTriplet> {
    let mut neighbors: Vec<Vec<(usize, f64)>> = vec![Vec::new(); labels.len()];
    for p in pairs {
        neighbors[p.i].push((p.j, p.similarity));
        neighbors[p.j].push((p.i, p.similarity));
    }

    (0..labels.len())
        .into_par_iter()
        .map(|anchor| {
            let (same, opposite): (Vec<_>, Vec<_>) = neighbors[anchor]
                .iter()
                .partition(|(other, _)| labels[*other] == labels[anchor]);
            let mut triplets: Vec<AnchorTriplet> = same
                .iter()
                .flat_map(|&(pos, sim_pos)| {
                    opposite.iter().map(move |&(neg, sim_neg)| AnchorTriplet {
                        anchor,
                        pos,
                        neg,
                        sims: (sim_pos, sim_neg),
                    })
                })
                .collect();
            triplets.sort_by(|x, y| {
                let min_x = x.sims.0.min(x.sims.1);
                let min_y = y.sims.0.min(y.sims.1);
                min_y
                    .partial_cmp(&min_x)
                    .expect("similarities are finite")
                    .then_with(|| (x.pos, x.neg).cmp(&(y.pos, y.neg)))
            });
            triplets.truncate(cap_per_anchor);
            triplets
        })
        .flatten_iter()
        .collect()
}

#[derive(Clone, Copy, Default)]
struct PairAcc {
    n10: u32,
    n01: u32,
}

/// McNemar scores over discordant-presence pairs.
///
/// For every key present in exactly one member of a discordant pair,
/// `n10` counts the cases where the bearer is the positive molecule and
/// `n01` the cases where it is the negative one. The continuity-corrected
/// statistic `(|n10-n01|-1)^2 / (n10+n01)` is referred to chi-square with
/// one degree of freedom; keys never discordant are omitted.
#[must_use]
pub fn mcnemar_scores(
    cpairs: &[ContrastPair],
    indexes: &[FragmentIndex],
    labels: &[bool],
) -> ScoreMap {
    let merged: BTreeMap<u64, PairAcc> = cpairs
        .par_iter()
        .fold(BTreeMap::new, |mut acc: BTreeMap<u64, PairAcc>, cp| {
            let (i, j) = (cp.pair.i, cp.pair.j);
            let (keys_i, keys_j) = (&indexes[i].key_presence, &indexes[j].key_presence);
            for &key in keys_i.iter().filter(|k| !keys_j.contains(k)) {
                let e = acc.entry(key).or_default();
                if labels[i] {
                    e.n10 += 1;
                } else {
                    e.n01 += 1;
                }
            }
            for &key in keys_j.iter().filter(|k| !keys_i.contains(k)) {
                let e = acc.entry(key).or_default();
                if labels[j] {
                    e.n10 += 1;
                } else {
                    e.n01 += 1;
                }
            }
            acc
        })
        .reduce(BTreeMap::new, |mut left, right| {
            for (key, r) in right {
                let e = left.entry(key).or_default();
                e.n10 += r.n10;
                e.n01 += r.n01;
            }
            left
        });

    let ranges = key_ranges(indexes, &merged);
    let entries = merged
        .into_iter()
        .map(|(key, acc)| {
            let total = f64::from(acc.n10 + acc.n01);
            let diff = f64::from(acc.n10) - f64::from(acc.n01);
            let stat = (diff.abs() - 1.0).powi(2) / total;
            let p = chi_square_survival(stat, 1).max(P_FLOOR);
            let (support, depth_min, depth_max) = ranges[&key];
            let entry = ScoreEntry {
                score: signed_score(diff, p),
                depth_min,
                depth_max,
                support,
                detail: StatDetail::DiscordantPairs {
                    n10: acc.n10,
                    n01: acc.n01,
                },
            };
            (key, entry)
        })
        .collect();

    ScoreMap {
        order: ViewOrder::TwoD,
        stat_variant: StatVariant::McNemar,
        entries,
    }
}

/// Triplet vote statistic selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripletStat {
    /// One-sided binomial tail of the larger vote count at rate 1/2.
    Binomial,
    /// Friedman chi-square over within-triplet presence ranks (df = 2).
    Friedman,
}

#[derive(Clone, Copy, Default)]
struct TripletAcc {
    m_align: u32,
    m_anti: u32,
    /// Triplets in which any member carries the key (Friedman blocks).
    blocks: u32,
    /// Average-rank sums per role (anchor, pos, neg); halves are exact.
    rank_sum: [f64; 3],
}

/// Score keys over activity-cliff triplets.
///
/// Presence pattern (anchor, pos, neg) = (1,1,0) is a vote that the key
/// tracks the anchor's class; (1,0,1) a vote for the opposite class. Votes
/// land in `m_align` (key tracks the positive class) or `m_anti` according
/// to the anchor's label. Other patterns carry no vote; keys with no votes
/// are omitted. The Friedman variant ranks presence within each triplet
/// that contains the key anywhere (plain average-rank statistic, no tie
/// correction) and keeps the binomial sign convention.
#[must_use]
pub fn triplet_scores(
    triplets: &[AnchorTriplet],
    indexes: &[FragmentIndex],
    labels: &[bool],
    variant: TripletStat,
) -> ScoreMap {
    let merged: BTreeMap<u64, TripletAcc> = triplets
        .par_iter()
        .fold(BTreeMap::new, |mut acc: BTreeMap<u64, TripletAcc>, t| {
            let ka = &indexes[t.anchor].key_presence;
            let kp = &indexes[t.pos].key_presence;
            let kn = &indexes[t.neg].key_presence;
            let mut visit = |key: u64| {
                let in_a = ka.contains(&key);
                let in_p = kp.contains(&key);
                let in_n = kn.contains(&key);
                let e = acc.entry(key).or_default();
                match (in_a, in_p, in_n) {
                    (true, true, false) if labels[t.anchor] => e.m_align += 1,
                    (true, true, false) => e.m_anti += 1,
                    (true, false, true) if labels[t.anchor] => e.m_anti += 1,
                    (true, false, true) => e.m_align += 1,
                    _ => {}
                }
                e.blocks += 1;
                let present = u32::from(in_a) + u32::from(in_p) + u32::from(in_n);
                // Average ranks of the 0/1 presence values within the
                // triplet: a lone 1 ranks 3 over two 1.5s; a pair of 1s
                // ranks 2.5 each over a 1; all-equal ranks 2 everywhere.
                let (rank_present, rank_absent) = match present {
                    1 => (3.0, 1.5),
                    2 => (2.5, 1.0),
                    _ => (2.0, 2.0),
                };
                for (slot, present_here) in [(0, in_a), (1, in_p), (2, in_n)] {
                    e.rank_sum[slot] += if present_here {
                        rank_present
                    } else {
                        rank_absent
                    };
                }
            };
            // Union of the three presence sets, each key once.
            let mut seen = ka.clone();
            seen.extend(kp.iter().copied());
            seen.extend(kn.iter().copied());
            for key in seen {
                visit(key);
            }
            acc
        })
        .reduce(BTreeMap::new, |mut left, right| {
            for (key, r) in right {
                let e = left.entry(key).or_default();
                e.m_align += r.m_align;
                e.m_anti += r.m_anti;
                e.blocks += r.blocks;
                for slot in 0..3 {
                    e.rank_sum[slot] += r.rank_sum[slot];
                }
            }
            left
        });

    let voted: BTreeMap<u64, TripletAcc> = merged
        .into_iter()
        .filter(|(_, acc)| acc.m_align + acc.m_anti > 0)
        .collect();
    let ranges = key_ranges(indexes, &voted);

    let entries = voted
        .into_iter()
        .map(|(key, acc)| {
            let direction = f64::from(acc.m_align) - f64::from(acc.m_anti);
            let p = match variant {
                TripletStat::Binomial => {
                    let m = acc.m_align.max(acc.m_anti);
                    binomial_half_tail(u64::from(m), u64::from(acc.m_align + acc.m_anti))
                        .max(P_FLOOR)
                }
                TripletStat::Friedman => {
                    let n = f64::from(acc.blocks);
                    let q: f64 = acc
                        .rank_sum
                        .iter()
                        .map(|&s| {
                            let dev = s / n - 2.0;
                            dev * dev
                        })
                        .sum();
                    chi_square_survival(n * q, 2).max(P_FLOOR)
                }
            };
            let (support, depth_min, depth_max) = ranges[&key];
            let entry = ScoreEntry {
                score: signed_score(direction, p),
                depth_min,
                depth_max,
                support,
                detail: StatDetail::TripletVotes {
                    m_align: acc.m_align,
                    m_anti: acc.m_anti,
                },
            };
            (key, entry)
        })
        .collect();

    ScoreMap {
        order: ViewOrder::ThreeD,
        stat_variant: match variant {
            TripletStat::Binomial => StatVariant::Binomial,
            TripletStat::Friedman => StatVariant::Friedman,
        },
        entries,
    }
}

/// Support and depth range over the whole dataset for the keys of a map.
fn key_ranges<V>(
    indexes: &[FragmentIndex],
    keys: &BTreeMap<u64, V>,
) -> BTreeMap<u64, (u32, u8, u8)> {
    let mut ranges: BTreeMap<u64, (u32, u8, u8)> =
        keys.keys().map(|&k| (k, (0, u8::MAX, 0))).collect();
    for index in indexes {
        for &key in &index.key_presence {
            if let Some(r) = ranges.get_mut(&key) {
                r.0 += 1;
            }
        }
        for hit in &index.hits {
            if let Some(r) = ranges.get_mut(&hit.key) {
                r.1 = r.1.min(hit.depth);
                r.2 = r.2.max(hit.depth);
            }
        }
    }
    ranges
}
