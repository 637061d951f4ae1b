//! Pooling per-key scores into fixed-length per-molecule vectors.
//!
//! Scores attach to atom-localized hits, giving each molecule a matrix
//! `s[atom][depth]`. A block summarizes that matrix as
//! `[margin, margin_rel, net_0 ... net_R]`; blocks from the 1D/2D/3D score
//! maps concatenate into the final vector (27 dimensions at R = 6 with all
//! three views).
//!
//! The default counting margin tallies atoms whose aggregate score clears
//! a gate `g` on either side; at `g = 0`, atoms scoring exactly zero count
//! on both sides and cancel, so masked-out keys are neutral. Alternative
//! pooling operators trade the count for the score scale. All of them
//! negate with the scores except `max`, which measures the spread between
//! the extreme positive and extreme negative contribution and is therefore
//! sign-blind by construction.

use thiserror::Error;

use crate::chem::FragmentIndex;
use crate::prevalence::{ScoreMap, ViewOrder};

/// Per-molecule score matrix: one row per atom, one column per depth.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomScoreTable {
    pub molecule_id: usize,
    /// Enumeration radius; the matrix has `radius + 1` columns.
    pub radius: u8,
    /// `per_depth[atom][depth]` = sum of scores of hits centered there.
    pub per_depth: Vec<Vec<f64>>,
    /// Row sums: the aggregate per-atom score `s_a`.
    pub atom_totals: Vec<f64>,
}

/// Sum scored hits into the per-atom, per-depth matrix. Keys missing from
/// the map (or masked to zero) contribute nothing.
#[must_use]
pub fn atom_score_table(index: &FragmentIndex, scores: &ScoreMap) -> AtomScoreTable {
    let width = usize::from(index.radius) + 1;
    let mut per_depth = vec![vec![0.0; width]; index.atom_count];
    for hit in &index.hits {
        if let Some(score) = scores.score(hit.key) {
            per_depth[hit.center as usize][usize::from(hit.depth)] += score;
        }
    }
    let atom_totals = per_depth.iter().map(|row| row.iter().sum()).collect();
    AtomScoreTable {
        molecule_id: index.molecule_id,
        radius: index.radius,
        per_depth,
        atom_totals,
    }
}

/// How per-atom scores pool into a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Count atoms beyond the gate on each side (the default).
    MarginCount,
    /// Extreme spread: largest positive minus smallest negative score.
    Max,
    Mean,
    Median,
    /// Mean weighted by `softmax(|s_a|)`, temperature 1; magnitude-based
    /// weights keep the result sign-equivariant.
    Softmax,
    /// `LSE(positive scores) - LSE(|negative scores|)`, empty side = 0.
    LogSumExp,
}

/// Counting block: `margin = #{s_a >= g} - #{s_a <= -g}` (signed count),
/// `margin_rel = margin / |atoms|`, and per-depth analogues `net_d`.
#[must_use]
pub fn margin_block(t: &AtomScoreTable, gate: f64) -> Vec<f64> {
    let n_atoms = t.atom_totals.len().max(1) as f64;
    let count = |values: &mut dyn Iterator<Item = f64>| -> f64 {
        let mut margin = 0i64;
        for v in values {
            if v >= gate {
                margin += 1;
            }
            if v <= -gate {
                margin -= 1;
            }
        }
        margin as f64
    };
    let margin = count(&mut t.atom_totals.iter().copied());
    let width = usize::from(t.radius) + 1;
    let mut block = Vec::with_capacity(width + 2);
    block.push(margin);
    block.push(margin / n_atoms);
    for depth in 0..width {
        let net = count(&mut t.per_depth.iter().map(|row| row[depth]));
        block.push(net / n_atoms);
    }
    block
}

fn pool(values: &[f64], op: Pooling) -> f64 {
    match op {
        Pooling::MarginCount => unreachable!("counting margin handled by margin_block"),
        Pooling::Max => {
            let top = values.iter().copied().fold(0.0_f64, f64::max);
            let bottom = values.iter().copied().fold(0.0_f64, f64::min);
            top - bottom
        }
        Pooling::Mean => values.iter().sum::<f64>() / values.len() as f64,
        Pooling::Median => {
            let mut sorted = values.to_vec();
            sorted.sort_by(|x, y| x.partial_cmp(y).expect("scores are finite"));
            let mid = sorted.len() / 2;
            if sorted.len() % 2 == 1 {
                sorted[mid]
            } else {
                (sorted[mid - 1] + sorted[mid]) / 2.0
            }
        }
        Pooling::Softmax => {
            // Shift by the largest magnitude for overflow safety; the
            // weights are invariant to the shift.
            let peak = values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
            let mut weight_sum = 0.0;
            let mut acc = 0.0;
            for &v in values {
                let w = (v.abs() - peak).exp();
                weight_sum += w;
                acc += w * v;
            }
            acc / weight_sum
        }
        Pooling::LogSumExp => {
            let lse = |side: &mut dyn Iterator<Item = f64>| -> f64 {
                let magnitudes: Vec<f64> = side.collect();
                if magnitudes.is_empty() {
                    return 0.0;
                }
                let peak = magnitudes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = magnitudes.iter().map(|m| (m - peak).exp()).sum();
                peak + sum.ln()
            };
            let positive = lse(&mut values.iter().copied().filter(|&v| v > 0.0));
            let negative = lse(&mut values.iter().copied().filter(|&v| v < 0.0).map(f64::abs));
            positive - negative
        }
    }
}

/// Pooled block: margin from the chosen operator over `s_a`, `margin_rel`
/// normalized by the largest |s_a| (1 when all zero), and `net_d` from the
/// same operator per depth column scaled by |margin| (0 when margin is 0).
#[must_use]
pub fn pooled_margin(t: &AtomScoreTable, op: Pooling) -> Vec<f64> {
    let margin = pool(&t.atom_totals, op);
    let scale = t
        .atom_totals
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let margin_rel = margin / if scale > 0.0 { scale } else { 1.0 };
    let width = usize::from(t.radius) + 1;
    let mut block = Vec::with_capacity(width + 2);
    block.push(margin);
    block.push(margin_rel);
    let column = |depth: usize| -> Vec<f64> { t.per_depth.iter().map(|r| r[depth]).collect() };
    for depth in 0..width {
        let pooled = pool(&column(depth), op);
        block.push(if margin == 0.0 {
            0.0
        } else {
            pooled / margin.abs()
        });
    }
    block
}

/// One block per the configured pooling operator.
#[must_use]
pub fn score_block(t: &AtomScoreTable, pooling: Pooling, gate: f64) -> Vec<f64> {
    match pooling {
        Pooling::MarginCount => margin_block(t, gate),
        other => pooled_margin(t, other),
    }
}

/// Assembled per-molecule feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MolFtpVector {
    pub values: Vec<f64>,
    /// Views present, in serialization order.
    pub views: Vec<ViewOrder>,
    pub radius: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VectorizerError {
    #[error("vector assembly needs at least one block")]
    NoBlocks,
    #[error("blocks disagree on radius: {0} vs {1}")]
    MismatchedRadius(usize, usize),
    #[error("view {0:?} supplied twice")]
    DuplicateView(ViewOrder),
    #[error("block for view {view:?} has {len} values, not radius + 3")]
    MalformedBlock { view: ViewOrder, len: usize },
}

/// Concatenate blocks in fixed 1D, 2D, 3D order (absent views skipped).
/// Every block must be `radius + 3` long for one shared radius.
pub fn assemble_molftp(
    molecule_blocks: &[(ViewOrder, Vec<f64>)],
) -> Result<MolFtpVector, VectorizerError> {
    if molecule_blocks.is_empty() {
        return Err(VectorizerError::NoBlocks);
    }
    let base_len = molecule_blocks[0].1.len();
    for (view, block) in molecule_blocks {
        if block.len() != base_len {
            return Err(VectorizerError::MismatchedRadius(base_len, block.len()));
        }
        if block.len() < 3 {
            return Err(VectorizerError::MalformedBlock {
                view: *view,
                len: block.len(),
            });
        }
    }
    let mut ordered: Vec<&(ViewOrder, Vec<f64>)> = molecule_blocks.iter().collect();
    ordered.sort_by_key(|(view, _)| *view);
    for pair in ordered.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(VectorizerError::DuplicateView(pair[0].0));
        }
    }
    let radius = (base_len - 3) as u8;
    let views: Vec<ViewOrder> = ordered.iter().map(|(v, _)| *v).collect();
    let values: Vec<f64> = ordered
        .iter()
        .flat_map(|(_, b)| b.iter().copied())
        .collect();
    Ok(MolFtpVector {
        values,
        views,
        radius,
    })
}

/// Column names for serialized vectors: `d1_margin, d1_margin_rel,
/// d1_net_0, ...` per present view.
#[must_use]
pub fn vector_headers(views: &[ViewOrder], radius: u8) -> Vec<String> {
    let mut names = Vec::new();
    for view in views {
        let prefix = view.column_prefix();
        names.push(format!("{prefix}_margin"));
        names.push(format!("{prefix}_margin_rel"));
        for depth in 0..=radius {
            names.push(format!("{prefix}_net_{depth}"));
        }
    }
    names
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::{enumerate_fragments, parse_smiles};
    use crate::prevalence::{ScoreEntry, StatDetail, StatVariant};
    use std::collections::BTreeMap;

    fn map_with(scores: &[(u64, f64)]) -> ScoreMap {
        let entries: BTreeMap<u64, ScoreEntry> = scores
            .iter()
            .map(|&(key, score)| {
                let entry = ScoreEntry {
                    score,
                    depth_min: 0,
                    depth_max: 0,
                    support: 1,
                    detail: StatDetail::Contingency {
                        a: 1,
                        b: 0,
                        c: 0,
                        d: 1,
                        log_odds: score,
                    },
                };
                (key, entry)
            })
            .collect();
        ScoreMap {
            order: ViewOrder::OneD,
            stat_variant: StatVariant::FisherOneTailed,
            entries,
        }
    }

    fn table_from(atom_totals_by_depth: Vec<Vec<f64>>) -> AtomScoreTable {
        let radius = (atom_totals_by_depth[0].len() - 1) as u8;
        let atom_totals = atom_totals_by_depth
            .iter()
            .map(|r| r.iter().sum())
            .collect();
        AtomScoreTable {
            molecule_id: 0,
            radius,
            per_depth: atom_totals_by_depth,
            atom_totals,
        }
    }

    /// A 3-atom, radius-0 table with per-atom scores [+2, -1, +0.5].
    fn reference_table() -> AtomScoreTable {
        table_from(vec![vec![2.0], vec![-1.0], vec![0.5]])
    }

    #[test]
    fn methane_places_single_hit() {
        let index = enumerate_fragments(&parse_smiles("C").unwrap(), 7, 4);
        let key = index.hits[0].key;
        let t = atom_score_table(&index, &map_with(&[(key, 2.0)]));
        assert_eq!(t.molecule_id, 7);
        assert_eq!(t.per_depth.len(), 1);
        assert_eq!(t.per_depth[0].len(), 5);
        assert_eq!(t.per_depth[0][0], 2.0);
        assert!(t.per_depth[0][1..].iter().all(|&v| v == 0.0));
        assert_eq!(t.atom_totals, vec![2.0]);
    }

    #[test]
    fn benzene_symmetry_fills_all_depths() {
        let index = enumerate_fragments(&parse_smiles("c1ccccc1").unwrap(), 0, 2);
        let scored: Vec<(u64, f64)> = index.key_presence.iter().map(|&k| (k, 1.0)).collect();
        let t = atom_score_table(&index, &map_with(&scored));
        for row in &t.per_depth {
            assert_eq!(row, &vec![1.0, 1.0, 1.0]);
        }
        let block = margin_block(&t, 0.0);
        assert_eq!(block, vec![6.0, 1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn fully_masked_molecule_yields_zero_vector() {
        let index = enumerate_fragments(&parse_smiles("CCO").unwrap(), 0, 2);
        let t = atom_score_table(&index, &map_with(&[]));
        assert!(t.atom_totals.iter().all(|&v| v == 0.0));
        for pooling in [
            Pooling::MarginCount,
            Pooling::Max,
            Pooling::Mean,
            Pooling::Median,
            Pooling::Softmax,
            Pooling::LogSumExp,
        ] {
            let block = score_block(&t, pooling, 0.0);
            assert!(block.iter().all(|&v| v == 0.0), "{pooling:?}: {block:?}");
        }
    }

    #[test]
    fn counting_margin_reference() {
        let block = margin_block(&reference_table(), 0.0);
        assert_eq!(block[0], 1.0, "2 positive - 1 negative");
        assert!((block[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn counting_margin_gate_excludes_small_scores() {
        let block = margin_block(&reference_table(), 0.75);
        // Only +2 clears the gate upward; -1 clears it downward; +0.5 is
        // ignored entirely.
        assert_eq!(block[0], 0.0);
    }

    #[test]
    fn zeros_cancel_at_gate_zero() {
        let t = table_from(vec![vec![0.0], vec![0.0], vec![3.0]]);
        let block = margin_block(&t, 0.0);
        // The two zero atoms count +1 and -1 each; only the scored atom
        // moves the margin.
        assert_eq!(block[0], 1.0);
    }

    #[test]
    fn unanimous_depth_zero_net() {
        let t = table_from(vec![vec![1.0, 0.0], vec![2.0, 0.0]]);
        let block = margin_block(&t, 0.0);
        assert_eq!(block[2], 1.0, "net_0 unanimous");
        assert_eq!(block[3], 0.0, "net_1 all zero, cancels");
    }

    #[test]
    fn pooled_margin_reference_values() {
        let t = reference_table();
        assert_eq!(pooled_margin(&t, Pooling::Max)[0], 3.0);
        assert!((pooled_margin(&t, Pooling::Mean)[0] - 0.5).abs() < 1e-15);
        assert_eq!(pooled_margin(&t, Pooling::Median)[0], 0.5);
        // Frozen from a 30-digit evaluation of the softmax(|s|) mean and
        // the two-sided log-sum-exp.
        assert!((pooled_margin(&t, Pooling::Softmax)[0] - 1.095_961_732_384_42).abs() < 1e-12);
        assert!((pooled_margin(&t, Pooling::LogSumExp)[0] - 1.201_413_277_982_752_4).abs() < 1e-12);
    }

    #[test]
    fn median_averages_middle_pair() {
        let t = table_from(vec![vec![1.0], vec![3.0], vec![-2.0], vec![0.0]]);
        assert_eq!(pooled_margin(&t, Pooling::Median)[0], 0.5);
    }

    #[test]
    fn single_atom_pooled_margin_is_the_score() {
        for score in [2.5, -2.5] {
            let t = table_from(vec![vec![score]]);
            for pooling in [
                Pooling::Mean,
                Pooling::Median,
                Pooling::Softmax,
                Pooling::LogSumExp,
            ] {
                assert_eq!(pooled_margin(&t, pooling)[0], score, "{pooling:?}");
            }
        }
        // The extreme spread returns the magnitude regardless of sign.
        assert_eq!(
            pooled_margin(&table_from(vec![vec![2.5]]), Pooling::Max)[0],
            2.5
        );
        assert_eq!(
            pooled_margin(&table_from(vec![vec![-2.5]]), Pooling::Max)[0],
            2.5
        );
    }

    #[test]
    fn sign_equivariance_for_signed_poolings() {
        let tables = [
            reference_table(),
            table_from(vec![vec![1.0, -0.5], vec![0.0, 2.0], vec![-3.0, 0.25]]),
            table_from(vec![vec![0.0, 0.0], vec![4.0, -4.0]]),
        ];
        for t in &tables {
            let negated = AtomScoreTable {
                molecule_id: t.molecule_id,
                radius: t.radius,
                per_depth: t
                    .per_depth
                    .iter()
                    .map(|row| row.iter().map(|v| -v).collect())
                    .collect(),
                atom_totals: t.atom_totals.iter().map(|v| -v).collect(),
            };
            for pooling in [
                Pooling::Mean,
                Pooling::Median,
                Pooling::Softmax,
                Pooling::LogSumExp,
            ] {
                let fwd = pooled_margin(t, pooling);
                let rev = pooled_margin(&negated, pooling);
                for (x, y) in fwd.iter().zip(&rev) {
                    assert_eq!(*x, -*y, "{pooling:?}: {fwd:?} vs {rev:?}");
                }
            }
            for gate in [0.0, 0.3] {
                let fwd = margin_block(t, gate);
                let rev = margin_block(&negated, gate);
                for (x, y) in fwd.iter().zip(&rev) {
                    assert_eq!(*x, -*y, "counting gate {gate}");
                }
            }
            // The extreme spread is sign-blind.
            assert_eq!(
                pooled_margin(t, Pooling::Max)[0],
                pooled_margin(&negated, Pooling::Max)[0]
            );
        }
    }

    #[test]
    fn counting_block_is_bounded() {
        let t = table_from(vec![
            vec![5.0, -1.0],
            vec![-2.0, 3.5],
            vec![0.0, 0.0],
            vec![10.0, 10.0],
            vec![-7.0, 0.1],
        ]);
        for gate in [0.0, 0.5, 2.0] {
            let block = margin_block(&t, gate);
            let n = t.atom_totals.len() as f64;
            assert!(block[0].abs() <= n);
            assert!(
                block[1..].iter().all(|v| (-1.0..=1.0).contains(v)),
                "{block:?}"
            );
        }
    }

    #[test]
    fn assembly_orders_views_and_checks_shape() {
        let b1 = vec![1.0; 9];
        let b2 = vec![2.0; 9];
        let b3 = vec![3.0; 9];
        let v = assemble_molftp(&[
            (ViewOrder::ThreeD, b3.clone()),
            (ViewOrder::OneD, b1.clone()),
            (ViewOrder::TwoD, b2.clone()),
        ])
        .unwrap();
        assert_eq!(v.values.len(), 27);
        assert_eq!(v.radius, 6);
        assert_eq!(
            v.views,
            vec![ViewOrder::OneD, ViewOrder::TwoD, ViewOrder::ThreeD]
        );
        assert_eq!(&v.values[..9], &b1[..]);
        assert_eq!(&v.values[18..], &b3[..]);

        let single = assemble_molftp(&[(ViewOrder::OneD, b1.clone())]).unwrap();
        assert_eq!(single.values.len(), 9);

        let two_views = assemble_molftp(&[
            (ViewOrder::OneD, vec![0.0; 5]),
            (ViewOrder::ThreeD, vec![0.0; 5]),
        ])
        .unwrap();
        assert_eq!(two_views.values.len(), 10);
        assert_eq!(two_views.radius, 2);

        assert_eq!(
            assemble_molftp(&[
                (ViewOrder::OneD, vec![0.0; 9]),
                (ViewOrder::TwoD, vec![0.0; 5])
            ]),
            Err(VectorizerError::MismatchedRadius(9, 5))
        );
        assert_eq!(assemble_molftp(&[]), Err(VectorizerError::NoBlocks));
        assert_eq!(
            assemble_molftp(&[(ViewOrder::OneD, b1.clone()), (ViewOrder::OneD, b1)]),
            Err(VectorizerError::DuplicateView(ViewOrder::OneD))
        );
    }

    #[test]
    fn header_layout_matches_vector() {
        let names = vector_headers(&[ViewOrder::OneD, ViewOrder::TwoD, ViewOrder::ThreeD], 6);
        assert_eq!(names.len(), 27);
        assert_eq!(names[0], "d1_margin");
        assert_eq!(names[1], "d1_margin_rel");
        assert_eq!(names[2], "d1_net_0");
        assert_eq!(names[8], "d1_net_6");
        assert_eq!(names[9], "d2_margin");
        assert_eq!(names[26], "d3_net_6");
    }
}
