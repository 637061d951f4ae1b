//! Per-key 2x2 contingency tables and 1D prevalence scores.
//!
//! Every fragment key observed in the dataset gets a table counting
//! positive/negative molecules with and without the key. Haldane smoothing
//! (adding alpha = 1/2 to each cell) keeps the log-odds finite. The signed
//! score is `-log10` of a two-sided normal tail for the standardized
//! log-odds, capped at 300 by the p-value floor.
//!
//! Floating-point layout is chosen so that label inversion (which swaps
//! a<->b and c<->d) negates every weight and score bit-for-bit: logs are
//! taken per side and subtracted, and symmetric sums are grouped in
//! swap-invariant pairs.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::chem::FragmentIndex;
use crate::stats::{chi_square_survival, erfc, signed_score, P_FLOOR};

/// Haldane smoothing constant added to every contingency cell.
pub const HALDANE_ALPHA: f64 = 0.5;

/// How molecules contribute to the `a`/`b` cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMode {
    /// Each molecule adds at most 1 per key.
    Presence,
    /// `a`/`b` accumulate per-molecule occurrence counts; `c`/`d` remain
    /// molecule counts, so `a+b+c+d = N` no longer holds and the table set
    /// is flagged with this mode.
    Count,
}

/// Counts of (class x key presence) with the smoothing constant attached.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContingencyTable {
    /// Positives with the key (occurrences in count mode).
    pub a: u64,
    /// Negatives with the key (occurrences in count mode).
    pub b: u64,
    /// Positive molecules without the key.
    pub c: u64,
    /// Negative molecules without the key.
    pub d: u64,
    pub alpha: f64,
}

impl ContingencyTable {
    #[must_use]
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> ContingencyTable {
        ContingencyTable {
            a,
            b,
            c,
            d,
            alpha: HALDANE_ALPHA,
        }
    }

    /// Total observations in the table.
    #[must_use]
    pub fn n(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }
}

/// Derived statistics of one table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyStats {
    /// Smoothed log-odds in log2 units.
    pub log_odds: f64,
    /// Delta-method variance of the log-odds.
    pub variance: f64,
    /// Standardized statistic |w| / sqrt(var).
    pub z: f64,
    /// Tail probability, floored at `P_FLOOR` so it stays in (0, 1].
    pub p: f64,
    /// sgn(w) * -log10(p); magnitude capped at 300 by the floor.
    pub score: f64,
}

/// Smoothed log-odds `log2((a+α)(d+α)) - log2((b+α)(c+α))`.
///
/// Written as a difference of logs (not a log of a quotient) so swapping
/// (a,b) and (c,d) negates the result exactly.
#[must_use]
pub fn log_odds(t: &ContingencyTable) -> f64 {
    let al = t.alpha;
    let with = (t.a as f64 + al) * (t.d as f64 + al);
    let without = (t.b as f64 + al) * (t.c as f64 + al);
    with.log2() - without.log2()
}

/// Same formula on raw f64 cells; used by the leave-one-out oracle where
/// cells are decremented before evaluation.
#[must_use]
pub fn log_odds_cells(a: f64, b: f64, c: f64, d: f64, alpha: f64) -> f64 {
    ((a + alpha) * (d + alpha)).log2() - ((b + alpha) * (c + alpha)).log2()
}

/// Standardized two-sided significance of the log-odds.
#[must_use]
pub fn significance(t: &ContingencyTable) -> KeyStats {
    let w = log_odds(t);
    let al = t.alpha;
    let ln2 = core::f64::consts::LN_2;
    // Grouped so that the a<->b / c<->d swap reorders only within the
    // commutative pair sums, keeping the value bit-identical.
    let recip_sum = (1.0 / (t.a as f64 + al) + 1.0 / (t.b as f64 + al))
        + (1.0 / (t.c as f64 + al) + 1.0 / (t.d as f64 + al));
    let variance = recip_sum / (ln2 * ln2);
    let z = w.abs() / variance.sqrt();
    let p = erfc(z / core::f64::consts::SQRT_2).max(P_FLOOR);
    let score = signed_score(w, p);
    KeyStats {
        log_odds: w,
        variance,
        z,
        p,
        score,
    }
}

/// Chi-square alternative: Pearson statistic on the smoothed cells, with
/// the same sign convention as [`significance`]. `z` is reported as the
/// square root of the statistic (its normal-scale equivalent at df = 1).
#[must_use]
pub fn chi_square_stats(t: &ContingencyTable) -> KeyStats {
    let al = t.alpha;
    let (a, b, c, d) = (
        t.a as f64 + al,
        t.b as f64 + al,
        t.c as f64 + al,
        t.d as f64 + al,
    );
    let n = (a + b) + (c + d);
    let diff = a * d - b * c;
    // Swap-invariant grouping: (a+b)(c+d) and (a+c)(b+d) each map to
    // themselves under the label swap.
    let denom = ((a + b) * (c + d)) * ((a + c) * (b + d));
    let stat = n * (diff * diff) / denom;
    let p = chi_square_survival(stat, 1).max(P_FLOOR);
    let w = log_odds(t);
    let variance = significance(t).variance;
    KeyStats {
        log_odds: w,
        variance,
        z: stat.sqrt(),
        p,
        score: signed_score(w, p),
    }
}

/// Contingency table of one key plus bookkeeping shared by later stages.
#[derive(Debug, Clone, PartialEq)]
pub struct TableEntry {
    pub table: ContingencyTable,
    /// Molecules containing the key (presence-based in both count modes).
    pub support: u32,
    pub depth_min: u8,
    pub depth_max: u8,
}

/// All per-key tables of a dataset (or of a training subset).
#[derive(Debug, Clone, PartialEq)]
pub struct TableSet {
    pub entries: BTreeMap<u64, TableEntry>,
    /// Positive / negative molecule counts among the accumulated rows.
    pub n_pos: u32,
    pub n_neg: u32,
    pub mode: CountMode,
    /// Molecule ids that were read while accumulating; lets tests assert
    /// that train-only table construction never touched a test row.
    pub contributors: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrevalenceError {
    #[error("cannot accumulate tables over an empty dataset")]
    EmptyDataset,
    #[error("indexes ({indexes}) and labels ({labels}) differ in length")]
    LengthMismatch { indexes: usize, labels: usize },
    #[error("row selection references molecule {row} beyond dataset size {len}")]
    RowOutOfRange { row: usize, len: usize },
}

#[derive(Clone, Copy, Default)]
struct KeyAcc {
    pos_mol: u32,
    neg_mol: u32,
    pos_occ: u64,
    neg_occ: u64,
    depth_min: u8,
    depth_max: u8,
}

/// Accumulate per-key tables over all rows.
pub fn accumulate_tables(
    indexes: &[FragmentIndex],
    labels: &[bool],
    mode: CountMode,
) -> Result<TableSet, PrevalenceError> {
    let rows: Vec<usize> = (0..indexes.len()).collect();
    accumulate_tables_subset(indexes, labels, &rows, mode)
}

/// Accumulate per-key tables over a row subset (e.g. a training fold).
///
/// Only the listed rows are read; `contributors` records exactly which
/// molecule ids entered the counts.
pub fn accumulate_tables_subset(
    indexes: &[FragmentIndex],
    labels: &[bool],
    rows: &[usize],
    mode: CountMode,
) -> Result<TableSet, PrevalenceError> {
    if indexes.len() != labels.len() {
        return Err(PrevalenceError::LengthMismatch {
            indexes: indexes.len(),
            labels: labels.len(),
        });
    }
    if rows.is_empty() {
        return Err(PrevalenceError::EmptyDataset);
    }
    if let Some(&bad) = rows.iter().find(|&&r| r >= indexes.len()) {
        return Err(PrevalenceError::RowOutOfRange {
            row: bad,
            len: indexes.len(),
        });
    }

    // Shard per row, merge per key; merging is commutative and associative
    // (integer sums, min/max), so the parallel reduction order cannot
    // change the result.
    let merged: BTreeMap<u64, KeyAcc> = rows
        .par_iter()
        .fold(BTreeMap::new, |mut acc: BTreeMap<u64, KeyAcc>, &row| {
            let index = &indexes[row];
            let positive = labels[row];
            for hit in &index.hits {
                let e = acc.entry(hit.key).or_insert(KeyAcc {
                    depth_min: u8::MAX,
                    ..KeyAcc::default()
                });
                e.depth_min = e.depth_min.min(hit.depth);
                e.depth_max = e.depth_max.max(hit.depth);
            }
            for (&key, &count) in &index.key_counts {
                let e = acc.get_mut(&key).expect("key seen in hits");
                if positive {
                    e.pos_mol += 1;
                    e.pos_occ += u64::from(count);
                } else {
                    e.neg_mol += 1;
                    e.neg_occ += u64::from(count);
                }
            }
            acc
        })
        .reduce(BTreeMap::new, |mut left, right| {
            for (key, r) in right {
                let e = left.entry(key).or_insert(KeyAcc {
                    depth_min: u8::MAX,
                    ..KeyAcc::default()
                });
                e.pos_mol += r.pos_mol;
                e.neg_mol += r.neg_mol;
                e.pos_occ += r.pos_occ;
                e.neg_occ += r.neg_occ;
                e.depth_min = e.depth_min.min(r.depth_min);
                e.depth_max = e.depth_max.max(r.depth_max);
            }
            left
        });

    let n_pos = rows.iter().filter(|&&r| labels[r]).count() as u32;
    let n_neg = rows.len() as u32 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        log::warn!(
            "single-class dataset ({n_pos} positive, {n_neg} negative): every key weight will share the same sign structure"
        );
    }

    let entries = merged
        .into_iter()
        .map(|(key, acc)| {
            let (a, b) = match mode {
                CountMode::Presence => (u64::from(acc.pos_mol), u64::from(acc.neg_mol)),
                CountMode::Count => (acc.pos_occ, acc.neg_occ),
            };
            let c = u64::from(n_pos - acc.pos_mol);
            let d = u64::from(n_neg - acc.neg_mol);
            let entry = TableEntry {
                table: ContingencyTable::new(a, b, c, d),
                support: acc.pos_mol + acc.neg_mol,
                depth_min: acc.depth_min,
                depth_max: acc.depth_max,
            };
            (key, entry)
        })
        .collect();

    Ok(TableSet {
        entries,
        n_pos,
        n_neg,
        mode,
        contributors: rows.iter().copied().collect(),
    })
}

/// Which interaction order a score map belongs to.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
pub enum ViewOrder {
    #[serde(rename = "1d")]
    OneD,
    #[serde(rename = "2d")]
    TwoD,
    #[serde(rename = "3d")]
    ThreeD,
}

impl ViewOrder {
    #[must_use]
    pub fn label(self) -> &'static str {
        match self {
            ViewOrder::OneD => "1d",
            ViewOrder::TwoD => "2d",
            ViewOrder::ThreeD => "3d",
        }
    }

    /// Prefix used in vector export column names (d1_margin, ...).
    #[must_use]
    pub fn column_prefix(self) -> &'static str {
        match self {
            ViewOrder::OneD => "d1",
            ViewOrder::TwoD => "d2",
            ViewOrder::ThreeD => "d3",
        }
    }
}

/// Statistic that produced a score map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatVariant {
    FisherOneTailed,
    Chi2,
    McNemar,
    Binomial,
    Friedman,
}

impl StatVariant {
    #[must_use]
    pub fn name(self) -> &'static str {
        match self {
            StatVariant::FisherOneTailed => "fisher_onetailed",
            StatVariant::Chi2 => "chi2",
            StatVariant::McNemar => "mcnemar",
            StatVariant::Binomial => "binomial",
            StatVariant::Friedman => "friedman",
        }
    }
}

/// Order-specific counts carried alongside each score for serialization
/// and the leakage transforms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StatDetail {
    /// 1D: the table cells and the smoothed log-odds.
    Contingency {
        a: u64,
        b: u64,
        c: u64,
        d: u64,
        log_odds: f64,
    },
    /// 2D: discordant-pair counts by which side carried the key.
    DiscordantPairs { n10: u32, n01: u32 },
    /// 3D: triplet votes for/against the positive class.
    TripletVotes { m_align: u32, m_anti: u32 },
}

/// One scored key.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreEntry {
    pub score: f64,
    pub depth_min: u8,
    pub depth_max: u8,
    /// Molecules containing the key among the rows the map was built from.
    pub support: u32,
    pub detail: StatDetail,
}

/// Signed scores per fragment key for one interaction order.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    pub order: ViewOrder,
    pub stat_variant: StatVariant,
    pub entries: BTreeMap<u64, ScoreEntry>,
}

impl ScoreMap {
    /// Score of a key; unknown keys contribute nothing.
    #[must_use]
    pub fn score(&self, key: u64) -> Option<f64> {
        self.entries.get(&key).map(|e| e.score)
    }

    /// Tabular text export, one row per key sorted by key.
    ///
    /// 1D column layout: key, depth_min, depth_max, a, b, c, d, w, score,
    /// support. 2D/3D replace the cell columns with n10/n01 or
    /// m_align/m_anti.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        match self.order {
            ViewOrder::OneD => writeln!(out, "key,depth_min,depth_max,a,b,c,d,w,score,support")?,
            ViewOrder::TwoD => writeln!(out, "key,depth_min,depth_max,n10,n01,score,support")?,
            ViewOrder::ThreeD => {
                writeln!(out, "key,depth_min,depth_max,m_align,m_anti,score,support")?
            }
        }
        for (key, e) in &self.entries {
            match e.detail {
                StatDetail::Contingency {
                    a,
                    b,
                    c,
                    d,
                    log_odds,
                } => writeln!(
                    out,
                    "{key:016x},{},{},{a},{b},{c},{d},{log_odds},{},{}",
                    e.depth_min, e.depth_max, e.score, e.support
                )?,
                StatDetail::DiscordantPairs { n10, n01 } => writeln!(
                    out,
                    "{key:016x},{},{},{n10},{n01},{},{}",
                    e.depth_min, e.depth_max, e.score, e.support
                )?,
                StatDetail::TripletVotes { m_align, m_anti } => writeln!(
                    out,
                    "{key:016x},{},{},{m_align},{m_anti},{},{}",
                    e.depth_min, e.depth_max, e.score, e.support
                )?,
            }
        }
        Ok(())
    }
}

/// 1D statistic selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OneDStat {
    /// The default erfc-based significance of the log-odds (the config name
    /// follows the statistic's conventional label even though the erfc form
    /// is a two-sided normal approximation).
    FisherOnetailed,
    /// Pearson chi-square survival on the smoothed table, same signing.
    Chi2,
}

/// Score every key of a table set.
#[must_use]
pub fn build_score_map(tables: &TableSet, variant: OneDStat) -> ScoreMap {
    let scored: Vec<(u64, ScoreEntry)> = tables
        .entries
        .par_iter()
        .map(|(&key, entry)| {
            let stats = match variant {
                OneDStat::FisherOnetailed => significance(&entry.table),
                OneDStat::Chi2 => chi_square_stats(&entry.table),
            };
            let t = &entry.table;
            let detail = StatDetail::Contingency {
                a: t.a,
                b: t.b,
                c: t.c,
                d: t.d,
                log_odds: stats.log_odds,
            };
            let score_entry = ScoreEntry {
                score: stats.score,
                depth_min: entry.depth_min,
                depth_max: entry.depth_max,
                support: entry.support,
                detail,
            };
            (key, score_entry)
        })
        .collect();
    ScoreMap {
        order: ViewOrder::OneD,
        stat_variant: match variant {
            OneDStat::FisherOnetailed => StatVariant::FisherOneTailed,
            OneDStat::Chi2 => StatVariant::Chi2,
        },
        entries: scored.into_iter().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::{enumerate_fragments, parse_smiles};
    use crate::stats::{sign, SCORE_CAP};

    fn table(a: u64, b: u64, c: u64, d: u64) -> ContingencyTable {
        ContingencyTable::new(a, b, c, d)
    }

    fn indexes_of(smiles: &[&str], radius: u8) -> Vec<FragmentIndex> {
        smiles
            .iter()
            .enumerate()
            .map(|(i, s)| enumerate_fragments(&parse_smiles(s).unwrap(), i, radius))
            .collect()
    }

    #[test]
    fn log_odds_reference_values() {
        assert_eq!(log_odds(&table(1, 1, 1, 1)), 0.0);
        // log2(49) and -log2(121), from direct evaluation.
        assert!((log_odds(&table(3, 0, 0, 3)) - 5.614_709_844_115_208).abs() < 1e-12);
        assert!((log_odds(&table(0, 5, 5, 0)) + 6.918_863_237_274_595).abs() < 1e-12);
    }

    #[test]
    fn log_odds_monotone_in_a() {
        let mut prev = f64::NEG_INFINITY;
        for a in 0..30 {
            let w = log_odds(&table(a, 7, 11, 13));
            assert!(w > prev);
            prev = w;
        }
    }

    #[test]
    fn significance_reference_table() {
        // Frozen from a 30-digit evaluation of the formulas.
        let s = significance(&table(3, 0, 0, 3));
        assert!((s.variance - 9.514_829_627_454_207).abs() < 1e-12);
        assert!((s.z - 1.820_232_270_802_798_6).abs() < 1e-12);
        assert!((s.p - 0.068_723_640_648_820_2).abs() < 1e-13);
        assert!((s.score - 1.162_893_841_729_018_6).abs() < 1e-12);
    }

    #[test]
    fn significance_null_table_scores_zero() {
        let s = significance(&table(1, 1, 1, 1));
        assert_eq!(s.log_odds, 0.0);
        assert_eq!(s.z, 0.0);
        assert_eq!(s.p, 1.0);
        assert_eq!(s.score, 0.0);
    }

    #[test]
    fn extreme_tables_cap_at_300() {
        // Cells of 1e16 push z past 37, where the two-sided tail underflows
        // the 1e-300 floor and the cap engages.
        let n = 10_u64.pow(16);
        let s = significance(&table(n, 0, 0, n));
        assert_eq!(s.score, SCORE_CAP);
        assert_eq!(s.p, P_FLOOR);
        let neg = significance(&table(0, n, n, 0));
        assert_eq!(neg.score, -SCORE_CAP);
    }

    #[test]
    fn label_inversion_negates_weights_and_scores_exactly() {
        let cases = [
            (3, 0, 0, 3),
            (17, 4, 120, 260),
            (1, 0, 999, 1000),
            (5, 5, 5, 5),
            (2, 9, 31, 8),
        ];
        for (a, b, c, d) in cases {
            let t = table(a, b, c, d);
            let inv = table(b, a, d, c);
            let s = significance(&t);
            let si = significance(&inv);
            assert_eq!(s.log_odds, -si.log_odds, "w not exactly negated for {t:?}");
            assert_eq!(s.score, -si.score, "score not exactly negated for {t:?}");
            assert_eq!(s.variance, si.variance);
            let c1 = chi_square_stats(&t);
            let c2 = chi_square_stats(&inv);
            assert_eq!(
                c1.score, -c2.score,
                "chi2 score not exactly negated for {t:?}"
            );
        }
    }

    #[test]
    fn chi_square_agrees_in_sign_with_default() {
        for (a, b, c, d) in [(3, 0, 0, 3), (0, 5, 5, 0), (1, 1, 1, 1), (9, 2, 4, 13)] {
            let t = table(a, b, c, d);
            let f = significance(&t);
            let x = chi_square_stats(&t);
            assert_eq!(sign(f.score), sign(x.score), "{t:?}");
        }
    }

    #[test]
    fn presence_accumulation_counts_each_molecule_once() {
        // Two positives share a ring; the two negatives are chains.
        let idx = indexes_of(&["C1CC1", "C1CC1", "CCC", "CCO"], 1);
        let labels = vec![true, true, false, false];
        let tables = accumulate_tables(&idx, &labels, CountMode::Presence).unwrap();
        assert_eq!(tables.n_pos, 2);
        assert_eq!(tables.n_neg, 2);
        // The ring-carbon key at depth 0 is present in both positives only.
        let ring_key = idx[0].hits[0].key;
        let e = &tables.entries[&ring_key];
        assert_eq!(
            (e.table.a, e.table.b, e.table.c, e.table.d),
            (2, 0, 0, 2),
            "ring key table"
        );
        assert_eq!(e.support, 2);
        // Presence mode: every table sums to N.
        assert!(tables.entries.values().all(|e| e.table.n() == 4));
    }

    #[test]
    fn count_mode_accumulates_occurrences() {
        // Benzene has 6 occurrences of its depth-0 key; methane misses it.
        let idx = indexes_of(&["c1ccccc1", "C"], 0);
        let labels = vec![true, false];
        let tables = accumulate_tables(&idx, &labels, CountMode::Count).unwrap();
        let aromatic_key = idx[0].hits[0].key;
        let e = &tables.entries[&aromatic_key];
        assert_eq!((e.table.a, e.table.b, e.table.c, e.table.d), (6, 0, 0, 1));
        assert_eq!(e.support, 1);
        assert_eq!(tables.mode, CountMode::Count);
    }

    #[test]
    fn support_identity_over_molecules() {
        let idx = indexes_of(&["CCO", "CCN", "c1ccccc1", "CC(C)C"], 3);
        let labels = vec![true, false, true, false];
        let tables = accumulate_tables(&idx, &labels, CountMode::Presence).unwrap();
        let support_sum: u64 = tables.entries.values().map(|e| u64::from(e.support)).sum();
        let distinct_sum: u64 = idx.iter().map(|i| i.key_presence.len() as u64).sum();
        assert_eq!(support_sum, distinct_sum);
    }

    #[test]
    fn empty_and_mismatched_inputs_error() {
        let idx = indexes_of(&["CC"], 1);
        assert_eq!(
            accumulate_tables(&[], &[], CountMode::Presence),
            Err(PrevalenceError::EmptyDataset)
        );
        assert_eq!(
            accumulate_tables(&idx, &[true, false], CountMode::Presence),
            Err(PrevalenceError::LengthMismatch {
                indexes: 1,
                labels: 2
            })
        );
        assert_eq!(
            accumulate_tables_subset(&idx, &[true], &[3], CountMode::Presence),
            Err(PrevalenceError::RowOutOfRange { row: 3, len: 1 })
        );
    }

    #[test]
    fn subset_accumulation_records_contributors() {
        let idx = indexes_of(&["CCO", "CCN", "CCC", "CCCl"], 2);
        let labels = vec![true, false, true, false];
        let tables =
            accumulate_tables_subset(&idx, &labels, &[0, 2, 3], CountMode::Presence).unwrap();
        assert_eq!(
            tables.contributors.iter().copied().collect::<Vec<_>>(),
            vec![0, 2, 3]
        );
        assert_eq!(tables.n_pos, 2);
        assert_eq!(tables.n_neg, 1);
    }

    #[test]
    fn score_map_has_one_entry_per_key_with_reference_score() {
        let idx = indexes_of(&["C1CC1", "C1CC1", "CCC", "CCO"], 0);
        let labels = vec![true, true, false, false];
        let tables = accumulate_tables(&idx, &labels, CountMode::Presence).unwrap();
        let map = build_score_map(&tables, OneDStat::FisherOnetailed);
        assert_eq!(map.entries.len(), tables.entries.len());
        assert_eq!(map.order, ViewOrder::OneD);
        // (2,0,0,2) has w = log2(6.25/0.25) and its erfc score.
        let ring_key = idx[0].hits[0].key;
        let e = &map.entries[&ring_key];
        let expected = significance(&ContingencyTable::new(2, 0, 0, 2)).score;
        assert_eq!(e.score, expected);
        assert!(e.score > 0.0);
    }

    #[test]
    fn score_map_serialization_is_sorted_and_hex_keyed() {
        let idx = indexes_of(&["CCO", "CCN"], 1);
        let labels = vec![true, false];
        let tables = accumulate_tables(&idx, &labels, CountMode::Presence).unwrap();
        let map = build_score_map(&tables, OneDStat::FisherOnetailed);
        let mut buf = Vec::new();
        map.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "key,depth_min,depth_max,a,b,c,d,w,score,support"
        );
        let keys: Vec<String> = lines
            .map(|l| l.split(',').next().unwrap().to_string())
            .collect();
        assert_eq!(keys.len(), map.entries.len());
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted, "rows sorted by hex key");
        assert!(keys.iter().all(|k| k.len() == 16));
    }
}
