//! Leakage control: dummy masking, key-level leave-one-out, and the audit
//! that checks the cheap adjustment against the exact LOO oracle.
//!
//! Score maps built from all molecules leak test labels through the keys
//! each test molecule contributed. Two remedies are offered: *dummy
//! masking* zeroes keys unseen in a training fold and shrinks the rest by
//! their train-support fraction, while *key-LOO* zeroes rare keys (support
//! below `k`) and shrinks everything else by a constant factor `s`,
//! approximating what per-molecule leave-one-out would have done. The
//! oracle here recomputes true LOO weights exactly so the approximation
//! error can be measured per key and compared against its analytic bound.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use thiserror::Error;

use crate::chem::FragmentIndex;
use crate::prevalence::{
    log_odds, log_odds_cells, ContingencyTable, CountMode, ScoreMap, TableSet,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LeakageError {
    #[error("fold {fold_id}: {problem}")]
    InvalidFold { fold_id: usize, problem: String },
    #[error("dummy masking requires fold-restricted support counts")]
    MissingTrainSupport,
    #[error("key {key:016x} present in the score map but absent from the support table")]
    KeyMissingFromSupport { key: u64 },
    #[error("leave-one-out needs at least 2 observations, table has {n}")]
    TableTooSmall { n: u64 },
    #[error("cell {cell:?} is 0 and cannot be decremented")]
    EmptyCell { cell: Cell },
    #[error("invalid leave-one-out config: {0}")]
    InvalidConfig(String),
    #[error("the LOO bound audit is defined on presence-mode tables")]
    CountModeAudit,
}

/// One cross-validation fold: a disjoint train/test split of `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSpec {
    pub fold_id: usize,
    pub train_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
}

impl FoldSpec {
    /// Validate that train and test are non-empty, disjoint, and cover
    /// `0..dataset_size` exactly. Ids are stored sorted.
    pub fn new(
        fold_id: usize,
        mut train_ids: Vec<usize>,
        mut test_ids: Vec<usize>,
        dataset_size: usize,
    ) -> Result<FoldSpec, LeakageError> {
        let fail = |problem: String| LeakageError::InvalidFold { fold_id, problem };
        if train_ids.is_empty() || test_ids.is_empty() {
            return Err(fail("train and test must both be non-empty".into()));
        }
        train_ids.sort_unstable();
        test_ids.sort_unstable();
        let train: BTreeSet<usize> = train_ids.iter().copied().collect();
        let test: BTreeSet<usize> = test_ids.iter().copied().collect();
        if train.len() != train_ids.len() || test.len() != test_ids.len() {
            return Err(fail("duplicate molecule ids".into()));
        }
        if let Some(&shared) = train.intersection(&test).next() {
            return Err(fail(format!("molecule {shared} is in both train and test")));
        }
        // Distinct, disjoint, in-range, and counted: that pins the union
        // to exactly 0..dataset_size.
        if train.len() + test.len() != dataset_size
            || train
                .iter()
                .chain(test.iter())
                .any(|&id| id >= dataset_size)
        {
            return Err(fail(format!(
                "train ∪ test must cover exactly 0..{dataset_size}"
            )));
        }
        Ok(FoldSpec {
            fold_id,
            train_ids,
            test_ids,
        })
    }
}

/// Presence-based molecule counts per key, dataset-wide and (when built
/// from a fold) train-restricted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeySupport {
    pub dataset_size: u32,
    /// Molecules containing each key across the whole dataset.
    pub totals: BTreeMap<u64, u32>,
    /// Train-fold counts; `None` when no fold was given. Keys absent from
    /// the map were seen only in test molecules.
    pub train: Option<BTreeMap<u64, u32>>,
}

impl KeySupport {
    #[must_use]
    pub fn n_total(&self, key: u64) -> u32 {
        self.totals.get(&key).copied().unwrap_or(0)
    }

    /// Train-fold count; `None` without a fold.
    #[must_use]
    pub fn n_train(&self, key: u64) -> Option<u32> {
        self.train
            .as_ref()
            .map(|m| m.get(&key).copied().unwrap_or(0))
    }
}

/// Count molecules containing each key, optionally also restricted to a
/// fold's training molecules.
#[must_use]
pub fn key_support(indexes: &[FragmentIndex], fold: Option<&FoldSpec>) -> KeySupport {
    let mut totals: BTreeMap<u64, u32> = BTreeMap::new();
    for index in indexes {
        for &key in &index.key_presence {
            *totals.entry(key).or_insert(0) += 1;
        }
    }
    let train = fold.map(|f| {
        let mut counts: BTreeMap<u64, u32> = BTreeMap::new();
        for &row in &f.train_ids {
            for &key in &indexes[row].key_presence {
                *counts.entry(key).or_insert(0) += 1;
            }
        }
        counts
    });
    KeySupport {
        dataset_size: indexes.len() as u32,
        totals,
        train,
    }
}

/// Parameters of the key-level leave-one-out adjustment and its bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LooConfig {
    /// Minimum dataset support for a key to survive (default 2).
    pub k: u32,
    /// Uniform shrink factor applied to surviving scores, normally
    /// (N-1)/N.
    pub s: f64,
    /// Bound constant; defaults to the largest single-decrement effect on
    /// the smoothed log-odds, `2*log2((1+alpha)/alpha)`.
    pub c_alpha: f64,
}

/// Largest magnitude by which removing one molecule can move a smoothed
/// log-odds cell term: `2*log2((1+alpha)/alpha)`.
#[must_use]
pub fn default_c_alpha(alpha: f64) -> f64 {
    2.0 * ((1.0 + alpha) / alpha).log2()
}

impl LooConfig {
    /// The standard configuration for a dataset of `n` molecules:
    /// k = 2, s = (n-1)/n, and the alpha-derived bound constant.
    #[must_use]
    pub fn for_dataset_size(n: u32) -> LooConfig {
        LooConfig {
            k: 2,
            s: f64::from(n - 1) / f64::from(n),
            c_alpha: default_c_alpha(crate::prevalence::HALDANE_ALPHA),
        }
    }

    pub fn validate(&self) -> Result<(), LeakageError> {
        if self.k < 1 {
            return Err(LeakageError::InvalidConfig("k must be at least 1".into()));
        }
        if !(self.s > 0.0 && self.s <= 1.0) {
            return Err(LeakageError::InvalidConfig(format!(
                "s must lie in (0, 1], got {}",
                self.s
            )));
        }
        if !self.c_alpha.is_finite() || self.c_alpha <= 0.0 {
            return Err(LeakageError::InvalidConfig(
                "C_alpha must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn zero_norm(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x
    }
}

/// Zero scores of keys unseen in the training fold; shrink the rest by
/// their train-support fraction `n_train / n_total`.
///
/// The support must carry fold-restricted counts, and every scored key
/// must have a dataset-wide count (score maps and support built from the
/// same dataset guarantee this).
pub fn dummy_mask(scores: &ScoreMap, support: &KeySupport) -> Result<ScoreMap, LeakageError> {
    let train = support
        .train
        .as_ref()
        .ok_or(LeakageError::MissingTrainSupport)?;
    let entries = scores
        .entries
        .iter()
        .map(|(&key, e)| {
            let n_total = support
                .totals
                .get(&key)
                .copied()
                .ok_or(LeakageError::KeyMissingFromSupport { key })?;
            let n_train = train.get(&key).copied().unwrap_or(0);
            let factor = f64::from(n_train) / f64::from(n_total);
            let mut masked = *e;
            masked.score = zero_norm(e.score * factor);
            Ok((key, masked))
        })
        .collect::<Result<BTreeMap<_, _>, LeakageError>>()?;
    Ok(ScoreMap {
        order: scores.order,
        stat_variant: scores.stat_variant,
        entries,
    })
}

/// Zero scores of keys with dataset support below `cfg.k`; shrink the rest
/// by `cfg.s`. Keys missing from the support count as support 0.
#[must_use]
pub fn key_loo_adjust(scores: &ScoreMap, support: &KeySupport, cfg: &LooConfig) -> ScoreMap {
    let entries = scores
        .entries
        .iter()
        .map(|(&key, e)| {
            let mut adjusted = *e;
            adjusted.score = if support.n_total(key) < cfg.k {
                0.0
            } else {
                zero_norm(e.score * cfg.s)
            };
            (key, adjusted)
        })
        .collect();
    ScoreMap {
        order: scores.order,
        stat_variant: scores.stat_variant,
        entries,
    }
}

/// Contingency cell selector for the influence oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    A,
    B,
    C,
    D,
}

impl Cell {
    pub const ALL: [Cell; 4] = [Cell::A, Cell::B, Cell::C, Cell::D];

    fn value(self, t: &ContingencyTable) -> u64 {
        match self {
            Cell::A => t.a,
            Cell::B => t.b,
            Cell::C => t.c,
            Cell::D => t.d,
        }
    }
}

fn branch_log_odds(t: &ContingencyTable, decremented: Cell) -> f64 {
    let (mut a, mut b, mut c, mut d) = (t.a as f64, t.b as f64, t.c as f64, t.d as f64);
    match decremented {
        Cell::A => a -= 1.0,
        Cell::B => b -= 1.0,
        Cell::C => c -= 1.0,
        Cell::D => d -= 1.0,
    }
    log_odds_cells(a, b, c, d, t.alpha)
}

/// Exact expected log-odds after removing one observation uniformly at
/// random: the average of the four decremented tables weighted by cell
/// mass. Empty cells carry zero weight and are skipped.
///
/// Terms are grouped as (a-branch + b-branch) + (c-branch + d-branch) so
/// label inversion negates the result bit-for-bit.
pub fn true_loo_weight(t: &ContingencyTable) -> Result<f64, LeakageError> {
    let n = t.n();
    if n < 2 {
        return Err(LeakageError::TableTooSmall { n });
    }
    let nf = n as f64;
    let term = |cell: Cell| {
        let mass = cell.value(t);
        if mass == 0 {
            0.0
        } else {
            (mass as f64 / nf) * branch_log_odds(t, cell)
        }
    };
    Ok((term(Cell::A) + term(Cell::B)) + (term(Cell::C) + term(Cell::D)))
}

/// Change in the smoothed log-odds when one observation leaves the named
/// cell, by direct re-evaluation.
pub fn influence_delta(t: &ContingencyTable, cell: Cell) -> Result<f64, LeakageError> {
    if cell.value(t) == 0 {
        return Err(LeakageError::EmptyCell { cell });
    }
    Ok(branch_log_odds(t, cell) - log_odds(t))
}

/// Per-key comparison of the key-LOO approximation against the exact LOO
/// oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundEntry {
    pub key: u64,
    /// |w_KLOO - w_LOO|: approximation minus oracle, in log2 units.
    pub deviation: f64,
    /// C_alpha / k + |s - (N-1)/N| * |w|.
    pub bound: f64,
    pub within: bool,
}

/// Audit outcome over every key of a table set.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub entries: Vec<BoundEntry>,
    pub fraction_within: f64,
    pub k: u32,
    pub s: f64,
    pub c_alpha: f64,
}

impl BoundReport {
    /// Tabular export: a summary comment line, a header, then one row per
    /// key sorted by key.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(
            out,
            "# fraction_within={} k={} s={} c_alpha={}",
            self.fraction_within, self.k, self.s, self.c_alpha
        )?;
        writeln!(out, "key,deviation,bound,within")?;
        for e in &self.entries {
            writeln!(
                out,
                "{:016x},{},{},{}",
                e.key, e.deviation, e.bound, e.within
            )?;
        }
        Ok(())
    }
}

/// Compare the key-LOO weight (0 below support `k`, else `s * w`) against
/// the exact oracle for every key, reporting the per-key deviation, its
/// analytic bound, and the fraction of keys within bound.
///
/// Defined on presence-mode tables, where each observation is one
/// molecule and the oracle's leave-one-out semantics make sense.
pub fn loo_bound_report(tables: &TableSet, cfg: &LooConfig) -> Result<BoundReport, LeakageError> {
    cfg.validate()?;
    if tables.mode == CountMode::Count {
        return Err(LeakageError::CountModeAudit);
    }
    let n = tables.n_pos + tables.n_neg;
    if n < 2 {
        return Err(LeakageError::TableTooSmall { n: u64::from(n) });
    }
    let loo_factor = f64::from(n - 1) / f64::from(n);
    let mut entries = Vec::with_capacity(tables.entries.len());
    let mut within_count = 0usize;
    for (&key, entry) in &tables.entries {
        let w = log_odds(&entry.table);
        let w_kloo = if entry.support < cfg.k {
            0.0
        } else {
            cfg.s * w
        };
        let w_loo = true_loo_weight(&entry.table)?;
        let deviation = (w_kloo - w_loo).abs();
        let bound = cfg.c_alpha / f64::from(cfg.k) + (cfg.s - loo_factor).abs() * w.abs();
        let within = deviation <= bound;
        within_count += usize::from(within);
        entries.push(BoundEntry {
            key,
            deviation,
            bound,
            within,
        });
    }
    let fraction_within = within_count as f64 / entries.len().max(1) as f64;
    Ok(BoundReport {
        entries,
        fraction_within,
        k: cfg.k,
        s: cfg.s,
        c_alpha: cfg.c_alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::{enumerate_fragments, parse_smiles};
    use crate::prevalence::{accumulate_tables, build_score_map, CountMode, OneDStat};

    fn indexes_of(smiles: &[&str], radius: u8) -> Vec<FragmentIndex> {
        smiles
            .iter()
            .enumerate()
            .map(|(i, s)| enumerate_fragments(&parse_smiles(s).unwrap(), i, radius))
            .collect()
    }

    fn table(a: u64, b: u64, c: u64, d: u64) -> ContingencyTable {
        ContingencyTable::new(a, b, c, d)
    }

    #[test]
    fn fold_spec_validates_partition() {
        assert!(FoldSpec::new(0, vec![0, 1, 2], vec![3, 4], 5).is_ok());
        // Overlap.
        assert!(FoldSpec::new(0, vec![0, 1], vec![1, 2], 3).is_err());
        // Gap: molecule 2 missing.
        assert!(FoldSpec::new(0, vec![0], vec![1], 3).is_err());
        // Out of range.
        assert!(FoldSpec::new(0, vec![0, 3], vec![1], 3).is_err());
        // Empty side.
        assert!(FoldSpec::new(0, vec![0, 1, 2], vec![], 3).is_err());
        // Duplicates.
        assert!(FoldSpec::new(0, vec![0, 0, 1], vec![2], 3).is_err());
    }

    #[test]
    fn key_support_counts_molecules() {
        let idx = indexes_of(&["CS", "CS", "CS", "CO"], 0);
        let s_key = *idx[0]
            .key_presence
            .difference(&idx[3].key_presence)
            .next()
            .unwrap();
        let full = key_support(&idx, None);
        assert_eq!(full.n_total(s_key), 3);
        assert_eq!(full.n_train(s_key), None);

        let fold = FoldSpec::new(0, vec![0, 1, 3], vec![2], 4).unwrap();
        let with_fold = key_support(&idx, Some(&fold));
        assert_eq!(with_fold.n_total(s_key), 3);
        assert_eq!(with_fold.n_train(s_key), Some(2));

        // A key only in the test molecule has train support 0.
        let fold2 = FoldSpec::new(1, vec![0, 1, 2], vec![3], 4).unwrap();
        let o_key = *idx[3]
            .key_presence
            .difference(&idx[0].key_presence)
            .next()
            .unwrap();
        let sup2 = key_support(&idx, Some(&fold2));
        assert_eq!(sup2.n_train(o_key), Some(0));
        assert_eq!(sup2.n_total(o_key), 1);
    }

    #[test]
    fn dummy_mask_applies_factor_rule() {
        let idx = indexes_of(
            &["CS", "CS", "CS", "CS", "CS", "CO", "CO", "CO", "CO", "CO"],
            0,
        );
        let labels: Vec<bool> = (0..10).map(|i| i < 5).collect();
        let tables = accumulate_tables(&idx, &labels, CountMode::Presence).unwrap();
        let scores = build_score_map(&tables, OneDStat::FisherOnetailed);

        // Test fold holds one sulfur and one oxygen molecule.
        let fold = FoldSpec::new(0, (1..9).collect(), vec![0, 9], 10).unwrap();
        let support = key_support(&idx, Some(&fold));
        let masked = dummy_mask(&scores, &support).unwrap();

        let s_key = *idx[0]
            .key_presence
            .difference(&idx[9].key_presence)
            .next()
            .unwrap();
        let expected = scores.entries[&s_key].score * (4.0 / 5.0);
        assert_eq!(masked.entries[&s_key].score, expected);
        // Non-score fields survive.
        assert_eq!(
            masked.entries[&s_key].support,
            scores.entries[&s_key].support
        );
        assert_eq!(masked.entries[&s_key].detail, scores.entries[&s_key].detail);
    }

    #[test]
    fn dummy_mask_zeroes_test_only_keys_and_keeps_full_support_keys() {
        let idx = indexes_of(&["CS", "CO", "CO", "CN"], 0);
        let labels = vec![true, false, false, true];
        let tables = accumulate_tables(&idx, &labels, CountMode::Presence).unwrap();
        let scores = build_score_map(&tables, OneDStat::FisherOnetailed);
        let fold = FoldSpec::new(0, vec![1, 2, 3], vec![0], 4).unwrap();
        let support = key_support(&idx, Some(&fold));
        let masked = dummy_mask(&scores, &support).unwrap();

        // Sulfur only lives in the test molecule: exact zero, sign +.
        let s_key = *idx[0]
            .key_presence
            .difference(&idx[1].key_presence)
            .next()
            .unwrap();
        assert_eq!(masked.entries[&s_key].score, 0.0);
        assert!(masked.entries[&s_key].score.is_sign_positive());
        // Oxygen support is fully in train: factor 1, score bit-identical.
        let o_key = *idx[1]
            .key_presence
            .difference(&idx[3].key_presence)
            .next()
            .unwrap();
        assert_eq!(masked.entries[&o_key].score, scores.entries[&o_key].score);
        // |score| never increases.
        for (key, e) in &masked.entries {
            assert!(e.score.abs() <= scores.entries[key].score.abs());
        }
    }

    #[test]
    fn dummy_mask_requires_fold_support_and_known_keys() {
        let idx = indexes_of(&["CS", "CO"], 0);
        let labels = vec![true, false];
        let tables = accumulate_tables(&idx, &labels, CountMode::Presence).unwrap();
        let scores = build_score_map(&tables, OneDStat::FisherOnetailed);
        let no_fold = key_support(&idx, None);
        assert_eq!(
            dummy_mask(&scores, &no_fold),
            Err(LeakageError::MissingTrainSupport)
        );

        // Support built from a narrower dataset misses the oxygen keys.
        let fold = FoldSpec::new(0, vec![0], vec![1], 2).unwrap();
        let narrow = key_support(
            &idx[..1],
            Some(&FoldSpec::new(0, vec![0], vec![1], 2).unwrap()),
        );
        let _ = fold;
        let err = dummy_mask(&scores, &narrow).unwrap_err();
        assert!(matches!(err, LeakageError::KeyMissingFromSupport { .. }));
    }

    #[test]
    fn key_loo_zeroes_singletons_and_scales_survivors() {
        let idx = indexes_of(&["CS", "CO", "CO", "CO"], 0);
        let labels = vec![true, false, false, true];
        let tables = accumulate_tables(&idx, &labels, CountMode::Presence).unwrap();
        let scores = build_score_map(&tables, OneDStat::FisherOnetailed);
        let support = key_support(&idx, None);
        let cfg = LooConfig {
            k: 2,
            s: 0.99,
            c_alpha: default_c_alpha(0.5),
        };
        let adjusted = key_loo_adjust(&scores, &support, &cfg);

        let s_key = *idx[0]
            .key_presence
            .difference(&idx[1].key_presence)
            .next()
            .unwrap();
        assert_eq!(adjusted.entries[&s_key].score, 0.0, "singleton zeroed");
        let o_key = *idx[1]
            .key_presence
            .difference(&idx[0].key_presence)
            .next()
            .unwrap();
        assert_eq!(
            adjusted.entries[&o_key].score,
            scores.entries[&o_key].score * 0.99
        );

        // k=1, s=1 is the identity transform.
        let identity = key_loo_adjust(
            &scores,
            &support,
            &LooConfig {
                k: 1,
                s: 1.0,
                c_alpha: 1.0,
            },
        );
        for (key, e) in &identity.entries {
            assert_eq!(e.score, scores.entries[key].score);
        }
    }

    #[test]
    fn scale_example_two_becomes_one_ninety_eight() {
        // n_total=10 ≥ k, s = 0.99: a score of +2.0 becomes +1.98 exactly.
        let scaled = 2.0 * 0.99;
        assert_eq!(scaled, 1.98);
    }

    #[test]
    fn true_loo_reference_values() {
        assert_eq!(true_loo_weight(&table(1, 1, 1, 1)).unwrap(), 0.0);
        let w = true_loo_weight(&table(3, 0, 0, 3)).unwrap();
        assert!(
            (w - 5.129_283_016_944_966).abs() < 1e-12,
            "log2(35), got {w}"
        );
        assert_eq!(
            true_loo_weight(&table(1, 0, 0, 0)),
            Err(LeakageError::TableTooSmall { n: 1 })
        );
    }

    #[test]
    fn true_loo_converges_to_plain_log_odds() {
        for (a, b, c, d) in [
            (4000, 1000, 2000, 3000),
            (9000, 500, 300, 200),
            (10_000, 1, 1, 1),
        ] {
            let t = table(a, b, c, d);
            let diff = (true_loo_weight(&t).unwrap() - log_odds(&t)).abs();
            assert!(diff < 0.01, "({a},{b},{c},{d}): diff {diff}");
        }
    }

    #[test]
    fn influence_delta_reference_values() {
        let t = table(1, 1, 1, 1);
        let da = influence_delta(&t, Cell::A).unwrap();
        let db = influence_delta(&t, Cell::B).unwrap();
        assert!(
            (da + 1.584_962_500_721_156_2).abs() < 1e-14,
            "-log2(3), got {da}"
        );
        assert_eq!(da, -db, "a and b decrements are exact mirrors");
        assert_eq!(
            influence_delta(&table(0, 1, 1, 1), Cell::A),
            Err(LeakageError::EmptyCell { cell: Cell::A })
        );
        // Removing one of many barely moves the weight.
        let huge = influence_delta(&table(1_000_000_000, 1, 1, 1), Cell::A).unwrap();
        assert!(huge.abs() < 1e-8);
    }

    #[test]
    fn loo_decomposition_identity() {
        // w_LOO - w = sum over cells of (cell/N) * delta_cell.
        for (a, b, c, d) in [(3, 0, 0, 3), (5, 2, 7, 1), (1, 1, 1, 1), (12, 30, 4, 9)] {
            let t = table(a, b, c, d);
            let n = t.n() as f64;
            let lhs = true_loo_weight(&t).unwrap() - log_odds(&t);
            let rhs: f64 = Cell::ALL
                .iter()
                .filter(|cell| cell.value(&t) > 0)
                .map(|&cell| (cell.value(&t) as f64 / n) * influence_delta(&t, cell).unwrap())
                .sum();
            assert!(
                (lhs - rhs).abs() < 1e-12,
                "({a},{b},{c},{d}): {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn loo_equivalence_zeroing_and_factor_rules() {
        // Leave-one-molecule-out folds: dummy masking zeroes exactly the
        // keys whose support sits entirely in the held-out molecule, which
        // for singletons matches key-LOO at k=2; surviving keys follow the
        // two factor rules exactly.
        let smiles = [
            "CCO", "CCN", "CCS", "CCC", "CCCl", "CCO", "CBr", "c1ccccc1", "CC=O", "CCOC",
        ];
        let idx = indexes_of(&smiles, 2);
        let labels: Vec<bool> = (0..smiles.len()).map(|i| i % 2 == 0).collect();
        let n = smiles.len();
        let tables = accumulate_tables(&idx, &labels, CountMode::Presence).unwrap();
        let scores = build_score_map(&tables, OneDStat::FisherOnetailed);
        let full_support = key_support(&idx, None);
        let cfg = LooConfig::for_dataset_size(n as u32);
        let kloo = key_loo_adjust(&scores, &full_support, &cfg);

        for held_out in 0..n {
            let train: Vec<usize> = (0..n).filter(|&m| m != held_out).collect();
            let fold = FoldSpec::new(held_out, train, vec![held_out], n).unwrap();
            let support = key_support(&idx, Some(&fold));
            let masked = dummy_mask(&scores, &support).unwrap();
            for &key in &idx[held_out].key_presence {
                let n_total = support.n_total(key);
                let n_train = support.n_train(key).unwrap();
                let masked_zero = masked.entries[&key].score == 0.0;
                let kloo_zero = kloo.entries[&key].score == 0.0;
                if n_total == 1 {
                    // Singleton in the held-out molecule: both methods
                    // zero it.
                    assert!(masked_zero && kloo_zero, "singleton key must zero");
                } else {
                    let base = scores.entries[&key].score;
                    assert_eq!(
                        masked.entries[&key].score,
                        zero_norm(base * (f64::from(n_train) / f64::from(n_total))),
                        "dummy factor rule"
                    );
                    assert_eq!(
                        kloo.entries[&key].score,
                        zero_norm(base * cfg.s),
                        "key-LOO factor rule"
                    );
                }
            }
        }
    }

    #[test]
    fn bound_report_covers_small_table_set() {
        let idx = indexes_of(&["CS", "CS", "CO", "CO", "CN", "CN"], 1);
        let labels = vec![true, true, false, false, true, false];
        let tables = accumulate_tables(&idx, &labels, CountMode::Presence).unwrap();
        let cfg = LooConfig::for_dataset_size(6);
        let report = loo_bound_report(&tables, &cfg).unwrap();
        assert_eq!(report.entries.len(), tables.entries.len());
        assert!((0.0..=1.0).contains(&report.fraction_within));
        // s = (N-1)/N makes the bound exactly C_alpha / k for every key.
        for e in &report.entries {
            assert_eq!(e.bound, cfg.c_alpha / f64::from(cfg.k));
        }
        // Keys with support >= 2 deviate by |s*w - w_LOO|, comfortably
        // inside the bound on this balanced fixture.
        assert!(report.fraction_within > 0.9);
    }

    #[test]
    fn bound_report_rejects_count_mode_and_tiny_tables() {
        let idx = indexes_of(&["CS", "CO"], 0);
        let labels = vec![true, false];
        let tables = accumulate_tables(&idx, &labels, CountMode::Count).unwrap();
        let cfg = LooConfig::for_dataset_size(2);
        assert_eq!(
            loo_bound_report(&tables, &cfg),
            Err(LeakageError::CountModeAudit)
        );

        let bad = LooConfig {
            k: 0,
            s: 0.5,
            c_alpha: 1.0,
        };
        let presence = accumulate_tables(&idx, &labels, CountMode::Presence).unwrap();
        assert!(matches!(
            loo_bound_report(&presence, &bad),
            Err(LeakageError::InvalidConfig(_))
        ));
    }

    #[test]
    fn bound_report_csv_layout() {
        let idx = indexes_of(&["CS", "CS", "CO", "CO"], 0);
        let labels = vec![true, true, false, false];
        let tables = accumulate_tables(&idx, &labels, CountMode::Presence).unwrap();
        let report = loo_bound_report(&tables, &LooConfig::for_dataset_size(4)).unwrap();
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# fraction_within="));
        assert_eq!(lines.next().unwrap(), "key,deviation,bound,within");
        assert_eq!(lines.count(), report.entries.len());
    }

    #[test]
    fn null_table_is_exactly_within_bound() {
        // (1,1,1,1): w = 0, so key-LOO gives 0 and the oracle gives 0.
        let t = table(1, 1, 1, 1);
        let w_loo = true_loo_weight(&t).unwrap();
        assert_eq!(w_loo, 0.0);
    }
}
