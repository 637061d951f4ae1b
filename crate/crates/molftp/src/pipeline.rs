//! End-to-end orchestration: featurization, the cross-validation harness
//! with per-fold leakage control, the leave-one-out bound audit, label
//! flipping, and file export.
//!
//! Every artifact written here is deterministic for a given (dataset,
//! config): map iteration is ordered, fold work is collected in fold
//! order, and no timestamps enter the files. The effective configuration
//! is stamped into each output.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::chem::{enumerate_fragments, parse_smiles, FragmentIndex};
use crate::config::{ConfigError, LeakageKind, PipelineConfig};
use crate::dataset::{Dataset, DatasetError};
use crate::leakage::{
    default_c_alpha, dummy_mask, key_loo_adjust, key_support, loo_bound_report, FoldSpec,
    LeakageError, LooConfig,
};
use crate::metakeys::{build_contrast_pairs, build_triplets, mcnemar_scores, triplet_scores};
use crate::modeling::{
    aggregate_metrics, compute_metrics, fit_predict, flip_labels, stratified_folds, FitConfig,
    FoldMetrics, MetricReport, ModelingError,
};
use crate::prevalence::{accumulate_tables_subset, build_score_map, ScoreMap, ViewOrder};
use crate::similarity::{key_fingerprint, similar_pairs, SimilarPair};
use crate::synth::SynthError;
use crate::vectorizer::{
    assemble_molftp, atom_score_table, score_block, vector_headers, MolFtpVector,
};

/// Classification threshold used for precision/recall/F1/accuracy.
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("configuration conflict: {0}")]
    Conflict(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("no molecule in the dataset could be parsed")]
    NothingParseable,
    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        source: std::io::Error,
    },
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl PipelineError {
    /// Process exit code: 1 usage/config, 2 data, 3 internal invariant.
    #[must_use]
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::Conflict(_) => 1,
            PipelineError::Synth(SynthError::Unparseable { .. }) => 3,
            PipelineError::Synth(_) => 1,
            PipelineError::Dataset(_) | PipelineError::NothingParseable => 2,
            PipelineError::Output { .. } => 2,
            PipelineError::Internal(_) => 3,
        }
    }
}

fn from_modeling(e: ModelingError) -> PipelineError {
    match e {
        ModelingError::TooFewFolds(_) | ModelingError::ClassSmallerThanFolds { .. } => {
            PipelineError::Conflict(e.to_string())
        }
        other => PipelineError::Internal(other.to_string()),
    }
}

fn from_leakage(e: LeakageError) -> PipelineError {
    match e {
        LeakageError::CountModeAudit | LeakageError::InvalidConfig(_) => {
            PipelineError::Conflict(e.to_string())
        }
        other => PipelineError::Internal(other.to_string()),
    }
}

fn output_err(path: &Path) -> impl Fn(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Output {
        path: path.display().to_string(),
        source,
    }
}

/// Parse results: the molecules that survived, their fragment indexes
/// (ids renumbered densely), and the skipped input rows.
pub struct ParsedDataset {
    /// Surviving records, in input order.
    pub records: Vec<crate::dataset::DatasetRecord>,
    /// 1-based data row in the input file for each surviving record.
    pub source_rows: Vec<usize>,
    pub indexes: Vec<FragmentIndex>,
    pub labels: Vec<bool>,
    /// `(1-based data row, parse error)` for each dropped record.
    pub skipped: Vec<(usize, String)>,
}

/// Parse every molecule and enumerate fragments at the configured radius.
/// Unparseable rows are reported, not fatal; callers decide.
#[must_use]
pub fn parse_and_index(dataset: &Dataset, radius: u8) -> ParsedDataset {
    let parsed: Vec<_> = dataset
        .records
        .par_iter()
        .map(|r| parse_smiles(&r.smiles))
        .collect();
    let mut records = Vec::new();
    let mut source_rows = Vec::new();
    let mut labels = Vec::new();
    let mut molecules = Vec::new();
    let mut skipped = Vec::new();
    for (i, result) in parsed.into_iter().enumerate() {
        match result {
            Ok(mol) => {
                records.push(dataset.records[i].clone());
                source_rows.push(i + 1);
                labels.push(dataset.records[i].label);
                molecules.push(mol);
            }
            Err(e) => skipped.push((i + 1, e.to_string())),
        }
    }
    let indexes: Vec<FragmentIndex> = molecules
        .par_iter()
        .enumerate()
        .map(|(id, mol)| enumerate_fragments(mol, id, radius))
        .collect();
    ParsedDataset {
        records,
        source_rows,
        indexes,
        labels,
        skipped,
    }
}

fn sorted_views(config: &PipelineConfig) -> Vec<ViewOrder> {
    let mut views = config.views.clone();
    views.sort();
    views
}

fn needs_pairs(views: &[ViewOrder]) -> bool {
    views
        .iter()
        .any(|v| matches!(v, ViewOrder::TwoD | ViewOrder::ThreeD))
}

/// All similar pairs of the dataset at the configured threshold, or an
/// empty list when no metakey view is enabled.
#[must_use]
pub fn pair_search(indexes: &[FragmentIndex], config: &PipelineConfig) -> Vec<SimilarPair> {
    if !needs_pairs(&config.views) {
        return Vec::new();
    }
    let fingerprints: Vec<_> = indexes
        .par_iter()
        .map(|ix| key_fingerprint(ix, config.sim_radius))
        .collect();
    similar_pairs(&fingerprints, config.sim_threshold)
}

/// Build the configured score maps over a row subset. `pairs` must already
/// be restricted to members of `rows`; 1D tables are accumulated from
/// `rows` alone and the contributor record is checked against it.
pub fn score_maps_for_rows(
    indexes: &[FragmentIndex],
    labels: &[bool],
    rows: &[usize],
    pairs: &[SimilarPair],
    config: &PipelineConfig,
) -> Result<Vec<(ViewOrder, ScoreMap)>, PipelineError> {
    let row_set: BTreeSet<usize> = rows.iter().copied().collect();
    if let Some(bad) = pairs
        .iter()
        .find(|p| !row_set.contains(&p.i) || !row_set.contains(&p.j))
    {
        return Err(PipelineError::Internal(format!(
            "pair ({}, {}) reaches outside the row subset",
            bad.i, bad.j
        )));
    }
    let tables = accumulate_tables_subset(indexes, labels, rows, config.mode)
        .map_err(|e| PipelineError::Internal(e.to_string()))?;
    if !tables.contributors.is_subset(&row_set) {
        return Err(PipelineError::Internal(
            "table accumulation read rows outside the subset".to_string(),
        ));
    }
    let mut maps = Vec::new();
    for view in sorted_views(config) {
        let map = match view {
            ViewOrder::OneD => build_score_map(&tables, config.stat_1d),
            ViewOrder::TwoD => {
                let cpairs = build_contrast_pairs(pairs, labels);
                mcnemar_scores(&cpairs, indexes, labels)
            }
            ViewOrder::ThreeD => {
                let triplets = build_triplets(pairs, labels, config.cap_per_anchor);
                triplet_scores(&triplets, indexes, labels, config.stat_3d)
            }
        };
        maps.push((view, map));
    }
    Ok(maps)
}

/// The effective key-LOO settings for a dataset of `n` molecules.
#[must_use]
pub fn effective_loo_config(config: &PipelineConfig, n: u32) -> LooConfig {
    LooConfig {
        k: config.k,
        s: config
            .s
            .unwrap_or(f64::from(n.max(2) - 1) / f64::from(n.max(2))),
        c_alpha: config
            .c_alpha
            .unwrap_or_else(|| default_c_alpha(crate::prevalence::HALDANE_ALPHA)),
    }
}

/// Vectorize the listed molecules against one set of score maps.
pub fn vectorize_rows(
    indexes: &[FragmentIndex],
    rows: &[usize],
    maps: &[(ViewOrder, ScoreMap)],
    config: &PipelineConfig,
) -> Result<Vec<MolFtpVector>, PipelineError> {
    rows.par_iter()
        .map(|&id| {
            let blocks: Vec<(ViewOrder, Vec<f64>)> = maps
                .iter()
                .map(|(view, map)| {
                    let table = atom_score_table(&indexes[id], map);
                    (*view, score_block(&table, config.pooling, config.gate))
                })
                .collect();
            assemble_molftp(&blocks).map_err(|e| PipelineError::Internal(e.to_string()))
        })
        .collect()
}

fn feature_matrix(vectors: &[MolFtpVector], extras: &[&[f64]]) -> Vec<Vec<f64>> {
    vectors
        .iter()
        .zip(extras)
        .map(|(v, e)| {
            let mut row = v.values.clone();
            row.extend_from_slice(e);
            row
        })
        .collect()
}

fn check_extras(dataset_columns: &[String], config: &PipelineConfig) -> Result<(), PipelineError> {
    if config.extra_feature_columns.is_empty() {
        return Ok(());
    }
    if dataset_columns != config.extra_feature_columns.as_slice() {
        return Err(PipelineError::Conflict(format!(
            "dataset was loaded with extra columns {dataset_columns:?} but the config requests \
             {:?}; load the dataset with the configured columns",
            config.extra_feature_columns
        )));
    }
    Ok(())
}

fn extras_or_empty<'a>(parsed: &'a ParsedDataset, config: &PipelineConfig) -> Vec<&'a [f64]> {
    static EMPTY: [f64; 0] = [];
    parsed
        .records
        .iter()
        .map(|r| {
            if config.extra_feature_columns.is_empty() {
                &EMPTY[..]
            } else {
                r.extras.as_slice()
            }
        })
        .collect()
}

/// What `run_featurize` accomplished, including the skipped-row report
/// and the measured throughput.
#[derive(Debug)]
pub struct FeaturizeOutcome {
    pub rows_written: usize,
    pub skipped: Vec<(usize, String)>,
    pub molecules_per_second: f64,
}

/// Featurize a whole dataset and export the vectors as CSV.
///
/// Only whole-data leakage settings are meaningful here (`none` or
/// `key_loo`); the fold-based strategies belong to the cross-validation
/// harness and are rejected.
pub fn run_featurize(
    dataset: &Dataset,
    config: &PipelineConfig,
    out: &Path,
) -> Result<FeaturizeOutcome, PipelineError> {
    config.validate()?;
    check_extras(&dataset.extra_columns, config)?;
    if matches!(
        config.leakage,
        LeakageKind::DummyMask | LeakageKind::TrainOnly
    ) {
        return Err(PipelineError::Conflict(format!(
            "leakage '{}' is fold-based and applies to cv runs; featurize accepts 'none' or \
             'key_loo'",
            config.leakage.label()
        )));
    }

    let start = Instant::now();
    let parsed = parse_and_index(dataset, config.radius);
    for (row, error) in &parsed.skipped {
        log::warn!("skipping data row {row}: {error}");
    }
    if parsed.indexes.is_empty() {
        return Err(PipelineError::NothingParseable);
    }
    let n = parsed.indexes.len();
    let all_rows: Vec<usize> = (0..n).collect();
    let pairs = pair_search(&parsed.indexes, config);
    let mut maps = score_maps_for_rows(&parsed.indexes, &parsed.labels, &all_rows, &pairs, config)?;
    if config.leakage == LeakageKind::KeyLoo {
        let support = key_support(&parsed.indexes, None);
        let loo = effective_loo_config(config, n as u32);
        loo.validate().map_err(from_leakage)?;
        maps = maps
            .into_iter()
            .map(|(view, map)| (view, key_loo_adjust(&map, &support, &loo)))
            .collect();
    }
    let vectors = vectorize_rows(&parsed.indexes, &all_rows, &maps, config)?;
    let elapsed = start.elapsed().as_secs_f64();
    let molecules_per_second = if elapsed > 0.0 {
        n as f64 / elapsed
    } else {
        f64::INFINITY
    };

    let to_err = output_err(out);
    let file = File::create(out).map_err(&to_err);
    let mut writer = BufWriter::new(file?);
    for line in config.header_lines() {
        writeln!(writer, "{line}").map_err(&to_err)?;
    }
    write!(writer, "row,label").map_err(&to_err)?;
    for name in vector_headers(&sorted_views(config), config.radius) {
        write!(writer, ",{name}").map_err(&to_err)?;
    }
    for name in &config.extra_feature_columns {
        write!(writer, ",{name}").map_err(&to_err)?;
    }
    writeln!(writer).map_err(&to_err)?;
    let extras = extras_or_empty(&parsed, config);
    for (i, vector) in vectors.iter().enumerate() {
        write!(
            writer,
            "{},{}",
            parsed.source_rows[i],
            u8::from(parsed.labels[i])
        )
        .map_err(&to_err)?;
        for value in &vector.values {
            write!(writer, ",{value}").map_err(&to_err)?;
        }
        for value in extras[i] {
            write!(writer, ",{value}").map_err(&to_err)?;
        }
        writeln!(writer).map_err(&to_err)?;
    }
    writer.flush().map_err(&to_err)?;

    Ok(FeaturizeOutcome {
        rows_written: vectors.len(),
        skipped: parsed.skipped,
        molecules_per_second,
    })
}

/// Score maps for one fold under the configured leakage strategy, plus
/// the molecule ids whose rows were read during table construction.
pub fn fold_score_maps(
    parsed: &ParsedDataset,
    full_maps: &[(ViewOrder, ScoreMap)],
    keyloo_maps: &[(ViewOrder, ScoreMap)],
    pairs: &[SimilarPair],
    fold: &FoldSpec,
    config: &PipelineConfig,
) -> Result<Vec<(ViewOrder, ScoreMap)>, PipelineError> {
    match config.leakage {
        LeakageKind::None => Ok(full_maps.to_vec()),
        LeakageKind::KeyLoo => Ok(keyloo_maps.to_vec()),
        LeakageKind::DummyMask => {
            let support = key_support(&parsed.indexes, Some(fold));
            full_maps
                .iter()
                .map(|(view, map)| Ok((*view, dummy_mask(map, &support).map_err(from_leakage)?)))
                .collect()
        }
        LeakageKind::TrainOnly => {
            let train: BTreeSet<usize> = fold.train_ids.iter().copied().collect();
            let train_pairs: Vec<SimilarPair> = pairs
                .iter()
                .filter(|p| train.contains(&p.i) && train.contains(&p.j))
                .copied()
                .collect();
            score_maps_for_rows(
                &parsed.indexes,
                &parsed.labels,
                &fold.train_ids,
                &train_pairs,
                config,
            )
        }
    }
}

/// One fold's predictions, kept for pooled reporting.
struct FoldRun {
    metrics: FoldMetrics,
    test_labels: Vec<bool>,
    probabilities: Vec<f64>,
}

/// What a cross-validation run produced.
#[derive(Debug)]
pub struct CvOutcome {
    pub report: MetricReport,
    /// True when folds were leave-one-out and the report row pools every
    /// held-out prediction instead of averaging single-molecule folds.
    pub pooled_loo: bool,
    pub skipped: Vec<(usize, String)>,
}

#[derive(Serialize)]
struct MetricsDocument<'a> {
    config: &'a PipelineConfig,
    pooled_loo: bool,
    report: &'a MetricReport,
}

/// Run seeded stratified cross-validation with per-fold leakage control
/// and write the metric report (JSON) and per-fold table (CSV).
pub fn run_cv(
    dataset: &Dataset,
    config: &PipelineConfig,
    metrics_json: &Path,
    folds_csv: &Path,
) -> Result<CvOutcome, PipelineError> {
    config.validate()?;
    check_extras(&dataset.extra_columns, config)?;
    let parsed = parse_and_index(dataset, config.radius);
    for (row, error) in &parsed.skipped {
        log::warn!("skipping data row {row}: {error}");
    }
    let n = parsed.indexes.len();
    if n == 0 {
        return Err(PipelineError::NothingParseable);
    }
    if config.cv_k > n {
        return Err(PipelineError::Conflict(format!(
            "cv_k = {} exceeds the {} parseable molecules",
            config.cv_k, n
        )));
    }
    let plan = stratified_folds(&parsed.labels, config.cv_k, config.seed).map_err(from_modeling)?;

    let pairs = pair_search(&parsed.indexes, config);
    let all_rows: Vec<usize> = (0..n).collect();
    let full_maps =
        score_maps_for_rows(&parsed.indexes, &parsed.labels, &all_rows, &pairs, config)?;
    let keyloo_maps: Vec<(ViewOrder, ScoreMap)> = if config.leakage == LeakageKind::KeyLoo {
        let support = key_support(&parsed.indexes, None);
        let loo = effective_loo_config(config, n as u32);
        loo.validate().map_err(from_leakage)?;
        full_maps
            .iter()
            .map(|(view, map)| (*view, key_loo_adjust(map, &support, &loo)))
            .collect()
    } else {
        Vec::new()
    };
    let extras = extras_or_empty(&parsed, config);

    let runs: Vec<FoldRun> = plan
        .folds
        .par_iter()
        .map(|fold| -> Result<FoldRun, PipelineError> {
            let maps = fold_score_maps(&parsed, &full_maps, &keyloo_maps, &pairs, fold, config)?;
            let train_vectors = vectorize_rows(&parsed.indexes, &fold.train_ids, &maps, config)?;
            let test_vectors = vectorize_rows(&parsed.indexes, &fold.test_ids, &maps, config)?;
            let pick = |ids: &[usize]| -> Vec<&[f64]> { ids.iter().map(|&i| extras[i]).collect() };
            let train_x = feature_matrix(&train_vectors, &pick(&fold.train_ids));
            let test_x = feature_matrix(&test_vectors, &pick(&fold.test_ids));
            let train_y: Vec<bool> = fold.train_ids.iter().map(|&i| parsed.labels[i]).collect();
            let test_y: Vec<bool> = fold.test_ids.iter().map(|&i| parsed.labels[i]).collect();
            let (probabilities, _model) =
                fit_predict(&train_x, &train_y, &test_x, &FitConfig::default())
                    .map_err(from_modeling)?;
            let metrics = compute_metrics(&test_y, &probabilities, DECISION_THRESHOLD)
                .map_err(from_modeling)?;
            Ok(FoldRun {
                metrics,
                test_labels: test_y,
                probabilities,
            })
        })
        .collect::<Result<_, _>>()?;

    let pooled_loo = config.cv_k == n;
    let report = if pooled_loo {
        let mut labels = Vec::with_capacity(n);
        let mut probs = Vec::with_capacity(n);
        for run in &runs {
            labels.extend_from_slice(&run.test_labels);
            probs.extend_from_slice(&run.probabilities);
        }
        let pooled = compute_metrics(&labels, &probs, DECISION_THRESHOLD).map_err(from_modeling)?;
        aggregate_metrics(&[pooled]).map_err(from_modeling)?
    } else {
        let per_fold: Vec<FoldMetrics> = runs.iter().map(|r| r.metrics).collect();
        aggregate_metrics(&per_fold).map_err(from_modeling)?
    };

    let to_json_err = output_err(metrics_json);
    let document = MetricsDocument {
        config,
        pooled_loo,
        report: &report,
    };
    let body = serde_json::to_string_pretty(&document)
        .map_err(|e| PipelineError::Internal(e.to_string()))?;
    std::fs::write(metrics_json, body + "\n").map_err(&to_json_err)?;

    let to_csv_err = output_err(folds_csv);
    let file = File::create(folds_csv).map_err(&to_csv_err)?;
    let mut writer = BufWriter::new(file);
    for line in config.header_lines() {
        writeln!(writer, "{line}").map_err(&to_csv_err)?;
    }
    writeln!(writer, "fold_id,auroc,auprc,precision,recall,f1,accuracy").map_err(&to_csv_err)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (i, fold) in report.folds.iter().enumerate() {
        let fold_id = if pooled_loo {
            "pooled".to_string()
        } else {
            i.to_string()
        };
        writeln!(
            writer,
            "{fold_id},{},{},{},{},{},{}",
            opt(fold.auroc),
            opt(fold.auprc),
            fold.precision,
            fold.recall,
            fold.f1,
            fold.accuracy
        )
        .map_err(&to_csv_err)?;
    }
    writer.flush().map_err(&to_csv_err)?;

    Ok(CvOutcome {
        report,
        pooled_loo,
        skipped: parsed.skipped,
    })
}

/// What the bound audit found.
#[derive(Debug)]
pub struct AuditOutcome {
    pub fraction_within: f64,
    pub keys_audited: usize,
}

/// Audit the key-LOO approximation against the exact oracle over every 1D
/// key and write the per-key report.
pub fn run_audit(
    dataset: &Dataset,
    config: &PipelineConfig,
    out: &Path,
) -> Result<AuditOutcome, PipelineError> {
    config.validate()?;
    let parsed = parse_and_index(dataset, config.radius);
    for (row, error) in &parsed.skipped {
        log::warn!("skipping data row {row}: {error}");
    }
    let n = parsed.indexes.len();
    if n == 0 {
        return Err(PipelineError::NothingParseable);
    }
    let all_rows: Vec<usize> = (0..n).collect();
    let tables = accumulate_tables_subset(&parsed.indexes, &parsed.labels, &all_rows, config.mode)
        .map_err(|e| PipelineError::Internal(e.to_string()))?;
    let loo = effective_loo_config(config, n as u32);
    let report = loo_bound_report(&tables, &loo).map_err(from_leakage)?;

    let to_err = output_err(out);
    let file = File::create(out).map_err(&to_err)?;
    let mut writer = BufWriter::new(file);
    for line in config.header_lines() {
        writeln!(writer, "{line}").map_err(&to_err)?;
    }
    report.write_csv(&mut writer).map_err(&to_err)?;
    writer.flush().map_err(&to_err)?;
    Ok(AuditOutcome {
        fraction_within: report.fraction_within,
        keys_audited: report.entries.len(),
    })
}

/// What a flip run did.
#[derive(Debug)]
pub struct FlipOutcome {
    pub flips: usize,
}

/// Invert a seeded uniform share of the labels, writing the flipped copy
/// and the sidecar mask.
pub fn run_flip(
    dataset: &Dataset,
    fraction: f64,
    seed: u64,
    out_dataset: &Path,
    out_mask: &Path,
) -> Result<FlipOutcome, PipelineError> {
    let labels = dataset.labels();
    let (_, mask) = flip_labels(&labels, fraction, seed).map_err(from_modeling)?;
    let flipped = crate::dataset::apply_flip(dataset, &mask)?;
    let flips = mask.iter().filter(|&&m| m).count();
    let header = vec![
        format!("# flip_fraction = {fraction}"),
        format!("# flip_seed = {seed}"),
        format!("# flips = {flips}"),
    ];
    crate::dataset::write_dataset(out_dataset, &flipped, &header)?;
    crate::dataset::write_flip_mask(out_mask, &mask, &header)?;
    Ok(FlipOutcome { flips })
}
