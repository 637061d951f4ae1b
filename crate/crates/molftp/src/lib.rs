//! Fragment–target prevalence featurization for molecules.
//!
//! The pipeline turns SMILES strings into fixed-length feature vectors by:
//!
//! 1. enumerating circular fragment keys per atom and radius ([`chem`]),
//! 2. scoring each key's association with a binary label through smoothed
//!    2x2 contingency statistics, similar-pair McNemar tests, and
//!    anchor-triplet votes ([`prevalence`], [`similarity`], [`metakeys`]),
//! 3. controlling label leakage with dummy masking or a key-level
//!    leave-one-out adjustment, audited against an exact LOO oracle
//!    ([`leakage`]),
//! 4. pooling atom-localized scores into per-molecule vectors
//!    ([`vectorizer`]), and
//! 5. evaluating the result with stratified cross-validation and a small
//!    deterministic logistic classifier ([`modeling`]).
//!
//! [`pipeline`] orchestrates the stages behind a [`config::PipelineConfig`];
//! [`synth`] generates seeded synthetic corpora so everything can be
//! exercised without external datasets.

#![forbid(unsafe_code)]

pub mod chem;
pub mod config;
pub mod dataset;
pub mod leakage;
pub mod metakeys;
pub mod modeling;
pub mod pipeline;
pub mod prevalence;
pub mod similarity;
pub mod stats;
pub mod synth;
pub mod vectorizer;

pub use chem::{
    enumerate_fragments, initial_invariants, parse_smiles, FragmentHit, FragmentIndex, Molecule,
    SmilesError,
};
pub use config::{ConfigError, LeakageKind, PipelineConfig};
pub use dataset::{
    apply_flip, read_dataset, write_dataset, write_flip_mask, Dataset, DatasetError, DatasetRecord,
};
pub use leakage::{
    default_c_alpha, dummy_mask, influence_delta, key_loo_adjust, key_support, loo_bound_report,
    true_loo_weight, BoundEntry, BoundReport, Cell, FoldSpec, KeySupport, LeakageError, LooConfig,
};
pub use metakeys::{
    build_contrast_pairs, build_triplets, mcnemar_scores, triplet_scores, AnchorTriplet,
    ContrastPair, TripletStat,
};
pub use modeling::{
    aggregate_metrics, auprc, auroc, compute_metrics, fit_predict, flip_labels, stratified_folds,
    CvPlan, FitConfig, FoldMetrics, LinearModel, MetricReport, MetricSummary, ModelingError,
};
pub use pipeline::{
    effective_loo_config, fold_score_maps, pair_search, parse_and_index, run_audit, run_cv,
    run_featurize, run_flip, score_maps_for_rows, vectorize_rows, AuditOutcome, CvOutcome,
    FeaturizeOutcome, FlipOutcome, ParsedDataset, PipelineError,
};
pub use prevalence::{
    accumulate_tables, accumulate_tables_subset, build_score_map, chi_square_stats, log_odds,
    significance, ContingencyTable, CountMode, KeyStats, OneDStat, PrevalenceError, ScoreEntry,
    ScoreMap, StatDetail, StatVariant, TableEntry, TableSet, ViewOrder,
};
pub use similarity::{key_fingerprint, similar_pairs, tanimoto, KeySetFingerprint, SimilarPair};
pub use synth::{generate, generation_header, SynthConfig, SynthError, SynthMode};
pub use vectorizer::{
    assemble_molftp, atom_score_table, margin_block, pooled_margin, score_block, vector_headers,
    AtomScoreTable, MolFtpVector, Pooling, VectorizerError,
};
