//! Pipeline configuration: defaults, TOML (de)serialization, range
//! validation, and the reproducibility header stamped into every output
//! file.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metakeys::TripletStat;
use crate::prevalence::{CountMode, OneDStat, ViewOrder};
use crate::vectorizer::Pooling;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {detail}")]
    Read { path: String, detail: String },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("config value out of range: {key} {problem}")]
    OutOfRange { key: &'static str, problem: String },
}

/// Which leakage-control strategy the cross-validation harness applies to
/// the score maps of each fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakageKind {
    /// Zero keys unseen in the train fold; scale the rest by the train
    /// fraction of their support.
    DummyMask,
    /// Fold-independent: zero keys below the support threshold `k`, scale
    /// the rest by `s`.
    KeyLoo,
    /// Rebuild every table and meta-key statistic from the train fold
    /// alone.
    TrainOnly,
    /// No correction — the explicitly leaky full-data baseline.
    None,
}

impl LeakageKind {
    #[must_use]
    pub fn label(self) -> &'static str {
        match self {
            LeakageKind::DummyMask => "dummy_mask",
            LeakageKind::KeyLoo => "key_loo",
            LeakageKind::TrainOnly => "train_only",
            LeakageKind::None => "none",
        }
    }
}

/// Everything the pipeline needs to run, with the documented defaults.
/// Round-trips losslessly through TOML; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Maximum fragment radius; vectors carry depths 0..=radius.
    pub radius: u8,
    /// Tanimoto threshold for the similar-pair search.
    pub sim_threshold: f64,
    /// Fragment radius used for similarity fingerprints only.
    pub sim_radius: u8,
    /// Table accumulation mode for the bearer cells.
    pub mode: CountMode,
    pub stat_1d: OneDStat,
    pub stat_3d: TripletStat,
    pub pooling: Pooling,
    /// Margin gate `g`; atoms score only when `|s_a|` clears it.
    pub gate: f64,
    pub views: Vec<ViewOrder>,
    pub leakage: LeakageKind,
    /// Support threshold for the key-LOO adjustment.
    pub k: u32,
    /// Key-LOO scale factor; `None` means `(N - 1) / N` at run time.
    pub s: Option<f64>,
    /// Bound constant; `None` means the smoothing-derived default.
    pub c_alpha: Option<f64>,
    /// Number of cross-validation folds; equal to the dataset size it
    /// becomes leave-one-out.
    pub cv_k: usize,
    pub seed: u64,
    /// Most triplets kept per anchor, best-similarity first.
    pub cap_per_anchor: usize,
    /// Dataset columns appended verbatim to each feature vector.
    pub extra_feature_columns: Vec<String>,
}

impl Default for PipelineConfig {
    fn default() -> PipelineConfig {
        PipelineConfig {
            radius: 6,
            sim_threshold: 0.5,
            sim_radius: 2,
            mode: CountMode::Presence,
            stat_1d: OneDStat::FisherOnetailed,
            stat_3d: TripletStat::Binomial,
            pooling: Pooling::MarginCount,
            gate: 0.0,
            views: vec![ViewOrder::OneD, ViewOrder::TwoD, ViewOrder::ThreeD],
            leakage: LeakageKind::KeyLoo,
            k: 2,
            s: None,
            c_alpha: None,
            cv_k: 10,
            seed: 42,
            cap_per_anchor: 10,
            extra_feature_columns: Vec::new(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<PipelineConfig, ConfigError> {
        let config: PipelineConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_toml_file(path: &std::path::Path) -> Result<PipelineConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        PipelineConfig::from_toml_str(&text)
    }

    /// Serialize in declaration order; parsing this back is the identity.
    #[must_use]
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let oob = |key: &'static str, problem: String| ConfigError::OutOfRange { key, problem };
        if self.radius == 0 || self.radius > 16 {
            return Err(oob(
                "radius",
                format!("must be in 1..=16, got {}", self.radius),
            ));
        }
        if !(0.0..=1.0).contains(&self.sim_threshold) {
            return Err(oob(
                "sim_threshold",
                format!("must lie in [0, 1], got {}", self.sim_threshold),
            ));
        }
        if self.sim_radius == 0 || self.sim_radius > 16 {
            return Err(oob(
                "sim_radius",
                format!("must be in 1..=16, got {}", self.sim_radius),
            ));
        }
        if !self.gate.is_finite() || self.gate < 0.0 {
            return Err(oob(
                "gate",
                format!("must be finite and >= 0, got {}", self.gate),
            ));
        }
        if self.views.is_empty() {
            return Err(oob("views", "must name at least one view".to_string()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for view in &self.views {
            if !seen.insert(*view) {
                return Err(oob("views", format!("view {} listed twice", view.label())));
            }
        }
        if self.k == 0 {
            return Err(oob("k", "support threshold must be >= 1".to_string()));
        }
        if let Some(s) = self.s {
            if !(s > 0.0 && s <= 1.0) {
                return Err(oob("s", format!("must lie in (0, 1], got {s}")));
            }
        }
        if let Some(c) = self.c_alpha {
            if !(c.is_finite() && c > 0.0) {
                return Err(oob("c_alpha", format!("must be finite and > 0, got {c}")));
            }
        }
        if self.cv_k < 2 {
            return Err(oob(
                "cv_k",
                format!("needs at least 2 folds, got {}", self.cv_k),
            ));
        }
        if self.cap_per_anchor == 0 {
            return Err(oob("cap_per_anchor", "must be >= 1".to_string()));
        }
        Ok(())
    }

    /// The effective configuration as `# `-prefixed lines, stamped at the
    /// top of every output file for reproducibility.
    #[must_use]
    pub fn header_lines(&self) -> Vec<String> {
        self.to_toml_string()
            .lines()
            .filter(|l| !l.is_empty())
            .map(|l| format!("# {l}"))
            .collect()
    }
}
