//! Cross-validation plumbing: stratified folds, a small deterministic
//! logistic classifier, ranking metrics, and the label-flip stress tool.
//!
//! Everything here is seeded and bit-reproducible. The classifier is
//! intentionally minimal — L2-regularized logistic regression fit by
//! Newton steps with train-fold-only feature standardization — because the
//! interesting signal lives in the feature vectors, not the model.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::leakage::FoldSpec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelingError {
    #[error("need at least 2 folds, got {0}")]
    TooFewFolds(usize),
    #[error("class with {class_size} members cannot fill {k} folds")]
    ClassSmallerThanFolds { class_size: usize, k: usize },
    #[error("fold construction failed: {0}")]
    FoldConstruction(String),
    #[error("feature matrix is ragged: row {row} has {len} values, expected {expected}")]
    RaggedMatrix {
        row: usize,
        len: usize,
        expected: usize,
    },
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },
    #[error("training rows ({rows}) and labels ({labels}) differ in length")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("empty {0} set")]
    EmptyInput(&'static str),
    #[error("flip fraction must lie in [0, 1], got {0}")]
    BadFlipFraction(f64),
    #[error("Newton step failed: Hessian not positive definite")]
    SingularHessian,
}

/// A seeded stratified cross-validation plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CvPlan {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldSpec>,
}

/// Deal each class round-robin into `k` folds after a seeded shuffle, so
/// per-fold class counts differ by at most one from exact proportionality.
///
/// `k` equal to the dataset size degenerates to the leave-one-out plan
/// (one test molecule per fold), which single-class folds make exempt
/// from the per-class size requirement.
pub fn stratified_folds(labels: &[bool], k: usize, seed: u64) -> Result<CvPlan, ModelingError> {
    let n = labels.len();
    if k < 2 || n < 2 {
        return Err(ModelingError::TooFewFolds(k.min(n)));
    }
    let build = |test_sets: Vec<Vec<usize>>| -> Result<Vec<FoldSpec>, ModelingError> {
        test_sets
            .into_iter()
            .enumerate()
            .map(|(fold_id, test)| {
                let in_test: std::collections::BTreeSet<usize> = test.iter().copied().collect();
                let train: Vec<usize> = (0..n).filter(|m| !in_test.contains(m)).collect();
                FoldSpec::new(fold_id, train, test, n)
                    .map_err(|e| ModelingError::FoldConstruction(e.to_string()))
            })
            .collect()
    };

    if k == n {
        let folds = build((0..n).map(|m| vec![m]).collect())?;
        return Ok(CvPlan { k, seed, folds });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_sets: Vec<Vec<usize>> = vec![Vec::new(); k];
    for class in [true, false] {
        let mut members: Vec<usize> = (0..n).filter(|&m| labels[m] == class).collect();
        if members.len() < k {
            return Err(ModelingError::ClassSmallerThanFolds {
                class_size: members.len(),
                k,
            });
        }
        members.shuffle(&mut rng);
        for (offset, member) in members.into_iter().enumerate() {
            test_sets[offset % k].push(member);
        }
    }
    let folds = build(test_sets)?;
    Ok(CvPlan { k, seed, folds })
}

/// A fitted linear classifier over standardized features.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub l2: f64,
    pub converged: bool,
}

/// Optimizer settings; the defaults match the evaluation harness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub l2: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitConfig {
    fn default() -> FitConfig {
        FitConfig {
            l2: 1.0,
            tol: 1e-8,
            max_iter: 1000,
        }
    }
}

fn validate_matrix(x: &[Vec<f64>], what: &'static str) -> Result<usize, ModelingError> {
    if x.is_empty() {
        return Err(ModelingError::EmptyInput(what));
    }
    let width = x[0].len();
    for (row, values) in x.iter().enumerate() {
        if values.len() != width {
            return Err(ModelingError::RaggedMatrix {
                row,
                len: values.len(),
                expected: width,
            });
        }
        if let Some(col) = values.iter().position(|v| !v.is_finite()) {
            return Err(ModelingError::NonFiniteFeature { row, col });
        }
    }
    Ok(width)
}

/// In-place Cholesky solve of the symmetric positive-definite system
/// `m x = rhs`. `m` is row-major `dim x dim`.
fn cholesky_solve(m: &mut [f64], rhs: &mut [f64], dim: usize) -> Result<(), ModelingError> {
    for j in 0..dim {
        let mut diag = m[j * dim + j];
        for k in 0..j {
            diag -= m[j * dim + k] * m[j * dim + k];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return Err(ModelingError::SingularHessian);
        }
        let root = diag.sqrt();
        m[j * dim + j] = root;
        for i in (j + 1)..dim {
            let mut v = m[i * dim + j];
            for k in 0..j {
                v -= m[i * dim + k] * m[j * dim + k];
            }
            m[i * dim + j] = v / root;
        }
    }
    // Forward substitution (L y = rhs), then back substitution (L' x = y).
    for i in 0..dim {
        let mut v = rhs[i];
        for k in 0..i {
            v -= m[i * dim + k] * rhs[k];
        }
        rhs[i] = v / m[i * dim + i];
    }
    for i in (0..dim).rev() {
        let mut v = rhs[i];
        for k in (i + 1)..dim {
            v -= m[k * dim + i] * rhs[k];
        }
        rhs[i] = v / m[i * dim + i];
    }
    Ok(())
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fit L2-regularized logistic regression on the training fold and return
/// test-set probabilities plus the model.
///
/// Features are standardized with training-fold means and deviations only;
/// constant features map to zero. The bias is unregularized. A train fold
/// containing a single class short-circuits to the constant
/// class-prior predictor (with a warning) since the loss has no interior
/// minimum there.
pub fn fit_predict(
    x_train: &[Vec<f64>],
    y_train: &[bool],
    x_test: &[Vec<f64>],
    cfg: &FitConfig,
) -> Result<(Vec<f64>, LinearModel), ModelingError> {
    let width = validate_matrix(x_train, "training")?;
    if x_train.len() != y_train.len() {
        return Err(ModelingError::LengthMismatch {
            rows: x_train.len(),
            labels: y_train.len(),
        });
    }
    if !x_test.is_empty() {
        let test_width = validate_matrix(x_test, "test")?;
        if test_width != width {
            return Err(ModelingError::RaggedMatrix {
                row: 0,
                len: test_width,
                expected: width,
            });
        }
    }

    let n = x_train.len() as f64;
    let positives = y_train.iter().filter(|&&y| y).count();
    if positives == 0 || positives == y_train.len() {
        log::warn!(
            "single-class training fold ({positives}/{} positive): constant predictor",
            y_train.len()
        );
        let prior = positives as f64 / n;
        let probs = vec![prior; x_test.len()];
        let clamped = prior.clamp(1e-12, 1.0 - 1e-12);
        let model = LinearModel {
            weights: vec![0.0; width],
            bias: (clamped / (1.0 - clamped)).ln(),
            l2: cfg.l2,
            converged: true,
        };
        return Ok((probs, model));
    }

    // Train-fold standardization statistics.
    let mut mean = vec![0.0; width];
    for row in x_train {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut std_dev = vec![0.0; width];
    for row in x_train {
        for ((s, v), m) in std_dev.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut std_dev {
        *s = (*s / n).sqrt();
        if *s == 0.0 {
            *s = 1.0;
        }
    }
    let standardize = |row: &[f64]| -> Vec<f64> {
        row.iter()
            .zip(&mean)
            .zip(&std_dev)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    };
    let xs: Vec<Vec<f64>> = x_train.iter().map(|r| standardize(r)).collect();

    // Newton iterations on [weights..., bias].
    let dim = width + 1;
    let mut theta = vec![0.0; dim];
    let mut converged = false;
    for _ in 0..cfg.max_iter {
        let mut grad = vec![0.0; dim];
        let mut hess = vec![0.0; dim * dim];
        for (row, &y) in xs.iter().zip(y_train) {
            let z = row.iter().zip(&theta).map(|(x, w)| x * w).sum::<f64>() + theta[width];
            let p = sigmoid(z).clamp(1e-12, 1.0 - 1e-12);
            let residual = p - f64::from(u8::from(y));
            let curvature = p * (1.0 - p);
            for (j, &xj) in row.iter().enumerate() {
                grad[j] += residual * xj;
                for (l, &xl) in row.iter().enumerate().take(j + 1) {
                    hess[j * dim + l] += curvature * xj * xl;
                }
                hess[width * dim + j] += curvature * xj;
            }
            grad[width] += residual;
            hess[width * dim + width] += curvature;
        }
        for j in 0..width {
            grad[j] += cfg.l2 * theta[j];
            hess[j * dim + j] += cfg.l2;
        }

        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if grad_norm <= cfg.tol {
            converged = true;
            break;
        }
        let mut step = grad.clone();
        cholesky_solve(&mut hess, &mut step, dim)?;
        for (w, s) in theta.iter_mut().zip(&step) {
            *w -= s;
        }
    }

    let weights = theta[..width].to_vec();
    let bias = theta[width];
    let probs = x_test
        .iter()
        .map(|row| {
            let z = standardize(row)
                .iter()
                .zip(&weights)
                .map(|(x, w)| x * w)
                .sum::<f64>()
                + bias;
            sigmoid(z)
        })
        .collect();
    Ok((
        probs,
        LinearModel {
            weights,
            bias,
            l2: cfg.l2,
            converged,
        },
    ))
}

/// Metrics of one evaluation set. Ranking metrics are absent when the
/// labels are single-class (they are undefined, not zero).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FoldMetrics {
    pub auroc: Option<f64>,
    pub auprc: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

/// Rank-statistic AUROC with tie-averaged ranks; `None` on single-class
/// input.
#[must_use]
pub fn auroc(y_true: &[bool], y_prob: &[f64]) -> Option<f64> {
    let n_pos = y_true.iter().filter(|&&y| y).count();
    let n_neg = y_true.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..y_true.len()).collect();
    order.sort_by(|&a, &b| {
        y_prob[a]
            .partial_cmp(&y_prob[b])
            .expect("finite probabilities")
    });
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && y_prob[order[j]] == y_prob[order[i]] {
            j += 1;
        }
        // 1-based average rank of the tie group [i, j).
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            if y_true[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j;
    }
    let n_pos_f = n_pos as f64;
    Some((rank_sum_pos - n_pos_f * (n_pos_f + 1.0) / 2.0) / (n_pos_f * n_neg as f64))
}

/// Step-integrated area under the precision–recall curve, descending down
/// the score groups (ties enter as one block). `None` on single-class
/// input. A constant predictor integrates to the prevalence.
#[must_use]
pub fn auprc(y_true: &[bool], y_prob: &[f64]) -> Option<f64> {
    let n_pos = y_true.iter().filter(|&&y| y).count();
    if n_pos == 0 || n_pos == y_true.len() {
        return None;
    }
    let mut order: Vec<usize> = (0..y_true.len()).collect();
    order.sort_by(|&a, &b| {
        y_prob[b]
            .partial_cmp(&y_prob[a])
            .expect("finite probabilities")
    });
    let mut area = 0.0;
    let mut tp = 0usize;
    let mut taken = 0usize;
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && y_prob[order[j]] == y_prob[order[i]] {
            j += 1;
        }
        for &idx in &order[i..j] {
            tp += usize::from(y_true[idx]);
        }
        taken += j - i;
        let precision = tp as f64 / taken as f64;
        let recall = tp as f64 / n_pos as f64;
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j;
    }
    Some(area)
}

/// Threshold metrics plus the ranking areas for one evaluation set.
///
/// Conventions: precision is 0 when nothing is predicted positive, recall
/// is 0 when nothing is positive, and F1 is 0 when both components vanish.
pub fn compute_metrics(
    y_true: &[bool],
    y_prob: &[f64],
    threshold: f64,
) -> Result<FoldMetrics, ModelingError> {
    if y_true.is_empty() {
        return Err(ModelingError::EmptyInput("evaluation"));
    }
    if y_true.len() != y_prob.len() {
        return Err(ModelingError::LengthMismatch {
            rows: y_prob.len(),
            labels: y_true.len(),
        });
    }
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut tn = 0u64;
    let mut fn_ = 0u64;
    for (&y, &p) in y_true.iter().zip(y_prob) {
        match (y, p >= threshold) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
            (true, false) => fn_ += 1,
        }
    }
    let ratio = |num: u64, den: u64| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let accuracy = (tp + tn) as f64 / y_true.len() as f64;
    Ok(FoldMetrics {
        auroc: auroc(y_true, y_prob),
        auprc: auprc(y_true, y_prob),
        precision,
        recall,
        f1,
        accuracy,
    })
}

/// Mean and population standard deviation of one metric over folds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
}

fn summarize(values: &[f64]) -> Option<MetricSummary> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some(MetricSummary {
        mean,
        std: var.sqrt(),
    })
}

/// Fold-aggregated metrics. Ranking summaries cover only the folds where
/// the metric was defined.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub auroc: Option<MetricSummary>,
    pub auprc: Option<MetricSummary>,
    pub precision: MetricSummary,
    pub recall: MetricSummary,
    pub f1: MetricSummary,
    pub accuracy: MetricSummary,
    pub folds: Vec<FoldMetrics>,
}

/// Aggregate per-fold metrics into mean ± std summaries.
pub fn aggregate_metrics(folds: &[FoldMetrics]) -> Result<MetricReport, ModelingError> {
    if folds.is_empty() {
        return Err(ModelingError::EmptyInput("fold metrics"));
    }
    let collect = |f: &dyn Fn(&FoldMetrics) -> Option<f64>| -> Vec<f64> {
        folds.iter().filter_map(f).collect()
    };
    let always =
        |f: &dyn Fn(&FoldMetrics) -> f64| summarize(&folds.iter().map(f).collect::<Vec<_>>());
    Ok(MetricReport {
        auroc: summarize(&collect(&|m| m.auroc)),
        auprc: summarize(&collect(&|m| m.auprc)),
        precision: always(&|m| m.precision).expect("non-empty"),
        recall: always(&|m| m.recall).expect("non-empty"),
        f1: always(&|m| m.f1).expect("non-empty"),
        accuracy: always(&|m| m.accuracy).expect("non-empty"),
        folds: folds.to_vec(),
    })
}

/// Invert exactly `round(fraction * N)` labels, chosen uniformly by seed.
/// Returns the flipped labels and the flip mask.
pub fn flip_labels(
    y: &[bool],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<bool>, Vec<bool>), ModelingError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(ModelingError::BadFlipFraction(fraction));
    }
    let n = y.len();
    let flips = (fraction * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = rand::seq::index::sample(&mut rng, n, flips);
    let mut mask = vec![false; n];
    for idx in chosen {
        mask[idx] = true;
    }
    let flipped = y
        .iter()
        .zip(&mask)
        .map(|(&label, &flip)| label != flip)
        .collect();
    Ok((flipped, mask))
}
