//! Nearest shrunken centroids.
//!
//! Class centroids are pulled toward the overall centroid by soft-thresholding
//! their standardized differences:
//!
//! ```text
//! d_ik  = (mean_ik - mean_i) / (m_k (s_i + s0)),   m_k = sqrt(1/n_k - 1/n)
//! d'_ik = sign(d_ik) max(|d_ik| - delta, 0)
//! c_ik  = mean_i + m_k (s_i + s0) d'_ik
//! ```
//!
//! and a sample is assigned to the class minimizing
//! `sum_i (x_i - c_ik)^2 / (s_i + s0)^2 - 2 log prior_k`.

use std::collections::HashSet;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{ExpressionMatrix, OutcomeLabels};
use crate::error::{Error, Result};
use crate::persist::{expect_len, vector, Persist, RowMajor};
use crate::rng::rng_from;
use crate::stats;

/// Default cross-validation grid for the shrinkage threshold.
pub const DEFAULT_SHRINKAGE_GRID: [f64; 6] = [0.0, 0.5, 1.0, 1.5, 2.0, 3.0];

/// The fudge constant added to every pooled standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Offset {
    /// Median of the pooled within-class standard deviations.
    #[default]
    Median,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NscModel {
    feature_ids: Vec<String>,
    class_set: Vec<String>,
    /// `m x K`.
    class_centroids: DMatrix<f64>,
    overall_centroid: DVector<f64>,
    /// `s_i + s0`.
    pooled_sd: DVector<f64>,
    offset: f64,
    shrinkage: f64,
    class_priors: Vec<f64>,
}

impl NscModel {
    pub fn feature_ids(&self) -> &[String] {
        &self.feature_ids
    }

    pub fn class_set(&self) -> &[String] {
        &self.class_set
    }

    pub fn class_centroids(&self) -> &DMatrix<f64> {
        &self.class_centroids
    }

    pub fn overall_centroid(&self) -> &DVector<f64> {
        &self.overall_centroid
    }

    /// Pooled within-class standard deviation plus the offset.
    pub fn pooled_sd(&self) -> &DVector<f64> {
        &self.pooled_sd
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn shrinkage(&self) -> f64 {
        self.shrinkage
    }

    pub fn class_priors(&self) -> &[f64] {
        &self.class_priors
    }

    /// Features whose centroid differs from the overall centroid in at least
    /// one class.
    pub fn active_features(&self) -> usize {
        self.class_centroids
            .row_iter()
            .zip(self.overall_centroid.iter())
            .filter(|(row, &c)| row.iter().any(|&v| v != c))
            .count()
    }
}

pub fn nsc_train(expr: &ExpressionMatrix, outcomes: &OutcomeLabels, shrinkage: f64) -> Result<NscModel> {
    nsc_train_with(expr, outcomes, shrinkage, Offset::Median)
}

pub fn nsc_train_with(
    expr: &ExpressionMatrix,
    outcomes: &OutcomeLabels,
    shrinkage: f64,
    offset: Offset,
) -> Result<NscModel> {
    if shrinkage.is_nan() || shrinkage < 0.0 {
        return Err(Error::InvalidArgument(format!("shrinkage {shrinkage} must be >= 0")));
    }
    let x = expr.values();
    let (m, n) = x.shape();
    if outcomes.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {n} samples",
            outcomes.len()
        )));
    }
    let k_classes = outcomes.n_classes();
    let counts = outcomes.class_counts();
    for (class, &count) in outcomes.class_set().iter().zip(&counts) {
        if count < 2 {
            return Err(Error::ClassTooSmall {
                class: class.clone(),
                count,
                required: 2,
            });
        }
    }
    if n <= k_classes {
        return Err(Error::InsufficientSamples { n, p1: k_classes });
    }
    let codes = outcomes.codes();

    let mut means: DMatrix<f64> = DMatrix::zeros(m, k_classes);
    for (j, &c) in codes.iter().enumerate() {
        for i in 0..m {
            means[(i, c)] += x[(i, j)];
        }
    }
    for (c, &count) in counts.iter().enumerate() {
        means.column_mut(c).unscale_mut(count as f64);
    }
    let overall = DVector::from_iterator(m, x.row_iter().map(|r| r.sum() / n as f64));

    let mut within: DVector<f64> = DVector::zeros(m);
    for (j, &c) in codes.iter().enumerate() {
        for i in 0..m {
            within[i] += (x[(i, j)] - means[(i, c)]).powi(2);
        }
    }
    let sd = within.map(|ss: f64| (ss / (n - k_classes) as f64).sqrt());
    let s0 = match offset {
        Offset::Median => stats::median(sd.as_slice()),
        Offset::Fixed(v) if v >= 0.0 => v,
        Offset::Fixed(v) => {
            return Err(Error::InvalidArgument(format!("offset {v} must be >= 0")));
        }
    };
    let pooled_sd = sd.add_scalar(s0);
    if let Some(i) = pooled_sd.iter().position(|&s| s.is_nan() || s <= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "feature {:?} has zero within-class spread and no offset",
            expr.feature_ids()[i]
        )));
    }

    let mut centroids = DMatrix::zeros(m, k_classes);
    for (c, &count) in counts.iter().enumerate() {
        let mk = (1.0 / count as f64 - 1.0 / n as f64).sqrt();
        for i in 0..m {
            let scale = mk * pooled_sd[i];
            let d = (means[(i, c)] - overall[i]) / scale;
            let shrunk = d.signum() * (d.abs() - shrinkage).max(0.0);
            centroids[(i, c)] = if shrinkage == 0.0 {
                means[(i, c)]
            } else {
                overall[i] + scale * shrunk
            };
        }
    }
    let priors = counts.iter().map(|&c| c as f64 / n as f64).collect();
    Ok(NscModel {
        feature_ids: expr.feature_ids().to_vec(),
        class_set: outcomes.class_set().to_vec(),
        class_centroids: centroids,
        overall_centroid: overall,
        pooled_sd,
        offset: s0,
        shrinkage,
        class_priors: priors,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NscPrediction {
    pub labels: Vec<String>,
    /// `n x K` discriminant scores; the predicted class has the smallest.
    pub scores: DMatrix<f64>,
}

impl NscPrediction {
    pub fn accuracy(&self, truth: &[String]) -> f64 {
        let hits = self.labels.iter().zip(truth).filter(|(a, b)| a == b).count();
        hits as f64 / truth.len() as f64
    }
}

pub fn nsc_predict(model: &NscModel, samples: &ExpressionMatrix) -> Result<NscPrediction> {
    if samples.feature_ids() != model.feature_ids() {
        return Err(Error::FeatureMisalignment(
            "samples do not match the classifier's feature registry".into(),
        ));
    }
    let x = samples.values();
    let n = x.ncols();
    let k_classes = model.class_set.len();
    let mut scores = DMatrix::zeros(n, k_classes);
    for j in 0..n {
        for c in 0..k_classes {
            let mut dist = 0.0;
            for i in 0..x.nrows() {
                let z = (x[(i, j)] - model.class_centroids[(i, c)]) / model.pooled_sd[i];
                dist += z * z;
            }
            scores[(j, c)] = dist - 2.0 * model.class_priors[c].ln();
        }
    }
    let labels = (0..n)
        .map(|j| {
            let mut best = 0;
            for c in 1..k_classes {
                if scores[(j, c)] < scores[(j, best)] {
                    best = c;
                }
            }
            model.class_set[best].clone()
        })
        .collect();
    Ok(NscPrediction { labels, scores })
}

/// Stratified fold assignment: within each class, shuffled positions are
/// dealt round-robin to folds.
pub fn stratified_folds(outcomes: &OutcomeLabels, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!("folds = {folds}, need at least 2")));
    }
    let counts = outcomes.class_counts();
    for (class, &count) in outcomes.class_set().iter().zip(&counts) {
        if count < folds {
            return Err(Error::ClassTooSmall {
                class: class.clone(),
                count,
                required: folds,
            });
        }
    }
    let codes = outcomes.codes();
    let mut rng = rng_from(seed);
    let mut assignment = vec![0; codes.len()];
    for c in 0..outcomes.n_classes() {
        let mut members: Vec<usize> = (0..codes.len()).filter(|&j| codes[j] == c).collect();
        members.shuffle(&mut rng);
        for (pos, j) in members.into_iter().enumerate() {
            assignment[j] = pos % folds;
        }
    }
    Ok(assignment)
}

/// Cross-validated accuracy of every grid value, `grid.len() x folds`.
pub fn cross_validate(
    expr: &ExpressionMatrix,
    outcomes: &OutcomeLabels,
    folds: usize,
    grid: &[f64],
    offset: Offset,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let assignment = stratified_folds(outcomes, folds, seed)?;
    let mut acc = vec![Vec::with_capacity(folds); grid.len()];
    for f in 0..folds {
        let train: Vec<usize> = (0..assignment.len()).filter(|&j| assignment[j] != f).collect();
        let test: Vec<usize> = (0..assignment.len()).filter(|&j| assignment[j] == f).collect();
        let train_expr = expr.select_samples(&train)?;
        let train_labels = outcomes.select(&train)?;
        let test_expr = expr.select_samples(&test)?;
        let truth: Vec<String> = test.iter().map(|&j| outcomes.labels()[j].clone()).collect();
        for (g, &delta) in grid.iter().enumerate() {
            let model = nsc_train_with(&train_expr, &train_labels, delta, offset)?;
            acc[g].push(nsc_predict(&model, &test_expr)?.accuracy(&truth));
        }
    }
    Ok(acc)
}

/// Largest grid value whose mean cross-validated accuracy is within one
/// standard error of the best.
pub fn choose_shrinkage(
    expr: &ExpressionMatrix,
    outcomes: &OutcomeLabels,
    folds: usize,
    grid: &[f64],
    seed: u64,
) -> Result<f64> {
    choose_shrinkage_with(expr, outcomes, folds, grid, Offset::Median, seed)
}

pub fn choose_shrinkage_with(
    expr: &ExpressionMatrix,
    outcomes: &OutcomeLabels,
    folds: usize,
    grid: &[f64],
    offset: Offset,
    seed: u64,
) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty shrinkage grid".into()));
    }
    if grid.len() == 1 {
        stratified_folds(outcomes, folds, seed)?;
        return Ok(grid[0]);
    }
    let acc = cross_validate(expr, outcomes, folds, grid, offset, seed)?;
    let means: Vec<f64> = acc.iter().map(|a| stats::mean(a)).collect();
    let best = (0..grid.len())
        .max_by(|&a, &b| means[a].total_cmp(&means[b]).then(b.cmp(&a)))
        .expect("non-empty grid");
    let se = stats::sample_sd(&acc[best]) / (folds as f64).sqrt();
    let cutoff = means[best] - se;
    Ok(grid
        .iter()
        .zip(&means)
        .filter(|(_, &m)| m >= cutoff)
        .map(|(&d, _)| d)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Train/predict interface so the evaluation pipeline can swap classifiers.
pub trait Classifier: Sync {
    type Model: TrainedClassifier;

    fn train(&self, expr: &ExpressionMatrix, outcomes: &OutcomeLabels, seed: u64) -> Result<Self::Model>;
}

pub trait TrainedClassifier {
    fn predict_labels(&self, samples: &ExpressionMatrix) -> Result<Vec<String>>;
}

/// How the NSC threshold is set.
#[derive(Debug, Clone, PartialEq)]
pub enum Shrinkage {
    Fixed(f64),
    CrossValidated { folds: usize, grid: Vec<f64> },
}

impl Default for Shrinkage {
    fn default() -> Self {
        Shrinkage::CrossValidated {
            folds: 5,
            grid: DEFAULT_SHRINKAGE_GRID.to_vec(),
        }
    }
}

/// Nearest shrunken centroids with a fixed or cross-validated threshold.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NearestShrunkenCentroids {
    pub shrinkage: Shrinkage,
    pub offset: Offset,
}

impl Classifier for NearestShrunkenCentroids {
    type Model = NscModel;

    fn train(&self, expr: &ExpressionMatrix, outcomes: &OutcomeLabels, seed: u64) -> Result<NscModel> {
        let delta = match &self.shrinkage {
            Shrinkage::Fixed(d) => *d,
            Shrinkage::CrossValidated { folds, grid } => {
                choose_shrinkage_with(expr, outcomes, *folds, grid, self.offset, seed)?
            }
        };
        nsc_train_with(expr, outcomes, delta, self.offset)
    }
}

impl TrainedClassifier for NscModel {
    fn predict_labels(&self, samples: &ExpressionMatrix) -> Result<Vec<String>> {
        Ok(nsc_predict(self, samples)?.labels)
    }
}

#[derive(Serialize, Deserialize)]
pub struct NscModelRecord {
    m: usize,
    k: usize,
    feature_ids: Vec<String>,
    class_set: Vec<String>,
    class_centroids: RowMajor,
    overall_centroid: Vec<f64>,
    pooled_sd: Vec<f64>,
    offset: f64,
    /// Decimal text so an infinite threshold survives JSON.
    shrinkage: String,
    class_priors: Vec<f64>,
}

impl Persist for NscModel {
    const KIND: &'static str = "nearest-shrunken-centroids";
    type Record = NscModelRecord;

    fn to_record(&self) -> NscModelRecord {
        NscModelRecord {
            m: self.feature_ids.len(),
            k: self.class_set.len(),
            feature_ids: self.feature_ids.clone(),
            class_set: self.class_set.clone(),
            class_centroids: (&self.class_centroids).into(),
            overall_centroid: vector(&self.overall_centroid),
            pooled_sd: vector(&self.pooled_sd),
            offset: self.offset,
            shrinkage: self.shrinkage.to_string(),
            class_priors: self.class_priors.clone(),
        }
    }

    fn from_record(rec: NscModelRecord) -> Result<Self> {
        let (m, k) = (rec.m, rec.k);
        if rec.feature_ids.len() != m || rec.class_set.len() != k {
            return Err(Error::ModelFormat("registry sizes do not match dimensions".into()));
        }
        if rec.class_set.iter().collect::<HashSet<_>>().len() != k {
            return Err(Error::ModelFormat("duplicate class".into()));
        }
        if rec.class_priors.len() != k {
            return Err(Error::ModelFormat("one prior per class required".into()));
        }
        let shrinkage: f64 = rec
            .shrinkage
            .parse()
            .map_err(|_| Error::ModelFormat(format!("bad shrinkage {:?}", rec.shrinkage)))?;
        let pooled_sd = expect_len("pooled_sd", rec.pooled_sd, m)?;
        if pooled_sd.iter().any(|&s| s.is_nan() || s <= 0.0) {
            return Err(Error::ModelFormat("pooled_sd must be positive".into()));
        }
        Ok(NscModel {
            feature_ids: rec.feature_ids,
            class_set: rec.class_set,
            class_centroids: rec.class_centroids.expect_shape("class_centroids", m, k)?,
            overall_centroid: expect_len("overall_centroid", rec.overall_centroid, m)?,
            pooled_sd,
            offset: rec.offset,
            shrinkage,
            class_priors: rec.class_priors,
        })
    }
}
