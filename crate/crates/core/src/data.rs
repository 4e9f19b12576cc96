//! Expression matrices, outcome labels and the outcome design.
//!
//! Features are rows and samples are columns everywhere in this crate, so an
//! expression matrix with `m` features and `n` samples is an `m x n` matrix.

use std::collections::{HashMap, HashSet};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Real-valued measurements, `m` features by `n` samples, with unique
/// identifiers on both axes. All values are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionMatrix {
    values: DMatrix<f64>,
    feature_ids: Vec<String>,
    sample_ids: Vec<String>,
}

impl ExpressionMatrix {
    pub fn new(
        values: DMatrix<f64>,
        feature_ids: Vec<String>,
        sample_ids: Vec<String>,
    ) -> Result<Self> {
        let (m, n) = values.shape();
        if m == 0 || n == 0 {
            return Err(Error::InvalidMatrix(format!(
                "expression matrix must be non-empty, got {m} x {n}"
            )));
        }
        if feature_ids.len() != m {
            return Err(Error::InvalidMatrix(format!(
                "{} feature ids for {m} rows",
                feature_ids.len()
            )));
        }
        if sample_ids.len() != n {
            return Err(Error::InvalidMatrix(format!(
                "{} sample ids for {n} columns",
                sample_ids.len()
            )));
        }
        if let Some(dup) = first_duplicate(&feature_ids) {
            return Err(Error::InvalidMatrix(format!("duplicate feature id {dup:?}")));
        }
        if let Some(dup) = first_duplicate(&sample_ids) {
            return Err(Error::InvalidMatrix(format!("duplicate sample id {dup:?}")));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos % m, pos / m);
            return Err(Error::InvalidMatrix(format!(
                "non-finite value at feature {:?}, sample {:?}",
                feature_ids[row], sample_ids[col]
            )));
        }
        Ok(Self {
            values,
            feature_ids,
            sample_ids,
        })
    }

    /// Builds a matrix with generated identifiers `f1..fm` and `s1..sn`.
    pub fn from_values(values: DMatrix<f64>) -> Result<Self> {
        let (m, n) = values.shape();
        let features = (1..=m).map(|i| format!("f{i}")).collect();
        let samples = (1..=n).map(|j| format!("s{j}")).collect();
        Self::new(values, features, samples)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn feature_ids(&self) -> &[String] {
        &self.feature_ids
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn n_features(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.values.ncols()
    }

    /// Same identifiers, new values of identical shape.
    pub fn with_values(&self, values: DMatrix<f64>) -> Result<Self> {
        if values.shape() != self.values.shape() {
            return Err(Error::DimensionMismatch(format!(
                "expected {:?}, got {:?}",
                self.values.shape(),
                values.shape()
            )));
        }
        Self::new(values, self.feature_ids.clone(), self.sample_ids.clone())
    }

    /// Columns at `indices`, in that order.
    pub fn select_samples(&self, indices: &[usize]) -> Result<Self> {
        let values = self.values.select_columns(indices);
        let ids = indices.iter().map(|&j| self.sample_ids[j].clone()).collect();
        Self::new(values, self.feature_ids.clone(), ids)
    }

    /// Appends the columns of `other`; feature ids must match exactly.
    pub fn concat_samples(&self, other: &ExpressionMatrix) -> Result<Self> {
        if self.feature_ids != other.feature_ids {
            return Err(Error::FeatureMisalignment(
                "cannot concatenate matrices with different feature registries".into(),
            ));
        }
        let (m, n1, n2) = (self.n_features(), self.n_samples(), other.n_samples());
        let mut values = DMatrix::zeros(m, n1 + n2);
        values.columns_mut(0, n1).copy_from(&self.values);
        values.columns_mut(n1, n2).copy_from(&other.values);
        let mut ids = self.sample_ids.clone();
        ids.extend(other.sample_ids.iter().cloned());
        Self::new(values, self.feature_ids.clone(), ids)
    }
}

fn first_duplicate(ids: &[String]) -> Option<&str> {
    let mut seen = HashSet::with_capacity(ids.len());
    ids.iter().find(|id| !seen.insert(id.as_str())).map(String::as_str)
}

/// Class labels for `n` samples together with the ordered set of classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeLabels {
    labels: Vec<String>,
    class_set: Vec<String>,
}

impl OutcomeLabels {
    /// Every label must be in `class_set`, and every class must occur.
    pub fn new(labels: Vec<String>, class_set: Vec<String>) -> Result<Self> {
        if let Some(dup) = first_duplicate(&class_set) {
            return Err(Error::InvalidLabels(format!("class {dup:?} listed twice")));
        }
        let known: HashSet<&str> = class_set.iter().map(String::as_str).collect();
        if let Some(bad) = labels.iter().find(|l| !known.contains(l.as_str())) {
            return Err(Error::InvalidLabels(format!("label {bad:?} not in class set")));
        }
        let used: HashSet<&str> = labels.iter().map(String::as_str).collect();
        if let Some(unused) = class_set.iter().find(|c| !used.contains(c.as_str())) {
            return Err(Error::InvalidLabels(format!("class {unused:?} has no samples")));
        }
        Ok(Self { labels, class_set })
    }

    /// Class set taken as the sorted distinct labels.
    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> Result<Self> {
        let labels: Vec<String> = labels.iter().map(|s| s.as_ref().to_owned()).collect();
        let mut classes = labels.clone();
        classes.sort();
        classes.dedup();
        Self::new(labels, classes)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn class_set(&self) -> &[String] {
        &self.class_set
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.class_set.len()
    }

    /// Index of each sample's class within `class_set`.
    pub fn codes(&self) -> Vec<usize> {
        let index: HashMap<&str, usize> = self
            .class_set
            .iter()
            .enumerate()
            .map(|(k, c)| (c.as_str(), k))
            .collect();
        self.labels.iter().map(|l| index[l.as_str()]).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_set.len()];
        for k in self.codes() {
            counts[k] += 1;
        }
        counts
    }

    /// Labels of the samples at `indices`, keeping the full class set when
    /// every class is still represented and shrinking it otherwise.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let labels: Vec<String> = indices.iter().map(|&j| self.labels[j].clone()).collect();
        let present: HashSet<&str> = labels.iter().map(String::as_str).collect();
        let classes = self
            .class_set
            .iter()
            .filter(|c| present.contains(c.as_str()))
            .cloned()
            .collect();
        Self::new(labels, classes)
    }
}

/// The `p1 x n` outcome design `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    values: DMatrix<f64>,
    includes_intercept: bool,
}

impl DesignMatrix {
    /// Wraps an arbitrary design; rows must be linearly independent.
    pub fn new(values: DMatrix<f64>, includes_intercept: bool) -> Result<Self> {
        let p1 = values.nrows();
        let rank = crate::linalg::rank(&values);
        if rank != p1 {
            return Err(Error::RankDeficient { rank, expected: p1 });
        }
        Ok(Self {
            values,
            includes_intercept,
        })
    }

    /// A single row of ones.
    pub fn intercept_only(n: usize) -> Self {
        Self {
            values: DMatrix::from_element(1, n, 1.0),
            includes_intercept: true,
        }
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn includes_intercept(&self) -> bool {
        self.includes_intercept
    }

    /// `p1`, the number of rows.
    pub fn n_terms(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.values.ncols()
    }
}

/// Intercept row followed by one 0/1 indicator row for each class after the
/// first.
pub fn encode_design(outcomes: &OutcomeLabels) -> Result<DesignMatrix> {
    let k = outcomes.n_classes();
    if k < 2 {
        return Err(Error::DegenerateDesign(format!(
            "need at least two classes, found {k}"
        )));
    }
    let n = outcomes.len();
    let codes = outcomes.codes();
    let mut values = DMatrix::zeros(k, n);
    for (j, &c) in codes.iter().enumerate() {
        values[(0, j)] = 1.0;
        if c > 0 {
            values[(c, j)] = 1.0;
        }
    }
    DesignMatrix::new(values, true)
}

/// A labelled expression dataset. `batch` is ground truth used only for
/// evaluation; no correction routine reads it.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub expr: ExpressionMatrix,
    pub outcomes: OutcomeLabels,
    pub batch: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(
        expr: ExpressionMatrix,
        outcomes: OutcomeLabels,
        batch: Option<Vec<String>>,
    ) -> Result<Self> {
        let n = expr.n_samples();
        if outcomes.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} outcome labels for {n} samples",
                outcomes.len()
            )));
        }
        if let Some(b) = &batch {
            if b.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "{} batch labels for {n} samples",
                    b.len()
                )));
            }
        }
        Ok(Self {
            expr,
            outcomes,
            batch,
        })
    }

    pub fn select_samples(&self, indices: &[usize]) -> Result<Self> {
        let batch = self
            .batch
            .as_ref()
            .map(|b| indices.iter().map(|&j| b[j].clone()).collect());
        Dataset::new(
            self.expr.select_samples(indices)?,
            self.outcomes.select(indices)?,
            batch,
        )
    }
}

/// Reorders the rows of `new_samples` to follow `train_features`.
///
/// Rows whose id is not a training feature are dropped; the count is returned
/// alongside the aligned matrix and logged.
pub fn align_features(
    train_features: &[String],
    new_samples: &ExpressionMatrix,
) -> Result<(ExpressionMatrix, usize)> {
    let index: HashMap<&str, usize> = new_samples
        .feature_ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut rows = Vec::with_capacity(train_features.len());
    let mut missing = Vec::new();
    for id in train_features {
        match index.get(id.as_str()) {
            Some(&i) => rows.push(i),
            None => missing.push(id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingFeatures(missing));
    }
    let dropped = new_samples.n_features() - rows.len();
    if dropped > 0 {
        log::warn!("dropped {dropped} feature(s) not present in the training registry");
    }
    let values = new_samples.values().select_rows(&rows);
    let aligned = ExpressionMatrix::new(
        values,
        train_features.to_vec(),
        new_samples.sample_ids().to_vec(),
    )?;
    Ok((aligned, dropped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(xs: &[&str]) -> OutcomeLabels {
        OutcomeLabels::from_labels(xs).unwrap()
    }

    #[test]
    fn two_class_design() {
        let d = encode_design(&labels(&["1", "1", "0", "0"])).unwrap();
        assert_eq!(
            d.values(),
            &DMatrix::from_row_slice(2, 4, &[1., 1., 1., 1., 1., 1., 0., 0.])
        );
        assert!(d.includes_intercept());
    }

    #[test]
    fn three_class_design_has_full_rank() {
        let d = encode_design(&labels(&["a", "b", "c", "a"])).unwrap();
        assert_eq!(d.values().shape(), (3, 4));
        assert_eq!(crate::linalg::rank(d.values()), 3);
    }

    #[test]
    fn single_class_is_degenerate() {
        let err = encode_design(&labels(&["0", "0", "0"])).unwrap_err();
        assert!(matches!(err, Error::DegenerateDesign(_)));
    }

    #[test]
    fn rejects_duplicate_ids_and_non_finite() {
        let v = DMatrix::from_element(2, 2, 1.0);
        let dup = ExpressionMatrix::new(v.clone(), vec!["a".into(), "a".into()], vec!["x".into(), "y".into()]);
        assert!(dup.is_err());
        let mut bad = v;
        bad[(1, 0)] = f64::NAN;
        assert!(ExpressionMatrix::from_values(bad).is_err());
    }

    #[test]
    fn labels_must_cover_class_set() {
        assert!(OutcomeLabels::new(vec!["a".into()], vec!["a".into(), "b".into()]).is_err());
        assert!(OutcomeLabels::new(vec!["c".into()], vec!["a".into()]).is_err());
    }

    fn matrix(ids: &[&str]) -> ExpressionMatrix {
        let m = ids.len();
        let values = DMatrix::from_fn(m, 2, |i, j| (i * 10 + j) as f64);
        ExpressionMatrix::new(
            values,
            ids.iter().map(|s| s.to_string()).collect(),
            vec!["s1".into(), "s2".into()],
        )
        .unwrap()
    }

    #[test]
    fn align_permutes_rows() {
        let train: Vec<String> = ["g1", "g2", "g3"].iter().map(|s| s.to_string()).collect();
        let shuffled = matrix(&["g3", "g1", "g2"]);
        let (aligned, dropped) = align_features(&train, &shuffled).unwrap();
        assert_eq!(dropped, 0);
        assert_eq!(aligned.feature_ids(), &train[..]);
        assert_eq!(aligned.values()[(0, 0)], 10.0);
        assert_eq!(aligned.values()[(2, 1)], 1.0);
    }

    #[test]
    fn align_drops_extra_features() {
        let train: Vec<String> = ["g2", "g1"].iter().map(|s| s.to_string()).collect();
        let (aligned, dropped) = align_features(&train, &matrix(&["g1", "g2", "g9"])).unwrap();
        assert_eq!(dropped, 1);
        assert_eq!(aligned.feature_ids(), &train[..]);
        assert_eq!(aligned.values()[(0, 0)], 10.0);
    }

    #[test]
    fn align_reports_missing() {
        let train: Vec<String> = ["g1", "g4"].iter().map(|s| s.to_string()).collect();
        match align_features(&train, &matrix(&["g1", "g2"])) {
            Err(Error::MissingFeatures(ids)) => assert_eq!(ids, vec!["g4".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn design_rank_equals_terms(codes in proptest::collection::vec(0usize..4, 2..40)) {
            let raw: Vec<String> = codes.iter().map(|c| format!("c{c}")).collect();
            let outcomes = OutcomeLabels::from_labels(&raw).unwrap();
            prop_assume!(outcomes.n_classes() >= 2);
            let d = encode_design(&outcomes).unwrap();
            prop_assert_eq!(crate::linalg::rank(d.values()), d.n_terms());
            prop_assert_eq!(d.n_terms(), outcomes.n_classes());
        }

        #[test]
        fn align_is_idempotent(perm in Just((0..8usize).collect::<Vec<_>>()).prop_shuffle(), extra in 0usize..4) {
            let train: Vec<String> = (0..6).map(|i| format!("g{i}")).collect();
            let ids: Vec<String> = perm.iter().filter(|&&i| i < 6 + extra.min(2)).map(|i| format!("g{i}")).collect();
            let values = DMatrix::from_fn(ids.len(), 3, |i, j| (i * 7 + j) as f64);
            let m = ExpressionMatrix::new(values, ids, vec!["a".into(), "b".into(), "c".into()]).unwrap();
            let (once, _) = align_features(&train, &m).unwrap();
            let (twice, dropped) = align_features(&train, &once).unwrap();
            prop_assert_eq!(dropped, 0);
            prop_assert_eq!(once, twice);
        }
    }
}
