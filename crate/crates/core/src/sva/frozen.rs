use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::ExpressionMatrix;
use crate::error::{Error, Result};
use crate::persist::{expect_len, vector, Persist, RowMajor};
use crate::sva::fit::{Convergence, SvaFit};

/// Components whose singular value falls below this fraction of the largest
/// are dropped from the frozen projection.
pub const SINGULAR_VALUE_CUTOFF: f64 = 1e-10;

/// Provenance kept with a frozen model.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrozenMetadata {
    /// Number of outcome-design terms the model was trained with.
    pub p1: usize,
    pub dropped_components: usize,
    pub iterations: usize,
    pub converged: bool,
    pub weight_changes: Vec<f64>,
    /// Seed of the permutation estimate of `p2`, when one was run.
    pub seed: Option<u64>,
}

/// The training quantities held fixed when correcting new samples.
///
/// The projection `P = D^-1 U^T diag(w)` maps a sample onto the training
/// right singular vectors; applied to the training matrix it returns `V^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenModel {
    feature_ids: Vec<String>,
    weights: DVector<f64>,
    coeff_surrogate: DMatrix<f64>,
    num_sv: usize,
    projection_left: DMatrix<f64>,
    projection_singular: DVector<f64>,
    training_expr: ExpressionMatrix,
    training_right_vectors: DMatrix<f64>,
    metadata: FrozenMetadata,
}

impl FrozenModel {
    pub fn feature_ids(&self) -> &[String] {
        &self.feature_ids
    }

    /// `pi_w` for every feature.
    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// `m x p2`.
    pub fn coeff_surrogate(&self) -> &DMatrix<f64> {
        &self.coeff_surrogate
    }

    pub fn num_sv(&self) -> usize {
        self.num_sv
    }

    /// `m x r`.
    pub fn projection_left(&self) -> &DMatrix<f64> {
        &self.projection_left
    }

    /// Length `r`, all strictly positive.
    pub fn projection_singular(&self) -> &DVector<f64> {
        &self.projection_singular
    }

    pub fn training_expr(&self) -> &ExpressionMatrix {
        &self.training_expr
    }

    /// `n x r`.
    pub fn training_right_vectors(&self) -> &DMatrix<f64> {
        &self.training_right_vectors
    }

    /// `p2 x n`, the training surrogates.
    pub fn training_surrogates(&self) -> DMatrix<f64> {
        self.training_right_vectors.columns(0, self.num_sv).transpose()
    }

    pub fn metadata(&self) -> &FrozenMetadata {
        &self.metadata
    }

    pub fn rank(&self) -> usize {
        self.projection_singular.len()
    }

    pub(crate) fn set_seed(&mut self, seed: Option<u64>) {
        self.metadata.seed = seed;
    }
}

/// Packages a fitted model for correcting new samples.
pub fn freeze(fit: &SvaFit, expr: &ExpressionMatrix) -> Result<FrozenModel> {
    let (m, n) = (expr.n_features(), expr.n_samples());
    if fit.coeff_surrogate.nrows() != m || fit.surrogates.ncols() != n {
        return Err(Error::DimensionMismatch(
            "fit does not match the training matrix".into(),
        ));
    }
    let Convergence {
        iterations,
        converged,
        weight_changes,
    } = fit.convergence.clone();
    let mut metadata = FrozenMetadata {
        p1: fit.design.n_terms(),
        iterations,
        converged,
        weight_changes,
        ..Default::default()
    };
    let Some(svd) = &fit.svd else {
        return Ok(FrozenModel {
            feature_ids: expr.feature_ids().to_vec(),
            weights: fit.weights.pi_w.clone(),
            coeff_surrogate: fit.coeff_surrogate.clone(),
            num_sv: 0,
            projection_left: DMatrix::zeros(m, 0),
            projection_singular: DVector::zeros(0),
            training_expr: expr.clone(),
            training_right_vectors: DMatrix::zeros(n, 0),
            metadata,
        });
    };
    let dmax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let r = svd
        .singular_values
        .iter()
        .take_while(|&&d| d >= SINGULAR_VALUE_CUTOFF * dmax && d > 0.0)
        .count();
    metadata.dropped_components = svd.rank() - r;
    if r < fit.num_sv {
        return Err(Error::CollinearSurrogates {
            rank: r,
            expected: fit.num_sv,
        });
    }
    Ok(FrozenModel {
        feature_ids: expr.feature_ids().to_vec(),
        weights: fit.weights.pi_w.clone(),
        coeff_surrogate: fit.coeff_surrogate.clone(),
        num_sv: fit.num_sv,
        projection_left: svd.left_vectors.columns(0, r).into_owned(),
        projection_singular: svd.singular_values.rows(0, r).into_owned(),
        training_expr: expr.clone(),
        training_right_vectors: svd.right_vectors.columns(0, r).into_owned(),
        metadata,
    })
}

#[derive(Serialize, Deserialize)]
pub struct FrozenModelRecord {
    m: usize,
    n: usize,
    p1: usize,
    p2: usize,
    r: usize,
    feature_ids: Vec<String>,
    sample_ids: Vec<String>,
    weights: Vec<f64>,
    coeff_surrogate: RowMajor,
    projection_left: RowMajor,
    projection_singular: Vec<f64>,
    training_expr: RowMajor,
    training_right_vectors: RowMajor,
    dropped_components: usize,
    iterations: usize,
    converged: bool,
    weight_changes: Vec<f64>,
    seed: Option<u64>,
}

impl Persist for FrozenModel {
    const KIND: &'static str = "frozen-sva";
    type Record = FrozenModelRecord;

    fn to_record(&self) -> FrozenModelRecord {
        FrozenModelRecord {
            m: self.feature_ids.len(),
            n: self.training_expr.n_samples(),
            p1: self.metadata.p1,
            p2: self.num_sv,
            r: self.rank(),
            feature_ids: self.feature_ids.clone(),
            sample_ids: self.training_expr.sample_ids().to_vec(),
            weights: vector(&self.weights),
            coeff_surrogate: (&self.coeff_surrogate).into(),
            projection_left: (&self.projection_left).into(),
            projection_singular: vector(&self.projection_singular),
            training_expr: self.training_expr.values().into(),
            training_right_vectors: (&self.training_right_vectors).into(),
            dropped_components: self.metadata.dropped_components,
            iterations: self.metadata.iterations,
            converged: self.metadata.converged,
            weight_changes: self.metadata.weight_changes.clone(),
            seed: self.metadata.seed,
        }
    }

    fn from_record(rec: FrozenModelRecord) -> Result<Self> {
        let (m, n, p2, r) = (rec.m, rec.n, rec.p2, rec.r);
        if p2 > r {
            return Err(Error::ModelFormat(format!("p2 = {p2} exceeds rank {r}")));
        }
        let projection_singular = expect_len("projection_singular", rec.projection_singular, r)?;
        if projection_singular.iter().any(|&d| d.is_nan() || d <= 0.0) {
            return Err(Error::ModelFormat("singular values must be positive".into()));
        }
        let training_expr = ExpressionMatrix::new(
            rec.training_expr.expect_shape("training_expr", m, n)?,
            rec.feature_ids.clone(),
            rec.sample_ids,
        )?;
        Ok(FrozenModel {
            feature_ids: rec.feature_ids,
            weights: expect_len("weights", rec.weights, m)?,
            coeff_surrogate: rec.coeff_surrogate.expect_shape("coeff_surrogate", m, p2)?,
            num_sv: p2,
            projection_left: rec.projection_left.expect_shape("projection_left", m, r)?,
            projection_singular,
            training_expr,
            training_right_vectors: rec
                .training_right_vectors
                .expect_shape("training_right_vectors", n, r)?,
            metadata: FrozenMetadata {
                p1: rec.p1,
                dropped_components: rec.dropped_components,
                iterations: rec.iterations,
                converged: rec.converged,
                weight_changes: rec.weight_changes,
                seed: rec.seed,
            },
        })
    }
}
