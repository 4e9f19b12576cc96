//! Batch correction of new, unlabelled samples with a frozen model.
//!
//! Both variants estimate surrogate values for each new sample and subtract
//! `Gamma * g_new` using the frozen training coefficients. They differ in how
//! `g_new` is found:
//!
//! * [`fsva_exact`] appends one sample at a time to the training matrix and
//!   recomputes the weighted SVD of the augmented matrix with the frozen
//!   weights.
//! * [`fsva_fast`] applies the frozen projection `D^-1 U^T diag(w)` to all new
//!   samples in one matrix product.
//!
//! Neither function accepts outcome or batch labels.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::data::ExpressionMatrix;
use crate::error::{Error, Result};
use crate::linalg;
use crate::sva::{subtract_surrogates, FrozenModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CorrectionMethod {
    Exact,
    Fast,
}

impl CorrectionMethod {
    pub fn name(self) -> &'static str {
        match self {
            CorrectionMethod::Exact => "exact",
            CorrectionMethod::Fast => "fast",
        }
    }
}

impl std::str::FromStr for CorrectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(CorrectionMethod::Exact),
            "fast" => Ok(CorrectionMethod::Fast),
            other => Err(Error::InvalidArgument(format!(
                "unknown correction method {other:?} (expected exact or fast)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionDiagnostics {
    /// Euclidean norm of each sample's surrogate vector.
    pub surrogate_norms: Vec<f64>,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionResult {
    pub cleaned: ExpressionMatrix,
    /// `p2 x n_new`.
    pub new_surrogates: DMatrix<f64>,
    pub method: CorrectionMethod,
    pub diagnostics: CorrectionDiagnostics,
}

impl CorrectionResult {
    /// Flat `key<TAB>value` report.
    pub fn diagnostics_report(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("method\t{}\n", self.method.name()));
        out.push_str(&format!("p2\t{}\n", self.new_surrogates.nrows()));
        out.push_str(&format!("n_samples\t{}\n", self.cleaned.n_samples()));
        out.push_str(&format!(
            "elapsed_ms\t{:.3}\n",
            self.diagnostics.elapsed.as_secs_f64() * 1e3
        ));
        for (id, norm) in self.cleaned.sample_ids().iter().zip(&self.diagnostics.surrogate_norms) {
            out.push_str(&format!("surrogate_norm.{id}\t{norm}\n"));
        }
        out
    }
}

fn check_alignment(model: &FrozenModel, new_samples: &ExpressionMatrix) -> Result<()> {
    if new_samples.feature_ids() != model.feature_ids() {
        return Err(Error::FeatureMisalignment(format!(
            "new samples have {} features that do not match the {}-feature training registry; \
             align them first",
            new_samples.n_features(),
            model.feature_ids().len()
        )));
    }
    Ok(())
}

fn finish(
    model: &FrozenModel,
    new_samples: &ExpressionMatrix,
    surrogates: DMatrix<f64>,
    method: CorrectionMethod,
    started: Instant,
) -> Result<CorrectionResult> {
    let cleaned = if model.num_sv() == 0 {
        new_samples.clone()
    } else {
        new_samples.with_values(subtract_surrogates(
            new_samples.values(),
            model.coeff_surrogate(),
            &surrogates,
        ))?
    };
    let surrogate_norms = surrogates.column_iter().map(|c| c.norm()).collect();
    Ok(CorrectionResult {
        cleaned,
        new_surrogates: surrogates,
        method,
        diagnostics: CorrectionDiagnostics {
            surrogate_norms,
            elapsed: started.elapsed(),
        },
    })
}

/// Corrects each new sample independently through the weighted SVD of the
/// training matrix augmented with that sample.
///
/// Augmented singular vectors are matched to the training surrogates by rank
/// order, and each one's sign is chosen so that its restriction to the
/// training columns has a nonnegative inner product with the corresponding
/// training surrogate.
pub fn fsva_exact(model: &FrozenModel, new_samples: &ExpressionMatrix) -> Result<CorrectionResult> {
    let started = Instant::now();
    check_alignment(model, new_samples)?;
    let p2 = model.num_sv();
    let n_new = new_samples.n_samples();
    if p2 == 0 {
        return finish(model, new_samples, DMatrix::zeros(0, n_new), CorrectionMethod::Exact, started);
    }
    let train = model.training_expr().values();
    let (m, n) = train.shape();
    if p2 > m.min(n + 1) {
        return Err(Error::InvalidArgument(format!(
            "p2 = {p2} exceeds the rank bound {} of the augmented matrix",
            m.min(n + 1)
        )));
    }
    let weights = model.weights().as_slice();
    let weighted_train = linalg::scale_rows(train, weights);
    let reference = model.training_surrogates();

    let columns: Vec<DVector<f64>> = (0..n_new)
        .into_par_iter()
        .map(|j| {
            let mut augmented = DMatrix::zeros(m, n + 1);
            augmented.columns_mut(0, n).copy_from(&weighted_train);
            for i in 0..m {
                augmented[(i, n)] = weights[i] * new_samples.values()[(i, j)];
            }
            let (d, v) = linalg::top_right_vectors(augmented, p2)?;
            if v.ncols() < p2 || d.iter().any(|&s| s <= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "p2 = {p2} exceeds the rank of the augmented matrix for sample {j}"
                )));
            }
            let mut g = DVector::zeros(p2);
            for k in 0..p2 {
                let overlap = v.column(k).rows(0, n).dot(&reference.row(k).transpose());
                let sign = if overlap < 0.0 { -1.0 } else { 1.0 };
                g[k] = sign * v[(n, k)];
            }
            Ok(g)
        })
        .collect::<Result<_>>()?;

    let mut surrogates = DMatrix::zeros(p2, n_new);
    for (j, g) in columns.iter().enumerate() {
        surrogates.set_column(j, g);
    }
    finish(model, new_samples, surrogates, CorrectionMethod::Exact, started)
}

/// Surrogates for new samples from the frozen projection, first `p2` rows of
/// `D^-1 U^T diag(w) X_new`.
pub fn fold_in(model: &FrozenModel, new_samples: &ExpressionMatrix) -> Result<DMatrix<f64>> {
    check_alignment(model, new_samples)?;
    let p2 = model.num_sv();
    let n_new = new_samples.n_samples();
    if p2 == 0 {
        return Ok(DMatrix::zeros(0, n_new));
    }
    let mut left = model.projection_left().columns(0, p2).into_owned();
    for (i, mut row) in left.row_iter_mut().enumerate() {
        row *= model.weights()[i];
    }
    let mut g = left.tr_mul(new_samples.values());
    for (k, mut row) in g.row_iter_mut().enumerate() {
        row /= model.projection_singular()[k];
    }
    Ok(g)
}

/// Corrects all new samples with one projection.
pub fn fsva_fast(model: &FrozenModel, new_samples: &ExpressionMatrix) -> Result<CorrectionResult> {
    let started = Instant::now();
    let surrogates = fold_in(model, new_samples)?;
    finish(model, new_samples, surrogates, CorrectionMethod::Fast, started)
}

pub fn fsva_correct(
    model: &FrozenModel,
    new_samples: &ExpressionMatrix,
    method: CorrectionMethod,
) -> Result<CorrectionResult> {
    match method {
        CorrectionMethod::Exact => fsva_exact(model, new_samples),
        CorrectionMethod::Fast => fsva_fast(model, new_samples),
    }
}

/// Both variants on the same input, with per-sample discrepancies.
#[derive(Debug, Clone)]
pub struct VariantComparison {
    pub exact: CorrectionResult,
    pub fast: CorrectionResult,
    /// Euclidean distance between the two surrogate vectors of each sample.
    pub surrogate_discrepancy: Vec<f64>,
    /// Euclidean distance between the two cleaned versions of each sample.
    pub cleaned_discrepancy: Vec<f64>,
}

impl VariantComparison {
    pub fn exact_elapsed(&self) -> Duration {
        self.exact.diagnostics.elapsed
    }

    pub fn fast_elapsed(&self) -> Duration {
        self.fast.diagnostics.elapsed
    }

    /// Exact wall-clock time over fast wall-clock time.
    pub fn speedup(&self) -> f64 {
        self.exact_elapsed().as_secs_f64() / self.fast_elapsed().as_secs_f64().max(1e-9)
    }

    pub fn report(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("p2\t{}\n", self.exact.new_surrogates.nrows()));
        out.push_str(&format!("n_samples\t{}\n", self.exact.cleaned.n_samples()));
        out.push_str(&format!("exact_ms\t{:.3}\n", self.exact_elapsed().as_secs_f64() * 1e3));
        out.push_str(&format!("fast_ms\t{:.3}\n", self.fast_elapsed().as_secs_f64() * 1e3));
        out.push_str(&format!("speedup\t{:.2}\n", self.speedup()));
        if !self.surrogate_discrepancy.is_empty() {
            out.push_str(&format!(
                "median_surrogate_discrepancy\t{}\n",
                crate::stats::median(&self.surrogate_discrepancy)
            ));
            out.push_str(&format!(
                "median_cleaned_discrepancy\t{}\n",
                crate::stats::median(&self.cleaned_discrepancy)
            ));
        }
        out
    }
}

pub fn compare_variants(model: &FrozenModel, new_samples: &ExpressionMatrix) -> Result<VariantComparison> {
    let exact = fsva_exact(model, new_samples)?;
    let fast = fsva_fast(model, new_samples)?;
    let surrogate_discrepancy = (&exact.new_surrogates - &fast.new_surrogates)
        .column_iter()
        .map(|c| c.norm())
        .collect();
    let cleaned_discrepancy = (exact.cleaned.values() - fast.cleaned.values())
        .column_iter()
        .map(|c| c.norm())
        .collect();
    Ok(VariantComparison {
        exact,
        fast,
        surrogate_discrepancy,
        cleaned_discrepancy,
    })
}
