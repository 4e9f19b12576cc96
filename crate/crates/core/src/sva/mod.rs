//! Surrogate variable analysis on the training set.
//!
//! Training estimates how many surrogates to use, alternates empirical-Bayes
//! feature weighting with a weighted SVD to find them, regresses every feature
//! on outcome design plus surrogates, and removes the surrogate term. The
//! result is frozen so new samples can be corrected with the same weights and
//! coefficients.

mod fit;
mod frozen;
mod num_sv;
mod svd;
mod weights;

pub use fit::{clean_training, fit_regression, sva_fit, Convergence, SvaFit, SvaOptions};
pub(crate) use fit::subtract_surrogates;
pub use frozen::{freeze, FrozenMetadata, FrozenModel, FrozenModelRecord, SINGULAR_VALUE_CUTOFF};
pub use num_sv::{estimate_num_sv, permutation_quantile_rank, NumSvEstimate, NumSvOptions};
pub use svd::{weighted_svd, WeightedSvd};
pub use weights::{
    empirical_bayes_weights, f_test_pvalues, isotonic_decreasing, null_proportion,
    posterior_nonnull, pvalue_density, FeatureWeights, DENSITY_BINS, NULL_LAMBDA,
};


use crate::data::{DesignMatrix, ExpressionMatrix};
use crate::error::Result;

/// How many surrogates to fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurrogateCount {
    /// Permutation estimate.
    Estimate(NumSvOptions),
    Fixed(usize),
}

impl Default for SurrogateCount {
    fn default() -> Self {
        SurrogateCount::Estimate(NumSvOptions::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrainOptions {
    pub num_sv: SurrogateCount,
    pub sva: SvaOptions,
}

/// Output of [`train`].
#[derive(Debug, Clone)]
pub struct TrainedSva {
    pub estimate: Option<NumSvEstimate>,
    pub fit: SvaFit,
    pub cleaned: ExpressionMatrix,
    pub frozen: FrozenModel,
}

/// Estimate `p2` (unless fixed), fit, clean the training matrix and freeze.
pub fn train(
    expr: &ExpressionMatrix,
    design: &DesignMatrix,
    options: &TrainOptions,
) -> Result<TrainedSva> {
    let (estimate, num_sv) = match options.num_sv {
        SurrogateCount::Estimate(opts) => {
            let est = estimate_num_sv(expr, design, &opts)?;
            let k = est.num_sv;
            (Some(est), k)
        }
        SurrogateCount::Fixed(k) => (None, k),
    };
    let fit = sva_fit(expr, design, num_sv, &options.sva)?;
    let cleaned = clean_training(expr, &fit)?;
    let mut frozen = freeze(&fit, expr)?;
    frozen.set_seed(estimate.as_ref().map(|e| e.seed));
    Ok(TrainedSva {
        estimate,
        fit,
        cleaned,
        frozen,
    })
}
