//! Per-feature probabilities of association with the surrogates and with the
//! outcome, from nested-model F-tests turned into posteriors by an empirical
//! Bayes step.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::data::{DesignMatrix, ExpressionMatrix};
use crate::error::{Error, Result};
use crate::linalg;

/// Number of equal-width histogram bins for the p-value density.
pub const DENSITY_BINS: usize = 64;
/// Tuning point of the null-proportion estimator.
pub const NULL_LAMBDA: f64 = 0.5;

/// Posterior weights for every feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureWeights {
    /// Probability that the feature is associated with the surrogates.
    pub pi_gamma: DVector<f64>,
    /// Probability that the feature is associated with the outcome, given the
    /// surrogates.
    pub pi_b: DVector<f64>,
    /// `(1 - pi_b) * pi_gamma`: associated with the surrogates but not with
    /// the outcome.
    pub pi_w: DVector<f64>,
}

impl FeatureWeights {
    pub fn from_parts(pi_gamma: DVector<f64>, pi_b: DVector<f64>) -> Self {
        let pi_w = pi_gamma.zip_map(&pi_b, |g, b| (1.0 - b) * g);
        Self { pi_gamma, pi_b, pi_w }
    }

    pub fn len(&self) -> usize {
        self.pi_w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi_w.is_empty()
    }
}

/// F-test p-value of `full` against the nested `reduced` design for every row
/// of `x`.
pub fn f_test_pvalues(
    x: &DMatrix<f64>,
    full: &DMatrix<f64>,
    reduced: &DMatrix<f64>,
) -> Result<Vec<f64>> {
    let n = x.ncols();
    let (q1, q0) = (full.nrows(), reduced.nrows());
    if q1 <= q0 {
        return Err(Error::InvalidArgument(format!(
            "full model ({q1} terms) must be larger than the reduced model ({q0} terms)"
        )));
    }
    if n <= q1 {
        return Err(Error::InsufficientSamples { n, p1: q1 });
    }
    let df1 = (q1 - q0) as f64;
    let df2 = (n - q1) as f64;
    let rss1 = linalg::residual_sums_of_squares(x, full)?;
    let rss0 = linalg::residual_sums_of_squares(x, reduced)?;
    let dist = FisherSnedecor::new(df1, df2).expect("positive degrees of freedom");
    Ok(x.row_iter()
        .enumerate()
        .map(|(i, row)| {
            // Below this the fit is exact and F is 0/0 or x/0.
            let floor = 1e-20 * row.norm_squared().max(f64::MIN_POSITIVE);
            let (r1, r0) = (rss1[i].max(0.0), rss0[i].max(0.0));
            if r1 <= floor {
                return if r0 - r1 <= floor { 1.0 } else { 0.0 };
            }
            let f = ((r0 - r1) / df1) / (r1 / df2);
            if f <= 0.0 {
                1.0
            } else {
                dist.sf(f)
            }
        })
        .collect())
}

/// `min(1, #{p > lambda} / (m (1 - lambda)))`.
pub fn null_proportion(pvalues: &[f64], lambda: f64) -> f64 {
    let above = pvalues.iter().filter(|&&p| p > lambda).count();
    (above as f64 / (pvalues.len() as f64 * (1.0 - lambda))).min(1.0)
}

/// Pool-adjacent-violators fit of a nonincreasing sequence (equal weights).
pub fn isotonic_decreasing(values: &[f64]) -> Vec<f64> {
    // (mean, count) blocks
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (b_mean, b_count) = blocks[blocks.len() - 1];
            let (a_mean, a_count) = blocks[blocks.len() - 2];
            if a_mean >= b_mean {
                break;
            }
            blocks.pop();
            let total = a_count + b_count;
            let last = blocks.last_mut().expect("two blocks");
            *last = ((a_mean * a_count as f64 + b_mean * b_count as f64) / total as f64, total);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, c)| std::iter::repeat_n(m, c))
        .collect()
}

fn bin_of(p: f64) -> usize {
    ((p * DENSITY_BINS as f64) as usize).min(DENSITY_BINS - 1)
}

/// Monotone histogram estimate of the p-value density, one value per bin.
pub fn pvalue_density(pvalues: &[f64]) -> Vec<f64> {
    let mut counts = vec![0usize; DENSITY_BINS];
    for &p in pvalues {
        counts[bin_of(p)] += 1;
    }
    let scale = DENSITY_BINS as f64 / pvalues.len() as f64;
    let raw: Vec<f64> = counts.iter().map(|&c| c as f64 * scale).collect();
    isotonic_decreasing(&raw)
}

/// Posterior probability that each test is non-null:
/// `clip(1 - pi0 / f(p), 0, 1)`.
pub fn posterior_nonnull(pvalues: &[f64]) -> Vec<f64> {
    if pvalues.is_empty() {
        return Vec::new();
    }
    let pi0 = null_proportion(pvalues, NULL_LAMBDA);
    let density = pvalue_density(pvalues);
    pvalues
        .iter()
        .map(|&p| {
            let f = density[bin_of(p)];
            if f > 0.0 {
                (1.0 - pi0 / f).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect()
}

/// Stacks the rows of `top` above the rows of `bottom`.
pub(crate) fn stack_rows(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    let n = top.ncols().max(bottom.ncols());
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), n);
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}

/// Estimates `pi_gamma`, `pi_b` and their product `pi_w` for every feature.
///
/// `pi_gamma` tests the surrogates on top of the outcome design; `pi_b` tests
/// the non-intercept outcome terms on top of intercept plus surrogates.
pub fn empirical_bayes_weights(
    expr: &ExpressionMatrix,
    design: &DesignMatrix,
    surrogates: &DMatrix<f64>,
) -> Result<FeatureWeights> {
    let x = expr.values();
    let n = x.ncols();
    let (p1, p2) = (design.n_terms(), surrogates.nrows());
    if p2 == 0 {
        return Err(Error::InvalidArgument("at least one surrogate is required".into()));
    }
    if surrogates.ncols() != n || design.n_samples() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} samples, design has {}, surrogates have {}",
            design.n_samples(),
            surrogates.ncols()
        )));
    }
    if n <= p1 + p2 {
        return Err(Error::InsufficientSamples { n, p1: p1 + p2 });
    }
    let s = design.values();
    let full = stack_rows(s, surrogates);
    let rank = linalg::rank(&full);
    if rank < p1 + p2 {
        return Err(Error::CollinearSurrogates {
            rank,
            expected: p1 + p2,
        });
    }
    let base = if design.includes_intercept() {
        s.rows(0, 1).into_owned()
    } else {
        DMatrix::zeros(0, n)
    };
    let without_outcome = stack_rows(&base, surrogates);

    let p_gamma = f_test_pvalues(x, &full, s)?;
    let p_b = f_test_pvalues(x, &full, &without_outcome)?;
    Ok(FeatureWeights::from_parts(
        DVector::from_vec(posterior_nonnull(&p_gamma)),
        DVector::from_vec(posterior_nonnull(&p_b)),
    ))
}
