use nalgebra::{DMatrix, DVector};

use crate::data::{DesignMatrix, ExpressionMatrix};
use crate::error::{Error, Result};
use crate::linalg;
use crate::sva::svd::{weighted_svd_values, WeightedSvd};
use crate::sva::weights::{empirical_bayes_weights, stack_rows, FeatureWeights};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvaOptions {
    pub max_iter: usize,
    /// Convergence threshold on `max |delta pi_w|` between iterations.
    pub tol: f64,
}

impl Default for SvaOptions {
    fn default() -> Self {
        Self {
            max_iter: 5,
            tol: 1e-3,
        }
    }
}

/// Iteration bookkeeping kept with the fit and the frozen model.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Convergence {
    pub iterations: usize,
    pub converged: bool,
    /// `max |delta pi_w|` after each iteration past the first.
    pub weight_changes: Vec<f64>,
}

/// Everything estimated on the training set.
#[derive(Debug, Clone, PartialEq)]
pub struct SvaFit {
    pub num_sv: usize,
    /// `p2 x n`; rows are the leading weighted right singular vectors.
    pub surrogates: DMatrix<f64>,
    /// `m x p1`.
    pub coeff_outcome: DMatrix<f64>,
    /// `m x p2`.
    pub coeff_surrogate: DMatrix<f64>,
    pub weights: FeatureWeights,
    /// Full-rank decomposition from the last iteration; `None` when `p2 = 0`.
    pub svd: Option<WeightedSvd>,
    pub design: DesignMatrix,
    pub convergence: Convergence,
}

impl SvaFit {
    /// `X - B S - Gamma G`, the part of the data neither model term explains.
    pub fn noise_residual(&self, expr: &ExpressionMatrix) -> DMatrix<f64> {
        let mut r = expr.values() - &self.coeff_outcome * self.design.values();
        if self.num_sv > 0 {
            r -= &self.coeff_surrogate * &self.surrogates;
        }
        r
    }
}

/// Least squares of every row of `X` on the stacked design `[S; G]`.
/// Returns `(B, Gamma)`.
pub fn fit_regression(
    expr: &ExpressionMatrix,
    design: &DesignMatrix,
    surrogates: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let p1 = design.n_terms();
    let p2 = surrogates.nrows();
    if p2 > 0 && surrogates.ncols() != expr.n_samples() {
        return Err(Error::DimensionMismatch(format!(
            "surrogates have {} columns, matrix has {} samples",
            surrogates.ncols(),
            expr.n_samples()
        )));
    }
    let stacked = if p2 == 0 {
        design.values().clone()
    } else {
        stack_rows(design.values(), surrogates)
    };
    let coef = linalg::least_squares(expr.values(), &stacked)?;
    Ok((
        coef.columns(0, p1).into_owned(),
        coef.columns(p1, p2).into_owned(),
    ))
}

/// First `k` right singular vectors of the design residuals, as rows.
fn initial_surrogates(x: &DMatrix<f64>, design: &DesignMatrix, k: usize) -> Result<DMatrix<f64>> {
    let residual = linalg::residualize(x, design.values())?;
    let (_, v) = linalg::top_right_vectors(residual, k)?;
    Ok(v.transpose())
}

/// Fits the surrogate model: alternate between empirical-Bayes feature weights
/// and a weighted SVD, then regress on `[S; G]`.
pub fn sva_fit(
    expr: &ExpressionMatrix,
    design: &DesignMatrix,
    num_sv: usize,
    options: &SvaOptions,
) -> Result<SvaFit> {
    let x = expr.values();
    let (m, n) = x.shape();
    if design.n_samples() != n {
        return Err(Error::DimensionMismatch(format!(
            "design has {} samples, matrix has {n}",
            design.n_samples()
        )));
    }
    if options.max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
    }
    if options.tol.is_nan() || options.tol <= 0.0 {
        return Err(Error::InvalidArgument("tol must be positive".into()));
    }

    if num_sv == 0 {
        let (b, gamma) = fit_regression(expr, design, &DMatrix::zeros(0, n))?;
        let zeros = DVector::zeros(m);
        return Ok(SvaFit {
            num_sv: 0,
            surrogates: DMatrix::zeros(0, n),
            coeff_outcome: b,
            coeff_surrogate: gamma,
            weights: FeatureWeights::from_parts(zeros.clone(), zeros),
            svd: None,
            design: design.clone(),
            convergence: Convergence::default(),
        });
    }
    if num_sv > m.min(n) {
        return Err(Error::InvalidArgument(format!(
            "num_sv = {num_sv} exceeds min(m, n) = {}",
            m.min(n)
        )));
    }

    let mut surrogates = initial_surrogates(x, design, num_sv)?;
    let mut convergence = Convergence::default();
    let mut previous: Option<DVector<f64>> = None;
    let mut last = None;
    for _ in 0..options.max_iter {
        let weights = empirical_bayes_weights(expr, design, &surrogates)?;
        let svd = weighted_svd_values(x, weights.pi_w.as_slice(), m.min(n))?;
        surrogates = svd.right_vectors.columns(0, num_sv).transpose();
        convergence.iterations += 1;
        let change = previous
            .as_ref()
            .map(|p| (&weights.pi_w - p).abs().max());
        previous = Some(weights.pi_w.clone());
        last = Some((weights, svd));
        if let Some(change) = change {
            convergence.weight_changes.push(change);
            if change < options.tol {
                convergence.converged = true;
                break;
            }
        }
    }
    let (weights, svd) = last.expect("at least one iteration");
    log::debug!(
        "sva_fit: {} iteration(s), weight changes {:?}",
        convergence.iterations,
        convergence.weight_changes
    );
    let (b, gamma) = fit_regression(expr, design, &surrogates).map_err(|e| match e {
        Error::RankDeficient { rank, expected } => Error::CollinearSurrogates { rank, expected },
        other => other,
    })?;
    Ok(SvaFit {
        num_sv,
        surrogates,
        coeff_outcome: b,
        coeff_surrogate: gamma,
        weights,
        svd: Some(svd),
        design: design.clone(),
        convergence,
    })
}

/// `X - Gamma G`. With no surrogates the input is returned unchanged.
pub fn clean_training(expr: &ExpressionMatrix, fit: &SvaFit) -> Result<ExpressionMatrix> {
    if fit.coeff_surrogate.nrows() != expr.n_features() || fit.surrogates.ncols() != expr.n_samples() {
        return Err(Error::DimensionMismatch(format!(
            "fit is {} x {}, matrix is {} x {}",
            fit.coeff_surrogate.nrows(),
            fit.surrogates.ncols(),
            expr.n_features(),
            expr.n_samples()
        )));
    }
    if fit.num_sv == 0 {
        return Ok(expr.clone());
    }
    expr.with_values(subtract_surrogates(expr.values(), &fit.coeff_surrogate, &fit.surrogates))
}

/// `values - gamma * surrogates`, the one place cleaned values are computed.
pub(crate) fn subtract_surrogates(
    values: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
    surrogates: &DMatrix<f64>,
) -> DMatrix<f64> {
    values - gamma * surrogates
}
