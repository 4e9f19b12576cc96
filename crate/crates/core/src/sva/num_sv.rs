//! Permutation estimate of the number of surrogate variables.
//!
//! The observed relative eigenvalue spectrum of the design residuals is
//! compared, rank by rank, with spectra of residual matrices whose rows were
//! permuted independently (and then residualized again, so both spectra live
//! in the same `n - p1` dimensional space). Counting stops at the first rank
//! that is not significant.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::data::{DesignMatrix, ExpressionMatrix};
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::derived_rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumSvOptions {
    pub n_perm: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for NumSvOptions {
    fn default() -> Self {
        Self {
            n_perm: 20,
            alpha: 0.10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumSvEstimate {
    pub num_sv: usize,
    /// Observed relative eigenvalues, largest first (`n - p1` of them).
    pub observed: Vec<f64>,
    /// Permutation threshold at each rank.
    pub thresholds: Vec<f64>,
    pub seed: u64,
}

/// Squared singular values of `r` divided by their sum, largest first,
/// truncated to `keep` entries.
fn relative_spectrum(r: &DMatrix<f64>, keep: usize) -> Vec<f64> {
    let gram = r.tr_mul(r);
    let mut ev: Vec<f64> = SymmetricEigen::new(gram)
        .eigenvalues
        .iter()
        .map(|&v| v.max(0.0))
        .collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = ev.iter().sum();
    ev.truncate(keep);
    if total > 0.0 {
        ev.iter_mut().for_each(|v| *v /= total);
    }
    ev
}

/// Order statistic used as the `(1 - alpha)` permutation quantile: the
/// `ceil((1 - alpha) (B + 1))`-th smallest of `B` values, clamped to `[1, B]`.
/// An observed value above it has permutation p-value at most `alpha`.
pub fn permutation_quantile_rank(n_perm: usize, alpha: f64) -> usize {
    let k = ((1.0 - alpha) * (n_perm + 1) as f64).ceil() as usize;
    k.clamp(1, n_perm)
}

pub fn estimate_num_sv(
    expr: &ExpressionMatrix,
    design: &DesignMatrix,
    options: &NumSvOptions,
) -> Result<NumSvEstimate> {
    let (n, p1) = (expr.n_samples(), design.n_terms());
    if n <= p1 {
        return Err(Error::InsufficientSamples { n, p1 });
    }
    if options.n_perm == 0 {
        return Err(Error::InvalidArgument("n_perm must be at least 1".into()));
    }
    if !(options.alpha > 0.0 && options.alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha = {} outside (0, 1)",
            options.alpha
        )));
    }
    if design.n_samples() != n {
        return Err(Error::DimensionMismatch(format!(
            "design has {} samples, matrix has {n}",
            design.n_samples()
        )));
    }
    let basis = linalg::row_space(design.values())?;
    let residual = linalg::project_out(expr.values(), &basis.q);
    let keep = (n - p1).min(expr.n_features());
    let observed = relative_spectrum(&residual, keep);

    let null: Vec<Vec<f64>> = (0..options.n_perm)
        .into_par_iter()
        .map(|b| {
            let mut rng = derived_rng(options.seed, b as u64);
            // Row-major copy so each feature's values are contiguous.
            let mut rows = residual.transpose();
            for mut col in rows.column_iter_mut() {
                col.as_mut_slice().shuffle(&mut rng);
            }
            let permuted = linalg::project_out(&rows.transpose(), &basis.q);
            relative_spectrum(&permuted, keep)
        })
        .collect();

    let order = permutation_quantile_rank(options.n_perm, options.alpha);
    let mut thresholds = Vec::with_capacity(keep);
    let mut num_sv = 0;
    let mut counting = true;
    for (k, &obs) in observed.iter().enumerate() {
        let mut at_rank: Vec<f64> = null.iter().map(|s| s.get(k).copied().unwrap_or(0.0)).collect();
        at_rank.sort_by(f64::total_cmp);
        let threshold = at_rank[order - 1];
        thresholds.push(threshold);
        if counting && obs > threshold {
            num_sv += 1;
        } else {
            counting = false;
        }
    }
    Ok(NumSvEstimate {
        num_sv,
        observed,
        thresholds,
        seed: options.seed,
    })
}
