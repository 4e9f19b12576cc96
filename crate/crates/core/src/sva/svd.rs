use nalgebra::{DMatrix, DVector};

use crate::data::ExpressionMatrix;
use crate::error::{Error, Result};
use crate::linalg;

/// Truncated SVD of the row-weighted matrix `diag(weights) X = U D V^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSvd {
    /// `m x r`, orthonormal columns.
    pub left_vectors: DMatrix<f64>,
    /// Length `r`, nonincreasing, nonnegative.
    pub singular_values: DVector<f64>,
    /// `n x r`, orthonormal columns.
    pub right_vectors: DMatrix<f64>,
    /// Length `m`, the diagonal of the weighting.
    pub weights: DVector<f64>,
}

impl WeightedSvd {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// `U D V^T`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut ud = self.left_vectors.clone();
        for (k, mut col) in ud.column_iter_mut().enumerate() {
            col *= self.singular_values[k];
        }
        ud * self.right_vectors.transpose()
    }
}

/// Top-`rank` decomposition of `diag(weights) X`.
pub fn weighted_svd(expr: &ExpressionMatrix, weights: &[f64], rank: usize) -> Result<WeightedSvd> {
    weighted_svd_values(expr.values(), weights, rank)
}

pub(crate) fn check_weights(weights: &[f64], m: usize) -> Result<()> {
    if weights.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {m} features",
            weights.len()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
        return Err(Error::InvalidArgument(format!("weight {w} outside [0, 1]")));
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::DegenerateWeighting);
    }
    Ok(())
}

pub(crate) fn weighted_svd_values(
    x: &DMatrix<f64>,
    weights: &[f64],
    rank: usize,
) -> Result<WeightedSvd> {
    let (m, n) = x.shape();
    check_weights(weights, m)?;
    let full = m.min(n);
    if rank > full {
        return Err(Error::InvalidArgument(format!(
            "rank {rank} exceeds min(m, n) = {full}"
        )));
    }
    let svd = linalg::thin_svd(linalg::scale_rows(x, weights), true)?;
    let u = svd.u.expect("requested left vectors");
    let v_t = svd.v_t.expect("requested right vectors");
    Ok(WeightedSvd {
        left_vectors: u.columns(0, rank).into_owned(),
        singular_values: svd.singular_values.rows(0, rank).into_owned(),
        right_vectors: v_t.rows(0, rank).transpose(),
        weights: DVector::from_column_slice(weights),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_matrix_with_unit_weights() {
        let x = ExpressionMatrix::from_values(DMatrix::from_diagonal(&DVector::from_vec(vec![3., 2., 1.]))).unwrap();
        let svd = weighted_svd(&x, &[1.0; 3], 3).unwrap();
        let d: Vec<f64> = svd.singular_values.iter().copied().collect();
        for (got, want) in d.iter().zip([3.0, 2.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn single_nonzero_weight_gives_rank_one() {
        let x = ExpressionMatrix::from_values(DMatrix::from_fn(5, 4, |i, j| ((i + 2 * j) % 3) as f64 + 0.5)).unwrap();
        let mut w = vec![0.0; 5];
        w[0] = 1.0;
        let svd = weighted_svd(&x, &w, 2).unwrap();
        assert!(svd.singular_values[0] > 0.0);
        assert!(svd.singular_values[1].abs() < 1e-10);
    }

    #[test]
    fn all_zero_weights_are_degenerate() {
        let x = ExpressionMatrix::from_values(DMatrix::from_element(3, 3, 1.0)).unwrap();
        assert!(matches!(weighted_svd(&x, &[0.0; 3], 1), Err(Error::DegenerateWeighting)));
        assert!(weighted_svd(&x, &[1.0, 2.0, 0.0], 1).is_err());
    }

    #[test]
    fn truncation_keeps_the_leading_triple() {
        let x = ExpressionMatrix::from_values(DMatrix::from_fn(6, 5, |i, j| ((i * 7 + j * 3) % 11) as f64)).unwrap();
        let w = [1.0, 0.5, 0.25, 1.0, 0.8, 0.1];
        let full = weighted_svd(&x, &w, 5).unwrap();
        let top = weighted_svd(&x, &w, 2).unwrap();
        assert_eq!(top.singular_values.rows(0, 2), full.singular_values.rows(0, 2));
        assert!((full.reconstruct() - linalg::scale_rows(x.values(), &w)).norm() < 1e-10);
    }
}
