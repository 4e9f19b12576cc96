//! Dense least-squares and decomposition helpers.
//!
//! Designs are stored the way they appear in the model, one row per term and
//! one column per sample, so regressing the rows of an `m x n` matrix on a
//! `q x n` design works with the transposed design `n x q`.

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};

/// Numerical rank with the usual `max(rows, cols) * eps * sigma_max` cutoff.
pub fn rank(a: &DMatrix<f64>) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = a.singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    let tol = a.nrows().max(a.ncols()) as f64 * f64::EPSILON * smax;
    sv.iter().filter(|&&s| s > tol).count()
}

/// Orthonormal basis (`n x q`) for the row space of a full-rank `q x n`
/// design, with the triangular factor `R` such that `design^T = Q R`.
pub(crate) struct RowSpace {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

pub(crate) fn row_space(design: &DMatrix<f64>) -> Result<RowSpace> {
    let (q_terms, n) = design.shape();
    if q_terms > n {
        return Err(Error::RankDeficient {
            rank: n,
            expected: q_terms,
        });
    }
    let r = rank(design);
    if r != q_terms {
        return Err(Error::RankDeficient {
            rank: r,
            expected: q_terms,
        });
    }
    let qr = design.transpose().qr();
    Ok(RowSpace {
        q: qr.q(),
        r: qr.r(),
    })
}

/// `X - (X Q) Q^T`: the part of every row orthogonal to the design rows.
pub fn residualize(x: &DMatrix<f64>, design: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if design.nrows() == 0 {
        return Ok(x.clone());
    }
    let basis = row_space(design)?;
    Ok(project_out(x, &basis.q))
}

pub(crate) fn project_out(x: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let xq = x * q;
    x - xq * q.transpose()
}

/// Row-wise least squares of `x` (`m x n`) on `design` (`q x n`). Returns the
/// `m x q` coefficients.
pub fn least_squares(x: &DMatrix<f64>, design: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.ncols() != design.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} samples, design has {}",
            x.ncols(),
            design.ncols()
        )));
    }
    let q_terms = design.nrows();
    if q_terms == 0 {
        return Ok(DMatrix::zeros(x.nrows(), 0));
    }
    let RowSpace { q, r } = row_space(design)?;
    // design = R^T Q^T, so coef * R^T = X Q, i.e. R * coef^T = (X Q)^T.
    let xq_t = (x * q).transpose();
    let coef_t = r
        .solve_upper_triangular(&xq_t)
        .ok_or(Error::RankDeficient {
            rank: 0,
            expected: q_terms,
        })?;
    Ok(coef_t.transpose())
}

/// Residual sum of squares of every row after projecting out `design`.
pub(crate) fn residual_sums_of_squares(
    x: &DMatrix<f64>,
    design: &DMatrix<f64>,
) -> Result<DVector<f64>> {
    let res = residualize(x, design)?;
    Ok(DVector::from_iterator(
        res.nrows(),
        res.row_iter().map(|r| r.norm_squared()),
    ))
}

/// Thin SVD sorted by decreasing singular value.
pub(crate) fn thin_svd(a: DMatrix<f64>, compute_u: bool) -> Result<SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    let svd = SVD::try_new(a, compute_u, true, f64::EPSILON, 0).ok_or_else(|| {
        Error::InvalidMatrix("singular value decomposition did not converge".into())
    })?;
    Ok(svd)
}

/// Right singular vectors (`n x k`, as columns) of a matrix, top `k` only.
pub(crate) fn top_right_vectors(a: DMatrix<f64>, k: usize) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let svd = thin_svd(a, false)?;
    let v_t = svd.v_t.expect("requested right vectors");
    let k = k.min(v_t.nrows());
    let v = v_t.rows(0, k).transpose();
    let d = svd.singular_values.rows(0, k).into_owned();
    Ok((d, v))
}

/// Scales row `i` of `x` by `w[i]`.
pub(crate) fn scale_rows(x: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut out = x.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        row *= w[i];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_dependent_rows() {
        let a = DMatrix::from_row_slice(3, 4, &[1., 2., 3., 4., 2., 4., 6., 8., 0., 1., 0., 1.]);
        assert_eq!(rank(&a), 2);
        assert_eq!(rank(&DMatrix::zeros(2, 3)), 0);
    }

    #[test]
    fn least_squares_recovers_exact_coefficients() {
        let design = DMatrix::from_row_slice(2, 5, &[1., 1., 1., 1., 1., 0., 1., 2., 3., 4.]);
        let coef = DMatrix::from_row_slice(3, 2, &[1., 2., -1., 0.5, 3., 0.]);
        let x = &coef * &design;
        let est = least_squares(&x, &design).unwrap();
        assert!((est - coef).abs().max() < 1e-12);
    }

    #[test]
    fn residuals_are_orthogonal_to_design() {
        let design = DMatrix::from_row_slice(2, 6, &[1., 1., 1., 1., 1., 1., 0., 0., 1., 1., 0., 1.]);
        let x = DMatrix::from_fn(4, 6, |i, j| ((i * 13 + j * 7) % 5) as f64 - 2.0);
        let res = residualize(&x, &design).unwrap();
        assert!((res * design.transpose()).abs().max() < 1e-12);
    }

    #[test]
    fn rank_deficient_design_is_rejected() {
        let design = DMatrix::from_row_slice(2, 3, &[1., 1., 1., 2., 2., 2.]);
        assert!(matches!(
            least_squares(&DMatrix::zeros(1, 3), &design),
            Err(Error::RankDeficient { rank: 1, expected: 2 })
        ));
    }
}
