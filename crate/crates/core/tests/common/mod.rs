#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use fsva::rng::{rng_from, Rng};
use fsva::simulate::{builtin_scenarios, ScenarioSpec};

/// One-sided Jacobi SVD, written from scratch so the library's decomposition
/// can be checked against something that shares no code with it.
///
/// Returns `(u, d, v)` for `a` (`m x n`, `m >= n`) with `d` sorted
/// descending; columns of `u` for zero singular values are left at zero.
pub fn jacobi_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    assert!(m >= n, "oracle expects a tall matrix");
    let mut u = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    alpha += u[(i, p)] * u[(i, p)];
                    beta += u[(i, q)] * u[(i, q)];
                    gamma += u[(i, p)] * u[(i, q)];
                }
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (up, uq) = (u[(i, p)], u[(i, q)]);
                    u[(i, p)] = c * up - s * uq;
                    u[(i, q)] = s * up + c * uq;
                }
                for i in 0..n {
                    let (vp, vq) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut d: Vec<(f64, usize)> = (0..n).map(|k| (u.column(k).norm(), k)).collect();
    d.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut uu = DMatrix::zeros(m, n);
    let mut vv = DMatrix::zeros(n, n);
    let dmax = d[0].0;
    for (slot, &(s, k)) in d.iter().enumerate() {
        if s > 1e-13 * dmax {
            uu.set_column(slot, &(u.column(k) / s));
        }
        vv.set_column(slot, &v.column(k));
    }
    (uu, d.into_iter().map(|(s, _)| s).collect(), vv)
}

pub fn normal_matrix(rows: usize, cols: usize, rng: &mut Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

pub fn uniform_weights(m: usize, rng: &mut Rng) -> Vec<f64> {
    (0..m).map(|_| rng.random_range(0.05..=1.0)).collect()
}

/// Scenario 1 at `m` features, `n_db` database and `n_new` new samples.
pub fn scenario1(m: usize, n_db: usize, n_new: usize, rho: f64, seed: u64) -> ScenarioSpec {
    ScenarioSpec {
        m,
        n_db,
        n_new,
        confounding_rho: rho,
        seed,
        ..builtin_scenarios()[0]
    }
}

pub fn seeded(seed: u64) -> Rng {
    rng_from(seed)
}

pub fn bitwise_equal(a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
    a.shape() == b.shape() && a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits())
}
