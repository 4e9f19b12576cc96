//! Small statistics used by the estimators and the evaluation harness.

use rand::Rng as _;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::rng::rng_from;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (`n - 1` denominator); zero for fewer than two
/// values.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mu = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - mu).powi(2)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Pearson correlation; `NaN` when either input is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

/// One-sided paired t-test of `mean(a - b) > 0`. Returns the p-value.
pub fn paired_t_test_greater(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len();
    let mu = mean(&d);
    let sd = sample_sd(&d);
    if n < 2 || sd == 0.0 {
        return if mu > 0.0 { 0.0 } else { 1.0 };
    }
    let t = mu / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("valid degrees of freedom");
    1.0 - dist.cdf(t)
}

/// Percentile bootstrap interval for the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

pub fn bootstrap_mean_ci(xs: &[f64], resamples: usize, level: f64, seed: u64) -> Interval {
    let n = xs.len();
    if n == 0 {
        return Interval {
            low: f64::NAN,
            high: f64::NAN,
        };
    }
    let mut rng = rng_from(seed);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| {
            let s: f64 = (0..n).map(|_| xs[rng.random_range(0..n)]).sum();
            s / n as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Interval {
        low: quantile_sorted(&means, tail),
        high: quantile_sorted(&means, 1.0 - tail),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_handles_ties() {
        assert!((spearman(&[1., 2., 3.], &[3., 2., 1.]) + 1.0).abs() < 1e-12);
        assert!((spearman(&[1., 1., 2.], &[1., 1., 2.]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn paired_test_direction() {
        let a = [0.9, 0.8, 0.85, 0.95, 0.9];
        let b = [0.6, 0.5, 0.7, 0.6, 0.65];
        assert!(paired_t_test_greater(&a, &b) < 0.01);
        assert!(paired_t_test_greater(&b, &a) > 0.99);
    }

    #[test]
    fn bootstrap_brackets_mean() {
        let xs: Vec<f64> = (0..30).map(|i| (i % 7) as f64 / 7.0).collect();
        let ci = bootstrap_mean_ci(&xs, 2000, 0.95, 3);
        let mu = mean(&xs);
        assert!(ci.low <= mu && mu <= ci.high);
        let constant = bootstrap_mean_ci(&[0.5; 4], 100, 0.95, 1);
        assert_eq!((constant.low, constant.high), (0.5, 0.5));
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile_sorted(&[0., 10.], 0.25), 2.5);
        assert_eq!(median(&[3., 1., 2., 4.]), 2.5);
    }
}
