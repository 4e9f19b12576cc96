//! Synthetic studies with a planted batch effect.
//!
//! Data follow `X = B s + Gamma g + U` with a 0/1 outcome indicator `s`, a
//! 0/1 batch indicator `g` and independent Gaussian noise `U`. Coefficients
//! are sparse: a fixed fraction of features responds to the outcome, to the
//! batch, or to both. The database can be confounded (batch correlated with
//! outcome); new samples never are.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::data::{Dataset, ExpressionMatrix, OutcomeLabels};
use crate::error::{Error, Result};
use crate::rng::{rng_from, Rng};
use crate::stats;

/// Largest confounding level accepted.
pub const MAX_CONFOUNDING: f64 = 0.95;

/// How the dispersion numbers of a scenario are read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpreadConvention {
    /// `N(0, v)` has variance `v`.
    #[default]
    Variance,
    /// `N(0, v)` has standard deviation `v`.
    StdDev,
}

impl SpreadConvention {
    pub fn sd(self, value: f64) -> f64 {
        match self {
            SpreadConvention::Variance => value.sqrt(),
            SpreadConvention::StdDev => value,
        }
    }
}

/// What to do when the requested overlap is smaller than the marginal
/// fractions force (`frac_batch + frac_outcome - frac_both > 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverlapPolicy {
    /// Reject the scenario.
    #[default]
    Strict,
    /// Raise the overlap to the smallest feasible count.
    RaiseToFeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScenarioSpec {
    /// Dispersion of the outcome coefficients `B`.
    pub b_dispersion: f64,
    /// Dispersion of the batch coefficients `Gamma`.
    pub gamma_dispersion: f64,
    /// Dispersion of the noise `U`.
    pub noise_dispersion: f64,
    pub convention: SpreadConvention,
    pub frac_batch: f64,
    pub frac_outcome: f64,
    pub frac_both: f64,
    pub m: usize,
    pub n_db: usize,
    pub n_new: usize,
    pub confounding_rho: f64,
    pub seed: u64,
    pub overlap: OverlapPolicy,
}

impl ScenarioSpec {
    pub fn sd_b(&self) -> f64 {
        self.convention.sd(self.b_dispersion)
    }

    pub fn sd_gamma(&self) -> f64 {
        self.convention.sd(self.gamma_dispersion)
    }

    pub fn sd_noise(&self) -> f64 {
        self.convention.sd(self.noise_dispersion)
    }

    /// One of the three built-in scenarios (1-based).
    pub fn builtin(number: usize) -> Result<Self> {
        builtin_scenarios()
            .get(number.wrapping_sub(1))
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("no built-in scenario {number} (1-3)")))
    }

    /// Smaller study for quick runs: 1000 features.
    pub fn desk_scale(mut self) -> Self {
        self.m = 1000;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fracs = [self.frac_batch, self.frac_outcome, self.frac_both];
        if fracs.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::InvalidArgument("fractions must lie in [0, 1]".into()));
        }
        if self.frac_both > self.frac_batch.min(self.frac_outcome) {
            return Err(Error::InvalidArgument(format!(
                "frac_both = {} exceeds min(frac_batch, frac_outcome)",
                self.frac_both
            )));
        }
        if !(0.0..=MAX_CONFOUNDING).contains(&self.confounding_rho) {
            return Err(Error::InvalidArgument(format!(
                "confounding_rho = {} outside [0, {MAX_CONFOUNDING}]",
                self.confounding_rho
            )));
        }
        if self.m == 0 || self.n_db == 0 || self.n_new == 0 {
            return Err(Error::InvalidArgument("m, n_db and n_new must be positive".into()));
        }
        if self.n_db % 2 != 0 || self.n_new % 2 != 0 {
            return Err(Error::InvalidArgument("n_db and n_new must be even".into()));
        }
        let disp = [self.b_dispersion, self.gamma_dispersion, self.noise_dispersion];
        if disp.iter().any(|d| d.is_nan() || *d < 0.0) {
            return Err(Error::InvalidArgument("dispersions must be >= 0".into()));
        }
        Ok(())
    }
}

/// The three built-in scenarios, each with 10000 features and 100 database
/// and 100 new samples.
pub fn builtin_scenarios() -> [ScenarioSpec; 3] {
    let base = ScenarioSpec {
        b_dispersion: 1.0,
        gamma_dispersion: 3.0,
        noise_dispersion: 2.0,
        convention: SpreadConvention::Variance,
        frac_batch: 0.5,
        frac_outcome: 0.5,
        frac_both: 0.4,
        m: 10_000,
        n_db: 100,
        n_new: 100,
        confounding_rho: 0.0,
        seed: 0,
        overlap: OverlapPolicy::Strict,
    };
    [
        base,
        ScenarioSpec {
            gamma_dispersion: 4.0,
            noise_dispersion: 3.0,
            ..base
        },
        ScenarioSpec {
            gamma_dispersion: 4.0,
            noise_dispersion: 3.0,
            frac_batch: 0.8,
            frac_outcome: 0.8,
            frac_both: 0.5,
            ..base
        },
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfoundedLabels {
    /// 0/1 batch indicator.
    pub batch: Vec<u8>,
    /// 0/1 outcome indicator.
    pub outcome: Vec<u8>,
    /// Count in each concordant cell (batch == outcome), both cells equal.
    pub concordant: usize,
    pub achieved_correlation: f64,
}

/// Balanced batches and outcomes whose indicators have Pearson correlation
/// close to `rho`.
///
/// With both margins at `n/2`, putting `c` samples in each concordant cell
/// gives correlation `4c/n - 1`; `c = round(n (1 + rho) / 4)`.
pub fn assign_confounded_labels(n: usize, rho: f64, rng: &mut Rng) -> Result<ConfoundedLabels> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::InvalidArgument(format!("n = {n} must be positive and even")));
    }
    if !(0.0..=MAX_CONFOUNDING).contains(&rho) {
        return Err(Error::InvalidArgument(format!(
            "rho = {rho} outside [0, {MAX_CONFOUNDING}]"
        )));
    }
    let half = n / 2;
    let concordant = (n as f64 / 4.0 * (1.0 + rho)).round() as usize;
    if concordant > half {
        return Err(Error::Infeasible(format!(
            "{concordant} concordant samples per cell exceed the margin {half}"
        )));
    }
    let discordant = half - concordant;
    let mut cells: Vec<(u8, u8)> = Vec::with_capacity(n);
    cells.extend(std::iter::repeat_n((1, 1), concordant));
    cells.extend(std::iter::repeat_n((0, 0), concordant));
    cells.extend(std::iter::repeat_n((1, 0), discordant));
    cells.extend(std::iter::repeat_n((0, 1), discordant));
    cells.shuffle(rng);
    let (batch, outcome): (Vec<u8>, Vec<u8>) = cells.into_iter().unzip();
    Ok(ConfoundedLabels {
        batch,
        outcome,
        concordant,
        achieved_correlation: (4.0 * concordant as f64 - n as f64) / n as f64,
    })
}

/// Generating quantities of a simulated study.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTruth {
    /// Outcome coefficient of every feature (zero outside the outcome mask).
    pub outcome_coefficients: DVector<f64>,
    /// Batch coefficient of every feature (zero outside the batch mask).
    pub batch_coefficients: DVector<f64>,
    pub batch_mask: Vec<bool>,
    pub outcome_mask: Vec<bool>,
    /// Batch indicator rows `G` for the database and the new samples.
    pub database_batch: DVector<f64>,
    pub new_batch: DVector<f64>,
    pub database_correlation: f64,
    pub new_correlation: f64,
    pub overlap_count: usize,
    pub spec: ScenarioSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedStudy {
    pub database: Dataset,
    pub new_samples: Dataset,
    pub truth: SimulationTruth,
}

struct Masks {
    batch: Vec<bool>,
    outcome: Vec<bool>,
    overlap: usize,
}

fn draw_masks(spec: &ScenarioSpec, rng: &mut Rng) -> Result<Masks> {
    let m = spec.m;
    let n_batch = (spec.frac_batch * m as f64).round() as usize;
    let n_outcome = (spec.frac_outcome * m as f64).round() as usize;
    let mut n_both = (spec.frac_both * m as f64).round() as usize;
    let needed = (n_batch + n_outcome).saturating_sub(m);
    if n_both < needed {
        match spec.overlap {
            OverlapPolicy::Strict => {
                return Err(Error::Infeasible(format!(
                    "{n_batch} batch-affected and {n_outcome} outcome-affected features out of {m} \
                     need an overlap of at least {needed}, but {n_both} was requested"
                )));
            }
            OverlapPolicy::RaiseToFeasible => n_both = needed,
        }
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    let (both, rest) = order.split_at(n_both);
    let (batch_only, rest) = rest.split_at(n_batch - n_both);
    let outcome_only = &rest[..n_outcome - n_both];
    let mut batch = vec![false; m];
    let mut outcome = vec![false; m];
    for &i in both {
        batch[i] = true;
        outcome[i] = true;
    }
    for &i in batch_only {
        batch[i] = true;
    }
    for &i in outcome_only {
        outcome[i] = true;
    }
    Ok(Masks {
        batch,
        outcome,
        overlap: n_both,
    })
}

fn sparse_normal(mask: &[bool], sd: f64, rng: &mut Rng) -> DVector<f64> {
    let dist = Normal::new(0.0, sd).expect("finite sd");
    // Draw for every feature so the stream does not depend on the mask.
    DVector::from_iterator(
        mask.len(),
        mask.iter().map(|&on| {
            let v = dist.sample(rng);
            if on {
                v
            } else {
                0.0
            }
        }),
    )
}

fn generate(
    b: &DVector<f64>,
    gamma: &DVector<f64>,
    labels: &ConfoundedLabels,
    sd_noise: f64,
    prefix: &str,
    rng: &mut Rng,
) -> Result<(Dataset, DVector<f64>)> {
    let m = b.len();
    let n = labels.batch.len();
    let noise = Normal::new(0.0, sd_noise).expect("finite sd");
    let mut values = DMatrix::zeros(m, n);
    for j in 0..n {
        let s = labels.outcome[j] as f64;
        let g = labels.batch[j] as f64;
        for i in 0..m {
            values[(i, j)] = b[i] * s + gamma[i] * g + noise.sample(rng);
        }
    }
    let width = n.to_string().len();
    let samples: Vec<String> = (1..=n).map(|j| format!("{prefix}{j:0width$}")).collect();
    let fwidth = m.to_string().len();
    let features: Vec<String> = (1..=m).map(|i| format!("f{i:0fwidth$}")).collect();
    let expr = ExpressionMatrix::new(values, features, samples)?;
    let outcome: Vec<String> = labels.outcome.iter().map(u8::to_string).collect();
    let batch: Vec<String> = labels.batch.iter().map(u8::to_string).collect();
    let outcomes = OutcomeLabels::new(outcome, vec!["0".into(), "1".into()])?;
    let g = DVector::from_iterator(n, labels.batch.iter().map(|&v| v as f64));
    Ok((Dataset::new(expr, outcomes, Some(batch))?, g))
}

pub fn simulate_study(spec: &ScenarioSpec) -> Result<SimulatedStudy> {
    spec.validate()?;
    let mut rng = rng_from(spec.seed);
    let masks = draw_masks(spec, &mut rng)?;
    let b = sparse_normal(&masks.outcome, spec.sd_b(), &mut rng);
    let gamma = sparse_normal(&masks.batch, spec.sd_gamma(), &mut rng);
    let db_labels = assign_confounded_labels(spec.n_db, spec.confounding_rho, &mut rng)?;
    let (database, db_g) = generate(&b, &gamma, &db_labels, spec.sd_noise(), "db", &mut rng)?;
    let new_labels = assign_confounded_labels(spec.n_new, 0.0, &mut rng)?;
    let (new_samples, new_g) = generate(&b, &gamma, &new_labels, spec.sd_noise(), "new", &mut rng)?;
    Ok(SimulatedStudy {
        database,
        new_samples,
        truth: SimulationTruth {
            outcome_coefficients: b,
            batch_coefficients: gamma,
            batch_mask: masks.batch,
            outcome_mask: masks.outcome,
            database_batch: db_g,
            new_batch: new_g,
            database_correlation: db_labels.achieved_correlation,
            new_correlation: new_labels.achieved_correlation,
            overlap_count: masks.overlap,
            spec: *spec,
        },
    })
}

/// Pearson correlation of two 0/1 label vectors given as strings.
pub fn indicator_correlation(a: &[String], b: &[String]) -> f64 {
    let x: Vec<f64> = a.iter().map(|v| if v == "1" { 1.0 } else { 0.0 }).collect();
    let y: Vec<f64> = b.iter().map(|v| if v == "1" { 1.0 } else { 0.0 }).collect();
    stats::pearson(&x, &y)
}
