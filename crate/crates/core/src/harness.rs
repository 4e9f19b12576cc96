//! End-to-end evaluation: simulation sweeps over confounding levels and
//! repeated database/new-sample splits of one study.
//!
//! Every replicate runs the same pipeline. Estimate `p2` and fit SVA on the
//! database, clean it, train a classifier, then predict the new samples under
//! each configured [`Method`]. New-sample labels are only used to score
//! predictions, after the correction and prediction steps are done.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::classifier::{Classifier, NearestShrunkenCentroids, Shrinkage, TrainedClassifier};
use crate::correct::{fsva_exact, fsva_fast};
use crate::data::{encode_design, Dataset, ExpressionMatrix};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from};
use crate::simulate::{simulate_study, ScenarioSpec, MAX_CONFOUNDING};
use crate::stats::{self, Interval};
use crate::sva::{train, NumSvOptions, SurrogateCount, SvaOptions, TrainOptions};

/// Bootstrap resamples used for every confidence interval.
pub const BOOTSTRAP_RESAMPLES: usize = 2000;
/// Confidence level of every interval.
pub const CI_LEVEL: f64 = 0.95;

// Seed streams. Each replicate's simulation seed depends only on the
// iteration, so methods and confounding levels are compared on paired data.
const STREAM_SIMULATE: u64 = 1;
const STREAM_NUM_SV: u64 = 2;
const STREAM_CLASSIFIER: u64 = 3;
const STREAM_SPLIT: u64 = 4;
const STREAM_BOOTSTRAP: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Classifier trained on the raw database, applied to raw new samples.
    None,
    /// Classifier trained on the cleaned database, applied to raw new samples.
    SvaDbOnly,
    /// Cleaned database, new samples corrected by exact fSVA.
    FsvaExact,
    /// Cleaned database, new samples corrected by fast fSVA.
    FsvaFast,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::None, Method::SvaDbOnly, Method::FsvaExact, Method::FsvaFast];

    pub fn name(self) -> &'static str {
        match self {
            Method::None => "none",
            Method::SvaDbOnly => "sva_db_only",
            Method::FsvaExact => "fsva_exact",
            Method::FsvaFast => "fsva_fast",
        }
    }

    fn needs_sva(self) -> bool {
        self != Method::None
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "unknown method {s:?} (expected none, sva_db_only, fsva_exact or fsva_fast)"
                ))
            })
    }
}

/// Settings shared by every replicate's pipeline.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineOptions {
    /// Permutations and level of the per-replicate `p2` estimate. Its seed is
    /// replaced by one derived from the replicate.
    pub num_sv: NumSvOptions,
    /// Use a fixed `p2` instead of estimating it.
    pub fixed_num_sv: Option<usize>,
    pub sva: SvaOptions,
    pub classifier: NearestShrunkenCentroids,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    pub n_iterations: usize,
    pub rho_grid: Vec<f64>,
    pub scenario: ScenarioSpec,
    /// Fraction of samples placed in the database by [`run_split_study`].
    pub split_fraction: f64,
    pub seed: u64,
    pub pipeline: PipelineOptions,
}

impl ExperimentConfig {
    /// 25 iterations of a scenario at 1000 features, all four methods.
    pub fn desk_scale(scenario: ScenarioSpec, rho_grid: Vec<f64>, seed: u64) -> Self {
        Self {
            methods: Method::ALL.to_vec(),
            n_iterations: 25,
            rho_grid,
            scenario: scenario.desk_scale(),
            split_fraction: 0.5,
            seed,
            pipeline: PipelineOptions::default(),
        }
    }

    /// The full design: 10000 features and 100 iterations.
    pub fn full_scale(scenario: ScenarioSpec, rho_grid: Vec<f64>, seed: u64) -> Self {
        Self {
            n_iterations: 100,
            scenario: ScenarioSpec { m: 10_000, ..scenario },
            ..Self::desk_scale(scenario, rho_grid, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_iterations == 0 {
            return Err(Error::InvalidArgument("n_iterations must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("no methods configured".into()));
        }
        if let Some(rho) = self.rho_grid.iter().find(|r| !(0.0..=MAX_CONFOUNDING).contains(*r)) {
            return Err(Error::InvalidArgument(format!(
                "rho = {rho} outside [0, {MAX_CONFOUNDING}]"
            )));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "split_fraction = {} outside (0, 1)",
                self.split_fraction
            )));
        }
        Ok(())
    }

    fn header(&self, kind: &str) -> String {
        #[derive(Serialize)]
        struct Header<'a> {
            study: &'a str,
            seed: u64,
            n_iterations: usize,
            methods: Vec<&'static str>,
            rho_grid: &'a [f64],
            split_fraction: f64,
            scenario: &'a ScenarioSpec,
            n_perm: usize,
            alpha: f64,
            fixed_num_sv: Option<usize>,
            max_iter: usize,
            tol: f64,
            shrinkage: String,
            bootstrap_resamples: usize,
        }
        let shrinkage = match &self.pipeline.classifier.shrinkage {
            Shrinkage::Fixed(d) => format!("fixed:{d}"),
            Shrinkage::CrossValidated { folds, grid } => format!("cv{folds}:{grid:?}"),
        };
        let header = Header {
            study: kind,
            seed: self.seed,
            n_iterations: self.n_iterations,
            methods: self.methods.iter().map(|m| m.name()).collect(),
            rho_grid: &self.rho_grid,
            split_fraction: self.split_fraction,
            scenario: &self.scenario,
            n_perm: self.pipeline.num_sv.n_perm,
            alpha: self.pipeline.num_sv.alpha,
            fixed_num_sv: self.pipeline.fixed_num_sv,
            max_iter: self.pipeline.sva.max_iter,
            tol: self.pipeline.sva.tol,
            shrinkage,
            bootstrap_resamples: BOOTSTRAP_RESAMPLES,
        };
        format!("# {}", serde_json::to_string(&header).expect("header serializes"))
    }
}

/// One method in one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub method: Method,
    /// `None` for split studies.
    pub rho: Option<f64>,
    pub iteration: usize,
    /// `None` when the replicate failed for this method.
    pub accuracy: Option<f64>,
    /// Number of surrogates used, when SVA ran.
    pub num_sv: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    pub rho: Option<f64>,
    pub mean_accuracy: f64,
    pub ci: Interval,
    /// Successful replicates.
    pub n_iter: usize,
    pub failures: usize,
}

/// Paired accuracy gain of a method over the uncorrected baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct Improvement {
    pub method: Method,
    pub rho: Option<f64>,
    pub mean: f64,
    pub ci: Interval,
    pub n_paired: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    pub header: String,
    pub methods: Vec<Method>,
    pub rho_grid: Vec<Option<f64>>,
    pub records: Vec<IterationRecord>,
    pub summaries: Vec<MethodSummary>,
    pub improvements: Vec<Improvement>,
    /// Per `rho`, fraction of replicates whose accuracies follow the order of
    /// the method means.
    pub ordinality: Vec<(Option<f64>, f64)>,
}

fn same_rho(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => x.to_bits() == y.to_bits(),
        (None, None) => true,
        _ => false,
    }
}

fn fmt_rho(rho: Option<f64>) -> String {
    rho.map_or_else(|| "NA".to_string(), |r| format!("{r:.2}"))
}

impl AccuracyReport {
    /// Accuracy per iteration, `None` where the replicate failed.
    pub fn accuracy_by_iteration(&self, method: Method, rho: Option<f64>) -> BTreeMap<usize, Option<f64>> {
        self.records
            .iter()
            .filter(|r| r.method == method && same_rho(r.rho, rho))
            .map(|r| (r.iteration, r.accuracy))
            .collect()
    }

    /// Successful accuracies in iteration order.
    pub fn accuracies(&self, method: Method, rho: Option<f64>) -> Vec<f64> {
        self.accuracy_by_iteration(method, rho).into_values().flatten().collect()
    }

    /// Accuracies of two methods on the iterations where both succeeded.
    pub fn paired(&self, a: Method, b: Method, rho: Option<f64>) -> (Vec<f64>, Vec<f64>) {
        let xa = self.accuracy_by_iteration(a, rho);
        let xb = self.accuracy_by_iteration(b, rho);
        xa.iter()
            .filter_map(|(it, va)| Some(((*va)?, (*xb.get(it)?)?)))
            .unzip()
    }

    /// Per-iteration `accuracy(method) - accuracy(none)`.
    pub fn improvement_series(&self, method: Method, rho: Option<f64>) -> Vec<f64> {
        let (a, b) = self.paired(method, Method::None, rho);
        a.iter().zip(&b).map(|(x, y)| x - y).collect()
    }

    pub fn summary(&self, method: Method, rho: Option<f64>) -> Option<&MethodSummary> {
        self.summaries
            .iter()
            .find(|s| s.method == method && same_rho(s.rho, rho))
    }

    pub fn improvement(&self, method: Method, rho: Option<f64>) -> Option<&Improvement> {
        self.improvements
            .iter()
            .find(|s| s.method == method && same_rho(s.rho, rho))
    }

    pub fn total_failures(&self) -> usize {
        self.records.iter().filter(|r| r.accuracy.is_none()).count()
    }

    /// Columns `method, rho, mean_accuracy, ci_low, ci_high, n_iter, failures`.
    pub fn summary_table(&self) -> String {
        let mut out = format!("{}\nmethod\trho\tmean_accuracy\tci_low\tci_high\tn_iter\tfailures\n", self.header);
        for s in &self.summaries {
            let _ = writeln!(
                out,
                "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{}\t{}",
                s.method,
                fmt_rho(s.rho),
                s.mean_accuracy,
                s.ci.low,
                s.ci.high,
                s.n_iter,
                s.failures
            );
        }
        out
    }

    pub fn improvement_table(&self) -> String {
        let mut out = format!("{}\nmethod\trho\tmean_improvement\tci_low\tci_high\tn_paired\n", self.header);
        for s in &self.improvements {
            let _ = writeln!(
                out,
                "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{}",
                s.method,
                fmt_rho(s.rho),
                s.mean,
                s.ci.low,
                s.ci.high,
                s.n_paired
            );
        }
        let _ = writeln!(out, "# ordinality");
        for (rho, frac) in &self.ordinality {
            let _ = writeln!(out, "# rho={}\tfraction_preserving_order={frac:.6}", fmt_rho(*rho));
        }
        out
    }

    /// Long form, one row per method and replicate.
    pub fn iterations_table(&self) -> String {
        let mut out = format!("{}\nmethod\trho\titeration\taccuracy\tnum_sv\terror\n", self.header);
        for r in &self.records {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                r.method,
                fmt_rho(r.rho),
                r.iteration,
                r.accuracy.map_or_else(|| "NA".into(), |a| format!("{a:.6}")),
                r.num_sv.map_or_else(|| "NA".into(), |k| k.to_string()),
                r.error.as_deref().unwrap_or("").replace(['\t', '\n'], " ")
            );
        }
        out
    }

    /// Writes `summary.tsv`, `improvement.tsv` and `iterations.tsv`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let files = [
            ("summary.tsv", self.summary_table()),
            ("improvement.tsv", self.improvement_table()),
            ("iterations.tsv", self.iterations_table()),
        ];
        let mut written = Vec::new();
        for (name, body) in files {
            let path = dir.join(name);
            fs::write(&path, body)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Accuracy of each method for one database/new-sample pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub accuracies: Vec<(Method, Result<f64, String>)>,
    pub num_sv: Option<usize>,
}

fn score<C: TrainedClassifier>(model: &C, samples: &ExpressionMatrix, truth: &[String]) -> Result<f64> {
    let predicted = model.predict_labels(samples)?;
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Runs the pipeline on one database and one set of new samples.
///
/// Correction and prediction see only `new_samples.expr`; the new-sample
/// labels are read afterwards, to score.
pub fn evaluate_methods(
    database: &Dataset,
    new_samples: &Dataset,
    methods: &[Method],
    pipeline: &PipelineOptions,
    seed: u64,
) -> PipelineOutcome {
    let classifier_seed = derive_seed(seed, STREAM_CLASSIFIER);
    let new_expr = &new_samples.expr;
    let truth = new_samples.outcomes.labels();

    let raw = || -> Result<f64> {
        let model = pipeline
            .classifier
            .train(&database.expr, &database.outcomes, classifier_seed)?;
        score(&model, new_expr, truth)
    };

    let trained = if methods.iter().any(|m| m.needs_sva()) {
        let num_sv = match pipeline.fixed_num_sv {
            Some(k) => SurrogateCount::Fixed(k),
            None => SurrogateCount::Estimate(NumSvOptions {
                seed: derive_seed(seed, STREAM_NUM_SV),
                ..pipeline.num_sv
            }),
        };
        let options = TrainOptions {
            num_sv,
            sva: pipeline.sva,
        };
        Some(
            encode_design(&database.outcomes)
                .and_then(|design| train(&database.expr, &design, &options))
                .and_then(|t| {
                    let model = pipeline
                        .classifier
                        .train(&t.cleaned, &database.outcomes, classifier_seed)?;
                    Ok((t, model))
                })
                .map_err(|e| e.to_string()),
        )
    } else {
        None
    };

    let mut accuracies = Vec::with_capacity(methods.len());
    for &method in methods {
        let acc: std::result::Result<f64, String> = match method {
            Method::None => raw().map_err(|e| e.to_string()),
            _ => match trained.as_ref().expect("trained when an SVA method is configured") {
                Err(e) => Err(e.clone()),
                Ok((t, model)) => match method {
                    Method::SvaDbOnly => score(model, new_expr, truth),
                    Method::FsvaExact => fsva_exact(&t.frozen, new_expr)
                        .and_then(|c| score(model, &c.cleaned, truth)),
                    Method::FsvaFast => fsva_fast(&t.frozen, new_expr)
                        .and_then(|c| score(model, &c.cleaned, truth)),
                    Method::None => unreachable!(),
                }
                .map_err(|e| e.to_string()),
            },
        };
        accuracies.push((method, acc));
    }
    let num_sv = match &trained {
        Some(Ok((t, _))) => Some(t.fit.num_sv),
        _ => None,
    };
    PipelineOutcome { accuracies, num_sv }
}

fn records_from(outcome: PipelineOutcome, rho: Option<f64>, iteration: usize) -> Vec<IterationRecord> {
    outcome
        .accuracies
        .into_iter()
        .map(|(method, acc)| {
            let (accuracy, error) = match acc {
                Ok(a) => (Some(a), None),
                Err(e) => (None, Some(e)),
            };
            IterationRecord {
                method,
                rho,
                iteration,
                accuracy,
                num_sv: if method.needs_sva() { outcome.num_sv } else { None },
                error,
            }
        })
        .collect()
}

fn failed_records(methods: &[Method], rho: Option<f64>, iteration: usize, err: &Error) -> Vec<IterationRecord> {
    methods
        .iter()
        .map(|&method| IterationRecord {
            method,
            rho,
            iteration,
            accuracy: None,
            num_sv: None,
            error: Some(err.to_string()),
        })
        .collect()
}

fn ordinality(records: &[IterationRecord], methods: &[Method], summaries: &[MethodSummary], rho: Option<f64>) -> f64 {
    let mut order: Vec<(Method, f64)> = methods
        .iter()
        .filter_map(|&m| {
            summaries
                .iter()
                .find(|s| s.method == m && same_rho(s.rho, rho))
                .map(|s| (m, s.mean_accuracy))
        })
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut by_iter: BTreeMap<usize, BTreeMap<Method, f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| same_rho(r.rho, rho)) {
        if let Some(a) = r.accuracy {
            by_iter.entry(r.iteration).or_default().insert(r.method, a);
        }
    }
    let complete: Vec<_> = by_iter
        .values()
        .filter(|accs| order.iter().all(|(m, _)| accs.contains_key(m)))
        .collect();
    if complete.is_empty() {
        return f64::NAN;
    }
    let kept = complete
        .iter()
        .filter(|accs| order.windows(2).all(|w| accs[&w[0].0] >= accs[&w[1].0]))
        .count();
    kept as f64 / complete.len() as f64
}

fn summarize(
    header: String,
    methods: &[Method],
    rho_grid: Vec<Option<f64>>,
    records: Vec<IterationRecord>,
    seed: u64,
) -> AccuracyReport {
    let mut report = AccuracyReport {
        header,
        methods: methods.to_vec(),
        rho_grid: rho_grid.clone(),
        records,
        summaries: Vec::new(),
        improvements: Vec::new(),
        ordinality: Vec::new(),
    };
    for (ri, &rho) in rho_grid.iter().enumerate() {
        for (mi, &method) in methods.iter().enumerate() {
            let by_iter = report.accuracy_by_iteration(method, rho);
            let accs: Vec<f64> = by_iter.values().flatten().copied().collect();
            let failures = by_iter.values().filter(|a| a.is_none()).count();
            let stream = derive_seed(seed, STREAM_BOOTSTRAP ^ ((ri as u64) << 16) ^ ((mi as u64) << 8));
            let (mean, ci) = if accs.is_empty() {
                (f64::NAN, Interval { low: f64::NAN, high: f64::NAN })
            } else {
                (stats::mean(&accs), stats::bootstrap_mean_ci(&accs, BOOTSTRAP_RESAMPLES, CI_LEVEL, stream))
            };
            report.summaries.push(MethodSummary {
                method,
                rho,
                mean_accuracy: mean,
                ci,
                n_iter: accs.len(),
                failures,
            });
            if method != Method::None && methods.contains(&Method::None) {
                let diffs = report.improvement_series(method, rho);
                let (mean, ci) = if diffs.is_empty() {
                    (f64::NAN, Interval { low: f64::NAN, high: f64::NAN })
                } else {
                    (
                        stats::mean(&diffs),
                        stats::bootstrap_mean_ci(&diffs, BOOTSTRAP_RESAMPLES, CI_LEVEL, derive_seed(stream, 1)),
                    )
                };
                report.improvements.push(Improvement {
                    method,
                    rho,
                    mean,
                    ci,
                    n_paired: diffs.len(),
                });
            }
        }
        let frac = ordinality(&report.records, methods, &report.summaries, rho);
        report.ordinality.push((rho, frac));
    }
    report
}

/// Simulates `n_iterations` studies at every confounding level and scores
/// each method.
pub fn run_simulation_sweep(config: &ExperimentConfig) -> Result<AccuracyReport> {
    config.validate()?;
    config.scenario.validate()?;
    let jobs: Vec<(f64, usize)> = config
        .rho_grid
        .iter()
        .flat_map(|&rho| (0..config.n_iterations).map(move |it| (rho, it)))
        .collect();
    let records: Vec<IterationRecord> = jobs
        .par_iter()
        .flat_map_iter(|&(rho, it)| {
            let sim_seed = derive_seed(derive_seed(config.seed, STREAM_SIMULATE), it as u64);
            let spec = ScenarioSpec {
                confounding_rho: rho,
                seed: sim_seed,
                ..config.scenario
            };
            match simulate_study(&spec) {
                Ok(study) => {
                    let out = evaluate_methods(
                        &study.database,
                        &study.new_samples,
                        &config.methods,
                        &config.pipeline,
                        sim_seed,
                    );
                    records_from(out, Some(rho), it)
                }
                Err(e) => {
                    log::warn!("rho {rho} iteration {it}: {e}");
                    failed_records(&config.methods, Some(rho), it, &e)
                }
            }
        })
        .collect();
    Ok(summarize(
        config.header("simulation"),
        &config.methods,
        config.rho_grid.iter().map(|&r| Some(r)).collect(),
        records,
        config.seed,
    ))
}

/// Random split stratified by outcome: returns `(database, new)` indices,
/// each sorted.
pub fn stratified_split(dataset: &Dataset, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let outcomes = &dataset.outcomes;
    let codes = outcomes.codes();
    let mut rng = rng_from(seed);
    let (mut db, mut new) = (Vec::new(), Vec::new());
    for (c, class) in outcomes.class_set().iter().enumerate() {
        let mut members: Vec<usize> = (0..codes.len()).filter(|&j| codes[j] == c).collect();
        let take = (members.len() as f64 * fraction).round() as usize;
        if take < 2 || members.len() - take < 1 {
            let required = ((2.0 / fraction).ceil() as usize).max(3);
            return Err(Error::ClassTooSmall {
                class: class.clone(),
                count: members.len(),
                required,
            });
        }
        members.shuffle(&mut rng);
        db.extend_from_slice(&members[..take]);
        new.extend_from_slice(&members[take..]);
    }
    db.sort_unstable();
    new.sort_unstable();
    Ok((db, new))
}

/// Repeatedly splits one study into database and new samples and scores
/// each method on the held-out part.
pub fn run_split_study(dataset: &Dataset, config: &ExperimentConfig) -> Result<AccuracyReport> {
    config.validate()?;
    // Fail early on classes that can never be split.
    stratified_split(dataset, config.split_fraction, 0)?;
    let records: Vec<IterationRecord> = (0..config.n_iterations)
        .into_par_iter()
        .flat_map_iter(|it| {
            let seed = derive_seed(derive_seed(config.seed, STREAM_SPLIT), it as u64);
            let split = stratified_split(dataset, config.split_fraction, seed).and_then(|(db, new)| {
                Ok((dataset.select_samples(&db)?, dataset.select_samples(&new)?))
            });
            match split {
                Ok((database, new_samples)) => {
                    let out = evaluate_methods(&database, &new_samples, &config.methods, &config.pipeline, seed);
                    records_from(out, None, it)
                }
                Err(e) => failed_records(&config.methods, None, it, &e),
            }
        })
        .collect();
    Ok(summarize(
        config.header("split"),
        &config.methods,
        vec![None],
        records,
        config.seed,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::builtin_scenarios;

    fn tiny(methods: Vec<Method>) -> ExperimentConfig {
        let scenario = ScenarioSpec {
            m: 200,
            n_db: 40,
            n_new: 40,
            ..builtin_scenarios()[0]
        };
        ExperimentConfig {
            methods,
            n_iterations: 3,
            rho_grid: vec![0.0, 0.6],
            scenario,
            split_fraction: 0.5,
            seed: 11,
            pipeline: PipelineOptions {
                num_sv: NumSvOptions { n_perm: 5, ..Default::default() },
                ..Default::default()
            },
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("svd".parse::<Method>().is_err());
    }

    #[test]
    fn minimal_run() {
        let config = ExperimentConfig {
            n_iterations: 1,
            rho_grid: vec![0.0],
            ..tiny(vec![Method::None])
        };
        let report = run_simulation_sweep(&config).unwrap();
        assert_eq!(report.records.len(), 1);
        assert_eq!(report.summaries.len(), 1);
        assert!(report.improvements.is_empty());
        let s = &report.summaries[0];
        assert_eq!(s.n_iter, 1);
        assert!(s.ci.low <= s.mean_accuracy && s.mean_accuracy <= s.ci.high);
        assert_eq!(report.summary_table().lines().count(), 3);
    }

    #[test]
    fn every_cell_is_reported() {
        let report = run_simulation_sweep(&tiny(Method::ALL.to_vec())).unwrap();
        assert_eq!(report.summaries.len(), 8);
        assert_eq!(report.improvements.len(), 6);
        assert_eq!(report.records.len(), 24);
        for r in &report.records {
            if let Some(a) = r.accuracy {
                assert!((0.0..=1.0).contains(&a));
            }
        }
        let table = report.summary_table();
        assert!(table.starts_with("# {"));
        assert_eq!(table.lines().nth(1).unwrap(), "method\trho\tmean_accuracy\tci_low\tci_high\tn_iter\tfailures");
    }

    #[test]
    fn invalid_configs() {
        let mut c = tiny(vec![Method::None]);
        c.n_iterations = 0;
        assert!(c.validate().is_err());
        let mut c = tiny(vec![Method::None]);
        c.rho_grid = vec![0.99];
        assert!(c.validate().is_err());
        let mut c = tiny(vec![Method::None]);
        c.split_fraction = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn split_is_stratified_and_disjoint() {
        let study = simulate_study(&ScenarioSpec { m: 50, n_db: 20, n_new: 20, ..builtin_scenarios()[0] }).unwrap();
        let (db, new) = stratified_split(&study.database, 0.5, 3).unwrap();
        assert_eq!(db.len() + new.len(), 20);
        assert!(db.iter().all(|j| !new.contains(j)));
        let counts = study.database.outcomes.select(&db).unwrap().class_counts();
        assert_eq!(counts, vec![5, 5]);
    }
}
