use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde_json::json;

use fsva::classifier::{nsc_predict, Classifier, NearestShrunkenCentroids, NscModel, Shrinkage};
use fsva::correct::{compare_variants, fsva_correct, CorrectionMethod};
use fsva::harness::{run_simulation_sweep, run_split_study, AccuracyReport, ExperimentConfig, Method, PipelineOptions};
use fsva::io::{join_labels, read_labels, read_matrix, write_labels, write_matrix, Delimiter};
use fsva::simulate::{simulate_study, OverlapPolicy, ScenarioSpec, SpreadConvention};
use fsva::sva::{train, FrozenModel, NumSvOptions, SurrogateCount, SvaOptions, TrainOptions};
use fsva::{align_features, encode_design, Dataset, ExpressionMatrix, OutcomeLabels, Persist};

use crate::args::{
    BenchArgs, Cli, Command, Convention, CorrectArgs, EvalArgs, MethodArg, PredictArgs, ScenarioArgs,
    SimulateArgs, SplitEvalArgs, SurrogateArgs, SweepArgs, TrainArgs,
};

pub const MODEL_FILE: &str = "frozen_model.json";
pub const CLASSIFIER_FILE: &str = "classifier.json";

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the thread pool")?;
    }
    fs::create_dir_all(&cli.out_dir)
        .with_context(|| format!("creating output directory {}", cli.out_dir.display()))?;
    let ctx = Ctx { cli };
    match &cli.command {
        Command::Simulate(a) => ctx.simulate(a),
        Command::Train(a) => ctx.train(a),
        Command::Correct(a) => ctx.correct(a).map(|_| ()),
        Command::Predict(a) => ctx.predict(a),
        Command::Sweep(a) => ctx.sweep(a),
        Command::SplitEval(a) => ctx.split_eval(a),
        Command::Bench(a) => ctx.bench(a),
    }
}

struct Ctx<'a> {
    cli: &'a Cli,
}

fn scenario_spec(a: &ScenarioArgs, seed: u64) -> Result<ScenarioSpec> {
    let base = ScenarioSpec::builtin(a.scenario)?;
    Ok(ScenarioSpec {
        m: a.m.unwrap_or(base.m),
        n_db: a.n_db.unwrap_or(base.n_db),
        n_new: a.n_new.unwrap_or(base.n_new),
        gamma_dispersion: a.gamma_dispersion.unwrap_or(base.gamma_dispersion),
        convention: match a.convention {
            Convention::Variance => SpreadConvention::Variance,
            Convention::Sd => SpreadConvention::StdDev,
        },
        overlap: if a.raise_overlap {
            OverlapPolicy::RaiseToFeasible
        } else {
            OverlapPolicy::Strict
        },
        seed,
        ..base
    })
}

fn train_options(a: &SurrogateArgs, seed: u64) -> TrainOptions {
    TrainOptions {
        num_sv: match a.num_sv {
            Some(k) => SurrogateCount::Fixed(k),
            None => SurrogateCount::Estimate(NumSvOptions {
                n_perm: a.n_perm,
                alpha: a.alpha,
                seed,
            }),
        },
        sva: SvaOptions {
            max_iter: a.max_iter,
            tol: a.tol,
        },
    }
}

fn classifier(a: &SurrogateArgs) -> NearestShrunkenCentroids {
    NearestShrunkenCentroids {
        shrinkage: a.shrinkage.map_or_else(Shrinkage::default, Shrinkage::Fixed),
        ..Default::default()
    }
}

fn pipeline(a: &SurrogateArgs) -> PipelineOptions {
    PipelineOptions {
        num_sv: NumSvOptions {
            n_perm: a.n_perm,
            alpha: a.alpha,
            seed: 0,
        },
        fixed_num_sv: a.num_sv,
        sva: SvaOptions {
            max_iter: a.max_iter,
            tol: a.tol,
        },
        classifier: classifier(a),
    }
}

fn methods(names: &[String]) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for name in names {
        let m: Method = name.trim().parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

fn load_dataset(expr: &Path, labels: &Path) -> Result<Dataset> {
    let x = read_matrix(expr, Delimiter::Auto)?;
    let pairs = read_labels(labels, Delimiter::Auto)?;
    let y = join_labels(x.sample_ids(), &pairs)?;
    Ok(Dataset::new(x, OutcomeLabels::from_labels(&y)?, None)?)
}

fn print_report(report: &AccuracyReport) {
    print!("{}", report.summary_table());
    let improvements = report.improvement_table();
    for line in improvements.lines().skip(1) {
        println!("{line}");
    }
}

impl Ctx<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.cli.out_dir.join(name)
    }

    fn data_file(&self, stem: &str) -> PathBuf {
        self.path(&format!("{stem}.{}", self.cli.format.extension()))
    }

    fn delimiter(&self) -> Delimiter {
        self.cli.format.delimiter()
    }

    fn simulate(&self, a: &SimulateArgs) -> Result<()> {
        let spec = ScenarioSpec {
            confounding_rho: a.rho,
            ..scenario_spec(&a.scenario, self.cli.seed)?
        };
        let study = simulate_study(&spec)?;
        let d = self.delimiter();
        let database = self.data_file("database");
        let new_samples = self.data_file("new_samples");
        let labels = self.data_file("labels");
        let batch = self.data_file("batch");
        write_matrix(&database, &study.database.expr, d)?;
        write_matrix(&new_samples, &study.new_samples.expr, d)?;

        let all_ids: Vec<String> = [&study.database, &study.new_samples]
            .iter()
            .flat_map(|s| s.expr.sample_ids().iter().cloned())
            .collect();
        let all_labels: Vec<String> = [&study.database, &study.new_samples]
            .iter()
            .flat_map(|s| s.outcomes.labels().iter().cloned())
            .collect();
        let all_batch: Vec<String> = [&study.database, &study.new_samples]
            .iter()
            .flat_map(|s| s.batch.clone().unwrap_or_default())
            .collect();
        write_labels(&labels, "outcome", &all_ids, &all_labels, d)?;
        write_labels(&batch, "batch", &all_ids, &all_batch, d)?;

        let t = &study.truth;
        let features = study.database.expr.feature_ids();
        let pick = |mask: &[bool]| -> Vec<&String> {
            features.iter().zip(mask).filter(|(_, &on)| on).map(|(f, _)| f).collect()
        };
        let name = |p: &Path| p.file_name().map(|f| f.to_string_lossy().into_owned());
        let manifest = json!({
            "seed": self.cli.seed,
            "scenario": a.scenario.scenario,
            "spec": spec,
            "database_correlation": t.database_correlation,
            "new_correlation": t.new_correlation,
            "overlap_count": t.overlap_count,
            "batch_affected": pick(&t.batch_mask),
            "outcome_affected": pick(&t.outcome_mask),
            "files": {
                "database": name(&database),
                "new_samples": name(&new_samples),
                "labels": name(&labels),
                "batch": name(&batch),
            },
        });
        let manifest_path = self.path("manifest.json");
        fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")
            .with_context(|| format!("writing {}", manifest_path.display()))?;
        println!(
            "simulated {} features, {} database and {} new samples (database correlation {:.3}) in {}",
            spec.m,
            spec.n_db,
            spec.n_new,
            t.database_correlation,
            self.cli.out_dir.display()
        );
        Ok(())
    }

    fn train(&self, a: &TrainArgs) -> Result<()> {
        let data = load_dataset(&a.expr, &a.labels)?;
        let design = encode_design(&data.outcomes)?;
        let trained = train(&data.expr, &design, &train_options(&a.surrogates, self.cli.seed))?;
        let model = classifier(&a.surrogates).train(&trained.cleaned, &data.outcomes, self.cli.seed)?;
        trained.frozen.save(self.path(MODEL_FILE))?;
        model.save(self.path(CLASSIFIER_FILE))?;
        write_matrix(self.data_file("cleaned_database"), &trained.cleaned, self.delimiter())?;

        let conv = &trained.fit.convergence;
        let mut summary = String::new();
        summary.push_str(&format!("features\t{}\n", data.expr.n_features()));
        summary.push_str(&format!("samples\t{}\n", data.expr.n_samples()));
        summary.push_str(&format!("num_sv\t{}\n", trained.frozen.num_sv()));
        if let Some(est) = &trained.estimate {
            summary.push_str(&format!("num_sv_seed\t{}\n", est.seed));
        }
        summary.push_str(&format!("iterations\t{}\n", conv.iterations));
        summary.push_str(&format!("converged\t{}\n", conv.converged));
        summary.push_str(&format!("shrinkage\t{}\n", model.shrinkage()));
        summary.push_str(&format!("active_features\t{}\n", model.active_features()));
        fs::write(self.path("train_summary.tsv"), &summary)?;
        print!("{summary}");
        Ok(())
    }

    fn correct(&self, a: &CorrectArgs) -> Result<(ExpressionMatrix, FrozenModel)> {
        let model = FrozenModel::load(&a.model)?;
        let raw = read_matrix(&a.expr, Delimiter::Auto)?;
        let (aligned, dropped) = align_features(model.feature_ids(), &raw)?;
        if dropped > 0 {
            eprintln!("note: ignored {dropped} feature(s) not in the model");
        }
        let method = match a.method {
            MethodArg::Exact => CorrectionMethod::Exact,
            MethodArg::Fast => CorrectionMethod::Fast,
        };
        let result = fsva_correct(&model, &aligned, method)?;
        write_matrix(self.data_file("corrected"), &result.cleaned, self.delimiter())?;
        fs::write(self.path("correction_diagnostics.tsv"), result.diagnostics_report())?;
        println!(
            "corrected {} sample(s) with {} fSVA ({} surrogate(s))",
            result.cleaned.n_samples(),
            method.name(),
            model.num_sv()
        );
        Ok((result.cleaned, model))
    }

    fn predict(&self, a: &PredictArgs) -> Result<()> {
        let (cleaned, _) = self.correct(&a.correct)?;
        let nsc = NscModel::load(&a.classifier)?;
        let prediction = nsc_predict(&nsc, &cleaned)?;
        write_labels(
            self.data_file("predictions"),
            "predicted",
            cleaned.sample_ids(),
            &prediction.labels,
            self.delimiter(),
        )?;
        if let Some(path) = &a.labels {
            let pairs = read_labels(path, Delimiter::Auto)?;
            let truth = join_labels(cleaned.sample_ids(), &pairs)?;
            println!("accuracy\t{:.6}", prediction.accuracy(&truth));
        } else {
            println!("predicted {} sample(s)", prediction.labels.len());
        }
        Ok(())
    }

    fn experiment(&self, scenario: ScenarioSpec, rho: Vec<f64>, eval: &EvalArgs) -> Result<ExperimentConfig> {
        if eval.iterations == 0 {
            bail!("--iterations must be at least 1");
        }
        Ok(ExperimentConfig {
            methods: methods(&eval.methods)?,
            n_iterations: eval.iterations,
            rho_grid: rho,
            scenario,
            split_fraction: 0.5,
            seed: self.cli.seed,
            pipeline: pipeline(&eval.surrogates),
        })
    }

    fn sweep(&self, a: &SweepArgs) -> Result<()> {
        let mut scenario = scenario_spec(&a.scenario, 0)?;
        if a.scenario.m.is_none() && !a.full_scale {
            scenario = scenario.desk_scale();
        }
        let mut config = self.experiment(scenario, a.rho.clone(), &a.eval)?;
        if a.full_scale && a.eval.iterations == 25 {
            config.n_iterations = 100;
        }
        let report = run_simulation_sweep(&config)?;
        report.write_to_dir(&self.cli.out_dir)?;
        print_report(&report);
        Ok(())
    }

    fn split_eval(&self, a: &SplitEvalArgs) -> Result<()> {
        let data = load_dataset(&a.expr, &a.labels)?;
        let placeholder = ScenarioSpec {
            m: data.expr.n_features(),
            n_db: 0,
            n_new: 0,
            ..ScenarioSpec::builtin(1)?
        };
        let mut config = self.experiment(placeholder, Vec::new(), &a.eval)?;
        config.split_fraction = a.fraction;
        let report = run_split_study(&data, &config)?;
        report.write_to_dir(&self.cli.out_dir)?;
        print_report(&report);
        Ok(())
    }

    fn bench(&self, a: &BenchArgs) -> Result<()> {
        let spec = scenario_spec(&a.scenario, self.cli.seed)?;
        let study = simulate_study(&spec)?;
        let design = encode_design(&study.database.outcomes)?;
        let options = TrainOptions {
            num_sv: SurrogateCount::Fixed(a.num_sv),
            ..Default::default()
        };
        let trained = train(&study.database.expr, &design, &options)?;
        let cmp = compare_variants(&trained.frozen, &study.new_samples.expr)?;
        let report = format!(
            "# seed={} m={} n_db={} n_new={} threads={}\n{}",
            self.cli.seed,
            spec.m,
            spec.n_db,
            spec.n_new,
            rayon::current_num_threads(),
            cmp.report()
        );
        fs::write(self.path("bench.tsv"), &report)?;
        print!("{report}");
        Ok(())
    }
}
