//! Acceptance run: one line per criterion, nonzero exit if any fails.
//!
//! Runs as a plain binary (`harness = false`) so every verdict is printed
//! even when all pass.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng as _;

use fsva::classifier::{nsc_predict, nsc_train, NscModel};
use fsva::correct::{fsva_exact, fsva_fast};
use fsva::harness::{run_simulation_sweep, ExperimentConfig, Method, PipelineOptions};
use fsva::simulate::{simulate_study, ScenarioSpec};
use fsva::stats::{paired_t_test_greater, pearson};
use fsva::sva::{
    clean_training, freeze, sva_fit, train, weighted_svd, FrozenModel, NumSvOptions, SurrogateCount,
    SvaOptions, TrainOptions,
};
use fsva::{encode_design, ExpressionMatrix, OutcomeLabels, Persist};

use common::{bitwise_equal, jacobi_svd, normal_matrix, scenario1, seeded, uniform_weights};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

type Check = fn() -> Result<Verdict, fsva::Error>;

fn trained_database(spec: &ScenarioSpec, num_sv: SurrogateCount) -> Result<(fsva::Dataset, fsva::TrainedSva, fsva::Dataset), fsva::Error> {
    let study = simulate_study(spec)?;
    let design = encode_design(&study.database.outcomes)?;
    let trained = train(
        &study.database.expr,
        &design,
        &TrainOptions {
            num_sv,
            sva: SvaOptions::default(),
        },
    )?;
    Ok((study.database, trained, study.new_samples))
}

fn fold_in_identity() -> Result<Verdict, fsva::Error> {
    let spec = scenario1(1000, 100, 10, 0.3, 101);
    let (db, trained, _) = trained_database(&spec, SurrogateCount::Estimate(NumSvOptions { seed: 5, ..Default::default() }))?;
    let frozen = &trained.frozen;
    let started = Instant::now();
    let folded = fsva_fast(frozen, &db.expr)?;
    let elapsed = started.elapsed().as_secs_f64();
    let reference = frozen.training_surrogates();
    let dev = (&folded.new_surrogates - &reference).abs().max();
    Ok(verdict(
        frozen.num_sv() >= 1 && dev <= 1e-8 && elapsed < 1.0,
        format!("p2={} max|dev|={dev:.2e} (<=1e-8), {elapsed:.3}s (<1s)", frozen.num_sv()),
    ))
}

fn weighted_svd_contract() -> Result<Verdict, fsva::Error> {
    let mut rng = seeded(202);
    let (mut worst_orth, mut worst_rec, mut worst_sv) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let n = rng.random_range(2..=100);
        let m = rng.random_range(n..=200);
        let x = normal_matrix(m, n, &mut rng);
        let w = uniform_weights(m, &mut rng);
        let expr = ExpressionMatrix::from_values(x.clone())?;
        let svd = weighted_svd(&expr, &w, n)?;
        let u = &svd.left_vectors;
        let v = &svd.right_vectors;
        let orth = (u.tr_mul(u) - DMatrix::identity(n, n))
            .abs()
            .max()
            .max((v.tr_mul(v) - DMatrix::identity(n, n)).abs().max());
        let wx = DMatrix::from_fn(m, n, |i, j| w[i] * x[(i, j)]);
        let rec = (svd.reconstruct() - &wx).norm() / wx.norm();
        let (_, d_oracle, _) = jacobi_svd(&wx);
        let sv = svd
            .singular_values
            .iter()
            .zip(&d_oracle)
            .map(|(a, b)| (a - b).abs() / d_oracle[0])
            .fold(0.0, f64::max);
        worst_orth = worst_orth.max(orth);
        worst_rec = worst_rec.max(rec);
        worst_sv = worst_sv.max(sv);
    }
    Ok(verdict(
        worst_orth <= 1e-8 && worst_rec <= 1e-6 && worst_sv <= 1e-8,
        format!(
            "100 matrices: orthonormality {worst_orth:.1e} (<=1e-8), reconstruction {worst_rec:.1e} (<=1e-6), \
             singular values vs Jacobi oracle {worst_sv:.1e} (<=1e-8)"
        ),
    ))
}

fn surrogate_recovery() -> Result<Verdict, fsva::Error> {
    let started = Instant::now();
    let mut hits = 0;
    for rep in 0..50u64 {
        let spec = scenario1(1000, 100, 2, 0.0, 300 + rep);
        let study = simulate_study(&spec)?;
        let design = encode_design(&study.database.outcomes)?;
        let fit = sva_fit(&study.database.expr, &design, 1, &SvaOptions::default())?;
        let g: Vec<f64> = fit.surrogates.row(0).iter().copied().collect();
        let r = pearson(&g, study.truth.database_batch.as_slice()).abs();
        if r > 0.9 {
            hits += 1;
        }
    }
    let secs = started.elapsed().as_secs_f64();
    Ok(verdict(
        hits >= 45 && secs < 60.0,
        format!("{hits}/50 replicates with |corr| > 0.9 (>=45), {secs:.1}s (<60s)"),
    ))
}

fn sweep_config(rho_grid: Vec<f64>, seed: u64) -> ExperimentConfig {
    ExperimentConfig::desk_scale(scenario1(1000, 100, 100, 0.0, 0), rho_grid, seed)
}

fn simulation_benefit() -> Result<Verdict, fsva::Error> {
    let report = run_simulation_sweep(&sweep_config(vec![0.6], 404))?;
    let (exact, none) = report.paired(Method::FsvaExact, Method::None, Some(0.6));
    let p = paired_t_test_greater(&exact, &none);
    let mean = |m| report.summary(m, Some(0.6)).map(|s| s.mean_accuracy).unwrap_or(f64::NAN);
    Ok(verdict(
        exact.len() == 25 && p < 0.05 && mean(Method::FsvaExact) > mean(Method::None),
        format!(
            "rho=0.6, {} paired iterations: none {:.3}, sva_db_only {:.3}, fsva_exact {:.3}, fsva_fast {:.3}; \
             paired one-sided p={p:.2e} (<0.05)",
            exact.len(),
            mean(Method::None),
            mean(Method::SvaDbOnly),
            mean(Method::FsvaExact),
            mean(Method::FsvaFast)
        ),
    ))
}

fn confounding_drop_off() -> Result<Verdict, fsva::Error> {
    let config = ExperimentConfig {
        methods: vec![Method::None, Method::FsvaExact],
        ..sweep_config(vec![0.6, 0.9], 505)
    };
    let report = run_simulation_sweep(&config)?;
    let at = |rho| report.improvement_series(Method::FsvaExact, Some(rho));
    let by_iter = |rho: f64| {
        let a = report.accuracy_by_iteration(Method::FsvaExact, Some(rho));
        let b = report.accuracy_by_iteration(Method::None, Some(rho));
        a.into_iter()
            .filter_map(|(it, x)| Some((it, x? - (*b.get(&it)?)?)))
            .collect::<std::collections::BTreeMap<_, _>>()
    };
    let (mid, high) = (by_iter(0.6), by_iter(0.9));
    let paired: Vec<(f64, f64)> = mid
        .iter()
        .filter_map(|(it, a)| Some((*a, *high.get(it)?)))
        .collect();
    let smaller = paired.iter().filter(|(a, b)| b < a).count();
    let frac = smaller as f64 / 25.0;
    let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len().max(1) as f64;
    Ok(verdict(
        frac >= 0.7,
        format!(
            "improvement smaller at rho=0.9 in {smaller}/25 replicates ({:.0}%, >=70%); mean improvement {:.3} at 0.6, {:.3} at 0.9",
            frac * 100.0,
            mean(at(0.6)),
            mean(at(0.9))
        ),
    ))
}

fn speed_ratio() -> Result<Verdict, fsva::Error> {
    let started = Instant::now();
    let spec = scenario1(10_000, 100, 100, 0.0, 606);
    let (_, trained, new) = trained_database(&spec, SurrogateCount::Fixed(1))?;
    let exact = fsva_exact(&trained.frozen, &new.expr)?;
    let fast = fsva_fast(&trained.frozen, &new.expr)?;
    let te = exact.diagnostics.elapsed.as_secs_f64();
    let tf = fast.diagnostics.elapsed.as_secs_f64();
    let ratio = te / tf.max(1e-9);
    let total = started.elapsed().as_secs_f64();
    Ok(verdict(
        ratio >= 10.0 && total <= 600.0,
        format!(
            "m=10000, 100 new samples: exact {te:.3}s, fast {:.2}ms, ratio {ratio:.0}x (>=10x), total {total:.1}s (<=600s)",
            tf * 1e3
        ),
    ))
}

fn null_benefit() -> Result<Verdict, fsva::Error> {
    let scenario = ScenarioSpec {
        gamma_dispersion: 0.0,
        ..scenario1(1000, 100, 100, 0.0, 0)
    };
    let config = ExperimentConfig {
        methods: vec![Method::None, Method::FsvaExact],
        ..ExperimentConfig::desk_scale(scenario, vec![0.0], 707)
    };
    let report = run_simulation_sweep(&config)?;
    let imp = report
        .improvement(Method::FsvaExact, Some(0.0))
        .expect("improvement row");
    Ok(verdict(
        imp.ci.low <= 0.0 && 0.0 <= imp.ci.high && imp.n_paired == 25,
        format!(
            "no batch effect, {} iterations: improvement {:.4}, 95% CI [{:.4}, {:.4}] contains 0",
            imp.n_paired, imp.mean, imp.ci.low, imp.ci.high
        ),
    ))
}

fn random_frozen(seed: u64) -> Result<FrozenModel, fsva::Error> {
    let mut rng = seeded(seed);
    let m = rng.random_range(20..60);
    let n = 2 * rng.random_range(6..15);
    let spec = ScenarioSpec {
        confounding_rho: rng.random_range(0.0..0.9),
        ..scenario1(m, n, 2, 0.0, seed)
    };
    let k = rng.random_range(0..3);
    Ok(trained_database(&spec, SurrogateCount::Fixed(k))?.1.frozen)
}

fn random_nsc(seed: u64) -> Result<NscModel, fsva::Error> {
    let mut rng = seeded(seed);
    let m = rng.random_range(5..40);
    let k = rng.random_range(2..5);
    let n = k * rng.random_range(3..8);
    let x = normal_matrix(m, n, &mut rng);
    let labels: Vec<String> = (0..n).map(|j| format!("c{}", j % k)).collect();
    let delta = [0.0, 0.3, 1.0, 2.5, f64::INFINITY][rng.random_range(0..5)];
    nsc_train(&ExpressionMatrix::from_values(x)?, &OutcomeLabels::from_labels(&labels)?, delta)
}

fn determinism_and_persistence() -> Result<Verdict, fsva::Error> {
    let config = ExperimentConfig {
        n_iterations: 4,
        scenario: scenario1(300, 40, 40, 0.0, 0),
        pipeline: PipelineOptions {
            num_sv: NumSvOptions { n_perm: 10, ..Default::default() },
            ..Default::default()
        },
        ..sweep_config(vec![0.0, 0.6], 808)
    };
    let a = run_simulation_sweep(&config)?;
    let b = run_simulation_sweep(&config)?;
    let reports_equal = a.summary_table() == b.summary_table()
        && a.iterations_table() == b.iterations_table()
        && a.improvement_table() == b.improvement_table();

    let mut round_trips = 0;
    for i in 0..100u64 {
        let frozen = random_frozen(900 + i)?;
        let text = frozen.to_json()?;
        let back = FrozenModel::from_json(&text)?;
        let nsc = random_nsc(2000 + i)?;
        let ntext = nsc.to_json()?;
        let nback = NscModel::from_json(&ntext)?;
        if back == frozen && back.to_json()? == text && nback == nsc && nback.to_json()? == ntext {
            round_trips += 1;
        }
    }
    Ok(verdict(
        reports_equal && round_trips == 100,
        format!("reports byte-identical: {reports_equal}; {round_trips}/100 model round trips value-identical"),
    ))
}

fn identity_degeneracies() -> Result<Verdict, fsva::Error> {
    let mut ok = true;
    for seed in 0..5u64 {
        let spec = scenario1(200, 30, 12, 0.5, 1100 + seed);
        let study = simulate_study(&spec)?;
        let design = encode_design(&study.database.outcomes)?;
        let fit = sva_fit(&study.database.expr, &design, 0, &SvaOptions::default())?;
        let cleaned = clean_training(&study.database.expr, &fit)?;
        let frozen = freeze(&fit, &study.database.expr)?;
        let exact = fsva_exact(&frozen, &study.new_samples.expr)?;
        let fast = fsva_fast(&frozen, &study.new_samples.expr)?;
        ok &= cleaned == study.database.expr && bitwise_equal(cleaned.values(), study.database.expr.values());
        for out in [&exact.cleaned, &fast.cleaned] {
            ok &= *out == study.new_samples.expr && bitwise_equal(out.values(), study.new_samples.expr.values());
        }
    }
    Ok(verdict(ok, "p2=0: clean_training, fsva_exact, fsva_fast bitwise pass-through on 5 studies"))
}

fn classifier_oracle() -> Result<Verdict, fsva::Error> {
    let mut agree = 0;
    let mut total = 0;
    for inst in 0..20u64 {
        let mut rng = seeded(1200 + inst);
        let m = rng.random_range(3..15);
        let k = rng.random_range(2..5);
        let counts: Vec<usize> = (0..k).map(|_| rng.random_range(2..7)).collect();
        let n: usize = counts.iter().sum();
        let codes: Vec<usize> = counts.iter().enumerate().flat_map(|(c, &cnt)| std::iter::repeat_n(c, cnt)).collect();
        let mut x = normal_matrix(m, n, &mut rng);
        for (j, &c) in codes.iter().enumerate() {
            for i in 0..m {
                x[(i, j)] += c as f64 * 0.7 * ((i % 3) as f64 - 1.0);
            }
        }
        let labels: Vec<String> = codes.iter().map(|c| format!("k{c}")).collect();
        let expr = ExpressionMatrix::from_values(x.clone())?;
        let model = nsc_train(&expr, &OutcomeLabels::from_labels(&labels)?, 0.0)?;
        let test = normal_matrix(m, 15, &mut rng) * 1.5;
        let predicted = nsc_predict(&model, &ExpressionMatrix::from_values(test.clone())?)?.labels;

        // Brute force: class means, pooled sd plus its median, priors.
        let mut means = vec![vec![0.0; m]; k];
        for (j, &c) in codes.iter().enumerate() {
            for i in 0..m {
                means[c][i] += x[(i, j)] / counts[c] as f64;
            }
        }
        let mut sd: Vec<f64> = (0..m)
            .map(|i| {
                let ss: f64 = codes.iter().enumerate().map(|(j, &c)| (x[(i, j)] - means[c][i]).powi(2)).sum();
                (ss / (n - k) as f64).sqrt()
            })
            .collect();
        let mut sorted = sd.clone();
        sorted.sort_by(f64::total_cmp);
        let s0 = if m % 2 == 1 { sorted[m / 2] } else { (sorted[m / 2 - 1] + sorted[m / 2]) / 2.0 };
        sd.iter_mut().for_each(|s| *s += s0);
        for j in 0..test.ncols() {
            let mut best = (f64::INFINITY, 0);
            for c in 0..k {
                let dist: f64 = (0..m).map(|i| ((test[(i, j)] - means[c][i]) / sd[i]).powi(2)).sum::<f64>()
                    - 2.0 * (counts[c] as f64 / n as f64).ln();
                if dist < best.0 {
                    best = (dist, c);
                }
            }
            total += 1;
            if predicted[j] == format!("k{}", best.1) {
                agree += 1;
            }
        }
    }
    Ok(verdict(
        agree == total,
        format!("20 instances: {agree}/{total} predictions match brute-force nearest centroid"),
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 10] = [
        ("fold-in identity", fold_in_identity),
        ("weighted SVD contract", weighted_svd_contract),
        ("surrogate recovery", surrogate_recovery),
        ("simulation benefit", simulation_benefit),
        ("confounding drop-off", confounding_drop_off),
        ("speed ratio", speed_ratio),
        ("null benefit", null_benefit),
        ("determinism and persistence", determinism_and_persistence),
        ("identity degeneracies", identity_degeneracies),
        ("classifier oracle", classifier_oracle),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let number = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || *f == number.to_string()) {
            continue;
        }
        let started = Instant::now();
        let v = check().unwrap_or_else(|e| verdict(false, format!("error: {e}")));
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {number:>2} [{tag}] {name}: {} ({:.1}s)",
            v.detail,
            started.elapsed().as_secs_f64()
        );
        if !v.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
