//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use binuq_core::baselines::{miscoverage_grid, ConformalModel};
use binuq_core::buee::{fit_binned_adapter, fit_ensemble, mixture, BinnedAdapterModel, EnsembleSpec};
use binuq_core::classifiers::{
    ClassifierKind, ClassifierSpec, HyperValue, Hyperparams, RandomForestParams, RandomForestRegressor,
};
use binuq_core::geostats::{fit_variogram, EmpiricalVariogram, Lag, OrdinaryKriging, Variogram, VariogramFamily};
use binuq_core::metrics::{crps_discrete, crps_from_quantiles, empirical_coverage};
use binuq_core::synth::{generate, NoiseModel, SynthSpec};
use binuq_core::validation::{nested_cv, CVPlan, CVReport, Forecast, HyperparameterGrid, MethodSpec};
use binuq_core::{
    assign_bins, BinStrategy, BinningConfig, Dataset, ProbabilisticPrediction, QuantileCurve, SeededRng,
};
use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(start: Instant, budget: Duration) -> Result<(), String> {
    let elapsed = start.elapsed();
    ensure(elapsed < budget, || format!("took {elapsed:.1?}, budget {budget:?}"))
}

fn random_simplex(gen: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| gen.random::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| v / total).collect()
}

fn random_distribution(gen: &mut ChaCha8Rng, scale: f64) -> ProbabilisticPrediction {
    let k = gen.random_range(1..=10);
    let mut support: Vec<f64> = (0..k).map(|_| scale * (gen.random::<f64>() - 0.5)).collect();
    support.sort_by(f64::total_cmp);
    support.dedup();
    let probs = random_simplex(gen, support.len());
    ProbabilisticPrediction::new(support, probs).unwrap()
}

fn small_forest() -> Hyperparams {
    let mut hp = Hyperparams::new();
    hp.insert("n_trees".into(), HyperValue::Int(20));
    hp
}

/// Adapter mean and spread against pairwise brute force:
/// `var = 1/2 sum_ij p_i p_j (m_i - m_j)^2`.
fn eq_oracle() -> Outcome {
    let start = Instant::now();
    let mut gen = SeededRng::new(101).generator();
    let x = Array2::<f64>::zeros((1, 1));
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let k = gen.random_range(2..=20);
        let lo = 50.0 * (gen.random::<f64>() - 0.5);
        let hi = lo + 0.1 + 20.0 * gen.random::<f64>();
        let bins = BinningConfig::new(BinStrategy::Uniform, k).unwrap().build(&[lo, hi]).unwrap();
        let external = ClassifierSpec::external()
            .fit(x.view(), &[1], bins.effective_k(), &SeededRng::new(0))
            .unwrap();
        let adapter = BinnedAdapterModel::new(bins, external).unwrap();
        let probs = random_simplex(&mut gen, k);
        let pred = adapter.distribution_from_proba(&probs).unwrap();

        let m = adapter.bins().midpoints();
        let mut mean = 0.0;
        let mut var = 0.0;
        for i in 0..k {
            mean += probs[i] * m[i];
            for j in 0..k {
                var += 0.5 * probs[i] * probs[j] * (m[i] - m[j]).powi(2);
            }
        }
        let scale = m.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let err_mean = (pred.mean() - mean).abs() / scale;
        let err_std = (pred.std() - var.sqrt()).abs() / scale;
        worst = worst.max(err_mean).max(err_std);
        ensure(err_mean <= 1e-12 && err_std <= 1e-12, || {
            format!("case {case}: mean {} vs {mean}, std {} vs {}", pred.mean(), pred.std(), var.sqrt())
        })?;
    }
    within_budget(start, Duration::from_secs(1))?;
    Ok(format!("1000 cases, worst scaled error {worst:.1e}, {:.0?}", start.elapsed()))
}

fn crps_checks() -> Outcome {
    let start = Instant::now();
    let mut gen = SeededRng::new(202).generator();
    let draws = 1_000_000;
    let mut worst: f64 = 0.0;
    for case in 0..50 {
        let p = random_distribution(&mut gen, 4.0);
        let y = 4.0 * (gen.random::<f64>() - 0.5);
        let cdf: Vec<f64> = p
            .probs()
            .iter()
            .scan(0.0, |acc, q| {
                *acc += q;
                Some(*acc)
            })
            .collect();
        let sample = |gen: &mut ChaCha8Rng| {
            let u: f64 = gen.random();
            let i = cdf.partition_point(|c| *c < u).min(cdf.len() - 1);
            p.support()[i]
        };
        let mut to_obs = 0.0;
        let mut pair = 0.0;
        for _ in 0..draws {
            let a = sample(&mut gen);
            let b = sample(&mut gen);
            to_obs += (a - y).abs();
            pair += (a - b).abs();
        }
        let mc = (to_obs - 0.5 * pair) / draws as f64;
        let exact = crps_discrete(&p, y);
        worst = worst.max((mc - exact).abs());
        ensure((mc - exact).abs() <= 1e-2, || format!("case {case}: exact {exact}, monte carlo {mc}"))?;

        let m = p.support()[0];
        let point = ProbabilisticPrediction::point_mass(m);
        ensure(crps_discrete(&point, y) == (m - y).abs(), || format!("point mass at {m}, y {y}"))?;

        let c = 10.0 * (gen.random::<f64>() - 0.5);
        let lambda = 0.1 + 5.0 * gen.random::<f64>();
        let shifted = ProbabilisticPrediction::new(p.support().iter().map(|v| v + c).collect(), p.probs().to_vec())
            .unwrap();
        let scaled = ProbabilisticPrediction::new(p.support().iter().map(|v| v * lambda).collect(), p.probs().to_vec())
            .unwrap();
        let d_shift = (crps_discrete(&shifted, y + c) - exact).abs();
        let d_scale = (crps_discrete(&scaled, y * lambda) - lambda * exact).abs();
        ensure(d_shift <= 1e-12, || format!("case {case}: translation error {d_shift:e}"))?;
        ensure(d_scale <= 1e-12, || format!("case {case}: scaling error {d_scale:e}"))?;
    }
    within_budget(start, Duration::from_secs(30))?;
    Ok(format!("50 cases, worst Monte Carlo gap {worst:.1e}, {:.1?}", start.elapsed()))
}

fn ensemble_identity() -> Outcome {
    let data = generate(&SynthSpec {
        n: 150,
        d: 2,
        noise: NoiseModel::Heteroscedastic,
        spatial: false,
        seed: 3,
    })
    .unwrap();
    let spec = ClassifierSpec::new(ClassifierKind::RandomForest, small_forest()).unwrap();
    let config = BinningConfig::new(BinStrategy::Quantile, 10).unwrap();
    let ensemble = fit_ensemble(&data, &EnsembleSpec::single(config), &spec, &SeededRng::new(5)).unwrap();
    let member = &ensemble.members()[0];
    let mut gen = SeededRng::new(303).generator();
    for case in 0..100 {
        let x = Array1::from_shape_fn(2, |_| gen.random::<f64>());
        let a = ensemble.predict_ensemble(x.view()).unwrap();
        let b = member.predict_distribution(x.view()).unwrap();
        let same = a.support() == b.support()
            && a.probs() == b.probs()
            && a.mean().to_bits() == b.mean().to_bits()
            && a.std().to_bits() == b.std().to_bits();
        ensure(same, || format!("case {case}: {a:?} vs {b:?}"))?;
    }

    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let b = gen.random_range(1..=8);
        let parts: Vec<ProbabilisticPrediction> = (0..b).map(|_| random_distribution(&mut gen, 20.0)).collect();
        let w = random_simplex(&mut gen, b);
        let mix = mixture(&w, &parts);
        let mu: f64 = w.iter().zip(&parts).map(|(wb, p)| wb * p.mean()).sum();
        let total_var: f64 = w
            .iter()
            .zip(&parts)
            .map(|(wb, p)| wb * (p.variance() + (p.mean() - mu).powi(2)))
            .sum();
        let scale = total_var.max(1.0);
        let err = (mix.variance() - total_var).abs() / scale;
        worst = worst.max(err);
        ensure(err <= 1e-12, || format!("case {case}: variance {} vs {total_var}", mix.variance()))?;
        ensure((mix.mean() - mu).abs() <= 1e-12 * mu.abs().max(1.0), || format!("case {case}: mean"))?;
    }
    Ok(format!("100 bit-equal B=1 predictions, mixture variance worst {worst:.1e}"))
}

fn binning_checks() -> Outcome {
    let mut gen = SeededRng::new(404).generator();
    for case in 0..200 {
        let lo = 100.0 * (gen.random::<f64>() - 0.5);
        let hi = lo + 1e-3 + 50.0 * gen.random::<f64>();
        let k = gen.random_range(2..=30);
        let bins = BinningConfig::new(BinStrategy::Uniform, k).unwrap().build(&[lo, hi]).unwrap();
        let e = bins.edges();
        let delta = (hi - lo) / k as f64;
        for w in e.windows(2) {
            let rel = ((w[1] - w[0]) - delta).abs() / delta;
            ensure(rel <= 1e-12, || format!("case {case}: width {} vs {delta}", w[1] - w[0]))?;
        }
    }

    let mut values: Vec<f64> = (0..1000).map(|i| i as f64 + 0.5 * gen.random::<f64>()).collect();
    values.shuffle(&mut gen);
    let mut spreads = Vec::new();
    for k in [5, 10, 20] {
        let bins = BinningConfig::new(BinStrategy::Quantile, k).unwrap().build(&values).unwrap();
        let labels = assign_bins(&values, &bins);
        let mut counts = vec![0usize; bins.effective_k()];
        labels.iter().for_each(|l| counts[l - 1] += 1);
        let spread = counts.iter().max().unwrap() - counts.iter().min().unwrap();
        ensure(bins.effective_k() == k && spread <= 1, || format!("k={k}: occupancy {counts:?}"))?;
        spreads.push(spread);
    }

    for case in 0..200 {
        let n = gen.random_range(10..200);
        let mut ys: Vec<f64> = (0..n).map(|_| 10.0 * gen.random::<f64>()).collect();
        let strategy = if case % 2 == 0 { BinStrategy::Uniform } else { BinStrategy::Quantile };
        let bins = BinningConfig::new(strategy, gen.random_range(2..=8)).unwrap().build(&ys).unwrap();
        ys.sort_by(f64::total_cmp);
        let labels = assign_bins(&ys, &bins);
        ensure(labels.windows(2).all(|w| w[0] <= w[1]), || format!("case {case}: labels not monotone"))?;
    }
    Ok(format!("uniform widths exact, occupancy spread {spreads:?}, monotone on 200 sorted samples"))
}

fn conformal_validity() -> Outcome {
    let start = Instant::now();
    let params = RandomForestParams {
        n_trees: 50,
        ..RandomForestParams::default()
    };
    let mut total = 0.0;
    let trials = 200;
    for t in 0..trials {
        let draw = |n: usize, seed: u64| {
            generate(&SynthSpec {
                n,
                d: 2,
                noise: NoiseModel::Homoscedastic { sigma: 1.0 },
                spatial: false,
                seed,
            })
            .unwrap()
        };
        let seed = 10_000 + 3 * t as u64;
        let train = draw(100, seed);
        let calib = draw(100, seed + 1);
        let test = draw(100, seed + 2);
        let base = RandomForestRegressor::fit(
            train.features(),
            train.target().as_slice().unwrap(),
            &params,
            &SeededRng::new(seed),
        )
        .unwrap();
        let model = ConformalModel::calibrate(base, calib.features(), calib.target(), &miscoverage_grid()).unwrap();
        let curves = model.predict_batch(test.features()).unwrap();
        total += empirical_coverage(&curves, test.target().as_slice().unwrap(), 0.05, 0.95).unwrap();
    }
    let mean = total / trials as f64;
    ensure((0.88..=0.94).contains(&mean), || format!("mean coverage {mean:.4}"))?;
    within_budget(start, Duration::from_secs(120))?;
    Ok(format!("mean 90% coverage {mean:.4} over {trials} trials, {:.1?}", start.elapsed()))
}

fn disjoint(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|i| b.binary_search(i).is_err())
}

fn hygiene(report: &CVReport, n: usize) -> Result<usize, String> {
    let mut seen = vec![0usize; n];
    let mut cells = 0;
    for fold in &report.folds {
        fold.test.iter().for_each(|&i| seen[i] += 1);
        for c in &fold.cells {
            cells += 1;
            let ctx = || format!("cell ({}, {})", c.outer, c.inner);
            ensure(disjoint(&c.train, &c.validation), || format!("{}: train/validation overlap", ctx()))?;
            ensure(disjoint(&c.calibration, &c.train), || format!("{}: train/calibration overlap", ctx()))?;
            ensure(disjoint(&c.calibration, &c.validation), || format!("{}: calibration/validation overlap", ctx()))?;
            for set in [&c.train, &c.validation, &c.calibration] {
                ensure(disjoint(set, &fold.test), || format!("{}: test index in an inner set", ctx()))?;
            }
        }
    }
    ensure(seen.iter().all(|&s| s == 1), || "outer test folds do not partition the data".into())?;
    Ok(cells)
}

fn cv_hygiene() -> Outcome {
    let data = generate(&SynthSpec {
        n: 100,
        d: 2,
        noise: NoiseModel::Heteroscedastic,
        spatial: false,
        seed: 6,
    })
    .unwrap();
    let grid = HyperparameterGrid::single(small_forest());
    let methods = [
        MethodSpec::conformal(grid.clone()),
        MethodSpec::buee(ClassifierKind::RandomForest, grid),
    ];
    let mut cells = Vec::new();
    for method in &methods {
        let plan = CVPlan::new(5, 5, 7).for_method(method);
        let first = nested_cv(&data, method, &plan).map_err(|e| e.to_string())?;
        cells.push(hygiene(&first, data.len())?);
        let second = nested_cv(&data, method, &plan).map_err(|e| e.to_string())?;
        let a = serde_json::to_vec(&first).unwrap();
        let b = serde_json::to_vec(&second).unwrap();
        ensure(a == b, || format!("{}: repeated runs differ", method.kind.tag()))?;
    }
    Ok(format!("conformal and BUEE: {cells:?} cells disjoint, partition exact, reruns byte-identical"))
}

fn kriging_checks() -> Outcome {
    let mut gen = SeededRng::new(707).generator();
    let n = 40;
    let coords = Array2::from_shape_fn((n, 2), |_| 100.0 * gen.random::<f64>());
    let values = Array1::from_shape_fn(n, |i| 0.05 * coords[[i, 0]] + gen.random::<f64>());
    let vg = Variogram::new(VariogramFamily::Spherical, 0.0, 1.0, 40.0).unwrap();
    let ok = OrdinaryKriging::new(coords.view(), values.view(), vg, 32).map_err(|e| e.to_string())?;
    let mut worst_exact: f64 = 0.0;
    for i in 0..n {
        let p = ok.predict(coords[[i, 0]], coords[[i, 1]]).map_err(|e| e.to_string())?;
        worst_exact = worst_exact.max((p.prediction - values[i]).abs());
    }
    ensure(worst_exact <= 1e-8, || format!("exactness error {worst_exact:e}"))?;

    let mut worst_sum: f64 = 0.0;
    for r in 0..50 {
        for c in 0..50 {
            let p = ok.predict(1.0 + 2.0 * c as f64, 1.0 + 2.0 * r as f64).map_err(|e| e.to_string())?;
            worst_sum = worst_sum.max((p.weights.iter().map(|w| w.1).sum::<f64>() - 1.0).abs());
        }
    }
    ensure(worst_sum <= 1e-8, || format!("weight sum error {worst_sum:e}"))?;

    let two = Array2::from_shape_vec((2, 2), vec![0.0, 0.0, 10.0, 0.0]).unwrap();
    let nugget = Variogram::new(VariogramFamily::Spherical, 1.0, 0.0, 5.0).unwrap();
    let ok2 = OrdinaryKriging::new(two.view(), Array1::from(vec![2.0, 4.0]).view(), nugget, 32)
        .map_err(|e| e.to_string())?;
    let p = ok2.predict(4.0, -3.0).map_err(|e| e.to_string())?;
    ensure((p.prediction - 3.0).abs() <= 1e-8, || format!("pure nugget gives {}", p.prediction))?;
    Ok(format!(
        "exactness {worst_exact:.1e}, weight sums {worst_sum:.1e} over 2500 cells, pure nugget {:.12}",
        p.prediction
    ))
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Linear least-squares mean with a Gaussian of constant spread equal to the
/// training residual standard deviation, scored on the 19-level grid.
fn constant_spread_crps(data: &Dataset, train: &[usize], test: &[usize]) -> Vec<f64> {
    let d = data.n_features();
    let design = |i: usize| {
        let mut row = vec![1.0];
        row.extend(data.row(i).iter());
        row
    };
    let x = DMatrix::from_fn(train.len(), d + 1, |r, c| design(train[r])[c]);
    let y = DVector::from_fn(train.len(), |r, _| data.target()[train[r]]);
    let beta = x.clone().svd(true, true).solve(&y, 1e-12).unwrap();
    let resid = &y - &x * &beta;
    let sd = (resid.norm_squared() / (train.len() - d - 1) as f64).sqrt();
    let levels = binuq_core::baselines::standard_levels();
    let z: Vec<f64> = levels
        .iter()
        .map(|p| Normal::new(0.0, 1.0).unwrap().inverse_cdf(*p))
        .collect();
    test.iter()
        .map(|&i| {
            let mu: f64 = design(i).iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
            let curve = QuantileCurve::new(levels.clone(), z.iter().map(|q| mu + sd * q).collect()).unwrap();
            crps_from_quantiles(&curve, data.target()[i])
        })
        .collect()
}

fn desk_benchmark() -> Outcome {
    let start = Instant::now();
    let data = generate(&SynthSpec {
        n: 200,
        d: 2,
        noise: NoiseModel::Heteroscedastic,
        spatial: false,
        seed: 1,
    })
    .unwrap();
    let method = MethodSpec::buee(ClassifierKind::RandomForest, HyperparameterGrid::random_forest());
    let plan = CVPlan::new(5, 5, 1).for_method(&method);
    let report = nested_cv(&data, &method, &plan).map_err(|e| e.to_string())?;

    let mut baseline = Vec::new();
    for fold in &report.folds {
        baseline.extend(constant_spread_crps(&data, &fold.train, &fold.test));
    }
    let baseline_mean = baseline.iter().sum::<f64>() / baseline.len() as f64;

    let mut sigma = Vec::new();
    let mut truth = Vec::new();
    for p in &report.predictions {
        if let Forecast::Distribution(d) = &p.forecast {
            sigma.push(d.std());
            truth.push(0.1 + 0.9 * data.row(p.index)[0]);
        }
    }
    let r = pearson(&sigma, &truth);
    let summary = format!(
        "BUEE CRPS {:.4} vs constant-spread {:.4}, corr(sigma, true sd) {r:.3}, {:.1?}",
        report.mean_crps,
        baseline_mean,
        start.elapsed()
    );
    ensure(sigma.len() == data.len(), || "missing distribution forecasts".into())?;
    ensure(report.mean_crps < baseline_mean, || summary.clone())?;
    ensure(r > 0.2, || summary.clone())?;
    within_budget(start, Duration::from_secs(300))?;
    Ok(summary)
}

fn variogram_recovery() -> Outcome {
    let truth = Variogram::new(VariogramFamily::Spherical, 0.1, 0.9, 50.0).unwrap();
    let n_lags = 20;
    let max_dist = 100.0;
    let width = max_dist / n_lags as f64;
    let ev = EmpiricalVariogram {
        lags: (0..n_lags)
            .map(|b| {
                let center = (b as f64 + 0.5) * width;
                Lag {
                    center,
                    gamma: truth.gamma(center),
                    count: 30 + 5 * b,
                }
            })
            .collect(),
        sample_variance: truth.sill(),
        max_dist,
        duplicate_pairs: 0,
    };
    let fit = fit_variogram(&ev, VariogramFamily::Spherical).map_err(|e| e.to_string())?;
    let rel = |a: f64, b: f64| (a - b).abs() / b;
    let errs = [rel(fit.nugget, 0.1), rel(fit.sill(), 1.0), rel(fit.range, 50.0)];
    ensure(errs.iter().all(|e| *e < 0.05), || format!("fit {fit:?}"))?;
    Ok(format!(
        "nugget {:.4}, sill {:.4}, range {:.3} (max rel err {:.1e})",
        fit.nugget,
        fit.sill(),
        fit.range,
        errs.iter().cloned().fold(0.0, f64::max)
    ))
}

fn grid_counts() -> Outcome {
    let rf = HyperparameterGrid::random_forest().enumerate().len();
    let qr = HyperparameterGrid::quantile_regression().enumerate().len();
    ensure(rf == 108 && qr == 12, || format!("random forest {rf}, quantile regression {qr}"))?;
    Ok(format!("random forest {rf}, quantile regression {qr}"))
}

fn main() -> ExitCode {
    // make sure a forest adapter can be fit at all before timing anything
    let warmup = generate(&SynthSpec {
        n: 20,
        d: 1,
        noise: NoiseModel::Heteroscedastic,
        spatial: false,
        seed: 0,
    })
    .unwrap();
    fit_binned_adapter(
        &warmup,
        BinningConfig::new(BinStrategy::Uniform, 3).unwrap(),
        &ClassifierSpec::random_forest(),
        &SeededRng::new(0),
    )
    .expect("warm-up fit");

    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("adapter moments match brute-force oracle", eq_oracle),
        ("CRPS exact form, Monte Carlo and equivariance", crps_checks),
        ("single-member ensemble identity and mixture variance", ensemble_identity),
        ("binning widths, occupancy and monotonicity", binning_checks),
        ("split conformal marginal coverage", conformal_validity),
        ("nested cross-validation hygiene and determinism", cv_hygiene),
        ("kriging exactness, unbiasedness and pure nugget", kriging_checks),
        ("desk benchmark against constant-spread baseline", desk_benchmark),
        ("spherical variogram recovery", variogram_recovery),
        ("hyperparameter grid sizes", grid_counts),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS  {:>2}  {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL  {:>2}  {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
