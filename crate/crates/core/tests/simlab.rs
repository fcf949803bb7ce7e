use bootmi::pooling::t_quantile;
use bootmi::rng::{substream, Stream};
use bootmi::simlab::{
    calibration_estimate, default_battery, estimate_coverage, generate_regression_data,
    generate_trial_data, run_study, DataModel, MethodSpec, ObserveProbability,
    RegressionScenarioParams, ScenarioConfig, TrialScenarioParams,
};
use bootmi::{analyze, fit_ols, AnalyzerSpec, Error, ErrorKind, Method, PooledResult};
use rand_distr::{Distribution, StandardNormal};

fn normal(rng: &mut Stream) -> f64 {
    StandardNormal.sample(rng)
}

fn regression_params(id: &str) -> RegressionScenarioParams {
    match ScenarioConfig::builtin(id).unwrap().model {
        DataModel::Regression(p) => p,
        DataModel::Trial(_) => unreachable!(),
    }
}

fn main_effects() -> AnalyzerSpec {
    AnalyzerSpec {
        outcome: "loginsindex".into(),
        covariates: vec!["sex".into(), "age".into(), "weight".into()],
        interactions: vec![],
        filter: None,
        target: "weight".into(),
    }
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn builtin_scenarios_load() {
    let ids: Vec<_> = ScenarioConfig::builtin_ids().collect();
    assert_eq!(ids.len(), 6);
    for id in ids {
        let s = ScenarioConfig::builtin(id).unwrap();
        assert_eq!(s.id, id);
    }
    let err = ScenarioConfig::builtin("no-such-scenario").unwrap_err();
    assert_eq!(err.kind(), ErrorKind::Config);
}

#[test]
fn full_data_slope_recovers_theta() {
    let params = RegressionScenarioParams {
        p_observe_weight: ObserveProbability::All(1.0),
        ..regression_params("omitted-interaction")
    };
    let thetas: Vec<f64> = (0..500u64)
        .map(|r| {
            let d = generate_regression_data(&params, &mut substream(1, &[r])).unwrap();
            analyze(&d, &main_effects()).unwrap().estimate
        })
        .collect();
    let (m, se) = mean_se(&thetas);
    assert!((m - 0.01119).abs() < 3.0 * se, "{m} ± {se}");
}

#[test]
fn weight_missing_for_sixty_percent() {
    for id in ["heteroscedastic", "omitted-interaction", "non-normal"] {
        let params = regression_params(id);
        let reps = 200u64;
        let missing: usize = (0..reps)
            .map(|r| {
                generate_regression_data(&params, &mut substream(2, &[r]))
                    .unwrap()
                    .missing_count(3)
            })
            .sum();
        let total = (reps as usize * params.n) as f64;
        let frac = missing as f64 / total;
        let se = (0.24 / total).sqrt();
        assert!((frac - 0.6).abs() < 3.0 * se, "{id}: {frac}");
    }
}

#[test]
fn subgroup_weights_missing_only_among_men() {
    let params = regression_params("subgroup");
    let d = generate_regression_data(&params, &mut substream(3, &[])).unwrap();
    for i in 0..d.nrows() {
        if d.get(i, 0) == Some(0.0) {
            assert!(d.is_observed(i, 3));
        }
    }
    assert!(d.missing_count(3) > 0);
}

#[test]
fn noiseless_limit_is_exact() {
    let params = RegressionScenarioParams {
        lambda: 0.0,
        omega: 0.0,
        p_observe_weight: ObserveProbability::All(1.0),
        ..regression_params("heteroscedastic")
    };
    let d = generate_regression_data(&params, &mut substream(4, &[])).unwrap();
    let fit = fit_ols(&d, &main_effects()).unwrap();
    assert!((fit.coefficient("weight").unwrap() - 0.01119).abs() < 1e-9);
    assert!(fit.residual_variance < 1e-20);
}

#[test]
fn trial_moments() {
    let params = TrialScenarioParams::default();
    let reps = 1000u64;
    let (mut mx, mut my1, mut corr) = (Vec::new(), Vec::new(), Vec::new());
    for r in 0..reps {
        let d = generate_trial_data(&params, &mut substream(5, &[r])).unwrap();
        assert_eq!(d.nrows(), 500);
        let xs: Vec<f64> = (0..500).map(|i| d.get(i, 0).unwrap()).collect();
        mx.push(xs.iter().sum::<f64>() / 500.0);
        let active_y: Vec<f64> = (250..500).filter_map(|i| d.get(i, 2)).collect();
        my1.push(active_y.iter().sum::<f64>() / active_y.len() as f64);
        let pairs: Vec<(f64, f64)> = (0..500)
            .filter_map(|i| d.get(i, 2).map(|y| (xs[i], y - 0.2 * d.get(i, 1).unwrap())))
            .collect();
        corr.push(correlation(&pairs));
    }
    let (m, se) = mean_se(&mx);
    assert!((m - 2.0).abs() < 3.0 * se, "mean x {m}");
    let (m, se) = mean_se(&my1);
    assert!((m - 2.2).abs() < 3.0 * se, "mean y | z = 1 {m}");
    let (m, se) = mean_se(&corr);
    // the sample correlation is biased by O(1/n)
    assert!((m - 0.5).abs() < 3.0 * se + 0.005, "corr {m}");
}

fn correlation(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let (sx, sy) = pairs.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / n, sy / n);
    let (mut cxy, mut cxx, mut cyy) = (0.0, 0.0, 0.0);
    for (x, y) in pairs {
        cxy += (x - mx) * (y - my);
        cxx += (x - mx).powi(2);
        cyy += (y - my).powi(2);
    }
    cxy / (cxx * cyy).sqrt()
}

#[test]
fn no_missingness_when_probability_zero() {
    let params = TrialScenarioParams {
        p_missing: 0.0,
        ..TrialScenarioParams::default()
    };
    let d = generate_trial_data(&params, &mut substream(6, &[])).unwrap();
    assert_eq!(d.missing_count(2), 0);
}

#[test]
fn j2r_estimand_calibrates_to_one_tenth() {
    let mut s = ScenarioConfig::builtin("trial-j2r").unwrap();
    if let DataModel::Trial(p) = &mut s.model {
        p.n_per_arm = 50_000;
    }
    let r = calibration_estimate(&s, 50, 7).unwrap();
    assert!((r.point - 0.1).abs() < 3.0 * r.variance.sqrt(), "{r:?}");
    assert!(r.variance.sqrt() < 0.01);
}

#[test]
fn harness_self_test_on_exact_intervals() {
    let n = 30;
    let est = estimate_coverage(4000, 8, 1.0, |rng: &mut Stream| {
        let xs: Vec<f64> = (0..n)
            .map(|_| 1.0 + 2.0 * normal(rng))
            .collect();
        let (m, se) = mean_se(&xs);
        let half = t_quantile(0.975, (n - 1) as f64) * se;
        PooledResult {
            method: Method::MiRubin,
            m: 1,
            b: 0,
            point: m,
            variance: se * se,
            df: (n - 1) as f64,
            ci_lower: m - half,
            ci_upper: m + half,
            alpha: 0.05,
            fallback_used: false,
        }
    });
    let se = (0.95f64 * 0.05 / 4000.0).sqrt();
    assert!((est.coverage - 0.95).abs() < 3.0 * se, "{}", est.coverage);
    assert!((est.mc_se - (est.coverage * (1.0 - est.coverage) / 4000.0).sqrt()).abs() < 1e-15);
}

fn no_missing_trial() -> ScenarioConfig {
    let mut s = ScenarioConfig::builtin("trial-mar").unwrap();
    if let DataModel::Trial(p) = &mut s.model {
        p.p_missing = 0.0;
    }
    s
}

#[test]
fn single_replicate_smoke() {
    let r = run_study(&no_missing_trial(), &[MethodSpec::new(Method::MiRubin, 2, 0)], 1, 9, 0.05).unwrap();
    assert_eq!(r.summaries.len(), 1);
    let s = &r.summaries[0];
    assert_eq!((s.nsim, s.failures), (1, 0));
    assert!(s.coverage == 0.0 || s.coverage == 1.0);
}

#[test]
fn summaries_do_not_depend_on_thread_count() {
    let s = ScenarioConfig::builtin("trial-mar").unwrap();
    let battery: Vec<MethodSpec> = default_battery()
        .into_iter()
        .map(|m| MethodSpec { b: m.b.min(8), ..m })
        .collect();
    let reports: Vec<_> = [1, 3]
        .into_iter()
        .map(|t| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .unwrap()
                .install(|| run_study(&s, &battery, 6, 10, 0.05).unwrap())
        })
        .collect();
    assert_eq!(reports[0], reports[1]);
    assert_eq!(reports[0].summaries.len(), 6);
}

#[test]
fn study_rejects_bad_inputs() {
    let s = no_missing_trial();
    let battery = [MethodSpec::new(Method::MiRubin, 2, 0)];
    assert!(matches!(run_study(&s, &battery, 0, 1, 0.05), Err(Error::InvalidSpec(_))));
    assert!(matches!(run_study(&s, &[], 3, 1, 0.05), Err(Error::InvalidSpec(_))));
    assert!(matches!(
        run_study(&s, &[MethodSpec::new(Method::VonHippel, 1, 10)], 3, 1, 0.05),
        Err(Error::InvalidSpec(_))
    ));
}

#[test]
fn failing_replicates_fail_the_study() {
    let mut s = ScenarioConfig::builtin("trial-mar").unwrap();
    if let DataModel::Trial(p) = &mut s.model {
        p.n_per_arm = 3;
        p.p_missing = 0.6;
    }
    let err = run_study(&s, &[MethodSpec::new(Method::MiRubin, 2, 0)], 20, 11, 0.05).unwrap_err();
    assert!(matches!(err, Error::StudyFailed { .. }));
    assert_eq!(err.kind(), ErrorKind::Numerical);
}
