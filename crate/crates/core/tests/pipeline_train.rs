use sphemu_core::grid::{EquiangularField, FieldSeries, GridSpec};
use sphemu_core::par::with_threads;
use sphemu_core::pipeline::{synthetic_model, train, train_detailed, validate, EmulatorModel, SyntheticSpec, TrainConfig};
use sphemu_core::sht::ShtPlan;
use sphemu_core::stochastic::emulate;
use sphemu_core::Error;

fn config() -> TrainConfig {
    TrainConfig {
        k: 2,
        tau: 12,
        order: 3,
        ..Default::default()
    }
}

fn bundle_bytes(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn closed_loop_recovers_ar_diagonals() {
    let spec = GridSpec::from_band_limit(8).unwrap();
    let truth = synthetic_model(spec, &SyntheticSpec::default()).unwrap();
    let data = emulate(&truth, 2000, 1, 5).unwrap();
    let fit = train_detailed(&data, &truth.forcing, &config()).unwrap();
    let (mut inside, mut total) = (0, 0);
    for lag in 1..=3 {
        for j in 0..64 {
            let z = (fit.model.var.phi(lag)[j] - truth.var.phi(lag)[j]) / fit.var_std_errors[lag - 1][j];
            inside += (z.abs() <= 3.0) as usize;
            total += 1;
        }
    }
    assert!(inside as f64 >= 0.98 * total as f64, "{inside}/{total}");
    assert_eq!(fit.model.provenance.n_times, 2000);
}

/// `Σ_k (I - P)_{ik}²` per location, with `P = inverse ∘ forward`.
fn out_of_band_share(spec: GridSpec) -> Vec<f64> {
    let plan = ShtPlan::new(spec).unwrap();
    let n = spec.n_points();
    let mut share = vec![0.0; n];
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        let f = EquiangularField::new(spec, e.clone(), 1, 1).unwrap();
        let back = plan.inverse(&plan.forward(&f).unwrap()).unwrap();
        for i in 0..n {
            share[i] += (e[i] - back.values()[i]).powi(2);
        }
    }
    share
}

#[test]
fn retrained_scale_and_noise_approach_the_generator() {
    let spec = GridSpec::from_band_limit(8).unwrap();
    let truth = synthetic_model(spec, &SyntheticSpec { seed: 3, n_years: 2000, ..Default::default() }).unwrap();
    let n = spec.n_points();
    // Only noise outside the band-limited space is seen again, so the target
    // is v² Σ_k (I - P)_{ik}². Trend-fit error leaks into the same residual and
    // adds a bias that shrinks like 1/T.
    let share = out_of_band_share(spec);
    let v2 = truth.noise.v_squared()[0];
    let ratios = |model: &EmulatorModel| -> Vec<f64> {
        (0..n).map(|i| model.noise.v_squared()[i] / (v2 * share[i])).collect()
    };

    let data = emulate(&truth, 5000, 1, 8).unwrap();
    let model = train(&data, &truth.forcing, &config()).unwrap();
    let within = (0..n)
        .filter(|&loc| (model.trend.sigma(loc) / truth.trend.sigma(loc) - 1.0).abs() <= 0.05)
        .count();
    assert!(within as f64 >= 0.95 * n as f64, "sigma within 5% at {within}/{n}");
    let r = ratios(&model);
    let mean = r.iter().sum::<f64>() / n as f64;
    assert!((mean - 1.0).abs() < 0.1, "mean v² ratio {mean}");
    assert!(r.iter().all(|x| (x - 1.0).abs() < 0.5), "{r:?}");

    let data = emulate(&truth, 20000, 1, 8).unwrap();
    let model = train(&data, &truth.forcing, &config()).unwrap();
    let r = ratios(&model);
    let mean_long = r.iter().sum::<f64>() / n as f64;
    assert!((mean_long - 1.0).abs() < 0.03, "mean v² ratio {mean_long} at T=20000");
}

#[test]
fn short_series_fails_at_var_stage() {
    let spec = GridSpec::from_band_limit(3).unwrap();
    let truth = synthetic_model(spec, &SyntheticSpec { k: 0, ..Default::default() }).unwrap();
    let data = emulate(&truth, 6, 1, 1).unwrap();
    let cfg = TrainConfig {
        k: 0,
        order: 5,
        ..config()
    };
    match train(&data, &truth.forcing, &cfg) {
        Err(Error::Stage { stage, .. }) => assert_eq!(stage, "fit_var"),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn bundles_are_deterministic_and_round_trip() {
    let spec = GridSpec::from_band_limit(4).unwrap();
    let truth = synthetic_model(spec, &SyntheticSpec::default()).unwrap();
    let data = emulate(&truth, 300, 2, 21).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    train(&data, &truth.forcing, &config()).unwrap().save(&a).unwrap();
    with_threads(3, || train(&data, &truth.forcing, &config()).unwrap()).save(&b).unwrap();
    assert_eq!(bundle_bytes(&a), bundle_bytes(&b));

    let loaded = EmulatorModel::load(&a).unwrap();
    loaded.save(&c).unwrap();
    for ((na, ba), (nc, bc)) in bundle_bytes(&a).into_iter().zip(bundle_bytes(&c)) {
        assert_eq!(na, nc);
        assert!(ba == bc, "{na} changed on rewrite");
    }
    assert_eq!(emulate(&loaded, 10, 1, 4).unwrap().n_times(), 10);

    std::fs::remove_file(a.join("noise.bin")).unwrap();
    assert!(matches!(EmulatorModel::load(&a), Err(Error::IncompleteModel(_))));
}

#[test]
fn validation_scores_self_and_shifted_holdouts() {
    let spec = GridSpec::from_band_limit(4).unwrap();
    let model = synthetic_model(spec, &SyntheticSpec::default()).unwrap();
    let holdout = emulate(&model, 24, 2, 1234).unwrap();
    let report = validate(&model, &holdout, 100, 77).unwrap();
    assert!(report.flagged_fraction <= 0.01, "{}", report.flagged_fraction);
    assert!(report.passed);
    assert_eq!(report.spectrum_holdout.len(), 4);
    for (h, e) in report.spectrum_holdout.iter().zip(&report.spectrum_emulated) {
        assert!((h / e - 1.0).abs() < 0.5, "{h} vs {e}");
    }

    let shifted: Vec<EquiangularField> = holdout
        .fields()
        .iter()
        .enumerate()
        .map(|(_, f)| {
            let vals = f
                .values()
                .iter()
                .enumerate()
                .map(|(loc, v)| v + 10.0 * model.trend.sigma(loc))
                .collect();
            EquiangularField::new(spec, vals, 0, 0).unwrap()
        })
        .collect();
    let shifted = FieldSeries::new(spec, 24, 2, shifted).unwrap();
    let report = validate(&model, &shifted, 100, 77).unwrap();
    assert!(report.flagged_fraction > 0.99, "{}", report.flagged_fraction);
    assert!(!report.passed);

    assert!(validate(&model, &holdout, 0, 1).is_err());
    assert!(validate(&model, &holdout, 1, 1).is_err());
    let other = FieldSeries::single(EquiangularField::constant(GridSpec::from_band_limit(5).unwrap(), 0.0));
    assert!(validate(&model, &other, 10, 1).is_err());
}

#[test]
fn emulation_is_thread_count_independent() {
    let spec = GridSpec::from_band_limit(6).unwrap();
    let model = synthetic_model(spec, &SyntheticSpec::default()).unwrap();
    let a = with_threads(1, || emulate(&model, 40, 3, 9).unwrap());
    let b = with_threads(4, || emulate(&model, 40, 3, 9).unwrap());
    assert_eq!(a, b);
}
