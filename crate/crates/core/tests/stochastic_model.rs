use sphemu_core::grid::{synth_bandlimited, EquiangularField, FieldSeries, GridSpec};
use sphemu_core::mpchol::Variant;
use sphemu_core::pipeline::{synthetic_model, EmulatorModel, SyntheticSpec};
use sphemu_core::rng::NormalSampler;
use sphemu_core::sht::{legendre_table, HarmonicVector, ShtPlan};
use sphemu_core::stochastic::{
    ar_is_stable, emulate, estimate_innovation_covariance, fit_noise_field, fit_var, implied_std, second_moment,
    simulate_coefficients, InnovationConfig, InnovationModel, NoiseField, VarModel, VarResiduals,
};
use sphemu_core::trend::{ForcingTrajectory, LocationTrend, TrendParams};
use sphemu_core::Error;

/// `n_ens` independent series of `t_len` vectors from a VAR with unit diagonal innovations.
fn simulate_var(var: &VarModel, t_len: usize, n_ens: usize, seed: u64) -> Vec<HarmonicVector> {
    let innov = InnovationModel::diagonal(&vec![1.0; var.dim()]).unwrap();
    let mut rng = NormalSampler::new(seed);
    (0..n_ens)
        .flat_map(|_| simulate_coefficients(var, &innov, t_len, &mut rng).unwrap())
        .collect()
}

#[test]
fn white_noise_gives_near_zero_ar_terms() {
    let var = VarModel::uniform(4, &[0.0, 0.0]).unwrap();
    let coeffs = simulate_var(&var, 5000, 1, 1);
    let fit = fit_var(&coeffs, 5000, 1, 2).unwrap();
    for lag in 1..=2 {
        assert!(fit.model.phi(lag).iter().all(|p| p.abs() < 0.05), "{:?}", fit.model.phi(lag));
    }
}

#[test]
fn ar1_recovery() {
    let var = VarModel::uniform(4, &[0.7]).unwrap();
    let coeffs = simulate_var(&var, 5000, 1, 2);
    let fit = fit_var(&coeffs, 5000, 1, 1).unwrap();
    assert!(fit.model.phi(1).iter().all(|p| (p - 0.7).abs() < 0.05), "{:?}", fit.model.phi(1));
}

#[test]
fn order_zero_returns_demeaned_series() {
    let mut rng = NormalSampler::new(3);
    let coeffs: Vec<HarmonicVector> = (0..40)
        .map(|_| {
            let mut v = vec![0.0; 4];
            rng.fill_normal(&mut v);
            v[0] += 5.0;
            HarmonicVector::new(2, v).unwrap()
        })
        .collect();
    let fit = fit_var(&coeffs, 20, 2, 0).unwrap();
    assert_eq!(fit.model.order(), 0);
    assert_eq!(fit.residuals.count(), 40);
    let mean0: f64 = coeffs.iter().map(|c| c.as_slice()[0]).sum::<f64>() / 40.0;
    for (k, c) in coeffs.iter().enumerate() {
        assert!((fit.residuals.vector(k)[0] - (c.as_slice()[0] - mean0)).abs() < 1e-12);
    }
}

#[test]
fn zero_coefficient_gets_zero_ar_terms() {
    let var = VarModel::uniform(2, &[0.5]).unwrap();
    let mut coeffs = simulate_var(&var, 200, 1, 4);
    for c in coeffs.iter_mut() {
        c.as_mut_slice()[3] = 0.0;
    }
    let fit = fit_var(&coeffs, 200, 1, 2).unwrap();
    assert_eq!(fit.model.coefficient(3), vec![0.0, 0.0]);
    assert!(fit.model.phi(1)[0] > 0.3);
}

#[test]
fn fit_var_rejects_short_series() {
    let coeffs = vec![HarmonicVector::zeros(2); 4];
    assert!(fit_var(&coeffs, 4, 1, 3).is_err());
    assert!(fit_var(&coeffs, 3, 1, 1).is_err());
}

#[test]
fn var_recovery_within_three_standard_errors() {
    // 20 repetitions at T = 5000 of a VAR(3) with mixed per-coefficient diagonals.
    let l = 3;
    let dim = l * l;
    let phi: Vec<Vec<f64>> = vec![
        (0..dim).map(|j| 0.2 + 0.05 * j as f64).collect(),
        (0..dim).map(|j| 0.2 - 0.03 * j as f64).collect(),
        vec![0.1; dim],
    ];
    let var = VarModel::new(l, phi).unwrap();
    assert!(var.unstable_coefficients().is_empty());
    let (mut inside, mut total) = (0, 0);
    for rep in 0..20 {
        let coeffs = simulate_var(&var, 5000, 1, 100 + rep);
        let fit = fit_var(&coeffs, 5000, 1, 3).unwrap();
        for lag in 1..=3 {
            for j in 0..dim {
                let z = (fit.model.phi(lag)[j] - var.phi(lag)[j]) / fit.std_errors[lag - 1][j];
                inside += (z.abs() <= 3.0) as usize;
                total += 1;
            }
        }
    }
    // nominal coverage is 99.73%
    let frac = inside as f64 / total as f64;
    assert!(frac >= 0.99, "{inside}/{total}");
}

#[test]
fn stationarity_check_flags_explosive_fit() {
    let var = VarModel::new(1, vec![vec![0.7], vec![0.5]]).unwrap();
    assert_eq!(var.unstable_coefficients(), vec![0]);
    assert!(ar_is_stable(&[0.4, 0.25, 0.2]));
}

fn iid_residuals(dim: usize, n: usize, seed: u64) -> VarResiduals {
    let mut rng = NormalSampler::new(seed);
    let mut data = vec![0.0; dim * n];
    rng.fill_normal(&mut data);
    VarResiduals::new(dim, 1, n, data).unwrap()
}

#[test]
fn identity_innovations_are_recovered() {
    let dim = 64;
    let res = iid_residuals(dim, 10 * dim, 7);
    let m = estimate_innovation_covariance(&res, &InnovationConfig::default()).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((m.u_hat()[i * dim + j] - target).abs());
        }
    }
    println!("max |U - I| = {worst}");
    assert!(worst < 0.15);
    assert_eq!(m.nugget(), 0.0);
    assert!(m.factor_error() < 1e-12);
}

#[test]
fn single_residual_engages_nugget() {
    let res = iid_residuals(16, 1, 9);
    let m = estimate_innovation_covariance(&res, &InnovationConfig::default()).unwrap();
    let x = res.vector(0);
    for i in 0..16 {
        for j in 0..16 {
            assert!((m.u_hat()[i * 16 + j] - x[i] * x[j]).abs() < 1e-15);
        }
    }
    assert!(m.nugget() > 0.0);
    assert!(m.factor_error() < 1e-12, "{}", m.factor_error());
}

#[test]
fn zero_residuals_fail_hard() {
    let res = VarResiduals::new(4, 1, 10, vec![0.0; 40]).unwrap();
    assert!(matches!(
        estimate_innovation_covariance(&res, &InnovationConfig::default()),
        Err(Error::NuggetExhausted { .. })
    ));
}

#[test]
fn second_moment_ignores_ensemble_order() {
    let dim = 9;
    let steps = 300;
    let a = iid_residuals(dim, 3 * steps, 11);
    let mut permuted = Vec::new();
    for r in [2, 0, 1] {
        permuted.extend_from_slice(&a.as_slice()[r * steps * dim..(r + 1) * steps * dim]);
    }
    let b = VarResiduals::new(dim, 3, steps, permuted).unwrap();
    let ua = second_moment(&VarResiduals::new(dim, 3, steps, a.as_slice().to_vec()).unwrap());
    let ub = second_moment(&b);
    for (x, y) in ua.iter().zip(&ub) {
        assert!((x - y).abs() < 1e-14);
    }
}

#[test]
fn mixed_precision_factor_stays_close() {
    let res = iid_residuals(64, 2000, 12);
    let dp = estimate_innovation_covariance(&res, &InnovationConfig::default()).unwrap();
    let hp = estimate_innovation_covariance(&res, &InnovationConfig::with_variant(Variant::DpHp)).unwrap();
    assert!(dp.factor_error() < 1e-12);
    assert!(hp.factor_error() < 5e-2, "{}", hp.factor_error());
    assert!(hp.factor_error() > dp.factor_error());
}

#[test]
fn innovation_bundle_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let res = iid_residuals(16, 100, 13);
    let m = estimate_innovation_covariance(&res, &InnovationConfig::default()).unwrap();
    let p = dir.path().join("u.bin");
    m.save(&p).unwrap();
    assert_eq!(std::fs::metadata(&p).unwrap().len(), 4 + 4 + 8 + 136 * 8);
    let back = InnovationModel::load(&p).unwrap();
    assert_eq!(back.v_factor(), m.v_factor());
    assert_eq!(back.nugget(), m.nugget());
    let p2 = dir.path().join("u2.bin");
    back.save(&p2).unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&p2).unwrap());
}

#[test]
fn noise_field_examples() {
    let spec = GridSpec::new(33, 64, 4).unwrap();
    let plan = ShtPlan::new(spec).unwrap();
    let fields: Vec<EquiangularField> = (0..1000).map(|s| synth_bandlimited(spec, s).unwrap()).collect();
    let clean = FieldSeries::new(spec, 1000, 1, fields).unwrap();
    let rec = plan.inverse_batch(&plan.forward_batch(&clean).unwrap(), 1000, 1).unwrap();
    let v = fit_noise_field(&clean, &rec).unwrap();
    assert!(v.v_squared().iter().all(|&x| x < 1e-18));

    let mut rng = NormalSampler::new(5);
    let noisy: Vec<EquiangularField> = clean
        .fields()
        .iter()
        .map(|f| {
            let vals = f.values().iter().map(|x| x + 0.2 * rng.standard_normal()).collect();
            EquiangularField::new(spec, vals, 0, 0).unwrap()
        })
        .collect();
    let noisy = FieldSeries::new(spec, 1000, 1, noisy).unwrap();
    let rec = plan.inverse_batch(&plan.forward_batch(&noisy).unwrap(), 1000, 1).unwrap();
    let v = fit_noise_field(&noisy, &rec).unwrap();
    // T = 1000 gives each location a standard error near 4.5%, so 15% is a
    // 3.3-SE band per location; require it at 99% of the points.
    let n = v.v_squared().len() as f64;
    let inside = v.v_squared().iter().filter(|x| (*x / 0.04 - 1.0).abs() < 0.15).count() as f64;
    assert!(inside >= 0.99 * n, "{inside}/{n}");
    let mean = v.v_squared().iter().sum::<f64>() / n;
    assert!((mean / 0.04 - 1.0).abs() < 0.02, "{mean}");

    let zero = FieldSeries::single(EquiangularField::constant(spec, 0.0));
    assert!(fit_noise_field(&zero, &zero).unwrap().v_squared().iter().all(|&x| x == 0.0));
    let other = FieldSeries::single(EquiangularField::constant(GridSpec::new(9, 16, 4).unwrap(), 0.0));
    assert!(fit_noise_field(&zero, &other).is_err());
}

fn flat_model(spec: GridSpec, var: VarModel, innovation: InnovationModel) -> EmulatorModel {
    let base = synthetic_model(spec, &SyntheticSpec { k: 0, ..Default::default() }).unwrap();
    EmulatorModel {
        trend: TrendParams::uniform(spec, 0, 12, &LocationTrend::constant(0.0, 0)).unwrap(),
        forcing: ForcingTrajectory::none(),
        var,
        innovation,
        noise: NoiseField::zeros(spec),
        ..base
    }
}

#[test]
fn white_field_variance_matches_direct_synthesis() {
    let l = 4;
    let spec = GridSpec::new(7, 10, l).unwrap();
    let c = 0.3;
    let model = flat_model(
        spec,
        VarModel::new(l, vec![]).unwrap(),
        InnovationModel::diagonal(&vec![c; l * l]).unwrap(),
    );
    let plan = ShtPlan::new(spec).unwrap();
    let implied = implied_std(&model, &plan, 1);
    // Direct: packed real coefficients k carry Re/Im parts with weight 2 for m > 0.
    for i in 0..spec.n_theta() {
        let table = legendre_table(l, spec.theta(i));
        for j in 0..spec.n_phi() {
            let phi = spec.phi(j);
            let mut var = 0.0;
            for d in 0..l {
                for m in 0..=d {
                    let p = table[d * (d + 1) / 2 + m];
                    if m == 0 {
                        var += c * p * p;
                    } else {
                        let (s, co) = (m as f64 * phi).sin_cos();
                        var += c * 4.0 * p * p * (co * co + s * s);
                    }
                }
            }
            let got = implied[i * spec.n_phi() + j];
            assert!((got * got - var).abs() < 1e-12, "({i},{j}) {got} vs {}", var.sqrt());
        }
    }
    // Monte Carlo: 200 members x 50 independent steps per location.
    let emu = emulate(&model, 50, 200, 17).unwrap();
    for loc in [0, 13, 35, 69] {
        let vals: Vec<f64> = emu.fields().iter().map(|f| f.values()[loc]).collect();
        let n = vals.len() as f64;
        let m = vals.iter().sum::<f64>() / n;
        let s2 = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
        let target = implied[loc].powi(2);
        assert!((s2 / target - 1.0).abs() < 5.0 * (2.0 / n).sqrt(), "loc {loc}: {s2} vs {target}");
    }
}

#[test]
fn emulation_is_reproducible() {
    let spec = GridSpec::from_band_limit(4).unwrap();
    let model = synthetic_model(spec, &SyntheticSpec::default()).unwrap();
    let a = emulate(&model, 30, 2, 99).unwrap();
    let b = emulate(&model, 30, 2, 99).unwrap();
    assert_eq!(a, b);
    let c = emulate(&model, 30, 2, 100).unwrap();
    assert_ne!(a, c);
}

#[test]
fn emulation_refits_to_generating_var() {
    let spec = GridSpec::from_band_limit(8).unwrap();
    let model = flat_model(
        spec,
        VarModel::uniform(8, &[0.5, 0.2]).unwrap(),
        InnovationModel::diagonal(&vec![0.2; 64]).unwrap(),
    );
    let emu = emulate(&model, 5000, 1, 3).unwrap();
    let plan = ShtPlan::new(spec).unwrap();
    let coeffs = plan.forward_batch(&emu).unwrap();
    let fit = fit_var(&coeffs, 5000, 1, 2).unwrap();
    let (mut inside, mut total) = (0, 0);
    for lag in 1..=2 {
        for j in 0..64 {
            let z = (fit.model.phi(lag)[j] - model.var.phi(lag)[j]) / fit.std_errors[lag - 1][j];
            inside += (z.abs() <= 3.0) as usize;
            total += 1;
        }
    }
    assert!(inside as f64 >= 0.98 * total as f64, "{inside}/{total}");
}

#[test]
fn incomplete_model_is_rejected() {
    let spec = GridSpec::from_band_limit(4).unwrap();
    let mut model = synthetic_model(spec, &SyntheticSpec::default()).unwrap();
    model.innovation = InnovationModel::diagonal(&[1.0; 4]).unwrap();
    assert!(matches!(emulate(&model, 5, 1, 0), Err(Error::IncompleteModel(_))));
}
