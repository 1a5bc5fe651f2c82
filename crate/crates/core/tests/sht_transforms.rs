use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use sphemu_core::grid::{synth_bandlimited, synth_bandlimited_with_plan};
use sphemu_core::sht::{forward_sht_batch, legendre_table, quadrature_oracle_sht};
use sphemu_core::{EquiangularField, FieldSeries, GridSpec, HarmonicVector, ShtPlan, WignerTables};

/// Fine enough for the trapezoid rule in θ (error ~ h^2) to reach a few 1e-7.
fn oracle_grid(l: usize) -> GridSpec {
    GridSpec::new(8193, 2 * l + 2, l).unwrap()
}

fn ylm_real_part(l: usize, m: usize) -> impl Fn(f64, f64) -> f64 {
    move |theta, phi| {
        let p = legendre_table(l + 1, theta)[l * (l + 1) / 2 + m];
        p * (m as f64 * phi).cos()
    }
}

#[test]
fn constant_field_has_only_the_mean_mode() {
    let spec = GridSpec::new(17, 32, 16).unwrap();
    let plan = ShtPlan::new(spec).unwrap();
    let f = plan.forward(&EquiangularField::constant(spec, -1.75)).unwrap();
    assert!((f.as_slice()[0] + 1.75 * (4.0 * PI).sqrt()).abs() < 1e-12);
    assert!(f.as_slice()[1..].iter().all(|c| c.abs() < 1e-12));
}

#[test]
fn real_part_of_y11_matches_quadrature() {
    let l = 4;
    let spec = oracle_grid(l);
    let field = EquiangularField::from_fn(spec, ylm_real_part(1, 1)).unwrap();
    let plan = ShtPlan::new(spec).unwrap();
    let fast = plan.forward(&field).unwrap();
    // Re Y_11 = (Y_11 - Y_{1,-1}) / 2, so f_11 = 1/2 in the packed real slot.
    assert!((fast.as_slice()[2] - 0.5).abs() < 1e-12);
    let oracle = quadrature_oracle_sht(&field, l).unwrap();
    assert!(fast.max_abs_diff(&oracle) < 1e-6, "{}", fast.max_abs_diff(&oracle));
}

#[test]
fn oracle_sees_unit_y20() {
    let spec = oracle_grid(4);
    let field = EquiangularField::from_fn(spec, ylm_real_part(2, 0)).unwrap();
    let oracle = quadrature_oracle_sht(&field, 4).unwrap();
    let want = HarmonicVector::unit(4, HarmonicVector::slot(2, 0));
    assert!(oracle.max_abs_diff(&want) < 1e-6);
}

#[test]
fn forward_agrees_with_oracle_up_to_l16() {
    for l in [8, 16] {
        let spec = oracle_grid(l);
        let plan = ShtPlan::new(spec).unwrap();
        let field = synth_bandlimited(spec, 5).unwrap();
        let fast = plan.forward(&field).unwrap();
        let oracle = quadrature_oracle_sht(&field, l).unwrap();
        let err = fast.max_abs_diff(&oracle);
        assert!(err < 1e-6, "L={l}: {err}");
    }
}

#[test]
fn round_trip_across_band_limits() {
    for (l, tol) in [(16, 1e-10), (32, 1e-9), (64, 1e-9)] {
        let spec = GridSpec::from_band_limit(l).unwrap();
        let plan = ShtPlan::new(spec).unwrap();
        let (field, coeffs) = synth_bandlimited_with_plan(&plan, 3);
        let back = plan.forward(&field).unwrap();
        assert!(back.max_abs_diff(&coeffs) < tol, "L={l}: {}", back.max_abs_diff(&coeffs));
        let again = plan.inverse(&back).unwrap();
        assert!(again.max_abs_diff(&field) < tol);
    }
}

#[test]
fn round_trip_on_minimal_admissible_grid() {
    // n_phi = 2L - 1 and n_theta = L + 1: no slack in either direction.
    let spec = GridSpec::new(25, 47, 24).unwrap();
    let plan = ShtPlan::new(spec).unwrap();
    let (field, coeffs) = synth_bandlimited_with_plan(&plan, 9);
    assert!(plan.forward(&field).unwrap().max_abs_diff(&coeffs) < 1e-10);
}

#[test]
fn parseval_with_exact_quadrature() {
    let l = 12;
    let spec = GridSpec::new(2 * l + 1, 4 * l, l).unwrap();
    let plan = ShtPlan::new(spec).unwrap();
    let (field, coeffs) = synth_bandlimited_with_plan(&plan, 21);
    let w = spec.quadrature_weights();
    let mut energy = 0.0;
    for i in 0..spec.n_theta() {
        energy += w[i] * field.ring(i).iter().map(|v| v * v).sum::<f64>();
    }
    let rel = (energy - coeffs.energy()).abs() / coeffs.energy();
    assert!(rel < 1e-8, "{rel}");
}

#[test]
fn batch_matches_serial_bit_for_bit() {
    let spec = GridSpec::from_band_limit(12).unwrap();
    let plan = ShtPlan::with_tables(spec, Arc::new(WignerTables::build(12).unwrap())).unwrap();
    let fields: Vec<_> = (0..8).map(|k| synth_bandlimited_with_plan(&plan, k).0).collect();
    let series = FieldSeries::new(spec, 8, 1, fields).unwrap();
    let batch = forward_sht_batch(&plan, &series).unwrap();
    for (k, b) in batch.iter().enumerate() {
        let s = plan.forward(series.get(0, k)).unwrap();
        assert!(s.as_slice().iter().zip(b.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    let same = FieldSeries::new(spec, 3, 1, vec![series.get(0, 0).clone(); 3]).unwrap();
    let out = plan.forward_batch(&same).unwrap();
    assert_eq!(out[0], out[1]);
    assert_eq!(out[1], out[2]);
}

#[test]
fn plan_is_deterministic() {
    let spec = GridSpec::new(9, 16, 6).unwrap();
    let a = ShtPlan::new(spec).unwrap();
    let b = ShtPlan::new(spec).unwrap();
    assert_eq!(a.w1(), b.w1());
    assert_eq!(a.w2(), b.w2());
    assert_eq!(a.e_phi(), b.e_phi());
}

fn small_plan() -> &'static ShtPlan {
    use std::sync::OnceLock;
    static PLAN: OnceLock<ShtPlan> = OnceLock::new();
    PLAN.get_or_init(|| ShtPlan::new(GridSpec::new(11, 19, 10).unwrap()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn linearity(seed_a in any::<u64>(), seed_b in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let plan = small_plan();
        let (f, _) = synth_bandlimited_with_plan(plan, seed_a);
        let (g, _) = synth_bandlimited_with_plan(plan, seed_b);
        let combo: Vec<f64> = f.values().iter().zip(g.values()).map(|(x, y)| a * x + b * y).collect();
        let combo = EquiangularField::new(*plan.spec(), combo, 1, 1).unwrap();
        let lhs = plan.forward(&combo).unwrap();
        let rhs = plan.forward(&f).unwrap().lin_comb(a, &plan.forward(&g).unwrap(), b);
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn inverse_then_forward_is_identity(coeffs in proptest::collection::vec(-5.0f64..5.0, 100)) {
        let plan = small_plan();
        let v = HarmonicVector::new(10, coeffs).unwrap();
        let back = plan.forward(&plan.inverse(&v).unwrap()).unwrap();
        prop_assert!(back.max_abs_diff(&v) < 1e-11);
    }

    #[test]
    fn pack_unpack_is_lossless(coeffs in proptest::collection::vec(-1e3f64..1e3, 49)) {
        let v = HarmonicVector::new(7, coeffs).unwrap();
        prop_assert_eq!(HarmonicVector::pack(7, &v.unpack()).unwrap(), v);
    }
}
