use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::FieldSeries;
use crate::par;
use crate::rng::derive_seed;
use crate::sht::{HarmonicVector, ShtPlan};
use crate::stochastic::emulate_member;
use crate::trend;

use super::EmulatorModel;

/// A holdout value is flagged when its z-score exceeds this in magnitude.
pub const Z_FLAG: f64 = 3.0;
/// Validation passes when at most this fraction of values is flagged.
pub const DEFAULT_FLAG_LIMIT: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub n_reps: usize,
    pub n_times: usize,
    pub n_ensembles: usize,
    /// Mean over times and holdout members of the z-score, per location.
    pub mean_z: Vec<f64>,
    /// Root mean square z-score per location (about 1 when the spread matches).
    pub rms_z: Vec<f64>,
    /// Share of holdout values with `|z| > 3`.
    pub flagged_fraction: f64,
    /// Share of locations whose mean z-score exceeds `3 / sqrt(n_values)`. Treats time steps as
    /// independent, so strongly autocorrelated series inflate it; read it as a diagnostic only.
    pub flagged_locations: f64,
    /// Mean power per degree of the standardised holdout and emulation.
    pub spectrum_holdout: Vec<f64>,
    pub spectrum_emulated: Vec<f64>,
    pub flag_limit: f64,
    pub passed: bool,
}

/// Power per degree `Σ_m |f_ℓm|²`.
pub fn degree_spectrum(c: &HarmonicVector) -> Vec<f64> {
    let l = c.band_limit();
    let v = c.as_slice();
    (0..l)
        .map(|d| {
            let base = d * d;
            v[base] * v[base] + 2.0 * v[base + 1..base + 2 * d + 1].iter().map(|x| x * x).sum::<f64>()
        })
        .collect()
}

fn mean_spectrum(plan: &ShtPlan, z: &FieldSeries) -> Result<Vec<f64>> {
    let coeffs = plan.forward_batch(z)?;
    let spectra = par::map_slice(&coeffs, degree_spectrum);
    let n = spectra.len() as f64;
    let mut out = vec![0.0; plan.spec().band_limit()];
    for s in &spectra {
        out.iter_mut().zip(s).for_each(|(o, v)| *o += v / n);
    }
    Ok(out)
}

/// Scores a holdout series against `n_reps` emulations of the same length.
/// Replicate `r` is member `r` of `emulate(model, T, n_reps, seed)`.
pub fn validate(model: &EmulatorModel, holdout: &FieldSeries, n_reps: usize, seed: u64) -> Result<ValidationReport> {
    if n_reps < 2 {
        return Err(Error::InvalidArgument(format!("validation needs at least 2 replicates, got {n_reps}")));
    }
    if *holdout.spec() != model.spec {
        return Err(Error::ShapeMismatch(format!(
            "holdout grid {:?} differs from model grid {:?}",
            holdout.spec(),
            model.spec
        )));
    }
    model.check_complete()?;
    let plan = ShtPlan::new(model.spec)?;
    let t_len = holdout.n_times();
    let n_points = model.spec.n_points();

    // Running sums over replicates, per (t, location), accumulated in replicate order.
    let mut sum = vec![0.0; t_len * n_points];
    let mut sum_sq = vec![0.0; t_len * n_points];
    let mut spectrum_emulated = vec![0.0; model.spec.band_limit()];
    for r in 0..n_reps {
        let member = emulate_member(model, &plan, t_len, derive_seed(seed, r as u64))?;
        for (t, f) in member.fields().iter().enumerate() {
            for (loc, v) in f.values().iter().enumerate() {
                sum[t * n_points + loc] += v;
                sum_sq[t * n_points + loc] += v * v;
            }
        }
        let z = trend::detrend(&member, &model.trend, &model.forcing)?;
        let s = mean_spectrum(&plan, &z)?;
        spectrum_emulated.iter_mut().zip(&s).for_each(|(o, v)| *o += v / n_reps as f64);
    }
    let n = n_reps as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std: Vec<f64> = sum_sq
        .iter()
        .zip(&mean)
        .map(|(q, m)| ((q - n * m * m) / (n - 1.0)).max(0.0).sqrt())
        .collect();

    let mut z_sum = vec![0.0; n_points];
    let mut z_sq = vec![0.0; n_points];
    let mut flagged = 0usize;
    for r in 0..holdout.n_ensembles() {
        for t in 0..t_len {
            for (loc, y) in holdout.get(r, t).values().iter().enumerate() {
                let k = t * n_points + loc;
                let z = if std[k] > 0.0 {
                    (y - mean[k]) / std[k]
                } else if *y == mean[k] {
                    0.0
                } else {
                    f64::INFINITY.copysign(y - mean[k])
                };
                z_sum[loc] += z;
                z_sq[loc] += z * z;
                flagged += (z.abs() > Z_FLAG) as usize;
            }
        }
    }
    let count = (holdout.n_ensembles() * t_len) as f64;
    let mean_z: Vec<f64> = z_sum.iter().map(|s| s / count).collect();
    let rms_z: Vec<f64> = z_sq.iter().map(|s| (s / count).sqrt()).collect();
    let flagged_fraction = flagged as f64 / (count * n_points as f64);
    let loc_limit = Z_FLAG / count.sqrt();
    let flagged_locations = mean_z.iter().filter(|z| z.abs() > loc_limit).count() as f64 / n_points as f64;

    let z_holdout = trend::detrend(holdout, &model.trend, &model.forcing)?;
    let spectrum_holdout = mean_spectrum(&plan, &z_holdout)?;
    Ok(ValidationReport {
        n_reps,
        n_times: t_len,
        n_ensembles: holdout.n_ensembles(),
        mean_z,
        rms_z,
        flagged_fraction,
        flagged_locations,
        spectrum_holdout,
        spectrum_emulated,
        flag_limit: DEFAULT_FLAG_LIMIT,
        passed: flagged_fraction <= DEFAULT_FLAG_LIMIT,
    })
}
