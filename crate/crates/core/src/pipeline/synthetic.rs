use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::rng::NormalSampler;
use crate::sht::HarmonicVector;
use crate::stochastic::{InnovationConfig, InnovationModel, NoiseField, VarModel};
use crate::trend::{ForcingTrajectory, LocationTrend, TrendParams};

use super::{EmulatorModel, Provenance, TrainConfig};

/// Known-truth model used by the statistical tests and the `synth` command.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub k: usize,
    pub tau: usize,
    pub order: usize,
    /// Pointwise noise variance `v²`, in units of the standardised field.
    pub noise_variance: f64,
    /// Years of forcing to generate after year 1 (history is added in front).
    pub n_years: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            k: 2,
            tau: 12,
            order: 3,
            noise_variance: 0.01,
            n_years: 500,
            seed: 1,
        }
    }
}

/// Slowly rising forcing with a decadal wobble, with 30 years of history
/// before year 1.
pub fn synthetic_forcing(n_years: usize) -> ForcingTrajectory {
    let history = 30i64;
    let values = (-history + 1..=n_years as i64)
        .map(|y| 0.01 * y as f64 + 0.3 * (std::f64::consts::TAU * y as f64 / 11.0).sin())
        .collect();
    ForcingTrajectory::new(-history + 1, values).expect("finite synthetic forcing")
}

/// AR diagonals drawn per coefficient from `[0.2, 0.4]`, `[0.2, 0.25]` and
/// `{0.2}` for lags 1-3 (further lags zero), all stationary. The innovation
/// covariance is diagonal and chosen so the stationary standardised field has
/// unit variance everywhere once the noise is added.
pub fn synthetic_model(spec: GridSpec, s: &SyntheticSpec) -> Result<EmulatorModel> {
    if !(0.0..1.0).contains(&s.noise_variance) {
        return Err(Error::InvalidArgument("noise variance must lie in [0, 1)".into()));
    }
    let l = spec.band_limit();
    let dim = l * l;
    let mut rng = NormalSampler::new(s.seed);
    let ranges = [(0.2, 0.4), (0.2, 0.25), (0.2, 0.2)];
    let phi: Vec<Vec<f64>> = (0..s.order)
        .map(|p| {
            (0..dim)
                .map(|_| match ranges.get(p) {
                    Some(&(lo, hi)) => lo + (hi - lo) * rng.uniform(),
                    None => 0.0,
                })
                .collect()
        })
        .collect();
    let var = VarModel::new(l, phi)?;

    // Stationary variance per coefficient: c for m = 0 and c/2 for each of the
    // real and imaginary parts, c = (1 - v²) 4π / L², so that Σ_ℓ c (2ℓ+1)/4π = 1 - v².
    let c = (1.0 - s.noise_variance) * 4.0 * std::f64::consts::PI / dim as f64;
    let variances: Vec<f64> = (0..dim)
        .map(|j| {
            let (_, m) = HarmonicVector::degree_order(j);
            let target = if m == 0 { c } else { c / 2.0 };
            let gain: f64 = var.impulse_response(j, 4000).iter().map(|x| x * x).sum();
            target / gain
        })
        .collect();
    let innovation = InnovationModel::diagonal(&variances)?;

    let records: Vec<LocationTrend> = (0..spec.n_theta())
        .flat_map(|i| (0..spec.n_phi()).map(move |j| (spec.theta(i), spec.phi(j))))
        .map(|(theta, phi)| LocationTrend {
            beta0: 10.0 + 5.0 * theta.cos() + 0.5 * phi.sin(),
            beta1: 0.8 + 0.2 * theta.sin(),
            beta2: 0.5,
            rho: 0.6,
            a: (0..s.k).map(|k| 1.5 / (k + 1) as f64 * theta.sin()).collect(),
            b: (0..s.k).map(|k| 0.4 / (k + 1) as f64 * phi.cos()).collect(),
            sigma: 1.0 + 0.3 * theta.sin().powi(2),
        })
        .collect();
    let trend = TrendParams::from_records(spec, s.k, s.tau, records)?;
    let noise = NoiseField::constant(spec, s.noise_variance)?;
    let config = TrainConfig {
        k: s.k,
        tau: s.tau,
        order: s.order,
        innovation: InnovationConfig::default(),
        seed: s.seed,
    };
    let provenance = Provenance::new(&spec, 0, 0, &config, &innovation);
    Ok(EmulatorModel {
        spec,
        trend,
        forcing: synthetic_forcing(s.n_years),
        var,
        innovation,
        noise,
        provenance,
    })
}
