//! Train → emulate → validate orchestration and the on-disk model bundle.

mod bundle;
mod synthetic;
mod validate;

pub use bundle::Provenance;
pub use synthetic::{synthetic_forcing, synthetic_model, SyntheticSpec};
pub use validate::{degree_spectrum, validate, ValidationReport, DEFAULT_FLAG_LIMIT, Z_FLAG};

use crate::error::{Error, Result};
use crate::grid::{FieldSeries, GridSpec};
use crate::mpchol::Variant;
use crate::sht::ShtPlan;
use crate::stochastic::{
    estimate_innovation_covariance, fit_noise_field, fit_var, InnovationConfig, InnovationModel, NoiseField, VarModel,
    DEFAULT_ORDER,
};
use crate::trend::{self, ForcingTrajectory, TrendParams, DEFAULT_K};

/// A complete trained emulator.
#[derive(Debug, Clone, PartialEq)]
pub struct EmulatorModel {
    pub spec: GridSpec,
    pub trend: TrendParams,
    pub forcing: ForcingTrajectory,
    pub var: VarModel,
    pub innovation: InnovationModel,
    pub noise: NoiseField,
    pub provenance: Provenance,
}

impl EmulatorModel {
    /// Checks that all components describe the same grid and band limit.
    pub fn check_complete(&self) -> Result<()> {
        let l = self.spec.band_limit();
        let problem = if *self.trend.spec() != self.spec {
            Some(format!("trend grid {:?}", self.trend.spec()))
        } else if self.var.band_limit() != l {
            Some(format!("VAR band limit {}", self.var.band_limit()))
        } else if self.innovation.dim() != l * l {
            Some(format!("innovation dimension {}", self.innovation.dim()))
        } else if *self.noise.spec() != self.spec {
            Some(format!("noise grid {:?}", self.noise.spec()))
        } else {
            None
        };
        match problem {
            Some(p) => Err(Error::IncompleteModel(format!("{p} does not match model grid {:?}", self.spec))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub k: usize,
    pub tau: usize,
    pub order: usize,
    pub innovation: InnovationConfig,
    /// Recorded in the provenance; training itself draws no random numbers.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            tau: 12,
            order: DEFAULT_ORDER,
            innovation: InnovationConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.innovation.map.variant = variant;
        self
    }
}

/// Training result with fit diagnostics that are not part of the bundle.
#[derive(Debug, Clone)]
pub struct Training {
    pub model: EmulatorModel,
    /// Standard errors of the AR diagonals, indexed `[lag - 1][coefficient]`.
    pub var_std_errors: Vec<Vec<f64>>,
}

pub fn train(series: &FieldSeries, forcing: &ForcingTrajectory, config: &TrainConfig) -> Result<EmulatorModel> {
    train_detailed(series, forcing, config).map(|t| t.model)
}

/// fit_trend → detrend → forward SHT → fit_var → innovation covariance →
/// noise field. Errors carry the name of the failing stage.
pub fn train_detailed(series: &FieldSeries, forcing: &ForcingTrajectory, config: &TrainConfig) -> Result<Training> {
    let spec = *series.spec();
    let (t_len, r_len) = (series.n_times(), series.n_ensembles());
    let trend = trend::fit_trend(series, forcing, config.k, config.tau).map_err(Error::at_stage("fit_trend"))?;
    let z = trend::detrend(series, &trend, forcing).map_err(Error::at_stage("detrend"))?;
    let plan = ShtPlan::new(spec).map_err(Error::at_stage("forward_sht"))?;
    let coeffs = plan.forward_batch(&z).map_err(Error::at_stage("forward_sht"))?;
    let fit = fit_var(&coeffs, t_len, r_len, config.order).map_err(Error::at_stage("fit_var"))?;
    let innovation =
        estimate_innovation_covariance(&fit.residuals, &config.innovation).map_err(Error::at_stage("innovation"))?;
    let reconstructed = plan.inverse_batch(&coeffs, t_len, r_len).map_err(Error::at_stage("noise"))?;
    let noise = fit_noise_field(&z, &reconstructed).map_err(Error::at_stage("noise"))?;
    let provenance = Provenance::new(&spec, t_len, r_len, config, &innovation);
    let model = EmulatorModel {
        spec,
        trend,
        forcing: forcing.clone(),
        var: fit.model,
        innovation,
        noise,
        provenance,
    };
    Ok(Training {
        model,
        var_std_errors: fit.std_errors,
    })
}
