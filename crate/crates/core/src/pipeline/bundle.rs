use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::mpchol::Variant;
use crate::stochastic::{InnovationModel, NoiseField, VarModel};
use crate::trend::{ForcingTrajectory, TrendParams};

use super::{EmulatorModel, TrainConfig};

pub const TREND_FILE: &str = "trend.bin";
pub const VAR_FILE: &str = "var.bin";
pub const UCOV_FILE: &str = "ucov.bin";
pub const NOISE_FILE: &str = "noise.bin";
pub const FORCING_FILE: &str = "forcing.csv";
pub const PROVENANCE_FILE: &str = "provenance.json";

/// Training metadata stored alongside the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub format_version: u32,
    pub n_theta: usize,
    pub n_phi: usize,
    pub band_limit: usize,
    pub n_times: usize,
    pub n_ensembles: usize,
    pub k: usize,
    pub tau: usize,
    pub order: usize,
    pub seed: u64,
    pub variant: Variant,
    pub band_width_dp: usize,
    pub sp_fraction: f64,
    pub tile_size: usize,
    pub nugget: f64,
    pub factor_error: f64,
    pub residual_mean_norm: f64,
}

impl Provenance {
    pub(crate) fn new(spec: &GridSpec, n_times: usize, n_ensembles: usize, config: &TrainConfig, innovation: &InnovationModel) -> Self {
        Self {
            format_version: 1,
            n_theta: spec.n_theta(),
            n_phi: spec.n_phi(),
            band_limit: spec.band_limit(),
            n_times,
            n_ensembles,
            k: config.k,
            tau: config.tau,
            order: config.order,
            seed: config.seed,
            variant: config.innovation.map.variant,
            band_width_dp: config.innovation.map.band_width_dp,
            sp_fraction: config.innovation.map.sp_fraction,
            tile_size: config.innovation.tile_size,
            nugget: innovation.nugget(),
            factor_error: innovation.factor_error(),
            residual_mean_norm: innovation.residual_mean_norm(),
        }
    }
}

impl EmulatorModel {
    /// Writes the bundle directory, creating it if needed.
    pub fn save(&self, dir: &Path) -> Result<()> {
        self.check_complete()?;
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.trend.save(&dir.join(TREND_FILE))?;
        self.var.save(&dir.join(VAR_FILE))?;
        self.innovation.save(&dir.join(UCOV_FILE))?;
        self.noise.save(&dir.join(NOISE_FILE))?;
        self.forcing.to_csv(&dir.join(FORCING_FILE))?;
        let path = dir.join(PROVENANCE_FILE);
        let json = serde_json::to_string_pretty(&self.provenance)? + "\n";
        std::fs::write(&path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let missing: Vec<&str> = [TREND_FILE, VAR_FILE, UCOV_FILE, NOISE_FILE, FORCING_FILE, PROVENANCE_FILE]
            .into_iter()
            .filter(|f| !dir.join(f).exists())
            .collect();
        if !missing.is_empty() {
            return Err(Error::IncompleteModel(format!(
                "{} lacks {}",
                dir.display(),
                missing.join(", ")
            )));
        }
        let trend = TrendParams::load(&dir.join(TREND_FILE))?;
        let var = VarModel::load(&dir.join(VAR_FILE))?;
        let innovation = InnovationModel::load(&dir.join(UCOV_FILE))?;
        let noise = NoiseField::load(&dir.join(NOISE_FILE))?;
        let forcing = load_forcing(&dir.join(FORCING_FILE))?;
        let path = dir.join(PROVENANCE_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let provenance: Provenance = serde_json::from_str(&text)?;
        let model = Self {
            spec: *trend.spec(),
            trend,
            forcing,
            var,
            innovation,
            noise,
            provenance,
        };
        model.check_complete()?;
        Ok(model)
    }
}

/// A bundle written without forcing holds only the CSV header.
fn load_forcing(path: &Path) -> Result<ForcingTrajectory> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.lines().skip(1).all(|l| l.trim().is_empty()) {
        return Ok(ForcingTrajectory::none());
    }
    ForcingTrajectory::from_csv(path, 1)
}
