use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

use super::precision::{PrecisionMap, Variant};
use super::scheduler::ConversionSite;
use super::tile::TiledMatrix;

/// Flat summary of one factorisation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorizationStats {
    pub n: usize,
    pub tile_size: usize,
    pub n_tiles: usize,
    pub variant: Variant,
    pub band_width_dp: usize,
    pub sp_fraction: f64,
    pub workers: usize,
    pub conversion_site: ConversionSite,
    pub tiles_dp: usize,
    pub tiles_sp: usize,
    pub tiles_hp: usize,
    pub storage_bytes: usize,
    pub all_dp_bytes: usize,
    pub bytes_saved: usize,
    pub saved_fraction: f64,
    pub potrf: usize,
    pub trsm: usize,
    pub syrk: usize,
    pub gemm: usize,
    pub conversions: usize,
    pub saturations: usize,
    pub wall_clock_s: f64,
    pub relative_residual: Option<f64>,
}

pub(crate) struct RunInfo {
    pub workers: usize,
    pub site: ConversionSite,
    pub conversions: usize,
    pub saturations: usize,
    pub wall_clock_s: f64,
}

impl FactorizationStats {
    pub(crate) fn collect(matrix: &TiledMatrix, map: &PrecisionMap, run: RunInfo) -> Self {
        let (tiles_dp, tiles_sp, tiles_hp) = matrix.grid().counts();
        let counts = super::graph::build_task_graph(matrix.n_tiles()).kernel_counts();
        let storage_bytes = matrix.storage_bytes();
        let all_dp_bytes = matrix.all_dp_bytes();
        Self {
            n: matrix.n(),
            tile_size: matrix.tile_size(),
            n_tiles: matrix.n_tiles(),
            variant: map.variant,
            band_width_dp: map.band_width_dp,
            sp_fraction: map.sp_fraction,
            workers: run.workers,
            conversion_site: run.site,
            tiles_dp,
            tiles_sp,
            tiles_hp,
            storage_bytes,
            all_dp_bytes,
            bytes_saved: all_dp_bytes - storage_bytes,
            saved_fraction: (all_dp_bytes - storage_bytes) as f64 / all_dp_bytes as f64,
            potrf: counts.potrf,
            trsm: counts.trsm,
            syrk: counts.syrk,
            gemm: counts.gemm,
            conversions: run.conversions,
            saturations: run.saturations + matrix.input_saturations(),
            wall_clock_s: run.wall_clock_s,
            relative_residual: None,
        }
    }

    /// Same report with the timing zeroed, for run-to-run comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_clock_s: 0.0,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }
}
