//! Equiangular grid geometry and gridded field storage.
//!
//! Rings are indexed by colatitude θ from the north pole (θ = 0) to the south
//! pole (θ = π), both poles included. Values are stored row-major by ring, so a
//! ring of `n_phi` longitudes is contiguous.

mod io;
mod spline;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::NormalSampler;
use crate::sht::{HarmonicVector, ShtPlan};

pub use io::{load_field_series, save_field_series, write_csv_slice};
pub use spline::{upsample_spline, CubicSpline};

/// Mean Earth arc length of one degree, in km.
pub const KM_PER_DEGREE: f64 = 111.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    n_theta: usize,
    n_phi: usize,
    band_limit: usize,
}

impl GridSpec {
    /// Validates `L <= min(n_theta - 1, (n_phi + 1) / 2)`.
    pub fn new(n_theta: usize, n_phi: usize, band_limit: usize) -> Result<Self> {
        let admissible = band_limit >= 1
            && n_theta >= 2
            && n_phi >= 1
            && band_limit < n_theta
            && 2 * band_limit <= n_phi + 1;
        if !admissible {
            return Err(Error::Inadmissible {
                n_theta,
                n_phi,
                band_limit,
            });
        }
        Ok(Self {
            n_theta,
            n_phi,
            band_limit,
        })
    }

    /// The `(L + 1) x 2L` grid, e.g. 721 x 1440 for L = 720.
    pub fn from_band_limit(band_limit: usize) -> Result<Self> {
        Self::new(band_limit + 1, 2 * band_limit, band_limit)
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn band_limit(&self) -> usize {
        self.band_limit
    }

    pub fn n_points(&self) -> usize {
        self.n_theta * self.n_phi
    }

    /// Number of harmonic coefficients of a real field, `L^2`.
    pub fn n_coeffs(&self) -> usize {
        self.band_limit * self.band_limit
    }

    /// Colatitude of ring `i` (0-based).
    pub fn theta(&self, i: usize) -> f64 {
        PI * i as f64 / (self.n_theta - 1) as f64
    }

    /// Longitude of column `j` (0-based).
    pub fn phi(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n_phi as f64
    }

    pub fn thetas(&self) -> Vec<f64> {
        (0..self.n_theta).map(|i| self.theta(i)).collect()
    }

    pub fn phis(&self) -> Vec<f64> {
        (0..self.n_phi).map(|j| self.phi(j)).collect()
    }

    /// Same grid, different band limit (validated).
    pub fn with_band_limit(&self, band_limit: usize) -> Result<Self> {
        Self::new(self.n_theta, self.n_phi, band_limit)
    }

    /// Per-point quadrature weights for ∫∫ g sinθ dθ dφ, one value per ring.
    ///
    /// Exact for g whose longitude average extends to a trigonometric
    /// polynomial of degree at most `n_theta - 2` around the full meridian
    /// circle and whose longitudinal wavenumbers stay below `n_phi`. The
    /// product of two fields band-limited at L qualifies once
    /// `n_theta >= 2L` and `n_phi >= 2L - 1`.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let nt = self.n_theta;
        let m_ext = 2 * nt - 2;
        let qmax = nt as i64 - 2;
        let dphi = 2.0 * PI / self.n_phi as f64;
        (0..nt)
            .map(|i| {
                let theta = self.theta(i);
                // The θ and 2π - θ samples share one ring, so the odd-q terms
                // of Σ_q I(q) e^{-iqθ} cancel and only the cosine part remains.
                let mut w = 0.0;
                for q in (-qmax..=qmax).filter(|q| q % 2 == 0) {
                    w += crate::sht::i_integral(q).re * (q as f64 * theta).cos();
                }
                w /= m_ext as f64;
                // interior rings appear twice on the extended circle
                let mult = if i == 0 || i == nt - 1 { 1.0 } else { 2.0 };
                w * mult * dphi
            })
            .collect()
    }
}

/// One row of the band-limit / resolution table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolutionRow {
    pub band_limit: usize,
    /// 180 / L.
    pub degrees: f64,
    /// 180 · 111.2 / L.
    pub km: f64,
    /// `(L - 1) · 2L` spatial points.
    pub points: u64,
    /// `2 L^2 / 10^6`, the leading-order point count in millions.
    pub points_millions_approx: f64,
}

pub fn resolution_row(band_limit: usize) -> ResolutionRow {
    let l = band_limit as f64;
    ResolutionRow {
        band_limit,
        degrees: 180.0 / l,
        km: 180.0 * KM_PER_DEGREE / l,
        points: (band_limit as u64).saturating_sub(1) * 2 * band_limit as u64,
        points_millions_approx: 2.0 * l * l / 1e6,
    }
}

/// A real field on the grid at one time step of one ensemble member.
#[derive(Debug, Clone, PartialEq)]
pub struct EquiangularField {
    spec: GridSpec,
    values: Vec<f64>,
    time_index: usize,
    ensemble_index: usize,
}

impl EquiangularField {
    pub fn new(spec: GridSpec, values: Vec<f64>, time_index: usize, ensemble_index: usize) -> Result<Self> {
        if values.len() != spec.n_points() {
            return Err(Error::ShapeMismatch(format!(
                "field has {} values, grid {}x{} needs {}",
                values.len(),
                spec.n_theta,
                spec.n_phi,
                spec.n_points()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!(
                    "ring {}, column {} (t={time_index}, r={ensemble_index})",
                    k / spec.n_phi,
                    k % spec.n_phi
                ),
            });
        }
        Ok(Self {
            spec,
            values,
            time_index,
            ensemble_index,
        })
    }

    /// Unchecked constructor for values produced by this crate's own arithmetic.
    pub(crate) fn from_parts(spec: GridSpec, values: Vec<f64>, time_index: usize, ensemble_index: usize) -> Self {
        debug_assert_eq!(values.len(), spec.n_points());
        Self {
            spec,
            values,
            time_index,
            ensemble_index,
        }
    }

    pub fn constant(spec: GridSpec, value: f64) -> Self {
        Self::from_parts(spec, vec![value; spec.n_points()], 1, 1)
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(spec.n_points());
        for i in 0..spec.n_theta {
            let theta = spec.theta(i);
            for j in 0..spec.n_phi {
                values.push(f(theta, spec.phi(j)));
            }
        }
        Self::new(spec, values, 1, 1)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.spec.n_phi + j]
    }

    pub fn ring(&self, i: usize) -> &[f64] {
        let n = self.spec.n_phi;
        &self.values[i * n..(i + 1) * n]
    }

    pub fn time_index(&self) -> usize {
        self.time_index
    }

    pub fn ensemble_index(&self) -> usize {
        self.ensemble_index
    }

    pub fn with_indices(mut self, time_index: usize, ensemble_index: usize) -> Self {
        self.time_index = time_index;
        self.ensemble_index = ensemble_index;
        self
    }

    pub fn max_abs_diff(&self, other: &EquiangularField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Fields over `t = 1..T` for ensembles `r = 1..R`, stored ensemble-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSeries {
    spec: GridSpec,
    n_times: usize,
    n_ensembles: usize,
    fields: Vec<EquiangularField>,
}

impl FieldSeries {
    /// `fields` must be ordered `(r, t)` with `t` fastest.
    pub fn new(spec: GridSpec, n_times: usize, n_ensembles: usize, fields: Vec<EquiangularField>) -> Result<Self> {
        if n_times == 0 || n_ensembles == 0 {
            return Err(Error::InvalidArgument(
                "a series needs T >= 1 and R >= 1".into(),
            ));
        }
        if fields.len() != n_times * n_ensembles {
            return Err(Error::ShapeMismatch(format!(
                "{} fields supplied for T={n_times}, R={n_ensembles}",
                fields.len()
            )));
        }
        if let Some(f) = fields.iter().find(|f| f.spec != spec) {
            return Err(Error::ShapeMismatch(format!(
                "member (t={}, r={}) has grid {:?}, series has {:?}",
                f.time_index, f.ensemble_index, f.spec, spec
            )));
        }
        let fields = fields
            .into_iter()
            .enumerate()
            .map(|(k, f)| f.with_indices(k % n_times + 1, k / n_times + 1))
            .collect();
        Ok(Self {
            spec,
            n_times,
            n_ensembles,
            fields,
        })
    }

    pub fn single(field: EquiangularField) -> Self {
        let spec = field.spec;
        Self {
            spec,
            n_times: 1,
            n_ensembles: 1,
            fields: vec![field.with_indices(1, 1)],
        }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn n_ensembles(&self) -> usize {
        self.n_ensembles
    }

    /// Member at ensemble `r` and time `t`, both 0-based.
    pub fn get(&self, r: usize, t: usize) -> &EquiangularField {
        &self.fields[r * self.n_times + t]
    }

    pub fn fields(&self) -> &[EquiangularField] {
        &self.fields
    }

    pub fn into_fields(self) -> Vec<EquiangularField> {
        self.fields
    }

    /// Series restricted to times `start..end` (0-based, exclusive end).
    pub fn time_window(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n_times {
            return Err(Error::OutOfRange(format!(
                "time window {start}..{end} of a {}-step series",
                self.n_times
            )));
        }
        let mut out = Vec::with_capacity((end - start) * self.n_ensembles);
        for r in 0..self.n_ensembles {
            for t in start..end {
                out.push(self.get(r, t).clone());
            }
        }
        Self::new(self.spec, end - start, self.n_ensembles, out)
    }
}

/// Draws `L^2` standard-normal coefficients from `seed` and synthesises them.
pub fn synth_bandlimited(spec: GridSpec, seed: u64) -> Result<EquiangularField> {
    let plan = ShtPlan::new(spec)?;
    Ok(synth_bandlimited_with_plan(&plan, seed).0)
}

/// Like [`synth_bandlimited`] but reuses a plan and also returns the coefficients.
pub fn synth_bandlimited_with_plan(plan: &ShtPlan, seed: u64) -> (EquiangularField, HarmonicVector) {
    let l = plan.spec().band_limit();
    let mut sampler = NormalSampler::new(seed);
    let mut coeffs = vec![0.0; l * l];
    sampler.fill_normal(&mut coeffs);
    let coeffs = HarmonicVector::from_parts(l, coeffs);
    let field = plan.inverse_unchecked(&coeffs);
    (field, coeffs)
}
