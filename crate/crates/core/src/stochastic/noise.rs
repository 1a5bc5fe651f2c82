use std::path::Path;

use crate::binio::{read_file, ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::grid::{FieldSeries, GridSpec};
use crate::par;

/// Per-location variance `v²` of the part of the field the band-limited
/// expansion cannot represent.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseField {
    spec: GridSpec,
    v_squared: Vec<f64>,
}

impl NoiseField {
    pub fn new(spec: GridSpec, v_squared: Vec<f64>) -> Result<Self> {
        if v_squared.len() != spec.n_points() {
            return Err(Error::ShapeMismatch(format!(
                "{} noise variances for {} grid points",
                v_squared.len(),
                spec.n_points()
            )));
        }
        if v_squared.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument("noise variances must be finite and non-negative".into()));
        }
        Ok(Self { spec, v_squared })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            spec,
            v_squared: vec![0.0; spec.n_points()],
        }
    }

    pub fn constant(spec: GridSpec, v_squared: f64) -> Result<Self> {
        Self::new(spec, vec![v_squared; spec.n_points()])
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn v_squared(&self) -> &[f64] {
        &self.v_squared
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = ByteWriter::with_magic(b"NOIS", 12 + self.v_squared.len() * 8);
        w.usize_u32(self.spec.n_theta())?
            .usize_u32(self.spec.n_phi())?
            .usize_u32(self.spec.band_limit())?;
        w.f64s(&self.v_squared);
        w.write_to(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = read_file(path)?;
        let mut rd = ByteReader::new("NOIS", &data, b"NOIS")?;
        let n_theta = rd.u32("n_theta")? as usize;
        let n_phi = rd.u32("n_phi")? as usize;
        let l = rd.u32("band limit")? as usize;
        let spec = GridSpec::new(n_theta, n_phi, l)?;
        let v = rd.f64s(spec.n_points(), "noise variances")?;
        rd.finish()?;
        Self::new(spec, v)
    }
}

/// Mean squared difference between the detrended series and its band-limited
/// reconstruction, per location, over all times and ensembles.
pub fn fit_noise_field(detrended: &FieldSeries, reconstructed: &FieldSeries) -> Result<NoiseField> {
    if detrended.spec() != reconstructed.spec()
        || detrended.n_times() != reconstructed.n_times()
        || detrended.n_ensembles() != reconstructed.n_ensembles()
    {
        return Err(Error::ShapeMismatch(
            "detrended and reconstructed series differ in grid or length".into(),
        ));
    }
    let spec = *detrended.spec();
    let count = detrended.fields().len() as f64;
    let v = par::map_range(spec.n_points(), |loc| {
        detrended
            .fields()
            .iter()
            .zip(reconstructed.fields())
            .map(|(a, b)| (a.values()[loc] - b.values()[loc]).powi(2))
            .sum::<f64>()
            / count
    });
    NoiseField::new(spec, v)
}
