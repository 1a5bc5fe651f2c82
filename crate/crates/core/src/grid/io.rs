use std::io::Write;
use std::path::Path;

use crate::binio::{read_file, ByteReader, ByteWriter};
use crate::error::{Error, Result};

use super::{EquiangularField, FieldSeries, GridSpec};

const MAGIC: &[u8; 4] = b"SPHF";
const VERSION: u32 = 1;

/// Reads an SPHF container. The header is validated before any payload is
/// interpreted, so a bad band limit is reported even for truncated files.
pub fn load_field_series(path: &Path) -> Result<FieldSeries> {
    let data = read_file(path)?;
    decode(&data)
}

pub fn save_field_series(series: &FieldSeries, path: &Path) -> Result<()> {
    encode(series)?.write_to(path)
}

pub(crate) fn decode(data: &[u8]) -> Result<FieldSeries> {
    let mut rd = ByteReader::new("SPHF", data, MAGIC)?;
    let version = rd.u32("version")?;
    if version != VERSION {
        return Err(rd.malformed(format!("unsupported version {version}")));
    }
    let n_theta = rd.u32("n_theta")? as usize;
    let n_phi = rd.u32("n_phi")? as usize;
    let l = rd.u32("band limit")? as usize;
    let t = rd.u32("T")? as usize;
    let r = rd.u32("R")? as usize;
    let spec = GridSpec::new(n_theta, n_phi, l)?;
    if t == 0 || r == 0 {
        return Err(rd.malformed(format!("empty series (T={t}, R={r})")));
    }
    let per = spec.n_points();
    let total = per
        .checked_mul(t)
        .and_then(|v| v.checked_mul(r))
        .ok_or_else(|| rd.malformed("payload size overflows"))?;
    let expected = total.saturating_mul(8);
    let available = data.len().saturating_sub(28);
    if available != expected {
        return Err(Error::ShapeMismatch(format!(
            "SPHF header declares {r}x{t}x{n_theta}x{n_phi} values ({expected} bytes) but the payload has {available} bytes"
        )));
    }
    let payload = rd.f64s(total, "payload")?;
    rd.finish()?;
    let mut fields = Vec::with_capacity(r * t);
    for (k, chunk) in payload.chunks_exact(per).enumerate() {
        fields.push(EquiangularField::new(spec, chunk.to_vec(), k % t + 1, k / t + 1)?);
    }
    FieldSeries::new(spec, t, r, fields)
}

pub(crate) fn encode(series: &FieldSeries) -> Result<ByteWriter> {
    let spec = series.spec();
    let mut w = ByteWriter::with_magic(MAGIC, 24 + series.fields().len() * spec.n_points() * 8);
    w.u32(VERSION);
    w.usize_u32(spec.n_theta())?
        .usize_u32(spec.n_phi())?
        .usize_u32(spec.band_limit())?
        .usize_u32(series.n_times())?
        .usize_u32(series.n_ensembles())?;
    for f in series.fields() {
        w.f64s(f.values());
    }
    Ok(w)
}

/// One `theta,phi,value` row per grid point, angles in radians.
pub fn write_csv_slice(field: &EquiangularField, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let spec = field.spec();
    let io = |e| Error::io(path, e);
    writeln!(out, "theta,phi,value").map_err(io)?;
    for i in 0..spec.n_theta() {
        let theta = spec.theta(i);
        for j in 0..spec.n_phi() {
            writeln!(out, "{theta:.17e},{:.17e},{:.17e}", spec.phi(j), field.get(i, j)).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(n_theta: u32, n_phi: u32, l: u32, t: u32, r: u32) -> Vec<u8> {
        let mut v = b"SPHF".to_vec();
        for x in [1, n_theta, n_phi, l, t, r] {
            v.extend_from_slice(&x.to_le_bytes());
        }
        v
    }

    #[test]
    fn minimal_file() {
        let mut data = header(3, 4, 2, 1, 1);
        for k in 0..12 {
            data.extend_from_slice(&(k as f64).to_le_bytes());
        }
        let s = decode(&data).unwrap();
        assert_eq!(s.fields().len(), 1);
        assert_eq!(s.get(0, 0).get(2, 3), 11.0);
        let back = encode(&s).unwrap().into_bytes();
        assert_eq!(back, data);
    }

    #[test]
    fn rejects_inadmissible_header() {
        let mut data = header(3, 2, 2, 1, 1);
        data.extend(std::iter::repeat(0u8).take(6 * 8));
        assert!(matches!(decode(&data), Err(Error::Inadmissible { .. })));
    }

    #[test]
    fn rejects_nan_and_short_payload() {
        let mut data = header(3, 4, 2, 1, 1);
        for k in 0..12 {
            let v = if k == 7 { f64::NAN } else { 0.0 };
            data.extend_from_slice(&v.to_le_bytes());
        }
        assert!(matches!(decode(&data), Err(Error::NonFinite { .. })));
        data.truncate(data.len() - 8);
        assert!(matches!(decode(&data), Err(Error::ShapeMismatch(_))));
        assert!(matches!(decode(b"NOPE"), Err(Error::Format { .. })));
    }
}
