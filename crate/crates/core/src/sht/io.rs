use std::path::Path;

use crate::binio::{read_file, ByteReader, ByteWriter};
use crate::error::{Error, Result};

use super::HarmonicVector;

const MAGIC: &[u8; 4] = b"SPHC";

/// Coefficient vectors ordered `(r, t)` with `t` fastest, as in the SPHC file.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    pub band_limit: usize,
    pub n_times: usize,
    pub n_ensembles: usize,
    pub vectors: Vec<HarmonicVector>,
}

pub fn save_coefficients(set: &CoefficientSet, path: &Path) -> Result<()> {
    let l = set.band_limit;
    if set.vectors.len() != set.n_times * set.n_ensembles {
        return Err(Error::ShapeMismatch(format!(
            "{} vectors for T={}, R={}",
            set.vectors.len(),
            set.n_times,
            set.n_ensembles
        )));
    }
    if set.vectors.iter().any(|v| v.band_limit() != l) {
        return Err(Error::ShapeMismatch("mixed band limits in coefficient set".into()));
    }
    let mut w = ByteWriter::with_magic(MAGIC, 12 + set.vectors.len() * l * l * 8);
    w.usize_u32(l)?.usize_u32(set.n_times)?.usize_u32(set.n_ensembles)?;
    for v in &set.vectors {
        w.f64s(v.as_slice());
    }
    w.write_to(path)
}

pub fn load_coefficients(path: &Path) -> Result<CoefficientSet> {
    let data = read_file(path)?;
    let mut rd = ByteReader::new("SPHC", &data, MAGIC)?;
    let l = rd.u32("band limit")? as usize;
    let t = rd.u32("T")? as usize;
    let r = rd.u32("R")? as usize;
    if l == 0 || t == 0 || r == 0 {
        return Err(rd.malformed(format!("empty header (L={l}, T={t}, R={r})")));
    }
    let mut vectors = Vec::with_capacity(t * r);
    for _ in 0..t * r {
        vectors.push(HarmonicVector::new(l, rd.f64s(l * l, "coefficients")?)?);
    }
    rd.finish()?;
    Ok(CoefficientSet {
        band_limit: l,
        n_times: t,
        n_ensembles: r,
        vectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.sphc");
        let set = CoefficientSet {
            band_limit: 2,
            n_times: 2,
            n_ensembles: 1,
            vectors: vec![
                HarmonicVector::new(2, vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
                HarmonicVector::unit(2, 3),
            ],
        };
        save_coefficients(&set, &path).unwrap();
        assert_eq!(std::fs::metadata(&path).unwrap().len(), 16 + 64);
        assert_eq!(load_coefficients(&path).unwrap(), set);
    }
}
