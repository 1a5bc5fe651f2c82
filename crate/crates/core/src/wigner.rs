//! Wigner-d values at β = π/2 and the coupling tensor Q of the transform.
//!
//! Only non-negative orders are stored. For degree ℓ the block
//! `d^ℓ_{m'',m}(π/2)`, `0 <= m'', m <= ℓ`, occupies `(ℓ+1)^2` consecutive
//! values indexed `[m''][m]`; blocks follow each other by ascending ℓ.
//! Negative orders are reconstructed from
//! `d_{-m'',m} = (-1)^{ℓ+m} d_{m'',m}` and `d_{a,b} = (-1)^{b-a} d_{-a,-b}`.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use crate::binio::{read_file, ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::par;

/// Default ceiling on the memory a table build may allocate (2 GiB).
pub const DEFAULT_MEMORY_CAP: u64 = 2 << 30;

const MAGIC: &[u8; 4] = b"WIGD";
const VERSION: u32 = 1;
const DRIFT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct WignerTables {
    band_limit: usize,
    d: Vec<f64>,
    /// `Q_{ℓ,m,m''}` without the `i^{-m}` phase, row `ℓ(ℓ+1)/2 + m`, column `m''`.
    q: Vec<f64>,
    renormalized: usize,
}

fn block_offset(l: usize) -> usize {
    l * (l + 1) * (2 * l + 1) / 6
}

fn sign(k: i64) -> f64 {
    if k.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

impl WignerTables {
    pub fn build(band_limit: usize) -> Result<Self> {
        Self::build_with_cap(band_limit, DEFAULT_MEMORY_CAP)
    }

    /// Bytes needed for the d blocks plus the Q tensor at band limit `L`.
    pub fn memory_estimate(band_limit: usize) -> u64 {
        let l = band_limit as u64;
        let d = l * (l + 1) * (2 * l + 1) / 6;
        let q = (l * l + l) / 2 * l;
        (d + q) * 8
    }

    pub fn build_with_cap(band_limit: usize, cap: u64) -> Result<Self> {
        if band_limit == 0 {
            return Err(Error::InvalidArgument("Wigner tables need L >= 1".into()));
        }
        let needed = Self::memory_estimate(band_limit);
        if needed > cap {
            return Err(Error::MemoryCap { needed, cap });
        }
        let (d, renormalized) = build_d(band_limit);
        if renormalized > 0 {
            log::warn!("Wigner recursion drift: renormalised {renormalized} columns at L={band_limit}");
        }
        let q = build_q(band_limit, &d);
        Ok(Self {
            band_limit,
            d,
            q,
            renormalized,
        })
    }

    pub fn band_limit(&self) -> usize {
        self.band_limit
    }

    /// Number of columns the stability guard had to renormalise.
    pub fn renormalized_columns(&self) -> usize {
        self.renormalized
    }

    /// Entries of the compressed Q tensor, `(L^2 + L)/2 · L`.
    pub fn q_len(&self) -> usize {
        self.q.len()
    }

    /// The `(ℓ+1) x (ℓ+1)` block of non-negative orders, indexed `[m''][m]`.
    pub fn d_block(&self, l: usize) -> &[f64] {
        &self.d[block_offset(l)..block_offset(l + 1)]
    }

    /// `d^ℓ_{m'',m}(π/2)` for any orders with `|m''|, |m| <= ℓ < L`.
    pub fn d(&self, l: usize, m2: i64, m: i64) -> f64 {
        let li = l as i64;
        debug_assert!(m2.abs() <= li && m.abs() <= li && l < self.band_limit);
        if m < 0 {
            return sign(m - m2) * self.d(l, -m2, -m);
        }
        if m2 < 0 {
            return sign(li + m) * self.d(l, -m2, m);
        }
        self.d_block(l)[m2 as usize * (l + 1) + m as usize]
    }

    /// Real magnitude `sqrt((2ℓ+1)/4π) d_{m'',0} d_{m'',m}` for `m >= 0`.
    pub fn q_real(&self, l: usize, m: usize, m2: i64) -> f64 {
        let v = self.q[(l * (l + 1) / 2 + m) * self.band_limit + m2.unsigned_abs() as usize];
        if m2 < 0 {
            sign(m as i64) * v
        } else {
            v
        }
    }

    /// Row of Q for `(ℓ, m)` over `m'' = 0..L` (zero past ℓ).
    pub fn q_row(&self, l: usize, m: usize) -> &[f64] {
        let start = (l * (l + 1) / 2 + m) * self.band_limit;
        &self.q[start..start + self.band_limit]
    }

    /// Full tensor entry `Q_{ℓ,m,m''} = i^{-m} sqrt((2ℓ+1)/4π) d_{m'',0} d_{m'',m}`.
    pub fn q_lookup(&self, l: usize, m: i64, m2: i64) -> Result<Complex64> {
        let li = l as i64;
        if l >= self.band_limit || m.abs() > li || m2.abs() > li {
            return Err(Error::OutOfRange(format!(
                "Q index (ℓ={l}, m={m}, m''={m2}) outside band limit {}",
                self.band_limit
            )));
        }
        let magnitude = if m >= 0 {
            self.q_real(l, m as usize, m2)
        } else {
            ((2 * l + 1) as f64 / (4.0 * PI)).sqrt() * self.d(l, m2, 0) * self.d(l, m2, m)
        };
        Ok(i_pow_neg(m) * magnitude)
    }

    pub fn cache_path(dir: &Path, band_limit: usize) -> PathBuf {
        dir.join(format!("wigner_L{band_limit}.wigd"))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = ByteWriter::with_magic(MAGIC, 8 + self.d.len() * 8);
        w.u32(VERSION).usize_u32(self.band_limit)?;
        w.f64s(&self.d);
        w.write_to(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = read_file(path)?;
        let mut rd = ByteReader::new("WIGD", &data, MAGIC)?;
        let version = rd.u32("version")?;
        if version != VERSION {
            return Err(rd.malformed(format!("unsupported version {version}")));
        }
        let band_limit = rd.u32("band limit")? as usize;
        if band_limit == 0 {
            return Err(rd.malformed("band limit 0"));
        }
        let d = rd.f64s(block_offset(band_limit), "d blocks")?;
        rd.finish()?;
        if d.iter().any(|v| !v.is_finite() || v.abs() > 1.0 + DRIFT_TOLERANCE) {
            return Err(rd.malformed("table entries outside [-1, 1]"));
        }
        let q = build_q(band_limit, &d);
        Ok(Self {
            band_limit,
            d,
            q,
            renormalized: 0,
        })
    }

    /// Loads `wigner_L{L}.wigd` from `dir`, building and writing it when absent
    /// or unreadable. A failed write is logged, not fatal.
    pub fn load_or_build(dir: &Path, band_limit: usize) -> Result<Self> {
        let path = Self::cache_path(dir, band_limit);
        if path.exists() {
            match Self::load(&path) {
                Ok(t) if t.band_limit == band_limit => return Ok(t),
                Ok(_) => log::warn!("{} holds a different band limit; rebuilding", path.display()),
                Err(e) => log::warn!("ignoring unreadable Wigner cache: {e}"),
            }
        }
        let tables = Self::build(band_limit)?;
        if let Err(e) = tables.save(&path) {
            log::warn!("could not write Wigner cache: {e}");
        }
        Ok(tables)
    }
}

/// `i^{-m}`.
pub fn i_pow_neg(m: i64) -> Complex64 {
    match m.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

/// Edge values `d^ℓ_{ℓ,m}(π/2) = (-1)^{ℓ-m} sqrt(C(2ℓ, ℓ+m) / 4^ℓ)` for m = 0..=ℓ.
fn edge_values(l: usize) -> Vec<f64> {
    // log C(2ℓ, ℓ+m) - ℓ log 4, accumulated by ratios to stay in range.
    let mut log_c = 0.0;
    for k in 1..=l {
        log_c += ((2 * k - 1) as f64 / (2 * k) as f64).ln();
    }
    let mut out = Vec::with_capacity(l + 1);
    for m in 0..=l {
        out.push(sign((l - m) as i64) * (0.5 * log_c).exp());
        if m < l {
            log_c += ((l - m) as f64 / (l + m + 1) as f64).ln();
        }
    }
    out
}

fn build_d(band_limit: usize) -> (Vec<f64>, usize) {
    let mut d = vec![0.0; block_offset(band_limit)];
    let mut renormalized = 0;
    for l in 0..band_limit {
        let (done, rest) = d.split_at_mut(block_offset(l));
        let block = &mut rest[..(l + 1) * (l + 1)];
        let prev1 = if l >= 1 { &done[block_offset(l - 1)..] } else { &[][..] };
        let prev2 = if l >= 2 { &done[block_offset(l - 2)..block_offset(l - 1)] } else { &[][..] };
        let edge = edge_values(l);
        let width = l + 1;
        par::for_each_chunk_mut(block, width, |m2, row| {
            for (m, out) in row.iter_mut().enumerate() {
                *out = if m2 == l {
                    edge[m]
                } else if m == l {
                    sign((l - m2) as i64) * edge[m2]
                } else {
                    step(l, m2, m, prev1, prev2)
                };
            }
        });
        renormalized += guard_block(block, l);
    }
    (d, renormalized)
}

/// Three-term degree recurrence at cos β = 0 for `max(m'', m) < ℓ`.
fn step(l: usize, m2: usize, m: usize, prev1: &[f64], prev2: &[f64]) -> f64 {
    let s = |j: usize| -> f64 {
        let j2 = (j * j) as f64;
        ((j2 - (m * m) as f64) * (j2 - (m2 * m2) as f64)).max(0.0).sqrt()
    };
    let lf = l as f64;
    let s_l = s(l);
    if l == 1 || s_l == 0.0 {
        // Only m = m'' = 0 reaches ℓ = 1 here, and d^1_{00}(π/2) = cos(π/2) = 0.
        return 0.0;
    }
    let d1 = prev1[m2 * l + m];
    let d2 = if l >= 2 && m2 < l - 1 && m < l - 1 {
        prev2[m2 * (l - 1) + m]
    } else {
        0.0
    };
    let a = -((2 * l - 1) as f64) * (m * m2) as f64 * d1;
    let b = -lf * s(l - 1) * d2;
    (a + b) / ((lf - 1.0) * s_l)
}

/// Renormalises any column whose entries drifted outside `[-1, 1]`.
/// Each column of the full `(2ℓ+1)^2` matrix has unit norm, i.e.
/// `d_{0,m}^2 + 2 Σ_{m''>0} d_{m'',m}^2 = 1`.
fn guard_block(block: &mut [f64], l: usize) -> usize {
    let width = l + 1;
    let mut fixed = 0;
    for m in 0..width {
        if (0..width).all(|m2| block[m2 * width + m].abs() <= 1.0 + DRIFT_TOLERANCE) {
            continue;
        }
        let norm2: f64 = (0..width)
            .map(|m2| {
                let v = block[m2 * width + m];
                if m2 == 0 { v * v } else { 2.0 * v * v }
            })
            .sum();
        let scale = 1.0 / norm2.sqrt();
        for m2 in 0..width {
            block[m2 * width + m] *= scale;
        }
        fixed += 1;
    }
    fixed
}

fn build_q(band_limit: usize, d: &[f64]) -> Vec<f64> {
    let rows = (band_limit * band_limit + band_limit) / 2;
    let mut q = vec![0.0; rows * band_limit];
    par::for_each_chunk_mut(&mut q, band_limit, |row, out| {
        // invert row = ℓ(ℓ+1)/2 + m
        let mut l = ((((8 * row + 1) as f64).sqrt() - 1.0) / 2.0) as usize;
        while l * (l + 1) / 2 > row {
            l -= 1;
        }
        while (l + 1) * (l + 2) / 2 <= row {
            l += 1;
        }
        let m = row - l * (l + 1) / 2;
        let norm = ((2 * l + 1) as f64 / (4.0 * PI)).sqrt();
        let block = &d[block_offset(l)..block_offset(l + 1)];
        for m2 in 0..=l {
            out[m2] = norm * block[m2 * (l + 1)] * block[m2 * (l + 1) + m];
        }
    });
    q
}

/// `d^l_{m2,m}(π/2)` from the explicit factorial sum. Exact in double
/// precision for `l <= 12`.
pub fn wigner_brute_force(l: i64, m2: i64, m: i64) -> Result<f64> {
    if !(0..=12).contains(&l) || m.abs() > l || m2.abs() > l {
        return Err(Error::OutOfRange(format!(
            "brute-force Wigner d needs |m|, |m''| <= l <= 12, got (l={l}, m''={m2}, m={m})"
        )));
    }
    let fact = |n: i64| -> f64 { (1..=n).map(|k| k as f64).product() };
    let pre = (fact(l + m2) * fact(l - m2) * fact(l + m) * fact(l - m)).sqrt();
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let mut sum = 0.0;
    let s_min = 0.max(m - m2);
    let s_max = (l + m).min(l - m2);
    for s in s_min..=s_max {
        let denom = fact(l + m - s) * fact(s) * fact(m2 - m + s) * fact(l - m2 - s);
        let pc = 2 * l + m - m2 - 2 * s;
        let ps = m2 - m + 2 * s;
        sum += sign(m2 - m + s) * half.powi(pc as i32) * half.powi(ps as i32) / denom;
    }
    Ok(pre * sum)
}
