use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::EquiangularField;

use super::HarmonicVector;

/// Largest band limit the brute-force oracle accepts.
pub const ORACLE_MAX_BAND_LIMIT: usize = 24;

/// Orthonormal associated Legendre values `Y_ℓm(θ, 0)` for `0 <= m <= ℓ < L`,
/// Condon–Shortley phase included, at index `ℓ(ℓ+1)/2 + m`.
pub fn legendre_table(band_limit: usize, theta: f64) -> Vec<f64> {
    let l = band_limit;
    let (s, c) = theta.sin_cos();
    let mut p = vec![0.0; l * (l + 1) / 2];
    let idx = |deg: usize, m: usize| deg * (deg + 1) / 2 + m;
    let mut pmm = 1.0 / (4.0 * PI).sqrt();
    for m in 0..l {
        if m > 0 {
            pmm *= -((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * s;
        }
        p[idx(m, m)] = pmm;
        if m + 1 < l {
            p[idx(m + 1, m)] = ((2 * m + 3) as f64).sqrt() * c * pmm;
        }
        for deg in m + 2..l {
            let a = |d: usize| (((4 * d * d - 1) as f64) / ((d * d - m * m) as f64)).sqrt();
            p[idx(deg, m)] = a(deg) * (c * p[idx(deg - 1, m)] - p[idx(deg - 2, m)] / a(deg - 1));
        }
    }
    p
}

/// Reference coefficients by direct quadrature of `∫∫ F Y*_ℓm sinθ dθ dφ`:
/// trapezoid weights in θ, uniform weights and an explicit DFT sum in φ.
///
/// The trapezoid rule converges only as `h^2` on `[0, π]`, so agreement to
/// `1e-6` needs on the order of a thousand rings.
pub fn quadrature_oracle_sht(field: &EquiangularField, band_limit: usize) -> Result<HarmonicVector> {
    let spec = field.spec();
    if band_limit == 0 || band_limit > ORACLE_MAX_BAND_LIMIT {
        return Err(Error::InvalidArgument(format!(
            "oracle band limit must be in 1..={ORACLE_MAX_BAND_LIMIT}, got {band_limit}"
        )));
    }
    if spec.n_theta() < 4 * band_limit || spec.n_phi() < 2 * band_limit {
        return Err(Error::InvalidArgument(format!(
            "oracle needs n_theta >= 4L and n_phi >= 2L, got {}x{} for L={band_limit}",
            spec.n_theta(),
            spec.n_phi()
        )));
    }
    let nt = spec.n_theta();
    let np = spec.n_phi();
    let h = PI / (nt - 1) as f64;
    let dphi = 2.0 * PI / np as f64;
    let mut acc = vec![Complex64::new(0.0, 0.0); band_limit * (band_limit + 1) / 2];
    for i in 0..nt {
        let theta = spec.theta(i);
        let end = if i == 0 || i == nt - 1 { 0.5 } else { 1.0 };
        let w = end * h * theta.sin() * dphi;
        if w == 0.0 {
            continue;
        }
        let ring = field.ring(i);
        let p = legendre_table(band_limit, theta);
        for m in 0..band_limit {
            let mut g = Complex64::new(0.0, 0.0);
            for (j, v) in ring.iter().enumerate() {
                g += Complex64::from_polar(*v, -(m as f64) * spec.phi(j));
            }
            for deg in m..band_limit {
                let k = deg * (deg + 1) / 2 + m;
                acc[k] += g * (w * p[k]);
            }
        }
    }
    let mut out = HarmonicVector::zeros(band_limit);
    for deg in 0..band_limit {
        for m in 0..=deg {
            out.set(deg, m, acc[deg * (deg + 1) / 2 + m]);
        }
    }
    Ok(out)
}
