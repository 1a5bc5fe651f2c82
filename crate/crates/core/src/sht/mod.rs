//! Exact spherical harmonic transforms on equiangular grids.
//!
//! The forward transform takes a DFT along every ring, extends each Fourier
//! mode `G_m(θ)` across the poles with `G_m(2π - θ) = (-1)^m G_m(θ)`, and
//! integrates against `sinθ` analytically in the Fourier basis of θ. The
//! result is then contracted with the Wigner coupling tensor Q. The inverse
//! runs the same factorisation backwards.
//!
//! Harmonics use the orthonormal, Condon–Shortley convention
//! `Y_ℓm(θ, φ) = sqrt((2ℓ+1)/4π) d^ℓ_{m0}(θ) e^{imφ}`.

mod io;
mod oracle;
mod plan;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub use io::{load_coefficients, save_coefficients, CoefficientSet};
pub use oracle::{legendre_table, quadrature_oracle_sht};
pub use plan::{build_plan, forward_sht, forward_sht_batch, inverse_sht, inverse_sht_batch, ShtPlan};

/// `∫_0^π e^{iqθ} sinθ dθ`.
pub fn i_integral(q: i64) -> Complex64 {
    if q.rem_euclid(2) == 1 {
        if q.abs() == 1 {
            Complex64::new(0.0, q as f64 * std::f64::consts::FRAC_PI_2)
        } else {
            Complex64::new(0.0, 0.0)
        }
    } else {
        let q = q as f64;
        Complex64::new(2.0 / (1.0 - q * q), 0.0)
    }
}

/// Real-packed coefficients of a real field.
///
/// Degree ℓ occupies indices `ℓ^2 .. (ℓ+1)^2`: first the real `m = 0` value,
/// then `(Re, Im)` of `f_ℓm` for `m = 1..=ℓ`. Negative orders follow from
/// `f_{ℓ,-m} = (-1)^m conj(f_ℓm)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicVector {
    band_limit: usize,
    coeffs: Vec<f64>,
}

impl HarmonicVector {
    pub fn new(band_limit: usize, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != band_limit * band_limit {
            return Err(Error::ShapeMismatch(format!(
                "{} coefficients supplied for band limit {band_limit} (need {})",
                coeffs.len(),
                band_limit * band_limit
            )));
        }
        if let Some(k) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("coefficient slot {k}"),
            });
        }
        Ok(Self { band_limit, coeffs })
    }

    pub(crate) fn from_parts(band_limit: usize, coeffs: Vec<f64>) -> Self {
        debug_assert_eq!(coeffs.len(), band_limit * band_limit);
        Self { band_limit, coeffs }
    }

    pub fn zeros(band_limit: usize) -> Self {
        Self::from_parts(band_limit, vec![0.0; band_limit * band_limit])
    }

    /// Unit vector in slot `k`.
    pub fn unit(band_limit: usize, k: usize) -> Self {
        let mut v = Self::zeros(band_limit);
        v.coeffs[k] = 1.0;
        v
    }

    pub fn band_limit(&self) -> usize {
        self.band_limit
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Slot of the real part of `f_ℓm` (`m >= 0`); the imaginary part of an
    /// `m > 0` entry sits at the next index.
    pub fn slot(l: usize, m: usize) -> usize {
        debug_assert!(m <= l);
        if m == 0 {
            l * l
        } else {
            l * l + 2 * m - 1
        }
    }

    /// `(ℓ, m)` of a slot, with `m` signed: negative for imaginary parts.
    pub fn degree_order(k: usize) -> (usize, i64) {
        let l = (k as f64).sqrt() as usize;
        let l = if (l + 1) * (l + 1) <= k { l + 1 } else if l * l > k { l - 1 } else { l };
        let r = k - l * l;
        if r == 0 {
            (l, 0)
        } else if r % 2 == 1 {
            (l, r.div_ceil(2) as i64)
        } else {
            (l, -((r / 2) as i64))
        }
    }

    /// `f_ℓm` for `|m| <= ℓ < L`.
    pub fn get(&self, l: usize, m: i64) -> Complex64 {
        let ma = m.unsigned_abs() as usize;
        let c = if ma == 0 {
            Complex64::new(self.coeffs[l * l], 0.0)
        } else {
            let k = Self::slot(l, ma);
            Complex64::new(self.coeffs[k], self.coeffs[k + 1])
        };
        if m < 0 {
            let c = c.conj();
            if ma % 2 == 1 { -c } else { c }
        } else {
            c
        }
    }

    /// Stores `f_ℓm` for `m >= 0`; the imaginary part of an `m = 0` value is dropped.
    pub fn set(&mut self, l: usize, m: usize, value: Complex64) {
        let k = Self::slot(l, m);
        self.coeffs[k] = value.re;
        if m > 0 {
            self.coeffs[k + 1] = value.im;
        }
    }

    /// All `(2ℓ+1)` complex coefficients per degree, `m = -ℓ..=ℓ`, ℓ ascending.
    pub fn unpack(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.coeffs.len());
        for l in 0..self.band_limit {
            let li = l as i64;
            for m in -li..=li {
                out.push(self.get(l, m));
            }
        }
        out
    }

    /// Inverse of [`unpack`](Self::unpack); negative orders are ignored.
    pub fn pack(band_limit: usize, full: &[Complex64]) -> Result<Self> {
        if full.len() != band_limit * band_limit {
            return Err(Error::ShapeMismatch(format!(
                "{} complex coefficients for band limit {band_limit}",
                full.len()
            )));
        }
        let mut v = Self::zeros(band_limit);
        for l in 0..band_limit {
            for m in 0..=l {
                v.set(l, m, full[l * l + l + m]);
            }
        }
        Self::new(band_limit, v.coeffs)
    }

    /// `Σ_ℓ Σ_{m=-ℓ..ℓ} |f_ℓm|^2`, which equals `∫ F^2 dΩ` for the synthesised field.
    pub fn energy(&self) -> f64 {
        let mut e = 0.0;
        for l in 0..self.band_limit {
            e += self.coeffs[l * l].powi(2);
            e += 2.0 * self.coeffs[l * l + 1..(l + 1) * (l + 1)].iter().map(|c| c * c).sum::<f64>();
        }
        e
    }

    pub fn max_abs_diff(&self, other: &HarmonicVector) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `a·self + b·other`.
    pub fn lin_comb(&self, a: f64, other: &HarmonicVector, b: f64) -> HarmonicVector {
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| a * x + b * y).collect();
        Self::from_parts(self.band_limit, coeffs)
    }
}
