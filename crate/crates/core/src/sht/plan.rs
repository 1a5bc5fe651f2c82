use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{EquiangularField, FieldSeries, GridSpec};
use crate::par;
use crate::wigner::{i_pow_neg, WignerTables};

use super::{i_integral, HarmonicVector};

/// Precomputed operators for one grid and band limit.
///
/// `w1`/`w2` integrate a Fourier mode along the pole-extended meridian circle:
/// row `m' + L - 1` holds `(1/M) Σ_k I(m' + k) e^{-ikθ_e}` for the samples on
/// `[0, π]` (`w1`) and on the reflected half `(π, 2π)` (`w2`), with
/// `M = 2 n_theta - 2`. They are folded once more by longitude-order parity
/// into `h`, which maps the ring values of `G_m` straight to the contraction
/// against Q.
pub struct ShtPlan {
    spec: GridSpec,
    tables: Arc<WignerTables>,
    w1: Vec<Complex64>,
    w2: Vec<Complex64>,
    /// `[even m, odd m]`, each `L x n_theta`.
    h: [Vec<Complex64>; 2],
    e_phi: Vec<Complex64>,
    fft_phi: Arc<dyn Fft<f64>>,
    ifft_phi: Arc<dyn Fft<f64>>,
    ifft_theta: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for ShtPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShtPlan").field("spec", &self.spec).finish_non_exhaustive()
    }
}

/// Builds a plan, checking that the tables match the grid's band limit.
pub fn build_plan(spec: GridSpec, tables: Arc<WignerTables>) -> Result<ShtPlan> {
    ShtPlan::with_tables(spec, tables)
}

pub fn forward_sht(plan: &ShtPlan, field: &EquiangularField) -> Result<HarmonicVector> {
    plan.forward(field)
}

pub fn inverse_sht(plan: &ShtPlan, coeffs: &HarmonicVector) -> Result<EquiangularField> {
    plan.inverse(coeffs)
}

pub fn forward_sht_batch(plan: &ShtPlan, series: &FieldSeries) -> Result<Vec<HarmonicVector>> {
    plan.forward_batch(series)
}

pub fn inverse_sht_batch(
    plan: &ShtPlan,
    coeffs: &[HarmonicVector],
    n_times: usize,
    n_ensembles: usize,
) -> Result<FieldSeries> {
    plan.inverse_batch(coeffs, n_times, n_ensembles)
}

impl ShtPlan {
    /// Builds fresh Wigner tables for the grid's band limit.
    pub fn new(spec: GridSpec) -> Result<Self> {
        let tables = WignerTables::build(spec.band_limit())?;
        Self::with_tables(spec, Arc::new(tables))
    }

    pub fn with_tables(spec: GridSpec, tables: Arc<WignerTables>) -> Result<Self> {
        let l = spec.band_limit();
        if tables.band_limit() != l {
            return Err(Error::ShapeMismatch(format!(
                "Wigner tables for L={} cannot serve a grid with L={l}",
                tables.band_limit()
            )));
        }
        let nt = spec.n_theta();
        let np = spec.n_phi();
        let m_ext = 2 * nt - 2;
        let rows = 2 * l - 1;

        let mut planner = FftPlanner::<f64>::new();
        let fft_theta = planner.plan_fft_forward(m_ext);
        let ifft_theta = planner.plan_fft_inverse(m_ext);
        let fft_phi = planner.plan_fft_forward(np);
        let ifft_phi = planner.plan_fft_inverse(np);

        // Row m' of the extended-circle weights is the length-M DFT of
        // k ↦ I(m' + k) / M placed at k mod M.
        let ext: Vec<Vec<Complex64>> = par::map_range(rows, |r| {
            let mp = r as i64 - (l as i64 - 1);
            let mut buf = vec![Complex64::new(0.0, 0.0); m_ext];
            for k in -(l as i64 - 1)..=(l as i64 - 1) {
                buf[k.rem_euclid(m_ext as i64) as usize] = i_integral(mp + k) / m_ext as f64;
            }
            fft_theta.process(&mut buf);
            buf
        });
        let mut w1 = Vec::with_capacity(rows * nt);
        let mut w2 = Vec::with_capacity(rows * (nt - 2));
        for row in &ext {
            w1.extend_from_slice(&row[..nt]);
            w2.extend_from_slice(&row[nt..]);
        }

        let h = [0usize, 1].map(|parity| {
            let s = if parity == 0 { 1.0 } else { -1.0 };
            let jp = |mp: i64, i: usize| -> Complex64 {
                let r = (mp + l as i64 - 1) as usize;
                let a = w1[r * nt + i];
                let b = if i >= 1 && i + 1 < nt {
                    w2[r * (nt - 2) + (nt - 2 - i)]
                } else {
                    Complex64::new(0.0, 0.0)
                };
                a + b * s
            };
            let mut out = vec![Complex64::new(0.0, 0.0); l * nt];
            for m2 in 0..l {
                for i in 0..nt {
                    out[m2 * nt + i] = if m2 == 0 {
                        jp(0, i)
                    } else {
                        jp(m2 as i64, i) + jp(-(m2 as i64), i) * s
                    };
                }
            }
            out
        });

        let mut e_phi = Vec::with_capacity(np * rows);
        for j in 0..np {
            let phi = spec.phi(j);
            for r in 0..rows {
                let m = r as f64 - (l as f64 - 1.0);
                e_phi.push(Complex64::from_polar(1.0 / np as f64, -m * phi));
            }
        }

        Ok(Self {
            spec,
            tables,
            w1,
            w2,
            h,
            e_phi,
            fft_phi,
            ifft_phi,
            ifft_theta,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn tables(&self) -> &Arc<WignerTables> {
        &self.tables
    }

    /// `(2L-1) x n_theta`, row-major, rows `m' = -(L-1)..=L-1`.
    pub fn w1(&self) -> &[Complex64] {
        &self.w1
    }

    /// `(2L-1) x (n_theta-2)`, columns for the reflected samples `θ = 2π(n_theta + k)/M`.
    pub fn w2(&self) -> &[Complex64] {
        &self.w2
    }

    /// `n_phi x (2L-1)` with entries `e^{-imφ_j} / n_phi`, columns `m = -(L-1)..=L-1`.
    pub fn e_phi(&self) -> &[Complex64] {
        &self.e_phi
    }

    /// `(-1)^m` for `m = -(L-1)..=L-1`.
    pub fn d_parity(&self) -> Vec<f64> {
        let l = self.spec.band_limit() as i64;
        (-(l - 1)..l).map(|m| if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 }).collect()
    }

    fn check_field(&self, field: &EquiangularField) -> Result<()> {
        if field.spec() != &self.spec {
            return Err(Error::ShapeMismatch(format!(
                "field grid {:?} does not match plan grid {:?}",
                field.spec(),
                self.spec
            )));
        }
        Ok(())
    }

    pub fn forward(&self, field: &EquiangularField) -> Result<HarmonicVector> {
        self.check_field(field)?;
        let coeffs = self.forward_values(field.values());
        if let Some(k) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("forward transform output slot {k}"),
            });
        }
        Ok(HarmonicVector::from_parts(self.spec.band_limit(), coeffs))
    }

    fn forward_values(&self, values: &[f64]) -> Vec<f64> {
        let l = self.spec.band_limit();
        let nt = self.spec.n_theta();
        let np = self.spec.n_phi();
        let scale = 2.0 * PI / np as f64;

        // G_m(θ_i) = ∫ F(θ_i, φ) e^{-imφ} dφ, exact below the ring's Nyquist order.
        let g_rings: Vec<Vec<Complex64>> = par::map_range(nt, |i| {
            let mut buf: Vec<Complex64> = values[i * np..(i + 1) * np]
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect();
            self.fft_phi.process(&mut buf);
            buf.truncate(l);
            buf.iter_mut().for_each(|c| *c *= scale);
            buf
        });

        // hm[m][m''] = Σ_i h_{parity(m)}[m''][i] G_m(θ_i)
        let hm: Vec<Vec<Complex64>> = par::map_range(l, |m| {
            let h = &self.h[m % 2];
            (0..l)
                .map(|m2| {
                    let row = &h[m2 * nt..(m2 + 1) * nt];
                    row.iter()
                        .zip(&g_rings)
                        .fold(Complex64::new(0.0, 0.0), |acc, (w, g)| acc + w * g[m])
                })
                .collect()
        });

        let per_degree: Vec<Vec<f64>> = par::map_range(l, |deg| {
            let mut out = vec![0.0; 2 * deg + 1];
            for m in 0..=deg {
                let q = self.tables.q_row(deg, m);
                let acc = q[..=deg]
                    .iter()
                    .zip(&hm[m])
                    .fold(Complex64::new(0.0, 0.0), |acc, (qv, h)| acc + h * *qv);
                let f = acc * i_pow_neg(m as i64);
                if m == 0 {
                    out[0] = f.re;
                } else {
                    out[2 * m - 1] = f.re;
                    out[2 * m] = f.im;
                }
            }
            out
        });
        per_degree.concat()
    }

    pub fn inverse(&self, coeffs: &HarmonicVector) -> Result<EquiangularField> {
        if coeffs.band_limit() != self.spec.band_limit() {
            return Err(Error::ShapeMismatch(format!(
                "coefficients at L={} for a plan at L={}",
                coeffs.band_limit(),
                self.spec.band_limit()
            )));
        }
        Ok(self.inverse_unchecked(coeffs))
    }

    pub(crate) fn inverse_unchecked(&self, coeffs: &HarmonicVector) -> EquiangularField {
        EquiangularField::from_parts(self.spec, self.inverse_values(coeffs), 1, 1)
    }

    fn inverse_values(&self, coeffs: &HarmonicVector) -> Vec<f64> {
        let l = self.spec.band_limit();
        let nt = self.spec.n_theta();
        let np = self.spec.n_phi();
        let m_ext = 2 * nt - 2;

        // H_m(θ) = Σ_ℓ f_ℓm Y_ℓm(θ, 0) = Σ_{m'} c_{m,m'} e^{im'θ}, evaluated on the
        // extended circle by one inverse DFT per order.
        let hm: Vec<Vec<Complex64>> = par::map_range(l, |m| {
            let phase = i_pow_neg(m as i64);
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let mut buf = vec![Complex64::new(0.0, 0.0); m_ext];
            for deg in m..l {
                let f = coeffs.get(deg, m as i64) * phase;
                let q = self.tables.q_row(deg, m);
                for m2 in 0..=deg {
                    buf[m2] += f * q[m2];
                }
            }
            for m2 in 1..l {
                buf[m_ext - m2] = buf[m2] * sign;
            }
            self.ifft_theta.process(&mut buf);
            buf.truncate(nt);
            buf
        });

        let rings: Vec<Vec<f64>> = par::map_range(nt, |i| {
            let mut buf = vec![Complex64::new(0.0, 0.0); np];
            buf[0] = Complex64::new(hm[0][i].re, 0.0);
            for m in 1..l {
                buf[m] = hm[m][i];
                buf[np - m] = hm[m][i].conj();
            }
            self.ifft_phi.process(&mut buf);
            buf.iter().map(|c| c.re).collect()
        });
        rings.concat()
    }

    /// Forward transform of every slice, in series order.
    pub fn forward_batch(&self, series: &FieldSeries) -> Result<Vec<HarmonicVector>> {
        if series.spec() != &self.spec {
            return Err(Error::ShapeMismatch(format!(
                "series grid {:?} does not match plan grid {:?}",
                series.spec(),
                self.spec
            )));
        }
        par::map_slice(series.fields(), |f| self.forward(f))
            .into_iter()
            .enumerate()
            .map(|(k, r)| {
                r.map_err(|e| Error::Slice {
                    index: k,
                    source: Box::new(e),
                })
            })
            .collect()
    }

    /// Inverse transform of `(r, t)`-ordered coefficient vectors into a series.
    pub fn inverse_batch(
        &self,
        coeffs: &[HarmonicVector],
        n_times: usize,
        n_ensembles: usize,
    ) -> Result<FieldSeries> {
        if let Some((k, c)) = coeffs
            .iter()
            .enumerate()
            .find(|(_, c)| c.band_limit() != self.spec.band_limit())
        {
            return Err(Error::Slice {
                index: k,
                source: Box::new(Error::ShapeMismatch(format!(
                    "coefficients at L={} for a plan at L={}",
                    c.band_limit(),
                    self.spec.band_limit()
                ))),
            });
        }
        let fields = par::map_slice(coeffs, |c| self.inverse_unchecked(c));
        FieldSeries::new(self.spec, n_times, n_ensembles, fields)
    }
}
