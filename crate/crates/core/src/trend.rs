//! Per-location mean trend `m_t` and scale `σ`.
//!
//! ```text
//! m_t = β₀ + β₁ x_{⌈t/τ⌉} + β₂ (1-ρ) Σ_{s>=1} ρ^{s-1} x_{⌈t/τ⌉-s}
//!       + Σ_k [a_k cos(2πtk/τ) + b_k sin(2πtk/τ)]
//! ```
//!
//! Forcing `x` is annual; time steps `t = 1, 2, ...` map to forcing years
//! through `⌈t/τ⌉`.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::binio::{read_file, ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::grid::{EquiangularField, FieldSeries, GridSpec};
use crate::linalg::{dot, norm, ThinQr};
use crate::par;

pub const DEFAULT_K: usize = 5;
/// Lag terms with weight `ρ^{s-1}` below this are dropped.
pub const LAG_CUTOFF: f64 = 1e-12;
const N_PROBES: usize = 33;
const GOLDEN_TOL: f64 = 1e-10;
const COLLINEAR_TOL: f64 = 1e-9;

/// Annual forcing series. `values[k]` belongs to year index `first_year + k`,
/// where year 1 is the one containing `t = 1`; earlier years are history.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForcingTrajectory {
    first_year: i64,
    values: Vec<f64>,
}

impl ForcingTrajectory {
    pub fn new(first_year: i64, values: Vec<f64>) -> Result<Self> {
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("forcing year {}", first_year + k as i64),
            });
        }
        Ok(Self { first_year, values })
    }

    /// No forcing at all; fits then carry only intercept and harmonics.
    pub fn none() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn first_year(&self) -> i64 {
        self.first_year
    }

    pub fn last_year(&self) -> i64 {
        self.first_year + self.values.len() as i64 - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, year: i64) -> Option<f64> {
        let k = year - self.first_year;
        if k < 0 {
            return None;
        }
        self.values.get(k as usize).copied()
    }

    /// `(1-ρ) Σ_{s>=1} ρ^{s-1} x_{year-s}`, truncated when the weight drops
    /// below [`LAG_CUTOFF`] or the history runs out.
    pub fn lag_term(&self, year: i64, rho: f64) -> f64 {
        let mut acc = 0.0;
        let mut w = 1.0;
        let mut s = 1;
        while w >= LAG_CUTOFF {
            match self.get(year - s) {
                Some(x) => acc += w * x,
                None => break,
            }
            w *= rho;
            s += 1;
        }
        (1.0 - rho) * acc
    }

    /// Reads `year,value` rows (header and `#` comments allowed). Years must
    /// be consecutive; `series_start` is the calendar year holding `t = 1`.
    pub fn from_csv(path: &Path, series_start: i64) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut first = None;
        let mut values = Vec::new();
        for (n, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(',').map(str::trim);
            let (Some(y), Some(v)) = (parts.next(), parts.next()) else {
                return Err(Error::Forcing(format!("line {}: expected `year,value`", n + 1)));
            };
            let (Ok(year), Ok(value)) = (y.parse::<i64>(), v.parse::<f64>()) else {
                if values.is_empty() && first.is_none() {
                    continue; // header
                }
                return Err(Error::Forcing(format!("line {}: cannot parse `{line}`", n + 1)));
            };
            let start = *first.get_or_insert(year);
            if year != start + values.len() as i64 {
                return Err(Error::Forcing(format!(
                    "line {}: year {year} breaks the consecutive sequence",
                    n + 1
                )));
            }
            values.push(value);
        }
        match first {
            Some(start) => Self::new(start - series_start + 1, values),
            None => Err(Error::Forcing(format!("{} holds no forcing rows", path.display()))),
        }
    }

    /// Writes `year,value` rows using year indices (so `series_start = 1` reads it back).
    pub fn to_csv(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        writeln!(out, "year,value").map_err(io)?;
        for (k, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{v:?}", self.first_year + k as i64).map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

/// Forcing year of time step `t` (1-based): `⌈t/τ⌉`.
pub fn year_of(t: usize, tau: usize) -> i64 {
    t.div_ceil(tau) as i64
}

/// `(cos, sin)` of `2πtk/τ`, reduced modulo τ first so large `t` stays exact.
fn harmonic(t: usize, k: usize, tau: usize) -> (f64, f64) {
    let phase = ((t as u128 * k as u128) % tau as u128) as f64 / tau as f64;
    let (s, c) = (std::f64::consts::TAU * phase).sin_cos();
    (c, s)
}

/// One location's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationTrend {
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub rho: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub sigma: f64,
}

impl LocationTrend {
    /// Intercept only, unit scale.
    pub fn constant(beta0: f64, k: usize) -> Self {
        Self {
            beta0,
            beta1: 0.0,
            beta2: 0.0,
            rho: 0.0,
            a: vec![0.0; k],
            b: vec![0.0; k],
            sigma: 1.0,
        }
    }

    /// `m_t` at this location.
    pub fn mean(&self, forcing: &ForcingTrajectory, t: usize, tau: usize) -> Result<f64> {
        let mut m = self.beta0;
        if self.beta1 != 0.0 || self.beta2 != 0.0 {
            let year = year_of(t, tau);
            if self.beta1 != 0.0 {
                let x = forcing.get(year).ok_or_else(|| {
                    Error::Forcing(format!("no forcing value for year index {year} (t={t})"))
                })?;
                m += self.beta1 * x;
            }
            if self.beta2 != 0.0 {
                if forcing.get(year - 1).is_none() {
                    return Err(Error::Forcing(format!(
                        "lag term at t={t} needs forcing before year index {year}"
                    )));
                }
                m += self.beta2 * forcing.lag_term(year, self.rho);
            }
        }
        for (k, (a, b)) in self.a.iter().zip(&self.b).enumerate() {
            let (c, s) = harmonic(t, k + 1, tau);
            m += a * c + b * s;
        }
        Ok(m)
    }
}

/// Per-location trend parameters, stored as flat records
/// `(β₀, β₁, β₂, ρ, a_1..a_K, b_1..b_K, σ)` in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendParams {
    spec: GridSpec,
    k: usize,
    tau: usize,
    records: Vec<f64>,
}

impl TrendParams {
    pub fn from_records(spec: GridSpec, k: usize, tau: usize, records: Vec<LocationTrend>) -> Result<Self> {
        if records.len() != spec.n_points() {
            return Err(Error::ShapeMismatch(format!(
                "{} trend records for {} grid points",
                records.len(),
                spec.n_points()
            )));
        }
        let mut flat = Vec::with_capacity(records.len() * (5 + 2 * k));
        for r in &records {
            if r.a.len() != k || r.b.len() != k {
                return Err(Error::ShapeMismatch(format!("harmonic count differs from K={k}")));
            }
            flat.extend_from_slice(&[r.beta0, r.beta1, r.beta2, r.rho]);
            flat.extend_from_slice(&r.a);
            flat.extend_from_slice(&r.b);
            flat.push(r.sigma);
        }
        Self::from_flat(spec, k, tau, flat)
    }

    /// Same parameters at every grid point.
    pub fn uniform(spec: GridSpec, k: usize, tau: usize, record: &LocationTrend) -> Result<Self> {
        Self::from_records(spec, k, tau, vec![record.clone(); spec.n_points()])
    }

    fn from_flat(spec: GridSpec, k: usize, tau: usize, records: Vec<f64>) -> Result<Self> {
        if tau == 0 {
            return Err(Error::InvalidArgument("trend period τ must be positive".into()));
        }
        let p = Self { spec, k, tau, records };
        for loc in 0..spec.n_points() {
            let r = p.record_slice(loc);
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    context: format!("trend record of location {loc}"),
                });
            }
            let (rho, sigma) = (r[3], r[r.len() - 1]);
            if !(0.0..=1.0).contains(&rho) {
                return Err(Error::OutOfRange(format!("ρ = {rho} at location {loc} is outside [0, 1]")));
            }
            if sigma <= 0.0 {
                return Err(Error::OutOfRange(format!("σ = {sigma} at location {loc} must be positive")));
            }
        }
        Ok(p)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    fn stride(&self) -> usize {
        5 + 2 * self.k
    }

    fn record_slice(&self, loc: usize) -> &[f64] {
        let s = self.stride();
        &self.records[loc * s..(loc + 1) * s]
    }

    pub fn location(&self, loc: usize) -> LocationTrend {
        let r = self.record_slice(loc);
        let k = self.k;
        LocationTrend {
            beta0: r[0],
            beta1: r[1],
            beta2: r[2],
            rho: r[3],
            a: r[4..4 + k].to_vec(),
            b: r[4 + k..4 + 2 * k].to_vec(),
            sigma: r[4 + 2 * k],
        }
    }

    pub fn sigma(&self, loc: usize) -> f64 {
        self.records[(loc + 1) * self.stride() - 1]
    }

    pub fn rho(&self, loc: usize) -> f64 {
        self.records[loc * self.stride() + 3]
    }

    /// A parameter as a field: 0..=3 are β₀, β₁, β₂, ρ; then a_k, b_k; last is σ.
    pub fn component(&self, index: usize) -> Vec<f64> {
        self.records.chunks_exact(self.stride()).map(|r| r[index]).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = ByteWriter::with_magic(b"TRND", 20 + self.records.len() * 8);
        w.usize_u32(self.spec.band_limit())?
            .usize_u32(self.spec.n_theta())?
            .usize_u32(self.spec.n_phi())?
            .usize_u32(self.k)?
            .usize_u32(self.tau)?;
        w.f64s(&self.records);
        w.write_to(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = read_file(path)?;
        let mut rd = ByteReader::new("TRND", &data, b"TRND")?;
        let l = rd.u32("band limit")? as usize;
        let n_theta = rd.u32("n_theta")? as usize;
        let n_phi = rd.u32("n_phi")? as usize;
        let k = rd.u32("K")? as usize;
        let tau = rd.u32("tau")? as usize;
        let spec = GridSpec::new(n_theta, n_phi, l)?;
        let records = rd.f64s(spec.n_points() * (5 + 2 * k), "records")?;
        rd.finish()?;
        Self::from_flat(spec, k, tau, records)
    }
}

/// `m_t` at one location (`loc` in grid order, `t >= 1`).
pub fn eval_mean_trend(params: &TrendParams, forcing: &ForcingTrajectory, t: usize, loc: usize) -> Result<f64> {
    if t == 0 {
        return Err(Error::OutOfRange("time steps start at t = 1".into()));
    }
    if loc >= params.spec.n_points() {
        return Err(Error::OutOfRange(format!("location {loc} of {}", params.spec.n_points())));
    }
    params.location(loc).mean(forcing, t, params.tau)
}

/// `m_t` over the whole grid.
pub fn mean_trend_field(params: &TrendParams, forcing: &ForcingTrajectory, t: usize) -> Result<Vec<f64>> {
    if t == 0 {
        return Err(Error::OutOfRange("time steps start at t = 1".into()));
    }
    par::map_range(params.spec.n_points(), |loc| params.location(loc).mean(forcing, t, params.tau))
        .into_iter()
        .collect()
}

fn check_cover(params: &TrendParams, series: &FieldSeries) -> Result<()> {
    if params.spec != *series.spec() {
        return Err(Error::ShapeMismatch(format!(
            "trend parameters for {:?} applied to a series on {:?}",
            params.spec,
            series.spec()
        )));
    }
    Ok(())
}

fn map_series(
    series: &FieldSeries,
    params: &TrendParams,
    forcing: &ForcingTrajectory,
    f: impl Fn(f64, f64, f64) -> f64 + Sync + Send,
) -> Result<FieldSeries> {
    check_cover(params, series)?;
    let sigma = params.component(params.stride() - 1);
    let means: Vec<Vec<f64>> = (1..=series.n_times())
        .map(|t| mean_trend_field(params, forcing, t))
        .collect::<Result<_>>()?;
    let fields = par::map_slice(series.fields(), |field| {
        let m = &means[field.time_index() - 1];
        let v = field
            .values()
            .iter()
            .zip(m)
            .zip(&sigma)
            .map(|((y, m), s)| f(*y, *m, *s))
            .collect();
        EquiangularField::new(*series.spec(), v, field.time_index(), field.ensemble_index())
    });
    let fields = fields.into_iter().collect::<Result<Vec<_>>>()?;
    FieldSeries::new(*series.spec(), series.n_times(), series.n_ensembles(), fields)
}

/// `Z = (y - m_t) / σ`.
pub fn detrend(series: &FieldSeries, params: &TrendParams, forcing: &ForcingTrajectory) -> Result<FieldSeries> {
    map_series(series, params, forcing, |y, m, s| (y - m) / s)
}

/// `y = m_t + σ Z`.
pub fn retrend(z: &FieldSeries, params: &TrendParams, forcing: &ForcingTrajectory) -> Result<FieldSeries> {
    map_series(z, params, forcing, |z, m, s| m + s * z)
}

/// Golden-section minimisation of `f` on `[lo, hi]`; returns `(x, f(x))`.
fn golden_section(mut lo: f64, mut hi: f64, tol: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Shared pieces of the design that do not depend on the location.
struct Design<'a> {
    t_len: usize,
    tau: usize,
    k: usize,
    forcing: &'a ForcingTrajectory,
    has_forcing: bool,
    n_cols: usize,
    qr: ThinQr,
}

impl Design<'_> {
    /// The lag column at `ρ`, one value per time step.
    fn lag_column(&self, rho: f64) -> Vec<f64> {
        let years = year_of(self.t_len, self.tau);
        // S_{y+1} = x_y + ρ S_y from the first year with history.
        let mut per_year = Vec::with_capacity(years as usize);
        let mut s = 0.0;
        let mut y = self.forcing.first_year();
        while y < 1 {
            s = self.forcing.get(y).unwrap_or(0.0) + rho * s;
            y += 1;
        }
        for year in 1..=years {
            per_year.push((1.0 - rho) * s);
            s = self.forcing.get(year).unwrap_or(0.0) + rho * s;
        }
        (1..=self.t_len).map(|t| per_year[(year_of(t, self.tau) - 1) as usize]).collect()
    }

    /// Residual sum of squares and lag slope at `ρ` after projecting out X0.
    fn profile(&self, e_y: &[f64], rho: f64) -> (f64, f64, Vec<f64>) {
        let z = self.lag_column(rho);
        let e_z = self.qr.residual(&z);
        let nz = norm(&e_z);
        if nz <= COLLINEAR_TOL * norm(&z) || nz == 0.0 {
            return (dot(e_y, e_y), 0.0, z);
        }
        let beta2 = dot(&e_z, e_y) / (nz * nz);
        let rss = e_y.iter().zip(&e_z).map(|(a, b)| (a - beta2 * b).powi(2)).sum();
        (rss, beta2, z)
    }

    fn fit_location(&self, ybar: &[f64]) -> (LocationTrend, f64) {
        let e_y = self.qr.residual(ybar);
        let (rho, beta2, rss, target) = if self.has_forcing {
            let probes: Vec<(f64, f64)> = (0..N_PROBES)
                .map(|i| {
                    let rho = i as f64 / (N_PROBES - 1) as f64;
                    (rho, self.profile(&e_y, rho).0)
                })
                .collect();
            let (best_rho, best_rss) = probes
                .iter()
                .copied()
                .fold((0.0, f64::INFINITY), |acc, p| if p.1 < acc.1 { p } else { acc });
            let step = 1.0 / (N_PROBES - 1) as f64;
            let (gr, grss) = golden_section(
                (best_rho - step).max(0.0),
                (best_rho + step).min(1.0),
                GOLDEN_TOL,
                |r| self.profile(&e_y, r).0,
            );
            let rho = if grss <= best_rss { gr } else { best_rho };
            let (rss, beta2, z) = self.profile(&e_y, rho);
            let rho = if beta2 == 0.0 { 0.0 } else { rho };
            let target: Vec<f64> = ybar.iter().zip(&z).map(|(y, z)| y - beta2 * z).collect();
            (rho, beta2, rss, target)
        } else {
            (0.0, 0.0, dot(&e_y, &e_y), ybar.to_vec())
        };
        let coef = self.qr.solve_full(&target, self.n_cols);
        let (beta1, harm) = if self.has_forcing {
            (coef[1], &coef[2..])
        } else {
            (0.0, &coef[1..])
        };
        let trend = LocationTrend {
            beta0: coef[0],
            beta1,
            beta2,
            rho,
            a: harm[..self.k].to_vec(),
            b: harm[self.k..].to_vec(),
            sigma: 1.0,
        };
        (trend, rss)
    }
}

/// Fits the trend at every location independently: least squares on the
/// ensemble mean for fixed ρ, profiled over ρ by a 33-point scan refined with
/// golden-section search, and the Gaussian MLE `σ² = (R·RSS + W)/(R·T)` with
/// `W` the within-ensemble sum of squares.
///
/// Columns collinear with earlier ones (a constant forcing against the
/// intercept, say) are dropped and their slopes set to zero with a warning.
/// A noise-free location gets σ floored at `1e-12` times its RMS level so the
/// parameters stay usable for detrending.
pub fn fit_trend(series: &FieldSeries, forcing: &ForcingTrajectory, k: usize, tau: usize) -> Result<TrendParams> {
    let t_len = series.n_times();
    let r_len = series.n_ensembles();
    if tau == 0 {
        return Err(Error::InvalidArgument("trend period τ must be positive".into()));
    }
    if t_len < 4 + 2 * k {
        return Err(Error::InvalidArgument(format!(
            "trend with K={k} needs T >= {} time steps, got {t_len}",
            4 + 2 * k
        )));
    }
    let mut has_forcing = !forcing.is_empty();
    if has_forcing {
        let last = year_of(t_len, tau);
        if forcing.first_year() > 1 || forcing.last_year() < last {
            return Err(Error::Forcing(format!(
                "forcing covers year indices {}..={}, the series needs 1..={last}",
                forcing.first_year(),
                forcing.last_year()
            )));
        }
        let used = &forcing.values()[..(last - forcing.first_year() + 1) as usize];
        let (lo, hi) = used.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
        if hi - lo <= 1e-12 * hi.abs().max(lo.abs()).max(1.0) {
            log::warn!("forcing is constant over the fitted years; β₁ and β₂ are unidentifiable and set to zero");
            has_forcing = false;
        }
    }

    let mut columns = vec![vec![1.0; t_len]];
    if has_forcing {
        columns.push((1..=t_len).map(|t| forcing.get(year_of(t, tau)).unwrap()).collect());
    }
    for part in 0..2 {
        for kk in 1..=k {
            columns.push(
                (1..=t_len)
                    .map(|t| {
                        let (c, s) = harmonic(t, kk, tau);
                        if part == 0 { c } else { s }
                    })
                    .collect(),
            );
        }
    }
    let n_cols = columns.len();
    let qr = ThinQr::new(&columns, COLLINEAR_TOL);
    if qr.rank() < n_cols {
        let dropped: Vec<usize> = (0..n_cols).filter(|j| !qr.kept().contains(j)).collect();
        log::warn!("trend design is rank deficient; columns {dropped:?} are fixed at zero");
    }
    let design = Design {
        t_len,
        tau,
        k,
        forcing,
        has_forcing,
        n_cols,
        qr,
    };

    let spec = *series.spec();
    let records = par::map_range(spec.n_points(), |loc| {
        let mut ybar = vec![0.0; t_len];
        for r in 0..r_len {
            for (t, yb) in ybar.iter_mut().enumerate() {
                *yb += series.get(r, t).values()[loc];
            }
        }
        ybar.iter_mut().for_each(|v| *v /= r_len as f64);
        let mut within = 0.0;
        for r in 0..r_len {
            for (t, yb) in ybar.iter().enumerate() {
                within += (series.get(r, t).values()[loc] - yb).powi(2);
            }
        }
        let (mut trend, rss) = design.fit_location(&ybar);
        let var = (r_len as f64 * rss + within) / (r_len * t_len) as f64;
        let level = (ybar.iter().map(|v| v * v).sum::<f64>() / t_len as f64).sqrt();
        trend.sigma = var.sqrt().max(1e-12 * level.max(1.0));
        trend
    });
    TrendParams::from_records(spec, k, tau, records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> GridSpec {
        GridSpec::new(3, 4, 2).unwrap()
    }

    #[test]
    fn constant_and_harmonic_trends() {
        let f = ForcingTrajectory::none();
        let p = TrendParams::uniform(spec(), 0, 12, &LocationTrend::constant(5.0, 0)).unwrap();
        for t in [1, 7, 1000] {
            assert_eq!(eval_mean_trend(&p, &f, t, 3).unwrap(), 5.0);
        }
        let mut rec = LocationTrend::constant(0.0, 1);
        rec.a[0] = 1.0;
        let p = TrendParams::uniform(spec(), 1, 12, &rec).unwrap();
        for t in 1..30 {
            let want = (std::f64::consts::TAU * t as f64 / 12.0).cos();
            assert!((eval_mean_trend(&p, &f, t, 0).unwrap() - want).abs() < 1e-14);
            assert!((eval_mean_trend(&p, &f, t + 12, 0).unwrap() - eval_mean_trend(&p, &f, t, 0).unwrap()).abs() < 1e-15);
        }
    }

    #[test]
    fn lag_with_zero_rho_is_last_year() {
        let f = ForcingTrajectory::new(-5, vec![2.5; 20]).unwrap();
        let mut rec = LocationTrend::constant(0.0, 0);
        rec.beta2 = 1.0;
        let p = TrendParams::uniform(spec(), 0, 12, &rec).unwrap();
        assert_eq!(eval_mean_trend(&p, &f, 13, 0).unwrap(), 2.5);
        // geometric weights sum to one for a long constant history
        rec.rho = 0.5;
        let p = TrendParams::uniform(spec(), 0, 1, &rec).unwrap();
        let v = eval_mean_trend(&p, &ForcingTrajectory::new(-200, vec![1.0; 300]).unwrap(), 5, 0).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn missing_history_is_reported() {
        let f = ForcingTrajectory::new(1, vec![1.0; 3]).unwrap();
        let mut rec = LocationTrend::constant(0.0, 0);
        rec.beta2 = 1.0;
        let p = TrendParams::uniform(spec(), 0, 1, &rec).unwrap();
        assert!(matches!(eval_mean_trend(&p, &f, 1, 0), Err(Error::Forcing(_))));
        assert!(eval_mean_trend(&p, &f, 2, 0).is_ok());
        rec.beta2 = 0.0;
        rec.beta1 = 1.0;
        let p = TrendParams::uniform(spec(), 0, 1, &rec).unwrap();
        assert!(matches!(eval_mean_trend(&p, &f, 4, 0), Err(Error::Forcing(_))));
    }

    #[test]
    fn invariants_are_checked() {
        let mut rec = LocationTrend::constant(0.0, 0);
        rec.rho = 1.5;
        assert!(TrendParams::uniform(spec(), 0, 12, &rec).is_err());
        rec.rho = 0.3;
        rec.sigma = 0.0;
        assert!(TrendParams::uniform(spec(), 0, 12, &rec).is_err());
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (x, fx) = golden_section(0.0, 1.0, 1e-10, |x| (x - 0.3141).powi(2));
        assert!((x - 0.3141).abs() < 1e-9);
        assert!(fx < 1e-18);
    }

    #[test]
    fn trnd_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.bin");
        let mut rec = LocationTrend::constant(1.5, 2);
        rec.a = vec![0.1, 0.2];
        rec.b = vec![-0.3, 0.4];
        rec.rho = 0.25;
        rec.sigma = 0.7;
        let p = TrendParams::uniform(spec(), 2, 365, &rec).unwrap();
        p.save(&path).unwrap();
        let raw = std::fs::read(&path).unwrap();
        assert_eq!(&raw[..4], b"TRND");
        assert_eq!(raw.len(), 24 + 12 * 9 * 8);
        assert_eq!(TrendParams::load(&path).unwrap(), p);
    }

    #[test]
    fn forcing_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        std::fs::write(&path, "year,rf\n# comment\n1990,0.5\n1991,0.75\n1992,1.0\n").unwrap();
        let f = ForcingTrajectory::from_csv(&path, 1991).unwrap();
        assert_eq!(f.first_year(), 0);
        assert_eq!(f.get(1), Some(0.75));
        let out = dir.path().join("g.csv");
        f.to_csv(&out).unwrap();
        assert_eq!(ForcingTrajectory::from_csv(&out, 1).unwrap(), f);
        std::fs::write(&path, "1990,0.5\n1992,1.0\n").unwrap();
        assert!(ForcingTrajectory::from_csv(&path, 1990).is_err());
    }
}
