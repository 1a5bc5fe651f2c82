use std::path::Path;

use crate::binio::{read_file, ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::linalg;
use crate::mpchol::{self, CholeskyOptions, ConversionSite, FactorizationStats, PrecisionMap, Variant};
use crate::par;

use super::var::VarResiduals;

const NUGGET_START: f64 = 1e-8;
const NUGGET_CAP: f64 = 1e-2;

/// How the innovation covariance is factorised.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnovationConfig {
    pub map: PrecisionMap,
    pub tile_size: usize,
    pub workers: usize,
    pub site: ConversionSite,
}

impl Default for InnovationConfig {
    fn default() -> Self {
        Self {
            map: PrecisionMap::with_defaults(Variant::Dp),
            tile_size: 16,
            workers: 1,
            site: ConversionSite::Sender,
        }
    }
}

impl InnovationConfig {
    pub fn with_variant(variant: Variant) -> Self {
        Self {
            map: PrecisionMap::with_defaults(variant),
            ..Self::default()
        }
    }
}

/// Innovation covariance `Û` and its factor `V` with `V Vᵀ ≈ Û + nugget I`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnovationModel {
    dim: usize,
    u_hat: Vec<f64>,
    v_factor: Vec<f64>,
    nugget: f64,
    residual_mean_norm: f64,
}

impl InnovationModel {
    /// Wraps an existing lower factor; `Û` is taken as `V Vᵀ - nugget I`.
    pub fn from_factor(dim: usize, v_factor: Vec<f64>, nugget: f64) -> Result<Self> {
        if v_factor.len() != dim * dim {
            return Err(Error::ShapeMismatch(format!("{} factor entries for dim {dim}", v_factor.len())));
        }
        if v_factor.iter().any(|v| !v.is_finite()) || !nugget.is_finite() || nugget < 0.0 {
            return Err(Error::NonFinite { context: "innovation factor".into() });
        }
        if (0..dim).any(|i| (i + 1..dim).any(|j| v_factor[i * dim + j] != 0.0)) {
            return Err(Error::InvalidArgument("innovation factor must be lower triangular".into()));
        }
        let mut u_hat = linalg::lower_gram(&v_factor, dim);
        for i in 0..dim {
            u_hat[i * dim + i] -= nugget;
        }
        Ok(Self {
            dim,
            u_hat,
            v_factor,
            nugget,
            residual_mean_norm: 0.0,
        })
    }

    /// Diagonal covariance with the given variances, factored exactly.
    pub fn diagonal(variances: &[f64]) -> Result<Self> {
        let dim = variances.len();
        if variances.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidArgument("variances must be non-negative".into()));
        }
        let mut v = vec![0.0; dim * dim];
        for (i, s) in variances.iter().enumerate() {
            v[i * dim + i] = s.sqrt();
        }
        let mut m = Self::from_factor(dim, v, 0.0)?;
        for (i, s) in variances.iter().enumerate() {
            m.u_hat[i * dim + i] = *s;
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major `Û`.
    pub fn u_hat(&self) -> &[f64] {
        &self.u_hat
    }

    /// Row-major lower-triangular `V`.
    pub fn v_factor(&self) -> &[f64] {
        &self.v_factor
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    /// Norm of the mean residual vector. The second moment is not centred,
    /// so a large value signals drift absorbed into `Û`.
    pub fn residual_mean_norm(&self) -> f64 {
        self.residual_mean_norm
    }

    /// `V Vᵀ`, the covariance the sampler actually uses.
    pub fn sampling_covariance(&self) -> Vec<f64> {
        linalg::lower_gram(&self.v_factor, self.dim)
    }

    /// `‖V Vᵀ − (Û + nugget I)‖_F / ‖Û‖_F`.
    pub fn factor_error(&self) -> f64 {
        let mut d = self.sampling_covariance();
        for (k, v) in d.iter_mut().enumerate() {
            *v -= self.u_hat[k];
        }
        for i in 0..self.dim {
            d[i * self.dim + i] -= self.nugget;
        }
        linalg::frobenius(&d) / linalg::frobenius(&self.u_hat)
    }

    /// `V η` for a standard normal `η`.
    pub fn apply_factor(&self, eta: &[f64], out: &mut [f64]) {
        let n = self.dim;
        for i in 0..n {
            out[i] = linalg::dot(&self.v_factor[i * n..i * n + i + 1], &eta[..=i]);
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let n = self.dim;
        let mut w = ByteWriter::with_magic(b"UCOV", 12 + n * (n + 1) * 4);
        w.usize_u32(n)?.f64(self.nugget);
        for i in 0..n {
            w.f64s(&self.v_factor[i * n..i * n + i + 1]);
        }
        w.write_to(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = read_file(path)?;
        let mut rd = ByteReader::new("UCOV", &data, b"UCOV")?;
        let n = rd.u32("dimension")? as usize;
        let nugget = rd.f64("nugget")?;
        let packed = rd.f64s(n * (n + 1) / 2, "factor")?;
        rd.finish()?;
        let mut v = vec![0.0; n * n];
        let mut it = packed.into_iter();
        for i in 0..n {
            for j in 0..=i {
                v[i * n + j] = it.next().unwrap_or(0.0);
            }
        }
        Self::from_factor(n, v, nugget)
    }
}

/// `(1/N) Σ ξ ξᵀ` over all residual vectors, accumulated in fixed chunks and
/// summed with a fixed pairwise tree.
pub fn second_moment(residuals: &VarResiduals) -> Vec<f64> {
    let n = residuals.dim();
    let count = residuals.count();
    let chunk = count.div_ceil(32).max(64);
    let n_chunks = count.div_ceil(chunk);
    let partials = par::map_range(n_chunks, |c| {
        let mut acc = vec![0.0; n * n];
        for k in c * chunk..((c + 1) * chunk).min(count) {
            let x = residuals.vector(k);
            for i in 0..n {
                let xi = x[i];
                let row = &mut acc[i * n..i * n + i + 1];
                for (a, xj) in row.iter_mut().zip(&x[..=i]) {
                    *a += xi * xj;
                }
            }
        }
        acc
    });
    let mut u = par::pairwise_reduce(partials, |mut a, b| {
        a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
        a
    })
    .unwrap_or_else(|| vec![0.0; n * n]);
    let scale = 1.0 / count.max(1) as f64;
    for i in 0..n {
        for j in 0..=i {
            let v = u[i * n + j] * scale;
            u[i * n + j] = v;
            u[j * n + i] = v;
        }
    }
    u
}

/// Estimates `Û` from VAR residuals and factors it with the tiled Cholesky,
/// adding a growing diagonal nugget when needed.
pub fn estimate_innovation_covariance(residuals: &VarResiduals, config: &InnovationConfig) -> Result<InnovationModel> {
    if residuals.count() == 0 {
        return Err(Error::InvalidArgument("no residual vectors to estimate the innovation covariance".into()));
    }
    let n = residuals.dim();
    let u_hat = second_moment(residuals);
    let mut mean = vec![0.0; n];
    for k in 0..residuals.count() {
        linalg::axpy(1.0, residuals.vector(k), &mut mean);
    }
    let mean_norm = linalg::norm(&mean) / residuals.count() as f64;
    let (v_factor, nugget, _) = factor_with_nugget(&u_hat, n, residuals.count() < n, config)?;
    Ok(InnovationModel {
        dim: n,
        u_hat,
        v_factor,
        nugget,
        residual_mean_norm: mean_norm,
    })
}

/// Factors `u + nugget I`, starting the nugget at `1e-8 · mean diag` (or at
/// zero unless `rank_deficient`) and growing it tenfold per failure up to
/// `1e-2 · mean diag`.
pub fn factor_with_nugget(
    u: &[f64],
    n: usize,
    rank_deficient: bool,
    config: &InnovationConfig,
) -> Result<(Vec<f64>, f64, FactorizationStats)> {
    let mean_diag = (0..n).map(|i| u[i * n + i]).sum::<f64>() / n as f64;
    let cap = NUGGET_CAP * mean_diag;
    if !(mean_diag > 0.0) || !mean_diag.is_finite() {
        return Err(Error::NuggetExhausted { cap });
    }
    let options = CholeskyOptions {
        workers: config.workers,
        site: config.site,
    };
    let mut nugget = if rank_deficient { NUGGET_START * mean_diag } else { 0.0 };
    loop {
        let mut a = u.to_vec();
        for i in 0..n {
            a[i * n + i] += nugget;
        }
        match mpchol::factorize_dense(&a, n, config.tile_size, &config.map, options) {
            Ok((factor, stats)) => {
                if nugget > 0.0 {
                    log::info!("innovation covariance factored with nugget {nugget:e}");
                }
                return Ok((factor.to_dense_lower(), nugget, stats));
            }
            Err(Error::NotPositiveDefinite { .. }) => {
                nugget = if nugget == 0.0 { NUGGET_START * mean_diag } else { nugget * 10.0 };
                if nugget > cap * (1.0 + 1e-9) {
                    return Err(Error::NuggetExhausted { cap });
                }
                log::warn!("innovation covariance not positive definite; retrying with nugget {nugget:e}");
            }
            Err(e) => return Err(e),
        }
    }
}
