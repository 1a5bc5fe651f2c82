use std::path::Path;

use crate::binio::{read_file, ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::linalg::ThinQr;
use crate::par;
use crate::sht::HarmonicVector;

pub const DEFAULT_ORDER: usize = 3;

/// Diagonal VAR(P) on packed real harmonic coefficients: coefficient `j`
/// follows `f_t[j] = Σ_p phi[p][j] f_{t-p}[j] + ξ_t[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarModel {
    band_limit: usize,
    phi: Vec<Vec<f64>>,
}

impl VarModel {
    pub fn new(band_limit: usize, phi: Vec<Vec<f64>>) -> Result<Self> {
        let dim = band_limit * band_limit;
        if band_limit == 0 {
            return Err(Error::InvalidArgument("band limit must be positive".into()));
        }
        if let Some(p) = phi.iter().position(|d| d.len() != dim) {
            return Err(Error::ShapeMismatch(format!("lag {} has {} entries, expected {dim}", p + 1, phi[p].len())));
        }
        if phi.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: "AR coefficients".into() });
        }
        Ok(Self { band_limit, phi })
    }

    /// The same AR coefficients (one per lag) for every harmonic coefficient.
    pub fn uniform(band_limit: usize, per_lag: &[f64]) -> Result<Self> {
        let dim = band_limit * band_limit;
        Self::new(band_limit, per_lag.iter().map(|&v| vec![v; dim]).collect())
    }

    pub fn order(&self) -> usize {
        self.phi.len()
    }

    pub fn band_limit(&self) -> usize {
        self.band_limit
    }

    pub fn dim(&self) -> usize {
        self.band_limit * self.band_limit
    }

    /// Diagonal of Φ_{lag}, `lag` counted from 1.
    pub fn phi(&self, lag: usize) -> &[f64] {
        &self.phi[lag - 1]
    }

    pub fn coefficient(&self, j: usize) -> Vec<f64> {
        self.phi.iter().map(|d| d[j]).collect()
    }

    /// Indices whose scalar AR polynomial has a root on or inside the unit circle.
    pub fn unstable_coefficients(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&j| !ar_is_stable(&self.coefficient(j))).collect()
    }

    /// `ψ(0..steps)` for coefficient `j`: the response of `f[j]` to a unit innovation.
    pub fn impulse_response(&self, j: usize, steps: usize) -> Vec<f64> {
        let phi = self.coefficient(j);
        let mut psi = Vec::with_capacity(steps);
        for s in 0..steps {
            let v = if s == 0 {
                1.0
            } else {
                phi.iter()
                    .enumerate()
                    .filter(|(p, _)| *p < s)
                    .map(|(p, f)| f * psi[s - 1 - p])
                    .sum()
            };
            psi.push(v);
        }
        psi
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = ByteWriter::with_magic(b"VARM", 8 + self.order() * self.dim() * 8);
        w.usize_u32(self.order())?.usize_u32(self.band_limit)?;
        for d in &self.phi {
            w.f64s(d);
        }
        w.write_to(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = read_file(path)?;
        let mut rd = ByteReader::new("VARM", &data, b"VARM")?;
        let p = rd.u32("order")? as usize;
        let l = rd.u32("band limit")? as usize;
        if l == 0 {
            return Err(rd.malformed("band limit is zero"));
        }
        let phi = (0..p)
            .map(|_| rd.f64s(l * l, "AR diagonals"))
            .collect::<Result<Vec<_>>>()?;
        rd.finish()?;
        Self::new(l, phi)
    }
}

/// Step-down (Schur–Cohn) test that `1 - Σ φ_p z^p` has all roots outside
/// the unit circle.
pub fn ar_is_stable(phi: &[f64]) -> bool {
    let mut a: Vec<f64> = phi.to_vec();
    while let Some(&k) = a.last() {
        if k.abs() >= 1.0 {
            return false;
        }
        let m = a.len();
        let denom = 1.0 - k * k;
        let next: Vec<f64> = (0..m - 1).map(|i| (a[i] + k * a[m - 2 - i]) / denom).collect();
        a = next;
    }
    true
}

/// VAR residuals `ξ_t`, `t = P+1..T`, ordered `(r, t)` with the
/// coefficient index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct VarResiduals {
    dim: usize,
    n_ensembles: usize,
    n_steps: usize,
    data: Vec<f64>,
}

impl VarResiduals {
    pub fn new(dim: usize, n_ensembles: usize, n_steps: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * n_ensembles * n_steps {
            return Err(Error::ShapeMismatch(format!(
                "{} residual values for dim={dim}, R={n_ensembles}, steps={n_steps}",
                data.len()
            )));
        }
        Ok(Self {
            dim,
            n_ensembles,
            n_steps,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_ensembles(&self) -> usize {
        self.n_ensembles
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Total number of residual vectors, `R (T - P)`.
    pub fn count(&self) -> usize {
        self.n_ensembles * self.n_steps
    }

    pub fn vector(&self, index: usize) -> &[f64] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

#[derive(Debug, Clone)]
pub struct VarFit {
    pub model: VarModel,
    /// OLS standard errors, same layout as the diagonals.
    pub std_errors: Vec<Vec<f64>>,
    pub residuals: VarResiduals,
}

/// Per-coefficient least squares of `f_t[j]` on its own `P` lags, pooled
/// over ensembles. `coeffs` is ordered `(r, t)` with `t` fastest.
pub fn fit_var(coeffs: &[HarmonicVector], n_times: usize, n_ensembles: usize, order: usize) -> Result<VarFit> {
    if n_ensembles == 0 || coeffs.len() != n_times * n_ensembles {
        return Err(Error::ShapeMismatch(format!(
            "{} coefficient vectors for T={n_times}, R={n_ensembles}",
            coeffs.len()
        )));
    }
    if n_times <= order + 1 {
        return Err(Error::InvalidArgument(format!(
            "VAR({order}) needs T > {} time steps per ensemble, got {n_times}",
            order + 1
        )));
    }
    let l = coeffs[0].band_limit();
    if let Some(k) = coeffs.iter().position(|c| c.band_limit() != l) {
        return Err(Error::ShapeMismatch(format!(
            "coefficient vector {k} has L={}, expected {l}",
            coeffs[k].band_limit()
        )));
    }
    let dim = l * l;
    let steps = n_times - order;
    let at = |r: usize, t: usize, j: usize| coeffs[r * n_times + t].as_slice()[j];

    let per_coeff: Vec<(Vec<f64>, Vec<f64>, Vec<f64>, bool)> = par::map_range(dim, |j| {
        let y: Vec<f64> = (0..n_ensembles)
            .flat_map(|r| (order..n_times).map(move |t| (r, t)))
            .map(|(r, t)| at(r, t, j))
            .collect();
        if order == 0 {
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            return (vec![], vec![], y.iter().map(|v| v - mean).collect(), false);
        }
        let cols: Vec<Vec<f64>> = (1..=order)
            .map(|p| {
                (0..n_ensembles)
                    .flat_map(|r| (order..n_times).map(move |t| (r, t)))
                    .map(|(r, t)| at(r, t - p, j))
                    .collect()
            })
            .collect();
        let qr = ThinQr::new(&cols, 1e-10);
        let phi = qr.solve_full(&y, order);
        let resid: Vec<f64> = (0..y.len())
            .map(|n| y[n] - (0..order).map(|p| phi[p] * cols[p][n]).sum::<f64>())
            .collect();
        let rank = qr.rank();
        let dof = (y.len() - rank).max(1) as f64;
        let s2 = resid.iter().map(|e| e * e).sum::<f64>() / dof;
        let mut se = vec![0.0; order];
        for q in 0..rank {
            let mut e = vec![0.0; rank];
            e[q] = 1.0;
            let col = qr.solve_r(&e);
            for (c, v) in col.iter().enumerate() {
                se[qr.kept()[c]] += v * v;
            }
        }
        se.iter_mut().for_each(|v| *v = (*v * s2).sqrt());
        (phi, se, resid, rank < order)
    });

    let degenerate = per_coeff.iter().filter(|c| c.3).count();
    if degenerate > 0 {
        log::warn!("{degenerate} harmonic coefficients have degenerate lag regressors; their AR terms were set to 0");
    }
    let mut phi = vec![vec![0.0; dim]; order];
    let mut std_errors = vec![vec![0.0; dim]; order];
    let mut data = vec![0.0; dim * steps * n_ensembles];
    for (j, (p, se, resid, _)) in per_coeff.into_iter().enumerate() {
        for lag in 0..order {
            phi[lag][j] = p[lag];
            std_errors[lag][j] = se[lag];
        }
        for (n, e) in resid.into_iter().enumerate() {
            data[n * dim + j] = e;
        }
    }
    let model = VarModel::new(l, phi)?;
    let unstable = model.unstable_coefficients();
    if !unstable.is_empty() {
        log::warn!("{} fitted AR polynomials are not stationary (first index {})", unstable.len(), unstable[0]);
    }
    Ok(VarFit {
        model,
        std_errors,
        residuals: VarResiduals::new(dim, n_ensembles, steps, data)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stability_test_cases() {
        assert!(ar_is_stable(&[]));
        assert!(ar_is_stable(&[0.9]));
        assert!(!ar_is_stable(&[1.0]));
        assert!(ar_is_stable(&[0.5, 0.3]));
        assert!(!ar_is_stable(&[0.6, 0.5]));
        assert!(ar_is_stable(&[0.3, 0.25, 0.2]));
        // 1 - 1.8z + 0.81z² has a double root at 1/0.9
        assert!(ar_is_stable(&[1.8, -0.81]));
        assert!(!ar_is_stable(&[2.0, -0.99]));
    }

    #[test]
    fn impulse_response_recursion() {
        let m = VarModel::uniform(1, &[0.5, 0.25]).unwrap();
        assert_eq!(m.impulse_response(0, 4), vec![1.0, 0.5, 0.5, 0.375]);
    }
}
