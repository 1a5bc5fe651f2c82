//! Temporal model of the harmonic coefficients and emulation sampling.
//!
//! The packed real coefficient vector `f_t` (length L²) follows a diagonal
//! VAR(P) driven by Gaussian innovations `ξ_t = V η_t`. Emulated fields add
//! pointwise Gaussian noise of variance `v²` to the synthesised field before the
//! mean trend and scale are restored.

mod innovation;
mod noise;
mod var;

pub use innovation::{
    estimate_innovation_covariance, factor_with_nugget, second_moment, InnovationConfig, InnovationModel,
};
pub use noise::{fit_noise_field, NoiseField};
pub use var::{ar_is_stable, fit_var, VarFit, VarModel, VarResiduals, DEFAULT_ORDER};

use crate::error::{Error, Result};
use crate::grid::{EquiangularField, FieldSeries};
use crate::par;
use crate::pipeline::EmulatorModel;
use crate::rng::{derive_seed, NormalSampler};
use crate::sht::{HarmonicVector, ShtPlan};
use crate::trend;

/// Leading AR steps discarded per lag before output starts.
pub const BURN_IN_PER_LAG: usize = 10;

pub fn burn_in(order: usize) -> usize {
    BURN_IN_PER_LAG * order
}

/// Runs the VAR recursion from a zero history, discarding the burn-in, and
/// returns `t_out` coefficient vectors. Innovations are drawn serially from `rng`.
pub fn simulate_coefficients(
    var: &VarModel,
    innovation: &InnovationModel,
    t_out: usize,
    rng: &mut NormalSampler,
) -> Result<Vec<HarmonicVector>> {
    let dim = var.dim();
    if innovation.dim() != dim {
        return Err(Error::ShapeMismatch(format!(
            "innovation dimension {} does not match VAR dimension {dim}",
            innovation.dim()
        )));
    }
    let p = var.order();
    let burn = burn_in(p);
    let mut history: Vec<Vec<f64>> = Vec::with_capacity(burn + t_out);
    let mut eta = vec![0.0; dim];
    for t in 0..burn + t_out {
        rng.fill_normal(&mut eta);
        let mut f = vec![0.0; dim];
        innovation.apply_factor(&eta, &mut f);
        for lag in 1..=p.min(t) {
            let prev = &history[t - lag];
            for ((x, phi), y) in f.iter_mut().zip(var.phi(lag)).zip(prev) {
                *x += phi * y;
            }
        }
        history.push(f);
    }
    Ok(history
        .into_iter()
        .skip(burn)
        .map(|c| HarmonicVector::from_parts(var.band_limit(), c))
        .collect())
}

/// Covariance of the emitted coefficient vector at output step `t` (from 1)
/// under [`simulate_coefficients`]: `C_jk = (V Vᵀ)_jk Σ_s ψ_j(s) ψ_k(s)`.
pub fn implied_coefficient_covariance(var: &VarModel, innovation: &InnovationModel, t: usize) -> Vec<f64> {
    let dim = var.dim();
    let steps = burn_in(var.order()) + t;
    let psi: Vec<Vec<f64>> = (0..dim).map(|j| var.impulse_response(j, steps)).collect();
    let u = innovation.sampling_covariance();
    let mut c = vec![0.0; dim * dim];
    for j in 0..dim {
        for k in 0..=j {
            let s: f64 = psi[j].iter().zip(&psi[k]).map(|(a, b)| a * b).sum();
            c[j * dim + k] = u[j * dim + k] * s;
            c[k * dim + j] = c[j * dim + k];
        }
    }
    c
}

/// Field value at every grid point for each unit coefficient: row `loc`,
/// column `j`, row-major `n_points x L²`.
pub fn synthesis_matrix(plan: &ShtPlan) -> Vec<f64> {
    let spec = plan.spec();
    let dim = spec.n_coeffs();
    let n_points = spec.n_points();
    let cols = par::map_range(dim, |j| plan.inverse_unchecked(&HarmonicVector::unit(spec.band_limit(), j)).into_values());
    let mut out = vec![0.0; n_points * dim];
    for (j, col) in cols.iter().enumerate() {
        for (loc, v) in col.iter().enumerate() {
            out[loc * dim + j] = *v;
        }
    }
    out
}

/// Model-implied per-location standard deviation of the emulated field at
/// output step `t`: `σ sqrt(yᵀ C y + v²)` with `y` the synthesis row.
pub fn implied_std(model: &EmulatorModel, plan: &ShtPlan, t: usize) -> Vec<f64> {
    let dim = model.var.dim();
    let c = implied_coefficient_covariance(&model.var, &model.innovation, t);
    let rows = synthesis_matrix(plan);
    par::map_range(model.spec.n_points(), |loc| {
        let y = &rows[loc * dim..(loc + 1) * dim];
        let mut q = 0.0;
        for j in 0..dim {
            q += y[j] * crate::linalg::dot(&c[j * dim..(j + 1) * dim], y);
        }
        model.trend.sigma(loc) * (q + model.noise.v_squared()[loc]).sqrt()
    })
}

/// Draws `n_ensembles` independent emulations of `t_out` steps. Member `r`
/// uses the generator seeded with `derive_seed(seed, r)`.
pub fn emulate(model: &EmulatorModel, t_out: usize, n_ensembles: usize, seed: u64) -> Result<FieldSeries> {
    let plan = ShtPlan::new(model.spec)?;
    emulate_with_plan(model, &plan, t_out, n_ensembles, seed)
}

pub fn emulate_with_plan(
    model: &EmulatorModel,
    plan: &ShtPlan,
    t_out: usize,
    n_ensembles: usize,
    seed: u64,
) -> Result<FieldSeries> {
    model.check_complete()?;
    if t_out == 0 || n_ensembles == 0 {
        return Err(Error::InvalidArgument("emulation needs T >= 1 and at least one ensemble member".into()));
    }
    if plan.spec() != &model.spec {
        return Err(Error::ShapeMismatch("plan grid differs from the model grid".into()));
    }
    let members = par::map_range(n_ensembles, |r| emulate_member(model, plan, t_out, derive_seed(seed, r as u64)));
    let mut fields = Vec::with_capacity(t_out * n_ensembles);
    for m in members {
        fields.extend(m?.into_fields());
    }
    FieldSeries::new(model.spec, t_out, n_ensembles, fields)
}

/// One emulated member of `t_out` steps drawn from a generator seeded with
/// `member_seed`.
pub fn emulate_member(model: &EmulatorModel, plan: &ShtPlan, t_out: usize, member_seed: u64) -> Result<FieldSeries> {
    let mut rng = NormalSampler::new(member_seed);
    let coeffs = simulate_coefficients(&model.var, &model.innovation, t_out, &mut rng)?;
    let mut fields: Vec<EquiangularField> = coeffs.iter().map(|c| plan.inverse_unchecked(c)).collect();
    let v: Vec<f64> = model.noise.v_squared().iter().map(|x| x.sqrt()).collect();
    let mut eps = vec![0.0; v.len()];
    for f in fields.iter_mut() {
        rng.fill_normal(&mut eps);
        let values: Vec<f64> = f.values().iter().zip(&eps).zip(&v).map(|((z, e), s)| z + s * e).collect();
        *f = EquiangularField::from_parts(model.spec, values, 0, 0);
    }
    let z = FieldSeries::new(model.spec, t_out, 1, fields)?;
    trend::retrend(&z, &model.trend, &model.forcing)
}
