//! Cubic splines on uniform knots and the tensor-product upsampler.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::par;

use super::{EquiangularField, FieldSeries, GridSpec};

/// Boundary treatment of a uniform-knot cubic spline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Knots cover one period `[x0, x0 + n·h)`.
    Periodic,
    /// Third derivative continuous across the first and last interior knots.
    NotAKnot,
}

/// Interpolating cubic spline through `y` at `x0 + k·h`.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x0: f64,
    h: f64,
    y: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
    boundary: Boundary,
}

impl CubicSpline {
    pub fn new(x0: f64, h: f64, y: &[f64], boundary: Boundary) -> Self {
        let m = match boundary {
            Boundary::Periodic => periodic_moments(y, h),
            Boundary::NotAKnot => not_a_knot_moments(y, h),
        };
        Self {
            x0,
            h,
            y: y.to_vec(),
            m,
            boundary,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.y.len();
        if n == 1 {
            return self.y[0];
        }
        let s = (x - self.x0) / self.h;
        let (k, k1, t) = match self.boundary {
            Boundary::Periodic => {
                let s = s.rem_euclid(n as f64);
                let k = (s.floor() as usize).min(n - 1);
                (k, (k + 1) % n, s - k as f64)
            }
            Boundary::NotAKnot => {
                let k = (s.floor().max(0.0) as usize).min(n - 2);
                (k, k + 1, s - k as f64)
            }
        };
        let a = 1.0 - t;
        let h2 = self.h * self.h / 6.0;
        a * self.y[k]
            + t * self.y[k1]
            + h2 * ((a * a * a - a) * self.m[k] + (t * t * t - t) * self.m[k1])
    }
}

fn second_difference(y: &[f64], i: usize, h: f64, periodic: bool) -> f64 {
    let n = y.len();
    let (prev, next) = if periodic {
        (y[(i + n - 1) % n], y[(i + 1) % n])
    } else {
        (y[i - 1], y[i + 1])
    };
    6.0 * (next - 2.0 * y[i] + prev) / (h * h)
}

/// Solves the tridiagonal system with constant off-diagonals `1` and the
/// given diagonal.
fn solve_tridiagonal(diag: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    if n == 0 {
        return;
    }
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    rhs[0] /= beta;
    for i in 1..n {
        c[i] = 1.0 / beta;
        beta = diag[i] - c[i];
        rhs[i] = (rhs[i] - rhs[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i + 1] * rhs[i + 1];
    }
}

fn periodic_moments(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    if n < 3 {
        // Too few knots for a cyclic cubic; fall back to linear pieces.
        return vec![0.0; n];
    }
    let rhs: Vec<f64> = (0..n).map(|i| second_difference(y, i, h, true)).collect();
    // Cyclic system with diagonal 4 and unit corners, via Sherman-Morrison.
    let gamma = -4.0;
    let mut diag = vec![4.0; n];
    diag[0] -= gamma;
    diag[n - 1] -= 1.0 / gamma;
    let mut x = rhs;
    solve_tridiagonal(&diag, &mut x);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = 1.0;
    solve_tridiagonal(&diag, &mut u);
    let factor = (x[0] + x[n - 1] / gamma) / (1.0 + u[0] + u[n - 1] / gamma);
    x.iter().zip(&u).map(|(xi, ui)| xi - factor * ui).collect()
}

fn not_a_knot_moments(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    match n {
        0..=2 => vec![0.0; n],
        3 => {
            // A single parabola: constant curvature.
            let m = second_difference(y, 1, h, false) / 6.0;
            vec![m; 3]
        }
        _ => {
            // Unknowns M_1..M_{n-2}; the end conditions fold into the first
            // and last rows, which become 6·M = rhs.
            let k = n - 2;
            let mut rhs: Vec<f64> = (1..n - 1).map(|i| second_difference(y, i, h, false)).collect();
            let mut diag = vec![4.0; k];
            diag[0] = 6.0;
            diag[k - 1] = 6.0;
            if k == 2 {
                rhs[0] /= 6.0;
                rhs[1] /= 6.0;
            } else {
                solve_banded_ends(&mut diag, &mut rhs);
            }
            let mut m = Vec::with_capacity(n);
            m.push(2.0 * rhs[0] - rhs[1]);
            m.extend_from_slice(&rhs);
            m.push(2.0 * rhs[k - 1] - rhs[k - 2]);
            m
        }
    }
}

/// Tridiagonal solve where the first row has no super-diagonal and the last
/// row no sub-diagonal entry.
fn solve_banded_ends(diag: &mut [f64], rhs: &mut [f64]) {
    let k = diag.len();
    let lower = |i: usize| if i == k - 1 { 0.0 } else { 1.0 };
    let upper = |i: usize| if i == 0 { 0.0 } else { 1.0 };
    let mut c = vec![0.0; k];
    c[0] = upper(0) / diag[0];
    rhs[0] /= diag[0];
    for i in 1..k {
        let beta = diag[i] - lower(i) * c[i - 1];
        c[i] = if i + 1 < k { upper(i) / beta } else { 0.0 };
        rhs[i] = (rhs[i] - lower(i) * rhs[i - 1]) / beta;
    }
    for i in (0..k - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
}

fn upsample_field(src: &EquiangularField, target: GridSpec) -> EquiangularField {
    let s = src.spec();
    let h_phi = 2.0 * PI / s.n_phi() as f64;
    let h_theta = PI / (s.n_theta() - 1) as f64;
    let target_phis = target.phis();
    // First pass: each source ring onto the target longitudes.
    let mut rings = vec![0.0; s.n_theta() * target.n_phi()];
    for i in 0..s.n_theta() {
        let sp = CubicSpline::new(0.0, h_phi, src.ring(i), Boundary::Periodic);
        let row = &mut rings[i * target.n_phi()..(i + 1) * target.n_phi()];
        for (v, &phi) in row.iter_mut().zip(&target_phis) {
            *v = sp.eval(phi);
        }
    }
    // Second pass: each target meridian onto the target colatitudes.
    let mut out = vec![0.0; target.n_points()];
    let mut column = vec![0.0; s.n_theta()];
    for j in 0..target.n_phi() {
        for (i, c) in column.iter_mut().enumerate() {
            *c = rings[i * target.n_phi() + j];
        }
        let sp = CubicSpline::new(0.0, h_theta, &column, Boundary::NotAKnot);
        for i in 0..target.n_theta() {
            out[i * target.n_phi() + j] = sp.eval(target.theta(i));
        }
    }
    EquiangularField::from_parts(target, out, src.time_index(), src.ensemble_index())
}

/// Bicubic interpolation of every slice onto `target`: periodic in longitude,
/// not-a-knot along each meridian.
pub fn upsample_spline(series: &FieldSeries, target: GridSpec) -> Result<FieldSeries> {
    let s = series.spec();
    if target.n_theta() < s.n_theta() || target.n_phi() < s.n_phi() {
        return Err(Error::InvalidArgument(format!(
            "upsampling from {}x{} to {}x{} would reduce resolution",
            s.n_theta(),
            s.n_phi(),
            target.n_theta(),
            target.n_phi()
        )));
    }
    if target.band_limit() < s.band_limit() {
        return Err(Error::InvalidArgument(format!(
            "target band limit {} is below the source band limit {}",
            target.band_limit(),
            s.band_limit()
        )));
    }
    let fields = par::map_slice(series.fields(), |f| upsample_field(f, target));
    FieldSeries::new(target, series.n_times(), series.n_ensembles(), fields)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_spline_interpolates_and_is_smooth_for_trig() {
        let n = 32;
        let h = 2.0 * PI / n as f64;
        let y: Vec<f64> = (0..n).map(|k| (3.0 * k as f64 * h).sin()).collect();
        let sp = CubicSpline::new(0.0, h, &y, Boundary::Periodic);
        for k in 0..n {
            assert!((sp.eval(k as f64 * h) - y[k]).abs() < 1e-14);
        }
        let x = 1.2345;
        assert!((sp.eval(x) - (3.0 * x).sin()).abs() < 2e-3);
        assert!((sp.eval(x + 2.0 * PI) - sp.eval(x)).abs() < 1e-12);
    }

    #[test]
    fn not_a_knot_reproduces_cubics() {
        let h = 0.3;
        let f = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x - 0.25 * x * x * x;
        for n in [4, 5, 9] {
            let y: Vec<f64> = (0..n).map(|k| f(k as f64 * h)).collect();
            let sp = CubicSpline::new(0.0, h, &y, Boundary::NotAKnot);
            for x in [0.05, 0.41, 0.77, (n - 1) as f64 * h - 0.01] {
                assert!((sp.eval(x) - f(x)).abs() < 1e-12, "n={n} x={x}");
            }
        }
        let y: Vec<f64> = (0..3).map(|k| (k as f64 * h).powi(2)).collect();
        let sp = CubicSpline::new(0.0, h, &y, Boundary::NotAKnot);
        assert!((sp.eval(0.2) - 0.04).abs() < 1e-14);
    }

    #[test]
    fn constants_survive_upsampling() {
        let s = GridSpec::new(5, 8, 4).unwrap();
        let t = GridSpec::new(9, 16, 8).unwrap();
        let series = FieldSeries::single(EquiangularField::constant(s, 3.25));
        let up = upsample_spline(&series, t).unwrap();
        assert!(up.get(0, 0).values().iter().all(|v| (v - 3.25).abs() < 1e-14));
        assert!(upsample_spline(&up, s).is_err());
    }

    fn cos_theta_error(n_theta: usize) -> f64 {
        let s = GridSpec::new(n_theta, 2 * n_theta - 2, n_theta - 1).unwrap();
        let t = GridSpec::new(2 * n_theta - 1, 4 * n_theta - 4, 2 * n_theta - 2).unwrap();
        let f = EquiangularField::from_fn(s, |th, _| th.cos()).unwrap();
        let up = upsample_spline(&FieldSeries::single(f), t).unwrap();
        let exact = EquiangularField::from_fn(t, |th, _| th.cos()).unwrap();
        up.get(0, 0).max_abs_diff(&exact)
    }

    #[test]
    fn cos_theta_is_recovered_with_fourth_order_convergence() {
        let coarse = cos_theta_error(33);
        let fine = cos_theta_error(65);
        assert!(fine < 1e-6, "{fine}");
        let order = (coarse / fine).log2();
        assert!(order > 3.5, "observed order {order}");
    }
}
