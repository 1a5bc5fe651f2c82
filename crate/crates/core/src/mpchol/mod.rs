//! Tiled Cholesky with per-tile storage precision.
//!
//! Tiles are stored in DP, SP or HP according to a [`PrecisionMap`]. Every
//! kernel widens its operands to DP, computes, and rounds the result back to the
//! tile's storage precision. An operand flowing into a narrower tile is first
//! rounded to that tile's precision, either once by its producer
//! ([`ConversionSite::Sender`]) or by each consumer ([`ConversionSite::Receiver`]).

mod graph;
mod kernels;
mod precision;
mod scheduler;
mod stats;
mod tile;

use std::time::Instant;

pub use graph::{build_task_graph, KernelCounts, Task, TaskGraph, TaskKind};
pub use precision::{assign_precisions, convert_values, Precision, PrecisionGrid, PrecisionMap, Variant};
pub use scheduler::ConversionSite;
pub use stats::FactorizationStats;
pub use tile::{Tile, TiledMatrix};

use crate::error::{Error, Result};
use crate::rng::NormalSampler;

pub const DEFAULT_TILE_SIZE: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CholeskyOptions {
    pub workers: usize,
    pub site: ConversionSite,
}

impl Default for CholeskyOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            site: ConversionSite::Sender,
        }
    }
}

impl CholeskyOptions {
    pub fn with_workers(workers: usize) -> Self {
        Self {
            workers,
            ..Self::default()
        }
    }
}

/// Rounds a tile to another precision; returns the new tile and the number of
/// saturated entries. The site only matters for conversion accounting.
pub fn convert_tile(tile: &Tile, to: Precision, _site: ConversionSite) -> (Tile, usize) {
    let mut v = tile.to_f64();
    let sat = if to < tile.precision() { convert_values(&mut v, to) } else { 0 };
    let (t, more) = Tile::from_f64(tile.rows(), tile.cols(), to, &v);
    (t, sat + more)
}

/// Factorises `matrix` in place into its lower Cholesky factor. The matrix's
/// precision grid must be the one `map` assigns.
pub fn tiled_cholesky(matrix: &mut TiledMatrix, map: &PrecisionMap, options: CholeskyOptions) -> Result<FactorizationStats> {
    let nt = matrix.n_tiles();
    if *matrix.grid() != assign_precisions(nt, map) {
        return Err(Error::ShapeMismatch("tile precisions differ from the precision map".into()));
    }
    let graph = build_task_graph(nt);
    let start = Instant::now();
    let tiles = matrix.take_tiles();
    let (tiles, counters, failed) = scheduler::run(&graph, matrix.grid(), matrix.tile_size(), tiles, options.workers, options.site);
    matrix.put_tiles(tiles);
    if let Some(e) = failed {
        return Err(e);
    }
    let wall = start.elapsed().as_secs_f64();
    if counters.saturations > 0 {
        log::warn!("{} tile entries saturated during factorisation", counters.saturations);
    }
    Ok(FactorizationStats::collect(
        matrix,
        map,
        stats::RunInfo {
            workers: options.workers.max(1),
            site: options.site,
            conversions: counters.conversions,
            saturations: counters.saturations,
            wall_clock_s: wall,
        },
    ))
}

/// Tiles, factorises and measures the relative residual of a dense
/// row-major SPD matrix.
pub fn factorize_dense(
    a: &[f64],
    n: usize,
    tile_size: usize,
    map: &PrecisionMap,
    options: CholeskyOptions,
) -> Result<(TiledMatrix, FactorizationStats)> {
    let grid = assign_precisions(TiledMatrix::n_tiles_for(n, tile_size), map);
    let mut m = TiledMatrix::from_dense(n, tile_size, a, grid)?;
    let mut stats = tiled_cholesky(&mut m, map, options)?;
    stats.relative_residual = Some(relative_residual(a, &m.to_dense_lower(), n));
    Ok((m, stats))
}

/// Straightforward untiled DP Cholesky; returns the lower factor row-major.
pub fn cholesky_untiled(a: &[f64], n: usize) -> Result<Vec<f64>> {
    if a.len() != n * n {
        return Err(Error::ShapeMismatch(format!("{} values for a {n}x{n} matrix", a.len())));
    }
    let mut l = a.to_vec();
    crate::linalg::cholesky_lower(&mut l, n).map_err(|row| Error::NotPositiveDefinite { tile: 0, row })?;
    Ok(l)
}

/// `‖A − L Lᵀ‖_F / ‖A‖_F` for row-major `a` and lower factor `l`.
pub fn relative_residual(a: &[f64], l: &[f64], n: usize) -> f64 {
    let rows: Vec<(f64, f64)> = crate::par::map_range(n, |i| {
        let li = &l[i * n..i * n + i + 1];
        let (mut num, mut den) = (0.0, 0.0);
        for j in 0..=i {
            let s: f64 = li[..=j].iter().zip(&l[j * n..j * n + j + 1]).map(|(x, y)| x * y).sum();
            let w = if i == j { 1.0 } else { 2.0 };
            num += w * (a[i * n + j] - s).powi(2);
            den += w * a[i * n + j].powi(2);
        }
        (num, den)
    });
    let (num, den) = rows.iter().fold((0.0, 0.0), |(x, y), (a, b)| (x + a, y + b));
    (num / den).sqrt()
}

/// Random SPD test matrix: an exponential covariance over uniformly scattered
/// points in the unit square plus a diagonal term of 0.05.
pub fn random_spd(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = NormalSampler::new(seed);
    let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.uniform(), rng.uniform())).collect();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let d = (pts[i].0 - pts[j].0).hypot(pts[i].1 - pts[j].1);
            let v = (-d / 0.2).exp() + if i == j { 0.05 } else { 0.0 };
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversion_examples() {
        let one = Tile::from_f64(1, 1, Precision::Double, &[1.0]).0;
        let (h, sat) = convert_tile(&one, Precision::Half, ConversionSite::Sender);
        assert_eq!((h.to_f64()[0], sat), (1.0, 0));
        let big = Tile::from_f64(1, 1, Precision::Double, &[70000.0]).0;
        let (h, sat) = convert_tile(&big, Precision::Half, ConversionSite::Receiver);
        assert_eq!((h.to_f64()[0], sat), (65504.0, 1));
        let (back, _) = convert_tile(&h, Precision::Double, ConversionSite::Sender);
        assert_eq!(back.to_f64()[0], 65504.0);
    }

    #[test]
    fn two_by_two_hand_case() {
        let map = PrecisionMap::with_defaults(Variant::Dp);
        let (m, stats) = factorize_dense(&[4.0, 2.0, 2.0, 3.0], 2, 8, &map, CholeskyOptions::default()).unwrap();
        let l = m.to_dense_lower();
        assert_eq!(l, vec![2.0, 0.0, 1.0, 2f64.sqrt()]);
        assert_eq!(stats.bytes_saved, 0);
        assert_eq!(stats.potrf, 1);
    }

    #[test]
    fn non_spd_reports_tile() {
        let n = 24;
        let mut a = random_spd(n, 3);
        a[20 * n + 20] = -1.0;
        let map = PrecisionMap::with_defaults(Variant::Dp);
        match factorize_dense(&a, n, 8, &map, CholeskyOptions::default()) {
            Err(Error::NotPositiveDefinite { tile, row }) => {
                assert_eq!(tile, 2);
                assert_eq!(row, 20);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
