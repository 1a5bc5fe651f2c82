use half::f16;

use crate::error::{Error, Result};

use super::precision::{tri_index, Precision, PrecisionGrid};

#[derive(Debug, Clone, PartialEq)]
enum Payload {
    Double(Vec<f64>),
    Single(Vec<f32>),
    Half(Vec<f16>),
}

/// One row-major tile held at its storage precision.
#[derive(Debug, Clone, PartialEq)]
pub struct Tile {
    rows: usize,
    cols: usize,
    payload: Payload,
}

impl Tile {
    /// Quantises `values`; returns the tile and the number of saturated entries.
    pub fn from_f64(rows: usize, cols: usize, precision: Precision, values: &[f64]) -> (Self, usize) {
        debug_assert_eq!(values.len(), rows * cols);
        let mut sat = 0;
        let mut narrow = |x: f64| {
            let (y, s) = precision.round(x);
            sat += s as usize;
            y
        };
        let payload = match precision {
            Precision::Double => Payload::Double(values.to_vec()),
            Precision::Single => Payload::Single(values.iter().map(|&x| narrow(x) as f32).collect()),
            Precision::Half => Payload::Half(values.iter().map(|&x| f16::from_f64(narrow(x))).collect()),
        };
        (Self { rows, cols, payload }, sat)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn precision(&self) -> Precision {
        match self.payload {
            Payload::Double(_) => Precision::Double,
            Payload::Single(_) => Precision::Single,
            Payload::Half(_) => Precision::Half,
        }
    }

    /// Exact widening to DP.
    pub fn to_f64(&self) -> Vec<f64> {
        match &self.payload {
            Payload::Double(v) => v.clone(),
            Payload::Single(v) => v.iter().map(|&x| x as f64).collect(),
            Payload::Half(v) => v.iter().map(|x| x.to_f64()).collect(),
        }
    }

    /// Overwrites the payload from DP values, rounding to the tile's precision.
    pub fn store(&mut self, values: &[f64]) -> usize {
        let (t, sat) = Tile::from_f64(self.rows, self.cols, self.precision(), values);
        *self = t;
        sat
    }

    pub fn storage_bytes(&self) -> usize {
        self.rows * self.cols * self.precision().bytes()
    }
}

/// Lower triangle of a symmetric `n x n` matrix split into `b x b` tiles
/// (the last tile row/column may be shorter).
#[derive(Debug, Clone, PartialEq)]
pub struct TiledMatrix {
    n: usize,
    tile_size: usize,
    grid: PrecisionGrid,
    tiles: Vec<Tile>,
    input_saturations: usize,
}

impl TiledMatrix {
    pub fn n_tiles_for(n: usize, tile_size: usize) -> usize {
        n.div_ceil(tile_size)
    }

    /// Builds from the lower triangle of a row-major `n x n` matrix. Diagonal
    /// tiles must be DP in `grid`. Off-diagonal tiles are quantised on entry.
    pub fn from_dense(n: usize, tile_size: usize, a: &[f64], grid: PrecisionGrid) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::ShapeMismatch(format!("{} values for a {n}x{n} matrix", a.len())));
        }
        Self::from_fn(n, tile_size, grid, |i, j| a[i * n + j])
    }

    pub fn from_fn(n: usize, tile_size: usize, grid: PrecisionGrid, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("matrix dimension must be positive".into()));
        }
        if tile_size < 8 {
            return Err(Error::InvalidArgument(format!("tile size {tile_size} is below the minimum of 8")));
        }
        let nt = Self::n_tiles_for(n, tile_size);
        if grid.n_tiles() != nt {
            return Err(Error::ShapeMismatch(format!(
                "precision grid has {} tiles per side, matrix needs {nt}",
                grid.n_tiles()
            )));
        }
        if let Some(k) = (0..nt).find(|&k| grid.get(k, k) != Precision::Double) {
            return Err(Error::InvalidArgument(format!("diagonal tile {k} must be DP")));
        }
        let mut tiles = Vec::with_capacity(nt * (nt + 1) / 2);
        let mut sat = 0;
        for ti in 0..nt {
            for tj in 0..=ti {
                let (r0, c0) = (ti * tile_size, tj * tile_size);
                let rows = tile_size.min(n - r0);
                let cols = tile_size.min(n - c0);
                let mut v = vec![0.0; rows * cols];
                for r in 0..rows {
                    for c in 0..cols {
                        let (i, j) = (r0 + r, c0 + c);
                        // upper part of diagonal tiles mirrors the lower triangle
                        v[r * cols + c] = if j <= i { f(i, j) } else { f(j, i) };
                    }
                }
                let (t, s) = Tile::from_f64(rows, cols, grid.get(ti, tj), &v);
                sat += s;
                tiles.push(t);
            }
        }
        Ok(Self {
            n,
            tile_size,
            grid,
            tiles,
            input_saturations: sat,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tile_size(&self) -> usize {
        self.tile_size
    }

    pub fn n_tiles(&self) -> usize {
        self.grid.n_tiles()
    }

    pub fn grid(&self) -> &PrecisionGrid {
        &self.grid
    }

    pub fn tile(&self, i: usize, j: usize) -> &Tile {
        &self.tiles[tri_index(i, j)]
    }

    /// Entries that saturated while quantising the input.
    pub fn input_saturations(&self) -> usize {
        self.input_saturations
    }

    pub fn storage_bytes(&self) -> usize {
        self.tiles.iter().map(Tile::storage_bytes).sum()
    }

    pub fn all_dp_bytes(&self) -> usize {
        self.tiles.iter().map(|t| t.rows * t.cols * 8).sum()
    }

    pub(crate) fn take_tiles(&mut self) -> Vec<Tile> {
        std::mem::take(&mut self.tiles)
    }

    pub(crate) fn put_tiles(&mut self, tiles: Vec<Tile>) {
        self.tiles = tiles;
    }

    /// Row-major `n x n` copy of the lower triangle, widened to DP; the strict
    /// upper triangle is zero.
    pub fn to_dense_lower(&self) -> Vec<f64> {
        let (n, b) = (self.n, self.tile_size);
        let mut out = vec![0.0; n * n];
        for ti in 0..self.n_tiles() {
            for tj in 0..=ti {
                let t = self.tile(ti, tj);
                let v = t.to_f64();
                for r in 0..t.rows {
                    for c in 0..t.cols {
                        let (i, j) = (ti * b + r, tj * b + c);
                        if j <= i {
                            out[i * n + j] = v[r * t.cols + c];
                        }
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpchol::precision::{assign_precisions, PrecisionMap, Variant};

    #[test]
    fn ragged_tiles_and_storage() {
        let n = 20;
        let grid = assign_precisions(3, &PrecisionMap::with_defaults(Variant::DpHp));
        let m = TiledMatrix::from_fn(n, 8, grid, |i, j| (i * n + j) as f64 / 1000.0).unwrap();
        assert_eq!(m.n_tiles(), 3);
        assert_eq!(m.tile(2, 0).rows(), 4);
        assert_eq!(m.tile(2, 0).cols(), 8);
        assert_eq!(m.tile(2, 2).cols(), 4);
        // DP diagonal: 64 + 64 + 16 entries; HP off-diagonal: 64 + 32 + 32.
        assert_eq!(m.storage_bytes(), (64 + 64 + 16) * 8 + (64 + 32 + 32) * 2);
        assert_eq!(m.all_dp_bytes(), (64 * 3 + 16 + 32 * 2) * 8);
        let dense = m.to_dense_lower();
        assert_eq!(dense[19 * n + 19], (19 * n + 19) as f64 / 1000.0);
        assert_eq!(dense[3 * n + 5], 0.0);
    }

    #[test]
    fn rejects_bad_layouts() {
        let grid = PrecisionGrid::uniform(2, Precision::Half);
        assert!(TiledMatrix::from_fn(16, 8, grid, |_, _| 0.0).is_err());
        let grid = PrecisionGrid::uniform(2, Precision::Double);
        assert!(TiledMatrix::from_fn(16, 4, grid.clone(), |_, _| 0.0).is_err());
        assert!(TiledMatrix::from_fn(30, 8, grid, |_, _| 0.0).is_err());
    }
}
