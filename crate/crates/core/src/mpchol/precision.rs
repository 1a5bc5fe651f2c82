use std::fmt;
use std::str::FromStr;

use half::f16;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Storage precision of a tile, ordered from narrowest to widest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Precision {
    Half,
    Single,
    Double,
}

impl Precision {
    pub fn bytes(self) -> usize {
        match self {
            Precision::Half => 2,
            Precision::Single => 4,
            Precision::Double => 8,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Precision::Half => "HP",
            Precision::Single => "SP",
            Precision::Double => "DP",
        }
    }

    /// Largest finite magnitude.
    pub fn max_value(self) -> f64 {
        match self {
            Precision::Half => f16::MAX.to_f64(),
            Precision::Single => f32::MAX as f64,
            Precision::Double => f64::MAX,
        }
    }

    /// Rounds `x` to this precision (nearest, ties to even) and back.
    /// Out-of-range magnitudes saturate; the flag reports it.
    pub fn round(self, x: f64) -> (f64, bool) {
        let max = self.max_value();
        let (x, sat) = if x.abs() > max { (max.copysign(x), true) } else { (x, false) };
        let y = match self {
            Precision::Half => f16::from_f64(x).to_f64(),
            Precision::Single => x as f32 as f64,
            Precision::Double => x,
        };
        (y, sat)
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Rounds every value to `to`, returning the number of saturated entries.
pub fn convert_values(values: &mut [f64], to: Precision) -> usize {
    if to == Precision::Double {
        return 0;
    }
    let mut saturated = 0;
    for v in values.iter_mut() {
        let (y, sat) = to.round(*v);
        *v = y;
        saturated += sat as usize;
    }
    saturated
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Dp,
    DpSp,
    DpSpHp,
    DpHp,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Dp, Variant::DpSp, Variant::DpSpHp, Variant::DpHp];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Dp => "dp",
            Variant::DpSp => "dpsp",
            Variant::DpSpHp => "dpsphp",
            Variant::DpHp => "dphp",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['/', '-', '_'], "").as_str() {
            "dp" => Ok(Variant::Dp),
            "dpsp" => Ok(Variant::DpSp),
            "dpsphp" => Ok(Variant::DpSpHp),
            "dphp" => Ok(Variant::DpHp),
            _ => Err(Error::InvalidArgument(format!(
                "unknown precision variant `{s}` (expected dp, dpsp, dpsphp or dphp)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionMap {
    pub variant: Variant,
    /// Tiles with `i - j < band_width_dp` stay DP.
    pub band_width_dp: usize,
    /// Share of off-band tiles kept SP under [`Variant::DpSpHp`].
    pub sp_fraction: f64,
}

impl PrecisionMap {
    pub fn new(variant: Variant, band_width_dp: usize, sp_fraction: f64) -> Result<Self> {
        if band_width_dp < 1 {
            return Err(Error::InvalidArgument("band_width_dp must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&sp_fraction) {
            return Err(Error::InvalidArgument(format!("sp_fraction {sp_fraction} is outside [0, 1]")));
        }
        Ok(Self {
            variant,
            band_width_dp,
            sp_fraction,
        })
    }

    /// Band of one tile, 5% SP.
    pub fn with_defaults(variant: Variant) -> Self {
        Self {
            variant,
            band_width_dp: 1,
            sp_fraction: 0.05,
        }
    }
}

/// Precision of each lower-triangular tile `(i, j)`, `i >= j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrecisionGrid {
    n_tiles: usize,
    cells: Vec<Precision>,
}

pub(crate) fn tri_index(i: usize, j: usize) -> usize {
    debug_assert!(j <= i);
    i * (i + 1) / 2 + j
}

impl PrecisionGrid {
    pub fn uniform(n_tiles: usize, p: Precision) -> Self {
        Self {
            n_tiles,
            cells: vec![p; n_tiles * (n_tiles + 1) / 2],
        }
    }

    pub fn n_tiles(&self) -> usize {
        self.n_tiles
    }

    pub fn get(&self, i: usize, j: usize) -> Precision {
        self.cells[tri_index(i, j)]
    }

    /// Tile counts `(DP, SP, HP)`.
    pub fn counts(&self) -> (usize, usize, usize) {
        let c = |p| self.cells.iter().filter(|&&x| x == p).count();
        (c(Precision::Double), c(Precision::Single), c(Precision::Half))
    }
}

/// DP inside the band; outside it SP or HP according to the variant.
/// `DpSpHp` keeps the `⌈sp_fraction · off_band⌉` off-band tiles closest to
/// the diagonal in SP, breaking distance ties by smaller row index.
pub fn assign_precisions(n_tiles: usize, map: &PrecisionMap) -> PrecisionGrid {
    let mut grid = PrecisionGrid::uniform(n_tiles, Precision::Double);
    let mut off_band: Vec<(usize, usize)> = Vec::new();
    for i in 0..n_tiles {
        for j in 0..=i {
            if i - j >= map.band_width_dp {
                off_band.push((i, j));
            }
        }
    }
    let fill = |grid: &mut PrecisionGrid, tiles: &[(usize, usize)], p| {
        for &(i, j) in tiles {
            grid.cells[tri_index(i, j)] = p;
        }
    };
    match map.variant {
        Variant::Dp => {}
        Variant::DpSp => fill(&mut grid, &off_band, Precision::Single),
        Variant::DpHp => fill(&mut grid, &off_band, Precision::Half),
        Variant::DpSpHp => {
            off_band.sort_by_key(|&(i, j)| (i - j, i));
            let n_sp = ((map.sp_fraction * off_band.len() as f64) - 1e-9).ceil().max(0.0) as usize;
            let n_sp = n_sp.min(off_band.len());
            fill(&mut grid, &off_band[..n_sp], Precision::Single);
            fill(&mut grid, &off_band[n_sp..], Precision::Half);
        }
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_cases() {
        assert_eq!(Precision::Half.round(1.0), (1.0, false));
        let third = 1.0 / 3.0;
        let (s, _) = Precision::Single.round(third);
        assert!((s - third).abs() < 2f64.powi(-24) * third * 2.0);
        assert_eq!(Precision::Half.round(70000.0), (65504.0, true));
        assert_eq!(Precision::Half.round(-1e9), (-65504.0, true));
        let mut v = vec![1.0, 7e4, 2.5];
        assert_eq!(convert_values(&mut v, Precision::Half), 1);
        // 2049 sits halfway between the HP neighbours 2048 and 2050; ties go to even.
        assert_eq!(Precision::Half.round(2049.0).0, 2048.0);
    }

    #[test]
    fn variant_maps() {
        let all_dp = assign_precisions(6, &PrecisionMap::with_defaults(Variant::Dp));
        assert_eq!(all_dp.counts(), (21, 0, 0));
        let hp = assign_precisions(4, &PrecisionMap::with_defaults(Variant::DpHp));
        assert_eq!(hp.counts(), (4, 0, 6));
        let mixed = assign_precisions(10, &PrecisionMap::with_defaults(Variant::DpSpHp));
        assert_eq!(mixed.counts(), (10, 3, 42));
        assert_eq!(mixed.get(1, 0), Precision::Single);
        assert_eq!(mixed.get(2, 1), Precision::Single);
        assert_eq!(mixed.get(3, 2), Precision::Single);
        assert_eq!(mixed.get(4, 3), Precision::Half);
        let banded = assign_precisions(5, &PrecisionMap::new(Variant::DpSp, 2, 0.0).unwrap());
        assert_eq!(banded.get(1, 0), Precision::Double);
        assert_eq!(banded.get(2, 0), Precision::Single);
        assert!(PrecisionMap::new(Variant::Dp, 0, 0.1).is_err());
        assert_eq!("DP/SP/HP".parse::<Variant>().unwrap(), Variant::DpSpHp);
    }
}
