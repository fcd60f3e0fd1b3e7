//! Local spectral response function
//!
//! ```text
//! g(r,u) = (1/8πu) Σ_n ∫_BZ d³k |u_nk(r)|² δ(u - u_nk)
//! ```
//!
//! in reduced units, so that free space gives `g(u) = u`.

mod cell;
mod mesh;
mod sweep;

pub use cell::{spread_box, spread_cell};
pub use mesh::BZMesh;
pub use sweep::{band_table, compute_lsrf, lsrf_sweep, LsrfAccumulator, SweepOutput};

use serde::{Deserialize, Serialize};

use crate::bands::KPoint;
use crate::error::{Error, Result};

/// Uniform bins of width `du` centred on `u_i = (i+1)·du`; bin `i` is the
/// half-open interval `[u_i - du/2, u_i + du/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyGrid {
    pub spacing: f64,
    pub n_bins: usize,
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        Self {
            spacing: 0.005,
            n_bins: 770,
        }
    }
}

impl FrequencyGrid {
    pub fn new(spacing: f64, n_bins: usize) -> Result<Self> {
        let g = Self { spacing, n_bins };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0 && self.spacing.is_finite()) || self.n_bins == 0 {
            return Err(Error::InvalidInput(format!(
                "frequency grid needs spacing > 0 and at least one bin (got {} x {})",
                self.spacing, self.n_bins
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_bins
    }

    pub fn is_empty(&self) -> bool {
        self.n_bins == 0
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn centre(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.spacing
    }

    pub fn centres(&self) -> Vec<f64> {
        (0..self.n_bins).map(|i| self.centre(i)).collect()
    }

    pub fn u_max(&self) -> f64 {
        self.centre(self.n_bins - 1)
    }

    pub fn bin_lower(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.spacing
    }

    pub fn bin_upper(&self, i: usize) -> f64 {
        (i as f64 + 1.5) * self.spacing
    }

    pub fn bin_of(&self, u: f64) -> Option<usize> {
        let x = (u / self.spacing - 0.5).floor();
        (x >= 0.0 && x < self.n_bins as f64).then_some(x as usize)
    }

    /// Bins overlapping `[lo, hi]`, clipped to the grid.
    pub fn bin_range(&self, lo: f64, hi: f64) -> Option<(usize, usize)> {
        let first = (lo / self.spacing - 0.5).floor().max(0.0);
        let last = (hi / self.spacing - 0.5).floor().min(self.n_bins as f64 - 1.0);
        (last >= first && last >= 0.0).then_some((first as usize, last as usize))
    }
}

/// Tabulated `g(r,u)` at a set of positions on a common frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFunction {
    positions: Vec<[f64; 3]>,
    grid: FrequencyGrid,
    values: Vec<Vec<f64>>,
}

impl SpectralFunction {
    pub fn new(positions: Vec<[f64; 3]>, grid: FrequencyGrid, values: Vec<Vec<f64>>) -> Result<Self> {
        grid.validate()?;
        if values.len() != positions.len() || values.iter().any(|v| v.len() != grid.len()) {
            return Err(Error::InvalidInput(
                "spectral table shape does not match positions x frequency bins".into(),
            ));
        }
        Ok(Self {
            positions,
            grid,
            values,
        })
    }

    /// Free space: `g(u) = u` at every position.
    pub fn vacuum(positions: Vec<[f64; 3]>, grid: FrequencyGrid) -> Self {
        let values = vec![grid.centres(); positions.len()];
        Self {
            positions,
            grid,
            values,
        }
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn n_positions(&self) -> usize {
        self.positions.len()
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn values(&self, position: usize) -> &[f64] {
        &self.values[position]
    }

    /// Linear interpolation of the table; `g(0) = 0`, `g = 0` for `u <= 0`
    /// and `g = u` above the last grid point.
    pub fn value(&self, position: usize, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        let du = self.grid.spacing;
        let row = &self.values[position];
        let x = u / du - 1.0;
        if x < 0.0 {
            return row[0] * u / du;
        }
        let i = x.floor() as usize;
        if i + 1 >= row.len() {
            return if i + 1 == row.len() && x == i as f64 { row[i] } else { u };
        }
        let t = x - i as f64;
        row[i] * (1.0 - t) + row[i + 1] * t
    }
}

/// Band frequencies at a set of k-points (ascending per k).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BandTable {
    pub k_points: Vec<KPoint>,
    pub frequencies: Vec<Vec<f64>>,
}

/// A complete gap between band `lower_band` and `lower_band + 1` (1-based).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandGap {
    pub lower_band: usize,
    pub lo: f64,
    pub hi: f64,
}

impl BandGap {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midgap(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, u: f64) -> bool {
        u > self.lo && u < self.hi
    }
}

/// Largest complete gap `max_k u_n < min_k u_{n+1}` in the table. Zero-width
/// or negative overlaps are not gaps; the static modes at Γ are ignored.
pub fn find_gap(table: &BandTable) -> Option<BandGap> {
    let nb = table.frequencies.iter().map(|f| f.len()).min()?;
    let mut best: Option<BandGap> = None;
    for n in 0..nb.saturating_sub(1) {
        let top = table
            .frequencies
            .iter()
            .map(|f| f[n])
            .fold(f64::NEG_INFINITY, f64::max);
        let bottom = table
            .frequencies
            .iter()
            .map(|f| f[n + 1])
            .fold(f64::INFINITY, f64::min);
        if bottom - top > 1e-9 * bottom.max(1.0) && top > crate::bands::ZERO_MODE_FREQUENCY {
            let gap = BandGap {
                lower_band: n + 1,
                lo: top,
                hi: bottom,
            };
            if best.map_or(true, |b| gap.width() > b.width()) {
                best = Some(gap);
            }
        }
    }
    best
}

/// Brillouin-zone integration settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LsrfConfig {
    pub mesh: [usize; 3],
    pub grid: FrequencyGrid,
    /// Sub-cells per axis for the in-cell frequency extrapolation.
    pub subcells: usize,
    /// Gaussian smoothing width in bins (0 disables).
    pub smoothing_bins: f64,
    /// Bands are kept up to `u_max + band_margin`.
    pub band_margin: f64,
    /// Fixed band count instead of the automatic choice.
    pub n_bands: Option<usize>,
}

impl Default for LsrfConfig {
    fn default() -> Self {
        Self {
            mesh: [16, 16, 16],
            grid: FrequencyGrid::default(),
            subcells: 2,
            smoothing_bins: 1.5,
            band_margin: 0.1,
            n_bands: None,
        }
    }
}

impl LsrfConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.mesh.iter().any(|&n| n == 0) || self.subcells == 0 {
            return Err(Error::InvalidInput("mesh dimensions and subcells must be positive".into()));
        }
        if !(self.smoothing_bins >= 0.0) || !(self.band_margin >= 0.0) {
            return Err(Error::InvalidInput("smoothing_bins and band_margin must be >= 0".into()));
        }
        if self.n_bands == Some(0) {
            return Err(Error::InvalidInput("n_bands must be positive".into()));
        }
        Ok(())
    }
}
