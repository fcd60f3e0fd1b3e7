use std::f64::consts::PI;

use rayon::prelude::*;

use super::{spread_cell, BZMesh, BandTable, FrequencyGrid, LsrfConfig, SpectralFunction};
use crate::bands::{norm, BandSelection, EigenModeSet, KSolution, PlaneWaveSolver, ZERO_MODE_FREQUENCY};
use crate::error::{Error, Result};

/// Running Brillouin-zone sum of `w_k |u_nk(r)|²` per frequency bin.
///
/// Contributions are added in call order, so a fixed order of `add` calls
/// gives bit-identical output.
#[derive(Debug, Clone)]
pub struct LsrfAccumulator {
    grid: FrequencyGrid,
    cell: [[f64; 3]; 3],
    subcells: usize,
    weight: f64,
    n_positions: usize,
    /// `mass[p * n_bins + bin]`
    mass: Vec<f64>,
    /// Position-independent state count per bin; marks where modes exist.
    states: Vec<f64>,
    scratch: Vec<(usize, f64)>,
    /// Weight of Γ points seen (their static modes carry no frequency).
    gamma_weight: f64,
    /// Acoustic-branch data from the mesh points nearest Γ: summed weight,
    /// weighted `u/|k|`, and weighted two-band intensity per position.
    shell: f64,
    acoustic_weight: f64,
    acoustic_speed: f64,
    acoustic_intensity: Vec<f64>,
}

impl LsrfAccumulator {
    pub fn new(mesh: &BZMesh, grid: FrequencyGrid, subcells: usize, n_positions: usize) -> Self {
        Self {
            grid,
            cell: mesh.cell_vectors(),
            subcells,
            weight: mesh.weight(),
            n_positions,
            mass: vec![0.0; n_positions * grid.len()],
            states: vec![0.0; grid.len()],
            scratch: Vec::new(),
            gamma_weight: 0.0,
            shell: mesh.cell_vectors().iter().map(|c| norm(*c)).fold(f64::INFINITY, f64::min),
            acoustic_weight: 0.0,
            acoustic_speed: 0.0,
            acoustic_intensity: vec![0.0; n_positions],
        }
    }

    /// Adds one mesh point counted `multiplicity` times.
    pub fn add(&mut self, sol: &KSolution, multiplicity: usize) {
        assert_eq!(sol.n_positions, self.n_positions, "position count mismatch");
        let w = self.weight * multiplicity as f64;
        let nb = self.grid.len();
        let kn = norm(sol.k.0);
        if kn < 1e-12 * self.shell {
            self.gamma_weight += w;
        } else if (kn - self.shell).abs() < 1e-9 * self.shell && sol.n_bands() >= 2 {
            let (u1, u2) = (sol.frequencies[0], sol.frequencies[1]);
            if u1 >= ZERO_MODE_FREQUENCY {
                self.acoustic_weight += w;
                self.acoustic_speed += w * 0.5 * (u1 + u2) / kn;
                for p in 0..self.n_positions {
                    self.acoustic_intensity[p] += w * (sol.intensity(0, p) + sol.intensity(1, p));
                }
            }
        }
        for band in 0..sol.n_bands() {
            let u0 = sol.frequencies[band];
            if u0 < ZERO_MODE_FREQUENCY {
                continue;
            }
            self.scratch.clear();
            spread_cell(u0, sol.group_velocities[band], &self.cell, self.subcells, &self.grid, &mut self.scratch);
            for &(bin, m) in &self.scratch {
                self.states[bin] += w * m;
            }
            for p in 0..self.n_positions {
                let wi = w * sol.intensity(band, p);
                let row = &mut self.mass[p * nb..(p + 1) * nb];
                for &(bin, m) in &self.scratch {
                    row[bin] += wi * m;
                }
            }
        }
    }

    /// Smooths and normalizes into `g(r,u)`.
    ///
    /// The Gaussian smoothing is a normalized convolution restricted to bins
    /// that hold states, so it never moves weight into an empty frequency
    /// range such as a band gap.
    pub fn finish(self, positions: Vec<[f64; 3]>, smoothing_bins: f64) -> Result<SpectralFunction> {
        if positions.len() != self.n_positions {
            return Err(Error::InvalidInput("position count mismatch".into()));
        }
        let low = self.long_wavelength();
        let nb = self.grid.len();
        let du = self.grid.spacing();
        let occupied: Vec<bool> = self.states.iter().map(|&s| s > 0.0).collect();
        let kernel = gaussian_kernel(smoothing_bins);
        let half = kernel.len() / 2;
        let mut values = Vec::with_capacity(self.n_positions);
        for p in 0..self.n_positions {
            let row = &self.mass[p * nb..(p + 1) * nb];
            let mut g = vec![0.0; nb];
            for i in 0..nb {
                if !occupied[i] {
                    continue;
                }
                let mut acc = 0.0;
                let mut norm = 0.0;
                for (o, kw) in kernel.iter().enumerate() {
                    let j = i as isize + o as isize - half as isize;
                    if j < 0 || j >= nb as isize || !occupied[j as usize] {
                        continue;
                    }
                    acc += kw * row[j as usize];
                    norm += kw;
                }
                let u = self.grid.centre(i);
                g[i] = acc / norm / du / (8.0 * PI * u);
            }
            if let Some((slopes, u_low)) = &low {
                for (i, gi) in g.iter_mut().enumerate() {
                    let u = self.grid.centre(i);
                    if u >= *u_low {
                        break;
                    }
                    *gi = slopes[p] * u;
                }
            }
            values.push(g);
        }
        SpectralFunction::new(positions, self.grid, values)
    }
}

impl LsrfAccumulator {
    /// Long-wavelength limit `g = s·u` with `s = Ī/(2v³)`: two branches on a
    /// cone `u = v|k|` with summed intensity `Ī` (vacuum: `Ī = 2`, `v = 1`).
    /// Returns `(s per position, u below which it replaces the mesh sum)`.
    ///
    /// Near the cone apex the cell extrapolation is poor and Γ's own static
    /// modes carry no frequency, so the mesh sum is unreliable there; the
    /// `1/u` weight of the later frequency integrals amplifies such errors.
    /// Only used when the nearest shell is in the linear regime
    /// (wavelength at least `4a`).
    fn long_wavelength(&self) -> Option<(Vec<f64>, f64)> {
        if self.gamma_weight == 0.0 || self.acoustic_weight == 0.0 || self.shell > LINEAR_SHELL_MAX {
            return None;
        }
        let v = self.acoustic_speed / self.acoustic_weight;
        let slopes = self
            .acoustic_intensity
            .iter()
            .map(|i| i / self.acoustic_weight / (2.0 * v * v * v))
            .collect();
        Some((slopes, LONG_WAVELENGTH_SHELLS * v * self.shell))
    }
}

/// Largest nearest-shell `|k|` (units of 2π/a) treated as linear dispersion.
const LINEAR_SHELL_MAX: f64 = 0.25;
/// The long-wavelength form covers this many nearest-shell radii.
const LONG_WAVELENGTH_SHELLS: f64 = 1.5;

/// Truncated at ±4σ; a single unit tap when smoothing is off.
fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let half = (4.0 * sigma).ceil() as isize;
    (-half..=half)
        .map(|i| (-0.5 * (i as f64 / sigma).powi(2)).exp())
        .collect()
}

/// LSRF from modes already solved on every point of `mesh`.
pub fn compute_lsrf(modes: &EigenModeSet, mesh: &BZMesh, cfg: &LsrfConfig) -> Result<SpectralFunction> {
    cfg.validate()?;
    if modes.solutions.len() != mesh.len() {
        return Err(Error::InvalidInput(format!(
            "{} solved k-points for a mesh of {}",
            modes.solutions.len(),
            mesh.len()
        )));
    }
    let mut acc = LsrfAccumulator::new(mesh, cfg.grid, cfg.subcells, modes.positions.len());
    for sol in &modes.solutions {
        check_coverage(sol, cfg)?;
        acc.add(sol, 1);
    }
    acc.finish(modes.positions.clone(), cfg.smoothing_bins)
}

fn needed_frequency(cfg: &LsrfConfig) -> f64 {
    cfg.grid.u_max() + cfg.band_margin
}

fn check_coverage(sol: &KSolution, cfg: &LsrfConfig) -> Result<()> {
    let needed = needed_frequency(cfg);
    let covered = match cfg.n_bands {
        Some(_) => sol.frequencies.last().copied().unwrap_or(0.0),
        None => sol.highest_frequency,
    };
    if covered < needed {
        return Err(Error::InsufficientBands {
            requested: needed,
            covered,
            k: sol.k.0,
        });
    }
    Ok(())
}

fn selection(cfg: &LsrfConfig) -> BandSelection {
    match cfg.n_bands {
        Some(n) => BandSelection::Lowest(n),
        None => BandSelection::Below(needed_frequency(cfg)),
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub spectral: SpectralFunction,
    /// Frequencies at the time-reversal representatives of the mesh.
    pub bands: BandTable,
}

/// Solves every mesh point (pairing `k` with `-k`, whose intensities and
/// frequencies coincide) and accumulates the LSRF at `positions`.
///
/// k-points are solved in parallel in fixed-size chunks on the current rayon
/// pool and summed in mesh order, so the result does not depend on the
/// number of workers.
pub fn lsrf_sweep(solver: &PlaneWaveSolver, positions: &[[f64; 3]], cfg: &LsrfConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    let mesh = BZMesh::new(cfg.mesh)?;
    let reps = mesh.time_reversal_representatives();
    let sel = selection(cfg);
    let mut acc = LsrfAccumulator::new(&mesh, cfg.grid, cfg.subcells, positions.len());
    let mut bands = BandTable::default();
    const CHUNK: usize = 16;
    for chunk in reps.chunks(CHUNK) {
        let sols: Vec<Result<KSolution>> = chunk
            .par_iter()
            .map(|&(i, _)| solver.solve_k(mesh.points()[i], sel, positions))
            .collect();
        for (sol, &(_, mult)) in sols.into_iter().zip(chunk) {
            let sol = sol?;
            check_coverage(&sol, cfg)?;
            acc.add(&sol, mult);
            bands.k_points.push(sol.k);
            bands.frequencies.push(sol.frequencies);
        }
    }
    Ok(SweepOutput {
        spectral: acc.finish(positions.to_vec(), cfg.smoothing_bins)?,
        bands,
    })
}

/// The lowest `n_bands` frequencies at one point per cubic-symmetry orbit of
/// the mesh; enough for band extrema and gap edges.
pub fn band_table(solver: &PlaneWaveSolver, mesh: &BZMesh, n_bands: usize) -> Result<BandTable> {
    let reps = mesh.irreducible_representatives();
    let rows: Vec<Result<(_, Vec<f64>)>> = reps
        .par_iter()
        .map(|&(i, _)| {
            let k = mesh.points()[i];
            let mut f = solver.frequencies(k)?;
            f.truncate(n_bands);
            Ok((k, f))
        })
        .collect();
    let mut table = BandTable::default();
    for row in rows {
        let (k, f) = row?;
        table.k_points.push(k);
        table.frequencies.push(f);
    }
    Ok(table)
}
