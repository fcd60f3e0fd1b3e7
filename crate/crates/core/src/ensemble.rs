//! Random atom positions and the spread of their level shifts ("mini-band").
//!
//! Positions are drawn uniformly over the conventional cubic cell with a
//! ChaCha8 generator seeded from a `u64`, so a seed reproduces the same
//! positions on every platform.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atom::AtomModel;
use crate::crystal::CrystalStructure;
use crate::error::{Error, Result};
use crate::lsrf::SpectralFunction;
use crate::quadrature::QuadratureConfig;
use crate::solver::{LevelSolver, ShiftMethod, SolverConfig};

/// Proposals allowed per requested atom before rejection sampling gives up.
const MAX_ATTEMPTS_PER_ATOM: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingRegion {
    /// Inside the spheres (the voids of an inverse opal).
    AirPores,
    FullCell,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleSpec {
    pub n_atoms: usize,
    pub region: SamplingRegion,
    pub seed: u64,
    pub level: usize,
    pub lattice_constant: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledPositions {
    pub positions: Vec<[f64; 3]>,
    pub proposals: usize,
}

impl SampledPositions {
    pub fn acceptance_rate(&self) -> f64 {
        self.positions.len() as f64 / self.proposals as f64
    }
}

pub fn sample_positions(spec: &EnsembleSpec, structure: &CrystalStructure) -> Result<SampledPositions> {
    if spec.n_atoms == 0 {
        return Err(Error::InvalidInput("n_atoms must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let max = MAX_ATTEMPTS_PER_ATOM * spec.n_atoms;
    let mut positions = Vec::with_capacity(spec.n_atoms);
    let mut proposals = 0;
    while positions.len() < spec.n_atoms {
        if proposals == max {
            return Err(Error::SamplingFailed {
                accepted: positions.len(),
                wanted: spec.n_atoms,
                attempts: proposals,
            });
        }
        proposals += 1;
        let r: [f64; 3] = [rng.random(), rng.random(), rng.random()];
        if spec.region == SamplingRegion::FullCell || structure.in_sphere(r) {
            positions.push(r);
        }
    }
    Ok(SampledPositions { positions, proposals })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiniBand {
    /// Per-atom shift (rad/s); `None` where the solve failed.
    pub shifts: Vec<Option<f64>>,
    pub failures: Vec<(usize, String)>,
    pub histogram: Histogram,
    /// `max - min` over successful atoms.
    pub width: f64,
    /// `(probability, value)` pairs.
    pub quantiles: Vec<(f64, f64)>,
}

pub const QUANTILE_LEVELS: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

impl MiniBand {
    /// Aggregates per-atom results; failed atoms are excluded from the
    /// statistics and listed in `failures`.
    pub fn from_results(results: Vec<Result<f64>>, n_bins: usize) -> Self {
        let mut failures = Vec::new();
        let shifts: Vec<Option<f64>> = results
            .into_iter()
            .enumerate()
            .map(|(i, r)| match r {
                Ok(v) => Some(v),
                Err(e) => {
                    failures.push((i, e.to_string()));
                    None
                }
            })
            .collect();
        let mut ok: Vec<f64> = shifts.iter().flatten().copied().collect();
        ok.sort_by(f64::total_cmp);
        let (width, histogram, quantiles) = if ok.is_empty() {
            (0.0, Histogram { edges: vec![], counts: vec![] }, vec![])
        } else {
            let (lo, hi) = (ok[0], ok[ok.len() - 1]);
            let quantiles = QUANTILE_LEVELS.iter().map(|&p| (p, quantile(&ok, p))).collect();
            (hi - lo, histogram(&ok, lo, hi, n_bins.max(1)), quantiles)
        };
        Self {
            shifts,
            failures,
            histogram,
            width,
            quantiles,
        }
    }
}

/// Linear interpolation between order statistics.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let x = p * (sorted.len() - 1) as f64;
    let i = x.floor() as usize;
    let t = x - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - t) + sorted[i + 1] * t
    } else {
        sorted[i]
    }
}

fn histogram(sorted: &[f64], lo: f64, hi: f64, n_bins: usize) -> Histogram {
    if hi == lo {
        return Histogram {
            edges: vec![lo, hi],
            counts: vec![sorted.len()],
        };
    }
    let step = (hi - lo) / n_bins as f64;
    let edges = (0..=n_bins).map(|i| lo + step * i as f64).collect();
    let mut counts = vec![0; n_bins];
    for &v in sorted {
        let b = (((v - lo) / step) as usize).min(n_bins - 1);
        counts[b] += 1;
    }
    Histogram { edges, counts }
}

/// Shifts of `spec.level` at the spectral-function positions `atoms`, solved
/// in parallel and collected in atom order.
pub fn mini_band(
    sf: &SpectralFunction,
    atoms: Range<usize>,
    model: &AtomModel,
    spec: &EnsembleSpec,
    quad: &QuadratureConfig,
    solver: &SolverConfig,
    method: ShiftMethod,
    n_bins: usize,
) -> Result<MiniBand> {
    if atoms.end > sf.n_positions() {
        return Err(Error::InvalidInput("atom range exceeds the spectral function positions".into()));
    }
    let results: Vec<Result<f64>> = atoms
        .into_par_iter()
        .map(|p| {
            LevelSolver::new(sf, p, model, spec.level, spec.lattice_constant, quad, solver)?
                .solve(method)
                .map(|r| r.shift)
        })
        .collect();
    Ok(MiniBand::from_results(results, n_bins))
}
