//! Pipeline stages as pure functions returning CSV rows.
//!
//! All crystal-side quantities (bands, g(r,u)) are in reduced units and do
//! not depend on the lattice constant. A lattice-constant sweep therefore
//! reuses one LSRF table and only rescales the atomic frequencies
//! (`u_j = ω_j a / 2πc`), which makes the sweep itself nearly free.

use std::time::Instant;

use pclamb_core::atom::AtomModel;
use pclamb_core::bands::{KPoint, PlaneWaveSolver};
use pclamb_core::constants::{angular_to_mhz, ReducedScale, SPEED_OF_LIGHT};
use pclamb_core::crystal::{CrystalStructure, ReciprocalBasis};
use pclamb_core::ensemble::{mini_band, sample_positions, EnsembleSpec, MiniBand, SampledPositions};
use pclamb_core::lsrf::{band_table, find_gap, lsrf_sweep, BZMesh, BandGap, BandTable, SpectralFunction, SweepOutput};
use pclamb_core::quadrature::{BetaIntegrator, QuadratureConfig};
use pclamb_core::solver::{LevelSolver, LineShape, ShiftMethod, SolverConfig};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// A validated configuration with the objects every command needs.
pub struct Pipeline {
    pub config: RunConfig,
    pub structure: CrystalStructure,
    pub solver: PlaneWaveSolver,
    pub model: AtomModel,
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let structure = config.structure()?;
        let solver = PlaneWaveSolver::new(&structure, config.basis()?)?;
        let model = config.atom_model()?;
        log::info!(
            "structure eps = {}/{} f = {}, {} plane waves",
            structure.eps_sphere,
            structure.eps_background,
            structure.filling_fraction,
            solver.basis().len()
        );
        Ok(Self {
            config,
            structure,
            solver,
            model,
        })
    }

    /// Band and LSRF sweep over the configured mesh at `positions`.
    pub fn sweep(&self, positions: &[[f64; 3]]) -> Result<SweepOutput> {
        let t = Instant::now();
        log::info!(
            "LSRF sweep: mesh {:?}, {} positions, {} workers",
            self.config.lsrf.mesh,
            positions.len(),
            rayon::current_num_threads()
        );
        let out = lsrf_sweep(&self.solver, positions, &self.config.lsrf)?;
        log::info!("LSRF sweep done in {:.1} s", t.elapsed().as_secs_f64());
        Ok(out)
    }

    pub fn level(&self, label: &str) -> Result<usize> {
        self.config.level_index(&self.model, label)
    }

    pub fn reference_lattice_constant(&self) -> f64 {
        self.structure.lattice_constant
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PositionRow {
    pub position_index: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

pub fn position_rows(positions: &[[f64; 3]]) -> Vec<PositionRow> {
    positions
        .iter()
        .enumerate()
        .map(|(i, r)| PositionRow {
            position_index: i,
            x: r[0],
            y: r[1],
            z: r[2],
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LsrfRow {
    pub position_index: usize,
    pub u: f64,
    pub g: f64,
}

pub fn lsrf_rows(sf: &SpectralFunction) -> Vec<LsrfRow> {
    let centres = sf.grid().centres();
    (0..sf.n_positions())
        .flat_map(|p| {
            centres.iter().zip(sf.values(p)).map(move |(&u, &g)| LsrfRow { position_index: p, u, g })
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BandRow {
    pub k_index: usize,
    pub kx: f64,
    pub ky: f64,
    pub kz: f64,
    /// 1-based.
    pub band: usize,
    pub u: f64,
}

pub fn band_rows(table: &BandTable) -> Vec<BandRow> {
    let mut rows = Vec::new();
    for (i, (k, f)) in table.k_points.iter().zip(&table.frequencies).enumerate() {
        for (b, &u) in f.iter().enumerate() {
            rows.push(BandRow {
                k_index: i,
                kx: k.0[0],
                ky: k.0[1],
                kz: k.0[2],
                band: b + 1,
                u,
            });
        }
    }
    rows
}

pub fn truncate_bands(table: &BandTable, n: usize) -> BandTable {
    BandTable {
        k_points: table.k_points.clone(),
        frequencies: table.frequencies.iter().map(|f| f[..n.min(f.len())].to_vec()).collect(),
    }
}

/// Gap in reduced units, and mapped to lattice constants for one transition:
/// the transition frequency sits in the gap for `a ∈ [a_lo, a_hi]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GapRow {
    pub lower_band: usize,
    pub upper_band: usize,
    pub u_lo: f64,
    pub u_hi: f64,
    pub transition: String,
    pub a_lo_nm: Option<f64>,
    pub a_hi_nm: Option<f64>,
}

/// One row for the bare gap, plus one per dipole-allowed downward
/// transition of `levels`.
pub fn gap_rows(gap: &BandGap, model: &AtomModel, levels: &[usize]) -> Result<Vec<GapRow>> {
    let base = GapRow {
        lower_band: gap.lower_band,
        upper_band: gap.lower_band + 1,
        u_lo: gap.lo,
        u_hi: gap.hi,
        transition: String::new(),
        a_lo_nm: None,
        a_hi_nm: None,
    };
    let mut rows = vec![base.clone()];
    for &l in levels {
        let lv = model.level(l)?;
        for c in model.real_channels(l)? {
            if c.alpha <= 0.0 {
                continue;
            }
            let pclamb_core::atom::ChannelKind::Bound(j) = c.kind else { continue };
            let lambda = 2.0 * std::f64::consts::PI * SPEED_OF_LIGHT / (lv.omega - c.omega);
            rows.push(GapRow {
                transition: format!("{}-{}", lv.label, model.level(j)?.label),
                a_lo_nm: Some(gap.lo * lambda * 1e9),
                a_hi_nm: Some(gap.hi * lambda * 1e9),
                ..base.clone()
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BetaRow {
    pub position_index: usize,
    pub delta: f64,
    pub kind: &'static str,
    pub beta: f64,
    pub beta_vacuum: f64,
    /// Crystal-minus-vacuum part below `u_op`.
    pub correction: f64,
}

/// β at `±u` for each configured `u`, every position; the lattice constant
/// only enters through the relativistic cutoff.
pub fn beta_rows(sf: &SpectralFunction, cfg: &RunConfig, lattice_constant: f64) -> Result<Vec<BetaRow>> {
    let b = &cfg.beta;
    let us: Vec<f64> = if b.n_points == 1 {
        vec![b.u_min]
    } else {
        (0..b.n_points)
            .map(|i| b.u_min + (b.u_max - b.u_min) * i as f64 / (b.n_points - 1) as f64)
            .collect()
    };
    let mut rows = Vec::new();
    for p in 0..sf.n_positions() {
        let integ = BetaIntegrator::new(sf, p, &cfg.quadrature, lattice_constant)?;
        for sign in [1.0, -1.0] {
            for &u in &us {
                let d = sign * u;
                let v = integ.beta(d)?;
                rows.push(BetaRow {
                    position_index: p,
                    delta: d,
                    kind: v.kind.as_str(),
                    beta: v.value,
                    beta_vacuum: integ.vacuum(d),
                    correction: integ.correction(d)?,
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ShiftRow {
    pub level: String,
    pub position_index: usize,
    pub a_nm: f64,
    pub shift_reduced: f64,
    pub shift_mhz: f64,
    pub shift_vacuum_mhz: f64,
    pub n_roots: usize,
    /// Every root, `;`-separated; more than one signals level splitting.
    pub roots_mhz: String,
    pub method: &'static str,
}

/// Shifts for every (level, method, position, lattice constant), in that
/// nesting order. Solves run in parallel; the row order is fixed.
#[allow(clippy::too_many_arguments)]
pub fn shift_rows(
    sf: &SpectralFunction,
    model: &AtomModel,
    levels: &[usize],
    methods: &[ShiftMethod],
    lattice_constants: &[f64],
    quad: &QuadratureConfig,
    solver: &SolverConfig,
) -> Result<Vec<ShiftRow>> {
    let mut items = Vec::new();
    for &l in levels {
        for &m in methods {
            for p in 0..sf.n_positions() {
                for &a in lattice_constants {
                    items.push((l, m, p, a));
                }
            }
        }
    }
    let results: Vec<Result<ShiftRow>> = items
        .par_iter()
        .map(|&(l, m, p, a)| {
            let r = LevelSolver::new(sf, p, model, l, a, quad, solver)?.solve(m)?;
            if r.n_roots > 1 {
                log::warn!(
                    "level {} at position {p}, a = {:.3} nm: {} roots (level splitting)",
                    model.level(l)?.label,
                    a * 1e9,
                    r.n_roots
                );
            }
            Ok(ShiftRow {
                level: model.level(l)?.label.clone(),
                position_index: p,
                a_nm: a * 1e9,
                shift_reduced: r.shift_reduced,
                shift_mhz: angular_to_mhz(r.shift),
                shift_vacuum_mhz: angular_to_mhz(r.shift_vacuum),
                n_roots: r.n_roots,
                roots_mhz: r
                    .roots
                    .iter()
                    .map(|&x| angular_to_mhz(x).to_string())
                    .collect::<Vec<_>>()
                    .join(";"),
                method: r.method.as_str(),
            })
        })
        .collect();
    results.into_iter().collect()
}

/// Shifts for the configured sweep.
pub fn sweep_shift_rows(pipe: &Pipeline, sf: &SpectralFunction, quad: &QuadratureConfig) -> Result<Vec<ShiftRow>> {
    let cfg = &pipe.config;
    let levels = cfg
        .sweep
        .levels
        .iter()
        .map(|l| pipe.level(l))
        .collect::<Result<Vec<_>>>()?;
    shift_rows(
        sf,
        &pipe.model,
        &levels,
        &cfg.sweep.methods,
        &cfg.sweep.lattice_constants(),
        quad,
        &cfg.solver,
    )
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SensitivityRow {
    pub level: String,
    pub method: &'static str,
    pub position_index: usize,
    pub a_nm: f64,
    pub shift_mhz: f64,
    pub shift_lower_u_op_mhz: f64,
    pub shift_higher_u_op_mhz: f64,
}

/// Largest change of the shift under the `u_op` perturbation relative to the
/// largest shift magnitude, per (level, method).
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SensitivitySummary {
    pub level: String,
    pub method: &'static str,
    pub max_abs_shift_mhz: f64,
    pub max_abs_change_mhz: f64,
    pub relative_change: f64,
}

pub fn u_op_sensitivity(
    pipe: &Pipeline,
    sf: &SpectralFunction,
) -> Result<(Vec<SensitivityRow>, Vec<SensitivitySummary>)> {
    let cfg = &pipe.config;
    let base_quad = cfg.quadrature;
    let scaled = |s: f64| QuadratureConfig {
        omega_op_reduced: base_quad.omega_op_reduced * s,
        ..base_quad
    };
    let c = cfg.convergence.u_op_change;
    let base = sweep_shift_rows(pipe, sf, &base_quad)?;
    let lower = sweep_shift_rows(pipe, sf, &scaled(1.0 - c))?;
    let higher = sweep_shift_rows(pipe, sf, &scaled(1.0 + c))?;
    let rows: Vec<SensitivityRow> = base
        .iter()
        .zip(&lower)
        .zip(&higher)
        .map(|((b, lo), hi)| SensitivityRow {
            level: b.level.clone(),
            method: b.method,
            position_index: b.position_index,
            a_nm: b.a_nm,
            shift_mhz: b.shift_mhz,
            shift_lower_u_op_mhz: lo.shift_mhz,
            shift_higher_u_op_mhz: hi.shift_mhz,
        })
        .collect();
    let mut summary: Vec<SensitivitySummary> = Vec::new();
    for r in &rows {
        let change = (r.shift_lower_u_op_mhz - r.shift_mhz)
            .abs()
            .max((r.shift_higher_u_op_mhz - r.shift_mhz).abs());
        match summary.iter_mut().find(|s| s.level == r.level && s.method == r.method) {
            Some(s) => {
                s.max_abs_shift_mhz = s.max_abs_shift_mhz.max(r.shift_mhz.abs());
                s.max_abs_change_mhz = s.max_abs_change_mhz.max(change);
            }
            None => summary.push(SensitivitySummary {
                level: r.level.clone(),
                method: r.method,
                max_abs_shift_mhz: r.shift_mhz.abs(),
                max_abs_change_mhz: change,
                relative_change: 0.0,
            }),
        }
    }
    for s in &mut summary {
        s.relative_change = if s.max_abs_shift_mhz > 0.0 {
            s.max_abs_change_mhz / s.max_abs_shift_mhz
        } else {
            s.max_abs_change_mhz
        };
    }
    Ok((rows, summary))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EnsembleAtomRow {
    pub atom_index: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub shift_reduced: Option<f64>,
    pub shift_mhz: Option<f64>,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct HistogramRow {
    pub bin_lo_mhz: f64,
    pub bin_hi_mhz: f64,
    pub count: usize,
}

pub struct EnsembleOutput {
    pub sampled: SampledPositions,
    pub band: MiniBand,
    pub atoms: Vec<EnsembleAtomRow>,
    pub histogram: Vec<HistogramRow>,
}

pub fn ensemble_spec(pipe: &Pipeline) -> Result<EnsembleSpec> {
    let e = &pipe.config.ensemble;
    Ok(EnsembleSpec {
        n_atoms: e.n_atoms,
        region: e.region,
        seed: e.seed,
        level: pipe.level(&e.level)?,
        lattice_constant: e.lattice_constant_nm * 1e-9,
    })
}

/// Samples positions, sweeps the LSRF at all of them in one pass, and
/// solves each atom.
pub fn run_ensemble_pipeline(pipe: &Pipeline) -> Result<EnsembleOutput> {
    let spec = ensemble_spec(pipe)?;
    let sampled = sample_positions(&spec, &pipe.structure)?;
    log::info!(
        "sampled {} positions, acceptance rate {:.4}",
        sampled.positions.len(),
        sampled.acceptance_rate()
    );
    let sf = pipe.sweep(&sampled.positions)?.spectral;
    ensemble_from_spectral(pipe, &spec, sampled, &sf)
}

pub fn ensemble_from_spectral(
    pipe: &Pipeline,
    spec: &EnsembleSpec,
    sampled: SampledPositions,
    sf: &SpectralFunction,
) -> Result<EnsembleOutput> {
    let cfg = &pipe.config;
    let band = mini_band(
        sf,
        0..sampled.positions.len(),
        &pipe.model,
        spec,
        &cfg.quadrature,
        &cfg.solver,
        cfg.ensemble.method,
        cfg.ensemble.histogram_bins,
    )?;
    let scale = ReducedScale::new(spec.lattice_constant);
    let mut errors = vec![String::new(); sampled.positions.len()];
    for (i, e) in &band.failures {
        errors[*i] = e.clone();
    }
    let atoms = sampled
        .positions
        .iter()
        .zip(&band.shifts)
        .zip(errors)
        .enumerate()
        .map(|(i, ((r, s), error))| EnsembleAtomRow {
            atom_index: i,
            x: r[0],
            y: r[1],
            z: r[2],
            shift_reduced: s.map(|v| scale.to_reduced(v)),
            shift_mhz: s.map(angular_to_mhz),
            error,
        })
        .collect();
    let h = &band.histogram;
    let histogram = h
        .counts
        .iter()
        .enumerate()
        .map(|(i, &count)| HistogramRow {
            bin_lo_mhz: angular_to_mhz(h.edges[i]),
            bin_hi_mhz: angular_to_mhz(h.edges[i + 1]),
            count,
        })
        .collect();
    Ok(EnsembleOutput {
        sampled,
        band,
        atoms,
        histogram,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LineshapeRow {
    pub position_index: usize,
    /// `ω - ω_l` (rad/s).
    pub omega_offset: f64,
    pub gamma: f64,
    pub delta: f64,
    /// `C(ω)` (s/rad).
    pub amplitude: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PoleRow {
    pub position_index: usize,
    pub omega_offset: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LineshapeSummary {
    pub position_index: usize,
    pub total_weight: f64,
    pub n_poles: usize,
}

pub fn lineshapes(pipe: &Pipeline, sf: &SpectralFunction, lattice_constant: f64) -> Result<Vec<LineShape>> {
    let cfg = &pipe.config;
    let level = pipe.level(&cfg.lineshape.level)?;
    let out: Vec<Result<LineShape>> = (0..sf.n_positions())
        .into_par_iter()
        .map(|p| {
            Ok(
                LevelSolver::new(sf, p, &pipe.model, level, lattice_constant, &cfg.quadrature, &cfg.solver)?
                    .lineshape(cfg.lineshape.n_points, cfg.lineshape.half_widths)?,
            )
        })
        .collect();
    out.into_iter().collect()
}

pub fn lineshape_rows(shapes: &[LineShape]) -> (Vec<LineshapeRow>, Vec<PoleRow>, Vec<LineshapeSummary>) {
    let mut rows = Vec::new();
    let mut poles = Vec::new();
    let mut summary = Vec::new();
    for (p, s) in shapes.iter().enumerate() {
        for i in 0..s.omega.len() {
            rows.push(LineshapeRow {
                position_index: p,
                omega_offset: s.omega[i],
                gamma: s.gamma[i],
                delta: s.delta[i],
                amplitude: s.amplitude[i],
            });
        }
        for &(w, weight) in &s.poles {
            poles.push(PoleRow {
                position_index: p,
                omega_offset: w,
                weight,
            });
        }
        summary.push(LineshapeSummary {
            position_index: p,
            total_weight: s.total_weight(),
            n_poles: s.poles.len(),
        });
    }
    (rows, poles, summary)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GapConvergenceRow {
    pub mesh: usize,
    pub lower_band: Option<usize>,
    pub u_lo: Option<f64>,
    pub u_hi: Option<f64>,
}

pub fn gap_convergence(pipe: &Pipeline) -> Result<Vec<GapConvergenceRow>> {
    let mut rows = Vec::new();
    for &n in &pipe.config.convergence.meshes {
        let table = band_table(&pipe.solver, &BZMesh::cubic(n)?, pipe.config.bands.n_bands)?;
        let gap = find_gap(&table);
        rows.push(GapConvergenceRow {
            mesh: n,
            lower_band: gap.map(|g| g.lower_band),
            u_lo: gap.map(|g| g.lo),
            u_hi: gap.map(|g| g.hi),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CutoffRow {
    pub cutoff: f64,
    pub n_plane_waves: usize,
    pub k_label: &'static str,
    pub band: usize,
    pub u: f64,
}

pub fn cutoff_convergence(pipe: &Pipeline) -> Result<Vec<CutoffRow>> {
    let points = [("G", KPoint::GAMMA), ("X", KPoint::X), ("L", KPoint::L)];
    let mut rows = Vec::new();
    for &c in &pipe.config.convergence.cutoffs {
        let basis = ReciprocalBasis::new(c)?;
        let n = basis.len();
        let solver = PlaneWaveSolver::new(&pipe.structure, basis)?;
        for (label, k) in points {
            let f = solver.frequencies(k)?;
            for (b, &u) in f.iter().take(pipe.config.bands.n_bands).enumerate() {
                rows.push(CutoffRow {
                    cutoff: c,
                    n_plane_waves: n,
                    k_label: label,
                    band: b + 1,
                    u,
                });
            }
        }
    }
    Ok(rows)
}
