//! One function per subcommand. Each validates the config, runs its stages
//! and writes CSVs plus a `<command>.meta.json` sidecar into the output
//! directory.

use std::path::PathBuf;

use chrono::Utc;
use pclamb_core::constants::angular_to_mhz;
use pclamb_core::lsrf::{band_table, find_gap, BZMesh};
use serde_json::json;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::OutputDir;
use crate::pipeline::*;

/// Paths of the sidecar and the CSVs a command produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub metadata: PathBuf,
    pub files: Vec<PathBuf>,
    pub summary: serde_json::Value,
}

fn finish(
    mut out: OutputDir,
    command: &str,
    cfg: &RunConfig,
    started: chrono::DateTime<Utc>,
    summary: serde_json::Value,
) -> Result<RunReport, CliError> {
    let metadata = out.write_metadata(command, cfg, started, summary.clone())?;
    Ok(RunReport {
        metadata,
        files: out.files().iter().map(|f| out.path(f)).collect(),
        summary,
    })
}

fn gap_json(gap: Option<pclamb_core::lsrf::BandGap>) -> serde_json::Value {
    match gap {
        Some(g) => json!({"lower_band": g.lower_band, "u_lo": g.lo, "u_hi": g.hi}),
        None => serde_json::Value::Null,
    }
}

/// Band frequencies at the symmetry-distinct points of the mesh and the
/// largest complete gap.
pub fn run_bands(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let started = Utc::now();
    let pipe = Pipeline::new(cfg.clone())?;
    let mut out = OutputDir::create(&cfg.output.dir)?;
    let table = band_table(&pipe.solver, &BZMesh::new(cfg.lsrf.mesh)?, cfg.bands.n_bands)?;
    let gap = find_gap(&table);
    out.write_csv("bands.csv", &band_rows(&table))?;
    let gap_rows = match gap {
        Some(g) => gap_rows(&g, &pipe.model, &[])?,
        None => vec![],
    };
    out.write_csv("gap.csv", &gap_rows)?;
    finish(out, "bands", cfg, started, json!({ "k_points": table.k_points.len(), "gap": gap_json(gap) }))
}

/// g(r,u) at the configured positions.
pub fn run_lsrf(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let started = Utc::now();
    let pipe = Pipeline::new(cfg.clone())?;
    let mut out = OutputDir::create(&cfg.output.dir)?;
    let sweep = pipe.sweep(&cfg.positions.points)?;
    out.write_csv("positions.csv", &position_rows(&cfg.positions.points))?;
    out.write_csv("lsrf.csv", &lsrf_rows(&sweep.spectral))?;
    let gap = find_gap(&truncate_bands(&sweep.bands, cfg.bands.n_bands));
    finish(out, "lsrf", cfg, started, json!({ "gap": gap_json(gap) }))
}

/// Principal (Δ > 0) and normal (Δ < 0) integrals with the vacuum reference.
pub fn run_beta(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let started = Utc::now();
    let pipe = Pipeline::new(cfg.clone())?;
    let mut out = OutputDir::create(&cfg.output.dir)?;
    let sweep = pipe.sweep(&cfg.positions.points)?;
    let rows = beta_rows(&sweep.spectral, cfg, pipe.reference_lattice_constant())?;
    out.write_csv("positions.csv", &position_rows(&cfg.positions.points))?;
    out.write_csv("beta.csv", &rows)?;
    finish(out, "beta", cfg, started, json!({ "rows": rows.len() }))
}

/// Level shifts across the lattice-constant sweep, from a single LSRF build.
pub fn run_shift_sweep(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let started = Utc::now();
    let pipe = Pipeline::new(cfg.clone())?;
    let mut out = OutputDir::create(&cfg.output.dir)?;
    let sweep = pipe.sweep(&cfg.positions.points)?;
    let rows = sweep_shift_rows(&pipe, &sweep.spectral, &cfg.quadrature)?;
    out.write_csv("positions.csv", &position_rows(&cfg.positions.points))?;
    out.write_csv("shifts.csv", &rows)?;
    let gap = find_gap(&truncate_bands(&sweep.bands, cfg.bands.n_bands));
    if let Some(g) = gap {
        let levels = cfg
            .sweep
            .levels
            .iter()
            .map(|l| pipe.level(l))
            .collect::<Result<Vec<_>, _>>()?;
        out.write_csv("gap.csv", &gap_rows(&g, &pipe.model, &levels)?)?;
    } else {
        out.write_csv::<GapRow>("gap.csv", &[])?;
    }
    let max_roots = rows.iter().map(|r| r.n_roots).max().unwrap_or(0);
    finish(
        out,
        "shift",
        cfg,
        started,
        json!({ "rows": rows.len(), "max_roots": max_roots, "gap": gap_json(gap) }),
    )
}

/// Shift distribution over randomly placed atoms.
pub fn run_ensemble(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let started = Utc::now();
    let pipe = Pipeline::new(cfg.clone())?;
    let mut out = OutputDir::create(&cfg.output.dir)?;
    let ens = run_ensemble_pipeline(&pipe)?;
    out.write_csv("ensemble_atoms.csv", &ens.atoms)?;
    out.write_csv("ensemble_histogram.csv", &ens.histogram)?;
    let quantiles: Vec<_> = ens
        .band
        .quantiles
        .iter()
        .map(|&(p, v)| json!({"p": p, "shift_mhz": angular_to_mhz(v)}))
        .collect();
    let summary = json!({
        "n_atoms": ens.atoms.len(),
        "proposals": ens.sampled.proposals,
        "acceptance_rate": ens.sampled.acceptance_rate(),
        "failures": ens.band.failures.len(),
        "width_mhz": angular_to_mhz(ens.band.width),
        "quantiles": quantiles,
    });
    finish(out, "ensemble", cfg, started, summary)
}

/// Emission line shapes at the configured positions and reference lattice
/// constant; bound-state poles inside the gap are listed separately.
pub fn run_lineshape(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let started = Utc::now();
    let pipe = Pipeline::new(cfg.clone())?;
    let mut out = OutputDir::create(&cfg.output.dir)?;
    let sweep = pipe.sweep(&cfg.positions.points)?;
    let shapes = lineshapes(&pipe, &sweep.spectral, pipe.reference_lattice_constant())?;
    let (rows, poles, summary) = lineshape_rows(&shapes);
    out.write_csv("positions.csv", &position_rows(&cfg.positions.points))?;
    out.write_csv("lineshape.csv", &rows)?;
    out.write_csv("lineshape_poles.csv", &poles)?;
    out.write_csv("lineshape_summary.csv", &summary)?;
    finish(out, "lineshape", cfg, started, json!({ "positions": summary }))
}

/// Gap edges versus mesh, band frequencies versus plane-wave cutoff, and the
/// shift sweep's sensitivity to the optical cutoff `u_op`.
pub fn run_convergence(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let started = Utc::now();
    let pipe = Pipeline::new(cfg.clone())?;
    let mut out = OutputDir::create(&cfg.output.dir)?;
    out.write_csv("gap_convergence.csv", &gap_convergence(&pipe)?)?;
    out.write_csv("cutoff_convergence.csv", &cutoff_convergence(&pipe)?)?;
    let sweep = pipe.sweep(&cfg.positions.points)?;
    let (rows, summary) = u_op_sensitivity(&pipe, &sweep.spectral)?;
    out.write_csv("u_op_sensitivity.csv", &rows)?;
    out.write_csv("u_op_sensitivity_summary.csv", &summary)?;
    finish(out, "convergence", cfg, started, json!({ "u_op_sensitivity": summary }))
}
