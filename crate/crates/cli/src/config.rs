//! Run configuration: one TOML file, one table per pipeline stage.
//! Every key has a default, so an empty file is a valid opal run.

use std::path::{Path, PathBuf};

use pclamb_core::atom::{hydrogen_model, AtomModel};
use pclamb_core::crystal::CrystalStructure;
use pclamb_core::crystal::ReciprocalBasis;
use pclamb_core::ensemble::SamplingRegion;
use pclamb_core::lsrf::LsrfConfig;
use pclamb_core::quadrature::QuadratureConfig;
use pclamb_core::solver::{ShiftMethod, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

const NM: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub structure: StructureConfig,
    pub basis: BasisConfig,
    pub positions: PositionsConfig,
    pub lsrf: LsrfConfig,
    pub quadrature: QuadratureConfig,
    pub solver: SolverConfig,
    pub atom: AtomConfig,
    pub bands: BandsConfig,
    pub beta: BetaConfig,
    pub sweep: SweepConfig,
    pub ensemble: EnsembleConfig,
    pub lineshape: LineshapeConfig,
    pub convergence: ConvergenceConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StructureConfig {
    pub eps_sphere: f64,
    pub eps_background: f64,
    pub filling_fraction: f64,
    /// Lattice constant for the single-`a` commands (`beta`, `ensemble`,
    /// `lineshape`). Band and LSRF results do not depend on it.
    pub lattice_constant_nm: f64,
}

impl Default for StructureConfig {
    fn default() -> Self {
        Self {
            eps_sphere: 1.0,
            eps_background: 3.6 * 3.6,
            filling_fraction: 0.74,
            lattice_constant_nm: 93.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasisConfig {
    /// Keep reciprocal vectors with `|G| <= cutoff` (units of 2π/a).
    pub cutoff: f64,
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self { cutoff: 7.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PositionsConfig {
    /// Atom positions in units of `a`.
    pub points: Vec<[f64; 3]>,
}

impl Default for PositionsConfig {
    fn default() -> Self {
        Self {
            points: vec![[0.0, 0.0, 0.0], [0.34, 0.0, 0.0], [0.24, 0.24, 0.0]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AtomConfig {
    /// Built-in hydrogen with shells `1..=hydrogen_n_max`.
    pub hydrogen_n_max: usize,
    /// Custom level table; overrides the built-in model together with `alpha_csv`.
    pub levels_csv: Option<PathBuf>,
    pub alpha_csv: Option<PathBuf>,
}

impl Default for AtomConfig {
    fn default() -> Self {
        Self {
            hydrogen_n_max: 4,
            levels_csv: None,
            alpha_csv: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BandsConfig {
    pub n_bands: usize,
}

impl Default for BandsConfig {
    fn default() -> Self {
        Self { n_bands: 12 }
    }
}

/// Detunings `±u` for `u` evenly spaced in `[u_min, u_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BetaConfig {
    pub u_min: f64,
    pub u_max: f64,
    pub n_points: usize,
}

impl Default for BetaConfig {
    fn default() -> Self {
        Self {
            u_min: 0.01,
            u_max: 3.4,
            n_points: 679,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub a_min_nm: f64,
    pub a_max_nm: f64,
    pub steps: usize,
    pub levels: Vec<String>,
    pub methods: Vec<ShiftMethod>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            a_min_nm: 80.0,
            a_max_nm: 105.0,
            steps: 20,
            levels: vec!["2s".into(), "2p".into()],
            methods: vec![ShiftMethod::Decomposed, ShiftMethod::Full],
        }
    }
}

impl SweepConfig {
    /// Lattice constants in metres, evenly spaced, endpoints included.
    pub fn lattice_constants(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.a_min_nm * NM];
        }
        (0..self.steps)
            .map(|i| (self.a_min_nm + (self.a_max_nm - self.a_min_nm) * i as f64 / (self.steps - 1) as f64) * NM)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    pub n_atoms: usize,
    pub region: SamplingRegion,
    pub seed: u64,
    pub level: String,
    pub lattice_constant_nm: f64,
    pub histogram_bins: usize,
    pub method: ShiftMethod,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            n_atoms: 200,
            region: SamplingRegion::AirPores,
            seed: 20_050_101,
            level: "2p".into(),
            lattice_constant_nm: 93.0,
            histogram_bins: 20,
            method: ShiftMethod::Decomposed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LineshapeConfig {
    pub level: String,
    pub n_points: usize,
    /// Span on each side of the line centre, in half-widths `Γ/2`.
    pub half_widths: f64,
}

impl Default for LineshapeConfig {
    fn default() -> Self {
        Self {
            level: "2p".into(),
            n_points: 4001,
            half_widths: 400.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceConfig {
    /// Relative change applied to `u_op` in both directions.
    pub u_op_change: f64,
    /// Cubic mesh sizes for the gap-edge study.
    pub meshes: Vec<usize>,
    /// Plane-wave cutoffs for the band-frequency study.
    pub cutoffs: Vec<f64>,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            u_op_change: 0.1,
            meshes: vec![16, 20],
            cutoffs: vec![5.0, 6.0, 7.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Free-space variant of this run (`ε ≡ 1`).
    pub fn vacuum(mut self) -> Self {
        self.structure.eps_sphere = 1.0;
        self.structure.eps_background = 1.0;
        self
    }

    pub fn structure(&self) -> Result<CrystalStructure, CliError> {
        let s = &self.structure;
        CrystalStructure::new(
            s.lattice_constant_nm * NM,
            s.eps_sphere,
            s.eps_background,
            s.filling_fraction,
        )
        .map_err(|e| bad(format!("[structure] {e}")))
    }

    pub fn basis(&self) -> Result<ReciprocalBasis, CliError> {
        ReciprocalBasis::new(self.basis.cutoff).map_err(|e| bad(format!("[basis] {e}")))
    }

    pub fn atom_model(&self) -> Result<AtomModel, CliError> {
        let a = &self.atom;
        match (&a.levels_csv, &a.alpha_csv) {
            (None, None) => hydrogen_model(a.hydrogen_n_max).map_err(|e| bad(format!("[atom] {e}"))),
            (Some(l), Some(al)) => {
                let open = |p: &PathBuf| {
                    std::fs::File::open(p).map_err(|e| bad(format!("[atom] cannot open {}: {e}", p.display())))
                };
                AtomModel::from_csv(open(l)?, open(al)?).map_err(|e| bad(format!("[atom] {e}")))
            }
            _ => Err(bad("[atom] levels_csv and alpha_csv must be given together")),
        }
    }

    pub fn level_index(&self, model: &AtomModel, label: &str) -> Result<usize, CliError> {
        model.index_of(label).ok_or_else(|| {
            let known: Vec<&str> = model.levels().iter().map(|l| l.label.as_str()).collect();
            bad(format!("unknown level {label:?}; the atom model has {}", known.join(", ")))
        })
    }

    /// Checks every stage's parameters up front so that a run fails before
    /// the expensive band sweep rather than after it.
    pub fn validate(&self) -> Result<(), CliError> {
        self.structure()?;
        self.basis()?;
        let model = self.atom_model()?;
        if self.positions.points.is_empty() {
            return Err(bad("[positions] points must not be empty"));
        }
        if self.positions.points.iter().flatten().any(|x| !x.is_finite()) {
            return Err(bad("[positions] coordinates must be finite"));
        }
        self.lsrf.validate().map_err(|e| bad(format!("[lsrf] {e}")))?;
        self.solver.validate().map_err(|e| bad(format!("[solver] {e}")))?;

        let u_op = self.quadrature.omega_op_reduced;
        let u_max = self.lsrf.grid.u_max();
        let c = &self.convergence;
        if !(c.u_op_change >= 0.0 && c.u_op_change < 1.0) {
            return Err(bad("[convergence] u_op_change must be in [0, 1)"));
        }
        if u_op * (1.0 + c.u_op_change) > u_max * (1.0 + 1e-12) {
            return Err(bad(format!(
                "[quadrature] omega_op_reduced = {u_op} (raised by {} for the sensitivity study) exceeds the \
                 frequency grid, which ends at u = {u_max}; enlarge [lsrf.grid] n_bins",
                c.u_op_change
            )));
        }
        if c.meshes.iter().any(|&n| n == 0) || c.cutoffs.iter().any(|&g| !(g > 0.0)) {
            return Err(bad("[convergence] meshes and cutoffs must be positive"));
        }

        let s = &self.sweep;
        if s.steps == 0 || !(s.a_min_nm > 0.0) || s.a_max_nm < s.a_min_nm {
            return Err(bad("[sweep] need steps >= 1 and 0 < a_min_nm <= a_max_nm"));
        }
        if s.levels.is_empty() || s.methods.is_empty() {
            return Err(bad("[sweep] levels and methods must not be empty"));
        }
        for l in &s.levels {
            self.level_index(&model, l)?;
        }
        let mut a_values = s.lattice_constants();
        a_values.push(self.structure.lattice_constant_nm * NM);
        a_values.push(self.ensemble.lattice_constant_nm * NM);
        for a in a_values {
            self.quadrature
                .validate(a)
                .map_err(|e| bad(format!("[quadrature] at a = {:.3} nm: {e}", a / NM)))?;
        }

        let b = &self.beta;
        if !(b.u_min > 0.0 && b.u_max >= b.u_min) || b.n_points == 0 {
            return Err(bad("[beta] need 0 < u_min <= u_max and n_points >= 1"));
        }
        if b.u_max >= u_op {
            return Err(bad(format!("[beta] u_max = {} must lie below omega_op_reduced = {u_op}", b.u_max)));
        }

        let e = &self.ensemble;
        if e.n_atoms == 0 || e.histogram_bins == 0 || !(e.lattice_constant_nm > 0.0) {
            return Err(bad("[ensemble] need n_atoms >= 1, histogram_bins >= 1, lattice_constant_nm > 0"));
        }
        self.level_index(&model, &e.level)?;

        let ls = &self.lineshape;
        if ls.n_points < 3 || !(ls.half_widths > 0.0) {
            return Err(bad("[lineshape] need n_points >= 3 and half_widths > 0"));
        }
        self.level_index(&model, &ls.level)?;

        if self.bands.n_bands == 0 {
            return Err(bad("[bands] n_bands must be positive"));
        }
        Ok(())
    }
}
