//! Self-consistent level shift, decay rate and emission line shape.
//!
//! All frequencies are handled as offsets from the bare level, `ω = ω_l + δ`,
//! so shifts of a few MHz are resolved on top of optical frequencies.
//! Each channel contributes through its detuning `ω - ω_ch = (ω_l - ω_ch) + δ`:
//!
//! ```text
//! Γ(ω) = Σ α g(ω - ω_ch)                      (ω - ω_ch > 0 only)
//! Δ(ω) = Σ (α/2π) (ω - ω_ch) β(ω - ω_ch)
//! ```

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::atom::{vacuum_lamb_shift_with_cutoff, AtomModel, Channel};
use crate::constants::ReducedScale;
use crate::error::{Error, Result};
use crate::lsrf::SpectralFunction;
use crate::quadrature::{BetaIntegrator, QuadratureConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Root window half-width as a multiple of `max_ch α|ω_l - ω_ch|`.
    pub window_factor: f64,
    /// Sign-scan points across the window.
    pub scan_points: usize,
    /// Bisection stops at this fraction of the window.
    pub rel_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            window_factor: 1e4,
            scan_points: 4096,
            rel_tol: 1e-10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_factor > 0.0) || self.scan_points < 2 || !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(Error::InvalidInput(
                "solver needs window_factor > 0, scan_points >= 2 and 0 < rel_tol < 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftMethod {
    /// All channels with the full β (free-space tail included).
    Full,
    /// Vacuum shift plus the crystal correction of the downward channels.
    Decomposed,
}

impl ShiftMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            ShiftMethod::Full => "full",
            ShiftMethod::Decomposed => "decomposed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftResult {
    pub level: usize,
    pub position: [f64; 3],
    pub lattice_constant: f64,
    /// `δ = ω* - ω_l` (rad/s) of the root nearest the bare level.
    pub shift: f64,
    /// `δ a / 2πc`.
    pub shift_reduced: f64,
    /// `Δ_l⁰` (rad/s).
    pub shift_vacuum: f64,
    pub n_roots: usize,
    /// All roots found (rad/s offsets), ascending.
    pub roots: Vec<f64>,
    pub method: ShiftMethod,
}

/// Emission amplitude `C(ω)` on a grid, plus bound-state poles where `Γ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LineShape {
    /// Offsets `ω - ω_l` (rad/s).
    pub omega: Vec<f64>,
    pub gamma: Vec<f64>,
    pub delta: Vec<f64>,
    pub amplitude: Vec<f64>,
    /// `(offset, weight)` with weight `1/(1 - dΔ/dω)`.
    pub poles: Vec<(f64, f64)>,
}

impl LineShape {
    /// Trapezoid integral of the amplitude plus the pole weights.
    pub fn total_weight(&self) -> f64 {
        let mut s = 0.0;
        for i in 1..self.omega.len() {
            s += 0.5 * (self.amplitude[i] + self.amplitude[i - 1]) * (self.omega[i] - self.omega[i - 1]);
        }
        s + self.poles.iter().map(|p| p.1).sum::<f64>()
    }

    /// Builds the line shape on `omega` from `Γ(δ)` and `Δ(δ)`.
    pub fn from_functions(
        omega: Vec<f64>,
        gamma: impl Fn(f64) -> f64,
        delta: impl Fn(f64) -> Result<f64>,
    ) -> Result<Self> {
        let g: Vec<f64> = omega.iter().map(|&w| gamma(w)).collect();
        let d: Vec<f64> = omega.iter().map(|&w| delta(w)).collect::<Result<_>>()?;
        let amplitude = omega
            .iter()
            .zip(&g)
            .zip(&d)
            .map(|((&w, &gm), &dl)| {
                if gm <= 0.0 {
                    0.0
                } else {
                    let h = 0.5 * gm;
                    h / PI / ((w - dl).powi(2) + h * h)
                }
            })
            .collect();
        let h: Vec<f64> = omega.iter().zip(&d).map(|(w, dl)| w - dl).collect();
        let mut poles = Vec::new();
        for i in 0..omega.len() {
            if h[i] == 0.0 && g[i] <= 0.0 {
                poles.push(omega[i]);
            }
            if i > 0 && h[i - 1] * h[i] < 0.0 && g[i - 1] <= 0.0 && g[i] <= 0.0 {
                let (a, b) = (omega[i - 1], omega[i]);
                let f = |x: f64| delta(x).map(|v| x - v);
                poles.push(bisect(&f, a, b, h[i - 1], (b - a) * 1e-12)?);
            }
        }
        let step = omega
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
            .max(f64::MIN_POSITIVE)
            * 1e-2;
        let poles = poles
            .into_iter()
            .map(|p| {
                let slope = (delta(p + step)? - delta(p - step)?) / (2.0 * step);
                Ok((p, 1.0 / (1.0 - slope)))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            omega,
            gamma: g,
            delta: d,
            amplitude,
            poles,
        })
    }
}

fn bisect(f: &impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, mut fa: f64, tol: f64) -> Result<f64> {
    while b - a > tol {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Everything needed to evaluate Γ, Δ and the shift equation for one level
/// at one position and lattice constant.
#[derive(Debug, Clone)]
pub struct LevelSolver<'a> {
    sf: &'a SpectralFunction,
    position: usize,
    level: usize,
    omega_l: f64,
    scale: ReducedScale,
    integrator: BetaIntegrator,
    channels: Vec<Channel>,
    real: Vec<Channel>,
    delta0: f64,
    cfg: SolverConfig,
}

impl<'a> LevelSolver<'a> {
    pub fn new(
        sf: &'a SpectralFunction,
        position: usize,
        model: &AtomModel,
        level: usize,
        lattice_constant: f64,
        quad: &QuadratureConfig,
        cfg: &SolverConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let omega_l = model.level(level)?.omega;
        Ok(Self {
            sf,
            position,
            level,
            omega_l,
            scale: ReducedScale::new(lattice_constant),
            integrator: BetaIntegrator::new(sf, position, quad, lattice_constant)?,
            channels: model.channels(level)?,
            real: model.real_channels(level)?,
            delta0: vacuum_lamb_shift_with_cutoff(model, level, quad.omega_rel)?.delta0,
            cfg: *cfg,
        })
    }

    pub fn omega_level(&self) -> f64 {
        self.omega_l
    }

    pub fn vacuum_shift(&self) -> f64 {
        self.delta0
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    /// `Γ` (rad/s) at `ω = ω_l + offset`.
    pub fn gamma(&self, offset: f64) -> f64 {
        self.channels
            .iter()
            .map(|c| {
                let w = (self.omega_l - c.omega) + offset;
                if w > 0.0 {
                    c.alpha * self.sf.value(self.position, self.scale.to_reduced(w)) * self.scale.unit()
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// `Δ` (rad/s) at `ω = ω_l + offset`, all channels, full β.
    pub fn delta(&self, offset: f64) -> Result<f64> {
        let mut s = 0.0;
        for c in &self.channels {
            let w = (self.omega_l - c.omega) + offset;
            s += c.alpha / (2.0 * PI) * w * self.integrator.beta(self.scale.to_reduced(w))?.value;
        }
        Ok(s)
    }

    /// `Δ_l⁰ + Σ_{j<l} (α/2π)(ω - ω_j) β_corr(ω - ω_j)`.
    pub fn delta_decomposed(&self, offset: f64) -> Result<f64> {
        let mut s = self.delta0;
        for c in &self.real {
            let w = (self.omega_l - c.omega) + offset;
            s += c.alpha / (2.0 * PI) * w * self.integrator.correction(self.scale.to_reduced(w))?;
        }
        Ok(s)
    }

    fn rhs(&self, method: ShiftMethod, offset: f64) -> Result<f64> {
        match method {
            ShiftMethod::Full => self.delta(offset),
            ShiftMethod::Decomposed => self.delta_decomposed(offset),
        }
    }

    /// Half-width of the root scan (rad/s).
    pub fn window(&self, method: ShiftMethod) -> f64 {
        let chans = match method {
            ShiftMethod::Full => &self.channels,
            ShiftMethod::Decomposed => &self.real,
        };
        let strongest = chans
            .iter()
            .map(|c| c.alpha * (self.omega_l - c.omega).abs())
            .fold(0.0, f64::max);
        let base = match method {
            ShiftMethod::Full => strongest,
            ShiftMethod::Decomposed => strongest.max(self.delta0.abs()),
        };
        self.cfg.window_factor * base
    }

    /// One fixed-point step `δ ← RHS(δ)`, kept only if it stays in the
    /// bracket and lowers the residual. Exact when the RHS is flat.
    fn polish(&self, method: ShiftMethod, x: f64, lo: f64, hi: f64) -> Result<f64> {
        let rx = self.rhs(method, x)?;
        if rx < lo || rx > hi {
            return Ok(x);
        }
        let ry = self.rhs(method, rx)?;
        Ok(if (rx - ry).abs() <= (x - rx).abs() { rx } else { x })
    }

    /// Roots of `δ - RHS(δ)` by sign scan and bisection.
    pub fn solve(&self, method: ShiftMethod) -> Result<ShiftResult> {
        let w = self.window(method);
        let mut roots = Vec::new();
        if w == 0.0 {
            // nothing couples: the level stays put
            roots.push(0.0);
        } else {
            let f = |x: f64| self.rhs(method, x).map(|r| x - r);
            let n = self.cfg.scan_points;
            let xs: Vec<f64> = (0..n).map(|i| -w + 2.0 * w * i as f64 / (n - 1) as f64).collect();
            let mut prev = f(xs[0])?;
            if prev == 0.0 {
                roots.push(xs[0]);
            }
            for i in 1..n {
                let cur = f(xs[i])?;
                if cur == 0.0 {
                    roots.push(xs[i]);
                } else if prev != 0.0 && (prev < 0.0) != (cur < 0.0) {
                    let mid = bisect(&f, xs[i - 1], xs[i], prev, self.cfg.rel_tol * w)?;
                    roots.push(self.polish(method, mid, xs[i - 1], xs[i])?);
                }
                prev = cur;
            }
        }
        if roots.is_empty() {
            return Err(Error::NoRoot { window: w });
        }
        let shift = *roots
            .iter()
            .min_by(|a, b| a.abs().total_cmp(&b.abs()))
            .expect("non-empty");
        Ok(ShiftResult {
            level: self.level,
            position: self.sf.positions()[self.position],
            lattice_constant: self.scale.lattice_constant(),
            shift,
            shift_reduced: self.scale.to_reduced(shift),
            shift_vacuum: self.delta0,
            n_roots: roots.len(),
            roots,
            method,
        })
    }

    /// Line shape on `n_points` offsets spanning `±half_widths` half-widths
    /// around the full-method shift. When the level does not decay, the span
    /// falls back to a thousandth of the strongest channel's `α|ω_l - ω_ch|`.
    pub fn lineshape(&self, n_points: usize, half_widths: f64) -> Result<LineShape> {
        let centre = self.solve(ShiftMethod::Full)?.shift;
        let mut hw = 0.5 * self.gamma(centre);
        if hw <= 0.0 {
            hw = 1e-3 * self.window(ShiftMethod::Full) / self.cfg.window_factor;
        }
        if hw <= 0.0 {
            hw = 1.0;
        }
        let n = n_points.max(3);
        let span = half_widths * hw;
        let omega = (0..n)
            .map(|i| centre - span + 2.0 * span * i as f64 / (n - 1) as f64)
            .collect();
        LineShape::from_functions(omega, |w| self.gamma(w), |w| self.delta(w))
    }
}

/// `Γ` (rad/s) at absolute frequency `omega`.
pub fn gamma(
    sf: &SpectralFunction,
    position: usize,
    model: &AtomModel,
    level: usize,
    omega: f64,
    lattice_constant: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    let s = LevelSolver::new(sf, position, model, level, lattice_constant, quad, &SolverConfig::default())?;
    Ok(s.gamma(omega - s.omega_level()))
}

/// `Δ` (rad/s) at absolute frequency `omega`.
pub fn delta_fn(
    sf: &SpectralFunction,
    position: usize,
    model: &AtomModel,
    level: usize,
    omega: f64,
    lattice_constant: f64,
    quad: &QuadratureConfig,
) -> Result<f64> {
    let s = LevelSolver::new(sf, position, model, level, lattice_constant, quad, &SolverConfig::default())?;
    s.delta(omega - s.omega_level())
}

pub fn solve_shift_full(
    sf: &SpectralFunction,
    position: usize,
    model: &AtomModel,
    level: usize,
    lattice_constant: f64,
    quad: &QuadratureConfig,
    cfg: &SolverConfig,
) -> Result<ShiftResult> {
    LevelSolver::new(sf, position, model, level, lattice_constant, quad, cfg)?.solve(ShiftMethod::Full)
}

pub fn solve_shift_decomposed(
    sf: &SpectralFunction,
    position: usize,
    model: &AtomModel,
    level: usize,
    lattice_constant: f64,
    quad: &QuadratureConfig,
    cfg: &SolverConfig,
) -> Result<ShiftResult> {
    LevelSolver::new(sf, position, model, level, lattice_constant, quad, cfg)?.solve(ShiftMethod::Decomposed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::{hydrogen_model, Level};
    use crate::lsrf::FrequencyGrid;

    const A: f64 = 1.0e-7;

    fn vacuum() -> SpectralFunction {
        SpectralFunction::vacuum(vec![[0.0; 3]], FrequencyGrid::default())
    }

    fn table(f: impl Fn(f64) -> f64) -> SpectralFunction {
        let grid = FrequencyGrid::default();
        let values = grid.centres().into_iter().map(f).collect();
        SpectralFunction::new(vec![[0.0; 3]], grid, vec![values]).unwrap()
    }

    fn two_level(alpha: f64, u0: f64) -> AtomModel {
        let w = ReducedScale::new(A).to_angular(u0);
        AtomModel::new(
            vec![
                Level { label: "g".into(), omega: 0.0, psi0_sq: 0.0, omega_bar: None },
                Level { label: "e".into(), omega: w, psi0_sq: 0.0, omega_bar: None },
            ],
            vec![vec![0.0, 0.0], vec![alpha, 0.0]],
        )
        .unwrap()
    }

    #[test]
    fn vacuum_two_level_rate() {
        let m = two_level(1e-7, 0.8);
        let sf = vacuum();
        let q = QuadratureConfig::default();
        let s = LevelSolver::new(&sf, 0, &m, 1, A, &q, &SolverConfig::default()).unwrap();
        let w = m.levels()[1].omega;
        assert!((s.gamma(0.0) / (1e-7 * w) - 1.0).abs() < 1e-12);
        assert_eq!(s.gamma(-2.0 * w), 0.0);
    }

    #[test]
    fn gap_inhibits_decay() {
        let m = two_level(1e-7, 0.77);
        let sf = table(|u| if (0.75..0.79).contains(&u) { 0.0 } else { u });
        let q = QuadratureConfig::default();
        let s = LevelSolver::new(&sf, 0, &m, 1, A, &q, &SolverConfig::default()).unwrap();
        assert_eq!(s.gamma(0.0), 0.0);
    }

    #[test]
    fn uncoupled_level_does_not_move() {
        let m = two_level(1e-7, 0.8).scaled(0.0);
        let sf = vacuum();
        let q = QuadratureConfig::default();
        for method in [ShiftMethod::Full, ShiftMethod::Decomposed] {
            let r = LevelSolver::new(&sf, 0, &m, 1, A, &q, &SolverConfig::default())
                .unwrap()
                .solve(method)
                .unwrap();
            assert_eq!((r.shift, r.n_roots), (0.0, 1));
        }
    }

    #[test]
    fn zero_table_without_tail_gives_no_shift() {
        let m = two_level(1e-7, 0.8);
        let sf = table(|_| 0.0);
        let q = QuadratureConfig { omega_op_reduced: 3.5, omega_rel: ReducedScale::new(A).to_angular(3.5) };
        let s = LevelSolver::new(&sf, 0, &m, 1, A, &q, &SolverConfig::default()).unwrap();
        assert_eq!(s.delta(0.0).unwrap(), 0.0);
    }

    #[test]
    fn hydrogen_2s_decomposed_is_the_vacuum_shift_anywhere() {
        let h = hydrogen_model(3).unwrap();
        let l = h.index_of("2s").unwrap();
        let sf = table(|u| u * (1.0 + 0.5 * (13.0 * u).sin()));
        let q = QuadratureConfig::default();
        for a in [80e-9, 100e-9, 120e-9] {
            let r = solve_shift_decomposed(&sf, 0, &h, l, a, &q, &SolverConfig::default()).unwrap();
            assert_eq!(r.shift, r.shift_vacuum);
            assert_eq!(r.n_roots, 1);
        }
    }

    #[test]
    fn vacuum_full_reproduces_vacuum_shift() {
        let h = hydrogen_model(3).unwrap();
        let sf = vacuum();
        let q = QuadratureConfig::default();
        let l = h.index_of("2s").unwrap();
        let r = solve_shift_full(&sf, 0, &h, l, A, &q, &SolverConfig::default()).unwrap();
        assert!((r.shift / r.shift_vacuum - 1.0).abs() < 1e-3, "{} vs {}", r.shift, r.shift_vacuum);
        let p = h.index_of("2p").unwrap();
        let r = solve_shift_full(&sf, 0, &h, p, A, &q, &SolverConfig::default()).unwrap();
        let scale = h.alpha(p, 0) * (h.levels()[p].omega - h.levels()[0].omega);
        assert!(r.shift.abs() < 1e-5 * scale, "{}", r.shift);
    }

    #[test]
    fn decomposed_correction_is_linear_in_alpha() {
        let h = hydrogen_model(2).unwrap();
        let p = h.index_of("2p").unwrap();
        let sf = table(|u| u * (1.0 + 0.5 * (13.0 * u).sin()));
        let q = QuadratureConfig::default();
        let c = SolverConfig::default();
        let base = LevelSolver::new(&sf, 0, &h, p, A, &q, &c).unwrap().delta_decomposed(0.0).unwrap();
        for s in [0.5, 3.0] {
            let hs = h.scaled(s);
            let v = LevelSolver::new(&sf, 0, &hs, p, A, &q, &c).unwrap().delta_decomposed(0.0).unwrap();
            assert!((v - s * base).abs() < 1e-12 * base.abs());
        }
    }

    #[test]
    fn roots_bracket_sign_changes() {
        let h = hydrogen_model(2).unwrap();
        let p = h.index_of("2p").unwrap();
        let sf = table(|u| u * (1.0 + 0.8 * (40.0 * u).sin()));
        let q = QuadratureConfig::default();
        let s = LevelSolver::new(&sf, 0, &h, p, A, &q, &SolverConfig::default()).unwrap();
        let r = s.solve(ShiftMethod::Full).unwrap();
        let w = s.window(ShiftMethod::Full);
        for root in &r.roots {
            let e = 1e-9 * w;
            let lo = root - e - s.delta(root - e).unwrap();
            let hi = root + e - s.delta(root + e).unwrap();
            assert!(lo * hi <= 0.0);
        }
    }

    #[test]
    fn synthetic_lorentzian() {
        let (g0, d0) = (2.0e6, 3.0e5);
        let omega: Vec<f64> = (0..40_001).map(|i| d0 + (i as f64 - 20_000.0) * 0.01 * g0).collect();
        let ls = LineShape::from_functions(omega, |_| g0, |_| Ok(d0)).unwrap();
        let peak = ls.amplitude.iter().cloned().fold(0.0, f64::max);
        assert!((peak - 2.0 / (PI * g0)).abs() < 1e-12 * peak);
        assert!(ls.poles.is_empty());
        assert!((ls.total_weight() - 1.0).abs() < 0.02);
        // FWHM = Γ0
        let half: Vec<f64> = ls
            .omega
            .iter()
            .zip(&ls.amplitude)
            .filter(|(_, a)| **a >= 0.5 * peak)
            .map(|(w, _)| *w)
            .collect();
        let fwhm = half.last().unwrap() - half.first().unwrap();
        assert!((fwhm - g0).abs() < 0.02 * g0);
    }

    #[test]
    fn no_decay_channel_gives_a_single_pole() {
        let omega: Vec<f64> = (0..1001).map(|i| -1.0 + 0.002 * i as f64).collect();
        // δ = 0.2 + 0.5 δ has the root δ = 0.4 and residue 1/(1-0.5) = 2
        let ls = LineShape::from_functions(omega, |_| 0.0, |w| Ok(0.2 + 0.5 * w)).unwrap();
        assert!(ls.amplitude.iter().all(|&a| a == 0.0));
        assert_eq!(ls.poles.len(), 1);
        assert!((ls.poles[0].0 - 0.4).abs() < 1e-9);
        assert!((ls.poles[0].1 - 2.0).abs() < 1e-6);
    }

    #[test]
    fn crystal_line_shape_sum_rule() {
        let h = hydrogen_model(2).unwrap();
        let p = h.index_of("2p").unwrap();
        let sf = table(|u| u * (1.0 + 0.5 * (13.0 * u).sin()));
        let q = QuadratureConfig::default();
        let s = LevelSolver::new(&sf, 0, &h, p, A, &q, &SolverConfig::default()).unwrap();
        let ls = s.lineshape(8001, 400.0).unwrap();
        assert!((ls.total_weight() - 1.0).abs() < 0.02, "{}", ls.total_weight());
    }
}
