//! The frequency integral
//!
//! ```text
//! β(Δ) = P∫₀^{u_rel} g(u') / ((Δ - u') u') du'
//! ```
//!
//! split into the tabulated crystal segment `(0, u_op]` and a free-space tail
//! `(u_op, u_rel]` with `g = u'`. On the crystal segment `g` is the linear
//! interpolant of the LSRF table, and the integral of that interpolant is
//! evaluated in closed form. With `1/((Δ-u)u) = (1/Δ)(1/u + 1/(Δ-u))` and
//! `g = a_s + b_s u` on segment `s`, the principal value reduces to
//!
//! ```text
//! Δ·I = Σ_s a_s ln(x_{s+1}/x_s) + c_0 ln|Δ| - c_last ln|Δ - u_op|
//!       + Σ_k (b_k - b_{k-1})(Δ - x_k) ln|Δ - x_k|,     c_s = a_s + b_s Δ
//! ```
//!
//! Every interior log carries a factor `(Δ - x_k)`, so detunings on a grid
//! node need no special handling.

use serde::{Deserialize, Serialize};

use crate::constants::{omega_relativistic, ReducedScale};
use crate::error::{Error, Result};
use crate::lsrf::SpectralFunction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureConfig {
    /// Optical cutoff `u_op`; above it the medium is treated as free space.
    pub omega_op_reduced: f64,
    /// Relativistic cutoff `mc²/ħ` in rad/s.
    pub omega_rel: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            omega_op_reduced: 3.5,
            omega_rel: omega_relativistic(),
        }
    }
}

impl QuadratureConfig {
    pub fn u_rel(&self, lattice_constant: f64) -> f64 {
        ReducedScale::new(lattice_constant).to_reduced(self.omega_rel)
    }

    pub fn validate(&self, lattice_constant: f64) -> Result<()> {
        let u_rel = self.u_rel(lattice_constant);
        if !(self.omega_op_reduced > 0.0 && self.omega_op_reduced <= u_rel) {
            return Err(Error::InvalidInput(format!(
                "need 0 < u_op <= u_rel, got u_op = {} and u_rel = {u_rel:.4e}",
                self.omega_op_reduced
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BetaKind {
    /// `Δ > 0`: the pole lies inside the range.
    Principal,
    /// `Δ < 0`: ordinary integral.
    Normal,
}

impl BetaKind {
    pub fn of(delta: f64) -> Self {
        if delta > 0.0 {
            BetaKind::Principal
        } else {
            BetaKind::Normal
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            BetaKind::Principal => "principal",
            BetaKind::Normal => "normal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaValue {
    pub detuning: f64,
    pub value: f64,
    pub kind: BetaKind,
}

/// Closed-form `P∫₀^{x_last} y(u)/((Δ-u)u) du` for a piecewise-linear `y`
/// with `y(0) = 0`.
#[derive(Debug, Clone)]
struct PiecewiseLinearKernel {
    x: Vec<f64>,
    /// Slope of each segment.
    slope: Vec<f64>,
    /// `b_0` and the slope jumps `b_k - b_{k-1}` at interior nodes.
    kinks: Vec<f64>,
    /// Δ-independent part `Σ_s a_s ln(x_{s+1}/x_s)`.
    log_part: f64,
    /// Intercept of the last segment.
    last_intercept: f64,
}

impl PiecewiseLinearKernel {
    fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        debug_assert!(x.len() >= 2 && x[0] == 0.0 && y[0] == 0.0);
        let segments = x.len() - 1;
        let slope: Vec<f64> = (0..segments).map(|s| (y[s + 1] - y[s]) / (x[s + 1] - x[s])).collect();
        let mut log_part = 0.0;
        for s in 1..segments {
            let a = y[s] - slope[s] * x[s];
            log_part += a * (x[s + 1] / x[s]).ln();
        }
        let mut kinks = Vec::with_capacity(segments);
        kinks.push(slope[0]);
        for k in 1..segments {
            kinks.push(slope[k] - slope[k - 1]);
        }
        let last_intercept = y[segments] - slope[segments - 1] * x[segments];
        Self {
            x,
            slope,
            kinks,
            log_part,
            last_intercept,
        }
    }

    fn upper(&self) -> f64 {
        *self.x.last().expect("non-empty kernel")
    }

    fn integral(&self, delta: f64) -> f64 {
        let last = self.slope.len() - 1;
        let c_last = self.last_intercept + self.slope[last] * delta;
        // c_0 ln|Δ| with c_0 = b_0 Δ
        let mut acc = self.log_part + self.kinks[0] * delta * delta.abs().ln()
            - c_last * (delta - self.upper()).abs().ln();
        for k in 1..self.kinks.len() {
            let d = delta - self.x[k];
            if d != 0.0 && self.kinks[k] != 0.0 {
                acc += self.kinks[k] * d * d.abs().ln();
            }
        }
        acc / delta
    }
}

/// β and its crystal-minus-vacuum correction for one position and one
/// lattice constant.
#[derive(Debug, Clone)]
pub struct BetaIntegrator {
    pc: PiecewiseLinearKernel,
    correction: PiecewiseLinearKernel,
    u_op: f64,
    u_rel: f64,
}

impl BetaIntegrator {
    pub fn new(sf: &SpectralFunction, position: usize, cfg: &QuadratureConfig, lattice_constant: f64) -> Result<Self> {
        cfg.validate(lattice_constant)?;
        Self::with_cutoffs(sf, position, cfg.omega_op_reduced, cfg.u_rel(lattice_constant))
    }

    /// Explicit reduced cutoffs; `u_rel = u_op` drops the free-space tail.
    pub fn with_cutoffs(sf: &SpectralFunction, position: usize, u_op: f64, u_rel: f64) -> Result<Self> {
        if position >= sf.n_positions() {
            return Err(Error::InvalidInput(format!("position index {position} out of range")));
        }
        if !(u_op > 0.0 && u_rel >= u_op) {
            return Err(Error::InvalidInput(format!("need 0 < u_op <= u_rel, got {u_op} and {u_rel}")));
        }
        let grid = sf.grid();
        if grid.u_max() < u_op * (1.0 - 1e-12) {
            return Err(Error::SpectralCoverage {
                covered: grid.u_max(),
                needed: u_op,
            });
        }
        let mut x = vec![0.0];
        let mut y = vec![0.0];
        for (i, &g) in sf.values(position).iter().enumerate() {
            let u = grid.centre(i);
            if u >= u_op * (1.0 - 1e-12) {
                break;
            }
            x.push(u);
            y.push(g);
        }
        x.push(u_op);
        y.push(sf.value(position, u_op));
        let y_corr: Vec<f64> = x.iter().zip(&y).map(|(u, g)| g - u).collect();
        Ok(Self {
            pc: PiecewiseLinearKernel::new(x.clone(), y),
            correction: PiecewiseLinearKernel::new(x, y_corr),
            u_op,
            u_rel,
        })
    }

    pub fn u_op(&self) -> f64 {
        self.u_op
    }

    pub fn u_rel(&self) -> f64 {
        self.u_rel
    }

    fn check(&self, delta: f64) -> Result<()> {
        if delta == 0.0 || !delta.is_finite() {
            return Err(Error::ZeroDetuning);
        }
        if delta == self.u_op || delta == self.u_rel {
            return Err(Error::DetuningAtCutoff(delta));
        }
        Ok(())
    }

    /// Crystal segment plus free-space tail.
    pub fn beta(&self, delta: f64) -> Result<BetaValue> {
        self.check(delta)?;
        let tail = if self.u_rel > self.u_op {
            ((delta - self.u_op) / (delta - self.u_rel)).abs().ln()
        } else {
            0.0
        };
        Ok(BetaValue {
            detuning: delta,
            value: self.pc.integral(delta) + tail,
            kind: BetaKind::of(delta),
        })
    }

    /// `P∫₀^{u_op} (g - u')/((Δ - u')u') du'`.
    pub fn correction(&self, delta: f64) -> Result<f64> {
        self.check(delta)?;
        Ok(self.correction.integral(delta))
    }

    /// Free-space value over the same range.
    pub fn vacuum(&self, delta: f64) -> f64 {
        beta_vacuum(delta, self.u_rel)
    }
}

/// `β(Δ)` for `g = u'` on `(0, u_rel]`: `ln|Δ/(Δ - u_rel)|`.
pub fn beta_vacuum(delta: f64, u_rel: f64) -> f64 {
    if delta < 0.0 {
        -(u_rel / -delta).ln_1p()
    } else {
        (delta / (delta - u_rel)).abs().ln()
    }
}

pub fn beta(
    sf: &SpectralFunction,
    position: usize,
    delta: f64,
    cfg: &QuadratureConfig,
    lattice_constant: f64,
) -> Result<BetaValue> {
    BetaIntegrator::new(sf, position, cfg, lattice_constant)?.beta(delta)
}

pub fn beta_pc_correction(
    sf: &SpectralFunction,
    position: usize,
    delta: f64,
    cfg: &QuadratureConfig,
    lattice_constant: f64,
) -> Result<f64> {
    BetaIntegrator::new(sf, position, cfg, lattice_constant)?.correction(delta)
}
