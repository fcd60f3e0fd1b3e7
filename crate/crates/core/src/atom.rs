//! Multi-level atomic data: level frequencies, relative line widths
//! `α_lj = e²|p_lj|²/(3π m² ε₀ ħ c³)`, contact densities `|ψ_l(0)|²` and the
//! average excitation frequency `ω̄_l`.
//!
//! Coupling of level `l` to higher levels (bound and continuum) is carried by
//! one lumped virtual channel at `ω̄_l` whose strength saturates the sum rule
//!
//! ```text
//! Σ_j ω_jl |p_lj|² = ħ e² |ψ_l(0)|² / 2ε₀ .
//! ```
//!
//! With free-space `g` this channel plus the explicit downward channels
//! reproduces the standard nonrelativistic vacuum shift.

use std::f64::consts::PI;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::constants::{
    omega_relativistic, rydberg_angular, BOHR_RADIUS, ELECTRON_MASS, ELEMENTARY_CHARGE, HBAR,
    SPEED_OF_LIGHT, VACUUM_PERMITTIVITY,
};
use crate::error::{Error, Result};

/// Bethe's average excitation energy for hydrogen, in Rydberg, measured from
/// the ground level.
pub const BETHE_AVERAGE_EXCITATION_RY: f64 = 19.8;

const ORBITAL_LETTERS: [char; 6] = ['s', 'p', 'd', 'f', 'g', 'h'];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub label: String,
    /// Level frequency (rad/s).
    pub omega: f64,
    /// `|ψ(0)|²` (m⁻³).
    pub psi0_sq: f64,
    /// `ω̄` (rad/s); derived from the downward channels when absent and
    /// `ψ(0) = 0`.
    pub omega_bar: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    /// Dipole transition to an explicit level.
    Bound(usize),
    /// All higher states lumped at `ω̄`.
    Virtual,
}

/// One term `α (ω - ω_ch)` of the radiative self-energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Channel {
    pub kind: ChannelKind,
    pub omega: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VacuumShift {
    pub level: usize,
    /// rad/s
    pub delta0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomModel {
    levels: Vec<Level>,
    /// Row-major `α[l][j]`.
    alpha: Vec<f64>,
}

/// `3π m² ε₀ ħ c³ / e²`: converts `α` to `|p|²`.
fn alpha_to_p2() -> f64 {
    3.0 * PI * ELECTRON_MASS.powi(2) * VACUUM_PERMITTIVITY * HBAR * SPEED_OF_LIGHT.powi(3)
        / ELEMENTARY_CHARGE.powi(2)
}

impl AtomModel {
    pub fn new(levels: Vec<Level>, alpha: Vec<Vec<f64>>) -> Result<Self> {
        let n = levels.len();
        if n == 0 {
            return Err(Error::InvalidInput("atom model needs at least one level".into()));
        }
        if alpha.len() != n || alpha.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput(format!("alpha matrix must be {n}x{n}")));
        }
        for (l, lv) in levels.iter().enumerate() {
            if !lv.omega.is_finite() || !(lv.psi0_sq >= 0.0) {
                return Err(Error::InvalidInput(format!("level {} has invalid data", lv.label)));
            }
            if alpha[l][l] != 0.0 {
                return Err(Error::InvalidInput(format!("alpha[{0}][{0}] must be zero", lv.label)));
            }
            if let Some(wb) = lv.omega_bar {
                if !(wb > lv.omega) {
                    return Err(Error::InvalidInput(format!(
                        "omega_bar of {} must exceed the level frequency",
                        lv.label
                    )));
                }
            }
        }
        if alpha.iter().flatten().any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return Err(Error::InvalidInput("alpha entries must be finite and >= 0".into()));
        }
        Ok(Self {
            levels,
            alpha: alpha.into_iter().flatten().collect(),
        })
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn level(&self, l: usize) -> Result<&Level> {
        self.levels.get(l).ok_or(Error::UnknownLevel(l))
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.levels.iter().position(|lv| lv.label == label)
    }

    pub fn alpha(&self, l: usize, j: usize) -> f64 {
        self.alpha[l * self.levels.len() + j]
    }

    pub fn set_omega_bar(&mut self, l: usize, omega_bar: Option<f64>) -> Result<()> {
        let lv = self.levels.get_mut(l).ok_or(Error::UnknownLevel(l))?;
        if let Some(wb) = omega_bar {
            if !(wb > lv.omega) {
                return Err(Error::InvalidInput(format!(
                    "omega_bar of {} must exceed the level frequency",
                    lv.label
                )));
            }
        }
        lv.omega_bar = omega_bar;
        Ok(())
    }

    /// The same atom with every `α` multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            levels: self.levels.clone(),
            alpha: self.alpha.iter().map(|a| a * s).collect(),
        }
    }

    /// `|p_lj|²` in (kg m/s)².
    pub fn dipole_strength(&self, l: usize, j: usize) -> f64 {
        self.alpha(l, j) * alpha_to_p2()
    }

    /// Explicit dipole channels to lower levels.
    pub fn real_channels(&self, l: usize) -> Result<Vec<Channel>> {
        let wl = self.level(l)?.omega;
        Ok((0..self.n_levels())
            .filter(|&j| self.levels[j].omega < wl && self.alpha(l, j) > 0.0)
            .map(|j| Channel {
                kind: ChannelKind::Bound(j),
                omega: self.levels[j].omega,
                alpha: self.alpha(l, j),
            })
            .collect())
    }

    /// `Σ_{j>l} ω_jl |p_lj|²` from the sum rule:
    /// `ħe²|ψ(0)|²/2ε₀ + Σ_{j<l} ω_lj |p_lj|²`.
    pub fn upward_strength(&self, l: usize) -> Result<f64> {
        let lv = self.level(l)?;
        let contact = HBAR * ELEMENTARY_CHARGE.powi(2) * lv.psi0_sq / (2.0 * VACUUM_PERMITTIVITY);
        let down: f64 = self
            .real_channels(l)?
            .iter()
            .map(|c| (lv.omega - c.omega) * c.alpha * alpha_to_p2())
            .sum();
        Ok(contact + down)
    }

    /// `ω̄_l`: the configured value, or for `ψ(0) = 0` the frequency whose
    /// log-distance from the level is the `ω_lj|p_lj|²`-weighted mean of
    /// `ln ω_lj` over the downward channels. `None` when nothing couples
    /// upward.
    pub fn omega_bar(&self, l: usize) -> Result<Option<f64>> {
        let lv = self.level(l)?;
        if let Some(wb) = lv.omega_bar {
            return Ok(Some(wb));
        }
        if lv.psi0_sq > 0.0 {
            return Err(Error::MissingOmegaBar(lv.label.clone()));
        }
        let down = self.real_channels(l)?;
        if down.is_empty() {
            return Ok(None);
        }
        let (mut wsum, mut lsum) = (0.0, 0.0);
        for c in &down {
            let w = lv.omega - c.omega;
            let weight = w * c.alpha;
            wsum += weight;
            lsum += weight * w.ln();
        }
        Ok(Some(lv.omega + (lsum / wsum).exp()))
    }

    /// Downward channels plus the lumped virtual channel.
    pub fn channels(&self, l: usize) -> Result<Vec<Channel>> {
        let mut out = self.real_channels(l)?;
        if let Some(v) = self.virtual_channel(l)? {
            out.push(v);
        }
        Ok(out)
    }

    pub fn virtual_channel(&self, l: usize) -> Result<Option<Channel>> {
        let s_up = self.upward_strength(l)?;
        if s_up <= 0.0 {
            return Ok(None);
        }
        let Some(wb) = self.omega_bar(l)? else {
            return Ok(None);
        };
        let wl = self.levels[l].omega;
        Ok(Some(Channel {
            kind: ChannelKind::Virtual,
            omega: wb,
            alpha: s_up / (alpha_to_p2() * (wb - wl)),
        }))
    }

    /// Reads a level table `(label, omega_j_rad_s, psi0_sq_m3, omega_bar_rad_s)`
    /// and an alpha table `(level_from, level_to, alpha)`, both CSV with
    /// headers. An empty `omega_bar_rad_s` cell means "derive".
    pub fn from_csv<L: Read, A: Read>(levels: L, alpha: A) -> Result<Self> {
        #[derive(Deserialize)]
        struct LevelRow {
            label: String,
            omega_j_rad_s: f64,
            psi0_sq_m3: f64,
            omega_bar_rad_s: Option<f64>,
        }
        #[derive(Deserialize)]
        struct AlphaRow {
            level_from: String,
            level_to: String,
            alpha: f64,
        }
        let csv_err = |e: csv::Error| Error::InvalidInput(format!("atom table: {e}"));
        let mut lv = Vec::new();
        for row in csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(levels).deserialize() {
            let r: LevelRow = row.map_err(csv_err)?;
            lv.push(Level {
                label: r.label,
                omega: r.omega_j_rad_s,
                psi0_sq: r.psi0_sq_m3,
                omega_bar: r.omega_bar_rad_s,
            });
        }
        let n = lv.len();
        let find = |label: &str| {
            lv.iter()
                .position(|l| l.label == label)
                .ok_or_else(|| Error::InvalidInput(format!("alpha table names unknown level {label}")))
        };
        let mut a = vec![vec![0.0; n]; n];
        for row in csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(alpha).deserialize() {
            let r: AlphaRow = row.map_err(csv_err)?;
            a[find(&r.level_from)?][find(&r.level_to)?] = r.alpha;
        }
        Self::new(lv, a)
    }
}

/// `Δ_l⁰ = e⁴|ψ_l(0)|²/(12π²m²ε₀²c³) · ln(ω_rel/(ω̄ - ω_l))` with the
/// default relativistic cutoff.
pub fn vacuum_lamb_shift(model: &AtomModel, l: usize) -> Result<VacuumShift> {
    vacuum_lamb_shift_with_cutoff(model, l, omega_relativistic())
}

pub fn vacuum_lamb_shift_with_cutoff(model: &AtomModel, l: usize, omega_rel: f64) -> Result<VacuumShift> {
    let lv = model.level(l)?;
    if lv.psi0_sq == 0.0 {
        return Ok(VacuumShift { level: l, delta0: 0.0 });
    }
    let wb = lv.omega_bar.ok_or_else(|| Error::MissingOmegaBar(lv.label.clone()))?;
    let pref = ELEMENTARY_CHARGE.powi(4) * lv.psi0_sq
        / (12.0 * PI * PI * ELECTRON_MASS.powi(2) * VACUUM_PERMITTIVITY.powi(2) * SPEED_OF_LIGHT.powi(3));
    Ok(VacuumShift {
        level: l,
        delta0: pref * (omega_rel / (wb - lv.omega)).ln(),
    })
}

/// Coefficients `c_k` of `R_nl(r) = e^{-r/n} Σ c_k r^k` (r in Bohr radii),
/// unnormalized.
fn radial_polynomial(n: usize, l: usize) -> Vec<f64> {
    // r^l L_{n-l-1}^{2l+1}(2r/n)
    let m = n - l - 1;
    let alpha = 2 * l + 1;
    let mut c = vec![0.0; l + m + 1];
    for i in 0..=m {
        let binom = binomial(m + alpha, m - i);
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        c[l + i] = sign * binom * (2.0 / n as f64).powi(i as i32) / factorial(i);
    }
    c
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

/// `∫₀^∞ p(r) q(r) r^extra e^{-βr} dr` for polynomial coefficient lists.
fn laplace_moment(p: &[f64], q: &[f64], extra: usize, beta: f64) -> f64 {
    let mut s = 0.0;
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            let k = i + j + extra;
            s += a * b * factorial(k) / beta.powi(k as i32 + 1);
        }
    }
    s
}

/// `∫ R_nl R_n'l' r³ dr` in units of the Bohr radius (sign dropped).
pub fn hydrogen_radial_integral(n: usize, l: usize, n2: usize, l2: usize) -> f64 {
    let p = radial_polynomial(n, l);
    let q = radial_polynomial(n2, l2);
    let np = laplace_moment(&p, &p, 2, 2.0 / n as f64).sqrt();
    let nq = laplace_moment(&q, &q, 2, 2.0 / n2 as f64).sqrt();
    (laplace_moment(&p, &q, 3, 1.0 / n as f64 + 1.0 / n2 as f64) / (np * nq)).abs()
}

/// Hydrogen with shells `1..=n_max` (`2 ≤ n_max ≤ 6`), one level per `(n, l)`.
/// Line widths average over the initial and sum over the final magnetic
/// sublevels: `|r_lj|² = max(l,l')/(2l+1) · R²`. `s` levels take Bethe's
/// average excitation frequency; other levels derive `ω̄`.
pub fn hydrogen_model(n_max: usize) -> Result<AtomModel> {
    if !(2..=6).contains(&n_max) {
        return Err(Error::InvalidInput(format!("hydrogen n_max must be in 2..=6, got {n_max}")));
    }
    let ry = rydberg_angular();
    let ground = -ry;
    let mut qn = Vec::new();
    let mut levels = Vec::new();
    for n in 1..=n_max {
        for l in 0..n {
            let omega = -ry / (n * n) as f64;
            let (psi0_sq, omega_bar) = if l == 0 {
                (
                    1.0 / (PI * (n as f64).powi(3) * BOHR_RADIUS.powi(3)),
                    Some(ground + BETHE_AVERAGE_EXCITATION_RY * ry),
                )
            } else {
                (0.0, None)
            };
            levels.push(Level {
                label: format!("{n}{}", ORBITAL_LETTERS[l]),
                omega,
                psi0_sq,
                omega_bar,
            });
            qn.push((n, l));
        }
    }
    let k = levels.len();
    let mut alpha = vec![vec![0.0; k]; k];
    let coupling = ELEMENTARY_CHARGE.powi(2) / (3.0 * PI * VACUUM_PERMITTIVITY * HBAR * SPEED_OF_LIGHT.powi(3));
    for a in 0..k {
        for b in 0..k {
            let ((n1, l1), (n2, l2)) = (qn[a], qn[b]);
            if l1.abs_diff(l2) != 1 || n1 == n2 {
                continue;
            }
            let r = hydrogen_radial_integral(n1, l1, n2, l2) * BOHR_RADIUS;
            let r2 = l1.max(l2) as f64 / (2 * l1 + 1) as f64 * r * r;
            let w = levels[a].omega - levels[b].omega;
            alpha[a][b] = coupling * w * w * r2;
        }
    }
    AtomModel::new(levels, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::angular_to_mhz;

    #[test]
    fn radial_integrals_match_closed_forms() {
        // exact values from symbolic integration of the textbook R_nl
        let cases = [
            ((1, 0, 2, 1), 128.0 * 6f64.sqrt() / 243.0),
            ((2, 1, 3, 2), 165_888.0 * 5f64.sqrt() / 78_125.0),
            ((2, 0, 3, 1), 27_648.0 * 3f64.sqrt() / 15_625.0),
            ((1, 0, 3, 1), 27.0 * 6f64.sqrt() / 128.0),
            ((2, 0, 2, 1), 3.0 * 3f64.sqrt()),
        ];
        for ((n1, l1, n2, l2), want) in cases {
            let got = hydrogen_radial_integral(n1, l1, n2, l2);
            assert!((got - want).abs() < 1e-12 * want, "{n1}{l1}-{n2}{l2}: {got} vs {want}");
            assert!((hydrogen_radial_integral(n2, l2, n1, l1) - got).abs() < 1e-12 * want);
        }
    }

    #[test]
    fn lyman_alpha_width() {
        let h = hydrogen_model(3).unwrap();
        let p = h.index_of("2p").unwrap();
        let s = h.index_of("1s").unwrap();
        let w = h.levels()[p].omega - h.levels()[s].omega;
        let a = h.alpha(p, s);
        // A(2p -> 1s) = 6.2649e8 1/s
        assert!((a * w / 6.2649e8 - 1.0).abs() < 1e-3, "A = {}", a * w);
        assert!((a - 4.04e-8).abs() < 0.01e-8);
    }

    #[test]
    fn selection_rules_and_diagonal() {
        let h = hydrogen_model(4).unwrap();
        let s1 = h.index_of("1s").unwrap();
        let s2 = h.index_of("2s").unwrap();
        let p2 = h.index_of("2p").unwrap();
        assert_eq!(h.alpha(s2, s1), 0.0);
        assert_eq!(h.alpha(s2, p2), 0.0);
        for l in 0..h.n_levels() {
            assert_eq!(h.alpha(l, l), 0.0);
        }
        assert_eq!(h.alpha(h.index_of("3d").unwrap(), s1), 0.0);
    }

    #[test]
    fn sublevel_bookkeeping_is_symmetric() {
        // (2l+1) α_lj = (2l'+1) α_jl since both count all m-pairs
        let h = hydrogen_model(4).unwrap();
        let ls = |label: &str| match label.chars().last().unwrap() {
            's' => 0,
            'p' => 1,
            'd' => 2,
            _ => 3,
        };
        for a in 0..h.n_levels() {
            for b in 0..h.n_levels() {
                let la = ls(&h.levels()[a].label) as f64;
                let lb = ls(&h.levels()[b].label) as f64;
                let lhs = (2.0 * la + 1.0) * h.alpha(a, b);
                let rhs = (2.0 * lb + 1.0) * h.alpha(b, a);
                assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1e-30));
            }
        }
    }

    #[test]
    fn contact_densities() {
        let h = hydrogen_model(2).unwrap();
        let a3 = BOHR_RADIUS.powi(3);
        assert!((h.levels()[h.index_of("2s").unwrap()].psi0_sq * 8.0 * PI * a3 - 1.0).abs() < 1e-12);
        assert_eq!(h.levels()[h.index_of("2p").unwrap()].psi0_sq, 0.0);
    }

    #[test]
    fn vacuum_shift_of_2s_near_one_gigahertz() {
        let h = hydrogen_model(3).unwrap();
        let d = vacuum_lamb_shift(&h, h.index_of("2s").unwrap()).unwrap();
        let ghz = angular_to_mhz(d.delta0) / 1e3;
        assert!((ghz - 1.04).abs() < 0.104, "{ghz} GHz");
        assert_eq!(vacuum_lamb_shift(&h, h.index_of("2p").unwrap()).unwrap().delta0, 0.0);
    }

    #[test]
    fn missing_average_frequency_is_an_error() {
        let mut h = hydrogen_model(2).unwrap();
        let s2 = h.index_of("2s").unwrap();
        h.set_omega_bar(s2, None).unwrap();
        assert!(matches!(vacuum_lamb_shift(&h, s2), Err(Error::MissingOmegaBar(_))));
        assert!(h.set_omega_bar(s2, Some(h.levels()[s2].omega - 1.0)).is_err());
    }

    #[test]
    fn p_level_average_frequency_mirrors_the_downward_line() {
        let h = hydrogen_model(2).unwrap();
        let p = h.index_of("2p").unwrap();
        let s = h.index_of("1s").unwrap();
        let lv = &h.levels()[p];
        let wb = h.omega_bar(p).unwrap().unwrap();
        let w21 = lv.omega - h.levels()[s].omega;
        assert!((wb - lv.omega - w21).abs() < 1e-6 * w21);
        let v = h.virtual_channel(p).unwrap().unwrap();
        assert!((v.alpha / h.alpha(p, s) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sum_rule_approached_monotonically_from_below() {
        let limit = {
            let h = hydrogen_model(2).unwrap();
            let l = &h.levels()[h.index_of("2s").unwrap()];
            HBAR * ELEMENTARY_CHARGE.powi(2) * l.psi0_sq / (2.0 * VACUUM_PERMITTIVITY)
        };
        let mut prev = 0.0;
        for n_max in 3..=6 {
            let h = hydrogen_model(n_max).unwrap();
            let l = h.index_of("2s").unwrap();
            let wl = h.levels()[l].omega;
            let s: f64 = (0..h.n_levels())
                .map(|j| (h.levels()[j].omega - wl) * h.dipole_strength(l, j))
                .sum();
            assert!(s > prev && s < limit, "n_max {n_max}: {s} vs {limit}");
            prev = s;
        }
    }

    #[test]
    fn csv_tables_round_trip_a_two_level_atom() {
        let levels = "label,omega_j_rad_s,psi0_sq_m3,omega_bar_rad_s\ng,0.0,0.0,\ne,1.0e15,0.0,\n";
        let alpha = "level_from,level_to,alpha\ne,g,1e-7\n";
        let m = AtomModel::from_csv(levels.as_bytes(), alpha.as_bytes()).unwrap();
        assert_eq!(m.n_levels(), 2);
        assert_eq!(m.alpha(1, 0), 1e-7);
        assert_eq!(m.alpha(0, 1), 0.0);
        assert_eq!(m.real_channels(1).unwrap().len(), 1);
        assert!(m.virtual_channel(0).unwrap().is_none());
        let bad = "level_from,level_to,alpha\ne,x,1e-7\n";
        assert!(AtomModel::from_csv(levels.as_bytes(), bad.as_bytes()).is_err());
    }

    #[test]
    fn range_of_shells() {
        assert!(hydrogen_model(1).is_err());
        assert!(hydrogen_model(7).is_err());
        assert_eq!(hydrogen_model(6).unwrap().n_levels(), 21);
    }
}
