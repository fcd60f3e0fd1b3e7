//! Inverse-opal geometry on the fcc lattice and its Fourier representation.
//!
//! Spheres of permittivity `eps_sphere` sit on the fcc lattice sites inside a
//! backbone of permittivity `eps_background`. Reciprocal lattice vectors are
//! stored as integer Cartesian triples in units of `2π/a`; for the fcc lattice
//! these are the triples whose components are all even or all odd.

use std::f64::consts::PI;

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Filling fraction at which neighbouring spheres touch, `π/(3√2)`.
pub const CLOSE_PACKED_FILLING: f64 = 0.740_480_489_693_061;

/// Volume of the first Brillouin zone in units of `(2π/a)³`.
pub const BZ_VOLUME: f64 = 4.0;

/// Primitive fcc lattice vectors in units of `a`.
pub const PRIMITIVE_VECTORS: [[f64; 3]; 3] = [[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]];

/// Primitive reciprocal vectors in units of `2π/a`.
pub const RECIPROCAL_VECTORS: [[f64; 3]; 3] =
    [[-1.0, 1.0, 1.0], [1.0, -1.0, 1.0], [1.0, 1.0, -1.0]];

/// Basis sites of the conventional cubic cell.
const CUBIC_SITES: [[f64; 3]; 4] = [
    [0.0, 0.0, 0.0],
    [0.0, 0.5, 0.5],
    [0.5, 0.0, 0.5],
    [0.5, 0.5, 0.0],
];

pub type GVector = [i32; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrystalStructure {
    /// Lattice constant of the conventional cubic cell, metres.
    pub lattice_constant: f64,
    pub eps_sphere: f64,
    pub eps_background: f64,
    pub filling_fraction: f64,
}

impl CrystalStructure {
    pub fn new(
        lattice_constant: f64,
        eps_sphere: f64,
        eps_background: f64,
        filling_fraction: f64,
    ) -> Result<Self> {
        let s = Self {
            lattice_constant,
            eps_sphere,
            eps_background,
            filling_fraction,
        };
        s.validate()?;
        Ok(s)
    }

    /// Air spheres in a backbone of refractive index `index`.
    pub fn inverse_opal(lattice_constant: f64, index: f64, filling_fraction: f64) -> Result<Self> {
        Self::new(lattice_constant, 1.0, index * index, filling_fraction)
    }

    /// Uniform medium (no dielectric contrast).
    pub fn homogeneous(lattice_constant: f64, eps: f64) -> Result<Self> {
        Self::new(lattice_constant, eps, eps, 0.5)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lattice_constant.is_finite() && self.lattice_constant > 0.0) {
            return Err(Error::InvalidStructure(format!(
                "lattice constant must be positive, got {}",
                self.lattice_constant
            )));
        }
        if !(self.eps_sphere >= 1.0 && self.eps_background >= 1.0) {
            return Err(Error::InvalidStructure(format!(
                "permittivities must be >= 1, got sphere {} and background {}",
                self.eps_sphere, self.eps_background
            )));
        }
        let f = self.filling_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::InvalidStructure(format!(
                "filling fraction must lie in (0, 1), got {f}"
            )));
        }
        if f > CLOSE_PACKED_FILLING + 1e-9 {
            return Err(Error::InvalidStructure(format!(
                "filling fraction {f} exceeds close packing {CLOSE_PACKED_FILLING:.6}; overlapping spheres are not supported"
            )));
        }
        Ok(())
    }

    /// Sphere radius in units of `a` (one sphere per primitive cell of volume `a³/4`).
    pub fn sphere_radius(&self) -> f64 {
        (3.0 * self.filling_fraction / (16.0 * PI)).cbrt()
    }

    pub fn contrast(&self) -> f64 {
        self.eps_sphere - self.eps_background
    }

    pub fn is_homogeneous(&self) -> bool {
        self.contrast() == 0.0
    }

    pub fn mean_epsilon(&self) -> f64 {
        self.eps_background + self.filling_fraction * self.contrast()
    }

    /// Fourier coefficient `ε(G)` of the permittivity, real because the
    /// structure is centrosymmetric.
    pub fn epsilon_fourier(&self, g: GVector) -> f64 {
        if g == [0, 0, 0] {
            return self.mean_epsilon();
        }
        let x = 2.0 * PI * g_norm(g) * self.sphere_radius();
        let form = (x.sin() - x * x.cos()) / (x * x * x);
        self.contrast() * 3.0 * self.filling_fraction * form
    }

    /// Whether the reduced position `r` lies inside one of the spheres.
    pub fn in_sphere(&self, r: [f64; 3]) -> bool {
        let radius = self.sphere_radius();
        CUBIC_SITES.iter().any(|site| {
            let d2: f64 = (0..3)
                .map(|i| {
                    let d = r[i] - site[i];
                    let d = d - d.round();
                    d * d
                })
                .sum();
            d2 < radius * radius
        })
    }

    /// Real-space permittivity at the reduced position `r`.
    pub fn epsilon_at(&self, r: [f64; 3]) -> f64 {
        if self.in_sphere(r) {
            self.eps_sphere
        } else {
            self.eps_background
        }
    }
}

pub fn g_norm_sq(g: GVector) -> i32 {
    g[0] * g[0] + g[1] * g[1] + g[2] * g[2]
}

pub fn g_norm(g: GVector) -> f64 {
    (g_norm_sq(g) as f64).sqrt()
}

pub fn g_to_f64(g: GVector) -> [f64; 3] {
    [g[0] as f64, g[1] as f64, g[2] as f64]
}

fn is_fcc_reciprocal(g: GVector) -> bool {
    let parity = g[0].rem_euclid(2);
    g[1].rem_euclid(2) == parity && g[2].rem_euclid(2) == parity
}

/// Truncated set of reciprocal lattice vectors `|G| <= cutoff` (units of `2π/a`).
#[derive(Debug, Clone, PartialEq)]
pub struct ReciprocalBasis {
    cutoff: f64,
    g_vectors: Vec<GVector>,
}

impl ReciprocalBasis {
    pub fn new(cutoff: f64) -> Result<Self> {
        if !(cutoff.is_finite() && cutoff >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "plane-wave cutoff must be nonnegative, got {cutoff}"
            )));
        }
        let limit = cutoff.floor() as i32;
        let max_sq = cutoff * cutoff + 1e-9;
        let mut g_vectors = Vec::new();
        for h in -limit..=limit {
            for k in -limit..=limit {
                for l in -limit..=limit {
                    let g = [h, k, l];
                    if is_fcc_reciprocal(g) && (g_norm_sq(g) as f64) <= max_sq {
                        g_vectors.push(g);
                    }
                }
            }
        }
        g_vectors.sort_by(|a, b| g_norm_sq(*a).cmp(&g_norm_sq(*b)).then(a.cmp(b)));
        Ok(Self { cutoff, g_vectors })
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn g_vectors(&self) -> &[GVector] {
        &self.g_vectors
    }

    pub fn len(&self) -> usize {
        self.g_vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g_vectors.is_empty()
    }

    pub fn index_of(&self, g: GVector) -> Option<usize> {
        self.g_vectors.iter().position(|&x| x == g)
    }
}

/// Matrix `ε(G - G')` over the truncated basis.
pub fn epsilon_matrix(structure: &CrystalStructure, basis: &ReciprocalBasis) -> Mat<f64> {
    let gs = basis.g_vectors();
    let n = gs.len();
    let mut cache = std::collections::HashMap::new();
    Mat::from_fn(n, n, |i, j| {
        let d = [gs[i][0] - gs[j][0], gs[i][1] - gs[j][1], gs[i][2] - gs[j][2]];
        *cache
            .entry(d)
            .or_insert_with(|| structure.epsilon_fourier(d))
    })
}

/// Fourier matrix `η(G - G')` of `1/ε`, obtained by inverting the truncated
/// `ε(G - G')` matrix.
pub fn inverse_epsilon_matrix(
    structure: &CrystalStructure,
    basis: &ReciprocalBasis,
) -> Result<Mat<f64>> {
    if basis.is_empty() {
        return Err(Error::InvalidInput("empty plane-wave basis".into()));
    }
    let n = basis.len();
    if structure.is_homogeneous() {
        let inv = 1.0 / structure.eps_background;
        return Ok(Mat::from_fn(n, n, |i, j| if i == j { inv } else { 0.0 }));
    }
    let eps = epsilon_matrix(structure, basis);
    let llt = eps
        .llt(Side::Lower)
        .map_err(|_| Error::SingularPermittivity { size: n })?;
    let mut inv = llt.inverse();
    // symmetrize away rounding noise
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (inv[(i, j)] + inv[(j, i)]);
            inv[(i, j)] = v;
            inv[(j, i)] = v;
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn opal() -> CrystalStructure {
        CrystalStructure::inverse_opal(1e-7, 3.6, 0.74).unwrap()
    }

    #[test]
    fn mean_permittivity_of_opal() {
        assert_relative_eq!(opal().epsilon_fourier([0, 0, 0]), 4.1096, epsilon = 1e-12);
    }

    #[test]
    fn no_contrast_no_fourier_components() {
        let s = CrystalStructure::new(1e-7, 2.5, 2.5, 0.3).unwrap();
        assert_eq!(s.epsilon_fourier([1, 1, 1]), 0.0);
        assert_eq!(s.epsilon_fourier([2, 0, 0]), 0.0);
    }

    #[test]
    fn close_packed_radius_touches() {
        let s = CrystalStructure::inverse_opal(1e-7, 3.6, CLOSE_PACKED_FILLING).unwrap();
        assert_relative_eq!(s.sphere_radius(), 1.0 / (2.0 * 2f64.sqrt()), epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_structures() {
        assert!(CrystalStructure::new(1e-7, 0.5, 12.96, 0.74).is_err());
        assert!(CrystalStructure::new(1e-7, 1.0, 12.96, -0.1).is_err());
        assert!(CrystalStructure::new(1e-7, 1.0, 12.96, 0.75).is_err());
        assert!(CrystalStructure::new(-1.0, 1.0, 12.96, 0.5).is_err());
    }

    #[test]
    fn shell_counts() {
        assert_eq!(ReciprocalBasis::new(0.0).unwrap().len(), 1);
        assert_eq!(ReciprocalBasis::new(2.0).unwrap().len(), 15);
        assert_eq!(ReciprocalBasis::new(32f64.sqrt()).unwrap().len(), 181);
        assert_eq!(ReciprocalBasis::new(7.0).unwrap().len(), 339);
    }

    #[test]
    fn basis_closed_under_negation_and_ordered() {
        let b = ReciprocalBasis::new(5.0).unwrap();
        assert_eq!(b.g_vectors()[0], [0, 0, 0]);
        for g in b.g_vectors() {
            assert!(b.index_of([-g[0], -g[1], -g[2]]).is_some());
        }
        for w in b.g_vectors().windows(2) {
            assert!(g_norm_sq(w[0]) <= g_norm_sq(w[1]));
        }
    }

    #[test]
    fn homogeneous_inverse_is_scaled_identity() {
        let s = CrystalStructure::homogeneous(1e-7, 2.0).unwrap();
        let b = ReciprocalBasis::new(3.0).unwrap();
        let eta = inverse_epsilon_matrix(&s, &b).unwrap();
        for i in 0..b.len() {
            for j in 0..b.len() {
                let want = if i == j { 0.5 } else { 0.0 };
                assert_eq!(eta[(i, j)], want);
            }
        }
    }

    #[test]
    fn inverse_is_symmetric_and_inverts() {
        let s = opal();
        let b = ReciprocalBasis::new(3.0).unwrap();
        let eps = epsilon_matrix(&s, &b);
        let eta = inverse_epsilon_matrix(&s, &b).unwrap();
        let prod = &eps * &eta;
        for i in 0..b.len() {
            for j in 0..b.len() {
                assert_eq!(eta[(i, j)], eta[(j, i)]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn in_sphere_predicate() {
        let s = opal();
        assert!(s.in_sphere([0.0, 0.0, 0.0]));
        assert!(s.in_sphere([0.34, 0.0, 0.0]));
        assert!(s.in_sphere([0.24, 0.24, 0.0]));
        assert!(s.in_sphere([0.5, 0.5, 0.0]));
        assert!(s.in_sphere([1.0, 1.5, 0.5]));
        // tetrahedral interstitial of the fcc lattice
        assert!(!s.in_sphere([0.25, 0.25, 0.25]));
        assert_eq!(s.epsilon_at([0.25, 0.25, 0.25]), 12.96);
    }
}
