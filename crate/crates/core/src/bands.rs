//! Plane-wave solution of the Maxwell eigenproblem in the transverse H-field
//! basis.
//!
//! For every `q = k + G` the magnetic field is expanded on two unit vectors
//! orthogonal to `q`. The operator
//!
//! ```text
//! M[(G,λ),(G',λ')] = |q||q'| η(G-G') F(λ,λ')
//! ```
//!
//! is real symmetric for a centrosymmetric crystal, with eigenvalues `u²`.
//! Electric-field envelopes are rebuilt as `E = η · D` with
//! `D_G = -(|q|/u)(h₁ê₂ - h₂ê₁)`, normalized so that `Σ_G D_G·E_G = 1`,
//! i.e. `(1/V_cell)∫ ε|E|² = 1`.

use std::f64::consts::PI;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self, ComputeEigenvectors};
use faer::linalg::matmul::matmul;
use faer::diag::Diag;
use faer::{Accum, Mat, MatRef, Par};
use num_complex::Complex64;

use crate::crystal::{g_to_f64, inverse_epsilon_matrix, CrystalStructure, ReciprocalBasis};
use crate::error::{Error, Result};

/// Below this reduced frequency a mode is treated as the static (ω = 0) solution.
pub const ZERO_MODE_FREQUENCY: f64 = 1e-8;

/// Bloch wave vector in units of `2π/a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KPoint(pub [f64; 3]);

/// The fourteen reciprocal vectors bounding the Wigner-Seitz cell.
const BZ_NEIGHBOURS: [[f64; 3]; 14] = [
    [1.0, 1.0, 1.0],
    [1.0, 1.0, -1.0],
    [1.0, -1.0, 1.0],
    [1.0, -1.0, -1.0],
    [-1.0, 1.0, 1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [-1.0, -1.0, -1.0],
    [2.0, 0.0, 0.0],
    [-2.0, 0.0, 0.0],
    [0.0, 2.0, 0.0],
    [0.0, -2.0, 0.0],
    [0.0, 0.0, 2.0],
    [0.0, 0.0, -2.0],
];

impl KPoint {
    pub const GAMMA: KPoint = KPoint([0.0, 0.0, 0.0]);
    pub const X: KPoint = KPoint([0.0, 0.0, 1.0]);
    pub const L: KPoint = KPoint([0.5, 0.5, 0.5]);
    pub const W: KPoint = KPoint([0.5, 0.0, 1.0]);
    pub const K: KPoint = KPoint([0.75, 0.75, 0.0]);

    /// Translates `k` by reciprocal lattice vectors into the first Brillouin
    /// zone. Points on the zone boundary are left where they are.
    pub fn fold_to_bz(self) -> KPoint {
        let mut k = self.0;
        loop {
            let norm = dot(k, k);
            let mut best = None;
            let mut best_norm = norm - 1e-12;
            for g in &BZ_NEIGHBOURS {
                let c = [k[0] - g[0], k[1] - g[1], k[2] - g[2]];
                let n = dot(c, c);
                if n < best_norm {
                    best_norm = n;
                    best = Some(c);
                }
            }
            match best {
                Some(c) => k = c,
                None => return KPoint(k),
            }
        }
    }

    pub fn neg(self) -> KPoint {
        KPoint([-self.0[0], -self.0[1], -self.0[2]])
    }
}

/// Transverse unit vectors for one `q = k + G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationFrame {
    pub e1: [f64; 3],
    pub e2: [f64; 3],
}

impl PolarizationFrame {
    /// `ê₁ = ẑ×q/|ẑ×q|` (or `x̂` when `q ∥ ẑ`), `ê₂ = q×ê₁/|q×ê₁|`. For `q = 0`
    /// the frame is `(x̂, ŷ)`.
    pub fn new(q: [f64; 3]) -> Self {
        let zq = cross([0.0, 0.0, 1.0], q);
        let e1 = if norm(zq) < 1e-12 {
            [1.0, 0.0, 0.0]
        } else {
            scale(zq, 1.0 / norm(zq))
        };
        let qe = cross(q, e1);
        let e2 = if norm(qe) < 1e-12 {
            [0.0, 1.0, 0.0]
        } else {
            scale(qe, 1.0 / norm(qe))
        };
        Self { e1, e2 }
    }
}

/// How many of the lowest bands to keep from a dense solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandSelection {
    Lowest(usize),
    /// All bands with `u <= limit`.
    Below(f64),
    All,
}

/// Modes at one k-point: frequencies, group velocities and electric-field
/// envelopes at the requested positions.
#[derive(Debug, Clone)]
pub struct KSolution {
    pub k: KPoint,
    /// Reduced frequencies, ascending.
    pub frequencies: Vec<f64>,
    /// `∂u/∂k` in units of `c`.
    pub group_velocities: Vec<[f64; 3]>,
    /// Periodic envelopes, indexed `band * n_positions + position`.
    pub envelopes: Vec<[Complex64; 3]>,
    pub n_positions: usize,
    /// Largest eigenfrequency of the truncated operator at this k.
    pub highest_frequency: f64,
}

impl KSolution {
    pub fn n_bands(&self) -> usize {
        self.frequencies.len()
    }

    pub fn envelope(&self, band: usize, position: usize) -> [Complex64; 3] {
        self.envelopes[band * self.n_positions + position]
    }

    pub fn intensity(&self, band: usize, position: usize) -> f64 {
        self.envelope(band, position).iter().map(|z| z.norm_sqr()).sum()
    }
}

/// A set of solved k-points.
#[derive(Debug, Clone, Default)]
pub struct EigenModeSet {
    pub positions: Vec<[f64; 3]>,
    pub solutions: Vec<KSolution>,
}

/// Plane-wave coefficients of the fields of a set of modes at one k.
#[derive(Debug, Clone)]
pub struct ModeFields {
    pub k: KPoint,
    pub frequencies: Vec<f64>,
    /// `E_G` components, rows = G index, column `3·band + component`.
    pub electric: Mat<f64>,
    /// `D_G` components, same layout.
    pub displacement: Mat<f64>,
    /// `H_G` components, same layout.
    pub magnetic: Mat<f64>,
}

impl ModeFields {
    pub fn n_bands(&self) -> usize {
        self.frequencies.len()
    }

    /// Energy flux over energy density, `Σ_G E_G × H_G`.
    pub fn group_velocity(&self, band: usize) -> [f64; 3] {
        let mut v = [0.0; 3];
        if self.frequencies[band] < ZERO_MODE_FREQUENCY {
            return v;
        }
        for row in 0..self.electric.nrows() {
            let e = self.vector(&self.electric, row, band);
            let h = self.vector(&self.magnetic, row, band);
            let c = cross(e, h);
            for i in 0..3 {
                v[i] += c[i];
            }
        }
        v
    }

    fn vector(&self, m: &Mat<f64>, row: usize, band: usize) -> [f64; 3] {
        [m[(row, 3 * band)], m[(row, 3 * band + 1)], m[(row, 3 * band + 2)]]
    }

    /// Envelope `u(r) = Σ_G E_G e^{2πi G·r}` of one band.
    pub fn envelope_at(&self, basis: &ReciprocalBasis, band: usize, r: [f64; 3]) -> [Complex64; 3] {
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for (row, g) in basis.g_vectors().iter().enumerate() {
            let phase = 2.0 * PI * dot(g_to_f64(*g), r);
            let p = Complex64::from_polar(1.0, phase);
            let e = self.vector(&self.electric, row, band);
            for i in 0..3 {
                out[i] += p * e[i];
            }
        }
        out
    }

    /// `Σ_G D_G·E_G`, the cell-averaged `ε|E|²` in the truncated basis.
    pub fn plane_wave_norm(&self, band: usize) -> f64 {
        (0..self.electric.nrows())
            .map(|row| {
                dot(
                    self.vector(&self.displacement, row, band),
                    self.vector(&self.electric, row, band),
                )
            })
            .sum()
    }

    /// Cell average of `ε(r)|u(r)|²` on an `n³` grid over the conventional
    /// cubic cell, using the geometric permittivity.
    pub fn normalization_on_grid(
        &self,
        structure: &CrystalStructure,
        basis: &ReciprocalBasis,
        band: usize,
        n: usize,
    ) -> f64 {
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    let r = [i as f64 / n as f64, j as f64 / n as f64, l as f64 / n as f64];
                    let u = self.envelope_at(basis, band, r);
                    let w: f64 = u.iter().map(|z| z.norm_sqr()).sum();
                    acc += structure.epsilon_at(r) * w;
                }
            }
        }
        acc / (n * n * n) as f64
    }
}

/// Dense plane-wave solver for one crystal and one basis.
#[derive(Debug, Clone)]
pub struct PlaneWaveSolver {
    structure: CrystalStructure,
    basis: ReciprocalBasis,
    eta: Mat<f64>,
}

impl PlaneWaveSolver {
    pub fn new(structure: &CrystalStructure, basis: ReciprocalBasis) -> Result<Self> {
        structure.validate()?;
        let eta = inverse_epsilon_matrix(structure, &basis)?;
        Ok(Self {
            structure: *structure,
            basis,
            eta,
        })
    }

    pub fn structure(&self) -> &CrystalStructure {
        &self.structure
    }

    pub fn basis(&self) -> &ReciprocalBasis {
        &self.basis
    }

    pub fn inverse_epsilon(&self) -> MatRef<'_, f64> {
        self.eta.as_ref()
    }

    /// Operator dimension `2N`.
    pub fn dim(&self) -> usize {
        2 * self.basis.len()
    }

    fn wave_vectors(&self, k: KPoint) -> Vec<([f64; 3], f64, PolarizationFrame)> {
        self.basis
            .g_vectors()
            .iter()
            .map(|g| {
                let gf = g_to_f64(*g);
                let q = [k.0[0] + gf[0], k.0[1] + gf[1], k.0[2] + gf[2]];
                (q, norm(q), PolarizationFrame::new(q))
            })
            .collect()
    }

    /// The `2N × 2N` Maxwell operator at `k`; eigenvalues are `u²`.
    pub fn assemble(&self, k: KPoint) -> Mat<f64> {
        let qs = self.wave_vectors(k);
        let n = qs.len();
        let mut m = Mat::<f64>::zeros(2 * n, 2 * n);
        for j in 0..n {
            let (_, qj, fj) = &qs[j];
            for i in j..n {
                let (_, qi, fi) = &qs[i];
                let c = qi * qj * self.eta[(i, j)];
                if c == 0.0 {
                    continue;
                }
                let block = [
                    [dot(fi.e2, fj.e2), -dot(fi.e2, fj.e1)],
                    [-dot(fi.e1, fj.e2), dot(fi.e1, fj.e1)],
                ];
                for a in 0..2 {
                    for b in 0..2 {
                        let v = c * block[a][b];
                        m[(2 * i + a, 2 * j + b)] = v;
                        m[(2 * j + b, 2 * i + a)] = v;
                    }
                }
            }
        }
        m
    }

    fn eigen(&self, k: KPoint, vectors: bool) -> Result<(Vec<f64>, Option<Mat<f64>>)> {
        if self.structure.is_homogeneous() {
            return Ok(self.eigen_homogeneous(k, vectors));
        }
        self.eigen_dense(k, vectors)
    }

    fn eigen_dense(&self, k: KPoint, vectors: bool) -> Result<(Vec<f64>, Option<Mat<f64>>)> {
        let m = self.assemble(k);
        let n = m.nrows();
        let mut s = Diag::<f64>::zeros(n);
        let mut u = if vectors { Some(Mat::<f64>::zeros(n, n)) } else { None };
        let compute = if vectors {
            ComputeEigenvectors::Yes
        } else {
            ComputeEigenvectors::No
        };
        let par = Par::Seq;
        let mut buf = MemBuffer::new(evd::self_adjoint_evd_scratch::<f64>(
            n,
            compute,
            par,
            Default::default(),
        ));
        evd::self_adjoint_evd(
            m.as_ref(),
            s.as_mut(),
            u.as_mut().map(|u| u.as_mut()),
            par,
            MemStack::new(&mut buf),
            Default::default(),
        )
        .map_err(|_| Error::EigenSolver { k: k.0, size: n })?;
        let values = (0..n).map(|i| s[i]).collect();
        Ok((values, u))
    }

    /// The operator is diagonal in a uniform medium, `u² = |q|²/ε`.
    fn eigen_homogeneous(&self, k: KPoint, vectors: bool) -> (Vec<f64>, Option<Mat<f64>>) {
        let eta = self.eta[(0, 0)];
        let diag: Vec<f64> = self
            .wave_vectors(k)
            .iter()
            .flat_map(|(_, q, _)| [q * q * eta, q * q * eta])
            .collect();
        let mut order: Vec<usize> = (0..diag.len()).collect();
        order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]));
        let values = order.iter().map(|&i| diag[i]).collect();
        let u = vectors.then(|| {
            let mut u = Mat::<f64>::zeros(diag.len(), diag.len());
            for (col, &row) in order.iter().enumerate() {
                u[(row, col)] = 1.0;
            }
            u
        });
        (values, u)
    }

    /// All reduced eigenfrequencies at `k`, ascending.
    pub fn frequencies(&self, k: KPoint) -> Result<Vec<f64>> {
        let (values, _) = self.eigen(k, false)?;
        Ok(values.into_iter().map(|l| l.max(0.0).sqrt()).collect())
    }

    /// Like [`frequencies`](Self::frequencies) but always through the dense
    /// eigensolver, also for a uniform medium.
    pub fn frequencies_dense(&self, k: KPoint) -> Result<Vec<f64>> {
        let (values, _) = self.eigen_dense(k, false)?;
        Ok(values.into_iter().map(|l| l.max(0.0).sqrt()).collect())
    }

    /// Solves at `k` and returns the plane-wave fields of the selected bands
    /// together with the largest eigenfrequency of the operator.
    pub fn mode_fields(&self, k: KPoint, selection: BandSelection) -> Result<(ModeFields, f64)> {
        let (values, vectors) = self.eigen(k, true)?;
        let vectors = vectors.expect("eigenvectors requested");
        let freqs: Vec<f64> = values.iter().map(|l| l.max(0.0).sqrt()).collect();
        let highest = freqs.last().copied().unwrap_or(0.0);
        let nb = match selection {
            BandSelection::Lowest(n) => n.min(freqs.len()),
            BandSelection::Below(limit) => freqs.iter().take_while(|&&u| u <= limit).count(),
            BandSelection::All => freqs.len(),
        };
        let qs = self.wave_vectors(k);
        let ng = qs.len();
        let mut d = Mat::<f64>::zeros(ng, 3 * nb);
        let mut h = Mat::<f64>::zeros(ng, 3 * nb);
        for b in 0..nb {
            let u = freqs[b];
            for (row, (_, qn, frame)) in qs.iter().enumerate() {
                let h1 = vectors[(2 * row, b)];
                let h2 = vectors[(2 * row + 1, b)];
                for c in 0..3 {
                    h[(row, 3 * b + c)] = h1 * frame.e1[c] + h2 * frame.e2[c];
                }
                if u >= ZERO_MODE_FREQUENCY {
                    let s = -qn / u;
                    for c in 0..3 {
                        d[(row, 3 * b + c)] = s * (h1 * frame.e2[c] - h2 * frame.e1[c]);
                    }
                }
            }
        }
        let mut e = Mat::<f64>::zeros(ng, 3 * nb);
        matmul(e.as_mut(), Accum::Replace, self.eta.as_ref(), d.as_ref(), 1.0, Par::Seq);
        Ok((
            ModeFields {
                k,
                frequencies: freqs[..nb].to_vec(),
                electric: e,
                displacement: d,
                magnetic: h,
            },
            highest,
        ))
    }

    /// Lowest modes at `k` with envelopes evaluated at reduced `positions` by
    /// direct Fourier summation.
    pub fn solve_k(
        &self,
        k: KPoint,
        selection: BandSelection,
        positions: &[[f64; 3]],
    ) -> Result<KSolution> {
        let (fields, highest) = self.mode_fields(k, selection)?;
        let nb = fields.n_bands();
        let np = positions.len();
        let ng = self.basis.len();
        let cos = Mat::<f64>::from_fn(np, ng, |p, g| {
            (2.0 * PI * dot(g_to_f64(self.basis.g_vectors()[g]), positions[p])).cos()
        });
        let sin = Mat::<f64>::from_fn(np, ng, |p, g| {
            (2.0 * PI * dot(g_to_f64(self.basis.g_vectors()[g]), positions[p])).sin()
        });
        let mut re = Mat::<f64>::zeros(np, 3 * nb);
        let mut im = Mat::<f64>::zeros(np, 3 * nb);
        matmul(re.as_mut(), Accum::Replace, cos.as_ref(), fields.electric.as_ref(), 1.0, Par::Seq);
        matmul(im.as_mut(), Accum::Replace, sin.as_ref(), fields.electric.as_ref(), 1.0, Par::Seq);
        let mut envelopes = Vec::with_capacity(nb * np);
        for b in 0..nb {
            for p in 0..np {
                envelopes.push([0, 1, 2].map(|c| Complex64::new(re[(p, 3 * b + c)], im[(p, 3 * b + c)])));
            }
        }
        let group_velocities = (0..nb).map(|b| fields.group_velocity(b)).collect();
        Ok(KSolution {
            k,
            frequencies: fields.frequencies,
            group_velocities,
            envelopes,
            n_positions: np,
            highest_frequency: highest,
        })
    }
}

/// The 48 proper and improper rotations of the cube, as signed axis
/// permutations `(perm, signs)`: `(Sk)_i = signs[i] · k[perm[i]]`.
pub fn cubic_point_group() -> Vec<([usize; 3], [f64; 3])> {
    const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut ops = Vec::with_capacity(48);
    for perm in PERMS {
        for bits in 0..8u8 {
            let signs = [0, 1, 2].map(|i| if bits >> i & 1 == 1 { -1.0 } else { 1.0 });
            ops.push((perm, signs));
        }
    }
    ops
}

pub fn apply_point_op(op: &([usize; 3], [f64; 3]), v: [f64; 3]) -> [f64; 3] {
    let (perm, signs) = op;
    [0, 1, 2].map(|i| signs[i] * v[perm[i]])
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}
