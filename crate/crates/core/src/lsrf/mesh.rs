use crate::bands::{apply_point_op, cubic_point_group, KPoint};
use crate::crystal::{BZ_VOLUME, PRIMITIVE_VECTORS, RECIPROCAL_VECTORS};
use crate::error::{Error, Result};

/// Γ-centred uniform mesh `k = Σ mᵢ bᵢ / nᵢ`, each point folded into the
/// first Brillouin zone. Every point carries the weight `V_BZ / N`.
#[derive(Debug, Clone)]
pub struct BZMesh {
    dims: [usize; 3],
    points: Vec<KPoint>,
}

impl BZMesh {
    pub fn new(dims: [usize; 3]) -> Result<Self> {
        if dims.iter().any(|&n| n == 0) {
            return Err(Error::InvalidInput(format!("mesh dimensions must be positive, got {dims:?}")));
        }
        let mut points = Vec::with_capacity(dims.iter().product());
        for m0 in 0..dims[0] {
            for m1 in 0..dims[1] {
                for m2 in 0..dims[2] {
                    points.push(Self::point_at(dims, [m0, m1, m2]));
                }
            }
        }
        Ok(Self { dims, points })
    }

    pub fn cubic(n: usize) -> Result<Self> {
        Self::new([n, n, n])
    }

    fn point_at(dims: [usize; 3], m: [usize; 3]) -> KPoint {
        let mut k = [0.0; 3];
        for i in 0..3 {
            let f = m[i] as f64 / dims[i] as f64;
            for c in 0..3 {
                k[c] += f * RECIPROCAL_VECTORS[i][c];
            }
        }
        KPoint(k).fold_to_bz()
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[KPoint] {
        &self.points
    }

    pub fn weight(&self) -> f64 {
        BZ_VOLUME / self.points.len() as f64
    }

    /// Edge vectors `bᵢ/nᵢ` of the parallelepiped cell owned by each point.
    pub fn cell_vectors(&self) -> [[f64; 3]; 3] {
        [0, 1, 2].map(|i| RECIPROCAL_VECTORS[i].map(|c| c / self.dims[i] as f64))
    }

    /// Mesh index of an arbitrary wave vector, if it lies on the mesh
    /// (modulo reciprocal lattice vectors).
    pub fn index_of(&self, k: KPoint) -> Option<usize> {
        let mut m = [0usize; 3];
        for i in 0..3 {
            let a = PRIMITIVE_VECTORS[i];
            let f = (a[0] * k.0[0] + a[1] * k.0[1] + a[2] * k.0[2]) * self.dims[i] as f64;
            let r = f.round();
            if (f - r).abs() > 1e-8 {
                return None;
            }
            m[i] = (r as i64).rem_euclid(self.dims[i] as i64) as usize;
        }
        Some((m[0] * self.dims[1] + m[1]) * self.dims[2] + m[2])
    }

    /// Pairs every point with its time-reversal partner `-k`. Returns the
    /// lower index of each pair with multiplicity 2 (1 for self-partners),
    /// in ascending index order.
    pub fn time_reversal_representatives(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.len() / 2 + 8);
        for (i, k) in self.points.iter().enumerate() {
            let j = self.index_of(k.neg()).expect("mesh is closed under inversion");
            if j == i {
                out.push((i, 1));
            } else if i < j {
                out.push((i, 2));
            }
        }
        out
    }

    /// One representative per cubic-point-group orbit (with orbit size), for
    /// quantities such as band frequencies that are invariant under O_h.
    /// Falls back to time-reversal pairing when the mesh is not cubic.
    pub fn irreducible_representatives(&self) -> Vec<(usize, usize)> {
        if !(self.dims[0] == self.dims[1] && self.dims[1] == self.dims[2]) {
            return self.time_reversal_representatives();
        }
        let ops = cubic_point_group();
        let mut owner = vec![usize::MAX; self.len()];
        let mut out = Vec::new();
        for i in 0..self.len() {
            if owner[i] != usize::MAX {
                continue;
            }
            let mut size = 0;
            for op in &ops {
                let j = self
                    .index_of(KPoint(apply_point_op(op, self.points[i].0)))
                    .expect("cubic mesh is invariant under the point group");
                if owner[j] == usize::MAX {
                    owner[j] = i;
                    size += 1;
                }
            }
            out.push((i, size));
        }
        out
    }
}
