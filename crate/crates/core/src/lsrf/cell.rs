//! Spreading one mesh cell's band frequency over the frequency bins.
//!
//! The cell around a mesh point is cut into `S³` sub-cells. In each sub-cell
//! the band is extrapolated from the cell centre to second order,
//! `u ≈ u₀ + v·δ + ½δᵀHδ`, with the curvature of a free-photon cone
//! `H = (|v|²/u₀)(1 - v̂v̂ᵀ)`, and then taken as linear across the sub-cell.
//! The frequency of a linear function over a parallelepiped is distributed as
//! a sum of independent uniforms (a box spline), whose CDF is integrated
//! exactly per bin.

use super::FrequencyGrid;
use crate::bands::dot;

/// Widths below this fraction of the largest are treated as zero.
const WIDTH_FLOOR: f64 = 1e-6;

/// Appends `(bin, mass)` pairs for one band at one mesh point. The masses sum
/// to one except for what falls outside the grid.
pub fn spread_cell(
    u0: f64,
    v: [f64; 3],
    cell: &[[f64; 3]; 3],
    subcells: usize,
    grid: &FrequencyGrid,
    out: &mut Vec<(usize, f64)>,
) {
    let s = subcells.max(1);
    let vv = dot(v, v);
    let curvature = if u0 > 0.0 && vv > 0.0 { vv / u0 } else { 0.0 };
    let sub_mass = 1.0 / (s * s * s) as f64;
    for i in 0..s {
        for j in 0..s {
            for l in 0..s {
                let t = [i, j, l].map(|n| (n as f64 + 0.5) / s as f64 - 0.5);
                let delta = [0, 1, 2].map(|c| t[0] * cell[0][c] + t[1] * cell[1][c] + t[2] * cell[2][c]);
                // H·δ for H = κ(1 - v̂v̂ᵀ)
                let hd = if curvature > 0.0 {
                    let p = dot(v, delta) / vv;
                    [0, 1, 2].map(|c| curvature * (delta[c] - p * v[c]))
                } else {
                    [0.0; 3]
                };
                let us = u0 + dot(v, delta) + 0.5 * dot(delta, hd);
                let vs = [0, 1, 2].map(|c| v[c] + hd[c]);
                let widths = [0, 1, 2].map(|c| dot(vs, cell[c]).abs() / s as f64);
                spread_box(us, widths, sub_mass, grid, out);
            }
        }
    }
}

/// Distributes `mass` with the density of `centre + Σ wᵢ(τᵢ - ½)`,
/// `τᵢ ~ U(0,1)`, over the grid bins.
pub fn spread_box(centre: f64, widths: [f64; 3], mass: f64, grid: &FrequencyGrid, out: &mut Vec<(usize, f64)>) {
    let wmax = widths.iter().cloned().fold(0.0, f64::max);
    let mut w = [0.0; 3];
    let mut d = 0;
    for &x in &widths {
        if x > WIDTH_FLOOR * wmax && x > 0.0 {
            w[d] = x;
            d += 1;
        }
    }
    let w = &w[..d];
    let total: f64 = w.iter().sum();
    let lo = centre - 0.5 * total;
    let hi = centre + 0.5 * total;
    if d == 0 {
        if let Some(b) = grid.bin_of(centre) {
            out.push((b, mass));
        }
        return;
    }
    let Some((first, last)) = grid.bin_range(lo, hi) else {
        return;
    };
    let mut prev = box_cdf(grid.bin_lower(first) - lo, w);
    for b in first..=last {
        let next = box_cdf(grid.bin_upper(b) - lo, w);
        let m = (next - prev) * mass;
        if m > 0.0 {
            out.push((b, m));
        }
        prev = next;
    }
}

/// CDF of a sum of uniforms on `[0, wᵢ]`, evaluated at `y`.
fn box_cdf(y: f64, w: &[f64]) -> f64 {
    let total: f64 = w.iter().sum();
    if y <= 0.0 {
        return 0.0;
    }
    if y >= total {
        return 1.0;
    }
    let d = w.len() as i32;
    let norm: f64 = w.iter().product::<f64>() * (1..=d).product::<i32>() as f64;
    let mut acc = 0.0;
    for subset in 0..(1u32 << d) {
        let mut shift = 0.0;
        for (i, wi) in w.iter().enumerate() {
            if subset >> i & 1 == 1 {
                shift += wi;
            }
        }
        let x = y - shift;
        if x > 0.0 {
            let sign = if subset.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * x.powi(d);
        }
    }
    (acc / norm).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_uniform_cdf_is_linear() {
        assert!((box_cdf(0.25, &[1.0]) - 0.25).abs() < 1e-15);
        assert_eq!(box_cdf(-1.0, &[1.0]), 0.0);
        assert_eq!(box_cdf(2.0, &[1.0]), 1.0);
    }

    #[test]
    fn two_uniforms_make_a_triangle() {
        // sum of two U(0,1): CDF(1) = 1/2, CDF(0.5) = 1/8
        assert!((box_cdf(1.0, &[1.0, 1.0]) - 0.5).abs() < 1e-15);
        assert!((box_cdf(0.5, &[1.0, 1.0]) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn three_uniforms_median() {
        assert!((box_cdf(1.5, &[1.0, 1.0, 1.0]) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn flat_band_lands_in_one_bin() {
        let grid = FrequencyGrid::new(0.01, 100).unwrap();
        let mut out = Vec::new();
        let cell = [[0.1, 0.0, 0.0], [0.0, 0.1, 0.0], [0.0, 0.0, 0.1]];
        spread_cell(0.503, [0.0; 3], &cell, 2, &grid, &mut out);
        let total: f64 = out.iter().map(|x| x.1).sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert!(out.iter().all(|&(b, _)| b == grid.bin_of(0.503).unwrap()));
    }

    proptest! {
        #[test]
        fn mass_is_conserved_and_positive(
            u0 in 0.3f64..0.7,
            v in prop::array::uniform3(-1.0f64..1.0),
            s in 1usize..4,
        ) {
            let grid = FrequencyGrid::new(0.005, 400).unwrap();
            let cell = [[-0.0625, 0.0625, 0.0625], [0.0625, -0.0625, 0.0625], [0.0625, 0.0625, -0.0625]];
            let mut out = Vec::new();
            spread_cell(u0, v, &cell, s, &grid, &mut out);
            let total: f64 = out.iter().map(|x| x.1).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            prop_assert!(out.iter().all(|x| x.1 >= 0.0));
        }

        #[test]
        fn box_mean_is_the_centre(c in 0.2f64..1.5, w in prop::array::uniform3(0.0f64..0.05)) {
            let grid = FrequencyGrid::new(0.001, 2000).unwrap();
            let mut out = Vec::new();
            spread_box(c, w, 1.0, &grid, &mut out);
            let mean: f64 = out.iter().map(|&(b, m)| grid.centre(b) * m).sum();
            // Bin-centre quantization limits the mean to half a bin.
            prop_assert!((mean - c).abs() <= 0.5 * grid.spacing() + 1e-12);
        }
    }
}
