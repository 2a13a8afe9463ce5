//! Trilinear sampling of staggered fields at arbitrary points.

use crate::grid::{GridSpec, ScalarField, VectorField};
use crate::vec3::Vec3;

/// Interpolates an array whose nodes sit at `origin + (i + shift_i)·h`.
fn trilinear(grid: &GridSpec, dims: [usize; 3], shift: [f64; 3], data: &[f64], x: Vec3) -> f64 {
    let mut base = [0usize; 3];
    let mut t = [0.0; 3];
    for a in 0..3 {
        let s = (x[a] - grid.domain.min[a]) / grid.h - shift[a];
        let hi = (dims[a] - 1) as f64;
        let s = s.clamp(0.0, hi);
        let i0 = (s.floor() as usize).min(dims[a].saturating_sub(2));
        base[a] = i0;
        t[a] = s - i0 as f64;
    }
    let at = |i: usize, j: usize, k: usize| data[i + dims[0] * (j + dims[1] * k)];
    let mut v = 0.0;
    for dk in 0..2 {
        for dj in 0..2 {
            for di in 0..2 {
                let w = (if di == 1 { t[0] } else { 1.0 - t[0] })
                    * (if dj == 1 { t[1] } else { 1.0 - t[1] })
                    * (if dk == 1 { t[2] } else { 1.0 - t[2] });
                if w != 0.0 {
                    v += w * at(base[0] + di, base[1] + dj, base[2] + dk);
                }
            }
        }
    }
    v
}

/// Component values at `x`, each interpolated from its own face family.
pub fn sample_vector(grid: &GridSpec, u: &VectorField, x: Vec3) -> Vec3 {
    [0, 1, 2].map(|c| {
        let mut shift = [0.5; 3];
        shift[c] = 0.0;
        trilinear(grid, grid.face_dims(c), shift, u.comp(c), x)
    })
}

pub fn sample_scalar(grid: &GridSpec, p: &ScalarField, x: Vec3) -> f64 {
    trilinear(grid, grid.n, [0.5; 3], &p.data, x)
}
