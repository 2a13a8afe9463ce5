use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::geometry::PerforationLattice;
use crate::grid::{GridSpec, ScalarField, VectorField};
use crate::vec3::Vec3;

/// Fluid flags for cells and faces.
///
/// A face is fluid iff it is interior to the box, both adjacent cells are
/// fluid and its centre lies outside every particle. Cells left without any
/// fluid face carry no flow and are treated as solid.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub n: [usize; 3],
    pub cell: Vec<bool>,
    pub face: Vec<bool>,
    pub offsets: [usize; 4],
}

impl Mask {
    /// Unperforated box.
    pub fn full(grid: &GridSpec) -> Self {
        Self::from_solid(grid, |_| false)
    }

    pub fn from_lattice(grid: &GridSpec, lattice: &PerforationLattice) -> Self {
        if lattice.count() == 0 {
            return Self::full(grid);
        }
        Self::from_solid(grid, |x| lattice.is_solid(x))
    }

    pub fn from_solid(grid: &GridSpec, solid: impl Fn(Vec3) -> bool) -> Self {
        let mut cell = vec![false; grid.cell_count()];
        for k in 0..grid.n[2] {
            for j in 0..grid.n[1] {
                for i in 0..grid.n[0] {
                    cell[grid.cell_index(i, j, k)] = !solid(grid.cell_center(i, j, k));
                }
            }
        }
        let offsets = grid.face_offsets();
        let mut face = vec![false; offsets[3]];
        for c in 0..3 {
            let d = grid.face_dims(c);
            for k in 0..d[2] {
                for j in 0..d[1] {
                    for i in 0..d[0] {
                        let idx = [i, j, k];
                        if idx[c] == 0 || idx[c] == grid.n[c] {
                            continue;
                        }
                        let hi = grid.cell_index(i, j, k);
                        let mut lo_idx = idx;
                        lo_idx[c] -= 1;
                        let lo = grid.cell_index(lo_idx[0], lo_idx[1], lo_idx[2]);
                        if cell[hi] && cell[lo] && !solid(grid.face_center(c, i, j, k)) {
                            face[offsets[c] + i + d[0] * (j + d[1] * k)] = true;
                        }
                    }
                }
            }
        }
        let mut mask = Self {
            n: grid.n,
            cell,
            face,
            offsets,
        };
        mask.prune_closed_cells(grid);
        mask
    }

    fn prune_closed_cells(&mut self, grid: &GridSpec) {
        for k in 0..grid.n[2] {
            for j in 0..grid.n[1] {
                for i in 0..grid.n[0] {
                    let ci = grid.cell_index(i, j, k);
                    if self.cell[ci]
                        && self
                            .cell_faces(grid, i, j, k)
                            .iter()
                            .all(|&f| !self.face[f])
                    {
                        self.cell[ci] = false;
                    }
                }
            }
        }
    }

    /// Buffer indices of the six faces of a cell: (x-lo, x-hi, y-lo, y-hi, z-lo, z-hi).
    pub fn cell_faces(&self, grid: &GridSpec, i: usize, j: usize, k: usize) -> [usize; 6] {
        let mut out = [0usize; 6];
        for c in 0..3 {
            let d = grid.face_dims(c);
            let base = self.offsets[c] + i + d[0] * (j + d[1] * k);
            let stride = [1, d[0], d[0] * d[1]][c];
            out[2 * c] = base;
            out[2 * c + 1] = base + stride;
        }
        out
    }

    pub fn check(&self, grid: &GridSpec) -> Result<()> {
        if self.n != grid.n
            || self.cell.len() != grid.cell_count()
            || self.offsets != grid.face_offsets()
        {
            return Err(Error::Shape(format!(
                "mask {:?} on grid {:?}",
                self.n, grid.n
            )));
        }
        Ok(())
    }

    pub fn fluid_cells(&self) -> usize {
        self.cell.iter().filter(|c| **c).count()
    }

    pub fn fluid_faces(&self) -> usize {
        self.face.iter().filter(|c| **c).count()
    }

    /// Number of connected components of fluid cells linked through fluid faces.
    pub fn fluid_components(&self, grid: &GridSpec) -> usize {
        let mut seen = vec![false; self.cell.len()];
        let mut components = 0;
        let mut queue = VecDeque::new();
        for start in 0..self.cell.len() {
            if !self.cell[start] || seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            queue.push_back(start);
            while let Some(ci) = queue.pop_front() {
                let i = ci % grid.n[0];
                let j = (ci / grid.n[0]) % grid.n[1];
                let k = ci / (grid.n[0] * grid.n[1]);
                let faces = self.cell_faces(grid, i, j, k);
                let idx = [i, j, k];
                for c in 0..3 {
                    let stride = [1, grid.n[0], grid.n[0] * grid.n[1]][c];
                    if idx[c] > 0 && self.face[faces[2 * c]] && !seen[ci - stride] {
                        seen[ci - stride] = true;
                        queue.push_back(ci - stride);
                    }
                    if idx[c] + 1 < grid.n[c] && self.face[faces[2 * c + 1]] && !seen[ci + stride] {
                        seen[ci + stride] = true;
                        queue.push_back(ci + stride);
                    }
                }
            }
        }
        components
    }

    /// Fails unless the fluid region is nonempty and connected.
    pub fn require_connected(&self, grid: &GridSpec) -> Result<()> {
        match self.fluid_components(grid) {
            0 => Err(Error::Geometry("fluid region is empty".into())),
            1 => Ok(()),
            m => Err(Error::Geometry(format!(
                "fluid region splits into {m} components on this grid"
            ))),
        }
    }

    pub fn zero_solid_vector(&self, v: &mut VectorField) {
        for (x, f) in v.data.iter_mut().zip(&self.face) {
            if !f {
                *x = 0.0;
            }
        }
    }

    pub fn zero_solid_scalar(&self, p: &mut ScalarField) {
        for (x, f) in p.data.iter_mut().zip(&self.cell) {
            if !f {
                *x = 0.0;
            }
        }
    }

    /// Average over fluid cells.
    pub fn fluid_mean(&self, p: &ScalarField) -> f64 {
        let mut s = 0.0;
        let mut n = 0usize;
        for (x, f) in p.data.iter().zip(&self.cell) {
            if *f {
                s += x;
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            s / n as f64
        }
    }

    /// Subtracts the fluid mean and zeroes solid cells.
    pub fn remove_mean(&self, p: &mut ScalarField) {
        let m = self.fluid_mean(p);
        for (x, f) in p.data.iter_mut().zip(&self.cell) {
            *x = if *f { *x - m } else { 0.0 };
        }
    }
}
