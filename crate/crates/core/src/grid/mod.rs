//! Staggered (marker-and-cell) grids on the outer box.
//!
//! Scalars live at cell centres, the `c`-th velocity component on the faces
//! normal to axis `c`. All arrays are x-fastest. Vector fields store the
//! three face families back to back in one buffer so Krylov solvers can work
//! on plain slices.

mod field;
mod interp;
mod io;
mod mask;
pub(crate) mod ops;

pub use field::{ScalarField, VectorField};
pub use interp::{sample_scalar, sample_vector};
pub use io::{read_field, write_field, write_scalar_field, write_vector_field, FieldKind};
pub use mask::Mask;
pub use ops::{
    average_component, div, div_unmasked, grad, laplacian_scalar, laplacian_vector,
    scalar_dirichlet_form, vector_dirichlet_form, ScalarDirichletLaplacian, VectorLaplacian,
};

use crate::error::{Error, Result};
use crate::geometry::DomainSpec;
use crate::vec3::Vec3;

/// Boundary behaviour of a wall of the outer box for the tangential velocity.
/// The normal component always vanishes (or takes prescribed data) at a wall.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum WallKind {
    /// Tangential velocity reflected with opposite sign (Dirichlet midway).
    NoSlip,
    /// Tangential velocity reflected with equal sign (mirror symmetry plane).
    FreeSlip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub n: [usize; 3],
    pub h: f64,
    pub domain: DomainSpec,
    /// `walls[axis][0]` at the low end, `walls[axis][1]` at the high end.
    pub walls: [[WallKind; 2]; 3],
}

pub const MIN_RESOLUTION: usize = 8;

impl GridSpec {
    /// Grid of spacing `h`; every box extent must be an integer multiple of `h`.
    pub fn with_spacing(domain: DomainSpec, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::Parameter(format!(
                "grid spacing must be positive, got {h}"
            )));
        }
        let ext = domain.extent();
        let mut n = [0usize; 3];
        for d in 0..3 {
            let m = (ext[d] / h).round();
            if (m * h - ext[d]).abs() > 1e-9 * ext[d].max(1.0) {
                return Err(Error::Parameter(format!(
                    "spacing {h} does not divide box extent {} along axis {d}",
                    ext[d]
                )));
            }
            n[d] = m as usize;
        }
        Self::check_resolution(n)?;
        Ok(Self {
            n,
            h,
            domain,
            walls: [[WallKind::NoSlip; 2]; 3],
        })
    }

    /// Grid with `n` cells along the first axis.
    pub fn with_cells(domain: DomainSpec, n: usize) -> Result<Self> {
        Self::with_spacing(domain, domain.extent()[0] / n as f64)
    }

    fn check_resolution(n: [usize; 3]) -> Result<()> {
        if n.iter().any(|&m| m < MIN_RESOLUTION) {
            return Err(Error::Parameter(format!(
                "resolution {n:?} below {MIN_RESOLUTION} cells per axis"
            )));
        }
        Ok(())
    }

    pub fn with_walls(mut self, walls: [[WallKind; 2]; 3]) -> Self {
        self.walls = walls;
        self
    }

    pub fn cell_count(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    /// Dimensions of the `c`-face array.
    pub fn face_dims(&self, c: usize) -> [usize; 3] {
        let mut d = self.n;
        d[c] += 1;
        d
    }

    pub fn face_count(&self, c: usize) -> usize {
        self.face_dims(c).iter().product()
    }

    /// Start of each face family in a vector-field buffer, plus the total.
    pub fn face_offsets(&self) -> [usize; 4] {
        let a = self.face_count(0);
        let b = a + self.face_count(1);
        [0, a, b, b + self.face_count(2)]
    }

    #[inline]
    pub fn cell_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n[0] * (j + self.n[1] * k)
    }

    pub fn cell_center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let h = self.h;
        let o = self.domain.min;
        [
            o[0] + (i as f64 + 0.5) * h,
            o[1] + (j as f64 + 0.5) * h,
            o[2] + (k as f64 + 0.5) * h,
        ]
    }

    /// Centre of face `(i, j, k)` of family `c`.
    pub fn face_center(&self, c: usize, i: usize, j: usize, k: usize) -> Vec3 {
        let mut p = [i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5];
        p[c] -= 0.5;
        let o = self.domain.min;
        [
            o[0] + p[0] * self.h,
            o[1] + p[1] * self.h,
            o[2] + p[2] * self.h,
        ]
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(3)
    }

    pub fn is_compatible(&self, other: &GridSpec) -> bool {
        self.n == other.n && (self.h - other.h).abs() <= 1e-12 * self.h
    }
}
