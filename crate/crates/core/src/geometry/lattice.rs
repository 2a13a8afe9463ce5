use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::shape::{ReferenceShape, Shape};
use crate::vec3::{norm, sub, Vec3};

/// Axis-aligned outer domain.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DomainSpec {
    pub min: Vec3,
    pub max: Vec3,
}

impl DomainSpec {
    pub fn new(min: Vec3, max: Vec3) -> Result<Self> {
        if (0..3).any(|d| !(min[d] < max[d]) || !min[d].is_finite() || !max[d].is_finite()) {
            return Err(Error::Parameter(format!("degenerate box {min:?}..{max:?}")));
        }
        Ok(Self { min, max })
    }

    pub fn unit_cube() -> Self {
        Self {
            min: [0.0; 3],
            max: [1.0; 3],
        }
    }

    pub fn cube(side: f64) -> Self {
        Self {
            min: [0.0; 3],
            max: [side; 3],
        }
    }

    pub fn extent(&self) -> Vec3 {
        [0, 1, 2].map(|d| self.max[d] - self.min[d])
    }

    pub fn volume(&self) -> f64 {
        self.extent().iter().product()
    }

    pub fn contains(&self, x: Vec3) -> bool {
        (0..3).all(|d| x[d] >= self.min[d] && x[d] <= self.max[d])
    }
}

/// Tag of a point in the decomposition of a lattice cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
pub enum CellRegion {
    /// Inside a particle.
    Solid,
    /// Ball of radius ε/2 around the centre, minus the particle.
    Inner,
    /// Annulus ε/2 ≤ r < ε.
    Annulus,
    /// Remaining corners of the cell.
    Corner,
    /// Outside every particle-carrying cell.
    BoundaryCell,
}

impl CellRegion {
    pub fn letter(self) -> char {
        match self {
            CellRegion::Solid => 'T',
            CellRegion::Inner => 'C',
            CellRegion::Annulus => 'D',
            CellRegion::Corner => 'K',
            CellRegion::BoundaryCell => 'B',
        }
    }
}

/// ε^{(3−α)/2}.
pub fn sigma(eps: f64, alpha: f64) -> Result<f64> {
    check_eps_alpha(eps, alpha)?;
    Ok(eps.powf(0.5 * (3.0 - alpha)))
}

pub(crate) fn check_eps_alpha(eps: f64, alpha: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Parameter(format!(
            "eps must lie in (0, 1], got {eps}"
        )));
    }
    if !(1.0..=3.0).contains(&alpha) {
        return Err(Error::Parameter(format!(
            "alpha must lie in [1, 3], got {alpha}"
        )));
    }
    Ok(())
}

/// The perforated domain: a block of 2ε-cells centred in the box, one scaled
/// particle per cell.
#[derive(Debug, Clone)]
pub struct PerforationLattice {
    pub domain: DomainSpec,
    pub eps: f64,
    pub alpha: f64,
    pub shape: ReferenceShape,
    pub centers: Vec<Vec3>,
    pub particle_scale: f64,
    /// Number of particle cells along each axis.
    pub cells: [usize; 3],
    /// Lower corner of the cell block.
    pub block_min: Vec3,
}

impl PerforationLattice {
    /// Covers the box with a mesh of spacing 2ε and keeps the cells entirely
    /// inside it. The mesh is positioned so the kept block is centred, which
    /// makes the lattice inherit the symmetries of the box.
    pub fn build(domain: DomainSpec, eps: f64, alpha: f64, shape: ReferenceShape) -> Result<Self> {
        check_eps_alpha(eps, alpha)?;
        if shape.bounding_radius() >= 1.0 {
            return Err(Error::Parameter(format!(
                "reference shape must lie inside the unit ball (bounding radius {})",
                shape.bounding_radius()
            )));
        }
        let width = 2.0 * eps;
        let ext = domain.extent();
        let cells = [0, 1, 2].map(|d| ((ext[d] / width) * (1.0 + 1e-12)).floor() as usize);
        let block_min = [0, 1, 2].map(|d| domain.min[d] + 0.5 * (ext[d] - cells[d] as f64 * width));
        let count = cells.iter().product::<usize>();
        let mut centers = Vec::with_capacity(count);
        for i in 0..cells[0] {
            for j in 0..cells[1] {
                for k in 0..cells[2] {
                    centers.push([
                        block_min[0] + (2 * i + 1) as f64 * eps,
                        block_min[1] + (2 * j + 1) as f64 * eps,
                        block_min[2] + (2 * k + 1) as f64 * eps,
                    ]);
                }
            }
        }
        Ok(Self {
            domain,
            eps,
            alpha,
            shape,
            centers,
            particle_scale: eps.powf(alpha),
            cells,
            block_min,
        })
    }

    /// Same box and shape, no particles.
    pub fn empty(domain: DomainSpec, shape: ReferenceShape) -> Self {
        Self {
            domain,
            eps: 1.0,
            alpha: 3.0,
            shape,
            centers: Vec::new(),
            particle_scale: 1.0,
            cells: [0; 3],
            block_min: domain.min,
        }
    }

    pub fn count(&self) -> usize {
        self.centers.len()
    }

    pub fn sigma(&self) -> f64 {
        self.eps.powf(0.5 * (3.0 - self.alpha))
    }

    /// Index triple of the lattice cell containing `x`, if any.
    pub fn cell_of(&self, x: Vec3) -> Option<[usize; 3]> {
        if self.centers.is_empty() {
            return None;
        }
        let width = 2.0 * self.eps;
        let mut idx = [0usize; 3];
        for d in 0..3 {
            let s = (x[d] - self.block_min[d]) / width;
            if s < 0.0 || s >= self.cells[d] as f64 {
                return None;
            }
            idx[d] = s.floor() as usize;
        }
        Some(idx)
    }

    fn nearest_cell(&self, x: Vec3) -> [usize; 3] {
        let width = 2.0 * self.eps;
        [0, 1, 2].map(|d| {
            let s = ((x[d] - self.block_min[d]) / width).floor();
            s.clamp(0.0, (self.cells[d] - 1) as f64) as usize
        })
    }

    pub fn center_of(&self, idx: [usize; 3]) -> Vec3 {
        [0, 1, 2].map(|d| self.block_min[d] + (2 * idx[d] + 1) as f64 * self.eps)
    }

    /// Signed distance to the particle of the nearest cell; `+∞` without particles.
    pub fn signed_distance(&self, x: Vec3) -> f64 {
        if self.centers.is_empty() {
            return f64::INFINITY;
        }
        let c = self.center_of(self.nearest_cell(x));
        let s = self.particle_scale;
        s * self.shape.sdf(sub(x, c).map(|v| v / s))
    }

    /// Whether the offset `y` from a cell centre lies inside the particle.
    pub fn shape_contains(&self, y: Vec3) -> bool {
        let s = self.particle_scale;
        self.shape.sdf(y.map(|v| v / s)) < 0.0
    }

    pub fn is_solid(&self, x: Vec3) -> bool {
        self.signed_distance(x) < 0.0
    }

    pub fn classify(&self, x: Vec3) -> CellRegion {
        let Some(idx) = self.cell_of(x) else {
            return CellRegion::BoundaryCell;
        };
        let c = self.center_of(idx);
        let s = self.particle_scale;
        if s * self.shape.sdf(sub(x, c).map(|v| v / s)) < 0.0 {
            return CellRegion::Solid;
        }
        let r = norm(sub(x, c));
        if r < 0.5 * self.eps {
            CellRegion::Inner
        } else if r < self.eps {
            CellRegion::Annulus
        } else {
            CellRegion::Corner
        }
    }

    /// Total particle volume N·ε^{3α}·|T|.
    pub fn solid_volume(&self) -> f64 {
        self.count() as f64 * self.particle_scale.powi(3) * self.shape.volume()
    }

    pub fn with_shape(&self, shape: Arc<dyn Shape>) -> Result<Self> {
        Self::build(self.domain, self.eps, self.alpha, shape)
    }
}
