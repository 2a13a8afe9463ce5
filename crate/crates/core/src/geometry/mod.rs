//! Perforated-domain construction.

mod lattice;
mod shape;

#[allow(unused_imports)]
pub(crate) use lattice::check_eps_alpha;
pub use lattice::{sigma, CellRegion, DomainSpec, PerforationLattice};
pub use shape::{ReferenceShape, SampledSdf, Shape, ShapeRegistry, Sphere, Superellipsoid};
