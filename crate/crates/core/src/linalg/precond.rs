use std::collections::BTreeMap;

use super::spectral::{Axis1d, BoxSpectral, End};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, Mask, VectorLaplacian, WallKind};

pub trait Preconditioner: Send + Sync {
    fn name(&self) -> &str;
    /// z ≈ A⁻¹ r
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPrecond;

impl Preconditioner for IdentityPrecond {
    fn name(&self) -> &str {
        "identity"
    }
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

/// Pointwise scaling by the inverse diagonal; entries with zero diagonal map to zero.
#[derive(Debug, Clone)]
pub struct DiagonalPrecond {
    inv: Vec<f64>,
}

impl DiagonalPrecond {
    pub fn new(diag: &[f64]) -> Self {
        Self {
            inv: diag
                .iter()
                .map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 })
                .collect(),
        }
    }
}

impl Preconditioner for DiagonalPrecond {
    fn name(&self) -> &str {
        "jacobi"
    }
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), s) in z.iter_mut().zip(r).zip(&self.inv) {
            *zi = ri * s;
        }
    }
}

/// Inverse of the shifted vector Laplacian of the particle-free box,
/// restricted to the fluid faces of the mask.
#[derive(Debug, Clone)]
pub struct SpectralVectorPrecond {
    families: [BoxSpectral; 3],
    offsets: [usize; 4],
    fluid: Vec<bool>,
}

fn wall_end(w: WallKind) -> End {
    match w {
        WallKind::NoSlip => End::Ghost,
        WallKind::FreeSlip => End::Mirror,
    }
}

impl SpectralVectorPrecond {
    pub fn new(grid: &GridSpec, mask: &Mask, shift: f64) -> Self {
        let families = [0, 1, 2].map(|c| {
            let axes = [0, 1, 2].map(|a| {
                if a == c {
                    Axis1d::new(grid.n[a] - 1, 1, [End::Wall, End::Wall])
                } else {
                    Axis1d::new(
                        grid.n[a],
                        0,
                        [wall_end(grid.walls[a][0]), wall_end(grid.walls[a][1])],
                    )
                }
            });
            BoxSpectral::new(grid.face_dims(c), axes, grid.h, shift)
        });
        Self {
            families,
            offsets: grid.face_offsets(),
            fluid: mask.face.clone(),
        }
    }
}

impl Preconditioner for SpectralVectorPrecond {
    fn name(&self) -> &str {
        "spectral"
    }
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let masked: Vec<f64> = r
            .iter()
            .zip(&self.fluid)
            .map(|(v, &f)| if f { *v } else { 0.0 })
            .collect();
        for c in 0..3 {
            let (lo, hi) = (self.offsets[c], self.offsets[c + 1]);
            self.families[c].apply(&masked[lo..hi], &mut z[lo..hi]);
        }
        for (v, &f) in z.iter_mut().zip(&self.fluid) {
            if !f {
                *v = 0.0;
            }
        }
    }
}

/// Inverse of the cell-centred scalar Laplacian of the particle-free box,
/// restricted to the fluid cells of the mask.
#[derive(Debug, Clone)]
pub struct SpectralScalarPrecond {
    inner: BoxSpectral,
    fluid: Vec<bool>,
}

impl SpectralScalarPrecond {
    pub fn new(grid: &GridSpec, mask: &Mask, shift: f64) -> Self {
        let axes = [0, 1, 2].map(|a| {
            Axis1d::new(
                grid.n[a],
                0,
                [wall_end(grid.walls[a][0]), wall_end(grid.walls[a][1])],
            )
        });
        Self {
            inner: BoxSpectral::new(grid.n, axes, grid.h, shift),
            fluid: mask.cell.clone(),
        }
    }
}

impl Preconditioner for SpectralScalarPrecond {
    fn name(&self) -> &str {
        "spectral"
    }
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let masked: Vec<f64> = r
            .iter()
            .zip(&self.fluid)
            .map(|(v, &f)| if f { *v } else { 0.0 })
            .collect();
        self.inner.apply(&masked, z);
        for (v, &f) in z.iter_mut().zip(&self.fluid) {
            if !f {
                *v = 0.0;
            }
        }
    }
}

/// What a velocity preconditioner may be built from.
pub struct PrecondContext<'a> {
    pub grid: &'a GridSpec,
    pub mask: &'a Mask,
    pub op: &'a VectorLaplacian,
    /// Zeroth-order coefficient added to the operator (Brinkman friction) or
    /// used as the spectral shift.
    pub shift: f64,
}

type Builder = fn(&PrecondContext) -> Box<dyn Preconditioner>;

/// Velocity preconditioners selectable by name from configuration.
pub struct PreconditionerRegistry {
    builders: BTreeMap<&'static str, Builder>,
}

impl Default for PreconditionerRegistry {
    fn default() -> Self {
        let mut r = Self {
            builders: BTreeMap::new(),
        };
        r.register("identity", |_| Box::new(IdentityPrecond));
        r.register("jacobi", |cx| {
            let mut d = cx.op.diagonal();
            for (v, &f) in d.iter_mut().zip(&cx.mask.face) {
                if f {
                    *v += cx.shift;
                }
            }
            Box::new(DiagonalPrecond::new(&d))
        });
        r.register("spectral", |cx| {
            Box::new(SpectralVectorPrecond::new(cx.grid, cx.mask, cx.shift))
        });
        r
    }
}

impl PreconditionerRegistry {
    pub fn register(&mut self, name: &'static str, builder: Builder) {
        self.builders.insert(name, builder);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.builders.keys().copied().collect()
    }

    pub fn build(&self, name: &str, cx: &PrecondContext) -> Result<Box<dyn Preconditioner>> {
        let b = self.builders.get(name).ok_or_else(|| {
            Error::Config(format!(
                "unknown preconditioner '{name}' (known: {:?})",
                self.names()
            ))
        })?;
        Ok(b(cx))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DomainSpec;

    #[test]
    fn spectral_inverts_box_vector_laplacian_with_mixed_walls() {
        let g = GridSpec::with_cells(DomainSpec::new([0.0; 3], [1.0, 1.0, 1.25]).unwrap(), 8)
            .unwrap()
            .with_walls([
                [WallKind::NoSlip, WallKind::FreeSlip],
                [WallKind::FreeSlip, WallKind::FreeSlip],
                [WallKind::NoSlip, WallKind::NoSlip],
            ]);
        let m = Mask::full(&g);
        let op = VectorLaplacian::new(&g, &m);
        let shift = 3.5;
        let p = SpectralVectorPrecond::new(&g, &m, shift);
        let x: Vec<f64> = (0..op.len())
            .map(|i| {
                if m.face[i] {
                    ((i * 13) % 7) as f64 - 3.0
                } else {
                    0.0
                }
            })
            .collect();
        let mut ax = vec![0.0; x.len()];
        op.apply(&x, &mut ax);
        for (v, xi) in ax.iter_mut().zip(&x) {
            *v += shift * xi;
        }
        let mut y = vec![0.0; x.len()];
        p.apply(&ax, &mut y);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-9, "{a} {b}");
        }
    }

    #[test]
    fn unknown_name_is_config_error() {
        let g = GridSpec::with_cells(DomainSpec::unit_cube(), 8).unwrap();
        let m = Mask::full(&g);
        let op = VectorLaplacian::new(&g, &m);
        let reg = PreconditionerRegistry::default();
        let cx = PrecondContext {
            grid: &g,
            mask: &m,
            op: &op,
            shift: 0.0,
        };
        assert!(matches!(reg.build("multigrid", &cx), Err(Error::Config(_))));
        assert_eq!(reg.build("spectral", &cx).unwrap().name(), "spectral");
    }
}
