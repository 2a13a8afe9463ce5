//! Matrix-free Krylov machinery shared by the solvers.

mod cg;
mod precond;
mod spectral;

pub use cg::{pcg, ritz_values, CgOptions, CgReport};
pub use precond::{
    DiagonalPrecond, IdentityPrecond, PrecondContext, Preconditioner, PreconditionerRegistry,
    SpectralScalarPrecond, SpectralVectorPrecond,
};
pub use spectral::{Axis1d, BoxSpectral, End};

use crate::grid::{ScalarDirichletLaplacian, VectorLaplacian};

pub trait LinearOperator {
    fn len(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for VectorLaplacian {
    fn len(&self) -> usize {
        VectorLaplacian::len(self)
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        VectorLaplacian::apply(self, x, y)
    }
}

impl LinearOperator for ScalarDirichletLaplacian {
    fn len(&self) -> usize {
        ScalarDirichletLaplacian::len(self)
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        ScalarDirichletLaplacian::apply(self, x, y)
    }
}

const BLOCK: usize = 1024;

/// Blocked summation in a fixed order; reproducible and less sensitive to
/// round-off than a single running sum.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.chunks(BLOCK)
        .zip(b.chunks(BLOCK))
        .map(|(x, y)| {
            let mut acc = [0.0; 4];
            let mut xi = x.chunks_exact(4);
            let mut yi = y.chunks_exact(4);
            for (p, q) in (&mut xi).zip(&mut yi) {
                acc[0] += p[0] * q[0];
                acc[1] += p[1] * q[1];
                acc[2] += p[2] * q[2];
                acc[3] += p[3] * q[3];
            }
            let tail: f64 = xi
                .remainder()
                .iter()
                .zip(yi.remainder())
                .map(|(p, q)| p * q)
                .sum();
            (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
        })
        .sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// y += alpha·x
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
