//! Limit Darcy law and the Brinkman model on the unperforated box.

use nalgebra::Matrix3;
use serde::Serialize;

use crate::cellproblem::{Mat3, ResistanceMatrix};
use crate::error::{Error, Result};
use crate::forcing::{sample_faces, ForcingSpec, VectorPreset};
use crate::geometry::sigma;
use crate::grid::ops::{div_into, grad_into};
use crate::grid::{average_component, GridSpec, Mask, ScalarField, VectorField};
use crate::linalg::{dot, pcg, Axis1d, BoxSpectral, CgOptions, End, LinearOperator, Preconditioner};
use crate::stokes::{Friction, SolverTolerances, StokesRhs, StokesSolution, StokesSystem};
use crate::vec3::Vec3;

#[derive(Debug, Clone)]
pub struct DarcySolution {
    pub u: VectorField,
    /// Mean-zero over the box.
    pub p: ScalarField,
    pub r_used: ResistanceMatrix,
    pub rho0: f64,
    pub iterations: usize,
    /// ‖div_h u‖₂ / ‖div_h(K b)‖₂ with b the sampled forcing.
    pub divergence_residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DarcySummary {
    pub r: Mat3,
    pub rho0: f64,
    pub forcing: serde_json::Value,
    pub u_l2: f64,
    pub p_l2: f64,
    pub iterations: usize,
}

impl DarcySolution {
    pub fn summary(&self, grid: &GridSpec, forcing: &ForcingSpec) -> Result<DarcySummary> {
        Ok(DarcySummary {
            r: self.r_used.r,
            rho0: self.rho0,
            forcing: forcing.params(),
            u_l2: self.u.norm(grid, None, 2.0)?,
            p_l2: self.p.norm(grid, None, 2.0)?,
            iterations: self.iterations,
        })
    }
}

pub(crate) fn spd_inverse(r: &Mat3) -> Result<Mat3> {
    let m = Matrix3::from_fn(|i, j| r[i][j]);
    if (m - m.transpose()).abs().max() > 1e-10 * m.abs().max() {
        return Err(Error::Parameter("resistance matrix is not symmetric".into()));
    }
    let ev = nalgebra::SymmetricEigen::new(m).eigenvalues;
    let (lo, hi) = (ev.min(), ev.max());
    if !(lo > 1e-12 * hi) {
        return Err(Error::Parameter(format!("resistance matrix is not positive definite (eigenvalues {ev:?})")));
    }
    let inv = m.try_inverse().ok_or_else(|| Error::Parameter("singular resistance matrix".into()))?;
    Ok([0, 1, 2].map(|i| [0, 1, 2].map(|j| inv[(i, j)])))
}

/// Face-vector multiplication by a constant tensor; off-diagonal couplings
/// use four-point averages, so the map is symmetric whenever the tensor is.
struct FaceTensor<'a> {
    grid: &'a GridSpec,
    k: Mat3,
}

impl FaceTensor<'_> {
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        let off = self.grid.face_offsets();
        let mut out = vec![0.0; v.len()];
        for c in 0..3 {
            for d in 0..3 {
                if self.k[c][d] == 0.0 {
                    continue;
                }
                let src = average_component(self.grid, v, d, c);
                for (o, s) in out[off[c]..off[c + 1]].iter_mut().zip(&src) {
                    *o += self.k[c][d] * s;
                }
            }
        }
        out
    }
}

/// p ↦ −div_h(K ∇_h p) with zero normal flux on the walls.
struct DarcyOperator<'a> {
    grid: &'a GridSpec,
    mask: &'a Mask,
    tensor: FaceTensor<'a>,
}

impl LinearOperator for DarcyOperator<'_> {
    fn len(&self) -> usize {
        self.grid.cell_count()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut g = vec![0.0; self.grid.face_offsets()[3]];
        grad_into(self.grid, self.mask, x, &mut g);
        let flux = self.tensor.apply(&g);
        div_into(self.grid, Some(self.mask), &flux, y);
        y.iter_mut().for_each(|v| *v = -*v);
    }
}

struct ScaledNeumann {
    inner: BoxSpectral,
    scale: f64,
}

impl Preconditioner for ScaledNeumann {
    fn name(&self) -> &str {
        "spectral-neumann"
    }
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        self.inner.apply(r, z);
        z.iter_mut().for_each(|v| *v *= self.scale);
    }
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Solves div(R⁻¹∇p) = div(R⁻¹(ρ₀f + g)) with no-flux walls and returns
/// u = R⁻¹(ρ₀f + g − ∇p) with mean-zero p. `tol` is the relative CG tolerance.
pub fn solve_darcy(grid: &GridSpec, r: &ResistanceMatrix, rho0: f64, forcing: &ForcingSpec, tol: f64) -> Result<DarcySolution> {
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("tolerance must be positive, got {tol}")));
    }
    let k = spd_inverse(&r.r)?;
    let mask = Mask::full(grid);
    let off = grid.face_offsets();
    let mut b = sample_faces(grid, &Total { forcing, rho0 });
    for (v, &f) in b.data.iter_mut().zip(&mask.face) {
        if !f {
            *v = 0.0;
        }
    }
    let tensor = FaceTensor { grid, k };
    let kb = tensor.apply(&b.data);
    let mut rhs = vec![0.0; grid.cell_count()];
    div_into(grid, Some(&mask), &kb, &mut rhs);
    rhs.iter_mut().for_each(|v| *v = -*v);
    remove_mean(&mut rhs);
    let op = DarcyOperator { grid, mask: &mask, tensor };
    let axes = [0, 1, 2].map(|a| Axis1d::new(grid.n[a], 0, [End::Mirror, End::Mirror]));
    let kbar = (k[0][0] + k[1][1] + k[2][2]) / 3.0;
    let prec = ScaledNeumann { inner: BoxSpectral::new(grid.n, axes, grid.h, 0.0), scale: 1.0 / kbar };
    let mut p = vec![0.0; grid.cell_count()];
    let opts = CgOptions { rtol: tol, max_iter: 10_000, ..Default::default() };
    let project = |v: &mut [f64]| remove_mean(v);
    let rep = pcg(&op, &prec, &rhs, &mut p, &opts, Some(&project));
    if !rep.converged && rep.residual() > tol * dot(&rhs, &rhs).sqrt().max(f64::MIN_POSITIVE) {
        return Err(Error::convergence("Darcy pressure solve", rep.history));
    }
    remove_mean(&mut p);
    let mut gp = vec![0.0; off[3]];
    grad_into(grid, &mask, &p, &mut gp);
    let drive: Vec<f64> = b.data.iter().zip(&gp).map(|(a, g)| a - g).collect();
    let u = op.tensor.apply(&drive);
    let mut d = vec![0.0; grid.cell_count()];
    div_into(grid, Some(&mask), &u, &mut d);
    let scale = dot(&rhs, &rhs).sqrt();
    let divergence_residual = if scale > 0.0 { dot(&d, &d).sqrt() / scale } else { dot(&d, &d).sqrt() };
    Ok(DarcySolution {
        u: VectorField { n: grid.n, offsets: off, data: u },
        p: ScalarField { n: grid.n, data: p },
        r_used: r.clone(),
        rho0,
        iterations: rep.iterations,
        divergence_residual,
    })
}

#[derive(Debug)]
struct Total<'a> {
    forcing: &'a ForcingSpec,
    rho0: f64,
}

impl VectorPreset for Total<'_> {
    fn kind(&self) -> &'static str {
        "total"
    }
    fn eval(&self, x: Vec3) -> Vec3 {
        self.forcing.total(self.rho0, x)
    }
    fn params(&self) -> serde_json::Value {
        self.forcing.params()
    }
    fn is_zero(&self) -> bool {
        self.forcing.is_zero()
    }
}

/// Face samples of ρ₀f + g.
pub fn sample_total(grid: &GridSpec, forcing: &ForcingSpec, rho0: f64) -> VectorField {
    sample_faces(grid, &Total { forcing, rho0 })
}

/// −Δu + σ_ε⁻²Ru + ∇p = ρ₀f + g, div u = 0 on the unperforated box.
pub fn solve_brinkman(
    grid: &GridSpec,
    r: &ResistanceMatrix,
    eps: f64,
    alpha: f64,
    rho0: f64,
    forcing: &ForcingSpec,
    tol: &SolverTolerances,
) -> Result<StokesSolution> {
    spd_inverse(&r.r)?;
    let s = sigma(eps, alpha)?;
    let c = 1.0 / (s * s);
    let m = r.r;
    let isotropic = m[0][1] == 0.0 && m[0][2] == 0.0 && m[1][2] == 0.0 && m[0][0] == m[1][1] && m[1][1] == m[2][2];
    let friction = if isotropic {
        Friction::Isotropic(c * m[0][0])
    } else {
        Friction::Tensor(m.map(|row| row.map(|v| c * v)))
    };
    let drag = c * (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    let sys = StokesSystem::new(grid, Mask::full(grid), friction, drag, tol)?;
    let rhs = sample_total(grid, forcing, rho0);
    sys.solve(&StokesRhs { force: Some(&rhs), ..Default::default() })
}

#[cfg(test)]
mod tests;
