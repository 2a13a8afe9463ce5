//! Saddle-point solvers for the masked Stokes system
//!
//! ```text
//!   −Δ_h u + K u + W ∇_h π = f      on fluid faces
//!   div_h(W u)             = g      on fluid cells
//! ```
//!
//! with optional friction `K` (Brinkman term), optional face weights `W`
//! (density in the weighted constraint) and optional Dirichlet data on the
//! solid faces and beyond the box walls.

mod minres;
mod pressure;
mod uzawa;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PerforationLattice;
use crate::grid::ops::{face_links, Link};
use crate::grid::{average_component, GridSpec, Mask, ScalarField, VectorField, VectorLaplacian};
use crate::linalg::{dot, PrecondContext, Preconditioner, PreconditionerRegistry};

pub use pressure::PressurePrecond;

/// Outer iteration used for the saddle-point system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SaddleMethod {
    /// Conjugate gradients on the pressure Schur complement with inner velocity solves.
    Uzawa,
    /// Preconditioned MINRES on the full system with a block-diagonal preconditioner.
    Minres,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverTolerances {
    /// Momentum residual relative to the norm of the total forcing.
    pub momentum: f64,
    /// Constraint residual relative to max(‖g‖, ‖∇u‖, ℓ‖f‖), ℓ the shortest box side.
    pub divergence: f64,
    pub max_outer: usize,
    /// Relative tolerance of inner velocity solves (Uzawa only).
    pub inner_rtol: f64,
    pub max_inner: usize,
    pub preconditioner: String,
    pub method: SaddleMethod,
}

impl Default for SolverTolerances {
    fn default() -> Self {
        Self {
            momentum: 1e-8,
            divergence: 1e-9,
            max_outer: 400,
            inner_rtol: 1e-11,
            max_inner: 2000,
            preconditioner: "spectral".into(),
            method: SaddleMethod::Minres,
        }
    }
}

impl SolverTolerances {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Parameter(format!(
                    "{what} tolerance must be positive, got {v}"
                )))
            }
        };
        pos(self.momentum, "momentum")?;
        pos(self.divergence, "divergence")?;
        pos(self.inner_rtol, "inner")?;
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::Parameter("iteration limits must be positive".into()));
        }
        Ok(())
    }
}

/// Zeroth-order velocity term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Friction {
    None,
    Isotropic(f64),
    /// Constant SPD tensor; off-diagonal couplings use four-point averages.
    Tensor([[f64; 3]; 3]),
}

impl Friction {
    fn isotropic_part(&self) -> f64 {
        match self {
            Friction::None => 0.0,
            Friction::Isotropic(c) => *c,
            Friction::Tensor(r) => (r[0][0] + r[1][1] + r[2][2]) / 3.0,
        }
    }
}

/// Inhomogeneous velocity data: the values stored on solid faces act as the
/// wall value for ghost links towards them (and as the exact value for
/// normal components on the box boundary); `outer` is the tangential wall
/// value beyond no-slip box walls.
#[derive(Debug, Clone)]
pub struct DirichletData {
    pub solid: VectorField,
    pub outer: [f64; 3],
}

impl DirichletData {
    /// Uniform value `e` on the box walls and zero on interior solid faces.
    pub fn uniform_walls(grid: &GridSpec, mask: &Mask, e: [f64; 3]) -> Self {
        let mut solid = VectorField::zeros(grid);
        for c in 0..3 {
            let d = grid.face_dims(c);
            for k in 0..d[2] {
                for j in 0..d[1] {
                    for i in 0..d[0] {
                        let idx = [i, j, k];
                        if idx[c] == 0 || idx[c] == grid.n[c] {
                            let f = mask.offsets[c] + i + d[0] * (j + d[1] * k);
                            solid.data[f] = e[c];
                        }
                    }
                }
            }
        }
        Self { solid, outer: e }
    }
}

/// Right-hand side of one solve.
#[derive(Default, Clone, Copy)]
pub struct StokesRhs<'a> {
    pub force: Option<&'a VectorField>,
    pub divergence: Option<&'a ScalarField>,
    pub data: Option<&'a DirichletData>,
    pub initial_pressure: Option<&'a ScalarField>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StokesDiagnostics {
    pub method: SaddleMethod,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub momentum_residual: f64,
    pub divergence_residual: f64,
    /// Outer residual history (constraint residual for Uzawa, preconditioned
    /// residual estimate for MINRES).
    pub history: Vec<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct StokesSolution {
    /// Velocity, carrying the Dirichlet data on solid faces.
    pub u: VectorField,
    /// Pressure, mean-zero over fluid cells, zero on solid cells.
    pub p: ScalarField,
    /// Relative residuals as defined by [`SolverTolerances`].
    pub momentum_residual: f64,
    pub divergence_residual: f64,
    pub iterations: usize,
    pub diagnostics: StokesDiagnostics,
}

/// Assembled operators and preconditioners for one grid and mask.
pub struct StokesSystem {
    pub grid: GridSpec,
    pub mask: Mask,
    lap: VectorLaplacian,
    friction: Friction,
    face_weight: Option<Vec<f64>>,
    cell_weight: Option<Vec<f64>>,
    velocity_precond: Box<dyn Preconditioner>,
    pressure_precond: PressurePrecond,
    pub tol: SolverTolerances,
}

/// Macroscopic friction coefficient σ⁻²·(3π/4)·r_eq of a lattice, used to
/// scale the pressure preconditioner (zero for an empty lattice).
pub fn lattice_drag_coefficient(lattice: &PerforationLattice) -> f64 {
    if lattice.count() == 0 {
        return 0.0;
    }
    let s = lattice.sigma();
    0.75 * std::f64::consts::PI * lattice.shape.equivalent_radius() / (s * s)
}

impl StokesSystem {
    /// `drag` is the estimated macroscopic friction of the obstacles (see
    /// [`lattice_drag_coefficient`]); it only affects preconditioning.
    pub fn new(
        grid: &GridSpec,
        mask: Mask,
        friction: Friction,
        drag: f64,
        tol: &SolverTolerances,
    ) -> Result<Self> {
        tol.validate()?;
        mask.check(grid)?;
        mask.require_connected(grid)?;
        if let Friction::Tensor(r) = friction {
            check_spd(&r)?;
        }
        let lap = VectorLaplacian::new(grid, &mask);
        let shift = friction.isotropic_part();
        let cx = PrecondContext {
            grid,
            mask: &mask,
            op: &lap,
            shift,
        };
        let velocity_precond = PreconditionerRegistry::default().build(&tol.preconditioner, &cx)?;
        let pressure_precond = PressurePrecond::new(grid, &mask, shift + drag, None);
        Ok(Self {
            grid: grid.clone(),
            mask,
            lap,
            friction,
            face_weight: None,
            cell_weight: None,
            velocity_precond,
            pressure_precond,
            tol: tol.clone(),
        })
    }

    /// Installs the density weight of the constraint; faces take the
    /// arithmetic mean of their two cells.
    pub fn set_density(&mut self, rho: &ScalarField) -> Result<()> {
        rho.check(&self.grid)?;
        for (v, &f) in rho.data.iter().zip(&self.mask.cell) {
            if f && !(*v > 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!(
                    "density must be positive on fluid cells, found {v}"
                )));
            }
        }
        let g = &self.grid;
        let mut w = vec![0.0; g.face_offsets()[3]];
        let n = g.n;
        for c in 0..3 {
            let d = g.face_dims(c);
            let cs = [1, n[0], n[0] * n[1]][c];
            for k in 0..d[2] {
                for j in 0..d[1] {
                    for i in 0..d[0] {
                        let f = self.mask.offsets[c] + i + d[0] * (j + d[1] * k);
                        if self.mask.face[f] {
                            let hi = g.cell_index(i, j, k);
                            w[f] = 0.5 * (rho.data[hi] + rho.data[hi - cs]);
                        }
                    }
                }
            }
        }
        self.face_weight = Some(w);
        self.cell_weight = Some(rho.data.clone());
        self.pressure_precond.set_weights(Some(&rho.data));
        Ok(())
    }

    pub fn clear_density(&mut self) {
        self.face_weight = None;
        self.cell_weight = None;
        self.pressure_precond.set_weights(None);
    }

    pub fn velocity_len(&self) -> usize {
        self.lap.len()
    }

    pub fn pressure_len(&self) -> usize {
        self.grid.cell_count()
    }

    /// y = (−Δ_h + K) x on fluid faces.
    pub fn apply_velocity(&self, x: &[f64], y: &mut [f64]) {
        self.lap.apply(x, y);
        match self.friction {
            Friction::None => {}
            Friction::Isotropic(c) => {
                for &f in self.lap.fluid_dofs() {
                    y[f] += c * x[f];
                }
            }
            Friction::Tensor(r) => {
                let off = self.mask.offsets;
                for to in 0..3 {
                    for from in 0..3 {
                        let coef = r[to][from];
                        if coef == 0.0 {
                            continue;
                        }
                        let avg = average_component(&self.grid, x, from, to);
                        for (t, a) in avg.iter().enumerate() {
                            let f = off[to] + t;
                            if self.mask.face[f] {
                                y[f] += coef * a;
                            }
                        }
                    }
                }
            }
        }
    }

    /// y = W ∇_h p on fluid faces.
    pub fn apply_gradient(&self, p: &[f64], y: &mut [f64]) {
        crate::grid::ops::grad_into(&self.grid, &self.mask, p, y);
        if let Some(w) = &self.face_weight {
            for (v, wi) in y.iter_mut().zip(w) {
                *v *= wi;
            }
        }
    }

    /// y = div_h(W u) on fluid cells, where u is zero on solid faces.
    pub fn apply_divergence(&self, u: &[f64], y: &mut [f64]) {
        match &self.face_weight {
            Some(w) => {
                let wu: Vec<f64> = u.iter().zip(w).map(|(a, b)| a * b).collect();
                crate::grid::ops::div_into(&self.grid, Some(&self.mask), &wu, y);
            }
            None => crate::grid::ops::div_into(&self.grid, Some(&self.mask), u, y),
        }
    }

    pub(crate) fn precondition_velocity(&self, r: &[f64], z: &mut [f64]) {
        self.velocity_precond.apply(r, z);
    }

    pub(crate) fn precondition_pressure(&self, r: &[f64], z: &mut [f64]) {
        self.pressure_precond.apply(r, z);
    }

    /// Removes the fluid-cell mean and zeroes solid cells.
    pub(crate) fn project_pressure(&self, p: &mut [f64]) {
        let mut s = 0.0;
        let mut n = 0usize;
        for (v, &f) in p.iter().zip(&self.mask.cell) {
            if f {
                s += v;
                n += 1;
            }
        }
        let m = if n > 0 { s / n as f64 } else { 0.0 };
        for (v, &f) in p.iter_mut().zip(&self.mask.cell) {
            *v = if f { *v - m } else { 0.0 };
        }
    }

    /// h³-weighted L² norm.
    pub(crate) fn l2(&self, v: &[f64]) -> f64 {
        (self.grid.cell_volume() * dot(v, v)).sqrt()
    }

    /// Contributions of the Dirichlet data to the momentum right-hand side.
    fn lift(&self, data: &DirichletData) -> Vec<f64> {
        let g = &self.grid;
        let inv_h2 = 1.0 / (g.h * g.h);
        let mut b = vec![0.0; self.velocity_len()];
        for c in 0..3 {
            let d = g.face_dims(c);
            let strides = [1, d[0], d[0] * d[1]];
            for k in 0..d[2] {
                for j in 0..d[1] {
                    for i in 0..d[0] {
                        let f = self.mask.offsets[c] + i + d[0] * (j + d[1] * k);
                        if !self.mask.face[f] {
                            continue;
                        }
                        let links = face_links(g, &self.mask, c, [i, j, k], f);
                        let idx = [i, j, k];
                        let mut acc = 0.0;
                        for a in 0..3 {
                            for s in 0..2 {
                                let in_box = if s == 0 {
                                    idx[a] > 0
                                } else {
                                    idx[a] + 1 < d[a]
                                };
                                let nb = || {
                                    if s == 0 {
                                        f - strides[a]
                                    } else {
                                        f + strides[a]
                                    }
                                };
                                match links[2 * a + s] {
                                    Link::Ghost if in_box => acc += 2.0 * data.solid.data[nb()],
                                    Link::Ghost => acc += 2.0 * data.outer[c],
                                    Link::Wall => acc += data.solid.data[nb()],
                                    Link::Fluid | Link::Mirror => {}
                                }
                            }
                        }
                        b[f] = acc * inv_h2;
                    }
                }
            }
        }
        b
    }

    /// Solves the system for the given data.
    pub fn solve(&self, rhs: &StokesRhs) -> Result<StokesSolution> {
        let start = Instant::now();
        let g = &self.grid;
        let nu = self.velocity_len();
        let np = self.pressure_len();
        let mut f = vec![0.0; nu];
        if let Some(force) = rhs.force {
            force.check(g)?;
            for (i, &fl) in self.mask.face.iter().enumerate() {
                if fl {
                    f[i] = force.data[i];
                }
            }
        }
        let mut div_target = vec![0.0; np];
        if let Some(dv) = rhs.divergence {
            dv.check(g)?;
            for (i, &fl) in self.mask.cell.iter().enumerate() {
                if fl {
                    div_target[i] = dv.data[i];
                }
            }
        }
        if let Some(data) = rhs.data {
            data.solid.check(g)?;
            if self.face_weight.is_some() {
                return Err(Error::Parameter(
                    "Dirichlet data with a density-weighted constraint".into(),
                ));
            }
            let lift = self.lift(data);
            for (a, b) in f.iter_mut().zip(&lift) {
                *a += b;
            }
            let mut boundary = data.solid.data.clone();
            for (v, &fl) in boundary.iter_mut().zip(&self.mask.face) {
                if fl {
                    *v = 0.0;
                }
            }
            let mut dd = vec![0.0; np];
            crate::grid::ops::div_into(g, Some(&self.mask), &boundary, &mut dd);
            for (a, b) in div_target.iter_mut().zip(&dd) {
                *a -= b;
            }
        }
        // The constraint is only solvable for data with zero net flux.
        let total: f64 = div_target.iter().sum();
        let abs: f64 = div_target.iter().map(|v| v.abs()).sum();
        if total.abs() > 1e-8 * abs.max(f64::MIN_POSITIVE) {
            return Err(Error::Parameter(format!(
                "divergence data has nonzero net flux {:.3e} over the fluid region",
                total * g.cell_volume()
            )));
        }
        self.project_pressure(&mut div_target);
        let mut p0 = vec![0.0; np];
        if let Some(p) = rhs.initial_pressure {
            p.check(g)?;
            p0.copy_from_slice(&p.data);
            self.project_pressure(&mut p0);
        }
        let out = match self.tol.method {
            SaddleMethod::Uzawa => uzawa::solve(self, &f, &div_target, p0)?,
            SaddleMethod::Minres => minres::solve(self, &f, &div_target, p0)?,
        };
        let (mut u, mut p, outer, inner, history) = out;
        let (mres, dres) = self.residuals(&u, &p, &f, &div_target);
        if let Some(data) = rhs.data {
            for (i, &fl) in self.mask.face.iter().enumerate() {
                if !fl {
                    u[i] = data.solid.data[i];
                }
            }
        }
        self.project_pressure(&mut p);
        let diagnostics = StokesDiagnostics {
            method: self.tol.method,
            outer_iterations: outer,
            inner_iterations: inner,
            momentum_residual: mres,
            divergence_residual: dres,
            history,
            seconds: start.elapsed().as_secs_f64(),
        };
        Ok(StokesSolution {
            u: VectorField {
                n: g.n,
                offsets: g.face_offsets(),
                data: u,
            },
            p: ScalarField { n: g.n, data: p },
            momentum_residual: mres,
            divergence_residual: dres,
            iterations: outer,
            diagnostics,
        })
    }

    /// Scale of the constraint residual: max(‖g‖, ‖u‖_A, ℓ‖f‖).
    pub(crate) fn divergence_scale(&self, g: &[f64], u_energy: f64, f_norm: f64) -> f64 {
        let ext = self.grid.domain.extent();
        let ell = ext[0].min(ext[1]).min(ext[2]);
        self.l2(g).max(u_energy).max(ell * f_norm)
    }

    /// Relative (momentum, divergence) residuals of a homogeneous-data iterate.
    pub(crate) fn residuals(&self, u: &[f64], p: &[f64], f: &[f64], g: &[f64]) -> (f64, f64) {
        let mut au = vec![0.0; u.len()];
        self.apply_velocity(u, &mut au);
        let energy = (self.grid.cell_volume() * dot(u, &au)).max(0.0).sqrt();
        let mut gp = vec![0.0; u.len()];
        self.apply_gradient(p, &mut gp);
        for ((a, b), fi) in au.iter_mut().zip(&gp).zip(f) {
            *a = *a + b - fi;
        }
        let fnorm = self.l2(f);
        let mres = if fnorm > 0.0 {
            self.l2(&au) / fnorm
        } else {
            self.l2(&au)
        };
        let mut du = vec![0.0; p.len()];
        self.apply_divergence(u, &mut du);
        for (a, b) in du.iter_mut().zip(g) {
            *a -= b;
        }
        let scale = self.divergence_scale(g, energy, fnorm);
        let dres = if scale > 0.0 {
            self.l2(&du) / scale
        } else {
            self.l2(&du)
        };
        (mres, dres)
    }
}

fn check_spd(r: &[[f64; 3]; 3]) -> Result<()> {
    let m = nalgebra::Matrix3::from_fn(|i, j| r[i][j]);
    if (m - m.transpose()).abs().max() > 1e-12 * m.abs().max() {
        return Err(Error::Parameter("friction tensor is not symmetric".into()));
    }
    let ev = nalgebra::SymmetricEigen::new(m).eigenvalues;
    if ev.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Parameter(format!(
            "friction tensor is not positive definite (eigenvalues {ev:?})"
        )));
    }
    Ok(())
}

/// Solves the incompressible Stokes problem on the perforated box.
pub fn solve_stokes(
    lattice: &PerforationLattice,
    grid: &GridSpec,
    rhs: &VectorField,
    tol: &SolverTolerances,
) -> Result<StokesSolution> {
    let mask = Mask::from_lattice(grid, lattice);
    let sys = StokesSystem::new(
        grid,
        mask,
        Friction::None,
        lattice_drag_coefficient(lattice),
        tol,
    )?;
    sys.solve(&StokesRhs {
        force: Some(rhs),
        ..Default::default()
    })
}

/// Solves −Δu + ρ̄∇π = rhs, div(ρ̄u) = 0 on the perforated box.
pub fn solve_weighted_constraint_stokes(
    lattice: &PerforationLattice,
    grid: &GridSpec,
    rho: &ScalarField,
    rhs: &VectorField,
    tol: &SolverTolerances,
) -> Result<StokesSolution> {
    let mask = Mask::from_lattice(grid, lattice);
    let mut sys = StokesSystem::new(
        grid,
        mask,
        Friction::None,
        lattice_drag_coefficient(lattice),
        tol,
    )?;
    sys.set_density(rho)?;
    sys.solve(&StokesRhs {
        force: Some(rhs),
        ..Default::default()
    })
}

/// Discrete Dirichlet pairing of two velocity fields that carry their
/// boundary data on solid faces; `outer_*` are the wall values beyond
/// no-slip box walls. With zero data this is the energy form of −Δ_h.
pub fn dirichlet_pairing(
    grid: &GridSpec,
    mask: &Mask,
    u: &VectorField,
    outer_u: [f64; 3],
    v: &VectorField,
    outer_v: [f64; 3],
) -> Result<f64> {
    u.check(grid)?;
    v.check(grid)?;
    let h = grid.h;
    let mut total = 0.0;
    for c in 0..3 {
        let d = grid.face_dims(c);
        let strides = [1, d[0], d[0] * d[1]];
        for k in 0..d[2] {
            for j in 0..d[1] {
                for i in 0..d[0] {
                    let f = mask.offsets[c] + i + d[0] * (j + d[1] * k);
                    if !mask.face[f] {
                        continue;
                    }
                    let idx = [i, j, k];
                    let links = face_links(grid, mask, c, idx, f);
                    let (uf, vf) = (u.data[f], v.data[f]);
                    for a in 0..3 {
                        for s in 0..2 {
                            let in_box = if s == 0 {
                                idx[a] > 0
                            } else {
                                idx[a] + 1 < d[a]
                            };
                            let nb = if !in_box {
                                usize::MAX
                            } else if s == 0 {
                                f - strides[a]
                            } else {
                                f + strides[a]
                            };
                            match links[2 * a + s] {
                                Link::Fluid if s == 1 => {
                                    total += h * (uf - u.data[nb]) * (vf - v.data[nb])
                                }
                                Link::Fluid | Link::Mirror => {}
                                Link::Ghost if in_box => {
                                    total += 2.0 * h * (uf - u.data[nb]) * (vf - v.data[nb])
                                }
                                Link::Ghost => {
                                    total += 2.0 * h * (uf - outer_u[c]) * (vf - outer_v[c])
                                }
                                Link::Wall => total += h * (uf - u.data[nb]) * (vf - v.data[nb]),
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(total)
}
