//! Steady barotropic compressible Stokes flow at low Mach number:
//!
//! ```text
//!   −Δu + ε^{−β} ∇ρ^γ = ρ f + g,   div(ρ u) = 0,   ∫ρ = m₀,
//! ```
//!
//! solved by damped Picard iteration. The pressure term is written in
//! enthalpy form ε^{−β}∇ρ^γ = ρ ∇π with π = ε^{−β} h(ρ), h the specific
//! enthalpy, so each step is a weighted-constraint Stokes solve whose
//! gradient and divergence are adjoint; ρ is then recovered from π with the
//! additive constant fixed by the mass.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forcing::{sample_faces, ForcingSpec};
use crate::geometry::PerforationLattice;
use crate::grid::ops::div_into;
use crate::grid::{GridSpec, Mask, ScalarField, VectorField};
use crate::stokes::{dirichlet_pairing, lattice_drag_coefficient, Friction, SolverTolerances, StokesRhs, StokesSystem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompressibleParams {
    pub gamma: f64,
    pub beta: f64,
    pub m0: f64,
    pub eps: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PicardOptions {
    /// Damping of the density update.
    pub theta: f64,
    /// Bound on the density change, relative to the mean density.
    pub tol: f64,
    pub max_iter: usize,
    /// Window over which the density change must improve.
    pub stagnation_window: usize,
    pub stokes: SolverTolerances,
}

impl Default for PicardOptions {
    fn default() -> Self {
        Self { theta: 0.5, tol: 1e-8, max_iter: 400, stagnation_window: 50, stokes: SolverTolerances::default() }
    }
}

/// One row of per-iteration telemetry.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PicardStep {
    pub n: usize,
    pub momentum_residual: f64,
    pub constraint_residual: f64,
    pub density_delta: f64,
    pub clipped_fraction: f64,
    /// Relative deviation of ∫ρ from m₀ after the update.
    pub mass_defect: f64,
}

#[derive(Debug, Clone)]
pub struct CompressibleState {
    pub rho: ScalarField,
    pub u: VectorField,
    pub p_eps: ScalarField,
    /// Internal enthalpy potential π of the last step.
    pub pi: ScalarField,
    pub params: CompressibleParams,
    pub iterations: usize,
    pub telemetry: Vec<PicardStep>,
    /// Density was clipped at zero at convergence.
    pub degenerate: bool,
    pub warnings: Vec<String>,
    pub mask: Mask,
}

/// Inverse of the specific enthalpy h(ρ) = γ/(γ−1)·ρ^{γ−1} (ln ρ for γ = 1).
#[derive(Debug, Clone, Copy)]
struct Enthalpy {
    gamma: f64,
}

impl Enthalpy {
    /// Density for enthalpy s; zero when s lies below the range of h.
    fn inverse(&self, s: f64) -> f64 {
        if self.gamma == 1.0 {
            s.exp()
        } else if s <= 0.0 {
            0.0
        } else {
            ((self.gamma - 1.0) / self.gamma * s).powf(1.0 / (self.gamma - 1.0))
        }
    }
}

/// Threshold (3/2)(γ+1)(α−1) that β must exceed.
pub fn beta_threshold(gamma: f64, alpha: f64) -> f64 {
    1.5 * (gamma + 1.0) * (alpha - 1.0)
}

fn validate(p: &CompressibleParams) -> Result<Vec<String>> {
    if !(p.gamma >= 1.0 && p.gamma.is_finite()) {
        return Err(Error::Parameter(format!("gamma must be at least 1, got {}", p.gamma)));
    }
    if !(p.m0 > 0.0 && p.m0.is_finite()) {
        return Err(Error::Parameter(format!("mass must be positive, got {}", p.m0)));
    }
    if !(p.beta.is_finite() && p.eps > 0.0 && p.eps <= 1.0) {
        return Err(Error::Parameter("beta must be finite and eps in (0, 1]".into()));
    }
    let mut warnings = Vec::new();
    let t = beta_threshold(p.gamma, p.alpha);
    if p.beta <= t {
        warnings.push(format!("beta = {} does not exceed (3/2)(γ+1)(α−1) = {t}", p.beta));
    }
    Ok(warnings)
}

/// Mean of the two adjacent cell values on every interior face; zero on
/// box-boundary faces.
pub fn face_average(grid: &GridSpec, rho: &ScalarField) -> Vec<f64> {
    let n = grid.n;
    let off = grid.face_offsets();
    let mut w = vec![0.0; off[3]];
    for c in 0..3 {
        let d = grid.face_dims(c);
        let cs = [1, n[0], n[0] * n[1]][c];
        for k in 0..d[2] {
            for j in 0..d[1] {
                for i in 0..d[0] {
                    let idx = [i, j, k];
                    if idx[c] == 0 || idx[c] == n[c] {
                        continue;
                    }
                    let hi = grid.cell_index(i, j, k);
                    w[off[c] + i + d[0] * (j + d[1] * k)] = 0.5 * (rho.data[hi] + rho.data[hi - cs]);
                }
            }
        }
    }
    w
}

fn fluid_integral(grid: &GridSpec, mask: &Mask, v: &[f64]) -> f64 {
    grid.cell_volume() * v.iter().zip(&mask.cell).filter(|(_, &f)| f).map(|(x, _)| x).sum::<f64>()
}

/// Density from the potential π with the enthalpy constant chosen so the
/// mass is m₀. Returns the density and the clipped fraction of fluid cells.
fn recover_density(grid: &GridSpec, mask: &Mask, pi: &[f64], params: &CompressibleParams) -> Result<(Vec<f64>, f64)> {
    let en = Enthalpy { gamma: params.gamma };
    let scale = params.eps.powf(params.beta);
    let fluid: Vec<usize> = (0..pi.len()).filter(|&i| mask.cell[i]).collect();
    let s: Vec<f64> = fluid.iter().map(|&i| scale * pi[i]).collect();
    let h3 = grid.cell_volume();
    let mass = |c: f64| h3 * s.iter().map(|&si| en.inverse(si + c)).sum::<f64>();
    let c = if params.gamma == 1.0 {
        let top = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let m = mass(-top);
        m0_log(params.m0, m) - top
    } else {
        // mass(c) is continuous and nondecreasing; bracket then bisect.
        let smax = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut lo = -smax;
        let mut hi = -smax + 1.0;
        while mass(hi) < params.m0 {
            hi = -smax + 2.0 * (hi + smax);
            if !hi.is_finite() {
                return Err(Error::Parameter("mass constraint cannot be met".into()));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if mass(mid) < params.m0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let mut rho = vec![0.0; pi.len()];
    let mut clipped = 0usize;
    for (&i, &si) in fluid.iter().zip(&s) {
        let r = en.inverse(si + c);
        if r <= 0.0 {
            clipped += 1;
        }
        rho[i] = r;
    }
    let total = fluid_integral(grid, mask, &rho);
    if !(total > 0.0) {
        return Err(Error::Parameter("density vanished on the whole fluid region".into()));
    }
    rho.iter_mut().for_each(|r| *r *= params.m0 / total);
    Ok((rho, clipped as f64 / fluid.len().max(1) as f64))
}

/// For γ = 1 the mass is exp(c)·M(0), so the constant is explicit.
fn m0_log(m0: f64, base_mass: f64) -> f64 {
    (m0 / base_mass).ln()
}

/// Densities below this fraction of the mean are floored in the constraint
/// weight, which must stay positive.
const WEIGHT_FLOOR: f64 = 1e-10;

fn weight_of(mask: &Mask, rho: &[f64], mean: f64) -> ScalarField {
    let data = rho
        .iter()
        .zip(&mask.cell)
        .map(|(&r, &f)| if f { r.max(WEIGHT_FLOOR * mean) } else { 0.0 })
        .collect();
    ScalarField { n: mask.n, data }
}

fn momentum_rhs(grid: &GridSpec, rho: &ScalarField, f: &VectorField, g: &VectorField, mask: &Mask) -> VectorField {
    let w = face_average(grid, rho);
    let mut out = VectorField::zeros(grid);
    for i in 0..out.data.len() {
        if mask.face[i] {
            out.data[i] = w[i] * f.data[i] + g.data[i];
        }
    }
    out
}

/// Damped Picard iteration for the steady compressible system.
pub fn solve_steady(
    lattice: &PerforationLattice,
    grid: &GridSpec,
    forcing: &ForcingSpec,
    params: CompressibleParams,
    opts: &PicardOptions,
) -> Result<CompressibleState> {
    let mut warnings = validate(&params)?;
    if !(opts.theta > 0.0 && opts.theta <= 1.0) {
        return Err(Error::Parameter(format!("damping must lie in (0, 1], got {}", opts.theta)));
    }
    let mask = Mask::from_lattice(grid, lattice);
    let mut sys = StokesSystem::new(grid, mask.clone(), Friction::None, lattice_drag_coefficient(lattice), &opts.stokes)?;
    let volume = grid.cell_volume() * mask.fluid_cells() as f64;
    let mean = params.m0 / volume;
    let mut rho: Vec<f64> = mask.cell.iter().map(|&f| if f { mean } else { 0.0 }).collect();
    let fs = sample_faces(grid, forcing.f.as_ref());
    let gs = sample_faces(grid, forcing.g.as_ref());
    let mut telemetry = Vec::new();
    let mut pi = ScalarField::zeros(grid);
    let mut best = f64::INFINITY;
    let mut best_at = 0usize;
    for n in 1..=opts.max_iter {
        let weight = weight_of(&mask, &rho, mean);
        sys.set_density(&weight)?;
        let rhs = momentum_rhs(grid, &weight, &fs, &gs, &mask);
        let sol = sys.solve(&StokesRhs { force: Some(&rhs), initial_pressure: Some(&pi), ..Default::default() })?;
        pi = sol.p;
        let (rho_hat, clipped) = recover_density(grid, &mask, &pi.data, &params)?;
        let next: Vec<f64> = rho.iter().zip(&rho_hat).map(|(a, b)| (1.0 - opts.theta) * a + opts.theta * b).collect();
        let delta = next.iter().zip(&rho).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / mean;
        rho = next;
        let total = fluid_integral(grid, &mask, &rho);
        rho.iter_mut().for_each(|r| *r *= params.m0 / total);
        let mass_defect = (fluid_integral(grid, &mask, &rho) - params.m0).abs() / params.m0;
        // Residuals of the current (u, π) against the updated density.
        let weight = weight_of(&mask, &rho, mean);
        sys.set_density(&weight)?;
        let rhs = momentum_rhs(grid, &weight, &fs, &gs, &mask);
        let (mres, cres) = sys.residuals(&sol.u.data, &pi.data, &rhs.data, &vec![0.0; pi.data.len()]);
        telemetry.push(PicardStep {
            n,
            momentum_residual: mres,
            constraint_residual: cres,
            density_delta: delta,
            clipped_fraction: clipped,
            mass_defect,
        });
        let done = delta <= opts.tol && mres <= opts.tol.max(opts.stokes.momentum) && cres <= opts.tol.max(opts.stokes.divergence);
        if done || forcing.is_zero() {
            let degenerate = clipped > 0.0;
            if degenerate {
                warnings.push(format!("density clipped at zero on {:.3}% of fluid cells", 100.0 * clipped));
            }
            let rho = ScalarField { n: grid.n, data: rho };
            let p_eps = pressure_of(grid, &mask, &rho, &params);
            return Ok(CompressibleState {
                rho,
                u: sol.u,
                p_eps,
                pi,
                params,
                iterations: n,
                telemetry,
                degenerate,
                warnings,
                mask,
            });
        }
        if delta < 0.9 * best {
            best = delta;
            best_at = n;
        } else if n - best_at >= opts.stagnation_window {
            let history = telemetry.iter().map(|s| s.density_delta).collect();
            return Err(Error::convergence("Picard iteration (stagnated)", history));
        }
    }
    let history = telemetry.iter().map(|s| s.density_delta).collect();
    Err(Error::convergence("Picard iteration", history))
}

fn pressure_of(grid: &GridSpec, mask: &Mask, rho: &ScalarField, params: &CompressibleParams) -> ScalarField {
    let pow: Vec<f64> = rho.data.iter().zip(&mask.cell).map(|(r, &f)| if f { r.powf(params.gamma) } else { 0.0 }).collect();
    let volume = grid.cell_volume() * mask.fluid_cells() as f64;
    let mean = fluid_integral(grid, mask, &pow) / volume;
    let scale = params.eps.powf(-params.beta);
    let data = pow.iter().zip(&mask.cell).map(|(p, &f)| if f { scale * (p - mean) } else { 0.0 }).collect();
    ScalarField { n: grid.n, data }
}

/// p_ε = ε^{−β}(ρ^γ − ⟨ρ^γ⟩_ε), zero-extended.
pub fn pressure(state: &CompressibleState, grid: &GridSpec) -> ScalarField {
    pressure_of(grid, &state.mask, &state.rho, &state.params)
}

/// ‖div_h(ρ̃ũ)‖₂ over the whole box with ρ̃, ũ extended by zero.
pub fn mass_flux_audit(state: &CompressibleState, lattice: &PerforationLattice, grid: &GridSpec) -> Result<f64> {
    let mask = Mask::from_lattice(grid, lattice);
    if mask != state.mask {
        return Err(Error::Shape("state was computed on a different lattice or grid".into()));
    }
    let mut rho = state.rho.clone();
    mask.zero_solid_scalar(&mut rho);
    let w = face_average(grid, &rho);
    let mut flux = vec![0.0; w.len()];
    for i in 0..w.len() {
        if mask.face[i] {
            flux[i] = w[i] * state.u.data[i];
        }
    }
    let mut d = vec![0.0; grid.cell_count()];
    div_into(grid, None, &flux, &mut d);
    Ok((grid.cell_volume() * d.iter().map(|x| x * x).sum::<f64>()).sqrt())
}

/// Both sides of the discrete energy inequality ∫|∇u|² ≤ ∫(ρf + g)·u.
pub fn energy_audit(state: &CompressibleState, grid: &GridSpec, forcing: &ForcingSpec) -> Result<(f64, f64)> {
    let lhs = dirichlet_pairing(grid, &state.mask, &state.u, [0.0; 3], &state.u, [0.0; 3])?;
    let fs = sample_faces(grid, forcing.f.as_ref());
    let gs = sample_faces(grid, forcing.g.as_ref());
    let rhs = momentum_rhs(grid, &state.rho, &fs, &gs, &state.mask);
    let work = grid.cell_volume() * rhs.data.iter().zip(&state.u.data).map(|(a, b)| a * b).sum::<f64>();
    Ok((lhs, work))
}

/// ‖ρ − ⟨ρ⟩_ε‖ in L^{2γ}(Ω_ε).
pub fn density_deviation(state: &CompressibleState, grid: &GridSpec) -> f64 {
    let mask = &state.mask;
    let volume = grid.cell_volume() * mask.fluid_cells() as f64;
    let mean = fluid_integral(grid, mask, &state.rho.data) / volume;
    let q = 2.0 * state.params.gamma;
    let s: f64 = state.rho.data.iter().zip(&mask.cell).filter(|(_, &f)| f).map(|(r, _)| (r - mean).abs().powf(q)).sum();
    (grid.cell_volume() * s).powf(1.0 / q)
}
