//! Functional-analytic constants of the perforated domain: a discrete
//! Bogovskiĭ operator (right inverse of the divergence), the Poincaré
//! constant and two scalar power-equivalence utilities.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::PerforationLattice;
use crate::grid::{div, GridSpec, Mask, ScalarDirichletLaplacian, ScalarField, VectorField, WallKind};
use crate::linalg::{dot, pcg, CgOptions, LinearOperator, Preconditioner, SpectralScalarPrecond};
use crate::stokes::{dirichlet_pairing, lattice_drag_coefficient, Friction, SolverTolerances, StokesRhs, StokesSystem};

#[derive(Debug, Clone)]
pub struct BogovskiiResult {
    pub v: VectorField,
    /// ‖div_h v − (f − ⟨f⟩)‖₂ / ‖f − ⟨f⟩‖₂ over fluid cells.
    pub residual: f64,
    /// ‖∇_h v‖₂ with v = 0 on solids and walls.
    pub h1_norm: f64,
    /// Mean-removed datum the divergence was matched to.
    pub datum: ScalarField,
    /// Lagrange multiplier of the constraint; equals S⁻¹ datum for the
    /// pressure Schur complement S.
    pub multiplier: ScalarField,
    pub iterations: usize,
}

/// The divergence-data Stokes solve on a fixed lattice and grid, assembled once.
pub struct BogovskiiOperator {
    system: StokesSystem,
}

impl BogovskiiOperator {
    pub fn new(lattice: &PerforationLattice, grid: &GridSpec, tol: &SolverTolerances) -> Result<Self> {
        let mask = Mask::from_lattice(grid, lattice);
        mask.require_connected(grid)?;
        let system = StokesSystem::new(grid, mask, Friction::None, lattice_drag_coefficient(lattice), tol)?;
        Ok(Self { system })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.system.grid
    }

    pub fn mask(&self) -> &Mask {
        &self.system.mask
    }

    /// ‖f‖₂ over fluid cells.
    pub fn l2(&self, f: &ScalarField) -> f64 {
        let h3 = self.system.grid.cell_volume();
        let s: f64 = f.data.iter().zip(&self.system.mask.cell).filter(|(_, &m)| m).map(|(v, _)| v * v).sum();
        (h3 * s).sqrt()
    }

    pub fn apply(&self, f: &ScalarField) -> Result<BogovskiiResult> {
        let grid = &self.system.grid;
        let mask = &self.system.mask;
        f.check(grid)?;
        let mut datum = f.clone();
        mask.zero_solid_scalar(&mut datum);
        mask.remove_mean(&mut datum);
        let fnorm = self.l2(&datum);
        let scale = self.l2(f).max(f64::MIN_POSITIVE);
        if fnorm <= 1e-14 * scale {
            return Ok(BogovskiiResult {
                v: VectorField::zeros(grid),
                residual: 0.0,
                h1_norm: 0.0,
                datum: ScalarField::zeros(grid),
                multiplier: ScalarField::zeros(grid),
                iterations: 0,
            });
        }
        let sol = self.system.solve(&StokesRhs { divergence: Some(&datum), ..Default::default() })?;
        let mut d = div(grid, mask, &sol.u)?;
        for (a, b) in d.data.iter_mut().zip(&datum.data) {
            *a -= b;
        }
        mask.zero_solid_scalar(&mut d);
        let residual = self.l2(&d) / fnorm;
        let energy = dirichlet_pairing(grid, mask, &sol.u, [0.0; 3], &sol.u, [0.0; 3])?;
        Ok(BogovskiiResult {
            v: sol.u,
            residual,
            h1_norm: energy.max(0.0).sqrt(),
            datum,
            multiplier: sol.p,
            iterations: sol.iterations,
        })
    }
}

/// Solves div_h v = f − ⟨f⟩ with v = 0 on solids and the box boundary,
/// choosing the minimal-energy solution.
pub fn bogovskii(f: &ScalarField, lattice: &PerforationLattice, grid: &GridSpec, tol: &SolverTolerances) -> Result<BogovskiiResult> {
    BogovskiiOperator::new(lattice, grid, tol)?.apply(f)
}

/// Lower bound on sup ‖∇B f‖₂/‖f‖₂ from random probes followed by power
/// iteration on B*B.
#[derive(Debug, Clone, Serialize)]
pub struct NormProbe {
    pub estimate: f64,
    pub probe_ratios: Vec<f64>,
    pub power_ratios: Vec<f64>,
    pub solves: usize,
    /// Largest relative divergence residual over all solves.
    pub max_residual: f64,
}

/// Seeded smooth mean-zero probe: random cosine modes of the box up to
/// wavenumber `kmax` per axis with coefficients decaying like 1/(1+|k|²).
pub fn smooth_probe(grid: &GridSpec, kmax: usize, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ext = grid.domain.extent();
    let mut modes = Vec::new();
    for a in 0..=kmax {
        for b in 0..=kmax {
            for c in 0..=kmax {
                if a + b + c == 0 {
                    continue;
                }
                let w = 1.0 / (1.0 + (a * a + b * b + c * c) as f64);
                modes.push(([a, b, c], w * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)));
            }
        }
    }
    let min = grid.domain.min;
    ScalarField::from_fn(grid, |x| {
        modes
            .iter()
            .map(|(k, coef)| {
                let mut v = *coef;
                for d in 0..3 {
                    v *= (std::f64::consts::PI * k[d] as f64 * (x[d] - min[d]) / ext[d]).cos();
                }
                v
            })
            .sum()
    })
}

pub fn bogovskii_norm(op: &BogovskiiOperator, probes: usize, power_steps: usize, seed: u64) -> Result<NormProbe> {
    let mut probe_ratios = Vec::with_capacity(probes);
    let mut best: Option<(f64, ScalarField)> = None;
    let mut solves = 0;
    let mut max_residual = 0.0f64;
    for i in 0..probes {
        let f = smooth_probe(op.grid(), 3, seed.wrapping_add(i as u64));
        let r = op.apply(&f)?;
        solves += 1;
        max_residual = max_residual.max(r.residual);
        let fnorm = op.l2(&r.datum);
        if fnorm == 0.0 {
            continue;
        }
        let ratio = r.h1_norm / fnorm;
        probe_ratios.push(ratio);
        if best.as_ref().map_or(true, |(b, _)| ratio > *b) {
            best = Some((ratio, r.multiplier));
        }
    }
    let (mut estimate, mut next) = best.ok_or_else(|| Error::Parameter("no usable probe".into()))?;
    let mut power_ratios = Vec::with_capacity(power_steps);
    for _ in 0..power_steps {
        let n = op.l2(&next);
        if n == 0.0 {
            break;
        }
        next.data.iter_mut().for_each(|v| *v /= n);
        let r = op.apply(&next)?;
        solves += 1;
        max_residual = max_residual.max(r.residual);
        let ratio = r.h1_norm / op.l2(&r.datum);
        power_ratios.push(ratio);
        estimate = estimate.max(ratio);
        next = r.multiplier;
    }
    Ok(NormProbe { estimate, probe_ratios, power_ratios, solves, max_residual })
}

#[derive(Debug, Clone)]
pub struct PoincareEstimate {
    pub lambda_min: f64,
    /// λ_min^{−1/2}
    pub constant: f64,
    pub iterations: usize,
    pub inner_iterations: usize,
    /// Rayleigh quotient after each outer iteration.
    pub history: Vec<f64>,
    /// Normalized eigenvector estimate (zero on solid cells).
    pub eigenvector: ScalarField,
}

/// Discrete Dirichlet energy ‖∇_h v‖₂² of a cell field, assembled face by
/// face: differences across fluid faces, the jump to the reflected ghost on
/// faces towards solids and no-slip walls, nothing across free-slip walls.
pub fn dirichlet_energy(grid: &GridSpec, mask: &Mask, v: &ScalarField) -> Result<f64> {
    v.check(grid)?;
    mask.check(grid)?;
    let n = grid.n;
    let mut total = 0.0;
    for k in 0..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                let ci = grid.cell_index(i, j, k);
                if !mask.cell[ci] {
                    continue;
                }
                let x = v.data[ci];
                let faces = mask.cell_faces(grid, i, j, k);
                let idx = [i, j, k];
                for a in 0..3 {
                    // Low face: boundary or towards a solid cell.
                    let lo_inside = idx[a] > 0;
                    if !(lo_inside && mask.face[faces[2 * a]]) && (lo_inside || grid.walls[a][0] == WallKind::NoSlip) {
                        total += 2.0 * x * x;
                    }
                    let hi_inside = idx[a] + 1 < n[a];
                    if hi_inside && mask.face[faces[2 * a + 1]] {
                        let mut nb = idx;
                        nb[a] += 1;
                        let y = v.data[grid.cell_index(nb[0], nb[1], nb[2])];
                        total += (x - y) * (x - y);
                    } else if hi_inside || grid.walls[a][1] == WallKind::NoSlip {
                        total += 2.0 * x * x;
                    }
                }
            }
        }
    }
    Ok(total * grid.h)
}

/// Smallest eigenvalue of the masked Dirichlet Laplacian by inverse power
/// iteration with preconditioned CG inner solves. Free-slip box walls act as
/// symmetry planes, so a symmetric domain may be reduced to a fundamental
/// region without changing the ground state.
pub fn poincare_constant(lattice: &PerforationLattice, grid: &GridSpec, tol: f64) -> Result<PoincareEstimate> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::Parameter(format!("tolerance must lie in (0, 1), got {tol}")));
    }
    let mask = Mask::from_lattice(grid, lattice);
    if mask.fluid_cells() == 0 {
        return Err(Error::Geometry("fluid region is empty".into()));
    }
    let op = ScalarDirichletLaplacian::new(grid, &mask);
    let prec = SpectralScalarPrecond::new(grid, &mask, 0.0);
    poincare_iteration(&op, &prec, &mask.cell, tol).map(|(lambda, v, iterations, inner, history)| PoincareEstimate {
        lambda_min: lambda,
        constant: lambda.powf(-0.5),
        iterations,
        inner_iterations: inner,
        history,
        eigenvector: ScalarField { n: grid.n, data: v },
    })
}

const MAX_OUTER: usize = 500;

type Iterate = (f64, Vec<f64>, usize, usize, Vec<f64>);

fn poincare_iteration(op: &dyn LinearOperator, prec: &dyn Preconditioner, fluid: &[bool], tol: f64) -> Result<Iterate> {
    let n = op.len();
    let mut v: Vec<f64> = fluid.iter().map(|&f| if f { 1.0 } else { 0.0 }).collect();
    let normalize = |v: &mut [f64]| {
        let s = dot(v, v).sqrt();
        v.iter_mut().for_each(|x| *x /= s);
    };
    normalize(&mut v);
    let mut av = vec![0.0; n];
    op.apply(&v, &mut av);
    let mut lambda = dot(&v, &av);
    let mut history = vec![lambda];
    let mut inner = 0;
    let opts = CgOptions { rtol: (0.1 * tol).max(1e-13), max_iter: 20_000, ..Default::default() };
    for outer in 1..=MAX_OUTER {
        let mut x: Vec<f64> = v.iter().map(|&vi| vi / lambda).collect();
        let rep = pcg(op, prec, &v, &mut x, &opts, None);
        inner += rep.iterations;
        if !rep.converged {
            return Err(Error::convergence("Poincaré inner solve", rep.history));
        }
        normalize(&mut x);
        op.apply(&x, &mut av);
        let next = dot(&x, &av);
        let res: f64 = av.iter().zip(&x).map(|(a, xi)| (a - next * xi).powi(2)).sum::<f64>().sqrt() / next;
        let change = (lambda - next).abs() / next;
        lambda = next;
        v = x;
        history.push(lambda);
        if change <= tol && res <= tol.sqrt() {
            return Ok((lambda, v, outer, inner, history));
        }
    }
    Err(Error::convergence("Poincaré inverse iteration", history))
}

/// The two sums compared by the mean-power equivalence.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MeanEquiv {
    /// Σ|f^a − ⟨f⟩^a|²
    pub power_of_mean: f64,
    /// Σ|f^a − ⟨f^a⟩|²
    pub mean_of_power: f64,
    /// power_of_mean / mean_of_power; 1 when both vanish.
    pub ratio: f64,
}

/// Compares the deviation of f^a from the a-th power of the mean with its
/// deviation from its own mean, for equally weighted samples.
pub fn gamma_mean_equiv(samples: &[f64], a: f64) -> Result<MeanEquiv> {
    if !(a >= 0.5 && a.is_finite()) {
        return Err(Error::Parameter(format!("exponent must be at least 1/2, got {a}")));
    }
    if samples.is_empty() {
        return Err(Error::Parameter("no samples".into()));
    }
    if let Some(bad) = samples.iter().find(|&&f| !(f >= 0.0) || !f.is_finite()) {
        return Err(Error::Domain(format!("samples must be finite and nonnegative, got {bad}")));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let powers: Vec<f64> = samples.iter().map(|f| f.powf(a)).collect();
    let mean_pow = powers.iter().sum::<f64>() / n;
    let pm = mean.powf(a);
    let power_of_mean: f64 = powers.iter().map(|p| (p - pm).powi(2)).sum();
    let mean_of_power: f64 = powers.iter().map(|p| (p - mean_pow).powi(2)).sum();
    let scale = powers.iter().map(|p| p * p).sum::<f64>().max(f64::MIN_POSITIVE);
    let ratio = if mean_of_power <= 1e-28 * scale { 1.0 } else { power_of_mean / mean_of_power };
    Ok(MeanEquiv { power_of_mean, mean_of_power, ratio })
}

/// Bregman-type remainder of t ↦ t^γ/γ against (a^{γ/2} − b^{γ/2})².
pub fn gamma_bregman_equiv(a: f64, b: f64, gamma: f64) -> Result<(f64, f64)> {
    if !(gamma > 1.0 && gamma.is_finite()) {
        return Err(Error::Parameter(format!("gamma must exceed 1, got {gamma}")));
    }
    if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!("arguments must be finite and nonnegative, got ({a}, {b})")));
    }
    if a == 0.0 && b == 0.0 {
        return Err(Error::Parameter("arguments must not both vanish".into()));
    }
    let lhs = a.powf(gamma) / gamma - b.powf(gamma) / gamma - b.powf(gamma - 1.0) * (a - b);
    let rhs = (a.powf(0.5 * gamma) - b.powf(0.5 * gamma)).powi(2);
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests;
