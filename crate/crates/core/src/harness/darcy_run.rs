use serde::{Deserialize, Serialize};

use super::ladder::EpsLadder;
use super::report::{ConvergenceReport, PointRecord, Progress};
use crate::cellproblem::ResistanceMatrix;
use crate::compressible::{density_deviation, energy_audit, solve_steady, CompressibleParams, PicardOptions};
use crate::darcy::solve_darcy;
use crate::error::{Error, Result};
use crate::forcing::ForcingSpec;
use crate::geometry::{DomainSpec, PerforationLattice, ReferenceShape};
use crate::grid::{GridSpec, ScalarField, VectorField, WallKind};
use crate::stokes::{solve_stokes, SolverTolerances};
use crate::vec3::Vec3;

/// Part of the box actually discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    Full,
    /// Lower octant with free-slip mirror planes through the box centre;
    /// valid for mirror-symmetric shapes and forcing.
    Octant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowMode {
    Incompressible,
    Compressible,
}

#[derive(Debug, Clone)]
pub struct DarcyRun {
    pub domain: DomainSpec,
    pub reduction: Reduction,
    pub shape: ReferenceShape,
    pub resistance: ResistanceMatrix,
    pub forcing: ForcingSpec,
    /// Total mass; the limit density is ρ₀ = m₀/|Ω|.
    pub m0: f64,
    pub mode: FlowMode,
    pub stokes: SolverTolerances,
    pub picard: PicardOptions,
    /// Relative CG tolerance of the Darcy pressure solve.
    pub darcy_tol: f64,
    pub workers: usize,
}

impl DarcyRun {
    pub fn rho0(&self) -> f64 {
        self.m0 / self.domain.volume()
    }

    /// Computational box and its wall kinds.
    pub fn computational_grid(&self, h: f64, ladder: &EpsLadder) -> Result<GridSpec> {
        match self.reduction {
            Reduction::Full => ladder.rule.grid(self.domain, h),
            Reduction::Octant => {
                let mid = [0, 1, 2].map(|d| 0.5 * (self.domain.min[d] + self.domain.max[d]));
                let g = ladder.rule.grid(DomainSpec::new(self.domain.min, mid)?, h)?;
                Ok(g.with_walls([[WallKind::NoSlip, WallKind::FreeSlip]; 3]))
            }
        }
    }

    /// |Ω| over the volume of the computational box.
    fn multiplicity(&self) -> f64 {
        match self.reduction {
            Reduction::Full => 1.0,
            Reduction::Octant => 8.0,
        }
    }

    fn check_symmetry(&self) -> Result<()> {
        if self.reduction == Reduction::Full {
            return Ok(());
        }
        if !self.shape.is_reflection_symmetric() {
            return Err(Error::Parameter("octant reduction needs a reflection-symmetric shape".into()));
        }
        let (lo, hi) = (self.domain.min, self.domain.max);
        let ext = self.domain.extent();
        let probes: [Vec3; 3] = [[0.13, 0.37, 0.71], [0.29, 0.61, 0.17], [0.43, 0.11, 0.53]];
        for t in probes {
            let x: Vec3 = [0, 1, 2].map(|d| lo[d] + t[d] * ext[d]);
            for a in 0..3 {
                let mut y = x;
                y[a] = lo[a] + hi[a] - x[a];
                for preset in [&self.forcing.f, &self.forcing.g] {
                    let (u, v) = (preset.eval(x), preset.eval(y));
                    let scale = u.iter().chain(&v).fold(1e-300f64, |m, w| m.max(w.abs()));
                    for c in 0..3 {
                        let mirrored = if c == a { -v[c] } else { v[c] };
                        if (u[c] - mirrored).abs() > 1e-10 * scale {
                            return Err(Error::Parameter(format!(
                                "forcing {} is not mirror-symmetric about the mid-plane of axis {a}",
                                preset.kind()
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self, ladder: &EpsLadder) -> Result<()> {
        ladder.validate()?;
        if !(self.m0 > 0.0 && self.m0.is_finite()) {
            return Err(Error::Parameter(format!("mass must be positive, got {}", self.m0)));
        }
        self.stokes.validate()?;
        self.check_symmetry()
    }
}

/// Distance from `x` to the nearest wall of `domain`.
fn wall_distance(domain: &DomainSpec, x: Vec3) -> f64 {
    (0..3).map(|d| (x[d] - domain.min[d]).min(domain.max[d] - x[d])).fold(f64::INFINITY, f64::min)
}

/// Face indicator of the region at least `collar` away from the walls of `domain`.
fn interior_faces(grid: &GridSpec, domain: &DomainSpec, collar: f64) -> Vec<bool> {
    let mut keep = vec![false; grid.face_offsets()[3]];
    let off = grid.face_offsets();
    for c in 0..3 {
        let d = grid.face_dims(c);
        for k in 0..d[2] {
            for j in 0..d[1] {
                for i in 0..d[0] {
                    keep[off[c] + i + d[0] * (j + d[1] * k)] = wall_distance(domain, grid.face_center(c, i, j, k)) >= collar;
                }
            }
        }
    }
    keep
}

fn masked_l2(v: &[f64], keep: &[bool], h3: f64) -> f64 {
    (h3 * v.iter().zip(keep).filter(|(_, &k)| k).map(|(x, _)| x * x).sum::<f64>()).sqrt()
}

/// Collar-excluded error of ũ/σ² against `darcy`; absolute when the Darcy
/// velocity vanishes there.
pub fn rescaled_error(u: &VectorField, darcy: &VectorField, sigma: f64, keep: &[bool], h3: f64) -> (f64, &'static str) {
    let s2 = sigma * sigma;
    let diff: Vec<f64> = u.data.iter().zip(&darcy.data).map(|(a, b)| a / s2 - b).collect();
    let num = masked_l2(&diff, keep, h3);
    let den = masked_l2(&darcy.data, keep, h3);
    let scale = masked_l2(&u.data, keep, h3) / s2;
    if den > 1e-10 * scale.max(f64::MIN_POSITIVE) && den > 0.0 {
        (num / den, "relative")
    } else {
        (num, "absolute")
    }
}

fn run_point(run: &DarcyRun, ladder: &EpsLadder, eps: f64) -> Result<(PointRecord, serde_json::Value)> {
    let h = ladder.spacing(eps, run.shape.as_ref());
    let grid = run.computational_grid(h, ladder)?;
    let lattice = PerforationLattice::build(run.domain, eps, ladder.alpha, run.shape.clone())?;
    let sigma = lattice.sigma();
    let rho0 = run.rho0();
    let darcy = solve_darcy(&grid, &run.resistance, rho0, &run.forcing, run.darcy_tol)?;
    let collar = (2.0 * eps).max(4.0 * h);
    let keep = interior_faces(&grid, &run.domain, collar);
    let h3 = grid.cell_volume() * run.multiplicity();
    let mut rec = PointRecord { eps, sigma, h, n: grid.n, ..Default::default() };
    let diagnostics;
    let u = match run.mode {
        FlowMode::Incompressible => {
            let rhs = crate::darcy::sample_total(&grid, &run.forcing, rho0);
            let sol = solve_stokes(&lattice, &grid, &rhs, &run.stokes)?;
            let mut keep_cells = vec![false; grid.cell_count()];
            for k in 0..grid.n[2] {
                for j in 0..grid.n[1] {
                    for i in 0..grid.n[0] {
                        keep_cells[grid.cell_index(i, j, k)] = wall_distance(&run.domain, grid.cell_center(i, j, k)) >= collar;
                    }
                }
            }
            rec.p_proxy = Some(pressure_gap(&sol.p, &darcy.p, &keep_cells, h3));
            diagnostics = serde_json::json!({
                "eps": eps,
                "stokes_iterations": sol.iterations,
                "momentum_residual": sol.momentum_residual,
                "divergence_residual": sol.divergence_residual,
                "darcy_iterations": darcy.iterations,
            });
            sol.u
        }
        FlowMode::Compressible => {
            let params = CompressibleParams {
                gamma: ladder.gamma,
                beta: ladder.beta,
                m0: run.m0 / run.multiplicity(),
                eps,
                alpha: ladder.alpha,
            };
            let state = solve_steady(&lattice, &grid, &run.forcing, params, &run.picard)?;
            let q = 2.0 * ladder.gamma;
            let dev = density_deviation(&state, &grid) * run.multiplicity().powf(1.0 / q);
            rec.density_deviation = Some(dev * eps.powf(-ladder.beta / ladder.gamma));
            let p = crate::compressible::pressure(&state, &grid);
            rec.p_proxy = Some(p.norm(&grid, None, 2.0)? * run.multiplicity().sqrt());
            let (lhs, work) = energy_audit(&state, &grid, &run.forcing)?;
            let scale = lhs.abs().max(work.abs());
            rec.energy_gap = Some(if scale > 0.0 { (lhs - work) / scale } else { 0.0 });
            rec.mass_defect = Some(state.telemetry.iter().map(|s| s.mass_defect).fold(0.0, f64::max));
            rec.picard_iterations = Some(state.iterations);
            rec.degenerate = Some(state.degenerate);
            diagnostics = serde_json::json!({
                "eps": eps,
                "picard": state.telemetry,
                "warnings": state.warnings,
                "darcy_iterations": darcy.iterations,
            });
            state.u
        }
    };
    let (err, kind) = rescaled_error(&u, &darcy.u, sigma, &keep, h3);
    rec.u_error = Some(err);
    rec.u_error_kind = Some(kind.into());
    rec.u_rescaled_l2 = Some(u.norm(&grid, None, 2.0)? * run.multiplicity().sqrt() / (sigma * sigma));
    Ok((rec, diagnostics))
}

/// ‖p̃ − p_D‖₂ over collar-excluded cells after matching the means there.
fn pressure_gap(p: &ScalarField, pd: &ScalarField, keep: &[bool], h3: f64) -> f64 {
    let n = keep.iter().filter(|&&k| k).count();
    if n == 0 {
        return 0.0;
    }
    let shift = p.data.iter().zip(&pd.data).zip(keep).filter(|(_, &k)| k).map(|((a, b), _)| a - b).sum::<f64>() / n as f64;
    let d: Vec<f64> = p.data.iter().zip(&pd.data).map(|(a, b)| a - b - shift).collect();
    (h3 * d.iter().zip(keep).filter(|(_, &k)| k).map(|(x, _)| x * x).sum::<f64>()).sqrt()
}

/// Runs every ladder point and compares the rescaled velocity with the
/// Darcy velocity away from the walls.
pub fn run_darcy_convergence(ladder: &EpsLadder, run: &DarcyRun, progress: Option<Progress>) -> Result<ConvergenceReport> {
    run.validate(ladder)?;
    let kind = match run.mode {
        FlowMode::Incompressible => "darcy-incompressible",
        FlowMode::Compressible => "darcy-compressible",
    };
    let mut report = ConvergenceReport::new(kind, ladder, run.workers);
    report.diagnostics = report.run_ladder(run.workers, progress, |eps| run_point(run, ladder, eps));
    report.notes.push("boundary collar of width max(2 eps, 4 h) excluded from velocity and pressure comparisons".into());
    if run.reduction == Reduction::Octant {
        report.notes.push("solved on the lower octant with mirror planes; norms rescaled to the full box".into());
    }
    if run.forcing.is_zero() {
        report.notes.push("zero forcing: all fields vanish".into());
    }
    report.fit("u_error", None, |r| r.u_error.filter(|&v| v > 0.0));
    if run.mode == FlowMode::Compressible {
        report.fit("density_deviation", Some(0.0), |r| r.density_deviation.filter(|&v| v > 0.0));
        report.fit("u_rescaled_l2", Some(0.0), |r| r.u_rescaled_l2.filter(|&v| v > 0.0));
        if !report.beta_check.satisfied {
            report.notes.push(format!(
                "beta = {} does not exceed the threshold {}",
                report.beta_check.beta, report.beta_check.threshold
            ));
        }
    }
    Ok(report)
}
