use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ladder::EpsLadder;
use super::report::{ConvergenceReport, PointRecord, Progress};
use crate::cellproblem::{CellField, ResistanceMatrix};
use crate::darcy::{sample_total, solve_darcy};
use crate::error::{Error, Result};
use crate::forcing::ForcingSpec;
use crate::functional::{smooth_probe, BogovskiiOperator};
use crate::geometry::{DomainSpec, PerforationLattice, ReferenceShape};
use crate::grid::{sample_scalar, GridSpec, ScalarField, VectorField};
use crate::stokes::{solve_stokes, SolverTolerances};
use crate::testfn::{build_testfn, h4_pairing, integrate};
use crate::vec3::Vec3;

/// Sequences ν_ε the pairing is tested against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum NuFamily {
    /// ν ≡ 0.
    Zero,
    /// ũ_ε/σ² for the incompressible Stokes flow driven by the run forcing;
    /// the weak limit is the Darcy velocity.
    RescaledStokes,
    /// ν = w_j^ε, with weak limit e_j.
    TestfnW { j: usize },
    /// ν = B f for a seeded smooth f. Its weak limit is not known in closed
    /// form, so the target is ∫φ R e_k·ν_ε, which has the same limit.
    BogovskiiProbe { seed: u64 },
}

pub type Bump = Arc<dyn Fn(Vec3) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct H4Options {
    pub domain: DomainSpec,
    pub shape: ReferenceShape,
    /// Cell solutions by direction; must contain direction `k` and, for
    /// the w_j family, direction j.
    pub cells: Vec<Arc<dyn CellField>>,
    pub k: usize,
    pub resistance: ResistanceMatrix,
    pub phi: Bump,
    /// Multiplies ν.
    pub nu_scale: f64,
    /// Forcing of the rescaled-Stokes family.
    pub forcing: ForcingSpec,
    pub stokes: SolverTolerances,
    pub darcy_tol: f64,
    pub workers: usize,
}

impl H4Options {
    /// φ = Π sin²(π(x_d − min_d)/L_d), vanishing with its gradient on the walls.
    pub fn sine_bump(domain: DomainSpec) -> Bump {
        Arc::new(move |x: Vec3| {
            let ext = domain.extent();
            (0..3).map(|d| (std::f64::consts::PI * (x[d] - domain.min[d]) / ext[d]).sin().powi(2)).product()
        })
    }

    fn cell(&self, dir: usize) -> Result<&dyn CellField> {
        self.cells
            .iter()
            .find(|c| c.direction() == dir)
            .map(|c| c.as_ref())
            .ok_or_else(|| Error::Parameter(format!("no cell solution for direction {dir}")))
    }
}

/// ∫φ v·a over the box, with v on faces and φ, a sampled at face centres.
fn weighted_flux(grid: &GridSpec, phi: &ScalarField, v: &VectorField, a: Vec3) -> f64 {
    let off = grid.face_offsets();
    let mut s = 0.0;
    for c in 0..3 {
        if a[c] == 0.0 {
            continue;
        }
        let d = grid.face_dims(c);
        for kk in 0..d[2] {
            for j in 0..d[1] {
                for i in 0..d[0] {
                    let f = off[c] + i + d[0] * (j + d[1] * kk);
                    if v.data[f] != 0.0 {
                        s += a[c] * v.data[f] * sample_scalar(grid, phi, grid.face_center(c, i, j, kk));
                    }
                }
            }
        }
    }
    s * grid.cell_volume()
}

fn h4_point(ladder: &EpsLadder, family: NuFamily, opts: &H4Options, eps: f64) -> Result<PointRecord> {
    let h = ladder.spacing(eps, opts.shape.as_ref());
    let grid = ladder.rule.grid(opts.domain, h)?;
    let lattice = PerforationLattice::build(opts.domain, eps, ladder.alpha, opts.shape.clone())?;
    let sigma = lattice.sigma();
    let tf = build_testfn(&lattice, &grid, opts.k, opts.cell(opts.k)?, &opts.stokes)?;
    let phi = ScalarField::from_fn(&grid, |x| (opts.phi)(x));
    let r = opts.resistance.r;
    let rek: Vec3 = [r[0][opts.k], r[1][opts.k], r[2][opts.k]];
    let (mut nu, target) = match family {
        NuFamily::Zero => (VectorField::zeros(&grid), 0.0),
        NuFamily::TestfnW { j } => {
            if j > 2 {
                return Err(Error::Parameter(format!("direction {j} out of range")));
            }
            let w = if j == opts.k { tf.w.clone() } else { build_testfn(&lattice, &grid, j, opts.cell(j)?, &opts.stokes)?.w };
            (w, r[opts.k][j] * integrate(&grid, &phi))
        }
        NuFamily::RescaledStokes => {
            let rhs = sample_total(&grid, &opts.forcing, 1.0);
            let mut u = solve_stokes(&lattice, &grid, &rhs, &opts.stokes)?.u;
            u.data.iter_mut().for_each(|v| *v /= sigma * sigma);
            let darcy = solve_darcy(&grid, &opts.resistance, 1.0, &opts.forcing, opts.darcy_tol)?;
            let t = weighted_flux(&grid, &phi, &darcy.u, rek);
            (u, t)
        }
        NuFamily::BogovskiiProbe { seed } => {
            let op = BogovskiiOperator::new(&lattice, &grid, &opts.stokes)?;
            let v = op.apply(&smooth_probe(&grid, 3, seed))?.v;
            let t = weighted_flux(&grid, &phi, &v, rek);
            (v, t)
        }
    };
    nu.data.iter_mut().for_each(|v| *v *= opts.nu_scale);
    let target = target * opts.nu_scale;
    let pairing = h4_pairing(&tf, &phi, &nu)?;
    let scale = pairing.abs().max(target.abs());
    let gap = if target.abs() > 1e-12 * scale && target != 0.0 {
        (pairing - target).abs() / target.abs()
    } else {
        (pairing - target).abs()
    };
    Ok(PointRecord {
        eps,
        sigma,
        h,
        n: grid.n,
        h4_pairing: Some(pairing),
        h4_target: Some(target),
        h4_gap: Some(gap),
        ..Default::default()
    })
}

/// σ²⟨∇q_k − Δw_k, φν_ε⟩ against ∫φ R e_k·ν per ladder point. The gap is
/// relative to the target, absolute when the target vanishes.
pub fn h4_experiment(ladder: &EpsLadder, family: NuFamily, opts: &H4Options, progress: Option<Progress>) -> Result<ConvergenceReport> {
    ladder.validate()?;
    opts.stokes.validate()?;
    if opts.k > 2 {
        return Err(Error::Parameter(format!("direction {} out of range", opts.k)));
    }
    let mut report = ConvergenceReport::new("h4", ladder, opts.workers);
    report.run_ladder(opts.workers, progress, |eps| Ok((h4_point(ladder, family, opts, eps)?, serde_json::Value::Null)));
    report.notes.push(format!("nu family: {family:?}; checked on sampled families only"));
    report.fit("h4_gap", None, |r| r.h4_gap.filter(|&g| g > 0.0));
    Ok(report)
}
