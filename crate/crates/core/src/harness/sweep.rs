use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ladder::{EpsLadder, ResolutionRule};
use super::report::{ConvergenceReport, PointRecord, Progress, TestfnNorms};
use crate::cellproblem::CellField;
use crate::error::{Error, Result};
use crate::functional::{bogovskii_norm, poincare_constant, BogovskiiOperator};
use crate::geometry::{DomainSpec, PerforationLattice, ReferenceShape};
use crate::grid::{GridSpec, WallKind};
use crate::stokes::SolverTolerances;
use crate::testfn::{audit_norms, build_testfn};

/// Geometry on which the Poincaré constant is measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoincareSetup {
    /// The perforated box with no-slip walls.
    Box,
    /// One periodic cell [−ε, ε]³ around a particle with free-slip faces,
    /// solved on its positive octant.
    LocalCell,
}

/// Geometry on which the Bogovskiĭ norm is probed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum BogovskiiSetup {
    Box,
    /// A row of cells [0, length] × [−ε, ε]² with free-slip faces, solved
    /// on its upper quarter.
    Channel { length: f64 },
}

#[derive(Clone)]
pub struct TestfnAudit {
    pub cell: Arc<dyn CellField>,
    /// Direction of the test function.
    pub k: usize,
}

#[derive(Clone)]
pub struct SweepOptions {
    pub domain: DomainSpec,
    pub shape: ReferenceShape,
    pub poincare: Option<PoincareSetup>,
    /// Resolution of the Poincaré solves; the ladder rule when absent.
    pub poincare_rule: Option<ResolutionRule>,
    pub poincare_tol: f64,
    pub bogovskii: Option<BogovskiiSetup>,
    pub bogovskii_rule: Option<ResolutionRule>,
    pub probes: usize,
    pub power_steps: usize,
    pub seed: u64,
    pub testfn: Option<TestfnAudit>,
    pub stokes: SolverTolerances,
    pub workers: usize,
}

fn with_rule(ladder: &EpsLadder, rule: Option<ResolutionRule>) -> EpsLadder {
    EpsLadder { rule: rule.unwrap_or(ladder.rule), ..ladder.clone() }
}

/// Lattice and free-slip grid of the local cell or channel geometries: the
/// lattice is built on the symmetric box, the grid covers its part with
/// nonnegative transverse coordinates.
fn mirrored(lattice_box: DomainSpec, grid_box: DomainSpec, eps: f64, ladder: &EpsLadder, shape: &ReferenceShape) -> Result<(PerforationLattice, GridSpec)> {
    let lattice = PerforationLattice::build(lattice_box, eps, ladder.alpha, shape.clone())?;
    let h = ladder.spacing(eps, shape.as_ref());
    let grid = ladder.rule.grid(grid_box, h)?.with_walls([[WallKind::FreeSlip; 2]; 3]);
    Ok((lattice, grid))
}

fn poincare_point(opts: &SweepOptions, ladder: &EpsLadder, setup: PoincareSetup, eps: f64) -> Result<f64> {
    let ladder = with_rule(ladder, opts.poincare_rule);
    let (lattice, grid) = match setup {
        PoincareSetup::Box => {
            let lattice = PerforationLattice::build(opts.domain, eps, ladder.alpha, opts.shape.clone())?;
            let grid = ladder.rule.grid(opts.domain, ladder.spacing(eps, opts.shape.as_ref()))?;
            (lattice, grid)
        }
        PoincareSetup::LocalCell => mirrored(
            DomainSpec::new([-eps; 3], [eps; 3])?,
            DomainSpec::new([0.0; 3], [eps; 3])?,
            eps,
            &ladder,
            &opts.shape,
        )?,
    };
    Ok(poincare_constant(&lattice, &grid, opts.poincare_tol)?.constant)
}

fn bogovskii_point(opts: &SweepOptions, ladder: &EpsLadder, setup: BogovskiiSetup, eps: f64) -> Result<(f64, f64)> {
    let ladder = with_rule(ladder, opts.bogovskii_rule);
    let (lattice, grid) = match setup {
        BogovskiiSetup::Box => {
            let lattice = PerforationLattice::build(opts.domain, eps, ladder.alpha, opts.shape.clone())?;
            let grid = ladder.rule.grid(opts.domain, ladder.spacing(eps, opts.shape.as_ref()))?;
            (lattice, grid)
        }
        BogovskiiSetup::Channel { length } => {
            if !(length >= 2.0 * eps) {
                return Err(Error::Parameter(format!("channel length {length} is shorter than one cell")));
            }
            mirrored(
                DomainSpec::new([0.0, -eps, -eps], [length, eps, eps])?,
                DomainSpec::new([0.0; 3], [length, eps, eps])?,
                eps,
                &ladder,
                &opts.shape,
            )?
        }
    };
    let op = BogovskiiOperator::new(&lattice, &grid, &opts.stokes)?;
    let probe = bogovskii_norm(&op, opts.probes, opts.power_steps, opts.seed)?;
    Ok((probe.estimate, probe.max_residual))
}

fn testfn_point(opts: &SweepOptions, ladder: &EpsLadder, audit: &TestfnAudit, eps: f64) -> Result<TestfnNorms> {
    let lattice = PerforationLattice::build(opts.domain, eps, ladder.alpha, opts.shape.clone())?;
    let grid = ladder.rule.grid(opts.domain, ladder.spacing(eps, opts.shape.as_ref()))?;
    let tf = build_testfn(&lattice, &grid, audit.k, audit.cell.as_ref(), &opts.stokes)?;
    let rec = audit_norms(&tf, &[2.0, 4.0])?;
    Ok(TestfnNorms {
        h3_bound: rec.h3_bound,
        inner_p2: rec.rows[0].grad_w_inner + rec.rows[0].q_inner,
        inner_p4: rec.rows[1].grad_w_inner + rec.rows[1].q_inner,
        annulus: rec.annulus_l2,
        w_minus_ek: rec.w_minus_ek_l2,
    })
}

fn sweep_point(opts: &SweepOptions, ladder: &EpsLadder, eps: f64) -> Result<PointRecord> {
    let h = ladder.spacing(eps, opts.shape.as_ref());
    let grid = GridSpec::with_spacing(opts.domain, h)?;
    let mut rec = PointRecord { eps, sigma: crate::geometry::sigma(eps, ladder.alpha)?, h, n: grid.n, ..Default::default() };
    if let Some(setup) = opts.poincare {
        rec.poincare_constant = Some(poincare_point(opts, ladder, setup, eps)?);
    }
    if let Some(setup) = opts.bogovskii {
        let (norm, res) = bogovskii_point(opts, ladder, setup, eps)?;
        rec.bogovskii_norm = Some(norm);
        rec.bogovskii_residual = Some(res);
    }
    if let Some(audit) = &opts.testfn {
        rec.testfn = Some(testfn_point(opts, ladder, audit, eps)?);
    }
    Ok(rec)
}

/// Poincaré constant, Bogovskiĭ norm and test-function norms per ladder
/// point, with exponent fits against their predicted rates.
pub fn run_scaling_sweeps(ladder: &EpsLadder, opts: &SweepOptions, progress: Option<Progress>) -> Result<ConvergenceReport> {
    ladder.validate()?;
    opts.stokes.validate()?;
    if opts.bogovskii.is_some() && opts.probes + opts.power_steps == 0 {
        return Err(Error::Parameter("Bogovskii probing needs at least one probe".into()));
    }
    let mut report = ConvergenceReport::new("scaling", ladder, opts.workers);
    report.run_ladder(opts.workers, progress, |eps| Ok((sweep_point(opts, ladder, eps)?, serde_json::Value::Null)));
    let a = ladder.alpha;
    if let Some(setup) = opts.poincare {
        report.notes.push(format!("poincare geometry: {setup:?}"));
        report.fit("poincare_constant", Some((3.0 - a) / 2.0), |r| r.poincare_constant);
    }
    if let Some(setup) = opts.bogovskii {
        report.notes.push(format!("bogovskii geometry: {setup:?}"));
        report.fit("bogovskii_norm", Some((a - 3.0) / 2.0), |r| r.bogovskii_norm);
    }
    if opts.testfn.is_some() {
        report.fit("testfn_h3_bound", Some(0.0), |r| r.testfn.as_ref().map(|t| t.h3_bound));
        report.fit("testfn_inner_p2", Some(-a + 3.0 * (a - 1.0) / 2.0), |r| r.testfn.as_ref().map(|t| t.inner_p2));
        report.fit("testfn_inner_p4", Some(-a + 3.0 * (a - 1.0) / 4.0), |r| r.testfn.as_ref().map(|t| t.inner_p4));
        report.fit("testfn_annulus", Some(a - 2.0), |r| r.testfn.as_ref().map(|t| t.annulus));
    }
    Ok(report)
}
