//! Command-line front end: configuration, dispatch, report files and the
//! resistance cache.

mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use clap::{Parser, Subcommand};

pub use config::{
    GeometryConfig, LadderConfig, OutputConfig, PhysicsConfig, PicardConfig, Resolved, RunConfig, SolverConfig,
};

use crate::cache::{atomic_write, Cache};
use crate::cellproblem::{compute_resistance, solve_cell_problem, CellField, ExtrapolatedCell, ResistanceMatrix, ResistanceOptions};
use crate::error::{Error, Result};
use crate::harness::{
    h4_experiment, run_darcy_convergence, run_scaling_sweeps, ConvergenceReport, DarcyRun, FlowMode, H4Options,
    PointRecord, ResolutionRule, SweepOptions, TestfnAudit,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_USAGE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "homlab", version, about = "Homogenization experiments on perforated domains")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides [output].dir).
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads (overrides [output].workers).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed of randomized probes (overrides [output].seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Resistance matrix of the configured shape.
    Resistance,
    /// Poincaré, Bogovskiĭ and test-function sweeps together.
    Sweep,
    Poincare,
    Bogovskii,
    Testfn,
    /// Compressible flow against the Darcy limit.
    Compressible,
    /// Incompressible flow against the Darcy limit.
    Darcy,
    /// Pairing of the test functions against a family of sequences.
    H4,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Resistance => "resistance",
            Command::Sweep => "sweep",
            Command::Poincare => "poincare",
            Command::Bogovskii => "bogovskii",
            Command::Testfn => "testfn",
            Command::Compressible => "compressible",
            Command::Darcy => "darcy",
            Command::H4 => "h4",
        }
    }
}

/// Exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Parameter(_) => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let quiet = cli.quiet;
    match execute(cli) {
        Ok(files) => {
            if !quiet {
                for f in files {
                    eprintln!("wrote {}", f.display());
                }
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("homlab: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: Cli) -> Result<Vec<PathBuf>> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(o) = cli.output {
        cfg.output.dir = o;
    }
    if let Some(w) = cli.workers {
        cfg.output.workers = w;
    }
    if let Some(s) = cli.seed {
        cfg.output.seed = s;
    }
    let base = cli.config.as_deref().and_then(Path::parent);
    let resolved = cfg.resolve(base)?;
    let ctx = Context { cfg, resolved, quiet: cli.quiet };
    ctx.dispatch(cli.command)
}

/// A validated run.
pub struct Context {
    pub cfg: RunConfig,
    pub resolved: Resolved,
    pub quiet: bool,
}

impl Context {
    pub fn new(cfg: RunConfig, base: Option<&Path>, quiet: bool) -> Result<Self> {
        let resolved = cfg.resolve(base)?;
        Ok(Self { cfg, resolved, quiet })
    }

    fn log(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }

    /// Runs `command` and returns the files written.
    pub fn dispatch(&self, command: Command) -> Result<Vec<PathBuf>> {
        match command {
            Command::Resistance => {
                let r = self.resistance()?;
                let path = self.cfg.output.dir.join("resistance.json");
                let doc = serde_json::json!({ "resistance": r, "config": self.echo() });
                atomic_write(&path, serde_json::to_string_pretty(&doc).expect("json").as_bytes())?;
                Ok(vec![path])
            }
            Command::Darcy | Command::Compressible => {
                let mode = if command == Command::Darcy { FlowMode::Incompressible } else { FlowMode::Compressible };
                let run = DarcyRun {
                    domain: self.resolved.domain,
                    reduction: self.cfg.geometry.reduction,
                    shape: self.resolved.shape.clone(),
                    resistance: self.resistance()?,
                    forcing: self.resolved.forcing.clone(),
                    m0: self.resolved.m0,
                    mode,
                    stokes: self.cfg.solver.stokes.clone(),
                    picard: self.cfg.picard(),
                    darcy_tol: self.cfg.solver.darcy_tol,
                    workers: self.cfg.output.workers,
                };
                self.reporting(command, |p| run_darcy_convergence(&self.resolved.ladder, &run, Some(p)))
            }
            Command::Sweep | Command::Poincare | Command::Bogovskii | Command::Testfn => {
                let s = &self.cfg.solver;
                let all = command == Command::Sweep;
                let testfn = if all || command == Command::Testfn {
                    let k = self.cfg.physics.k;
                    Some(TestfnAudit { cell: self.cell(k)?, k })
                } else {
                    None
                };
                let opts = SweepOptions {
                    domain: self.resolved.domain,
                    shape: self.resolved.shape.clone(),
                    poincare: (all || command == Command::Poincare).then_some(s.poincare_setup),
                    poincare_rule: s
                        .poincare_cells_per_eps
                        .map(|c| ResolutionRule { cells_per_eps: c, ..self.resolved.ladder.rule }),
                    poincare_tol: s.poincare_tol,
                    bogovskii: (all || command == Command::Bogovskii).then_some(s.bogovskii_setup),
                    bogovskii_rule: None,
                    probes: s.probes,
                    power_steps: s.power_steps,
                    seed: self.cfg.output.seed,
                    testfn,
                    stokes: s.stokes.clone(),
                    workers: self.cfg.output.workers,
                };
                self.reporting(command, |p| run_scaling_sweeps(&self.resolved.ladder, &opts, Some(p)))
            }
            Command::H4 => {
                let k = self.cfg.physics.k;
                let family = match self.cfg.solver.h4_family {
                    crate::harness::NuFamily::BogovskiiProbe { .. } => {
                        crate::harness::NuFamily::BogovskiiProbe { seed: self.cfg.output.seed }
                    }
                    f => f,
                };
                let mut cells = vec![self.cell(k)?];
                if let crate::harness::NuFamily::TestfnW { j } = family {
                    if j != k {
                        cells.push(self.cell(j)?);
                    }
                }
                let opts = H4Options {
                    domain: self.resolved.domain,
                    shape: self.resolved.shape.clone(),
                    cells,
                    k,
                    resistance: self.resistance()?,
                    phi: H4Options::sine_bump(self.resolved.domain),
                    nu_scale: 1.0,
                    forcing: self.resolved.forcing.clone(),
                    stokes: self.cfg.solver.stokes.clone(),
                    darcy_tol: self.cfg.solver.darcy_tol,
                    workers: self.cfg.output.workers,
                };
                self.reporting(command, |p| h4_experiment(&self.resolved.ladder, family, &opts, Some(p)))
            }
        }
    }

    fn echo(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(&self.cfg).expect("configs serialize");
        v["resolved"] = serde_json::json!({
            "shape": self.resolved.shape.describe(),
            "forcing": self.resolved.forcing.params(),
            "m0": self.resolved.m0,
            "beta": self.cfg.beta(),
        });
        v
    }

    /// Runs a ladder command, keeping `<name>.progress.json` current while
    /// points complete, then writes the report, the table and the fits.
    fn reporting(
        &self,
        command: Command,
        body: impl FnOnce(&(dyn Fn(&PointRecord) + Sync)) -> Result<ConvergenceReport>,
    ) -> Result<Vec<PathBuf>> {
        let dir = &self.cfg.output.dir;
        let name = command.name();
        let progress_path = dir.join(format!("{name}.progress.json"));
        let done: Mutex<Vec<PointRecord>> = Mutex::new(Vec::new());
        let echo = self.echo();
        let progress = |rec: &PointRecord| {
            let mut done = done.lock().unwrap();
            done.push(rec.clone());
            done.sort_by(|a, b| b.eps.total_cmp(&a.eps));
            let doc = serde_json::json!({ "kind": name, "complete": false, "records": *done, "config": echo });
            match atomic_write(&progress_path, serde_json::to_string_pretty(&doc).expect("json").as_bytes()) {
                Ok(()) => self.log(&format!("{name}: eps = {} done", rec.eps)),
                Err(e) => self.log(&format!("{name}: could not record progress: {e}")),
            }
        };
        let mut report = body(&progress)?;
        report.config = echo.clone();
        let files = [
            (dir.join(format!("{name}.json")), report.to_json()),
            (dir.join(format!("{name}.csv")), report.table()),
            (dir.join(format!("{name}_fits.csv")), report.fit_table()),
        ];
        for (path, text) in &files {
            atomic_write(path, text.as_bytes())?;
        }
        let _ = std::fs::remove_file(&progress_path);
        for f in &report.failures {
            self.log(&format!("{name}: eps = {} failed: {}", f.eps, f.error));
        }
        Ok(files.into_iter().map(|(p, _)| p).collect())
    }

    /// The configured R, or the computed one through the cache.
    pub fn resistance(&self) -> Result<ResistanceMatrix> {
        let s = &self.cfg.solver;
        if let Some(r) = s.resistance {
            let mut m = ResistanceMatrix::from_r(r)?;
            m.shape = self.resolved.shape.describe();
            return Ok(m);
        }
        let shape = &self.resolved.shape;
        let opts = ResistanceOptions {
            ladder: s.resistance_ladder.clone(),
            cells_per_unit: s.cells_per_radius / shape.bounding_radius(),
            use_symmetry: true,
            full_box_check: true,
            tol: s.stokes.clone(),
        };
        let cache = Cache::new(self.cfg.cache_dir());
        let key = Cache::key(
            "resistance",
            &serde_json::json!({
                "shape": shape.describe(),
                "ladder": opts.ladder,
                "cells_per_unit": opts.cells_per_unit,
                "tol": opts.tol,
            }),
        );
        if let Some(r) = cache.get(&key).and_then(|v| serde_json::from_value::<ResistanceMatrix>(v).ok()) {
            self.log("resistance: cache hit");
            return Ok(r);
        }
        self.log("resistance: solving the cell problems");
        let (r, _) = compute_resistance(shape, &opts)?;
        cache.put(&key, &serde_json::to_value(&r).expect("json"))?;
        Ok(r)
    }

    /// Extrapolated cell solution in direction `k`.
    pub fn cell(&self, k: usize) -> Result<Arc<dyn CellField>> {
        let s = &self.cfg.solver;
        let shape = &self.resolved.shape;
        let rb = shape.bounding_radius();
        let h = rb / s.cells_per_radius;
        let snap = |m: f64| (m * rb / h).round() * h;
        let near = solve_cell_problem(shape, k, snap(s.cell_truncation[0]), h, &s.stokes, shape.is_reflection_symmetric())?;
        let far = solve_cell_problem(shape, k, snap(s.cell_truncation[1]), h, &s.stokes, shape.is_reflection_symmetric())?;
        Ok(Arc::new(ExtrapolatedCell::new(near, far)?))
    }
}

#[cfg(test)]
mod tests;
