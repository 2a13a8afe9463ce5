use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cellproblem::Mat3;
use crate::compressible::PicardOptions;
use crate::error::{Error, Result};
use crate::forcing::{ForcingRegistry, ForcingSpec};
use crate::geometry::{DomainSpec, ReferenceShape, ShapeRegistry};
use crate::harness::{BogovskiiSetup, EpsLadder, NuFamily, PoincareSetup, Reduction, ResolutionRule};
use crate::stokes::SolverTolerances;

/// Full run configuration. Every section and key is optional; missing
/// values take the defaults below.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub physics: PhysicsConfig,
    pub ladder: LadderConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeometryConfig {
    pub box_min: [f64; 3],
    pub box_max: [f64; 3],
    pub alpha: f64,
    /// Shape table: `kind = "sphere" | "superellipsoid" | "sdf"` plus its keys.
    pub shape: toml::Table,
    pub reduction: Reduction,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        let mut shape = toml::Table::new();
        shape.insert("kind".into(), "sphere".into());
        shape.insert("radius".into(), 0.35.into());
        Self { box_min: [0.0; 3], box_max: [1.0; 3], alpha: 1.5, shape, reduction: Reduction::Full }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsConfig {
    pub gamma: f64,
    /// Defaults to 2α.
    pub beta: Option<f64>,
    /// Total mass; give at most one of `m0` and `rho0`. Defaults to ρ₀ = 1.
    pub m0: Option<f64>,
    pub rho0: Option<f64>,
    /// Density-weighted force, a forcing preset table.
    pub f: toml::Table,
    /// Body force, a forcing preset table.
    pub g: toml::Table,
    /// Direction of the test functions.
    pub k: usize,
}

fn zero_preset() -> toml::Table {
    let mut t = toml::Table::new();
    t.insert("kind".into(), "zero".into());
    t
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self { gamma: 2.0, beta: None, m0: None, rho0: None, f: zero_preset(), g: zero_preset(), k: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LadderConfig {
    pub eps: Vec<f64>,
    pub cells_per_diameter: f64,
    pub cells_per_eps: f64,
    pub max_cells: usize,
    pub uniform: bool,
}

impl Default for LadderConfig {
    fn default() -> Self {
        let r = ResolutionRule::default();
        Self {
            eps: vec![0.25, 1.0 / 6.0, 0.125],
            cells_per_diameter: r.cells_per_diameter,
            cells_per_eps: r.cells_per_eps,
            max_cells: r.max_cells,
            uniform: r.uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PicardConfig {
    pub theta: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub stagnation_window: usize,
}

impl Default for PicardConfig {
    fn default() -> Self {
        let p = PicardOptions::default();
        Self { theta: p.theta, tol: p.tol, max_iter: p.max_iter, stagnation_window: p.stagnation_window }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub stokes: SolverTolerances,
    pub picard: PicardConfig,
    pub darcy_tol: f64,
    pub poincare_tol: f64,
    pub poincare_setup: PoincareSetup,
    /// Cells per ε of the Poincaré solves; the ladder rule when absent.
    pub poincare_cells_per_eps: Option<f64>,
    pub bogovskii_setup: BogovskiiSetup,
    pub probes: usize,
    pub power_steps: usize,
    /// Truncation half-widths of the resistance ladder, in bounding radii.
    pub resistance_ladder: Vec<f64>,
    /// Grid cells per bounding radius of the cell problems.
    pub cells_per_radius: f64,
    /// Use this R instead of computing it.
    pub resistance: Option<Mat3>,
    /// Near and far truncations of the extrapolated cell solution used by
    /// the test functions, in bounding radii.
    pub cell_truncation: [f64; 2],
    pub h4_family: NuFamily,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            stokes: SolverTolerances::default(),
            picard: PicardConfig::default(),
            darcy_tol: 1e-10,
            poincare_tol: 1e-8,
            poincare_setup: PoincareSetup::LocalCell,
            poincare_cells_per_eps: None,
            bogovskii_setup: BogovskiiSetup::Channel { length: 4.0 },
            probes: 4,
            power_steps: 2,
            resistance_ladder: vec![8.0, 16.0, 32.0],
            cells_per_radius: 4.0,
            resistance: None,
            cell_truncation: [8.0, 16.0],
            h4_family: NuFamily::TestfnW { j: 2 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Defaults to `<dir>/cache`.
    pub cache_dir: Option<PathBuf>,
    pub workers: usize,
    pub seed: u64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("homlab-out"), cache_dir: None, workers: 1, seed: 0 }
    }
}

/// Objects built from a validated configuration.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub domain: DomainSpec,
    pub shape: ReferenceShape,
    pub forcing: ForcingSpec,
    pub ladder: EpsLadder,
    pub m0: f64,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn beta(&self) -> f64 {
        self.physics.beta.unwrap_or(2.0 * self.geometry.alpha)
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.output.cache_dir.clone().unwrap_or_else(|| self.output.dir.join("cache"))
    }

    pub fn rule(&self) -> ResolutionRule {
        let l = &self.ladder;
        ResolutionRule {
            cells_per_diameter: l.cells_per_diameter,
            cells_per_eps: l.cells_per_eps,
            max_cells: l.max_cells,
            uniform: l.uniform,
        }
    }

    pub fn picard(&self) -> PicardOptions {
        let p = &self.solver.picard;
        PicardOptions {
            theta: p.theta,
            tol: p.tol,
            max_iter: p.max_iter,
            stagnation_window: p.stagnation_window,
            stokes: self.solver.stokes.clone(),
        }
    }

    /// Range checks and construction of every configured object; any
    /// failure is a configuration error.
    pub fn resolve(&self, base: Option<&Path>) -> Result<Resolved> {
        let cfg = |e: Error| match e {
            Error::Config(m) => Error::Config(m),
            other => Error::Config(other.to_string()),
        };
        let g = &self.geometry;
        let p = &self.physics;
        if !(1.0..=3.0).contains(&g.alpha) {
            return Err(Error::Config(format!("alpha must lie in [1, 3], got {}", g.alpha)));
        }
        if !(p.gamma >= 1.0 && p.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be at least 1, got {}", p.gamma)));
        }
        if let Some(e) = self.ladder.eps.iter().find(|&&e| !(e > 0.0 && e <= 1.0)) {
            return Err(Error::Config(format!("eps must lie in (0, 1], got {e}")));
        }
        if p.k > 2 {
            return Err(Error::Config(format!("direction k must be 0, 1 or 2, got {}", p.k)));
        }
        if self.output.workers == 0 {
            return Err(Error::Config("workers must be positive".into()));
        }
        let s = &self.solver;
        for (v, what) in [(s.darcy_tol, "darcy_tol"), (s.poincare_tol, "poincare_tol"), (s.cells_per_radius, "cells_per_radius")] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{what} must be positive, got {v}")));
            }
        }
        if !(s.cell_truncation[0] >= 4.0 && s.cell_truncation[1] > s.cell_truncation[0]) {
            return Err(Error::Config(format!(
                "cell_truncation must be increasing and at least 4 radii, got {:?}",
                s.cell_truncation
            )));
        }
        if let NuFamily::TestfnW { j } = s.h4_family {
            if j > 2 {
                return Err(Error::Config(format!("h4 direction j must be 0, 1 or 2, got {j}")));
            }
        }
        s.stokes.validate().map_err(cfg)?;
        let domain = DomainSpec::new(g.box_min, g.box_max).map_err(cfg)?;
        let shape = ShapeRegistry::default().build(&g.shape, base).map_err(cfg)?;
        let registry = ForcingRegistry::default();
        let forcing = ForcingSpec { f: registry.build(&p.f, domain).map_err(cfg)?, g: registry.build(&p.g, domain).map_err(cfg)? };
        let m0 = match (p.m0, p.rho0) {
            (Some(_), Some(_)) => return Err(Error::Config("give at most one of m0 and rho0".into())),
            (Some(m), None) => m,
            (None, Some(r)) => r * domain.volume(),
            (None, None) => domain.volume(),
        };
        if !(m0 > 0.0 && m0.is_finite()) {
            return Err(Error::Config(format!("mass must be positive, got {m0}")));
        }
        let ladder = EpsLadder::new(self.ladder.eps.clone(), g.alpha, self.beta(), p.gamma, self.rule()).map_err(cfg)?;
        Ok(Resolved { domain, shape, forcing, ladder, m0 })
    }
}
