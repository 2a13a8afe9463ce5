use serde::{Deserialize, Serialize};

use crate::compressible::beta_threshold;
use crate::error::{Error, Result};
use crate::geometry::{sigma, DomainSpec, Shape};
use crate::grid::GridSpec;

/// How fine a ladder point must be resolved, and how large it may get.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResolutionRule {
    /// Grid cells across the particle diameter.
    pub cells_per_diameter: f64,
    /// Grid cells per ε.
    pub cells_per_eps: f64,
    /// Ceiling on the number of grid cells of one solve.
    pub max_cells: usize,
    /// Use the finest cells-per-ε of the ladder at every point, so all
    /// points share one discretization of the periodic cell.
    pub uniform: bool,
}

impl Default for ResolutionRule {
    fn default() -> Self {
        Self { cells_per_diameter: 8.0, cells_per_eps: 16.0, max_cells: 20_000_000, uniform: true }
    }
}

impl ResolutionRule {
    pub fn validate(&self) -> Result<()> {
        if !(self.cells_per_diameter >= 8.0) {
            return Err(Error::Parameter(format!(
                "at least 8 cells per particle diameter required, got {}",
                self.cells_per_diameter
            )));
        }
        if !(self.cells_per_eps >= 16.0) {
            return Err(Error::Parameter(format!("at least 16 cells per eps required, got {}", self.cells_per_eps)));
        }
        if self.max_cells == 0 {
            return Err(Error::Parameter("max_cells must be positive".into()));
        }
        Ok(())
    }

    /// Smallest even number of cells across the period 2ε meeting both counts.
    pub fn cells_per_period(&self, eps: f64, alpha: f64, shape: &dyn Shape) -> usize {
        let diameter = 2.0 * shape.bounding_radius() * eps.powf(alpha);
        let hmax = (eps / self.cells_per_eps).min(diameter / self.cells_per_diameter);
        (((2.0 * eps / hmax) / 2.0 - 1e-9).ceil() * 2.0) as usize
    }

    /// Largest spacing meeting both counts at this ε alone.
    pub fn spacing(&self, eps: f64, alpha: f64, shape: &dyn Shape) -> f64 {
        2.0 * eps / self.cells_per_period(eps, alpha, shape) as f64
    }

    pub fn grid(&self, domain: DomainSpec, h: f64) -> Result<GridSpec> {
        let g = GridSpec::with_spacing(domain, h)?;
        let cells = g.cell_count();
        if cells > self.max_cells {
            return Err(Error::Resolution(format!(
                "grid {:?} has {cells} cells, above the ceiling of {}",
                g.n, self.max_cells
            )));
        }
        Ok(g)
    }
}

/// Whether β clears (3/2)(γ+1)(α−1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaCheck {
    pub beta: f64,
    pub threshold: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsLadder {
    /// Strictly decreasing.
    pub eps: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub rule: ResolutionRule,
}

impl EpsLadder {
    pub fn new(eps: Vec<f64>, alpha: f64, beta: f64, gamma: f64, rule: ResolutionRule) -> Result<Self> {
        let l = Self { eps, alpha, beta, gamma, rule };
        l.validate()?;
        Ok(l)
    }

    /// ε ∈ {1/4, 1/6, 1/8} with the default rule.
    pub fn desk(alpha: f64) -> Result<Self> {
        Self::new(vec![0.25, 1.0 / 6.0, 0.125], alpha, 2.0 * alpha, 2.0, ResolutionRule::default())
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps.is_empty() {
            return Err(Error::Parameter("empty eps ladder".into()));
        }
        for &e in &self.eps {
            sigma(e, self.alpha)?;
        }
        if self.eps.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Parameter(format!("eps ladder must be strictly decreasing: {:?}", self.eps)));
        }
        if !(self.gamma >= 1.0 && self.gamma.is_finite()) {
            return Err(Error::Parameter(format!("gamma must be at least 1, got {}", self.gamma)));
        }
        if !self.beta.is_finite() {
            return Err(Error::Parameter("beta must be finite".into()));
        }
        self.rule.validate()
    }

    pub fn beta_check(&self) -> BetaCheck {
        let threshold = beta_threshold(self.gamma, self.alpha);
        BetaCheck { beta: self.beta, threshold, satisfied: self.beta > threshold }
    }

    /// Grid spacing at `eps` under the rule (see [`ResolutionRule::uniform`]).
    pub fn spacing(&self, eps: f64, shape: &dyn Shape) -> f64 {
        if !self.rule.uniform {
            return self.rule.spacing(eps, self.alpha, shape);
        }
        let per = self.eps.iter().map(|&e| self.rule.cells_per_period(e, self.alpha, shape)).max().unwrap_or(2);
        2.0 * eps / per as f64
    }
}
