use std::fmt::Write as _;

use serde::Serialize;

use super::fit::{fit_rate, RateFit};
use super::ladder::{BetaCheck, EpsLadder};
use super::pool::run_pool_with;

/// Observer called with each ladder point as it completes.
pub type Progress<'a> = &'a (dyn Fn(&PointRecord) + Sync);

/// Quantities of the test-function audit kept per ladder point.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TestfnNorms {
    /// σ(‖∇w‖₂ + ‖q‖₂) over the box.
    pub h3_bound: f64,
    /// ‖∇w‖_p + ‖q‖_p over the inner balls for p = 2 and p = 4.
    pub inner_p2: f64,
    pub inner_p4: f64,
    /// ‖∇w‖₂ + ‖q‖₂ over the annuli.
    pub annulus: f64,
    pub w_minus_ek: f64,
}

/// One ladder point. Fields that a run does not measure stay `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PointRecord {
    pub eps: f64,
    pub sigma: f64,
    pub h: f64,
    pub n: [usize; 3],
    /// Collar-excluded error of ũ/σ² against the Darcy velocity.
    pub u_error: Option<f64>,
    /// "relative" or "absolute" (when the Darcy velocity vanishes).
    pub u_error_kind: Option<String>,
    pub p_proxy: Option<f64>,
    /// ‖ũ‖₂/σ².
    pub u_rescaled_l2: Option<f64>,
    /// ‖ρ − ⟨ρ⟩‖_{2γ}·ε^{−β/γ}.
    pub density_deviation: Option<f64>,
    /// (∫|∇u|² − ∫(ρf + g)·u) / max(∫|∇u|², ∫(ρf + g)·u).
    pub energy_gap: Option<f64>,
    pub mass_defect: Option<f64>,
    pub picard_iterations: Option<usize>,
    pub degenerate: Option<bool>,
    pub poincare_constant: Option<f64>,
    pub bogovskii_norm: Option<f64>,
    pub bogovskii_residual: Option<f64>,
    pub testfn: Option<TestfnNorms>,
    pub h4_pairing: Option<f64>,
    pub h4_target: Option<f64>,
    pub h4_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointFailure {
    pub eps: f64,
    pub error: String,
}

/// A fitted exponent next to the value it is compared with.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentRow {
    pub quantity: String,
    /// Absent where no rate is predicted.
    pub target: Option<f64>,
    pub fit: RateFit,
    pub deviation: Option<f64>,
}

impl ExponentRow {
    pub fn new(quantity: impl Into<String>, target: Option<f64>, fit: RateFit) -> Self {
        Self { quantity: quantity.into(), target, fit, deviation: target.map(|t| (fit.exponent - t).abs()) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Environment {
    pub package: &'static str,
    pub version: &'static str,
    pub os: &'static str,
    pub arch: &'static str,
    pub workers: usize,
}

impl Environment {
    pub fn current(workers: usize) -> Self {
        Self {
            package: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            workers,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub kind: String,
    pub ladder: EpsLadder,
    pub beta_check: BetaCheck,
    /// Sorted by decreasing ε.
    pub records: Vec<PointRecord>,
    pub fits: Vec<ExponentRow>,
    pub failures: Vec<PointFailure>,
    pub partial: bool,
    pub notes: Vec<String>,
    /// Wall-clock seconds per ladder point, kept apart from the records.
    pub seconds: Vec<f64>,
    /// Per-point solver telemetry.
    pub diagnostics: Vec<serde_json::Value>,
    pub environment: Environment,
    /// Resolved configuration of the run, filled in by the front end.
    pub config: serde_json::Value,
}

impl ConvergenceReport {
    pub fn new(kind: &str, ladder: &EpsLadder, workers: usize) -> Self {
        Self {
            kind: kind.into(),
            ladder: ladder.clone(),
            beta_check: ladder.beta_check(),
            records: Vec::new(),
            fits: Vec::new(),
            failures: Vec::new(),
            partial: false,
            notes: Vec::new(),
            seconds: Vec::new(),
            diagnostics: Vec::new(),
            environment: Environment::current(workers),
            config: serde_json::Value::Null,
        }
    }

    /// Files one ladder point; records stay sorted by decreasing ε.
    pub fn push(&mut self, outcome: crate::Result<PointRecord>, eps: f64, seconds: f64) {
        match outcome {
            Ok(r) => {
                self.records.push(r);
                self.seconds.push(seconds);
            }
            Err(e) => {
                self.failures.push(PointFailure { eps, error: e.to_string() });
                self.partial = true;
            }
        }
        let mut idx: Vec<usize> = (0..self.records.len()).collect();
        idx.sort_by(|&a, &b| self.records[b].eps.total_cmp(&self.records[a].eps));
        self.records = idx.iter().map(|&i| self.records[i].clone()).collect();
        self.seconds = idx.iter().map(|&i| self.seconds[i]).collect();
    }

    /// Fits `value(record)` against ε over the records that have it. Fewer
    /// than two usable points add a note instead of a row.
    pub fn fit(&mut self, quantity: &str, target: Option<f64>, value: impl Fn(&PointRecord) -> Option<f64>) {
        let pts: Vec<(f64, f64)> = self.records.iter().filter_map(|r| value(r).map(|v| (r.eps, v))).collect();
        match fit_rate(&pts) {
            Ok(f) => self.fits.push(ExponentRow::new(quantity, target, f)),
            Err(e) => self.notes.push(format!("no fit for {quantity}: {e}")),
        }
    }

    /// Runs `point` for every ε of the ladder on `workers` threads and files
    /// the outcomes; returns the per-point diagnostics of the successes.
    pub(crate) fn run_ladder<F>(&mut self, workers: usize, progress: Option<Progress>, point: F) -> Vec<serde_json::Value>
    where
        F: Fn(f64) -> crate::Result<(PointRecord, serde_json::Value)> + Sync,
    {
        let point = &point;
        let jobs: Vec<_> = self
            .ladder
            .eps
            .iter()
            .map(|&eps| {
                move || {
                    let t = std::time::Instant::now();
                    (eps, point(eps), t.elapsed().as_secs_f64())
                }
            })
            .collect();
        let done = |_: usize, out: &(f64, crate::Result<(PointRecord, serde_json::Value)>, f64)| {
            if let (Some(p), Ok((rec, _))) = (progress, &out.1) {
                p(rec);
            }
        };
        let mut diagnostics = Vec::new();
        for (eps, outcome, secs) in run_pool_with(jobs, workers, &done) {
            let outcome = outcome.map(|(rec, diag)| {
                diagnostics.push((rec.eps, diag));
                rec
            });
            self.push(outcome, eps, secs);
        }
        diagnostics.sort_by(|a, b| b.0.total_cmp(&a.0));
        diagnostics.into_iter().map(|(_, d)| d).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// One row per ladder point in the fixed column order of [`CSV_COLUMNS`].
    pub fn table(&self) -> String {
        let mut out = CSV_COLUMNS.join(",");
        out.push('\n');
        for r in &self.records {
            let t = r.testfn.as_ref();
            let cells = [
                num(r.eps),
                num(r.sigma),
                num(r.h),
                r.n[0].to_string(),
                r.n[1].to_string(),
                r.n[2].to_string(),
                opt(r.u_error),
                r.u_error_kind.clone().unwrap_or_default(),
                opt(r.p_proxy),
                opt(r.u_rescaled_l2),
                opt(r.density_deviation),
                opt(r.energy_gap),
                opt(r.mass_defect),
                r.picard_iterations.map(|v| v.to_string()).unwrap_or_default(),
                r.degenerate.map(|v| v.to_string()).unwrap_or_default(),
                opt(r.poincare_constant),
                opt(r.bogovskii_norm),
                opt(r.bogovskii_residual),
                opt(t.map(|t| t.h3_bound)),
                opt(t.map(|t| t.inner_p2)),
                opt(t.map(|t| t.inner_p4)),
                opt(t.map(|t| t.annulus)),
                opt(r.h4_pairing),
                opt(r.h4_target),
                opt(r.h4_gap),
            ];
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// Exponent fits as a second table.
    pub fn fit_table(&self) -> String {
        let mut out = String::from("quantity,target,exponent,ci95,prefactor,residual,deviation\n");
        for f in &self.fits {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                f.quantity,
                opt(f.target),
                num(f.fit.exponent),
                opt(f.fit.ci95),
                num(f.fit.prefactor),
                num(f.fit.residual),
                opt(f.deviation)
            );
        }
        out
    }
}

/// Column order of [`ConvergenceReport::table`].
pub const CSV_COLUMNS: [&str; 25] = [
    "eps",
    "sigma",
    "h",
    "nx",
    "ny",
    "nz",
    "u_error",
    "u_error_kind",
    "p_proxy",
    "u_rescaled_l2",
    "density_deviation",
    "energy_gap",
    "mass_defect",
    "picard_iterations",
    "degenerate",
    "poincare_constant",
    "bogovskii_norm",
    "bogovskii_residual",
    "testfn_h3_bound",
    "testfn_inner_p2",
    "testfn_inner_p4",
    "testfn_annulus",
    "h4_pairing",
    "h4_target",
    "h4_gap",
];

fn num(v: f64) -> String {
    format!("{v:.12e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}
