//! ε-ladders, rescaled comparisons against the Darcy target, exponent fits
//! and convergence reports.

mod darcy_run;
mod fit;
mod h4;
mod ladder;
mod pool;
mod report;
mod sweep;

pub use darcy_run::{rescaled_error, run_darcy_convergence, DarcyRun, FlowMode, Reduction};
pub use fit::{fit_rate, RateFit};
pub use h4::{h4_experiment, H4Options, NuFamily};
pub use ladder::{BetaCheck, EpsLadder, ResolutionRule};
pub use pool::{run_pool, run_pool_with};
pub use report::{ConvergenceReport, Environment, ExponentRow, PointFailure, PointRecord, Progress, TestfnNorms, CSV_COLUMNS};
pub use sweep::{run_scaling_sweeps, BogovskiiSetup, PoincareSetup, SweepOptions, TestfnAudit};
