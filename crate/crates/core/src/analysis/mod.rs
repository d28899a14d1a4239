//! Efficiency extraction, cos² and lifetime fits with bootstrap
//! uncertainties, the hyperfine-constant grid search and multimode weights.

pub mod efficiency;
pub mod fit;
pub mod grid;
mod lsq;

pub use efficiency::{mode_weights, window_efficiency, EfficiencyTrace, TracePoint};
pub use fit::{fit_lifetime, fit_rabi, rabi_curve, BootstrapOptions, Estimate, FitResult, LifetimeModel};
pub use grid::{hyperfine_grid_search, GridOptions, ResidualGrid};
