//! Maxwell–Bloch simulation and analysis of dynamically rephased
//! off-resonant cascaded absorption (ORCA) memories in warm vapor.
//!
//! Units used throughout: times in ns, angular rates in rad/ns, hyperfine
//! energies in MHz, wavevectors in rad/m, velocities in m/s, and the
//! propagation coordinate normalized to the cell length.

// NaN-rejecting checks are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments, clippy::needless_range_loop)]

pub mod analysis;
pub mod atomics;
pub mod error;
pub mod fields;
pub mod oracle;
pub mod presets;
pub mod protocol;
pub mod solver;

pub use error::{Error, Result};
