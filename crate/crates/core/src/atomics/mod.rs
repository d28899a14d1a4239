//! Atomic data model: level structure, hyperfine energies, coupling
//! coefficients and thermal velocity grids.

pub mod angular;
pub mod coupling;
pub mod hyperfine;
pub mod scheme;
pub mod species;
pub mod velocity;

pub use angular::HalfInt;
pub use coupling::CouplingTable;
pub use hyperfine::hyperfine_energy;
pub use scheme::{build_level_scheme, FineLevel, Label, LevelScheme, Manifold, Sublevel, Transition};
pub use species::{GroundPopulationSpec, SpeciesConfig};
pub use velocity::{thermal_speed, velocity_grid, VelocityGrid};
