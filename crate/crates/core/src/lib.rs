//! Green's functions of the unidirectional pulse propagation equation on
//! discrete space-time grids.

pub mod beta;
pub mod error;
pub mod field;
pub mod green;
pub mod grid;
pub mod norm;
mod par;
pub mod projectors;
pub mod propagator;
pub mod transform;
pub mod verification;

pub use beta::{build_beta_z, BetaZTable, BinKind, BranchPolicy};
pub use error::{Error, Result};
pub use field::{Field, Rep};
pub use green::{GreenPair, GreenSpec, Sign};
pub use grid::{make_grid, Axis, GridSpec};
pub use projectors::{causality_stats, decompose, heaviside, make_mask, CausalityStats, ProjectorKind, ProjectorMask};
pub use rustfft::num_complex::Complex64;
pub use transform::{forward_transform, inverse_transform};
