//! Independent oracles and the check registry.

mod checks;
mod oracles;

pub use checks::*;
pub use oracles::{brute_force_dft, retarded_quadrature, DFT_BIN_LIMIT, QUADRATURE_BIN_LIMIT};
