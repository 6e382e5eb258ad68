use thiserror::Error;

use crate::grid::Axis;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("axis {axis} is already {actual}, expected {expected}")]
    Representation {
        axis: Axis,
        expected: &'static str,
        actual: &'static str,
    },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("data length {actual} does not match grid size {expected}")]
    Length { expected: usize, actual: usize },
    #[error("size guard exceeded: {bins} bins requested, limit is {limit}")]
    SizeGuard { bins: usize, limit: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
