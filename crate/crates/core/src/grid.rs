//! Space-time grid geometry and its dual spectral lattice.
//!
//! Every axis is centered: bin `j` of an axis with `n` bins sits at
//! `(j - n/2) * step`, both in physical and in spectral space. With even
//! counts this places an exact zero bin at index `n/2` and the Nyquist bin
//! (most negative frequency) at index 0.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
    T,
}

impl Axis {
    pub const ALL: [Axis; 4] = [Axis::X, Axis::Y, Axis::Z, Axis::T];
    pub const SPACE: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];
    pub const TRANSVERSE_TIME: [Axis; 3] = [Axis::X, Axis::Y, Axis::T];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
            Axis::T => 3,
        }
    }

    pub fn is_temporal(self) -> bool {
        self == Axis::T
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
            Axis::T => "t",
        };
        f.write_str(s)
    }
}

/// Geometry of a 4D `(x, y, z, t)` grid. Steps are in metres (seconds for
/// `t`), `c` is the wave speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub counts: [usize; 4],
    pub steps: [f64; 4],
    pub c: f64,
}

pub fn make_grid(counts: [usize; 4], steps: [f64; 4], c: f64) -> Result<GridSpec> {
    for (axis, &n) in Axis::ALL.iter().zip(&counts) {
        if n < 2 {
            return Err(Error::InvalidGrid(format!("count n_{axis} = {n} must be at least 2")));
        }
        if n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("counts must be even (n_{axis} = {n})")));
        }
    }
    for (axis, &d) in Axis::ALL.iter().zip(&steps) {
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidGrid(format!("step d_{axis} = {d} must be positive")));
        }
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidGrid(format!("wave speed c = {c} must be positive")));
    }
    Ok(GridSpec { counts, steps, c })
}

impl GridSpec {
    pub fn n(&self, axis: Axis) -> usize {
        self.counts[axis.index()]
    }

    pub fn step(&self, axis: Axis) -> f64 {
        self.steps[axis.index()]
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Spectral step `2π / (n·d)`.
    pub fn spectral_step(&self, axis: Axis) -> f64 {
        2.0 * PI / (self.n(axis) as f64 * self.step(axis))
    }

    /// Signed offset of bin `j` from the centre bin.
    pub fn offset(&self, axis: Axis, j: usize) -> i64 {
        j as i64 - (self.n(axis) / 2) as i64
    }

    pub fn coord(&self, axis: Axis, j: usize) -> f64 {
        self.offset(axis, j) as f64 * self.step(axis)
    }

    pub fn freq(&self, axis: Axis, j: usize) -> f64 {
        self.offset(axis, j) as f64 * self.spectral_step(axis)
    }

    pub fn coords(&self, axis: Axis) -> Vec<f64> {
        (0..self.n(axis)).map(|j| self.coord(axis, j)).collect()
    }

    pub fn freqs(&self, axis: Axis) -> Vec<f64> {
        (0..self.n(axis)).map(|j| self.freq(axis, j)).collect()
    }

    /// Index of the zero bin on every axis.
    pub fn center(&self, axis: Axis) -> usize {
        self.n(axis) / 2
    }

    /// Row-major strides with `t` fastest.
    pub fn strides(&self) -> [usize; 4] {
        let [_, ny, nz, nt] = self.counts;
        [ny * nz * nt, nz * nt, nt, 1]
    }

    pub fn flat(&self, idx: [usize; 4]) -> usize {
        let s = self.strides();
        idx[0] * s[0] + idx[1] * s[1] + idx[2] * s[2] + idx[3]
    }

    pub fn unflat(&self, mut i: usize) -> [usize; 4] {
        let s = self.strides();
        let mut out = [0; 4];
        for a in 0..4 {
            out[a] = i / s[a];
            i %= s[a];
        }
        out
    }

    /// Physical cell measure `dx·dy·dz·dt`.
    pub fn cell_measure(&self) -> f64 {
        self.steps.iter().product()
    }

    /// Spectral cell measure over `axes`, including the `1/(2π)` per axis.
    pub fn spectral_measure(&self, axes: &[Axis]) -> f64 {
        axes.iter()
            .map(|&a| self.spectral_step(a) / (2.0 * PI))
            .product()
    }

    pub fn same_shape(&self, other: &GridSpec) -> bool {
        self.counts == other.counts
            && self.steps.iter().zip(&other.steps).all(|(a, b)| (a - b).abs() <= 1e-14 * a.abs())
            && (self.c - other.c).abs() <= 1e-14 * self.c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectral_step_matches_definition() {
        let g = make_grid([16, 16, 16, 32], [1.0, 1.0, 1.0, 0.5], 1.0).unwrap();
        assert!((g.spectral_step(Axis::X) - 2.0 * PI / 16.0).abs() < 1e-15);
        assert!((g.spectral_step(Axis::T) - 2.0 * PI / 16.0).abs() < 1e-15);
        assert_eq!(g.coord(Axis::Z, 8), 0.0);
        assert_eq!(g.coord(Axis::Z, 0), -8.0);
        assert!(g.freq(Axis::X, 0) < 0.0);
    }

    #[test]
    fn smallest_grid_is_legal() {
        let g = make_grid([2, 2, 2, 2], [1.0; 4], 1.0).unwrap();
        assert_eq!(g.len(), 16);
        assert_eq!(g.coords(Axis::T), vec![-1.0, 0.0]);
    }

    #[test]
    fn rejects_bad_counts_and_steps() {
        let odd = make_grid([15, 16, 16, 32], [1.0; 4], 1.0).unwrap_err();
        assert!(odd.to_string().contains("counts must be even"));
        assert!(make_grid([0, 16, 16, 32], [1.0; 4], 1.0).is_err());
        assert!(make_grid([16, 16, 16, 32], [1.0, 0.0, 1.0, 1.0], 1.0).is_err());
        assert!(make_grid([16, 16, 16, 32], [1.0, 1.0, -1.0, 1.0], 1.0).is_err());
        assert!(make_grid([16, 16, 16, 32], [1.0; 4], 0.0).is_err());
    }

    #[test]
    fn flat_index_roundtrip() {
        let g = make_grid([4, 6, 2, 8], [1.0; 4], 1.0).unwrap();
        for i in 0..g.len() {
            assert_eq!(g.flat(g.unflat(i)), i);
        }
    }
}
