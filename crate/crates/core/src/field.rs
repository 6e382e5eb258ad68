use rand::Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, GridSpec};

/// Whether an axis index denotes a coordinate or a frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rep {
    Physical,
    Spectral,
}

impl Rep {
    pub fn name(self) -> &'static str {
        match self {
            Rep::Physical => "physical",
            Rep::Spectral => "spectral",
        }
    }
}

/// Complex 4D array over a [`GridSpec`], tagged per axis with its
/// representation. Layout is row-major `(x, y, z, t)` with `t` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    rep: [Rep; 4],
    data: Vec<Complex64>,
}

impl Field {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            rep: [Rep::Physical; 4],
            data: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_data(grid: GridSpec, rep: [Rep; 4], data: Vec<Complex64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Length {
                expected: grid.len(),
                actual: data.len(),
            });
        }
        Ok(Self { grid, rep, data })
    }

    /// Physical field sampled from `f(x, y, z, t)`.
    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 4]) -> Complex64 + Sync + Send) -> Self {
        let data = crate::par::map_range(grid.len(), |i| {
            let idx = grid.unflat(i);
            f([
                grid.coord(Axis::X, idx[0]),
                grid.coord(Axis::Y, idx[1]),
                grid.coord(Axis::Z, idx[2]),
                grid.coord(Axis::T, idx[3]),
            ])
        });
        Self {
            grid,
            rep: [Rep::Physical; 4],
            data,
        }
    }

    /// Standard complex normal entries, physical representation.
    pub fn random<R: Rng>(grid: GridSpec, rng: &mut R) -> Self {
        let data = (0..grid.len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        Self {
            grid,
            rep: [Rep::Physical; 4],
            data,
        }
    }

    /// A field that integrates to one: `1/measure` at the origin bin.
    pub fn delta(grid: GridSpec) -> Self {
        let mut f = Self::zeros(grid);
        let idx = [0, 1, 2, 3].map(|a| grid.center(Axis::ALL[a]));
        f.data[grid.flat(idx)] = Complex64::new(1.0 / grid.cell_measure(), 0.0);
        f
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn rep(&self) -> [Rep; 4] {
        self.rep
    }

    pub fn rep_of(&self, axis: Axis) -> Rep {
        self.rep[axis.index()]
    }

    pub fn is_physical(&self) -> bool {
        self.rep.iter().all(|&r| r == Rep::Physical)
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub(crate) fn set_rep(&mut self, axis: Axis, rep: Rep) {
        self.rep[axis.index()] = rep;
    }

    pub fn get(&self, idx: [usize; 4]) -> Complex64 {
        self.data[self.grid.flat(idx)]
    }

    pub fn set(&mut self, idx: [usize; 4], v: Complex64) {
        let i = self.grid.flat(idx);
        self.data[i] = v;
    }

    /// Value of the bin's coordinate (or frequency) along `axis`.
    pub fn axis_value(&self, axis: Axis, j: usize) -> f64 {
        match self.rep_of(axis) {
            Rep::Physical => self.grid.coord(axis, j),
            Rep::Spectral => self.grid.freq(axis, j),
        }
    }

    pub fn check_compatible(&self, other: &Field) -> Result<()> {
        if !self.grid.same_shape(&other.grid) {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.check_compatible(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Field {
            grid: self.grid,
            rep: self.rep,
            data,
        })
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.check_compatible(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Field {
            grid: self.grid,
            rep: self.rep,
            data,
        })
    }

    pub fn scale(mut self, s: Complex64) -> Field {
        self.data.iter_mut().for_each(|v| *v *= s);
        self
    }

    pub fn map(mut self, f: impl Fn([usize; 4], Complex64) -> Complex64 + Sync + Send) -> Field {
        let grid = self.grid;
        crate::par::for_each_indexed(&mut self.data, |i, v| *v = f(grid.unflat(i), *v));
        self
    }

    pub fn conj(self) -> Field {
        self.map(|_, v| v.conj())
    }

    pub fn norm_l2(&self) -> f64 {
        crate::norm::l2(&self.data)
    }

    /// `‖self − other‖ / ‖self‖`.
    pub fn relative_diff(&self, other: &Field) -> f64 {
        crate::norm::relative_l2(&self.data, &other.data, &self.data)
    }

    /// Measure-weighted energy `Σ |f|² · cell`.
    pub fn energy(&self) -> f64 {
        let cell: f64 = Axis::ALL
            .iter()
            .map(|&a| match self.rep_of(a) {
                Rep::Physical => self.grid.step(a),
                Rep::Spectral => self.grid.spectral_step(a),
            })
            .product();
        crate::norm::norm_sqr(&self.data) * cell
    }

    /// Multiply by `Θ(z)` (weight 1/2 on the `z = 0` slice). Requires a
    /// physical `z` axis.
    pub fn gate_z(self) -> Result<Field> {
        if self.rep_of(Axis::Z) != Rep::Physical {
            return Err(Error::Representation {
                axis: Axis::Z,
                expected: "physical",
                actual: "spectral",
            });
        }
        let grid = self.grid;
        Ok(self.map(|idx, v| v * crate::projectors::heaviside(grid.coord(Axis::Z, idx[2]))))
    }
}
