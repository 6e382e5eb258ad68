//! The longitudinal wavenumber `β_z(k⊥, ω) = sqrt(ω²/c² − k⊥²)` tabulated
//! on the `(kx, ky, ω)` lattice.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::grid::{Axis, GridSpec};

/// Root chosen where `k⊥ > |ω|/c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchPolicy {
    /// `β_z = i·sqrt(k⊥² − ω²/c²)`, so `exp(iβ_z z)` decays for `z > 0`.
    #[default]
    EvanescentDecay,
    /// Evanescent bins are removed from every operator.
    EvanescentZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinKind {
    Propagating,
    Evanescent,
    /// Within `epsilon` of the light line; `1/β_z` is not applied here.
    Singular,
}

#[derive(Debug, Clone)]
pub struct BetaZTable {
    grid: GridSpec,
    values: Vec<Complex64>,
    kinds: Vec<BinKind>,
    pub branch_policy: BranchPolicy,
    pub light_line_epsilon: f64,
}

/// Default light-line exclusion width `1e−6 · dω / c`.
pub fn default_epsilon(grid: &GridSpec) -> f64 {
    1e-6 * grid.spectral_step(Axis::T) / grid.c
}

pub fn build_beta_z(grid: &GridSpec, policy: BranchPolicy, epsilon: f64) -> BetaZTable {
    assert!(epsilon >= 0.0, "light-line epsilon must be nonnegative");
    let (nx, ny, nt) = (grid.n(Axis::X), grid.n(Axis::Y), grid.n(Axis::T));
    let mut values = Vec::with_capacity(nx * ny * nt);
    let mut kinds = Vec::with_capacity(nx * ny * nt);
    let eps2 = epsilon * epsilon;
    for ix in 0..nx {
        let kx = grid.freq(Axis::X, ix);
        for iy in 0..ny {
            let ky = grid.freq(Axis::Y, iy);
            for it in 0..nt {
                let w = grid.freq(Axis::T, it) / grid.c;
                let b2 = w * w - (kx * kx + ky * ky);
                let (v, kind) = if b2.abs() <= eps2 {
                    (Complex64::new(b2.max(0.0).sqrt(), (-b2).max(0.0).sqrt()), BinKind::Singular)
                } else if b2 > 0.0 {
                    (Complex64::new(b2.sqrt(), 0.0), BinKind::Propagating)
                } else {
                    let v = match policy {
                        BranchPolicy::EvanescentDecay => Complex64::new(0.0, (-b2).sqrt()),
                        BranchPolicy::EvanescentZero => Complex64::new(0.0, 0.0),
                    };
                    (v, BinKind::Evanescent)
                };
                values.push(v);
                kinds.push(kind);
            }
        }
    }
    BetaZTable {
        grid: *grid,
        values,
        kinds,
        branch_policy: policy,
        light_line_epsilon: epsilon,
    }
}

impl BetaZTable {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn slot(&self, ix: usize, iy: usize, it: usize) -> usize {
        (ix * self.grid.n(Axis::Y) + iy) * self.grid.n(Axis::T) + it
    }

    pub fn value(&self, ix: usize, iy: usize, it: usize) -> Complex64 {
        self.values[self.slot(ix, iy, it)]
    }

    pub fn kind(&self, ix: usize, iy: usize, it: usize) -> BinKind {
        self.kinds[self.slot(ix, iy, it)]
    }

    pub fn is_singular(&self, ix: usize, iy: usize, it: usize) -> bool {
        self.kind(ix, iy, it) == BinKind::Singular
    }

    /// Bins whose modes are removed altogether: singular ones, plus
    /// evanescent ones under [`BranchPolicy::EvanescentZero`].
    pub fn is_excluded(&self, ix: usize, iy: usize, it: usize) -> bool {
        match self.kind(ix, iy, it) {
            BinKind::Singular => true,
            BinKind::Evanescent => self.branch_policy == BranchPolicy::EvanescentZero,
            BinKind::Propagating => false,
        }
    }

    /// `1 / (2iβ_z)`, or zero on excluded bins.
    pub fn source_coupling(&self, ix: usize, iy: usize, it: usize) -> Complex64 {
        if self.is_excluded(ix, iy, it) {
            Complex64::new(0.0, 0.0)
        } else {
            1.0 / (2.0 * Complex64::i() * self.value(ix, iy, it))
        }
    }

    /// Propagation factor `exp(iβ_z dz)`; zero for bins excluded by the
    /// branch policy, and kept for singular bins (where it is close to 1).
    pub fn phase(&self, ix: usize, iy: usize, it: usize, dz: f64) -> Complex64 {
        match self.kind(ix, iy, it) {
            BinKind::Evanescent if self.branch_policy == BranchPolicy::EvanescentZero => Complex64::new(0.0, 0.0),
            _ => (Complex64::i() * self.value(ix, iy, it) * dz).exp(),
        }
    }

    pub fn singular_count(&self) -> usize {
        self.kinds.iter().filter(|&&k| k == BinKind::Singular).count()
    }

    pub fn excluded_count(&self) -> usize {
        let g = &self.grid;
        let mut n = 0;
        for ix in 0..g.n(Axis::X) {
            for iy in 0..g.n(Axis::Y) {
                for it in 0..g.n(Axis::T) {
                    n += self.is_excluded(ix, iy, it) as usize;
                }
            }
        }
        n
    }
}
