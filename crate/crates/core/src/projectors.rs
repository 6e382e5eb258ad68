//! Quadrant projectors on the `(k_z, ω)` plane and forward/backward
//! decomposition.
//!
//! `P_lm(k_z, ω) = Θ((−1)^l ω) · Θ((−1)^m k_z)`, with `Θ(0) = 1/2`. The
//! index `l` selects the sign of `ω` and `m` the sign of `k_z`, so `P00`
//! keeps the quadrant `ω > 0, k_z > 0`. Sums:
//!
//! * `P+  = P00 + P11` (sign k_z = sign ω, forward in z)
//! * `P−  = P01 + P10` (backward in z)
//! * `Pz+ = Θ(k_z)`, `Pz− = Θ(−k_z)` (positive/negative longitudinal wavenumber)

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, Rep};
use crate::grid::{Axis, GridSpec};
use crate::norm::CompensatedSum;
use crate::transform::{inverse_transform, to_spectral};

/// `Θ(x) = (1 + sign x) / 2`.
pub fn heaviside(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        0.0
    } else {
        0.5
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProjectorKind {
    P00,
    P01,
    P10,
    P11,
    Pplus,
    Pminus,
    Pzplus,
    Pzminus,
    Identity,
}

impl ProjectorKind {
    pub const QUADRANTS: [ProjectorKind; 4] = [
        ProjectorKind::P00,
        ProjectorKind::P01,
        ProjectorKind::P10,
        ProjectorKind::P11,
    ];

    /// Symbol value at `(k_z, ω)`.
    pub fn weight(self, kz: f64, w: f64) -> f64 {
        let q = |l: i32, m: i32| {
            let sw = if l == 0 { w } else { -w };
            let sk = if m == 0 { kz } else { -kz };
            heaviside(sw) * heaviside(sk)
        };
        match self {
            ProjectorKind::P00 => q(0, 0),
            ProjectorKind::P01 => q(0, 1),
            ProjectorKind::P10 => q(1, 0),
            ProjectorKind::P11 => q(1, 1),
            ProjectorKind::Pplus => q(0, 0) + q(1, 1),
            ProjectorKind::Pminus => q(0, 1) + q(1, 0),
            ProjectorKind::Pzplus => q(0, 0) + q(1, 0),
            ProjectorKind::Pzminus => q(0, 1) + q(1, 1),
            ProjectorKind::Identity => 1.0,
        }
    }
}

/// Real weights over the `(k_z, ω)` lattice, `n_z × n_t`, `ω` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorMask {
    pub kind: ProjectorKind,
    grid: GridSpec,
    weights: Vec<f64>,
}

pub fn make_mask(kind: ProjectorKind, grid: &GridSpec) -> ProjectorMask {
    let (nz, nt) = (grid.n(Axis::Z), grid.n(Axis::T));
    let mut weights = Vec::with_capacity(nz * nt);
    for iz in 0..nz {
        // Offsets rather than frequencies: exact sign, Nyquist negative.
        let kz = grid.offset(Axis::Z, iz) as f64;
        for it in 0..nt {
            let w = grid.offset(Axis::T, it) as f64;
            weights.push(kind.weight(kz, w));
        }
    }
    ProjectorMask {
        kind,
        grid: *grid,
        weights,
    }
}

impl ProjectorMask {
    pub fn weight(&self, iz: usize, it: usize) -> f64 {
        self.weights[iz * self.grid.n(Axis::T) + it]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Bin-wise product of two masks (composition of the operators).
    pub fn compose(&self, other: &ProjectorMask) -> Vec<f64> {
        self.weights.iter().zip(&other.weights).map(|(a, b)| a * b).collect()
    }

    /// Multiply `f` by the mask. Physical `z`/`t` axes are transformed
    /// internally and restored; other axes are untouched.
    pub fn apply(&self, f: &Field) -> Result<Field> {
        if !self.grid.same_shape(f.grid()) {
            return Err(Error::GridMismatch);
        }
        let (spec, touched) = to_spectral(f, &[Axis::Z, Axis::T])?;
        let masked = spec.map(|idx, v| v * self.weight(idx[2], idx[3]));
        inverse_transform(&masked, &touched)
    }
}

pub fn apply(mask: &ProjectorMask, f: &Field) -> Result<Field> {
    mask.apply(f)
}

/// `(P+ f, P− f)`; the two parts sum to `f`.
pub fn decompose(f: &Field) -> Result<(Field, Field)> {
    let g = f.grid();
    let fwd = make_mask(ProjectorKind::Pplus, g).apply(f)?;
    let bwd = make_mask(ProjectorKind::Pminus, g).apply(f)?;
    Ok((fwd, bwd))
}

/// Energies `Σ|f|²·cell` over the open quadrants of the `(z, t)` plane.
/// The first sign refers to `z`, the second to `t`: `energy_pm` collects
/// `z > 0, t < 0`. Bins on `z = 0` or `t = 0` only enter `total`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CausalityStats {
    pub energy_pp: f64,
    pub energy_pm: f64,
    pub energy_mp: f64,
    pub energy_mm: f64,
    pub total: f64,
}

impl CausalityStats {
    pub fn fraction(&self, e: f64) -> f64 {
        if self.total > 0.0 {
            e / self.total
        } else {
            0.0
        }
    }

    /// Share of energy at `z > 0, t < 0`: response before excitation.
    pub fn acausal_forward_fraction(&self) -> f64 {
        self.fraction(self.energy_pm)
    }

    pub fn axis_energy(&self) -> f64 {
        self.total - (self.energy_pp + self.energy_pm + self.energy_mp + self.energy_mm)
    }
}

pub fn causality_stats(f: &Field) -> Result<CausalityStats> {
    if !f.is_physical() {
        let axis = *Axis::ALL.iter().find(|&&a| f.rep_of(a) == Rep::Spectral).unwrap();
        return Err(Error::Representation {
            axis,
            expected: "physical",
            actual: "spectral",
        });
    }
    let g = f.grid();
    let cell = g.cell_measure();
    let mut acc = [CompensatedSum::new(); 5];
    for (i, v) in f.data().iter().enumerate() {
        let idx = g.unflat(i);
        let e = v.norm_sqr() * cell;
        let z = g.offset(Axis::Z, idx[2]);
        let t = g.offset(Axis::T, idx[3]);
        acc[4].add(e);
        let slot = match (z.signum(), t.signum()) {
            (1, 1) => 0,
            (1, -1) => 1,
            (-1, 1) => 2,
            (-1, -1) => 3,
            _ => continue,
        };
        acc[slot].add(e);
    }
    Ok(CausalityStats {
        energy_pp: acc[0].value(),
        energy_pm: acc[1].value(),
        energy_mp: acc[2].value(),
        energy_mm: acc[3].value(),
        total: acc[4].value(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use rustfft::num_complex::Complex64;

    fn grid() -> GridSpec {
        make_grid([4, 4, 8, 8], [1.0; 4], 1.0).unwrap()
    }

    #[test]
    fn heaviside_values() {
        assert_eq!(heaviside(-3.0), 0.0);
        assert_eq!(heaviside(0.0), 0.5);
        assert_eq!(heaviside(2.0), 1.0);
    }

    #[test]
    fn quadrant_weights() {
        let g = grid();
        let p00 = make_mask(ProjectorKind::P00, &g);
        // centre index 4 on both axes.
        assert_eq!(p00.weight(6, 6), 1.0);
        assert_eq!(p00.weight(4, 6), 0.5);
        assert_eq!(p00.weight(4, 4), 0.25);
        assert_eq!(p00.weight(2, 6), 0.0);
        let pp = make_mask(ProjectorKind::Pplus, &g);
        assert_eq!(pp.weight(1, 1), 1.0);
        // Nyquist bin counts as negative.
        assert_eq!(pp.weight(0, 0), 1.0);
        assert_eq!(pp.weight(0, 6), 0.0);
    }

    #[test]
    fn z_projectors_select_longitudinal_sign() {
        let g = grid();
        let pz = make_mask(ProjectorKind::Pzplus, &g);
        for it in 0..8 {
            assert_eq!(pz.weight(6, it), 1.0);
            assert_eq!(pz.weight(4, it), 0.5);
            assert_eq!(pz.weight(1, it), 0.0);
        }
    }

    #[test]
    fn forward_plane_wave_is_kept_by_pplus() {
        let g = make_grid([2, 2, 8, 8], [1.0; 4], 1.0).unwrap();
        let kz = g.freq(Axis::Z, 6);
        let w = g.freq(Axis::T, 7);
        let f = Field::from_fn(g, |[_, _, z, t]| Complex64::from_polar(1.0, kz * z - w * t));
        // exp(i kz z − i ω t) has spectrum at (+kz, +ω): forward.
        let kept = make_mask(ProjectorKind::Pplus, &g).apply(&f).unwrap();
        assert!(f.relative_diff(&kept) < 1e-13);
        let (fwd, bwd) = decompose(&f).unwrap();
        assert!(f.relative_diff(&fwd) < 1e-13);
        assert!(bwd.norm_l2() < 1e-12 * f.norm_l2());
    }

    #[test]
    fn disjoint_plane_waves_split_exactly() {
        let g = make_grid([2, 2, 8, 8], [1.0; 4], 1.0).unwrap();
        let (kz, w) = (g.freq(Axis::Z, 6), g.freq(Axis::T, 7));
        let fwd = Field::from_fn(g, |[_, _, z, t]| Complex64::from_polar(1.0, kz * z - w * t));
        let bwd = Field::from_fn(g, |[_, _, z, t]| Complex64::from_polar(0.5, -kz * z - w * t));
        let (a, b) = decompose(&fwd.add(&bwd).unwrap()).unwrap();
        assert!(fwd.relative_diff(&a) < 1e-13);
        assert!(bwd.relative_diff(&b) < 1e-13);
    }

    #[test]
    fn apply_restores_representation() {
        let g = grid();
        let f = crate::transform::forward_transform(&Field::delta(g), &[Axis::X, Axis::Z]).unwrap();
        let out = make_mask(ProjectorKind::P10, &g).apply(&f).unwrap();
        assert_eq!(out.rep(), f.rep());
    }

    #[test]
    fn causality_quadrants() {
        let g = grid();
        let f = Field::from_fn(g, |[_, _, z, t]| {
            if z > 0.0 && t > 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let s = causality_stats(&f).unwrap();
        assert!(s.energy_pp > 0.0);
        assert_eq!((s.energy_pm, s.energy_mp, s.energy_mm), (0.0, 0.0, 0.0));
        assert!((s.total - s.energy_pp).abs() < 1e-15);
        let spectral = crate::transform::forward_transform(&f, &[Axis::T]).unwrap();
        assert!(causality_stats(&spectral).is_err());
    }
}
