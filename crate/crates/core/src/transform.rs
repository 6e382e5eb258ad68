//! Measure-weighted, centered Fourier transforms.
//!
//! Spatial axes use `exp(−i k x)` and the temporal axis uses `exp(+i ω t)`:
//!
//! ```text
//! F(k, ω) = Σ f(r, t) · exp(−i k·r + i ω t) · dx dy dz dt
//! f(r, t) = Σ F(k, ω) · exp(+i k·r − i ω t) · dkx dky dkz dω / (2π)^4
//! ```
//!
//! Both sums run over centered bins, so on even grids the shift to and from
//! FFT ordering reduces to a `(−1)^j` checkerboard on input and output.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::{Field, Rep};
use crate::grid::{Axis, GridSpec};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Inverse,
}

fn sign(j: usize) -> f64 {
    if j % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

pub fn forward_transform(f: &Field, axes: &[Axis]) -> Result<Field> {
    let mut out = f.clone();
    for &axis in axes {
        if out.rep_of(axis) != Rep::Physical {
            return Err(Error::Representation {
                axis,
                expected: "physical",
                actual: "spectral",
            });
        }
        transform_axis(&mut out, axis, Direction::Forward);
        out.set_rep(axis, Rep::Spectral);
    }
    Ok(out)
}

pub fn inverse_transform(f: &Field, axes: &[Axis]) -> Result<Field> {
    let mut out = f.clone();
    for &axis in axes {
        if out.rep_of(axis) != Rep::Spectral {
            return Err(Error::Representation {
                axis,
                expected: "spectral",
                actual: "physical",
            });
        }
        transform_axis(&mut out, axis, Direction::Inverse);
        out.set_rep(axis, Rep::Physical);
    }
    Ok(out)
}

/// Transform whichever of `axes` are physical; report which were touched so
/// the caller can undo them.
pub(crate) fn to_spectral(f: &Field, axes: &[Axis]) -> Result<(Field, Vec<Axis>)> {
    let todo: Vec<Axis> = axes
        .iter()
        .copied()
        .filter(|&a| f.rep_of(a) == Rep::Physical)
        .collect();
    Ok((forward_transform(f, &todo)?, todo))
}

fn plan(n: usize, temporal: bool, dir: Direction) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    // Spatial forward and temporal inverse share the exp(−i…) kernel.
    let negative_exponent = (dir == Direction::Forward) != temporal;
    if negative_exponent {
        planner.plan_fft_forward(n)
    } else {
        planner.plan_fft_inverse(n)
    }
}

fn transform_axis(f: &mut Field, axis: Axis, dir: Direction) {
    let grid = *f.grid();
    let inner = grid.strides()[axis.index()];
    transform_strided(f.data_mut(), grid.n(axis), inner, grid.step(axis), axis.is_temporal(), dir);
}

/// Transform every line of length `n` and stride `inner` in `data`.
fn transform_strided(data: &mut [Complex64], n: usize, inner: usize, step: f64, temporal: bool, dir: Direction) {
    let lines = data.len() / n;
    let fft = plan(n, temporal, dir);
    let half_sign = sign(n / 2);
    let scale = match dir {
        Direction::Forward => step,
        Direction::Inverse => 1.0 / (n as f64 * step),
    };

    let src: &[Complex64] = data;
    let processed: Vec<Vec<Complex64>> = crate::par::map_range(lines, |l| {
        let (outer, i) = (l / inner, l % inner);
        let base = outer * n * inner + i;
        let mut buf: Vec<Complex64> = (0..n).map(|j| src[base + j * inner] * sign(j)).collect();
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (m, v) in buf.iter_mut().enumerate() {
            *v *= sign(m) * half_sign * scale;
        }
        buf
    });

    for (l, line) in processed.into_iter().enumerate() {
        let (outer, i) = (l / inner, l % inner);
        let base = outer * n * inner + i;
        for (j, v) in line.into_iter().enumerate() {
            data[base + j * inner] = v;
        }
    }
}

/// Forward transform of a constant-`z` slice laid out `(x, y, t)` with `t`
/// fastest, over all three axes.
pub fn slice_forward(grid: &GridSpec, slice: &[Complex64]) -> Result<Vec<Complex64>> {
    slice_transform(grid, slice, Direction::Forward)
}

pub fn slice_inverse(grid: &GridSpec, slice: &[Complex64]) -> Result<Vec<Complex64>> {
    slice_transform(grid, slice, Direction::Inverse)
}

fn slice_transform(grid: &GridSpec, slice: &[Complex64], dir: Direction) -> Result<Vec<Complex64>> {
    let (nx, ny, nt) = (grid.n(Axis::X), grid.n(Axis::Y), grid.n(Axis::T));
    if slice.len() != nx * ny * nt {
        return Err(Error::Length {
            expected: nx * ny * nt,
            actual: slice.len(),
        });
    }
    let mut out = slice.to_vec();
    transform_strided(&mut out, nx, ny * nt, grid.step(Axis::X), false, dir);
    transform_strided(&mut out, ny, nt, grid.step(Axis::Y), false, dir);
    transform_strided(&mut out, nt, 1, grid.step(Axis::T), true, dir);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid() -> GridSpec {
        make_grid([4, 6, 4, 8], [0.5, 1.0, 0.75, 0.25], 1.0).unwrap()
    }

    #[test]
    fn slice_transform_matches_field_transform() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = Field::random(g, &mut rng);
        let full = forward_transform(&f, &Axis::TRANSVERSE_TIME).unwrap();
        let iz = 1;
        let pick = |f: &Field| -> Vec<Complex64> {
            let mut v = Vec::new();
            for ix in 0..g.n(Axis::X) {
                for iy in 0..g.n(Axis::Y) {
                    for it in 0..g.n(Axis::T) {
                        v.push(f.get([ix, iy, iz, it]));
                    }
                }
            }
            v
        };
        let s = slice_forward(&g, &pick(&f)).unwrap();
        let expect = pick(&full);
        assert!(crate::norm::relative_l2(&s, &expect, &expect) < 1e-14);
        let back = slice_inverse(&g, &s).unwrap();
        let orig = pick(&f);
        assert!(crate::norm::relative_l2(&back, &orig, &orig) < 1e-14);
        assert!(slice_forward(&g, &orig[1..]).is_err());
    }

    #[test]
    fn delta_transforms_to_constant() {
        let g = grid();
        let f = forward_transform(&Field::delta(g), &Axis::ALL).unwrap();
        for v in f.data() {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn constant_spectrum_inverts_to_delta() {
        let g = grid();
        let spec = Field::from_data(g, [Rep::Spectral; 4], vec![Complex64::new(1.0, 0.0); g.len()]).unwrap();
        let f = inverse_transform(&spec, &Axis::ALL).unwrap();
        let d = Field::delta(g);
        assert!(d.relative_diff(&f) < 1e-13);
    }

    #[test]
    fn plane_wave_lands_in_single_bin() {
        let g = make_grid([8, 8, 8, 8], [1.0; 4], 1.0).unwrap();
        let (jx, jt) = (6, 2);
        let k0 = g.freq(Axis::X, jx);
        let w0 = g.freq(Axis::T, jt);
        let f = Field::from_fn(g, |[x, _, _, t]| Complex64::from_polar(1.0, k0 * x - w0 * t));
        let s = forward_transform(&f, &Axis::ALL).unwrap();
        let peak = [jx, 4, 4, jt];
        for i in 0..g.len() {
            let idx = g.unflat(i);
            let v = s.data()[i].norm();
            if idx == peak {
                assert!((v - g.cell_measure() * g.len() as f64).abs() < 1e-9);
            } else {
                assert!(v < 1e-10, "leak at {idx:?}: {v}");
            }
        }
    }

    #[test]
    fn temporal_sign_is_opposite_to_spatial() {
        let g = make_grid([8, 2, 2, 8], [1.0; 4], 1.0).unwrap();
        let k0 = g.freq(Axis::X, 6);
        let w0 = g.freq(Axis::T, 6);
        // exp(−iω0 t) must land at −ω0, exp(+ik0 x) at +k0.
        let f = Field::from_fn(g, |[x, _, _, t]| Complex64::from_polar(1.0, k0 * x - w0 * t));
        let s = forward_transform(&f, &[Axis::X, Axis::T]).unwrap();
        let at = |jx, jt| s.get([jx, 1, 1, jt]).norm();
        assert!(at(6, 6) > 1.0);
        assert!(at(6, 2) < 1e-10);
        assert!(at(2, 6) < 1e-10);
    }

    #[test]
    fn roundtrip_every_axis_subset() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = Field::random(g, &mut rng);
        for mask in 1..16u32 {
            let axes: Vec<Axis> = Axis::ALL
                .iter()
                .copied()
                .filter(|a| mask & (1 << a.index()) != 0)
                .collect();
            let back = inverse_transform(&forward_transform(&f, &axes).unwrap(), &axes).unwrap();
            assert!(f.relative_diff(&back) < 1e-13);
            assert_eq!(back.rep(), [Rep::Physical; 4]);
        }
    }

    #[test]
    fn refuses_double_transform() {
        let g = grid();
        let f = forward_transform(&Field::zeros(g), &[Axis::Z]).unwrap();
        let err = forward_transform(&f, &[Axis::Z]).unwrap_err();
        assert!(matches!(err, Error::Representation { axis: Axis::Z, .. }));
        assert!(inverse_transform(&Field::zeros(g), &[Axis::T]).is_err());
    }
}
