//! Direct-sum reference implementations. Nothing here calls into the FFT
//! path.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{Field, Rep};
use crate::green::cell_mean_inverse_distance;
use crate::grid::Axis;
use crate::norm::CompensatedSum;

/// Largest product of requested axis lengths accepted by
/// [`brute_force_dft`].
pub const DFT_BIN_LIMIT: usize = 4096;

/// Largest grid accepted by [`retarded_quadrature`] (16³ × 32).
pub const QUADRATURE_BIN_LIMIT: usize = 16 * 16 * 16 * 32;

/// Forward transform over `axes` as an explicit nested sum,
/// `Σ f · exp(−i k·r + i ω t) · Π d`.
pub fn brute_force_dft(f: &Field, axes: &[Axis]) -> Result<Field> {
    let g = *f.grid();
    let mut axes: Vec<Axis> = axes.to_vec();
    axes.sort_by_key(|a| a.index());
    axes.dedup();
    let bins: usize = axes.iter().map(|&a| g.n(a)).product();
    if bins > DFT_BIN_LIMIT {
        return Err(Error::SizeGuard {
            bins,
            limit: DFT_BIN_LIMIT,
        });
    }
    for &a in &axes {
        if f.rep_of(a) != Rep::Physical {
            return Err(Error::Representation {
                axis: a,
                expected: "physical",
                actual: "spectral",
            });
        }
    }
    let weight: f64 = axes.iter().map(|&a| g.step(a)).product();
    let src = f.data();
    // Enumerate input offsets along the summed axes once.
    let mut sub: Vec<[usize; 4]> = vec![[0; 4]];
    for &a in &axes {
        sub = sub
            .into_iter()
            .flat_map(|idx| {
                (0..g.n(a)).map(move |j| {
                    let mut k = idx;
                    k[a.index()] = j;
                    k
                })
            })
            .collect();
    }
    let data = crate::par::map_range(g.len(), |out| {
        let o = g.unflat(out);
        let mut re = CompensatedSum::new();
        let mut im = CompensatedSum::new();
        for s in &sub {
            let mut idx = o;
            let mut phase = 0.0;
            for &a in &axes {
                let i = a.index();
                idx[i] = s[i];
                let x = g.coord(a, s[i]);
                let k = g.freq(a, o[i]);
                phase += if a.is_temporal() { k * x } else { -k * x };
            }
            let v = src[g.flat(idx)];
            let (sn, cs) = phase.sin_cos();
            re.add(v.re * cs - v.im * sn);
            im.add(v.re * sn + v.im * cs);
        }
        Complex64::new(re.value() * weight, im.value() * weight)
    });
    let mut rep = f.rep();
    for &a in &axes {
        rep[a.index()] = Rep::Spectral;
    }
    Field::from_data(g, rep, data)
}

/// `E(r, t) = −(1/4π) Σ_{r′} q(r′, t − |r − r′|/c) / |r − r′| · ΔV`.
///
/// Retarded times between samples use linear interpolation; times outside
/// the grid's window contribute nothing. The `r′ = r` term uses the mean of
/// `1/ρ` over one cell.
pub fn retarded_quadrature(q: &Field) -> Result<Field> {
    let g = *q.grid();
    if g.len() > QUADRATURE_BIN_LIMIT {
        return Err(Error::SizeGuard {
            bins: g.len(),
            limit: QUADRATURE_BIN_LIMIT,
        });
    }
    if !q.is_physical() {
        let axis = *Axis::ALL.iter().find(|&&a| q.rep_of(a) == Rep::Spectral).unwrap();
        return Err(Error::Representation {
            axis,
            expected: "physical",
            actual: "spectral",
        });
    }
    let [nx, ny, nz, nt] = g.counts;
    let [dx, dy, dz, dt] = g.steps;
    let dv = dx * dy * dz;
    let self_weight = cell_mean_inverse_distance(dx, dy, dz);

    // Displacement table over (2n−1)³ offsets: weight 1/ρ and delay in steps.
    let span = |n: usize| 2 * n - 1;
    let (sx, sy, sz) = (span(nx), span(ny), span(nz));
    let table: Vec<(f64, usize, f64)> = (0..sx * sy * sz)
        .map(|i| {
            let (a, b, c) = (i / (sy * sz), (i / sz) % sy, i % sz);
            let ox = (a as f64 - (nx - 1) as f64) * dx;
            let oy = (b as f64 - (ny - 1) as f64) * dy;
            let oz = (c as f64 - (nz - 1) as f64) * dz;
            let rho = (ox * ox + oy * oy + oz * oz).sqrt();
            if rho == 0.0 {
                return (self_weight, 0, 0.0);
            }
            let shift = rho / g.c / dt;
            let whole = shift.floor();
            (1.0 / rho, whole as usize, shift - whole)
        })
        .collect();

    let lines: Vec<&[Complex64]> = q.data().chunks(nt).collect();
    let scale = -dv / (4.0 * PI);
    let out: Vec<Vec<Complex64>> = crate::par::map_range(nx * ny * nz, |o| {
        let (ox, oy, oz) = (o / (ny * nz), (o / nz) % ny, o % nz);
        let mut acc = vec![Complex64::new(0.0, 0.0); nt];
        for (s, line) in lines.iter().enumerate() {
            let (px, py, pz) = (s / (ny * nz), (s / nz) % ny, s % nz);
            let key = ((ox + nx - 1 - px) * sy + (oy + ny - 1 - py)) * sz + (oz + nz - 1 - pz);
            let (w, m, frac) = table[key];
            if m >= nt {
                continue;
            }
            // q at t_i − (m + frac)·dt, between samples i − m − 1 and i − m.
            for i in m..nt {
                let hi = line[i - m];
                let lo = if i > m { line[i - m - 1] } else { Complex64::new(0.0, 0.0) };
                acc[i] += (hi * (1.0 - frac) + lo * frac) * w;
            }
        }
        acc.iter_mut().for_each(|v| *v *= scale);
        acc
    });
    Field::from_data(g, [Rep::Physical; 4], out.concat())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::transform::forward_transform;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dft_matches_fft_on_small_grid() {
        let g = make_grid([4, 4, 4, 4], [0.5, 0.7, 1.0, 0.3], 1.0).unwrap();
        let f = Field::random(g, &mut ChaCha8Rng::seed_from_u64(11));
        let a = brute_force_dft(&f, &Axis::ALL).unwrap();
        let b = forward_transform(&f, &Axis::ALL).unwrap();
        assert!(b.relative_diff(&a) < 1e-12);
        let a = brute_force_dft(&f, &[Axis::T, Axis::Y]).unwrap();
        let b = forward_transform(&f, &[Axis::Y, Axis::T]).unwrap();
        assert_eq!(a.rep(), b.rep());
        assert!(b.relative_diff(&a) < 1e-12);
    }

    #[test]
    fn dft_of_delta_is_constant() {
        let g = make_grid([4, 4, 4, 4], [1.0; 4], 1.0).unwrap();
        let a = brute_force_dft(&Field::delta(g), &Axis::ALL).unwrap();
        for v in a.data() {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn dft_is_linear() {
        let g = make_grid([4, 4, 2, 4], [1.0; 4], 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (f, h) = (Field::random(g, &mut rng), Field::random(g, &mut rng));
        let (a, b) = (Complex64::new(0.3, -1.2), Complex64::new(2.0, 0.5));
        let lhs = brute_force_dft(&f.clone().scale(a).add(&h.clone().scale(b)).unwrap(), &Axis::ALL).unwrap();
        let rhs = brute_force_dft(&f, &Axis::ALL)
            .unwrap()
            .scale(a)
            .add(&brute_force_dft(&h, &Axis::ALL).unwrap().scale(b))
            .unwrap();
        assert!(rhs.relative_diff(&lhs) < 1e-14);
    }

    #[test]
    fn dft_guards() {
        let g = make_grid([8, 8, 8, 16], [1.0; 4], 1.0).unwrap();
        let f = Field::zeros(g);
        assert!(matches!(brute_force_dft(&f, &Axis::ALL), Err(Error::SizeGuard { .. })));
        let s = forward_transform(&f, &[Axis::X]).unwrap();
        assert!(brute_force_dft(&s, &[Axis::X]).is_err());
    }

    #[test]
    fn static_source_reduces_to_coulomb_sum() {
        // Delays far below one time step: no retardation away from the
        // window start.
        let g = make_grid([4, 4, 4, 8], [1.0; 4], 1000.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let base = Field::random(make_grid([4, 4, 4, 2], [1.0; 4], 1.0).unwrap(), &mut rng);
        let q = Field::from_fn(g, |_| Complex64::new(0.0, 0.0)).map(|[x, y, z, _], _| base.get([x, y, z, 0]));
        let e = retarded_quadrature(&q).unwrap();
        let self_w = cell_mean_inverse_distance(1.0, 1.0, 1.0);
        for ox in 0..4 {
            for oy in 0..4 {
                for oz in 0..4 {
                    let mut s = Complex64::new(0.0, 0.0);
                    for px in 0..4 {
                        for py in 0..4 {
                            for pz in 0..4 {
                                let d = [ox as f64 - px as f64, oy as f64 - py as f64, oz as f64 - pz as f64];
                                let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                                let w = if r == 0.0 { self_w } else { 1.0 / r };
                                s += base.get([px, py, pz, 0]) * w;
                            }
                        }
                    }
                    let expect = -s / (4.0 * PI);
                    for it in 1..8 {
                        assert!((e.get([ox, oy, oz, it]) - expect).norm() < 1e-2 * expect.norm().max(1e-3));
                    }
                }
            }
        }
    }

    #[test]
    fn point_source_reproduces_the_retarded_potential() {
        // q = δ_grid(r) g(t): the sum collapses to the self term plus
        // −g(t − r/c) / (4π r) at every other point.
        use crate::green::{gaussian, GreenSpec, Sign, wave_green_analytic};
        let g = make_grid([8, 8, 8, 64], [1.0, 1.0, 1.0, 0.125], 1.0).unwrap();
        let spec = GreenSpec::new(g, 2.0, 1.0, 0.0, crate::beta::BranchPolicy::EvanescentDecay).unwrap();
        let c = [4, 4, 4];
        let q = Field::zeros(g).map(|[x, y, z, t], _| {
            if [x, y, z] == c {
                Complex64::new(gaussian(g.coord(Axis::T, t), 1.0), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let e = retarded_quadrature(&q).unwrap();
        let a = wave_green_analytic(Sign::Plus, &spec).unwrap();
        let mut worst = 0.0f64;
        for i in 0..g.len() {
            let idx = g.unflat(i);
            if [idx[0], idx[1], idx[2]] == c {
                continue;
            }
            worst = worst.max((e.data()[i] - a.data()[i]).norm());
        }
        let peak = a.data().iter().map(|v| v.norm()).fold(0.0, f64::max);
        // Linear interpolation in t: O(dt²) against the Gaussian's curvature.
        assert!(worst < 5e-3 * peak, "{worst} vs {peak}");
    }

    #[test]
    fn flash_peak_rides_the_light_cone() {
        use crate::propagator::SourceSpec;
        let g = make_grid([16, 16, 16, 32], [1.0, 1.0, 1.0, 0.5], 1.0).unwrap();
        let q = SourceSpec::point_mollified([2.0, 2.0, 2.0, 1.0]).to_field(&g).unwrap();
        let e = retarded_quadrature(&q).unwrap();
        let (cx, cy, cz) = (8, 8, 8);
        // Along +x, at late times the |E| peak sits near r = c t.
        for it in [24usize, 26, 28] {
            let t = g.coord(Axis::T, it);
            let (best, _) = (cx + 1..16)
                .map(|ix| (ix, e.get([ix, cy, cz, it]).norm() * (ix - cx) as f64))
                .fold((0, 0.0), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
            let r = g.coord(Axis::X, best);
            assert!((r - t).abs() <= 1.0 + 1e-12, "t = {t}, peak at r = {r}");
        }
    }

    #[test]
    fn quadrature_guards() {
        let g = make_grid([16, 16, 16, 64], [1.0; 4], 1.0).unwrap();
        assert!(matches!(retarded_quadrature(&Field::zeros(g)), Err(Error::SizeGuard { .. })));
    }
}
