//! z-marching and convolution solvers for the driven UPPE
//!
//! ```text
//! ∂z Ẽ = i β_z Ẽ + Q̃ / (2 i β_z)
//! ```
//!
//! posed per `(k⊥, ω)` mode. Slices are stored in the `(k_x, k_y, ω)`
//! layout of [`BetaZTable`], `ω` fastest.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::beta::BetaZTable;
use crate::error::{Error, Result};
use crate::field::{Field, Rep};
use crate::green::{excluded_mass, gaussian, ExcludedMass};
use crate::grid::{Axis, GridSpec};
use crate::norm::CompensatedSum;
use crate::projectors::{heaviside, make_mask, ProjectorKind};
use crate::transform::{forward_transform, inverse_transform, slice_forward, slice_inverse};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionFilter {
    #[default]
    None,
    Forward,
    Backward,
}

#[derive(Debug, Clone)]
pub enum SourceKind {
    /// Normalised Gaussian on all four axes (unit space-time integral).
    PointMollified,
    /// Gaussian envelope with a temporal carrier `exp(−iω₀(t − t_c))`.
    GaussianPulse,
    /// Gaussian envelope with carrier `exp(i k₀ (z − z_c) − i ω₀ (t − t_c))`.
    PlaneWavePacket,
    /// Samples supplied on the grid, physical in every axis.
    CustomGrid(Field),
}

#[derive(Debug, Clone)]
pub struct SourceSpec {
    pub kind: SourceKind,
    pub center: [f64; 4],
    pub widths: [f64; 4],
    pub amplitude: f64,
    pub carrier_kz: f64,
    pub carrier_omega: f64,
    pub direction_filter: DirectionFilter,
}

impl SourceSpec {
    pub fn point_mollified(widths: [f64; 4]) -> Self {
        Self {
            kind: SourceKind::PointMollified,
            center: [0.0; 4],
            widths,
            amplitude: 1.0,
            carrier_kz: 0.0,
            carrier_omega: 0.0,
            direction_filter: DirectionFilter::None,
        }
    }

    pub fn gaussian_pulse(center: [f64; 4], widths: [f64; 4], omega0: f64) -> Self {
        Self {
            kind: SourceKind::GaussianPulse,
            center,
            widths,
            amplitude: 1.0,
            carrier_kz: 0.0,
            carrier_omega: omega0,
            direction_filter: DirectionFilter::None,
        }
    }

    pub fn plane_wave_packet(center: [f64; 4], widths: [f64; 4], kz0: f64, omega0: f64) -> Self {
        Self {
            kind: SourceKind::PlaneWavePacket,
            center,
            widths,
            amplitude: 1.0,
            carrier_kz: kz0,
            carrier_omega: omega0,
            direction_filter: DirectionFilter::None,
        }
    }

    pub fn custom_grid(field: Field) -> Self {
        Self {
            kind: SourceKind::CustomGrid(field),
            center: [0.0; 4],
            widths: [0.0; 4],
            amplitude: 1.0,
            carrier_kz: 0.0,
            carrier_omega: 0.0,
            direction_filter: DirectionFilter::None,
        }
    }

    pub fn with_filter(mut self, filter: DirectionFilter) -> Self {
        self.direction_filter = filter;
        self
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if !self.amplitude.is_finite() {
            return Err(Error::InvalidParameter("source amplitude must be finite".into()));
        }
        match &self.kind {
            SourceKind::CustomGrid(f) => {
                if !f.grid().same_shape(grid) {
                    return Err(Error::GridMismatch);
                }
                if !f.is_physical() {
                    return Err(Error::InvalidParameter("custom source must be physical on every axis".into()));
                }
            }
            _ => {
                for axis in Axis::ALL {
                    let w = self.widths[axis.index()];
                    let min = 2.0 * grid.step(axis);
                    if !(w >= min * (1.0 - 1e-12)) {
                        return Err(Error::InvalidParameter(format!(
                            "source width along {axis} is {w}, below two grid steps ({min})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn is_analytic(&self) -> bool {
        !matches!(self.kind, SourceKind::CustomGrid(_)) && self.direction_filter == DirectionFilter::None
    }

    /// Closed-form value; `None` for grid-defined sources.
    pub fn value_at(&self, p: [f64; 4]) -> Option<Complex64> {
        let u: [f64; 4] = std::array::from_fn(|a| p[a] - self.center[a]);
        let env = match self.kind {
            SourceKind::CustomGrid(_) => return None,
            SourceKind::PointMollified => (0..4).map(|a| gaussian(u[a], self.widths[a])).product::<f64>(),
            _ => (-0.5 * (0..4).map(|a| (u[a] / self.widths[a]).powi(2)).sum::<f64>()).exp(),
        };
        let phase = match self.kind {
            SourceKind::GaussianPulse => -self.carrier_omega * u[3],
            SourceKind::PlaneWavePacket => self.carrier_kz * u[2] - self.carrier_omega * u[3],
            _ => 0.0,
        };
        Some(Complex64::from_polar(self.amplitude * env, phase))
    }

    /// Sample on the grid and apply the direction filter.
    pub fn to_field(&self, grid: &GridSpec) -> Result<Field> {
        self.validate(grid)?;
        let raw = match &self.kind {
            SourceKind::CustomGrid(f) => f.clone().scale(Complex64::new(self.amplitude, 0.0)),
            _ => Field::from_fn(*grid, |p| self.value_at(p).unwrap_or(ZERO)),
        };
        match self.direction_filter {
            DirectionFilter::None => Ok(raw),
            DirectionFilter::Forward => make_mask(ProjectorKind::Pplus, grid).apply(&raw),
            DirectionFilter::Backward => make_mask(ProjectorKind::Pminus, grid).apply(&raw),
        }
    }

    pub fn prepare(&self, grid: &GridSpec) -> Result<PreparedSource> {
        self.validate(grid)?;
        let inner = if self.is_analytic() {
            Prepared::Analytic(self.clone())
        } else {
            Prepared::Grid(self.to_field(grid)?)
        };
        Ok(PreparedSource { grid: *grid, inner })
    }
}

#[derive(Debug, Clone)]
enum Prepared {
    Analytic(SourceSpec),
    Grid(Field),
}

/// A source that can be sampled at any `z`: closed-form profiles exactly,
/// grid data by linear interpolation between slices (zero outside).
#[derive(Debug, Clone)]
pub struct PreparedSource {
    grid: GridSpec,
    inner: Prepared,
}

impl PreparedSource {
    pub fn physical_slice(&self, z: f64) -> Vec<Complex64> {
        let g = &self.grid;
        let (nx, ny, nt) = (g.n(Axis::X), g.n(Axis::Y), g.n(Axis::T));
        match &self.inner {
            Prepared::Analytic(spec) => crate::par::map_range(nx * ny * nt, |i| {
                let (ix, iy, it) = (i / (ny * nt), (i / nt) % ny, i % nt);
                let p = [g.coord(Axis::X, ix), g.coord(Axis::Y, iy), z, g.coord(Axis::T, it)];
                spec.value_at(p).unwrap_or(ZERO)
            }),
            Prepared::Grid(f) => {
                let nz = g.n(Axis::Z);
                let u = (z - g.coord(Axis::Z, 0)) / g.step(Axis::Z);
                let mut j = u.floor();
                let mut w = u - j;
                if 1.0 - w < 1e-9 {
                    j += 1.0;
                    w = 0.0;
                }
                let j = j as i64;
                let pick = |jz: i64| -> Option<Vec<Complex64>> {
                    (0..nz as i64).contains(&jz).then(|| crate::green::extract_z_slice(f, jz as usize))
                };
                let mut out = vec![ZERO; nx * ny * nt];
                for (jz, weight) in [(j, 1.0 - w), (j + 1, w)] {
                    if weight < 1e-9 {
                        continue;
                    }
                    if let Some(s) = pick(jz) {
                        out.iter_mut().zip(s).for_each(|(o, v)| *o += v * weight);
                    }
                }
                out
            }
        }
    }

    pub fn spectral_slice(&self, z: f64) -> Result<Vec<Complex64>> {
        slice_forward(&self.grid, &self.physical_slice(z))
    }
}

/// One `z` slice in `(k⊥, ω)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub z: f64,
    pub spectrum: Vec<Complex64>,
}

impl Slice {
    pub fn zeros(grid: &GridSpec, z: f64) -> Self {
        Self {
            z,
            spectrum: vec![ZERO; grid.n(Axis::X) * grid.n(Axis::Y) * grid.n(Axis::T)],
        }
    }

    pub fn to_physical(&self, grid: &GridSpec) -> Result<Vec<Complex64>> {
        slice_inverse(grid, &self.spectrum)
    }
}

/// `(e^{x} − 1) / x · dz` with `x = iβ dz`, by series near zero.
fn phi(beta: Complex64, dz: f64) -> Complex64 {
    let x = I * beta * dz;
    if x.norm() < 1e-4 {
        dz * (1.0 + x / 2.0 + x * x / 6.0 + x * x * x / 24.0)
    } else {
        dz * (x.exp() - 1.0) / x
    }
}

/// One exponential-integrator step with `Q̃` held constant. Returns the new
/// slice spectrum and the number of excluded bins whose source term was
/// dropped.
pub fn step(table: &BetaZTable, field: &[Complex64], source: &[Complex64], dz: f64) -> Result<(Vec<Complex64>, usize)> {
    if !(dz > 0.0) {
        return Err(Error::InvalidParameter(format!("dz = {dz} must be positive")));
    }
    let g = table.grid();
    let (ny, nt) = (g.n(Axis::Y), g.n(Axis::T));
    let len = g.n(Axis::X) * ny * nt;
    for v in [field, source] {
        if v.len() != len {
            return Err(Error::Length {
                expected: len,
                actual: v.len(),
            });
        }
    }
    let out = crate::par::map_range(len, |i| {
        let (ix, iy, it) = (i / (ny * nt), (i / nt) % ny, i % nt);
        let rotated = table.phase(ix, iy, it, dz) * field[i];
        if table.is_excluded(ix, iy, it) {
            return rotated;
        }
        rotated + phi(table.value(ix, iy, it), dz) * table.source_coupling(ix, iy, it) * source[i]
    });
    let dropped = (0..len)
        .filter(|&i| table.is_excluded(i / (ny * nt), (i / nt) % ny, i % nt) && source[i] != ZERO)
        .count();
    Ok((out, dropped))
}

#[derive(Debug, Clone)]
pub struct MarchResult {
    /// Kept slices, the first being the initial one and the last `z_final`.
    pub slices: Vec<Slice>,
    pub steps: usize,
    /// Excluded-bin source terms dropped, summed over steps.
    pub dropped_source_terms: usize,
}

impl MarchResult {
    pub fn last(&self) -> &Slice {
        self.slices.last().expect("march keeps at least the initial slice")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarchOptions {
    pub z_start: f64,
    pub z_final: f64,
    pub dz: f64,
    /// Keep every `decimation`-th slice (the final one is always kept).
    pub decimation: usize,
}

/// March from `initial` (zero if `None`) at `z_start` to `z_final`,
/// sampling the source at the left end of every step.
pub fn march(
    table: &BetaZTable,
    initial: Option<&Slice>,
    source: Option<&PreparedSource>,
    opts: MarchOptions,
) -> Result<MarchResult> {
    let g = *table.grid();
    let MarchOptions {
        z_start,
        z_final,
        dz,
        decimation,
    } = opts;
    if !(dz > 0.0) {
        return Err(Error::InvalidParameter(format!("dz = {dz} must be positive")));
    }
    if !(z_final > z_start) {
        return Err(Error::InvalidParameter(format!("z_final = {z_final} must exceed z_start = {z_start}")));
    }
    let ratio = (z_final - z_start) / dz;
    let steps = ratio.round() as usize;
    if (ratio - steps as f64).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "dz = {dz} does not divide the march length {}",
            z_final - z_start
        )));
    }
    let decimation = decimation.max(1);
    let mut current = match initial {
        Some(s) => Slice {
            z: z_start,
            spectrum: s.spectrum.clone(),
        },
        None => Slice::zeros(&g, z_start),
    };
    let len = current.spectrum.len();
    if current.spectrum.len() != g.n(Axis::X) * g.n(Axis::Y) * g.n(Axis::T) {
        return Err(Error::Length {
            expected: g.n(Axis::X) * g.n(Axis::Y) * g.n(Axis::T),
            actual: len,
        });
    }
    let zero_source = vec![ZERO; len];
    let mut slices = vec![current.clone()];
    let mut dropped = 0;
    for n in 0..steps {
        let z = z_start + n as f64 * dz;
        let q = match source {
            Some(s) => s.spectral_slice(z)?,
            None => zero_source.clone(),
        };
        let (next, d) = step(table, &current.spectrum, &q, dz)?;
        dropped += d;
        current = Slice {
            z: z_start + (n + 1) as f64 * dz,
            spectrum: next,
        };
        if (n + 1) % decimation == 0 || n + 1 == steps {
            slices.push(current.clone());
        }
    }
    Ok(MarchResult {
        slices,
        steps,
        dropped_source_terms: dropped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZBoundary {
    /// Linear convolution; the source is zero outside the grid.
    #[default]
    Open,
    /// Circular convolution over the grid period, lags wrapped to the
    /// centred range.
    Periodic,
}

#[derive(Debug, Clone)]
pub struct Convolution {
    pub field: Field,
    pub excluded: ExcludedMass,
}

impl Convolution {
    /// `(k⊥, ω)` spectrum of the output slice at `z` bin `iz`.
    pub fn spectral_slice(&self, iz: usize) -> Result<Vec<Complex64>> {
        slice_forward(self.field.grid(), &crate::green::extract_z_slice(&self.field, iz))
    }
}

/// `𝓔⋆Q`: transforms over `(x, y, t)` and a direct sum over source slices,
/// `Σ_j Θ(z_i − z_j) exp(iβ_z (z_i − z_j)) / (2iβ_z) · Q̃(z_j) dz`.
pub fn solve_convolution(table: &BetaZTable, q: &Field, boundary: ZBoundary) -> Result<Convolution> {
    let g = *table.grid();
    if !g.same_shape(q.grid()) {
        return Err(Error::GridMismatch);
    }
    if !q.is_physical() {
        let axis = *Axis::ALL.iter().find(|&&a| q.rep_of(a) == Rep::Spectral).unwrap();
        return Err(Error::Representation {
            axis,
            expected: "physical",
            actual: "spectral",
        });
    }
    let qs = forward_transform(q, &Axis::TRANSVERSE_TIME)?;
    let nz = g.n(Axis::Z);
    let (ny, nt) = (g.n(Axis::Y), g.n(Axis::T));
    let len = g.n(Axis::X) * ny * nt;
    let dz = g.step(Axis::Z);
    let slices: Vec<Vec<Complex64>> = (0..nz).map(|iz| crate::green::extract_z_slice(&qs, iz)).collect();

    // Kernel per non-negative lag; negative lags vanish under Θ.
    let kernels: Vec<Vec<Complex64>> = crate::par::map_range(nz, |m| {
        let zeta = m as f64 * dz;
        let gate = heaviside(zeta);
        (0..len)
            .map(|i| {
                let (ix, iy, it) = (i / (ny * nt), (i / nt) % ny, i % nt);
                table.phase(ix, iy, it, zeta) * table.source_coupling(ix, iy, it) * (gate * dz)
            })
            .collect()
    });
    let lag = |i: usize, j: usize| -> Option<usize> {
        let d = i as i64 - j as i64;
        let d = match boundary {
            ZBoundary::Open => d,
            ZBoundary::Periodic => {
                let n = nz as i64;
                (d + n / 2).rem_euclid(n) - n / 2
            }
        };
        (d >= 0).then_some(d as usize)
    };

    let out: Vec<Vec<Complex64>> = crate::par::map_range(nz, |iz| {
        let mut acc = vec![ZERO; len];
        for (jz, src) in slices.iter().enumerate() {
            let Some(m) = lag(iz, jz) else { continue };
            let k = &kernels[m];
            for ((a, kv), s) in acc.iter_mut().zip(k).zip(src) {
                *a += kv * s;
            }
        }
        acc
    });

    let rep = [Rep::Spectral, Rep::Spectral, Rep::Physical, Rep::Spectral];
    let mut f = Field::from_data(g, rep, vec![ZERO; g.len()])?;
    for (iz, slice) in out.iter().enumerate() {
        for (i, v) in slice.iter().enumerate() {
            let (ix, iy, it) = (i / (ny * nt), (i / nt) % ny, i % nt);
            f.set([ix, iy, iz, it], *v);
        }
    }
    let field = inverse_transform(&f, &Axis::TRANSVERSE_TIME)?;

    let flat: Vec<Complex64> = slices.concat();
    let mut total = CompensatedSum::new();
    let mut dropped = CompensatedSum::new();
    let mut bins = 0;
    for chunk in flat.chunks(len) {
        let m = excluded_mass(table, chunk);
        let e = crate::norm::norm_sqr(chunk);
        total.add(e);
        dropped.add(m.fraction * e);
        bins = m.bins;
    }
    let t = total.value();
    Ok(Convolution {
        field,
        excluded: ExcludedMass {
            bins,
            fraction: if t > 0.0 { dropped.value() / t } else { 0.0 },
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionReport {
    pub forward_fraction: f64,
    pub backward_fraction: f64,
}

/// Energy split of `q` between `P+ q` and `P− q`, normalised by their sum.
pub fn source_direction_report(q: &Field) -> Result<DirectionReport> {
    let g = q.grid();
    let f = make_mask(ProjectorKind::Pplus, g).apply(q)?;
    let b = make_mask(ProjectorKind::Pminus, g).apply(q)?;
    let (ef, eb) = (crate::norm::norm_sqr(f.data()), crate::norm::norm_sqr(b.data()));
    let t = ef + eb;
    if t == 0.0 {
        return Ok(DirectionReport {
            forward_fraction: 0.0,
            backward_fraction: 0.0,
        });
    }
    Ok(DirectionReport {
        forward_fraction: ef / t,
        backward_fraction: eb / t,
    })
}
