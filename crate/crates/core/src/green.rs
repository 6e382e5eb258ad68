//! Fundamental solutions on the grid.
//!
//! All constructions share one regularised source: a normalised Gaussian of
//! width `sigma_r` in `x` and `y`, a Gaussian of width `sigma_t` in `t`, and
//! a single-bin delta (`1/dz` on the `z = 0` slice) in `z`. The `z` factor
//! is left unmollified because the UPPE kernel treats `δ(z)` exactly and the
//! `Θ(z)` gate needs a sharp `z = 0` slice.
//!
//! Routes:
//!
//! * [`uppe_green`]: per `z` slice, `Θ(z) F⁻¹[exp(iβ_z z) / (2iβ_z) · ŝ]`.
//! * [`uppe_green_split`]: `𝓔± = ±(ic/2) F⁻¹_k[Θ(k_z) exp(∓ickt) / k]`.
//! * [`wave_green_spectral`]: `𝓔□± = −c Θ(±t) F⁻¹_k[sin(ck|t|) / k]`.
//! * [`paraxial_green`]: `𝓔p± = ±(ic/2) F⁻¹_k[Θ(k_z) (k_z/k²) exp(∓ickt)]`.
//!
//! In the `(k, t)` routes the temporal mollifier is applied as a direct
//! convolution sum over the sampled Gaussian.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::beta::{build_beta_z, BetaZTable, BranchPolicy};
use crate::error::{Error, Result};
use crate::field::{Field, Rep};
use crate::grid::{Axis, GridSpec};
use crate::norm::{self, CompensatedSum};
use crate::projectors::{heaviside, make_mask, ProjectorKind};
use crate::transform::{forward_transform, inverse_transform};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenSpec {
    pub grid: GridSpec,
    pub mollifier_sigma_r: f64,
    pub mollifier_sigma_t: f64,
    pub light_line_epsilon: f64,
    pub branch_policy: BranchPolicy,
}

impl GreenSpec {
    pub fn new(
        grid: GridSpec,
        sigma_r: f64,
        sigma_t: f64,
        epsilon: f64,
        branch_policy: BranchPolicy,
    ) -> Result<Self> {
        let min_r = 2.0 * grid.step(Axis::X).max(grid.step(Axis::Y));
        let min_t = 2.0 * grid.step(Axis::T);
        if !(sigma_r >= min_r * (1.0 - 1e-12)) {
            return Err(Error::InvalidParameter(format!(
                "mollifier_sigma_r = {sigma_r} must be at least two transverse steps ({min_r})"
            )));
        }
        if !(sigma_t >= min_t * (1.0 - 1e-12)) {
            return Err(Error::InvalidParameter(format!(
                "mollifier_sigma_t = {sigma_t} must be at least two time steps ({min_t})"
            )));
        }
        if !(epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!("light_line_epsilon = {epsilon} must be >= 0")));
        }
        Ok(Self {
            grid,
            mollifier_sigma_r: sigma_r,
            mollifier_sigma_t: sigma_t,
            light_line_epsilon: epsilon,
            branch_policy,
        })
    }

    /// Two-step mollifier and the default light-line width.
    pub fn with_defaults(grid: GridSpec) -> Self {
        Self {
            grid,
            mollifier_sigma_r: 2.0 * grid.step(Axis::X).max(grid.step(Axis::Y)),
            mollifier_sigma_t: 2.0 * grid.step(Axis::T),
            light_line_epsilon: crate::beta::default_epsilon(&grid),
            branch_policy: BranchPolicy::EvanescentDecay,
        }
    }

    pub fn beta_table(&self) -> BetaZTable {
        build_beta_z(&self.grid, self.branch_policy, self.light_line_epsilon)
    }
}

pub fn gaussian(x: f64, sigma: f64) -> f64 {
    (-0.5 * (x / sigma).powi(2)).exp() / (sigma * (2.0 * PI).sqrt())
}

/// Sampled Gaussian on the grid's time axis.
pub(crate) fn temporal_samples(spec: &GreenSpec) -> Vec<f64> {
    spec.grid
        .coords(Axis::T)
        .iter()
        .map(|&t| gaussian(t, spec.mollifier_sigma_t))
        .collect()
}

/// Discrete transform of the sampled transverse Gaussian on one axis.
pub(crate) fn transverse_spectrum(spec: &GreenSpec, axis: Axis) -> Vec<Complex64> {
    let g = &spec.grid;
    let d = g.step(axis);
    (0..g.n(axis))
        .map(|m| {
            let k = g.freq(axis, m);
            let mut re = CompensatedSum::new();
            let mut im = CompensatedSum::new();
            for j in 0..g.n(axis) {
                let x = g.coord(axis, j);
                let v = gaussian(x, spec.mollifier_sigma_r) * d;
                re.add(v * (k * x).cos());
                im.add(-v * (k * x).sin());
            }
            Complex64::new(re.value(), im.value())
        })
        .collect()
}

/// The regularised point source: Gaussian in `x, y, t`, one-bin delta in `z`.
pub fn mollified_delta(spec: &GreenSpec) -> Field {
    let g = spec.grid;
    let zc = g.center(Axis::Z);
    let dz = g.step(Axis::Z);
    let (sr, st) = (spec.mollifier_sigma_r, spec.mollifier_sigma_t);
    Field::from_fn(g, |_| ZERO).map(|idx, _| {
        if idx[2] != zc {
            return ZERO;
        }
        let x = g.coord(Axis::X, idx[0]);
        let y = g.coord(Axis::Y, idx[1]);
        let t = g.coord(Axis::T, idx[3]);
        Complex64::new(gaussian(x, sr) * gaussian(y, sr) * gaussian(t, st) / dz, 0.0)
    })
}

/// Mass share of a spectrum that falls on excluded bins.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExcludedMass {
    pub bins: usize,
    pub fraction: f64,
}

// ---------------------------------------------------------------------------
// Direct spectral construction
// ---------------------------------------------------------------------------

/// Output of [`uppe_green`].
#[derive(Debug, Clone)]
pub struct UppeGreen {
    pub field: Field,
    pub excluded: ExcludedMass,
}

/// `(k⊥, ω)` spectrum of the transverse/temporal source profile,
/// `n_x × n_y × n_t` with `ω` fastest.
pub(crate) fn source_profile_spectrum(spec: &GreenSpec) -> Result<Vec<Complex64>> {
    let g = spec.grid;
    let s = forward_transform(&mollified_delta(spec), &Axis::TRANSVERSE_TIME)?;
    let zc = g.center(Axis::Z);
    let dz = g.step(Axis::Z);
    let (nx, ny, nt) = (g.n(Axis::X), g.n(Axis::Y), g.n(Axis::T));
    let mut out = Vec::with_capacity(nx * ny * nt);
    for ix in 0..nx {
        for iy in 0..ny {
            for it in 0..nt {
                out.push(s.get([ix, iy, zc, it]) * dz);
            }
        }
    }
    Ok(out)
}

pub(crate) fn excluded_mass(table: &BetaZTable, spectrum: &[Complex64]) -> ExcludedMass {
    let g = table.grid();
    let nt = g.n(Axis::T);
    let ny = g.n(Axis::Y);
    let mut total = CompensatedSum::new();
    let mut dropped = CompensatedSum::new();
    let mut bins = 0;
    for (i, v) in spectrum.iter().enumerate() {
        let (ix, iy, it) = (i / (ny * nt), (i / nt) % ny, i % nt);
        let e = v.norm_sqr();
        total.add(e);
        if table.is_excluded(ix, iy, it) {
            dropped.add(e);
            bins += 1;
        }
    }
    let t = total.value();
    ExcludedMass {
        bins,
        fraction: if t > 0.0 { dropped.value() / t } else { 0.0 },
    }
}

/// Ungated `(k⊥, ω)` spectrum `exp(iβ_z z)/(2iβ_z) · ŝ` at height `z ≥ 0`.
fn uppe_slice_spectrum(table: &BetaZTable, profile: &[Complex64], z: f64) -> Vec<Complex64> {
    let g = table.grid();
    let (ny, nt) = (g.n(Axis::Y), g.n(Axis::T));
    profile
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (ix, iy, it) = (i / (ny * nt), (i / nt) % ny, i % nt);
            table.phase(ix, iy, it, z) * table.source_coupling(ix, iy, it) * s
        })
        .collect()
}

/// Assemble `(k⊥, ω)` slices (indexed by `z` bin) into a field and bring
/// `x, y, t` back to physical space.
fn slices_to_field(g: GridSpec, slices: &[Option<Vec<Complex64>>]) -> Result<Field> {
    let (ny, nt) = (g.n(Axis::Y), g.n(Axis::T));
    let rep = [Rep::Spectral, Rep::Spectral, Rep::Physical, Rep::Spectral];
    let mut f = Field::from_data(g, rep, vec![ZERO; g.len()])?;
    for (iz, slice) in slices.iter().enumerate() {
        let Some(slice) = slice else { continue };
        for (i, v) in slice.iter().enumerate() {
            let (ix, iy, it) = (i / (ny * nt), (i / nt) % ny, i % nt);
            f.set([ix, iy, iz, it], *v);
        }
    }
    inverse_transform(&f, &Axis::TRANSVERSE_TIME)
}

pub fn uppe_green(spec: &GreenSpec) -> Result<UppeGreen> {
    let g = spec.grid;
    let table = spec.beta_table();
    let profile = source_profile_spectrum(spec)?;
    let slices: Vec<Option<Vec<Complex64>>> = crate::par::map_range(g.n(Axis::Z), |iz| {
        let z = g.coord(Axis::Z, iz);
        let gate = heaviside(z);
        (gate > 0.0).then(|| {
            uppe_slice_spectrum(&table, &profile, z)
                .into_iter()
                .map(|v| v * gate)
                .collect()
        })
    });
    Ok(UppeGreen {
        field: slices_to_field(g, &slices)?,
        excluded: excluded_mass(&table, &profile),
    })
}

/// The `z = 0` slice of [`uppe_green`] before the `Θ(z)` gate, as a physical
/// `(x, y, t)` array in field layout order.
pub fn uppe_green_ungated_origin_slice(spec: &GreenSpec) -> Result<Vec<Complex64>> {
    let g = spec.grid;
    let table = spec.beta_table();
    let profile = source_profile_spectrum(spec)?;
    let mut slices = vec![None; g.n(Axis::Z)];
    let zc = g.center(Axis::Z);
    slices[zc] = Some(uppe_slice_spectrum(&table, &profile, 0.0));
    let f = slices_to_field(g, &slices)?;
    Ok(extract_z_slice(&f, zc))
}

pub fn extract_z_slice(f: &Field, iz: usize) -> Vec<Complex64> {
    let g = f.grid();
    let mut out = Vec::with_capacity(g.n(Axis::X) * g.n(Axis::Y) * g.n(Axis::T));
    for ix in 0..g.n(Axis::X) {
        for iy in 0..g.n(Axis::Y) {
            for it in 0..g.n(Axis::T) {
                out.push(f.get([ix, iy, iz, it]));
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// (k, t) routes
// ---------------------------------------------------------------------------

/// Unmollified `𝓔□±` in `(k, t)`: `−c Θ(±t) sin(ck|t|) / k`, with the
/// `k → 0` limit `−c Θ(±t) c|t|`.
pub fn wave_kernel(sign: Sign, c: f64, k: f64, t: f64) -> f64 {
    let gate = heaviside(sign.value() * t);
    if gate == 0.0 {
        return 0.0;
    }
    let at = t.abs();
    if k == 0.0 {
        -c * gate * c * at
    } else {
        -c * gate * (c * k * at).sin() / k
    }
}

/// Per spatial-frequency bin data shared by the `(k, t)` constructions.
struct KBin {
    kz: f64,
    k: f64,
    transverse: Complex64,
}

fn k_bins(spec: &GreenSpec) -> Vec<KBin> {
    k_bins_with(spec, true)
}

fn k_bins_with(spec: &GreenSpec, transverse: bool) -> Vec<KBin> {
    let g = &spec.grid;
    let ones = |axis| vec![Complex64::new(1.0, 0.0); g.n(axis)];
    let (sx, sy) = if transverse {
        (transverse_spectrum(spec, Axis::X), transverse_spectrum(spec, Axis::Y))
    } else {
        (ones(Axis::X), ones(Axis::Y))
    };
    let (nx, ny, nz) = (g.n(Axis::X), g.n(Axis::Y), g.n(Axis::Z));
    let mut out = Vec::with_capacity(nx * ny * nz);
    for ix in 0..nx {
        let kx = g.freq(Axis::X, ix);
        for iy in 0..ny {
            let ky = g.freq(Axis::Y, iy);
            for iz in 0..nz {
                let kz = g.freq(Axis::Z, iz);
                out.push(KBin {
                    kz,
                    k: (kx * kx + ky * ky + kz * kz).sqrt(),
                    transverse: sx[ix] * sy[iy],
                });
            }
        }
    }
    out
}

/// Build a field whose `(k, t)` values come from `f(bin, t_index)`, then
/// inverse-transform the spatial axes.
fn from_kt<F>(g: GridSpec, f: F) -> Result<Field>
where
    F: Fn(usize) -> Vec<Complex64> + Sync + Send,
{
    let nt = g.n(Axis::T);
    let nk = g.len() / nt;
    let lines = crate::par::map_range(nk, f);
    let mut data = Vec::with_capacity(g.len());
    for line in lines {
        debug_assert_eq!(line.len(), nt);
        data.extend(line);
    }
    let rep = [Rep::Spectral, Rep::Spectral, Rep::Spectral, Rep::Physical];
    inverse_transform(&Field::from_data(g, rep, data)?, &Axis::SPACE)
}

pub fn wave_green_spectral(sign: Sign, spec: &GreenSpec) -> Result<Field> {
    wave_green_spectral_with(sign, spec, true)
}

/// [`wave_green_spectral`] with the temporal mollifier only, the
/// counterpart of [`wave_green_analytic`].
pub fn wave_green_spectral_time_mollified(sign: Sign, spec: &GreenSpec) -> Result<Field> {
    wave_green_spectral_with(sign, spec, false)
}

fn wave_green_spectral_with(sign: Sign, spec: &GreenSpec, transverse: bool) -> Result<Field> {
    let g = spec.grid;
    let c = g.c;
    let nt = g.n(Axis::T);
    let dt = g.step(Axis::T);
    let h = temporal_samples(spec);
    let bins = k_bins_with(spec, transverse);
    from_kt(g, |b| {
        let bin = &bins[b];
        // Kernel on every lag (i − j)·dt, i, j ∈ [0, nt).
        let kernel: Vec<f64> = (0..2 * nt - 1)
            .map(|m| wave_kernel(sign, c, bin.k, (m as f64 - (nt - 1) as f64) * dt))
            .collect();
        (0..nt)
            .map(|i| {
                let s: f64 = norm::sum((0..nt).map(|j| kernel[i + nt - 1 - j] * h[j] * dt));
                bin.transverse * s
            })
            .collect()
    })
}

/// `Σ_j exp(i a τ_j) g(τ_j) dt`: the sampled temporal mollifier seen by a
/// mode oscillating as `exp(−i a t)`.
fn temporal_factor(h: &[f64], ts: &[f64], dt: f64, a: f64) -> Complex64 {
    let mut re = CompensatedSum::new();
    let mut im = CompensatedSum::new();
    for (&w, &t) in h.iter().zip(ts) {
        re.add(w * (a * t).cos() * dt);
        im.add(w * (a * t).sin() * dt);
    }
    Complex64::new(re.value(), im.value())
}

/// Which spatial symbol multiplies `±(ic/2) Θ(k_z) exp(∓ickt)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SplitSymbol {
    /// `1/k` (full UPPE).
    Full,
    /// `k_z/k²` (paraxial UPPE).
    Paraxial,
    /// `1/k · 1/(∓ick)`: time antiderivative of the full kernel.
    FullAntiderivative,
}

fn split_kt(spec: &GreenSpec, sign: Sign, symbol: SplitSymbol) -> Vec<Vec<Complex64>> {
    let g = spec.grid;
    let c = g.c;
    let ts = g.coords(Axis::T);
    let dt = g.step(Axis::T);
    let h = temporal_samples(spec);
    let bins = k_bins(spec);
    let s = sign.value();
    crate::par::map_range(bins.len(), |b| {
        let bin = &bins[b];
        let theta = heaviside(bin.kz);
        if bin.k == 0.0 || theta == 0.0 {
            return vec![ZERO; ts.len()];
        }
        let sym = match symbol {
            SplitSymbol::Full => Complex64::new(1.0 / bin.k, 0.0),
            SplitSymbol::Paraxial => Complex64::new(bin.kz / (bin.k * bin.k), 0.0),
            SplitSymbol::FullAntiderivative => 1.0 / (bin.k * (-s * I * c * bin.k)),
        };
        let amp = s * I * c / 2.0 * theta * sym * bin.transverse * temporal_factor(&h, &ts, dt, s * c * bin.k);
        ts.iter().map(|&t| amp * (-s * I * c * bin.k * t).exp()).collect()
    })
}

fn kt_to_field(g: GridSpec, lines: Vec<Vec<Complex64>>) -> Result<Field> {
    from_kt(g, |b| lines[b].clone())
}

/// The pair `𝓔±` (ungated), both physical.
#[derive(Debug, Clone)]
pub struct GreenPair {
    pub e_plus: Field,
    pub e_minus: Field,
    /// The `k = 0` bin is dropped from `1/k`.
    pub excluded_bins: usize,
}

impl GreenPair {
    pub fn sum(&self) -> Result<Field> {
        self.e_plus.add(&self.e_minus)
    }

    pub fn get(&self, sign: Sign) -> &Field {
        match sign {
            Sign::Plus => &self.e_plus,
            Sign::Minus => &self.e_minus,
        }
    }
}

pub fn uppe_green_split(spec: &GreenSpec) -> Result<GreenPair> {
    let g = spec.grid;
    Ok(GreenPair {
        e_plus: kt_to_field(g, split_kt(spec, Sign::Plus, SplitSymbol::Full))?,
        e_minus: kt_to_field(g, split_kt(spec, Sign::Minus, SplitSymbol::Full))?,
        excluded_bins: 1,
    })
}

pub fn paraxial_green_split(spec: &GreenSpec) -> Result<GreenPair> {
    let g = spec.grid;
    Ok(GreenPair {
        e_plus: kt_to_field(g, split_kt(spec, Sign::Plus, SplitSymbol::Paraxial))?,
        e_minus: kt_to_field(g, split_kt(spec, Sign::Minus, SplitSymbol::Paraxial))?,
        excluded_bins: 1,
    })
}

/// `𝓔p = Θ(z)(𝓔p+ + 𝓔p−)`.
pub fn paraxial_green(spec: &GreenSpec) -> Result<Field> {
    paraxial_green_split(spec)?.sum()?.gate_z()
}

// ---------------------------------------------------------------------------
// Closed-form retarded/advanced solutions
// ---------------------------------------------------------------------------

/// `∫∫∫ 1/|r| dV` over the box `[0,a]×[0,b]×[0,c]`.
fn octant_inverse_distance(a: f64, b: f64, c: f64) -> f64 {
    let r = (a * a + b * b + c * c).sqrt();
    b * c * ((a + r) / (b * b + c * c).sqrt()).ln()
        + a * c * ((b + r) / (a * a + c * c).sqrt()).ln()
        + a * b * ((c + r) / (a * a + b * b).sqrt()).ln()
        - 0.5 * a * a * (b * c / (a * r)).atan()
        - 0.5 * b * b * (a * c / (b * r)).atan()
        - 0.5 * c * c * (a * b / (c * r)).atan()
}

/// Mean of `1/|ρ|` over a cell of sides `dx × dy × dz` centred on the
/// singularity.
pub fn cell_mean_inverse_distance(dx: f64, dy: f64, dz: f64) -> f64 {
    8.0 * octant_inverse_distance(dx / 2.0, dy / 2.0, dz / 2.0) / (dx * dy * dz)
}

/// Cell mean of `g(t − s ρ / c) / ρ` over the origin cell: the singular
/// part `g(t) ⟨1/ρ⟩` in closed form plus a midpoint rule on the bounded
/// remainder.
fn origin_cell_mean(spec: &GreenSpec, s: f64, t: f64) -> f64 {
    const M: usize = 8;
    let g = &spec.grid;
    let (dx, dy, dz) = (g.step(Axis::X), g.step(Axis::Y), g.step(Axis::Z));
    let st = spec.mollifier_sigma_t;
    let g0 = gaussian(t, st);
    let mut acc = CompensatedSum::new();
    let mid = |j: usize, d: f64| (j as f64 + 0.5) / M as f64 * d - d / 2.0;
    for i in 0..M {
        for j in 0..M {
            for k in 0..M {
                let rho = (mid(i, dx).powi(2) + mid(j, dy).powi(2) + mid(k, dz).powi(2)).sqrt();
                acc.add((gaussian(t - s * rho / g.c, st) - g0) / rho);
            }
        }
    }
    g0 * cell_mean_inverse_distance(dx, dy, dz) + acc.value() / (M * M * M) as f64
}

/// `−g(t ∓ r/c) / (4πr)` with a Gaussian `g` of width `sigma_t`; the origin
/// bin is the cell mean of the same expression.
pub fn wave_green_analytic(sign: Sign, spec: &GreenSpec) -> Result<Field> {
    let st = spec.mollifier_sigma_t;
    if !(st > 0.0) {
        return Err(Error::InvalidParameter("analytic wave Green's function needs sigma_t > 0".into()));
    }
    let g = spec.grid;
    let c = g.c;
    let s = sign.value();
    let origin: Vec<f64> = g.coords(Axis::T).iter().map(|&t| origin_cell_mean(spec, s, t)).collect();
    let z0 = [g.center(Axis::X), g.center(Axis::Y), g.center(Axis::Z)];
    Ok(Field::zeros(g).map(|idx, _| {
        if idx[..3] == z0 {
            return Complex64::new(-origin[idx[3]] / (4.0 * PI), 0.0);
        }
        let [x, y, z, t] = [0, 1, 2, 3].map(|a| g.coord(Axis::ALL[a], idx[a]));
        let r = (x * x + y * y + z * z).sqrt();
        Complex64::new(-gaussian(t - s * r / c, st) / (4.0 * PI * r), 0.0)
    }))
}

// ---------------------------------------------------------------------------
// Structural residuals
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Theorem1Report {
    /// `‖𝓔 − Θ(z) Pz+{𝓔□+ + 𝓔□−}‖ / ‖𝓔‖` over the whole grid.
    pub residual: f64,
    /// Same comparison restricted to real parts.
    pub real_part_residual: f64,
    /// Squared-residual shares from the `(sign z, sign t)` quadrants
    /// `[pp, pm, mp, mm]`, normalised by `‖𝓔‖²`; axis bins are left out.
    pub quadrant_breakdown: [f64; 4],
    /// Residual with the `Pz+` projection omitted.
    pub without_projection: f64,
    /// Residual with the `Θ(z)` gate omitted.
    pub without_gate: f64,
    pub excluded: ExcludedMass,
}

pub fn theorem1_residual(spec: &GreenSpec) -> Result<Theorem1Report> {
    let uppe = uppe_green(spec)?;
    let sum = wave_green_spectral(Sign::Plus, spec)?.add(&wave_green_spectral(Sign::Minus, spec)?)?;
    let projected = make_mask(ProjectorKind::Pzplus, &spec.grid).apply(&sum)?;
    let rhs = projected.clone().gate_z()?;
    let e = &uppe.field;

    let g = spec.grid;
    let den = norm::norm_sqr(e.data());
    let mut quads = [CompensatedSum::new(); 4];
    for (i, (a, b)) in e.data().iter().zip(rhs.data()).enumerate() {
        let idx = g.unflat(i);
        let slot = match (g.offset(Axis::Z, idx[2]).signum(), g.offset(Axis::T, idx[3]).signum()) {
            (1, 1) => 0,
            (1, -1) => 1,
            (-1, 1) => 2,
            (-1, -1) => 3,
            _ => continue,
        };
        quads[slot].add((a - b).norm_sqr() / den);
    }
    let re = |f: &Field| -> Vec<Complex64> { f.data().iter().map(|v| Complex64::new(v.re, 0.0)).collect() };
    let (er, rr) = (re(e), re(&rhs));
    Ok(Theorem1Report {
        residual: e.relative_diff(&rhs),
        real_part_residual: norm::relative_l2(&er, &rr, &er),
        quadrant_breakdown: quads.map(|q| q.value()),
        without_projection: e.relative_diff(&sum.gate_z()?),
        without_gate: e.relative_diff(&projected),
        excluded: uppe.excluded,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Theorem2Report {
    /// Per-mode comparison in `(k, t)`, worst of the two signs.
    pub spectral_residual: f64,
    /// Centred `z` difference plus cumulative time sum, both signs pooled.
    pub physical_residual: f64,
}

/// Fourth-order centred difference along `z` with periodic wrap.
fn dz_centered(f: &Field) -> Field {
    let g = *f.grid();
    let nz = g.n(Axis::Z);
    let inv = 1.0 / (12.0 * g.step(Axis::Z));
    let src = f.clone();
    f.clone().map(move |idx, _| {
        let at = |o: isize| src.get([idx[0], idx[1], (idx[2] as isize + o).rem_euclid(nz as isize) as usize, idx[3]]);
        (at(-2) - at(-1) * 8.0 + at(1) * 8.0 - at(2)) * inv
    })
}

/// `∓c ∫_{−∞}^t ∂z 𝓔± dτ` via finite differences: a left Riemann sum from
/// the first time slice, started from the exact antiderivative there.
fn paraxial_by_time_integration(spec: &GreenSpec, sign: Sign, e: &Field) -> Result<Field> {
    let g = spec.grid;
    let anti = kt_to_field(g, split_kt(spec, sign, SplitSymbol::FullAntiderivative))?;
    let d_anti = dz_centered(&anti);
    let d_e = dz_centered(e);
    let nt = g.n(Axis::T);
    let dt = g.step(Axis::T);
    let s = sign.value();
    let mut out = Field::zeros(g);
    let lines = g.len() / nt;
    for l in 0..lines {
        let base = l * nt;
        let mut acc = d_anti.data()[base];
        for it in 0..nt {
            out.data_mut()[base + it] = -s * g.c * acc;
            acc += d_e.data()[base + it] * dt;
        }
    }
    Ok(out)
}

pub fn theorem2_residual(spec: &GreenSpec) -> Result<Theorem2Report> {
    let g = spec.grid;
    let c = g.c;
    let bins = k_bins(spec);
    let mut spectral = 0.0f64;
    let mut num = CompensatedSum::new();
    let mut den = CompensatedSum::new();
    for sign in [Sign::Plus, Sign::Minus] {
        let s = sign.value();
        let direct = split_kt(spec, sign, SplitSymbol::Paraxial);
        let full = split_kt(spec, sign, SplitSymbol::Full);
        // ∓c · (i k_z) · ∫ 𝓔± dτ, the integral taken per mode on exp(∓ickt).
        let via: Vec<Vec<Complex64>> = full
            .iter()
            .zip(&bins)
            .map(|(line, bin)| {
                if bin.k == 0.0 {
                    return vec![ZERO; line.len()];
                }
                let factor = -s * c * I * bin.kz / (-s * I * c * bin.k);
                line.iter().map(|v| v * factor).collect()
            })
            .collect();
        let a: Vec<Complex64> = direct.concat();
        let b: Vec<Complex64> = via.concat();
        spectral = spectral.max(norm::relative_l2(&a, &b, &a));

        let e = kt_to_field(g, full)?;
        let reference = kt_to_field(g, direct)?;
        let fd = paraxial_by_time_integration(spec, sign, &e)?;
        num.add(norm::diff_l2(reference.data(), fd.data()).powi(2));
        den.add(norm::norm_sqr(reference.data()));
    }
    Ok(Theorem2Report {
        spectral_residual: spectral,
        physical_residual: (num.value() / den.value()).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn spec() -> GreenSpec {
        let g = make_grid([8, 8, 8, 16], [1.0, 1.0, 1.0, 0.5], 1.0).unwrap();
        GreenSpec::with_defaults(g)
    }

    #[test]
    fn spec_validation() {
        let g = make_grid([8, 8, 8, 16], [1.0, 1.0, 1.0, 0.5], 1.0).unwrap();
        assert!(GreenSpec::new(g, 1.0, 1.0, 0.0, BranchPolicy::EvanescentDecay).is_err());
        assert!(GreenSpec::new(g, 2.0, 0.5, 0.0, BranchPolicy::EvanescentDecay).is_err());
        assert!(GreenSpec::new(g, 2.0, 1.0, -1.0, BranchPolicy::EvanescentDecay).is_err());
        assert!(GreenSpec::new(g, 2.0, 1.0, 0.0, BranchPolicy::EvanescentDecay).is_ok());
    }

    #[test]
    fn wave_kernel_limits() {
        assert_eq!(wave_kernel(Sign::Plus, 1.0, 3.0, 0.0), 0.0);
        assert_eq!(wave_kernel(Sign::Minus, 1.0, 3.0, 0.0), 0.0);
        assert_eq!(wave_kernel(Sign::Plus, 1.0, 3.0, -1.0), 0.0);
        assert!((wave_kernel(Sign::Plus, 2.0, 0.0, 1.5) + 2.0 * 2.0 * 1.5).abs() < 1e-15);
        let small = wave_kernel(Sign::Plus, 2.0, 1e-9, 1.5);
        assert!((small - wave_kernel(Sign::Plus, 2.0, 0.0, 1.5)).abs() < 1e-9);
        // time reflection
        for t in [0.3, 1.1, 2.5] {
            assert_eq!(wave_kernel(Sign::Minus, 1.0, 0.7, -t), wave_kernel(Sign::Plus, 1.0, 0.7, t));
        }
    }

    #[test]
    fn cube_mean_inverse_distance() {
        // Brute-force midpoint rule on a unit cube with an even cell count.
        let n = 60;
        let h = 1.0 / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let p = |m: usize| -0.5 + (m as f64 + 0.5) * h;
                    s += 1.0 / (p(i).powi(2) + p(j).powi(2) + p(k).powi(2)).sqrt();
                }
            }
        }
        let brute = s * h * h * h;
        let closed = cell_mean_inverse_distance(1.0, 1.0, 1.0);
        assert!((closed - 2.380077).abs() < 1e-5, "{closed}");
        assert!((brute - closed).abs() < 2e-2);
        // scaling 1/a
        assert!((cell_mean_inverse_distance(2.0, 2.0, 2.0) - closed / 2.0).abs() < 1e-12);
    }

    #[test]
    fn uppe_green_is_gated() {
        let s = spec();
        let e = uppe_green(&s).unwrap().field;
        let g = s.grid;
        for i in 0..g.len() {
            let idx = g.unflat(i);
            if g.coord(Axis::Z, idx[2]) < 0.0 {
                assert_eq!(e.data()[i], ZERO);
            }
        }
        let half: Vec<Complex64> = uppe_green_ungated_origin_slice(&s).unwrap().iter().map(|v| v * 0.5).collect();
        let gated = extract_z_slice(&e, g.center(Axis::Z));
        assert!(norm::relative_l2(&gated, &half, &half) < 1e-14);
    }

    #[test]
    fn split_spectrum_has_no_negative_kz() {
        let s = spec();
        let pair = uppe_green_split(&s).unwrap();
        for f in [&pair.e_plus, &pair.e_minus] {
            let spec = forward_transform(f, &Axis::SPACE).unwrap();
            let g = s.grid;
            let total = spec.norm_l2();
            for i in 0..g.len() {
                let idx = g.unflat(i);
                if g.offset(Axis::Z, idx[2]) < 0 {
                    assert!(spec.data()[i].norm() <= 1e-13 * total);
                }
            }
        }
    }

    #[test]
    fn paraxial_spectrum_vanishes_for_nonpositive_kz() {
        let s = spec();
        let pair = paraxial_green_split(&s).unwrap();
        let g = s.grid;
        let spec = forward_transform(&pair.sum().unwrap(), &Axis::SPACE).unwrap();
        let total = spec.norm_l2();
        for i in 0..g.len() {
            let idx = g.unflat(i);
            if g.offset(Axis::Z, idx[2]) <= 0 {
                assert!(spec.data()[i].norm() <= 1e-13 * total);
            }
        }
        let gated = paraxial_green(&s).unwrap();
        for i in 0..g.len() {
            if g.offset(Axis::Z, g.unflat(i)[2]) < 0 {
                assert_eq!(gated.data()[i], ZERO);
            }
        }
    }

    #[test]
    fn analytic_green_is_time_reflected() {
        let s = spec();
        let p = wave_green_analytic(Sign::Plus, &s).unwrap();
        let m = wave_green_analytic(Sign::Minus, &s).unwrap();
        let g = s.grid;
        let nt = g.n(Axis::T);
        for i in 0..g.len() {
            let idx = g.unflat(i);
            if idx[3] == 0 {
                continue;
            }
            let refl = [idx[0], idx[1], idx[2], nt - idx[3]];
            assert_eq!(m.data()[i], p.get(refl));
        }
    }

    #[test]
    fn analytic_green_tails_are_negligible() {
        let g = make_grid([8, 8, 8, 64], [1.0, 1.0, 1.0, 0.5], 1.0).unwrap();
        let s = GreenSpec::with_defaults(g);
        let f = wave_green_analytic(Sign::Plus, &s).unwrap();
        let peak = f.data().iter().map(|v| v.norm()).fold(0.0, f64::max);
        for i in 0..g.len() {
            let [x, y, z, t] = g.unflat(i);
            let r = (g.coord(Axis::X, x).powi(2) + g.coord(Axis::Y, y).powi(2) + g.coord(Axis::Z, z).powi(2)).sqrt();
            if (g.coord(Axis::T, t) - r).abs() > 8.0 * s.mollifier_sigma_t {
                assert!(f.data()[i].norm() < 1e-12 * peak);
            }
        }
    }

    #[test]
    fn theorem2_spectral_identity() {
        let s = spec();
        let r = theorem2_residual(&s).unwrap();
        assert!(r.spectral_residual < 1e-12, "{}", r.spectral_residual);
    }
}
