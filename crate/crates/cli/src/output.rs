//! Artifact writers: raw complex64 fields with JSON sidecars, CSV extracts
//! and JSON reports.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use uppe_core::projectors::CausalityStats;
use uppe_core::{Axis, Complex64, Field, GridSpec};

use crate::error::CliError;

/// Everything needed to load a `.bin` file without other context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub file: String,
    /// Interleaved little-endian `f32` pairs `(re, im)`.
    pub dtype: String,
    pub byte_order: String,
    /// Row-major, last axis fastest.
    pub order: String,
    pub shape: Vec<usize>,
    pub axes: Vec<String>,
    pub rep: Vec<String>,
    pub steps: Vec<f64>,
    /// Index of the zero coordinate (or zero frequency) along each axis.
    pub origin_index: Vec<usize>,
    pub c: f64,
    /// Fixed coordinates of the axes not stored, e.g. `z` for a slice.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fixed: Vec<(String, f64)>,
}

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_text(&self, name: &str, text: &str) -> Result<(), CliError> {
        let p = self.path(name);
        fs::write(&p, text).map_err(|e| CliError::io(&p, e))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    fn write_bin(&self, name: &str, data: &[Complex64]) -> Result<(), CliError> {
        let p = self.path(name);
        let file = fs::File::create(&p).map_err(|e| CliError::io(&p, e))?;
        let mut w = BufWriter::new(file);
        for v in data {
            w.write_all(&(v.re as f32).to_le_bytes()).map_err(|e| CliError::io(&p, e))?;
            w.write_all(&(v.im as f32).to_le_bytes()).map_err(|e| CliError::io(&p, e))?;
        }
        w.flush().map_err(|e| CliError::io(&p, e))
    }

    fn write_with_sidecar(&self, stem: &str, data: &[Complex64], sidecar: Sidecar) -> Result<(), CliError> {
        self.write_bin(&sidecar.file, data)?;
        self.write_json(&format!("{stem}.json"), &sidecar)
    }

    /// Full 4D field as `<stem>.bin` + `<stem>.json`.
    pub fn write_field(&self, stem: &str, f: &Field) -> Result<(), CliError> {
        let g = f.grid();
        let sidecar = Sidecar {
            file: format!("{stem}.bin"),
            rep: f.rep().iter().map(|r| r.name().to_string()).collect(),
            ..sidecar_base(g, &Axis::ALL)
        };
        self.write_with_sidecar(stem, f.data(), sidecar)
    }

    /// One physical `(x, y, t)` slice at fixed `z`.
    pub fn write_slice(&self, stem: &str, g: &GridSpec, z: f64, data: &[Complex64]) -> Result<(), CliError> {
        let sidecar = Sidecar {
            file: format!("{stem}.bin"),
            rep: vec!["physical".into(); 3],
            fixed: vec![("z".into(), z)],
            ..sidecar_base(g, &Axis::TRANSVERSE_TIME)
        };
        self.write_with_sidecar(stem, data, sidecar)
    }

    pub fn csv_writer(&self, name: &str) -> Result<csv::Writer<fs::File>, CliError> {
        let p = self.path(name);
        csv::Writer::from_path(&p).map_err(|e| CliError::Csv(p.display().to_string(), e))
    }
}

fn sidecar_base(g: &GridSpec, axes: &[Axis]) -> Sidecar {
    Sidecar {
        file: String::new(),
        dtype: "complex64".into(),
        byte_order: "little".into(),
        order: "row-major".into(),
        shape: axes.iter().map(|&a| g.n(a)).collect(),
        axes: axes.iter().map(|a| a.to_string()).collect(),
        rep: Vec::new(),
        steps: axes.iter().map(|&a| g.step(a)).collect(),
        origin_index: axes.iter().map(|&a| g.center(a)).collect(),
        c: g.c,
        fixed: Vec::new(),
    }
}

#[derive(Debug, Serialize)]
struct CutRow {
    axis: String,
    index: usize,
    coordinate: f64,
    re: f64,
    im: f64,
    abs: f64,
}

/// Lines through the grid along each axis. The `z` cut passes through the
/// origin; the others pass through `(0, 0, z_cut, 0)` with `z_cut` snapped to
/// the nearest slice.
pub fn write_axis_cuts(out: &OutputDir, name: &str, f: &Field, z_cut: f64) -> Result<(), CliError> {
    let g = *f.grid();
    let centre = Axis::ALL.map(|a| g.center(a));
    let iz = nearest_index(&g, Axis::Z, z_cut);
    let mut w = out.csv_writer(name)?;
    let csv_err = |e| CliError::Csv(name.to_string(), e);
    for axis in Axis::ALL {
        let mut base = centre;
        if axis != Axis::Z {
            base[2] = iz;
        }
        for j in 0..g.n(axis) {
            let mut idx = base;
            idx[axis.index()] = j;
            let v = f.get(idx);
            w.serialize(CutRow {
                axis: axis.to_string(),
                index: j,
                coordinate: g.coord(axis, j),
                re: v.re,
                im: v.im,
                abs: v.norm(),
            })
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| CliError::io(&out.path(name), e))
}

pub fn nearest_index(g: &GridSpec, axis: Axis, x: f64) -> usize {
    let j = (x / g.step(axis)).round() + g.center(axis) as f64;
    j.clamp(0.0, (g.n(axis) - 1) as f64) as usize
}

#[derive(Debug, Serialize)]
struct QuadrantRow {
    quadrant: &'static str,
    z_sign: &'static str,
    t_sign: &'static str,
    energy: f64,
    fraction: f64,
}

pub fn write_quadrants(out: &OutputDir, name: &str, s: &CausalityStats) -> Result<(), CliError> {
    let mut w = out.csv_writer(name)?;
    let rows = [
        ("pp", "+", "+", s.energy_pp),
        ("pm", "+", "-", s.energy_pm),
        ("mp", "-", "+", s.energy_mp),
        ("mm", "-", "-", s.energy_mm),
        ("axes", "0", "0", s.axis_energy()),
        ("total", "", "", s.total),
    ];
    for (quadrant, z_sign, t_sign, energy) in rows {
        w.serialize(QuadrantRow {
            quadrant,
            z_sign,
            t_sign,
            energy,
            fraction: s.fraction(energy),
        })
        .map_err(|e| CliError::Csv(name.to_string(), e))?;
    }
    w.flush().map_err(|e| CliError::io(&out.path(name), e))
}

/// Read back a field written by [`OutputDir::write_field`] or
/// [`OutputDir::write_slice`], using the sidecar alone.
pub fn load_bin(sidecar_path: &Path) -> Result<(Sidecar, Vec<Complex64>), CliError> {
    let text = fs::read_to_string(sidecar_path).map_err(|e| CliError::io(sidecar_path, e))?;
    let sidecar: Sidecar = serde_json::from_str(&text)?;
    let bin = sidecar_path.with_file_name(&sidecar.file);
    let bytes = fs::read(&bin).map_err(|e| CliError::io(&bin, e))?;
    let expected: usize = sidecar.shape.iter().product::<usize>() * 8;
    if bytes.len() != expected {
        return Err(CliError::Format(format!(
            "{}: {} bytes, sidecar implies {expected}",
            bin.display(),
            bytes.len()
        )));
    }
    let data = bytes
        .chunks_exact(8)
        .map(|c| {
            let re = f32::from_le_bytes(c[..4].try_into().unwrap());
            let im = f32::from_le_bytes(c[4..].try_into().unwrap());
            Complex64::new(re as f64, im as f64)
        })
        .collect();
    Ok((sidecar, data))
}
