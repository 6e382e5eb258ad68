//! Flat `key = value` configuration with optional `[section]` headers.
//!
//! Keys may appear at the top level or under their own section. Values are
//! bare words, numbers, `true`/`false`, double-quoted strings, or
//! comma-separated lists (optionally bracketed). `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;
use uppe_core::beta::default_epsilon;
use uppe_core::propagator::{DirectionFilter, SourceSpec};
use uppe_core::verification::CheckConfig;
use uppe_core::{make_grid, Axis, BranchPolicy, GreenSpec, GridSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: malformed line: {text}")]
    Malformed { line: usize, text: String },
    #[error("line {line}: unknown section [{name}]")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: unknown key '{key}'{}", section_suffix(.section))]
    UnknownKey {
        line: usize,
        key: String,
        section: Option<String>,
    },
    #[error("line {line}: key '{key}' already set on line {first}")]
    Duplicate { line: usize, key: String, first: usize },
    #[error("line {line}: {key}: {message}")]
    Invalid { line: usize, key: String, message: String },
    #[error("missing required key '{0}'")]
    Missing(&'static str),
}

fn section_suffix(s: &Option<String>) -> String {
    s.as_ref().map(|s| format!(" in section [{s}]")).unwrap_or_default()
}

impl ConfigError {
    /// Source line, when the error points at one.
    pub fn line(&self) -> Option<usize> {
        match self {
            ConfigError::Malformed { line, .. }
            | ConfigError::UnknownSection { line, .. }
            | ConfigError::UnknownKey { line, .. }
            | ConfigError::Duplicate { line, .. }
            | ConfigError::Invalid { line, .. } => Some(*line),
            ConfigError::Missing(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Fundamental,
    Paraxial,
    Theorem1,
    Theorem2,
    Propagate,
    Causality,
    Checks,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Fundamental,
        Experiment::Paraxial,
        Experiment::Theorem1,
        Experiment::Theorem2,
        Experiment::Propagate,
        Experiment::Causality,
        Experiment::Checks,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fundamental => "fundamental",
            Experiment::Paraxial => "paraxial",
            Experiment::Theorem1 => "theorem1",
            Experiment::Theorem2 => "theorem2",
            Experiment::Propagate => "propagate",
            Experiment::Causality => "causality",
            Experiment::Checks => "checks",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
                format!("unknown experiment '{s}' (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceShape {
    Point,
    GaussianPulse,
    PlaneWavePacket,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceConfig {
    pub shape: SourceShape,
    pub center: [f64; 4],
    pub widths: [f64; 4],
    pub amplitude: f64,
    pub carrier_kz: f64,
    pub carrier_omega: f64,
    pub filter: DirectionFilter,
}

impl SourceConfig {
    pub fn to_spec(&self) -> SourceSpec {
        let base = match self.shape {
            SourceShape::Point => {
                let mut s = SourceSpec::point_mollified(self.widths);
                s.center = self.center;
                s
            }
            SourceShape::GaussianPulse => SourceSpec::gaussian_pulse(self.center, self.widths, self.carrier_omega),
            SourceShape::PlaneWavePacket => {
                SourceSpec::plane_wave_packet(self.center, self.widths, self.carrier_kz, self.carrier_omega)
            }
        };
        base.with_amplitude(self.amplitude).with_filter(self.filter)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagateConfig {
    pub z_start: f64,
    pub z_final: f64,
    pub dz: f64,
    /// Slices written to disk; the nearest marched slice is used.
    pub output_z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub write_fields: bool,
    pub write_csv: bool,
    /// `z` through which the `x`, `y` and `t` axis cuts pass.
    pub cut_z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub threads: usize,
    pub output_dir: Option<PathBuf>,
    pub green: GreenSpec,
    pub source: SourceConfig,
    pub propagate: PropagateConfig,
    pub checks: CheckConfig,
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn grid(&self) -> &GridSpec {
        &self.green.grid
    }
}

const SECTIONS: [&str; 6] = ["grid", "green", "source", "propagate", "checks", "output"];

/// Every recognised key and the section it belongs to (`""` is top level).
const KEYS: &[(&str, &str)] = &[
    ("", "experiment"),
    ("", "seed"),
    ("", "threads"),
    ("", "output_dir"),
    ("grid", "n_x"),
    ("grid", "n_y"),
    ("grid", "n_z"),
    ("grid", "n_t"),
    ("grid", "d_x"),
    ("grid", "d_y"),
    ("grid", "d_z"),
    ("grid", "d_t"),
    ("grid", "c"),
    ("green", "sigma_r"),
    ("green", "sigma_t"),
    ("green", "epsilon"),
    ("green", "branch"),
    ("source", "kind"),
    ("source", "center"),
    ("source", "widths"),
    ("source", "amplitude"),
    ("source", "carrier_kz"),
    ("source", "carrier_omega"),
    ("source", "filter"),
    ("propagate", "z_start"),
    ("propagate", "z_final"),
    ("propagate", "dz"),
    ("propagate", "output_z"),
    ("checks", "random_sources"),
    ("output", "write_fields"),
    ("output", "write_csv"),
    ("output", "cut_z"),
];

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: String,
}

struct Raw(BTreeMap<&'static str, Entry>);

fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, ch) in line.char_indices() {
        match ch {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn unquote(v: &str) -> Option<String> {
    if let Some(inner) = v.strip_prefix('"') {
        let inner = inner.strip_suffix('"')?;
        if inner.contains('"') {
            return None;
        }
        Some(inner.to_string())
    } else if v.contains('"') {
        None
    } else {
        Some(v.to_string())
    }
}

fn lex(text: &str) -> Result<Raw, ConfigError> {
    let mut section: Option<String> = None;
    let mut out: BTreeMap<&'static str, Entry> = BTreeMap::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        let s = strip_comment(raw_line).trim();
        if s.is_empty() {
            continue;
        }
        let malformed = || ConfigError::Malformed {
            line,
            text: raw_line.trim().to_string(),
        };
        if let Some(rest) = s.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(malformed)?.trim();
            if !SECTIONS.contains(&name) {
                return Err(ConfigError::UnknownSection {
                    line,
                    name: name.to_string(),
                });
            }
            section = Some(name.to_string());
            continue;
        }
        let (k, v) = s.split_once('=').ok_or_else(malformed)?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() || k.contains(char::is_whitespace) {
            return Err(malformed());
        }
        let value = unquote(v).ok_or_else(malformed)?;
        let key = KEYS
            .iter()
            .find(|(sec, name)| *name == k && section.as_deref().map_or(true, |s| s == *sec))
            .map(|(_, name)| *name)
            .ok_or_else(|| ConfigError::UnknownKey {
                line,
                key: k.to_string(),
                section: section.clone(),
            })?;
        if let Some(prev) = out.get(key) {
            return Err(ConfigError::Duplicate {
                line,
                key: key.to_string(),
                first: prev.line,
            });
        }
        out.insert(key, Entry { line, value });
    }
    Ok(Raw(out))
}

impl Raw {
    fn line(&self, key: &str) -> Option<usize> {
        self.0.get(key).map(|e| e.line)
    }

    fn invalid(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            line: self.line(key).unwrap_or(0),
            key: key.to_string(),
            message: message.into(),
        }
    }

    fn get<T>(&self, key: &'static str, parse: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, ConfigError> {
        match self.0.get(key) {
            None => Ok(None),
            Some(e) => parse(&e.value).map(Some).map_err(|m| self.invalid(key, m)),
        }
    }

    fn float(&self, key: &'static str, default: f64, check: impl Fn(f64) -> Option<&'static str>) -> Result<f64, ConfigError> {
        let v = self.get(key, parse_float)?.unwrap_or(default);
        match check(v) {
            Some(m) => Err(self.invalid(key, format!("{v} {m}"))),
            None => Ok(v),
        }
    }
}

fn parse_float(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{s}' is not finite"))
    }
}

fn parse_uint(s: &str) -> Result<u64, String> {
    s.parse().map_err(|_| format!("'{s}' is not a non-negative integer"))
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("'{s}' is not true or false")),
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    let inner = s.strip_prefix('[').map_or(Some(s), |r| r.strip_suffix(']'));
    let inner = inner.ok_or_else(|| format!("unbalanced brackets in '{s}'"))?.trim();
    if inner.is_empty() {
        return Ok(Vec::new());
    }
    inner.split(',').map(|p| parse_float(p.trim())).collect()
}

fn parse_quad(s: &str) -> Result<[f64; 4], String> {
    let v = parse_list(s)?;
    v.try_into()
        .map_err(|v: Vec<f64>| format!("expected 4 values (x, y, z, t), got {}", v.len()))
}

fn positive(v: f64) -> Option<&'static str> {
    (v <= 0.0).then_some("must be positive")
}

fn non_negative(v: f64) -> Option<&'static str> {
    (v < 0.0).then_some("must be non-negative")
}

fn any(_: f64) -> Option<&'static str> {
    None
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let raw = lex(text)?;

    let experiment = raw.get("experiment", |s| s.parse())?.ok_or(ConfigError::Missing("experiment"))?;
    let seed = raw.get("seed", parse_uint)?.unwrap_or(CheckConfig::default().seed);
    let threads = raw.get("threads", parse_uint)?.unwrap_or(0);
    let threads = usize::try_from(threads).map_err(|_| raw.invalid("threads", "too large"))?;
    let output_dir = raw.get("output_dir", |s| Ok(PathBuf::from(s)))?;

    let counts_default = [16u64, 16, 16, 32];
    let mut counts = [0usize; 4];
    for (a, key) in ["n_x", "n_y", "n_z", "n_t"].into_iter().enumerate() {
        let n = raw.get(key, parse_uint)?.unwrap_or(counts_default[a]);
        if n < 2 {
            return Err(raw.invalid(key, format!("{n} must be at least 2")));
        }
        if n % 2 != 0 {
            return Err(raw.invalid(key, format!("counts must be even, got {n}")));
        }
        counts[a] = usize::try_from(n).map_err(|_| raw.invalid(key, "too large"))?;
    }
    let steps_default = [1.0, 1.0, 1.0, 0.5];
    let mut steps = [0.0; 4];
    for (a, key) in ["d_x", "d_y", "d_z", "d_t"].into_iter().enumerate() {
        steps[a] = raw.float(key, steps_default[a], positive)?;
    }
    let c = raw.float("c", 1.0, positive)?;
    let grid = make_grid(counts, steps, c).map_err(|e| raw.invalid("n_x", e.to_string()))?;

    let defaults = GreenSpec::with_defaults(grid);
    let sigma_r = raw.float("sigma_r", defaults.mollifier_sigma_r, positive)?;
    let sigma_t = raw.float("sigma_t", defaults.mollifier_sigma_t, positive)?;
    let epsilon = raw.float("epsilon", default_epsilon(&grid), non_negative)?;
    let branch = raw
        .get("branch", |s| match s {
            "decay" => Ok(BranchPolicy::EvanescentDecay),
            "zero" => Ok(BranchPolicy::EvanescentZero),
            _ => Err(format!("'{s}' is not decay or zero")),
        })?
        .unwrap_or(BranchPolicy::EvanescentDecay);
    let green = GreenSpec::new(grid, sigma_r, sigma_t, epsilon, branch).map_err(|e| {
        let key = if sigma_r < defaults.mollifier_sigma_r * (1.0 - 1e-12) { "sigma_r" } else { "sigma_t" };
        raw.invalid(key, e.to_string())
    })?;

    let shape = raw
        .get("kind", |s| match s {
            "point" => Ok(SourceShape::Point),
            "gaussian_pulse" => Ok(SourceShape::GaussianPulse),
            "plane_wave_packet" => Ok(SourceShape::PlaneWavePacket),
            _ => Err(format!("'{s}' is not point, gaussian_pulse or plane_wave_packet")),
        })?
        .unwrap_or(SourceShape::Point);
    let center = raw.get("center", parse_quad)?.unwrap_or([0.0; 4]);
    let widths = raw.get("widths", parse_quad)?.unwrap_or(steps.map(|d| 2.0 * d));
    let filter = raw
        .get("filter", |s| match s {
            "none" => Ok(DirectionFilter::None),
            "forward" => Ok(DirectionFilter::Forward),
            "backward" => Ok(DirectionFilter::Backward),
            _ => Err(format!("'{s}' is not none, forward or backward")),
        })?
        .unwrap_or(DirectionFilter::None);
    let source = SourceConfig {
        shape,
        center,
        widths,
        amplitude: raw.float("amplitude", 1.0, any)?,
        carrier_kz: raw.float("carrier_kz", 0.0, any)?,
        carrier_omega: raw.float("carrier_omega", 0.0, any)?,
        filter,
    };
    source.to_spec().validate(&grid).map_err(|e| raw.invalid("widths", e.to_string()))?;

    let z_first = grid.coord(Axis::Z, 0);
    let z_last = grid.coord(Axis::Z, grid.n(Axis::Z) - 1);
    let z_start = raw.float("z_start", z_first, any)?;
    let z_final = raw.float("z_final", z_last, any)?;
    if z_final <= z_start {
        return Err(raw.invalid("z_final", format!("{z_final} must exceed z_start = {z_start}")));
    }
    let dz = raw.float("dz", grid.step(Axis::Z), positive)?;
    let output_z = raw.get("output_z", parse_list)?.unwrap_or_else(|| vec![z_final]);
    if let Some(z) = output_z.iter().find(|&&z| z < z_start || z > z_final) {
        return Err(raw.invalid("output_z", format!("{z} lies outside [{z_start}, {z_final}]")));
    }
    let propagate = PropagateConfig {
        z_start,
        z_final,
        dz,
        output_z,
    };

    let random_sources = raw.get("random_sources", parse_uint)?.unwrap_or(20);
    if random_sources == 0 {
        return Err(raw.invalid("random_sources", "0 must be at least 1"));
    }
    let checks = CheckConfig {
        seed,
        random_sources: usize::try_from(random_sources).map_err(|_| raw.invalid("random_sources", "too large"))?,
    };

    let default_cut = grid.coord(Axis::Z, grid.center(Axis::Z) + grid.n(Axis::Z) / 4);
    let output = OutputConfig {
        write_fields: raw.get("write_fields", parse_bool)?.unwrap_or(true),
        write_csv: raw.get("write_csv", parse_bool)?.unwrap_or(true),
        cut_z: raw.float("cut_z", default_cut, any)?,
    };

    Ok(ExperimentConfig {
        experiment,
        seed,
        threads,
        output_dir,
        green,
        source,
        propagate,
        checks,
        output,
    })
}

fn list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

impl ExperimentConfig {
    /// Every key with its effective value, in the input format.
    pub fn to_text(&self) -> String {
        let g = self.grid();
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("experiment", self.experiment.to_string());
        kv("seed", self.seed.to_string());
        kv("threads", self.threads.to_string());
        if let Some(d) = &self.output_dir {
            kv("output_dir", format!("\"{}\"", d.display()));
        }
        let mut s = s;
        let mut section = |name: &str, entries: Vec<(&str, String)>| {
            s.push_str(&format!("\n[{name}]\n"));
            for (k, v) in entries {
                s.push_str(&format!("{k} = {v}\n"));
            }
        };
        section(
            "grid",
            ["n_x", "n_y", "n_z", "n_t"]
                .iter()
                .zip(Axis::ALL)
                .map(|(k, a)| (*k, g.n(a).to_string()))
                .chain(["d_x", "d_y", "d_z", "d_t"].iter().zip(Axis::ALL).map(|(k, a)| (*k, g.step(a).to_string())))
                .chain([("c", g.c.to_string())])
                .collect(),
        );
        section(
            "green",
            vec![
                ("sigma_r", self.green.mollifier_sigma_r.to_string()),
                ("sigma_t", self.green.mollifier_sigma_t.to_string()),
                ("epsilon", self.green.light_line_epsilon.to_string()),
                (
                    "branch",
                    match self.green.branch_policy {
                        BranchPolicy::EvanescentDecay => "decay",
                        BranchPolicy::EvanescentZero => "zero",
                    }
                    .to_string(),
                ),
            ],
        );
        let src = &self.source;
        section(
            "source",
            vec![
                (
                    "kind",
                    match src.shape {
                        SourceShape::Point => "point",
                        SourceShape::GaussianPulse => "gaussian_pulse",
                        SourceShape::PlaneWavePacket => "plane_wave_packet",
                    }
                    .to_string(),
                ),
                ("center", list(&src.center)),
                ("widths", list(&src.widths)),
                ("amplitude", src.amplitude.to_string()),
                ("carrier_kz", src.carrier_kz.to_string()),
                ("carrier_omega", src.carrier_omega.to_string()),
                (
                    "filter",
                    match src.filter {
                        DirectionFilter::None => "none",
                        DirectionFilter::Forward => "forward",
                        DirectionFilter::Backward => "backward",
                    }
                    .to_string(),
                ),
            ],
        );
        let p = &self.propagate;
        section(
            "propagate",
            vec![
                ("z_start", p.z_start.to_string()),
                ("z_final", p.z_final.to_string()),
                ("dz", p.dz.to_string()),
                ("output_z", list(&p.output_z)),
            ],
        );
        section("checks", vec![("random_sources", self.checks.random_sources.to_string())]);
        section(
            "output",
            vec![
                ("write_fields", self.output.write_fields.to_string()),
                ("write_csv", self.output.write_csv.to_string()),
                ("cut_z", self.output.cut_z.to_string()),
            ],
        );
        s
    }
}
