//! Configuration-driven runner for the Green's-function experiments.

pub mod config;
pub mod error;
pub mod output;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use uppe_core::green::{paraxial_green, theorem1_residual, theorem2_residual, uppe_green};
use uppe_core::propagator::{march, source_direction_report, MarchOptions};
use uppe_core::verification::{criterion_passed, run_all_checks, shortfall, OracleReport, CRITERIA};
use uppe_core::{causality_stats, Axis, Field};

pub use config::{parse_config, ConfigError, Experiment, ExperimentConfig};
pub use error::CliError;
use output::{write_axis_cuts, write_quadrants, OutputDir};

pub const OUT_ENV: &str = "UPPE_GREEN_OUT";
pub const DEFAULT_OUT: &str = "uppe-green-out";
pub const EFFECTIVE_CONFIG: &str = "config.effective.toml";

/// Minimum share of `z > 0, t < 0` energy for the causality diagnostic.
pub const ACAUSAL_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub seed: u64,
    pub passed: bool,
    pub reports: Vec<OracleReport>,
    pub info: BTreeMap<String, Value>,
}

#[derive(Debug, Default, Serialize)]
struct Timing {
    total_seconds: f64,
    stages: BTreeMap<String, f64>,
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    out: OutputDir,
    reports: Vec<OracleReport>,
    info: BTreeMap<String, Value>,
    timing: Timing,
}

impl Run<'_> {
    fn info(&mut self, key: &str, value: impl Serialize) {
        self.info.insert(key.to_string(), json!(value));
    }

    fn timed<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let v = f();
        self.timing.stages.insert(stage.to_string(), start.elapsed().as_secs_f64());
        v
    }

    fn field_outputs(&mut self, stem: &str, f: &Field) -> Result<(), CliError> {
        if self.cfg.output.write_fields {
            self.out.write_field(stem, f)?;
        }
        if self.cfg.output.write_csv {
            write_axis_cuts(&self.out, "axis_cuts.csv", f, self.cfg.output.cut_z)?;
            write_quadrants(&self.out, "quadrant_energies.csv", &causality_stats(f)?)?;
        }
        self.info("energy", f.energy());
        Ok(())
    }
}

/// `--out`, then `output_dir` from the config, then `$UPPE_GREEN_OUT`, then
/// `./uppe-green-out`.
pub fn resolve_output_dir(cli: Option<&Path>, cfg: &ExperimentConfig, env: Option<&str>) -> PathBuf {
    cli.map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .or_else(|| env.filter(|s| !s.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

/// Size the global pool; `0` keeps the automatic choice. Without the
/// `parallel` feature every count runs sequentially.
pub fn configure_threads(n: usize) -> Result<(), CliError> {
    #[cfg(feature = "parallel")]
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Threads(e.to_string()))?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

/// Execute the configured experiment and write every artifact under `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Summary, CliError> {
    let start = Instant::now();
    let mut run = Run {
        cfg,
        out: OutputDir::create(out)?,
        reports: Vec::new(),
        info: BTreeMap::new(),
        timing: Timing::default(),
    };
    run.out.write_text(EFFECTIVE_CONFIG, &cfg.to_text())?;
    match cfg.experiment {
        Experiment::Fundamental => fundamental(&mut run)?,
        Experiment::Paraxial => paraxial(&mut run)?,
        Experiment::Theorem1 => theorem1(&mut run)?,
        Experiment::Theorem2 => theorem2(&mut run)?,
        Experiment::Propagate => propagate(&mut run)?,
        Experiment::Causality => causality(&mut run)?,
        Experiment::Checks => checks(&mut run)?,
    }
    let passed = match cfg.experiment {
        Experiment::Checks => CRITERIA
            .iter()
            .all(|&n| criterion_passed(&run.reports, n) == Some(true)),
        _ => run.reports.iter().all(|r| r.passed),
    };
    let summary = Summary {
        experiment: cfg.experiment.to_string(),
        seed: cfg.seed,
        passed,
        reports: run.reports,
        info: run.info,
    };
    run.out.write_json("summary.json", &summary)?;
    run.timing.total_seconds = start.elapsed().as_secs_f64();
    run.out.write_json("timing.json", &run.timing)?;
    Ok(summary)
}

fn fundamental(run: &mut Run) -> Result<(), CliError> {
    let spec = run.cfg.green;
    let g = run.timed("uppe_green", || uppe_green(&spec))?;
    run.info("excluded_bins", g.excluded.bins);
    run.info("excluded_mass_fraction", g.excluded.fraction);
    run.field_outputs("uppe_green", &g.field)
}

fn paraxial(run: &mut Run) -> Result<(), CliError> {
    let spec = run.cfg.green;
    let f = run.timed("paraxial_green", || paraxial_green(&spec))?;
    run.field_outputs("paraxial_green", &f)
}

fn theorem1(run: &mut Run) -> Result<(), CliError> {
    let spec = run.cfg.green;
    let r = run.timed("theorem1_residual", || theorem1_residual(&spec))?;
    run.reports.push(
        OracleReport::new("theorem1_residual", Some(1), r.residual, 1e-8)
            .detail("real_part_residual", r.real_part_residual)
            .detail("quadrant_breakdown_pp_pm_mp_mm", r.quadrant_breakdown)
            .detail("residual_without_projection", r.without_projection)
            .detail("residual_without_gate", r.without_gate)
            .detail("excluded_bins", r.excluded.bins)
            .detail("excluded_mass_fraction", r.excluded.fraction),
    );
    if run.cfg.output.write_csv {
        let mut w = run.out.csv_writer("residual_quadrants.csv")?;
        let names = ["pp", "pm", "mp", "mm"];
        w.write_record(["quadrant", "squared_residual_share"])
            .map_err(|e| CliError::Csv("residual_quadrants.csv".into(), e))?;
        for (q, v) in names.iter().zip(r.quadrant_breakdown) {
            w.write_record([q.to_string(), v.to_string()])
                .map_err(|e| CliError::Csv("residual_quadrants.csv".into(), e))?;
        }
        w.flush().map_err(|e| CliError::io(&run.out.path("residual_quadrants.csv"), e))?;
    }
    Ok(())
}

fn theorem2(run: &mut Run) -> Result<(), CliError> {
    let spec = run.cfg.green;
    let r = run.timed("theorem2_residual", || theorem2_residual(&spec))?;
    run.reports
        .push(OracleReport::new("theorem2_spectral_route", Some(2), r.spectral_residual, 1e-10));
    run.reports
        .push(OracleReport::new("theorem2_physical_route", Some(2), r.physical_residual, 0.05));
    Ok(())
}

fn causality(run: &mut Run) -> Result<(), CliError> {
    let spec = run.cfg.green;
    let g = run.timed("uppe_green", || uppe_green(&spec))?;
    let stats = causality_stats(&g.field)?;
    let frac = stats.acausal_forward_fraction();
    run.reports.push(
        OracleReport::new("uppe_green_acausal_fraction", Some(4), shortfall(frac, ACAUSAL_THRESHOLD), 0.0)
            .detail("fraction_z_pos_t_neg", frac)
            .detail("threshold", ACAUSAL_THRESHOLD),
    );
    run.info("causality", stats);
    run.info("excluded_mass_fraction", g.excluded.fraction);
    write_quadrants(&run.out, "quadrant_energies.csv", &stats)?;
    if run.cfg.output.write_fields {
        run.out.write_field("uppe_green", &g.field)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SliceRow {
    step: usize,
    z: f64,
    energy: f64,
}

fn propagate(run: &mut Run) -> Result<(), CliError> {
    let cfg = run.cfg;
    let grid = *cfg.grid();
    let source = cfg.source.to_spec();
    let q = source.to_field(&grid)?;
    run.info("source_direction", source_direction_report(&q)?);
    let prepared = source.prepare(&grid)?;
    let table = cfg.green.beta_table();
    let p = &cfg.propagate;
    let opts = MarchOptions {
        z_start: p.z_start,
        z_final: p.z_final,
        dz: p.dz,
        decimation: 1,
    };
    let result = run.timed("march", || march(&table, None, Some(&prepared), opts))?;
    run.info("steps", result.steps);
    run.info("dropped_source_terms", result.dropped_source_terms);

    let cell = grid.step(Axis::X) * grid.step(Axis::Y) * grid.step(Axis::T);
    let mut written = Vec::new();
    for (k, &z) in p.output_z.iter().enumerate() {
        let (j, slice) = result
            .slices
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1.z - z).abs().total_cmp(&(b.1.z - z).abs()))
            .expect("march keeps at least one slice");
        let physical = slice.to_physical(&grid)?;
        if cfg.output.write_fields {
            run.out.write_slice(&format!("slice_{k:03}"), &grid, slice.z, &physical)?;
        }
        written.push(json!({ "requested_z": z, "z": slice.z, "step": j }));
    }
    run.info("output_slices", written);

    if cfg.output.write_csv {
        let name = "slice_energies.csv";
        let mut w = run.out.csv_writer(name)?;
        for (j, s) in result.slices.iter().enumerate() {
            let e = uppe_core::norm::norm_sqr(&s.to_physical(&grid)?) * cell;
            w.serialize(SliceRow { step: j, z: s.z, energy: e })
                .map_err(|e| CliError::Csv(name.into(), e))?;
        }
        w.flush().map_err(|e| CliError::io(&run.out.path(name), e))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CheckRow<'a> {
    name: &'a str,
    criterion: Option<u8>,
    residual: f64,
    tolerance: f64,
    passed: bool,
}

fn checks(run: &mut Run) -> Result<(), CliError> {
    let reports = run_all_checks(&run.cfg.checks);
    for r in &reports {
        let key = format!("{}{}", r.criterion.map(|c| format!("criterion_{c}/")).unwrap_or_default(), r.name);
        run.timing.stages.insert(key, r.runtime_seconds);
    }
    let verdicts: BTreeMap<String, Option<bool>> = CRITERIA
        .iter()
        .map(|&n| (format!("criterion_{n}"), criterion_passed(&reports, n)))
        .collect();
    run.info("criteria", verdicts);
    if run.cfg.output.write_csv {
        let name = "checks.csv";
        let mut w = run.out.csv_writer(name)?;
        for r in &reports {
            w.serialize(CheckRow {
                name: &r.name,
                criterion: r.criterion,
                residual: r.residual,
                tolerance: r.tolerance,
                passed: r.passed,
            })
            .map_err(|e| CliError::Csv(name.into(), e))?;
        }
        w.flush().map_err(|e| CliError::io(&run.out.path(name), e))?;
    }
    run.reports = reports;
    Ok(())
}
