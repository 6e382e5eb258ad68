use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use uppe_green::output::load_bin;

const SMALL_GRID: &str = "[grid]\nn_x = 8\nn_y = 8\nn_z = 8\nn_t = 16\n";

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_uppe-green"));
    c.env_remove("UPPE_GREEN_OUT");
    c
}

fn write_config(dir: &TempDir, text: &str) -> PathBuf {
    let p = dir.path().join("run.cfg");
    fs::write(&p, text).unwrap();
    p
}

fn run_in(dir: &TempDir, text: &str, out: &str, extra: &[&str]) -> (Output, PathBuf) {
    let cfg = write_config(dir, text);
    let out = dir.path().join(out);
    let output = bin().arg(&cfg).arg("--out").arg(&out).args(extra).output().unwrap();
    (output, out)
}

fn summary(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn odd_count_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run_in(&dir, "experiment = fundamental\n[grid]\nn_x = 15\n", "out", &[]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    assert!(msg.contains("counts must be even"), "{msg}");
    assert!(msg.contains("line 3"), "{msg}");
    assert!(!out.exists());
}

#[test]
fn unknown_key_and_missing_file_exit_two() {
    let dir = TempDir::new().unwrap();
    let (o, _) = run_in(&dir, "experiment = fundamental\nwavelength = 800\n", "out", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown key 'wavelength'"));

    let o = bin().arg(dir.path().join("absent.cfg")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_experiment_override_exits_two() {
    let dir = TempDir::new().unwrap();
    let (o, _) = run_in(&dir, "experiment = fundamental\n", "out", &["--experiment", "everything"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown experiment"));
}

#[test]
fn theorem1_writes_residual_report() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run_in(&dir, "experiment = theorem1\n", "t1", &["--threads", "1"]);
    let s = summary(&out);
    let report = &s["reports"][0];
    assert_eq!(report["name"], "theorem1_residual");
    assert_eq!(report["criterion"], 1);
    assert_eq!(report["tolerance"], 1e-8);
    let passed = report["passed"].as_bool().unwrap();
    assert_eq!(o.status.code(), Some(if passed { 0 } else { 1 }));
    assert!(report["details"]["excluded_mass_fraction"].is_number());
    let echo = fs::read_to_string(out.join("config.effective.toml")).unwrap();
    assert!(echo.contains("n_x = 16") && echo.contains("n_t = 32"), "{echo}");
    assert!(out.join("residual_quadrants.csv").exists());
    let timing: Value = serde_json::from_str(&fs::read_to_string(out.join("timing.json")).unwrap()).unwrap();
    assert!(timing["stages"]["theorem1_residual"].as_f64().unwrap() >= 0.0);
}

#[test]
fn causality_reports_acausal_energy() {
    let dir = TempDir::new().unwrap();
    let text = format!("experiment = causality\n{SMALL_GRID}[output]\nwrite_fields = false\n");
    let (o, out) = run_in(&dir, &text, "causal", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(out.join("quadrant_energies.csv")).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(&headers, vec!["quadrant", "z_sign", "t_sign", "energy", "fraction"]);
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    let pm = rows.iter().find(|r| &r[0] == "pm").unwrap();
    assert_eq!((&pm[1], &pm[2]), ("+", "-"));
    assert!(pm[3].parse::<f64>().unwrap() > 0.0);
    assert!(summary(&out)["passed"].as_bool().unwrap());
}

#[test]
fn propagate_writes_requested_slices() {
    let dir = TempDir::new().unwrap();
    let text = format!(
        "experiment = propagate\n{SMALL_GRID}[source]\nkind = gaussian_pulse\nwidths = 2, 2, 2, 1\ncarrier_omega = 2\nfilter = forward\n[propagate]\ndz = 0.25\noutput_z = [-1, 0, 2.9]\n"
    );
    let (o, out) = run_in(&dir, &text, "prop", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = summary(&out);
    let slices = s["info"]["output_slices"].as_array().unwrap();
    assert_eq!(slices.len(), 3);
    assert_eq!(slices[2]["z"], 3.0);
    for k in 0..3 {
        let (sidecar, data) = load_bin(&out.join(format!("slice_{k:03}.json"))).unwrap();
        assert_eq!(sidecar.shape, vec![8, 8, 16]);
        assert_eq!(sidecar.axes, vec!["x", "y", "t"]);
        assert_eq!(sidecar.fixed[0].0, "z");
        assert_eq!(data.len(), 8 * 8 * 16);
    }
    let forward = s["info"]["source_direction"]["forward_fraction"].as_f64().unwrap();
    // k_z = 0 and ω = 0 bins sit in both halves with weight ½
    assert!(forward > 0.5, "{forward}");
    let energies = fs::read_to_string(out.join("slice_energies.csv")).unwrap();
    assert_eq!(energies.lines().count(), 1 + 1 + 28);
}

#[test]
fn fundamental_is_bit_reproducible() {
    let dir = TempDir::new().unwrap();
    let text = format!("experiment = fundamental\nseed = 11\n{SMALL_GRID}");
    let (a, out_a) = run_in(&dir, &text, "a", &[]);
    let (b, out_b) = run_in(&dir, &text, "b", &["--threads", "2"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(b.status.code(), Some(0));
    for name in [
        "summary.json",
        "axis_cuts.csv",
        "quadrant_energies.csv",
        "uppe_green.bin",
        "uppe_green.json",
    ] {
        let x = fs::read(out_a.join(name)).unwrap();
        let y = fs::read(out_b.join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
    let echo = fs::read_to_string(out_b.join("config.effective.toml")).unwrap();
    assert!(echo.contains("threads = 2"), "{echo}");
}

#[test]
fn field_sidecar_is_self_describing() {
    let dir = TempDir::new().unwrap();
    let text = format!("experiment = paraxial\n{SMALL_GRID}[grid]\n");
    // a repeated section header is fine; keys still may not repeat
    let (o, out) = run_in(&dir, &text, "p", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (sidecar, data) = load_bin(&out.join("paraxial_green.json")).unwrap();
    assert_eq!(sidecar.dtype, "complex64");
    assert_eq!(sidecar.byte_order, "little");
    assert_eq!(sidecar.shape, vec![8, 8, 8, 16]);
    assert_eq!(sidecar.rep, vec!["physical"; 4]);
    assert_eq!(sidecar.origin_index, vec![4, 4, 4, 8]);
    assert_eq!(data.len(), 8 * 8 * 8 * 16);
    // z < 0 half is gated off
    let idx = |x: usize, y: usize, z: usize, t: usize| ((x * 8 + y) * 8 + z) * 16 + t;
    assert!(data[idx(4, 4, 1, 8)].norm() == 0.0);
    let cuts = fs::read_to_string(out.join("axis_cuts.csv")).unwrap();
    assert_eq!(cuts.lines().next(), Some("axis,index,coordinate,re,im,abs"));
    assert_eq!(cuts.lines().count(), 1 + 8 + 8 + 8 + 16);
}

#[test]
fn env_var_sets_default_output_dir() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &format!("experiment = fundamental\n{SMALL_GRID}[output]\nwrite_fields = false\n"));
    let out = dir.path().join("from_env");
    let o = bin().arg(&cfg).env("UPPE_GREEN_OUT", &out).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(out.join("summary.json").exists());
    assert!(!out.join("uppe_green.bin").exists());
}

#[test]
fn checks_exit_status_follows_criteria() {
    let dir = TempDir::new().unwrap();
    let (o, out) = run_in(&dir, "experiment = fundamental\n[checks]\nrandom_sources = 4\n", "checks", &["--experiment", "checks"]);
    let s = summary(&out);
    let criteria = s["info"]["criteria"].as_object().unwrap();
    assert_eq!(criteria.len(), 8);
    let all = criteria.values().all(|v| v.as_bool() == Some(true));
    assert_eq!(s["passed"].as_bool(), Some(all));
    assert_eq!(o.status.code(), Some(if all { 0 } else { 1 }));
    let rows = fs::read_to_string(out.join("checks.csv")).unwrap();
    assert!(rows.starts_with("name,criterion,residual,tolerance,passed\n"));
    assert_eq!(rows.lines().count(), 1 + s["reports"].as_array().unwrap().len());
}
