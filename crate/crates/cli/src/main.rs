use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use uppe_green::{configure_threads, parse_config, resolve_output_dir, run, CliError, Experiment, OUT_ENV};

#[derive(Debug, Parser)]
#[command(name = "uppe-green", version, about = "Green's-function experiments for the unidirectional pulse propagation equation")]
struct Args {
    /// Configuration file (`key = value`, optional `[section]` headers).
    config: PathBuf,
    /// Output directory. Defaults to `output_dir`, then $UPPE_GREEN_OUT.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 picks automatically. Overrides `threads`.
    #[arg(long)]
    threads: Option<usize>,
    /// Run this experiment instead of the configured one.
    #[arg(long)]
    experiment: Option<String>,
}

fn execute(args: &Args) -> Result<bool, CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| CliError::ConfigFile {
        path: args.config.display().to_string(),
        message: e.to_string(),
    })?;
    let mut cfg = parse_config(&text).map_err(|e| CliError::ConfigFile {
        path: args.config.display().to_string(),
        message: e.to_string(),
    })?;
    if let Some(name) = &args.experiment {
        cfg.experiment = name
            .parse::<Experiment>()
            .map_err(|message| CliError::ConfigFile {
                path: "--experiment".into(),
                message,
            })?;
    }
    if let Some(n) = args.threads {
        cfg.threads = n;
    }
    configure_threads(cfg.threads)?;
    let env = std::env::var(OUT_ENV).ok();
    let out = resolve_output_dir(args.out.as_deref(), &cfg, env.as_deref());
    let summary = run(&cfg, &out)?;
    for r in &summary.reports {
        println!(
            "{} {}: residual {:e} (tolerance {:e})",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.residual,
            r.tolerance
        );
    }
    println!(
        "{}: {} -> {}",
        summary.experiment,
        if summary.passed { "pass" } else { "fail" },
        out.display()
    );
    Ok(summary.passed)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("uppe-green: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
