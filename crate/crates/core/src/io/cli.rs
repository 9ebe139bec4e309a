//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error (bad arguments, unknown preset,
//! invalid configuration), 2 runtime failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::analysis::{fourier_spectrum_with, TimeSeries, Window};
use crate::error::{Error, Result};
use crate::io::config::{load_config, Pipeline, RunConfig};
use crate::io::output::{read_timeseries_csv, write_json, write_spectrum_csv};
use crate::io::presets::{preset_config, PRESETS};
use crate::io::{run_config, RunManifest};
use crate::parallel::Execution;

#[derive(Parser, Debug)]
#[command(name = "rydberg-jc", version, about = "Collapse and revival in Rydberg-blockaded ensembles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a preset or a configuration file.
    Run(RunArgs),
    /// Run a radius or distance sweep (fig2e, fig5c or a sweep configuration).
    Sweep(SweepArgs),
    /// Fourier spectrum of one column of a time-series CSV.
    Spectrum(SpectrumArgs),
    /// List the available presets.
    ListPresets,
}

#[derive(Args, Debug)]
struct Source {
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    /// `key = value` file, or a manifest written by an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    /// 0 lets the pool decide, 1 runs sequentially.
    #[arg(long)]
    workers: Option<usize>,
    /// Extra `key=value` overrides, applied in order.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    source: Source,
    /// Comma-separated radii or distances, um.
    #[arg(long)]
    values: Option<String>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum WindowArg {
    Hann,
    Rectangular,
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "NRy")]
    column: String,
    #[arg(long, value_enum, default_value = "hann")]
    window: WindowArg,
    /// Output directory (defaults to the input's directory).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn usage_error(e: &Error) -> bool {
    matches!(e, Error::UnknownPreset { .. } | Error::Config { .. })
}

fn resolve(source: &Source, o: &Overrides) -> Result<RunConfig> {
    let mut cfg = match (&source.preset, &source.config) {
        (Some(name), _) => preset_config(name)?,
        (None, Some(path)) => load_config(path).map_err(|e| match e {
            Error::Io(io) => Error::Config {
                key: "config".into(),
                message: format!("{}: {io}", path.display()),
            },
            other => other,
        })?,
        (None, None) => unreachable!("clap requires a source"),
    };
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(s) = o.samples {
        cfg.samples = s;
    }
    if let Some(w) = o.workers {
        cfg.workers = w;
    }
    for kv in &o.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config {
            key: kv.clone(),
            message: "expected KEY=VALUE".into(),
        })?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report(manifest: &RunManifest, out: &Path) {
    for f in &manifest.outputs {
        println!("{}", out.join(f).display());
    }
    eprintln!("done in {:.1} s", manifest.wall_time_s);
}

fn run(args: &RunArgs) -> Result<()> {
    let cfg = resolve(&args.source, &args.overrides)?;
    let m = run_config(&cfg, &args.overrides.out, Execution::from_workers(cfg.workers))?;
    report(&m, &args.overrides.out);
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let mut cfg = resolve(&args.source, &args.overrides)?;
    if !matches!(cfg.pipeline, Pipeline::RadiusSweep | Pipeline::DistanceSweep) {
        return Err(Error::Config {
            key: "pipeline".into(),
            message: "sweep needs a radius_sweep or distance_sweep configuration (e.g. fig2e, fig5c)".into(),
        });
    }
    if let Some(v) = &args.values {
        cfg.set("sweep_values_um", v)?;
        cfg.validate()?;
    }
    let m = run_config(&cfg, &args.overrides.out, Execution::from_workers(cfg.workers))?;
    report(&m, &args.overrides.out);
    Ok(())
}

fn spectrum(args: &SpectrumArgs) -> Result<()> {
    let table = read_timeseries_csv(&args.input)?;
    let values = table.column(&args.column).ok_or_else(|| Error::Config {
        key: "column".into(),
        message: format!("`{}` is not a column of {}", args.column, args.input.display()),
    })?;
    let series = TimeSeries::new(table.time_grid.clone(), values.to_vec())?;
    let window = match args.window {
        WindowArg::Hann => Window::Hann,
        WindowArg::Rectangular => Window::Rectangular,
    };
    let sp = fourier_spectrum_with(&series, window);
    let out = match &args.out {
        Some(d) => d.clone(),
        None => args.input.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    std::fs::create_dir_all(if out.as_os_str().is_empty() { Path::new(".") } else { &out })?;
    let stem = args
        .input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".into());
    let csv = out.join(format!("{stem}_spectrum.csv"));
    let summary = out.join(format!("{stem}_summary.json"));
    write_spectrum_csv(&csv, &[(args.column.as_str(), &sp)])?;
    write_json(
        &summary,
        &json!({
            "input": args.input.display().to_string(),
            "column": args.column,
            "window": sp.window,
            "peak_frequency_mhz": sp.peak_frequency,
            "centroid_frequency_mhz": sp.centroid_frequency,
            "resolution_mhz": sp.resolution(),
        }),
    )?;
    println!("{}\n{}", csv.display(), summary.display());
    println!("peak {:.4} MHz (resolution {:.4} MHz)", sp.peak_frequency, sp.resolution());
    Ok(())
}

fn list_presets() {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    for p in &PRESETS {
        if writeln!(out, "{:<6}  {}", p.name, p.description).is_err() {
            break;
        }
    }
}

/// Runs the tool on `argv` (including the program name) and returns the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Spectrum(a) => spectrum(a),
        Command::ListPresets => {
            list_presets();
            Ok(())
        }
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if usage_error(&e) {
                1
            } else {
                2
            }
        }
    }
}
