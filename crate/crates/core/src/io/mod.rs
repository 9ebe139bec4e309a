//! Configuration, presets, output files and the command-line front end.

pub mod cli;
pub mod config;
pub mod output;
pub mod presets;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::{fourier_spectrum_with, RevivalWindows, SpectrumResult, TimeSeries, Window};
use crate::detection::{detected_timeseries, DetectionModel};
use crate::ensemble::{default_max_excitations, radius_sweep_with, run_scenario, ScenarioSpec, TrapGeometry};
use crate::error::{Error, Result};
use crate::jc_reference::{collective_p1, AtomNumberDist, DriveParams};
use crate::open_system::averaged_master_scenario;
use crate::parallel::Execution;
use crate::superatom::{distance_sweep, two_ensemble_scenario, TwoEnsembleSpec};

use config::{Pipeline, RunConfig, TrapKind};
use output::{write_grid_csv, write_json, write_spectrum_csv, write_timeseries_csv, TimeseriesTable};

pub use config::load_config;

/// Everything needed to repeat a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub name: String,
    pub config: RunConfig,
    pub series: Vec<SeriesRecord>,
    pub outputs: Vec<String>,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesRecord {
    pub label: String,
    pub config: RunConfig,
    pub metadata: Value,
}

fn series_stem(name: &str, label: &str) -> String {
    if label.is_empty() {
        name.to_string()
    } else {
        format!("{name}_{label}")
    }
}

fn contrast(windows: &RevivalWindows, grid: &[f64], values: &[f64]) -> Option<f64> {
    let s = TimeSeries::new(grid.to_vec(), values.to_vec()).ok()?;
    windows.contrast(&s).ok()
}

fn spectra(grid: &[f64], values: &[f64]) -> Option<(SpectrumResult, SpectrumResult)> {
    let s = TimeSeries::new(grid.to_vec(), values.to_vec()).ok()?;
    Some((fourier_spectrum_with(&s, Window::Hann), fourier_spectrum_with(&s, Window::Rectangular)))
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn windows_json(w: &RevivalWindows) -> Value {
    json!({ "collapse_us": [w.collapse.0, w.collapse.1], "revival_us": [w.revival.0, w.revival.1] })
}

/// Scenario description of an ensemble configuration.
pub fn scenario_spec(cfg: &RunConfig) -> Result<ScenarioSpec> {
    let geometry = match cfg.trap_kind {
        TrapKind::GaussianCloud => TrapGeometry::gaussian(cfg.trap_sigma_um)?,
        TrapKind::Lattice => TrapGeometry::square_lattice(cfg.lattice_rows, cfg.lattice_cols, cfg.lattice_spacing_um)?,
    };
    let atom_dist = cfg.atom_dist()?;
    Ok(ScenarioSpec {
        geometry,
        max_excitations: cfg.max_excitations.min(atom_dist.max_atoms().max(1)),
        atom_dist,
        params: cfg.physical_params()?,
        time_grid: cfg.time_grid(),
        samples: cfg.samples,
        seed: cfg.seed,
        energy_cutoff_factor: cfg.energy_cutoff_factor,
        convergence_configs: cfg.convergence_configs,
    })
}

pub fn pair_spec(cfg: &RunConfig) -> Result<TwoEnsembleSpec> {
    Ok(TwoEnsembleSpec {
        atom_dist: cfg.poisson()?,
        distance: cfg.pair_distance_um,
        trap_sigma: cfg.trap_sigma_um,
        params: cfg.physical_params()?,
        time_grid: cfg.time_grid(),
        samples: cfg.samples,
        seed: cfg.seed,
        coupling: cfg.coupling_source,
    })
}

struct SeriesOutput {
    summary: Value,
    metadata: Value,
    files: Vec<PathBuf>,
}

fn run_ensemble(cfg: &RunConfig, stem: &str, out: &Path, exec: Execution) -> Result<SeriesOutput> {
    let spec = scenario_spec(cfg)?;
    let result = run_scenario(&spec, exec)?;
    let grid = &spec.time_grid;
    let mut table = TimeseriesTable::from_averaged(&result);
    let windows = cfg.windows(spec.atom_dist.mean());
    let q = &result.histogram.q;
    let mut summary = json!({
        "mean_atoms": spec.atom_dist.mean(),
        "windows": windows_json(&windows),
        "revival_contrast_q1": q.get(1).and_then(|r| contrast(&windows, grid, r)),
        "revival_contrast_nry": contrast(&windows, grid, &result.n_ry),
        "revival_contrast_pry": contrast(&windows, grid, &result.p_ry),
        "max_q2": q.get(2).map(|r| max_of(r)),
        "max_p_ry": max_of(&result.p_ry),
        "max_std_error_q1": result.std_error.get(1).map(|r| max_of(r)),
        "tail_mass": result.metadata.tail_mass,
    });
    if cfg.detection_t < 1.0 {
        let model = DetectionModel::new(cfg.detection_t)?;
        let s = detected_timeseries(&result.histogram, &model)?;
        summary["detection"] = json!({
            "efficiency": cfg.detection_t,
            "revival_contrast_s1": s.q.get(1).and_then(|r| contrast(&windows, grid, r)),
        });
        for (n, row) in s.q.into_iter().enumerate() {
            table.push(format!("s{n}"), row);
        }
    }
    let path = out.join(format!("{stem}_timeseries.csv"));
    write_timeseries_csv(&table, &path)?;
    let geometry = match cfg.trap_kind {
        TrapKind::GaussianCloud => format!("gaussian cloud, sigma {} um", cfg.trap_sigma_um),
        TrapKind::Lattice => format!(
            "square grid {}x{}, nearest-neighbour spacing {} um",
            cfg.lattice_rows, cfg.lattice_cols, cfg.lattice_spacing_um
        ),
    };
    let mut metadata = serde_json::to_value(&result.metadata)?;
    metadata["geometry"] = json!(geometry);
    metadata["truncation_rule"] = json!(
        "excitation cap m from the configuration (2 for r < 2.5 um, 3 above in presets), capped at N"
    );
    Ok(SeriesOutput {
        summary,
        metadata,
        files: vec![path],
    })
}

fn run_master(cfg: &RunConfig, stem: &str, out: &Path, exec: Execution) -> Result<SeriesOutput> {
    let grid = cfg.time_grid();
    let dist = AtomNumberDist::Poisson(cfg.poisson()?);
    let params = cfg.physical_params()?;
    let decay = cfg.decay_params()?;
    let r = averaged_master_scenario(&dist, params.rabi, &decay, &grid, exec)?;
    let mut table = TimeseriesTable::new(grid.clone());
    table.push("q0", r.p_ry.iter().map(|p| 1.0 - p).collect());
    table.push("q1", r.p_ry.clone());
    table.push("NRy", r.p_ry.clone());
    table.push("PRy", r.p_ry.clone());
    let path = out.join(format!("{stem}_timeseries.csv"));
    write_timeseries_csv(&table, &path)?;
    let windows = cfg.windows(cfg.nbar);
    let summary = json!({
        "mean_atoms": cfg.nbar,
        "windows": windows_json(&windows),
        "revival_contrast_pry": contrast(&windows, &grid, &r.p_ry),
        "max_p_ry": max_of(&r.p_ry),
        "gamma2_khz": cfg.gamma2_khz,
        "gamma_khz": cfg.gamma_khz,
        "tail_mass": r.tail_mass,
    });
    let metadata = json!({
        "worst_trace_error": r.worst_trace_error,
        "worst_hermiticity_error": r.worst_hermiticity_error,
        "min_diagonal": r.min_diagonal,
        "tail_mass": r.tail_mass,
    });
    Ok(SeriesOutput {
        summary,
        metadata,
        files: vec![path],
    })
}

fn spectrum_json(sp: &Option<(SpectrumResult, SpectrumResult)>) -> Value {
    match sp {
        Some((hann, rect)) => json!({
            "peak_frequency_mhz": hann.peak_frequency,
            "peak_frequency_rectangular_mhz": rect.peak_frequency,
            "centroid_frequency_mhz": hann.centroid_frequency,
            "resolution_mhz": hann.resolution(),
        }),
        None => Value::Null,
    }
}

fn run_pair(cfg: &RunConfig, stem: &str, out: &Path, exec: Execution) -> Result<SeriesOutput> {
    let spec = pair_spec(cfg)?;
    let r = two_ensemble_scenario(&spec, exec)?;
    let grid = &spec.time_grid;
    let drive = DriveParams::from_rabi(spec.params.rabi)?;
    let single = AtomNumberDist::Poisson(spec.atom_dist);
    let decoupled = grid
        .iter()
        .map(|&t| collective_p1(&drive, &single, t).map(|p| 2.0 * p))
        .collect::<Result<Vec<f64>>>()?;
    let mut table = TimeseriesTable::new(grid.clone());
    for (n, row) in r.histogram.q.iter().enumerate() {
        table.push(format!("q{n}"), row.clone());
    }
    table.push("NRy", r.n_ry.clone());
    table.push("PRy", r.histogram.q[0].iter().map(|q| 1.0 - q).collect());
    table.push("NRy_se", r.std_error.clone());
    table.push("NRy_decoupled", decoupled);
    let mut files = vec![out.join(format!("{stem}_timeseries.csv"))];
    write_timeseries_csv(&table, &files[0])?;
    let sp = spectra(grid, &r.n_ry);
    if let Some((hann, rect)) = &sp {
        let path = out.join(format!("{stem}_spectrum.csv"));
        write_spectrum_csv(&path, &[("hann", hann), ("rectangular", rect)])?;
        files.push(path);
    }
    let windows = cfg.windows(cfg.nbar);
    let summary = json!({
        "mean_atoms": cfg.nbar,
        "distance_um": cfg.pair_distance_um,
        "windows": windows_json(&windows),
        "revival_contrast_nry": contrast(&windows, grid, &r.n_ry),
        "spectrum": spectrum_json(&sp),
        "tail_mass": r.tail_mass,
    });
    let metadata = json!({
        "samples": r.samples,
        "distinct_pairs": r.distinct_pairs,
        "coupling_source": cfg.coupling_source,
        "tail_mass": r.tail_mass,
    });
    Ok(SeriesOutput { summary, metadata, files })
}

fn sweep_values(cfg: &RunConfig) -> Result<&[f64]> {
    if cfg.sweep_values_um.is_empty() {
        return Err(Error::Config {
            key: "sweep_values_um".into(),
            message: "a sweep needs at least one value".into(),
        });
    }
    Ok(&cfg.sweep_values_um)
}

fn run_radius_sweep(cfg: &RunConfig, stem: &str, out: &Path, exec: Execution) -> Result<SeriesOutput> {
    let radii = sweep_values(cfg)?;
    let base = scenario_spec(&RunConfig {
        trap_kind: TrapKind::GaussianCloud,
        ..cfg.clone()
    })?;
    let m = cfg.max_excitations;
    let sweep = radius_sweep_with(&base, radii, |r| default_max_excitations(r).min(m), exec)?;
    let path = out.join(format!("{stem}_grid.csv"));
    write_grid_csv(&path, "r_um", &sweep.radii, &sweep.time_grid, &sweep.p_ry)?;
    let windows = cfg.windows(cfg.nbar);
    let rows: Vec<Value> = sweep
        .radii
        .iter()
        .zip(&sweep.results)
        .map(|(r, res)| {
            json!({
                "r_um": r,
                "max_excitations": res.metadata.max_excitations,
                "revival_contrast_pry": contrast(&windows, &sweep.time_grid, &res.p_ry),
                "revival_contrast_q1": res.histogram.q.get(1).and_then(|q| contrast(&windows, &sweep.time_grid, q)),
            })
        })
        .collect();
    let metadata = Value::Array(
        sweep
            .radii
            .iter()
            .zip(&sweep.results)
            .map(|(r, res)| json!({ "r_um": r, "run": res.metadata }))
            .collect(),
    );
    Ok(SeriesOutput {
        summary: json!({ "windows": windows_json(&windows), "radii": rows }),
        metadata,
        files: vec![path],
    })
}

fn run_distance_sweep(cfg: &RunConfig, stem: &str, out: &Path, exec: Execution) -> Result<SeriesOutput> {
    let distances = sweep_values(cfg)?;
    let sweep = distance_sweep(&pair_spec(cfg)?, distances, exec)?;
    let path = out.join(format!("{stem}_grid.csv"));
    write_grid_csv(&path, "d_um", &sweep.distances, &sweep.time_grid, &sweep.n_ry)?;
    let windows = cfg.windows(cfg.nbar);
    let rows: Vec<Value> = sweep
        .distances
        .iter()
        .zip(&sweep.n_ry)
        .map(|(d, n)| {
            json!({
                "d_um": d,
                "revival_contrast_nry": contrast(&windows, &sweep.time_grid, n),
                "spectrum": spectrum_json(&spectra(&sweep.time_grid, n)),
            })
        })
        .collect();
    let metadata = json!({
        "samples": cfg.samples,
        "coupling_source": cfg.coupling_source,
        "distinct_pairs": sweep.results.iter().map(|r| r.distinct_pairs).collect::<Vec<_>>(),
    });
    Ok(SeriesOutput {
        summary: json!({ "windows": windows_json(&windows), "distances": rows }),
        metadata,
        files: vec![path],
    })
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Runs a resolved configuration (all of its series) and writes every output.
pub fn run_config(cfg: &RunConfig, out_dir: &Path, exec: Execution) -> Result<RunManifest> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let started = Instant::now();
    let name = cfg.preset.clone().unwrap_or_else(|| "custom".to_string());
    let series = presets::expand_series(cfg)?;
    let mut records = Vec::with_capacity(series.len());
    let mut summaries = serde_json::Map::new();
    let mut outputs = Vec::new();
    for (i, (label, c)) in series.iter().enumerate() {
        eprintln!("[{}/{}] {}", i + 1, series.len(), series_stem(&name, label));
        let stem = series_stem(&name, label);
        let r = match c.pipeline {
            Pipeline::Ensemble => run_ensemble(c, &stem, out_dir, exec)?,
            Pipeline::Master => run_master(c, &stem, out_dir, exec)?,
            Pipeline::Pair => run_pair(c, &stem, out_dir, exec)?,
            Pipeline::RadiusSweep => run_radius_sweep(c, &stem, out_dir, exec)?,
            Pipeline::DistanceSweep => run_distance_sweep(c, &stem, out_dir, exec)?,
        };
        summaries.insert(if label.is_empty() { "primary".into() } else { label.clone() }, r.summary);
        outputs.extend(r.files.iter().map(|p| file_name(p)));
        records.push(SeriesRecord {
            label: label.clone(),
            config: c.clone(),
            metadata: r.metadata,
        });
    }
    let summary_path = out_dir.join(format!("{name}_summary.json"));
    write_json(&summary_path, &json!({ "name": name, "series": summaries }))?;
    outputs.push(file_name(&summary_path));
    let manifest_name = format!("{name}_manifest.json");
    outputs.push(manifest_name.clone());
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        name,
        config: cfg.clone(),
        series: records,
        outputs,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    write_json(&out_dir.join(manifest_name), &manifest)?;
    Ok(manifest)
}

/// Resolves a preset, applies `key = value` overrides and runs it.
pub fn run_preset(name: &str, overrides: &[(String, String)], out_dir: &Path, exec: Execution) -> Result<RunManifest> {
    let mut cfg = presets::preset_config(name)?;
    for (k, v) in overrides {
        cfg.set(k, v)?;
    }
    run_config(&cfg, out_dir, exec)
}
