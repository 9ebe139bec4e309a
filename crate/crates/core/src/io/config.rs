//! Run configuration: flat `key = value` files in the units used in the
//! literature (MHz, MHz um^6, kHz, um, us), converted to internal units on use.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Number, Value};

use crate::analysis::RevivalWindows;
use crate::dynamics::PhysicalParams;
use crate::error::{Error, Result};
use crate::jc_reference::{AtomNumberDist, BinomialDist, PoissonDist};
use crate::open_system::DecayParams;
use crate::superatom::CouplingSource;
use crate::units::{khz_to_angular, mhz_to_angular, uniform_grid};

/// Largest Poisson truncation; ensembles are further limited by the basis size.
pub const MAX_NMAX: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    /// Monte Carlo many-body ensemble (optionally with detection).
    Ensemble,
    /// Blockaded master equation with decay and dephasing.
    Master,
    /// Two interacting superatoms.
    Pair,
    RadiusSweep,
    DistanceSweep,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrapKind {
    GaussianCloud,
    Lattice,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub pipeline: Pipeline,
    pub omega_mhz: f64,
    pub c6_mhz_um6: f64,
    pub nbar: f64,
    pub nmax: usize,
    pub trap_kind: TrapKind,
    pub trap_sigma_um: f64,
    pub lattice_rows: usize,
    pub lattice_cols: usize,
    pub lattice_spacing_um: f64,
    pub load_prob: f64,
    pub t_max_us: f64,
    pub n_time_points: usize,
    pub max_excitations: usize,
    pub energy_cutoff_factor: f64,
    pub gamma2_khz: f64,
    pub gamma_khz: f64,
    pub detection_t: f64,
    pub pair_distance_um: f64,
    pub samples: usize,
    pub seed: u64,
    pub workers: usize,
    /// Radii or distances of a sweep, um.
    pub sweep_values_um: Vec<f64>,
    pub coupling_source: CouplingSource,
    /// Configurations rerun with one more excitation to check truncation.
    pub convergence_configs: usize,
}

impl Default for RunConfig {
    /// Gaussian cloud of radius 2 um, mean 7 atoms, 1 MHz drive.
    fn default() -> Self {
        Self {
            preset: None,
            pipeline: Pipeline::Ensemble,
            omega_mhz: 1.0,
            c6_mhz_um6: 3.2e6,
            nbar: 7.0,
            nmax: 20,
            trap_kind: TrapKind::GaussianCloud,
            trap_sigma_um: 2.0,
            lattice_rows: 3,
            lattice_cols: 3,
            lattice_spacing_um: 3.0,
            load_prob: 0.5,
            t_max_us: 10.0,
            n_time_points: 501,
            max_excitations: 2,
            energy_cutoff_factor: 1e4,
            gamma2_khz: 0.8,
            gamma_khz: 0.0,
            detection_t: 1.0,
            pair_distance_um: 20.0,
            samples: 2000,
            seed: 1,
            workers: 0,
            sweep_values_um: Vec::new(),
            coupling_source: CouplingSource::Point,
            convergence_configs: 0,
        }
    }
}

fn config_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Converts the textual value of `key` to JSON, guided by the current value.
fn parse_value(key: &str, current: &Value, text: &str) -> Result<Value> {
    let number = |s: &str| -> Result<Value> {
        let s = s.trim();
        if let Ok(u) = s.parse::<u64>() {
            return Ok(Value::Number(u.into()));
        }
        if let Ok(i) = s.parse::<i64>() {
            return Ok(Value::Number(i.into()));
        }
        s.parse::<f64>()
            .ok()
            .and_then(Number::from_f64)
            .map(Value::Number)
            .ok_or_else(|| config_err(key, format!("cannot parse `{s}` as a number")))
    };
    match current {
        Value::Number(_) => number(text),
        Value::Array(_) => {
            if text.trim().is_empty() {
                return Ok(Value::Array(Vec::new()));
            }
            text.split(',').map(number).collect::<Result<Vec<_>>>().map(Value::Array)
        }
        Value::Null if key == "preset" && text.trim().is_empty() => Ok(Value::Null),
        _ => Ok(Value::String(text.trim().to_string())),
    }
}

impl RunConfig {
    /// Applies one textual `key = value` assignment.
    pub fn set(&mut self, key: &str, text: &str) -> Result<()> {
        let mut obj = match serde_json::to_value(&*self)? {
            Value::Object(m) => m,
            _ => unreachable!("config serialises to an object"),
        };
        let current = obj
            .get(key)
            .ok_or_else(|| config_err(key, "unknown key"))?
            .clone();
        obj.insert(key.to_string(), parse_value(key, &current, text)?);
        *self = serde_json::from_value(Value::Object(obj)).map_err(|e| config_err(key, e.to_string()))?;
        Ok(())
    }

    /// Parses a flat `key = value` text. A `preset` line selects the base
    /// values; the remaining lines override them in file order.
    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                config_err(line, format!("line {} is not of the form key = value", lineno + 1))
            })?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut cfg = match pairs.iter().find(|p| p.0 == "preset") {
            Some((_, name)) if !name.is_empty() => crate::io::presets::preset_config(name)?,
            _ => Self::default(),
        };
        for (k, v) in pairs.iter().filter(|p| p.0 != "preset") {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads the `config` object of a run manifest.
    pub fn from_manifest_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text)?;
        let obj = v
            .get("config")
            .cloned()
            .ok_or_else(|| config_err("config", "manifest has no config object"))?;
        let cfg: Self = serde_json::from_value(obj).map_err(|e| config_err("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(config_err(key, format!("must be positive, got {v}")))
            }
        };
        let non_negative = |key: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(config_err(key, format!("must be non-negative, got {v}")))
            }
        };
        positive("omega_mhz", self.omega_mhz)?;
        non_negative("c6_mhz_um6", self.c6_mhz_um6)?;
        positive("nbar", self.nbar)?;
        positive("trap_sigma_um", self.trap_sigma_um)?;
        positive("lattice_spacing_um", self.lattice_spacing_um)?;
        positive("t_max_us", self.t_max_us)?;
        positive("energy_cutoff_factor", self.energy_cutoff_factor)?;
        non_negative("gamma2_khz", self.gamma2_khz)?;
        non_negative("gamma_khz", self.gamma_khz)?;
        positive("pair_distance_um", self.pair_distance_um)?;
        if self.nmax < 1 || self.nmax > MAX_NMAX {
            return Err(config_err("nmax", format!("must lie in 1..={MAX_NMAX}, got {}", self.nmax)));
        }
        if self.pipeline == Pipeline::Ensemble || self.pipeline == Pipeline::RadiusSweep {
            let max_n = match self.trap_kind {
                TrapKind::GaussianCloud => self.nmax,
                TrapKind::Lattice => self.lattice_rows * self.lattice_cols,
            };
            if max_n > crate::statespace::MAX_ATOMS {
                return Err(config_err(
                    if self.trap_kind == TrapKind::Lattice { "lattice_rows" } else { "nmax" },
                    format!("ensembles are limited to {} atoms", crate::statespace::MAX_ATOMS),
                ));
            }
        }
        if self.lattice_rows == 0 || self.lattice_cols == 0 {
            return Err(config_err("lattice_rows", "lattice needs at least one row and column"));
        }
        if !(0.0..=1.0).contains(&self.load_prob) {
            return Err(config_err("load_prob", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.detection_t) {
            return Err(config_err("detection_t", "must lie in [0, 1]"));
        }
        if self.n_time_points < 2 {
            return Err(config_err("n_time_points", "at least two time points are needed"));
        }
        if self.max_excitations < 1 {
            return Err(config_err("max_excitations", "must be at least 1"));
        }
        if self.samples < 1 {
            return Err(config_err("samples", "must be at least 1"));
        }
        if self.sweep_values_um.iter().any(|v| !(*v > 0.0))
            || self.sweep_values_um.windows(2).any(|w| !(w[1] > w[0]))
        {
            return Err(config_err("sweep_values_um", "values must be positive and ascending"));
        }
        if self.trap_kind == TrapKind::Lattice && self.pipeline != Pipeline::Ensemble {
            return Err(config_err("trap_kind", "lattices are only supported by the ensemble pipeline"));
        }
        Ok(())
    }

    pub fn physical_params(&self) -> Result<PhysicalParams> {
        PhysicalParams::new(mhz_to_angular(self.omega_mhz), mhz_to_angular(self.c6_mhz_um6))
    }

    pub fn decay_params(&self) -> Result<DecayParams> {
        DecayParams::new(khz_to_angular(self.gamma2_khz), khz_to_angular(self.gamma_khz))
    }

    pub fn time_grid(&self) -> Vec<f64> {
        uniform_grid(self.t_max_us, self.n_time_points)
    }

    pub fn poisson(&self) -> Result<PoissonDist> {
        PoissonDist::new(self.nbar, self.nmax)
    }

    pub fn atom_dist(&self) -> Result<AtomNumberDist> {
        Ok(match self.trap_kind {
            TrapKind::GaussianCloud => AtomNumberDist::Poisson(self.poisson()?),
            TrapKind::Lattice => {
                AtomNumberDist::Binomial(BinomialDist::new(self.lattice_rows * self.lattice_cols, self.load_prob)?)
            }
        })
    }

    /// Contrast windows scaled to the mean atom number of the scenario.
    pub fn windows(&self, mean_n: f64) -> RevivalWindows {
        RevivalWindows::for_mean(mean_n, mhz_to_angular(self.omega_mhz))
    }
}

/// Loads a `key = value` file, or a run manifest if the file is JSON.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    if text.trim_start().starts_with('{') {
        RunConfig::from_manifest_json(&text)
    } else {
        RunConfig::from_key_values(&text)
    }
}

/// Every key accepted in a configuration file.
pub fn config_keys() -> Vec<String> {
    match serde_json::to_value(RunConfig::default()) {
        Ok(Value::Object(m)) => m.keys().cloned().collect(),
        _ => Vec::new(),
    }
}
