//! Named scenarios reproducing the published parameter sets.
//!
//! A preset is a base configuration plus optional variant series, each given
//! as key overrides applied on top of the (possibly user-modified) base.

use crate::error::{Error, Result};
use crate::io::config::{Pipeline, RunConfig, TrapKind};

pub const PRESET_NAMES: [&str; 15] = [
    "fig2a", "fig2b", "fig2c", "fig2d", "fig2e", "fig3a", "fig3b", "fig3c", "fig3d", "fig4a", "fig4b", "fig5a",
    "fig5b", "fig5c", "fig5d",
];

type Overrides = &'static [(&'static str, &'static str)];

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub variants: &'static [(&'static str, Overrides)],
}

const R4: Overrides = &[("trap_sigma_um", "4"), ("max_excitations", "3")];

pub const PRESETS: [Preset; 15] = [
    Preset {
        name: "fig2a",
        description: "Gaussian cloud r = 2 um, mean 7 atoms, m = 2",
        variants: &[],
    },
    Preset {
        name: "fig2b",
        description: "Gaussian cloud r = 3 um, mean 7 atoms, m = 3",
        variants: &[],
    },
    Preset {
        name: "fig2c",
        description: "Gaussian cloud r = 4 um, mean 7 atoms, m = 3 with convergence check",
        variants: &[],
    },
    Preset {
        name: "fig2d",
        description: "Gaussian cloud r = 5 um, mean 7 atoms, m = 3 with convergence check",
        variants: &[],
    },
    Preset {
        name: "fig2e",
        description: "P_Ry over time and trap radius 1-5 um",
        variants: &[],
    },
    Preset {
        name: "fig3a",
        description: "detection efficiency T = 0.1 at r = 2 um (variant r = 4 um)",
        variants: &[("r4", R4)],
    },
    Preset {
        name: "fig3b",
        description: "detection efficiency T = 0.5 at r = 2 um (variant r = 4 um)",
        variants: &[("r4", R4)],
    },
    Preset {
        name: "fig3c",
        description: "master equation, gamma2 = 0.8 kHz, gamma = 0 (variant without decay)",
        variants: &[("closed", &[("gamma2_khz", "0")])],
    },
    Preset {
        name: "fig3d",
        description: "master equation, gamma = 10 kHz (variant 100 kHz)",
        variants: &[("g100", &[("gamma_khz", "100")])],
    },
    Preset {
        name: "fig4a",
        description: "3x3 lattice, d = 3 um, loading 0.5 (variant d = 5 um)",
        variants: &[("d5", &[("lattice_spacing_um", "5")])],
    },
    Preset {
        name: "fig4b",
        description: "2x2 lattice, d = 4 um, loading 0.5",
        variants: &[],
    },
    Preset {
        name: "fig5a",
        description: "two ensembles, mean 10 atoms each, d = 20 um",
        variants: &[],
    },
    Preset {
        name: "fig5b",
        description: "two ensembles, mean 10 atoms each, d = 4 um",
        variants: &[],
    },
    Preset {
        name: "fig5c",
        description: "N_Ry over time and ensemble distance 4-20 um",
        variants: &[],
    },
    Preset {
        name: "fig5d",
        description: "spectra of N_Ry at d = 4 um (variant d = 20 um)",
        variants: &[("d20", &[("pair_distance_um", "20")])],
    },
];

pub fn find_preset(name: &str) -> Result<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name).ok_or_else(|| Error::UnknownPreset {
        name: name.to_string(),
        valid: PRESET_NAMES.join(", "),
    })
}

fn steps(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

fn pair_base() -> RunConfig {
    RunConfig {
        pipeline: Pipeline::Pair,
        nbar: 10.0,
        nmax: 30,
        samples: 500,
        trap_sigma_um: 1.0,
        ..RunConfig::default()
    }
}

fn ensemble_cloud(sigma: f64, m: usize, convergence: usize) -> RunConfig {
    RunConfig {
        trap_sigma_um: sigma,
        max_excitations: m,
        convergence_configs: convergence,
        ..RunConfig::default()
    }
}

fn lattice(rows: usize, cols: usize, spacing: f64) -> RunConfig {
    RunConfig {
        trap_kind: TrapKind::Lattice,
        lattice_rows: rows,
        lattice_cols: cols,
        lattice_spacing_um: spacing,
        load_prob: 0.5,
        max_excitations: rows * cols,
        ..RunConfig::default()
    }
}

/// Base configuration of a preset.
pub fn preset_config(name: &str) -> Result<RunConfig> {
    let p = find_preset(name)?;
    let mut c = match p.name {
        "fig2a" => ensemble_cloud(2.0, 2, 0),
        "fig2b" => ensemble_cloud(3.0, 3, 0),
        "fig2c" => ensemble_cloud(4.0, 3, 100),
        "fig2d" => ensemble_cloud(5.0, 3, 100),
        "fig2e" => RunConfig {
            pipeline: Pipeline::RadiusSweep,
            max_excitations: 3,
            sweep_values_um: steps(1.0, 5.0, 0.5),
            ..RunConfig::default()
        },
        "fig3a" => RunConfig {
            detection_t: 0.1,
            ..RunConfig::default()
        },
        "fig3b" => RunConfig {
            detection_t: 0.5,
            ..RunConfig::default()
        },
        "fig3c" => RunConfig {
            pipeline: Pipeline::Master,
            ..RunConfig::default()
        },
        "fig3d" => RunConfig {
            pipeline: Pipeline::Master,
            gamma_khz: 10.0,
            ..RunConfig::default()
        },
        "fig4a" => lattice(3, 3, 3.0),
        "fig4b" => lattice(2, 2, 4.0),
        "fig5a" => RunConfig {
            pair_distance_um: 20.0,
            ..pair_base()
        },
        "fig5b" | "fig5d" => RunConfig {
            pair_distance_um: 4.0,
            ..pair_base()
        },
        "fig5c" => RunConfig {
            pipeline: Pipeline::DistanceSweep,
            sweep_values_um: steps(4.0, 20.0, 0.5),
            ..pair_base()
        },
        _ => unreachable!("every listed preset has a base configuration"),
    };
    c.preset = Some(p.name.to_string());
    Ok(c)
}

/// Primary series followed by the variants, each fully resolved from `base`.
pub fn expand_series(base: &RunConfig) -> Result<Vec<(String, RunConfig)>> {
    let mut out = vec![(String::new(), base.clone())];
    if let Some(name) = &base.preset {
        for (label, overrides) in find_preset(name)?.variants {
            let mut c = base.clone();
            for (k, v) in *overrides {
                c.set(k, v)?;
            }
            c.validate()?;
            out.push((label.to_string(), c));
        }
    }
    Ok(out)
}
