//! Monte Carlo averaging over random trap loading.
//!
//! Gaussian clouds: for every atom number `N` the excitation histogram is
//! averaged over random positions, then the per-`N` means are combined with
//! the atom-number weights. Lattices: occupancy patterns are drawn site by
//! site and averaged uniformly.
//!
//! Every configuration draws from its own ChaCha stream, `(N << 32) | index`,
//! and reductions run in task order, so results do not depend on the number
//! of workers.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    build_hamiltonian, evolve_with, excitation_expectations, ExcitationHistogram, PhysicalParams,
    PropagationOptions, SpatialConfiguration, DEFAULT_ENERGY_CUTOFF_FACTOR, NORM_TOLERANCE,
};
use crate::error::{invalid, Error, Result};
use crate::jc_reference::AtomNumberDist;
use crate::parallel::{map_ordered, Execution};
use crate::statespace::{enumerate_basis, truncated_dimension, MAX_ATOMS};

/// Stream reserved for lattice occupancy draws.
const OCCUPANCY_STREAM: u64 = u64::MAX;
/// Weight above which an atom number gets the minimum sample allocation.
const FLOOR_WEIGHT: f64 = 1e-3;
const MIN_SAMPLES_PER_N: usize = 50;
/// Largest basis used by the truncation convergence check.
const CONVERGENCE_MAX_DIM: usize = 1500;
pub const CONVERGENCE_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrapGeometry {
    GaussianCloud { sigma: f64 },
    Lattice { sites: Vec<[f64; 3]> },
}

impl TrapGeometry {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(invalid(format!("trap sigma must be positive, got {sigma}")));
        }
        Ok(Self::GaussianCloud { sigma })
    }

    pub fn lattice(sites: Vec<[f64; 3]>) -> Result<Self> {
        if sites.is_empty() {
            return Err(invalid("lattice needs at least one site"));
        }
        for i in 0..sites.len() {
            for j in i + 1..sites.len() {
                if !(crate::dynamics::distance(&sites[i], &sites[j]) > 0.0) {
                    return Err(invalid(format!("lattice sites {i} and {j} coincide")));
                }
            }
        }
        Ok(Self::Lattice { sites })
    }

    /// `rows x cols` grid in the z = 0 plane, row-major site order.
    pub fn square_lattice(rows: usize, cols: usize, spacing: f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid("lattice needs at least one row and one column"));
        }
        if !(spacing > 0.0) {
            return Err(invalid(format!("lattice spacing must be positive, got {spacing}")));
        }
        let sites = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| [c as f64 * spacing, r as f64 * spacing, 0.0]))
            .collect();
        Self::lattice(sites)
    }

    pub fn site_count(&self) -> Option<usize> {
        match self {
            Self::Lattice { sites } => Some(sites.len()),
            Self::GaussianCloud { .. } => None,
        }
    }
}

/// Positions of `n_atoms` atoms. For a lattice, a uniformly random set of
/// `n_atoms` distinct sites is occupied.
pub fn sample_positions<R: Rng + ?Sized>(
    geometry: &TrapGeometry,
    n_atoms: usize,
    rng: &mut R,
) -> Result<SpatialConfiguration> {
    match geometry {
        TrapGeometry::GaussianCloud { sigma } => {
            let normal = Normal::new(0.0, *sigma).map_err(|e| invalid(e.to_string()))?;
            let positions = (0..n_atoms)
                .map(|_| [normal.sample(rng), normal.sample(rng), normal.sample(rng)])
                .collect();
            Ok(SpatialConfiguration { positions })
        }
        TrapGeometry::Lattice { sites } => {
            if n_atoms > sites.len() {
                return Err(invalid(format!(
                    "{n_atoms} atoms do not fit on {} sites",
                    sites.len()
                )));
            }
            let mut chosen = rand::seq::index::sample(rng, sites.len(), n_atoms).into_vec();
            chosen.sort_unstable();
            Ok(SpatialConfiguration {
                positions: chosen.into_iter().map(|i| sites[i]).collect(),
            })
        }
    }
}

/// Draw from the truncated, renormalised atom-number distribution.
pub fn sample_atom_number<R: Rng + ?Sized>(dist: &AtomNumberDist, rng: &mut R) -> usize {
    let weights = dist.weights();
    if weights.len() == 1 {
        return weights[0].0;
    }
    let index = WeightedIndex::new(weights.iter().map(|w| w.1)).expect("valid weights");
    weights[index.sample(rng)].0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub geometry: TrapGeometry,
    pub atom_dist: AtomNumberDist,
    pub params: PhysicalParams,
    pub time_grid: Vec<f64>,
    /// Excitation cap `m`; capped at `N` for small ensembles.
    pub max_excitations: usize,
    pub samples: usize,
    pub seed: u64,
    pub energy_cutoff_factor: f64,
    /// Number of configurations rerun with `m + 1` to check truncation.
    pub convergence_configs: usize,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.samples < 1 {
            return Err(invalid("samples must be at least 1"));
        }
        if !(self.energy_cutoff_factor > 0.0) {
            return Err(invalid("energy cutoff factor must be positive"));
        }
        let max_n = self.atom_dist.max_atoms();
        if max_n > MAX_ATOMS {
            return Err(Error::Capacity {
                n_atoms: max_n,
                max: MAX_ATOMS,
            });
        }
        match (&self.geometry, &self.atom_dist) {
            (TrapGeometry::Lattice { sites }, AtomNumberDist::Binomial(b)) => {
                if b.trials() != sites.len() {
                    return Err(invalid(format!(
                        "binomial trials {} differ from the {} lattice sites",
                        b.trials(),
                        sites.len()
                    )));
                }
            }
            (TrapGeometry::Lattice { .. }, _) => {
                return Err(invalid("lattice scenarios need the binomial occupancy model"));
            }
            (TrapGeometry::GaussianCloud { .. }, AtomNumberDist::Binomial(_)) => {
                return Err(invalid("gaussian clouds need a Poisson or fixed atom number"));
            }
            _ => {}
        }
        Ok(())
    }

    fn propagation(&self) -> PropagationOptions {
        PropagationOptions {
            energy_cutoff_factor: self.energy_cutoff_factor,
            norm_tolerance: NORM_TOLERANCE,
        }
    }

    /// Largest excitation number that can appear in the output.
    pub fn max_count(&self) -> usize {
        self.max_excitations.min(self.atom_dist.max_atoms())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub configurations: usize,
    pub max_excitations: usize,
    /// Largest change of `q[0..m-1]` when `m` is raised by one.
    pub worst_deviation: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub samples: usize,
    /// `(N or occupancy, configurations propagated)`.
    pub samples_per_n: Vec<(usize, usize)>,
    pub tail_mass: f64,
    pub max_excitations: usize,
    pub energy_cutoff_factor: f64,
    pub failed: usize,
    pub total: usize,
    pub convergence: Option<ConvergenceReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragedResult {
    pub histogram: ExcitationHistogram,
    /// Monte Carlo standard error of each histogram entry.
    pub std_error: Vec<Vec<f64>>,
    pub n_ry: Vec<f64>,
    pub p_ry: Vec<f64>,
    pub metadata: RunMetadata,
}

/// Running sums of histograms and their squares.
struct Moments {
    count: usize,
    sum: ExcitationHistogram,
    sum_sq: ExcitationHistogram,
}

impl Moments {
    fn new(grid: &[f64], max_count: usize) -> Self {
        Self {
            count: 0,
            sum: ExcitationHistogram::zeros(grid, max_count),
            sum_sq: ExcitationHistogram::zeros(grid, max_count),
        }
    }

    fn add(&mut self, h: &ExcitationHistogram, multiplicity: usize) {
        let w = multiplicity as f64;
        self.count += multiplicity;
        self.sum.add_scaled(h, w);
        self.sum_sq.widen(h.max_count());
        for (dst, src) in self.sum_sq.q.iter_mut().zip(&h.q) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += w * s * s;
            }
        }
    }

    /// Mean and variance of the mean.
    fn finish(&self) -> (ExcitationHistogram, Vec<Vec<f64>>) {
        let n = self.count as f64;
        let mut mean = self.sum.clone();
        let mut var = Vec::with_capacity(mean.q.len());
        for (row, sq) in mean.q.iter_mut().zip(&self.sum_sq.q) {
            let mut vrow = Vec::with_capacity(row.len());
            for (m, s2) in row.iter_mut().zip(sq) {
                *m /= n;
                let v = if self.count > 1 {
                    ((s2 - n * *m * *m) / (n - 1.0)).max(0.0) / n
                } else {
                    0.0
                };
                vrow.push(v);
            }
            var.push(vrow);
        }
        (mean, var)
    }
}

fn is_soft_failure(e: &Error) -> bool {
    matches!(e, Error::Accuracy { .. } | Error::Integration { .. })
}

fn configuration_rng(seed: u64, n_atoms: usize, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((n_atoms as u64) << 32) | index as u64);
    rng
}

/// Histogram of one configuration with excitation cap `m`.
fn propagate_configuration(
    spec: &ScenarioSpec,
    config: &SpatialConfiguration,
    m: usize,
) -> Result<ExcitationHistogram> {
    let n = config.len();
    if n == 0 {
        return Ok(ExcitationHistogram::ground(&spec.time_grid, 0));
    }
    let space = enumerate_basis(n, m.min(n))?;
    let h = build_hamiltonian(&spec.params, config, &space)?;
    evolve_with(&h, &space, &spec.time_grid, &spec.propagation()).map(|r| r.0)
}

/// Configurations allocated to each atom number.
pub fn allocate_samples(weights: &[(usize, f64)], samples: usize) -> Vec<(usize, usize)> {
    let total: f64 = weights.iter().map(|w| w.1).sum();
    weights
        .iter()
        .filter(|w| w.1 > 0.0)
        .map(|&(n, p)| {
            let share = (samples as f64 * p / total).ceil() as usize;
            let count = match n {
                // nothing random about zero or one atom
                0 | 1 => 1,
                _ if p >= FLOOR_WEIGHT => share.max(MIN_SAMPLES_PER_N),
                _ => share.max(2),
            };
            (n, count)
        })
        .collect()
}

pub fn run_scenario(spec: &ScenarioSpec, exec: Execution) -> Result<AveragedResult> {
    spec.validate()?;
    match spec.geometry {
        TrapGeometry::GaussianCloud { .. } => run_cloud(spec, exec),
        TrapGeometry::Lattice { .. } => run_lattice(spec, exec),
    }
}

fn finish_result(
    spec: &ScenarioSpec,
    histogram: ExcitationHistogram,
    variance: Vec<Vec<f64>>,
    metadata: RunMetadata,
) -> Result<AveragedResult> {
    if metadata.failed as f64 > 1e-3 * metadata.total as f64 {
        return Err(Error::TooManyFailures {
            failed: metadata.failed,
            total: metadata.total,
        });
    }
    let (n_ry, p_ry) = excitation_expectations(&histogram);
    let mut histogram = histogram;
    histogram.widen(spec.max_count());
    let mut std_error: Vec<Vec<f64>> = variance.into_iter().map(|r| r.into_iter().map(f64::sqrt).collect()).collect();
    while std_error.len() < histogram.q.len() {
        std_error.push(vec![0.0; histogram.time_grid.len()]);
    }
    Ok(AveragedResult {
        histogram,
        std_error,
        n_ry,
        p_ry,
        metadata,
    })
}

fn run_cloud(spec: &ScenarioSpec, exec: Execution) -> Result<AveragedResult> {
    let grid = &spec.time_grid;
    let weights = spec.atom_dist.weights();
    let allocation = allocate_samples(&weights, spec.samples);
    let mut avg = ExcitationHistogram::zeros(grid, spec.max_count());
    let mut var = vec![vec![0.0; grid.len()]; spec.max_count() + 1];
    let mut failed = 0;
    let mut total = 0;
    let mut samples_per_n = Vec::with_capacity(allocation.len());

    for &(n, count) in &allocation {
        let p = weights.iter().find(|w| w.0 == n).map_or(0.0, |w| w.1);
        let tasks: Vec<usize> = (0..count).collect();
        let results = map_ordered(exec, &tasks, |&idx| {
            let mut rng = configuration_rng(spec.seed, n, idx);
            let config = sample_positions(&spec.geometry, n, &mut rng)?;
            propagate_configuration(spec, &config, spec.max_excitations)
        });
        let mut moments = Moments::new(grid, spec.max_excitations.min(n));
        for r in results {
            total += 1;
            match r {
                Ok(h) => moments.add(&h, 1),
                Err(e) if is_soft_failure(&e) => failed += 1,
                Err(e) => return Err(e),
            }
        }
        samples_per_n.push((n, moments.count));
        if moments.count == 0 {
            continue;
        }
        let (mean, v) = moments.finish();
        avg.add_scaled(&mean, p);
        for (dst, src) in var.iter_mut().zip(&v) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += p * p * s;
            }
        }
    }

    let convergence = if spec.convergence_configs > 0 {
        Some(convergence_check(spec, &allocation, exec)?)
    } else {
        None
    };
    let metadata = RunMetadata {
        seed: spec.seed,
        samples: spec.samples,
        samples_per_n,
        tail_mass: spec.atom_dist.tail_mass(),
        max_excitations: spec.max_excitations,
        energy_cutoff_factor: spec.energy_cutoff_factor,
        failed,
        total,
        convergence,
    };
    finish_result(spec, avg, var, metadata)
}

fn run_lattice(spec: &ScenarioSpec, exec: Execution) -> Result<AveragedResult> {
    let grid = &spec.time_grid;
    let sites = spec.geometry.site_count().unwrap_or(0);
    // Phase one: occupancy patterns, drawn sequentially from one stream.
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(OCCUPANCY_STREAM);
    let mut patterns: BTreeMap<u32, usize> = BTreeMap::new();
    for _ in 0..spec.samples {
        let k = sample_atom_number(&spec.atom_dist, &mut rng);
        let chosen = rand::seq::index::sample(&mut rng, sites, k);
        let mask = chosen.iter().fold(0u32, |m, i| m | 1 << i);
        *patterns.entry(mask).or_insert(0) += 1;
    }
    // Phase two: one propagation per distinct pattern.
    let unique: Vec<(u32, usize)> = patterns.into_iter().collect();
    let TrapGeometry::Lattice { sites: coords } = &spec.geometry else {
        unreachable!("checked by caller")
    };
    let results = map_ordered(exec, &unique, |&(mask, _)| {
        let positions = (0..sites).filter(|i| mask >> i & 1 == 1).map(|i| coords[i]).collect();
        propagate_configuration(spec, &SpatialConfiguration { positions }, spec.max_excitations)
    });
    let mut moments = Moments::new(grid, spec.max_count());
    let mut failed = 0;
    let mut by_occupancy: BTreeMap<usize, usize> = BTreeMap::new();
    for (r, &(mask, count)) in results.into_iter().zip(&unique) {
        match r {
            Ok(h) => {
                moments.add(&h, count);
                *by_occupancy.entry(mask.count_ones() as usize).or_insert(0) += count;
            }
            Err(e) if is_soft_failure(&e) => failed += count,
            Err(e) => return Err(e),
        }
    }
    let (avg, var) = if moments.count > 0 {
        moments.finish()
    } else {
        (ExcitationHistogram::zeros(grid, spec.max_count()), vec![vec![0.0; grid.len()]; spec.max_count() + 1])
    };
    let metadata = RunMetadata {
        seed: spec.seed,
        samples: spec.samples,
        samples_per_n: by_occupancy.into_iter().collect(),
        tail_mass: 0.0,
        max_excitations: spec.max_excitations,
        energy_cutoff_factor: spec.energy_cutoff_factor,
        failed,
        total: spec.samples,
        convergence: None,
    };
    finish_result(spec, avg, var, metadata)
}

/// Reruns configurations with `m + 1` and compares `q[0..m-1]`. Atom numbers
/// whose enlarged basis stays below a fixed size are visited round-robin,
/// reusing the configurations of the main run.
fn convergence_check(
    spec: &ScenarioSpec,
    allocation: &[(usize, usize)],
    exec: Execution,
) -> Result<ConvergenceReport> {
    let m = spec.max_excitations;
    let eligible: Vec<(usize, usize)> = allocation
        .iter()
        .copied()
        .filter(|&(n, _)| n > m && truncated_dimension(n, m + 1) <= CONVERGENCE_MAX_DIM)
        .collect();
    let mut tasks = Vec::new();
    let mut round = 0;
    while tasks.len() < spec.convergence_configs {
        let before = tasks.len();
        for &(n, count) in &eligible {
            if round < count && tasks.len() < spec.convergence_configs {
                tasks.push((n, round));
            }
        }
        if tasks.len() == before {
            break;
        }
        round += 1;
    }
    let deviations = map_ordered(exec, &tasks, |&(n, idx)| -> Result<f64> {
        let mut rng = configuration_rng(spec.seed, n, idx);
        let config = sample_positions(&spec.geometry, n, &mut rng)?;
        let a = propagate_configuration(spec, &config, m)?;
        let b = propagate_configuration(spec, &config, m + 1)?;
        let mut worst = 0.0f64;
        for k in 0..m {
            for (x, y) in a.q[k].iter().zip(&b.q[k]) {
                worst = worst.max((x - y).abs());
            }
        }
        Ok(worst)
    });
    let mut worst = 0.0f64;
    for d in deviations {
        worst = worst.max(d?);
    }
    Ok(ConvergenceReport {
        configurations: tasks.len(),
        max_excitations: m,
        worst_deviation: worst,
        passed: worst <= CONVERGENCE_TOLERANCE,
    })
}

/// Excitation cap used for a Gaussian cloud of radius `r` um.
pub fn default_max_excitations(r: f64) -> usize {
    if r < 2.5 {
        2
    } else {
        3
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusSweep {
    pub radii: Vec<f64>,
    pub time_grid: Vec<f64>,
    /// `p_ry[radius_idx][t_idx]`.
    pub p_ry: Vec<Vec<f64>>,
    pub results: Vec<AveragedResult>,
}

pub fn radius_sweep(base: &ScenarioSpec, radii: &[f64], exec: Execution) -> Result<RadiusSweep> {
    radius_sweep_with(base, radii, |_| base.max_excitations, exec)
}

/// Sweep with a radius-dependent excitation cap.
pub fn radius_sweep_with(
    base: &ScenarioSpec,
    radii: &[f64],
    truncation: impl Fn(f64) -> usize,
    exec: Execution,
) -> Result<RadiusSweep> {
    if radii.is_empty() || radii.windows(2).any(|w| !(w[1] > w[0])) || !(radii[0] > 0.0) {
        return Err(invalid("radii must be positive and strictly ascending"));
    }
    let mut results = Vec::with_capacity(radii.len());
    for &r in radii {
        let spec = ScenarioSpec {
            geometry: TrapGeometry::gaussian(r)?,
            max_excitations: truncation(r),
            ..base.clone()
        };
        results.push(run_scenario(&spec, exec)?);
    }
    Ok(RadiusSweep {
        radii: radii.to_vec(),
        time_grid: base.time_grid.clone(),
        p_ry: results.iter().map(|r| r.p_ry.clone()).collect(),
        results,
    })
}

pub fn default_spec(sigma: f64, atom_dist: AtomNumberDist, params: PhysicalParams, time_grid: Vec<f64>) -> Result<ScenarioSpec> {
    Ok(ScenarioSpec {
        geometry: TrapGeometry::gaussian(sigma)?,
        atom_dist,
        params,
        time_grid,
        max_excitations: default_max_excitations(sigma),
        samples: 2000,
        seed: 0,
        energy_cutoff_factor: DEFAULT_ENERGY_CUTOFF_FACTOR,
        convergence_configs: 0,
    })
}
