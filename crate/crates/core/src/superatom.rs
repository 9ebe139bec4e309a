//! Two interacting blockaded ensembles treated as a pair of superatoms.
//!
//! Each ensemble is a two-level system `{G, R}` with collective Rabi frequency
//! `sqrt(N) Omega`; the doubly excited state `RR` is shifted by the mean
//! inter-ensemble interaction `K`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{distance, excitation_expectations, ExcitationHistogram, PhysicalParams, SpatialConfiguration};
use crate::ensemble::{sample_atom_number, sample_positions, TrapGeometry};
use crate::error::{invalid, Error, Result};
use crate::jc_reference::{AtomNumberDist, PoissonDist};
use crate::ode::{integrate, OdeOptions};
use crate::parallel::{map_ordered, Execution};

pub const NORM_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperatomPair {
    pub n1: usize,
    pub n2: usize,
    /// Mean interaction between the ensembles, rad/us.
    pub k12: f64,
    pub rabi: f64,
}

impl SuperatomPair {
    pub fn new(n1: usize, n2: usize, k12: f64, rabi: f64) -> Result<Self> {
        if !(k12 >= 0.0) || !(rabi >= 0.0) {
            return Err(invalid("coupling and Rabi frequency must be non-negative"));
        }
        Ok(Self { n1, n2, k12, rabi })
    }
}

/// Amplitudes in the order `GG, GR, RG, RR`; the first letter is ensemble 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairAmplitudes {
    pub c_gg: Complex64,
    pub c_gr: Complex64,
    pub c_rg: Complex64,
    pub c_rr: Complex64,
}

impl PairAmplitudes {
    pub fn norm_sqr(&self) -> f64 {
        self.c_gg.norm_sqr() + self.c_gr.norm_sqr() + self.c_rg.norm_sqr() + self.c_rr.norm_sqr()
    }
}

/// `K = (1 / (N1 N2)) sum_{p in 1, q in 2} C6 / R_pq^6`.
pub fn mean_coupling(
    config1: &SpatialConfiguration,
    config2: &SpatialConfiguration,
    params: &PhysicalParams,
) -> Result<f64> {
    if config1.is_empty() || config2.is_empty() {
        return Err(invalid("mean coupling needs two non-empty ensembles"));
    }
    let mut sum = 0.0;
    for p in &config1.positions {
        for q in &config2.positions {
            sum += crate::dynamics::vdw_pair_energy(params, distance(p, q))?;
        }
    }
    Ok(sum / (config1.len() * config2.len()) as f64)
}

/// Point-like ensembles a distance `d` apart.
pub fn point_coupling(params: &PhysicalParams, d: f64) -> Result<f64> {
    crate::dynamics::vdw_pair_energy(params, d)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairTrajectory {
    pub p_gg: Vec<f64>,
    pub p_gr: Vec<f64>,
    pub p_rg: Vec<f64>,
    pub p_rr: Vec<f64>,
    pub n_ry: Vec<f64>,
}

impl PairTrajectory {
    fn from_amplitudes(amps: &[PairAmplitudes]) -> Self {
        let mut t = Self {
            p_gg: Vec::with_capacity(amps.len()),
            p_gr: Vec::with_capacity(amps.len()),
            p_rg: Vec::with_capacity(amps.len()),
            p_rr: Vec::with_capacity(amps.len()),
            n_ry: Vec::with_capacity(amps.len()),
        };
        for a in amps {
            let (gr, rg, rr) = (a.c_gr.norm_sqr(), a.c_rg.norm_sqr(), a.c_rr.norm_sqr());
            t.p_gg.push(a.c_gg.norm_sqr());
            t.p_gr.push(gr);
            t.p_rg.push(rg);
            t.p_rr.push(rr);
            t.n_ry.push(gr + rg + 2.0 * rr);
        }
        t
    }
}

pub fn pair_options() -> OdeOptions {
    OdeOptions {
        rtol: 1e-10,
        atol: 1e-12,
        ..OdeOptions::default()
    }
}

/// Amplitudes on `time_grid`, starting from `GG`.
pub fn evolve_pair_amplitudes(pair: &SuperatomPair, time_grid: &[f64]) -> Result<Vec<PairAmplitudes>> {
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let a1 = pair.rabi * (pair.n1 as f64).sqrt() / 2.0;
    let a2 = pair.rabi * (pair.n2 as f64).sqrt() / 2.0;
    let amps: Vec<PairAmplitudes> = if pair.n1 == 0 || pair.n2 == 0 {
        // One superatom (or none): closed-form Rabi cycle.
        let (a, first) = if pair.n1 == 0 { (a2, false) } else { (a1, true) };
        time_grid
            .iter()
            .map(|&t| {
                let g = Complex64::new((a * t).cos(), 0.0);
                let r = Complex64::new(0.0, -(a * t).sin());
                let (c_gr, c_rg) = if first { (zero, r) } else { (r, zero) };
                PairAmplitudes {
                    c_gg: g,
                    c_gr,
                    c_rg,
                    c_rr: zero,
                }
            })
            .collect()
    } else {
        let k = pair.k12;
        let minus_i = Complex64::new(0.0, -1.0);
        let (states, _) = integrate(
            |_, c, dc| {
                dc[0] = minus_i * (c[2] * a1 + c[1] * a2);
                dc[1] = minus_i * (c[0] * a2 + c[3] * a1);
                dc[2] = minus_i * (c[0] * a1 + c[3] * a2);
                dc[3] = minus_i * (c[1] * a1 + c[2] * a2 + c[3] * k);
            },
            &[one, zero, zero, zero],
            time_grid,
            &pair_options(),
        )?;
        states
            .into_iter()
            .map(|c| PairAmplitudes {
                c_gg: c[0],
                c_gr: c[1],
                c_rg: c[2],
                c_rr: c[3],
            })
            .collect()
    };
    for (a, &t) in amps.iter().zip(time_grid) {
        let dev = (a.norm_sqr() - 1.0).abs();
        if dev > NORM_TOLERANCE {
            return Err(Error::Accuracy { worst: dev, time: t });
        }
    }
    Ok(amps)
}

pub fn evolve_pair(pair: &SuperatomPair, time_grid: &[f64]) -> Result<PairTrajectory> {
    Ok(PairTrajectory::from_amplitudes(&evolve_pair_amplitudes(pair, time_grid)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingSource {
    /// `C6 / d^6` for point-like ensembles.
    Point,
    /// Mean over sampled atom positions.
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoEnsembleSpec {
    pub atom_dist: PoissonDist,
    /// Separation of the trap centres, um.
    pub distance: f64,
    /// Gaussian radius of each trap, used only for sampled coupling, um.
    pub trap_sigma: f64,
    pub params: PhysicalParams,
    pub time_grid: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    pub coupling: CouplingSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoEnsembleResult {
    pub n_ry: Vec<f64>,
    /// Standard error of the sample mean of `n_ry`.
    pub std_error: Vec<f64>,
    /// Probabilities of 0, 1 and 2 excited superatoms.
    pub histogram: ExcitationHistogram,
    pub samples: usize,
    pub distinct_pairs: usize,
    pub tail_mass: f64,
}

fn sample_rng(seed: u64, idx: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(idx as u64);
    rng
}

fn trajectory_histogram(t: &PairTrajectory) -> [&[f64]; 3] {
    [&t.p_gg, &t.p_gr, &t.p_rr]
}

pub fn two_ensemble_scenario(spec: &TwoEnsembleSpec, exec: Execution) -> Result<TwoEnsembleResult> {
    if !(spec.distance > 0.0) {
        return Err(invalid(format!("distance must be positive, got {}", spec.distance)));
    }
    if spec.samples < 1 {
        return Err(invalid("samples must be at least 1"));
    }
    let dist = AtomNumberDist::Poisson(spec.atom_dist);
    let grid = &spec.time_grid;
    let rabi = spec.params.rabi;

    // Per-sample inputs are drawn sequentially; only propagation is parallel.
    let mut draws = Vec::with_capacity(spec.samples);
    for idx in 0..spec.samples {
        let mut rng = sample_rng(spec.seed, idx);
        let n1 = sample_atom_number(&dist, &mut rng);
        let n2 = sample_atom_number(&dist, &mut rng);
        let k = match spec.coupling {
            CouplingSource::Point => point_coupling(&spec.params, spec.distance)?,
            CouplingSource::Sampled if n1 > 0 && n2 > 0 => {
                let cloud = TrapGeometry::gaussian(spec.trap_sigma)?;
                let c1 = sample_positions(&cloud, n1, &mut rng)?;
                let mut c2 = sample_positions(&cloud, n2, &mut rng)?;
                c2.positions.iter_mut().for_each(|p| p[0] += spec.distance);
                mean_coupling(&c1, &c2, &spec.params)?
            }
            CouplingSource::Sampled => 0.0,
        };
        draws.push(SuperatomPair::new(n1, n2, k, rabi)?);
    }

    // Identical inputs give identical trajectories; propagate each once.
    let mut unique: BTreeMap<(usize, usize, u64), usize> = BTreeMap::new();
    for p in &draws {
        let next = unique.len();
        unique.entry((p.n1, p.n2, p.k12.to_bits())).or_insert(next);
    }
    let mut keys: Vec<((usize, usize, u64), usize)> = unique.into_iter().collect();
    keys.sort_by_key(|e| e.1);
    let pairs: Vec<SuperatomPair> = keys
        .iter()
        .map(|&((n1, n2, k), _)| SuperatomPair {
            n1,
            n2,
            k12: f64::from_bits(k),
            rabi,
        })
        .collect();
    let lookup: BTreeMap<(usize, usize, u64), usize> = keys.iter().map(|&(k, i)| (k, i)).collect();
    let trajectories = map_ordered(exec, &pairs, |p| evolve_pair(p, grid));
    let trajectories: Vec<PairTrajectory> = trajectories.into_iter().collect::<Result<_>>()?;

    let nt = grid.len();
    let s = spec.samples as f64;
    let mut sum = vec![0.0; nt];
    let mut sum_sq = vec![0.0; nt];
    let mut histogram = ExcitationHistogram::zeros(grid, 2);
    for p in &draws {
        let tr = &trajectories[lookup[&(p.n1, p.n2, p.k12.to_bits())]];
        for j in 0..nt {
            sum[j] += tr.n_ry[j];
            sum_sq[j] += tr.n_ry[j] * tr.n_ry[j];
        }
        let [gg, gr, rr] = trajectory_histogram(tr);
        for j in 0..nt {
            histogram.q[0][j] += gg[j];
            histogram.q[1][j] += gr[j] + tr.p_rg[j];
            histogram.q[2][j] += rr[j];
        }
    }
    histogram.q.iter_mut().flatten().for_each(|v| *v /= s);
    let n_ry: Vec<f64> = sum.iter().map(|v| v / s).collect();
    let std_error = n_ry
        .iter()
        .zip(&sum_sq)
        .map(|(m, sq)| {
            if spec.samples > 1 {
                (((sq - s * m * m) / (s - 1.0)).max(0.0) / s).sqrt()
            } else {
                0.0
            }
        })
        .collect();
    debug_assert!({
        let (nr, _) = excitation_expectations(&histogram);
        nr.iter().zip(&n_ry).all(|(a, b)| (a - b).abs() < 1e-9)
    });
    Ok(TwoEnsembleResult {
        n_ry,
        std_error,
        histogram,
        samples: spec.samples,
        distinct_pairs: pairs.len(),
        tail_mass: spec.atom_dist.tail_mass(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceSweep {
    pub distances: Vec<f64>,
    pub time_grid: Vec<f64>,
    /// `n_ry[distance_idx][t_idx]`.
    pub n_ry: Vec<Vec<f64>>,
    pub results: Vec<TwoEnsembleResult>,
}

pub fn distance_sweep(base: &TwoEnsembleSpec, distances: &[f64], exec: Execution) -> Result<DistanceSweep> {
    if distances.is_empty() || distances.windows(2).any(|w| !(w[1] > w[0])) || !(distances[0] > 0.0) {
        return Err(invalid("distances must be positive and strictly ascending"));
    }
    let mut results = Vec::with_capacity(distances.len());
    for &d in distances {
        let spec = TwoEnsembleSpec {
            distance: d,
            ..base.clone()
        };
        results.push(two_ensemble_scenario(&spec, exec)?);
    }
    Ok(DistanceSweep {
        distances: distances.to_vec(),
        time_grid: base.time_grid.clone(),
        n_ry: results.iter().map(|r| r.n_ry.clone()).collect(),
        results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{mhz_to_angular, uniform_grid};

    fn om() -> f64 {
        mhz_to_angular(1.0)
    }

    #[test]
    fn decoupled_pair() {
        let grid = uniform_grid(5.0, 51);
        let r = evolve_pair(&SuperatomPair::new(6, 6, 0.0, om()).unwrap(), &grid).unwrap();
        for (v, t) in r.n_ry.iter().zip(&grid) {
            assert!((v - 2.0 * (6f64.sqrt() * om() * t / 2.0).sin().powi(2)).abs() < 1e-8);
        }
    }

    #[test]
    fn empty_partner() {
        let grid = uniform_grid(5.0, 51);
        for (n1, n2) in [(7, 0), (0, 7)] {
            let r = evolve_pair(&SuperatomPair::new(n1, n2, 5.0, om()).unwrap(), &grid).unwrap();
            for (v, t) in r.n_ry.iter().zip(&grid) {
                assert!((v - (7f64.sqrt() * om() * t / 2.0).sin().powi(2)).abs() < 1e-12);
            }
        }
        let none = evolve_pair(&SuperatomPair::new(0, 0, 0.0, om()).unwrap(), &grid).unwrap();
        assert!(none.n_ry.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn strong_coupling_is_one_superatom() {
        let grid = uniform_grid(3.0, 31);
        let k = 1e3 * om() * 20f64.sqrt();
        let r = evolve_pair(&SuperatomPair::new(10, 10, k, om()).unwrap(), &grid).unwrap();
        for (v, t) in r.n_ry.iter().zip(&grid) {
            assert!((v - (20f64.sqrt() * om() * t / 2.0).sin().powi(2)).abs() < 5e-3);
        }
    }

    #[test]
    fn swap_symmetry() {
        let grid = uniform_grid(6.0, 61);
        let a = evolve_pair(&SuperatomPair::new(3, 11, 4.0, om()).unwrap(), &grid).unwrap();
        let b = evolve_pair(&SuperatomPair::new(11, 3, 4.0, om()).unwrap(), &grid).unwrap();
        for (x, y) in a.n_ry.iter().zip(&b.n_ry) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn coupling_sums() {
        let p = PhysicalParams::new(om(), mhz_to_angular(3.2e6)).unwrap();
        let one = |x: f64| SpatialConfiguration::new(vec![[x, 0.0, 0.0]]).unwrap();
        let k = mean_coupling(&one(0.0), &one(9.0), &p).unwrap();
        assert!((k - p.c6 / 9f64.powi(6)).abs() < 1e-12 * k);
        let a = SpatialConfiguration::new(vec![[0.0, 0.0, 0.0], [0.5, 0.2, 0.0], [-0.3, 0.1, 0.4]]).unwrap();
        let b = SpatialConfiguration::new(vec![[10.0, 0.0, 0.0], [10.2, -0.4, 0.3], [9.7, 0.0, -0.2]]).unwrap();
        let mut direct = 0.0;
        for x in &a.positions {
            for y in &b.positions {
                direct += p.c6 / distance(x, y).powi(6);
            }
        }
        assert!((mean_coupling(&a, &b, &p).unwrap() - direct / 9.0).abs() < 1e-12 * direct);
        assert!(mean_coupling(&one(1.0), &one(1.0), &p).is_err());
    }

    #[test]
    fn scenario_determinism_and_caching() {
        let spec = TwoEnsembleSpec {
            atom_dist: PoissonDist::new(10.0, 30).unwrap(),
            distance: 12.0,
            trap_sigma: 1.0,
            params: PhysicalParams::new(om(), mhz_to_angular(3.2e6)).unwrap(),
            time_grid: uniform_grid(4.0, 41),
            samples: 200,
            seed: 5,
            coupling: CouplingSource::Point,
        };
        let a = two_ensemble_scenario(&spec, Execution::Sequential).unwrap();
        let b = two_ensemble_scenario(&spec, Execution::Parallel { workers: 2 }).unwrap();
        assert_eq!(a, b);
        assert!(a.distinct_pairs < 200);
        let sampled = TwoEnsembleSpec {
            coupling: CouplingSource::Sampled,
            samples: 20,
            ..spec
        };
        let c = two_ensemble_scenario(&sampled, Execution::Sequential).unwrap();
        assert!(c.n_ry.iter().all(|v| (0.0..=2.0).contains(v)));
    }
}
