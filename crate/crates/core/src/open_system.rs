//! Master-equation dynamics of a perfectly blockaded ensemble.
//!
//! Basis `{G, r_1, ..., r_N}`: the collective ground state and the N states
//! with one atom excited. The drive couples `G` to every `r_i` with `Omega/2`.
//! Radiative decay returns `r_i` to `G` at rate `gamma2`; laser dephasing
//! (`sigma_ee` per atom) damps a `G`-`r_i` coherence at rate `gamma` and an
//! `r_i`-`r_j` coherence at `2 gamma`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::jc_reference::AtomNumberDist;
use crate::ode::{integrate, OdeOptions};
use crate::parallel::{map_ordered, Execution};

pub const TRACE_TOLERANCE: f64 = 1e-8;
pub const HERMITICITY_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayParams {
    /// Population decay to the ground state, rad/us.
    pub gamma2: f64,
    /// Pure dephasing, rad/us.
    pub gamma: f64,
}

impl DecayParams {
    pub fn new(gamma2: f64, gamma: f64) -> Result<Self> {
        if !(gamma2 >= 0.0) || !(gamma >= 0.0) {
            return Err(invalid("decay rates must be non-negative"));
        }
        Ok(Self { gamma2, gamma })
    }
}

/// Column-stacked `(N+1) x (N+1)` density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CollectiveDensityMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl CollectiveDensityMatrix {
    pub fn ground(n_atoms: usize) -> Self {
        let dim = n_atoms + 1;
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        data[0] = Complex64::new(1.0, 0.0);
        Self { dim, data }
    }

    /// `|psi><psi|` for amplitudes over `{G, r_1..r_N}`.
    pub fn pure(psi: &[Complex64]) -> Self {
        let dim = psi.len();
        let mut data = vec![Complex64::new(0.0, 0.0); dim * dim];
        for b in 0..dim {
            for a in 0..dim {
                data[a + b * dim] = psi[a] * psi[b].conj();
            }
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, a: usize, b: usize) -> Complex64 {
        self.data[a + b * self.dim]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|a| self.get(a, a)).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for a in 0..self.dim {
            for b in a..self.dim {
                worst = worst.max((self.get(a, b) - self.get(b, a).conj()).norm());
            }
        }
        worst
    }

    pub fn min_diagonal(&self) -> f64 {
        (0..self.dim).map(|a| self.get(a, a).re).fold(f64::INFINITY, f64::min)
    }

    /// `1 - rho_GG`.
    pub fn excited_population(&self) -> f64 {
        1.0 - self.get(0, 0).re
    }
}

/// `d rho / dt` for the blockaded ensemble.
fn lindblad_rhs(dim: usize, h: f64, decay: &DecayParams, rho: &[Complex64], out: &mut [Complex64]) {
    let at = |a: usize, b: usize| rho[a + b * dim];
    let minus_i = Complex64::new(0.0, -1.0);
    // sum_i rho_{i b} over excited rows, and sum_i rho_{a i} over excited columns
    let mut col_sums = vec![Complex64::new(0.0, 0.0); dim];
    let mut row_sums = vec![Complex64::new(0.0, 0.0); dim];
    for b in 0..dim {
        for a in 1..dim {
            col_sums[b] += at(a, b);
            row_sums[b] += at(b, a);
        }
    }
    let excited_pop: f64 = (1..dim).map(|i| at(i, i).re).sum();
    for b in 0..dim {
        for a in 0..dim {
            let h_rho = if a == 0 { col_sums[b] } else { at(0, b) } * h;
            let rho_h = if b == 0 { row_sums[a] } else { at(a, 0) } * h;
            let mut d = minus_i * (h_rho - rho_h);
            let excited_legs = (a >= 1) as u8 + (b >= 1) as u8;
            d -= at(a, b) * (0.5 * decay.gamma2 * excited_legs as f64);
            if a != b {
                d -= at(a, b) * (decay.gamma * excited_legs as f64);
            }
            if a == 0 && b == 0 {
                d += Complex64::new(decay.gamma2 * excited_pop, 0.0);
            }
            out[a + b * dim] = d;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MasterEvolution {
    pub p_e: Vec<f64>,
    pub worst_trace_error: f64,
    pub worst_hermiticity_error: f64,
    pub min_diagonal: f64,
}

pub fn master_options() -> OdeOptions {
    OdeOptions {
        rtol: 1e-10,
        atol: 1e-12,
        ..OdeOptions::default()
    }
}

/// Evolves `initial` and returns every output state.
pub fn evolve_density(
    initial: &CollectiveDensityMatrix,
    rabi: f64,
    decay: &DecayParams,
    time_grid: &[f64],
) -> Result<Vec<CollectiveDensityMatrix>> {
    if !(rabi >= 0.0) {
        return Err(invalid("Rabi frequency must be non-negative"));
    }
    let dim = initial.dim;
    let h = rabi / 2.0;
    let (states, _) = integrate(
        |_, y, dy| lindblad_rhs(dim, h, decay, y, dy),
        &initial.data,
        time_grid,
        &master_options(),
    )?;
    Ok(states
        .into_iter()
        .map(|data| CollectiveDensityMatrix { dim, data })
        .collect())
}

/// Excited population of an `N`-atom ensemble starting in `|G><G|`.
pub fn evolve_master(n_atoms: usize, rabi: f64, decay: &DecayParams, time_grid: &[f64]) -> Result<MasterEvolution> {
    if n_atoms < 1 {
        return Err(invalid("master equation needs at least one atom"));
    }
    let states = evolve_density(&CollectiveDensityMatrix::ground(n_atoms), rabi, decay, time_grid)?;
    let mut out = MasterEvolution {
        p_e: Vec::with_capacity(states.len()),
        worst_trace_error: 0.0,
        worst_hermiticity_error: 0.0,
        min_diagonal: f64::INFINITY,
    };
    for (rho, &t) in states.iter().zip(time_grid) {
        let tr = (rho.trace() - 1.0).norm();
        if tr > TRACE_TOLERANCE {
            return Err(Error::Accuracy { worst: tr, time: t });
        }
        out.worst_trace_error = out.worst_trace_error.max(tr);
        out.worst_hermiticity_error = out.worst_hermiticity_error.max(rho.hermiticity_error());
        out.min_diagonal = out.min_diagonal.min(rho.min_diagonal());
        out.p_e.push(rho.excited_population());
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragedMaster {
    pub p_ry: Vec<f64>,
    pub worst_trace_error: f64,
    pub worst_hermiticity_error: f64,
    pub min_diagonal: f64,
    pub tail_mass: f64,
}

/// Weighted sum of `P_e` over the atom-number distribution; the empty
/// ensemble contributes nothing.
pub fn averaged_master_scenario(
    atom_dist: &AtomNumberDist,
    rabi: f64,
    decay: &DecayParams,
    time_grid: &[f64],
    exec: Execution,
) -> Result<AveragedMaster> {
    let weights: Vec<(usize, f64)> = atom_dist.weights().into_iter().filter(|w| w.0 > 0).collect();
    let runs = map_ordered(exec, &weights, |&(n, _)| evolve_master(n, rabi, decay, time_grid));
    let mut out = AveragedMaster {
        p_ry: vec![0.0; time_grid.len()],
        worst_trace_error: 0.0,
        worst_hermiticity_error: 0.0,
        min_diagonal: f64::INFINITY,
        tail_mass: atom_dist.tail_mass(),
    };
    for (run, &(_, p)) in runs.into_iter().zip(&weights) {
        let run = run?;
        for (acc, v) in out.p_ry.iter_mut().zip(&run.p_e) {
            *acc += p * v;
        }
        out.worst_trace_error = out.worst_trace_error.max(run.worst_trace_error);
        out.worst_hermiticity_error = out.worst_hermiticity_error.max(run.worst_hermiticity_error);
        out.min_diagonal = out.min_diagonal.min(run.min_diagonal);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jc_reference::{collective_p1, DriveParams, PoissonDist};
    use crate::units::{khz_to_angular, mhz_to_angular, uniform_grid};

    #[test]
    fn closed_system_is_collective_rabi() {
        let om = mhz_to_angular(1.0);
        let grid = uniform_grid(10.0, 101);
        let r = evolve_master(5, om, &DecayParams::new(0.0, 0.0).unwrap(), &grid).unwrap();
        for (p, t) in r.p_e.iter().zip(&grid) {
            assert!((p - (5f64.sqrt() * om * t / 2.0).sin().powi(2)).abs() < 1e-6);
        }
        assert!(r.worst_trace_error < 1e-8);
        assert!(r.worst_hermiticity_error < 1e-10);
    }

    #[test]
    fn free_decay_of_symmetric_state() {
        let n = 4;
        let g2 = 0.7;
        let amp = Complex64::new(1.0 / (n as f64).sqrt(), 0.0);
        let mut psi = vec![amp; n + 1];
        psi[0] = Complex64::new(0.0, 0.0);
        let grid = uniform_grid(3.0, 31);
        let states = evolve_density(
            &CollectiveDensityMatrix::pure(&psi),
            0.0,
            &DecayParams::new(g2, 0.0).unwrap(),
            &grid,
        )
        .unwrap();
        for (rho, t) in states.iter().zip(&grid) {
            assert!((rho.excited_population() - (-g2 * t).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn coherence_decays_at_gamma() {
        let gamma = 1.3;
        let h = Complex64::new(0.5f64.sqrt(), 0.0);
        let psi = [h, h, Complex64::new(0.0, 0.0)];
        let grid = uniform_grid(2.0, 21);
        let states = evolve_density(
            &CollectiveDensityMatrix::pure(&psi),
            0.0,
            &DecayParams::new(0.0, gamma).unwrap(),
            &grid,
        )
        .unwrap();
        for (rho, t) in states.iter().zip(&grid) {
            assert!((rho.get(0, 1).re - 0.5 * (-gamma * t).exp()).abs() < 1e-8);
            assert!((rho.get(1, 1).re - 0.5).abs() < 1e-10);
        }
    }

    #[test]
    fn closed_average_matches_reference() {
        let om = mhz_to_angular(1.0);
        let pois = PoissonDist::new(7.0, 20).unwrap();
        let grid = uniform_grid(10.0, 51);
        let avg = averaged_master_scenario(
            &AtomNumberDist::Poisson(pois),
            om,
            &DecayParams::new(0.0, 0.0).unwrap(),
            &grid,
            Execution::Sequential,
        )
        .unwrap();
        let drive = DriveParams::from_rabi(om).unwrap();
        for (p, &t) in avg.p_ry.iter().zip(&grid) {
            let expect = collective_p1(&drive, &AtomNumberDist::Poisson(pois), t).unwrap();
            assert!((p - expect).abs() < 1e-6);
        }
    }

    #[test]
    fn strong_dephasing_saturates_monotonically() {
        let om = mhz_to_angular(1.0);
        let n = 3;
        let gamma = 100.0 * om * (n as f64).sqrt();
        let grid = uniform_grid(2.0, 41);
        let r = evolve_master(n, om, &DecayParams::new(khz_to_angular(0.8), gamma).unwrap(), &grid).unwrap();
        assert!(r.p_e.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert!(r.min_diagonal > -1e-10);
    }

    #[test]
    fn rejects_empty_ensemble() {
        assert!(evolve_master(0, 1.0, &DecayParams::new(0.0, 0.0).unwrap(), &[0.0, 1.0]).is_err());
        assert!(DecayParams::new(-1.0, 0.0).is_err());
    }
}
