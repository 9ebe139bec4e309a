//! Many-body Hamiltonian of a driven van der Waals ensemble and its exact
//! propagation on the truncated bitmask basis.
//!
//! The Hamiltonian is real symmetric and time-independent, so the amplitudes
//! are propagated through one dense eigendecomposition per configuration:
//! `c(t) = V exp(-i L t) V^T e_G`. States whose interaction energy exceeds a
//! cutoff are removed first; they are populated only at order `(Omega/V)^2`
//! and would otherwise dominate the spectrum.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ode::{self, OdeOptions};
use crate::statespace::{excitation_count, StateSpace};

/// Pairs closer than this are treated as coincident.
pub const DISTANCE_FLOOR_UM: f64 = 1e-9;
pub const DEFAULT_ENERGY_CUTOFF_FACTOR: f64 = 1e4;
pub const NORM_TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Single-atom Rabi frequency, rad/us.
    pub rabi: f64,
    /// Van der Waals coefficient, rad um^6 / us.
    pub c6: f64,
}

impl PhysicalParams {
    /// `c6 = 0` is accepted and gives independent atoms.
    pub fn new(rabi: f64, c6: f64) -> Result<Self> {
        if !(rabi >= 0.0) || !rabi.is_finite() {
            return Err(invalid(format!("Rabi frequency must be non-negative, got {rabi}")));
        }
        if !(c6 >= 0.0) || !c6.is_finite() {
            return Err(invalid(format!("C6 must be non-negative, got {c6}")));
        }
        Ok(Self { rabi, c6 })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpatialConfiguration {
    pub positions: Vec<[f64; 3]>,
}

impl SpatialConfiguration {
    pub fn new(positions: Vec<[f64; 3]>) -> Result<Self> {
        if positions.iter().flatten().any(|c| !c.is_finite()) {
            return Err(invalid("atom coordinates must be finite"));
        }
        Ok(Self { positions })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        distance(&self.positions[i], &self.positions[j])
    }
}

pub fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

pub fn vdw_pair_energy(params: &PhysicalParams, distance: f64) -> Result<f64> {
    if !(distance > DISTANCE_FLOOR_UM) {
        return Err(Error::Singular { distance });
    }
    Ok(params.c6 / distance.powi(6))
}

/// Distance at which the pair shift equals the collective Rabi frequency.
pub fn blockade_radius(params: &PhysicalParams, n_atoms: usize) -> Result<f64> {
    if n_atoms < 1 {
        return Err(invalid("blockade radius needs at least one atom"));
    }
    if !(params.rabi > 0.0) {
        return Err(invalid("blockade radius needs a non-zero Rabi frequency"));
    }
    Ok((params.c6 / (params.rabi * (n_atoms as f64).sqrt())).powf(1.0 / 6.0))
}

/// Sparse real symmetric Hamiltonian on a truncated basis.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianMatrix {
    /// Interaction energy of each basis state; `inf` for coincident atoms.
    pub diagonal: Vec<f64>,
    /// Upper-triangle `(row, col)` entries, each equal to `coupling`.
    pub edges: Vec<(usize, usize)>,
    /// Drive matrix element, `Omega / 2`.
    pub coupling: f64,
}

impl HamiltonianMatrix {
    pub fn dimension(&self) -> usize {
        self.diagonal.len()
    }

    /// `out = H x`.
    pub fn apply(&self, x: &[Complex64], out: &mut [Complex64]) {
        for ((o, d), xi) in out.iter_mut().zip(&self.diagonal).zip(x) {
            *o = xi * *d;
        }
        for &(a, b) in &self.edges {
            out[a] += x[b] * self.coupling;
            out[b] += x[a] * self.coupling;
        }
    }

    pub fn negated(&self) -> Self {
        Self {
            diagonal: self.diagonal.iter().map(|d| -d).collect(),
            edges: self.edges.clone(),
            coupling: -self.coupling,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dimension();
        let mut m = DMatrix::from_diagonal(&DVector::from_column_slice(&self.diagonal));
        for &(a, b) in &self.edges {
            m[(a, b)] = self.coupling;
            m[(b, a)] = self.coupling;
        }
        debug_assert_eq!(m.nrows(), n);
        m
    }

    /// Removes basis states with `diagonal > e_cut`, keeping the relative order.
    /// Returns the pruned matrix and the original index of each kept state.
    pub fn prune(&self, e_cut: f64) -> (Self, Vec<usize>) {
        let kept: Vec<usize> = (0..self.dimension()).filter(|&i| self.diagonal[i] <= e_cut).collect();
        let mut new_index = vec![usize::MAX; self.dimension()];
        for (k, &i) in kept.iter().enumerate() {
            new_index[i] = k;
        }
        let edges = self
            .edges
            .iter()
            .filter_map(|&(a, b)| {
                let (na, nb) = (new_index[a], new_index[b]);
                (na != usize::MAX && nb != usize::MAX).then_some((na, nb))
            })
            .collect();
        let pruned = Self {
            diagonal: kept.iter().map(|&i| self.diagonal[i]).collect(),
            edges,
            coupling: self.coupling,
        };
        (pruned, kept)
    }
}

pub fn build_hamiltonian(
    params: &PhysicalParams,
    config: &SpatialConfiguration,
    space: &StateSpace,
) -> Result<HamiltonianMatrix> {
    let n = space.n_atoms();
    if config.len() != n {
        return Err(invalid(format!(
            "configuration has {} atoms but the basis expects {n}",
            config.len()
        )));
    }
    let mut pair = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let e = vdw_pair_energy(params, config.distance(i, j)).unwrap_or(f64::INFINITY);
            pair[i * n + j] = e;
            pair[j * n + i] = e;
        }
    }
    let diagonal = space
        .states()
        .iter()
        .map(|s| {
            let mut e = 0.0;
            let mut rest = s.mask();
            while rest != 0 {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                let mut others = rest;
                while others != 0 {
                    let j = others.trailing_zeros() as usize;
                    others &= others - 1;
                    e += pair[i * n + j];
                }
            }
            e
        })
        .collect();
    let edges = space.coupled_pairs().into_iter().map(|p| (p.lower, p.upper)).collect();
    Ok(HamiltonianMatrix {
        diagonal,
        edges,
        coupling: params.rabi / 2.0,
    })
}

/// Probability of exactly `n` Rydberg excitations, `q[n][t_idx]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcitationHistogram {
    pub time_grid: Vec<f64>,
    pub q: Vec<Vec<f64>>,
}

impl ExcitationHistogram {
    pub fn zeros(time_grid: &[f64], max_count: usize) -> Self {
        Self {
            time_grid: time_grid.to_vec(),
            q: vec![vec![0.0; time_grid.len()]; max_count + 1],
        }
    }

    /// Every atom in the ground state at all times.
    pub fn ground(time_grid: &[f64], max_count: usize) -> Self {
        let mut h = Self::zeros(time_grid, max_count);
        h.q[0].fill(1.0);
        h
    }

    pub fn max_count(&self) -> usize {
        self.q.len().saturating_sub(1)
    }

    pub fn column(&self, t_idx: usize) -> Vec<f64> {
        self.q.iter().map(|row| row[t_idx]).collect()
    }

    pub fn column_sum(&self, t_idx: usize) -> f64 {
        self.q.iter().map(|row| row[t_idx]).sum()
    }

    /// Pads with zero rows so that counts up to `max_count` are present.
    pub fn widen(&mut self, max_count: usize) {
        while self.q.len() <= max_count {
            self.q.push(vec![0.0; self.time_grid.len()]);
        }
    }

    /// `self += w * other`, widening as needed.
    pub fn add_scaled(&mut self, other: &Self, w: f64) {
        self.widen(other.max_count());
        for (dst, src) in self.q.iter_mut().zip(&other.q) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += w * s;
            }
        }
    }
}

/// `(N_Ry, P_Ry)`: mean excitation number and probability of at least one.
pub fn excitation_expectations(hist: &ExcitationHistogram) -> (Vec<f64>, Vec<f64>) {
    let nt = hist.time_grid.len();
    let mut n_ry = vec![0.0; nt];
    let mut p_ry = vec![0.0; nt];
    for (n, row) in hist.q.iter().enumerate().skip(1) {
        for t in 0..nt {
            n_ry[t] += n as f64 * row[t];
            p_ry[t] += row[t];
        }
    }
    (n_ry, p_ry)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagationOptions {
    /// States with interaction energy above `factor * Omega` are removed.
    pub energy_cutoff_factor: f64,
    pub norm_tolerance: f64,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            energy_cutoff_factor: DEFAULT_ENERGY_CUTOFF_FACTOR,
            norm_tolerance: NORM_TOLERANCE,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PropagationInfo {
    pub dimension: usize,
    pub retained: usize,
    pub worst_norm_error: f64,
}

/// Eigendecomposition of a Hamiltonian, reusable for any initial state.
pub struct Propagator {
    values: DVector<f64>,
    vectors: DMatrix<f64>,
}

impl Propagator {
    pub fn new(h: &HamiltonianMatrix) -> Result<Self> {
        if h.diagonal.iter().any(|d| !d.is_finite()) {
            return Err(invalid("Hamiltonian has non-finite diagonal entries; prune first"));
        }
        let eig = SymmetricEigen::new(h.to_dense());
        Ok(Self {
            values: eig.eigenvalues,
            vectors: eig.eigenvectors,
        })
    }

    /// `exp(-i H t) psi0`.
    pub fn propagate(&self, psi0: &[Complex64], t: f64) -> Vec<Complex64> {
        let n = self.values.len();
        let v = &self.vectors;
        let mut coef = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..n {
            let mut w = Complex64::new(0.0, 0.0);
            for (i, p) in psi0.iter().enumerate() {
                w += p * v[(i, k)];
            }
            coef[k] = w * Complex64::from_polar(1.0, -self.values[k] * t);
        }
        (0..n)
            .map(|i| (0..n).map(|k| coef[k] * v[(i, k)]).sum())
            .collect()
    }

    /// Populations of every basis state on `times`, starting from basis
    /// state 0. Column `j` of the result belongs to `times[j]`.
    fn ground_populations(&self, times: &[f64]) -> DMatrix<f64> {
        let n = self.values.len();
        let w: Vec<f64> = (0..n).map(|k| self.vectors[(0, k)]).collect();
        // Eigenvectors with no ground-state overlap never contribute.
        let active: Vec<usize> = (0..n).filter(|&k| w[k].abs() > 1e-15).collect();
        let sub = self.vectors.select_columns(&active);
        let mut pops = DMatrix::zeros(n, times.len());
        const CHUNK: usize = 128;
        for (c, ts) in times.chunks(CHUNK).enumerate() {
            let mut cos = DMatrix::zeros(active.len(), ts.len());
            let mut sin = DMatrix::zeros(active.len(), ts.len());
            for (j, &t) in ts.iter().enumerate() {
                for (r, &k) in active.iter().enumerate() {
                    let (s, co) = (self.values[k] * t).sin_cos();
                    cos[(r, j)] = w[k] * co;
                    sin[(r, j)] = w[k] * s;
                }
            }
            let re = &sub * cos;
            let im = &sub * sin;
            for j in 0..ts.len() {
                for i in 0..n {
                    pops[(i, c * CHUNK + j)] = re[(i, j)].powi(2) + im[(i, j)].powi(2);
                }
            }
        }
        pops
    }
}

fn check_grid(time_grid: &[f64]) -> Result<()> {
    if time_grid.first().is_some_and(|&t| t != 0.0) {
        return Err(invalid("time grid must start at 0"));
    }
    if time_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("time grid must be strictly ascending"));
    }
    Ok(())
}

fn audit(hist: &ExcitationHistogram, tol: f64) -> Result<f64> {
    let mut worst = 0.0f64;
    let mut at = 0.0;
    for j in 0..hist.time_grid.len() {
        let dev = (hist.column_sum(j) - 1.0).abs();
        if dev > worst {
            worst = dev;
            at = hist.time_grid[j];
        }
    }
    if worst > tol {
        return Err(Error::Accuracy { worst, time: at });
    }
    Ok(worst)
}

/// Propagates from the all-ground state with default options.
pub fn evolve(h: &HamiltonianMatrix, space: &StateSpace, time_grid: &[f64]) -> Result<ExcitationHistogram> {
    evolve_with(h, space, time_grid, &PropagationOptions::default()).map(|r| r.0)
}

pub fn evolve_with(
    h: &HamiltonianMatrix,
    space: &StateSpace,
    time_grid: &[f64],
    opts: &PropagationOptions,
) -> Result<(ExcitationHistogram, PropagationInfo)> {
    check_grid(time_grid)?;
    if h.dimension() != space.dimension() {
        return Err(invalid("Hamiltonian and basis dimensions differ"));
    }
    let e_cut = opts.energy_cutoff_factor * 2.0 * h.coupling.abs();
    let (pruned, kept) = h.prune(e_cut);
    let prop = Propagator::new(&pruned)?;
    let pops = prop.ground_populations(time_grid);
    let mut hist = ExcitationHistogram::zeros(time_grid, space.max_excitations());
    for (k, &orig) in kept.iter().enumerate() {
        let n = excitation_count(space.state(orig));
        let row = &mut hist.q[n];
        for (j, slot) in row.iter_mut().enumerate() {
            *slot += pops[(k, j)];
        }
    }
    let worst = audit(&hist, opts.norm_tolerance)?;
    Ok((
        hist,
        PropagationInfo {
            dimension: h.dimension(),
            retained: kept.len(),
            worst_norm_error: worst,
        },
    ))
}

/// Independent route: adaptive Runge-Kutta on the sparse amplitude equations
/// of the pruned system.
pub fn evolve_rk(
    h: &HamiltonianMatrix,
    space: &StateSpace,
    time_grid: &[f64],
    prop_opts: &PropagationOptions,
    ode_opts: &OdeOptions,
) -> Result<ExcitationHistogram> {
    check_grid(time_grid)?;
    let e_cut = prop_opts.energy_cutoff_factor * 2.0 * h.coupling.abs();
    let (pruned, kept) = h.prune(e_cut);
    let mut psi0 = vec![Complex64::new(0.0, 0.0); pruned.dimension()];
    psi0[0] = Complex64::new(1.0, 0.0);
    let minus_i = Complex64::new(0.0, -1.0);
    let (states, _) = ode::integrate(
        |_, y, dy| {
            pruned.apply(y, dy);
            dy.iter_mut().for_each(|d| *d *= minus_i);
        },
        &psi0,
        time_grid,
        ode_opts,
    )?;
    let mut hist = ExcitationHistogram::zeros(time_grid, space.max_excitations());
    for (j, psi) in states.iter().enumerate() {
        for (k, &orig) in kept.iter().enumerate() {
            hist.q[excitation_count(space.state(orig))][j] += psi[k].norm_sqr();
        }
    }
    audit(&hist, prop_opts.norm_tolerance)?;
    Ok(hist)
}
