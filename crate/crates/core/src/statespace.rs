//! Bitmask basis of an N-atom ensemble with at most `m` Rydberg excitations.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::jc_reference::binomial_coefficient;

/// Largest supported ensemble; masks fit comfortably in a `u32`.
pub const MAX_ATOMS: usize = 24;

/// Product state; bit `i` set means atom `i` is in the Rydberg state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisState(pub u32);

impl BasisState {
    pub fn mask(self) -> u32 {
        self.0
    }

    pub fn is_excited(self, atom: usize) -> bool {
        self.0 >> atom & 1 == 1
    }
}

pub fn excitation_count(state: BasisState) -> usize {
    state.0.count_ones() as usize
}

/// A single-atom flip connecting two basis states. `lower` has the atom in
/// the ground state, `upper` has it excited.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoupledPair {
    pub lower: usize,
    pub upper: usize,
    pub atom: usize,
}

#[derive(Clone, Debug)]
pub struct StateSpace {
    n_atoms: usize,
    max_excitations: usize,
    states: Vec<BasisState>,
    index: HashMap<u32, usize>,
}

/// Dimension of the truncated space without building it.
pub fn truncated_dimension(n_atoms: usize, max_excitations: usize) -> usize {
    (0..=max_excitations.min(n_atoms))
        .map(|k| binomial_coefficient(n_atoms, k) as usize)
        .sum()
}

/// All masks of `n` bits with exactly `k` set, ascending.
fn masks_with_popcount(n: usize, k: usize) -> Vec<u32> {
    if k == 0 {
        return vec![0];
    }
    let mut out = Vec::with_capacity(binomial_coefficient(n, k) as usize);
    let limit: u64 = 1 << n;
    let mut v: u64 = (1 << k) - 1;
    // Gosper's hack: next larger integer with the same popcount.
    while v < limit {
        out.push(v as u32);
        let c = v & v.wrapping_neg();
        let r = v + c;
        v = (((r ^ v) >> 2) / c) | r;
    }
    out
}

pub fn enumerate_basis(n_atoms: usize, max_excitations: usize) -> Result<StateSpace> {
    if n_atoms < 1 || n_atoms > MAX_ATOMS {
        return Err(Error::Capacity {
            n_atoms,
            max: MAX_ATOMS,
        });
    }
    if max_excitations > n_atoms {
        return Err(crate::error::invalid(format!(
            "max_excitations {max_excitations} exceeds atom count {n_atoms}"
        )));
    }
    let mut states = Vec::with_capacity(truncated_dimension(n_atoms, max_excitations));
    for k in 0..=max_excitations {
        states.extend(masks_with_popcount(n_atoms, k).into_iter().map(BasisState));
    }
    let index = states.iter().enumerate().map(|(i, s)| (s.0, i)).collect();
    Ok(StateSpace {
        n_atoms,
        max_excitations,
        states,
        index,
    })
}

impl StateSpace {
    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn max_excitations(&self) -> usize {
        self.max_excitations
    }

    pub fn dimension(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    pub fn state(&self, idx: usize) -> BasisState {
        self.states[idx]
    }

    pub fn index_of(&self, state: BasisState) -> Option<usize> {
        self.index.get(&state.0).copied()
    }

    /// Number of states with excitation count `< k`; the `m = k - 1` space is
    /// exactly this prefix.
    pub fn prefix_len(&self, k: usize) -> usize {
        self.states.partition_point(|s| excitation_count(*s) < k)
    }

    pub fn coupled_pairs(&self) -> Vec<CoupledPair> {
        let mut pairs = Vec::new();
        for (lower, s) in self.states.iter().enumerate() {
            if excitation_count(*s) >= self.max_excitations {
                continue;
            }
            for atom in 0..self.n_atoms {
                if s.is_excited(atom) {
                    continue;
                }
                let up = BasisState(s.0 | 1 << atom);
                let upper = self.index[&up.0];
                pairs.push(CoupledPair { lower, upper, atom });
            }
        }
        pairs
    }
}

pub fn coupled_pairs(space: &StateSpace) -> Vec<CoupledPair> {
    space.coupled_pairs()
}
